use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::{BOS_ID, EOS_ID};
use crate::tensor::gradcheck::{finite_difference, relative_error};

fn tiny_hp() -> HyperParams {
    HyperParams {
        num_layers: 1,
        ff_dim: 16,
        embed_dim: 8,
        num_heads: 2,
        dropout: 0.1,
        batch_size: 64,
        label_smoothing: 0.1,
        warmup_steps: 100,
    }
}

fn tiny_model(seed: u64) -> TransformerModel {
    TransformerModel::new(tiny_hp(), 11, 11, seed).unwrap()
}

fn eye(n: usize) -> Vec<Elem> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

#[test]
fn hyperparams_default_is_reference_architecture() {
    let hp = HyperParams::default();
    assert_eq!(
        (hp.num_layers, hp.ff_dim, hp.embed_dim, hp.num_heads),
        (5, 256, 64, 2)
    );
    assert_eq!((hp.dropout, hp.batch_size, hp.label_smoothing, hp.warmup_steps), (0.3, 4096, 0.6, 300));
    hp.validate().unwrap();
}

#[test]
fn hyperparams_rejects_indivisible_heads() {
    let hp = HyperParams { embed_dim: 10, num_heads: 4, ..tiny_hp() };
    assert!(matches!(hp.validate(), Err(Error::Config(_))));
}

#[test]
fn attention_saturates_to_matching_key_value_row() {
    // h=1 with identity projections: a query equal to one of two
    // orthogonal keys at large scale attends only to that key.
    let hp = HyperParams { num_heads: 1, embed_dim: 4, ..tiny_hp() };
    let mut model = TransformerModel::new(hp, 8, 8, 1).unwrap();
    let d = 4;
    for name in ["q", "k", "v", "o"] {
        model
            .params_mut()
            .set_by_name(&format!("enc.0.self_attn.{name}.w"), eye(d))
            .unwrap();
    }
    let mut fwd = model.forward(false, false, 0);
    let g = fwd.graph().clone();
    let scale = 50.0;
    let q = g.constant(vec![scale, 0.0, 0.0, 0.0], &[1, d]).unwrap();
    let kv = g
        .constant(vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0], &[2, d])
        .unwrap();
    let attn = model.enc[0].self_attn;
    let out = fwd.multi_head_attention(&attn, &q, &kv, &kv, 1, None).unwrap();
    let data = out.data();
    assert!((data[0] - 1.0).abs() < 1e-6, "{data:?}");
    for &v in &data[1..] {
        assert!(v.abs() < 1e-6, "{data:?}");
    }
}

#[test]
fn attention_output_width_matches_input_width() {
    let model = tiny_model(3);
    let mut fwd = model.forward(false, false, 0);
    let g = fwd.graph().clone();
    let mut r = ChaCha8Rng::seed_from_u64(5);
    for (batch, q_rows, kv_rows) in [(1, 3, 5), (2, 2, 4), (3, 1, 1)] {
        let d = model.hp.embed_dim;
        let q_data: Vec<Elem> = (0..batch * q_rows * d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let kv_data: Vec<Elem> = (0..batch * kv_rows * d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let q = g.constant(q_data, &[batch * q_rows, d]).unwrap();
        let kv = g.constant(kv_data, &[batch * kv_rows, d]).unwrap();
        let attn = model.enc[0].self_attn;
        let out = fwd.multi_head_attention(&attn, &q, &kv, &kv, batch, None).unwrap();
        assert_eq!(out.shape(), vec![batch * q_rows, d]);
    }
}

#[test]
fn sublayer_zero_function_is_layer_norm() {
    let model = tiny_model(7);
    let mut fwd = model.forward(false, false, 0);
    let g = fwd.graph().clone();
    let d = model.hp.embed_dim;
    let mut r = ChaCha8Rng::seed_from_u64(9);
    let x_data: Vec<Elem> = (0..3 * d).map(|_| r.gen_range(-2.0..2.0)).collect();
    let x = g.constant(x_data.clone(), &[3, d]).unwrap();
    let ln = model.enc[0].ln1;
    let zero = g.constant(vec![0.0; 3 * d], &[3, d]).unwrap();
    let wrapped = fwd.sublayer_apply(&x, &ln, |_, _| Ok(zero.clone())).unwrap();
    // Fresh model has gain=1 bias=0, so this equals plain layer norm.
    let direct = x.layer_norm(fwd.p(ln.gain), fwd.p(ln.bias), LN_EPS).unwrap();
    let (a, b) = (wrapped.data(), direct.data());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn sublayer_output_rows_are_normalized() {
    let model = tiny_model(11);
    let mut fwd = model.forward(false, false, 0);
    let g = fwd.graph().clone();
    let d = model.hp.embed_dim;
    let mut r = ChaCha8Rng::seed_from_u64(13);
    let x_data: Vec<Elem> = (0..4 * d).map(|_| r.gen_range(-2.0..2.0)).collect();
    let x = g.constant(x_data, &[4, d]).unwrap();
    let layer = model.enc[0];
    let out = fwd
        .sublayer_apply(&x, &layer.ln1, |f, x| f.feed_forward(x, &layer.ff1, &layer.ff2))
        .unwrap();
    for row in out.data().chunks(d) {
        let mean: Elem = row.iter().sum::<Elem>() / d as Elem;
        let var: Elem = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<Elem>() / d as Elem;
        assert!(mean.abs() < 1e-10, "row mean {mean}");
        assert!((var - 1.0).abs() < 1e-4, "row var {var}");
    }
}

#[test]
fn sublayer_gradient_reaches_both_branches() {
    let model = tiny_model(17);
    let mut fwd = model.forward(true, false, 0);
    let g = fwd.graph().clone();
    let d = model.hp.embed_dim;
    let mut r = ChaCha8Rng::seed_from_u64(19);
    let x_data: Vec<Elem> = (0..2 * d).map(|_| r.gen_range(-1.0..1.0)).collect();
    let x = g.leaf(x_data, &[2, d], true).unwrap();
    let layer = model.enc[0];
    let out = fwd
        .sublayer_apply(&x, &layer.ln1, |f, x| f.feed_forward(x, &layer.ff1, &layer.ff2))
        .unwrap();
    out.mul(&out).unwrap().sum().backward().unwrap();
    // Residual branch: gradient reaches x. Sublayer branch: gradient
    // reaches the feed-forward weights.
    assert!(x.grad().unwrap().iter().any(|&v| v != 0.0));
    let ff_w = fwd.p(layer.ff1.w).grad().unwrap();
    assert!(ff_w.iter().any(|&v| v != 0.0));
}

#[test]
fn encode_single_token_smoke() {
    let model = tiny_model(23);
    let mut fwd = model.forward(false, false, 0);
    let batch = SequenceBatch::from_rows(&[vec![4]], &[vec![4]]).unwrap();
    let memory = fwd.encode(&batch).unwrap();
    assert_eq!(memory.shape(), vec![1, 1, 8]);
    assert!(memory.data().iter().all(|v| v.is_finite()));
}

#[test]
fn encode_rejects_out_of_range_ids() {
    let model = tiny_model(23);
    let mut fwd = model.forward(false, false, 0);
    let mut batch = SequenceBatch::from_rows(&[vec![4]], &[vec![4]]).unwrap();
    batch.src_ids[0] = 11;
    assert!(matches!(fwd.encode(&batch), Err(Error::Data(_))));
}

#[test]
fn encoder_padding_invariance() {
    let model = tiny_model(29);
    let ids = vec![4u32, 5, 6];
    let plain = SequenceBatch::from_rows(&[ids.clone()], &[vec![4]]).unwrap();

    // Same sentence with two masked pad columns appended.
    let mut padded = plain.clone();
    padded.src_len = 5;
    padded.src_ids = vec![4, 5, 6, PAD_ID, PAD_ID];
    padded.src_pad_mask = vec![false, false, false, true, true];

    let mut f1 = model.forward(false, false, 0);
    let m1 = f1.encode(&plain).unwrap().data();
    let mut f2 = model.forward(false, false, 0);
    let m2 = f2.encode(&padded).unwrap().data();
    let d = model.hp.embed_dim;
    for i in 0..ids.len() * d {
        assert!((m1[i] - m2[i]).abs() < 1e-10, "position {i}");
    }
}

#[test]
fn identical_sentences_in_batch_encode_identically() {
    let model = tiny_model(31);
    let ids = vec![4u32, 7, 5];
    let batch = SequenceBatch::from_rows(&[ids.clone(), ids.clone()], &[vec![4], vec![4]]).unwrap();
    let mut fwd = model.forward(false, false, 0);
    let memory = fwd.encode(&batch).unwrap().data();
    let row = ids.len() * model.hp.embed_dim;
    assert_eq!(memory[..row], memory[row..2 * row]);
}

#[test]
fn decoder_causality() {
    let model = tiny_model(37);
    let src = vec![4u32, 5];
    let base_tgt = vec![6u32, 7, 8, 9];
    let mut perturbed_tgt = base_tgt.clone();
    perturbed_tgt[2] = 10; // decoder input position 3 after the BOS shift

    let logits_for = |tgt: &Vec<u32>| {
        let batch = SequenceBatch::from_rows(&[src.clone()], &[tgt.clone()]).unwrap();
        let mut fwd = model.forward(false, false, 0);
        let memory = fwd.encode(&batch).unwrap();
        (fwd.decode(&batch, &memory).unwrap().data(), batch.tgt_len)
    };
    let (a, t) = logits_for(&base_tgt);
    let (b, _) = logits_for(&perturbed_tgt);
    let v = model.tgt_vocab_size;
    assert_eq!(a.len(), t * v);
    // Input position 3 changed; logits at positions 0..3 must be intact.
    for pos in 0..3 {
        for j in 0..v {
            let (x, y) = (a[pos * v + j], b[pos * v + j]);
            assert!((x - y).abs() < 1e-10, "pos {pos} logit {j}: {x} vs {y}");
        }
    }
    // And the perturbation is visible at or after position 3.
    let tail_changed = (3 * v..t * v).any(|i| (a[i] - b[i]).abs() > 1e-10);
    assert!(tail_changed);
}

#[test]
fn decode_logits_shape_is_vocab_sized() {
    let model = tiny_model(41);
    let batch = SequenceBatch::from_rows(&[vec![4, 5]], &[vec![6, 7, 8]]).unwrap();
    let mut fwd = model.forward(false, false, 0);
    let memory = fwd.encode(&batch).unwrap();
    let logits = fwd.decode(&batch, &memory).unwrap();
    assert_eq!(logits.shape(), vec![1, batch.tgt_len, 11]);
}

#[test]
fn decode_rejects_foreign_memory_shape() {
    let model = tiny_model(43);
    let b1 = SequenceBatch::from_rows(&[vec![4, 5]], &[vec![6]]).unwrap();
    let b2 = SequenceBatch::from_rows(&[vec![4, 5, 6]], &[vec![6]]).unwrap();
    let mut fwd = model.forward(false, false, 0);
    let memory = fwd.encode(&b1).unwrap();
    assert!(matches!(fwd.decode(&b2, &memory), Err(Error::Contract(_))));
}

#[test]
fn loss_padding_invariance() {
    let model = tiny_model(47);
    let batch = SequenceBatch::from_rows(&[vec![4, 5, 6]], &[vec![7, 8]]).unwrap();

    let mut widened = batch.clone();
    widened.src_len += 2;
    widened.src_ids = [batch.src_ids.clone(), vec![PAD_ID, PAD_ID]].concat();
    widened.src_pad_mask = [batch.src_pad_mask.clone(), vec![true, true]].concat();
    widened.tgt_len += 1;
    widened.tgt_in_ids = [batch.tgt_in_ids.clone(), vec![PAD_ID]].concat();
    widened.tgt_out_ids = [batch.tgt_out_ids.clone(), vec![PAD_ID]].concat();
    widened.tgt_pad_mask = [batch.tgt_pad_mask.clone(), vec![true]].concat();

    let loss_of = |b: &SequenceBatch| {
        let mut fwd = model.forward(false, false, 0);
        let logits = fwd.logits(b).unwrap();
        fwd.loss(&logits, b, 0.3).unwrap().item().unwrap()
    };
    let (l1, l2) = (loss_of(&batch), loss_of(&widened));
    assert!((l1 - l2).abs() < 1e-8, "{l1} vs {l2}");
}

#[test]
fn parameter_count_matches_closed_form() {
    for (hp, vs, vt) in [
        (tiny_hp(), 11, 11),
        (HyperParams { num_layers: 3, ff_dim: 32, embed_dim: 16, num_heads: 4, ..tiny_hp() }, 23, 17),
        (HyperParams::default(), 50, 40),
    ] {
        let model = TransformerModel::new(hp.clone(), vs, vt, 0).unwrap();
        assert_eq!(model.parameter_count(), parameter_count_formula(&hp, vs, vt));
    }
}

#[test]
fn end_to_end_gradients_match_finite_differences() {
    let model = tiny_model(53);
    let batch = SequenceBatch::from_rows(
        &[vec![4, 5, 6], vec![7, 8]],
        &[vec![9, 10], vec![4, 5, 6]],
    )
    .unwrap();
    let eps = 0.1;
    let dropout_seed = 99;

    let mut fwd = model.forward(true, true, dropout_seed);
    let logits = fwd.logits(&batch).unwrap();
    fwd.loss(&logits, &batch, eps).unwrap().backward().unwrap();
    let grads = fwd.grads().unwrap();

    let mut probe = TransformerModel::new(model.hp.clone(), 11, 11, 53).unwrap();
    let n_params = probe.params().len();
    for idx in 0..n_params {
        let base = probe.params().get(ParamId(idx)).data.clone();
        let fd = finite_difference(
            |vals| {
                probe.params_mut().iter_mut().nth(idx).unwrap().data = vals.to_vec();
                let mut f = probe.forward(false, true, dropout_seed);
                let logits = f.logits(&batch).unwrap();
                f.loss(&logits, &batch, eps).unwrap().item().unwrap()
            },
            &base,
            1e-5,
        );
        probe.params_mut().iter_mut().nth(idx).unwrap().data = base;
        let err = relative_error(&grads[idx], &fd);
        let name = &model.params().get(ParamId(idx)).name;
        assert!(err < 1e-4, "param {name}: relative error {err}");
    }
}

#[test]
fn greedy_respects_max_len_budget() {
    let model = tiny_model(59);
    let out = greedy_decode(&model, &[4, 5, 6], 1).unwrap();
    assert!(out.len() <= 1);
}

#[test]
fn greedy_is_deterministic() {
    let model = tiny_model(61);
    let a = greedy_decode(&model, &[4, 5, 6, 7], 8).unwrap();
    let b = greedy_decode(&model, &[4, 5, 6, 7], 8).unwrap();
    assert_eq!(a, b);
}

#[test]
fn beam_width_zero_is_config_error() {
    let model = tiny_model(67);
    assert!(matches!(
        beam_decode(&model, &[4], 0, 4, 1.0),
        Err(Error::Config(_))
    ));
}

#[test]
fn beam_one_equals_greedy_on_random_inputs() {
    let model = tiny_model(71);
    let mut r = ChaCha8Rng::seed_from_u64(73);
    for _ in 0..100 {
        let len = r.gen_range(1..6);
        let src: Vec<u32> = (0..len).map(|_| r.gen_range(4..11)).collect();
        let greedy = greedy_decode(&model, &src, 6).unwrap();
        let beam = beam_decode(&model, &src, 1, 6, 1.0).unwrap();
        assert_eq!(greedy, beam, "src {src:?}");
    }
}

/// Teacher-forced total log-probability of a generated sequence
/// (including the EOS step when `finished`).
fn sequence_logp(model: &TransformerModel, src: &[u32], content: &[u32], finished: bool) -> f64 {
    let mut fwd = model.forward(false, false, 0);
    let enc_batch = SequenceBatch::from_rows(&[src.to_vec()], &[vec![BOS_ID]]).unwrap();
    let memory = fwd.encode(&enc_batch).unwrap();
    let mut total = 0.0f64;
    let steps = content.len() + usize::from(finished);
    for t in 0..steps {
        let prefix: Vec<u32> = content[..t.min(content.len())].to_vec();
        let logits = decode::step_logits(&mut fwd, src, &memory, &prefix).unwrap();
        let logp = crate::tensor::log_softmax(&logits);
        let tok = if t < content.len() { content[t] } else { EOS_ID };
        total += logp[tok as usize] as f64;
    }
    total
}

#[test]
fn beam_four_beats_greedy_log_probability() {
    // Exhaustive comparison on a 5-content-token vocabulary, length <= 4.
    let mut compared = 0;
    for seed in 0..12 {
        let hp = HyperParams { embed_dim: 8, num_heads: 2, ..tiny_hp() };
        let model = TransformerModel::new(hp, 9, 9, seed).unwrap();
        let src = vec![4u32, 5, 6];
        let greedy = greedy_decode(&model, &src, 4).unwrap();
        let beam = beam_decode(&model, &src, 4, 4, 0.0).unwrap();
        if greedy.len() == beam.len() {
            let gf = greedy.len() < 4;
            let lp_g = sequence_logp(&model, &src, &greedy, gf);
            let lp_b = sequence_logp(&model, &src, &beam, gf);
            assert!(lp_b >= lp_g - 1e-9, "seed {seed}: beam {lp_b} < greedy {lp_g}");
            compared += 1;
        }
    }
    assert!(compared > 0, "no comparable pairs found");
}

#[test]
fn unpruned_beam_matches_exhaustive_search() {
    let hp = HyperParams { embed_dim: 8, num_heads: 2, ..tiny_hp() };
    let model = TransformerModel::new(hp, 7, 7, 3).unwrap();
    let src = vec![4u32, 5];
    let max_len = 3;
    let alpha = 1.0;
    // Wide enough that no candidate is ever pruned.
    let beam = beam_decode(&model, &src, 400, max_len, alpha).unwrap();

    // Enumerate every decodable outcome: terminated sequences of length
    // <= max_len - 1 plus unterminated sequences of exactly max_len.
    let token_ids: Vec<u32> = (0..7).filter(|&i| i != EOS_ID).collect();
    let mut best: Option<(f64, Vec<u32>)> = None;
    let mut consider = |content: Vec<u32>, finished: bool| {
        let lp = sequence_logp(&model, &src, &content, finished);
        let norm = lp / (content.len().max(1) as f64).powf(alpha);
        // Finished outcomes always win over unfinished ones here because
        // the unpruned beam retains every finished hypothesis.
        if finished {
            match &best {
                Some((s, toks)) => {
                    if norm > *s || (norm == *s && content < *toks) {
                        best = Some((norm, content));
                    }
                }
                None => best = Some((norm, content)),
            }
        }
    };
    let mut stack: Vec<Vec<u32>> = vec![vec![]];
    while let Some(seq) = stack.pop() {
        if seq.len() < max_len {
            consider(seq.clone(), true);
        }
        if seq.len() < max_len {
            for &t in &token_ids {
                let mut next = seq.clone();
                next.push(t);
                stack.push(next);
            }
        }
    }
    let (_, expected) = best.unwrap();
    assert_eq!(beam, expected);
}

#[test]
fn checkpoint_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = crate::data::synthetic::copy_corpus("train", 50, 7, 6, 1);
    let vocab = crate::data::build_vocab(&corpus, crate::data::Side::Source, 1).unwrap();
    let model = TransformerModel::new(tiny_hp(), vocab.len(), vocab.len(), 79).unwrap();
    let p1 = dir.path().join("a.ckpt");
    let p2 = dir.path().join("b.ckpt");
    checkpoint::save(&p1, &model, &vocab, &vocab, 123).unwrap();
    let loaded = checkpoint::load(&p1).unwrap();
    assert_eq!(loaded.step, 123);
    assert_eq!(loaded.model.hp, model.hp);
    checkpoint::save(&p2, &loaded.model, &loaded.src_vocab, &loaded.tgt_vocab, loaded.step).unwrap();
    let (b1, b2) = (std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    assert_eq!(b1, b2);

    // Loaded parameters drive identical forwards.
    let batch = SequenceBatch::from_rows(&[vec![4, 5]], &[vec![5, 6]]).unwrap();
    let a = model.forward(false, false, 0).logits(&batch).unwrap().data();
    let b = loaded.model.forward(false, false, 0).logits(&batch).unwrap().data();
    assert_eq!(a, b);
}

#[test]
fn checkpoint_rejects_wrong_magic() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.ckpt");
    std::fs::write(&p, b"NOTACKPTxxxxxxx").unwrap();
    assert!(matches!(checkpoint::load(&p), Err(Error::Data(_))));
}
