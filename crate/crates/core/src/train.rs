//! Training loop: label-smoothed cross-entropy, Adam under a Noam
//! warmup schedule, per-step metric logging, periodic dev evaluation
//! with greedy decoding, and best-checkpoint selection.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::data::{make_batches, ParallelCorpus, Vocabulary, PAD_ID};
use crate::error::{Error, Result};
use crate::metrics::{bleu, ScoreReport};
use crate::model::{checkpoint, greedy_decode, HyperParams, ParamStore, SequenceBatch, TransformerModel};
use crate::tensor::{log_softmax, Elem, Tensor};

/// Deterministic sub-seed for one component of a run, derived from the
/// master seed so that one `--seed` flag controls everything.
pub fn derive_seed(master: u64, tag: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(tag.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Noam learning rate: `lr_scale * d^-0.5 * min(step^-0.5, step * warmup^-1.5)`.
/// Rises linearly to its peak at `step == warmup`, then decays as
/// inverse square root.
pub fn noam_lr(step: u64, d: usize, warmup: usize, lr_scale: f64) -> Result<f64> {
    if step == 0 {
        return Err(Error::Contract("noam_lr is defined for steps >= 1".into()));
    }
    if warmup == 0 {
        return Err(Error::Contract("warmup must be at least 1".into()));
    }
    let s = step as f64;
    let w = warmup as f64;
    Ok(lr_scale * (d as f64).powf(-0.5) * f64::min(s.powf(-0.5), s * w.powf(-1.5)))
}

/// Label-smoothed cross-entropy over `[rows, V]` logits: the smoothed
/// target puts `1-eps` on the true class, `eps/(V-2)` on every class
/// except the true class and PAD, and zero on PAD; averaged over rows
/// where `non_pad` holds.
pub fn smoothed_loss(logits: &Tensor, targets: &[u32], non_pad: &[bool], eps: Elem) -> Result<Tensor> {
    logits.smoothed_cross_entropy(targets, non_pad, eps, PAD_ID)
}

#[derive(Debug, Clone)]
struct Moments {
    m: Vec<Elem>,
    v: Vec<Elem>,
}

/// Dev-score record of the best checkpoint so far.
#[derive(Debug, Clone, PartialEq)]
pub struct BestRecord {
    pub metric: SelectionMetric,
    pub score: f64,
    pub step: u64,
}

/// Optimizer and bookkeeping state for one training run.
#[derive(Debug, Clone)]
pub struct TrainingState {
    pub step: u64,
    pub seed: u64,
    pub best: Option<BestRecord>,
    moments: Vec<Moments>,
}

impl TrainingState {
    pub fn new(params: &ParamStore, seed: u64) -> Self {
        TrainingState {
            step: 0,
            seed,
            best: None,
            moments: params
                .iter()
                .map(|p| Moments { m: vec![0.0; p.data.len()], v: vec![0.0; p.data.len()] })
                .collect(),
        }
    }
}

/// Bias-corrected Adam update with beta1 = 0.9, beta2 = 0.998.
pub fn adam_step(
    params: &mut ParamStore,
    grads: &[Vec<Elem>],
    state: &mut TrainingState,
    lr: f64,
) -> Result<()> {
    if grads.len() != params.len() || state.moments.len() != params.len() {
        return Err(Error::Contract(format!(
            "adam_step: {} params, {} grads, {} moment buffers",
            params.len(),
            grads.len(),
            state.moments.len()
        )));
    }
    let (b1, b2, eps) = (
        HyperParams::BETA1 as Elem,
        HyperParams::BETA2 as Elem,
        HyperParams::ADAM_EPS as Elem,
    );
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    let lr = lr as Elem;
    for ((param, grad), moments) in params.iter_mut().zip(grads).zip(&mut state.moments) {
        if grad.len() != param.data.len() {
            return Err(Error::Contract(format!(
                "adam_step: gradient length {} does not match parameter {:?}",
                grad.len(),
                param.name
            )));
        }
        for i in 0..grad.len() {
            let g = grad[i];
            moments.m[i] = b1 * moments.m[i] + (1.0 - b1) * g;
            moments.v[i] = b2 * moments.v[i] + (1.0 - b2) * g * g;
            let m_hat = moments.m[i] / bc1;
            let v_hat = moments.v[i] / bc2;
            param.data[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Scale all gradients down to a global L2 norm of `max_norm` when they
/// exceed it; returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut [Vec<Elem>], max_norm: Elem) -> Elem {
    let mut total = 0.0;
    for g in grads.iter() {
        for &x in g {
            total += x * x;
        }
    }
    let norm = total.sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            for x in g.iter_mut() {
                *x *= scale;
            }
        }
    }
    norm
}

/// Which dev metric drives checkpoint selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMetric {
    Rouge,
    Bleu1,
    DevAccuracy,
}

impl SelectionMetric {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionMetric::Rouge => "rouge",
            SelectionMetric::Bleu1 => "bleu1",
            SelectionMetric::DevAccuracy => "accuracy",
        }
    }
}

impl std::str::FromStr for SelectionMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rouge" => Ok(SelectionMetric::Rouge),
            "bleu1" => Ok(SelectionMetric::Bleu1),
            "accuracy" | "dev_accuracy" => Ok(SelectionMetric::DevAccuracy),
            other => Err(Error::Config(format!(
                "unknown selection metric {other:?} (expected rouge, bleu1, or accuracy)"
            ))),
        }
    }
}

/// One line of the metrics log. Training rows fill the train columns;
/// evaluation rows fill the dev columns.
#[derive(Debug, Clone, Default)]
pub struct MetricsRow {
    pub step: u64,
    pub lr: f64,
    pub train_loss: Option<f64>,
    pub train_accuracy: Option<f64>,
    pub train_perplexity: Option<f64>,
    pub dev_accuracy: Option<f64>,
    pub dev_perplexity: Option<f64>,
    pub dev_bleu: Option<[f64; 4]>,
    pub dev_rouge: Option<f64>,
}

impl MetricsRow {
    pub const CSV_HEADER: &'static str = "step,lr,train_loss,train_accuracy,train_perplexity,dev_accuracy,dev_perplexity,dev_bleu1,dev_bleu2,dev_bleu3,dev_bleu4,dev_rouge";

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let bleu = self.dev_bleu.unwrap_or_default();
        let bleu_cols = if self.dev_bleu.is_some() {
            format!("{},{},{},{}", bleu[0], bleu[1], bleu[2], bleu[3])
        } else {
            ",,,".to_string()
        };
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.step,
            self.lr,
            opt(self.train_loss),
            opt(self.train_accuracy),
            opt(self.train_perplexity),
            opt(self.dev_accuracy),
            opt(self.dev_perplexity),
            bleu_cols,
            opt(self.dev_rouge),
        )
    }
}

/// Token-level argmax accuracy and unsmoothed cross-entropy over the
/// non-pad positions of one batch, computed from raw logits.
pub fn token_metrics(logits_data: &[Elem], vocab: usize, batch: &SequenceBatch) -> (usize, usize, f64) {
    let mut correct = 0;
    let mut total = 0;
    let mut ce_sum = 0.0f64;
    for (row, (&target, &pad)) in batch.tgt_out_ids.iter().zip(batch.tgt_pad_mask.iter()).enumerate() {
        if pad {
            continue;
        }
        let slice = &logits_data[row * vocab..(row + 1) * vocab];
        let mut best = 0usize;
        for (k, &v) in slice.iter().enumerate().skip(1) {
            if v > slice[best] {
                best = k;
            }
        }
        if best as u32 == target {
            correct += 1;
        }
        let logp = log_softmax(slice);
        ce_sum -= logp[target as usize] as f64;
        total += 1;
    }
    (correct, total, ce_sum)
}

/// The corpora and vocabularies one training run consumes.
#[derive(Debug, Clone)]
pub struct CorpusBundle {
    pub train: ParallelCorpus,
    pub dev: ParallelCorpus,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
}

/// Budget and bookkeeping knobs for one run (everything outside the
/// architecture grid).
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub max_steps: u64,
    pub eval_every: u64,
    /// Stop after this many consecutive evaluations without improvement.
    pub patience: Option<u64>,
    pub selection: SelectionMetric,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Greedy decode budget for dev evaluation; derived from the dev set
    /// when absent.
    pub max_decode_len: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_steps: 1000,
            eval_every: 100,
            patience: None,
            selection: SelectionMetric::Rouge,
            seed: 0,
            out_dir: PathBuf::from("run"),
            max_decode_len: None,
        }
    }
}

/// Everything a finished run hands back.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best_score: f64,
    pub best_step: u64,
    pub best_report: ScoreReport,
    pub steps_run: u64,
    pub rows: Vec<MetricsRow>,
    pub best_path: PathBuf,
    pub last_path: PathBuf,
    pub metrics_path: PathBuf,
}

/// Dev-set evaluation: teacher-forced accuracy/perplexity plus greedy
/// decoding scored with BLEU and ROUGE.
pub fn evaluate_dev(
    model: &TransformerModel,
    bundle: &CorpusBundle,
    max_decode_len: usize,
) -> Result<(f64, f64, ScoreReport)> {
    let dev_batches = make_batches(
        &bundle.dev,
        &bundle.src_vocab,
        &bundle.tgt_vocab,
        model.hp.batch_size,
        None,
    )?;
    let mut correct = 0usize;
    let mut total = 0usize;
    let mut ce_sum = 0.0f64;
    for batch in &dev_batches {
        let mut fwd = model.forward(false, false, 0);
        let logits = fwd.logits(batch)?;
        let (c, t, ce) = token_metrics(&logits.data(), model.tgt_vocab_size, batch);
        correct += c;
        total += t;
        ce_sum += ce;
    }
    let accuracy = correct as f64 / total.max(1) as f64;
    let perplexity = (ce_sum / total.max(1) as f64).exp();

    let mut hyps = Vec::with_capacity(bundle.dev.len());
    let mut refs = Vec::with_capacity(bundle.dev.len());
    for (src, tgt) in &bundle.dev.pairs {
        let src_ids = bundle.src_vocab.encode(src);
        let out = greedy_decode(model, &src_ids, max_decode_len)?;
        hyps.push(bundle.tgt_vocab.decode(&out));
        refs.push(tgt.clone());
    }
    let report = bleu(&hyps, &refs, 4)?;
    Ok((accuracy, perplexity, report))
}

fn selection_score(metric: SelectionMetric, accuracy: f64, report: &ScoreReport) -> f64 {
    match metric {
        SelectionMetric::Rouge => report.rouge,
        SelectionMetric::Bleu1 => report.bleu[0],
        SelectionMetric::DevAccuracy => accuracy,
    }
}

/// Teacher-forced training with periodic dev evaluation. Keeps the
/// checkpoint with the best selection metric, stops at `max_steps` or
/// when patience runs out, and writes `best.ckpt`, `last.ckpt`, and
/// `metrics.csv` under the output directory.
pub fn train_model(hp: &HyperParams, bundle: &CorpusBundle, cfg: &TrainConfig) -> Result<TrainOutcome> {
    hp.validate()?;
    if cfg.max_steps == 0 {
        return Err(Error::Config("max_steps must be at least 1".into()));
    }
    if cfg.eval_every == 0 {
        return Err(Error::Config("eval_every must be at least 1".into()));
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let best_path = cfg.out_dir.join("best.ckpt");
    let last_path = cfg.out_dir.join("last.ckpt");
    let metrics_path = cfg.out_dir.join("metrics.csv");

    let mut model = TransformerModel::new(
        hp.clone(),
        bundle.src_vocab.len(),
        bundle.tgt_vocab.len(),
        derive_seed(cfg.seed, "init", 0),
    )?;
    let mut state = TrainingState::new(model.params(), cfg.seed);
    let mut rows: Vec<MetricsRow> = Vec::new();

    let max_decode_len = cfg.max_decode_len.unwrap_or_else(|| {
        bundle.dev.pairs.iter().map(|(_, t)| t.len()).max().unwrap_or(8) + 5
    });

    let mut best_score = f64::NEG_INFINITY;
    let mut best_step = 0u64;
    let mut best_report = ScoreReport::zero();
    let mut evals_without_improvement = 0u64;
    let mut stop = false;
    let mut epoch = 0u64;

    while !stop {
        let mut epoch_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "batches", epoch));
        let batches = make_batches(
            &bundle.train,
            &bundle.src_vocab,
            &bundle.tgt_vocab,
            hp.batch_size,
            Some(&mut epoch_rng),
        )?;
        for batch in &batches {
            let step = state.step + 1;
            let lr = noam_lr(step, hp.embed_dim, hp.warmup_steps, HyperParams::LR_SCALE)?;

            let mut fwd = model.forward(true, true, derive_seed(cfg.seed, "dropout", step));
            let logits = fwd.logits(batch)?;
            let loss = fwd.loss(&logits, batch, hp.label_smoothing as Elem)?;
            let loss_value = loss.item()? as f64;
            let (correct, total, ce_sum) = token_metrics(&logits.data(), model.tgt_vocab_size, batch);
            loss.backward()?;
            let mut grads = fwd.grads()?;
            drop(fwd);
            clip_global_norm(&mut grads, 5.0);
            adam_step(model.params_mut(), &grads, &mut state, lr)?;

            rows.push(MetricsRow {
                step,
                lr,
                train_loss: Some(loss_value),
                train_accuracy: Some(correct as f64 / total.max(1) as f64),
                train_perplexity: Some((ce_sum / total.max(1) as f64).exp()),
                ..MetricsRow::default()
            });

            if step % cfg.eval_every == 0 || step == cfg.max_steps {
                let (acc, ppl, report) = evaluate_dev(&model, bundle, max_decode_len)?;
                let score = selection_score(cfg.selection, acc, &report);
                rows.push(MetricsRow {
                    step,
                    lr,
                    dev_accuracy: Some(acc),
                    dev_perplexity: Some(ppl),
                    dev_bleu: Some(report.bleu),
                    dev_rouge: Some(report.rouge),
                    ..MetricsRow::default()
                });
                if score > best_score {
                    best_score = score;
                    best_step = step;
                    best_report = report;
                    evals_without_improvement = 0;
                    state.best = Some(BestRecord { metric: cfg.selection, score, step });
                    checkpoint::save(&best_path, &model, &bundle.src_vocab, &bundle.tgt_vocab, step)?;
                } else {
                    evals_without_improvement += 1;
                    if let Some(patience) = cfg.patience {
                        if evals_without_improvement >= patience {
                            stop = true;
                        }
                    }
                }
            }

            if step >= cfg.max_steps {
                stop = true;
            }
            if stop {
                break;
            }
        }
        epoch += 1;
    }

    checkpoint::save(&last_path, &model, &bundle.src_vocab, &bundle.tgt_vocab, state.step)?;
    if !best_path.exists() {
        // No evaluation ever ran; the last state doubles as best.
        checkpoint::save(&best_path, &model, &bundle.src_vocab, &bundle.tgt_vocab, state.step)?;
    }
    write_metrics_csv(&metrics_path, &rows)?;

    Ok(TrainOutcome {
        best_score,
        best_step,
        best_report,
        steps_run: state.step,
        rows,
        best_path,
        last_path,
        metrics_path,
    })
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut text = String::from(MetricsRow::CSV_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&row.to_csv());
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}
