//! Autoregressive decoding: greedy argmax and length-normalized beam
//! search. Both start from BOS, stop at EOS or the length budget, and
//! break score ties toward the lowest token id so results are
//! deterministic.

use crate::data::{BOS_ID, EOS_ID};
use crate::error::{Error, Result};
use crate::model::{SequenceBatch, TransformerModel};
use crate::tensor::{log_softmax, Elem, Tensor};

/// Logits of the final target position for the prefix `[BOS] + generated`.
pub(crate) fn step_logits(
    fwd: &mut super::Forward<'_>,
    src_row: &[u32],
    memory: &Tensor,
    generated: &[u32],
) -> Result<Vec<Elem>> {
    // The decoder input row carries BOS plus the generated prefix; the
    // trailing content of tgt_out is irrelevant for scoring.
    let pseudo_tgt: Vec<u32> = if generated.is_empty() {
        vec![BOS_ID]
    } else {
        generated.to_vec()
    };
    let batch = SequenceBatch::from_rows(&[src_row.to_vec()], &[pseudo_tgt])?;
    let logits = fwd.decode(&batch, memory)?;
    let v = fwd.model().tgt_vocab_size;
    let data = logits.data();
    let t = batch.tgt_len;
    // Score the position after the last known token: index |generated|.
    let pos = generated.len().min(t - 1);
    Ok(data[pos * v..(pos + 1) * v].to_vec())
}

fn argmax_lowest_id(row: &[Elem]) -> u32 {
    let mut best = 0usize;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best as u32
}

/// Greedy decoding: repeatedly append the argmax token until EOS or
/// `max_len` generated tokens. Returns content tokens (no BOS/EOS).
pub fn greedy_decode(model: &TransformerModel, src_ids: &[u32], max_len: usize) -> Result<Vec<u32>> {
    if max_len == 0 {
        return Err(Error::Config("max_len must be at least 1".into()));
    }
    if src_ids.is_empty() {
        return Err(Error::Contract("cannot decode an empty source".into()));
    }
    let mut fwd = model.forward(false, false, 0);
    let enc_batch = SequenceBatch::from_rows(&[src_ids.to_vec()], &[vec![BOS_ID]])?;
    let memory = fwd.encode(&enc_batch)?;

    let mut generated: Vec<u32> = Vec::new();
    while generated.len() < max_len {
        let logits = step_logits(&mut fwd, src_ids, &memory, &generated)?;
        let next = argmax_lowest_id(&logits);
        if next == EOS_ID {
            break;
        }
        generated.push(next);
    }
    Ok(generated)
}

#[derive(Debug, Clone)]
struct Hypothesis {
    tokens: Vec<u32>,
    log_prob: f64,
    finished: bool,
}

impl Hypothesis {
    fn normalized(&self, length_penalty: f64) -> f64 {
        let len = self.tokens.len().max(1) as f64;
        self.log_prob / len.powf(length_penalty)
    }
}

/// Deterministic ordering: higher log-probability first, then shorter,
/// then lexicographically smaller token ids.
fn rank_key(h: &Hypothesis, score: f64) -> (f64, usize, Vec<u32>) {
    (score, h.tokens.len(), h.tokens.clone())
}

/// Length-normalized beam search. `beam_width = 1` reduces exactly to
/// [`greedy_decode`]. Returns content tokens (no BOS/EOS).
pub fn beam_decode(
    model: &TransformerModel,
    src_ids: &[u32],
    beam_width: usize,
    max_len: usize,
    length_penalty: f64,
) -> Result<Vec<u32>> {
    if beam_width < 1 {
        return Err(Error::Config(format!("beam_width must be at least 1, got {beam_width}")));
    }
    if max_len == 0 {
        return Err(Error::Config("max_len must be at least 1".into()));
    }
    if src_ids.is_empty() {
        return Err(Error::Contract("cannot decode an empty source".into()));
    }
    let mut fwd = model.forward(false, false, 0);
    let enc_batch = SequenceBatch::from_rows(&[src_ids.to_vec()], &[vec![BOS_ID]])?;
    let memory = fwd.encode(&enc_batch)?;

    let mut beams = vec![Hypothesis { tokens: Vec::new(), log_prob: 0.0, finished: false }];
    for _ in 0..max_len {
        if beams.iter().all(|b| b.finished) {
            break;
        }
        let mut candidates: Vec<Hypothesis> = Vec::new();
        for beam in &beams {
            if beam.finished {
                candidates.push(beam.clone());
                continue;
            }
            let logits = step_logits(&mut fwd, src_ids, &memory, &beam.tokens)?;
            let logp = log_softmax(&logits);
            let mut order: Vec<usize> = (0..logp.len()).collect();
            order.sort_by(|&a, &b| {
                logp[b].partial_cmp(&logp[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
            });
            for &tok in order.iter().take(beam_width) {
                let mut next = beam.clone();
                next.log_prob += logp[tok] as f64;
                if tok as u32 == EOS_ID {
                    next.finished = true;
                } else {
                    next.tokens.push(tok as u32);
                }
                candidates.push(next);
            }
        }
        candidates.sort_by(|a, b| {
            let ka = rank_key(a, a.log_prob);
            let kb = rank_key(b, b.log_prob);
            kb.0.partial_cmp(&ka.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(ka.1.cmp(&kb.1))
                .then(ka.2.cmp(&kb.2))
        });
        candidates.truncate(beam_width);
        beams = candidates;
    }

    // Prefer finished hypotheses under the normalized score.
    let pick = |set: Vec<Hypothesis>| -> Option<Hypothesis> {
        set.into_iter()
            .map(|h| {
                let s = h.normalized(length_penalty);
                (h, s)
            })
            .max_by(|(ha, sa), (hb, sb)| {
                sa.partial_cmp(sb)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(hb.tokens.len().cmp(&ha.tokens.len()))
                    .then(hb.tokens.cmp(&ha.tokens))
            })
            .map(|(h, _)| h)
    };
    let finished: Vec<Hypothesis> = beams.iter().filter(|h| h.finished).cloned().collect();
    let best = if finished.is_empty() { pick(beams) } else { pick(finished) };
    Ok(best.map(|h| h.tokens).unwrap_or_default())
}
