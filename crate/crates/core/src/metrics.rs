//! Corpus scoring: BLEU-1..4 with brevity penalty and sentence-level
//! ROUGE-L F1 averaged over the corpus.
//!
//! BLEU uses corpus-level modified n-gram precision (counts clipped to
//! their maximum reference occurrence) with no smoothing: a zero
//! precision zeroes the cumulative score. The ROUGE variant label is
//! carried in every report so downstream comparisons cannot silently mix
//! variants.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Which ROUGE this toolkit computes.
pub const ROUGE_VARIANT: &str = "ROUGE-L-F1";

/// Scores for one hypothesis corpus against one reference corpus.
/// All scores are percentages in [0, 100].
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub bleu: [f64; 4],
    pub rouge: f64,
    pub brevity_penalty: f64,
    pub hyp_tokens: usize,
    pub ref_tokens: usize,
}

impl ScoreReport {
    pub fn zero() -> Self {
        ScoreReport {
            bleu: [0.0; 4],
            rouge: 0.0,
            brevity_penalty: 1.0,
            hyp_tokens: 0,
            ref_tokens: 0,
        }
    }

    /// Key-value text block, one `key = value` per line.
    pub fn to_text_block(&self) -> String {
        let mut out = String::new();
        for n in 0..4 {
            out.push_str(&format!("bleu{} = {:.4}\n", n + 1, self.bleu[n]));
        }
        out.push_str(&format!("rouge = {:.4}\n", self.rouge));
        out.push_str(&format!("rouge_variant = {ROUGE_VARIANT}\n"));
        out.push_str(&format!("brevity_penalty = {:.6}\n", self.brevity_penalty));
        out.push_str(&format!("hyp_tokens = {}\n", self.hyp_tokens));
        out.push_str(&format!("ref_tokens = {}\n", self.ref_tokens));
        out
    }

    pub fn csv_header() -> &'static str {
        "bleu1,bleu2,bleu3,bleu4,rouge,rouge_variant,brevity_penalty,hyp_tokens,ref_tokens"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{ROUGE_VARIANT},{},{},{}",
            self.bleu[0],
            self.bleu[1],
            self.bleu[2],
            self.bleu[3],
            self.rouge,
            self.brevity_penalty,
            self.hyp_tokens,
            self.ref_tokens
        )
    }
}

fn check_lengths(hyps: &[Vec<String>], refs: &[Vec<String>]) -> Result<()> {
    if hyps.len() != refs.len() {
        return Err(Error::Contract(format!(
            "hypothesis/reference pair counts differ: {} vs {}",
            hyps.len(),
            refs.len()
        )));
    }
    Ok(())
}

/// Modified n-gram precision counts for one order over the whole corpus.
fn precision_counts(hyps: &[Vec<String>], refs: &[Vec<String>], n: usize) -> (usize, usize) {
    let mut matched = 0;
    let mut total = 0;
    for (hyp, reference) in hyps.iter().zip(refs) {
        if hyp.len() < n {
            continue;
        }
        let mut hyp_counts: HashMap<&[String], usize> = HashMap::new();
        for gram in hyp.windows(n) {
            *hyp_counts.entry(gram).or_insert(0) += 1;
        }
        let mut ref_counts: HashMap<&[String], usize> = HashMap::new();
        for gram in reference.windows(n) {
            *ref_counts.entry(gram).or_insert(0) += 1;
        }
        for (gram, count) in hyp_counts {
            let clip = ref_counts.get(gram).copied().unwrap_or(0);
            matched += count.min(clip);
        }
        total += hyp.len() + 1 - n;
    }
    (matched, total)
}

/// Corpus BLEU with cumulative scores up to `max_n` (1..=4). `bleu[k]`
/// for k >= max_n stays zero. BP = exp(1 - r/c) when the hypothesis
/// corpus is shorter than the reference corpus, else 1.
pub fn bleu(hyps: &[Vec<String>], refs: &[Vec<String>], max_n: usize) -> Result<ScoreReport> {
    check_lengths(hyps, refs)?;
    if !(1..=4).contains(&max_n) {
        return Err(Error::Config(format!("max_n must be in 1..=4, got {max_n}")));
    }
    let hyp_tokens: usize = hyps.iter().map(Vec::len).sum();
    let ref_tokens: usize = refs.iter().map(Vec::len).sum();
    let brevity_penalty = if hyp_tokens == 0 {
        0.0
    } else if hyp_tokens <= ref_tokens {
        (1.0 - ref_tokens as f64 / hyp_tokens as f64).exp()
    } else {
        1.0
    };

    let mut report = ScoreReport {
        bleu: [0.0; 4],
        rouge: rouge(hyps, refs)?,
        brevity_penalty,
        hyp_tokens,
        ref_tokens,
    };

    let mut log_precisions = Vec::with_capacity(max_n);
    for n in 1..=max_n {
        let (matched, total) = precision_counts(hyps, refs, n);
        if matched == 0 || total == 0 {
            // Zero precision zeroes this and every higher cumulative score.
            break;
        }
        log_precisions.push((matched as f64 / total as f64).ln());
        let mean = log_precisions.iter().sum::<f64>() / log_precisions.len() as f64;
        report.bleu[n - 1] = 100.0 * brevity_penalty * mean.exp();
    }
    Ok(report)
}

/// Corpus-mean sentence ROUGE-L F1 as a percentage: per pair, precision
/// L/|hyp| and recall L/|ref| from the LCS length L, F = 2PR/(P+R).
pub fn rouge(hyps: &[Vec<String>], refs: &[Vec<String>]) -> Result<f64> {
    check_lengths(hyps, refs)?;
    if hyps.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (hyp, reference) in hyps.iter().zip(refs) {
        let l = lcs_length(hyp, reference);
        if l == 0 {
            continue;
        }
        let p = l as f64 / hyp.len() as f64;
        let r = l as f64 / reference.len() as f64;
        total += 2.0 * p * r / (p + r);
    }
    Ok(100.0 * total / hyps.len() as f64)
}

/// Longest-common-subsequence length by dynamic programming over a
/// rolling row.
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Split whitespace-tokenized lines into token lists.
pub fn tokenize_lines(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn identical_corpora_score_100() {
        let c = vec![toks("a b c d"), toks("e f g")];
        let report = bleu(&c, &c, 4).unwrap();
        for n in 0..4 {
            assert!((report.bleu[n] - 100.0).abs() < 1e-9, "bleu{}", n + 1);
        }
        assert!((report.rouge - 100.0).abs() < 1e-9);
        assert_eq!(report.brevity_penalty, 1.0);
    }

    #[test]
    fn hand_counted_unigram_precision() {
        let report = bleu(&[toks("a b c")], &[toks("a b d")], 1).unwrap();
        assert!((report.bleu[0] - 100.0 * 2.0 / 3.0).abs() < 1e-9);
        assert_eq!(report.brevity_penalty, 1.0);
    }

    #[test]
    fn hand_counted_brevity_penalty() {
        let report = bleu(&[toks("a")], &[toks("a b c d")], 1).unwrap();
        let bp = (1.0f64 - 4.0).exp();
        assert!((report.brevity_penalty - bp).abs() < 1e-12);
        assert!((report.bleu[0] - 100.0 * bp).abs() < 1e-9);
    }

    #[test]
    fn clipping_limits_repeated_ngrams() {
        // "the the the" vs "the cat": unigram matches clip to 1.
        let report = bleu(&[toks("the the the")], &[toks("the cat")], 1).unwrap();
        assert!((report.bleu[0] - 100.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn zero_precision_zeroes_score() {
        let report = bleu(&[toks("x y")], &[toks("a b")], 4).unwrap();
        assert_eq!(report.bleu, [0.0; 4]);
    }

    #[test]
    fn pair_count_mismatch_is_contract_error() {
        assert!(matches!(
            bleu(&[toks("a")], &[], 4),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn rouge_hand_example() {
        // hyp "a b c", ref "a c": LCS 2, P=2/3, R=1, F=0.8.
        let score = rouge(&[toks("a b c")], &[toks("a c")]).unwrap();
        assert!((score - 80.0).abs() < 1e-9);
    }

    #[test]
    fn rouge_disjoint_vocabularies() {
        let score = rouge(&[toks("a b")], &[toks("x y")]).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn lcs_identity_and_hand_trace() {
        let x = toks("p q r");
        assert_eq!(lcs_length(&x, &x), 3);
        assert_eq!(lcs_length(&toks("a b c d"), &toks("b d")), 2);
        assert_eq!(lcs_length(&toks(""), &toks("a")), 0);
    }

    #[test]
    fn report_carries_variant_label() {
        let report = ScoreReport::zero();
        assert!(report.to_text_block().contains("ROUGE-L-F1"));
        assert!(report.to_csv_row().contains("ROUGE-L-F1"));
    }

    #[test]
    fn bleu_permutation_invariant_over_pair_order() {
        let mut r = ChaCha8Rng::seed_from_u64(9);
        let vocab = ["a", "b", "c", "d", "e"];
        let mut gen_corpus = |n: usize| -> Vec<Vec<String>> {
            (0..n)
                .map(|_| {
                    let len = r.gen_range(1..8);
                    (0..len)
                        .map(|_| vocab[r.gen_range(0..vocab.len())].to_string())
                        .collect()
                })
                .collect()
        };
        let hyps = gen_corpus(20);
        let refs = gen_corpus(20);
        let base = bleu(&hyps, &refs, 4).unwrap();

        let mut order: Vec<usize> = (0..20).collect();
        order.shuffle(&mut r);
        let hyps2: Vec<_> = order.iter().map(|&i| hyps[i].clone()).collect();
        let refs2: Vec<_> = order.iter().map(|&i| refs[i].clone()).collect();
        let shuffled = bleu(&hyps2, &refs2, 4).unwrap();
        for n in 0..4 {
            assert!((base.bleu[n] - shuffled.bleu[n]).abs() < 1e-12);
        }
        assert!((base.brevity_penalty - shuffled.brevity_penalty).abs() < 1e-15);
    }

    #[test]
    fn modified_precisions_are_monotone_when_hyps_long_enough() {
        // p_n <= p_{n-1} when every hypothesis has at least n tokens.
        let mut r = ChaCha8Rng::seed_from_u64(21);
        let vocab = ["a", "b", "c"];
        for _ in 0..50 {
            let hyps: Vec<Vec<String>> = (0..5)
                .map(|_| {
                    (0..r.gen_range(4..9))
                        .map(|_| vocab[r.gen_range(0..3)].to_string())
                        .collect()
                })
                .collect();
            let refs: Vec<Vec<String>> = (0..5)
                .map(|_| {
                    (0..r.gen_range(4..9))
                        .map(|_| vocab[r.gen_range(0..3)].to_string())
                        .collect()
                })
                .collect();
            let mut prev = 1.0f64;
            for n in 1..=4 {
                let (m, t) = super::precision_counts(&hyps, &refs, n);
                let p = if t == 0 { 0.0 } else { m as f64 / t as f64 };
                assert!(p <= prev + 1e-12, "p{n} = {p} > p{} = {prev}", n - 1);
                prev = p;
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn lcs_symmetric_and_bounded(
            a in prop::collection::vec(0u8..3, 0..9),
            b in prop::collection::vec(0u8..3, 0..9)
        ) {
            let l = lcs_length(&a, &b);
            prop_assert_eq!(l, lcs_length(&b, &a));
            prop_assert!(l <= a.len().min(b.len()));
        }
    }
}
