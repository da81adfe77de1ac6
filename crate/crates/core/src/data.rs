//! Parallel corpus ingestion, vocabulary construction, and batching.
//!
//! A corpus is two aligned plain-text files (UTF-8, one sentence per
//! line, whitespace tokenized). A manifest names the six files of the
//! three splits. Vocabularies order tokens by descending frequency with
//! lexicographic tie-breaks after four reserved entries.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kv::KvFile;
use crate::model::SequenceBatch;

pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const UNK_ID: u32 = 3;
pub const RESERVED_TOKENS: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Which side of a parallel corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Source,
    Target,
}

/// Aligned (source tokens, target tokens) pairs for one split.
#[derive(Debug, Clone)]
pub struct ParallelCorpus {
    pub split: String,
    pub pairs: Vec<(Vec<String>, Vec<String>)>,
}

impl ParallelCorpus {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn side_tokens(&self, side: Side) -> impl Iterator<Item = &String> {
        self.pairs.iter().flat_map(move |(s, t)| match side {
            Side::Source => s.iter(),
            Side::Target => t.iter(),
        })
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(text.lines().map(str::to_string).collect())
}

/// Load one split from two line-aligned files. Whitespace tokenization;
/// line i of each file becomes pair i.
pub fn load_corpus(source_path: &Path, target_path: &Path, split: &str) -> Result<ParallelCorpus> {
    let src_lines = read_lines(source_path)?;
    let tgt_lines = read_lines(target_path)?;
    if src_lines.len() != tgt_lines.len() {
        return Err(Error::Data(format!(
            "{split}: alignment error: {} has {} lines, {} has {} lines",
            source_path.display(),
            src_lines.len(),
            target_path.display(),
            tgt_lines.len()
        )));
    }
    let mut pairs = Vec::with_capacity(src_lines.len());
    for (i, (src, tgt)) in src_lines.iter().zip(&tgt_lines).enumerate() {
        let s: Vec<String> = src.split_whitespace().map(str::to_string).collect();
        let t: Vec<String> = tgt.split_whitespace().map(str::to_string).collect();
        if s.is_empty() {
            return Err(Error::Data(format!(
                "{split}: empty line {} in {}",
                i + 1,
                source_path.display()
            )));
        }
        if t.is_empty() {
            return Err(Error::Data(format!(
                "{split}: empty line {} in {}",
                i + 1,
                target_path.display()
            )));
        }
        pairs.push((s, t));
    }
    Ok(ParallelCorpus { split: split.to_string(), pairs })
}

/// Token <-> id bijection with the four reserved entries first.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Rebuild from a full ordered token list (reserved entries first).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 4 || tokens[..4] != RESERVED_TOKENS.map(str::to_string) {
            return Err(Error::Data(
                "vocabulary must start with the 4 reserved tokens".into(),
            ));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), i as u32).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary token {tok:?}")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    /// Total size including the reserved entries.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Id of a token, UNK when absent.
    pub fn id_of(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token_of(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.id_of(t)).collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token_of(i).unwrap_or(RESERVED_TOKENS[UNK_ID as usize]).to_string())
            .collect()
    }

    /// One token per line, reserved entries first.
    pub fn write_file(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for tok in &self.tokens {
            text.push_str(tok);
            text.push('\n');
        }
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let lines = read_lines(path)?;
        Self::from_tokens(lines)
    }

    /// Stable content hash used for checkpoint/vocabulary compatibility
    /// checks.
    pub fn sha256_hex(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for tok in &self.tokens {
            hasher.update(tok.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Build a vocabulary from one side of a corpus: all tokens with
/// frequency >= `min_freq`, ordered by descending frequency then
/// lexicographically, after the reserved entries.
pub fn build_vocab(corpus: &ParallelCorpus, side: Side, min_freq: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::Contract("cannot build a vocabulary from an empty corpus".into()));
    }
    if min_freq == 0 {
        return Err(Error::Config("min_freq must be at least 1".into()));
    }
    let mut counts: HashMap<&String, usize> = HashMap::new();
    for tok in corpus.side_tokens(side) {
        *counts.entry(tok).or_insert(0) += 1;
    }
    let mut ranked: Vec<(&String, usize)> = counts
        .into_iter()
        .filter(|&(tok, n)| n >= min_freq && !RESERVED_TOKENS.contains(&tok.as_str()))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut tokens: Vec<String> = RESERVED_TOKENS.iter().map(|s| s.to_string()).collect();
    tokens.extend(ranked.into_iter().map(|(t, _)| t.clone()));
    Vocabulary::from_tokens(tokens)
}

/// Group sentences into padded batches whose padded target token count
/// `B x (T_max+1)` never exceeds `token_budget`. Sentences are sorted by
/// length for tight padding; batch order is shuffled when `rng` is
/// given. Every sentence appears in exactly one batch.
pub fn make_batches(
    corpus: &ParallelCorpus,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    token_budget: usize,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<Vec<SequenceBatch>> {
    if corpus.is_empty() {
        return Err(Error::Contract("cannot batch an empty corpus".into()));
    }
    for (src, tgt) in &corpus.pairs {
        if tgt.len() + 2 > token_budget {
            return Err(Error::Data(format!(
                "sentence longer than batch budget {token_budget}: {:?} -> {:?}",
                src.join(" "),
                tgt.join(" ")
            )));
        }
    }

    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.sort_by_key(|&i| {
        let (src, tgt) = &corpus.pairs[i];
        (tgt.len(), src.len(), i)
    });

    let mut batches = Vec::new();
    let mut group: Vec<usize> = Vec::new();
    let mut max_tgt = 0usize;
    for &i in &order {
        let tgt_len = corpus.pairs[i].1.len();
        let new_max = max_tgt.max(tgt_len);
        if !group.is_empty() && (group.len() + 1) * (new_max + 1) > token_budget {
            batches.push(build_batch(corpus, &group, src_vocab, tgt_vocab)?);
            group.clear();
            max_tgt = 0;
        }
        max_tgt = max_tgt.max(tgt_len);
        group.push(i);
    }
    if !group.is_empty() {
        batches.push(build_batch(corpus, &group, src_vocab, tgt_vocab)?);
    }

    if let Some(rng) = rng.as_deref_mut() {
        batches.shuffle(rng);
    }
    Ok(batches)
}

fn build_batch(
    corpus: &ParallelCorpus,
    indices: &[usize],
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
) -> Result<SequenceBatch> {
    let src_rows: Vec<Vec<u32>> = indices
        .iter()
        .map(|&i| src_vocab.encode(&corpus.pairs[i].0))
        .collect();
    let tgt_rows: Vec<Vec<u32>> = indices
        .iter()
        .map(|&i| tgt_vocab.encode(&corpus.pairs[i].1))
        .collect();
    SequenceBatch::from_rows(&src_rows, &tgt_rows)
}

/// Manifest naming the six corpus files. Relative paths resolve against
/// the manifest's directory.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub train_src: PathBuf,
    pub train_tgt: PathBuf,
    pub dev_src: PathBuf,
    pub dev_tgt: PathBuf,
    pub test_src: PathBuf,
    pub test_tgt: PathBuf,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let kv = KvFile::load(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |key: &str| -> Result<PathBuf> {
            let raw = kv.require(key)?;
            let p = PathBuf::from(raw);
            Ok(if p.is_absolute() { p } else { base.join(p) })
        };
        Ok(Manifest {
            train_src: resolve("train.src")?,
            train_tgt: resolve("train.tgt")?,
            dev_src: resolve("dev.src")?,
            dev_tgt: resolve("dev.tgt")?,
            test_src: resolve("test.src")?,
            test_tgt: resolve("test.tgt")?,
        })
    }

    pub fn load_split(&self, split: &str) -> Result<ParallelCorpus> {
        let (src, tgt) = match split {
            "train" => (&self.train_src, &self.train_tgt),
            "dev" => (&self.dev_src, &self.dev_tgt),
            "test" => (&self.test_src, &self.test_tgt),
            other => return Err(Error::Config(format!("unknown split {other:?}"))),
        };
        load_corpus(src, tgt, split)
    }
}

/// Per-split counts in the layout of the reference corpus statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitStats {
    pub sentences: usize,
    pub src_words: usize,
    pub tgt_words: usize,
    pub src_vocab: usize,
    pub tgt_vocab: usize,
}

pub fn split_stats(corpus: &ParallelCorpus) -> SplitStats {
    let distinct = |side: Side| {
        corpus
            .side_tokens(side)
            .collect::<std::collections::HashSet<_>>()
            .len()
    };
    SplitStats {
        sentences: corpus.len(),
        src_words: corpus.side_tokens(Side::Source).count(),
        tgt_words: corpus.side_tokens(Side::Target).count(),
        src_vocab: distinct(Side::Source),
        tgt_vocab: distinct(Side::Target),
    }
}

/// Published PHOENIX14T statistics (source = text, target = gloss),
/// used only as a non-fatal diagnostic when preparing that corpus.
pub fn phoenix_expected() -> [(&'static str, SplitStats); 3] {
    [
        (
            "train",
            SplitStats { sentences: 7096, src_words: 99081, tgt_words: 67781, src_vocab: 2887, tgt_vocab: 1066 },
        ),
        (
            "dev",
            SplitStats { sentences: 519, src_words: 6820, tgt_words: 3745, src_vocab: 951, tgt_vocab: 393 },
        ),
        (
            "test",
            SplitStats { sentences: 642, src_words: 7816, tgt_words: 4257, src_vocab: 1001, tgt_vocab: 411 },
        ),
    ]
}

/// Synthetic corpora for self-contained training checks.
pub mod synthetic {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::ParallelCorpus;
    use crate::error::Result;

    /// Random copy task: source equals target, tokens `w0..w{vocab-1}`,
    /// lengths uniform in `1..=max_len`.
    pub fn copy_corpus(split: &str, pairs: usize, vocab: usize, max_len: usize, seed: u64) -> ParallelCorpus {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(pairs);
        for _ in 0..pairs {
            let len = rng.gen_range(1..=max_len);
            let sent: Vec<String> = (0..len).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect();
            out.push((sent.clone(), sent));
        }
        ParallelCorpus { split: split.to_string(), pairs: out }
    }

    /// Write a corpus as two aligned text files.
    pub fn write_corpus_files(
        corpus: &ParallelCorpus,
        src_path: &std::path::Path,
        tgt_path: &std::path::Path,
    ) -> Result<()> {
        let mut src = String::new();
        let mut tgt = String::new();
        for (s, t) in &corpus.pairs {
            src.push_str(&s.join(" "));
            src.push('\n');
            tgt.push_str(&t.join(" "));
            tgt.push('\n');
        }
        std::fs::write(src_path, src)?;
        std::fs::write(tgt_path, tgt)?;
        Ok(())
    }
}
