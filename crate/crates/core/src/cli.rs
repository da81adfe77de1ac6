//! Command-line entry points: prepare, train, translate, evaluate,
//! search, report.
//!
//! Configuration precedence is defaults < config file < command-line
//! flags; the effective merged configuration is echoed into the run
//! directory. All randomness flows from one --seed flag, with
//! per-component streams derived deterministically. Exit codes: 0
//! success, 2 input/data error, 3 config error, 4 compatibility error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{
    build_vocab, phoenix_expected, split_stats, Manifest, Side, SplitStats, Vocabulary,
};
use crate::error::{Error, Result};
use crate::kv::KvFile;
use crate::metrics::{bleu, tokenize_lines, ScoreReport};
use crate::model::{beam_decode, checkpoint, greedy_decode, HyperParams};
use crate::search::{
    architecture_table, get_axis, read_ledger, report as search_report, run_search, set_axis,
    AxisName, SearchDriver, SearchSpace, SearchState, SyntheticObjective, TrialOutput, TrialRecord,
    TrialRunner,
};
use crate::train::{
    train_model, CorpusBundle, SelectionMetric, TrainConfig, TrainOutcome,
};

#[derive(Debug, Parser)]
#[command(
    name = "gloss-nmt",
    about = "Train, evaluate, and architecture-search encoder-decoder transformers for text-to-gloss translation"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build vocabularies and a corpus statistics report from a manifest.
    Prepare(PrepareArgs),
    /// Train one model configuration.
    Train(TrainArgs),
    /// Translate a file of source sentences with a checkpoint.
    Translate(TranslateArgs),
    /// Score a hypothesis file against a reference file.
    Evaluate(EvaluateArgs),
    /// Run the consecutive hyper-parameter exploration.
    Search(SearchArgs),
    /// Re-render the ranked trial table from a search ledger.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct PrepareArgs {
    /// Key-value manifest naming train/dev/test source and target files.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for vocabularies and the statistics report.
    #[arg(long)]
    out: PathBuf,
    /// Minimum token frequency for vocabulary inclusion.
    #[arg(long, default_value_t = 1)]
    min_freq: usize,
    /// Compare counts against a known corpus profile (only
    /// "phoenix14t"); mismatches warn but never fail.
    #[arg(long)]
    expect: Option<String>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Key-value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Run directory for checkpoints and the metrics log.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    eval_every: Option<u64>,
    /// Stop after this many evaluations without improvement.
    #[arg(long)]
    patience: Option<u64>,
    /// Checkpoint selection metric: rouge, bleu1, or accuracy.
    #[arg(long)]
    selection_metric: Option<String>,
    #[arg(long)]
    max_decode_len: Option<usize>,
    #[arg(long)]
    min_freq: Option<usize>,
    /// Reject hyper-parameters that are not exact grid values.
    #[arg(long, default_value_t = false)]
    strict_grid: bool,
    #[arg(long)]
    num_layers: Option<usize>,
    #[arg(long)]
    ff_dim: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    num_heads: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Padded target-token budget per batch.
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    label_smoothing: Option<f64>,
    #[arg(long)]
    warmup_steps: Option<usize>,
}

#[derive(Debug, Args)]
struct TranslateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Input file, one source sentence per line.
    #[arg(long)]
    input: PathBuf,
    /// Output hypothesis file, one line per input line.
    #[arg(long)]
    out: PathBuf,
    /// Beam width; 1 means greedy decoding.
    #[arg(long, default_value_t = 1)]
    beam: usize,
    #[arg(long, default_value_t = 64)]
    max_len: usize,
    #[arg(long, default_value_t = 1.0)]
    length_penalty: f64,
    /// Fail (exit 4) if this vocabulary file does not hash-match the
    /// checkpoint's embedded source vocabulary.
    #[arg(long)]
    expect_src_vocab: Option<PathBuf>,
    #[arg(long)]
    expect_tgt_vocab: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Also append the report as one CSV row to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SearchArgs {
    /// Search config file (key-value text).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_passes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override the objective: "synthetic" or "real".
    #[arg(long)]
    objective: Option<String>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    ledger: PathBuf,
}

impl Cli {
    pub fn run(self) -> Result<()> {
        match self.command {
            Command::Prepare(args) => cmd_prepare(args),
            Command::Train(args) => cmd_train(args).map(|_| ()),
            Command::Translate(args) => cmd_translate(args),
            Command::Evaluate(args) => cmd_evaluate(args),
            Command::Search(args) => cmd_search(args),
            Command::Report(args) => cmd_report(args),
        }
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_exit_code() -> i32 {
    let cli = Cli::parse();
    match cli.run() {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn stats_table(rows: &[(&str, SplitStats)]) -> String {
    let col = |f: fn(&SplitStats) -> usize| -> Vec<String> {
        rows.iter().map(|(_, s)| f(s).to_string()).collect()
    };
    let tgt_words = col(|s| s.tgt_words);
    let src_words = col(|s| s.src_words);
    let tgt_vocab = col(|s| s.tgt_vocab);
    let src_vocab = col(|s| s.src_vocab);
    let sentences = col(|s| s.sentences);
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:<24} {}\n",
        "", "GLOSS (target)", "TEXT (source)"
    ));
    out.push_str(&format!(
        "{:<12} {:<7} {:<7} {:<8} {:<7} {:<7} {}\n",
        "", "train", "dev", "test", "train", "dev", "test"
    ));
    let line = |name: &str, a: &[String], b: &[String]| {
        format!(
            "{:<12} {:<7} {:<7} {:<8} {:<7} {:<7} {}\n",
            name, a[0], a[1], a[2], b[0], b[1], b[2]
        )
    };
    out.push_str(&line("sentences", &sentences, &sentences));
    out.push_str(&line("words", &tgt_words, &src_words));
    out.push_str(&line("vocabulary", &tgt_vocab, &src_vocab));
    out
}

fn cmd_prepare(args: PrepareArgs) -> Result<()> {
    let manifest = Manifest::load(&args.manifest)?;
    let train = manifest.load_split("train")?;
    let dev = manifest.load_split("dev")?;
    let test = manifest.load_split("test")?;

    std::fs::create_dir_all(&args.out)?;
    let src_vocab = build_vocab(&train, Side::Source, args.min_freq)?;
    let tgt_vocab = build_vocab(&train, Side::Target, args.min_freq)?;
    src_vocab.write_file(&args.out.join("src.vocab"))?;
    tgt_vocab.write_file(&args.out.join("tgt.vocab"))?;

    let rows = [
        ("train", split_stats(&train)),
        ("dev", split_stats(&dev)),
        ("test", split_stats(&test)),
    ];
    let table = stats_table(&rows);
    print!("{table}");
    std::fs::write(args.out.join("stats.txt"), &table)?;

    if let Some(profile) = &args.expect {
        if profile != "phoenix14t" {
            return Err(Error::Config(format!("unknown --expect profile {profile:?}")));
        }
        for ((split, observed), (_, expected)) in rows.iter().zip(phoenix_expected()) {
            let check = |what: &str, got: usize, want: usize| {
                if got != want {
                    println!("warning: {split} {what}: observed {got}, expected {want} (phoenix14t)");
                }
            };
            check("sentences", observed.sentences, expected.sentences);
            check("source words", observed.src_words, expected.src_words);
            check("target words", observed.tgt_words, expected.tgt_words);
            check("source vocabulary", observed.src_vocab, expected.src_vocab);
            check("target vocabulary", observed.tgt_vocab, expected.tgt_vocab);
        }
    }
    println!(
        "wrote {} and {} ({} / {} entries)",
        args.out.join("src.vocab").display(),
        args.out.join("tgt.vocab").display(),
        src_vocab.len(),
        tgt_vocab.len()
    );
    Ok(())
}

/// Fully merged view of one training run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub hp: HyperParams,
    pub train: TrainConfig,
    pub min_freq: usize,
    pub strict_grid: bool,
}

impl RunConfig {
    /// defaults < config file < flags.
    fn resolve(args: &TrainArgs) -> Result<RunConfig> {
        let file = match &args.config {
            Some(path) => KvFile::load(path)?,
            None => KvFile::default(),
        };
        let mut hp = HyperParams::default();
        let mut train = TrainConfig::default();
        let mut manifest: Option<PathBuf> = None;
        let mut min_freq = 1usize;

        // Config file layer.
        if let Some(v) = file.get("manifest") {
            manifest = Some(PathBuf::from(v));
        }
        if let Some(v) = file.get_parsed::<u64>("seed")? {
            train.seed = v;
        }
        if let Some(v) = file.get("out") {
            train.out_dir = PathBuf::from(v);
        }
        if let Some(v) = file.get_parsed::<u64>("max_steps")? {
            train.max_steps = v;
        }
        if let Some(v) = file.get_parsed::<u64>("eval_every")? {
            train.eval_every = v;
        }
        if let Some(v) = file.get_parsed::<u64>("patience")? {
            train.patience = Some(v);
        }
        if let Some(v) = file.get("selection_metric") {
            train.selection = v.parse()?;
        }
        if let Some(v) = file.get_parsed::<usize>("max_decode_len")? {
            train.max_decode_len = Some(v);
        }
        if let Some(v) = file.get_parsed::<usize>("min_freq")? {
            min_freq = v;
        }
        if let Some(v) = file.get_parsed::<usize>("num_layers")? {
            hp.num_layers = v;
        }
        if let Some(v) = file.get_parsed::<usize>("ff_dim")? {
            hp.ff_dim = v;
        }
        if let Some(v) = file.get_parsed::<usize>("embed_dim")? {
            hp.embed_dim = v;
        }
        if let Some(v) = file.get_parsed::<usize>("num_heads")? {
            hp.num_heads = v;
        }
        if let Some(v) = file.get_parsed::<f64>("dropout")? {
            hp.dropout = v;
        }
        if let Some(v) = file.get_parsed::<usize>("batch_size")? {
            hp.batch_size = v;
        }
        if let Some(v) = file.get_parsed::<f64>("label_smoothing")? {
            hp.label_smoothing = v;
        }
        if let Some(v) = file.get_parsed::<usize>("warmup_steps")? {
            hp.warmup_steps = v;
        }

        // Flag layer.
        if let Some(v) = &args.manifest {
            manifest = Some(v.clone());
        }
        if let Some(v) = args.seed {
            train.seed = v;
        }
        if let Some(v) = &args.out {
            train.out_dir = v.clone();
        }
        if let Some(v) = args.max_steps {
            train.max_steps = v;
        }
        if let Some(v) = args.eval_every {
            train.eval_every = v;
        }
        if let Some(v) = args.patience {
            train.patience = Some(v);
        }
        if let Some(v) = &args.selection_metric {
            train.selection = v.parse()?;
        }
        if let Some(v) = args.max_decode_len {
            train.max_decode_len = Some(v);
        }
        if let Some(v) = args.min_freq {
            min_freq = v;
        }
        if let Some(v) = args.num_layers {
            hp.num_layers = v;
        }
        if let Some(v) = args.ff_dim {
            hp.ff_dim = v;
        }
        if let Some(v) = args.embed_dim {
            hp.embed_dim = v;
        }
        if let Some(v) = args.num_heads {
            hp.num_heads = v;
        }
        if let Some(v) = args.dropout {
            hp.dropout = v;
        }
        if let Some(v) = args.batch_size {
            hp.batch_size = v;
        }
        if let Some(v) = args.label_smoothing {
            hp.label_smoothing = v;
        }
        if let Some(v) = args.warmup_steps {
            hp.warmup_steps = v;
        }

        let manifest = manifest
            .ok_or_else(|| Error::Config("a manifest is required (--manifest or config file)".into()))?;
        Ok(RunConfig { manifest, hp, train, min_freq, strict_grid: args.strict_grid })
    }

    /// Deterministic echo of every effective value.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("manifest = {}\n", self.manifest.display()));
        out.push_str(&format!("out = {}\n", self.train.out_dir.display()));
        out.push_str(&format!("seed = {}\n", self.train.seed));
        out.push_str(&format!("max_steps = {}\n", self.train.max_steps));
        out.push_str(&format!("eval_every = {}\n", self.train.eval_every));
        out.push_str(&format!(
            "patience = {}\n",
            self.train.patience.map(|p| p.to_string()).unwrap_or_else(|| "none".into())
        ));
        out.push_str(&format!("selection_metric = {}\n", self.train.selection.name()));
        out.push_str(&format!(
            "max_decode_len = {}\n",
            self.train.max_decode_len.map(|p| p.to_string()).unwrap_or_else(|| "auto".into())
        ));
        out.push_str(&format!("min_freq = {}\n", self.min_freq));
        for axis in AxisName::ALL {
            out.push_str(&format!("{} = {}\n", axis.key(), get_axis(&self.hp, axis)));
        }
        out
    }
}

fn load_bundle(manifest_path: &Path, min_freq: usize) -> Result<CorpusBundle> {
    let manifest = Manifest::load(manifest_path)?;
    let train = manifest.load_split("train")?;
    let dev = manifest.load_split("dev")?;
    let src_vocab = build_vocab(&train, Side::Source, min_freq)?;
    let tgt_vocab = build_vocab(&train, Side::Target, min_freq)?;
    Ok(CorpusBundle { train, dev, src_vocab, tgt_vocab })
}

fn cmd_train(args: TrainArgs) -> Result<TrainOutcome> {
    let cfg = RunConfig::resolve(&args)?;
    cfg.hp.validate()?;
    if cfg.strict_grid {
        SearchSpace::table_grid().validate_point(&cfg.hp)?;
    }
    let bundle = load_bundle(&cfg.manifest, cfg.min_freq)?;
    std::fs::create_dir_all(&cfg.train.out_dir)?;
    std::fs::write(cfg.train.out_dir.join("run_config.txt"), cfg.echo())?;
    let outcome = train_model(&cfg.hp, &bundle, &cfg.train)?;
    println!(
        "trained {} steps; best {} = {:.4} at step {} ({})",
        outcome.steps_run,
        cfg.train.selection.name(),
        outcome.best_score,
        outcome.best_step,
        outcome.best_path.display()
    );
    Ok(outcome)
}

fn check_vocab_hash(expected_file: &Path, embedded: &Vocabulary, side: &str) -> Result<()> {
    let expected = Vocabulary::read_file(expected_file)?;
    if expected.sha256_hex() != embedded.sha256_hex() {
        return Err(Error::Compat(format!(
            "{side} vocabulary hash mismatch: {} does not match the checkpoint",
            expected_file.display()
        )));
    }
    Ok(())
}

fn cmd_translate(args: TranslateArgs) -> Result<()> {
    if args.beam < 1 {
        return Err(Error::Config("--beam must be at least 1".into()));
    }
    let ckpt = checkpoint::load(&args.checkpoint)?;
    if let Some(path) = &args.expect_src_vocab {
        check_vocab_hash(path, &ckpt.src_vocab, "source")?;
    }
    if let Some(path) = &args.expect_tgt_vocab {
        check_vocab_hash(path, &ckpt.tgt_vocab, "target")?;
    }
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", args.input.display())))?;
    let mut out = String::new();
    for line in text.lines() {
        let tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if tokens.is_empty() {
            out.push('\n');
            continue;
        }
        let src_ids = ckpt.src_vocab.encode(&tokens);
        let hyp_ids = if args.beam == 1 {
            greedy_decode(&ckpt.model, &src_ids, args.max_len)?
        } else {
            beam_decode(&ckpt.model, &src_ids, args.beam, args.max_len, args.length_penalty)?
        };
        out.push_str(&ckpt.tgt_vocab.decode(&hyp_ids).join(" "));
        out.push('\n');
    }
    std::fs::write(&args.out, out)?;
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let hyp_text = std::fs::read_to_string(&args.hyp)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", args.hyp.display())))?;
    let ref_text = std::fs::read_to_string(&args.reference)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", args.reference.display())))?;
    let hyps = tokenize_lines(&hyp_text);
    let refs = tokenize_lines(&ref_text);
    if hyps.len() != refs.len() {
        return Err(Error::Data(format!(
            "line count mismatch: {} has {} lines, {} has {}",
            args.hyp.display(),
            hyps.len(),
            args.reference.display(),
            refs.len()
        )));
    }
    let report = bleu(&hyps, &refs, 4)?;
    print!("{}", report.to_text_block());
    if let Some(csv_path) = &args.csv {
        let new = !csv_path.exists();
        let mut text = String::new();
        if new {
            text.push_str(ScoreReport::csv_header());
            text.push('\n');
        }
        text.push_str(&report.to_csv_row());
        text.push('\n');
        use std::io::Write;
        let mut file = std::fs::OpenOptions::new().create(true).append(true).open(csv_path)?;
        file.write_all(text.as_bytes())?;
    } else {
        println!("{}", ScoreReport::csv_header());
        println!("{}", report.to_csv_row());
    }
    Ok(())
}

/// Trains one grid point with the configured per-trial budget.
struct RealTrainer {
    bundle: CorpusBundle,
    template: TrainConfig,
    trials_dir: PathBuf,
}

impl TrialRunner for RealTrainer {
    fn run(&self, hp: &HyperParams, seed: u64) -> Result<TrialOutput> {
        let name = format!(
            "n{}_ff{}_d{}_h{}_do{}_bs{}_ls{}_w{}",
            hp.num_layers,
            hp.ff_dim,
            hp.embed_dim,
            hp.num_heads,
            hp.dropout,
            hp.batch_size,
            hp.label_smoothing,
            hp.warmup_steps
        );
        let cfg = TrainConfig {
            seed,
            out_dir: self.trials_dir.join(name),
            ..self.template.clone()
        };
        let outcome = train_model(hp, &self.bundle, &cfg)?;
        // Dev accuracy at the selected step, for accuracy-driven selection.
        let dev_accuracy = outcome
            .rows
            .iter()
            .filter(|r| r.step == outcome.best_step)
            .find_map(|r| r.dev_accuracy)
            .unwrap_or(0.0);
        Ok(TrialOutput {
            report: outcome.best_report.clone(),
            dev_accuracy,
            checkpoint: Some(outcome.best_path.clone()),
            steps: outcome.steps_run,
        })
    }
}

fn cmd_search(args: SearchArgs) -> Result<()> {
    let file = KvFile::load(&args.config)?;

    let mut initial = HyperParams::default();
    for axis in AxisName::ALL {
        let key = format!("initial.{}", axis.key());
        if let Some(raw) = file.get(&key) {
            let value = parse_grid_value(axis, raw)?;
            set_axis(&mut initial, axis, value)?;
        }
    }
    let sweep_order: Vec<AxisName> = match file.get("sweep_order") {
        Some(raw) => raw
            .split(',')
            .map(|s| s.trim().parse::<AxisName>())
            .collect::<Result<Vec<_>>>()?,
        None => AxisName::ALL.to_vec(),
    };
    let driver = SearchDriver {
        selection: file
            .get("selection_metric")
            .map(|s| s.parse::<SelectionMetric>())
            .transpose()?
            .unwrap_or(SelectionMetric::Rouge),
        seed: args.seed.or(file.get_parsed::<u64>("seed")?).unwrap_or(0),
        tolerance: file.get_parsed::<f64>("tolerance")?.unwrap_or(0.0),
        workers: file.get_parsed::<usize>("workers")?.unwrap_or(1),
    };
    let max_passes = args
        .max_passes
        .or(file.get_parsed::<usize>("max_passes")?)
        .unwrap_or(8);
    let out_dir = args
        .out
        .or_else(|| file.get("out").map(PathBuf::from))
        .ok_or_else(|| Error::Config("search needs an output directory (--out or out=)".into()))?;
    std::fs::create_dir_all(&out_dir)?;
    let objective = args
        .objective
        .or_else(|| file.get("objective").map(str::to_string))
        .unwrap_or_else(|| "real".to_string());

    let space = SearchSpace::table_grid();
    let state = SearchState::new(initial.clone()).with_ledger(&out_dir.join("ledger.csv"))?;
    println!("sweep order: {}", sweep_order.iter().map(|a| a.key()).collect::<Vec<_>>().join(", "));

    let (best, state) = match objective.as_str() {
        "synthetic" => {
            let runner = SyntheticObjective::table_default();
            run_search(&initial, &space, &runner, &driver, max_passes, &sweep_order, state)?
        }
        "real" => {
            let manifest = file
                .get("manifest")
                .ok_or_else(|| Error::Config("real-objective search needs manifest= in the config".into()))?;
            let manifest_path = resolve_relative(&args.config, manifest);
            let min_freq = file.get_parsed::<usize>("min_freq")?.unwrap_or(1);
            let bundle = load_bundle(&manifest_path, min_freq)?;
            let template = TrainConfig {
                max_steps: file.get_parsed::<u64>("trial.max_steps")?.unwrap_or(2000),
                eval_every: file.get_parsed::<u64>("trial.eval_every")?.unwrap_or(100),
                patience: file.get_parsed::<u64>("trial.patience")?.or(Some(5)),
                selection: driver.selection,
                seed: 0,
                out_dir: PathBuf::new(),
                max_decode_len: file.get_parsed::<usize>("trial.max_decode_len")?,
            };
            let runner = RealTrainer { bundle, template, trials_dir: out_dir.join("trials") };
            run_search(&initial, &space, &runner, &driver, max_passes, &sweep_order, state)?
        }
        other => return Err(Error::Config(format!("unknown objective {other:?}"))),
    };

    let ranked = search_report(&state)?;
    std::fs::write(out_dir.join("report.txt"), &ranked)?;
    let table = architecture_table(&best);
    std::fs::write(out_dir.join("best.txt"), &table)?;
    println!(
        "{} after {} pass(es), {} trials",
        if state.converged { "converged" } else { "stopped" },
        state.pass,
        state.history.len()
    );
    print!("{table}");
    println!("best {} = {:.4}", driver.selection.name(), state.incumbent_score);
    Ok(())
}

fn parse_grid_value(axis: AxisName, raw: &str) -> Result<crate::search::GridValue> {
    use crate::search::GridValue;
    match axis {
        AxisName::Dropout | AxisName::LabelSmoothing => raw
            .parse::<f64>()
            .map(GridValue::Float)
            .map_err(|_| Error::Config(format!("invalid value {raw:?} for {}", axis.key()))),
        _ => raw
            .parse::<u64>()
            .map(GridValue::Int)
            .map_err(|_| Error::Config(format!("invalid value {raw:?} for {}", axis.key()))),
    }
}

fn resolve_relative(config_path: &Path, value: &str) -> PathBuf {
    let p = PathBuf::from(value);
    if p.is_absolute() {
        p
    } else {
        config_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let records = read_ledger(&args.ledger)?;
    if records.is_empty() {
        return Err(Error::Contract("ledger holds no completed trials".into()));
    }
    let mut state = SearchState::new(records[0].hp.clone());
    let mut best: Option<TrialRecord> = None;
    for r in &records {
        if best.as_ref().map_or(true, |b| r.score > b.score) {
            best = Some(r.clone());
        }
    }
    // Rebuild a history-only state for the ranked table.
    for r in records {
        state.history.push(r);
    }
    print!("{}", search_report(&state)?);
    if let Some(best) = best {
        println!("\nbest point:");
        print!("{}", architecture_table(&best.hp));
    }
    Ok(())
}
