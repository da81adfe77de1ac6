//! Consecutive hyper-parameter exploration: coordinate descent over a
//! fixed grid, sweeping one hyper-parameter at a time while keeping the
//! others fixed, until a full pass changes nothing.
//!
//! Every trained point is memoized; an append-only CSV ledger makes
//! long searches resumable. Trial failures score negative infinity and
//! the search continues.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::metrics::ScoreReport;
use crate::model::HyperParams;
use crate::train::{derive_seed, SelectionMetric};

/// The eight grid axes, in sweep order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AxisName {
    NumLayers,
    FfDim,
    EmbedDim,
    NumHeads,
    Dropout,
    BatchSize,
    LabelSmoothing,
    WarmupSteps,
}

impl AxisName {
    pub const ALL: [AxisName; 8] = [
        AxisName::NumLayers,
        AxisName::FfDim,
        AxisName::EmbedDim,
        AxisName::NumHeads,
        AxisName::Dropout,
        AxisName::BatchSize,
        AxisName::LabelSmoothing,
        AxisName::WarmupSteps,
    ];

    pub fn key(&self) -> &'static str {
        match self {
            AxisName::NumLayers => "num_layers",
            AxisName::FfDim => "ff_dim",
            AxisName::EmbedDim => "embed_dim",
            AxisName::NumHeads => "num_heads",
            AxisName::Dropout => "dropout",
            AxisName::BatchSize => "batch_size",
            AxisName::LabelSmoothing => "label_smoothing",
            AxisName::WarmupSteps => "warmup_steps",
        }
    }
}

impl std::str::FromStr for AxisName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        AxisName::ALL
            .iter()
            .copied()
            .find(|a| a.key() == s)
            .ok_or_else(|| Error::Config(format!("unknown hyper-parameter {s:?}")))
    }
}

/// One grid coordinate value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridValue {
    Int(u64),
    Float(f64),
}

impl std::fmt::Display for GridValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GridValue::Int(v) => write!(f, "{v}"),
            GridValue::Float(v) => write!(f, "{v}"),
        }
    }
}

/// Read one axis off a hyper-parameter point.
pub fn get_axis(hp: &HyperParams, axis: AxisName) -> GridValue {
    match axis {
        AxisName::NumLayers => GridValue::Int(hp.num_layers as u64),
        AxisName::FfDim => GridValue::Int(hp.ff_dim as u64),
        AxisName::EmbedDim => GridValue::Int(hp.embed_dim as u64),
        AxisName::NumHeads => GridValue::Int(hp.num_heads as u64),
        AxisName::Dropout => GridValue::Float(hp.dropout),
        AxisName::BatchSize => GridValue::Int(hp.batch_size as u64),
        AxisName::LabelSmoothing => GridValue::Float(hp.label_smoothing),
        AxisName::WarmupSteps => GridValue::Int(hp.warmup_steps as u64),
    }
}

/// Write one axis of a hyper-parameter point.
pub fn set_axis(hp: &mut HyperParams, axis: AxisName, value: GridValue) -> Result<()> {
    let int = |v: GridValue| match v {
        GridValue::Int(i) => Ok(i as usize),
        GridValue::Float(f) => Err(Error::Config(format!("{} expects an integer, got {f}", axis.key()))),
    };
    let float = |v: GridValue| -> Result<f64> {
        match v {
            GridValue::Float(f) => Ok(f),
            GridValue::Int(i) => Ok(i as f64),
        }
    };
    match axis {
        AxisName::NumLayers => hp.num_layers = int(value)?,
        AxisName::FfDim => hp.ff_dim = int(value)?,
        AxisName::EmbedDim => hp.embed_dim = int(value)?,
        AxisName::NumHeads => hp.num_heads = int(value)?,
        AxisName::Dropout => hp.dropout = float(value)?,
        AxisName::BatchSize => hp.batch_size = int(value)?,
        AxisName::LabelSmoothing => hp.label_smoothing = float(value)?,
        AxisName::WarmupSteps => hp.warmup_steps = int(value)?,
    }
    Ok(())
}

/// One grid axis: ordered candidate values.
#[derive(Debug, Clone)]
pub struct Axis {
    pub name: AxisName,
    pub values: Vec<GridValue>,
}

/// The full explored space.
#[derive(Debug, Clone)]
pub struct SearchSpace {
    pub axes: Vec<Axis>,
}

impl SearchSpace {
    /// The published exploration grid, verbatim.
    pub fn table_grid() -> SearchSpace {
        let ints = |vals: &[u64]| vals.iter().map(|&v| GridValue::Int(v)).collect();
        let floats = |vals: &[f64]| vals.iter().map(|&v| GridValue::Float(v)).collect();
        SearchSpace {
            axes: vec![
                Axis { name: AxisName::NumLayers, values: ints(&[1, 2, 3, 4, 5, 6, 7]) },
                Axis { name: AxisName::FfDim, values: ints(&[128, 256, 512]) },
                Axis { name: AxisName::EmbedDim, values: ints(&[32, 64, 128]) },
                Axis { name: AxisName::NumHeads, values: ints(&[1, 2, 4, 8]) },
                Axis { name: AxisName::Dropout, values: floats(&[0.1, 0.2, 0.3, 0.4, 0.5]) },
                Axis { name: AxisName::BatchSize, values: ints(&[256, 512, 1024, 2048, 4096]) },
                Axis { name: AxisName::LabelSmoothing, values: floats(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]) },
                Axis { name: AxisName::WarmupSteps, values: ints(&[100, 200, 300, 400, 500, 600]) },
            ],
        }
    }

    pub fn axis(&self, name: AxisName) -> Result<&Axis> {
        self.axes
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::Config(format!("axis {} not in search space", name.key())))
    }

    /// Index of a point's value on one axis.
    pub fn value_index(&self, name: AxisName, value: GridValue) -> Option<usize> {
        self.axis(name).ok()?.values.iter().position(|&v| grid_eq(v, value))
    }

    /// Check that a point lies exactly on the grid.
    pub fn validate_point(&self, hp: &HyperParams) -> Result<()> {
        for axis in &self.axes {
            let v = get_axis(hp, axis.name);
            if !axis.values.iter().any(|&g| grid_eq(g, v)) {
                return Err(Error::Config(format!(
                    "{} = {v} is not one of the grid values",
                    axis.name.key()
                )));
            }
        }
        Ok(())
    }
}

fn grid_eq(a: GridValue, b: GridValue) -> bool {
    match (a, b) {
        (GridValue::Int(x), GridValue::Int(y)) => x == y,
        (GridValue::Float(x), GridValue::Float(y)) => x.to_bits() == y.to_bits(),
        (GridValue::Int(x), GridValue::Float(y)) | (GridValue::Float(y), GridValue::Int(x)) => {
            y == x as f64
        }
    }
}

/// Canonical memoization key for one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PointKey(u64, u64, u64, u64, u64, u64, u64, u64);

pub fn point_key(hp: &HyperParams) -> PointKey {
    PointKey(
        hp.num_layers as u64,
        hp.ff_dim as u64,
        hp.embed_dim as u64,
        hp.num_heads as u64,
        hp.dropout.to_bits(),
        hp.batch_size as u64,
        hp.label_smoothing.to_bits(),
        hp.warmup_steps as u64,
    )
}

/// What a trial runner hands back for one point.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub report: ScoreReport,
    pub dev_accuracy: f64,
    pub checkpoint: Option<PathBuf>,
    pub steps: u64,
}

/// Trains and scores one hyper-parameter point. Implementations must be
/// deterministic in (hp, seed).
pub trait TrialRunner: Sync {
    fn run(&self, hp: &HyperParams, seed: u64) -> Result<TrialOutput>;
}

/// One (hyper-parameters -> dev score) observation.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub hp: HyperParams,
    pub ok: bool,
    /// Selection-metric value; negative infinity for failed trials.
    pub score: f64,
    pub report: ScoreReport,
    pub dev_accuracy: f64,
    pub checkpoint: Option<PathBuf>,
    pub steps: u64,
    pub wall_secs: f64,
    pub seed: u64,
}

/// Incumbent move made by one sweep.
#[derive(Debug, Clone)]
pub struct TrajectoryEntry {
    pub pass: usize,
    pub axis: AxisName,
    pub chosen: GridValue,
    pub score: f64,
    pub changed: bool,
}

/// Full search state: incumbent, memoized history, trajectory.
pub struct SearchState {
    pub incumbent: HyperParams,
    pub incumbent_score: f64,
    pub pass: usize,
    pub history: Vec<TrialRecord>,
    pub trajectory: Vec<TrajectoryEntry>,
    pub converged: bool,
    memo: HashMap<PointKey, usize>,
    ledger_path: Option<PathBuf>,
}

impl SearchState {
    pub fn new(initial: HyperParams) -> Self {
        SearchState {
            incumbent: initial,
            incumbent_score: f64::NEG_INFINITY,
            pass: 0,
            history: Vec::new(),
            trajectory: Vec::new(),
            converged: false,
            memo: HashMap::new(),
            ledger_path: None,
        }
    }

    /// Attach a ledger file: existing rows seed the memo (resume), new
    /// trials are appended as they finish.
    pub fn with_ledger(mut self, path: &Path) -> Result<Self> {
        if path.exists() {
            for record in read_ledger(path)? {
                self.insert_record(record, false)?;
            }
        } else {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, format!("{}\n", LEDGER_HEADER))?;
        }
        self.ledger_path = Some(path.to_path_buf());
        Ok(self)
    }

    pub fn lookup(&self, hp: &HyperParams) -> Option<&TrialRecord> {
        self.memo.get(&point_key(hp)).map(|&i| &self.history[i])
    }

    fn insert_record(&mut self, record: TrialRecord, append_to_ledger: bool) -> Result<()> {
        let key = point_key(&record.hp);
        if self.memo.contains_key(&key) {
            return Ok(()); // duplicate in a hand-edited ledger; first wins
        }
        if append_to_ledger {
            if let Some(path) = &self.ledger_path {
                let mut file = std::fs::OpenOptions::new().append(true).open(path)?;
                writeln!(file, "{}", ledger_row(&record))?;
            }
        }
        self.memo.insert(key, self.history.len());
        self.history.push(record);
        Ok(())
    }
}

/// Configuration of the search procedure itself (not of the grid).
#[derive(Debug, Clone)]
pub struct SearchDriver {
    pub selection: SelectionMetric,
    pub seed: u64,
    /// A candidate must beat the incumbent by more than this to replace it.
    pub tolerance: f64,
    pub workers: usize,
}

impl Default for SearchDriver {
    fn default() -> Self {
        SearchDriver { selection: SelectionMetric::Rouge, seed: 0, tolerance: 0.0, workers: 1 }
    }
}

fn metric_value(metric: SelectionMetric, output: &TrialOutput) -> f64 {
    match metric {
        SelectionMetric::Rouge => output.report.rouge,
        SelectionMetric::Bleu1 => output.report.bleu[0],
        SelectionMetric::DevAccuracy => output.dev_accuracy,
    }
}

/// Train/evaluate every grid value of one hyper-parameter with all
/// others fixed at the incumbent, then move the incumbent to the best
/// value. Ties keep the incumbent value, then prefer the smaller value.
/// Infeasible points (embed_dim not divisible by heads) are skipped;
/// failed trials score negative infinity and the sweep continues.
/// Returns whether the incumbent changed.
pub fn sweep_parameter<R: TrialRunner>(
    state: &mut SearchState,
    space: &SearchSpace,
    axis_name: AxisName,
    runner: &R,
    driver: &SearchDriver,
) -> Result<bool> {
    let axis = space.axis(axis_name)?;
    let before = get_axis(&state.incumbent, axis_name);

    // Enumerate feasible, not-yet-memoized points with preassigned seeds
    // so trial seeding does not depend on worker scheduling.
    let mut candidates: Vec<(GridValue, HyperParams)> = Vec::new();
    for &value in &axis.values {
        let mut hp = state.incumbent.clone();
        set_axis(&mut hp, axis_name, value)?;
        if hp.validate().is_err() {
            continue; // infeasible combination, e.g. embed_dim % heads != 0
        }
        candidates.push((value, hp));
    }
    let to_run: Vec<(usize, HyperParams, u64)> = candidates
        .iter()
        .enumerate()
        .filter(|(_, (_, hp))| state.lookup(hp).is_none())
        .scan(state.history.len() as u64, |next_index, (i, (_, hp))| {
            let seed = derive_seed(driver.seed, "trial", *next_index);
            *next_index += 1;
            Some((i, hp.clone(), seed))
        })
        .collect();

    let mut outputs: Vec<Option<(usize, Result<TrialOutput>, f64, u64)>> = Vec::new();
    if driver.workers <= 1 || to_run.len() <= 1 {
        for (i, hp, seed) in &to_run {
            let start = Instant::now();
            let result = runner.run(hp, *seed);
            outputs.push(Some((*i, result, start.elapsed().as_secs_f64(), *seed)));
        }
    } else {
        let mut slots: Vec<Option<(usize, Result<TrialOutput>, f64, u64)>> = Vec::new();
        slots.resize_with(to_run.len(), || None);
        let chunk = to_run.len().div_ceil(driver.workers);
        std::thread::scope(|scope| {
            for (jobs, slot_chunk) in to_run.chunks(chunk).zip(slots.chunks_mut(chunk)) {
                scope.spawn(move || {
                    for ((i, hp, seed), slot) in jobs.iter().zip(slot_chunk) {
                        let start = Instant::now();
                        let result = runner.run(hp, *seed);
                        *slot = Some((*i, result, start.elapsed().as_secs_f64(), *seed));
                    }
                });
            }
        });
        outputs = slots;
    }

    // Record results in enumeration order so ledgers are reproducible.
    for slot in outputs.into_iter().flatten() {
        let (i, result, wall_secs, seed) = slot;
        let hp = candidates[i].1.clone();
        let record = match result {
            Ok(output) => TrialRecord {
                score: metric_value(driver.selection, &output),
                hp,
                ok: true,
                report: output.report,
                dev_accuracy: output.dev_accuracy,
                checkpoint: output.checkpoint,
                steps: output.steps,
                wall_secs,
                seed,
            },
            Err(err) => {
                eprintln!("trial failed ({}): {err}", axis_name.key());
                TrialRecord {
                    hp,
                    ok: false,
                    score: f64::NEG_INFINITY,
                    report: ScoreReport::zero(),
                    dev_accuracy: 0.0,
                    checkpoint: None,
                    steps: 0,
                    wall_secs,
                    seed,
                }
            }
        };
        state.insert_record(record, true)?;
    }

    // Decide the sweep winner.
    let mut incumbent_sweep_score = f64::NEG_INFINITY;
    let mut best: Option<(GridValue, f64)> = None;
    for (value, hp) in &candidates {
        let score = state
            .lookup(hp)
            .map(|r| r.score)
            .ok_or_else(|| Error::Contract("sweep candidate missing from history".into()))?;
        if grid_eq(*value, before) {
            incumbent_sweep_score = score;
        }
        let better = match best {
            None => true,
            Some((_, s)) => score > s,
        };
        if better {
            best = Some((*value, score));
        }
    }
    let (best_value, best_score) =
        best.ok_or_else(|| Error::Contract("sweep produced no feasible candidates".into()))?;

    let keep_incumbent = incumbent_sweep_score >= best_score - driver.tolerance;
    let (chosen, chosen_score) = if keep_incumbent {
        (before, incumbent_sweep_score)
    } else {
        (best_value, best_score)
    };
    let changed = !grid_eq(chosen, before);
    set_axis(&mut state.incumbent, axis_name, chosen)?;
    state.incumbent_score = chosen_score;
    state.trajectory.push(TrajectoryEntry {
        pass: state.pass,
        axis: axis_name,
        chosen,
        score: chosen_score,
        changed,
    });
    Ok(changed)
}

/// Repeat full passes (sweeping every axis in declared order) until a
/// pass changes no parameter or `max_passes` is reached.
pub fn run_search<R: TrialRunner>(
    initial: &HyperParams,
    space: &SearchSpace,
    runner: &R,
    driver: &SearchDriver,
    max_passes: usize,
    sweep_order: &[AxisName],
    mut state: SearchState,
) -> Result<(HyperParams, SearchState)> {
    space.validate_point(initial)?;
    initial.validate()?;
    if max_passes == 0 {
        return Err(Error::Config("max_passes must be at least 1".into()));
    }
    for pass in 1..=max_passes {
        state.pass = pass;
        let mut any_change = false;
        for &axis in sweep_order {
            if sweep_parameter(&mut state, space, axis, runner, driver)? {
                any_change = true;
            }
        }
        if !any_change {
            state.converged = true;
            break;
        }
    }
    Ok((state.incumbent.clone(), state))
}

/// Ranked trial table plus the incumbent trajectory, as printable text.
pub fn report(state: &SearchState) -> Result<String> {
    if state.history.is_empty() {
        return Err(Error::Contract("report requires at least one completed trial".into()));
    }
    let mut order: Vec<usize> = (0..state.history.len()).collect();
    order.sort_by(|&a, &b| {
        state.history[b]
            .score
            .partial_cmp(&state.history[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut out = String::new();
    out.push_str("rank  score      status  layers  ff    embed  heads  dropout  batch  smoothing  warmup\n");
    for (rank, &i) in order.iter().enumerate() {
        let r = &state.history[i];
        let score = if r.score.is_finite() { format!("{:.4}", r.score) } else { "failed".to_string() };
        out.push_str(&format!(
            "{:<5} {:<10} {:<7} {:<7} {:<5} {:<6} {:<6} {:<8} {:<6} {:<10} {}\n",
            rank + 1,
            score,
            if r.ok { "ok" } else { "failed" },
            r.hp.num_layers,
            r.hp.ff_dim,
            r.hp.embed_dim,
            r.hp.num_heads,
            r.hp.dropout,
            r.hp.batch_size,
            r.hp.label_smoothing,
            r.hp.warmup_steps,
        ));
    }
    out.push_str("\nincumbent trajectory:\n");
    for step in &state.trajectory {
        out.push_str(&format!(
            "pass {} {} -> {} (score {:.4}{})\n",
            step.pass,
            step.axis.key(),
            step.chosen,
            step.score,
            if step.changed { ", changed" } else { "" }
        ));
    }
    Ok(out)
}

/// Two-column table of one architecture point.
pub fn architecture_table(hp: &HyperParams) -> String {
    let mut out = String::new();
    out.push_str("Hyper-parameter          Value\n");
    for axis in AxisName::ALL {
        out.push_str(&format!("{:<24} {}\n", axis.key(), get_axis(hp, axis)));
    }
    out
}

const LEDGER_HEADER: &str = "status,score,num_layers,ff_dim,embed_dim,num_heads,dropout,batch_size,label_smoothing,warmup_steps,bleu1,bleu2,bleu3,bleu4,rouge,dev_accuracy,checkpoint,steps,wall_secs,seed";

fn ledger_row(r: &TrialRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        if r.ok { "ok" } else { "failed" },
        if r.score.is_finite() { r.score.to_string() } else { "-inf".to_string() },
        r.hp.num_layers,
        r.hp.ff_dim,
        r.hp.embed_dim,
        r.hp.num_heads,
        r.hp.dropout,
        r.hp.batch_size,
        r.hp.label_smoothing,
        r.hp.warmup_steps,
        r.report.bleu[0],
        r.report.bleu[1],
        r.report.bleu[2],
        r.report.bleu[3],
        r.report.rouge,
        r.dev_accuracy,
        r.checkpoint.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        r.steps,
        r.wall_secs,
        r.seed,
    )
}

/// Parse a ledger written by [`ledger_row`].
pub fn read_ledger(path: &Path) -> Result<Vec<TrialRecord>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read ledger {}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line != LEDGER_HEADER {
                return Err(Error::Data(format!("{}: unrecognized ledger header", path.display())));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 20 {
            return Err(Error::Data(format!(
                "{}: ledger line {} has {} fields, expected 20",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            if s == "-inf" {
                return Ok(f64::NEG_INFINITY);
            }
            s.parse::<f64>()
                .map_err(|_| Error::Data(format!("ledger line {}: bad {what} {s:?}", lineno + 1)))
        };
        let parse_u = |s: &str, what: &str| -> Result<u64> {
            s.parse::<u64>()
                .map_err(|_| Error::Data(format!("ledger line {}: bad {what} {s:?}", lineno + 1)))
        };
        let hp = HyperParams {
            num_layers: parse_u(fields[2], "num_layers")? as usize,
            ff_dim: parse_u(fields[3], "ff_dim")? as usize,
            embed_dim: parse_u(fields[4], "embed_dim")? as usize,
            num_heads: parse_u(fields[5], "num_heads")? as usize,
            dropout: parse_f(fields[6], "dropout")?,
            batch_size: parse_u(fields[7], "batch_size")? as usize,
            label_smoothing: parse_f(fields[8], "label_smoothing")?,
            warmup_steps: parse_u(fields[9], "warmup_steps")? as usize,
        };
        let report = ScoreReport {
            bleu: [
                parse_f(fields[10], "bleu1")?,
                parse_f(fields[11], "bleu2")?,
                parse_f(fields[12], "bleu3")?,
                parse_f(fields[13], "bleu4")?,
            ],
            rouge: parse_f(fields[14], "rouge")?,
            brevity_penalty: 1.0,
            hyp_tokens: 0,
            ref_tokens: 0,
        };
        records.push(TrialRecord {
            ok: fields[0] == "ok",
            score: parse_f(fields[1], "score")?,
            hp,
            report,
            dev_accuracy: parse_f(fields[15], "dev_accuracy")?,
            checkpoint: if fields[16].is_empty() { None } else { Some(PathBuf::from(fields[16])) },
            steps: parse_u(fields[17], "steps")?,
            wall_secs: parse_f(fields[18], "wall_secs")?,
            seed: parse_u(fields[19], "seed")?,
        });
    }
    Ok(records)
}

/// Separable synthetic objective peaking at the reference architecture:
/// `100 - sum_axis w_axis * (index - target_index)^2`. Evaluates
/// instantly; used for search self-tests and the synthetic CLI mode.
pub struct SyntheticObjective {
    space: SearchSpace,
    target: HyperParams,
    weights: [f64; 8],
}

impl SyntheticObjective {
    pub fn new(space: SearchSpace, target: HyperParams) -> Self {
        SyntheticObjective {
            space,
            target,
            weights: [0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2],
        }
    }

    pub fn table_default() -> Self {
        Self::new(SearchSpace::table_grid(), HyperParams::default())
    }

    pub fn target(&self) -> &HyperParams {
        &self.target
    }

    pub fn value(&self, hp: &HyperParams) -> f64 {
        let mut total = 100.0;
        for (axis, w) in AxisName::ALL.iter().zip(self.weights) {
            let i = self
                .space
                .value_index(*axis, get_axis(hp, *axis))
                .expect("point on grid") as f64;
            let t = self
                .space
                .value_index(*axis, get_axis(&self.target, *axis))
                .expect("target on grid") as f64;
            total -= w * (i - t) * (i - t);
        }
        total
    }
}

impl TrialRunner for SyntheticObjective {
    fn run(&self, hp: &HyperParams, _seed: u64) -> Result<TrialOutput> {
        let v = self.value(hp);
        Ok(TrialOutput {
            report: ScoreReport {
                bleu: [v, 0.0, 0.0, 0.0],
                rouge: v,
                brevity_penalty: 1.0,
                hyp_tokens: 0,
                ref_tokens: 0,
            },
            dev_accuracy: v / 100.0,
            checkpoint: None,
            steps: 0,
        })
    }
}

#[cfg(test)]
mod tests;
