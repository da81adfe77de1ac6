use std::sync::atomic::{AtomicUsize, Ordering};

use super::*;

/// Wraps a runner and counts invocations.
struct Counting<R: TrialRunner> {
    inner: R,
    calls: AtomicUsize,
}

impl<R: TrialRunner> Counting<R> {
    fn new(inner: R) -> Self {
        Counting { inner, calls: AtomicUsize::new(0) }
    }
    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<R: TrialRunner> TrialRunner for Counting<R> {
    fn run(&self, hp: &HyperParams, seed: u64) -> Result<TrialOutput> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.run(hp, seed)
    }
}

/// Scores every point identically.
struct Constant(f64);

impl TrialRunner for Constant {
    fn run(&self, _hp: &HyperParams, _seed: u64) -> Result<TrialOutput> {
        Ok(TrialOutput {
            report: ScoreReport { bleu: [self.0; 4], rouge: self.0, ..ScoreReport::zero() },
            dev_accuracy: self.0,
            checkpoint: None,
            steps: 0,
        })
    }
}

/// Fails on one designated point, otherwise delegates.
struct FailOn<R: TrialRunner> {
    inner: R,
    poison: PointKey,
}

impl<R: TrialRunner> TrialRunner for FailOn<R> {
    fn run(&self, hp: &HyperParams, seed: u64) -> Result<TrialOutput> {
        if point_key(hp) == self.poison {
            return Err(Error::Data("simulated trainer crash".into()));
        }
        self.inner.run(hp, seed)
    }
}

#[test]
fn table_grid_matches_published_ranges() {
    let space = SearchSpace::table_grid();
    assert_eq!(space.axes.len(), 8);
    let ints = |axis: AxisName| -> Vec<u64> {
        space
            .axis(axis)
            .unwrap()
            .values
            .iter()
            .map(|v| match v {
                GridValue::Int(i) => *i,
                GridValue::Float(f) => panic!("unexpected float {f}"),
            })
            .collect()
    };
    let floats = |axis: AxisName| -> Vec<f64> {
        space
            .axis(axis)
            .unwrap()
            .values
            .iter()
            .map(|v| match v {
                GridValue::Float(f) => *f,
                GridValue::Int(i) => panic!("unexpected int {i}"),
            })
            .collect()
    };
    assert_eq!(ints(AxisName::NumLayers), vec![1, 2, 3, 4, 5, 6, 7]);
    assert_eq!(ints(AxisName::FfDim), vec![128, 256, 512]);
    assert_eq!(ints(AxisName::EmbedDim), vec![32, 64, 128]);
    assert_eq!(ints(AxisName::NumHeads), vec![1, 2, 4, 8]);
    assert_eq!(floats(AxisName::Dropout), vec![0.1, 0.2, 0.3, 0.4, 0.5]);
    assert_eq!(ints(AxisName::BatchSize), vec![256, 512, 1024, 2048, 4096]);
    assert_eq!(floats(AxisName::LabelSmoothing), vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
    assert_eq!(ints(AxisName::WarmupSteps), vec![100, 200, 300, 400, 500, 600]);
    // 7*3*3*4*5*5*6*6 grid points in total.
    let total: usize = space.axes.iter().map(|a| a.values.len()).product();
    assert_eq!(total, 226_800);
}

#[test]
fn validate_point_rejects_off_grid_values() {
    let space = SearchSpace::table_grid();
    let mut hp = HyperParams::default();
    space.validate_point(&hp).unwrap();
    hp.ff_dim = 300;
    assert!(matches!(space.validate_point(&hp), Err(Error::Config(_))));
}

#[test]
fn identical_scores_keep_incumbent() {
    let space = SearchSpace::table_grid();
    let runner = Constant(42.0);
    let mut state = SearchState::new(HyperParams::default());
    let changed = sweep_parameter(
        &mut state,
        &space,
        AxisName::NumLayers,
        &runner,
        &SearchDriver::default(),
    )
    .unwrap();
    assert!(!changed);
    assert_eq!(state.incumbent.num_layers, 5);
}

#[test]
fn synthetic_sweep_moves_to_target_layer_count() {
    // Objective peaks at num_layers = 5; start elsewhere.
    let objective = SyntheticObjective::table_default();
    let mut start = HyperParams::default();
    start.num_layers = 1;
    let mut state = SearchState::new(start);
    let changed = sweep_parameter(
        &mut state,
        &SearchSpace::table_grid(),
        AxisName::NumLayers,
        &objective,
        &SearchDriver::default(),
    )
    .unwrap();
    assert!(changed);
    assert_eq!(state.incumbent.num_layers, 5);
}

#[test]
fn resweeping_an_unchanged_axis_trains_nothing_new() {
    let runner = Counting::new(SyntheticObjective::table_default());
    let driver = SearchDriver::default();
    let space = SearchSpace::table_grid();
    let mut state = SearchState::new(HyperParams::default());
    sweep_parameter(&mut state, &space, AxisName::Dropout, &runner, &driver).unwrap();
    let after_first = runner.calls();
    assert_eq!(after_first, 5);
    sweep_parameter(&mut state, &space, AxisName::Dropout, &runner, &driver).unwrap();
    assert_eq!(runner.calls(), after_first);
}

#[test]
fn run_search_finds_separable_optimum_within_two_passes() {
    let objective = SyntheticObjective::table_default();
    let mut start = HyperParams::default();
    start.num_layers = 1;
    start.ff_dim = 512;
    start.dropout = 0.5;
    start.warmup_steps = 600;
    let (best, state) = run_search(
        &start,
        &SearchSpace::table_grid(),
        &objective,
        &SearchDriver::default(),
        8,
        &AxisName::ALL,
        SearchState::new(start.clone()),
    )
    .unwrap();
    assert_eq!(best, *objective.target());
    assert!(state.converged);
    assert!(state.pass <= 2, "took {} passes", state.pass);
    assert!((state.incumbent_score - 100.0).abs() < 1e-12);
}

#[test]
fn already_optimal_start_converges_in_one_pass() {
    let objective = SyntheticObjective::table_default();
    let start = objective.target().clone();
    let (best, state) = run_search(
        &start,
        &SearchSpace::table_grid(),
        &objective,
        &SearchDriver::default(),
        8,
        &AxisName::ALL,
        SearchState::new(start.clone()),
    )
    .unwrap();
    assert_eq!(best, start);
    assert!(state.converged);
    assert_eq!(state.pass, 1);
    assert!(state.trajectory.iter().all(|t| !t.changed));
}

fn reduced_space() -> SearchSpace {
    let ints = |vals: &[u64]| vals.iter().map(|&v| GridValue::Int(v)).collect();
    let floats = |vals: &[f64]| vals.iter().map(|&v| GridValue::Float(v)).collect();
    SearchSpace {
        axes: vec![
            Axis { name: AxisName::NumLayers, values: ints(&[1, 2, 3]) },
            Axis { name: AxisName::FfDim, values: ints(&[16, 32]) },
            Axis { name: AxisName::EmbedDim, values: ints(&[8, 16]) },
            Axis { name: AxisName::NumHeads, values: ints(&[1, 2, 4]) },
            Axis { name: AxisName::Dropout, values: floats(&[0.1, 0.2]) },
            Axis { name: AxisName::BatchSize, values: ints(&[64, 128]) },
            Axis { name: AxisName::LabelSmoothing, values: floats(&[0.1, 0.3]) },
            Axis { name: AxisName::WarmupSteps, values: ints(&[100, 200, 300]) },
        ],
    }
}

fn enumerate_space(space: &SearchSpace) -> Vec<HyperParams> {
    let mut points = vec![HyperParams::default()];
    for axis in &space.axes {
        let mut next = Vec::with_capacity(points.len() * axis.values.len());
        for p in &points {
            for &v in &axis.values {
                let mut q = p.clone();
                set_axis(&mut q, axis.name, v).unwrap();
                next.push(q);
            }
        }
        points = next;
    }
    points
}

#[test]
fn reduced_grid_exhaustive_enumeration_agrees() {
    let space = reduced_space();
    let mut target = HyperParams::default();
    target.num_layers = 2;
    target.ff_dim = 32;
    target.embed_dim = 16;
    target.num_heads = 2;
    target.dropout = 0.2;
    target.batch_size = 64;
    target.label_smoothing = 0.1;
    target.warmup_steps = 300;
    let objective = SyntheticObjective::new(space.clone(), target.clone());

    // Brute force over all 864 feasible points.
    let mut best: Option<(f64, HyperParams)> = None;
    for p in enumerate_space(&space) {
        if p.validate().is_err() {
            continue;
        }
        let v = objective.value(&p);
        if best.as_ref().map_or(true, |(s, _)| v > *s) {
            best = Some((v, p));
        }
    }
    let (best_score, best_point) = best.unwrap();
    assert_eq!(best_point, target);

    let mut start = HyperParams::default();
    for axis in &space.axes {
        set_axis(&mut start, axis.name, axis.values[0]).unwrap();
    }
    let (found, state) = run_search(
        &start,
        &space,
        &objective,
        &SearchDriver::default(),
        8,
        &AxisName::ALL,
        SearchState::new(start.clone()),
    )
    .unwrap();
    assert_eq!(found, best_point);
    assert!((state.incumbent_score - best_score).abs() < 1e-12);
    assert!(state.pass <= 2);
}

#[test]
fn infeasible_head_width_combinations_are_skipped() {
    let ints = |vals: &[u64]| -> Vec<GridValue> { vals.iter().map(|&v| GridValue::Int(v)).collect() };
    let mut space = reduced_space();
    // embed_dim 12 is incompatible with heads 8; both axes keep at least
    // one feasible combination.
    space.axes[2] = Axis { name: AxisName::EmbedDim, values: ints(&[8, 12]) };
    space.axes[3] = Axis { name: AxisName::NumHeads, values: ints(&[4, 8]) };
    let mut target = HyperParams::default();
    for axis in &space.axes {
        set_axis(&mut target, axis.name, axis.values[0]).unwrap();
    }
    target.embed_dim = 8;
    target.num_heads = 8;
    let objective = SyntheticObjective::new(space.clone(), target.clone());
    let mut start = target.clone();
    start.num_heads = 4;
    let (found, state) = run_search(
        &start,
        &space,
        &objective,
        &SearchDriver::default(),
        8,
        &AxisName::ALL,
        SearchState::new(start.clone()),
    )
    .unwrap();
    assert_eq!(found, target);
    // The infeasible (12, 8) pair must never have been attempted.
    assert!(state
        .history
        .iter()
        .all(|r| r.hp.embed_dim % r.hp.num_heads == 0));
}

#[test]
fn failed_trials_score_neg_infinity_and_search_continues() {
    let mut poison_point = HyperParams::default();
    poison_point.num_layers = 7;
    let runner = FailOn {
        inner: SyntheticObjective::table_default(),
        poison: point_key(&poison_point),
    };
    let mut start = HyperParams::default();
    start.num_layers = 1;
    let (best, state) = run_search(
        &start,
        &SearchSpace::table_grid(),
        &runner,
        &SearchDriver::default(),
        8,
        &AxisName::ALL,
        SearchState::new(start.clone()),
    )
    .unwrap();
    assert_eq!(best.num_layers, 5);
    let failed: Vec<_> = state.history.iter().filter(|r| !r.ok).collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].hp.num_layers, 7);
    assert_eq!(failed[0].score, f64::NEG_INFINITY);
}

#[test]
fn incumbent_score_never_decreases() {
    let objective = SyntheticObjective::table_default();
    let mut start = HyperParams::default();
    start.dropout = 0.5;
    start.embed_dim = 128;
    let (_, state) = run_search(
        &start,
        &SearchSpace::table_grid(),
        &objective,
        &SearchDriver::default(),
        8,
        &AxisName::ALL,
        SearchState::new(start.clone()),
    )
    .unwrap();
    let mut last = f64::NEG_INFINITY;
    for entry in &state.trajectory {
        assert!(entry.score >= last, "score dropped at pass {} {}", entry.pass, entry.axis.key());
        last = entry.score;
    }
}

#[test]
fn search_is_deterministic() {
    let run = || {
        let objective = SyntheticObjective::table_default();
        let mut start = HyperParams::default();
        start.warmup_steps = 100;
        let (best, state) = run_search(
            &start,
            &SearchSpace::table_grid(),
            &objective,
            &SearchDriver::default(),
            8,
            &AxisName::ALL,
            SearchState::new(start.clone()),
        )
        .unwrap();
        let history: Vec<(PointKey, u64, String)> = state
            .history
            .iter()
            .map(|r| (point_key(&r.hp), r.seed, r.score.to_string()))
            .collect();
        (best, history)
    };
    let (b1, h1) = run();
    let (b2, h2) = run();
    assert_eq!(b1, b2);
    assert_eq!(h1, h2);
}

#[test]
fn concurrent_workers_reproduce_single_worker_results() {
    let single = SearchDriver { workers: 1, ..SearchDriver::default() };
    let multi = SearchDriver { workers: 4, ..SearchDriver::default() };
    let run = |driver: &SearchDriver| {
        let objective = SyntheticObjective::table_default();
        let mut start = HyperParams::default();
        start.num_layers = 7;
        start.dropout = 0.5;
        let (best, state) = run_search(
            &start,
            &SearchSpace::table_grid(),
            &objective,
            driver,
            8,
            &AxisName::ALL,
            SearchState::new(start.clone()),
        )
        .unwrap();
        let keys: Vec<PointKey> = state.history.iter().map(|r| point_key(&r.hp)).collect();
        (best, keys)
    };
    assert_eq!(run(&single), run(&multi));
}

#[test]
fn report_requires_history_and_ranks_by_score() {
    let state = SearchState::new(HyperParams::default());
    assert!(matches!(report(&state), Err(Error::Contract(_))));

    let objective = SyntheticObjective::table_default();
    let mut start = HyperParams::default();
    start.ff_dim = 128;
    let (_, state) = run_search(
        &start,
        &SearchSpace::table_grid(),
        &objective,
        &SearchDriver::default(),
        8,
        &AxisName::ALL,
        SearchState::new(start.clone()),
    )
    .unwrap();
    let text = report(&state).unwrap();
    let mut distinct = std::collections::HashSet::new();
    for r in &state.history {
        distinct.insert(point_key(&r.hp));
    }
    assert_eq!(distinct.len(), state.history.len());
    // One ranked line per trial plus headers/trajectory.
    let ranked_lines = text.lines().filter(|l| l.starts_with(char::is_numeric)).count();
    assert_eq!(ranked_lines, state.history.len());
    // Scores non-increasing down the table.
    let scores: Vec<f64> = text
        .lines()
        .skip(1)
        .take(state.history.len())
        .filter_map(|l| l.split_whitespace().nth(1)?.parse::<f64>().ok())
        .collect();
    for w in scores.windows(2) {
        assert!(w[0] >= w[1]);
    }
}

#[test]
fn ledger_resume_reproduces_uninterrupted_search() {
    let dir = tempfile::tempdir().unwrap();
    let ledger_a = dir.path().join("a.csv");
    let objective = SyntheticObjective::table_default();
    let driver = SearchDriver::default();
    let mut start = HyperParams::default();
    start.num_layers = 3;
    start.label_smoothing = 0.2;

    let state = SearchState::new(start.clone()).with_ledger(&ledger_a).unwrap();
    let (best_full, full_state) =
        run_search(&start, &SearchSpace::table_grid(), &objective, &driver, 8, &AxisName::ALL, state)
            .unwrap();

    // Interrupt: keep only the first 9 trials of the ledger.
    let text = std::fs::read_to_string(&ledger_a).unwrap();
    let truncated: Vec<&str> = text.lines().take(10).collect();
    let ledger_b = dir.path().join("b.csv");
    std::fs::write(&ledger_b, format!("{}\n", truncated.join("\n"))).unwrap();

    let counting = Counting::new(SyntheticObjective::table_default());
    let resumed_state = SearchState::new(start.clone()).with_ledger(&ledger_b).unwrap();
    let (best_resumed, resumed) = run_search(
        &start,
        &SearchSpace::table_grid(),
        &counting,
        &driver,
        8,
        &AxisName::ALL,
        resumed_state,
    )
    .unwrap();

    assert_eq!(best_full, best_resumed);
    assert_eq!(full_state.history.len(), resumed.history.len());
    // Only the trials beyond the truncation point were re-run.
    assert_eq!(counting.calls(), full_state.history.len() - 9);
    // And the rebuilt ledger matches the uninterrupted one except for
    // wall-clock columns.
    let strip = |p: &std::path::Path| -> Vec<String> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                if f.len() == 20 {
                    f[18] = "-";
                }
                f.join(",")
            })
            .collect()
    };
    assert_eq!(strip(&ledger_a), strip(&ledger_b));
}

#[test]
fn ledger_round_trips_float_axes_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ledger.csv");
    let hp = HyperParams { dropout: 0.3, label_smoothing: 0.6, ..HyperParams::default() };
    let record = TrialRecord {
        hp: hp.clone(),
        ok: true,
        score: 12.5,
        report: ScoreReport::zero(),
        dev_accuracy: 0.5,
        checkpoint: Some(PathBuf::from("x/best.ckpt")),
        steps: 42,
        wall_secs: 1.25,
        seed: 7,
    };
    std::fs::write(&path, format!("{}\n{}\n", LEDGER_HEADER, ledger_row(&record))).unwrap();
    let records = read_ledger(&path).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(point_key(&records[0].hp), point_key(&hp));
    assert_eq!(records[0].checkpoint.as_deref(), Some(Path::new("x/best.ckpt")));
}

#[test]
fn architecture_table_lists_all_axes() {
    let table = architecture_table(&HyperParams::default());
    for axis in AxisName::ALL {
        assert!(table.contains(axis.key()), "{table}");
    }
    assert!(table.contains("4096"));
}
