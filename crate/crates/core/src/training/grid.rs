//! Experiment grids: every (model, op, seed) cell is an independent job
//! with its own seeded generators, run on a bounded worker pool.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::sync::{mpsc, Mutex};
use std::time::Instant;

use super::eval::{evaluate_metrics, metrics_of, normalized_score, predict, random_baseline_mse, Metrics, BASELINE_INITS};
use super::optim::OptimizerKind;
use super::results::RunResult;
use super::train::{train_model, Batch, FullBatch, IdentitySource, LossKind, TaskSource, TrainConfig, TrainOutcome};
use super::TrainError;
use crate::autodiff::ActivationKind;
use crate::layers::{init_params, AblationVariant, CellKind, HeadKind, MlpSpec, ModelParams, ModelSpec, DEFAULT_EPSILON};
use crate::seed;
use crate::tasks::{
    build_language_splits, identity_dataset, language_dataset, make_task, sample_batch, sample_recurrent_batch,
    vocabulary, ArithmeticOp, Dataset, Regime, TaskInstance, RECURRENT_EXTRAP_LEN, RECURRENT_INPUT_DIM,
    RECURRENT_TRAIN_LEN, STATIC_INPUT_DIM,
};

pub const STATIC_MODELS: [&str; 12] = [
    "tanh", "sigmoid", "relu6", "softsign", "selu", "elu", "relu", "crelu", "none", "prelu", "nac", "nalu",
];
pub const RECURRENT_MODELS: [&str; 6] = ["lstm", "gru", "rnn_tanh", "rnn_relu", "nac", "nalu"];
pub const LANGUAGE_MODELS: [&str; 4] = ["lstm", "lstm_summed", "lstm_nac", "lstm_nalu"];
pub const IDENTITY_MODELS: [&str; 16] = [
    "hardtanh",
    "sigmoid",
    "relu6",
    "softsign",
    "tanh",
    "threshold",
    "selu",
    "elu",
    "relu",
    "crelu",
    "leaky_relu",
    "tanhshrink",
    "softplus",
    "prelu",
    "softshrink",
    "none",
];

/// Adam step size for the static and recurrent arithmetic grids.
pub const SYNTHETIC_LEARNING_RATE: f64 = 1e-2;

const IDENTITY_HIDDEN: [usize; 5] = [1, 8, 8, 8, 1];
const IDENTITY_TRAIN_RANGE: (f64, f64) = (-5.0, 5.0);
const IDENTITY_CURVE_RANGE: (f64, f64) = (-20.0, 20.0);
const IDENTITY_CURVE_POINTS: usize = 81;
/// Mean |v| of the zero predictor over the integer grid, as a percentage base.
const IDENTITY_PERCENT_BASE: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Identity,
    Static,
    Recurrent,
    Language,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Identity => "identity",
            Experiment::Static => "static",
            Experiment::Recurrent => "recurrent",
            Experiment::Language => "language",
        }
    }

    fn default_steps(self) -> usize {
        match self {
            Experiment::Identity => 10_000,
            Experiment::Static | Experiment::Recurrent => 50_000,
            Experiment::Language => 300_000,
        }
    }

    pub fn default_models(self) -> Vec<String> {
        let list: &[&str] = match self {
            Experiment::Identity => &IDENTITY_MODELS,
            Experiment::Static => &STATIC_MODELS,
            Experiment::Recurrent => &RECURRENT_MODELS,
            Experiment::Language => &LANGUAGE_MODELS,
        };
        list.iter().map(|s| s.to_string()).collect()
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(Experiment::Identity),
            "static" => Ok(Experiment::Static),
            "recurrent" => Ok(Experiment::Recurrent),
            "language" => Ok(Experiment::Language),
            _ => Err(format!("unknown experiment `{s}`")),
        }
    }
}

/// Declarative description of one grid. Unset fields take the defaults of
/// the chosen experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub experiment: Experiment,
    /// Master seed; every job seed is derived from it.
    pub seed: u64,
    /// Seeds per (model, op) cell.
    pub seeds: usize,
    /// Model tags; empty selects the experiment's default set.
    pub models: Vec<String>,
    /// Operations; empty selects all six.
    pub ops: Vec<ArithmeticOp>,
    pub steps: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    /// Divides step and model counts.
    pub quick: usize,
    /// Evaluation examples per regime.
    pub eval_count: usize,
    /// Evaluation sequences at the long extrapolation length.
    pub long_eval_count: usize,
    /// Language model selection grid.
    pub hidden_sizes: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub inits: usize,
    /// Identity experiment: models trained per activation.
    pub model_count: usize,
    pub workers: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            experiment: Experiment::Static,
            seed: 0,
            seeds: 5,
            models: Vec::new(),
            ops: Vec::new(),
            steps: None,
            batch_size: None,
            learning_rate: None,
            quick: 1,
            eval_count: 1000,
            long_eval_count: 200,
            hidden_sizes: vec![16, 32],
            learning_rates: vec![0.01, 0.001],
            inits: 10,
            model_count: 100,
            workers: 1,
        }
    }
}

impl GridSpec {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, TrainError> {
        toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))
    }

    fn scaled(&self, n: usize) -> usize {
        n.div_ceil(self.quick.max(1)).max(1)
    }

    pub fn effective_steps(&self) -> usize {
        self.scaled(self.steps.unwrap_or(self.experiment.default_steps()))
    }

    pub fn effective_models(&self) -> Vec<String> {
        if self.models.is_empty() {
            self.experiment.default_models()
        } else {
            self.models.iter().map(|m| m.to_ascii_lowercase()).collect()
        }
    }

    pub fn effective_ops(&self) -> Vec<ArithmeticOp> {
        if self.ops.is_empty() {
            ArithmeticOp::ALL.to_vec()
        } else {
            self.ops.clone()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if self.quick == 0 {
            return bad("quick factor must be at least 1".into());
        }
        if self.seeds == 0 || self.eval_count == 0 || self.long_eval_count == 0 || self.workers == 0 {
            return bad("seeds, evaluation counts and workers must be positive".into());
        }
        if self.experiment == Experiment::Language
            && (self.hidden_sizes.is_empty() || self.learning_rates.is_empty() || self.inits == 0)
        {
            return bad("language selection grid is empty".into());
        }
        if self.learning_rate.is_some_and(|lr| !(lr > 0.0)) || self.learning_rates.iter().any(|lr| !(*lr > 0.0)) {
            return bad("learning rates must be positive".into());
        }
        for m in self.effective_models() {
            match self.experiment {
                Experiment::Identity => identity_model(&m).map(|_| ()),
                Experiment::Static => static_model(&m).map(|_| ()),
                Experiment::Recurrent => recurrent_model(&m).map(|_| ()),
                Experiment::Language => language_model(&m, 16).map(|_| ()),
            }?;
        }
        Ok(())
    }
}

fn unknown(kind: &str, tag: &str) -> TrainError {
    TrainError::InvalidConfig(format!("unknown {kind} model `{tag}`"))
}

/// Static models map `100 -> 2 -> 1`.
pub fn static_model(tag: &str) -> Result<ModelSpec, TrainError> {
    let widths = vec![STATIC_INPUT_DIM, 2, 1];
    Ok(match tag {
        "nac" => ModelSpec::NacStack { widths },
        "nalu" => ModelSpec::NaluStack {
            widths,
            epsilon: DEFAULT_EPSILON,
            tied: true,
        },
        "nalu_untied" => ModelSpec::NaluStack {
            widths,
            epsilon: DEFAULT_EPSILON,
            tied: false,
        },
        t if t.starts_with("ablation_") => ModelSpec::AblationStack {
            variant: t["ablation_".len()..].parse::<AblationVariant>().map_err(|_| unknown("static", tag))?,
            widths,
        },
        t => ModelSpec::Mlp(MlpSpec::new(
            widths,
            t.parse::<ActivationKind>().map_err(|_| unknown("static", tag))?,
        )),
    })
}

/// Recurrent models read 10 inputs per step into a hidden state of 2.
pub fn recurrent_model(tag: &str) -> Result<ModelSpec, TrainError> {
    let cell: CellKind = tag.parse().map_err(|_| unknown("recurrent", tag))?;
    Ok(ModelSpec::Recurrent {
        cell,
        input: RECURRENT_INPUT_DIM,
        hidden: 2,
        head: HeadKind::for_cell(cell),
    })
}

pub fn language_model(tag: &str, hidden: usize) -> Result<ModelSpec, TrainError> {
    let (head, summed_state) = match tag {
        "lstm" => (HeadKind::Linear, false),
        "lstm_summed" => (HeadKind::Linear, true),
        "lstm_nac" => (HeadKind::Nac, false),
        "lstm_nalu" => (HeadKind::Nalu, false),
        _ => return Err(unknown("language", tag)),
    };
    Ok(ModelSpec::Language {
        vocab: vocabulary().len(),
        embed: hidden,
        hidden,
        head,
        summed_state,
    })
}

/// Scalar autoencoder `1 -> 8 -> 8 -> 8 -> 1`.
pub fn identity_model(tag: &str) -> Result<ModelSpec, TrainError> {
    let act: ActivationKind = tag.parse().map_err(|_| unknown("identity", tag))?;
    Ok(ModelSpec::Mlp(MlpSpec::new(IDENTITY_HIDDEN.to_vec(), act)))
}

/// Untrained architecture whose error defines a score of 100.
pub fn reference_model(experiment: Experiment) -> ModelSpec {
    match experiment {
        Experiment::Static | Experiment::Identity => {
            ModelSpec::Mlp(MlpSpec::new(vec![STATIC_INPUT_DIM, 2, 1], ActivationKind::Relu6))
        }
        Experiment::Recurrent => ModelSpec::Recurrent {
            cell: CellKind::Lstm,
            input: RECURRENT_INPUT_DIM,
            hidden: 2,
            head: HeadKind::Linear,
        },
        Experiment::Language => language_model("lstm", 16).expect("known tag"),
    }
}

/// Runs `jobs` on `workers` threads; results come back in job order.
pub fn run_pool<T, F>(jobs: Vec<F>, workers: usize) -> Vec<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let n = jobs.len();
    if workers <= 1 || n <= 1 {
        return jobs.into_iter().map(|f| f()).collect();
    }
    let queue = Mutex::new(jobs.into_iter().enumerate().collect::<VecDeque<_>>());
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|s| {
        for _ in 0..workers.min(n) {
            let tx = tx.clone();
            let queue = &queue;
            s.spawn(move || loop {
                let job = queue.lock().expect("queue lock").pop_front();
                match job {
                    Some((i, f)) => {
                        if tx.send((i, f())).is_err() {
                            break;
                        }
                    }
                    None => break,
                }
            });
        }
    });
    drop(tx);
    let mut out: Vec<(usize, T)> = rx.into_iter().collect();
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, t)| t).collect()
}

/// A loss or error curve from one run, grouped by `series` for export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCurve {
    pub series: String,
    pub x_label: String,
    pub run: u64,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct GridOutput {
    pub results: Vec<RunResult>,
    /// Every language candidate, before selection.
    pub candidates: Vec<RunResult>,
    pub curves: Vec<RawCurve>,
}

pub fn run_experiment_grid(grid: &GridSpec) -> Result<GridOutput, TrainError> {
    grid.validate()?;
    match grid.experiment {
        Experiment::Identity => run_identity(grid),
        Experiment::Static | Experiment::Recurrent => run_arithmetic(grid),
        Experiment::Language => run_language(grid),
    }
}

fn loss_curve(series: String, run: u64, out: &TrainOutcome) -> RawCurve {
    RawCurve {
        series,
        x_label: "step".into(),
        run,
        points: out.curve.iter().map(|p| (p.step as f64, p.loss)).collect(),
    }
}

#[allow(clippy::too_many_arguments)]
fn result_row(
    grid: &GridSpec,
    model: &str,
    op: &str,
    regime: Regime,
    seed: u64,
    m: Metrics,
    score: f64,
    steps: usize,
    wall_ms: u64,
    status: &str,
) -> RunResult {
    RunResult {
        model: model.to_string(),
        task: grid.experiment.name().to_string(),
        op: op.to_string(),
        regime,
        seed,
        raw_mse: m.mse,
        raw_mae: m.mae,
        normalized_score: score,
        steps,
        wall_ms: Some(wall_ms),
        status: status.to_string(),
    }
}

fn failed_rows(grid: &GridSpec, model: &str, op: &str, regimes: &[Regime], seed: u64, err: &TrainError) -> Vec<RunResult> {
    let nan = Metrics {
        mse: f64::NAN,
        mae: f64::NAN,
    };
    regimes
        .iter()
        .map(|&r| result_row(grid, model, op, r, seed, nan, f64::NAN, 0, 0, &format!("failed: {err}")))
        .collect()
}

struct TaskContext {
    task: TaskInstance,
    seed_index: u64,
    interp: Dataset,
    extrap: Dataset,
    base_interp: f64,
    base_extrap: f64,
}

fn build_context(grid: &GridSpec, op: ArithmeticOp, seed_index: u64) -> Result<TaskContext, TrainError> {
    let recurrent = grid.experiment == Experiment::Recurrent;
    let label = format!("{}/task/{op}/{seed_index}", grid.experiment);
    let dim = if recurrent { RECURRENT_INPUT_DIM } else { STATIC_INPUT_DIM };
    let task = make_task(&mut seed::stream(grid.seed, &label), op, dim);
    let (interp, extrap) = if recurrent {
        (
            sample_recurrent_batch(
                &task,
                RECURRENT_TRAIN_LEN,
                Regime::Interpolation,
                grid.eval_count,
                &mut task.stream(Regime::Interpolation, 0),
            )?,
            sample_recurrent_batch(
                &task,
                RECURRENT_EXTRAP_LEN,
                Regime::Extrapolation,
                grid.long_eval_count,
                &mut task.stream(Regime::Extrapolation, 0),
            )?,
        )
    } else {
        (
            sample_batch(&task, Regime::Interpolation, grid.eval_count, &mut task.stream(Regime::Interpolation, 0))?,
            sample_batch(&task, Regime::Extrapolation, grid.eval_count, &mut task.stream(Regime::Extrapolation, 0))?,
        )
    };
    let reference = reference_model(grid.experiment);
    let base_interp = random_baseline_mse(&reference, &interp, &mut seed::stream(task.seed, "baseline/interpolation"))?;
    let base_extrap = random_baseline_mse(&reference, &extrap, &mut seed::stream(task.seed, "baseline/extrapolation"))?;
    Ok(TaskContext {
        task,
        seed_index,
        interp,
        extrap,
        base_interp,
        base_extrap,
    })
}

fn run_arithmetic(grid: &GridSpec) -> Result<GridOutput, TrainError> {
    let recurrent = grid.experiment == Experiment::Recurrent;
    let ops = grid.effective_ops();
    let models = grid.effective_models();
    let steps = grid.effective_steps();

    let cells: Vec<(ArithmeticOp, u64)> = ops
        .iter()
        .flat_map(|&op| (0..grid.seeds as u64).map(move |s| (op, s)))
        .collect();
    let contexts = run_pool(
        cells.iter().map(|&(op, s)| move || build_context(grid, op, s)).collect(),
        grid.workers,
    )
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let regimes = [Regime::Interpolation, Regime::Extrapolation];
    let mut jobs = Vec::new();
    for ctx in &contexts {
        for model in &models {
            jobs.push(move || -> (Vec<RunResult>, Option<RawCurve>) {
                let op = ctx.task.op.name();
                let started = Instant::now();
                let run = || -> Result<(TrainOutcome, Metrics, Metrics), TrainError> {
                    let spec = if recurrent { recurrent_model(model)? } else { static_model(model)? };
                    let label = format!("{}/init/{model}/{op}/{}", grid.experiment, ctx.seed_index);
                    let init = init_params(&spec, &mut seed::stream(grid.seed, &label))?;
                    let mut source = TaskSource::new(ctx.task, recurrent.then_some(RECURRENT_TRAIN_LEN), 0);
                    let mut cfg = TrainConfig::adam(steps, ctx.seed_index);
                    cfg.batch_size = grid.batch_size.unwrap_or(64);
                    cfg.learning_rate = grid.learning_rate.unwrap_or(SYNTHETIC_LEARNING_RATE);
                    let out = train_model(&spec, &init, &mut source, &cfg)?;
                    let mi = evaluate_metrics(&out.params, &spec, &ctx.interp)?;
                    let me = evaluate_metrics(&out.params, &spec, &ctx.extrap)?;
                    Ok((out, mi, me))
                };
                match run() {
                    Ok((out, mi, me)) => {
                        let wall = started.elapsed().as_millis() as u64;
                        let status = out.status.label();
                        let rows = vec![
                            result_row(
                                grid,
                                model,
                                op,
                                Regime::Interpolation,
                                ctx.seed_index,
                                mi,
                                normalized_score(mi.mse, ctx.base_interp).unwrap_or(f64::NAN),
                                out.steps_run,
                                wall,
                                status,
                            ),
                            result_row(
                                grid,
                                model,
                                op,
                                Regime::Extrapolation,
                                ctx.seed_index,
                                me,
                                normalized_score(me.mse, ctx.base_extrap).unwrap_or(f64::NAN),
                                out.steps_run,
                                wall,
                                status,
                            ),
                        ];
                        let curve = loss_curve(format!("{}_loss_{model}_{op}", grid.experiment), ctx.seed_index, &out);
                        (rows, Some(curve))
                    }
                    Err(e) => (failed_rows(grid, model, op, &regimes, ctx.seed_index, &e), None),
                }
            });
        }
    }

    let mut output = GridOutput::default();
    for (rows, curve) in run_pool(jobs, grid.workers) {
        output.results.extend(rows);
        output.curves.extend(curve);
    }
    Ok(output)
}

struct LanguageData {
    train: Vec<Dataset>,
    validation: Vec<Dataset>,
    test: Vec<Dataset>,
}

fn grouped_metrics(params: &ModelParams, spec: &ModelSpec, groups: &[Dataset]) -> Result<Metrics, TrainError> {
    let (mut preds, mut targets) = (Vec::new(), Vec::new());
    for g in groups {
        preds.extend(predict(params, spec, g)?);
        targets.extend_from_slice(&g.targets);
    }
    Ok(metrics_of(&preds, &targets))
}

fn grouped_baseline<R: Rng>(reference: &ModelSpec, groups: &[Dataset], rng: &mut R) -> Result<f64, TrainError> {
    let mut total = 0.0;
    for _ in 0..BASELINE_INITS {
        let p = init_params(reference, rng)?;
        total += grouped_metrics(&p, reference, groups)?.mse;
    }
    Ok(total / BASELINE_INITS as f64)
}

fn run_language(grid: &GridSpec) -> Result<GridOutput, TrainError> {
    let splits = build_language_splits(&mut seed::stream(grid.seed, "language/splits"));
    let data = LanguageData {
        train: language_dataset(&splits.train, Regime::Train)?,
        validation: language_dataset(&splits.validation, Regime::Validation)?,
        test: language_dataset(&splits.test, Regime::Test)?,
    };
    let reference = reference_model(Experiment::Language);
    let mut brng = seed::stream(grid.seed, "language/baseline");
    let baselines = [
        grouped_baseline(&reference, &data.train, &mut brng)?,
        grouped_baseline(&reference, &data.validation, &mut brng)?,
        grouped_baseline(&reference, &data.test, &mut brng)?,
    ];
    let steps = grid.effective_steps();
    let inits = grid.scaled(grid.inits) as u64;
    let models = grid.effective_models();

    struct Candidate {
        model: String,
        hidden: usize,
        lr: f64,
        init: u64,
    }
    let mut candidates = Vec::new();
    for model in &models {
        for &hidden in &grid.hidden_sizes {
            for &lr in &grid.learning_rates {
                for init in 0..inits {
                    candidates.push(Candidate {
                        model: model.clone(),
                        hidden,
                        lr,
                        init,
                    });
                }
            }
        }
    }

    let data = &data;
    let jobs: Vec<_> = candidates
        .iter()
        .map(|c| {
            move || -> Result<(TrainOutcome, [Metrics; 3], u64), TrainError> {
                let started = Instant::now();
                let spec = language_model(&c.model, c.hidden)?;
                let label = format!("language/init/{}/{}/{}/{}", c.model, c.hidden, c.lr, c.init);
                let init = init_params(&spec, &mut seed::stream(grid.seed, &label))?;
                let batches: Vec<Batch> = data.train.iter().map(Batch::from_dataset).collect();
                let cfg = TrainConfig {
                    optimizer: OptimizerKind::Adam,
                    learning_rate: c.lr,
                    steps,
                    batch_size: 1,
                    seed: c.init,
                    loss: LossKind::MeanSquaredError,
                    log_every: 0,
                };
                let out = train_model(&spec, &init, &mut FullBatch(batches), &cfg)?;
                let m = [
                    grouped_metrics(&out.params, &spec, &data.train)?,
                    grouped_metrics(&out.params, &spec, &data.validation)?,
                    grouped_metrics(&out.params, &spec, &data.test)?,
                ];
                Ok((out, m, started.elapsed().as_millis() as u64))
            }
        })
        .collect();
    let outcomes = run_pool(jobs, grid.workers);

    let regimes = [Regime::Train, Regime::Validation, Regime::Test];
    let mut output = GridOutput::default();
    let mut best: Vec<(f64, Vec<RunResult>)> = models.iter().map(|_| (f64::INFINITY, Vec::new())).collect();
    for (c, outcome) in candidates.iter().zip(outcomes) {
        let tag = format!("{}[h={},lr={}]", c.model, c.hidden, c.lr);
        let slot = models.iter().position(|m| *m == c.model).expect("candidate model listed");
        match outcome {
            Ok((out, m, wall)) => {
                let rows: Vec<RunResult> = regimes
                    .iter()
                    .zip(m.iter().zip(baselines))
                    .map(|(&r, (&mi, base))| {
                        let score = normalized_score(mi.mse, base).unwrap_or(f64::NAN);
                        result_row(grid, &tag, "language", r, c.init, mi, score, out.steps_run, wall, out.status.label())
                    })
                    .collect();
                let val = m[1].mse;
                if val < best[slot].0 || (best[slot].1.is_empty() && !val.is_nan()) {
                    best[slot] = (val, rows.clone());
                }
                output.curves.push(loss_curve(format!("language_loss_{tag}"), c.init, &out));
                output.candidates.extend(rows);
            }
            Err(e) => output
                .candidates
                .extend(failed_rows(grid, &tag, "language", &regimes, c.init, &e)),
        }
    }
    for (model, (_, rows)) in models.iter().zip(best) {
        for mut r in rows {
            r.model = model.clone();
            output.results.push(r);
        }
    }
    Ok(output)
}

fn run_identity(grid: &GridSpec) -> Result<GridOutput, TrainError> {
    let models = grid.effective_models();
    let count = grid.scaled(grid.model_count) as u64;
    let steps = grid.effective_steps();
    let ints = identity_dataset(-1000.0, 1000.0, 2001)?;
    let near = identity_dataset(IDENTITY_TRAIN_RANGE.0, IDENTITY_TRAIN_RANGE.1, 101)?;
    let curve_grid = identity_dataset(IDENTITY_CURVE_RANGE.0, IDENTITY_CURVE_RANGE.1, IDENTITY_CURVE_POINTS)?;

    let mut jobs = Vec::new();
    for model in &models {
        for k in 0..count {
            let (ints, near, curve_grid) = (&ints, &near, &curve_grid);
            jobs.push(move || -> (Vec<RunResult>, Option<RawCurve>) {
                let started = Instant::now();
                let run = || -> Result<_, TrainError> {
                    let spec = identity_model(model)?;
                    let init = init_params(&spec, &mut seed::stream(grid.seed, &format!("identity/init/{model}/{k}")))?;
                    let mut source = IdentitySource {
                        lo: IDENTITY_TRAIN_RANGE.0,
                        hi: IDENTITY_TRAIN_RANGE.1,
                        rng: seed::stream(grid.seed, &format!("identity/data/{model}/{k}")),
                    };
                    let cfg = TrainConfig {
                        optimizer: OptimizerKind::Sgd,
                        learning_rate: grid.learning_rate.unwrap_or(0.01),
                        steps,
                        batch_size: grid.batch_size.unwrap_or(32),
                        seed: k,
                        loss: LossKind::MeanSquaredError,
                        log_every: 0,
                    };
                    let out = train_model(&spec, &init, &mut source, &cfg)?;
                    let mi = evaluate_metrics(&out.params, &spec, near)?;
                    let me = evaluate_metrics(&out.params, &spec, ints)?;
                    let preds = predict(&out.params, &spec, curve_grid)?;
                    Ok((out, mi, me, preds))
                };
                match run() {
                    Ok((out, mi, me, preds)) => {
                        let wall = started.elapsed().as_millis() as u64;
                        let pct = |m: Metrics| 100.0 * m.mae / IDENTITY_PERCENT_BASE;
                        let rows = vec![
                            result_row(grid, model, "identity", Regime::Interpolation, k, mi, pct(mi), out.steps_run, wall, out.status.label()),
                            result_row(grid, model, "identity", Regime::Extrapolation, k, me, pct(me), out.steps_run, wall, out.status.label()),
                        ];
                        let curve = RawCurve {
                            series: format!("identity_error_{model}"),
                            x_label: "input".into(),
                            run: k,
                            points: curve_grid
                                .targets
                                .iter()
                                .zip(&preds)
                                .map(|(&x, &p)| (x, (p - x).abs()))
                                .collect(),
                        };
                        (rows, Some(curve))
                    }
                    Err(e) => (
                        failed_rows(grid, model, "identity", &[Regime::Interpolation, Regime::Extrapolation], k, &e),
                        None,
                    ),
                }
            });
        }
    }
    let mut output = GridOutput::default();
    for (rows, curve) in run_pool(jobs, grid.workers) {
        output.results.extend(rows);
        output.curves.extend(curve);
    }
    Ok(output)
}
