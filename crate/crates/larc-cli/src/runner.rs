//! Drive a controller over a stream, enforce the bound invariants online,
//! and assemble the report artifacts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use anyhow::{bail, Context, Result};
use larc_core::controllers::{ArcState, Controller, MondrianState, Partition};
use larc_core::event::StreamEvent;
use larc_core::kernels::KernelSpec;
use larc_core::losses::{self, LossKind};
use larc_core::metrics::{
    self, group_conditional_risk, localized_risk, scalar_trajectory_bound, theorem1_gap,
    WeightingFn,
};
use larc_core::monitor::{LarcMonitor, ScalarMonitor, Violation};
use larc_core::threshold::{learning_rate, LarcState, ThresholdSnapshot};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::{InvariantMode, Method, RunConfig, StreamConfig};
use crate::stream::{self, Stream};

/// A violated runtime invariant. Surfaced as a dedicated error so the CLI can
/// map it to its own exit code.
#[derive(Debug, Clone)]
pub struct InvariantViolation(pub Violation);

impl fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.describe())
    }
}

impl std::error::Error for InvariantViolation {}

/// Process exit code for a failed command: 2 for a violated invariant,
/// 1 for usage and I/O failures.
pub fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<InvariantViolation>().is_some() {
        2
    } else {
        1
    }
}

/// One line of `trajectory.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: u64,
    pub eta: f64,
    pub threshold_at_x: f64,
    pub loss: f64,
    pub cum_risk: f64,
    pub t2_bound: f64,
    pub group: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub schema: u32,
    pub method: Method,
    pub alpha: f64,
    pub steps: u64,
    pub final_cum_risk: f64,
    /// Largest `|L̄(T) − α|` observed over the whole trajectory.
    pub max_abs_risk_gap: f64,
    pub trajectory_bound_final: f64,
    pub domain_radius: f64,
    pub score_bound: f64,
    pub invariant_mode: InvariantMode,
    pub violation_count: usize,
    /// First few violations when running in record mode.
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LocalizedEntry {
    pub w_id: String,
    pub risk: f64,
    pub alpha_plus_gap: f64,
}

/// Hold-out evaluation of the calibrated predictor (`averaged` time-mean
/// threshold for L-ARC, `final` threshold for the scalar methods).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HoldoutEval {
    pub predictor: String,
    pub events: usize,
    pub final_risk: Option<f64>,
    pub per_group: BTreeMap<u32, f64>,
    pub group_counts: BTreeMap<u32, usize>,
    pub localized: Vec<LocalizedEntry>,
    /// Kept-candidate count for multi-candidate events; threshold length
    /// within `[0, S_max]` for single-score events.
    pub mean_set_size: Option<f64>,
}

impl HoldoutEval {
    fn empty(predictor: &str) -> Self {
        HoldoutEval {
            predictor: predictor.into(),
            events: 0,
            final_risk: None,
            per_group: BTreeMap::new(),
            group_counts: BTreeMap::new(),
            localized: Vec::new(),
            mean_set_size: None,
        }
    }
}

/// Controller state serialized into `state.json`, wrapped with enough
/// context (config echo, stream-derived bounds) to replay the hold-out.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MethodState {
    Arc(ArcState),
    Mondrian(MondrianState),
    Larc(ThresholdSnapshot),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateFile {
    pub schema: u32,
    pub score_bound: f64,
    pub domain_radius: f64,
    pub config: RunConfig,
    pub state: MethodState,
}

#[derive(Debug)]
pub struct RunOutput {
    pub config: RunConfig,
    pub rows: Vec<TrajectoryRow>,
    pub summary: Summary,
    pub holdout_eval: HoldoutEval,
    pub state_file: StateFile,
    pub holdout_events: Vec<StreamEvent>,
}

/// Materialize the configured stream.
pub fn build_stream(config: &RunConfig) -> Result<Stream> {
    match &config.stream {
        StreamConfig::Synthetic { spec, holdout } => stream::synthetic_stream_split(spec, *holdout),
        StreamConfig::Adversarial {
            kind,
            horizon,
            seed,
        } => Ok(stream::adversarial_stream(*kind, *horizon, *seed)),
        StreamConfig::Csv { path, .. } => {
            stream::csv_timeseries(path, config.stream.csv_options().expect("csv stream"))
        }
    }
}

/// Domain radius for the bound machinery: the observed maximum calibration
/// covariate norm for generated streams, the declared value (validated
/// against the data) for CSV streams.
fn resolve_domain_radius(config: &RunConfig, stream: &Stream) -> Result<f64> {
    let observed = stream.max_covariate_norm();
    match &config.stream {
        StreamConfig::Csv { domain_radius, .. } => {
            if observed > *domain_radius {
                bail!(
                    "declared domain_radius {domain_radius} is below the observed covariate norm {observed}"
                );
            }
            Ok(*domain_radius)
        }
        _ => Ok(observed),
    }
}

/// 25-point probe grid inside the ball of radius `domain_radius`: half early
/// calibration covariates (where the action is), half seeded uniform draws
/// from the ball.
fn probe_grid(
    seed: u64,
    domain_radius: f64,
    dim: usize,
    calibration: &[&StreamEvent],
) -> Vec<Vec<f64>> {
    const PROBES: usize = 25;
    let mut probes: Vec<Vec<f64>> = calibration
        .iter()
        .take(PROBES / 2)
        .map(|e| e.x.clone())
        .collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    while probes.len() < PROBES {
        let direction: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let radius = domain_radius * rng.random_range(0.0f64..1.0).powf(1.0 / dim as f64);
        probes.push(direction.iter().map(|v| v / norm * radius).collect());
    }
    probes
}

fn weighting_functions(config: &RunConfig) -> Result<Vec<(String, WeightingFn)>> {
    config
        .weightings
        .iter()
        .map(|w| {
            let kernel: KernelSpec = w
                .kernel
                .or(config.kernel)
                .context("weighting needs a kernel")?;
            let bumps = w
                .centers
                .iter()
                .zip(&w.betas)
                .map(|(center, beta)| metrics::Bump {
                    center: center.clone(),
                    beta: *beta,
                })
                .collect();
            Ok((
                w.id.clone(),
                WeightingFn {
                    bumps,
                    constant: w.constant,
                    kernel,
                },
            ))
        })
        .collect()
}

fn build_controller(config: &RunConfig, score_bound: f64) -> Result<Controller> {
    Ok(match config.method {
        Method::Arc => Controller::Arc(ArcState::new(config.alpha, config.eta1, 1.0)?),
        Method::Mondrian => {
            let partition = config
                .mondrian_cells
                .clone()
                .unwrap_or(Partition::Single);
            Controller::Mondrian(MondrianState::new(partition, config.alpha, config.eta1, 1.0)?)
        }
        Method::Larc => Controller::Larc(LarcState::new(config.larc_config(score_bound)?)?),
    })
}

/// Execute a full run: calibration loop with invariant checks, then hold-out
/// evaluation of the calibrated predictor.
pub fn execute(config: &RunConfig) -> Result<RunOutput> {
    Ok(execute_full(config)?.0)
}

/// [`execute`], also handing back the trained controller.
pub fn execute_full(config: &RunConfig) -> Result<(RunOutput, Controller)> {
    config.validate()?;
    let stream = build_stream(config)?;
    let mut calibration: Vec<&StreamEvent> = stream.calibration().collect();
    if let Some(cap) = config.max_steps {
        calibration.truncate(cap);
    }
    if calibration.is_empty() {
        bail!("empty stream: no calibration events");
    }
    let holdout: Vec<StreamEvent> = stream.holdout().cloned().collect();
    let score_bound = stream.score_bound;
    let domain_radius = resolve_domain_radius(config, &stream)?;
    let weightings = weighting_functions(config)?;

    let mut controller = build_controller(config, score_bound)?;

    // Bound monitors. L-ARC gets the full suite on a probe grid; the scalar
    // methods get the trajectory bound (per cell for Mondrian, whose marginal
    // column is the Cauchy-Schwarz combination of the cell bounds).
    let dim = calibration[0].x.len();
    let mut larc_monitor = match &controller {
        Controller::Larc(state) => Some(LarcMonitor::new(
            state.config(),
            domain_radius,
            probe_grid(config.seed, domain_radius, dim, &calibration),
        )),
        _ => None,
    };
    let mut scalar_monitors: Vec<ScalarMonitor> = match &controller {
        Controller::Arc(_) => vec![ScalarMonitor::new(config.alpha, score_bound, config.eta1, 1.0)],
        Controller::Mondrian(m) => (0..m.cells.len())
            .map(|_| ScalarMonitor::new(config.alpha, score_bound, config.eta1, 1.0))
            .collect(),
        Controller::Larc(_) => Vec::new(),
    };
    let cell_count = scalar_monitors.len().max(1);

    let mut rows = Vec::with_capacity(calibration.len());
    let mut violations: Vec<Violation> = Vec::new();
    let mut loss_sum = 0.0;
    let mut max_gap = 0.0f64;

    for (i, event) in calibration.iter().enumerate() {
        let t = i as u64 + 1;
        let threshold = controller.threshold_at(&event.x)?;
        let outcome = losses::evaluate(
            config.loss,
            &event.scores,
            event.truth.as_deref(),
            threshold,
            score_bound,
        )?;
        let eta = next_eta(&controller, &event.x, config.eta1)?;
        let delta = controller.observe(&event.x, outcome.loss)?;

        loss_sum += outcome.loss;
        let cum_risk = loss_sum / t as f64;
        max_gap = max_gap.max((cum_risk - config.alpha).abs());

        let mut step_violations = Vec::new();
        let t2_bound = match (&controller, &mut larc_monitor) {
            (Controller::Larc(state), Some(monitor)) => {
                let delta = delta.as_ref().expect("larc update delta");
                step_violations =
                    monitor.record_step(&event.x, outcome.loss, delta, state)?;
                monitor.trajectory_bound(t)
            }
            (Controller::Arc(_), _) => {
                let monitor = &mut scalar_monitors[0];
                if let Some(v) = monitor.record_step(outcome.loss) {
                    step_violations.push(v);
                }
                monitor.trajectory_bound(t)
            }
            (Controller::Mondrian(m), _) => {
                let cell = m.partition.cell_of(&event.x)?;
                if let Some(mut v) = scalar_monitors[cell].record_step(outcome.loss) {
                    v.step = t;
                    step_violations.push(v);
                }
                scalar_trajectory_bound(score_bound, config.eta1, 1.0, t)
                    * (cell_count as f64).sqrt()
            }
            _ => unreachable!("monitor wiring matches controller"),
        };

        match config.invariant_mode {
            InvariantMode::Off => {}
            InvariantMode::Record => violations.extend(step_violations),
            InvariantMode::Enforce => {
                if let Some(v) = step_violations.into_iter().next() {
                    return Err(InvariantViolation(v).into());
                }
            }
        }

        rows.push(TrajectoryRow {
            t,
            eta,
            threshold_at_x: threshold,
            loss: outcome.loss,
            cum_risk,
            t2_bound,
            group: event.group,
        });
    }

    let steps = rows.len() as u64;
    let summary = Summary {
        schema: crate::config::SCHEMA_VERSION,
        method: config.method,
        alpha: config.alpha,
        steps,
        final_cum_risk: rows.last().map(|r| r.cum_risk).unwrap_or(0.0),
        max_abs_risk_gap: max_gap,
        trajectory_bound_final: rows.last().map(|r| r.t2_bound).unwrap_or(0.0),
        domain_radius,
        score_bound,
        invariant_mode: config.invariant_mode,
        violation_count: violations.len(),
        violations: violations.into_iter().take(50).collect(),
    };

    let state_file = StateFile {
        schema: crate::config::SCHEMA_VERSION,
        score_bound,
        domain_radius,
        config: config.clone(),
        state: match &controller {
            Controller::Arc(s) => MethodState::Arc(s.clone()),
            Controller::Mondrian(s) => MethodState::Mondrian(s.clone()),
            Controller::Larc(s) => MethodState::Larc(s.snapshot()),
        },
    };

    let holdout_eval = evaluate_holdout(
        &controller,
        &holdout,
        config.loss,
        score_bound,
        config.alpha,
        &weightings,
        PredictorChoice::Canonical,
    )?;

    Ok((
        RunOutput {
            config: config.clone(),
            rows,
            summary,
            holdout_eval,
            state_file,
            holdout_events: holdout,
        },
        controller,
    ))
}

fn next_eta(controller: &Controller, x: &[f64], eta1: f64) -> Result<f64> {
    Ok(match controller {
        Controller::Arc(state) => learning_rate(eta1, state.step + 1),
        Controller::Mondrian(state) => {
            let cell = state.partition.cell_of(x)?;
            learning_rate(eta1, state.cells[cell].step + 1)
        }
        Controller::Larc(state) => learning_rate(eta1, state.step() + 1),
    })
}

/// Which threshold the hold-out evaluation queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorChoice {
    /// The per-method calibrated object: time-averaged threshold for L-ARC
    /// (the carrier of the localized statistical guarantee), final threshold
    /// for the scalar methods.
    Canonical,
    /// The final threshold for every method (used by `compare`, where rows
    /// must share predictor semantics).
    Final,
}

pub fn predictor_for(
    controller: &Controller,
    choice: PredictorChoice,
) -> (&'static str, impl Fn(&[f64]) -> larc_core::Result<f64> + '_) {
    let averaged = matches!(
        (controller, choice),
        (Controller::Larc(_), PredictorChoice::Canonical)
    );
    let name = if averaged { "averaged" } else { "final" };
    (name, move |x: &[f64]| match controller {
        Controller::Larc(state) if averaged => state.averaged_threshold(x),
        other => other.threshold_at(x),
    })
}

pub fn evaluate_holdout(
    controller: &Controller,
    holdout: &[StreamEvent],
    loss: LossKind,
    score_bound: f64,
    alpha: f64,
    weightings: &[(String, WeightingFn)],
    choice: PredictorChoice,
) -> Result<HoldoutEval> {
    let (predictor_name, predictor) = predictor_for(controller, choice);
    if holdout.is_empty() {
        return Ok(HoldoutEval::empty(predictor_name));
    }

    // The averaged L-ARC predictor costs O(support) per query; evaluate it
    // once per event and replay the cached values into the risk metrics
    // (which consume events strictly in order).
    let thresholds: Vec<f64> = holdout
        .iter()
        .map(|event| predictor(&event.x))
        .collect::<larc_core::Result<_>>()?;
    let cached = |values: &'_ [f64]| {
        let mut it = values.to_vec().into_iter();
        move |_x: &[f64]| Ok(it.next().expect("one query per hold-out event"))
    };

    let mut loss_sum = 0.0;
    let mut size_sum = 0.0;
    for (event, threshold) in holdout.iter().zip(&thresholds) {
        let outcome = losses::evaluate(loss, &event.scores, event.truth.as_deref(), *threshold, score_bound)?;
        loss_sum += outcome.loss;
        size_sum += match loss {
            LossKind::Miscoverage => threshold.clamp(0.0, score_bound),
            _ => outcome.kept.len() as f64,
        };
    }

    let groups = group_conditional_risk(holdout, cached(&thresholds), loss, score_bound, None)?;
    let mut per_group = BTreeMap::new();
    let mut group_counts = BTreeMap::new();
    for (g, (risk, count)) in groups.risks {
        per_group.insert(g, risk);
        group_counts.insert(g, count);
    }

    let mut localized = Vec::new();
    for (id, w) in weightings {
        w.validate_on(holdout).map_err(anyhow::Error::from)?;
        let risk = localized_risk(holdout, cached(&thresholds), loss, score_bound, w)?;
        let gap = theorem1_gap(w, holdout, 1.0)?;
        localized.push(LocalizedEntry {
            w_id: id.clone(),
            risk,
            alpha_plus_gap: alpha + gap,
        });
    }

    Ok(HoldoutEval {
        predictor: predictor_name.into(),
        events: holdout.len(),
        final_risk: Some(loss_sum / holdout.len() as f64),
        per_group,
        group_counts,
        localized,
        mean_set_size: Some(size_sum / holdout.len() as f64),
    })
}

/// Restore a controller from a state file (for hold-out replay).
pub fn controller_from_state(state_file: &StateFile) -> Result<Controller> {
    Ok(match &state_file.state {
        MethodState::Arc(s) => Controller::Arc(s.clone()),
        MethodState::Mondrian(s) => Controller::Mondrian(s.clone()),
        MethodState::Larc(snapshot) => {
            let config = state_file.config.larc_config(state_file.score_bound)?;
            Controller::Larc(LarcState::from_snapshot(config, snapshot.clone())?)
        }
    })
}

/// Replay hold-out evaluation from serialized state: must reproduce the
/// original `holdout_eval.json` exactly.
pub fn replay(state_file: &StateFile, holdout: &[StreamEvent]) -> Result<HoldoutEval> {
    let controller = controller_from_state(state_file)?;
    let weightings = weighting_functions(&state_file.config)?;
    evaluate_holdout(
        &controller,
        holdout,
        state_file.config.loss,
        state_file.score_bound,
        state_file.config.alpha,
        &weightings,
        PredictorChoice::Canonical,
    )
}

// ---------------------------------------------------------------------------
// Method comparison
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub label: String,
    pub final_marginal_risk: f64,
    pub per_group: BTreeMap<u32, f64>,
    pub mean_set_size: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
}

pub fn method_label(config: &RunConfig) -> String {
    match config.method {
        Method::Arc => "arc".into(),
        Method::Mondrian => "mondrian".into(),
        Method::Larc => {
            let kernel = config.kernel.expect("validated larc config");
            format!(
                "larc(l={}, kappa={})",
                kernel.length_scale, kernel.amplitude
            )
        }
    }
}

/// Run every config over the shared stream and tabulate marginal risk,
/// per-group hold-out risk and mean set size. The stream sections must be
/// identical so the methods see the same data.
pub fn compare(configs: &[RunConfig]) -> Result<CompareReport> {
    if configs.is_empty() {
        bail!("compare needs at least one config");
    }
    for config in &configs[1..] {
        if config.stream != configs[0].stream {
            bail!("compare requires identical stream sections across configs");
        }
    }
    use rayon::prelude::*;
    let rows = configs
        .par_iter()
        .map(|config| {
            let (out, controller) = execute_full(config)?;
            let weightings = weighting_functions(config)?;
            // The table compares final thresholds across methods so that
            // equivalent states (e.g. ARC vs zero-amplitude L-ARC) produce
            // equal rows.
            let eval = evaluate_holdout(
                &controller,
                &out.holdout_events,
                config.loss,
                out.summary.score_bound,
                config.alpha,
                &weightings,
                PredictorChoice::Final,
            )?;
            Ok(CompareRow {
                label: method_label(config),
                final_marginal_risk: out.summary.final_cum_risk,
                per_group: eval.per_group,
                mean_set_size: eval.mean_set_size,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CompareReport { rows })
}

// ---------------------------------------------------------------------------
// Artifact writers
// ---------------------------------------------------------------------------

pub fn write_artifacts(out: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let mut trajectory = String::from("t,eta,threshold_at_x,loss,cum_risk,t2_bound,group\n");
    for row in &out.rows {
        trajectory.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.t, row.eta, row.threshold_at_x, row.loss, row.cum_risk, row.t2_bound, row.group
        ));
    }
    std::fs::write(dir.join("trajectory.csv"), trajectory)?;

    write_json(&dir.join("summary.json"), &out.summary)?;
    write_json(&dir.join("state.json"), &out.state_file)?;
    write_json(&dir.join("holdout_eval.json"), &out.holdout_eval)?;

    let file = std::fs::File::create(dir.join("holdout_events.jsonl"))?;
    stream::write_events_jsonl(std::io::BufWriter::new(file), &out.holdout_events)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn compare_csv(report: &CompareReport) -> String {
    let mut groups: Vec<u32> = report
        .rows
        .iter()
        .flat_map(|r| r.per_group.keys().copied())
        .collect();
    groups.sort_unstable();
    groups.dedup();
    let mut out = String::from("method,final_marginal_risk");
    for g in &groups {
        out.push_str(&format!(",group_{g}_risk"));
    }
    out.push_str(",mean_set_size\n");
    for row in &report.rows {
        out.push_str(&format!("{},{}", row.label, row.final_marginal_risk));
        for g in &groups {
            match row.per_group.get(g) {
                Some(risk) => out.push_str(&format!(",{risk}")),
                None => out.push(','),
            }
        }
        match row.mean_set_size {
            Some(size) => out.push_str(&format!(",{size}\n")),
            None => out.push_str(",\n"),
        }
    }
    out
}
