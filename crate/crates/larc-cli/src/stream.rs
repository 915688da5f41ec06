//! Data sources for the harness: seeded synthetic subpopulation streams,
//! adversarial streams, and a CSV time-series path with a moving-average
//! forecaster.
//!
//! All randomness flows through ChaCha12 seeded from the config's stream
//! seed, so a stream is reproducible bit-for-bit across platforms. Every
//! stream publishes the score bound `S_max` its events respect.

use std::path::Path;

use anyhow::{bail, Context, Result};
use larc_core::event::{Split, StreamEvent};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

/// A materialized event sequence plus the score bound it respects.
#[derive(Debug, Clone)]
pub struct Stream {
    pub events: Vec<StreamEvent>,
    pub score_bound: f64,
}

impl Stream {
    pub fn calibration(&self) -> impl Iterator<Item = &StreamEvent> {
        self.events.iter().filter(|e| e.split == Split::Calibration)
    }

    pub fn holdout(&self) -> impl Iterator<Item = &StreamEvent> {
        self.events.iter().filter(|e| e.split == Split::Holdout)
    }

    /// Largest covariate norm over the calibration events.
    pub fn max_covariate_norm(&self) -> f64 {
        self.calibration()
            .map(|e| e.x.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Synthetic i.i.d. subpopulation streams
// ---------------------------------------------------------------------------

/// Per-candidate truth-score law of one cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScoreDistribution {
    Uniform { lo: f64, hi: f64 },
    Beta { a: f64, b: f64 },
    TruncatedNormal { mean: f64, std: f64, lo: f64, hi: f64 },
}

impl ScoreDistribution {
    /// Supremum of the support; feeds the published `S_max`.
    pub fn upper_bound(&self) -> f64 {
        match self {
            ScoreDistribution::Uniform { hi, .. } => *hi,
            ScoreDistribution::Beta { .. } => 1.0,
            ScoreDistribution::TruncatedNormal { hi, .. } => *hi,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScoreDistribution::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && hi > lo) {
                    bail!("uniform score law needs 0 <= lo < hi, got [{lo}, {hi}]");
                }
            }
            ScoreDistribution::Beta { a, b } => {
                if !(a.is_finite() && b.is_finite() && *a > 0.0 && *b > 0.0) {
                    bail!("beta score law needs positive shape parameters");
                }
            }
            ScoreDistribution::TruncatedNormal { mean, std, lo, hi } => {
                if !(mean.is_finite() && std.is_finite() && *std > 0.0) {
                    bail!("truncated normal needs a positive finite std");
                }
                if !(*lo >= 0.0 && hi > lo) {
                    bail!("truncated normal support needs 0 <= lo < hi");
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha12Rng) -> f64 {
        match self {
            ScoreDistribution::Uniform { lo, hi } => rng.random_range(*lo..*hi),
            ScoreDistribution::Beta { a, b } => {
                Beta::new(*a, *b).expect("validated shapes").sample(rng)
            }
            ScoreDistribution::TruncatedNormal { mean, std, lo, hi } => {
                let normal = Normal::new(*mean, *std).expect("validated std");
                loop {
                    let v = normal.sample(rng);
                    if v >= *lo && v <= *hi {
                        return v;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub center: Vec<f64>,
    pub covariate_spread: f64,
    pub score_distribution: ScoreDistribution,
}

/// An i.i.d. mixture stream: cluster drawn from `mix`, covariate isotropic
/// Gaussian around the cluster center, truth score from the cluster's law.
/// The cluster index doubles as the evaluation group tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub clusters: Vec<ClusterSpec>,
    pub mix: Vec<f64>,
    pub horizon: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.clusters.is_empty() {
            bail!("synthetic stream needs at least one cluster");
        }
        if self.mix.len() != self.clusters.len() {
            bail!(
                "mix has {} entries for {} clusters",
                self.mix.len(),
                self.clusters.len()
            );
        }
        if self.mix.iter().any(|p| !p.is_finite() || *p < 0.0) {
            bail!("mix probabilities must be non-negative");
        }
        let total: f64 = self.mix.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            bail!("mix must sum to 1, got {total}");
        }
        let dim = self.clusters[0].center.len();
        for cluster in &self.clusters {
            if cluster.center.len() != dim {
                bail!("cluster centers must share one dimension");
            }
            if !(cluster.covariate_spread.is_finite() && cluster.covariate_spread >= 0.0) {
                bail!("covariate spread must be non-negative");
            }
            cluster.score_distribution.validate()?;
        }
        Ok(())
    }

    pub fn score_bound(&self) -> f64 {
        self.clusters
            .iter()
            .map(|c| c.score_distribution.upper_bound())
            .fold(0.0, f64::max)
    }
}

/// Generate `spec.horizon` calibration events, then `holdout` hold-out events
/// drawn from the same law by continuing the same generator state.
pub fn synthetic_stream_split(spec: &SyntheticSpec, holdout: usize) -> Result<Stream> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let standard = Normal::new(0.0, 1.0).expect("unit normal");
    let mut events = Vec::with_capacity(spec.horizon + holdout);
    for t in 0..(spec.horizon + holdout) {
        let u: f64 = rng.random_range(0.0..1.0);
        let mut cluster_idx = spec.clusters.len() - 1;
        let mut acc = 0.0;
        for (i, p) in spec.mix.iter().enumerate() {
            acc += p;
            if u < acc {
                cluster_idx = i;
                break;
            }
        }
        let cluster = &spec.clusters[cluster_idx];
        let x: Vec<f64> = cluster
            .center
            .iter()
            .map(|c| c + cluster.covariate_spread * standard.sample(&mut rng))
            .collect();
        let score = cluster.score_distribution.sample(&mut rng);
        events.push(StreamEvent {
            t: t as u64 + 1,
            x,
            scores: vec![score],
            truth: None,
            group: cluster_idx as u32,
            split: if t < spec.horizon {
                Split::Calibration
            } else {
                Split::Holdout
            },
        });
    }
    Ok(Stream {
        events,
        score_bound: spec.score_bound(),
    })
}

/// Calibration-only synthetic stream.
pub fn synthetic_stream(spec: &SyntheticSpec) -> Result<Stream> {
    synthetic_stream_split(spec, 0)
}

// ---------------------------------------------------------------------------
// Adversarial streams
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialKind {
    /// The truth-score law drifts piecewise: the horizon is cut into 10
    /// regimes, each drawing uniform scores from a freshly placed window.
    ShiftingQuantile,
    /// Scores alternate deterministically between near-zero and near-S_max.
    Alternating,
}

pub fn adversarial_stream(kind: AdversarialKind, horizon: usize, seed: u64) -> Stream {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut events = Vec::with_capacity(horizon);
    match kind {
        AdversarialKind::ShiftingQuantile => {
            let regimes = 10usize;
            let regime_len = (horizon / regimes).max(1);
            let windows: Vec<(f64, f64)> = (0..regimes)
                .map(|_| {
                    let lo: f64 = rng.random_range(0.0..0.75);
                    let center: f64 = rng.random_range(-2.0..2.0);
                    (lo, center)
                })
                .collect();
            for t in 0..horizon {
                let regime = (t / regime_len).min(regimes - 1);
                let (lo, center) = windows[regime];
                let score = rng.random_range(lo..(lo + 0.25));
                let x = vec![center + rng.random_range(-0.3..0.3)];
                events.push(StreamEvent {
                    t: t as u64 + 1,
                    x,
                    scores: vec![score],
                    truth: None,
                    group: regime as u32,
                    split: Split::Calibration,
                });
            }
        }
        AdversarialKind::Alternating => {
            for t in 0..horizon {
                let low = t % 2 == 0;
                events.push(StreamEvent {
                    t: t as u64 + 1,
                    x: vec![if low { -1.0 } else { 1.0 }],
                    scores: vec![if low { 0.01 } else { 0.99 }],
                    truth: None,
                    group: (t % 2) as u32,
                    split: Split::Calibration,
                });
            }
        }
    }
    Stream {
        events,
        score_bound: 1.0,
    }
}

// ---------------------------------------------------------------------------
// CSV time series
// ---------------------------------------------------------------------------

/// Windowing of the CSV forecaster. With the defaults, the forecast at row
/// `i` is the mean of rows `i-48 ..= i-25` (the 24 hours recorded between 48
/// and 25 steps earlier) and the covariate is the 7-vector of daily means
/// over the previous 7 days, most recent day first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub window_short: usize,
    pub window_long: usize,
    pub daily_feature_days: usize,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            window_short: 24,
            window_long: 48,
            daily_feature_days: 7,
        }
    }
}

impl CsvOptions {
    /// Rows required before the first emitted event.
    pub fn warmup(&self) -> usize {
        self.window_long + 24 * self.daily_feature_days
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_short == 0 || self.window_long <= self.window_short {
            bail!(
                "need 0 < window_short < window_long, got {} and {}",
                self.window_short,
                self.window_long
            );
        }
        if self.daily_feature_days == 0 {
            bail!("daily_feature_days must be at least 1");
        }
        Ok(())
    }
}

/// Ingest a `t,y` series (hourly values normalized to [0, 1]) and emit one
/// event per post-warm-up row: forecast by trailing moving average,
/// truth score `|forecast − y|`, daily-mean feature vector, weekday/weekend
/// group tag from `t`, and an even/odd calibration/hold-out split.
pub fn csv_timeseries(path: &Path, options: CsvOptions) -> Result<Stream> {
    options.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    {
        let headers = reader.headers().context("reading CSV header")?;
        if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "y" {
            bail!("expected CSV header 't,y', got {headers:?}");
        }
    }

    let mut times: Vec<u64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2; // 1-based, after the header line
        let record = record.with_context(|| format!("row {row}: malformed CSV"))?;
        let t: u64 = record[0]
            .trim()
            .parse()
            .with_context(|| format!("row {row}: non-integer t {:?}", &record[0]))?;
        let y: f64 = record[1]
            .trim()
            .parse()
            .with_context(|| format!("row {row}: non-numeric y {:?}", &record[1]))?;
        if !y.is_finite() || !(0.0..=1.0).contains(&y) {
            bail!("row {row}: y = {y} outside [0, 1]");
        }
        if let Some(prev) = times.last() {
            if t <= *prev {
                bail!("row {row}: t must be strictly increasing");
            }
        }
        times.push(t);
        values.push(y);
    }

    let warmup = options.warmup();
    if values.len() <= warmup {
        bail!(
            "insufficient warm-up: need more than {warmup} rows, got {} (first emitted event would be row {})",
            values.len(),
            warmup + 2
        );
    }

    let mut events = Vec::with_capacity(values.len() - warmup);
    for (emitted, i) in (warmup..values.len()).enumerate() {
        let window = &values[i - options.window_long..=i - options.window_short - 1];
        let forecast = window.iter().sum::<f64>() / window.len() as f64;
        let score = (forecast - values[i]).abs();
        let features: Vec<f64> = (1..=options.daily_feature_days)
            .map(|d| {
                let day = &values[i - 24 * d..i - 24 * (d - 1)];
                day.iter().sum::<f64>() / day.len() as f64
            })
            .collect();
        let day_of_week = (times[i] / 24) % 7;
        events.push(StreamEvent {
            t: times[i],
            x: features,
            scores: vec![score],
            truth: None,
            group: if day_of_week >= 5 { 1 } else { 0 },
            split: if emitted % 2 == 0 {
                Split::Calibration
            } else {
                Split::Holdout
            },
        });
    }
    Ok(Stream {
        events,
        score_bound: 1.0,
    })
}

// ---------------------------------------------------------------------------
// Bundled seasonal series generator
// ---------------------------------------------------------------------------

/// Synthetic hourly demand series with weekday/weekend structure: weekdays
/// sit at a higher level with small noise, weekends at a lower level with
/// much larger noise, plus a mild daily curve and slow regime drift. The
/// result is a series whose forecast errors are strongly day-class dependent,
/// which is what conditional-coverage experiments need.
pub fn seasonal_series(hours: usize, seed: u64) -> Vec<(u64, f64)> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut shift = 0.0;
    let mut series = Vec::with_capacity(hours);
    for t in 0..hours {
        if t % 400 == 0 {
            shift = rng.random_range(-0.04..0.04);
        }
        let day_of_week = (t / 24) % 7;
        let weekend = day_of_week >= 5;
        let level = if weekend { 0.30 } else { 0.55 };
        let hour = (t % 24) as f64;
        let daily = 0.02 * (2.0 * std::f64::consts::PI * (hour - 6.0) / 24.0).sin();
        let sd = if weekend { 0.16 } else { 0.03 };
        let y = (level + daily + shift + sd * noise.sample(&mut rng)).clamp(0.0, 1.0);
        series.push((t as u64, y));
    }
    series
}

/// Write a `t,y` series as CSV.
pub fn write_series_csv(path: &Path, series: &[(u64, f64)]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    writer.write_record(["t", "y"])?;
    for (t, y) in series {
        writer.write_record([t.to_string(), y.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Event dump wire format (JSON lines)
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventWire {
    t: u64,
    x: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scores: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth: Option<Vec<usize>>,
    group: u32,
    split: Split,
}

/// One event per line; single-score events dump a scalar `score` field,
/// multi-candidate events a `scores` array.
pub fn write_events_jsonl<W: std::io::Write>(mut out: W, events: &[StreamEvent]) -> Result<()> {
    for ev in events {
        let wire = EventWire {
            t: ev.t,
            x: ev.x.clone(),
            score: (ev.scores.len() == 1 && ev.truth.is_none()).then(|| ev.scores[0]),
            scores: (ev.scores.len() != 1 || ev.truth.is_some()).then(|| ev.scores.clone()),
            truth: ev.truth.clone(),
            group: ev.group,
            split: ev.split,
        };
        serde_json::to_writer(&mut out, &wire)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_events_jsonl<R: std::io::BufRead>(reader: R) -> Result<Vec<StreamEvent>> {
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: EventWire =
            serde_json::from_str(&line).with_context(|| format!("event line {}", i + 1))?;
        let scores = match (wire.score, wire.scores) {
            (Some(s), None) => vec![s],
            (None, Some(s)) => s,
            _ => bail!("event line {}: exactly one of score/scores expected", i + 1),
        };
        events.push(StreamEvent {
            t: wire.t,
            x: wire.x,
            scores,
            truth: wire.truth,
            group: wire.group,
            split: wire.split,
        });
    }
    Ok(events)
}
