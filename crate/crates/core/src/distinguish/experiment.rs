use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_plan, decide_from_count, PlanMode, StatisticFamily, Verdict};
use crate::bitstr::{sample_from_edit_ball, BitString};
use crate::channel::{count_matching_traces, ChannelParam};
use crate::error::{Error, Result};
use crate::seed;

/// Attempts at drawing `y != x` before a trial gives up.
const MAX_RESAMPLES: u64 = 1000;
const DEFAULT_BUDGET: usize = 256;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    #[default]
    Windows,
    Exhaustive,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub q: ChannelParam,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    /// Fixed number of traces per test instead of the Hoeffding size.
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n_override: Option<u64>,
    #[serde(default)]
    pub family: FamilyKind,
    /// Random tuples added by the sampled family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.k == 0 {
            return bad("k must be positive; k = 0 only yields y = x".into());
        }
        if self.k > self.n {
            return bad(format!("k = {} exceeds n = {}", self.k, self.n));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.n_override == Some(0) {
            return bad("N must be positive".into());
        }
        Ok(())
    }

    fn family_for(&self, trial_seed: u64) -> StatisticFamily {
        match self.family {
            FamilyKind::Windows => StatisticFamily::Windows,
            FamilyKind::Exhaustive => StatisticFamily::Exhaustive,
            FamilyKind::Sampled => StatisticFamily::Sampled {
                budget: self.budget.unwrap_or(DEFAULT_BUDGET),
                seed: seed::derive(trial_seed, &[3]),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub x: BitString,
    pub y: BitString,
    pub t0: usize,
    pub mode: PlanMode,
    pub gap: f64,
    #[serde(rename = "N")]
    pub n_samples: u64,
    pub verdict_on_x: Verdict,
    pub verdict_on_y: Verdict,
}

impl TrialRecord {
    pub fn is_error(&self) -> bool {
        self.verdict_on_x != Verdict::X || self.verdict_on_y != Verdict::Y
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub trials: usize,
    /// Trials in which either test picked the wrong string.
    pub errors: usize,
    pub error_rate: f64,
    pub errors_from_x: usize,
    pub errors_from_y: usize,
    pub mean_gap: f64,
    pub min_gap: f64,
    #[serde(rename = "mean_N")]
    pub mean_samples: f64,
    #[serde(rename = "max_N")]
    pub max_samples: u64,
    pub main_mode_trials: usize,
    /// Kept out of the JSON so output depends only on the inputs.
    #[serde(skip)]
    pub wall_time_secs: f64,
    pub records: Vec<TrialRecord>,
}

/// Equality of everything except the wall time.
impl PartialEq for ExperimentResult {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.records == other.records
    }
}

/// Draws `x` uniformly and `y` from the edit ball of `x`, redrawing while
/// `y = x`.
pub fn sample_pair(n: usize, k: usize, trial_seed: u64) -> Result<(BitString, BitString)> {
    for attempt in 0..MAX_RESAMPLES {
        let mut rng = seed::derived_rng(trial_seed, &[0, attempt]);
        let x = BitString::random(n, &mut rng);
        let y = sample_from_edit_ball(&x, k, rng.random())?;
        if x != y {
            return Ok((x, y));
        }
    }
    Err(Error::DegeneratePair)
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialRecord> {
    let trial_seed = seed::derive(cfg.seed, &[trial as u64]);
    let (x, y) = sample_pair(cfg.n, cfg.k, trial_seed)?;
    let plan = build_plan(&x, &y, cfg.k, &cfg.q, cfg.delta, &cfg.family_for(trial_seed))?;
    let n = cfg.n_override.unwrap_or(plan.n_samples);
    let hits_x = count_matching_traces(&x, &cfg.q, seed::derive(trial_seed, &[1]), n, &plan.chosen);
    let hits_y = count_matching_traces(&y, &cfg.q, seed::derive(trial_seed, &[2]), n, &plan.chosen);
    Ok(TrialRecord {
        trial,
        t0: plan.t0,
        mode: plan.mode,
        gap: plan.gap,
        n_samples: n,
        verdict_on_x: decide_from_count(hits_x, n, &plan)?,
        verdict_on_y: decide_from_count(hits_y, n, &plan)?,
        x,
        y,
    })
}

/// Runs `trials` independent tests. Each trial draws a pair, builds a
/// plan, and tests traces of `x` and, separately, traces of `y`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let start = Instant::now();
    let records = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect::<Result<Vec<_>>>()?;
    let trials = records.len();
    let errors = records.iter().filter(|r| r.is_error()).count();
    let gaps = records.iter().map(|r| r.gap);
    Ok(ExperimentResult {
        config: cfg.clone(),
        trials,
        errors,
        error_rate: errors as f64 / trials as f64,
        errors_from_x: records.iter().filter(|r| r.verdict_on_x != Verdict::X).count(),
        errors_from_y: records.iter().filter(|r| r.verdict_on_y != Verdict::Y).count(),
        mean_gap: gaps.clone().sum::<f64>() / trials as f64,
        min_gap: gaps.fold(f64::INFINITY, f64::min),
        mean_samples: records.iter().map(|r| r.n_samples as f64).sum::<f64>() / trials as f64,
        max_samples: records.iter().map(|r| r.n_samples).max().unwrap_or(0),
        main_mode_trials: records.iter().filter(|r| r.mode == PlanMode::Main).count(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        records,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub q: Vec<ChannelParam>,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    #[serde(rename = "N", default)]
    pub n_override: Option<u64>,
    #[serde(default)]
    pub family: FamilyKind,
    #[serde(default)]
    pub budget: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub k: usize,
    pub q: String,
    /// Mean plan gap over the trials.
    pub gap: f64,
    /// Mean number of traces per test, rounded up.
    #[serde(rename = "N")]
    pub n_samples: u64,
    pub error_rate: f64,
    pub seed: u64,
}

/// Least-squares slope of `ln N` against `ln n` for one `(k, q)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub k: usize,
    pub q: String,
    pub points: usize,
    pub slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub slopes: Vec<SlopeFit>,
}

fn slope(points: &[(f64, f64)]) -> Option<f64> {
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (points.len() >= 2 && sxx > 0.0).then(|| sxy / sxx)
}

/// Runs [`run_experiment`] on every `(n, k, q)` in the grid, all with the
/// same master seed.
pub fn scaling_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.n.is_empty() || cfg.k.is_empty() || cfg.q.is_empty() {
        return Err(Error::InvalidConfig("sweep ranges must be non-empty".into()));
    }
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for &k in &cfg.k {
        for q in &cfg.q {
            let mut pts = Vec::new();
            for &n in &cfg.n {
                let r = run_experiment(&ExperimentConfig {
                    n,
                    k,
                    q: q.clone(),
                    delta: cfg.delta,
                    trials: cfg.trials,
                    seed: cfg.seed,
                    n_override: cfg.n_override,
                    family: cfg.family,
                    budget: cfg.budget,
                })?;
                pts.push(((n as f64).ln(), r.mean_samples.ln()));
                rows.push(SweepRow {
                    n,
                    k,
                    q: q.to_string(),
                    gap: r.mean_gap,
                    n_samples: r.mean_samples.ceil() as u64,
                    error_rate: r.error_rate,
                    seed: cfg.seed,
                });
            }
            slopes.push(SlopeFit {
                k,
                q: q.to_string(),
                points: pts.len(),
                slope: slope(&pts),
            });
        }
    }
    Ok(SweepResult { rows, slopes })
}

/// CSV with header `n,k,q,gap,N,error_rate,seed`.
pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
