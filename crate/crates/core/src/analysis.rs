//! Theorem-level predictions and their comparison with Monte-Carlo runs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::limsup::{estimate_measure, union_bound, Estimate, SamplerConfig, TruncationWindow};
use crate::psi::{
    classify_critical_sum, slow_decrease_scan, PsiSpec, SeriesClass, SlowDecreaseVerdict,
};

/// Parameters of Dickinson's dimension formula for `psi(k) = k^-tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DickinsonParams {
    pub m: u32,
    pub n: u32,
    pub tau: f64,
}

impl DickinsonParams {
    pub fn new(m: u32, n: u32, tau: f64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(domain(format!("m and n must be positive, got m = {m}, n = {n}")));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(domain(format!("tau must be a positive finite real, got {tau}")));
        }
        Ok(Self { m, n, tau })
    }
}

/// `(m-1) n + m / (tau+1)` for `tau > m/n - 1`, else `m n`.
pub fn dickinson_dimension(p: &DickinsonParams) -> f64 {
    let (m, n) = (p.m as f64, p.n as f64);
    if p.tau > m / n - 1.0 {
        (m - 1.0) * n + m / (p.tau + 1.0)
    } else {
        m * n
    }
}

/// The measure the zero-one law predicts for `V(psi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    MeasureZero,
    FullMeasure,
    Undetermined,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Range scanned when certifying slow decrease for a prediction.
pub const PREDICTION_SCAN_MAX: u64 = 10_000;

pub fn predict_branch(n: u32, spec: &PsiSpec) -> Result<Branch> {
    Ok(match classify_critical_sum(n, spec)? {
        SeriesClass::Converges => Branch::MeasureZero,
        SeriesClass::Diverges => {
            let cert = slow_decrease_scan(spec, 1.0 / n as f64, PREDICTION_SCAN_MAX)?;
            if cert.verdict == SlowDecreaseVerdict::SlowlyDecreasing {
                Branch::FullMeasure
            } else {
                Branch::Undetermined
            }
        }
        SeriesClass::Unknown => Branch::Undetermined,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Width of the agreement band, in combined standard errors.
pub const AGREEMENT_SIGMAS: f64 = 3.0;
/// Size of a deviation, in combined standard errors, that contradicts a prediction.
pub const CONTRADICTION_SIGMAS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub samples: u64,
    pub seed: u64,
    pub threads: Option<usize>,
    /// The last estimate of a full-measure run must reach this value.
    pub full_measure_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub window: TruncationWindow,
    pub estimate: Estimate,
    pub union_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremParams {
    pub n: u32,
    pub psi: String,
    pub windows: Vec<TruncationWindow>,
    pub samples: u64,
    pub seed: u64,
    pub full_measure_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub params: TheoremParams,
    pub predicted_branch: Branch,
    pub observed: Vec<Observation>,
    pub verdict: Verdict,
}

impl TheoremReport {
    /// Same report with the timings zeroed.
    pub fn without_timing(mut self) -> Self {
        for o in &mut self.observed {
            o.estimate = o.estimate.without_timing();
        }
        self
    }

    /// The estimate schedule as CSV with a header row.
    pub fn schedule_csv(&self) -> String {
        let mut out = String::from("N,Q,value,std_error,union_bound,samples,seed\n");
        for o in &self.observed {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                o.window.lo(),
                o.window.hi(),
                o.estimate.value,
                o.estimate.std_error,
                o.union_bound,
                o.estimate.samples,
                o.estimate.seed
            ));
        }
        out
    }
}

fn band(a: &Estimate, b: &Estimate) -> f64 {
    (a.std_error.powi(2) + b.std_error.powi(2)).sqrt()
}

/// Applies the decision rule to a finished schedule.
///
/// * `MeasureZero`: consistent when every estimate is within `3 sigma` of
///   `min(1, union bound)` and successive estimates (growing `N`) never rise
///   by more than `3` combined sigmas; inconsistent on a `5 sigma` breach of
///   either.
/// * `FullMeasure`: consistent when successive estimates (growing `Q`) never
///   fall by more than `3` combined sigmas and the last estimate reaches the
///   threshold; inconsistent on a `5 sigma` fall.
/// * `Undetermined`: always inconclusive.
pub fn decide(branch: Branch, observed: &[Observation], threshold: f64) -> Verdict {
    let pairs = || observed.windows(2).map(|w| (&w[0].estimate, &w[1].estimate));
    match branch {
        Branch::Undetermined => Verdict::Inconclusive,
        Branch::MeasureZero => {
            let excess = |o: &Observation| (o.estimate.value - o.union_bound.min(1.0)) / o.estimate.std_error.max(f64::MIN_POSITIVE);
            let rise = |(a, b): (&Estimate, &Estimate)| (b.value - a.value) / band(a, b).max(f64::MIN_POSITIVE);
            let worst_excess = observed.iter().map(excess).fold(f64::NEG_INFINITY, f64::max);
            let worst_rise = pairs().map(rise).fold(f64::NEG_INFINITY, f64::max);
            let worst = worst_excess.max(worst_rise);
            if worst > CONTRADICTION_SIGMAS {
                Verdict::Inconsistent
            } else if worst <= AGREEMENT_SIGMAS {
                Verdict::Consistent
            } else {
                Verdict::Inconclusive
            }
        }
        Branch::FullMeasure => {
            let fall = |(a, b): (&Estimate, &Estimate)| (a.value - b.value) / band(a, b).max(f64::MIN_POSITIVE);
            let worst_fall = pairs().map(fall).fold(f64::NEG_INFINITY, f64::max);
            let last = observed.last().map_or(0.0, |o| o.estimate.value);
            if worst_fall > CONTRADICTION_SIGMAS {
                Verdict::Inconsistent
            } else if worst_fall <= AGREEMENT_SIGMAS && last >= threshold {
                Verdict::Consistent
            } else {
                Verdict::Inconclusive
            }
        }
    }
}

/// Estimates `|V_{N,Q}(psi)|` along a schedule of windows and compares the
/// trend with the predicted branch.
///
/// All windows share one seed, so every estimate uses the same points and
/// nested windows give exactly monotone hit counts.
pub fn run_theorem_experiment(
    n: u32,
    spec: &PsiSpec,
    windows: &[TruncationWindow],
    cfg: &ExperimentConfig,
) -> Result<TheoremReport> {
    if windows.is_empty() {
        return Err(domain("window schedule must not be empty"));
    }
    for pair in windows.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b.lo() < a.lo() || b.hi() < a.hi() || a == b {
            return Err(domain(format!(
                "window schedule must increase: [{}, {}] is followed by [{}, {}]",
                a.lo(),
                a.hi(),
                b.lo(),
                b.hi()
            )));
        }
    }
    let predicted_branch = predict_branch(n, spec)?;
    let sampler = SamplerConfig { samples: cfg.samples, seed: cfg.seed, threads: cfg.threads };
    let observed = windows
        .iter()
        .map(|w| {
            Ok(Observation {
                window: *w,
                estimate: estimate_measure(w, spec, n as usize, &sampler)?,
                union_bound: union_bound(w, spec, n as usize)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let verdict = decide(predicted_branch, &observed, cfg.full_measure_threshold);
    Ok(TheoremReport {
        params: TheoremParams {
            n,
            psi: spec.to_string(),
            windows: windows.to_vec(),
            samples: cfg.samples,
            seed: cfg.seed,
            full_measure_threshold: cfg.full_measure_threshold,
        },
        predicted_branch,
        observed,
        verdict,
    })
}
