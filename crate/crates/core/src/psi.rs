//! Error functions `psi`, the slowly-decreasing property and the critical sum
//! `sum_k k^(n-2) psi(k)`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, range, KgError, Result};
use crate::numeric::CompensatedSum;

/// Parametric or tabulated shape of an error function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PsiFamily {
    /// `c * k^-tau`
    Power { c: f64, tau: f64 },
    /// `c / (k^s * ln(k+1)^p)`
    LogPower { c: f64, s: f64, p: f64 },
    /// Explicit values, `values[0] = psi(1)`.
    Tabulated { values: Vec<f64> },
}

/// A positive, non-increasing error function `psi: N -> (0, inf)`.
///
/// Construct through [`PsiSpec::power`], [`PsiSpec::log_power`] or
/// [`PsiSpec::tabulated`]; each checks the invariants of its family.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PsiSpec {
    family: PsiFamily,
}

fn positive_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must be a positive finite real, got {v}")))
    }
}

impl PsiSpec {
    pub fn power(c: f64, tau: f64) -> Result<Self> {
        positive_finite("c", c)?;
        positive_finite("tau", tau)?;
        Ok(Self { family: PsiFamily::Power { c, tau } })
    }

    /// `p` must be non-negative; negative `p` breaks monotonicity for small `k`.
    pub fn log_power(c: f64, s: f64, p: f64) -> Result<Self> {
        positive_finite("c", c)?;
        positive_finite("s", s)?;
        if !(p.is_finite() && p >= 0.0) {
            return Err(domain(format!("p must be a non-negative finite real, got {p}")));
        }
        Ok(Self { family: PsiFamily::LogPower { c, s, p } })
    }

    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(domain("tabulated psi needs at least one value"));
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(format!("psi({}) = {v} is not a positive finite real", i + 1)));
            }
            if i > 0 && v > values[i - 1] {
                return Err(domain(format!(
                    "tabulated psi must be non-increasing: psi({}) = {} < psi({}) = {v}",
                    i,
                    values[i - 1],
                    i + 1
                )));
            }
        }
        Ok(Self { family: PsiFamily::Tabulated { values } })
    }

    /// Reads one positive real per line (blank lines and `#` comments skipped).
    pub fn from_table_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| domain(format!("cannot read psi table {}: {e}", path.display())))?;
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| {
                domain(format!("{}:{}: not a real number: {line:?}", path.display(), lineno + 1))
            })?;
            values.push(v);
        }
        Self::tabulated(values)
    }

    pub fn family(&self) -> &PsiFamily {
        &self.family
    }

    /// Largest valid argument, `None` for the unbounded parametric families.
    pub fn max_k(&self) -> Option<u64> {
        match &self.family {
            PsiFamily::Tabulated { values } => Some(values.len() as u64),
            _ => None,
        }
    }

    /// `psi(k)` for `k >= 1`.
    pub fn eval(&self, k: u64) -> Result<f64> {
        if k == 0 {
            return Err(domain("psi is defined for k >= 1, got k = 0"));
        }
        let kf = k as f64;
        match &self.family {
            PsiFamily::Power { c, tau } => Ok(c * kf.powf(-tau)),
            PsiFamily::LogPower { c, s, p } => Ok(c / (kf.powf(*s) * (kf + 1.0).ln().powf(*p))),
            PsiFamily::Tabulated { values } => values.get(k as usize - 1).copied().ok_or_else(|| {
                domain(format!("k = {k} is outside the psi table (length {})", values.len()))
            }),
        }
    }

    /// The same function multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        positive_finite("scale factor", factor)?;
        Ok(match &self.family {
            PsiFamily::Power { c, tau } => Self::power(c * factor, *tau)?,
            PsiFamily::LogPower { c, s, p } => Self::log_power(c * factor, *s, *p)?,
            PsiFamily::Tabulated { values } => {
                Self::tabulated(values.iter().map(|v| v * factor).collect())?
            }
        })
    }

    /// `psi(lo), ..., psi(hi)` in one vector.
    pub fn table(&self, lo: u64, hi: u64) -> Result<Vec<f64>> {
        (lo..=hi).map(|k| self.eval(k)).collect()
    }
}

impl fmt::Display for PsiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            PsiFamily::Power { c, tau } => write!(f, "pow:c={c},tau={tau}"),
            PsiFamily::LogPower { c, s, p } => write!(f, "logpow:c={c},s={s},p={p}"),
            PsiFamily::Tabulated { values } => write!(f, "table[{}]", values.len()),
        }
    }
}

fn parse_params(body: &str, names: &[&str]) -> Result<Vec<f64>> {
    let mut out = vec![None; names.len()];
    for part in body.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| domain(format!("expected key=value, got {part:?}")))?;
        let idx = names
            .iter()
            .position(|n| *n == key.trim())
            .ok_or_else(|| domain(format!("unknown psi parameter {key:?}")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| domain(format!("parameter {key} is not a real number: {value:?}")))?;
        out[idx] = Some(v);
    }
    out.into_iter()
        .zip(names)
        .map(|(v, n)| v.ok_or_else(|| domain(format!("missing psi parameter {n}"))))
        .collect()
}

impl FromStr for PsiSpec {
    type Err = KgError;

    /// `pow:c=<real>,tau=<real>`, `logpow:c=<real>,s=<real>,p=<real>` or
    /// `table:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, body) = s
            .split_once(':')
            .ok_or_else(|| domain(format!("psi must look like pow:..., logpow:... or table:<path>, got {s:?}")))?;
        match kind.trim() {
            "pow" => {
                let v = parse_params(body, &["c", "tau"])?;
                Self::power(v[0], v[1])
            }
            "logpow" => {
                let v = parse_params(body, &["c", "s", "p"])?;
                Self::log_power(v[0], v[1], v[2])
            }
            "table" => Self::from_table_file(body.trim()),
            other => Err(domain(format!("unknown psi family {other:?}"))),
        }
    }
}

/// Outcome of a finite slow-decrease scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlowDecreaseVerdict {
    SlowlyDecreasing,
    NotSlowlyDecreasing,
    Inconclusive,
}

/// Evidence for `psi(ck) <= K psi(k)` at one fixed `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowDecreaseCertificate {
    pub c: f64,
    /// `max psi(ceil(ck)) / psi(k)` over the scanned range.
    pub empirical_k: f64,
    /// Closed-form bound valid for every `k`, when the family admits one.
    pub analytic_k: Option<f64>,
    pub verdict: SlowDecreaseVerdict,
    /// Last `k` actually scanned (may be below the request for tables).
    pub k_scanned: u64,
}

impl SlowDecreaseCertificate {
    /// The constant to use downstream: the analytic bound when present,
    /// otherwise the scanned maximum.
    pub fn constant(&self) -> f64 {
        self.analytic_k.unwrap_or(self.empirical_k)
    }
}

/// Growth factor across the last dyadic blocks that flags a ratio sequence
/// as unbounded.
pub const DEFAULT_GROWTH_THRESHOLD: f64 = 2.0;

/// `ceil(c * k)` with a guard against `c = 1/n` landing one ulp above an
/// integer.
pub fn ceil_scaled(c: f64, k: u64) -> u64 {
    let r = c * k as f64;
    let nearest = r.round();
    let v = if (r - nearest).abs() <= 1e-9 * nearest.max(1.0) { nearest } else { r.ceil() };
    (v as u64).max(1)
}

pub fn slow_decrease_scan(spec: &PsiSpec, c: f64, k_max: u64) -> Result<SlowDecreaseCertificate> {
    slow_decrease_scan_with(spec, c, k_max, DEFAULT_GROWTH_THRESHOLD)
}

/// Scans `psi(ceil(ck)) / psi(k)` for `1 <= k <= k_max`.
///
/// Tables are scanned up to their length. A table is declared
/// `NotSlowlyDecreasing` when the maxima over the last three dyadic blocks
/// `[2^j, 2^(j+1))` increase strictly and grow by at least `growth_threshold`.
pub fn slow_decrease_scan_with(
    spec: &PsiSpec,
    c: f64,
    k_max: u64,
    growth_threshold: f64,
) -> Result<SlowDecreaseCertificate> {
    if !(c > 0.0 && c < 1.0) {
        return Err(domain(format!("c must lie in (0, 1), got {c}")));
    }
    if k_max < 2 {
        return Err(domain(format!("k_max must be at least 2, got {k_max}")));
    }
    let last = spec.max_k().map_or(k_max, |m| m.min(k_max));

    let mut empirical_k = 1.0f64;
    let mut block_max: Vec<f64> = Vec::new();
    for k in 1..=last {
        let ratio = spec.eval(ceil_scaled(c, k))? / spec.eval(k)?;
        empirical_k = empirical_k.max(ratio);
        let block = (63 - k.leading_zeros()) as usize;
        if block_max.len() <= block {
            block_max.resize(block + 1, 0.0);
        }
        block_max[block] = block_max[block].max(ratio);
    }

    let analytic_k = match spec.family() {
        PsiFamily::Power { tau, .. } => Some(c.powf(-tau)),
        // ln(1 + ck) >= c ln(1 + k) by concavity, so the log factor adds at most c^-p.
        PsiFamily::LogPower { s, p, .. } => Some(c.powf(-(s + p))),
        PsiFamily::Tabulated { .. } => None,
    };

    let verdict = if analytic_k.is_some() {
        SlowDecreaseVerdict::SlowlyDecreasing
    } else {
        let tail = &block_max[block_max.len().saturating_sub(3)..];
        let increasing = tail.len() == 3 && tail.windows(2).all(|w| w[1] > w[0]);
        if increasing && tail[2] >= growth_threshold * tail[0] {
            SlowDecreaseVerdict::NotSlowlyDecreasing
        } else {
            SlowDecreaseVerdict::Inconclusive
        }
    };

    Ok(SlowDecreaseCertificate { c, empirical_k, analytic_k, verdict, k_scanned: last })
}

fn check_n(n: u32) -> Result<()> {
    if n < 2 {
        return Err(domain(format!("n must be at least 2, got {n}")));
    }
    Ok(())
}

/// `sum_{k=1}^{upto} k^(n-2) psi(k)`, compensated.
pub fn critical_partial_sum(n: u32, spec: &PsiSpec, upto: u64) -> Result<f64> {
    check_n(n)?;
    if upto == 0 {
        return Err(domain("the partial sum needs K >= 1"));
    }
    let exponent = (n - 2) as i32;
    let mut acc = CompensatedSum::new();
    for k in 1..=upto {
        let term = (k as f64).powi(exponent) * spec.eval(k)?;
        if !term.is_finite() {
            return Err(range(format!("term k^{exponent} psi(k) overflows at k = {k}")));
        }
        acc.add(term);
    }
    let total = acc.value();
    if !total.is_finite() {
        return Err(range(format!("critical partial sum overflows for n = {n}, K = {upto}")));
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesClass {
    Converges,
    Diverges,
    Unknown,
}

impl fmt::Display for SeriesClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Convergence of `sum_k k^(n-2) psi(k)` from the family's exponents.
pub fn classify_critical_sum(n: u32, spec: &PsiSpec) -> Result<SeriesClass> {
    check_n(n)?;
    let threshold = (n - 1) as f64;
    Ok(match spec.family() {
        PsiFamily::Power { tau, .. } => {
            if *tau > threshold {
                SeriesClass::Converges
            } else {
                SeriesClass::Diverges
            }
        }
        PsiFamily::LogPower { s, p, .. } => {
            if *s > threshold || (*s == threshold && *p > 1.0) {
                SeriesClass::Converges
            } else {
                SeriesClass::Diverges
            }
        }
        PsiFamily::Tabulated { .. } => SeriesClass::Unknown,
    })
}
