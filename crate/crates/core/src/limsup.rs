//! Truncated limsup sets `V_{N,Q}(psi)`: the union of the slabs
//! `B_{psi(|q|)}(q)` over heights `N <= |q| <= Q`.
//!
//! Membership and counting scan the cube surface `{|q| = k}` face by face.
//! On each face one free coordinate is solved for directly (the condition
//! `|q . x| < delta` is an interval in that coordinate), so the work per
//! shell is `O(k^(n-2))` rather than `O(k^(n-1))`. Every candidate is then
//! re-checked with the compensated dot product, so results agree with
//! [`crate::slabgeom::Slab::contains`] bit for bit.

use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, range, KgError, Result};
use crate::lattice::{shell_count, shell_iter, LatticeVector};
use crate::numeric::{dot, CompensatedSum};
use crate::psi::{classify_critical_sum, critical_partial_sum, PsiSpec, SeriesClass};

/// Heights `lo..=hi` of the slabs kept in a truncated union.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationWindow {
    lo: u64,
    hi: u64,
}

impl TruncationWindow {
    pub fn new(lo: u64, hi: u64) -> Result<Self> {
        if lo == 0 || lo > hi {
            return Err(domain(format!("window needs 1 <= N <= Q, got N = {lo}, Q = {hi}")));
        }
        if hi > i64::MAX as u64 {
            return Err(range("window height exceeds i64::MAX"));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> u64 {
        self.lo
    }

    pub fn hi(&self) -> u64 {
        self.hi
    }

    /// `psi(lo..=hi)`, checked against the domain of `spec`.
    fn widths(&self, spec: &PsiSpec) -> Result<Vec<f64>> {
        if let Some(m) = spec.max_k() {
            if self.hi > m {
                return Err(domain(format!(
                    "window reaches height {} but the psi table stops at {m}",
                    self.hi
                )));
            }
        }
        spec.table(self.lo, self.hi)
    }
}

/// Binomial Monte-Carlo estimate of a measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
    /// Wall time in seconds. Not part of the deterministic payload.
    pub elapsed: f64,
}

impl Estimate {
    pub fn from_hits(hits: u64, samples: u64, seed: u64, elapsed: f64) -> Self {
        let value = hits as f64 / samples as f64;
        let std_error = (value * (1.0 - value) / samples as f64).sqrt();
        Self { value, std_error, samples, seed, elapsed }
    }

    /// Same estimate with the timing zeroed, for reproducibility comparisons.
    pub fn without_timing(mut self) -> Self {
        self.elapsed = 0.0;
        self
    }
}

/// How many uniform points to draw, from which seed, on how many workers.
///
/// Points are generated in blocks of [`SAMPLE_BLOCK`] consecutive indices;
/// block `b` draws from the ChaCha8 stream `b` of `seed`. The split into
/// blocks does not depend on `threads`, so results are identical for any
/// worker count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub samples: u64,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl SamplerConfig {
    pub fn new(samples: u64, seed: u64) -> Self {
        Self { samples, seed, threads: None }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }
}

pub const SAMPLE_BLOCK: u64 = 4096;

/// Draws `cfg.samples` uniform points of `[0,1)^n` and tallies them into
/// `categories` bins (`None` = no bin).
pub fn sample_categories<F>(
    n: usize,
    cfg: &SamplerConfig,
    categories: usize,
    classify: F,
) -> Result<Vec<u64>>
where
    F: Fn(&[f64]) -> Option<usize> + Sync,
{
    if cfg.samples == 0 {
        return Err(domain("Monte-Carlo estimation needs at least one sample"));
    }
    if n == 0 {
        return Err(domain("dimension n must be at least 1"));
    }
    let blocks = cfg.samples.div_ceil(SAMPLE_BLOCK);
    let run_block = |b: u64| -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(b);
        let count = SAMPLE_BLOCK.min(cfg.samples - b * SAMPLE_BLOCK);
        let mut tally = vec![0u64; categories];
        let mut x = vec![0.0f64; n];
        for _ in 0..count {
            for xi in x.iter_mut() {
                *xi = rng.random::<f64>();
            }
            if let Some(c) = classify(&x) {
                tally[c] += 1;
            }
        }
        tally
    };
    let merge = |mut a: Vec<u64>, b: Vec<u64>| {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
        a
    };
    let work = || {
        (0..blocks)
            .into_par_iter()
            .map(run_block)
            .reduce(|| vec![0u64; categories], merge)
    };
    match cfg.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| KgError::Internal(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}

/// Fraction of uniform points satisfying `pred`.
pub fn estimate_fraction<F>(n: usize, cfg: &SamplerConfig, pred: F) -> Result<Estimate>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    let start = Instant::now();
    let hits = sample_categories(n, cfg, 1, |x| pred(x).then_some(0))?[0];
    Ok(Estimate::from_hits(hits, cfg.samples, cfg.seed, start.elapsed().as_secs_f64()))
}

fn check_point(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(domain("point must have dimension at least 1"));
    }
    if let Some(v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(domain(format!("point coordinates must lie in [0, 1], got {v}")));
    }
    Ok(())
}

/// How one face `q_face = +k` of a shell is scanned for a fixed point.
#[derive(Debug, Clone)]
struct FacePlan {
    face: usize,
    /// Coordinate solved for directly: the free one with the largest `x`.
    solve: usize,
    /// `1 / x[solve]`, or 0 when every free coordinate of `x` vanishes.
    inv: f64,
    /// Free coordinates other than `solve`, enumerated by odometer.
    outer: Vec<usize>,
}

/// Shell scanning for one point; the per-face plan does not depend on `k`.
struct ShellScanner<'a> {
    x: &'a [f64],
    plans: Vec<FacePlan>,
    q: Vec<i64>,
}

impl<'a> ShellScanner<'a> {
    fn new(x: &'a [f64]) -> Self {
        let n = x.len();
        let plans = (0..n)
            .map(|face| {
                let mut solve = usize::MAX;
                for m in (0..n).filter(|&m| m != face) {
                    if solve == usize::MAX || x[m] > x[solve] {
                        solve = m;
                    }
                }
                let inv = if solve != usize::MAX && x[solve] > 0.0 { 1.0 / x[solve] } else { 0.0 };
                let outer = (0..n).filter(|&m| m != face && m != solve).collect();
                FacePlan { face, solve, inv, outer }
            })
            .collect();
        Self { x, plans, q: vec![0; n] }
    }

    /// Visits the vectors `q` with `|q| = k` and `|q . x| < delta`, one per
    /// pair `{q, -q}` (the one whose first height-attaining coordinate is
    /// `+k`). Stops and returns `true` as soon as `visit` returns `true`.
    fn scan<F>(&mut self, k: i64, delta: f64, visit: &mut F) -> bool
    where
        F: FnMut(&[i64]) -> bool,
    {
        let x = self.x;
        let n = x.len();
        let q = &mut self.q;
        // Plain evaluation of q . x is off by far less than this; only
        // candidates within it of the boundary need the compensated product.
        let slack = 4.0 * f64::EPSILON * ((n * n) as f64 + 1.0) * (k as f64 + 1.0);
        for plan in &self.plans {
            let face = plan.face;
            let range = |m: usize| if m < face { (-(k - 1), k - 1) } else { (-k, k) };
            q[face] = k;
            if n == 1 {
                if dot(q, x).abs() < delta && visit(q) {
                    return true;
                }
                continue;
            }
            let solve = plan.solve;
            let xs = x[solve];
            let (lo, hi) = range(solve);
            for &m in &plan.outer {
                q[m] = range(m).0;
            }
            loop {
                let mut r = k as f64 * x[face];
                for &m in &plan.outer {
                    r += q[m] as f64 * x[m];
                }
                let (c_lo, c_hi) = if plan.inv > 0.0 {
                    let a = ((-delta - r) * plan.inv).floor() - 1.0;
                    let b = ((delta - r) * plan.inv).ceil() + 1.0;
                    (a.max(lo as f64) as i64, b.min(hi as f64) as i64)
                } else {
                    (lo, hi)
                };
                for v in c_lo..=c_hi {
                    if (r + v as f64 * xs).abs() >= delta + slack {
                        continue;
                    }
                    q[solve] = v;
                    if dot(q, x).abs() < delta && visit(q) {
                        return true;
                    }
                }
                let mut advanced = false;
                for &m in plan.outer.iter().rev() {
                    if q[m] < range(m).1 {
                        q[m] += 1;
                        advanced = true;
                        break;
                    }
                    q[m] = range(m).0;
                }
                if !advanced {
                    break;
                }
            }
        }
        false
    }

    /// The last vector passed to `visit`.
    fn current(&self) -> &[i64] {
        &self.q
    }

    /// Solutions in shell `k`, both signs.
    fn count(&mut self, k: u64, delta: f64) -> u64 {
        let mut half = 0u64;
        self.scan(k as i64, delta, &mut |_| {
            half += 1;
            false
        });
        2 * half
    }
}

/// Membership in a window union given the precomputed slab widths.
fn find_witness(scanner: &mut ShellScanner<'_>, w: &TruncationWindow, widths: &[f64]) -> bool {
    for (k, &delta) in (w.lo..=w.hi).zip(widths) {
        if scanner.scan(k as i64, delta, &mut |_| true) {
            return true;
        }
    }
    false
}

/// A canonical `q` with `N <= |q| <= Q` and `|q . x| < psi(|q|)`, scanning
/// shells upward from `N`; `None` if the window has no witness for `x`.
pub fn in_union(x: &[f64], w: &TruncationWindow, spec: &PsiSpec) -> Result<Option<LatticeVector>> {
    check_point(x)?;
    let widths = w.widths(spec)?;
    let mut scanner = ShellScanner::new(x);
    if find_witness(&mut scanner, w, &widths) {
        Ok(Some(LatticeVector::new(scanner.current().to_vec())?.canonical()))
    } else {
        Ok(None)
    }
}

/// `N(x, Q) = #{q in Z^n \ {0}, |q| <= Q : |q . x| < psi(|q|)}`, counting `q`
/// and `-q` separately.
pub fn count_solutions(x: &[f64], max_height: u64, spec: &PsiSpec) -> Result<u64> {
    Ok(*count_solutions_by_height(x, &[max_height], spec)?.last().unwrap_or(&0))
}

/// `N(x, Q)` for every `Q` in an increasing list, in one pass.
pub fn count_solutions_by_height(x: &[f64], heights: &[u64], spec: &PsiSpec) -> Result<Vec<u64>> {
    check_point(x)?;
    if heights.is_empty() {
        return Ok(Vec::new());
    }
    if heights.windows(2).any(|w| w[1] <= w[0]) || heights[0] == 0 {
        return Err(domain("heights must be positive and strictly increasing"));
    }
    let top = *heights.last().unwrap();
    let widths = TruncationWindow::new(1, top)?.widths(spec)?;
    let mut scanner = ShellScanner::new(x);
    let mut out = Vec::with_capacity(heights.len());
    let mut running = 0u64;
    let mut next = 0;
    for k in 1..=top {
        running += scanner.count(k, widths[k as usize - 1]);
        if k == heights[next] {
            out.push(running);
            next += 1;
        }
    }
    Ok(out)
}

/// A window union with its slab widths evaluated once, for repeated
/// membership queries on points of a fixed dimension.
#[derive(Debug, Clone)]
pub struct WindowUnion {
    window: TruncationWindow,
    widths: Vec<f64>,
    n: usize,
}

impl WindowUnion {
    pub fn new(w: &TruncationWindow, spec: &PsiSpec, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(domain("dimension n must be at least 1"));
        }
        Ok(Self { window: *w, widths: w.widths(spec)?, n })
    }

    /// Membership of a point already known to lie in `[0,1]^n`.
    pub fn contains(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.n);
        find_witness(&mut ShellScanner::new(x), &self.window, &self.widths)
    }
}

/// Monte-Carlo estimate of `|V_{N,Q}(psi)|` in `[0,1]^n`.
pub fn estimate_measure(
    w: &TruncationWindow,
    spec: &PsiSpec,
    n: usize,
    cfg: &SamplerConfig,
) -> Result<Estimate> {
    if n < 2 {
        return Err(domain(format!("n must be at least 2, got {n}")));
    }
    let union = WindowUnion::new(w, spec, n)?;
    estimate_fraction(n, cfg, |x| union.contains(x))
}

/// `sum_{k=N}^{Q} shell_count(n,k) * min(1, 2 psi(k) / k)`.
pub fn union_bound(w: &TruncationWindow, spec: &PsiSpec, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(domain(format!("n must be at least 2, got {n}")));
    }
    let n32 = u32::try_from(n).map_err(|_| range("dimension too large"))?;
    let widths = w.widths(spec)?;
    let mut acc = CompensatedSum::new();
    for (k, delta) in (w.lo..=w.hi).zip(widths) {
        let per_slab = (2.0 * delta / k as f64).min(1.0);
        acc.add(shell_count(n32, k)? as f64 * per_slab);
    }
    let total = acc.value();
    if !total.is_finite() {
        return Err(range("union bound overflows f64"));
    }
    Ok(total)
}

/// Whether some height-one `q` has `q . x = 0` exactly: a zero coordinate,
/// two equal coordinates, or any signed-subset cancellation.
pub fn is_degenerate_point(x: &[f64]) -> bool {
    shell_iter(x.len(), 1)
        .map(|mut it| {
            while let Some(q) = it.next_coords() {
                if dot(q, x) == 0.0 {
                    return true;
                }
            }
            false
        })
        .unwrap_or(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub max_height: u64,
    pub min_ratio: f64,
    pub median_ratio: f64,
    pub critical_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub rows: Vec<RatioRow>,
    pub classification: SeriesClass,
    /// Points used (degenerate points are excluded).
    pub points: usize,
    pub excluded: usize,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// `N(x, Q) / sum_{k<=Q} k^(n-2) psi(k)` over seeded uniform points.
pub fn counting_ratio_stats(
    heights: &[u64],
    spec: &PsiSpec,
    n: usize,
    x_samples: usize,
    seed: u64,
) -> Result<RatioStats> {
    if n < 2 {
        return Err(domain(format!("n must be at least 2, got {n}")));
    }
    counting_ratio_stats_for_points(heights, spec, n, &sample_points(n, x_samples, seed))
}

/// `count` seeded uniform points of `[0,1]^n`, drawn serially.
pub fn sample_points(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect()
}

/// As [`counting_ratio_stats`] on caller-supplied points.
pub fn counting_ratio_stats_for_points(
    heights: &[u64],
    spec: &PsiSpec,
    n: usize,
    points: &[Vec<f64>],
) -> Result<RatioStats> {
    let n32 = u32::try_from(n).map_err(|_| range("dimension too large"))?;
    let classification = classify_critical_sum(n32, spec)?;
    let sums: Vec<f64> =
        heights.iter().map(|&h| critical_partial_sum(n32, spec, h)).collect::<Result<_>>()?;
    let kept: Vec<&Vec<f64>> = points.iter().filter(|x| !is_degenerate_point(x)).collect();
    if kept.is_empty() {
        return Err(domain("no non-degenerate points to evaluate"));
    }
    if kept.iter().any(|x| x.len() != n) {
        return Err(domain(format!("every point must have dimension {n}")));
    }
    let counts: Vec<Vec<u64>> = kept
        .par_iter()
        .map(|x| count_solutions_by_height(x, heights, spec))
        .collect::<Result<_>>()?;
    let rows = heights
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let mut ratios: Vec<f64> = counts.iter().map(|c| c[i] as f64 / sums[i]).collect();
            let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            RatioRow { max_height: h, min_ratio, median_ratio: median(&mut ratios), critical_sum: sums[i] }
        })
        .collect();
    Ok(RatioStats { rows, classification, points: kept.len(), excluded: points.len() - kept.len() })
}
