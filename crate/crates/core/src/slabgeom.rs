//! The slab `B_delta(q) = {x in [0,1]^n : |q . x| < delta}`.
//!
//! Exact volumes come from the cube-slicing formula for
//! `F(t) = vol{y in [0,1]^m : w . y <= t}` with positive weights `w`:
//!
//! ```text
//! F(t) = 1 / (m! prod w_i) * sum_{S} (-1)^|S| max(0, t - sum_{i in S} w_i)^m
//! ```
//!
//! Negative coefficients are folded into positive weights by `x_i -> 1 - x_i`
//! and zero coefficients drop out, so the slab volume is
//! `F(delta - s) - F(-delta - s)` with `s` the sum of negative coefficients.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{domain, range, KgError, Result};
use crate::lattice::LatticeVector;
use crate::numeric::{dot, CompensatedSum};

/// Largest dimension accepted by the exact volume routines.
pub const MAX_EXACT_DIM: usize = 8;
/// Largest height accepted by the exact volume routines.
pub const MAX_EXACT_HEIGHT: u64 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct Slab {
    q: LatticeVector,
    delta: f64,
}

impl Slab {
    pub fn new(q: LatticeVector, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(domain(format!("slab width delta must be positive and finite, got {delta}")));
        }
        Ok(Self { q, delta })
    }

    pub fn q(&self) -> &LatticeVector {
        &self.q
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    /// `|q . x| < delta`, strict.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.q.dim() {
            return Err(domain(format!(
                "point has dimension {} but q has dimension {}",
                x.len(),
                self.q.dim()
            )));
        }
        Ok(dot(self.q.coords(), x).abs() < self.delta)
    }

    /// `min(1, 2 delta / |q|)`.
    pub fn volume_bound(&self) -> f64 {
        (2.0 * self.delta / self.q.height() as f64).min(1.0)
    }

    fn check_envelope(&self) -> Result<()> {
        if self.dim() > MAX_EXACT_DIM || self.q.height() > MAX_EXACT_HEIGHT {
            return Err(range(format!(
                "exact slab volume supports n <= {MAX_EXACT_DIM} and |q| <= {MAX_EXACT_HEIGHT}; got n = {}, |q| = {}",
                self.dim(),
                self.q.height()
            )));
        }
        Ok(())
    }

    /// Lebesgue volume of the slab inside the unit cube, correctly rounded.
    ///
    /// `delta` is a binary fraction, so the slicing formula is evaluated in
    /// exact rational arithmetic and rounded once at the end.
    pub fn volume_exact(&self) -> Result<f64> {
        self.check_envelope()?;
        let (weights, offset) = fold_weights(self.q.coords());
        let weights: Vec<BigInt> = weights.into_iter().map(BigInt::from).collect();
        let offset = BigRational::from_integer(BigInt::from(offset));
        let delta = BigRational::from_float(self.delta)
            .ok_or_else(|| domain("delta is not a finite real"))?;
        let hi = slice_cdf_exact(&weights, &(&delta - &offset));
        let lo = slice_cdf_exact(&weights, &(-delta - offset));
        (hi - lo).to_f64().ok_or_else(|| KgError::Internal("volume not representable".into()))
    }

    /// Same formula in `f64` with compensated summation.
    ///
    /// Fast, but the alternating sum loses accuracy when one weight dominates
    /// the others; [`Slab::volume_exact`] is the reference.
    pub fn volume_float(&self) -> Result<f64> {
        self.check_envelope()?;
        let (weights, offset) = fold_weights(self.q.coords());
        let weights: Vec<f64> = weights.into_iter().map(|w| w as f64).collect();
        let offset = offset as f64;
        let v = slice_cdf_float(&weights, self.delta - offset)
            - slice_cdf_float(&weights, -self.delta - offset);
        Ok(v.clamp(0.0, 1.0))
    }
}

/// Absolute values of the nonzero coefficients and the sum of the negative ones.
fn fold_weights(q: &[i64]) -> (Vec<i64>, i64) {
    let weights = q.iter().filter(|&&c| c != 0).map(|c| c.abs()).collect();
    let offset = q.iter().filter(|&&c| c < 0).sum();
    (weights, offset)
}

fn factorial(m: usize) -> BigInt {
    (1..=m).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// `vol{y in [0,1]^m : w . y <= t}` for positive integer weights.
fn slice_cdf_exact(w: &[BigInt], t: &BigRational) -> BigRational {
    let total: BigInt = w.iter().sum();
    if !t.is_positive() {
        return BigRational::zero();
    }
    if *t >= BigRational::from_integer(total) {
        return BigRational::one();
    }
    let m = w.len();
    let mut acc = BigRational::zero();
    for mask in 0u32..(1 << m) {
        let subset: BigInt = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| &w[i]).sum();
        let excess = t - BigRational::from_integer(subset);
        if excess.is_positive() {
            let term = num_traits::pow(excess, m);
            if mask.count_ones() % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
    }
    let denom = factorial(m) * w.iter().product::<BigInt>();
    acc / BigRational::from_integer(denom)
}

fn slice_cdf_float(w: &[f64], t: f64) -> f64 {
    let total: f64 = w.iter().sum();
    if t <= 0.0 {
        return 0.0;
    }
    if t >= total {
        return 1.0;
    }
    // The region is centrally symmetric about total/2; the short side has fewer,
    // smaller terms.
    if t > total / 2.0 {
        return 1.0 - slice_cdf_float(w, total - t);
    }
    let m = w.len();
    let mut acc = CompensatedSum::new();
    for mask in 0u32..(1 << m) {
        let subset: f64 = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| w[i]).sum();
        let excess = t - subset;
        if excess > 0.0 {
            let term = excess.powi(m as i32);
            acc.add(if mask.count_ones() % 2 == 0 { term } else { -term });
        }
    }
    let denom = (1..=m).map(|i| i as f64).product::<f64>() * w.iter().product::<f64>();
    acc.value() / denom
}

pub fn slab_contains(s: &Slab, x: &[f64]) -> Result<bool> {
    s.contains(x)
}

pub fn slab_volume_bound(s: &Slab) -> f64 {
    s.volume_bound()
}

pub fn slab_volume_exact(s: &Slab) -> Result<f64> {
    s.volume_exact()
}
