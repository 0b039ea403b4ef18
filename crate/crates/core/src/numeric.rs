//! Error-compensated floating point kernels.

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.carry += (self.sum - t) + value;
        } else {
            self.carry += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Veltkamp splitting constant `2^27 + 1`.
const SPLITTER: f64 = 134_217_729.0;

#[inline]
fn split(a: f64) -> (f64, f64) {
    let c = SPLITTER * a;
    let hi = c - (c - a);
    (hi, a - hi)
}

/// Dekker's error-free product: `a * b = p + e` exactly.
///
/// `f64::mul_add` would do this in one instruction, but without a target
/// feature flag it lowers to a slow software `fma`.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    let e = al * bl - (((p - ah * bh) - al * bh) - ah * bl);
    (p, e)
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `q . x` evaluated with error-free products and sums (Ogita-Rump-Oishi `Dot2`).
///
/// The result is as accurate as if computed in twice the working precision
/// and then rounded, which for the short vectors used here means the sign and
/// the comparison against a threshold are reliable.
#[inline]
pub fn dot(q: &[i64], x: &[f64]) -> f64 {
    debug_assert_eq!(q.len(), x.len());
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for (&qi, &xi) in q.iter().zip(x) {
        let (p, pe) = two_prod(qi as f64, xi);
        let (t, se) = two_sum(s, p);
        s = t;
        c += se + pe;
    }
    s + c
}
