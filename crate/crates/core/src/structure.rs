//! Faces, pyramids and the lift of distance-to-integer witnesses on a face
//! into absolute-value witnesses in the cube.
//!
//! On the face `x_n = 1` the form `q . x` becomes `q_hat . x_hat + q_n`, so a
//! `q_hat` with `||q_hat . x_hat|| < psi(|q_hat|) / C` yields
//! `q = (q_hat, -round(q_hat . x_hat))`. Either `|q| = |q_hat|`, or `q_n`
//! carries the height, in which case some `|q_j| > |q| / n` with `j < n` and
//! the slow-decrease constant `C` absorbs the drop from `|q_hat|` to `|q|`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, KgError, Result};
use crate::lattice::{shell_iter, LatticeVector};
use crate::limsup::{
    estimate_fraction, sample_categories, Estimate, SamplerConfig, TruncationWindow, WindowUnion,
};
use crate::numeric::dot;
use crate::psi::{ceil_scaled, PsiSpec};

/// One-based index `j` of the face `F_j = {x_j = 1}` and of the pyramid
/// `P_j = {max_i x_i = x_j}` over it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FaceIndex(usize);

impl FaceIndex {
    pub fn new(j: usize, n: usize) -> Result<Self> {
        if j == 0 || j > n {
            return Err(domain(format!("face index must lie in [1, {n}], got {j}")));
        }
        Ok(Self(j))
    }

    pub fn get(self) -> usize {
        self.0
    }

    pub fn zero_based(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for FaceIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `||y||`, the distance from `y` to the nearest integer.
pub fn nearest_int_distance(y: f64) -> f64 {
    (y - y.round()).abs()
}

/// A canonical `q_hat` in the window with `||q_hat . x_hat|| < psi(|q_hat|) / scale`.
pub fn classical_membership(
    x_hat: &[f64],
    w: &TruncationWindow,
    spec: &PsiSpec,
    scale: f64,
) -> Result<Option<LatticeVector>> {
    if !(scale >= 1.0 && scale.is_finite()) {
        return Err(domain(format!("scale must be a finite real >= 1, got {scale}")));
    }
    if x_hat.is_empty() {
        return Err(domain("face point must have dimension at least 1"));
    }
    if let Some(v) = x_hat.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(domain(format!("face point coordinates must lie in [0, 1], got {v}")));
    }
    for k in w.lo()..=w.hi() {
        let bound = spec.eval(k)? / scale;
        let mut shell = shell_iter(x_hat.len(), k)?;
        while let Some(q) = shell.next_coords() {
            if nearest_int_distance(dot(q, x_hat)) < bound {
                return Ok(Some(LatticeVector::new(q.to_vec())?));
            }
        }
    }
    Ok(None)
}

/// A face witness to be lifted: `||q_hat . x_hat|| < psi(|q_hat|) / c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftInput {
    x_hat: Vec<f64>,
    q_hat: LatticeVector,
    c: f64,
}

impl LiftInput {
    pub fn new(x_hat: Vec<f64>, q_hat: LatticeVector, c: f64, spec: &PsiSpec) -> Result<Self> {
        if !(c > 1.0 && c.is_finite()) {
            return Err(KgError::Precondition(format!("slow-decrease constant C must exceed 1, got {c}")));
        }
        if x_hat.len() != q_hat.dim() {
            return Err(domain(format!(
                "x_hat has dimension {} but q_hat has dimension {}",
                x_hat.len(),
                q_hat.dim()
            )));
        }
        if let Some(v) = x_hat.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(domain(format!("x_hat coordinates must lie in [0, 1], got {v}")));
        }
        let dist = nearest_int_distance(dot(q_hat.coords(), &x_hat));
        let bound = spec.eval(q_hat.height())? / c;
        if !(dist < bound) {
            return Err(KgError::Precondition(format!(
                "||q_hat . x_hat|| = {dist} is not below psi(|q_hat|)/C = {bound}"
            )));
        }
        Ok(Self { x_hat, q_hat, c })
    }

    pub fn x_hat(&self) -> &[f64] {
        &self.x_hat
    }

    pub fn q_hat(&self) -> &LatticeVector {
        &self.q_hat
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

/// Which of the two height relations the lift fell into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "kebab-case")]
pub enum LiftCase {
    /// `|q| = |q_hat|`.
    EqualHeight,
    /// `|q| = |q_n| > |q_hat|`; `index` is a one-based `j < n` with `|q_j| > |q| / n`.
    TallQn { index: usize },
}

impl LiftCase {
    pub fn tag(&self) -> &'static str {
        match self {
            LiftCase::EqualHeight => "equal-height",
            LiftCase::TallQn { .. } => "tall-q_n",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftOutcome {
    /// The lifted vector, last coordinate multiplying `x_n = 1`.
    pub q: LatticeVector,
    /// `|q . (x_hat, 1)|`.
    pub residual: f64,
    /// `psi(|q|)`.
    pub psi_at_height: f64,
    pub case: LiftCase,
}

/// Lifts a face witness to `q = (q_hat, q_n)` with `|q . (x_hat, 1)| < psi(|q|)`.
///
/// Both the slow-decrease inequality at the heights involved and the final
/// inequality are checked; a failure of the latter is reported as
/// [`KgError::Internal`].
pub fn lift_witness(inp: &LiftInput, spec: &PsiSpec, n: usize) -> Result<LiftOutcome> {
    if n < 2 || inp.x_hat.len() != n - 1 {
        return Err(domain(format!(
            "lift needs n >= 2 and a face point of dimension n - 1; got n = {n}, dim = {}",
            inp.x_hat.len()
        )));
    }
    let form = dot(inp.q_hat.coords(), &inp.x_hat);
    let nearest = form.round();
    if nearest.abs() >= i64::MAX as f64 {
        return Err(crate::error::range("q_hat . x_hat is too large to round to an i64"));
    }
    let q_n = -(nearest as i64);
    // Sterbenz: form and its nearest integer are within a factor two, so this is exact.
    let residual = (form + q_n as f64).abs();

    let mut coords = inp.q_hat.coords().to_vec();
    coords.push(q_n);
    let q = LatticeVector::new(coords)?;
    let height = q.height();
    let q_hat_height = inp.q_hat.height();

    let case = if height == q_hat_height {
        LiftCase::EqualHeight
    } else {
        let index = q.coords()[..n - 1]
            .iter()
            .position(|c| (c.unsigned_abs() as u128) * (n as u128) > height as u128)
            .map(|j| j + 1)
            .ok_or_else(|| {
                KgError::Internal(format!("no coordinate of q_hat exceeds |q|/n for q = {q}"))
            })?;
        let psi_low = spec.eval(ceil_scaled(1.0 / n as f64, height))?;
        let psi_high = spec.eval(height)?;
        // Power laws meet this with equality when n divides |q|; allow for
        // the rounding of both sides.
        if psi_low > inp.c * psi_high * (1.0 + 8.0 * f64::EPSILON) {
            return Err(KgError::Precondition(format!(
                "psi(ceil(|q|/n)) = {psi_low} exceeds C psi(|q|) = {} at |q| = {height}",
                inp.c * psi_high
            )));
        }
        LiftCase::TallQn { index }
    };

    let psi_at_height = spec.eval(height)?;
    if !(residual < psi_at_height) {
        return Err(KgError::Internal(format!(
            "lifted q = {q} has |q . x| = {residual} >= psi(|q|) = {psi_at_height}"
        )));
    }
    Ok(LiftOutcome { q, residual, psi_at_height, case })
}

/// Places `x_hat` on face `j` by inserting `x_j = 1`.
pub fn embed_on_face(x_hat: &[f64], face: FaceIndex) -> Vec<f64> {
    let mut x = x_hat.to_vec();
    x.insert(face.zero_based().min(x.len()), 1.0);
    x
}

/// [`lift_witness`] on face `F_j` by moving the face coordinate into place.
pub fn lift_witness_on_face(
    inp: &LiftInput,
    spec: &PsiSpec,
    n: usize,
    face: FaceIndex,
) -> Result<LiftOutcome> {
    let mut out = lift_witness(inp, spec, n)?;
    let mut coords = out.q.clone().into_coords();
    let q_n = coords.pop().expect("lifted vector has n >= 2 coordinates");
    coords.insert(face.zero_based(), q_n);
    out.q = LatticeVector::new(coords)?;
    if let LiftCase::TallQn { index } = out.case {
        let shifted = if index > face.zero_based() { index + 1 } else { index };
        out.case = LiftCase::TallQn { index: shifted };
    }
    Ok(out)
}

/// The `j` with `x_j = max_i x_i`, smallest on ties.
pub fn pyramid_of(x: &[f64]) -> Result<FaceIndex> {
    if x.is_empty() {
        return Err(domain("point must have dimension at least 1"));
    }
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    Ok(FaceIndex(best + 1))
}

/// Whether `|q . (t x)| < psi(|q|)` given that `q` witnesses `x`; always
/// true when the precondition holds.
pub fn check_scaling(x: &[f64], q: &LatticeVector, t: f64, spec: &PsiSpec) -> Result<bool> {
    if !(0.0..=1.0).contains(&t) {
        return Err(domain(format!("t must lie in [0, 1], got {t}")));
    }
    if x.len() != q.dim() {
        return Err(domain("point and q differ in dimension"));
    }
    let bound = spec.eval(q.height())?;
    if !(dot(q.coords(), x).abs() < bound) {
        return Err(KgError::Precondition(format!("q = {q} does not witness the point")));
    }
    let scaled: Vec<f64> = x.iter().map(|v| t * v).collect();
    Ok(dot(q.coords(), &scaled).abs() < bound)
}

/// Monte-Carlo estimates of `|V_{N,Q}(psi) cap P_j|` for `j = 1..=n`, from a
/// single set of points.
pub fn estimate_pyramid_measures(
    w: &TruncationWindow,
    spec: &PsiSpec,
    n: usize,
    cfg: &SamplerConfig,
) -> Result<Vec<Estimate>> {
    if n < 2 {
        return Err(domain(format!("n must be at least 2, got {n}")));
    }
    let start = std::time::Instant::now();
    let union = WindowUnion::new(w, spec, n)?;
    let tally = sample_categories(n, cfg, n, |x| {
        union.contains(x).then(|| pyramid_of(x).map(|f| f.zero_based()).unwrap_or(0))
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    Ok(tally.into_iter().map(|h| Estimate::from_hits(h, cfg.samples, cfg.seed, elapsed)).collect())
}

/// Fraction of sampled points lying on the overlap of two or more pyramids.
pub fn pyramid_overlap_frequency(n: usize, cfg: &SamplerConfig) -> Result<Estimate> {
    estimate_fraction(n, cfg, |x| {
        let top = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        x.iter().filter(|&&v| v == top).count() > 1
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(c: &[i64]) -> LatticeVector {
        LatticeVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(nearest_int_distance(2.0), 0.0);
        assert_eq!(nearest_int_distance(0.5), 0.5);
        assert!((nearest_int_distance(-1.3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn classical_examples() {
        let psi = PsiSpec::power(1.0, 1.0).unwrap();
        let w = TruncationWindow::new(1, 4).unwrap();
        let q = classical_membership(&[0.5], &w, &psi, 2.0).unwrap().unwrap();
        assert_eq!(q.coords(), &[2]);

        let w = TruncationWindow::new(3, 7).unwrap();
        let q = classical_membership(&[0.0, 0.0], &w, &psi, 1.0).unwrap().unwrap();
        assert_eq!(q.height(), 3);

        let psi = PsiSpec::power(0.2, 1.0).unwrap();
        let w = TruncationWindow::new(3, 3).unwrap();
        let x = [1.0 / 3.0, 2.0 / 3.0];
        let q = classical_membership(&x, &w, &psi, 1.0).unwrap().unwrap();
        assert_eq!(q.height(), 3);
        assert!(nearest_int_distance(dot(q.coords(), &x)) < 0.2 / 3.0);

        assert!(classical_membership(&[0.5], &w, &psi, 0.5).is_err());
    }

    #[test]
    fn lift_examples() {
        let psi = PsiSpec::power(1.0, 1.0).unwrap();

        let inp = LiftInput::new(vec![0.5], lv(&[2]), 2.0, &psi).unwrap();
        let out = lift_witness(&inp, &psi, 2).unwrap();
        assert_eq!(out.q.coords(), &[2, -1]);
        assert_eq!(out.residual, 0.0);
        assert_eq!(out.psi_at_height, 0.5);
        assert_eq!(out.case, LiftCase::EqualHeight);

        let inp = LiftInput::new(vec![1.0], lv(&[1]), 2.0, &psi).unwrap();
        let out = lift_witness(&inp, &psi, 2).unwrap();
        assert_eq!(out.q.coords(), &[1, -1]);
        assert_eq!(out.case, LiftCase::EqualHeight);

        let third = 1.0 / 3.0;
        let inp = LiftInput::new(vec![third, third], lv(&[3, 3]), 3.0, &psi).unwrap();
        let out = lift_witness(&inp, &psi, 3).unwrap();
        assert_eq!(out.q.coords(), &[3, 3, -2]);
        assert!(out.residual < psi.eval(3).unwrap());
    }

    #[test]
    fn lift_tall_last_coordinate() {
        // q_hat . x_hat = 2.7 rounds to 3 > |q_hat| = 1
        let psi = PsiSpec::power(1.0, 1.0).unwrap();
        let x = vec![0.9, 0.9, 0.9];
        let inp = LiftInput::new(x, lv(&[1, 1, 1]), 4.0, &psi);
        // ||2.7|| = 0.3 is not below psi(1)/4
        assert!(matches!(inp, Err(KgError::Precondition(_))));
        let psi = PsiSpec::power(2.0, 1.0).unwrap();
        let inp = LiftInput::new(vec![0.9, 0.9, 0.9], lv(&[1, 1, 1]), 4.0, &psi).unwrap();
        let out = lift_witness(&inp, &psi, 4).unwrap();
        assert_eq!(out.q.coords(), &[1, 1, 1, -3]);
        assert_eq!(out.case, LiftCase::TallQn { index: 1 });
        assert!(out.residual < out.psi_at_height);
    }

    #[test]
    fn lift_rejects_invalid_input() {
        let psi = PsiSpec::power(1.0, 1.0).unwrap();
        assert!(LiftInput::new(vec![0.5], lv(&[1]), 2.0, &psi).is_err());
        assert!(LiftInput::new(vec![0.5], lv(&[2]), 1.0, &psi).is_err());
        assert!(LiftInput::new(vec![0.5, 0.1], lv(&[2]), 2.0, &psi).is_err());
    }

    #[test]
    fn lift_on_other_faces() {
        let psi = PsiSpec::power(2.0, 1.0).unwrap();
        let inp = LiftInput::new(vec![0.9, 0.9, 0.9], lv(&[1, 1, 1]), 4.0, &psi).unwrap();
        for j in 1..=4 {
            let face = FaceIndex::new(j, 4).unwrap();
            let out = lift_witness_on_face(&inp, &psi, 4, face).unwrap();
            let x = embed_on_face(&[0.9, 0.9, 0.9], face);
            assert_eq!(x[j - 1], 1.0);
            assert_eq!(out.q.coords()[j - 1], -3);
            assert!(dot(out.q.coords(), &x).abs() < out.psi_at_height);
            if let LiftCase::TallQn { index } = out.case {
                assert_ne!(index, j);
                assert!(out.q.coords()[index - 1].unsigned_abs() * 4 > out.q.height());
            }
        }
    }

    #[test]
    fn pyramid_examples() {
        assert_eq!(pyramid_of(&[0.3, 0.7]).unwrap().get(), 2);
        assert_eq!(pyramid_of(&[0.5, 0.5]).unwrap().get(), 1);
        assert_eq!(pyramid_of(&[0.0, 0.0, 0.0]).unwrap().get(), 1);
    }

    #[test]
    fn scaling_examples() {
        let psi = PsiSpec::power(0.25, 1.0).unwrap();
        let q = lv(&[1, -1]);
        let x = [0.5, 0.6];
        assert!(check_scaling(&x, &q, 0.0, &psi).unwrap());
        assert!(check_scaling(&x, &q, 1.0, &psi).unwrap());
        assert!(check_scaling(&x, &q, 0.37, &psi).unwrap());
        assert!(matches!(check_scaling(&[0.9, 0.1], &q, 0.5, &psi), Err(KgError::Precondition(_))));
        assert!(check_scaling(&x, &q, 1.5, &psi).is_err());
    }
}
