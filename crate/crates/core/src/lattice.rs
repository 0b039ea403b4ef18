//! Integer vectors grouped by sup-norm height.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{domain, range, Result};

/// A nonzero integer vector together with its height `max |q_i|`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeVector {
    coords: Vec<i64>,
    height: u64,
}

fn sup_norm(coords: &[i64]) -> u64 {
    coords.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
}

impl LatticeVector {
    pub fn new(coords: Vec<i64>) -> Result<Self> {
        let height = sup_norm(&coords);
        if height == 0 {
            return Err(domain("a lattice vector must be nonzero"));
        }
        if height > i64::MAX as u64 {
            return Err(range("coordinate magnitude exceeds i64::MAX"));
        }
        Ok(Self { coords, height })
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn into_coords(self) -> Vec<i64> {
        self.coords
    }

    pub fn negated(&self) -> Self {
        Self { coords: self.coords.iter().map(|c| -c).collect(), height: self.height }
    }

    /// First nonzero coordinate is positive.
    pub fn is_canonical(&self) -> bool {
        is_canonical(&self.coords)
    }

    /// The representative of `{q, -q}` whose first nonzero coordinate is positive.
    pub fn canonical(self) -> Self {
        if self.is_canonical() {
            self
        } else {
            self.negated()
        }
    }

    /// How many coordinates attain the height.
    pub fn height_multiplicity(&self) -> usize {
        self.coords.iter().filter(|c| c.unsigned_abs() == self.height).count()
    }
}

pub(crate) fn is_canonical(coords: &[i64]) -> bool {
    coords.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
}

impl fmt::Display for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for LatticeVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords.serialize(serializer)
    }
}

/// `#{q in Z^n : |q| = k} = (2k+1)^n - (2k-1)^n`, exactly.
pub fn shell_count(n: u32, k: u64) -> Result<u128> {
    if n == 0 {
        return Err(domain("dimension n must be at least 1"));
    }
    if k == 0 {
        return Err(domain("shell height k must be at least 1"));
    }
    let overflow = || range(format!("shell count overflows 128 bits for n = {n}, k = {k}"));
    let outer = (2 * k as u128 + 1).checked_pow(n).ok_or_else(overflow)?;
    let inner = (2 * k as u128 - 1).checked_pow(n).ok_or_else(overflow)?;
    Ok(outer - inner)
}

/// `2 shell_count(n,k) - 2^(n+1) n k^(n-1)` as an exact integer.
///
/// Dividing by `k` gives the error of the leading term `2^(n+1) n k^(n-2)` in
/// `2 shell_count(n,k) / k`; dividing by `k^(n-2)` gives that error relative to
/// `k^(n-3)`.
pub fn leading_term_defect(n: u32, k: u64) -> Result<i128> {
    let overflow = || range(format!("leading-term defect overflows for n = {n}, k = {k}"));
    let shell = i128::try_from(shell_count(n, k)?).map_err(|_| overflow())?;
    let lead = 2i128
        .checked_pow(n + 1)
        .and_then(|p| p.checked_mul(n as i128))
        .and_then(|p| p.checked_mul((k as i128).checked_pow(n - 1)?))
        .ok_or_else(overflow)?;
    shell.checked_mul(2).and_then(|s| s.checked_sub(lead)).ok_or_else(overflow)
}

/// Streams one representative of each pair `{q, -q}` with `|q| = k`.
///
/// Vectors come face by face: first those whose leading coordinate attains
/// the height, then those whose first height-attaining coordinate is the
/// second, and so on. Within one face the order is lexicographic. Every
/// vector yielded is canonical (first nonzero coordinate positive).
///
/// [`ShellIter::next_coords`] lends the current coordinates without
/// allocating; the [`Iterator`] impl clones them into [`LatticeVector`]s.
#[derive(Debug, Clone)]
pub struct ShellIter {
    k: i64,
    face: usize,
    coords: Vec<i64>,
    started: bool,
    done: bool,
}

impl ShellIter {
    pub fn new(n: usize, k: u64) -> Result<Self> {
        if n == 0 {
            return Err(domain("dimension n must be at least 1"));
        }
        if k == 0 {
            return Err(domain("shell height k must be at least 1"));
        }
        let k = i64::try_from(k).map_err(|_| range("shell height exceeds i64::MAX"))?;
        let mut it = Self { k, face: 0, coords: vec![0; n], started: false, done: false };
        it.reset_from(0);
        Ok(it)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Smallest admissible value at position `p` given positions `< p`.
    fn min_at(&self, p: usize) -> i64 {
        let k = self.k;
        let prefix_zero = self.coords[..p.min(self.face)].iter().all(|&c| c == 0);
        if p < self.face {
            if prefix_zero {
                0
            } else {
                -(k - 1)
            }
        } else if p == self.face {
            if prefix_zero {
                k
            } else {
                -k
            }
        } else {
            -k
        }
    }

    fn next_at(&self, p: usize) -> Option<i64> {
        let k = self.k;
        let v = self.coords[p];
        if p < self.face {
            (v < k - 1).then_some(v + 1)
        } else if p == self.face {
            (v == -k).then_some(k)
        } else {
            (v < k).then_some(v + 1)
        }
    }

    fn reset_from(&mut self, start: usize) {
        for p in start..self.coords.len() {
            self.coords[p] = self.min_at(p);
        }
    }

    fn advance(&mut self) -> bool {
        for p in (0..self.coords.len()).rev() {
            if let Some(v) = self.next_at(p) {
                self.coords[p] = v;
                self.reset_from(p + 1);
                return true;
            }
        }
        self.face += 1;
        if self.face == self.coords.len() {
            return false;
        }
        self.reset_from(0);
        true
    }

    /// Next vector of the shell, or `None` when exhausted.
    #[inline]
    pub fn next_coords(&mut self) -> Option<&[i64]> {
        if self.done {
            return None;
        }
        // Most steps only bump the last coordinate.
        let last = self.coords.len() - 1;
        if self.started && last > self.face && self.coords[last] < self.k {
            self.coords[last] += 1;
            return Some(&self.coords);
        }
        if self.started {
            if !self.advance() {
                self.done = true;
                return None;
            }
        } else {
            self.started = true;
        }
        Some(&self.coords)
    }

    /// Index (0-based) of the face the last yielded vector belongs to.
    #[inline]
    pub fn face(&self) -> usize {
        self.face
    }
}

impl Iterator for ShellIter {
    type Item = LatticeVector;

    fn next(&mut self) -> Option<LatticeVector> {
        let k = self.k as u64;
        self.next_coords().map(|c| LatticeVector { coords: c.to_vec(), height: k })
    }
}

/// Canonical vectors of height `k`, one per `{q, -q}` pair.
pub fn shell_iter(n: usize, k: u64) -> Result<ShellIter> {
    ShellIter::new(n, k)
}
