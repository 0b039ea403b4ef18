//! Executable numerics for the absolute-value analogue of the
//! Khintchine-Groshev zero-one law: for `n >= 2` the set of `x` in `[0,1]^n`
//! with `|q . x| < psi(|q|)` for infinitely many integer vectors `q` has
//! measure 0 or 1 according as `sum_k k^(n-2) psi(k)` converges or diverges
//! (the latter for slowly decreasing `psi`).
//!
//! * [`psi`]: error-function families, slow decrease, the critical sum.
//! * [`lattice`]: integer vectors by sup-norm shell.
//! * [`slabgeom`]: the slab `|q . x| < delta` in the unit cube, with exact volume.
//! * [`limsup`]: truncated unions of slabs, Monte-Carlo measure, solution counts.
//! * [`structure`]: faces, pyramids and the witness lift used for full measure.
//! * [`analysis`]: branch prediction, experiment verdicts, Dickinson's dimension.

pub mod analysis;
pub mod error;
pub mod lattice;
pub mod limsup;
pub mod numeric;
pub mod psi;
pub mod slabgeom;
pub mod structure;

pub use analysis::{
    dickinson_dimension, predict_branch, run_theorem_experiment, Branch, DickinsonParams,
    ExperimentConfig, TheoremReport, Verdict,
};
pub use error::{KgError, Result};
pub use lattice::{shell_count, shell_iter, LatticeVector, ShellIter};
pub use limsup::{
    count_solutions, counting_ratio_stats, estimate_measure, in_union, union_bound, Estimate,
    SamplerConfig, TruncationWindow,
};
pub use psi::{
    classify_critical_sum, critical_partial_sum, slow_decrease_scan, PsiFamily, PsiSpec,
    SeriesClass, SlowDecreaseCertificate, SlowDecreaseVerdict,
};
pub use slabgeom::Slab;
pub use structure::{
    check_scaling, classical_membership, lift_witness, nearest_int_distance, pyramid_of,
    FaceIndex, LiftCase, LiftInput, LiftOutcome,
};
