//! Discrete fracture on a triangular Lennard-Jones lattice under a strict
//! orientation-preserving constraint: lattice clipping, energies, surface
//! densities, explicit crack constructions, diagnostics and a barrier minimizer.

pub mod analysis;
pub mod constructions;
pub mod energy;
pub mod geom;
pub mod lattice;
pub mod lp;
pub mod minimize;
pub mod surface;

use rayon::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("no lattice bond fits inside the domain")]
    EmptyLattice,
    #[error("displacement has {got} values, domain has {expected} nodes")]
    SizeMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("initial state is not admissible (triangle {0})")]
    InadmissibleInit(usize),
    #[error("line search cannot keep det > 0 (blocking triangle {0})")]
    LineSearchBlocked(usize),
    #[error("conflicting prescriptions on node {0}")]
    ConflictingClamp(usize),
}

const CHUNK: usize = 4096;

/// Sum with a reduction tree that does not depend on the thread count.
pub fn fixed_order_sum(xs: &[f64]) -> f64 {
    let partial: Vec<f64> = xs.par_chunks(CHUNK).map(|c| c.iter().sum::<f64>()).collect();
    partial.iter().sum()
}
