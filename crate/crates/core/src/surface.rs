//! Anisotropic surface density of the lattice: ψ, its polar ψ*, φ and the Wulff hexagon.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_6, TAU};

use serde::{Deserialize, Serialize};

use crate::geom::{cross, perp, Vec2, SQRT3};
use crate::lattice::LatticeVectors;
use crate::Error;

/// ψ*(ν) = max_k |⟨ν, η_k⟩|.
pub fn psi_star(nu: Vec2) -> f64 {
    (1..=3).map(|k| nu.dot(&LatticeVectors::eta(k)).abs()).fold(0.0, f64::max)
}

/// Gauge of the hexagon conv(S).
pub fn psi(x: Vec2) -> f64 {
    2.0 / SQRT3 * (1..=3).map(|k| x.dot(&perp(LatticeVectors::eta(k))).abs()).fold(0.0, f64::max)
}

/// φ(ν) = J∞ (4/√3) ψ*(ν).
pub fn phi(nu: Vec2, j_inf: f64) -> f64 {
    j_inf * 4.0 / SQRT3 * psi_star(nu)
}

/// 2ψ*(ν) − Σ_k |⟨ν, η_k⟩|, zero up to rounding.
pub fn dual_identity_residual(nu: Vec2) -> f64 {
    2.0 * psi_star(nu) - (1..=3).map(|k| nu.dot(&LatticeVectors::eta(k)).abs()).sum::<f64>()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WulffPolygon {
    /// Vertices of {ψ* ≤ 1}, counterclockwise from 30°.
    pub vertices: Vec<Vec2>,
    /// Vertex pairs bounding each 60° sector.
    pub adjacency: Vec<(usize, usize)>,
}

pub fn wulff_polygon() -> WulffPolygon {
    let d = LatticeVectors::d();
    WulffPolygon {
        vertices: d.iter().map(|x| x * (2.0 / SQRT3)).collect(),
        adjacency: (0..6).map(|k| (k, (k + 1) % 6)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexDecomposition {
    pub nu1: Vec2,
    pub nu2: Vec2,
    pub lambda: f64,
    /// Sector index k: the angle of ν lies in [π/6 + kπ/3, π/6 + (k+1)π/3).
    pub sector: usize,
}

/// Write ν/ψ*(ν) = λ(2/√3)ν₁ + (1−λ)(2/√3)ν₂ with ν₁, ν₂ adjacent members of D.
///
/// Sectors are half-open and start at a hexagon vertex, so a ν lying on a
/// vertex direction returns that vertex as ν₁ with λ = 1.
pub fn simplex_decompose(nu: Vec2) -> Result<SimplexDecomposition, Error> {
    if nu.norm() == 0.0 || !nu.x.is_finite() || !nu.y.is_finite() {
        return Err(Error::InvalidParameter("simplex decomposition of a zero vector".into()));
    }
    let theta = (nu.y.atan2(nu.x) - FRAC_PI_6).rem_euclid(TAU);
    let mut sector = (theta / FRAC_PI_3).floor() as usize % 6;
    let d = LatticeVectors::d();
    let w = nu / psi_star(nu);
    let solve = |k: usize| {
        let v1 = d[k] * (2.0 / SQRT3);
        let v2 = d[(k + 1) % 6] * (2.0 / SQRT3);
        // w − v2 = λ (v1 − v2)
        let e = v1 - v2;
        ((w - v2).dot(&e) / e.norm_squared(), cross(e, w - v2))
    };
    let (mut lambda, _) = solve(sector);
    // Guard against atan2 rounding right at a vertex.
    if lambda > 1.0 + 1e-9 {
        sector = (sector + 5) % 6;
        lambda = solve(sector).0;
    } else if lambda < 1e-9 {
        sector = (sector + 1) % 6;
        lambda = solve(sector).0;
    }
    let lambda = lambda.clamp(0.0, 1.0);
    Ok(SimplexDecomposition { nu1: d[sector], nu2: d[(sector + 1) % 6], lambda, sector })
}

/// Table of (angle, φ) for a polar plot.
pub fn polar_table(samples: usize, j_inf: f64) -> Vec<(f64, f64)> {
    (0..samples)
        .map(|i| {
            let a = TAU * i as f64 / samples as f64;
            (a, phi(crate::geom::unit(a), j_inf))
        })
        .collect()
}
