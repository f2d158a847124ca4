//! The Lennard-Jones bond potential, the discrete energy and the orientation constraint.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::{cross, Mat2, Vec2, SQRT3};
use crate::lattice::{LatticeDomain, LatticeVectors};
use crate::{fixed_order_sum, Error};

/// J(r) = J∞ (r⁻¹² − 2r⁻⁶ + 1): minimum 0 at r = 1, limit J∞ at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub j_inf: f64,
}

impl Default for Potential {
    fn default() -> Self {
        Self { j_inf: 1.0 }
    }
}

impl Potential {
    pub fn new(j_inf: f64) -> Self {
        Self { j_inf }
    }

    #[inline]
    pub fn j(&self, r: f64) -> f64 {
        let r6 = (r * r * r).powi(2).recip();
        self.j_inf * (r6 * r6 - 2.0 * r6 + 1.0)
    }

    /// dJ/dr.
    #[inline]
    pub fn dj(&self, r: f64) -> f64 {
        let r6 = (r * r * r).powi(2).recip();
        self.j_inf * 12.0 * (r6 - r6 * r6) / r
    }

    /// Checked evaluation rejecting non-positive arguments.
    pub fn lj_potential(&self, r: f64) -> Result<f64, Error> {
        if r > 0.0 {
            Ok(self.j(r))
        } else {
            Err(Error::InvalidParameter(format!("bond ratio must be positive, got {r}")))
        }
    }
}

/// Orientation floor: |det| at or below this multiple of ‖∇u‖²_F counts as zero.
pub const DET_ROUNDOFF: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub violating: Vec<usize>,
    pub min_det: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    /// Bond sum Σ εJ(|Δu|/ε), reported whether or not the state is admissible.
    pub bond_sum: f64,
    pub per_direction: [f64; 3],
    pub bond_measure: Vec<f64>,
    pub s_threshold: f64,
    pub bad_triangles: Vec<usize>,
    pub admissible: bool,
    pub violating: Vec<usize>,
    pub min_det: f64,
}

impl EnergyReport {
    /// E_ε, or `None` outside the admissible set.
    pub fn total(&self) -> Option<f64> {
        self.admissible.then_some(self.bond_sum)
    }
}

pub fn check_size(domain: &LatticeDomain, u: &[Vec2]) -> Result<(), Error> {
    if u.len() != domain.n_nodes() {
        return Err(Error::SizeMismatch { expected: domain.n_nodes(), got: u.len() });
    }
    if u.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::InvalidParameter("displacement has non-finite values".into()));
    }
    Ok(())
}

/// Per-bond atoms εJ(|u(i)−u(j)|/ε) of the energy measure.
pub fn bond_measure(domain: &LatticeDomain, u: &[Vec2], pot: &Potential) -> Vec<f64> {
    let eps = domain.epsilon;
    domain.bonds.par_iter().map(|b| eps * pot.j((u[b.j] - u[b.i]).norm() / eps)).collect()
}

/// Constant gradient of the affine interpolation on triangle `t`.
pub fn triangle_gradient(domain: &LatticeDomain, u: &[Vec2], t: usize) -> Mat2 {
    let [a, b, c] = domain.triangles[t];
    let p = Mat2::from_columns(&[domain.nodes[b] - domain.nodes[a], domain.nodes[c] - domain.nodes[a]]);
    let y = Mat2::from_columns(&[u[b] - u[a], u[c] - u[a]]);
    y * p.try_inverse().expect("reference triangles are non-degenerate")
}

/// det ∇u on triangle `t`, computed from deformed edge vectors.
pub fn triangle_det(domain: &LatticeDomain, u: &[Vec2], t: usize) -> f64 {
    let [a, b, c] = domain.triangles[t];
    cross(u[b] - u[a], u[c] - u[a]) / (2.0 * domain.reference_area(t))
}

fn det_passes(domain: &LatticeDomain, u: &[Vec2], t: usize, margin: f64) -> (bool, f64) {
    let d = triangle_det(domain, u, t);
    let g = triangle_gradient(domain, u, t);
    let floor = DET_ROUNDOFF * g.norm_squared();
    (d > margin * 0.5 * SQRT3 && d > floor, d)
}

/// Strict admissibility: det ∇u > margin·√3/2 on every triangle.
pub fn is_admissible(domain: &LatticeDomain, u: &[Vec2], margin: f64) -> Admissibility {
    let res: Vec<(bool, f64)> =
        (0..domain.triangles.len()).into_par_iter().map(|t| det_passes(domain, u, t, margin)).collect();
    let violating: Vec<usize> = res.iter().enumerate().filter(|(_, r)| !r.0).map(|(t, _)| t).collect();
    let min_det = res.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Admissibility { admissible: violating.is_empty(), violating, min_det }
}

/// Σ_k J(|∇u η_k|) on triangle `t`, in units of energy per bond.
pub fn triangle_energy(domain: &LatticeDomain, u: &[Vec2], t: usize, pot: &Potential) -> f64 {
    let g = triangle_gradient(domain, u, t);
    (1..=3).map(|k| pot.j((g * LatticeVectors::eta(k)).norm())).sum()
}

pub fn total_energy_with(
    domain: &LatticeDomain,
    u: &[Vec2],
    pot: &Potential,
    s_threshold: f64,
    margin: f64,
) -> Result<EnergyReport, Error> {
    check_size(domain, u)?;
    let measure = bond_measure(domain, u, pot);
    let bond_sum = fixed_order_sum(&measure);
    let mut per_direction = [0.0; 3];
    for (k, pd) in per_direction.iter_mut().enumerate() {
        let masked: Vec<f64> =
            domain.bonds.iter().zip(&measure).map(|(b, w)| if b.dir as usize == k + 1 { *w } else { 0.0 }).collect();
        *pd = fixed_order_sum(&masked);
    }
    let bad_triangles =
        (0..domain.triangles.len()).filter(|&t| triangle_energy(domain, u, t, pot) > s_threshold * pot.j_inf).collect();
    let adm = is_admissible(domain, u, margin);
    Ok(EnergyReport {
        bond_sum,
        per_direction,
        bond_measure: measure,
        s_threshold,
        bad_triangles,
        admissible: adm.admissible,
        violating: adm.violating,
        min_det: adm.min_det,
    })
}

/// Energy report with threshold s = 0.5 and strict margin 0.
pub fn total_energy(domain: &LatticeDomain, u: &[Vec2], pot: &Potential) -> Result<EnergyReport, Error> {
    total_energy_with(domain, u, pot, 0.5, 0.0)
}

/// E_ε^k: the bond sum restricted to direction k.
pub fn directional_energy(domain: &LatticeDomain, u: &[Vec2], pot: &Potential, k: u8) -> Result<f64, Error> {
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidParameter(format!("direction must be 1, 2 or 3, got {k}")));
    }
    check_size(domain, u)?;
    let eps = domain.epsilon;
    let terms: Vec<f64> = domain
        .bonds
        .iter()
        .map(|b| if b.dir == k { eps * pot.j((u[b.j] - u[b.i]).norm() / eps) } else { 0.0 })
        .collect();
    Ok(fixed_order_sum(&terms))
}

/// Frobenius distance from A to SO(2).
pub fn dist_so2(a: &Mat2) -> f64 {
    let svd = a.svd(false, false);
    let (s1, s2) =
        (svd.singular_values[0].max(svd.singular_values[1]), svd.singular_values[0].min(svd.singular_values[1]));
    if a.determinant() >= 0.0 {
        ((s1 - 1.0).powi(2) + (s2 - 1.0).powi(2)).sqrt()
    } else {
        ((s1 - 1.0).powi(2) + (s2 + 1.0).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundStateScan {
    pub cutoff_radius: f64,
    pub r: Vec<f64>,
    pub e: Vec<f64>,
    pub r_bar: f64,
    pub e_min: f64,
    /// Particle density ρ = 2/(√3 r²) of the triangular lattice with spacing r.
    pub rho: Vec<f64>,
    pub f: Vec<f64>,
}

/// Per-particle energy e(r) = ½ Σ_{k≠0, ‖k‖≤cutoff} J(r‖k‖) over the unit triangular lattice.
pub fn ground_state_scan(
    pot: &Potential,
    r_min: f64,
    r_max: f64,
    samples: usize,
    cutoff_radius: f64,
) -> Result<GroundStateScan, Error> {
    if !(r_min > 0.0 && r_max > r_min && samples >= 2) {
        return Err(Error::InvalidParameter("need 0 < r_min < r_max and at least 2 samples".into()));
    }
    if !(cutoff_radius >= 1.0) {
        return Err(Error::InvalidParameter("cutoff radius must include the nearest neighbours".into()));
    }
    let n = cutoff_radius.ceil() as i64 + 1;
    let mut norms = Vec::new();
    for b in -2 * n..=2 * n {
        for a in -2 * n..=2 * n {
            if a == 0 && b == 0 {
                continue;
            }
            let x = a as f64 + 0.5 * b as f64;
            let y = 0.5 * SQRT3 * b as f64;
            let d = (x * x + y * y).sqrt();
            if d <= cutoff_radius + 1e-12 {
                norms.push(d);
            }
        }
    }
    norms.sort_by(f64::total_cmp);
    let r: Vec<f64> = (0..samples).map(|i| r_min + (r_max - r_min) * i as f64 / (samples - 1) as f64).collect();
    let e: Vec<f64> = r.iter().map(|&ri| 0.5 * norms.iter().map(|&d| pot.j(ri * d)).sum::<f64>()).collect();
    let (imin, e_min) =
        e.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &x)| if x < acc.1 { (i, x) } else { acc });
    let rho: Vec<f64> = r.iter().map(|&ri| 2.0 / (SQRT3 * ri * ri)).collect();
    let f = rho.iter().zip(&e).map(|(p, x)| p * x).collect();
    Ok(GroundStateScan { cutoff_radius, r_bar: r[imin], e_min, r, e, rho, f })
}
