//! Detached rows of atoms along a crack line.
//!
//! Nodes of a chosen region whose row index (counted from the crack line on
//! the ν side) lies in 1..=n are removed from their region and mapped by their
//! own similarity x ↦ s R x + c. For fixed linear parts every triangle
//! determinant is affine in the translations c, so the translations are chosen
//! by a linear program maximizing the smallest determinant.

use serde::{Deserialize, Serialize};

use crate::energy;
use crate::geom::{self, cross, Mat2, Vec2, SQRT3};
use crate::lattice::LatticeDomain;
use crate::lp::{self, Affine};

/// x ↦ scale · R(angle) x + c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub angle: f64,
    pub scale: f64,
    pub c: Vec2,
}

impl Similarity {
    pub fn linear(&self) -> Mat2 {
        geom::rotation(self.angle) * self.scale
    }

    pub fn apply(&self, x: Vec2) -> Vec2 {
        self.linear() * x + self.c
    }
}

/// Which nodes become detached rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerSpec {
    pub point: Vec2,
    /// Coordinate-direction normal pointing into the rows.
    pub nu: Vec2,
    pub layers: usize,
    /// Only nodes whose base label equals this region are detached.
    pub region: usize,
    /// Optional window [t0, t1] for the coordinate along the line (from `point`, along −ν^⊥).
    pub window: Option<(f64, f64)>,
}

impl LayerSpec {
    /// Row index in 1..=layers for detached nodes, 0 otherwise.
    pub fn assign(&self, domain: &LatticeDomain, labels: &[usize]) -> Vec<usize> {
        let eps = domain.epsilon;
        let h = 0.5 * SQRT3 * eps;
        let tol = 1e-9 * eps;
        let nu = self.nu.normalize();
        let tau = -geom::perp(nu);
        domain
            .nodes
            .iter()
            .enumerate()
            .map(|(n, &x)| {
                if labels[n] != self.region {
                    return 0;
                }
                let s = (x - self.point).dot(&nu);
                if s <= tol {
                    return 0;
                }
                if let Some((t0, t1)) = self.window {
                    let t = (x - self.point).dot(&tau);
                    if t < t0 - tol || t > t1 + tol {
                        return 0;
                    }
                }
                let j = (s / h - 1e-6).ceil() as usize;
                if (1..=self.layers).contains(&j) {
                    j
                } else {
                    0
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerPlan {
    pub maps: Vec<Similarity>,
    /// Smallest determinant guaranteed by the linear program over the affine triangles.
    pub lp_margin: f64,
    /// Triangles left out of the program because their determinant is not affine.
    pub nonaffine: Vec<usize>,
}

/// Solve for the translations of detached rows with prescribed linear parts.
///
/// `base` holds the deformed positions of all nodes not in a row; `row` gives
/// each node's row (0 for none). Returns the plan and the full displacement.
pub fn build_layers(
    domain: &LatticeDomain,
    base: &[Vec2],
    row: &[usize],
    linear: &[(f64, f64)],
    bound: f64,
    subsample: usize,
) -> Option<(LayerPlan, Vec<Vec2>)> {
    let n = linear.len();
    let lin: Vec<Mat2> = linear.iter().map(|&(a, s)| geom::rotation(a) * s).collect();
    let pos0 = |v: usize| if row[v] > 0 { lin[row[v] - 1] * domain.nodes[v] } else { base[v] };
    let mut rows = Vec::new();
    let mut nonaffine = Vec::new();
    let involved: Vec<usize> =
        (0..domain.triangles.len()).filter(|&t| domain.triangles[t].iter().any(|&v| row[v] > 0)).collect();
    let step = subsample.max(1);
    for (k, &t) in involved.iter().enumerate() {
        let tri = domain.triangles[t];
        let groups: Vec<usize> = tri.iter().map(|&v| row[v]).collect();
        let mut distinct = groups.clone();
        distinct.sort();
        distinct.dedup();
        if distinct.len() == 3 {
            nonaffine.push(t);
            continue;
        }
        if k % step != 0 {
            continue;
        }
        let [a, b, c] = tri;
        let p = pos0(b) - pos0(a);
        let q = pos0(c) - pos0(a);
        let scale = 1.0 / (2.0 * domain.reference_area(t));
        let mut coeffs = vec![0.0; 2 * n];
        let mut add = |g: usize, sign: f64, other: Vec2, first: bool| {
            if g == 0 {
                return;
            }
            let i = 2 * (g - 1);
            if first {
                // cross(ΔC, Q) = ΔC.x Q.y − ΔC.y Q.x
                coeffs[i] += sign * other.y * scale;
                coeffs[i + 1] -= sign * other.x * scale;
            } else {
                // cross(P, ΔC) = P.x ΔC.y − P.y ΔC.x
                coeffs[i] -= sign * other.y * scale;
                coeffs[i + 1] += sign * other.x * scale;
            }
        };
        add(groups[1], 1.0, q, true);
        add(groups[0], -1.0, q, true);
        add(groups[2], 1.0, p, false);
        add(groups[0], -1.0, p, false);
        rows.push(Affine { coeffs, constant: cross(p, q) * scale });
    }
    let (x, margin) = lp::maximize_min(&rows, 2 * n, bound, 1e12)?;
    let maps: Vec<Similarity> = (0..n)
        .map(|k| Similarity { angle: linear[k].0, scale: linear[k].1, c: geom::v(x[2 * k], x[2 * k + 1]) })
        .collect();
    let u: Vec<Vec2> = (0..domain.n_nodes())
        .map(|v| if row[v] > 0 { maps[row[v] - 1].apply(domain.nodes[v]) } else { base[v] })
        .collect();
    Some((LayerPlan { maps, lp_margin: margin, nonaffine }, u))
}

/// Search over rotation schedules of rigid rows; returns the best admissible plan if any.
pub fn search_rigid_layers(
    domain: &LatticeDomain,
    base: &[Vec2],
    row: &[usize],
    layers: usize,
    bound: f64,
) -> Option<(LayerPlan, Vec<Vec2>)> {
    let candidates = rotation_schedules(layers);
    let sub = (row.iter().filter(|&&r| r > 0).count() / 150).max(1);
    let mut scored: Vec<(f64, Vec<f64>)> = candidates
        .into_iter()
        .filter_map(|angles| {
            let lin: Vec<(f64, f64)> = angles.iter().map(|&a| (a, 1.0)).collect();
            build_layers(domain, base, row, &lin, bound, sub).map(|(plan, _)| (plan.lp_margin, angles))
        })
        .filter(|(m, _)| *m > 0.0)
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    // J is linear in J∞, so the unit potential ranks candidates like any other.
    let pot = energy::Potential::default();
    let mut best: Option<(f64, LayerPlan, Vec<Vec2>)> = None;
    for (_, angles) in scored.into_iter().take(8) {
        let lin: Vec<(f64, f64)> = angles.iter().map(|&a| (a, 1.0)).collect();
        if let Some((plan, u)) = build_layers(domain, base, row, &lin, bound, 1) {
            if plan.lp_margin > 0.0 && energy::is_admissible(domain, &u, 0.0).admissible {
                let e = crate::fixed_order_sum(&energy::bond_measure(domain, &u, &pot));
                if best.as_ref().is_none_or(|b| e < b.0) {
                    best = Some((e, plan, u));
                }
            }
        }
    }
    best.map(|(_, plan, u)| (plan, u))
}

fn rotation_schedules(layers: usize) -> Vec<Vec<f64>> {
    let deg = |d: f64| d.to_radians();
    match layers {
        0 => vec![vec![]],
        1 => (0..24).map(|k| vec![deg(15.0 * k as f64)]).collect(),
        2 => {
            let mut out = Vec::new();
            for i in 0..24 {
                for j in 0..24 {
                    out.push(vec![deg(15.0 * i as f64), deg(15.0 * j as f64)]);
                }
            }
            out
        }
        n => {
            let mut out = Vec::new();
            for step in -8i32..=8 {
                for i in 0..24 {
                    let first = deg(15.0 * i as f64);
                    out.push((0..n).map(|k| first + deg(15.0 * step as f64) * k as f64).collect());
                }
            }
            out
        }
    }
}
