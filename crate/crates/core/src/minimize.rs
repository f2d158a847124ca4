//! Barrier-augmented gradient descent on the discrete energy under clamped boundary layers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{self, EnergyReport, Potential};
use crate::geom::{self, cross, perp, Mat2, Vec2};
use crate::lattice::LatticeDomain;
use crate::{fixed_order_sum, Error};

/// Map prescribed on a clamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "kebab-case")]
pub enum Prescription {
    /// x ↦ A x + b, with A given by rows.
    Affine { a: [[f64; 2]; 2], b: Vec2 },
    /// x ↦ R(angle) x + q.
    Rigid { angle: f64, q: Vec2 },
}

impl Prescription {
    pub fn identity() -> Self {
        Prescription::Rigid { angle: 0.0, q: Vec2::zeros() }
    }

    pub fn apply(&self, x: Vec2) -> Vec2 {
        match *self {
            Prescription::Affine { a, b } => Mat2::new(a[0][0], a[0][1], a[1][0], a[1][1]) * x + b,
            Prescription::Rigid { angle, q } => geom::rotation(angle) * x + q,
        }
    }

    /// Fraction `t` of the way from the identity: A ↦ I + t(A − I), b ↦ t b, angle ↦ t angle.
    pub fn scaled(&self, t: f64) -> Self {
        match *self {
            Prescription::Affine { a, b } => Prescription::Affine {
                a: [[1.0 + t * (a[0][0] - 1.0), t * a[0][1]], [t * a[1][0], 1.0 + t * (a[1][1] - 1.0)]],
                b: b * t,
            },
            Prescription::Rigid { angle, q } => Prescription::Rigid { angle: angle * t, q: q * t },
        }
    }
}

/// Nodes within `width` of the listed polygon edges (edge k joins vertices k and k+1) follow `map`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clamp {
    pub edges: Vec<usize>,
    pub width: f64,
    pub map: Prescription,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub clamps: Vec<Clamp>,
}

impl BoundaryCondition {
    pub fn scaled(&self, t: f64) -> Self {
        Self { clamps: self.clamps.iter().map(|c| Clamp { map: c.map.scaled(t), ..c.clone() }).collect() }
    }
}

fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    let t = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

impl Clamp {
    fn distance(&self, domain: &LatticeDomain, x: Vec2) -> Result<f64, Error> {
        let poly = &domain.polygon;
        let n = poly.len();
        self.edges
            .iter()
            .map(|&k| {
                if k >= n {
                    Err(Error::InvalidParameter(format!("polygon has no edge {k}")))
                } else {
                    Ok(segment_distance(x, poly[k], poly[(k + 1) % n]))
                }
            })
            .try_fold(f64::INFINITY, |m, d| d.map(|d| m.min(d)))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClampedState {
    pub u: Vec<Vec2>,
    /// Prescribed position of clamped nodes.
    pub fixed: Vec<Option<Vec2>>,
    /// Triangles with all vertices clamped and det ≤ 0.
    pub violating: Vec<usize>,
}

/// Identity away from the clamps and the prescribed maps on them.
pub fn apply_boundary_condition(domain: &LatticeDomain, bc: &BoundaryCondition) -> Result<ClampedState, Error> {
    let tol = 1e-9 * domain.epsilon;
    let mut fixed: Vec<Option<Vec2>> = vec![None; domain.n_nodes()];
    for c in &bc.clamps {
        if !(c.width >= 0.0) {
            return Err(Error::InvalidParameter("clamp width must be nonnegative".into()));
        }
        for (n, &x) in domain.nodes.iter().enumerate() {
            if c.distance(domain, x)? <= c.width + tol {
                let y = c.map.apply(x);
                if !(y.x.is_finite() && y.y.is_finite()) {
                    return Err(Error::InvalidParameter("prescribed value is not finite".into()));
                }
                match fixed[n] {
                    Some(z) if (z - y).norm() > 1e-12 * (1.0 + y.norm()) => return Err(Error::ConflictingClamp(n)),
                    _ => fixed[n] = Some(y),
                }
            }
        }
    }
    let u: Vec<Vec2> = domain.nodes.iter().zip(&fixed).map(|(&x, f)| f.unwrap_or(x)).collect();
    let violating = (0..domain.triangles.len())
        .filter(|&t| {
            domain.triangles[t].iter().all(|&n| fixed[n].is_some()) && energy::triangle_det(domain, &u, t) <= 0.0
        })
        .collect();
    Ok(ClampedState { u, fixed, violating })
}

/// Blend of the clamp maps weighted by inverse distance to each clamp, exact on the clamps.
/// With `weak_layer = Some(x_w)`, free nodes right of x_w are shifted by 0.01ε along e₁.
pub fn interpolated_init(
    domain: &LatticeDomain,
    bc: &BoundaryCondition,
    weak_layer: Option<f64>,
) -> Result<ClampedState, Error> {
    let mut st = apply_boundary_condition(domain, bc)?;
    for n in 0..domain.n_nodes() {
        if st.fixed[n].is_some() {
            continue;
        }
        let x = domain.nodes[n];
        if !bc.clamps.is_empty() {
            let (mut acc, mut wsum) = (Vec2::zeros(), 0.0);
            for c in &bc.clamps {
                let w = 1.0 / (c.distance(domain, x)? - c.width).max(1e-12);
                acc += c.map.apply(x) * w;
                wsum += w;
            }
            st.u[n] = acc / wsum;
        }
        if let Some(xw) = weak_layer {
            if x.x > xw {
                st.u[n].x += 0.01 * domain.epsilon;
            }
        }
    }
    Ok(st)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverParams {
    /// Barrier weights, strictly decreasing and positive.
    pub mu: Vec<f64>,
    pub max_iter: usize,
    /// Stop a stage when the Euclidean gradient norm falls below this.
    pub grad_tol: f64,
    /// Armijo constant.
    pub armijo: f64,
    pub backtrack: f64,
    /// Fraction of the largest determinant-preserving step that may be taken.
    pub feasible_fraction: f64,
}

impl SolverParams {
    /// μ_k = 10⁻² ε 10⁻ᵏ for k < stages.
    pub fn for_epsilon(epsilon: f64, stages: usize) -> Self {
        Self {
            mu: (0..stages).map(|k| 1e-2 * epsilon * 0.1f64.powi(k as i32)).collect(),
            max_iter: 5000,
            grad_tol: 1e-6,
            armijo: 1e-4,
            backtrack: 0.5,
            feasible_fraction: 0.9,
        }
    }

    fn validate(&self) -> Result<(), Error> {
        let ok = !self.mu.is_empty()
            && self.mu.iter().all(|&m| m > 0.0)
            && self.mu.windows(2).all(|w| w[1] < w[0])
            && self.grad_tol > 0.0
            && self.armijo > 0.0
            && self.armijo < 1.0
            && self.backtrack > 0.0
            && self.backtrack < 1.0
            && self.feasible_fraction > 0.0
            && self.feasible_fraction < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("solver parameters must be positive with a decreasing barrier schedule".into()))
        }
    }
}

/// E_ε(u) − μ Σ_T log det ∇u_T, or +∞ outside the admissible set.
pub fn objective(domain: &LatticeDomain, u: &[Vec2], pot: &Potential, mu: f64) -> f64 {
    let e = fixed_order_sum(&energy::bond_measure(domain, u, pot));
    let logs: Vec<f64> = (0..domain.triangles.len())
        .into_par_iter()
        .map(|t| {
            let d = energy::triangle_det(domain, u, t);
            if d > 0.0 {
                d.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let b = fixed_order_sum(&logs);
    if b.is_finite() {
        e - mu * b
    } else {
        f64::INFINITY
    }
}

/// Gradient of `objective` with respect to every node position.
pub fn objective_gradient(domain: &LatticeDomain, u: &[Vec2], pot: &Potential, mu: f64) -> Vec<Vec2> {
    let eps = domain.epsilon;
    let bond_terms: Vec<Vec2> = domain
        .bonds
        .par_iter()
        .map(|b| {
            let d = u[b.j] - u[b.i];
            let r = d.norm();
            d * (pot.dj(r / eps) / r)
        })
        .collect();
    let tri_terms: Vec<[Vec2; 3]> = (0..domain.triangles.len())
        .into_par_iter()
        .map(|t| {
            let [a, b, c] = domain.triangles[t];
            let p = u[b] - u[a];
            let q = u[c] - u[a];
            let cr = cross(p, q);
            // ∂cross/∂p = (q.y, −q.x), ∂cross/∂q = p^⊥; −μ log(cross / 2A) differentiates to −μ/cross times these.
            let gp = Vec2::new(q.y, -q.x) * (-mu / cr);
            let gq = perp(p) * (-mu / cr);
            [-(gp + gq), gp, gq]
        })
        .collect();
    let mut g = vec![Vec2::zeros(); domain.n_nodes()];
    for (b, t) in domain.bonds.iter().zip(&bond_terms) {
        g[b.j] += t;
        g[b.i] -= t;
    }
    for (tri, t) in domain.triangles.iter().zip(&tri_terms) {
        for k in 0..3 {
            g[tri[k]] += t[k];
        }
    }
    g
}

/// Largest α with det(u + α d) > 0 on every triangle, and the triangle that limits it.
fn max_feasible_step(domain: &LatticeDomain, u: &[Vec2], d: &[Vec2]) -> (f64, Option<usize>) {
    let roots: Vec<(f64, usize)> = (0..domain.triangles.len())
        .into_par_iter()
        .map(|t| {
            let [a, b, c] = domain.triangles[t];
            let (p, q) = (u[b] - u[a], u[c] - u[a]);
            let (dp, dq) = (d[b] - d[a], d[c] - d[a]);
            // cross(p + α dp, q + α dq) = c0 + c1 α + c2 α²
            let c0 = cross(p, q);
            let c1 = cross(p, dq) + cross(dp, q);
            let c2 = cross(dp, dq);
            (smallest_positive_root(c0, c1, c2), t)
        })
        .collect();
    roots.into_iter().fold((f64::INFINITY, None), |(m, mt), (r, t)| if r < m { (r, Some(t)) } else { (m, mt) })
}

fn smallest_positive_root(c0: f64, c1: f64, c2: f64) -> f64 {
    let scale = c0.abs().max(c1.abs()).max(c2.abs());
    if c2.abs() <= 1e-14 * scale {
        return if c1 < 0.0 { -c0 / c1 } else { f64::INFINITY };
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    // Numerically stable pair of roots.
    let qv = -0.5 * (c1 + c1.signum() * sq);
    let r1 = qv / c2;
    let r2 = if qv != 0.0 { c0 / qv } else { f64::INFINITY };
    [r1, r2].into_iter().filter(|&r| r > 0.0).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub mu: f64,
    pub energy: f64,
    pub min_det: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimizeOutcome {
    pub u: Vec<Vec2>,
    pub report: EnergyReport,
    pub trace: Vec<TraceRow>,
    /// Whether the last stage reached the gradient tolerance.
    pub converged: bool,
}

fn norm(g: &[Vec2]) -> f64 {
    g.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt()
}

fn dot(a: &[Vec2], b: &[Vec2]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

/// Gradient descent with Barzilai–Borwein steps, a determinant-preserving step cap
/// and Armijo backtracking, over a decreasing barrier schedule.
pub fn minimize_energy(
    domain: &LatticeDomain,
    bc: &BoundaryCondition,
    init: &[Vec2],
    pot: &Potential,
    params: &SolverParams,
    s_threshold: f64,
) -> Result<MinimizeOutcome, Error> {
    params.validate()?;
    energy::check_size(domain, init)?;
    let clamp = apply_boundary_condition(domain, bc)?;
    for (n, f) in clamp.fixed.iter().enumerate() {
        if let Some(y) = f {
            if (init[n] - y).norm() > 1e-9 * (1.0 + y.norm()) {
                return Err(Error::InvalidParameter(format!(
                    "initial state violates the boundary condition at node {n}"
                )));
            }
        }
    }
    let adm = energy::is_admissible(domain, init, 0.0);
    if let Some(&t) = adm.violating.first() {
        return Err(Error::InadmissibleInit(t));
    }
    let free: Vec<bool> = clamp.fixed.iter().map(|f| f.is_none()).collect();
    let project = |g: &mut Vec<Vec2>| {
        for (gi, &fr) in g.iter_mut().zip(&free) {
            if !fr {
                *gi = Vec2::zeros();
            }
        }
    };
    let mut u = init.to_vec();
    let mut trace = Vec::new();
    let mut iteration = 0usize;
    let mut converged = false;
    for &mu in &params.mu {
        converged = false;
        let mut f = objective(domain, &u, pot, mu);
        let mut g = objective_gradient(domain, &u, pot, mu);
        project(&mut g);
        let mut prev: Option<(Vec<Vec2>, Vec<Vec2>)> = None;
        for _ in 0..params.max_iter {
            let gn = norm(&g);
            let min_det = energy::is_admissible(domain, &u, 0.0).min_det;
            debug_assert!(min_det > 0.0);
            trace.push(TraceRow {
                iteration,
                mu,
                energy: fixed_order_sum(&energy::bond_measure(domain, &u, pot)),
                min_det,
                grad_norm: gn,
            });
            iteration += 1;
            if gn < params.grad_tol {
                converged = true;
                break;
            }
            let dir: Vec<Vec2> = g.iter().map(|x| -x).collect();
            let mut alpha = match &prev {
                Some((du, dg)) => {
                    let sy = dot(du, dg);
                    if sy > 0.0 {
                        dot(du, du) / sy
                    } else {
                        0.1 * domain.epsilon / gn
                    }
                }
                None => 0.1 * domain.epsilon / gn,
            };
            let (cap, blocker) = max_feasible_step(domain, &u, &dir);
            alpha = alpha.min(params.feasible_fraction * cap);
            let mut accepted = None;
            for _ in 0..80 {
                let trial: Vec<Vec2> = u.iter().zip(&dir).map(|(x, d)| x + d * alpha).collect();
                let ft = objective(domain, &trial, pot, mu);
                if ft <= f - params.armijo * alpha * gn * gn {
                    accepted = Some((trial, ft));
                    break;
                }
                alpha *= params.backtrack;
            }
            let Some((trial, ft)) = accepted else {
                if cap < 1e-14 * domain.epsilon / gn {
                    return Err(Error::LineSearchBlocked(blocker.unwrap_or(0)));
                }
                break;
            };
            if ft >= f {
                // Progress is below the rounding of the objective.
                converged = gn < params.grad_tol;
                break;
            }
            let mut gt = objective_gradient(domain, &trial, pot, mu);
            project(&mut gt);
            let du: Vec<Vec2> = trial.iter().zip(&u).map(|(a, b)| a - b).collect();
            let dg: Vec<Vec2> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
            prev = Some((du, dg));
            u = trial;
            f = ft;
            g = gt;
        }
    }
    let report = energy::total_energy_with(domain, &u, pot, s_threshold, 0.0)?;
    Ok(MinimizeOutcome { u, report, trace, converged })
}

/// Quasi-static loading: the boundary data is ramped from the identity in `steps`
/// equal increments and the state is relaxed after each one. The free nodes
/// follow the increment of the interpolated initial guess before relaxing.
pub fn minimize_with_loading(
    domain: &LatticeDomain,
    bc: &BoundaryCondition,
    pot: &Potential,
    params: &SolverParams,
    s_threshold: f64,
    steps: usize,
    weak_layer: Option<f64>,
) -> Result<MinimizeOutcome, Error> {
    if steps == 0 {
        return Err(Error::InvalidParameter("loading needs at least one step".into()));
    }
    let mut prev = interpolated_init(domain, &bc.scaled(0.0), weak_layer)?.u;
    let mut u = prev.clone();
    let mut trace: Vec<TraceRow> = Vec::new();
    let mut last = None;
    for k in 1..=steps {
        let lin = interpolated_init(domain, &bc.scaled(k as f64 / steps as f64), weak_layer)?.u;
        let mut next: Vec<Vec2> = u.iter().zip(lin.iter().zip(&prev)).map(|(x, (a, b))| x + (a - b)).collect();
        if !energy::is_admissible(domain, &next, 0.0).admissible {
            next = lin.clone();
        }
        let offset = trace.last().map_or(0, |r| r.iteration + 1);
        let out = minimize_energy(domain, &bc.scaled(k as f64 / steps as f64), &next, pot, params, s_threshold)?;
        trace.extend(out.trace.iter().map(|r| TraceRow { iteration: r.iteration + offset, ..r.clone() }));
        u = out.u.clone();
        prev = lin;
        last = Some(out);
    }
    let mut out = last.expect("at least one step");
    out.trace = trace;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::DomainSpec;
    use crate::geom::v;

    fn all_edges(domain: &LatticeDomain, map: Prescription) -> BoundaryCondition {
        BoundaryCondition {
            clamps: vec![Clamp { edges: (0..domain.polygon.len()).collect(), width: 0.5 * domain.epsilon, map }],
        }
    }

    #[test]
    fn identity_stays_put() {
        let d = DomainSpec::unit_square(1.0 / 8.0).build().unwrap();
        let bc = all_edges(&d, Prescription::identity());
        let init = interpolated_init(&d, &bc, None).unwrap();
        let out =
            minimize_energy(&d, &bc, &init.u, &Potential::default(), &SolverParams::for_epsilon(d.epsilon, 3), 0.5)
                .unwrap();
        assert!(out.report.admissible);
        // The barrier moves nodes with incomplete stars by O(μ).
        assert!(out.report.bond_sum < 1e-9, "{}", out.report.bond_sum);
        assert!(out.converged);
    }

    #[test]
    fn equal_rotations_give_global_rotation() {
        let d = DomainSpec::unit_square(1.0 / 8.0).build().unwrap();
        let m = Prescription::Rigid { angle: 0.4, q: v(0.1, 0.2) };
        let bc = BoundaryCondition {
            clamps: vec![Clamp { edges: vec![1], width: 0.1, map: m }, Clamp { edges: vec![3], width: 0.1, map: m }],
        };
        let init = interpolated_init(&d, &bc, None).unwrap();
        for (x, y) in d.nodes.iter().zip(&init.u) {
            assert!((m.apply(*x) - y).norm() < 1e-12);
        }
        assert!(energy::is_admissible(&d, &init.u, 0.0).admissible);
    }

    #[test]
    fn reflection_clamp_is_reported() {
        let d = DomainSpec::unit_square(1.0 / 8.0).build().unwrap();
        let bc = all_edges(&d, Prescription::Affine { a: [[-1.0, 0.0], [0.0, 1.0]], b: v(0.0, 0.0) });
        let st = apply_boundary_condition(&d, &bc).unwrap();
        assert!(!st.violating.is_empty());
    }

    #[test]
    fn conflicting_clamps_rejected() {
        let d = DomainSpec::unit_square(1.0 / 8.0).build().unwrap();
        let bc = BoundaryCondition {
            clamps: vec![
                Clamp { edges: vec![0], width: 0.0, map: Prescription::identity() },
                Clamp { edges: vec![1], width: 0.0, map: Prescription::Rigid { angle: 0.0, q: v(0.1, 0.0) } },
            ],
        };
        assert!(matches!(apply_boundary_condition(&d, &bc), Err(Error::ConflictingClamp(_))));
    }

    #[test]
    fn quadratic_roots() {
        // (1 − α)(2 − α) = 2 − 3α + α²
        assert!((smallest_positive_root(2.0, -3.0, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(smallest_positive_root(1.0, 1.0, 0.0), f64::INFINITY);
        assert!((smallest_positive_root(1.0, -2.0, 0.0) - 0.5).abs() < 1e-15);
    }
}
