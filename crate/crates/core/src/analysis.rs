//! Good and bad triangles, slicing lower bounds, rigid clusters, the opening
//! crack diagnostic and convergence tables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{self, Potential};
use crate::geom::{self, cross, perp, Vec2};
use crate::lattice::LatticeDomain;
use crate::{fixed_order_sum, Error};

fn check_s(s: f64) -> Result<(), Error> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("threshold s must lie in (0,1), got {s}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TriangleClassification {
    pub s: f64,
    /// Triangles with Σ_k J(|∇u η_k|) > s J∞.
    pub bad: Vec<usize>,
    /// Per direction, bonds with J(|Δu|/ε) ≥ s J∞.
    pub bad_bonds: [Vec<usize>; 3],
    /// ε · #bad.
    pub surface_proxy: f64,
}

impl TriangleClassification {
    pub fn counts(&self) -> [usize; 3] {
        [self.bad_bonds[0].len(), self.bad_bonds[1].len(), self.bad_bonds[2].len()]
    }
}

fn bond_is_bad(domain: &LatticeDomain, u: &[Vec2], pot: &Potential, s: f64, b: usize) -> bool {
    let bd = domain.bonds[b];
    pot.j((u[bd.j] - u[bd.i]).norm() / domain.epsilon) >= s * pot.j_inf
}

pub fn classify_triangles(
    domain: &LatticeDomain,
    u: &[Vec2],
    pot: &Potential,
    s: f64,
) -> Result<TriangleClassification, Error> {
    check_s(s)?;
    energy::check_size(domain, u)?;
    let bad: Vec<usize> = (0..domain.triangles.len())
        .into_par_iter()
        .filter(|&t| energy::triangle_energy(domain, u, t, pot) > s * pot.j_inf)
        .collect();
    let mut bad_bonds: [Vec<usize>; 3] = Default::default();
    for b in 0..domain.bonds.len() {
        if bond_is_bad(domain, u, pot, s, b) {
            bad_bonds[domain.bonds[b].dir as usize - 1].push(b);
        }
    }
    Ok(TriangleClassification { s, surface_proxy: domain.epsilon * bad.len() as f64, bad, bad_bonds })
}

/// Σ_k s J∞ ε #(bad bonds in direction k).
///
/// Summed in bond order with the same reduction as the energy, so that the
/// termwise inequality survives rounding and the bound never exceeds E_ε.
pub fn slicing_lower_bound(domain: &LatticeDomain, u: &[Vec2], pot: &Potential, s: f64) -> Result<f64, Error> {
    check_s(s)?;
    energy::check_size(domain, u)?;
    let eps = domain.epsilon;
    let atom = eps * (s * pot.j_inf);
    let terms: Vec<f64> = (0..domain.bonds.len())
        .into_par_iter()
        .map(|b| if bond_is_bad(domain, u, pot, s, b) { atom } else { 0.0 })
        .collect();
    Ok(fixed_order_sum(&terms))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cluster {
    pub triangles: Vec<usize>,
    pub nodes: Vec<usize>,
    pub angle: f64,
    pub q: Vec2,
    /// RMS distance between the fitted rigid map and u over the cluster nodes.
    pub residual: f64,
}

impl Cluster {
    pub fn apply(&self, x: Vec2) -> Vec2 {
        geom::rotation(self.angle) * x + self.q
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RigidPartition {
    pub s: f64,
    /// Largest first.
    pub clusters: Vec<Cluster>,
}

/// Rotation and translation minimizing Σ |R x + q − y|² with det R = 1.
pub fn fit_rotation(x: &[Vec2], y: &[Vec2]) -> (f64, Vec2, f64) {
    let n = x.len() as f64;
    let cx = x.iter().sum::<Vec2>() / n;
    let cy = y.iter().sum::<Vec2>() / n;
    let (mut sc, mut ss) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (a, b) = (a - cx, b - cy);
        sc += a.dot(&b);
        ss += cross(a, b);
    }
    let angle = ss.atan2(sc);
    let r = geom::rotation(angle);
    let q = cy - r * cx;
    let res = (x.iter().zip(y).map(|(a, b)| (r * a + q - b).norm_squared()).sum::<f64>() / n).sqrt();
    (angle, q, res)
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, a: usize) -> usize {
        let mut r = a;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut a = a;
        while self.0[a] != r {
            let next = self.0[a];
            self.0[a] = r;
            a = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Edge-connected clusters of the given triangles with a rigid fit each.
fn clusters_of(domain: &LatticeDomain, u: &[Vec2], triangles: &[usize]) -> Vec<Cluster> {
    let mut keep = vec![false; domain.triangles.len()];
    for &t in triangles {
        keep[t] = true;
    }
    let mut dsu = Dsu((0..domain.triangles.len()).collect());
    for ts in domain.bond_triangles().values() {
        if let [a, b] = ts[..] {
            if keep[a] && keep[b] {
                dsu.union(a, b);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for &t in triangles {
        groups.entry(dsu.find(t)).or_default().push(t);
    }
    let mut out: Vec<Cluster> = groups
        .into_values()
        .map(|tris| {
            let mut nodes: Vec<usize> = tris.iter().flat_map(|&t| domain.triangles[t]).collect();
            nodes.sort_unstable();
            nodes.dedup();
            let x: Vec<Vec2> = nodes.iter().map(|&n| domain.nodes[n]).collect();
            let y: Vec<Vec2> = nodes.iter().map(|&n| u[n]).collect();
            let (angle, q, residual) = fit_rotation(&x, &y);
            Cluster { triangles: tris, nodes, angle, q, residual }
        })
        .collect();
    out.sort_by(|a, b| b.triangles.len().cmp(&a.triangles.len()).then(a.triangles[0].cmp(&b.triangles[0])));
    out
}

pub fn extract_rigid_partition(
    domain: &LatticeDomain,
    u: &[Vec2],
    pot: &Potential,
    s: f64,
) -> Result<RigidPartition, Error> {
    let c = classify_triangles(domain, u, pot, s)?;
    let mut bad = vec![false; domain.triangles.len()];
    for &t in &c.bad {
        bad[t] = true;
    }
    let good: Vec<usize> = (0..domain.triangles.len()).filter(|&t| !bad[t]).collect();
    Ok(RigidPartition { s, clusters: clusters_of(domain, u, &good) })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpeningDiagnostic {
    pub x0: Vec2,
    pub rho: f64,
    pub nu: Vec2,
    /// μ_ε(Q)/ρ.
    pub density: f64,
    pub phi: f64,
    /// density ≤ φ(ν)(1 + tol).
    pub hypothesis_met: bool,
    /// Fewer than two clusters in the square, or no jump.
    pub inconclusive: bool,
    pub jump: Vec2,
    pub angle_minus: f64,
    pub angle_plus: f64,
    /// ⟨u⁺ − u⁻, R⁺ν⟩.
    pub plus_side: f64,
    /// ⟨u⁺ − u⁻, R⁻ν⟩.
    pub minus_side: f64,
    /// ⟨u⁺ − u⁻, R±ν₁⟩ and ⟨u⁺ − u⁻, R±ν₂⟩ from the simplex decomposition, when ν ∉ D.
    pub decomposition: Option<[f64; 4]>,
    /// The implication "hypothesis ⇒ both inner products ≥ −tol |jump|".
    pub implication_holds: bool,
}

/// Local energy density in the square Q^ν_ρ(x₀) and the opening inner products of the two largest clusters inside it.
pub fn opening_crack_diagnostic(
    domain: &LatticeDomain,
    u: &[Vec2],
    pot: &Potential,
    x0: Vec2,
    rho: f64,
    nu: Vec2,
    s: f64,
    tol: f64,
) -> Result<OpeningDiagnostic, Error> {
    energy::check_size(domain, u)?;
    if !(rho > 2.0 * domain.epsilon) {
        return Err(Error::InvalidParameter(format!("square side {rho} must exceed 2ε")));
    }
    let nu = nu.normalize();
    let tau = perp(nu);
    let inside = |x: Vec2| {
        let r = x - x0;
        r.dot(&nu).abs() <= 0.5 * rho && r.dot(&tau).abs() <= 0.5 * rho
    };
    let measure = energy::bond_measure(domain, u, pot);
    let local: Vec<f64> = domain
        .bonds
        .iter()
        .zip(&measure)
        .map(|(b, &m)| if inside((domain.nodes[b.i] + domain.nodes[b.j]) * 0.5) { m } else { 0.0 })
        .collect();
    let density = fixed_order_sum(&local) / rho;
    let phi = crate::surface::phi(nu, pot.j_inf);
    let hypothesis_met = density <= phi * (1.0 + tol);

    let c = classify_triangles(domain, u, pot, s)?;
    let mut bad = vec![false; domain.triangles.len()];
    for &t in &c.bad {
        bad[t] = true;
    }
    let good: Vec<usize> = (0..domain.triangles.len())
        .filter(|&t| !bad[t] && domain.triangles[t].iter().all(|&n| inside(domain.nodes[n])))
        .collect();
    let clusters = clusters_of(domain, u, &good);
    let mut report = OpeningDiagnostic {
        x0,
        rho,
        nu,
        density,
        phi,
        hypothesis_met,
        inconclusive: true,
        jump: Vec2::zeros(),
        angle_minus: 0.0,
        angle_plus: 0.0,
        plus_side: 0.0,
        minus_side: 0.0,
        decomposition: None,
        implication_holds: true,
    };
    if clusters.len() < 2 {
        return Ok(report);
    }
    let side = |cl: &Cluster| {
        let g = cl.nodes.iter().map(|&n| domain.nodes[n]).sum::<Vec2>() / cl.nodes.len() as f64;
        (g - x0).dot(&nu)
    };
    let (mut minus, mut plus) = (&clusters[0], &clusters[1]);
    if side(minus) > side(plus) {
        std::mem::swap(&mut minus, &mut plus);
    }
    let jump = plus.apply(x0) - minus.apply(x0);
    let (rm, rp) = (geom::rotation(minus.angle), geom::rotation(plus.angle));
    report.jump = jump;
    report.angle_minus = minus.angle;
    report.angle_plus = plus.angle;
    report.plus_side = jump.dot(&(rp * nu));
    report.minus_side = jump.dot(&(rm * nu));
    if !crate::lattice::LatticeVectors::is_coordinate_direction(nu) {
        let d = crate::surface::simplex_decompose(nu)?;
        report.decomposition =
            Some([jump.dot(&(rp * d.nu1)), jump.dot(&(rm * d.nu1)), jump.dot(&(rp * d.nu2)), jump.dot(&(rm * d.nu2))]);
    }
    let scale = jump.norm();
    report.inconclusive = scale <= 1e-9 * domain.epsilon;
    report.implication_holds = report.inconclusive
        || !hypothesis_met
        || (report.plus_side >= -tol * scale && report.minus_side >= -tol * scale);
    Ok(report)
}

/// Split of the bond energy into bonds below and at or above the threshold s J∞.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergySplit {
    pub elastic: f64,
    pub surface: f64,
}

pub fn energy_split(domain: &LatticeDomain, u: &[Vec2], pot: &Potential, s: f64) -> Result<EnergySplit, Error> {
    check_s(s)?;
    energy::check_size(domain, u)?;
    let m = energy::bond_measure(domain, u, pot);
    let (mut el, mut su) = (vec![0.0; m.len()], vec![0.0; m.len()]);
    for b in 0..m.len() {
        if bond_is_bad(domain, u, pot, s, b) {
            su[b] = m[b];
        } else {
            el[b] = m[b];
        }
    }
    Ok(EnergySplit { elastic: fixed_order_sum(&el), surface: fixed_order_sum(&su) })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub energy: f64,
    pub predicted: f64,
    /// |E − predicted| / predicted, or |E| when the prediction is zero.
    pub error: f64,
    pub admissible: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of log error against log ε over rows with positive error.
    pub order: Option<f64>,
    pub any_inadmissible: bool,
}

pub fn relative_error(energy: f64, predicted: f64) -> f64 {
    if predicted == 0.0 {
        energy.abs()
    } else {
        (energy - predicted).abs() / predicted.abs()
    }
}

/// Runs `run(ε)` for each ε (in parallel) and tabulates (energy, predicted, admissible).
pub fn convergence_study<F>(epsilons: &[f64], run: F) -> Result<ConvergenceTable, Error>
where
    F: Fn(f64) -> Result<(f64, f64, bool), Error> + Sync,
{
    if epsilons.is_empty() || epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("ε list must be nonempty and decreasing".into()));
    }
    let rows: Vec<ConvergenceRow> = epsilons
        .par_iter()
        .map(|&eps| {
            let (energy, predicted, admissible) = run(eps)?;
            Ok(ConvergenceRow { epsilon: eps, energy, predicted, error: relative_error(energy, predicted), admissible })
        })
        .collect::<Result<_, Error>>()?;
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.error > 0.0).map(|r| (r.epsilon.ln(), r.error.ln())).collect();
    let order = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    let any_inadmissible = rows.iter().any(|r| !r.admissible);
    Ok(ConvergenceTable { rows, order, any_inadmissible })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::DomainSpec;
    use crate::geom::v;

    #[test]
    fn identity_has_no_bad_triangles() {
        let d = DomainSpec::unit_square(1.0 / 16.0).build().unwrap();
        let pot = Potential::default();
        for s in [0.1, 0.5, 0.9] {
            let c = classify_triangles(&d, &d.nodes, &pot, s).unwrap();
            assert!(c.bad.is_empty());
            assert_eq!(slicing_lower_bound(&d, &d.nodes, &pot, s).unwrap(), 0.0);
        }
        assert!(classify_triangles(&d, &d.nodes, &pot, 1.0).is_err());
    }

    #[test]
    fn homothety_makes_every_triangle_bad() {
        let d = DomainSpec::unit_square(1.0 / 8.0).build().unwrap();
        let pot = Potential::default();
        let u: Vec<Vec2> = d.nodes.iter().map(|x| x * 2.0).collect();
        assert!((3.0 * pot.j(2.0) - 2.907).abs() < 1e-3);
        for s in [0.5, 0.9] {
            let c = classify_triangles(&d, &u, &pot, s).unwrap();
            assert_eq!(c.bad.len(), d.triangles.len());
            assert_eq!(c.counts().iter().sum::<usize>(), d.bonds.len());
        }
    }

    #[test]
    fn rotation_fit_is_exact() {
        let d = DomainSpec::unit_square(1.0 / 8.0).build().unwrap();
        let r = geom::rotation(30f64.to_radians());
        let u: Vec<Vec2> = d.nodes.iter().map(|x| r * x + v(0.3, -0.2)).collect();
        let p = extract_rigid_partition(&d, &u, &Potential::default(), 0.5).unwrap();
        assert_eq!(p.clusters.len(), 1);
        assert!((p.clusters[0].angle - 30f64.to_radians()).abs() < 1e-9);
        assert!(p.clusters[0].residual < 1e-12);
    }

    #[test]
    fn identity_diagnostic_is_inconclusive() {
        let d = DomainSpec::unit_square(1.0 / 32.0).build().unwrap();
        let r = opening_crack_diagnostic(&d, &d.nodes, &Potential::default(), v(0.5, 0.5), 0.5, v(0.0, 1.0), 0.5, 0.05)
            .unwrap();
        assert!(r.inconclusive && r.implication_holds);
        assert_eq!(r.density, 0.0);
    }

    #[test]
    fn convergence_order_of_known_sequence() {
        let t = convergence_study(&[0.1, 0.05, 0.025], |e| Ok((1.0 + e, 1.0, true))).unwrap();
        assert!((t.order.unwrap() - 1.0).abs() < 1e-9);
        let z = convergence_study(&[0.1, 0.05], |_| Ok((0.0, 0.0, true))).unwrap();
        assert!(z.order.is_none());
        assert!(convergence_study(&[0.05, 0.1], |_| Ok((0.0, 0.0, true))).is_err());
    }
}
