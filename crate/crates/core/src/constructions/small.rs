use serde::{Deserialize, Serialize};

use super::{node_labels, DomainSpec, PiecewiseRigidMap, Region, RegionShape, Rigid};
use crate::energy::{self, Potential};
use crate::geom::{self, perp, Vec2};
use crate::lattice::LatticeVectors;
use crate::Error;

/// Jump profile v: v⁻(x) = ω⁻ (x − x̄)^⊥ and v⁺(x) = w + ω⁺ (x − x̄)^⊥.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmallDeformationParams {
    pub nu: Vec2,
    pub xbar: Vec2,
    pub w: Vec2,
    #[serde(default)]
    pub omega_minus: f64,
    #[serde(default)]
    pub omega_plus: f64,
    pub epsilons: Vec<f64>,
    /// δ for each ε; defaults to ε^{1/4}.
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmallDeformationRow {
    pub epsilon: f64,
    pub delta: f64,
    pub admissible: bool,
    pub min_det: f64,
    pub energy: f64,
    /// ⟨v⁺ − v⁻, ν⟩ at x̄.
    pub v_normal: f64,
    /// ⟨u⁺ − u⁻, R⁺ν⟩ / δ at x̄, with R± the rotations of the polar factors of ∇u±.
    pub plus_side: f64,
    /// ⟨u⁺ − u⁻, R⁻ν⟩ / δ at x̄.
    pub minus_side: f64,
}

/// Builds u = id + δ v pointwise for every ε and reports admissibility and the opening inner products.
pub fn small_deformation_scaling(
    polygon: &[Vec2],
    p: &SmallDeformationParams,
    pot: &Potential,
) -> Result<Vec<SmallDeformationRow>, Error> {
    if !LatticeVectors::is_coordinate_direction(p.nu) {
        return Err(Error::InvalidParameter("small-deformation normal must be a coordinate direction".into()));
    }
    if let Some(d) = &p.deltas {
        if d.len() != p.epsilons.len() {
            return Err(Error::InvalidParameter("deltas and epsilons differ in length".into()));
        }
    }
    let nu = p.nu.normalize();
    let v_minus = |x: Vec2| perp(x - p.xbar) * p.omega_minus;
    let v_plus = |x: Vec2| p.w + perp(x - p.xbar) * p.omega_plus;
    let v_normal = (v_plus(p.xbar) - v_minus(p.xbar)).dot(&nu);
    // Only the labels are used from this map.
    let sides = PiecewiseRigidMap {
        regions: vec![
            Region { shape: RegionShape::All, map: Rigid::identity() },
            Region { shape: RegionShape::HalfPlane { point: p.xbar, normal: nu }, map: Rigid::identity() },
        ],
        cracks: vec![],
    };
    p.epsilons
        .iter()
        .enumerate()
        .map(|(k, &eps)| {
            let delta = p.deltas.as_ref().map_or(eps.powf(0.25), |d| d[k]);
            let domain = DomainSpec::new(polygon.to_vec(), eps).build()?;
            let labels = node_labels(&domain, &sides);
            let u: Vec<Vec2> = domain
                .nodes
                .iter()
                .zip(&labels)
                .map(|(&x, &l)| x + (if l == 1 { v_plus(x) } else { v_minus(x) }) * delta)
                .collect();
            let adm = energy::is_admissible(&domain, &u, 0.0);
            let e = crate::fixed_order_sum(&energy::bond_measure(&domain, &u, pot));
            // ∇u± = I + δω±J is a rotation times a dilation by √(1 + δ²ω²).
            let r_plus = geom::rotation((delta * p.omega_plus).atan());
            let r_minus = geom::rotation((delta * p.omega_minus).atan());
            let jump = (v_plus(p.xbar) - v_minus(p.xbar)) * delta;
            Ok(SmallDeformationRow {
                epsilon: eps,
                delta,
                admissible: adm.admissible,
                min_det: adm.min_det,
                energy: e,
                v_normal,
                plus_side: jump.dot(&(r_plus * nu)) / delta,
                minus_side: jump.dot(&(r_minus * nu)) / delta,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::v;

    fn square() -> Vec<Vec2> {
        vec![v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0), v(0.0, 1.0)]
    }

    fn params(w: Vec2) -> SmallDeformationParams {
        SmallDeformationParams {
            nu: v(0.0, 1.0),
            xbar: v(0.5, 0.5),
            w,
            omega_minus: 0.0,
            omega_plus: 0.2,
            epsilons: vec![1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0],
            deltas: None,
        }
    }

    #[test]
    fn verdict_follows_normal_sign() {
        let pot = Potential::default();
        for row in small_deformation_scaling(&square(), &params(v(0.1, 0.5)), &pot).unwrap() {
            assert!(row.admissible);
            assert!((row.plus_side - row.v_normal).abs() < 0.2 * row.delta);
        }
        for row in small_deformation_scaling(&square(), &params(v(0.1, -0.5)), &pot).unwrap() {
            assert!(!row.admissible);
        }
    }

    #[test]
    fn zero_profile_is_identity() {
        let mut p = params(v(0.0, 0.0));
        p.omega_plus = 0.0;
        for row in small_deformation_scaling(&square(), &p, &Potential::default()).unwrap() {
            assert!(row.admissible && row.energy == 0.0);
        }
    }
}
