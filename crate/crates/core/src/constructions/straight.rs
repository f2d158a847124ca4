use serde::{Deserialize, Serialize};

use super::{
    check_opening_condition, finish, json, line_cracks, mixed_triangles, node_labels, pointwise_interpolation,
    positivity_perturbation, ConstructionResult, DomainSpec, PiecewiseRigidMap, Region, RegionShape, Rigid,
};
use crate::energy::{self, Potential};
use crate::geom::{self, Vec2};
use crate::lattice::LatticeVectors;
use crate::Error;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StraightCrackParams {
    /// Crack normal, a coordinate direction; points from the minus to the plus side.
    pub nu: Vec2,
    /// A point on the crack line.
    pub xbar: Vec2,
    pub minus: Rigid,
    pub plus: Rigid,
    /// Size of the opening perturbation applied when the opening condition holds only with equality.
    /// Defaults to 10⁻³ diam Ω.
    #[serde(default)]
    pub delta0: Option<f64>,
}

impl StraightCrackParams {
    pub fn new(nu: Vec2, xbar: Vec2, minus: Rigid, plus: Rigid) -> Self {
        Self { nu, xbar, minus, plus, delta0: None }
    }

    pub fn target(&self, polygon: &[Vec2]) -> PiecewiseRigidMap {
        PiecewiseRigidMap {
            regions: vec![
                Region { shape: RegionShape::All, map: self.minus },
                Region { shape: RegionShape::HalfPlane { point: self.xbar, normal: self.nu }, map: self.plus },
            ],
            cracks: line_cracks(polygon, self.xbar, self.nu, 0, 1),
        }
    }
}

/// Pointwise interpolation of a two-sided rigid map across a straight crack with normal in D.
pub fn straight_crack(
    spec: &DomainSpec,
    p: &StraightCrackParams,
    pot: &Potential,
) -> Result<ConstructionResult, Error> {
    if !LatticeVectors::is_coordinate_direction(p.nu) {
        return Err(Error::InvalidParameter("straight crack normal must be a coordinate direction".into()));
    }
    let domain = spec.build()?;
    let delta0 = p.delta0.unwrap_or(1e-3 * geom::diameter(&domain.polygon));
    let (target, perturbed) = positivity_perturbation(p.target(&domain.polygon), delta0)?;
    let u = pointwise_interpolation(&domain, &target);
    let labels = node_labels(&domain, &target);
    let crossing = mixed_triangles(&domain, &labels);
    let crossing_min_det = crossing.iter().map(|&t| energy::triangle_det(&domain, &u, t)).fold(f64::INFINITY, f64::min);
    let checks: Vec<_> =
        (0..target.cracks.len()).map(|c| check_opening_condition(&target, c, false)).collect::<Result<_, _>>()?;
    let conditions_hold = checks.iter().all(|c| c.delta >= 0.0 && !c.antipodal);
    let predicted = target.griffith_energy(pot.j_inf);
    let crack_length: f64 = target.cracks.iter().map(|c| c.length()).sum();
    Ok(finish(
        "straight-crack",
        spec,
        domain,
        u,
        predicted,
        pot,
        conditions_hold,
        target.cracks.iter().map(|c| (c.a, c.b)).collect(),
        crossing,
        json(p),
        serde_json::json!({
            "opening": checks,
            "crossing_min_det": crossing_min_det,
            "crack_length": crack_length,
            "perturbed": perturbed,
            "delta0": delta0,
            "target_plus": target.regions[1].map,
        }),
    ))
}
