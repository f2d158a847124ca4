use std::f64::consts::{FRAC_PI_3, PI};

use serde::{Deserialize, Serialize};

use super::{
    check_opening_condition, finish, json, mixed_triangles, node_labels, pointwise_interpolation, ConstructionResult,
    CrackSegment, DomainSpec, PiecewiseRigidMap, Region, RegionShape, Rigid,
};
use crate::energy::{self, Potential};
use crate::geom::{self, perp, Vec2};
use crate::lattice::LatticeVectors;
use crate::Error;

/// Three rigid sectors meeting at `x0`.
///
/// The rays leave `x0` at 0°, 120° and 240°. Sector 1 spans (0°, 120°),
/// sector 3 spans (120°, 240°) and sector 2 spans (240°, 360°). The lattice
/// is shifted so that `x0` is the centroid of an upward lattice triangle,
/// whose three vertices then lie one in each sector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TripleParams {
    pub x0: Vec2,
    /// Maps of sectors 1, 2 and 3.
    pub maps: [Rigid; 3],
}

impl TripleParams {
    /// Common rotation about `x0` with each sector pushed outward along its bisector by `push`.
    /// With `flipped`, the translations of sectors 1 and 2 are exchanged.
    pub fn symmetric(x0: Vec2, angle: f64, push: f64, flipped: bool) -> Self {
        let bis = |deg: f64| geom::unit(deg.to_radians());
        let mut d = [bis(60.0), bis(300.0), bis(180.0)];
        if flipped {
            d.swap(0, 1);
        }
        let r = geom::rotation(angle);
        let maps = d.map(|dk| Rigid::about(angle, x0, r * dk * push));
        Self { x0, maps }
    }

    /// Lattice offset placing x0 at the centroid of an upward triangle.
    pub fn offset(&self, epsilon: f64) -> Vec2 {
        self.x0 - (LatticeVectors::eta(1) + LatticeVectors::eta(2)) * (epsilon / 3.0)
    }

    pub fn target(&self, polygon: &[Vec2]) -> PiecewiseRigidMap {
        let x0 = self.x0;
        let regions = vec![
            Region { shape: RegionShape::All, map: self.maps[2] },
            Region { shape: RegionShape::Sector { apex: x0, from: 0.0, to: 2.0 * FRAC_PI_3 }, map: self.maps[0] },
            Region { shape: RegionShape::Sector { apex: x0, from: 4.0 * FRAC_PI_3, to: 2.0 * PI }, map: self.maps[1] },
        ];
        // (angle, region before, region after) in ccw order; region ids: 0 = sector 3, 1 = sector 1, 2 = sector 2.
        let rays = [(0.0, 2usize, 1usize), (2.0 * FRAC_PI_3, 1, 0), (4.0 * FRAC_PI_3, 0, 2)];
        let big = 4.0 * (geom::diameter(polygon) + (x0 - polygon[0]).norm() + 1.0);
        let mut cracks = Vec::new();
        for (ang, before, after) in rays {
            let dir = geom::unit(ang);
            for (a, b) in geom::clip_segment(polygon, x0, x0 + dir * big) {
                cracks.push(CrackSegment { a, b, normal: perp(dir), minus: before, plus: after });
            }
        }
        PiecewiseRigidMap { regions, cracks }
    }

    /// ⟨u¹(x₀) − u³(x₀), (u²(x₀) − u³(x₀))^⊥⟩, positive when the central triangle keeps its orientation.
    pub fn compatibility(&self) -> f64 {
        let u = self.maps.map(|m| m.apply(self.x0));
        (u[0] - u[2]).dot(&perp(u[1] - u[2]))
    }
}

pub fn triple_point(
    polygon: &[Vec2],
    epsilon: f64,
    p: &TripleParams,
    pot: &Potential,
) -> Result<ConstructionResult, Error> {
    let spec = DomainSpec { polygon: polygon.to_vec(), epsilon, offset: p.offset(epsilon) };
    let domain = spec.build()?;
    let target = p.target(&domain.polygon);
    let u = pointwise_interpolation(&domain, &target);
    let labels = node_labels(&domain, &target);
    let crossing = mixed_triangles(&domain, &labels);
    let central = domain.triangles_crossing_segment(p.x0, p.x0);
    let central_det: Vec<f64> = central.iter().map(|&t| energy::triangle_det(&domain, &u, t)).collect();
    let central_regions: Vec<[usize; 3]> = central.iter().map(|&t| domain.triangles[t].map(|n| labels[n])).collect();
    let checks: Vec<_> =
        (0..target.cracks.len()).map(|c| check_opening_condition(&target, c, false)).collect::<Result<_, _>>()?;
    let compat = p.compatibility();
    let rays_open = checks.iter().all(|c| c.delta > 0.0);
    let predicted = target.griffith_energy(pot.j_inf);
    let ray_length: f64 = target.cracks.iter().map(|c| c.length()).sum();
    Ok(finish(
        "triple-point",
        &spec,
        domain,
        u,
        predicted,
        pot,
        rays_open && compat > 0.0,
        target.cracks.iter().map(|c| (c.a, c.b)).collect(),
        if central.is_empty() { crossing } else { central.clone() },
        json(p),
        serde_json::json!({
            "opening": checks,
            "compatibility": compat,
            "central_triangles": central,
            "central_det": central_det,
            "central_regions": central_regions,
            "ray_length": ray_length,
        }),
    ))
}
