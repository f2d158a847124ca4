use serde::{Deserialize, Serialize};

use super::{
    check_opening_condition, finish, json, line_cracks, mixed_triangles, node_labels, pointwise_interpolation,
    ConstructionResult, CrackSegment, DomainSpec, PiecewiseRigidMap, Region, RegionShape, Rigid,
};
use crate::energy::Potential;
use crate::geom::{self, perp, Vec2};
use crate::lattice::LatticeVectors;
use crate::surface;
use crate::Error;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolygonalParams {
    /// Simple polygon bounding the plus region; its edges inside the domain form the crack.
    pub plus_region: Vec<Vec2>,
    pub minus: Rigid,
    pub plus: Rigid,
}

impl PolygonalParams {
    pub fn target(&self, domain_poly: &[Vec2]) -> PiecewiseRigidMap {
        let mut poly = self.plus_region.clone();
        if geom::signed_area(&poly) < 0.0 {
            poly.reverse();
        }
        let n = poly.len();
        let mut cracks = Vec::new();
        for k in 0..n {
            let (a, b) = (poly[k], poly[(k + 1) % n]);
            let normal = perp(b - a).normalize();
            for (p, q) in geom::clip_segment(domain_poly, a, b) {
                cracks.push(CrackSegment { a: p, b: q, normal, minus: 0, plus: 1 });
            }
        }
        PiecewiseRigidMap {
            regions: vec![
                Region { shape: RegionShape::All, map: self.minus },
                Region { shape: RegionShape::Polygon { vertices: poly }, map: self.plus },
            ],
            cracks,
        }
    }
}

fn polygonal_from_target(
    name: &str,
    spec: &DomainSpec,
    target: PiecewiseRigidMap,
    strong: bool,
    predicted: f64,
    pot: &Potential,
    params: serde_json::Value,
    extra: serde_json::Value,
) -> Result<ConstructionResult, Error> {
    let domain = spec.build()?;
    let u = pointwise_interpolation(&domain, &target);
    let labels = node_labels(&domain, &target);
    let crossing = mixed_triangles(&domain, &labels);
    let checks: Vec<_> =
        (0..target.cracks.len()).map(|c| check_opening_condition(&target, c, strong)).collect::<Result<_, _>>()?;
    let conditions_hold = checks.iter().all(|c| c.delta >= 0.0 && !c.antipodal);
    Ok(finish(
        name,
        spec,
        domain,
        u,
        predicted,
        pot,
        conditions_hold,
        target.cracks.iter().map(|c| (c.a, c.b)).collect(),
        crossing,
        params,
        serde_json::json!({
            "opening": checks,
            "staircase_griffith": target.griffith_energy(pot.j_inf),
            "extra": extra,
        }),
    ))
}

/// Pointwise interpolation across a polygonal crack whose segments all have normals in D.
pub fn polygonal_crack(spec: &DomainSpec, p: &PolygonalParams, pot: &Potential) -> Result<ConstructionResult, Error> {
    if geom::wrap_angle(p.plus.angle - p.minus.angle).abs() > std::f64::consts::PI - 1e-12 {
        return Err(Error::InvalidParameter("the two rotations must not differ by a half turn".into()));
    }
    let target = p.target(&spec.polygon);
    if let Some(c) = target.cracks.iter().find(|c| !LatticeVectors::is_coordinate_direction(c.normal)) {
        return Err(Error::InvalidParameter(format!("crack normal {:?} is not a coordinate direction", c.normal)));
    }
    let predicted = target.griffith_energy(pot.j_inf);
    polygonal_from_target("polygonal-crack", spec, target, false, predicted, pot, json(p), serde_json::Value::Null)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StaircaseParams {
    pub nu: Vec2,
    pub xbar: Vec2,
    /// Period of the staircase along the crack.
    pub h: f64,
    pub minus: Rigid,
    pub plus: Rigid,
}

/// Zigzag through `xbar` with mean direction perpendicular to `nu`, built from
/// segments with normals ν₁, ν₂, together with a far closure on the plus side.
fn staircase_polygon(p: &StaircaseParams, reach: f64) -> Result<(Vec<Vec2>, [f64; 2]), Error> {
    let nu = p.nu.normalize();
    let tau = -perp(nu);
    let dec = surface::simplex_decompose(nu)?;
    // Segment directions, oriented along +τ.
    let orient = |n: Vec2| {
        let s = -perp(n);
        if s.dot(&tau) < 0.0 {
            -s
        } else {
            s
        }
    };
    let (s1, s2) = (orient(dec.nu1), orient(dec.nu2));
    // a1 s1 + a2 s2 = h τ
    let m = geom::Mat2::from_columns(&[s1, s2]);
    let a = m.try_inverse().ok_or_else(|| Error::InvalidParameter("degenerate staircase".into()))? * (tau * p.h);
    let (a1, a2) = (a.x.max(0.0), a.y.max(0.0));
    let periods = (reach / p.h).ceil() as i64 + 1;
    // Centre the teeth on the line.
    let excursion = (s1 * a1).dot(&nu);
    let start = p.xbar - tau * (p.h * periods as f64) - nu * (0.5 * excursion);
    let mut zig = vec![start];
    let mut x = start;
    for _ in 0..(2 * periods) {
        if a1 > 0.0 {
            x += s1 * a1;
            zig.push(x);
        }
        if a2 > 0.0 {
            x += s2 * a2;
            zig.push(x);
        }
    }
    let far = nu * (2.0 * reach + p.h);
    let mut poly = zig.clone();
    poly.push(*zig.last().unwrap() + far);
    poly.push(zig[0] + far);
    Ok((poly, [a1, a2]))
}

/// Polygonal approximation of a crack with arbitrary normal by a staircase of D-normal segments.
pub fn staircase_approximation(
    spec: &DomainSpec,
    p: &StaircaseParams,
    pot: &Potential,
) -> Result<ConstructionResult, Error> {
    if !(p.h > 0.0) {
        return Err(Error::InvalidParameter("staircase step must be positive".into()));
    }
    if LatticeVectors::is_coordinate_direction(p.nu) {
        let sp = super::StraightCrackParams::new(p.nu, p.xbar, p.minus, p.plus);
        let mut r = super::straight_crack(spec, &sp, pot)?;
        r.name = "staircase".into();
        return Ok(r);
    }
    let reach = geom::diameter(&spec.polygon) + (p.xbar - spec.polygon[0]).norm();
    let (poly, lengths) = staircase_polygon(p, reach)?;
    let pp = PolygonalParams { plus_region: poly, minus: p.minus, plus: p.plus };
    let target = pp.target(&spec.polygon);
    let line = line_cracks(&spec.polygon, p.xbar, p.nu, 0, 1);
    let straight_len: f64 = line.iter().map(|c| c.length()).sum();
    let predicted = surface::phi(p.nu, pot.j_inf) * straight_len;
    // The dual identity makes the staircase density equal to φ(ν) exactly, period by period.
    let period_identity = 2.0 * pot.j_inf * (lengths[0] + lengths[1]) - surface::phi(p.nu, pot.j_inf) * p.h;
    polygonal_from_target(
        "staircase",
        spec,
        target,
        true,
        predicted,
        pot,
        json(p),
        serde_json::json!({
            "segment_lengths": lengths,
            "period_identity_residual": period_identity,
            "straight_length": straight_len,
        }),
    )
}
