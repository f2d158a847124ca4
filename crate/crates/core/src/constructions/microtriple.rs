use std::f64::consts::FRAC_PI_3;

use serde::{Deserialize, Serialize};

use super::layers::{build_layers, Similarity};
use super::{finish, json, node_labels, pointwise_interpolation, ConstructionResult, DomainSpec, TripleParams};
use crate::energy::{self, Potential};
use crate::geom::{self, perp, Vec2, SQRT3};
use crate::lattice::LatticeDomain;
use crate::surface;
use crate::Error;

/// Triple point whose central triangle is repaired by a detached strip along one ray.
///
/// The strip is the lattice row next to ray `ray` (at 0°, 120° or 240°) inside
/// sector `sector`, from the junction A to the point X at distance `d` along
/// the ray. It is mapped by a similarity with scale `compression`; its
/// rotation is `angle` and its translation comes from a linear program on the
/// determinants. With `images` = [A′, X′] the similarity is fixed instead.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MicroTripleParams {
    pub triple: TripleParams,
    pub ray: usize,
    pub sector: usize,
    pub d: f64,
    #[serde(default = "one")]
    pub compression: f64,
    #[serde(default)]
    pub angle: f64,
    #[serde(default)]
    pub images: Option<[Vec2; 2]>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MicroTripleCandidate {
    pub ray: usize,
    pub sector: usize,
    pub d: f64,
    pub compression: f64,
    pub angle: f64,
    /// (φ(ν) + J(compression)) d.
    pub predicted_extra: f64,
    pub lp_margin: Option<f64>,
    pub admissible: bool,
    pub energy: f64,
}

/// Region id of a sector in the triple-point target.
fn region_of_sector(sector: usize) -> Result<usize, Error> {
    match sector {
        1 => Ok(1),
        2 => Ok(2),
        3 => Ok(0),
        _ => Err(Error::InvalidParameter(format!("sector must be 1, 2 or 3, got {sector}"))),
    }
}

/// Region ids (cw side, ccw side) of each ray.
const RAY_SIDES: [(usize, usize); 3] = [(2, 1), (1, 0), (0, 2)];

fn strip_rows(
    domain: &LatticeDomain,
    labels: &[usize],
    x0: Vec2,
    ray: usize,
    region: usize,
    d: f64,
) -> Result<Vec<usize>, Error> {
    let (cw, ccw) =
        *RAY_SIDES.get(ray).ok_or_else(|| Error::InvalidParameter(format!("ray must be 0, 1 or 2, got {ray}")))?;
    let sign = if region == ccw {
        1.0
    } else if region == cw {
        -1.0
    } else {
        return Err(Error::InvalidParameter("sector does not border the chosen ray".into()));
    };
    let dir = geom::unit(ray as f64 * 2.0 * FRAC_PI_3);
    let n = perp(dir) * sign;
    let eps = domain.epsilon;
    let h = 0.5 * SQRT3 * eps;
    let tol = 1e-9 * eps;
    Ok(domain
        .nodes
        .iter()
        .zip(labels)
        .map(|(&x, &l)| {
            let s = (x - x0).dot(&n);
            let t = (x - x0).dot(&dir);
            usize::from(l == region && s > tol && s <= h + tol && t >= -eps - tol && t <= d + tol)
        })
        .collect())
}

fn predicted_extra(d: f64, compression: f64, pot: &Potential) -> f64 {
    // Ray normals are coordinate directions, so φ(ν) = 2J∞.
    (surface::phi(perp(geom::unit(0.0)), pot.j_inf) + pot.j(compression)) * d
}

struct Built {
    u: Vec<Vec2>,
    strip: Vec<usize>,
    map: Option<Similarity>,
    lp_margin: Option<f64>,
}

fn build(domain: &LatticeDomain, p: &MicroTripleParams, base: &[Vec2], labels: &[usize]) -> Result<Built, Error> {
    if !(p.d > 0.0) {
        return Err(Error::InvalidParameter("strip length must be positive".into()));
    }
    let region = region_of_sector(p.sector)?;
    let rows = strip_rows(domain, labels, p.triple.x0, p.ray, region, p.d)?;
    let strip: Vec<usize> = (0..rows.len()).filter(|&n| rows[n] > 0).collect();
    let ray_angle = p.ray as f64 * 2.0 * FRAC_PI_3;
    if let Some([a1, x1]) = p.images {
        let a = p.triple.x0;
        let scale = (x1 - a1).norm() / p.d;
        let angle = geom::wrap_angle(geom::angle_of_vec(x1 - a1) - ray_angle);
        let lin = geom::rotation(angle) * scale;
        let map = Similarity { angle, scale, c: a1 - lin * a };
        let u = (0..domain.n_nodes()).map(|n| if rows[n] > 0 { map.apply(domain.nodes[n]) } else { base[n] }).collect();
        return Ok(Built { u, strip, map: Some(map), lp_margin: None });
    }
    if !(p.compression > 0.0) {
        return Err(Error::InvalidParameter("compression must be positive".into()));
    }
    let bound = 4.0 * (geom::diameter(&domain.polygon) + p.triple.maps.iter().map(|m| m.q.norm()).sum::<f64>() + 1.0);
    match build_layers(domain, base, &rows, &[(p.angle, p.compression)], bound, 1) {
        Some((plan, u)) => Ok(Built { u, strip, map: Some(plan.maps[0]), lp_margin: Some(plan.lp_margin) }),
        None => Ok(Built { u: base.to_vec(), strip, map: None, lp_margin: None }),
    }
}

pub fn microdeformed_triple_point(
    polygon: &[Vec2],
    epsilon: f64,
    p: &MicroTripleParams,
    pot: &Potential,
) -> Result<ConstructionResult, Error> {
    let spec = DomainSpec { polygon: polygon.to_vec(), epsilon, offset: p.triple.offset(epsilon) };
    let domain = spec.build()?;
    let target = p.triple.target(&domain.polygon);
    let base = pointwise_interpolation(&domain, &target);
    let labels = node_labels(&domain, &target);
    let b = build(&domain, p, &base, &labels)?;
    let compression = b.map.map_or(p.compression, |m| m.scale);
    let extra = predicted_extra(p.d, compression, pot);
    let predicted = target.griffith_energy(pot.j_inf) + extra;
    let compat = p.triple.compatibility();
    let central = domain.triangles_crossing_segment(p.triple.x0, p.triple.x0);
    let central_det: Vec<f64> = central.iter().map(|&t| energy::triangle_det(&domain, &b.u, t)).collect();
    let highlight: Vec<usize> =
        (0..domain.triangles.len()).filter(|&t| domain.triangles[t].iter().any(|n| b.strip.contains(n))).collect();
    let mut cracks: Vec<(Vec2, Vec2)> = target.cracks.iter().map(|c| (c.a, c.b)).collect();
    let dir = geom::unit(p.ray as f64 * 2.0 * FRAC_PI_3);
    cracks.push((p.triple.x0, p.triple.x0 + dir * p.d));
    Ok(finish(
        "microdeformed-triple",
        &spec,
        domain,
        b.u,
        predicted,
        pot,
        compat < 0.0,
        cracks,
        highlight,
        json(p),
        serde_json::json!({
            "compatibility": compat,
            "strip_nodes": b.strip.len(),
            "strip_map": b.map,
            "lp_margin": b.lp_margin,
            "predicted_extra": extra,
            "griffith": target.griffith_energy(pot.j_inf),
            "central_triangles": central,
            "central_det": central_det,
            "x": p.triple.x0 + dir * p.d,
        }),
    ))
}

/// Every (ray, sector, d, compression, angle) combination with 15° angle steps,
/// and the admissible candidate of least predicted extra cost, ties broken by energy.
pub fn microdeformed_grid_search(
    polygon: &[Vec2],
    epsilon: f64,
    triple: &TripleParams,
    ds: &[f64],
    compressions: &[f64],
    pot: &Potential,
) -> Result<(Vec<MicroTripleCandidate>, Option<MicroTripleCandidate>), Error> {
    let spec = DomainSpec { polygon: polygon.to_vec(), epsilon, offset: triple.offset(epsilon) };
    let domain = spec.build()?;
    let target = triple.target(&domain.polygon);
    let base = pointwise_interpolation(&domain, &target);
    let labels = node_labels(&domain, &target);
    let mut table = Vec::new();
    for ray in 0..3 {
        let (cw, ccw) = RAY_SIDES[ray];
        for region in [cw, ccw] {
            let sector = if region == 0 { 3 } else { region };
            for &d in ds {
                for &compression in compressions {
                    for k in 0..24 {
                        let angle = geom::wrap_angle((15.0 * k as f64).to_radians());
                        let p = MicroTripleParams {
                            triple: triple.clone(),
                            ray,
                            sector,
                            d,
                            compression,
                            angle,
                            images: None,
                        };
                        let b = build(&domain, &p, &base, &labels)?;
                        let feasible = b.lp_margin.is_some_and(|m| m > 0.0);
                        let admissible = feasible && energy::is_admissible(&domain, &b.u, 0.0).admissible;
                        let energy = if admissible {
                            crate::fixed_order_sum(&energy::bond_measure(&domain, &b.u, pot))
                        } else {
                            f64::NAN
                        };
                        table.push(MicroTripleCandidate {
                            ray,
                            sector,
                            d,
                            compression,
                            angle,
                            predicted_extra: predicted_extra(d, compression, pot),
                            lp_margin: b.lp_margin,
                            admissible,
                            energy,
                        });
                    }
                }
            }
        }
    }
    let best = table
        .iter()
        .filter(|c| c.admissible)
        .min_by(|a, b| a.predicted_extra.total_cmp(&b.predicted_extra).then(a.energy.total_cmp(&b.energy)))
        .cloned();
    Ok((table, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::Rigid;
    use crate::geom::v;

    fn square() -> Vec<Vec2> {
        vec![v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0), v(0.0, 1.0)]
    }

    fn violating() -> TripleParams {
        TripleParams {
            x0: v(0.5, 0.5),
            maps: [Rigid::translation(v(-1.0, 0.1)), Rigid::translation(v(0.0, 0.0)), Rigid::translation(v(-2.0, 0.6))],
        }
    }

    #[test]
    fn extra_cost_formula() {
        let pot = Potential::default();
        assert!((predicted_extra(0.3, 1.0, &pot) - 0.6).abs() < 1e-12);
        let c = 0.5 * SQRT3;
        assert!((predicted_extra(1.0, c, &pot) - (2.0 + pot.j(c))).abs() < 1e-12);
    }

    #[test]
    fn grid_search_repairs_central_triangle() {
        let pot = Potential::default();
        let t = violating();
        assert!(t.compatibility() < 0.0);
        let eps = 1.0 / 32.0;
        let plain = super::super::triple_point(&square(), eps, &t, &pot).unwrap();
        assert!(!plain.admissible);
        let (table, best) =
            microdeformed_grid_search(&square(), eps, &t, &[0.1, 0.2, 0.4], &[0.6, 0.8, 1.0], &pot).unwrap();
        assert_eq!(table.len(), 6 * 9 * 24);
        let best = best.expect("some grid choice is admissible");
        assert!(table.iter().filter(|c| c.admissible).all(|c| c.predicted_extra >= best.predicted_extra));
        let p = MicroTripleParams {
            triple: t,
            ray: best.ray,
            sector: best.sector,
            d: best.d,
            compression: best.compression,
            angle: best.angle,
            images: None,
        };
        let r = microdeformed_triple_point(&square(), eps, &p, &pot).unwrap();
        assert!(r.admissible && r.conditions_hold);
        assert_eq!(r.energy, best.energy);
    }

    #[test]
    fn fixed_images_give_the_similarity() {
        let t = violating();
        let a1 = t.x0 + v(0.1, 0.0);
        let x1 = a1 + geom::unit(0.3) * 0.16;
        let p = MicroTripleParams {
            triple: t,
            ray: 0,
            sector: 1,
            d: 0.2,
            compression: 1.0,
            angle: 0.0,
            images: Some([a1, x1]),
        };
        let r = microdeformed_triple_point(&square(), 1.0 / 16.0, &p, &Potential::default()).unwrap();
        let m: Similarity = serde_json::from_value(r.diagnostics["strip_map"].clone()).unwrap();
        assert!((m.scale - 0.8).abs() < 1e-12 && (m.angle - 0.3).abs() < 1e-12);
        assert!((m.apply(p.triple.x0) - a1).norm() < 1e-12);
    }
}
