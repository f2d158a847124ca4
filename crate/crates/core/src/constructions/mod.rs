//! Explicit discrete displacements approximating piecewise rigid maps with cracks.

mod healing;
pub mod layers;
mod microtriple;
mod multilayer;
mod polygonal;
mod relaxation;
mod small;
mod straight;
mod triple;

pub use healing::{healing_fracture_demo, HealingParams, HealingScenario};
pub use layers::{build_layers, LayerPlan, LayerSpec, Similarity};
pub use microtriple::{microdeformed_grid_search, microdeformed_triple_point, MicroTripleCandidate, MicroTripleParams};
pub use multilayer::{multilayer_fracture, MultilayerParams};
pub use polygonal::{polygonal_crack, staircase_approximation, PolygonalParams, StaircaseParams};
pub use relaxation::{plain_cut_admissible_angles, relaxed_row_density, surface_relaxation, RelaxationParams};
pub use small::{small_deformation_scaling, SmallDeformationParams, SmallDeformationRow};
pub use straight::{straight_crack, StraightCrackParams};
pub use triple::{triple_point, TripleParams};

use serde::{Deserialize, Serialize};

use crate::energy::{self, Potential};
use crate::geom::{self, cross, Mat2, Vec2};
use crate::lattice::LatticeDomain;
use crate::surface;
use crate::Error;

/// x ↦ R(angle) x + q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rigid {
    pub angle: f64,
    pub q: Vec2,
}

impl Default for Rigid {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rigid {
    pub fn identity() -> Self {
        Self { angle: 0.0, q: Vec2::zeros() }
    }

    pub fn translation(q: Vec2) -> Self {
        Self { angle: 0.0, q }
    }

    /// Rotation by `angle` about `center`, followed by translation `t`.
    pub fn about(angle: f64, center: Vec2, t: Vec2) -> Self {
        Self { angle, q: center - geom::rotation(angle) * center + t }
    }

    pub fn rot(&self) -> Mat2 {
        geom::rotation(self.angle)
    }

    pub fn apply(&self, x: Vec2) -> Vec2 {
        self.rot() * x + self.q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum RegionShape {
    All,
    /// Points with ⟨x − point, normal⟩ > tol.
    HalfPlane {
        point: Vec2,
        normal: Vec2,
    },
    /// Open convex sector between rays at angles `from` and `to` (ccw, less than π apart).
    Sector {
        apex: Vec2,
        from: f64,
        to: f64,
    },
    /// Open interior of a simple polygon.
    Polygon {
        vertices: Vec<Vec2>,
    },
}

impl RegionShape {
    pub fn contains(&self, x: Vec2, tol: f64) -> bool {
        match self {
            RegionShape::All => true,
            RegionShape::HalfPlane { point, normal } => (x - point).dot(&normal.normalize()) > tol,
            RegionShape::Sector { apex, from, to } => {
                let r = x - apex;
                cross(geom::unit(*from), r) > tol && cross(r, geom::unit(*to)) > tol
            }
            RegionShape::Polygon { vertices } => geom::contains_open(vertices, x, tol),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub shape: RegionShape,
    pub map: Rigid,
}

/// A straight piece of the crack set; `normal` points from the minus to the plus region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrackSegment {
    pub a: Vec2,
    pub b: Vec2,
    pub normal: Vec2,
    pub minus: usize,
    pub plus: usize,
}

impl CrackSegment {
    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }
}

/// Regions are tested from last to first; region 0 should be `All`.
/// Points on a region boundary therefore fall to the earlier region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseRigidMap {
    pub regions: Vec<Region>,
    pub cracks: Vec<CrackSegment>,
}

impl PiecewiseRigidMap {
    pub fn region_of(&self, x: Vec2, tol: f64) -> usize {
        (0..self.regions.len()).rev().find(|&h| self.regions[h].shape.contains(x, tol)).unwrap_or(0)
    }

    pub fn eval(&self, x: Vec2, tol: f64) -> Vec2 {
        self.regions[self.region_of(x, tol)].map.apply(x)
    }

    /// Σ φ(ν) H¹ over the crack segments.
    /// φ-weighted length of the segments across which the map actually jumps.
    pub fn griffith_energy(&self, j_inf: f64) -> f64 {
        self.cracks
            .iter()
            .filter(|c| self.regions[c.minus].map != self.regions[c.plus].map)
            .map(|c| surface::phi(c.normal, j_inf) * c.length())
            .sum::<f64>()
            + 0.0
    }
}

/// Sample each node of the domain from the target map.
pub fn pointwise_interpolation(domain: &LatticeDomain, target: &PiecewiseRigidMap) -> Vec<Vec2> {
    let tol = 1e-9 * domain.epsilon;
    domain.nodes.iter().map(|&x| target.eval(x, tol)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpeningCheck {
    pub crack: usize,
    /// min over samples of ⟨u⁺ − u⁻, R⁺ν⟩.
    pub plus_side: f64,
    /// min over samples of ⟨u⁺ − u⁻, R⁻ν⟩.
    pub minus_side: f64,
    /// Strong form only: minima against R±ν₁ and R±ν₂ of the simplex decomposition.
    pub decomposition: Option<[f64; 4]>,
    pub delta: f64,
    /// The two sides are related by a half turn.
    pub antipodal: bool,
}

/// Minimum opening inner products over points sampled along a crack segment.
pub fn check_opening_condition(target: &PiecewiseRigidMap, crack: usize, strong: bool) -> Result<OpeningCheck, Error> {
    let c = target.cracks.get(crack).ok_or_else(|| Error::InvalidParameter(format!("no crack with id {crack}")))?;
    let mm = target.regions[c.minus].map;
    let mp = target.regions[c.plus].map;
    let nu = c.normal.normalize();
    let dec = if strong && !crate::lattice::LatticeVectors::is_coordinate_direction(nu) {
        Some(surface::simplex_decompose(nu)?)
    } else {
        None
    };
    let (mut ps, mut ms) = (f64::INFINITY, f64::INFINITY);
    let mut dm = [f64::INFINITY; 4];
    let samples = 65;
    for s in 0..samples {
        let x = c.a + (c.b - c.a) * (s as f64 / (samples - 1) as f64);
        let jump = mp.apply(x) - mm.apply(x);
        ps = ps.min(jump.dot(&(mp.rot() * nu)));
        ms = ms.min(jump.dot(&(mm.rot() * nu)));
        if let Some(d) = dec {
            let vals = [
                jump.dot(&(mp.rot() * d.nu1)),
                jump.dot(&(mm.rot() * d.nu1)),
                jump.dot(&(mp.rot() * d.nu2)),
                jump.dot(&(mm.rot() * d.nu2)),
            ];
            for k in 0..4 {
                dm[k] = dm[k].min(vals[k]);
            }
        }
    }
    let mut delta = ps.min(ms);
    if dec.is_some() {
        delta = dm.iter().copied().fold(delta, f64::min);
    }
    let antipodal = geom::wrap_angle(mp.angle - mm.angle).abs() > std::f64::consts::PI - 1e-12;
    Ok(OpeningCheck { crack, plus_side: ps, minus_side: ms, decomposition: dec.map(|_| dm), delta, antipodal })
}

/// Pushes open every crack whose opening condition holds only with equality.
///
/// For such a crack the plus map is translated by δ₀ (R⁺ν + R⁻ν), which makes
/// both inner products strictly positive. Cracks with an identically zero jump,
/// a strictly negative margin or antipodal sides are left alone.
pub fn positivity_perturbation(mut target: PiecewiseRigidMap, delta0: f64) -> Result<(PiecewiseRigidMap, bool), Error> {
    if !(delta0 >= 0.0 && delta0.is_finite()) {
        return Err(Error::InvalidParameter("delta0 must be finite and nonnegative".into()));
    }
    let mut moved = vec![false; target.regions.len()];
    for k in 0..target.cracks.len() {
        let c = target.cracks[k];
        let check = check_opening_condition(&target, k, false)?;
        let (mm, mp) = (target.regions[c.minus].map, target.regions[c.plus].map);
        let jump =
            [c.a, c.b, (c.a + c.b) * 0.5].iter().map(|&x| (mp.apply(x) - mm.apply(x)).norm()).fold(0.0, f64::max);
        let tol = 1e-12 * (1.0 + jump);
        if moved[c.plus] || check.antipodal || jump <= tol || check.delta.abs() > tol {
            continue;
        }
        let nu = c.normal.normalize();
        target.regions[c.plus].map.q += (mp.rot() * nu + mm.rot() * nu) * delta0;
        moved[c.plus] = true;
    }
    Ok((target, moved.iter().any(|&m| m)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub polygon: Vec<Vec2>,
    pub epsilon: f64,
    #[serde(default = "Vec2::zeros")]
    pub offset: Vec2,
}

impl DomainSpec {
    pub fn new(polygon: Vec<Vec2>, epsilon: f64) -> Self {
        Self { polygon, epsilon, offset: Vec2::zeros() }
    }

    pub fn unit_square(epsilon: f64) -> Self {
        Self::new(vec![geom::v(0.0, 0.0), geom::v(1.0, 0.0), geom::v(1.0, 1.0), geom::v(0.0, 1.0)], epsilon)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..self.clone() }
    }

    pub fn build(&self) -> Result<LatticeDomain, Error> {
        LatticeDomain::build(&self.polygon, self.epsilon, self.offset)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstructionResult {
    pub name: String,
    pub domain_spec: DomainSpec,
    #[serde(skip)]
    pub domain: Option<LatticeDomain>,
    pub displacement: Vec<Vec2>,
    pub predicted_limit: f64,
    /// Bond sum of the construction (the energy when admissible).
    pub energy: f64,
    pub admissible: bool,
    pub violating: Vec<usize>,
    pub min_det: f64,
    /// Whether the continuum conditions the construction relies on hold.
    pub conditions_hold: bool,
    pub cracks: Vec<(Vec2, Vec2)>,
    pub highlight: Vec<usize>,
    pub params: serde_json::Value,
    pub diagnostics: serde_json::Value,
}

impl ConstructionResult {
    pub fn domain(&self) -> Result<LatticeDomain, Error> {
        match &self.domain {
            Some(d) => Ok(d.clone()),
            None => self.domain_spec.build(),
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn finish(
    name: &str,
    spec: &DomainSpec,
    domain: LatticeDomain,
    u: Vec<Vec2>,
    predicted_limit: f64,
    pot: &Potential,
    conditions_hold: bool,
    cracks: Vec<(Vec2, Vec2)>,
    highlight: Vec<usize>,
    params: serde_json::Value,
    diagnostics: serde_json::Value,
) -> ConstructionResult {
    let measure = energy::bond_measure(&domain, &u, pot);
    let adm = energy::is_admissible(&domain, &u, 0.0);
    ConstructionResult {
        name: name.to_string(),
        domain_spec: DomainSpec { offset: domain.offset, ..spec.clone() },
        energy: crate::fixed_order_sum(&measure),
        admissible: adm.admissible,
        violating: adm.violating,
        min_det: adm.min_det,
        domain: Some(domain),
        displacement: u,
        predicted_limit,
        conditions_hold,
        cracks,
        highlight,
        params,
        diagnostics,
    }
}

/// Triangles with vertices sampled from at least two different regions.
pub fn mixed_triangles(domain: &LatticeDomain, labels: &[usize]) -> Vec<usize> {
    (0..domain.triangles.len())
        .filter(|&t| {
            let [a, b, c] = domain.triangles[t];
            labels[a] != labels[b] || labels[b] != labels[c]
        })
        .collect()
}

/// Region label of every node.
pub fn node_labels(domain: &LatticeDomain, target: &PiecewiseRigidMap) -> Vec<usize> {
    let tol = 1e-9 * domain.epsilon;
    domain.nodes.iter().map(|&x| target.region_of(x, tol)).collect()
}

/// Crack segments of the full line through `p` with normal `nu`, clipped to the polygon.
pub(crate) fn line_cracks(poly: &[Vec2], p: Vec2, nu: Vec2, minus: usize, plus: usize) -> Vec<CrackSegment> {
    let t = geom::perp(nu).normalize();
    let big = 4.0 * (geom::diameter(poly) + (p - poly[0]).norm() + 1.0);
    geom::clip_segment(poly, p - t * big, p + t * big)
        .into_iter()
        .map(|(a, b)| CrackSegment { a, b, normal: nu.normalize(), minus, plus })
        .collect()
}

pub(crate) fn json<T: Serialize>(x: &T) -> serde_json::Value {
    serde_json::to_value(x).expect("serializable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::v;

    #[test]
    fn single_region_is_identity() {
        let d = DomainSpec::unit_square(0.25).build().unwrap();
        let t = PiecewiseRigidMap {
            regions: vec![Region { shape: RegionShape::All, map: Rigid::identity() }],
            cracks: vec![],
        };
        let u = pointwise_interpolation(&d, &t);
        assert_eq!(u, d.nodes);
    }

    #[test]
    fn equal_halves_are_continuous() {
        let spec = DomainSpec::unit_square(1.0 / 16.0);
        let d = spec.build().unwrap();
        let m = Rigid::about(0.2, v(0.5, 0.5), v(0.1, 0.0));
        let t = PiecewiseRigidMap {
            regions: vec![
                Region { shape: RegionShape::All, map: m },
                Region { shape: RegionShape::HalfPlane { point: v(0.5, 0.5), normal: v(0.0, 1.0) }, map: m },
            ],
            cracks: vec![],
        };
        let u = pointwise_interpolation(&d, &t);
        let e = energy::total_energy(&d, &u, &Potential::default()).unwrap();
        assert!(e.admissible && e.bond_sum < 1e-20);
    }

    #[test]
    fn opening_signs() {
        let mk = |q: Vec2| PiecewiseRigidMap {
            regions: vec![
                Region { shape: RegionShape::All, map: Rigid::identity() },
                Region {
                    shape: RegionShape::HalfPlane { point: v(0.5, 0.5), normal: v(0.0, 1.0) },
                    map: Rigid::translation(q),
                },
            ],
            cracks: vec![CrackSegment { a: v(0.0, 0.5), b: v(1.0, 0.5), normal: v(0.0, 1.0), minus: 0, plus: 1 }],
        };
        assert!(check_opening_condition(&mk(v(0.0, 0.3)), 0, false).unwrap().delta > 0.0);
        let c = check_opening_condition(&mk(v(0.0, -1.0)), 0, false).unwrap();
        assert!((c.delta + 1.0).abs() < 1e-15);
    }

    #[test]
    fn antipodal_sides_have_opposite_signs() {
        let t = PiecewiseRigidMap {
            regions: vec![
                Region { shape: RegionShape::All, map: Rigid::identity() },
                Region {
                    shape: RegionShape::HalfPlane { point: v(0.5, 0.5), normal: v(0.0, 1.0) },
                    map: Rigid::about(std::f64::consts::PI, v(0.5, 0.5), v(0.0, 0.3)),
                },
            ],
            cracks: vec![CrackSegment { a: v(0.0, 0.5), b: v(1.0, 0.5), normal: v(0.0, 1.0), minus: 0, plus: 1 }],
        };
        let c = check_opening_condition(&t, 0, false).unwrap();
        assert!(c.antipodal);
        assert!(c.plus_side * c.minus_side < 0.0);
    }
}
