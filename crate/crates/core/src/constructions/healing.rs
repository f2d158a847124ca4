use serde::{Deserialize, Serialize};

use super::layers::{search_rigid_layers, LayerSpec};
use super::{
    check_opening_condition, finish, json, line_cracks, mixed_triangles, node_labels, pointwise_interpolation,
    ConstructionResult, CrackSegment, DomainSpec, PiecewiseRigidMap, Region, RegionShape, Rigid,
};
use crate::energy::{self, Potential};
use crate::geom::{self, perp, v, Vec2, SQRT3};
use crate::surface;
use crate::Error;

/// An inner triangle translated inside a domain so that one of its edges interpenetrates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "kebab-case")]
pub enum HealingScenario {
    /// Domain: the unit upward triangle. The central downward triangle of its
    /// midpoint subdivision is translated by `translation`. All crack edges end
    /// on the boundary, and the detached rows run along the violated edge only.
    TranslatedInnerTriangle { translation: Vec2 },
    /// Domain: the unit square. An upward triangle with the given centroid and
    /// side lies strictly inside and is translated by `translation`. The rows
    /// run along the whole chord of the violated edge's line, which adds an
    /// auxiliary crack outside the triangle.
    InteriorTriangleWithAuxiliaryCut { centroid: Vec2, side: f64, translation: Vec2 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HealingParams {
    #[serde(flatten)]
    pub scenario: HealingScenario,
    #[serde(default = "default_layers")]
    pub layers: usize,
}

fn default_layers() -> usize {
    2
}

impl HealingScenario {
    fn geometry(&self) -> (Vec<Vec2>, Vec<Vec2>, Vec2) {
        match *self {
            HealingScenario::TranslatedInnerTriangle { translation } => {
                let outer = vec![v(0.0, 0.0), v(1.0, 0.0), v(0.5, 0.5 * SQRT3)];
                let inner = vec![v(0.5, 0.0), v(0.75, 0.25 * SQRT3), v(0.25, 0.25 * SQRT3)];
                (outer, inner, translation)
            }
            HealingScenario::InteriorTriangleWithAuxiliaryCut { centroid, side, translation } => {
                let outer = vec![v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0), v(0.0, 1.0)];
                let r = side / SQRT3;
                let inner = [210.0f64, 330.0, 90.0].map(|d| centroid + geom::unit(d.to_radians()) * r).to_vec();
                (outer, inner, translation)
            }
        }
    }

    pub fn target(&self) -> (Vec<Vec2>, PiecewiseRigidMap) {
        let (outer, inner, t) = self.geometry();
        let n = inner.len();
        let cracks = (0..n)
            .flat_map(|k| {
                let (a, b) = (inner[k], inner[(k + 1) % n]);
                let normal = -perp(b - a).normalize();
                geom::clip_segment(&outer, a, b).into_iter().map(move |(p, q)| CrackSegment {
                    a: p,
                    b: q,
                    normal,
                    minus: 1,
                    plus: 0,
                })
            })
            .collect();
        let target = PiecewiseRigidMap {
            regions: vec![
                Region { shape: RegionShape::All, map: Rigid::identity() },
                Region { shape: RegionShape::Polygon { vertices: inner }, map: Rigid::translation(t) },
            ],
            cracks,
        };
        (outer, target)
    }
}

/// Rigidly translated inner triangle, healed by detached rows along the one interpenetrating edge line.
pub fn healing_fracture_demo(epsilon: f64, p: &HealingParams, pot: &Potential) -> Result<ConstructionResult, Error> {
    let (outer, target) = p.scenario.target();
    let spec = DomainSpec::new(outer, epsilon);
    let domain = spec.build()?;
    let naive = pointwise_interpolation(&domain, &target);
    let labels = node_labels(&domain, &target);
    let checks: Vec<_> =
        (0..target.cracks.len()).map(|c| check_opening_condition(&target, c, false)).collect::<Result<_, _>>()?;
    let violated: Vec<usize> = checks.iter().filter(|c| c.delta < 0.0).map(|c| c.crack).collect();
    if violated.len() > 1 {
        return Err(Error::InvalidParameter("only one interpenetrating edge can be healed".into()));
    }
    let naive_adm = energy::is_admissible(&domain, &naive, 0.0);
    let naive_energy = crate::fixed_order_sum(&energy::bond_measure(&domain, &naive, pot));
    let griffith = |c: &CrackSegment| surface::phi(c.normal, pot.j_inf) * c.length();

    let Some(&bad) = violated.first() else {
        let predicted = target.griffith_energy(pot.j_inf);
        let highlight = mixed_triangles(&domain, &labels);
        let cracks = target.cracks.iter().map(|c| (c.a, c.b)).collect();
        let mut r = finish(
            "healing",
            &spec,
            domain,
            naive,
            predicted,
            pot,
            true,
            cracks,
            highlight,
            json(p),
            serde_json::Value::Null,
        );
        r.diagnostics = serde_json::json!({
            "opening": checks,
            "naive_energy": naive_energy,
            "naive_admissible": naive_adm.admissible,
            "layered_line": serde_json::Value::Null,
        });
        return Ok(r);
    };

    let c = target.cracks[bad];
    let line = line_cracks(&domain.polygon, c.a, c.normal, c.minus, c.plus);
    let chord: f64 = line.iter().map(|s| s.length()).sum();
    let h = 0.5 * SQRT3 * epsilon;
    // Shift by half a row so that nodes lying on the line join the first row.
    let rows =
        LayerSpec { point: c.a - c.normal * (0.5 * h), nu: c.normal, layers: p.layers, region: c.plus, window: None }
            .assign(&domain, &labels);
    let bound = 4.0 * (geom::diameter(&domain.polygon) + 1.0);
    let plan = if p.layers > 0 { search_rigid_layers(&domain, &naive, &rows, p.layers, bound) } else { None };
    let found = plan.is_some();
    let (u, plan) = match plan {
        Some((plan, u)) => (u, Some(plan)),
        None => (naive.clone(), None),
    };
    let others: f64 = target.cracks.iter().enumerate().filter(|&(k, _)| k != bad).map(|(_, s)| griffith(s)).sum();
    let predicted = others + 2.0 * (p.layers as f64 + 1.0) * pot.j_inf * chord;
    let perimeter: f64 = target.cracks.iter().map(|s| s.length()).sum();
    let auxiliary = chord - c.length();
    let highlight = (0..domain.triangles.len()).filter(|&t| domain.triangles[t].iter().any(|&n| rows[n] > 0)).collect();
    let mut cracks: Vec<(Vec2, Vec2)> = target.cracks.iter().map(|s| (s.a, s.b)).collect();
    cracks.extend(line.iter().map(|s| (s.a, s.b)));
    let mut r =
        finish("healing", &spec, domain, u, predicted, pot, found, cracks, highlight, json(p), serde_json::Value::Null);
    r.diagnostics = serde_json::json!({
        "opening": checks,
        "naive_energy": naive_energy,
        "naive_admissible": naive_adm.admissible,
        "naive_violating": naive_adm.violating.len(),
        "layered_line": [line.first().map(|s| s.a), line.last().map(|s| s.b)],
        "layered_chord": chord,
        "auxiliary_length": auxiliary,
        "perimeter": perimeter,
        "perimeter_griffith": 2.0 * pot.j_inf * perimeter,
        "auxiliary_griffith": 2.0 * pot.j_inf * auxiliary,
        "layer_plan": plan,
        "layers_found": found,
    });
    Ok(r)
}
