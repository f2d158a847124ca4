use serde::{Deserialize, Serialize};

use super::layers::{search_rigid_layers, LayerSpec};
use super::{
    check_opening_condition, finish, json, mixed_triangles, node_labels, pointwise_interpolation, ConstructionResult,
    DomainSpec, Rigid, StraightCrackParams,
};
use crate::energy::Potential;
use crate::geom::{self, Vec2};
use crate::lattice::LatticeVectors;
use crate::Error;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultilayerParams {
    pub nu: Vec2,
    pub xbar: Vec2,
    pub minus: Rigid,
    pub plus: Rigid,
    /// Number of detached rows taken from the plus side.
    pub layers: usize,
}

/// Straight crack with `layers` detached rows of atoms between the two faces.
///
/// The rows are the first `layers` lattice rows on the plus side. Each is
/// mapped rigidly; rotations come from a schedule search and translations from
/// a linear program on the determinants. Every interface costs 2J∞ per unit
/// length, so the prediction is 2(n+1)J∞ times the crack length.
pub fn multilayer_fracture(
    spec: &DomainSpec,
    p: &MultilayerParams,
    pot: &Potential,
) -> Result<ConstructionResult, Error> {
    if !LatticeVectors::is_coordinate_direction(p.nu) {
        return Err(Error::InvalidParameter("multilayer crack normal must be a coordinate direction".into()));
    }
    let sp = StraightCrackParams::new(p.nu, p.xbar, p.minus, p.plus);
    let domain = spec.build()?;
    let target = sp.target(&domain.polygon);
    let base = pointwise_interpolation(&domain, &target);
    let labels = node_labels(&domain, &target);
    let checks: Vec<_> =
        (0..target.cracks.len()).map(|c| check_opening_condition(&target, c, false)).collect::<Result<_, _>>()?;
    let opening_holds = checks.iter().all(|c| c.delta >= 0.0 && !c.antipodal);
    let length: f64 = target.cracks.iter().map(|c| c.length()).sum();
    let predicted = 2.0 * (p.layers as f64 + 1.0) * pot.j_inf * length;
    let cracks: Vec<(Vec2, Vec2)> = target.cracks.iter().map(|c| (c.a, c.b)).collect();

    let rows =
        LayerSpec { point: p.xbar, nu: p.nu, layers: p.layers, region: 1, window: None }.assign(&domain, &labels);
    let bound = 4.0 * (geom::diameter(&domain.polygon) + (p.plus.q - p.minus.q).norm() + 1.0);
    let plan = if p.layers > 0 { search_rigid_layers(&domain, &base, &rows, p.layers, bound) } else { None };
    let found = plan.is_some();
    let (u, plan) = match plan {
        Some((plan, u)) => (u, Some(plan)),
        None => (base, None),
    };
    let highlight = if found {
        (0..domain.triangles.len()).filter(|&t| domain.triangles[t].iter().any(|&n| rows[n] > 0)).collect()
    } else {
        mixed_triangles(&domain, &labels)
    };
    let mut r = finish(
        "multilayer",
        spec,
        domain,
        u,
        predicted,
        pot,
        found || opening_holds,
        cracks,
        highlight,
        json(p),
        serde_json::Value::Null,
    );
    r.diagnostics = serde_json::json!({
        "opening": checks,
        "crack_length": length,
        "per_length": r.energy / length,
        "layer_plan": plan,
        "layers_found": found,
        "detached_nodes": rows.iter().filter(|&&k| k > 0).count(),
        "prediction_extrapolated": p.layers >= 2,
    });
    Ok(r)
}
