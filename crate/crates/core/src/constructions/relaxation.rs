use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{finish, json, line_cracks, ConstructionResult, DomainSpec, Rigid};
use crate::energy::{self, Potential};
use crate::geom::{self, v, Vec2, SQRT3};
use crate::Error;

/// Vertical crack (normal (1,0)) through `xbar` with relaxed faces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelaxationParams {
    pub xbar: Vec2,
    pub minus: Rigid,
    pub plus: Rigid,
}

/// Per-row cost 2J∞ + 2J(√3/2) + J(1/2) of the relaxed single layer.
pub fn relaxed_row_density(pot: &Potential) -> f64 {
    2.0 * pot.j_inf + 2.0 * pot.j(0.5 * SQRT3) + pot.j(0.5)
}

fn plain_cut(domain: &crate::lattice::LatticeDomain, p: &RelaxationParams) -> Vec<Vec2> {
    let tol = 1e-9 * domain.epsilon;
    domain.nodes.iter().map(|&x| if x.x - p.xbar.x > tol { p.plus.apply(x) } else { p.minus.apply(x) }).collect()
}

/// Range of jump angles (degrees from ν, jump of length `len`, no rotation) for which
/// the unrelaxed pointwise cut is admissible at mesh size `epsilon`.
pub fn plain_cut_admissible_angles(
    polygon: &[Vec2],
    epsilon: f64,
    xbar: Vec2,
    len: f64,
) -> Result<Option<(f64, f64)>, Error> {
    let domain = DomainSpec { polygon: polygon.to_vec(), epsilon, offset: Vec2::zeros() }.build()?;
    let mut ok = Vec::new();
    for deg in -90..=90 {
        let q = geom::unit((deg as f64).to_radians()) * len;
        let p = RelaxationParams { xbar, minus: Rigid::identity(), plus: Rigid::translation(q) };
        let u = plain_cut(&domain, &p);
        if energy::is_admissible(&domain, &u, 0.0).admissible {
            ok.push(deg as f64);
        }
    }
    Ok(ok.first().map(|lo| (*lo, *ok.last().unwrap())))
}

/// Single-layer crack with normal (1,0) whose face rows are flattened.
///
/// In every lattice row, the last node left of the crack and the first node to
/// its right form the two faces. Face nodes that stick out by half a spacing
/// are pulled back by ε/2, so both deformed faces become straight lines at
/// reference distance 3ε/2. Each flattened node leaves one bond compressed to
/// ε/2 and two compressed to √3ε/2.
pub fn surface_relaxation(
    spec: &DomainSpec,
    p: &RelaxationParams,
    pot: &Potential,
) -> Result<ConstructionResult, Error> {
    let nu = v(1.0, 0.0);
    let jump = p.plus.apply(p.xbar) - p.minus.apply(p.xbar);
    if jump.dot(&nu) < 0.0 {
        return Err(Error::InvalidParameter(
            "surface relaxation needs a jump with nonnegative normal component; use the multilayer construction".into(),
        ));
    }
    let domain = spec.build()?;
    let eps = domain.epsilon;
    let tol = 1e-9 * eps;
    let minus_side = |x: Vec2| x.x - p.xbar.x <= tol;

    // Face nodes per row: b -> (last minus a, first plus a)
    let mut rows: BTreeMap<i64, (Option<usize>, Option<usize>)> = BTreeMap::new();
    for (n, &x) in domain.nodes.iter().enumerate() {
        let b = domain.coords[n].1;
        let e = rows.entry(b).or_default();
        if minus_side(x) {
            if e.0.is_none_or(|m| domain.nodes[m].x < x.x) {
                e.0 = Some(n);
            }
        } else if e.1.is_none_or(|m| domain.nodes[m].x > x.x) {
            e.1 = Some(n);
        }
    }
    let mut shift = vec![0.0; domain.n_nodes()];
    let mut crossing_rows = 0usize;
    for (l, r) in rows.values() {
        if let (Some(l), Some(r)) = (l, r) {
            crossing_rows += 1;
            if (p.xbar.x - domain.nodes[*l].x) < 0.5 * eps - tol {
                shift[*l] = -0.5 * eps;
            }
            if (domain.nodes[*r].x - p.xbar.x) <= 0.5 * eps + tol {
                shift[*r] = 0.5 * eps;
            }
        }
    }
    let u: Vec<Vec2> = domain
        .nodes
        .iter()
        .enumerate()
        .map(|(n, &x)| {
            let y = x + v(shift[n], 0.0);
            if minus_side(x) {
                p.minus.apply(y)
            } else {
                p.plus.apply(y)
            }
        })
        .collect();

    let cracks = line_cracks(&domain.polygon, p.xbar, nu, 0, 1);
    let length: f64 = cracks.iter().map(|c| c.length()).sum();
    let row_density = relaxed_row_density(pot);
    // Rows are √3ε/2 apart, so a unit length holds 2/(√3ε) rows.
    let predicted = row_density * 2.0 / SQRT3 * length;
    let plain = plain_cut(&domain, p);
    let plain_energy = crate::fixed_order_sum(&energy::bond_measure(&domain, &plain, pot));
    let plain_admissible = energy::is_admissible(&domain, &plain, 0.0).admissible;
    let moved: Vec<usize> = (0..domain.n_nodes()).filter(|&n| shift[n] != 0.0).collect();
    let highlight: Vec<usize> =
        (0..domain.triangles.len()).filter(|&t| domain.triangles[t].iter().any(|n| shift[*n] != 0.0)).collect();
    let mut r = finish(
        "surface-relaxation",
        spec,
        domain,
        u,
        predicted,
        pot,
        true,
        cracks.iter().map(|c| (c.a, c.b)).collect(),
        highlight,
        json(p),
        serde_json::Value::Null,
    );
    let per_row = r.energy / (eps * crossing_rows as f64);
    r.diagnostics = serde_json::json!({
        "crossing_rows": crossing_rows,
        "moved_nodes": moved.len(),
        "row_density_predicted": row_density,
        "row_density_measured": per_row,
        "length_density_predicted": row_density * 2.0 / SQRT3,
        "length_density_measured": r.energy / length,
        "plain_cut_energy": plain_energy,
        "plain_cut_admissible": plain_admissible,
        "staircase_length_density": crate::surface::phi(nu, pot.j_inf),
    });
    Ok(r)
}
