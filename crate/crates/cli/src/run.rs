//! Scenario pipelines and their artifacts.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lattice_fracture::analysis::{self, ConvergenceTable};
use lattice_fracture::constructions::{
    self as cons, ConstructionResult, DomainSpec, SmallDeformationParams, StaircaseParams,
};
use lattice_fracture::energy::{self, Potential};
use lattice_fracture::geom::{self, Vec2};
use lattice_fracture::lattice::LatticeDomain;
use lattice_fracture::minimize::{self, BoundaryCondition, SolverParams};
use lattice_fracture::surface;
use rayon::prelude::*;
use serde_json::json;

use crate::output::{self, Cell};
use crate::render::{self, Figure};
use crate::scenario::{GroundStateScenario, Kind, Params, Scenario, SvgMode};

/// Exit status of a finished scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    /// At least one state fails strict admissibility: an expected negative.
    Inadmissible,
}

pub struct Options {
    pub out: PathBuf,
    pub name: String,
}

fn domain_spec(s: &Scenario, eps: f64) -> Result<DomainSpec> {
    let d = s.domain.as_ref().context("missing [domain]")?;
    Ok(DomainSpec { polygon: d.polygon.clone(), epsilon: eps, offset: d.offset.unwrap_or_else(Vec2::zeros) })
}

/// Extra tables produced alongside a construction.
type Extra = Vec<(String, Vec<u8>)>;

fn construct(s: &Scenario, eps: f64, pot: &Potential) -> Result<(ConstructionResult, Extra)> {
    let polygon = || -> Result<Vec<Vec2>> { Ok(domain_spec(s, eps)?.polygon) };
    let r = match &s.params {
        Params::StraightCrack(p) => cons::straight_crack(&domain_spec(s, eps)?, p, pot)?,
        Params::PolygonalCrack(p) => cons::polygonal_crack(&domain_spec(s, eps)?, p, pot)?,
        Params::Staircase(p) => {
            let sp =
                StaircaseParams { nu: p.nu, xbar: p.xbar, h: p.h.unwrap_or(p.k * eps), minus: p.minus, plus: p.plus };
            cons::staircase_approximation(&domain_spec(s, eps)?, &sp, pot)?
        }
        Params::TriplePoint(t) => cons::triple_point(&polygon()?, eps, &t.params(), pot)?,
        Params::SurfaceRelaxation(p) => cons::surface_relaxation(&domain_spec(s, eps)?, p, pot)?,
        Params::Multilayer(p) => cons::multilayer_fracture(&domain_spec(s, eps)?, p, pot)?,
        Params::HealingDemo(p) => cons::healing_fracture_demo(eps, p, pot)?,
        Params::MicrodeformedTriple(m) => {
            let poly = polygon()?;
            return match (m.fixed()?, &m.search) {
                (Some(p), _) => Ok((cons::microdeformed_triple_point(&poly, eps, &p, pot)?, Vec::new())),
                (None, Some(g)) => {
                    let triple = m.triple.params();
                    let (table, best) =
                        cons::microdeformed_grid_search(&poly, eps, &triple, &g.ds, &g.compressions, pot)?;
                    let rows: Vec<Vec<Cell>> = table
                        .iter()
                        .map(|c| {
                            vec![
                                Cell::I(c.ray as i64),
                                Cell::I(c.sector as i64),
                                Cell::F(c.d),
                                Cell::F(c.compression),
                                Cell::F(c.angle),
                                Cell::F(c.predicted_extra),
                                Cell::F(c.lp_margin.unwrap_or(f64::NAN)),
                                Cell::B(c.admissible),
                                Cell::F(c.energy),
                            ]
                        })
                        .collect();
                    let csv = output::csv_bytes(
                        &[
                            "ray",
                            "sector",
                            "d",
                            "compression",
                            "angle",
                            "predicted_extra",
                            "lp_margin",
                            "admissible",
                            "energy",
                        ],
                        &rows,
                    )?;
                    let extra = vec![("candidates".to_string(), csv)];
                    let r = match best {
                        Some(b) => {
                            let p = cons::MicroTripleParams {
                                triple,
                                ray: b.ray,
                                sector: b.sector,
                                d: b.d,
                                compression: b.compression,
                                angle: b.angle,
                                images: None,
                            };
                            cons::microdeformed_triple_point(&poly, eps, &p, pot)?
                        }
                        // Nothing repairs the centre: report the plain triple point.
                        None => cons::triple_point(&poly, eps, &triple, pot)?,
                    };
                    Ok((r, extra))
                }
                (None, None) => bail!("microdeformed-triple needs a placement or a search"),
            };
        }
        _ => bail!("{:?} is not a construction", s.kind),
    };
    Ok((r, Vec::new()))
}

fn admissible_at(domain: &LatticeDomain, u: &[Vec2], margin: f64) -> energy::Admissibility {
    energy::is_admissible(domain, u, margin)
}

fn write_figures(
    dir: &Path,
    tag: &str,
    domain: &LatticeDomain,
    r: &ConstructionResult,
    pot: &Potential,
    s: f64,
) -> Result<()> {
    let bad = analysis::classify_triangles(domain, &r.displacement, pot, s)?.bad;
    let violating = energy::is_admissible(domain, &r.displacement, 0.0).violating;
    let fig = Figure { domain, highlight: &r.highlight, bad: &bad, violating: &violating, cracks: &r.cracks };
    output::write_bytes(&dir.join(format!("reference_{tag}.svg")), render::reference_svg(&fig).as_bytes())?;
    output::write_bytes(
        &dir.join(format!("deformed_{tag}.svg")),
        render::deformed_svg(&fig, &r.displacement).as_bytes(),
    )?;
    Ok(())
}

fn write_bonds(path: &Path, domain: &LatticeDomain, u: &[Vec2], pot: &Potential) -> Result<()> {
    let w = energy::bond_measure(domain, u, pot);
    let rows: Vec<Vec<Cell>> = domain
        .bonds
        .iter()
        .zip(&w)
        .enumerate()
        .map(|(k, (b, &x))| {
            vec![Cell::I(k as i64), Cell::I(b.i as i64), Cell::I(b.j as i64), Cell::I(b.dir as i64), Cell::F(x)]
        })
        .collect();
    output::write_csv(path, &["bond", "i", "j", "direction", "weight"], &rows)
}

fn sorted_epsilons(s: &Scenario) -> Vec<f64> {
    let mut e = s.epsilons.clone();
    e.sort_by(|a, b| b.total_cmp(a));
    e.dedup();
    e
}

fn svg_wanted(mode: SvgMode, i: usize, n: usize) -> bool {
    match mode {
        SvgMode::All => true,
        SvgMode::Finest => i + 1 == n,
        SvgMode::None => false,
    }
}

fn run_constructions(s: &Scenario, o: &Options) -> Result<Verdict> {
    let pot = Potential::new(s.j_inf);
    let eps = sorted_epsilons(s);
    let results: Vec<(ConstructionResult, Extra)> =
        eps.par_iter().map(|&e| construct(s, e, &pot)).collect::<Result<_>>()?;
    let table: ConvergenceTable = analysis::convergence_study(&eps, |e| {
        let k = eps.iter().position(|&x| x == e).expect("epsilon from the list");
        let r = &results[k].0;
        Ok((r.energy, r.predicted_limit, r.admissible))
    })?;
    let mut entries = Vec::new();
    let mut verdict = Verdict::Ok;
    let mut rows = Vec::new();
    for (i, ((r, extra), row)) in results.iter().zip(&table.rows).enumerate() {
        let tag = format!("{i:02}");
        let domain = r.domain()?;
        let adm = admissible_at(&domain, &r.displacement, s.margin);
        if !adm.admissible {
            verdict = Verdict::Inadmissible;
            eprintln!(
                "epsilon {}: {} violating triangles (min det {}), first: {:?}",
                output::float(row.epsilon),
                adm.violating.len(),
                output::float(adm.min_det),
                &adm.violating[..adm.violating.len().min(20)]
            );
        }
        let state = format!("state_{tag}.json");
        output::write_json(&o.out.join(&state), r)?;
        write_bonds(&o.out.join(format!("bonds_{tag}.csv")), &domain, &r.displacement, &pot)?;
        for (name, bytes) in extra {
            output::write_bytes(&o.out.join(format!("{name}_{tag}.csv")), bytes)?;
        }
        if svg_wanted(s.svg, i, results.len()) {
            write_figures(&o.out, &tag, &domain, r, &pot, s.s_threshold)?;
        }
        let bad = analysis::classify_triangles(&domain, &r.displacement, &pot, s.s_threshold)?.bad.len();
        rows.push(vec![
            Cell::F(row.epsilon),
            Cell::F(r.energy),
            Cell::F(r.predicted_limit),
            Cell::F(row.error),
            Cell::B(adm.admissible),
            Cell::B(r.conditions_hold),
            Cell::F(adm.min_det),
            Cell::I(adm.violating.len() as i64),
            Cell::I(bad as i64),
        ]);
        entries.push(json!({
            "epsilon": row.epsilon,
            "state": state,
            "energy": r.energy,
            "predicted_limit": r.predicted_limit,
            "relative_error": row.error,
            "admissible": adm.admissible,
            "conditions_hold": r.conditions_hold,
            "min_det": adm.min_det,
            "violating": adm.violating,
            "bad_triangles": bad,
        }));
    }
    output::write_csv(
        &o.out.join("convergence.csv"),
        &[
            "epsilon",
            "energy",
            "predicted",
            "relative_error",
            "admissible",
            "conditions_hold",
            "min_det",
            "violating",
            "bad_triangles",
        ],
        &rows,
    )?;
    let summary = json!({
        "scenario": o.name,
        "kind": s.kind,
        "seed": s.seed,
        "j_inf": s.j_inf,
        "s_threshold": s.s_threshold,
        "margin": s.margin,
        "order": table.order,
        "results": entries,
        "exit_code": exit_code(verdict),
    });
    output::write_json(&o.out.join("summary.json"), &summary)?;
    for e in &entries {
        println!(
            "epsilon {}  energy {}  predicted {}  error {}  admissible {}",
            output::float(e["epsilon"].as_f64().unwrap_or(f64::NAN)),
            output::float(e["energy"].as_f64().unwrap_or(f64::NAN)),
            output::float(e["predicted_limit"].as_f64().unwrap_or(f64::NAN)),
            output::float(e["relative_error"].as_f64().unwrap_or(f64::NAN)),
            e["admissible"]
        );
    }
    Ok(verdict)
}

fn run_small(s: &Scenario, o: &Options) -> Result<Verdict> {
    let Params::SmallDeformation(p) = &s.params else { unreachable!() };
    let pot = Potential::new(s.j_inf);
    let eps = sorted_epsilons(s);
    let sp = SmallDeformationParams {
        nu: p.nu,
        xbar: p.xbar,
        w: p.w,
        omega_minus: p.omega_minus,
        omega_plus: p.omega_plus,
        epsilons: eps,
        deltas: p.deltas.clone(),
    };
    let polygon = domain_spec(s, 1.0)?.polygon;
    let rows = cons::small_deformation_scaling(&polygon, &sp, &pot)?;
    let table: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                Cell::F(r.epsilon),
                Cell::F(r.delta),
                Cell::B(r.admissible),
                Cell::F(r.min_det),
                Cell::F(r.energy),
                Cell::F(r.v_normal),
                Cell::F(r.minus_side),
                Cell::F(r.plus_side),
            ]
        })
        .collect();
    output::write_csv(
        &o.out.join("small_deformation.csv"),
        &["epsilon", "delta", "admissible", "min_det", "energy", "v_normal", "minus_side", "plus_side"],
        &table,
    )?;
    let verdict = if rows.iter().all(|r| r.admissible) { Verdict::Ok } else { Verdict::Inadmissible };
    output::write_json(
        &o.out.join("summary.json"),
        &json!({ "scenario": o.name, "kind": s.kind, "seed": s.seed, "rows": rows, "exit_code": exit_code(verdict) }),
    )?;
    for r in &rows {
        println!(
            "epsilon {}  delta {}  admissible {}  <v+ - v-, nu> {}",
            output::float(r.epsilon),
            output::float(r.delta),
            r.admissible,
            output::float(r.v_normal)
        );
    }
    Ok(verdict)
}

pub fn run_minimize(s: &Scenario, o: &Options) -> Result<Verdict> {
    let Params::Minimize(p) = &s.params else { bail!("the minimize subcommand needs kind = \"minimize\"") };
    let pot = Potential::new(s.j_inf);
    let bc = BoundaryCondition { clamps: p.clamps.clone() };
    let eps = sorted_epsilons(s);
    let mut entries = Vec::new();
    let mut verdict = Verdict::Ok;
    for (i, &e) in eps.iter().enumerate() {
        let tag = format!("{i:02}");
        let spec = domain_spec(s, e)?;
        let domain = spec.build()?;
        let mut params = SolverParams::for_epsilon(e, p.stages);
        if let Some(m) = p.max_iter {
            params.max_iter = m;
        }
        if let Some(g) = p.grad_tol {
            params.grad_tol = g;
        }
        let out =
            minimize::minimize_with_loading(&domain, &bc, &pot, &params, s.s_threshold, p.load_steps, p.weak_layer)?;
        let trace: Vec<Vec<Cell>> = out
            .trace
            .iter()
            .map(|t| {
                vec![
                    Cell::I(t.iteration as i64),
                    Cell::F(t.mu),
                    Cell::F(t.energy),
                    Cell::F(t.min_det),
                    Cell::F(t.grad_norm),
                ]
            })
            .collect();
        output::write_csv(
            &o.out.join(format!("trace_{tag}.csv")),
            &["iteration", "mu", "energy", "min_det", "grad_norm"],
            &trace,
        )?;
        let split = analysis::energy_split(&domain, &out.u, &pot, s.s_threshold)?;
        let bad = analysis::classify_triangles(&domain, &out.u, &pot, s.s_threshold)?.bad;
        let adm = admissible_at(&domain, &out.u, s.margin);
        if !adm.admissible {
            verdict = Verdict::Inadmissible;
        }
        let part = analysis::extract_rigid_partition(&domain, &out.u, &pot, s.s_threshold)?;
        let result = ConstructionResult {
            name: "minimize".into(),
            domain_spec: DomainSpec { offset: domain.offset, ..spec.clone() },
            domain: None,
            displacement: out.u.clone(),
            predicted_limit: 0.0,
            energy: out.report.bond_sum,
            admissible: out.report.admissible,
            violating: out.report.violating.clone(),
            min_det: out.report.min_det,
            conditions_hold: true,
            cracks: Vec::new(),
            highlight: Vec::new(),
            params: serde_json::to_value(p)?,
            diagnostics: json!({
                "converged": out.converged,
                "iterations": out.trace.len(),
                "elastic": split.elastic,
                "surface": split.surface,
                "bad_triangles": bad.len(),
                "clusters": part.clusters.iter().map(|c| json!({
                    "triangles": c.triangles.len(), "angle": c.angle, "q": c.q, "residual": c.residual,
                })).collect::<Vec<_>>(),
            }),
        };
        let state = format!("state_{tag}.json");
        output::write_json(&o.out.join(&state), &result)?;
        write_bonds(&o.out.join(format!("bonds_{tag}.csv")), &domain, &out.u, &pot)?;
        if svg_wanted(s.svg, i, eps.len()) {
            write_figures(&o.out, &tag, &domain, &result, &pot, s.s_threshold)?;
        }
        println!(
            "epsilon {}  energy {}  elastic {}  surface {}  bad triangles {}  converged {}",
            output::float(e),
            output::float(result.energy),
            output::float(split.elastic),
            output::float(split.surface),
            bad.len(),
            out.converged
        );
        entries.push(json!({
            "epsilon": e,
            "state": state,
            "trace": format!("trace_{tag}.csv"),
            "energy": result.energy,
            "elastic": split.elastic,
            "surface": split.surface,
            "bad_triangles": bad.len(),
            "converged": out.converged,
            "admissible": adm.admissible,
            "min_det": adm.min_det,
        }));
    }
    output::write_json(
        &o.out.join("summary.json"),
        &json!({ "scenario": o.name, "kind": s.kind, "seed": s.seed, "results": entries, "exit_code": exit_code(verdict) }),
    )?;
    Ok(verdict)
}

pub fn wulff(samples: usize, j_inf: f64, out: &Path) -> Result<()> {
    let w = surface::wulff_polygon();
    let polar = surface::polar_table(samples, j_inf);
    let rows: Vec<Vec<Cell>> = polar.iter().map(|&(a, f)| vec![Cell::F(a), Cell::F(f)]).collect();
    output::write_csv(&out.join("polar.csv"), &["angle", "phi"], &rows)?;
    output::write_json(&out.join("wulff.json"), &json!({ "j_inf": j_inf, "wulff": w, "polar": polar }))?;
    // Polar plot of φ/J∞ against the hexagon of radius 2/√3 (the Wulff shape scaled by 4/√3 · √3/2 = 2).
    let scale = 150.0;
    let c = 200.0;
    let pt = |p: Vec2| format!("{:.2},{:.2}", c + scale * p.x, c - scale * p.y);
    let hex: Vec<String> = w.vertices.iter().map(|&p| pt(p)).collect();
    let curve: Vec<String> = polar.iter().map(|&(a, f)| pt(geom::unit(a) * (f / j_inf / 2.0))).collect();
    let svg = format!(
        concat!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="400" height="400" viewBox="0 0 400 400">"#,
            "\n",
            r##"<rect width="100%" height="100%" fill="#ffffff"/>"##,
            "\n",
            r#"<polygon points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            "\n",
            r#"<polyline points="{} {}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            "\n</svg>\n"
        ),
        hex.join(" "),
        render::CRACK,
        curve.join(" "),
        curve[0],
        render::BAD
    );
    output::write_bytes(&out.join("wulff.svg"), svg.as_bytes())?;
    println!("wrote {} polar samples to {}", samples, out.display());
    Ok(())
}

pub fn ground_state(p: &GroundStateScenario, j_inf: f64, out: &Path) -> Result<()> {
    let scan = energy::ground_state_scan(&Potential::new(j_inf), p.r_min, p.r_max, p.samples, p.cutoff)?;
    let rows: Vec<Vec<Cell>> = (0..scan.r.len())
        .map(|i| vec![Cell::F(scan.r[i]), Cell::F(scan.e[i]), Cell::F(scan.rho[i]), Cell::F(scan.f[i])])
        .collect();
    output::write_csv(&out.join("ground_state.csv"), &["r", "e", "rho", "f"], &rows)?;
    output::write_json(&out.join("ground_state.json"), &scan)?;
    println!("r_bar {}  e_min {}", output::float(scan.r_bar), output::float(scan.e_min));
    Ok(())
}

pub fn exit_code(v: Verdict) -> u8 {
    match v {
        Verdict::Ok => 0,
        Verdict::Inadmissible => 2,
    }
}

pub fn run(s: &Scenario, o: &Options) -> Result<Verdict> {
    match s.kind {
        Kind::SmallDeformation => run_small(s, o),
        Kind::Minimize => run_minimize(s, o),
        Kind::Wulff => {
            let Params::Wulff(p) = &s.params else { unreachable!() };
            wulff(p.samples, s.j_inf, &o.out).map(|_| Verdict::Ok)
        }
        Kind::GroundState => {
            let Params::GroundState(p) = &s.params else { unreachable!() };
            ground_state(p, s.j_inf, &o.out).map(|_| Verdict::Ok)
        }
        _ => run_constructions(s, o),
    }
}

/// Recompute a stored state and write its figures; fails if the stored energy does not round-trip.
pub fn render_state(path: &Path, out: &Path, j_inf: f64, s_threshold: f64) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let r: ConstructionResult =
        serde_json::from_str(&text).with_context(|| format!("malformed state {}", path.display()))?;
    let domain = r.domain()?;
    let pot = Potential::new(j_inf);
    let rep = energy::total_energy(&domain, &r.displacement, &pot)?;
    if rep.bond_sum != r.energy {
        bail!("stored energy {} differs from the recomputed {}", output::float(r.energy), output::float(rep.bond_sum));
    }
    write_figures(out, "state", &domain, &r, &pot, s_threshold)?;
    println!("energy {}  admissible {}", output::float(rep.bond_sum), rep.admissible);
    Ok(())
}
