use lattice_fracture::analysis;
use lattice_fracture::constructions::{healing_fracture_demo, DomainSpec, HealingParams, HealingScenario};
use lattice_fracture::energy::{self, Potential};
use lattice_fracture::geom::v;
use lattice_fracture::minimize::{self, BoundaryCondition, Clamp, Prescription, SolverParams};

#[test]
fn interior_triangle_needs_auxiliary_cut() {
    let pot = Potential::default();
    let p = HealingParams {
        scenario: HealingScenario::InteriorTriangleWithAuxiliaryCut {
            centroid: v(0.5, 0.5),
            side: 0.4,
            translation: v(0.0, -0.04),
        },
        layers: 2,
    };
    let r = healing_fracture_demo(1.0 / 32.0, &p, &pot).unwrap();
    let d = &r.diagnostics;
    assert!(!d["naive_admissible"].as_bool().unwrap());
    assert!(r.admissible, "violating {}", r.violating.len());
    let aux = d["auxiliary_length"].as_f64().unwrap();
    assert!(aux > 0.5, "auxiliary length {aux}");
    let floor = d["perimeter_griffith"].as_f64().unwrap() + d["auxiliary_griffith"].as_f64().unwrap();
    assert!(r.energy >= floor, "energy {} below {floor}", r.energy);
}

fn strip_bc(stretch: f64) -> BoundaryCondition {
    // Polygon edges: 0 bottom, 1 right, 2 top, 3 left.
    BoundaryCondition {
        clamps: vec![
            Clamp { edges: vec![3], width: 0.1, map: Prescription::identity() },
            Clamp { edges: vec![1], width: 0.1, map: Prescription::Rigid { angle: 0.0, q: v(stretch, 0.0) } },
        ],
    }
}

struct Relaxed {
    energy: f64,
    surface: f64,
    bad_x: Vec<f64>,
}

fn relax(stretch: f64) -> Relaxed {
    let pot = Potential::default();
    let spec = DomainSpec::new(vec![v(0.0, 0.0), v(3.0, 0.0), v(3.0, 1.0), v(0.0, 1.0)], 1.0 / 8.0);
    let d = spec.build().unwrap();
    let bc = strip_bc(stretch);
    let params = SolverParams::for_epsilon(d.epsilon, 3);
    let out = minimize::minimize_with_loading(&d, &bc, &pot, &params, 0.5, 10, Some(1.5)).unwrap();
    let e = out.report.total().unwrap();
    let split = analysis::energy_split(&d, &out.u, &pot, 0.5).unwrap();
    let bad = analysis::classify_triangles(&d, &out.u, &pot, 0.5).unwrap().bad;
    let bad_x = bad.iter().map(|&t| d.triangles[t].iter().map(|&n| d.nodes[n].x).sum::<f64>() / 3.0).collect();
    assert!(energy::is_admissible(&d, &out.u, 0.0).admissible);
    assert!((split.elastic + split.surface - e).abs() < 1e-9 * (1.0 + e));
    Relaxed { energy: e, surface: split.surface, bad_x }
}

#[test]
fn small_stretch_stays_elastic() {
    let r = relax(0.05);
    assert!(r.bad_x.is_empty(), "energy {}, surface {}", r.energy, r.surface);
}

#[test]
fn large_stretch_breaks_along_one_line() {
    let r = relax(1.5);
    assert!(!r.bad_x.is_empty());
    let (lo, hi) = r.bad_x.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi - lo < 0.5, "bad triangles spread over [{lo}, {hi}]");
    // Best lattice normal near (1,0) within the staircase family.
    let target = lattice_fracture::surface::phi(v(1.0, 0.0), 1.0);
    assert!((r.energy - target).abs() < 0.15 * target, "energy {} vs {target}", r.energy);
}

mod construction_invariants {
    use lattice_fracture::analysis;
    use lattice_fracture::constructions::*;
    use lattice_fracture::energy::{self, Potential};
    use lattice_fracture::geom::{v, SQRT3};
    use std::f64::consts::PI;

    fn square() -> Vec<lattice_fracture::geom::Vec2> {
        vec![v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0), v(0.0, 1.0)]
    }

    fn build(name: &str, eps: f64) -> ConstructionResult {
        let pot = Potential::default();
        let spec = DomainSpec::unit_square(eps);
        match name {
            "straight" => straight_crack(
                &spec,
                &StraightCrackParams::new(v(0.0, 1.0), v(0.5, 0.5), Rigid::identity(), Rigid::translation(v(0.1, 0.3))),
                &pot,
            ),
            "polygonal" => {
                let t = 50.0;
                let p = PolygonalParams {
                    plus_region: vec![
                        v(-1.0, 0.5),
                        v(0.5, 0.5),
                        v(0.5 + 0.5 * t, 0.5 + 0.5 * SQRT3 * t),
                        v(-1.0, 0.5 + t),
                    ],
                    minus: Rigid::identity(),
                    plus: Rigid::translation(v(-0.2, 0.3)),
                };
                // Keep the corner at the same position inside its lattice cell for every ε.
                let spec = DomainSpec { offset: v(0.5, 0.5) - v(1.5, 0.5 * SQRT3) * (eps / 3.0), ..spec };
                polygonal_crack(&spec, &p, &pot)
            }
            "staircase" => {
                let spec = DomainSpec { offset: v(0.5, 0.5) - v(1.5, 0.5 * SQRT3) * (eps / 3.0), ..spec };
                let p = StaircaseParams {
                    nu: v(1.0, 0.0),
                    xbar: v(0.5, 0.5),
                    h: 16.0 * eps,
                    minus: Rigid::identity(),
                    plus: Rigid::translation(v(0.3, 0.0)),
                };
                staircase_approximation(&spec, &p, &pot)
            }
            "relaxation" => {
                // Height of 14 row spacings at ε = 1/16, so every ε/2 refinement has a whole number of rows.
                let h = 14.0 * 0.5 * SQRT3 / 16.0;
                let spec = DomainSpec::new(vec![v(0.0, 0.0), v(1.0, 0.0), v(1.0, h), v(0.0, h)], eps);
                let p = RelaxationParams {
                    xbar: v(0.5, 0.5 * h),
                    minus: Rigid::identity(),
                    plus: Rigid::translation(v(0.05, 0.3)),
                };
                surface_relaxation(&spec, &p, &pot)
            }
            "multilayer" => {
                let p = MultilayerParams {
                    nu: v(0.0, 1.0),
                    xbar: v(0.5, 0.5),
                    minus: Rigid::identity(),
                    plus: Rigid::about(PI, v(0.5, 0.5), v(0.0, 0.3)),
                    layers: 1,
                };
                multilayer_fracture(&spec, &p, &pot)
            }
            "triple" => triple_point(&square(), eps, &TripleParams::symmetric(v(0.5, 0.5), 0.3, 0.1, false), &pot),
            _ => unreachable!(),
        }
        .unwrap()
    }

    #[test]
    fn admissible_constructions_are_consistent_and_dominate_the_bound() {
        let pot = Potential::default();
        for name in ["straight", "polygonal", "staircase", "relaxation", "multilayer", "triple"] {
            for eps in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
                let r = build(name, eps);
                assert!(r.admissible || (name == "multilayer" && eps > 1.0 / 32.0), "{name} at {eps}");
                if !r.admissible {
                    continue;
                }
                let d = r.domain().unwrap();
                assert!(energy::is_admissible(&d, &r.displacement, 0.0).admissible);
                for s in [0.5, 0.9] {
                    assert!(
                        analysis::slicing_lower_bound(&d, &r.displacement, &pot, s).unwrap() <= r.energy,
                        "{name} s={s}"
                    );
                }
            }
        }
    }

    #[test]
    fn energies_approach_the_prediction_monotonically() {
        for name in ["straight", "polygonal", "staircase", "relaxation", "multilayer", "triple"] {
            // The layer search needs ε ≤ 1/32, and at 1/32 the energy happens to hit the prediction exactly.
            let sweep = if name == "multilayer" {
                [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0]
            } else {
                [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]
            };
            let rows: Vec<(f64, f64)> = sweep
                .iter()
                .map(|&e| {
                    let r = build(name, e);
                    assert!(r.admissible, "{name} at {e}");
                    (r.energy, r.predicted_limit)
                })
                .collect();
            let errs: Vec<f64> = rows.iter().map(|(e, p)| (e - p).abs()).collect();
            assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{name}: {errs:?}");
        }
    }

    #[test]
    fn violated_conditions_collapse_a_triangle_at_every_scale() {
        let pot = Potential::default();
        for k in 4..=7 {
            let eps = 1.0 / (1u32 << k) as f64;
            let spec = DomainSpec::unit_square(eps);
            let straight = straight_crack(
                &spec,
                &StraightCrackParams::new(
                    v(0.0, 1.0),
                    v(0.5, 0.5),
                    Rigid::identity(),
                    Rigid::translation(v(0.0, -0.2)),
                ),
                &pot,
            )
            .unwrap();
            let triple =
                triple_point(&square(), eps, &TripleParams::symmetric(v(0.5, 0.5), 0.3, 0.1, true), &pot).unwrap();
            let fold = straight_crack(
                &spec,
                &StraightCrackParams::new(
                    v(0.0, 1.0),
                    v(0.5, 0.5),
                    Rigid::identity(),
                    Rigid::about(PI, v(0.5, 0.5), v(0.0, 0.2)),
                ),
                &pot,
            )
            .unwrap();
            for r in [straight, triple, fold] {
                assert!(!r.admissible && r.min_det <= 0.0, "{} at {eps}", r.name);
            }
        }
    }
}
