use std::f64::consts::PI;

use approx::assert_relative_eq;
use lattice_fracture::analysis;
use lattice_fracture::constructions::{straight_crack, DomainSpec, Rigid, StraightCrackParams};
use lattice_fracture::energy::{self, Potential};
use lattice_fracture::geom::{self, v, Vec2, SQRT3};
use lattice_fracture::lattice::{LatticeDomain, LatticeVectors};
use lattice_fracture::surface;
use proptest::prelude::*;

fn domain(k: u32) -> LatticeDomain {
    DomainSpec::unit_square(1.0 / k as f64).build().unwrap()
}

/// Rotated, scaled copy of the lattice with bounded per-node noise.
fn perturbed(d: &LatticeDomain, angle: f64, scale: f64, noise: &[(f64, f64)]) -> Vec<Vec2> {
    let r = geom::rotation(angle);
    d.nodes
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let (a, b) = noise[i % noise.len()];
            r * x * scale + v(a, b) * (0.1 * d.epsilon)
        })
        .collect()
}

fn noise() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reference_lattice_is_regular(k in 2u32..24, ox in -0.5..0.5f64, oy in -0.5..0.5f64) {
        let eps = 1.0 / k as f64;
        let d = LatticeDomain::build(&[v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0), v(0.0, 1.0)], eps, v(ox, oy) * eps).unwrap();
        for b in &d.bonds {
            let len = (d.nodes[b.j] - d.nodes[b.i]).norm();
            prop_assert!((len - eps).abs() < 1e-12);
        }
        for t in 0..d.triangles.len() {
            prop_assert!((energy::triangle_det(&d, &d.nodes, t) - 1.0).abs() < 1e-9);
        }
        prop_assert!(energy::is_admissible(&d, &d.nodes, 0.0).admissible);
    }

    #[test]
    fn energy_is_rigidly_invariant(angle in -PI..PI, qx in -5.0..5.0f64, qy in -5.0..5.0f64, scale in 0.9..1.3f64, n in noise()) {
        let d = domain(8);
        let pot = Potential::default();
        let u = perturbed(&d, 0.0, scale, &n);
        let r = geom::rotation(angle);
        let w: Vec<Vec2> = u.iter().map(|&x| r * x + v(qx, qy)).collect();
        let e0 = energy::total_energy(&d, &u, &pot).unwrap();
        let e1 = energy::total_energy(&d, &w, &pot).unwrap();
        prop_assert_eq!(e0.admissible, e1.admissible);
        prop_assert!((e0.bond_sum - e1.bond_sum).abs() <= 1e-9 * (1.0 + e0.bond_sum));
        let a0 = energy::is_admissible(&d, &u, 0.0);
        let a1 = energy::is_admissible(&d, &w, 0.0);
        prop_assert!((a0.min_det - a1.min_det).abs() < 1e-9);
    }

    #[test]
    fn reflection_is_never_admissible(angle in -PI..PI, scale in 0.5..2.0f64) {
        let d = domain(6);
        let r = geom::rotation(angle) * geom::Mat2::new(1.0, 0.0, 0.0, -1.0);
        let u: Vec<Vec2> = d.nodes.iter().map(|&x| r * x * scale).collect();
        let a = energy::is_admissible(&d, &u, 0.0);
        prop_assert!(!a.admissible);
        prop_assert_eq!(a.violating.len(), d.triangles.len());
    }

    #[test]
    fn surface_density_symmetries(theta in 0.0..2.0 * PI) {
        let nu = geom::unit(theta);
        let phi = surface::phi(nu, 1.0);
        prop_assert!((phi - surface::phi(-nu, 1.0)).abs() < 1e-14);
        prop_assert!((phi - surface::phi(geom::rotation(PI / 3.0) * nu, 1.0)).abs() < 1e-12);
        prop_assert!((2.0 - 1e-12..=4.0 / SQRT3 + 1e-12).contains(&phi));
        prop_assert!(surface::dual_identity_residual(nu).abs() <= 1e-12);
        // ψ is the support function of the hexagon {ψ* ≤ 1}.
        let support = surface::wulff_polygon().vertices.iter().map(|w| w.dot(&nu)).fold(f64::MIN, f64::max);
        prop_assert!((support - surface::psi(nu)).abs() < 1e-12);
    }

    #[test]
    fn simplex_decomposition_reconstructs(theta in 0.0..2.0 * PI) {
        let nu = geom::unit(theta);
        let dec = surface::simplex_decompose(nu).unwrap();
        prop_assert!((0.0..=1.0).contains(&dec.lambda));
        prop_assert!(LatticeVectors::is_coordinate_direction(dec.nu1));
        prop_assert!(LatticeVectors::is_coordinate_direction(dec.nu2));
        let w = (dec.nu1 * dec.lambda + dec.nu2 * (1.0 - dec.lambda)) * (2.0 / SQRT3);
        prop_assert!((w - nu / surface::psi_star(nu)).norm() < 1e-12);
    }

    #[test]
    fn slicing_bound_is_below_energy(angle in -PI..PI, scale in 0.8..2.0f64, n in noise(), s in 0.05..0.99f64) {
        let d = domain(10);
        let pot = Potential::default();
        let u = perturbed(&d, angle, scale, &n);
        prop_assume!(energy::is_admissible(&d, &u, 0.0).admissible);
        let e = energy::total_energy(&d, &u, &pot).unwrap().total().unwrap();
        prop_assert!(analysis::slicing_lower_bound(&d, &u, &pot, s).unwrap() <= e);
    }

    #[test]
    fn bad_set_shrinks_as_threshold_grows(angle in -PI..PI, scale in 0.8..2.0f64, n in noise(), s1 in 0.05..0.99f64, s2 in 0.05..0.99f64) {
        let d = domain(10);
        let pot = Potential::default();
        let u = perturbed(&d, angle, scale, &n);
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let a = analysis::classify_triangles(&d, &u, &pot, lo).unwrap();
        let b = analysis::classify_triangles(&d, &u, &pot, hi).unwrap();
        for k in 0..3 {
            prop_assert!(b.counts()[k] <= a.counts()[k]);
        }
    }

    #[test]
    fn rotation_fit_recovers_rigid_motion(
        angle in -PI + 1e-6..PI - 1e-6,
        qx in -3.0..3.0f64,
        qy in -3.0..3.0f64,
        pts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 3..40),
    ) {
        let x: Vec<Vec2> = pts.iter().map(|&(a, b)| v(a, b)).collect();
        let spread = x.iter().map(|p| (p - x[0]).norm()).fold(0.0, f64::max);
        prop_assume!(spread > 0.1);
        let r = geom::rotation(angle);
        let y: Vec<Vec2> = x.iter().map(|&p| r * p + v(qx, qy)).collect();
        let (fa, fq, res) = analysis::fit_rotation(&x, &y);
        prop_assert!(geom::wrap_angle(fa - angle).abs() < 1e-9);
        prop_assert!((fq - v(qx, qy)).norm() < 1e-9);
        prop_assert!(res < 1e-9);
    }

    #[test]
    fn straight_crack_commutes_with_rigid_motions(angle in -PI..PI, qx in -1.0..1.0f64, jump_x in -0.5..0.5f64, jump_y in 0.0..0.5f64) {
        let pot = Potential::default();
        let spec = DomainSpec::unit_square(1.0 / 16.0);
        let base = StraightCrackParams::new(v(0.0, 1.0), v(0.5, 0.5), Rigid::identity(), Rigid::translation(v(jump_x, jump_y)));
        let g = Rigid { angle, q: v(qx, 0.0) };
        let compose = |m: Rigid| Rigid { angle: m.angle + g.angle, q: g.rot() * m.q + g.q };
        let moved = StraightCrackParams { minus: compose(base.minus), plus: compose(base.plus), ..base.clone() };
        let a = straight_crack(&spec, &base, &pot).unwrap();
        let b = straight_crack(&spec, &moved, &pot).unwrap();
        prop_assert_eq!(a.admissible, b.admissible);
        prop_assert!((a.energy - b.energy).abs() < 1e-9);
        for (x, y) in a.displacement.iter().zip(&b.displacement) {
            prop_assert!((g.apply(*x) - y).norm() < 1e-12);
        }
    }
}

#[test]
fn wulff_vertices_lie_on_unit_level_set() {
    for w in surface::wulff_polygon().vertices {
        assert_relative_eq!(surface::psi_star(w), 1.0, epsilon = 1e-14);
    }
}
