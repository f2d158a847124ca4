//! Max-min margin linear programs, used to place detached rows of atoms.

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};

/// One affine function c·x + k of the decision variables.
#[derive(Debug, Clone)]
pub struct Affine {
    pub coeffs: Vec<f64>,
    pub constant: f64,
}

/// Maximize t subject to f_i(x) ≥ t for all rows, |x_j| ≤ bound and t ≤ cap.
///
/// Returns the optimal x and t, or `None` if the solver fails.
pub fn maximize_min(rows: &[Affine], nvars: usize, bound: f64, cap: f64) -> Option<(Vec<f64>, f64)> {
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let xs: Vec<_> = (0..nvars).map(|_| p.add_var(0.0, (-bound, bound))).collect();
    let t = p.add_var(1.0, (-f64::INFINITY, cap));
    for r in rows {
        let mut e = LinearExpr::empty();
        for (j, &c) in r.coeffs.iter().enumerate() {
            if c != 0.0 {
                e.add(xs[j], c);
            }
        }
        e.add(t, -1.0);
        p.add_constraint(e, ComparisonOp::Ge, -r.constant);
    }
    let sol = p.solve().ok()?;
    let x = xs.iter().map(|v| *sol.var_value(*v)).collect();
    Some((x, *sol.var_value(t)))
}
