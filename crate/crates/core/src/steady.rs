//! Semi-trivial periodic steady states and the scalar persistence dichotomy.

use crate::eigen::{assemble, principal_eigen, Direction};
use crate::error::{Error, Result};
use crate::grid::{Grid, PeriodicField};
use crate::kernel::Kernel;

pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const FIXED_POINT_MAX_ITERS: usize = 50_000;
/// Eigenvalues within this band of 1 are flagged marginal.
pub const MARGINAL_BAND: f64 = 1e-10;

/// A converged positive periodic steady state.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub field: PeriodicField,
    /// Persistence eigenvalue `lambda(k, r)`.
    pub lambda0: f64,
    pub iterations: usize,
    /// Sup-norm of the fixed-point defect.
    pub residual: f64,
}

/// Outcome of the scalar persistence dichotomy: either the unique positive
/// steady state, or extinction when `lambda(k, r) <= 1`.
#[derive(Debug, Clone)]
pub enum SteadyOutcome {
    Persistent(SteadyState),
    /// `lambda(k, r) <= 1`: the zero state is globally stable. `marginal`
    /// flags an eigenvalue within 1e-10 of the threshold.
    Extinct { lambda0: f64, marginal: bool },
}

impl SteadyOutcome {
    /// Steady-state field; zero everywhere for the extinct branch.
    pub fn field(&self, grid: &Grid) -> PeriodicField {
        match self {
            SteadyOutcome::Persistent(s) => s.field.clone(),
            SteadyOutcome::Extinct { .. } => PeriodicField::constant(grid, 0.0),
        }
    }

    pub fn lambda0(&self) -> f64 {
        match self {
            SteadyOutcome::Persistent(s) => s.lambda0,
            SteadyOutcome::Extinct { lambda0, .. } => *lambda0,
        }
    }
}

/// Principal eigenvalue of the unweighted growth operator with multiplier `r`.
pub fn persistence_eigenvalue(r: &PeriodicField, kernel: &Kernel, grid: &Grid) -> Result<f64> {
    let op = assemble(r, kernel, grid, 0.0, Direction::Rightward)?;
    Ok(principal_eigen(&op)?.lambda)
}

/// Iterate the periodic Beverton-Holt map
/// `p <- K_0 [ r p / (1 + b p) ]`
/// on one period until successive iterates differ by less than 1e-12 in sup
/// norm. The limit is independent of the (positive) start.
pub fn scalar_steady_state(
    r: &PeriodicField,
    b: &PeriodicField,
    kernel: &Kernel,
    grid: &Grid,
    init: &PeriodicField,
) -> Result<SteadyOutcome> {
    let lambda0 = persistence_eigenvalue(r, kernel, grid)?;
    if lambda0 <= 1.0 {
        return Ok(SteadyOutcome::Extinct { lambda0, marginal: (lambda0 - 1.0).abs() < MARGINAL_BAND });
    }
    if !(init.max() > 0.0) {
        return Err(Error::Validation("steady-state iteration needs a positive start".into()));
    }
    let k0 = kernel.periodize_weighted(grid, 0.0)?;
    let h = grid.spacing();
    let n = grid.n;
    let mut p = init.values.clone();
    let mut growth = vec![0.0; n];
    let mut next = vec![0.0; n];
    for iter in 1..=FIXED_POINT_MAX_ITERS {
        for j in 0..n {
            growth[j] = r.values[j] * p[j] / (1.0 + b.values[j] * p[j]);
        }
        for i in 0..n {
            let row = k0.row(i);
            let mut acc = 0.0;
            for (kv, gv) in row.iter().zip(&growth) {
                acc += kv * gv;
            }
            next[i] = acc * h;
        }
        let diff = p.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut p, &mut next);
        if diff < FIXED_POINT_TOL {
            let field = PeriodicField { length: grid.length, values: p };
            return Ok(SteadyOutcome::Persistent(SteadyState {
                residual: diff,
                lambda0,
                iterations: iter,
                field,
            }));
        }
    }
    Err(Error::Convergence(format!(
        "steady-state iteration did not settle in {FIXED_POINT_MAX_ITERS} steps"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::habitat::piecewise_two_patch;

    const E: f64 = std::f64::consts::E;

    fn grid() -> Grid {
        Grid::new(10.0, 64, 2).unwrap()
    }

    fn solve(r: f64, c: &PeriodicField, k: &Kernel, g: &Grid, init: &PeriodicField) -> SteadyState {
        let rf = PeriodicField::constant(g, r);
        let b = c.map(|cv| (r - 1.0) / cv);
        match scalar_steady_state(&rf, &b, k, g, init).unwrap() {
            SteadyOutcome::Persistent(s) => s,
            SteadyOutcome::Extinct { .. } => panic!("expected persistence"),
        }
    }

    #[test]
    fn constant_coefficients_have_eigenvalue_r() {
        let g = grid();
        let k = Kernel::gaussian(0.1).unwrap();
        let r = PeriodicField::constant(&g, E);
        assert!((persistence_eigenvalue(&r, &k, &g).unwrap() - E).abs() < 1e-8);
        let r_eps = PeriodicField::constant(&g, 1.0 + 1e-6);
        assert!((persistence_eigenvalue(&r_eps, &k, &g).unwrap() - (1.0 + 1e-6)).abs() < 1e-10);
    }

    #[test]
    fn homogeneous_fixed_point_is_the_carrying_capacity() {
        let g = grid();
        let k = Kernel::gaussian(0.1).unwrap();
        let init = PeriodicField::constant(&g, 0.2);
        let c1 = PeriodicField::constant(&g, 1.0);
        let s = solve(E, &c1, &k, &g, &init);
        assert!(s.field.values.iter().all(|&v| (v - 1.0).abs() < 1e-10));
        let c05 = PeriodicField::constant(&g, 0.5);
        let s = solve(E, &c05, &k, &g, &init);
        assert!(s.field.values.iter().all(|&v| (v - 0.5).abs() < 1e-10));
    }

    #[test]
    fn subcritical_growth_goes_extinct() {
        let g = grid();
        let k = Kernel::gaussian(0.1).unwrap();
        let r = PeriodicField::constant(&g, 0.9); // lambda < 1
        // Validation normally excludes r < 1, but the dichotomy itself only
        // needs lambda <= 1; exercise it with r slightly below 1.
        let b = PeriodicField::constant(&g, 1.0);
        let init = PeriodicField::constant(&g, 0.3);
        match scalar_steady_state(&r, &b, &k, &g, &init).unwrap() {
            SteadyOutcome::Extinct { lambda0, marginal } => {
                assert!(lambda0 < 1.0);
                assert!(!marginal);
            }
            SteadyOutcome::Persistent(_) => panic!("expected extinction"),
        }
    }

    #[test]
    fn two_patch_state_is_positive_and_bounded_by_cap_max() {
        let g = grid();
        let k = Kernel::gaussian(0.1).unwrap();
        let c = piecewise_two_patch(&g, 5.5, 1.0, 0.5).unwrap();
        let init = PeriodicField::constant(&g, 0.7);
        let s = solve(E, &c, &k, &g, &init);
        assert!(s.field.min() > 0.0);
        assert!(s.field.max() <= 1.0 + 1e-8);
        let spread = s.field.max() - s.field.min();
        assert!(spread > 1e-3, "two-patch steady state should be nonconstant");
    }

    #[test]
    fn limit_is_independent_of_the_start() {
        let g = grid();
        let k = Kernel::gaussian(0.1).unwrap();
        let c = piecewise_two_patch(&g, 5.5, 1.0, 0.5).unwrap();
        let a = solve(E, &c, &k, &g, &PeriodicField::constant(&g, 0.01));
        let b = solve(E, &c, &k, &g, &PeriodicField::from_fn(&g, |x| 0.9 + 0.05 * (x / 3.0).sin()));
        let diff: f64 = a
            .field
            .values
            .iter()
            .zip(&b.field.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-9, "diff = {diff}");
    }

    #[test]
    fn iteration_is_monotone_from_ordered_starts() {
        let g = grid();
        let k = Kernel::gaussian(0.1).unwrap();
        let c = piecewise_two_patch(&g, 5.5, 1.0, 0.5).unwrap();
        let r = PeriodicField::constant(&g, E);
        let b = c.map(|cv| (E - 1.0) / cv);
        let k0 = k.periodize_weighted(&g, 0.0).unwrap();
        let h = g.spacing();
        let step = |p: &Vec<f64>| -> Vec<f64> {
            let growth: Vec<f64> = (0..g.n)
                .map(|j| r.values[j] * p[j] / (1.0 + b.values[j] * p[j]))
                .collect();
            (0..g.n)
                .map(|i| k0.row(i).iter().zip(&growth).map(|(a, b)| a * b).sum::<f64>() * h)
                .collect()
        };
        // From above: iterates non-increasing. From below: non-decreasing.
        let mut hi = vec![1.0; g.n]; // max C
        let mut lo = vec![1e-6; g.n];
        for _ in 0..200 {
            let hi2 = step(&hi);
            let lo2 = step(&lo);
            for j in 0..g.n {
                assert!(hi2[j] <= hi[j] + 1e-12);
                assert!(lo2[j] >= lo[j] - 1e-12);
            }
            hi = hi2;
            lo = lo2;
        }
    }
}
