//! Weighted periodic principal-eigenvalue problems.
//!
//! Every speed formula reduces to the Perron root of a Nystrom matrix
//! `A[i][j] = m(y_j) K_mu(x_i, y_j) h` over one habitat period, where `K_mu`
//! is the periodized kernel with exponential weight.

use crate::error::{Error, Result};
use crate::grid::{Grid, PeriodicField};
use crate::kernel::Kernel;
use crate::linalg::Matrix;

/// Sign convention of the exponential weight. The rightward problems use
/// `e^{-mu (y - x)}`; the leftward ones use `e^{+mu (y - x)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Rightward,
    Leftward,
}

impl Direction {
    /// Signed exponent passed to the periodization.
    pub fn signed(self, mu: f64) -> f64 {
        match self {
            Direction::Rightward => mu,
            Direction::Leftward => -mu,
        }
    }
}

/// Discretized integral operator with multiplier and exponential weight.
#[derive(Debug, Clone)]
pub struct WeightedOperator {
    pub matrix: Matrix,
    pub mu: f64,
    pub direction: Direction,
    pub grid: Grid,
}

/// Principal eigenpair with convergence diagnostics. The eigenfunction is
/// positive and normalized to `max = 1`.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub lambda: f64,
    pub phi: PeriodicField,
    pub residual: f64,
    pub iterations: usize,
}

pub const POWER_TOL: f64 = 1e-12;
pub const RESIDUAL_TOL: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 100_000;

/// Assemble the Nystrom matrix for multiplier `m` and weighted kernel.
pub fn assemble(
    m: &PeriodicField,
    kernel: &Kernel,
    grid: &Grid,
    mu: f64,
    direction: Direction,
) -> Result<WeightedOperator> {
    assert_eq!(m.len(), grid.n, "multiplier field must live on the period grid");
    let k_mu = kernel.periodize_weighted(grid, direction.signed(mu))?;
    let h = grid.spacing();
    let n = grid.n;
    let matrix = Matrix::from_fn(n, |i, j| m.values[j] * k_mu.get(i, j) * h);
    Ok(WeightedOperator { matrix, mu, direction, grid: *grid })
}

/// Assemble from a general two-variable periodic kernel `k(x, y)` with
/// `k(x + L, y + L) = k(x, y)`. Only the dense path supports this form; the
/// image sum is truncated at the same relative tolerance as the
/// difference-kernel path.
pub fn assemble_general(
    m: &PeriodicField,
    kxy: impl Fn(f64, f64) -> f64,
    grid: &Grid,
    mu: f64,
    direction: Direction,
) -> Result<WeightedOperator> {
    let n = grid.n;
    let h = grid.spacing();
    let big_l = grid.length;
    let smu = direction.signed(mu);
    let matrix = Matrix::from_fn(n, |i, j| {
        let x = grid.node(i);
        let y0 = grid.node(j);
        let weighted = |y: f64| {
            let kv = kxy(x, y);
            if kv > 0.0 {
                kv * (-smu * (y - x)).exp()
            } else {
                0.0
            }
        };
        let mut total = weighted(y0);
        for im in 1..=(crate::kernel::PERIODIZE_MAX_IMAGES as i64) {
            let mut tail = 0.0;
            for s in [im, -im] {
                tail += weighted(y0 + s as f64 * big_l);
            }
            total += tail;
            if tail <= crate::kernel::PERIODIZE_TAIL_TOL * total.abs() {
                break;
            }
        }
        m.values[j] * total * h
    });
    Ok(WeightedOperator { matrix, mu, direction, grid: *grid })
}

/// Power iteration from a positive start vector, max-norm normalized.
pub fn principal_eigen(op: &WeightedOperator) -> Result<EigenResult> {
    principal_eigen_from(op, None)
}

/// Power iteration with an optional warm-start eigenfunction.
pub fn principal_eigen_from(
    op: &WeightedOperator,
    warm: Option<&PeriodicField>,
) -> Result<EigenResult> {
    let n = op.matrix.n;
    let mut phi: Vec<f64> = match warm {
        Some(f) if f.len() == n && f.min() > 0.0 => f.values.clone(),
        _ => vec![1.0; n],
    };
    let mut next = vec![0.0; n];
    let mut lambda = 0.0;
    for iter in 1..=POWER_MAX_ITERS {
        op.matrix.matvec(&phi, &mut next);
        let new_lambda = next.iter().cloned().fold(0.0_f64, f64::max);
        if !(new_lambda > 0.0) || !new_lambda.is_finite() {
            return Err(Error::Convergence(format!(
                "power iteration produced a non-positive eigenvalue estimate {new_lambda}"
            )));
        }
        for v in next.iter_mut() {
            *v /= new_lambda;
        }
        let settled = (new_lambda - lambda).abs() <= POWER_TOL * new_lambda;
        lambda = new_lambda;
        std::mem::swap(&mut phi, &mut next);
        if settled {
            let residual = residual_sup(&op.matrix, &phi, lambda);
            if residual <= RESIDUAL_TOL * lambda {
                if phi.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::Positivity(
                        "principal eigenfunction has a nonpositive entry".into(),
                    ));
                }
                return Ok(EigenResult {
                    lambda,
                    phi: PeriodicField { length: op.grid.length, values: phi },
                    residual,
                    iterations: iter,
                });
            }
        }
    }
    Err(Error::Convergence(format!(
        "power iteration did not converge in {POWER_MAX_ITERS} iterations; \
         the spectral gap may be degenerate"
    )))
}

fn residual_sup(a: &Matrix, phi: &[f64], lambda: f64) -> f64 {
    let mut out = vec![0.0; phi.len()];
    a.matvec(phi, &mut out);
    out.iter().zip(phi).map(|(&av, &v)| (av - lambda * v).abs()).fold(0.0, f64::max)
}

/// One sample of the speed quotient curve.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CurveSample {
    pub mu: f64,
    pub lambda: f64,
    pub log_lambda_over_mu: f64,
}

/// Sample `lambda(mu)` on a monotone mu grid, warm-starting each solve with
/// the previous eigenfunction.
pub fn lambda_curve(
    m: &PeriodicField,
    kernel: &Kernel,
    grid: &Grid,
    mu_min: f64,
    mu_max: f64,
    samples: usize,
    direction: Direction,
) -> Result<Vec<CurveSample>> {
    if !(mu_min < mu_max) || samples < 2 {
        return Err(Error::Range("lambda curve needs mu_min < mu_max and >= 2 samples".into()));
    }
    let mut out = Vec::with_capacity(samples);
    let mut warm: Option<PeriodicField> = None;
    for s in 0..samples {
        let mu = mu_min + (mu_max - mu_min) * s as f64 / (samples - 1) as f64;
        let op = assemble(m, kernel, grid, mu, direction)?;
        let eig = principal_eigen_from(&op, warm.as_ref())?;
        let quotient = if mu != 0.0 { eig.lambda.ln() / mu } else { f64::INFINITY };
        out.push(CurveSample { mu, lambda: eig.lambda, log_lambda_over_mu: quotient });
        warm = Some(eig.phi);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    const E: f64 = std::f64::consts::E;

    fn grid() -> Grid {
        Grid::new(10.0, 64, 2).unwrap()
    }

    #[test]
    fn constant_multiplier_reduces_to_mgf_product() {
        let g = grid();
        let k = Kernel::gaussian(1.0).unwrap();
        let m = PeriodicField::constant(&g, 2.0);
        let op = assemble(&m, &k, &g, 1.0, Direction::Rightward).unwrap();
        let eig = principal_eigen(&op).unwrap();
        let expect = 2.0 * 0.5_f64.exp(); // 3.29744...
        assert!((eig.lambda - expect).abs() < 1e-8 * expect, "lambda = {}", eig.lambda);
        assert!((eig.lambda - 3.29744).abs() < 1e-5);
    }

    #[test]
    fn stochastic_operator_has_unit_eigenvalue_and_flat_eigenfunction() {
        let g = grid();
        let k = Kernel::gaussian(0.1).unwrap();
        let m = PeriodicField::constant(&g, 1.0);
        let op = assemble(&m, &k, &g, 0.0, Direction::Rightward).unwrap();
        let eig = principal_eigen(&op).unwrap();
        assert!((eig.lambda - 1.0).abs() < 1e-8);
        assert!(eig.phi.values.iter().all(|&v| (v - 1.0).abs() < 1e-8));
        assert!(eig.residual <= RESIDUAL_TOL * eig.lambda);
    }

    #[test]
    fn constant_e_at_mu_zero_gives_e() {
        let g = grid();
        let k = Kernel::gaussian(0.1).unwrap();
        let m = PeriodicField::constant(&g, E);
        let eig = principal_eigen(&assemble(&m, &k, &g, 0.0, Direction::Rightward).unwrap()).unwrap();
        assert!((eig.lambda - E).abs() < 1e-8 * E);
    }

    #[test]
    fn laplace_corner_quadrature_is_first_order() {
        // The node quadrature sees the Laplace corner at 0; the discrete mass
        // carries an O(h^2/b^2) excess, so the eigenvalue tracks the discrete
        // row sum exactly and the analytic value only to that order.
        let g = grid();
        let k = Kernel::laplace(0.5).unwrap();
        let m = PeriodicField::constant(&g, E);
        let op = assemble(&m, &k, &g, 0.0, Direction::Rightward).unwrap();
        let eig = principal_eigen(&op).unwrap();
        let row_sum: f64 = op.matrix.row(0).iter().sum();
        assert!((eig.lambda - row_sum).abs() < 1e-10 * row_sum);
        assert!((eig.lambda - E).abs() < 0.01 * E);
    }

    #[test]
    fn curve_matches_closed_form_for_constant_multiplier() {
        let g = grid();
        let k = Kernel::gaussian(0.1).unwrap();
        let m = PeriodicField::constant(&g, E);
        let curve = lambda_curve(&m, &k, &g, 0.5, 3.0, 6, Direction::Rightward).unwrap();
        for s in &curve {
            let expect = E * k.mgf(s.mu).unwrap();
            assert!((s.lambda - expect).abs() < 1e-8 * expect);
            let q = (1.0 + 0.1 * s.mu * s.mu / 2.0) / s.mu;
            assert!((s.log_lambda_over_mu - q).abs() < 1e-8);
        }
    }

    #[test]
    fn quotient_blows_up_near_mu_zero_when_lambda0_exceeds_one() {
        let g = grid();
        let k = Kernel::gaussian(0.1).unwrap();
        let two_patch =
            crate::habitat::piecewise_two_patch(&g, 5.5, E, 2.0).unwrap();
        let near_zero =
            lambda_curve(&two_patch, &k, &g, 1e-3, 0.5, 2, Direction::Rightward).unwrap();
        assert!(near_zero[0].log_lambda_over_mu > near_zero[1].log_lambda_over_mu);
    }

    #[test]
    fn symmetric_kernel_gives_even_lambda() {
        let g = grid();
        let k = Kernel::gaussian(0.1).unwrap();
        let m = crate::habitat::piecewise_two_patch(&g, 5.5, E, 2.0).unwrap();
        let plus =
            principal_eigen(&assemble(&m, &k, &g, 0.7, Direction::Rightward).unwrap()).unwrap();
        let minus =
            principal_eigen(&assemble(&m, &k, &g, -0.7, Direction::Rightward).unwrap()).unwrap();
        assert!((plus.lambda - minus.lambda).abs() <= 1e-8 * plus.lambda);
    }

    #[test]
    fn leftward_direction_flips_the_weight_sign() {
        let g = grid();
        let k = Kernel::gaussian(0.1).unwrap();
        let m = crate::habitat::piecewise_two_patch(&g, 5.5, E, 2.0).unwrap();
        let left = assemble(&m, &k, &g, 0.7, Direction::Leftward).unwrap();
        let right_neg = assemble(&m, &k, &g, -0.7, Direction::Rightward).unwrap();
        assert_eq!(left.matrix.data, right_neg.matrix.data);
    }

    #[test]
    fn general_kernel_path_agrees_with_difference_kernel_path() {
        let g = Grid::new(10.0, 32, 2).unwrap();
        let k = Kernel::gaussian(0.2).unwrap();
        let m = crate::habitat::piecewise_two_patch(&g, 4.0, 2.0, 3.0).unwrap();
        let dense =
            assemble_general(&m, |x, y| k.density(x - y), &g, 0.5, Direction::Rightward).unwrap();
        let fast = assemble(&m, &k, &g, 0.5, Direction::Rightward).unwrap();
        for (a, b) in dense.matrix.data.iter().zip(&fast.matrix.data) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300));
        }
        let le = principal_eigen(&dense).unwrap();
        let re = principal_eigen(&fast).unwrap();
        assert!((le.lambda - re.lambda).abs() <= 1e-10 * re.lambda);
    }

    #[test]
    fn monotone_multiplier_gives_larger_eigenvalue() {
        let g = grid();
        let k = Kernel::gaussian(0.1).unwrap();
        let m1 = crate::habitat::piecewise_two_patch(&g, 5.5, 2.5, 2.0).unwrap();
        let m2 = PeriodicField::constant(&g, 2.0);
        let l1 = principal_eigen(&assemble(&m1, &k, &g, 0.4, Direction::Rightward).unwrap())
            .unwrap()
            .lambda;
        let l2 = principal_eigen(&assemble(&m2, &k, &g, 0.4, Direction::Rightward).unwrap())
            .unwrap()
            .lambda;
        assert!(l1 > l2);
    }

    #[test]
    fn operator_is_irreducible_after_n_compositions() {
        let g = Grid::new(10.0, 16, 2).unwrap();
        let k = Kernel::gaussian(0.1).unwrap();
        let m = PeriodicField::constant(&g, 1.0);
        let op = assemble(&m, &k, &g, 0.0, Direction::Rightward).unwrap();
        assert!(op.matrix.power_is_positive(g.n));
    }
}
