//! Dispersal kernels: densities, exponential moments, and periodization.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::Matrix;

/// Relative tail tolerance for the periodization image sum.
pub const PERIODIZE_TAIL_TOL: f64 = 1e-14;
/// Hard cap on image terms per side of the periodization sum.
pub const PERIODIZE_MAX_IMAGES: usize = 200;

/// Tabulated density on a symmetric support `[-half_support, half_support]`
/// with uniform spacing. Zero outside the support, so every exponential
/// moment is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct TableKernel {
    pub half_support: f64,
    pub spacing: f64,
    /// Samples at `-half_support + i * spacing`, covering the full support.
    pub values: Vec<f64>,
}

impl TableKernel {
    pub fn new(half_support: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::Range("table kernel needs at least 3 samples".into()));
        }
        if !(half_support > 0.0) {
            return Err(Error::Range("table kernel support must be positive".into()));
        }
        if values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::Validation("table kernel density must be nonnegative and finite".into()));
        }
        let spacing = 2.0 * half_support / (values.len() - 1) as f64;
        let k = TableKernel { half_support, spacing, values };
        let mass = k.quadrature(0.0);
        if (mass - 1.0).abs() > 1e-8 {
            return Err(Error::Validation(format!(
                "table kernel mass is {mass:.10}, must be 1 within 1e-8"
            )));
        }
        Ok(k)
    }

    pub fn density(&self, z: f64) -> f64 {
        if z.abs() > self.half_support {
            return 0.0;
        }
        let t = (z + self.half_support) / self.spacing;
        let i = (t.floor() as usize).min(self.values.len() - 2);
        let frac = t - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }

    /// Trapezoid quadrature of `k(z) e^{mu z}` over the support.
    fn quadrature(&self, mu: f64) -> f64 {
        let m = self.values.len();
        let mut acc = 0.0;
        for (i, &v) in self.values.iter().enumerate() {
            let z = -self.half_support + i as f64 * self.spacing;
            let w = if i == 0 || i == m - 1 { 0.5 } else { 1.0 };
            acc += w * v * (mu * z).exp();
        }
        acc * self.spacing
    }

    fn is_symmetric(&self) -> bool {
        let m = self.values.len();
        (0..m).all(|i| (self.values[i] - self.values[m - 1 - i]).abs() <= 1e-12)
    }
}

/// A dispersal kernel: probability density of the one-generation displacement.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// `k(z) = exp(-z^2 / (2 sigma^2)) / sqrt(2 pi sigma^2)`.
    Gaussian { variance: f64 },
    /// `k(z) = exp(-|z| / b) / (2 b)`.
    Laplace { scale: f64 },
    Table(TableKernel),
}

impl Kernel {
    pub fn gaussian(variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::Range(format!("gaussian variance must be positive, got {variance}")));
        }
        Ok(Kernel::Gaussian { variance })
    }

    pub fn laplace(scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::Range(format!("laplace scale must be positive, got {scale}")));
        }
        Ok(Kernel::Laplace { scale })
    }

    /// Largest `mu` with a finite exponential moment.
    pub fn abscissa(&self) -> f64 {
        match self {
            Kernel::Gaussian { .. } | Kernel::Table(_) => f64::INFINITY,
            Kernel::Laplace { scale } => 1.0 / scale,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            Kernel::Gaussian { .. } | Kernel::Laplace { .. } => true,
            Kernel::Table(t) => t.is_symmetric(),
        }
    }

    /// Density at displacement `z`.
    pub fn density(&self, z: f64) -> f64 {
        match self {
            Kernel::Gaussian { variance } => {
                (-z * z / (2.0 * variance)).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
            }
            Kernel::Laplace { scale } => (-z.abs() / scale).exp() / (2.0 * scale),
            Kernel::Table(t) => t.density(z),
        }
    }

    /// Moment generating function `M(mu) = int k(z) e^{mu z} dz`.
    pub fn mgf(&self, mu: f64) -> Result<f64> {
        if mu.abs() >= self.abscissa() {
            return Err(Error::Domain(format!(
                "exponential moment requested at |mu| = {} >= abscissa {}",
                mu.abs(),
                self.abscissa()
            )));
        }
        Ok(match self {
            Kernel::Gaussian { variance } => (variance * mu * mu / 2.0).exp(),
            Kernel::Laplace { scale } => 1.0 / (1.0 - scale * scale * mu * mu),
            Kernel::Table(t) => t.quadrature(mu),
        })
    }

    /// `k(z) e^{mu z}` evaluated in log space for the analytic families, so
    /// a vanishing density never meets an overflowing weight.
    pub fn weighted_density(&self, z: f64, mu: f64) -> f64 {
        match self {
            Kernel::Gaussian { variance } => {
                let log_norm = 0.5 * (2.0 * std::f64::consts::PI * variance).ln();
                (-z * z / (2.0 * variance) - log_norm + mu * z).exp()
            }
            Kernel::Laplace { scale } => {
                (-z.abs() / scale - (2.0 * scale).ln() + mu * z).exp()
            }
            Kernel::Table(t) => t.density(z) * (mu * z).exp(),
        }
    }

    /// Displacement beyond which `k(z) e^{|mu| |z|}` stays below `tol`.
    /// Used to truncate convolution and quadrature stencils.
    pub fn weighted_cutoff(&self, mu_abs: f64, tol: f64) -> f64 {
        match self {
            Kernel::Table(t) => t.half_support,
            _ => {
                let mut z: f64 = 1.0;
                // weight grows like e^{mu z} but the density decays faster for
                // |mu| < abscissa, so the product eventually drops below tol
                while self.weighted_density(z, mu_abs).max(self.weighted_density(-z, mu_abs)) > tol
                    && z < 1e6
                {
                    z *= 1.25;
                }
                z
            }
        }
    }

    /// Periodized, exponentially weighted kernel matrix over the period grid:
    ///
    /// `K_mu[i][j] = sum_m k(x_i - y_j - m L) * exp(-mu (y_j + m L - x_i))`.
    ///
    /// This reduces the whole-line eigenproblem over L-periodic eigenfunctions
    /// to a period-cell matrix. The image sum is truncated once the absolute
    /// tail contribution falls below `1e-14` relative to the running total,
    /// with a hard cap of 200 images per side.
    pub fn periodize_weighted(&self, grid: &Grid, mu: f64) -> Result<Matrix> {
        if mu.abs() >= self.abscissa() {
            return Err(Error::Domain(format!(
                "periodization requested at |mu| = {} >= abscissa {}",
                mu.abs(),
                self.abscissa()
            )));
        }
        let n = grid.n;
        let h = grid.spacing();
        let big_l = grid.length;
        // Difference kernel: K depends only on (i - j) mod n, so compute one
        // circulant generator of n values at offsets t = i - j in [0, n).
        let mut gen = vec![0.0_f64; n];
        for (t, g) in gen.iter_mut().enumerate() {
            let d0 = t as f64 * h;
            *g = self.image_sum(d0, big_l, mu)?;
        }
        let mut mat = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let t = (i + n - j) % n;
                mat.set(i, j, gen[t]);
            }
        }
        Ok(mat)
    }

    /// `sum_m k(d0 - m L) e^{mu (d0 - m L)}`, expanding outward from m = 0.
    fn image_sum(&self, d0: f64, big_l: f64, mu: f64) -> Result<f64> {
        let term = |m: i64| -> f64 {
            let d = d0 - m as f64 * big_l;
            self.weighted_density(d, mu)
        };
        let mut total = term(0);
        let mut grow_pos = 0u32;
        let mut grow_neg = 0u32;
        let mut prev_pos = f64::INFINITY;
        let mut prev_neg = f64::INFINITY;
        for m in 1..=(PERIODIZE_MAX_IMAGES as i64) {
            let tp = term(m);
            let tn = term(-m);
            if tp >= prev_pos && tp > 0.0 {
                grow_pos += 1;
            } else {
                grow_pos = 0;
            }
            if tn >= prev_neg && tn > 0.0 {
                grow_neg += 1;
            } else {
                grow_neg = 0;
            }
            if grow_pos >= 3 || grow_neg >= 3 {
                return Err(Error::Convergence(
                    "periodization image terms are non-decreasing; the exponential weight \
                     outruns the kernel tail"
                        .into(),
                ));
            }
            prev_pos = tp;
            prev_neg = tn;
            total += tp + tn;
            if tp + tn <= PERIODIZE_TAIL_TOL * total.abs() {
                break;
            }
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(10.0, 64, 2).unwrap()
    }

    #[test]
    fn gaussian_density_at_origin_matches_figure_kernel() {
        let k = Kernel::gaussian(0.1).unwrap();
        // 1 / sqrt(0.2 pi)
        assert!((k.density(0.0) - 1.0 / (0.2 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        assert!((k.density(0.0) - 1.26157).abs() < 1e-5);
    }

    #[test]
    fn laplace_density_at_origin() {
        let k = Kernel::laplace(0.5).unwrap();
        assert_eq!(k.density(0.0), 1.0);
    }

    #[test]
    fn densities_are_symmetric() {
        for k in [Kernel::gaussian(0.7).unwrap(), Kernel::laplace(0.3).unwrap()] {
            for &z in &[0.1, 0.9, 2.3] {
                assert_eq!(k.density(z), k.density(-z));
            }
        }
    }

    #[test]
    fn mgf_closed_forms() {
        let g = Kernel::gaussian(0.1).unwrap();
        assert!((g.mgf(0.0).unwrap() - 1.0).abs() < 1e-15);
        let g1 = Kernel::gaussian(1.0).unwrap();
        assert!((g1.mgf(1.0).unwrap() - 0.5_f64.exp()).abs() < 1e-12);
        let l = Kernel::laplace(0.5).unwrap();
        assert!(matches!(l.mgf(2.0), Err(Error::Domain(_))));
        assert!(l.mgf(1.99).unwrap().is_finite());
    }

    #[test]
    fn table_kernel_roundtrip_and_moments() {
        // Triangle kernel on [-1, 1]: density 1 - |z|.
        let m = 201;
        let values: Vec<f64> =
            (0..m).map(|i| 1.0 - (-1.0 + 2.0 * i as f64 / (m - 1) as f64).abs()).collect();
        let k = Kernel::Table(TableKernel::new(1.0, values).unwrap());
        assert!(k.is_symmetric());
        assert_eq!(k.density(2.0), 0.0);
        assert!((k.density(0.5) - 0.5).abs() < 1e-12);
        assert!((k.mgf(0.0).unwrap() - 1.0).abs() < 1e-8);
        // MGF of the triangle kernel: (cosh(mu) - 1) * 2 / mu^2.
        let mu = 0.8_f64;
        let exact = 2.0 * (mu.cosh() - 1.0) / (mu * mu);
        assert!((k.mgf(mu).unwrap() - exact).abs() < 1e-4);
    }

    #[test]
    fn table_kernel_rejects_unnormalized_density() {
        let values = vec![1.0; 11];
        assert!(TableKernel::new(1.0, values).is_err());
    }

    #[test]
    fn periodized_rows_sum_to_one_at_mu_zero() {
        let g = grid();
        let k = Kernel::gaussian(0.1).unwrap();
        let mat = k.periodize_weighted(&g, 0.0).unwrap();
        let h = g.spacing();
        for i in 0..g.n {
            let s: f64 = mat.row(i).iter().sum::<f64>() * h;
            assert!((s - 1.0).abs() < 1e-8, "row {i} sums to {s}");
        }
    }

    #[test]
    fn periodized_row_sums_match_mgf() {
        let g = grid();
        let k = Kernel::gaussian(0.1).unwrap();
        let mu = 1.3;
        let mat = k.periodize_weighted(&g, mu).unwrap();
        let h = g.spacing();
        let expect = k.mgf(mu).unwrap();
        for i in 0..g.n {
            let s: f64 = mat.row(i).iter().sum::<f64>() * h;
            assert!((s - expect).abs() < 1e-8 * expect);
        }
    }

    #[test]
    fn periodization_near_abscissa_is_finite() {
        let g = grid();
        let k = Kernel::laplace(0.5).unwrap();
        let mat = k.periodize_weighted(&g, 1.99).unwrap();
        assert!(mat.data.iter().all(|v| v.is_finite()));
        assert!(k.periodize_weighted(&g, 2.0).is_err());
    }

    #[test]
    fn log_mgf_is_convex_on_a_mu_grid() {
        let k = Kernel::laplace(0.4).unwrap();
        let mus: Vec<f64> = (0..40).map(|i| -2.0 + i as f64 * 0.1).collect();
        let vals: Vec<f64> = mus.iter().map(|&mu| k.mgf(mu).unwrap().ln()).collect();
        for w in vals.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-10);
        }
    }

    #[test]
    fn mgf_at_least_one_for_symmetric_kernels() {
        for k in [Kernel::gaussian(0.25).unwrap(), Kernel::laplace(0.5).unwrap()] {
            for i in 1..20 {
                let mu = i as f64 * 0.09;
                if mu < k.abscissa() {
                    assert!(k.mgf(mu).unwrap() > 1.0);
                }
            }
            assert!((k.mgf(0.0).unwrap() - 1.0).abs() < 1e-14);
        }
    }
}
