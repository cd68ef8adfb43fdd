//! Minimal dense matrix support for Nystrom operators.

/// Dense square matrix, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix { n, data: vec![0.0; n * n] }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for i in 0..self.n {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            out[i] = acc;
        }
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Whether the zero pattern of `self^power` is strictly positive.
    /// Works on the boolean pattern with repeated squaring, so entry growth
    /// cannot overflow.
    pub fn power_is_positive(&self, power: usize) -> bool {
        let n = self.n;
        let mut base: Vec<bool> = self.data.iter().map(|&v| v > 0.0).collect();
        let mut acc: Vec<bool> = (0..n * n).map(|k| k / n == k % n).collect(); // identity
        let mut p = power.max(1);
        let mul = |a: &[bool], b: &[bool]| -> Vec<bool> {
            let mut out = vec![false; n * n];
            for i in 0..n {
                for k in 0..n {
                    if a[i * n + k] {
                        for j in 0..n {
                            if b[k * n + j] {
                                out[i * n + j] = true;
                            }
                        }
                    }
                }
            }
            out
        };
        while p > 0 {
            if p & 1 == 1 {
                acc = mul(&acc, &base);
            }
            p >>= 1;
            if p > 0 {
                base = mul(&base, &base);
            }
        }
        acc.iter().all(|&b| b)
    }
}
