//! Symmetric tridiagonal matrices and the direct solvers built on them.
//!
//! Every form assembled on a uniform 1D grid is tridiagonal, so all linear
//! algebra in the crate reduces to O(n) recurrences: an LDLᵀ factorization
//! for SPD systems, a partially pivoted LU for indefinite ones, and Sturm
//! counts (Sylvester inertia) for symmetric-definite pencils.

use crate::error::LinalgError;

#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiag {
    /// `off[i]` couples rows `i` and `i + 1`.
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(diag.is_empty() && off.is_empty() || off.len() + 1 == diag.len(), "off-diagonal must have length dim - 1");
        Self { diag, off }
    }

    pub fn from_diag(diag: Vec<f64>) -> Self {
        let off = vec![0.0; diag.len().saturating_sub(1)];
        Self { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        assert_eq!(x.len(), n);
        assert_eq!(y.len(), n);
        // row sums times x plus off-diagonal differences, as in `bilinear`
        for i in 0..n {
            y[i] = self.row_sum(i) * x[i];
        }
        for i in 0..n.saturating_sub(1) {
            let d = self.off[i] * (x[i + 1] - x[i]);
            y[i] += d;
            y[i + 1] -= d;
        }
    }

    #[inline]
    fn row_sum(&self, i: usize) -> f64 {
        let mut r = self.diag[i];
        if i > 0 {
            r += self.off[i - 1];
        }
        if i + 1 < self.diag.len() {
            r += self.off[i];
        }
        r
    }

    /// `xᵀ A y`, summed as `Σ rᵢ xᵢ yᵢ − Σ offᵢ Δxᵢ Δyᵢ` with row sums `rᵢ`,
    /// which avoids cancellation for stiffness-dominated matrices.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            s += self.row_sum(i) * x[i] * y[i];
        }
        for i in 0..n.saturating_sub(1) {
            s -= self.off[i] * (x[i + 1] - x[i]) * (y[i + 1] - y[i]);
        }
        s
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// `A + scale · diag(d)`.
    pub fn add_diag(&self, d: &[f64], scale: f64) -> Self {
        assert_eq!(d.len(), self.dim());
        let diag = self.diag.iter().zip(d).map(|(a, b)| a + scale * b).collect();
        Self { diag, off: self.off.clone() }
    }

    /// `A - sigma · B` for a second tridiagonal matrix of equal size.
    pub fn shifted(&self, other: &SymTridiag, sigma: f64) -> Self {
        assert_eq!(self.dim(), other.dim());
        let diag = self.diag.iter().zip(&other.diag).map(|(a, b)| a - sigma * b).collect();
        let off = self.off.iter().zip(&other.off).map(|(a, b)| a - sigma * b).collect();
        Self { diag, off }
    }

    /// Principal submatrix on a strictly increasing index list. Rows that are
    /// not grid neighbours get a zero coupling.
    pub fn restrict(&self, idx: &[usize]) -> Self {
        let diag = idx.iter().map(|&i| self.diag[i]).collect();
        let off = idx.windows(2).map(|w| if w[1] == w[0] + 1 { self.off[w[0]] } else { 0.0 }).collect();
        Self { diag, off }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for i in 0..n.saturating_sub(1) {
            m[(i, i + 1)] = self.off[i];
            m[(i + 1, i)] = self.off[i];
        }
        m
    }

    pub fn cholesky(&self) -> Result<TridiagCholesky, LinalgError> {
        TridiagCholesky::new(self)
    }

    pub fn lu(&self) -> Result<TridiagLu, LinalgError> {
        TridiagLu::new(self)
    }

    /// Number of eigenvalues of the pencil `(self, metric)` strictly below
    /// `sigma`; `metric` must be SPD. Counts negative pivots of
    /// `self - sigma·metric`.
    pub fn pencil_count_below(&self, metric: &SymTridiag, sigma: f64) -> usize {
        let n = self.dim();
        let mut count = 0;
        let mut d_prev = 1.0;
        let scale = self
            .diag
            .iter()
            .zip(&metric.diag)
            .map(|(a, b)| a.abs() + sigma.abs() * b.abs())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        for i in 0..n {
            let mut d = self.diag[i] - sigma * metric.diag[i];
            if i > 0 {
                let e = self.off[i - 1] - sigma * metric.off[i - 1];
                d -= e * e / d_prev;
            }
            if d == 0.0 {
                d = -f64::EPSILON * scale;
            }
            if d < 0.0 {
                count += 1;
            }
            d_prev = d;
        }
        count
    }

    /// The `k`-th (0-based, ascending) eigenvalue of the pencil
    /// `(self, metric)` by Sturm bisection.
    pub fn pencil_eigenvalue(&self, metric: &SymTridiag, k: usize) -> f64 {
        assert!(k < self.dim());
        let mut lo = -1.0;
        while self.pencil_count_below(metric, lo) > k {
            lo *= 2.0;
        }
        let mut hi = 1.0;
        while self.pencil_count_below(metric, hi) <= k {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.pencil_count_below(metric, mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Largest `|mu|` over the pencil `(self, metric)`.
    pub fn pencil_spectral_radius(&self, metric: &SymTridiag) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 0.0;
        }
        let lo = self.pencil_eigenvalue(metric, 0);
        let hi = self.pencil_eigenvalue(metric, n - 1);
        lo.abs().max(hi.abs())
    }
}

/// LDLᵀ factorization of an SPD tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct TridiagCholesky {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl TridiagCholesky {
    fn new(a: &SymTridiag) -> Result<Self, LinalgError> {
        let n = a.dim();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let mut di = a.diag[i];
            if i > 0 {
                di -= l[i - 1] * a.off[i - 1];
            }
            if !(di > 0.0) || !di.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { row: i, pivot: di });
            }
            d[i] = di;
            if i + 1 < n {
                l[i] = a.off[i] / di;
            }
        }
        Ok(Self { d, l })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        assert_eq!(b.len(), n);
        for i in 1..n {
            b[i] -= self.l[i - 1] * b[i - 1];
        }
        for i in 0..n {
            b[i] /= self.d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            b[i] -= self.l[i] * b[i + 1];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// `bᵀ A⁻¹ b`, computed as `Σ y_i² / d_i` with `L y = b`.
    pub fn inverse_quad(&self, b: &[f64]) -> f64 {
        let n = self.dim();
        let mut y = b.to_vec();
        for i in 1..n {
            y[i] -= self.l[i - 1] * y[i - 1];
        }
        y.iter().zip(&self.d).map(|(yi, di)| yi * yi / di).sum()
    }
}

/// Tridiagonal LU with partial pivoting (the LAPACK `gttrf` scheme).
#[derive(Debug, Clone)]
pub struct TridiagLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn new(a: &SymTridiag) -> Result<Self, LinalgError> {
        let n = a.dim();
        let mut dl = a.off.clone();
        let mut d = a.diag.clone();
        let mut du = a.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if let Some(row) = d.iter().position(|v| *v == 0.0 || !v.is_finite()) {
            return Err(LinalgError::Singular(row));
        }
        Ok(Self { dl, d, du, du2, swapped })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        assert_eq!(b.len(), n);
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        if n == 0 {
            return;
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Sign of the determinant: product of the pivot signs times the
    /// permutation parity.
    pub fn det_sign(&self) -> i32 {
        let negatives = self.d.iter().filter(|v| **v < 0.0).count();
        let swaps = self.swapped.iter().filter(|s| **s).count();
        if (negatives + swaps) % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn min_abs_pivot(&self) -> f64 {
        self.d.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
    }
}
