//! Linear operators of the TV problem.
//!
//! Images are vectorized column by column: pixel `(r, c)` of an `n1 × n2`
//! image sits at index `c·n1 + r`. The vertical and horizontal difference
//! matrices are circulant with first rows
//!
//! ```text
//! v_1 = (-1, 0, …, 0, 1)            (+1 at column N)
//! h_1 = (-1, 0, …, 1, …, 0)         (+1 at column N − n1 + 1)
//! ```
//!
//! so `(D_v x)_i = x_{i−1} − x_i` and `(D_h x)_i = x_{i−n1} − x_i`, indices
//! taken modulo `N`. Horizontal differences are periodic in both image axes;
//! vertical differences wrap through the stacked vector, so the top pixel of a
//! column is differenced against the bottom pixel of the previous column.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Image grid dimensions: `n1` rows by `n2` columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    pub n1: usize,
    pub n2: usize,
}

impl GridShape {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 < 2 || n2 < 2 {
            return Err(Error::Config(format!(
                "grid must be at least 2x2, got {n1}x{n2}"
            )));
        }
        Ok(Self { n1, n2 })
    }

    /// Number of pixels `N = n1·n2`.
    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Vector index of pixel `(row, col)`.
    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        col * self.n1 + row
    }
}

/// Stacked circulant first-difference operator `D = [D_v; D_h]`, applied
/// matrix-free.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DifferenceOperator {
    shape: GridShape,
}

impl DifferenceOperator {
    pub fn new(shape: GridShape) -> Self {
        Self { shape }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    /// Number of pixels `N`; `D` maps ℝᴺ → ℝ²ᴺ.
    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    /// `Dx`: vertical differences in the first `N` entries, horizontal in the
    /// last `N`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        let mut out = vec![0.0; 2 * self.dim()];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    /// `Dᵀz`.
    pub fn apply_t(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len(2 * self.dim(), z.len())?;
        let mut out = vec![0.0; self.dim()];
        self.apply_t_into(z, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let n1 = self.shape.n1;
        let (dv, dh) = out.split_at_mut(n);
        dv[0] = x[n - 1] - x[0];
        for i in 1..n {
            dv[i] = x[i - 1] - x[i];
        }
        for i in 0..n1 {
            dh[i] = x[i + n - n1] - x[i];
        }
        for i in n1..n {
            dh[i] = x[i - n1] - x[i];
        }
    }

    pub(crate) fn apply_t_into(&self, z: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let n1 = self.shape.n1;
        let (zv, zh) = z.split_at(n);
        for j in 0..n {
            let next = if j + 1 == n { 0 } else { j + 1 };
            let right = if j + n1 >= n { j + n1 - n } else { j + n1 };
            out[j] = (zv[next] - zv[j]) + (zh[right] - zh[j]);
        }
    }

    /// Isotropic total variation `Σᵢ sqrt(d_{v,i}² + d_{h,i}²)`.
    pub fn tv_seminorm(&self, x: &[f64]) -> Result<f64> {
        let d = self.apply(x)?;
        Ok(mixed_l12_norm(&d))
    }
}

/// `Σᵢ ‖(zᵢ, z_{N+i})‖₂` for a stacked difference vector of length `2N`.
pub fn mixed_l12_norm(z: &[f64]) -> f64 {
    let n = z.len() / 2;
    let (zv, zh) = z.split_at(n);
    zv.iter().zip(zh).map(|(a, b)| a.hypot(*b)).sum()
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len(rows * cols, data.len())?;
        if rows == 0 || cols == 0 {
            return Err(Error::Config("matrix must be non-empty".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn mul_t_vec(&self, r: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (ri, row) in r.iter().zip(self.data.chunks_exact(self.cols)) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * ri;
            }
        }
    }
}

/// Observation (degradation) operator `A`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Observation {
    /// `A = I`, the pure denoising setting.
    #[default]
    Identity,
    Matrix(DenseMatrix),
}

impl Observation {
    /// Output dimension `M` for an input of dimension `n`.
    pub fn rows(&self, n: usize) -> usize {
        match self {
            Observation::Identity => n,
            Observation::Matrix(m) => m.rows,
        }
    }

    pub fn check_dims(&self, n: usize, y_len: usize) -> Result<()> {
        if let Observation::Matrix(m) = self {
            check_len(n, m.cols)?;
        }
        check_len(self.rows(n), y_len)
    }

    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Observation::Identity => out.copy_from_slice(x),
            Observation::Matrix(m) => m.mul_vec(x, out),
        }
    }

    pub(crate) fn apply_t_into(&self, r: &[f64], out: &mut [f64]) {
        match self {
            Observation::Identity => out.copy_from_slice(r),
            Observation::Matrix(m) => m.mul_t_vec(r, out),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows(x.len())];
        self.apply_into(x, &mut out);
        out
    }

    pub fn apply_t(&self, r: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.apply_t_into(r, &mut out);
        out
    }

    /// Largest eigenvalue of `AᵀA`, the Lipschitz constant of the data-term
    /// gradient. Estimated by power iteration for dense `A`.
    pub fn gram_norm(&self, n: usize) -> f64 {
        match self {
            Observation::Identity => 1.0,
            Observation::Matrix(m) => {
                let mut v = vec![1.0 / (n as f64).sqrt(); n];
                let mut av = vec![0.0; m.rows];
                let mut w = vec![0.0; n];
                let mut est = 0.0;
                for _ in 0..200 {
                    m.mul_vec(&v, &mut av);
                    m.mul_t_vec(&av, &mut w);
                    let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
                    if norm == 0.0 {
                        return 0.0;
                    }
                    est = norm;
                    v.iter_mut().zip(&w).for_each(|(a, b)| *a = b / norm);
                }
                est
            }
        }
    }
}

/// Prefactorized solver for `(AᵀA + (1/γ)DᵀD) x = r`, the ADMM x-update.
///
/// The system matrix is formed densely and Cholesky-factorized once; each
/// solve is two triangular substitutions.
#[derive(Debug, Clone)]
pub struct AdmmLinearSolver {
    n: usize,
    gamma: f64,
    /// Lower-triangular Cholesky factor, row-major `n × n`.
    lower: Vec<f64>,
}

impl AdmmLinearSolver {
    pub fn new(a: &Observation, op: &DifferenceOperator, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("gamma must be > 0, got {gamma}")));
        }
        let n = op.dim();
        let m = system_matrix(a, op, gamma)?;
        let lower = cholesky(&m, n)?;
        Ok(Self { n, gamma, lower })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, rhs.len())?;
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        let l = &self.lower;
        for i in 0..n {
            let row = &l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= l[k * n + i] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
    }
}

/// Build and factorize the ADMM system matrix for observation `a` and step `gamma`.
pub fn build_admm_solver(a: &Observation, op: &DifferenceOperator, gamma: f64) -> Result<AdmmLinearSolver> {
    AdmmLinearSolver::new(a, op, gamma)
}

/// Dense `AᵀA + (1/γ)DᵀD`, row-major.
pub fn system_matrix(a: &Observation, op: &DifferenceOperator, gamma: f64) -> Result<Vec<f64>> {
    let n = op.dim();
    let mut m = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    let mut d = vec![0.0; 2 * n];
    let mut col = vec![0.0; n];
    let inv_gamma = 1.0 / gamma;
    for j in 0..n {
        e[j] = 1.0;
        op.apply_into(&e, &mut d);
        op.apply_t_into(&d, &mut col);
        e[j] = 0.0;
        for i in 0..n {
            m[i * n + j] = inv_gamma * col[i];
        }
    }
    match a {
        Observation::Identity => {
            for i in 0..n {
                m[i * n + i] += 1.0;
            }
        }
        Observation::Matrix(mat) => {
            check_len(n, mat.cols)?;
            for r in 0..mat.rows {
                let row = mat.row(r);
                for i in 0..n {
                    if row[i] == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        m[i * n + j] += row[i] * row[j];
                    }
                }
            }
        }
    }
    Ok(m)
}

/// Cholesky factor `L` (row-major, lower) of a symmetric matrix. Pivots that
/// fall below a relative tolerance are treated as loss of definiteness.
fn cholesky(m: &[f64], n: usize) -> Result<Vec<f64>> {
    let max_diag = (0..n).map(|i| m[i * n + i].abs()).fold(0.0, f64::max);
    let tol = max_diag * (n as f64) * f64::EPSILON * 64.0;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let s: f64 = l[j * n..j * n + j].iter().map(|v| v * v).sum();
        let pivot = m[j * n + j] - s;
        if !(pivot > tol) {
            return Err(Error::Factorization(format!(
                "system matrix is not positive definite (pivot {pivot:.3e} at column {j}); \
                 the observation operator must not annihilate constant images"
            )));
        }
        let ljj = pivot.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let s: f64 = l[i * n..i * n + j]
                .iter()
                .zip(&l[j * n..j * n + j])
                .map(|(a, b)| a * b)
                .sum();
            l[i * n + j] = (m[i * n + j] - s) / ljj;
        }
    }
    Ok(l)
}
