//! Independent reference implementations used only by the tests.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Circulant `N × N` matrix with first row `row`: `C[i][j] = row[(j − i) mod N]`.
pub fn circulant(row: &[f64]) -> DMatrix<f64> {
    let n = row.len();
    DMatrix::from_fn(n, n, |i, j| row[(j + n - i) % n])
}

/// Dense `D = [D_v; D_h]` built from the two first rows: `D_v` has −1 at
/// column 1 and +1 at column N, `D_h` has −1 at column 1 and +1 at
/// column N − N1 + 1 (1-based).
pub fn dense_difference(n1: usize, n2: usize) -> DMatrix<f64> {
    let n = n1 * n2;
    let mut rv = vec![0.0; n];
    rv[0] = -1.0;
    rv[n - 1] += 1.0;
    let mut rh = vec![0.0; n];
    rh[0] = -1.0;
    rh[n - n1] += 1.0;
    let dv = circulant(&rv);
    let dh = circulant(&rh);
    let mut d = DMatrix::zeros(2 * n, n);
    d.view_mut((0, 0), (n, n)).copy_from(&dv);
    d.view_mut((n, 0), (n, n)).copy_from(&dh);
    d
}

pub fn objective(x: &[f64], y: &[f64], d: &DMatrix<f64>, lambda: f64) -> f64 {
    let n = x.len();
    let xv = nalgebra::DVector::from_column_slice(x);
    let dx = d * &xv;
    let tv: f64 = (0..n).map(|i| dx[i].hypot(dx[n + i])).sum();
    let data: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    0.5 * data + lambda * tv
}

/// Denoising oracle (`A = I`): FISTA on the dual
/// `min ½‖y − Dᵀp‖²  s.t. ‖p_g‖ ≤ λ`, with `x = y − Dᵀp`.
/// Uses dense `D` from [`dense_difference`], not the library operator.
pub fn tv_denoise_oracle(y: &[f64], n1: usize, n2: usize, lambda: f64, iters: usize) -> Vec<f64> {
    let n = n1 * n2;
    let d = dense_difference(n1, n2);
    let dt = d.transpose();
    let yv = nalgebra::DVector::from_column_slice(y);
    let step = 1.0 / 8.0;
    let mut p = nalgebra::DVector::zeros(2 * n);
    let mut q = p.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let x = &yv - &dt * &q;
        let mut next = &q + (&d * &x) * step;
        for i in 0..n {
            let norm = next[i].hypot(next[n + i]);
            if norm > lambda {
                next[i] *= lambda / norm;
                next[n + i] *= lambda / norm;
            }
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        q = &next + (&next - &p) * ((t - 1.0) / t_next);
        p = next;
        t = t_next;
    }
    (&yv - &dt * &p).as_slice().to_vec()
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}
