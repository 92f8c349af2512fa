//! Proximal operators.
//!
//! `prox_{γg}(z) = argmin_u g(u) + (1/2γ)‖z − u‖²`. The TV problem needs the
//! prox of the mixed ℓ₁,₂ norm over per-pixel (vertical, horizontal) groups,
//! and PDS additionally needs the prox of its convex conjugate.

use crate::error::{Error, Result};

/// A stacked difference vector of length `2N` grouped as `{i, N + i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedVector(Vec<f64>);

impl GroupedVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() || data.len() % 2 != 0 {
            return Err(Error::Config(format!(
                "grouped vector needs a positive even length, got {}",
                data.len()
            )));
        }
        Ok(Self(data))
    }

    pub fn num_groups(&self) -> usize {
        self.0.len() / 2
    }

    /// The `(vertical, horizontal)` pair of group `i`.
    pub fn group(&self, i: usize) -> (f64, f64) {
        (self.0[i], self.0[self.num_groups() + i])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for GroupedVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be > 0, got {v}")))
    }
}

/// Group soft-thresholding: `prox_{τ‖·‖₁,₂}(z)`.
pub fn prox_group_l12(z: &GroupedVector, tau: f64) -> Result<GroupedVector> {
    check_positive("threshold", tau)?;
    let mut out = z.0.clone();
    shrink_groups(&mut out, tau);
    Ok(GroupedVector(out))
}

/// In-place group soft-thresholding on a stacked `2N` vector.
pub(crate) fn shrink_groups(z: &mut [f64], tau: f64) {
    let n = z.len() / 2;
    let (zv, zh) = z.split_at_mut(n);
    for (a, b) in zv.iter_mut().zip(zh.iter_mut()) {
        let norm = a.hypot(*b);
        // zero-norm groups stay at zero
        let scale = if norm > tau { 1.0 - tau / norm } else { 0.0 };
        *a *= scale;
        *b *= scale;
    }
}

/// `z − prox_{λ‖·‖₁,₂}(z)`, computed in place. This is the prox of the
/// conjugate of `λ‖·‖₁,₂` (the group-wise projection onto the λ-ball), in the
/// form used by the PDS dual update.
pub(crate) fn conjugate_shrink_groups(z: &mut [f64], lambda: f64) {
    let n = z.len() / 2;
    let (zv, zh) = z.split_at_mut(n);
    for (a, b) in zv.iter_mut().zip(zh.iter_mut()) {
        let norm = a.hypot(*b);
        let scale = if norm > lambda { 1.0 - lambda / norm } else { 0.0 };
        *a -= scale * *a;
        *b -= scale * *b;
    }
}

/// Prox of the convex conjugate via the Moreau decomposition:
/// `prox_{γh*}(u) = u − γ·prox_{h/γ}(u/γ)`, where `base_prox` evaluates
/// `prox_{h/γ}`.
pub fn prox_conjugate<F>(u: &[f64], gamma: f64, base_prox: F) -> Result<Vec<f64>>
where
    F: FnOnce(&[f64]) -> Vec<f64>,
{
    check_positive("gamma", gamma)?;
    let scaled: Vec<f64> = u.iter().map(|v| v / gamma).collect();
    let p = base_prox(&scaled);
    if p.len() != u.len() {
        return Err(Error::Dimension { expected: u.len(), got: p.len() });
    }
    Ok(u.iter().zip(&p).map(|(a, b)| a - gamma * b).collect())
}

/// Total number of grid points used by [`prox_numeric_oracle`].
pub const ORACLE_GRID_POINTS: usize = 10_000;
/// Pattern-search refinement rounds used by [`prox_numeric_oracle`].
pub const ORACLE_REFINE_ROUNDS: usize = 100;

/// Brute-force prox for testing in dimension `k ≤ 3`.
///
/// Grid search over the hypercube `[z − 3γ, z + 3γ]` with about
/// [`ORACLE_GRID_POINTS`] points, followed by [`ORACLE_REFINE_ROUNDS`] rounds of
/// compass search whose step halves after each round.
pub fn prox_numeric_oracle<G>(g: G, gamma: f64, z: &[f64]) -> Result<Vec<f64>>
where
    G: Fn(&[f64]) -> f64,
{
    check_positive("gamma", gamma)?;
    let k = z.len();
    if k == 0 || k > 3 {
        return Err(Error::Domain(format!("oracle supports 1 to 3 dimensions, got {k}")));
    }
    let objective = |u: &[f64]| {
        let d2: f64 = u.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        g(u) + d2 / (2.0 * gamma)
    };

    let per_axis = (ORACLE_GRID_POINTS as f64).powf(1.0 / k as f64).floor() as usize;
    let half = 3.0 * gamma;
    let spacing = 2.0 * half / (per_axis - 1) as f64;

    let mut best = z.to_vec();
    let mut best_val = objective(&best);
    let mut u = vec![0.0; k];
    let total = per_axis.pow(k as u32);
    for flat in 0..total {
        let mut rem = flat;
        for (d, ud) in u.iter_mut().enumerate() {
            *ud = z[d] - half + spacing * (rem % per_axis) as f64;
            rem /= per_axis;
        }
        let val = objective(&u);
        if val < best_val {
            best_val = val;
            best.copy_from_slice(&u);
        }
    }

    let mut step = spacing;
    let mut trial = best.clone();
    for _ in 0..ORACLE_REFINE_ROUNDS {
        // move while some axis direction improves, bounded per round
        for _ in 0..64 {
            let mut moved = false;
            for d in 0..k {
                for sign in [1.0, -1.0] {
                    trial.copy_from_slice(&best);
                    trial[d] += sign * step;
                    let val = objective(&trial);
                    if val < best_val {
                        best_val = val;
                        best.copy_from_slice(&trial);
                        moved = true;
                    }
                }
            }
            if !moved {
                break;
            }
        }
        step *= 0.5;
    }
    Ok(best)
}
