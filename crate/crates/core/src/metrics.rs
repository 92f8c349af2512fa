//! Image quality metrics and per-patch report aggregation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::operators::GridShape;
use crate::solvers::SolverConfig;

/// Peak signal-to-noise ratio. Identical inputs have no finite PSNR and are
/// reported as `Exact`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Psnr {
    Exact,
    Db(f64),
}

impl Psnr {
    pub fn db(self) -> Option<f64> {
        match self {
            Psnr::Exact => None,
            Psnr::Db(v) => Some(v),
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Psnr::Exact)
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Exact => f.write_str("exact"),
            Psnr::Db(v) => write!(f, "{v:.6}"),
        }
    }
}

pub fn mse(reference: &[f64], test: &[f64]) -> Result<f64> {
    check_len(reference.len(), test.len())?;
    if reference.is_empty() {
        return Err(Error::Config("cannot compare empty signals".into()));
    }
    let sum: f64 = reference.iter().zip(test).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / reference.len() as f64)
}

/// `10·log₁₀(peak² / MSE)`.
pub fn psnr(reference: &[f64], test: &[f64], peak: f64) -> Result<Psnr> {
    if !(peak > 0.0) {
        return Err(Error::Domain(format!("peak must be > 0, got {peak}")));
    }
    let e = mse(reference, test)?;
    if e == 0.0 {
        return Ok(Psnr::Exact);
    }
    Ok(Psnr::Db(10.0 * (peak * peak / e).log10()))
}

/// SSIM constants and window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range of the pixel values.
    pub range: f64,
    /// Side length of the Gaussian window.
    pub window: usize,
    pub sigma: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self { k1: 0.01, k2: 0.03, range: 1.0, window: 11, sigma: 1.5 }
    }
}

impl SsimParams {
    fn constants(&self) -> (f64, f64) {
        let c1 = (self.k1 * self.range).powi(2);
        let c2 = (self.k2 * self.range).powi(2);
        (c1, c2)
    }

    fn kernel(&self) -> Vec<f64> {
        let w = self.window;
        let c = (w as f64 - 1.0) / 2.0;
        let g: Vec<f64> = (0..w)
            .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let mut k = Vec::with_capacity(w * w);
        for a in &g {
            for b in &g {
                k.push(a * b);
            }
        }
        let s: f64 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= s);
        k
    }
}

/// How SSIM statistics are gathered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SsimMode {
    /// Mean of the Gaussian-windowed SSIM map, windows kept inside the image.
    #[default]
    Windowed,
    /// One window spanning the whole image with uniform weights.
    Global,
}

fn ssim_from_moments(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64, c1: f64, c2: f64) -> f64 {
    ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

/// Windowed SSIM on column-major images of the given shape.
pub fn ssim(reference: &[f64], test: &[f64], shape: GridShape, params: &SsimParams) -> Result<f64> {
    check_len(shape.len(), reference.len())?;
    check_len(shape.len(), test.len())?;
    let w = params.window;
    if w == 0 || shape.n1 < w || shape.n2 < w {
        return Err(Error::Config(format!(
            "windowed SSIM needs at least {w}x{w} pixels, got {}x{}",
            shape.n1, shape.n2
        )));
    }
    let kernel = params.kernel();
    let (c1, c2) = params.constants();
    let mut total = 0.0;
    let mut count = 0usize;
    for c0 in 0..=shape.n2 - w {
        for r0 in 0..=shape.n1 - w {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dc in 0..w {
                let base = shape.index(r0, c0 + dc);
                for dr in 0..w {
                    let k = kernel[dr * w + dc];
                    let x = reference[base + dr];
                    let y = test[base + dr];
                    mx += k * x;
                    my += k * y;
                    sxx += k * x * x;
                    syy += k * y * y;
                    sxy += k * x * y;
                }
            }
            let vx = sxx - mx * mx;
            let vy = syy - my * my;
            let cxy = sxy - mx * my;
            total += ssim_from_moments(mx, my, vx, vy, cxy, c1, c2);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// SSIM with a single uniform window over all samples.
pub fn ssim_global(reference: &[f64], test: &[f64], params: &SsimParams) -> Result<f64> {
    check_len(reference.len(), test.len())?;
    if reference.is_empty() {
        return Err(Error::Config("cannot compare empty signals".into()));
    }
    let n = reference.len() as f64;
    let mx = reference.iter().sum::<f64>() / n;
    let my = test.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (x, y) in reference.iter().zip(test) {
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
        cxy += (x - mx) * (y - my);
    }
    let (c1, c2) = params.constants();
    Ok(ssim_from_moments(mx, my, vx / n, vy / n, cxy / n, c1, c2))
}

pub fn ssim_with_mode(
    reference: &[f64],
    test: &[f64],
    shape: GridShape,
    params: &SsimParams,
    mode: SsimMode,
) -> Result<f64> {
    match mode {
        SsimMode::Windowed => ssim(reference, test, shape, params),
        SsimMode::Global => {
            check_len(shape.len(), reference.len())?;
            ssim_global(reference, test, params)
        }
    }
}

/// Per-patch and averaged quality figures for one restoration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestorationReport {
    pub per_patch_psnr: Vec<Psnr>,
    pub per_patch_ssim: Vec<f64>,
    /// Mean over the finite per-patch PSNRs; `None` when every patch is exact.
    pub mean_psnr: Option<f64>,
    /// Patches whose PSNR was exact and therefore left out of the mean.
    pub exact_count: usize,
    pub mean_ssim: f64,
    pub config: Option<SolverConfig>,
    pub seed: u64,
    pub runtime_secs: f64,
}

/// Average per-patch metrics.
pub fn aggregate_report(per_patch_psnr: Vec<Psnr>, per_patch_ssim: Vec<f64>) -> Result<RestorationReport> {
    if per_patch_psnr.is_empty() || per_patch_ssim.is_empty() {
        return Err(Error::Config("no patch metrics to aggregate".into()));
    }
    check_len(per_patch_psnr.len(), per_patch_ssim.len())?;
    let finite: Vec<f64> = per_patch_psnr.iter().filter_map(|p| p.db()).collect();
    let exact_count = per_patch_psnr.len() - finite.len();
    let mean_psnr = if finite.is_empty() {
        None
    } else {
        Some(finite.iter().sum::<f64>() / finite.len() as f64)
    };
    let mean_ssim = per_patch_ssim.iter().sum::<f64>() / per_patch_ssim.len() as f64;
    Ok(RestorationReport {
        per_patch_psnr,
        per_patch_ssim,
        mean_psnr,
        exact_count,
        mean_ssim,
        config: None,
        seed: 0,
        runtime_secs: 0.0,
    })
}
