//! Grayscale images, file I/O, degradation and the patch pipeline.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::metrics::{aggregate_report, psnr, ssim_with_mode, RestorationReport, SsimMode, SsimParams};
use crate::operators::{AdmmLinearSolver, DifferenceOperator, GridShape, Observation};
use crate::optics::fill_gaussian;
use crate::solvers::{
    admm_tv_prefactored, pds_tv_unchecked, warn_pds_steps_for, Algorithm, Method, SolverConfig, SolverOutput, SolverTrace, TraceReference,
    TvProblem,
};

/// Observation noise level of the denoising experiments, `10/255`.
pub const DEFAULT_SIGMA: f64 = 10.0 / 255.0;
pub const DEFAULT_PATCH: usize = 16;

/// Grayscale image with intensities nominally in `[0, 1]`, stored column by
/// column to match the difference operator's vectorization.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    shape: GridShape,
    data: Vec<f64>,
}

impl ImageTensor {
    /// Wrap a column-major pixel vector.
    pub fn from_column_major(shape: GridShape, data: Vec<f64>) -> Result<Self> {
        check_len(shape.len(), data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("image contains non-finite values".into()));
        }
        Ok(Self { shape, data })
    }

    pub fn from_row_major(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        let shape = GridShape::new(rows, cols)?;
        check_len(shape.len(), values.len())?;
        let mut data = vec![0.0; shape.len()];
        for r in 0..rows {
            for c in 0..cols {
                data[shape.index(r, c)] = values[r * cols + c];
            }
        }
        Self::from_column_major(shape, data)
    }

    pub fn filled(shape: GridShape, value: f64) -> Self {
        Self { shape, data: vec![value; shape.len()] }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape.n1
    }

    pub fn cols(&self) -> usize {
        self.shape.n2
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[self.shape.index(row, col)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for r in 0..self.rows() {
            for c in 0..self.cols() {
                out.push(self.get(r, c));
            }
        }
        out
    }

    /// 8-bit quantization: clamp to `[0, 1]`, scale by 255, round half away
    /// from zero. Row-major.
    pub fn to_u8(&self) -> Vec<u8> {
        self.to_row_major().into_iter().map(quantize).collect()
    }

    pub fn from_u8(rows: usize, cols: usize, pixels: &[u8]) -> Result<Self> {
        let values: Vec<f64> = pixels.iter().map(|&p| p as f64 / 255.0).collect();
        Self::from_row_major(rows, cols, &values)
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round().clamp(0.0, 255.0) as u8
}

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];

/// Load an 8-bit grayscale PGM (binary `P5`, maxval 255) or PNG.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageTensor> {
    let bytes = fs::read(path.as_ref())?;
    decode_image(&bytes)
}

pub fn decode_image(bytes: &[u8]) -> Result<ImageTensor> {
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P6") || bytes.starts_with(b"P3") {
        Err(Error::Format("only binary grayscale PGM (P5) is supported".into()))
    } else {
        Err(Error::Format("unrecognized image format (expected P5 PGM or PNG)".into()))
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<ImageTensor> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::Format("truncated PGM header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("malformed PGM header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("PGM header value out of range".into()))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Format(format!("PGM maxval must be 255, got {maxval}")));
    }
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(Error::Format("missing whitespace after PGM header".into()));
    }
    pos += 1;
    let need = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("PGM dimensions overflow".into()))?;
    let pixels = bytes
        .get(pos..pos + need)
        .ok_or_else(|| Error::Format(format!("truncated PGM data: need {need} bytes, have {}", bytes.len() - pos)))?;
    ImageTensor::from_u8(height, width, pixels)
}

fn decode_png(bytes: &[u8]) -> Result<ImageTensor> {
    let png_err = |e: png::DecodingError| Error::Format(format!("PNG: {e}"));
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(png_err)?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale {
        return Err(Error::Format(format!("PNG must be grayscale, got {:?}", info.color_type)));
    }
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format(format!("PNG must be 8-bit, got {:?}", info.bit_depth)));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format("PNG too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    if frame.color_type != png::ColorType::Grayscale || frame.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format("PNG does not decode to 8-bit grayscale".into()));
    }
    let (w, h) = (frame.width as usize, frame.height as usize);
    let mut pixels = Vec::with_capacity(w * h);
    for row in buf[..frame.buffer_size()].chunks_exact(frame.line_size).take(h) {
        pixels.extend_from_slice(&row[..w]);
    }
    ImageTensor::from_u8(h, w, &pixels)
}

/// Save as PNG when the extension is `.png`, otherwise as binary PGM.
pub fn save_image(img: &ImageTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let bytes = if is_png { encode_png(img)? } else { encode_pgm(img) };
    fs::write(path, bytes)?;
    Ok(())
}

pub fn encode_pgm(img: &ImageTensor) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.cols(), img.rows()).into_bytes();
    out.extend(img.to_u8());
    out
}

pub fn encode_png(img: &ImageTensor) -> Result<Vec<u8>> {
    let png_err = |e: png::EncodingError| Error::Format(format!("PNG: {e}"));
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.cols() as u32, img.rows() as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(&img.to_u8()).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
    }
    Ok(out)
}

/// Add i.i.d. N(0, σ²) noise. The result is not clamped.
pub fn degrade(img: &ImageTensor, sigma: f64, seed: u64) -> Result<ImageTensor> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be >= 0, got {sigma}")));
    }
    let mut data = img.data.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fill_gaussian(&mut data, sigma, &mut rng, true);
    Ok(ImageTensor { shape: img.shape, data })
}

/// Mix a master seed with a stream index (SplitMix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(master ^ mix(index))
}

/// Non-overlapping square patches of an image, in row-major patch order.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    patch: usize,
    source: GridShape,
    patches: Vec<ImageTensor>,
}

impl PatchSet {
    pub fn patch_size(&self) -> usize {
        self.patch
    }

    pub fn source_shape(&self) -> GridShape {
        self.source
    }

    pub fn patches(&self) -> &[ImageTensor] {
        &self.patches
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// Patches per row of the patch grid.
    pub fn grid_cols(&self) -> usize {
        self.source.n2 / self.patch
    }

    /// Replace the patch contents, keeping the layout.
    pub fn with_patches(&self, patches: Vec<ImageTensor>) -> Result<Self> {
        check_len(self.patches.len(), patches.len())?;
        let shape = GridShape::new(self.patch, self.patch)?;
        if patches.iter().any(|p| p.shape != shape) {
            return Err(Error::Config(format!("every patch must be {0}x{0}", self.patch)));
        }
        Ok(Self { patch: self.patch, source: self.source, patches })
    }
}

fn check_patch(shape: GridShape, p: usize) -> Result<()> {
    if p < 2 || shape.n1 % p != 0 || shape.n2 % p != 0 {
        return Err(Error::Config(format!(
            "patch size {p} must be >= 2 and divide both image dimensions ({}x{})",
            shape.n1, shape.n2
        )));
    }
    Ok(())
}

pub fn patchify(img: &ImageTensor, p: usize) -> Result<PatchSet> {
    check_patch(img.shape, p)?;
    let pshape = GridShape::new(p, p)?;
    let (gr, gc) = (img.rows() / p, img.cols() / p);
    let mut patches = Vec::with_capacity(gr * gc);
    for pr in 0..gr {
        for pc in 0..gc {
            let mut data = Vec::with_capacity(p * p);
            for c in 0..p {
                let start = img.shape.index(pr * p, pc * p + c);
                data.extend_from_slice(&img.data[start..start + p]);
            }
            patches.push(ImageTensor { shape: pshape, data });
        }
    }
    Ok(PatchSet { patch: p, source: img.shape, patches })
}

pub fn depatchify(set: &PatchSet) -> Result<ImageTensor> {
    let p = set.patch;
    check_patch(set.source, p)?;
    let gc = set.grid_cols();
    check_len((set.source.n1 / p) * gc, set.patches.len())?;
    let mut data = vec![0.0; set.source.len()];
    for (i, patch) in set.patches.iter().enumerate() {
        let (pr, pc) = (i / gc, i % gc);
        for c in 0..p {
            let start = set.source.index(pr * p, pc * p + c);
            data[start..start + p].copy_from_slice(&patch.data[c * p..(c + 1) * p]);
        }
    }
    Ok(ImageTensor { shape: set.source, data })
}

/// Output of [`restore_image`].
#[derive(Debug, Clone)]
pub struct Restoration {
    pub image: ImageTensor,
    pub patch_traces: Vec<SolverTrace>,
}

/// Shared per-run state for restoring many equally-sized patches.
pub struct PatchRestorer {
    method: Method,
    cfg: SolverConfig,
    op: DifferenceOperator,
    identity: Observation,
    admm: Option<AdmmLinearSolver>,
    ssim: SsimParams,
    mode: SsimMode,
}

impl PatchRestorer {
    pub fn new(method: Method, cfg: &SolverConfig, p: usize) -> Result<Self> {
        let cfg = SolverConfig { noise_enabled: method.noisy, ..*cfg };
        cfg.validate()?;
        let op = DifferenceOperator::new(GridShape::new(p, p)?);
        let identity = Observation::Identity;
        let admm = match method.algorithm {
            Algorithm::Admm => Some(AdmmLinearSolver::new(&identity, &op, cfg.gamma)?),
            Algorithm::Pds => {
                warn_pds_steps_for(&cfg, 1.0);
                None
            }
        };
        let mode = if p >= SsimParams::default().window { SsimMode::Windowed } else { SsimMode::Global };
        Ok(Self { method, cfg, op, identity, admm, ssim: SsimParams::default(), mode })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// SSIM flavour used for per-iteration tracking.
    pub fn with_ssim_mode(mut self, mode: SsimMode) -> Self {
        self.mode = mode;
        self
    }

    /// Restore patch `index`; its amplifier noise stream is seeded from the
    /// master seed and the index alone, so patches may run in any order.
    pub fn restore_patch(&self, index: usize, patch: &ImageTensor, truth: Option<&ImageTensor>) -> Result<SolverOutput> {
        let problem = TvProblem::new(&patch.data, &self.identity, self.op)?;
        let cfg = SolverConfig { seed: derive_seed(self.cfg.seed, index as u64), ..self.cfg };
        let reference = truth.map(|t| TraceReference { image: &t.data, ssim: self.ssim, mode: self.mode });
        match &self.admm {
            Some(solver) => admm_tv_prefactored(&problem, &cfg, solver, None, reference),
            None => pds_tv_unchecked(&problem, &cfg, reference),
        }
    }
}

/// Restore every `p × p` patch independently with `A = I` and reassemble.
/// When `truth` is given, per-iteration PSNR/SSIM are traced per patch.
pub fn restore_image(
    observed: &ImageTensor,
    method: Method,
    cfg: &SolverConfig,
    p: usize,
    truth: Option<&ImageTensor>,
) -> Result<Restoration> {
    let observed_set = patchify(observed, p)?;
    let truth_set = match truth {
        Some(t) => {
            if t.shape != observed.shape {
                return Err(Error::Config("ground truth and observation differ in shape".into()));
            }
            Some(patchify(t, p)?)
        }
        None => None,
    };
    let restorer = PatchRestorer::new(method, cfg, p)?;
    let outputs: Vec<SolverOutput> = observed_set
        .patches
        .par_iter()
        .enumerate()
        .map(|(i, patch)| {
            let t = truth_set.as_ref().map(|s| &s.patches[i]);
            restorer.restore_patch(i, patch, t)
        })
        .collect::<Result<_>>()?;

    let pshape = GridShape::new(p, p)?;
    let mut patches = Vec::with_capacity(outputs.len());
    let mut traces = Vec::with_capacity(outputs.len());
    for out in outputs {
        patches.push(ImageTensor { shape: pshape, data: out.x });
        traces.push(out.trace);
    }
    let image = depatchify(&observed_set.with_patches(patches)?)?;
    Ok(Restoration { image, patch_traces: traces })
}

/// Per-patch PSNR/SSIM of `test` against `reference`, averaged over patches.
pub fn evaluate_patches(reference: &ImageTensor, test: &ImageTensor, p: usize, mode: SsimMode) -> Result<RestorationReport> {
    if reference.shape != test.shape {
        return Err(Error::Config("images differ in shape".into()));
    }
    let a = patchify(reference, p)?;
    let b = patchify(test, p)?;
    let params = SsimParams::default();
    let metrics: Vec<_> = a
        .patches
        .iter()
        .zip(&b.patches)
        .map(|(r, t)| -> Result<_> {
            Ok((psnr(&r.data, &t.data, 1.0)?, ssim_with_mode(&r.data, &t.data, r.shape, &params, mode)?))
        })
        .collect::<Result<_>>()?;
    let (ps, ss) = metrics.into_iter().unzip();
    aggregate_report(ps, ss)
}

/// Whole-image PSNR and windowed SSIM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub psnr: crate::metrics::Psnr,
    pub ssim: f64,
}

pub fn evaluate_whole(reference: &ImageTensor, test: &ImageTensor) -> Result<ImageMetrics> {
    if reference.shape != test.shape {
        return Err(Error::Config("images differ in shape".into()));
    }
    let params = SsimParams::default();
    let mode = if reference.rows().min(reference.cols()) >= params.window { SsimMode::Windowed } else { SsimMode::Global };
    Ok(ImageMetrics {
        psnr: psnr(&reference.data, &test.data, 1.0)?,
        ssim: ssim_with_mode(&reference.data, &test.data, reference.shape, &params, mode)?,
    })
}
