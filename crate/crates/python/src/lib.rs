//! Python bindings. Vectors are plain lists of floats in column-major order
//! (pixel `(r, c)` at index `c * rows + r`); images use the `Image` class.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use tvrestore::imaging::{evaluate_patches, ImageTensor};
use tvrestore::metrics::SsimMode;
use tvrestore::{Algorithm, AmplifierNoiseModel, DifferenceOperator, GridShape, Method, Observation, Psnr, TvProblem};

fn py_err(e: tvrestore::Error) -> PyErr {
    match e {
        tvrestore::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn op(rows: usize, cols: usize) -> PyResult<DifferenceOperator> {
    Ok(DifferenceOperator::new(GridShape::new(rows, cols).map_err(py_err)?))
}

fn method(algorithm: &str, noisy: bool) -> PyResult<Method> {
    let alg: Algorithm = algorithm.parse().map_err(py_err)?;
    Ok(Method::new(alg, noisy))
}

/// ASE noise model of an optical amplifier.
#[pyclass(name = "NoiseModel", get_all, set_all, from_py_object)]
#[derive(Clone, Copy)]
struct PyNoiseModel {
    noise_figure: f64,
    frequency: f64,
    bandwidth: f64,
    planck: f64,
    sim_scale: f64,
}

impl From<PyNoiseModel> for AmplifierNoiseModel {
    fn from(m: PyNoiseModel) -> Self {
        AmplifierNoiseModel {
            noise_figure: m.noise_figure,
            frequency: m.frequency,
            bandwidth: m.bandwidth,
            planck: m.planck,
            sim_scale: m.sim_scale,
        }
    }
}

impl From<AmplifierNoiseModel> for PyNoiseModel {
    fn from(m: AmplifierNoiseModel) -> Self {
        Self {
            noise_figure: m.noise_figure,
            frequency: m.frequency,
            bandwidth: m.bandwidth,
            planck: m.planck,
            sim_scale: m.sim_scale,
        }
    }
}

#[pymethods]
impl PyNoiseModel {
    #[new]
    #[pyo3(signature = (noise_figure=None, frequency=None, bandwidth=None, sim_scale=None))]
    fn new(noise_figure: Option<f64>, frequency: Option<f64>, bandwidth: Option<f64>, sim_scale: Option<f64>) -> Self {
        let d = AmplifierNoiseModel::default();
        AmplifierNoiseModel {
            noise_figure: noise_figure.unwrap_or(d.noise_figure),
            frequency: frequency.unwrap_or(d.frequency),
            bandwidth: bandwidth.unwrap_or(d.bandwidth),
            sim_scale: sim_scale.unwrap_or(d.sim_scale),
            ..d
        }
        .into()
    }

    /// Added noise power in watts for power gain `gain`.
    fn ase_noise_power(&self, gain: f64) -> PyResult<f64> {
        AmplifierNoiseModel::from(*self).ase_noise_power(gain).map_err(py_err)
    }

    fn sim_noise_std(&self, gain: f64) -> PyResult<f64> {
        AmplifierNoiseModel::from(*self).sim_noise_std(gain).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "NoiseModel(noise_figure={}, frequency={}, bandwidth={}, sim_scale={})",
            self.noise_figure, self.frequency, self.bandwidth, self.sim_scale
        )
    }
}

/// Solver parameters shared by ADMM and PDS.
#[pyclass(name = "SolverConfig", get_all, set_all, from_py_object)]
#[derive(Clone, Copy)]
struct PySolverConfig {
    lambda_: f64,
    gamma: f64,
    gamma1: f64,
    gamma2: f64,
    iterations: usize,
    seed: u64,
    noise: PyNoiseModel,
}

#[pymethods]
impl PySolverConfig {
    #[new]
    #[pyo3(signature = (lambda_=None, gamma=None, gamma1=None, gamma2=None, iterations=None, seed=None, noise=None))]
    fn new(
        lambda_: Option<f64>,
        gamma: Option<f64>,
        gamma1: Option<f64>,
        gamma2: Option<f64>,
        iterations: Option<usize>,
        seed: Option<u64>,
        noise: Option<PyNoiseModel>,
    ) -> Self {
        let d = tvrestore::SolverConfig::default();
        Self {
            lambda_: lambda_.unwrap_or(d.lambda),
            gamma: gamma.unwrap_or(d.gamma),
            gamma1: gamma1.unwrap_or(d.gamma1),
            gamma2: gamma2.unwrap_or(d.gamma2),
            iterations: iterations.unwrap_or(d.iterations),
            seed: seed.unwrap_or(d.seed),
            noise: noise.unwrap_or_else(|| d.noise_model.into()),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "SolverConfig(lambda_={}, gamma={}, gamma1={}, gamma2={}, iterations={}, seed={})",
            self.lambda_, self.gamma, self.gamma1, self.gamma2, self.iterations, self.seed
        )
    }
}

impl PySolverConfig {
    fn to_core(self, noisy: bool) -> tvrestore::SolverConfig {
        tvrestore::SolverConfig {
            lambda: self.lambda_,
            gamma: self.gamma,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            iterations: self.iterations,
            noise_enabled: noisy,
            noise_model: self.noise.into(),
            seed: self.seed,
        }
    }
}

fn config_or_default(config: Option<PySolverConfig>) -> PySolverConfig {
    config.unwrap_or_else(|| PySolverConfig::new(None, None, None, None, None, None, None))
}

/// Grayscale image with intensities in [0, 1].
#[pyclass(name = "Image", from_py_object)]
#[derive(Clone)]
struct PyImage {
    inner: ImageTensor,
}

#[pymethods]
impl PyImage {
    /// Build from a list of rows.
    #[staticmethod]
    fn from_rows(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(PyValueError::new_err("rows must all have the same length"));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Ok(Self { inner: ImageTensor::from_row_major(r, c, &flat).map_err(py_err)? })
    }

    /// Read a PGM (P5) or 8-bit grayscale PNG file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: tvrestore::load_image(path).map_err(py_err)? })
    }

    /// Write as PNG when the path ends in `.png`, otherwise PGM.
    fn save(&self, path: &str) -> PyResult<()> {
        tvrestore::save_image(&self.inner, path).map_err(py_err)
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols()
    }

    fn to_rows(&self) -> Vec<Vec<f64>> {
        let c = self.inner.cols();
        self.inner.to_row_major().chunks(c).map(|r| r.to_vec()).collect()
    }

    /// Column-major pixel vector.
    fn to_vector(&self) -> Vec<f64> {
        self.inner.as_slice().to_vec()
    }

    /// Add Gaussian noise with standard deviation `sigma`.
    #[pyo3(signature = (sigma, seed=0))]
    fn degrade(&self, sigma: f64, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: tvrestore::degrade(&self.inner, sigma, seed).map_err(py_err)? })
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.inner.rows(), self.inner.cols())
    }
}

/// `Dx` for a `rows x cols` image: vertical differences, then horizontal.
#[pyfunction]
fn difference(x: Vec<f64>, rows: usize, cols: usize) -> PyResult<Vec<f64>> {
    op(rows, cols)?.apply(&x).map_err(py_err)
}

/// `Dᵀz`.
#[pyfunction]
fn difference_adjoint(z: Vec<f64>, rows: usize, cols: usize) -> PyResult<Vec<f64>> {
    op(rows, cols)?.apply_t(&z).map_err(py_err)
}

#[pyfunction]
fn total_variation(x: Vec<f64>, rows: usize, cols: usize) -> PyResult<f64> {
    op(rows, cols)?.tv_seminorm(&x).map_err(py_err)
}

/// Group soft-thresholding of a stacked `(vertical, horizontal)` vector.
#[pyfunction]
fn prox_group_l12(z: Vec<f64>, tau: f64) -> PyResult<Vec<f64>> {
    let g = tvrestore::GroupedVector::new(z).map_err(py_err)?;
    Ok(tvrestore::prox_group_l12(&g, tau).map_err(py_err)?.into_inner())
}

/// PSNR in dB; identical inputs give `inf`.
#[pyfunction]
#[pyo3(signature = (reference, test, peak=1.0))]
fn psnr(reference: Vec<f64>, test: Vec<f64>, peak: f64) -> PyResult<f64> {
    Ok(match tvrestore::psnr(&reference, &test, peak).map_err(py_err)? {
        Psnr::Exact => f64::INFINITY,
        Psnr::Db(v) => v,
    })
}

/// SSIM of two column-major images: 11x11 Gaussian windows (sigma 1.5), or
/// one global window when the image is smaller than that.
#[pyfunction]
fn ssim(reference: Vec<f64>, test: Vec<f64>, rows: usize, cols: usize) -> PyResult<f64> {
    let shape = GridShape::new(rows, cols).map_err(py_err)?;
    let params = tvrestore::SsimParams::default();
    let mode = if rows.min(cols) < params.window { SsimMode::Global } else { SsimMode::Windowed };
    tvrestore::metrics::ssim_with_mode(&reference, &test, shape, &params, mode).map_err(py_err)
}

/// Restore one `rows x cols` observation with `A = I`. Returns the estimate
/// and the objective after each iteration.
#[pyfunction]
#[pyo3(signature = (y, rows, cols, algorithm="admm", noisy=false, config=None))]
fn solve(
    y: Vec<f64>,
    rows: usize,
    cols: usize,
    algorithm: &str,
    noisy: bool,
    config: Option<PySolverConfig>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let m = method(algorithm, noisy)?;
    let cfg = config_or_default(config).to_core(noisy);
    let a = Observation::Identity;
    let problem = TvProblem::new(&y, &a, op(rows, cols)?).map_err(py_err)?;
    let out = tvrestore::solve(m, &problem, &cfg, None).map_err(py_err)?;
    Ok((out.x, out.trace.objective))
}

/// Patch-wise restoration of a whole image.
#[pyfunction]
#[pyo3(signature = (observed, algorithm="admm", noisy=false, config=None, patch=16))]
fn restore_image(
    py: Python<'_>,
    observed: PyImage,
    algorithm: &str,
    noisy: bool,
    config: Option<PySolverConfig>,
    patch: usize,
) -> PyResult<PyImage> {
    let m = method(algorithm, noisy)?;
    let cfg = config_or_default(config).to_core(noisy);
    let out = py
        .detach(|| tvrestore::restore_image(&observed.inner, m, &cfg, patch, None))
        .map_err(py_err)?;
    Ok(PyImage { inner: out.image })
}

/// Mean per-patch PSNR (exact patches left out) and SSIM.
#[pyfunction]
#[pyo3(signature = (reference, test, patch=16))]
fn evaluate(reference: PyImage, test: PyImage, patch: usize) -> PyResult<(Option<f64>, f64)> {
    let mode = if patch >= 11 { tvrestore::SsimMode::Windowed } else { tvrestore::SsimMode::Global };
    let r = evaluate_patches(&reference.inner, &test.inner, patch, mode).map_err(py_err)?;
    Ok((r.mean_psnr, r.mean_ssim))
}

#[pymodule]
fn pytvrestore(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNoiseModel>()?;
    m.add_class::<PySolverConfig>()?;
    m.add_class::<PyImage>()?;
    m.add_function(wrap_pyfunction!(difference, m)?)?;
    m.add_function(wrap_pyfunction!(difference_adjoint, m)?)?;
    m.add_function(wrap_pyfunction!(total_variation, m)?)?;
    m.add_function(wrap_pyfunction!(prox_group_l12, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(restore_image, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
