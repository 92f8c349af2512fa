//! ADMM and primal-dual splitting for TV-regularized restoration
//!
//! ```text
//! minimize_x  ½‖Ax − y‖² + λ‖Dx‖₁,₂
//! ```
//!
//! plus variants that inject optical-amplifier noise at the points where an
//! analog optical implementation amplifies a signal.
//!
//! Each algorithm is a single loop; the noisy variant passes an
//! [`AmplifierNoise`] source and the noiseless one passes none, so a noise
//! source with zero variance reproduces the noiseless iterates bit for bit.
//!
//! Noise draws per iteration happen in a fixed order so that a seed pins the
//! whole trajectory:
//!
//! * ADMM: `n²⁵⁶` (2N), then the `1/γ` multiply noise (N) when `1/γ > 1`.
//! * PDS: `n³²` (N), `n¹⁶` (2N), `n²` (N), `n²⁵⁶` (2N), then the `γ₁` multiply
//!   noise (N) when `γ₁ > 1` and the `γ₂` multiply noise (2N) when `γ₂ > 1`.

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::metrics::{psnr, ssim_with_mode, Psnr, SsimMode, SsimParams};
use crate::operators::{mixed_l12_norm, AdmmLinearSolver, DifferenceOperator, Observation};
use crate::optics::{fill_gaussian, gain_for_scalar_multiply, AmplifierNoiseModel};
use crate::prox::{conjugate_shrink_groups, shrink_groups};

/// Amplifier gain in front of the ADMM prox input and at the PDS dual sum.
pub const GAIN_PROX_INPUT: f64 = 256.0;
/// Amplifier gain on the PDS primal feedback `x_t`.
pub const GAIN_PDS_PRIMAL: f64 = 32.0;
/// Amplifier gain on the PDS dual feedback `v_t`.
pub const GAIN_PDS_DUAL: f64 = 16.0;
/// Amplifier gain on the PDS extrapolation term `2x_{t+1}`.
pub const GAIN_PDS_EXTRAPOLATION: f64 = 2.0;

/// Upper bound on `‖D‖²` for the stacked circulant difference operator.
const DIFF_NORM_SQ_BOUND: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Admm,
    Pds,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Admm => "admm",
            Algorithm::Pds => "pds",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "admm" => Ok(Algorithm::Admm),
            "pds" => Ok(Algorithm::Pds),
            other => Err(Error::Config(format!("unknown algorithm `{other}` (expected admm or pds)"))),
        }
    }
}

/// Parameters for all four solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Regularization weight λ.
    pub lambda: f64,
    /// ADMM step γ.
    pub gamma: f64,
    /// PDS primal step γ₁.
    pub gamma1: f64,
    /// PDS dual step γ₂.
    pub gamma2: f64,
    /// Fixed iteration count K.
    pub iterations: usize,
    pub noise_enabled: bool,
    pub noise_model: AmplifierNoiseModel,
    /// Seed of the amplifier-noise stream.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.03,
            gamma: 10.0,
            gamma1: 0.1,
            gamma2: 1.0,
            iterations: 50,
            noise_enabled: false,
            noise_model: AmplifierNoiseModel::default(),
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        self.noise_model.validate()
    }
}

/// Iterates of either algorithm. For ADMM `z` is the split variable and `v`
/// the scaled dual; for PDS `z` is the pre-projection dual point.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub v: Vec<f64>,
    pub t: usize,
}

impl SolverState {
    /// ADMM start `z₀ = 0, v₀ = 0`; `x` is only a placeholder until the
    /// first update.
    pub fn admm_default(problem: &TvProblem<'_>) -> Self {
        let n = problem.op.dim();
        Self { x: problem.backprojected(), z: vec![0.0; 2 * n], v: vec![0.0; 2 * n], t: 0 }
    }

    /// PDS start `x₀ = y` (`Aᵀy` when `A` is not square), `v₀ = 0`.
    pub fn pds_default(problem: &TvProblem<'_>) -> Self {
        Self::admm_default(problem)
    }

    fn check(&self, n: usize) -> Result<()> {
        check_len(n, self.x.len())?;
        check_len(2 * n, self.z.len())?;
        check_len(2 * n, self.v.len())
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverTrace {
    /// TV objective after each iteration.
    pub objective: Vec<f64>,
    /// PSNR against the reference after each iteration, when one was given.
    pub psnr: Option<Vec<Psnr>>,
    pub ssim: Option<Vec<f64>>,
}

impl SolverTrace {
    pub fn len(&self) -> usize {
        self.objective.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objective.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SolverOutput {
    pub x: Vec<f64>,
    pub state: SolverState,
    pub trace: SolverTrace,
}

/// Ground truth for per-iteration quality tracking.
#[derive(Debug, Clone, Copy)]
pub struct TraceReference<'a> {
    pub image: &'a [f64],
    pub ssim: SsimParams,
    pub mode: SsimMode,
}

impl<'a> TraceReference<'a> {
    pub fn new(image: &'a [f64]) -> Self {
        Self { image, ssim: SsimParams::default(), mode: SsimMode::Windowed }
    }
}

/// Data of one TV restoration problem.
#[derive(Debug, Clone, Copy)]
pub struct TvProblem<'a> {
    pub y: &'a [f64],
    pub a: &'a Observation,
    pub op: DifferenceOperator,
}

impl<'a> TvProblem<'a> {
    pub fn new(y: &'a [f64], a: &'a Observation, op: DifferenceOperator) -> Result<Self> {
        a.check_dims(op.dim(), y.len())?;
        Ok(Self { y, a, op })
    }

    fn backprojected(&self) -> Vec<f64> {
        self.a.apply_t(self.y, self.op.dim())
    }

    /// `½‖Ax − y‖² + λ·TV(x)`.
    pub fn objective(&self, x: &[f64], lambda: f64) -> Result<f64> {
        check_len(self.op.dim(), x.len())?;
        let mut ax = vec![0.0; self.y.len()];
        let mut dx = vec![0.0; 2 * self.op.dim()];
        Ok(self.objective_with(x, lambda, &mut ax, &mut dx))
    }

    fn objective_with(&self, x: &[f64], lambda: f64, ax: &mut [f64], dx: &mut [f64]) -> f64 {
        self.a.apply_into(x, ax);
        let data: f64 = ax.iter().zip(self.y).map(|(a, b)| (a - b) * (a - b)).sum();
        self.op.apply_into(x, dx);
        0.5 * data + lambda * mixed_l12_norm(dx)
    }
}

/// `½‖Ax − y‖² + λ·TV(x)`.
pub fn objective(x: &[f64], y: &[f64], a: &Observation, op: &DifferenceOperator, lambda: f64) -> Result<f64> {
    TvProblem::new(y, a, *op)?.objective(x, lambda)
}

/// Seeded source of amplifier noise for one solver run.
#[derive(Debug, Clone)]
pub struct AmplifierNoise {
    model: AmplifierNoiseModel,
    rng: ChaCha8Rng,
}

impl AmplifierNoise {
    pub fn new(model: AmplifierNoiseModel, seed: u64) -> Result<Self> {
        model.validate()?;
        Ok(Self { model, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    /// Fill `buf` with noise of an amplifier with power gain `gain`.
    fn draw(&mut self, gain: f64, buf: &mut [f64]) -> Result<()> {
        let std = self.model.sim_noise_std(gain)?;
        fill_gaussian(buf, std, &mut self.rng, false);
        Ok(())
    }

    /// Draw the multiply noise for amplitude scale `c`, if the multiplication
    /// needs amplification. Returns whether `buf` was filled.
    fn draw_scaling(&mut self, c: f64, buf: &mut [f64]) -> Result<bool> {
        match gain_for_scalar_multiply(c)? {
            Some(gain) => {
                self.draw(gain, buf)?;
                Ok(true)
            }
            None => Ok(false),
        }
    }
}

fn add_assign(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
}

struct Tracer<'a, 'p> {
    problem: &'p TvProblem<'p>,
    lambda: f64,
    reference: Option<TraceReference<'a>>,
    trace: SolverTrace,
    ax: Vec<f64>,
    dx: Vec<f64>,
}

impl<'a, 'p> Tracer<'a, 'p> {
    fn new(problem: &'p TvProblem<'p>, lambda: f64, k: usize, reference: Option<TraceReference<'a>>) -> Result<Self> {
        if let Some(r) = &reference {
            check_len(problem.op.dim(), r.image.len())?;
        }
        let trace = SolverTrace {
            objective: Vec::with_capacity(k),
            psnr: reference.map(|_| Vec::with_capacity(k)),
            ssim: reference.map(|_| Vec::with_capacity(k)),
        };
        Ok(Self {
            problem,
            lambda,
            reference,
            trace,
            ax: vec![0.0; problem.y.len()],
            dx: vec![0.0; 2 * problem.op.dim()],
        })
    }

    fn record(&mut self, x: &[f64]) -> Result<()> {
        let obj = self.problem.objective_with(x, self.lambda, &mut self.ax, &mut self.dx);
        self.trace.objective.push(obj);
        if let Some(r) = &self.reference {
            let p = psnr(r.image, x, 1.0)?;
            let s = ssim_with_mode(r.image, x, self.problem.op.shape(), &r.ssim, r.mode)?;
            self.trace.psnr.as_mut().expect("allocated with reference").push(p);
            self.trace.ssim.as_mut().expect("allocated with reference").push(s);
        }
        Ok(())
    }
}

fn check_noise_flag(cfg: &SolverConfig, noisy: bool) -> Result<()> {
    if cfg.noise_enabled != noisy {
        let want = if noisy { "enabled" } else { "disabled" };
        return Err(Error::Config(format!("this solver requires noise to be {want}")));
    }
    Ok(())
}

/// Noiseless ADMM. The ADMM system is factorized here; use
/// [`admm_tv_prefactored`] to share one factorization across many problems.
pub fn admm_tv(
    problem: &TvProblem<'_>,
    cfg: &SolverConfig,
    init: Option<SolverState>,
    reference: Option<TraceReference<'_>>,
) -> Result<SolverOutput> {
    check_noise_flag(cfg, false)?;
    cfg.validate()?;
    let solver = AdmmLinearSolver::new(problem.a, &problem.op, cfg.gamma)?;
    run_admm(problem, cfg, &solver, init, reference, None)
}

/// ADMM with amplifier noise on the prox input and on the `1/γ` scaling.
pub fn admm_tv_noisy(
    problem: &TvProblem<'_>,
    cfg: &SolverConfig,
    init: Option<SolverState>,
    reference: Option<TraceReference<'_>>,
) -> Result<SolverOutput> {
    check_noise_flag(cfg, true)?;
    cfg.validate()?;
    let solver = AdmmLinearSolver::new(problem.a, &problem.op, cfg.gamma)?;
    let mut noise = AmplifierNoise::new(cfg.noise_model, cfg.seed)?;
    run_admm(problem, cfg, &solver, init, reference, Some(&mut noise))
}

/// ADMM (noiseless or noisy, per `cfg.noise_enabled`) with a factorization
/// built for the same `A`, `D` and `γ`.
pub fn admm_tv_prefactored(
    problem: &TvProblem<'_>,
    cfg: &SolverConfig,
    solver: &AdmmLinearSolver,
    init: Option<SolverState>,
    reference: Option<TraceReference<'_>>,
) -> Result<SolverOutput> {
    cfg.validate()?;
    if solver.gamma() != cfg.gamma {
        return Err(Error::Config(format!(
            "factorization was built for gamma={}, config has gamma={}",
            solver.gamma(),
            cfg.gamma
        )));
    }
    if cfg.noise_enabled {
        let mut noise = AmplifierNoise::new(cfg.noise_model, cfg.seed)?;
        run_admm(problem, cfg, solver, init, reference, Some(&mut noise))
    } else {
        run_admm(problem, cfg, solver, init, reference, None)
    }
}

fn run_admm(
    problem: &TvProblem<'_>,
    cfg: &SolverConfig,
    solver: &AdmmLinearSolver,
    init: Option<SolverState>,
    reference: Option<TraceReference<'_>>,
    mut noise: Option<&mut AmplifierNoise>,
) -> Result<SolverOutput> {
    let n = problem.op.dim();
    check_len(n, solver.dim())?;
    let mut state = init.unwrap_or_else(|| SolverState::admm_default(problem));
    state.check(n)?;
    let op = &problem.op;
    let inv_gamma = 1.0 / cfg.gamma;
    let threshold = cfg.gamma * cfg.lambda;
    let aty = problem.backprojected();

    let mut tracer = Tracer::new(problem, cfg.lambda, cfg.iterations, reference)?;
    let mut diff = vec![0.0; 2 * n];
    let mut dt = vec![0.0; n];
    let mut dx = vec![0.0; 2 * n];
    let mut n_prox = vec![0.0; 2 * n];
    let mut n_scale = vec![0.0; n];

    for _ in 0..cfg.iterations {
        let mut scale_noisy = false;
        if let Some(src) = noise.as_deref_mut() {
            src.draw(GAIN_PROX_INPUT, &mut n_prox)?;
            scale_noisy = src.draw_scaling(inv_gamma, &mut n_scale)?;
        }

        // x ← (AᵀA + DᵀD/γ)⁻¹ (Aᵀy + Dᵀ(z − v)/γ)
        for ((d, z), v) in diff.iter_mut().zip(&state.z).zip(&state.v) {
            *d = z - v;
        }
        op.apply_t_into(&diff, &mut dt);
        dt.iter_mut().for_each(|s| *s *= inv_gamma);
        if scale_noisy {
            add_assign(&mut dt, &n_scale);
        }
        for ((x, a), s) in state.x.iter_mut().zip(&aty).zip(&dt) {
            *x = a + s;
        }
        solver.solve_in_place(&mut state.x);

        // z ← prox_{γλ‖·‖₁,₂}(Dx + v [+ n²⁵⁶])
        op.apply_into(&state.x, &mut dx);
        for ((z, d), v) in state.z.iter_mut().zip(&dx).zip(&state.v) {
            *z = d + v;
        }
        if noise.is_some() {
            add_assign(&mut state.z, &n_prox);
            // the amplified signal Dx + n²⁵⁶ also feeds the dual update
            add_assign(&mut dx, &n_prox);
        }
        shrink_groups(&mut state.z, threshold);

        // v ← v + Dx [+ n²⁵⁶] − z
        for ((v, d), z) in state.v.iter_mut().zip(&dx).zip(&state.z) {
            *v = *v + d - z;
        }
        state.t += 1;
        tracer.record(&state.x)?;
    }
    Ok(SolverOutput { x: state.x.clone(), state, trace: tracer.trace })
}

/// Whether `(γ₁, γ₂)` lies in the usual PDS convergence range
/// `γ₁(β/2 + γ₂‖D‖²) ≤ 1`, with `‖D‖² ≤ 8` and `β = ‖AᵀA‖`.
pub fn pds_steps_admissible(gamma1: f64, gamma2: f64, beta: f64) -> bool {
    gamma1 * (beta / 2.0 + gamma2 * DIFF_NORM_SQ_BOUND) <= 1.0
}

fn warn_pds_steps(problem: &TvProblem<'_>, cfg: &SolverConfig) {
    warn_pds_steps_for(cfg, problem.a.gram_norm(problem.op.dim()));
}

pub(crate) fn warn_pds_steps_for(cfg: &SolverConfig, beta: f64) {
    if !pds_steps_admissible(cfg.gamma1, cfg.gamma2, beta) {
        warn!(
            "PDS steps gamma1={} gamma2={} exceed the standard convergence bound \
             gamma1*(beta/2 + 8*gamma2) <= 1 (beta={beta}); running anyway",
            cfg.gamma1, cfg.gamma2
        );
    }
}

/// Noiseless PDS.
pub fn pds_tv(
    problem: &TvProblem<'_>,
    cfg: &SolverConfig,
    init: Option<SolverState>,
    reference: Option<TraceReference<'_>>,
) -> Result<SolverOutput> {
    check_noise_flag(cfg, false)?;
    cfg.validate()?;
    warn_pds_steps(problem, cfg);
    run_pds(problem, cfg, init, reference, None)
}

/// PDS with amplifier noise at every amplifier of the optical circuit.
pub fn pds_tv_noisy(
    problem: &TvProblem<'_>,
    cfg: &SolverConfig,
    init: Option<SolverState>,
    reference: Option<TraceReference<'_>>,
) -> Result<SolverOutput> {
    check_noise_flag(cfg, true)?;
    cfg.validate()?;
    warn_pds_steps(problem, cfg);
    let mut noise = AmplifierNoise::new(cfg.noise_model, cfg.seed)?;
    run_pds(problem, cfg, init, reference, Some(&mut noise))
}

/// PDS (noiseless or noisy, per `cfg.noise_enabled`) without the step-size
/// check, for callers that already ran it once for many problems.
pub(crate) fn pds_tv_unchecked(
    problem: &TvProblem<'_>,
    cfg: &SolverConfig,
    reference: Option<TraceReference<'_>>,
) -> Result<SolverOutput> {
    cfg.validate()?;
    if cfg.noise_enabled {
        let mut noise = AmplifierNoise::new(cfg.noise_model, cfg.seed)?;
        run_pds(problem, cfg, None, reference, Some(&mut noise))
    } else {
        run_pds(problem, cfg, None, reference, None)
    }
}

fn run_pds(
    problem: &TvProblem<'_>,
    cfg: &SolverConfig,
    init: Option<SolverState>,
    reference: Option<TraceReference<'_>>,
    mut noise: Option<&mut AmplifierNoise>,
) -> Result<SolverOutput> {
    let n = problem.op.dim();
    let m = problem.y.len();
    let mut state = init.unwrap_or_else(|| SolverState::pds_default(problem));
    state.check(n)?;
    let op = &problem.op;
    let (g1, g2) = (cfg.gamma1, cfg.gamma2);

    let mut tracer = Tracer::new(problem, cfg.lambda, cfg.iterations, reference)?;
    let mut xp = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut ax = vec![0.0; m];
    let mut grad = vec![0.0; n];
    let mut dtv = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut dw = vec![0.0; 2 * n];
    let mut n_primal = vec![0.0; n];
    let mut n_dual = vec![0.0; 2 * n];
    let mut n_extra = vec![0.0; n];
    let mut n_sum = vec![0.0; 2 * n];
    let mut n_g1 = vec![0.0; n];
    let mut n_g2 = vec![0.0; 2 * n];

    for _ in 0..cfg.iterations {
        let (mut g1_noisy, mut g2_noisy) = (false, false);
        if let Some(src) = noise.as_deref_mut() {
            src.draw(GAIN_PDS_PRIMAL, &mut n_primal)?;
            src.draw(GAIN_PDS_DUAL, &mut n_dual)?;
            src.draw(GAIN_PDS_EXTRAPOLATION, &mut n_extra)?;
            src.draw(GAIN_PROX_INPUT, &mut n_sum)?;
            g1_noisy = src.draw_scaling(g1, &mut n_g1)?;
            g2_noisy = src.draw_scaling(g2, &mut n_g2)?;
        }

        // x ← x' − γ₁(Aᵀ(Ax' − y) + Dᵀv), x' = x [+ n³²]
        xp.copy_from_slice(&state.x);
        if noise.is_some() {
            add_assign(&mut xp, &n_primal);
        }
        problem.a.apply_into(&xp, &mut ax);
        ax.iter_mut().zip(problem.y).for_each(|(a, b)| *a -= b);
        problem.a.apply_t_into(&ax, &mut grad);
        op.apply_t_into(&state.v, &mut dtv);
        for (g, d) in grad.iter_mut().zip(&dtv) {
            *g = g1 * (*g + d);
        }
        if g1_noisy {
            add_assign(&mut grad, &n_g1);
        }
        for ((xn, p), g) in x_new.iter_mut().zip(&xp).zip(&grad) {
            *xn = p - g;
        }

        // z ← v [+ n¹⁶] + γ₂D(2x_{t+1} [+ n²] − x_t) [+ n²⁵⁶]
        for (wi, xn) in w.iter_mut().zip(&x_new) {
            *wi = 2.0 * xn;
        }
        if noise.is_some() {
            add_assign(&mut w, &n_extra);
        }
        w.iter_mut().zip(&state.x).for_each(|(wi, x)| *wi -= x);
        op.apply_into(&w, &mut dw);
        dw.iter_mut().for_each(|d| *d *= g2);
        if g2_noisy {
            add_assign(&mut dw, &n_g2);
        }
        state.z.copy_from_slice(&state.v);
        if noise.is_some() {
            add_assign(&mut state.z, &n_dual);
        }
        add_assign(&mut state.z, &dw);
        if noise.is_some() {
            add_assign(&mut state.z, &n_sum);
        }

        // v ← z − prox_{λ‖·‖₁,₂}(z)
        state.v.copy_from_slice(&state.z);
        conjugate_shrink_groups(&mut state.v, cfg.lambda);

        std::mem::swap(&mut state.x, &mut x_new);
        state.t += 1;
        tracer.record(&state.x)?;
    }
    Ok(SolverOutput { x: state.x.clone(), state, trace: tracer.trace })
}

/// Which solver to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Method {
    pub algorithm: Algorithm,
    pub noisy: bool,
}

impl Method {
    pub fn new(algorithm: Algorithm, noisy: bool) -> Self {
        Self { algorithm, noisy }
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.algorithm.name(), if self.noisy { "noisy" } else { "noiseless" })
    }
}

/// Run the selected solver from its default initialization. `cfg.noise_enabled`
/// is overridden by `method.noisy`.
pub fn solve(
    method: Method,
    problem: &TvProblem<'_>,
    cfg: &SolverConfig,
    reference: Option<TraceReference<'_>>,
) -> Result<SolverOutput> {
    let cfg = SolverConfig { noise_enabled: method.noisy, ..*cfg };
    match (method.algorithm, method.noisy) {
        (Algorithm::Admm, false) => admm_tv(problem, &cfg, None, reference),
        (Algorithm::Admm, true) => admm_tv_noisy(problem, &cfg, None, reference),
        (Algorithm::Pds, false) => pds_tv(problem, &cfg, None, reference),
        (Algorithm::Pds, true) => pds_tv_noisy(problem, &cfg, None, reference),
    }
}
