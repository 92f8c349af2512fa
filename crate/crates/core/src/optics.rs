//! Optical analog components and the amplifier noise model.
//!
//! Beam splitters, signal splitters and adder/subtractor pairs act on complex
//! field amplitudes. Every amplifier stage adds amplified spontaneous emission
//! (ASE) noise whose power grows linearly with the power gain, which is what
//! the noisy solvers inject into their iterates.

use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planck constant in J·s (exact SI value).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Published added-noise powers (W) for an EDFA at the default operating point,
/// as `(power gain, added noise power)`. Used as a regression target.
pub const REFERENCE_NOISE_POWERS: [(f64, f64); 6] = [
    (8.0, 1.79e-8),
    (16.0, 3.84e-8),
    (32.0, 7.94e-8),
    (64.0, 1.61e-7),
    (128.0, 3.25e-7),
    (256.0, 6.53e-7),
];

/// Complex field amplitude of an optical signal.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexAmplitude {
    pub re: f64,
    pub im: f64,
}

impl ComplexAmplitude {
    pub const ZERO: Self = Self { re: 0.0, im: 0.0 };

    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub const fn real(re: f64) -> Self {
        Self { re, im: 0.0 }
    }

    /// Optical power, `|a|²`.
    pub fn power(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    /// Multiply by the unit phasor `e^{jθ}`.
    pub fn phase_shift(self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            re: self.re * c - self.im * s,
            im: self.re * s + self.im * c,
        }
    }
}

impl Add for ComplexAmplitude {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for ComplexAmplitude {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl Neg for ComplexAmplitude {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.im)
    }
}

impl Mul<f64> for ComplexAmplitude {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self::new(self.re * rhs, self.im * rhs)
    }
}

/// Adder/subtractor built from a beam splitter with compensating phase shifts.
///
/// Returns `((a + b)/√2, (a − b)/√2)`.
pub fn beam_splitter_combine(a: ComplexAmplitude, b: ComplexAmplitude) -> (ComplexAmplitude, ComplexAmplitude) {
    ((a + b) * FRAC_1_SQRT_2, (a - b) * FRAC_1_SQRT_2)
}

/// Signal splitter: a beam splitter fed on one port, with the cross-port
/// quadrature phase compensated so both copies are `a/√2`.
pub fn signal_splitter(a: ComplexAmplitude) -> (ComplexAmplitude, ComplexAmplitude) {
    let o = a * FRAC_1_SQRT_2;
    (o, o)
}

/// ASE noise model of an erbium-doped fiber amplifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmplifierNoiseModel {
    /// Noise figure F (dimensionless, ≥ 1).
    pub noise_figure: f64,
    /// Optical carrier frequency μ in Hz.
    pub frequency: f64,
    /// Signal bandwidth B in Hz.
    pub bandwidth: f64,
    /// Planck constant h in J·s.
    pub planck: f64,
    /// Variance multiplier mapping physical noise power into signal units.
    pub sim_scale: f64,
}

impl Default for AmplifierNoiseModel {
    fn default() -> Self {
        Self {
            noise_figure: 2.0,
            frequency: 1.94e14,
            bandwidth: 1e10,
            planck: PLANCK,
            sim_scale: 1000.0,
        }
    }
}

impl AmplifierNoiseModel {
    /// Same model with a different simulation scale. A scale of zero disables
    /// the noise entirely.
    pub fn with_sim_scale(mut self, sim_scale: f64) -> Self {
        self.sim_scale = sim_scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.noise_figure, self.frequency, self.bandwidth, self.planck, self.sim_scale]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("noise model parameters must be finite".into()));
        }
        if self.noise_figure < 1.0 {
            return Err(Error::Domain(format!("noise figure must be >= 1, got {}", self.noise_figure)));
        }
        if self.frequency <= 0.0 {
            return Err(Error::Domain(format!("frequency must be > 0, got {}", self.frequency)));
        }
        if self.bandwidth <= 0.0 {
            return Err(Error::Domain(format!("bandwidth must be > 0, got {}", self.bandwidth)));
        }
        if self.planck <= 0.0 {
            return Err(Error::Domain(format!("planck constant must be > 0, got {}", self.planck)));
        }
        if self.sim_scale < 0.0 {
            return Err(Error::Domain(format!("sim_scale must be >= 0, got {}", self.sim_scale)));
        }
        Ok(())
    }

    /// Added noise power per unit of `(G − 1)`, i.e. `F·h·μ·B` in watts.
    pub fn power_slope(&self) -> f64 {
        self.noise_figure * self.planck * self.frequency * self.bandwidth
    }

    /// ASE noise power in watts added by an amplifier with power gain `gain`.
    pub fn ase_noise_power(&self, gain: f64) -> Result<f64> {
        self.validate()?;
        check_gain(gain)?;
        Ok((gain - 1.0) * self.power_slope())
    }

    /// Standard deviation of the additive noise in signal units.
    pub fn sim_noise_std(&self, gain: f64) -> Result<f64> {
        Ok((self.sim_scale * self.ase_noise_power(gain)?).sqrt())
    }

    /// Draw `n` i.i.d. zero-mean Gaussian samples with standard deviation
    /// [`sim_noise_std`](Self::sim_noise_std). A zero deviation yields exact
    /// zeros and leaves `rng` untouched.
    pub fn sample_noise_vector<R: Rng + ?Sized>(&self, gain: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::Domain("noise vector length must be >= 1".into()));
        }
        let std = self.sim_noise_std(gain)?;
        let mut out = vec![0.0; n];
        fill_gaussian(&mut out, std, rng, false);
        Ok(out)
    }
}

fn check_gain(gain: f64) -> Result<()> {
    if gain.is_nan() || gain < 1.0 {
        return Err(Error::Domain(format!(
            "amplifier power gain must be >= 1, got {gain}"
        )));
    }
    Ok(())
}

/// Overwrite (or accumulate into) `buf` with N(0, std²) samples.
pub(crate) fn fill_gaussian<R: Rng + ?Sized>(buf: &mut [f64], std: f64, rng: &mut R, accumulate: bool) {
    if std == 0.0 {
        if !accumulate {
            buf.iter_mut().for_each(|v| *v = 0.0);
        }
        return;
    }
    let normal = Normal::new(0.0, std).expect("std is finite and positive");
    for v in buf.iter_mut() {
        let s = normal.sample(rng);
        if accumulate {
            *v += s;
        } else {
            *v = s;
        }
    }
}

/// Power gain of the amplifier needed to multiply a signal amplitude by `c`.
///
/// Attenuation (`c ≤ 1`) needs no amplifier and returns `None`; otherwise the
/// power gain is `c²`.
pub fn gain_for_scalar_multiply(c: f64) -> Result<Option<f64>> {
    if c.is_nan() || c <= 0.0 {
        return Err(Error::Domain(format!("scale factor must be > 0, got {c}")));
    }
    Ok(if c <= 1.0 { None } else { Some(c * c) })
}
