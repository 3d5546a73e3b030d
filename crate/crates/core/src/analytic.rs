//! Closed-form model of the pulse-interference signal.
//!
//! With a uniformly distributed phase difference on `[0, π)` and constant
//! intensities, the integral signal `S = s1 + s2 + 2η√(s1·s2)·cos ΔΦ` follows
//! an arcsine law on `[s_min, s_max]`. This module holds that law, the
//! chirp/jitter visibility model, and the wrapped-Gaussian phase density used
//! to justify the uniform-phase assumption.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, invalid_config, Error, Result};

/// Mean intensities, visibility and phase parameters of the interferometer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalConfig {
    /// Normalized integral intensity from the short arm.
    pub s1_mean: f64,
    /// Normalized integral intensity from the long arm.
    pub s2_mean: f64,
    /// Literal visibility η. When absent it is derived from a
    /// [`ChirpJitterConfig`].
    #[serde(default)]
    pub visibility: Option<f64>,
    /// Interferometer phase offset Δθ in radians.
    #[serde(default)]
    pub delta_theta: f64,
    /// rms of the per-pulse phase diffusion σ_φ in radians.
    #[serde(default = "default_sigma_phi")]
    pub sigma_phi: f64,
    /// 1 for Mach–Zehnder, 2 for Michelson.
    #[serde(default = "default_k_factor")]
    pub k_factor: u8,
}

fn default_sigma_phi() -> f64 {
    TAU
}

fn default_k_factor() -> u8 {
    2
}

impl OpticalConfig {
    /// Symmetric interferometer with literal visibility.
    pub fn symmetric(s_mean: f64, visibility: f64) -> Self {
        Self {
            s1_mean: s_mean,
            s2_mean: s_mean,
            visibility: Some(visibility),
            delta_theta: 0.0,
            sigma_phi: default_sigma_phi(),
            k_factor: default_k_factor(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s1_mean > 0.0 && self.s1_mean.is_finite()) {
            return Err(invalid_config(format!(
                "s1_mean must be > 0, got {}",
                self.s1_mean
            )));
        }
        if !(self.s2_mean > 0.0 && self.s2_mean.is_finite()) {
            return Err(invalid_config(format!(
                "s2_mean must be > 0, got {}",
                self.s2_mean
            )));
        }
        if let Some(eta) = self.visibility {
            if !(0.0..=1.0).contains(&eta) {
                return Err(invalid_config(format!(
                    "visibility must lie in [0, 1], got {eta}"
                )));
            }
        }
        if !(self.sigma_phi >= 0.0 && self.sigma_phi.is_finite()) {
            return Err(invalid_config(format!(
                "sigma_phi must be >= 0, got {}",
                self.sigma_phi
            )));
        }
        if !self.delta_theta.is_finite() {
            return Err(invalid_config("delta_theta must be finite"));
        }
        if !matches!(self.k_factor, 1 | 2) {
            return Err(invalid_config(format!(
                "k_factor must be 1 or 2, got {}",
                self.k_factor
            )));
        }
        Ok(())
    }

    /// Static visibility: the literal value wins over a chirp/jitter model.
    pub fn resolve_visibility(&self, chirp: Option<&ChirpJitterConfig>) -> Result<f64> {
        match (self.visibility, chirp) {
            (Some(eta), Some(_)) => {
                log::warn!("both a literal visibility and a chirp/jitter model are set; using visibility = {eta}");
                Ok(eta)
            }
            (Some(eta), None) => Ok(eta),
            (None, Some(cj)) => {
                cj.validate()?;
                Ok(visibility_from_overlap(cj))
            }
            (None, None) => Err(invalid_config(
                "visibility is unset and no chirp_jitter model is given",
            )),
        }
    }
}

/// Linear-chirp pulse parameters entering the overlap visibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChirpJitterConfig {
    /// Linewidth-enhancement (Henry) factor α.
    pub alpha: f64,
    /// rms pulse width `w` in seconds.
    pub pulse_width: f64,
    /// Pulse-overlap offset Δt in seconds.
    #[serde(default)]
    pub overlap_offset: f64,
}

impl ChirpJitterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pulse_width > 0.0 && self.pulse_width.is_finite()) {
            return Err(invalid_config(format!(
                "pulse_width must be > 0, got {}",
                self.pulse_width
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid_config(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if !self.overlap_offset.is_finite() {
            return Err(invalid_config("overlap_offset must be finite"));
        }
        Ok(())
    }

    /// Visibility at an arbitrary overlap offset `dt` (seconds).
    pub fn visibility_at(&self, dt: f64) -> f64 {
        let w = self.pulse_width;
        (-(1.0 + self.alpha * self.alpha) * dt * dt / (8.0 * w * w)).exp()
    }
}

/// η = exp(−(1+α²)Δt²/(8w²)).
pub fn visibility_from_overlap(cj: &ChirpJitterConfig) -> f64 {
    cj.visibility_at(cj.overlap_offset)
}

/// Arcsine law of the interference signal on `[s_min, s_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticInterferencePdf {
    pub s_min: f64,
    pub s_max: f64,
    pub width: f64,
}

impl AnalyticInterferencePdf {
    pub fn new(s_min: f64, s_max: f64) -> Result<Self> {
        if !(s_min.is_finite() && s_max.is_finite()) || s_max < s_min {
            return Err(invalid_arg(format!(
                "need s_min <= s_max, got ({s_min}, {s_max})"
            )));
        }
        Ok(Self {
            s_min,
            s_max,
            width: s_max - s_min,
        })
    }

    /// Bounds for mean intensities `s1`, `s2` and visibility `eta`.
    pub fn from_intensities(s1: f64, s2: f64, eta: f64) -> Result<Self> {
        if !(s1 > 0.0 && s2 > 0.0 && s1.is_finite() && s2.is_finite()) {
            return Err(invalid_arg(format!(
                "intensities must be positive, got ({s1}, {s2})"
            )));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(invalid_arg(format!(
                "visibility must lie in [0, 1], got {eta}"
            )));
        }
        let sum = s1 + s2;
        let amp = 2.0 * eta * (s1 * s2).sqrt();
        Ok(Self {
            s_min: sum - amp,
            s_max: sum + amp,
            width: 2.0 * amp,
        })
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.s_min + self.s_max)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.width
    }

    pub fn is_degenerate(&self) -> bool {
        self.width <= 0.0
    }

    /// Density on the open support; the endpoints are a domain error.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !(x > self.s_min && x < self.s_max) {
            return Err(Error::Domain {
                value: x,
                lo: self.s_min,
                hi: self.s_max,
            });
        }
        Ok(1.0 / (PI * ((x - self.s_min) * (self.s_max - x)).sqrt()))
    }

    /// CDF, clamped to 0 below and 1 above the support.
    pub fn cdf(&self, y: f64) -> f64 {
        if self.is_degenerate() {
            return if y < self.s_min { 0.0 } else { 1.0 };
        }
        if y <= self.s_min {
            return 0.0;
        }
        if y >= self.s_max {
            return 1.0;
        }
        let z = ((y - self.center()) / self.half_width()).clamp(-1.0, 1.0);
        0.5 + z.asin() / PI
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid_arg(format!(
                "probability must lie in (0, 1), got {p}"
            )));
        }
        Ok(self.center() + self.half_width() * (PI * (p - 0.5)).sin())
    }
}

/// Bounds of the quantum interference distribution for a configuration.
pub fn interference_bounds(
    cfg: &OpticalConfig,
    chirp: Option<&ChirpJitterConfig>,
) -> Result<AnalyticInterferencePdf> {
    cfg.validate()?;
    let eta = cfg.resolve_visibility(chirp)?;
    AnalyticInterferencePdf::from_intensities(cfg.s1_mean, cfg.s2_mean, eta)
}

pub fn quantum_pdf_eval(pdf: &AnalyticInterferencePdf, x: f64) -> Result<f64> {
    pdf.pdf(x)
}

pub fn quantum_cdf_eval(pdf: &AnalyticInterferencePdf, y: f64) -> f64 {
    pdf.cdf(y)
}

pub fn quantum_quantile(pdf: &AnalyticInterferencePdf, p: f64) -> Result<f64> {
    pdf.quantile(p)
}

/// Default number of cosine terms kept in the theta series.
pub const DEFAULT_THETA_TERMS: usize = 8;

/// `J(u, q) = 1 + 2 Σ_{j=1}^{terms} q^{j²} cos(2ju)`.
pub fn jacobi_theta(u: f64, q: f64, terms: usize) -> f64 {
    let mut sum = 0.0;
    for j in 1..=terms {
        let jf = j as f64;
        let coef = q.powf(jf * jf);
        if coef == 0.0 {
            break;
        }
        sum += coef * (2.0 * jf * u).cos();
    }
    1.0 + 2.0 * sum
}

/// Gaussian phase difference folded onto `[0, π)` by the cosine symmetries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrappedPhasePdf {
    /// σ_ΔΦ = σ_φ·√2.
    pub sigma_dphi: f64,
    pub delta_theta: f64,
    /// Number of cosine terms of the theta series (the constant term is
    /// always kept).
    pub truncation_terms: usize,
}

impl WrappedPhasePdf {
    pub fn new(sigma_dphi: f64, delta_theta: f64, truncation_terms: usize) -> Result<Self> {
        if !(sigma_dphi >= 0.0) {
            return Err(invalid_arg(format!(
                "sigma_dphi must be >= 0, got {sigma_dphi}"
            )));
        }
        if truncation_terms == 0 {
            return Err(invalid_arg("truncation_terms must be >= 1"));
        }
        Ok(Self {
            sigma_dphi,
            delta_theta,
            truncation_terms,
        })
    }

    pub fn from_optical(cfg: &OpticalConfig) -> Result<Self> {
        Self::new(
            cfg.sigma_phi * std::f64::consts::SQRT_2,
            cfg.delta_theta,
            DEFAULT_THETA_TERMS,
        )
    }

    pub fn nome(&self) -> f64 {
        (-0.5 * self.sigma_dphi * self.sigma_dphi).exp()
    }

    pub fn eval(&self, x: f64) -> f64 {
        if !(0.0..PI).contains(&x) {
            return 0.0;
        }
        let q = self.nome();
        let half = 0.5 * self.delta_theta;
        (jacobi_theta(0.5 * x - half, q, self.truncation_terms)
            + jacobi_theta(0.5 * x + half, q, self.truncation_terms))
            / TAU
    }
}

pub fn wrapped_phase_pdf_eval(wp: &WrappedPhasePdf, x: f64) -> f64 {
    wp.eval(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformityMargin {
    pub sigma_dphi: f64,
    /// Leading deviation `2q` of the theta function from unity.
    pub two_q: f64,
    /// Whether σ_φ·√2 > 2π.
    pub uniform: bool,
}

pub fn uniformity_margin(sigma_phi: f64) -> Result<UniformityMargin> {
    if !(sigma_phi >= 0.0) {
        return Err(invalid_arg(format!(
            "sigma_phi must be >= 0, got {sigma_phi}"
        )));
    }
    let sigma_dphi = sigma_phi * std::f64::consts::SQRT_2;
    Ok(UniformityMargin {
        sigma_dphi,
        two_q: 2.0 * (-0.5 * sigma_dphi * sigma_dphi).exp(),
        uniform: sigma_dphi > TAU,
    })
}
