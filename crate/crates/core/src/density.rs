//! Probability mass over intervals, shared by analytic, smeared and
//! empirical distributions.

use std::f64::consts::PI;

use crate::analytic::AnalyticInterferencePdf;
use crate::error::{invalid_arg, Result};
use crate::quad::{adaptive_simpson, normal_cdf};

pub trait Density {
    /// P(S ≤ x).
    fn cdf(&self, x: f64) -> f64;

    /// Finite interval carrying (numerically) all of the mass.
    fn support(&self) -> (f64, f64);

    /// Mass on `[a, b]`.
    fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        (self.cdf(b) - self.cdf(a)).max(0.0)
    }
}

impl Density for AnalyticInterferencePdf {
    fn cdf(&self, x: f64) -> f64 {
        AnalyticInterferencePdf::cdf(self, x)
    }

    fn support(&self) -> (f64, f64) {
        (self.s_min, self.s_max)
    }
}

/// Arcsine law convolved with zero-mean Gaussian detector noise.
#[derive(Debug, Clone, Copy)]
pub struct SmearedInterferencePdf {
    pub quantum: AnalyticInterferencePdf,
    pub sigma_zeta: f64,
}

const SMEAR_TOL: f64 = 1e-13;

impl SmearedInterferencePdf {
    pub fn new(quantum: AnalyticInterferencePdf, sigma_zeta: f64) -> Result<Self> {
        if !(sigma_zeta >= 0.0 && sigma_zeta.is_finite()) {
            return Err(invalid_arg(format!(
                "sigma_zeta must be >= 0, got {sigma_zeta}"
            )));
        }
        Ok(Self {
            quantum,
            sigma_zeta,
        })
    }

    /// Density of the smeared signal; requires `sigma_zeta > 0`.
    pub fn pdf(&self, x: f64) -> f64 {
        let (a, b, s) = (
            self.quantum.center(),
            self.quantum.half_width(),
            self.sigma_zeta,
        );
        let phi = |t: f64| {
            let z = (x - a - b * t.cos()) / s;
            (-0.5 * z * z).exp() / (s * (2.0 * PI).sqrt())
        };
        adaptive_simpson(&phi, 0.0, PI, SMEAR_TOL, 48) / PI
    }
}

impl Density for SmearedInterferencePdf {
    fn cdf(&self, x: f64) -> f64 {
        if self.sigma_zeta == 0.0 {
            return self.quantum.cdf(x);
        }
        let (a, b, s) = (
            self.quantum.center(),
            self.quantum.half_width(),
            self.sigma_zeta,
        );
        let f = |t: f64| normal_cdf((x - a - b * t.cos()) / s);
        (adaptive_simpson(&f, 0.0, PI, SMEAR_TOL, 48) / PI).clamp(0.0, 1.0)
    }

    fn support(&self) -> (f64, f64) {
        let pad = 40.0 * self.sigma_zeta;
        (self.quantum.s_min - pad, self.quantum.s_max + pad)
    }
}

/// Empirical distribution of raw samples; every query is a linear scan.
#[derive(Debug, Clone, Copy)]
pub struct SampleMass<'a> {
    values: &'a [f64],
}

impl<'a> SampleMass<'a> {
    pub fn new(values: &'a [f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid_arg("empty sample set"));
        }
        Ok(Self { values })
    }
}

impl Density for SampleMass<'_> {
    fn cdf(&self, x: f64) -> f64 {
        self.values.iter().filter(|&&v| v <= x).count() as f64 / self.values.len() as f64
    }

    fn support(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    fn mass(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return 0.0;
        }
        let inside = self.values.iter().filter(|&&v| v >= a && v <= b).count();
        inside as f64 / self.values.len() as f64
    }
}
