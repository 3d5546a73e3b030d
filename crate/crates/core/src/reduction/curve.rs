//! The calibration curve Γ(B) built by simulating the signal over a grid of
//! detector-noise widths.

use serde::{Deserialize, Serialize};

use super::{broadening_factor, gamma_comparator, min_entropy_comparator, Extended, LowerLimit};
use crate::analytic::{interference_bounds, ChirpJitterConfig, OpticalConfig};
use crate::density::SampleMass;
use crate::error::{invalid_arg, invalid_config, Error, Result};
use crate::montecarlo::{estimate_pdf, NoiseConfig, SignalModel};
use crate::rng::Domain;

/// Everything that determines a [`GammaCurve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    pub optical: OpticalConfig,
    /// Fixes the pulse-amplitude noise; its `sigma_zeta` is replaced by the grid.
    pub base_noise: NoiseConfig,
    #[serde(default)]
    pub chirp_jitter: Option<ChirpJitterConfig>,
    pub sigma_zeta_grid: Vec<f64>,
    pub sample_count: usize,
    pub bins: usize,
    pub density_floor: f64,
    pub seed: u64,
    #[serde(default)]
    pub lower_limit: LowerLimit,
}

impl CurveConfig {
    /// Symmetric pulses with rms amplitude noise 0.05, η = 0.95 and σ_ζ from
    /// 0 to 0.25 in steps of 0.0125, 10⁷ samples in 256 bins per point.
    pub fn calibration(seed: u64) -> Self {
        Self {
            optical: OpticalConfig::symmetric(1.0, 0.95),
            base_noise: NoiseConfig::gaussian(0.05, 0.0),
            chirp_jitter: None,
            sigma_zeta_grid: default_sigma_zeta_grid(),
            sample_count: 10_000_000,
            bins: crate::montecarlo::DEFAULT_BINS,
            density_floor: super::DEFAULT_DENSITY_FLOOR,
            seed,
            lower_limit: LowerLimit::SupportMin,
        }
    }
}

/// 0, 0.0125, …, 0.25.
pub fn default_sigma_zeta_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 * 0.0125).collect()
}

/// Raw measurements at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub sigma_zeta: f64,
    pub h_inf: Extended,
    pub gamma: Extended,
    pub b: Option<f64>,
    pub width_w: Option<f64>,
    pub peak_left: Option<f64>,
    pub peak_right: Option<f64>,
}

/// Monotone Γ(B) relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaCurve {
    /// `(B, Γ)` with B strictly increasing and Γ non-decreasing.
    pub points: Vec<(f64, f64)>,
    pub generation_config: CurveConfig,
    pub density_floor: f64,
    /// Per-grid-point measurements before the monotone repair.
    pub raw: Vec<CurvePoint>,
    /// Whether the isotonic repair changed any raw pair.
    pub repaired: bool,
    /// First σ_ζ at which Γ became infinite or B could not be measured.
    pub truncated_at: Option<f64>,
    pub notes: Vec<String>,
}

impl GammaCurve {
    /// Build a curve from raw `(B, Γ)` pairs listed in grid order.
    pub fn from_pairs(pairs: &[(f64, f64)], generation_config: CurveConfig) -> Result<Self> {
        if pairs.is_empty() {
            return Err(invalid_arg("a Γ(B) curve needs at least one point"));
        }
        let (points, repaired) = monotone_repair(pairs);
        Ok(Self {
            points,
            density_floor: generation_config.density_floor,
            generation_config,
            raw: Vec::new(),
            repaired,
            truncated_at: None,
            notes: Vec::new(),
        })
    }

    pub fn b_range(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// CSV with columns `b,gamma`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("b,gamma\n");
        for (b, g) in &self.points {
            out.push_str(&format!("{b},{g}\n"));
        }
        out
    }
}

/// Pool-adjacent-violators fit of a non-decreasing sequence (unit weights).
pub fn isotonic(values: &[f64]) -> Vec<f64> {
    // (sum, count) blocks
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s2, n2) = blocks[blocks.len() - 1];
            let (s1, n1) = blocks[blocks.len() - 2];
            if s1 / n1 as f64 <= s2 / n2 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().expect("two blocks") = (s1 + s2, n1 + n2);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(s, n)| std::iter::repeat_n(s / n as f64, n))
        .collect()
}

/// Isotonic fit of B and Γ separately, then merge points sharing a B by
/// averaging their Γ. Returns the repaired points and whether anything moved.
fn monotone_repair(pairs: &[(f64, f64)]) -> (Vec<(f64, f64)>, bool) {
    let bs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let gs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (fb, fg) = (isotonic(&bs), isotonic(&gs));
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    let mut merged = false;
    while i < fb.len() {
        let mut j = i + 1;
        while j < fb.len() && fb[j] == fb[i] {
            j += 1;
        }
        if j - i > 1 {
            merged = true;
        }
        let g = fg[i..j].iter().sum::<f64>() / (j - i) as f64;
        out.push((fb[i], g));
        i = j;
    }
    let changed = merged || fb != bs || fg != gs;
    (out, changed)
}

/// Simulate the signal at every σ_ζ of the grid and pair the measured B with
/// Γ from the comparator min-entropy. H∞ is counted on the raw samples; B is
/// read from the histogram with the configured binning.
///
/// All grid points reuse the same random numbers (common random numbers):
/// the detector-noise-free signal and the unit detector-noise draws are
/// generated once and combined as `clean + σ_ζ·z`, which is bit-identical to
/// sampling each point separately with the same seed.
pub fn build_gamma_curve(cfg: &CurveConfig) -> Result<GammaCurve> {
    let grid = &cfg.sigma_zeta_grid;
    if grid.is_empty() {
        return Err(invalid_config("sigma_zeta_grid is empty"));
    }
    if grid.iter().any(|s| !(*s >= 0.0 && s.is_finite())) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid_config(
            "sigma_zeta_grid must be non-negative and strictly increasing",
        ));
    }
    if cfg.sample_count == 0 {
        return Err(invalid_config("sample_count must be >= 1"));
    }
    let quantum = interference_bounds(&cfg.optical, cfg.chirp_jitter.as_ref())?;
    let model = SignalModel::new(&cfg.optical, &cfg.base_noise, cfg.chirp_jitter.as_ref())?;
    let (clean, z, _) = model.generate_parts(cfg.seed, Domain::Signal, 0, cfg.sample_count);

    let mut raw = Vec::with_capacity(grid.len());
    let mut pairs = Vec::with_capacity(grid.len());
    let mut notes = Vec::new();
    let mut truncated_at = None;
    let mut values = vec![0.0; cfg.sample_count];
    for &sz in grid {
        for ((v, c), zz) in values.iter_mut().zip(&clean).zip(&z) {
            *v = c + sz * zz;
        }
        let pdf = estimate_pdf(&values, cfg.bins, None)?;
        let mut h = min_entropy_comparator(
            &SampleMass::new(&values)?,
            quantum.s_min,
            quantum.width,
            cfg.lower_limit,
        )?;
        if let Extended::Finite(hv) = h {
            if hv < 1.0 {
                notes.push(format!(
                    "σ_ζ = {sz}: H∞ = {hv} below 1 from sampling noise, clamped to 1"
                ));
                h = Extended::Finite(1.0);
            }
        }
        let gamma = match h {
            Extended::Finite(hv) => gamma_comparator(hv)?,
            Extended::Infinite => Extended::Infinite,
        };
        let est = broadening_factor(&pdf, cfg.density_floor);
        let point = CurvePoint {
            sigma_zeta: sz,
            h_inf: h,
            gamma,
            b: est.as_ref().ok().map(|e| e.b),
            width_w: est.as_ref().ok().map(|e| e.width_w),
            peak_left: est.as_ref().ok().map(|e| e.peak_left),
            peak_right: est.as_ref().ok().map(|e| e.peak_right),
        };
        raw.push(point);
        match (gamma, est) {
            (Extended::Finite(g), Ok(e)) => pairs.push((e.b, g)),
            (Extended::Infinite, _) => {
                notes.push(format!("σ_ζ = {sz}: Γ is infinite; curve truncated"));
                truncated_at = Some(sz);
                break;
            }
            (_, Err(err)) => {
                notes.push(format!("σ_ζ = {sz}: {err}; curve truncated"));
                truncated_at = Some(sz);
                break;
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::Degenerate(format!(
            "no usable grid point: {}",
            notes.join("; ")
        )));
    }
    let mut curve = GammaCurve::from_pairs(&pairs, cfg.clone())?;
    if curve.repaired {
        notes.push(format!(
            "isotonic repair merged or moved raw pairs: {} raw -> {} points",
            pairs.len(),
            curve.points.len()
        ));
    }
    curve.raw = raw;
    curve.truncated_at = truncated_at;
    curve.notes = notes;
    Ok(curve)
}

/// Piecewise-linear Γ(B). Below the curve the left-end Γ is returned with a
/// warning; above it Γ is unbounded.
pub fn gamma_from_b(curve: &GammaCurve, b: f64) -> Result<Extended> {
    if !b.is_finite() {
        return Err(invalid_arg(format!("B must be finite, got {b}")));
    }
    let pts = &curve.points;
    let (lo, hi) = curve.b_range();
    if b < lo {
        log::warn!("B = {b} is below the calibrated range [{lo}, {hi}]; using Γ at the left end");
        return Ok(Extended::Finite(pts[0].1));
    }
    if b > hi {
        return Ok(Extended::Infinite);
    }
    let k = pts.partition_point(|p| p.0 < b);
    if pts[k].0 == b {
        return Ok(Extended::Finite(pts[k].1));
    }
    let ((b0, g0), (b1, g1)) = (pts[k - 1], pts[k]);
    let t = (b - b0) / (b1 - b0);
    Ok(Extended::Finite(g0 + t * (g1 - g0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dummy_cfg() -> CurveConfig {
        CurveConfig::calibration(1)
    }

    #[test]
    fn isotonic_pools_violators() {
        assert_eq!(isotonic(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(isotonic(&[3.0, 2.0, 1.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(isotonic(&[1.0, 2.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn repair_merges_tied_b() {
        let c = GammaCurve::from_pairs(
            &[(1.0, 1.0), (1.3, 1.2), (1.2, 1.1), (1.5, 1.4)],
            dummy_cfg(),
        )
        .unwrap();
        assert!(c.repaired);
        assert_eq!(c.points.len(), 3);
        assert!(c
            .points
            .windows(2)
            .all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1));
        assert!((c.points[1].0 - 1.25).abs() < 1e-15 && (c.points[1].1 - 1.15).abs() < 1e-15);
        let clean = GammaCurve::from_pairs(&[(1.0, 1.0), (2.0, 2.0)], dummy_cfg()).unwrap();
        assert!(!clean.repaired);
    }

    #[test]
    fn interpolation_contract() {
        let c = GammaCurve::from_pairs(&[(1.0, 1.0), (1.5, 1.2), (2.0, 1.6)], dummy_cfg()).unwrap();
        assert_eq!(gamma_from_b(&c, 1.5).unwrap(), Extended::Finite(1.2));
        assert_eq!(gamma_from_b(&c, 1.0).unwrap(), Extended::Finite(1.0));
        assert_eq!(gamma_from_b(&c, 2.0).unwrap(), Extended::Finite(1.6));
        let mid = gamma_from_b(&c, 1.75).unwrap().to_f64();
        assert!((mid - 1.4).abs() < 1e-12);
        assert_eq!(gamma_from_b(&c, 0.5).unwrap(), Extended::Finite(1.0));
        assert_eq!(gamma_from_b(&c, 2.5).unwrap(), Extended::Infinite);
        assert!(gamma_from_b(&c, f64::NAN).is_err());
        assert_eq!(c.to_csv().lines().next(), Some("b,gamma"));
    }

    #[test]
    fn rejects_bad_grid() {
        let mut cfg = dummy_cfg();
        cfg.sigma_zeta_grid = vec![0.1, 0.05];
        assert!(build_gamma_curve(&cfg).is_err());
        cfg.sigma_zeta_grid.clear();
        assert!(build_gamma_curve(&cfg).is_err());
    }
}
