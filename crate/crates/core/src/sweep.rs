//! Comparator threshold sweep: count ones above each threshold and rebuild
//! the signal density from neighbouring ones/zeros ratios.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{ChirpJitterConfig, OpticalConfig};
use crate::error::{invalid_arg, Error, Result};
use crate::montecarlo::{EmpiricalPdf, NoiseConfig, SignalModel};
use crate::rng::Domain;

pub const MIN_BITS_PER_STEP: u64 = 10_000;
pub const DEFAULT_BITS_PER_STEP: u64 = 100_000;
/// Default number of sweep steps across the support.
pub const DEFAULT_STEPS: usize = 128;

/// Counts recorded at each threshold of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub thresholds: Vec<f64>,
    pub ones: Vec<u64>,
    pub zeros: Vec<u64>,
    pub delta_v: f64,
    pub bits_per_step: u64,
    pub seed: u64,
}

impl SweepRecord {
    /// R = N_ones/N_zeros, `None` when no zero was recorded (saturated).
    pub fn ratio(&self, i: usize) -> Option<f64> {
        (self.zeros[i] > 0).then(|| self.ones[i] as f64 / self.zeros[i] as f64)
    }

    pub fn ratios(&self) -> Vec<Option<f64>> {
        (0..self.thresholds.len()).map(|i| self.ratio(i)).collect()
    }

    /// CSV with columns `v_th,ratio,ones,zeros`; saturated ratios are written
    /// as `saturated`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("v_th,ratio,ones,zeros\n");
        for i in 0..self.thresholds.len() {
            let r = self
                .ratio(i)
                .map_or_else(|| "saturated".to_string(), |r| r.to_string());
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.thresholds[i], r, self.ones[i], self.zeros[i]
            ));
        }
        out
    }
}

/// `n + 1` equally spaced thresholds from `lo` to `hi`.
pub fn uniform_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(invalid_arg(format!(
            "invalid sweep range [{lo}, {hi}] with {steps} steps"
        )));
    }
    let dv = (hi - lo) / steps as f64;
    Ok((0..=steps).map(|i| lo + i as f64 * dv).collect())
}

fn grid_step(v_grid: &[f64]) -> Result<f64> {
    if v_grid.len() < 2 {
        return Err(invalid_arg("a sweep needs at least two thresholds"));
    }
    if v_grid.iter().any(|v| !v.is_finite()) {
        return Err(invalid_arg("thresholds must be finite"));
    }
    let dv = (v_grid[v_grid.len() - 1] - v_grid[0]) / (v_grid.len() - 1) as f64;
    if !(dv > 0.0) {
        return Err(invalid_arg("thresholds must be strictly increasing"));
    }
    for (i, w) in v_grid.windows(2).enumerate() {
        if w[1] <= w[0] || ((w[1] - w[0]) - dv).abs() > 1e-9 * dv.max(w[1].abs()) {
            return Err(invalid_arg(format!(
                "threshold step {i} differs from the uniform step {dv}"
            )));
        }
    }
    Ok(dv)
}

/// Draw `bits_per_step` fresh samples per threshold and count `S > V`.
///
/// Threshold `i` uses streams starting at `i << 32` of the sweep domain, so
/// each acquisition can be reproduced on its own.
pub fn run_sweep(
    cfg: &OpticalConfig,
    noise: &NoiseConfig,
    chirp: Option<&ChirpJitterConfig>,
    v_grid: &[f64],
    bits_per_step: u64,
    seed: u64,
) -> Result<SweepRecord> {
    if bits_per_step < MIN_BITS_PER_STEP {
        return Err(invalid_arg(format!(
            "bits_per_step must be >= {MIN_BITS_PER_STEP}, got {bits_per_step}"
        )));
    }
    let delta_v = grid_step(v_grid)?;
    let model = SignalModel::new(cfg, noise, chirp)?;
    let ones: Vec<u64> = v_grid
        .par_iter()
        .enumerate()
        .map(|(i, &v)| model.count_above(seed, Domain::Sweep, (i as u64) << 32, bits_per_step, v))
        .collect();
    let zeros = ones.iter().map(|&o| bits_per_step - o).collect();
    Ok(SweepRecord {
        thresholds: v_grid.to_vec(),
        ones,
        zeros,
        delta_v,
        bits_per_step,
        seed,
    })
}

/// Density between two thresholds from their ones/zeros ratios.
pub fn density_from_ratios(r_i: f64, r_next: f64, delta_v: f64) -> f64 {
    (r_i - r_next).abs() / (delta_v * (1.0 + r_i + r_next + r_i * r_next))
}

/// Output of [`reconstruct_pdf`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub pdf: EmpiricalPdf,
    /// Integral of the densities before renormalization.
    pub raw_mass: f64,
    /// Intervals (indices into the output bins) with a saturated endpoint
    /// inside the reconstructed range; their density is set to 0.
    pub gaps: Vec<usize>,
}

/// Rebuild the density on the intervals between consecutive thresholds.
///
/// Thresholds with no zeros or no ones carry no shape information; intervals
/// touching them are dropped at the ends of the sweep and zeroed (and listed
/// as gaps) in the interior.
pub fn reconstruct_pdf(rec: &SweepRecord) -> Result<Reconstruction> {
    let n = rec.thresholds.len();
    if n < 2 || rec.ones.len() != n || rec.zeros.len() != n {
        return Err(invalid_arg(
            "sweep record columns have inconsistent lengths",
        ));
    }
    let informative = |i: usize| rec.ones[i] > 0 && rec.zeros[i] > 0;
    let usable: Vec<bool> = (0..n - 1)
        .map(|i| informative(i) && informative(i + 1))
        .collect();
    let (Some(first), Some(last)) = (
        usable.iter().position(|&u| u),
        usable.iter().rposition(|&u| u),
    ) else {
        return Err(Error::Degenerate(
            "no two consecutive thresholds with both ones and zeros".into(),
        ));
    };
    let mut densities = Vec::with_capacity(last - first + 1);
    let mut gaps = Vec::new();
    for (k, i) in (first..=last).enumerate() {
        if usable[i] {
            let (a, b) = (
                rec.ratio(i).expect("informative"),
                rec.ratio(i + 1).expect("informative"),
            );
            densities.push(density_from_ratios(
                a,
                b,
                rec.thresholds[i + 1] - rec.thresholds[i],
            ));
        } else {
            densities.push(0.0);
            gaps.push(k);
        }
    }
    let edges = rec.thresholds[first..=last + 1].to_vec();
    let raw_mass = densities
        .iter()
        .zip(edges.windows(2))
        .map(|(d, w)| d * (w[1] - w[0]))
        .sum();
    let pdf = EmpiricalPdf::from_parts(edges, densities, rec.bits_per_step * n as u64)?;
    Ok(Reconstruction {
        pdf,
        raw_mass,
        gaps,
    })
}
