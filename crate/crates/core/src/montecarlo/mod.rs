//! Seeded Monte-Carlo sampling of the interference signal under quantum
//! phase diffusion plus classical Gaussian noises, and histogram density
//! estimation of the result.

mod histogram;

pub use histogram::{estimate_pdf, EmpiricalPdf, DEFAULT_BINS};

use std::f64::consts::{PI, SQRT_2, TAU};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{ChirpJitterConfig, OpticalConfig};
use crate::error::{invalid_arg, invalid_config, Error, Result};
use crate::rng::{stream_rng, Domain, CHUNK_LEN};

/// How the phase difference ΔΦ is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    /// Uniform on `[0, π)`.
    #[default]
    ExactUniform,
    /// Gaussian with rms σ_φ·√2 around Δθ, folded onto `[0, π)`.
    WrappedGaussian,
}

/// rms values of the classical noises.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma_s1: f64,
    pub sigma_s2: f64,
    /// Photodetector noise ζ.
    pub sigma_zeta: f64,
    /// rms of the pulse-overlap jitter in seconds; 0 disables the chirp path.
    #[serde(default)]
    pub sigma_jitter: f64,
    #[serde(default)]
    pub phase_mode: PhaseMode,
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self {
            sigma_s1: 0.0,
            sigma_s2: 0.0,
            sigma_zeta: 0.0,
            sigma_jitter: 0.0,
            phase_mode: PhaseMode::ExactUniform,
        }
    }

    /// Pulse-amplitude noise `sigma_s` on both arms plus detector noise.
    pub fn gaussian(sigma_s: f64, sigma_zeta: f64) -> Self {
        Self {
            sigma_s1: sigma_s,
            sigma_s2: sigma_s,
            sigma_zeta,
            ..Self::noiseless()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_s1", self.sigma_s1),
            ("sigma_s2", self.sigma_s2),
            ("sigma_zeta", self.sigma_zeta),
            ("sigma_jitter", self.sigma_jitter),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid_config(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Ordered signal samples plus the seed that regenerates them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    pub seed: u64,
    pub count: usize,
}

impl SampleBatch {
    /// CSV with a single `s_value` column.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 20 + 8);
        out.push_str("s_value\n");
        for v in &self.values {
            out.push_str(&format!("{v}\n"));
        }
        out
    }

    /// Raw little-endian f64 stream.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_le_bytes(bytes: &[u8], seed: u64) -> Result<Self> {
        if bytes.len() % 8 != 0 {
            return Err(Error::Parse(format!(
                "{} bytes is not a whole number of f64 values",
                bytes.len()
            )));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(Self {
            count: values.len(),
            values,
            seed,
        })
    }
}

/// Output of [`sample_signals`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSignals {
    pub batch: SampleBatch,
    /// Number of non-positive intensity draws that were rejected.
    pub redraws: u64,
}

/// Fold an unrestricted phase onto `[0, π)` using cos(x) = cos(−x) = cos(x + 2πj).
pub fn fold_phase(x: f64) -> f64 {
    let mut r = x.rem_euclid(TAU);
    if r >= PI {
        r = TAU - r;
    }
    if r >= PI {
        r = PI.next_down();
    }
    r
}

#[derive(Debug, Clone, Copy)]
struct PhaseSampler {
    mode: PhaseMode,
    delta_theta: f64,
    sigma_dphi: f64,
}

impl PhaseSampler {
    fn new(cfg: &OpticalConfig, mode: PhaseMode) -> Self {
        Self {
            mode,
            delta_theta: cfg.delta_theta,
            sigma_dphi: cfg.sigma_phi * SQRT_2,
        }
    }

    #[inline]
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self.mode {
            PhaseMode::ExactUniform => rng.random::<f64>() * PI,
            PhaseMode::WrappedGaussian => {
                let z: f64 = rng.sample(StandardNormal);
                fold_phase(self.delta_theta + self.sigma_dphi * z)
            }
        }
    }
}

/// Per-sample generative model of `S = s1 + s2 + 2η√(s1 s2) cos ΔΦ + ζ`.
///
/// Every sample consumes one phase draw and four normal draws (s1, s2,
/// overlap jitter, detector noise) regardless of which rms values are zero,
/// so configurations that differ only in noise amplitudes share their
/// random numbers under the same seed.
#[derive(Debug, Clone)]
pub struct SignalModel {
    phase: PhaseSampler,
    s1_mean: f64,
    s2_mean: f64,
    sigma_s1: f64,
    sigma_s2: f64,
    sigma_zeta: f64,
    eta: f64,
    jitter: Option<(ChirpJitterConfig, f64)>,
}

impl SignalModel {
    pub fn new(
        cfg: &OpticalConfig,
        noise: &NoiseConfig,
        chirp: Option<&ChirpJitterConfig>,
    ) -> Result<Self> {
        cfg.validate()?;
        noise.validate()?;
        let jitter = if noise.sigma_jitter > 0.0 {
            let cj = chirp.ok_or_else(|| {
                invalid_config("sigma_jitter > 0 requires a chirp_jitter configuration")
            })?;
            cj.validate()?;
            if cfg.visibility.is_some() {
                log::warn!("jitter sampling enabled: the literal visibility is ignored in favour of the per-pulse overlap model");
            }
            Some((cj.clone(), noise.sigma_jitter))
        } else {
            None
        };
        let eta = match jitter {
            Some(_) => f64::NAN,
            None => cfg.resolve_visibility(chirp)?,
        };
        Ok(Self {
            phase: PhaseSampler::new(cfg, noise.phase_mode),
            s1_mean: cfg.s1_mean,
            s2_mean: cfg.s2_mean,
            sigma_s1: noise.sigma_s1,
            sigma_s2: noise.sigma_s2,
            sigma_zeta: noise.sigma_zeta,
            eta,
            jitter,
        })
    }

    #[inline]
    fn positive_gaussian(rng: &mut ChaCha8Rng, mean: f64, sigma: f64, redraws: &mut u64) -> f64 {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            let v = mean + sigma * z;
            if v > 0.0 {
                return v;
            }
            *redraws += 1;
        }
    }

    #[inline]
    pub fn draw(&self, rng: &mut ChaCha8Rng, redraws: &mut u64) -> f64 {
        let (clean, z_det) = self.draw_parts(rng, redraws);
        clean + self.sigma_zeta * z_det
    }

    /// The signal before detector noise, and the standard normal that
    /// `draw` would scale by σ_ζ.
    #[inline]
    fn draw_parts(&self, rng: &mut ChaCha8Rng, redraws: &mut u64) -> (f64, f64) {
        let dphi = self.phase.draw(rng);
        let s1 = Self::positive_gaussian(rng, self.s1_mean, self.sigma_s1, redraws);
        let s2 = Self::positive_gaussian(rng, self.s2_mean, self.sigma_s2, redraws);
        let z_jitter: f64 = rng.sample(StandardNormal);
        let eta = match &self.jitter {
            Some((cj, sigma)) => cj.visibility_at(cj.overlap_offset + sigma * z_jitter),
            None => self.eta,
        };
        let z_det: f64 = rng.sample(StandardNormal);
        (s1 + s2 + 2.0 * eta * (s1 * s2).sqrt() * dphi.cos(), z_det)
    }

    /// Fill `out` from a single stream; returns the rejection count.
    pub fn fill(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) -> u64 {
        let mut redraws = 0;
        for v in out.iter_mut() {
            *v = self.draw(rng, &mut redraws);
        }
        redraws
    }

    /// `n` samples of `(seed, domain)`, chunked over consecutive streams
    /// starting at `stream_base`.
    pub fn generate(
        &self,
        seed: u64,
        domain: Domain,
        stream_base: u64,
        n: usize,
    ) -> (Vec<f64>, u64) {
        let mut values = vec![0.0; n];
        let redraws = values
            .par_chunks_mut(CHUNK_LEN)
            .enumerate()
            .map(|(i, chunk)| {
                let mut rng = stream_rng(seed, domain, stream_base + i as u64);
                self.fill(&mut rng, chunk)
            })
            .sum();
        (values, redraws)
    }

    /// Like [`generate`](Self::generate) but returns the detector-noise-free
    /// signal and the unit detector-noise draws separately, so that
    /// `clean[i] + σ_ζ·z[i]` reproduces `generate` bit for bit for any σ_ζ.
    pub fn generate_parts(
        &self,
        seed: u64,
        domain: Domain,
        stream_base: u64,
        n: usize,
    ) -> (Vec<f64>, Vec<f64>, u64) {
        let mut clean = vec![0.0; n];
        let mut z = vec![0.0; n];
        let redraws = clean
            .par_chunks_mut(CHUNK_LEN)
            .zip(z.par_chunks_mut(CHUNK_LEN))
            .enumerate()
            .map(|(i, (c, zc))| {
                let mut rng = stream_rng(seed, domain, stream_base + i as u64);
                let mut redraws = 0;
                for (cv, zv) in c.iter_mut().zip(zc.iter_mut()) {
                    (*cv, *zv) = self.draw_parts(&mut rng, &mut redraws);
                }
                redraws
            })
            .sum();
        (clean, z, redraws)
    }

    pub fn sigma_zeta(&self) -> f64 {
        self.sigma_zeta
    }

    /// Number of samples strictly above `threshold` among `n` fresh draws.
    pub fn count_above(
        &self,
        seed: u64,
        domain: Domain,
        stream_base: u64,
        n: u64,
        threshold: f64,
    ) -> u64 {
        self.count_above_each(seed, domain, stream_base, n, &[threshold])[0]
    }

    /// Like [`count_above`](Self::count_above) for several thresholds applied
    /// to the same draws.
    pub fn count_above_each(
        &self,
        seed: u64,
        domain: Domain,
        stream_base: u64,
        n: u64,
        thresholds: &[f64],
    ) -> Vec<u64> {
        let chunks = n.div_ceil(CHUNK_LEN as u64);
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = stream_rng(seed, domain, stream_base + c);
                let len = (n - c * CHUNK_LEN as u64).min(CHUNK_LEN as u64);
                let mut ones = vec![0u64; thresholds.len()];
                let mut redraws = 0;
                for _ in 0..len {
                    let v = self.draw(&mut rng, &mut redraws);
                    for (o, &t) in ones.iter_mut().zip(thresholds) {
                        *o += (v > t) as u64;
                    }
                }
                ones
            })
            .reduce(
                || vec![0; thresholds.len()],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    }
}

/// Draw `n` phase differences ΔΦ ∈ `[0, π)`.
pub fn sample_phase(cfg: &OpticalConfig, mode: PhaseMode, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid_arg("sample count must be >= 1"));
    }
    cfg.validate()?;
    let sampler = PhaseSampler::new(cfg, mode);
    let mut out = vec![0.0; n];
    out.par_chunks_mut(CHUNK_LEN)
        .enumerate()
        .for_each(|(i, chunk)| {
            let mut rng = stream_rng(seed, Domain::Phase, i as u64);
            for v in chunk.iter_mut() {
                *v = sampler.draw(&mut rng);
            }
        });
    Ok(out)
}

/// Simulate `n` interference samples.
pub fn sample_signals(
    cfg: &OpticalConfig,
    noise: &NoiseConfig,
    chirp: Option<&ChirpJitterConfig>,
    n: usize,
    seed: u64,
) -> Result<SimulatedSignals> {
    if n == 0 {
        return Err(invalid_arg("sample count must be >= 1"));
    }
    let model = SignalModel::new(cfg, noise, chirp)?;
    let (values, redraws) = model.generate(seed, Domain::Signal, 0, n);
    Ok(SimulatedSignals {
        batch: SampleBatch {
            count: values.len(),
            values,
            seed,
        },
        redraws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_phase_maps_into_half_open_interval() {
        for x in [-10.0, -PI, -1.0, 0.0, 1.0, PI, 3.5, TAU, 100.0] {
            let y = fold_phase(x);
            assert!((0.0..PI).contains(&y), "{x} -> {y}");
            assert!((y.cos() - x.cos()).abs() < 1e-12 || x == PI || x == -PI);
        }
        assert_eq!(fold_phase(1.0), 1.0);
        assert_eq!(fold_phase(-1.0), 1.0);
    }

    #[test]
    fn uniform_phase_mean() {
        let cfg = OpticalConfig::symmetric(1.0, 1.0);
        let n = 1_000_000;
        let ph = sample_phase(&cfg, PhaseMode::ExactUniform, n, 11).unwrap();
        assert!(ph.iter().all(|&p| (0.0..PI).contains(&p)));
        let mean = ph.iter().sum::<f64>() / n as f64;
        let se = PI / 12f64.sqrt() / (n as f64).sqrt();
        assert!((mean - PI / 2.0).abs() < 5.0 * se);
    }

    #[test]
    fn degenerate_wrapped_phase_is_constant() {
        let mut cfg = OpticalConfig::symmetric(1.0, 1.0);
        cfg.sigma_phi = 0.0;
        cfg.delta_theta = 1.0;
        let ph = sample_phase(&cfg, PhaseMode::WrappedGaussian, 1000, 3).unwrap();
        assert!(ph.iter().all(|&p| p == 1.0));
        assert!(sample_phase(&cfg, PhaseMode::WrappedGaussian, 0, 3).is_err());
    }

    #[test]
    fn jitter_requires_chirp_config() {
        let cfg = OpticalConfig::symmetric(1.0, 1.0);
        let mut noise = NoiseConfig::noiseless();
        noise.sigma_jitter = 5e-12;
        assert!(sample_signals(&cfg, &noise, None, 10, 1).is_err());
        noise.sigma_jitter = -1.0;
        assert!(sample_signals(&cfg, &noise, None, 10, 1).is_err());
    }

    #[test]
    fn noiseless_signal_stays_within_bounds() {
        let cfg = OpticalConfig::symmetric(1.0, 1.0);
        let sim = sample_signals(&cfg, &NoiseConfig::noiseless(), None, 200_000, 5).unwrap();
        assert_eq!(sim.redraws, 0);
        assert_eq!(sim.batch.count, 200_000);
        assert!(sim.batch.values.iter().all(|&v| (0.0..=4.0).contains(&v)));
    }

    #[test]
    fn binary_export_round_trips() {
        let cfg = OpticalConfig::symmetric(1.0, 1.0);
        let sim = sample_signals(&cfg, &NoiseConfig::gaussian(0.05, 0.1), None, 1000, 5).unwrap();
        let back = SampleBatch::from_le_bytes(&sim.batch.to_le_bytes(), 5).unwrap();
        assert_eq!(back, sim.batch);
        assert!(SampleBatch::from_le_bytes(&[0u8; 7], 0).is_err());
        assert!(sim.batch.to_csv().starts_with("s_value\n"));
        assert_eq!(sim.batch.to_csv().lines().count(), 1001);
    }
}
