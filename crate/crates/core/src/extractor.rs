//! Two-comparator hardware extractor: samples falling between V_th − ΔV_Γ and
//! V_th + ΔV_Γ are dropped, everything else is digitized by either comparator.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::montecarlo::{EmpiricalPdf, SignalModel};
use crate::rng::{stream_rng, Domain, CHUNK_LEN};

/// Thresholds of comparators C1 and C2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparatorBank {
    pub v_th: f64,
    pub dv_gamma: f64,
    pub v_th1: f64,
    pub v_th2: f64,
}

pub fn configure_bank(v_th: f64, dv_gamma: f64) -> Result<ComparatorBank> {
    if !v_th.is_finite() {
        return Err(invalid_arg(format!("threshold must be finite, got {v_th}")));
    }
    if !(dv_gamma >= 0.0 && dv_gamma.is_finite()) {
        return Err(invalid_arg(format!(
            "untrusted half-width must be >= 0, got {dv_gamma}"
        )));
    }
    Ok(ComparatorBank {
        v_th,
        dv_gamma,
        v_th1: v_th - dv_gamma,
        v_th2: v_th + dv_gamma,
    })
}

/// How a sample is turned into a kept bit or a discard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// Keep c1 when c1 ⊕ c2 = 0.
    Xor,
    /// 0 when S ≤ V1, 1 when S > V2, discard otherwise.
    Interval,
}

impl ComparatorBank {
    #[inline]
    pub fn classify(&self, s: f64, rule: Rule) -> Option<bool> {
        match rule {
            Rule::Xor => {
                let c1 = s > self.v_th1;
                let c2 = s > self.v_th2;
                (!(c1 ^ c2)).then_some(c1)
            }
            Rule::Interval => {
                if s <= self.v_th1 {
                    Some(false)
                } else if s > self.v_th2 {
                    Some(true)
                } else {
                    None
                }
            }
        }
    }
}

/// Packed kept bits, first bit in the most significant position of byte 0.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BitStream {
    pub bytes: Vec<u8>,
    pub produced: u64,
    pub consumed: u64,
    pub discarded: u64,
    pub ones: u64,
}

impl BitStream {
    #[inline]
    pub fn push(&mut self, bit: bool) {
        let off = (self.produced % 8) as u32;
        if off == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().expect("byte allocated") |= 0x80 >> off;
            self.ones += 1;
        }
        self.produced += 1;
    }

    pub fn bit(&self, i: u64) -> bool {
        assert!(i < self.produced, "bit {i} out of range");
        self.bytes[(i / 8) as usize] & (0x80 >> (i % 8)) != 0
    }

    /// Kept bits as 0/1 values.
    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.produced).map(|i| self.bit(i) as u8).collect()
    }

    /// Valid bits in the final byte (8 when it is full, 0 for an empty stream).
    pub fn valid_bits_in_last_byte(&self) -> u8 {
        match self.produced % 8 {
            0 if self.produced > 0 => 8,
            r => r as u8,
        }
    }

    pub fn keep_rate(&self) -> f64 {
        if self.consumed == 0 {
            return 0.0;
        }
        self.produced as f64 / self.consumed as f64
    }

    pub fn ones_fraction(&self) -> f64 {
        if self.produced == 0 {
            return 0.0;
        }
        self.ones as f64 / self.produced as f64
    }

    pub fn stats(&self, input_rate: f64) -> PipelineStats {
        let keep_rate = self.keep_rate();
        PipelineStats {
            keep_rate,
            ones_fraction: self.ones_fraction(),
            input_rate,
            implied_output_rate: input_rate * keep_rate,
        }
    }
}

/// Rate accounting of an extraction run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub keep_rate: f64,
    pub ones_fraction: f64,
    /// Samples per second fed to the comparators.
    pub input_rate: f64,
    /// Kept bits per second.
    pub implied_output_rate: f64,
}

/// Pulse repetition rate used for rate accounting, in Hz.
pub const DEFAULT_INPUT_RATE: f64 = 2.5e9;

/// Resumable point of a streaming extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractorState {
    pub bank: ComparatorBank,
    /// Index of the byte currently being filled.
    pub byte_offset: u64,
    /// Next bit position inside that byte (0 = most significant).
    pub bit_offset: u8,
    pub consumed: u64,
    pub discarded: u64,
    pub ones: u64,
}

/// Streaming fold of samples into a [`BitStream`].
#[derive(Debug, Clone)]
pub struct Extractor {
    bank: ComparatorBank,
    rule: Rule,
    out: BitStream,
}

impl Extractor {
    pub fn new(bank: ComparatorBank) -> Self {
        Self::with_rule(bank, Rule::Xor)
    }

    pub fn with_rule(bank: ComparatorBank, rule: Rule) -> Self {
        Self {
            bank,
            rule,
            out: BitStream::default(),
        }
    }

    /// Continue from a checkpoint and the bytes written so far. The partial
    /// byte at `byte_offset` must be included when `bit_offset > 0`.
    pub fn resume(state: ExtractorState, mut bytes: Vec<u8>) -> Result<Self> {
        if state.bit_offset >= 8 {
            return Err(invalid_arg("bit offset must be < 8"));
        }
        let expected = state.byte_offset as usize + usize::from(state.bit_offset > 0);
        if bytes.len() < expected {
            return Err(invalid_arg(format!(
                "checkpoint needs {expected} bytes, got {}",
                bytes.len()
            )));
        }
        bytes.truncate(expected);
        if let (true, Some(last)) = (state.bit_offset > 0, bytes.last_mut()) {
            *last &= !(0xffu8 >> state.bit_offset);
        }
        let produced = state.byte_offset * 8 + state.bit_offset as u64;
        if state.ones > produced || produced + state.discarded != state.consumed {
            return Err(invalid_arg("inconsistent checkpoint counters"));
        }
        Ok(Self {
            bank: state.bank,
            rule: Rule::Xor,
            out: BitStream {
                bytes,
                produced,
                consumed: state.consumed,
                discarded: state.discarded,
                ones: state.ones,
            },
        })
    }

    pub fn bank(&self) -> &ComparatorBank {
        &self.bank
    }

    /// Swap in recalibrated thresholds; already kept bits are unaffected.
    pub fn set_bank(&mut self, bank: ComparatorBank) {
        self.bank = bank;
    }

    pub fn process(&mut self, samples: &[f64]) {
        for &s in samples {
            self.out.consumed += 1;
            match self.bank.classify(s, self.rule) {
                Some(bit) => self.out.push(bit),
                None => self.out.discarded += 1,
            }
        }
    }

    pub fn state(&self) -> ExtractorState {
        ExtractorState {
            bank: self.bank,
            byte_offset: self.out.produced / 8,
            bit_offset: (self.out.produced % 8) as u8,
            consumed: self.out.consumed,
            discarded: self.out.discarded,
            ones: self.out.ones,
        }
    }

    pub fn stream(&self) -> &BitStream {
        &self.out
    }

    pub fn finish(self) -> BitStream {
        self.out
    }
}

/// Run the extractor over a whole batch.
pub fn digitize_and_extract(
    samples: &[f64],
    bank: &ComparatorBank,
    input_rate: f64,
) -> (BitStream, PipelineStats) {
    let mut ex = Extractor::new(*bank);
    ex.process(samples);
    let out = ex.finish();
    let stats = out.stats(input_rate);
    (out, stats)
}

/// Outcome of [`keep_rate_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeepRateCheck {
    pub expected: f64,
    pub deviation: f64,
    pub pass: bool,
}

/// Compare the keep rate against 1/Γ.
pub fn keep_rate_check(stats: &PipelineStats, gamma: f64, tolerance: f64) -> Result<KeepRateCheck> {
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(invalid_arg(format!(
            "Γ must be finite and >= 1, got {gamma}"
        )));
    }
    let expected = 1.0 / gamma;
    let deviation = stats.keep_rate - expected;
    Ok(KeepRateCheck {
        expected,
        deviation,
        pass: deviation.abs() <= tolerance,
    })
}

/// Record of a [`trim_bank`] step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTrim {
    pub draws: u64,
    pub ones_above_v1: u64,
    pub ones_above_v2: u64,
    /// F(V1) + F(V2) − 1 measured before the step; 0 when balanced.
    pub imbalance: f64,
    /// F(V2) − F(V1) measured before the step.
    pub discard_measured: f64,
    /// (Γ − 1)/Γ.
    pub discard_target: f64,
    pub before: ComparatorBank,
    pub after: ComparatorBank,
}

/// Histogram density averaged over ±4 bins around `x`; single bins of a
/// sweep reconstruction are too noisy for a Newton slope.
fn local_density(pdf: &EmpiricalPdf, x: f64) -> f64 {
    let w = pdf
        .bin_index(x)
        .map_or_else(|| pdf.bin_width(0), |i| pdf.bin_width(i));
    let h = 4.0 * w;
    (pdf.cdf(x + h) - pdf.cdf(x - h)) / (2.0 * h)
}

/// Refine a bank with comparator counts so that it leaves equal mass on both
/// sides, F(V1) = 1 − F(V2), and discards F(V2) − F(V1) = (Γ − 1)/Γ.
///
/// One Newton step in (V_th, ΔV_Γ): the two conditions are counted on
/// `draws` fresh samples from the sweep domain starting at `stream_base`,
/// the Jacobian uses the smoothed densities of `pdf` at V1 and V2. The
/// histogram only sets the step size, so its errors slow convergence but do
/// not bias the fixed point; call it again on the result to iterate.
pub fn trim_bank(
    model: &SignalModel,
    seed: u64,
    stream_base: u64,
    draws: u64,
    bank: &ComparatorBank,
    pdf: &EmpiricalPdf,
    gamma: f64,
) -> Result<ThresholdTrim> {
    if draws == 0 {
        return Err(invalid_arg("threshold trim needs at least one draw"));
    }
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(invalid_arg(format!(
            "Γ must be finite and >= 1, got {gamma}"
        )));
    }
    let ones = model.count_above_each(
        seed,
        Domain::Sweep,
        stream_base,
        draws,
        &[bank.v_th1, bank.v_th2],
    );
    let n = draws as f64;
    let (f_lo, f_hi) = (1.0 - ones[0] as f64 / n, 1.0 - ones[1] as f64 / n);
    let imbalance = f_lo + f_hi - 1.0;
    let discard_measured = f_hi - f_lo;
    let discard_target = (gamma - 1.0) / gamma;
    let (d1, d2) = (
        local_density(pdf, bank.v_th1),
        local_density(pdf, bank.v_th2),
    );
    // g1 = F(V−ΔV) + F(V+ΔV) − 1, g2 = F(V+ΔV) − F(V−ΔV) − P
    let (a, b) = (d1 + d2, d2 - d1);
    let det = a * a - b * b;
    if !(d1 > 0.0 && d2 > 0.0 && det > 0.0) {
        return Err(Error::Degenerate(format!(
            "zero density at the comparator thresholds {} and {}",
            bank.v_th1, bank.v_th2
        )));
    }
    let (g1, g2) = (imbalance, discard_measured - discard_target);
    let dv_th = (a * g1 - b * g2) / det;
    let d_dv = (a * g2 - b * g1) / det;
    let dv_new = (bank.dv_gamma - d_dv).max(0.0);
    let after = configure_bank(bank.v_th - dv_th, dv_new)?;
    Ok(ThresholdTrim {
        draws,
        ones_above_v1: ones[0],
        ones_above_v2: ones[1],
        imbalance,
        discard_measured,
        discard_target,
        before: *bank,
        after,
    })
}

/// Simulate `n` samples from `model` and extract them in order, calling
/// `recalibrate(epoch)` every `interval` samples (epoch 1, 2, …) to replace
/// the bank. Samples come from the extraction domain of `seed`.
pub fn extract_simulated<F>(
    model: &SignalModel,
    seed: u64,
    n: u64,
    bank: ComparatorBank,
    interval: Option<u64>,
    mut recalibrate: F,
) -> Result<Extractor>
where
    F: FnMut(u64) -> Result<ComparatorBank>,
{
    if interval == Some(0) {
        return Err(invalid_arg("recalibration interval must be >= 1"));
    }
    let mut ex = Extractor::new(bank);
    let mut buf = vec![0.0; CHUNK_LEN];
    let chunks = n.div_ceil(CHUNK_LEN as u64);
    let mut done = 0u64;
    let mut next_recal = interval;
    let mut epoch = 0;
    for c in 0..chunks {
        let len = (n - c * CHUNK_LEN as u64).min(CHUNK_LEN as u64) as usize;
        let mut rng = stream_rng(seed, Domain::Extract, c);
        model.fill(&mut rng, &mut buf[..len]);
        let mut start = 0;
        while start < len {
            let stop = match next_recal {
                Some(at) if at < done + (len - start) as u64 => (at - done) as usize + start,
                _ => len,
            };
            ex.process(&buf[start..stop]);
            done += (stop - start) as u64;
            start = stop;
            if let (Some(at), Some(step)) = (next_recal, interval) {
                if done == at {
                    epoch += 1;
                    ex.set_bank(recalibrate(epoch)?);
                    next_recal = Some(at + step);
                }
            }
        }
    }
    Ok(ex)
}
