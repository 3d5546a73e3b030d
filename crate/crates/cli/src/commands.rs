//! The subcommands. Each stage reads its inputs from the output directory and
//! writes its artifacts there, so `pipeline` is just the stages in order.

use std::path::{Path, PathBuf};

use qrng_core::extractor::{extract_simulated, KeepRateCheck, DEFAULT_INPUT_RATE};
use qrng_core::reduction::build_gamma_curve;
use qrng_core::rng::Domain;
use qrng_core::stats_tests::unpack_bits;
use qrng_core::sweep::{uniform_grid, Reconstruction, DEFAULT_BITS_PER_STEP, DEFAULT_STEPS};
use qrng_core::{
    analyze_pdf, configure_bank, estimate_pdf, interference_bounds, keep_rate_check,
    reconstruct_pdf, run_default_battery, run_sweep, trim_bank, AnalyzeOptions, ComparatorBank,
    CurveConfig, EmpiricalPdf, Extended, GammaCurve, LowerLimit, PipelineStats, ReductionReport,
    SampleBatch, SignalModel, SweepRecord, TestReport, ThresholdTrim,
};
use serde::{Deserialize, Serialize};

use crate::artifacts::{read_envelope, ArtifactDir};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const SAMPLES_BIN: &str = "samples.bin";
pub const SAMPLES_JSON: &str = "samples.json";
pub const SAMPLES_CSV: &str = "samples.csv";
pub const PDF_CSV: &str = "pdf.csv";
pub const PDF_JSON: &str = "pdf.json";
pub const SIMULATE_JSON: &str = "simulate.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_JSON: &str = "sweep.json";
pub const SWEEP_PDF_CSV: &str = "sweep_pdf.csv";
pub const SWEEP_PDF_JSON: &str = "sweep_pdf.json";
pub const CURVE_JSON: &str = "curve.json";
pub const CURVE_CSV: &str = "curve.csv";
pub const REPORT_JSON: &str = "report.json";
pub const BITS_BIN: &str = "bits.bin";
pub const BITS_JSON: &str = "bits.json";
pub const TEST_JSON: &str = "test_report.json";
pub const TEST_TXT: &str = "test_report.txt";
pub const PIPELINE_JSON: &str = "pipeline.json";

/// Samples drawn for the sweep range pilot.
pub const PILOT_SAMPLES: usize = 100_000;
/// First stream of the range pilot in the sweep domain (far above the
/// per-threshold streams).
const PILOT_STREAM: u64 = 1 << 63;
/// First stream of the comparator trim in the sweep domain.
const TRIM_STREAM: u64 = 1 << 62;
/// Newton steps of the comparator trim; `trim_bits` is split between them.
pub const TRIM_STEPS: u64 = 2;
/// Samples per recalibration epoch.
pub const RECAL_SAMPLES: usize = 1_000_000;
/// Tolerance of the keep-rate against 1/Γ reported with each extraction.
pub const KEEP_RATE_TOL: f64 = 0.005;
/// Trim draws used by `pipeline` unless overridden.
pub const PIPELINE_TRIM_BITS: u64 = 50_000_000;

fn model(cfg: &RunConfig) -> CliResult<SignalModel> {
    Ok(SignalModel::new(
        &cfg.optical,
        &cfg.noise,
        cfg.chirp_jitter.as_ref(),
    )?)
}

#[derive(Debug, Clone, Default)]
pub struct SimulateOpts {
    pub samples_csv: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplesMeta {
    pub file: String,
    pub encoding: String,
    pub count: usize,
    pub redraws: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub sample_count: usize,
    pub redraws: u64,
    pub bins: usize,
    pub range: (f64, f64),
    /// Bounds of the interference term alone.
    pub quantum_support: (f64, f64),
    pub left_peak_density: Option<f64>,
    pub right_peak_density: Option<f64>,
}

fn simulate_pdf(cfg: &RunConfig, m: &SignalModel) -> CliResult<(Vec<f64>, u64, EmpiricalPdf)> {
    let (values, redraws) = m.generate(cfg.seed, Domain::Signal, 0, cfg.sample_count);
    let pdf = estimate_pdf(&values, cfg.bins, None)?;
    Ok((values, redraws, pdf))
}

pub fn cmd_simulate(cfg: &RunConfig, opts: &SimulateOpts) -> CliResult<SimulateSummary> {
    let art = ArtifactDir::create(&cfg.output_dir)?;
    let m = model(cfg)?;
    let (values, redraws, pdf) = simulate_pdf(cfg, &m)?;
    let quantum = interference_bounds(&cfg.optical, cfg.chirp_jitter.as_ref())?;
    let batch = SampleBatch {
        count: values.len(),
        values,
        seed: cfg.seed,
    };
    art.write_bytes(SAMPLES_BIN, &batch.to_le_bytes())?;
    if opts.samples_csv {
        art.write_text(SAMPLES_CSV, &batch.to_csv())?;
    }
    let meta = SamplesMeta {
        file: SAMPLES_BIN.into(),
        encoding: "f64 little-endian".into(),
        count: batch.count,
        redraws,
    };
    art.write_json(SAMPLES_JSON, "samples", cfg, &meta)?;
    art.write_text(PDF_CSV, &pdf.to_csv())?;
    art.write_json(PDF_JSON, "pdf", cfg, &pdf)?;

    let (left, right) = match qrng_core::broadening_factor(&pdf, cfg.density_floor) {
        Ok(b) => (
            Some(pdf.density_at(b.peak_left)),
            Some(pdf.density_at(b.peak_right)),
        ),
        Err(_) => (None, None),
    };
    let edges = pdf.bin_edges();
    let summary = SimulateSummary {
        sample_count: batch.count,
        redraws,
        bins: pdf.n_bins(),
        range: (edges[0], edges[edges.len() - 1]),
        quantum_support: (quantum.s_min, quantum.s_max),
        left_peak_density: left,
        right_peak_density: right,
    };
    art.write_json(SIMULATE_JSON, "simulate", cfg, &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct SweepOpts {
    pub bits_per_step: u64,
    pub steps: usize,
}

impl Default for SweepOpts {
    fn default() -> Self {
        Self {
            bits_per_step: DEFAULT_BITS_PER_STEP,
            steps: DEFAULT_STEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepArtifact {
    pub record: SweepRecord,
    /// Sample range of the pilot run that placed the thresholds.
    pub pilot_range: (f64, f64),
    pub pilot_samples: usize,
    pub raw_mass: f64,
    pub gaps: Vec<usize>,
}

/// Threshold range covering the signal, from a short pilot simulation padded
/// by 2 % of its span on each side.
pub fn pilot_range(cfg: &RunConfig, m: &SignalModel) -> (f64, f64) {
    let (values, _) = m.generate(cfg.seed, Domain::Sweep, PILOT_STREAM, PILOT_SAMPLES);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.02 * (hi - lo).max(1e-9);
    (lo - pad, hi + pad)
}

pub fn cmd_sweep(cfg: &RunConfig, opts: &SweepOpts) -> CliResult<SweepArtifact> {
    let art = ArtifactDir::create(&cfg.output_dir)?;
    let m = model(cfg)?;
    let (lo, hi) = pilot_range(cfg, &m);
    let grid = uniform_grid(lo, hi, opts.steps)?;
    let record = run_sweep(
        &cfg.optical,
        &cfg.noise,
        cfg.chirp_jitter.as_ref(),
        &grid,
        opts.bits_per_step,
        cfg.seed,
    )?;
    let Reconstruction {
        pdf,
        raw_mass,
        gaps,
    } = reconstruct_pdf(&record)?;
    if !gaps.is_empty() {
        log::warn!(
            "{} interior sweep interval(s) had saturated counts and were zeroed",
            gaps.len()
        );
    }
    art.write_text(SWEEP_CSV, &record.to_csv())?;
    art.write_text(SWEEP_PDF_CSV, &pdf.to_csv())?;
    art.write_json(SWEEP_PDF_JSON, "pdf", cfg, &pdf)?;
    let out = SweepArtifact {
        record,
        pilot_range: (lo, hi),
        pilot_samples: PILOT_SAMPLES,
        raw_mass,
        gaps,
    };
    art.write_json(SWEEP_JSON, "sweep", cfg, &out)?;
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct AnalyzeOpts {
    /// Histogram to analyze (`.json` from simulate/sweep or a `bin_left,bin_right,density` CSV);
    /// simulated from the config when absent.
    pub pdf: Option<PathBuf>,
    /// Previously written `curve.json`; built from the config when absent.
    pub curve: Option<PathBuf>,
    pub lower_limit: LowerLimit,
    /// Total comparator draws for the trim; 0 disables it.
    pub trim_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeArtifact {
    pub report: ReductionReport,
    pub pdf_source: String,
    pub curve_source: String,
    /// Comparator trim steps, empty when disabled.
    pub trim: Vec<ThresholdTrim>,
    /// V_th and ΔV_Γ read off the pdf, before any trim.
    pub v_th_untrimmed: f64,
    pub dv_gamma_untrimmed: Option<f64>,
}

pub fn load_pdf(path: &Path, sample_count: u64) -> CliResult<EmpiricalPdf> {
    let bytes = std::fs::read(path).map_err(|e| {
        CliError::missing_artifact(format!("cannot read pdf {}: {e}", path.display()))
    })?;
    if path.extension().is_some_and(|e| e == "json") {
        Ok(read_envelope::<EmpiricalPdf>(&bytes, path, "pdf")?.data)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| CliError::new("parse", format!("{} is not UTF-8", path.display())))?;
        Ok(EmpiricalPdf::from_csv(&text, sample_count)?)
    }
}

pub fn load_curve(path: &Path) -> CliResult<GammaCurve> {
    let bytes = std::fs::read(path).map_err(|e| {
        CliError::missing_artifact(format!("cannot read curve {}: {e}", path.display()))
    })?;
    Ok(read_envelope::<GammaCurve>(&bytes, path, "curve")?.data)
}

pub fn curve_config(cfg: &RunConfig, lower_limit: LowerLimit) -> CurveConfig {
    let mut base_noise = cfg.noise.clone();
    base_noise.sigma_zeta = 0.0;
    CurveConfig {
        optical: cfg.optical.clone(),
        base_noise,
        chirp_jitter: cfg.chirp_jitter.clone(),
        sigma_zeta_grid: cfg.sigma_zeta_grid.clone(),
        sample_count: cfg.sample_count,
        bins: cfg.bins,
        density_floor: cfg.density_floor,
        seed: cfg.seed,
        lower_limit,
    }
}

pub fn cmd_analyze(cfg: &RunConfig, opts: &AnalyzeOpts) -> CliResult<AnalyzeArtifact> {
    let art = ArtifactDir::create(&cfg.output_dir)?;
    let m = model(cfg)?;
    let (pdf, pdf_source) = match &opts.pdf {
        Some(p) => (
            load_pdf(p, cfg.sample_count as u64)?,
            p.display().to_string(),
        ),
        None => (simulate_pdf(cfg, &m)?.2, "simulated".to_string()),
    };
    let (curve, curve_source) = match &opts.curve {
        Some(p) => (load_curve(p)?, p.display().to_string()),
        None => {
            let curve = build_gamma_curve(&curve_config(cfg, opts.lower_limit))?;
            art.write_json(CURVE_JSON, "curve", cfg, &curve)?;
            art.write_text(CURVE_CSV, &curve.to_csv())?;
            (curve, CURVE_JSON.to_string())
        }
    };
    let quantum = interference_bounds(&cfg.optical, cfg.chirp_jitter.as_ref())?;
    let options = AnalyzeOptions {
        density_floor: cfg.density_floor,
        lower_limit: opts.lower_limit,
    };
    let mut report = analyze_pdf(&pdf, &quantum, &curve, options)?;
    let v_th_untrimmed = report.v_th;
    let dv_untrimmed = report.dv_gamma;
    let mut trim = Vec::new();
    if let (Some(dv), Extended::Finite(g)) = (report.dv_gamma, report.gamma) {
        if opts.trim_bits > 0 {
            let mut bank = configure_bank(report.v_th, dv)?;
            let per_step = opts.trim_bits.div_ceil(TRIM_STEPS);
            for step in 0..TRIM_STEPS {
                let stream = TRIM_STREAM + (step << 40);
                let t = trim_bank(&m, cfg.seed, stream, per_step, &bank, &pdf, g)?;
                report.notes.push(format!(
                    "trim step {}: {} draws, imbalance {}, discard {} for target {}; V_th {} -> {}, ΔV_Γ {} -> {}",
                    step + 1, t.draws, t.imbalance, t.discard_measured, t.discard_target,
                    t.before.v_th, t.after.v_th, t.before.dv_gamma, t.after.dv_gamma
                ));
                bank = t.after;
                trim.push(t);
            }
            report.v_th = bank.v_th;
            report.dv_gamma = Some(bank.dv_gamma);
        }
    }
    let out = AnalyzeArtifact {
        report,
        pdf_source,
        curve_source,
        trim,
        v_th_untrimmed,
        dv_gamma_untrimmed: dv_untrimmed,
    };
    art.write_json(REPORT_JSON, "report", cfg, &out)?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ExtractOpts {
    pub recalibrate_every: Option<u64>,
    pub input_rate: f64,
}

impl Default for ExtractOpts {
    fn default() -> Self {
        Self {
            recalibrate_every: None,
            input_rate: DEFAULT_INPUT_RATE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recalibration {
    pub epoch: u64,
    pub gamma: Extended,
    pub bank: ComparatorBank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitsArtifact {
    pub file: String,
    pub bit_count: u64,
    pub valid_bits_in_last_byte: u8,
    pub consumed: u64,
    pub discarded: u64,
    pub ones: u64,
    pub gamma: f64,
    pub bank: ComparatorBank,
    pub stats: PipelineStats,
    pub keep_rate_check: KeepRateCheck,
    pub recalibrations: Vec<Recalibration>,
}

fn untrusted_regime() -> CliError {
    CliError::new(
        "untrusted_noise_regime",
        "Γ is infinite: untrusted noise regime, refusing to extract",
    )
}

/// Fresh pdf and bank for recalibration epoch `epoch`.
fn recalibrate(
    cfg: &RunConfig,
    m: &SignalModel,
    curve: &GammaCurve,
    epoch: u64,
) -> CliResult<(Extended, ComparatorBank)> {
    let n = cfg.sample_count.min(RECAL_SAMPLES);
    let (values, _) = m.generate(cfg.seed, Domain::Signal, epoch << 40, n);
    let pdf = estimate_pdf(&values, cfg.bins, None)?;
    let quantum = interference_bounds(&cfg.optical, cfg.chirp_jitter.as_ref())?;
    let options = AnalyzeOptions {
        density_floor: cfg.density_floor,
        lower_limit: curve.generation_config.lower_limit,
    };
    let report = analyze_pdf(&pdf, &quantum, curve, options)?;
    let dv = report.dv_gamma.ok_or_else(untrusted_regime)?;
    Ok((report.gamma, configure_bank(report.v_th, dv)?))
}

pub fn cmd_extract(cfg: &RunConfig, opts: &ExtractOpts) -> CliResult<BitsArtifact> {
    let art = ArtifactDir::create(&cfg.output_dir)?;
    let analysis: AnalyzeArtifact = art.read_json(REPORT_JSON, "report", "analyze")?.data;
    let (Extended::Finite(gamma), Some(dv)) = (analysis.report.gamma, analysis.report.dv_gamma)
    else {
        return Err(untrusted_regime());
    };
    let bank = configure_bank(analysis.report.v_th, dv)?;
    let m = model(cfg)?;
    let curve = match opts.recalibrate_every {
        Some(_) => Some(load_curve(&art.path(CURVE_JSON))?),
        None => None,
    };
    let mut recalibrations = Vec::new();
    let mut failure = None;
    let extracted = extract_simulated(
        &m,
        cfg.seed,
        cfg.sample_count as u64,
        bank,
        opts.recalibrate_every,
        |epoch| {
            let curve = curve.as_ref().expect("curve loaded when recalibrating");
            match recalibrate(cfg, &m, curve, epoch) {
                Ok((g, b)) => {
                    recalibrations.push(Recalibration {
                        epoch,
                        gamma: g,
                        bank: b,
                    });
                    Ok(b)
                }
                Err(e) => {
                    let msg = format!("recalibration epoch {epoch}: {}", e.message);
                    failure = Some(CliError::new(&e.kind, msg.clone()));
                    Err(qrng_core::Error::Degenerate(msg))
                }
            }
        },
    );
    let ex = match (extracted, failure) {
        (Err(_), Some(e)) => return Err(e),
        (r, _) => r?,
    };
    let bits = ex.finish();
    let stats = bits.stats(opts.input_rate);
    let check = keep_rate_check(&stats, gamma, KEEP_RATE_TOL)?;
    if !check.pass {
        log::warn!(
            "keep rate {} differs from 1/Γ = {} by more than {KEEP_RATE_TOL}",
            stats.keep_rate,
            check.expected
        );
    }
    art.write_bytes(BITS_BIN, &bits.bytes)?;
    let out = BitsArtifact {
        file: BITS_BIN.into(),
        bit_count: bits.produced,
        valid_bits_in_last_byte: bits.valid_bits_in_last_byte(),
        consumed: bits.consumed,
        discarded: bits.discarded,
        ones: bits.ones,
        gamma,
        bank,
        stats,
        keep_rate_check: check,
        recalibrations,
    };
    art.write_json(BITS_JSON, "bits", cfg, &out)?;
    Ok(out)
}

pub fn cmd_test(cfg: &RunConfig) -> CliResult<TestReport> {
    let art = ArtifactDir::create(&cfg.output_dir)?;
    let meta: BitsArtifact = art.read_json(BITS_JSON, "bits", "extract")?.data;
    let bytes = art.read_bytes(BITS_BIN, "extract")?;
    if bytes.len() as u64 != meta.bit_count.div_ceil(8) {
        return Err(CliError::new(
            "parse",
            format!(
                "{} holds {} bytes but {} declares {} bits",
                BITS_BIN,
                bytes.len(),
                BITS_JSON,
                meta.bit_count
            ),
        ));
    }
    let bits = unpack_bits(&bytes, meta.bit_count as usize)?;
    let report = run_default_battery(&bits)?;
    art.write_json(TEST_JSON, "test_report", cfg, &report)?;
    art.write_text(TEST_TXT, &report.to_table())?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct PipelineOpts {
    pub sweep: SweepOpts,
    pub analyze: AnalyzeOpts,
    pub extract: ExtractOpts,
}

impl Default for PipelineOpts {
    fn default() -> Self {
        Self {
            sweep: SweepOpts::default(),
            analyze: AnalyzeOpts {
                trim_bits: PIPELINE_TRIM_BITS,
                ..AnalyzeOpts::default()
            },
            extract: ExtractOpts::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub v_th: f64,
    pub broadening_b: f64,
    pub gamma: f64,
    pub dv_gamma: f64,
    pub bit_count: u64,
    pub keep_rate: f64,
    pub expected_keep_rate: f64,
    pub ones_fraction: f64,
    pub implied_output_rate: f64,
    pub overall_pass: bool,
}

/// sweep → analyze → extract → test.
pub fn cmd_pipeline(cfg: &RunConfig, opts: &PipelineOpts) -> CliResult<PipelineSummary> {
    cmd_sweep(cfg, &opts.sweep)?;
    let analyze = AnalyzeOpts {
        pdf: Some(cfg.output_dir.join(SWEEP_PDF_JSON)),
        ..opts.analyze.clone()
    };
    let analysis = cmd_analyze(cfg, &analyze)?;
    let bits = cmd_extract(cfg, &opts.extract)?;
    let tests = cmd_test(cfg)?;
    let summary = PipelineSummary {
        v_th: analysis.report.v_th,
        broadening_b: analysis.report.broadening_b,
        gamma: bits.gamma,
        dv_gamma: bits.bank.dv_gamma,
        bit_count: bits.bit_count,
        keep_rate: bits.stats.keep_rate,
        expected_keep_rate: bits.keep_rate_check.expected,
        ones_fraction: bits.stats.ones_fraction,
        implied_output_rate: bits.stats.implied_output_rate,
        overall_pass: tests.overall_pass,
    };
    ArtifactDir::create(&cfg.output_dir)?.write_json(PIPELINE_JSON, "pipeline", cfg, &summary)?;
    Ok(summary)
}
