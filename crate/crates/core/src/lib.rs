//! Simulation and entropy accounting for laser-interference quantum random
//! number generators.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod density;
pub mod error;
pub mod extractor;
pub mod montecarlo;
pub mod quad;
pub mod reduction;
pub mod rng;
pub mod sweep;

pub use analytic::{
    interference_bounds, uniformity_margin, visibility_from_overlap, AnalyticInterferencePdf,
    ChirpJitterConfig, OpticalConfig, UniformityMargin, WrappedPhasePdf,
};
pub use density::Density;
pub use error::{Error, Result};
pub use extractor::{
    configure_bank, digitize_and_extract, extract_simulated, keep_rate_check, trim_bank, BitStream,
    ComparatorBank, Extractor, PipelineStats, ThresholdTrim,
};
pub use montecarlo::{
    estimate_pdf, sample_phase, sample_signals, EmpiricalPdf, NoiseConfig, PhaseMode, SampleBatch,
    SignalModel,
};
pub use reduction::{
    analyze_pdf, broadening_factor, build_gamma_curve, comparator_threshold, gamma_adc,
    gamma_comparator, gamma_from_b, gamma_leftmax, min_entropy_adc, min_entropy_comparator,
    p_max_adc, quantum_min_entropy_comparator, untrusted_interval, AnalyzeOptions, CurveConfig,
    Extended, GammaCurve, LowerLimit, ReductionReport,
};
pub use stats_tests::{run_battery, run_default_battery, TestReport};
pub use sweep::{reconstruct_pdf, run_sweep, SweepRecord};
