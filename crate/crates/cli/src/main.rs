use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qrng_core::LowerLimit;
use serde::Serialize;

use qrng_cli::commands::*;
use qrng_cli::config::{Preset, RunConfig};
use qrng_cli::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "qrng",
    version,
    about = "Simulate, calibrate and post-process a laser-interference QRNG"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// JSON run configuration (exclusive with --preset).
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration; fig1c when neither this nor --config is given.
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Overrides sample_count.
    #[arg(long, global = true, value_name = "N")]
    samples: Option<usize>,
    /// Overrides output_dir.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LowerLimitArg {
    SupportMin,
    NegInfinity,
}

impl From<LowerLimitArg> for LowerLimit {
    fn from(v: LowerLimitArg) -> Self {
        match v {
            LowerLimitArg::SupportMin => LowerLimit::SupportMin,
            LowerLimitArg::NegInfinity => LowerLimit::NegInfinity,
        }
    }
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, default_value_t = qrng_core::sweep::DEFAULT_BITS_PER_STEP)]
    bits_per_step: u64,
    #[arg(long, default_value_t = qrng_core::sweep::DEFAULT_STEPS)]
    sweep_steps: usize,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Previously written curve.json; built from the run config when absent.
    #[arg(long, value_name = "PATH")]
    curve: Option<PathBuf>,
    /// Lower integration limit of the comparator min-entropy.
    #[arg(long, value_enum, default_value = "support-min")]
    lower_limit: LowerLimitArg,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// Recompute the pdf, Γ and thresholds every N samples.
    #[arg(long, value_name = "N")]
    recalibrate_every: Option<u64>,
    /// Sample rate used for the output-rate figure, in Hz.
    #[arg(long, default_value_t = qrng_core::extractor::DEFAULT_INPUT_RATE)]
    input_rate: f64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate signal samples and their histogram.
    Simulate {
        /// Also write samples.csv.
        #[arg(long)]
        samples_csv: bool,
    },
    /// Threshold sweep and the pdf rebuilt from it.
    Sweep {
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Broadening, Γ, threshold and untrusted interval of a pdf.
    Analyze {
        /// Histogram to analyze (.json artifact or CSV); simulated when absent.
        #[arg(long, value_name = "PATH")]
        pdf: Option<PathBuf>,
        #[command(flatten)]
        analyze: AnalyzeArgs,
        /// Comparator draws used to trim the threshold; 0 disables.
        #[arg(long, default_value_t = 0)]
        trim_bits: u64,
    },
    /// Digitize simulated samples with the two-comparator extractor.
    Extract {
        #[command(flatten)]
        extract: ExtractArgs,
    },
    /// Run the statistical battery on extracted bits.
    Test,
    /// sweep, analyze, extract and test in order.
    Pipeline {
        #[command(flatten)]
        sweep: SweepArgs,
        #[command(flatten)]
        analyze: AnalyzeArgs,
        #[command(flatten)]
        extract: ExtractArgs,
        #[arg(long, default_value_t = PIPELINE_TRIM_BITS)]
        trim_bits: u64,
    },
}

fn resolve_config(g: &Global) -> CliResult<RunConfig> {
    let mut cfg = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => g.preset.unwrap_or(Preset::Fig1c).config(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(n) = g.samples {
        cfg.sample_count = n;
    }
    if let Some(out) = &g.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sweep_opts(a: &SweepArgs) -> SweepOpts {
    SweepOpts {
        bits_per_step: a.bits_per_step,
        steps: a.sweep_steps,
    }
}

fn analyze_opts(a: &AnalyzeArgs, pdf: Option<PathBuf>, trim_bits: u64) -> AnalyzeOpts {
    AnalyzeOpts {
        pdf,
        curve: a.curve.clone(),
        lower_limit: a.lower_limit.into(),
        trim_bits,
    }
}

fn extract_opts(a: &ExtractArgs) -> ExtractOpts {
    ExtractOpts {
        recalibrate_every: a.recalibrate_every,
        input_rate: a.input_rate,
    }
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::new("json", e.to_string()))
}

fn run(cli: Cli) -> CliResult<String> {
    let cfg = resolve_config(&cli.global)?;
    match cli.command {
        Command::Simulate { samples_csv } => {
            to_json(&cmd_simulate(&cfg, &SimulateOpts { samples_csv })?)
        }
        Command::Sweep { sweep } => {
            let out = cmd_sweep(&cfg, &sweep_opts(&sweep))?;
            to_json(&serde_json::json!({
                "steps": out.record.thresholds.len() - 1,
                "delta_v": out.record.delta_v,
                "raw_mass": out.raw_mass,
                "gaps": out.gaps,
            }))
        }
        Command::Analyze {
            pdf,
            analyze,
            trim_bits,
        } => {
            let out = cmd_analyze(&cfg, &analyze_opts(&analyze, pdf, trim_bits))?;
            to_json(&out.report)
        }
        Command::Extract { extract } => {
            let out = cmd_extract(&cfg, &extract_opts(&extract))?;
            to_json(&serde_json::json!({
                "bit_count": out.bit_count,
                "gamma": out.gamma,
                "stats": out.stats,
                "keep_rate_check": out.keep_rate_check,
            }))
        }
        Command::Test => Ok(cmd_test(&cfg)?.to_table()),
        Command::Pipeline {
            sweep,
            analyze,
            extract,
            trim_bits,
        } => {
            let opts = PipelineOpts {
                sweep: sweep_opts(&sweep),
                analyze: analyze_opts(&analyze, None, trim_bits),
                extract: extract_opts(&extract),
            };
            to_json(&cmd_pipeline(&cfg, &opts)?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let err = CliError::new("usage", e.to_string().trim_end());
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
