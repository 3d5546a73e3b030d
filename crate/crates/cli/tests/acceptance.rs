//! Acceptance suite: one line per criterion with its measured values and
//! pinned tolerance. Runs without the libtest harness so the lines are always
//! printed; the process fails if any criterion fails.

use std::f64::consts::PI;

type Criterion = (&'static str, fn() -> Outcome, u64);
type CdfCase<'a> = (&'a dyn Fn(f64) -> f64, f64, f64);
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use qrng_cli::commands::{cmd_pipeline, PipelineOpts};
use qrng_cli::config::Preset;
use qrng_core::analytic::DEFAULT_THETA_TERMS;
use qrng_core::density::SmearedInterferencePdf;
use qrng_core::extractor::{extract_simulated, Rule};
use qrng_core::quad::{normal_cdf, CompositeGauss};
use qrng_core::reduction::CurveConfig;
use qrng_core::rng::{stream_rng, Domain};
use qrng_core::stats_tests::unpack_bits;
use qrng_core::sweep::{density_from_ratios, uniform_grid};
use qrng_core::*;
use rand::RngCore;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// ∫ f over (lo, hi) for densities with inverse-square-root edges: x = lo + t²
/// on the left half and x = hi − t² on the right half remove the singularity.
fn integrate_edges(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let g = CompositeGauss::new(20, 64);
    let mid = 0.5 * (lo + hi);
    let r = (mid - lo).sqrt();
    g.integrate(0.0, r, |t| 2.0 * t * f(lo + t * t))
        + g.integrate(0.0, r, |t| 2.0 * t * f(hi - t * t))
}

fn c1_arcsine_exactness() -> Outcome {
    let mut worst_int = 0.0f64;
    let mut worst_h = 0.0f64;
    let mut worst_fd = 0.0f64;
    for &(s1, s2, eta) in &[
        (1.0, 1.0, 1.0),
        (1.0, 1.0, 0.95),
        (0.7, 1.6, 0.6),
        (2.0, 0.3, 0.9),
    ] {
        let q = AnalyticInterferencePdf::from_intensities(s1, s2, eta).unwrap();
        let f = |x: f64| q.pdf(x).unwrap();
        worst_int = worst_int.max((integrate_edges(f, q.s_min, q.s_max) - 1.0).abs());
        // mass of the lower half by quadrature, independent of the closed-form cdf
        let lower = {
            let g = CompositeGauss::new(20, 64);
            let r = (0.5 * q.width).sqrt();
            g.integrate(0.0, r, |t| 2.0 * t * f(q.s_min + t * t))
        };
        worst_h = worst_h
            .max((quantum_min_entropy_comparator(&q).unwrap() - 1.0).abs())
            .max((-lower.log2() - 1.0).abs());
        let h = 1e-5 * q.width;
        for i in 1..200 {
            let x = q.s_min + q.width * (0.01 + 0.98 * i as f64 / 200.0);
            let fd = (q.cdf(x + h) - q.cdf(x - h)) / (2.0 * h);
            worst_fd = worst_fd.max(((fd - f(x)) / f(x)).abs());
        }
    }
    outcome(
        worst_int <= 1e-9 && worst_h <= 1e-9 && worst_fd <= 1e-6,
        format!("|∫f−1| = {worst_int:.1e} (≤ 1e-9), |H∞Q−1| = {worst_h:.1e} (≤ 1e-9), cdf/pdf rel = {worst_fd:.1e} (≤ 1e-6)"),
    )
}

fn c2_uniformity() -> Outcome {
    let sigma = 2.0 * PI;
    let wp = WrappedPhasePdf::new(sigma, 0.0, DEFAULT_THETA_TERMS).unwrap();
    let two_q = 2.0 * (-sigma * sigma / 2.0).exp();
    let n = 100_000;
    let sup = (0..n)
        .map(|i| (wp.eval(PI * i as f64 / n as f64) - 1.0 / PI).abs())
        .fold(0.0, f64::max);
    let margin = uniformity_margin(sigma / 2f64.sqrt()).unwrap();
    // f(0) − 1/π = (2q + 2q⁴ + …)/π sits on the bound up to q⁴ ≈ 1e-37, far
    // below what doubles near 1/π resolve; allow a few ulps of rounding.
    let rounding = 8.0 * f64::EPSILON / PI;
    let pass = sup <= two_q / PI + rounding
        && (margin.two_q - two_q).abs() <= 1e-12 * two_q
        && two_q < 1e-8;
    outcome(
        pass,
        format!(
            "sup|f−1/π| − 2q/π = {:.1e} (≤ {rounding:.1e} rounding); 2q = {two_q:.3e} (order 1e-8)",
            sup - two_q / PI
        ),
    )
}

/// Kolmogorov distribution tail, 2 Σ (−1)^{k−1} exp(−2k²λ²).
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

fn ks_p(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    (d, kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d))
}

fn c3_monte_carlo_fidelity() -> Outcome {
    let cfg = OpticalConfig::symmetric(1.0, 1.0);
    let q = interference_bounds(&cfg, None).unwrap();
    let xs = sample_signals(&cfg, &NoiseConfig::noiseless(), None, 1_000_000, 1)
        .unwrap()
        .batch
        .values;
    let (d, p) = ks_p(xs, |x| q.cdf(x));

    let noisy = sample_signals(&cfg, &NoiseConfig::gaussian(0.05, 0.1), None, 1_000_000, 2)
        .unwrap()
        .batch
        .values;
    let pdf = estimate_pdf(&noisy, 256, None).unwrap();
    let (mut left, mut right) = (0.0f64, 0.0f64);
    for i in 0..pdf.n_bins() {
        let c = pdf.bin_center(i);
        if c < q.center() {
            left = left.max(pdf.densities()[i]);
        } else {
            right = right.max(pdf.densities()[i]);
        }
    }
    outcome(
        p >= 0.001 && left > right,
        format!(
            "KS D = {d:.2e}, p = {p:.3} (≥ 0.001); left peak {left:.3} > right peak {right:.3}"
        ),
    )
}

fn c4_chirp_jitter() -> Outcome {
    let run = |jitter: f64| {
        let mut cfg = OpticalConfig::symmetric(1.0, 1.0);
        cfg.visibility = None;
        let chirp = ChirpJitterConfig {
            alpha: 6.0,
            pulse_width: 50e-12,
            overlap_offset: 0.0,
        };
        let mut noise = NoiseConfig::gaussian(0.05, 0.1);
        noise.sigma_jitter = jitter;
        let xs = sample_signals(&cfg, &noise, Some(&chirp), 10_000_000, 4)
            .unwrap()
            .batch
            .values;
        let pdf = estimate_pdf(&xs, 256, None).unwrap();
        let center = cfg.s1_mean + cfg.s2_mean;
        let c = pdf.bin_index(center).unwrap() as i64;
        let maxima = pdf.prominent_maxima(9, 12, 0.05);
        maxima.iter().any(|&m| (m as i64 - c).abs() <= 2)
    };
    let at20 = run(20e-12);
    let at5 = run(5e-12);
    outcome(
        at20 && !at5,
        format!("central maximum within 2 bins of s1+s2: 20 ps {at20} (want true), 5 ps {at5} (want false)"),
    )
}

fn c5_sweep() -> Outcome {
    let mut worst = 0.0f64;
    let q = AnalyticInterferencePdf::new(0.0, 4.0).unwrap();
    let cdfs: [CdfCase; 3] = [
        (&|x: f64| x.clamp(0.0, 1.0), 0.01, 0.99),
        (&|x: f64| normal_cdf((x - 0.3) / 0.7), -2.5, 3.1),
        (&|x: f64| q.cdf(x), 0.001, 3.999),
    ];
    for (cdf, lo, hi) in cdfs {
        let grid = uniform_grid(lo, hi, 128).unwrap();
        let dv = grid[1] - grid[0];
        for w in grid.windows(2) {
            let (fa, fb) = (cdf(w[0]), cdf(w[1]));
            let got = density_from_ratios((1.0 - fa) / fa, (1.0 - fb) / fb, dv);
            let want = (fb - fa) / dv;
            worst = worst.max((got - want).abs() / want.abs().max(1.0));
        }
    }

    let cfg = OpticalConfig::symmetric(1.0, 1.0);
    let noise = NoiseConfig::gaussian(0.05, 0.1);
    let xs = sample_signals(&cfg, &noise, None, 10_000_000, 6)
        .unwrap()
        .batch
        .values;
    let steps = 24;
    let grid = uniform_grid(-0.6, 4.6, steps).unwrap();
    let rec = run_sweep(&cfg, &noise, None, &grid, 100_000, 6).unwrap();
    let r = reconstruct_pdf(&rec).unwrap();
    let edges = r.pdf.bin_edges();
    let direct = estimate_pdf(
        &xs,
        r.pdf.n_bins(),
        Some((edges[0], edges[edges.len() - 1])),
    )
    .unwrap();
    let l1: f64 = (0..r.pdf.n_bins())
        .map(|i| (r.pdf.densities()[i] - direct.densities()[i]).abs() * r.pdf.bin_width(i))
        .sum();
    outcome(
        worst <= 1e-12 && l1 <= 0.05,
        format!("ratio identity max err {worst:.1e} (≤ 1e-12); L1 = {l1:.4} (≤ 0.05) at 10^5 bits/step, {steps} steps"),
    )
}

fn c6_gamma_formulas() -> Outcome {
    let g1 = gamma_comparator(1.0).unwrap();
    let g15 = gamma_comparator(1.5).unwrap();
    let g2 = gamma_comparator(2.0).unwrap();
    let formulas = g1 == Extended::Finite(1.0) && g15 == Extended::Finite(2.0) && g2.is_infinite();

    let q = AnalyticInterferencePdf::from_intensities(1.0, 1.0, 0.95).unwrap();
    let mut adc_ok = true;
    for i in 0..=10 {
        let sz = 0.02 * i as f64;
        let smeared = SmearedInterferencePdf::new(q, sz).unwrap();
        let du = q.width / 2.0;
        let hq = -p_max_adc(&q, du).unwrap().log2();
        let h = min_entropy_adc(&smeared, &q, du, LowerLimit::SupportMin)
            .unwrap()
            .to_f64();
        let hc = min_entropy_comparator(&smeared, q.s_min, q.width, LowerLimit::SupportMin)
            .unwrap()
            .to_f64();
        let hq_c = quantum_min_entropy_comparator(&q).unwrap();
        let adc = gamma_adc(1, hq, h.max(hq));
        let cmp = gamma_comparator(hc.max(hq_c));
        adc_ok &= h == hc && hq == hq_c && adc.unwrap() == cmp.unwrap();
    }

    // Monte-Carlo H∞ against H∞Q on the calibration setup, 20 nonzero σ_ζ
    let n = 1_000_000usize;
    let model = SignalModel::new(&q_cfg(), &NoiseConfig::gaussian(0.05, 0.0), None).unwrap();
    let (clean, z, _) = model.generate_parts(21, Domain::Signal, 0, n);
    let mut worst_margin = f64::INFINITY;
    let mut values = vec![0.0; n];
    for i in 1..=20 {
        let sz = 0.0125 * i as f64;
        for ((v, c), zz) in values.iter_mut().zip(&clean).zip(&z) {
            *v = c + sz * zz;
        }
        let mass = values
            .iter()
            .filter(|&&v| v >= q.s_min && v <= q.s_min + 0.5 * q.width)
            .count() as f64
            / n as f64;
        let h = -mass.log2();
        let sd = (mass * (1.0 - mass) / n as f64).sqrt() / (mass * std::f64::consts::LN_2);
        worst_margin = worst_margin.min((h - 1.0) / sd);
    }
    outcome(
        formulas && adc_ok && worst_margin >= -3.0,
        format!(
            "Γ(1)=1, Γ(1.5)=2, Γ(2)=∞: {formulas}; ADC n=1 ≡ comparator: {adc_ok}; min (H∞−H∞Q)/sd over 20 σ_ζ = {worst_margin:.1} (≥ −3)"
        ),
    )
}

fn q_cfg() -> OpticalConfig {
    OpticalConfig::symmetric(1.0, 0.95)
}

fn c7_gamma_anchor() -> Outcome {
    let curve = build_gamma_curve(&CurveConfig::calibration(1)).unwrap();
    let monotone = curve
        .points
        .windows(2)
        .all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1);
    let g = gamma_from_b(&curve, 1.77).unwrap();
    let (lo, hi) = curve.b_range();
    outcome(
        monotone && g.finite().is_some_and(|g| (1.10..=1.45).contains(&g)),
        format!("monotone {monotone}, B range [{lo:.3}, {hi:.3}], Γ(1.77) = {g} (in [1.10, 1.45])"),
    )
}

fn c8_extractor() -> Outcome {
    let bank = configure_bank(2.0, 0.3).unwrap();
    let n = 100_000;
    let mut agree = true;
    let mut xs = Vec::with_capacity(n + 2);
    for i in 0..n {
        let s = bank.v_th1 - 0.1 + (bank.v_th2 - bank.v_th1 + 0.2) * i as f64 / (n - 1) as f64;
        xs.push(s);
    }
    xs.extend([bank.v_th1, bank.v_th2]);
    for &s in &xs {
        agree &= bank.classify(s, Rule::Xor) == bank.classify(s, Rule::Interval);
    }
    let (bs, _) = digitize_and_extract(&xs, &bank, 1.0);
    let counted = bs.produced + bs.discarded == bs.consumed;
    let grid_points = xs.len();

    let cfg = OpticalConfig::symmetric(1.0, 1.0);
    let noise = NoiseConfig::gaussian(0.05, 0.1);
    let model = SignalModel::new(&cfg, &noise, None).unwrap();
    let (xs, _) = model.generate(8, Domain::Signal, 0, 10_000_000);
    let pdf = estimate_pdf(&xs, 256, None).unwrap();
    let v_th = comparator_threshold(&pdf);
    let dv = untrusted_interval(&pdf, v_th, 1.25).unwrap();
    let bank = configure_bank(v_th, dv).unwrap();
    let ex = extract_simulated(&model, 8, 10_000_000, bank, None, |_| unreachable!()).unwrap();
    let bits = ex.finish();
    let stats = bits.stats(extractor::DEFAULT_INPUT_RATE);
    let keep_ok = (stats.keep_rate - 0.8).abs() <= 0.005;
    let counted = counted && bits.produced + bits.discarded == bits.consumed;
    outcome(
        agree && counted && keep_ok,
        format!(
            "XOR ≡ interval on {} points: {agree}; produced+discarded=consumed: {counted}; keep rate {:.4} (0.800 ± 0.005) → {:.3} Gbps at 2.5 GHz",
            grid_points,
            stats.keep_rate,
            stats.implied_output_rate / 1e9
        ),
    )
}

fn c9_battery() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut passes = 0;
    let mut fails = Vec::new();
    for seed in 1..=10u64 {
        let mut cfg = Preset::Fig1c.config();
        cfg.seed = seed;
        // enough samples for 10^6 kept bits at any plausible keep rate
        cfg.sample_count = 1_300_000;
        cfg.output_dir = dir.path().join(format!("s{seed}"));
        cmd_pipeline(&cfg, &PipelineOpts::default()).unwrap();
        let bytes = std::fs::read(cfg.output_dir.join("bits.bin")).unwrap();
        let bits = unpack_bits(&bytes, 1_000_000).unwrap();
        let report = run_default_battery(&bits).unwrap();
        if report.overall_pass {
            passes += 1;
        } else {
            fails.push(seed);
        }
    }

    // ideal generator: p-values of each test should be uniform
    let runs = 200;
    let len = 1_000_000;
    let mut pvals: Vec<Vec<f64>> = Vec::new();
    let mut names = Vec::new();
    for r in 0..runs {
        let mut rng = stream_rng(0x5eed, Domain::Bits, r);
        let mut bytes = vec![0u8; len / 8];
        rng.fill_bytes(&mut bytes);
        let bits = unpack_bits(&bytes, len).unwrap();
        let report = run_default_battery(&bits).unwrap();
        if pvals.is_empty() {
            pvals = vec![Vec::new(); report.tests.len()];
            names = report.tests.iter().map(|t| t.name.clone()).collect();
        }
        for (k, t) in report.tests.iter().enumerate() {
            if let Some(p) = t.p_value {
                pvals[k].push(p);
            }
        }
    }
    let mut min_p = 1.0f64;
    let mut worst = String::new();
    for (k, ps) in pvals.into_iter().enumerate() {
        let (_, p) = ks_p(ps, |x| x.clamp(0.0, 1.0));
        if p < min_p {
            min_p = p;
            worst = names[k].clone();
        }
    }
    outcome(
        passes >= 9 && min_p >= 0.001,
        format!(
            "pipeline 1-Mbit battery passes {passes}/10 (≥ 9, failing seeds {fails:?}); ideal p-values KS min p = {min_p:.3} ({worst}, ≥ 0.001)"
        ),
    )
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let qrng = env!("CARGO_BIN_EXE_qrng");
    let common = [
        "--preset",
        "fig1c",
        "--seed",
        "77",
        "--samples",
        "200000",
        "--out",
    ];
    let stages: [&[&str]; 6] = [
        &["simulate", "--samples-csv"],
        &["sweep", "--sweep-steps", "32"],
        &["analyze", "--trim-bits", "1000000"],
        &["extract"],
        &["test"],
        &["pipeline", "--sweep-steps", "32", "--trim-bits", "1000000"],
    ];
    let mut identical = true;
    let mut checked = 0;
    for stage in stages {
        let mut snapshots = Vec::new();
        for _ in 0..2 {
            let status = Command::new(qrng)
                .args(stage)
                .args(common)
                .arg(&out)
                .output()
                .unwrap();
            if !status.status.success() {
                return outcome(
                    false,
                    format!(
                        "{stage:?} failed: {}",
                        String::from_utf8_lossy(&status.stderr)
                    ),
                );
            }
            snapshots.push(artifacts(&out));
        }
        identical &= snapshots[0] == snapshots[1];
        checked = snapshots[1].len();
    }
    outcome(
        identical,
        format!("6 stages rerun, {checked} artifacts byte-identical: {identical}"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("arcsine model exactness", c1_arcsine_exactness, 1),
        ("phase uniformity bound", c2_uniformity, 1),
        ("Monte-Carlo fidelity", c3_monte_carlo_fidelity, 30),
        ("chirp and jitter central peak", c4_chirp_jitter, 60),
        ("sweep reconstruction", c5_sweep, 60),
        ("Γ formulas", c6_gamma_formulas, 120),
        ("Γ(B) anchor", c7_gamma_anchor, 120),
        ("extractor identities", c8_extractor, 60),
        ("statistical battery", c9_battery, 120),
        ("determinism", c10_determinism, 60),
    ];
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        let dt = t.elapsed();
        let in_time = dt <= Duration::from_secs(*budget);
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {:>2}. {name}: {}; {:.1} s (< {budget} s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            dt.as_secs_f64()
        );
    }
    println!("acceptance: {}/10 passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
