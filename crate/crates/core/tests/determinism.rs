use qrng_core::reduction::CurveConfig;
use qrng_core::rng::Domain;
use qrng_core::sweep::uniform_grid;
use qrng_core::*;

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn fig1c() -> (OpticalConfig, NoiseConfig) {
    (
        OpticalConfig::symmetric(1.0, 1.0),
        NoiseConfig::gaussian(0.05, 0.1),
    )
}

#[test]
fn samples_do_not_depend_on_thread_count() {
    let (opt, noise) = fig1c();
    // spans several chunks with a ragged tail
    let n = 3 * 65_536 + 1234;
    let run = || {
        sample_signals(&opt, &noise, None, n, 42)
            .unwrap()
            .batch
            .values
    };
    let a = in_pool(1, run);
    let b = in_pool(4, run);
    assert_eq!(a.len(), n);
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    let pa = in_pool(1, || estimate_pdf(&a, 128, None).unwrap());
    let pb = in_pool(3, || estimate_pdf(&b, 128, None).unwrap());
    assert_eq!(pa, pb);
}

#[test]
fn prefix_is_stable_when_n_grows() {
    let (opt, noise) = fig1c();
    let short = sample_signals(&opt, &noise, None, 70_000, 9)
        .unwrap()
        .batch
        .values;
    let long = sample_signals(&opt, &noise, None, 140_000, 9)
        .unwrap()
        .batch
        .values;
    assert_eq!(&long[..70_000], &short[..]);
}

#[test]
fn different_seeds_and_domains_differ() {
    let (opt, noise) = fig1c();
    let m = SignalModel::new(&opt, &noise, None).unwrap();
    let (a, _) = m.generate(1, Domain::Signal, 0, 100);
    let (b, _) = m.generate(2, Domain::Signal, 0, 100);
    let (c, _) = m.generate(1, Domain::Extract, 0, 100);
    assert_ne!(a, b);
    assert_ne!(a, c);
}

#[test]
fn sweep_and_curve_do_not_depend_on_thread_count() {
    let (opt, noise) = fig1c();
    let grid = uniform_grid(-0.6, 4.6, 16).unwrap();
    let run = || run_sweep(&opt, &noise, None, &grid, 20_000, 5).unwrap();
    assert_eq!(in_pool(1, run), in_pool(4, run));

    let mut cfg = CurveConfig::calibration(3);
    cfg.sample_count = 100_000;
    cfg.sigma_zeta_grid = vec![0.0, 0.05, 0.1];
    let a = in_pool(1, || build_gamma_curve(&cfg).unwrap());
    let b = in_pool(4, || build_gamma_curve(&cfg).unwrap());
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}
