//! Min-entropy and the quantum reduction factor Γ for comparator and ADC
//! digitization, the broadening estimator B, and the untrusted interval
//! around the comparator threshold.

mod curve;

pub use curve::{
    build_gamma_curve, default_sigma_zeta_grid, gamma_from_b, CurveConfig, CurvePoint, GammaCurve,
};

use serde::{Deserialize, Serialize};

use crate::analytic::AnalyticInterferencePdf;
use crate::density::Density;
use crate::error::{invalid_arg, Error, Result};
use crate::montecarlo::EmpiricalPdf;

/// A value that may be the "infinitely large" sentinel.
///
/// Serializes as a plain number or the string `"infinite"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "ExtendedRepr", into = "ExtendedRepr")]
pub enum Extended {
    Finite(f64),
    Infinite,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum InfiniteTag {
    Infinite,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ExtendedRepr {
    Finite(f64),
    Infinite(InfiniteTag),
}

impl From<ExtendedRepr> for Extended {
    fn from(r: ExtendedRepr) -> Self {
        match r {
            ExtendedRepr::Finite(v) => Extended::Finite(v),
            ExtendedRepr::Infinite(_) => Extended::Infinite,
        }
    }
}

impl From<Extended> for ExtendedRepr {
    fn from(e: Extended) -> Self {
        match e {
            Extended::Finite(v) => ExtendedRepr::Finite(v),
            Extended::Infinite => ExtendedRepr::Infinite(InfiniteTag::Infinite),
        }
    }
}

impl Extended {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Extended::Infinite)
    }

    /// `f64::INFINITY` for the sentinel; for arithmetic and ordering only.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl std::fmt::Display for Extended {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::Infinite => f.write_str("infinite"),
        }
    }
}

/// Lower limit of the min-entropy integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerLimit {
    /// Integrate from the quantum lower bound S_min.
    #[default]
    SupportMin,
    /// Also count the noise mass below S_min.
    NegInfinity,
}

/// H∞ of the quantum arcsine law under a median comparator; exactly 1.
pub fn quantum_min_entropy_comparator(pdf: &AnalyticInterferencePdf) -> Result<f64> {
    if pdf.is_degenerate() {
        return Err(Error::Degenerate("zero-width quantum distribution".into()));
    }
    let mass = pdf.cdf(pdf.s_min + 0.5 * pdf.width) - pdf.cdf(pdf.s_min);
    Ok(-mass.log2())
}

fn interval_min_entropy<D: Density + ?Sized>(
    pdf: &D,
    lo: f64,
    hi: f64,
    limit: LowerLimit,
) -> Result<Extended> {
    let (sup_lo, sup_hi) = pdf.support();
    let lo = match limit {
        LowerLimit::SupportMin => lo,
        LowerLimit::NegInfinity => lo.min(sup_lo),
    };
    if hi < sup_lo || lo > sup_hi {
        return Err(invalid_arg(format!(
            "integration interval [{lo}, {hi}] misses the support [{sup_lo}, {sup_hi}]"
        )));
    }
    let mass = pdf.mass(lo, hi).min(1.0);
    if mass <= 0.0 {
        return Ok(Extended::Infinite);
    }
    Ok(Extended::Finite(-mass.log2()))
}

/// H∞ = −log₂ of the mass on `[s_min, s_min + width/2]`.
pub fn min_entropy_comparator<D: Density + ?Sized>(
    pdf: &D,
    s_min: f64,
    width: f64,
    limit: LowerLimit,
) -> Result<Extended> {
    if !(width > 0.0) {
        return Err(invalid_arg(format!("width must be > 0, got {width}")));
    }
    interval_min_entropy(pdf, s_min, s_min + 0.5 * width, limit)
}

/// Γ = 1/(2 − H∞); H∞ ≥ 2 gives the infinite sentinel.
pub fn gamma_comparator(h_inf: f64) -> Result<Extended> {
    if h_inf.is_nan() || h_inf < 1.0 {
        return Err(invalid_arg(format!(
            "comparator min-entropy must be >= 1, got {h_inf}"
        )));
    }
    if h_inf >= 2.0 {
        return Ok(Extended::Infinite);
    }
    Ok(Extended::Finite(1.0 / (2.0 - h_inf)))
}

/// Γ for an extended-valued H∞.
pub fn gamma_comparator_ext(h_inf: Extended) -> Result<Extended> {
    match h_inf {
        Extended::Infinite => Ok(Extended::Infinite),
        Extended::Finite(h) => gamma_comparator(h),
    }
}

fn check_bin(pdf: &AnalyticInterferencePdf, delta_u: f64) -> Result<()> {
    if !(delta_u > 0.0) {
        return Err(invalid_arg(format!("bin size must be > 0, got {delta_u}")));
    }
    if delta_u >= pdf.width {
        return Err(invalid_arg(format!(
            "bin size {delta_u} must be smaller than the distribution width {}",
            pdf.width
        )));
    }
    Ok(())
}

/// Quantum mass of the lowest ADC bin `[s_min, s_min + Δu]`, the most likely one.
pub fn p_max_adc(pdf: &AnalyticInterferencePdf, delta_u: f64) -> Result<f64> {
    check_bin(pdf, delta_u)?;
    Ok(pdf.cdf(pdf.s_min + delta_u))
}

/// H∞ of the full signal over the lowest ADC bin.
pub fn min_entropy_adc<D: Density + ?Sized>(
    pdf: &D,
    quantum: &AnalyticInterferencePdf,
    delta_u: f64,
    limit: LowerLimit,
) -> Result<Extended> {
    check_bin(quantum, delta_u)?;
    interval_min_entropy(pdf, quantum.s_min, quantum.s_min + delta_u, limit)
}

/// Γ = n/(1 + H∞^Q − H∞); a non-positive denominator gives the sentinel.
pub fn gamma_adc(n: u32, h_inf_q: f64, h_inf: f64) -> Result<Extended> {
    if n == 0 {
        return Err(invalid_arg("ADC resolution must be >= 1 bit"));
    }
    if h_inf.is_nan() || h_inf_q.is_nan() || h_inf < h_inf_q {
        return Err(invalid_arg(format!(
            "min-entropy {h_inf} must not be below the quantum value {h_inf_q}"
        )));
    }
    let denom = 1.0 + h_inf_q - h_inf;
    if denom <= 0.0 {
        return Ok(Extended::Infinite);
    }
    Ok(Extended::Finite(n as f64 / denom))
}

/// Median of the empirical distribution.
pub fn comparator_threshold(pdf: &EmpiricalPdf) -> f64 {
    pdf.quantile(0.5).expect("0.5 is a valid probability")
}

/// Density floor defining the width W.
pub const DEFAULT_DENSITY_FLOOR: f64 = 1e-5;

/// A valley deeper than this fraction of the lower peak makes a pdf bimodal.
const VALLEY_RATIO: f64 = 0.8;

/// Output of [`broadening_factor`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Broadening {
    pub b: f64,
    pub width_w: f64,
    pub peak_left: f64,
    pub peak_right: f64,
    /// Ends of the range where the density exceeds the floor.
    pub region: (f64, f64),
}

fn refine_peak(pdf: &EmpiricalPdf, i: usize) -> f64 {
    let d = pdf.densities();
    let c = pdf.bin_center(i);
    if i == 0 || i + 1 == d.len() {
        return c;
    }
    let (l, m, r) = (d[i - 1], d[i], d[i + 1]);
    let curv = l - 2.0 * m + r;
    if curv >= 0.0 {
        return c;
    }
    let shift = (0.5 * (l - r) / curv).clamp(-0.5, 0.5);
    c + shift * pdf.bin_width(i)
}

fn argmax(d: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in d.iter().enumerate() {
        if v > d[best] {
            best = i;
        }
    }
    best
}

/// B = W/(S₂ − S₁) with W the distance from the first to the last bin edge
/// where the density exceeds `density_floor`, and S₁, S₂ the parabolically
/// refined maxima of the left and right halves of that range.
pub fn broadening_factor(pdf: &EmpiricalPdf, density_floor: f64) -> Result<Broadening> {
    if !(density_floor >= 0.0) {
        return Err(invalid_arg(format!(
            "density floor must be >= 0, got {density_floor}"
        )));
    }
    let d = pdf.densities();
    let (Some(a), Some(b)) = (
        d.iter().position(|&v| v > density_floor),
        d.iter().rposition(|&v| v > density_floor),
    ) else {
        return Err(Error::PeaksNotFound(
            "no bin exceeds the density floor".into(),
        ));
    };
    if b - a < 4 {
        return Err(Error::PeaksNotFound(format!(
            "density above the floor spans only {} bins",
            b - a + 1
        )));
    }
    let lo = pdf.bin_edges()[a];
    let hi = pdf.bin_edges()[b + 1];
    let mid = 0.5 * (lo + hi);
    let split = pdf
        .bin_index(mid)
        .expect("midpoint lies inside the histogram");
    let i1 = a + argmax(&d[a..split]);
    let i2 = split + argmax(&d[split..=b]);
    let valley = d[i1..=i2].iter().copied().fold(f64::INFINITY, f64::min);
    if i2 - i1 < 2 || valley >= VALLEY_RATIO * d[i1].min(d[i2]) {
        return Err(Error::PeaksNotFound(
            "the distribution has no pair of maxima separated by a valley".into(),
        ));
    }
    let (s1, s2) = (refine_peak(pdf, i1), refine_peak(pdf, i2));
    let width_w = hi - lo;
    Ok(Broadening {
        b: width_w / (s2 - s1),
        width_w,
        peak_left: s1,
        peak_right: s2,
        region: (lo, hi),
    })
}

/// Γ from the comparator min-entropy with the left maximum in place of
/// S_min. Overestimates Γ because it ignores the mass below the peak.
pub fn gamma_leftmax(pdf: &EmpiricalPdf, width_hint: f64, density_floor: f64) -> Result<Extended> {
    let est = broadening_factor(pdf, density_floor)?;
    let h = min_entropy_comparator(pdf, est.peak_left, width_hint, LowerLimit::SupportMin)?;
    match h {
        Extended::Infinite => Ok(Extended::Infinite),
        Extended::Finite(h) => gamma_comparator(h.max(1.0)),
    }
}

/// Mass tolerance of the untrusted-interval root finder.
pub const INTERVAL_TOL: f64 = 1e-9;

/// Half-width ΔV_Γ such that the mass on `[v_th, v_th + ΔV_Γ]` equals
/// (Γ − 1)/(2Γ); the discarded band `[v_th − ΔV_Γ, v_th + ΔV_Γ]` then carries
/// P = (Γ − 1)/Γ when the density is symmetric around `v_th`.
pub fn untrusted_interval(pdf: &EmpiricalPdf, v_th: f64, gamma: f64) -> Result<f64> {
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(invalid_arg(format!(
            "Γ must be finite and >= 1, got {gamma}"
        )));
    }
    let (lo, hi) = Density::support(pdf);
    if !(v_th > lo && v_th < hi) {
        return Err(invalid_arg(format!(
            "threshold {v_th} outside the support ({lo}, {hi})"
        )));
    }
    let target = (gamma - 1.0) / (2.0 * gamma);
    if target == 0.0 {
        return Ok(0.0);
    }
    let base = pdf.cdf(v_th);
    if 1.0 - base < target - INTERVAL_TOL || base < target - INTERVAL_TOL {
        return Err(Error::Unreachable(format!(
            "one-sided mass {target} exceeds the mass on one side of the threshold ({base} below, {} above)",
            1.0 - base
        )));
    }
    let (mut a, mut b) = (0.0, hi - v_th);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let mass = pdf.cdf(v_th + m) - base;
        if (mass - target).abs() <= INTERVAL_TOL {
            return Ok(m);
        }
        if mass < target {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Mass on `[v_th − dv, v_th + dv]`.
pub fn discard_mass<D: Density + ?Sized>(pdf: &D, v_th: f64, dv: f64) -> f64 {
    pdf.mass(v_th - dv, v_th + dv)
}

/// Full audit record of one analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    /// Comparator min-entropy of the analyzed pdf over `[S_min, S_min + w/2]`.
    pub h_inf: Extended,
    pub h_inf_q: f64,
    /// Γ read off the Γ(B) curve at the measured B.
    pub gamma: Extended,
    /// Probability of the more likely comparator outcome, 2^−H∞; 0 with an
    /// infinite H∞.
    pub p_max: f64,
    pub broadening_b: f64,
    pub width_w: f64,
    pub peak_left: f64,
    pub peak_right: f64,
    pub v_th: f64,
    /// `None` when Γ is infinite.
    pub dv_gamma: Option<f64>,
    /// Γ from H∞ directly.
    pub gamma_direct: Extended,
    /// Γ with the left maximum substituted for S_min.
    pub gamma_leftmax: Extended,
    /// Set when the left-maximum Γ is 2 or more.
    pub gamma_leftmax_flagged: bool,
    pub lower_limit: LowerLimit,
    pub density_floor: f64,
    pub notes: Vec<String>,
}

/// Settings for [`analyze_pdf`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzeOptions {
    pub density_floor: f64,
    pub lower_limit: LowerLimit,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            density_floor: DEFAULT_DENSITY_FLOOR,
            lower_limit: LowerLimit::SupportMin,
        }
    }
}

/// Threshold, B, Γ and ΔV_Γ for an empirical pdf.
pub fn analyze_pdf(
    pdf: &EmpiricalPdf,
    quantum: &AnalyticInterferencePdf,
    curve: &GammaCurve,
    opts: AnalyzeOptions,
) -> Result<ReductionReport> {
    let mut notes = Vec::new();
    let h_inf_q = quantum_min_entropy_comparator(quantum)?;
    let mut h_inf = min_entropy_comparator(pdf, quantum.s_min, quantum.width, opts.lower_limit)?;
    if let Extended::Finite(h) = h_inf {
        if h < h_inf_q {
            notes.push(format!(
                "estimated H∞ = {h} is below the quantum value through sampling noise; clamped to {h_inf_q}"
            ));
            h_inf = Extended::Finite(h_inf_q);
        }
    }
    let p_max = match h_inf {
        Extended::Finite(h) => (-h).exp2(),
        Extended::Infinite => 0.0,
    };
    if p_max == 0.0 {
        notes.push("no mass on the lower half of the quantum support".into());
    }
    let gamma_direct = gamma_comparator_ext(h_inf)?;
    let est = broadening_factor(pdf, opts.density_floor)?;
    let (b_lo, b_hi) = curve.b_range();
    if est.b < b_lo {
        notes.push(format!("B = {} is below the calibrated range starting at {b_lo}; using the left end of the curve", est.b));
    } else if est.b > b_hi {
        notes.push(format!(
            "B = {} exceeds the calibrated range ending at {b_hi}; Γ is unbounded",
            est.b
        ));
    }
    let gamma = gamma_from_b(curve, est.b)?;
    let gamma_leftmax = gamma_leftmax(pdf, est.peak_right - est.peak_left, opts.density_floor)?;
    let gamma_leftmax_flagged = gamma_leftmax.to_f64() >= 2.0;
    if gamma_leftmax_flagged {
        notes.push(format!("left-maximum Γ = {gamma_leftmax} is unreasonably high; it overestimates Γ by construction"));
    }
    let v_th = comparator_threshold(pdf);
    let dv_gamma = match gamma {
        Extended::Finite(g) => Some(untrusted_interval(pdf, v_th, g)?),
        Extended::Infinite => None,
    };
    Ok(ReductionReport {
        h_inf,
        h_inf_q,
        gamma,
        p_max,
        broadening_b: est.b,
        width_w: est.width_w,
        peak_left: est.peak_left,
        peak_right: est.peak_right,
        v_th,
        dv_gamma,
        gamma_direct,
        gamma_leftmax,
        gamma_leftmax_flagged,
        lower_limit: opts.lower_limit,
        density_floor: opts.density_floor,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::SmearedInterferencePdf;

    fn unit() -> AnalyticInterferencePdf {
        AnalyticInterferencePdf::new(0.0, 4.0).unwrap()
    }

    #[test]
    fn quantum_min_entropy_is_one() {
        assert_eq!(quantum_min_entropy_comparator(&unit()).unwrap(), 1.0);
        let p = AnalyticInterferencePdf::from_intensities(1.0, 1.0, 0.6).unwrap();
        assert!((quantum_min_entropy_comparator(&p).unwrap() - 1.0).abs() < 1e-15);
        let flat = AnalyticInterferencePdf::from_intensities(1.0, 1.0, 0.0).unwrap();
        assert!(quantum_min_entropy_comparator(&flat).is_err());
    }

    #[test]
    fn gamma_comparator_values() {
        assert_eq!(gamma_comparator(1.0).unwrap(), Extended::Finite(1.0));
        assert_eq!(gamma_comparator(1.5).unwrap(), Extended::Finite(2.0));
        assert_eq!(gamma_comparator(2.0).unwrap(), Extended::Infinite);
        assert!(gamma_comparator(0.99).is_err());
        assert!(gamma_comparator(f64::NAN).is_err());
    }

    #[test]
    fn gamma_adc_values() {
        for h in [1.0, 1.2, 1.5, 1.9, 2.0] {
            assert_eq!(gamma_adc(1, 1.0, h).unwrap(), gamma_comparator(h).unwrap());
        }
        assert_eq!(gamma_adc(8, 3.0, 3.0).unwrap(), Extended::Finite(8.0));
        assert_eq!(gamma_adc(4, 2.0, 3.0).unwrap(), Extended::Infinite);
        assert!(gamma_adc(4, 2.0, 1.0).is_err());
        assert!(gamma_adc(0, 1.0, 1.0).is_err());
    }

    #[test]
    fn adc_bin_probability() {
        let p = unit();
        assert_eq!(p_max_adc(&p, 2.0).unwrap(), 0.5);
        let du: f64 = 4.0 / 256.0;
        let expected = 1.0 - (du / 2.0 - 1.0).acos() / std::f64::consts::PI;
        assert!((p_max_adc(&p, du).unwrap() - expected).abs() < 1e-15);
        // the lowest bin is the most likely one
        let masses: Vec<f64> = (0..256)
            .map(|k| p.cdf((k + 1) as f64 * du) - p.cdf(k as f64 * du))
            .collect();
        let best = masses.iter().copied().fold(0.0, f64::max);
        assert_eq!(best, masses[0]);
        assert!(p_max_adc(&p, 4.0).is_err());
        assert!(p_max_adc(&p, 0.0).is_err());
    }

    #[test]
    fn noise_raises_min_entropy() {
        let q = unit();
        let s = SmearedInterferencePdf::new(q, 0.1).unwrap();
        let h = min_entropy_comparator(&s, q.s_min, q.width, LowerLimit::SupportMin).unwrap();
        assert!(h.to_f64() > 1.0);
        let h_all = min_entropy_comparator(&s, q.s_min, q.width, LowerLimit::NegInfinity).unwrap();
        assert!((h_all.to_f64() - 1.0).abs() < 1e-9);
        let h_adc = min_entropy_adc(&s, &q, 4.0 / 256.0, LowerLimit::SupportMin).unwrap();
        assert!(h_adc.to_f64() > -p_max_adc(&q, 4.0 / 256.0).unwrap().log2());
        let h_q = min_entropy_comparator(&q, q.s_min, q.width, LowerLimit::SupportMin).unwrap();
        assert!((h_q.to_f64() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extended_serializes_sentinel_as_string() {
        assert_eq!(
            serde_json::to_string(&Extended::Infinite).unwrap(),
            "\"infinite\""
        );
        assert_eq!(
            serde_json::to_string(&Extended::Finite(1.25)).unwrap(),
            "1.25"
        );
        let back: Extended = serde_json::from_str("\"infinite\"").unwrap();
        assert_eq!(back, Extended::Infinite);
        assert!(serde_json::from_str::<Extended>("\"inf\"").is_err());
    }

    fn uniform_pdf() -> EmpiricalPdf {
        let edges: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        EmpiricalPdf::from_parts(edges, vec![1.0; 100], 0).unwrap()
    }

    #[test]
    fn untrusted_interval_masses() {
        let pdf = uniform_pdf();
        assert_eq!(untrusted_interval(&pdf, 0.5, 1.0).unwrap(), 0.0);
        let dv = untrusted_interval(&pdf, 0.5, 1.25).unwrap();
        assert!((dv - 0.1).abs() < 1e-8);
        assert!((discard_mass(&pdf, 0.5, dv) - 0.2).abs() < 2e-9);
        let dv2 = untrusted_interval(&pdf, 0.5, 2.0).unwrap();
        assert!((dv2 - 0.25).abs() < 1e-8);
        assert!(matches!(
            untrusted_interval(&pdf, 0.1, 2.0),
            Err(Error::Unreachable(_))
        ));
        assert!(untrusted_interval(&pdf, 0.5, f64::INFINITY).is_err());
        assert!(untrusted_interval(&pdf, 2.0, 1.5).is_err());
    }

    #[test]
    fn threshold_is_median() {
        let pdf = uniform_pdf();
        assert!((comparator_threshold(&pdf) - 0.5).abs() < 1e-12);
    }

    fn binned_arcsine(bins: usize) -> EmpiricalPdf {
        let q = unit();
        let edges: Vec<f64> = (0..=bins).map(|i| 4.0 * i as f64 / bins as f64).collect();
        let d = edges
            .windows(2)
            .map(|w| (q.cdf(w[1]) - q.cdf(w[0])) / (w[1] - w[0]))
            .collect();
        EmpiricalPdf::from_parts(edges, d, 0).unwrap()
    }

    #[test]
    fn broadening_of_noiseless_arcsine() {
        let pdf = binned_arcsine(256);
        let est = broadening_factor(&pdf, DEFAULT_DENSITY_FLOOR).unwrap();
        assert!(est.peak_left > 0.0 && est.peak_left < 0.02);
        assert!(est.peak_right < 4.0 && est.peak_right > 3.98);
        assert!((est.width_w - 4.0).abs() < 1e-12);
        assert!(est.b > 1.0 && est.b < 1.01);
        let g = gamma_leftmax(&pdf, 4.0, DEFAULT_DENSITY_FLOOR).unwrap();
        assert!(g.to_f64() >= 1.0 && g.to_f64() < 1.1);
        assert!((comparator_threshold(&pdf) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unimodal_pdf_has_no_peaks() {
        let edges: Vec<f64> = (0..=64).map(|i| i as f64 / 8.0 - 4.0).collect();
        let d = edges
            .windows(2)
            .map(|w| {
                let x = 0.5 * (w[0] + w[1]);
                (-0.5 * x * x).exp()
            })
            .collect();
        let pdf = EmpiricalPdf::from_parts(edges, d, 0).unwrap();
        assert!(matches!(
            broadening_factor(&pdf, DEFAULT_DENSITY_FLOOR),
            Err(Error::PeaksNotFound(_))
        ));
        let flat = uniform_pdf();
        assert!(matches!(
            broadening_factor(&flat, DEFAULT_DENSITY_FLOOR),
            Err(Error::PeaksNotFound(_))
        ));
    }
}
