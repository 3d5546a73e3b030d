use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::Density;
use crate::error::{invalid_arg, Error, Result};

pub const DEFAULT_BINS: usize = 256;
pub const MIN_BINS: usize = 16;

/// Normalized histogram density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PdfRepr", into = "PdfRepr")]
pub struct EmpiricalPdf {
    bin_edges: Vec<f64>,
    densities: Vec<f64>,
    sample_count: u64,
    /// Mass below each edge; `cumulative[0] == 0`, last == 1.
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PdfRepr {
    bin_edges: Vec<f64>,
    densities: Vec<f64>,
    sample_count: u64,
}

impl TryFrom<PdfRepr> for EmpiricalPdf {
    type Error = Error;
    fn try_from(r: PdfRepr) -> Result<Self> {
        EmpiricalPdf::from_parts(r.bin_edges, r.densities, r.sample_count)
    }
}

impl From<EmpiricalPdf> for PdfRepr {
    fn from(p: EmpiricalPdf) -> Self {
        PdfRepr {
            bin_edges: p.bin_edges,
            densities: p.densities,
            sample_count: p.sample_count,
        }
    }
}

impl EmpiricalPdf {
    /// Validate and renormalize `densities` so the histogram integrates to 1.
    pub fn from_parts(bin_edges: Vec<f64>, densities: Vec<f64>, sample_count: u64) -> Result<Self> {
        if densities.is_empty() || bin_edges.len() != densities.len() + 1 {
            return Err(invalid_arg(format!(
                "{} edges do not bound {} bins",
                bin_edges.len(),
                densities.len()
            )));
        }
        if bin_edges.iter().any(|e| !e.is_finite()) || bin_edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid_arg(
                "bin edges must be finite and strictly increasing",
            ));
        }
        if densities.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(invalid_arg("densities must be finite and >= 0"));
        }
        let total: f64 = densities
            .iter()
            .zip(bin_edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum();
        if total <= 0.0 {
            return Err(Error::Degenerate("histogram carries no mass".into()));
        }
        let densities: Vec<f64> = densities.into_iter().map(|d| d / total).collect();
        let mut cumulative = Vec::with_capacity(bin_edges.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for (d, w) in densities.iter().zip(bin_edges.windows(2)) {
            acc += d * (w[1] - w[0]);
            cumulative.push(acc);
        }
        *cumulative.last_mut().expect("non-empty") = 1.0;
        Ok(Self {
            bin_edges,
            densities,
            sample_count,
            cumulative,
        })
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    pub fn n_bins(&self) -> usize {
        self.densities.len()
    }

    pub fn bin_width(&self, i: usize) -> f64 {
        self.bin_edges[i + 1] - self.bin_edges[i]
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        0.5 * (self.bin_edges[i] + self.bin_edges[i + 1])
    }

    pub fn bin_mass(&self, i: usize) -> f64 {
        self.densities[i] * self.bin_width(i)
    }

    pub fn integral(&self) -> f64 {
        (0..self.n_bins()).map(|i| self.bin_mass(i)).sum()
    }

    /// Index of the bin containing `x` (half-open bins, last bin closed).
    pub fn bin_index(&self, x: f64) -> Option<usize> {
        let (lo, hi) = (
            self.bin_edges[0],
            *self.bin_edges.last().expect("non-empty"),
        );
        if !(lo..=hi).contains(&x) {
            return None;
        }
        let i = self.bin_edges.partition_point(|&e| e <= x);
        Some(i.saturating_sub(1).min(self.n_bins() - 1))
    }

    /// Density at `x`, 0 outside the histogram range.
    pub fn density_at(&self, x: f64) -> f64 {
        self.bin_index(x).map_or(0.0, |i| self.densities[i])
    }

    /// Piecewise-linear CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        match self.bin_index(x) {
            None if x < self.bin_edges[0] => 0.0,
            None => 1.0,
            Some(i) => (self.cumulative[i] + self.densities[i] * (x - self.bin_edges[i])).min(1.0),
        }
    }

    /// Smallest `x` with `cdf(x) = p`, interpolating linearly inside the bin.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid_arg(format!("probability {p} outside [0, 1]")));
        }
        let j = self.cumulative.partition_point(|&c| c < p);
        if j == 0 {
            return Ok(self.bin_edges[0]);
        }
        let i = j - 1;
        let d = self.densities[i];
        if d == 0.0 {
            return Ok(self.bin_edges[i + 1]);
        }
        Ok((self.bin_edges[i] + (p - self.cumulative[i]) / d).min(self.bin_edges[i + 1]))
    }

    /// Centered moving average with an odd `window`; edge bins average what is available.
    pub fn smoothed(&self, window: usize) -> Vec<f64> {
        let half = window / 2;
        let n = self.n_bins();
        (0..n)
            .map(|i| {
                let a = i.saturating_sub(half);
                let b = (i + half + 1).min(n);
                self.densities[a..b].iter().sum::<f64>() / (b - a) as f64
            })
            .collect()
    }

    /// Bins that are the highest point within `reach` bins of the smoothed
    /// density and exceed the lowest point on both sides of that neighbourhood
    /// by the factor `1 + rel_prominence`.
    pub fn prominent_maxima(&self, window: usize, reach: usize, rel_prominence: f64) -> Vec<usize> {
        let s = self.smoothed(window);
        let n = s.len();
        let mut out = Vec::new();
        for i in 0..n {
            if s[i] <= 0.0 {
                continue;
            }
            let a = i.saturating_sub(reach);
            let b = (i + reach + 1).min(n);
            let left_ok = s[a..i].iter().all(|&v| v < s[i]);
            let right_ok = s[i + 1..b].iter().all(|&v| v <= s[i]);
            if !(left_ok && right_ok) {
                continue;
            }
            let left_min = s[a..i].iter().copied().fold(f64::INFINITY, f64::min);
            let right_min = s[i + 1..b].iter().copied().fold(f64::INFINITY, f64::min);
            let left_min = if i == 0 { 0.0 } else { left_min };
            let right_min = if i + 1 == n { 0.0 } else { right_min };
            if s[i] >= (1.0 + rel_prominence) * left_min.max(right_min) {
                out.push(i);
            }
        }
        out
    }

    /// CSV with columns `bin_left,bin_right,density`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,density\n");
        for (i, d) in self.densities.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.bin_edges[i],
                self.bin_edges[i + 1],
                d
            ));
        }
        out
    }

    /// Parse the CSV written by [`to_csv`](Self::to_csv). Bins must be contiguous.
    pub fn from_csv(text: &str, sample_count: u64) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next().map(str::trim) {
            Some("bin_left,bin_right,density") => {}
            other => return Err(Error::Parse(format!("unexpected pdf CSV header {other:?}"))),
        }
        let mut edges = Vec::new();
        let mut densities = Vec::new();
        for (n, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected 3 columns", n + 2)));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {s:?}: {e}", n + 2)))
            };
            let (l, r, d) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
            match edges.last() {
                None => edges.push(l),
                Some(&prev) if prev != l => {
                    return Err(Error::Parse(format!(
                        "line {}: bins are not contiguous",
                        n + 2
                    )));
                }
                Some(_) => {}
            }
            edges.push(r);
            densities.push(d);
        }
        Self::from_parts(edges, densities, sample_count)
    }
}

impl Density for EmpiricalPdf {
    fn cdf(&self, x: f64) -> f64 {
        EmpiricalPdf::cdf(self, x)
    }

    fn support(&self) -> (f64, f64) {
        (
            self.bin_edges[0],
            *self.bin_edges.last().expect("non-empty"),
        )
    }
}

/// Histogram `values` into `bin_count` equal bins over `range`, or over the
/// sample range widened by a relative 1e-9 when `range` is `None`.
/// Samples outside an explicit range are ignored.
pub fn estimate_pdf(
    values: &[f64],
    bin_count: usize,
    range: Option<(f64, f64)>,
) -> Result<EmpiricalPdf> {
    if bin_count < MIN_BINS {
        return Err(invalid_arg(format!(
            "bin count must be >= {MIN_BINS}, got {bin_count}"
        )));
    }
    if values.is_empty() {
        return Err(invalid_arg("empty sample batch"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid_arg("samples must be finite"));
    }
    let (lo, hi) = match range {
        Some((lo, hi)) => {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(invalid_arg(format!("invalid histogram range [{lo}, {hi}]")));
            }
            (lo, hi)
        }
        None => {
            let (mn, mx) = values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                    (a.min(v), b.max(v))
                });
            let eps = 1e-9 * (mx - mn).max(mn.abs()).max(mx.abs()).max(1.0);
            (mn - eps, mx + eps)
        }
    };
    let w = (hi - lo) / bin_count as f64;
    let counts = values
        .par_chunks(1 << 16)
        .map(|chunk| {
            let mut c = vec![0u64; bin_count];
            for &v in chunk {
                if v < lo || v > hi {
                    continue;
                }
                let i = (((v - lo) / w) as usize).min(bin_count - 1);
                c[i] += 1;
            }
            c
        })
        .reduce(
            || vec![0u64; bin_count],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(invalid_arg("no samples inside the histogram range"));
    }
    let edges: Vec<f64> = (0..=bin_count)
        .map(|i| {
            if i == bin_count {
                hi
            } else {
                lo + i as f64 * w
            }
        })
        .collect();
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, e)| c as f64 / (total as f64 * (e[1] - e[0])))
        .collect();
    EmpiricalPdf::from_parts(edges, densities, total)
}
