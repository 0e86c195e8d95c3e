//! Fluctuation reports: histogram of the rescaled sum, summary statistics and the
//! files written for them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::limit_law::LimitLaw;
use super::stats::{self, LlnCheck, LlnTolerances};
use crate::error::{Error, Result};
use crate::measures::MomentSet;
use crate::sampler::SampleRecord;

pub const HISTOGRAM_CSV_HEADER: &str = "bin_left,bin_right,count,density";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: u64,
    pub density: f64,
}

/// Binning of the rescaled variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HistogramSpec {
    pub bins: usize,
    pub lower: f64,
    pub upper: f64,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        HistogramSpec {
            bins: 120,
            lower: -4.0,
            upper: 4.0,
        }
    }
}

/// Equal-width histogram normalised to a density. The range grows by whole bins on
/// both sides until it holds every finite value, so counts always sum to the number
/// of values.
pub fn histogram(values: &[f64], spec: &HistogramSpec) -> Result<Vec<HistogramBin>> {
    if spec.bins == 0 || !(spec.upper > spec.lower) {
        return Err(Error::InvalidArgument("histogram needs bins > 0 and lower < upper".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("histogram values must be finite".into()));
    }
    let width = (spec.upper - spec.lower) / spec.bins as f64;
    let below = values.iter().fold(spec.lower, |a, &v| a.min(v));
    let above = values.iter().fold(spec.upper, |a, &v| a.max(v));
    let extra_lo = ((spec.lower - below) / width).ceil() as usize;
    let extra_hi = ((above - spec.upper) / width).ceil() as usize;
    let extra = extra_lo.max(extra_hi);
    let lower = spec.lower - extra as f64 * width;
    let bins = spec.bins + 2 * extra;
    let counts = values
        .par_iter()
        .fold(
            || vec![0u64; bins],
            |mut acc, &v| {
                let i = (((v - lower) / width).floor() as usize).min(bins - 1);
                acc[i] += 1;
                acc
            },
        )
        .reduce(
            || vec![0u64; bins],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let total = values.len() as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            bin_left: lower + i as f64 * width,
            bin_right: lower + (i + 1) as f64 * width,
            count,
            density: if total > 0.0 {
                count as f64 / (total * width)
            } else {
                0.0
            },
        })
        .collect())
}

/// Summary of one sample run against the sextic limit law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationReport {
    pub n: usize,
    pub records_used: u64,
    /// `(mean S/n, mean T/n, mean U/n)`
    pub mean_triple: [f64; 3],
    pub mean_abs_s: f64,
    pub ks_stat: f64,
    pub rescale_constant: f64,
    pub lln: LlnCheck,
    pub histogram: Vec<HistogramBin>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Rescales `S_n`, bins it and measures its distance to the limit law.
pub fn fluctuation_report(
    records: &[SampleRecord],
    ms: &MomentSet,
    n: usize,
    law: &LimitLaw,
    tol: &LlnTolerances,
    spec: &HistogramSpec,
) -> Result<FluctuationReport> {
    let rescale_constant = ms.rescale_constant()?;
    let rescaled = stats::rescale(records, ms, n)?;
    let lln = stats::lln_check(records, ms, n, tol);
    let warning = records.is_empty().then(|| "no records".to_string());
    Ok(FluctuationReport {
        n,
        records_used: records.len() as u64,
        mean_triple: lln.mean_triple,
        mean_abs_s: if records.is_empty() {
            f64::NAN
        } else {
            stats::mean_abs_s(records)
        },
        ks_stat: stats::ks_statistic(&rescaled, |s| law.cdf(s)),
        rescale_constant,
        lln,
        histogram: histogram(&rescaled, spec)?,
        warning,
    })
}

/// Paths written by [`emit`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmittedFiles {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub svg: PathBuf,
}

pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut out = String::from(HISTOGRAM_CSV_HEADER);
    out.push('\n');
    for b in bins {
        let _ = writeln!(out, "{},{},{},{}", b.bin_left, b.bin_right, b.count, b.density);
    }
    out
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 400.0;
const MARGIN: f64 = 40.0;

/// Histogram bars with the limit density drawn over them.
pub fn overlay_svg(report: &FluctuationReport, law: &LimitLaw) -> String {
    let (lo, hi) = match (report.histogram.first(), report.histogram.last()) {
        (Some(a), Some(b)) => (a.bin_left, b.bin_right),
        _ => (-4.0, 4.0),
    };
    let peak = report
        .histogram
        .iter()
        .map(|b| b.density)
        .fold(law.density(0.0), f64::max)
        * 1.1;
    let px = |x: f64| MARGIN + (x - lo) / (hi - lo) * (SVG_W - 2.0 * MARGIN);
    let py = |y: f64| SVG_H - MARGIN - y / peak * (SVG_H - 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for b in &report.histogram {
        let (x0, x1) = (px(b.bin_left), px(b.bin_right));
        let top = py(b.density);
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.3}" y="{top:.3}" width="{:.3}" height="{:.3}" fill="#4a7bd0"/>"##,
            x1 - x0,
            py(0.0) - top
        );
    }
    let mut path = String::new();
    let steps = 400;
    for i in 0..=steps {
        let x = lo + (hi - lo) * i as f64 / steps as f64;
        let _ = write!(
            path,
            "{}{:.3},{:.3}",
            if i == 0 { "M" } else { " L" },
            px(x),
            py(law.density(x))
        );
    }
    let _ = writeln!(
        s,
        r##"<path d="{path}" fill="none" stroke="#d03030" stroke-width="2"/>"##
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{0:.3}" x2="{1:.3}" y2="{0:.3}" stroke="black"/>"#,
        py(0.0),
        SVG_W - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="20" font-family="monospace" font-size="12">n = {}, records = {}, KS = {:.4}</text>"#,
        report.n, report.records_used, report.ks_stat
    );
    s.push_str("</svg>\n");
    s
}

/// Writes `<stem>_histogram.csv`, `<stem>_report.json` and `<stem>_overlay.svg` into `dir`.
pub fn emit(report: &FluctuationReport, law: &LimitLaw, dir: &Path, stem: &str) -> Result<EmittedFiles> {
    fs::create_dir_all(dir)?;
    let files = EmittedFiles {
        csv: dir.join(format!("{stem}_histogram.csv")),
        json: dir.join(format!("{stem}_report.json")),
        svg: dir.join(format!("{stem}_overlay.svg")),
    };
    fs::write(&files.csv, histogram_csv(&report.histogram))?;
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::IoFailure(e.to_string()))?;
    fs::write(&files.json, json + "\n")?;
    fs::write(&files.svg, overlay_svg(report, law))?;
    Ok(files)
}
