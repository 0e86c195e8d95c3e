//! Base probability measures, their even moments, and the standing checks on them.
//!
//! A [`Measure`] is either a finite set of weighted atoms or a density on a bounded
//! interval. Density measures are discretised once, at construction, into a
//! Gauss-Legendre table that is refined until the even moments up to order eight are
//! stable to `1e-10`; every integral against the measure (moments, log-Laplace
//! transform, tilted moments) is then a weighted sum over that table. Sampling uses a
//! separate tabulated inverse CDF.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Tolerance on the total weight of a discrete measure.
pub const WEIGHT_TOL: f64 = 1e-12;
/// Relative tolerance of the moment quadrature.
pub const MOMENT_REL_TOL: f64 = 1e-10;
/// Relative tolerance of the density symmetry test.
pub const SYMMETRY_REL_TOL: f64 = 1e-10;
/// Buckets of the guide table that locates a uniform variate in the CDF grid.
pub const GUIDE_BUCKETS: usize = 4096;
/// Threshold for the normalised covariance determinant `a / (mu4 mu8)`.
pub const COVARIANCE_REL_TOL: f64 = 1e-10;

const MAX_PANELS: usize = 1 << 16;
const CDF_GRID: usize = 1 << 16;

/// Named log-density families; `Polynomial` holds coefficients in increasing degree.
#[derive(Clone)]
pub enum LogDensity {
    /// `-x^4`
    ExpQuartic,
    /// `-ln(1 + x^6)`
    InvSextic,
    /// `0`
    Uniform,
    Polynomial(Vec<f64>),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl LogDensity {
    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        LogDensity::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            LogDensity::ExpQuartic => -(x * x) * (x * x),
            LogDensity::InvSextic => -(x * x * x).powi(2).ln_1p(),
            LogDensity::Uniform => 0.0,
            LogDensity::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &a| acc * x + a),
            LogDensity::Custom(f) => f(x),
        }
    }

    /// Whether `exp(log_density(x) + w0 x^4)` is integrable over the whole real line,
    /// i.e. whether the untruncated law would satisfy the exponential fourth-moment
    /// condition. `None` for custom closures, which cannot be inspected.
    pub fn integrable_on_real_line(&self, w0: f64) -> Option<bool> {
        match self {
            LogDensity::ExpQuartic => Some(w0 < 1.0),
            LogDensity::InvSextic => Some(false),
            // A flat density is only ever meaningful on a bounded interval.
            LogDensity::Uniform => Some(true),
            LogDensity::Polynomial(c) => {
                let mut coeffs = c.clone();
                if coeffs.len() < 5 {
                    coeffs.resize(5, 0.0);
                }
                coeffs[4] += w0;
                let lead = coeffs.iter().rposition(|&a| a != 0.0);
                Some(match lead {
                    Some(d) if d > 0 => d % 2 == 0 && coeffs[d] < 0.0,
                    _ => false,
                })
            }
            LogDensity::Custom(_) => None,
        }
    }
}

impl fmt::Debug for LogDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogDensity::ExpQuartic => write!(f, "ExpQuartic"),
            LogDensity::InvSextic => write!(f, "InvSextic"),
            LogDensity::Uniform => write!(f, "Uniform"),
            LogDensity::Polynomial(c) => write!(f, "Polynomial({c:?})"),
            LogDensity::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Serializable description of a measure, as it appears in run configs and metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    Discrete {
        /// `[position, weight]` pairs.
        atoms: Vec<[f64; 2]>,
    },
    Density {
        family: DensityFamily,
        /// Coefficients (increasing degree) of the log-density when `family = "polynomial"`.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        coeffs: Vec<f64>,
        lower: f64,
        upper: f64,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
}

fn default_nodes() -> usize {
    2048
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityFamily {
    ExpQuartic,
    InvSextic,
    Uniform,
    Polynomial,
}

impl MeasureSpec {
    pub fn build(&self) -> Result<Measure> {
        match self {
            MeasureSpec::Discrete { atoms } => {
                let atoms: Vec<(f64, f64)> = atoms.iter().map(|a| (a[0], a[1])).collect();
                Measure::discrete(&atoms)
            }
            MeasureSpec::Density {
                family,
                coeffs,
                lower,
                upper,
                nodes,
            } => Measure::density(self.log_density_of(*family, coeffs)?, *lower, *upper, *nodes),
        }
    }

    /// The log-density of a density spec, `None` for discrete specs.
    pub fn log_density(&self) -> Option<LogDensity> {
        match self {
            MeasureSpec::Discrete { .. } => None,
            MeasureSpec::Density { family, coeffs, .. } => {
                self.log_density_of(*family, coeffs).ok()
            }
        }
    }

    fn log_density_of(&self, family: DensityFamily, coeffs: &[f64]) -> Result<LogDensity> {
        Ok(match family {
            DensityFamily::ExpQuartic => LogDensity::ExpQuartic,
            DensityFamily::InvSextic => LogDensity::InvSextic,
            DensityFamily::Uniform => LogDensity::Uniform,
            DensityFamily::Polynomial => {
                if coeffs.is_empty() {
                    return Err(Error::InvalidArgument(
                        "polynomial log-density needs coefficients".into(),
                    ));
                }
                LogDensity::Polynomial(coeffs.to_vec())
            }
        })
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Discrete,
    Density {
        law: LogDensity,
        lower: f64,
        upper: f64,
        /// ln of the integral of `exp(law)` over the support.
        log_norm: f64,
    },
}

#[derive(Debug, Clone)]
enum DrawTable {
    Cumulative { positions: Vec<f64>, cumulative: Vec<f64> },
    /// Trapezoid CDF on a uniform grid, normalised to end at 1, with a guide table
    /// giving the first cell to scan for each of `GUIDE_BUCKETS` slices of `[0, 1)`.
    Grid {
        lower: f64,
        step: f64,
        cdf: Vec<f64>,
        guide: Vec<u32>,
    },
}

/// A probability measure on the real line with bounded support.
#[derive(Debug, Clone)]
pub struct Measure {
    kind: Kind,
    table: Vec<(f64, f64)>,
    draws: DrawTable,
    symmetric: bool,
}

/// Even moments of a measure together with the two derived quantities the model
/// depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub sigma2: f64,
    pub mu4: f64,
    pub mu6: f64,
    pub mu8: f64,
    /// `5 mu4^2 - 2 sigma^2 mu6`
    pub criterion: f64,
    /// `(mu4 - sigma^4)(mu8 - mu4^2) - (mu6 - sigma^2 mu4)^2`
    pub a: f64,
}

impl MomentSet {
    pub fn new(sigma2: f64, mu4: f64, mu6: f64, mu8: f64) -> Self {
        let s4 = sigma2 * sigma2;
        let off = mu6 - sigma2 * mu4;
        MomentSet {
            sigma2,
            mu4,
            mu6,
            mu8,
            criterion: 5.0 * mu4 * mu4 - 2.0 * sigma2 * mu6,
            a: (mu4 - s4) * (mu8 - mu4 * mu4) - off * off,
        }
    }

    /// Coefficient of `x^6` in the expansion of the Cramer transform at its minimum.
    pub fn sixth_order_coefficient(&self) -> f64 {
        self.criterion / (90.0 * self.sigma2.powi(7))
    }

    /// `(mu4^2 / sigma^2 - 2 mu6 / 5)^(1/6) / sigma^2`, the factor that maps
    /// `S_n / n^{5/6}` onto the standard sextic law. Requires a positive criterion.
    pub fn rescale_constant(&self) -> Result<f64> {
        if self.criterion <= 0.0 {
            return Err(Error::InadmissibleMeasure(self.criterion));
        }
        let inner = self.mu4 * self.mu4 / self.sigma2 - 0.4 * self.mu6;
        Ok(inner.powf(1.0 / 6.0) / self.sigma2)
    }

    pub fn is_admissible(&self) -> bool {
        self.criterion > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportClass {
    Lt5,
    Ge5,
}

impl Measure {
    /// Builds a discrete measure from `(position, weight)` atoms.
    pub fn discrete(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::NotAProbability("no atoms".into()));
        }
        let mut total = 0.0;
        for &(x, w) in atoms {
            if !x.is_finite() {
                return Err(Error::NonFinite(x));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::NotAProbability(format!("weight {w} at {x}")));
            }
            total += w;
        }
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::NotAProbability(format!("weights sum to {total}")));
        }
        let mut merged: Vec<(f64, f64)> = atoms
            .iter()
            .filter(|a| a.1 > 0.0)
            .map(|&(x, w)| (x, w / total))
            .collect();
        merged.sort_by(|a, b| a.0.total_cmp(&b.0));
        merged.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        if merged.iter().all(|a| a.0 == 0.0) {
            return Err(Error::DiracAtZero);
        }
        let symmetric = merged.iter().all(|&(x, w)| {
            merged.iter().any(|&(y, v)| {
                (x + y).abs() <= WEIGHT_TOL * x.abs().max(1.0) && (w - v).abs() <= WEIGHT_TOL
            })
        });
        let positions: Vec<f64> = merged.iter().map(|a| a.0).collect();
        let mut cumulative = Vec::with_capacity(merged.len());
        let mut acc = 0.0;
        for a in &merged {
            acc += a.1;
            cumulative.push(acc);
        }
        Ok(Measure {
            kind: Kind::Discrete,
            table: merged,
            draws: DrawTable::Cumulative {
                positions,
                cumulative,
            },
            symmetric,
        })
    }

    /// Builds the normalised measure with density proportional to `exp(log_density)` on
    /// `[lower, upper]`; `nodes` is the initial quadrature resolution.
    pub fn density(law: LogDensity, lower: f64, upper: f64, nodes: usize) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::InvalidSupport(format!("[{lower}, {upper}]")));
        }
        if nodes < 64 {
            return Err(Error::InvalidSupport(format!("{nodes} nodes (need >= 64)")));
        }
        let initial_panels = nodes.div_ceil(quadrature::PANEL_ORDER);
        let probe = quadrature::composite_rule(lower, upper, initial_panels);
        let mut shift = f64::NEG_INFINITY;
        for &(x, _) in &probe {
            let l = law.eval(x);
            if l.is_nan() || l == f64::INFINITY {
                return Err(Error::NonFinite(x));
            }
            shift = shift.max(l);
        }
        if shift == f64::NEG_INFINITY {
            return Err(Error::ZeroMass);
        }
        let weight_fn = |x: f64| (law.eval(x) - shift).exp();
        let (rule, integrals) = quadrature::adaptive_vector(
            lower,
            upper,
            initial_panels,
            MAX_PANELS,
            MOMENT_REL_TOL,
            |x| {
                let e = weight_fn(x);
                let x2 = x * x;
                let x4 = x2 * x2;
                [e, e * x2, e * x4, e * x4 * x2, e * x4 * x4]
            },
        )
        .map_err(|err| match err {
            Error::QuadratureFailure(c) if c.is_nan() => rule_non_finite(&law, lower, upper),
            other => other,
        })?;
        let mass = integrals[0];
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::ZeroMass);
        }
        let table: Vec<(f64, f64)> = rule
            .iter()
            .map(|&(x, w)| (x, w * weight_fn(x) / mass))
            .filter(|a| a.1 > 0.0)
            .collect();
        if table.iter().all(|a| a.0 == 0.0) {
            return Err(Error::DiracAtZero);
        }
        let symmetric = (lower + upper).abs() <= WEIGHT_TOL * upper.abs().max(1.0)
            && rule.iter().all(|&(x, _)| {
                let (l1, l2) = (law.eval(x), law.eval(-x));
                if l1 == f64::NEG_INFINITY || l2 == f64::NEG_INFINITY {
                    return l1 == l2;
                }
                ((l1 - l2).exp() - 1.0).abs() <= SYMMETRY_REL_TOL
            });
        let draws = inverse_cdf_table(&weight_fn, lower, upper)?;
        Ok(Measure {
            kind: Kind::Density {
                law,
                lower,
                upper,
                log_norm: shift + mass.ln(),
            },
            table,
            draws,
            symmetric,
        })
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, Kind::Discrete)
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Fails with [`Error::Asymmetric`] unless the measure passed the symmetry test.
    pub fn require_symmetric(&self) -> Result<()> {
        if self.symmetric {
            Ok(())
        } else {
            Err(Error::Asymmetric(
                "theorem-level computations need a symmetric base measure".into(),
            ))
        }
    }

    /// Integration table `(position, weight)`: the atoms of a discrete measure or the
    /// refined quadrature nodes of a density measure. Weights sum to one.
    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.table
    }

    /// Atoms of a discrete measure (positive weights only, sorted by position).
    pub fn atoms(&self) -> Option<&[(f64, f64)]> {
        self.is_discrete().then_some(&self.table[..])
    }

    /// The log-density and its support for density measures.
    pub fn density_law(&self) -> Option<(&LogDensity, f64, f64)> {
        match &self.kind {
            Kind::Density {
                law, lower, upper, ..
            } => Some((law, *lower, *upper)),
            Kind::Discrete => None,
        }
    }

    /// Normalised density at `x` (zero outside the support); `None` for discrete measures.
    pub fn pdf(&self, x: f64) -> Option<f64> {
        match &self.kind {
            Kind::Density {
                law,
                lower,
                upper,
                log_norm,
            } => Some(if x < *lower || x > *upper {
                0.0
            } else {
                (law.eval(x) - log_norm).exp()
            }),
            Kind::Discrete => None,
        }
    }

    /// `E[X^j]` by exact sums (discrete) or the quadrature table (density).
    pub fn raw_moment(&self, j: u32) -> f64 {
        self.table.iter().map(|&(x, w)| w * x.powi(j as i32)).sum()
    }

    pub fn moments(&self) -> MomentSet {
        let mut m = [0.0; 4];
        for &(x, w) in &self.table {
            let x2 = x * x;
            let x4 = x2 * x2;
            m[0] += w * x2;
            m[1] += w * x4;
            m[2] += w * x4 * x2;
            m[3] += w * x4 * x4;
        }
        MomentSet::new(m[0], m[1], m[2], m[3])
    }

    /// Counts support points (`Ge5` for any density) and tests invertibility of the
    /// covariance matrix of `(Z, Z^2, Z^4)`.
    pub fn support_check(&self) -> (SupportClass, bool) {
        let class = match self.kind {
            Kind::Discrete if self.table.len() < 5 => SupportClass::Lt5,
            _ => SupportClass::Ge5,
        };
        let ms = self.moments();
        let scale = ms.mu4 * ms.mu8;
        (class, ms.a > COVARIANCE_REL_TOL * scale)
    }

    /// Whether `E[exp(w0 Z^4)]` is finite. Every representable measure has bounded
    /// support, so this holds for all `w0 > 0`; untruncated laws are screened with
    /// [`LogDensity::integrable_on_real_line`] at configuration time instead.
    pub fn integrability_check(&self, w0: f64) -> bool {
        if !(w0 > 0.0) {
            return false;
        }
        let reach = match self.kind {
            Kind::Density { lower, upper, .. } => lower.abs().max(upper.abs()),
            Kind::Discrete => self.table.iter().map(|a| a.0.abs()).fold(0.0, f64::max),
        };
        (w0 * reach.powi(4)).is_finite()
    }

    /// One draw from the measure.
    #[inline]
    pub fn draw_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.quantile(u)
    }

    /// Quantile function used for sampling: cumulative-weight inversion for atoms,
    /// inversion of a fine trapezoid CDF grid for densities.
    #[inline]
    pub fn quantile(&self, u: f64) -> f64 {
        match &self.draws {
            DrawTable::Cumulative {
                positions,
                cumulative,
            } => {
                let i = cumulative.partition_point(|&c| c <= u);
                positions[i.min(positions.len() - 1)]
            }
            DrawTable::Grid {
                lower,
                step,
                cdf,
                guide,
            } => {
                let g = ((u * GUIDE_BUCKETS as f64) as usize).min(GUIDE_BUCKETS - 1);
                let last = cdf.len() - 2;
                let mut i = guide[g] as usize;
                while i < last && cdf[i + 1] <= u {
                    i += 1;
                }
                let (c0, c1) = (cdf[i], cdf[i + 1]);
                let frac = if c1 > c0 { ((u - c0) / (c1 - c0)).clamp(0.0, 1.0) } else { 0.0 };
                lower + step * (i as f64 + frac)
            }
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.draw_one(rng)).collect()
    }
}

fn rule_non_finite(law: &LogDensity, lower: f64, upper: f64) -> Error {
    let mut panels = 4;
    while panels <= MAX_PANELS {
        for (x, _) in quadrature::composite_rule(lower, upper, panels) {
            let l = law.eval(x);
            if l.is_nan() || l == f64::INFINITY {
                return Error::NonFinite(x);
            }
        }
        panels *= 2;
    }
    Error::QuadratureFailure(f64::NAN)
}

fn inverse_cdf_table<F: Fn(f64) -> f64>(weight: &F, lower: f64, upper: f64) -> Result<DrawTable> {
    let step = (upper - lower) / CDF_GRID as f64;
    let mut cdf = Vec::with_capacity(CDF_GRID + 1);
    cdf.push(0.0);
    let mut prev = weight(lower);
    let mut acc = 0.0;
    for i in 1..=CDF_GRID {
        let next = weight(lower + step * i as f64);
        acc += 0.5 * step * (prev + next);
        cdf.push(acc);
        prev = next;
    }
    if !(acc.is_finite() && acc > 0.0) {
        return Err(Error::ZeroMass);
    }
    for c in cdf.iter_mut() {
        *c /= acc;
    }
    cdf[CDF_GRID] = 1.0;
    let mut guide = Vec::with_capacity(GUIDE_BUCKETS);
    let mut i = 0;
    for g in 0..GUIDE_BUCKETS {
        let target = g as f64 / GUIDE_BUCKETS as f64;
        while i < CDF_GRID - 1 && cdf[i + 1] <= target {
            i += 1;
        }
        guide.push(i as u32);
    }
    Ok(DrawTable::Grid {
        lower,
        step,
        cdf,
        guide,
    })
}
