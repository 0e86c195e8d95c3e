//! The law with density proportional to `exp(-s^6 / 18)`.

use serde::{Deserialize, Serialize};

use crate::quadrature;

/// Half-width of the tabulated range; the mass beyond it is below `exp(-2592)`.
pub const TABLE_REACH: f64 = 6.0;
/// Cells of the CDF table on `[-TABLE_REACH, TABLE_REACH]`.
pub const TABLE_CELLS: usize = 1 << 14;

#[inline]
fn kernel(s: f64) -> f64 {
    let s2 = s * s;
    (-(s2 * s2 * s2) / 18.0).exp()
}

/// Normaliser, density and CDF of the limit law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLaw {
    /// `1 / integral of exp(-s^6 / 18)`.
    pub normalizer: f64,
    step: f64,
    cdf: Vec<f64>,
}

impl Default for LimitLaw {
    fn default() -> Self {
        Self::new()
    }
}

impl LimitLaw {
    /// Builds the table; each cell is integrated with a 16-point Gauss-Legendre rule
    /// and the CDF is interpolated by cubic Hermite splines using the density as slope.
    pub fn new() -> Self {
        let total = quadrature::integrate(-TABLE_REACH, TABLE_REACH, 1e-15, kernel)
            .expect("smooth kernel integrates");
        let normalizer = 1.0 / total;
        let step = 2.0 * TABLE_REACH / TABLE_CELLS as f64;
        let (nodes, weights) = quadrature::gauss_legendre(quadrature::PANEL_ORDER);
        // Left half by accumulation, right half by reflection, so that the table is
        // exactly symmetric with `F(0) = 1/2`.
        let half = TABLE_CELLS / 2;
        let mut left = Vec::with_capacity(half + 1);
        let mut acc = 0.0;
        left.push(0.0);
        for i in 0..half {
            let mid = -TABLE_REACH + step * (i as f64 + 0.5);
            let cell: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(x, w)| w * kernel(mid + 0.5 * step * x))
                .sum::<f64>()
                * 0.5
                * step;
            acc += cell;
            left.push(acc);
        }
        let scale = 0.5 / acc;
        let mut cdf: Vec<f64> = left.iter().map(|c| c * scale).collect();
        cdf[half] = 0.5;
        for i in (0..half).rev() {
            cdf.push(1.0 - cdf[i]);
        }
        LimitLaw {
            normalizer,
            step,
            cdf,
        }
    }

    pub fn density(&self, s: f64) -> f64 {
        self.normalizer * kernel(s)
    }

    pub fn cdf(&self, s: f64) -> f64 {
        if s <= -TABLE_REACH {
            return 0.0;
        }
        if s >= TABLE_REACH {
            return 1.0;
        }
        let pos = (s + TABLE_REACH) / self.step;
        let i = (pos as usize).min(TABLE_CELLS - 1);
        let t = pos - i as f64;
        let a = -TABLE_REACH + self.step * i as f64;
        let (f0, f1) = (self.cdf[i], self.cdf[i + 1]);
        let (d0, d1) = (
            self.density(a) * self.step,
            self.density(a + self.step) * self.step,
        );
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * f0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * f1
            + (t3 - t2) * d1;
        value.clamp(f0, f1)
    }

    /// Inverse CDF by bisection on the table followed by Newton steps.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return -TABLE_REACH;
        }
        if p >= 1.0 {
            return TABLE_REACH;
        }
        let i = self.cdf.partition_point(|&c| c < p).clamp(1, TABLE_CELLS);
        let mut s = -TABLE_REACH + self.step * (i as f64 - 0.5);
        let (lo, hi) = (
            -TABLE_REACH + self.step * (i - 1) as f64,
            -TABLE_REACH + self.step * i as f64,
        );
        for _ in 0..8 {
            let d = self.density(s);
            if d <= 0.0 {
                break;
            }
            s = (s - (self.cdf(s) - p) / d).clamp(lo, hi);
        }
        s
    }

    /// Second moment of the law.
    pub fn variance(&self) -> f64 {
        quadrature::integrate(-TABLE_REACH, TABLE_REACH, 1e-14, |s| s * s * self.density(s))
            .expect("smooth integrand")
    }
}
