//! The self-interaction: `F`, the naive correction `R`, the regularised family `R_n`,
//! the interaction `H` used by the model, and numerical checks of the structural
//! hypotheses those functions must satisfy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::MomentSet;

/// Bound constant in `R_n(x, y, z) <= c0 * y`.
pub const C0: f64 = 1.0 / 12.0;

/// A point `(x, y, z)` of mean (or summed) first, second and fourth powers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriplePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl TriplePoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        TriplePoint { x, y, z }
    }

    pub fn scaled(self, factor: f64) -> Self {
        TriplePoint::new(self.x * factor, self.y * factor, self.z * factor)
    }

    pub fn mirrored(self) -> Self {
        TriplePoint::new(-self.x, self.y, self.z)
    }

    /// Membership in `x^2 <= y, y^2 <= z, y != 0`, with slack `1e-12 max(1, y)` on
    /// both inequalities so boundary points of discrete laws are accepted.
    pub fn in_theta_star(&self) -> bool {
        let tol = 1e-12 * self.y.abs().max(1.0);
        self.y > 0.0 && self.x * self.x <= self.y + tol && self.y * self.y <= self.z + tol * self.y
    }
}

impl From<(f64, f64, f64)> for TriplePoint {
    fn from(p: (f64, f64, f64)) -> Self {
        TriplePoint::new(p.0, p.1, p.2)
    }
}

/// `x^2 / (2y)`.
pub fn f_term(x: f64, y: f64) -> Result<f64> {
    if y == 0.0 {
        return Err(Error::DomainError("F requires y != 0".into()));
    }
    Ok(x * x / (2.0 * y))
}

/// `z x^4 / (12 y^4)`.
pub fn r_term(p: TriplePoint) -> Result<f64> {
    if p.y == 0.0 {
        return Err(Error::DomainError("R requires y != 0".into()));
    }
    if p.x == 0.0 {
        return Ok(0.0);
    }
    let x2 = p.x * p.x;
    let y2 = p.y * p.y;
    Ok(p.z * (x2 * x2) / (12.0 * (y2 * y2)))
}

struct Powers {
    x4: f64,
    x10: f64,
    y4: f64,
    y5: f64,
    y9: f64,
}

#[inline]
fn powers(x: f64, y: f64) -> Powers {
    let x2 = x * x;
    let x4 = x2 * x2;
    let x8 = x4 * x4;
    let y2 = y * y;
    let y4 = y2 * y2;
    let y5 = y4 * y;
    Powers {
        x4,
        x10: x8 * x2,
        y4,
        y5,
        y9: y5 * y4,
    }
}

/// `(1/12) z x^4 y^5 / (y^9 + scale x^10 + z x^4 y^4)`; `scale = n` gives `R_n` and
/// `scale = 1` the correction term of `H`.
fn regularised(scale: f64, p: TriplePoint) -> Result<f64> {
    if p.x == 0.0 {
        if p.y == 0.0 {
            return Err(Error::DomainError("R_n requires y != 0".into()));
        }
        return Ok(0.0);
    }
    let pw = powers(p.x, p.y);
    let zx4y4 = p.z * pw.x4 * pw.y4;
    // Smallest-first summation of the three nonnegative terms.
    let mut terms = [pw.y9, scale * pw.x10, zx4y4];
    terms.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let den = (terms[0] + terms[1]) + terms[2];
    if !(den > 0.0) {
        return Err(Error::DomainError(format!(
            "nonpositive denominator {den} at ({}, {}, {})",
            p.x, p.y, p.z
        )));
    }
    Ok(p.z * pw.x4 * pw.y5 / (12.0 * den))
}

/// `R_n(x, y, z) = (1/12) z x^4 y^5 / (y^9 + n x^10 + z x^4 y^4)`.
pub fn r_n(n: f64, p: TriplePoint) -> Result<f64> {
    if !(n >= 1.0) {
        return Err(Error::InvalidArgument(format!("R_n needs n >= 1, got {n}")));
    }
    regularised(n, p)
}

/// The interaction `H = F + (1/12) z x^4 y^5 / (y^9 + x^10 + z x^4 y^4)`.
pub fn h(p: TriplePoint) -> Result<f64> {
    Ok(f_term(p.x, p.y)? + regularised(1.0, p)?)
}

/// `R - R_n`, evaluated in the cancellation-free form
/// `z x^4 (n x^10 + z x^4 y^4) / (12 y^4 (y^9 + n x^10 + z x^4 y^4))`.
pub fn r_minus_r_n(n: f64, p: TriplePoint) -> Result<f64> {
    if p.y == 0.0 {
        return Err(Error::DomainError("R - R_n requires y != 0".into()));
    }
    if p.x == 0.0 {
        return Ok(0.0);
    }
    let pw = powers(p.x, p.y);
    let zx4y4 = p.z * pw.x4 * pw.y4;
    let tail = n * pw.x10 + zx4y4;
    let den = pw.y9 + tail;
    if !(den > 0.0) {
        return Err(Error::DomainError(format!("nonpositive denominator {den}")));
    }
    Ok(p.z * pw.x4 * tail / (12.0 * pw.y4 * den))
}

/// Which self-interaction a sampler targets, evaluated on summed coordinates
/// `(S_n, T_n, U_n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interaction {
    /// `H` with the regularised fourth-order correction.
    #[default]
    Candidate,
    /// `F + R`, the unregularised form; only meant for small systems.
    Natural,
}

impl Interaction {
    /// Value on the sums; `t` must be positive.
    #[inline]
    pub fn on_sums(self, s: f64, t: f64, u: f64) -> f64 {
        let p = TriplePoint::new(s, t, u);
        match self {
            Interaction::Candidate => {
                if s == 0.0 {
                    return 0.0;
                }
                let pw = powers(s, t);
                let zx4y4 = u * pw.x4 * pw.y4;
                s * s / (2.0 * t) + u * pw.x4 * pw.y5 / (12.0 * (pw.y9 + pw.x10 + zx4y4))
            }
            Interaction::Natural => {
                let f = s * s / (2.0 * t);
                f + r_term(p).unwrap_or(f64::NAN)
            }
        }
    }
}

/// `H - F`, the correction term of the interaction.
pub fn h_correction(p: TriplePoint) -> Result<f64> {
    regularised(1.0, p)
}

/// Largest relative deviation between `H(p) - F(p)` and `n R_n(p / n)`.
pub fn check_scaling_identity(n: f64, points: &[TriplePoint]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &p in points {
        let lhs = h_correction(p)?;
        let rhs = n * r_n(n, p.scaled(1.0 / n))?;
        let err = if lhs == 0.0 {
            if rhs == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            (lhs - rhs).abs() / lhs.abs()
        };
        worst = worst.max(err);
    }
    Ok(worst)
}

/// A violated inequality found by [`check_monotone_and_bounds`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub point: TriplePoint,
    pub n: u64,
    pub clause: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub points_checked: usize,
    pub comparisons: usize,
    pub violations: Vec<Violation>,
}

impl MonotoneReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `0 <= R_{n+1} <= R_n <= R` and `R_n <= y/12` for `n = 1..=n_max`.
pub fn check_monotone_and_bounds(points: &[TriplePoint], n_max: u64) -> Result<MonotoneReport> {
    let mut report = MonotoneReport {
        points_checked: points.len(),
        ..Default::default()
    };
    // Slack for the last-bit rounding of two independently evaluated quotients.
    let slack = |v: f64| 4.0 * f64::EPSILON * v.abs();
    for &p in points {
        let r = r_term(p)?;
        let mut prev = r_n(1.0, p)?;
        let mut record = |n: u64, clause: &str, lhs: f64, rhs: f64, ok: bool| {
            report.comparisons += 1;
            if !ok {
                report.violations.push(Violation {
                    point: p,
                    n,
                    clause: clause.into(),
                    lhs,
                    rhs,
                });
            }
        };
        record(1, "R_1 <= R", prev, r, prev <= r + slack(r));
        record(1, "R_1 <= y/12", prev, C0 * p.y, prev <= C0 * p.y + slack(p.y));
        for n in 2..=n_max {
            let cur = r_n(n as f64, p)?;
            record(n, "R_n >= 0", cur, 0.0, cur >= 0.0);
            record(n, "R_n <= R_{n-1}", cur, prev, cur <= prev + slack(prev));
            record(n, "R_n <= y/12", cur, C0 * p.y, cur <= C0 * p.y + slack(p.y));
            prev = cur;
        }
    }
    Ok(report)
}

/// `n (R - R_n)` at `(x / n^{1/6}, y / sqrt(n) + sigma^2, z / sqrt(n) + mu4)` and its
/// large-`n` equivalent `mu4 x^4 (x^10 + sigma^8 mu4 x^4) / (12 sigma^26 n^{1/3})`.
pub fn vanishing_rate(n: f64, x: f64, y: f64, z: f64, ms: &MomentSet) -> Result<(f64, f64)> {
    if !(n >= 1.0) {
        return Err(Error::InvalidArgument(format!("n must be >= 1, got {n}")));
    }
    let p = TriplePoint::new(
        x / n.powf(1.0 / 6.0),
        y / n.sqrt() + ms.sigma2,
        z / n.sqrt() + ms.mu4,
    );
    if !(p.y > 0.0) {
        return Err(Error::DomainError(format!("shifted y = {} is not positive", p.y)));
    }
    let exact = n * r_minus_r_n(n, p)?;
    let s2 = ms.sigma2;
    let x4 = x.powi(4);
    let asymptotic = ms.mu4 * x4 * (x4 * x4 * x * x + s2.powi(4) * ms.mu4 * x4)
        / (12.0 * s2.powi(13) * n.cbrt());
    Ok((exact, asymptotic))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> TriplePoint {
        TriplePoint::new(x, y, z)
    }

    #[test]
    fn f_examples() {
        assert_eq!(f_term(0.0, 2.0).unwrap(), 0.0);
        assert_eq!(f_term(1.0, 2.0).unwrap(), 0.25);
        assert_eq!(f_term(-1.0, 2.0).unwrap(), 0.25);
        assert!(matches!(f_term(1.0, 0.0), Err(Error::DomainError(_))));
    }

    #[test]
    fn r_examples() {
        assert_eq!(r_term(p(0.0, 2.0, 6.8)).unwrap(), 0.0);
        assert_eq!(r_term(p(1.0, 2.0, 4.0)).unwrap(), 1.0 / 48.0);
        assert_eq!(r_term(p(-1.3, 2.0, 4.0)).unwrap(), r_term(p(1.3, 2.0, 4.0)).unwrap());
        assert!(r_term(p(1.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn r_n_examples() {
        let r1 = r_n(1.0, p(1.0, 2.0, 4.0)).unwrap();
        assert!((r1 - 128.0 / 577.0 / 12.0).abs() < 1e-16);
        assert!((r1 - 0.0184864).abs() < 1e-7);
        let r2 = r_n(2.0, p(1.0, 2.0, 4.0)).unwrap();
        assert!((r2 - 128.0 / 578.0 / 12.0).abs() < 1e-16);
        assert!(r2 < r1);
        assert_eq!(r_n(17.0, p(0.0, 3.0, 9.0)).unwrap(), 0.0);
        assert!(matches!(r_n(1.0, p(1.0, -1.0, -1.0)), Err(Error::DomainError(_))));
    }

    #[test]
    fn h_examples() {
        assert_eq!(h(p(0.0, 0.7, 1.0)).unwrap(), 0.0);
        assert!((h(p(1.0, 2.0, 4.0)).unwrap() - (0.25 + 128.0 / 577.0 / 12.0)).abs() < 1e-16);
        assert!((h(p(2.0, 2.0, 2.0)).unwrap() - 25.0 / 24.0).abs() < 1e-15);
        assert_eq!(
            Interaction::Candidate.on_sums(2.0, 2.0, 2.0),
            h(p(2.0, 2.0, 2.0)).unwrap()
        );
        assert!((Interaction::Natural.on_sums(1.0, 2.0, 4.0) - (0.25 + 1.0 / 48.0)).abs() < 1e-16);
    }

    #[test]
    fn scaling_identity_trivial_at_n_one() {
        let pts = [p(1.0, 2.0, 4.0), p(-0.3, 0.5, 0.4)];
        assert_eq!(check_scaling_identity(1.0, &pts).unwrap(), 0.0);
    }

    #[test]
    fn scaling_identity_hand_expansion_n_seven() {
        // n R_n(x/n, y/n, z/n) = (1/12) z x^4 y^5 n^{-9} / (n^{-9}(y^9 + x^10 + z x^4 y^4)).
        let n = 7.0f64;
        let (x, y, z) = (1.0f64 / n, 2.0 / n, 4.0 / n);
        let by_hand = n * z * x.powi(4) * y.powi(5)
            / (12.0 * (y.powi(9) + n * x.powi(10) + z * x.powi(4) * y.powi(4)));
        let target = 128.0 / 577.0 / 12.0;
        assert!((by_hand - target).abs() <= 1e-14 * target);
        assert!(check_scaling_identity(7.0, &[p(1.0, 2.0, 4.0)]).unwrap() <= 1e-14);
        assert!(check_scaling_identity(1e6, &[p(0.5, 1.0, 1.0)]).unwrap() <= 1e-12);
    }

    #[test]
    fn bounds_on_sample_points() {
        let rep = check_monotone_and_bounds(&[p(1.0, 2.0, 4.0), p(0.0, 1.0, 1.0)], 50).unwrap();
        assert!(rep.passed(), "{:?}", rep.violations);
        assert!(r_n(1.0, p(1.0, 2.0, 4.0)).unwrap() <= 2.0 / 12.0);
    }

    #[test]
    fn theta_star_membership() {
        assert!(p(1.0, 1.0, 1.0).in_theta_star());
        assert!(p(0.0, 2.0, 6.8).in_theta_star());
        assert!(!p(1.1, 1.0, 1.0).in_theta_star());
        assert!(!p(0.0, 2.0, 3.9).in_theta_star());
        assert!(!p(0.0, 0.0, 1.0).in_theta_star());
    }

    #[test]
    fn vanishing_rate_examples() {
        let ms = MomentSet::new(2.0, 6.8, 26.0, 102.8);
        let (e, a) = vanishing_rate(1e9, 0.0, 0.0, 0.0, &ms).unwrap();
        assert_eq!((e, a), (0.0, 0.0));
        let (e, a) = vanishing_rate(1e9, 1.0, 0.0, 0.0, &ms).unwrap();
        assert!((e / a - 1.0).abs() < 0.05, "{e} {a}");
        let (e1, _) = vanishing_rate(1e12, 1.0, 0.0, 0.0, &ms).unwrap();
        let (e2, _) = vanishing_rate(2e12, 1.0, 0.0, 0.0, &ms).unwrap();
        assert!((e2 / e1 - 2f64.powf(-1.0 / 3.0)).abs() < 1e-3);
    }

    #[test]
    fn r_minus_r_n_matches_direct_difference() {
        for &q in &[p(0.7, 1.2, 2.0), p(-0.2, 0.9, 1.5), p(1.5, 3.0, 12.0)] {
            for n in [1.0, 3.0, 100.0] {
                let direct = r_term(q).unwrap() - r_n(n, q).unwrap();
                let stable = r_minus_r_n(n, q).unwrap();
                assert!((direct - stable).abs() <= 1e-14 * r_term(q).unwrap());
            }
        }
    }
}
