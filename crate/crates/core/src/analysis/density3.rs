//! Density of `(X+Y+Z, X^2+Y^2+Z^2, X^4+Y^4+Z^4)` for i.i.d. `X, Y, Z` with a density,
//! and a Monte Carlo diagnostic for the integrability condition on triple products.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::Measure;

/// Residual accepted after root polishing, relative to `1 + |u| + |v| + |w|`.
pub const ROUND_TRIP_TOL: f64 = 1e-8;

pub fn forward_map(x: f64, y: f64, z: f64) -> [f64; 3] {
    let sq = |a: f64| a * a;
    [
        x + y + z,
        sq(x) + sq(y) + sq(z),
        sq(sq(x)) + sq(sq(y)) + sq(sq(z)),
    ]
}

/// Jacobian determinant `8 (y-x)(z-x)(z-y)(x+y+z)` of the forward map.
pub fn jacobian(x: f64, y: f64, z: f64) -> f64 {
    8.0 * (y - x) * (z - x) * (z - y) * (x + y + z)
}

/// Coefficients `[c2, c1, c0]` of the monic cubic `X^3 + c2 X^2 + c1 X + c0` whose
/// roots are the preimage of `(u, v, w)`.
pub fn cubic_coefficients(u: f64, v: f64, w: f64) -> Result<[f64; 3]> {
    if u == 0.0 {
        return Err(Error::DomainError("u = 0 lies outside the image".into()));
    }
    Ok([
        -u,
        0.5 * (u * u - v),
        u * v / 4.0 - u * u * u / 8.0 + v * v / (8.0 * u) - w / (4.0 * u),
    ])
}

fn residual(roots: [f64; 3], target: [f64; 3]) -> f64 {
    let f = forward_map(roots[0], roots[1], roots[2]);
    let err: f64 = (0..3).map(|i| (f[i] - target[i]).abs()).sum();
    err / (1.0 + target.iter().map(|t| t.abs()).sum::<f64>())
}

/// Real roots of the preimage cubic in increasing order, or `None` when two of them
/// are complex. Each root gets one Newton polish.
pub fn preimage(u: f64, v: f64, w: f64) -> Result<Option<[f64; 3]>> {
    let [a, b, c] = cubic_coefficients(u, v, w)?;
    // Depressed cubic t^3 + p t + q with X = t - a/3.
    let shift = -a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    if p >= 0.0 {
        return Ok(None);
    }
    let disc = -(4.0 * p * p * p + 27.0 * q * q);
    if disc < 0.0 {
        return Ok(None);
    }
    let m = 2.0 * (-p / 3.0).sqrt();
    let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
    let theta = arg.acos() / 3.0;
    let mut roots = [0.0; 3];
    for (k, r) in roots.iter_mut().enumerate() {
        *r = m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift;
    }
    let target = [u, v, w];
    let before = residual(roots, target);
    let mut polished = roots;
    for r in polished.iter_mut() {
        let f = ((*r + a) * *r + b) * *r + c;
        let df = (3.0 * *r + 2.0 * a) * *r + b;
        if df != 0.0 {
            let step = f / df;
            if step.is_finite() {
                *r -= step;
            }
        }
    }
    let after = residual(polished, target);
    let roots = if after <= before { polished } else { roots };
    let best = after.min(before);
    if best > ROUND_TRIP_TOL {
        return Err(Error::NumericInstability(best));
    }
    let mut roots = roots;
    roots.sort_by(f64::total_cmp);
    Ok(Some(roots))
}

/// Density of the image of three i.i.d. draws from `m` at `(u, v, w)`.
pub fn triple_density(m: &Measure, u: f64, v: f64, w: f64) -> Result<f64> {
    if m.is_discrete() {
        return Err(Error::InvalidArgument("triple density needs a density measure".into()));
    }
    let Some([x, y, z]) = preimage(u, v, w)? else {
        return Ok(0.0);
    };
    let jac = jacobian(x, y, z).abs();
    if jac == 0.0 {
        return Ok(0.0);
    }
    let f = |t: f64| m.pdf(t).unwrap_or(0.0);
    Ok(6.0 * f(x) * f(y) * f(z) / jac)
}

/// Axis-aligned integration box in `(u, v, w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleBox {
    pub u: [f64; 2],
    pub v: [f64; 2],
    pub w: [f64; 2],
}

impl TripleBox {
    /// Smallest box containing the image of `[-r, r]^3`.
    pub fn covering(r: f64) -> Self {
        TripleBox {
            u: [-3.0 * r, 3.0 * r],
            v: [0.0, 3.0 * r * r],
            w: [0.0, 3.0 * r.powi(4)],
        }
    }
}

/// Result of integrating the triple density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleIntegral {
    pub integral: f64,
    pub evaluations: u64,
    /// Evaluations skipped because the root polish failed near a fold of the map.
    pub masked: u64,
}

/// Gauss-Legendre order of the inner integral along `w`.
pub const INNER_ORDER: usize = 48;

/// Range of `w` over real triples with the given `u` and `v`. Its endpoints are the
/// images of triples with a repeated coordinate, where the density has inverse
/// square-root singularities.
pub fn w_range(u: f64, v: f64) -> Option<(f64, f64)> {
    let disc = 6.0 * v - 2.0 * u * u;
    if disc <= 0.0 {
        return None;
    }
    let w_at = |a: f64| 2.0 * a.powi(4) + (u - 2.0 * a).powi(4);
    let (w1, w2) = (w_at((2.0 * u + disc.sqrt()) / 6.0), w_at((2.0 * u - disc.sqrt()) / 6.0));
    Some((w1.min(w2), w1.max(w2)))
}

/// Integral of the triple density over `bx`: midpoint rule on a `cells x cells` grid
/// in `(u, v)`, and along `w` a Gauss-Legendre rule after the substitution
/// `w = w_lo + (w_hi - w_lo)(1 - cos t)/2`, which cancels the edge singularities.
pub fn integrate_triple_density(m: &Measure, bx: &TripleBox, cells: usize) -> Result<TripleIntegral> {
    if cells == 0 {
        return Err(Error::InvalidArgument("cells must be positive".into()));
    }
    if m.is_discrete() {
        return Err(Error::InvalidArgument("triple density needs a density measure".into()));
    }
    let (nodes, weights) = crate::quadrature::gauss_legendre(INNER_ORDER);
    let du = (bx.u[1] - bx.u[0]) / cells as f64;
    let dv = (bx.v[1] - bx.v[0]) / cells as f64;
    let rows: Vec<(f64, u64, u64)> = (0..cells)
        .into_par_iter()
        .map(|i| {
            let u = bx.u[0] + du * (i as f64 + 0.5);
            let (mut sum, mut evals, mut masked) = (0.0, 0, 0);
            for j in 0..cells {
                let v = bx.v[0] + dv * (j as f64 + 0.5);
                let Some((a, b)) = w_range(u, v) else { continue };
                let (lo, hi) = (a.max(bx.w[0]), b.min(bx.w[1]));
                if !(hi > lo) {
                    continue;
                }
                let angle = |w: f64| (1.0 - 2.0 * (w - a) / (b - a)).clamp(-1.0, 1.0).acos();
                let (t_lo, t_hi) = (angle(lo), angle(hi));
                let half = 0.5 * (t_hi - t_lo);
                let mut inner = 0.0;
                for (x, wt) in nodes.iter().zip(&weights) {
                    let t = t_lo + half * (x + 1.0);
                    let w = a + 0.5 * (b - a) * (1.0 - t.cos());
                    let dw = 0.5 * (b - a) * t.sin();
                    evals += 1;
                    match triple_density(m, u, v, w) {
                        Ok(d) => inner += wt * d * dw,
                        Err(_) => masked += 1,
                    }
                }
                sum += inner * half;
            }
            (sum * du * dv, evals, masked)
        })
        .collect();
    Ok(TripleIntegral {
        integral: rows.iter().map(|r| r.0).sum(),
        evaluations: rows.iter().map(|r| r.1).sum(),
        masked: rows.iter().map(|r| r.2).sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Finite,
    Suspect,
}

/// Outcome of the integrability diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionStar {
    pub p: f64,
    pub estimate: f64,
    /// Median-of-means estimates on the first quarter, half and all of the draws.
    pub nested_estimates: [f64; 3],
    pub relative_spread: f64,
    pub verdict: Verdict,
}

/// Blocks in the median-of-means estimate.
pub const MOM_BLOCKS: usize = 32;
/// Relative spread of the nested estimates below which the integral is called finite.
pub const SPREAD_LIMIT: f64 = 0.2;

fn median_of_means(values: &[f64]) -> f64 {
    let size = values.len() / MOM_BLOCKS;
    let mut means: Vec<f64> = values
        .chunks_exact(size.max(1))
        .take(MOM_BLOCKS)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let k = means.len();
    if k % 2 == 1 {
        means[k / 2]
    } else {
        0.5 * (means[k / 2 - 1] + means[k / 2])
    }
}

/// Monte Carlo diagnostic for the finiteness of
/// `int f^p(x) f^p(y) f^p(z) / |(x+y+z)(x-y)(y-z)(z-x)|^{p-1}` over the support cube.
/// The verdict compares median-of-means estimates on nested prefixes of the draws:
/// a divergent integral keeps growing with the sample size.
pub fn condition_star_estimate(m: &Measure, p: f64, samples: usize, seed: u64) -> Result<ConditionStar> {
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p = {p} must lie in [1, 2]")));
    }
    let Some((_, lower, upper)) = m.density_law() else {
        return Err(Error::InvalidArgument("condition (*) needs a density measure".into()));
    };
    if samples < 4 * MOM_BLOCKS {
        return Err(Error::InvalidArgument(format!(
            "at least {} samples are required",
            4 * MOM_BLOCKS
        )));
    }
    let width = upper - lower;
    let volume = width * width * width;
    let chunk = 1 << 14;
    let values: Vec<f64> = (0..samples.div_ceil(chunk))
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed.wrapping_add(c as u64));
            let len = chunk.min(samples - c * chunk);
            (0..len)
                .map(|_| {
                    let x = lower + width * rng.random::<f64>();
                    let y = lower + width * rng.random::<f64>();
                    let z = lower + width * rng.random::<f64>();
                    let f = |t: f64| m.pdf(t).unwrap_or(0.0).powf(p);
                    let num = f(x) * f(y) * f(z);
                    if p == 1.0 || num == 0.0 {
                        return volume * num;
                    }
                    let den = ((x + y + z) * (x - y) * (y - z) * (z - x)).abs().powf(p - 1.0);
                    volume * num / den
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let nested = [
        median_of_means(&values[..samples / 4]),
        median_of_means(&values[..samples / 2]),
        median_of_means(&values),
    ];
    let estimate = nested[2];
    let hi = nested.iter().cloned().fold(f64::MIN, f64::max);
    let lo = nested.iter().cloned().fold(f64::MAX, f64::min);
    let relative_spread = if estimate.is_finite() && estimate > 0.0 {
        (hi - lo) / estimate
    } else {
        f64::INFINITY
    };
    Ok(ConditionStar {
        p,
        estimate,
        nested_estimates: nested,
        relative_spread,
        verdict: if relative_spread < SPREAD_LIMIT {
            Verdict::Finite
        } else {
            Verdict::Suspect
        },
    })
}
