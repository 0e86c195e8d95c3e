//! Composite Gauss-Legendre quadrature with dyadic panel refinement.

use crate::error::{Error, Result};

/// Points per panel of the composite rule.
pub const PANEL_ORDER: usize = 16;

/// Nodes and weights of the `order`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(order, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = order as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Nodes and weights of the composite rule with `panels` equal panels on [lower, upper].
pub fn composite_rule(lower: f64, upper: f64, panels: usize) -> Vec<(f64, f64)> {
    let (gx, gw) = gauss_legendre(PANEL_ORDER);
    let width = (upper - lower) / panels as f64;
    let mut out = Vec::with_capacity(panels * PANEL_ORDER);
    for p in 0..panels {
        let a = lower + width * p as f64;
        let mid = a + 0.5 * width;
        for (x, w) in gx.iter().zip(&gw) {
            out.push((mid + 0.5 * width * x, 0.5 * width * w));
        }
    }
    out
}

/// Quadrature nodes paired with weights.
pub type Rule = Vec<(f64, f64)>;

/// Integrates `f` over [lower, upper], doubling the panel count from `initial_panels`
/// until every component of the vector-valued integrand changes by at most `rel_tol`
/// (relative to the largest component magnitude). Returns the accepted rule together
/// with the integrals.
pub fn adaptive_vector<F, const K: usize>(
    lower: f64,
    upper: f64,
    initial_panels: usize,
    max_panels: usize,
    rel_tol: f64,
    f: F,
) -> Result<(Rule, [f64; K])>
where
    F: Fn(f64) -> [f64; K],
{
    let integrate = |rule: &[(f64, f64)]| {
        let mut acc = [0.0; K];
        for &(x, w) in rule {
            let v = f(x);
            for k in 0..K {
                acc[k] += w * v[k];
            }
        }
        acc
    };
    let mut panels = initial_panels.max(1);
    let mut rule = composite_rule(lower, upper, panels);
    let mut prev = integrate(&rule);
    let mut last_change = f64::INFINITY;
    while panels < max_panels {
        panels *= 2;
        let next_rule = composite_rule(lower, upper, panels);
        let next = integrate(&next_rule);
        let change = (0..K)
            .map(|k| {
                let scale = next[k].abs().max(prev[k].abs()).max(f64::MIN_POSITIVE);
                (next[k] - prev[k]).abs() / scale
            })
            .fold(0.0, f64::max);
        if !change.is_finite() {
            return Err(Error::QuadratureFailure(change));
        }
        rule = next_rule;
        prev = next;
        last_change = change;
        if change <= rel_tol {
            return Ok((rule, prev));
        }
    }
    Err(Error::QuadratureFailure(last_change))
}

/// Scalar adaptive integral; convenience wrapper over [`adaptive_vector`].
pub fn integrate<F: Fn(f64) -> f64>(lower: f64, upper: f64, rel_tol: f64, f: F) -> Result<f64> {
    let (_, v) = adaptive_vector(lower, upper, 4, 1 << 16, rel_tol, |x| [f(x)])?;
    Ok(v[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_nodes_are_symmetric() {
        for order in [1, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(order);
            let total: f64 = w.iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "order {order}: {total}");
            for i in 0..order {
                assert!((x[i] + x[order - 1 - i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sixteen_point_rule_is_exact_for_degree_31() {
        let (x, w) = gauss_legendre(16);
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((got - 2.0 / 31.0).abs() < 1e-14);
        let odd: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(31)).sum();
        assert!(odd.abs() < 1e-15);
    }

    #[test]
    fn adaptive_gaussian_integral() {
        let v = integrate(-10.0, 10.0, 1e-12, |x| (-x * x).exp()).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn refinement_cap_reports_failure() {
        let r = adaptive_vector(0.0, 1.0, 1, 4, 1e-15, |x| [x.sqrt() * (1.0 / x).sin()]);
        assert!(matches!(r, Err(Error::QuadratureFailure(_))));
    }
}
