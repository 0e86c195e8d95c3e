//! Central finite-difference stencils from Fornberg's recursion, tensor products of
//! them for mixed partial derivatives, and one level of Richardson extrapolation.

/// Weights of the `order`-th derivative at `x0` for an arbitrary node set.
pub fn fornberg_weights(x0: f64, nodes: &[f64], order: usize) -> Vec<f64> {
    let n = nodes.len();
    assert!(n > order, "need more nodes than the derivative order");
    // c[i][k]: weight of node i for derivative k.
    let mut c = vec![vec![0.0; order + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// A symmetric stencil on integer offsets `-m..=m` (in units of the step).
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub offsets: Vec<i32>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl Stencil {
    /// Central stencil for the `order`-th derivative, accurate to `O(h^accuracy)`;
    /// `accuracy` must be even.
    pub fn central(order: usize, accuracy: usize) -> Self {
        assert!(accuracy.is_multiple_of(2) && accuracy > 0);
        if order == 0 {
            return Stencil {
                offsets: vec![0],
                weights: vec![1.0],
                order,
            };
        }
        let points = 2 * order.div_ceil(2) - 1 + accuracy;
        let m = (points / 2) as i32;
        let offsets: Vec<i32> = (-m..=m).collect();
        let nodes: Vec<f64> = offsets.iter().map(|&o| o as f64).collect();
        let mut weights = fornberg_weights(0.0, &nodes, order);
        // Central stencils are exactly (anti)symmetric; enforce it against rounding.
        let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
        let len = weights.len();
        for i in 0..len / 2 {
            let avg = 0.5 * (weights[i] * sign + weights[len - 1 - i]);
            weights[len - 1 - i] = avg;
            weights[i] = avg * sign;
        }
        if order % 2 == 1 {
            weights[len / 2] = 0.0;
        }
        Stencil {
            offsets,
            weights,
            order,
        }
    }

    /// Sum of absolute weights, which bounds how evaluation noise is amplified.
    pub fn noise_gain(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }
}

/// Tensor-product stencil for `d^{a+b+c} f / dx^a dy^b dz^c`.
#[derive(Debug, Clone)]
pub struct MixedStencil {
    pub axes: [Stencil; 3],
}

impl MixedStencil {
    pub fn new(orders: [usize; 3], accuracy: usize) -> Self {
        MixedStencil {
            axes: orders.map(|o| Stencil::central(o, accuracy)),
        }
    }

    /// Points `center + offset * step` with nonzero combined weight.
    pub fn points(&self, center: [f64; 3], steps: [f64; 3]) -> Vec<([f64; 3], f64)> {
        let [sx, sy, sz] = &self.axes;
        let mut out = Vec::new();
        for (ox, wx) in sx.offsets.iter().zip(&sx.weights) {
            for (oy, wy) in sy.offsets.iter().zip(&sy.weights) {
                for (oz, wz) in sz.offsets.iter().zip(&sz.weights) {
                    let w = wx * wy * wz;
                    if w != 0.0 {
                        out.push((
                            [
                                center[0] + *ox as f64 * steps[0],
                                center[1] + *oy as f64 * steps[1],
                                center[2] + *oz as f64 * steps[2],
                            ],
                            w,
                        ));
                    }
                }
            }
        }
        out
    }

    /// Divisor `h_x^a h_y^b h_z^c`.
    pub fn scale(&self, steps: [f64; 3]) -> f64 {
        (0..3)
            .map(|i| steps[i].powi(self.axes[i].order as i32))
            .product()
    }

    pub fn total_order(&self) -> usize {
        self.axes.iter().map(|s| s.order).sum()
    }
}

/// Eliminates the leading `h^p` error term from estimates at `h` and `h/2`.
pub fn richardson(coarse: f64, fine: f64, p: u32) -> f64 {
    let k = 2f64.powi(p as i32);
    (k * fine - coarse) / (k - 1.0)
}
