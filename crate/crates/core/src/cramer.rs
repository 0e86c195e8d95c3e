//! Log-Laplace transform of `(Z, Z^2, Z^4)`, its Legendre conjugate (the Cramer
//! transform) computed by damped Newton on the dual, and finite-difference checks of
//! the local expansion of the Cramer transform around `(0, sigma^2, mu4)`.

use nalgebra::{Cholesky, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_diff::{richardson, MixedStencil};
use crate::interaction::{f_term, r_n, TriplePoint};
use crate::measures::{Measure, MomentSet};

/// Exponential tilting parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DualPoint {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl DualPoint {
    pub const ORIGIN: DualPoint = DualPoint {
        u: 0.0,
        v: 0.0,
        w: 0.0,
    };

    pub const fn new(u: f64, v: f64, w: f64) -> Self {
        DualPoint { u, v, w }
    }

    fn vector(self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, self.w)
    }

    fn from_vector(v: &Vector3<f64>) -> Self {
        DualPoint::new(v[0], v[1], v[2])
    }
}

/// `Lambda` at a dual point together with the tilted moments `f_0..f_8`.
#[derive(Debug, Clone, Copy)]
struct Tilted {
    log_laplace: f64,
    f: [f64; 9],
}

impl Tilted {
    fn gradient(&self) -> Vector3<f64> {
        Vector3::new(self.f[1], self.f[2], self.f[4])
    }

    fn hessian(&self) -> Matrix3<f64> {
        let f = &self.f;
        let xy = f[3] - f[1] * f[2];
        let xz = f[5] - f[4] * f[1];
        let yz = f[6] - f[4] * f[2];
        Matrix3::new(
            f[2] - f[1] * f[1],
            xy,
            xz,
            xy,
            f[4] - f[2] * f[2],
            yz,
            xz,
            yz,
            f[8] - f[4] * f[4],
        )
    }
}

fn tilt(m: &Measure, d: DualPoint) -> Result<Tilted> {
    let nodes = m.nodes();
    let exponent = |x: f64| {
        let x2 = x * x;
        d.u * x + d.v * x2 + d.w * x2 * x2
    };
    let shift = nodes
        .iter()
        .map(|&(x, _)| exponent(x))
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::QuadratureFailure(shift));
    }
    let mut sums = [0.0; 9];
    let mut mass = 0.0;
    for &(x, w) in nodes {
        mass += w;
        let mut term = w * (exponent(x) - shift).exp();
        for s in sums.iter_mut() {
            *s += term;
            term *= x;
        }
    }
    let log_laplace = shift + (sums[0] / mass).ln();
    if !log_laplace.is_finite() {
        return Err(Error::QuadratureFailure(log_laplace));
    }
    let f = sums.map(|s| s / sums[0]);
    Ok(Tilted { log_laplace, f })
}

/// `ln E[exp(u Z + v Z^2 + w Z^4)]`, evaluated with a max shift.
pub fn log_laplace(m: &Measure, d: DualPoint) -> Result<f64> {
    Ok(tilt(m, d)?.log_laplace)
}

/// `f_j(u, v, w)`, the `j`-th moment of the tilted law, for `0 <= j <= 8`.
pub fn tilted_moment(m: &Measure, j: usize, d: DualPoint) -> Result<f64> {
    if j > 8 {
        return Err(Error::InvalidArgument(format!("tilted moment order {j} > 8")));
    }
    Ok(tilt(m, d)?.f[j])
}

/// `(f_1, f_2, f_4)`.
pub fn grad_log_laplace(m: &Measure, d: DualPoint) -> Result<[f64; 3]> {
    let g = tilt(m, d)?.gradient();
    Ok([g[0], g[1], g[2]])
}

/// Covariance matrix of `(Z, Z^2, Z^4)` under the tilted law.
pub fn hess_log_laplace(m: &Measure, d: DualPoint) -> Result<Matrix3<f64>> {
    Ok(tilt(m, d)?.hessian())
}

/// Solver controls for [`cramer_transform_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-10,
            max_iterations: 200,
        }
    }
}

/// A converged evaluation of the Cramer transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CramerPoint {
    pub primal: TriplePoint,
    pub dual: DualPoint,
    pub value: f64,
    /// Inverse of the log-Laplace Hessian at `dual`.
    pub hessian: [[f64; 3]; 3],
    pub converged: bool,
    pub iterations: usize,
}

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;
/// Relative pivot below which a Cholesky factor is treated as singular.
const PIVOT_TOL: f64 = 1e-13;

fn cholesky(h: Matrix3<f64>) -> Result<Cholesky<f64, nalgebra::U3>> {
    let chol = Cholesky::new(h).ok_or(Error::SingularHessian)?;
    let l = chol.l_dirty();
    for i in 0..3 {
        if !(l[(i, i)] * l[(i, i)] > PIVOT_TOL * h[(i, i)].abs()) {
            return Err(Error::SingularHessian);
        }
    }
    Ok(chol)
}

/// Newton direction, with a Levenberg shift when the tilted covariance is numerically
/// singular (far tilts concentrate the law on few atoms).
fn regularised_solve(h: Matrix3<f64>, r: &Vector3<f64>) -> Option<Vector3<f64>> {
    if let Ok(c) = cholesky(h) {
        return Some(c.solve(r));
    }
    let mut shift = 1e-12 * h.trace().abs().max(f64::MIN_POSITIVE);
    for _ in 0..40 {
        if let Ok(c) = cholesky(h + Matrix3::identity() * shift) {
            return Some(c.solve(r));
        }
        shift *= 10.0;
    }
    None
}

/// `sup_{(u,v,w)} (x u + y v + z w - Lambda(u, v, w))` from the origin.
pub fn cramer_transform(m: &Measure, x: f64, y: f64, z: f64) -> Result<CramerPoint> {
    cramer_transform_with(m, TriplePoint::new(x, y, z), SolverOptions::default())
}

pub fn cramer_transform_with(
    m: &Measure,
    p: TriplePoint,
    opts: SolverOptions,
) -> Result<CramerPoint> {
    let (dual, t, iterations) = maximise_dual(m, p, [true; 3], opts)?;
    let h = t.hessian();
    let inv = cholesky(h)?.inverse();
    let target = Vector3::new(p.x, p.y, p.z);
    let value = target.dot(&dual.vector()) - t.log_laplace;
    let mut hessian = [[0.0; 3]; 3];
    for (i, row) in hessian.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = inv[(i, j)];
        }
    }
    Ok(CramerPoint {
        primal: p,
        dual,
        value: value.max(0.0),
        hessian,
        converged: true,
        iterations,
    })
}

/// The two-dimensional transform of `(Z, Z^2)`: the dual `w` is frozen at zero and
/// `z` plays no role.
pub fn cramer_transform_frozen_w(m: &Measure, x: f64, y: f64) -> Result<f64> {
    let p = TriplePoint::new(x, y, 0.0);
    let (dual, t, _) = maximise_dual(m, p, [true, true, false], SolverOptions::default())?;
    Ok((x * dual.u + y * dual.v - t.log_laplace).max(0.0))
}

fn maximise_dual(
    m: &Measure,
    p: TriplePoint,
    active: [bool; 3],
    opts: SolverOptions,
) -> Result<(DualPoint, Tilted, usize)> {
    if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
        return Err(Error::NonFinite(f64::NAN));
    }
    let target = Vector3::new(p.x, p.y, p.z);
    let mask = |v: Vector3<f64>| {
        Vector3::new(
            if active[0] { v[0] } else { 0.0 },
            if active[1] { v[1] } else { 0.0 },
            if active[2] { v[2] } else { 0.0 },
        )
    };
    let masked_target = mask(target);
    let tol = opts.tolerance * (1.0 + masked_target.norm());
    let objective = |d: &Vector3<f64>, t: &Tilted| masked_target.dot(d) - t.log_laplace;
    let fail = |iterations: usize, reason: &str| Error::NoConvergence {
        x: p.x,
        y: p.y,
        z: p.z,
        iterations,
        reason: reason.into(),
    };

    let mut d = Vector3::zeros();
    let mut t = tilt(m, DualPoint::ORIGIN)?;
    for it in 0..=opts.max_iterations {
        let residual = mask(target - t.gradient());
        if residual.norm() <= tol {
            return Ok((DualPoint::from_vector(&d), t, it));
        }
        if it == opts.max_iterations {
            break;
        }
        if it == 0 {
            cholesky(t.hessian())?;
        }
        let mut h = t.hessian();
        for i in 0..3 {
            if !active[i] {
                for j in 0..3 {
                    h[(i, j)] = 0.0;
                    h[(j, i)] = 0.0;
                }
                h[(i, i)] = 1.0;
            }
        }
        let step = regularised_solve(h, &residual).ok_or_else(|| fail(it, "dual Hessian degenerated"))?;
        let slope = residual.dot(&step);
        let g0 = objective(&d, &t);
        let mut scale = 1.0;
        loop {
            let trial = d + step * scale;
            match tilt(m, DualPoint::from_vector(&trial)) {
                Ok(tt) => {
                    let g1 = objective(&trial, &tt);
                    // Near the optimum the objective change drops below rounding and
                    // the Armijo test becomes meaningless; the full step is accepted.
                    let rounding = 1e-14 * (1.0 + g0.abs());
                    if g1 >= g0 + ARMIJO * scale * slope || (scale == 1.0 && slope <= rounding) {
                        d = trial;
                        t = tt;
                        break;
                    }
                }
                Err(Error::QuadratureFailure(_)) => {}
                Err(e) => return Err(e),
            }
            scale *= 0.5;
            if scale < MIN_STEP {
                return Err(fail(it, "step collapse"));
            }
        }
    }
    Err(fail(opts.max_iterations, "iteration cap"))
}

/// Closed-form Hessian of the Cramer transform at `(0, sigma^2, mu4)`.
pub fn hess_cramer_at_minimum(ms: &MomentSet) -> Result<Matrix3<f64>> {
    let a = ms.a;
    if !(a > 0.0) {
        return Err(Error::DegenerateMeasure(a));
    }
    let off = (ms.mu4 * ms.sigma2 - ms.mu6) / a;
    Ok(Matrix3::new(
        1.0 / ms.sigma2,
        0.0,
        0.0,
        0.0,
        (ms.mu8 - ms.mu4 * ms.mu4) / a,
        off,
        0.0,
        off,
        (ms.mu4 - ms.sigma2 * ms.sigma2) / a,
    ))
}

/// Taylor coefficients of the Cramer transform at `(0, sigma^2, mu4)` in the
/// variables `(x, y - sigma^2, z - mu4)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCoefficients {
    /// `x^2`
    pub c200: f64,
    /// `x^2 (y - sigma^2)`
    pub c210: f64,
    /// `x^4`
    pub c400: f64,
    /// `x^6`
    pub c600: f64,
    /// `(y - sigma^2)^2`
    pub q_yy: f64,
    /// `(y - sigma^2)(z - mu4)`
    pub q_yz: f64,
    /// `(z - mu4)^2`
    pub q_zz: f64,
    /// Multi-indices whose coefficient vanishes.
    pub zeros: Vec<([u8; 3], f64)>,
}

impl ExpansionCoefficients {
    /// `q(y, z)`, the quadratic form in the centred `(y, z)` variables.
    pub fn q(&self, y: f64, z: f64) -> f64 {
        self.q_yy * y * y + self.q_yz * y * z + self.q_zz * z * z
    }
}

pub const ZERO_INDICES: [[u8; 3]; 5] = [[2, 0, 1], [3, 0, 0], [3, 1, 0], [3, 0, 1], [5, 0, 0]];

pub fn expansion_coefficients(ms: &MomentSet) -> Result<ExpansionCoefficients> {
    let a = ms.a;
    if !(a > 0.0) {
        return Err(Error::DegenerateMeasure(a));
    }
    let s2 = ms.sigma2;
    Ok(ExpansionCoefficients {
        c200: 1.0 / (2.0 * s2),
        c210: -1.0 / (2.0 * s2 * s2),
        c400: ms.mu4 / (12.0 * s2.powi(4)),
        c600: ms.sixth_order_coefficient(),
        q_yy: (ms.mu8 - ms.mu4 * ms.mu4) / (2.0 * a),
        q_yz: (ms.mu4 * s2 - ms.mu6) / a,
        q_zz: (ms.mu4 - s2 * s2) / (2.0 * a),
        zeros: ZERO_INDICES.iter().map(|&i| (i, 0.0)).collect(),
    })
}

/// Finite-difference plan for [`verify_expansion`]. Steps are relative to the
/// natural scales `sigma`, `sd(Z^2)` and `sd(Z^4)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FdPlan {
    /// Step for sixth-order and odd pure-`x` stencils, relative to `sigma`.
    pub h_high: f64,
    /// Step for orders up to four.
    pub h_low: f64,
    /// Accuracy order of each one-dimensional stencil.
    pub accuracy: usize,
    pub tol_order2: f64,
    pub tol_order34: f64,
    pub tol_order6: f64,
    /// Scaled magnitude below which a vanishing coefficient counts as zero.
    pub zero_floor: f64,
}

impl Default for FdPlan {
    fn default() -> Self {
        FdPlan {
            h_high: 0.1,
            h_low: 0.02,
            accuracy: 4,
            tol_order2: 1e-3,
            tol_order34: 1e-2,
            tol_order6: 5e-2,
            zero_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRow {
    pub label: String,
    pub multi_index: [u8; 3],
    pub closed_form: f64,
    pub finite_difference: f64,
    /// Relative error, or scaled magnitude for vanishing coefficients.
    pub rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub moments: MomentSet,
    pub plan: FdPlan,
    pub rows: Vec<ExpansionRow>,
    pub passed: bool,
}

fn label(idx: [u8; 3]) -> String {
    let order: u8 = idx.iter().sum();
    let mut s = format!("d{order}I");
    for (var, &k) in ["x", "y", "z"].iter().zip(&idx) {
        match k {
            0 => {}
            1 => s.push_str(&format!("/d{var}")),
            _ => s.push_str(&format!("/d{var}^{k}")),
        }
    }
    s
}

struct Fd<'a> {
    m: &'a Measure,
    center: [f64; 3],
    scales: [f64; 3],
    bounds: [f64; 3],
    accuracy: usize,
}

impl Fd<'_> {
    fn check_point(&self, p: [f64; 3]) -> Result<()> {
        let [x, y, z] = p;
        let inside = y > 0.0
            && x * x < y
            && y * y < z
            && x.abs() < self.bounds[0]
            && y < self.bounds[1]
            && z < self.bounds[2];
        if inside {
            Ok(())
        } else {
            Err(Error::StepTooLarge(format!("stencil point ({x}, {y}, {z})")))
        }
    }

    fn once(&self, stencil: &MixedStencil, steps: [f64; 3]) -> Result<f64> {
        let pts = stencil.points(self.center, steps);
        for (p, _) in &pts {
            self.check_point(*p)?;
        }
        let values: Vec<f64> = pts
            .par_iter()
            .map(|(p, w)| cramer_transform(self.m, p[0], p[1], p[2]).map(|c| w * c.value))
            .collect::<Result<_>>()?;
        Ok(values.iter().sum::<f64>() / stencil.scale(steps))
    }

    /// Richardson-extrapolated estimate with relative step `h` on every axis.
    fn derivative(&self, idx: [u8; 3], h: [f64; 3]) -> Result<f64> {
        let stencil = MixedStencil::new(idx.map(|k| k as usize), self.accuracy);
        let steps = [0, 1, 2].map(|i| h[i] * self.scales[i]);
        let coarse = self.once(&stencil, steps)?;
        let fine = self.once(&stencil, steps.map(|s| s / 2.0))?;
        Ok(richardson(coarse, fine, self.accuracy as u32))
    }

    fn unit(&self, idx: [u8; 3]) -> f64 {
        (0..3).map(|i| self.scales[i].powi(idx[i] as i32)).product()
    }
}

/// Compares finite differences of the numerically computed Cramer transform at
/// `(0, sigma^2, mu4)` with the closed-form derivatives.
pub fn verify_expansion(m: &Measure, plan: &FdPlan) -> Result<ExpansionReport> {
    m.require_symmetric()?;
    let ms = m.moments();
    let exact_hessian = hess_cramer_at_minimum(&ms)?;
    let s2 = ms.sigma2;
    let reach = m.nodes().iter().map(|n| n.0.abs()).fold(0.0, f64::max);
    let fd = Fd {
        m,
        center: [0.0, s2, ms.mu4],
        scales: [
            s2.sqrt(),
            (ms.mu4 - s2 * s2).sqrt(),
            (ms.mu8 - ms.mu4 * ms.mu4).sqrt(),
        ],
        bounds: [reach, reach * reach, reach.powi(4)],
        accuracy: plan.accuracy,
    };
    let lo = [plan.h_low; 3];
    let mut rows = Vec::new();

    for (i, j) in [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)] {
        let mut idx = [0u8; 3];
        idx[i] += 1;
        idx[j] += 1;
        let est = fd.derivative(idx, lo)?;
        let exact = exact_hessian[(i, j)];
        let norm = (exact_hessian[(i, i)] * exact_hessian[(j, j)]).abs().sqrt();
        let err = (est - exact).abs() / norm;
        rows.push(ExpansionRow {
            label: label(idx),
            multi_index: idx,
            closed_form: exact,
            finite_difference: est,
            rel_error: err,
            tolerance: plan.tol_order2,
            passed: err <= plan.tol_order2,
        });
    }

    let targets: [([u8; 3], f64, f64, [f64; 3]); 3] = [
        ([2, 1, 0], -1.0 / (s2 * s2), plan.tol_order34, lo),
        ([4, 0, 0], 2.0 * ms.mu4 / s2.powi(4), plan.tol_order34, lo),
        (
            [6, 0, 0],
            (40.0 * ms.mu4 * ms.mu4 - 16.0 * s2 * ms.mu6) / s2.powi(7),
            plan.tol_order6,
            [plan.h_high, plan.h_low, plan.h_low],
        ),
    ];
    for (idx, exact, tol, h) in targets {
        let est = fd.derivative(idx, h)?;
        let err = (est - exact).abs() / exact.abs();
        rows.push(ExpansionRow {
            label: label(idx),
            multi_index: idx,
            closed_form: exact,
            finite_difference: est,
            rel_error: err,
            tolerance: tol,
            passed: err <= tol,
        });
    }

    for idx in ZERO_INDICES {
        // Odd x-orders cancel by symmetry for any step, so the wide step is used to
        // keep rounding noise below the floor.
        let h = if idx[0] % 2 == 1 {
            [plan.h_high, plan.h_low, plan.h_low]
        } else {
            lo
        };
        let est = fd.derivative(idx, h)?;
        let scaled = est.abs() * fd.unit(idx);
        rows.push(ExpansionRow {
            label: label(idx),
            multi_index: idx,
            closed_form: 0.0,
            finite_difference: est,
            rel_error: scaled,
            tolerance: plan.zero_floor,
            passed: scaled <= plan.zero_floor,
        });
    }

    let passed = rows.iter().all(|r| r.passed);
    Ok(ExpansionReport {
        moments: ms,
        plan: *plan,
        rows,
        passed,
    })
}

/// `I - F - R_n` at a mean-scale point.
pub fn g_n(m: &Measure, n: f64, p: TriplePoint) -> Result<f64> {
    let i = cramer_transform(m, p.x, p.y, p.z)?.value;
    Ok(i - f_term(p.x, p.y)? - r_n(n, p)?)
}

/// Rectangular grid; an axis with a single point sits at its midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    pub points: [usize; 3],
}

impl GridSpec {
    pub fn axis(&self, k: usize) -> Vec<f64> {
        let (lo, hi, n) = (self.lower[k], self.upper[k], self.points[k]);
        if n <= 1 {
            return vec![0.5 * (lo + hi)];
        }
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn spacing(&self, k: usize) -> f64 {
        if self.points[k] <= 1 {
            0.0
        } else {
            (self.upper[k] - self.lower[k]) / (self.points[k] - 1) as f64
        }
    }

    /// Whether `p` lies in the grid cell (half-spacing box) centred on `node`.
    pub fn same_cell(&self, node: TriplePoint, p: TriplePoint) -> bool {
        let d = [node.x - p.x, node.y - p.y, node.z - p.z];
        (0..3).all(|k| d[k].abs() <= 0.5 * self.spacing(k) * (1.0 + 1e-9) + 1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeCell {
    pub point: TriplePoint,
    /// `None` where the point is outside the domain or the solver failed.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub n: f64,
    pub grid: GridSpec,
    pub argmin: TriplePoint,
    pub min_value: f64,
    pub masked: usize,
    pub cells: Vec<LandscapeCell>,
}

impl Landscape {
    /// CSV with columns `x,y,z,G_n`; masked cells have an empty value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,z,G_n\n");
        for c in &self.cells {
            let v = c.value.map(|v| format!("{v:.16e}")).unwrap_or_default();
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{}\n",
                c.point.x, c.point.y, c.point.z, v
            ));
        }
        out
    }
}

/// Evaluates `G_n = I - F - R_n` on a grid and locates its minimum.
pub fn g_n_landscape(m: &Measure, n: f64, grid: &GridSpec) -> Result<Landscape> {
    let (xs, ys, zs) = (grid.axis(0), grid.axis(1), grid.axis(2));
    let mut points = Vec::with_capacity(xs.len() * ys.len() * zs.len());
    for &x in &xs {
        for &y in &ys {
            for &z in &zs {
                points.push(TriplePoint::new(x, y, z));
            }
        }
    }
    let cells: Vec<LandscapeCell> = points
        .par_iter()
        .map(|&p| {
            let value = if p.in_theta_star() {
                g_n(m, n, p).ok()
            } else {
                None
            };
            LandscapeCell { point: p, value }
        })
        .collect();
    let masked = cells.iter().filter(|c| c.value.is_none()).count();
    let best = cells
        .iter()
        .filter_map(|c| c.value.map(|v| (c.point, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::NoConvergence {
            x: grid.lower[0],
            y: grid.lower[1],
            z: grid.lower[2],
            iterations: 0,
            reason: "every landscape cell is masked".into(),
        })?;
    Ok(Landscape {
        n,
        grid: *grid,
        argmin: best.0,
        min_value: best.1,
        masked,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub point: TriplePoint,
    pub n: f64,
    pub rescaled: f64,
    pub limit: f64,
    /// `|rescaled / limit - 1|`
    pub deviation: f64,
}

/// `n G_n(x / n^{1/6}, y / sqrt(n) + sigma^2, z / sqrt(n) + mu4)` against its limit
/// `q(y, z) + A x^6`.
pub fn rescaled_limit_check(
    m: &Measure,
    n_list: &[f64],
    points: &[TriplePoint],
) -> Result<Vec<LimitRow>> {
    let ms = m.moments();
    if !ms.is_admissible() {
        return Err(Error::InadmissibleMeasure(ms.criterion));
    }
    let coeffs = expansion_coefficients(&ms)?;
    let mut rows = Vec::new();
    for &p in points {
        let limit = coeffs.q(p.y, p.z) + coeffs.c600 * p.x.powi(6);
        for &n in n_list {
            let shifted = TriplePoint::new(
                p.x / n.powf(1.0 / 6.0),
                p.y / n.sqrt() + ms.sigma2,
                p.z / n.sqrt() + ms.mu4,
            );
            let rescaled = n * g_n(m, n, shifted)?;
            rows.push(LimitRow {
                point: p,
                n,
                rescaled,
                limit,
                deviation: (rescaled / limit - 1.0).abs(),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn five_point() -> Measure {
        Measure::discrete(&[(-2.0, 0.2), (-1.0, 0.2), (0.0, 0.2), (1.0, 0.2), (2.0, 0.2)])
            .unwrap()
    }

    #[test]
    fn log_laplace_examples() {
        let m = five_point();
        assert_eq!(log_laplace(&m, DualPoint::ORIGIN).unwrap(), 0.0);
        let e = std::f64::consts::E;
        let exact = ((e * e + e + 1.0 + 1.0 / e + 1.0 / (e * e)) / 5.0).ln();
        let got = log_laplace(&m, DualPoint::new(1.0, 0.0, 0.0)).unwrap();
        assert!((got - exact).abs() < 1e-15);
        let d = DualPoint::new(0.3, -0.2, 0.05);
        let mirrored = DualPoint::new(-0.3, -0.2, 0.05);
        assert!((log_laplace(&m, d).unwrap() - log_laplace(&m, mirrored).unwrap()).abs() < 1e-15);
        // Large tilts stay finite thanks to the shift.
        assert!(log_laplace(&m, DualPoint::new(0.0, 0.0, 300.0)).unwrap().is_finite());
    }

    #[test]
    fn tilted_moments_at_origin() {
        let m = five_point();
        let expect = [1.0, 0.0, 2.0, 0.0, 6.8, 0.0, 26.0, 0.0, 102.8];
        for (j, e) in expect.iter().enumerate() {
            assert!((tilted_moment(&m, j, DualPoint::ORIGIN).unwrap() - e).abs() < 1e-12);
        }
        assert!(tilted_moment(&m, 9, DualPoint::ORIGIN).is_err());
    }

    #[test]
    fn hessian_at_origin() {
        let h = hess_log_laplace(&five_point(), DualPoint::ORIGIN).unwrap();
        let expect = Matrix3::new(2.0, 0.0, 0.0, 0.0, 2.8, 12.4, 0.0, 12.4, 56.56);
        assert!((h - expect).abs().max() < 1e-12);
        assert!((h.determinant() - 2.0 * 4.608).abs() < 1e-9);
    }

    #[test]
    fn transform_at_minimum() {
        let m = five_point();
        let c = cramer_transform(&m, 0.0, 2.0, 6.8).unwrap();
        assert_eq!(c.value, 0.0);
        assert_eq!(c.dual, DualPoint::ORIGIN);
        assert_eq!(c.iterations, 0);
    }

    #[test]
    fn transform_symmetric_in_x() {
        let m = five_point();
        let a = cramer_transform(&m, 0.4, 1.9, 6.5).unwrap();
        let b = cramer_transform(&m, -0.4, 1.9, 6.5).unwrap();
        assert!((a.value - b.value).abs() < 1e-13);
        assert!(a.value > 0.0);
    }

    #[test]
    fn closed_form_hessian_five_point() {
        let ms = five_point().moments();
        let h = hess_cramer_at_minimum(&ms).unwrap();
        let expect = Matrix3::new(
            0.5,
            0.0,
            0.0,
            0.0,
            56.56 / 4.608,
            (13.6 - 26.0) / 4.608,
            0.0,
            -12.4 / 4.608,
            2.8 / 4.608,
        );
        assert!((h - expect).abs().max() < 1e-10);
        let inv = hess_log_laplace(&five_point(), DualPoint::ORIGIN)
            .unwrap()
            .try_inverse()
            .unwrap();
        assert!((h - inv).abs().max() < 1e-10);
    }

    #[test]
    fn degenerate_three_point() {
        let m = Measure::discrete(&[(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]).unwrap();
        let ms = m.moments();
        assert!(matches!(hess_cramer_at_minimum(&ms), Err(Error::DegenerateMeasure(_))));
        assert!(matches!(expansion_coefficients(&ms), Err(Error::DegenerateMeasure(_))));
        assert!(matches!(
            cramer_transform(&m, 0.1, 0.5, 0.5),
            Err(Error::SingularHessian)
        ));
    }

    #[test]
    fn five_point_coefficients() {
        let c = expansion_coefficients(&five_point().moments()).unwrap();
        assert!((c.c600 - 127.2 / 11520.0).abs() < 1e-15);
        assert!((c.c200 - 0.25).abs() < 1e-15);
        assert!((c.c210 + 0.125).abs() < 1e-15);
        assert!((c.c400 - 6.8 / 192.0).abs() < 1e-15);
        assert!(c.zeros.iter().all(|z| z.1 == 0.0) && c.zeros.len() == 5);
        let disc = c.q_yz * c.q_yz - 4.0 * c.q_yy * c.q_zz;
        assert!(disc < 0.0);
    }

    #[test]
    fn frozen_w_is_a_lower_bound() {
        let m = five_point();
        for &(x, y, z) in &[(0.3, 1.8, 6.0), (-0.5, 2.4, 8.8), (0.1, 2.0, 6.8)] {
            let full = cramer_transform(&m, x, y, z).unwrap().value;
            let frozen = cramer_transform_frozen_w(&m, x, y).unwrap();
            assert!(full >= frozen - 1e-12, "{full} {frozen}");
        }
    }

    #[test]
    fn outside_domain_reports_no_convergence() {
        let m = five_point();
        assert!(matches!(
            cramer_transform(&m, 0.0, 1.5, 6.5),
            Err(Error::NoConvergence { .. }) | Err(Error::SingularHessian)
        ));
        assert!(cramer_transform(&m, 3.0, 9.5, 90.0).is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(label([2, 1, 0]), "d3I/dx^2/dy");
        assert_eq!(label([6, 0, 0]), "d6I/dx^6");
    }
}
