//! Variational dual of the rate functional.
//!
//! For test functions `f, g in C^1([0, T])` and a path `xi`,
//!
//! ```text
//! J_{f,g}(xi) = 1/2 [ int f d(Re xi + r) + int g d(Im xi) ]
//!             - 1/2 int [ f^2 (|xi|+Re xi)/2 + g^2 (|xi|-Re xi)/2 + f g Im xi ] dr,
//! ```
//!
//! and `sup_{f,g} J_{f,g}(xi) = I(xi)`. Restricted to a finite basis the
//! supremum is a concave quadratic `b.c - 1/2 c'Qc`; `Q` is positive
//! semi-definite because the quadratic term is `int (fU + gV)^2 dr` with
//! `U + iV = sqrt(xi)`. Directions where `fU + gV` vanishes on the path are
//! the degenerate ones: a component of `b` along them means the true
//! supremum is infinite.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::path::ComplexPath;
use crate::rate::RateValue;
use crate::sde::branch_sqrt;
use std::sync::Arc;

/// Relative eigenvalue cutoff separating the active and near-null spectrum
/// of the dual quadratic form.
pub const EIGEN_CUTOFF_REL: f64 = 1e-10;

/// Tolerance on the near-null-space component of the linear term; a larger
/// projection triggers the infinite sentinel.
pub const NULL_PROJ_TOL: f64 = 1e-6;

/// A `C^1` test pair `(f, g)` sampled on a grid: values and derivatives per
/// node, consistent under trapezoidal integration.
#[derive(Debug, Clone)]
pub struct TestField {
    grid: Arc<TimeGrid>,
    f: Vec<f64>,
    fdot: Vec<f64>,
    g: Vec<f64>,
    gdot: Vec<f64>,
}

impl TestField {
    /// Validates the value/derivative consistency invariant.
    pub fn new(
        grid: Arc<TimeGrid>,
        f: Vec<f64>,
        fdot: Vec<f64>,
        g: Vec<f64>,
        gdot: Vec<f64>,
    ) -> Result<Self> {
        let n = grid.nodes().len();
        if [f.len(), fdot.len(), g.len(), gdot.len()] != [n, n, n, n] {
            return Err(Error::GridMismatch("test field arrays must match the grid".into()));
        }
        for (vals, ders, name) in [(&f, &fdot, "f"), (&g, &gdot, "g")] {
            let scale = 1.0 + vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let mut acc = vals[0];
            for k in 0..grid.steps() {
                acc += 0.5 * (ders[k] + ders[k + 1]) * grid.dt(k);
                if (acc - vals[k + 1]).abs() > 1e-10 * scale {
                    return Err(Error::invalid(
                        "field",
                        format!("{name} values inconsistent with derivative at node {}", k + 1),
                    ));
                }
            }
        }
        Ok(TestField { grid, f, fdot, g, gdot })
    }

    /// Build from derivative functions; values are their trapezoidal
    /// integrals so the consistency invariant holds by construction.
    pub fn from_derivatives(
        grid: Arc<TimeGrid>,
        f0: f64,
        fdot: impl Fn(f64) -> f64,
        g0: f64,
        gdot: impl Fn(f64) -> f64,
    ) -> Self {
        let nodes = grid.nodes().to_vec();
        let build = |x0: f64, d: &dyn Fn(f64) -> f64| {
            let ders: Vec<f64> = nodes.iter().map(|&t| d(t)).collect();
            let mut vals = Vec::with_capacity(nodes.len());
            vals.push(x0);
            let mut acc = x0;
            for k in 0..nodes.len() - 1 {
                acc += 0.5 * (ders[k] + ders[k + 1]) * (nodes[k + 1] - nodes[k]);
                vals.push(acc);
            }
            (vals, ders)
        };
        let (f, fdot) = build(f0, &fdot);
        let (g, gdot) = build(g0, &gdot);
        TestField { grid, f, fdot, g, gdot }
    }

    pub fn constant(grid: Arc<TimeGrid>, f: f64, g: f64) -> Self {
        let n = grid.nodes().len();
        TestField {
            grid,
            f: vec![f; n],
            fdot: vec![0.0; n],
            g: vec![g; n],
            gdot: vec![0.0; n],
        }
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn fdot(&self) -> &[f64] {
        &self.fdot
    }

    pub fn gdot(&self) -> &[f64] {
        &self.gdot
    }
}

/// Pointwise coefficients of the quadratic term at a path value.
fn quad_coeffs(xi: Complex64) -> (f64, f64, f64) {
    let m = xi.norm();
    (0.5 * (m + xi.re), 0.5 * (m - xi.re), xi.im)
}

/// Evaluate `J_{f,g}(xi)`.
///
/// The Stieltjes integrals are computed through their integration-by-parts
/// form: boundary term minus `int (xi + r) df`, with the latter taken as an
/// exact sum over the nodal increments of `f` and `g` (so the quadrature is
/// bilinear in nodal values and agrees with the assembled quadratic model
/// to machine precision); the quadratic term uses interval midpoints.
pub fn eval_j(field: &TestField, xi: &ComplexPath) -> Result<f64> {
    if !field.grid().same_as(xi.grid()) {
        return Err(Error::GridMismatch("test field grid differs from path grid".into()));
    }
    let grid = xi.grid();
    let n = grid.steps();
    let horizon = grid.horizon();
    let end = xi.endpoint();

    let mut linear = field.f[n] * (end.re + horizon) + field.g[n] * end.im;
    let mut quad = 0.0;
    for k in 0..n {
        let dt = grid.dt(k);
        let tm = grid.midpoint(k);
        let xm = 0.5 * (xi.value(k) + xi.value(k + 1));
        let fm = 0.5 * (field.f[k] + field.f[k + 1]);
        let gm = 0.5 * (field.g[k] + field.g[k + 1]);
        let df = field.f[k + 1] - field.f[k];
        let dg = field.g[k + 1] - field.g[k];
        linear -= (xm.re + tm) * df + xm.im * dg;
        let (a, c, d) = quad_coeffs(xm);
        quad += (fm * fm * a + gm * gm * c + fm * gm * d) * dt;
    }
    Ok(0.5 * linear - 0.5 * quad)
}

/// The dual maximization restricted to a hat-function basis: maximize
/// `b.c - 1/2 c'Qc` over the `2m` coefficients of `f` and `g`.
#[derive(Debug, Clone)]
pub struct DualProgram {
    pub q: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Hat knots (shared by `f` and `g`).
    pub knots: Vec<f64>,
}

/// Value of hat `j` at time `t`; support is `[tau_{j-1}, tau_{j+1}]`. A
/// single-knot basis degenerates to the constant function 1.
fn hat(knots: &[f64], j: usize, t: f64) -> f64 {
    if knots.len() == 1 {
        return 1.0;
    }
    let tj = knots[j];
    if t == tj {
        1.0
    } else if t < tj {
        if j == 0 {
            return 1.0;
        }
        let tl = knots[j - 1];
        if t <= tl {
            0.0
        } else {
            (t - tl) / (tj - tl)
        }
    } else {
        if j + 1 == knots.len() {
            return 1.0;
        }
        let tr = knots[j + 1];
        if t >= tr {
            0.0
        } else {
            (tr - t) / (tr - tj)
        }
    }
}

/// Derivative of hat `j` at time `t`; evaluated only away from the kinks
/// (interval midpoints and such), so the one-sided values never matter.
fn hat_deriv(knots: &[f64], j: usize, t: f64) -> f64 {
    if knots.len() == 1 {
        return 0.0;
    }
    let tj = knots[j];
    if j > 0 && t > knots[j - 1] && t < tj {
        1.0 / (tj - knots[j - 1])
    } else if j + 1 < knots.len() && t > tj && t < knots[j + 1] {
        -1.0 / (knots[j + 1] - tj)
    } else {
        0.0
    }
}

/// Assemble the dual program for `m` hats per test function.
pub fn assemble_dual(xi: &ComplexPath, m: usize) -> Result<DualProgram> {
    if m < 1 {
        return Err(Error::invalid("m", "basis size must be >= 1"));
    }
    let grid = xi.grid();
    let horizon = grid.horizon();
    let n = grid.steps();
    let knots: Vec<f64> = if m == 1 {
        vec![0.0]
    } else {
        (0..m).map(|j| horizon * j as f64 / (m - 1) as f64).collect()
    };

    let dim = 2 * m;
    let mut q = DMatrix::<f64>::zeros(dim, dim);
    let mut b = DVector::<f64>::zeros(dim);

    // Boundary part of the linear term.
    let end = xi.endpoint();
    for j in 0..m {
        let hj = hat(&knots, j, horizon);
        b[j] += 0.5 * hj * (end.re + horizon);
        b[m + j] += 0.5 * hj * end.im;
    }

    // Quadrature identical to eval_j applied to each basis element: nodal
    // increments for the Stieltjes part, nodal averages for the quadratic,
    // so the assembled model matches eval_j on the span exactly.
    let mut w = vec![0.0f64; dim];
    for k in 0..n {
        let dt = grid.dt(k);
        let tm = grid.midpoint(k);
        let t0 = grid.node(k);
        let t1 = grid.node(k + 1);
        let xm = 0.5 * (xi.value(k) + xi.value(k + 1));
        let root = branch_sqrt(xm);
        // Linear term: -1/2 int (Re xi + r) df and -1/2 int (Im xi) dg.
        for j in 0..m {
            let dh = hat(&knots, j, t1) - hat(&knots, j, t0);
            if dh != 0.0 {
                b[j] -= 0.5 * (xm.re + tm) * dh;
                b[m + j] -= 0.5 * xm.im * dh;
            }
        }
        // Quadratic term: rank-one update with w = (hats*U | hats*V).
        let mut active: Vec<usize> = Vec::with_capacity(4);
        for j in 0..m {
            let hv = 0.5 * (hat(&knots, j, t0) + hat(&knots, j, t1));
            if hv != 0.0 {
                w[j] = hv * root.re;
                w[m + j] = hv * root.im;
                active.push(j);
                active.push(m + j);
            }
        }
        for &i in &active {
            for &jj in &active {
                q[(i, jj)] += w[i] * w[jj] * dt;
            }
        }
        for &i in &active {
            w[i] = 0.0;
        }
    }
    Ok(DualProgram { q, b, knots })
}

/// Outcome of the dual maximization.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub value: RateValue,
    /// Norm of the projection of `b` onto the near-null space of `Q`.
    pub null_projection: f64,
    pub lambda_max: f64,
    /// Optimal coefficients when finite (f block then g block).
    pub coefficients: Option<DVector<f64>>,
}

impl DualProgram {
    /// Concave-quadratic maximum via eigendecomposition with the
    /// degenerate-direction sentinel.
    pub fn solve(&self) -> DualSolution {
        let eig = self.q.clone().symmetric_eigen();
        let lambda_max = eig.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l));
        let cutoff = EIGEN_CUTOFF_REL * lambda_max;
        let bnorm = self.b.norm();

        let mut value = 0.0;
        let mut null_sq = 0.0;
        let mut coeff = DVector::<f64>::zeros(self.b.len());
        for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
            let v = eig.eigenvectors.column(i);
            let proj = v.dot(&self.b);
            if lambda > cutoff {
                value += proj * proj / (2.0 * lambda);
                coeff += (proj / lambda) * v;
            } else {
                null_sq += proj * proj;
            }
        }
        let null_projection = null_sq.sqrt();
        if lambda_max == 0.0 || null_projection > NULL_PROJ_TOL * (1.0 + bnorm) {
            // Q degenerate along b: the discrete shadow of the divergent
            // dichotomy. Entirely zero Q with zero b still means J = 0.
            if lambda_max == 0.0 && bnorm <= NULL_PROJ_TOL {
                return DualSolution {
                    value: RateValue::Finite(0.0),
                    null_projection,
                    lambda_max,
                    coefficients: None,
                };
            }
            return DualSolution {
                value: RateValue::Infinite,
                null_projection,
                lambda_max,
                coefficients: None,
            };
        }
        DualSolution {
            value: RateValue::Finite(value),
            null_projection,
            lambda_max,
            coefficients: Some(coeff),
        }
    }

    /// Evaluate the restricted quadratic model at coefficients `c`.
    pub fn objective(&self, c: &DVector<f64>) -> f64 {
        self.b.dot(c) - 0.5 * (&self.q * c).dot(c)
    }

    /// Materialize basis coefficients as a `TestField` on the path grid.
    pub fn field_from_coefficients(&self, grid: &Arc<TimeGrid>, c: &DVector<f64>) -> TestField {
        let m = self.knots.len();
        let nodes = grid.nodes();
        let mut f = vec![0.0; nodes.len()];
        let mut fdot = vec![0.0; nodes.len()];
        let mut g = vec![0.0; nodes.len()];
        let mut gdot = vec![0.0; nodes.len()];
        for (i, &t) in nodes.iter().enumerate() {
            for j in 0..m {
                let hv = hat(&self.knots, j, t);
                let hd = hat_deriv(&self.knots, j, t);
                f[i] += c[j] * hv;
                fdot[i] += c[j] * hd;
                g[i] += c[m + j] * hv;
                gdot[i] += c[m + j] * hd;
            }
        }
        TestField { grid: grid.clone(), f, fdot, g, gdot }
    }
}

/// `sup_{f,g} J_{f,g}(xi)` over `m` hats per function.
pub fn sup_j(xi: &ComplexPath, m: usize) -> Result<DualSolution> {
    Ok(assemble_dual(xi, m)?.solve())
}
