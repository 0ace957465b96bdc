//! Deterministic controlled equation `d phi = -dt + 2 sqrt(phi) dh` from the
//! singular start `phi_0 = 0`.
//!
//! The origin is a 0/0 point of the vector field, so the first few nodes are
//! seeded with the asymptotic expansion
//!
//! ```text
//! phi_t ~ -t + (4/3) i hdot(0) t^(3/2),
//! ```
//!
//! obtained by substituting `sqrt(phi) ~ i sqrt(t)` into the equation. After
//! the handoff node the scheme steps explicitly: midpoint (RK2) in the
//! control term, plain Euler in the (exactly integrable) drift.

use std::sync::Arc;

use num_complex::Complex64;

use crate::control::Control;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::path::ComplexPath;
use crate::sde::branch_sqrt;

/// Discretization of the controlled ODE solver.
#[derive(Debug, Clone)]
pub struct OdeScheme {
    pub grid: Arc<TimeGrid>,
    /// Nodes covered by the asymptotic startup (>= 1).
    pub startup_nodes: usize,
    /// Self-convergence / handoff-residual target.
    pub tolerance: f64,
}

impl OdeScheme {
    pub fn new(grid: Arc<TimeGrid>) -> Self {
        let startup_nodes = 4.min(grid.steps() - 1).max(1);
        OdeScheme { grid, startup_nodes, tolerance: 1e-8 }
    }

    fn validate(&self) -> Result<()> {
        if self.startup_nodes < 1 || self.startup_nodes >= self.grid.steps() {
            return Err(Error::invalid(
                "startup_nodes",
                format!("need 1 <= startup_nodes < N, got {}", self.startup_nodes),
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance", "tolerance must be > 0"));
        }
        Ok(())
    }
}

/// Solution of the controlled ODE plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub path: ComplexPath,
    /// `min_k Im(sqrt(phi_{t_k})) / sqrt(t_k)` over `k >= 1`; strictly
    /// positive for Cameron-Martin controls.
    pub min_im_ratio: f64,
    /// Residual of the startup expansion in the integrated equation at the
    /// handoff node.
    pub handoff_residual: f64,
}

/// Startup expansion value `-t + (4/3) i hdot0 t^(3/2)`.
fn startup_value(t: f64, hdot0: f64) -> Complex64 {
    Complex64::new(-t, 4.0 / 3.0 * hdot0 * t.powf(1.5))
}

/// Solve `d phi = -dt + 2 sqrt(phi) dh`, `phi_0 = 0`.
///
/// The control is re-sampled onto the scheme grid through its
/// piecewise-constant derivative, so any compatible control grid works.
pub fn solve_phi(h: &Control, scheme: &OdeScheme) -> Result<OdeSolution> {
    scheme.validate()?;
    let grid = &scheme.grid;
    let n = grid.steps();
    let hdot: Vec<f64> = (0..n).map(|k| h.hdot_at(grid.midpoint(k))).collect();
    let hdot0 = hdot[0];

    let mut values = Vec::with_capacity(n + 1);
    values.push(Complex64::new(0.0, 0.0));
    for k in 1..=scheme.startup_nodes {
        values.push(startup_value(grid.node(k), hdot0));
    }

    // Residual of the expansion in the integrated equation
    // phi_s + s - 2 int_0^s sqrt(phi) dh over the startup region.
    let s = grid.node(scheme.startup_nodes);
    let mut integral = Complex64::new(0.0, 0.0);
    for k in 0..scheme.startup_nodes {
        let tm = grid.midpoint(k);
        integral += branch_sqrt(startup_value(tm, hdot0)) * (hdot[k] * grid.dt(k));
    }
    let handoff_residual =
        (values[scheme.startup_nodes] + Complex64::new(s, 0.0) - 2.0 * integral).norm();
    if handoff_residual > scheme.tolerance {
        return Err(Error::Refinement { residual: handoff_residual, tolerance: scheme.tolerance });
    }

    let mut phi = values[scheme.startup_nodes];
    for k in scheme.startup_nodes..n {
        let dt = grid.dt(k);
        let dh = hdot[k] * dt;
        let predictor = phi + Complex64::new(-0.5 * dt, 0.0) + branch_sqrt(phi) * dh;
        phi += Complex64::new(-dt, 0.0) + 2.0 * branch_sqrt(predictor) * dh;
        values.push(phi);
    }

    let min_im_ratio = (1..=n)
        .map(|k| branch_sqrt(values[k]).im / grid.node(k).sqrt())
        .fold(f64::INFINITY, f64::min);

    Ok(OdeSolution {
        path: ComplexPath::new(grid.clone(), values)?,
        min_im_ratio,
        handoff_residual,
    })
}

/// Sup-norm distances `sup_k |phi^{h_n} - phi^{h}|` for a sequence of
/// controls, probing the continuity of `h -> phi^h`.
pub fn continuity_probe(
    h_seq: &[Control],
    h_limit: &Control,
    scheme: &OdeScheme,
) -> Result<Vec<f64>> {
    let reference = solve_phi(h_limit, scheme)?.path;
    h_seq
        .iter()
        .map(|h| solve_phi(h, scheme)?.path.sup_distance(&reference))
        .collect()
}
