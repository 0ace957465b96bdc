//! Monte Carlo verification of the LDP: ball probabilities under direct
//! and Girsanov-tilted sampling, slope extraction `eps^2 log p` versus
//! `-I`, convergence of the tilted process to its deterministic limit, the
//! exponential supermartingale, pathwise bounds and Holder tails.
//!
//! Every routine is a pure function of `(seed, grid, parameters)`; path
//! ensembles parallelize over stream ids and all reductions are pairwise
//! over the fixed stream order, so results do not depend on the thread
//! count.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

use crate::control::Control;
use crate::dual::TestField;
use crate::error::{Error, Result};
use crate::grid::{delta_grid, TimeGrid};
use crate::noise::{sample_noise, NoisePath, SimParams};
use crate::ode::OdeScheme;
use crate::path::ComplexPath;
use crate::rate::eval_i;
use crate::sde::{branch_sqrt, simulate_z, simulate_z_h};
use crate::stats;

/// Sampling regime of a ball-probability estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum McMode {
    Direct,
    Tilted,
}

impl std::fmt::Display for McMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            McMode::Direct => write!(f, "direct"),
            McMode::Tilted => write!(f, "tilted"),
        }
    }
}

/// Girsanov tilt: shift the driving noise by `dh / eps`.
#[derive(Debug, Clone)]
pub struct TiltSpec {
    pub h: Control,
    pub epsilon: f64,
}

/// Outcome of a ball-probability estimate.
#[derive(Debug, Clone, Serialize)]
pub struct MCReport {
    pub n: u64,
    pub hits: u64,
    /// Sum of importance weights over hit paths (equals `hits` in direct
    /// mode).
    pub weight_sum: f64,
    pub p_hat: f64,
    /// 95% half-width (Clopper-Pearson in direct mode, normal in tilted).
    pub ci95: f64,
    /// `eps^2 log p_hat`; for zero hits the one-sided Clopper-Pearson
    /// upper bound replaces `log 0` and `zero_hits` is set.
    pub eps2_log_p: f64,
    pub zero_hits: bool,
    pub mode: McMode,
    /// Effective sample size `(sum w)^2 / sum w^2` over all paths.
    pub ess: f64,
}

/// Direct-mode noise floor; below it ball hits starve and the estimate is
/// meaningless. Tilted mode has no floor.
pub const DIRECT_EPS_FLOOR: f64 = 0.05;

/// Discrete Girsanov log-weight for a tilted path, assembled from the same
/// increments that drove it (the first interval is drift-only in the
/// scheme, so it carries no tilt and no weight).
fn tilt_log_weight(h: &Control, eps: f64, noise: &NoisePath) -> f64 {
    let grid = noise.grid();
    let mut lin = 0.0;
    let mut quad = 0.0;
    for k in 1..grid.steps() {
        let hd = h.hdot(k);
        lin += hd * noise.increment(k);
        quad += hd * hd * grid.dt(k);
    }
    -lin / eps - quad / (2.0 * eps * eps)
}

/// Estimate `P(Z^eps in B_r(target))` by direct counting or by
/// importance sampling under the Cameron-Martin tilt.
pub fn estimate_ball_prob(
    target: &ComplexPath,
    r: f64,
    eps: f64,
    n: u64,
    tilt: Option<&Control>,
    seed: u64,
) -> Result<MCReport> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one sample"));
    }
    if !(r > 0.0) {
        return Err(Error::invalid("r", "ball radius must be > 0"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("epsilon", "noise scale must be > 0"));
    }
    if tilt.is_none() && eps < DIRECT_EPS_FLOOR {
        return Err(Error::invalid(
            "epsilon",
            format!("direct mode floor is {DIRECT_EPS_FLOOR}; use a tilt below it"),
        ));
    }
    let grid = target.grid().clone();
    if let Some(h) = tilt {
        if !h.grid().same_as(&grid) {
            return Err(Error::GridMismatch("tilt control grid differs from target grid".into()));
        }
    }

    // Per-path summaries in stream order: (hit indicator * weight, weight).
    let summaries: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|stream| {
            let params = SimParams::new(eps, grid.clone(), seed, stream);
            let noise = sample_noise(&params);
            match tilt {
                None => {
                    let z = simulate_z(&params, &noise).expect("grids match by construction");
                    let hit = z.sup_distance(target).expect("same grid") < r;
                    (hit as u64 as f64, 1.0)
                }
                Some(h) => {
                    let z = simulate_z_h(&params, h, &noise).expect("grids match by construction");
                    let hit = z.sup_distance(target).expect("same grid") < r;
                    let w = tilt_log_weight(h, eps, &noise).exp();
                    (if hit { w } else { 0.0 }, w)
                }
            }
        })
        .collect();

    let contrib: Vec<f64> = summaries.iter().map(|s| s.0).collect();
    let weights: Vec<f64> = summaries.iter().map(|s| s.1).collect();
    let hits = contrib.iter().filter(|&&c| c > 0.0).count() as u64;
    let weight_sum = stats::pairwise_sum(&contrib);
    let p_hat = weight_sum / n as f64;
    let mode = if tilt.is_some() { McMode::Tilted } else { McMode::Direct };

    let ci95 = match mode {
        McMode::Direct => {
            let (lo, hi) = stats::clopper_pearson(hits, n, 0.95);
            0.5 * (hi - lo)
        }
        McMode::Tilted => 1.96 * stats::stderr_of_mean(&contrib),
    };
    let w_sq: Vec<f64> = weights.iter().map(|w| w * w).collect();
    let ess = {
        let sw = stats::pairwise_sum(&weights);
        let sw2 = stats::pairwise_sum(&w_sq);
        if sw2 > 0.0 {
            sw * sw / sw2
        } else {
            0.0
        }
    };

    let zero_hits = hits == 0;
    let log_arg = if zero_hits {
        stats::clopper_pearson_upper(0, n, 0.95)
    } else {
        p_hat
    };
    Ok(MCReport {
        n,
        hits,
        weight_sum,
        p_hat,
        ci95,
        eps2_log_p: eps * eps * log_arg.ln(),
        zero_hits,
        mode,
        ess,
    })
}

/// One row of the slope table `eps^2 log p_hat` versus `-I(target)`.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeRow {
    pub eps: f64,
    pub r: f64,
    pub n: u64,
    pub mode: McMode,
    pub p_hat: f64,
    pub ci95: f64,
    pub eps2_log_p: f64,
    pub neg_i: f64,
    /// `|eps^2 log p_hat + I|`.
    pub gap: f64,
    pub zero_hits: bool,
}

impl SlopeRow {
    /// CI half-width of `eps^2 log p_hat` by the delta method.
    pub fn gap_ci(&self) -> f64 {
        if self.p_hat > 0.0 {
            self.eps * self.eps * self.ci95 / self.p_hat
        } else {
            f64::INFINITY
        }
    }
}

/// Slope extraction over a decreasing list of noise scales.
///
/// Zero-hit direct rows are flagged, not fatal. The target must have a
/// finite rate value.
pub fn ldp_slope(
    target: &ComplexPath,
    r: f64,
    eps_list: &[f64],
    n: u64,
    tilt: Option<&Control>,
    seed: u64,
) -> Result<Vec<SlopeRow>> {
    if eps_list.is_empty() || !eps_list.windows(2).all(|w| w[1] < w[0]) {
        return Err(Error::invalid("eps_list", "need a decreasing, nonempty schedule"));
    }
    let rate = eval_i(target);
    let i_val = rate.value.finite().ok_or_else(|| {
        Error::invalid("target", "slope extraction needs a target with finite rate")
    })?;
    eps_list
        .iter()
        .map(|&eps| {
            let rep = estimate_ball_prob(target, r, eps, n, tilt, seed)?;
            Ok(SlopeRow {
                eps,
                r,
                n,
                mode: rep.mode,
                p_hat: rep.p_hat,
                ci95: rep.ci95,
                eps2_log_p: rep.eps2_log_p,
                neg_i: -i_val,
                gap: (rep.eps2_log_p + i_val).abs(),
                zero_hits: rep.zero_hits,
            })
        })
        .collect()
}

/// Write the slope table in its CSV wire format.
pub fn write_slope_csv<W: std::io::Write>(mut w: W, rows: &[SlopeRow]) -> Result<()> {
    writeln!(w, "eps,r,n,mode,p_hat,ci95,eps2_log_p,neg_I")?;
    for row in rows {
        writeln!(
            w,
            "{:.16e},{:.16e},{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            row.eps, row.r, row.n, row.mode, row.p_hat, row.ci95, row.eps2_log_p, row.neg_i
        )?;
    }
    Ok(())
}

/// Quantiles of `sup_k |Z^{eps,h} - phi^h|` at one noise scale.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    pub mean_sq: f64,
}

/// Convergence-in-probability probe for `Z^{eps,h} -> phi^h`.
pub fn convergence_probe(
    h: &Control,
    eps_list: &[f64],
    n: u64,
    seed: u64,
    scheme: &OdeScheme,
) -> Result<Vec<ConvergenceRow>> {
    let reference = crate::ode::solve_phi(h, scheme)?.path;
    let grid = scheme.grid.clone();
    let h = h.resample(grid.clone())?;
    eps_list
        .iter()
        .map(|&eps| {
            let mut dists: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|stream| {
                    let params = SimParams::new(eps, grid.clone(), seed, stream);
                    let noise = sample_noise(&params);
                    let z = simulate_z_h(&params, &h, &noise).expect("grids match");
                    z.sup_distance(&reference).expect("same grid")
                })
                .collect();
            let sq: Vec<f64> = dists.iter().map(|d| d * d).collect();
            let mean_sq = stats::mean(&sq);
            dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
            Ok(ConvergenceRow {
                eps,
                q50: stats::quantile_sorted(&dists, 0.5),
                q90: stats::quantile_sorted(&dists, 0.9),
                q99: stats::quantile_sorted(&dists, 0.99),
                mean_sq,
            })
        })
        .collect()
}

/// Report of the exponential-supermartingale check.
#[derive(Debug, Clone, Serialize)]
pub struct SupermartingaleReport {
    pub n: u64,
    pub mean: f64,
    pub stderr: f64,
    /// Largest per-path discrepancy between the two log-M computations.
    pub max_log_gap: f64,
    pub ess: f64,
    /// Set when the effective sample size degenerates.
    pub flagged: bool,
}

impl SupermartingaleReport {
    /// The supermartingale inequality `E M <= 1` at three standard errors.
    pub fn satisfied(&self) -> bool {
        self.mean <= 1.0 + 3.0 * self.stderr
    }
}

/// log M via the Ito sums of the defining stochastic exponential:
/// `(1/eps^2)[sum f eps U dB + sum g eps V dB] - (1/2eps^2) sum (fU+gV)^2 dt`.
fn log_m_ito(field: &TestField, eps: f64, z: &ComplexPath, noise: &NoisePath) -> f64 {
    let grid = z.grid();
    let mut lin = 0.0;
    let mut quad = 0.0;
    for k in 0..grid.steps() {
        let root = branch_sqrt(z.value(k));
        let fu_gv = field.f()[k] * root.re + field.g()[k] * root.im;
        lin += (field.f()[k] * root.re + field.g()[k] * root.im) * eps * noise.increment(k);
        quad += fu_gv * fu_gv * grid.dt(k);
    }
    (lin - 0.5 * quad) / (eps * eps)
}

/// log M via the path functional `J_{f,g}` in its discrete Stieltjes form,
/// which touches only the path increments, never the noise.
fn log_m_functional(field: &TestField, eps: f64, z: &ComplexPath) -> f64 {
    let grid = z.grid();
    let mut lin = 0.0;
    let mut quad = 0.0;
    for k in 0..grid.steps() {
        let dt = grid.dt(k);
        let dz = z.value(k + 1) - z.value(k);
        lin += field.f()[k] * (dz.re + dt) + field.g()[k] * dz.im;
        let v = z.value(k);
        let m = v.norm();
        quad += (field.f()[k] * field.f()[k] * 0.5 * (m + v.re)
            + field.g()[k] * field.g()[k] * 0.5 * (m - v.re)
            + field.f()[k] * field.g()[k] * v.im)
            * dt;
    }
    (0.5 * lin - 0.5 * quad) / (eps * eps)
}

/// Empirical mean of `M^eps_{f,g}(Z^eps)` plus the two-route identity
/// check on `log M`.
pub fn supermartingale_check(
    field: &TestField,
    eps: f64,
    n: u64,
    seed: u64,
) -> Result<SupermartingaleReport> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one sample"));
    }
    if !(eps >= 0.1) {
        return Err(Error::invalid(
            "epsilon",
            "weights degenerate below eps = 0.1; the check is not meaningful there",
        ));
    }
    let grid = field.grid().clone();
    let per_path: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|stream| {
            let params = SimParams::new(eps, grid.clone(), seed, stream);
            let noise = sample_noise(&params);
            let z = simulate_z(&params, &noise).expect("grids match");
            let l1 = log_m_ito(field, eps, &z, &noise);
            let l2 = log_m_functional(field, eps, &z);
            (l1.exp(), (l1 - l2).abs())
        })
        .collect();
    let ms: Vec<f64> = per_path.iter().map(|p| p.0).collect();
    let max_log_gap = per_path.iter().map(|p| p.1).fold(0.0, f64::max);
    let mean = stats::mean(&ms);
    let stderr = stats::stderr_of_mean(&ms);
    let sq: Vec<f64> = ms.iter().map(|m| m * m).collect();
    let ess = {
        let s = stats::pairwise_sum(&ms);
        let s2 = stats::pairwise_sum(&sq);
        if s2 > 0.0 {
            s * s / s2
        } else {
            0.0
        }
    };
    let flagged = ess < 0.01 * n as f64;
    Ok(SupermartingaleReport { n, mean, stderr, max_log_gap, ess, flagged })
}

/// Violation counts for the pathwise bounds
/// `|U| <= 2 sup (eps|B| + |h|)` and `V <= sqrt((eps^2+1) t)`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub paths: u64,
    pub nodes_checked: u64,
    pub u_violations: u64,
    pub v_violations: u64,
    pub slack: f64,
}

/// Check both bounds on an ensemble of tilted paths; `slack` defaults to
/// the one-step overshoot allowance [`delta_grid`], and `slack = 0` is the
/// adversarial setting where discretization overshoot must show up.
pub fn pathwise_bounds_check(
    eps: f64,
    h: &Control,
    n: u64,
    seed: u64,
    slack: Option<f64>,
) -> Result<BoundsReport> {
    let grid = h.grid().clone();
    let slack = slack.unwrap_or_else(|| delta_grid(&grid));
    let counts: Vec<(u64, u64)> = (0..n)
        .into_par_iter()
        .map(|stream| {
            let params = SimParams::new(eps, grid.clone(), seed, stream);
            let noise = sample_noise(&params);
            let z = simulate_z_h(&params, h, &noise).expect("grids match");
            let mut sup_drive = 0.0f64;
            let mut u_bad = 0;
            let mut v_bad = 0;
            for k in 0..=grid.steps() {
                sup_drive = sup_drive
                    .max(eps * noise.cumulative()[k].abs() + h.values()[k].abs());
                let root = branch_sqrt(z.value(k));
                if root.re.abs() > 2.0 * sup_drive + slack {
                    u_bad += 1;
                }
                if root.im > ((eps * eps + 1.0) * grid.node(k)).sqrt() + slack {
                    v_bad += 1;
                }
            }
            (u_bad, v_bad)
        })
        .collect();
    Ok(BoundsReport {
        paths: n,
        nodes_checked: n * (grid.steps() as u64 + 1),
        u_violations: counts.iter().map(|c| c.0).sum(),
        v_violations: counts.iter().map(|c| c.1).sum(),
        slack,
    })
}

/// One row of the Holder-tail trend table.
#[derive(Debug, Clone, Serialize)]
pub struct TailRow {
    pub eps: f64,
    pub r: f64,
    pub n: u64,
    pub tail_prob: f64,
    /// `eps^2 log` of the tail, `None` for zero hits (the -inf sentinel).
    pub eps2_log_tail: Option<f64>,
}

/// Discrete Holder seminorm over node pairs separated by at least
/// `4 max dt` (closer pairs are pure noise artifacts).
pub fn holder_seminorm(z: &ComplexPath, alpha: f64) -> f64 {
    let grid = z.grid();
    let min_gap = 4.0 * grid.max_dt();
    let nodes = grid.nodes();
    let mut best = 0.0f64;
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            let gap = nodes[j] - nodes[i];
            if gap < min_gap {
                continue;
            }
            let ratio = (z.value(j) - z.value(i)).norm() / gap.powf(alpha);
            best = best.max(ratio);
        }
    }
    best
}

/// Empirical tails of the Holder seminorm: the trend table behind the
/// exponential-tightness probe (trends only; the double limit is not
/// observable at finite resolution).
pub fn holder_tail_probe(
    eps_list: &[f64],
    alpha: f64,
    r_list: &[f64],
    n: u64,
    seed: u64,
    grid: &Arc<TimeGrid>,
) -> Result<Vec<TailRow>> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::invalid("alpha", format!("need alpha in (0, 1/2), got {alpha}")));
    }
    let mut rows = Vec::new();
    for &eps in eps_list {
        let norms: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|stream| {
                let params = SimParams::new(eps, grid.clone(), seed, stream);
                let noise = sample_noise(&params);
                let z = simulate_z(&params, &noise).expect("grids match");
                holder_seminorm(&z, alpha)
            })
            .collect();
        for &r in r_list {
            let hits = norms.iter().filter(|&&v| v >= r).count() as u64;
            let tail_prob = hits as f64 / n as f64;
            rows.push(TailRow {
                eps,
                r,
                n,
                tail_prob,
                eps2_log_tail: (hits > 0).then(|| eps * eps * tail_prob.ln()),
            });
        }
    }
    Ok(rows)
}

/// Samples of the fluctuation process `F = (Z + t)/eps` at the grid nodes
/// closest to the requested times; the raw material of the CLT checks.
pub fn fluctuation_samples(
    eps: f64,
    n: u64,
    seed: u64,
    grid: &Arc<TimeGrid>,
    times: &[f64],
) -> Result<Vec<Vec<Complex64>>> {
    if !(eps > 0.0) {
        return Err(Error::invalid("epsilon", "fluctuation scaling needs eps > 0"));
    }
    let idx: Vec<usize> = times
        .iter()
        .map(|&t| {
            grid.nodes()
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - t).abs().partial_cmp(&(b.1 - t).abs()).unwrap())
                .map(|(i, _)| i)
                .unwrap()
        })
        .collect();
    Ok((0..n)
        .into_par_iter()
        .map(|stream| {
            let params = SimParams::new(eps, grid.clone(), seed, stream);
            let noise = sample_noise(&params);
            let z = simulate_z(&params, &noise).expect("grids match");
            let f = crate::sde::fluctuation_path(&z, eps).expect("eps > 0");
            idx.iter().map(|&i| f.value(i)).collect()
        })
        .collect())
}
