//! Euler-Maruyama schemes for the squared Bessel family.
//!
//! The central object is the small-noise complex SDE
//!
//! ```text
//! dZ_t = -dt + 2 eps sqrt(Z_t) dB_t,        Z_0 = 0,
//! ```
//!
//! together with its Cameron-Martin tilt (`eps dB -> eps dB + dh`), the
//! classical real process `dX = 2 sqrt(X) dB + delta dt`, and the unscaled
//! complex process `dY = 2 sqrt(Y) dB - eta dt` with `Y = eta Z` under
//! `eps = 1/sqrt(eta)`.
//!
//! `sqrt` always means the branch square root with values in the closed
//! upper half-plane. The first step of every complex scheme is drift-only,
//! which places the path on the negative real axis where the root is
//! `i sqrt(t)`; the continuum solution stays off `[0, inf)` almost surely
//! for all `t > 0`, so the slit tie-break below should essentially never
//! fire on simulated data (a counter makes that assertable).

use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;

use crate::control::Control;
use crate::error::{Error, Result};
use crate::noise::{sample_noise, NoisePath, SimParams};
use crate::path::ComplexPath;

static SLIT_HITS: AtomicU64 = AtomicU64::new(0);

/// Number of times `branch_sqrt` was called on the open slit `(0, inf)`
/// since the last reset.
pub fn slit_hits() -> u64 {
    SLIT_HITS.load(Ordering::Relaxed)
}

pub fn reset_slit_hits() {
    SLIT_HITS.store(0, Ordering::Relaxed);
}

/// Branch square root: `w^2 = z` with `Im(w) >= 0`.
///
/// On the slit `[0, inf)` the tie-break returns the nonnegative real root;
/// hits of the open slit are counted because the event has probability zero
/// on the processes simulated here.
pub fn branch_sqrt(z: Complex64) -> Complex64 {
    if z.im == 0.0 {
        if z.re >= 0.0 {
            if z.re > 0.0 {
                SLIT_HITS.fetch_add(1, Ordering::Relaxed);
            }
            return Complex64::new(z.re.sqrt(), 0.0);
        }
        return Complex64::new(0.0, (-z.re).sqrt());
    }
    // Principal root has Re >= 0; flip into the upper half-plane.
    let w = z.sqrt();
    if w.im < 0.0 {
        -w
    } else {
        w
    }
}

fn check_grids(params: &SimParams, noise: &NoisePath) -> Result<()> {
    if !params.grid.same_as(noise.grid()) {
        return Err(Error::GridMismatch(
            "noise grid differs from simulation grid".into(),
        ));
    }
    Ok(())
}

/// Euler-Maruyama path of `dZ = -dt + 2 eps sqrt(Z) dB` from `Z_0 = 0`.
///
/// The first step is pure drift (`Z_{t_1} = -t_1`); with `eps = 0` the
/// scheme returns exactly `-t_k`.
pub fn simulate_z(params: &SimParams, noise: &NoisePath) -> Result<ComplexPath> {
    let zero = Control::zero(params.grid.clone());
    simulate_z_h(params, &zero, noise)
}

/// Euler-Maruyama path of the tilted SDE
/// `dZ = -dt + 2 sqrt(Z) (eps dB + dh)`.
///
/// With `h = 0` this is bitwise identical to [`simulate_z`]; with
/// `eps = 0` it is an explicit Euler scheme for the controlled ODE.
pub fn simulate_z_h(params: &SimParams, h: &Control, noise: &NoisePath) -> Result<ComplexPath> {
    check_grids(params, noise)?;
    if !h.grid().same_as(&params.grid) {
        return Err(Error::GridMismatch("control grid differs from simulation grid".into()));
    }
    if !(params.epsilon >= 0.0) {
        return Err(Error::invalid("epsilon", "noise scale must be >= 0"));
    }
    let grid = &params.grid;
    let n = grid.steps();
    let eps = params.epsilon;
    let mut values = Vec::with_capacity(n + 1);
    values.push(Complex64::new(0.0, 0.0));
    // Drift-only startup.
    let mut z = Complex64::new(-grid.dt(0), 0.0);
    values.push(z);
    for k in 1..n {
        let dt = grid.dt(k);
        let dw = eps * noise.increment(k) + h.hdot(k) * dt;
        z += Complex64::new(-dt, 0.0) + 2.0 * branch_sqrt(z) * dw;
        values.push(z);
    }
    ComplexPath::new(grid.clone(), values)
}

/// Euler path of the unscaled complex SDE `dY = 2 sqrt(Y) dB - eta dt`.
///
/// Rescaling `Y/eta` reproduces [`simulate_z`] with `eps = 1/sqrt(eta)` on
/// the same noise up to roundoff; the substitution is exact.
pub fn simulate_y_eta(eta: f64, params: &SimParams, noise: &NoisePath) -> Result<ComplexPath> {
    check_grids(params, noise)?;
    if !(eta > 0.0) {
        return Err(Error::invalid("eta", "dimension parameter must be > 0"));
    }
    let grid = &params.grid;
    let n = grid.steps();
    let mut values = Vec::with_capacity(n + 1);
    values.push(Complex64::new(0.0, 0.0));
    let mut y = Complex64::new(-eta * grid.dt(0), 0.0);
    values.push(y);
    for k in 1..n {
        let dt = grid.dt(k);
        y += Complex64::new(-eta * dt, 0.0) + 2.0 * branch_sqrt(y) * noise.increment(k);
        values.push(y);
    }
    ComplexPath::new(grid.clone(), values)
}

/// A nonnegative real path plus the number of clamped negative excursions.
#[derive(Debug, Clone)]
pub struct RealPath {
    pub grid: std::sync::Arc<crate::grid::TimeGrid>,
    pub values: Vec<f64>,
    pub clamp_count: u64,
}

/// Euler path of the classical squared Bessel SDE
/// `dX = 2 sqrt(X) dB + delta dt` for `delta >= 0`.
///
/// Negative excursions produced by the discretization are clamped to zero
/// and counted; the complex schemes need no clamp.
pub fn simulate_x_delta(
    delta: f64,
    x0: f64,
    params: &SimParams,
    noise: &NoisePath,
) -> Result<RealPath> {
    check_grids(params, noise)?;
    if !(delta >= 0.0) {
        return Err(Error::invalid("delta", "negative dimension is the complex case; use simulate_z"));
    }
    if !(x0 >= 0.0) {
        return Err(Error::invalid("x0", "starting point must be >= 0"));
    }
    let grid = &params.grid;
    let n = grid.steps();
    let mut values = Vec::with_capacity(n + 1);
    values.push(x0);
    let mut x = x0;
    let mut clamp_count = 0;
    for k in 0..n {
        x += delta * grid.dt(k) + 2.0 * x.sqrt() * noise.increment(k);
        if x < 0.0 {
            x = 0.0;
            clamp_count += 1;
        }
        values.push(x);
    }
    Ok(RealPath { grid: grid.clone(), values, clamp_count })
}

/// Fluctuation process `F_t = (Z_t + t) / eps`, the discrete carrier of
/// `2 int sqrt(Z) dB`.
pub fn fluctuation_path(z: &ComplexPath, eps: f64) -> Result<ComplexPath> {
    if !(eps > 0.0) {
        return Err(Error::invalid("epsilon", "fluctuation scaling needs eps > 0"));
    }
    let grid = z.grid().clone();
    let values = grid
        .nodes()
        .iter()
        .zip(z.values())
        .map(|(&t, v)| (v + Complex64::new(t, 0.0)) / eps)
        .collect();
    ComplexPath::new(grid, values)
}

/// One sample of the SLE tip `sqrt(kappa Y_T)` for `kappa in (0, 4)`,
/// via `eta = 4/kappa - 1`, `eps = 1/sqrt(eta)` and `Y = eta Z`.
///
/// The result lies in the closed upper half-plane.
pub fn sle_tip_sample(kappa: f64, horizon: f64, params: &SimParams) -> Result<Complex64> {
    if !(kappa > 0.0 && kappa < 4.0) {
        return Err(Error::invalid("kappa", format!("need 0 < kappa < 4, got {kappa}")));
    }
    if !(horizon > 0.0) {
        return Err(Error::invalid("T", "horizon must be > 0"));
    }
    if params.grid.horizon() != horizon {
        return Err(Error::GridMismatch("grid horizon differs from requested T".into()));
    }
    let eta = 4.0 / kappa - 1.0;
    let eps = 1.0 / eta.sqrt();
    let p = SimParams { epsilon: eps, ..params.clone() };
    let noise = sample_noise(&p);
    let z = simulate_z(&p, &noise)?;
    Ok(branch_sqrt(kappa * eta * z.endpoint()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{delta_grid, TimeGrid};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid_n(n: usize) -> std::sync::Arc<TimeGrid> {
        TimeGrid::graded(1.0, n, 2.0).unwrap()
    }

    #[test]
    fn branch_sqrt_examples() {
        let i = Complex64::new(0.0, 1.0);
        assert_relative_eq!(branch_sqrt(Complex64::new(-1.0, 0.0)).re, 0.0);
        assert_relative_eq!(branch_sqrt(Complex64::new(-1.0, 0.0)).im, 1.0);
        let r = branch_sqrt(2.0 * i);
        assert_relative_eq!(r.re, 1.0, max_relative = 1e-12);
        assert_relative_eq!(r.im, 1.0, max_relative = 1e-12);
        reset_slit_hits();
        assert_eq!(branch_sqrt(Complex64::new(4.0, 0.0)), Complex64::new(2.0, 0.0));
        assert_eq!(slit_hits(), 1);
        assert_eq!(branch_sqrt(Complex64::new(0.0, 0.0)), Complex64::new(0.0, 0.0));
        assert_eq!(slit_hits(), 1);
    }

    proptest! {
        #[test]
        fn branch_sqrt_algebra(re in -1e6f64..1e6, im in -1e6f64..1e6) {
            let z = Complex64::new(re, im);
            let w = branch_sqrt(z);
            prop_assert!(w.im >= 0.0);
            let err = (w * w - z).norm();
            prop_assert!(err <= 1e-12 * z.norm().max(1.0), "err = {err}");
        }
    }

    #[test]
    fn eps_zero_is_drift_only() {
        let grid = grid_n(128);
        let p = SimParams::new(0.0, grid.clone(), 99, 0);
        let noise = sample_noise(&p);
        let z = simulate_z(&p, &noise).unwrap();
        for (t, v) in grid.nodes().iter().zip(z.values()) {
            assert_eq!(*v, Complex64::new(-t, 0.0));
        }
    }

    #[test]
    fn zero_tilt_is_bitwise_untilted() {
        let grid = grid_n(256);
        let p = SimParams::new(0.2, grid.clone(), 5, 11);
        let noise = sample_noise(&p);
        let a = simulate_z(&p, &noise).unwrap();
        let b = simulate_z_h(&p, &Control::zero(grid), &noise).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn sup_deviation_shrinks_with_eps() {
        // Monte Carlo oracle for Z^eps -> -t: median sup distance halves
        // roughly with eps.
        let grid = grid_n(256);
        let drift = ComplexPath::drift_only(grid.clone());
        let median_dev = |eps: f64| {
            let mut devs: Vec<f64> = (0..200)
                .map(|s| {
                    let p = SimParams::new(eps, grid.clone(), 1234, s);
                    let noise = sample_noise(&p);
                    simulate_z(&p, &noise).unwrap().sup_distance(&drift).unwrap()
                })
                .collect();
            devs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            devs[100]
        };
        let m = [median_dev(0.2), median_dev(0.1), median_dev(0.05)];
        assert!(m[0] > m[1] && m[1] > m[2], "medians {m:?}");
    }

    #[test]
    fn imaginary_root_bound_holds_pathwise() {
        // V_t <= sqrt((eps^2+1) t) up to one-step slack.
        let grid = grid_n(512);
        let slack = delta_grid(&grid);
        for s in 0..100 {
            let p = SimParams::new(0.1, grid.clone(), 77, s);
            let noise = sample_noise(&p);
            let z = simulate_z(&p, &noise).unwrap();
            for (k, v) in z.values().iter().enumerate() {
                let bound = ((0.1f64 * 0.1 + 1.0) * grid.node(k)).sqrt() + slack;
                assert!(branch_sqrt(*v).im <= bound, "node {k}");
            }
        }
    }

    #[test]
    fn scaling_identity_y_over_eta() {
        let grid = grid_n(256);
        let eta: f64 = 25.0;
        let p = SimParams::new(1.0 / eta.sqrt(), grid.clone(), 31, 2);
        let noise = sample_noise(&p);
        let z = simulate_z(&p, &noise).unwrap();
        let y = simulate_y_eta(eta, &p, &noise).unwrap();
        for (a, b) in z.values().iter().zip(y.values()) {
            assert!((a - b / eta).norm() <= 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn x_delta_absorbing_zero_and_mean() {
        let grid = grid_n(256);
        let p = SimParams::new(0.0, grid.clone(), 3, 0);
        let noise = sample_noise(&p);
        let x = simulate_x_delta(0.0, 0.0, &p, &noise).unwrap();
        assert!(x.values.iter().all(|&v| v == 0.0));

        // Martingale-drift oracle: E X_T = x0 + delta T.
        let n = 4000;
        let mut sum = 0.0;
        for s in 0..n {
            let ps = SimParams::new(0.0, grid.clone(), 10, s);
            let noise = sample_noise(&ps);
            sum += simulate_x_delta(2.0, 1.0, &ps, &noise).unwrap().values[256];
        }
        let mean = sum / n as f64;
        // std of X_T ~ sqrt(4 x0 T + 2 delta T^2) ~ 2.8
        let stderr = 3.0 / (n as f64).sqrt();
        assert!((mean - 3.0).abs() < 3.0 * stderr, "mean = {mean}");
    }

    #[test]
    fn x_delta_rejects_negative_dimension() {
        let grid = grid_n(8);
        let p = SimParams::new(0.0, grid, 3, 0);
        let noise = sample_noise(&p);
        assert!(simulate_x_delta(-1.0, 0.0, &p, &noise).is_err());
    }

    #[test]
    fn fluctuation_of_drift_path_is_zero() {
        let grid = grid_n(64);
        let f = fluctuation_path(&ComplexPath::drift_only(grid), 0.05).unwrap();
        assert!(f.values().iter().all(|v| v.norm() == 0.0));
        let grid = grid_n(64);
        assert!(fluctuation_path(&ComplexPath::drift_only(grid), 0.0).is_err());
    }

    #[test]
    fn sle_tip_stays_in_upper_half_plane() {
        let grid = grid_n(256);
        for s in 0..50 {
            let p = SimParams::new(0.0, grid.clone(), 8, s);
            let tip = sle_tip_sample(2.0, 1.0, &p).unwrap();
            assert!(tip.im >= 0.0);
        }
        let p = SimParams::new(0.0, grid, 8, 0);
        assert!(sle_tip_sample(4.5, 1.0, &p).is_err());
    }

    #[test]
    fn small_kappa_tip_concentrates_near_vertical() {
        // kappa -> 0 proxy: args cluster near pi/2 around the zero-energy
        // path, target |tip| ~ sqrt(kappa eta T) = sqrt((4 - kappa) T).
        let grid = grid_n(256);
        let args: Vec<f64> = (0..400)
            .map(|s| {
                let p = SimParams::new(0.0, grid.clone(), 21, s);
                sle_tip_sample(0.05, 1.0, &p).unwrap().arg()
            })
            .collect();
        let mean = args.iter().sum::<f64>() / args.len() as f64;
        let spread = args.iter().map(|a| (a - mean).abs()).fold(0.0, f64::max);
        assert!((mean - std::f64::consts::FRAC_PI_2).abs() < 0.1, "mean arg {mean}");
        assert!(spread < 0.8, "spread {spread}");
    }

    #[test]
    fn tip_arg_density_vanishes_at_axis() {
        // The tip stays off the real line: no samples with arg near 0 or pi.
        let grid = grid_n(256);
        let mut near_axis = 0;
        for s in 0..2000u64 {
            let p = SimParams::new(0.0, grid.clone(), 13, s);
            let a = sle_tip_sample(2.0, 1.0, &p).unwrap().arg();
            if a < 0.02 || a > std::f64::consts::PI - 0.02 {
                near_axis += 1;
            }
        }
        assert_eq!(near_axis, 0);
    }
}
