//! One function per subcommand: resolve parameters, run the module,
//! emit artifacts, fill the manifest.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use serde_json::json;

use besq_core::control::Control;
use besq_core::dual::sup_j;
use besq_core::geodesic::{min_energy_to_point, tip_rate_closed_form, GeodesicProblem};
use besq_core::mc::{
    convergence_probe, estimate_ball_prob, fluctuation_samples, holder_tail_probe, ldp_slope,
    pathwise_bounds_check, supermartingale_check, write_slope_csv,
};
use besq_core::noise::{sample_noise, SimParams};
use besq_core::ode::{solve_phi, OdeScheme};
use besq_core::rate::eval_i;
use besq_core::sde::{simulate_z, simulate_z_h, sle_tip_sample};
use besq_core::{Complex64, ComplexPath, TimeGrid};

use crate::cli::*;
use crate::config::{parse_f64_list, resolve, resolve_opt, FileConfig};
use crate::manifest::RunContext;
use crate::CliError;

fn read_path_csv(path: &Path) -> Result<ComplexPath, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))?;
    Ok(ComplexPath::read_csv(BufReader::new(file))?)
}

fn read_control_csv(path: &Path) -> Result<Control, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))?;
    Ok(Control::read_csv(BufReader::new(file))?)
}

/// Grid from the shared T/N/gamma parameters.
fn make_grid(horizon: f64, steps: usize, gamma: f64) -> Result<Arc<TimeGrid>, CliError> {
    Ok(TimeGrid::graded(horizon, steps, gamma)?)
}

/// Control from either a CSV file or a constant derivative, resampled to
/// the target grid.
fn make_control(
    file_arg: &Option<std::path::PathBuf>,
    hdot_const: Option<f64>,
    cfg: &FileConfig,
    grid: &Arc<TimeGrid>,
    ctx: &mut RunContext,
) -> Result<Control, CliError> {
    let file_arg = match file_arg {
        Some(p) => Some(p.clone()),
        None => resolve_opt::<std::path::PathBuf>(None, cfg, "control")?,
    };
    if let Some(p) = file_arg {
        ctx.record("control", p.display());
        return Ok(read_control_csv(&p)?.resample(grid.clone())?);
    }
    let c = resolve(hdot_const, cfg, "hdot-const", Some(1.0))?;
    ctx.record("hdot-const", c);
    Ok(Control::from_hdot_fn(grid.clone(), |_| c)?)
}

pub fn cmd_simulate(a: &SimulateArgs, cfg: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let mut ctx = RunContext::new(&g.out, "simulate")?;
    let eps = resolve(a.eps, cfg, "eps", None::<f64>)?;
    let horizon = resolve(a.horizon, cfg, "T", Some(1.0))?;
    let steps = resolve(a.steps, cfg, "N", Some(4096))?;
    let gamma = resolve(a.gamma, cfg, "gamma", Some(2.0))?;
    let paths = resolve(a.paths, cfg, "paths", Some(1u64))?;
    let kappa = resolve_opt(a.kappa, cfg, "kappa")?;
    if !(eps >= 0.0) {
        return Err(CliError::usage("eps must be >= 0"));
    }
    for (k, v) in [("eps", eps), ("T", horizon), ("gamma", gamma)] {
        ctx.record(k, v);
    }
    ctx.record("N", steps);
    ctx.record("paths", paths);
    ctx.record("seed", g.seed);
    let grid = make_grid(horizon, steps, gamma)?;

    if let Some(kappa) = kappa {
        if !(kappa > 0.0 && kappa < 4.0) {
            return Err(CliError::usage(format!("kappa must be in (0, 4), got {kappa}")));
        }
        ctx.record("kappa", kappa);
        let mut csv = String::from("path_id,re,im\n");
        for s in 0..paths {
            let params = SimParams::new(0.0, grid.clone(), g.seed, s);
            let tip = sle_tip_sample(kappa, horizon, &params)?;
            csv.push_str(&format!("{s},{:.16e},{:.16e}\n", tip.re, tip.im));
        }
        ctx.write_artifact("tip_samples.csv", csv.as_bytes())?;
        return ctx.finish();
    }

    let control = match &a.control {
        Some(p) => {
            ctx.record("control", p.display());
            Some(read_control_csv(p)?.resample(grid.clone())?)
        }
        None => None,
    };
    let mut emitted = Vec::new();
    for s in 0..paths {
        let params = SimParams::new(eps, grid.clone(), g.seed, s);
        let noise = sample_noise(&params);
        let z = match &control {
            Some(h) => simulate_z_h(&params, h, &noise)?,
            None => simulate_z(&params, &noise)?,
        };
        emitted.push(z);
    }
    if paths == 1 {
        ctx.write_artifact("z_path.csv", emitted[0].to_csv_string().as_bytes())?;
    } else {
        let mut bytes = Vec::new();
        besq_core::path::write_ensemble_csv(&mut bytes, &emitted)?;
        ctx.write_artifact("z_paths.csv", &bytes)?;
    }
    ctx.finish()
}

pub fn cmd_solve_ode(a: &SolveOdeArgs, cfg: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let mut ctx = RunContext::new(&g.out, "solve-ode")?;
    let horizon = resolve(a.horizon, cfg, "T", Some(1.0))?;
    let steps = resolve(a.steps, cfg, "N", Some(4096))?;
    let gamma = resolve(a.gamma, cfg, "gamma", Some(4.0))?;
    ctx.record("T", horizon);
    ctx.record("N", steps);
    ctx.record("gamma", gamma);
    let grid = make_grid(horizon, steps, gamma)?;
    let h = make_control(&a.control, a.hdot_const, cfg, &grid, &mut ctx)?;
    let sol = solve_phi(&h, &OdeScheme::new(grid))?;
    ctx.write_artifact("phi_path.csv", sol.path.to_csv_string().as_bytes())?;
    ctx.write_json(
        "solve_ode.json",
        &json!({
            "min_im_ratio": sol.min_im_ratio,
            "handoff_residual": sol.handoff_residual,
            "endpoint": { "re": sol.path.endpoint().re, "im": sol.path.endpoint().im },
        }),
    )?;
    ctx.finish()
}

pub fn cmd_rate(a: &RateArgs, cfg: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let mut ctx = RunContext::new(&g.out, "rate")?;
    let input = resolve(a.path.clone(), cfg, "path", None::<std::path::PathBuf>)?;
    ctx.record("path", input.display());
    let phi = read_path_csv(&input)?;
    let r = eval_i(&phi);
    ctx.write_json(
        "rate.json",
        &json!({
            "h1_ok": r.h1_ok,
            "h2_ok": r.h2_ok,
            "h3_ok": r.h3_ok,
            "value": r.value,
            "h2_sum": r.h2_sum,
        }),
    )?;
    ctx.finish()
}

pub fn cmd_sup_j(a: &SupJArgs, cfg: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let mut ctx = RunContext::new(&g.out, "sup-j")?;
    let input = resolve(a.path.clone(), cfg, "path", None::<std::path::PathBuf>)?;
    let m = resolve(a.m, cfg, "m", Some(64usize))?;
    ctx.record("path", input.display());
    ctx.record("m", m);
    let xi = read_path_csv(&input)?;
    let sol = sup_j(&xi, m)?;
    ctx.write_json(
        "sup_j.json",
        &json!({
            "m": m,
            "value": sol.value,
            "null_projection": sol.null_projection,
            "lambda_max": sol.lambda_max,
        }),
    )?;
    ctx.finish()
}

pub fn cmd_geodesic(a: &GeodesicArgs, cfg: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let mut ctx = RunContext::new(&g.out, "geodesic")?;
    let arg_z = resolve(a.arg_z, cfg, "arg-z", None::<f64>)?;
    let abs_z = resolve(a.abs_z, cfg, "abs-z", Some(1.0))?;
    let m = resolve(a.m, cfg, "m", Some(64usize))?;
    let steps = resolve(a.steps, cfg, "N", Some(1024usize))?;
    let horizon = resolve_opt(a.horizon, cfg, "T")?;
    if !(arg_z > 0.0 && arg_z < std::f64::consts::PI) {
        return Err(CliError::usage(format!("arg-z must be in (0, pi), got {arg_z}")));
    }
    if !(abs_z > 0.0) {
        return Err(CliError::usage("abs-z must be > 0"));
    }
    let z = Complex64::from_polar(abs_z, arg_z);
    let mut problem = GeodesicProblem::new(z)?;
    problem.control_dim = m;
    problem.grid_steps = steps;
    problem.horizon = horizon;
    ctx.record("arg-z", arg_z);
    ctx.record("abs-z", abs_z);
    ctx.record("m", m);
    ctx.record("N", steps);
    ctx.record("T", problem.horizon_or_default());
    let result = min_energy_to_point(&problem)?;
    let closed_form = tip_rate_closed_form(z)?;
    ctx.write_artifact("control.csv", result.control.to_csv_string().as_bytes())?;
    ctx.write_json(
        "geodesic.json",
        &json!({
            "z": { "re": z.re, "im": z.im },
            "T": problem.horizon_or_default(),
            "m": m,
            "energy": result.energy,
            "closed_form": closed_form,
            "rel_err": if closed_form != 0.0 { (result.energy - closed_form).abs() / closed_form } else { result.energy.abs() },
            "defect": result.defect,
            "control_csv_ref": "control.csv",
        }),
    )?;
    ctx.finish()
}

pub fn cmd_ball_prob(a: &BallProbArgs, cfg: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let mut ctx = RunContext::new(&g.out, "ball-prob")?;
    let target_file = resolve(a.target.clone(), cfg, "target", None::<std::path::PathBuf>)?;
    let eps = resolve(a.eps, cfg, "eps", None::<f64>)?;
    let r = resolve(a.r, cfg, "r", None::<f64>)?;
    let n = resolve(a.n, cfg, "n", Some(10_000u64))?;
    let mode = resolve(a.mode.clone(), cfg, "mode", Some("direct".to_string()))?;
    ctx.record("target", target_file.display());
    for (k, v) in [("eps", eps), ("r", r)] {
        ctx.record(k, v);
    }
    ctx.record("n", n);
    ctx.record("mode", &mode);
    ctx.record("seed", g.seed);
    let target = read_path_csv(&target_file)?;
    let tilt = match mode.as_str() {
        "direct" => None,
        "tilted" => {
            let control_file =
                resolve(a.control.clone(), cfg, "control", None::<std::path::PathBuf>)
                    .map_err(|_| CliError::usage("tilted mode requires --control"))?;
            ctx.record("control", control_file.display());
            Some(read_control_csv(&control_file)?.resample(target.grid().clone())?)
        }
        other => return Err(CliError::usage(format!("mode must be direct|tilted, got {other}"))),
    };
    let report = estimate_ball_prob(&target, r, eps, n, tilt.as_ref(), g.seed)?;
    ctx.write_json("ball_prob.json", &report)?;
    ctx.finish()
}

pub fn cmd_ldp_slope(a: &LdpSlopeArgs, cfg: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let mut ctx = RunContext::new(&g.out, "ldp-slope")?;
    let horizon = resolve(a.horizon, cfg, "T", Some(1.0))?;
    let steps = resolve(a.steps, cfg, "N", Some(4096))?;
    let gamma = resolve(a.gamma, cfg, "gamma", Some(4.0))?;
    let r = resolve(a.r, cfg, "r", Some(0.3))?;
    let n = resolve(a.n, cfg, "n", Some(10_000u64))?;
    let mode = resolve(a.mode.clone(), cfg, "mode", Some("tilted".to_string()))?;
    let eps_raw = resolve(a.eps_list.clone(), cfg, "eps-list", Some("0.3,0.2,0.15,0.1".into()))?;
    let eps_list = parse_f64_list(&eps_raw, "eps-list")?;
    for (k, v) in [("T", horizon), ("gamma", gamma), ("r", r)] {
        ctx.record(k, v);
    }
    ctx.record("N", steps);
    ctx.record("n", n);
    ctx.record("mode", &mode);
    ctx.record("eps-list", &eps_raw);
    ctx.record("seed", g.seed);
    let grid = make_grid(horizon, steps, gamma)?;
    let h = make_control(&a.control, a.hdot_const, cfg, &grid, &mut ctx)?;
    let target = solve_phi(&h, &OdeScheme::new(grid))?.path;
    let tilt = match mode.as_str() {
        "direct" => None,
        "tilted" => Some(&h),
        other => return Err(CliError::usage(format!("mode must be direct|tilted, got {other}"))),
    };
    let rows = ldp_slope(&target, r, &eps_list, n, tilt, g.seed)?;
    let mut csv = Vec::new();
    write_slope_csv(&mut csv, &rows)?;
    ctx.write_artifact("ldp_slope.csv", &csv)?;
    ctx.write_json("ldp_slope.json", &rows)?;
    ctx.finish()
}

pub fn cmd_clt(a: &CltArgs, cfg: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let mut ctx = RunContext::new(&g.out, "clt")?;
    let eps = resolve(a.eps, cfg, "eps", None::<f64>)?;
    if !(eps > 0.0) {
        return Err(CliError::usage("fluctuation scaling needs eps > 0"));
    }
    let horizon = resolve(a.horizon, cfg, "T", Some(1.0))?;
    let steps = resolve(a.steps, cfg, "N", Some(1024))?;
    let n = resolve(a.n, cfg, "n", Some(10_000u64))?;
    let times_raw = resolve(a.times.clone(), cfg, "times", Some("0.5,1".to_string()))?;
    let times = parse_f64_list(&times_raw, "times")?;
    ctx.record("eps", eps);
    ctx.record("T", horizon);
    ctx.record("N", steps);
    ctx.record("n", n);
    ctx.record("times", &times_raw);
    ctx.record("seed", g.seed);
    let grid = TimeGrid::uniform(horizon, steps)?;
    let samples = fluctuation_samples(eps, n, g.seed, &grid, &times)?;
    let nn = samples.len() as f64;
    let mut entries = Vec::new();
    for (i, &s) in times.iter().enumerate() {
        for (j, &t) in times.iter().enumerate() {
            if j < i {
                continue;
            }
            let a_: Vec<f64> = samples.iter().map(|row| row[i].im).collect();
            let b_: Vec<f64> = samples.iter().map(|row| row[j].im).collect();
            let ma = a_.iter().sum::<f64>() / nn;
            let mb = b_.iter().sum::<f64>() / nn;
            let cov = a_.iter().zip(&b_).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / nn;
            entries.push(json!({
                "s": s, "t": t,
                "cov_im": cov,
                "target": 2.0 * (s * s).min(t * t),
            }));
        }
    }
    let re_vars: Vec<f64> = (0..times.len())
        .map(|i| {
            let re: Vec<f64> = samples.iter().map(|row| row[i].re).collect();
            let m = re.iter().sum::<f64>() / nn;
            re.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / nn
        })
        .collect();
    ctx.write_json(
        "clt.json",
        &json!({ "covariances": entries, "times": times, "var_re": re_vars }),
    )?;
    ctx.finish()
}

pub fn cmd_converge(a: &ConvergeArgs, cfg: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let mut ctx = RunContext::new(&g.out, "converge")?;
    let horizon = resolve(a.horizon, cfg, "T", Some(1.0))?;
    let steps = resolve(a.steps, cfg, "N", Some(1024))?;
    let gamma = resolve(a.gamma, cfg, "gamma", Some(4.0))?;
    let n = resolve(a.n, cfg, "n", Some(2000u64))?;
    let eps_raw = resolve(a.eps_list.clone(), cfg, "eps-list", Some("0.2,0.1,0.05".into()))?;
    let eps_list = parse_f64_list(&eps_raw, "eps-list")?;
    for (k, v) in [("T", horizon), ("gamma", gamma)] {
        ctx.record(k, v);
    }
    ctx.record("N", steps);
    ctx.record("n", n);
    ctx.record("eps-list", &eps_raw);
    ctx.record("seed", g.seed);
    let grid = make_grid(horizon, steps, gamma)?;
    let h = make_control(&a.control, a.hdot_const, cfg, &grid, &mut ctx)?;
    let rows = convergence_probe(&h, &eps_list, n, g.seed, &OdeScheme::new(grid))?;
    let mut csv = String::from("eps,q50,q90,q99,mean_sq\n");
    for row in &rows {
        csv.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            row.eps, row.q50, row.q90, row.q99, row.mean_sq
        ));
    }
    ctx.write_artifact("converge.csv", csv.as_bytes())?;
    ctx.write_json("converge.json", &rows)?;
    ctx.finish()
}

pub fn cmd_bounds(a: &BoundsArgs, cfg: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let mut ctx = RunContext::new(&g.out, "bounds")?;
    let eps = resolve(a.eps, cfg, "eps", Some(0.1))?;
    let horizon = resolve(a.horizon, cfg, "T", Some(1.0))?;
    let steps = resolve(a.steps, cfg, "N", Some(512))?;
    let gamma = resolve(a.gamma, cfg, "gamma", Some(2.0))?;
    let n = resolve(a.n, cfg, "n", Some(1000u64))?;
    let slack = resolve_opt(a.slack, cfg, "slack")?;
    for (k, v) in [("eps", eps), ("T", horizon), ("gamma", gamma)] {
        ctx.record(k, v);
    }
    ctx.record("N", steps);
    ctx.record("n", n);
    ctx.record("seed", g.seed);
    let grid = make_grid(horizon, steps, gamma)?;
    let h = make_control(&a.control, a.hdot_const, cfg, &grid, &mut ctx)?;
    let report = pathwise_bounds_check(eps, &h, n, g.seed, slack)?;
    ctx.record("slack", report.slack);
    ctx.write_json("bounds.json", &report)?;
    ctx.finish()
}

pub fn cmd_tails(a: &TailsArgs, cfg: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let mut ctx = RunContext::new(&g.out, "tails")?;
    let alpha = resolve(a.alpha, cfg, "alpha", Some(0.4))?;
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(CliError::usage(format!("alpha must be in (0, 1/2), got {alpha}")));
    }
    let horizon = resolve(a.horizon, cfg, "T", Some(1.0))?;
    let steps = resolve(a.steps, cfg, "N", Some(512))?;
    let gamma = resolve(a.gamma, cfg, "gamma", Some(2.0))?;
    let n = resolve(a.n, cfg, "n", Some(1000u64))?;
    let eps_raw = resolve(a.eps_list.clone(), cfg, "eps-list", Some("0.3,0.2".into()))?;
    let r_raw = resolve(a.r_list.clone(), cfg, "r-list", Some("1,2,4".into()))?;
    let eps_list = parse_f64_list(&eps_raw, "eps-list")?;
    let r_list = parse_f64_list(&r_raw, "r-list")?;
    for (k, v) in [("alpha", alpha), ("T", horizon), ("gamma", gamma)] {
        ctx.record(k, v);
    }
    ctx.record("N", steps);
    ctx.record("n", n);
    ctx.record("eps-list", &eps_raw);
    ctx.record("r-list", &r_raw);
    ctx.record("seed", g.seed);
    let grid = make_grid(horizon, steps, gamma)?;
    let rows = holder_tail_probe(&eps_list, alpha, &r_list, n, g.seed, &grid)?;
    let mut csv = String::from("eps,r,n,tail_prob,eps2_log_tail\n");
    for row in &rows {
        csv.push_str(&format!(
            "{:.16e},{:.16e},{},{:.16e},{}\n",
            row.eps,
            row.r,
            row.n,
            row.tail_prob,
            row.eps2_log_tail.map_or("-inf".to_string(), |v| format!("{v:.16e}")),
        ));
    }
    ctx.write_artifact("tails.csv", csv.as_bytes())?;
    ctx.write_json("tails.json", &rows)?;
    ctx.finish()
}

pub fn cmd_supermg(a: &SupermgArgs, cfg: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let mut ctx = RunContext::new(&g.out, "supermg")?;
    let eps = resolve(a.eps, cfg, "eps", Some(0.2))?;
    let horizon = resolve(a.horizon, cfg, "T", Some(1.0))?;
    let steps = resolve(a.steps, cfg, "N", Some(512))?;
    let gamma = resolve(a.gamma, cfg, "gamma", Some(2.0))?;
    let n = resolve(a.n, cfg, "n", Some(10_000u64))?;
    let f0 = resolve(a.f0, cfg, "f0", Some(0.5))?;
    let g0 = resolve(a.g0, cfg, "g0", Some(0.5))?;
    for (k, v) in [("eps", eps), ("T", horizon), ("gamma", gamma), ("f0", f0), ("g0", g0)] {
        ctx.record(k, v);
    }
    ctx.record("N", steps);
    ctx.record("n", n);
    ctx.record("seed", g.seed);
    let grid = make_grid(horizon, steps, gamma)?;
    let field = besq_core::dual::TestField::constant(grid, f0, g0);
    let report = supermartingale_check(&field, eps, n, g.seed)?;
    ctx.write_json("supermg.json", &report)?;
    ctx.finish()
}
