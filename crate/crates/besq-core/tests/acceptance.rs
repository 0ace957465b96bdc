//! Acceptance suite: ten criteria run under one umbrella test, each
//! printing a single PASS/FAIL line; the umbrella fails if any criterion
//! does, which keeps all ten lines visible in default `cargo test`
//! output.
//!
//! Criteria 4 and 6 encode targets that the implemented functionals
//! cannot meet; their tests report the measured values and fail honestly
//! rather than restate the target. See the project notes for the
//! analysis.

use std::sync::Arc;

use besq_core::control::Control;
use besq_core::dual::{eval_j, sup_j, TestField};
use besq_core::geodesic::{min_energy_to_point, tip_rate_closed_form, GeodesicProblem};
use besq_core::mc::{
    convergence_probe, estimate_ball_prob, fluctuation_samples, ldp_slope,
    pathwise_bounds_check, supermartingale_check, write_slope_csv,
};
use besq_core::noise::{sample_noise, SimParams};
use besq_core::ode::{solve_phi, OdeScheme};
use besq_core::rate::eval_i;
use besq_core::sde::{branch_sqrt, simulate_z, simulate_z_h};
use besq_core::{Complex64, ComplexPath, TimeGrid};

fn verdict(id: u32, ok: bool, detail: &str) -> bool {
    println!("criterion {id}: {} — {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn grid(n: usize, gamma: f64) -> Arc<TimeGrid> {
    TimeGrid::graded(1.0, n, gamma).unwrap()
}

fn criterion_01_branch_root_and_reductions() -> bool {
    // branch_sqrt(z)^2 = z to 1e-12 on 1e5 random z.
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let z = Complex64::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        let w = branch_sqrt(z);
        worst = worst.max((w * w - z).norm() / (1.0 + z.norm()));
        assert!(w.im >= 0.0);
    }
    let g = grid(512, 2.0);
    // eps = 0 simulation equals -t exactly.
    let p0 = SimParams::new(0.0, g.clone(), 3, 0);
    let z0 = simulate_z(&p0, &sample_noise(&p0)).unwrap();
    let exact = g.nodes().iter().zip(z0.values()).all(|(t, v)| *v == Complex64::new(-t, 0.0));
    // h = 0 tilted simulation equals untilted bitwise.
    let p = SimParams::new(0.2, g.clone(), 3, 1);
    let noise = sample_noise(&p);
    let plain = simulate_z(&p, &noise).unwrap();
    let tilted = simulate_z_h(&p, &Control::zero(g), &noise).unwrap();
    let bitwise = plain.values().iter().zip(tilted.values()).all(|(a, b)| a == b);

    verdict(
        1,
        worst < 1e-12 && exact && bitwise,
        &format!("branch residual {worst:.2e}; eps=0 exact: {exact}; zero-tilt bitwise: {bitwise}"),
    )
}

fn criterion_02_energy_identity() -> bool {
    let g = grid(4096, 4.0);
    let scheme = OdeScheme::new(g.clone());
    let mut ok = true;
    let mut detail = String::new();
    for (name, h) in [
        ("1", Control::from_hdot_fn(g.clone(), |_| 1.0).unwrap()),
        ("t", Control::from_hdot_fn(g.clone(), |t| t).unwrap()),
        ("sin", Control::from_hdot_fn(g.clone(), |t| t.sin()).unwrap()),
    ] {
        let phi = solve_phi(&h, &scheme).unwrap().path;
        let i_val = eval_i(&phi).value.finite().unwrap_or(f64::INFINITY);
        let rel = (i_val - h.energy()).abs() / h.energy();
        ok &= rel < 1e-3;
        detail.push_str(&format!("hdot={name}: rel err {rel:.2e}; "));
    }
    verdict(2, ok, detail.trim_end())
}

fn criterion_03_duality() -> bool {
    let g = grid(4096, 4.0);
    let scheme = OdeScheme::new(g.clone());
    let mut ok = true;
    let mut detail = String::new();
    for (name, h) in [
        ("1", Control::from_hdot_fn(g.clone(), |_| 1.0).unwrap()),
        ("t", Control::from_hdot_fn(g.clone(), |t| t).unwrap()),
        ("sin", Control::from_hdot_fn(g.clone(), |t| t.sin()).unwrap()),
    ] {
        let phi = solve_phi(&h, &scheme).unwrap().path;
        let i_val = eval_i(&phi).value.finite().unwrap();
        let s64 = sup_j(&phi, 64).unwrap().value.finite().unwrap();
        let rel = (s64 - i_val).abs() / i_val;
        ok &= rel < 0.01;
        // Weak duality over the whole (xi, m) test set.
        for m in [9usize, 17, 33, 64] {
            let v = sup_j(&phi, m).unwrap().value.finite().unwrap();
            ok &= v <= i_val + 1e-3;
        }
        detail.push_str(&format!("hdot={name}: |supJ-I|/I = {rel:.2e}; "));
    }
    verdict(3, ok, detail.trim_end())
}

fn criterion_04_tip_energy() -> bool {
    use std::f64::consts::PI;
    let mut ok = true;
    let mut detail = String::new();
    for arg in [PI / 6.0, PI / 4.0, PI / 3.0, PI / 2.0] {
        let z = Complex64::from_polar(1.0, arg);
        let cf = tip_rate_closed_form(z).unwrap();
        let mut p = GeodesicProblem::new(z).unwrap();
        p.control_dim = 64;
        match min_energy_to_point(&p) {
            Ok(r) => {
                let pass = if cf == 0.0 {
                    r.energy.abs() <= 1e-3
                } else {
                    (r.energy - cf).abs() <= 0.02 * cf
                };
                ok &= pass;
                detail.push_str(&format!(
                    "arg={arg:.3}: energy {:.4} vs closed form {:.4}; ",
                    r.energy, cf
                ));
            }
            Err(e) => {
                ok = false;
                detail.push_str(&format!("arg={arg:.3}: {e}; "));
            }
        }
    }
    verdict(
        4,
        ok,
        &format!(
            "{}(the energy functional 1/2 int hdot^2 with endpoint phi_T = z^2 at T = |z|^2 \
             attains these minima; they sit well below -8 log sin(arg z), which is the \
             same infimum expressed in driving-function units, 4x larger, and minimized \
             over the horizon — see notes)",
            detail
        ),
    )
}

fn criterion_05_clt() -> bool {
    let g = TimeGrid::uniform(1.0, 1024).unwrap();
    let times = [0.5, 1.0];
    // Covariance of Im F at eps = 0.05, n = 1e4 vs 2 min(s^2, t^2).
    let samples = fluctuation_samples(0.05, 10_000, 21, &g, &times).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for (i, s) in times.iter().enumerate() {
        for (j, t) in times.iter().enumerate() {
            if j < i {
                continue;
            }
            let a: Vec<f64> = samples.iter().map(|row| row[i].im).collect();
            let b: Vec<f64> = samples.iter().map(|row| row[j].im).collect();
            let ma = a.iter().sum::<f64>() / a.len() as f64;
            let mb = b.iter().sum::<f64>() / b.len() as f64;
            let prods: Vec<f64> =
                a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).collect();
            let cov = prods.iter().sum::<f64>() / prods.len() as f64;
            let var = prods.iter().map(|p| (p - cov) * (p - cov)).sum::<f64>()
                / (prods.len() - 1) as f64;
            let se = (var / prods.len() as f64).sqrt();
            let target = 2.0 * (s * s).min(t * t);
            ok &= (cov - target).abs() <= 3.0 * se;
            detail.push_str(&format!(
                "cov({s},{t}) = {cov:.3} vs {target} (se {se:.3}); "
            ));
        }
    }
    // Var(Re F_1) decreasing over eps in {0.2, 0.1, 0.05}.
    let mut vars = Vec::new();
    for eps in [0.2, 0.1, 0.05] {
        let s = fluctuation_samples(eps, 10_000, 22, &g, &[1.0]).unwrap();
        let re: Vec<f64> = s.iter().map(|row| row[0].re).collect();
        let m = re.iter().sum::<f64>() / re.len() as f64;
        vars.push(re.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / re.len() as f64);
    }
    ok &= vars[0] > vars[1] && vars[1] > vars[2];
    detail.push_str(&format!("Var(Re F_1) over eps: {vars:.3?}"));
    verdict(5, ok, &detail)
}

fn criterion_06_ldp_slope() -> bool {
    let g = grid(4096, 4.0);
    let scheme = OdeScheme::new(g.clone());
    let h = Control::from_hdot_fn(g.clone(), |_| 1.0).unwrap();
    let target = solve_phi(&h, &scheme).unwrap().path;
    let rows = ldp_slope(&target, 0.3, &[0.3, 0.2, 0.15, 0.1], 10_000, Some(&h), 11).unwrap();
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    let monotone = rows
        .windows(2)
        .all(|w| w[1].gap <= w[0].gap + w[0].gap_ci() + w[1].gap_ci());
    let final_ok = gaps.last().unwrap() <= &0.15;
    verdict(
        6,
        monotone && final_ok,
        &format!(
            "gaps over eps {{0.3,0.2,0.15,0.1}}: {gaps:.4?}; final <= 0.15: {final_ok}; \
             monotone within CIs: {monotone} (eps^2 log p converges to -inf I over the \
             r = 0.3 ball, about -0.36, which is above -1/2; the gap therefore crosses \
             zero and grows back toward ~0.14 — see notes)"
        ),
    )
}

fn criterion_07_pathwise_bounds() -> bool {
    let g = grid(512, 2.0);
    let h = Control::from_hdot_fn(g, |_| 1.0).unwrap();
    let rep = pathwise_bounds_check(0.1, &h, 1000, 31, None).unwrap();
    let ok = rep.u_violations == 0 && rep.v_violations == 0;
    verdict(
        7,
        ok,
        &format!(
            "{} nodes over {} paths, slack {:.3e}: {} U violations, {} V violations",
            rep.nodes_checked, rep.paths, rep.slack, rep.u_violations, rep.v_violations
        )
    )
}

fn criterion_08_supermartingale() -> bool {
    use rand::{Rng, SeedableRng};
    let g = grid(512, 2.0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let mut ok = true;
    let mut detail = String::new();
    for _ in 0..5 {
        let (a0, a1, b0, b1): (f64, f64, f64, f64) = (
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let field = TestField::from_derivatives(
            g.clone(),
            a0,
            move |t| a1 * (2.0 * t).cos(),
            b0,
            move |t| b1 * (3.0 * t).sin(),
        );
        let rep = supermartingale_check(&field, 0.2, 10_000, 41).unwrap();
        ok &= rep.satisfied() && rep.max_log_gap < 1e-8;
        detail.push_str(&format!(
            "mean {:.4} (se {:.4}, log gap {:.1e}); ",
            rep.mean, rep.stderr, rep.max_log_gap
        ));
    }
    verdict(8, ok, detail.trim_end())
}

fn criterion_09_convergence_in_probability() -> bool {
    let g = grid(1024, 4.0);
    let scheme = OdeScheme::new(g.clone());
    let h = Control::from_hdot_fn(g.clone(), |_| 1.0).unwrap();
    let rows = convergence_probe(&h, &[0.2, 0.1, 0.05], 2000, 51, &scheme).unwrap();
    let medians: Vec<f64> = rows.iter().map(|r| r.q50).collect();
    let ok = medians.windows(2).all(|w| w[1] < w[0]);
    verdict(9, ok, &format!("median sup-distances over eps: {medians:.4?}"))
}

fn criterion_10_determinism_across_thread_counts() -> bool {
    // Rerun a seeded cross-section of the suite under 1 and 4 worker
    // threads and compare emitted CSV bytes.
    let artifacts = |threads: usize| -> (String, String) {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let g = grid(1024, 4.0);
            let scheme = OdeScheme::new(g.clone());
            let h = Control::from_hdot_fn(g.clone(), |_| 1.0).unwrap();
            let target = solve_phi(&h, &scheme).unwrap().path;
            let rows =
                ldp_slope(&ComplexPath::drift_only(g.clone()), 0.5, &[0.3, 0.2], 2000, None, 7)
                    .unwrap();
            let mut slope_csv = Vec::new();
            write_slope_csv(&mut slope_csv, &rows).unwrap();
            let rep = estimate_ball_prob(&target, 0.5, 0.3, 5000, Some(&h), 9).unwrap();
            let p = SimParams::new(0.1, g, 13, 5);
            let z = simulate_z(&p, &sample_noise(&p)).unwrap();
            (
                format!("{}{:.16e}{:.16e}", String::from_utf8(slope_csv).unwrap(), rep.p_hat, rep.ess),
                z.to_csv_string(),
            )
        })
    };
    let (a1, b1) = artifacts(1);
    let (a4, b4) = artifacts(4);
    let ok = a1 == a4 && b1 == b4;
    verdict(10, ok, &format!("slope/ball artifacts identical: {}, path CSV identical: {}", a1 == a4, b1 == b4))
}


/// Umbrella test: run every criterion (in parallel), print all verdict
/// lines, and fail at the end if any criterion failed. Running them under
/// one failing test keeps the PASS lines visible in default `cargo test`
/// output.
#[test]
fn acceptance_criteria() {
    let checks: Vec<(u32, fn() -> bool)> = vec![
        (1, criterion_01_branch_root_and_reductions),
        (2, criterion_02_energy_identity),
        (3, criterion_03_duality),
        (4, criterion_04_tip_energy),
        (5, criterion_05_clt),
        (6, criterion_06_ldp_slope),
        (7, criterion_07_pathwise_bounds),
        (8, criterion_08_supermartingale),
        (9, criterion_09_convergence_in_probability),
        (10, criterion_10_determinism_across_thread_counts),
    ];
    let failed: Vec<u32> = std::thread::scope(|s| {
        let handles: Vec<_> =
            checks.into_iter().map(|(id, f)| (id, s.spawn(f))).collect();
        handles
            .into_iter()
            .filter_map(|(id, h)| match h.join() {
                Ok(true) => None,
                Ok(false) => Some(id),
                Err(_) => {
                    println!("criterion {id}: FAIL — panicked");
                    Some(id)
                }
            })
            .collect()
    });
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}

#[test]
fn acceptance_harness_sanity() {
    let g = grid(256, 2.0);
    let xi = ComplexPath::drift_only(g.clone());
    let field = TestField::constant(g, 0.3, 0.4);
    assert!(eval_j(&field, &xi).unwrap().is_finite());
}
