//! Fast verification suite: special-function identities, test-function
//! residuals, reference-figure reproduction, solver verification, the lemma
//! checks on simulations, and the H-inequality. Shared by the `check`
//! subcommand and the acceptance tests.

use crate::diagnostics::{
    check_g1_coercivity, check_g2, check_h_inequality, compute_functionals, transform_residual,
    weak_form_residual, TestChoice, Transform,
};
use crate::exponents::ModelParams;
use crate::linode::{sign_changes, solve_f1_ode};
use crate::specfun;
use crate::testfunc::{self, TestFunctionKit};
use crate::wavesolver::{self, geometry_for, SimOutcome, SimStatus, SolverOpts, SpatialGrid};

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl CriterionResult {
    fn ok(id: usize, name: &'static str, detail: String) -> Self {
        CriterionResult { id, name, pass: true, detail }
    }

    fn fail(id: usize, name: &'static str, detail: String) -> Self {
        CriterionResult { id, name, pass: false, detail }
    }
}

fn k_half(t: f64) -> f64 {
    (std::f64::consts::PI / (2.0 * t)).sqrt() * (-t).exp()
}

/// Bessel identities: recurrence vs finite differences, half-integer closed
/// forms, large-argument asymptotic ratio.
pub fn criterion_1() -> CriterionResult {
    const NAME: &str = "specfun identities";
    let run = || -> Result<String, String> {
        let mut worst_rec = 0.0_f64;
        for i in 0..=10 {
            let xi = 0.5 * i as f64;
            for &t in &[0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0] {
                let anal = specfun::bessel_k_dt(xi, t).map_err(|e| e.to_string())?;
                let h = 1e-5 * t;
                let fd = (specfun::bessel_k(xi, t + h).map_err(|e| e.to_string())?
                    - specfun::bessel_k(xi, t - h).map_err(|e| e.to_string())?)
                    / (2.0 * h);
                let rel = (anal - fd).abs() / anal.abs().max(fd.abs());
                worst_rec = worst_rec.max(rel);
                if rel > 1e-6 {
                    return Err(format!("recurrence vs FD at xi={xi}, t={t}: rel {rel:.2e}"));
                }
            }
        }
        let mut worst_cf = 0.0_f64;
        for &t in &[0.5, 1.0, 2.0, 5.0, 10.0] {
            let k12 = specfun::bessel_k(0.5, t).map_err(|e| e.to_string())?;
            let k32 = specfun::bessel_k(1.5, t).map_err(|e| e.to_string())?;
            let e12 = (k12 - k_half(t)).abs() / k_half(t);
            let cf32 = k_half(t) * (1.0 + 1.0 / t);
            let e32 = (k32 - cf32).abs() / cf32;
            worst_cf = worst_cf.max(e12).max(e32);
            if e12 > 1e-10 || e32 > 1e-10 {
                return Err(format!("closed form at t={t}: {e12:.2e}, {e32:.2e}"));
            }
        }
        // first asymptotic correction (4 xi^2 - 1)/(8t) stays under 2% for
        // xi <= 2 at t = 200
        let mut worst_as = 0.0_f64;
        for &xi in &[0.0, 0.5, 1.0, 1.5, 2.0] {
            let v = specfun::bessel_k(xi, 200.0).map_err(|e| e.to_string())?;
            let dev = (v / k_half(200.0) - 1.0).abs();
            worst_as = worst_as.max(dev);
            if dev > 0.02 {
                return Err(format!("asymptotic ratio at xi={xi}: {dev:.3}"));
            }
        }
        Ok(format!(
            "recurrence {worst_rec:.1e}, closed forms {worst_cf:.1e}, asymptotic {worst_as:.1e}"
        ))
    };
    match run() {
        Ok(d) => CriterionResult::ok(1, NAME, d),
        Err(d) => CriterionResult::fail(1, NAME, d),
    }
}

fn kit(mu: f64, nu: f64, dim: u32) -> Result<TestFunctionKit, String> {
    let params = ModelParams {
        mu,
        nu,
        p: 1.5,
        q: 2.0,
        dim,
        radius: 1.0,
        a: 0,
        b: 0,
        eps: 0.1,
    };
    TestFunctionKit::new(params).map_err(|e| e.to_string())
}

/// rho solves its ODE and rho'/rho -> -1 at the stated rates.
pub fn criterion_2() -> CriterionResult {
    const NAME: &str = "rho ODE residual";
    let run = || -> Result<String, String> {
        let mut worst = 0.0_f64;
        for &(mu, nu) in &[(1.0, 0.0), (2.0, 0.0), (2.0, 0.4), (9.0, 4.0), (10.0, 4.0)] {
            let k = kit(mu, nu, 1)?;
            for i in 0..=25 {
                let t = 2.0 * i as f64;
                let res = k.rho_ode_residual(t).map_err(|e| e.to_string())?;
                worst = worst.max(res);
                if res > 1e-8 {
                    return Err(format!("mu={mu} nu={nu} t={t}: residual {res:.2e}"));
                }
            }
            for &t in &[10.0, 20.0, 50.0, 100.0, 200.0] {
                let lr = k.rho_log_derivative(t).map_err(|e| e.to_string())?;
                if (lr + 1.0).abs() > 8.0 / t {
                    return Err(format!("mu={mu} nu={nu} t={t}: rho'/rho = {lr}"));
                }
            }
        }
        Ok(format!("max residual {worst:.1e}, limit rate holds on [10,200]"))
    };
    match run() {
        Ok(d) => CriterionResult::ok(2, NAME, d),
        Err(d) => CriterionResult::fail(2, NAME, d),
    }
}

/// phi eigen-identity, conjugate-equation residual, integral growth exponents.
pub fn criterion_3() -> CriterionResult {
    const NAME: &str = "phi / psi lattices";
    let run = || -> Result<String, String> {
        for &n in &[1u32, 2, 3] {
            for i in 0..=20 {
                let r = 0.1 + 0.5 * i as f64;
                let res = testfunc::phi_laplacian_residual(r, n);
                if res > 1e-6 {
                    return Err(format!("Lap phi = phi at N={n}, r={r}: {res:.2e}"));
                }
            }
        }
        for &(mu, nu) in &[(1.0, 0.0), (2.0, 0.4), (9.0, 4.0)] {
            for &n in &[1u32, 2, 3] {
                let k = kit(mu, nu, n)?;
                for &r in &[0.5, 1.0, 3.0] {
                    for &t in &[0.0, 1.0, 5.0] {
                        let res = k.conjugate_residual(r, t).map_err(|e| e.to_string())?;
                        if res > 1e-6 {
                            return Err(format!(
                                "conjugate eq at mu={mu} nu={nu} N={n} r={r} t={t}: {res:.2e}"
                            ));
                        }
                    }
                }
            }
        }
        let mut fits = Vec::new();
        for &n in &[1u32, 2, 3] {
            let k = kit(2.0, 0.0, n)?;
            for &r_exp in &[2.0, 3.0] {
                let target = (2.0 - r_exp) * (n as f64 - 1.0) / 2.0;
                let (_, fit) = k.psi_integral_bound(r_exp, 1.0).map_err(|e| e.to_string())?;
                if fit > target + 0.1 {
                    return Err(format!("growth exponent N={n} r={r_exp}: {fit} > {target}+0.1"));
                }
                fits.push(fit);
            }
        }
        Ok(format!("all residuals <= 1e-6; growth exponents {fits:.3?}"))
    };
    match run() {
        Ok(d) => CriterionResult::ok(3, NAME, d),
        Err(d) => CriterionResult::fail(3, NAME, d),
    }
}

/// Reference figures: sign structure of F2 across the four (mu, nu) pairs.
pub fn criterion_4() -> CriterionResult {
    const NAME: &str = "reference figures";
    let run = || -> Result<String, String> {
        let solve = |mu: f64, nu: f64| {
            solve_f1_ode(mu, nu, (1.0, 0.0), 20.0, 1e-9).map_err(|e| e.to_string())
        };
        let free = solve(10.0, 0.0)?;
        if sign_changes(&free).0 != 0 {
            return Err("mu=10 nu=0: expected zero sign changes".into());
        }
        let mut changes = Vec::new();
        for &(mu, nu) in &[(10.0, 4.0), (9.0, 4.0)] {
            let tr = solve(mu, nu)?;
            let (c, _) = sign_changes(&tr);
            if c < 1 {
                return Err(format!("mu={mu} nu={nu}: expected >= 1 sign change"));
            }
            let tail = tr.f2.len() * 3 / 4;
            if !tr.f2[tail..].iter().all(|v| *v > 0.0) {
                return Err(format!("mu={mu} nu={nu}: final quarter not positive"));
            }
            changes.push(c);
        }
        let osc = solve(10.0, 20.0)?;
        let (c_osc, _) = sign_changes(&osc);
        if c_osc <= changes[0] {
            return Err(format!("mu=10 nu=20: {c_osc} sign changes <= {}", changes[0]));
        }
        Ok(format!("sign changes: 0 / {} / {} / {c_osc}", changes[0], changes[1]))
    };
    match run() {
        Ok(d) => CriterionResult::ok(4, NAME, d),
        Err(d) => CriterionResult::fail(4, NAME, d),
    }
}

pub fn linear_run(
    mu: f64,
    nu: f64,
    eps: f64,
    dr: f64,
    t_max: f64,
    cadence: f64,
) -> Result<SimOutcome, String> {
    let p = ModelParams {
        mu,
        nu,
        p: 1.5,
        q: 2.0,
        dim: 1,
        radius: 1.0,
        a: 0,
        b: 0,
        eps,
    };
    let grid =
        SpatialGrid::for_horizon(dr, t_max, p.radius, geometry_for(p.dim)).map_err(|e| e.to_string())?;
    let mut opts = SolverOpts::new(t_max);
    opts.snap_cadence = Some(cadence);
    wavesolver::run(&p, &grid, &opts).map_err(|e| e.to_string())
}

/// Solver verification: transform residuals, finite-speed support, weak-form
/// convergence.
pub fn criterion_5() -> CriterionResult {
    const NAME: &str = "solver verification";
    let run = || -> Result<String, String> {
        // DAMPED_V at delta = 0.36
        let coarse = linear_run(2.0, 0.4, 0.1, 0.01, 3.0, 0.05)?;
        let fine = linear_run(2.0, 0.4, 0.1, 0.005, 3.0, 0.025)?;
        if !coarse.support_ok || !fine.support_ok {
            return Err("finite-speed support invariant violated".into());
        }
        let rc = transform_residual(&coarse, Transform::DampedV).map_err(|e| e.to_string())?;
        let rf = transform_residual(&fine, Transform::DampedV).map_err(|e| e.to_string())?;
        if rf > 5e-2 {
            return Err(format!("DAMPED_V residual {rf:.2e} > 5e-2"));
        }
        if rf > 0.6 * rc {
            return Err(format!("DAMPED_V not halving: {rc:.2e} -> {rf:.2e}"));
        }
        // LIOUVILLE_W at delta = -1
        let wc = linear_run(1.0, 0.5, 0.1, 0.01, 3.0, 0.05)?;
        let wf = linear_run(1.0, 0.5, 0.1, 0.005, 3.0, 0.025)?;
        let rwc = transform_residual(&wc, Transform::LiouvilleW).map_err(|e| e.to_string())?;
        let rwf = transform_residual(&wf, Transform::LiouvilleW).map_err(|e| e.to_string())?;
        if rwf > 5e-2 {
            return Err(format!("LIOUVILLE_W residual {rwf:.2e} > 5e-2"));
        }
        if rwf > 0.6 * rwc {
            return Err(format!("LIOUVILLE_W not halving: {rwc:.2e} -> {rwf:.2e}"));
        }
        // weak form with Phi = 1, first-order convergent
        let k = TestFunctionKit::new(coarse.params).map_err(|e| e.to_string())?;
        let w1 = {
            let out = linear_run(2.0, 0.4, 0.1, 0.01, 4.0, 0.04)?;
            weak_form_residual(&out, &k, TestChoice::One).map_err(|e| e.to_string())?
        };
        let w2 = {
            let out = linear_run(2.0, 0.4, 0.1, 0.005, 4.0, 0.02)?;
            weak_form_residual(&out, &k, TestChoice::One).map_err(|e| e.to_string())?
        };
        if w1 > 1e-2 {
            return Err(format!("weak-form residual {w1:.2e} > 1e-2"));
        }
        if w2 > 0.6 * w1 {
            return Err(format!("weak form not converging: {w1:.2e} -> {w2:.2e}"));
        }
        Ok(format!(
            "DAMPED_V {rc:.1e}->{rf:.1e}, LIOUVILLE_W {rwc:.1e}->{rwf:.1e}, weak {w1:.1e}->{w2:.1e}"
        ))
    };
    match run() {
        Ok(d) => CriterionResult::ok(5, NAME, d),
        Err(d) => CriterionResult::fail(5, NAME, d),
    }
}

/// Coercivity suite on simulations: G1 eps-stability, G2 dip bound and
/// coercivity threshold, nu=0 positivity control.
pub fn criterion_6() -> CriterionResult {
    const NAME: &str = "coercivity suite (G1, G2)";
    let run = || -> Result<String, String> {
        let t_max = 6.0;
        let mut c_fits = Vec::new();
        for &eps in &[0.05, 0.1] {
            let out = linear_run(2.0, 0.4, eps, 0.01, t_max, 0.05)?;
            let k = TestFunctionKit::new(out.params).map_err(|e| e.to_string())?;
            let tr = compute_functionals(&out, &k).map_err(|e| e.to_string())?;
            if tr.cross_rel > 1e-8 {
                return Err(format!("G = rho e^t F cross-check fails: {:.2e}", tr.cross_rel));
            }
            let (c_fit, pass) = check_g1_coercivity(&tr, eps, (0.0, t_max));
            if !pass {
                return Err(format!("G1 coercivity fails at eps={eps}"));
            }
            c_fits.push(c_fit);
            let rep = check_g2(&tr, eps, &out.params);
            if !rep.neg_bound_ok || !rep.k_fit.is_finite() {
                return Err(format!("G2 dip unbounded at eps={eps}: {rep:?}"));
            }
            let deadline = 1.2 * (-eps.ln());
            match rep.coercive_from {
                Some(tc) if tc <= deadline => {}
                other => return Err(format!("G2 coercive_from {other:?} > {deadline:.2}")),
            }
        }
        let ratio = c_fits[0] / c_fits[1];
        if !(0.5..=2.0).contains(&ratio) {
            return Err(format!("G1 constant not eps-stable: ratio {ratio:.3}"));
        }
        // nu = 0 control: G2 never dips below -1e-10 max G2
        let out = linear_run(2.0, 0.0, 0.1, 0.01, t_max, 0.05)?;
        let k = TestFunctionKit::new(out.params).map_err(|e| e.to_string())?;
        let tr = compute_functionals(&out, &k).map_err(|e| e.to_string())?;
        let min_g2 = tr.g2.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        let max_g2 = tr.g2.iter().fold(0.0_f64, |m, v| m.max(*v));
        if min_g2 < -1e-10 * max_g2 {
            return Err(format!("nu=0 control: min G2 = {min_g2:.2e}"));
        }
        Ok(format!("G1 ratio {ratio:.3}, nu=0 min G2 {min_g2:.1e}"))
    };
    match run() {
        Ok(d) => CriterionResult::ok(6, NAME, d),
        Err(d) => CriterionResult::fail(6, NAME, d),
    }
}

/// H-inequality with positive fitted constant along Thm 2.2 blow-up runs.
pub fn criterion_9() -> CriterionResult {
    const NAME: &str = "H-inequality (Thm 2.2 runs)";
    let run = || -> Result<String, String> {
        let mut cs = Vec::new();
        for &(eps, t_max) in &[(0.4, 20.0), (0.2, 32.0)] {
            let p = ModelParams {
                mu: 2.0,
                nu: 0.4,
                p: 1.5,
                q: 2.0,
                dim: 1,
                radius: 1.0,
                a: 1,
                b: 0,
                eps,
            };
            let grid = SpatialGrid::for_horizon(0.01, t_max, p.radius, geometry_for(1))
                .map_err(|e| e.to_string())?;
            let mut opts = SolverOpts::new(t_max);
            opts.snap_cadence = Some(0.05);
            let out = wavesolver::run(&p, &grid, &opts).map_err(|e| e.to_string())?;
            if out.status != SimStatus::BlewUp {
                return Err(format!("eps={eps}: run did not blow up by t={t_max}"));
            }
            let t_est = out.t_est.unwrap();
            let k = TestFunctionKit::new(p).map_err(|e| e.to_string())?;
            let tr = compute_functionals(&out, &k).map_err(|e| e.to_string())?;
            let rep = check_h_inequality(&tr, &p, eps, t_est).map_err(|e| e.to_string())?;
            if !rep.pass {
                return Err(format!("eps={eps}: H-inequality c_fit = {}", rep.c_fit));
            }
            cs.push(rep.c_fit);
        }
        Ok(format!("fitted constants {cs:.3?}"))
    };
    match run() {
        Ok(d) => CriterionResult::ok(9, NAME, d),
        Err(d) => CriterionResult::fail(9, NAME, d),
    }
}

/// Criteria 1-6 and 9 (the fast suite behind the `check` subcommand).
pub fn fast_suite() -> Vec<CriterionResult> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_9(),
    ]
}
