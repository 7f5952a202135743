//! The linear ODE for F1: F1'' + (2 + mu/(1+t)) F1' + (mu/(1+t) + nu^2/(1+t)^2) F1 = 0,
//! with F2 = F1' + F1, integrated by an adaptive embedded Runge-Kutta 4(5)
//! pair with output clamped onto a uniform grid.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OdeError {
    #[error("step size underflowed at t = {0}")]
    StepUnderflow(f64),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, OdeError>;

pub const DENSE_POINTS: usize = 2000;

#[derive(Debug, Clone)]
pub struct OdeTrace {
    pub t_grid: Vec<f64>,
    pub f1: Vec<f64>,
    pub f1_prime: Vec<f64>,
    pub f2: Vec<f64>,
    pub mu: f64,
    pub nu: f64,
    pub ic: (f64, f64),
}

fn rhs(mu: f64, nu: f64, t: f64, y: [f64; 2]) -> [f64; 2] {
    let x = 1.0 + t;
    let damping = 2.0 + mu / x;
    let potential = mu / x + nu * nu / (x * x);
    [y[1], -damping * y[1] - potential * y[0]]
}

// Cash-Karp 4(5) tableau.
const A: [[f64; 5]; 5] = [
    [0.2, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [0.3, -0.9, 1.2, 0.0, 0.0],
    [-11.0 / 54.0, 2.5, -70.0 / 27.0, 35.0 / 27.0, 0.0],
    [
        1631.0 / 55296.0,
        175.0 / 512.0,
        575.0 / 13824.0,
        44275.0 / 110592.0,
        253.0 / 4096.0,
    ],
];
const B5: [f64; 6] = [
    37.0 / 378.0,
    0.0,
    250.0 / 621.0,
    125.0 / 594.0,
    0.0,
    512.0 / 1771.0,
];
const B4: [f64; 6] = [
    2825.0 / 27648.0,
    0.0,
    18575.0 / 48384.0,
    13525.0 / 55296.0,
    277.0 / 14336.0,
    0.25,
];

fn rk_step(mu: f64, nu: f64, t: f64, y: [f64; 2], h: f64) -> ([f64; 2], f64) {
    let mut k = [[0.0_f64; 2]; 6];
    k[0] = rhs(mu, nu, t, y);
    let cs = [0.2, 0.3, 0.6, 1.0, 7.0 / 8.0];
    for i in 0..5 {
        let mut yi = y;
        for j in 0..=i {
            yi[0] += h * A[i][j] * k[j][0];
            yi[1] += h * A[i][j] * k[j][1];
        }
        k[i + 1] = rhs(mu, nu, t + cs[i] * h, yi);
    }
    let mut y5 = y;
    let mut y4 = y;
    for i in 0..6 {
        y5[0] += h * B5[i] * k[i][0];
        y5[1] += h * B5[i] * k[i][1];
        y4[0] += h * B4[i] * k[i][0];
        y4[1] += h * B4[i] * k[i][1];
    }
    let err = ((y5[0] - y4[0]).abs()).max((y5[1] - y4[1]).abs());
    (y5, err)
}

/// Integrate the F1 ODE over [0, t_max] with per-step relative error
/// control, sampling F1, F1' on a uniform DENSE_POINTS grid. F2 is built as
/// F1' + F1 at construction.
pub fn solve_f1_ode(
    mu: f64,
    nu: f64,
    ic: (f64, f64),
    t_max: f64,
    rel_tol: f64,
) -> Result<OdeTrace> {
    if !(t_max > 0.0) {
        return Err(OdeError::Invalid(format!("t_max must be > 0, got {t_max}")));
    }
    if !(1e-12..=1e-4).contains(&rel_tol) {
        return Err(OdeError::Invalid(format!(
            "rel_tol must be in [1e-12, 1e-4], got {rel_tol}"
        )));
    }
    let dt_out = t_max / (DENSE_POINTS - 1) as f64;
    let mut t_grid = Vec::with_capacity(DENSE_POINTS);
    let mut f1 = Vec::with_capacity(DENSE_POINTS);
    let mut f1p = Vec::with_capacity(DENSE_POINTS);

    let mut t = 0.0_f64;
    let mut y = [ic.0, ic.1];
    let mut h = dt_out.min(1e-3);
    t_grid.push(0.0);
    f1.push(y[0]);
    f1p.push(y[1]);
    let mut next_out = dt_out;

    while t < t_max {
        let mut h_try = h.min(next_out - t).min(t_max - t);
        loop {
            if h_try < 1e-14 * t.max(1.0) {
                return Err(OdeError::StepUnderflow(t));
            }
            let (y_new, err) = rk_step(mu, nu, t, y, h_try);
            let scale = rel_tol
                * (y[0].abs().max(y_new[0].abs()) + y[1].abs().max(y_new[1].abs()) + 1e-30);
            if err <= scale {
                t += h_try;
                y = y_new;
                // grow step conservatively
                let grow = if err > 0.0 { 0.9 * (scale / err).powf(0.2) } else { 5.0 };
                h = (h_try * grow.min(5.0)).min(t_max / 10.0);
                break;
            }
            h_try *= 0.5 * (scale / err).powf(0.25).min(1.0).max(0.1);
        }
        while next_out <= t + 1e-12 * t_max && t_grid.len() < DENSE_POINTS {
            t_grid.push(next_out);
            f1.push(y[0]);
            f1p.push(y[1]);
            next_out += dt_out;
        }
    }
    while t_grid.len() < DENSE_POINTS {
        t_grid.push(t_max.min(next_out));
        f1.push(y[0]);
        f1p.push(y[1]);
        next_out += dt_out;
    }
    let f2 = f1.iter().zip(&f1p).map(|(a, b)| a + b).collect();
    Ok(OdeTrace { t_grid, f1, f1_prime: f1p, f2, mu, nu, ic })
}

/// Strict sign alternations of F2, ignoring the |F2| < 1e-12 * max|F2| band
/// so decaying solutions crossing machine zero do not chatter.
pub fn sign_changes(trace: &OdeTrace) -> (usize, Vec<f64>) {
    sign_changes_of(&trace.t_grid, &trace.f2)
}

pub fn sign_changes_of(t: &[f64], v: &[f64]) -> (usize, Vec<f64>) {
    let maxabs = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let atol = 1e-12 * maxabs;
    let mut count = 0;
    let mut times = Vec::new();
    let mut last_sign = 0i8;
    for (ti, vi) in t.iter().zip(v) {
        if vi.abs() < atol {
            continue;
        }
        let s = if *vi > 0.0 { 1 } else { -1 };
        if last_sign != 0 && s != last_sign {
            count += 1;
            times.push(*ti);
        }
        last_sign = s;
    }
    (count, times)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_decay_mode() {
        // mu = nu = 0 reduces to F1'' + 2 F1' = 0; IC (1, -2) gives the
        // exact solution F1 = e^{-2t}, F2 = -e^{-2t}.
        let tr = solve_f1_ode(0.0, 0.0, (1.0, -2.0), 10.0, 1e-10).unwrap();
        for (t, (f1, f2)) in tr.t_grid.iter().zip(tr.f1.iter().zip(&tr.f2)) {
            // per-step rel_tol accumulates over ~2000 steps
            assert!((f1 - (-2.0 * t).exp()).abs() < 1e-7, "t={t}");
            assert!((f2 + (-2.0 * t).exp()).abs() < 1e-7, "t={t}");
        }
    }

    #[test]
    fn figure_cases_sign_structure() {
        // mu=10, nu=0: F2 positive throughout.
        let tr = solve_f1_ode(10.0, 0.0, (1.0, 0.0), 20.0, 1e-9).unwrap();
        assert!(tr.f2.iter().all(|v| *v > 0.0));
        assert_eq!(sign_changes(&tr).0, 0);

        // mu=10, nu=4: at least one sign change, positive final quarter.
        let tr = solve_f1_ode(10.0, 4.0, (1.0, 0.0), 20.0, 1e-9).unwrap();
        let (c_mass, _) = sign_changes(&tr);
        assert!(c_mass >= 1);
        let tail = tr.f2.len() * 3 / 4;
        assert!(tr.f2[tail..].iter().all(|v| *v > 0.0));

        // mu=9, nu=4 (delta = 0): same qualitative shape.
        let tr = solve_f1_ode(9.0, 4.0, (1.0, 0.0), 20.0, 1e-9).unwrap();
        assert!(sign_changes(&tr).0 >= 1);
        assert!(tr.f2[tail..].iter().all(|v| *v > 0.0));

        // mu=10, nu=20 (delta < 0): strictly more oscillations near t=0.
        let tr = solve_f1_ode(10.0, 20.0, (1.0, 0.0), 20.0, 1e-9).unwrap();
        assert!(sign_changes(&tr).0 > c_mass);
    }

    #[test]
    fn refinement_and_linearity() {
        let coarse = solve_f1_ode(10.0, 4.0, (1.0, 0.0), 20.0, 1e-6).unwrap();
        let fine = solve_f1_ode(10.0, 4.0, (1.0, 0.0), 20.0, 5e-7).unwrap();
        let a = *coarse.f2.last().unwrap();
        let b = *fine.f2.last().unwrap();
        assert!((a - b).abs() <= 10.0 * 1e-6 * b.abs().max(1e-12), "{a} vs {b}");

        // Linearity: scaling the IC scales the trace.
        let s = 3.5;
        let scaled = solve_f1_ode(10.0, 4.0, (s, 0.0), 20.0, 1e-10).unwrap();
        let base = solve_f1_ode(10.0, 4.0, (1.0, 0.0), 20.0, 1e-10).unwrap();
        for (x, y) in scaled.f2.iter().zip(&base.f2) {
            assert!((x - s * y).abs() <= 1e-9 * x.abs().max(1e-12));
        }
    }

    #[test]
    fn free_mass_positivity() {
        // nu = 0, nonnegative IC with F2(0) > 0 keeps F2 >= 0.
        for &mu in &[0.5, 2.0, 10.0] {
            let tr = solve_f1_ode(mu, 0.0, (1.0, 0.0), 20.0, 1e-9).unwrap();
            assert!(tr.f2.iter().all(|v| *v >= 0.0), "mu={mu}");
        }
    }

    #[test]
    fn synthetic_constant_sign() {
        let t: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let v = vec![2.0; 100];
        assert_eq!(sign_changes_of(&t, &v).0, 0);
    }

    #[test]
    fn invalid_args() {
        assert!(solve_f1_ode(1.0, 0.0, (1.0, 0.0), -1.0, 1e-8).is_err());
        assert!(solve_f1_ode(1.0, 0.0, (1.0, 0.0), 1.0, 1e-2).is_err());
    }
}
