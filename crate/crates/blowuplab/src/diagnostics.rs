//! Functionals along simulations (G1, G2, F1, F2, F, G, L, H and the
//! nonlinear integrals) plus checks of the coercivity bounds, the L- and
//! H-differential inequalities, the weak-form identity, and the linear
//! transforms v = (1+t)^alpha u and w = (1+t)^{mu/2} u.

use crate::exponents::ModelParams;
use crate::specfun;
use crate::testfunc::{self, TestFunctionKit};
use crate::wavesolver::{Geometry, SimOutcome, Snapshot, SpatialGrid};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagError {
    #[error("no snapshots stored; rerun with a snapshot cadence")]
    NoSnapshots,
    #[error("trace too short: {0}")]
    TooShort(String),
    #[error("snapshot cadence is not uniform near t = {0}")]
    NonUniformCadence(f64),
    #[error("sign hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("test functions: {0}")]
    TestFunc(#[from] testfunc::TestFuncError),
    #[error("special functions: {0}")]
    SpecFun(#[from] specfun::SpecFunError),
}

pub type Result<T> = std::result::Result<T, DiagError>;

/// Trapezoid quadrature weights carrying the volume factor: 2 dr on the
/// half-line (even symmetry doubles it), omega_{N-1} r^{N-1} dr radially.
pub fn radial_weights(grid: &SpatialGrid, dim: u32) -> Vec<f64> {
    let n = grid.n_points;
    (0..n)
        .map(|i| {
            let trap = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            let vol = match grid.geometry {
                Geometry::Line1D => 2.0,
                Geometry::Radial => testfunc::sphere_area(dim) * grid.r(i).powi(dim as i32 - 1),
            };
            trap * vol * grid.dr
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FunctionalTrace {
    pub t: Vec<f64>,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub fplain: Vec<f64>,
    pub g: Vec<f64>,
    pub l: Vec<f64>,
    pub h: Vec<f64>,
    pub nl_p: Vec<f64>,
    pub nl_q: Vec<f64>,
    /// worst relative error of G1 = rho e^t F1 and G2 = rho e^t F2
    pub cross_rel: f64,
    pub t3: f64,
    pub c6: f64,
}

fn integrate(weights: &[f64], values: impl Iterator<Item = f64>) -> f64 {
    weights.iter().zip(values).map(|(w, v)| w * v).sum()
}

/// All functionals at the snapshot times. u_t is the stored backward
/// difference. H uses T3 = -ln(eps) (clamped to 0) and the additive constant
/// c6 eps/8 with c6 the measured floor of G2/eps past T3.
pub fn compute_functionals(outcome: &SimOutcome, kit: &TestFunctionKit) -> Result<FunctionalTrace> {
    if outcome.snapshots.is_empty() {
        return Err(DiagError::NoSnapshots);
    }
    let grid = &outcome.grid;
    let dim = outcome.params.dim;
    let weights = radial_weights(grid, dim);
    let log_phi: Vec<f64> = (0..grid.n_points)
        .map(|i| testfunc::log_phi(grid.r(i), dim))
        .collect();

    let m = outcome.snapshots.len();
    let mut tr = FunctionalTrace {
        t: Vec::with_capacity(m),
        g1: Vec::with_capacity(m),
        g2: Vec::with_capacity(m),
        f1: Vec::with_capacity(m),
        f2: Vec::with_capacity(m),
        fplain: Vec::with_capacity(m),
        g: Vec::with_capacity(m),
        l: Vec::with_capacity(m),
        h: Vec::new(),
        nl_p: Vec::with_capacity(m),
        nl_q: Vec::with_capacity(m),
        cross_rel: 0.0,
        t3: (-outcome.params.eps.ln()).max(0.0),
        c6: 0.0,
    };

    let p = outcome.params.p;
    let q = outcome.params.q;
    for snap in &outcome.snapshots {
        let t = snap.t;
        let lr = kit.log_rho(t)?;
        let ut = snap.u_t();
        // psi = exp(lr + log_phi), psi0 = exp(log_phi - t); skip dead points
        // so the unpopulated far field never evaluates exp at huge arguments
        let mut g1 = 0.0;
        let mut g2 = 0.0;
        let mut f1 = 0.0;
        let mut f2 = 0.0;
        let mut fp = 0.0;
        let mut nlp = 0.0;
        let mut nlq = 0.0;
        for i in 0..grid.n_points {
            let (u, v) = (snap.u_curr[i], ut[i]);
            if u == 0.0 && v == 0.0 {
                continue;
            }
            let w = weights[i];
            let psi = (lr + log_phi[i]).exp();
            let psi0 = (log_phi[i] - t).exp();
            g1 += w * u * psi;
            g2 += w * v * psi;
            f1 += w * u * psi0;
            f2 += w * v * psi0;
            fp += w * u;
            nlp += w * v.abs().powf(p) * psi;
            nlq += w * u.abs().powf(q) * psi;
        }
        let et_rho = (lr + t).exp();
        for (a, b) in [(g1, et_rho * f1), (g2, et_rho * f2)] {
            let scale = a.abs().max(b.abs());
            if scale > 0.0 {
                tr.cross_rel = tr.cross_rel.max((a - b).abs() / scale);
            }
        }
        tr.t.push(t);
        tr.g1.push(g1);
        tr.g2.push(g2);
        tr.f1.push(f1);
        tr.f2.push(f2);
        tr.fplain.push(fp);
        tr.g.push(kit.zeta(t) * fp);
        tr.l.push(kit.m_mult(t).sqrt() * kit.zeta(t) * fp);
        tr.nl_p.push(nlp);
        tr.nl_q.push(nlq);
    }

    let eps = outcome.params.eps;
    tr.c6 = tr
        .t
        .iter()
        .zip(&tr.g2)
        .filter(|(t, _)| **t >= tr.t3)
        .map(|(_, g2)| if eps > 0.0 { g2 / eps } else { 0.0 })
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    if !tr.c6.is_finite() {
        tr.c6 = 0.0;
    }
    tr.h = cumulative_h(&tr.t, &tr.nl_p, tr.t3, tr.c6 * eps / 8.0);
    Ok(tr)
}

/// H(t) = (1/8) int_{T3}^t NL_p ds + h0 by trapezoid, zero before T3.
fn cumulative_h(t: &[f64], nl_p: &[f64], t3: f64, h0: f64) -> Vec<f64> {
    let mut h = vec![0.0; t.len()];
    let mut acc = h0;
    for i in 0..t.len() {
        if t[i] < t3 {
            continue;
        }
        if i > 0 && t[i - 1] >= t3 {
            acc += 0.125 * 0.5 * (nl_p[i] + nl_p[i - 1]) * (t[i] - t[i - 1]);
        }
        h[i] = acc;
    }
    h
}

/// C(f,g) and C0(f,g); errors if nonzero data should make C(f,g) positive but the
/// quadrature value is not.
pub fn data_constants(
    f: &[f64],
    g: &[f64],
    grid: &SpatialGrid,
    kit: &TestFunctionKit,
) -> Result<(f64, f64)> {
    let dim = kit.params.dim;
    let weights = radial_weights(grid, dim);
    let phi: Vec<f64> = (0..grid.n_points)
        .map(|i| testfunc::phi(grid.r(i), dim))
        .collect();
    let coef = kit.alpha; // (mu - 1 - sqrt(delta))/2
    let int_mix = integrate(&weights, f.iter().zip(g).zip(&phi).map(|((fi, gi), ph)| (coef * fi + gi) * ph));
    let int_g = integrate(&weights, g.iter().zip(&phi).map(|(gi, ph)| gi * ph));
    let int_fg = integrate(&weights, f.iter().zip(g).zip(&phi).map(|((fi, gi), ph)| (fi + gi) * ph));
    let k0 = specfun::bessel_k(kit.xi, 1.0)?;
    let k1 = specfun::bessel_k(kit.xi + 1.0, 1.0)?;
    let cfg = k0 * int_mix + k1 * int_g;
    let nonzero = f.iter().chain(g.iter()).any(|v| *v != 0.0);
    if nonzero && cfg <= 0.0 {
        return Err(DiagError::Hypothesis(format!("C(f,g) = {cfg} <= 0")));
    }
    Ok((cfg, int_fg))
}

/// G1 coercivity surrogate: c_fit = min over the window of G1/eps; pass iff
/// positive. Epsilon-stability across runs is the caller's comparison.
pub fn check_g1_coercivity(
    trace: &FunctionalTrace,
    eps: f64,
    window: (f64, f64),
) -> (f64, bool) {
    if eps == 0.0 {
        return (0.0, false);
    }
    let c_fit = trace
        .t
        .iter()
        .zip(&trace.g1)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(_, g1)| g1 / eps)
        .fold(f64::INFINITY, f64::min);
    if !c_fit.is_finite() {
        return (0.0, false);
    }
    (c_fit, c_fit > 0.0)
}

/// First time G1/eps exceeds half its long-run plateau (reported, not
/// asserted; T0 is defined only existentially).
pub fn measure_t0(trace: &FunctionalTrace, eps: f64) -> Option<f64> {
    if eps == 0.0 || trace.t.len() < 4 {
        return None;
    }
    let tail = trace.g1.len() * 3 / 4;
    let plateau = trace.g1[tail..]
        .iter()
        .fold(0.0_f64, |m, v| m.max(*v))
        / eps;
    trace
        .t
        .iter()
        .zip(&trace.g1)
        .find(|(_, g1)| **g1 / eps >= 0.5 * plateau)
        .map(|(t, _)| *t)
}

#[derive(Debug, Clone)]
pub struct G2Report {
    pub min_g2: f64,
    pub k_fit: f64,
    pub neg_bound_ok: bool,
    pub coercive_from: Option<f64>,
    pub pass: bool,
}

/// G2 dip and coercivity surrogate. The negative dip must sit above the envelope
/// -K nu^2 (1 + nu^{2/(p-1)} e^{pt/(p-1)} (1+t)^{(N-1)/2}) for the fitted K,
/// and G2/eps must stay coercive from no later than 1.2 max(-ln eps, T0).
pub fn check_g2(trace: &FunctionalTrace, eps: f64, params: &ModelParams) -> G2Report {
    let min_g2 = trace.g2.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let max_g2 = trace.g2.iter().fold(0.0_f64, |m, v| m.max(*v));
    let nu = params.nu;
    let (k_fit, neg_bound_ok) = if eps == 0.0 {
        (0.0, true)
    } else if nu == 0.0 {
        (0.0, min_g2 >= -1e-10 * max_g2.max(f64::MIN_POSITIVE))
    } else {
        let k = trace
            .t
            .iter()
            .zip(&trace.g2)
            .map(|(t, g2)| {
                let env = nu * nu
                    * (1.0
                        + nu.powf(2.0 / (params.p - 1.0))
                            * (params.p * t / (params.p - 1.0)).exp()
                            * (1.0 + t).powf((params.dim as f64 - 1.0) / 2.0));
                (-g2).max(0.0) / env
            })
            .fold(0.0_f64, f64::max);
        (k, k.is_finite())
    };

    if eps == 0.0 {
        return G2Report { min_g2, k_fit, neg_bound_ok, coercive_from: None, pass: true };
    }

    // coercivity floor: 5% of the median of G2/eps over the final quarter
    let tail = &trace.g2[trace.g2.len() * 3 / 4..];
    let mut sorted: Vec<f64> = tail.iter().map(|g| g / eps).collect();
    sorted.sort_by(f64::total_cmp);
    let plateau = sorted[sorted.len() / 2];
    let floor = 0.05 * plateau;
    let coercive_from = if plateau > 0.0 {
        let mut from = None;
        for i in (0..trace.t.len()).rev() {
            if trace.g2[i] / eps >= floor {
                from = Some(trace.t[i]);
            } else {
                break;
            }
        }
        from
    } else {
        None
    };
    let deadline = 1.2 * (-eps.ln()).max(1.0);
    let pass = neg_bound_ok
        && matches!(coercive_from, Some(tc) if tc <= deadline);
    G2Report { min_g2, k_fit, neg_bound_ok, coercive_from, pass }
}

#[derive(Debug, Clone)]
pub struct InequalityReport {
    pub c_fit: f64,
    pub pass: bool,
    pub degenerate: bool,
    pub window: (f64, f64),
}

/// The L-inequality L'' + (1-delta)/(4(1+t)^2) L >= c L^q / (1+t)^{(N+mu/2)(q-1)}
/// with L'' by centered differences, fitted on [1, 0.9 T_est].
pub fn check_l_inequality(
    trace: &FunctionalTrace,
    params: &ModelParams,
    t_est: f64,
) -> Result<InequalityReport> {
    let window = (1.0, 0.9 * t_est);
    if trace.t.len() < 3 {
        return Err(DiagError::TooShort("need >= 3 samples for L''".into()));
    }
    let max_l = trace.l.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if max_l == 0.0 {
        return Ok(InequalityReport { c_fit: 0.0, pass: true, degenerate: true, window });
    }
    let d = params.delta();
    let exp_q = (params.dim as f64 + params.mu / 2.0) * (params.q - 1.0);
    let mut c_fit = f64::INFINITY;
    let mut seen = false;
    for i in 1..trace.t.len() - 1 {
        let t = trace.t[i];
        if t < window.0 || t > window.1 {
            continue;
        }
        let h1 = trace.t[i] - trace.t[i - 1];
        let h2 = trace.t[i + 1] - trace.t[i];
        if (h1 - h2).abs() > 1e-9 * h1 {
            return Err(DiagError::NonUniformCadence(t));
        }
        let lpp = (trace.l[i + 1] - 2.0 * trace.l[i] + trace.l[i - 1]) / (h1 * h1);
        let lhs = lpp + (1.0 - d) / (4.0 * (1.0 + t) * (1.0 + t)) * trace.l[i];
        let l = trace.l[i];
        if l <= 0.0 {
            continue;
        }
        let rhs = l.powf(params.q) / (1.0 + t).powf(exp_q);
        if rhs > 0.0 {
            c_fit = c_fit.min(lhs / rhs);
            seen = true;
        }
    }
    if !seen {
        return Err(DiagError::TooShort(format!("no samples in window {window:?}")));
    }
    Ok(InequalityReport { c_fit, pass: c_fit > 0.0, degenerate: false, window })
}

/// The H-inequality H' >= c H^p (1+t)^{-(N+mu-1)(p-1)/2} on
/// [T3, 0.9 T_est], with H' = NL_p/8.
pub fn check_h_inequality(
    trace: &FunctionalTrace,
    params: &ModelParams,
    eps: f64,
    t_est: f64,
) -> Result<InequalityReport> {
    let window = (trace.t3, 0.9 * t_est);
    if eps == 0.0 {
        return Ok(InequalityReport { c_fit: 0.0, pass: true, degenerate: true, window });
    }
    if window.1 <= window.0 {
        return Err(DiagError::TooShort(format!(
            "run must reach beyond T3 = {}",
            trace.t3
        )));
    }
    let exp_p = (params.dim as f64 + params.mu - 1.0) * (params.p - 1.0) / 2.0;
    let mut c_fit = f64::INFINITY;
    let mut seen = false;
    for i in 0..trace.t.len() {
        let t = trace.t[i];
        if t < window.0 || t > window.1 || trace.h[i] <= 0.0 {
            continue;
        }
        let hp = trace.nl_p[i] / 8.0;
        let rhs = trace.h[i].powf(params.p) / (1.0 + t).powf(exp_p);
        if rhs > 0.0 {
            c_fit = c_fit.min(hp / rhs);
            seen = true;
        }
    }
    if !seen {
        return Err(DiagError::TooShort(format!("no samples in window {window:?}")));
    }
    Ok(InequalityReport { c_fit, pass: c_fit > 0.0, degenerate: false, window })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestChoice {
    Psi,
    One,
}

/// Relative residual of the weak-form identity at the final snapshot time,
/// with Phi = psi or Phi = 1 on the light cone; time integrals by trapezoid
/// over the snapshot cadence.
pub fn weak_form_residual(
    outcome: &SimOutcome,
    kit: &TestFunctionKit,
    choice: TestChoice,
) -> Result<f64> {
    let snaps = &outcome.snapshots;
    if snaps.len() < 2 {
        return Err(DiagError::TooShort("need >= 2 snapshots".into()));
    }
    let grid = &outcome.grid;
    let p = &outcome.params;
    let weights = radial_weights(grid, p.dim);
    let log_phi: Vec<f64> = (0..grid.n_points)
        .map(|i| testfunc::log_phi(grid.r(i), p.dim))
        .collect();
    let phi_prime: Vec<f64> = (0..grid.n_points)
        .map(|i| testfunc::phi_prime(grid.r(i), p.dim))
        .collect();

    // per-snapshot space integrals entering the time quadrature
    struct Slice {
        t: f64,
        ut_phi: f64,     // int u_t Phi
        ut_phit: f64,    // int u_t Phi_t
        gradu_grad: f64, // int grad u . grad Phi
        damp: f64,       // int mu/(1+s) u_t Phi
        mass: f64,       // int nu^2/(1+s)^2 u Phi
        nl: f64,         // int (a|u_t|^p + b|u|^q) Phi
    }
    let mut slices = Vec::with_capacity(snaps.len());
    for snap in snaps {
        let t = snap.t;
        let ut = snap.u_t();
        let (lr, lr_dot) = match choice {
            TestChoice::Psi => (kit.log_rho(t)?, kit.rho_log_derivative(t)?),
            TestChoice::One => (f64::NAN, 0.0),
        };
        let mut s = Slice { t, ut_phi: 0.0, ut_phit: 0.0, gradu_grad: 0.0, damp: 0.0, mass: 0.0, nl: 0.0 };
        let x = 1.0 + t;
        for i in 0..grid.n_points {
            let (u, v) = (snap.u_curr[i], ut[i]);
            if u == 0.0 && v == 0.0 {
                continue;
            }
            let w = weights[i];
            let (big_phi, big_phi_t, big_phi_r) = match choice {
                TestChoice::Psi => {
                    let psi = (lr + log_phi[i]).exp();
                    (psi, lr_dot * psi, lr.exp() * phi_prime[i])
                }
                TestChoice::One => (1.0, 0.0, 0.0),
            };
            let ur = if i == 0 {
                0.0 // even symmetry
            } else if i == grid.n_points - 1 {
                0.0
            } else {
                (snap.u_curr[i + 1] - snap.u_curr[i - 1]) / (2.0 * grid.dr)
            };
            s.ut_phi += w * v * big_phi;
            s.ut_phit += w * v * big_phi_t;
            s.gradu_grad += w * ur * big_phi_r;
            s.damp += w * p.mu / x * v * big_phi;
            s.mass += w * p.nu * p.nu / (x * x) * u * big_phi;
            let mut nl = 0.0;
            if p.a == 1 {
                nl += v.abs().powf(p.p);
            }
            if p.b == 1 {
                nl += u.abs().powf(p.q);
            }
            s.nl += w * nl * big_phi;
        }
        slices.push(s);
    }

    let trap = |f: &dyn Fn(&Slice) -> f64| -> f64 {
        let mut acc = 0.0;
        for k in 1..slices.len() {
            acc += 0.5 * (f(&slices[k]) + f(&slices[k - 1])) * (slices[k].t - slices[k - 1].t);
        }
        acc
    };
    let terms = [
        slices.last().unwrap().ut_phi,
        -slices[0].ut_phi,
        -trap(&|s| s.ut_phit),
        trap(&|s| s.gradu_grad),
        trap(&|s| s.damp),
        trap(&|s| s.mass),
        -trap(&|s| s.nl),
    ];
    let res: f64 = terms.iter().sum();
    let scale = terms.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(res.abs() / scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    DampedV,
    LiouvilleW,
}

/// Max relative residual of the transformed linear equations
/// v_tt - Lap v + (1+sqrt(delta))/(1+t) v_t = 0 for v = (1+t)^alpha u, or
/// w_tt - Lap w + (1-delta)/(4(1+t)^2) w = 0 for w = (1+t)^{mu/2} u,
/// by finite differences across snapshot triples.
pub fn transform_residual(outcome: &SimOutcome, which: Transform) -> Result<f64> {
    let p = &outcome.params;
    if p.a != 0 || p.b != 0 {
        return Err(DiagError::Invalid("transforms apply to linear (a=b=0) runs".into()));
    }
    let d = p.delta();
    if which == Transform::DampedV && d < 0.0 {
        return Err(DiagError::Invalid(format!("DAMPED_V needs delta >= 0, got {d}")));
    }
    let snaps = &outcome.snapshots;
    if snaps.len() < 3 {
        return Err(DiagError::TooShort("need >= 3 snapshots".into()));
    }
    let grid = &outcome.grid;
    let exp = match which {
        Transform::DampedV => 0.5 * (p.mu - 1.0 - d.sqrt()),
        Transform::LiouvilleW => 0.5 * p.mu,
    };
    let scale = |snap: &Snapshot| -> Vec<f64> {
        let f = (1.0 + snap.t).powf(exp);
        snap.u_curr.iter().map(|u| f * u).collect()
    };
    let nm1 = match grid.geometry {
        Geometry::Line1D => 0.0,
        Geometry::Radial => (p.dim - 1) as f64,
    };
    let dr2 = grid.dr * grid.dr;
    let mut max_res = 0.0_f64;
    let mut max_term = 0.0_f64;
    for k in 1..snaps.len() - 1 {
        let h1 = snaps[k].t - snaps[k - 1].t;
        let h2 = snaps[k + 1].t - snaps[k].t;
        if (h1 - h2).abs() > 1e-9 * h1 {
            return Err(DiagError::NonUniformCadence(snaps[k].t));
        }
        let h = h1;
        let t = snaps[k].t;
        let x = 1.0 + t;
        let vm = scale(&snaps[k - 1]);
        let v0 = scale(&snaps[k]);
        let vp = scale(&snaps[k + 1]);
        for i in 0..grid.n_points - 1 {
            let vtt = (vp[i] - 2.0 * v0[i] + vm[i]) / (h * h);
            let lap = if i == 0 {
                (nm1 + 1.0) * 2.0 * (v0[1] - v0[0]) / dr2
            } else {
                (v0[i + 1] - 2.0 * v0[i] + v0[i - 1]) / dr2
                    + nm1 * (v0[i + 1] - v0[i - 1]) / (2.0 * grid.dr * grid.r(i))
            };
            let extra = match which {
                Transform::DampedV => {
                    (1.0 + d.sqrt()) / x * (vp[i] - vm[i]) / (2.0 * h)
                }
                Transform::LiouvilleW => (1.0 - d) / (4.0 * x * x) * v0[i],
            };
            let res = vtt - lap + extra;
            max_res = max_res.max(res.abs());
            for term in [vtt, lap, extra] {
                max_term = max_term.max(term.abs());
            }
        }
    }
    if max_term == 0.0 {
        return Ok(0.0);
    }
    Ok(max_res / max_term)
}
