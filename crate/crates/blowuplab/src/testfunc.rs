//! Test functions and multipliers: phi, rho, psi, psi0, m, zeta, the
//! multiplier M(t) = (1+t)^{1+sqrt(delta)} and Gamma(t).
//!
//! rho(t) = (1+t)^{(mu+1)/2} K_{sqrt(delta)/2}(1+t); all t-derivatives go
//! through the K recurrence, never finite differences. Products psi = rho*phi
//! are assembled in log space so e^{rt} growth of phi never fights rho^r
//! underflow.

use crate::exponents::ModelParams;
use crate::specfun::{self, SpecFunError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TestFuncError {
    #[error("kit requires delta >= 0, got delta = {0}")]
    NegativeDelta(f64),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error("quadrature failed to converge after {0} refinements")]
    QuadratureNonConvergent(u32),
}

pub type Result<T> = std::result::Result<T, TestFuncError>;

/// Surface measure of the unit sphere S^{N-1}.
pub fn sphere_area(n: u32) -> f64 {
    let nf = n as f64;
    2.0 * std::f64::consts::PI.powf(0.5 * nf) / specfun::ln_gamma(0.5 * nf).exp()
}

const PHI_SERIES_CUT: f64 = 300.0;

/// phi(r): e^r + e^{-r} for N = 1, (2 pi)^{N/2} r^{1-N/2} I_{N/2-1}(r) for
/// N >= 2, with the removable singularity at r = 0 filled by the series.
pub fn phi(r: f64, n: u32) -> f64 {
    if n == 1 {
        return r.exp() + (-r).exp();
    }
    if r <= PHI_SERIES_CUT {
        // phi = 2 pi^{N/2} sum_k (r^2/4)^k / (k! Gamma(k + N/2))
        let nf = n as f64;
        let x2 = 0.25 * r * r;
        let mut term = 2.0 * std::f64::consts::PI.powf(0.5 * nf)
            / specfun::ln_gamma(0.5 * nf).exp();
        let mut sum = term;
        for k in 1..600 {
            let k = k as f64;
            term *= x2 / (k * (k - 1.0 + 0.5 * nf));
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum
    } else {
        log_phi(r, n).exp()
    }
}

/// log phi(r), safe for large r.
pub fn log_phi(r: f64, n: u32) -> f64 {
    if n == 1 {
        return r + (-2.0 * r).exp().ln_1p();
    }
    if r <= PHI_SERIES_CUT {
        phi(r, n).ln()
    } else {
        let nf = n as f64;
        let nu = 0.5 * nf - 1.0;
        0.5 * nf * (2.0 * std::f64::consts::PI).ln() + (1.0 - 0.5 * nf) * r.ln()
            + specfun::log_bessel_i(nu, r).expect("r > 0")
    }
}

/// phi'(r) = (2 pi)^{N/2} r^{1-N/2} I_{N/2}(r) for N >= 2; e^r - e^{-r} for
/// N = 1. Used by the weak-form gradient term.
pub fn phi_prime(r: f64, n: u32) -> f64 {
    if n == 1 {
        return r.exp() - (-r).exp();
    }
    if r <= PHI_SERIES_CUT {
        // pi^{N/2} r sum_k (r^2/4)^k / (k! Gamma(k + N/2 + 1))
        let nf = n as f64;
        let x2 = 0.25 * r * r;
        let mut term = std::f64::consts::PI.powf(0.5 * nf) * r
            / specfun::ln_gamma(0.5 * nf + 1.0).exp();
        let mut sum = term;
        for k in 1..600 {
            let k = k as f64;
            term *= x2 / (k * (k + 0.5 * nf));
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        let nf = n as f64;
        ((0.5 * nf) * (2.0 * std::f64::consts::PI).ln()
            + (1.0 - 0.5 * nf) * r.ln()
            + specfun::log_bessel_i(0.5 * nf, r).expect("r > 0"))
        .exp()
    }
}

/// Evaluators for the blow-up test functions, bound to one parameter tuple
/// with delta >= 0.
#[derive(Debug, Clone)]
pub struct TestFunctionKit {
    pub params: ModelParams,
    pub delta: f64,
    pub xi: f64,
    pub alpha: f64,
}

impl TestFunctionKit {
    pub fn new(params: ModelParams) -> Result<Self> {
        let delta = params.delta();
        if delta < 0.0 {
            return Err(TestFuncError::NegativeDelta(delta));
        }
        Ok(Self {
            params,
            delta,
            xi: 0.5 * delta.sqrt(),
            alpha: 0.5 * (params.mu - 1.0 - delta.sqrt()),
        })
    }

    pub fn log_rho(&self, t: f64) -> Result<f64> {
        let x = 1.0 + t;
        Ok(0.5 * (self.params.mu + 1.0) * x.ln() + specfun::log_bessel_k(self.xi, x)?)
    }

    pub fn rho(&self, t: f64) -> Result<f64> {
        Ok(self.log_rho(t)?.exp())
    }

    /// rho'/rho = (mu+1+sqrt(delta))/(2(1+t)) - K_{xi+1}(1+t)/K_xi(1+t).
    pub fn rho_log_derivative(&self, t: f64) -> Result<f64> {
        let x = 1.0 + t;
        let ratio = specfun::bessel_k_ratio(self.xi, x)?;
        Ok((self.params.mu + 1.0 + self.delta.sqrt()) / (2.0 * x) - ratio)
    }

    pub fn rho_prime(&self, t: f64) -> Result<f64> {
        Ok(self.rho(t)? * self.rho_log_derivative(t)?)
    }

    /// rho''/rho, from the K recurrence applied twice.
    pub fn rho_second_over_rho(&self, t: f64) -> Result<f64> {
        let x = 1.0 + t;
        let xi = self.xi;
        let lk0 = specfun::log_bessel_k(xi, x)?;
        let r1 = (specfun::log_bessel_k(xi + 1.0, x)? - lk0).exp();
        let r2 = (specfun::log_bessel_k(xi + 2.0, x)? - lk0).exp();
        let kp_over_k = xi / x - r1;
        let kpp_over_k = r2 - (xi + 1.0) / x * r1 + xi / x * kp_over_k - xi / (x * x);
        let c = 0.5 * (self.params.mu + 1.0);
        Ok(c * (c - 1.0) / (x * x) + 2.0 * c / x * kp_over_k + kpp_over_k)
    }

    /// Relative residual of the rho ODE
    /// rho'' - rho - d/dt(mu/(1+t) rho) + nu^2/(1+t)^2 rho = 0.
    pub fn rho_ode_residual(&self, t: f64) -> Result<f64> {
        let x = 1.0 + t;
        let mu = self.params.mu;
        let nu = self.params.nu;
        let lr = self.rho_log_derivative(t)?;
        let second = self.rho_second_over_rho(t)?;
        let terms = [second, -1.0, -mu * lr / x, mu / (x * x), nu * nu / (x * x)];
        let res: f64 = terms.iter().sum();
        let scale = terms.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        Ok(res.abs() / scale)
    }

    pub fn psi(&self, r: f64, t: f64) -> Result<f64> {
        Ok(self.log_psi(r, t)?.exp())
    }

    pub fn log_psi(&self, r: f64, t: f64) -> Result<f64> {
        Ok(self.log_rho(t)? + log_phi(r, self.params.dim))
    }

    pub fn psi0(&self, r: f64, t: f64) -> f64 {
        (log_phi(r, self.params.dim) - t).exp()
    }

    pub fn m(&self, t: f64) -> f64 {
        (1.0 + t).powf(self.params.mu)
    }

    pub fn zeta(&self, t: f64) -> f64 {
        (1.0 + t).powf(self.alpha)
    }

    pub fn m_mult(&self, t: f64) -> f64 {
        (1.0 + t).powf(1.0 + self.delta.sqrt())
    }

    /// Gamma(t) = mu/(1+t) - 2 rho'/rho.
    pub fn gamma(&self, t: f64) -> Result<f64> {
        Ok(self.params.mu / (1.0 + t) - 2.0 * self.rho_log_derivative(t)?)
    }

    /// log of int_{|x| <= t+R} psi(x,t)^{r_exp} dx by radial quadrature.
    pub fn log_psi_pow_integral(&self, r_exp: f64, t: f64) -> Result<f64> {
        let n = self.params.dim;
        let upper = t + self.params.radius;
        let log_rho = self.log_rho(t)?;
        // Shift by the integrand log at the outer edge (its maximum).
        let log_at = |s: f64| -> f64 {
            let geom = if n == 1 {
                2.0_f64.ln()
            } else {
                sphere_area(n).ln() + (n as f64 - 1.0) * s.max(1e-300).ln()
            };
            r_exp * (log_rho + log_phi(s, n)) + geom
        };
        let shift = log_at(upper).max(log_at(0.5 * upper)).max(log_at(1e-6));
        let f = |s: f64| (log_at(s) - shift).exp();
        let v = simpson_halving(&f, 0.0, upper, 1e-8, 24)?;
        Ok(shift + v.ln())
    }

    /// Growth-bound surrogate: the integral at time t, plus the growth exponent
    /// of integral / (rho^r e^{rt}) fitted over a log-spaced t grid.
    pub fn psi_integral_bound(&self, r_exp: f64, t: f64) -> Result<(f64, f64)> {
        let integral = self.log_psi_pow_integral(r_exp, t)?.exp();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..16 {
            let tt = 10.0_f64.powf(i as f64 / 15.0 * 2.0); // 1 .. 100
            let li = self.log_psi_pow_integral(r_exp, tt)?;
            let lr = self.log_rho(tt)?;
            xs.push((1.0 + tt).ln());
            ys.push(li - r_exp * (lr + tt));
        }
        Ok((integral, ols_slope(&xs, &ys)))
    }

    /// Relative residual of the conjugate equation for psi at one (r, t):
    /// analytic t-derivatives via the recurrence, finite differences in r.
    pub fn conjugate_residual(&self, r: f64, t: f64) -> Result<f64> {
        let n = self.params.dim;
        let mu = self.params.mu;
        let nu = self.params.nu;
        let x = 1.0 + t;
        let rho = self.rho(t)?;
        let rho_p = self.rho_prime(t)?;
        let rho_pp = self.rho_second_over_rho(t)? * rho;
        let h = 1e-3;
        // phi is even, so reflect FD stencil points below the origin.
        let lap_phi = {
            let d2 = (phi(r + h, n) - 2.0 * phi(r, n) + phi((r - h).abs(), n)) / (h * h);
            if r < 1e-9 {
                n as f64 * d2
            } else {
                let d1 = (phi(r + h, n) - phi((r - h).abs(), n)) / (2.0 * h);
                d2 + (n as f64 - 1.0) / r * d1
            }
        };
        let t1 = rho_pp * phi(r, n);
        let t2 = rho * lap_phi;
        let t3 = mu * (rho_p / x - rho / (x * x)) * phi(r, n);
        let t4 = nu * nu / (x * x) * rho * phi(r, n);
        let res = t1 - t2 - t3 + t4;
        let scale = t1.abs().max(t2.abs()).max(t3.abs()).max(t4.abs());
        Ok(res.abs() / scale)
    }
}

/// Relative residual of the FD Laplacian identity Lap phi = phi.
pub fn phi_laplacian_residual(r: f64, n: u32) -> f64 {
    let h = 1e-3;
    let d2 = (phi(r + h, n) - 2.0 * phi(r, n) + phi((r - h).abs(), n)) / (h * h);
    let lap = if r < 1e-9 {
        n as f64 * d2
    } else {
        let d1 = (phi(r + h, n) - phi((r - h).abs(), n)) / (2.0 * h);
        d2 + (n as f64 - 1.0) / r * d1
    };
    (lap - phi(r, n)).abs() / phi(r, n)
}

/// Composite Simpson with uniform halving until successive values agree.
pub fn simpson_halving<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_halvings: u32,
) -> Result<f64> {
    let mut n = 32usize;
    let mut prev = simpson_fixed(f, a, b, n);
    for _ in 0..max_halvings {
        n *= 2;
        let cur = simpson_fixed(f, a, b, n);
        if (cur - prev).abs() <= rel_tol * cur.abs().max(1e-300) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(TestFuncError::QuadratureNonConvergent(max_halvings))
}

fn simpson_fixed<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Ordinary least squares slope of y against x.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kit(mu: f64, nu: f64, n: u32) -> TestFunctionKit {
        TestFunctionKit::new(ModelParams {
            mu,
            nu,
            p: 2.0,
            q: 2.0,
            dim: n,
            radius: 1.0,
            a: 1,
            b: 1,
            eps: 0.1,
        })
        .unwrap()
    }

    #[test]
    fn phi_anchor_values() {
        assert_eq!(phi(0.0, 1), 2.0);
        assert!((phi(0.0, 2) - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        let expect = 4.0 * std::f64::consts::PI * 1.0_f64.sinh();
        assert!((phi(1.0, 3) - expect).abs() < 1e-10 * expect);
        // N=3 closed form 4 pi sinh(r)/r on a few radii.
        for &r in &[0.2_f64, 2.0, 10.0, 40.0] {
            let expect = 4.0 * std::f64::consts::PI * r.sinh() / r;
            assert!((phi(r, 3) - expect).abs() < 1e-10 * expect, "r={r}");
        }
    }

    #[test]
    fn phi_positive_increasing() {
        for &n in &[1u32, 2, 3, 5] {
            let mut prev = phi(0.0, n);
            assert!(prev > 0.0);
            for i in 1..40 {
                let v = phi(0.25 * i as f64, n);
                assert!(v > prev, "phi must increase (N={n})");
                prev = v;
            }
        }
    }

    #[test]
    fn log_phi_matches_phi_and_extends() {
        for &n in &[1u32, 2, 3] {
            for &r in &[0.1, 1.0, 50.0, 299.0, 301.0, 500.0] {
                let lp = log_phi(r, n);
                if r < 250.0 {
                    assert!((lp - phi(r, n).ln()).abs() < 1e-9, "n={n} r={r}");
                }
                assert!(lp.is_finite());
            }
        }
    }

    #[test]
    fn phi_prime_is_derivative() {
        for &n in &[1u32, 2, 3, 4] {
            for &r in &[0.3, 1.0, 5.0, 20.0] {
                let h = 1e-5;
                let fd = (phi(r + h, n) - phi(r - h, n)) / (2.0 * h);
                let an = phi_prime(r, n);
                assert!((fd - an).abs() < 1e-7 * an.abs(), "n={n} r={r}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn rho_anchor_values() {
        // mu=1, nu=0 (delta=0): rho(0) = K_0(1)
        let k = kit(1.0, 0.0, 1);
        assert!((k.rho(0.0).unwrap() - 0.4210244382).abs() < 1e-9);
        // mu=2, nu=0 (delta=1): rho(0) = K_{1/2}(1) = sqrt(pi/2)/e
        let k = kit(2.0, 0.0, 1);
        assert!((k.rho(0.0).unwrap() - 0.4610685044).abs() < 1e-9);
    }

    #[test]
    fn rho_ode_residual_small() {
        for &(mu, nu) in &[(1.0, 0.0), (2.0, 0.0), (2.0, 0.4), (9.0, 4.0), (10.0, 4.0)] {
            let k = kit(mu, nu, 1);
            for i in 0..=25 {
                let t = 2.0 * i as f64;
                let res = k.rho_ode_residual(t).unwrap();
                assert!(res <= 1e-8, "mu={mu} nu={nu} t={t}: res={res}");
            }
        }
    }

    #[test]
    fn rho_log_derivative_limits() {
        let k = kit(10.0, 4.0, 1);
        let v = k.rho_log_derivative(100.0).unwrap();
        assert!((v + 1.0).abs() < 0.2);
        let k = kit(1.0, 0.0, 1);
        for &t in &[10.0, 30.0, 100.0, 200.0] {
            let v = k.rho_log_derivative(t).unwrap();
            assert!((v + 1.0).abs() <= 8.0 / t, "t={t}: {v}");
        }
        // Matches the centered FD of log rho.
        let k = kit(2.0, 0.4, 1);
        for &t in &[0.5, 2.0, 10.0, 40.0] {
            let h = 1e-5;
            let fd = (k.log_rho(t + h).unwrap() - k.log_rho(t - h).unwrap()) / (2.0 * h);
            let an = k.rho_log_derivative(t).unwrap();
            assert!((fd - an).abs() <= 1e-6 * an.abs(), "t={t}");
        }
    }

    #[test]
    fn multiplier_algebra() {
        // 1 + sqrt(delta) + 2 alpha - mu = 0 identically for delta >= 0.
        for &(mu, nu) in &[(1.0, 0.0), (2.0, 0.4), (9.0, 4.0), (10.0, 4.0), (0.5, 0.0)] {
            let k = kit(mu, nu, 1);
            let resid = 1.0 + k.delta.sqrt() + 2.0 * k.alpha - mu;
            assert!(resid.abs() < 1e-12, "mu={mu} nu={nu}");
            // M zeta^2 / m == (1+t)^0 at a sample point
            let t = 3.7;
            let v = k.m_mult(t) * k.zeta(t) * k.zeta(t) / k.m(t);
            assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn gamma_eventually_positive() {
        let k = kit(2.0, 0.4, 1);
        for i in 0..=40 {
            let t = 20.0 + 2.0 * i as f64;
            assert!(k.gamma(t).unwrap() > 0.0, "t={t}");
        }
        // Limit mu/(1+t) + 2 + o(1)
        let g = k.gamma(150.0).unwrap();
        assert!((g - 2.0).abs() < 0.1);
    }

    #[test]
    fn psi_definition_consistency() {
        let k = kit(2.0, 0.4, 3);
        for &r in &[0.0, 1.0, 4.0] {
            let lhs = k.psi(r, 0.0).unwrap();
            let rhs = k.rho(0.0).unwrap() * phi(r, 3);
            assert!((lhs - rhs).abs() < 1e-10 * rhs);
        }
        // psi0 = e^{-t} phi
        assert!((k.psi0(1.0, 2.0) - (-2.0_f64).exp() * phi(1.0, 3)).abs() < 1e-12);
    }

    #[test]
    fn rho_et_bounded_by_power() {
        // rho(t) e^t <= C (1+t)^{mu/2} with stable fitted C over [20, 100].
        for &(mu, nu) in &[(1.0, 0.0), (2.0, 0.4), (10.0, 4.0)] {
            let k = kit(mu, nu, 1);
            let mut cs = Vec::new();
            for i in 0..=16 {
                let t = 20.0 + 5.0 * i as f64;
                let c = (k.log_rho(t).unwrap() + t - 0.5 * mu * (1.0 + t).ln()).exp();
                cs.push(c);
            }
            let cmax = cs.iter().cloned().fold(0.0_f64, f64::max);
            let cmin = cs.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(cmax / cmin < 1.5, "mu={mu} nu={nu}: C drifts {cmin}..{cmax}");
        }
    }

    #[test]
    fn laplacian_identity() {
        for &n in &[1u32, 2, 3] {
            for i in 1..=20 {
                let r = 0.1 + 0.5 * i as f64;
                let res = phi_laplacian_residual(r, n);
                assert!(res <= 1e-6, "n={n} r={r}: {res}");
            }
        }
    }

    #[test]
    fn conjugate_residual_small() {
        for &(mu, nu) in &[(1.0, 0.0), (2.0, 0.4), (9.0, 4.0)] {
            for &n in &[1u32, 3] {
                let k = kit(mu, nu, n);
                let res = k.conjugate_residual(1.0, 1.0).unwrap();
                assert!(res <= 1e-6, "mu={mu} nu={nu} n={n}: {res}");
            }
        }
    }

    #[test]
    fn psi_integral_growth_exponents() {
        // N=1, r=2: both factors vanish, exponent ~ 0.
        let k = kit(2.0, 0.0, 1);
        let (integral, fit) = k.psi_integral_bound(2.0, 1.0).unwrap();
        assert!(integral > 0.0);
        assert!(fit <= 0.1, "N=1 r=2 exponent {fit}");
        // N=2, r=3: target (2-3)(2-1)/2 = -0.5.
        let k = kit(2.0, 0.0, 2);
        let (_, fit) = k.psi_integral_bound(3.0, 1.0).unwrap();
        assert!(fit <= -0.5 + 0.1, "N=2 r=3 exponent {fit}");
    }
}
