//! Critical exponents and blow-up region classification.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExponentError {
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("quantity undefined for delta < 0 (got delta = {0})")]
    NegativeDelta(f64),
    #[error("shifted dimension must exceed 1, got {0}")]
    DimensionPole(f64),
}

pub type Result<T> = std::result::Result<T, ExponentError>;

/// One problem instance of the model family
/// u_tt - Lap u + mu/(1+t) u_t + nu^2/(1+t)^2 u = a|u_t|^p + b|u|^q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub mu: f64,
    pub nu: f64,
    pub p: f64,
    pub q: f64,
    pub dim: u32,
    pub radius: f64,
    pub a: u8,
    pub b: u8,
    pub eps: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.mu < 0.0 || self.nu < 0.0 {
            return Err(ExponentError::Invalid("mu, nu must be >= 0".into()));
        }
        if !(self.p > 1.0) || !(self.q > 1.0) {
            return Err(ExponentError::Invalid("p, q must be > 1".into()));
        }
        if self.dim < 1 {
            return Err(ExponentError::Invalid("N must be >= 1".into()));
        }
        if self.dim >= 3 {
            let cap = 2.0 * self.dim as f64 / (self.dim as f64 - 2.0);
            if self.q > cap {
                return Err(ExponentError::Invalid(format!(
                    "q = {} exceeds the energy-space cap 2N/(N-2) = {cap} for N = {}",
                    self.q, self.dim
                )));
            }
        }
        if !(self.radius > 0.0) {
            return Err(ExponentError::Invalid("R must be > 0".into()));
        }
        if self.a > 1 || self.b > 1 {
            return Err(ExponentError::Invalid("a, b must be 0 or 1".into()));
        }
        if !(self.eps >= 0.0) {
            return Err(ExponentError::Invalid("eps must be >= 0".into()));
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        delta(self.mu, self.nu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    CombinedBlowupThm21,
    DerivativeBlowupThm22Sub,
    DerivativeBlowupThm22Critical,
    OutsideScope,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Region::CombinedBlowupThm21 => "COMBINED_BLOWUP_THM21",
            Region::DerivativeBlowupThm22Sub => "DERIVATIVE_BLOWUP_THM22_SUB",
            Region::DerivativeBlowupThm22Critical => "DERIVATIVE_BLOWUP_THM22_CRITICAL",
            Region::OutsideScope => "OUTSIDE_SCOPE",
        };
        f.write_str(s)
    }
}

/// Lifespan upper-bound law: a negative power of eps, or exponential in
/// eps^{-(p-1)} at the critical derivative power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LifespanLaw {
    Power(f64),
    Exponential,
    None,
}

#[derive(Debug, Clone)]
pub struct ExponentReport {
    pub delta: f64,
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
    pub p_glassey_shifted: Option<f64>,
    pub q_strauss_shifted: Option<f64>,
    pub q_fujita: f64,
    pub lambda_shifted: f64,
    pub region: Region,
    pub lifespan: LifespanLaw,
}

pub fn delta(mu: f64, nu: f64) -> f64 {
    (mu - 1.0) * (mu - 1.0) - 4.0 * nu * nu
}

/// Smaller root of alpha^2 - (mu-1) alpha + nu^2 = 0.
pub fn alpha(mu: f64, nu: f64) -> Result<f64> {
    let d = delta(mu, nu);
    if d < 0.0 {
        return Err(ExponentError::NegativeDelta(d));
    }
    Ok(0.5 * (mu - 1.0 - d.sqrt()))
}

pub fn p_glassey(d: f64) -> Result<f64> {
    if d <= 1.0 {
        return Err(ExponentError::DimensionPole(d));
    }
    Ok(1.0 + 2.0 / (d - 1.0))
}

/// Positive root of (d-1) q^2 - (d+1) q - 2 = 0.
pub fn q_strauss(d: f64) -> Result<f64> {
    if d <= 1.0 {
        return Err(ExponentError::DimensionPole(d));
    }
    Ok((d + 1.0 + (d * d + 10.0 * d - 7.0).sqrt()) / (2.0 * (d - 1.0)))
}

pub fn q_fujita(d: f64) -> Result<f64> {
    if d <= 0.0 {
        return Err(ExponentError::Invalid(format!("q_F requires d > 0, got {d}")));
    }
    Ok(1.0 + 2.0 / d)
}

pub fn lambda(p: f64, q: f64, d: f64) -> f64 {
    (q - 1.0) * ((d - 1.0) * p - 2.0)
}

/// sigma(mu, nu): mu + 1 - sqrt(delta) for delta in [0,1), mu for delta >= 1.
pub fn sigma(mu: f64, nu: f64) -> Result<f64> {
    let d = delta(mu, nu);
    if d < 0.0 {
        return Err(ExponentError::NegativeDelta(d));
    }
    Ok(if d < 1.0 { mu + 1.0 - d.sqrt() } else { mu })
}

const CRITICAL_EQ_TOL: f64 = 1e-12;

/// Classify a parameter tuple against the two blow-up theorems. Total on
/// valid params: anything not covered by a theorem lands in OutsideScope.
pub fn classify(params: &ModelParams) -> Result<ExponentReport> {
    params.validate()?;
    let d = params.delta();
    let shifted = params.dim as f64 + params.mu;
    let pg = p_glassey(shifted).ok();
    let qs = q_strauss(shifted).ok();
    let lam = lambda(params.p, params.q, shifted);
    let (alpha_v, sigma_v) = if d >= 0.0 {
        (Some(alpha(params.mu, params.nu)?), Some(sigma(params.mu, params.nu)?))
    } else {
        (None, None)
    };
    // The Fujita exponent enters the literature through the shift by alpha;
    // reported as informational only.
    let qf = match alpha_v {
        Some(a) => q_fujita(params.dim as f64 + a)?,
        None => q_fujita(params.dim as f64)?,
    };

    let mut region = Region::OutsideScope;
    let mut lifespan = LifespanLaw::None;
    if d >= 0.0 {
        if params.a == 1 && params.b == 1 {
            // Combined-nonlinearity theorem: strict inequalities.
            let above_pg = pg.map_or(false, |v| params.p > v);
            let above_qs = qs.map_or(false, |v| params.q > v);
            if above_pg && above_qs && lam < 4.0 {
                region = Region::CombinedBlowupThm21;
                lifespan = LifespanLaw::Power(2.0 * params.p * (params.q - 1.0) / (4.0 - lam));
            }
        } else if params.a == 1 && params.b == 0 {
            // Derivative-only theorem: p <= p_G(N+mu), with a distinct tag at
            // equality. At shifted dimension <= 1 the Glassey pole means
            // every p > 1 is subcritical.
            let at_critical = pg.map_or(false, |v| (params.p - v).abs() <= CRITICAL_EQ_TOL);
            let below = pg.map_or(true, |v| params.p < v);
            if at_critical {
                region = Region::DerivativeBlowupThm22Critical;
                lifespan = LifespanLaw::Exponential;
            } else if below {
                region = Region::DerivativeBlowupThm22Sub;
                let denom = 2.0 - (shifted - 1.0) * (params.p - 1.0);
                lifespan = LifespanLaw::Power(2.0 * (params.p - 1.0) / denom);
            }
        }
    }

    Ok(ExponentReport {
        delta: d,
        alpha: alpha_v,
        sigma: sigma_v,
        p_glassey_shifted: pg,
        q_strauss_shifted: qs,
        q_fujita: qf,
        lambda_shifted: lam,
        region,
        lifespan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(mu: f64, nu: f64, p: f64, q: f64, n: u32, a: u8, b: u8) -> ModelParams {
        ModelParams { mu, nu, p, q, dim: n, radius: 1.0, a, b, eps: 0.1 }
    }

    #[test]
    fn delta_reference_anchors() {
        assert_eq!(delta(9.0, 4.0), 0.0);
        assert_eq!(delta(10.0, 0.0), 81.0);
        assert_eq!(delta(10.0, 20.0), -1519.0);
    }

    #[test]
    fn alpha_roots() {
        assert_eq!(alpha(2.0, 0.0).unwrap(), 0.0);
        assert_eq!(alpha(1.0, 0.0).unwrap(), 0.0);
        let a = alpha(10.0, 4.0).unwrap();
        assert!((a - 2.438447187).abs() < 1e-8);
        let resid = a * a - 9.0 * a + 16.0;
        assert!(resid.abs() < 1e-13);
        assert!(matches!(alpha(1.0, 1.0), Err(ExponentError::NegativeDelta(_))));
    }

    #[test]
    fn glassey_strauss_fujita_values() {
        assert_eq!(p_glassey(2.0).unwrap(), 3.0);
        assert_eq!(p_glassey(3.0).unwrap(), 2.0);
        assert_eq!(p_glassey(1.5).unwrap(), 5.0);
        assert!(p_glassey(1.0).is_err());

        assert!((q_strauss(3.0).unwrap() - (1.0 + 2.0_f64.sqrt())).abs() < 1e-12);
        assert!((q_strauss(2.0).unwrap() - (3.0 + 17.0_f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!(q_strauss(0.9).is_err());

        assert_eq!(q_fujita(1.0).unwrap(), 3.0);
        assert_eq!(q_fujita(2.0).unwrap(), 2.0);
        assert!((q_fujita(4.5).unwrap() - 1.4444444444).abs() < 1e-9);
    }

    #[test]
    fn lambda_values() {
        assert!((lambda(5.2, 5.8, 1.5) - 2.88).abs() < 1e-12);
        assert!((lambda(2.0, 2.0, 3.0) - 2.0).abs() < 1e-12);
        assert!(lambda(3.0, 1.0 + 1e-15, 5.0).abs() < 1e-13);
    }

    #[test]
    fn sigma_branches() {
        assert_eq!(sigma(10.0, 4.0).unwrap(), 10.0);
        assert!((sigma(2.0, 0.4).unwrap() - 2.4).abs() < 1e-12);
        assert_eq!(sigma(1.0, 0.0).unwrap(), 2.0);
        assert!(sigma(0.0, 2.0).is_err());
    }

    #[test]
    fn classify_combined_region() {
        let r = classify(&params(0.5, 0.0, 5.2, 5.8, 1, 1, 1)).unwrap();
        assert_eq!(r.region, Region::CombinedBlowupThm21);
        assert!((r.lambda_shifted - 2.88).abs() < 1e-12);
        match r.lifespan {
            LifespanLaw::Power(e) => assert!((e - 44.5714285714).abs() < 1e-8),
            _ => panic!("expected power law"),
        }
        assert!((r.p_glassey_shifted.unwrap() - 5.0).abs() < 1e-12);
        assert!((r.q_strauss_shifted.unwrap() - (2.5 + 10.25_f64.sqrt())).abs() < 1e-10);
    }

    #[test]
    fn classify_derivative_regions() {
        let r = classify(&params(2.0, 0.4, 1.5, 2.0, 1, 1, 0)).unwrap();
        assert_eq!(r.region, Region::DerivativeBlowupThm22Sub);
        match r.lifespan {
            LifespanLaw::Power(e) => assert!((e - 1.0).abs() < 1e-12),
            _ => panic!("expected power law"),
        }
        let r = classify(&params(2.0, 0.0, 2.0, 2.0, 1, 1, 0)).unwrap();
        assert_eq!(r.region, Region::DerivativeBlowupThm22Critical);
        assert_eq!(r.lifespan, LifespanLaw::Exponential);
    }

    #[test]
    fn classify_outside_scope() {
        // delta < 0
        let r = classify(&params(1.0, 1.0, 2.0, 2.0, 1, 1, 1)).unwrap();
        assert_eq!(r.region, Region::OutsideScope);
        assert!(r.alpha.is_none());
        // hypothesis set fails: p below Glassey with combined nonlinearity
        let r = classify(&params(2.0, 0.0, 1.5, 5.0, 1, 1, 1)).unwrap();
        assert_eq!(r.region, Region::OutsideScope);
    }

    #[test]
    fn validation_rejects_bad_params() {
        assert!(params(2.0, 0.0, 1.0, 2.0, 1, 1, 1).validate().is_err());
        assert!(params(2.0, 0.0, 2.0, 7.0, 3, 1, 1).validate().is_err());
        assert!(params(2.0, 0.0, 2.0, 5.0, 3, 1, 1).validate().is_ok());
    }

    proptest! {
        #[test]
        fn alpha_root_identity(mu in 0.0..20.0_f64, nu in 0.0..10.0_f64) {
            prop_assume!(delta(mu, nu) >= 0.0);
            let a = alpha(mu, nu).unwrap();
            let resid = a * a - (mu - 1.0) * a + nu * nu;
            let scale = (a * a).abs().max(nu * nu).max(1.0);
            prop_assert!(resid.abs() <= 1e-12 * scale);
        }

        #[test]
        fn strauss_defining_identity(d in 1.0001..50.0_f64) {
            let q = q_strauss(d).unwrap();
            let resid = (d - 1.0) * q * q - (d + 1.0) * q - 2.0;
            prop_assert!(resid.abs() <= 1e-12 * (d * q * q).max(1.0));
        }

        #[test]
        fn glassey_boundary_identity(d in 1.0001..50.0_f64) {
            let pg = p_glassey(d).unwrap();
            prop_assert!(((d - 1.0) * pg - 2.0 - (d - 1.0)).abs() <= 1e-12 * d);
        }
    }
}
