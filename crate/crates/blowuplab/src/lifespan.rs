//! Epsilon sweeps: measure blow-up times over a descending eps ladder,
//! fit the lifespan power law, and compare against the theorem exponents.

use crate::exponents::{classify, LifespanLaw, ModelParams, Region};
use crate::wavesolver::{estimate_lifespan, LifespanEstimate, SolverOpts, DEFAULT_CFL};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid plan: {0}")]
    Invalid(String),
    #[error("base parameters are outside the blow-up theorems ({0})")]
    OutsideScope(Region),
    #[error("fit needs >= 3 records with positive lifespans, got {0}")]
    FitUnderdetermined(usize),
    #[error("singular fit: all eps values coincide")]
    SingularFit,
    #[error("solver: {0}")]
    Solver(#[from] crate::wavesolver::SolverError),
    #[error("parameters: {0}")]
    Params(#[from] crate::exponents::ExponentError),
}

pub type Result<T> = std::result::Result<T, SweepError>;

/// Slopes steeper than this are unmeasurable at desk scale; the sweep then
/// reports INCONCLUSIVE and falls back to the monotonicity property.
pub const STEEP_SLOPE_MAX: f64 = 10.0;
/// Tolerance on the fitted bound envelope C_fit eps^{-theta}.
pub const BOUND_TOL: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct SweepPlan {
    /// eps field ignored; replaced per record.
    pub base_params: ModelParams,
    /// strictly descending, in (0, 1); fewer than 4 entries forces an
    /// INCONCLUSIVE verdict.
    pub eps_list: Vec<f64>,
    /// dr-halving ladder handed to estimate_lifespan, coarse to fine.
    pub dr_ladder: Vec<f64>,
    /// horizon for the calibration run at the largest eps.
    pub t_max_hint: f64,
    /// t_max = safety * predicted lifespan for the remaining runs.
    pub safety: f64,
    pub threshold: f64,
    pub cfl: f64,
}

impl SweepPlan {
    pub fn new(base_params: ModelParams, eps_list: Vec<f64>, dr_ladder: Vec<f64>, t_max_hint: f64) -> Self {
        SweepPlan {
            base_params,
            eps_list,
            dr_ladder,
            t_max_hint,
            safety: 3.0,
            threshold: crate::wavesolver::DEFAULT_THRESHOLD,
            cfl: DEFAULT_CFL,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.eps_list.is_empty() || self.eps_list.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err(SweepError::Invalid("eps_list must lie in (0, 1)".into()));
        }
        if self.dr_ladder.len() < 2 {
            return Err(SweepError::Invalid("dr ladder needs >= 2 grids".into()));
        }
        if !(self.t_max_hint > 0.0) || !(self.safety >= 1.0) {
            return Err(SweepError::Invalid("need t_max_hint > 0 and safety >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SweepRecord {
    pub eps: f64,
    pub t_est: f64,
    pub converged: bool,
    pub grid_dr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    BoundViolated,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Consistent => "CONSISTENT",
            Verdict::BoundViolated => "BOUND_VIOLATED",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    /// eps values whose runs survived both horizons (excluded from the fit).
    pub survived: Vec<f64>,
    pub fit: Option<(f64, f64, f64)>, // (slope, intercept, r_squared)
    pub theory: LifespanLaw,
    pub verdict: Verdict,
    /// fallback property: T_est non-decreasing as eps decreases (2% slack).
    pub monotone: bool,
}

/// Ordinary least squares of log T_est on log(1/eps).
pub fn fit_powerlaw(records: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    fit_line(records.iter().map(|(e, t)| ((1.0 / e).ln(), t.ln())))
}

fn fit_line(points: impl Iterator<Item = (f64, f64)>) -> Result<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = points.collect();
    if pts.len() < 3 || pts.iter().any(|(_, y)| !y.is_finite()) {
        return Err(SweepError::FitUnderdetermined(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(SweepError::SingularFit);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok((slope, intercept, r2))
}

fn worker_pool() -> rayon::ThreadPool {
    let mut threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    if let Ok(cap) = std::env::var("BLOWUPLAB_THREADS") {
        if let Ok(cap) = cap.trim().parse::<usize>() {
            if cap >= 1 {
                threads = threads.min(cap);
            }
        }
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("worker pool")
}

/// Run the sweep: calibrate at the largest eps, predict horizons for the
/// rest from the theory law (exponent clamped to 2 so steep regions stay at
/// desk scale), run them concurrently with one automatic 3x-horizon retry on
/// survival, then fit and pass verdict.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    plan.validate()?;
    let report = classify(&plan.base_params)?;
    if report.region == Region::OutsideScope {
        return Err(SweepError::OutsideScope(report.region));
    }
    let theory = report.lifespan;

    let mut eps_list = plan.eps_list.clone();
    eps_list.sort_by(|a, b| b.total_cmp(a));
    eps_list.dedup();

    let run_one = |eps: f64, t_max: f64| -> Result<LifespanEstimate> {
        let mut params = plan.base_params;
        params.eps = eps;
        let mut opts = SolverOpts::new(t_max);
        opts.cfl = plan.cfl;
        opts.threshold = plan.threshold;
        Ok(estimate_lifespan(&params, &plan.dr_ladder, &opts)?)
    };
    let with_retry = |eps: f64, t_max: f64| -> Result<LifespanEstimate> {
        match run_one(eps, t_max)? {
            LifespanEstimate::Survived => run_one(eps, 3.0 * t_max),
            other => Ok(other),
        }
    };

    let mut records = Vec::new();
    let mut survived = Vec::new();

    // calibration run
    let eps0 = eps_list[0];
    let first = with_retry(eps0, plan.t_max_hint)?;
    let t0 = match first {
        LifespanEstimate::BlowUp { t_eps, converged, ref per_grid } => {
            records.push(SweepRecord {
                eps: eps0,
                t_est: t_eps,
                converged,
                grid_dr: per_grid.last().unwrap().0,
            });
            t_eps
        }
        LifespanEstimate::Survived => {
            survived.push(eps0);
            plan.t_max_hint
        }
        LifespanEstimate::Unresolved => {
            return Err(SweepError::Invalid(format!("eps = {eps0} run was UNRESOLVED")));
        }
    };

    let theta_pred = match theory {
        LifespanLaw::Power(th) => th.min(2.0),
        LifespanLaw::Exponential | LifespanLaw::None => 2.0,
    };
    let rest: Vec<f64> = eps_list[1..].to_vec();
    let outcomes: Vec<(f64, Result<LifespanEstimate>)> = worker_pool().install(|| {
        rest.par_iter()
            .map(|&eps| {
                let t_max = plan.safety * t0 * (eps0 / eps).powf(theta_pred);
                (eps, with_retry(eps, t_max))
            })
            .collect()
    });
    for (eps, outcome) in outcomes {
        match outcome? {
            LifespanEstimate::BlowUp { t_eps, converged, per_grid } => {
                records.push(SweepRecord {
                    eps,
                    t_est: t_eps,
                    converged,
                    grid_dr: per_grid.last().unwrap().0,
                });
            }
            LifespanEstimate::Survived => survived.push(eps),
            LifespanEstimate::Unresolved => {
                return Err(SweepError::Invalid(format!("eps = {eps} run was UNRESOLVED")));
            }
        }
    }
    records.sort_by(|a, b| b.eps.total_cmp(&a.eps));

    // monotone fallback: lifespans never shrink as eps decreases (2% slack)
    let monotone = !records.is_empty()
        && survived.iter().all(|s| records.iter().all(|r| *s <= r.eps))
        && records.windows(2).all(|w| w[1].t_est >= 0.98 * w[0].t_est);

    let fit_pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.converged)
        .map(|r| (r.eps, r.t_est))
        .collect();
    let fit = match theory {
        LifespanLaw::Exponential => {
            let pm1 = plan.base_params.p - 1.0;
            fit_line(fit_pts.iter().map(|(e, t)| (e.powf(-pm1), t.ln()))).ok()
        }
        _ => fit_powerlaw(&fit_pts).ok(),
    };

    let verdict = pass_verdict(&eps_list, &records, &fit_pts, theory);
    Ok(SweepResult { records, survived, fit, theory, verdict, monotone })
}

fn pass_verdict(
    eps_list: &[f64],
    records: &[SweepRecord],
    fit_pts: &[(f64, f64)],
    theory: LifespanLaw,
) -> Verdict {
    let theta = match theory {
        LifespanLaw::Power(th) => th,
        // the exponential law has no power envelope to violate
        LifespanLaw::Exponential | LifespanLaw::None => return Verdict::Inconclusive,
    };
    // Steep laws are unmeasurable at desk scale: the fitted prefactor is
    // dominated by transients, so an envelope exceedance carries no signal.
    if theta > STEEP_SLOPE_MAX {
        return Verdict::Inconclusive;
    }
    if fit_pts.len() >= 3 {
        let c_fit = (fit_pts
            .iter()
            .map(|(e, t)| (t * e.powf(theta)).ln())
            .sum::<f64>()
            / fit_pts.len() as f64)
            .exp();
        let violated = records
            .iter()
            .any(|r| r.t_est > c_fit * r.eps.powf(-theta) * (1.0 + BOUND_TOL));
        if violated {
            return Verdict::BoundViolated;
        }
    }
    if eps_list.len() < 4 || fit_pts.len() < 3 {
        return Verdict::Inconclusive;
    }
    Verdict::Consistent
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fit_exact_power_law() {
        let pts: Vec<(f64, f64)> = [0.4_f64, 0.3, 0.2, 0.1, 0.05]
            .iter()
            .map(|&e| (e, 5.0 * e.powf(-1.5)))
            .collect();
        let (slope, intercept, r2) = fit_powerlaw(&pts).unwrap();
        assert!((slope - 1.5).abs() < 1e-10);
        assert!((intercept - 5.0_f64.ln()).abs() < 1e-10);
        assert!((r2 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fit_constant_is_flat() {
        let pts: Vec<(f64, f64)> = [0.4, 0.2, 0.1].iter().map(|&e| (e, 7.0)).collect();
        let (slope, _, _) = fit_powerlaw(&pts).unwrap();
        assert!(slope.abs() < 1e-12);
    }

    #[test]
    fn fit_degenerate_inputs() {
        assert!(matches!(
            fit_powerlaw(&[(0.1, 1.0), (0.2, 2.0)]),
            Err(SweepError::FitUnderdetermined(2))
        ));
        assert!(matches!(
            fit_powerlaw(&[(0.1, 1.0), (0.1, 2.0), (0.1, 3.0)]),
            Err(SweepError::SingularFit)
        ));
    }

    #[test]
    fn fit_noisy_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let eps: Vec<f64> = (0..12).map(|i| 0.4 * 0.85_f64.powi(i)).collect();
        for _ in 0..20 {
            let pts: Vec<(f64, f64)> = eps
                .iter()
                .map(|&e| {
                    let noise = 1.0 + 0.05 * (2.0 * rng.gen::<f64>() - 1.0);
                    (e, 3.0 * e.powf(-1.2) * noise)
                })
                .collect();
            let (slope, _, _) = fit_powerlaw(&pts).unwrap();
            assert!((slope - 1.2).abs() < 0.1, "slope = {slope}");
        }
    }

    fn thm21_plan(eps_list: Vec<f64>) -> SweepPlan {
        let base = ModelParams {
            mu: 0.5,
            nu: 0.0,
            p: 5.2,
            q: 5.8,
            dim: 1,
            radius: 2.0,
            a: 1,
            b: 1,
            eps: 0.5,
        };
        SweepPlan::new(base, eps_list, vec![0.04, 0.02], 8.0)
    }

    #[test]
    fn short_eps_list_is_inconclusive() {
        let res = run_sweep(&thm21_plan(vec![0.6, 0.5])).unwrap();
        assert_eq!(res.verdict, Verdict::Inconclusive);
        assert_eq!(res.records.len(), 2);
    }

    #[test]
    fn steep_exponent_falls_back_to_monotonicity() {
        // theory exponent ~44.6: unmeasurable as a slope, INCONCLUSIVE with
        // finite, non-decreasing lifespans is the designed outcome
        let res = run_sweep(&thm21_plan(vec![0.6, 0.55, 0.5, 0.45])).unwrap();
        assert_eq!(res.verdict, Verdict::Inconclusive);
        assert_eq!(res.records.len(), 4);
        assert!(res.survived.is_empty());
        assert!(res.monotone, "records: {:?}", res.records);
        match res.theory {
            LifespanLaw::Power(th) => assert!(th > STEEP_SLOPE_MAX),
            other => panic!("unexpected law {other:?}"),
        }
    }

    #[test]
    fn verdict_invariant_under_reordering() {
        let a = run_sweep(&thm21_plan(vec![0.6, 0.55, 0.5, 0.45])).unwrap();
        let b = run_sweep(&thm21_plan(vec![0.45, 0.55, 0.6, 0.5])).unwrap();
        assert_eq!(a.verdict, b.verdict);
        let ta: Vec<f64> = a.records.iter().map(|r| r.t_est).collect();
        let tb: Vec<f64> = b.records.iter().map(|r| r.t_est).collect();
        assert_eq!(ta, tb);
    }

    #[test]
    fn outside_scope_plans_are_rejected() {
        let mut plan = thm21_plan(vec![0.6, 0.5, 0.4, 0.3]);
        plan.base_params.a = 0;
        plan.base_params.b = 0;
        assert!(matches!(run_sweep(&plan), Err(SweepError::OutsideScope(_))));
    }

    #[test]
    fn invalid_plans_are_rejected() {
        let mut plan = thm21_plan(vec![0.6, 0.5, 0.4]);
        plan.eps_list = vec![1.2, 0.5];
        assert!(run_sweep(&plan).is_err());
        let mut plan = thm21_plan(vec![0.6, 0.5, 0.4]);
        plan.dr_ladder = vec![0.02];
        assert!(run_sweep(&plan).is_err());
    }
}
