//! Finite-difference solver for u_tt - Δu + mu/(1+t) u_t + nu^2/(1+t)^2 u =
//! a|u_t|^p + b|u|^q with radially symmetric data, blow-up detection, and
//! grid-ladder lifespan estimation.
//!
//! Scheme: leapfrog in time with the damping term taken implicitly through
//! the centered difference (u^{n+1}-u^{n-1})/(2dt), solved pointwise in
//! closed form; mass term and both nonlinearities at level n, with u_t
//! lagged one level inside |u_t|^p.

use crate::exponents::{delta, ModelParams};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("sign hypothesis on (f, g) failed: {0}")]
    Hypothesis(String),
    #[error("parameters: {0}")]
    Params(#[from] crate::exponents::ExponentError),
}

pub type Result<T> = std::result::Result<T, SolverError>;

pub const DEFAULT_CFL: f64 = 0.45;
pub const DEFAULT_THRESHOLD: f64 = 1e8;
/// Margin added beyond the light cone t_max + R when sizing grids.
pub const GRID_MARGIN: f64 = 1.0;
/// Dispersive leakage beyond the light cone t+R+2dr must stay below this
/// fraction of the current amplitude (converges to zero under dr-halving).
const SUPPORT_CUTOFF: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    Line1D,
    Radial,
}

#[derive(Debug, Clone)]
pub struct SpatialGrid {
    pub dr: f64,
    pub r_max: f64,
    pub n_points: usize,
    pub geometry: Geometry,
}

impl SpatialGrid {
    pub fn new(dr: f64, r_max: f64, geometry: Geometry) -> Result<Self> {
        if !(dr > 0.0) || !(r_max > dr) {
            return Err(SolverError::Invalid(format!(
                "need 0 < dr < r_max, got dr={dr}, r_max={r_max}"
            )));
        }
        let n_points = (r_max / dr).round() as usize + 1;
        Ok(SpatialGrid { dr, r_max: (n_points - 1) as f64 * dr, n_points, geometry })
    }

    /// Grid sized so the light cone of data supported in B(0, radius) never
    /// reaches the outer boundary before t_max.
    pub fn for_horizon(dr: f64, t_max: f64, radius: f64, geometry: Geometry) -> Result<Self> {
        SpatialGrid::new(dr, t_max + radius + GRID_MARGIN, geometry)
    }

    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.dr
    }
}

pub fn geometry_for(dim: u32) -> Geometry {
    if dim == 1 { Geometry::Line1D } else { Geometry::Radial }
}

#[derive(Debug, Clone)]
pub struct WaveState {
    pub u_prev: Vec<f64>,
    pub u_curr: Vec<f64>,
    pub t: f64,
    pub dt: f64,
    pub blown: bool,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub dt: f64,
    pub u_curr: Vec<f64>,
    pub u_prev: Vec<f64>,
}

impl Snapshot {
    /// Backward-difference u_t at this snapshot's time.
    pub fn u_t(&self) -> Vec<f64> {
        self.u_curr
            .iter()
            .zip(&self.u_prev)
            .map(|(c, p)| (c - p) / self.dt)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimStatus {
    BlewUp,
    Survived,
    Unresolved,
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub status: SimStatus,
    /// Threshold-crossing time, defined iff status is BlewUp.
    pub t_est: Option<f64>,
    /// (last t with max|u| <= threshold/10, crossing time).
    pub bracket: Option<(f64, f64)>,
    pub amp_history: Vec<(f64, f64)>,
    pub snapshots: Vec<Snapshot>,
    pub support_ok: bool,
    pub params: ModelParams,
    pub grid: SpatialGrid,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOpts {
    pub t_max: f64,
    pub cfl: f64,
    pub threshold: f64,
    /// Snapshot spacing in time units; None disables snapshot storage.
    pub snap_cadence: Option<f64>,
}

impl SolverOpts {
    pub fn new(t_max: f64) -> Self {
        SolverOpts { t_max, cfl: DEFAULT_CFL, threshold: DEFAULT_THRESHOLD, snap_cadence: None }
    }
}

/// Normalized bump data: f(r) = exp(1 - 1/(1 - (r/R)^2)) inside B(0, R),
/// zero outside, and g = f. Returns (f, g, certificate) where the
/// certificate confirms ((mu-1-sqrt(delta))/2) f + g > 0 pointwise on the
/// open support.
pub fn make_initial_data(
    params: &ModelParams,
    grid: &SpatialGrid,
) -> Result<(Vec<f64>, Vec<f64>, bool)> {
    let d = delta(params.mu, params.nu);
    // the nonlinear theory needs delta >= 0; linear runs may probe delta < 0
    if d < 0.0 && (params.a == 1 || params.b == 1) {
        return Err(SolverError::Invalid(format!(
            "nonlinear runs need (mu-1)^2 - 4 nu^2 >= 0, got {d}"
        )));
    }
    let rr = params.radius;
    let f: Vec<f64> = (0..grid.n_points)
        .map(|i| {
            let s = grid.r(i) / rr;
            if s < 1.0 {
                (1.0 - 1.0 / (1.0 - s * s)).exp()
            } else {
                0.0
            }
        })
        .collect();
    let g = f.clone();
    let coef = (params.mu - 1.0 - d.sqrt()) / 2.0;
    let cert = f
        .iter()
        .zip(&g)
        .filter(|(fi, _)| **fi > 0.0)
        .all(|(fi, gi)| coef * fi + gi > 0.0);
    // the sign hypothesis drives the blow-up theorems; linear (a=b=0) runs
    // are exempt and only carry the certificate flag
    if !cert && (params.a == 1 || params.b == 1) {
        return Err(SolverError::Hypothesis(format!(
            "((mu-1-sqrt(delta))/2) f + g <= 0 somewhere on supp f (coef = {coef})"
        )));
    }
    Ok((f, g, cert))
}

/// Radial Laplacian u_rr + (N-1)/r u_r with even symmetry at r=0 and u=0 at
/// the outer boundary. At the origin the (N-1)/r u_r term is replaced by its
/// limit, giving Δu(0) = N * 2(u[1]-u[0])/dr^2.
fn laplacian(u: &[f64], grid: &SpatialGrid, dim: u32, out: &mut [f64]) {
    let n = u.len();
    let dr2 = grid.dr * grid.dr;
    let nm1 = match grid.geometry {
        Geometry::Line1D => 0.0,
        Geometry::Radial => (dim - 1) as f64,
    };
    out[0] = (nm1 + 1.0) * 2.0 * (u[1] - u[0]) / dr2;
    for i in 1..n - 1 {
        let urr = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / dr2;
        let ur = (u[i + 1] - u[i - 1]) / (2.0 * grid.dr);
        out[i] = urr + nm1 * ur / grid.r(i);
    }
    out[n - 1] = 0.0;
}

fn nonlinearity(params: &ModelParams, ut_lag: f64, u: f64) -> f64 {
    let mut nl = 0.0;
    if params.a == 1 {
        nl += ut_lag.abs().powf(params.p);
    }
    if params.b == 1 {
        nl += u.abs().powf(params.q);
    }
    nl
}

/// One leapfrog step from (u_prev at t-dt, u_curr at t) to t+dt. Returns
/// (max|u_new|, max|u_new| beyond the light cone t+dt+R+2dr).
pub fn step(
    state: &WaveState,
    params: &ModelParams,
    grid: &SpatialGrid,
    lap: &mut [f64],
    u_new: &mut [f64],
) -> (f64, f64) {
    let n = grid.n_points;
    let dt = state.dt;
    let x = 1.0 + state.t;
    let a_ = 1.0 / (dt * dt);
    let b_ = params.mu / (2.0 * dt * x);
    let mass = params.nu * params.nu / (x * x);
    laplacian(&state.u_curr, grid, params.dim, lap);
    let mut max_abs = 0.0_f64;
    for i in 0..n - 1 {
        let u = state.u_curr[i];
        let ut_lag = (u - state.u_prev[i]) / dt;
        let rhs = 2.0 * a_ * u - (a_ - b_) * state.u_prev[i] + lap[i] - mass * u
            + nonlinearity(params, ut_lag, u);
        u_new[i] = rhs / (a_ + b_);
        max_abs = max_abs.max(u_new[i].abs());
    }
    u_new[n - 1] = 0.0;
    let cone = state.t + dt + params.radius + 2.0 * grid.dr;
    let i0 = ((cone / grid.dr).ceil() as usize).min(n);
    let leak = u_new[i0..].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    (max_abs, leak)
}

/// Integrate to t_max or until max|u| crosses the threshold (or goes
/// non-finite). The reported T_est is the crossing time, bracketed from
/// below by the last time max|u| <= threshold/10.
pub fn run(params: &ModelParams, grid: &SpatialGrid, opts: &SolverOpts) -> Result<SimOutcome> {
    params.validate()?;
    if !(opts.t_max > 0.0) || !(opts.cfl > 0.0 && opts.cfl <= 0.9) || !(opts.threshold > 0.0) {
        return Err(SolverError::Invalid(format!(
            "need t_max > 0, cfl in (0, 0.9], threshold > 0; got {opts:?}"
        )));
    }
    if grid.r_max < opts.t_max + params.radius {
        return Err(SolverError::Invalid(format!(
            "grid r_max = {} cannot contain the light cone t_max + R = {}",
            grid.r_max,
            opts.t_max + params.radius
        )));
    }
    let (f, g, _) = make_initial_data(params, grid)?;
    let eps = params.eps;
    let n = grid.n_points;

    let mut dt = opts.cfl * grid.dr;
    if params.mu > 0.0 {
        // strong early damping limits the step independently of CFL
        dt = dt.min(0.05 / params.mu);
    }
    let n_steps = (opts.t_max / dt).ceil() as usize;
    if dt < 1e-9 {
        return Ok(SimOutcome {
            status: SimStatus::Unresolved,
            t_est: None,
            bracket: None,
            amp_history: Vec::new(),
            snapshots: Vec::new(),
            support_ok: true,
            params: *params,
            grid: grid.clone(),
            dt,
        });
    }
    let dt = opts.t_max / n_steps as f64;

    let u0: Vec<f64> = f.iter().map(|v| eps * v).collect();
    let v0: Vec<f64> = g.iter().map(|v| eps * v).collect();

    // Taylor first step with u_tt(0) from the PDE at t = 0.
    let mut lap = vec![0.0; n];
    laplacian(&u0, grid, params.dim, &mut lap);
    let nu2 = params.nu * params.nu;
    let mut u1 = vec![0.0; n];
    for i in 0..n - 1 {
        let utt = lap[i] - params.mu * v0[i] - nu2 * u0[i] + nonlinearity(params, v0[i], u0[i]);
        u1[i] = u0[i] + dt * v0[i] + 0.5 * dt * dt * utt;
    }

    let snap_stride = opts
        .snap_cadence
        .map(|c| ((c / dt).round() as usize).max(1));
    let mut snapshots = Vec::new();
    if snap_stride.is_some() {
        // synthetic previous level so u_t(0) back-differences to eps*g
        let um1: Vec<f64> = u0.iter().zip(&v0).map(|(u, v)| u - dt * v).collect();
        snapshots.push(Snapshot { t: 0.0, dt, u_curr: u0.clone(), u_prev: um1 });
    }

    let mut state = WaveState { u_prev: u0, u_curr: u1, t: dt, dt, blown: false };
    let max0 = state.u_curr.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut amp_history = vec![(0.0, eps), (dt, max0)];
    let mut support_ok = true;
    let mut u_new = vec![0.0; n];

    let mut status = SimStatus::Survived;
    let mut t_est = None;
    let mut bracket = None;
    let mut last_below = if max0 <= opts.threshold / 10.0 { dt } else { 0.0 };

    for k in 1..n_steps {
        let (max_abs, leak) = step(&state, params, grid, &mut lap, &mut u_new);
        let t_new = (k + 1) as f64 * dt;
        std::mem::swap(&mut state.u_prev, &mut state.u_curr);
        std::mem::swap(&mut state.u_curr, &mut u_new);
        state.t = t_new;
        amp_history.push((t_new, max_abs));
        if leak > SUPPORT_CUTOFF * max_abs {
            support_ok = false;
        }
        if !max_abs.is_finite() || max_abs >= opts.threshold {
            state.blown = true;
            status = SimStatus::BlewUp;
            t_est = Some(t_new);
            bracket = Some((last_below, t_new));
            break;
        }
        if max_abs <= opts.threshold / 10.0 {
            last_below = t_new;
        }
        if let Some(stride) = snap_stride {
            if (k + 1) % stride == 0 {
                snapshots.push(Snapshot {
                    t: t_new,
                    dt,
                    u_curr: state.u_curr.clone(),
                    u_prev: state.u_prev.clone(),
                });
            }
        }
    }

    Ok(SimOutcome {
        status,
        t_est,
        bracket,
        amp_history,
        snapshots,
        support_ok,
        params: *params,
        grid: grid.clone(),
        dt,
    })
}

#[derive(Debug, Clone)]
pub enum LifespanEstimate {
    BlowUp {
        t_eps: f64,
        converged: bool,
        /// (dr, T_est) per ladder rung, coarse to fine.
        per_grid: Vec<(f64, f64)>,
    },
    Survived,
    Unresolved,
}

/// Blow-up time over a dr-halving ladder; converged iff the two finest
/// estimates agree within 5% relative.
pub fn estimate_lifespan(
    params: &ModelParams,
    dr_ladder: &[f64],
    opts: &SolverOpts,
) -> Result<LifespanEstimate> {
    if dr_ladder.len() < 2 {
        return Err(SolverError::Invalid("ladder needs >= 2 grids".into()));
    }
    let mut per_grid = Vec::new();
    for &dr in dr_ladder {
        let grid = SpatialGrid::for_horizon(dr, opts.t_max, params.radius, geometry_for(params.dim))?;
        let out = run(params, &grid, opts)?;
        match out.status {
            SimStatus::Survived => return Ok(LifespanEstimate::Survived),
            SimStatus::Unresolved => return Ok(LifespanEstimate::Unresolved),
            SimStatus::BlewUp => per_grid.push((dr, out.t_est.unwrap())),
        }
    }
    let m = per_grid.len();
    let (_, t_fine) = per_grid[m - 1];
    let (_, t_next) = per_grid[m - 2];
    let converged = (t_fine - t_next).abs() < 0.05 * t_fine.abs();
    Ok(LifespanEstimate::BlowUp { t_eps: t_fine, converged, per_grid })
}
