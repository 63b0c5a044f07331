//! Finite-difference solver for the variational inequality
//! `max(v_t + L_t v - r v, phi - v) = 0`, `v(T, x) = max(G, x)`.
//!
//! The unknown is the continuation premium `f = v - g x >= 0`. Since
//! `(d/dt + L_t - r)(g x) = x L(t, x)`, it solves
//!
//! ```text
//! max(f_t + L_t f - r f + x L(t, x), -f) = 0,    f(T, x) = (G - x)_+
//! ```
//!
//! on a log-uniform grid, with theta time stepping (Rannacher start) and
//! projected SOR for the obstacle `f >= 0`. Fee rates are frozen over each
//! step at its left node, as in the lattice.

use serde::{Deserialize, Serialize};

use crate::analytic::benefit_from_integral;
use crate::error::{Result, VaError};
use crate::model::Scenario;
use crate::region::Boundary;
use crate::surface::{Grid, Provenance, RewardKind, ValueSurface};

/// Projected SOR settings. `tol` is an absolute bound on the last sweep's
/// largest update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsorParams {
    pub omega: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl PsorParams {
    pub fn for_guarantee(guarantee: f64) -> Self {
        PsorParams {
            omega: 1.5,
            tol: 1e-10 * guarantee,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeGrid {
    pub grid: Grid,
    pub theta: f64,
    pub psor: PsorParams,
    /// Number of initial full steps replaced by two implicit half-steps each.
    pub rannacher_steps: usize,
}

impl PdeGrid {
    /// Grid with default scheme settings: Crank-Nicolson after two
    /// Rannacher steps, PSOR defaults scaled by `G`.
    pub fn new(scn: &Scenario, n_steps: usize, m_nodes: usize, xmax_mult: f64) -> Result<Self> {
        let grid = Grid::log_uniform(
            scn.maturity(),
            n_steps,
            scn.contract.initial_account,
            m_nodes,
            xmax_mult,
        )?;
        let pg = PdeGrid {
            grid,
            theta: 0.5,
            psor: PsorParams::for_guarantee(scn.guarantee()),
            rannacher_steps: 2,
        };
        pg.validate(scn)?;
        Ok(pg)
    }

    pub fn validate(&self, scn: &Scenario) -> Result<()> {
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(VaError::config("pde.theta", "theta must lie in [0.5, 1]"));
        }
        if !(self.psor.omega > 0.0 && self.psor.omega < 2.0) {
            return Err(VaError::config("pde.omega", "omega must lie in (0, 2)"));
        }
        if !(self.psor.tol > 0.0) {
            return Err(VaError::config("pde.tol", "tolerance must be positive"));
        }
        if self.psor.max_iter == 0 {
            return Err(VaError::config("pde.max_iter", "need at least one iteration"));
        }
        self.grid.check_breakpoints(scn.fee.breakpoints())
    }
}

/// Coefficients of one implicit system `lower f_{i-1} + diag f_i + upper f_{i+1} = rhs`.
struct Stencil {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

/// Spatial operator `(sigma^2/2) f_zz + (r - C - sigma^2/2) f_z - r f` on
/// interior nodes, as three diagonals. Falls back to upwinding the drift
/// where central differences would lose monotonicity.
fn operator(scn: &Scenario, grid: &Grid, t_fee: f64, dz: f64) -> Stencil {
    let m = grid.n_states();
    let s2 = scn.market.sigma * scn.market.sigma;
    let r = scn.market.r;
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    for i in 1..m - 1 {
        let x = grid.xnodes[i];
        let nu = r - scn.fee.rate_unchecked(t_fee, x, scn.maturity()) - 0.5 * s2;
        let diff = 0.5 * s2 / (dz * dz);
        let (lo, up) = if nu.abs() * dz <= s2 {
            (diff - 0.5 * nu / dz, diff + 0.5 * nu / dz)
        } else if nu > 0.0 {
            (diff, diff + nu / dz)
        } else {
            (diff - nu / dz, diff)
        };
        lower[i] = lo;
        upper[i] = up;
        diag[i] = -lo - up - r;
    }
    Stencil { lower, diag, upper }
}

/// Source `x L(t, x)` with the fee fixed at its value at `t_fee`.
fn source(scn: &Scenario, grid: &Grid, t: f64, t_fee: f64) -> Vec<f64> {
    grid.xnodes
        .iter()
        .map(|&x| {
            let c = scn.fee.rate_unchecked(t_fee, x, scn.maturity());
            x * scn.l_with_fee(t, x, c).0
        })
        .collect()
}

struct StepContext<'a> {
    scn: &'a Scenario,
    grid: &'a Grid,
    psor: PsorParams,
}

impl StepContext<'_> {
    /// One theta step from `t1` back to `t0`, fee frozen at `t_fee`.
    fn step(&self, f: &mut [f64], t0: f64, t1: f64, t_fee: f64, theta: f64, dz: f64) -> Result<()> {
        let grid = self.grid;
        let scn = self.scn;
        let m = grid.n_states();
        let dt = t1 - t0;
        let op = operator(scn, grid, t_fee, dz);
        let s0 = source(scn, grid, t0, t_fee);
        let s1 = source(scn, grid, t1, t_fee);

        let mut rhs = vec![0.0; m];
        for i in 1..m - 1 {
            let af = op.lower[i] * f[i - 1] + op.diag[i] * f[i] + op.upper[i] * f[i + 1];
            rhs[i] = f[i] + (1.0 - theta) * dt * af + dt * (theta * s0[i] + (1.0 - theta) * s1[i]);
        }
        let lower: Vec<f64> = op.lower.iter().map(|a| -theta * dt * a).collect();
        let upper: Vec<f64> = op.upper.iter().map(|a| -theta * dt * a).collect();
        let diag: Vec<f64> = op.diag.iter().map(|a| 1.0 - theta * dt * a).collect();

        // Bottom edge: holding value there, in closed form when available,
        // else its deep-in-the-money limit.
        let big_t = scn.maturity();
        let x0 = grid.xnodes[0];
        let psi0 = scn.charge.value_unchecked(t0, x0, big_t) * x0;
        let hold = match scn.fee.integral(t0, big_t, big_t) {
            Ok(fee_int) if scn.is_time_only() => benefit_from_integral(scn, big_t - t0, x0, fee_int),
            _ => scn.guarantee() * (-scn.market.r * (big_t - t0)).exp(),
        };
        f[0] = (hold - psi0).max(0.0);

        // Top edge: obstacle when surrender is expected there, else linear in x.
        let xt = grid.xnodes[m - 1];
        let c_top = scn.fee.rate_unchecked(t_fee, xt, scn.maturity());
        let (l_top, l_scale) = scn.l_with_fee(t0, xt, c_top);
        let clamp_top = l_top < -1e-12 * l_scale;
        let (xa, xb, xc) = (grid.xnodes[m - 3], grid.xnodes[m - 2], xt);
        let slope_w = (xc - xb) / (xb - xa);

        let mut iter = 0;
        loop {
            let mut change: f64 = 0.0;
            for i in 1..m - 1 {
                let y = (rhs[i] - lower[i] * f[i - 1] - upper[i] * f[i + 1]) / diag[i];
                let new = (f[i] + self.psor.omega * (y - f[i])).max(0.0);
                change = change.max((new - f[i]).abs());
                f[i] = new;
            }
            let top = if clamp_top {
                0.0
            } else {
                top_extrapolation(f[m - 3], f[m - 2], slope_w)
            };
            change = change.max((top - f[m - 1]).abs());
            f[m - 1] = top;
            iter += 1;
            if change <= self.psor.tol {
                return Ok(());
            }
            if iter >= self.psor.max_iter {
                return Err(VaError::SolverDivergence {
                    t: t0,
                    iterations: iter,
                    residual: change,
                });
            }
        }
    }
}

/// Linear extrapolation of the premium to the top node where it grows, a
/// flat continuation where it decays. A decaying premium there is put-like
/// and falls off faster than any line, so a line would cross zero and fake a
/// surrender node in a section known to be empty.
pub(crate) fn top_extrapolation(fa: f64, fb: f64, slope_w: f64) -> f64 {
    fb.max(fb + slope_w * (fb - fa))
}

/// Solves for `v` on the given grid. Runs with a state-dependent fee are
/// flagged `heuristic`.
pub fn solve_variational_inequality(scn: &Scenario, pde: &PdeGrid) -> Result<ValueSurface> {
    pde.validate(scn)?;
    let grid = &pde.grid;
    let (nt, m) = (grid.n_times(), grid.n_states());
    let n_steps = nt - 1;
    let big_t = scn.maturity();
    let dz = (grid.xnodes[m - 1] / grid.xnodes[0]).ln() / (m - 1) as f64;
    let g = scn.guarantee();
    let ctx = StepContext {
        scn,
        grid,
        psor: pde.psor,
    };

    let len = nt * m;
    let mut values = vec![0.0; len];
    let mut obstacle = vec![0.0; len];
    let mut gap = vec![0.0; len];
    let mut f: Vec<f64> = grid.xnodes.iter().map(|&x| (g - x).max(0.0)).collect();
    for (i, &x) in grid.xnodes.iter().enumerate() {
        values[n_steps * m + i] = g.max(x);
        obstacle[n_steps * m + i] = g.max(x);
    }
    for n in (0..n_steps).rev() {
        let (t0, t1) = (grid.tnodes[n], grid.tnodes[n + 1]);
        if n_steps - n <= pde.rannacher_steps {
            let mid = 0.5 * (t0 + t1);
            ctx.step(&mut f, mid, t1, t0, 1.0, dz)?;
            ctx.step(&mut f, t0, mid, t0, 1.0, dz)?;
        } else {
            ctx.step(&mut f, t0, t1, t0, pde.theta, dz)?;
        }
        for (i, &x) in grid.xnodes.iter().enumerate() {
            let psi = scn.charge.value_unchecked(t0, x, big_t) * x;
            let k = n * m + i;
            values[k] = psi + f[i];
            obstacle[k] = psi;
            gap[k] = f[i];
        }
    }
    let mut surface = ValueSurface::new(
        grid.clone(),
        Provenance::Pde,
        RewardKind::Discontinuous,
        values,
        obstacle,
        gap,
    );
    surface.heuristic = !scn.fee.is_time_only();
    Ok(surface)
}

/// Jump of `dv/dx` across the boundary on one time slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothFit {
    pub t: f64,
    pub b: f64,
    pub slope_left: f64,
    pub slope_right: f64,
    pub jump: f64,
}

/// One-sided slopes of `v` on either side of `b(t)` for every slice with a
/// non-empty section; empty sections yield `None`.
///
/// With `j` the boundary node, the right slope is the chord over
/// `[x_j, x_{j+1}]` and the left slope the chord over `[x_{j-2}, x_{j-1}]`,
/// the last cell lying entirely in the continuation region.
pub fn smooth_fit_diagnostic(surface: &ValueSurface, boundary: &Boundary) -> Result<Vec<Option<SmoothFit>>> {
    let grid = &surface.grid;
    if boundary.tnodes.len() + 1 != grid.n_times() {
        return Err(VaError::GridMismatch("boundary does not match the surface's time nodes".into()));
    }
    let xs = &grid.xnodes;
    let m = xs.len();
    Ok((0..boundary.tnodes.len())
        .map(|n| {
            let b = boundary.levels[n]?;
            let j = boundary.indices[n].unwrap_or_else(|| grid.bracket(b) + 1);
            if j < 2 || j + 1 >= m {
                return None;
            }
            let v = |i: usize| surface.value(n, i);
            let slope_right = (v(j + 1) - v(j)) / (xs[j + 1] - xs[j]);
            let slope_left = (v(j - 1) - v(j - 2)) / (xs[j - 1] - xs[j - 2]);
            Some(SmoothFit {
                t: grid.tnodes[n],
                b,
                slope_left,
                slope_right,
                jump: (slope_right - slope_left).abs(),
            })
        })
        .collect())
}

/// Mean jump over the non-empty slices with `|t_n - t| <= half_width`.
///
/// A single slice's jump depends on where the true boundary falls inside its
/// grid cell; averaging over neighbouring slices, where that position varies,
/// leaves the part that scales with the grid.
pub fn windowed_jump(fits: &[Option<SmoothFit>], t: f64, half_width: f64) -> Option<f64> {
    let jumps: Vec<f64> = fits
        .iter()
        .flatten()
        .filter(|f| (f.t - t).abs() <= half_width + 1e-12)
        .map(|f| f.jump)
        .collect();
    (!jumps.is_empty()).then(|| jumps.iter().sum::<f64>() / jumps.len() as f64)
}
