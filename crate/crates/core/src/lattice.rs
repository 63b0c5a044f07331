//! Bermudan dynamic programming on a Markov-chain approximation of the
//! sub-account.
//!
//! The account is replaced by a birth-death chain on log-uniform states whose
//! generator matches the local drift `(r - C) x` and variance `sigma^2 x^2`.
//! One exercise period of length `dt` uses the implicit-Euler resolvent
//! `P = (I - dt Q)^{-1}`, which is a stochastic matrix for every `dt`
//! (strictly positive between interior states) and agrees with `exp(dt Q)`
//! to `O(dt^2)`. The last period, which starts from the kinked payoff, is
//! split into four resolvent steps. The highest state absorbs. For time-only inputs the lowest
//! state also absorbs, and both edge premiums are set by boundary rules that
//! use the closed-form holding value; otherwise the lowest state reflects.
//!
//! Backward induction runs on premiums rather than values. Writing
//! `psi_n = g(t_n, x) x` and `d_n = e^{-r dt} E[psi_{n+1}] - psi_n`,
//!
//! ```text
//! f_n = max(0, e^{-r dt} P f_{n+1} + d_n),           f_N = (G - x)_+
//! ```
//!
//! so that `v = psi + f`. Working with `f` keeps the exercise decision free of
//! cancellation between two large, nearly equal numbers. For time-only fee and
//! charge `d_n` is evaluated in closed form, which makes it exactly zero when
//! holding and surrendering drift at the same rate.

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::put_from_integral;
use crate::error::{Result, VaError};
use crate::model::Scenario;
use crate::pde::top_extrapolation;
use crate::surface::{Grid, Provenance, RewardKind, ValueSurface};

/// LU factors of one tridiagonal `I - dt Q`.
#[derive(Debug, Clone, PartialEq)]
struct Factor {
    lower: Vec<f64>,
    upper_scaled: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl Factor {
    fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Self {
        let m = diag.len();
        let mut upper_scaled = vec![0.0; m];
        let mut inv_pivot = vec![0.0; m];
        let mut prev = 0.0;
        for i in 0..m {
            let pivot = diag[i] - if i > 0 { lower[i] * prev } else { 0.0 };
            inv_pivot[i] = 1.0 / pivot;
            prev = upper[i] * inv_pivot[i];
            upper_scaled[i] = prev;
        }
        Factor {
            lower: lower.to_vec(),
            upper_scaled,
            inv_pivot,
        }
    }

    /// Solves `(I - dt Q) y = z` in place.
    fn solve(&self, y: &mut [f64]) {
        let m = y.len();
        y[0] *= self.inv_pivot[0];
        for i in 1..m {
            y[i] = (y[i] - self.lower[i] * y[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..m - 1).rev() {
            y[i] -= self.upper_scaled[i] * y[i + 1];
        }
    }
}

/// One period of the chain: generator rates and the factorized resolvent.
#[derive(Debug, Clone, PartialEq)]
struct Period {
    up: Vec<f64>,
    down: Vec<f64>,
    /// Number of resolvent steps of length `dt / substeps` in the period.
    substeps: usize,
    factor: Factor,
}

impl Period {
    fn apply(&self, y: &mut [f64]) {
        for _ in 0..self.substeps {
            self.factor.solve(y);
        }
    }
}

/// Resolvent steps in the last period, which starts from the kinked payoff.
const FINAL_SUBSTEPS: usize = 4;

/// State chain with exercise dates `t_n = n T / N`.
#[derive(Debug, Clone)]
pub struct ChainGrid {
    pub grid: Grid,
    pub xmax_mult: f64,
    /// `period_of[n]` indexes the transition used from `t_n` to `t_{n+1}`.
    period_of: Vec<usize>,
    periods: Vec<Period>,
}

/// Builds the chain for `scn` with `n_steps` periods and `m_nodes` states.
///
/// Coefficients are frozen at the left end `t_n` of each period, so fee
/// breakpoints must be time nodes.
pub fn build_chain(scn: &Scenario, n_steps: usize, m_nodes: usize, xmax_mult: f64) -> Result<ChainGrid> {
    let grid = Grid::log_uniform(
        scn.maturity(),
        n_steps,
        scn.contract.initial_account,
        m_nodes,
        xmax_mult,
    )?;
    grid.check_breakpoints(scn.fee.breakpoints())?;
    let dt = grid.dt();
    let mut periods: Vec<Period> = Vec::new();
    let mut period_of = Vec::with_capacity(n_steps);
    for n in 0..n_steps {
        let (up, down) = generator_rates(scn, &grid, grid.tnodes[n], xmax_mult)?;
        let substeps = if n + 1 == n_steps { FINAL_SUBSTEPS } else { 1 };
        if let Some(k) = periods
            .iter()
            .position(|p| p.up == up && p.down == down && p.substeps == substeps)
        {
            period_of.push(k);
            continue;
        }
        let h = dt / substeps as f64;
        let lower: Vec<f64> = down.iter().map(|q| -h * q).collect();
        let upper: Vec<f64> = up.iter().map(|q| -h * q).collect();
        let diag: Vec<f64> = up.iter().zip(&down).map(|(u, d)| 1.0 + h * (u + d)).collect();
        let factor = Factor::new(&lower, &diag, &upper);
        period_of.push(periods.len());
        periods.push(Period {
            up,
            down,
            substeps,
            factor,
        });
    }
    Ok(ChainGrid {
        grid,
        xmax_mult,
        period_of,
        periods,
    })
}

/// Moment-matched up/down jump rates at time `t`.
fn generator_rates(scn: &Scenario, grid: &Grid, t: f64, xmax_mult: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let pinned_bottom = scn.is_time_only();
    let xs = &grid.xnodes;
    let m = xs.len();
    let s2 = scn.market.sigma * scn.market.sigma;
    let mut up = vec![0.0; m];
    let mut down = vec![0.0; m];
    for i in 0..m {
        let x = xs[i];
        let a = if i > 0 { x - xs[i - 1] } else { x - x * x / xs[1] };
        let b = if i + 1 < m {
            xs[i + 1] - x
        } else {
            x * x / xs[m - 2] - x
        };
        let mu = (scn.market.r - scn.fee.rate_unchecked(t, x, scn.maturity())) * x;
        let var = s2 * x * x;
        let qu = (var + mu * a) / (b * (a + b));
        let qd = (var - mu * b) / (a * (a + b));
        if qu < 0.0 || qd < 0.0 {
            // Need log-spacing dz below sigma^2 / |drift rate|, with a factor-two margin.
            let rate = (mu / x).abs();
            let needed = 2.0 * (2.0 * xmax_mult.ln()) * rate / s2;
            let suggested = ((needed.ceil() as usize).max(m) + 2) | 1;
            return Err(VaError::GridTooCoarse {
                node: i,
                x,
                suggested_m: suggested,
            });
        }
        // The top state absorbs, since a lone downward jump there would add
        // a drift of order sigma^2 x / dz against a value that grows
        // linearly in x. The bottom state absorbs when its value is pinned
        // to a closed form and reflects otherwise.
        if i > 0 && i + 1 < m {
            down[i] = qd;
        }
        if i + 1 < m && (i > 0 || !pinned_bottom) {
            up[i] = qu;
        }
    }
    Ok((up, down))
}

impl ChainGrid {
    pub fn n_steps(&self) -> usize {
        self.period_of.len()
    }

    /// `out = P_n f`, the conditional expectation over period `n`.
    pub fn expectation(&self, n: usize, f: &[f64], out: &mut [f64]) {
        out.copy_from_slice(f);
        self.periods[self.period_of[n]].apply(out);
    }

    /// Dense transition matrix of period `n` (row = from, column = to).
    pub fn transition_matrix(&self, n: usize) -> Vec<Vec<f64>> {
        let m = self.grid.n_states();
        let mut rows = vec![vec![0.0; m]; m];
        let mut col = vec![0.0; m];
        for j in 0..m {
            col.iter_mut().for_each(|c| *c = 0.0);
            col[j] = 1.0;
            self.periods[self.period_of[n]].apply(&mut col);
            for i in 0..m {
                rows[i][j] = col[i];
            }
        }
        rows
    }

    /// Generator jump rates `(up, down)` of period `n`.
    pub fn generator(&self, n: usize) -> (&[f64], &[f64]) {
        let p = &self.periods[self.period_of[n]];
        (&p.up, &p.down)
    }
}

fn check_chain(chain: &ChainGrid, scn: &Scenario) -> Result<()> {
    let last = *chain.grid.tnodes.last().unwrap();
    if (last - scn.maturity()).abs() > 1e-12 * scn.maturity() {
        return Err(VaError::GridMismatch(format!(
            "chain ends at {last} but the contract matures at {}",
            scn.maturity()
        )));
    }
    Ok(())
}

/// Surrender values `psi_n` and drift terms `d_n` for every slice.
struct Ingredients {
    psi: Vec<Vec<f64>>,
    drift: Vec<Vec<f64>>,
    /// Edge values for each slice before maturity, when `h` has a closed form.
    edges: Option<Edges>,
}

/// Both edge states take the closed-form holding value `h`. On top of
/// `max(psi, h)` the lowest state copies the early-surrender premium of its
/// neighbour; the highest state sets it to zero when `L < 0` there and
/// otherwise extrapolates it as the PDE does.
struct Edges {
    /// `h - psi` at the lowest state.
    bottom: Vec<f64>,
    /// `h - psi` at the highest state.
    top_hold: Vec<f64>,
    top_clamp: Vec<bool>,
    slope_w: f64,
}

impl Edges {
    /// Early-surrender premium `v - max(psi, h)` at the highest state from
    /// the two below it.
    fn top(&self, n: usize, qa: f64, qb: f64) -> f64 {
        if self.top_clamp[n] {
            0.0
        } else {
            top_extrapolation(qa, qb, self.slope_w).max(0.0)
        }
    }
}

fn ingredients(chain: &ChainGrid, scn: &Scenario) -> Ingredients {
    let grid = &chain.grid;
    let big_t = scn.maturity();
    let n_steps = chain.n_steps();
    let m = grid.n_states();
    let psi: Vec<Vec<f64>> = grid
        .tnodes
        .iter()
        .map(|&t| {
            grid.xnodes
                .iter()
                .map(|&x| scn.charge.value_unchecked(t, x, big_t) * x)
                .collect()
        })
        .collect();
    let disc = (-scn.market.r * grid.dt()).exp();
    let drift = (0..n_steps)
        .into_par_iter()
        .map(|n| {
            let (t0, t1) = (grid.tnodes[n], grid.tnodes[n + 1]);
            if scn.is_time_only() {
                let c = scn.fee.rate_unchecked(t0, 1.0, big_t);
                let k = (scn.charge.log_growth(t0, t1, big_t) - c * (t1 - t0)).exp_m1();
                psi[n].iter().map(|p| p * k).collect()
            } else {
                let mut out = vec![0.0; m];
                chain.expectation(n, &psi[n + 1], &mut out);
                out.iter().zip(&psi[n]).map(|(e, p)| disc * e - p).collect()
            }
        })
        .collect();
    let edges = scn.is_time_only().then(|| {
        let xs = &grid.xnodes;
        let (x0, xt) = (xs[0], xs[m - 1]);
        // h - psi = psi (e^{-int c} / g - 1) + put, free of cancellation
        // deep in the money.
        let hold = |n: usize, x: f64, psi: f64| {
            let t = grid.tnodes[n];
            let fee_int = scn.fee.integral(t, big_t, big_t).unwrap_or(0.0);
            let carry = (scn.charge.log_growth(t, big_t, big_t) - fee_int).exp_m1();
            psi * carry + put_from_integral(scn, big_t - t, x, fee_int)
        };
        Edges {
            bottom: (0..n_steps).map(|n| hold(n, x0, psi[n][0])).collect(),
            top_hold: (0..n_steps).map(|n| hold(n, xt, psi[n][m - 1])).collect(),
            top_clamp: (0..n_steps)
                .map(|n| {
                    let t = grid.tnodes[n];
                    let (l, scale) = scn.l_with_fee(t, xt, scn.fee.rate_unchecked(t, xt, big_t));
                    l < -1e-12 * scale
                })
                .collect(),
            slope_w: (xt - xs[m - 2]) / (xs[m - 2] - xs[m - 3]),
        }
    });
    Ingredients { psi, drift, edges }
}

/// Bermudan value on the chain for either reward.
///
/// The continuous reward uses the holding value `h` of the same chain, so
/// the two rewards give the same value function up to round-off.
pub fn bermudan_value(chain: &ChainGrid, scn: &Scenario, kind: RewardKind) -> Result<ValueSurface> {
    check_chain(chain, scn)?;
    let grid = &chain.grid;
    let n_steps = chain.n_steps();
    let m = grid.n_states();
    let g = scn.guarantee();
    let disc = (-scn.market.r * grid.dt()).exp();
    let ing = ingredients(chain, scn);

    let len = (n_steps + 1) * m;
    let mut values = vec![0.0; len];
    let mut obstacle = vec![0.0; len];
    let mut gap = vec![0.0; len];
    for (i, &x) in grid.xnodes.iter().enumerate() {
        let k = n_steps * m + i;
        values[k] = g.max(x);
        obstacle[k] = g.max(x);
    }

    let terminal_put: Vec<f64> = grid.xnodes.iter().map(|&x| (g - x).max(0.0)).collect();
    let mut tmp = vec![0.0; m];
    match kind {
        RewardKind::Discontinuous => {
            // The holding premium p is only needed for the edge rules.
            let mut f = terminal_put.clone();
            let mut p = terminal_put;
            for n in (0..n_steps).rev() {
                chain.expectation(n, &f, &mut tmp);
                for i in 0..m {
                    f[i] = (disc * tmp[i] + ing.drift[n][i]).max(0.0);
                }
                if let Some(e) = &ing.edges {
                    chain.expectation(n, &p, &mut tmp);
                    for i in 0..m {
                        p[i] = disc * tmp[i] + ing.drift[n][i];
                    }
                    p[0] = e.bottom[n];
                    p[m - 1] = e.top_hold[n];
                    let q = |i: usize| f[i] - p[i].max(0.0);
                    let (q1, qa, qb) = (q(1), q(m - 3), q(m - 2));
                    f[0] = p[0].max(0.0) + q1.max(0.0);
                    f[m - 1] = p[m - 1].max(0.0) + e.top(n, qa, qb);
                    if !e.top_clamp[n] {
                        // L >= 0 leaves the section empty; keep a holding
                        // premium that underflowed to zero out of the region.
                        f[m - 1] = f[m - 1].max(f64::MIN_POSITIVE);
                    }
                }
                for i in 0..m {
                    let k = n * m + i;
                    values[k] = ing.psi[n][i] + f[i];
                    obstacle[k] = ing.psi[n][i];
                    gap[k] = f[i];
                }
            }
        }
        RewardKind::Continuous => {
            // h = psi + p and v = h + w.
            let mut p = terminal_put;
            let mut w = vec![0.0; m];
            let mut tmp_w = vec![0.0; m];
            for n in (0..n_steps).rev() {
                chain.expectation(n, &p, &mut tmp);
                chain.expectation(n, &w, &mut tmp_w);
                for i in 0..m {
                    p[i] = disc * tmp[i] + ing.drift[n][i];
                    w[i] = (-p[i]).max(0.0).max(disc * tmp_w[i]);
                }
                if let Some(e) = &ing.edges {
                    p[0] = e.bottom[n];
                    p[m - 1] = e.top_hold[n];
                    let q = |i: usize| w[i] + p[i].min(0.0);
                    let (q1, qa, qb) = (q(1), q(m - 3), q(m - 2));
                    w[0] = (-p[0]).max(0.0) + q1.max(0.0);
                    w[m - 1] = (-p[m - 1]).max(0.0) + e.top(n, qa, qb);
                }
                for i in 0..m {
                    let k = n * m + i;
                    values[k] = ing.psi[n][i] + p[i] + w[i];
                    obstacle[k] = ing.psi[n][i] + p[i].max(0.0);
                    gap[k] = w[i] + p[i].min(0.0);
                }
            }
        }
    }
    Ok(ValueSurface::new(
        grid.clone(),
        Provenance::Lattice,
        kind,
        values,
        obstacle,
        gap,
    ))
}

/// Value of holding to maturity on the chain, one row per time node.
pub fn holding_value(chain: &ChainGrid, scn: &Scenario) -> Result<Vec<Vec<f64>>> {
    check_chain(chain, scn)?;
    let grid = &chain.grid;
    let n_steps = chain.n_steps();
    let m = grid.n_states();
    let disc = (-scn.market.r * grid.dt()).exp();
    let ing = ingredients(chain, scn);
    let mut rows = vec![Vec::new(); n_steps + 1];
    let mut p: Vec<f64> = grid.xnodes.iter().map(|&x| (scn.guarantee() - x).max(0.0)).collect();
    rows[n_steps] = grid.xnodes.iter().map(|&x| scn.guarantee().max(x)).collect();
    let mut tmp = vec![0.0; m];
    for n in (0..n_steps).rev() {
        chain.expectation(n, &p, &mut tmp);
        for i in 0..m {
            p[i] = disc * tmp[i] + ing.drift[n][i];
        }
        if let Some(e) = &ing.edges {
            p[0] = e.bottom[n];
            p[m - 1] = e.top_hold[n];
        }
        rows[n] = ing.psi[n].iter().zip(&p).map(|(a, b)| a + b).collect();
    }
    Ok(rows)
}

/// Bermudan values for a sequence of step counts and their extrapolation.
#[derive(Debug, Clone, Serialize)]
pub struct Extrapolation {
    pub n_seq: Vec<usize>,
    /// `b_N(0, F0)` for each `N`.
    pub values: Vec<f64>,
    /// `|b_{N_{k+1}}(0, F0) - b_{N_k}(0, F0)|`.
    pub deltas: Vec<f64>,
    /// Richardson estimate from the last two values, assuming first-order error in `1/N`.
    pub extrapolated: f64,
    /// Set when the deltas are not strictly decreasing.
    pub convergence_warning: bool,
    #[serde(skip)]
    pub surfaces: Vec<ValueSurface>,
}

/// Runs the lattice for every `N` in `n_seq` and extrapolates `b_N(0, F0)`
/// to `N = infinity`.
pub fn american_extrapolate(scn: &Scenario, n_seq: &[usize], m_nodes: usize, xmax_mult: f64) -> Result<Extrapolation> {
    if n_seq.len() < 3 {
        return Err(VaError::config("lattice.n_seq", "need at least three step counts"));
    }
    if n_seq.windows(2).any(|w| w[1] <= w[0]) {
        return Err(VaError::config("lattice.n_seq", "step counts must be strictly increasing"));
    }
    let surfaces = n_seq
        .par_iter()
        .map(|&n| {
            let chain = build_chain(scn, n, m_nodes, xmax_mult)?;
            bermudan_value(&chain, scn, RewardKind::Discontinuous)
        })
        .collect::<Result<Vec<_>>>()?;
    let f0 = scn.contract.initial_account;
    let values: Vec<f64> = surfaces.iter().map(|s| s.value_at_start(f0)).collect();
    let deltas: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let convergence_warning = deltas.windows(2).any(|w| w[1] >= w[0]);
    let k = values.len();
    let (n1, n2) = (n_seq[k - 2] as f64, n_seq[k - 1] as f64);
    let extrapolated = (n2 * values[k - 1] - n1 * values[k - 2]) / (n2 - n1);
    Ok(Extrapolation {
        n_seq: n_seq.to_vec(),
        values,
        deltas,
        extrapolated,
        convergence_warning,
        surfaces,
    })
}
