//! Value surfaces sampled on a time-state grid.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, VaError};

/// Which solver produced a surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Lattice,
    Pde,
}

/// Reward the surface was computed against.
///
/// `Discontinuous` stops on `g x` before maturity and `max(G, x)` at
/// maturity. `Continuous` stops on `max(g x, h)`, where `h` is the value of
/// holding to maturity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardKind {
    Discontinuous,
    Continuous,
}

/// `T n / N` for `n = 0..=N`, with the last node exactly `T`.
pub fn uniform_times(maturity: f64, n_steps: usize) -> Vec<f64> {
    (0..=n_steps)
        .map(|n| if n == n_steps { maturity } else { maturity * n as f64 / n_steps as f64 })
        .collect()
}

/// Time and state nodes shared by solvers, regions and reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub tnodes: Vec<f64>,
    pub xnodes: Vec<f64>,
}

impl Grid {
    /// Uniform times `T n / N` and log-uniform states on
    /// `[F0 / mult, F0 mult]`.
    pub fn log_uniform(maturity: f64, n_steps: usize, f0: f64, m_nodes: usize, xmax_mult: f64) -> Result<Self> {
        if n_steps < 1 {
            return Err(VaError::config("grid.N", "need at least one time step"));
        }
        if m_nodes < 3 {
            return Err(VaError::config("grid.M", "need at least three state nodes"));
        }
        if !(xmax_mult > 1.0 && xmax_mult.is_finite()) {
            return Err(VaError::config("grid.xmax_mult", "must be finite and > 1"));
        }
        let tnodes = uniform_times(maturity, n_steps);
        let (lo, hi) = ((f0 / xmax_mult).ln(), (f0 * xmax_mult).ln());
        let last = m_nodes - 1;
        let xnodes = (0..m_nodes)
            .map(|i| {
                if 2 * i == last {
                    f0
                } else {
                    (lo + (hi - lo) * i as f64 / last as f64).exp()
                }
            })
            .collect();
        Ok(Grid { tnodes, xnodes })
    }

    pub fn n_times(&self) -> usize {
        self.tnodes.len()
    }

    pub fn n_states(&self) -> usize {
        self.xnodes.len()
    }

    /// Time step `T / N`.
    pub fn dt(&self) -> f64 {
        self.tnodes[1] - self.tnodes[0]
    }

    /// Index of the node equal to `t` up to round-off, if any.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let big_t = *self.tnodes.last().unwrap();
        let n = ((t / big_t) * (self.tnodes.len() - 1) as f64).round();
        if n < 0.0 {
            return None;
        }
        let n = n as usize;
        (n < self.tnodes.len() && (self.tnodes[n] - t).abs() <= 1e-9 * big_t.max(1.0)).then_some(n)
    }

    /// Checks that every fee breakpoint is a time node.
    pub fn check_breakpoints(&self, breakpoints: &[f64]) -> Result<()> {
        for (k, &b) in breakpoints.iter().enumerate() {
            if self.time_index(b).is_none() {
                return Err(VaError::config(
                    "grid.N",
                    format!("fee breakpoint {k} (t = {b}) does not fall on a time node; choose N so that it does"),
                ));
            }
        }
        Ok(())
    }

    /// Index `i` with `x_i <= x < x_{i+1}`, clamped to the grid.
    pub fn bracket(&self, x: f64) -> usize {
        let m = self.xnodes.len();
        match self.xnodes.partition_point(|&xi| xi <= x) {
            0 => 0,
            p if p >= m => m - 2,
            p => p - 1,
        }
    }
}

/// `v(t_n, x_i)` on a grid, together with the obstacle it was solved
/// against and the gap `v - obstacle` as computed by the solver.
///
/// The gap is kept separately because it is far more accurate than the
/// difference of the two stored columns when both are large.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    pub grid: Grid,
    pub provenance: Provenance,
    pub reward_kind: RewardKind,
    /// Produced under assumptions the theory does not cover (state-dependent fee in the PDE).
    pub heuristic: bool,
    values: Vec<f64>,
    obstacle: Vec<f64>,
    gap: Vec<f64>,
}

impl ValueSurface {
    pub(crate) fn new(
        grid: Grid,
        provenance: Provenance,
        reward_kind: RewardKind,
        values: Vec<f64>,
        obstacle: Vec<f64>,
        gap: Vec<f64>,
    ) -> Self {
        let len = grid.n_times() * grid.n_states();
        assert_eq!(values.len(), len);
        assert_eq!(obstacle.len(), len);
        assert_eq!(gap.len(), len);
        ValueSurface {
            grid,
            provenance,
            reward_kind,
            heuristic: false,
            values,
            obstacle,
            gap,
        }
    }

    fn idx(&self, n: usize, i: usize) -> usize {
        n * self.grid.n_states() + i
    }

    pub fn value(&self, n: usize, i: usize) -> f64 {
        self.values[self.idx(n, i)]
    }

    pub fn obstacle(&self, n: usize, i: usize) -> f64 {
        self.obstacle[self.idx(n, i)]
    }

    /// `v - obstacle`, computed directly by the solver.
    pub fn gap(&self, n: usize, i: usize) -> f64 {
        self.gap[self.idx(n, i)]
    }

    pub fn slice(&self, n: usize) -> &[f64] {
        let m = self.grid.n_states();
        &self.values[n * m..(n + 1) * m]
    }

    pub fn gap_slice(&self, n: usize) -> &[f64] {
        let m = self.grid.n_states();
        &self.gap[n * m..(n + 1) * m]
    }

    /// Linear interpolation in `x` on time slice `n`.
    pub fn interpolate(&self, n: usize, x: f64) -> f64 {
        let i = self.grid.bracket(x);
        let (x0, x1) = (self.grid.xnodes[i], self.grid.xnodes[i + 1]);
        let w = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
        let (v0, v1) = (self.value(n, i), self.value(n, i + 1));
        v0 + w * (v1 - v0)
    }

    /// Value at `(0, x)`.
    pub fn value_at_start(&self, x: f64) -> f64 {
        self.interpolate(0, x)
    }

    /// Writes `t,x,value,reward,in_surrender_region`. The region column is
    /// left empty when no mask is given.
    pub fn write_csv<W: Write>(&self, out: &mut W, reward: &[f64], in_region: Option<&[bool]>) -> io::Result<()> {
        writeln!(out, "t,x,value,reward,in_surrender_region")?;
        for (n, &t) in self.grid.tnodes.iter().enumerate() {
            for (i, &x) in self.grid.xnodes.iter().enumerate() {
                let k = self.idx(n, i);
                let flag = match in_region {
                    Some(mask) => {
                        if mask[k] {
                            "1"
                        } else {
                            "0"
                        }
                    }
                    None => "",
                };
                writeln!(out, "{t},{x},{},{},{flag}", self.values[k], reward[k])?;
            }
        }
        Ok(())
    }
}
