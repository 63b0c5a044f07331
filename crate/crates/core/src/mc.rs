//! Monte Carlo paths of the account value and estimators built on them.
//!
//! Path `k` of a batch draws its normals from `ChaCha8Rng` seeded with the
//! batch seed on stream `k`, so every path can be regenerated on its own and
//! results do not depend on how paths are spread across threads. Batches
//! store no path data; estimators regenerate paths on the fly. Per-path
//! results are reduced by pairwise summation in path order.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VaError};
use crate::model::Scenario;
use crate::quad::pairwise_sum;
use crate::region::{Boundary, RegionMask};
use crate::surface::uniform_times;

/// Discretisation of the account dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Exact lognormal transition; time-only fees only.
    ExactLognormal,
    /// Euler step in log space with the fee frozen at the left node, which
    /// keeps paths positive.
    Euler,
}

/// A reproducible set of paths on `T n / nsteps`, started at `(0, F0)`.
#[derive(Debug, Clone)]
pub struct PathBatch {
    pub seed: u64,
    pub npaths: usize,
    pub nsteps: usize,
    pub scheme: Scheme,
    pub tnodes: Vec<f64>,
    scn: Scenario,
    /// Deterministic part of each log step for the exact scheme.
    log_drift: Vec<f64>,
}

/// Mean of a per-path quantity with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub std_error: f64,
    pub npaths: usize,
}

impl Estimate {
    fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = pairwise_sum(xs) / n as f64;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
        Estimate {
            estimate: mean,
            std_error: (var / n as f64).sqrt(),
            npaths: n,
        }
    }
}

/// Both premium integrals at `(0, F0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PremiumEstimates {
    pub e: Estimate,
    pub f: Estimate,
    /// Per-path `e - f`, whose mean should equal `g(0) F0 - h(0, F0)`.
    pub e_minus_f: Estimate,
}

/// Sets up a batch. Paths are generated when an estimator runs.
pub fn simulate_paths(scn: &Scenario, seed: u64, npaths: usize, nsteps: usize, scheme: Scheme) -> Result<PathBatch> {
    if npaths < 1 {
        return Err(VaError::config("mc.npaths", "need at least one path"));
    }
    if nsteps < 1 {
        return Err(VaError::config("mc.nsteps", "need at least one step"));
    }
    if scheme == Scheme::ExactLognormal && !scn.fee.is_time_only() {
        return Err(VaError::Unsupported(
            "the exact-lognormal scheme needs a time-only fee; use the euler scheme".into(),
        ));
    }
    let big_t = scn.maturity();
    let tnodes = uniform_times(big_t, nsteps);
    let (r, sigma) = (scn.market.r, scn.market.sigma);
    let log_drift = match scheme {
        Scheme::ExactLognormal => tnodes
            .windows(2)
            .map(|w| {
                let dt = w[1] - w[0];
                Ok((r - 0.5 * sigma * sigma) * dt - scn.fee.integral(w[0], w[1], big_t)?)
            })
            .collect::<Result<Vec<_>>>()?,
        Scheme::Euler => Vec::new(),
    };
    Ok(PathBatch {
        seed,
        npaths,
        nsteps,
        scheme,
        tnodes,
        scn: scn.clone(),
        log_drift,
    })
}

impl PathBatch {
    pub fn scenario(&self) -> &Scenario {
        &self.scn
    }

    /// Writes path `k` (`nsteps + 1` values, starting at `F0`) into `out`.
    pub fn fill_path(&self, k: usize, out: &mut [f64]) {
        assert_eq!(out.len(), self.nsteps + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64);
        let (r, sigma) = (self.scn.market.r, self.scn.market.sigma);
        let big_t = self.scn.maturity();
        let mut f = self.scn.contract.initial_account;
        out[0] = f;
        for n in 0..self.nsteps {
            let dt = self.tnodes[n + 1] - self.tnodes[n];
            let z: f64 = StandardNormal.sample(&mut rng);
            let drift = match self.scheme {
                Scheme::ExactLognormal => self.log_drift[n],
                Scheme::Euler => {
                    let c = self.scn.fee.rate_unchecked(self.tnodes[n], f, big_t);
                    (r - c - 0.5 * sigma * sigma) * dt
                }
            };
            f *= (drift + sigma * dt.sqrt() * z).exp();
            out[n + 1] = f;
        }
    }

    /// Path `k` as a new vector.
    pub fn path(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.nsteps + 1];
        self.fill_path(k, &mut out);
        out
    }

    /// Applies `f` to every path in parallel, keeping path order.
    fn map_paths<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[f64]) -> T + Sync,
    {
        (0..self.npaths)
            .into_par_iter()
            .map_init(
                || vec![0.0; self.nsteps + 1],
                |buf, k| {
                    self.fill_path(k, buf);
                    f(buf)
                },
            )
            .collect()
    }

    fn check_tnodes(&self, tnodes: &[f64], len: usize, what: &str) -> Result<()> {
        let tol = 1e-9 * self.scn.maturity().max(1.0);
        let ok = tnodes.len() == len
            && tnodes.iter().zip(&self.tnodes).all(|(a, b)| (a - b).abs() <= tol);
        if ok {
            Ok(())
        } else {
            Err(VaError::GridMismatch(format!("{what} is not on the batch's time nodes")))
        }
    }
}

/// `E[e^{-rT} max(G, F_T)]`.
pub fn mc_maturity_benefit(batch: &PathBatch) -> Estimate {
    let scn = batch.scenario();
    let disc = (-scn.market.r * scn.maturity()).exp();
    let g = scn.guarantee();
    let samples = batch.map_paths(|p| disc * g.max(p[batch.nsteps]));
    Estimate::from_samples(&samples)
}

/// Value of surrendering at the first node `t_n < T` with `F >= b(t_n)`
/// (nonempty sections only) and otherwise collecting `max(G, F_T)`.
pub fn mc_boundary_strategy_value(batch: &PathBatch, boundary: &Boundary) -> Result<Estimate> {
    batch.check_tnodes(&boundary.tnodes, batch.nsteps, "boundary")?;
    let scn = batch.scenario();
    let (r, big_t) = (scn.market.r, scn.maturity());
    let samples = batch.map_paths(|p| {
        for n in 0..batch.nsteps {
            if let Some(b) = boundary.levels[n] {
                if p[n] >= b {
                    let t = batch.tnodes[n];
                    return (-r * t).exp() * scn.charge.value_unchecked(t, p[n], big_t) * p[n];
                }
            }
        }
        (-r * big_t).exp() * scn.guarantee().max(p[batch.nsteps])
    });
    Ok(Estimate::from_samples(&samples))
}

/// Path estimates of the surrender and continuation premiums at `(0, F0)`
/// for an arbitrary mask, by the trapezoidal rule on each cell with the
/// mask section of the cell's left node.
pub fn mc_premium_integrals(batch: &PathBatch, mask: &RegionMask) -> Result<PremiumEstimates> {
    batch.check_tnodes(&mask.grid.tnodes, batch.nsteps + 1, "mask")?;
    let scn = batch.scenario();
    let (r, big_t, g) = (scn.market.r, scn.maturity(), scn.guarantee());
    let weight = |s: f64, lo: f64, hi: f64, x: f64| {
        let c = scn.fee.rate_inside(s, lo, hi, x, big_t);
        let j = scn.charge.jet_unchecked(s, x, big_t);
        0.5 * (hi - lo) * (c * j.g - j.g_t) * (-r * s).exp()
    };
    // For time-only inputs the weights do not depend on the path.
    let time_only = scn.is_time_only();
    let cells: Vec<(f64, f64)> = if time_only {
        batch
            .tnodes
            .windows(2)
            .map(|w| (weight(w[0], w[0], w[1], 1.0), weight(w[1], w[0], w[1], 1.0)))
            .collect()
    } else {
        Vec::new()
    };
    let pairs = batch.map_paths(|p| {
        let (mut e, mut cont) = (0.0, 0.0);
        for n in 0..batch.nsteps {
            let (lo, hi) = (batch.tnodes[n], batch.tnodes[n + 1]);
            let (wl, wr) = if time_only {
                cells[n]
            } else {
                (weight(lo, lo, hi, p[n]), weight(hi, lo, hi, p[n + 1]))
            };
            for (w, x) in [(wl, p[n]), (wr, p[n + 1])] {
                if mask.contains(n, x) {
                    e += w * x;
                } else {
                    cont -= w * x;
                }
            }
        }
        let put = (-r * big_t).exp() * (g - p[batch.nsteps]).max(0.0);
        (e, cont + put)
    });
    let e: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let f: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    Ok(PremiumEstimates {
        e: Estimate::from_samples(&e),
        f: Estimate::from_samples(&f),
        e_minus_f: Estimate::from_samples(&diff),
    })
}

/// Writes `quantity,estimate,std_error,npaths,seed`.
pub fn write_estimates_csv<W: Write>(out: &mut W, seed: u64, rows: &[(&str, Estimate)]) -> io::Result<()> {
    writeln!(out, "quantity,estimate,std_error,npaths,seed")?;
    for (name, est) in rows {
        writeln!(out, "{name},{},{},{},{seed}", est.estimate, est.std_error, est.npaths)?;
    }
    Ok(())
}
