//! Early-surrender and continuation premium representations.
//!
//! For threshold-shaped regions with boundary `b(s)` and time-only inputs,
//!
//! ```text
//! e(t, x) = int_t^T (c g - g_t)(s) E[e^{-r(s-t)} F_s 1{F_s >= b(s)}] ds
//! f(t, x) = put(t, x) + int_t^T (g_t - c g)(s) E[e^{-r(s-t)} F_s 1{F_s < b(s)}] ds
//! ```
//!
//! and the value function satisfies `v = h + e = g x + f`. The integrals are
//! evaluated by Simpson's rule on each cell of the boundary's time grid, with
//! `b` held at its left-node value across the cell and the fee taken at its
//! in-cell rate, so that every discontinuity of the integrand sits on a cell
//! edge.

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{benefit_from_integral, put_from_integral, truncated_from_integral};
use crate::error::{Result, VaError};
use crate::model::Scenario;
use crate::region::Boundary;
use crate::surface::ValueSurface;

/// Simpson nodes of one cell with everything that does not depend on `x`.
#[derive(Debug, Clone, Copy)]
struct QuadPoint {
    s: f64,
    /// Simpson weight times `(c g - g_t)(s)`.
    weight: f64,
    /// `int_0^s c`.
    fee_cum: f64,
    /// Boundary level in force (`INFINITY` for an empty section).
    level: f64,
}

/// Quadrature nodes over `[t, T]` for one start time.
struct Quadrature {
    t: f64,
    fee_cum_t: f64,
    points: Vec<QuadPoint>,
}

fn require_time_only(scn: &Scenario) -> Result<()> {
    if scn.is_time_only() {
        Ok(())
    } else {
        Err(VaError::Unsupported(
            "premium quadrature needs a time-only fee and charge; use mc_premium_integrals".into(),
        ))
    }
}

fn quadrature(scn: &Scenario, boundary: &Boundary, t: f64) -> Result<Quadrature> {
    require_time_only(scn)?;
    let big_t = scn.maturity();
    let slack = 1e-12 * big_t.max(1.0);
    if boundary.tnodes.is_empty() || t < boundary.tnodes[0] - slack || t > big_t + slack {
        return Err(VaError::MissingBoundary(format!(
            "boundary covers [{}, {big_t}], query at t = {t}",
            boundary.tnodes.first().copied().unwrap_or(f64::NAN)
        )));
    }
    let fee_cum = |s: f64| scn.fee.integral(0.0, s, big_t);
    let mut edges = vec![t];
    edges.extend(boundary.tnodes.iter().copied().filter(|&s| s > t + slack));
    edges.push(big_t);
    let mut points = Vec::with_capacity(3 * edges.len());
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo <= slack {
            continue;
        }
        let level = boundary.level_at(lo).unwrap_or(f64::INFINITY);
        let mid = 0.5 * (lo + hi);
        for (s, simpson) in [(lo, 1.0), (mid, 4.0), (hi, 1.0)] {
            let c = scn.fee.rate_inside(s, lo, hi, 1.0, big_t);
            let j = scn.charge.jet_unchecked(s, 1.0, big_t);
            points.push(QuadPoint {
                s,
                weight: simpson * (hi - lo) / 6.0 * (c * j.g - j.g_t),
                fee_cum: fee_cum(s)?,
                level,
            });
        }
    }
    Ok(Quadrature {
        t,
        fee_cum_t: fee_cum(t)?,
        points,
    })
}

impl Quadrature {
    /// `(e, f)` at `x`.
    fn premiums(&self, scn: &Scenario, x: f64) -> (f64, f64) {
        let (r, sigma) = (scn.market.r, scn.market.sigma);
        let big_t = scn.maturity();
        let mut e = 0.0;
        let mut cont = 0.0;
        for p in &self.points {
            let tau = p.s - self.t;
            let fee = p.fee_cum - self.fee_cum_t;
            let above = truncated_from_integral(r, sigma, tau, x, p.level, fee);
            let all = truncated_from_integral(r, sigma, tau, x, 0.0, fee);
            e += p.weight * above;
            cont -= p.weight * (all - above);
        }
        let put = if scn.is_maturity(self.t) {
            (scn.guarantee() - x).max(0.0)
        } else {
            let fee_t_end = self.points.last().map_or(0.0, |p| p.fee_cum) - self.fee_cum_t;
            put_from_integral(scn, big_t - self.t, x, fee_t_end)
        };
        (e, put + cont)
    }
}

/// Early-surrender premium `e(t, x)` for the given boundary.
pub fn surrender_premium(scn: &Scenario, boundary: &Boundary, t: f64, x: f64) -> Result<f64> {
    scn.check_point(t, x)?;
    Ok(quadrature(scn, boundary, t)?.premiums(scn, x).0)
}

/// Continuation premium `f(t, x)` for the given boundary.
pub fn continuation_premium(scn: &Scenario, boundary: &Boundary, t: f64, x: f64) -> Result<f64> {
    scn.check_point(t, x)?;
    Ok(quadrature(scn, boundary, t)?.premiums(scn, x).1)
}

/// Residuals of both representations against a solved surface.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    #[serde(skip)]
    pub tnodes: Vec<f64>,
    #[serde(skip)]
    pub xnodes: Vec<f64>,
    #[serde(skip)]
    pub v: Vec<f64>,
    #[serde(skip)]
    pub h: Vec<f64>,
    #[serde(skip)]
    pub e: Vec<f64>,
    #[serde(skip)]
    pub f: Vec<f64>,
    /// `v - h - e`.
    #[serde(skip)]
    pub res_he: Vec<f64>,
    /// `v - g x - f`.
    #[serde(skip)]
    pub res_phif: Vec<f64>,
    pub max_abs_he: f64,
    pub mean_abs_he: f64,
    pub max_abs_phif: f64,
    pub mean_abs_phif: f64,
    /// Largest `|(e - f) - (g x - h)| / h`: agreement of the two quadratures
    /// with each other, independent of any solver.
    pub identity_max_rel: f64,
    /// Smallest `e` and `f` seen (both should be non-negative).
    pub min_e: f64,
    pub min_f: f64,
    /// Interior nodes whose residuals exceed the tolerance.
    pub flagged: Vec<(usize, usize)>,
    pub tolerance: f64,
}

impl DecompositionReport {
    /// Writes `t,x,v,h,e,f,res_he,res_phif`.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "t,x,v,h,e,f,res_he,res_phif")?;
        let m = self.xnodes.len();
        for (n, t) in self.tnodes.iter().enumerate() {
            for (i, x) in self.xnodes.iter().enumerate() {
                let k = n * m + i;
                writeln!(
                    out,
                    "{t},{x},{},{},{},{},{},{}",
                    self.v[k], self.h[k], self.e[k], self.f[k], self.res_he[k], self.res_phif[k]
                )?;
            }
        }
        Ok(())
    }
}

/// Evaluates `h`, `e` and `f` at every node of the surface and compares
/// them with `v`. Interior nodes exclude maturity and the two edge states;
/// residuals above `tolerance` there are flagged.
pub fn decomposition_residuals(
    surface: &ValueSurface,
    scn: &Scenario,
    boundary: &Boundary,
    tolerance: f64,
) -> Result<DecompositionReport> {
    require_time_only(scn)?;
    let grid = &surface.grid;
    if boundary.tnodes.len() + 1 != grid.n_times() {
        return Err(VaError::GridMismatch("boundary does not match the surface's time nodes".into()));
    }
    let (nt, m) = (grid.n_times(), grid.n_states());
    let big_t = scn.maturity();
    let rows = (0..nt)
        .into_par_iter()
        .map(|n| {
            let t = grid.tnodes[n];
            let q = quadrature(scn, boundary, t)?;
            let fee_to_end = scn.fee.integral(t, big_t, big_t)?;
            let mut row = Vec::with_capacity(m);
            for (i, &x) in grid.xnodes.iter().enumerate() {
                let v = surface.value(n, i);
                let (h, e, f, psi) = if n + 1 == nt {
                    (scn.guarantee().max(x), 0.0, (scn.guarantee() - x).max(0.0), x)
                } else {
                    let (e, f) = q.premiums(scn, x);
                    let h = benefit_from_integral(scn, big_t - t, x, fee_to_end);
                    (h, e, f, scn.reward_unchecked(t, x))
                };
                row.push((v, h, e, f, psi));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let len = nt * m;
    let mut report = DecompositionReport {
        tnodes: grid.tnodes.clone(),
        xnodes: grid.xnodes.clone(),
        v: Vec::with_capacity(len),
        h: Vec::with_capacity(len),
        e: Vec::with_capacity(len),
        f: Vec::with_capacity(len),
        res_he: Vec::with_capacity(len),
        res_phif: Vec::with_capacity(len),
        max_abs_he: 0.0,
        mean_abs_he: 0.0,
        max_abs_phif: 0.0,
        mean_abs_phif: 0.0,
        identity_max_rel: 0.0,
        min_e: f64::INFINITY,
        min_f: f64::INFINITY,
        flagged: Vec::new(),
        tolerance,
    };
    let mut interior = 0usize;
    for (n, row) in rows.into_iter().enumerate() {
        for (i, (v, h, e, f, psi)) in row.into_iter().enumerate() {
            let (rh, rp) = (v - h - e, v - psi - f);
            report.v.push(v);
            report.h.push(h);
            report.e.push(e);
            report.f.push(f);
            report.res_he.push(rh);
            report.res_phif.push(rp);
            report.identity_max_rel = report.identity_max_rel.max(((e - f) - (psi - h)).abs() / h);
            report.min_e = report.min_e.min(e);
            report.min_f = report.min_f.min(f);
            if n + 1 < nt && i > 0 && i + 1 < m {
                interior += 1;
                report.max_abs_he = report.max_abs_he.max(rh.abs());
                report.max_abs_phif = report.max_abs_phif.max(rp.abs());
                report.mean_abs_he += rh.abs();
                report.mean_abs_phif += rp.abs();
                if rh.abs() > tolerance || rp.abs() > tolerance {
                    report.flagged.push((n, i));
                }
            }
        }
    }
    if interior > 0 {
        report.mean_abs_he /= interior as f64;
        report.mean_abs_phif /= interior as f64;
    }
    Ok(report)
}
