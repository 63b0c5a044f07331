//! Closed-form quantities for time-only fees and charges.
//!
//! With a deterministic fee `c(t)` the sub-account is lognormal, so the
//! maturity benefit
//!
//! ```text
//! h(t, x) = E[e^{-r(T-t)} max(G, F_T) | F_t = x]
//!         = x e^{-int_t^T c} N(d1) + G e^{-r(T-t)} N(-d2)
//! ```
//!
//! and the truncated moments `E[e^{-r(s-t)} F_s 1{F_s >= K}]` are explicit.

use libm::erfc;

use crate::error::{Result, VaError};
use crate::model::{FeeSpec, Scenario};

/// Standard normal distribution function.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn require_time_only(scn: &Scenario, what: &str) -> Result<()> {
    if scn.fee.is_time_only() {
        Ok(())
    } else {
        Err(VaError::Unsupported(format!(
            "{what} has no closed form for a state-dependent fee; use the pde or mc routes"
        )))
    }
}

/// Value at `(t, x)` of the guarantee `max(G, F_T)` paid at maturity.
pub fn maturity_benefit_value(scn: &Scenario, t: f64, x: f64) -> Result<f64> {
    require_time_only(scn, "the maturity benefit")?;
    scn.check_point(t, x)?;
    let big_t = scn.maturity();
    if scn.is_maturity(t) {
        return Ok(scn.guarantee().max(x));
    }
    let fee_int = scn.fee.integral(t, big_t, big_t)?;
    Ok(benefit_from_integral(scn, big_t - t, x, fee_int))
}

/// `h` given the remaining time `tau > 0` and `int_t^T c`.
pub(crate) fn benefit_from_integral(scn: &Scenario, tau: f64, x: f64, fee_int: f64) -> f64 {
    let (r, sigma, g) = (scn.market.r, scn.market.sigma, scn.guarantee());
    let sd = sigma * tau.sqrt();
    let d1 = ((x / g).ln() + r * tau - fee_int + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    x * (-fee_int).exp() * norm_cdf(d1) + g * (-r * tau).exp() * norm_cdf(-d2)
}

/// Value at `(t, x)` of the put `(G - F_T)_+` paid at maturity.
pub fn put_value(scn: &Scenario, t: f64, x: f64) -> Result<f64> {
    require_time_only(scn, "the guarantee put")?;
    scn.check_point(t, x)?;
    let big_t = scn.maturity();
    if scn.is_maturity(t) {
        return Ok((scn.guarantee() - x).max(0.0));
    }
    let fee_int = scn.fee.integral(t, big_t, big_t)?;
    Ok(put_from_integral(scn, big_t - t, x, fee_int))
}

pub(crate) fn put_from_integral(scn: &Scenario, tau: f64, x: f64, fee_int: f64) -> f64 {
    let (r, sigma, g) = (scn.market.r, scn.market.sigma, scn.guarantee());
    let sd = sigma * tau.sqrt();
    let d1 = ((x / g).ln() + r * tau - fee_int + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    g * (-r * tau).exp() * norm_cdf(-d2) - x * (-fee_int).exp() * norm_cdf(-d1)
}

/// Query for `E[e^{-r(s-t)} F_s 1{F_s >= k} | F_t = x]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMomentQuery {
    pub t: f64,
    pub s: f64,
    pub x: f64,
    /// Truncation level; `f64::INFINITY` gives zero.
    pub k: f64,
}

/// Discounted account expectation above a truncation level.
pub fn truncated_account_expectation(scn: &Scenario, q: &TruncatedMomentQuery) -> Result<f64> {
    require_time_only(scn, "the truncated account expectation")?;
    if q.k.is_nan() || q.k < 0.0 {
        return Err(VaError::Domain(format!("truncation level K = {} must be >= 0", q.k)));
    }
    if q.s < q.t {
        return Err(VaError::Domain(format!("need t <= s, got t = {}, s = {}", q.t, q.s)));
    }
    scn.check_point(q.t, q.x)?;
    scn.check_point(q.s, q.x)?;
    let fee_int = scn.fee.integral(q.t, q.s, scn.maturity())?;
    Ok(truncated_from_integral(
        scn.market.r,
        scn.market.sigma,
        q.s - q.t,
        q.x,
        q.k,
        fee_int,
    ))
}

/// Truncated expectation given `tau = s - t` and `int_t^s c`.
pub(crate) fn truncated_from_integral(r: f64, sigma: f64, tau: f64, x: f64, k: f64, fee_int: f64) -> f64 {
    let mass = x * (-fee_int).exp();
    if k <= 0.0 {
        return mass;
    }
    if k.is_infinite() {
        return 0.0;
    }
    if tau <= 0.0 {
        return if x >= k { x } else { 0.0 };
    }
    let sd = sigma * tau.sqrt();
    let d1 = ((x / k).ln() + r * tau - fee_int + 0.5 * sd * sd) / sd;
    mass * norm_cdf(d1)
}

/// Outcome of [`never_surrender_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct NeverSurrenderReport {
    pub holds: bool,
    /// Nodes `(t, x)` with `L(t, x) < 0`.
    pub violations: Vec<(f64, f64)>,
}

/// Checks `L(t, x) >= 0` at every node of `tgrid x xgrid`.
///
/// Values within round-off of zero (relative `1e-12` of the size of the
/// individual terms of `L`) count as zero, so `kappa = c` passes.
pub fn never_surrender_check(scn: &Scenario, tgrid: &[f64], xgrid: &[f64]) -> Result<NeverSurrenderReport> {
    if tgrid.is_empty() || xgrid.is_empty() {
        return Err(VaError::Domain("never_surrender_check needs non-empty grids".into()));
    }
    let mut violations = Vec::new();
    for &t in tgrid {
        if scn.is_maturity(t) {
            return Err(VaError::Domain(format!("L is defined on [0, T); got t = {t}")));
        }
        for &x in xgrid {
            scn.check_point(t, x)?;
            let c = scn.fee.rate_unchecked(t, x, scn.maturity());
            let (l, scale) = scn.l_with_fee(t, x, c);
            if l < -1e-12 * scale {
                violations.push((t, x));
            }
        }
    }
    Ok(NeverSurrenderReport {
        holds: violations.is_empty(),
        violations,
    })
}

/// Largest fee `c(t)` for which the cubic charge `1 - k (1 - t/T)^3`
/// leaves no incentive to surrender.
pub fn fee_bound_ex1b(maturity: f64, k: f64, t: f64) -> Result<f64> {
    if !(k > 0.0 && k < 1.0) {
        return Err(VaError::Domain(format!("cubic coefficient k = {k} must lie in (0, 1)")));
    }
    if !(maturity > 0.0) || !(0.0..=maturity).contains(&t) {
        return Err(VaError::Domain(format!("t = {t} outside [0, {maturity}]")));
    }
    Ok(FeeSpec::CubicChargeBound { k, scale: 1.0 }.rate_unchecked(t, 0.0, maturity))
}

/// Smallest exponential charge rate that removes the surrender incentive
/// under a constant fee `c`.
pub fn charge_threshold_ex1a(c: f64) -> Result<f64> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(VaError::Domain(format!("fee rate c = {c} must be >= 0")));
    }
    Ok(c)
}

/// Upper bound on `v` available when the fee is bounded below by `k > 0`.
///
/// Diagnostic only; the general bound `G + 4x` is what the property
/// checks use.
pub fn sharp_upper_bound(scn: &Scenario, k: f64, t: f64, x: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(VaError::Domain(format!("fee lower bound k = {k} must be positive")));
    }
    scn.check_point(t, x)?;
    let s2 = scn.market.sigma * scn.market.sigma;
    let a = s2 / (2.0 * k);
    let rate = (s2 + 2.0 * k).powi(2) / (2.0 * s2);
    let tau = scn.maturity() - t;
    Ok(scn.guarantee() + x * (1.0 + a - a * (-rate * tau - 1.0).exp()))
}
