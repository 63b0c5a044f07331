//! Contract, market, fee and surrender-charge definitions.
//!
//! Every other module consumes the pointwise evaluators defined here:
//! the fee rate `C(t, x)`, the surrender factor `g(t, x)` with its partial
//! derivatives, the reward
//!
//! ```text
//! phi(t, x) = g(t, x) x      for t < T
//!           = max(G, x)      for t = T
//! ```
//!
//! and the surrender-incentive drift
//!
//! ```text
//! L(t, x) = g_t + (r - C + sigma^2) x g_x + (sigma^2 x^2 / 2) g_xx - C g
//! ```
//!
//! whose sign decides whether surrendering can ever beat holding. Time is
//! measured in years and every rate is per year.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Result, VaError};

/// Relative slack used when deciding whether a time lies inside `[0, T]`
/// or on a fee breakpoint.
pub(crate) const TIME_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    /// Risk-free rate.
    pub r: f64,
    /// Volatility of the underlying fund.
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractParams {
    /// Guaranteed amount paid at maturity.
    #[serde(rename = "G")]
    pub guarantee: f64,
    /// Maturity in years.
    #[serde(rename = "T")]
    pub maturity: f64,
    /// Initial sub-account value.
    #[serde(rename = "F0")]
    pub initial_account: f64,
}

/// Coarse classification of a fee specification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeeKind {
    Constant,
    PiecewiseConstant,
    SmoothTime,
    StateDependent,
}

/// Fee rate `C(t, x)` levied continuously on the sub-account.
///
/// Piecewise-constant fees use intervals closed on the right:
/// `rates[0]` applies on `[0, b_0]`, `rates[k]` on `(b_{k-1}, b_k]` and the
/// last rate on `(b_last, T]`, so at a breakpoint the rate of the interval
/// that ends there applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FeeSpec {
    Constant {
        rate: f64,
    },
    Piecewise {
        breakpoints: Vec<f64>,
        rates: Vec<f64>,
    },
    /// `c(t) = sum_k coefficients[k] t^k`.
    Polynomial {
        coefficients: Vec<f64>,
    },
    /// `scale` times the largest fee that keeps the cubic charge
    /// `g(t) = 1 - k (1 - t/T)^3` free of surrender incentive.
    CubicChargeBound {
        k: f64,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
    /// Smooth switch between `rate_below` (account well below `threshold`)
    /// and `rate_above` (well above), over a transition of width `width`.
    LogisticState {
        rate_below: f64,
        rate_above: f64,
        threshold: f64,
        width: f64,
    },
}

fn unit_scale() -> f64 {
    1.0
}

impl FeeSpec {
    pub fn constant(rate: f64) -> Self {
        FeeSpec::Constant { rate }
    }

    pub fn piecewise(breakpoints: Vec<f64>, rates: Vec<f64>) -> Self {
        FeeSpec::Piecewise { breakpoints, rates }
    }

    pub fn kind(&self) -> FeeKind {
        match self {
            FeeSpec::Constant { .. } => FeeKind::Constant,
            FeeSpec::Piecewise { .. } => FeeKind::PiecewiseConstant,
            FeeSpec::Polynomial { .. } | FeeSpec::CubicChargeBound { .. } => FeeKind::SmoothTime,
            FeeSpec::LogisticState { .. } => FeeKind::StateDependent,
        }
    }

    pub fn is_time_only(&self) -> bool {
        self.kind() != FeeKind::StateDependent
    }

    /// Times at which the rate jumps.
    pub fn breakpoints(&self) -> &[f64] {
        match self {
            FeeSpec::Piecewise { breakpoints, .. } => breakpoints,
            _ => &[],
        }
    }

    /// Rate at `(t, x)` without domain checks.
    pub(crate) fn rate_unchecked(&self, t: f64, x: f64, maturity: f64) -> f64 {
        match self {
            FeeSpec::Constant { rate } => *rate,
            FeeSpec::Piecewise { breakpoints, rates } => {
                let slack = TIME_EPS * maturity.max(1.0);
                let k = breakpoints
                    .iter()
                    .position(|&b| t <= b + slack)
                    .unwrap_or(breakpoints.len());
                rates[k]
            }
            FeeSpec::Polynomial { coefficients } => horner(coefficients, t),
            FeeSpec::CubicChargeBound { k, scale } => {
                let u = 1.0 - t / maturity;
                scale * (3.0 * k / maturity) * u * u / (1.0 - k * u * u * u)
            }
            FeeSpec::LogisticState {
                rate_below,
                rate_above,
                threshold,
                width,
            } => {
                let s = logistic((x - threshold) / width);
                rate_below + (rate_above - rate_below) * s
            }
        }
    }

    /// Rate that applies on the open interval `(lo, hi)`. For piecewise fees
    /// with aligned breakpoints this is the constant rate inside the cell.
    pub(crate) fn rate_inside(&self, s: f64, lo: f64, hi: f64, x: f64, maturity: f64) -> f64 {
        match self {
            FeeSpec::Piecewise { .. } => self.rate_unchecked(0.5 * (lo + hi), x, maturity),
            _ => self.rate_unchecked(s, x, maturity),
        }
    }

    /// `int_t^s c(u) du` for time-only fees.
    ///
    /// Constant and piecewise fees are integrated exactly; smooth fees by
    /// adaptive Simpson with absolute tolerance `1e-12`.
    pub fn integral(&self, t: f64, s: f64, maturity: f64) -> Result<f64> {
        if s < t {
            return Ok(-self.integral(s, t, maturity)?);
        }
        match self {
            FeeSpec::Constant { rate } => Ok(rate * (s - t)),
            FeeSpec::Piecewise { breakpoints, rates } => {
                let mut total = 0.0;
                let mut lo = t;
                for (k, &b) in breakpoints.iter().enumerate() {
                    if b <= lo {
                        continue;
                    }
                    let hi = b.min(s);
                    total += rates[k] * (hi - lo);
                    lo = hi;
                    if lo >= s {
                        break;
                    }
                }
                if lo < s {
                    total += rates[breakpoints.len()] * (s - lo);
                }
                Ok(total)
            }
            FeeSpec::Polynomial { .. } | FeeSpec::CubicChargeBound { .. } => Ok(
                crate::quad::adaptive_simpson(|u| self.rate_unchecked(u, 1.0, maturity), t, s, 1e-12),
            ),
            FeeSpec::LogisticState { .. } => Err(VaError::Unsupported(
                "fee integral requires a time-only fee".into(),
            )),
        }
    }

    /// Lipschitz constant in `x` of the drift `(r - C(t, x)) x`, when the fee
    /// depends on the state.
    pub fn drift_lipschitz_bound(&self, r: f64) -> f64 {
        match self {
            FeeSpec::LogisticState {
                rate_below,
                rate_above,
                threshold,
                width,
            } => {
                let rmax = rate_below.abs().max(rate_above.abs());
                // sup_x x |C'(x)| <= |jump| (threshold + 2 width) / (4 width) for logistic C.
                let slope = (rate_above - rate_below).abs() * (threshold.abs() + 2.0 * width) / (4.0 * width);
                r.abs() + rmax + slope
            }
            _ => {
                let cmax = self.max_rate_hint();
                r.abs() + cmax
            }
        }
    }

    fn max_rate_hint(&self) -> f64 {
        match self {
            FeeSpec::Constant { rate } => rate.abs(),
            FeeSpec::Piecewise { rates, .. } => rates.iter().fold(0.0_f64, |m, r| m.max(r.abs())),
            _ => 1.0,
        }
    }

    fn validate(&self, maturity: f64, field: &str) -> Result<()> {
        let in_unit = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        match self {
            FeeSpec::Constant { rate } => {
                if !in_unit(*rate) {
                    return Err(VaError::config(format!("{field}.rate"), "fee rate must lie in [0, 1]"));
                }
            }
            FeeSpec::Piecewise { breakpoints, rates } => {
                if rates.len() != breakpoints.len() + 1 {
                    return Err(VaError::config(
                        format!("{field}.rates"),
                        "expected one more rate than breakpoints",
                    ));
                }
                if let Some(bad) = rates.iter().position(|&r| !in_unit(r)) {
                    return Err(VaError::config(format!("{field}.rates[{bad}]"), "fee rate must lie in [0, 1]"));
                }
                let mut prev = 0.0;
                for (i, &b) in breakpoints.iter().enumerate() {
                    if !(b.is_finite() && b > prev && b < maturity) {
                        return Err(VaError::config(
                            format!("{field}.breakpoints[{i}]"),
                            "breakpoints must be strictly increasing inside (0, T)",
                        ));
                    }
                    prev = b;
                }
            }
            FeeSpec::Polynomial { coefficients } => {
                if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(VaError::config(format!("{field}.coefficients"), "need finite coefficients"));
                }
                for i in 0..=1000 {
                    let t = maturity * i as f64 / 1000.0;
                    if !in_unit(horner(coefficients, t)) {
                        return Err(VaError::config(
                            format!("{field}.coefficients"),
                            format!("fee leaves [0, 1] at t = {t}"),
                        ));
                    }
                }
            }
            FeeSpec::CubicChargeBound { k, scale } => {
                if !(*k > 0.0 && *k < 1.0) {
                    return Err(VaError::config(format!("{field}.k"), "k must lie in (0, 1)"));
                }
                let peak = scale * 3.0 * k / (maturity * (1.0 - k));
                if !(*scale >= 0.0 && peak <= 1.0) {
                    return Err(VaError::config(format!("{field}.scale"), "fee leaves [0, 1]"));
                }
            }
            FeeSpec::LogisticState {
                rate_below,
                rate_above,
                threshold,
                width,
            } => {
                if !in_unit(*rate_below) {
                    return Err(VaError::config(format!("{field}.rate_below"), "fee rate must lie in [0, 1]"));
                }
                if !in_unit(*rate_above) {
                    return Err(VaError::config(format!("{field}.rate_above"), "fee rate must lie in [0, 1]"));
                }
                if !(*threshold > 0.0 && threshold.is_finite()) {
                    return Err(VaError::config(format!("{field}.threshold"), "threshold must be positive"));
                }
                if !(*width > 0.0 && width.is_finite()) {
                    return Err(VaError::config(format!("{field}.width"), "width must be positive"));
                }
            }
        }
        Ok(())
    }
}

fn horner(coefficients: &[f64], t: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// A user-supplied surrender factor depending on time only.
#[derive(Clone)]
pub struct TimeFn(pub Arc<dyn Fn(f64) -> f64 + Send + Sync>);

/// A user-supplied surrender factor depending on time and account value.
#[derive(Clone)]
pub struct StateFn(pub Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>);

impl fmt::Debug for TimeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TimeFn(..)")
    }
}

impl fmt::Debug for StateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("StateFn(..)")
    }
}

/// Surrender factor `g(t, x)`: the fraction of the account paid on surrender.
///
/// Exponential and cubic kinds carry analytic derivatives. The general kinds
/// wrap closures and are differentiated by central differences with time
/// step `max(1e-6, 1e-6 |t|)`; their derivatives are only as accurate as
/// that allows, and they cannot be written to JSON.
#[derive(Debug, Clone)]
pub enum ChargeSpec {
    /// `g(t) = exp(-kappa (T - t))`.
    Exponential { kappa: f64 },
    /// `g(t) = 1 - k (1 - t/T)^3`.
    Cubic { k: f64 },
    GeneralTime(TimeFn),
    GeneralState(StateFn),
}

impl PartialEq for ChargeSpec {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ChargeSpec::Exponential { kappa: a }, ChargeSpec::Exponential { kappa: b }) => a == b,
            (ChargeSpec::Cubic { k: a }, ChargeSpec::Cubic { k: b }) => a == b,
            (ChargeSpec::GeneralTime(a), ChargeSpec::GeneralTime(b)) => Arc::ptr_eq(&a.0, &b.0),
            (ChargeSpec::GeneralState(a), ChargeSpec::GeneralState(b)) => Arc::ptr_eq(&a.0, &b.0),
            _ => false,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum ChargeRepr {
    Exponential { kappa: f64 },
    Cubic { k: f64 },
}

impl Serialize for ChargeSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ChargeSpec::Exponential { kappa } => ChargeRepr::Exponential { kappa: *kappa }.serialize(serializer),
            ChargeSpec::Cubic { k } => ChargeRepr::Cubic { k: *k }.serialize(serializer),
            _ => Err(serde::ser::Error::custom("general charge kinds cannot be serialized")),
        }
    }
}

impl<'de> Deserialize<'de> for ChargeSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        Ok(match ChargeRepr::deserialize(deserializer)? {
            ChargeRepr::Exponential { kappa } => ChargeSpec::Exponential { kappa },
            ChargeRepr::Cubic { k } => ChargeSpec::Cubic { k },
        })
    }
}

/// Value and partial derivatives of `g` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeJet {
    pub g: f64,
    pub g_t: f64,
    pub g_x: f64,
    pub g_xx: f64,
}

impl ChargeSpec {
    pub fn general_time(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ChargeSpec::GeneralTime(TimeFn(Arc::new(f)))
    }

    pub fn general_state(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        ChargeSpec::GeneralState(StateFn(Arc::new(f)))
    }

    pub fn is_time_only(&self) -> bool {
        !matches!(self, ChargeSpec::GeneralState(_))
    }

    pub(crate) fn value_unchecked(&self, t: f64, x: f64, maturity: f64) -> f64 {
        match self {
            ChargeSpec::Exponential { kappa } => (-kappa * (maturity - t)).exp(),
            ChargeSpec::Cubic { k } => {
                let u = 1.0 - t / maturity;
                1.0 - k * u * u * u
            }
            ChargeSpec::GeneralTime(f) => (f.0)(t),
            ChargeSpec::GeneralState(f) => (f.0)(t, x),
        }
    }

    pub(crate) fn jet_unchecked(&self, t: f64, x: f64, maturity: f64) -> ChargeJet {
        match self {
            ChargeSpec::Exponential { kappa } => {
                let g = (-kappa * (maturity - t)).exp();
                ChargeJet {
                    g,
                    g_t: kappa * g,
                    g_x: 0.0,
                    g_xx: 0.0,
                }
            }
            ChargeSpec::Cubic { k } => {
                let u = 1.0 - t / maturity;
                ChargeJet {
                    g: 1.0 - k * u * u * u,
                    g_t: 3.0 * k * u * u / maturity,
                    g_x: 0.0,
                    g_xx: 0.0,
                }
            }
            ChargeSpec::GeneralTime(f) => ChargeJet {
                g: (f.0)(t),
                g_t: time_derivative(|s| (f.0)(s), t, maturity),
                g_x: 0.0,
                g_xx: 0.0,
            },
            ChargeSpec::GeneralState(f) => {
                let g = (f.0)(t, x);
                let hx = (1e-6 * x).max(1e-6);
                // Second differences need a wider step to stay above round-off.
                let hxx = (1e-4 * x).max(1e-4).min(0.5 * x);
                ChargeJet {
                    g,
                    g_t: time_derivative(|s| (f.0)(s, x), t, maturity),
                    g_x: ((f.0)(t, x + hx) - (f.0)(t, x - hx)) / (2.0 * hx),
                    g_xx: ((f.0)(t, x + hxx) - 2.0 * g + (f.0)(t, x - hxx)) / (hxx * hxx),
                }
            }
        }
    }

    /// `ln g(t1) - ln g(t0)` for time-only charges, in a form that is exact
    /// for the exponential kind.
    pub(crate) fn log_growth(&self, t0: f64, t1: f64, maturity: f64) -> f64 {
        match self {
            ChargeSpec::Exponential { kappa } => kappa * (t1 - t0),
            _ => {
                let g0 = self.value_unchecked(t0, 1.0, maturity);
                let g1 = self.value_unchecked(t1, 1.0, maturity);
                ((g1 - g0) / g0).ln_1p()
            }
        }
    }

    fn validate(&self, maturity: f64, field: &str) -> Result<()> {
        match self {
            ChargeSpec::Exponential { kappa } => {
                if !(kappa.is_finite() && *kappa >= 0.0) {
                    return Err(VaError::config(format!("{field}.kappa"), "kappa must be non-negative"));
                }
            }
            ChargeSpec::Cubic { k } => {
                if !(k.is_finite() && *k >= 0.0 && *k < 1.0) {
                    return Err(VaError::config(format!("{field}.k"), "k must lie in [0, 1)"));
                }
            }
            ChargeSpec::GeneralTime(_) | ChargeSpec::GeneralState(_) => {
                let xs = [1e-2, 1.0, 100.0, 1e4];
                for &x in &xs {
                    let end = self.value_unchecked(maturity, x, maturity);
                    if (end - 1.0).abs() > 1e-12 {
                        return Err(VaError::config(field, "g(T, x) must equal 1"));
                    }
                    let mut prev = 0.0;
                    for i in 0..=200 {
                        let t = maturity * i as f64 / 200.0;
                        let g = self.value_unchecked(t, x, maturity);
                        if !(g > 0.0 && g <= 1.0 + 1e-12) {
                            return Err(VaError::config(field, format!("g leaves (0, 1] at t = {t}, x = {x}")));
                        }
                        if g < prev - 1e-12 {
                            return Err(VaError::config(field, "g must be non-decreasing in t"));
                        }
                        prev = g;
                    }
                }
            }
        }
        Ok(())
    }
}

fn time_derivative(f: impl Fn(f64) -> f64, t: f64, maturity: f64) -> f64 {
    let h = (1e-6 * t.abs()).max(1e-6);
    if t - h < 0.0 {
        (f(t + h) - f(t)) / h
    } else if t + h > maturity {
        (f(t) - f(t - h)) / h
    } else {
        (f(t + h) - f(t - h)) / (2.0 * h)
    }
}

/// Market, contract, fee and charge bundled together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub market: MarketParams,
    pub contract: ContractParams,
    pub fee: FeeSpec,
    pub charge: ChargeSpec,
}

impl Scenario {
    pub fn new(market: MarketParams, contract: ContractParams, fee: FeeSpec, charge: ChargeSpec) -> Result<Self> {
        let scn = Scenario {
            market,
            contract,
            fee,
            charge,
        };
        scn.validate()?;
        Ok(scn)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.market;
        if !(m.sigma.is_finite() && m.sigma > 0.0) {
            return Err(VaError::config("market.sigma", "sigma must be positive"));
        }
        if !m.r.is_finite() {
            return Err(VaError::config("market.r", "r must be finite"));
        }
        let c = &self.contract;
        if !(c.guarantee.is_finite() && c.guarantee > 0.0) {
            return Err(VaError::config("contract.G", "G must be positive"));
        }
        if !(c.maturity.is_finite() && c.maturity > 0.0) {
            return Err(VaError::config("contract.T", "T must be positive"));
        }
        if !(c.initial_account.is_finite() && c.initial_account > 0.0) {
            return Err(VaError::config("contract.F0", "F0 must be positive"));
        }
        self.fee.validate(c.maturity, "fee")?;
        self.charge.validate(c.maturity, "charge")?;
        Ok(())
    }

    pub fn maturity(&self) -> f64 {
        self.contract.maturity
    }

    pub fn guarantee(&self) -> f64 {
        self.contract.guarantee
    }

    /// Both the fee and the surrender factor depend on time only.
    pub fn is_time_only(&self) -> bool {
        self.fee.is_time_only() && self.charge.is_time_only()
    }

    pub(crate) fn check_point(&self, t: f64, x: f64) -> Result<()> {
        let big_t = self.maturity();
        let slack = TIME_EPS * big_t.max(1.0);
        if !(t >= -slack && t <= big_t + slack) {
            return Err(VaError::Domain(format!("t = {t} outside [0, {big_t}]")));
        }
        if !(x > 0.0 && x.is_finite()) {
            return Err(VaError::Domain(format!("x = {x} must be positive and finite")));
        }
        Ok(())
    }

    pub fn fee_rate(&self, t: f64, x: f64) -> Result<f64> {
        self.check_point(t, x)?;
        Ok(self.fee.rate_unchecked(t, x, self.maturity()))
    }

    pub fn charge_factor(&self, t: f64, x: f64) -> Result<f64> {
        self.check_point(t, x)?;
        Ok(self.charge.value_unchecked(t, x, self.maturity()))
    }

    pub fn charge_jet(&self, t: f64, x: f64) -> Result<ChargeJet> {
        self.check_point(t, x)?;
        Ok(self.charge.jet_unchecked(t, x, self.maturity()))
    }

    /// Amount received on stopping at `(t, x)`.
    pub fn reward(&self, t: f64, x: f64) -> Result<f64> {
        self.check_point(t, x)?;
        Ok(self.reward_unchecked(t, x))
    }

    pub(crate) fn reward_unchecked(&self, t: f64, x: f64) -> f64 {
        if self.is_maturity(t) {
            self.guarantee().max(x)
        } else {
            self.charge.value_unchecked(t, x, self.maturity()) * x
        }
    }

    pub(crate) fn is_maturity(&self, t: f64) -> bool {
        t >= self.maturity() * (1.0 - TIME_EPS)
    }

    /// Surrender-incentive drift `L(t, x)`.
    pub fn l_value(&self, t: f64, x: f64) -> Result<f64> {
        if self.is_maturity(t) {
            return Err(VaError::Domain(format!("L is defined on [0, T); got t = {t}")));
        }
        self.check_point(t, x)?;
        let c = self.fee.rate_unchecked(t, x, self.maturity());
        Ok(self.l_with_fee(t, x, c).0)
    }

    /// `L(t, x)` with the fee rate fixed to `c`, together with the sum of
    /// absolute values of its terms (the scale of its round-off error).
    pub(crate) fn l_with_fee(&self, t: f64, x: f64, c: f64) -> (f64, f64) {
        let j = self.charge.jet_unchecked(t, x, self.maturity());
        let s2 = self.market.sigma * self.market.sigma;
        let a = j.g_t;
        let b = (self.market.r - c + s2) * x * j.g_x;
        let d = 0.5 * s2 * x * x * j.g_xx;
        let e = c * j.g;
        (a + b + d - e, a.abs() + b.abs() + d.abs() + e.abs())
    }
}

/// Free-function forms of the evaluators, checked against the scenario's
/// domain `[0, T] x (0, inf)`.
pub fn fee_rate(scn: &Scenario, t: f64, x: f64) -> Result<f64> {
    scn.fee_rate(t, x)
}

pub fn charge_factor(scn: &Scenario, t: f64, x: f64) -> Result<f64> {
    scn.charge_factor(t, x)
}

pub fn reward(scn: &Scenario, t: f64, x: f64) -> Result<f64> {
    scn.reward(t, x)
}

pub fn l_value(scn: &Scenario, t: f64, x: f64) -> Result<f64> {
    scn.l_value(t, x)
}

/// Preset scenarios used throughout the tests, the CLI and the README.
pub mod presets {
    use super::*;

    pub const FEE_HIGH: f64 = 0.010908;
    pub const FEE_LOW: f64 = 0.005454;
    pub const KAPPA: f64 = 0.0055;

    pub fn market() -> MarketParams {
        MarketParams { r: 0.03, sigma: 0.2 }
    }

    pub fn contract() -> ContractParams {
        ContractParams {
            guarantee: 100.0,
            maturity: 15.0,
            initial_account: 100.0,
        }
    }

    /// High fee, low fee between years 5 and 10, high fee again.
    pub fn fee_c1() -> FeeSpec {
        FeeSpec::piecewise(vec![5.0, 10.0], vec![FEE_HIGH, FEE_LOW, FEE_HIGH])
    }

    /// High fee up to year 10, low fee afterwards.
    pub fn fee_c2() -> FeeSpec {
        FeeSpec::piecewise(vec![10.0], vec![FEE_HIGH, FEE_LOW])
    }

    pub fn c1() -> Scenario {
        Scenario::new(market(), contract(), fee_c1(), ChargeSpec::Exponential { kappa: KAPPA }).unwrap()
    }

    pub fn c2() -> Scenario {
        Scenario::new(market(), contract(), fee_c2(), ChargeSpec::Exponential { kappa: KAPPA }).unwrap()
    }

    /// Exponential charge rate equal to a constant fee: no surrender incentive.
    pub fn kappa_equals_c(c: f64) -> Scenario {
        Scenario::new(market(), contract(), FeeSpec::constant(c), ChargeSpec::Exponential { kappa: c }).unwrap()
    }

    /// Constant fee above the charge rate: surrender incentive at every date.
    pub fn negative_l() -> Scenario {
        Scenario::new(market(), contract(), FeeSpec::constant(0.02), ChargeSpec::Exponential { kappa: KAPPA })
            .unwrap()
    }
}
