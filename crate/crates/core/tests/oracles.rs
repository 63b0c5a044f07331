//! Closed forms and solvers checked against Monte Carlo and against each other.
//!
//! Frozen constants were computed from the closed forms with an independent
//! evaluation (erfc-based normal CDF outside this crate) and then confirmed
//! by the Monte Carlo checks below.

use vastop_core::analytic::{maturity_benefit_value, truncated_account_expectation, TruncatedMomentQuery};
use vastop_core::decompose::{continuation_premium, surrender_premium};
use vastop_core::lattice::{american_extrapolate, bermudan_value, build_chain};
use vastop_core::mc::{mc_maturity_benefit, mc_premium_integrals, simulate_paths, Estimate, Scheme};
use vastop_core::model::presets::{self, c1, c2, kappa_equals_c, negative_l};
use vastop_core::pde::{solve_variational_inequality, PdeGrid};
use vastop_core::region::{compare_regions, extract_boundary, extract_regions, Boundary, RegionMask, RegionTolerance};
use vastop_core::surface::{Grid, RewardKind};
use vastop_core::{ChargeSpec, ContractParams, FeeSpec, MarketParams, Scenario};

const SEED: u64 = 20_240_601;
const MILLION: usize = 1_000_000;

/// `h(0, 100)` with r = 0.03, sigma = 0.2, G = 100, T = 15, no fee.
const H_ZERO_FEE: f64 = 110.339_956_073;
/// `E[e^{-5r} F_5 1{F_5 >= 100}]` from `F_0 = 100` with fee 0.02.
const TRUNCATED_FEE_002: f64 = 57.126_201_121;
/// `100 exp(-int_0^15 c1)`.
const C1_ACCOUNT_MASS: f64 = 87.253_719_102;

fn scenario(sigma: f64, guarantee: f64, fee: FeeSpec, kappa: f64) -> Scenario {
    Scenario::new(
        MarketParams { r: 0.03, sigma },
        ContractParams {
            guarantee,
            maturity: 15.0,
            initial_account: 100.0,
        },
        fee,
        ChargeSpec::Exponential { kappa },
    )
    .unwrap()
}

fn within_3se(est: &Estimate, target: f64) -> bool {
    (est.estimate - target).abs() <= 3.0 * est.std_error
}

/// Mean and standard error of `f` over the final account values of a batch.
fn terminal_mean(scn: &Scenario, nsteps: usize, node: usize, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let batch = simulate_paths(scn, SEED, MILLION, nsteps, Scheme::ExactLognormal).unwrap();
    let xs: Vec<f64> = (0..MILLION).map(|k| f(batch.path(k)[node])).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn zero_fee_benefit_matches_monte_carlo() {
    let scn = scenario(0.2, 100.0, FeeSpec::constant(0.0), 0.0);
    let h = maturity_benefit_value(&scn, 0.0, 100.0).unwrap();
    assert!((h - H_ZERO_FEE).abs() < 1e-8, "{h}");
    let mc = mc_maturity_benefit(&simulate_paths(&scn, SEED, MILLION, 1, Scheme::ExactLognormal).unwrap());
    assert!(within_3se(&mc, H_ZERO_FEE), "{mc:?}");
}

#[test]
fn truncated_expectation_matches_monte_carlo() {
    let scn = scenario(0.2, 100.0, FeeSpec::constant(0.02), 0.0);
    let q = TruncatedMomentQuery {
        t: 0.0,
        s: 5.0,
        x: 100.0,
        k: 100.0,
    };
    let v = truncated_account_expectation(&scn, &q).unwrap();
    assert!((v - TRUNCATED_FEE_002).abs() < 1e-8, "{v}");
    let disc = (-0.03f64 * 5.0).exp();
    let (mean, se) = terminal_mean(&scn, 3, 1, |x| if x >= 100.0 { disc * x } else { 0.0 });
    assert!((mean - TRUNCATED_FEE_002).abs() <= 3.0 * se, "{mean} +- {se}");
}

#[test]
fn discounted_account_loses_exactly_the_fee() {
    let disc = (-0.03f64 * 15.0).exp();
    let zero = scenario(0.2, 100.0, FeeSpec::constant(0.0), 0.0);
    let (mean, se) = terminal_mean(&zero, 1, 1, |x| disc * x);
    assert!((mean - 100.0).abs() <= 3.0 * se, "{mean} +- {se}");
    let (mean, se) = terminal_mean(&c1(), 3, 3, |x| disc * x);
    assert!((mean - C1_ACCOUNT_MASS).abs() <= 3.0 * se, "{mean} +- {se}");
}

#[test]
fn negligible_guarantee_leaves_the_account() {
    let scn = scenario(0.2, 1e-9, presets::fee_c1(), presets::KAPPA);
    let mc = mc_maturity_benefit(&simulate_paths(&scn, SEED, MILLION, 3, Scheme::ExactLognormal).unwrap());
    assert!(within_3se(&mc, C1_ACCOUNT_MASS), "{mc:?}");
}

#[test]
fn low_volatility_is_nearly_deterministic() {
    let scn = scenario(0.01, 100.0, presets::fee_c1(), presets::KAPPA);
    let target = (100.0 * (-0.03f64 * 15.0).exp()).max(C1_ACCOUNT_MASS);
    let mc = mc_maturity_benefit(&simulate_paths(&scn, SEED, MILLION, 3, Scheme::ExactLognormal).unwrap());
    assert!(within_3se(&mc, target), "{mc:?}");
    let h = maturity_benefit_value(&scn, 0.0, 100.0).unwrap();
    assert!((h - target).abs() < 1e-9 * target, "{h}");
}

#[test]
fn benefit_estimate_matches_closed_form_on_c1() {
    let scn = c1();
    let h = maturity_benefit_value(&scn, 0.0, 100.0).unwrap();
    let mc = mc_maturity_benefit(&simulate_paths(&scn, SEED, MILLION, 3, Scheme::ExactLognormal).unwrap());
    assert!(within_3se(&mc, h), "{mc:?} vs {h}");
}

#[test]
fn standard_errors_scale_with_the_square_root_of_paths() {
    let scn = c1();
    let se: Vec<f64> = [10_000, 100_000, MILLION]
        .iter()
        .map(|&n| mc_maturity_benefit(&simulate_paths(&scn, SEED, n, 3, Scheme::ExactLognormal).unwrap()).std_error)
        .collect();
    for w in se.windows(2) {
        let ratio = w[0] / w[1] / 10f64.sqrt();
        assert!((ratio - 1.0).abs() < 0.2, "{se:?}");
    }
}

#[test]
fn euler_and_exact_schemes_agree() {
    let scn = c2();
    let exact = mc_maturity_benefit(&simulate_paths(&scn, SEED, 200_000, 360, Scheme::ExactLognormal).unwrap());
    let euler = mc_maturity_benefit(&simulate_paths(&scn, SEED + 1, 200_000, 360, Scheme::Euler).unwrap());
    let combined = exact.std_error.hypot(euler.std_error);
    assert!((exact.estimate - euler.estimate).abs() <= 3.0 * combined, "{exact:?} {euler:?}");
}

fn pde_mask(scn: &Scenario) -> RegionMask {
    let grid = PdeGrid::new(scn, 360, 401, 8.0).unwrap();
    extract_regions(&solve_variational_inequality(scn, &grid).unwrap(), RegionTolerance::default())
}

#[test]
fn premium_estimates_match_quadrature_on_a_threshold_region() {
    let scn = c2();
    let mask = pde_mask(&scn);
    let boundary = extract_boundary(&mask);
    assert!(boundary.violations.is_empty());
    let e = surrender_premium(&scn, &boundary, 0.0, 100.0).unwrap();
    let f = continuation_premium(&scn, &boundary, 0.0, 100.0).unwrap();
    let batch = simulate_paths(&scn, SEED, 400_000, 360, Scheme::ExactLognormal).unwrap();
    let est = mc_premium_integrals(&batch, &mask).unwrap();
    // The estimator uses the trapezoidal rule on the same cells, so allow
    // a quadrature tolerance of 1e-3 G on top of the sampling error.
    let quad_tol = 0.1;
    assert!((est.e.estimate - e).abs() <= 3.0 * est.e.std_error + quad_tol, "{:?} vs {e}", est.e);
    assert!((est.f.estimate - f).abs() <= 3.0 * est.f.std_error + quad_tol, "{:?} vs {f}", est.f);
}

#[test]
fn full_and_empty_masks() {
    let scn = c1();
    let grid = Grid::log_uniform(15.0, 360, 100.0, 401, 8.0).unwrap();
    let (nt, m) = (grid.n_times(), grid.n_states());
    let batch = simulate_paths(&scn, SEED, 200_000, 360, Scheme::ExactLognormal).unwrap();
    let h = maturity_benefit_value(&scn, 0.0, 100.0).unwrap();
    let psi = scn.reward(0.0, 100.0).unwrap();

    let full = RegionMask::from_rows(grid.clone(), RewardKind::Discontinuous, &vec![vec![true; m]; nt]).unwrap();
    let est = mc_premium_integrals(&batch, &full).unwrap();
    assert!(within_3se(&est.e_minus_f, psi - h), "{:?} vs {}", est.e_minus_f, psi - h);

    let empty = RegionMask::from_rows(grid.clone(), RewardKind::Discontinuous, &vec![vec![false; m]; nt]).unwrap();
    let est = mc_premium_integrals(&batch, &empty).unwrap();
    assert_eq!(est.e.estimate, 0.0);
    let f = continuation_premium(&scn, &Boundary::empty(grid.tnodes[..nt - 1].to_vec()), 0.0, 100.0).unwrap();
    assert!((est.f.estimate - f).abs() <= 3.0 * est.f.std_error + 0.1, "{:?} vs {f}", est.f);
    // Without early surrender the continuation premium is the whole gap h - psi.
    assert!((f - (h - psi)).abs() < 1e-8 * h);
}

#[test]
fn reward_representations_on_a_negative_l_scenario() {
    // Both rewards give the same region except at the last exercise date,
    // where continuation equals holding and the continuous-reward region is
    // the whole section wherever v = h > psi.
    let scn = negative_l();
    let chain = build_chain(&scn, 360, 401, 8.0).unwrap();
    let a = extract_regions(&bermudan_value(&chain, &scn, RewardKind::Discontinuous).unwrap(), RegionTolerance::default());
    let b = extract_regions(&bermudan_value(&chain, &scn, RewardKind::Continuous).unwrap(), RegionTolerance::default());
    let cmp = compare_regions(&a, &b).unwrap();
    let last = a.grid.n_times() - 2;
    assert!(cmp.sym_diff.iter().all(|&(n, _)| n == last), "{:?}", &cmp.sym_diff[..cmp.sym_diff.len().min(5)]);
}

#[test]
fn no_incentive_regions_differ_between_representations() {
    let scn = kappa_equals_c(0.01);
    let chain = build_chain(&scn, 180, 401, 8.0).unwrap();
    let a = extract_regions(&bermudan_value(&chain, &scn, RewardKind::Discontinuous).unwrap(), RegionTolerance::default());
    let b = extract_regions(&bermudan_value(&chain, &scn, RewardKind::Continuous).unwrap(), RegionTolerance::default());
    assert!(a.is_empty());
    let nt = b.grid.n_times();
    let m = b.grid.n_states();
    assert_eq!(b.count(), (nt - 1) * m);
    assert!(!compare_regions(&a, &b).unwrap().equal);
}

#[test]
fn pure_account_is_worth_the_account() {
    let scn = scenario(0.2, 1e-9, FeeSpec::constant(0.0), 0.0);
    let ex = american_extrapolate(&scn, &[90, 180, 360], 401, 8.0).unwrap();
    assert!((ex.extrapolated - 100.0).abs() < 0.1, "{}", ex.extrapolated);
}

#[test]
fn boundaries_respect_the_guarantee_bound() {
    for scn in [c1(), c2(), negative_l()] {
        let mask = pde_mask(&scn);
        let boundary = extract_boundary(&mask);
        let dz = (mask.grid.xnodes[1] / mask.grid.xnodes[0]).ln();
        for (t, b) in boundary.tnodes.iter().zip(&boundary.levels) {
            if let Some(b) = b {
                // One log step below the bound, measured at the level.
                let bound = 100.0 * (-0.03 * (15.0 - t)).exp();
                assert!(*b >= bound * (-dz).exp(), "t {t}: b {b} < {bound}");
            }
        }
    }
}
