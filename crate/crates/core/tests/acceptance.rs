//! Acceptance suite: every criterion runs at its stated tolerance and prints
//! one pass/fail line (run with `-- --nocapture` to see the lines as they
//! complete; a failing criterion fails its test either way).

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use twostage_mw_core::moments::formulas::{u_fourth_with_terms, UTerm, U_FOURTH_TERMS};
use twostage_mw_core::moments::{moments_null, moment_key};
use twostage_mw_core::oracle::{
    check_null_moment, design_grid, exact_joint_pmf, pmf_cumulants, pmf_moments,
    validate_formulas, ValidationMode, Verdict, DEFAULT_BUDGET,
};
use twostage_mw_core::pi::null_pi_vector;
use twostage_mw_core::quantile::{
    critical_values_cf, critical_values_exact, normal_inverse_cdf, CfOptions,
};
use twostage_mw_core::{mixed_cumulants, Sampler, SampleDesign};

fn report(criterion: &str, ok: bool, detail: &str) {
    println!("criterion {criterion}: {} - {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

#[test]
fn criterion_1_null_exactness() {
    let grid = design_grid(10);
    let rep = validate_formulas(&grid, ValidationMode::NullExact, 0.0, DEFAULT_BUDGET).unwrap();
    let exact = rep.checks.iter().filter(|c| c.verdict == Verdict::Exact).count();
    report(
        "1 (null exactness, M+N <= 10)",
        rep.all_ok() && exact == grid.len() * 14,
        &format!("{} designs x 14 moments, {} exact, {} mismatches", grid.len(), exact, rep.mismatches()),
    );
}

#[test]
fn criterion_2_general_reduction() {
    let grid = design_grid(10);
    let rep =
        validate_formulas(&grid, ValidationMode::GeneralReduction, 0.0, DEFAULT_BUDGET).unwrap();
    report(
        "2 (general formulas reduce exactly at the null vector)",
        rep.all_ok(),
        &format!("{} checks, {} mismatches", rep.checks.len(), rep.mismatches()),
    );
}

#[test]
fn criterion_3_general_statistical_agreement() {
    let design = SampleDesign::new(3, 3, 6, 6).unwrap();
    let mode = ValidationMode::GeneralMonteCarlo {
        sampler_x: Sampler::Uniform { lo: 0.0, hi: 1.0 },
        sampler_y: Sampler::Uniform { lo: 0.3, hi: 1.3 },
        pi_replications: 10_000_000,
        joint_replications: 1_000_000,
        seed: 20_240_817,
    };
    let rep = validate_formulas(&[design], mode, 5.0, DEFAULT_BUDGET).unwrap();
    let worst = rep
        .checks
        .iter()
        .map(|c| format!("{}: dev {:.4}", c.formula, c.abs_deviation))
        .last()
        .unwrap_or_default();
    report(
        "3 (uniform-shift alternative at (3,3,6,6), 5 combined SE)",
        rep.all_ok(),
        &format!("{} moments checked, {} outside tolerance; last: {worst}", rep.checks.len(), rep.mismatches()),
    );
}

#[test]
fn criterion_4_cumulant_double_path() {
    let grid = design_grid(10);
    let mut bad = 0usize;
    for d in &grid {
        let pmf = exact_joint_pmf(d, DEFAULT_BUDGET).unwrap();
        let closed = mixed_cumulants(&pmf_moments(&pmf));
        let recursive = pmf_cumulants(&pmf);
        for ((r, s), v) in closed.iter() {
            if *v != *recursive.get(r, s) {
                bad += 1;
            }
        }
    }
    report(
        "4 (closed-form vs recursive cumulants agree exactly, M+N <= 10)",
        bad == 0,
        &format!("{} designs x 14 cumulants, {bad} disagreements", grid.len()),
    );
}

#[test]
fn criterion_5_classical_identities() {
    let grid = design_grid(10);
    let mut failures = Vec::new();
    for d in &grid {
        let mom = moments_null(d);
        let kappa = mixed_cumulants(&mom);
        // classical stage-1 variance
        let var_expect = rational((d.m * d.n * (d.m + d.n + 1)) as i64, 12);
        if *kappa.get(2, 0) != var_expect {
            failures.push(format!("variance at {d:?}"));
        }
        // projection identity E(U1 U2) = (mn/MN) E(U2^2)
        let proj = rational((d.m * d.n) as i64, 1) / rational((d.total_m * d.total_n) as i64, 1)
            * mom.get(0, 2).clone();
        if *mom.get(1, 1) != proj {
            failures.push(format!("projection at {d:?}"));
        }
        // central symmetry: third central moment of U1 vanishes
        if !kappa.get(3, 0).is_zero() {
            failures.push(format!("central skew at {d:?}"));
        }
        // E(U1^3 U2) equals E(U1^3 E(U2|U1)) with the affine conditional mean
        let pmf = exact_joint_pmf(d, DEFAULT_BUDGET).unwrap();
        let (slope, intercept) =
            twostage_mw_core::moments::formulas::null_cond_mean_coeffs(d);
        let mut via_cond = BigRational::zero();
        for (u1, p) in pmf.u1_marginal() {
            let u1r = BigRational::from_integer(u1.into());
            let cond = pmf.cond_mean_u2(u1).unwrap();
            if cond != slope.clone() * u1r.clone() + intercept.clone() {
                failures.push(format!("affine conditional mean at {d:?}, u1 = {u1}"));
            }
            via_cond += p * u1r.clone() * u1r.clone() * u1r.clone()
                * (slope.clone() * BigRational::from_integer(u1.into()) + intercept.clone());
        }
        if via_cond != *mom.get(3, 1) {
            failures.push(format!("conditional identity for E(U1^3 U2) at {d:?}"));
        }
    }
    report(
        "5 (classical null identities, exact on the grid)",
        failures.is_empty(),
        &format!("{} designs; failures: {:?}", grid.len(), failures),
    );
}

#[test]
fn criterion_6_critical_value_agreement() {
    let d = SampleDesign::new(4, 4, 8, 8).unwrap();
    let exact = critical_values_exact(&d, 0.025, 0.05, DEFAULT_BUDGET).unwrap();
    let cf = critical_values_cf(&d, 0.025, 0.05, None, CfOptions::default()).unwrap();
    let d1 = exact.c1.abs_diff(cf.c1);
    let d2 = exact.c2.abs_diff(cf.c2);
    let size = exact.achieved_size.clone().unwrap();
    let size_ok = size <= rational(1, 20);
    report(
        "6 (critical values at (4,4,8,8), alpha1 = 0.025, alpha = 0.05)",
        d1 <= 1 && d2 <= 1 && size_ok,
        &format!(
            "exact (c1,c2) = ({},{}), cf = ({},{}), achieved size = {} ~ {:.6}",
            exact.c1,
            exact.c2,
            cf.c1,
            cf.c2,
            size,
            size.to_f64().unwrap()
        ),
    );
}

#[test]
fn criterion_7_inverse_normal_cdf() {
    // independent oracle: bisection against an erf-based normal CDF
    fn phi(z: f64) -> f64 {
        0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
    }
    fn oracle(p: f64) -> f64 {
        let (mut lo, mut hi) = (-9.0f64, 9.0f64);
        for _ in 0..120 {
            let mid = 0.5 * (lo + hi);
            if phi(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
    let mut worst = 0.0f64;
    let n = 1000;
    for i in 0..n {
        let p = 1e-6 + (1.0 - 2e-6) * i as f64 / (n - 1) as f64;
        let err = (normal_inverse_cdf(p).unwrap() - oracle(p)).abs();
        worst = worst.max(err);
    }
    report(
        "7 (inverse normal CDF vs bisection oracle, 1000 points)",
        worst <= 1e-8,
        &format!("max abs error {worst:.3e}"),
    );
}

#[test]
fn criterion_8_mutation_sensitivity() {
    let grid = design_grid(8);
    let mut undetected = Vec::new();
    for (idx, term) in U_FOURTH_TERMS.iter().enumerate() {
        for delta in [1i64, -1] {
            let mut mutated: Vec<UTerm> = U_FOURTH_TERMS.to_vec();
            mutated[idx] = UTerm { coeff: term.coeff + delta, ..*term };
            let checks = check_null_moment(
                |d| u_fourth_with_terms(&mutated, d.m, d.n, &null_pi_vector()),
                (4, 0),
                &grid,
                DEFAULT_BUDGET,
            )
            .unwrap();
            if !checks.iter().any(|c| c.verdict == Verdict::Mismatch) {
                undetected.push(format!("term {idx} ({}{delta:+})", moment_key(4, 0)));
            }
        }
    }
    report(
        "8 (every single-coefficient corruption of the fourth-moment table is caught)",
        undetected.is_empty(),
        &format!(
            "{} mutations checked on {} designs; undetected: {:?}",
            U_FOURTH_TERMS.len() * 2,
            grid.len(),
            undetected
        ),
    );
}
