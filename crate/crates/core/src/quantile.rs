//! Standard-normal inverse CDF, the third-order Cornish-Fisher quantile
//! expansion, and two-stage critical-value calibration (exact for small
//! designs, Cornish-Fisher for large ones).

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::cumulants::{mixed_cumulants, standardized_shape, Shape, ShapeTarget};
use crate::error::{Error, Result};
use crate::moments::{moments_general, moments_null};
use crate::oracle::{exact_joint_pmf, JointPmf};
use crate::pi::PiVector;
use crate::scalar::rational_from_f64;
use crate::ustat::SampleDesign;

/// Inverse standard-normal CDF, Wichura's PPND16 rational approximation
/// (absolute error well below 1e-8 across (0, 1)).
pub fn normal_inverse_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("inverse normal CDF needs p in (0,1), got {p}")));
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        const A: [f64; 8] = [
            3.3871328727963666080,
            133.14166789178437745,
            1971.5909503065514427,
            13731.693765509461125,
            45921.953931549871457,
            67265.770927008700853,
            33430.575583588128105,
            2509.0809287301226727,
        ];
        const B: [f64; 8] = [
            1.0,
            42.313330701600911252,
            687.18700749205790830,
            5394.1960214247511077,
            21213.794301586595867,
            39307.895800092710610,
            28729.085735721942674,
            5226.4952788528545610,
        ];
        let r = 0.180625 - q * q;
        return Ok(q * poly(&A, r) / poly(&B, r));
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let z = if r <= 5.0 {
        r -= 1.6;
        const C: [f64; 8] = [
            1.42343711074968357734,
            4.63033784615654529590,
            5.76949722146069140550,
            3.64784832476320460504,
            1.27045825245236838258,
            0.241780725177450611770,
            0.0227238449892691845833,
            0.000774545014278341407640,
        ];
        const D: [f64; 8] = [
            1.0,
            2.05319162663775882187,
            1.67638483018380384940,
            0.689767334985100004550,
            0.148103976427480074590,
            0.0151986665636164571966,
            0.000547593808499534494600,
            1.05075007164441684324e-9,
        ];
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        const E: [f64; 8] = [
            6.65790464350110377720,
            5.46378491116411436990,
            1.78482653991729133580,
            0.296560571828504891230,
            0.0265321895265761230930,
            0.00124266094738807843860,
            2.71155556874348757815e-5,
            2.01033439929228813265e-7,
        ];
        const F: [f64; 8] = [
            1.0,
            0.599832206555887937690,
            0.136929880922735805310,
            0.0148753612908506148525,
            0.000786869131145613259100,
            1.84631831751005468180e-5,
            1.42151175831644588870e-7,
            2.04426310338993978564e-15,
        ];
        poly(&E, r) / poly(&F, r)
    };
    Ok(if q < 0.0 { -z } else { z })
}

fn poly(c: &[f64; 8], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Third-order Cornish-Fisher quantile: corrects the normal quantile with
/// the skewness and excess-kurtosis terms, then rescales.
pub fn cornish_fisher_quantile(shape: &Shape, p: f64) -> Result<f64> {
    if shape.variance <= 0.0 {
        return Err(Error::Degenerate);
    }
    let z = normal_inverse_cdf(p)?;
    let g1 = shape.skewness;
    let g2 = shape.excess_kurtosis;
    let w = z + (z * z - 1.0) * g1 / 6.0 + (z * z * z - 3.0 * z) * g2 / 24.0
        - (2.0 * z * z * z - 5.0 * z) * g1 * g1 / 36.0;
    Ok(shape.mean + w * shape.variance.sqrt())
}

/// The z-interval around 0 on which the third-order expansion is monotone:
/// w'(z) is a quadratic, so the interval ends at its real roots (capped at
/// +/- 8.5, past any probability mass f64 can resolve).
fn monotone_z_range(g1: f64, g2: f64) -> (f64, f64) {
    const CAP: f64 = 8.5;
    let a = g2 / 8.0 - g1 * g1 / 6.0;
    let b = g1 / 3.0;
    let c = 1.0 - g2 / 8.0 + 5.0 * g1 * g1 / 36.0;
    let mut lo = -CAP;
    let mut hi = CAP;
    let mut clamp_root = |z: f64| {
        if z > 0.0 {
            hi = hi.min(z);
        } else if z < 0.0 {
            lo = lo.max(z);
        }
    };
    if a.abs() < 1e-14 {
        if b.abs() > 1e-14 {
            clamp_root(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let s = disc.sqrt();
            clamp_root((-b + s) / (2.0 * a));
            clamp_root((-b - s) / (2.0 * a));
        }
    }
    (lo, hi)
}

/// Standard normal CDF obtained by inverting the monotone inverse CDF.
fn normal_cdf_by_inversion(z: f64) -> f64 {
    let (mut lo, mut hi) = (1e-300, 1.0 - 1e-16);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_inverse_cdf(mid).unwrap() < z {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Upper-tail probability at x in the Cornish-Fisher model: inverts the
/// quantile by bisection on p, restricted to the monotone z-range of the
/// expansion. Beyond that range the model has no usable tail and the
/// boundary value is returned.
pub fn cornish_fisher_tail(shape: &Shape, x: f64) -> Result<f64> {
    if shape.variance <= 0.0 {
        return Err(Error::Degenerate);
    }
    let (zlo, zhi) = monotone_z_range(shape.skewness, shape.excess_kurtosis);
    let mut lo = normal_cdf_by_inversion(zlo).max(1e-15);
    let mut hi = normal_cdf_by_inversion(zhi).min(1.0 - 1e-15);
    if cornish_fisher_quantile(shape, lo)? >= x {
        return Ok(1.0 - lo);
    }
    if cornish_fisher_quantile(shape, hi)? < x {
        return Ok(1.0 - hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cornish_fisher_quantile(shape, mid)? < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(1.0 - 0.5 * (lo + hi))
}

/// How a critical-value pair was calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CalibrationMethod {
    ExactEnumeration,
    CornishFisher,
    MonteCarlo,
}

/// Integer thresholds (c1, c2) with their nominal levels. c1 = mn+1 or
/// c2 = MN+1 encode "never reject at this stage". `achieved_size` is present
/// exactly when it was computed exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalValuePair {
    pub c1: u64,
    pub c2: u64,
    pub alpha1_nominal: f64,
    pub alpha_overall_nominal: f64,
    pub achieved_size: Option<BigRational>,
    pub method: CalibrationMethod,
}

fn check_alphas(alpha1: f64, alpha_overall: f64) -> Result<()> {
    if !(alpha1 > 0.0 && alpha1 < alpha_overall && alpha_overall < 1.0) {
        return Err(Error::Domain(format!(
            "need 0 < alpha1 < alpha_overall < 1, got ({alpha1}, {alpha_overall})"
        )));
    }
    Ok(())
}

/// Exact conservative calibration from the enumerated joint pmf:
/// c1 is the smallest threshold whose stage-1 tail fits within alpha1, and
/// c2 the smallest whose stage-2 slice fits within the exact remainder.
pub fn critical_values_exact(
    design: &SampleDesign,
    alpha1: f64,
    alpha_overall: f64,
    budget: u128,
) -> Result<CriticalValuePair> {
    check_alphas(alpha1, alpha_overall)?;
    let pmf = exact_joint_pmf(design, budget)?;
    Ok(critical_values_from_pmf(&pmf, alpha1, alpha_overall))
}

pub fn critical_values_from_pmf(
    pmf: &JointPmf,
    alpha1: f64,
    alpha_overall: f64,
) -> CriticalValuePair {
    let design = &pmf.design;
    let a1 = rational_from_f64(alpha1).expect("finite alpha");
    let atot = rational_from_f64(alpha_overall).expect("finite alpha");
    let mut c1 = design.u1_max() + 1;
    for c in 1..=design.u1_max() + 1 {
        if pmf.u1_tail(c) <= a1 {
            c1 = c;
            break;
        }
    }
    let spent = pmf.u1_tail(c1);
    let slack = atot - spent.clone();
    let mut c2 = design.u2_max() + 1;
    for c in 1..=design.u2_max() + 1 {
        if pmf.continue_and_reject(c1, c) <= slack {
            c2 = c;
            break;
        }
    }
    let achieved = spent + pmf.continue_and_reject(c1, c2);
    CriticalValuePair {
        c1,
        c2,
        alpha1_nominal: alpha1,
        alpha_overall_nominal: alpha_overall,
        achieved_size: Some(achieved),
        method: CalibrationMethod::ExactEnumeration,
    }
}

/// Options for the Cornish-Fisher calibration.
#[derive(Debug, Clone, Copy)]
pub struct CfOptions {
    /// Treat the integer tail P(U >= c) as the continuous tail at c - 1/2.
    /// On by default: without it the stage-2 threshold drifts two units from
    /// the exact one already at m = n = 5 (see the decision notes).
    pub continuity_correction: bool,
}

impl Default for CfOptions {
    fn default() -> Self {
        CfOptions { continuity_correction: true }
    }
}

/// Cornish-Fisher calibration: stage 1 spends alpha1, stage 2 the remainder
/// after the model-estimated stage-1 spend. Cumulants come from the closed
/// moment forms (null by default, or the supplied comparison probabilities).
pub fn critical_values_cf(
    design: &SampleDesign,
    alpha1: f64,
    alpha_overall: f64,
    pi: Option<&PiVector<f64>>,
    opts: CfOptions,
) -> Result<CriticalValuePair> {
    check_alphas(alpha1, alpha_overall)?;
    let (shape1, shape2) = match pi {
        None => {
            let c = mixed_cumulants(&moments_null(design));
            (standardized_shape(&c, ShapeTarget::Stage1)?, standardized_shape(&c, ShapeTarget::Stage2)?)
        }
        Some(pis) => {
            let c = mixed_cumulants(&moments_general(design, pis)?);
            (standardized_shape(&c, ShapeTarget::Stage1)?, standardized_shape(&c, ShapeTarget::Stage2)?)
        }
    };
    let off = if opts.continuity_correction { 0.5 } else { 0.0 };
    let q1 = cornish_fisher_quantile(&shape1, 1.0 - alpha1)?;
    let c1 = ((q1 + off).ceil().max(1.0) as u64).min(design.u1_max() + 1);
    let spent = cornish_fisher_tail(&shape1, c1 as f64 - off)?.min(alpha1);
    let q2 = cornish_fisher_quantile(&shape2, 1.0 - (alpha_overall - spent))?;
    let c2 = ((q2 + off).ceil().max(1.0) as u64).min(design.u2_max() + 1);
    Ok(CriticalValuePair {
        c1,
        c2,
        alpha1_nominal: alpha1,
        alpha_overall_nominal: alpha_overall,
        achieved_size: None,
        method: CalibrationMethod::CornishFisher,
    })
}

/// How to evaluate the size of a given pair.
#[derive(Debug, Clone, Copy)]
pub enum SizeMethod {
    Exact { budget: u128 },
    MonteCarlo { replications: u64, seed: u64 },
}

/// P(U1 >= c1) + P(U1 < c1, U2 >= c2) under the null.
pub fn overall_size(design: &SampleDesign, pair: &CriticalValuePair, method: SizeMethod) -> Result<f64> {
    match method {
        SizeMethod::Exact { budget } => {
            Ok(overall_size_exact(design, pair, budget)?.to_f64().unwrap())
        }
        SizeMethod::MonteCarlo { replications, seed } => {
            let sampler = crate::dist::Sampler::standard_uniform();
            let chunks = crate::dist::n_chunks(replications, crate::dist::CHUNK_SIZE);
            use rayon::prelude::*;
            let hits: u64 = (0..chunks)
                .into_par_iter()
                .map(|k| {
                    let mut rng = crate::dist::chunk_rng(seed, k);
                    let mut hit = 0u64;
                    let mm = design.total_m as usize;
                    let nn = design.total_n as usize;
                    let mut xs = vec![0.0; mm];
                    let mut ys = vec![0.0; nn];
                    for _ in 0..crate::dist::chunk_len(replications, crate::dist::CHUNK_SIZE, k) {
                        for x in xs.iter_mut() {
                            *x = sampler.sample(&mut rng);
                        }
                        for y in ys.iter_mut() {
                            *y = sampler.sample(&mut rng);
                        }
                        let mut u1 = 0u64;
                        let mut u2 = 0u64;
                        for (i, x) in xs.iter().enumerate() {
                            for (j, y) in ys.iter().enumerate() {
                                if x < y {
                                    u2 += 1;
                                    if i < design.m as usize && j < design.n as usize {
                                        u1 += 1;
                                    }
                                }
                            }
                        }
                        if u1 >= pair.c1 || u2 >= pair.c2 {
                            hit += 1;
                        }
                    }
                    hit
                })
                .sum();
            Ok(hits as f64 / replications as f64)
        }
    }
}

/// Exact overall size as a rational.
pub fn overall_size_exact(
    design: &SampleDesign,
    pair: &CriticalValuePair,
    budget: u128,
) -> Result<BigRational> {
    let pmf = exact_joint_pmf(design, budget)?;
    Ok(pmf.u1_tail(pair.c1) + pmf.continue_and_reject(pair.c1, pair.c2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::DEFAULT_BUDGET;
    use num_traits::Zero;

    fn design(m: u64, n: u64, mm: u64, nn: u64) -> SampleDesign {
        SampleDesign::new(m, n, mm, nn).unwrap()
    }

    #[test]
    fn inverse_cdf_spot_values() {
        assert_eq!(normal_inverse_cdf(0.5).unwrap(), 0.0);
        assert!((normal_inverse_cdf(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((normal_inverse_cdf(0.025).unwrap() + 1.959_963_984_540_054).abs() < 1e-9);
        assert!(normal_inverse_cdf(0.0).is_err());
        assert!(normal_inverse_cdf(1.0).is_err());
    }

    #[test]
    fn inverse_cdf_antisymmetry() {
        for &p in &[1e-4, 0.01, 0.2, 0.31, 0.499] {
            let a = normal_inverse_cdf(p).unwrap();
            let b = normal_inverse_cdf(1.0 - p).unwrap();
            assert!((a + b).abs() < 1e-12, "p = {p}: {a} vs {b}");
        }
        // deep tails: 1 - p itself is only representable to ~1e-16, which
        // the steep quantile amplifies; the symmetry defect stays tiny
        for &p in &[1e-8, 1e-6] {
            let a = normal_inverse_cdf(p).unwrap();
            let b = normal_inverse_cdf(1.0 - p).unwrap();
            assert!((a + b).abs() < 5e-9, "p = {p}: {a} vs {b}");
        }
    }

    #[test]
    fn cf_normal_case_and_symmetry() {
        let shape = Shape { mean: 3.0, variance: 4.0, skewness: 0.0, excess_kurtosis: 0.0 };
        let q = cornish_fisher_quantile(&shape, 0.975).unwrap();
        assert!((q - (3.0 + 2.0 * 1.959_963_984_540_054)).abs() < 1e-9);
        // symmetric (skewness 0) distributions: q(p) + q(1-p) = 2 mean
        let shape = Shape { mean: 8.0, variance: 12.0, skewness: 0.0, excess_kurtosis: -0.4667 };
        for &p in &[0.6, 0.9, 0.95, 0.99] {
            let hi = cornish_fisher_quantile(&shape, p).unwrap();
            let lo = cornish_fisher_quantile(&shape, 1.0 - p).unwrap();
            assert!((hi + lo - 2.0 * shape.mean).abs() < 1e-12);
        }
        let bad = Shape { mean: 0.0, variance: 0.0, skewness: 0.0, excess_kurtosis: 0.0 };
        assert!(matches!(cornish_fisher_quantile(&bad, 0.5), Err(Error::Degenerate)));
    }

    #[test]
    fn cf_tail_inverts_quantile() {
        let shape = Shape { mean: 8.0, variance: 12.0, skewness: 0.0, excess_kurtosis: -0.4667 };
        for &p in &[0.9, 0.95, 0.99] {
            let x = cornish_fisher_quantile(&shape, p).unwrap();
            let tail = cornish_fisher_tail(&shape, x).unwrap();
            assert!((tail - (1.0 - p)).abs() < 1e-9, "p = {p}");
        }
    }

    #[test]
    fn cf_quantile_close_to_exact_percentile() {
        // null U1 at m = n = 4: exact 95th percentile is 14
        let d = design(4, 4, 4, 4);
        let c = mixed_cumulants(&moments_null(&d));
        let shape = standardized_shape(&c, ShapeTarget::Stage1).unwrap();
        let q = cornish_fisher_quantile(&shape, 0.95).unwrap();
        let pmf = exact_joint_pmf(&d, DEFAULT_BUDGET).unwrap();
        let marg = pmf.u1_marginal();
        let mut cum = BigRational::zero();
        let mut exact = 0u64;
        for (&u, p) in &marg {
            cum += p.clone();
            if cum >= rational_from_f64(0.95).unwrap() {
                exact = u;
                break;
            }
        }
        assert_eq!(exact, 14);
        assert!((q - exact as f64).abs() <= 1.0, "cf {q} vs exact {exact}");
    }

    #[test]
    fn exact_calibration_on_worked_example() {
        // (1,1,2,2) at alpha1 = 0.4, alpha = 0.45: stage 1 cannot spend
        // within 0.4 (P(U1 >= 1) = 1/2), so c1 = 2 encodes never-reject;
        // the u2 tail at 3 is 2/6 <= 0.45.
        let d = design(1, 1, 2, 2);
        let pair = critical_values_exact(&d, 0.4, 0.45, DEFAULT_BUDGET).unwrap();
        assert_eq!((pair.c1, pair.c2), (2, 3));
        assert_eq!(pair.achieved_size.clone().unwrap(), BigRational::new(1.into(), 3.into()));
        let size = overall_size_exact(&d, &pair, DEFAULT_BUDGET).unwrap();
        assert_eq!(size, pair.achieved_size.unwrap());
    }

    #[test]
    fn alpha_one_boundary() {
        let d = design(1, 1, 2, 2);
        let pair = critical_values_exact(&d, 0.97, 0.98, DEFAULT_BUDGET).unwrap();
        assert_eq!(pair.c1, 1);
    }

    #[test]
    fn empty_rejection_region_has_size_zero() {
        let d = design(1, 1, 2, 2);
        let pair = CriticalValuePair {
            c1: d.u1_max() + 1,
            c2: d.u2_max() + 1,
            alpha1_nominal: 0.01,
            alpha_overall_nominal: 0.02,
            achieved_size: None,
            method: CalibrationMethod::ExactEnumeration,
        };
        let size = overall_size_exact(&d, &pair, DEFAULT_BUDGET).unwrap();
        assert!(size.is_zero());
    }

    #[test]
    fn frozen_critical_values_4488() {
        let d = design(4, 4, 8, 8);
        let exact = critical_values_exact(&d, 0.025, 0.05, DEFAULT_BUDGET).unwrap();
        assert_eq!((exact.c1, exact.c2), (16, 49));
        assert_eq!(
            exact.achieved_size.unwrap(),
            BigRational::new(56821.into(), 1146600.into())
        );
        let cf = critical_values_cf(&d, 0.025, 0.05, None, CfOptions::default()).unwrap();
        assert_eq!((cf.c1, cf.c2), (16, 50));
    }

    #[test]
    fn cf_monotone_in_overall_alpha() {
        let d = design(4, 4, 8, 8);
        let mut last_c2 = u64::MAX;
        for &a in &[0.05, 0.08, 0.12, 0.2] {
            let cf = critical_values_cf(&d, 0.025, a, None, CfOptions::default()).unwrap();
            assert!(cf.c2 <= last_c2);
            last_c2 = cf.c2;
        }
    }

    #[test]
    fn degenerate_two_stage_collapses() {
        let d = design(4, 4, 4, 4);
        let cf = critical_values_cf(&d, 0.02, 0.05, None, CfOptions::default()).unwrap();
        assert!(cf.c1 <= d.u1_max() + 1);
        assert!(cf.c2 <= d.u2_max() + 1);
        // both stages see the same statistic, so c2 cannot exceed c1
        assert!(cf.c2 <= cf.c1);
    }

    #[test]
    fn monte_carlo_size_close_to_exact() {
        let d = design(2, 2, 4, 4);
        let pair = critical_values_exact(&d, 0.1, 0.2, DEFAULT_BUDGET).unwrap();
        let exact = overall_size_exact(&d, &pair, DEFAULT_BUDGET)
            .unwrap()
            .to_f64()
            .unwrap();
        let mc = overall_size(&d, &pair, SizeMethod::MonteCarlo { replications: 200_000, seed: 11 })
            .unwrap();
        let se = (exact * (1.0 - exact) / 200_000.0).sqrt();
        assert!((mc - exact).abs() <= 5.0 * se, "mc {mc} vs exact {exact}");
    }
}
