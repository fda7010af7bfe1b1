//! Ground truth: the exact joint null distribution of (U1, U2), independent
//! moment/cumulant computation from it, seeded simulation for alternatives,
//! and the mechanical formula validator.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::cumulants::CumulantSet;
use crate::dist::{chunk_len, chunk_rng, n_chunks, Sampler, CHUNK_SIZE};
use crate::error::{Error, Result};
use crate::moments::{moment_key, moments_general, moments_null, MomentMode, MomentSet, MOMENT_ORDERS};
use crate::pi::{null_pi_vector, pi_monte_carlo, Pi};
use crate::ustat::SampleDesign;

/// Default cap on C(M+N, M), the number of distinct control/treated value
/// arrangements the enumeration walks (implicitly, through the path DP).
pub const DEFAULT_BUDGET: u128 = 20_000_000;

fn binomial_u128(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for i in 0..k {
        num *= BigUint::from(n - i);
        den *= BigUint::from(i + 1);
    }
    (num / den).to_u128().unwrap_or(u128::MAX)
}

/// Exact joint pmf of (U1, U2) under the null, stored as integer path counts
/// over a common denominator (the multinomial number of labeled sequences).
#[derive(Debug, Clone)]
pub struct JointPmf {
    pub design: SampleDesign,
    counts: BTreeMap<(u64, u64), u128>,
    denom: BigUint,
}

impl JointPmf {
    pub fn denominator(&self) -> &BigUint {
        &self.denom
    }

    pub fn counts(&self) -> &BTreeMap<(u64, u64), u128> {
        &self.counts
    }

    pub fn probability(&self, u1: u64, u2: u64) -> BigRational {
        let c = self.counts.get(&(u1, u2)).copied().unwrap_or(0);
        BigRational::new(BigInt::from(c), BigInt::from(self.denom.clone()))
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u64, u64), BigRational)> + '_ {
        self.counts.iter().map(move |(&k, &c)| {
            (k, BigRational::new(BigInt::from(c), BigInt::from(self.denom.clone())))
        })
    }

    pub fn total_mass(&self) -> BigRational {
        let sum: BigUint = self.counts.values().fold(BigUint::zero(), |a, &c| a + BigUint::from(c));
        BigRational::new(BigInt::from(sum), BigInt::from(self.denom.clone()))
    }

    pub fn u1_marginal(&self) -> BTreeMap<u64, BigRational> {
        let mut out: BTreeMap<u64, BigUint> = BTreeMap::new();
        for (&(u1, _), &c) in &self.counts {
            *out.entry(u1).or_default() += BigUint::from(c);
        }
        out.into_iter()
            .map(|(k, c)| (k, BigRational::new(BigInt::from(c), BigInt::from(self.denom.clone()))))
            .collect()
    }

    pub fn u2_marginal(&self) -> BTreeMap<u64, BigRational> {
        let mut out: BTreeMap<u64, BigUint> = BTreeMap::new();
        for (&(_, u2), &c) in &self.counts {
            *out.entry(u2).or_default() += BigUint::from(c);
        }
        out.into_iter()
            .map(|(k, c)| (k, BigRational::new(BigInt::from(c), BigInt::from(self.denom.clone()))))
            .collect()
    }

    /// P(U1 >= c), exact.
    pub fn u1_tail(&self, c: u64) -> BigRational {
        let sum = self
            .counts
            .iter()
            .filter(|(&(u1, _), _)| u1 >= c)
            .fold(BigUint::zero(), |a, (_, &v)| a + BigUint::from(v));
        BigRational::new(BigInt::from(sum), BigInt::from(self.denom.clone()))
    }

    /// P(U1 < c1, U2 >= c2), exact: the stage-2 rejection slice.
    pub fn continue_and_reject(&self, c1: u64, c2: u64) -> BigRational {
        let sum = self
            .counts
            .iter()
            .filter(|(&(u1, u2), _)| u1 < c1 && u2 >= c2)
            .fold(BigUint::zero(), |a, (_, &v)| a + BigUint::from(v));
        BigRational::new(BigInt::from(sum), BigInt::from(self.denom.clone()))
    }

    /// Conditional mean E(U2 | U1 = u1), exact; None off the support.
    pub fn cond_mean_u2(&self, u1: u64) -> Option<BigRational> {
        let mut mass = BigUint::zero();
        let mut acc = BigUint::zero();
        for (&(a, b), &c) in &self.counts {
            if a == u1 {
                mass += BigUint::from(c);
                acc += BigUint::from(c) * BigUint::from(b);
            }
        }
        if mass.is_zero() {
            None
        } else {
            Some(BigRational::new(BigInt::from(acc), BigInt::from(mass)))
        }
    }
}

/// Enumerates the exact joint null law of (U1, U2).
///
/// Model: all M+N observations are exchangeable, so every interleaving of
/// the four label groups (stage-1 control, stage-2 control, stage-1 treated,
/// stage-2 treated) is equally likely. The enumeration walks positions in
/// value order with a path-counting DP over group usage; each y placement
/// adds the controls seen so far to U2, and the stage-1 controls seen so far
/// to U1 when the y is stage-1. Path counts are exact integers over the
/// multinomial denominator.
pub fn exact_joint_pmf(design: &SampleDesign, budget: u128) -> Result<JointPmf> {
    let &SampleDesign { m, n, total_m: mm, total_n: nn } = design;
    let arrangements = binomial_u128(mm + nn, mm);
    if arrangements > budget {
        return Err(Error::BudgetExceeded { required: arrangements, budget });
    }
    let u1_max = (m * n) as usize;
    let u2_max = (mm * nn) as usize;
    // state: [xs_used][x1_used][y1_used] -> joint table over (u1, u2)
    let table_len = (u1_max + 1) * (u2_max + 1);
    let idx = |x: usize, a: usize, c: usize| -> usize {
        (x * (m as usize + 1) + a) * (n as usize + 1) + c
    };
    let nstates = (mm as usize + 1) * (m as usize + 1) * (n as usize + 1);
    let mut dp: Vec<Vec<u128>> = vec![Vec::new(); nstates];
    dp[idx(0, 0, 0)] = vec![0; table_len];
    dp[idx(0, 0, 0)][0] = 1;

    for step in 0..(mm + nn) as usize {
        let mut next: Vec<Vec<u128>> = vec![Vec::new(); nstates];
        for xs in 0..=(mm as usize).min(step) {
            let ys = step - xs;
            if ys > nn as usize {
                continue;
            }
            for a in 0..=(m as usize).min(xs) {
                if xs - a > (mm - m) as usize {
                    continue;
                }
                for c in 0..=(n as usize).min(ys) {
                    if ys - c > (nn - n) as usize {
                        continue;
                    }
                    let cur = std::mem::take(&mut dp[idx(xs, a, c)]);
                    if cur.is_empty() {
                        continue;
                    }
                    let mut push = |state: usize, du1: usize, du2: usize| {
                        let tgt = &mut next[state];
                        if tgt.is_empty() {
                            *tgt = vec![0; table_len];
                        }
                        let width = u2_max + 1;
                        for u1 in 0..=(u1_max - du1) {
                            let src = &cur[u1 * width..u1 * width + (u2_max + 1 - du2)];
                            let dst_off = (u1 + du1) * width + du2;
                            let dst = &mut tgt[dst_off..dst_off + src.len()];
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d += *s;
                            }
                        }
                    };
                    // place a stage-1 control
                    if a < m as usize {
                        push(idx(xs + 1, a + 1, c), 0, 0);
                    }
                    // place a stage-2 control
                    if xs - a < (mm - m) as usize {
                        push(idx(xs + 1, a, c), 0, 0);
                    }
                    // place a stage-1 treated: U1 += stage-1 controls seen,
                    // U2 += all controls seen
                    if c < n as usize {
                        push(idx(xs, a, c + 1), a, xs);
                    }
                    // place a stage-2 treated: U2 += all controls seen
                    if ys - c < (nn - n) as usize {
                        push(idx(xs, a, c), 0, xs);
                    }
                }
            }
        }
        dp = next;
    }

    let table = std::mem::take(&mut dp[idx(mm as usize, m as usize, n as usize)]);
    let mut counts = BTreeMap::new();
    let width = u2_max + 1;
    for u1 in 0..=u1_max {
        for u2 in 0..=u2_max {
            let c = table[u1 * width + u2];
            if c != 0 {
                counts.insert((u1 as u64, u2 as u64), c);
            }
        }
    }
    // denominator: multinomial(M+N; m, M-m, n, N-n)
    let fact = |k: u64| -> BigUint {
        (1..=k).map(BigUint::from).fold(BigUint::one(), |a, b| a * b)
    };
    let denom = fact(mm + nn) / (fact(m) * fact(mm - m) * fact(n) * fact(nn - n));

    let pmf = JointPmf { design: *design, counts, denom };
    debug_assert!(pmf.total_mass().is_one());
    Ok(pmf)
}

/// Exact raw moments E(U1^a U2^b) for all 1 <= a+b <= 4 directly from the pmf.
pub fn pmf_moments(pmf: &JointPmf) -> MomentSet<BigRational> {
    let mut sums: [BigUint; 14] =
        std::array::from_fn(|_| BigUint::zero());
    for (&(u1, u2), &c) in pmf.counts() {
        for (slot, &(a, b)) in MOMENT_ORDERS.iter().enumerate() {
            let term = BigUint::from(u1).pow(a as u32) * BigUint::from(u2).pow(b as u32);
            sums[slot] += term * BigUint::from(c);
        }
    }
    let denom = BigInt::from(pmf.denominator().clone());
    MomentSet::from_fn(MomentMode::NullExact, |a, b| {
        let slot = crate::moments::moment_slot(a, b);
        BigRational::new(BigInt::from(sums[slot].clone()), denom.clone())
    })
}

/// Exact mixed cumulants straight from the pmf, via the classical recursive
/// multivariate moment-to-cumulant identities. This path never touches the
/// closed-form cumulant expressions, so agreement with `mixed_cumulants`
/// certifies both.
pub fn pmf_cumulants(pmf: &JointPmf) -> CumulantSet<BigRational> {
    let mom = pmf_moments(pmf);
    cumulants_by_recursion(&mom)
}

/// The recursion: mu_{r,s} = sum C(r-1, j) C(s, k) kappa_{j+1, k} mu_{r-1-j, s-k}
/// (and its mirror through the second argument when r = 0).
pub fn cumulants_by_recursion(mom: &MomentSet<BigRational>) -> CumulantSet<BigRational> {
    let mu = |a: i32, b: i32| -> BigRational {
        if a == 0 && b == 0 {
            BigRational::one()
        } else {
            mom.get(a as u8, b as u8).clone()
        }
    };
    let c = |n: i32, k: i32| -> BigRational {
        let mut out = BigRational::one();
        for i in 0..k {
            out *= BigRational::from_integer((n - i).into())
                / BigRational::from_integer((i + 1).into());
        }
        out
    };
    let mut kappa: BTreeMap<(i32, i32), BigRational> = BTreeMap::new();
    for total in 1..=4i32 {
        for r in (0..=total).rev() {
            let s = total - r;
            let value = if r >= 1 {
                let mut rest = BigRational::zero();
                for j in 0..=(r - 1) {
                    for k in 0..=s {
                        if (j, k) == (r - 1, s) {
                            continue;
                        }
                        rest += c(r - 1, j)
                            * c(s, k)
                            * kappa[&(j + 1, k)].clone()
                            * mu(r - 1 - j, s - k);
                    }
                }
                mu(r, s) - rest
            } else {
                let mut rest = BigRational::zero();
                for k in 0..=(s - 1) {
                    if k == s - 1 {
                        continue;
                    }
                    rest += c(s - 1, k) * kappa[&(0, k + 1)].clone() * mu(0, s - 1 - k);
                }
                mu(0, s) - rest
            };
            kappa.insert((r, s), value);
        }
    }
    CumulantSet::from_fn(|r, s| kappa[&(r as i32, s as i32)].clone())
}

/// Sample raw moments with standard errors from seeded replications.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimates {
    pub values: MomentSet<f64>,
    pub standard_errors: MomentSet<f64>,
    pub replications: u64,
    pub seed: u64,
}

/// Draws M controls and N treated per replicate (the first m and n being
/// stage 1), computes (u1, u2) by direct counting, and returns sample raw
/// moments. Integer tallies make the reduction order-independent, so the
/// result is bit-identical for any worker count.
pub fn simulate_joint(
    design: &SampleDesign,
    sampler_x: Sampler,
    sampler_y: Sampler,
    replications: u64,
    seed: u64,
) -> Result<MomentEstimates> {
    if replications == 0 {
        return Err(Error::Domain("replications must be >= 1".into()));
    }
    sampler_x.validate()?;
    sampler_y.validate()?;
    let &SampleDesign { m, n, total_m: mm, total_n: nn } = design;
    let chunks = n_chunks(replications, CHUNK_SIZE);
    let (sums, sqsums) = (0..chunks)
        .into_par_iter()
        .map(|k| -> Result<([u128; 14], [u128; 14])> {
            let mut rng = chunk_rng(seed, k);
            let dist_x = sampler_x.compile();
            let dist_y = sampler_y.compile();
            let mut sums = [0u128; 14];
            let mut sq = [0u128; 14];
            let mut xs = vec![0.0f64; mm as usize];
            let mut ys = vec![0.0f64; nn as usize];
            for _ in 0..chunk_len(replications, CHUNK_SIZE, k) {
                for x in xs.iter_mut() {
                    *x = dist_x.sample(&mut rng);
                }
                for y in ys.iter_mut() {
                    *y = dist_y.sample(&mut rng);
                }
                let mut u1 = 0u64;
                let mut u2 = 0u64;
                for (i, x) in xs.iter().enumerate() {
                    for (j, y) in ys.iter().enumerate() {
                        if x == y {
                            return Err(Error::Tie);
                        }
                        if x < y {
                            u2 += 1;
                            if i < m as usize && j < n as usize {
                                u1 += 1;
                            }
                        }
                    }
                }
                for (slot, &(a, b)) in MOMENT_ORDERS.iter().enumerate() {
                    let v = (u1 as u128).pow(a as u32) * (u2 as u128).pow(b as u32);
                    sums[slot] += v;
                    sq[slot] += v * v;
                }
            }
            Ok((sums, sq))
        })
        .try_reduce(
            || ([0u128; 14], [0u128; 14]),
            |a, b| {
                let mut s = [0u128; 14];
                let mut q = [0u128; 14];
                for i in 0..14 {
                    s[i] = a.0[i] + b.0[i];
                    q[i] = a.1[i] + b.1[i];
                }
                Ok((s, q))
            },
        )?;
    let r = replications as f64;
    let values = MomentSet::from_fn(MomentMode::General, |a, b| {
        sums[crate::moments::moment_slot(a, b)] as f64 / r
    });
    let standard_errors = MomentSet::from_fn(MomentMode::General, |a, b| {
        let slot = crate::moments::moment_slot(a, b);
        let mean = sums[slot] as f64 / r;
        if replications < 2 {
            return f64::NAN;
        }
        let var = (sqsums[slot] as f64 - r * mean * mean) / (r - 1.0);
        (var.max(0.0) / r).sqrt()
    });
    Ok(MomentEstimates { values, standard_errors, replications, seed })
}

/// Verdict of one formula check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Verdict {
    Exact,
    WithinTolerance,
    Mismatch,
}

/// One compared formula instance.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FormulaCheck {
    pub formula: String,
    pub design: SampleDesign,
    pub engine_value: String,
    pub oracle_value: String,
    pub abs_deviation: f64,
    pub verdict: Verdict,
}

/// Full validation run output.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ValidationReport {
    pub mode: String,
    pub tolerance: f64,
    pub checks: Vec<FormulaCheck>,
}

impl ValidationReport {
    pub fn mismatches(&self) -> usize {
        self.checks.iter().filter(|c| c.verdict == Verdict::Mismatch).count()
    }

    pub fn all_ok(&self) -> bool {
        self.mismatches() == 0
    }
}

/// How to compare engine formulas against the oracle.
#[derive(Debug, Clone)]
pub enum ValidationMode {
    /// moments_null vs enumerated moments: rational equality required.
    NullExact,
    /// moments_general at the exact null vector vs enumerated moments.
    GeneralReduction,
    /// moments_general at Monte Carlo pi-estimates vs simulated moments,
    /// within `tolerance` combined standard errors.
    GeneralMonteCarlo {
        sampler_x: Sampler,
        sampler_y: Sampler,
        pi_replications: u64,
        joint_replications: u64,
        seed: u64,
    },
}

/// Runs the chosen validation over the given designs.
pub fn validate_formulas(
    designs: &[SampleDesign],
    mode: ValidationMode,
    tolerance: f64,
    budget: u128,
) -> Result<ValidationReport> {
    match mode {
        ValidationMode::NullExact => {
            exact_mode_report("null-exact", designs, budget, |d| Ok(moments_null(d)))
        }
        ValidationMode::GeneralReduction => {
            let pis = null_pi_vector();
            exact_mode_report("general-reduction", designs, budget, move |d| {
                moments_general(d, &pis)
            })
        }
        ValidationMode::GeneralMonteCarlo {
            sampler_x,
            sampler_y,
            pi_replications,
            joint_replications,
            seed,
        } => {
            let mut checks = Vec::new();
            let est = pi_monte_carlo(sampler_x, sampler_y, pi_replications, seed)?;
            for d in designs {
                let sim = simulate_joint(d, sampler_x, sampler_y, joint_replications, seed ^ 0xA5A5)?;
                let engine = moments_general(d, &est.value)?;
                for (a, b) in MOMENT_ORDERS {
                    let e = *engine.get(a, b);
                    let o = *sim.values.get(a, b);
                    let se_prop = propagated_se(d, &est, a, b)?;
                    let se_sim = *sim.standard_errors.get(a, b);
                    let combined = (se_prop * se_prop + se_sim * se_sim).sqrt();
                    let dev = (e - o).abs();
                    let verdict = if dev == 0.0 {
                        Verdict::Exact
                    } else if dev <= tolerance * combined {
                        Verdict::WithinTolerance
                    } else {
                        Verdict::Mismatch
                    };
                    checks.push(FormulaCheck {
                        formula: moment_key(a, b),
                        design: *d,
                        engine_value: format!("{e:.6}"),
                        oracle_value: format!("{o:.6} (se {combined:.6})"),
                        abs_deviation: dev,
                        verdict,
                    });
                }
            }
            Ok(ValidationReport { mode: "general-monte-carlo".into(), tolerance, checks })
        }
    }
}

/// Delta-method standard error of a moment formula at independent
/// pi-estimates (central differences; independence holds because the
/// Monte Carlo draws each pattern's variates separately).
fn propagated_se(d: &SampleDesign, est: &crate::pi::PiEstimate, a: u8, b: u8) -> Result<f64> {
    let mut var = 0.0f64;
    for p in Pi::ALL {
        let se = est.standard_error[p];
        if se == 0.0 {
            continue;
        }
        let center = est.value[p];
        let h = (se * 0.5).min(center * 0.5).min((1.0 - center) * 0.5);
        if h <= 0.0 {
            continue;
        }
        let mut up = est.value.clone();
        up[p] = center + h;
        let mut dn = est.value.clone();
        dn[p] = center - h;
        let fu = *moments_general(d, &up)?.get(a, b);
        let fd = *moments_general(d, &dn)?.get(a, b);
        let der = (fu - fd) / (2.0 * h);
        var += der * der * se * se;
    }
    Ok(var.sqrt())
}

fn exact_mode_report(
    label: &str,
    designs: &[SampleDesign],
    budget: u128,
    engine: impl Fn(&SampleDesign) -> Result<MomentSet<BigRational>>,
) -> Result<ValidationReport> {
    let mut checks = Vec::new();
    for d in designs {
        let pmf = exact_joint_pmf(d, budget)?;
        let oracle = pmf_moments(&pmf);
        let eng = engine(d)?;
        for (a, b) in MOMENT_ORDERS {
            let e = eng.get(a, b);
            let o = oracle.get(a, b);
            let verdict = if e == o { Verdict::Exact } else { Verdict::Mismatch };
            let dev = (e.to_f64().unwrap_or(f64::NAN) - o.to_f64().unwrap_or(f64::NAN)).abs();
            checks.push(FormulaCheck {
                formula: moment_key(a, b),
                design: *d,
                engine_value: e.to_string(),
                oracle_value: o.to_string(),
                abs_deviation: dev,
                verdict,
            });
        }
    }
    Ok(ValidationReport { mode: label.into(), tolerance: 0.0, checks })
}

/// Compare an arbitrary null-moment evaluator against the enumerated moment
/// of the given order over a design grid; used by the coefficient-mutation
/// sensitivity tests.
pub fn check_null_moment(
    engine: impl Fn(&SampleDesign) -> BigRational,
    order: (u8, u8),
    designs: &[SampleDesign],
    budget: u128,
) -> Result<Vec<FormulaCheck>> {
    let mut checks = Vec::new();
    for d in designs {
        let pmf = exact_joint_pmf(d, budget)?;
        let oracle = pmf_moments(&pmf);
        let o = oracle.get(order.0, order.1);
        let e = engine(d);
        let verdict = if e == *o { Verdict::Exact } else { Verdict::Mismatch };
        let dev = (e.to_f64().unwrap_or(f64::NAN) - o.to_f64().unwrap_or(f64::NAN)).abs();
        checks.push(FormulaCheck {
            formula: moment_key(order.0, order.1),
            design: *d,
            engine_value: e.to_string(),
            oracle_value: o.to_string(),
            abs_deviation: dev,
            verdict,
        });
    }
    Ok(checks)
}

/// Every design with 1 <= m <= M, 1 <= n <= N and M + N <= max_total.
pub fn design_grid(max_total: u64) -> Vec<SampleDesign> {
    let mut out = Vec::new();
    for mm in 1..max_total {
        for nn in 1..=(max_total - mm) {
            for m in 1..=mm {
                for n in 1..=nn {
                    out.push(SampleDesign::new(m, n, mm, nn).unwrap());
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(m: u64, n: u64, mm: u64, nn: u64) -> SampleDesign {
        SampleDesign::new(m, n, mm, nn).unwrap()
    }

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn single_pair_pmf() {
        let pmf = exact_joint_pmf(&design(1, 1, 1, 1), DEFAULT_BUDGET).unwrap();
        assert_eq!(pmf.counts().len(), 2);
        assert_eq!(pmf.probability(0, 0), r(1, 2));
        assert_eq!(pmf.probability(1, 1), r(1, 2));
    }

    #[test]
    fn small_design_u2_marginal() {
        let pmf = exact_joint_pmf(&design(1, 1, 2, 2), DEFAULT_BUDGET).unwrap();
        let marg = pmf.u2_marginal();
        let expect = [(0, 1), (1, 1), (2, 2), (3, 1), (4, 1)];
        for (u2, num) in expect {
            assert_eq!(marg[&u2], r(num, 6), "u2 = {u2}");
        }
        assert!(pmf.total_mass().is_one());
    }

    #[test]
    fn pmf_support_nested() {
        let pmf = exact_joint_pmf(&design(2, 2, 4, 3), DEFAULT_BUDGET).unwrap();
        for (&(u1, u2), _) in pmf.counts() {
            assert!(u1 <= u2 && u2 <= 12);
        }
    }

    #[test]
    fn pmf_matches_brute_force_label_enumeration() {
        // reference: recursively enumerate every 4-symbol sequence
        fn brute(design: &SampleDesign) -> BTreeMap<(u64, u64), u64> {
            fn rec(
                left: [u64; 4],
                x1: u64,
                xs: u64,
                u1: u64,
                u2: u64,
                out: &mut BTreeMap<(u64, u64), u64>,
            ) {
                if left.iter().all(|&v| v == 0) {
                    *out.entry((u1, u2)).or_default() += 1;
                    return;
                }
                if left[0] > 0 {
                    let mut l = left;
                    l[0] -= 1;
                    rec(l, x1 + 1, xs + 1, u1, u2, out);
                }
                if left[1] > 0 {
                    let mut l = left;
                    l[1] -= 1;
                    rec(l, x1, xs + 1, u1, u2, out);
                }
                if left[2] > 0 {
                    let mut l = left;
                    l[2] -= 1;
                    rec(l, x1, xs, u1 + x1, u2 + xs, out);
                }
                if left[3] > 0 {
                    let mut l = left;
                    l[3] -= 1;
                    rec(l, x1, xs, u1, u2 + xs, out);
                }
            }
            let mut out = BTreeMap::new();
            rec(
                [design.m, design.total_m - design.m, design.n, design.total_n - design.n],
                0,
                0,
                0,
                0,
                &mut out,
            );
            out
        }
        for d in [design(1, 1, 2, 1), design(1, 2, 2, 3), design(2, 1, 3, 3), design(2, 2, 4, 4)] {
            let pmf = exact_joint_pmf(&d, DEFAULT_BUDGET).unwrap();
            let reference = brute(&d);
            assert_eq!(pmf.counts().len(), reference.len(), "{d:?}");
            for (&k, &c) in pmf.counts() {
                assert_eq!(c, reference[&k] as u128, "{d:?} at {k:?}");
            }
        }
    }

    #[test]
    fn u2_marginal_matches_classical_recurrence() {
        // number of (M, N) arrangements with count u: c(M,N,u) = c(M-1,N,u-N) + c(M,N-1,u)
        fn classical(mm: usize, nn: usize) -> Vec<u64> {
            let mut table = vec![vec![vec![0u64; mm * nn + 1]; nn + 1]; mm + 1];
            for a in 0..=mm {
                for b in 0..=nn {
                    if a == 0 || b == 0 {
                        table[a][b][0] = 1;
                        continue;
                    }
                    for u in 0..=a * b {
                        // smallest value is an x (below all b y's) or a y (below all x's)
                        let min_is_x = if u >= b { table[a - 1][b][u - b] } else { 0 };
                        let min_is_y = if u <= a * (b - 1) { table[a][b - 1][u] } else { 0 };
                        table[a][b][u] = min_is_x + min_is_y;
                    }
                }
            }
            table[mm][nn].clone()
        }
        let d = design(2, 2, 4, 4);
        let pmf = exact_joint_pmf(&d, DEFAULT_BUDGET).unwrap();
        let marg = pmf.u2_marginal();
        let counts = classical(4, 4);
        let total: u64 = counts.iter().sum();
        for (u, &c) in counts.iter().enumerate() {
            let p = marg.get(&(u as u64)).cloned().unwrap_or_else(BigRational::zero);
            assert_eq!(p, r(c as i64, total as i64), "u2 = {u}");
        }
    }

    #[test]
    fn u2_marginal_symmetry() {
        let d = design(2, 3, 4, 5);
        let pmf = exact_joint_pmf(&d, DEFAULT_BUDGET).unwrap();
        let marg = pmf.u2_marginal();
        let top = d.u2_max();
        for (&u, p) in &marg {
            assert_eq!(*p, marg[&(top - u)], "u2 = {u}");
        }
    }

    #[test]
    fn budget_is_enforced() {
        let d = design(8, 8, 16, 16);
        assert!(matches!(
            exact_joint_pmf(&d, 1000),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn moments_of_tiny_pmfs() {
        let pmf = exact_joint_pmf(&design(1, 1, 1, 1), DEFAULT_BUDGET).unwrap();
        for (_, v) in pmf_moments(&pmf).iter() {
            assert_eq!(*v, r(1, 2));
        }
        let pmf = exact_joint_pmf(&design(1, 1, 2, 2), DEFAULT_BUDGET).unwrap();
        assert_eq!(*pmf_moments(&pmf).get(1, 1), r(17, 12));
    }

    #[test]
    fn cumulants_of_tiny_pmfs() {
        let pmf = exact_joint_pmf(&design(1, 1, 1, 1), DEFAULT_BUDGET).unwrap();
        let c = pmf_cumulants(&pmf);
        assert_eq!(*c.get(2, 0), r(1, 4));
        assert_eq!(*c.get(1, 1), r(1, 4));
        assert_eq!(*c.get(4, 0), r(-1, 8));
        let pmf = exact_joint_pmf(&design(1, 1, 2, 2), DEFAULT_BUDGET).unwrap();
        assert_eq!(*pmf_cumulants(&pmf).get(1, 1), r(5, 12));
    }

    #[test]
    fn simulation_is_deterministic_and_tight_on_point_mass() {
        let d = design(2, 2, 3, 3);
        let below = Sampler::Uniform { lo: 0.0, hi: 1.0 };
        let above = Sampler::Uniform { lo: 10.0, hi: 11.0 };
        let est = simulate_joint(&d, below, above, 5_000, 3).unwrap();
        assert_eq!(*est.values.get(1, 0), 4.0);
        assert_eq!(*est.values.get(0, 1), 9.0);
        assert_eq!(*est.standard_errors.get(1, 0), 0.0);

        let a = simulate_joint(&d, below, above, 5_000, 3).unwrap();
        assert_eq!(a, est);
    }

    #[test]
    fn validator_passes_on_small_grid() {
        let grid = design_grid(6);
        let report = validate_formulas(&grid, ValidationMode::NullExact, 0.0, DEFAULT_BUDGET).unwrap();
        assert!(report.all_ok(), "{} mismatches", report.mismatches());
        let report =
            validate_formulas(&grid, ValidationMode::GeneralReduction, 0.0, DEFAULT_BUDGET).unwrap();
        assert!(report.all_ok(), "{} mismatches", report.mismatches());
    }

    #[test]
    fn validator_catches_a_corrupted_engine() {
        let designs = design_grid(6);
        let checks = check_null_moment(
            |d| {
                crate::moments::formulas::null_fourth(d.m, d.n) + BigRational::one()
            },
            (4, 0),
            &designs,
            DEFAULT_BUDGET,
        )
        .unwrap();
        assert!(checks.iter().any(|c| c.verdict == Verdict::Mismatch));
    }

    #[test]
    fn design_grid_counts() {
        assert_eq!(design_grid(10).len(), 495);
        assert_eq!(design_grid(8).len(), 210);
    }
}
