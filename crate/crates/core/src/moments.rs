//! Closed-form joint raw moments of (U1, U2) up to total order 4.
//!
//! Null mode evaluates the exact rational polynomials in (m, n, M, N);
//! general mode evaluates polynomials in the design sizes and the
//! comparison probabilities. Every display is a named evaluator so each
//! certified correction maps one-to-one to code (see FORMULA_ERRATA.md).

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::pi::{null_pi_vector, Pi, PiVector};
use crate::scalar::{falling, Scalar};
use crate::ustat::SampleDesign;

/// The (a, b) exponent pairs of all fourteen moments E(U1^a U2^b), 1 <= a+b <= 4.
pub const MOMENT_ORDERS: [(u8, u8); 14] = [
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
    (4, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 4),
];

pub fn moment_slot(a: u8, b: u8) -> usize {
    MOMENT_ORDERS
        .iter()
        .position(|&(x, y)| (x, y) == (a, b))
        .unwrap_or_else(|| panic!("no moment E(U1^{a} U2^{b})"))
}

/// Conventional report key for a moment, e.g. `E_U1_2_U2` for E(U1^2 U2).
pub fn moment_key(a: u8, b: u8) -> String {
    let mut s = String::from("E");
    if a == 1 {
        s.push_str("_U1");
    } else if a > 1 {
        s.push_str(&format!("_U1_{a}"));
    }
    if b == 1 {
        s.push_str("_U2");
    } else if b > 1 {
        s.push_str(&format!("_U2_{b}"));
    }
    s
}

/// Which arithmetic produced a moment set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentMode {
    NullExact,
    General,
}

/// All joint raw moments E(U1^a U2^b) with 1 <= a+b <= 4.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet<T> {
    values: [T; 14],
    pub mode: MomentMode,
}

impl<T: Clone> MomentSet<T> {
    pub fn from_fn(mode: MomentMode, mut f: impl FnMut(u8, u8) -> T) -> Self {
        MomentSet { values: MOMENT_ORDERS.map(|(a, b)| f(a, b)), mode }
    }

    pub fn get(&self, a: u8, b: u8) -> &T {
        &self.values[moment_slot(a, b)]
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u8, u8), &T)> {
        MOMENT_ORDERS.iter().copied().zip(self.values.iter())
    }

    pub fn map<U: Clone>(&self, mut f: impl FnMut(&T) -> U) -> MomentSet<U> {
        MomentSet { values: MOMENT_ORDERS.map(|(a, b)| f(self.get(a, b))), mode: self.mode }
    }
}

impl MomentSet<BigRational> {
    pub fn to_f64(&self) -> MomentSet<f64> {
        use num_traits::ToPrimitive;
        self.map(|r| r.to_f64().expect("moment fits in f64"))
    }
}

/// Exact rational moments under the null hypothesis.
pub fn moments_null(design: &SampleDesign) -> MomentSet<BigRational> {
    use formulas as f;
    let &SampleDesign { m, n, total_m: mm, total_n: nn } = design;
    MomentSet::from_fn(MomentMode::NullExact, |a, b| match (a, b) {
        (1, 0) => f::null_mean(m, n),
        (0, 1) => f::null_mean(mm, nn),
        (2, 0) => f::null_second(m, n),
        (0, 2) => f::null_second(mm, nn),
        (1, 1) => f::null_cross_second(design),
        (3, 0) => f::null_third(m, n),
        (0, 3) => f::null_third(mm, nn),
        (2, 1) => f::null_u1sq_u2(design),
        (1, 2) => f::null_u1_u2sq(design),
        (4, 0) => f::null_fourth(m, n),
        (0, 4) => f::null_fourth(mm, nn),
        (3, 1) => f::null_u1cube_u2(design),
        (2, 2) => f::null_u1sq_u2sq(design),
        (1, 3) => f::null_u1_u2cube(design),
        _ => unreachable!(),
    })
}

/// General-case moments from a comparison-probability vector. With the exact
/// null vector this reduces entry-by-entry to [`moments_null`].
pub fn moments_general<T: Scalar>(design: &SampleDesign, pi: &PiVector<T>) -> Result<MomentSet<T>> {
    pi.validate()?;
    use formulas as f;
    let &SampleDesign { m, n, total_m: mm, total_n: nn } = design;
    Ok(MomentSet::from_fn(MomentMode::General, |a, b| match (a, b) {
        (1, 0) => f::u_mean(m, n, pi),
        (0, 1) => f::u_mean(mm, nn, pi),
        (2, 0) => f::u_second(m, n, pi),
        (0, 2) => f::u_second(mm, nn, pi),
        (1, 1) => f::cross_second(design, pi),
        (3, 0) => f::u_third(m, n, pi),
        (0, 3) => f::u_third(mm, nn, pi),
        (2, 1) => f::u1sq_u2(design, pi),
        (1, 2) => f::u1_u2sq(design, pi),
        (4, 0) => f::u_fourth(m, n, pi),
        (0, 4) => f::u_fourth(mm, nn, pi),
        (3, 1) => f::u1cube_u2(design, pi),
        (2, 2) => f::u1sq_u2sq(design, pi),
        (1, 3) => f::u1_u2cube(design, pi),
        _ => unreachable!(),
    }))
}

/// E(sum over i != k, j of I_ij I_kj U2^2), the control-side helper of the
/// fourth mixed moment. Requires at least two controls.
pub fn helper_h_expectation<T: Scalar>(design: &SampleDesign, pi: &PiVector<T>) -> Result<T> {
    if design.total_m < 2 {
        return Err(Error::Domain("helper H needs two distinct controls (M >= 2)".into()));
    }
    pi.validate()?;
    Ok(formulas::helper_h(design.total_m, design.total_n, pi))
}

/// The treated-side mirror of [`helper_h_expectation`]: swap the roles of
/// M and N together with pi1<->pi9, pi2<->pi12, pi3<->pi7, pi5<->pi10,
/// pi6<->pi13. Requires at least two treated.
pub fn helper_k_expectation<T: Scalar>(design: &SampleDesign, pi: &PiVector<T>) -> Result<T> {
    if design.total_n < 2 {
        return Err(Error::Domain("helper K needs two distinct treated (N >= 2)".into()));
    }
    pi.validate()?;
    Ok(formulas::helper_g(design.total_m, design.total_n, pi))
}

/// Exact null value of helper H (the closed polynomial form).
pub fn helper_h_null(design: &SampleDesign) -> Result<BigRational> {
    if design.total_m < 2 {
        return Err(Error::Domain("helper H needs two distinct controls (M >= 2)".into()));
    }
    Ok(formulas::null_helper_h(design.total_m, design.total_n))
}

/// Exact null value of helper K.
pub fn helper_k_null(design: &SampleDesign) -> Result<BigRational> {
    if design.total_n < 2 {
        return Err(Error::Domain("helper K needs two distinct treated (N >= 2)".into()));
    }
    Ok(formulas::null_helper_h(design.total_n, design.total_m))
}

/// The mirror map between the two helper expectations.
pub fn mirror_pi<T: Clone>(pi: &PiVector<T>) -> PiVector<T> {
    PiVector::from_fn(|p| {
        let q = match p {
            Pi::P1 => Pi::P9,
            Pi::P9 => Pi::P1,
            Pi::P2 => Pi::P12,
            Pi::P12 => Pi::P2,
            Pi::P3 => Pi::P7,
            Pi::P7 => Pi::P3,
            Pi::P5 => Pi::P10,
            Pi::P10 => Pi::P5,
            Pi::P6 => Pi::P13,
            Pi::P13 => Pi::P6,
            other => other,
        };
        pi[q].clone()
    })
}

/// Named evaluators, one per closed-form display.
pub mod formulas {
    use super::*;

    fn c<T: Scalar>(x: u64) -> T {
        T::from_count(x)
    }

    /// Product of falling-factorial ratios with the zero-numerator rule:
    /// an empty index range contributes nothing, so a vanishing numerator
    /// makes the whole coefficient zero before any division happens.
    fn ff_ratio<T: Scalar>(num: &[(u64, u32)], den: &[(u64, u32)]) -> T {
        let mut top = T::one();
        for &(x, k) in num {
            top = top * falling::<T>(x, k);
        }
        if top.is_zero() {
            return T::zero();
        }
        let mut bot = T::one();
        for &(x, k) in den {
            bot = bot * falling::<T>(x, k);
        }
        debug_assert!(!bot.is_zero());
        top / bot
    }

    // ----- general case -----

    /// E(U) = xy pi0.
    pub fn u_mean<T: Scalar>(x: u64, y: u64, pi: &PiVector<T>) -> T {
        c::<T>(x * y) * pi[Pi::P0].clone()
    }

    /// E(U^2) = xy pi0 + x(x-1)y pi1 + xy(y-1) pi9 + x(x-1)y(y-1) pi0^2.
    pub fn u_second<T: Scalar>(x: u64, y: u64, pi: &PiVector<T>) -> T {
        let p0 = pi[Pi::P0].clone();
        c::<T>(x * y) * p0.clone()
            + falling::<T>(x, 2) * c::<T>(y) * pi[Pi::P1].clone()
            + c::<T>(x) * falling::<T>(y, 2) * pi[Pi::P9].clone()
            + falling::<T>(x, 2) * falling::<T>(y, 2) * p0.clone() * p0
    }

    /// E(U1 U2) = mn [pi0 + (M-1) pi1 + (N-1) pi9 + (M-1)(N-1) pi0^2].
    pub fn cross_second<T: Scalar>(d: &SampleDesign, pi: &PiVector<T>) -> T {
        let p0 = pi[Pi::P0].clone();
        let mn = c::<T>(d.m * d.n);
        let bm = c::<T>(d.total_m - 1);
        let bn = c::<T>(d.total_n - 1);
        mn * (p0.clone()
            + bm.clone() * pi[Pi::P1].clone()
            + bn.clone() * pi[Pi::P9].clone()
            + bm * bn * p0.clone() * p0)
    }

    /// Third raw moment of a single statistic.
    pub fn u_third<T: Scalar>(x: u64, y: u64, pi: &PiVector<T>) -> T {
        let p0 = pi[Pi::P0].clone();
        let p0sq = p0.clone() * p0.clone();
        c::<T>(x * y) * p0.clone()
            + c::<T>(3) * falling::<T>(x, 2) * c::<T>(y) * pi[Pi::P1].clone()
            + c::<T>(3) * c::<T>(x) * falling::<T>(y, 2) * pi[Pi::P9].clone()
            + c::<T>(3) * falling::<T>(x, 2) * falling::<T>(y, 2) * p0sq.clone()
            + c::<T>(6) * falling::<T>(x, 2) * falling::<T>(y, 2) * pi[Pi::P4].clone()
            + falling::<T>(x, 3) * c::<T>(y) * pi[Pi::P2].clone()
            + c::<T>(x) * falling::<T>(y, 3) * pi[Pi::P12].clone()
            + c::<T>(3) * falling::<T>(x, 3) * falling::<T>(y, 2) * p0.clone() * pi[Pi::P1].clone()
            + c::<T>(3) * falling::<T>(x, 2) * falling::<T>(y, 3) * p0.clone() * pi[Pi::P9].clone()
            + falling::<T>(x, 3) * falling::<T>(y, 3) * p0sq * p0
    }

    /// E(sum_{i != k, j} I_ij I_kj U2): the control-share helper of the
    /// third-order conditional decomposition.
    pub fn pair_y_share_u2<T: Scalar>(mm: u64, nn: u64, pi: &PiVector<T>) -> T {
        falling::<T>(mm, 3) * falling::<T>(nn, 2) * pi[Pi::P0].clone() * pi[Pi::P1].clone()
            + c::<T>(2) * falling::<T>(mm, 2) * falling::<T>(nn, 2) * pi[Pi::P4].clone()
            + falling::<T>(mm, 3) * c::<T>(nn) * pi[Pi::P2].clone()
            + c::<T>(2) * falling::<T>(mm, 2) * c::<T>(nn) * pi[Pi::P1].clone()
    }

    /// E(sum_{i, j != l} I_ij I_il U2): the treated-share mirror.
    pub fn pair_x_share_u2<T: Scalar>(mm: u64, nn: u64, pi: &PiVector<T>) -> T {
        falling::<T>(mm, 2) * falling::<T>(nn, 3) * pi[Pi::P0].clone() * pi[Pi::P9].clone()
            + c::<T>(2) * falling::<T>(mm, 2) * falling::<T>(nn, 2) * pi[Pi::P4].clone()
            + c::<T>(mm) * falling::<T>(nn, 3) * pi[Pi::P12].clone()
            + c::<T>(2) * c::<T>(mm) * falling::<T>(nn, 2) * pi[Pi::P9].clone()
    }

    /// E(U1^2 U2) via the conditional decomposition onto full-range sums.
    pub fn u1sq_u2<T: Scalar>(d: &SampleDesign, pi: &PiVector<T>) -> T {
        let (m, n, mm, nn) = (d.m, d.n, d.total_m, d.total_n);
        let f: T = ff_ratio(&[(m, 2), (n, 2)], &[(mm, 2), (nn, 2)]);
        let r00: T = ff_ratio(&[(m, 1), (n, 1)], &[(mm, 1), (nn, 1)]);
        let r10: T = ff_ratio(&[(m, 2), (n, 1)], &[(mm, 2), (nn, 1)]);
        let r01: T = ff_ratio(&[(m, 1), (n, 2)], &[(mm, 1), (nn, 2)]);
        f.clone() * u_third(mm, nn, pi)
            + (r00 - f.clone()) * u_second(mm, nn, pi)
            + (r10 - f.clone()) * pair_y_share_u2(mm, nn, pi)
            + (r01 - f) * pair_x_share_u2(mm, nn, pi)
    }

    /// E(U1 U2^2) = (mn / MN) E(U2^3), by E(U1 | U2) = (mn/MN) U2.
    pub fn u1_u2sq<T: Scalar>(d: &SampleDesign, pi: &PiVector<T>) -> T {
        ff_ratio::<T>(&[(d.m, 1), (d.n, 1)], &[(d.total_m, 1), (d.total_n, 1)])
            * u_third(d.total_m, d.total_n, pi)
    }

    /// E(U1 U2^3) = (mn / MN) E(U2^4).
    pub fn u1_u2cube<T: Scalar>(d: &SampleDesign, pi: &PiVector<T>) -> T {
        ff_ratio::<T>(&[(d.m, 1), (d.n, 1)], &[(d.total_m, 1), (d.total_n, 1)])
            * u_fourth(d.total_m, d.total_n, pi)
    }

    /// One monomial of a fourth-moment expansion: coeff times a product of
    /// comparison probabilities times falling factorials of the two sizes.
    #[derive(Debug, Clone, Copy)]
    pub struct UTerm {
        pub coeff: i64,
        pub mono: &'static [Pi],
        pub x_fall: u32,
        pub y_fall: u32,
    }

    /// Certified expansion of the single-statistic fourth moment. Two of the
    /// printed count pairings were crossed and are fixed here: pi1^2 pairs
    /// with the four-control count and pi0^2 pi1 with the four-control
    /// three-treated count (see FORMULA_ERRATA.md).
    pub static U_FOURTH_TERMS: &[UTerm] = &[
        UTerm { coeff: 1, mono: &[Pi::P0], x_fall: 1, y_fall: 1 },
        UTerm { coeff: 7, mono: &[Pi::P1], x_fall: 2, y_fall: 1 },
        UTerm { coeff: 7, mono: &[Pi::P9], x_fall: 1, y_fall: 2 },
        UTerm { coeff: 7, mono: &[Pi::P0, Pi::P0], x_fall: 2, y_fall: 2 },
        UTerm { coeff: 6, mono: &[Pi::P2], x_fall: 3, y_fall: 1 },
        UTerm { coeff: 6, mono: &[Pi::P12], x_fall: 1, y_fall: 3 },
        UTerm { coeff: 36, mono: &[Pi::P4], x_fall: 2, y_fall: 2 },
        UTerm { coeff: 6, mono: &[Pi::P8], x_fall: 2, y_fall: 2 },
        UTerm { coeff: 18, mono: &[Pi::P0, Pi::P1], x_fall: 3, y_fall: 2 },
        UTerm { coeff: 18, mono: &[Pi::P0, Pi::P9], x_fall: 2, y_fall: 3 },
        UTerm { coeff: 12, mono: &[Pi::P7], x_fall: 2, y_fall: 3 },
        UTerm { coeff: 12, mono: &[Pi::P3], x_fall: 3, y_fall: 2 },
        UTerm { coeff: 12, mono: &[Pi::P5], x_fall: 3, y_fall: 2 },
        UTerm { coeff: 12, mono: &[Pi::P10], x_fall: 2, y_fall: 3 },
        UTerm { coeff: 1, mono: &[Pi::P6], x_fall: 4, y_fall: 1 },
        UTerm { coeff: 1, mono: &[Pi::P13], x_fall: 1, y_fall: 4 },
        UTerm { coeff: 4, mono: &[Pi::P0, Pi::P2], x_fall: 4, y_fall: 2 },
        UTerm { coeff: 4, mono: &[Pi::P0, Pi::P12], x_fall: 2, y_fall: 4 },
        UTerm { coeff: 3, mono: &[Pi::P1, Pi::P1], x_fall: 4, y_fall: 2 },
        UTerm { coeff: 3, mono: &[Pi::P9, Pi::P9], x_fall: 2, y_fall: 4 },
        UTerm { coeff: 6, mono: &[Pi::P1, Pi::P9], x_fall: 3, y_fall: 3 },
        UTerm { coeff: 6, mono: &[Pi::P0, Pi::P0, Pi::P0], x_fall: 3, y_fall: 3 },
        UTerm { coeff: 24, mono: &[Pi::P0, Pi::P4], x_fall: 3, y_fall: 3 },
        UTerm { coeff: 6, mono: &[Pi::P0, Pi::P0, Pi::P1], x_fall: 4, y_fall: 3 },
        UTerm { coeff: 6, mono: &[Pi::P0, Pi::P0, Pi::P9], x_fall: 3, y_fall: 4 },
        UTerm { coeff: 1, mono: &[Pi::P0, Pi::P0, Pi::P0, Pi::P0], x_fall: 4, y_fall: 4 },
    ];

    /// Evaluate a fourth-moment term table at sizes (x, y).
    pub fn u_fourth_with_terms<T: Scalar>(terms: &[UTerm], x: u64, y: u64, pi: &PiVector<T>) -> T {
        let mut acc = T::zero();
        for t in terms {
            let mut v = T::from_int(t.coeff) * falling::<T>(x, t.x_fall) * falling::<T>(y, t.y_fall);
            if v.is_zero() {
                continue;
            }
            for &p in t.mono {
                v = v * pi[p].clone();
            }
            acc = acc + v;
        }
        acc
    }

    /// Fourth raw moment of a single statistic.
    pub fn u_fourth<T: Scalar>(x: u64, y: u64, pi: &PiVector<T>) -> T {
        u_fourth_with_terms(U_FOURTH_TERMS, x, y, pi)
    }

    /// E(sum_{i != k, j} I_ij I_kj U2^2): the control-side helper of the
    /// (2,2) moment. Zero when M < 2.
    pub fn helper_h<T: Scalar>(mm: u64, nn: u64, pi: &PiVector<T>) -> T {
        let lead = falling::<T>(mm, 2) * c::<T>(nn);
        if lead.is_zero() {
            return T::zero();
        }
        let m2 = c::<T>(mm - 2);
        let m3 = T::from_int(mm as i64 - 3);
        let n1 = c::<T>(nn - 1);
        let n2 = T::from_int(nn as i64 - 2);
        let p0 = pi[Pi::P0].clone();
        let brace = pi[Pi::P1].clone() * u_second(mm - 2, nn - 1, pi)
            + c::<T>(2) * m2.clone() * m3.clone() * n1.clone() * p0.clone() * pi[Pi::P2].clone()
            + c::<T>(6) * m2.clone() * n1.clone() * pi[Pi::P3].clone()
            + c::<T>(4) * m2.clone() * n1.clone() * n2.clone() * p0.clone() * pi[Pi::P4].clone()
            + c::<T>(4) * m2.clone() * n1.clone() * pi[Pi::P5].clone()
            + c::<T>(4) * m2.clone() * n1.clone() * p0 * pi[Pi::P1].clone()
            + c::<T>(5) * m2.clone() * pi[Pi::P2].clone()
            + m2 * m3 * pi[Pi::P6].clone()
            + c::<T>(10) * n1.clone() * pi[Pi::P4].clone()
            + c::<T>(2) * n1.clone() * pi[Pi::P8].clone()
            + c::<T>(2) * n1.clone() * n2.clone() * pi[Pi::P7].clone()
            + c::<T>(2) * n1 * n2 * pi[Pi::P10].clone()
            + c::<T>(4) * pi[Pi::P1].clone();
        lead * brace
    }

    /// E(sum_{i, j != l} I_ij I_il U2^2): the treated-side mirror of
    /// [`helper_h`]. Beyond swapping M and N, the mirror exchanges
    /// pi1<->pi9, pi2<->pi12, pi3<->pi7, pi5<->pi10 and pi6<->pi13;
    /// the printed display misses the pattern renames (FORMULA_ERRATA.md).
    pub fn helper_g<T: Scalar>(mm: u64, nn: u64, pi: &PiVector<T>) -> T {
        let lead = c::<T>(mm) * falling::<T>(nn, 2);
        if lead.is_zero() {
            return T::zero();
        }
        let n2 = c::<T>(nn - 2);
        let n3 = T::from_int(nn as i64 - 3);
        let m1 = c::<T>(mm - 1);
        let m2 = T::from_int(mm as i64 - 2);
        let p0 = pi[Pi::P0].clone();
        let brace = pi[Pi::P9].clone() * u_second(mm - 1, nn - 2, pi)
            + c::<T>(2) * n2.clone() * n3.clone() * m1.clone() * p0.clone() * pi[Pi::P12].clone()
            + c::<T>(6) * n2.clone() * m1.clone() * pi[Pi::P7].clone()
            + c::<T>(4) * n2.clone() * m1.clone() * m2.clone() * p0.clone() * pi[Pi::P4].clone()
            + c::<T>(4) * n2.clone() * m1.clone() * pi[Pi::P10].clone()
            + c::<T>(4) * n2.clone() * m1.clone() * p0 * pi[Pi::P9].clone()
            + c::<T>(5) * n2.clone() * pi[Pi::P12].clone()
            + n2 * n3 * pi[Pi::P13].clone()
            + c::<T>(10) * m1.clone() * pi[Pi::P4].clone()
            + c::<T>(2) * m1.clone() * pi[Pi::P8].clone()
            + c::<T>(2) * m1.clone() * m2.clone() * pi[Pi::P3].clone()
            + c::<T>(2) * m1 * m2 * pi[Pi::P5].clone()
            + c::<T>(4) * pi[Pi::P9].clone();
        lead * brace
    }

    /// E(U1^2 U2^2): the weighted assembly of E(U2^3), helper H, helper G
    /// and E(U2^4).
    pub fn u1sq_u2sq<T: Scalar>(d: &SampleDesign, pi: &PiVector<T>) -> T {
        let (m, n, mm, nn) = (d.m, d.n, d.total_m, d.total_n);
        let f: T = ff_ratio(&[(m, 2), (n, 2)], &[(mm, 2), (nn, 2)]);
        let r00: T = ff_ratio(&[(m, 1), (n, 1)], &[(mm, 1), (nn, 1)]);
        let r10: T = ff_ratio(&[(m, 2), (n, 1)], &[(mm, 2), (nn, 1)]);
        let r01: T = ff_ratio(&[(m, 1), (n, 2)], &[(mm, 1), (nn, 2)]);
        (r00 - f.clone()) * u_third(mm, nn, pi)
            + (r10 - f.clone()) * helper_h(mm, nn, pi)
            + (r01 - f.clone()) * helper_g(mm, nn, pi)
            + f * u_fourth(mm, nn, pi)
    }

    /// One bracket entry of a conditional-decomposition slot: coeff times a
    /// pi-monomial times shifted size factors prod (M - o) prod (N - o).
    #[derive(Debug, Clone, Copy)]
    pub struct BracketTerm {
        pub coeff: i64,
        pub mono: &'static [Pi],
        pub m_offsets: &'static [u64],
        pub n_offsets: &'static [u64],
    }

    /// One slot of the E(U1^3 U2) decomposition: a stage-1 index-pattern
    /// class with its multiplicity and full-range bracket.
    #[derive(Debug, Clone, Copy)]
    pub struct CrossSlot {
        pub coeff: i64,
        pub m_fall: u32,
        pub n_fall: u32,
        pub bracket: &'static [BracketTerm],
    }

    macro_rules! bt {
        ($c:expr, [$($p:ident),*], m[$($mo:expr),*], n[$($no:expr),*]) => {
            BracketTerm {
                coeff: $c,
                mono: &[$(Pi::$p),*],
                m_offsets: &[$($mo),*],
                n_offsets: &[$($no),*],
            }
        };
    }

    /// Certified slots of E(U1^3 U2); the printed display's corrupted tokens
    /// resolve as 2 pi4 and 3 pi3, the seventh slot's disjoint-pair bracket
    /// carries 2 (M-2) pi0 pi1, and the third slot mirrors the second with
    /// (M-3)(N-2) counts (see FORMULA_ERRATA.md).
    pub static U1CUBE_U2_SLOTS: &[CrossSlot] = &[
        // three disjoint stage-1 pairs
        CrossSlot {
            coeff: 1,
            m_fall: 3,
            n_fall: 3,
            bracket: &[
                bt!(1, [P0, P0, P0, P0], m[3], n[3]),
                bt!(3, [P0, P0, P9], m[], n[3]),
                bt!(3, [P0, P0, P1], m[3], n[]),
                bt!(3, [P0, P0, P0], m[], n[]),
                bt!(6, [P0, P4], m[], n[]),
            ],
        },
        // shared control between two pairs
        CrossSlot {
            coeff: 3,
            m_fall: 2,
            n_fall: 3,
            bracket: &[
                bt!(1, [P0, P0, P9], m[2], n[3]),
                bt!(1, [P0, P12], m[], n[3]),
                bt!(1, [P9, P9], m[], n[3]),
                bt!(1, [P1, P9], m[2], n[]),
                bt!(2, [P0, P4], m[2], n[]),
                bt!(3, [P0, P9], m[], n[]),
                bt!(1, [P7], m[], n[]),
                bt!(2, [P10], m[], n[]),
            ],
        },
        // shared treated between two pairs
        CrossSlot {
            coeff: 3,
            m_fall: 3,
            n_fall: 2,
            bracket: &[
                bt!(1, [P0, P0, P1], m[3], n[2]),
                bt!(1, [P0, P2], m[3], n[]),
                bt!(1, [P1, P1], m[3], n[]),
                bt!(1, [P1, P9], m[], n[2]),
                bt!(2, [P0, P4], m[], n[2]),
                bt!(3, [P0, P1], m[], n[]),
                bt!(1, [P3], m[], n[]),
                bt!(2, [P5], m[], n[]),
            ],
        },
        // one control against three treated
        CrossSlot {
            coeff: 1,
            m_fall: 1,
            n_fall: 3,
            bracket: &[
                bt!(1, [P0, P12], m[1], n[3]),
                bt!(1, [P13], m[], n[3]),
                bt!(3, [P7], m[1], n[]),
                bt!(3, [P12], m[], n[]),
            ],
        },
        // three controls against one treated
        CrossSlot {
            coeff: 1,
            m_fall: 3,
            n_fall: 1,
            bracket: &[
                bt!(1, [P0, P2], m[3], n[1]),
                bt!(1, [P6], m[3], n[]),
                bt!(3, [P3], m[], n[1]),
                bt!(3, [P2], m[], n[]),
            ],
        },
        // the vee with a pendant
        CrossSlot {
            coeff: 6,
            m_fall: 2,
            n_fall: 2,
            bracket: &[
                bt!(1, [P0, P4], m[2], n[2]),
                bt!(1, [P7], m[], n[2]),
                bt!(1, [P10], m[], n[2]),
                bt!(1, [P3], m[2], n[]),
                bt!(1, [P5], m[2], n[]),
                bt!(3, [P4], m[], n[]),
                bt!(1, [P8], m[], n[]),
            ],
        },
        // two disjoint stage-1 pairs
        CrossSlot {
            coeff: 3,
            m_fall: 2,
            n_fall: 2,
            bracket: &[
                bt!(1, [P0, P0, P0], m[2], n[2]),
                bt!(2, [P0, P1], m[2], n[]),
                bt!(2, [P0, P9], m[], n[2]),
                bt!(2, [P0, P0], m[], n[]),
                bt!(2, [P4], m[], n[]),
            ],
        },
        // stage-1 pair sharing a treated
        CrossSlot {
            coeff: 3,
            m_fall: 2,
            n_fall: 1,
            bracket: &[
                bt!(1, [P0, P1], m[2], n[1]),
                bt!(2, [P4], m[], n[1]),
                bt!(1, [P2], m[2], n[]),
                bt!(2, [P1], m[], n[]),
            ],
        },
        // stage-1 pair sharing a control
        CrossSlot {
            coeff: 3,
            m_fall: 1,
            n_fall: 2,
            bracket: &[
                bt!(1, [P0, P9], m[1], n[2]),
                bt!(2, [P4], m[1], n[]),
                bt!(1, [P12], m[], n[2]),
                bt!(2, [P9], m[], n[]),
            ],
        },
    ];

    /// E(U1^3 U2) = slot sums + (mn / MN) E(U2^2).
    pub fn u1cube_u2<T: Scalar>(d: &SampleDesign, pi: &PiVector<T>) -> T {
        let (m, n, mm, nn) = (d.m, d.n, d.total_m, d.total_n);
        let mut acc = ff_ratio::<T>(&[(m, 1), (n, 1)], &[(mm, 1), (nn, 1)]) * u_second(mm, nn, pi);
        for slot in U1CUBE_U2_SLOTS {
            let count = T::from_int(slot.coeff)
                * falling::<T>(m, slot.m_fall)
                * falling::<T>(n, slot.n_fall);
            if count.is_zero() {
                continue;
            }
            let mut bracket = T::zero();
            for t in slot.bracket {
                let mut v = T::from_int(t.coeff);
                for &o in t.m_offsets {
                    v = v * T::from_int(mm as i64 - o as i64);
                }
                for &o in t.n_offsets {
                    v = v * T::from_int(nn as i64 - o as i64);
                }
                for &p in t.mono {
                    v = v * pi[p].clone();
                }
                bracket = bracket + v;
            }
            acc = acc + count * bracket;
        }
        acc
    }

    // ----- null closed forms -----

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn b(x: u64) -> BigRational {
        BigRational::from_integer(x.into())
    }

    /// E(U) = xy / 2.
    pub fn null_mean(x: u64, y: u64) -> BigRational {
        b(x * y) / b(2)
    }

    /// E(U^2) = x^2 y^2 / 4 + x^2 y / 12 + x y^2 / 12 + xy / 12.
    pub fn null_second(x: u64, y: u64) -> BigRational {
        b(x * x * y * y) * r(1, 4) + (b(x * x * y) + b(x * y * y) + b(x * y)) * r(1, 12)
    }

    /// E(U1 U2) = mnMN/4 + mnM/12 + mnN/12 + mn/12.
    pub fn null_cross_second(d: &SampleDesign) -> BigRational {
        let mn = b(d.m * d.n);
        mn.clone() * b(d.total_m * d.total_n) * r(1, 4)
            + mn.clone() * (b(d.total_m) + b(d.total_n) + b(1)) * r(1, 12)
    }

    /// E(U^3) = (x^2 y^2 / 8)(xy + x + y + 1).
    pub fn null_third(x: u64, y: u64) -> BigRational {
        b(x * x * y * y) * b(x * y + x + y + 1) * r(1, 8)
    }

    /// E(U1 U2^2) = (mn / MN) E(U2^3).
    pub fn null_u1_u2sq(d: &SampleDesign) -> BigRational {
        b(d.m * d.n) / b(d.total_m * d.total_n) * null_third(d.total_m, d.total_n)
    }

    /// The affine null conditional mean E(U2 | U1) = slope * U1 + intercept.
    pub fn null_cond_mean_coeffs(d: &SampleDesign) -> (BigRational, BigRational) {
        let &SampleDesign { m, n, total_m: mm, total_n: nn } = d;
        let slope = b(mm + nn + 1) / b(m + n + 1);
        let intercept = (b((mm - m) * n * (n + 1) + (nn - n) * m * (m + 1)) / b(m + n + 1)
            + b((mm - m) * (nn - n)))
            * r(1, 2);
        (slope, intercept)
    }

    /// E(U1^2 U2) = slope E(U1^3) + intercept E(U1^2).
    pub fn null_u1sq_u2(d: &SampleDesign) -> BigRational {
        let (slope, intercept) = null_cond_mean_coeffs(d);
        slope * null_third(d.m, d.n) + intercept * null_second(d.m, d.n)
    }

    /// The closed quartic polynomial for E(U^4) under the null.
    pub fn null_fourth(x: u64, y: u64) -> BigRational {
        let (x, y) = (b(x), b(y));
        let p = |a: u32, c: u32| -> BigRational {
            let mut v = BigRational::from_integer(1.into());
            for _ in 0..a {
                v = v * x.clone();
            }
            for _ in 0..c {
                v = v * y.clone();
            }
            v
        };
        p(4, 4) * r(1, 16) + p(4, 3) * r(1, 8) + p(4, 2) * r(1, 48) - p(4, 1) * r(1, 120)
            + p(3, 4) * r(1, 8)
            + p(3, 3) * r(1, 6)
            + p(3, 2) * r(1, 40)
            - p(3, 1) * r(1, 60)
            + p(2, 4) * r(1, 48)
            + p(2, 3) * r(1, 40)
            - p(2, 2) * r(1, 240)
            - p(2, 1) * r(1, 120)
            - p(1, 4) * r(1, 120)
            - p(1, 3) * r(1, 60)
            - p(1, 2) * r(1, 120)
    }

    /// E(U1 U2^3) = (mn / MN) E(U2^4).
    pub fn null_u1_u2cube(d: &SampleDesign) -> BigRational {
        b(d.m * d.n) / b(d.total_m * d.total_n) * null_fourth(d.total_m, d.total_n)
    }

    /// E(U1^3 U2) = slope E(U1^4) + intercept E(U1^3).
    pub fn null_u1cube_u2(d: &SampleDesign) -> BigRational {
        let (slope, intercept) = null_cond_mean_coeffs(d);
        slope * null_fourth(d.m, d.n) + intercept * null_third(d.m, d.n)
    }

    /// The closed null polynomial for helper H.
    pub fn null_helper_h(mm: u64, nn: u64) -> BigRational {
        if mm < 2 {
            return BigRational::from_integer(0.into());
        }
        let (m, n) = (b(mm), b(nn));
        let brace = m.clone() * r(5, 4)
            + n.clone() * r(29, 12)
            + (m.clone() * b(2) - b(4)) * (n.clone() - b(1)) * r(3, 20)
            + (n.clone() * b(4) - b(4)) * (m.clone() - b(2)) * r(2, 15)
            + (m.clone() * b(4) - b(8)) * (n.clone() - b(1)) * r(19, 60)
            + (n.clone() * b(2) - b(2)) * (n.clone() - b(2)) * r(17, 60)
            + (m.clone() - b(2)) * (m.clone() - b(3)) * r(1, 5)
            + (m.clone() * r(1, 3) - r(2, 3))
                * (n.clone() - b(1))
                * (m.clone() * r(1, 3) + n.clone() * r(1, 3)
                    + (m.clone() - b(3)) * (n.clone() - b(2)) * r(1, 4)
                    - r(7, 6))
            + (m.clone() * b(2) - b(4)) * (m.clone() - b(3)) * (n.clone() - b(1)) * r(1, 8)
            + (n.clone() * b(4) - b(4)) * (m.clone() - b(2)) * (n.clone() - b(2)) * r(5, 48)
            - r(43, 12);
        m.clone() * n * (m - b(1)) * brace
    }

    /// E(U1^2 U2^2) under the null: the weighted assembly with the closed
    /// null helper polynomials.
    pub fn null_u1sq_u2sq(d: &SampleDesign) -> BigRational {
        let (m, n, mm, nn) = (d.m, d.n, d.total_m, d.total_n);
        let ffb = |x: u64, k: u32| -> BigRational {
            let v: BigRational = falling(x, k);
            v
        };
        let ratio = |num: BigRational, den: BigRational| -> BigRational {
            use num_traits::Zero;
            if num.is_zero() {
                BigRational::zero()
            } else {
                num / den
            }
        };
        let f = ratio(ffb(m, 2) * ffb(n, 2), ffb(mm, 2) * ffb(nn, 2));
        let r00 = b(m * n) / b(mm * nn);
        let r10 = ratio(ffb(m, 2) * b(n), ffb(mm, 2) * b(nn));
        let r01 = ratio(b(m) * ffb(n, 2), b(mm) * ffb(nn, 2));
        (r00 - f.clone()) * null_third(mm, nn)
            + (r10 - f.clone()) * null_helper_h(mm, nn)
            + (r01 - f.clone()) * null_helper_h(nn, mm)
            + f * null_fourth(mm, nn)
    }
}

/// Entry-by-entry reduction check target: `moments_general` at the certified
/// null vector must equal `moments_null` exactly.
pub fn moments_general_at_null(design: &SampleDesign) -> Result<MomentSet<BigRational>> {
    moments_general(design, &null_pi_vector())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pi::null_pi_vector;
    use num_traits::{One, Zero};

    fn design(m: u64, n: u64, mm: u64, nn: u64) -> SampleDesign {
        SampleDesign::new(m, n, mm, nn).unwrap()
    }

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn degenerate_single_pair_is_bernoulli() {
        let d = design(1, 1, 1, 1);
        let mom = moments_null(&d);
        for (_, v) in mom.iter() {
            assert_eq!(*v, r(1, 2));
        }
    }

    #[test]
    fn null_second_moment_at_two_two() {
        assert_eq!(formulas::null_second(2, 2), r(17, 3));
    }

    #[test]
    fn null_cross_moment_small_design() {
        assert_eq!(formulas::null_cross_second(&design(1, 1, 2, 2)), r(17, 12));
    }

    #[test]
    fn frozen_null_moments_2244() {
        let mom = moments_null(&design(2, 2, 4, 4));
        assert_eq!(*mom.get(2, 0), r(17, 3));
        assert_eq!(*mom.get(0, 2), r(76, 1));
        assert_eq!(*mom.get(1, 1), r(19, 1));
        assert_eq!(*mom.get(2, 1), r(172, 3));
        assert_eq!(*mom.get(2, 2), r(9484, 15));
        assert_eq!(*mom.get(3, 1), r(951, 5));
        assert_eq!(*mom.get(1, 3), r(11336, 5));
        assert_eq!(*mom.get(0, 4), r(45344, 5));
    }

    #[test]
    fn general_reduces_to_null_on_a_spot_design() {
        for d in [design(1, 1, 2, 2), design(2, 2, 4, 4), design(3, 2, 5, 4)] {
            let null = moments_null(&d);
            let gen = moments_general_at_null(&d).unwrap();
            for ((k, a), (_, b)) in null.iter().zip(gen.iter()) {
                assert_eq!(a, b, "moment {k:?} of {d:?}");
            }
        }
    }

    #[test]
    fn degenerate_pi_extremes() {
        use num_rational::BigRational as R;
        let d = design(2, 3, 4, 5);
        let ones = PiVector::constant(R::one());
        let mom = moments_general(&d, &ones).unwrap();
        for ((a, b), v) in mom.iter() {
            let expect = BigRational::from_integer(
                ((d.u1_max() as i64).pow(a as u32) * (d.u2_max() as i64).pow(b as u32)).into(),
            );
            assert_eq!(*v, expect, "all-one pis at ({a},{b})");
        }
        let zeros = PiVector::constant(R::zero());
        let mom = moments_general(&d, &zeros).unwrap();
        for (_, v) in mom.iter() {
            assert!(v.is_zero());
        }
    }

    #[test]
    fn pi_domain_checked() {
        let mut bad = null_pi_vector();
        bad[Pi::P4] = r(5, 4);
        assert!(matches!(
            moments_general(&design(1, 1, 2, 2), &bad),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn helper_preconditions_and_frozen_values() {
        let pis = null_pi_vector();
        assert!(helper_h_expectation(&design(1, 1, 1, 2), &pis).is_err());
        assert!(helper_k_expectation(&design(1, 1, 2, 1), &pis).is_err());

        let h21: BigRational = helper_h_expectation(&design(1, 1, 2, 1), &pis).unwrap();
        assert_eq!(h21, r(8, 3));
        let h32: BigRational = helper_h_expectation(&design(1, 1, 3, 2), &pis).unwrap();
        assert_eq!(h32, r(436, 5));
        let k12: BigRational = helper_k_expectation(&design(1, 1, 1, 2), &pis).unwrap();
        assert_eq!(k12, r(8, 3));
        let k23: BigRational = helper_k_expectation(&design(1, 1, 2, 3), &pis).unwrap();
        assert_eq!(k23, r(436, 5));
    }

    #[test]
    fn helper_null_polynomial_matches_general_at_null() {
        let pis = null_pi_vector();
        for mm in 2..7u64 {
            for nn in 1..7u64 {
                let d = design(1, 1, mm, nn);
                let via_pi: BigRational = helper_h_expectation(&d, &pis).unwrap();
                assert_eq!(via_pi, helper_h_null(&d).unwrap(), "H at ({mm},{nn})");
                if nn >= 2 {
                    let via_pi: BigRational = helper_k_expectation(&d, &pis).unwrap();
                    assert_eq!(via_pi, helper_k_null(&d).unwrap(), "K at ({mm},{nn})");
                }
            }
        }
    }

    #[test]
    fn helper_mirror_identity() {
        let pis = null_pi_vector();
        // an asymmetric vector: perturb a few entries within [0,1]
        let mut asym = pis.clone();
        asym[Pi::P1] = r(2, 5);
        asym[Pi::P12] = r(3, 11);
        asym[Pi::P5] = r(1, 7);
        let d = design(2, 2, 5, 4);
        let mirrored_design = design(2, 2, 4, 5);
        let k: BigRational = helper_k_expectation(&d, &asym).unwrap();
        let h: BigRational = helper_h_expectation(&mirrored_design, &mirror_pi(&asym)).unwrap();
        assert_eq!(k, h);
    }

    #[test]
    fn conditional_mean_identity_exact_under_null() {
        for d in [design(1, 1, 2, 2), design(2, 3, 4, 5), design(2, 2, 6, 3)] {
            let mom = moments_null(&d);
            let lhs = mom.get(1, 1).clone();
            let rhs = BigRational::from_integer((d.m * d.n).into())
                / BigRational::from_integer((d.total_m * d.total_n).into())
                * mom.get(0, 2).clone();
            assert_eq!(lhs, rhs, "projection identity at {d:?}");
        }
    }

    #[test]
    fn null_central_third_moment_vanishes() {
        for d in [design(2, 3, 4, 5), design(3, 3, 6, 6)] {
            let mom = moments_null(&d);
            let mu = mom.get(1, 0).clone();
            let centered = mom.get(3, 0).clone()
                - BigRational::from_integer(3.into()) * mom.get(2, 0).clone() * mu.clone()
                + BigRational::from_integer(2.into()) * mu.clone() * mu.clone() * mu;
            assert!(centered.is_zero(), "skewness at {d:?}");
        }
    }

    #[test]
    fn classical_variance_identity() {
        for d in [design(2, 3, 4, 5), design(4, 4, 8, 8)] {
            let mom = moments_null(&d);
            let mu = mom.get(1, 0).clone();
            let var = mom.get(2, 0).clone() - mu.clone() * mu;
            assert_eq!(var, r((d.m * d.n * (d.m + d.n + 1)) as i64, 12));
        }
    }

    #[test]
    fn moment_keys() {
        assert_eq!(moment_key(2, 0), "E_U1_2");
        assert_eq!(moment_key(1, 1), "E_U1_U2");
        assert_eq!(moment_key(0, 4), "E_U2_4");
        assert_eq!(moment_key(2, 1), "E_U1_2_U2");
    }
}
