//! Mixed cumulants of (U1, U2) from the raw-moment set, via the explicit
//! closed forms obtained by differentiating log M(t1, t2) at the origin.
//! The generic recursive moment-to-cumulant identities live in the oracle
//! module as the independent cross-check.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{MomentSet, MOMENT_ORDERS};
use crate::scalar::Scalar;

/// The (r, s) orders of the fourteen mixed cumulants, 1 <= r+s <= 4.
pub const CUMULANT_ORDERS: [(u8, u8); 14] = MOMENT_ORDERS;

/// Mixed cumulants kappa_{r,s} up to total order 4.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantSet<T> {
    values: [T; 14],
}

impl<T: Clone> CumulantSet<T> {
    pub fn from_fn(mut f: impl FnMut(u8, u8) -> T) -> Self {
        CumulantSet { values: CUMULANT_ORDERS.map(|(r, s)| f(r, s)) }
    }

    pub fn get(&self, r: u8, s: u8) -> &T {
        &self.values[crate::moments::moment_slot(r, s)]
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u8, u8), &T)> {
        CUMULANT_ORDERS.iter().copied().zip(self.values.iter())
    }

    pub fn map<U: Clone>(&self, mut f: impl FnMut(&T) -> U) -> CumulantSet<U> {
        CumulantSet { values: CUMULANT_ORDERS.map(|(r, s)| f(self.get(r, s))) }
    }
}

impl CumulantSet<BigRational> {
    pub fn to_f64(&self) -> CumulantSet<f64> {
        self.map(|r| r.to_f64().expect("cumulant fits in f64"))
    }
}

/// All fourteen mixed cumulants from the raw moments.
pub fn mixed_cumulants<T: Scalar>(moments: &MomentSet<T>) -> CumulantSet<T> {
    let mu = |a: u8, b: u8| moments.get(a, b).clone();
    let k = |x: i64| T::from_int(x);
    CumulantSet::from_fn(|r, s| match (r, s) {
        (1, 0) => mu(1, 0),
        (0, 1) => mu(0, 1),
        (2, 0) => mu(2, 0) - mu(1, 0) * mu(1, 0),
        (0, 2) => mu(0, 2) - mu(0, 1) * mu(0, 1),
        (1, 1) => mu(1, 1) - mu(1, 0) * mu(0, 1),
        (3, 0) => {
            mu(3, 0) - k(3) * mu(2, 0) * mu(1, 0) + k(2) * mu(1, 0) * mu(1, 0) * mu(1, 0)
        }
        (0, 3) => {
            mu(0, 3) - k(3) * mu(0, 2) * mu(0, 1) + k(2) * mu(0, 1) * mu(0, 1) * mu(0, 1)
        }
        (2, 1) => {
            mu(2, 1) - mu(2, 0) * mu(0, 1) - k(2) * mu(1, 1) * mu(1, 0)
                + k(2) * mu(1, 0) * mu(1, 0) * mu(0, 1)
        }
        (1, 2) => {
            mu(1, 2) - mu(0, 2) * mu(1, 0) - k(2) * mu(1, 1) * mu(0, 1)
                + k(2) * mu(0, 1) * mu(0, 1) * mu(1, 0)
        }
        (4, 0) => {
            mu(4, 0) - k(4) * mu(1, 0) * mu(3, 0) - k(3) * mu(2, 0) * mu(2, 0)
                + k(12) * mu(1, 0) * mu(1, 0) * mu(2, 0)
                - k(6) * mu(1, 0) * mu(1, 0) * mu(1, 0) * mu(1, 0)
        }
        (0, 4) => {
            mu(0, 4) - k(4) * mu(0, 1) * mu(0, 3) - k(3) * mu(0, 2) * mu(0, 2)
                + k(12) * mu(0, 1) * mu(0, 1) * mu(0, 2)
                - k(6) * mu(0, 1) * mu(0, 1) * mu(0, 1) * mu(0, 1)
        }
        (3, 1) => {
            mu(3, 1) - mu(3, 0) * mu(0, 1) - k(3) * mu(2, 1) * mu(1, 0)
                - k(3) * mu(2, 0) * mu(1, 1)
                + k(6) * mu(2, 0) * mu(1, 0) * mu(0, 1)
                + k(6) * mu(1, 1) * mu(1, 0) * mu(1, 0)
                - k(6) * mu(1, 0) * mu(1, 0) * mu(1, 0) * mu(0, 1)
        }
        (1, 3) => {
            mu(1, 3) - mu(0, 3) * mu(1, 0) - k(3) * mu(1, 2) * mu(0, 1)
                - k(3) * mu(0, 2) * mu(1, 1)
                + k(6) * mu(0, 2) * mu(0, 1) * mu(1, 0)
                + k(6) * mu(1, 1) * mu(0, 1) * mu(0, 1)
                - k(6) * mu(0, 1) * mu(0, 1) * mu(0, 1) * mu(1, 0)
        }
        (2, 2) => {
            mu(2, 2) - k(2) * mu(1, 2) * mu(1, 0) - k(2) * mu(2, 1) * mu(0, 1)
                - mu(2, 0) * mu(0, 2)
                - k(2) * mu(1, 1) * mu(1, 1)
                + k(2) * mu(1, 0) * mu(1, 0) * mu(0, 2)
                + k(2) * mu(0, 1) * mu(0, 1) * mu(2, 0)
                + k(8) * mu(1, 0) * mu(0, 1) * mu(1, 1)
                - k(6) * mu(1, 0) * mu(1, 0) * mu(0, 1) * mu(0, 1)
        }
        _ => unreachable!(),
    })
}

/// Coefficient convention for the order-wise aggregates k1..k4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weighting {
    /// Unit coefficients: each order's mixed partials summed as written.
    Paper,
    /// Binomial coefficients C(r, s): the cumulants of U1 + U2.
    Binomial,
}

/// The four order-wise aggregates of the mixed cumulants.
#[derive(Debug, Clone, PartialEq)]
pub struct PaperAggregates<T> {
    pub k1: T,
    pub k2: T,
    pub k3: T,
    pub k4: T,
    pub weighting: Weighting,
}

pub fn paper_aggregates<T: Scalar>(c: &CumulantSet<T>, weighting: Weighting) -> PaperAggregates<T> {
    let k = |r: u8, s: u8| c.get(r, s).clone();
    let w = |x: i64| T::from_int(x);
    match weighting {
        Weighting::Paper => PaperAggregates {
            k1: k(1, 0) + k(0, 1),
            k2: k(2, 0) + k(1, 1) + k(0, 2),
            k3: k(3, 0) + k(2, 1) + k(1, 2) + k(0, 3),
            k4: k(4, 0) + k(3, 1) + k(2, 2) + k(1, 3) + k(0, 4),
            weighting,
        },
        Weighting::Binomial => PaperAggregates {
            k1: k(1, 0) + k(0, 1),
            k2: k(2, 0) + w(2) * k(1, 1) + k(0, 2),
            k3: k(3, 0) + w(3) * k(2, 1) + w(3) * k(1, 2) + k(0, 3),
            k4: k(4, 0) + w(4) * k(3, 1) + w(6) * k(2, 2) + w(4) * k(1, 3) + k(0, 4),
            weighting,
        },
    }
}

/// Which one-dimensional distribution to standardize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShapeTarget {
    Stage1,
    Stage2,
    AggregatePaper,
    AggregateBinomial,
}

/// (mean, variance, skewness, excess kurtosis) for the Cornish-Fisher input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

pub fn standardized_shape<T: Scalar + ToPrimitive>(
    c: &CumulantSet<T>,
    which: ShapeTarget,
) -> Result<Shape> {
    let f = |v: &T| v.to_f64().expect("cumulant fits in f64");
    let (k1, k2, k3, k4) = match which {
        ShapeTarget::Stage1 => (f(c.get(1, 0)), f(c.get(2, 0)), f(c.get(3, 0)), f(c.get(4, 0))),
        ShapeTarget::Stage2 => (f(c.get(0, 1)), f(c.get(0, 2)), f(c.get(0, 3)), f(c.get(0, 4))),
        ShapeTarget::AggregatePaper => {
            let a = paper_aggregates(c, Weighting::Paper);
            (f(&a.k1), f(&a.k2), f(&a.k3), f(&a.k4))
        }
        ShapeTarget::AggregateBinomial => {
            let a = paper_aggregates(c, Weighting::Binomial);
            (f(&a.k1), f(&a.k2), f(&a.k3), f(&a.k4))
        }
    };
    if k2 <= 0.0 {
        return Err(Error::Degenerate);
    }
    Ok(Shape {
        mean: k1,
        variance: k2,
        skewness: k3 / k2.powf(1.5),
        excess_kurtosis: k4 / (k2 * k2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{moments_general, moments_null};
    use crate::pi::PiVector;
    use crate::ustat::SampleDesign;
    use num_traits::{One, Zero};

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn bernoulli_cumulants() {
        let d = SampleDesign::new(1, 1, 1, 1).unwrap();
        let c = mixed_cumulants(&moments_null(&d));
        assert_eq!(*c.get(2, 0), r(1, 4));
        assert_eq!(*c.get(1, 1), r(1, 4));
        assert_eq!(*c.get(4, 0), r(-1, 8));
        assert_eq!(*c.get(3, 0), r(0, 1));
    }

    #[test]
    fn small_design_covariance() {
        let d = SampleDesign::new(1, 1, 2, 2).unwrap();
        let c = mixed_cumulants(&moments_null(&d));
        assert_eq!(*c.get(1, 1), r(5, 12));
        let agg = paper_aggregates(&c, Weighting::Paper);
        assert_eq!(agg.k1, r(5, 2));
    }

    #[test]
    fn point_mass_kills_higher_cumulants() {
        let d = SampleDesign::new(2, 2, 3, 3).unwrap();
        let ones = PiVector::constant(BigRational::one());
        let c = mixed_cumulants(&moments_general(&d, &ones).unwrap());
        assert_eq!(*c.get(1, 0), r(4, 1));
        assert_eq!(*c.get(0, 1), r(9, 1));
        for ((r_, s), v) in c.iter() {
            if r_ + s >= 2 {
                assert!(v.is_zero(), "kappa({r_},{s}) = {v}");
            }
        }
        let agg = paper_aggregates(&c, Weighting::Paper);
        assert!(agg.k2.is_zero() && agg.k3.is_zero() && agg.k4.is_zero());
        let agg = paper_aggregates(&c, Weighting::Binomial);
        assert!(agg.k2.is_zero() && agg.k3.is_zero() && agg.k4.is_zero());
    }

    #[test]
    fn weightings_differ_by_covariance() {
        let d = SampleDesign::new(2, 2, 4, 4).unwrap();
        let c = mixed_cumulants(&moments_null(&d));
        let p = paper_aggregates(&c, Weighting::Paper);
        let b = paper_aggregates(&c, Weighting::Binomial);
        assert_eq!(b.k2 - p.k2, *c.get(1, 1));
        assert!(!c.get(1, 1).is_zero());
    }

    #[test]
    fn null_marginal_variance_and_odd_cumulants() {
        for (m, n, mm, nn) in [(2, 3, 4, 5), (3, 3, 6, 6)] {
            let d = SampleDesign::new(m, n, mm, nn).unwrap();
            let c = mixed_cumulants(&moments_null(&d));
            assert_eq!(*c.get(2, 0), r((m * n * (m + n + 1)) as i64, 12));
            assert!(c.get(3, 0).is_zero());
            assert!(c.get(0, 3).is_zero());
        }
    }

    #[test]
    fn shapes() {
        let d = SampleDesign::new(1, 1, 1, 1).unwrap();
        let c = mixed_cumulants(&moments_null(&d));
        let s = standardized_shape(&c, ShapeTarget::Stage1).unwrap();
        assert_eq!(s.mean, 0.5);
        assert_eq!(s.variance, 0.25);
        assert_eq!(s.skewness, 0.0);
        assert_eq!(s.excess_kurtosis, -2.0);

        let d = SampleDesign::new(4, 4, 4, 4).unwrap();
        let c = mixed_cumulants(&moments_null(&d));
        let s = standardized_shape(&c, ShapeTarget::Stage1).unwrap();
        assert_eq!(s.skewness, 0.0);

        let ones = PiVector::constant(BigRational::one());
        let c = mixed_cumulants(&moments_general(&d, &ones).unwrap());
        assert!(matches!(standardized_shape(&c, ShapeTarget::Stage1), Err(Error::Degenerate)));
    }
}
