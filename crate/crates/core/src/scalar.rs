use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed};

/// Scalar type the moment and cumulant engines are generic over.
///
/// `f64` gives the floating general mode; [`BigRational`] gives the exact
/// mode used for null formulas and for the oracle's equality checks.
pub trait Scalar: Num + Clone + PartialOrd + Signed + FromPrimitive {
    fn from_count(c: u64) -> Self {
        Self::from_u64(c).expect("count representable in scalar type")
    }

    fn from_int(c: i64) -> Self {
        Self::from_i64(c).expect("integer representable in scalar type")
    }

    /// Exact ratio a/b; used for rational constants like 5/24.
    fn ratio(a: i64, b: i64) -> Self {
        Self::from_int(a) / Self::from_int(b)
    }
}

impl<T> Scalar for T where T: Num + Clone + PartialOrd + Signed + FromPrimitive {}

/// Falling factorial x(x-1)...(x-k+1) in the scalar domain.
pub fn falling<T: Scalar>(x: u64, k: u32) -> T {
    if u64::from(k) > x {
        return T::zero();
    }
    let mut out = T::one();
    for t in 0..u64::from(k) {
        out = out * T::from_count(x - t);
    }
    out
}

/// Exact conversion of an `f64` in (0,1) to a rational (used so that alpha
/// thresholds compare exactly against enumerated tail probabilities).
pub fn rational_from_f64(x: f64) -> Option<BigRational> {
    BigRational::from_float(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    #[test]
    fn falling_factorials() {
        assert_eq!(falling::<f64>(5, 2), 20.0);
        assert_eq!(falling::<f64>(5, 0), 1.0);
        assert_eq!(falling::<f64>(2, 3), 0.0);
        assert_eq!(falling::<f64>(0, 1), 0.0);
        let r: BigRational = falling(6, 3);
        assert_eq!(r, BigRational::from_integer(120.into()));
    }

    #[test]
    fn exact_alpha_conversion() {
        let r = rational_from_f64(0.5).unwrap();
        assert_eq!(r, BigRational::new(1.into(), 2.into()));
    }
}
