//! Small helpers around `BigRational`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

pub fn abs_diff(a: &BigRational, b: &BigRational) -> BigRational {
    (a - b).abs()
}

pub fn sum<'a, I: IntoIterator<Item = &'a BigRational>>(it: I) -> BigRational {
    it.into_iter().fold(BigRational::zero(), |acc, x| acc + x)
}

/// `base^exp` for a nonnegative exponent.
pub fn pow(base: &BigRational, exp: u32) -> BigRational {
    let mut out = BigRational::one();
    for _ in 0..exp {
        out *= base;
    }
    out
}

pub fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Serializes a rational as the string `"p/q"` (or `"p"`).
pub mod serde_rat {
    use std::str::FromStr;

    use num_rational::BigRational;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(q)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let text = String::deserialize(d)?;
        BigRational::from_str(text.trim()).map_err(|_| de::Error::custom(format!("invalid rational {text:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helpers() {
        assert_eq!(rat(2, 4), rat(1, 2));
        assert_eq!(to_f64(&rat(3, 8)), 0.375);
        assert_eq!(pow(&rat(1, 2), 3), rat(1, 8));
        assert_eq!(factorial(5), BigInt::from(120));
        assert_eq!(sum(&[rat(1, 3), rat(2, 3)]), int(1));
    }
}
