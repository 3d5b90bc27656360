//! Exact rationals for learning coefficients.
//!
//! Learning coefficients are rational numbers in `[0, d/2]`, and the golden
//! tables for the built-in families must reproduce exactly, so they are kept
//! as reduced integer fractions until the solver converts them to `f64`.
//! The serialized form is `"p/q"`, or just `"p"` when the denominator is 1.

use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use alloc::string::String;

/// A rational number in lowest terms with a positive denominator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rational {
    num: i64,
    den: i64,
}

impl Rational {
    pub const ZERO: Rational = Rational { num: 0, den: 1 };

    /// Reduced fraction `num/den`.
    ///
    /// Panics if `den == 0`; a negative `den` is normalized into the sign of
    /// the numerator.
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "rational denominator must be nonzero");
        let sign = if (num < 0) != (den < 0) && num != 0 {
            -1
        } else {
            1
        };
        let (n, d) = (num.unsigned_abs(), den.unsigned_abs());
        let g = gcd(n, d);
        Rational {
            num: sign * (n / g) as i64,
            den: (d / g) as i64,
        }
    }

    pub const fn from_integer(n: i64) -> Self {
        Rational { num: n, den: 1 }
    }

    pub const fn numerator(self) -> i64 {
        self.num
    }

    pub const fn denominator(self) -> i64 {
        self.den
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub const fn is_negative(self) -> bool {
        self.num < 0
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        // denominators are positive, so cross-multiplication keeps the order
        let lhs = self.num as i128 * other.den as i128;
        let rhs = other.num as i128 * self.den as i128;
        lhs.cmp(&rhs)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal `{0}`")]
pub struct ParseRationalError(pub String);

impl FromStr for Rational {
    type Err = ParseRationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseRationalError(String::from(s));
        let text = s.trim();
        match text.split_once('/') {
            None => text
                .parse::<i64>()
                .map(Rational::from_integer)
                .map_err(|_| bad()),
            Some((p, q)) => {
                let num: i64 = p.trim().parse().map_err(|_| bad())?;
                let den: i64 = q.trim().parse().map_err(|_| bad())?;
                if den <= 0 {
                    return Err(bad());
                }
                Ok(Rational::new(num, den))
            }
        }
    }
}
