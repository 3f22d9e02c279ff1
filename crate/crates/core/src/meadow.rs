//! Exact arithmetic in the signed cancellation meadow of the rationals.
//!
//! Every probability, jump count argument and reply threshold in the crate is a
//! [`Rational`]. Division is total: the inverse of zero is zero.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact fraction in lowest terms with a positive denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

impl Rational {
    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn half() -> Self {
        Rational::new(1, 2)
    }

    /// `num / den`, with a zero denominator yielding zero (meadow division).
    pub fn new(num: i64, den: i64) -> Self {
        Rational::from_bigints(BigInt::from(num), BigInt::from(den))
    }

    pub fn from_bigints(num: BigInt, den: BigInt) -> Self {
        if den.is_zero() {
            return Rational::zero();
        }
        Rational(BigRational::new(num, den))
    }

    pub fn from_integer(n: impl Into<BigInt>) -> Self {
        Rational(BigRational::from_integer(n.into()))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    /// Total multiplicative inverse: `minv(0) = 0`.
    pub fn minv(&self) -> Rational {
        if self.is_zero() {
            Rational::zero()
        } else {
            Rational(self.0.recip())
        }
    }

    pub fn signum(&self) -> Rational {
        match self.0.numer().sign() {
            Sign::Minus => -Rational::one(),
            Sign::NoSign => Rational::zero(),
            Sign::Plus => Rational::one(),
        }
    }

    pub fn min(&self, other: &Rational) -> Rational {
        if self <= other {
            self.clone()
        } else {
            other.clone()
        }
    }

    pub fn max(&self, other: &Rational) -> Rational {
        if self >= other {
            self.clone()
        } else {
            other.clone()
        }
    }

    /// Clamp into `[0, 1]`: `max(0, min(1, q))`.
    pub fn mkprob(&self) -> Rational {
        Rational::max(&Rational::zero(), &Rational::min(&Rational::one(), self))
    }

    /// The natural number this value is the numeral of, if any.
    pub fn as_natural(&self) -> Option<BigUint> {
        if self.is_integer() && !self.0.is_negative() {
            self.numer().to_biguint()
        } else {
            None
        }
    }

    /// [`Rational::as_natural`] narrowed to `usize`.
    pub fn as_usize(&self) -> Option<usize> {
        self.as_natural().and_then(|n| n.to_usize())
    }

    /// `self^n` by repeated multiplication semantics (`p^0 = 1`).
    pub fn pow(&self, n: u32) -> Rational {
        Rational(num_traits::pow(self.0.clone(), n as usize))
    }

    /// Always `num/den`, including integers (`1/1`, `0/1`).
    pub fn to_fraction_string(&self) -> String {
        format!("{}/{}", self.numer(), self.denom())
    }

    /// Decimal rendering rounded half away from zero, computed without floating point.
    pub fn to_decimal_string(&self, places: usize) -> String {
        let scale = num_traits::pow(BigInt::from(10), places);
        let num: BigInt = self.numer().abs() * &scale * 2 + self.denom();
        let scaled: BigInt = num / (self.denom() * 2);
        let digits = scaled.to_string();
        let digits = if digits.len() <= places {
            format!("{}{}", "0".repeat(places + 1 - digits.len()), digits)
        } else {
            digits
        };
        let (int, frac) = digits.split_at(digits.len() - places);
        let sign = if self.0.is_negative() && scaled_nonzero(&digits) { "-" } else { "" };
        if places == 0 {
            format!("{sign}{int}")
        } else {
            format!("{sign}{int}.{frac}")
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

fn scaled_nonzero(digits: &str) -> bool {
    digits.bytes().any(|b| b != b'0')
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_integer(n)
    }
}

impl From<i32> for Rational {
    fn from(n: i32) -> Self {
        Rational::from_integer(n)
    }
}

impl From<usize> for Rational {
    fn from(n: usize) -> Self {
        Rational::from_integer(BigInt::from(n))
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
        impl<'a> $trait<&'a Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational(self.0.$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl std::iter::Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl<'a> std::iter::Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

/// Total division `x · y⁻¹`.
pub fn div(x: &Rational, y: &Rational) -> Rational {
    x * &y.minv()
}

pub fn minv(x: &Rational) -> Rational {
    x.minv()
}

pub fn signum(x: &Rational) -> Rational {
    x.signum()
}

pub fn min(x: &Rational, y: &Rational) -> Rational {
    x.min(y)
}

pub fn max(x: &Rational, y: &Rational) -> Rational {
    x.max(y)
}

pub fn mkprob(q: &Rational) -> Rational {
    q.mkprob()
}

pub fn as_natural(q: &Rational) -> Option<BigUint> {
    q.as_natural()
}

/// The numeral `n`: `0` and `n + 1 = n + 1`.
pub fn numeral(n: u64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Terms over the meadow signature plus its usual abbreviations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MeadowExpr {
    Zero,
    One,
    Add(Box<MeadowExpr>, Box<MeadowExpr>),
    Mul(Box<MeadowExpr>, Box<MeadowExpr>),
    Neg(Box<MeadowExpr>),
    Inv(Box<MeadowExpr>),
    Signum(Box<MeadowExpr>),
    Sub(Box<MeadowExpr>, Box<MeadowExpr>),
    Div(Box<MeadowExpr>, Box<MeadowExpr>),
    Numeral(BigUint),
    PowNat(Box<MeadowExpr>, u32),
}

impl MeadowExpr {
    pub fn numeral(n: u64) -> Self {
        MeadowExpr::Numeral(BigUint::from(n))
    }

    pub fn eval(&self) -> Rational {
        eval(self)
    }
}

pub fn eval(e: &MeadowExpr) -> Rational {
    use MeadowExpr::*;
    match e {
        Zero => Rational::zero(),
        One => Rational::one(),
        Add(a, b) => eval(a) + eval(b),
        Mul(a, b) => eval(a) * eval(b),
        Neg(a) => -eval(a),
        Inv(a) => eval(a).minv(),
        Signum(a) => eval(a).signum(),
        Sub(a, b) => eval(a) - eval(b),
        Div(a, b) => div(&eval(a), &eval(b)),
        Numeral(n) => Rational::from_integer(BigInt::from(n.clone())),
        PowNat(a, n) => eval(a).pow(*n),
    }
}

impl PartialEq<i64> for Rational {
    fn eq(&self, other: &i64) -> bool {
        self.0 == BigRational::from_integer(BigInt::from(*other))
    }
}

impl PartialOrd<i64> for Rational {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        self.0.partial_cmp(&BigRational::from_integer(BigInt::from(*other)))
    }
}
