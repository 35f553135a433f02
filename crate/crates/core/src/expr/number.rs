use std::cmp::Ordering;
use std::fmt;

use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = Ratio<i64>;

/// Numeric literal: exact rational until something forces floating point.
#[derive(Clone, Copy, Debug)]
pub enum Number {
    Rational(Rational),
    Real(f64),
}

impl Number {
    pub const ZERO: Number = Number::Rational(Ratio::new_raw(0, 1));
    pub const ONE: Number = Number::Rational(Ratio::new_raw(1, 1));
    pub const MINUS_ONE: Number = Number::Rational(Ratio::new_raw(-1, 1));

    pub fn int(n: i64) -> Number {
        Number::Rational(Rational::from_integer(n))
    }

    pub fn ratio(n: i64, d: i64) -> Number {
        Number::Rational(Rational::new(n, d))
    }

    /// Exact when the value is an integer or a short binary fraction, real otherwise.
    pub fn from_f64(v: f64) -> Number {
        if v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15 {
            return Number::int(v as i64);
        }
        for d in [2i64, 4, 8, 16, 32, 64, 128, 256, 1024] {
            let n = v * d as f64;
            if n.is_finite() && n.fract() == 0.0 && n.abs() < 9.0e15 {
                return Number::ratio(n as i64, d);
            }
        }
        Number::Real(v)
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Number::Rational(r) => *r.numer() as f64 / *r.denom() as f64,
            Number::Real(v) => v,
        }
    }

    pub fn is_zero(self) -> bool {
        match self {
            Number::Rational(r) => r.is_zero(),
            Number::Real(v) => v == 0.0,
        }
    }

    pub fn is_one(self) -> bool {
        match self {
            Number::Rational(r) => r.is_one(),
            Number::Real(v) => v == 1.0,
        }
    }

    pub fn is_negative(self) -> bool {
        match self {
            Number::Rational(r) => r.is_negative(),
            Number::Real(v) => v < 0.0,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Number::Rational(_))
    }

    pub fn as_integer(self) -> Option<i64> {
        match self {
            Number::Rational(r) if r.is_integer() => Some(*r.numer()),
            _ => None,
        }
    }

    pub fn abs(self) -> Number {
        match self {
            Number::Rational(r) => Number::Rational(r.abs()),
            Number::Real(v) => Number::Real(v.abs()),
        }
    }

    pub fn neg(self) -> Number {
        match self {
            Number::Rational(r) => r
                .numer()
                .checked_neg()
                .map(|n| Number::Rational(Rational::new_raw(n, *r.denom())))
                .unwrap_or(Number::Real(-self.to_f64())),
            Number::Real(v) => Number::Real(-v),
        }
    }

    pub fn add(self, other: Number) -> Number {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => checked_add(a, b)
                .map(Number::Rational)
                .unwrap_or_else(|| Number::Real(self.to_f64() + other.to_f64())),
            _ => Number::Real(self.to_f64() + other.to_f64()),
        }
    }

    pub fn mul(self, other: Number) -> Number {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => checked_mul(a, b)
                .map(Number::Rational)
                .unwrap_or_else(|| Number::Real(self.to_f64() * other.to_f64())),
            _ => Number::Real(self.to_f64() * other.to_f64()),
        }
    }

    pub fn recip(self) -> Option<Number> {
        if self.is_zero() {
            return None;
        }
        Some(match self {
            Number::Rational(r) => Number::Rational(r.recip()),
            Number::Real(v) => Number::Real(1.0 / v),
        })
    }

    /// Integer power; `None` for 0 raised to a negative power.
    pub fn powi(self, n: i64) -> Option<Number> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut acc = Number::ONE;
        let mut base = self;
        let mut e = n as u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(base);
            }
        }
        Some(acc)
    }

    /// Exact `n`-th root of a non-negative rational when it exists.
    pub fn exact_root(self, n: u32) -> Option<Number> {
        let Number::Rational(r) = self else { return None };
        if r.is_negative() {
            return None;
        }
        let num = int_root(*r.numer(), n)?;
        let den = int_root(*r.denom(), n)?;
        Some(Number::Rational(Rational::new(num, den)))
    }

    pub fn total_cmp(&self, other: &Number) -> Ordering {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => a.cmp(b),
            (Number::Rational(_), Number::Real(_)) => Ordering::Less,
            (Number::Real(_), Number::Rational(_)) => Ordering::Greater,
            (Number::Real(a), Number::Real(b)) => a.total_cmp(b),
        }
    }
}

fn checked_add(a: Rational, b: Rational) -> Option<Rational> {
    let (an, ad) = (*a.numer() as i128, *a.denom() as i128);
    let (bn, bd) = (*b.numer() as i128, *b.denom() as i128);
    reduce_i128(an * bd + bn * ad, ad * bd)
}

fn checked_mul(a: Rational, b: Rational) -> Option<Rational> {
    let (an, ad) = (*a.numer() as i128, *a.denom() as i128);
    let (bn, bd) = (*b.numer() as i128, *b.denom() as i128);
    reduce_i128(an * bn, ad * bd)
}

fn reduce_i128(n: i128, d: i128) -> Option<Rational> {
    fn gcd(mut a: i128, mut b: i128) -> i128 {
        while b != 0 {
            let t = a % b;
            a = b;
            b = t;
        }
        a.abs()
    }
    let g = gcd(n, d).max(1);
    let (mut n, mut d) = (n / g, d / g);
    if d < 0 {
        n = -n;
        d = -d;
    }
    Some(Rational::new_raw(n.to_i64()?, d.to_i64()?))
}

fn int_root(v: i64, n: u32) -> Option<i64> {
    if v < 0 {
        return None;
    }
    let guess = (v as f64).powf(1.0 / n as f64).round() as i64;
    (guess.saturating_sub(1)..=guess + 1)
        .find(|&g| g >= 0 && g.checked_pow(n) == Some(v))
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        self.total_cmp(other) == Ordering::Equal
    }
}

impl Eq for Number {}

impl std::hash::Hash for Number {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        match self {
            Number::Rational(r) => {
                0u8.hash(state);
                r.numer().hash(state);
                r.denom().hash(state);
            }
            Number::Real(v) => {
                1u8.hash(state);
                v.to_bits().hash(state);
            }
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Rational(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Number::Rational(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Number::Real(v) => {
                if v.fract() == 0.0 && v.abs() < 1e15 {
                    write!(f, "{v:.1}")
                } else {
                    write!(f, "{v:?}")
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_arithmetic_stays_exact() {
        let half = Number::ratio(1, 2);
        assert_eq!(half.add(half), Number::ONE);
        assert_eq!(half.mul(Number::int(4)), Number::int(2));
        assert_eq!(Number::ratio(2, 3).powi(-2), Some(Number::ratio(9, 4)));
    }

    #[test]
    fn overflow_falls_back_to_real() {
        let big = Number::int(i64::MAX / 2);
        let sum = big.add(big).add(big);
        assert!(!sum.is_exact());
        assert!((sum.to_f64() - 1.5 * (i64::MAX as f64)).abs() / sum.to_f64() < 1e-12);
    }

    #[test]
    fn roots() {
        assert_eq!(Number::ratio(9, 4).exact_root(2), Some(Number::ratio(3, 2)));
        assert_eq!(Number::int(2).exact_root(2), None);
        assert_eq!(Number::int(0).powi(-1), None);
    }
}
