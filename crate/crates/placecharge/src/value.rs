//! Values carried by charges: exact closed forms with a float fallback.
//!
//! Charges and simple functions take values in the span of 1, log p, and
//! 1/log p over the rationals. Four shapes cover everything the crate
//! computes with: a plain rational, a rational over a single log, a
//! rational-linear combination of logs with a rational constant, and a
//! float for anything that leaves the exact span. Addition and pairing stay
//! exact whenever the result lands back in one of the exact shapes and fall
//! back to floats otherwise, so exactness degrades only at genuinely
//! transcendental combinations.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::arith;

/// Relative tolerance used whenever two values must agree but at least one
/// of them is a float.
pub const VALUE_REL_TOL: f64 = 1e-12;

#[derive(Clone, PartialEq, Debug)]
pub enum MapValue {
    /// An exact rational.
    Rational(BigRational),
    /// num / log(prime), exactly.
    RationalOverLog { num: BigRational, prime: u64 },
    /// constant + sum of coeff * log(prime), exactly. Zero coefficients are
    /// never stored. An empty sum is kept as is, not demoted to `Rational`.
    LogLinear {
        constant: BigRational,
        coefficients: BTreeMap<u64, BigRational>,
    },
    /// Anything outside the exact shapes.
    Float(f64),
}

/// Normal form shared by the exact shapes, used for semantic comparison.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ExactForm {
    pub constant: BigRational,
    pub logs: BTreeMap<u64, BigRational>,
    pub over_logs: BTreeMap<u64, BigRational>,
}

impl MapValue {
    pub fn zero() -> MapValue {
        MapValue::Rational(BigRational::zero())
    }

    pub fn from_integer(n: i64) -> MapValue {
        MapValue::Rational(BigRational::from_integer(n.into()))
    }

    pub fn ratio(num: i64, den: i64) -> MapValue {
        MapValue::Rational(BigRational::new(num.into(), den.into()))
    }

    pub fn rational(q: BigRational) -> MapValue {
        MapValue::Rational(q)
    }

    pub fn over_log(num: BigRational, prime: u64) -> MapValue {
        assert!(arith::is_prime(prime), "{prime} is not a prime");
        MapValue::RationalOverLog { num, prime }
    }

    /// Builds the log-linear shape, dropping zero coefficients.
    pub fn log_linear(constant: BigRational, coefficients: BTreeMap<u64, BigRational>) -> MapValue {
        let coefficients: BTreeMap<u64, BigRational> = coefficients
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .collect();
        for p in coefficients.keys() {
            assert!(arith::is_prime(*p), "{p} is not a prime");
        }
        MapValue::LogLinear {
            constant,
            coefficients,
        }
    }

    /// log(prime) itself.
    pub fn log_of(prime: u64) -> MapValue {
        MapValue::log_linear(
            BigRational::zero(),
            BTreeMap::from([(prime, BigRational::from_integer(1.into()))]),
        )
    }

    pub fn float(x: f64) -> MapValue {
        MapValue::Float(x)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            MapValue::Rational(q) => q.is_zero(),
            MapValue::RationalOverLog { num, .. } => num.is_zero(),
            MapValue::LogLinear {
                constant,
                coefficients,
            } => constant.is_zero() && coefficients.is_empty(),
            MapValue::Float(x) => *x == 0.0,
        }
    }

    pub fn is_float(&self) -> bool {
        matches!(self, MapValue::Float(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            MapValue::Rational(q) => q.to_f64().unwrap_or(f64::NAN),
            MapValue::RationalOverLog { num, prime } => {
                num.to_f64().unwrap_or(f64::NAN) / (*prime as f64).ln()
            }
            MapValue::LogLinear {
                constant,
                coefficients,
            } => {
                let mut acc = constant.to_f64().unwrap_or(f64::NAN);
                for (p, c) in coefficients {
                    acc += c.to_f64().unwrap_or(f64::NAN) * (*p as f64).ln();
                }
                acc
            }
            MapValue::Float(x) => *x,
        }
    }

    /// The shared normal form, when this value is exact.
    pub fn exact_form(&self) -> Option<ExactForm> {
        let mut form = ExactForm {
            constant: BigRational::zero(),
            logs: BTreeMap::new(),
            over_logs: BTreeMap::new(),
        };
        match self {
            MapValue::Rational(q) => form.constant = q.clone(),
            MapValue::RationalOverLog { num, prime } => {
                if !num.is_zero() {
                    form.over_logs.insert(*prime, num.clone());
                }
            }
            MapValue::LogLinear {
                constant,
                coefficients,
            } => {
                form.constant = constant.clone();
                form.logs = coefficients.clone();
            }
            MapValue::Float(_) => return None,
        }
        Some(form)
    }

    /// Sum, exact whenever the result fits an exact shape.
    pub fn add(&self, other: &MapValue) -> MapValue {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        use MapValue::*;
        match (self, other) {
            (Rational(a), Rational(b)) => Rational(a + b),
            (Rational(a), LogLinear { constant, coefficients })
            | (LogLinear { constant, coefficients }, Rational(a)) => LogLinear {
                constant: constant + a,
                coefficients: coefficients.clone(),
            },
            (
                LogLinear {
                    constant: c1,
                    coefficients: m1,
                },
                LogLinear {
                    constant: c2,
                    coefficients: m2,
                },
            ) => {
                let mut merged = m1.clone();
                for (p, c) in m2 {
                    let entry = merged.entry(*p).or_insert_with(BigRational::zero);
                    *entry += c;
                }
                MapValue::log_linear(c1 + c2, merged)
            }
            (
                RationalOverLog { num: n1, prime: p1 },
                RationalOverLog { num: n2, prime: p2 },
            ) if p1 == p2 => RationalOverLog {
                num: n1 + n2,
                prime: *p1,
            },
            _ => Float(self.to_f64() + other.to_f64()),
        }
    }

    /// Product, used to pair a function value against a charge value. Exact
    /// in the cases that land back in an exact shape: rational times
    /// anything, and 1/log(p) against a pure multiple of log(p).
    pub fn mul(&self, other: &MapValue) -> MapValue {
        if self.is_zero() || other.is_zero() {
            return MapValue::zero();
        }
        use MapValue::*;
        match (self, other) {
            (Rational(a), v) | (v, Rational(a)) => v.scale(a),
            (
                RationalOverLog { num, prime },
                LogLinear {
                    constant,
                    coefficients,
                },
            )
            | (
                LogLinear {
                    constant,
                    coefficients,
                },
                RationalOverLog { num, prime },
            ) if constant.is_zero()
                && coefficients.len() == 1
                && coefficients.contains_key(prime) =>
            {
                Rational(num * &coefficients[prime])
            }
            (LogLinear { constant, coefficients }, v)
            | (v, LogLinear { constant, coefficients })
                if coefficients.is_empty() =>
            {
                v.scale(constant)
            }
            _ => Float(self.to_f64() * other.to_f64()),
        }
    }

    /// Multiplication by a rational, exact for every shape.
    pub fn scale(&self, factor: &BigRational) -> MapValue {
        if factor.is_zero() {
            return MapValue::zero();
        }
        match self {
            MapValue::Rational(q) => MapValue::Rational(q * factor),
            MapValue::RationalOverLog { num, prime } => MapValue::RationalOverLog {
                num: num * factor,
                prime: *prime,
            },
            MapValue::LogLinear {
                constant,
                coefficients,
            } => MapValue::LogLinear {
                constant: constant * factor,
                coefficients: coefficients.iter().map(|(p, c)| (*p, c * factor)).collect(),
            },
            MapValue::Float(x) => MapValue::Float(x * factor.to_f64().unwrap_or(f64::NAN)),
        }
    }

    pub fn neg(&self) -> MapValue {
        self.scale(&BigRational::from_integer((-1).into()))
    }

    /// Agreement up to the given relative float tolerance: exact values
    /// compare by normal form, anything involving a float compares as
    /// |x - y| <= tol * max(1, |x|, |y|).
    pub fn agrees_within(&self, other: &MapValue, rel_tol: f64) -> bool {
        match (self.exact_form(), other.exact_form()) {
            (Some(a), Some(b)) => a == b,
            _ => {
                let x = self.to_f64();
                let y = other.to_f64();
                (x - y).abs() <= rel_tol * x.abs().max(y.abs()).max(1.0)
            }
        }
    }
}

impl std::iter::Sum for MapValue {
    fn sum<I: Iterator<Item = MapValue>>(iter: I) -> MapValue {
        iter.fold(MapValue::zero(), |acc, v| acc.add(&v))
    }
}

impl From<BigRational> for MapValue {
    fn from(q: BigRational) -> MapValue {
        MapValue::Rational(q)
    }
}

fn fmt_rational_factor(q: &BigRational) -> String {
    if q.is_integer() {
        format!("{}", q.numer())
    } else {
        format!("({q})")
    }
}

impl fmt::Display for MapValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapValue::Rational(q) => write!(f, "{q}"),
            MapValue::RationalOverLog { num, prime } => {
                write!(f, "{}/log({prime})", fmt_rational_factor(num))
            }
            MapValue::LogLinear {
                constant,
                coefficients,
            } => {
                if constant.is_zero() && coefficients.is_empty() {
                    return write!(f, "0");
                }
                let mut first = true;
                if !constant.is_zero() || coefficients.is_empty() {
                    write!(f, "{constant}")?;
                    first = false;
                }
                for (p, c) in coefficients {
                    if first {
                        if c.is_negative() {
                            write!(f, "-")?;
                        }
                        first = false;
                    } else if c.is_negative() {
                        write!(f, " - ")?;
                    } else {
                        write!(f, " + ")?;
                    }
                    let mag = c.abs();
                    if mag == BigRational::from_integer(1.into()) {
                        write!(f, "log({p})")?;
                    } else {
                        write!(f, "{}*log({p})", fmt_rational_factor(&mag))?;
                    }
                }
                Ok(())
            }
            MapValue::Float(x) => write!(f, "≈ {}", fmt_sig(*x)),
        }
    }
}

/// Formats a float to 12 significant digits, trimming trailing zeros, with
/// scientific notation outside a comfortable positional range.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..DIGITS).contains(&mag) {
        let decimals = (DIGITS - 1 - mag).max(0) as usize;
        trim_decimal(format!("{x:.decimals$}"))
    } else {
        let s = format!("{:.*e}", (DIGITS - 1) as usize, x);
        match s.split_once('e') {
            Some((m, e)) => format!("{}e{}", trim_decimal(m.to_string()), e),
            None => s,
        }
    }
}

fn trim_decimal(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
