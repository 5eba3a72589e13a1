//! Integration of simple functions against consistent charges.
//!
//! A simple function is presented at a single level `n`: finitely many places
//! of level `n` carry values, every other place of that level carries zero,
//! and the function extends to deeper levels as a locally constant function
//! (each place takes the value of its restriction).  The pairing with a
//! charge `c` is the finite sum
//!
//! ```text
//! ∫ f dc = Σ_w f(w) · c(w)
//! ```
//!
//! over the support of `f`, and it is invariant under re-presenting `f` at a
//! deeper level because `c` sums over fibers.
//!
//! A multiplicative element contributes the profile of its logarithmic
//! absolute values: a positive rational `q` is supported on level 1, where
//! the place over a prime `p` carries `-ord_p(q)·log p` and the infinite
//! place carries `Σ_p ord_p(q)·log p`; the circular unit attached to an odd
//! prime `p` is supported on level `p`, where the ramified place over `p`
//! carries `-log p/(p-1)` and the infinite place with representative `a`
//! carries `log(2·sin(πa/p))`.  Every profile integrates to zero against the
//! uniform charge (the product formula); explicitly supplied profiles are
//! admitted only when they pass that check, exactly for exact values and
//! within [`PRODUCT_FORMULA_TOL`] for floating-point ones.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::arith;
use crate::maps::ConsistentMap;
use crate::tower::{places_above, Level, Place, RationalPlace, TowerError};
use crate::value::MapValue;

/// Absolute tolerance for the product-formula gate on floating-point totals.
pub const PRODUCT_FORMULA_TOL: f64 = 1e-9;

/// A function supported on finitely many places of one level, zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct SimpleFunction {
    level: Level,
    values: BTreeMap<Place, MapValue>,
}

impl SimpleFunction {
    /// Builds a simple function from explicit place values.  Zero values are
    /// dropped.  Every key must live at `level`.
    pub fn new(level: Level, values: BTreeMap<Place, MapValue>) -> SimpleFunction {
        for w in values.keys() {
            assert!(w.level() == level, "value key at a foreign level");
        }
        let values = values.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        SimpleFunction { level, values }
    }

    pub fn level(&self) -> Level {
        self.level
    }

    /// The nonzero values, keyed by place.
    pub fn values(&self) -> &BTreeMap<Place, MapValue> {
        &self.values
    }

    /// The value at a place of any level divisible by the function's level.
    pub fn value_at(&self, w: Place) -> Result<MapValue, TowerError> {
        let v = w.restrict(self.level)?;
        Ok(self.values.get(&v).cloned().unwrap_or_else(MapValue::zero))
    }

    /// Re-presents the function at a deeper level without changing it as a
    /// function on places: every place inherits the value of its restriction.
    pub fn lift(&self, sup: Level) -> Result<SimpleFunction, TowerError> {
        let mut values = BTreeMap::new();
        for (v, val) in &self.values {
            for w in v.fiber(sup)? {
                values.insert(w, val.clone());
            }
        }
        Ok(SimpleFunction { level: sup, values })
    }
}

/// The pairing `Σ_w f(w)·c(w)` over the support of `f`.
pub fn integrate(f: &SimpleFunction, c: &ConsistentMap) -> MapValue {
    f.values.iter().map(|(w, fv)| fv.mul(&c.evaluate(*w))).sum()
}

/// True when `f` integrates to zero against the uniform charge: exactly for
/// exact values, within [`PRODUCT_FORMULA_TOL`] for floating-point totals.
pub fn satisfies_product_formula(f: &SimpleFunction) -> bool {
    let total = integrate(f, &ConsistentMap::lambda());
    if total.is_float() {
        total.to_f64().abs() < PRODUCT_FORMULA_TOL
    } else {
        total.is_zero()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum ElementKind {
    Rational(BigRational),
    CyclotomicUnit(u64),
    Explicit,
}

/// A multiplicative element carrying its profile of logarithmic absolute
/// values.  Construction validates the element and precomputes the profile,
/// so integration never fails afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraicElement {
    kind: ElementKind,
    profile: SimpleFunction,
}

#[derive(thiserror::Error, Clone, Debug, PartialEq, Eq)]
pub enum ElementError {
    /// Zero has no logarithmic profile.
    #[error("zero is not a multiplicative element")]
    ZeroElement,
    /// Circular units are indexed by odd primes.
    #[error("{0} is not an odd prime")]
    BadPrime(u64),
    /// An explicit profile must integrate to zero against the uniform charge.
    #[error("the profile violates the product formula")]
    ProductFormulaFailed,
    /// Numerator or denominator outside the supported factoring range.
    #[error("numerator or denominator too large to factor")]
    TooLarge,
}

impl ElementError {
    pub fn code(&self) -> &'static str {
        match self {
            ElementError::ZeroElement => "ZeroElement",
            ElementError::BadPrime(_) => "BadPrime",
            ElementError::ProductFormulaFailed => "ProductFormulaFailed",
            ElementError::TooLarge => "TooLarge",
        }
    }
}

impl AlgebraicElement {
    /// A nonzero rational, taken up to sign and reduced to lowest terms.
    pub fn rational(q: BigRational) -> Result<AlgebraicElement, ElementError> {
        if q.is_zero() {
            return Err(ElementError::ZeroElement);
        }
        let q = q.abs();
        let profile = rational_profile(&q)?;
        Ok(AlgebraicElement {
            kind: ElementKind::Rational(q),
            profile,
        })
    }

    /// The circular unit attached to an odd prime `p`.
    pub fn cyclotomic_unit(p: u64) -> Result<AlgebraicElement, ElementError> {
        if p < 3 || !arith::is_prime(p) {
            return Err(ElementError::BadPrime(p));
        }
        Ok(AlgebraicElement {
            kind: ElementKind::CyclotomicUnit(p),
            profile: cyclotomic_unit_profile(p),
        })
    }

    /// An explicitly supplied profile, admitted only when it passes the
    /// product-formula check.
    pub fn explicit(f: SimpleFunction) -> Result<AlgebraicElement, ElementError> {
        if !satisfies_product_formula(&f) {
            return Err(ElementError::ProductFormulaFailed);
        }
        Ok(AlgebraicElement {
            kind: ElementKind::Explicit,
            profile: f,
        })
    }

    /// The profile of logarithmic absolute values.
    pub fn log_profile(&self) -> &SimpleFunction {
        &self.profile
    }
}

/// `∫ f_α dc` for the profile of a multiplicative element.
pub fn integrate_element(c: &ConsistentMap, alpha: &AlgebraicElement) -> MapValue {
    integrate(alpha.log_profile(), c)
}

fn big_to_u64(n: &BigInt) -> Result<u64, ElementError> {
    n.to_u64().ok_or(ElementError::TooLarge)
}

fn rational_profile(q: &BigRational) -> Result<SimpleFunction, ElementError> {
    let numer = big_to_u64(q.numer())?;
    let denom = big_to_u64(q.denom())?;
    let mut ords: BTreeMap<u64, i64> = BTreeMap::new();
    for (p, a) in arith::factor(numer) {
        *ords.entry(p).or_insert(0) += i64::from(a);
    }
    for (p, a) in arith::factor(denom) {
        *ords.entry(p).or_insert(0) -= i64::from(a);
    }

    let level = Level::new(1);
    let mut values = BTreeMap::new();
    let mut at_infinity: BTreeMap<u64, BigRational> = BTreeMap::new();
    for (p, ord) in ords {
        let ord = BigRational::from_integer(BigInt::from(ord));
        let base = RationalPlace::finite(p).expect("factor returns primes");
        let w = Place::new(level, base, 0).expect("level-1 places are canonical");
        values.insert(w, MapValue::log_linear(BigRational::zero(), BTreeMap::from([(p, -&ord)])));
        at_infinity.insert(p, ord);
    }
    let inf = Place::new(level, RationalPlace::Infinite, 0).expect("level-1 places are canonical");
    values.insert(inf, MapValue::log_linear(BigRational::zero(), at_infinity));
    Ok(SimpleFunction::new(level, values))
}

fn cyclotomic_unit_profile(p: u64) -> SimpleFunction {
    let level = Level::new(p);
    let mut values = BTreeMap::new();

    let base = RationalPlace::finite(p).expect("p is prime");
    let ramified = places_above(level, base);
    assert!(ramified.len() == 1, "a prime ramifies into a single place at its own level");
    let pf = p as f64;
    values.insert(ramified[0], MapValue::float(-pf.ln() / (pf - 1.0)));

    for w in places_above(level, RationalPlace::Infinite) {
        let a = w.rep() as f64;
        values.insert(w, MapValue::float((2.0 * (std::f64::consts::PI * a / pf).sin()).ln()));
    }
    SimpleFunction::new(level, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::MapSpec;
    use crate::tower::Level;
    use num_traits::One;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn fp(p: u64) -> RationalPlace {
        RationalPlace::finite(p).unwrap()
    }

    fn pl(n: u64, base: RationalPlace, rep: u64) -> Place {
        Place::new(Level::new(n), base, rep).unwrap()
    }

    fn ll(terms: &[(u64, i64)]) -> MapValue {
        MapValue::log_linear(
            BigRational::zero(),
            terms
                .iter()
                .map(|&(p, k)| (p, BigRational::from_integer(BigInt::from(k))))
                .collect(),
        )
    }

    fn element(n: i64, d: i64) -> AlgebraicElement {
        AlgebraicElement::rational(rat(n, d)).unwrap()
    }

    fn omega_of(n: i64) -> MapValue {
        integrate_element(&ConsistentMap::omega(), &element(n, 1))
    }

    #[test]
    fn profile_of_a_rational_records_valuations() {
        let f = element(12, 1);
        let f = f.log_profile();
        assert_eq!(f.level(), Level::new(1));
        assert_eq!(f.values().len(), 3);
        assert_eq!(f.values()[&pl(1, fp(2), 0)], ll(&[(2, -2)]));
        assert_eq!(f.values()[&pl(1, fp(3), 0)], ll(&[(3, -1)]));
        assert_eq!(f.values()[&pl(1, RationalPlace::Infinite, 0)], ll(&[(2, 2), (3, 1)]));
    }

    #[test]
    fn profile_discards_sign_and_reduces() {
        let f = element(-5, 8);
        let f = f.log_profile();
        assert_eq!(f.values()[&pl(1, fp(2), 0)], ll(&[(2, 3)]));
        assert_eq!(f.values()[&pl(1, fp(5), 0)], ll(&[(5, -1)]));
        assert_eq!(f.values()[&pl(1, RationalPlace::Infinite, 0)], ll(&[(2, -3), (5, 1)]));
        // 6/3 reduces to 2/1 before factoring
        let g = element(6, 3);
        assert_eq!(g.log_profile().values()[&pl(1, fp(2), 0)], ll(&[(2, -1)]));
        assert!(!g.log_profile().values().contains_key(&pl(1, fp(3), 0)));
    }

    #[test]
    fn one_has_an_empty_profile() {
        let f = element(1, 1);
        assert!(f.log_profile().values().is_empty());
        assert!(omega_of(1).is_zero());
    }

    #[test]
    fn zero_is_not_an_element() {
        assert_eq!(
            AlgebraicElement::rational(BigRational::zero()).unwrap_err(),
            ElementError::ZeroElement
        );
    }

    #[test]
    fn circular_units_need_an_odd_prime() {
        assert_eq!(AlgebraicElement::cyclotomic_unit(2).unwrap_err(), ElementError::BadPrime(2));
        assert_eq!(AlgebraicElement::cyclotomic_unit(4).unwrap_err(), ElementError::BadPrime(4));
        assert_eq!(AlgebraicElement::cyclotomic_unit(1).unwrap_err(), ElementError::BadPrime(1));
        assert!(AlgebraicElement::cyclotomic_unit(3).is_ok());
    }

    #[test]
    fn oversized_rationals_are_rejected() {
        let big = BigInt::from(u64::MAX) + BigInt::one();
        let q = BigRational::new(big, BigInt::one());
        assert_eq!(AlgebraicElement::rational(q).unwrap_err(), ElementError::TooLarge);
    }

    #[test]
    fn counting_prime_factors_with_multiplicity() {
        assert_eq!(omega_of(12), MapValue::from_integer(3));
        assert_eq!(omega_of(360), MapValue::from_integer(6));
        assert_eq!(omega_of(97), MapValue::from_integer(1));
        // on a fraction the count is signed: ord_5(5/8) + ord_2(5/8) = 1 - 3
        assert_eq!(
            integrate_element(&ConsistentMap::omega(), &element(-5, 8)),
            MapValue::from_integer(-2)
        );
    }

    #[test]
    fn uniform_charge_annihilates_rationals_exactly() {
        for (n, d) in [(12, 1), (-5, 8), (30, 1), (1001, 1000), (7, 22)] {
            let total = integrate_element(&ConsistentMap::lambda(), &element(n, d));
            assert!(!total.is_float(), "{n}/{d} gave a float");
            assert!(total.is_zero(), "{n}/{d} gave {total:?}");
        }
    }

    #[test]
    fn circular_unit_profile_values() {
        let u = AlgebraicElement::cyclotomic_unit(5).unwrap();
        let f = u.log_profile();
        assert_eq!(f.level(), Level::new(5));
        assert_eq!(f.values().len(), 3);
        let ram = f.values()[&pl(5, fp(5), 0)].to_f64();
        assert!((ram - (-(5f64).ln() / 4.0)).abs() < 1e-15);
        let a1 = f.values()[&pl(5, RationalPlace::Infinite, 1)].to_f64();
        let a2 = f.values()[&pl(5, RationalPlace::Infinite, 2)].to_f64();
        assert!((a1 - (2.0 * (std::f64::consts::PI / 5.0).sin()).ln()).abs() < 1e-15);
        assert!((a2 - (2.0 * (2.0 * std::f64::consts::PI / 5.0).sin()).ln()).abs() < 1e-15);
    }

    #[test]
    fn circular_units_balance_within_tolerance() {
        for p in [3, 5, 7, 13] {
            let u = AlgebraicElement::cyclotomic_unit(p).unwrap();
            let total = integrate_element(&ConsistentMap::lambda(), &u);
            assert!(total.is_float());
            assert!(total.to_f64().abs() < PRODUCT_FORMULA_TOL, "p = {p}: {total:?}");
            assert!(satisfies_product_formula(u.log_profile()));
        }
    }

    #[test]
    fn integration_is_invariant_under_lifting() {
        let spec = MapSpec {
            table: BTreeMap::from([
                (fp(2), MapValue::from_integer(1)),
                (RationalPlace::Infinite, MapValue::ratio(5, 3)),
            ]),
            ..MapSpec::default()
        };
        let c = spec.validate().unwrap();
        let f = element(12, 1);
        let f = f.log_profile();
        let base = integrate(f, &c);
        for sup in [7u64, 12, 360] {
            let lifted = f.lift(Level::new(sup)).unwrap();
            assert_eq!(lifted.level(), Level::new(sup));
            assert_eq!(integrate(&lifted, &c), base);
        }
        assert_eq!(integrate(&f.lift(Level::new(60)).unwrap(), &ConsistentMap::omega()), omega_of(12));
    }

    #[test]
    fn values_restrict_through_levels() {
        let f = element(12, 1);
        let f = f.log_profile();
        assert_eq!(f.value_at(pl(21, fp(2), 1)).unwrap(), ll(&[(2, -2)]));
        assert!(f.value_at(pl(5, fp(5), 0)).unwrap().is_zero());

        let u = AlgebraicElement::cyclotomic_unit(5).unwrap();
        let err = u.log_profile().value_at(pl(3, fp(2), 1)).unwrap_err();
        assert_eq!(err.code(), "LevelNotDivisible");
    }

    #[test]
    fn pairing_is_additive_in_the_charge() {
        let f = element(360, 1);
        let f = f.log_profile();
        let a = ConsistentMap::omega();
        let b = ConsistentMap::lambda().scale(&rat(3, 2));
        let sum = a.add(&b);
        let lhs = integrate(f, &sum);
        let rhs = integrate(f, &a).add(&integrate(f, &b));
        assert!(lhs.agrees_within(&rhs, 1e-12));
    }

    #[test]
    fn profiles_multiply_as_elements_do() {
        // Ω is completely additive: Ω(6·10) = Ω(6) + Ω(10)
        assert_eq!(omega_of(60), omega_of(6).add(&omega_of(10)));
        // and against an arbitrary exact charge the identity is exact
        let spec = MapSpec {
            table: BTreeMap::from([
                (fp(2), MapValue::ratio(1, 3)),
                (fp(5), MapValue::from_integer(-2)),
                (RationalPlace::Infinite, MapValue::ratio(7, 2)),
            ]),
            ..MapSpec::default()
        };
        let c = spec.validate().unwrap();
        let lhs = integrate_element(&c, &element(60, 1));
        let rhs = integrate_element(&c, &element(6, 1)).add(&integrate_element(&c, &element(10, 1)));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn explicit_profiles_must_balance() {
        let log2 = MapValue::log_of(2);
        let unbalanced = SimpleFunction::new(
            Level::new(1),
            BTreeMap::from([(pl(1, fp(2), 0), log2.clone())]),
        );
        assert_eq!(
            AlgebraicElement::explicit(unbalanced).unwrap_err(),
            ElementError::ProductFormulaFailed
        );

        // the profile of 1/2 written out by hand
        let balanced = SimpleFunction::new(
            Level::new(1),
            BTreeMap::from([
                (pl(1, fp(2), 0), log2.clone()),
                (pl(1, RationalPlace::Infinite, 0), log2.neg()),
            ]),
        );
        let e = AlgebraicElement::explicit(balanced).unwrap();
        assert_eq!(integrate_element(&ConsistentMap::omega(), &e), MapValue::from_integer(-1));
        assert_eq!(e.log_profile(), element(1, 2).log_profile());
    }
}
