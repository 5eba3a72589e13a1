//! The cyclotomic tower and its places.
//!
//! A level names the field obtained by adjoining a primitive n-th root of
//! unity to the rationals. Distinct n can name the same field, so levels are
//! kept in canonical conductor form (1, or n >= 3 with n not congruent to
//! 2 mod 4); under that normalization divisibility of levels is exactly
//! containment of fields, and the compositum is the least common multiple.
//!
//! A place of level n over a rational place is stored as a canonical orbit
//! representative:
//!
//! * over a finite prime p, write n = p^a * m with p not dividing m; the
//!   places correspond to the cosets of the cyclic subgroup generated by p
//!   inside the units modulo m, and the representative is the least element
//!   of the coset (0 when m = 1, where the group is trivial);
//! * over the infinite place they correspond to the pairs {a, n - a} of
//!   units modulo n, with representative min(a, n - a) (0 when n = 1).
//!
//! Local degrees follow the e * f recipe: over p the ramification index is
//! phi(p^a) and the residue degree is the order of p modulo m (1 when
//! m = 1); over infinity the degree is 2 except at level 1, where the one
//! real place has degree 1. Restriction reduces the representative modulo
//! the lower level and re-canonicalizes; fibers invert restriction.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::arith;

/// A field in the tower, always in canonical conductor form.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Level(u64);

impl Level {
    /// Normalizes n to its canonical conductor: 1 and 2 collapse to 1, and
    /// n = 2 mod 4 collapses to n/2. Panics on 0, which names nothing.
    pub fn new(n: u64) -> Level {
        assert!(n > 0, "level must be positive");
        if n <= 2 {
            Level(1)
        } else if n % 4 == 2 {
            Level(n / 2)
        } else {
            Level(n)
        }
    }

    pub fn get(self) -> u64 {
        self.0
    }

    /// Degree of the level field over the rationals (Euler phi).
    pub fn degree(self) -> u64 {
        arith::phi(self.0)
    }

    pub fn divides(self, other: Level) -> bool {
        other.0 % self.0 == 0
    }

    /// Smallest level containing both, i.e. the compositum field.
    pub fn compositum(self, other: Level) -> Level {
        Level::new(arith::lcm(self.0, other.0))
    }

    /// The canonical divisors of this level, ascending. Every subfield of
    /// the level field appears exactly once.
    pub fn canonical_divisors(self) -> Vec<Level> {
        arith::divisors(self.0)
            .into_iter()
            .filter(|&d| d == 1 || (d > 2 && d % 4 != 2))
            .map(Level)
            .collect()
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A place of the rationals: the infinite place or a finite prime.
///
/// The ordering is the fixed enumeration used everywhere in the crate:
/// infinity first, then the primes in increasing order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum RationalPlace {
    Infinite,
    Finite(u64),
}

impl RationalPlace {
    pub fn finite(p: u64) -> Result<RationalPlace, TowerError> {
        if arith::is_prime(p) {
            Ok(RationalPlace::Finite(p))
        } else {
            Err(TowerError::NotPrime(p))
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, RationalPlace::Infinite)
    }

    /// 1-indexed position in the fixed enumeration: infinity is 1, then
    /// 2 -> 2, 3 -> 3, 5 -> 4, and so on.
    pub fn enumeration_index(self) -> u64 {
        match self {
            RationalPlace::Infinite => 1,
            RationalPlace::Finite(p) => 1 + arith::prime_position(p),
        }
    }

    /// The places of the rationals in enumeration order, unbounded.
    pub fn enumeration() -> impl Iterator<Item = RationalPlace> {
        std::iter::once(RationalPlace::Infinite).chain(arith::primes().map(RationalPlace::Finite))
    }
}

impl Ord for RationalPlace {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use RationalPlace::*;
        match (self, other) {
            (Infinite, Infinite) => std::cmp::Ordering::Equal,
            (Infinite, Finite(_)) => std::cmp::Ordering::Less,
            (Finite(_), Infinite) => std::cmp::Ordering::Greater,
            (Finite(p), Finite(q)) => p.cmp(q),
        }
    }
}

impl PartialOrd for RationalPlace {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for RationalPlace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RationalPlace::Infinite => write!(f, "inf"),
            RationalPlace::Finite(p) => write!(f, "{p}"),
        }
    }
}

/// A place of a level field over a rational place, in canonical form.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Place {
    level: Level,
    base: RationalPlace,
    rep: u64,
}

impl Place {
    /// Builds a place from its canonical representative. Rejects elements
    /// that are not units of the right modulus and representatives that are
    /// legal orbit members but not the least one, so that a `Place` value
    /// always names its orbit unambiguously.
    pub fn new(level: Level, base: RationalPlace, rep: u64) -> Result<Place, TowerError> {
        let canonical = fold_rep(level, base, rep).ok_or(TowerError::BadRep { level, base, rep })?;
        if canonical != rep {
            return Err(TowerError::NotCanonicalRep {
                level,
                base,
                rep,
                canonical,
            });
        }
        Ok(Place { level, base, rep })
    }

    /// Canonicalizes an arbitrary orbit element. Internal: callers must pass
    /// a unit of the right modulus (or 0 in the trivial-group cases).
    fn from_element(level: Level, base: RationalPlace, elem: u64) -> Place {
        let rep = fold_rep(level, base, elem).expect("orbit element must be a unit");
        Place { level, base, rep }
    }

    pub fn level(self) -> Level {
        self.level
    }

    pub fn base(self) -> RationalPlace {
        self.base
    }

    pub fn rep(self) -> u64 {
        self.rep
    }

    /// Degree of the completion at this place over the completion of the
    /// rationals below it.
    pub fn local_degree(self) -> u64 {
        let n = self.level.get();
        match self.base {
            RationalPlace::Infinite => {
                if n == 1 {
                    1
                } else {
                    2
                }
            }
            RationalPlace::Finite(p) => {
                let (pa, m) = split_level(n, p);
                arith::phi(pa) * arith::mult_order(p % m.max(1), m)
            }
        }
    }

    /// Local degree divided by the level degree. Sums to 1 over the places
    /// above any fixed rational place, and is consistent along restriction.
    pub fn normalized_degree(self) -> BigRational {
        BigRational::new(
            BigInt::from(self.local_degree()),
            BigInt::from(self.level.degree()),
        )
    }

    /// The place of the sublevel field below this one.
    pub fn restrict(self, sub: Level) -> Result<Place, TowerError> {
        if !sub.divides(self.level) {
            return Err(TowerError::LevelNotDivisible {
                sub,
                sup: self.level,
            });
        }
        if sub == self.level {
            return Ok(self);
        }
        let elem = match self.base {
            // rep 0 only occurs when the orbit group below is trivial too;
            // fold_rep maps any element to 0 in that case, so pass rep as is
            // when nonzero and map the trivial cases explicitly.
            RationalPlace::Infinite => self.rep,
            RationalPlace::Finite(_) => self.rep,
        };
        if elem == 0 {
            // Trivial group at this level: n is a prime power over p (or
            // level 1 over infinity); every divisor keeps the group trivial.
            return Ok(Place {
                level: sub,
                base: self.base,
                rep: 0,
            });
        }
        Ok(Place::from_element(sub, self.base, elem))
    }

    /// The places of the superlevel lying above this one, ascending by
    /// representative.
    pub fn fiber(self, sup: Level) -> Result<Vec<Place>, TowerError> {
        if !self.level.divides(sup) {
            return Err(TowerError::LevelNotDivisible {
                sub: self.level,
                sup,
            });
        }
        Ok(places_above(sup, self.base)
            .into_iter()
            .filter(|w| w.restrict(self.level).expect("levels divide") == self)
            .collect())
    }
}

impl fmt::Display for Place {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.level, self.base, self.rep)
    }
}

/// Splits n as p^a * m with p not dividing m, returning (p^a, m).
fn split_level(n: u64, p: u64) -> (u64, u64) {
    let mut pa = 1u64;
    let mut m = n;
    while m % p == 0 {
        m /= p;
        pa *= p;
    }
    (pa, m)
}

/// Least element of the orbit of `elem`, or None when `elem` is not a unit
/// of the relevant modulus. The trivial-group cases fold everything to 0.
fn fold_rep(level: Level, base: RationalPlace, elem: u64) -> Option<u64> {
    let n = level.get();
    match base {
        RationalPlace::Infinite => {
            if n == 1 {
                return Some(0);
            }
            let e = elem % n;
            if arith::gcd(e, n) != 1 {
                return None;
            }
            Some(e.min(n - e))
        }
        RationalPlace::Finite(p) => {
            let (_, m) = split_level(n, p);
            if m == 1 {
                return Some(0);
            }
            let e = elem % m;
            if arith::gcd(e, m) != 1 {
                return None;
            }
            let mut best = e;
            let mut x = e;
            loop {
                x = arith::mul_mod(x, p % m, m);
                if x == e {
                    break;
                }
                best = best.min(x);
            }
            Some(best)
        }
    }
}

/// All places of the level over the given rational place, ascending by
/// representative.
pub fn places_above(level: Level, base: RationalPlace) -> Vec<Place> {
    let n = level.get();
    match base {
        RationalPlace::Infinite => {
            if n == 1 {
                return vec![Place {
                    level,
                    base,
                    rep: 0,
                }];
            }
            (1..=n / 2)
                .filter(|&u| arith::gcd(u, n) == 1)
                .map(|u| Place {
                    level,
                    base,
                    rep: u,
                })
                .collect()
        }
        RationalPlace::Finite(p) => {
            let (_, m) = split_level(n, p);
            if m == 1 {
                return vec![Place {
                    level,
                    base,
                    rep: 0,
                }];
            }
            let mut seen = vec![false; m as usize];
            let mut out = Vec::new();
            for u in 1..m {
                if seen[u as usize] || arith::gcd(u, m) != 1 {
                    continue;
                }
                // u is the least element of a fresh orbit: mark the whole
                // orbit and record u as its representative.
                out.push(Place {
                    level,
                    base,
                    rep: u,
                });
                let mut x = u;
                loop {
                    seen[x as usize] = true;
                    x = arith::mul_mod(x, p % m, m);
                    if x == u {
                        break;
                    }
                }
            }
            out
        }
    }
}

pub fn compositum(a: Level, b: Level) -> Level {
    a.compositum(b)
}

#[derive(thiserror::Error, Clone, Copy, PartialEq, Eq, Debug)]
pub enum TowerError {
    #[error("level {sub} does not divide level {sup}")]
    LevelNotDivisible { sub: Level, sup: Level },
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("rep {rep} does not name a place of level {level} over {base}")]
    BadRep {
        level: Level,
        base: RationalPlace,
        rep: u64,
    },
    #[error("rep {rep} at level {level} over {base} is not canonical (the orbit representative is {canonical})")]
    NotCanonicalRep {
        level: Level,
        base: RationalPlace,
        rep: u64,
        canonical: u64,
    },
}

impl TowerError {
    pub fn code(&self) -> &'static str {
        match self {
            TowerError::LevelNotDivisible { .. } => "LevelNotDivisible",
            TowerError::NotPrime(_) => "NotPrime",
            TowerError::BadRep { .. } => "BadRep",
            TowerError::NotCanonicalRep { .. } => "NotCanonicalRep",
        }
    }
}

/// The tower operations behind the rest of the crate, as an interface so a
/// different family of fields can be plugged in later. `CyclotomicTower` is
/// the implementation everything here uses.
pub trait TowerProvider {
    fn places_above(&self, level: Level, base: RationalPlace) -> Vec<Place>;
    fn local_degree(&self, place: Place) -> u64;
    fn global_degree(&self, level: Level) -> u64;
    fn restrict(&self, place: Place, sub: Level) -> Result<Place, TowerError>;
    fn fiber(&self, place: Place, sup: Level) -> Result<Vec<Place>, TowerError>;
    fn compositum(&self, a: Level, b: Level) -> Level;
}

#[derive(Clone, Copy, Default, Debug)]
pub struct CyclotomicTower;

impl TowerProvider for CyclotomicTower {
    fn places_above(&self, level: Level, base: RationalPlace) -> Vec<Place> {
        places_above(level, base)
    }

    fn local_degree(&self, place: Place) -> u64 {
        place.local_degree()
    }

    fn global_degree(&self, level: Level) -> u64 {
        level.degree()
    }

    fn restrict(&self, place: Place, sub: Level) -> Result<Place, TowerError> {
        place.restrict(sub)
    }

    fn fiber(&self, place: Place, sup: Level) -> Result<Vec<Place>, TowerError> {
        place.fiber(sup)
    }

    fn compositum(&self, a: Level, b: Level) -> Level {
        a.compositum(b)
    }
}
