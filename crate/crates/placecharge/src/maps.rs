//! Finitely additive charges on the places of the tower.
//!
//! A charge assigns a value to every place of every level, subject to one
//! identity: the value at a place equals the sum of the values over its
//! fiber at any higher level. A `ConsistentMap` can only be obtained by
//! validating a `MapSpec`, or by combining maps that already passed, so
//! holding one is proof that the identity holds everywhere.
//!
//! A spec has three layers:
//!
//! * a base table giving level-one values at finitely many rational
//!   places;
//! * a tail covering the remaining rational places with a formal
//!   combination of three families: a constant (spread like the uniform
//!   charge), a reciprocal-log family (q / log p at the place over p), and
//!   an alternating family (signs along the fixed enumeration of rational
//!   places). Keeping the tail formal means sums of charges never leave
//!   the representation;
//! * optional override tables along a divisibility chain of levels, pinning
//!   values at every place above a finite exceptional set of rational
//!   places. Validation checks each table is the fiber sum of the next and
//!   that the first sums back to the base values.
//!
//! Away from the exceptional set a value is the level-one value scaled by
//! the normalized degree, which satisfies the identity term by term. Above
//! the exceptional set the deepest table is the data and everything else
//! is determined: the value at w is the sum, over the fiber of w at the
//! compositum of its level with the deepest level, of the deepest-table
//! value at the restriction scaled by the quotient of normalized degrees.
//! When the deepest level divides the level of w this collapses to plain
//! scaling, and in general it is the unique extension consistent with the
//! chain, which is why evaluation may not simply fall back to the base
//! rule at levels the chain does not divide.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::BigRational;
use num_traits::Zero;

use crate::sets::RingSet;
use crate::tower::{places_above, Level, Place, RationalPlace};
use crate::value::{MapValue, VALUE_REL_TOL};

/// The level-one values at all but finitely many rational places, as a
/// formal rational combination of three families.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Tail {
    lambda: BigRational,
    reciprocal_log: BigRational,
    alternating: BigRational,
}

impl Tail {
    pub fn zero() -> Tail {
        Tail::new(
            BigRational::zero(),
            BigRational::zero(),
            BigRational::zero(),
        )
    }

    pub fn new(lambda: BigRational, reciprocal_log: BigRational, alternating: BigRational) -> Tail {
        Tail {
            lambda,
            reciprocal_log,
            alternating,
        }
    }

    pub fn lambda_part(&self) -> &BigRational {
        &self.lambda
    }

    pub fn reciprocal_log_part(&self) -> &BigRational {
        &self.reciprocal_log
    }

    pub fn alternating_part(&self) -> &BigRational {
        &self.alternating
    }

    pub fn is_zero(&self) -> bool {
        self.lambda.is_zero() && self.reciprocal_log.is_zero() && self.alternating.is_zero()
    }

    pub fn add(&self, other: &Tail) -> Tail {
        Tail::new(
            &self.lambda + &other.lambda,
            &self.reciprocal_log + &other.reciprocal_log,
            &self.alternating + &other.alternating,
        )
    }

    pub fn scale(&self, factor: &BigRational) -> Tail {
        Tail::new(
            &self.lambda * factor,
            &self.reciprocal_log * factor,
            &self.alternating * factor,
        )
    }

    /// The level-one value this tail gives at a rational place. The
    /// reciprocal-log family has no value at infinity; validation forces an
    /// explicit table entry there whenever that coefficient is nonzero, so
    /// this is only consulted at finite places in that case.
    pub fn value_at(&self, r: RationalPlace) -> MapValue {
        let mut rational = self.lambda.clone();
        if !self.alternating.is_zero() {
            if r.enumeration_index() % 2 == 0 {
                rational += &self.alternating;
            } else {
                rational -= &self.alternating;
            }
        }
        match r {
            RationalPlace::Finite(p) if !self.reciprocal_log.is_zero() => {
                MapValue::Rational(rational)
                    .add(&MapValue::over_log(self.reciprocal_log.clone(), p))
            }
            RationalPlace::Infinite => {
                debug_assert!(
                    self.reciprocal_log.is_zero(),
                    "the table is consulted before the tail at infinity"
                );
                MapValue::Rational(rational)
            }
            _ => MapValue::Rational(rational),
        }
    }
}

/// Values pinned at every place of one level above the exceptional set.
#[derive(Clone, Debug)]
pub struct OverrideLevel {
    pub level: Level,
    pub entries: BTreeMap<Place, MapValue>,
}

/// An unvalidated description of a charge. `validate` is the only way to
/// turn it into something the rest of the crate will evaluate.
#[derive(Clone, Debug, Default)]
pub struct MapSpec {
    pub table: BTreeMap<RationalPlace, MapValue>,
    pub tail: TailSpec,
    pub overrides: Vec<OverrideLevel>,
}

/// `Tail` under construction; identical shape, free to edit.
pub type TailSpec = Tail;

impl Default for Tail {
    fn default() -> Tail {
        Tail::zero()
    }
}

#[derive(thiserror::Error, Clone, Debug)]
pub enum MapError {
    #[error("invalid override at {place}: {reason}")]
    InvalidOverride { place: Place, reason: String },
    #[error("override levels {} do not form a strictly increasing divisibility chain", fmt_levels(.0))]
    NotAChain(Vec<Level>),
    #[error("a reciprocal-log tail needs an explicit base value at the infinite place")]
    MissingInfinityValue,
}

fn fmt_levels(levels: &[Level]) -> String {
    let parts: Vec<String> = levels.iter().map(|l| l.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

impl MapError {
    pub fn code(&self) -> &'static str {
        match self {
            MapError::InvalidOverride { .. } => "InvalidOverride",
            MapError::NotAChain(_) => "NotAChain",
            MapError::MissingInfinityValue => "MissingInfinityValue",
        }
    }
}

impl MapSpec {
    /// Checks every rule a chain of overrides must satisfy and returns the
    /// evaluatable charge. The checks, in order: a reciprocal-log tail has
    /// an explicit value at infinity; override levels form a strict
    /// divisibility chain; every entry sits at its stated level; every
    /// level covers every place above the exceptional set; consecutive
    /// levels agree by fiber sums; the first level sums back to the base
    /// values. Sums involving floats agree up to `VALUE_REL_TOL`.
    pub fn validate(self) -> Result<ConsistentMap, MapError> {
        if !self.tail.reciprocal_log.is_zero()
            && !self.table.contains_key(&RationalPlace::Infinite)
        {
            return Err(MapError::MissingInfinityValue);
        }

        let levels: Vec<Level> = self.overrides.iter().map(|o| o.level).collect();
        for pair in levels.windows(2) {
            if pair[0] == pair[1] || !pair[0].divides(pair[1]) {
                return Err(MapError::NotAChain(levels));
            }
        }

        let mut exceptional: BTreeSet<RationalPlace> = BTreeSet::new();
        for level in &self.overrides {
            for w in level.entries.keys() {
                if w.level() != level.level {
                    return Err(MapError::InvalidOverride {
                        place: *w,
                        reason: format!("entry does not live at level {}", level.level),
                    });
                }
                exceptional.insert(w.base());
            }
        }

        for level in &self.overrides {
            for r in &exceptional {
                for w in places_above(level.level, *r) {
                    if !level.entries.contains_key(&w) {
                        return Err(MapError::InvalidOverride {
                            place: w,
                            reason: format!(
                                "the level-{} table must cover every place above {}",
                                level.level, r
                            ),
                        });
                    }
                }
            }
        }

        for pair in self.overrides.windows(2) {
            let (shallow, deep) = (&pair[0], &pair[1]);
            for (v, stated) in &shallow.entries {
                let sum: MapValue = v
                    .fiber(deep.level)
                    .expect("chain levels divide")
                    .into_iter()
                    .map(|w| deep.entries[&w].clone())
                    .sum();
                if !stated.agrees_within(&sum, VALUE_REL_TOL) {
                    return Err(MapError::InvalidOverride {
                        place: *v,
                        reason: format!(
                            "the level-{} fiber sums to {} but the table gives {}",
                            deep.level, sum, stated
                        ),
                    });
                }
            }
        }

        if let Some(first) = self.overrides.first() {
            for r in &exceptional {
                let base = base_value_of(&self.table, &self.tail, *r);
                let sum: MapValue = places_above(first.level, *r)
                    .into_iter()
                    .map(|w| first.entries[&w].clone())
                    .sum();
                if !base.agrees_within(&sum, VALUE_REL_TOL) {
                    return Err(MapError::InvalidOverride {
                        place: Place::new(Level::new(1), *r, 0).expect("level-one place"),
                        reason: format!(
                            "the level-{} values above {} sum to {} but the base value is {}",
                            first.level, r, sum, base
                        ),
                    });
                }
            }
        }

        Ok(ConsistentMap {
            table: self.table,
            tail: self.tail,
            overrides: self.overrides,
            exceptional,
        })
    }
}

fn base_value_of(
    table: &BTreeMap<RationalPlace, MapValue>,
    tail: &Tail,
    r: RationalPlace,
) -> MapValue {
    table.get(&r).cloned().unwrap_or_else(|| tail.value_at(r))
}

/// A charge that satisfies the fiber-sum identity at every pair of levels.
#[derive(Clone, Debug)]
pub struct ConsistentMap {
    table: BTreeMap<RationalPlace, MapValue>,
    tail: Tail,
    overrides: Vec<OverrideLevel>,
    exceptional: BTreeSet<RationalPlace>,
}

impl ConsistentMap {
    /// The uniform charge: every place carries its normalized degree.
    pub fn lambda() -> ConsistentMap {
        MapSpec {
            table: BTreeMap::new(),
            tail: Tail::new(
                BigRational::from_integer(1.into()),
                BigRational::zero(),
                BigRational::zero(),
            ),
            overrides: Vec::new(),
        }
        .validate()
        .expect("the uniform charge is consistent")
    }

    /// The charge with -1/log p above each finite prime and zero at
    /// infinity.
    pub fn omega() -> ConsistentMap {
        MapSpec {
            table: BTreeMap::from([(RationalPlace::Infinite, MapValue::zero())]),
            tail: Tail::new(
                BigRational::zero(),
                BigRational::from_integer((-1).into()),
                BigRational::zero(),
            ),
            overrides: Vec::new(),
        }
        .validate()
        .expect("the reciprocal-log charge is consistent")
    }

    /// The charge of alternating signs along the enumeration of rational
    /// places.
    pub fn alternating() -> ConsistentMap {
        MapSpec {
            table: BTreeMap::new(),
            tail: Tail::new(
                BigRational::zero(),
                BigRational::zero(),
                BigRational::from_integer(1.into()),
            ),
            overrides: Vec::new(),
        }
        .validate()
        .expect("the alternating charge is consistent")
    }

    pub fn base_table(&self) -> &BTreeMap<RationalPlace, MapValue> {
        &self.table
    }

    pub fn tail(&self) -> &Tail {
        &self.tail
    }

    pub fn override_levels(&self) -> &[OverrideLevel] {
        &self.overrides
    }

    /// Rational places whose values are pinned by overrides.
    pub fn exceptional_places(&self) -> &BTreeSet<RationalPlace> {
        &self.exceptional
    }

    /// The level-one value at a rational place.
    pub fn base_value(&self, r: RationalPlace) -> MapValue {
        base_value_of(&self.table, &self.tail, r)
    }

    /// True when the whole infinite fiber carries charge zero.
    pub fn vanishes_at_infinity(&self) -> bool {
        self.base_value(RationalPlace::Infinite).is_zero()
    }

    /// The value at any place of any level.
    pub fn evaluate(&self, w: Place) -> MapValue {
        if self.exceptional.contains(&w.base()) {
            let deepest = self.overrides.last().expect("exceptional set implies overrides");
            let m = w.level().compositum(deepest.level);
            return w
                .fiber(m)
                .expect("a level divides its compositum")
                .into_iter()
                .map(|u| {
                    let v = u.restrict(deepest.level).expect("chain level divides");
                    let ratio = u.normalized_degree() / v.normalized_degree();
                    deepest.entries[&v].scale(&ratio)
                })
                .sum();
        }
        self.base_value(w.base()).scale(&w.normalized_degree())
    }

    /// Total charge of a ring set: the sum of the values at its places.
    /// Consistency makes this independent of the presentation level.
    pub fn charge(&self, set: &RingSet) -> MapValue {
        set.places().iter().map(|w| self.evaluate(*w)).sum()
    }

    /// Pointwise sum. The result needs no re-validation: away from the
    /// joined exceptional set both summands spread their level-one values,
    /// and above it the merged table is built from the two evaluations, so
    /// the identity holds term by term.
    pub fn add(&self, other: &ConsistentMap) -> ConsistentMap {
        let tail = self.tail.add(&other.tail);
        let mut table = BTreeMap::new();
        for r in self.table.keys().chain(other.table.keys()) {
            table.insert(*r, self.base_value(*r).add(&other.base_value(*r)));
        }
        let exceptional: BTreeSet<RationalPlace> = self
            .exceptional
            .union(&other.exceptional)
            .cloned()
            .collect();
        let overrides = if exceptional.is_empty() {
            Vec::new()
        } else {
            let level = match (self.overrides.last(), other.overrides.last()) {
                (Some(a), Some(b)) => a.level.compositum(b.level),
                (Some(a), None) => a.level,
                (None, Some(b)) => b.level,
                (None, None) => unreachable!("an exceptional place comes from some override"),
            };
            let mut entries = BTreeMap::new();
            for r in &exceptional {
                for w in places_above(level, *r) {
                    entries.insert(w, self.evaluate(w).add(&other.evaluate(w)));
                }
            }
            vec![OverrideLevel { level, entries }]
        };
        ConsistentMap {
            table,
            tail,
            overrides,
            exceptional,
        }
    }

    /// Pointwise multiple by a rational factor; exact for every value
    /// shape.
    pub fn scale(&self, factor: &BigRational) -> ConsistentMap {
        ConsistentMap {
            table: self
                .table
                .iter()
                .map(|(r, v)| (*r, v.scale(factor)))
                .collect(),
            tail: self.tail.scale(factor),
            overrides: self
                .overrides
                .iter()
                .map(|o| OverrideLevel {
                    level: o.level,
                    entries: o.entries.iter().map(|(w, v)| (*w, v.scale(factor))).collect(),
                })
                .collect(),
            exceptional: self.exceptional.clone(),
        }
    }

    pub fn neg(&self) -> ConsistentMap {
        self.scale(&BigRational::from_integer((-1).into()))
    }
}

impl fmt::Display for ConsistentMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "charge(")?;
        let mut first = true;
        for (r, v) in &self.table {
            if !first {
                write!(f, ", ")?;
            }
            write!(f, "{r} -> {v}")?;
            first = false;
        }
        if !self.tail.is_zero() {
            if !first {
                write!(f, ", ")?;
            }
            write!(f, "tail")?;
            let parts = [
                (&self.tail.lambda, "uniform"),
                (&self.tail.reciprocal_log, "1/log"),
                (&self.tail.alternating, "alternating"),
            ];
            for (coeff, name) in parts {
                if !coeff.is_zero() {
                    write!(f, " {coeff}*{name}")?;
                }
            }
            first = false;
        }
        for o in &self.overrides {
            if !first {
                write!(f, ", ")?;
            }
            write!(f, "override@{}", o.level)?;
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, ")")
    }
}
