//! Cylinder sets of places and the algebra they generate.
//!
//! A ring set is a finite set of places at one level; it stands for every
//! place of the full tower whose restriction to that level lands in the
//! set. Two presentations can name the same set, so every constructor and
//! operation reduces to the canonical presentation: the smallest canonical
//! level at which the set is a union of whole fibers. The set of levels a
//! given set reduces to is closed under gcd, so scanning the canonical
//! divisors in ascending order finds the unique minimal one.
//!
//! Ring sets are never the whole space (they only ever touch finitely many
//! rational places), so the algebra closes under complement by tagging: an
//! algebra set is a ring set or the complement of one. The case tables in
//! the boolean operations keep that form.

use std::collections::BTreeSet;
use std::fmt;

use crate::tower::{Level, Place, TowerError};

/// How one set sits against another. When several apply, the earliest
/// variant wins: equality beats containment, containment beats
/// disjointness.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SetRelation {
    Equal,
    Subset,
    Superset,
    Disjoint,
    Overlapping,
}

impl fmt::Display for SetRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SetRelation::Equal => "equal",
            SetRelation::Subset => "subset",
            SetRelation::Superset => "superset",
            SetRelation::Disjoint => "disjoint",
            SetRelation::Overlapping => "overlapping",
        };
        write!(f, "{s}")
    }
}

/// A finite union of place cylinders, kept in canonical form. The derived
/// equality is syntactic; it coincides with semantic equality exactly
/// because every constructor reduces. `lift` is the one escape hatch that
/// produces a non-canonical presentation.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct RingSet {
    level: Level,
    places: BTreeSet<Place>,
}

impl RingSet {
    pub fn empty() -> RingSet {
        RingSet {
            level: Level::new(1),
            places: BTreeSet::new(),
        }
    }

    /// Builds the set of the given places and reduces it. All places must
    /// live at the stated level.
    pub fn new(level: Level, places: BTreeSet<Place>) -> RingSet {
        for w in &places {
            assert!(
                w.level() == level,
                "place {w} is not at level {level}"
            );
        }
        reduce(level, places)
    }

    pub fn singleton(place: Place) -> RingSet {
        RingSet::new(place.level(), BTreeSet::from([place]))
    }

    /// Union of the cylinders of the given places, which may live at mixed
    /// levels; duplicates and containments dissolve in the canonical form.
    pub fn from_places<I: IntoIterator<Item = Place>>(places: I) -> RingSet {
        places
            .into_iter()
            .fold(RingSet::empty(), |acc, w| acc.union(&RingSet::singleton(w)))
    }

    /// Re-canonicalizes a presentation, undoing `lift`.
    pub fn reduce(&self) -> RingSet {
        RingSet::new(self.level, self.places.clone())
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn places(&self) -> &BTreeSet<Place> {
        &self.places
    }

    pub fn is_empty(&self) -> bool {
        self.places.is_empty()
    }

    /// The same set presented at a higher level: every place is replaced by
    /// its whole fiber. The result is deliberately not re-reduced.
    pub fn lift(&self, sup: Level) -> Result<RingSet, TowerError> {
        if !self.level.divides(sup) {
            return Err(TowerError::LevelNotDivisible {
                sub: self.level,
                sup,
            });
        }
        let mut places = BTreeSet::new();
        for v in &self.places {
            places.extend(v.fiber(sup)?);
        }
        Ok(RingSet { level: sup, places })
    }

    /// Membership of a place whose level is a multiple of this set's level.
    pub fn contains(&self, place: Place) -> Result<bool, TowerError> {
        Ok(self.places.contains(&place.restrict(self.level)?))
    }

    fn at_common_level(&self, other: &RingSet) -> (Level, BTreeSet<Place>, BTreeSet<Place>) {
        let l = self.level.compositum(other.level);
        let a = self.lift(l).expect("level divides its compositum");
        let b = other.lift(l).expect("level divides its compositum");
        (l, a.places, b.places)
    }

    pub fn union(&self, other: &RingSet) -> RingSet {
        let (l, a, b) = self.at_common_level(other);
        reduce(l, a.union(&b).cloned().collect())
    }

    pub fn intersect(&self, other: &RingSet) -> RingSet {
        let (l, a, b) = self.at_common_level(other);
        reduce(l, a.intersection(&b).cloned().collect())
    }

    pub fn difference(&self, other: &RingSet) -> RingSet {
        let (l, a, b) = self.at_common_level(other);
        reduce(l, a.difference(&b).cloned().collect())
    }

    /// Semantic comparison at the common level.
    pub fn compare(&self, other: &RingSet) -> SetRelation {
        let (_, a, b) = self.at_common_level(other);
        if a == b {
            SetRelation::Equal
        } else if a.is_subset(&b) {
            SetRelation::Subset
        } else if b.is_subset(&a) {
            SetRelation::Superset
        } else if a.is_disjoint(&b) {
            SetRelation::Disjoint
        } else {
            SetRelation::Overlapping
        }
    }
}

impl fmt::Display for RingSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, w) in self.places.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{w}")?;
        }
        write!(f, "]")
    }
}

/// Canonicalizes a presentation: the smallest canonical divisor of the
/// level at which the set is a union of whole fibers.
fn reduce(level: Level, places: BTreeSet<Place>) -> RingSet {
    for d in level.canonical_divisors() {
        let mut reduced = BTreeSet::new();
        for w in &places {
            reduced.insert(w.restrict(d).expect("canonical divisor divides"));
        }
        let full = reduced.iter().all(|v| {
            v.fiber(level)
                .expect("canonical divisor divides")
                .iter()
                .all(|w| places.contains(w))
        });
        if full {
            return RingSet {
                level: d,
                places: reduced,
            };
        }
    }
    unreachable!("a set always reduces to its own level")
}

/// A member of the complement-closed algebra: a ring set or the complement
/// of one. Ring sets never exhaust the space, so the tag never collapses.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AlgebraSet {
    complemented: bool,
    core: RingSet,
}

impl AlgebraSet {
    pub fn positive(core: RingSet) -> AlgebraSet {
        AlgebraSet {
            complemented: false,
            core,
        }
    }

    pub fn complement_of(core: RingSet) -> AlgebraSet {
        AlgebraSet {
            complemented: true,
            core,
        }
    }

    pub fn empty() -> AlgebraSet {
        AlgebraSet::positive(RingSet::empty())
    }

    pub fn whole_space() -> AlgebraSet {
        AlgebraSet::complement_of(RingSet::empty())
    }

    pub fn is_complemented(&self) -> bool {
        self.complemented
    }

    /// True when the set is compact, i.e. belongs to the ring itself.
    pub fn is_ring(&self) -> bool {
        !self.complemented
    }

    pub fn core(&self) -> &RingSet {
        &self.core
    }

    pub fn is_empty(&self) -> bool {
        !self.complemented && self.core.is_empty()
    }

    pub fn complement(&self) -> AlgebraSet {
        AlgebraSet {
            complemented: !self.complemented,
            core: self.core.clone(),
        }
    }

    pub fn contains(&self, place: Place) -> Result<bool, TowerError> {
        Ok(self.core.contains(place)? != self.complemented)
    }

    pub fn union(&self, other: &AlgebraSet) -> AlgebraSet {
        let (a, b) = (&self.core, &other.core);
        match (self.complemented, other.complemented) {
            (false, false) => AlgebraSet::positive(a.union(b)),
            (false, true) => AlgebraSet::complement_of(b.difference(a)),
            (true, false) => AlgebraSet::complement_of(a.difference(b)),
            (true, true) => AlgebraSet::complement_of(a.intersect(b)),
        }
    }

    pub fn intersect(&self, other: &AlgebraSet) -> AlgebraSet {
        let (a, b) = (&self.core, &other.core);
        match (self.complemented, other.complemented) {
            (false, false) => AlgebraSet::positive(a.intersect(b)),
            (false, true) => AlgebraSet::positive(a.difference(b)),
            (true, false) => AlgebraSet::positive(b.difference(a)),
            (true, true) => AlgebraSet::complement_of(a.union(b)),
        }
    }

    pub fn difference(&self, other: &AlgebraSet) -> AlgebraSet {
        let (a, b) = (&self.core, &other.core);
        match (self.complemented, other.complemented) {
            (false, false) => AlgebraSet::positive(a.difference(b)),
            (false, true) => AlgebraSet::positive(a.intersect(b)),
            (true, false) => AlgebraSet::complement_of(a.union(b)),
            (true, true) => AlgebraSet::positive(b.difference(a)),
        }
    }

    /// Semantic comparison. A complemented set is co-small: it can never be
    /// disjoint from, equal to, or contained in a plain ring set, and two
    /// complemented sets always meet.
    pub fn compare(&self, other: &AlgebraSet) -> SetRelation {
        let (a, b) = (&self.core, &other.core);
        match (self.complemented, other.complemented) {
            (false, false) => a.compare(b),
            (true, true) => match a.compare(b) {
                SetRelation::Equal => SetRelation::Equal,
                SetRelation::Subset => SetRelation::Superset,
                SetRelation::Superset => SetRelation::Subset,
                SetRelation::Disjoint | SetRelation::Overlapping => SetRelation::Overlapping,
            },
            (false, true) => {
                // self is the ring set, other is co-small.
                if a.intersect(b).is_empty() {
                    SetRelation::Subset
                } else if matches!(a.compare(b), SetRelation::Equal | SetRelation::Subset) {
                    SetRelation::Disjoint
                } else {
                    SetRelation::Overlapping
                }
            }
            (true, false) => match other.compare(self) {
                SetRelation::Subset => SetRelation::Superset,
                SetRelation::Superset => SetRelation::Subset,
                rel => rel,
            },
        }
    }
}

impl fmt::Display for AlgebraSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.complemented {
            if self.core.is_empty() {
                return write!(f, "Y");
            }
            write!(f, "~")?;
        }
        write!(f, "{}", self.core)
    }
}
