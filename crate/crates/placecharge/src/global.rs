//! Partitions into compact open sets, summability of the resulting series,
//! and the extension of a charge from the ring to the algebra.
//!
//! A partition splits its scope (the whole space, or one compact open set)
//! into disjoint nonempty compact open parts, finitely many per rational
//! place.  Over a full scope the part family is countable, so the total
//! charge becomes a series and its behaviour is a property of the tail
//! family: writing the tail of the charge as `a·λ + b/log + e·(±1)`, the
//! series over the default parts has terms `a + e·(-1)^k + b/log p_k`.  It
//! converges absolutely only when the tail vanishes; otherwise it diverges
//! to a definite sign, or diverges on both sides and the sum depends on the
//! enumeration.  Only in the first two cases does the charge extend to a
//! countably additive measure on the algebra; the common value of the series
//! is the total measure of the space, called the index here.  The extension
//! assigns a compact set its charge and a co-compact set the index minus the
//! charge of the complement; replacing the index by any other extended value
//! still yields a finitely additive extension, but countable additivity
//! singles the index out.

use std::collections::BTreeSet;
use std::fmt;

use num_traits::{Signed, Zero};

use crate::maps::ConsistentMap;
use crate::sets::{AlgebraSet, RingSet, SetRelation};
use crate::tower::{Level, Place, RationalPlace};
use crate::value::{MapValue, VALUE_REL_TOL};

/// What a partition divides: the whole space or one compact open set.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Scope {
    Full,
    Within(RingSet),
}

/// Raw description of a partition, before validation.
///
/// `exceptional` lists the rational places whose fiber (or scope slice) is
/// split, each with its parts in declared order; every other rational place
/// contributes its whole slice as a single default part.  `order` optionally
/// names rational places whose parts should lead the enumeration.
#[derive(Clone, Debug, Default)]
pub struct PartitionSpec {
    pub scope: Scope,
    pub exceptional: Vec<(RationalPlace, Vec<RingSet>)>,
    pub order: Vec<RationalPlace>,
}

impl Default for Scope {
    fn default() -> Scope {
        Scope::Full
    }
}

/// A validated partition of its scope into disjoint nonempty compact opens.
#[derive(Clone, Debug)]
pub struct Partition {
    scope: Scope,
    exceptional: Vec<(RationalPlace, Vec<RingSet>)>,
    order: Vec<RationalPlace>,
    is_basis: bool,
}

#[derive(thiserror::Error, Clone, Debug, PartialEq, Eq)]
pub enum GlobalError {
    #[error("not a partition: {detail}")]
    NotAPartition { detail: String },
    #[error("the partitions have different scopes")]
    ScopeMismatch,
    #[error("the first partition does not refine the second")]
    NotARefinement,
    #[error("the charge is not globally consistent")]
    NotGloballyConsistent,
    #[error("the sets are not pairwise disjoint: {detail}")]
    NotDisjoint { detail: String },
    #[error("the union does not belong to the algebra")]
    UnionNotInAlgebra,
    #[error("opposed infinities have no sum")]
    OpposedInfinities,
}

impl GlobalError {
    pub fn code(&self) -> &'static str {
        match self {
            GlobalError::NotAPartition { .. } => "NotAPartition",
            GlobalError::ScopeMismatch => "ScopeMismatch",
            GlobalError::NotARefinement => "NotARefinement",
            GlobalError::NotGloballyConsistent => "NotGloballyConsistent",
            GlobalError::NotDisjoint { .. } => "NotDisjoint",
            GlobalError::UnionNotInAlgebra => "UnionNotInAlgebra",
            GlobalError::OpposedInfinities => "OpposedInfinities",
        }
    }
}

impl PartitionSpec {
    pub fn validate(self) -> Result<Partition, GlobalError> {
        let PartitionSpec {
            scope,
            exceptional,
            order,
        } = self;
        let mut keys = BTreeSet::new();
        for (r, _) in &exceptional {
            if !keys.insert(*r) {
                return Err(GlobalError::NotAPartition {
                    detail: format!("two part lists for the place over {r}"),
                });
            }
        }
        let mut order_seen = BTreeSet::new();
        for r in &order {
            if !order_seen.insert(*r) {
                return Err(GlobalError::NotAPartition {
                    detail: format!("{r} appears twice in the enumeration order"),
                });
            }
        }

        let shell = Partition {
            scope,
            exceptional,
            order,
            is_basis: false,
        };
        for (r, parts) in &shell.exceptional {
            let slice = shell.slice(*r);
            for part in parts {
                if part.is_empty() {
                    return Err(GlobalError::NotAPartition {
                        detail: format!("an empty part over {r}"),
                    });
                }
                for w in part.places() {
                    if w.base() != *r {
                        return Err(GlobalError::NotAPartition {
                            detail: format!("the part over {r} contains {w}, which lies over {}", w.base()),
                        });
                    }
                }
            }
            for (i, a) in parts.iter().enumerate() {
                for b in &parts[i + 1..] {
                    let meet = a.intersect(b);
                    if !meet.is_empty() {
                        return Err(GlobalError::NotAPartition {
                            detail: format!("the parts over {r} overlap in {meet}"),
                        });
                    }
                }
            }
            let union = parts.iter().fold(RingSet::empty(), |acc, p| acc.union(p));
            if union != slice {
                return Err(GlobalError::NotAPartition {
                    detail: format!("the parts over {r} cover {union} instead of {slice}"),
                });
            }
        }

        let is_basis = shell.compute_is_basis();
        Ok(Partition { is_basis, ..shell })
    }
}

impl Partition {
    /// The trivial partition of the whole space into single-place cylinders.
    pub fn canonical() -> Partition {
        Partition {
            scope: Scope::Full,
            exceptional: Vec::new(),
            order: Vec::new(),
            is_basis: true,
        }
    }

    pub fn scope(&self) -> &Scope {
        &self.scope
    }

    /// True when every part is the cylinder of a single place.
    pub fn is_basis(&self) -> bool {
        self.is_basis
    }

    pub fn exceptional(&self) -> &[(RationalPlace, Vec<RingSet>)] {
        &self.exceptional
    }

    fn exceptional_keys(&self) -> BTreeSet<RationalPlace> {
        self.exceptional.iter().map(|(r, _)| *r).collect()
    }

    /// The portion of the scope lying over one rational place.
    fn slice(&self, r: RationalPlace) -> RingSet {
        match &self.scope {
            Scope::Full => RingSet::singleton(
                Place::new(Level::new(1), r, 0).expect("level-1 places are canonical"),
            ),
            Scope::Within(s) => RingSet::new(
                s.level(),
                s.places().iter().copied().filter(|w| w.base() == r).collect(),
            ),
        }
    }

    /// The rational places whose slice of the scope is nonempty.
    fn scope_bases(&self) -> Option<BTreeSet<RationalPlace>> {
        match &self.scope {
            Scope::Full => None,
            Scope::Within(s) => Some(s.places().iter().map(|w| w.base()).collect()),
        }
    }

    /// The parts lying over one rational place, in declared order.
    pub fn parts_above(&self, r: RationalPlace) -> Vec<RingSet> {
        if let Some((_, parts)) = self.exceptional.iter().find(|(k, _)| *k == r) {
            return parts.clone();
        }
        let slice = self.slice(r);
        if slice.is_empty() {
            Vec::new()
        } else {
            vec![slice]
        }
    }

    /// All parts in the enumeration order: places named by `order` first,
    /// then the remaining exceptional places in declared order, then every
    /// remaining rational place in the fixed enumeration.  Infinite for a
    /// full scope.
    pub fn parts_in_order(&self) -> Box<dyn Iterator<Item = RingSet> + '_> {
        let mut seen: BTreeSet<RationalPlace> = BTreeSet::new();
        let mut lead: Vec<RationalPlace> = Vec::new();
        for r in self
            .order
            .iter()
            .copied()
            .chain(self.exceptional.iter().map(|(r, _)| *r))
        {
            if seen.insert(r) {
                lead.push(r);
            }
        }
        let rest: Box<dyn Iterator<Item = RationalPlace>> = match self.scope_bases() {
            None => Box::new(RationalPlace::enumeration().filter(move |r| !seen.contains(r))),
            Some(bases) => Box::new(bases.into_iter().filter(move |r| !seen.contains(r))),
        };
        Box::new(
            lead.into_iter()
                .chain(rest)
                .flat_map(move |r| self.parts_above(r)),
        )
    }

    fn compute_is_basis(&self) -> bool {
        let exceptional_ok = self
            .exceptional
            .iter()
            .all(|(_, parts)| parts.iter().all(|p| p.places().len() == 1));
        let default_ok = match self.scope_bases() {
            None => true, // full default parts are single level-1 cylinders
            Some(bases) => {
                let keys = self.exceptional_keys();
                bases
                    .into_iter()
                    .filter(|r| !keys.contains(r))
                    .all(|r| self.slice(r).places().len() == 1)
            }
        };
        exceptional_ok && default_ok
    }
}

/// A verified refinement relation between two partitions of the same scope.
#[derive(Clone, Debug)]
pub struct Refinement {
    fine: Partition,
    coarse: Partition,
}

impl Refinement {
    pub fn fine(&self) -> &Partition {
        &self.fine
    }

    pub fn coarse(&self) -> &Partition {
        &self.coarse
    }

    /// The fine parts composing one coarse part.
    pub fn group_of(&self, part: &RingSet) -> Vec<RingSet> {
        let Some(w) = part.places().iter().next() else {
            return Vec::new();
        };
        self.fine
            .parts_above(w.base())
            .into_iter()
            .filter(|p| matches!(p.compare(part), SetRelation::Subset | SetRelation::Equal))
            .collect()
    }
}

/// Checks whether `fine` refines `coarse`; `Some` carries the grouping.
pub fn refinement(fine: &Partition, coarse: &Partition) -> Result<Option<Refinement>, GlobalError> {
    if fine.scope != coarse.scope {
        return Err(GlobalError::ScopeMismatch);
    }
    let mut places = fine.exceptional_keys();
    places.extend(coarse.exceptional_keys());
    for r in places {
        let coarse_parts = coarse.parts_above(r);
        for p in fine.parts_above(r) {
            let inside = coarse_parts
                .iter()
                .any(|cp| matches!(p.compare(cp), SetRelation::Subset | SetRelation::Equal));
            if !inside {
                return Ok(None);
            }
        }
    }
    Ok(Some(Refinement {
        fine: fine.clone(),
        coarse: coarse.clone(),
    }))
}

/// The coarsest partition refining both arguments: nonempty pairwise
/// intersections of parts over each rational place.
pub fn common_refinement(a: &Partition, b: &Partition) -> Result<Partition, GlobalError> {
    if a.scope != b.scope {
        return Err(GlobalError::ScopeMismatch);
    }
    let mut places = a.exceptional_keys();
    places.extend(b.exceptional_keys());
    let mut exceptional = Vec::new();
    for r in places {
        let mut parts = Vec::new();
        for pa in a.parts_above(r) {
            for pb in b.parts_above(r) {
                let meet = pa.intersect(&pb);
                if !meet.is_empty() {
                    parts.push(meet);
                }
            }
        }
        exceptional.push((r, parts));
    }
    PartitionSpec {
        scope: a.scope.clone(),
        exceptional,
        order: a.order.clone(),
    }
    .validate()
}

/// Verifies the prefix identity between a partition and a refinement of it:
/// summing the first `n` coarse parts' charges agrees with summing the
/// charges of all their fine pieces, exactly for exact values and within
/// [`VALUE_REL_TOL`] relative error otherwise.
pub fn refine_prefix_check(
    c: &ConsistentMap,
    fine: &Partition,
    coarse: &Partition,
    n: usize,
) -> Result<bool, GlobalError> {
    let Some(refn) = refinement(fine, coarse)? else {
        return Err(GlobalError::NotARefinement);
    };
    let mut coarse_sum = MapValue::zero();
    let mut fine_sum = MapValue::zero();
    for part in coarse.parts_in_order().take(n) {
        coarse_sum = coarse_sum.add(&c.charge(&part));
        for piece in refn.group_of(&part) {
            fine_sum = fine_sum.add(&c.charge(&piece));
        }
    }
    Ok(fine_sum.agrees_within(&coarse_sum, VALUE_REL_TOL))
}

/// Behaviour of the total-charge series over a partition's parts.
#[derive(Clone, Debug, PartialEq)]
pub enum Classification {
    /// Converges absolutely; the sum is enumeration-independent.
    Finite(MapValue),
    /// Diverges to `+∞` under every enumeration.
    PlusInfinity,
    /// Diverges to `-∞` under every enumeration.
    MinusInfinity,
    /// Converges or diverges depending on the enumeration.
    Conditional,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Finite(v) => write!(f, "finite {v}"),
            Classification::PlusInfinity => write!(f, "+inf"),
            Classification::MinusInfinity => write!(f, "-inf"),
            Classification::Conditional => write!(f, "conditional"),
        }
    }
}

/// Classifies the series `Σ c(part)` over the partition's parts.
pub fn classify_series(c: &ConsistentMap, partition: &Partition) -> Classification {
    let mut exact = MapValue::zero();
    for (_, parts) in &partition.exceptional {
        for part in parts {
            exact = exact.add(&c.charge(part));
        }
    }
    let keys = partition.exceptional_keys();
    match partition.scope_bases() {
        Some(bases) => {
            // a compact scope has finitely many parts, so the sum is finite
            for r in bases {
                if !keys.contains(&r) {
                    exact = exact.add(&c.charge(&partition.slice(r)));
                }
            }
            Classification::Finite(exact)
        }
        None => {
            for (r, v) in c.base_table() {
                if !keys.contains(r) {
                    exact = exact.add(v);
                }
            }
            // every remaining default part contributes a + e·(-1)^k + b/log p_k
            let a = c.tail().lambda_part();
            let b = c.tail().reciprocal_log_part();
            let e = c.tail().alternating_part();
            if a.is_zero() && b.is_zero() && e.is_zero() {
                return Classification::Finite(exact);
            }
            if e.is_zero() {
                let positive = if !a.is_zero() {
                    a.is_positive()
                } else {
                    b.is_positive()
                };
                return if positive {
                    Classification::PlusInfinity
                } else {
                    Classification::MinusInfinity
                };
            }
            let even_side = a + e;
            let odd_side = a - e;
            let zero_side = even_side.is_zero() || odd_side.is_zero();
            let pos = even_side.is_positive()
                || odd_side.is_positive()
                || (zero_side && b.is_positive());
            let neg = even_side.is_negative()
                || odd_side.is_negative()
                || (zero_side && b.is_negative());
            match (pos, neg) {
                (true, true) => Classification::Conditional,
                (true, false) => Classification::PlusInfinity,
                (false, true) => Classification::MinusInfinity,
                (false, false) => unreachable!("a nonzero alternating tail diverges on one side"),
            }
        }
    }
}

/// True when the total-charge series has the same behaviour under every
/// enumeration of the canonical parts.
pub fn is_globally_consistent(c: &ConsistentMap) -> bool {
    !matches!(
        classify_series(c, &Partition::canonical()),
        Classification::Conditional
    )
}

/// A value in the extended line: finite, or one of the two infinities.
#[derive(Clone, Debug, PartialEq)]
pub enum ExtendedValue {
    Finite(MapValue),
    PlusInfinity,
    MinusInfinity,
}

impl ExtendedValue {
    pub fn add(&self, other: &ExtendedValue) -> Result<ExtendedValue, GlobalError> {
        use ExtendedValue::*;
        Ok(match (self, other) {
            (Finite(a), Finite(b)) => Finite(a.add(b)),
            (PlusInfinity, MinusInfinity) | (MinusInfinity, PlusInfinity) => {
                return Err(GlobalError::OpposedInfinities)
            }
            (PlusInfinity, _) | (_, PlusInfinity) => PlusInfinity,
            (MinusInfinity, _) | (_, MinusInfinity) => MinusInfinity,
        })
    }

    /// Subtraction of a finite value, which never opposes an infinity.
    pub fn sub_finite(&self, v: &MapValue) -> ExtendedValue {
        match self {
            ExtendedValue::Finite(a) => ExtendedValue::Finite(a.add(&v.neg())),
            inf => inf.clone(),
        }
    }

    pub fn agrees_within(&self, other: &ExtendedValue, tol: f64) -> bool {
        use ExtendedValue::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.agrees_within(b, tol),
            (PlusInfinity, PlusInfinity) | (MinusInfinity, MinusInfinity) => true,
            _ => false,
        }
    }
}

impl fmt::Display for ExtendedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedValue::Finite(v) => write!(f, "{v}"),
            ExtendedValue::PlusInfinity => write!(f, "+inf"),
            ExtendedValue::MinusInfinity => write!(f, "-inf"),
        }
    }
}

/// The total measure of the space under a globally consistent charge.
pub fn index(c: &ConsistentMap) -> Result<ExtendedValue, GlobalError> {
    match classify_series(c, &Partition::canonical()) {
        Classification::Finite(v) => Ok(ExtendedValue::Finite(v)),
        Classification::PlusInfinity => Ok(ExtendedValue::PlusInfinity),
        Classification::MinusInfinity => Ok(ExtendedValue::MinusInfinity),
        Classification::Conditional => Err(GlobalError::NotGloballyConsistent),
    }
}

/// The canonical extension of a globally consistent charge to the algebra:
/// a compact set keeps its charge, a co-compact set gets the index minus the
/// charge of the complement.
pub fn algebra_measure(c: &ConsistentMap, a: &AlgebraSet) -> Result<ExtendedValue, GlobalError> {
    let idx = index(c)?;
    Ok(if a.is_complemented() {
        idx.sub_finite(&c.charge(a.core()))
    } else {
        ExtendedValue::Finite(c.charge(a.core()))
    })
}

/// The extension of a charge to the algebra that assigns `r` to the whole
/// space.  Always finitely additive, whatever `r` is.
pub fn finitely_additive_extension(
    c: &ConsistentMap,
    r: &ExtendedValue,
    a: &AlgebraSet,
) -> ExtendedValue {
    if a.is_complemented() {
        r.sub_finite(&c.charge(a.core()))
    } else {
        ExtendedValue::Finite(c.charge(a.core()))
    }
}

/// True when the extension assigning `r` to the whole space is countably
/// additive, which happens exactly for the index of a globally consistent
/// charge.
pub fn is_countably_additive(c: &ConsistentMap, r: &ExtendedValue) -> bool {
    match index(c) {
        Ok(idx) => r.agrees_within(&idx, VALUE_REL_TOL),
        Err(_) => false,
    }
}

/// A disjoint family whose union's measure is to be compared with the sum
/// of the parts' measures.
pub enum AdditivityInput<'a> {
    /// Finitely many algebra sets.
    Sets(&'a [AlgebraSet]),
    /// A partition's parts, optionally together with one complemented set.
    Family {
        partition: &'a Partition,
        complemented: Option<&'a AlgebraSet>,
    },
}

/// Outcome of an additivity check.
#[derive(Clone, Debug, PartialEq)]
pub enum AdditivityReport {
    /// Finitely many compact parts: plain charges on both sides.
    FiniteRing {
        part_sum: MapValue,
        union_charge: MapValue,
        holds: bool,
    },
    /// Finitely many parts, one of them co-compact: extended values.
    WithComplement {
        part_sum: ExtendedValue,
        union_value: ExtendedValue,
        holds: bool,
    },
    /// Countably many compact parts covering the whole space.
    InfiniteFamily {
        series: Classification,
        union_value: ExtendedValue,
        holds: bool,
    },
    /// The requested family cannot exist as a disjoint cover.
    ImpossibleConfiguration { detail: String },
}

impl AdditivityReport {
    pub fn holds(&self) -> bool {
        match self {
            AdditivityReport::FiniteRing { holds, .. } => *holds,
            AdditivityReport::WithComplement { holds, .. } => *holds,
            AdditivityReport::InfiniteFamily { holds, .. } => *holds,
            AdditivityReport::ImpossibleConfiguration { .. } => false,
        }
    }
}

/// Compares the measure of a disjoint union with the sum of the parts'
/// measures, in the configuration-appropriate sense.
pub fn additivity_check(
    c: &ConsistentMap,
    input: AdditivityInput<'_>,
) -> Result<AdditivityReport, GlobalError> {
    match input {
        AdditivityInput::Sets(sets) => finite_family(c, sets),
        AdditivityInput::Family {
            partition,
            complemented,
        } => match (&partition.scope, complemented) {
            (Scope::Full, None) => infinite_family(c, partition),
            (Scope::Full, Some(extra)) => {
                if extra.is_ring() {
                    if extra.is_empty() {
                        infinite_family(c, partition)
                    } else {
                        Err(GlobalError::NotDisjoint {
                            detail: "a full-scope family already covers every place".into(),
                        })
                    }
                } else {
                    Ok(AdditivityReport::ImpossibleConfiguration {
                        detail: format!(
                            "countably many disjoint compact parts cover the whole space, \
                             leaving no room for the co-compact set {extra}"
                        ),
                    })
                }
            }
            (Scope::Within(_), _) => {
                let mut sets: Vec<AlgebraSet> = partition
                    .parts_in_order()
                    .map(AlgebraSet::positive)
                    .collect();
                if let Some(extra) = complemented {
                    sets.push(extra.clone());
                }
                finite_family(c, &sets)
            }
        },
    }
}

fn finite_family(c: &ConsistentMap, sets: &[AlgebraSet]) -> Result<AdditivityReport, GlobalError> {
    let complemented = sets.iter().filter(|s| s.is_complemented()).count();
    if complemented >= 2 {
        return Err(GlobalError::NotDisjoint {
            detail: "two co-compact sets always intersect".into(),
        });
    }
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            let meet = a.intersect(b);
            if !meet.is_empty() {
                return Err(GlobalError::NotDisjoint {
                    detail: format!("{a} and {b} overlap in {meet}"),
                });
            }
        }
    }
    let union = sets
        .iter()
        .fold(AlgebraSet::empty(), |acc, s| acc.union(s));
    if complemented == 0 {
        let part_sum: MapValue = sets.iter().map(|s| c.charge(s.core())).sum();
        let union_charge = c.charge(union.core());
        let holds = part_sum.agrees_within(&union_charge, VALUE_REL_TOL);
        Ok(AdditivityReport::FiniteRing {
            part_sum,
            union_charge,
            holds,
        })
    } else {
        let mut part_sum = ExtendedValue::Finite(MapValue::zero());
        for s in sets {
            part_sum = part_sum.add(&algebra_measure(c, s)?)?;
        }
        let union_value = algebra_measure(c, &union)?;
        let holds = part_sum.agrees_within(&union_value, VALUE_REL_TOL);
        Ok(AdditivityReport::WithComplement {
            part_sum,
            union_value,
            holds,
        })
    }
}

fn infinite_family(
    c: &ConsistentMap,
    partition: &Partition,
) -> Result<AdditivityReport, GlobalError> {
    let union_value = index(c)?; // the union of all parts is the whole space
    let series = classify_series(c, partition);
    let holds = match (&series, &union_value) {
        (Classification::Finite(a), ExtendedValue::Finite(b)) => a.agrees_within(b, VALUE_REL_TOL),
        (Classification::PlusInfinity, ExtendedValue::PlusInfinity) => true,
        (Classification::MinusInfinity, ExtendedValue::MinusInfinity) => true,
        _ => false,
    };
    Ok(AdditivityReport::InfiniteFamily {
        series,
        union_value,
        holds,
    })
}
