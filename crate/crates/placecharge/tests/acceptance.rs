//! Acceptance gate: ten numbered end-to-end criteria, each printing a single
//! `criterion NN <name>: pass` line (run with `--nocapture` to see them all).
//! Tolerances are pinned here: exact checks use `==` or `is_zero`, numeric
//! checks use 1e-9 for the product formula and 1e-12 relative agreement
//! everywhere else.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, resume_unwind, UnwindSafe};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use placecharge::global::{
    additivity_check, algebra_measure, classify_series, common_refinement,
    finitely_additive_extension, index, is_countably_additive, is_globally_consistent,
    refine_prefix_check, AdditivityInput, AdditivityReport, Classification, ExtendedValue,
    Partition, PartitionSpec, Scope,
};
use placecharge::integrate::{integrate_element, AlgebraicElement, PRODUCT_FORMULA_TOL};
use placecharge::maps::{ConsistentMap, MapSpec, OverrideLevel, Tail};
use placecharge::sets::{AlgebraSet, RingSet};
use placecharge::tower::{places_above, Level, Place, RationalPlace};
use placecharge::value::{MapValue, VALUE_REL_TOL};

const AGREE_TOL: f64 = VALUE_REL_TOL; // 1e-12

fn report(number: u32, name: &str, run: impl FnOnce() + UnwindSafe) {
    let start = Instant::now();
    match catch_unwind(run) {
        Ok(()) => println!(
            "criterion {number:02} {name}: pass ({:.2?})",
            start.elapsed()
        ),
        Err(cause) => {
            println!("criterion {number:02} {name}: FAIL");
            resume_unwind(cause);
        }
    }
}

fn canonical_levels(max: u64) -> Vec<u64> {
    (1..=max)
        .filter(|&n| n == 1 || (n > 2 && n % 4 != 2))
        .collect()
}

fn bases() -> Vec<RationalPlace> {
    let mut v: Vec<RationalPlace> = [2u64, 3, 5, 7, 11, 13]
        .iter()
        .map(|&p| RationalPlace::finite(p).unwrap())
        .collect();
    v.push(RationalPlace::Infinite);
    v
}

fn fp(p: u64) -> RationalPlace {
    RationalPlace::finite(p).unwrap()
}

fn inf() -> RationalPlace {
    RationalPlace::Infinite
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn small_rat(rng: &mut ChaCha8Rng) -> BigRational {
    rat(rng.gen_range(-6..=6), rng.gen_range(1..=4))
}

fn nonzero_rat(rng: &mut ChaCha8Rng) -> BigRational {
    loop {
        let q = small_rat(rng);
        if q != rat(0, 1) {
            return q;
        }
    }
}

/// A random map with rational values only: random base table over the first
/// few rational places, a constant or zero tail, and sometimes a one- or
/// two-level override chain over 2.
fn random_rational_map(rng: &mut ChaCha8Rng) -> ConsistentMap {
    let mut table = BTreeMap::new();
    for r in [inf(), fp(2), fp(3), fp(5), fp(7)] {
        if rng.gen_bool(0.5) {
            table.insert(r, MapValue::rational(small_rat(rng)));
        }
    }
    let tail = if rng.gen_bool(0.5) {
        Tail::new(small_rat(rng), rat(0, 1), rat(0, 1))
    } else {
        Tail::zero()
    };
    let mut spec = MapSpec {
        table,
        tail,
        overrides: Vec::new(),
    };

    if rng.gen_bool(0.4) {
        // split the charge over 2 at level 21, sometimes refined at 105
        let base2 = spec
            .table
            .get(&fp(2))
            .cloned()
            .unwrap_or_else(|| MapValue::rational(spec.tail.lambda_part().clone()));
        let at21 = places_above(Level::new(21), fp(2));
        let first = MapValue::rational(small_rat(rng));
        let second = base2.add(&first.neg());
        let mut entries21 = BTreeMap::new();
        entries21.insert(at21[0], first.clone());
        entries21.insert(at21[1], second.clone());
        spec.overrides.push(OverrideLevel {
            level: Level::new(21),
            entries: entries21,
        });
        if rng.gen_bool(0.5) {
            let mut entries105 = BTreeMap::new();
            for (parent, total) in [(at21[0], first), (at21[1], second)] {
                let fiber = parent.fiber(Level::new(105)).unwrap();
                let piece = MapValue::rational(small_rat(rng));
                entries105.insert(fiber[0], piece.clone());
                entries105.insert(fiber[1], total.add(&piece.neg()));
            }
            spec.overrides.push(OverrideLevel {
                level: Level::new(105),
                entries: entries105,
            });
        }
    }
    spec.validate().expect("constructed to be consistent")
}

/// A random globally consistent map; tails avoid the conditional family.
fn random_consistent_map(rng: &mut ChaCha8Rng) -> ConsistentMap {
    let mut table = BTreeMap::new();
    for r in [inf(), fp(2), fp(3), fp(5)] {
        if rng.gen_bool(0.5) {
            table.insert(r, MapValue::rational(small_rat(rng)));
        }
    }
    let tail = match rng.gen_range(0..4) {
        0 => Tail::zero(),
        1 => Tail::new(nonzero_rat(rng), rat(0, 1), rat(0, 1)),
        2 => {
            table
                .entry(inf())
                .or_insert_with(|| MapValue::rational(small_rat(rng)));
            Tail::new(rat(0, 1), nonzero_rat(rng), rat(0, 1))
        }
        _ => {
            // an alternating part dominated by the uniform part stays one-sided
            let e = nonzero_rat(rng);
            let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
            let a = (e.clone() * rat(2, 1)).abs() * rat(sign, 1);
            Tail::new(a, rat(0, 1), e)
        }
    };
    MapSpec {
        table,
        tail,
        overrides: Vec::new(),
    }
    .validate()
    .expect("constructed to be consistent")
}

use num_traits::Signed;

/// Groups the places of one fiber at `level` over `base` into 1–3 parts.
fn random_fiber_split(
    rng: &mut ChaCha8Rng,
    level: u64,
    base: RationalPlace,
) -> Vec<RingSet> {
    let places = places_above(Level::new(level), base);
    let groups = rng.gen_range(1..=3.min(places.len()));
    loop {
        let mut buckets: BTreeMap<usize, Vec<Place>> = BTreeMap::new();
        for w in &places {
            buckets.entry(rng.gen_range(0..groups)).or_default().push(*w);
        }
        if buckets.len() == groups {
            return buckets.into_values().map(RingSet::from_places).collect();
        }
    }
}

fn random_split_partition(rng: &mut ChaCha8Rng) -> Partition {
    let mut exceptional = Vec::new();
    if rng.gen_bool(0.8) {
        let level = *[7u64, 15, 21, 105].iter().filter(|&&l| l != 15).chain([&15]).nth(rng.gen_range(0..4)).unwrap();
        exceptional.push((fp(2), random_fiber_split(rng, level, fp(2))));
    }
    if rng.gen_bool(0.4) {
        exceptional.push((fp(3), random_fiber_split(rng, 8, fp(3))));
    }
    if rng.gen_bool(0.3) {
        exceptional.push((inf(), random_fiber_split(rng, 12, inf())));
    }
    PartitionSpec {
        scope: Scope::Full,
        exceptional,
        order: Vec::new(),
    }
    .validate()
    .expect("grouped fibers partition their fibers")
}

#[test]
fn criterion_01_fiber_degree_sums() {
    report(1, "fiber degree sums", || {
        let start = Instant::now();
        let levels = canonical_levels(200);
        let bases = bases();
        for &sup in &levels {
            let big = Level::new(sup);
            for sub in big.canonical_divisors() {
                for &base in &bases {
                    for v in places_above(sub, base) {
                        let total: u64 = v
                            .fiber(big)
                            .unwrap()
                            .iter()
                            .map(|w| w.local_degree())
                            .sum();
                        assert_eq!(
                            total,
                            v.local_degree() * big.degree() / sub.degree(),
                            "level {} -> {}, place {}",
                            sub.get(),
                            sup,
                            v
                        );
                    }
                }
            }
        }
        assert!(
            start.elapsed() < Duration::from_secs(5),
            "degree sweep took {:?}",
            start.elapsed()
        );
    });
}

#[test]
fn criterion_02_uniform_charge_normalization() {
    report(2, "uniform charge normalization", || {
        let lambda = ConsistentMap::lambda();
        for &base in &bases() {
            let fiber = RingSet::singleton(Place::new(Level::new(1), base, 0).unwrap());
            assert_eq!(lambda.charge(&fiber), MapValue::from_integer(1), "{base}");
        }

        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE02);
        let levels = canonical_levels(200);
        let multiples = canonical_levels(1200);
        let all_bases = bases();
        for _ in 0..1000 {
            let n = levels[rng.gen_range(0..levels.len())];
            let base = all_bases[rng.gen_range(0..all_bases.len())];
            let at_n = places_above(Level::new(n), base);
            let v = at_n[rng.gen_range(0..at_n.len())];
            let sups: Vec<u64> = multiples.iter().copied().filter(|m| m % n == 0).collect();
            let sup = Level::new(sups[rng.gen_range(0..sups.len())]);
            let total: MapValue = v
                .fiber(sup)
                .unwrap()
                .into_iter()
                .map(|w| lambda.evaluate(w))
                .sum();
            assert_eq!(total, lambda.evaluate(v), "fiber of {v} at {}", sup.get());
        }
    });
}

#[test]
fn criterion_03_charges_are_presentation_independent() {
    report(3, "charges are presentation independent", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE03);
        let levels = canonical_levels(120);
        let all_bases = bases();

        // two independent disjoint decompositions of one set agree exactly
        for _ in 0..500 {
            let c = random_rational_map(&mut rng);
            let n = levels[rng.gen_range(0..levels.len())];
            let mut picked = Vec::new();
            for _ in 0..rng.gen_range(1..=3) {
                let base = all_bases[rng.gen_range(0..all_bases.len())];
                let at_n = places_above(Level::new(n), base);
                for w in at_n {
                    if rng.gen_bool(0.4) {
                        picked.push(w);
                    }
                }
            }
            let set = RingSet::from_places(picked);
            let direct = c.charge(&set);

            // decomposition one: the canonical places, one by one
            let one: MapValue = set
                .places()
                .iter()
                .map(|w| c.charge(&RingSet::singleton(*w)))
                .sum();

            // decomposition two: lift to a finer level and group at random
            let sup = Level::new(n).compositum(Level::new(
                [3u64, 8, 21][rng.gen_range(0..3)],
            ));
            let lifted = set.lift(sup).unwrap();
            let mut groups: BTreeMap<usize, Vec<Place>> = BTreeMap::new();
            for w in lifted.places() {
                groups.entry(rng.gen_range(0..3)).or_default().push(*w);
            }
            let two: MapValue = groups
                .into_values()
                .map(|ws| c.charge(&RingSet::from_places(ws)))
                .sum();

            assert_eq!(direct, one, "canonical decomposition of {set}");
            assert_eq!(direct, two, "lifted decomposition of {set}");
        }

        // a map is recovered from its charges on single-place cylinders
        let maps: Vec<ConsistentMap> = (0..5).map(|_| random_rational_map(&mut rng)).collect();
        for k in 0..1000 {
            let c = &maps[k % maps.len()];
            let n = levels[rng.gen_range(0..levels.len())];
            let base = all_bases[rng.gen_range(0..all_bases.len())];
            let at_n = places_above(Level::new(n), base);
            let v = at_n[rng.gen_range(0..at_n.len())];
            assert_eq!(
                c.charge(&RingSet::singleton(v)),
                c.evaluate(v),
                "round trip at {v}"
            );
        }

        // the charge is linear in the map
        for _ in 0..100 {
            let a = random_rational_map(&mut rng);
            let b = random_rational_map(&mut rng);
            let q = small_rat(&mut rng);
            let n = levels[rng.gen_range(0..levels.len())];
            let base = all_bases[rng.gen_range(0..all_bases.len())];
            let set = RingSet::from_places(
                places_above(Level::new(n), base)
                    .into_iter()
                    .filter(|_| rng.gen_bool(0.5)),
            );
            assert_eq!(
                a.add(&b).charge(&set),
                a.charge(&set).add(&b.charge(&set))
            );
            assert_eq!(a.scale(&q).charge(&set), a.charge(&set).scale(&q));
        }
    });
}

fn count_prime_factors(mut n: u64) -> u64 {
    let mut count = 0;
    let mut d = 2;
    while d * d <= n {
        while n % d == 0 {
            count += 1;
            n /= d;
        }
        d += 1;
    }
    if n > 1 {
        count += 1;
    }
    count
}

#[test]
fn criterion_04_prime_factor_counting() {
    report(4, "prime factor counting", || {
        let start = Instant::now();
        let omega = ConsistentMap::omega();
        for n in 2..=10_000u64 {
            let alpha = AlgebraicElement::rational(BigRational::from_integer(n.into())).unwrap();
            let got = integrate_element(&omega, &alpha);
            assert!(!got.is_float(), "n = {n} gave a float");
            assert_eq!(
                got,
                MapValue::from_integer(count_prime_factors(n) as i64),
                "n = {n}"
            );
        }
        assert!(
            start.elapsed() < Duration::from_secs(10),
            "factor-count sweep took {:?}",
            start.elapsed()
        );
    });
}

#[test]
fn criterion_05_product_formula() {
    report(5, "product formula", || {
        let lambda = ConsistentMap::lambda();
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE05);
        for _ in 0..200 {
            let numer = rng.gen_range(1..=1_000_000i64) * if rng.gen_bool(0.5) { -1 } else { 1 };
            let denom = rng.gen_range(1..=1_000_000i64);
            let alpha = AlgebraicElement::rational(rat(numer, denom)).unwrap();
            let total = integrate_element(&lambda, &alpha);
            assert!(!total.is_float(), "{numer}/{denom} gave a float");
            assert!(total.is_zero(), "{numer}/{denom} gave {total}");
        }
        for p in [3u64, 5, 7, 11, 13] {
            let u = AlgebraicElement::cyclotomic_unit(p).unwrap();
            let total = integrate_element(&lambda, &u);
            assert!(
                total.to_f64().abs() < PRODUCT_FORMULA_TOL,
                "p = {p} gave {total}"
            );
        }
    });
}

#[test]
fn criterion_06_conditional_counterexample() {
    report(6, "conditional counterexample", || {
        let alternating = ConsistentMap::alternating();
        assert!(!is_globally_consistent(&alternating));
        assert_eq!(
            classify_series(&alternating, &Partition::canonical()),
            Classification::Conditional
        );
        assert!(index(&alternating).is_err());

        let omega = ConsistentMap::omega();
        assert!(is_globally_consistent(&omega));
        assert_eq!(index(&omega).unwrap(), ExtendedValue::MinusInfinity);

        assert_eq!(
            index(&ConsistentMap::lambda()).unwrap(),
            ExtendedValue::PlusInfinity
        );
    });
}

#[test]
fn criterion_07_prefix_sums_across_refinements() {
    report(7, "prefix sums across refinements", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE07);
        for case in 0..100 {
            let c = match case % 3 {
                0 => ConsistentMap::omega(),
                1 => ConsistentMap::lambda(),
                _ => random_rational_map(&mut rng),
            };
            let coarse = random_split_partition(&mut rng);
            let other = random_split_partition(&mut rng);
            let fine = common_refinement(&coarse, &other).unwrap();
            for _ in 0..4 {
                let n = rng.gen_range(0..=50);
                assert!(
                    refine_prefix_check(&c, &fine, &coarse, n).unwrap(),
                    "case {case}, n = {n}"
                );
            }
        }
    });
}

#[test]
fn criterion_08_classification_is_partition_free() {
    report(8, "classification is partition free", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE08);
        for _ in 0..10 {
            let c = random_consistent_map(&mut rng);
            let reference = classify_series(&c, &Partition::canonical());
            assert_ne!(reference, Classification::Conditional);
            for _ in 0..20 {
                let p = random_split_partition(&mut rng);
                let got = classify_series(&c, &p);
                match (&got, &reference) {
                    (Classification::Finite(a), Classification::Finite(b)) => {
                        assert!(a.agrees_within(b, AGREE_TOL), "{a} vs {b}")
                    }
                    (x, y) => assert_eq!(x, y),
                }
            }
        }
    });
}

#[test]
fn criterion_09_additivity_configurations() {
    report(9, "additivity configurations", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE09);
        let lambda = ConsistentMap::lambda();
        let omega = ConsistentMap::omega();

        // finitely many compact parts
        for k in 0..30 {
            let c = match k % 3 {
                0 => lambda.clone(),
                1 => omega.clone(),
                _ => random_rational_map(&mut rng),
            };
            let mut parts: Vec<AlgebraSet> = random_fiber_split(&mut rng, 105, fp(2))
                .into_iter()
                .map(AlgebraSet::positive)
                .collect();
            if rng.gen_bool(0.5) {
                parts.push(AlgebraSet::positive(RingSet::singleton(
                    Place::new(Level::new(1), fp(3), 0).unwrap(),
                )));
            }
            let report = additivity_check(&c, AdditivityInput::Sets(&parts)).unwrap();
            assert!(
                matches!(report, AdditivityReport::FiniteRing { holds: true, .. }),
                "case {k}: {report:?}"
            );
        }

        // one complemented part beside compact ones
        for k in 0..20 {
            let c = match k % 3 {
                0 => lambda.clone(),
                1 => omega.clone(),
                _ => random_consistent_map(&mut rng),
            };
            let core = RingSet::from_places(
                places_above(Level::new(21), fp(2))
                    .into_iter()
                    .filter(|_| rng.gen_bool(0.5))
                    .chain([Place::new(Level::new(1), inf(), 0).unwrap()]),
            );
            let parts = [
                AlgebraSet::positive(core.clone()),
                AlgebraSet::complement_of(core),
            ];
            let report = additivity_check(&c, AdditivityInput::Sets(&parts)).unwrap();
            assert!(
                matches!(report, AdditivityReport::WithComplement { holds: true, .. }),
                "case {k}: {report:?}"
            );
        }

        // countably many compact parts covering everything
        let finite_map = MapSpec {
            table: BTreeMap::from([
                (inf(), MapValue::from_integer(1)),
                (fp(2), MapValue::from_integer(-3)),
            ]),
            ..MapSpec::default()
        }
        .validate()
        .unwrap();
        for c in [&lambda, &omega, &finite_map] {
            for partition in [Partition::canonical(), random_split_partition(&mut rng)] {
                let report = additivity_check(
                    c,
                    AdditivityInput::Family {
                        partition: &partition,
                        complemented: None,
                    },
                )
                .unwrap();
                assert!(
                    matches!(report, AdditivityReport::InfiniteFamily { holds: true, .. }),
                    "{report:?}"
                );
            }
        }

        // a complemented part beside a full family cannot be disjoint
        let co = AlgebraSet::complement_of(RingSet::singleton(
            Place::new(Level::new(1), fp(2), 0).unwrap(),
        ));
        let report = additivity_check(
            &lambda,
            AdditivityInput::Family {
                partition: &Partition::canonical(),
                complemented: Some(&co),
            },
        )
        .unwrap();
        assert!(matches!(
            report,
            AdditivityReport::ImpossibleConfiguration { .. }
        ));
    });
}

#[test]
fn criterion_10_countable_additivity_picks_the_index() {
    report(10, "countable additivity picks the index", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE10);
        for _ in 0..20 {
            let c = random_consistent_map(&mut rng);
            let idx = index(&c).unwrap();

            let mut candidates = vec![
                idx.clone(),
                ExtendedValue::Finite(MapValue::zero()),
                ExtendedValue::PlusInfinity,
                ExtendedValue::MinusInfinity,
            ];
            if let ExtendedValue::Finite(v) = &idx {
                candidates.push(ExtendedValue::Finite(v.add(&MapValue::from_integer(1))));
            }

            for r in &candidates {
                let expected = r.agrees_within(&idx, AGREE_TOL);
                assert_eq!(is_countably_additive(&c, r), expected, "r = {r}");

                // finite additivity holds for every r, right or wrong
                let ring = RingSet::from_places(
                    places_above(Level::new(21), fp(2))
                        .into_iter()
                        .filter(|_| rng.gen_bool(0.5)),
                );
                let complemented = AlgebraSet::complement_of(
                    ring.union(&RingSet::singleton(
                        Place::new(Level::new(1), fp(5), 0).unwrap(),
                    )),
                );
                let compact = AlgebraSet::positive(ring);
                let sum = finitely_additive_extension(&c, r, &compact)
                    .add(&finitely_additive_extension(&c, r, &complemented))
                    .unwrap();
                let union = finitely_additive_extension(&c, r, &compact.union(&complemented));
                assert!(
                    sum.agrees_within(&union, AGREE_TOL),
                    "r = {r}: {sum} vs {union}"
                );
            }
            assert!(is_countably_additive(&c, &idx));

            // the canonical extension agrees with the finitely additive one at the index
            let probe = AlgebraSet::complement_of(RingSet::singleton(
                Place::new(Level::new(1), fp(3), 0).unwrap(),
            ));
            assert!(algebra_measure(&c, &probe)
                .unwrap()
                .agrees_within(&finitely_additive_extension(&c, &idx, &probe), AGREE_TOL));
        }
    });
}
