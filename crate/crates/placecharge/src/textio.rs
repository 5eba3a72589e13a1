//! Text forms of places, sets, values, elements, maps, and partitions.
//!
//! Literal grammar:
//!
//! * place: `n:p:rep` with `inf` for the infinite base, e.g. `7:2:1`
//! * rational place: `inf` or a prime
//! * set: `Y`, `[place, …]`, or `~[place, …]`; places may mix levels
//! * value: a rational `q`, a quotient `q/log(p)`, a signed sum of
//!   rationals and `q*log(p)` terms, or a lone decimal float
//! * element: `rat:q`, `cycunit:p`, or `file:path` to a profile file
//!
//! Files are TOML.  A map file selects a builtin (`kind = "builtin"`,
//! `name = "lambda" | "omega" | "alternating"`) or describes one (`kind =
//! "spec"`) through `base.table` (a list of `{place, value}` with rational
//! place keys), `base.tail` (`family = "zero" | "constant" |
//! "reciprocal-log" | "alternating"` with an optional rational `coeff`),
//! and `overrides` (a list of `{level, entries}`).  A partition file gives
//! `scope` (`"Y"` or a compact set literal), `exceptional` (a list of
//! `{place, parts}`), and an optional `order` of rational place literals.
//! A profile file gives `level` and `values` (a list of `{place, value}`
//! at that level).
//!
//! Errors distinguish malformed text ([`ParseError::is_syntax`]) from
//! well-formed text naming an invalid object, which wraps the rejecting
//! module's error.

use std::collections::BTreeMap;
use std::fs;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::arith;
use crate::global::{ExtendedValue, GlobalError, Partition, PartitionSpec, Scope};
use crate::integrate::{AlgebraicElement, ElementError, SimpleFunction};
use crate::maps::{ConsistentMap, MapError, MapSpec, OverrideLevel, Tail};
use crate::sets::{AlgebraSet, RingSet};
use crate::tower::{Level, Place, RationalPlace, TowerError};
use crate::value::MapValue;

#[derive(thiserror::Error, Debug)]
pub enum ParseError {
    #[error("{what}")]
    Syntax { what: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Tower(#[from] TowerError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error(transparent)]
    Global(#[from] GlobalError),
}

impl ParseError {
    pub fn code(&self) -> &'static str {
        match self {
            ParseError::Syntax { .. } => "Parse",
            ParseError::Io { .. } => "Io",
            ParseError::Tower(e) => e.code(),
            ParseError::Map(e) => e.code(),
            ParseError::Element(e) => e.code(),
            ParseError::Global(e) => e.code(),
        }
    }

    /// True for malformed text and unreadable files; false when the text was
    /// understood but names an object some module rejected.
    pub fn is_syntax(&self) -> bool {
        matches!(self, ParseError::Syntax { .. } | ParseError::Io { .. })
    }
}

fn syntax(what: impl Into<String>) -> ParseError {
    ParseError::Syntax { what: what.into() }
}

pub fn parse_rational(s: &str) -> Result<BigRational, ParseError> {
    let s = s.trim();
    let (numer, denom) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), Some(d.trim())),
        None => (s, None),
    };
    let n: BigInt = numer
        .parse()
        .map_err(|_| syntax(format!("'{numer}' is not an integer")))?;
    let d: BigInt = match denom {
        Some(d) => d
            .parse()
            .map_err(|_| syntax(format!("'{d}' is not an integer")))?,
        None => BigInt::from(1),
    };
    if d.is_zero() {
        return Err(syntax(format!("'{s}' has a zero denominator")));
    }
    Ok(BigRational::new(n, d))
}

pub fn parse_rational_place(s: &str) -> Result<RationalPlace, ParseError> {
    let s = s.trim();
    if s == "inf" {
        return Ok(RationalPlace::Infinite);
    }
    let p: u64 = s
        .parse()
        .map_err(|_| syntax(format!("'{s}' is neither 'inf' nor a number")))?;
    Ok(RationalPlace::finite(p)?)
}

pub fn parse_place(s: &str) -> Result<Place, ParseError> {
    let s = s.trim();
    let parts: Vec<&str> = s.split(':').collect();
    let [level, base, rep] = parts.as_slice() else {
        return Err(syntax(format!("'{s}' is not of the form level:base:rep")));
    };
    let n: u64 = level
        .trim()
        .parse()
        .map_err(|_| syntax(format!("'{level}' is not a level")))?;
    if n == 0 {
        return Err(syntax("levels start at 1"));
    }
    let base = parse_rational_place(base)?;
    let rep: u64 = rep
        .trim()
        .parse()
        .map_err(|_| syntax(format!("'{rep}' is not a representative")))?;
    Ok(Place::new(Level::new(n), base, rep)?)
}

fn parse_place_list(inner: &str) -> Result<RingSet, ParseError> {
    let inner = inner.trim();
    if inner.is_empty() {
        return Ok(RingSet::empty());
    }
    let mut places = Vec::new();
    for item in inner.split(',') {
        places.push(parse_place(item)?);
    }
    Ok(RingSet::from_places(places))
}

/// A compact set literal: `[place, …]`.
pub fn parse_ring_set(s: &str) -> Result<RingSet, ParseError> {
    let s = s.trim();
    let inner = s
        .strip_prefix('[')
        .and_then(|rest| rest.strip_suffix(']'))
        .ok_or_else(|| syntax(format!("'{s}' is not a [..] set literal")))?;
    parse_place_list(inner)
}

/// An algebra set literal: `Y`, `[place, …]`, or `~[place, …]`.
pub fn parse_set(s: &str) -> Result<AlgebraSet, ParseError> {
    let s = s.trim();
    if s == "Y" {
        return Ok(AlgebraSet::whole_space());
    }
    if let Some(rest) = s.strip_prefix('~') {
        return Ok(AlgebraSet::complement_of(parse_ring_set(rest)?));
    }
    Ok(AlgebraSet::positive(parse_ring_set(s)?))
}

fn prime_argument(s: &str) -> Result<u64, ParseError> {
    let p: u64 = s
        .trim()
        .parse()
        .map_err(|_| syntax(format!("'{s}' is not a number")))?;
    if !arith::is_prime(p) {
        return Err(TowerError::NotPrime(p).into());
    }
    Ok(p)
}

/// Parses `factor` or `(factor)` where factor is a rational.
fn parse_factor(s: &str) -> Result<BigRational, ParseError> {
    let s = s.trim();
    let s = match s.strip_prefix('(') {
        Some(rest) => rest
            .strip_suffix(')')
            .ok_or_else(|| syntax(format!("unbalanced parentheses in '{s}'")))?,
        None => s,
    };
    parse_rational(s)
}

fn try_parse_over_log(s: &str) -> Result<Option<MapValue>, ParseError> {
    let Some(idx) = s.find("/log(") else {
        return Ok(None);
    };
    let Some(arg) = s[idx + 5..].strip_suffix(')') else {
        return Ok(None);
    };
    let num = parse_factor(&s[..idx])?;
    let prime = prime_argument(arg)?;
    Ok(Some(MapValue::over_log(num, prime)))
}

/// Splits a sum into `(sign, term)` pieces at parenthesis depth zero.
fn split_terms(s: &str) -> Result<Vec<(i32, &str)>, ParseError> {
    let mut terms = Vec::new();
    let mut depth = 0u32;
    let mut sign = 1;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth = depth
                    .checked_sub(1)
                    .ok_or_else(|| syntax(format!("unbalanced parentheses in '{s}'")))?;
            }
            '+' | '-' if depth == 0 => {
                let before = s[start..i].trim();
                if before.is_empty() {
                    if !(terms.is_empty() && start == 0 && ch == '-') {
                        return Err(syntax(format!("misplaced sign in '{s}'")));
                    }
                    // a leading minus on the first term
                    sign = -1;
                } else {
                    terms.push((sign, before));
                    sign = if ch == '-' { -1 } else { 1 };
                }
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(syntax(format!("unbalanced parentheses in '{s}'")));
    }
    let last = s[start..].trim();
    if last.is_empty() {
        return Err(syntax(format!("'{s}' ends without a term")));
    }
    terms.push((sign, last));
    Ok(terms)
}

fn parse_log_linear(s: &str) -> Result<MapValue, ParseError> {
    let mut constant = BigRational::zero();
    let mut coefficients: BTreeMap<u64, BigRational> = BTreeMap::new();
    let mut saw_log = false;
    for (sign, term) in split_terms(s)? {
        let sign = BigRational::from_integer(BigInt::from(sign));
        if let Some(idx) = term.find("log(") {
            let arg = term[idx + 4..]
                .strip_suffix(')')
                .ok_or_else(|| syntax(format!("unbalanced parentheses in '{term}'")))?;
            let prime = prime_argument(arg)?;
            let factor = match term[..idx].trim().strip_suffix('*') {
                Some(f) => parse_factor(f)?,
                None if term[..idx].trim().is_empty() => BigRational::from_integer(1.into()),
                None => return Err(syntax(format!("'{term}' needs '*' before log"))),
            };
            let entry = coefficients.entry(prime).or_insert_with(BigRational::zero);
            *entry += sign * factor;
            saw_log = true;
        } else {
            constant += sign * parse_rational(term)?;
        }
    }
    if saw_log {
        Ok(MapValue::log_linear(constant, coefficients))
    } else {
        Ok(MapValue::rational(constant))
    }
}

/// A value literal: rational, `q/log(p)`, a sum of log terms, or a float.
pub fn parse_value(s: &str) -> Result<MapValue, ParseError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(syntax("an empty value"));
    }
    if s.contains('.') || s.contains(['e', 'E']) {
        let x: f64 = s
            .parse()
            .map_err(|_| syntax(format!("'{s}' is not a decimal float (floats stand alone)")))?;
        if !x.is_finite() {
            return Err(syntax(format!("'{s}' is not a finite float")));
        }
        return Ok(MapValue::float(x));
    }
    if let Some(v) = try_parse_over_log(s)? {
        return Ok(v);
    }
    parse_log_linear(s)
}

/// An extended-value literal: `+inf`, `-inf`, `inf`, or a value.
pub fn parse_extended_value(s: &str) -> Result<ExtendedValue, ParseError> {
    match s.trim() {
        "inf" | "+inf" => Ok(ExtendedValue::PlusInfinity),
        "-inf" => Ok(ExtendedValue::MinusInfinity),
        other => Ok(ExtendedValue::Finite(parse_value(other)?)),
    }
}

/// An element literal: `rat:q`, `cycunit:p`, or `file:path`.
pub fn parse_element(s: &str) -> Result<AlgebraicElement, ParseError> {
    let s = s.trim();
    if let Some(rest) = s.strip_prefix("rat:") {
        return Ok(AlgebraicElement::rational(parse_rational(rest)?)?);
    }
    if let Some(rest) = s.strip_prefix("cycunit:") {
        let p: u64 = rest
            .trim()
            .parse()
            .map_err(|_| syntax(format!("'{rest}' is not a number")))?;
        return Ok(AlgebraicElement::cyclotomic_unit(p)?);
    }
    if let Some(path) = s.strip_prefix("file:") {
        let f = load_function(path.trim())?;
        return Ok(AlgebraicElement::explicit(f)?);
    }
    Err(syntax(format!(
        "'{s}' is not of the form rat:q, cycunit:p, or file:path"
    )))
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    #[serde(default)]
    name: Option<String>,
    kind: String,
    #[serde(default)]
    base: BaseFile,
    #[serde(default)]
    overrides: Vec<OverrideFile>,
}

#[derive(serde::Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct BaseFile {
    #[serde(default)]
    table: Vec<PlaceValueFile>,
    #[serde(default)]
    tail: Option<TailFile>,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct PlaceValueFile {
    place: String,
    value: String,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct TailFile {
    family: String,
    #[serde(default)]
    coeff: Option<String>,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct OverrideFile {
    level: u64,
    #[serde(default)]
    entries: Vec<PlaceValueFile>,
}

fn parse_tail(t: &TailFile) -> Result<Tail, ParseError> {
    let coeff = match &t.coeff {
        Some(c) => parse_rational(c)?,
        None => BigRational::from_integer(1.into()),
    };
    let zero = BigRational::zero;
    match t.family.as_str() {
        "zero" => Ok(Tail::zero()),
        "constant" | "lambda" | "uniform" => Ok(Tail::new(coeff, zero(), zero())),
        "reciprocal-log" | "reciprocal_log" => Ok(Tail::new(zero(), coeff, zero())),
        "alternating" => Ok(Tail::new(zero(), zero(), coeff)),
        other => Err(syntax(format!("'{other}' is not a tail family"))),
    }
}

/// Builds a map from map-file TOML text.
pub fn parse_map_text(text: &str) -> Result<ConsistentMap, ParseError> {
    let file: MapFile = toml::from_str(text).map_err(|e| syntax(format!("map file: {e}")))?;
    match file.kind.as_str() {
        "builtin" => match file.name.as_deref() {
            Some("lambda") => Ok(ConsistentMap::lambda()),
            Some("omega") => Ok(ConsistentMap::omega()),
            Some("alternating") => Ok(ConsistentMap::alternating()),
            Some(other) => Err(syntax(format!("'{other}' is not a builtin map"))),
            None => Err(syntax("a builtin map needs a name")),
        },
        "spec" => {
            let mut table = BTreeMap::new();
            for entry in &file.base.table {
                let r = parse_rational_place(&entry.place)?;
                let v = parse_value(&entry.value)?;
                if table.insert(r, v).is_some() {
                    return Err(syntax(format!("two base values for {r}")));
                }
            }
            let tail = match &file.base.tail {
                Some(t) => parse_tail(t)?,
                None => Tail::zero(),
            };
            let mut overrides = Vec::new();
            for o in &file.overrides {
                if o.level == 0 {
                    return Err(syntax("levels start at 1"));
                }
                let level = Level::new(o.level);
                let mut entries = BTreeMap::new();
                for entry in &o.entries {
                    let w = parse_place(&entry.place)?;
                    let v = parse_value(&entry.value)?;
                    if entries.insert(w, v).is_some() {
                        return Err(syntax(format!("two override values for {w}")));
                    }
                }
                overrides.push(OverrideLevel { level, entries });
            }
            Ok(MapSpec {
                table,
                tail,
                overrides,
            }
            .validate()?)
        }
        other => Err(syntax(format!("'{other}' is not a map kind"))),
    }
}

/// Reads and builds a map from a TOML file.
pub fn load_map(path: &str) -> Result<ConsistentMap, ParseError> {
    parse_map_text(&read(path)?)
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionFile {
    scope: String,
    #[serde(default)]
    exceptional: Vec<ExceptionalFile>,
    #[serde(default)]
    order: Vec<String>,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ExceptionalFile {
    place: String,
    parts: Vec<String>,
}

/// Builds a partition from partition-file TOML text.
pub fn parse_partition_text(text: &str) -> Result<Partition, ParseError> {
    let file: PartitionFile =
        toml::from_str(text).map_err(|e| syntax(format!("partition file: {e}")))?;
    let scope = match file.scope.trim() {
        "Y" => Scope::Full,
        s => Scope::Within(parse_ring_set(s)?),
    };
    let mut exceptional = Vec::new();
    for entry in &file.exceptional {
        let r = parse_rational_place(&entry.place)?;
        let mut parts = Vec::new();
        for part in &entry.parts {
            parts.push(parse_ring_set(part)?);
        }
        exceptional.push((r, parts));
    }
    let mut order = Vec::new();
    for r in &file.order {
        order.push(parse_rational_place(r)?);
    }
    Ok(PartitionSpec {
        scope,
        exceptional,
        order,
    }
    .validate()?)
}

/// Reads and builds a partition from a TOML file.
pub fn load_partition(path: &str) -> Result<Partition, ParseError> {
    parse_partition_text(&read(path)?)
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionFile {
    level: u64,
    #[serde(default)]
    values: Vec<PlaceValueFile>,
}

/// Builds a profile from profile-file TOML text.
pub fn parse_function_text(text: &str) -> Result<SimpleFunction, ParseError> {
    let file: FunctionFile =
        toml::from_str(text).map_err(|e| syntax(format!("profile file: {e}")))?;
    if file.level == 0 {
        return Err(syntax("levels start at 1"));
    }
    let level = Level::new(file.level);
    let mut values = BTreeMap::new();
    for entry in &file.values {
        let w = parse_place(&entry.place)?;
        if w.level() != level {
            return Err(syntax(format!(
                "the value at {w} is not at level {}",
                level.get()
            )));
        }
        let v = parse_value(&entry.value)?;
        if values.insert(w, v).is_some() {
            return Err(syntax(format!("two values for {w}")));
        }
    }
    Ok(SimpleFunction::new(level, values))
}

/// Reads and builds a profile from a TOML file.
pub fn load_function(path: &str) -> Result<SimpleFunction, ParseError> {
    parse_function_text(&read(path)?)
}

fn read(path: &str) -> Result<String, ParseError> {
    fs::read_to_string(path).map_err(|e| ParseError::Io {
        path: path.to_string(),
        message: e.to_string(),
    })
}
