//! Exact finitely additive charges on the places of the field of algebraic
//! numbers, modeled over the tower of cyclotomic fields.
//!
//! The crate is organized bottom-up:
//!
//! * [`tower`]: canonical conductors, places of cyclotomic fields, local
//!   degrees, restriction and fibers;
//! * [`value`]: the arithmetic kinds a charge can take (exact rationals,
//!   rational multiples of `1/log p`, log-linear combinations, floats);
//! * [`sets`]: the ring of finite unions of basis sets and the algebra
//!   obtained by adjoining complements, in canonical form;
//! * [`maps`]: consistent assignments of values to places, given by a base
//!   assignment at level 1 plus finitely many overrides along a chain of
//!   levels, together with the induced charge on the ring;
//! * [`integrate`]: locally constant functions, the log-absolute-value
//!   profile of an algebraic number, and integration against a map;
//! * [`global`]: partitions, series classification, the index of a globally
//!   consistent map, and the extension of a charge to the algebra;
//! * [`textio`]: the text forms used by the command-line tool (place and set
//!   literals, value grammar, map and partition files).

pub mod global;
pub mod integrate;
pub mod maps;
pub mod sets;
pub mod textio;
pub mod tower;
pub mod value;

mod arith;

pub use num_rational::BigRational;
