//! Sets of multiples ℳ_ℬ = ⋃_{b∈ℬ} bℤ: sieving, densities, the Erdős
//! existence criterion, structural evidence and example constructions.

pub mod arith;
pub mod constructions;
pub mod criterion;
pub mod density;
pub mod error;
pub mod family;
pub mod primes;
pub mod set;
pub mod sieve;
pub mod structure;

pub use error::{Error, Result};
pub use family::{Block, FamilySpec, PatternSource, PatternSpec, Thinning};
pub use set::{is_primitive, primitivize, FiniteSet, PrimitivityVerdict};
