//! Builders for the example families: Besicovitch-type interval unions,
//! thin primitive blocks, loosenings ⋃ e_i 𝒜_i and the unions built from
//! them. Every builder returns the emitted [`FamilySpec`] together with a
//! [`ConstructionLog`] whose checks can be re-run against the spec.

mod examples;
mod intervals;
mod loosening;
mod thin;
mod witness;

use std::str::FromStr;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::FamilySpec;

pub use examples::{build_union_example, ExampleName, UnionParams, UnionRecipe};
pub use intervals::{build_besicovitch_intervals, BuildMode, IntervalLevel, IntervalParams, IntervalRecipe};
pub use loosening::{build_loosening, LooseningLevel, LooseningPlan, LooseningRecipe};
pub use thin::{build_thin_blocks, ThinLevel, ThinPolicy, ThinRecipe};
pub use witness::{build_difference_witness, uniform_loosening, WitnessLevel, WitnessRecipe};

/// ℬ ∩ (2ℤ + 1).
pub fn build_odd_variant(inner: FamilySpec) -> FamilySpec {
    FamilySpec::odd(inner)
}

/// Outcome of one finitely checkable construction condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub(crate) fn new(name: &str, level: Option<usize>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.to_string(), level, passed, detail: detail.into() }
    }
}

/// Builder parameters and the schedule they produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case")]
pub enum Recipe {
    BesicovitchIntervals(IntervalRecipe),
    ThinBlocks(ThinRecipe),
    Loosening(LooseningRecipe),
    DifferenceWitness(WitnessRecipe),
    UnionExample(UnionRecipe),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionLog {
    pub recipe: Recipe,
    pub checks: Vec<Check>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl ConstructionLog {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> impl Iterator<Item = &Check> {
        let name = name.to_string();
        self.checks.iter().filter(move |c| c.name == name)
    }
}

/// An emitted family and the log describing how it was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Construction {
    pub spec: FamilySpec,
    pub log: ConstructionLog,
}

impl Construction {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("constructions always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Construction = serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        c.spec.validate()?;
        Ok(c)
    }

    /// Recomputes every check from the spec and the recipe.
    pub fn recheck(&self) -> Result<Vec<Check>> {
        recheck(&self.spec, &self.log.recipe)
    }

    /// Fails unless a fresh recheck reproduces the recorded checks.
    pub fn verify(&self) -> Result<()> {
        let fresh = self.recheck()?;
        if fresh != self.log.checks {
            let diff = fresh
                .iter()
                .zip(&self.log.checks)
                .find(|(a, b)| a != b)
                .map(|(a, b)| format!("recorded {b:?}, recomputed {a:?}"))
                .unwrap_or_else(|| format!("{} recorded checks, {} recomputed", self.log.checks.len(), fresh.len()));
            return Err(Error::Internal(format!("construction log does not re-validate: {diff}")));
        }
        Ok(())
    }
}

pub fn recheck(spec: &FamilySpec, recipe: &Recipe) -> Result<Vec<Check>> {
    match recipe {
        Recipe::BesicovitchIntervals(r) => intervals::checks(spec, r),
        Recipe::ThinBlocks(r) => thin::checks(spec, r),
        Recipe::Loosening(r) => loosening::checks(spec, r),
        Recipe::DifferenceWitness(r) => witness::checks(spec, r),
        Recipe::UnionExample(r) => examples::checks(spec, r),
    }
}

fn assemble(spec: FamilySpec, recipe: Recipe, notes: Vec<String>) -> Result<Construction> {
    let checks = recheck(&spec, &recipe)?;
    Ok(Construction { spec, log: ConstructionLog { recipe, checks, notes } })
}

pub(crate) fn rat_string(r: &BigRational) -> String {
    r.to_string()
}

pub(crate) fn parse_rat(s: &str) -> Result<BigRational> {
    BigRational::from_str(s).map_err(|_| Error::InvalidSpec(format!("bad rational {s:?}")))
}

pub(crate) fn rat_from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::invalid(format!("{x} is not finite")))
}

/// Geometric grid from `lo` to `hi` (both included), strictly increasing.
pub(crate) fn geometric_grid(lo: u64, hi: u64, ratio: f64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut x = lo as f64;
    while (x as u64) < hi {
        let v = x as u64;
        if out.last() != Some(&v) {
            out.push(v);
        }
        x *= ratio;
    }
    if out.last() != Some(&hi) {
        out.push(hi);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odd_variant_examples() {
        let s = build_odd_variant(FamilySpec::IntervalUnion { levels: vec![4] });
        assert_eq!(s.materialize(100).unwrap().as_slice(), &[5, 7]);
        let s = build_odd_variant(FamilySpec::explicit(&[2, 3, 5]).unwrap());
        assert_eq!(s.materialize(100).unwrap().as_slice(), &[3, 5]);
    }

    #[test]
    fn grid_is_increasing_and_closed() {
        let g = geometric_grid(2, 1000, 1.1);
        assert_eq!(g[0], 2);
        assert_eq!(*g.last().unwrap(), 1000);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(geometric_grid(5, 5, 2.0), vec![5]);
    }
}
