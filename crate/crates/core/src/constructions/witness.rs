//! ℬ = ⋃ ℰ_i 𝒜_i with ℰ_i = ℰ ∩ [1, K_i) and 𝒜_i ⊆ [K_i, ∞), keeping
//! |[1, K_{i+1}) ∩ ℳ_ℰ ∖ ℳ_ℬ| ≥ K_{i+1} ε₀/2.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::{assemble, parse_rat, rat_string, Check, Construction, Recipe};
use crate::error::{Error, Result};
use crate::family::{FamilySpec, PatternSource, PatternSpec};
use crate::set::FiniteSet;
use crate::sieve::count_difference_at;

/// ⋃_{e∈scales} e·𝒜 with the same pattern for every scale.
pub fn uniform_loosening(scales: &FiniteSet, pattern: PatternSpec) -> FamilySpec {
    FamilySpec::Loosening { scales: scales.as_slice().to_vec(), patterns: vec![pattern; scales.len()] }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessLevel {
    /// Witness checkpoint N_i = K_{i+1} − 1.
    pub checkpoint: u64,
    /// K_{i+1}.
    pub next_cutoff: u64,
    /// |[1, N_i] ∩ ℳ_ℰ ∖ ℳ_{ℰ_i}|.
    pub base_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessRecipe {
    /// ℰ, an interval family.
    pub scales: FamilySpec,
    /// K_1 < K_2 < …
    pub cutoffs: Vec<u64>,
    /// ε₀ = min_i 2·base_count_i / K_{i+1}.
    pub epsilon0: String,
    pub levels: Vec<WitnessLevel>,
}

impl WitnessRecipe {
    pub fn epsilon0(&self) -> Result<BigRational> {
        parse_rat(&self.epsilon0)
    }
}

fn q(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// `e` must be an interval family; K_1 = 2 and K_{i+1} = 2T_i + 1, so each
/// witness window [1, 2T_i] contains the whole i-th interval. Patterns are
/// primes ≥ K_i.
pub fn build_difference_witness(e: &FamilySpec) -> Result<Construction> {
    let FamilySpec::IntervalUnion { levels } = e else {
        return Err(Error::invalid("the difference witness needs an interval family"));
    };
    e.validate()?;
    if levels.is_empty() || levels.windows(2).any(|w| 2 * w[0] >= w[1]) {
        return Err(Error::invalid("interval levels must satisfy 2 T_i < T_{i+1}"));
    }
    let mut cutoffs = vec![2u64];
    cutoffs.extend(levels.iter().map(|t| 2 * t + 1));
    let mut out = Vec::new();
    let mut eps0: Option<BigRational> = None;
    for (i, w) in cutoffs.windows(2).enumerate() {
        let (k, next) = (w[0], w[1]);
        let n = next - 1;
        let e_i = e.materialize(k - 1)?;
        let base_count = count_difference_at(&e.materialize(n)?, &e_i, &[n])?[0];
        let r = q(2 * base_count) / q(next);
        eps0 = Some(match eps0 {
            Some(m) if m <= r => m,
            _ => r,
        });
        out.push(WitnessLevel { checkpoint: n, next_cutoff: next, base_count });
        debug_assert_eq!(i + 1, out.len());
    }
    let mut parts = Vec::new();
    for &k in &cutoffs[1..] {
        let e_i = e.materialize(k - 1)?;
        if !e_i.is_empty() {
            let a = PatternSpec::new(PatternSource::Primes { cutoff: k }).declared_behrend(true);
            parts.push(uniform_loosening(&e_i, a));
        }
    }
    let spec = FamilySpec::union(parts);
    let recipe = WitnessRecipe {
        scales: e.clone(),
        cutoffs,
        epsilon0: rat_string(&eps0.expect("at least one level")),
        levels: out,
    };
    let notes = vec![
        "epsilon0 is the largest value for which the chosen cutoffs satisfy the inductive inequality".to_string(),
        "E_1 = E cap [1, 2) is empty, so the first pattern block is absent".to_string(),
    ];
    assemble(spec, Recipe::DifferenceWitness(recipe), notes)
}

pub(super) fn checks(spec: &FamilySpec, r: &WitnessRecipe) -> Result<Vec<Check>> {
    let eps0 = r.epsilon0()?;
    let mut out = vec![Check::new(
        "epsilon0_positive",
        None,
        eps0 > q(0),
        format!("epsilon0 = {eps0} ~ {:.5}", crate::density::ratio_to_f64(&eps0)),
    )];
    let increasing = r.cutoffs.first() == Some(&2) && r.cutoffs.windows(2).all(|w| w[0] < w[1]);
    out.push(Check::new("cutoffs_increasing", None, increasing, format!("K = {:?}", r.cutoffs)));
    for (i, l) in r.levels.iter().enumerate() {
        let k = i + 1;
        let n = l.checkpoint;
        let e_n = r.scales.materialize(n)?;
        let e_i = r.scales.materialize(r.cutoffs[i] - 1)?;
        let base = count_difference_at(&e_n, &e_i, &[n])?[0];
        let diff = count_difference_at(&e_n, &spec.materialize(n)?, &[n])?[0];
        out.push(Check::new(
            "difference_dominates_base",
            Some(k),
            base == l.base_count && diff >= base,
            format!("|[1,{n}] cap M_E minus M_B| = {diff} >= {base}"),
        ));
        out.push(Check::new(
            "difference_floor",
            Some(k),
            diff > 0 && q(diff) / q(n) >= &eps0 / q(2),
            format!("ratio {diff}/{n} = {:.4} vs epsilon0/2", diff as f64 / n as f64),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_difference(ts: &[u64], b: &[u64], n: u64) -> u64 {
        (1..=n)
            .filter(|m| ts.iter().any(|&t| (t + 1..=2 * t).any(|e| m % e == 0)) && !b.iter().any(|x| m % x == 0))
            .count() as u64
    }

    #[test]
    fn witness_on_small_intervals() {
        let e = FamilySpec::IntervalUnion { levels: vec![5, 40, 400] };
        let c = build_difference_witness(&e).unwrap();
        assert!(c.log.all_passed(), "{:?}", c.log.failed().collect::<Vec<_>>());
        let Recipe::DifferenceWitness(r) = &c.log.recipe else { panic!() };
        assert_eq!(r.cutoffs, vec![2, 11, 81, 801]);
        assert_eq!(r.levels.len(), 3);
        for l in &r.levels {
            let b = c.spec.materialize(l.checkpoint).unwrap();
            let d = brute_difference(&[5, 40, 400], b.as_slice(), l.checkpoint);
            assert!(d >= l.base_count);
        }
        c.verify().unwrap();
    }

    #[test]
    fn loosened_elements_sit_above_cutoffs() {
        let e = FamilySpec::IntervalUnion { levels: vec![5, 40] };
        let c = build_difference_witness(&e).unwrap();
        let b = c.spec.materialize(20_000).unwrap();
        // Smallest element: 6 * 11 (scale from (5,10], prime >= 11).
        assert_eq!(b.min(), Some(66));
        assert!(b.iter().all(|x| (6..=10).any(|s| x % s == 0 && x / s >= 11) || (41..=80).any(|s| x % s == 0 && x / s >= 81)));
    }

    #[test]
    fn rejects_other_families() {
        assert!(build_difference_witness(&FamilySpec::primes()).is_err());
        assert!(build_difference_witness(&FamilySpec::IntervalUnion { levels: vec![10, 15] }).is_err());
    }
}
