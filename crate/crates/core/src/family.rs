//! Declarative descriptions of (possibly infinite) sets ℬ and their
//! truncations `ℬ ∩ [1, N]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::primes::{primes_in_range, progression, progression_primes_in_range};
use crate::set::FiniteSet;

/// Block `[t, t + len - 1]` of a thin-block schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub t: u64,
    pub len: u64,
}

impl Block {
    pub fn end(&self) -> u64 {
        self.t + self.len - 1
    }
}

/// Where the base elements of a pattern come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PatternSource {
    /// Primes `>= cutoff`.
    Primes { cutoff: u64 },
    /// 𝒫_level ∩ [cutoff, ∞).
    ProgressionPrimes { level: u32, cutoff: u64 },
    Explicit { elems: FiniteSet },
}

/// Selection applied to the ascending base sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Thinning {
    #[default]
    None,
    /// Every `m`-th base element, starting with the first.
    Stride { m: u64 },
    /// Greedy: the next element is the first base element `>= ratio * previous`.
    Geometric { ratio: f64 },
}

/// A pattern 𝒜: thinned base elements, each raised to `power`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSpec {
    pub source: PatternSource,
    #[serde(default)]
    pub thinning: Thinning,
    #[serde(default = "one")]
    pub power: u32,
    /// The caller vouches that 𝒜 is Behrend.
    #[serde(default)]
    pub declared_behrend: bool,
}

fn one() -> u32 {
    1
}

impl PatternSpec {
    pub fn new(source: PatternSource) -> Self {
        PatternSpec {
            source,
            thinning: Thinning::None,
            power: 1,
            declared_behrend: false,
        }
    }

    pub fn progression(level: u32, cutoff: u64) -> Self {
        Self::new(PatternSource::ProgressionPrimes { level, cutoff })
    }

    pub fn with_thinning(mut self, thinning: Thinning) -> Self {
        self.thinning = thinning;
        self
    }

    pub fn with_power(mut self, power: u32) -> Self {
        self.power = power;
        self
    }

    pub fn declared_behrend(mut self, yes: bool) -> Self {
        self.declared_behrend = yes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.power == 0 {
            return Err(Error::InvalidSpec("pattern power must be >= 1".into()));
        }
        match &self.source {
            PatternSource::ProgressionPrimes { level, .. } => {
                progression(*level)?;
            }
            PatternSource::Primes { .. } | PatternSource::Explicit { .. } => {}
        }
        match self.thinning {
            Thinning::Stride { m: 0 } => {
                Err(Error::InvalidSpec("thinning stride must be >= 1".into()))
            }
            Thinning::Geometric { ratio } if !(ratio > 1.0 && ratio.is_finite()) => Err(
                Error::InvalidSpec(format!("geometric ratio must be finite and > 1, got {ratio}")),
            ),
            _ => Ok(()),
        }
    }

    /// Is the pattern a finite set?
    pub fn is_finite(&self) -> bool {
        matches!(self.source, PatternSource::Explicit { .. })
    }

    /// Ascending base elements `<= hi` (before thinning and powering).
    fn base(&self, hi: u64) -> Result<Vec<u64>> {
        Ok(match &self.source {
            PatternSource::Primes { cutoff } => primes_in_range(*cutoff, hi),
            PatternSource::ProgressionPrimes { level, cutoff } => {
                progression_primes_in_range(*level, *cutoff, hi)?
            }
            PatternSource::Explicit { elems } => elems.truncate(hi).into_vec(),
        })
    }

    /// Selected base elements `<= hi`, before powering.
    pub fn selected_base(&self, hi: u64) -> Result<Vec<u64>> {
        let base = self.base(hi)?;
        Ok(match self.thinning {
            Thinning::None => base,
            Thinning::Stride { m } => base.into_iter().step_by(m as usize).collect(),
            Thinning::Geometric { ratio } => {
                let mut out: Vec<u64> = Vec::new();
                let mut need = 0u64;
                for b in base {
                    if b >= need {
                        out.push(b);
                        let next = (b as f64 * ratio).ceil();
                        if next >= u64::MAX as f64 {
                            break;
                        }
                        need = next as u64;
                    }
                }
                out
            }
        })
    }

    /// 𝒜 ∩ [1, bound].
    pub fn materialize(&self, bound: u64) -> Result<Vec<u64>> {
        self.validate()?;
        let root = integer_root(bound, self.power);
        let sel = self.selected_base(root)?;
        Ok(sel
            .into_iter()
            .filter_map(|b| b.checked_pow(self.power))
            .filter(|&v| v <= bound)
            .collect())
    }
}

/// Largest `r` with `r^k <= n`.
pub fn integer_root(n: u64, k: u32) -> u64 {
    if k <= 1 {
        return n;
    }
    let mut r = (n as f64).powf(1.0 / k as f64).round() as u64;
    let fits = |r: u64| r.checked_pow(k).is_some_and(|v| v <= n);
    while r > 0 && !fits(r) {
        r -= 1;
    }
    while fits(r + 1) {
        r += 1;
    }
    r
}

/// A possibly infinite set ℬ ⊆ ℕ given by construction rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Explicit { elems: FiniteSet },
    /// Each level `T` contributes the integers in `(T, 2T]`.
    IntervalUnion { levels: Vec<u64> },
    /// Block `i` contributes its integers that are not multiples of the
    /// elements kept from earlier blocks.
    ThinBlocks { schedule: Vec<Block> },
    /// ⋃ e_i 𝒜_i.
    Loosening { scales: Vec<u64>, patterns: Vec<PatternSpec> },
    /// `scale * p` for every `stride`-th prime `p ∈ 𝒫_level`, `p >= cutoff`.
    ScaledProgressionPrimes { scale: u64, level: u32, cutoff: u64, stride: u64 },
    Union { parts: Vec<FamilySpec> },
    /// ℬ ∩ (2ℤ + 1).
    OddRestriction { inner: Box<FamilySpec> },
}

impl From<FiniteSet> for FamilySpec {
    fn from(elems: FiniteSet) -> Self {
        FamilySpec::Explicit { elems }
    }
}

impl FamilySpec {
    pub fn explicit(elems: &[u64]) -> Result<Self> {
        Ok(FamilySpec::Explicit { elems: FiniteSet::new(elems.to_vec())? })
    }

    pub fn primes() -> Self {
        FamilySpec::Loosening {
            scales: vec![1],
            patterns: vec![PatternSpec::new(PatternSource::Primes { cutoff: 2 })],
        }
    }

    /// {p^power : p prime}.
    pub fn prime_powers(power: u32) -> Self {
        FamilySpec::Loosening {
            scales: vec![1],
            patterns: vec![PatternSpec::new(PatternSource::Primes { cutoff: 2 }).with_power(power)],
        }
    }

    pub fn union(parts: Vec<FamilySpec>) -> Self {
        FamilySpec::Union { parts }
    }

    pub fn odd(inner: FamilySpec) -> Self {
        FamilySpec::OddRestriction { inner: Box::new(inner) }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: FamilySpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("family specs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FamilySpec::Explicit { .. } => Ok(()),
            FamilySpec::IntervalUnion { levels } => {
                for &t in levels {
                    if t == 0 || t > u64::MAX / 2 {
                        return Err(Error::InvalidSpec(format!("interval level {t} out of range")));
                    }
                }
                Ok(())
            }
            FamilySpec::ThinBlocks { schedule } => {
                let mut prev_end = 0u64;
                for (i, b) in schedule.iter().enumerate() {
                    if b.len == 0 || b.t == 0 || b.t.checked_add(b.len).is_none() {
                        return Err(Error::InvalidSpec(format!("block {} is empty or overflows", i + 1)));
                    }
                    if b.t <= prev_end {
                        return Err(Error::InvalidSpec(format!(
                            "block {} starts at {} inside the previous block",
                            i + 1,
                            b.t
                        )));
                    }
                    prev_end = b.end();
                }
                Ok(())
            }
            FamilySpec::Loosening { scales, patterns } => {
                if scales.len() != patterns.len() {
                    return Err(Error::InvalidSpec(format!(
                        "{} scales but {} patterns",
                        scales.len(),
                        patterns.len()
                    )));
                }
                if scales.contains(&0) {
                    return Err(Error::InvalidSpec("scales must be positive".into()));
                }
                patterns.iter().try_for_each(PatternSpec::validate)
            }
            FamilySpec::ScaledProgressionPrimes { scale, level, stride, .. } => {
                if *scale == 0 || *stride == 0 {
                    return Err(Error::InvalidSpec("scale and stride must be positive".into()));
                }
                progression(*level).map(|_| ())
            }
            FamilySpec::Union { parts } => parts.iter().try_for_each(FamilySpec::validate),
            FamilySpec::OddRestriction { inner } => inner.validate(),
        }
    }

    /// Largest element if the set is finite.
    pub fn finite_max(&self) -> Option<u64> {
        match self {
            FamilySpec::Explicit { elems } => Some(elems.max().unwrap_or(0)),
            FamilySpec::IntervalUnion { levels } => Some(levels.iter().map(|t| 2 * t).max().unwrap_or(0)),
            FamilySpec::ThinBlocks { schedule } => Some(schedule.iter().map(Block::end).max().unwrap_or(0)),
            FamilySpec::Loosening { scales, patterns } => {
                let mut m = 0u64;
                for (e, p) in scales.iter().zip(patterns) {
                    let PatternSource::Explicit { elems } = &p.source else {
                        return None;
                    };
                    if let Some(x) = elems.max() {
                        m = m.max(x.checked_pow(p.power)?.checked_mul(*e)?);
                    }
                }
                Some(m)
            }
            FamilySpec::ScaledProgressionPrimes { .. } => None,
            FamilySpec::Union { parts } => parts
                .iter()
                .map(FamilySpec::finite_max)
                .try_fold(0u64, |acc, m| m.map(|m| acc.max(m))),
            FamilySpec::OddRestriction { inner } => inner.finite_max(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.finite_max().is_some()
    }

    /// Is ℬ itself (not a truncation) empty?
    pub fn is_empty(&self) -> Result<bool> {
        match self.finite_max() {
            Some(m) => Ok(self.materialize(m)?.is_empty()),
            None => match self {
                FamilySpec::OddRestriction { inner } => Ok(!inner.has_odd()?),
                _ => Ok(false),
            },
        }
    }

    /// Does ℬ contain an odd element?
    pub fn has_odd(&self) -> Result<bool> {
        if let Some(m) = self.finite_max() {
            return Ok(self.materialize(m)?.iter().any(|x| x % 2 == 1));
        }
        Ok(match self {
            FamilySpec::Loosening { scales, patterns } => {
                let mut any = false;
                for (&e, p) in scales.iter().zip(patterns) {
                    any |= e % 2 == 1 && (!p.is_finite() || p.materialize(u64::MAX)?.iter().any(|a| a % 2 == 1));
                }
                any
            }
            FamilySpec::ScaledProgressionPrimes { scale, .. } => scale % 2 == 1,
            FamilySpec::Union { parts } => {
                let mut any = false;
                for p in parts {
                    any |= p.has_odd()?;
                }
                any
            }
            FamilySpec::OddRestriction { inner } => inner.has_odd()?,
            _ => unreachable!("finite variants handled above"),
        })
    }

    /// ℬ ∩ [1, bound], ascending. Monotone in `bound` and deterministic.
    pub fn materialize(&self, bound: u64) -> Result<FiniteSet> {
        self.validate()?;
        let mut out = Vec::new();
        self.collect(bound, &mut out)?;
        FiniteSet::new(out)
    }

    fn collect(&self, bound: u64, out: &mut Vec<u64>) -> Result<()> {
        match self {
            FamilySpec::Explicit { elems } => out.extend(elems.truncate(bound).iter()),
            FamilySpec::IntervalUnion { levels } => {
                for &t in levels {
                    let hi = (2 * t).min(bound);
                    if hi > t {
                        out.extend(t + 1..=hi);
                    }
                }
            }
            FamilySpec::ThinBlocks { schedule } => {
                out.extend(thin_block_elements(schedule, bound).into_iter().flatten())
            }
            FamilySpec::Loosening { scales, patterns } => {
                for (&e, p) in scales.iter().zip(patterns) {
                    out.extend(p.materialize(bound / e)?.into_iter().map(|a| a * e));
                }
            }
            FamilySpec::ScaledProgressionPrimes { scale, level, cutoff, stride } => {
                let p = PatternSpec::progression(*level, *cutoff)
                    .with_thinning(Thinning::Stride { m: *stride });
                out.extend(p.materialize(bound / scale)?.into_iter().map(|a| a * scale));
            }
            FamilySpec::Union { parts } => {
                for part in parts {
                    part.collect(bound, out)?;
                }
            }
            FamilySpec::OddRestriction { inner } => {
                let mut tmp = Vec::new();
                inner.collect(bound, &mut tmp)?;
                out.extend(tmp.into_iter().filter(|x| x % 2 == 1));
            }
        }
        Ok(())
    }
}

/// ℰ_i ∩ [1, bound] for each block, ℰ_i being the block's integers that are
/// not multiples of ℰ_1 ∪ … ∪ ℰ_{i-1}. Blocks must be ascending.
pub fn thin_block_elements(schedule: &[Block], bound: u64) -> Vec<Vec<u64>> {
    let mut levels: Vec<Vec<u64>> = Vec::new();
    let mut earlier: Vec<u64> = Vec::new();
    for b in schedule {
        if b.t > bound {
            break;
        }
        let hi = b.end().min(bound);
        let len = (hi - b.t + 1) as usize;
        let mut hit = vec![false; len];
        for &e in &earlier {
            let mut m = b.t.div_ceil(e) * e;
            while m <= hi {
                hit[(m - b.t) as usize] = true;
                m += e;
            }
        }
        let kept: Vec<u64> = (0..len).filter(|&j| !hit[j]).map(|j| b.t + j as u64).collect();
        earlier.extend_from_slice(&kept);
        levels.push(kept);
    }
    levels
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn specs() -> Vec<FamilySpec> {
        vec![
            FamilySpec::explicit(&[6, 10, 15]).unwrap(),
            FamilySpec::IntervalUnion { levels: vec![4, 30] },
            FamilySpec::ThinBlocks {
                schedule: vec![Block { t: 10, len: 2 }, Block { t: 110, len: 4 }],
            },
            FamilySpec::primes(),
            FamilySpec::prime_powers(2),
            FamilySpec::Loosening {
                scales: vec![3, 5],
                patterns: vec![
                    PatternSpec::progression(1, 7),
                    PatternSpec::progression(2, 11).with_thinning(Thinning::Stride { m: 2 }),
                ],
            },
            FamilySpec::ScaledProgressionPrimes { scale: 2, level: 3, cutoff: 1, stride: 3 },
            FamilySpec::Loosening {
                scales: vec![1],
                patterns: vec![PatternSpec::new(PatternSource::Primes { cutoff: 3 })
                    .with_thinning(Thinning::Geometric { ratio: 2.5 })
                    .with_power(2)],
            },
            FamilySpec::odd(FamilySpec::union(vec![
                FamilySpec::IntervalUnion { levels: vec![4] },
                FamilySpec::explicit(&[2, 3, 5]).unwrap(),
            ])),
        ]
    }

    #[test]
    fn odd_variant_examples() {
        let s = FamilySpec::odd(FamilySpec::IntervalUnion { levels: vec![4] });
        assert_eq!(s.materialize(100).unwrap().into_vec(), vec![5, 7]);
        let s = FamilySpec::odd(FamilySpec::explicit(&[2, 3, 5]).unwrap());
        assert_eq!(s.materialize(100).unwrap().into_vec(), vec![3, 5]);
    }

    #[test]
    fn thin_blocks_sieve_against_earlier_blocks() {
        let s = FamilySpec::ThinBlocks {
            schedule: vec![Block { t: 10, len: 2 }, Block { t: 110, len: 4 }],
        };
        // 110 = 10*11 is removed; 111, 112, 113 stay.
        assert_eq!(s.materialize(1000).unwrap().into_vec(), vec![10, 11, 111, 112, 113]);
        assert_eq!(s.materialize(111).unwrap().into_vec(), vec![10, 11, 111]);
    }

    #[test]
    fn loosening_scales_patterns() {
        let s = FamilySpec::Loosening {
            scales: vec![3],
            patterns: vec![PatternSpec::progression(1, 7)],
        };
        // 3 * {7, 11, 19, 23, 31}
        assert_eq!(s.materialize(100).unwrap().into_vec(), vec![21, 33, 57, 69, 93]);
        let g = PatternSpec::new(PatternSource::Primes { cutoff: 2 })
            .with_thinning(Thinning::Geometric { ratio: 3.0 });
        assert_eq!(g.materialize(200).unwrap(), vec![2, 7, 23, 71]);
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let bad = FamilySpec::Loosening { scales: vec![1, 2], patterns: vec![PatternSpec::progression(1, 1)] };
        assert!(bad.materialize(10).is_err());
        let bad = FamilySpec::ThinBlocks { schedule: vec![Block { t: 10, len: 5 }, Block { t: 12, len: 1 }] };
        assert!(bad.validate().is_err());
        let bad = FamilySpec::ScaledProgressionPrimes { scale: 1, level: 70, cutoff: 1, stride: 1 };
        assert_eq!(bad.validate(), Err(Error::LevelOverflow(70)));
    }

    #[test]
    fn json_round_trip_and_tag() {
        for s in specs() {
            let text = s.to_json();
            assert!(text.contains("\"variant\""));
            let back = FamilySpec::from_json(&text).unwrap();
            assert_eq!(back, s);
            assert_eq!(back.materialize(5000).unwrap(), s.materialize(5000).unwrap());
        }
        assert!(FamilySpec::from_json(r#"{"variant":"explicit","elems":[2],"extra":1}"#).is_err());
        assert!(FamilySpec::from_json(r#"{"variant":"explicit","elems":[0]}"#).is_err());
    }

    #[test]
    fn finiteness() {
        assert_eq!(FamilySpec::IntervalUnion { levels: vec![4, 30] }.finite_max(), Some(60));
        assert_eq!(FamilySpec::primes().finite_max(), None);
        assert!(FamilySpec::union(vec![FamilySpec::primes()]).finite_max().is_none());
    }

    #[test]
    fn emptiness() {
        assert!(FamilySpec::explicit(&[]).unwrap().is_empty().unwrap());
        assert!(!FamilySpec::explicit(&[97]).unwrap().is_empty().unwrap());
        assert!(!FamilySpec::primes().is_empty().unwrap());
        let evens = FamilySpec::ScaledProgressionPrimes { scale: 2, level: 1, cutoff: 1, stride: 1 };
        assert!(FamilySpec::odd(evens.clone()).is_empty().unwrap());
        assert!(!FamilySpec::odd(FamilySpec::union(vec![evens, FamilySpec::primes()])).is_empty().unwrap());
    }

    #[test]
    fn integer_roots() {
        assert_eq!(integer_root(99, 2), 9);
        assert_eq!(integer_root(100, 2), 10);
        assert_eq!(integer_root(u64::MAX, 2), 4_294_967_295);
        assert_eq!(integer_root(26, 3), 2);
        assert_eq!(integer_root(27, 3), 3);
    }

    proptest! {
        #[test]
        fn materialize_is_monotone(n1 in 1u64..4000, extra in 0u64..4000) {
            let n2 = n1 + extra;
            for s in specs() {
                let a = s.materialize(n1).unwrap();
                let b = s.materialize(n2).unwrap();
                prop_assert!(a.is_subset(&b));
                prop_assert_eq!(b.truncate(n1), a);
            }
        }
    }
}
