//! Thin primitive ℰ = ⋃ ℰ_i with ℰ_i ⊆ [t_i, t_i + T_i − 1], Σ T_i/t_i < 1,
//! ℰ_{i+1} ⊆ ℱ_{ℰ_1∪…∪ℰ_i} and |ℰ_i| ≥ βT_i.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{assemble, parse_rat, rat_from_f64, rat_string, Check, Construction, Recipe};
use crate::arith::lcm_capped;
use crate::error::{Error, Result};
use crate::family::{thin_block_elements, Block, FamilySpec};
use crate::set::{is_primitive, FiniteSet};
use crate::sieve::sieve_multiples;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThinPolicy {
    /// Lower bound for t_1.
    #[serde(default = "default_t1")]
    pub t1: u64,
    /// T_1.
    #[serde(default = "default_len1")]
    pub len1: u64,
    /// T_{i+1} ≥ growth · T_i.
    #[serde(default = "default_growth")]
    pub growth: u64,
    /// Blocks are aligned to lcm(ℰ_1 ∪ … ∪ ℰ_i) only while it stays below this.
    #[serde(default = "default_align_cap")]
    pub align_cap: u64,
}

fn default_t1() -> u64 {
    10
}

fn default_len1() -> u64 {
    2
}

fn default_growth() -> u64 {
    10
}

fn default_align_cap() -> u64 {
    1_000_000
}

impl Default for ThinPolicy {
    fn default() -> Self {
        ThinPolicy { t1: default_t1(), len1: default_len1(), growth: default_growth(), align_cap: default_align_cap() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThinLevel {
    pub t: u64,
    pub len: u64,
    /// lcm of the earlier levels when t and len are multiples of it.
    pub aligned_to: Option<u64>,
    /// |ℰ_i|.
    pub kept: u64,
    /// Allowance for T_i/t_i, as a rational string.
    pub allowance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThinRecipe {
    pub policy: ThinPolicy,
    pub beta_target: f64,
    /// Σ T_i/t_i.
    pub ratio_sum: String,
    /// β = 1 − Σ T_i/t_i.
    pub beta: String,
    pub levels: Vec<ThinLevel>,
}

impl ThinRecipe {
    pub fn schedule(&self) -> Vec<Block> {
        self.levels.iter().map(|l| Block { t: l.t, len: l.len }).collect()
    }

    pub fn beta(&self) -> Result<BigRational> {
        parse_rat(&self.beta)
    }
}

fn ceil_u64(r: &BigRational) -> Result<u64> {
    r.ceil().to_integer().to_u64().ok_or_else(|| Error::invalid("thin-block schedule overflows u64"))
}

fn round_up(x: u64, m: u64) -> Result<u64> {
    x.div_ceil(m).checked_mul(m).ok_or_else(|| Error::invalid("thin-block schedule overflows u64"))
}

fn q(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Level i may use T_i/t_i ≤ (1 − β_target)/2^i, so Σ T_i/t_i ≤ 1 − β_target.
/// Block i+1 is aligned to lcm(ℰ_1 ∪ … ∪ ℰ_i) while that lcm is at most
/// `align_cap`; beyond it, condition (b) is verified directly by the sieve.
pub fn build_thin_blocks(policy: &ThinPolicy, levels: usize, beta_target: f64) -> Result<Construction> {
    if levels < 2 {
        return Err(Error::invalid("thin blocks need at least 2 levels"));
    }
    if !(beta_target > 0.0 && beta_target < 1.0) {
        return Err(Error::invalid(format!("beta_target must lie in (0, 1), got {beta_target}")));
    }
    if policy.t1 == 0 || policy.len1 == 0 || policy.growth < 2 {
        return Err(Error::invalid("t1, len1 must be >= 1 and growth >= 2"));
    }
    let s = BigRational::one() - rat_from_f64(beta_target)?;
    let mut schedule: Vec<Block> = Vec::new();
    let mut out: Vec<ThinLevel> = Vec::new();
    let mut kept_all: Vec<u64> = Vec::new();
    for i in 1..=levels {
        let allowance = &s / q(1u64 << i.min(62));
        let (len, align) = match schedule.last() {
            None => (policy.len1, None),
            Some(prev) => {
                let base = prev.len.checked_mul(policy.growth).ok_or_else(|| Error::invalid("block length overflows"))?;
                match lcm_capped(&kept_all, policy.align_cap).value() {
                    Some(l) => (round_up(base, l)?, Some(l)),
                    None => (base, None),
                }
            }
        };
        let floor = match schedule.last() {
            None => policy.t1,
            Some(prev) => prev.end() + 1,
        };
        let mut t = floor.max(ceil_u64(&(q(len) / &allowance))?);
        if let Some(l) = align {
            t = round_up(t, l)?;
        }
        if t.checked_add(len).is_none() {
            return Err(Error::invalid(format!("level {i}: schedule overflows u64")));
        }
        schedule.push(Block { t, len });
        let kept = thin_block_elements(&schedule, t + len - 1).pop().unwrap_or_default();
        kept_all.extend_from_slice(&kept);
        out.push(ThinLevel { t, len, aligned_to: align, kept: kept.len() as u64, allowance: rat_string(&allowance) });
    }
    let ratio_sum: BigRational = schedule.iter().map(|b| q(b.len) / q(b.t)).fold(BigRational::zero(), |a, b| a + b);
    let beta = BigRational::one() - &ratio_sum;
    for (i, l) in out.iter().enumerate() {
        if q(l.kept) < &beta * q(l.len) {
            return Err(Error::Internal(format!(
                "level {}: |E_i| = {} is below beta * T_i = {}",
                i + 1,
                l.kept,
                crate::density::ratio_to_f64(&(&beta * q(l.len)))
            )));
        }
    }
    let mut notes = vec!["block lengths are aligned to the lcm of earlier levels instead of (t_i + T_i)!".to_string()];
    if out.iter().skip(1).any(|l| l.aligned_to.is_none()) {
        notes.push("some blocks exceed the alignment cap; condition (b) is verified by direct sieving there".into());
    }
    let recipe = ThinRecipe {
        policy: policy.clone(),
        beta_target,
        ratio_sum: rat_string(&ratio_sum),
        beta: rat_string(&beta),
        levels: out,
    };
    assemble(FamilySpec::ThinBlocks { schedule }, Recipe::ThinBlocks(recipe), notes)
}

pub(super) fn checks(spec: &FamilySpec, r: &ThinRecipe) -> Result<Vec<Check>> {
    let schedule = r.schedule();
    let mut out = vec![Check::new(
        "spec_matches_schedule",
        None,
        *spec == FamilySpec::ThinBlocks { schedule: schedule.clone() },
        format!("{} blocks", schedule.len()),
    )];
    let sum: BigRational = schedule.iter().map(|b| q(b.len) / q(b.t)).fold(BigRational::zero(), |a, b| a + b);
    let target = BigRational::one() - rat_from_f64(r.beta_target)?;
    out.push(Check::new(
        "ratio_sum_below_one",
        None,
        sum < BigRational::one() && sum <= target && rat_string(&sum) == r.ratio_sum,
        format!("sum T_i/t_i = {sum} ~ {:.6}", crate::density::ratio_to_f64(&sum)),
    ));
    let beta = BigRational::one() - &sum;
    let last_end = schedule.last().map(Block::end).unwrap_or(0);
    let e = spec.materialize(last_end)?;
    let v = is_primitive(&e);
    out.push(Check::new(
        "primitive",
        None,
        v.primitive,
        match v.witness {
            Some((a, b)) => format!("{a} divides {b}"),
            None => format!("{} elements up to {last_end}", e.len()),
        },
    ));
    let mut earlier: Vec<u64> = Vec::new();
    for (i, (b, l)) in schedule.iter().zip(&r.levels).enumerate() {
        let k = i + 1;
        let level: Vec<u64> = e.iter().filter(|&x| x >= b.t && x <= b.end()).collect();
        out.push(Check::new(
            "within_block_primitive",
            Some(k),
            b.len < b.t,
            format!("(t + T)/t = {}/{} < 2", b.t + b.len, b.t),
        ));
        if let Some(m) = l.aligned_to {
            let lcm = lcm_capped(&earlier, u64::MAX).value();
            out.push(Check::new(
                "lcm_alignment",
                Some(k),
                lcm.is_some_and(|lcm| lcm == m && b.t % m == 0 && b.len % m == 0),
                format!("t = {}, T = {}, lcm = {m}", b.t, b.len),
            ));
        }
        let earlier_set = FiniteSet::new(earlier.clone())?;
        let hit = sieve_multiples(&earlier_set, b.t, b.end() + 1)?;
        let clean = level.iter().all(|&x| !hit.get(x));
        let complete = (b.t..=b.end()).filter(|&x| !hit.get(x)).count() == level.len();
        out.push(Check::new(
            "condition_a",
            Some(k),
            clean && complete,
            format!("level {k} is the block minus multiples of {} earlier elements", earlier.len()),
        ));
        let n = level.len() as u64;
        out.push(Check::new(
            "condition_b",
            Some(k),
            q(n) >= &beta * q(b.len) && n == l.kept,
            format!("|E_{k}| = {n}, beta * T_{k} = {:.3}", crate::density::ratio_to_f64(&(&beta * q(b.len)))),
        ));
        if let Some(m) = l.aligned_to {
            // On an aligned block the earlier multiples occupy exactly T·d(ℳ).
            let d = crate::density::exact_density_period(&earlier_set, m)?;
            let exact = d * q(b.len);
            out.push(Check::new(
                "aligned_count_identity",
                Some(k),
                q(b.len - n) == exact,
                format!("T - |E_{k}| = {} = T * d(M_earlier)", b.len - n),
            ));
        }
        earlier.extend(level);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_example() {
        let c = build_thin_blocks(&ThinPolicy::default(), 2, 0.5).unwrap();
        let FamilySpec::ThinBlocks { schedule } = &c.spec else { panic!() };
        assert_eq!(schedule[0], Block { t: 10, len: 2 });
        assert_eq!(schedule[1].t % 110, 0);
        assert_eq!(schedule[1].len % 110, 0);
        let e = c.spec.materialize(schedule[1].end()).unwrap();
        assert_eq!(&e.as_slice()[..2], &[10, 11]);
        let oracle: Vec<u64> =
            (schedule[1].t..=schedule[1].end()).filter(|x| x % 10 != 0 && x % 11 != 0).collect();
        assert_eq!(&e.as_slice()[2..], oracle.as_slice());
        assert!(c.log.all_passed(), "{:?}", c.log.failed().collect::<Vec<_>>());
        c.verify().unwrap();
    }

    #[test]
    fn ratio_sum_example() {
        let r: BigRational = q(2) / q(10) + q(4) / q(110);
        assert!(r < BigRational::one());
        assert_eq!(r, BigRational::new(13.into(), 55.into()));
    }

    #[test]
    fn four_levels_stay_thin_and_primitive() {
        let c = build_thin_blocks(&ThinPolicy::default(), 4, 0.5).unwrap();
        assert!(c.log.all_passed(), "{:?}", c.log.failed().collect::<Vec<_>>());
        let Recipe::ThinBlocks(r) = &c.log.recipe else { panic!() };
        assert!(r.beta().unwrap() >= BigRational::new(1.into(), 2.into()));
        // Brute-force primitivity on the emitted truncation.
        let end = r.levels.last().map(|l| l.t + l.len - 1).unwrap();
        let e = c.spec.materialize(end).unwrap().into_vec();
        let mut divides = false;
        let small: Vec<u64> = e.iter().copied().take_while(|&x| x < 2000).collect();
        for &a in &small {
            for &b in &e {
                divides |= a < b && b % a == 0;
            }
        }
        assert!(!divides);
    }

    #[test]
    fn preconditions() {
        assert!(build_thin_blocks(&ThinPolicy::default(), 1, 0.5).is_err());
        assert!(build_thin_blocks(&ThinPolicy::default(), 2, 1.0).is_err());
    }

    #[test]
    fn json_round_trip_reverifies() {
        let c = build_thin_blocks(&ThinPolicy::default(), 3, 0.5).unwrap();
        let back = Construction::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        back.verify().unwrap();
    }

    #[test]
    fn tampered_log_fails_verification() {
        let mut c = build_thin_blocks(&ThinPolicy::default(), 2, 0.5).unwrap();
        if let FamilySpec::ThinBlocks { schedule } = &mut c.spec {
            schedule[1].t += 1;
        }
        assert!(c.verify().is_err());
    }
}
