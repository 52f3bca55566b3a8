//! ℬ_{(T_k)} = ⋃_k (T_k, 2T_k] with Σ d_{T_k} ≤ ε and T_{k+1} > x₀(T_k).

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::{assemble, geometric_grid, rat_from_f64, Check, Construction, Recipe};
use crate::density::{erdos_interval_density, IntervalMethod};
use crate::error::{Error, Result};
use crate::family::FamilySpec;
use crate::set::FiniteSet;
use crate::sieve::{count_multiples, count_multiples_at};

/// Strict builds fail when a level cannot be certified; best-effort builds
/// emit the first admissible T per level and record the failed checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildMode {
    #[default]
    Strict,
    BestEffort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalParams {
    pub epsilon: f64,
    pub levels: usize,
    pub n_est: u64,
    #[serde(default)]
    pub mode: BuildMode,
    /// Smallest T tried for the first level.
    #[serde(default = "default_t1")]
    pub t1: u64,
    /// T_{k+1} ≥ min_growth · T_k.
    #[serde(default = "default_growth")]
    pub min_growth: u64,
    /// Ratio of the geometric grid on which x₀ is sampled.
    #[serde(default = "default_grid_ratio")]
    pub grid_ratio: f64,
}

fn default_t1() -> u64 {
    10
}

fn default_growth() -> u64 {
    10
}

fn default_grid_ratio() -> f64 {
    1.1
}

impl IntervalParams {
    pub fn new(epsilon: f64, levels: usize, n_est: u64) -> Self {
        IntervalParams {
            epsilon,
            levels,
            n_est,
            mode: BuildMode::Strict,
            t1: default_t1(),
            min_growth: default_growth(),
            grid_ratio: default_grid_ratio(),
        }
    }

    pub fn with_mode(mut self, mode: BuildMode) -> Self {
        self.mode = mode;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.25) {
            return Err(Error::invalid(format!("epsilon must lie in (0, 1/4), got {}", self.epsilon)));
        }
        if self.levels == 0 {
            return Err(Error::invalid("levels must be >= 1"));
        }
        if self.t1 == 0 || self.min_growth < 2 {
            return Err(Error::invalid("t1 must be >= 1 and min_growth >= 2"));
        }
        if !(self.grid_ratio > 1.0) {
            return Err(Error::invalid("grid_ratio must exceed 1"));
        }
        if self.n_est < 8 * self.t1 {
            return Err(Error::invalid(format!("N_est = {} is below 8 T_1", self.n_est)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalLevel {
    pub t: u64,
    /// d̂_T = count/n, the natural partial of ℳ_{(T,2T]} at n (stabilized to
    /// a relative change of 1e-3 between n/2 and n when the budget allows).
    pub d_hat_count: u64,
    pub d_hat_n: u64,
    pub d_hat: f64,
    /// Budget ε/2^k allotted to this level.
    pub share: f64,
    /// Empirical stand-in for x₀(T): smallest sampled X such that every
    /// sampled x ≥ X satisfies |ℳ_{(T,2T]} ∩ [1,x]| ≤ 2 d̂_T x.
    pub x0: u64,
    /// (x, |ℳ_{(T,2T]} ∩ [1,x]|) on the sampling grid.
    pub samples: Vec<(u64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalRecipe {
    pub params: IntervalParams,
    pub levels: Vec<IntervalLevel>,
}

impl IntervalRecipe {
    pub fn ts(&self) -> Vec<u64> {
        self.levels.iter().map(|l| l.t).collect()
    }
}

fn block(t: u64) -> FiniteSet {
    FiniteSet::from_sorted((t + 1..=2 * t).collect())
}

/// d̂_T within the budget, or `None` when `n_est` is too small for the
/// partials to stabilize.
fn estimate(t: u64, n_est: u64) -> Result<Option<(u64, u64)>> {
    let start = t.saturating_mul(1000).min(n_est / 4).max(4 * t);
    match erdos_interval_density(t, IntervalMethod::Empirical { start: Some(start), max_n: n_est }) {
        Ok(est) => {
            let n = est.n.expect("empirical estimates record n");
            let r = est.exact().expect("empirical estimates are exact ratios");
            // The estimate is count/n in lowest terms; recover the count.
            let count = (r * BigRational::from_integer(n.into())).to_integer();
            Ok(Some((u64::try_from(count).map_err(|_| Error::Internal("count overflow".into()))?, n)))
        }
        Err(e) if e.is_budget() => Ok(None),
        Err(e) => Err(e),
    }
}

/// The natural partial at `n`, used when the partials have not settled.
/// Partials of ℳ_{(T,2T]} creep upwards, so this tends to underestimate d_T.
fn partial_at(t: u64, n: u64) -> Result<(u64, u64)> {
    Ok((count_multiples_at(&block(t), &[n])?[0], n))
}

fn x0_surrogate(t: u64, d: (u64, u64), n_est: u64, ratio: f64) -> Result<(Option<u64>, Vec<(u64, u64)>)> {
    let grid = geometric_grid(2 * t, n_est, ratio);
    let counts = count_multiples_at(&block(t), &grid)?;
    let samples: Vec<(u64, u64)> = grid.into_iter().zip(counts).collect();
    Ok((first_good_suffix(&samples, d), samples))
}

fn within_bound(x: u64, count: u64, (c, n): (u64, u64)) -> bool {
    count as u128 * n as u128 <= 2 * c as u128 * x as u128
}

fn first_good_suffix(samples: &[(u64, u64)], d: (u64, u64)) -> Option<u64> {
    let mut x0 = None;
    for &(x, count) in samples.iter().rev() {
        if !within_bound(x, count, d) {
            break;
        }
        x0 = Some(x);
    }
    x0
}

/// Greedy choice of T_1 < T_2 < … with d̂_{T_k} ≤ ε/2^k and T_{k+1} > x̂₀(T_k).
pub fn build_besicovitch_intervals(params: &IntervalParams) -> Result<Construction> {
    params.validate()?;
    let mut levels: Vec<IntervalLevel> = Vec::new();
    let mut notes = vec![
        "x0 is an empirical surrogate sampled on a geometric grid up to N_est".to_string(),
        "d_T is estimated by natural partial densities of M_(T,2T]".to_string(),
    ];
    for k in 1..=params.levels {
        let share = params.epsilon / 2f64.powi(k as i32);
        let lower = match levels.last() {
            None => params.t1,
            Some(l) => (l.x0 + 1).max(l.t.saturating_mul(params.min_growth)),
        };
        let (t, d) = match params.mode {
            BuildMode::Strict => strict_level(k, lower, share, params.n_est)?,
            BuildMode::BestEffort => match estimate(lower, params.n_est)? {
                Some(d) => (lower, d),
                None => {
                    notes.push(format!("level {k}: d_T for T = {lower} did not stabilize; using the partial at N_est"));
                    (lower, partial_at(lower, params.n_est)?)
                }
            },
        };
        let (x0, samples) = x0_surrogate(t, d, params.n_est, params.grid_ratio)?;
        let x0 = x0.ok_or_else(|| {
            Error::Budget(format!("level {k}: no x0 surrogate for T = {t} below N_est = {}", params.n_est))
        })?;
        levels.push(IntervalLevel {
            t,
            d_hat_count: d.0,
            d_hat_n: d.1,
            d_hat: d.0 as f64 / d.1 as f64,
            share,
            x0,
            samples,
        });
    }
    if params.mode == BuildMode::BestEffort {
        notes.push("best-effort build: T_k is the smallest admissible value, d_T budgets are not enforced".into());
    }
    let spec = FamilySpec::IntervalUnion { levels: levels.iter().map(|l| l.t).collect() };
    let recipe = IntervalRecipe { params: params.clone(), levels };
    assemble(spec, Recipe::BesicovitchIntervals(recipe), notes)
}

fn strict_level(k: usize, lower: u64, share: f64, n_est: u64) -> Result<(u64, (u64, u64))> {
    let mut t = lower;
    let mut best: Option<(u64, f64)> = None;
    loop {
        let Some(d) = estimate(t, n_est)? else { break };
        let v = d.0 as f64 / d.1 as f64;
        if v <= share {
            return Ok((t, d));
        }
        if best.map_or(true, |(_, b)| v < b) {
            best = Some((t, v));
        }
        t = match t.checked_mul(2) {
            Some(t) => t,
            None => break,
        };
    }
    let detail = match best {
        Some((bt, bv)) => format!("smallest estimate {bv:.4} at T = {bt}"),
        None => "no T could be estimated".into(),
    };
    Err(Error::Budget(format!(
        "level {k}: no T >= {lower} with d_T <= {share:.5} certifiable under N_est = {n_est} ({detail})"
    )))
}

pub(super) fn checks(spec: &FamilySpec, r: &IntervalRecipe) -> Result<Vec<Check>> {
    let ts = r.ts();
    let mut out = vec![Check::new(
        "spec_matches_schedule",
        None,
        *spec == FamilySpec::IntervalUnion { levels: ts.clone() },
        format!("T = {ts:?}"),
    )];
    let eps = rat_from_f64(r.params.epsilon)?;
    let mut sum = BigRational::zero();
    for l in &r.levels {
        sum += BigRational::new(l.d_hat_count.into(), l.d_hat_n.into());
    }
    out.push(Check::new(
        "d_sum_within_epsilon",
        None,
        sum <= eps,
        format!("sum of d_hat = {:.6}, epsilon = {}", crate::density::ratio_to_f64(&sum), r.params.epsilon),
    ));
    for (i, l) in r.levels.iter().enumerate() {
        let k = i + 1;
        let top = spec.materialize(2 * l.t)?;
        let inside = (l.t + 1..=2 * l.t).all(|n| top.contains(n));
        let c = count_multiples(spec, 2 * l.t)?;
        out.push(Check::new(
            "upper_half",
            Some(k),
            inside && 2 * c >= 2 * l.t,
            format!("count(2T)/(2T) = {c}/{}", 2 * l.t),
        ));
        if k >= 2 {
            let c = count_multiples(spec, l.t)?;
            let bound = &eps * BigRational::from_integer(2.into()) * BigRational::from_integer(l.t.into());
            out.push(Check::new(
                "lower_dip",
                Some(k),
                BigRational::from_integer(c.into()) <= bound,
                format!("count(T)/T = {c}/{} = {:.4}, bound 2 epsilon", l.t, c as f64 / l.t as f64),
            ));
        }
        if let Some(next) = r.levels.get(i + 1) {
            out.push(Check::new(
                "growth_beyond_x0",
                Some(k),
                next.t > l.x0,
                format!("T_{} = {} vs x0(T_{k}) = {}", k + 1, next.t, l.x0),
            ));
        }
        let xs: Vec<u64> = l.samples.iter().map(|s| s.0).collect();
        let recount = count_multiples_at(&block(l.t), &xs)?;
        let same = recount.iter().zip(&l.samples).all(|(a, s)| *a == s.1);
        let d = (l.d_hat_count, l.d_hat_n);
        let holds = l.samples.iter().filter(|s| s.0 >= l.x0).all(|&(x, c)| within_bound(x, c, d));
        out.push(Check::new(
            "x0_surrogate",
            Some(k),
            same && holds && first_good_suffix(&l.samples, d) == Some(l.x0),
            format!("{} samples up to {}, x0 = {}", l.samples.len(), r.params.n_est, l.x0),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_count(ts: &[u64], n: u64) -> u64 {
        (1..=n)
            .filter(|m| ts.iter().any(|&t| (t + 1..=2 * t).any(|b| m % b == 0)))
            .count() as u64
    }

    #[test]
    fn best_effort_levels_grow_past_surrogates() {
        let p = IntervalParams::new(0.1, 2, 1_000_000).with_mode(BuildMode::BestEffort);
        let c = build_besicovitch_intervals(&p).unwrap();
        let Recipe::BesicovitchIntervals(r) = &c.log.recipe else { panic!() };
        assert_eq!(r.levels[0].t, 10);
        assert!(r.levels[1].t > r.levels[0].x0);
        assert!(r.levels[1].t >= 100);
        for l in &r.levels {
            assert!(l.d_hat > 0.2 && l.d_hat < 0.6, "d_hat = {}", l.d_hat);
        }
        c.verify().unwrap();
        assert!(c.log.check("upper_half").all(|ch| ch.passed));
        assert!(c.log.check("x0_surrogate").all(|ch| ch.passed));
        // Every T is far too small for d_T to fit a 0.1 budget.
        assert!(!c.log.check("d_sum_within_epsilon").next().unwrap().passed);
    }

    #[test]
    fn estimate_matches_brute_force() {
        let (c, n) = estimate(10, 100_000).unwrap().unwrap();
        assert_eq!(c, brute_count(&[10], n));
    }

    #[test]
    fn lower_dip_uses_whole_family() {
        let spec = FamilySpec::IntervalUnion { levels: vec![10, 200] };
        assert_eq!(count_multiples(&spec, 200).unwrap(), brute_count(&[10, 200], 200));
    }

    #[test]
    fn strict_build_names_the_level() {
        let p = IntervalParams::new(0.1, 2, 100_000);
        let err = build_besicovitch_intervals(&p).unwrap_err();
        assert!(err.is_budget());
        assert!(err.to_string().contains("level 1"), "{err}");
    }

    #[test]
    fn rejects_bad_epsilon() {
        assert!(build_besicovitch_intervals(&IntervalParams::new(0.25, 1, 1_000_000)).is_err());
        assert!(build_besicovitch_intervals(&IntervalParams::new(0.0, 1, 1_000_000)).is_err());
        assert!(build_besicovitch_intervals(&IntervalParams::new(0.1, 0, 1_000_000)).is_err());
    }

    #[test]
    fn surrogate_is_smallest_good_suffix() {
        let samples = vec![(10, 9), (20, 5), (40, 30), (80, 10), (160, 20)];
        // bound: count <= 2 * (1/4) * x = x / 2
        assert_eq!(first_good_suffix(&samples, (1, 4)), Some(80));
        assert_eq!(first_good_suffix(&[(10, 9)], (1, 4)), None);
    }
}
