//! ℬ = ⋃ e_i 𝒜_i with 𝒜_i ⊆ 𝒫_i ∩ [K_i, ∞), K_i calibrated so that
//! g_{i,1/2^i}(x) ≤ 1/4^{i−1} on every sampled x.

use serde::{Deserialize, Serialize};

use super::{assemble, geometric_grid, Check, Construction, Recipe};
use crate::arith::{power_threshold, CompensatedSum};
use crate::criterion::g_sum;
use crate::error::{Error, Result};
use crate::family::{FamilySpec, PatternSpec, Thinning};
use crate::primes::{is_prime, primes_in_progression, progression};
use crate::set::{is_primitive, FiniteSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LooseningPlan {
    /// Progression level per scale (ascending scales); defaults to 1, 2, ….
    #[serde(default)]
    pub levels: Option<Vec<u32>>,
    /// Keep every m-th prime of each 𝒜_i.
    #[serde(default)]
    pub stride: Option<u64>,
    #[serde(default = "default_grid_ratio")]
    pub grid_ratio: f64,
}

fn default_grid_ratio() -> f64 {
    1.05
}

impl Default for LooseningPlan {
    fn default() -> Self {
        LooseningPlan { levels: None, stride: None, grid_ratio: default_grid_ratio() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LooseningLevel {
    pub scale: u64,
    pub level: u32,
    pub epsilon: f64,
    pub bound: f64,
    /// Empirical stand-in for x_i: smallest sampled X with the g bound on
    /// every sampled x ∈ [X, N_cal].
    pub x_hat: u64,
    /// K_i = max(e_i, ⌈x̂_i/e_i⌉) + 1.
    pub cutoff: u64,
    /// (x, g_{i,ε}(x) over all of 𝒫_i) on the calibration grid.
    pub samples: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LooseningRecipe {
    pub scales: FiniteSet,
    pub plan: LooseningPlan,
    pub n_cal: u64,
    pub levels: Vec<LooseningLevel>,
}

impl LooseningRecipe {
    pub fn pattern(&self, l: &LooseningLevel) -> PatternSpec {
        pattern_for(l.level, l.cutoff, self.plan.stride)
    }
}

fn pattern_for(level: u32, cutoff: u64, stride: Option<u64>) -> PatternSpec {
    let p = PatternSpec::progression(level, cutoff);
    match stride {
        Some(m) if m > 1 => p.with_thinning(Thinning::Stride { m }),
        _ => p.declared_behrend(true),
    }
}

fn level_eps(level: u32) -> f64 {
    0.5f64.powi(level as i32)
}

fn level_bound(level: u32) -> f64 {
    0.25f64.powi(level as i32 - 1)
}

/// g over all of 𝒫_level for each grid point, from one sorted prime list.
fn calibrate(e: u64, level: u32, grid: &[u64]) -> Result<Vec<(u64, f64)>> {
    let hi = grid.last().copied().unwrap_or(0) / e;
    let ps = primes_in_progression(level, hi)?.into_vec();
    let eps = level_eps(level);
    Ok(grid
        .iter()
        .map(|&x| {
            let lo = power_threshold(x, eps).div_ceil(e);
            let a = ps.partition_point(|&p| p < lo);
            let b = ps.partition_point(|&p| p <= x / e);
            let s: CompensatedSum = ps[a..b.max(a)].iter().map(|&p| 1.0 / p as f64).collect();
            (x, s.value())
        })
        .collect())
}

fn first_good_suffix(samples: &[(u64, f64)], bound: f64) -> Option<u64> {
    let mut x = None;
    for &(xi, g) in samples.iter().rev() {
        if g > bound {
            break;
        }
        x = Some(xi);
    }
    x
}

pub fn build_loosening(scales: &FiniteSet, plan: &LooseningPlan, n_cal: u64) -> Result<Construction> {
    if scales.is_empty() {
        return Err(Error::invalid("the scale set is empty"));
    }
    let v = is_primitive(scales);
    if let Some((a, b)) = v.witness {
        return Err(Error::NotPrimitive { a, b });
    }
    if !(plan.grid_ratio > 1.0) {
        return Err(Error::invalid("grid_ratio must exceed 1"));
    }
    let levels: Vec<u32> = match &plan.levels {
        Some(ls) => ls.clone(),
        None => (1..=scales.len() as u32).collect(),
    };
    if levels.len() != scales.len() {
        return Err(Error::invalid(format!("{} levels for {} scales", levels.len(), scales.len())));
    }
    let mut seen = levels.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != levels.len() {
        return Err(Error::invalid("levels must be distinct"));
    }
    for &l in &levels {
        progression(l)?;
    }
    if n_cal < 4 * scales.max().unwrap_or(1) {
        return Err(Error::invalid(format!("N_cal = {n_cal} is too small for the scales")));
    }
    let grid = geometric_grid(2, n_cal, plan.grid_ratio);
    let mut out = Vec::new();
    for (e, &level) in scales.iter().zip(&levels) {
        let samples = calibrate(e, level, &grid)?;
        let bound = level_bound(level);
        let x_hat = first_good_suffix(&samples, bound).ok_or_else(|| {
            Error::Budget(format!("level {level} (scale {e}): g bound {bound} not reached below N_cal = {n_cal}"))
        })?;
        let cutoff = e.max(x_hat.div_ceil(e)) + 1;
        out.push(LooseningLevel { scale: e, level, epsilon: level_eps(level), bound, x_hat, cutoff, samples });
    }
    let spec = FamilySpec::Loosening {
        scales: out.iter().map(|l| l.scale).collect(),
        patterns: out.iter().map(|l| pattern_for(l.level, l.cutoff, plan.stride)).collect(),
    };
    let notes = vec![
        "x_i is an empirical surrogate: g is sampled on a geometric grid up to N_cal".to_string(),
        "calibration uses all primes of the progression, which dominates any tail or thinning".to_string(),
    ];
    let recipe = LooseningRecipe { scales: scales.clone(), plan: plan.clone(), n_cal, levels: out };
    assemble(spec, Recipe::Loosening(recipe), notes)
}

pub(super) fn checks(spec: &FamilySpec, r: &LooseningRecipe) -> Result<Vec<Check>> {
    let v = is_primitive(&r.scales);
    let mut out = vec![Check::new(
        "scales_primitive",
        None,
        v.primitive,
        format!("E = {}", r.scales),
    )];
    let expected = FamilySpec::Loosening {
        scales: r.levels.iter().map(|l| l.scale).collect(),
        patterns: r.levels.iter().map(|l| r.pattern(l)).collect(),
    };
    out.push(Check::new("spec_matches_schedule", None, *spec == expected, format!("{} levels", r.levels.len())));
    let mut total = 0usize;
    for (i, l) in r.levels.iter().enumerate() {
        let k = i + 1;
        out.push(Check::new(
            "cutoff_rule",
            Some(k),
            l.cutoff > l.scale && l.cutoff.saturating_mul(l.scale) >= l.x_hat,
            format!("K = {}, e = {}, x_hat = {}", l.cutoff, l.scale, l.x_hat),
        ));
        let pattern = r.pattern(l);
        let mut worst = 0.0f64;
        let mut ok = true;
        for &(x, _) in &l.samples {
            let g = g_sum(l.scale, &pattern, x, l.epsilon)?;
            worst = worst.max(g);
            ok &= g <= l.bound;
        }
        out.push(Check::new(
            "g_bound",
            Some(k),
            ok,
            format!("max g = {worst:.6} over {} samples, bound {}", l.samples.len(), l.bound),
        ));
        let (m, a) = progression(l.level)?;
        let elems = pattern.materialize(r.n_cal / l.scale)?;
        total += elems.len();
        out.push(Check::new(
            "residue_class",
            Some(k),
            elems.iter().all(|&p| p % m == a && p >= l.cutoff && is_prime(p)),
            format!("{} primes = {a} mod {m}", elems.len()),
        ));
    }
    let truncation = spec.materialize(r.n_cal)?;
    out.push(Check::new(
        "levels_disjoint",
        None,
        truncation.len() == total,
        format!("{} elements up to {}", truncation.len(), r.n_cal),
    ));
    let v = is_primitive(&truncation);
    out.push(Check::new(
        "primitive_truncation",
        None,
        v.primitive,
        match v.witness {
            Some((a, b)) => format!("{a} divides {b}"),
            None => format!("primitive up to {}", r.n_cal),
        },
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fs(v: &[u64]) -> FiniteSet {
        FiniteSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn trivial_scale_gives_progression_tail() {
        let c = build_loosening(&fs(&[1]), &LooseningPlan::default(), 100_000).unwrap();
        let Recipe::Loosening(r) = &c.log.recipe else { panic!() };
        let k = r.levels[0].cutoff;
        assert!(k >= 2);
        let got = c.spec.materialize(10_000).unwrap();
        let want: Vec<u64> = (k..=10_000).filter(|&p| is_prime(p) && p % 4 == 3).collect();
        assert_eq!(got.as_slice(), want.as_slice());
        assert!(c.log.all_passed(), "{:?}", c.log.failed().collect::<Vec<_>>());
    }

    #[test]
    fn two_scales() {
        let c = build_loosening(&fs(&[3, 5]), &LooseningPlan::default(), 200_000).unwrap();
        assert!(c.log.all_passed(), "{:?}", c.log.failed().collect::<Vec<_>>());
        let Recipe::Loosening(r) = &c.log.recipe else { panic!() };
        for l in &r.levels {
            assert!(l.cutoff > l.scale);
        }
        let b = c.spec.materialize(200_000).unwrap();
        for x in b.iter() {
            let (e, p) = if x % 3 == 0 { (3, x / 3) } else { (5, x / 5) };
            assert!(is_prime(p));
            assert_eq!(p % if e == 3 { 4 } else { 8 }, if e == 3 { 3 } else { 5 });
        }
        c.verify().unwrap();
    }

    #[test]
    fn calibration_matches_g_sum() {
        let grid = geometric_grid(2, 50_000, 1.3);
        let samples = calibrate(5, 2, &grid).unwrap();
        let full = PatternSpec::progression(2, 1);
        for (x, g) in samples {
            let oracle = g_sum(5, &full, x, 0.25).unwrap();
            assert!((g - oracle).abs() < 1e-12, "x = {x}: {g} vs {oracle}");
        }
    }

    #[test]
    fn cutoff_is_nontrivial_on_level_two() {
        // g_{2,1/4} exceeds 1/4 once both 5 and 13 fall in the window.
        let c = build_loosening(&fs(&[3, 5]), &LooseningPlan::default(), 200_000).unwrap();
        let Recipe::Loosening(r) = &c.log.recipe else { panic!() };
        assert!(r.levels[1].x_hat > 65, "{}", r.levels[1].x_hat);
    }

    #[test]
    fn rejects_non_primitive_scales() {
        let err = build_loosening(&fs(&[3, 6]), &LooseningPlan::default(), 100_000).unwrap_err();
        assert_eq!(err, Error::NotPrimitive { a: 3, b: 6 });
    }

    #[test]
    fn stride_thinning_is_recorded() {
        let plan = LooseningPlan { stride: Some(3), ..LooseningPlan::default() };
        let c = build_loosening(&fs(&[7]), &plan, 100_000).unwrap();
        let FamilySpec::Loosening { patterns, .. } = &c.spec else { panic!() };
        assert_eq!(patterns[0].thinning, Thinning::Stride { m: 3 });
        assert!(!patterns[0].declared_behrend);
        assert!(c.log.all_passed());
    }
}
