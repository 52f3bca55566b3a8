//! The Erdős existence statistic
//! S(x, ε) = x⁻¹ Σ_{a∈ℬ∩(x^{1−ε},x]} |[1,x] ∩ aℤ ∩ ℱ_{ℬ∩[1,a)}|,
//! prime-reciprocal sums g_{i,ε} and Mertens sums over progressions.

use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{gcd, power_threshold, CompensatedSum};
use crate::error::{Error, Result};
use crate::family::{FamilySpec, PatternSpec};
use crate::primes::primes_up_to;
use crate::set::FiniteSet;
use crate::sieve::sieve_multiples;

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

/// Per-element counts |[1,x] ∩ aℤ ∩ ℱ_{B∩[1,a)}| for every `a ∈ B` with
/// `a >= from`, ascending. Elements below `from` are sieved in bulk; the
/// rest are processed one at a time, counting before merging.
fn fresh_counts(b: &FiniteSet, x: u64, from: u64) -> Result<Vec<(u64, u64)>> {
    let elems = b.truncate(x);
    let split = elems.as_slice().partition_point(|&e| e < from);
    let (below, range) = elems.as_slice().split_at(split);
    if range.is_empty() {
        return Ok(Vec::new());
    }
    let below = FiniteSet::from_sorted(below.to_vec());
    let mut bits = sieve_multiples(&below, 1, x + 1)?.words().to_vec();
    let get = |bits: &[u64], n: u64| bits[((n - 1) / 64) as usize] >> ((n - 1) % 64) & 1 == 1;
    let mut out = Vec::with_capacity(range.len());
    for &a in range {
        let mut fresh = 0u64;
        let mut m = a;
        while m <= x {
            if !get(&bits, m) {
                fresh += 1;
                bits[((m - 1) / 64) as usize] |= 1 << ((m - 1) % 64);
            }
            m += a;
        }
        out.push((a, fresh));
    }
    Ok(out)
}

/// Value of the statistic with its integer numerator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Statistic {
    pub x: u64,
    pub epsilon: f64,
    pub count: u64,
    pub value: f64,
}

/// S(x, ε) by an ascending incremental sieve; cost O(Σ_{b≤x} x/b).
pub fn besicovitch_statistic(spec: &FamilySpec, x: u64, eps: f64) -> Result<Statistic> {
    if x < 2 {
        return Err(Error::invalid("x must be >= 2"));
    }
    check_eps(eps)?;
    let b = spec.materialize(x)?;
    statistic_for_set(&b, x, eps)
}

pub fn statistic_for_set(b: &FiniteSet, x: u64, eps: f64) -> Result<Statistic> {
    let from = power_threshold(x, eps);
    let count = fresh_counts(b, x, from)?.iter().map(|&(_, c)| c).sum();
    Ok(Statistic { x, epsilon: eps, count, value: count as f64 / x as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendVerdict {
    ConsistentWithBesicovitch,
    Inconclusive,
}

/// S(x, ε) on a grid. Rows follow `x_grid`, columns follow `epsilon_grid`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub x_grid: Vec<u64>,
    pub epsilon_grid: Vec<f64>,
    pub counts: Vec<Vec<u64>>,
    pub statistic: Vec<Vec<f64>>,
    /// Per ε: the maximum of S over the upper half of the x grid.
    pub limsup_proxy: Vec<f64>,
    pub threshold: f64,
    pub verdict: TrendVerdict,
    pub heuristic: bool,
}

pub const DEFAULT_TREND_THRESHOLD: f64 = 0.05;

impl CriterionReport {
    /// Columns `x, epsilon, S, count`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::Internal(format!("csv: {e}"));
        wr.write_record(["x", "epsilon", "S", "count"]).map_err(err)?;
        for (i, &x) in self.x_grid.iter().enumerate() {
            for (j, &eps) in self.epsilon_grid.iter().enumerate() {
                wr.write_record([
                    x.to_string(),
                    format!("{eps:?}"),
                    format!("{:?}", self.statistic[i][j]),
                    self.counts[i][j].to_string(),
                ])
                .map_err(err)?;
            }
        }
        wr.flush().map_err(|e| Error::Internal(format!("csv: {e}")))
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "verdict": self.verdict,
            "heuristic": true,
            "threshold": self.threshold,
            "rule": "limsup proxy at the smallest epsilon below threshold",
            "epsilon_grid": self.epsilon_grid,
            "limsup_proxy": self.limsup_proxy,
            "x_grid": self.x_grid,
        })
    }
}

/// One incremental pass per x serves every ε; x values run in parallel.
pub fn criterion_scan(spec: &FamilySpec, x_grid: &[u64], eps_grid: &[f64], threshold: f64) -> Result<CriterionReport> {
    if x_grid.is_empty() || eps_grid.is_empty() {
        return Err(Error::invalid("grids must be nonempty"));
    }
    if x_grid[0] < 2 || x_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("x grid must be strictly increasing and start at >= 2"));
    }
    eps_grid.iter().try_for_each(|&e| check_eps(e))?;
    let xmax = *x_grid.last().unwrap();
    let b = spec.materialize(xmax)?;
    let eps_max = eps_grid.iter().copied().fold(f64::MIN, f64::max);
    let counts: Vec<Vec<u64>> = x_grid
        .par_iter()
        .map(|&x| -> Result<Vec<u64>> {
            let per_a = fresh_counts(&b, x, power_threshold(x, eps_max))?;
            Ok(eps_grid
                .iter()
                .map(|&eps| {
                    let from = power_threshold(x, eps);
                    per_a.iter().filter(|&&(a, _)| a >= from).map(|&(_, c)| c).sum()
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let statistic: Vec<Vec<f64>> = counts
        .iter()
        .zip(x_grid)
        .map(|(row, &x)| row.iter().map(|&c| c as f64 / x as f64).collect())
        .collect();
    let upper = x_grid.len() / 2;
    let limsup_proxy: Vec<f64> = (0..eps_grid.len())
        .map(|j| statistic[upper..].iter().map(|row| row[j]).fold(0.0, f64::max))
        .collect();
    let jmin = (0..eps_grid.len())
        .min_by(|&a, &c| eps_grid[a].total_cmp(&eps_grid[c]))
        .unwrap();
    let verdict = if limsup_proxy[jmin] < threshold {
        TrendVerdict::ConsistentWithBesicovitch
    } else {
        TrendVerdict::Inconclusive
    };
    Ok(CriterionReport {
        x_grid: x_grid.to_vec(),
        epsilon_grid: eps_grid.to_vec(),
        counts,
        statistic,
        limsup_proxy,
        threshold,
        verdict,
        heuristic: true,
    })
}

/// g_{ε}(x) = Σ_{p∈𝒜∩(x^{1−ε}/e, x/e]} 1/p. The lower boundary is decided
/// exactly: `p` qualifies iff `p·e > x^{1−ε}`.
pub fn g_sum(e: u64, pattern: &PatternSpec, x: u64, eps: f64) -> Result<f64> {
    if x < 2 || e == 0 {
        return Err(Error::invalid("g_sum needs x >= 2 and e >= 1"));
    }
    check_eps(eps)?;
    let lo = power_threshold(x, eps).div_ceil(e);
    let elems = pattern.materialize(x / e)?;
    Ok(elems
        .into_iter()
        .filter(|&p| p >= lo)
        .map(|p| 1.0 / p as f64)
        .collect::<CompensatedSum>()
        .value())
}

/// Σ_{p ≤ x, p ≡ l (mod k)} 1/p.
pub fn mertens_progression_sum(k: u64, l: u64, x: u64) -> Result<f64> {
    if k == 0 || gcd(k, l) != 1 {
        return Err(Error::invalid(format!("gcd({k}, {l}) must be 1")));
    }
    if x < 3 {
        return Err(Error::invalid("x must be >= 3"));
    }
    let l = l % k;
    Ok(primes_up_to(x)
        .into_iter()
        .filter(|p| p % k == l)
        .map(|p| 1.0 / p as f64)
        .collect::<CompensatedSum>()
        .value())
}

/// D(x) = Σ_{p≤x, p≡l (k)} 1/p − lnln(x)/φ(k).
pub fn mertens_drift(k: u64, l: u64, x: u64) -> Result<f64> {
    let phi = crate::arith::totient(k) as f64;
    Ok(mertens_progression_sum(k, l, x)? - (x as f64).ln().ln() / phi)
}

/// Primes up to x split by residue mod k.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResiduePartition {
    pub k: u64,
    pub x: u64,
    /// `(l, count, Σ 1/p)` for every residue `l` coprime to `k`.
    pub classes: Vec<(u64, u64, f64)>,
    /// Primes dividing `k`, which lie in no coprime class.
    pub divisors_of_k: Vec<u64>,
    pub total_count: u64,
    pub total_sum: f64,
}

pub fn residue_partition(k: u64, x: u64) -> Result<ResiduePartition> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    let primes = primes_up_to(x);
    let mut classes = Vec::new();
    for l in 0..k {
        if gcd(k, l) == 1 {
            let members = primes.iter().filter(|&&p| p % k == l);
            let count = members.clone().count() as u64;
            let sum = members.map(|&p| 1.0 / p as f64).collect::<CompensatedSum>().value();
            classes.push((l, count, sum));
        }
    }
    Ok(ResiduePartition {
        k,
        x,
        classes,
        divisors_of_k: primes.iter().copied().filter(|p| k % p == 0).collect(),
        total_count: primes.len() as u64,
        total_sum: primes.iter().map(|&p| 1.0 / p as f64).collect::<CompensatedSum>().value(),
    })
}
