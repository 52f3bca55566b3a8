//! Exact and empirical densities of sets of multiples.
//!
//! Exact values are rationals. Three exact routes exist: inclusion-exclusion
//! over subsets, sieving one full period `lcm(B)`, and a recursive split
//! used by the Davenport-Erdős series when neither of the first two fits.

use std::collections::HashMap;
use std::fmt;
use std::io;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{lcm_big, lcm_capped, CappedLcm, CompensatedSum};
use crate::error::{Error, Result};
use crate::family::FamilySpec;
use crate::primes::primes_up_to;
use crate::set::{primitivize, FiniteSet};
use crate::sieve::{count_multiples_at, sieve_multiples, DEFAULT_SEGMENT};

pub const DEFAULT_SUBSET_CAP: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    NaturalPartial,
    LogPartial,
    ExactPeriodic,
}

impl DensityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DensityKind::NaturalPartial => "natural_partial",
            DensityKind::LogPartial => "log_partial",
            DensityKind::ExactPeriodic => "exact_periodic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "natural_partial" => Ok(DensityKind::NaturalPartial),
            "log_partial" => Ok(DensityKind::LogPartial),
            "exact_periodic" => Ok(DensityKind::ExactPeriodic),
            other => Err(Error::Parse(format!("unknown density kind {other:?}"))),
        }
    }
}

impl fmt::Display for DensityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensityValue {
    Exact(BigRational),
    Float(f64),
}

impl DensityValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            DensityValue::Exact(r) => ratio_to_f64(r),
            DensityValue::Float(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<&BigRational> {
        match self {
            DensityValue::Exact(r) => Some(r),
            DensityValue::Float(_) => None,
        }
    }
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// A density value with its evaluation bound and kind. `raw` keeps the
/// unclipped float for log-partial estimates, which can exceed 1 at finite N.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub value: DensityValue,
    pub n: Option<u64>,
    pub kind: DensityKind,
    pub raw: Option<f64>,
}

impl DensityEstimate {
    pub fn exact_periodic(r: BigRational) -> Self {
        DensityEstimate { value: DensityValue::Exact(r), n: None, kind: DensityKind::ExactPeriodic, raw: None }
    }

    pub fn to_f64(&self) -> f64 {
        self.value.to_f64()
    }

    pub fn exact(&self) -> Option<&BigRational> {
        self.value.exact()
    }

    pub fn is_exact_periodic(&self) -> bool {
        self.kind == DensityKind::ExactPeriodic
    }
}

#[derive(Serialize)]
struct EstimateRecord<'a> {
    value_num: Option<String>,
    value_den: Option<String>,
    value_float: f64,
    n: Option<u64>,
    kind: &'a str,
    raw: Option<f64>,
}

impl Serialize for DensityEstimate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (num, den) = match &self.value {
            DensityValue::Exact(r) => (Some(r.numer().to_string()), Some(r.denom().to_string())),
            DensityValue::Float(_) => (None, None),
        };
        EstimateRecord {
            value_num: num,
            value_den: den,
            value_float: self.to_f64(),
            n: self.n,
            kind: self.kind.as_str(),
            raw: self.raw,
        }
        .serialize(s)
    }
}

/// |ℳ_ℬ ∩ [1, N]| / N as an exact rational.
pub fn natural_partial(spec: &FamilySpec, n: u64) -> Result<DensityEstimate> {
    let count = crate::sieve::count_multiples(spec, n)?;
    Ok(DensityEstimate {
        value: DensityValue::Exact(ratio(count, n)),
        n: Some(n),
        kind: DensityKind::NaturalPartial,
        raw: None,
    })
}

/// (1 / ln N) Σ_{k ≤ N, k ∈ ℳ_ℬ} 1/k. Segments are summed in a fixed order,
/// so the float result does not depend on the thread count.
pub fn log_partial(spec: &FamilySpec, n: u64) -> Result<DensityEstimate> {
    if n < 2 {
        return Err(Error::invalid("log density needs N >= 2"));
    }
    let b = spec.materialize(n)?;
    let hi = n.checked_add(1).ok_or(Error::RangeTooLarge(n))?;
    let nseg = (hi - 1).div_ceil(DEFAULT_SEGMENT);
    let parts: Vec<CompensatedSum> = (0..nseg)
        .into_par_iter()
        .map(|i| {
            let lo = 1 + i * DEFAULT_SEGMENT;
            let seg_hi = hi.min(lo + DEFAULT_SEGMENT);
            let w = sieve_multiples(&b, lo, seg_hi).expect("segment bounds are valid");
            w.members().map(|k| 1.0 / k as f64).collect()
        })
        .collect();
    let mut total = CompensatedSum::new();
    for p in &parts {
        total.merge(p);
    }
    let raw = total.value() / (n as f64).ln();
    Ok(DensityEstimate {
        value: DensityValue::Float(raw.clamp(0.0, 1.0)),
        n: Some(n),
        kind: DensityKind::LogPartial,
        raw: Some(raw),
    })
}

fn lcm_u128(a: u128, b: u64) -> u128 {
    let g = (a % b as u128) as u64;
    let g = b.gcd(&g);
    a * (b / g) as u128
}

fn ie_dfs_small(b: &[u64], start: usize, cur: u128, positive: bool, total: u128, acc: &mut i128) {
    for i in start..b.len() {
        let l = lcm_u128(cur, b[i]);
        let term = (total / l) as i128;
        if positive {
            *acc += term;
        } else {
            *acc -= term;
        }
        ie_dfs_small(b, i + 1, l, !positive, total, acc);
    }
}

fn ie_dfs_big(b: &[u64], start: usize, cur: &BigUint, positive: bool, total: &BigUint, acc: &mut BigInt) {
    for i in start..b.len() {
        let l = cur.lcm(&BigUint::from(b[i]));
        let term = BigInt::from(total / &l);
        if positive {
            *acc += term;
        } else {
            *acc -= term;
        }
        ie_dfs_big(b, i + 1, &l, !positive, total, acc);
    }
}

/// Inclusion-exclusion over all nonempty subsets, with lcm(B) as the common
/// denominator. The top level of the subset tree runs in parallel; the
/// integer reduction is exact, so the result is thread-count independent.
fn ie_density(b: &[u64]) -> BigRational {
    if b.is_empty() {
        return BigRational::zero();
    }
    let total = lcm_big(b);
    let sum = if total.bits() <= 100 {
        let t: u128 = total.to_u128().expect("fits in 100 bits");
        let acc: i128 = (0..b.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = (t / b[i] as u128) as i128;
                ie_dfs_small(b, i + 1, b[i] as u128, false, t, &mut acc);
                acc
            })
            .sum();
        BigInt::from(acc)
    } else {
        (0..b.len())
            .into_par_iter()
            .map(|i| {
                let start = BigUint::from(b[i]);
                let mut acc = BigInt::from(&total / &start);
                ie_dfs_big(b, i + 1, &start, false, &total, &mut acc);
                acc
            })
            .reduce(BigInt::zero, |a, c| a + c)
    };
    BigRational::new(sum, BigInt::from(total))
}

/// d(ℳ_B) = Σ_{∅≠S⊆B} (−1)^{|S|+1} / lcm(S), exactly. B is primitivized
/// first (the density is unchanged); the cap applies to what remains.
pub fn exact_density_finite(b: &FiniteSet) -> Result<BigRational> {
    exact_density_finite_capped(b, DEFAULT_SUBSET_CAP)
}

pub fn exact_density_finite_capped(b: &FiniteSet, cap: usize) -> Result<BigRational> {
    let p = primitivize(b);
    if p.len() > cap {
        return Err(Error::SubsetCapExceeded { size: p.len(), cap });
    }
    Ok(ie_density(p.as_slice()))
}

/// |ℳ_B ∩ [1, L]| / L with L = lcm(B) <= cap.
pub fn exact_density_period(b: &FiniteSet, cap: u64) -> Result<BigRational> {
    match lcm_capped(b.as_slice(), cap) {
        CappedLcm::Value(l) => {
            let count = count_multiples_at(b, &[l])?[0];
            Ok(ratio(count, l))
        }
        CappedLcm::Overflow => Err(Error::LcmOverflow { cap }),
    }
}

/// Limits for [`exact_density`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactOptions {
    pub subset_cap: usize,
    pub period_cap: u64,
    /// Maximum number of non-trivial recursive splits.
    pub recursion_budget: usize,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions { subset_cap: DEFAULT_SUBSET_CAP, period_cap: 10_000_000, recursion_budget: 200_000 }
    }
}

/// Components of small inclusion-exclusion are cheaper than a period sieve.
const IE_SMALL: usize = 12;

/// Exact d(ℳ_B) by whichever route fits: the set is split into components
/// that share no prime factor (ℱ densities multiply across them); each
/// component uses inclusion-exclusion, a period sieve, or the recursion
/// f(B) = f(B ∖ b) − f(prim{a / gcd(a, b)}) / b for ℱ-densities f.
pub fn exact_density(b: &FiniteSet, opts: &ExactOptions) -> Result<BigRational> {
    let p = primitivize(b);
    let mut solver = Recursive::new(p.max().unwrap_or(1), *opts);
    Ok(BigRational::one() - solver.free_density(p.as_slice())?)
}

struct Recursive {
    opts: ExactOptions,
    factor_primes: Vec<u64>,
    memo: HashMap<Vec<u64>, BigRational>,
    splits: usize,
}

impl Recursive {
    fn new(max: u64, opts: ExactOptions) -> Self {
        let root = (max as f64).sqrt() as u64 + 1;
        Recursive { opts, factor_primes: primes_up_to(root), memo: HashMap::new(), splits: 0 }
    }

    fn prime_factors(&self, mut n: u64) -> Vec<u64> {
        let mut out = Vec::new();
        for &p in &self.factor_primes {
            if p * p > n {
                break;
            }
            if n % p == 0 {
                out.push(p);
                while n % p == 0 {
                    n /= p;
                }
            }
        }
        if n > 1 {
            out.push(n);
        }
        out
    }

    /// Groups of indices whose elements are linked by shared prime factors.
    fn components(&self, b: &[u64]) -> Vec<Vec<u64>> {
        let mut parent: Vec<usize> = (0..b.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        let mut owner: HashMap<u64, usize> = HashMap::new();
        for (i, &x) in b.iter().enumerate() {
            for p in self.prime_factors(x) {
                match owner.get(&p) {
                    Some(&j) => {
                        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                        if ri != rj {
                            parent[ri.max(rj)] = ri.min(rj);
                        }
                    }
                    None => {
                        owner.insert(p, i);
                    }
                }
            }
        }
        let mut groups: HashMap<usize, Vec<u64>> = HashMap::new();
        for (i, &x) in b.iter().enumerate() {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(x);
        }
        let mut out: Vec<Vec<u64>> = groups.into_values().collect();
        out.sort_unstable_by_key(|g| g[0]);
        out
    }

    /// d(ℱ_B) for primitive, ascending B.
    fn free_density(&mut self, b: &[u64]) -> Result<BigRational> {
        if b.is_empty() {
            return Ok(BigRational::one());
        }
        if b[0] == 1 {
            return Ok(BigRational::zero());
        }
        let mut acc = BigRational::one();
        for comp in self.components(b) {
            let f = self.component_free(&comp)?;
            if f.is_zero() {
                return Ok(f);
            }
            acc *= f;
        }
        Ok(acc)
    }

    fn component_free(&mut self, c: &[u64]) -> Result<BigRational> {
        if c.len() == 1 {
            return Ok(BigRational::one() - ratio(1, c[0]));
        }
        if let Some(v) = self.memo.get(c) {
            return Ok(v.clone());
        }
        let value = if c.len() <= IE_SMALL {
            BigRational::one() - ie_density(c)
        } else if let CappedLcm::Value(l) = lcm_capped(c, self.opts.period_cap) {
            let set = FiniteSet::from_sorted(c.to_vec());
            BigRational::one() - ratio(count_multiples_at(&set, &[l])?[0], l)
        } else if c.len() <= self.opts.subset_cap.min(20) {
            BigRational::one() - ie_density(c)
        } else {
            self.splits += 1;
            if self.splits > self.opts.recursion_budget {
                return Err(Error::Budget(format!(
                    "exact density recursion exceeded {} splits",
                    self.opts.recursion_budget
                )));
            }
            let (&last, rest) = c.split_last().expect("component has >= 2 elements");
            let reduced: Vec<u64> = rest.iter().map(|&a| a / a.gcd(&last)).collect();
            let reduced = primitivize(&FiniteSet::new(reduced)?);
            let without = self.free_density(rest)?;
            let inside = self.free_density(reduced.as_slice())?;
            without - inside / BigRational::from_integer(BigInt::from(last))
        };
        self.memo.insert(c.to_vec(), value.clone());
        Ok(value)
    }
}

/// Checkpoints with their density estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensitySeries {
    pub checkpoints: Vec<u64>,
    pub values: Vec<DensityEstimate>,
}

impl DensitySeries {
    pub fn floats(&self) -> Vec<f64> {
        self.values.iter().map(DensityEstimate::to_f64).collect()
    }

    /// Columns `K, value_num, value_den, value_float, kind, n`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io_err = |e: csv::Error| Error::Internal(format!("csv: {e}"));
        wr.write_record(["K", "value_num", "value_den", "value_float", "kind", "n"]).map_err(io_err)?;
        for (k, v) in self.checkpoints.iter().zip(&self.values) {
            let (num, den) = match &v.value {
                DensityValue::Exact(r) => (r.numer().to_string(), r.denom().to_string()),
                DensityValue::Float(_) => (String::new(), String::new()),
            };
            let n = v.n.map(|n| n.to_string()).unwrap_or_default();
            wr.write_record([
                k.to_string(),
                num,
                den,
                format!("{:?}", v.to_f64()),
                v.kind.as_str().to_string(),
                n,
            ])
            .map_err(io_err)?;
        }
        wr.flush().map_err(|e| Error::Internal(format!("csv: {e}")))?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(r: R) -> Result<DensitySeries> {
        let mut rd = csv::Reader::from_reader(r);
        let mut out = DensitySeries { checkpoints: Vec::new(), values: Vec::new() };
        let perr = |e: &dyn fmt::Display| Error::Parse(e.to_string());
        for rec in rd.records() {
            let rec = rec.map_err(|e| perr(&e))?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let k: u64 = field(0).parse().map_err(|e| perr(&e))?;
            let kind = DensityKind::parse(field(4))?;
            let value = if field(1).is_empty() {
                DensityValue::Float(field(3).parse().map_err(|e| perr(&e))?)
            } else {
                let num: BigInt = field(1).parse().map_err(|e| perr(&e))?;
                let den: BigInt = field(2).parse().map_err(|e| perr(&e))?;
                DensityValue::Exact(BigRational::new(num, den))
            };
            let n = if field(5).is_empty() { None } else { Some(field(5).parse().map_err(|e| perr(&e))?) };
            out.checkpoints.push(k);
            out.values.push(DensityEstimate { value, n, kind, raw: None });
        }
        Ok(out)
    }
}

/// Options for [`davenport_erdos_series`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesOptions {
    pub exact: ExactOptions,
    /// Bound for the natural-partial fallback when no exact route fits.
    pub fallback_n: u64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions { exact: ExactOptions::default(), fallback_n: 10_000_000 }
    }
}

/// d(ℳ_{ℬ∩[1,K]}) for each K. Exact checkpoints must be nondecreasing in K;
/// a violation is reported as an internal error.
pub fn davenport_erdos_series(spec: &FamilySpec, k_grid: &[u64], opts: &SeriesOptions) -> Result<DensitySeries> {
    check_ascending(k_grid)?;
    let mut values = Vec::with_capacity(k_grid.len());
    let mut last_exact: Option<(u64, BigRational)> = None;
    for &k in k_grid {
        let b = spec.materialize(k)?;
        let est = match exact_density(&b, &opts.exact) {
            Ok(r) => {
                if let Some((pk, prev)) = &last_exact {
                    if &r < prev {
                        return Err(Error::Internal(format!(
                            "Davenport-Erdős series decreased between K={pk} and K={k}"
                        )));
                    }
                }
                last_exact = Some((k, r.clone()));
                DensityEstimate::exact_periodic(r)
            }
            Err(e) if e.is_budget() => {
                let n = opts.fallback_n.max(k);
                let count = count_multiples_at(&b, &[n])?[0];
                DensityEstimate {
                    value: DensityValue::Exact(ratio(count, n)),
                    n: Some(n),
                    kind: DensityKind::NaturalPartial,
                    raw: None,
                }
            }
            Err(e) => return Err(e),
        };
        values.push(est);
    }
    Ok(DensitySeries { checkpoints: k_grid.to_vec(), values })
}

fn check_ascending(grid: &[u64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("grid is empty"));
    }
    if grid.contains(&0) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("grid must be strictly increasing positive integers"));
    }
    Ok(())
}

/// Extremes of natural-partial densities over checkpoints, as proxies for
/// the lower and upper densities.
#[derive(Debug, Clone, PartialEq)]
pub struct Proxies {
    pub min: BigRational,
    pub max: BigRational,
    pub argmin: u64,
    pub argmax: u64,
    pub checkpoints: Vec<u64>,
    pub values: Vec<BigRational>,
}

impl Proxies {
    pub fn min_f64(&self) -> f64 {
        ratio_to_f64(&self.min)
    }

    pub fn max_f64(&self) -> f64 {
        ratio_to_f64(&self.max)
    }

    pub fn spread(&self) -> f64 {
        self.max_f64() - self.min_f64()
    }
}

/// Min and max of |ℳ_ℬ ∩ [1, N]| / N over checkpoints `N >= burn_in`.
pub fn upper_lower_proxies(spec: &FamilySpec, checkpoints: &[u64], burn_in: u64) -> Result<Proxies> {
    let mut cps: Vec<u64> = checkpoints.iter().copied().filter(|&c| c >= burn_in.max(1)).collect();
    cps.sort_unstable();
    cps.dedup();
    if cps.len() < 2 {
        return Err(Error::invalid("need at least two checkpoints beyond the burn-in"));
    }
    let b = spec.materialize(*cps.last().unwrap())?;
    let counts = count_multiples_at(&b, &cps)?;
    let values: Vec<BigRational> = cps.iter().zip(&counts).map(|(&n, &c)| ratio(c, n)).collect();
    let (mut imin, mut imax) = (0, 0);
    for i in 1..values.len() {
        if values[i] < values[imin] {
            imin = i;
        }
        if values[i] > values[imax] {
            imax = i;
        }
    }
    Ok(Proxies {
        min: values[imin].clone(),
        max: values[imax].clone(),
        argmin: cps[imin],
        argmax: cps[imax],
        checkpoints: cps,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum IntervalMethod {
    Exact,
    /// Natural partials at N and 2N, doubling from `start` (default 1000 T)
    /// until the relative change is below 1e-3 or N exceeds `max_n`.
    Empirical { start: Option<u64>, max_n: u64 },
}

const STABLE_REL: f64 = 1e-3;

/// d_T = d(ℳ_{(T, 2T]}).
pub fn erdos_interval_density(t: u64, method: IntervalMethod) -> Result<DensityEstimate> {
    if t == 0 {
        return Err(Error::invalid("T must be >= 1"));
    }
    let block = FiniteSet::from_sorted((t + 1..=2 * t).collect());
    match method {
        IntervalMethod::Exact => {
            let p = primitivize(&block);
            let r = if p.len() <= DEFAULT_SUBSET_CAP {
                exact_density_finite(&p)?
            } else {
                exact_density(&p, &ExactOptions::default())?
            };
            Ok(DensityEstimate::exact_periodic(r))
        }
        IntervalMethod::Empirical { start, max_n } => {
            let mut n = start.unwrap_or(t.saturating_mul(1000)).max(2 * t);
            loop {
                let n2 = n.checked_mul(2).ok_or(Error::RangeTooLarge(n))?;
                if n2 > max_n {
                    return Err(Error::Budget(format!(
                        "d_T for T={t} did not stabilize below N={max_n}"
                    )));
                }
                let c = count_multiples_at(&block, &[n, n2])?;
                let (a, b) = (c[0] as f64 / n as f64, c[1] as f64 / n2 as f64);
                if (b - a).abs() <= STABLE_REL * b.abs() {
                    return Ok(DensityEstimate {
                        value: DensityValue::Exact(ratio(c[1], n2)),
                        n: Some(n2),
                        kind: DensityKind::NaturalPartial,
                        raw: None,
                    });
                }
                n = n2;
            }
        }
    }
}
