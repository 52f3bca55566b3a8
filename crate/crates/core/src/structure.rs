//! Finite-scale structural evidence. The asymptotic notions (taut, Behrend,
//! minimal, thin) are never decided here; verdicts say whether a property
//! is certified, evidenced on a truncation, declared, or refuted by a witness.

use std::collections::HashMap;
use std::io;

use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{gcd, lcm_capped, CompensatedSum};
use crate::density::{davenport_erdos_series, ratio_to_f64, SeriesOptions};
use crate::error::{Error, Result};
use crate::family::{FamilySpec, PatternSource, PatternSpec, Thinning};
use crate::primes::primes_up_to;
use crate::set::{is_primitive, FiniteSet};
use crate::sieve::free_window;

/// Values of η = 1_{ℱ_ℬ} on `[-n, n]`, stored for `0..=n` and reflected.
struct Eta {
    bits: Vec<bool>,
}

impl Eta {
    /// `b` is ℬ ∩ [1, n]; `empty` says whether ℬ itself is empty, which
    /// decides η(0).
    fn new(b: &FiniteSet, n: u64, empty: bool) -> Result<Self> {
        let mut bits = Vec::with_capacity(n as usize + 1);
        bits.push(empty);
        if n >= 1 {
            let w = free_window(b, 1, n + 1)?;
            bits.extend((1..=n).map(|k| w.get(k)));
        }
        Ok(Eta { bits })
    }

    fn radius(&self) -> i64 {
        self.bits.len() as i64 - 1
    }

    fn at(&self, n: i64) -> bool {
        self.bits[n.unsigned_abs() as usize]
    }

    /// Is η constant on (n + sℤ) ∩ [-N, N] with at least three hits?
    fn constant_on(&self, n: i64, s: u64) -> bool {
        let r = self.radius();
        let s = s as i64;
        let first = n - (n + r).div_euclid(s) * s;
        if first + 2 * s > r {
            return false;
        }
        let v = self.at(first);
        let mut m = first + s;
        while m <= r {
            if self.at(m) != v {
                return false;
            }
            m += s;
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToeplitzReport {
    /// Radius N of the inspection window [-N, N].
    pub window: u64,
    pub s_max: u64,
    /// Position and the smallest period s ≤ s_max on which η is constant.
    pub resolved: Vec<(i64, u64)>,
    pub defects: Vec<i64>,
    pub note: &'static str,
}

const TOEPLITZ_NOTE: &str =
    "necessary-condition evidence on a finite window; not a proof that eta is Toeplitz";

/// Periods that held on a smaller window but fail on a larger one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Recheck {
    pub window: u64,
    pub consistent: Vec<(i64, u64)>,
    pub contradicted: Vec<(i64, u64)>,
}

impl ToeplitzReport {
    /// Rows `n, s_n` with `defect` in place of a period.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::Internal(format!("csv: {e}"));
        wr.write_record(["n", "s_n"]).map_err(err)?;
        let mut rows: Vec<(i64, String)> = self.resolved.iter().map(|&(n, s)| (n, s.to_string())).collect();
        rows.extend(self.defects.iter().map(|&n| (n, "defect".to_string())));
        rows.sort_by_key(|r| r.0);
        for (n, s) in rows {
            wr.write_record([n.to_string(), s]).map_err(err)?;
        }
        wr.flush().map_err(|e| Error::Internal(format!("csv: {e}")))
    }

    /// Re-tests every resolved period on the larger window `[-n, n]`.
    pub fn recheck(&self, spec: &FamilySpec, n: u64) -> Result<Recheck> {
        if n < self.window {
            return Err(Error::invalid("recheck window must not be smaller"));
        }
        let eta = Eta::new(&spec.materialize(n)?, n, spec.is_empty()?)?;
        let (consistent, contradicted) = self.resolved.iter().partition(|&&(p, s)| eta.constant_on(p, s));
        Ok(Recheck { window: n, consistent, contradicted })
    }
}

/// For each n in `[n_lo, n_hi)`, the smallest s ≤ s_max with η constant on
/// (n + sℤ) ∩ [-N, N].
pub fn toeplitz_scan(spec: &FamilySpec, n_lo: i64, n_hi: i64, s_max: u64, window: u64) -> Result<ToeplitzReport> {
    if s_max == 0 || window < s_max.saturating_mul(4) {
        return Err(Error::invalid(format!(
            "window radius {window} must be at least 4 * s_max = {}",
            s_max.saturating_mul(4)
        )));
    }
    if n_lo >= n_hi || n_lo.unsigned_abs() > window || (n_hi - 1).unsigned_abs() > window {
        return Err(Error::invalid("positions must form a nonempty range inside [-N, N]"));
    }
    let eta = Eta::new(&spec.materialize(window)?, window, spec.is_empty()?)?;
    let found: Vec<(i64, Option<u64>)> = (n_lo..n_hi)
        .into_par_iter()
        .map(|n| (n, (1..=s_max).find(|&s| eta.constant_on(n, s))))
        .collect();
    let mut resolved = Vec::new();
    let mut defects = Vec::new();
    for (n, s) in found {
        match s {
            Some(s) => resolved.push((n, s)),
            None => defects.push(n),
        }
    }
    Ok(ToeplitzReport { window, s_max, resolved, defects, note: TOEPLITZ_NOTE })
}

/// Bits of ℳ over `[0, len)`; 0 ∈ ℳ for nonempty sets.
fn multiples_prefix(spec: &FamilySpec, len: u64) -> Result<Vec<bool>> {
    let n = len.saturating_sub(1);
    let eta = Eta::new(&spec.materialize(n)?, n, spec.is_empty()?)?;
    Ok(eta.bits.iter().map(|&f| !f).collect())
}

/// Smallest k ≤ radius with ℳ_{star} ∩ [0, n] = (ℳ_{host} ∩ [k, k+n]) − k.
pub fn pattern_occurs(star: &FamilySpec, host: &FamilySpec, n: u64, radius: u64) -> Result<Option<u64>> {
    if radius < n {
        return Err(Error::invalid("search radius must be >= n"));
    }
    let pat = multiples_prefix(star, n + 1)?;
    let hay = multiples_prefix(host, radius + n + 1)?;
    Ok((0..=radius as usize)
        .find(|&k| hay[k..k + pat.len()] == pat[..])
        .map(|k| k as u64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Thin,
    BehrendEvidence,
    TautViolationEvidence,
    PairwiseCoprime,
    Primitive,
    Infinite,
    Minimal,
    Taut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Exact mathematical certificate.
    Certified,
    /// Holds on every computed truncation.
    HoldsOnTruncation,
    /// Trusted declaration, not checked.
    Declared,
    /// Computation gave no supporting evidence.
    NoEvidence,
    /// Partial data cannot certify the property either way.
    NoFiniteCertificate,
    /// Refuted; the witness shows why.
    Fails,
    /// A witness of the property was found.
    WitnessFound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    DivisibilityPair { a: u64, b: u64 },
    CommonFactor { a: u64, b: u64, gcd: u64 },
    MissingElement { element: u64 },
    Density { k: u64, num: String, den: String, value: f64 },
    TailBound { partial_sum: f64, bound: f64 },
}

impl Witness {
    fn density(k: u64, r: &BigRational) -> Self {
        Witness::Density { k, num: r.numer().to_string(), den: r.denom().to_string(), value: ratio_to_f64(r) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureVerdict {
    pub property: Property,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub parameters: serde_json::Value,
    pub note: String,
}

impl StructureVerdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdicts always serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    /// Use analytic tail bounds where the spec admits one.
    #[default]
    Certified,
    PartialOnly,
}

/// Σ_{n ≥ c} n^{-k} ≤ 1/((k−1)(c−1)^{k−1}) for k ≥ 2, c ≥ 2.
fn power_tail(c: u64, k: u32) -> f64 {
    1.0 / ((k - 1) as f64 * ((c - 1) as f64).powi(k as i32 - 1))
}

fn pattern_floor(p: &PatternSpec) -> u64 {
    match &p.source {
        PatternSource::Primes { cutoff } => (*cutoff).max(2),
        PatternSource::ProgressionPrimes { level, cutoff } => (*cutoff).max((1u64 << level) + 1),
        PatternSource::Explicit { elems } => elems.min().unwrap_or(1),
    }
}

/// Upper bound on Σ_{a∈𝒜} 1/(e·a) when one can be certified.
fn pattern_reciprocal_bound(e: u64, p: &PatternSpec) -> Option<f64> {
    if let PatternSource::Explicit { elems } = &p.source {
        let s: CompensatedSum = p
            .materialize(elems.max().unwrap_or(0).checked_pow(p.power)?)
            .ok()?
            .into_iter()
            .map(|a| 1.0 / (e as f64 * a as f64))
            .collect();
        return Some(s.value());
    }
    let c = pattern_floor(p);
    let k = p.power;
    match p.thinning {
        Thinning::Geometric { ratio } => {
            let g = ratio.powi(k as i32);
            Some(g / ((g - 1.0) * e as f64 * (c as f64).powi(k as i32)))
        }
        _ if k >= 2 && c >= 2 => Some(power_tail(c, k) / e as f64),
        _ => None,
    }
}

fn reciprocal_bound(spec: &FamilySpec) -> Option<f64> {
    match spec {
        FamilySpec::Explicit { elems } => Some(elems.iter().map(|b| 1.0 / b as f64).collect::<CompensatedSum>().value()),
        FamilySpec::IntervalUnion { levels } => Some(
            levels
                .iter()
                .map(|&t| (t + 1..=2 * t).map(|b| 1.0 / b as f64).sum::<f64>())
                .sum(),
        ),
        FamilySpec::ThinBlocks { schedule } => Some(schedule.iter().map(|b| b.len as f64 / b.t as f64).sum()),
        FamilySpec::Loosening { scales, patterns } => scales
            .iter()
            .zip(patterns)
            .map(|(&e, p)| pattern_reciprocal_bound(e, p))
            .sum(),
        FamilySpec::ScaledProgressionPrimes { .. } => None,
        FamilySpec::Union { parts } => parts.iter().map(reciprocal_bound).sum(),
        FamilySpec::OddRestriction { inner } => reciprocal_bound(inner),
    }
}

/// Σ_{b∈ℬ, b≤K} 1/b with, where the spec admits one, a certified bound on the
/// full series.
pub fn thin_check(spec: &FamilySpec, k: u64, mode: TailMode) -> Result<StructureVerdict> {
    if k == 0 {
        return Err(Error::invalid("K must be >= 1"));
    }
    let partial: CompensatedSum = spec.materialize(k)?.iter().map(|b| 1.0 / b as f64).collect();
    let partial = partial.value();
    let params = serde_json::json!({ "K": k, "tail_mode": mode });
    let bound = match mode {
        TailMode::Certified => reciprocal_bound(spec),
        TailMode::PartialOnly => None,
    };
    Ok(match bound {
        Some(bound) => StructureVerdict {
            property: Property::Thin,
            verdict: Verdict::Certified,
            witness: Some(Witness::TailBound { partial_sum: partial, bound }),
            parameters: params,
            note: "sum of reciprocals bounded analytically".into(),
        },
        None => StructureVerdict {
            property: Property::Thin,
            verdict: Verdict::NoFiniteCertificate,
            witness: Some(Witness::TailBound { partial_sum: partial, bound: f64::INFINITY }),
            parameters: params,
            note: "partial sums cannot certify convergence".into(),
        },
    })
}

/// Runs the Davenport-Erdős series; evidence iff the last exact checkpoint
/// is at least 1 − tol.
pub fn behrend_evidence(spec: &FamilySpec, k_grid: &[u64], tol: f64) -> Result<StructureVerdict> {
    behrend_evidence_with(spec, k_grid, tol, &SeriesOptions::default())
}

pub fn behrend_evidence_with(
    spec: &FamilySpec,
    k_grid: &[u64],
    tol: f64,
    opts: &SeriesOptions,
) -> Result<StructureVerdict> {
    let kmax = *k_grid.last().ok_or_else(|| Error::invalid("grid is empty"))?;
    if spec.materialize(kmax)?.contains(1) {
        return Err(Error::ContainsOne);
    }
    let series = davenport_erdos_series(spec, k_grid, opts)?;
    let params = serde_json::json!({
        "K_grid": k_grid,
        "tol": tol,
        "checkpoints": series.floats(),
    });
    let last = series
        .checkpoints
        .iter()
        .zip(&series.values)
        .rev()
        .find(|(_, v)| v.is_exact_periodic());
    let Some((&k, v)) = last else {
        return Ok(StructureVerdict {
            property: Property::BehrendEvidence,
            verdict: Verdict::NoEvidence,
            witness: None,
            parameters: params,
            note: "no checkpoint could be computed exactly".into(),
        });
    };
    let r = v.exact().expect("exact checkpoint");
    let holds = ratio_to_f64(r) >= 1.0 - tol;
    Ok(StructureVerdict {
        property: Property::BehrendEvidence,
        verdict: if holds { Verdict::HoldsOnTruncation } else { Verdict::NoEvidence },
        witness: Some(Witness::density(k, r)),
        parameters: params,
        note: if holds {
            "truncated density within tolerance of 1".into()
        } else {
            "truncated density below 1 - tol".into()
        },
    })
}

/// Evidence that ℬ is not taut: c·𝒜 ⊆ ℬ on truncations with 𝒜 Behrend-evidenced.
pub fn taut_violation_evidence(
    spec: &FamilySpec,
    c: u64,
    witness_spec: &FamilySpec,
    k_grid: &[u64],
    tol: f64,
) -> Result<StructureVerdict> {
    if c == 0 {
        return Err(Error::invalid("c must be >= 1"));
    }
    let k = *k_grid.last().ok_or_else(|| Error::invalid("grid is empty"))?;
    let ck = c.checked_mul(k).ok_or(Error::RangeTooLarge(k))?;
    let host = spec.materialize(ck)?;
    let params = serde_json::json!({ "c": c, "K_grid": k_grid, "tol": tol });
    if let Some(a) = witness_spec.materialize(k)?.iter().find(|&a| !host.contains(c * a)) {
        return Ok(StructureVerdict {
            property: Property::TautViolationEvidence,
            verdict: Verdict::Fails,
            witness: Some(Witness::MissingElement { element: c * a }),
            parameters: params,
            note: format!("{} is not in the set", c * a),
        });
    }
    let b = behrend_evidence(witness_spec, k_grid, tol)?;
    let found = b.verdict == Verdict::HoldsOnTruncation;
    Ok(StructureVerdict {
        property: Property::TautViolationEvidence,
        verdict: if found { Verdict::WitnessFound } else { Verdict::NoEvidence },
        witness: b.witness,
        parameters: params,
        note: if found {
            format!("c*A is contained in the set up to {ck} and A shows Behrend evidence")
        } else {
            "inclusion holds but the witness set shows no Behrend evidence".into()
        },
    })
}

/// First pair (i < j, ordered by j) sharing a prime factor.
pub fn first_common_factor(b: &FiniteSet) -> Option<(u64, u64, u64)> {
    let root = (b.max().unwrap_or(1) as f64).sqrt() as u64 + 1;
    let small = primes_up_to(root);
    let mut owner: HashMap<u64, u64> = HashMap::new();
    for x in b.iter() {
        let mut n = x;
        let mut factors = Vec::new();
        for &p in &small {
            if p * p > n {
                break;
            }
            if n % p == 0 {
                factors.push(p);
                while n % p == 0 {
                    n /= p;
                }
            }
        }
        if n > 1 {
            factors.push(n);
        }
        if let Some(a) = factors.iter().filter_map(|p| owner.get(p)).min() {
            return Some((*a, x, gcd(*a, x)));
        }
        for p in factors {
            owner.insert(p, x);
        }
    }
    None
}

pub fn check_pairwise_coprime(spec: &FamilySpec, k: u64) -> Result<StructureVerdict> {
    let b = spec.materialize(k)?;
    let params = serde_json::json!({ "K": k, "size": b.len() });
    Ok(match first_common_factor(&b) {
        None => StructureVerdict {
            property: Property::PairwiseCoprime,
            verdict: Verdict::HoldsOnTruncation,
            witness: None,
            parameters: params,
            note: "exact gcd scan of the truncation".into(),
        },
        Some((a, b, g)) => StructureVerdict {
            property: Property::PairwiseCoprime,
            verdict: Verdict::Fails,
            witness: Some(Witness::CommonFactor { a, b, gcd: g }),
            parameters: params,
            note: format!("gcd({a}, {b}) = {g}"),
        },
    })
}

/// One hypothesis of a structured result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateItem {
    pub hypothesis: Property,
    /// Index of the pattern the item refers to, if any.
    pub pattern: Option<usize>,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub items: Vec<CertificateItem>,
}

/// Grid and tolerance for per-pattern evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceOptions {
    pub k_grid: Vec<u64>,
    pub tol: f64,
    /// Truncation bound for coprimality scans.
    pub k_coprime: u64,
}

impl Default for EvidenceOptions {
    fn default() -> Self {
        EvidenceOptions { k_grid: vec![100, 1000, 10_000], tol: 0.3, k_coprime: 100_000 }
    }
}

fn loosening_parts(spec: &FamilySpec) -> Result<(&[u64], &[PatternSpec])> {
    spec.validate()?;
    match spec {
        FamilySpec::Loosening { scales, patterns } => Ok((scales, patterns)),
        _ => Err(Error::InvalidSpec("structured results need a loosening family".into())),
    }
}

fn primitive_scales(scales: &[u64]) -> Result<(FiniteSet, CertificateItem)> {
    let e = FiniteSet::new(scales.to_vec())?;
    let v = is_primitive(&e);
    if let Some((a, b)) = v.witness {
        return Err(Error::NotPrimitive { a, b });
    }
    Ok((
        e,
        CertificateItem {
            hypothesis: Property::Primitive,
            pattern: None,
            verdict: Verdict::Certified,
            witness: None,
            detail: "scale set checked exactly".into(),
        },
    ))
}

/// ℬ′ = ℰ for ℬ = ⋃ e_i 𝒜_i with ℰ taut and every 𝒜_i Behrend. Returns ℰ
/// with a certificate saying how each hypothesis is supported.
pub fn structured_tautification(spec: &FamilySpec, opts: &EvidenceOptions) -> Result<(FamilySpec, Certificate)> {
    let (scales, patterns) = loosening_parts(spec)?;
    let (e, prim) = primitive_scales(scales)?;
    let mut items = vec![
        prim,
        CertificateItem {
            hypothesis: Property::Taut,
            pattern: None,
            verdict: Verdict::Certified,
            witness: None,
            detail: "a finite primitive set is taut".into(),
        },
    ];
    for (i, p) in patterns.iter().enumerate() {
        let item = if p.declared_behrend {
            CertificateItem {
                hypothesis: Property::BehrendEvidence,
                pattern: Some(i),
                verdict: Verdict::Declared,
                witness: None,
                detail: "declared by the caller".into(),
            }
        } else {
            let single = FamilySpec::Loosening { scales: vec![1], patterns: vec![p.clone()] };
            let v = behrend_evidence(&single, &opts.k_grid, opts.tol)?;
            CertificateItem {
                hypothesis: Property::BehrendEvidence,
                pattern: Some(i),
                verdict: v.verdict,
                witness: v.witness,
                detail: v.note,
            }
        };
        items.push(item);
    }
    Ok((FamilySpec::Explicit { elems: e }, Certificate { items }))
}

/// ℬ* = ℰ for ℬ = ⋃ e_i 𝒜_i with ℰ minimal and every 𝒜_i infinite and
/// pairwise coprime.
pub fn structured_minimisation(spec: &FamilySpec, opts: &EvidenceOptions) -> Result<(FamilySpec, Certificate)> {
    let (scales, patterns) = loosening_parts(spec)?;
    let mut items = Vec::new();
    for (i, p) in patterns.iter().enumerate() {
        let a = FiniteSet::new(p.materialize(opts.k_coprime)?)?;
        if let Some((x, y, g)) = first_common_factor(&a) {
            return Err(Error::NotCoprime { a: x, b: y, gcd: g });
        }
        items.push(CertificateItem {
            hypothesis: Property::PairwiseCoprime,
            pattern: Some(i),
            verdict: Verdict::HoldsOnTruncation,
            witness: None,
            detail: format!("exact gcd scan up to {}", opts.k_coprime),
        });
        items.push(if p.is_finite() {
            CertificateItem {
                hypothesis: Property::Infinite,
                pattern: Some(i),
                verdict: Verdict::Fails,
                witness: None,
                detail: "explicit pattern is finite".into(),
            }
        } else {
            CertificateItem {
                hypothesis: Property::Infinite,
                pattern: Some(i),
                verdict: Verdict::Certified,
                witness: None,
                detail: "prime source with infinitely many members; thinning keeps infinitely many".into(),
            }
        });
    }
    let (e, prim) = primitive_scales(scales)?;
    items.insert(0, prim);
    let mut minimal = CertificateItem {
        hypothesis: Property::Minimal,
        pattern: None,
        verdict: Verdict::Certified,
        witness: None,
        detail: "a finite primitive set has a periodic, hence Toeplitz, eta".into(),
    };
    if let Some(l) = lcm_capped(e.as_slice(), 10_000).value() {
        let spec_e = FamilySpec::Explicit { elems: e.clone() };
        let scan = toeplitz_scan(&spec_e, 0, l.min(64) as i64, l, 4 * l)?;
        minimal.detail.push_str(&format!(
            "; toeplitz scan of {} positions: {} resolved, {} defects",
            scan.resolved.len() + scan.defects.len(),
            scan.resolved.len(),
            scan.defects.len()
        ));
    }
    items.insert(1, minimal);
    Ok((FamilySpec::Explicit { elems: e }, Certificate { items }))
}

/// Exact d(ℳ_{ℬ∩[1,K]}) when an exact route fits, else `None`.
pub fn behrend_value(spec: &FamilySpec, k: u64) -> Result<Option<BigRational>> {
    let s = davenport_erdos_series(spec, &[k], &SeriesOptions::default())?;
    Ok(s.values[0].exact().cloned().filter(|_| s.values[0].is_exact_periodic()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::ratio;
    use crate::family::Block;

    fn ex(v: &[u64]) -> FamilySpec {
        FamilySpec::explicit(v).unwrap()
    }

    #[test]
    fn toeplitz_examples() {
        let r = toeplitz_scan(&ex(&[2]), 0, 5, 4, 100).unwrap();
        assert!(r.defects.is_empty());
        assert!(r.resolved.iter().all(|&(_, s)| s == 2));
        let r = toeplitz_scan(&ex(&[2, 3]), 0, 11, 12, 200).unwrap();
        assert_eq!(r.resolved.len(), 11);
        assert!(r.resolved.iter().all(|&(_, s)| 6 % s == 0));
        let r = toeplitz_scan(&ex(&[]), 0, 5, 1, 10).unwrap();
        assert!(r.resolved.iter().all(|&(_, s)| s == 1));
        assert!(toeplitz_scan(&ex(&[2]), 0, 5, 30, 100).is_err());
        let r = toeplitz_scan(&ex(&[2, 3]), -5, 0, 12, 200).unwrap();
        assert_eq!(r.resolved.len(), 5);
    }

    #[test]
    fn toeplitz_defects_and_recheck() {
        // η of the interval family is not periodic with small periods near the block.
        let s = FamilySpec::IntervalUnion { levels: vec![50] };
        let r = toeplitz_scan(&s, 0, 20, 3, 400).unwrap();
        assert!(!r.defects.is_empty());
        let c = r.recheck(&s, 4000).unwrap();
        assert_eq!(c.consistent.len() + c.contradicted.len(), r.resolved.len());
        // Rechecking a periodic set finds nothing to flag.
        let p = toeplitz_scan(&ex(&[4, 6]), 0, 12, 12, 100).unwrap();
        assert!(p.recheck(&ex(&[4, 6]), 5000).unwrap().contradicted.is_empty());
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("defect"));
    }

    #[test]
    fn recheck_flags_contradictions() {
        // {97} on radius 96: every odd position is free, so position 1 looks
        // 2-periodic until the window reaches 97.
        let s = ex(&[97]);
        let r = toeplitz_scan(&s, 1, 2, 20, 96).unwrap();
        assert_eq!(r.resolved, vec![(1, 2)]);
        let c = r.recheck(&s, 1000).unwrap();
        assert_eq!(c.contradicted, vec![(1, 2)]);
    }

    #[test]
    fn pattern_examples() {
        assert_eq!(pattern_occurs(&ex(&[2]), &ex(&[2]), 5, 5).unwrap(), Some(0));
        let host = FamilySpec::IntervalUnion { levels: vec![40] };
        let k = pattern_occurs(&ex(&[1]), &host, 39, 200).unwrap().unwrap();
        assert!(k > 40 && k + 39 <= 80);
        assert_eq!(pattern_occurs(&ex(&[2, 3]), &ex(&[2]), 3, 1000).unwrap(), None);
        assert!(pattern_occurs(&ex(&[2]), &ex(&[2]), 5, 4).is_err());
    }

    #[test]
    fn thin_examples() {
        let tb = FamilySpec::ThinBlocks {
            schedule: vec![Block { t: 10, len: 4 }, Block { t: 200, len: 100 }],
        };
        let v = thin_check(&tb, 1000, TailMode::Certified).unwrap();
        assert_eq!(v.verdict, Verdict::Certified);
        let Some(Witness::TailBound { bound, partial_sum }) = v.witness else { panic!() };
        assert!((bound - 0.9).abs() < 1e-12 && partial_sum <= bound);
        let pow2: Vec<u64> = (0..=20).map(|k| 1u64 << k).skip(1).collect();
        let v = thin_check(&ex(&pow2), 1 << 20, TailMode::Certified).unwrap();
        assert_eq!(v.verdict, Verdict::Certified);
        let v = thin_check(&FamilySpec::primes(), 10_000, TailMode::Certified).unwrap();
        assert_eq!(v.verdict, Verdict::NoFiniteCertificate);
        let v = thin_check(&FamilySpec::prime_powers(2), 10_000, TailMode::Certified).unwrap();
        assert_eq!(v.verdict, Verdict::Certified);
        let geo = FamilySpec::Loosening {
            scales: vec![3],
            patterns: vec![PatternSpec::progression(1, 7).with_thinning(Thinning::Geometric { ratio: 2.0 })],
        };
        let v = thin_check(&geo, 1_000_000, TailMode::Certified).unwrap();
        let Some(Witness::TailBound { bound, partial_sum }) = v.witness else { panic!() };
        assert!(partial_sum <= bound && bound <= 2.0 / 21.0 + 1e-12);
    }

    #[test]
    fn behrend_examples() {
        let p3 = FamilySpec::ScaledProgressionPrimes { scale: 1, level: 1, cutoff: 1, stride: 1 };
        let v = behrend_evidence(&p3, &[100, 1000, 10_000], 0.3).unwrap();
        assert_eq!(v.verdict, Verdict::HoldsOnTruncation);
        let Some(Witness::Density { value, .. }) = v.witness else { panic!() };
        let oracle = 1.0
            - crate::primes::primes_up_to(10_000)
                .into_iter()
                .filter(|p| p % 4 == 3)
                .map(|p| 1.0 - 1.0 / p as f64)
                .product::<f64>();
        assert!((value - oracle).abs() < 1e-12);
        assert!((value - 0.71367).abs() < 1e-4);
        let v = behrend_evidence(&ex(&[2]), &[10, 100], 0.2).unwrap();
        assert_eq!(v.verdict, Verdict::NoEvidence);
        let v = behrend_evidence(&FamilySpec::prime_powers(2), &[100, 10_000], 0.2).unwrap();
        assert_eq!(v.verdict, Verdict::NoEvidence);
        let Some(Witness::Density { value, .. }) = v.witness else { panic!() };
        assert!((value - (1.0 - 6.0 / std::f64::consts::PI.powi(2))).abs() < 2e-3);
        assert_eq!(behrend_evidence(&ex(&[1, 2]), &[10], 0.1), Err(Error::ContainsOne));
    }

    #[test]
    fn taut_violation_examples() {
        let spec = FamilySpec::union(vec![
            FamilySpec::Loosening { scales: vec![2], patterns: vec![PatternSpec::new(PatternSource::Primes { cutoff: 2 })] },
            ex(&[9]),
        ]);
        let v = taut_violation_evidence(&spec, 2, &FamilySpec::primes(), &[1000, 10_000], 0.1).unwrap();
        assert_eq!(v.verdict, Verdict::WitnessFound);
        let v = taut_violation_evidence(&ex(&[2, 3]), 1, &FamilySpec::primes(), &[100], 0.1).unwrap();
        assert_eq!(v.verdict, Verdict::Fails);
        assert_eq!(v.witness, Some(Witness::MissingElement { element: 5 }));
    }

    #[test]
    fn coprime_examples() {
        let v = check_pairwise_coprime(&FamilySpec::primes(), 100).unwrap();
        assert_eq!(v.verdict, Verdict::HoldsOnTruncation);
        let v = check_pairwise_coprime(&ex(&[4, 6]), 100).unwrap();
        assert_eq!(v.witness, Some(Witness::CommonFactor { a: 4, b: 6, gcd: 2 }));
        let merged = FamilySpec::union(
            (1..=5)
                .map(|i| FamilySpec::ScaledProgressionPrimes { scale: 1, level: i, cutoff: 1, stride: 1 })
                .collect(),
        );
        assert_eq!(check_pairwise_coprime(&merged, 1000).unwrap().verdict, Verdict::HoldsOnTruncation);
        // Brute-force agreement on the first offending pair.
        let set = FiniteSet::new(vec![5, 7, 11, 35, 13, 22]).unwrap();
        let mut brute = None;
        'outer: for (j, &y) in set.as_slice().iter().enumerate() {
            for &x in &set.as_slice()[..j] {
                if gcd(x, y) > 1 {
                    brute = Some((x, y, gcd(x, y)));
                    break 'outer;
                }
            }
        }
        assert_eq!(first_common_factor(&set), brute);
    }

    fn loosening(scales: &[u64], patterns: Vec<PatternSpec>) -> FamilySpec {
        FamilySpec::Loosening { scales: scales.to_vec(), patterns }
    }

    #[test]
    fn tautification_examples() {
        let opts = EvidenceOptions::default();
        let spec = loosening(
            &[2, 3],
            vec![
                PatternSpec::progression(1, 5).declared_behrend(true),
                PatternSpec::progression(2, 7).declared_behrend(true),
            ],
        );
        let (e, cert) = structured_tautification(&spec, &opts).unwrap();
        assert_eq!(e, ex(&[2, 3]));
        assert_eq!(cert.items[0].verdict, Verdict::Certified);
        assert!(cert.items[2..].iter().all(|i| i.verdict == Verdict::Declared));
        let (e, cert) = structured_tautification(&loosening(&[2], vec![PatternSpec::progression(1, 3)]), &opts).unwrap();
        assert_eq!(e, ex(&[2]));
        assert_eq!(cert.items[2].verdict, Verdict::HoldsOnTruncation);
        let bad = loosening(&[2, 4], vec![PatternSpec::progression(1, 5), PatternSpec::progression(2, 7)]);
        assert_eq!(structured_tautification(&bad, &opts), Err(Error::NotPrimitive { a: 2, b: 4 }));
    }

    #[test]
    fn minimisation_examples() {
        let opts = EvidenceOptions { k_coprime: 10_000, ..EvidenceOptions::default() };
        let thin = |lvl| PatternSpec::progression(lvl, 11).with_thinning(Thinning::Stride { m: 3 });
        let (e, cert) = structured_minimisation(&loosening(&[2, 3], vec![thin(1), thin(2)]), &opts).unwrap();
        assert_eq!(e, ex(&[2, 3]));
        assert!(cert.items.iter().all(|i| i.verdict != Verdict::Fails));
        assert!(cert.items[1].detail.contains("6 resolved, 0 defects"));
        let (e, _) = structured_minimisation(&loosening(&[2], vec![thin(1)]), &opts).unwrap();
        assert_eq!(e, ex(&[2]));
        let bad = PatternSpec::new(PatternSource::Explicit { elems: FiniteSet::new(vec![9, 15]).unwrap() });
        assert_eq!(
            structured_minimisation(&loosening(&[2], vec![bad]), &opts),
            Err(Error::NotCoprime { a: 9, b: 15, gcd: 3 })
        );
    }

    #[test]
    fn verdict_json_carries_witness() {
        let v = check_pairwise_coprime(&ex(&[4, 6]), 10).unwrap();
        let j: serde_json::Value = serde_json::from_str(&v.to_json()).unwrap();
        assert_eq!(j["witness"]["kind"], "common_factor");
        assert_eq!(j["verdict"], "fails");
        assert_eq!(behrend_value(&ex(&[2, 3]), 10).unwrap(), Some(ratio(2, 3)));
    }
}
