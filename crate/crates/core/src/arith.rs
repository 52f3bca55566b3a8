//! Integer helpers shared across modules: overflow-aware lcm, totients,
//! exact power boundaries and compensated summation.

use num_bigint::BigUint;
use num_integer::Integer;
use serde::{Deserialize, Serialize};

pub use num_integer::gcd;

/// Outcome of [`lcm_capped`]: overflow is a value, never a silent wrap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CappedLcm {
    Value(u64),
    Overflow,
}

impl CappedLcm {
    pub fn value(self) -> Option<u64> {
        match self {
            CappedLcm::Value(v) => Some(v),
            CappedLcm::Overflow => None,
        }
    }
}

/// lcm of `elems` if it does not exceed `cap`. The lcm of an empty slice is 1.
pub fn lcm_capped(elems: &[u64], cap: u64) -> CappedLcm {
    let mut acc: u64 = 1;
    for &e in elems {
        if e == 0 {
            return CappedLcm::Overflow;
        }
        let g = acc.gcd(&e);
        let next = (acc / g) as u128 * e as u128;
        if next > cap as u128 {
            return CappedLcm::Overflow;
        }
        acc = next as u64;
    }
    if acc > cap {
        CappedLcm::Overflow
    } else {
        CappedLcm::Value(acc)
    }
}

/// Exact lcm as a big integer.
pub fn lcm_big(elems: &[u64]) -> BigUint {
    let mut acc = BigUint::from(1u32);
    for &e in elems {
        let e = BigUint::from(e);
        acc = acc.lcm(&e);
    }
    acc
}

/// Euler's totient by trial division.
pub fn totient(mut n: u64) -> u64 {
    if n == 0 {
        return 0;
    }
    let mut result = n;
    let mut p = 2u64;
    while p.saturating_mul(p) <= n {
        if n % p == 0 {
            while n % p == 0 {
                n /= p;
            }
            result -= result / p;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

/// Neumaier-compensated running sum. Addition order is the caller's, so the
/// result is reproducible for a fixed order.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Small-denominator rational `num/den` whose f64 value is exactly `x`.
fn exact_fraction(x: f64) -> Option<(u32, u32)> {
    for den in 1u32..=4096 {
        let num = (x * den as f64).round();
        if num < 0.0 {
            return None;
        }
        if num / den as f64 == x {
            return Some((num as u32, den));
        }
    }
    None
}

/// Decides `m > x^(1-eps)`. Far from the boundary the comparison is done in
/// logarithms; near it, when `eps = p/q` exactly, by comparing `m^q` with
/// `x^(q-p)` in big integers. Boundary membership is therefore deterministic.
pub fn exceeds_power(m: u64, x: u64, eps: f64) -> bool {
    if m == 0 {
        return false;
    }
    let lhs = (m as f64).ln();
    let rhs = (1.0 - eps) * (x as f64).ln();
    let tol = 1e-9 * rhs.abs().max(1.0);
    if lhs > rhs + tol {
        return true;
    }
    if lhs < rhs - tol {
        return false;
    }
    match exact_fraction(eps) {
        Some((p, q)) if p <= q => {
            let left = BigUint::from(m).pow(q);
            let right = BigUint::from(x).pow(q - p);
            left > right
        }
        _ => lhs > rhs,
    }
}

/// Smallest integer `m >= 1` with `m > x^(1-eps)`, for `0 < eps < 1`.
pub fn power_threshold(x: u64, eps: f64) -> u64 {
    let est = (x as f64).powf(1.0 - eps).floor();
    let start = if est > 2.0 { est as u64 - 2 } else { 1 };
    let mut m = start.max(1);
    // The estimate is within a couple of units of the boundary.
    while !exceeds_power(m, x, eps) {
        m += 1;
    }
    while m > 1 && exceeds_power(m - 1, x, eps) {
        m -= 1;
    }
    m
}
