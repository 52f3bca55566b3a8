//! Prime generation: segmented sieve, deterministic 64-bit Miller-Rabin and
//! the progressions 𝒫_i = primes ≡ 2^i + 1 (mod 2^{i+1}).

use crate::error::{Error, Result};
use crate::set::FiniteSet;

const SEGMENT: u64 = 1 << 18;

fn small_primes(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r.saturating_mul(r) > n {
        r -= 1;
    }
    while (r + 1).saturating_mul(r + 1) <= n {
        r += 1;
    }
    r
}

/// All primes in `[lo, hi]`, ascending.
pub fn primes_in_range(lo: u64, hi: u64) -> Vec<u64> {
    let lo = lo.max(2);
    if hi < lo {
        return Vec::new();
    }
    let base = small_primes(isqrt(hi));
    let mut out = Vec::new();
    let mut seg_lo = lo;
    let mut composite = vec![false; SEGMENT as usize];
    loop {
        let seg_hi = hi.min(seg_lo.saturating_add(SEGMENT - 1));
        let len = (seg_hi - seg_lo + 1) as usize;
        composite[..len].iter_mut().for_each(|c| *c = false);
        for &p in &base {
            if p * p > seg_hi {
                break;
            }
            let first = (p * p).max(seg_lo.div_ceil(p) * p);
            let mut m = first;
            while m <= seg_hi {
                composite[(m - seg_lo) as usize] = true;
                m += p;
            }
        }
        out.extend(
            (0..len)
                .filter(|&j| !composite[j])
                .map(|j| seg_lo + j as u64),
        );
        if seg_hi == hi {
            break;
        }
        seg_lo = seg_hi + 1;
    }
    out
}

pub fn primes_up_to(limit: u64) -> Vec<u64> {
    primes_in_range(2, limit)
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

/// Deterministic for all 64-bit inputs (first twelve prime bases).
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Modulus and residue `(2^{i+1}, 2^i + 1)` of level `i`.
pub fn progression(level: u32) -> Result<(u64, u64)> {
    if level == 0 || level >= 63 {
        return Err(Error::LevelOverflow(level));
    }
    Ok((1u64 << (level + 1), (1u64 << level) + 1))
}

/// Primes `p` in `[lo, hi]` with `p ≡ 2^i + 1 (mod 2^{i+1})`, ascending.
pub fn progression_primes_in_range(level: u32, lo: u64, hi: u64) -> Result<Vec<u64>> {
    let (modulus, residue) = progression(level)?;
    if hi < lo || hi < residue {
        return Ok(Vec::new());
    }
    if modulus >= 64 {
        // Sparse progression: walk it with a primality test.
        let lo = lo.max(residue);
        let first = residue + (lo - residue).div_ceil(modulus) * modulus;
        let mut out = Vec::new();
        let mut n = first;
        while n <= hi {
            if is_prime(n) {
                out.push(n);
            }
            match n.checked_add(modulus) {
                Some(next) => n = next,
                None => break,
            }
        }
        return Ok(out);
    }
    Ok(primes_in_range(lo, hi)
        .into_iter()
        .filter(|p| p % modulus == residue)
        .collect())
}

/// 𝒫_i ∩ [1, limit].
pub fn primes_in_progression(level: u32, limit: u64) -> Result<FiniteSet> {
    Ok(FiniteSet::from_sorted(progression_primes_in_range(level, 1, limit)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trial_division(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
    }

    #[test]
    fn progression_examples() {
        let p = |i, n| primes_in_progression(i, n).unwrap().into_vec();
        assert_eq!(p(1, 30), vec![3, 7, 11, 19, 23]);
        assert_eq!(p(2, 40), vec![5, 13, 29, 37]);
        assert_eq!(p(1, 2), Vec::<u64>::new());
        assert_eq!(primes_in_progression(63, 10), Err(Error::LevelOverflow(63)));
        assert_eq!(primes_in_progression(0, 10), Err(Error::LevelOverflow(0)));
        assert!(primes_in_progression(62, 10).unwrap().is_empty());
    }

    #[test]
    fn progressions_match_oracle_and_are_disjoint() {
        let limit = 20_000;
        let mut levels = Vec::new();
        for i in 1..=8u32 {
            let m = 1u64 << (i + 1);
            let r = (1u64 << i) + 1;
            let oracle: Vec<u64> = (2..=limit)
                .filter(|&n| n % m == r && trial_division(n))
                .collect();
            let got = primes_in_progression(i, limit).unwrap();
            assert_eq!(got.as_slice(), oracle.as_slice(), "level {i}");
            levels.push(got);
        }
        for i in 0..levels.len() {
            for j in i + 1..levels.len() {
                assert!(levels[i].iter().all(|p| !levels[j].contains(p)));
            }
        }
    }

    #[test]
    fn sieve_counts() {
        assert_eq!(primes_up_to(100).len(), 25);
        assert_eq!(primes_up_to(1_000_000).len(), 78_498);
        assert_eq!(primes_in_range(999_900, 1_000_000).len(), 8);
        assert!(primes_up_to(1).is_empty());
    }

    #[test]
    fn miller_rabin_known_values() {
        assert!(is_prime(18_446_744_073_709_551_557));
        assert!(!is_prime(3_215_031_751)); // strong pseudoprime to bases 2,3,5,7
        assert!(!is_prime(341_550_071_728_321));
        assert!(is_prime(1_000_000_007));
    }

    proptest! {
        #[test]
        fn miller_rabin_matches_trial_division(n in 0u64..2_000_000) {
            prop_assert_eq!(is_prime(n), trial_division(n));
        }

        #[test]
        fn range_sieve_matches_trial_division(lo in 0u64..300_000, len in 0u64..3000) {
            let got = primes_in_range(lo, lo + len);
            let want: Vec<u64> = (lo..=lo + len).filter(|&n| trial_division(n)).collect();
            prop_assert_eq!(got, want);
        }
    }
}
