//! Segmented bitset sieving of ℳ_ℬ and ℱ_ℬ over half-open windows.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::family::FamilySpec;
use crate::set::FiniteSet;

/// Default segment length in integers (a multiple of 64).
pub const DEFAULT_SEGMENT: u64 = 1 << 20;

const MAX_BOUND: u64 = 1 << 63;

/// Bits over `[lo, hi)`; bit `j` describes the integer `lo + j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    lo: u64,
    hi: u64,
    bits: Vec<u64>,
}

fn check_window(lo: u64, hi: u64) -> Result<()> {
    if hi > MAX_BOUND {
        return Err(Error::RangeTooLarge(hi));
    }
    if lo == 0 || lo >= hi {
        return Err(Error::InvalidWindow { lo, hi });
    }
    Ok(())
}

impl Window {
    pub fn lo(&self) -> u64 {
        self.lo
    }

    pub fn hi(&self) -> u64 {
        self.hi
    }

    pub fn len(&self) -> u64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.lo == self.hi
    }

    pub fn words(&self) -> &[u64] {
        &self.bits
    }

    /// Membership of `n`; `false` outside the window.
    pub fn get(&self, n: u64) -> bool {
        if n < self.lo || n >= self.hi {
            return false;
        }
        let j = n - self.lo;
        self.bits[(j / 64) as usize] >> (j % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Members in `[lo, n]`.
    pub fn count_up_to(&self, n: u64) -> u64 {
        if n < self.lo {
            return 0;
        }
        let j = (n.min(self.hi - 1) - self.lo + 1) as usize;
        let full: u64 = self.bits[..j / 64].iter().map(|w| w.count_ones() as u64).sum();
        let rem = j % 64;
        if rem == 0 {
            full
        } else {
            full + (self.bits[j / 64] & ((1u64 << rem) - 1)).count_ones() as u64
        }
    }

    pub fn members(&self) -> impl Iterator<Item = u64> + '_ {
        self.bits.iter().enumerate().flat_map(move |(i, &w)| {
            let base = self.lo + 64 * i as u64;
            BitIter(w).map(move |b| base + b as u64)
        })
    }

    fn mask_tail(&mut self) {
        let rem = self.len() % 64;
        if rem != 0 {
            if let Some(last) = self.bits.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn complement(&self) -> Window {
        let mut w = Window {
            lo: self.lo,
            hi: self.hi,
            bits: self.bits.iter().map(|w| !w).collect(),
        };
        w.mask_tail();
        w
    }

    fn same_range(&self, other: &Window) -> Result<()> {
        if self.lo != other.lo || self.hi != other.hi {
            return Err(Error::invalid(format!(
                "windows [{}, {}) and [{}, {}) differ",
                self.lo, self.hi, other.lo, other.hi
            )));
        }
        Ok(())
    }

    /// `self ∖ other` on the same range.
    pub fn and_not(&self, other: &Window) -> Result<Window> {
        self.same_range(other)?;
        Ok(Window {
            lo: self.lo,
            hi: self.hi,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| a & !b).collect(),
        })
    }

    pub fn or(&self, other: &Window) -> Result<Window> {
        self.same_range(other)?;
        Ok(Window {
            lo: self.lo,
            hi: self.hi,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| a | b).collect(),
        })
    }

    pub fn is_subset(&self, other: &Window) -> Result<bool> {
        self.same_range(other)?;
        Ok(self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0))
    }

    /// Concatenates `self` with a window starting at `self.hi`.
    pub fn concat(&self, next: &Window) -> Result<Window> {
        if next.lo != self.hi {
            return Err(Error::invalid("windows are not adjacent"));
        }
        let mut out = Window {
            lo: self.lo,
            hi: next.hi,
            bits: vec![0; words_for(next.hi - self.lo)],
        };
        out.bits[..self.bits.len()].copy_from_slice(&self.bits);
        for n in next.members() {
            let j = n - out.lo;
            out.bits[(j / 64) as usize] |= 1 << (j % 64);
        }
        Ok(out)
    }

    /// Raw dump: `lo`, `hi` as little-endian u64, then the packed bits,
    /// least significant bit first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let nbytes = self.len().div_ceil(8) as usize;
        let mut out = Vec::with_capacity(16 + nbytes);
        out.extend_from_slice(&self.lo.to_le_bytes());
        out.extend_from_slice(&self.hi.to_le_bytes());
        let mut body: Vec<u8> = self.bits.iter().flat_map(|w| w.to_le_bytes()).collect();
        body.truncate(nbytes);
        out.extend_from_slice(&body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Window> {
        if bytes.len() < 16 {
            return Err(Error::Parse("window dump shorter than its header".into()));
        }
        let lo = u64::from_le_bytes(bytes[..8].try_into().unwrap());
        let hi = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        check_window(lo, hi)?;
        let body = &bytes[16..];
        if body.len() as u64 != (hi - lo).div_ceil(8) {
            return Err(Error::Parse("window dump length does not match its header".into()));
        }
        let mut bits = vec![0u64; words_for(hi - lo)];
        for (i, chunk) in body.chunks(8).enumerate() {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            bits[i] = u64::from_le_bytes(buf);
        }
        let mut w = Window { lo, hi, bits };
        w.mask_tail();
        Ok(w)
    }
}

struct BitIter(u64);

impl Iterator for BitIter {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        if self.0 == 0 {
            return None;
        }
        let b = self.0.trailing_zeros();
        self.0 &= self.0 - 1;
        Some(b)
    }
}

fn words_for(len: u64) -> usize {
    len.div_ceil(64) as usize
}

/// Marks multiples of `elems` in `[lo, lo + 64 * words.len())`, clipped to `hi`.
fn mark_segment(elems: &[u64], lo: u64, hi: u64, words: &mut [u64]) {
    for &b in elems {
        if b >= hi {
            break;
        }
        if b == 1 {
            words.iter_mut().for_each(|w| *w = !0);
            break;
        }
        let mut m = lo.div_ceil(b) * b;
        while m < hi {
            let j = m - lo;
            words[(j / 64) as usize] |= 1 << (j % 64);
            m += b;
        }
    }
    let rem = (hi - lo) % 64;
    if rem != 0 && (hi - lo).div_ceil(64) as usize == words.len() {
        *words.last_mut().unwrap() &= (1u64 << rem) - 1;
    }
}

/// ℳ_B ∩ [lo, hi) with an explicit segment length (rounded up to a multiple of 64).
pub fn sieve_multiples_with(b: &FiniteSet, lo: u64, hi: u64, segment: u64) -> Result<Window> {
    check_window(lo, hi)?;
    let seg_words = segment.max(64).div_ceil(64) as usize;
    let mut bits = vec![0u64; words_for(hi - lo)];
    let elems = b.as_slice();
    bits.par_chunks_mut(seg_words).enumerate().for_each(|(i, chunk)| {
        let s_lo = lo + (i * seg_words * 64) as u64;
        let s_hi = hi.min(s_lo + 64 * chunk.len() as u64);
        mark_segment(elems, s_lo, s_hi, chunk);
    });
    Ok(Window { lo, hi, bits })
}

/// ℳ_B ∩ [lo, hi).
pub fn sieve_multiples(b: &FiniteSet, lo: u64, hi: u64) -> Result<Window> {
    sieve_multiples_with(b, lo, hi, DEFAULT_SEGMENT)
}

/// ℱ_B ∩ [lo, hi).
pub fn free_window(b: &FiniteSet, lo: u64, hi: u64) -> Result<Window> {
    Ok(sieve_multiples(b, lo, hi)?.complement())
}

/// |ℳ_B ∩ [1, n]| at every checkpoint, in one segmented pass without
/// materializing the whole window.
pub fn count_multiples_at(b: &FiniteSet, checkpoints: &[u64]) -> Result<Vec<u64>> {
    let Some(&max) = checkpoints.iter().max() else {
        return Ok(Vec::new());
    };
    if checkpoints.contains(&0) {
        return Err(Error::invalid("checkpoints must be >= 1"));
    }
    let hi = max.checked_add(1).ok_or(Error::RangeTooLarge(max))?;
    check_window(1, hi)?;
    let seg = DEFAULT_SEGMENT;
    let nseg = (hi - 1).div_ceil(seg);
    let elems = b.as_slice();
    // Per segment: total and, for each checkpoint inside it, the partial count.
    let per_segment: Vec<(u64, Vec<(usize, u64)>)> = (0..nseg)
        .into_par_iter()
        .map(|i| {
            let s_lo = 1 + i * seg;
            let s_hi = hi.min(s_lo + seg);
            let mut words = vec![0u64; words_for(s_hi - s_lo)];
            mark_segment(elems, s_lo, s_hi, &mut words);
            let w = Window { lo: s_lo, hi: s_hi, bits: words };
            let inside = checkpoints
                .iter()
                .enumerate()
                .filter(|(_, &c)| c >= s_lo && c < s_hi)
                .map(|(k, &c)| (k, w.count_up_to(c)))
                .collect();
            (w.count_ones(), inside)
        })
        .collect();
    let mut out = vec![0u64; checkpoints.len()];
    let mut before = 0u64;
    for (total, inside) in per_segment {
        for (k, partial) in inside {
            out[k] = before + partial;
        }
        before += total;
    }
    Ok(out)
}

/// |ℳ_B ∩ [1, n]| for a finite set.
pub fn count_multiples_set(b: &FiniteSet, n: u64) -> Result<u64> {
    Ok(count_multiples_at(b, &[n])?[0])
}

/// |ℳ_ℬ ∩ [1, n]|; only elements `<= n` matter.
pub fn count_multiples(spec: &FamilySpec, n: u64) -> Result<u64> {
    if n == 0 {
        return Err(Error::invalid("N must be >= 1"));
    }
    count_multiples_set(&spec.materialize(n)?, n)
}

/// |(ℳ_{ℬ₁} ∖ ℳ_{ℬ₂}) ∩ [1, n]|.
pub fn count_difference(spec1: &FamilySpec, spec2: &FamilySpec, n: u64) -> Result<u64> {
    Ok(count_difference_at(&spec1.materialize(n)?, &spec2.materialize(n)?, &[n])?[0])
}

/// Difference counts at every checkpoint for finite sets, one pass.
pub fn count_difference_at(b1: &FiniteSet, b2: &FiniteSet, checkpoints: &[u64]) -> Result<Vec<u64>> {
    let Some(&max) = checkpoints.iter().max() else {
        return Ok(Vec::new());
    };
    if checkpoints.contains(&0) {
        return Err(Error::invalid("checkpoints must be >= 1"));
    }
    let hi = max.checked_add(1).ok_or(Error::RangeTooLarge(max))?;
    let diff = sieve_multiples(b1, 1, hi)?.and_not(&sieve_multiples(b2, 1, hi)?)?;
    Ok(checkpoints.iter().map(|&c| diff.count_up_to(c)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fs(v: &[u64]) -> FiniteSet {
        FiniteSet::new(v.to_vec()).unwrap()
    }

    fn brute(b: &[u64], lo: u64, hi: u64) -> Vec<u64> {
        (lo..hi).filter(|n| b.iter().any(|d| n % d == 0)).collect()
    }

    #[test]
    fn sieve_examples() {
        let m = |b: &[u64], lo, hi| sieve_multiples(&fs(b), lo, hi).unwrap().members().collect::<Vec<_>>();
        assert_eq!(m(&[2, 3], 1, 11), vec![2, 3, 4, 6, 8, 9, 10]);
        assert!(m(&[], 1, 11).is_empty());
        assert_eq!(m(&[7], 10, 20), vec![14]);
        let f = |b: &[u64], lo, hi| free_window(&fs(b), lo, hi).unwrap().members().collect::<Vec<_>>();
        assert_eq!(f(&[2], 1, 6), vec![1, 3, 5]);
        assert_eq!(f(&[], 1, 4), vec![1, 2, 3]);
        assert_eq!(f(&[2, 3], 1, 13), vec![1, 5, 7, 11]);
    }

    #[test]
    fn count_examples() {
        let c = |b: &[u64], n| count_multiples(&FamilySpec::explicit(b).unwrap(), n).unwrap();
        assert_eq!(c(&[2], 10), 5);
        assert_eq!(c(&[2, 3], 12), 8);
        assert_eq!(c(&[6, 10, 15], 30), 8);
        let d = |a: &[u64], b: &[u64], n| {
            count_difference(&FamilySpec::explicit(a).unwrap(), &FamilySpec::explicit(b).unwrap(), n).unwrap()
        };
        assert_eq!(d(&[2], &[4], 8), 2);
        assert_eq!(d(&[2], &[2], 100), 0);
        assert_eq!(d(&[2, 3], &[2], 12), 2);
    }

    #[test]
    fn window_errors() {
        assert_eq!(sieve_multiples(&fs(&[2]), 0, 5), Err(Error::InvalidWindow { lo: 0, hi: 5 }));
        assert_eq!(sieve_multiples(&fs(&[2]), 5, 5), Err(Error::InvalidWindow { lo: 5, hi: 5 }));
        assert_eq!(
            sieve_multiples(&fs(&[2]), 1, (1 << 63) + 1),
            Err(Error::RangeTooLarge((1 << 63) + 1))
        );
    }

    #[test]
    fn counts_across_segments() {
        let b = fs(&[3, 7, 1000]);
        let n = 3 * DEFAULT_SEGMENT + 12_345;
        let got = count_multiples_at(&b, &[10, DEFAULT_SEGMENT, DEFAULT_SEGMENT + 1, n]).unwrap();
        let oracle = |n: u64| n / 3 + n / 7 + n / 1000 - n / 21 - n / 3000 - n / 7000 + n / 21000;
        assert_eq!(got, vec![oracle(10), oracle(DEFAULT_SEGMENT), oracle(DEFAULT_SEGMENT + 1), oracle(n)]);
    }

    #[test]
    fn one_is_everything() {
        let w = sieve_multiples(&fs(&[1]), 5, 200).unwrap();
        assert_eq!(w.count_ones(), 195);
        assert_eq!(w.complement().count_ones(), 0);
    }

    #[test]
    fn dump_round_trip() {
        let w = sieve_multiples(&fs(&[3, 5]), 17, 117).unwrap();
        let bytes = w.to_bytes();
        assert_eq!(bytes.len(), 16 + 13);
        assert_eq!(&bytes[..8], &17u64.to_le_bytes());
        assert_eq!(Window::from_bytes(&bytes).unwrap(), w);
        assert!(Window::from_bytes(&bytes[..20]).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            b in proptest::collection::vec(1u64..100, 0..12),
            lo in 1u64..3000,
            len in 1u64..3000,
            seg in 1u64..5,
        ) {
            let set = FiniteSet::new(b.clone()).unwrap();
            let w = sieve_multiples_with(&set, lo, lo + len, seg * 64).unwrap();
            prop_assert_eq!(w.members().collect::<Vec<_>>(), brute(&b, lo, lo + len));
            let f = free_window(&set, lo, lo + len).unwrap();
            prop_assert_eq!(w.count_ones() + f.count_ones(), len);
            prop_assert_eq!(w.and_not(&f.complement()).unwrap().count_ones(), 0);
        }

        #[test]
        fn segment_independence(
            b in proptest::collection::vec(1u64..200, 0..10),
            lo in 1u64..2000,
            a in 1u64..2000,
            c in 1u64..2000,
        ) {
            let set = FiniteSet::new(b).unwrap();
            let mid = lo + a;
            let hi = mid + c;
            let whole = sieve_multiples(&set, lo, hi).unwrap();
            let left = sieve_multiples(&set, lo, mid).unwrap();
            let right = sieve_multiples(&set, mid, hi).unwrap();
            prop_assert_eq!(left.concat(&right).unwrap(), whole);
        }

        #[test]
        fn monotone_in_b(
            b in proptest::collection::vec(1u64..200, 0..10),
            extra in proptest::collection::vec(1u64..200, 0..5),
        ) {
            let small = FiniteSet::new(b.clone()).unwrap();
            let big = FiniteSet::new(b.into_iter().chain(extra).collect()).unwrap();
            let ws = sieve_multiples(&small, 1, 1000).unwrap();
            let wb = sieve_multiples(&big, 1, 1000).unwrap();
            prop_assert!(ws.is_subset(&wb).unwrap());
        }
    }
}
