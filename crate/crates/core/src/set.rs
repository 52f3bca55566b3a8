//! Finite sets of positive integers and primitivization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing list of positive integers: a truncation of some ℬ ⊆ ℕ.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct FiniteSet(Vec<u64>);

impl FiniteSet {
    /// Sorts and deduplicates; rejects 0.
    pub fn new(mut elems: Vec<u64>) -> Result<Self> {
        elems.sort_unstable();
        elems.dedup();
        if elems.first() == Some(&0) {
            return Err(Error::ZeroElement);
        }
        Ok(FiniteSet(elems))
    }

    pub fn empty() -> Self {
        FiniteSet(Vec::new())
    }

    /// Caller guarantees the elements are strictly increasing and nonzero.
    pub(crate) fn from_sorted(elems: Vec<u64>) -> Self {
        debug_assert!(elems.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(elems.first().map_or(true, |&e| e > 0));
        FiniteSet(elems)
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> Option<u64> {
        self.0.last().copied()
    }

    pub fn min(&self) -> Option<u64> {
        self.0.first().copied()
    }

    pub fn contains(&self, x: u64) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.0.iter().copied()
    }

    /// Elements `<= bound`.
    pub fn truncate(&self, bound: u64) -> FiniteSet {
        let end = self.0.partition_point(|&e| e <= bound);
        FiniteSet(self.0[..end].to_vec())
    }

    pub fn union(&self, other: &FiniteSet) -> FiniteSet {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.0, &other.0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        FiniteSet(out)
    }

    pub fn is_subset(&self, other: &FiniteSet) -> bool {
        self.first_missing_from(other).is_none()
    }

    /// Smallest element of `self` that is not in `other`.
    pub fn first_missing_from(&self, other: &FiniteSet) -> Option<u64> {
        self.iter().find(|&x| !other.contains(x))
    }

    /// Newline-delimited ascending decimal integers.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.len() * 8);
        for e in &self.0 {
            s.push_str(&e.to_string());
            s.push('\n');
        }
        s
    }

    /// Parses the newline-delimited format. Blank lines and `#` comments are skipped.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut elems = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v = line
                .parse::<u64>()
                .map_err(|_| Error::Parse(line.to_string()))?;
            elems.push(v);
        }
        FiniteSet::new(elems)
    }
}

impl TryFrom<Vec<u64>> for FiniteSet {
    type Error = Error;

    fn try_from(v: Vec<u64>) -> Result<Self> {
        FiniteSet::new(v)
    }
}

impl From<FiniteSet> for Vec<u64> {
    fn from(s: FiniteSet) -> Self {
        s.0
    }
}

/// Comma-separated list, e.g. `"2,3,5"`.
impl FromStr for FiniteSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut elems = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            elems.push(part.parse::<u64>().map_err(|_| Error::Parse(part.to_string()))?);
        }
        FiniteSet::new(elems)
    }
}

impl fmt::Display for FiniteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "}}")
    }
}

/// Above this maximum the divisibility scan falls back to pairwise tests.
const MARK_LIMIT: u64 = 1 << 27;

/// Walks `elems` ascending and reports, for each element divisible by an
/// earlier kept element, the smallest such divisor. `visit` returns `false` to stop.
fn scan_divisibility(elems: &[u64], mut visit: impl FnMut(u64, Option<u64>) -> bool) {
    let Some(&max) = elems.last() else {
        return;
    };
    let mut kept: Vec<u64> = Vec::new();
    if max <= MARK_LIMIT {
        let mut marked = vec![false; max as usize + 1];
        for &b in elems {
            if marked[b as usize] {
                let d = kept.iter().copied().find(|&a| b % a == 0);
                if !visit(b, d) {
                    return;
                }
                continue;
            }
            if !visit(b, None) {
                return;
            }
            kept.push(b);
            let mut m = 2 * b;
            while m <= max {
                marked[m as usize] = true;
                m += b;
            }
        }
    } else {
        for &b in elems {
            let d = kept.iter().copied().take_while(|&a| a <= b / 2).find(|&a| b % a == 0);
            if !visit(b, d) {
                return;
            }
            if d.is_none() {
                kept.push(b);
            }
        }
    }
}

/// ℬ^prim: the elements not divisible by any other element.
pub fn primitivize(set: &FiniteSet) -> FiniteSet {
    let mut out = Vec::with_capacity(set.len());
    scan_divisibility(set.as_slice(), |b, d| {
        if d.is_none() {
            out.push(b);
        }
        true
    });
    FiniteSet::from_sorted(out)
}

/// Result of [`is_primitive`]; `witness = (a, b)` with `a | b`, `a != b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimitivityVerdict {
    pub primitive: bool,
    pub witness: Option<(u64, u64)>,
}

pub fn is_primitive(set: &FiniteSet) -> PrimitivityVerdict {
    let mut witness = None;
    scan_divisibility(set.as_slice(), |b, d| match d {
        Some(a) => {
            witness = Some((a, b));
            false
        }
        None => true,
    });
    PrimitivityVerdict {
        primitive: witness.is_none(),
        witness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fs(v: &[u64]) -> FiniteSet {
        FiniteSet::new(v.to_vec()).unwrap()
    }

    fn brute_primitive(v: &[u64]) -> Vec<u64> {
        v.iter()
            .copied()
            .filter(|&b| !v.iter().any(|&a| a != b && b % a == 0))
            .collect()
    }

    #[test]
    fn primitivize_examples() {
        assert_eq!(primitivize(&fs(&[2, 3, 4])), fs(&[2, 3]));
        assert_eq!(primitivize(&fs(&[6, 10, 15])), fs(&[6, 10, 15]));
        assert_eq!(primitivize(&fs(&[2, 4, 8, 3, 9])), fs(&[2, 3]));
        assert_eq!(primitivize(&FiniteSet::empty()), FiniteSet::empty());
    }

    #[test]
    fn is_primitive_examples() {
        assert_eq!(
            is_primitive(&fs(&[2, 3])),
            PrimitivityVerdict { primitive: true, witness: None }
        );
        assert_eq!(is_primitive(&fs(&[3, 9])).witness, Some((3, 9)));
        assert!(is_primitive(&FiniteSet::empty()).primitive);
    }

    #[test]
    fn large_elements_use_pairwise_path() {
        let big = MARK_LIMIT * 3;
        let s = fs(&[7, big + 1, 7 * (big / 7 + 5), big * 2 + 2]);
        assert_eq!(primitivize(&s), fs(&[7, big + 1]));
        assert_eq!(is_primitive(&s).witness, Some((7, 7 * (big / 7 + 5))));
    }

    #[test]
    fn zero_rejected_and_text_format() {
        assert_eq!(FiniteSet::new(vec![0, 1]), Err(Error::ZeroElement));
        let s = FiniteSet::parse_text("5\n3\n\n# comment\n3\n").unwrap();
        assert_eq!(s, fs(&[3, 5]));
        assert_eq!(s.to_text(), "3\n5\n");
        assert!(FiniteSet::parse_text("x").is_err());
        assert_eq!("2, 3,5".parse::<FiniteSet>().unwrap(), fs(&[2, 3, 5]));
    }

    proptest! {
        #[test]
        fn primitivize_matches_brute_force_and_is_idempotent(
            v in proptest::collection::vec(1u64..300, 0..40)
        ) {
            let s = FiniteSet::new(v).unwrap();
            let p = primitivize(&s);
            let want = brute_primitive(s.as_slice());
            prop_assert_eq!(p.as_slice(), want.as_slice());
            prop_assert_eq!(primitivize(&p), p.clone());
            let verdict = is_primitive(&s);
            prop_assert_eq!(verdict.primitive, p == s);
            if let Some((a, b)) = verdict.witness {
                prop_assert!(a != b && b % a == 0 && s.contains(a) && s.contains(b));
            }
        }

        #[test]
        fn text_round_trip(v in proptest::collection::vec(1u64..u64::MAX, 0..20)) {
            let s = FiniteSet::new(v).unwrap();
            prop_assert_eq!(FiniteSet::parse_text(&s.to_text()).unwrap(), s);
        }
    }
}
