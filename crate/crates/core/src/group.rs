//! Finitely generated groups `Z^k` and `F_k`, word length, and Cayley balls.
//!
//! Balls are listed breadth-first by word length with a lexicographic
//! tie-break, so `ball(R)` is always a prefix of `ball(R')` for `R <= R'`.
//! For free groups the letter order is `a^-1 < a < b^-1 < b < ...`.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rank")]
pub enum GroupSpec {
    FreeAbelian(usize),
    Free(usize),
}

impl GroupSpec {
    pub fn free_abelian(k: usize) -> Result<Self> {
        Self::check(k).map(|_| GroupSpec::FreeAbelian(k))
    }

    pub fn free(k: usize) -> Result<Self> {
        Self::check(k).map(|_| GroupSpec::Free(k))
    }

    fn check(k: usize) -> Result<()> {
        if k == 0 {
            Err(Error::Domain("group needs at least one generator".into()))
        } else {
            Ok(())
        }
    }

    pub fn rank(&self) -> usize {
        match *self {
            GroupSpec::FreeAbelian(k) | GroupSpec::Free(k) => k,
        }
    }

    pub fn identity(&self) -> GroupElement {
        match *self {
            GroupSpec::FreeAbelian(k) => GroupElement::Abelian(vec![0; k]),
            GroupSpec::Free(_) => GroupElement::Free(Vec::new()),
        }
    }

    /// Generators `g_1, ..., g_k` (no inverses).
    pub fn generators(&self) -> Vec<GroupElement> {
        match *self {
            GroupSpec::FreeAbelian(k) => (0..k)
                .map(|i| {
                    let mut v = vec![0; k];
                    v[i] = 1;
                    GroupElement::Abelian(v)
                })
                .collect(),
            GroupSpec::Free(k) => (1..=k as i32).map(|l| GroupElement::Free(vec![l])).collect(),
        }
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        match (self, g) {
            (GroupSpec::FreeAbelian(k), GroupElement::Abelian(v)) => v.len() == *k,
            (GroupSpec::Free(k), GroupElement::Free(w)) => {
                w.iter().all(|&l| l != 0 && l.unsigned_abs() as usize <= *k)
                    && w.windows(2).all(|p| p[0] != -p[1])
            }
            _ => false,
        }
    }

    /// Number of elements of word length at most `radius`.
    pub fn ball_size(&self, radius: usize) -> usize {
        match *self {
            GroupSpec::FreeAbelian(k) => {
                // |{x in Z^k : |x|_1 <= R}| = sum_i 2^i C(k,i) C(R,i)
                (0..=k.min(radius))
                    .map(|i| (1usize << i) * binom(k, i) * binom(radius, i))
                    .sum()
            }
            GroupSpec::Free(k) => {
                let q = 2 * k - 1;
                let mut total = 1usize;
                let mut shell = 2 * k;
                for _ in 0..radius {
                    total = total.saturating_add(shell);
                    shell = shell.saturating_mul(q);
                }
                total
            }
        }
    }

    /// Parses `e`, `(1,-2)` / `1,-2` for `Z^k`, or words such as `abA` for
    /// `F_k` (capital letters are inverses).
    pub fn parse(&self, s: &str) -> Result<GroupElement> {
        let s = s.trim();
        if s == "e" {
            return Ok(self.identity());
        }
        let g = match self {
            GroupSpec::FreeAbelian(_) => {
                let inner = s.trim_start_matches('(').trim_end_matches(')');
                let v = inner
                    .split(',')
                    .map(|t| t.trim().parse::<i64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::Domain(format!("cannot parse '{s}': {e}")))?;
                GroupElement::Abelian(v)
            }
            GroupSpec::Free(_) => {
                let mut w = Vec::new();
                for c in s.chars() {
                    let l = if c.is_ascii_lowercase() {
                        (c as u8 - b'a' + 1) as i32
                    } else if c.is_ascii_uppercase() {
                        -((c as u8 - b'A' + 1) as i32)
                    } else {
                        return Err(Error::Domain(format!("bad letter '{c}' in '{s}'")));
                    };
                    w.push(l);
                }
                GroupElement::Free(Vec::new()).mul_letters(&w)
            }
        };
        if self.contains(&g) {
            Ok(g)
        } else {
            Err(Error::Domain(format!("'{s}' is not an element of {self:?}")))
        }
    }
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Reduced word: an exponent vector in `Z^k`, or a letter string in `F_k`
/// where letter `+i` is the `i`-th generator and `-i` its inverse.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupElement {
    Abelian(Vec<i64>),
    Free(Vec<i32>),
}

impl GroupElement {
    pub fn multiply(&self, other: &GroupElement) -> GroupElement {
        match (self, other) {
            (GroupElement::Abelian(a), GroupElement::Abelian(b)) => {
                assert_eq!(a.len(), b.len(), "rank mismatch in Z^k product");
                GroupElement::Abelian(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            (GroupElement::Free(_), GroupElement::Free(b)) => self.mul_letters(b),
            _ => panic!("product of elements from different groups"),
        }
    }

    fn mul_letters(&self, letters: &[i32]) -> GroupElement {
        let GroupElement::Free(a) = self else {
            unreachable!()
        };
        let mut w = a.clone();
        for &l in letters {
            if w.last() == Some(&-l) {
                w.pop();
            } else {
                w.push(l);
            }
        }
        GroupElement::Free(w)
    }

    pub fn inverse(&self) -> GroupElement {
        match self {
            GroupElement::Abelian(a) => GroupElement::Abelian(a.iter().map(|x| -x).collect()),
            GroupElement::Free(w) => GroupElement::Free(w.iter().rev().map(|l| -l).collect()),
        }
    }

    /// Word length with respect to the standard symmetric generating set.
    pub fn length(&self) -> usize {
        match self {
            GroupElement::Abelian(a) => a.iter().map(|x| x.unsigned_abs() as usize).sum(),
            GroupElement::Free(w) => w.len(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.length() == 0
    }

    /// Splits `G \ {e}` into two halves exchanged by inversion. In `Z^k` the
    /// first nonzero coordinate is positive; in `F_k` the word is larger than
    /// its inverse in the ball order.
    pub fn is_positive(&self) -> bool {
        match self {
            GroupElement::Abelian(a) => a.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0),
            GroupElement::Free(_) => !self.is_identity() && self.order_key() > self.inverse().order_key(),
        }
    }

    /// Sort key realizing the ball order: length first, then lexicographic.
    pub fn order_key(&self) -> (usize, Vec<i64>) {
        let lex = match self {
            GroupElement::Abelian(a) => a.clone(),
            GroupElement::Free(w) => w.iter().map(|&l| letter_rank(l)).collect(),
        };
        (self.length(), lex)
    }
}

fn letter_rank(l: i32) -> i64 {
    let i = (l.unsigned_abs() - 1) as i64;
    2 * i + i64::from(l > 0)
}

fn letter_char(l: i32) -> char {
    let i = (l.unsigned_abs() - 1) as u8;
    if l > 0 {
        (b'a' + i) as char
    } else {
        (b'A' + i) as char
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            _ if self.is_identity() => write!(f, "e"),
            GroupElement::Abelian(a) => {
                let parts: Vec<String> = a.iter().map(|x| x.to_string()).collect();
                write!(f, "({})", parts.join(","))
            }
            GroupElement::Free(w) => {
                for &l in w {
                    write!(f, "{}", letter_char(l))?;
                }
                Ok(())
            }
        }
    }
}

impl PartialOrd for GroupElement {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GroupElement {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.order_key().cmp(&other.order_key())
    }
}

/// Cayley ball `{g : |g| <= radius}` in breadth-first lexicographic order.
#[derive(Clone, Debug)]
pub struct Ball {
    spec: GroupSpec,
    radius: usize,
    elements: Vec<GroupElement>,
    index: HashMap<GroupElement, usize>,
}

impl Ball {
    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn position(&self, g: &GroupElement) -> Option<usize> {
        self.index.get(g).copied()
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.index.contains_key(g)
    }
}

/// Enumerates the ball of radius `radius`; fails if it would hold more than
/// `cap` elements.
pub fn ball(spec: GroupSpec, radius: usize, cap: Option<usize>) -> Result<Ball> {
    let size = spec.ball_size(radius);
    if let Some(cap) = cap {
        if size > cap {
            return Err(Error::Resource {
                what: format!("ball of radius {radius} in {spec:?}"),
                needed: size,
                cap,
            });
        }
    }
    let mut elements = vec![spec.identity()];
    let mut shell = vec![spec.identity()];
    for _ in 0..radius {
        let mut next = Vec::new();
        match spec {
            GroupSpec::FreeAbelian(k) => {
                for g in &shell {
                    let GroupElement::Abelian(v) = g else { unreachable!() };
                    for i in 0..k {
                        for s in [-1, 1] {
                            let mut w = v.clone();
                            w[i] += s;
                            let h = GroupElement::Abelian(w);
                            if h.length() == g.length() + 1 {
                                next.push(h);
                            }
                        }
                    }
                }
                next.sort();
                next.dedup();
            }
            GroupSpec::Free(k) => {
                // shell is sorted, so appending letters in rank order keeps it sorted
                let mut letters: Vec<i32> = (1..=k as i32).flat_map(|l| [-l, l]).collect();
                letters.sort_by_key(|&l| letter_rank(l));
                for g in &shell {
                    let GroupElement::Free(w) = g else { unreachable!() };
                    for &l in &letters {
                        if w.last() != Some(&-l) {
                            let mut w2 = w.clone();
                            w2.push(l);
                            next.push(GroupElement::Free(w2));
                        }
                    }
                }
            }
        }
        elements.extend(next.iter().cloned());
        shell = next;
    }
    debug_assert_eq!(elements.len(), size);
    let index = elements.iter().cloned().enumerate().map(|(i, g)| (g, i)).collect();
    Ok(Ball {
        spec,
        radius,
        elements,
        index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(v: &[i64]) -> GroupElement {
        GroupElement::Abelian(v.to_vec())
    }

    #[test]
    fn free_abelian_ball_order() {
        let b = ball(GroupSpec::FreeAbelian(1), 2, None).unwrap();
        let got: Vec<_> = b.elements().to_vec();
        assert_eq!(got, vec![z(&[0]), z(&[-1]), z(&[1]), z(&[-2]), z(&[2])]);
    }

    #[test]
    fn free_ball_sizes_match_formula() {
        for k in 2..=3usize {
            for r in 0..=4usize {
                let b = ball(GroupSpec::Free(k), r, None).unwrap();
                let q = 2 * k - 1;
                let expected = 1 + 2 * k * (q.pow(r as u32) - 1) / (2 * k - 2);
                assert_eq!(b.len(), expected);
            }
        }
    }

    #[test]
    fn free_letter_order_puts_inverses_first() {
        let b = ball(GroupSpec::Free(2), 1, None).unwrap();
        let names: Vec<String> = b.elements().iter().map(|g| g.to_string()).collect();
        assert_eq!(names, vec!["e", "A", "a", "B", "b"]);
    }

    #[test]
    fn free_shells_are_sorted() {
        let b = ball(GroupSpec::Free(2), 3, None).unwrap();
        assert!(b.elements().windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn cap_is_enforced() {
        let err = ball(GroupSpec::FreeAbelian(2), 10, Some(100)).unwrap_err();
        assert!(matches!(err, Error::Resource { needed: 221, cap: 100, .. }));
    }

    #[test]
    fn positivity_splits_nontrivial_elements() {
        let b = ball(GroupSpec::Free(2), 3, None).unwrap();
        for g in b.elements().iter().skip(1) {
            assert_ne!(g.is_positive(), g.inverse().is_positive(), "{g}");
        }
        assert!(!b.elements()[0].is_positive());
    }

    #[test]
    fn parse_round_trip() {
        let f2 = GroupSpec::Free(2);
        let g = f2.parse("abBA b").err();
        assert!(g.is_some());
        assert_eq!(f2.parse("abB").unwrap().to_string(), "a");
        assert_eq!(GroupSpec::FreeAbelian(2).parse("(1,-2)").unwrap(), z(&[1, -2]));
        assert!(GroupSpec::FreeAbelian(2).parse("(1,2,3)").is_err());
    }
}
