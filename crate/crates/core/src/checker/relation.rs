//! Strict partial orders over `0..len`, kept transitively closed.

use std::fmt;

/// A transitively closed, acyclic relation stored as reachability bitsets.
#[derive(Clone, PartialEq, Eq)]
pub struct Relation {
    len: usize,
    words: usize,
    /// `reach[a]` has bit `b` set iff `a < b`.
    reach: Vec<u64>,
}

/// Adding the edge would close a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleError {
    pub from: usize,
    pub to: usize,
}

impl Relation {
    pub fn new(len: usize) -> Self {
        let words = len.div_ceil(64).max(1);
        Relation {
            len,
            words,
            reach: vec![0; len * words],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn row(&self, a: usize) -> &[u64] {
        &self.reach[a * self.words..(a + 1) * self.words]
    }

    /// Whether `a` strictly precedes `b`.
    pub fn precedes(&self, a: usize, b: usize) -> bool {
        self.row(a)[b / 64] >> (b % 64) & 1 == 1
    }

    pub fn comparable(&self, a: usize, b: usize) -> bool {
        a == b || self.precedes(a, b) || self.precedes(b, a)
    }

    /// Adds `a < b` and everything it implies. Returns whether the relation
    /// changed.
    pub fn add(&mut self, a: usize, b: usize) -> Result<bool, CycleError> {
        if a == b || self.precedes(b, a) {
            return Err(CycleError { from: a, to: b });
        }
        if self.precedes(a, b) {
            return Ok(false);
        }
        let mut gain = self.row(b).to_vec();
        gain[b / 64] |= 1 << (b % 64);
        for x in 0..self.len {
            if x == a || self.precedes(x, a) {
                let w = self.words;
                for (dst, src) in self.reach[x * w..(x + 1) * w].iter_mut().zip(&gain) {
                    *dst |= src;
                }
            }
        }
        Ok(true)
    }

    /// All `b` with `a < b`.
    pub fn successors(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&b| self.precedes(a, b))
    }

    /// All pairs `(a, b)` with `a < b`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len).flat_map(move |a| self.successors(a).map(move |b| (a, b)))
    }

    pub fn pair_count(&self) -> usize {
        self.reach.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Whether `other` contains every pair of `self`.
    pub fn is_subset_of(&self, other: &Relation) -> bool {
        self.len == other.len
            && self
                .reach
                .iter()
                .zip(&other.reach)
                .all(|(a, b)| a & !b == 0)
    }
}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.pairs()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Reference closure by repeated squaring on a boolean matrix.
    fn floyd(len: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
        let mut m = vec![vec![false; len]; len];
        for &(a, b) in edges {
            m[a][b] = true;
        }
        for k in 0..len {
            for i in 0..len {
                for j in 0..len {
                    if m[i][k] && m[k][j] {
                        m[i][j] = true;
                    }
                }
            }
        }
        m
    }

    #[test]
    fn incremental_closure_matches_reference() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let len = rng.gen_range(1..70);
            let mut r = Relation::new(len);
            let mut accepted = Vec::new();
            for _ in 0..rng.gen_range(0..150) {
                let (a, b) = (rng.gen_range(0..len), rng.gen_range(0..len));
                match r.add(a, b) {
                    Ok(_) => accepted.push((a, b)),
                    Err(_) => assert!(a == b || floyd(len, &accepted)[b][a]),
                }
            }
            let reference = floyd(len, &accepted);
            for a in 0..len {
                for b in 0..len {
                    assert_eq!(r.precedes(a, b), reference[a][b]);
                }
            }
        }
    }

    #[test]
    fn cycles_and_self_loops_rejected() {
        let mut r = Relation::new(3);
        r.add(0, 1).unwrap();
        r.add(1, 2).unwrap();
        assert!(r.add(2, 0).is_err());
        assert!(r.add(1, 1).is_err());
        assert_eq!(r.add(0, 2), Ok(false));
        assert_eq!(r.pair_count(), 3);
    }
}
