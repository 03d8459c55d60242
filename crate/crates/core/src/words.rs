//! Reduced words in free groups and their direct products.
//!
//! Letters are nonzero signed integers: `+k` is the k-th generator, `-k` its
//! inverse. The empty word is the identity. All operations are pure.

use crate::error::{Error, Result};
use std::fmt;

/// Sort key realizing the letter order `+1 < -1 < +2 < -2 < ...`.
#[inline]
pub fn letter_key(letter: i32) -> u64 {
    debug_assert!(letter != 0);
    2 * letter.unsigned_abs() as u64 + u64::from(letter < 0)
}

/// A fully reduced word in the free group of the given rank.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ReducedWord {
    letters: Vec<i32>,
    rank: usize,
}

impl ReducedWord {
    /// Reduces a raw letter sequence, cancelling adjacent inverse pairs.
    pub fn reduce(raw: &[i32], rank: usize) -> Result<Self> {
        let mut letters: Vec<i32> = Vec::with_capacity(raw.len());
        for &l in raw {
            if l == 0 || l.unsigned_abs() as usize > rank {
                return Err(Error::InvalidLetter {
                    letter: l as i64,
                    rank,
                });
            }
            if letters.last() == Some(&-l) {
                letters.pop();
            } else {
                letters.push(l);
            }
        }
        Ok(ReducedWord { letters, rank })
    }

    /// The identity word.
    pub fn identity(rank: usize) -> Self {
        ReducedWord {
            letters: Vec::new(),
            rank,
        }
    }

    pub fn letters(&self) -> &[i32] {
        &self.letters
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    /// Reduced product `self * other`.
    pub fn multiply(&self, other: &ReducedWord) -> Result<ReducedWord> {
        if self.rank != other.rank {
            return Err(Error::RankMismatch {
                left: self.rank,
                right: other.rank,
            });
        }
        let mut letters = self.letters.clone();
        for &l in &other.letters {
            if letters.last() == Some(&-l) {
                letters.pop();
            } else {
                letters.push(l);
            }
        }
        Ok(ReducedWord {
            letters,
            rank: self.rank,
        })
    }

    /// Group inverse: reversed letters with flipped signs.
    pub fn inverse(&self) -> ReducedWord {
        ReducedWord {
            letters: self.letters.iter().rev().map(|&l| -l).collect(),
            rank: self.rank,
        }
    }

    /// Key for the canonical (length, lexicographic) ball order.
    pub fn order_key(&self) -> (usize, Vec<u64>) {
        (
            self.letters.len(),
            self.letters.iter().map(|&l| letter_key(l)).collect(),
        )
    }
}

impl fmt::Display for ReducedWord {
    /// Space-free comma-separated signed letters; empty string is the identity.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for l in &self.letters {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
            first = false;
        }
        Ok(())
    }
}

/// An element of a direct product of free groups, one reduced word per factor.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProductWord {
    components: Vec<ReducedWord>,
}

impl ProductWord {
    pub fn new(components: Vec<ReducedWord>) -> Self {
        ProductWord { components }
    }

    pub fn identity(ranks: &[usize]) -> Self {
        ProductWord {
            components: ranks.iter().map(|&r| ReducedWord::identity(r)).collect(),
        }
    }

    pub fn components(&self) -> &[ReducedWord] {
        &self.components
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.rank()).collect()
    }

    /// True iff every component is the identity; this is exactly the support
    /// of the product trace on group elements.
    pub fn is_identity(&self) -> bool {
        self.components.iter().all(|c| c.is_identity())
    }

    /// Total letter count across factors.
    pub fn total_len(&self) -> usize {
        self.components.iter().map(|c| c.len()).sum()
    }

    /// Componentwise reduced product.
    pub fn multiply(&self, other: &ProductWord) -> Result<ProductWord> {
        if self.components.len() != other.components.len() {
            return Err(Error::FactorMismatch {
                left: self.components.len(),
                right: other.components.len(),
            });
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.multiply(b))
            .collect::<Result<_>>()?;
        Ok(ProductWord { components })
    }

    pub fn inverse(&self) -> ProductWord {
        ProductWord {
            components: self.components.iter().map(|c| c.inverse()).collect(),
        }
    }
}

impl fmt::Display for ProductWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for c in &self.components {
            if !first {
                write!(f, "|")?;
            }
            write!(f, "{c}")?;
            first = false;
        }
        Ok(())
    }
}

/// The signed alphabet h_1, ..., h_{2n}: h_k = g_k for k <= n and
/// h_k = g_{k-n}^{-1} otherwise. `k` is 1-based.
pub fn h_letter(k: usize, n: usize) -> Result<i32> {
    if k == 0 || k > 2 * n {
        return Err(Error::InvalidLetter {
            letter: k as i64,
            rank: 2 * n,
        });
    }
    Ok(if k <= n {
        k as i32
    } else {
        -((k - n) as i32)
    })
}

/// Closed-form count of reduced words of length <= radius in rank n.
pub fn ball_size(n: usize, radius: usize) -> u128 {
    let mut total: u128 = 1;
    let mut shell: u128 = 0;
    for l in 1..=radius {
        shell = if l == 1 {
            2 * n as u128
        } else {
            shell * (2 * n as u128 - 1)
        };
        total += shell;
    }
    total
}

/// All reduced words of length <= radius, ordered by (length, lexicographic
/// on `letter_key`). Index 0 is the identity. The ordering is fixed so
/// compression matrices are reproducible across runs.
pub fn enumerate_ball(n: usize, radius: usize, cap: usize) -> Result<Vec<ReducedWord>> {
    let size = ball_size(n, radius);
    if size > cap as u128 {
        return Err(Error::BallTooLarge {
            rank: n,
            radius,
            size,
            cap,
        });
    }
    // Letters in key order.
    let alphabet: Vec<i32> = (1..=n as i32).flat_map(|k| [k, -k]).collect();
    let mut out = Vec::with_capacity(size as usize);
    out.push(ReducedWord::identity(n));
    let mut prev_shell: Vec<Vec<i32>> = vec![Vec::new()];
    for _ in 1..=radius {
        let mut shell = Vec::with_capacity(prev_shell.len() * (2 * n).max(1));
        for w in &prev_shell {
            for &l in &alphabet {
                if w.last() == Some(&-l) {
                    continue;
                }
                let mut next = w.clone();
                next.push(l);
                shell.push(next);
            }
        }
        for w in &shell {
            out.push(ReducedWord {
                letters: w.clone(),
                rank: n,
            });
        }
        prev_shell = shell;
    }
    Ok(out)
}
