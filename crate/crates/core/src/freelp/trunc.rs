//! Certified operator-norm lower bounds by compression to a word ball.
//!
//! For an operator X = sum_I a_I (x) lambda(w_I) on a single free group, the
//! Rayleigh quotient of the compression P (X*X) P to any finite-dimensional
//! subspace is at most ||X||^2, so a power iteration on the ball of radius L
//! yields a certified lower bound that increases with L.
//!
//! Words in the ball are never materialized. Ranks are assigned shell by
//! shell (length 0, 1, ..., L), lexicographically within a shell, and all
//! arithmetic happens on ranks: appending a letter maps a rank r in shell
//! l >= 1 to r' = offset[l+1] + lexrank(r) * (2n-1) + pos, and removing the
//! last letter divides the lexrank by 2n-1. The only stored per-word datum
//! is one byte, the key of the last letter, used to detect cancellations.

use crate::error::{Error, Result};
use crate::tensors::CMat;
use crate::words::{ball_size, letter_key, ReducedWord};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FreeOperator, Group, GroupWord};

/// Default ball radius for the compression.
pub const DEFAULT_RADIUS: usize = 6;
/// Default cap on the number of ball elements.
pub const DEFAULT_BALL_CAP: usize = 400_000_000;
/// Seed for the random component of the power-iteration start vector.
pub const START_SEED: u64 = 0x4b50_4e49;

const IDENTITY_KEY: u8 = u8::MAX;
/// Vector lengths above this use the f32 storage path when the
/// coefficients allow it.
const F32_THRESHOLD: usize = 1 << 22;

#[derive(Clone, Debug)]
pub struct TruncOptions {
    pub radius: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub ball_cap: usize,
    pub seed: u64,
}

impl Default for TruncOptions {
    fn default() -> Self {
        TruncOptions {
            radius: DEFAULT_RADIUS,
            tol: 1e-8,
            max_iter: 5000,
            ball_cap: DEFAULT_BALL_CAP,
            seed: START_SEED,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TruncResult {
    /// Certified lower bound on the operator norm.
    pub value: f64,
    pub radius: usize,
    pub ball: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// Ranked index of the radius-L ball in the free group of the given rank,
/// with O(1) letter append/remove on ranks.
pub struct BallIndex {
    rank: usize,
    radius: usize,
    /// offsets[l] = rank of the first word of length l; one past-the-end
    /// entry, so offsets[radius + 1] is the ball size.
    offsets: Vec<usize>,
    /// Key of the last letter of each word; IDENTITY_KEY for the identity.
    last: Vec<u8>,
}

impl BallIndex {
    pub fn build(rank: usize, radius: usize, cap: usize) -> Result<Self> {
        let size = ball_size(rank, radius);
        if size > cap as u128 {
            return Err(Error::BallTooLarge {
                rank,
                radius,
                size,
                cap,
            });
        }
        let size = size as usize;
        let q = 2 * rank;
        let mut offsets = Vec::with_capacity(radius + 2);
        offsets.push(0);
        let mut shell = 1usize;
        let mut total = 0usize;
        for l in 0..=radius {
            total += shell;
            offsets.push(total);
            shell *= if l == 0 { q } else { q - 1 };
        }
        debug_assert_eq!(total, size);
        let mut last = vec![0u8; size];
        last[0] = IDENTITY_KEY;
        // Shell l+1 is filled from shell l in rank order; child ranks are
        // emitted monotonically, so the writes are sequential.
        for l in 0..radius {
            let mut child = offsets[l + 1];
            for r in offsets[l]..offsets[l + 1] {
                let forbidden = last[r] ^ 1;
                for key in 0..q as u8 {
                    if l > 0 && key == forbidden {
                        continue;
                    }
                    last[child] = key;
                    child += 1;
                }
            }
            debug_assert_eq!(child, offsets[l + 2]);
        }
        Ok(BallIndex {
            rank,
            radius,
            offsets,
            last,
        })
    }

    pub fn len(&self) -> usize {
        self.offsets[self.radius + 1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Word length of the word at the given rank.
    pub fn shell_of(&self, r: usize) -> usize {
        // Shells are tiny in number; linear scan beats binary search here.
        let mut l = 0;
        while self.offsets[l + 1] <= r {
            l += 1;
        }
        l
    }

    /// Rank of w * h where h has the given key, or None outside the ball.
    /// `len` is the length of w. Assumes h does not cancel (checked by the
    /// caller against `last`).
    #[inline]
    fn push(&self, r: usize, len: usize, key: u8) -> Option<(usize, usize)> {
        if len == self.radius {
            return None;
        }
        let q1 = 2 * self.rank - 1;
        let child = if len == 0 {
            1 + key as usize
        } else {
            let lexrank = r - self.offsets[len];
            let forbidden = self.last[r] ^ 1;
            let pos = key as usize - usize::from(key > forbidden);
            self.offsets[len + 1] + lexrank * q1 + pos
        };
        Some((child, len + 1))
    }

    /// Rank of w with its last letter removed; `len >= 1`.
    #[inline]
    fn pop(&self, r: usize, len: usize) -> (usize, usize) {
        debug_assert!(len >= 1);
        let parent = if len == 1 {
            0
        } else {
            let lexrank = r - self.offsets[len];
            self.offsets[len - 1] + lexrank / (2 * self.rank - 1)
        };
        (parent, len - 1)
    }

    /// Rank of w * v for a reduced word v given by 0-based letter keys, or
    /// None if the product leaves the ball.
    #[inline]
    pub fn apply(&self, r: usize, len: usize, keys: &[u8]) -> Option<usize> {
        let mut r = r;
        let mut len = len;
        let mut i = 0;
        // Both words are reduced, so cancellations happen only at the seam.
        while i < keys.len() && len > 0 && self.last[r] == keys[i] ^ 1 {
            let (pr, pl) = self.pop(r, len);
            r = pr;
            len = pl;
            i += 1;
        }
        while i < keys.len() {
            let (cr, cl) = self.push(r, len, keys[i])?;
            r = cr;
            len = cl;
            i += 1;
        }
        Some(r)
    }

    /// Rank of an explicit reduced word (for tests and spot checks).
    pub fn rank_of(&self, w: &ReducedWord) -> Option<usize> {
        let keys: Vec<u8> = w.letters().iter().map(|&l| key0(l)).collect();
        self.apply(0, 0, &keys)
    }
}

#[inline]
fn key0(letter: i32) -> u8 {
    (letter_key(letter) - 2) as u8
}

struct Pair {
    /// Letter keys of w_J^{-1} w_I, reduced.
    keys: Vec<u8>,
    coeff: CMat,
}

fn build_pairs(op: &FreeOperator) -> Result<(Vec<Pair>, CMat)> {
    let rank = match op.group() {
        Group::Free { rank } => *rank,
        Group::Product { ranks } => return Err(Error::NotSingleGroup(ranks.len())),
    };
    let m = op.coeffs().m();
    let mut diagonal = CMat::zeros(m, m);
    let mut pairs: Vec<Pair> = Vec::new();
    let support: Vec<(&ReducedWord, &CMat)> = op
        .coeffs()
        .entries()
        .iter()
        .map(|(idx, v)| match op.words().get(idx).expect("word present") {
            GroupWord::Single(w) => (w, v),
            GroupWord::Product(_) => unreachable!("single free group"),
        })
        .collect();
    let _ = rank;
    for (wi, ai) in &support {
        for (wj, aj) in &support {
            let coeff = ai.adjoint() * *aj;
            let v = wj.inverse().multiply(wi)?;
            if v.is_identity() {
                diagonal += coeff;
            } else {
                let keys: Vec<u8> = v.letters().iter().map(|&l| key0(l)).collect();
                if let Some(p) = pairs.iter_mut().find(|p| p.keys == keys) {
                    p.coeff += coeff;
                } else {
                    pairs.push(Pair { keys, coeff });
                }
            }
        }
    }
    Ok((pairs, diagonal))
}

/// Lower bound on ||X||_infinity by power iteration on the ball compression
/// of X*X. Requires an operator over a single free group.
pub fn opnorm_lower_trunc(op: &FreeOperator, options: &TruncOptions) -> Result<TruncResult> {
    let rank = match op.group() {
        Group::Free { rank } => *rank,
        Group::Product { ranks } => return Err(Error::NotSingleGroup(ranks.len())),
    };
    if op.coeffs().support_len() == 0 {
        return Ok(TruncResult {
            value: 0.0,
            radius: options.radius,
            ball: 0,
            iterations: 0,
            converged: true,
        });
    }
    let ball = BallIndex::build(rank, options.radius, options.ball_cap)?;
    let (pairs, diagonal) = build_pairs(op)?;
    let m = op.coeffs().m();
    let real_scalar = m == 1
        && diagonal[(0, 0)].im.abs() == 0.0
        && pairs.iter().all(|p| p.coeff[(0, 0)].im == 0.0);
    let (value, iterations, converged) = if real_scalar && ball.len() > F32_THRESHOLD {
        let pairs_f: Vec<(Vec<u8>, f32)> = pairs
            .iter()
            .map(|p| (p.keys.clone(), p.coeff[(0, 0)].re as f32))
            .collect();
        power_iterate_f32(&ball, &pairs_f, diagonal[(0, 0)].re as f32, options)
    } else {
        power_iterate_c64(&ball, &pairs, &diagonal, m, options)
    };
    Ok(TruncResult {
        value: value.max(0.0).sqrt(),
        radius: options.radius,
        ball: ball.len(),
        iterations,
        converged,
    })
}

fn power_iterate_f32(
    ball: &BallIndex,
    pairs: &[(Vec<u8>, f32)],
    diag: f32,
    options: &TruncOptions,
) -> (f64, usize, bool) {
    let len = ball.len();
    let mut x = vec![0f32; len];
    let mut y = vec![0f32; len];
    seed_start(&mut x, options.seed);
    normalize_f32(&mut x);
    let mut rayleigh = 0.0f64;
    let mut converged = false;
    let mut iter = 0;
    while iter < options.max_iter {
        iter += 1;
        if diag != 0.0 {
            for (yi, xi) in y.iter_mut().zip(&x) {
                *yi = diag * *xi;
            }
        } else {
            y.fill(0.0);
        }
        for (keys, c) in pairs {
            for l in 0..=ball.radius {
                for r in ball.offsets[l]..ball.offsets[l + 1] {
                    if let Some(t) = ball.apply(r, l, keys) {
                        y[t] += c * x[r];
                    }
                }
            }
        }
        let rq: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| *a as f64 * *b as f64)
            .sum();
        let delta = (rq - rayleigh).abs();
        rayleigh = rq;
        if delta <= options.tol * rayleigh.abs().max(1.0) {
            converged = true;
            break;
        }
        normalize_f32(&mut y);
        std::mem::swap(&mut x, &mut y);
    }
    (rayleigh, iter, converged)
}

fn power_iterate_c64(
    ball: &BallIndex,
    pairs: &[Pair],
    diagonal: &CMat,
    m: usize,
    options: &TruncOptions,
) -> (f64, usize, bool) {
    let len = ball.len();
    let mut x = vec![Complex64::new(0.0, 0.0); len * m];
    let mut y = vec![Complex64::new(0.0, 0.0); len * m];
    {
        let mut seed = vec![0f32; len];
        seed_start(&mut seed, options.seed);
        for (r, &s) in seed.iter().enumerate() {
            x[r * m] = Complex64::new(s as f64, 0.0);
        }
    }
    normalize_c64(&mut x);
    let apply_block = |c: &CMat, src: &[Complex64], dst: &mut [Complex64]| {
        for row in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for col in 0..m {
                acc += c[(row, col)] * src[col];
            }
            dst[row] += acc;
        }
    };
    let mut rayleigh = 0.0f64;
    let mut converged = false;
    let mut iter = 0;
    while iter < options.max_iter {
        iter += 1;
        y.fill(Complex64::new(0.0, 0.0));
        for l in 0..=ball.radius {
            for r in ball.offsets[l]..ball.offsets[l + 1] {
                let src = &x[r * m..(r + 1) * m];
                let mut block = vec![Complex64::new(0.0, 0.0); m];
                apply_block(diagonal, src, &mut block);
                for (b, v) in y[r * m..(r + 1) * m].iter_mut().zip(&block) {
                    *b += *v;
                }
            }
        }
        for pair in pairs {
            for l in 0..=ball.radius {
                for r in ball.offsets[l]..ball.offsets[l + 1] {
                    if let Some(t) = ball.apply(r, l, &pair.keys) {
                        apply_block(
                            &pair.coeff,
                            &x[r * m..(r + 1) * m],
                            &mut y[t * m..(t + 1) * m],
                        );
                    }
                }
            }
        }
        let rq: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        let delta = (rq - rayleigh).abs();
        rayleigh = rq;
        if delta <= options.tol * rayleigh.abs().max(1.0) {
            converged = true;
            break;
        }
        normalize_c64(&mut y);
        std::mem::swap(&mut x, &mut y);
    }
    (rayleigh, iter, converged)
}

/// Delta at the identity plus small seeded noise, so the start vector is
/// never orthogonal to the top eigenspace.
fn seed_start(x: &mut [f32], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    x[0] = 1.0;
    let k = x.len().min(4096);
    for v in x[..k].iter_mut().skip(1) {
        *v = 1e-3 * (rng.gen::<f32>() - 0.5);
    }
}

fn normalize_f32(x: &mut [f32]) {
    let norm: f64 = x.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
    if norm > 0.0 {
        let inv = (1.0 / norm) as f32;
        for v in x.iter_mut() {
            *v *= inv;
        }
    }
}

fn normalize_c64(x: &mut [Complex64]) {
    let norm: f64 = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        let inv = 1.0 / norm;
        for v in x.iter_mut() {
            *v *= inv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensors::{Alphabet, CoeffTensor};
    use crate::words::enumerate_ball;

    #[test]
    fn ball_index_matches_enumeration() {
        for n in 1..=3usize {
            for radius in 0..=4usize {
                let ball = BallIndex::build(n, radius, 10_000_000).unwrap();
                let words = enumerate_ball(n, radius, 10_000_000).unwrap();
                assert_eq!(ball.len(), words.len());
                for (r, w) in words.iter().enumerate() {
                    assert_eq!(ball.rank_of(w), Some(r), "n {n} radius {radius} r {r}");
                    let expected_last =
                        w.letters().last().map(|&l| key0(l)).unwrap_or(IDENTITY_KEY);
                    assert_eq!(ball.last[r], expected_last);
                    assert_eq!(ball.shell_of(r), w.len());
                }
            }
        }
    }

    #[test]
    fn ball_apply_matches_group_multiplication() {
        let n = 2;
        let radius = 4;
        let ball = BallIndex::build(n, radius, 1_000_000).unwrap();
        let words = enumerate_ball(n, radius, 1_000_000).unwrap();
        let factors = enumerate_ball(n, 2, 1_000_000).unwrap();
        for (r, w) in words.iter().enumerate() {
            for v in &factors {
                let keys: Vec<u8> = v.letters().iter().map(|&l| key0(l)).collect();
                let product = w.multiply(v).unwrap();
                let expected = if product.len() <= radius {
                    ball.rank_of(&product)
                } else {
                    None
                };
                assert_eq!(ball.apply(r, w.len(), &keys), expected, "{w} * {v}");
            }
        }
    }

    #[test]
    fn ball_too_large_errors() {
        assert!(matches!(
            BallIndex::build(3, 12, 1000),
            Err(Error::BallTooLarge { .. })
        ));
    }

    fn generator_sum(n: usize) -> FreeOperator {
        let mut t = CoeffTensor::zero(n, 1, 1, Alphabet::Generators);
        for i in 0..n {
            t.set_scalar(vec![i], Complex64::new(1.0, 0.0)).unwrap();
        }
        FreeOperator::plain(t)
    }

    #[test]
    fn single_generator_norm_one() {
        let mut t = CoeffTensor::zero(2, 1, 1, Alphabet::Generators);
        t.set_scalar(vec![0], Complex64::new(1.0, 0.0)).unwrap();
        let op = FreeOperator::plain(t);
        let opts = TruncOptions {
            radius: 8,
            ..TruncOptions::default()
        };
        let r = opnorm_lower_trunc(&op, &opts).unwrap();
        assert!(r.value <= 1.0 + 1e-9);
        assert!(r.value > 0.999, "{}", r.value);
    }

    #[test]
    fn generator_sum_approaches_haagerup_value() {
        // ||sum_{i<=n} lambda(g_i)|| = 2 sqrt(n-1) for n >= 2; the ball
        // compression approaches it from below as the radius grows.
        let op = generator_sum(2);
        let target = 2.0;
        let mut prev = 0.0;
        for radius in [2usize, 4, 6, 8] {
            let opts = TruncOptions {
                radius,
                ..TruncOptions::default()
            };
            let r = opnorm_lower_trunc(&op, &opts).unwrap();
            assert!(r.value <= target + 1e-6, "radius {radius}: {}", r.value);
            assert!(r.value >= prev - 1e-9, "radius {radius} not monotone");
            prev = r.value;
        }
        assert!(prev > target * 0.95, "radius 8 bound too weak: {prev}");
    }

    #[test]
    fn f32_and_c64_paths_agree() {
        let op = generator_sum(3);
        let base = TruncOptions {
            radius: 5,
            tol: 1e-10,
            ..TruncOptions::default()
        };
        let generic = opnorm_lower_trunc(&op, &base).unwrap();
        // Force the f32 path by dropping the threshold via a tiny ball cap
        // is not possible; instead run it directly.
        let ball = BallIndex::build(3, 5, 10_000_000).unwrap();
        let (pairs, diagonal) = build_pairs(&op).unwrap();
        let pairs_f: Vec<(Vec<u8>, f32)> = pairs
            .iter()
            .map(|p| (p.keys.clone(), p.coeff[(0, 0)].re as f32))
            .collect();
        let (rq, _, _) = power_iterate_f32(&ball, &pairs_f, diagonal[(0, 0)].re as f32, &base);
        let fast = rq.max(0.0).sqrt();
        assert!(
            (generic.value - fast).abs() < 1e-4 * generic.value.max(1.0),
            "{} vs {}",
            generic.value,
            fast
        );
    }

    #[test]
    fn matrix_coefficients_lower_bound() {
        // a_1 = e_12, a_2 = e_21: X*X has norm 2 witnessed inside a small
        // ball, and the compression must stay below the true norm.
        let mut t = CoeffTensor::zero(2, 1, 2, Alphabet::Generators);
        let mut e12 = CMat::zeros(2, 2);
        e12[(0, 1)] = Complex64::new(1.0, 0.0);
        let mut e21 = CMat::zeros(2, 2);
        e21[(1, 0)] = Complex64::new(1.0, 0.0);
        t.set(vec![0], e12).unwrap();
        t.set(vec![1], e21).unwrap();
        let op = FreeOperator::plain(t);
        let opts = TruncOptions {
            radius: 6,
            ..TruncOptions::default()
        };
        let r = opnorm_lower_trunc(&op, &opts).unwrap();
        // Row-split bound: || (sum a_i a_i^*)^{1/2} || = 1 and the operator
        // acts like a free shift; norm is at most 2 and at least 1.
        assert!(r.value >= 1.0 - 1e-6, "{}", r.value);
        assert!(r.value <= 2.0 + 1e-6, "{}", r.value);
    }

    #[test]
    fn product_group_rejected() {
        let t = CoeffTensor::zero(2, 2, 1, Alphabet::Generators);
        let op = FreeOperator::tensor_power(t);
        assert!(matches!(
            opnorm_lower_trunc(&op, &TruncOptions::default()),
            Err(Error::NotSingleGroup(_))
        ));
    }
}
