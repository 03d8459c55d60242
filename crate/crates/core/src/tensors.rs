//! Coefficient tensors over multi-indices: matricizations, partition splits,
//! word maps into free groups, the cancellation validator for the signed
//! alphabet, and the tensor interchange file format.
//!
//! Indices are 0-based internally; file I/O and display are 1-based.

use crate::error::{Error, Result};
use crate::words::{h_letter, ReducedWord};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub type CMat = DMatrix<Complex64>;
pub type MultiIndex = Vec<usize>;

/// Default cap on dense matricization rows/cols; the n^k blowup must fail
/// loudly rather than exhaust memory.
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Which index alphabet a tensor is written in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alphabet {
    /// Indices range over the n generators.
    Generators,
    /// Indices range over the 2n signed letters h_1, ..., h_{2n}.
    Signed,
}

impl Alphabet {
    pub fn size(self, n: usize) -> usize {
        match self {
            Alphabet::Generators => n,
            Alphabet::Signed => 2 * n,
        }
    }
}

/// A sparse family of m x m complex coefficient matrices indexed by [A]^d.
/// Absent indices are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffTensor {
    n: usize,
    d: usize,
    m: usize,
    alphabet: Alphabet,
    entries: BTreeMap<MultiIndex, CMat>,
}

impl CoeffTensor {
    pub fn zero(n: usize, d: usize, m: usize, alphabet: Alphabet) -> Self {
        CoeffTensor {
            n,
            d,
            m,
            alphabet,
            entries: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet.size(self.n)
    }

    pub fn entries(&self) -> &BTreeMap<MultiIndex, CMat> {
        &self.entries
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    fn check_index(&self, index: &[usize]) -> Result<()> {
        let a = self.alphabet_size();
        if index.len() != self.d || index.iter().any(|&i| i >= a) {
            return Err(Error::IndexOutOfRange {
                index: index.to_vec(),
                alphabet: a,
                degree: self.d,
            });
        }
        Ok(())
    }

    /// Sets (or clears, when zero) the coefficient at a 0-based index.
    pub fn set(&mut self, index: MultiIndex, value: CMat) -> Result<()> {
        self.check_index(&index)?;
        if value.nrows() != self.m || value.ncols() != self.m {
            return Err(Error::NonSquareMatrix { m: self.m });
        }
        if value.iter().all(|c| c.norm_sqr() == 0.0) {
            self.entries.remove(&index);
        } else {
            self.entries.insert(index, value);
        }
        Ok(())
    }

    /// Convenience for m = 1 scalar tensors.
    pub fn set_scalar(&mut self, index: MultiIndex, value: Complex64) -> Result<()> {
        self.set(index, CMat::from_element(1, 1, value))
    }

    pub fn get(&self, index: &[usize]) -> Option<&CMat> {
        self.entries.get(index)
    }

    pub fn scale(&self, factor: Complex64) -> CoeffTensor {
        let mut out = self.clone();
        for v in out.entries.values_mut() {
            *v *= factor;
        }
        out.entries.retain(|_, v| v.iter().any(|c| c.norm_sqr() != 0.0));
        out
    }

    pub fn add(&self, other: &CoeffTensor) -> Result<CoeffTensor> {
        if (self.n, self.d, self.m, self.alphabet)
            != (other.n, other.d, other.m, other.alphabet)
        {
            return Err(Error::ShapeMismatch(format!(
                "({},{},{},{:?}) vs ({},{},{},{:?})",
                self.n, self.d, self.m, self.alphabet, other.n, other.d, other.m, other.alphabet
            )));
        }
        let mut out = self.clone();
        for (idx, v) in &other.entries {
            match out.entries.get_mut(idx) {
                Some(existing) => *existing += v,
                None => {
                    out.entries.insert(idx.clone(), v.clone());
                }
            }
        }
        out.entries.retain(|_, v| v.iter().any(|c| c.norm_sqr() != 0.0));
        Ok(out)
    }

    /// Frobenius mass: sqrt of the sum of squared entry moduli.
    pub fn frobenius(&self) -> f64 {
        self.entries
            .values()
            .flat_map(|v| v.iter())
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// An ordered split (alpha, beta) of {1, ..., d}; alpha holds the row
/// indices of the matricization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionSplit {
    d: usize,
    alpha: Vec<usize>,
}

impl PartitionSplit {
    /// `alpha` must be a strictly increasing subset of {1, ..., d}.
    pub fn new(d: usize, alpha: Vec<usize>) -> Result<Self> {
        let ok = alpha.windows(2).all(|w| w[0] < w[1])
            && alpha.iter().all(|&k| k >= 1 && k <= d);
        if !ok {
            return Err(Error::ShapeMismatch(format!(
                "alpha {alpha:?} is not a sorted subset of 1..={d}"
            )));
        }
        Ok(PartitionSplit { d, alpha })
    }

    /// The consecutive split alpha = {1, ..., k}.
    pub fn consecutive(d: usize, k: usize) -> Self {
        PartitionSplit {
            d,
            alpha: (1..=k.min(d)).collect(),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> &[usize] {
        &self.alpha
    }

    pub fn beta(&self) -> Vec<usize> {
        (1..=self.d).filter(|k| !self.alpha.contains(k)).collect()
    }

    /// T(alpha, beta) = max(alpha) - min(beta), with max(emptyset) = 0 and
    /// min(emptyset) = d + 1. The split is transposed iff this is positive.
    pub fn transposition_number(&self) -> i64 {
        let a = self.alpha.last().copied().unwrap_or(0) as i64;
        let b = self.beta().first().copied().unwrap_or(self.d + 1) as i64;
        a - b
    }

    pub fn is_transposed(&self) -> bool {
        self.transposition_number() > 0
    }

    /// True iff alpha = {1, ..., k} for some k.
    pub fn is_consecutive(&self) -> bool {
        self.alpha.iter().enumerate().all(|(i, &k)| k == i + 1)
    }
}

/// All 2^d splits, with alpha ranging over subsets in binary-counter order
/// (bit k of the counter selects position k+1).
pub fn enumerate_partitions(d: usize) -> Vec<PartitionSplit> {
    (0u64..1 << d)
        .map(|mask| PartitionSplit {
            d,
            alpha: (1..=d).filter(|k| mask >> (k - 1) & 1 == 1).collect(),
        })
        .collect()
}

/// Big-endian flattening of a multi-index through a split: the row is read
/// off the alpha positions in ascending order (first position varies
/// slowest), likewise the column over beta.
pub fn flatten_index(index: &[usize], split: &PartitionSplit, a_size: usize) -> (usize, usize) {
    let mut row = 0usize;
    for &k in split.alpha() {
        row = row * a_size + index[k - 1];
    }
    let mut col = 0usize;
    for k in split.beta() {
        col = col * a_size + index[k - 1];
    }
    (row, col)
}

fn checked_pow(base: usize, exp: usize, cap: usize) -> Option<usize> {
    let mut acc = 1usize;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
        if acc > cap {
            return None;
        }
    }
    Some(acc)
}

/// Dense matricization of shape (m * A^|alpha|) x (m * A^|beta|) with the
/// coefficient of index I placed as the block at (row(I), col(I)).
pub fn reshape(t: &CoeffTensor, split: &PartitionSplit, cap: usize) -> Result<CMat> {
    assert_eq!(split.d(), t.d(), "split degree must match tensor degree");
    let a = t.alphabet_size();
    let m = t.m();
    let rows = checked_pow(a, split.alpha().len(), cap / m.max(1))
        .map(|b| b * m)
        .filter(|&r| r <= cap);
    let cols = checked_pow(a, split.beta().len(), cap / m.max(1))
        .map(|b| b * m)
        .filter(|&c| c <= cap);
    let (rows, cols) = match (rows, cols) {
        (Some(r), Some(c)) => (r, c),
        _ => {
            return Err(Error::TooLarge {
                rows: rows.unwrap_or(usize::MAX),
                cols: cols.unwrap_or(usize::MAX),
                cap,
            })
        }
    };
    let mut out = CMat::zeros(rows, cols);
    for (index, value) in t.entries() {
        let (r, c) = flatten_index(index, split, a);
        out.view_mut((r * m, c * m), (m, m)).copy_from(value);
    }
    Ok(out)
}

/// Word of the plain generator map: I = (i_1, ..., i_d) to g_{i_1} ... g_{i_d}
/// in F_n. All letters positive, already reduced.
pub fn word_map_plain(index: &[usize], n: usize) -> ReducedWord {
    let letters: Vec<i32> = index.iter().map(|&i| (i + 1) as i32).collect();
    ReducedWord::reduce(&letters, n).expect("positive letters in range")
}

/// Separated-alphabet word in F_{nd}: position s (1-based) contributes the
/// generator (s-1)*n + i_s + 1.
pub fn word_map_separated(index: &[usize], n: usize, d: usize) -> ReducedWord {
    let letters: Vec<i32> = index
        .iter()
        .enumerate()
        .map(|(s, &i)| (s * n + i + 1) as i32)
        .collect();
    ReducedWord::reduce(&letters, n * d).expect("positive letters in range")
}

/// Signed-alphabet word h_{i_1} ... h_{i_d} in F_n, returned fully reduced.
/// Callers needing length-d words must first check `validate_cancellation`.
pub fn word_map_signed(index: &[usize], n: usize) -> ReducedWord {
    let letters: Vec<i32> = index
        .iter()
        .map(|&i| h_letter(i + 1, n).expect("index in signed range"))
        .collect();
    ReducedWord::reduce(&letters, n).expect("letters in range")
}

/// The cancellation property: false iff some adjacent pair satisfies
/// i_s == n + i_{s+1} (mod 2n) in 1-based values, i.e. h_{i_s} and
/// h_{i_{s+1}} are mutually inverse.
pub fn validate_cancellation(index: &[usize], n: usize) -> bool {
    index
        .windows(2)
        .all(|w| (w[0] + 1) % (2 * n) != (n + w[1] + 1) % (2 * n))
}

/// Zeroes every coefficient whose index violates the cancellation property.
/// Idempotent, linear, and equal to the composition of the d-1 adjacent-pair
/// diagonal maskings in any order.
pub fn apply_projection_q(t: &CoeffTensor) -> CoeffTensor {
    let mut out = t.clone();
    out.entries.retain(|idx, _| validate_cancellation(idx, t.n()));
    out
}

/// Inverse of a word map on its image: the 0-based index of a word, when the
/// word is in the span of the selected alphabet's degree-d words.
pub fn index_of_word(word: &ReducedWord, d: usize, alphabet: Alphabet, n: usize) -> Option<MultiIndex> {
    if word.len() != d || word.rank() != n {
        return None;
    }
    match alphabet {
        Alphabet::Generators => word
            .letters()
            .iter()
            .map(|&l| if l > 0 { Some(l as usize - 1) } else { None })
            .collect(),
        Alphabet::Signed => Some(
            word.letters()
                .iter()
                .map(|&l| {
                    if l > 0 {
                        l as usize - 1
                    } else {
                        n + (-l) as usize - 1
                    }
                })
                .collect(),
        ),
    }
}

/// Coefficient-level projection onto the degree-d spanning words: keeps
/// exactly the coefficients of words in the image of the selected word map
/// and indexes them back into a tensor; all other words are dropped.
pub fn project_to_degree(
    f: &[(ReducedWord, CMat)],
    d: usize,
    alphabet: Alphabet,
    n: usize,
    m: usize,
) -> Result<CoeffTensor> {
    let mut out = CoeffTensor::zero(n, d, m, alphabet);
    for (word, value) in f {
        if let Some(index) = index_of_word(word, d, alphabet, n) {
            if value.nrows() != m || value.ncols() != m {
                return Err(Error::NonSquareMatrix { m });
            }
            let acc = match out.entries.get_mut(&index) {
                Some(existing) => {
                    *existing += value;
                    continue;
                }
                None => value.clone(),
            };
            out.entries.insert(index, acc);
        }
    }
    out.entries.retain(|_, v| v.iter().any(|c| c.norm_sqr() != 0.0));
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct EntryFile {
    /// 1-based multi-index of length d.
    index: Vec<usize>,
    re: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    im: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct TensorFile {
    n: usize,
    d: usize,
    m: usize,
    alphabet: Alphabet,
    entries: Vec<EntryFile>,
}

fn matrix_rows(v: &CMat, imag: bool) -> Vec<Vec<f64>> {
    (0..v.nrows())
        .map(|r| {
            (0..v.ncols())
                .map(|c| if imag { v[(r, c)].im } else { v[(r, c)].re })
                .collect()
        })
        .collect()
}

pub fn to_json(t: &CoeffTensor) -> serde_json::Value {
    let entries = t
        .entries()
        .iter()
        .map(|(idx, v)| EntryFile {
            index: idx.iter().map(|&i| i + 1).collect(),
            re: matrix_rows(v, false),
            im: if v.iter().any(|c| c.im != 0.0) {
                Some(matrix_rows(v, true))
            } else {
                None
            },
        })
        .collect();
    serde_json::to_value(TensorFile {
        n: t.n(),
        d: t.d(),
        m: t.m(),
        alphabet: t.alphabet(),
        entries,
    })
    .expect("tensor serialization cannot fail")
}

pub fn from_json(value: serde_json::Value) -> Result<CoeffTensor> {
    let file: TensorFile =
        serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
    let mut out = CoeffTensor::zero(file.n, file.d, file.m, file.alphabet);
    let a = out.alphabet_size();
    for entry in file.entries {
        if entry.index.len() != file.d {
            return Err(Error::Schema(format!(
                "index {:?} has length {}, expected {}",
                entry.index,
                entry.index.len(),
                file.d
            )));
        }
        if entry.index.iter().any(|&i| i == 0 || i > a) {
            return Err(Error::IndexOutOfRange {
                index: entry.index.clone(),
                alphabet: a,
                degree: file.d,
            });
        }
        let index: MultiIndex = entry.index.iter().map(|&i| i - 1).collect();
        if out.entries.contains_key(&index) {
            return Err(Error::DuplicateIndex(entry.index));
        }
        let check_shape = |rows: &Vec<Vec<f64>>| {
            rows.len() == file.m && rows.iter().all(|r| r.len() == file.m)
        };
        if !check_shape(&entry.re) || entry.im.as_ref().is_some_and(|im| !check_shape(im)) {
            return Err(Error::NonSquareMatrix { m: file.m });
        }
        let mut v = CMat::zeros(file.m, file.m);
        for r in 0..file.m {
            for c in 0..file.m {
                let im = entry.im.as_ref().map_or(0.0, |im| im[r][c]);
                v[(r, c)] = Complex64::new(entry.re[r][c], im);
            }
        }
        out.entries.insert(index, v);
    }
    out.entries.retain(|_, v| v.iter().any(|c| c.norm_sqr() != 0.0));
    Ok(out)
}

pub fn save_tensor(t: &CoeffTensor, path: &std::path::Path) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(&to_json(t))?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_tensor(path: &std::path::Path) -> Result<CoeffTensor> {
    let bytes = std::fs::read(path)?;
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| Error::Schema(e.to_string()))?;
    from_json(value)
}

/// The 2-indexed family a_ij = e_ji in S_p^n: the counterexample showing the
/// transposed split is not controlled by the consecutive ones.
pub fn counterexample_tensor(n: usize) -> CoeffTensor {
    let mut t = CoeffTensor::zero(n, 2, n, Alphabet::Generators);
    for i in 0..n {
        for j in 0..n {
            let mut v = CMat::zeros(n, n);
            v[(j, i)] = Complex64::new(1.0, 0.0);
            t.set(vec![i, j], v).expect("in range");
        }
    }
    t
}

/// Seeded dense-or-sparse random tensor: independent standard-normal real
/// and imaginary parts, each index kept with probability `density`. Signed
/// tensors are passed through the projection Q so every stored index
/// satisfies the cancellation property.
pub fn random_gaussian_tensor(
    n: usize,
    d: usize,
    m: usize,
    alphabet: Alphabet,
    density: f64,
    seed: u64,
) -> CoeffTensor {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let normal = |rng: &mut rand_chacha::ChaCha8Rng| {
        // Box-Muller; two uniforms per normal keeps the stream layout simple.
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let mut t = CoeffTensor::zero(n, d, m, alphabet);
    let a = alphabet.size(n);
    let total = a.pow(d as u32);
    for flat in 0..total {
        let mut index = vec![0usize; d];
        let mut rem = flat;
        for s in (0..d).rev() {
            index[s] = rem % a;
            rem /= a;
        }
        let keep = rng.gen::<f64>() < density;
        let v = CMat::from_fn(m, m, |_, _| {
            Complex64::new(normal(&mut rng), normal(&mut rng))
        });
        if keep {
            t.set(index, v).expect("index in range");
        }
    }
    if alphabet == Alphabet::Signed {
        apply_projection_q(&t)
    } else {
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ident(m: usize) -> CMat {
        CMat::identity(m, m)
    }

    fn random_tensor(n: usize, d: usize, m: usize, alphabet: Alphabet, seed: u64) -> CoeffTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = CoeffTensor::zero(n, d, m, alphabet);
        let a = alphabet.size(n);
        let total: usize = a.pow(d as u32);
        for flat in 0..total {
            let mut index = vec![0usize; d];
            let mut rem = flat;
            for s in (0..d).rev() {
                index[s] = rem % a;
                rem /= a;
            }
            let v = CMat::from_fn(m, m, |_, _| {
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            t.set(index, v).unwrap();
        }
        t
    }

    #[test]
    fn flatten_examples() {
        let s1 = PartitionSplit::new(2, vec![1]).unwrap();
        assert_eq!(flatten_index(&[2, 0], &s1, 3), (2, 0));
        let s12 = PartitionSplit::new(2, vec![1, 2]).unwrap();
        assert_eq!(flatten_index(&[1, 2], &s12, 3), (5, 0));
        let s0 = PartitionSplit::new(2, vec![]).unwrap();
        assert_eq!(flatten_index(&[1, 2], &s0, 3), (0, 5));
    }

    #[test]
    fn flatten_bijective_small() {
        for (n, d) in [(2usize, 3usize), (3, 2)] {
            for split in enumerate_partitions(d) {
                let mut seen = std::collections::BTreeSet::new();
                for flat in 0..n.pow(d as u32) {
                    let mut index = vec![0usize; d];
                    let mut rem = flat;
                    for s in (0..d).rev() {
                        index[s] = rem % n;
                        rem /= n;
                    }
                    seen.insert(flatten_index(&index, &split, n));
                }
                assert_eq!(seen.len(), n.pow(d as u32));
            }
        }
    }

    #[test]
    fn reshape_single_entry() {
        let mut t = CoeffTensor::zero(2, 2, 2, Alphabet::Generators);
        t.set(vec![1, 0], ident(2)).unwrap();
        let split = PartitionSplit::new(2, vec![1]).unwrap();
        let mat = reshape(&t, &split, DEFAULT_DENSE_CAP).unwrap();
        assert_eq!(mat.nrows(), 4);
        assert_eq!(mat.ncols(), 4);
        for r in 0..4 {
            for c in 0..4 {
                let expected = if (r, c) == (2, 0) || (r, c) == (3, 1) { 1.0 } else { 0.0 };
                assert_eq!(mat[(r, c)].re, expected);
            }
        }
    }

    #[test]
    fn reshape_counterexample_full_split_spectrum() {
        // a_ij = e_ji with alpha = {1,2}: the n^2 x 1 block column has
        // singular values sqrt(n) with multiplicity n.
        let n = 3;
        let t = counterexample_tensor(n);
        let split = PartitionSplit::new(2, vec![1, 2]).unwrap();
        let mat = reshape(&t, &split, DEFAULT_DENSE_CAP).unwrap();
        let mut sv: Vec<f64> = mat.svd(false, false).singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (i, s) in sv.iter().enumerate() {
            let expected = if i < n { (n as f64).sqrt() } else { 0.0 };
            assert!((s - expected).abs() < 1e-12, "sv[{i}] = {s}");
        }
    }

    #[test]
    fn reshape_middle_split_is_identity_like() {
        // a_ij = e_ji with alpha = {1}: all n^2 singular values equal 1.
        let n = 3;
        let t = counterexample_tensor(n);
        let split = PartitionSplit::new(2, vec![1]).unwrap();
        let mat = reshape(&t, &split, DEFAULT_DENSE_CAP).unwrap();
        let sv = mat.svd(false, false).singular_values;
        assert_eq!(sv.len(), n * n);
        for s in sv.iter() {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reshape_zero_tensor() {
        let t = CoeffTensor::zero(2, 2, 1, Alphabet::Generators);
        let split = PartitionSplit::consecutive(2, 1);
        let mat = reshape(&t, &split, DEFAULT_DENSE_CAP).unwrap();
        assert!(mat.iter().all(|c| c.norm_sqr() == 0.0));
    }

    #[test]
    fn reshape_cap_errors() {
        let t = CoeffTensor::zero(10, 6, 1, Alphabet::Generators);
        let split = PartitionSplit::consecutive(6, 6);
        assert!(matches!(
            reshape(&t, &split, DEFAULT_DENSE_CAP),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn partition_counts() {
        assert_eq!(enumerate_partitions(2).len(), 4);
        assert_eq!(enumerate_partitions(0).len(), 1);
        assert_eq!(enumerate_partitions(3).len(), 8);
    }

    #[test]
    fn transposition_numbers() {
        let s = PartitionSplit::new(2, vec![1]).unwrap();
        assert_eq!(s.transposition_number(), -1);
        assert!(!s.is_transposed());
        let s = PartitionSplit::new(2, vec![2]).unwrap();
        assert_eq!(s.transposition_number(), 1);
        assert!(s.is_transposed());
        let s = PartitionSplit::new(2, vec![]).unwrap();
        assert_eq!(s.transposition_number(), -1);
        assert!(!s.is_transposed());
    }

    #[test]
    fn word_maps() {
        assert_eq!(word_map_plain(&[0, 1], 2).letters(), &[1, 2]);
        assert_eq!(word_map_plain(&[0, 0], 2).letters(), &[1, 1]);
        assert_eq!(word_map_plain(&[], 2).letters(), &[] as &[i32]);

        assert_eq!(word_map_separated(&[0, 1], 2, 2).letters(), &[1, 4]);
        assert_eq!(
            word_map_separated(&[0], 2, 1).letters(),
            word_map_plain(&[0], 2).letters()
        );
        assert_eq!(word_map_separated(&[1, 1, 1], 2, 3).letters(), &[2, 4, 6]);

        assert!(word_map_signed(&[0, 2], 2).is_identity());
        assert_eq!(word_map_signed(&[0, 1], 2).letters(), &[1, 2]);
        assert_eq!(word_map_signed(&[2, 3], 2).letters(), &[-1, -2]);
    }

    #[test]
    fn cancellation_examples() {
        // 1-based (1,3) with n=2: 1 == 2 + 3 (mod 4) -> cancels.
        assert!(!validate_cancellation(&[0, 2], 2));
        assert!(validate_cancellation(&[0, 1], 2));
        assert!(!validate_cancellation(&[2, 0], 2));
    }

    #[test]
    fn cancellation_matches_word_length() {
        for n in 1..=3usize {
            for d in 1..=3usize {
                let a = 2 * n;
                for flat in 0..a.pow(d as u32) {
                    let mut index = vec![0usize; d];
                    let mut rem = flat;
                    for s in (0..d).rev() {
                        index[s] = rem % a;
                        rem /= a;
                    }
                    let word = word_map_signed(&index, n);
                    if validate_cancellation(&index, n) {
                        assert_eq!(word.len(), d, "index {index:?}");
                    } else {
                        assert!(word.len() < d, "index {index:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn projection_q() {
        let mut t = CoeffTensor::zero(2, 2, 1, Alphabet::Signed);
        t.set_scalar(vec![0, 2], Complex64::new(1.0, 0.0)).unwrap();
        let q = apply_projection_q(&t);
        assert_eq!(q.support_len(), 0);

        let valid = random_tensor(2, 2, 1, Alphabet::Signed, 3);
        let q1 = apply_projection_q(&valid);
        assert_eq!(apply_projection_q(&q1), q1);
    }

    #[test]
    fn projection_q_masking_order_irrelevant() {
        // Masking pairs (1,2) then (2,3) equals (2,3) then (1,2) for d=3.
        let t = random_tensor(2, 3, 1, Alphabet::Signed, 11);
        let mask = |t: &CoeffTensor, s: usize| {
            let n = t.n();
            let mut out = t.clone();
            out.entries
                .retain(|idx, _| validate_cancellation(&idx[s..s + 2], n));
            out
        };
        let a = mask(&mask(&t, 0), 1);
        let b = mask(&mask(&t, 1), 0);
        assert_eq!(a, b);
        assert_eq!(a, apply_projection_q(&t));
    }

    #[test]
    fn projection_q_linear() {
        let t1 = random_tensor(2, 2, 2, Alphabet::Signed, 5);
        let t2 = random_tensor(2, 2, 2, Alphabet::Signed, 6);
        let s = Complex64::new(0.7, -0.3);
        let left = apply_projection_q(&t1.scale(s).add(&t2).unwrap());
        let right = apply_projection_q(&t1).scale(s).add(&apply_projection_q(&t2)).unwrap();
        for (idx, v) in left.entries() {
            let w = right.get(idx).unwrap();
            assert!((v - w).iter().all(|c| c.norm() < 1e-12));
        }
        assert_eq!(left.support_len(), right.support_len());
    }

    #[test]
    fn project_to_degree_examples() {
        let a = ident(1);
        let b = CMat::from_element(1, 1, Complex64::new(2.0, 0.0));
        let f = vec![
            (ReducedWord::reduce(&[], 2).unwrap(), a),
            (ReducedWord::reduce(&[1, 2], 2).unwrap(), b.clone()),
        ];
        let t = project_to_degree(&f, 2, Alphabet::Generators, 2, 1).unwrap();
        assert_eq!(t.support_len(), 1);
        assert_eq!(t.get(&[0, 1]).unwrap()[(0, 0)].re, 2.0);

        let t = project_to_degree(&[], 2, Alphabet::Generators, 2, 1).unwrap();
        assert_eq!(t.support_len(), 0);

        let f = vec![(ReducedWord::reduce(&[1, -2], 2).unwrap(), b)];
        let t = project_to_degree(&f, 2, Alphabet::Generators, 2, 1).unwrap();
        assert_eq!(t.support_len(), 0);
    }

    #[test]
    fn project_to_degree_inverts_word_maps() {
        for alphabet in [Alphabet::Generators, Alphabet::Signed] {
            let t = match alphabet {
                Alphabet::Generators => random_tensor(2, 2, 2, alphabet, 7),
                Alphabet::Signed => apply_projection_q(&random_tensor(2, 2, 2, alphabet, 7)),
            };
            let f: Vec<(ReducedWord, CMat)> = t
                .entries()
                .iter()
                .map(|(idx, v)| {
                    let w = match alphabet {
                        Alphabet::Generators => word_map_plain(idx, t.n()),
                        Alphabet::Signed => word_map_signed(idx, t.n()),
                    };
                    (w, v.clone())
                })
                .collect();
            let back = project_to_degree(&f, t.d(), alphabet, t.n(), t.m()).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn tensor_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        let t = random_tensor(2, 2, 2, Alphabet::Generators, 42);
        save_tensor(&t, &path).unwrap();
        let back = load_tensor(&path).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn tensor_file_errors() {
        let bad_len = serde_json::json!({
            "n": 2, "d": 2, "m": 1, "alphabet": "generators",
            "entries": [{"index": [1], "re": [[1.0]]}]
        });
        assert!(matches!(from_json(bad_len), Err(Error::Schema(_))));

        let dup = serde_json::json!({
            "n": 2, "d": 1, "m": 1, "alphabet": "generators",
            "entries": [
                {"index": [1], "re": [[1.0]]},
                {"index": [1], "re": [[2.0]]}
            ]
        });
        assert!(matches!(from_json(dup), Err(Error::DuplicateIndex(_))));

        let out_of_range = serde_json::json!({
            "n": 2, "d": 1, "m": 1, "alphabet": "generators",
            "entries": [{"index": [3], "re": [[1.0]]}]
        });
        assert!(matches!(from_json(out_of_range), Err(Error::IndexOutOfRange { .. })));

        let non_square = serde_json::json!({
            "n": 2, "d": 1, "m": 2, "alphabet": "generators",
            "entries": [{"index": [1], "re": [[1.0, 0.0]]}]
        });
        assert!(matches!(from_json(non_square), Err(Error::NonSquareMatrix { .. })));

        let empty = serde_json::json!({
            "n": 2, "d": 2, "m": 1, "alphabet": "generators", "entries": []
        });
        let t = from_json(empty).unwrap();
        assert_eq!(t.support_len(), 0);
        assert_eq!((t.n(), t.d(), t.m()), (2, 2, 1));
    }

    proptest! {
        #[test]
        fn json_round_trip_random(seed in 0u64..50) {
            let t = random_tensor(2, 2, 2, Alphabet::Generators, seed);
            let back = from_json(to_json(&t)).unwrap();
            prop_assert_eq!(t, back);
        }
    }
}
