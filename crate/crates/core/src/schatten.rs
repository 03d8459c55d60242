//! Schatten p-norms of matricizations, the intersection norm over the
//! consecutive splits, the full partition spectrum, and the sum norm for
//! 1 <= p <= 2 computed by convex minimization with dual certificates.

use crate::error::{Error, Result};
use crate::tensors::{enumerate_partitions, reshape, CMat, CoeffTensor, PartitionSplit};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

/// An L_p exponent: a finite real p >= 1 or infinity. Infinity is held
/// explicitly, never as a large float.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::BadExponent(p));
        }
        Ok(Exponent::Finite(p))
    }

    pub const fn infinity() -> Self {
        Exponent::Infinity
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    /// Conjugate exponent: 1/p + 1/p' = 1, with 1 and infinity paired.
    pub fn conjugate(&self) -> Exponent {
        match *self {
            Exponent::Infinity => Exponent::Finite(1.0),
            Exponent::Finite(p) if p == 1.0 => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }

    /// For even integer exponents, the power q = p/2 used by the moment
    /// oracle.
    pub fn as_even_half(&self) -> Option<u32> {
        match *self {
            Exponent::Finite(p) if p.fract() == 0.0 && (p as u64) % 2 == 0 && p >= 2.0 => {
                Some((p as u32) / 2)
            }
            _ => None,
        }
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("inf") || s == "∞" {
            return Ok(Exponent::Infinity);
        }
        let p: f64 = s.parse().map_err(|_| Error::BadExponent(f64::NAN))?;
        Exponent::new(p)
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => serializer.serialize_f64(*p),
            Exponent::Infinity => serializer.serialize_str("inf"),
        }
    }
}

/// Compensated (Kahan) summation over values in the given order.
fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

fn singular_values_desc(m: &CMat) -> Result<Vec<f64>> {
    if m.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let mut sv: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(sv)
}

/// Schatten p-norm from singular values: (sum sigma^p)^{1/p}, and the
/// largest singular value for p = infinity.
pub fn schatten_norm(m: &CMat, p: Exponent) -> Result<f64> {
    let sv = singular_values_desc(m)?;
    Ok(match p {
        Exponent::Infinity => sv.first().copied().unwrap_or(0.0),
        Exponent::Finite(p) => {
            let top = sv.first().copied().unwrap_or(0.0);
            if top == 0.0 {
                0.0
            } else {
                // Scale by the top value so the powers stay well conditioned.
                let sum = kahan_sum(sv.iter().map(|s| (s / top).powf(p)));
                top * sum.powf(1.0 / p)
            }
        }
    })
}

/// Trace pairing <A, B> = sum_I trace(b_I^dagger a_I). Sesquilinear,
/// conjugate-linear in the second argument's entries.
pub fn pairing(a: &CoeffTensor, b: &CoeffTensor) -> Result<Complex64> {
    if (a.n(), a.d(), a.m(), a.alphabet()) != (b.n(), b.d(), b.m(), b.alphabet()) {
        return Err(Error::ShapeMismatch(format!(
            "pairing of ({},{},{},{:?}) with ({},{},{},{:?})",
            a.n(),
            a.d(),
            a.m(),
            a.alphabet(),
            b.n(),
            b.d(),
            b.m(),
            b.alphabet()
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (idx, va) in a.entries() {
        if let Some(vb) = b.get(idx) {
            for (x, y) in va.iter().zip(vb.iter()) {
                acc += y.conj() * x;
            }
        }
    }
    Ok(acc)
}

/// Norm of one split of a report.
#[derive(Clone, Debug, Serialize)]
pub struct SplitNorm {
    /// 1-based alpha positions.
    pub alpha: Vec<usize>,
    pub norm: f64,
    #[serde(rename = "T")]
    pub t_number: i64,
    pub transposed: bool,
}

/// Per-split norms with the combined value. For sum norms the combined
/// value is the achieved upper bound and the certified interval is
/// [lower, upper].
#[derive(Clone, Debug, Serialize)]
pub struct NormReport {
    pub p: Exponent,
    pub splits: Vec<SplitNorm>,
    pub value: f64,
    pub argmax_k: usize,
    #[serde(skip_serializing_if = "Option::is_none", flatten)]
    pub sum: Option<SumCertificate>,
    #[serde(skip)]
    pub decomposition: Option<Vec<CoeffTensor>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SumCertificate {
    pub upper: f64,
    pub lower: f64,
    pub gap: f64,
    pub converged: bool,
}

fn split_norm(t: &CoeffTensor, split: &PartitionSplit, p: Exponent, cap: usize) -> Result<SplitNorm> {
    let mat = reshape(t, split, cap)?;
    Ok(SplitNorm {
        alpha: split.alpha().to_vec(),
        norm: schatten_norm(&mat, p)?,
        t_number: split.transposition_number(),
        transposed: split.is_transposed(),
    })
}

fn combine_max(p: Exponent, splits: Vec<SplitNorm>, argmax_by_k: bool) -> NormReport {
    let mut value = 0.0;
    let mut argmax = 0;
    for (i, s) in splits.iter().enumerate() {
        if s.norm > value {
            value = s.norm;
            argmax = i;
        }
    }
    let argmax_k = if argmax_by_k {
        argmax
    } else {
        splits[argmax].alpha.len()
    };
    NormReport {
        p,
        splits,
        value,
        argmax_k,
        sum: None,
        decomposition: None,
    }
}

/// The intersection norm: max of the d+1 consecutive-split matricization
/// norms alpha = {1..k}. Ties in the argmax break toward the smallest k.
pub fn intersection_norm(t: &CoeffTensor, p: Exponent, cap: usize) -> Result<NormReport> {
    let splits: Vec<SplitNorm> = (0..=t.d())
        .into_par_iter()
        .map(|k| split_norm(t, &PartitionSplit::consecutive(t.d(), k), p, cap))
        .collect::<Result<_>>()?;
    Ok(combine_max(p, splits, true))
}

/// Norms of all 2^d partition splits, each tagged with its transposition
/// number.
pub fn partition_spectrum(t: &CoeffTensor, p: Exponent, cap: usize) -> Result<NormReport> {
    let splits: Vec<SplitNorm> = enumerate_partitions(t.d())
        .into_par_iter()
        .map(|split| split_norm(t, &split, p, cap))
        .collect::<Result<_>>()?;
    Ok(combine_max(p, splits, false))
}

// ---------------------------------------------------------------------------
// Sum norm: infimum over decompositions A = sum_k Y^(k) of
// sum_k || mat_k(Y^(k)) ||_p, for 1 <= p <= 2.
// ---------------------------------------------------------------------------

/// Dense tensor workspace for the solver: big-endian flat index layout,
/// one m x m row-major block per multi-index.
#[derive(Clone)]
struct Dense {
    a: usize,
    d: usize,
    m: usize,
    data: Vec<Complex64>,
}

impl Dense {
    fn zero_like(t: &CoeffTensor) -> Self {
        let a = t.alphabet_size();
        let size = a.pow(t.d() as u32) * t.m() * t.m();
        Dense {
            a,
            d: t.d(),
            m: t.m(),
            data: vec![Complex64::new(0.0, 0.0); size],
        }
    }

    fn from_tensor(t: &CoeffTensor) -> Self {
        let mut out = Self::zero_like(t);
        let mm = t.m() * t.m();
        for (idx, v) in t.entries() {
            let mut flat = 0usize;
            for &i in idx {
                flat = flat * out.a + i;
            }
            for r in 0..t.m() {
                for c in 0..t.m() {
                    out.data[flat * mm + r * t.m() + c] = v[(r, c)];
                }
            }
        }
        out
    }

    fn to_tensor(&self, like: &CoeffTensor) -> CoeffTensor {
        let mut out = CoeffTensor::zero(like.n(), like.d(), like.m(), like.alphabet());
        let mm = self.m * self.m;
        for flat in 0..self.data.len() / mm.max(1) {
            let block = &self.data[flat * mm..(flat + 1) * mm];
            if block.iter().all(|c| c.norm_sqr() == 0.0) {
                continue;
            }
            let mut idx = vec![0usize; self.d];
            let mut rem = flat;
            for s in (0..self.d).rev() {
                idx[s] = rem % self.a;
                rem /= self.a;
            }
            let v = CMat::from_fn(self.m, self.m, |r, c| block[r * self.m + c]);
            out.set(idx, v).expect("in range");
        }
        out
    }

    /// Consecutive matricization alpha = {1..k} as a dense matrix.
    fn mat_k(&self, k: usize) -> CMat {
        let rows_blocks = self.a.pow(k as u32);
        let cols_blocks = self.a.pow((self.d - k) as u32);
        let m = self.m;
        let mm = m * m;
        CMat::from_fn(rows_blocks * m, cols_blocks * m, |r, c| {
            let (rb, ri) = (r / m, r % m);
            let (cb, ci) = (c / m, c % m);
            self.data[(rb * cols_blocks + cb) * mm + ri * m + ci]
        })
    }

    /// Writes a matricization back into tensor layout.
    fn from_mat_k(&mut self, k: usize, mat: &CMat) {
        let cols_blocks = self.a.pow((self.d - k) as u32);
        let m = self.m;
        let mm = m * m;
        for r in 0..mat.nrows() {
            for c in 0..mat.ncols() {
                let (rb, ri) = (r / m, r % m);
                let (cb, ci) = (c / m, c % m);
                self.data[(rb * cols_blocks + cb) * mm + ri * m + ci] = mat[(r, c)];
            }
        }
    }

    fn axpy(&mut self, alpha: f64, other: &Dense) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += alpha * y;
        }
    }

    fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Schatten p-norm and its (sub)gradient: for M = U S V^H the gradient is
/// U diag((s_i/||M||_p)^{p-1}) V^H, which has conjugate-exponent norm 1 and
/// pairs with M to exactly ||M||_p. Returns (norm, gradient); the gradient
/// is zero at M = 0.
fn norm_and_gradient(mat: &CMat, p: f64) -> (f64, CMat) {
    let svd = mat.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested u");
    let v_t = svd.v_t.as_ref().expect("requested v_t");
    let sv = &svd.singular_values;
    let top = sv.iter().copied().fold(0.0f64, f64::max);
    if top == 0.0 {
        return (0.0, CMat::zeros(mat.nrows(), mat.ncols()));
    }
    let mut desc: Vec<f64> = sv.iter().copied().collect();
    desc.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let sum = kahan_sum(desc.iter().map(|s| (s / top).powf(p)));
    let norm = top * sum.powf(1.0 / p);
    // Gradient scale per singular value; the p = 1 subgradient keeps only
    // the numerically nonzero directions.
    let rank_tol = top * 1e-13;
    let mut grad = CMat::zeros(mat.nrows(), mat.ncols());
    for (i, &s) in sv.iter().enumerate() {
        if s <= rank_tol {
            continue;
        }
        let scale = (s / norm).powf(p - 1.0);
        let ui = u.column(i);
        let vi = v_t.row(i);
        for r in 0..mat.nrows() {
            for c in 0..mat.ncols() {
                grad[(r, c)] += scale * ui[r] * vi[c];
            }
        }
    }
    (norm, grad)
}

struct SumState {
    /// Blocks 0..d-1 are free; block d is the residual t - sum.
    blocks: Vec<Dense>,
    resid: Dense,
}

impl SumState {
    fn objective_terms(&self, p: f64) -> (f64, Vec<f64>, Vec<Dense>) {
        let d = self.blocks.len();
        let mut norms = Vec::with_capacity(d + 1);
        let mut grads = Vec::with_capacity(d + 1);
        for (k, y) in self.blocks.iter().chain(std::iter::once(&self.resid)).enumerate() {
            let (norm, grad_mat) = norm_and_gradient(&y.mat_k(k), p);
            let mut g = y.clone();
            g.data.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            g.from_mat_k(k, &grad_mat);
            norms.push(norm);
            grads.push(g);
        }
        (kahan_sum(norms.iter().copied()), norms, grads)
    }
}

fn objective_only(blocks: &[Dense], resid: &Dense, p: f64) -> f64 {
    let norms = blocks
        .iter()
        .chain(std::iter::once(resid))
        .enumerate()
        .map(|(k, y)| schatten_norm(&y.mat_k(k), Exponent::Finite(p)).expect("finite"));
    kahan_sum(norms)
}

/// Seed for the fixed random dual probes.
const PROBE_SEED: u64 = 0x4b50_4e44;
const PROBE_COUNT: usize = 32;

fn random_probe_tensors(like: &CoeffTensor) -> Vec<CoeffTensor> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let a = like.alphabet_size();
    (0..PROBE_COUNT)
        .map(|_| {
            let mut t = CoeffTensor::zero(like.n(), like.d(), like.m(), like.alphabet());
            let total = a.pow(like.d() as u32);
            for flat in 0..total {
                let mut idx = vec![0usize; like.d()];
                let mut rem = flat;
                for s in (0..like.d()).rev() {
                    idx[s] = rem % a;
                    rem /= a;
                }
                let v = CMat::from_fn(like.m(), like.m(), |_, _| {
                    Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                });
                t.set(idx, v).expect("in range");
            }
            t
        })
        .collect()
}

/// Duality lower bound from one probe: |<t, B>| / intersection_norm(B, p').
fn probe_lower(t: &CoeffTensor, probe: &CoeffTensor, p_conj: Exponent, cap: usize) -> Result<f64> {
    let denom = intersection_norm(probe, p_conj, cap)?.value;
    if denom <= 0.0 {
        return Ok(0.0);
    }
    Ok(pairing(t, probe)?.norm() / denom)
}

/// The sum norm for 1 <= p <= 2: minimizes the decomposition objective by
/// first-order descent and certifies the value with dual probes. Reports a
/// certified interval [lower, upper]; `converged` means gap/upper <= tol.
pub fn sum_norm(
    t: &CoeffTensor,
    p: Exponent,
    tol: f64,
    max_iter: usize,
    cap: usize,
) -> Result<NormReport> {
    let pv = match p {
        Exponent::Finite(pv) if pv <= 2.0 => pv,
        _ => {
            return Err(Error::UnsupportedExponent {
                required: "1 <= p <= 2",
                got: p.to_string(),
            })
        }
    };
    let d = t.d();
    // Reuse the dense-size guard of the consecutive matricizations.
    for k in 0..=d {
        reshape(t, &PartitionSplit::consecutive(d, k), cap)?;
    }
    let p_conj = p.conjugate();
    let target = Dense::from_tensor(t);
    let splits_of = |blocks: &[Dense], resid: &Dense| -> Vec<SplitNorm> {
        blocks
            .iter()
            .chain(std::iter::once(resid))
            .enumerate()
            .map(|(k, y)| {
                let split = PartitionSplit::consecutive(d, k);
                SplitNorm {
                    alpha: split.alpha().to_vec(),
                    norm: schatten_norm(&y.mat_k(k), p).expect("finite"),
                    t_number: split.transposition_number(),
                    transposed: split.is_transposed(),
                }
            })
            .collect()
    };

    if t.support_len() == 0 {
        let zero_blocks: Vec<Dense> = (0..d).map(|_| Dense::zero_like(t)).collect();
        let resid = Dense::zero_like(t);
        let splits = splits_of(&zero_blocks, &resid);
        return Ok(NormReport {
            p,
            splits,
            value: 0.0,
            argmax_k: 0,
            sum: Some(SumCertificate {
                upper: 0.0,
                lower: 0.0,
                gap: 0.0,
                converged: true,
            }),
            decomposition: Some(vec![t.clone(); 0]),
        });
    }

    // Initialization: all mass in the block with the smallest single-term
    // norm, ties toward the smallest k.
    let single: Vec<f64> = (0..=d)
        .map(|k| schatten_norm(&target.mat_k(k), p).expect("finite"))
        .collect();
    let k_init = single
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(k, _)| k)
        .unwrap_or(0);
    let mut state = SumState {
        blocks: (0..d)
            .map(|k| {
                if k == k_init {
                    target.clone()
                } else {
                    Dense::zero_like(t)
                }
            })
            .collect(),
        resid: if k_init == d {
            target.clone()
        } else {
            Dense::zero_like(t)
        },
    };

    // Static dual probes: the target itself plus seeded random tensors.
    let mut lower = 0.0f64;
    for probe in std::iter::once(t.clone()).chain(random_probe_tensors(t)) {
        lower = lower.max(probe_lower(t, &probe, p_conj, cap)?);
    }

    let scale = target.norm_sqr().sqrt();
    let mut best_upper = f64::INFINITY;
    let mut best_blocks = state.blocks.clone();
    let mut best_resid = state.resid.clone();
    let mut converged = false;
    let mut step_hint = 1.0f64;

    for iter in 1..=max_iter {
        let (f, _norms, grads) = state.objective_terms(pv);
        if f < best_upper {
            best_upper = f;
            best_blocks = state.blocks.clone();
            best_resid = state.resid.clone();
        }

        // Refresh the certificate from the gradients of the current point:
        // at the optimum the residual-block gradient is a maximizer of the
        // dual problem.
        for g in grads.iter().rev() {
            if g.norm_sqr() > 0.0 {
                let probe = g.to_tensor(t);
                lower = lower.max(probe_lower(t, &probe, p_conj, cap)?);
                break;
            }
        }
        let gap = best_upper - lower;
        if gap <= tol * best_upper.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }

        // Free-block gradients: grad_k - grad_d through the residual.
        let mut dir: Vec<Dense> = Vec::with_capacity(d);
        let mut grad_sq = 0.0;
        for k in 0..d {
            let mut g = grads[k].clone();
            g.axpy(-1.0, &grads[d]);
            grad_sq += g.norm_sqr();
            dir.push(g);
        }
        if grad_sq.sqrt() <= 1e-14 * scale.max(1.0) {
            // Stationary but not certified: polish the certificate once
            // more and stop.
            break;
        }

        let try_step = |eta: f64, state: &SumState| -> (Vec<Dense>, Dense, f64) {
            let mut blocks = state.blocks.clone();
            let mut resid = state.resid.clone();
            for k in 0..d {
                blocks[k].axpy(-eta, &dir[k]);
                resid.axpy(eta, &dir[k]);
            }
            let f_new = objective_only(&blocks, &resid, pv);
            (blocks, resid, f_new)
        };

        if pv > 1.0 {
            // Backtracking line search with an Armijo decrease condition.
            let mut eta = step_hint * 2.0;
            let mut accepted = false;
            for _ in 0..40 {
                let (blocks, resid, f_new) = try_step(eta, &state);
                if f_new <= f - 1e-4 * eta * grad_sq {
                    state.blocks = blocks;
                    state.resid = resid;
                    step_hint = eta;
                    accepted = true;
                    break;
                }
                eta *= 0.5;
            }
            if !accepted {
                break;
            }
        } else {
            // Subgradient step: Polyak length from the best certified lower
            // bound, with a diminishing fallback.
            let eta = if lower > 0.0 && f > lower {
                (f - lower) / grad_sq
            } else {
                0.1 * scale / (grad_sq.sqrt() * (iter as f64).sqrt())
            };
            let (blocks, resid, _f_new) = try_step(eta, &state);
            state.blocks = blocks;
            state.resid = resid;
        }
    }

    // Final certificate polish from the best decomposition found.
    {
        let state = SumState {
            blocks: best_blocks.clone(),
            resid: best_resid.clone(),
        };
        let (_f, _norms, grads) = state.objective_terms(pv);
        for g in grads.iter().rev() {
            if g.norm_sqr() > 0.0 {
                let probe = g.to_tensor(t);
                lower = lower.max(probe_lower(t, &probe, p_conj, cap)?);
                break;
            }
        }
        let gap = best_upper - lower;
        if gap <= tol * best_upper.max(f64::MIN_POSITIVE) {
            converged = true;
        }
    }

    let splits = splits_of(&best_blocks, &best_resid);
    let argmax_k = splits
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm.partial_cmp(&b.1.norm).unwrap())
        .map(|(k, _)| k)
        .unwrap_or(0);
    let decomposition: Vec<CoeffTensor> = best_blocks
        .iter()
        .chain(std::iter::once(&best_resid))
        .map(|y| y.to_tensor(t))
        .collect();
    let lower = lower.min(best_upper);
    Ok(NormReport {
        p,
        splits,
        value: best_upper,
        argmax_k,
        sum: Some(SumCertificate {
            upper: best_upper,
            lower,
            gap: best_upper - lower,
            converged,
        }),
        decomposition: Some(decomposition),
    })
}

/// Serializes a list of reports as a JSON array (used by CSV/JSON emitters).
pub fn serialize_reports<S: Serializer>(
    reports: &[NormReport],
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = serializer.serialize_seq(Some(reports.len()))?;
    for r in reports {
        seq.serialize_element(r)?;
    }
    seq.end()
}
