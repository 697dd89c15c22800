//! Dense SPD helpers: jittered Cholesky solves and the blockwise (Schur
//! complement) inverse that grows one block at a time.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Diagonal jitter escalation for near-singular kernel blocks.
///
/// A solve is first attempted without jitter. If the factorisation fails or the
/// pivot-ratio condition estimate exceeds `max_condition`, `level * scale` is
/// added to the diagonal for each level in turn, where `scale` is the mean
/// train diagonal of the kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct JitterPolicy {
    pub levels: Vec<f64>,
    pub max_condition: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        JitterPolicy {
            levels: vec![1e-10, 1e-9, 1e-8, 1e-7, 1e-6],
            max_condition: 1e12,
        }
    }
}

impl JitterPolicy {
    /// No escalation: fail on the first singular block.
    pub fn exact() -> Self {
        JitterPolicy {
            levels: Vec::new(),
            max_condition: f64::INFINITY,
        }
    }

    /// Relative jitter levels to try in order, starting with zero.
    pub fn schedule(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(0.0).chain(self.levels.iter().copied())
    }

    /// The level after `current`, if any.
    pub fn next_level(&self, current: f64) -> Option<f64> {
        self.schedule().find(|&l| l > current)
    }
}

/// Cholesky factor of `K + jitter·scale·I` with the jitter actually used.
pub struct JitteredCholesky {
    pub factor: Cholesky<f64, Dyn>,
    pub jitter: f64,
    pub condition: f64,
}

/// Squared-pivot ratio `max(L_ii²) / min(L_ii²)`; a cheap lower bound on κ(K).
pub fn pivot_condition(l: &DMatrix<f64>) -> f64 {
    let (lo, hi) = l
        .diagonal()
        .iter()
        .map(|d| d * d)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p), hi.max(p)));
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

pub fn jittered_cholesky(k: &DMatrix<f64>, scale: f64, policy: &JitterPolicy) -> Result<JitteredCholesky> {
    let mut worst = f64::INFINITY;
    let mut last = 0.0;
    for level in policy.schedule() {
        last = level;
        let mut m = k.clone();
        if level > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += level * scale;
            }
        }
        if let Some(factor) = Cholesky::new(m) {
            let condition = pivot_condition(&factor.l());
            if condition.is_finite() && condition <= policy.max_condition {
                return Ok(JitteredCholesky {
                    factor,
                    jitter: level,
                    condition,
                });
            }
            worst = condition;
        }
    }
    Err(Error::SingularKernel {
        condition: worst,
        jitter: last,
    })
}

/// Inverse of a symmetric positive definite matrix grown by appending
/// `b × b` diagonal blocks.
///
/// With the current inverse `A⁻¹`, a new cross block `B` (`p × b`) and
/// diagonal block `D`, the Schur complement `S = D − Bᵀ A⁻¹ B` gives
///
/// ```text
/// [A  B]⁻¹   [A⁻¹ + V S⁻¹ Vᵀ   −V S⁻¹]
/// [Bᵀ D]   = [−S⁻¹ Vᵀ           S⁻¹  ],   V = A⁻¹ B
/// ```
///
/// so each append costs `O(p² b)` instead of a fresh `O(p³)` inversion.
/// `V` and `S` are obtained from a Cholesky factor grown alongside the
/// inverse rather than from the inverse itself, which keeps rounding errors
/// from compounding over many appends on ill-conditioned matrices.
#[derive(Clone, Debug)]
pub struct BlockwiseInverse {
    dim: usize,
    stride: usize,
    inv: Vec<f64>,
    /// Lower Cholesky factor, same layout as `inv`.
    chol: Vec<f64>,
    pivot_min: f64,
    pivot_max: f64,
}

/// Quantities from one append, reused by callers that also track `A⁻¹ Y`.
#[derive(Clone, Debug)]
pub struct AppendStep {
    /// `V = A⁻¹ B`, row-major `p × b`.
    pub v: Vec<f64>,
    /// `S⁻¹`, row-major `b × b`.
    pub schur_inv: Vec<f64>,
}

impl BlockwiseInverse {
    pub fn with_capacity(capacity: usize) -> Self {
        let stride = capacity.max(1);
        BlockwiseInverse {
            dim: 0,
            stride,
            inv: vec![0.0; stride * stride],
            chol: vec![0.0; stride * stride],
            pivot_min: f64::INFINITY,
            pivot_max: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Squared-pivot ratio over every block appended so far.
    pub fn condition_estimate(&self) -> f64 {
        if self.dim == 0 {
            1.0
        } else if self.pivot_min > 0.0 {
            self.pivot_max / self.pivot_min
        } else {
            f64::INFINITY
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inv[i * self.stride + j]
    }

    /// Row `i` of the current inverse.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.inv[i * self.stride..i * self.stride + self.dim]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    fn reserve(&mut self, new_dim: usize) {
        if new_dim <= self.stride {
            return;
        }
        let stride = new_dim.max(self.stride * 2);
        let mut inv = vec![0.0; stride * stride];
        let mut chol = vec![0.0; stride * stride];
        for i in 0..self.dim {
            let old = i * self.stride..i * self.stride + self.dim;
            inv[i * stride..i * stride + self.dim].copy_from_slice(&self.inv[old.clone()]);
            chol[i * stride..i * stride + self.dim].copy_from_slice(&self.chol[old]);
        }
        self.inv = inv;
        self.chol = chol;
        self.stride = stride;
    }

    /// Appends a block. `cross` is `p × b` row-major, `diag` is `b × b` row-major.
    ///
    /// Fails without modifying `self` when the Schur complement is not
    /// positive definite.
    pub fn append(&mut self, cross: &[f64], diag: &[f64]) -> Result<AppendStep> {
        let p = self.dim;
        let b = (diag.len() as f64).sqrt() as usize;
        assert_eq!(b * b, diag.len(), "diagonal block must be square");
        assert_eq!(cross.len(), p * b, "cross block must be {p} x {b}");
        let stride = self.stride;

        // W = L⁻¹ B
        let mut w = cross.to_vec();
        for i in 0..p {
            let li = &self.chol[i * stride..i * stride + i + 1];
            for k in 0..b {
                let mut acc = w[i * b + k];
                for j in 0..i {
                    acc -= li[j] * w[j * b + k];
                }
                w[i * b + k] = acc / li[i];
            }
        }
        // S = D − Wᵀ W
        let mut schur = diag.to_vec();
        for r in 0..b {
            for c in 0..b {
                let mut acc = 0.0;
                for j in 0..p {
                    acc += w[j * b + r] * w[j * b + c];
                }
                schur[r * b + c] -= acc;
            }
        }
        let (l22, schur_inv) = small_cholesky_inverse(&schur, b).ok_or(Error::SingularKernel {
            condition: f64::INFINITY,
            jitter: 0.0,
        })?;
        // V = L⁻ᵀ W, by row-oriented back substitution
        let mut v = w.clone();
        for i in (0..p).rev() {
            let lii = self.chol[i * stride + i];
            for k in 0..b {
                v[i * b + k] /= lii;
            }
            let li = &self.chol[i * stride..i * stride + i];
            let (head, tail) = v.split_at_mut(i * b);
            let vi = &tail[..b];
            for (j, &lij) in li.iter().enumerate() {
                for k in 0..b {
                    head[j * b + k] -= lij * vi[k];
                }
            }
        }

        self.reserve(p + b);
        let stride = self.stride;
        // U = V S⁻¹ (p × b)
        let mut u = vec![0.0; p * b];
        for i in 0..p {
            for c in 0..b {
                let mut acc = 0.0;
                for k in 0..b {
                    acc += v[i * b + k] * schur_inv[k * b + c];
                }
                u[i * b + c] = acc;
            }
        }
        // top-left += U Vᵀ
        for i in 0..p {
            let ui = &u[i * b..(i + 1) * b];
            let row = &mut self.inv[i * stride..i * stride + p];
            for (j, slot) in row.iter_mut().enumerate() {
                let vj = &v[j * b..(j + 1) * b];
                let mut acc = 0.0;
                for k in 0..b {
                    acc += ui[k] * vj[k];
                }
                *slot += acc;
            }
        }
        for i in 0..p {
            for c in 0..b {
                let val = -u[i * b + c];
                self.inv[i * stride + p + c] = val;
                self.inv[(p + c) * stride + i] = val;
            }
        }
        for r in 0..b {
            for c in 0..b {
                self.inv[(p + r) * stride + p + c] = schur_inv[r * b + c];
            }
            for j in 0..p {
                self.chol[(p + r) * stride + j] = w[j * b + r];
            }
            for c in 0..=r {
                self.chol[(p + r) * stride + p + c] = l22[r * b + c];
            }
        }
        self.dim = p + b;
        for r in 0..b {
            let piv = l22[r * b + r] * l22[r * b + r];
            self.pivot_min = self.pivot_min.min(piv);
            self.pivot_max = self.pivot_max.max(piv);
        }
        Ok(AppendStep { v, schur_inv })
    }
}

/// Lower Cholesky factor `L` of a small SPD matrix and its inverse
/// `L⁻ᵀ L⁻¹`, both row-major.
fn small_cholesky_inverse(m: &[f64], b: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut l = vec![0.0; b * b];
    for i in 0..b {
        for j in 0..=i {
            let mut acc = m[i * b + j];
            for k in 0..j {
                acc -= l[i * b + k] * l[j * b + k];
            }
            if i == j {
                if !(acc > 0.0 && acc.is_finite()) {
                    return None;
                }
                l[i * b + i] = acc.sqrt();
            } else {
                l[i * b + j] = acc / l[j * b + j];
            }
        }
    }
    if b == 1 {
        return Some((l, vec![1.0 / m[0]]));
    }
    // T = L⁻¹ (lower triangular)
    let mut t = vec![0.0; b * b];
    for i in 0..b {
        t[i * b + i] = 1.0 / l[i * b + i];
        for j in 0..i {
            let mut acc = 0.0;
            for k in j..i {
                acc -= l[i * b + k] * t[k * b + j];
            }
            t[i * b + j] = acc / l[i * b + i];
        }
    }
    let mut inv = vec![0.0; b * b];
    for r in 0..b {
        for c in 0..b {
            let mut acc = 0.0;
            for k in r.max(c)..b {
                acc += t[k * b + r] * t[k * b + c];
            }
            inv[r * b + c] = acc;
        }
    }
    Some((l, inv))
}

/// `‖A − B‖_F / ‖B‖_F`
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoupled_extension() {
        let mut bi = BlockwiseInverse::with_capacity(2);
        bi.append(&[], &[2.0]).unwrap();
        bi.append(&[0.0], &[2.0]).unwrap();
        assert_eq!(bi.to_matrix(), DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]));
    }

    #[test]
    fn coupled_two_by_two() {
        let mut bi = BlockwiseInverse::with_capacity(1);
        bi.append(&[], &[2.0]).unwrap();
        bi.append(&[1.0], &[2.0]).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]) / 3.0;
        assert!(relative_frobenius(&bi.to_matrix(), &expected) < 1e-15);
    }

    #[test]
    fn singular_append_leaves_state_untouched() {
        let mut bi = BlockwiseInverse::with_capacity(2);
        bi.append(&[], &[1.0]).unwrap();
        let before = bi.to_matrix();
        assert!(bi.append(&[1.0], &[1.0]).is_err());
        assert_eq!(bi.dim(), 1);
        assert_eq!(bi.to_matrix(), before);
    }

    #[test]
    fn block_append_matches_direct_inverse() {
        // 4x4 SPD, appended as 2x2 blocks
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[4.0, 1.0, 0.5, 0.2, 1.0, 3.0, 0.3, 0.1, 0.5, 0.3, 5.0, 1.0, 0.2, 0.1, 1.0, 2.0],
        );
        let mut bi = BlockwiseInverse::with_capacity(1);
        bi.append(&[], &[4.0, 1.0, 1.0, 3.0]).unwrap();
        bi.append(&[0.5, 0.2, 0.3, 0.1], &[5.0, 1.0, 1.0, 2.0]).unwrap();
        let direct = m.try_inverse().unwrap();
        assert!(relative_frobenius(&bi.to_matrix(), &direct) < 1e-14);
    }

    #[test]
    fn jitter_rescues_duplicate_rows() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let chol = jittered_cholesky(&k, 1.0, &JitterPolicy::default()).unwrap();
        assert!(chol.jitter > 0.0);
        assert!(jittered_cholesky(&k, 1.0, &JitterPolicy::exact()).is_err());
    }

    #[test]
    fn schedule_order() {
        let p = JitterPolicy::default();
        assert_eq!(p.next_level(0.0), Some(1e-10));
        assert_eq!(p.next_level(1e-7), Some(1e-6));
        assert_eq!(p.next_level(1e-6), None);
    }
}
