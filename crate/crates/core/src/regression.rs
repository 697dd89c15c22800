//! Kernel regression over slices of a precomputed kernel: the stand-in for
//! fine-tuning a model on a training subset.
//!
//! For a subset `S` and query rows `Q` the class scores are
//! `K[Q, S] · K[S, S]⁻¹ · Y_S`, evaluated per the store layout:
//! one shared block for every class, one block per class, or the full
//! `(point, class)` kernel.

use nalgebra::{DMatrix, DVector};

use crate::dataset::OneHotLabels;
use crate::error::{Error, Result};
use crate::kernel::{ClassSel, IndexSlice, KernelStore, Layout};
use crate::linalg::{jittered_cholesky, BlockwiseInverse, JitterPolicy};

/// How the model trained on the empty subset predicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EmptyModelPolicy {
    /// Always predicts class 0.
    #[default]
    ConstantClass0,
    /// Utility is the expected accuracy of a uniformly random guess, `1/C`.
    UniformExpected,
}

impl EmptyModelPolicy {
    /// `(numerator, denominator)` of the empty-model accuracy on `truth`.
    pub fn accuracy_ratio(&self, truth: &[usize], n_classes: usize) -> (i64, i64) {
        match self {
            EmptyModelPolicy::ConstantClass0 => {
                (truth.iter().filter(|&&y| y == 0).count() as i64, truth.len() as i64)
            }
            EmptyModelPolicy::UniformExpected => (1, n_classes as i64),
        }
    }

    pub fn accuracy(&self, truth: &[usize], n_classes: usize) -> f64 {
        let (num, den) = self.accuracy_ratio(truth, n_classes);
        num as f64 / den as f64
    }

    pub fn name(&self) -> &'static str {
        match self {
            EmptyModelPolicy::ConstantClass0 => "constant-class-0",
            EmptyModelPolicy::UniformExpected => "uniform-expected",
        }
    }
}

impl std::str::FromStr for EmptyModelPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant-class-0" | "class0" | "constant" => Ok(EmptyModelPolicy::ConstantClass0),
            "uniform-expected" | "uniform" => Ok(EmptyModelPolicy::UniformExpected),
            other => Err(Error::InvalidArgument(format!("unknown empty-model policy {other:?}"))),
        }
    }
}

impl std::fmt::Display for EmptyModelPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Class scores for a batch of queries, row-major `|queries| × C`.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionMatrix {
    n_classes: usize,
    scores: Vec<f64>,
}

impl PredictionMatrix {
    pub fn new(n_classes: usize, scores: Vec<f64>) -> Self {
        assert_eq!(scores.len() % n_classes, 0);
        PredictionMatrix { n_classes, scores }
    }

    pub fn n_queries(&self) -> usize {
        self.scores.len() / self.n_classes
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, q: usize) -> &[f64] {
        &self.scores[q * self.n_classes..(q + 1) * self.n_classes]
    }

    /// Argmax label of row `q`; ties go to the lowest class index.
    pub fn hard_label(&self, q: usize) -> usize {
        argmax(self.row(q))
    }

    pub fn hard_labels(&self) -> Vec<usize> {
        (0..self.n_queries()).map(|q| self.hard_label(q)).collect()
    }

    pub fn max_abs_diff(&self, other: &PredictionMatrix) -> f64 {
        self.scores
            .iter()
            .zip(&other.scores)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[inline]
fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = c;
        }
    }
    best
}

/// Fraction of queries whose hard label equals the truth.
pub fn utility(predictions: &PredictionMatrix, truth: &[usize]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::InvalidArgument("utility needs at least one query".into()));
    }
    if truth.len() != predictions.n_queries() {
        return Err(Error::Validation(format!(
            "{} predictions for {} labels",
            predictions.n_queries(),
            truth.len()
        )));
    }
    Ok(hits(predictions, truth) as f64 / truth.len() as f64)
}

pub(crate) fn hits(predictions: &PredictionMatrix, truth: &[usize]) -> usize {
    truth
        .iter()
        .enumerate()
        .filter(|&(q, &y)| predictions.hard_label(q) == y)
        .count()
}

/// A fitted direct solve: predictions plus the jitter that was needed.
#[derive(Clone, Debug)]
pub struct Fit {
    pub predictions: PredictionMatrix,
    pub jitter: f64,
}

/// Solves the regression on `subset` from scratch and predicts `queries`
/// (global kernel rows).
pub fn fit_predict(
    store: &KernelStore,
    subset: &IndexSlice,
    labels: &OneHotLabels,
    queries: &IndexSlice,
    jitter: &JitterPolicy,
) -> Result<Fit> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("kernel regression needs a nonempty subset".into()));
    }
    check_labels(store, labels)?;
    let c = store.n_classes();
    let s = subset.as_slice();
    let scale = store.mean_train_diagonal();
    let mut scores = vec![0.0; queries.len() * c];
    let mut applied: f64 = 0.0;

    match store.layout() {
        Layout::Shared0 => {
            let k_ss = store.slice(subset, subset, ClassSel::Class(0))?;
            let chol = jittered_cholesky(&k_ss, scale, jitter)?;
            applied = chol.jitter;
            let y = DMatrix::from_fn(s.len(), c, |i, k| labels.row(s[i])[k]);
            let alpha = chol.factor.solve(&y);
            let k_qs = store.slice(queries, subset, ClassSel::Class(0))?;
            let out = k_qs * alpha;
            for q in 0..queries.len() {
                for k in 0..c {
                    scores[q * c + k] = out[(q, k)];
                }
            }
        }
        Layout::PerClass1 => {
            for k in 0..c {
                let k_ss = store.slice(subset, subset, ClassSel::Class(k))?;
                let chol = jittered_cholesky(&k_ss, scale, jitter)?;
                applied = applied.max(chol.jitter);
                let y = DVector::from_fn(s.len(), |i, _| labels.row(s[i])[k]);
                let alpha = chol.factor.solve(&y);
                let out = store.slice(queries, subset, ClassSel::Class(k))? * alpha;
                for q in 0..queries.len() {
                    scores[q * c + k] = out[q];
                }
            }
        }
        Layout::Full2 => {
            let k_ss = store.slice(subset, subset, ClassSel::Full)?;
            let chol = jittered_cholesky(&k_ss, scale, jitter)?;
            applied = chol.jitter;
            let y = DVector::from_fn(s.len() * c, |i, _| labels.row(s[i / c])[i % c]);
            let alpha = chol.factor.solve(&y);
            let out = store.slice(queries, subset, ClassSel::Full)? * alpha;
            scores.copy_from_slice(out.as_slice());
        }
    }
    Ok(Fit {
        predictions: PredictionMatrix::new(c, scores),
        jitter: applied,
    })
}

fn check_labels(store: &KernelStore, labels: &OneHotLabels) -> Result<()> {
    if labels.n_points() != store.n_train() || labels.n_classes() != store.n_classes() {
        return Err(Error::Validation(format!(
            "labels cover {} points / {} classes, kernel has {} / {}",
            labels.n_points(),
            labels.n_classes(),
            store.n_train(),
            store.n_classes()
        )));
    }
    Ok(())
}

/// One independently inverted kernel block and its dual coefficients `K⁻¹ Y`.
#[derive(Clone, Debug)]
struct BlockState {
    /// Class of the block for per-class layouts.
    class: usize,
    inverse: BlockwiseInverse,
    /// Row-major `dim × targets`.
    alpha: Vec<f64>,
    targets: usize,
}

/// Incrementally grown regression over a permutation prefix.
///
/// Each [`extend`](RegressionState::extend) appends one training point and
/// updates every kernel inverse by blockwise inversion together with the dual
/// coefficients, so a full scan over `n` points costs `O(n³)` rather than
/// `O(n⁴)`.
#[derive(Clone, Debug)]
pub struct RegressionState<'a> {
    store: &'a KernelStore,
    labels: &'a OneHotLabels,
    policy: JitterPolicy,
    scale: f64,
    subset: Vec<usize>,
    blocks: Vec<BlockState>,
    jitter: f64,
}

impl<'a> RegressionState<'a> {
    pub fn new(store: &'a KernelStore, labels: &'a OneHotLabels, policy: JitterPolicy) -> Result<Self> {
        Self::with_jitter(store, labels, policy, 0.0)
    }

    /// Starts with a nonzero relative jitter already applied.
    pub fn with_jitter(
        store: &'a KernelStore,
        labels: &'a OneHotLabels,
        policy: JitterPolicy,
        jitter: f64,
    ) -> Result<Self> {
        check_labels(store, labels)?;
        let scale = store.mean_train_diagonal();
        let blocks = Self::empty_blocks(store, store.n_train());
        Ok(RegressionState {
            store,
            labels,
            policy,
            scale,
            subset: Vec::new(),
            blocks,
            jitter,
        })
    }

    fn empty_blocks(store: &KernelStore, capacity: usize) -> Vec<BlockState> {
        let c = store.n_classes();
        match store.layout() {
            Layout::Shared0 => vec![BlockState {
                class: 0,
                inverse: BlockwiseInverse::with_capacity(capacity),
                alpha: Vec::new(),
                targets: c,
            }],
            Layout::PerClass1 => (0..c)
                .map(|k| BlockState {
                    class: k,
                    inverse: BlockwiseInverse::with_capacity(capacity),
                    alpha: Vec::new(),
                    targets: 1,
                })
                .collect(),
            Layout::Full2 => vec![BlockState {
                class: 0,
                inverse: BlockwiseInverse::with_capacity(capacity * c),
                alpha: Vec::new(),
                targets: 1,
            }],
        }
    }

    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn is_empty(&self) -> bool {
        self.subset.is_empty()
    }

    /// Relative diagonal jitter currently applied.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn condition_estimate(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.inverse.condition_estimate())
            .fold(1.0, f64::max)
    }

    /// Appends training point `new_index`. On failure the state is unchanged.
    pub fn extend(&mut self, new_index: usize) -> Result<()> {
        if new_index >= self.store.n_train() {
            return Err(Error::IndexOutOfRange {
                index: new_index,
                bound: self.store.n_train(),
            });
        }
        if self.subset.contains(&new_index) {
            return Err(Error::InvalidArgument(format!(
                "point {new_index} is already in the subset"
            )));
        }
        let mut attempt = self.blocks.clone();
        let ok = attempt
            .iter_mut()
            .all(|block| self.append_to(block, &self.subset, new_index, self.jitter).is_ok());
        if ok {
            self.blocks = attempt;
            self.subset.push(new_index);
            return Ok(());
        }

        // rebuild from scratch at increasing jitter
        let mut level = self.jitter;
        let mut worst = attempt_condition(&attempt);
        while let Some(next) = self.policy.next_level(level) {
            level = next;
            match self.rebuild(new_index, level) {
                Ok(blocks) => {
                    log::debug!(
                        "kernel block at size {} needed jitter {level:e}",
                        self.subset.len() + 1
                    );
                    self.blocks = blocks;
                    self.subset.push(new_index);
                    self.jitter = level;
                    return Ok(());
                }
                Err(cond) => worst = cond,
            }
        }
        Err(Error::SingularKernel {
            condition: worst,
            jitter: level,
        })
    }

    fn rebuild(&self, new_index: usize, level: f64) -> std::result::Result<Vec<BlockState>, f64> {
        let mut blocks = Self::empty_blocks(self.store, self.store.n_train());
        let mut prefix: Vec<usize> = Vec::with_capacity(self.subset.len() + 1);
        for &idx in self.subset.iter().chain(std::iter::once(&new_index)) {
            for block in blocks.iter_mut() {
                if self.append_to(block, &prefix, idx, level).is_err() {
                    return Err(block.inverse.condition_estimate());
                }
            }
            prefix.push(idx);
        }
        Ok(blocks)
    }

    fn append_to(&self, block: &mut BlockState, prefix: &[usize], idx: usize, level: f64) -> Result<()> {
        let store = self.store;
        let c = store.n_classes();
        let jitter = level * self.scale;
        let t = block.targets;
        let (cross, diag, y_new) = match store.layout() {
            Layout::Shared0 | Layout::PerClass1 => {
                let k = block.class;
                let cross: Vec<f64> = prefix.iter().map(|&j| store.entry(j, k, idx, k)).collect();
                let diag = vec![store.entry(idx, k, idx, k) + jitter];
                let y_new = if t == c {
                    self.labels.row(idx).to_vec()
                } else {
                    vec![self.labels.row(idx)[k]]
                };
                (cross, diag, y_new)
            }
            Layout::Full2 => {
                let mut cross = vec![0.0; prefix.len() * c * c];
                for (pj, &j) in prefix.iter().enumerate() {
                    for a in 0..c {
                        for b in 0..c {
                            cross[(pj * c + a) * c + b] = store.entry(j, a, idx, b);
                        }
                    }
                }
                let mut diag = vec![0.0; c * c];
                for a in 0..c {
                    for b in 0..c {
                        diag[a * c + b] = store.entry(idx, a, idx, b);
                    }
                    diag[a * c + a] += jitter;
                }
                (cross, diag, self.labels.row(idx).to_vec())
            }
        };
        let b = (diag.len() as f64).sqrt() as usize;
        let p = block.inverse.dim();
        let step = block.inverse.append(&cross, &diag)?;
        if block.inverse.condition_estimate() > self.policy.max_condition {
            return Err(Error::SingularKernel {
                condition: block.inverse.condition_estimate(),
                jitter: level,
            });
        }

        // r = y_new − Bᵀ α ; α_new = [α − V S⁻¹ r ; S⁻¹ r]
        let mut r = vec![0.0; b * t];
        for row in 0..b {
            for col in 0..t {
                let mut acc = y_new[row * t + col];
                for j in 0..p {
                    acc -= cross[j * b + row] * block.alpha[j * t + col];
                }
                r[row * t + col] = acc;
            }
        }
        let mut bottom = vec![0.0; b * t];
        for row in 0..b {
            for col in 0..t {
                bottom[row * t + col] = (0..b)
                    .map(|k| step.schur_inv[row * b + k] * r[k * t + col])
                    .sum();
            }
        }
        for j in 0..p {
            for col in 0..t {
                let mut acc = 0.0;
                for k in 0..b {
                    acc += step.v[j * b + k] * bottom[k * t + col];
                }
                block.alpha[j * t + col] -= acc;
            }
        }
        block.alpha.extend_from_slice(&bottom);
        Ok(())
    }

    /// Class scores for the given global rows.
    pub fn predict(&self, queries: &[usize]) -> PredictionMatrix {
        let c = self.store.n_classes();
        let mut scores = vec![0.0; queries.len() * c];
        if self.subset.is_empty() {
            return PredictionMatrix::new(c, scores);
        }
        let n = self.store.n_train();
        let s = &self.subset;
        match self.store.layout() {
            Layout::Shared0 => {
                let block = self.store.class_block(0).expect("shared block");
                let alpha = &self.blocks[0].alpha;
                for (qi, &q) in queries.iter().enumerate() {
                    let row = &block[q * n..(q + 1) * n];
                    let out = &mut scores[qi * c..(qi + 1) * c];
                    for (j, &sj) in s.iter().enumerate() {
                        let kv = row[sj];
                        let a = &alpha[j * c..(j + 1) * c];
                        for k in 0..c {
                            out[k] += kv * a[k];
                        }
                    }
                }
            }
            Layout::PerClass1 => {
                for (k, blk) in self.blocks.iter().enumerate() {
                    let kernel = self.store.class_block(k).expect("class block");
                    for (qi, &q) in queries.iter().enumerate() {
                        let row = &kernel[q * n..(q + 1) * n];
                        scores[qi * c + k] = s.iter().zip(&blk.alpha).map(|(&sj, a)| row[sj] * a).sum();
                    }
                }
            }
            Layout::Full2 => {
                let alpha = &self.blocks[0].alpha;
                for (qi, &q) in queries.iter().enumerate() {
                    for a in 0..c {
                        let mut acc = 0.0;
                        for (j, &sj) in s.iter().enumerate() {
                            for b in 0..c {
                                acc += self.store.entry(q, a, sj, b) * alpha[j * c + b];
                            }
                        }
                        scores[qi * c + a] = acc;
                    }
                }
            }
        }
        PredictionMatrix::new(c, scores)
    }

    /// Number of correctly classified queries.
    pub fn hits(&self, queries: &[usize], truth: &[usize]) -> usize {
        hits(&self.predict(queries), truth)
    }

    /// Current inverse of each kernel block (one per class for per-class layouts).
    pub fn inverses(&self) -> Vec<DMatrix<f64>> {
        self.blocks.iter().map(|b| b.inverse.to_matrix()).collect()
    }

    /// `‖K⁻¹_state · K_SS − I‖_F / ‖I‖_F`, worst over blocks, against the
    /// jittered kernel the state represents.
    pub fn inverse_residual(&self) -> Result<f64> {
        if self.subset.is_empty() {
            return Ok(0.0);
        }
        let slice = IndexSlice::new(self.subset.clone())?;
        let mut worst: f64 = 0.0;
        for block in &self.blocks {
            let sel = match self.store.layout() {
                Layout::Full2 => ClassSel::Full,
                _ => ClassSel::Class(block.class),
            };
            let mut k = self.store.slice(&slice, &slice, sel)?;
            for i in 0..k.nrows() {
                k[(i, i)] += self.jitter * self.scale;
            }
            let prod = block.inverse.to_matrix() * k;
            let eye = DMatrix::<f64>::identity(prod.nrows(), prod.ncols());
            worst = worst.max((prod - &eye).norm() / eye.norm());
        }
        Ok(worst)
    }
}

fn attempt_condition(blocks: &[BlockState]) -> f64 {
    blocks
        .iter()
        .map(|b| b.inverse.condition_estimate())
        .fold(1.0, f64::max)
}
