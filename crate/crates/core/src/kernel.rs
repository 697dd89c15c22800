//! The precomputed kernel matrix `K(X_{train ∪ test}, X_train)`, its storage
//! layouts, slicing, the binary file format, and feature-based synthetic kernels.
//!
//! Rows `0..n_train` are training rows, rows `n_train..n_train + n_test` are
//! test rows. Columns always index training points.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"ENTKFMT1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;
/// Absolute tolerance for the train-train symmetry check at load time.
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Layout {
    /// One `(n+m) × n` block shared by every class.
    Shared0,
    /// One `(n+m) × n` block per class, class blocks consecutive.
    PerClass1,
    /// One `((n+m)·C) × (n·C)` block, index `point·C + class`.
    Full2,
}

impl Layout {
    pub fn code(self) -> u8 {
        match self {
            Layout::Shared0 => 0,
            Layout::PerClass1 => 1,
            Layout::Full2 => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Layout::Shared0),
            1 => Ok(Layout::PerClass1),
            2 => Ok(Layout::Full2),
            other => Err(Error::Validation(format!("unknown kernel layout {other}"))),
        }
    }
}

impl std::fmt::Display for Layout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Layout::Shared0 => "shared",
            Layout::PerClass1 => "per-class",
            Layout::Full2 => "full",
        };
        write!(f, "{} ({name})", self.code())
    }
}

/// Class selector for [`KernelStore::slice`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassSel {
    /// The `|rows| × |cols|` kernel of one class' output.
    Class(usize),
    /// The full `(|rows|·C) × (|cols|·C)` kernel, point-major.
    Full,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelStore {
    n_train: usize,
    n_test: usize,
    n_classes: usize,
    layout: Layout,
    data: Vec<f64>,
}

impl KernelStore {
    pub fn new(
        n_train: usize,
        n_test: usize,
        n_classes: usize,
        layout: Layout,
        data: Vec<f64>,
    ) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::Validation(format!(
                "kernel needs at least 2 classes, got {n_classes}"
            )));
        }
        let expected = payload_len(n_train, n_test, n_classes, layout);
        if data.len() != expected {
            return Err(Error::Validation(format!(
                "kernel payload has {} entries, layout {layout} needs {expected}",
                data.len()
            )));
        }
        if let Some(offset) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { offset });
        }
        Ok(KernelStore {
            n_train,
            n_test,
            n_classes,
            layout,
            data,
        })
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn n_test(&self) -> usize {
        self.n_test
    }

    pub fn n_rows(&self) -> usize {
        self.n_train + self.n_test
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Global row index of test point `j`.
    pub fn test_row(&self, j: usize) -> usize {
        self.n_train + j
    }

    /// Row-major `(n+m) × n` block for `class` (Shared0 / PerClass1 only).
    pub fn class_block(&self, class: usize) -> Option<&[f64]> {
        let block = self.n_rows() * self.n_train;
        match self.layout {
            Layout::Shared0 => Some(&self.data),
            Layout::PerClass1 => Some(&self.data[class * block..(class + 1) * block]),
            Layout::Full2 => None,
        }
    }

    /// Entry of the class-`a` row output against the class-`b` column output.
    #[inline]
    pub fn entry(&self, row: usize, a: usize, col: usize, b: usize) -> f64 {
        let n = self.n_train;
        match self.layout {
            Layout::Shared0 => {
                if a == b {
                    self.data[row * n + col]
                } else {
                    0.0
                }
            }
            Layout::PerClass1 => {
                if a == b {
                    self.data[a * self.n_rows() * n + row * n + col]
                } else {
                    0.0
                }
            }
            Layout::Full2 => {
                let c = self.n_classes;
                self.data[(row * c + a) * (n * c) + col * c + b]
            }
        }
    }

    /// `K[rows, cols]` in the given order.
    pub fn slice(&self, rows: &IndexSlice, cols: &IndexSlice, class: ClassSel) -> Result<DMatrix<f64>> {
        rows.check(self.n_rows())?;
        cols.check(self.n_train)?;
        let (r, s) = (rows.as_slice(), cols.as_slice());
        match class {
            ClassSel::Class(c) => {
                if c >= self.n_classes {
                    return Err(Error::IndexOutOfRange {
                        index: c,
                        bound: self.n_classes,
                    });
                }
                Ok(DMatrix::from_fn(r.len(), s.len(), |i, j| {
                    self.entry(r[i], c, s[j], c)
                }))
            }
            ClassSel::Full => {
                let c = self.n_classes;
                Ok(DMatrix::from_fn(r.len() * c, s.len() * c, |i, j| {
                    self.entry(r[i / c], i % c, s[j / c], j % c)
                }))
            }
        }
    }

    /// Largest `|K[i,j] - K[j,i]|` over the train-train block(s).
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n_train;
        let c = self.n_classes;
        let mut worst: f64 = 0.0;
        match self.layout {
            Layout::Shared0 | Layout::PerClass1 => {
                let blocks = if self.layout == Layout::Shared0 { 1 } else { c };
                for k in 0..blocks {
                    for i in 0..n {
                        for j in 0..i {
                            worst = worst.max((self.entry(i, k, j, k) - self.entry(j, k, i, k)).abs());
                        }
                    }
                }
            }
            Layout::Full2 => {
                for i in 0..n * c {
                    for j in 0..i {
                        let a = self.entry(i / c, i % c, j / c, j % c);
                        let b = self.entry(j / c, j % c, i / c, i % c);
                        worst = worst.max((a - b).abs());
                    }
                }
            }
        }
        worst
    }

    /// Mean diagonal of the train-train block of the kernel used for `class`;
    /// the scale for diagonal jitter.
    pub fn mean_train_diagonal(&self) -> f64 {
        let n = self.n_train;
        if n == 0 {
            return 1.0;
        }
        let c = self.n_classes;
        let (sum, count) = match self.layout {
            Layout::Shared0 => ((0..n).map(|i| self.entry(i, 0, i, 0)).sum::<f64>(), n),
            Layout::PerClass1 | Layout::Full2 => (
                (0..n)
                    .flat_map(|i| (0..c).map(move |k| (i, k)))
                    .map(|(i, k)| self.entry(i, k, i, k))
                    .sum::<f64>(),
                n * c,
            ),
        };
        let mean = sum / count as f64;
        if mean > 0.0 {
            mean
        } else {
            1.0
        }
    }

    /// Re-encodes a Shared0 or PerClass1 store as the block-diagonal Full2 store
    /// `I_C ⊗ K` (or `diag(K_0..K_{C-1})`).
    pub fn to_full(&self) -> KernelStore {
        if self.layout == Layout::Full2 {
            return self.clone();
        }
        let c = self.n_classes;
        let rows = self.n_rows() * c;
        let cols = self.n_train * c;
        let mut data = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                data[i * cols + j] = self.entry(i / c, i % c, j / c, j % c);
            }
        }
        KernelStore {
            n_train: self.n_train,
            n_test: self.n_test,
            n_classes: c,
            layout: Layout::Full2,
            data,
        }
    }

    /// Replicates a Shared0 block once per class.
    pub fn to_per_class(&self) -> Result<KernelStore> {
        match self.layout {
            Layout::PerClass1 => Ok(self.clone()),
            Layout::Shared0 => {
                let data = (0..self.n_classes).flat_map(|_| self.data.iter().copied()).collect();
                KernelStore::new(self.n_train, self.n_test, self.n_classes, Layout::PerClass1, data)
            }
            Layout::Full2 => Err(Error::Validation(
                "a full kernel cannot be reduced to per-class blocks".into(),
            )),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n_train as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_test as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_classes as u32).to_le_bytes());
        out.push(self.layout.code());
        out.extend_from_slice(&[0, 0, 0]);
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = KernelHeader::parse(bytes)?;
        let expected = header.payload_len() * 8;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() < expected {
            return Err(Error::Truncated {
                expected,
                found: payload.len(),
            });
        }
        if payload.len() > expected {
            return Err(Error::Validation(format!(
                "kernel file has {} trailing bytes after the payload",
                payload.len() - expected
            )));
        }
        let data: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let store = KernelStore::new(
            header.n_train,
            header.n_test,
            header.n_classes,
            header.layout,
            data,
        )?;
        let defect = store.symmetry_defect();
        if defect > SYMMETRY_TOL {
            log::warn!("train-train kernel block is asymmetric (max defect {defect:e})");
        }
        Ok(store)
    }
}

fn payload_len(n_train: usize, n_test: usize, n_classes: usize, layout: Layout) -> usize {
    let rows = n_train + n_test;
    match layout {
        Layout::Shared0 => rows * n_train,
        Layout::PerClass1 => n_classes * rows * n_train,
        Layout::Full2 => rows * n_classes * n_train * n_classes,
    }
}

/// The fixed-size file header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KernelHeader {
    pub n_train: usize,
    pub n_test: usize,
    pub n_classes: usize,
    pub layout: Layout,
}

impl KernelHeader {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Truncated {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let magic: [u8; 8] = bytes[0..8].try_into().expect("8 bytes");
        if &magic != MAGIC {
            return Err(Error::BadMagic { found: magic });
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let version = u32_at(8);
        if version != VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: VERSION,
            });
        }
        Ok(KernelHeader {
            n_train: u32_at(12) as usize,
            n_test: u32_at(16) as usize,
            n_classes: u32_at(20) as usize,
            layout: Layout::from_code(bytes[24])?,
        })
    }

    pub fn payload_len(&self) -> usize {
        payload_len(self.n_train, self.n_test, self.n_classes, self.layout)
    }
}

pub fn write_kernel(store: &KernelStore, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&store.to_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn read_kernel(path: &Path) -> Result<KernelStore> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    KernelStore::from_bytes(&bytes)
}

/// Reads only the header of a kernel file.
pub fn read_kernel_header(path: &Path) -> Result<KernelHeader> {
    use std::io::Read;
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = [0u8; HEADER_LEN];
    let mut read = 0;
    while read < HEADER_LEN {
        let k = file.read(&mut buf[read..]).map_err(|e| Error::io(path, e))?;
        if k == 0 {
            break;
        }
        read += k;
    }
    KernelHeader::parse(&buf[..read])
}

/// Ordered, duplicate-free list of indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSlice(Vec<usize>);

impl IndexSlice {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!("duplicate index {}", w[0])));
        }
        Ok(IndexSlice(indices))
    }

    /// `0..n`
    pub fn range(n: usize) -> Self {
        IndexSlice((0..n).collect())
    }

    /// Global rows of the given test points of `store`.
    pub fn test_rows(store: &KernelStore, tests: &[usize]) -> Result<Self> {
        if let Some(&bad) = tests.iter().find(|&&t| t >= store.n_test()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                bound: store.n_test(),
            });
        }
        IndexSlice::new(tests.iter().map(|&t| store.test_row(t)).collect())
    }

    /// All test rows of `store`.
    pub fn all_test_rows(store: &KernelStore) -> Self {
        IndexSlice((store.n_train()..store.n_rows()).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn check(&self, bound: usize) -> Result<()> {
        match self.0.iter().find(|&&i| i >= bound) {
            Some(&index) => Err(Error::IndexOutOfRange { index, bound }),
            None => Ok(()),
        }
    }
}

/// Feature-space kernel used in place of an extracted eNTK.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SynthKernel {
    Linear,
    Rbf { bandwidth: f64 },
}

impl SynthKernel {
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            SynthKernel::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            SynthKernel::Rbf { bandwidth } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * bandwidth * bandwidth)).exp()
            }
        }
    }
}

/// Shared0 store with `k(x, x')` over `train ∪ test` rows and `train` columns.
pub fn synth_kernel(
    train: &LabeledDataset,
    test: &LabeledDataset,
    kernel: SynthKernel,
) -> Result<KernelStore> {
    if let SynthKernel::Rbf { bandwidth } = kernel {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rbf bandwidth must be positive, got {bandwidth}"
            )));
        }
    }
    for (name, ds) in [("train", train), ("test", test)] {
        if !ds.has_features() && !ds.is_empty() {
            return Err(Error::MissingFeatures(format!("{name} dataset has no features")));
        }
    }
    if !test.is_empty() && !train.is_empty() && train.dim() != test.dim() {
        return Err(Error::Validation(format!(
            "train features have dimension {}, test features {}",
            train.dim(),
            test.dim()
        )));
    }
    let n = train.len();
    let m = test.len();
    let mut data = vec![0.0; (n + m) * n];
    for i in 0..n {
        let xi = train.features(i).expect("checked");
        data[i * n + i] = kernel.eval(xi, xi);
        for j in 0..i {
            let v = kernel.eval(xi, train.features(j).expect("checked"));
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    for t in 0..m {
        let xt = test.features(t).expect("checked");
        for j in 0..n {
            data[(n + t) * n + j] = kernel.eval(xt, train.features(j).expect("checked"));
        }
    }
    KernelStore::new(n, m, train.n_classes().max(test.n_classes()), Layout::Shared0, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DistributionSpec, Example};

    fn small_store() -> KernelStore {
        KernelStore::new(2, 1, 2, Layout::Shared0, vec![1.0, 0.5, 0.5, 2.0, 0.25, -0.75]).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let store = small_store();
        let bytes = store.to_bytes();
        assert_eq!(bytes.len(), HEADER_LEN + 6 * 8);
        let back = KernelStore::from_bytes(&bytes).unwrap();
        assert_eq!(back, store);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn header_layout_is_exact() {
        let bytes = small_store().to_bytes();
        assert_eq!(&bytes[0..8], b"ENTKFMT1");
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &1u32.to_le_bytes());
        assert_eq!(&bytes[20..24], &2u32.to_le_bytes());
        assert_eq!(&bytes[24..28], &[0, 0, 0, 0]);
        assert_eq!(&bytes[28..36], &1.0f64.to_le_bytes());
    }

    #[test]
    fn bad_magic() {
        let mut bytes = small_store().to_bytes();
        bytes[0..8].copy_from_slice(b"XXXXXXXX");
        assert!(matches!(KernelStore::from_bytes(&bytes), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = small_store().to_bytes();
        bytes[8..12].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            KernelStore::from_bytes(&bytes),
            Err(Error::VersionMismatch { found: 2, .. })
        ));
    }

    #[test]
    fn truncated_payload() {
        let bytes = small_store().to_bytes();
        let cut = &bytes[..bytes.len() - 3];
        assert!(matches!(
            KernelStore::from_bytes(cut),
            Err(Error::Truncated { expected: 48, found: 45 })
        ));
        assert!(matches!(
            KernelStore::from_bytes(&bytes[..10]),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn non_finite_entry() {
        let mut bytes = small_store().to_bytes();
        bytes[HEADER_LEN + 8..HEADER_LEN + 16].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(
            KernelStore::from_bytes(&bytes),
            Err(Error::NonFinite { offset: 1 })
        ));
    }

    #[test]
    fn per_class_and_full_round_trip() {
        let shared = small_store();
        for store in [shared.to_per_class().unwrap(), shared.to_full()] {
            let back = KernelStore::from_bytes(&store.to_bytes()).unwrap();
            assert_eq!(back, store);
        }
    }

    #[test]
    fn slice_test_rows_against_subset() {
        let store = small_store();
        let rows = IndexSlice::all_test_rows(&store);
        let cols = IndexSlice::new(vec![1]).unwrap();
        let k = store.slice(&rows, &cols, ClassSel::Class(0)).unwrap();
        assert_eq!(k.shape(), (1, 1));
        assert_eq!(k[(0, 0)], -0.75);
    }

    #[test]
    fn whole_train_slice() {
        let store = small_store();
        let all = IndexSlice::range(2);
        let k = store.slice(&all, &all, ClassSel::Class(1)).unwrap();
        assert_eq!(k, DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]));
    }

    #[test]
    fn slice_order_is_respected() {
        let ds = DistributionSpec::two_gaussians(2, 1.0, 0.0).sample(3, "p", 4).unwrap();
        let store = synth_kernel(&ds, &ds.subset(&[]).unwrap(), SynthKernel::Linear).unwrap();
        let cols = IndexSlice::range(3);
        let a = store.slice(&IndexSlice::new(vec![2, 0]).unwrap(), &cols, ClassSel::Class(0)).unwrap();
        let b = store.slice(&IndexSlice::new(vec![0, 2]).unwrap(), &cols, ClassSel::Class(0)).unwrap();
        let mut swapped = b.clone();
        swapped.swap_rows(0, 1);
        assert_eq!(a, swapped);
    }

    #[test]
    fn slice_rejects_out_of_range() {
        let store = small_store();
        let bad = IndexSlice::new(vec![2]).unwrap();
        assert!(store
            .slice(&IndexSlice::range(1), &bad, ClassSel::Class(0))
            .is_err());
        assert!(IndexSlice::new(vec![1, 1]).is_err());
    }

    #[test]
    fn full_slice_is_block_diagonal_for_shared() {
        let store = small_store();
        let all = IndexSlice::range(2);
        let k = store.slice(&all, &all, ClassSel::Full).unwrap();
        let direct = store.to_full().slice(&all, &all, ClassSel::Full).unwrap();
        assert_eq!(k, direct);
        assert_eq!(k[(0, 1)], 0.0);
        assert_eq!(k[(1, 1)], 1.0);
        assert_eq!(k[(1, 3)], 0.5);
    }

    #[test]
    fn linear_orthonormal_gives_identity() {
        let ex = |i: usize| {
            let mut f = vec![0.0; 3];
            f[i] = 1.0;
            Example::with_features(format!("e{i}"), i % 2, f)
        };
        let train = LabeledDataset::new((0..3).map(ex).collect(), 2).unwrap();
        let empty = train.subset(&[]).unwrap();
        let store = synth_kernel(&train, &empty, SynthKernel::Linear).unwrap();
        let all = IndexSlice::range(3);
        let k = store.slice(&all, &all, ClassSel::Class(0)).unwrap();
        assert_eq!(k, DMatrix::identity(3, 3));
    }

    #[test]
    fn rbf_matches_scalar_reference() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.5, 2.0]];
        let examples = pts
            .iter()
            .enumerate()
            .map(|(i, p)| Example::with_features(format!("p{i}"), i % 2, p.to_vec()))
            .collect();
        let train = LabeledDataset::new(examples, 2).unwrap();
        let store = synth_kernel(&train, &train.subset(&[]).unwrap(), SynthKernel::Rbf { bandwidth: 1.0 }).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let dx = pts[i][0] - pts[j][0];
                let dy = pts[i][1] - pts[j][1];
                let expected = (-(dx * dx + dy * dy) / 2.0).exp();
                assert!((store.entry(i, 0, j, 0) - expected).abs() < 1e-15);
            }
            assert_eq!(store.entry(i, 0, i, 0), 1.0);
        }
    }

    #[test]
    fn synth_kernel_errors() {
        let plain = LabeledDataset::new(vec![Example::new("a", 0)], 2).unwrap();
        assert!(matches!(
            synth_kernel(&plain, &plain, SynthKernel::Linear),
            Err(Error::MissingFeatures(_))
        ));
        let ds = DistributionSpec::default().sample(3, "p", 0).unwrap();
        assert!(synth_kernel(&ds, &ds, SynthKernel::Rbf { bandwidth: 0.0 }).is_err());
    }

    #[test]
    fn synthetic_kernels_are_exactly_symmetric() {
        let ds = DistributionSpec::default().sample(20, "p", 8).unwrap();
        let test = DistributionSpec::default().sample(5, "t", 9).unwrap();
        for kind in [SynthKernel::Linear, SynthKernel::Rbf { bandwidth: 2.0 }] {
            let store = synth_kernel(&ds, &test, kind).unwrap();
            assert_eq!(store.symmetry_defect(), 0.0);
        }
        let rbf = synth_kernel(&ds, &test, SynthKernel::Rbf { bandwidth: 2.0 }).unwrap();
        assert!(rbf.data().iter().all(|&v| v > 0.0 && v <= 1.0));
    }
}
