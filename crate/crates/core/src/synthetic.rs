//! Self-contained synthetic setups: a fixed test set plus a feature kernel,
//! and the labelled benchmark used by the evaluation harnesses.

use crate::dataset::{DistributionSpec, LabeledDataset};
use crate::error::Result;
use crate::kernel::{synth_kernel, KernelStore, SynthKernel};
use crate::rng::derive_seed;
use crate::shapley::{EngineConfig, KernelGame, Target};

/// RBF bandwidth used when none is configured: the per-class noise scale.
pub fn default_bandwidth(dist: &DistributionSpec) -> f64 {
    dist.scale
}

/// A fixed test set and kernel in which any training set can be valued.
#[derive(Clone, Debug)]
pub struct SyntheticWorld {
    pub test: LabeledDataset,
    pub kernel: SynthKernel,
    pub config: EngineConfig,
}

impl SyntheticWorld {
    /// Test set of `n_test` noise-free draws from `dist`.
    pub fn new(dist: &DistributionSpec, n_test: usize, kernel: SynthKernel, config: EngineConfig, seed: u64) -> Result<Self> {
        let test = dist.without_noise().sample(n_test, "t", derive_seed(seed, &[0x7e57]))?;
        Ok(SyntheticWorld { test, kernel, config })
    }

    pub fn store(&self, train: &LabeledDataset) -> Result<KernelStore> {
        synth_kernel(train, &self.test, self.kernel)
    }

    pub fn game<'a>(&self, store: &'a KernelStore, train: &LabeledDataset) -> Result<KernelGame<'a>> {
        KernelGame::new(store, train, &self.test, &Target::All, self.config.clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub n_heldout: usize,
    pub dist: DistributionSpec,
    pub kernel: SynthKernel,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        let dist = DistributionSpec::default().without_noise();
        let kernel = SynthKernel::Rbf {
            bandwidth: default_bandwidth(&dist),
        };
        BenchmarkConfig {
            n_train: 100,
            n_test: 500,
            n_heldout: 500,
            dist,
            kernel,
            seed: 0,
        }
    }
}

/// Training, target-test and held-out sets with one Shared0 kernel whose test
/// rows are the target test points followed by the held-out points.
#[derive(Clone, Debug)]
pub struct Benchmark {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub heldout: LabeledDataset,
    pub store: KernelStore,
}

impl Benchmark {
    pub fn generate(cfg: &BenchmarkConfig) -> Result<Self> {
        let train = cfg.dist.sample(cfg.n_train, "tr", derive_seed(cfg.seed, &[1]))?;
        let clean = cfg.dist.without_noise();
        let test = clean.sample(cfg.n_test, "te", derive_seed(cfg.seed, &[2]))?;
        let heldout = clean.sample(cfg.n_heldout, "ho", derive_seed(cfg.seed, &[3]))?;
        let rows = test.concat(&heldout)?;
        let store = synth_kernel(&train, &rows, cfg.kernel)?;
        Ok(Benchmark {
            train,
            test,
            heldout,
            store,
        })
    }

    /// Target test rows and held-out rows as one dataset, in kernel row order.
    pub fn test_rows(&self) -> LabeledDataset {
        self.test.concat(&self.heldout).expect("generated sets are compatible")
    }

    pub fn target(&self) -> Target {
        Target::Points((0..self.test.len()).collect())
    }

    pub fn heldout_target(&self) -> Target {
        Target::Points((self.test.len()..self.test.len() + self.heldout.len()).collect())
    }

    /// Game on the target test rows with the given training labels.
    pub fn game(&self, train_labels: &[usize], config: EngineConfig) -> Result<KernelGame<'_>> {
        let train = self.train.with_labels(train_labels.to_vec())?;
        KernelGame::new(&self.store, &train, &self.test_rows(), &self.target(), config)
    }
}
