use num_rational::Ratio;

use crate::dataset::{LabeledDataset, OneHotLabels};
use crate::error::{Error, Result};
use crate::kernel::{IndexSlice, KernelStore};
use crate::linalg::JitterPolicy;
use crate::regression::{fit_predict, hits, EmptyModelPolicy, RegressionState};

/// A cooperative game over training points: the utility of every subset,
/// plus an incremental interface for permutation scans.
pub trait Game: Sync {
    type State<'s>: Send
    where
        Self: 's;

    fn n_players(&self) -> usize;

    /// Utility of the empty coalition.
    fn empty_value(&self) -> f64;

    /// Utility of `subset`, computed from scratch.
    fn value(&self, subset: &[usize]) -> Result<f64>;

    /// Fresh state for a permutation scan. `attempt > 0` asks for a more
    /// conservative numerical setup after a failed scan.
    fn start(&self, attempt: usize) -> Result<Self::State<'_>>;

    /// Adds `player` to the state and returns the new coalition's utility.
    fn push(&self, state: &mut Self::State<'_>, player: usize) -> Result<f64>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    pub empty: EmptyModelPolicy,
    pub jitter: JitterPolicy,
    /// Largest `n` accepted by exact enumeration.
    pub enumeration_cap: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            empty: EmptyModelPolicy::default(),
            jitter: JitterPolicy::default(),
            enumeration_cap: 12,
        }
    }
}

/// Which test rows the utility is measured on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    /// Every test row of the kernel.
    All,
    /// A single test point, by position among the test rows.
    Point(usize),
    /// An explicit list of test positions.
    Points(Vec<usize>),
}

impl Target {
    fn positions(&self, n_test: usize) -> Result<Vec<usize>> {
        let positions = match self {
            Target::All => (0..n_test).collect(),
            Target::Point(t) => vec![*t],
            Target::Points(ts) => ts.clone(),
        };
        if positions.is_empty() {
            return Err(Error::InvalidArgument("target selects no test rows".into()));
        }
        if let Some(&bad) = positions.iter().find(|&&t| t >= n_test) {
            return Err(Error::IndexOutOfRange { index: bad, bound: n_test });
        }
        Ok(positions)
    }
}

/// The kernel-regression accuracy game.
#[derive(Clone, Debug)]
pub struct KernelGame<'a> {
    store: &'a KernelStore,
    train_ids: Vec<String>,
    labels: OneHotLabels,
    queries: Vec<usize>,
    truth: Vec<usize>,
    target_name: String,
    config: EngineConfig,
}

impl<'a> KernelGame<'a> {
    pub fn new(
        store: &'a KernelStore,
        train: &LabeledDataset,
        test: &LabeledDataset,
        target: &Target,
        config: EngineConfig,
    ) -> Result<Self> {
        if train.len() != store.n_train() || test.len() != store.n_test() {
            return Err(Error::Validation(format!(
                "datasets have {} train / {} test rows, kernel has {} / {}",
                train.len(),
                test.len(),
                store.n_train(),
                store.n_test()
            )));
        }
        if train.n_classes() > store.n_classes() || test.n_classes() > store.n_classes() {
            return Err(Error::Validation(format!(
                "labels declare {} classes, kernel has {}",
                train.n_classes().max(test.n_classes()),
                store.n_classes()
            )));
        }
        let positions = target.positions(store.n_test())?;
        let target_name = match target {
            Target::All => "all".to_string(),
            Target::Point(t) => test.ids()[*t].clone(),
            Target::Points(ts) if ts.len() == 1 => test.ids()[ts[0]].clone(),
            Target::Points(ts) => format!("{}-rows", ts.len()),
        };
        Ok(KernelGame {
            store,
            train_ids: train.ids().to_vec(),
            labels: OneHotLabels::from_labels(train.labels(), store.n_classes()),
            queries: positions.iter().map(|&t| store.test_row(t)).collect(),
            truth: positions.iter().map(|&t| test.labels()[t]).collect(),
            target_name,
            config,
        })
    }

    pub fn store(&self) -> &KernelStore {
        self.store
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn train_ids(&self) -> &[String] {
        &self.train_ids
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn n_queries(&self) -> usize {
        self.queries.len()
    }

    /// Correct predictions of the model fitted on `subset` (empty model for `[]`).
    pub fn hit_ratio(&self, subset: &[usize]) -> Result<Ratio<i128>> {
        if subset.is_empty() {
            let (num, den) = self.config.empty.accuracy_ratio(&self.truth, self.store.n_classes());
            return Ok(Ratio::new(num as i128, den as i128));
        }
        let fit = fit_predict(
            self.store,
            &IndexSlice::new(subset.to_vec())?,
            &self.labels,
            &IndexSlice::new(self.queries.clone())?,
            &self.config.jitter,
        )?;
        Ok(Ratio::new(
            hits(&fit.predictions, &self.truth) as i128,
            self.truth.len() as i128,
        ))
    }

    /// Same game with labels replaced (kernel unchanged).
    pub fn with_train_labels(&self, labels: &[usize]) -> Self {
        KernelGame {
            labels: OneHotLabels::from_labels(labels, self.store.n_classes()),
            ..self.clone()
        }
    }
}

impl Game for KernelGame<'_> {
    type State<'s>
        = KernelScan<'s>
    where
        Self: 's;

    fn n_players(&self) -> usize {
        self.store.n_train()
    }

    fn empty_value(&self) -> f64 {
        self.config.empty.accuracy(&self.truth, self.store.n_classes())
    }

    fn value(&self, subset: &[usize]) -> Result<f64> {
        let r = self.hit_ratio(subset)?;
        Ok(*r.numer() as f64 / *r.denom() as f64)
    }

    fn start(&self, attempt: usize) -> Result<KernelScan<'_>> {
        let mut policy = self.config.jitter.clone();
        let mut jitter = 0.0;
        if attempt > 0 {
            // retry: start at the top of the schedule and allow two more decades
            let top = policy.levels.last().copied().unwrap_or(1e-8);
            policy.levels.extend([top * 10.0, top * 100.0]);
            jitter = top;
        }
        Ok(KernelScan {
            state: RegressionState::with_jitter(self.store, &self.labels, policy, jitter)?,
        })
    }

    fn push(&self, scan: &mut KernelScan<'_>, player: usize) -> Result<f64> {
        scan.state.extend(player)?;
        let hits = scan.state.hits(&self.queries, &self.truth);
        Ok(hits as f64 / self.truth.len() as f64)
    }
}

/// Permutation-scan state of a [`KernelGame`].
#[derive(Debug)]
pub struct KernelScan<'s> {
    pub state: RegressionState<'s>,
}

/// Utility table indexed by coalition bitmask; used to test the estimators
/// against arbitrary games.
#[derive(Clone, Debug)]
pub struct TableGame {
    n: usize,
    values: Vec<f64>,
}

impl TableGame {
    pub fn new(n: usize, values: Vec<f64>) -> Self {
        assert!(n < 32, "table games are limited to 31 players");
        assert_eq!(values.len(), 1 << n, "table needs 2^n values");
        TableGame { n, values }
    }

    pub fn from_fn(n: usize, f: impl Fn(u32) -> f64) -> Self {
        TableGame::new(n, (0..1u32 << n).map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Game for TableGame {
    type State<'s> = u32;

    fn n_players(&self) -> usize {
        self.n
    }

    fn empty_value(&self) -> f64 {
        self.values[0]
    }

    fn value(&self, subset: &[usize]) -> Result<f64> {
        let mask = subset.iter().fold(0u32, |m, &i| m | (1 << i));
        Ok(self.values[mask as usize])
    }

    fn start(&self, _attempt: usize) -> Result<u32> {
        Ok(0)
    }

    fn push(&self, state: &mut u32, player: usize) -> Result<f64> {
        *state |= 1 << player;
        Ok(self.values[*state as usize])
    }
}
