//! Downstream evaluations of a score table: data removal and data selection
//! curves, mislabel detection, and correlation between two tables.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::Serialize;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::kernel::KernelStore;
use crate::rng::{sample_indices, stream_rng};
use crate::shapley::{EngineConfig, Game, KernelGame, ScoreTable, Target};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    HighFirst,
    LowFirst,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::HighFirst => "high-first",
            Direction::LowFirst => "low-first",
        }
    }

    fn order(self, scores: &ScoreTable) -> Vec<usize> {
        match self {
            Direction::HighFirst => scores.order_high_first(),
            Direction::LowFirst => scores.order_low_first(),
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "high-first" | "high" => Ok(Direction::HighFirst),
            "low-first" | "low" => Ok(Direction::LowFirst),
            other => Err(Error::InvalidArgument(format!("unknown direction {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub level: usize,
    pub fraction: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Curve {
    pub points: Vec<CurvePoint>,
}

impl Curve {
    /// Trapezoidal area over `fraction`.
    pub fn area(&self) -> f64 {
        trapezoid(self.points.iter().map(|p| (p.fraction, p.accuracy)))
    }

    /// `level,fraction,accuracy`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Validation(format!("csv write failed: {e}"));
        w.write_record(["level", "fraction", "accuracy"]).map_err(io)?;
        for p in &self.points {
            w.write_record([p.level.to_string(), p.fraction.to_string(), p.accuracy.to_string()])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn trapezoid(points: impl Iterator<Item = (f64, f64)>) -> f64 {
    let pts: Vec<(f64, f64)> = points.collect();
    pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum()
}

/// Number of levels beyond level 0 for a removal step.
fn level_count(step: f64) -> usize {
    // tolerate 1/step landing a hair above an integer
    ((1.0 / step) - 1e-9).ceil() as usize
}

/// Accuracy after cumulatively removing `k·step` of the points in score
/// order, for `k = 0, 1, …, ⌈1/step⌉`. Levels that would leave no training
/// point are omitted.
pub fn removal_curve(scores: &ScoreTable, direction: Direction, step: f64, game: &KernelGame) -> Result<Curve> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(Error::InvalidArgument(format!("removal step must be in (0, 0.5], got {step}")));
    }
    let n = game.n_players();
    if scores.len() != n {
        return Err(Error::Validation(format!(
            "score table has {} entries, dataset has {n}",
            scores.len()
        )));
    }
    let order = direction.order(scores);
    let mut points = Vec::new();
    for level in 0..=level_count(step) {
        // snap k·step to 12 decimals so 3·0.1 reports as 0.3
        let fraction = ((level as f64 * step * 1e12).round() / 1e12).min(1.0);
        let removed = ((fraction * n as f64).round() as usize).min(n);
        if removed == n {
            break;
        }
        let mut remaining = order[removed..].to_vec();
        remaining.sort_unstable();
        points.push(CurvePoint {
            level,
            fraction,
            accuracy: game.value(&remaining)?,
        });
    }
    Ok(Curve { points })
}

/// Game that measures utility on the held-out rows of `test_rows`.
///
/// `heldout` rows are located in `test_rows` by id; they must all be present
/// and must not overlap the rows selected by `score_target`.
pub fn heldout_game<'a>(
    store: &'a KernelStore,
    train: &LabeledDataset,
    test_rows: &LabeledDataset,
    heldout: &LabeledDataset,
    score_target: &Target,
    config: EngineConfig,
) -> Result<KernelGame<'a>> {
    let positions = heldout
        .ids()
        .iter()
        .map(|id| {
            test_rows
                .position(id)
                .ok_or_else(|| Error::Validation(format!("held-out point {id:?} is not a test row of the kernel")))
        })
        .collect::<Result<Vec<usize>>>()?;
    let target_rows: Vec<usize> = match score_target {
        Target::All => (0..test_rows.len()).collect(),
        Target::Point(t) => vec![*t],
        Target::Points(ts) => ts.clone(),
    };
    if let Some(&p) = positions.iter().find(|p| target_rows.contains(p)) {
        return Err(Error::Validation(format!(
            "held-out point {:?} is also in the scoring target",
            test_rows.ids()[p]
        )));
    }
    let mut labelled = test_rows.clone();
    let mut labels = labelled.labels().to_vec();
    for (i, &p) in positions.iter().enumerate() {
        labels[p] = heldout.labels()[i];
    }
    labelled = labelled.with_labels(labels)?;
    KernelGame::new(store, train, &labelled, &Target::Points(positions), config)
}

/// Held-out accuracy of the top-scored `fraction` of the data, minus the
/// empty-model accuracy, for each fraction in `steps`.
pub fn selection_curve(scores: &ScoreTable, steps: &[f64], heldout: &KernelGame) -> Result<Curve> {
    let n = heldout.n_players();
    if scores.len() != n {
        return Err(Error::Validation(format!(
            "score table has {} entries, dataset has {n}",
            scores.len()
        )));
    }
    if let Some(bad) = steps.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::InvalidArgument(format!("selection fraction {bad} outside [0, 1]")));
    }
    let order = scores.order_high_first();
    let baseline = heldout.empty_value();
    steps
        .iter()
        .enumerate()
        .map(|(level, &fraction)| {
            let size = ((fraction * n as f64).round() as usize).min(n);
            let mut chosen = order[..size].to_vec();
            chosen.sort_unstable();
            Ok(CurvePoint {
                level,
                fraction,
                accuracy: heldout.value(&chosen)? - baseline,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(|points| Curve { points })
}

/// Flips `round(fraction·n)` labels, chosen at random, each to a uniformly
/// drawn different class. Returns the new labels and the sorted flipped
/// indices.
pub fn flip_labels(labels: &[usize], n_classes: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 0.5) {
        return Err(Error::InvalidArgument(format!("flip fraction must be in (0, 0.5), got {fraction}")));
    }
    if n_classes < 2 {
        return Err(Error::InvalidArgument("need at least 2 classes to flip labels".into()));
    }
    let n = labels.len();
    let mut rng = stream_rng(seed, 0);
    let mut flipped = sample_indices(n, (fraction * n as f64).round() as usize, &mut rng);
    flipped.sort_unstable();
    let mut out = labels.to_vec();
    for &i in &flipped {
        let shift = rng.random_range(1..n_classes);
        out[i] = (labels[i] + shift) % n_classes;
    }
    Ok((out, flipped))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetectionPoint {
    pub inspected: f64,
    pub found: f64,
    pub baseline: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectionCurve {
    pub points: Vec<DetectionPoint>,
}

impl DetectionCurve {
    pub fn area(&self) -> f64 {
        trapezoid(self.points.iter().map(|p| (p.inspected, p.found)))
    }

    pub fn baseline_area(&self) -> f64 {
        trapezoid(self.points.iter().map(|p| (p.inspected, p.baseline)))
    }

    /// `inspected_fraction,found_fraction,baseline`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Validation(format!("csv write failed: {e}"));
        w.write_record(["inspected_fraction", "found_fraction", "baseline"])
            .map_err(io)?;
        for p in &self.points {
            w.write_record([p.inspected.to_string(), p.found.to_string(), p.baseline.to_string()])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

pub const DETECTION_GRID: usize = 20;

/// Fraction of `flipped` found when inspecting points from the lowest score
/// upward, on a 5% grid of inspected fractions.
pub fn detection_curve(scores: &ScoreTable, flipped: &[usize]) -> Result<DetectionCurve> {
    let n = scores.len();
    if flipped.is_empty() {
        return Err(Error::InvalidArgument("no flipped points to detect".into()));
    }
    if let Some(&bad) = flipped.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: bad, bound: n });
    }
    let mut is_flipped = vec![false; n];
    for &i in flipped {
        is_flipped[i] = true;
    }
    let total = is_flipped.iter().filter(|&&f| f).count() as f64;
    let order = scores.order_low_first();
    let points = (0..=DETECTION_GRID)
        .map(|j| {
            let q = j as f64 / DETECTION_GRID as f64;
            let inspected = (q * n as f64).round() as usize;
            let found = order[..inspected].iter().filter(|&&i| is_flipped[i]).count() as f64;
            DetectionPoint {
                inspected: q,
                found: found / total,
                baseline: q,
            }
        })
        .collect();
    Ok(DetectionCurve { points })
}

#[derive(Clone, Debug)]
pub struct MislabelOutcome {
    pub labels: Vec<usize>,
    pub flipped: Vec<usize>,
    pub scores: ScoreTable,
    pub curve: DetectionCurve,
}

/// Flips labels of the training set of `game`, scores the corrupted data with
/// `scorer` (kernel unchanged) and builds the detection curve.
pub fn mislabel_detection<F>(
    game: &KernelGame,
    labels: &[usize],
    flip_fraction: f64,
    seed: u64,
    scorer: F,
) -> Result<MislabelOutcome>
where
    F: FnOnce(&KernelGame) -> Result<ScoreTable>,
{
    if labels.len() != game.n_players() {
        return Err(Error::Validation(format!(
            "{} labels for {} training points",
            labels.len(),
            game.n_players()
        )));
    }
    let (noisy, flipped) = flip_labels(labels, game.store().n_classes(), flip_fraction, seed)?;
    let corrupted = game.with_train_labels(&noisy);
    let scores = scorer(&corrupted)?;
    let curve = detection_curve(&scores, &flipped)?;
    Ok(MislabelOutcome {
        labels: noisy,
        flipped,
        scores,
        curve,
    })
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("input is constant".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && xs[idx[end]] == xs[idx[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Correlation {
    pub pearson: f64,
    pub spearman: f64,
}

/// Pearson and Spearman correlation of two equally long score vectors.
pub fn correlate(a: &[f64], b: &[f64]) -> Result<Correlation> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!("score vectors differ in length ({} vs {})", a.len(), b.len())));
    }
    if a.len() < 3 {
        return Err(Error::UndefinedCorrelation(format!("need at least 3 points, got {}", a.len())));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::Validation("scores must be finite".into()));
    }
    Ok(Correlation {
        pearson: pearson(a, b)?,
        spearman: pearson(&average_ranks(a), &average_ranks(b))?,
    })
}

/// [`correlate`] after aligning `b` to the ids of `a`.
pub fn correlate_tables(a: &ScoreTable, b: &ScoreTable) -> Result<Correlation> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!("tables differ in size ({} vs {})", a.len(), b.len())));
    }
    let pos: HashMap<&str, usize> = b.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let aligned = a
        .ids
        .iter()
        .map(|id| {
            pos.get(id.as_str())
                .map(|&i| b.scores[i])
                .ok_or_else(|| Error::Validation(format!("id {id:?} missing from second table")))
        })
        .collect::<Result<Vec<f64>>>()?;
    correlate(&a.scores, &aligned)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Example;
    use crate::kernel::{synth_kernel, SynthKernel};
    use crate::shapley::Method;

    fn setup() -> (LabeledDataset, LabeledDataset, KernelStore) {
        let train = LabeledDataset::new(
            (0..10)
                .map(|i| {
                    let x = i as f64 - 4.5;
                    Example::with_features(format!("a{i}"), usize::from(x > 0.0), vec![x])
                })
                .collect(),
            2,
        )
        .unwrap();
        let test = LabeledDataset::new(
            (0..8)
                .map(|i| {
                    let x = i as f64 - 3.3;
                    Example::with_features(format!("t{i}"), usize::from(x > 0.0), vec![x])
                })
                .collect(),
            2,
        )
        .unwrap();
        let store = synth_kernel(&train, &test, SynthKernel::Rbf { bandwidth: 1.5 }).unwrap();
        (train, test, store)
    }

    #[test]
    fn total_tie_gives_identical_curves() {
        let (train, test, store) = setup();
        let game = KernelGame::new(&store, &train, &test, &Target::All, EngineConfig::default()).unwrap();
        let flat = ScoreTable::from_scores(vec![0.0; 10], Method::Mc);
        let hi = removal_curve(&flat, Direction::HighFirst, 0.1, &game).unwrap();
        let lo = removal_curve(&flat, Direction::LowFirst, 0.1, &game).unwrap();
        assert_eq!(hi, lo);
        assert_eq!(hi.points.len(), 10);
        assert_eq!(hi.points[0].accuracy, game.value(&(0..10).collect::<Vec<_>>()).unwrap());
    }

    #[test]
    fn level_count_matches_step() {
        assert_eq!(level_count(0.1), 10);
        assert_eq!(level_count(0.3), 4);
        assert_eq!(level_count(0.5), 2);
        assert_eq!(level_count(0.25), 4);
    }

    #[test]
    fn removal_rejects_bad_step() {
        let (train, test, store) = setup();
        let game = KernelGame::new(&store, &train, &test, &Target::All, EngineConfig::default()).unwrap();
        let s = ScoreTable::from_scores(vec![0.0; 10], Method::Mc);
        assert!(removal_curve(&s, Direction::HighFirst, 0.0, &game).is_err());
        assert!(removal_curve(&s, Direction::HighFirst, 0.6, &game).is_err());
    }

    #[test]
    fn selection_endpoint_and_heldout_checks() {
        let (train, test, store) = setup();
        let heldout = test.subset(&[5, 6, 7]).unwrap();
        let target = Target::Points(vec![0, 1, 2, 3, 4]);
        let game = heldout_game(&store, &train, &test, &heldout, &target, EngineConfig::default()).unwrap();
        let s = ScoreTable::from_scores(vec![0.0; 10], Method::Mc);
        let curve = selection_curve(&s, &[0.0, 0.5, 1.0], &game).unwrap();
        let all: Vec<usize> = (0..10).collect();
        assert_eq!(curve.points[0].accuracy, 0.0);
        assert_eq!(curve.points[2].accuracy, game.value(&all).unwrap() - game.empty_value());

        assert!(heldout_game(&store, &train, &test, &heldout, &Target::All, EngineConfig::default()).is_err());
        let stranger = LabeledDataset::new(vec![Example::new("zz", 0)], 2).unwrap();
        assert!(heldout_game(&store, &train, &test, &stranger, &target, EngineConfig::default()).is_err());
    }

    #[test]
    fn flips_change_class() {
        let labels: Vec<usize> = (0..100).map(|i| i % 3).collect();
        let (noisy, flipped) = flip_labels(&labels, 3, 0.1, 4).unwrap();
        assert_eq!(flipped.len(), 10);
        for i in 0..100 {
            assert_eq!(noisy[i] != labels[i], flipped.contains(&i));
        }
        assert_eq!(flip_labels(&labels, 3, 0.1, 4).unwrap(), (noisy, flipped));
        assert!(flip_labels(&labels, 3, 0.5, 4).is_err());
    }

    #[test]
    fn perfect_separation_hits_one_at_flip_fraction() {
        let mut scores = vec![1.0; 100];
        let flipped: Vec<usize> = (0..10).map(|i| i * 7).collect();
        for &i in &flipped {
            scores[i] = -1.0;
        }
        let curve = detection_curve(&ScoreTable::from_scores(scores, Method::Mc), &flipped).unwrap();
        assert_eq!(curve.points.len(), 21);
        assert_eq!(curve.points[2].inspected, 0.1);
        assert_eq!(curve.points[2].found, 1.0);
        assert_eq!(curve.points[1].found, 0.5);
        assert_eq!(curve.points.last().unwrap().found, 1.0);
        assert!((curve.baseline_area() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn correlation_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let c = correlate(&a, &a).unwrap();
        assert!((c.pearson - 1.0).abs() < 1e-15 && (c.spearman - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        let c = correlate(&a, &neg).unwrap();
        assert!((c.pearson + 1.0).abs() < 1e-15 && (c.spearman + 1.0).abs() < 1e-15);
        let c = correlate(&a, &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((c.spearman - 0.8).abs() < 1e-12);
        assert!(matches!(correlate(&a, &[2.0; 4]), Err(Error::UndefinedCorrelation(_))));
        assert!(correlate(&a[..2], &a[..2]).is_err());
    }

    #[test]
    fn ties_share_average_rank() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn tables_align_by_id() {
        let a = ScoreTable::from_scores(vec![1.0, 2.0, 3.0], Method::Mc);
        let mut b = a.clone();
        b.ids.reverse();
        b.scores.reverse();
        let c = correlate_tables(&a, &b).unwrap();
        assert!((c.pearson - 1.0).abs() < 1e-15);
    }
}
