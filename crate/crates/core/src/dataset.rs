//! Labelled datasets, one-hot label encodings and the synthetic data generator.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// A single training or test example.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub id: String,
    pub label: usize,
    pub features: Option<Vec<f64>>,
}

impl Example {
    pub fn new(id: impl Into<String>, label: usize) -> Self {
        Example {
            id: id.into(),
            label,
            features: None,
        }
    }

    pub fn with_features(id: impl Into<String>, label: usize, features: Vec<f64>) -> Self {
        Example {
            id: id.into(),
            label,
            features: Some(features),
        }
    }
}

/// Indexed examples with integer class labels. Row order is the canonical index order.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    ids: Vec<String>,
    labels: Vec<usize>,
    n_classes: usize,
    dim: usize,
    features: Option<Vec<f64>>,
}

impl LabeledDataset {
    /// Builds and validates a dataset. All examples must agree on whether they carry features.
    pub fn new(examples: Vec<Example>, n_classes: usize) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::Validation(format!(
                "need at least 2 classes, got {n_classes}"
            )));
        }
        let with_features = examples.first().is_some_and(|e| e.features.is_some());
        let dim = examples
            .first()
            .and_then(|e| e.features.as_ref())
            .map_or(0, Vec::len);
        if with_features && dim == 0 {
            return Err(Error::Validation("feature vectors must be non-empty".into()));
        }

        let mut seen = HashSet::with_capacity(examples.len());
        let mut ids = Vec::with_capacity(examples.len());
        let mut labels = Vec::with_capacity(examples.len());
        let mut features = with_features.then(|| Vec::with_capacity(examples.len() * dim));
        for (i, ex) in examples.into_iter().enumerate() {
            if ex.label >= n_classes {
                return Err(Error::Validation(format!(
                    "example {i} ({}) has label {} but only {n_classes} classes are declared",
                    ex.id, ex.label
                )));
            }
            if !seen.insert(ex.id.clone()) {
                return Err(Error::Validation(format!("duplicate id {:?}", ex.id)));
            }
            match (&mut features, ex.features) {
                (Some(buf), Some(f)) if f.len() == dim => buf.extend_from_slice(&f),
                (Some(_), Some(f)) => {
                    return Err(Error::Validation(format!(
                        "example {i} has {} features, expected {dim}",
                        f.len()
                    )))
                }
                (None, None) => {}
                _ => {
                    return Err(Error::Validation(format!(
                        "example {i} disagrees with example 0 on feature presence"
                    )))
                }
            }
            ids.push(ex.id);
            labels.push(ex.label);
        }
        Ok(LabeledDataset {
            ids,
            labels,
            n_classes,
            dim,
            features,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn has_features(&self) -> bool {
        self.features.is_some()
    }

    /// Feature dimension, 0 when the dataset carries no features.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self, i: usize) -> Option<&[f64]> {
        self.features
            .as_ref()
            .map(|f| &f[i * self.dim..(i + 1) * self.dim])
    }

    pub fn example(&self, i: usize) -> Example {
        Example {
            id: self.ids[i].clone(),
            label: self.labels[i],
            features: self.features(i).map(<[f64]>::to_vec),
        }
    }

    pub fn examples(&self) -> impl Iterator<Item = Example> + '_ {
        (0..self.len()).map(|i| self.example(i))
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Same examples with the labels replaced.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::Validation(format!(
                "{} labels for {} examples",
                labels.len(),
                self.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= self.n_classes) {
            return Err(Error::Validation(format!(
                "label {bad} out of range for {} classes",
                self.n_classes
            )));
        }
        Ok(LabeledDataset {
            labels,
            ..self.clone()
        })
    }

    /// Concatenates two datasets with matching class count and feature shape.
    pub fn concat(&self, other: &LabeledDataset) -> Result<Self> {
        let n_classes = self.n_classes.max(other.n_classes);
        LabeledDataset::new(self.examples().chain(other.examples()).collect(), n_classes)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut out = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    bound: self.len(),
                });
            }
            out.push(self.example(i));
        }
        LabeledDataset::new(out, self.n_classes)
    }

    pub fn one_hot(&self) -> OneHotLabels {
        OneHotLabels::from_labels(&self.labels, self.n_classes)
    }

    /// Writes the `id,label[,f0,f1,...]` CSV form.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string(), "label".to_string()];
        header.extend((0..self.dim).map(|k| format!("f{k}")));
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.len() {
            let mut rec = vec![self.ids[i].clone(), self.labels[i].to_string()];
            if let Some(f) = self.features(i) {
                rec.extend(f.iter().map(|v| v.to_string()));
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Reads a labels CSV (`id,label` header, optional trailing feature columns).
///
/// When `n_classes` is `None` the class count is inferred as `1 + max label`
/// (and at least 2).
pub fn read_dataset<R: Read>(reader: R, n_classes: Option<usize>) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.len() < 2 || &header[0] != "id" || &header[1] != "label" {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `id,label`, found `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let dim = header.len() - 2;

    let mut examples = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let label: usize = record[1].parse().map_err(|_| Error::Parse {
            line,
            message: format!("label {:?} is not a non-negative integer", &record[1]),
        })?;
        let features = if dim > 0 {
            let mut f = Vec::with_capacity(dim);
            for field in record.iter().skip(2) {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("feature {field:?} is not a number"),
                })?;
                f.push(v);
            }
            Some(f)
        } else {
            None
        };
        examples.push(Example {
            id: record[0].to_string(),
            label,
            features,
        });
    }

    let inferred = examples.iter().map(|e| e.label + 1).max().unwrap_or(2).max(2);
    LabeledDataset::new(examples, n_classes.unwrap_or(inferred))
}

pub fn load_dataset(path: &Path, n_classes: Option<usize>) -> Result<LabeledDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(std::io::BufReader::new(file), n_classes)
}

/// One-hot labels flattened class-major within point: entry `i*C + c` is 1 iff `y_i = c`.
#[derive(Clone, Debug, PartialEq)]
pub struct OneHotLabels {
    n_classes: usize,
    data: Vec<f64>,
}

impl OneHotLabels {
    pub fn from_labels(labels: &[usize], n_classes: usize) -> Self {
        let mut data = vec![0.0; labels.len() * n_classes];
        for (i, &y) in labels.iter().enumerate() {
            data[i * n_classes + y] = 1.0;
        }
        OneHotLabels { n_classes, data }
    }

    pub fn n_points(&self) -> usize {
        self.data.len() / self.n_classes
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// The length-C row for point `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Class-conditional Gaussian mixture with an optional label-flip overlay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistributionSpec {
    /// One mean vector per class; all of the same dimension.
    pub means: Vec<Vec<f64>>,
    /// Isotropic standard deviation around each mean.
    pub scale: f64,
    /// Probability that a draw's label is replaced by a different class.
    pub flip_prob: f64,
}

impl Default for DistributionSpec {
    fn default() -> Self {
        DistributionSpec::two_gaussians(10, 1.0, 0.1)
    }
}

impl DistributionSpec {
    /// Two classes at `±e₁` in `dim` dimensions.
    pub fn two_gaussians(dim: usize, scale: f64, flip_prob: f64) -> Self {
        let mut pos = vec![0.0; dim];
        let mut neg = vec![0.0; dim];
        if dim > 0 {
            pos[0] = 1.0;
            neg[0] = -1.0;
        }
        // class 0 sits at -e1, class 1 at +e1
        DistributionSpec {
            means: vec![neg, pos],
            scale,
            flip_prob,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn without_noise(&self) -> Self {
        DistributionSpec {
            flip_prob: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.means.len() < 2 {
            return Err(Error::Validation("distribution needs at least 2 class means".into()));
        }
        let d = self.dim();
        if d == 0 || self.means.iter().any(|m| m.len() != d) {
            return Err(Error::Validation(
                "class means must share a dimension d >= 1".into(),
            ));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Validation(format!(
                "covariance scale must be > 0, got {}",
                self.scale
            )));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::Validation(format!(
                "flip probability must lie in [0,1], got {}",
                self.flip_prob
            )));
        }
        Ok(())
    }

    /// Draws one example. Labels are uniform over classes, features are
    /// `mean[y] + scale * N(0, I)`, then the label flips with `flip_prob`.
    pub fn draw<R: Rng + ?Sized>(&self, id: String, rng: &mut R) -> Example {
        let c = self.n_classes();
        let true_label = rng.random_range(0..c);
        let features: Vec<f64> = self.means[true_label]
            .iter()
            .map(|m| {
                let z: f64 = rng.sample(StandardNormal);
                m + self.scale * z
            })
            .collect();
        let mut label = true_label;
        if self.flip_prob > 0.0 && rng.random::<f64>() < self.flip_prob {
            let shift = rng.random_range(1..c);
            label = (true_label + shift) % c;
        }
        Example::with_features(id, label, features)
    }

    /// `n` i.i.d. draws with ids `{prefix}{j}`.
    pub fn sample(&self, n: usize, prefix: &str, seed: u64) -> Result<LabeledDataset> {
        self.validate()?;
        let mut rng = stream_rng(seed, 0);
        let examples = (0..n)
            .map(|j| self.draw(format!("{prefix}{j}"), &mut rng))
            .collect();
        LabeledDataset::new(examples, self.n_classes())
    }
}

/// The dataset `{fixed_point} ∪ n_others i.i.d. draws`, with the fixed point at index 0.
///
/// The draws depend only on `(dist, n_others, seed)`, so every fixed point
/// placed with the same seed shares the same complement.
pub fn sample_complement(
    dist: &DistributionSpec,
    fixed_point: &Example,
    n_others: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    dist.validate()?;
    match &fixed_point.features {
        Some(f) if f.len() == dist.dim() => {}
        Some(f) => {
            return Err(Error::Validation(format!(
                "fixed point has {} features, distribution has {}",
                f.len(),
                dist.dim()
            )))
        }
        None => {
            return Err(Error::MissingFeatures(format!(
                "fixed point {:?} carries no features",
                fixed_point.id
            )))
        }
    }
    let mut rng = stream_rng(seed, 0);
    let mut examples = Vec::with_capacity(n_others + 1);
    examples.push(fixed_point.clone());
    for j in 0..n_others {
        examples.push(dist.draw(format!("c{seed}-{j}"), &mut rng));
    }
    LabeledDataset::new(examples, dist.n_classes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(text: &str, c: Option<usize>) -> Result<LabeledDataset> {
        read_dataset(text.as_bytes(), c)
    }

    #[test]
    fn loads_two_rows() {
        let ds = csv("id,label\na,0\nb,1\n", None).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.ids(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn declared_class_count_is_enforced() {
        let err = csv("id,label\na,2\n", Some(2)).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn infers_three_classes_from_hundred_rows() {
        let mut text = String::from("id,label\n");
        for i in 0..100 {
            text.push_str(&format!("p{i},{}\n", i % 3));
        }
        let ds = csv(&text, None).unwrap();
        assert_eq!((ds.len(), ds.n_classes()), (100, 3));
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = csv("id,label\na,0\nb,x\n", None).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn bad_header_rejected() {
        assert!(matches!(
            csv("name,label\na,0\n", None),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        assert!(csv("id,label\na,0\na,1\n", None).is_err());
    }

    #[test]
    fn features_round_trip_through_csv() {
        let ds = DistributionSpec::two_gaussians(3, 1.0, 0.0)
            .sample(5, "x", 1)
            .unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = read_dataset(buf.as_slice(), Some(2)).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn one_hot_layout() {
        let oh = OneHotLabels::from_labels(&[1, 0, 2], 3);
        assert_eq!(
            oh.as_slice(),
            &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]
        );
        for i in 0..3 {
            assert_eq!(oh.row(i).iter().sum::<f64>(), 1.0);
        }
    }

    fn fixed() -> Example {
        Example::with_features("z", 1, vec![1.0; 10])
    }

    #[test]
    fn empty_complement_is_singleton() {
        let ds = sample_complement(&DistributionSpec::default(), &fixed(), 0, 5).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.example(0), fixed());
    }

    #[test]
    fn complement_is_deterministic() {
        let dist = DistributionSpec::default();
        let a = sample_complement(&dist, &fixed(), 30, 11).unwrap();
        let b = sample_complement(&dist, &fixed(), 30, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn five_seeds_give_five_distinct_complements() {
        let dist = DistributionSpec::default();
        let sets: Vec<Vec<f64>> = (0..5)
            .map(|s| {
                let ds = sample_complement(&dist, &fixed(), 499, s).unwrap();
                assert_eq!(ds.len(), 500);
                (1..ds.len()).flat_map(|i| ds.features(i).unwrap().to_vec()).collect()
            })
            .collect();
        for i in 0..5 {
            for j in i + 1..5 {
                assert_ne!(sets[i], sets[j], "complements {i} and {j} coincide");
            }
        }
    }

    #[test]
    fn complement_shared_across_fixed_points() {
        let dist = DistributionSpec::default();
        let other = Example::with_features("w", 0, vec![-1.0; 10]);
        let a = sample_complement(&dist, &fixed(), 8, 2).unwrap();
        let b = sample_complement(&dist, &other, 8, 2).unwrap();
        for i in 1..9 {
            assert_eq!(a.example(i), b.example(i));
        }
    }

    #[test]
    fn distribution_validation() {
        let mut d = DistributionSpec::default();
        d.flip_prob = 1.5;
        assert!(d.validate().is_err());
        let mut d = DistributionSpec::default();
        d.scale = 0.0;
        assert!(d.validate().is_err());
    }

    #[test]
    fn flip_rate_is_roughly_respected() {
        let dist = DistributionSpec::two_gaussians(1, 0.01, 0.2);
        let ds = dist.sample(4000, "p", 3).unwrap();
        // with tiny scale the sign of the feature reveals the true class
        let flipped = (0..ds.len())
            .filter(|&i| (ds.features(i).unwrap()[0] > 0.0) != (ds.labels()[i] == 1))
            .count() as f64
            / 4000.0;
        assert!((flipped - 0.2).abs() < 0.03, "{flipped}");
    }
}
