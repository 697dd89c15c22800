//! Sampled expected marginal contributions `τ_k` and their variances `δ_k`
//! for one fixed point as its companion dataset is resampled.

use rayon::prelude::*;

use super::game::Game;
use crate::dataset::{sample_complement, DistributionSpec, Example, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, sample_indices, stream_rng, StreamRng};
use crate::synthetic::SyntheticWorld;

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileEntry {
    /// Subset size the point is added to.
    pub k: usize,
    /// Sample mean of the marginal contribution.
    pub tau: f64,
    /// Sample variance (unbiased) of the marginal contribution.
    pub delta: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginalProfile {
    /// Dataset size, so valid subset sizes are `0..n`.
    pub n: usize,
    pub entries: Vec<ProfileEntry>,
}

impl MarginalProfile {
    pub fn entry(&self, k: usize) -> Option<&ProfileEntry> {
        self.entries.iter().find(|e| e.k == k)
    }

    /// True when every size `0..n` is present.
    pub fn is_complete(&self) -> bool {
        (0..self.n).all(|k| self.entry(k).is_some())
    }

    /// Least-squares slope of `|τ̂_k|` against `k`.
    pub fn abs_tau_slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self.entries.iter().map(|e| (e.k as f64, e.tau.abs())).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        if sxx == 0.0 {
            0.0
        } else {
            sxy / sxx
        }
    }
}

/// Builds a profile from a marginal sampler. `sampler(k, rng)` must return one
/// draw of the marginal contribution to a size-`k` subset; draw `s` of size
/// `k` uses its own stream so the profile is reproducible under parallelism.
pub fn profile_from_sampler<F>(n: usize, sizes: &[usize], samples: usize, seed: u64, sampler: F) -> Result<MarginalProfile>
where
    F: Fn(usize, &mut StreamRng) -> Result<f64> + Sync,
{
    if samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 samples per size, got {samples}"
        )));
    }
    if let Some(&k) = sizes.iter().find(|&&k| k >= n) {
        return Err(Error::InvalidArgument(format!(
            "subset size {k} is not below the dataset size {n}"
        )));
    }
    let entries = sizes
        .par_iter()
        .map(|&k| {
            let draws = (0..samples)
                .map(|s| {
                    let mut rng = stream_rng(derive_seed(seed, &[k as u64, s as u64]), 0);
                    sampler(k, &mut rng)
                })
                .collect::<Result<Vec<f64>>>()?;
            let mean = draws.iter().sum::<f64>() / samples as f64;
            let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
            Ok(ProfileEntry {
                k,
                tau: mean,
                delta: var,
                samples,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MarginalProfile { n, entries })
}

/// Profile of `point` in datasets of size `n` drawn from `dist`, with
/// utilities measured in `world`.
///
/// Each draw samples a fresh complement of `n − 1` points, then a random
/// size-`k` subset of it, and records `U(S ∪ {point}) − U(S)`.
pub fn estimate_marginal_profile(
    point: &Example,
    dist: &DistributionSpec,
    world: &SyntheticWorld,
    n: usize,
    sizes: &[usize],
    samples: usize,
    seed: u64,
) -> Result<MarginalProfile> {
    if n == 0 {
        return Err(Error::InvalidArgument("dataset size must be positive".into()));
    }
    let complement = |s: u64| sample_complement(dist, point, n - 1, s);
    estimate_profile_with(&complement, world, n, sizes, samples, seed)
}

/// As [`estimate_marginal_profile`], with a caller-supplied complement source.
/// `complement(seed)` must return a dataset of size `n` with the fixed point at index 0.
pub fn estimate_profile_with<C>(
    complement: &C,
    world: &SyntheticWorld,
    n: usize,
    sizes: &[usize],
    samples: usize,
    seed: u64,
) -> Result<MarginalProfile>
where
    C: Fn(u64) -> Result<LabeledDataset> + Sync,
{
    profile_from_sampler(n, sizes, samples, seed, |k, rng| {
        let ds = complement(rand::Rng::random(rng))?;
        if ds.len() != n {
            return Err(Error::Validation(format!(
                "complement source returned {} points, expected {n}",
                ds.len()
            )));
        }
        let picks: Vec<usize> = sample_indices(n - 1, k, rng).into_iter().map(|j| j + 1).collect();
        let mut rows = vec![0];
        rows.extend(&picks);
        let train = ds.subset(&rows)?;
        let store = world.store(&train)?;
        let game = world.game(&store, &train)?;
        let without: Vec<usize> = (1..=k).collect();
        let with: Vec<usize> = (0..=k).collect();
        Ok(game.value(&with)? - game.value(&without)?)
    })
}
