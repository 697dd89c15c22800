//! Permutation sampling (FreeShap): each permutation is scanned once, growing
//! the kernel regression one point at a time, and every point is credited
//! with the utility change it causes. Scores are the mean over permutations.
//!
//! Permutation `t` always draws from stream `t` of the seed, and per-permutation
//! results are reduced in index order, so output does not depend on the
//! number of worker threads.

use rayon::prelude::*;

use super::game::{Game, KernelGame};
use super::table::{Method, ScoreTable};
use crate::error::{Error, Result};
use crate::rng::{permutation, stream_rng};

/// One sampled permutation and its utility trajectory `u₀ … u_trunc`.
#[derive(Clone, Debug, PartialEq)]
pub struct PermutationRun {
    pub permutation: Vec<usize>,
    pub trajectory: Vec<f64>,
    /// Number of points actually added; `n` when the scan was not truncated.
    pub truncation: usize,
}

impl PermutationRun {
    /// `(point, u_p − u_{p−1})` for every scanned position.
    pub fn marginals(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.trajectory
            .windows(2)
            .zip(&self.permutation)
            .map(|(w, &i)| (i, w[1] - w[0]))
    }
}

#[derive(Clone, Debug)]
pub struct SamplingOutcome {
    pub scores: Vec<f64>,
    pub runs: Vec<PermutationRun>,
    /// Permutations averaged into `scores`.
    pub completed: usize,
    /// Set when a permutation failed twice; `scores` then cover the
    /// permutations before it.
    pub failure: Option<String>,
}

/// Scans `perm`, stopping once `|u_p − full_value| < tolerance` or right after
/// `stop_after` has been added.
pub fn scan_permutation<G: Game>(
    game: &G,
    perm: &[usize],
    tolerance: f64,
    full_value: f64,
    stop_after: Option<usize>,
    attempt: usize,
) -> Result<PermutationRun> {
    let mut state = game.start(attempt)?;
    let mut trajectory = Vec::with_capacity(perm.len() + 1);
    trajectory.push(game.empty_value());
    for &player in perm {
        let u = game.push(&mut state, player)?;
        trajectory.push(u);
        if (u - full_value).abs() < tolerance || stop_after == Some(player) {
            break;
        }
    }
    Ok(PermutationRun {
        permutation: perm.to_vec(),
        truncation: trajectory.len() - 1,
        trajectory,
    })
}

fn run_permutation<G: Game>(
    game: &G,
    t: usize,
    seed: u64,
    tolerance: f64,
    full_value: f64,
    stop_after: Option<usize>,
) -> Result<PermutationRun> {
    let perm = permutation(game.n_players(), &mut stream_rng(seed, t as u64));
    match scan_permutation(game, &perm, tolerance, full_value, stop_after, 0) {
        Err(e) if e.is_numerical() => {
            log::warn!("permutation {t} failed ({e}); retrying with escalated jitter");
            scan_permutation(game, &perm, tolerance, full_value, stop_after, 1)
        }
        other => other,
    }
}

fn reference_value<G: Game>(game: &G, tolerance: f64) -> Result<f64> {
    if !(tolerance >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be >= 0, got {tolerance}"
        )));
    }
    if tolerance > 0.0 {
        let all: Vec<usize> = (0..game.n_players()).collect();
        game.value(&all)
    } else {
        Ok(f64::NAN)
    }
}

/// Monte-Carlo Shapley estimate over `iters` permutations. `tolerance = 0`
/// disables truncation.
pub fn monte_carlo<G: Game>(game: &G, iters: usize, seed: u64, tolerance: f64) -> Result<SamplingOutcome> {
    if iters == 0 {
        return Err(Error::InvalidArgument("need at least one permutation".into()));
    }
    let full_value = reference_value(game, tolerance)?;
    let results: Vec<Result<PermutationRun>> = (0..iters)
        .into_par_iter()
        .map(|t| run_permutation(game, t, seed, tolerance, full_value, None))
        .collect();

    let n = game.n_players();
    let mut sums = vec![0.0; n];
    let mut runs = Vec::with_capacity(iters);
    let mut failure = None;
    for (t, result) in results.into_iter().enumerate() {
        match result {
            Ok(run) => {
                for (i, m) in run.marginals() {
                    sums[i] += m;
                }
                runs.push(run);
            }
            Err(e) if e.is_numerical() && t > 0 => {
                log::error!("permutation {t} failed after retry: {e}; reporting {t} permutations");
                failure = Some(format!("permutation {t}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let completed = runs.len();
    let scores = sums.into_iter().map(|s| s / completed as f64).collect();
    Ok(SamplingOutcome {
        scores,
        runs,
        completed,
        failure,
    })
}

fn into_table(game: &KernelGame, outcome: SamplingOutcome, method: Method, seed: u64) -> (ScoreTable, Vec<PermutationRun>) {
    let mut table = ScoreTable::new(game, outcome.scores, method, outcome.completed, Some(seed));
    table.partial = outcome.failure.is_some();
    (table, outcome.runs)
}

/// FreeShap: untruncated permutation sampling over the kernel-regression game.
pub fn freeshap(game: &KernelGame, iters: usize, seed: u64) -> Result<(ScoreTable, Vec<PermutationRun>)> {
    let outcome = monte_carlo(game, iters, seed, 0.0)?;
    Ok(into_table(game, outcome, Method::Mc, seed))
}

/// FreeShap with truncation: a permutation stops once its utility is within
/// `tolerance` of the full-data utility and the remaining points score 0.
///
/// With `tolerance = 0` nothing is ever truncated and the result is the
/// untruncated estimate, tagged as such.
pub fn tmc_freeshap(
    game: &KernelGame,
    iters: usize,
    tolerance: f64,
    seed: u64,
) -> Result<(ScoreTable, Vec<PermutationRun>)> {
    let outcome = monte_carlo(game, iters, seed, tolerance)?;
    let method = if tolerance > 0.0 { Method::Tmc } else { Method::Mc };
    Ok(into_table(game, outcome, method, seed))
}

/// Estimate for a single point using the same permutations as
/// [`monte_carlo`]; each scan stops as soon as the point has been credited.
pub fn point_value<G: Game>(game: &G, point: usize, iters: usize, seed: u64, tolerance: f64) -> Result<f64> {
    if point >= game.n_players() {
        return Err(Error::IndexOutOfRange {
            index: point,
            bound: game.n_players(),
        });
    }
    if iters == 0 {
        return Err(Error::InvalidArgument("need at least one permutation".into()));
    }
    let full_value = reference_value(game, tolerance)?;
    let marginals = (0..iters)
        .into_par_iter()
        .map(|t| {
            let run = run_permutation(game, t, seed, tolerance, full_value, Some(point))?;
            let credited = run.marginals().find(|&(i, _)| i == point).map_or(0.0, |(_, m)| m);
            Ok(credited)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(marginals.iter().sum::<f64>() / iters as f64)
}
