//! Instance scores against the kernel-regression utility: exact Shapley by
//! enumeration, Monte-Carlo and truncated Monte-Carlo permutation sampling,
//! leave-one-out, and marginal-contribution profiles.

mod exact;
mod game;
mod profile;
mod sampling;
mod table;

pub use exact::{exact_shapley, exact_shapley_game, exact_shapley_rational, shapley_from_table, ShapleyScalar};
pub use game::{EngineConfig, Game, KernelGame, KernelScan, TableGame, Target};
pub use profile::{
    estimate_marginal_profile, estimate_profile_with, profile_from_sampler, MarginalProfile, ProfileEntry,
};
pub use sampling::{
    freeshap, monte_carlo, point_value, scan_permutation, tmc_freeshap, PermutationRun, SamplingOutcome,
};
pub use table::{read_scores, Method, ScoreTable};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// `U(N) − U(N∖{i})` for every training point.
pub fn loo(game: &KernelGame) -> Result<ScoreTable> {
    let n = game.n_players();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "leave-one-out needs at least 2 training points, got {n}"
        )));
    }
    let all: Vec<usize> = (0..n).collect();
    let full = game.value(&all)?;
    let scores = (0..n)
        .into_par_iter()
        .map(|i| {
            let rest: Vec<usize> = all.iter().copied().filter(|&j| j != i).collect();
            Ok(full - game.value(&rest)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ScoreTable::new(game, scores, Method::Loo, 0, None))
}

/// LOO score of a single point.
pub fn loo_point(game: &KernelGame, point: usize) -> Result<f64> {
    let n = game.n_players();
    if point >= n {
        return Err(Error::IndexOutOfRange { index: point, bound: n });
    }
    let all: Vec<usize> = (0..n).collect();
    let rest: Vec<usize> = all.iter().copied().filter(|&j| j != point).collect();
    Ok(game.value(&all)? - game.value(&rest)?)
}

/// `U(S ∪ {i}) − U(S)`, both utilities solved from scratch.
pub fn marginal_contribution<G: Game>(game: &G, i: usize, subset: &[usize]) -> Result<f64> {
    if subset.contains(&i) {
        return Err(Error::InvalidArgument(format!("point {i} is already in the subset")));
    }
    let mut with = subset.to_vec();
    with.push(i);
    Ok(game.value(&with)? - game.value(subset)?)
}
