use std::ops::{Add, Div, Sub};

use num_rational::Ratio;
use num_traits::Zero;
use rayon::prelude::*;

use super::game::{Game, KernelGame};
use super::table::{Method, ScoreTable};
use crate::error::{Error, Result};

/// Number types the enumerator can average in.
pub trait ShapleyScalar:
    Clone + Send + Sync + Zero + Add<Output = Self> + Sub<Output = Self> + Div<Output = Self>
{
    fn from_count(count: u64) -> Self;
}

impl ShapleyScalar for f64 {
    fn from_count(count: u64) -> Self {
        count as f64
    }
}

impl ShapleyScalar for Ratio<i128> {
    fn from_count(count: u64) -> Self {
        Ratio::from_integer(count as i128)
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Shapley values of a game given as a table over coalition bitmasks.
///
/// `φᵢ = n⁻¹ Σ_k C(n−1,k)⁻¹ Σ_{|S|=k, i∉S} (U(S ∪ {i}) − U(S))`
pub fn shapley_from_table<T: ShapleyScalar>(n: usize, table: &[T]) -> Vec<T> {
    assert_eq!(table.len(), 1usize << n, "table needs 2^n entries");
    (0..n)
        .into_par_iter()
        .map(|i| {
            let bit = 1usize << i;
            let mut by_size = vec![T::zero(); n];
            for mask in 0..table.len() {
                if mask & bit != 0 {
                    continue;
                }
                let k = mask.count_ones() as usize;
                let gain = table[mask | bit].clone() - table[mask].clone();
                by_size[k] = by_size[k].clone() + gain;
            }
            let total = by_size
                .into_iter()
                .enumerate()
                .fold(T::zero(), |acc, (k, sum)| {
                    acc + sum / T::from_count(binomial(n as u64 - 1, k as u64))
                });
            total / T::from_count(n as u64)
        })
        .collect()
}

fn check_cap(game: &KernelGame) -> Result<usize> {
    let n = game.n_players();
    let cap = game.config().enumeration_cap;
    if n > cap {
        return Err(Error::EnumerationCap { n, cap });
    }
    Ok(n)
}

fn members(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask & (1 << i) != 0).collect()
}

/// Exact Shapley values in rational arithmetic; utilities are hit fractions.
pub fn exact_shapley_rational(game: &KernelGame) -> Result<Vec<Ratio<i128>>> {
    let n = check_cap(game)?;
    let table = (0..1usize << n)
        .into_par_iter()
        .map(|mask| game.hit_ratio(&members(mask, n)))
        .collect::<Result<Vec<_>>>()?;
    Ok(shapley_from_table(n, &table))
}

/// Exact Shapley values by enumerating every subset.
pub fn exact_shapley(game: &KernelGame) -> Result<ScoreTable> {
    let exact = exact_shapley_rational(game)?;
    let scores = exact
        .iter()
        .map(|r| *r.numer() as f64 / *r.denom() as f64)
        .collect();
    Ok(ScoreTable::new(game, scores, Method::Exact, 0, None))
}

/// Exact Shapley values of any game, in floating point.
pub fn exact_shapley_game<G: Game>(game: &G) -> Result<Vec<f64>> {
    let n = game.n_players();
    let table = (0..1usize << n)
        .into_par_iter()
        .map(|mask| game.value(&members(mask, n)))
        .collect::<Result<Vec<_>>>()?;
    Ok(shapley_from_table(n, &table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapley::TableGame;

    #[test]
    fn hand_enumerated_two_player_game() {
        // U(∅)=0.5, U({1})=1.0, U({2})=0.5, U({1,2})=1.0
        let phi = shapley_from_table(2, &[0.5, 1.0, 0.5, 1.0]);
        assert_eq!(phi, vec![0.5, 0.0]);
    }

    #[test]
    fn rational_efficiency_is_exact() {
        let r = |a: i128, b: i128| Ratio::new(a, b);
        let table = vec![r(1, 3), r(2, 7), r(5, 9), r(1, 1), r(0, 1), r(3, 11), r(4, 5), r(6, 7)];
        let phi = shapley_from_table(3, &table);
        let total = phi.iter().fold(Ratio::zero(), |a, b| a + b);
        assert_eq!(total, table[7] - table[0]);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(11, 5), 462);
        assert_eq!(binomial(9, 0), 1);
        assert_eq!(binomial(9, 9), 1);
    }

    #[test]
    fn generic_game_matches_table() {
        let g = TableGame::new(2, vec![0.5, 1.0, 0.5, 1.0]);
        assert_eq!(exact_shapley_game(&g).unwrap(), vec![0.5, 0.0]);
    }
}
