//! Sign robustness of instance scores under dataset resampling.
//!
//! A target point is placed into `R` independently sampled companion
//! datasets and scored in each. The majority sign of the `R` scores stands in
//! for the point's (unobservable) helpful/harmful status; any dissenting sign
//! is a non-robust occurrence. Also here: the theoretical robustness bounds
//! computed from a marginal-contribution profile, and the mean/spread
//! diagnostics comparing Shapley with leave-one-out.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{sample_complement, DistributionSpec, Example};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::shapley::{loo_point, point_value, MarginalProfile};
use crate::synthetic::SyntheticWorld;

/// `−1` for negative scores, `+1` otherwise (zero counts as positive).
pub fn sign(x: f64) -> i8 {
    if x < 0.0 {
        -1
    } else {
        1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolMethod {
    Shapley,
    Loo,
}

impl ProtocolMethod {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolMethod::Shapley => "shapley",
            ProtocolMethod::Loo => "loo",
        }
    }
}

impl std::str::FromStr for ProtocolMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shapley" | "tmc" | "freeshap" => Ok(ProtocolMethod::Shapley),
            "loo" => Ok(ProtocolMethod::Loo),
            other => Err(Error::InvalidArgument(format!("unknown protocol method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointSigns {
    pub point_id: String,
    pub scores: Vec<f64>,
    pub signs: Vec<i8>,
    pub majority: i8,
    pub flagged: bool,
}

impl PointSigns {
    /// Majority sign and dissent flag for one point's scores.
    pub fn from_scores(point_id: impl Into<String>, scores: Vec<f64>) -> Self {
        let signs: Vec<i8> = scores.iter().map(|&s| sign(s)).collect();
        let positive = signs.iter().filter(|&&s| s > 0).count();
        let majority = if 2 * positive >= signs.len() { 1 } else { -1 };
        let flagged = signs.iter().any(|&s| s != majority);
        PointSigns {
            point_id: point_id.into(),
            scores,
            signs,
            majority,
            flagged,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignProtocolResult {
    pub method: ProtocolMethod,
    pub points: Vec<PointSigns>,
    /// Fraction of points flagged non-robust.
    pub rate: f64,
}

impl SignProtocolResult {
    pub fn from_points(method: ProtocolMethod, points: Vec<PointSigns>) -> Self {
        let flagged = points.iter().filter(|p| p.flagged).count();
        let rate = if points.is_empty() {
            0.0
        } else {
            flagged as f64 / points.len() as f64
        };
        SignProtocolResult { method, points, rate }
    }

    pub fn flagged(&self) -> usize {
        self.points.iter().filter(|p| p.flagged).count()
    }

    /// Per-point score vectors, one per resample.
    pub fn score_samples(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.scores.clone()).collect()
    }

    /// `point_id,sign_1..sign_R,majority,flagged` rows, then a
    /// `non_robust_rate,<fraction>,<percent>` footer.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let r = self.points.first().map_or(0, |p| p.signs.len());
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
        let io = |e: csv::Error| Error::Validation(format!("csv write failed: {e}"));
        let mut header = vec!["point_id".to_string()];
        header.extend((1..=r).map(|k| format!("sign_{k}")));
        header.push("majority".into());
        header.push("flagged".into());
        w.write_record(&header).map_err(io)?;
        for p in &self.points {
            let mut rec = vec![p.point_id.clone()];
            rec.extend(p.signs.iter().map(|s| s.to_string()));
            rec.push(p.majority.to_string());
            rec.push(u8::from(p.flagged).to_string());
            w.write_record(&rec).map_err(io)?;
        }
        w.write_record(["non_robust_rate".to_string(), self.rate.to_string(), format_rate(self.rate)])
            .map_err(io)?;
        w.flush().map_err(|e| Error::io("<csv writer>", e))
    }
}

/// Percentage in whole percent, e.g. `0.3 → "30%"`.
pub fn format_rate(rate: f64) -> String {
    format!("{:.0}%", rate * 100.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolConfig {
    /// Number of companion datasets `R` (odd, at least 3).
    pub resamples: usize,
    /// Companion points per dataset (`n − 1`).
    pub n_others: usize,
    /// Permutations per truncated Monte-Carlo Shapley estimate.
    pub iters: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub methods: Vec<ProtocolMethod>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            resamples: 5,
            n_others: 199,
            iters: 200,
            tolerance: 0.05,
            seed: 0,
            methods: vec![ProtocolMethod::Shapley, ProtocolMethod::Loo],
        }
    }
}

/// `size` target points drawn from `dist`.
pub fn sample_pool(dist: &DistributionSpec, size: usize, seed: u64) -> Result<Vec<Example>> {
    Ok(dist.sample(size, "pool", derive_seed(seed, &[0x9001]))?.examples().collect())
}

/// Seed of companion dataset `r`; shared by every pool point and method.
pub fn complement_seed(master: u64, r: usize) -> u64 {
    derive_seed(master, &[0xC0, r as u64])
}

/// Runs the resampling protocol for every method in `cfg.methods`.
pub fn robustness_protocol(
    dist: &DistributionSpec,
    pool: &[Example],
    world: &SyntheticWorld,
    cfg: &ProtocolConfig,
) -> Result<Vec<SignProtocolResult>> {
    if pool.is_empty() {
        return Err(Error::InvalidArgument("target pool is empty".into()));
    }
    if cfg.resamples < 3 || cfg.resamples.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "resamples must be odd and at least 3, got {}",
            cfg.resamples
        )));
    }
    if cfg.methods.is_empty() {
        return Err(Error::InvalidArgument("no scoring method selected".into()));
    }
    let r = cfg.resamples;
    let m = cfg.methods.len();
    let jobs: Vec<(usize, usize)> = (0..pool.len()).flat_map(|p| (0..r).map(move |k| (p, k))).collect();

    // scores[job] = one score per method
    let scores = jobs
        .par_iter()
        .map(|&(p, k)| {
            let train = sample_complement(dist, &pool[p], cfg.n_others, complement_seed(cfg.seed, k))?;
            let store = world.store(&train)?;
            let game = world.game(&store, &train)?;
            cfg.methods
                .iter()
                .map(|method| match method {
                    ProtocolMethod::Shapley => {
                        let mc_seed = derive_seed(cfg.seed, &[0x5a, p as u64, k as u64]);
                        point_value(&game, 0, cfg.iters, mc_seed, cfg.tolerance)
                    }
                    ProtocolMethod::Loo => loo_point(&game, 0),
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    Ok((0..m)
        .map(|mi| {
            let points = pool
                .iter()
                .enumerate()
                .map(|(p, ex)| {
                    let per_resample = (0..r).map(|k| scores[p * r + k][mi]).collect();
                    PointSigns::from_scores(ex.id.clone(), per_resample)
                })
                .collect();
            SignProtocolResult::from_points(cfg.methods[mi], points)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointDiagnostics {
    pub point_id: String,
    pub shapley_abs_mean: f64,
    pub shapley_std: f64,
    pub loo_abs_mean: f64,
    pub loo_std: f64,
}

/// Per-point `|mean|` and (population) standard deviation of the resampled
/// scores for both methods, plus their pool averages.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RemarkDiagnostics {
    pub points: Vec<PointDiagnostics>,
    pub avg_abs_mean_shapley: f64,
    pub avg_abs_mean_loo: f64,
    pub avg_std_shapley: f64,
    pub avg_std_loo: f64,
}

impl RemarkDiagnostics {
    /// Shapley has the larger average `|mean|` and the smaller average spread.
    pub fn shapley_dominates(&self) -> bool {
        self.avg_abs_mean_shapley >= self.avg_abs_mean_loo && self.avg_std_shapley <= self.avg_std_loo
    }
}

impl RemarkDiagnostics {
    /// `point_id,shapley_abs_mean,shapley_std,loo_abs_mean,loo_std`, then an
    /// `average` row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Validation(format!("csv write failed: {e}"));
        w.write_record(["point_id", "shapley_abs_mean", "shapley_std", "loo_abs_mean", "loo_std"])
            .map_err(io)?;
        let rows = self
            .points
            .iter()
            .map(|p| (p.point_id.as_str(), [p.shapley_abs_mean, p.shapley_std, p.loo_abs_mean, p.loo_std]))
            .chain(std::iter::once((
                "average",
                [self.avg_abs_mean_shapley, self.avg_std_shapley, self.avg_abs_mean_loo, self.avg_std_loo],
            )));
        for (id, vals) in rows {
            let mut rec = vec![id.to_string()];
            rec.extend(vals.iter().map(|v| format!("{v:e}")));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn remark_diagnostics(ids: &[String], shapley: &[Vec<f64>], loo: &[Vec<f64>]) -> Result<RemarkDiagnostics> {
    if ids.len() != shapley.len() || ids.len() != loo.len() || ids.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "need one score vector per point for both methods ({} ids, {} shapley, {} loo)",
            ids.len(),
            shapley.len(),
            loo.len()
        )));
    }
    if shapley.iter().chain(loo).any(|v| v.len() < 2) {
        return Err(Error::InvalidArgument("need at least 2 samples per point".into()));
    }
    let points: Vec<PointDiagnostics> = ids
        .iter()
        .zip(shapley.iter().zip(loo))
        .map(|(id, (s, l))| {
            let (sm, ss) = mean_std(s);
            let (lm, ls) = mean_std(l);
            PointDiagnostics {
                point_id: id.clone(),
                shapley_abs_mean: sm.abs(),
                shapley_std: ss,
                loo_abs_mean: lm.abs(),
                loo_std: ls,
            }
        })
        .collect();
    let avg = |f: fn(&PointDiagnostics) -> f64| points.iter().map(f).sum::<f64>() / points.len() as f64;
    Ok(RemarkDiagnostics {
        avg_abs_mean_shapley: avg(|p| p.shapley_abs_mean),
        avg_abs_mean_loo: avg(|p| p.loo_abs_mean),
        avg_std_shapley: avg(|p| p.shapley_std),
        avg_std_loo: avg(|p| p.loo_std),
        points,
    })
}

/// Which subset sizes the bound averages run over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coverage {
    /// Every `k` in `0..n` must be present.
    Full,
    /// Average over whatever sizes were sampled, without extrapolation;
    /// `k = n − 1` must still be present.
    Subsample,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RobustnessBounds {
    /// `(n⁻¹ Σ δ_k) / (n⁻¹ Σ τ_k)²`
    pub shapley: f64,
    /// `δ_{n−1} / τ²_{n−1}`
    pub loo: f64,
    pub shapley_infinite: bool,
    pub loo_infinite: bool,
}

fn ratio_bound(var: f64, mean: f64) -> (f64, bool) {
    let denom = mean * mean;
    if denom == 0.0 {
        (f64::INFINITY, true)
    } else {
        (var / denom, false)
    }
}

/// Plug-in robustness bounds for Shapley and leave-one-out.
pub fn theorem_bounds(profile: &MarginalProfile, coverage: Coverage) -> Result<RobustnessBounds> {
    let n = profile.n;
    if n == 0 {
        return Err(Error::InvalidArgument("profile has n = 0".into()));
    }
    if coverage == Coverage::Full && !profile.is_complete() {
        let missing = (0..n).find(|&k| profile.entry(k).is_none()).unwrap_or(0);
        return Err(Error::InvalidArgument(format!(
            "profile does not cover subset size {missing}"
        )));
    }
    let last = profile.entry(n - 1).ok_or_else(|| {
        Error::InvalidArgument(format!("profile does not cover subset size {}", n - 1))
    })?;
    let used: Vec<_> = profile.entries.iter().filter(|e| e.k < n).collect();
    let count = used.len() as f64;
    let mean_delta = used.iter().map(|e| e.delta).sum::<f64>() / count;
    let mean_tau = used.iter().map(|e| e.tau).sum::<f64>() / count;
    let (shapley, shapley_infinite) = ratio_bound(mean_delta, mean_tau);
    let (loo, loo_infinite) = ratio_bound(last.delta, last.tau);
    Ok(RobustnessBounds {
        shapley,
        loo,
        shapley_infinite,
        loo_infinite,
    })
}

/// The sufficient conditions under which the Shapley bound cannot exceed the
/// leave-one-out bound: every `τ_k` of one sign, `|τ_k|` non-increasing in
/// `k`, and mean variance at most `δ_{n−1}`.
pub fn corollary_hypotheses_hold(profile: &MarginalProfile) -> bool {
    let mut entries: Vec<_> = profile.entries.iter().collect();
    entries.sort_by_key(|e| e.k);
    let Some(last) = entries.last() else {
        return false;
    };
    if last.k + 1 != profile.n {
        return false;
    }
    let helpful = entries.iter().all(|e| e.tau >= 0.0);
    let harmful = entries.iter().all(|e| e.tau < 0.0);
    let diminishing = entries.windows(2).all(|w| w[0].tau.abs() >= w[1].tau.abs());
    let mean_delta = entries.iter().map(|e| e.delta).sum::<f64>() / entries.len() as f64;
    (helpful || harmful) && diminishing && mean_delta <= last.delta
}
