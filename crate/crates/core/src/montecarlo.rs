//! Seeded Monte Carlo experiments over random tries.
//!
//! Trial `t` draws its key count and key bits from seeds derived from
//! `(seed, t)`, so results do not depend on worker count or scheduling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::analysis::{self, ModelParams, Size};
use crate::error::Result;
use crate::lctrie;
use crate::report::{Cell, Table};
use crate::source::{derive_seed, generate_keys, KeySet, SourceParams};
use crate::trie::{self, LevelProfile};

const KEY_STREAM: u64 = 0x6b65_7973;
const COUNT_STREAM: u64 = 0x636f_756e;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; `None` uses every available core. Never affects output.
    #[serde(skip)]
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(params: ModelParams, trials: usize, seed: u64) -> Self {
        ExperimentConfig {
            params,
            trials: trials.max(1),
            seed,
            jobs: None,
        }
    }

    pub fn with_jobs(mut self, jobs: Option<usize>) -> Self {
        self.jobs = jobs;
        self
    }

    pub fn with_size(mut self, size: Size) -> Self {
        self.params.size = size;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.params.alpha = alpha;
        self
    }

    /// Number of keys in trial `t`.
    pub fn trial_size(&self, t: usize) -> usize {
        match self.params.size {
            Size::Fixed { n } => n as usize,
            Size::Poisson { lambda } => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, COUNT_STREAM, t as u64));
                poisson_sample(lambda, &mut rng) as usize
            }
        }
    }

    pub fn trial_keys(&self, t: usize) -> KeySet {
        let source = SourceParams::new(self.params.p, derive_seed(self.seed, KEY_STREAM, t as u64))
            .expect("model p already validated");
        generate_keys(source, self.trial_size(t))
    }
}

/// Exact Poisson draw.
pub fn poisson_sample<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    match Poisson::new(lambda) {
        Ok(dist) => dist.sample(rng) as u64,
        Err(_) => 0,
    }
}

#[cfg(feature = "parallel")]
fn run_trials<T, F>(config: &ExperimentConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    if config.jobs == Some(1) {
        return (0..config.trials).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.unwrap_or(0))
        .build()
        .expect("thread pool");
    pool.install(|| (0..config.trials).into_par_iter().map(&f).collect())
}

#[cfg(not(feature = "parallel"))]
fn run_trials<T, F>(config: &ExperimentConfig, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T>,
{
    (0..config.trials).map(f).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FillupRow {
    pub trial: usize,
    pub n_effective: usize,
    /// `None` when the trial had fewer than two keys.
    pub level: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FillupHistogram {
    pub alpha: f64,
    pub trials: usize,
    /// Trials with fewer than two keys, where the level is undefined.
    pub undefined: usize,
    pub counts: BTreeMap<usize, u64>,
    pub rows: Vec<FillupRow>,
}

impl FillupHistogram {
    fn from_rows(alpha: f64, rows: Vec<FillupRow>) -> Self {
        let mut counts = BTreeMap::new();
        let mut undefined = 0;
        for row in &rows {
            match row.level {
                Some(f) => *counts.entry(f).or_insert(0) += 1,
                None => undefined += 1,
            }
        }
        FillupHistogram {
            alpha,
            trials: rows.len(),
            undefined,
            counts,
            rows,
        }
    }

    pub fn defined(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Most frequent level; ties go to the lower level.
    pub fn mode(&self) -> Option<usize> {
        let mut best: Option<(usize, u64)> = None;
        for (&level, &c) in &self.counts {
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((level, c));
            }
        }
        best.map(|(level, _)| level)
    }

    pub fn mean(&self) -> f64 {
        let total: f64 = self.counts.iter().map(|(&l, &c)| l as f64 * c as f64).sum();
        total / self.defined() as f64
    }

    /// Standard error of [`mean`](Self::mean).
    pub fn stderr(&self) -> f64 {
        let m = self.defined() as f64;
        if m < 2.0 {
            return 0.0;
        }
        let mean = self.mean();
        let ss: f64 = self
            .counts
            .iter()
            .map(|(&l, &c)| c as f64 * (l as f64 - mean).powi(2))
            .sum();
        (ss / (m - 1.0) / m).sqrt()
    }

    pub fn probability(&self, level: usize) -> f64 {
        self.counts.get(&level).copied().unwrap_or(0) as f64 / self.defined() as f64
    }

    /// Largest share of defined trials landing on two consecutive levels.
    pub fn top_two_consecutive_mass(&self) -> f64 {
        self.counts
            .keys()
            .map(|&l| self.probability(l) + self.probability(l + 1))
            .fold(0.0, f64::max)
    }

    /// Total variation distance between the two empirical distributions.
    pub fn total_variation(&self, other: &FillupHistogram) -> f64 {
        let levels: std::collections::BTreeSet<usize> =
            self.counts.keys().chain(other.counts.keys()).copied().collect();
        0.5 * levels
            .into_iter()
            .map(|l| (self.probability(l) - other.probability(l)).abs())
            .sum::<f64>()
    }

    /// Per-trial rows `trial,n_effective,F`.
    pub fn rows_table(&self) -> Table {
        let mut table = Table::new(["trial", "n_effective", "F"]);
        for row in &self.rows {
            table.push(vec![
                Cell::from(row.trial),
                Cell::from(row.n_effective),
                row.level.map_or(Cell::Empty, Cell::from),
            ]);
        }
        table
    }
}

fn trial_profile(config: &ExperimentConfig, t: usize) -> Result<(usize, LevelProfile)> {
    let keys = config.trial_keys(t);
    let profile = trie::build(&keys)?.level_profile();
    Ok((keys.len(), profile))
}

/// Histogram of the α-fillup level over independent tries.
pub fn simulate_fillup(config: &ExperimentConfig) -> Result<FillupHistogram> {
    let mut hists = simulate_fillup_alphas(config, &[config.params.alpha])?;
    Ok(hists.remove(0))
}

/// One histogram per alpha, all read off the same tries.
pub fn simulate_fillup_alphas(
    config: &ExperimentConfig,
    alphas: &[f64],
) -> Result<Vec<FillupHistogram>> {
    let per_trial = run_trials(config, |t| {
        let (n, profile) = trial_profile(config, t)?;
        let levels = alphas
            .iter()
            .map(|&a| match profile.alpha_fillup_level(a) {
                Ok(f) => Ok(Some(f)),
                Err(crate::Error::TooFewKeys) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((n, levels))
    })?;
    Ok(alphas
        .iter()
        .enumerate()
        .map(|(i, &alpha)| {
            let rows = per_trial
                .iter()
                .enumerate()
                .map(|(trial, (n, levels))| FillupRow {
                    trial,
                    n_effective: *n,
                    level: levels[i],
                })
                .collect();
            FillupHistogram::from_rows(alpha, rows)
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DepthRow {
    pub trial: usize,
    pub n: usize,
    /// Depth of key 0 in the α-LC trie.
    pub depth: usize,
    pub consumed_total: usize,
    /// Depth of key 0 in the uncompressed trie.
    pub trie_depth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DepthSummary {
    pub size: f64,
    pub alpha: f64,
    pub trials: usize,
    pub undefined: usize,
    pub mean: f64,
    pub variance: f64,
    /// Minimum, quartiles, maximum.
    pub quantiles: [f64; 5],
    pub mean_over_log2_n: f64,
    pub mean_over_loglog: f64,
    pub rows: Vec<DepthRow>,
}

impl DepthSummary {
    /// Per-trial rows `trial,n,D,consumed_total`.
    pub fn rows_table(&self) -> Table {
        let mut table = Table::new(["trial", "n", "D", "consumed_total"]);
        for row in &self.rows {
            table.push(vec![
                Cell::from(row.trial),
                Cell::from(row.n),
                Cell::from(row.depth),
                Cell::from(row.consumed_total),
            ]);
        }
        table
    }
}

/// Depth of the designated key (id 0) in α-LC tries over independent key sets.
pub fn simulate_depth(config: &ExperimentConfig) -> Result<DepthSummary> {
    let alpha = config.params.alpha;
    let rows = run_trials(config, |t| {
        let keys = config.trial_keys(t);
        let n = keys.len();
        if n < 2 {
            return Ok(None);
        }
        let alc = lctrie::compress(&keys, alpha)?;
        let sample = alc.depth(0)?;
        Ok(Some(DepthRow {
            trial: t,
            n,
            depth: sample.depth,
            consumed_total: sample.consumed_total,
            trie_depth: trie::unique_prefix_len_scan(&keys, 0)?,
        }))
    })?;
    let undefined = rows.iter().filter(|r| r.is_none()).count();
    let rows: Vec<DepthRow> = rows.into_iter().flatten().collect();

    let mut depths: Vec<f64> = rows.iter().map(|r| r.depth as f64).collect();
    depths.sort_by(f64::total_cmp);
    let (mean, variance) = mean_variance(&depths);
    let size = config.params.size.value();
    Ok(DepthSummary {
        size,
        alpha,
        trials: config.trials,
        undefined,
        mean,
        variance,
        quantiles: [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| quantile_sorted(&depths, q)),
        mean_over_log2_n: mean / size.log2(),
        mean_over_loglog: mean / size.log2().log2(),
        rows,
    })
}

fn mean_variance(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / m;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FillEstimate {
    pub k: usize,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
    /// Sample variance of the per-trial fill fraction.
    pub variance: f64,
    /// Standard error of `variance`.
    pub variance_stderr: f64,
}

/// Monte Carlo estimate of `E[X_k / 2^k]`. Poisson trials with fewer than
/// two keys contribute a fill fraction of zero.
pub fn estimate_fill_fraction(config: &ExperimentConfig, k: usize) -> Result<FillEstimate> {
    Ok(estimate_fill_fractions(config, &[k])?.remove(0))
}

pub fn estimate_fill_fractions(config: &ExperimentConfig, ks: &[usize]) -> Result<Vec<FillEstimate>> {
    let samples = run_trials(config, |t| {
        let (_, profile) = trial_profile(config, t)?;
        Ok(ks.iter().map(|&k| profile.fraction(k)).collect::<Vec<f64>>())
    })?;
    Ok(ks
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let xs: Vec<f64> = samples.iter().map(|s| s[i]).collect();
            moments(k, &xs)
        })
        .collect())
}

fn moments(k: usize, xs: &[f64]) -> FillEstimate {
    let m = xs.len() as f64;
    let (mean, variance) = mean_variance(xs);
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / m;
    let variance_stderr = if m > 3.0 {
        ((m4 - (m - 3.0) / (m - 1.0) * m2 * m2) / m).max(0.0).sqrt()
    } else {
        f64::NAN
    };
    FillEstimate {
        k,
        trials: xs.len(),
        mean,
        stderr: (variance / m).sqrt(),
        variance,
        variance_stderr,
    }
}

/// Rows `k,mc_mean,stderr,analytic,diff` for the configured model.
pub fn expectation_report(config: &ExperimentConfig, ks: &[usize]) -> Result<Table> {
    let mut table = Table::new(["k", "mc_mean", "stderr", "analytic", "diff"]);
    if ks.is_empty() {
        return Ok(table);
    }
    for est in estimate_fill_fractions(config, ks)? {
        let analytic = analysis::expected_fill_fraction(&config.params, est.k);
        table.push(vec![
            Cell::from(est.k),
            Cell::from(est.mean),
            Cell::from(est.stderr),
            Cell::from(analytic),
            Cell::from(est.mean - analytic),
        ]);
    }
    Ok(table)
}

/// One row per `(size, alpha)`: simulated mode and mean of the α-fillup
/// level against the closed-form and calibrated predictors.
pub fn fillup_sweep(config: &ExperimentConfig, sizes: &[f64], alphas: &[f64]) -> Result<Table> {
    let mut table = Table::new([
        "model",
        "n_or_lambda",
        "alpha",
        "trials",
        "mode",
        "mc_mean",
        "stderr",
        "closed_form",
        "calibrated",
        "diff",
    ]);
    if alphas.is_empty() {
        return Ok(table);
    }
    for &size in sizes {
        let size = match config.params.size {
            Size::Fixed { .. } => Size::Fixed { n: size as u64 },
            Size::Poisson { .. } => Size::Poisson { lambda: size },
        };
        let run = config.with_size(size);
        let hists = simulate_fillup_alphas(&run, alphas)?;
        for hist in hists {
            let params = ModelParams::new(config.params.p, hist.alpha, size)?;
            let closed = analysis::predict_level_closed_form(size.value(), hist.alpha, params.p)
                .map_or(Cell::Empty, Cell::from);
            let calibrated = analysis::predict_level_calibrated(&params).ok();
            let mean = hist.mean();
            table.push(vec![
                Cell::from(size.model_name()),
                Cell::from(size.value()),
                Cell::from(hist.alpha),
                Cell::from(hist.defined() as usize),
                hist.mode().map_or(Cell::Empty, Cell::from),
                Cell::from(mean),
                Cell::from(hist.stderr()),
                closed,
                calibrated.map_or(Cell::Empty, Cell::from),
                calibrated.map_or(Cell::Empty, |c| Cell::from(mean - c as f64)),
            ]);
        }
    }
    Ok(table)
}
