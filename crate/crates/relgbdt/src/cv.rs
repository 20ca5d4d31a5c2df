//! K-fold cross-validation over root rows.
//!
//! Only the root table is partitioned; the other tables are shared by every
//! fold, and relations from held-out root rows simply go unused.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use relgbdt_core::boosting::{ModelError, TrainOptions};
use relgbdt_core::seed::aux_rng;
use relgbdt_core::{train, BoostConfig, DatasetInstance};

const FOLD_TAG: u64 = 2;

/// Environment variable capping the worker threads used by fold training.
pub const THREADS_ENV: &str = "RELGBDT_THREADS";

/// Assigns each root row to one of `k` folds after a seeded shuffle; fold
/// sizes differ by at most one.
pub fn fold_assignment(rows: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rows).collect();
    order.shuffle(&mut aux_rng(seed, FOLD_TAG));
    let mut fold = vec![0; rows];
    for (i, &r) in order.iter().enumerate() {
        fold[r] = i % k;
    }
    fold
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvSummary {
    pub scores: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (zero for a single fold).
    pub std: f64,
}

fn summarize(scores: Vec<f64>) -> CvSummary {
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let std = if scores.len() > 1 {
        (scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    CvSummary { scores, mean, std }
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
}

/// Trains one model per fold on the other folds and scores the held-out
/// rows. Folds run in parallel; results do not depend on the thread count.
pub fn cross_validate(
    instance: &DatasetInstance,
    config: &BoostConfig,
    k: usize,
    seed: u64,
) -> Result<CvSummary, ModelError> {
    if k < 2 || k > instance.root_len() {
        return Err(ModelError::Config("fold count must lie in [2, root rows]"));
    }
    let fold = fold_assignment(instance.root_len(), k, seed);
    let run = |f: usize| -> Result<f64, ModelError> {
        let (test, train_rows): (Vec<usize>, Vec<usize>) =
            (0..fold.len()).partition(|&r| fold[r] == f);
        let model = train(
            instance,
            config,
            TrainOptions {
                rows: Some(&train_rows),
                validation: None,
            },
        )?
        .model;
        model.evaluate(instance, Some(&test))
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|_| ModelError::Config("could not start worker threads"))?;
    let scores = pool.install(|| {
        (0..k)
            .into_par_iter()
            .map(run)
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(summarize(scores))
}
