//! k-fold cross-validation of a supervised model on a fixed dataset.

use std::path::Path;

use deepvote_core::sampling::{random_permutation, rng_from_seed};
use deepvote_models::{decode_plain, Model};
use rand::seq::SliceRandom;

use crate::config::TrainConfig;
use crate::dataset::{Dataset, Pair};
use crate::error::{HarnessError, Result};
use crate::report::fmt4;
use crate::train::Trainer;

#[derive(Clone, Debug, PartialEq)]
pub struct FoldResult {
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossValReport {
    pub folds: Vec<FoldResult>,
    pub mean: FoldResult,
    /// Sample standard deviation over folds.
    pub std: FoldResult,
}

/// Fold index of every item: a seeded shuffle cut into `folds` contiguous
/// parts whose sizes differ by at most one.
pub fn fold_assignment(len: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(HarnessError::Invalid("need at least 2 folds".into()));
    }
    if len < folds {
        return Err(HarnessError::Invalid(format!("{len} items cannot fill {folds} folds")));
    }
    let order = random_permutation(len, &mut rng_from_seed(seed));
    let mut fold = vec![0; len];
    for (pos, &item) in order.iter().enumerate() {
        fold[item] = pos * folds / len;
    }
    Ok(fold)
}

/// Mean binary cross-entropy over live coordinates and identity accuracy of
/// plain decoding.
pub fn loss_and_accuracy(model: &Model, pairs: &[Pair]) -> Result<(f64, f64)> {
    let profiles: Vec<_> = pairs.iter().map(|(p, _)| p.clone()).collect();
    let logits = model.logits(&profiles)?;
    let (mut loss, mut hits) = (0.0, 0usize);
    for ((p, s), l) in pairs.iter().zip(&logits) {
        let m = p.m();
        let mut bce = 0.0;
        for (a, &x) in l.iter().enumerate().take(m) {
            let y = if s.contains(a) { 1.0 } else { 0.0 };
            // log(1 + e^x) − y·x, stable for large |x|.
            bce += x.max(0.0) - x * y + (-x.abs()).exp().ln_1p();
        }
        loss += bce / m as f64;
        hits += (decode_plain(l, m) == *s) as usize;
    }
    let n = pairs.len().max(1) as f64;
    Ok((loss / n, 100.0 * hits as f64 / n))
}

fn stats(rows: &[FoldResult]) -> (FoldResult, FoldResult) {
    let col = |f: fn(&FoldResult) -> f64| -> (f64, f64) {
        let n = rows.len() as f64;
        let mean = rows.iter().map(f).sum::<f64>() / n;
        let var = rows.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, var.sqrt())
    };
    let (a, b, c, d) = (
        col(|r| r.train_loss),
        col(|r| r.train_accuracy),
        col(|r| r.test_loss),
        col(|r| r.test_accuracy),
    );
    (
        FoldResult {
            train_loss: a.0,
            train_accuracy: b.0,
            test_loss: c.0,
            test_accuracy: d.0,
        },
        FoldResult {
            train_loss: a.1,
            train_accuracy: b.1,
            test_loss: c.1,
            test_accuracy: d.1,
        },
    )
}

/// Trains a fresh copy of `init` on all folds but one for `epochs` epochs and
/// evaluates on the held-out fold, for every fold.
pub fn cross_validate(
    init: &Model,
    dataset: &Dataset,
    folds: usize,
    epochs: usize,
    train: &TrainConfig,
    seed: u64,
) -> Result<CrossValReport> {
    let assignment = fold_assignment(dataset.len(), folds, seed)?;
    let mut results = Vec::with_capacity(folds);
    for k in 0..folds {
        let (mut test, mut train_set) = (Vec::new(), Vec::new());
        for (p, &f) in dataset.pairs.iter().zip(&assignment) {
            if f == k {
                test.push(p);
            } else {
                train_set.push(p);
            }
        }
        let mut model = init.clone();
        let mut trainer = Trainer::new(&model, train);
        let mut rng = rng_from_seed(deepvote_core::sampling::derive_seed(seed, k as u64 + 1));
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        for epoch in 0..epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(train.batch_size) {
                let batch: Vec<Pair> = chunk.iter().map(|&i| train_set[i].clone()).collect();
                trainer.supervised_step(&mut model, &batch, &mut rng)?;
            }
            log::info!("fold {k} epoch {} done", epoch + 1);
        }
        let train_pairs: Vec<Pair> = train_set.into_iter().cloned().collect();
        let test_pairs: Vec<Pair> = test.into_iter().cloned().collect();
        let (train_loss, train_accuracy) = loss_and_accuracy(&model, &train_pairs)?;
        let (test_loss, test_accuracy) = loss_and_accuracy(&model, &test_pairs)?;
        log::info!("fold {k}: train {train_loss:.4}/{train_accuracy:.2} test {test_loss:.4}/{test_accuracy:.2}");
        results.push(FoldResult {
            train_loss,
            train_accuracy,
            test_loss,
            test_accuracy,
        });
    }
    let (mean, std) = stats(&results);
    Ok(CrossValReport {
        folds: results,
        mean,
        std,
    })
}

impl CrossValReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["fold", "train_loss", "train_accuracy", "test_loss", "test_accuracy"])?;
        let rows = self
            .folds
            .iter()
            .enumerate()
            .map(|(i, r)| (i.to_string(), r))
            .chain([("mean".to_string(), &self.mean), ("std".to_string(), &self.std)]);
        for (name, r) in rows {
            w.write_record([
                name,
                fmt4(r.train_loss),
                fmt4(r.train_accuracy),
                fmt4(r.test_loss),
                fmt4(r.test_accuracy),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
