//! Evaluation metrics for trace classifiers.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{NetConfig, TraceClassifier};
use crate::error::{Error, Result};
use crate::features::{LabeledDataset, Split, FEATURE_NAMES};

/// Confusion counts as fractions of all instances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRates {
    pub tn: f64,
    pub fp: f64,
    pub fn_: f64,
    pub tp: f64,
}

impl ConfusionRates {
    pub fn accuracy(&self) -> f64 {
        accuracy(self)
    }
}

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// An instance is predicted positive when its score is at least `threshold`.
pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> Result<ConfusionRates> {
    check_lengths(scores, labels)?;
    let mut counts = [0usize; 4];
    for (&s, &y) in scores.iter().zip(labels) {
        let predicted = s >= threshold;
        let slot = match (y, predicted) {
            (false, false) => 0,
            (false, true) => 1,
            (true, false) => 2,
            (true, true) => 3,
        };
        counts[slot] += 1;
    }
    let n = scores.len() as f64;
    Ok(ConfusionRates {
        tn: counts[0] as f64 / n,
        fp: counts[1] as f64 / n,
        fn_: counts[2] as f64 / n,
        tp: counts[3] as f64 / n,
    })
}

pub fn accuracy(cr: &ConfusionRates) -> f64 {
    cr.tp + cr.tn
}

/// Area under the ROC curve via the Mann–Whitney rank sum: the probability
/// that a random positive outscores a random negative, ties counting one
/// half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass { label: n_pos > 0 });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // Midranks over tie groups; ranks are 1-based.
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k]).count();
        pos_rank_sum += midrank * pos_in_group as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    let u = pos_rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * n))
}

/// Row of the prediction-results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub algorithm: String,
    pub project: String,
    pub auc: f64,
    pub acc: f64,
    pub tn: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub tp: f64,
}

impl MetricsReport {
    pub fn from_scores(
        algorithm: &str,
        project: &str,
        scores: &[f64],
        labels: &[bool],
        threshold: f64,
    ) -> Result<Self> {
        let cr = confusion(scores, labels, threshold)?;
        Ok(MetricsReport {
            algorithm: algorithm.into(),
            project: project.into(),
            auc: auc(scores, labels)?,
            acc: cr.accuracy(),
            tn: cr.tn,
            fp: cr.fp,
            fn_: cr.fn_,
            tp: cr.tp,
        })
    }
}

/// Scores the TEST partition of `dataset` with `model`.
pub fn evaluate(
    model: &TraceClassifier,
    dataset: &LabeledDataset,
    algorithm: &str,
    project: &str,
) -> Result<MetricsReport> {
    let (xs, ys) = dataset.matrix(Split::Test);
    let scores = model.predict_rows(&xs)?;
    MetricsReport::from_scores(
        algorithm,
        project,
        &scores,
        &ys,
        model.config.classification_threshold,
    )
}

fn drop_column(rows: &[Vec<f64>], col: usize) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .filter(|(i, _)| *i != col)
                .map(|(_, v)| *v)
                .collect()
        })
        .collect()
}

fn test_auc(
    train: (&[Vec<f64>], &[bool]),
    test: (&[Vec<f64>], &[bool]),
    cfg: &NetConfig,
) -> Result<f64> {
    let (model, _) = TraceClassifier::fit(train.0, train.1, cfg)?;
    let scores = model.predict_rows(test.0)?;
    auc(&scores, test.1)
}

/// All-but-one importance on explicit matrices: for each column, the test
/// AUC with every column minus the test AUC without that column. Every model
/// trains with the same config and seed.
pub fn feature_importance_matrix(
    names: &[&str],
    train: (&[Vec<f64>], &[bool]),
    test: (&[Vec<f64>], &[bool]),
    cfg: &NetConfig,
) -> Result<BTreeMap<String, f64>> {
    let full = test_auc(train, test, cfg)?;
    let deltas: Vec<(String, f64)> = names
        .par_iter()
        .enumerate()
        .map(|(col, name)| {
            let tr = drop_column(train.0, col);
            let te = drop_column(test.0, col);
            let without = test_auc((&tr, train.1), (&te, test.1), cfg).map_err(|e| Error::Importance {
                feature: name.to_string(),
                source: Box::new(e),
            })?;
            Ok((name.to_string(), full - without))
        })
        .collect::<Result<_>>()?;
    Ok(deltas.into_iter().collect())
}

/// ΔAUC per feature on the dataset's TRAIN/TEST partitions.
pub fn feature_importance(dataset: &LabeledDataset, cfg: &NetConfig) -> Result<BTreeMap<String, f64>> {
    let (train_x, train_y) = dataset.matrix(Split::Train);
    let (test_x, test_y) = dataset.matrix(Split::Test);
    feature_importance_matrix(&FEATURE_NAMES, (&train_x, &train_y), (&test_x, &test_y), cfg)
}
