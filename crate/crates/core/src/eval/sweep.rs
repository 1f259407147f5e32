use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{accuracy_at, auroc, evaluate, EvalReport, LabeledScore, DEFAULT_BINS};
use crate::detector::CmDetector;
use crate::error::{Error, Result};
use crate::gaussian::MahalanobisConfig;
use crate::tensor_io::EmbeddingMatrix;

/// Training matrices for both classes plus a labeled test set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalFixture {
    pub train_truthful: EmbeddingMatrix,
    pub train_hallucinated: EmbeddingMatrix,
    pub test: EmbeddingMatrix,
    /// true = hallucinated, one per test row.
    pub test_labels: Vec<bool>,
}

impl EvalFixture {
    pub fn new(
        train_truthful: EmbeddingMatrix,
        train_hallucinated: EmbeddingMatrix,
        test: EmbeddingMatrix,
        test_labels: Vec<bool>,
    ) -> Result<Self> {
        let d = train_truthful.cols();
        if train_hallucinated.cols() != d || test.cols() != d {
            return Err(Error::Shape(format!(
                "fixture dims disagree: truthful d={d}, hallucinated d={}, test d={}",
                train_hallucinated.cols(),
                test.cols()
            )));
        }
        if test_labels.len() != test.rows() {
            return Err(Error::Shape(format!(
                "{} labels for {} test rows",
                test_labels.len(),
                test.rows()
            )));
        }
        Ok(Self {
            train_truthful,
            train_hallucinated,
            test,
            test_labels,
        })
    }

    /// Test set made of truthful rows followed by hallucinated rows.
    pub fn from_class_splits(
        train_truthful: EmbeddingMatrix,
        train_hallucinated: EmbeddingMatrix,
        test_truthful: &EmbeddingMatrix,
        test_hallucinated: &EmbeddingMatrix,
    ) -> Result<Self> {
        let test = test_truthful.vstack(test_hallucinated)?;
        let labels = std::iter::repeat_n(false, test_truthful.rows())
            .chain(std::iter::repeat_n(true, test_hallucinated.rows()))
            .collect();
        Self::new(train_truthful, train_hallucinated, test, labels)
    }

    pub fn dim(&self) -> usize {
        self.test.cols()
    }

    pub fn fit(&self, cfg: &MahalanobisConfig, tau: f64) -> Result<CmDetector> {
        CmDetector::fit(&self.train_truthful, &self.train_hallucinated, cfg, tau)
    }
}

/// δ for every test row of `fixture` under `det`.
pub fn score_test_set(det: &CmDetector, fixture: &EvalFixture) -> Result<Vec<LabeledScore>> {
    if det.dim() != fixture.dim() {
        return Err(Error::Shape(format!(
            "detector d={} cannot score test d={}",
            det.dim(),
            fixture.dim()
        )));
    }
    (0..fixture.test.rows())
        .into_par_iter()
        .map(|i| {
            let s = det.score_f32(fixture.test.row(i))?;
            Ok(LabeledScore::new(s.delta, fixture.test_labels[i]))
        })
        .collect()
}

/// Fits on the fixture's training split and evaluates on its test split.
pub fn evaluate_fixture(
    fixture: &EvalFixture,
    cfg: &MahalanobisConfig,
    tau: f64,
) -> Result<EvalReport> {
    let det = fixture.fit(cfg, tau)?;
    evaluate(&score_test_set(&det, fixture)?, Some(tau), DEFAULT_BINS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    K,
    Tau,
    Layer,
    Template,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::K => "k",
            SweepAxis::Tau => "tau",
            SweepAxis::Layer => "layer",
            SweepAxis::Template => "template",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HyperAxis {
    K,
    Tau,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub setting: f64,
    pub auroc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

impl SweepPoint {
    /// Accuracy when present (τ sweeps), AUROC otherwise.
    pub fn value(&self) -> f64 {
        self.accuracy.unwrap_or(self.auroc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn get(&self, setting: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.setting == setting)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record([self.axis.to_string().as_str(), "auroc", "accuracy"])
            .map_err(err)?;
        for p in &self.points {
            w.write_record([
                p.setting.to_string(),
                p.auroc.to_string(),
                p.accuracy.map(|a| a.to_string()).unwrap_or_default(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|source| Error::Io { offset: 0, source })
    }
}

fn fixture_sweep<K: Copy + Into<f64> + Send + Sync + Ord>(
    axis: SweepAxis,
    fixtures: &BTreeMap<K, EvalFixture>,
    cfg: &MahalanobisConfig,
    tau: f64,
) -> Result<SweepResult> {
    if fixtures.len() < 2 {
        return Err(Error::Parameter(format!(
            "a {axis} sweep needs at least 2 settings, got {}",
            fixtures.len()
        )));
    }
    let entries: Vec<(&K, &EvalFixture)> = fixtures.iter().collect();
    let points = entries
        .par_iter()
        .map(|(setting, fixture)| {
            let report = evaluate_fixture(fixture, cfg, tau)?;
            Ok(SweepPoint {
                setting: (**setting).into(),
                auroc: report.auroc,
                accuracy: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { axis, points })
}

/// One detector per layer; AUROC on each layer's held-out rows.
pub fn layer_sweep(
    per_layer: &BTreeMap<u32, EvalFixture>,
    cfg: &MahalanobisConfig,
    tau: f64,
) -> Result<SweepResult> {
    fixture_sweep(SweepAxis::Layer, per_layer, cfg, tau)
}

/// One detector per augmentation template.
pub fn template_sweep(
    per_template: &BTreeMap<u8, EvalFixture>,
    cfg: &MahalanobisConfig,
    tau: f64,
) -> Result<SweepResult> {
    fixture_sweep(SweepAxis::Template, per_template, cfg, tau)
}

fn sorted_unique(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Parameter("sweep needs at least one value".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Parameter("sweep values must not be NaN".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

/// Sweeps k (AUROC per retained rank) or τ (accuracy per threshold on one
/// fixed set of scores). Values are deduplicated and sorted.
pub fn hyperparam_sweep(
    axis: HyperAxis,
    values: &[f64],
    fixture: &EvalFixture,
    base: &MahalanobisConfig,
    tau: f64,
) -> Result<SweepResult> {
    let values = sorted_unique(values)?;
    match axis {
        HyperAxis::K => {
            if let Some(bad) = values
                .iter()
                .find(|v| **v < 1.0 || v.fract() != 0.0 || !v.is_finite())
            {
                return Err(Error::Parameter(format!(
                    "k must be a positive integer, got {bad}"
                )));
            }
            let points = values
                .par_iter()
                .map(|&k| {
                    let cfg = MahalanobisConfig {
                        k: k as usize,
                        ..*base
                    };
                    let det = fixture.fit(&cfg, tau)?;
                    Ok(SweepPoint {
                        setting: k,
                        auroc: auroc(&score_test_set(&det, fixture)?)?,
                        accuracy: None,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepResult {
                axis: SweepAxis::K,
                points,
            })
        }
        HyperAxis::Tau => {
            let det = fixture.fit(base, tau)?;
            let scores = score_test_set(&det, fixture)?;
            let area = auroc(&scores)?;
            let points = values
                .iter()
                .map(|&t| {
                    Ok(SweepPoint {
                        setting: t,
                        auroc: area,
                        accuracy: Some(accuracy_at(&scores, t)?),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepResult {
                axis: SweepAxis::Tau,
                points,
            })
        }
    }
}

/// AUROC of a detector trained on each source and tested on each target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub names: Vec<String>,
    /// auroc[source][target]
    pub auroc: Vec<Vec<f64>>,
}

impl TransferMatrix {
    pub fn get(&self, source: &str, target: &str) -> Option<f64> {
        let s = self.names.iter().position(|n| n == source)?;
        let t = self.names.iter().position(|n| n == target)?;
        Some(self.auroc[s][t])
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Parse(e.to_string());
        let mut header = vec!["source".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header).map_err(err)?;
        for (name, row) in self.names.iter().zip(&self.auroc) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|source| Error::Io { offset: 0, source })
    }
}

pub fn transfer_eval(
    datasets: &BTreeMap<String, EvalFixture>,
    cfg: &MahalanobisConfig,
    tau: f64,
) -> Result<TransferMatrix> {
    if datasets.len() < 2 {
        return Err(Error::Parameter(format!(
            "transfer needs at least 2 datasets, got {}",
            datasets.len()
        )));
    }
    let names: Vec<String> = datasets.keys().cloned().collect();
    let fixtures: Vec<&EvalFixture> = datasets.values().collect();
    let d = fixtures[0].dim();
    if let Some((name, f)) = names.iter().zip(&fixtures).find(|(_, f)| f.dim() != d) {
        return Err(Error::Shape(format!(
            "dataset {name:?} has d={}, expected {d}; embeddings must share model and layer",
            f.dim()
        )));
    }
    let detectors = fixtures
        .par_iter()
        .map(|f| f.fit(cfg, tau))
        .collect::<Result<Vec<_>>>()?;
    let auroc = detectors
        .par_iter()
        .map(|det| {
            fixtures
                .iter()
                .map(|target| auroc(&score_test_set(det, target)?))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransferMatrix { names, auroc })
}
