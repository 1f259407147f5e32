//! Threshold-free and thresholded evaluation of scored examples, plus the
//! ablation harnesses built on top.

mod judge;
mod sweep;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use judge::{judge_truthfulness, parse_judge_reply, JudgeConfig, JudgeVerdict};
pub use sweep::{
    evaluate_fixture, hyperparam_sweep, layer_sweep, score_test_set, template_sweep, transfer_eval,
    EvalFixture, HyperAxis, SweepAxis, SweepPoint, SweepResult, TransferMatrix,
};

/// A score and its ground truth; hallucinated is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledScore {
    pub delta: f64,
    pub hallucinated: bool,
}

impl LabeledScore {
    pub fn new(delta: f64, hallucinated: bool) -> Self {
        Self {
            delta,
            hallucinated,
        }
    }
}

fn class_counts(scores: &[LabeledScore]) -> Result<(usize, usize)> {
    if let Some(s) = scores.iter().find(|s| s.delta.is_nan()) {
        return Err(Error::Parameter(format!("score is NaN: {s:?}")));
    }
    let n_pos = scores.iter().filter(|s| s.hallucinated).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels(format!(
            "need both classes, got {n_pos} hallucinated and {n_neg} truthful"
        )));
    }
    Ok((n_pos, n_neg))
}

/// Scores sorted ascending, grouped into runs of equal δ: (positives, negatives).
fn tie_groups(scores: &[LabeledScore]) -> Vec<(usize, usize)> {
    let mut sorted: Vec<&LabeledScore> = scores.iter().collect();
    sorted.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i].delta;
        let (mut p, mut q) = (0, 0);
        // -0.0 and 0.0 compare equal and share a group
        while i < sorted.len() && sorted[i].delta == v {
            if sorted[i].hallucinated {
                p += 1;
            } else {
                q += 1;
            }
            i += 1;
        }
        groups.push((p, q));
    }
    groups
}

/// Mann-Whitney AUROC: the fraction of (hallucinated, truthful) pairs in
/// which the hallucinated example has the higher δ, ties counting half.
pub fn auroc(scores: &[LabeledScore]) -> Result<f64> {
    let (n_pos, n_neg) = class_counts(scores)?;
    // twice the number of correctly ordered pairs, so ties stay integral
    let mut doubled: u128 = 0;
    let mut neg_below: u128 = 0;
    for (p, q) in tie_groups(scores) {
        doubled += p as u128 * (2 * neg_below + q as u128);
        neg_below += q as u128;
    }
    Ok(doubled as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// ROC points from (0,0) to (1,1), one per distinct δ taken as a threshold
/// in descending order.
pub fn roc_curve(scores: &[LabeledScore]) -> Result<Vec<(f64, f64)>> {
    let (n_pos, n_neg) = class_counts(scores)?;
    let mut groups = tie_groups(scores);
    groups.reverse();
    let mut points = Vec::with_capacity(groups.len() + 1);
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    for (p, q) in groups {
        tp += p;
        fp += q;
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Ok(points)
}

pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Fraction of examples whose thresholded verdict (δ ≥ τ ⇒ hallucinated)
/// matches the label.
pub fn accuracy_at(scores: &[LabeledScore], tau: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Parameter("no scores".into()));
    }
    let correct = scores
        .iter()
        .filter(|s| (s.delta >= tau) == s.hallucinated)
        .count();
    Ok(correct as f64 / scores.len() as f64)
}

/// Per-class counts over shared bins spanning [min δ, max δ].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreHistogram {
    pub edges: Vec<f64>,
    pub truthful: Vec<u64>,
    pub hallucinated: Vec<u64>,
}

impl ScoreHistogram {
    pub fn bins(&self) -> usize {
        self.truthful.len()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["bin_lo", "bin_hi", "count_truthful", "count_hallucinated"])
            .map_err(err)?;
        for b in 0..self.bins() {
            w.write_record([
                self.edges[b].to_string(),
                self.edges[b + 1].to_string(),
                self.truthful[b].to_string(),
                self.hallucinated[b].to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|source| Error::Io { offset: 0, source })
    }
}

/// Histogram of δ per class. The last bin is closed on the right.
pub fn export_score_distribution(scores: &[LabeledScore], bins: usize) -> Result<ScoreHistogram> {
    if bins < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 bins, got {bins}"
        )));
    }
    if scores.is_empty() {
        return Err(Error::Parameter("no scores to bin".into()));
    }
    class_counts(scores)?;
    if scores.iter().any(|s| !s.delta.is_finite()) {
        return Err(Error::Parameter("scores must be finite to bin".into()));
    }
    let lo = scores.iter().map(|s| s.delta).fold(f64::INFINITY, f64::min);
    let hi = scores
        .iter()
        .map(|s| s.delta)
        .fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + i as f64 * width).collect();
    edges.push(hi);

    let mut truthful = vec![0u64; bins];
    let mut hallucinated = vec![0u64; bins];
    for s in scores {
        let idx = if width > 0.0 {
            (((s.delta - lo) / width).floor() as usize).min(bins - 1)
        } else {
            0
        };
        if s.hallucinated {
            hallucinated[idx] += 1;
        } else {
            truthful[idx] += 1;
        }
    }
    Ok(ScoreHistogram {
        edges,
        truthful,
        hallucinated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auroc: f64,
    pub roc_points: Vec<(f64, f64)>,
    pub n_pos: usize,
    pub n_neg: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    pub score_histograms: ScoreHistogram,
}

pub const DEFAULT_BINS: usize = 20;

pub fn evaluate(scores: &[LabeledScore], tau: Option<f64>, bins: usize) -> Result<EvalReport> {
    let (n_pos, n_neg) = class_counts(scores)?;
    Ok(EvalReport {
        auroc: auroc(scores)?,
        roc_points: roc_curve(scores)?,
        n_pos,
        n_neg,
        tau,
        accuracy: tau.map(|t| accuracy_at(scores, t)).transpose()?,
        score_histograms: export_score_distribution(scores, bins)?,
    })
}

pub fn write_roc_csv<W: Write>(points: &[(f64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["fpr", "tpr"]).map_err(err)?;
    for (x, y) in points {
        w.write_record([x.to_string(), y.to_string()])
            .map_err(err)?;
    }
    w.flush().map_err(|source| Error::Io { offset: 0, source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(pos: &[f64], neg: &[f64]) -> Vec<LabeledScore> {
        pos.iter()
            .map(|&d| LabeledScore::new(d, true))
            .chain(neg.iter().map(|&d| LabeledScore::new(d, false)))
            .collect()
    }

    #[test]
    fn perfect_separation() {
        let s = scores(&[2.0, 3.0], &[0.0, 1.0]);
        assert_eq!(auroc(&s).unwrap(), 1.0);
        assert!(roc_curve(&s).unwrap().contains(&(0.0, 1.0)));
    }

    #[test]
    fn all_ties_are_chance() {
        let s = scores(&[1.0, 1.0, 1.0], &[1.0, 1.0]);
        assert_eq!(auroc(&s).unwrap(), 0.5);
        assert_eq!(roc_curve(&s).unwrap(), vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn three_of_four_pairs_ordered() {
        let s = scores(&[1.0, 3.0], &[2.0, 0.0]);
        assert_eq!(auroc(&s).unwrap(), 0.75);
    }

    #[test]
    fn single_class_is_degenerate() {
        let s = scores(&[1.0, 2.0], &[]);
        assert!(matches!(auroc(&s), Err(Error::DegenerateLabels(_))));
        assert!(matches!(roc_curve(&s), Err(Error::DegenerateLabels(_))));
        assert!(export_score_distribution(&s, 4).is_err());
        assert!(auroc(&scores(&[f64::NAN], &[0.0])).is_err());
    }

    #[test]
    fn roc_area_matches_auroc_with_ties() {
        let s = scores(&[0.5, 1.0, 1.0, 3.0], &[1.0, 0.2, 2.0]);
        let area = trapezoid_area(&roc_curve(&s).unwrap());
        assert!((area - auroc(&s).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn histogram_splits_at_median() {
        let s = scores(&[2.0, 3.0], &[0.0, 1.0]);
        let h = export_score_distribution(&s, 2).unwrap();
        assert_eq!(h.edges, vec![0.0, 1.5, 3.0]);
        let totals: Vec<u64> = (0..2).map(|b| h.truthful[b] + h.hallucinated[b]).collect();
        assert_eq!(totals, vec![2, 2]);
        assert!(export_score_distribution(&s, 1).is_err());
        assert!(export_score_distribution(&[], 2).is_err());
    }

    #[test]
    fn histogram_of_constant_scores() {
        let s = scores(&[1.0], &[1.0]);
        let h = export_score_distribution(&s, 3).unwrap();
        assert_eq!(h.truthful, vec![1, 0, 0]);
        assert_eq!(h.hallucinated, vec![1, 0, 0]);
    }

    #[test]
    fn histogram_csv_columns() {
        let s = scores(&[2.0, 3.0], &[0.0, 1.0]);
        let mut buf = Vec::new();
        export_score_distribution(&s, 2)
            .unwrap()
            .write_csv(&mut buf)
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "bin_lo,bin_hi,count_truthful,count_hallucinated\n0,1.5,2,0\n1.5,3,0,2\n"
        );
    }

    #[test]
    fn accuracy_uses_inclusive_threshold() {
        let s = scores(&[0.15], &[0.1]);
        assert_eq!(accuracy_at(&s, 0.15).unwrap(), 1.0);
        assert_eq!(accuracy_at(&s, 0.2).unwrap(), 0.5);
    }

    #[test]
    fn report_bundles_metrics() {
        let s = scores(&[2.0, 3.0], &[0.0, 1.0]);
        let r = evaluate(&s, Some(1.5), 4).unwrap();
        assert_eq!((r.n_pos, r.n_neg), (2, 2));
        assert_eq!(r.auroc, 1.0);
        assert_eq!(r.accuracy, Some(1.0));
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"auroc\":1.0"));
    }
}
