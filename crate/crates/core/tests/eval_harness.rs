mod common;

use std::collections::BTreeMap;

use common::pairwise_auroc;
use halludetect_core::eval::{
    accuracy_at, auroc, evaluate, evaluate_fixture, export_score_distribution, hyperparam_sweep,
    judge_truthfulness, layer_sweep, roc_curve, template_sweep, transfer_eval, trapezoid_area,
    write_roc_csv, HyperAxis, JudgeConfig, LabeledScore, SweepAxis,
};
use halludetect_core::llm::{HttpClient, MockReply, MockServer, RetryPolicy};
use halludetect_core::synth::{gaussian_pair, GaussianPairSpec};
use halludetect_core::{Error, MahalanobisConfig};
use proptest::prelude::*;

fn labeled(pos: &[f64], neg: &[f64]) -> Vec<LabeledScore> {
    pos.iter()
        .map(|&d| LabeledScore::new(d, true))
        .chain(neg.iter().map(|&d| LabeledScore::new(d, false)))
        .collect()
}

/// Deltas drawn from a small grid so ties are common.
fn tied_scores() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    let v = (-6i32..6).prop_map(|x| x as f64 * 0.5);
    (
        prop::collection::vec(v.clone(), 1..40),
        prop::collection::vec(v, 1..40),
    )
}

proptest! {
    #[test]
    fn auroc_equals_pairwise_count((pos, neg) in tied_scores()) {
        let got = auroc(&labeled(&pos, &neg)).unwrap();
        prop_assert_eq!(got, pairwise_auroc(&pos, &neg));
    }

    #[test]
    fn auroc_equals_pairwise_count_continuous(
        pos in prop::collection::vec(-1e3f64..1e3, 1..60),
        neg in prop::collection::vec(-1e3f64..1e3, 1..60),
    ) {
        prop_assert_eq!(auroc(&labeled(&pos, &neg)).unwrap(), pairwise_auroc(&pos, &neg));
    }

    #[test]
    fn strictly_increasing_transforms_preserve_auroc((pos, neg) in tied_scores()) {
        let f = |x: f64| (x * 0.7).exp() * 3.0 - 11.0;
        let a = auroc(&labeled(&pos, &neg)).unwrap();
        let pos2: Vec<f64> = pos.iter().map(|&x| f(x)).collect();
        let neg2: Vec<f64> = neg.iter().map(|&x| f(x)).collect();
        prop_assert_eq!(a, auroc(&labeled(&pos2, &neg2)).unwrap());
    }

    #[test]
    fn negating_scores_complements_auroc((pos, neg) in tied_scores()) {
        let a = auroc(&labeled(&pos, &neg)).unwrap();
        let pos2: Vec<f64> = pos.iter().map(|x| -x).collect();
        let neg2: Vec<f64> = neg.iter().map(|x| -x).collect();
        let b = auroc(&labeled(&pos2, &neg2)).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn roc_area_is_auroc((pos, neg) in tied_scores()) {
        let s = labeled(&pos, &neg);
        let pts = roc_curve(&s).unwrap();
        prop_assert_eq!(pts[0], (0.0, 0.0));
        prop_assert_eq!(*pts.last().unwrap(), (1.0, 1.0));
        for w in pts.windows(2) {
            prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
        prop_assert!((trapezoid_area(&pts) - auroc(&s).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn histogram_conserves_counts((pos, neg) in tied_scores(), bins in 2usize..30) {
        let h = export_score_distribution(&labeled(&pos, &neg), bins).unwrap();
        prop_assert_eq!(h.hallucinated.iter().sum::<u64>(), pos.len() as u64);
        prop_assert_eq!(h.truthful.iter().sum::<u64>(), neg.len() as u64);
        prop_assert_eq!(h.edges.len(), bins + 1);
    }
}

#[test]
fn small_hand_examples() {
    assert_eq!(auroc(&labeled(&[3.0, 4.0], &[1.0, 2.0])).unwrap(), 1.0);
    assert_eq!(auroc(&labeled(&[1.0], &[2.0])).unwrap(), 0.0);
    assert_eq!(auroc(&labeled(&[1.0, 1.0], &[1.0])).unwrap(), 0.5);
    // pairs: (2,1) correct, (2,2) tie, (0,1) and (0,2) wrong
    assert_eq!(
        auroc(&labeled(&[2.0, 0.0], &[1.0, 2.0])).unwrap(),
        1.5 / 4.0
    );
    assert!(matches!(
        auroc(&labeled(&[1.0, 2.0], &[])),
        Err(Error::DegenerateLabels(_))
    ));
    assert!(auroc(&labeled(&[f64::NAN], &[1.0])).is_err());
}

#[test]
fn accuracy_uses_inclusive_threshold() {
    let s = labeled(&[0.15, 1.0], &[0.1, -1.0]);
    assert_eq!(accuracy_at(&s, 0.15).unwrap(), 1.0);
    assert_eq!(accuracy_at(&s, 0.2).unwrap(), 0.75);
}

#[test]
fn report_and_roc_csv() {
    let s = labeled(&[1.0, 2.0, 0.5], &[-1.0, 0.0, 0.75]);
    let r = evaluate(&s, Some(0.0), 4).unwrap();
    assert_eq!((r.n_pos, r.n_neg), (3, 3));
    assert_eq!(
        r.auroc,
        pairwise_auroc(&[1.0, 2.0, 0.5], &[-1.0, 0.0, 0.75])
    );
    // the negatives at 0 and 0.75 land on the hallucinated side of τ = 0
    assert_eq!(r.accuracy, Some(4.0 / 6.0));
    let mut csv = Vec::new();
    write_roc_csv(&r.roc_points, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("fpr,tpr\n0,0\n"));
    assert_eq!(text.lines().count(), r.roc_points.len() + 1);
}

fn spec(sep: f64) -> GaussianPairSpec {
    GaussianPairSpec {
        dim: 16,
        n_train: 150,
        n_test: 80,
        separation: sep,
        spike_dims: 3,
        ..GaussianPairSpec::default()
    }
}

#[test]
fn synthetic_fixture_is_separable() {
    let fx = gaussian_pair(&GaussianPairSpec::default(), 1)
        .unwrap()
        .into_fixture()
        .unwrap();
    let r = evaluate_fixture(&fx, &MahalanobisConfig::default(), 0.0).unwrap();
    assert!(r.auroc > 0.95, "{}", r.auroc);
    assert!(r.accuracy.unwrap() > 0.90);
}

#[test]
fn layer_sweep_tracks_separability() {
    let mut per_layer = BTreeMap::new();
    for (layer, sep) in [(4u32, 0.5), (16, 6.0)] {
        per_layer.insert(
            layer,
            gaussian_pair(&spec(sep), layer as u64)
                .unwrap()
                .into_fixture()
                .unwrap(),
        );
    }
    let res = layer_sweep(&per_layer, &MahalanobisConfig::default(), 0.15).unwrap();
    assert_eq!(res.axis, SweepAxis::Layer);
    assert!(res.get(16.0).unwrap().auroc > res.get(4.0).unwrap().auroc);
    let mut csv = Vec::new();
    res.write_csv(&mut csv).unwrap();
    assert!(String::from_utf8(csv)
        .unwrap()
        .starts_with("layer,auroc,accuracy\n4,"));

    let single: BTreeMap<u32, _> = per_layer.into_iter().take(1).collect();
    assert!(layer_sweep(&single, &MahalanobisConfig::default(), 0.15).is_err());
}

#[test]
fn template_sweep_reports_each_template() {
    let per_template: BTreeMap<u8, _> = (1u8..=3)
        .map(|t| {
            (
                t,
                gaussian_pair(&spec(3.0), t as u64)
                    .unwrap()
                    .into_fixture()
                    .unwrap(),
            )
        })
        .collect();
    let res = template_sweep(&per_template, &MahalanobisConfig::default(), 0.15).unwrap();
    let settings: Vec<f64> = res.points.iter().map(|p| p.setting).collect();
    assert_eq!(settings, [1.0, 2.0, 3.0]);
}

#[test]
fn hyperparameter_sweeps() {
    let fx = gaussian_pair(&spec(4.0), 3)
        .unwrap()
        .into_fixture()
        .unwrap();
    let base = MahalanobisConfig::default();
    let ks = hyperparam_sweep(HyperAxis::K, &[8.0, 1.0, 4.0, 4.0], &fx, &base, 0.0).unwrap();
    assert_eq!(
        ks.points.iter().map(|p| p.setting).collect::<Vec<_>>(),
        [1.0, 4.0, 8.0]
    );
    for p in &ks.points {
        let direct =
            evaluate_fixture(&fx, &MahalanobisConfig::with_k(p.setting as usize), 0.0).unwrap();
        assert_eq!(p.auroc, direct.auroc);
    }
    assert!(hyperparam_sweep(HyperAxis::K, &[0.0], &fx, &base, 0.0).is_err());
    assert!(hyperparam_sweep(HyperAxis::K, &[2.5], &fx, &base, 0.0).is_err());

    let taus = hyperparam_sweep(HyperAxis::Tau, &[-1.0, 0.0, 1.0], &fx, &base, 0.0).unwrap();
    for p in &taus.points {
        let direct = evaluate_fixture(&fx, &base, p.setting).unwrap();
        assert_eq!(p.accuracy, direct.accuracy);
        assert_eq!(p.auroc, direct.auroc);
    }
}

#[test]
fn transfer_grid_diagonal_dominates() {
    let names = ["alpha", "beta", "gamma"];
    let datasets: BTreeMap<String, _> = names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let s = GaussianPairSpec {
                basis_seed: 100 + i as u64,
                ..spec(5.0)
            };
            (
                n.to_string(),
                gaussian_pair(&s, i as u64).unwrap().into_fixture().unwrap(),
            )
        })
        .collect();
    let m = transfer_eval(&datasets, &MahalanobisConfig::default(), 0.15).unwrap();
    assert_eq!(m.names, names);
    for s in names {
        let diag = m.get(s, s).unwrap();
        let direct = evaluate_fixture(&datasets[s], &MahalanobisConfig::default(), 0.15).unwrap();
        assert_eq!(diag, direct.auroc);
        for t in names {
            if s != t {
                assert!(diag > m.get(s, t).unwrap(), "{s}->{t}");
            }
        }
    }
    let mut csv = Vec::new();
    m.write_csv(&mut csv).unwrap();
    assert!(String::from_utf8(csv)
        .unwrap()
        .starts_with("source,alpha,beta,gamma\n"));
}

#[test]
fn transfer_rejects_mismatched_dims() {
    let mut datasets = BTreeMap::new();
    datasets.insert(
        "a".to_string(),
        gaussian_pair(&spec(3.0), 0)
            .unwrap()
            .into_fixture()
            .unwrap(),
    );
    let wide = GaussianPairSpec {
        dim: 20,
        ..spec(3.0)
    };
    datasets.insert(
        "b".to_string(),
        gaussian_pair(&wide, 0).unwrap().into_fixture().unwrap(),
    );
    assert!(matches!(
        transfer_eval(&datasets, &MahalanobisConfig::default(), 0.15),
        Err(Error::Shape(_))
    ));
}

#[tokio::test]
async fn judge_reads_yes_and_retries_garbage_once() {
    let server = MockServer::start(vec![
        MockReply::content("- Answer: Yes\n- Justification: Same city."),
        MockReply::content("no idea"),
        MockReply::content("- Answer: No\n- Justification: Wrong."),
        MockReply::content("??"),
        MockReply::content("still ??"),
    ])
    .await
    .unwrap();
    let client = HttpClient::new(&server.endpoint(), None).unwrap();
    let cfg = JudgeConfig {
        retry: RetryPolicy::no_delay(1),
        ..JudgeConfig::default()
    };
    let gold = vec!["Paris".to_string(), "City of Paris".to_string()];
    let v = judge_truthfulness("Capital of France?", &gold, "Paris.", &client, &cfg)
        .await
        .unwrap();
    assert!(v.truthful);
    assert_eq!(v.justification, "Same city.");
    let prompt = server.requests()[0].last_message();
    assert!(prompt.contains("Gold Standard Answers: Paris; City of Paris\n"));
    assert!(prompt.contains("Generated Answer: Paris.\n"));

    let v = judge_truthfulness("Capital of France?", &gold, "Lyon.", &client, &cfg)
        .await
        .unwrap();
    assert!(!v.truthful);
    let err = judge_truthfulness("Capital of France?", &gold, "Lyon.", &client, &cfg)
        .await
        .unwrap_err();
    assert!(matches!(err, Error::JudgeParse(_)));
    assert_eq!(server.request_count(), 5);
}
