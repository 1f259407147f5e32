use std::collections::{HashMap, HashSet};

use halludetect_core::detector::{read_scores_csv, DEFAULT_TAU};
use halludetect_core::eval::{evaluate, write_roc_csv, LabeledScore, DEFAULT_BINS};
use halludetect_core::{Dataset, Label};
use serde_json::json;

use crate::args::EvalArgs;
use crate::config::{config_err, existing, require, CliResult, RunMeta};
use crate::output::{check_writable, write_csv, write_report};

const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.5;

pub fn run(args: EvalArgs, seed: u64) -> CliResult<()> {
    let score_paths = require(args.scores, "scores")?;
    if score_paths.is_empty() {
        return Err(config_err("--scores needs at least one file"));
    }
    let score_paths = score_paths
        .into_iter()
        .map(|p| existing(Some(p), "scores"))
        .collect::<CliResult<Vec<_>>>()?;
    let dataset_path = existing(args.dataset, "dataset")?;
    let out = require(args.out, "out")?;
    for p in [Some(&out), args.roc_csv.as_ref(), args.hist_csv.as_ref()]
        .into_iter()
        .flatten()
    {
        check_writable(p)?;
    }
    let tau = args.tau.unwrap_or(DEFAULT_TAU);
    let bins = args.bins.unwrap_or(DEFAULT_BINS);
    let threshold = args
        .similarity_threshold
        .unwrap_or(DEFAULT_SIMILARITY_THRESHOLD);

    let ds = Dataset::read_file(&dataset_path)?;
    let labels: HashMap<&str, Label> = ds
        .examples()
        .iter()
        .map(|e| (e.id.as_str(), e.resolved_label(threshold)))
        .collect();

    let mut seen = HashSet::new();
    let mut scores = Vec::new();
    for path in &score_paths {
        let file = std::fs::File::open(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let rows = read_scores_csv(std::io::BufReader::new(file))
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        for s in rows {
            let label = labels.get(s.id.as_str()).ok_or_else(|| {
                config_err(format!(
                    "score id {:?} is not in {}",
                    s.id,
                    dataset_path.display()
                ))
            })?;
            let hallucinated = label.is_hallucinated().ok_or_else(|| {
                config_err(format!(
                    "example {:?} has no label or similarity score",
                    s.id
                ))
            })?;
            if !seen.insert(s.id.clone()) {
                return Err(config_err(format!(
                    "id {:?} is scored more than once",
                    s.id
                )));
            }
            scores.push(LabeledScore::new(s.delta, hallucinated));
        }
    }

    let report = evaluate(&scores, Some(tau), bins)?;
    let meta = RunMeta::new(
        "eval",
        seed,
        &json!({
            "scores": score_paths,
            "dataset": dataset_path,
            "tau": tau,
            "bins": bins,
            "similarity_threshold": threshold,
        }),
    );
    write_report(&out, &report, &meta)?;
    if let Some(p) = &args.roc_csv {
        write_csv(p, &meta, |w| write_roc_csv(&report.roc_points, w))?;
    }
    if let Some(p) = &args.hist_csv {
        write_csv(p, &meta, |w| report.score_histograms.write_csv(w))?;
    }
    println!(
        "auroc={:.6} accuracy@tau={tau}: {:.6} (n_hallucinated={}, n_truthful={})",
        report.auroc,
        report.accuracy.unwrap_or(f64::NAN),
        report.n_pos,
        report.n_neg
    );
    Ok(())
}
