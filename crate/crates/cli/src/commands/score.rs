use std::path::Path;

use halludetect_core::detector::write_scores_csv;
use halludetect_core::tensor_io::read_matrix_file;
use halludetect_core::{CmDetector, Dataset, Label, Verdict};
use serde_json::json;

use crate::args::ScoreArgs;
use crate::config::{config_err, existing, require, CliResult, RunMeta};
use crate::output::{check_writable, write_csv};

fn ids_from_file(path: &Path) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// Ids of the dataset's examples in embedding-row order. When every
/// selected example carries an `embedding_index` those indices must cover
/// 0..rows exactly; otherwise file order is used.
fn ids_from_dataset(path: &Path, label: Option<Label>, rows: usize) -> CliResult<Vec<String>> {
    let ds = Dataset::read_file(path)?;
    let selected: Vec<_> = ds
        .examples()
        .iter()
        .filter(|e| label.is_none_or(|l| e.label == l))
        .collect();
    if !selected.iter().all(|e| e.embedding_index.is_some()) {
        return Ok(selected.iter().map(|e| e.id.clone()).collect());
    }
    let mut slots: Vec<Option<String>> = vec![None; rows];
    for e in &selected {
        let i = e.embedding_index.expect("checked above");
        let slot = slots.get_mut(i).ok_or_else(|| {
            config_err(format!(
                "example {:?} points at row {i}, but the embeddings have {rows} rows",
                e.id
            ))
        })?;
        if slot.replace(e.id.clone()).is_some() {
            return Err(config_err(format!(
                "two examples share embedding_index {i}; pass --label to select one class"
            )));
        }
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| config_err(format!("no example maps to embedding row {i}"))))
        .collect()
}

pub fn run(args: ScoreArgs, seed: u64) -> CliResult<()> {
    let model_path = existing(args.model, "model")?;
    let emb_path = existing(args.embeddings, "embeddings")?;
    let out = require(args.out, "out")?;
    check_writable(&out)?;
    if args.ids.is_some() && args.dataset.is_some() {
        return Err(config_err("--ids and --dataset are mutually exclusive"));
    }
    if args.label.is_some() && args.dataset.is_none() {
        return Err(config_err("--label requires --dataset"));
    }

    let bytes = std::fs::read(&model_path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", model_path.display())))?;
    let mut det = CmDetector::load(&bytes)
        .map_err(|e| config_err(format!("{}: {e}", model_path.display())))?;
    if let Some(tau) = args.tau {
        det = det.with_tau(tau)?;
    }
    let m = read_matrix_file(&emb_path)
        .map_err(|e| config_err(format!("{}: {e}", emb_path.display())))?;
    if m.cols() != det.dim() {
        return Err(config_err(format!(
            "dimension mismatch: detector expects d={}, {} has d={}",
            det.dim(),
            emb_path.display(),
            m.cols()
        )));
    }

    let ids = match (&args.ids, &args.dataset) {
        (Some(p), _) => ids_from_file(&existing(Some(p.clone()), "ids")?)?,
        (None, Some(p)) => {
            ids_from_dataset(&existing(Some(p.clone()), "dataset")?, args.label, m.rows())?
        }
        (None, None) => (0..m.rows()).map(|i| format!("row-{i}")).collect(),
    };
    if ids.len() != m.rows() {
        return Err(config_err(format!(
            "{} ids for {} embedding rows",
            ids.len(),
            m.rows()
        )));
    }

    let scores = det.batch_score(&m, &ids)?;
    let meta = RunMeta::new(
        "score",
        seed,
        &json!({
            "model": model_path,
            "embeddings": emb_path,
            "ids": args.ids,
            "dataset": args.dataset,
            "label": args.label,
            "tau": det.tau(),
        }),
    );
    write_csv(&out, &meta, |w| write_scores_csv(&scores, w))?;

    let hallucinated = scores
        .iter()
        .filter(|s| s.verdict == Verdict::Hallucinated)
        .count();
    let mean = scores.iter().map(|s| s.delta).sum::<f64>() / scores.len() as f64;
    println!(
        "scored {} rows: {hallucinated} hallucinated, {} truthful (tau={}, mean delta={mean:.6})",
        scores.len(),
        scores.len() - hallucinated,
        det.tau()
    );
    Ok(())
}
