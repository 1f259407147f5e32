use std::path::{Path, PathBuf};

use halludetect_core::synth::{gaussian_pair, GaussianPairSpec};
use halludetect_core::tensor_io::write_matrix;
use halludetect_core::{Dataset, DatasetMeta, EmbeddingMatrix, Label, LabeledExample};
use serde_json::json;

use crate::args::SynthArgs;
use crate::commands::manifest::{FixturePaths, Manifest};
use crate::config::{config_err, require, CliError, CliResult, RunMeta};
use crate::output::{write_atomic, write_json};

const DEFAULT_NAME: &str = "synthetic";
const MANIFEST: &str = "manifest.json";

fn write_emb(path: &Path, m: &EmbeddingMatrix) -> CliResult<()> {
    write_atomic(path, |w| {
        write_matrix(m, w)
            .map(|_| ())
            .map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))
    })
}

/// Test rows of both classes stacked (truthful first) with a matching dataset.
fn labeled_test_set(
    name: &str,
    t: &EmbeddingMatrix,
    h: &EmbeddingMatrix,
) -> CliResult<(EmbeddingMatrix, Vec<LabeledExample>)> {
    let stacked = t.vstack(h)?;
    let examples = (0..t.rows())
        .map(|i| (format!("{name}-t{i}"), Label::Truthful))
        .chain((0..h.rows()).map(|i| (format!("{name}-h{i}"), Label::Hallucinated)))
        .enumerate()
        .map(|(row, (id, label))| {
            let mut ex = LabeledExample::new(id, "", "", label);
            ex.embedding_index = Some(row);
            ex
        })
        .collect();
    Ok((stacked, examples))
}

pub fn run(args: SynthArgs, seed: u64) -> CliResult<()> {
    let out_dir = require(args.out_dir, "out-dir")?;
    let name = args.name.unwrap_or_else(|| DEFAULT_NAME.to_string());
    if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
        return Err(config_err(format!(
            "--name {name:?} must be a plain file name"
        )));
    }
    let d = GaussianPairSpec::default();
    let spec = GaussianPairSpec {
        dim: args.dim.unwrap_or(d.dim),
        n_train: args.n_train.unwrap_or(d.n_train),
        n_test: args.n_test.unwrap_or(d.n_test),
        separation: args.separation.unwrap_or(d.separation),
        spike_dims: args.spike_dims.unwrap_or(d.spike_dims),
        spike_scale: args.spike_scale.unwrap_or(d.spike_scale),
        offset: args.offset.unwrap_or(d.offset),
        basis_seed: args.basis_seed.unwrap_or(d.basis_seed),
    };
    let split = gaussian_pair(&spec, seed)?;

    let dir = out_dir.join(&name);
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Output(format!("cannot create {}: {e}", dir.display())))?;
    let meta = RunMeta::new(
        "synth",
        seed,
        &json!({
            "name": name,
            "dim": spec.dim,
            "n_train": spec.n_train,
            "n_test": spec.n_test,
            "separation": spec.separation,
            "spike_dims": spec.spike_dims,
            "spike_scale": spec.spike_scale,
            "offset": spec.offset,
            "basis_seed": spec.basis_seed,
        }),
    );

    let rel = |file: &str| PathBuf::from(&name).join(file);
    let paths = FixturePaths {
        train_truthful: rel("train_truthful.emb"),
        train_hallucinated: rel("train_hallucinated.emb"),
        test_truthful: rel("test_truthful.emb"),
        test_hallucinated: rel("test_hallucinated.emb"),
        meta: Some(meta.to_value()),
    };
    write_emb(&out_dir.join(&paths.train_truthful), &split.train_truthful)?;
    write_emb(
        &out_dir.join(&paths.train_hallucinated),
        &split.train_hallucinated,
    )?;
    write_emb(&out_dir.join(&paths.test_truthful), &split.test_truthful)?;
    write_emb(
        &out_dir.join(&paths.test_hallucinated),
        &split.test_hallucinated,
    )?;

    let (test, examples) = labeled_test_set(&name, &split.test_truthful, &split.test_hallucinated)?;
    write_emb(&dir.join("test.emb"), &test)?;
    let ds = Dataset::new(
        examples,
        DatasetMeta {
            source: Some("synthetic".into()),
            label_source: Some("synthetic".into()),
            run: Some(meta.to_value()),
            ..DatasetMeta::default()
        },
    )?;
    let ds_path = dir.join("test.jsonl");
    write_atomic(&ds_path, |w| {
        ds.write_jsonl(w)
            .map_err(|e| CliError::Output(format!("cannot write {}: {e}", ds_path.display())))
    })?;

    let manifest_path = out_dir.join(MANIFEST);
    let mut manifest = if manifest_path.exists() {
        Manifest::read(&manifest_path)?
    } else {
        Manifest::default()
    };
    manifest.fixtures.insert(name.clone(), paths);
    write_json(&manifest_path, &manifest)?;

    println!(
        "wrote fixture {name:?} (d={}, {} train + {} test per class) to {}",
        spec.dim,
        spec.n_train,
        spec.n_test,
        dir.display()
    );
    Ok(())
}
