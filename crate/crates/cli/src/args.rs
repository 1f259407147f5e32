//! Command-line flags. Every per-command option is optional here so a value
//! given on the command line can be layered over one from the config file;
//! defaults are applied after layering.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use halludetect_core::{Label, ResidualMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "halludetect",
    version,
    about = "Hallucination detection with the contrastive Mahalanobis score",
    propagate_version = true
)]
pub struct Cli {
    /// TOML config file; keys mirror flag names, one table per subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed recorded in output metadata and used by seeded commands [default: 0].
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate paired truthful/hallucinated QA data through a chat endpoint.
    Augment(AugmentArgs),
    /// Fit the two class Gaussians and save a detector.
    Fit(FitArgs),
    /// Score embeddings with a saved detector.
    Score(ScoreArgs),
    /// AUROC, ROC and score histograms for labeled scores.
    Eval(EvalArgs),
    /// Sweep k, tau, layer or template on embedding fixtures.
    Sweep(SweepArgs),
    /// Train on each dataset, test on every dataset.
    Transfer(TransferArgs),
    /// Write a seeded two-class Gaussian embedding fixture.
    Synth(SynthArgs),
}

/// Fills every field left unset on the command line from the config file.
macro_rules! layered {
    ($name:ident { $($field:ident),* $(,)? }) => {
        impl $name {
            pub fn layered_over(self, file: $name) -> $name {
                $name { $($field: self.$field.or(file.$field)),* }
            }
        }
    };
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct AugmentArgs {
    /// Questions JSONL, one {id, question, reference_answer} per line.
    #[arg(long, value_name = "FILE")]
    pub questions: Option<PathBuf>,
    /// Output dataset JSONL.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Audit JSONL of every prompt and raw response.
    #[arg(long, value_name = "FILE")]
    pub audit: Option<PathBuf>,
    /// Resume journal; finished questions listed here are not re-queried.
    #[arg(long, value_name = "FILE")]
    pub journal: Option<PathBuf>,
    /// Base URL of an OpenAI-compatible API (requests go to <URL>/chat/completions).
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
    /// Prompt template id, 1-10 [default: 1].
    #[arg(long)]
    pub template: Option<u8>,
    /// Model used for both generations [default: gpt-4o].
    #[arg(long, value_name = "NAME")]
    pub generator_model: Option<String>,
    /// Model used as the filter judge [default: gpt-4o].
    #[arg(long, value_name = "NAME")]
    pub judge_model: Option<String>,
    /// Maximum in-flight requests [default: 4].
    #[arg(long, value_name = "N")]
    pub concurrency: Option<usize>,
    /// Retries per request after the first attempt [default: 4].
    #[arg(long, value_name = "N")]
    pub max_retries: Option<u32>,
    /// Base backoff delay in milliseconds [default: 1000].
    #[arg(long, value_name = "MS")]
    pub retry_base_delay_ms: Option<u64>,
    /// Per-request timeout in seconds [default: 60].
    #[arg(long, value_name = "SECS")]
    pub timeout_secs: Option<u64>,
    /// Generation sampling temperature [default: 0.5].
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Judge sampling temperature [default: 0].
    #[arg(long)]
    pub judge_temperature: Option<f64>,
    /// Completion token cap sent with every request.
    #[arg(long, value_name = "N")]
    pub max_tokens: Option<u32>,
    /// Generate/filter rounds per question before giving up [default: 1].
    #[arg(long, value_name = "N")]
    pub candidates: Option<u32>,
    /// Environment variable holding the API key [default: HALLUDETECT_API_KEY].
    #[arg(long, value_name = "VAR")]
    pub api_key_env: Option<String>,
}

layered!(AugmentArgs {
    questions,
    out,
    audit,
    journal,
    endpoint,
    template,
    generator_model,
    judge_model,
    concurrency,
    max_retries,
    retry_base_delay_ms,
    timeout_secs,
    temperature,
    judge_temperature,
    max_tokens,
    candidates,
    api_key_env,
});

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FitArgs {
    /// EMB1 embeddings of truthful answers.
    #[arg(long, value_name = "FILE")]
    pub truthful: Option<PathBuf>,
    /// EMB1 embeddings of hallucinated answers.
    #[arg(long, value_name = "FILE")]
    pub hallucinated: Option<PathBuf>,
    /// Output detector (CMD1 JSON).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Retained principal directions per class [default: 5].
    #[arg(long)]
    pub k: Option<usize>,
    /// Decision threshold; delta >= tau is hallucinated [default: 0.15].
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    /// Variance floor relative to the top eigenvalue [default: 1e-6].
    #[arg(long, value_name = "REL")]
    pub epsilon_rel: Option<f64>,
    /// Handling of the residual outside the retained basis [default: ignore].
    #[arg(long, value_name = "MODE")]
    pub residual_mode: Option<ResidualMode>,
}

layered!(FitArgs {
    truthful,
    hallucinated,
    out,
    k,
    tau,
    epsilon_rel,
    residual_mode
});

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ScoreArgs {
    /// Detector written by `fit`.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// EMB1 embeddings to score.
    #[arg(long, value_name = "FILE")]
    pub embeddings: Option<PathBuf>,
    /// Output scores CSV (id,delta,md_true,md_hal,verdict).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Text file with one id per embedding row.
    #[arg(long, value_name = "FILE")]
    pub ids: Option<PathBuf>,
    /// Dataset JSONL supplying ids; rows follow embedding_index when set.
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
    /// Only take ids of this label from --dataset.
    #[arg(long)]
    pub label: Option<Label>,
    /// Override the threshold stored in the detector.
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
}

layered!(ScoreArgs {
    model,
    embeddings,
    out,
    ids,
    dataset,
    label,
    tau
});

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EvalArgs {
    /// Scores CSV files written by `score`; repeat or comma-separate.
    #[arg(long, value_name = "FILE", value_delimiter = ',', num_args = 1..)]
    pub scores: Option<Vec<PathBuf>>,
    /// Dataset JSONL holding the label of every scored id.
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
    /// Output report JSON.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// ROC points CSV.
    #[arg(long, value_name = "FILE")]
    pub roc_csv: Option<PathBuf>,
    /// Per-class score histogram CSV.
    #[arg(long, value_name = "FILE")]
    pub hist_csv: Option<PathBuf>,
    /// Threshold for the reported accuracy [default: 0.15].
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    /// Histogram bins [default: 20].
    #[arg(long)]
    pub bins: Option<usize>,
    /// Unlabeled examples are truthful iff similarity exceeds this [default: 0.5].
    #[arg(long, value_name = "T")]
    pub similarity_threshold: Option<f64>,
}

layered!(EvalArgs {
    scores,
    dataset,
    out,
    roc_csv,
    hist_csv,
    tau,
    bins,
    similarity_threshold
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    K,
    Tau,
    Layer,
    Template,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SweepArgs {
    /// Quantity to vary.
    #[arg(long, value_enum)]
    pub axis: Option<Axis>,
    /// Fixture manifest JSON; layer and template sweeps read one fixture per setting.
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    /// Fixture to use for k and tau sweeps when the manifest lists several.
    #[arg(long, value_name = "NAME")]
    pub fixture: Option<String>,
    /// Settings for k and tau sweeps, comma-separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub values: Option<Vec<f64>>,
    /// Output sweep JSON.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Output sweep CSV.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    /// Retained principal directions per class [default: 5].
    #[arg(long)]
    pub k: Option<usize>,
    /// Decision threshold; delta >= tau is hallucinated [default: 0.15].
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    /// Variance floor relative to the top eigenvalue [default: 1e-6].
    #[arg(long, value_name = "REL")]
    pub epsilon_rel: Option<f64>,
    /// Handling of the residual outside the retained basis [default: ignore].
    #[arg(long, value_name = "MODE")]
    pub residual_mode: Option<ResidualMode>,
}

layered!(SweepArgs {
    axis,
    manifest,
    fixture,
    values,
    out,
    csv,
    k,
    tau,
    epsilon_rel,
    residual_mode
});

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TransferArgs {
    /// Fixture manifest JSON naming one fixture per dataset.
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    /// Output grid JSON.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Output grid CSV (rows are training sets, columns test sets).
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    /// Retained principal directions per class [default: 5].
    #[arg(long)]
    pub k: Option<usize>,
    /// Decision threshold; delta >= tau is hallucinated [default: 0.15].
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    /// Variance floor relative to the top eigenvalue [default: 1e-6].
    #[arg(long, value_name = "REL")]
    pub epsilon_rel: Option<f64>,
    /// Handling of the residual outside the retained basis [default: ignore].
    #[arg(long, value_name = "MODE")]
    pub residual_mode: Option<ResidualMode>,
}

layered!(TransferArgs {
    manifest,
    out,
    csv,
    k,
    tau,
    epsilon_rel,
    residual_mode
});

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SynthArgs {
    /// Directory receiving the EMB1 files and manifest.json.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Fixture name; files go to <DIR>/<NAME>/ [default: synthetic].
    #[arg(long)]
    pub name: Option<String>,
    /// Embedding dimension [default: 64].
    #[arg(long)]
    pub dim: Option<usize>,
    /// Training rows per class [default: 500].
    #[arg(long, value_name = "N")]
    pub n_train: Option<usize>,
    /// Test rows per class [default: 200].
    #[arg(long, value_name = "N")]
    pub n_test: Option<usize>,
    /// Distance between class means in noise standard deviations [default: 6].
    #[arg(long)]
    pub separation: Option<f64>,
    /// High-variance directions shared by both classes [default: 5].
    #[arg(long, value_name = "N")]
    pub spike_dims: Option<usize>,
    /// Standard deviation along the high-variance directions [default: 2].
    #[arg(long)]
    pub spike_scale: Option<f64>,
    /// Shift applied to both class means [default: 0].
    #[arg(long, allow_negative_numbers = true)]
    pub offset: Option<f64>,
    /// Seed of the random rotation orienting the fixture [default: 0].
    #[arg(long)]
    pub basis_seed: Option<u64>,
}

layered!(SynthArgs {
    out_dir,
    name,
    dim,
    n_train,
    n_test,
    separation,
    spike_dims,
    spike_scale,
    offset,
    basis_seed
});
