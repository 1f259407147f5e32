use std::sync::Arc;
use std::time::Duration;

use halludetect_core::augment::{build_dataset, read_questions, write_audit, AugmentationConfig};
use halludetect_core::llm::{Credentials, HttpClient, LlmClient, DEFAULT_TIMEOUT};
use serde_json::json;

use crate::args::AugmentArgs;
use crate::config::{config_err, existing, require, CliError, CliResult, RunMeta};
use crate::output::{check_writable, write_atomic, write_json};

const DEFAULT_KEY_VAR: &str = "HALLUDETECT_API_KEY";

pub fn run(args: AugmentArgs, seed: u64) -> CliResult<()> {
    let questions_path = existing(args.questions, "questions")?;
    let out = require(args.out, "out")?;
    let endpoint = require(args.endpoint, "endpoint")?;
    for p in [Some(&out), args.audit.as_ref(), args.journal.as_ref()]
        .into_iter()
        .flatten()
    {
        check_writable(p)?;
    }

    let d = AugmentationConfig::default();
    let cfg = AugmentationConfig {
        template_id: args.template.unwrap_or(d.template_id),
        generator_model: args.generator_model.unwrap_or(d.generator_model),
        judge_model: args.judge_model.unwrap_or(d.judge_model),
        max_retries: args.max_retries.unwrap_or(d.max_retries),
        concurrency: args.concurrency.unwrap_or(d.concurrency),
        temperature: args.temperature.unwrap_or(d.temperature),
        judge_temperature: args.judge_temperature.unwrap_or(d.judge_temperature),
        max_tokens: args.max_tokens.or(d.max_tokens),
        candidates_per_question: args.candidates.unwrap_or(d.candidates_per_question),
        retry_base_delay: args
            .retry_base_delay_ms
            .map(Duration::from_millis)
            .unwrap_or(d.retry_base_delay),
    };
    cfg.validate()?;
    let timeout = args
        .timeout_secs
        .map(Duration::from_secs)
        .unwrap_or(DEFAULT_TIMEOUT);
    let key_var = args
        .api_key_env
        .unwrap_or_else(|| DEFAULT_KEY_VAR.to_string());

    let questions = read_questions(&questions_path)?;
    if questions.is_empty() {
        return Err(config_err(format!(
            "{} contains no questions",
            questions_path.display()
        )));
    }
    let credentials = Credentials::from_env(&key_var);
    if credentials.is_none() {
        tracing::warn!("{key_var} is not set; sending requests without authorization");
    }
    let client: Arc<dyn LlmClient> = Arc::new(
        HttpClient::with_timeout(&endpoint, credentials, timeout)
            .map_err(|e| CliError::Transport(e.to_string()))?
            .with_concurrency(cfg.concurrency),
    );

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Output(format!("cannot start async runtime: {e}")))?;
    let outcome = runtime.block_on(build_dataset(
        &cfg,
        &questions,
        client,
        args.journal.as_deref(),
    ))?;

    let meta = RunMeta::new(
        "augment",
        seed,
        &json!({
            "questions": questions_path,
            "endpoint": endpoint,
            "template": cfg.template_id,
            "generator_model": cfg.generator_model,
            "judge_model": cfg.judge_model,
            "max_retries": cfg.max_retries,
            "temperature": cfg.temperature,
            "judge_temperature": cfg.judge_temperature,
            "max_tokens": cfg.max_tokens,
            "candidates": cfg.candidates_per_question,
        }),
    );
    let mut dataset = outcome.dataset;
    dataset.meta.run = Some(meta.to_value());
    write_atomic(&out, |w| {
        dataset
            .write_jsonl(w)
            .map_err(|e| CliError::Output(format!("cannot write {}: {e}", out.display())))
    })?;
    if let Some(audit) = &args.audit {
        write_atomic(audit, |w| {
            write_audit(&outcome.records, w)
                .map_err(|e| CliError::Output(format!("cannot write {}: {e}", audit.display())))
        })?;
        write_json(&crate::output::sidecar_path(audit), &meta)?;
    }

    let s = &outcome.stats;
    println!(
        "passed {}, rejected {}, failed {} ({} transport), resumed {}; wrote {} examples to {}",
        s.passed,
        s.rejected,
        s.failed,
        s.transport_failures,
        s.resumed,
        dataset.len(),
        out.display()
    );
    for (id, err) in &outcome.failures {
        eprintln!("question {id}: {err}");
    }
    if dataset.is_empty() {
        if s.transport_failures > 0 {
            return Err(CliError::Transport(format!(
                "no examples produced; {} questions failed to reach the endpoint",
                s.transport_failures
            )));
        }
        eprintln!("warning: every pair was filtered out; the dataset is empty");
    } else if s.failed > 0 {
        eprintln!("warning: {} questions failed and were excluded", s.failed);
    }
    Ok(())
}
