//! Prompt-guided generation of paired truthful/hallucinated answers, the
//! judge-based filter, and dataset assembly with an on-disk journal.

mod journal;
mod templates;

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use tokio::task::JoinSet;

use crate::error::{Error, Result};
use crate::llm::{complete_with_retry, ChatMessage, ChatRequest, LlmClient, LlmError, RetryPolicy};
use crate::tensor_io::{Dataset, DatasetMeta, Label, LabeledExample};

pub use journal::{Journal, JournalEntry, JournalStatus};
pub use templates::{
    render_filter_prompt, render_generation_prompt, render_judge_prompt, template, GenerationKind,
    PromptTemplate, JUDGE_PICKS_FIRST, JUDGE_PICKS_SECOND, TEMPLATES,
};

pub const DEFAULT_TEMPERATURE: f64 = 0.5;
pub const UNPARSEABLE_JUDGE: &str = "unparseable-judge";
pub const JUDGE_PREFERRED_HALLUCINATION: &str = "judge-preferred-hallucination";

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationConfig {
    pub template_id: u8,
    pub generator_model: String,
    pub judge_model: String,
    /// Retries after the first attempt, per request.
    pub max_retries: u32,
    pub concurrency: usize,
    pub temperature: f64,
    pub judge_temperature: f64,
    pub max_tokens: Option<u32>,
    /// Generate/filter rounds per question before giving up on it.
    pub candidates_per_question: u32,
    pub retry_base_delay: Duration,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            template_id: 1,
            generator_model: "gpt-4o".into(),
            judge_model: "gpt-4o".into(),
            max_retries: 4,
            concurrency: 4,
            temperature: DEFAULT_TEMPERATURE,
            judge_temperature: 0.0,
            max_tokens: None,
            candidates_per_question: 1,
            retry_base_delay: Duration::from_secs(1),
        }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<()> {
        template(self.template_id)?;
        if self.concurrency < 1 {
            return Err(Error::Parameter("concurrency must be at least 1".into()));
        }
        if self.candidates_per_question < 1 {
            return Err(Error::Parameter(
                "candidates per question must be at least 1".into(),
            ));
        }
        if !(self.temperature >= 0.0 && self.judge_temperature >= 0.0) {
            return Err(Error::Parameter("temperatures must be non-negative".into()));
        }
        Ok(())
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_attempts: self.max_retries + 1,
            base_delay: self.retry_base_delay,
            ..RetryPolicy::default()
        }
    }

    fn request(&self, model: &str, messages: Vec<ChatMessage>, temperature: f64) -> ChatRequest {
        ChatRequest {
            model: model.to_string(),
            messages,
            temperature,
            max_tokens: self.max_tokens,
        }
    }
}

/// One input row: `{id, question, reference_answer}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionItem {
    pub id: String,
    pub question: String,
    pub reference_answer: String,
}

pub fn read_questions(path: impl AsRef<Path>) -> Result<Vec<QuestionItem>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::file(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item: QuestionItem = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        if !seen.insert(item.id.clone()) {
            return Err(Error::Parameter(format!(
                "duplicate question id {:?}",
                item.id
            )));
        }
        out.push(item);
    }
    Ok(out)
}

/// Prompt and verbatim reply of one call, kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawExchange {
    pub stage: String,
    pub prompt: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationRecord {
    pub question_id: String,
    pub question: String,
    pub reference_answer: String,
    pub template_id: u8,
    pub truthful_answer: String,
    pub hallucinated_answer: String,
    /// Unset until the judge has run.
    pub filter_passed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_reason: Option<String>,
    pub truth_attempts: u32,
    pub hallucination_attempts: u32,
    #[serde(default)]
    pub filter_attempts: u32,
    pub raw_responses: Vec<RawExchange>,
}

impl AugmentationRecord {
    pub fn attempt_count(&self) -> u32 {
        self.truth_attempts + self.hallucination_attempts + self.filter_attempts
    }
}

/// Trims the reply and removes a leading echo of `cue`. The result is
/// always a substring of `raw`.
pub fn strip_cue<'a>(raw: &'a str, cue: &str) -> &'a str {
    let t = raw.trim();
    t.strip_prefix(cue).map(str::trim).unwrap_or(t)
}

async fn generate_one(
    cfg: &AugmentationConfig,
    kind: GenerationKind,
    item: &QuestionItem,
    client: &dyn LlmClient,
) -> Result<(String, u32, RawExchange)> {
    let tpl = template(cfg.template_id)?;
    let messages =
        render_generation_prompt(kind, tpl, &item.question, Some(&item.reference_answer))?;
    let prompt = messages[0].content.clone();
    let req = cfg.request(&cfg.generator_model, messages, cfg.temperature);
    let done = complete_with_retry(client, &req, &cfg.retry_policy())
        .await
        .map_err(Error::Generation)?;
    let answer = strip_cue(&done.response.content, kind.cue()).to_string();
    if answer.is_empty() {
        return Err(Error::EmptyGeneration(kind.as_str()));
    }
    let raw = RawExchange {
        stage: kind.as_str().to_string(),
        prompt,
        response: done.response.content,
    };
    Ok((answer, done.attempts, raw))
}

/// Issues the truth and hallucination generations for one question.
pub async fn generate_pair(
    cfg: &AugmentationConfig,
    item: &QuestionItem,
    client: &dyn LlmClient,
) -> Result<AugmentationRecord> {
    if item.reference_answer.trim().is_empty() {
        return Err(Error::Parameter(format!(
            "question {:?} has no reference answer",
            item.id
        )));
    }
    let (truthful_answer, truth_attempts, raw_t) =
        generate_one(cfg, GenerationKind::Truth, item, client).await?;
    let (hallucinated_answer, hallucination_attempts, raw_h) =
        generate_one(cfg, GenerationKind::Hallucination, item, client).await?;
    Ok(AugmentationRecord {
        question_id: item.id.clone(),
        question: item.question.clone(),
        reference_answer: item.reference_answer.clone(),
        template_id: cfg.template_id,
        truthful_answer,
        hallucinated_answer,
        filter_passed: None,
        filter_reason: None,
        truth_attempts,
        hallucination_attempts,
        filter_attempts: 0,
        raw_responses: vec![raw_t, raw_h],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum JudgeChoice {
    First,
    Second,
}

fn parse_judge_choice(reply: &str) -> Option<JudgeChoice> {
    let first = reply.contains(JUDGE_PICKS_FIRST.trim_end_matches('.'));
    let second = reply.contains(JUDGE_PICKS_SECOND.trim_end_matches('.'));
    match (first, second) {
        (true, false) => Some(JudgeChoice::First),
        (false, true) => Some(JudgeChoice::Second),
        _ => None,
    }
}

/// Asks the judge to compare the truthful answer (slot 1) against the
/// hallucinated one (slot 2). Passes iff slot 1 wins. An unparseable
/// reply is retried once, then the pair fails as `unparseable-judge`.
pub async fn filter_pair(
    cfg: &AugmentationConfig,
    mut record: AugmentationRecord,
    client: &dyn LlmClient,
) -> Result<AugmentationRecord> {
    if record.truthful_answer.trim().is_empty() || record.hallucinated_answer.trim().is_empty() {
        return Err(Error::State(format!(
            "record {:?} lacks an answer to judge",
            record.question_id
        )));
    }
    let messages = render_filter_prompt(&record.truthful_answer, &record.hallucinated_answer)?;
    let prompt = messages[0].content.clone();
    let req = cfg.request(&cfg.judge_model, messages, cfg.judge_temperature);

    for _ in 0..2 {
        let done = complete_with_retry(client, &req, &cfg.retry_policy())
            .await
            .map_err(Error::Filter)?;
        record.filter_attempts += done.attempts;
        let choice = parse_judge_choice(&done.response.content);
        record.raw_responses.push(RawExchange {
            stage: "filter".into(),
            prompt: prompt.clone(),
            response: done.response.content,
        });
        match choice {
            Some(JudgeChoice::First) => {
                record.filter_passed = Some(true);
                record.filter_reason = None;
                return Ok(record);
            }
            Some(JudgeChoice::Second) => {
                record.filter_passed = Some(false);
                record.filter_reason = Some(JUDGE_PREFERRED_HALLUCINATION.into());
                return Ok(record);
            }
            None => continue,
        }
    }
    record.filter_passed = Some(false);
    record.filter_reason = Some(UNPARSEABLE_JUDGE.into());
    Ok(record)
}

/// Generates and filters up to `candidates_per_question` pairs, stopping at
/// the first that passes.
async fn process_question(
    cfg: &AugmentationConfig,
    item: &QuestionItem,
    client: &dyn LlmClient,
) -> JournalEntry {
    let mut spent = 0;
    let mut last = None;
    for _ in 0..cfg.candidates_per_question {
        let outcome = match generate_pair(cfg, item, client).await {
            Ok(rec) => filter_pair(cfg, rec, client).await,
            Err(e) => Err(e),
        };
        match outcome {
            Ok(rec) => {
                spent += rec.attempt_count();
                let passed = rec.filter_passed == Some(true);
                last = Some(rec);
                if passed {
                    break;
                }
            }
            Err(e) => {
                return JournalEntry {
                    question_id: item.id.clone(),
                    status: JournalStatus::Failed,
                    attempt_count: spent,
                    transport_failure: e.is_transport(),
                    error: Some(e.to_string()),
                    record: last,
                }
            }
        }
    }
    let rec = last.expect("at least one candidate");
    JournalEntry {
        question_id: item.id.clone(),
        status: if rec.filter_passed == Some(true) {
            JournalStatus::Passed
        } else {
            JournalStatus::Rejected
        },
        attempt_count: spent,
        transport_failure: false,
        error: None,
        record: Some(rec),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub passed: usize,
    pub rejected: usize,
    pub failed: usize,
    pub transport_failures: usize,
    /// Questions answered from the journal without any client call.
    pub resumed: usize,
}

#[derive(Debug)]
pub struct BuildOutcome {
    pub dataset: Dataset,
    /// Judged records (passed and rejected), sorted by question id.
    pub records: Vec<AugmentationRecord>,
    /// (question id, error) for questions that could not be processed.
    pub failures: Vec<(String, String)>,
    pub stats: BuildStats,
}

/// Runs generation and filtering for every question and assembles the
/// labeled dataset from the pairs that pass.
///
/// Each passing question contributes one truthful and one hallucinated
/// example. `embedding_index` is pre-assigned as the row within the
/// example's label class, in question-id order. Questions already
/// finished in `journal` are not re-queried.
pub async fn build_dataset(
    cfg: &AugmentationConfig,
    questions: &[QuestionItem],
    client: Arc<dyn LlmClient>,
    journal: Option<&Path>,
) -> Result<BuildOutcome> {
    cfg.validate()?;
    if questions.is_empty() {
        return Err(Error::Parameter("no questions to augment".into()));
    }
    let mut seen = HashSet::new();
    for q in questions {
        if !seen.insert(q.id.as_str()) {
            return Err(Error::Parameter(format!(
                "duplicate question id {:?}",
                q.id
            )));
        }
    }

    let mut journal = match journal {
        Some(p) => Some(Journal::open(p)?),
        None => None,
    };
    let mut results: BTreeMap<String, JournalEntry> = BTreeMap::new();
    let mut stats = BuildStats::default();
    let mut pending = Vec::new();
    for q in questions {
        match journal.as_ref().and_then(|j| j.finished(&q.id)) {
            Some(entry) => {
                stats.resumed += 1;
                results.insert(q.id.clone(), entry.clone());
            }
            None => pending.push(q.clone()),
        }
    }
    pending.sort_by(|a, b| a.id.cmp(&b.id));

    let cfg = Arc::new(cfg.clone());
    let limiter = Arc::new(Semaphore::new(cfg.concurrency));
    let mut tasks = JoinSet::new();
    for item in pending {
        let cfg = cfg.clone();
        let client = client.clone();
        let limiter = limiter.clone();
        tasks.spawn(async move {
            let _permit = limiter
                .acquire_owned()
                .await
                .expect("semaphore never closed");
            process_question(&cfg, &item, client.as_ref()).await
        });
    }
    while let Some(joined) = tasks.join_next().await {
        let entry = joined.map_err(|e| Error::State(format!("augmentation task panicked: {e}")))?;
        if let Some(j) = journal.as_mut() {
            j.append(&entry)?;
        }
        results.insert(entry.question_id.clone(), entry);
    }

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut examples = Vec::new();
    let (mut n_true, mut n_hal) = (0, 0);
    for (id, entry) in results {
        match entry.status {
            JournalStatus::Passed => {
                stats.passed += 1;
                let rec = entry.record.expect("passed entries carry a record");
                let mut t = LabeledExample::new(
                    format!("{id}:truthful"),
                    rec.question.clone(),
                    rec.truthful_answer.clone(),
                    Label::Truthful,
                );
                t.embedding_index = Some(n_true);
                n_true += 1;
                let mut h = LabeledExample::new(
                    format!("{id}:hallucinated"),
                    rec.question.clone(),
                    rec.hallucinated_answer.clone(),
                    Label::Hallucinated,
                );
                h.embedding_index = Some(n_hal);
                n_hal += 1;
                examples.push(t);
                examples.push(h);
                records.push(rec);
            }
            JournalStatus::Rejected => {
                stats.rejected += 1;
                let rec = entry.record.expect("rejected entries carry a record");
                tracing::info!(question = %id, reason = ?rec.filter_reason, "pair filtered out");
                records.push(rec);
            }
            JournalStatus::Failed => {
                stats.failed += 1;
                if entry.transport_failure {
                    stats.transport_failures += 1;
                }
                let err = entry.error.unwrap_or_default();
                tracing::warn!(question = %id, error = %err, "question failed");
                failures.push((id, err));
            }
        }
    }
    if examples.is_empty() {
        tracing::warn!("augmentation produced an empty dataset");
    }

    let meta = DatasetMeta {
        source: Some("augmentation".into()),
        model: Some(cfg.generator_model.clone()),
        label_source: Some("augmentation".into()),
        ..DatasetMeta::default()
    };
    Ok(BuildOutcome {
        dataset: Dataset::new(examples, meta)?,
        records,
        failures,
        stats,
    })
}

/// One JSONL line per exchange: `{question_id, stage, prompt, response}`.
pub fn write_audit<W: Write>(records: &[AugmentationRecord], mut out: W) -> Result<()> {
    let io = |source| Error::Io { offset: 0, source };
    for rec in records {
        for ex in &rec.raw_responses {
            let line = serde_json::json!({
                "question_id": rec.question_id,
                "stage": ex.stage,
                "prompt": ex.prompt,
                "response": ex.response,
            });
            writeln!(out, "{line}").map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

/// Carries a transport error out of a record-level failure, if that is what it was.
pub fn transport_cause(e: &Error) -> Option<&LlmError> {
    match e {
        Error::Generation(l) | Error::Filter(l) | Error::Llm(l) => Some(l),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cue_strip_only_removes_leading_echo() {
        assert_eq!(
            strip_cue("The Answer is: Paris.", "The Answer is:"),
            "Paris."
        );
        assert_eq!(
            strip_cue("  Paris. The Answer is: x", "The Answer is:"),
            "Paris. The Answer is: x"
        );
        assert_eq!(strip_cue("Paris.\n", "The Answer is:"), "Paris.");
        let raw = "The Hallucinated Answer is:  Lyon ";
        let s = strip_cue(raw, "The Hallucinated Answer is:");
        assert_eq!(s, "Lyon");
        assert!(raw.contains(s));
    }

    #[test]
    fn judge_sentinels() {
        assert_eq!(
            parse_judge_choice("The best answer is Answer 1."),
            Some(JudgeChoice::First)
        );
        assert_eq!(
            parse_judge_choice("The best answer is Answer 2"),
            Some(JudgeChoice::Second)
        );
        assert_eq!(parse_judge_choice("Both are fine"), None);
        assert_eq!(
            parse_judge_choice("The best answer is Answer 1. The best answer is Answer 2."),
            None
        );
    }

    #[test]
    fn config_validation() {
        assert!(AugmentationConfig::default().validate().is_ok());
        let bad = AugmentationConfig {
            template_id: 11,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = AugmentationConfig {
            concurrency: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let p = AugmentationConfig {
            max_retries: 3,
            ..Default::default()
        }
        .retry_policy();
        assert_eq!(p.max_attempts, 4);
    }
}
