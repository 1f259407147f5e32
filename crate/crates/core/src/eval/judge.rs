use crate::augment::render_judge_prompt;
use crate::error::{Error, Result};
use crate::llm::{complete_with_retry, ChatRequest, LlmClient, RetryPolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct JudgeConfig {
    pub model: String,
    pub temperature: f64,
    pub retry: RetryPolicy,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        Self {
            model: "gpt-4o".into(),
            temperature: 0.0,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JudgeVerdict {
    /// The judge answered "Yes".
    pub truthful: bool,
    pub justification: String,
    pub raw: String,
}

/// Reads the `Answer: Yes|No` line (case-insensitive, optional leading
/// dash) and the optional `Justification:` line.
pub fn parse_judge_reply(reply: &str) -> Option<(bool, String)> {
    let mut verdict = None;
    let mut justification = String::new();
    for line in reply.lines() {
        let line = line.trim().trim_start_matches(['-', '*']).trim();
        let lower = line.to_ascii_lowercase();
        if let Some(rest) = lower.strip_prefix("answer:") {
            if verdict.is_none() {
                let word: String = rest
                    .trim()
                    .chars()
                    .take_while(|c| c.is_ascii_alphabetic())
                    .collect();
                verdict = match word.as_str() {
                    "yes" => Some(true),
                    "no" => Some(false),
                    _ => None,
                };
            }
        } else if lower.starts_with("justification:") {
            justification = line["justification:".len()..].trim().to_string();
        }
    }
    verdict.map(|v| (v, justification))
}

/// Asks the judge whether `generated` agrees with any gold answer. An
/// unparseable reply is retried once.
pub async fn judge_truthfulness(
    question: &str,
    gold_answers: &[String],
    generated: &str,
    client: &dyn LlmClient,
    cfg: &JudgeConfig,
) -> Result<JudgeVerdict> {
    let messages = render_judge_prompt(question, gold_answers, generated)?;
    let req = ChatRequest::new(cfg.model.clone(), messages, cfg.temperature);
    let mut last = String::new();
    for _ in 0..2 {
        let done = complete_with_retry(client, &req, &cfg.retry).await?;
        if let Some((truthful, justification)) = parse_judge_reply(&done.response.content) {
            return Ok(JudgeVerdict {
                truthful,
                justification,
                raw: done.response.content,
            });
        }
        last = done.response.content;
    }
    Err(Error::JudgeParse(last))
}
