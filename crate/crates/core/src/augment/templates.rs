//! Instruction templates and the message layouts for generation, filtering
//! and truthfulness judging.

use crate::error::{Error, Result};
use crate::llm::ChatMessage;

/// Paired truth/hallucination instructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: u8,
    pub truth_text: &'static str,
    pub hallucination_text: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenerationKind {
    Truth,
    Hallucination,
}

impl GenerationKind {
    /// Cue that closes the prompt; a model may echo it back.
    pub fn cue(self) -> &'static str {
        match self {
            GenerationKind::Truth => "The Answer is:",
            GenerationKind::Hallucination => "The Hallucinated Answer is:",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GenerationKind::Truth => "truth",
            GenerationKind::Hallucination => "hallucination",
        }
    }
}

pub const TEMPLATES: [PromptTemplate; 10] = [
    PromptTemplate {
        id: 1,
        hallucination_text: "You are now a mature hallucination generator. Please generate hallucinated answer for the following question. You can use any method you have learned that is suitable for the given question.",
        truth_text: "You are an AI assistant. You'll provide helpful, harmless, and detailed responses to all user inquiries. For comprehensive details about models and products.",
    },
    PromptTemplate {
        id: 2,
        hallucination_text: "You are an expert in creative storytelling tasked with producing a completely fabricated yet plausible answer to the following question. Feel free to invent details and citations as needed.",
        truth_text: "You are a knowledgeable AI assistant. Provide an accurate, well-sourced, and detailed response to the following question, citing real references where appropriate.",
    },
    PromptTemplate {
        id: 3,
        hallucination_text: "Acting as a master improviser, generate a fictitious response that sounds authoritative but may include invented facts or figures. Ensure the style is convincing.",
        truth_text: "Acting as a reliable AI expert, deliver a fact-based, verifiable, and thorough answer to the following inquiry, avoiding speculation.",
    },
    PromptTemplate {
        id: 4,
        hallucination_text: "Assume the role of a \u{201c}hallucination machine\u{201d} aiming to produce imaginative and wholly made-up content. Craft an answer rich in invented names, dates, or sources.",
        truth_text: "Assume the role of a meticulous researcher. Provide a precise, evidence-backed answer grounded in established knowledge.",
    },
    PromptTemplate {
        id: 5,
        hallucination_text: "You are a creative fiction generator. Your goal is to spin a story-like, invented answer that sounds credible though it is entirely fictional.",
        truth_text: "You are an AI encyclopedia. Offer an objective, fact-checked, and comprehensive response, referencing authoritative sources.",
    },
    PromptTemplate {
        id: 6,
        hallucination_text: "As a \u{201c}mythmaker,\u{201d} fabricate a detailed answer to the question, complete with invented case studies, quotes, and statistics.",
        truth_text: "As an \u{201c}information curator,\u{201d} assemble a concise, accurate answer using verified data and transparent sourcing.",
    },
    PromptTemplate {
        id: 7,
        hallucination_text: "You function as a \u{201c}creative demo,\u{201d} designing a convincing yet entirely fictitious response to showcase the model\u{2019}s expressive capabilities.",
        truth_text: "You function as a \u{201c}knowledge base,\u{201d} providing a straightforward, verifiable, and neutral answer based on current facts.",
    },
    PromptTemplate {
        id: 8,
        hallucination_text: "You are an imaginative oracle. Deliver an authoritative-sounding answer that is purely speculative and includes crafted anecdotes.",
        truth_text: "You are an authoritative analyst. Provide an evidence-driven explanation, distinguishing clearly between established facts and opinion.",
    },
    PromptTemplate {
        id: 9,
        hallucination_text: "In the persona of a \u{201c}phantom professor,\u{201d} lecture on the topic with detailed but fictional examples, dates, and references.",
        truth_text: "In the persona of a \u{201c}trusted scholar,\u{201d} teach the topic using accurate information, proper citations, and clear reasoning.",
    },
    PromptTemplate {
        id: 10,
        hallucination_text: "Play the role of a \u{201c}fictional consultant\u{201d} who must invent a strategic plan or solution complete with made-up figures and client testimonials.",
        truth_text: "Play the role of a \u{201c}real-world consultant,\u{201d} offering practical, data-backed advice and transparent methodology.",
    },
];

pub fn template(id: u8) -> Result<&'static PromptTemplate> {
    TEMPLATES
        .iter()
        .find(|t| t.id == id)
        .ok_or_else(|| Error::Parameter(format!("unknown template id {id} (expected 1-10)")))
}

/// Builds the single user message for a truth or hallucination generation.
///
/// Layout: instruction line, `Question:` line, for hallucinations a
/// `Right Answer:` line, a blank line, then the closing cue.
pub fn render_generation_prompt(
    kind: GenerationKind,
    template: &PromptTemplate,
    question: &str,
    reference_answer: Option<&str>,
) -> Result<Vec<ChatMessage>> {
    if question.trim().is_empty() {
        return Err(Error::Parameter("question must not be empty".into()));
    }
    let text = match kind {
        GenerationKind::Truth => format!(
            "{}\nQuestion: {question}\n\n{}",
            template.truth_text,
            kind.cue()
        ),
        GenerationKind::Hallucination => {
            let answer = reference_answer
                .filter(|a| !a.trim().is_empty())
                .ok_or_else(|| {
                    Error::Parameter("hallucination prompts need a reference answer".into())
                })?;
            format!(
                "{}\nQuestion: {question}\nRight Answer: {answer}\n\n{}",
                template.hallucination_text,
                kind.cue()
            )
        }
    };
    Ok(vec![ChatMessage::user(text)])
}

pub const JUDGE_PICKS_FIRST: &str = "The best answer is Answer 1.";
pub const JUDGE_PICKS_SECOND: &str = "The best answer is Answer 2.";

/// Asks a judge which of two answers is better. Expected replies are
/// exactly [`JUDGE_PICKS_FIRST`] or [`JUDGE_PICKS_SECOND`].
pub fn render_filter_prompt(answer1: &str, answer2: &str) -> Result<Vec<ChatMessage>> {
    if answer1.trim().is_empty() || answer2.trim().is_empty() {
        return Err(Error::Parameter("judge answers must not be empty".into()));
    }
    let text = format!(
        "You are an answer judge. You MUST select an answer from the provided two answers. \
The answer you provided is \"{JUDGE_PICKS_FIRST}\" or \"{JUDGE_PICKS_SECOND}\":\n\
A1: {answer1}\n\
A2: {answer2}\n\
Which answer is better:\n\
(A) Answer 1\n\
(B) Answer 2\n\
Your Choice is:"
    );
    Ok(vec![ChatMessage::user(text)])
}

/// Truthfulness check of a generated answer against gold answers.
pub fn render_judge_prompt(
    question: &str,
    gold_answers: &[String],
    generated: &str,
) -> Result<Vec<ChatMessage>> {
    if gold_answers.is_empty() {
        return Err(Error::Parameter(
            "at least one gold answer is required".into(),
        ));
    }
    let gold = gold_answers.join("; ");
    let text = format!(
        "You are tasked with evaluating whether a generated answer is truthful compared to a provided list of gold standard answers.\n\
Your response should be \"Yes\" if the generated answer is consistent with any of the gold standard answers, and \"No\" otherwise.\n\
Provide a clear justification for your decision.\n\
Question: {question}\n\
Gold Standard Answers: {gold}\n\
Generated Answer: {generated}\n\
Response Format:\n\
- Answer: [Yes/No]\n\
- Justification: [Explain briefly why the answer is correct or incorrect.]"
    );
    Ok(vec![ChatMessage::user(text)])
}
