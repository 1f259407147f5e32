use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Pooling;
use crate::error::{Error, Result};

const META_PREFIX: &str = "#meta ";

/// Ground-truth class of an answer. Hallucinated is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Truthful,
    Hallucinated,
    Unlabeled,
}

impl Label {
    /// -1 for truthful, +1 for hallucinated.
    pub fn sign(self) -> Option<i8> {
        match self {
            Label::Truthful => Some(-1),
            Label::Hallucinated => Some(1),
            Label::Unlabeled => None,
        }
    }

    pub fn is_hallucinated(self) -> Option<bool> {
        self.sign().map(|s| s > 0)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Truthful => "truthful",
            Label::Hallucinated => "hallucinated",
            Label::Unlabeled => "unlabeled",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truthful" => Ok(Label::Truthful),
            "hallucinated" => Ok(Label::Hallucinated),
            "unlabeled" => Ok(Label::Unlabeled),
            other => Err(Error::Parse(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_index: Option<usize>,
    /// Precomputed similarity to the reference answer (e.g. BLEURT), used
    /// to derive a label when none was assigned.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
}

impl LabeledExample {
    pub fn new(
        id: impl Into<String>,
        question: impl Into<String>,
        answer: impl Into<String>,
        label: Label,
    ) -> Self {
        Self {
            id: id.into(),
            question: question.into(),
            answer: answer.into(),
            label,
            embedding_index: None,
            similarity: None,
        }
    }

    /// The explicit label, or for unlabeled examples with a similarity
    /// score, truthful iff similarity exceeds `threshold`.
    pub fn resolved_label(&self, threshold: f64) -> Label {
        match (self.label, self.similarity) {
            (Label::Unlabeled, Some(s)) if s > threshold => Label::Truthful,
            (Label::Unlabeled, Some(_)) => Label::Hallucinated,
            (label, _) => label,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default)]
    pub layer: Option<u32>,
    #[serde(default)]
    pub pooling: Pooling,
    #[serde(default)]
    pub model: Option<String>,
    /// Where labels came from ("augmentation", "similarity", "judge", ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_source: Option<String>,
    /// Free-form provenance such as tool version, seed and config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    examples: Vec<LabeledExample>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(examples: Vec<LabeledExample>, meta: DatasetMeta) -> Result<Self> {
        let mut seen = HashSet::with_capacity(examples.len());
        for ex in &examples {
            if !seen.insert(ex.id.as_str()) {
                return Err(Error::Parameter(format!(
                    "duplicate example id {:?}",
                    ex.id
                )));
            }
        }
        Ok(Self { examples, meta })
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.examples.iter().filter(|e| e.label == label).count()
    }

    /// Checks every `embedding_index` against a matrix of `rows` rows.
    pub fn check_embedding_indices(&self, rows: usize) -> Result<()> {
        for ex in &self.examples {
            if let Some(i) = ex.embedding_index {
                if i >= rows {
                    return Err(Error::Shape(format!(
                        "example {:?} points at row {i} of a {rows}-row matrix",
                        ex.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |source| Error::Io { offset: 0, source };
        let meta = serde_json::to_string(&self.meta).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(out, "{META_PREFIX}{meta}").map_err(io)?;
        for ex in &self.examples {
            let line = serde_json::to_string(ex).map_err(|e| Error::Parse(e.to_string()))?;
            writeln!(out, "{line}").map_err(io)?;
        }
        out.flush().map_err(io)
    }

    /// Parses dataset JSONL. The `#meta` line is optional; blank lines are skipped.
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut meta = None;
        let mut examples = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|source| Error::Io { offset: 0, source })?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix(META_PREFIX) {
                if lineno != 0 || meta.is_some() {
                    return Err(Error::Parse(format!(
                        "line {}: #meta is only allowed on the first line",
                        lineno + 1
                    )));
                }
                meta = Some(
                    serde_json::from_str(rest)
                        .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?,
                );
                continue;
            }
            let ex: LabeledExample = serde_json::from_str(trimmed)
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            examples.push(ex);
        }
        Self::new(examples, meta.unwrap_or_default())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::file(path, e))?;
        Self::read_jsonl(BufReader::new(file))
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::file(path, e))?;
        self.write_jsonl(BufWriter::new(file))
    }
}

/// Stratified, seeded train/test split.
///
/// The test set holds `round(N * test_fraction)` examples. That total is
/// apportioned across label classes by largest remainder, and each class is
/// shuffled with its own seeded stream before taking its share. Both halves
/// keep the input order.
pub fn split_dataset(d: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if d.is_empty() {
        return Err(Error::Parameter("cannot split an empty dataset".into()));
    }
    let n = d.len();
    let test_total = (n as f64 * test_fraction).round() as usize;

    let classes = [Label::Truthful, Label::Hallucinated, Label::Unlabeled];
    let members: Vec<Vec<usize>> = classes
        .iter()
        .map(|&c| (0..n).filter(|&i| d.examples[i].label == c).collect())
        .collect();

    // largest-remainder apportionment of test_total over class sizes
    let quotas: Vec<f64> = members
        .iter()
        .map(|m| m.len() as f64 * test_total as f64 / n as f64)
        .collect();
    let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut short = test_total - take.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &c in &order {
        if short == 0 {
            break;
        }
        if take[c] < members[c].len() {
            take[c] += 1;
            short -= 1;
        }
    }

    let mut in_test = vec![false; n];
    for (c, idx) in members.iter().enumerate() {
        let mut shuffled = idx.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        shuffled.shuffle(&mut rng);
        for &i in &shuffled[..take[c]] {
            in_test[i] = true;
        }
    }

    let (test, train): (Vec<_>, Vec<_>) = d
        .examples
        .iter()
        .cloned()
        .zip(in_test)
        .partition(|(_, t)| *t);
    let strip = |v: Vec<(LabeledExample, bool)>| v.into_iter().map(|(e, _)| e).collect();
    Ok((
        Dataset::new(strip(train), d.meta.clone())?,
        Dataset::new(strip(test), d.meta.clone())?,
    ))
}
