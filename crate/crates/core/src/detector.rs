//! The contrastive Mahalanobis detector: one Gaussian per class and a
//! threshold on the difference of the two distances.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{fit_gaussian, GaussianModel, MahalanobisConfig};
use crate::tensor_io::EmbeddingMatrix;

pub const DEFAULT_TAU: f64 = 0.15;
pub const DETECTOR_FORMAT: &str = "CMD1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Truthful,
    Hallucinated,
}

impl Verdict {
    pub fn sign(self) -> i8 {
        match self {
            Verdict::Truthful => -1,
            Verdict::Hallucinated => 1,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Truthful => "truthful",
            Verdict::Hallucinated => "hallucinated",
        })
    }
}

impl FromStr for Verdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truthful" => Ok(Verdict::Truthful),
            "hallucinated" => Ok(Verdict::Hallucinated),
            other => Err(Error::Parse(format!("unknown verdict {other:?}"))),
        }
    }
}

/// δ together with the two distances it was formed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmScore {
    /// md_true − md_hal; grows as the probe moves toward the hallucinated class.
    pub delta: f64,
    pub md_true: f64,
    pub md_hal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredExample {
    pub id: String,
    pub delta: f64,
    pub md_true: f64,
    pub md_hal: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmDetector {
    pub truthful: GaussianModel,
    pub hallucinated: GaussianModel,
    tau: f64,
}

impl CmDetector {
    pub fn new(truthful: GaussianModel, hallucinated: GaussianModel, tau: f64) -> Result<Self> {
        if truthful.dim() != hallucinated.dim() {
            return Err(Error::Shape(format!(
                "truthful model has d={}, hallucinated model has d={}",
                truthful.dim(),
                hallucinated.dim()
            )));
        }
        if !tau.is_finite() {
            return Err(Error::Parameter(format!("tau must be finite, got {tau}")));
        }
        Ok(Self {
            truthful,
            hallucinated,
            tau,
        })
    }

    pub fn fit(
        truthful: &EmbeddingMatrix,
        hallucinated: &EmbeddingMatrix,
        cfg: &MahalanobisConfig,
        tau: f64,
    ) -> Result<Self> {
        if truthful.cols() != hallucinated.cols() {
            return Err(Error::Shape(format!(
                "truthful embeddings have d={}, hallucinated have d={}",
                truthful.cols(),
                hallucinated.cols()
            )));
        }
        Self::new(
            fit_gaussian(truthful, cfg)?,
            fit_gaussian(hallucinated, cfg)?,
            tau,
        )
    }

    pub fn dim(&self) -> usize {
        self.truthful.dim()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.truthful.clone(), self.hallucinated.clone(), tau)
    }

    pub fn score(&self, z: &[f64]) -> Result<CmScore> {
        let md_true = self.truthful.mahalanobis(z)?;
        let md_hal = self.hallucinated.mahalanobis(z)?;
        Ok(CmScore {
            delta: md_true - md_hal,
            md_true,
            md_hal,
        })
    }

    pub fn score_f32(&self, z: &[f32]) -> Result<CmScore> {
        let z: Vec<f64> = z.iter().map(|&v| f64::from(v)).collect();
        self.score(&z)
    }

    /// Hallucinated iff δ ≥ τ.
    pub fn verdict(&self, delta: f64) -> Verdict {
        if delta >= self.tau {
            Verdict::Hallucinated
        } else {
            Verdict::Truthful
        }
    }

    pub fn classify(&self, z: &[f64]) -> Result<Verdict> {
        Ok(self.verdict(self.score(z)?.delta))
    }

    /// Scores every row of `m`; output order follows the rows.
    pub fn batch_score<S: AsRef<str> + Sync>(
        &self,
        m: &EmbeddingMatrix,
        ids: &[S],
    ) -> Result<Vec<ScoredExample>> {
        if ids.len() != m.rows() {
            return Err(Error::Shape(format!(
                "{} ids for {} embedding rows",
                ids.len(),
                m.rows()
            )));
        }
        if m.cols() != self.dim() {
            return Err(Error::Shape(format!(
                "embeddings have d={}, detector expects {}",
                m.cols(),
                self.dim()
            )));
        }
        (0..m.rows())
            .into_par_iter()
            .map(|i| {
                let s = self.score_f32(m.row(i))?;
                Ok(ScoredExample {
                    id: ids[i].as_ref().to_string(),
                    delta: s.delta,
                    md_true: s.md_true,
                    md_hal: s.md_hal,
                    verdict: self.verdict(s.delta),
                })
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "format": DETECTOR_FORMAT,
            "tau": self.tau,
            "truthful": self.truthful.to_json(),
            "hallucinated": self.hallucinated.to_json(),
        })
    }

    /// CMD1 bytes. `meta`, when given, is stored alongside and ignored on load.
    pub fn save(&self, meta: Option<serde_json::Value>) -> Vec<u8> {
        let mut v = self.to_json();
        if let Some(meta) = meta {
            v["meta"] = meta;
        }
        serde_json::to_vec(&v).expect("detector serializes")
    }

    pub fn load(bytes: &[u8]) -> Result<Self> {
        let v: serde_json::Value =
            serde_json::from_slice(bytes).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json(v)
    }

    pub fn from_json(mut v: serde_json::Value) -> Result<Self> {
        let format = v.get("format").and_then(|f| f.as_str()).unwrap_or("");
        if format != DETECTOR_FORMAT {
            return Err(Error::Format(format!(
                "detector format tag {format:?}, expected {DETECTOR_FORMAT:?}"
            )));
        }
        let tau = v
            .get("tau")
            .and_then(|t| t.as_f64())
            .ok_or_else(|| Error::Parse("missing numeric \"tau\"".into()))?;
        let mut take = |key: &str| {
            v.get_mut(key)
                .map(serde_json::Value::take)
                .ok_or_else(|| Error::Parse(format!("missing {key:?} model")))
        };
        let truthful = GaussianModel::from_json(take("truthful")?)?;
        let hallucinated = GaussianModel::from_json(take("hallucinated")?)?;
        Self::new(truthful, hallucinated, tau)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)
            .map_err(|source| Error::Io { offset: 0, source })?;
        Self::load(&buf)
    }
}

pub fn fit_detector(
    truthful: &EmbeddingMatrix,
    hallucinated: &EmbeddingMatrix,
    cfg: &MahalanobisConfig,
    tau: f64,
) -> Result<CmDetector> {
    CmDetector::fit(truthful, hallucinated, cfg, tau)
}

pub const SCORE_COLUMNS: [&str; 5] = ["id", "delta", "md_true", "md_hal", "verdict"];

/// Writes scores as CSV with columns id,delta,md_true,md_hal,verdict.
pub fn write_scores_csv<W: Write>(scores: &[ScoredExample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(SCORE_COLUMNS).map_err(csv_err)?;
    for s in scores {
        w.write_record([
            s.id.clone(),
            s.delta.to_string(),
            s.md_true.to_string(),
            s.md_hal.to_string(),
            s.verdict.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io { offset: 0, source })
}

pub fn read_scores_csv<R: Read>(input: R) -> Result<Vec<ScoredExample>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != SCORE_COLUMNS {
        return Err(Error::Format(format!(
            "score CSV header {:?}, expected {:?}",
            headers.iter().collect::<Vec<_>>(),
            SCORE_COLUMNS
        )));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad number {:?}", line + 1, &rec[i])))
        };
        out.push(ScoredExample {
            id: rec[0].to_string(),
            delta: num(1)?,
            md_true: num(2)?,
            md_hal: num(3)?,
            verdict: rec[4].parse()?,
        });
    }
    Ok(out)
}
