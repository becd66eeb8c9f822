//! JSONL score files.
//!
//! One object per line: `{"prompt_pair_id": string, "t": number, "sim_pos":
//! number, "sim_neg": number}`. Lines for different pairs may interleave.

use crate::model::{ScoreSample, ScoreSeries, SeriesMode};
use serde::Serialize;
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use thiserror::Error;

/// Score series keyed by prompt pair id.
pub type ScoreMap = BTreeMap<String, ScoreSeries>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineError {
    InvalidJson(String),
    NotObject,
    MissingField(&'static str),
    WrongType {
        field: &'static str,
        expected: &'static str,
    },
    NonFinite(&'static str),
    NegativeTime,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LineError::InvalidJson(e) => write!(f, "invalid JSON: {e}"),
            LineError::NotObject => f.write_str("record must be a JSON object"),
            LineError::MissingField(field) => write!(f, "missing field {field}"),
            LineError::WrongType { field, expected } => {
                write!(f, "field {field} must be a {expected}")
            }
            LineError::NonFinite(field) => write!(f, "field {field} must be finite"),
            LineError::NegativeTime => f.write_str("field t must be >= 0"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScoreFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {kind}")]
    Line { line: u64, kind: LineError },
    #[error("duplicate timestamp t={t} for prompt pair {prompt_pair_id}")]
    DuplicateTimestamp { prompt_pair_id: String, t: f64 },
    #[error("invalid series {prompt_pair_id}: {message}")]
    InvalidSeries {
        prompt_pair_id: String,
        message: String,
    },
}

#[derive(Serialize)]
struct ScoreLine<'a> {
    prompt_pair_id: &'a str,
    t: f64,
    sim_pos: f64,
    sim_neg: f64,
}

fn field<'a>(obj: &'a Map<String, Value>, name: &'static str) -> Result<&'a Value, LineError> {
    obj.get(name).ok_or(LineError::MissingField(name))
}

fn number(obj: &Map<String, Value>, name: &'static str) -> Result<f64, LineError> {
    let v = field(obj, name)?.as_f64().ok_or(LineError::WrongType {
        field: name,
        expected: "number",
    })?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(LineError::NonFinite(name))
    }
}

fn parse_line(text: &str) -> Result<(String, ScoreSample), LineError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| LineError::InvalidJson(e.to_string()))?;
    let obj = value.as_object().ok_or(LineError::NotObject)?;
    let id = field(obj, "prompt_pair_id")?
        .as_str()
        .ok_or(LineError::WrongType {
            field: "prompt_pair_id",
            expected: "string",
        })?
        .to_owned();
    let t = number(obj, "t")?;
    if t < 0.0 {
        return Err(LineError::NegativeTime);
    }
    let sim_pos = number(obj, "sim_pos")?;
    let sim_neg = number(obj, "sim_neg")?;
    Ok((
        id,
        ScoreSample {
            t,
            sim_pos,
            sim_neg,
        },
    ))
}

/// Reads JSONL scores from any buffered reader. Blank lines are skipped.
///
/// Samples are sorted by `t` within each pair; a repeated `(prompt_pair_id,
/// t)` is an error.
pub fn read_scores(input: impl BufRead) -> Result<ScoreMap, ScoreFileError> {
    let mut grouped: BTreeMap<String, Vec<ScoreSample>> = BTreeMap::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(|source| ScoreFileError::Io {
            path: format!("line {line_no}"),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let (id, sample) = parse_line(trimmed).map_err(|kind| ScoreFileError::Line {
            line: line_no,
            kind,
        })?;
        grouped.entry(id).or_default().push(sample);
    }

    let mut out = ScoreMap::new();
    for (id, mut samples) in grouped {
        samples.sort_by(|a, b| a.t.total_cmp(&b.t));
        if let Some(w) = samples.windows(2).find(|w| w[0].t == w[1].t) {
            return Err(ScoreFileError::DuplicateTimestamp {
                prompt_pair_id: id,
                t: w[0].t,
            });
        }
        let series =
            ScoreSeries::new(id.clone(), samples, SeriesMode::Continuous).map_err(|e| {
                ScoreFileError::InvalidSeries {
                    prompt_pair_id: id.clone(),
                    message: e.to_string(),
                }
            })?;
        out.insert(id, series);
    }
    Ok(out)
}

pub fn read_score_file(path: &Path) -> Result<ScoreMap, ScoreFileError> {
    let file = std::fs::File::open(path).map_err(|source| ScoreFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_scores(BufReader::new(file))
}

/// Renders scores as JSONL, ordered by prompt pair id then `t`.
pub fn scores_to_jsonl<'a>(series: impl IntoIterator<Item = &'a ScoreSeries>) -> String {
    let mut out = String::new();
    for s in series {
        for sample in &s.samples {
            let line = ScoreLine {
                prompt_pair_id: &s.prompt_pair_id,
                t: sample.t,
                sim_pos: sample.sim_pos,
                sim_neg: sample.sim_neg,
            };
            out.push_str(&serde_json::to_string(&line).expect("score line serializes"));
            out.push('\n');
        }
    }
    out
}

pub fn write_scores(mut output: impl Write, scores: &ScoreMap) -> std::io::Result<()> {
    output.write_all(scores_to_jsonl(scores.values()).as_bytes())?;
    output.flush()
}

/// Writes the whole file in one go; nothing is written if any series is invalid.
pub fn write_score_file(path: &Path, scores: &ScoreMap) -> Result<(), ScoreFileError> {
    for (id, s) in scores {
        if let Some(v) = s.violations("series").into_iter().next() {
            return Err(ScoreFileError::InvalidSeries {
                prompt_pair_id: id.clone(),
                message: v.to_string(),
            });
        }
    }
    std::fs::write(path, scores_to_jsonl(scores.values())).map_err(|source| ScoreFileError::Io {
        path: path.display().to_string(),
        source,
    })
}
