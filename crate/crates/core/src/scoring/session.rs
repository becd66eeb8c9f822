use super::ScoreMap;
use crate::exec::Execution;
use crate::model::{PromptPair, ScoreSample, ScoreSeries, SeriesMode, SessionManifest};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Pixel rectangle `[x, y, w, h]` applied by the scorer before embedding.
pub type Crop = [u32; 4];

/// One scoring request: a frame and the two descriptions to compare it with.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub frame: String,
    pub positive: String,
    pub negative: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop: Option<Crop>,
}

/// Raw similarity pair returned by a scorer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Similarities {
    pub sim_pos: f64,
    pub sim_neg: f64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct BackendError(pub String);

/// An image-text scorer.
///
/// Implementations must tolerate concurrent calls (or serialize internally)
/// and return the same answer for the same request within one process.
pub trait ScorerBackend: Sync {
    fn score(&self, request: &ScoreRequest) -> Result<Similarities, BackendError>;
}

impl<F> ScorerBackend for F
where
    F: Fn(&ScoreRequest) -> Result<Similarities, BackendError> + Sync,
{
    fn score(&self, request: &ScoreRequest) -> Result<Similarities, BackendError> {
        self(request)
    }
}

/// What to do when the backend fails on a frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FramePolicy {
    #[default]
    Abort,
    SkipFrame,
}

#[derive(Clone, Debug)]
pub struct ScoreOptions {
    /// Seconds between consecutive frames; frame `i` is stamped `i * period`.
    pub sampling_period: f64,
    pub policy: FramePolicy,
    pub crop: Option<Crop>,
    pub mode: SeriesMode,
    pub execution: Execution,
}

impl ScoreOptions {
    pub fn new(sampling_period: f64) -> Self {
        ScoreOptions {
            sampling_period,
            policy: FramePolicy::default(),
            crop: None,
            mode: SeriesMode::Continuous,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("sampling period must be a positive finite number of seconds, got {0}")]
    InvalidSamplingPeriod(f64),
    #[error("duplicate prompt pair id '{0}'")]
    DuplicatePair(String),
    #[error(
        "session {session_id}: frame {index} ({frame}) failed for {prompt_pair_id}: {message}"
    )]
    Frame {
        session_id: String,
        index: usize,
        frame: String,
        prompt_pair_id: String,
        message: String,
    },
    #[error("session {session_id}: no frame could be scored for {prompt_pair_id}")]
    NoSamples {
        session_id: String,
        prompt_pair_id: String,
    },
}

/// Scores every frame against every prompt pair.
///
/// Requests are independent and may run concurrently; each output series is
/// assembled in frame order.
pub fn score_session(
    manifest: &SessionManifest,
    frames: &[String],
    pairs: &[PromptPair],
    backend: &dyn ScorerBackend,
    options: &ScoreOptions,
) -> Result<ScoreMap, ScoringError> {
    let period = options.sampling_period;
    if !(period.is_finite() && period > 0.0) {
        return Err(ScoringError::InvalidSamplingPeriod(period));
    }
    let mut seen = BTreeSet::new();
    for p in pairs {
        if !seen.insert(p.id.as_str()) {
            return Err(ScoringError::DuplicatePair(p.id.clone()));
        }
    }

    let jobs: Vec<(usize, usize)> = (0..pairs.len())
        .flat_map(|p| (0..frames.len()).map(move |f| (p, f)))
        .collect();
    let results = options.execution.map(&jobs, |&(p, f)| {
        let pair = &pairs[p];
        let request = ScoreRequest {
            frame: frames[f].clone(),
            positive: pair.positive.clone(),
            negative: pair.negative.clone(),
            crop: options.crop,
        };
        backend.score(&request).and_then(|s| {
            if s.sim_pos.is_finite() && s.sim_neg.is_finite() {
                Ok(s)
            } else {
                Err(BackendError(format!(
                    "non-finite similarities ({}, {})",
                    s.sim_pos, s.sim_neg
                )))
            }
        })
    });

    let mut per_pair: Vec<Vec<ScoreSample>> = vec![Vec::with_capacity(frames.len()); pairs.len()];
    for (&(p, f), result) in jobs.iter().zip(results) {
        match result {
            Ok(s) => per_pair[p].push(ScoreSample::new(f as f64 * period, s.sim_pos, s.sim_neg)),
            Err(e) if options.policy == FramePolicy::Abort => {
                return Err(ScoringError::Frame {
                    session_id: manifest.session_id.clone(),
                    index: f,
                    frame: frames[f].clone(),
                    prompt_pair_id: pairs[p].id.clone(),
                    message: e.0,
                })
            }
            Err(_) => {}
        }
    }

    let mut out = ScoreMap::new();
    for (pair, samples) in pairs.iter().zip(per_pair) {
        if samples.is_empty() {
            return Err(ScoringError::NoSamples {
                session_id: manifest.session_id.clone(),
                prompt_pair_id: pair.id.clone(),
            });
        }
        let series = ScoreSeries::new(pair.id.clone(), samples, options.mode)
            .expect("frame times are strictly increasing and sims finite");
        out.insert(pair.id.clone(), series);
    }
    Ok(out)
}
