//! Prompt selection, threshold calibration, change detection and evaluation.

mod protocol;

pub use protocol::{
    run_protocol, ProtocolConfig, ProtocolError, ProtocolReport, ProtocolSession, ResultColumn,
    ResultTable, SessionOutcome, SessionThreshold,
};

use crate::exec::Execution;
use crate::model::{DetectionStatus, RecognitionReport, RecognizerProfile, SeriesMode, Smoothing};
use crate::signal::{linear_fit, sma, DegreeSeries, LinearFit, SignalError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecognizerError {
    #[error("no candidate prompt pairs")]
    NoCandidates,
    #[error("candidate {prompt_pair_id}: {source}")]
    Candidate {
        prompt_pair_id: String,
        #[source]
        source: SignalError,
    },
    #[error("smoothing failed: {0}")]
    Smoothing(#[from] SignalError),
    #[error("annotation time must be finite, got {0}")]
    InvalidAnnotation(f64),
    #[error("annotation {annotation} precedes the first sample at {first}")]
    AnnotationBeforeStart { annotation: f64, first: f64 },
    #[error("annotation inside SMA warm-up: {annotation} precedes the first smoothed sample at {first_smoothed}")]
    AnnotationInWarmUp {
        annotation: f64,
        first_smoothed: f64,
    },
    #[error("annotation {annotation} follows the last sample at {last}")]
    AnnotationAfterEnd { annotation: f64, last: f64 },
    #[error("no calibration sessions")]
    NoSessions,
    #[error("session {session_id}: {source}")]
    Session {
        session_id: String,
        #[source]
        source: Box<RecognizerError>,
    },
    #[error("min_consecutive must be >= 1")]
    InvalidPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedPrompt {
    pub prompt_pair_id: String,
    #[serde(flatten)]
    pub fit: LinearFit,
}

/// Candidates ordered by fitted slope, largest first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptRanking {
    pub entries: Vec<RankedPrompt>,
    pub chosen: String,
}

impl PromptRanking {
    /// Sorts by slope descending, ties by id ascending. `entries` must be non-empty.
    pub(crate) fn from_entries(mut entries: Vec<RankedPrompt>) -> Self {
        entries.sort_by(|a, b| {
            b.fit
                .slope
                .total_cmp(&a.fit.slope)
                .then_with(|| a.prompt_pair_id.cmp(&b.prompt_pair_id))
        });
        let chosen = entries[0].prompt_pair_id.clone();
        PromptRanking { entries, chosen }
    }

    pub fn chosen_fit(&self) -> &LinearFit {
        &self.entries[0].fit
    }
}

/// Ranks candidate prompt pairs by the least-squares slope of their degree
/// series. Ties resolve to the lexicographically smallest id.
pub fn select_prompt(
    candidates: &BTreeMap<String, DegreeSeries>,
) -> Result<PromptRanking, RecognizerError> {
    select_prompt_with(candidates, Execution::default())
}

pub fn select_prompt_with(
    candidates: &BTreeMap<String, DegreeSeries>,
    execution: Execution,
) -> Result<PromptRanking, RecognizerError> {
    if candidates.is_empty() {
        return Err(RecognizerError::NoCandidates);
    }
    let items: Vec<(&String, &DegreeSeries)> = candidates.iter().collect();
    let entries = execution.try_map(&items, |(id, series)| {
        linear_fit(series)
            .map(|fit| RankedPrompt {
                prompt_pair_id: (*id).clone(),
                fit,
            })
            .map_err(|source| RecognizerError::Candidate {
                prompt_pair_id: (*id).clone(),
                source,
            })
    })?;
    Ok(PromptRanking::from_entries(entries))
}

/// Discrete series are always thresholded raw.
pub fn effective_smoothing(mode: SeriesMode, smoothing: Smoothing) -> Smoothing {
    match mode {
        SeriesMode::Discrete => Smoothing::Raw,
        SeriesMode::Continuous => smoothing,
    }
}

/// Applies `smoothing` (subject to [`effective_smoothing`]).
pub fn smooth(series: &DegreeSeries, smoothing: Smoothing) -> Result<DegreeSeries, SignalError> {
    match effective_smoothing(series.mode(), smoothing) {
        Smoothing::Raw => Ok(series.clone()),
        Smoothing::Sma { window } => sma(series, window),
    }
}

/// Threshold = smoothed degree at the last sample with `t <= annotation_time`.
pub fn calibrate_threshold(
    series: &DegreeSeries,
    smoothing: Smoothing,
    annotation_time: f64,
) -> Result<f64, RecognizerError> {
    if !annotation_time.is_finite() {
        return Err(RecognizerError::InvalidAnnotation(annotation_time));
    }
    let raw = series.points();
    let first = raw[0].t;
    let last = raw[raw.len() - 1].t;
    if annotation_time < first {
        return Err(RecognizerError::AnnotationBeforeStart {
            annotation: annotation_time,
            first,
        });
    }
    if annotation_time > last {
        return Err(RecognizerError::AnnotationAfterEnd {
            annotation: annotation_time,
            last,
        });
    }
    let smoothed = smooth(series, smoothing)?;
    let points = smoothed.points();
    // number of points with t <= annotation
    let idx = points.partition_point(|p| p.t <= annotation_time);
    if idx == 0 {
        return Err(RecognizerError::AnnotationInWarmUp {
            annotation: annotation_time,
            first_smoothed: points[0].t,
        });
    }
    Ok(points[idx - 1].degree)
}

/// One annotated session used for calibration.
#[derive(Clone, Copy, Debug)]
pub struct CalibrationSession<'a> {
    pub session_id: &'a str,
    pub degrees: &'a DegreeSeries,
    pub annotation_time: f64,
}

/// Per-session thresholds, in input order.
pub fn session_thresholds(
    sessions: &[CalibrationSession<'_>],
    smoothing: Smoothing,
) -> Result<Vec<f64>, RecognizerError> {
    if sessions.is_empty() {
        return Err(RecognizerError::NoSessions);
    }
    sessions
        .iter()
        .map(|s| {
            calibrate_threshold(s.degrees, smoothing, s.annotation_time).map_err(|e| {
                RecognizerError::Session {
                    session_id: s.session_id.to_owned(),
                    source: Box::new(e),
                }
            })
        })
        .collect()
}

/// Mean of the per-session thresholds.
pub fn calibrate(
    sessions: &[CalibrationSession<'_>],
    smoothing: Smoothing,
) -> Result<f64, RecognizerError> {
    let thresholds = session_thresholds(sessions, smoothing)?;
    Ok(thresholds.iter().sum::<f64>() / thresholds.len() as f64)
}

/// Index of the first sample that starts a run of at least `min_consecutive`
/// values `>= threshold`.
pub fn first_run_start(
    values: impl IntoIterator<Item = f64>,
    threshold: f64,
    min_consecutive: usize,
) -> Option<usize> {
    let mut run = 0;
    for (i, v) in values.into_iter().enumerate() {
        if v >= threshold {
            run += 1;
            if run >= min_consecutive.max(1) {
                return Some(i + 1 - run);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Time of the first threshold crossing that persists for the profile's
/// `min_consecutive` samples, scanning every sample after the SMA warm-up.
pub fn detect_change(
    series: &DegreeSeries,
    profile: &RecognizerProfile,
) -> Result<Option<f64>, RecognizerError> {
    let k = profile.detection_policy.min_consecutive;
    if k == 0 {
        return Err(RecognizerError::InvalidPolicy);
    }
    let smoothed = smooth(series, profile.smoothing)?;
    Ok(first_run_start(smoothed.degrees(), profile.threshold, k).map(|i| smoothed.points()[i].t))
}

/// Builds a report; the signed difference is detected minus annotated.
pub fn evaluate(
    session_id: &str,
    detected_time: Option<f64>,
    annotation_time: Option<f64>,
) -> RecognitionReport {
    let diff = match (detected_time, annotation_time) {
        (Some(d), Some(a)) => Some(d - a),
        _ => None,
    };
    RecognitionReport {
        session_id: session_id.to_owned(),
        detected_time,
        annotation_time,
        diff_seconds: diff,
        abs_diff_seconds: diff.map(f64::abs),
        status: if detected_time.is_some() {
            DetectionStatus::Detected
        } else {
            DetectionStatus::NotDetected
        },
    }
}
