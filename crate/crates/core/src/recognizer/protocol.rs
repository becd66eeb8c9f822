//! Calibrate on annotated sessions, then evaluate on unseen ones.

use super::{
    detect_change, evaluate, session_thresholds, CalibrationSession, PromptRanking, RankedPrompt,
    RecognizerError,
};
use crate::exec::Execution;
use crate::model::{
    DetectionPolicy, GazeArea, PromptPair, RecognitionReport, RecognizerProfile, SeriesMode,
    SessionManifest, Smoothing, StateChangeKind,
};
use crate::scoring::ScoreMap;
use crate::signal::{
    degree_series, linear_fit, DegreeSeries, LinearFit, SignalError, DEFAULT_TEMPERATURE,
};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

/// A session's manifest together with its score series.
#[derive(Clone, Debug)]
pub struct ProtocolSession {
    pub manifest: SessionManifest,
    pub scores: ScoreMap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub temperature: f64,
    pub window: usize,
    pub min_consecutive: usize,
    pub mode: SeriesMode,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            temperature: DEFAULT_TEMPERATURE,
            window: Smoothing::DEFAULT_WINDOW,
            min_consecutive: 1,
            mode: SeriesMode::Continuous,
            execution: Execution::default(),
        }
    }
}

impl ProtocolConfig {
    pub fn smoothing(&self) -> Smoothing {
        match self.mode {
            SeriesMode::Continuous => Smoothing::Sma {
                window: self.window,
            },
            SeriesMode::Discrete => Smoothing::Raw,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("no calibration sessions")]
    NoCalibrationSessions,
    #[error("no candidate prompt pairs")]
    NoCandidates,
    #[error("kind mismatch: session {session_id} is {found}, expected {expected}")]
    KindMismatch {
        session_id: String,
        expected: StateChangeKind,
        found: StateChangeKind,
    },
    #[error("gaze area mismatch: session {session_id} is {found}, expected {expected}")]
    GazeMismatch {
        session_id: String,
        expected: GazeArea,
        found: GazeArea,
    },
    #[error("calibration session {0} has no annotation time")]
    MissingAnnotation(String),
    #[error("session {session_id} has no scores for prompt pair {prompt_pair_id}")]
    MissingSeries {
        session_id: String,
        prompt_pair_id: String,
    },
    #[error("session {session_id}, prompt pair {prompt_pair_id}: {source}")]
    Signal {
        session_id: String,
        prompt_pair_id: String,
        #[source]
        source: SignalError,
    },
    #[error(transparent)]
    Recognizer(#[from] RecognizerError),
    #[error("session {session_id}: {source}")]
    Detection {
        session_id: String,
        #[source]
        source: RecognizerError,
    },
    #[error("invalid profile: {0}")]
    Profile(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionThreshold {
    pub session_id: String,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub heat_power: String,
    #[serde(flatten)]
    pub report: RecognitionReport,
}

/// Full record of one protocol run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub state_change_kind: StateChangeKind,
    pub gaze_area: GazeArea,
    pub ranking: PromptRanking,
    pub calibration: Vec<SessionThreshold>,
    pub profile: RecognizerProfile,
    pub sessions: Vec<SessionOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultColumn {
    pub heat_power: String,
    /// Mean absolute difference over detected sessions; `None` when none fired.
    pub mean_abs_diff_seconds: Option<f64>,
    pub sessions: usize,
    pub detected: usize,
}

/// Diff-seconds keyed by heat-power label, one row for the chosen prompt pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub row_label: String,
    pub columns: Vec<ResultColumn>,
}

impl ProtocolReport {
    /// Groups test sessions by heat-power label, in order of first appearance.
    pub fn table(&self) -> ResultTable {
        let mut columns: Vec<ResultColumn> = Vec::new();
        let mut sums: Vec<f64> = Vec::new();
        for outcome in &self.sessions {
            let idx = match columns
                .iter()
                .position(|c| c.heat_power == outcome.heat_power)
            {
                Some(i) => i,
                None => {
                    columns.push(ResultColumn {
                        heat_power: outcome.heat_power.clone(),
                        mean_abs_diff_seconds: None,
                        sessions: 0,
                        detected: 0,
                    });
                    sums.push(0.0);
                    columns.len() - 1
                }
            };
            columns[idx].sessions += 1;
            if let Some(d) = outcome.report.abs_diff_seconds {
                columns[idx].detected += 1;
                sums[idx] += d;
            }
        }
        for (c, s) in columns.iter_mut().zip(sums) {
            if c.detected > 0 {
                c.mean_abs_diff_seconds = Some(s / c.detected as f64);
            }
        }
        ResultTable {
            row_label: self.profile.prompt_pair.label(),
            columns,
        }
    }

    /// Plain-text table: one row for the chosen pair, one column of absolute
    /// diff seconds per heat-power label, `NA` where nothing was detected.
    pub fn render_table(&self) -> String {
        let table = self.table();
        let mut header = format!("| {:<14} |", "");
        let mut row = format!("| {:<14} |", table.row_label);
        for c in &table.columns {
            let title = format!("{} power diff (s)", c.heat_power);
            let value = c
                .mean_abs_diff_seconds
                .map_or_else(|| "NA".to_string(), |v| format!("{v:.1}"));
            let width = title.len().max(value.len());
            let _ = write!(header, " {title:>width$} |");
            let _ = write!(row, " {value:>width$} |");
        }
        format!("{header}\n{row}\n")
    }
}

fn degrees_for(
    session: &ProtocolSession,
    prompt_pair_id: &str,
    config: &ProtocolConfig,
) -> Result<DegreeSeries, ProtocolError> {
    let series =
        session
            .scores
            .get(prompt_pair_id)
            .ok_or_else(|| ProtocolError::MissingSeries {
                session_id: session.manifest.session_id.clone(),
                prompt_pair_id: prompt_pair_id.to_owned(),
            })?;
    let mut series = series.clone();
    series.mode = config.mode;
    degree_series(&series, config.temperature).map_err(|source| ProtocolError::Signal {
        session_id: session.manifest.session_id.clone(),
        prompt_pair_id: prompt_pair_id.to_owned(),
        source,
    })
}

fn check_homogeneous<'a>(
    sessions: impl Iterator<Item = &'a ProtocolSession>,
    kind: StateChangeKind,
    gaze: GazeArea,
) -> Result<(), ProtocolError> {
    for s in sessions {
        let m = &s.manifest;
        if m.state_change_kind != kind {
            return Err(ProtocolError::KindMismatch {
                session_id: m.session_id.clone(),
                expected: kind,
                found: m.state_change_kind,
            });
        }
        if m.gaze_area != gaze {
            return Err(ProtocolError::GazeMismatch {
                session_id: m.session_id.clone(),
                expected: gaze,
                found: m.gaze_area,
            });
        }
    }
    Ok(())
}

/// Selects the prompt pair on the calibration sessions, calibrates the
/// threshold with it, and evaluates every test session.
///
/// With several calibration sessions, candidates are ranked by their mean
/// slope and the threshold is the mean of the per-session thresholds.
pub fn run_protocol(
    calibration: &[ProtocolSession],
    test: &[ProtocolSession],
    candidates: &[PromptPair],
    config: &ProtocolConfig,
) -> Result<ProtocolReport, ProtocolError> {
    let first = calibration
        .first()
        .ok_or(ProtocolError::NoCalibrationSessions)?;
    if candidates.is_empty() {
        return Err(ProtocolError::NoCandidates);
    }
    let kind = first.manifest.state_change_kind;
    let gaze = first.manifest.gaze_area;
    check_homogeneous(calibration.iter().chain(test), kind, gaze)?;
    let annotations = calibration
        .iter()
        .map(|s| {
            s.manifest
                .annotation_time
                .ok_or_else(|| ProtocolError::MissingAnnotation(s.manifest.session_id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    // (1) rank candidates by mean slope over calibration sessions
    let per_candidate = config.execution.try_map(candidates, |pair| {
        let mut degrees = Vec::with_capacity(calibration.len());
        let mut slope = 0.0;
        let mut intercept = 0.0;
        let mut n = 0;
        for session in calibration {
            let d = degrees_for(session, &pair.id, config)?;
            let fit = linear_fit(&d).map_err(|source| ProtocolError::Signal {
                session_id: session.manifest.session_id.clone(),
                prompt_pair_id: pair.id.clone(),
                source,
            })?;
            slope += fit.slope;
            intercept += fit.intercept;
            n += fit.n;
            degrees.push(d);
        }
        let k = calibration.len() as f64;
        let fit = LinearFit {
            slope: slope / k,
            intercept: intercept / k,
            n,
        };
        Ok::<_, ProtocolError>((
            RankedPrompt {
                prompt_pair_id: pair.id.clone(),
                fit,
            },
            degrees,
        ))
    })?;
    let ranking =
        PromptRanking::from_entries(per_candidate.iter().map(|(r, _)| r.clone()).collect());
    let chosen_idx = candidates
        .iter()
        .position(|p| p.id == ranking.chosen)
        .expect("chosen id comes from candidates");
    let chosen_pair = candidates[chosen_idx].clone();
    let chosen_degrees = &per_candidate[chosen_idx].1;

    // (2) calibrate the threshold with the chosen pair
    let smoothing = config.smoothing();
    let cal_sessions: Vec<CalibrationSession<'_>> = calibration
        .iter()
        .zip(chosen_degrees)
        .zip(&annotations)
        .map(|((s, d), &a)| CalibrationSession {
            session_id: &s.manifest.session_id,
            degrees: d,
            annotation_time: a,
        })
        .collect();
    let thresholds = session_thresholds(&cal_sessions, smoothing)?;
    let threshold = thresholds.iter().sum::<f64>() / thresholds.len() as f64;
    let profile = RecognizerProfile::new(
        chosen_pair,
        smoothing,
        threshold,
        DetectionPolicy {
            min_consecutive: config.min_consecutive,
        },
        config.temperature,
    )
    .map_err(|e| ProtocolError::Profile(e.to_string()))?;

    // (3) detect on every test session
    let sessions = config.execution.try_map(test, |session| {
        let d = degrees_for(session, &profile.prompt_pair.id, config)?;
        let detected = detect_change(&d, &profile).map_err(|source| ProtocolError::Detection {
            session_id: session.manifest.session_id.clone(),
            source,
        })?;
        Ok::<_, ProtocolError>(SessionOutcome {
            heat_power: session.manifest.heat_power.clone(),
            report: evaluate(
                &session.manifest.session_id,
                detected,
                session.manifest.annotation_time,
            ),
        })
    })?;

    Ok(ProtocolReport {
        state_change_kind: kind,
        gaze_area: gaze,
        ranking,
        calibration: calibration
            .iter()
            .zip(thresholds)
            .map(|(s, threshold)| SessionThreshold {
                session_id: s.manifest.session_id.clone(),
                threshold,
            })
            .collect(),
        profile,
        sessions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{load_prompt_catalog, ScoreSample, ScoreSeries};
    use crate::signal::invert_degree;

    fn sigmoid_scores(id: &str, t_change: f64, swing: f64) -> ScoreSeries {
        let samples = (0..=120)
            .map(|i| {
                let t = i as f64;
                let d = 0.2 + swing / (1.0 + (-(t - t_change) / 3.0).exp());
                ScoreSample::new(t, invert_degree(d, 100.0), 0.0)
            })
            .collect();
        ScoreSeries::new(id, samples, SeriesMode::Continuous).unwrap()
    }

    fn session(id: &str, heat: &str, t_change: f64, pairs: &[PromptPair]) -> ProtocolSession {
        let swings = [0.1, 0.6, 0.0, 0.3];
        let scores = pairs
            .iter()
            .zip(swings)
            .map(|(p, s)| (p.id.clone(), sigmoid_scores(&p.id, t_change, s)))
            .collect();
        ProtocolSession {
            manifest: SessionManifest {
                session_id: id.into(),
                state_change_kind: StateChangeKind::Vaporization,
                heat_power: heat.into(),
                annotation_time: Some(t_change),
                score_source: format!("{id}.jsonl"),
                gaze_area: GazeArea::EntireVessel,
            },
            scores,
        }
    }

    fn entire_pairs() -> Vec<PromptPair> {
        load_prompt_catalog(StateChangeKind::Vaporization)
            .into_iter()
            .filter(|p| p.gaze_area == GazeArea::EntireVessel)
            .collect()
    }

    #[test]
    fn end_to_end_on_clean_sigmoids() {
        let pairs = entire_pairs();
        let cal = [session("cal", "same", 60.0, &pairs)];
        let test = [
            session("t1", "same", 60.0, &pairs),
            session("t2", "different", 45.0, &pairs),
        ];
        let report = run_protocol(&cal, &test, &pairs, &ProtocolConfig::default()).unwrap();
        assert_eq!(report.ranking.chosen, "vaporization.b.entire");
        // the flat candidate ranks last
        assert_eq!(
            report.ranking.entries.last().unwrap().prompt_pair_id,
            "vaporization.c.entire"
        );
        for s in &report.sessions {
            assert!(s.report.abs_diff_seconds.unwrap() < 1.0, "{s:?}");
        }
        let text = report.render_table();
        assert!(text.contains("(b)-entire"));
        assert!(text.contains("same power diff (s)"));
        assert!(text.contains("different power diff (s)"));
    }

    #[test]
    fn empty_test_set() {
        let pairs = entire_pairs();
        let cal = [session("cal", "same", 60.0, &pairs)];
        let report = run_protocol(&cal, &[], &pairs, &ProtocolConfig::default()).unwrap();
        assert!(report.sessions.is_empty());
        assert!(report.table().columns.is_empty());
    }

    #[test]
    fn rejects_mixed_kinds_and_gaze() {
        let pairs = entire_pairs();
        let cal = [session("cal", "same", 60.0, &pairs)];
        let mut other = session("t", "same", 60.0, &pairs);
        other.manifest.state_change_kind = StateChangeKind::Melting;
        let err =
            run_protocol(&cal, &[other.clone()], &pairs, &ProtocolConfig::default()).unwrap_err();
        assert!(err.to_string().starts_with("kind mismatch"));
        other.manifest.state_change_kind = StateChangeKind::Vaporization;
        other.manifest.gaze_area = GazeArea::ContentsOnly;
        let err = run_protocol(&cal, &[other], &pairs, &ProtocolConfig::default()).unwrap_err();
        assert!(matches!(err, ProtocolError::GazeMismatch { .. }));
    }

    #[test]
    fn reports_missing_inputs() {
        let pairs = entire_pairs();
        let mut cal = session("cal", "same", 60.0, &pairs);
        assert_eq!(
            run_protocol(&[], &[], &pairs, &ProtocolConfig::default()).unwrap_err(),
            ProtocolError::NoCalibrationSessions
        );
        cal.scores.remove("vaporization.d.entire");
        let err =
            run_protocol(&[cal.clone()], &[], &pairs, &ProtocolConfig::default()).unwrap_err();
        assert!(matches!(err, ProtocolError::MissingSeries { .. }));
        cal.manifest.annotation_time = None;
        let err = run_protocol(&[cal], &[], &pairs, &ProtocolConfig::default()).unwrap_err();
        assert_eq!(err, ProtocolError::MissingAnnotation("cal".into()));
    }

    #[test]
    fn unannotated_test_session_has_no_diff() {
        let pairs = entire_pairs();
        let cal = [session("cal", "same", 60.0, &pairs)];
        let mut t = session("t", "same", 60.0, &pairs);
        t.manifest.annotation_time = None;
        let report = run_protocol(&cal, &[t], &pairs, &ProtocolConfig::default()).unwrap();
        assert!(report.sessions[0].report.detected_time.is_some());
        assert_eq!(report.sessions[0].report.diff_seconds, None);
        assert!(report.render_table().contains("NA"));
    }

    #[test]
    fn execution_mode_does_not_change_report() {
        let pairs = entire_pairs();
        let cal = [
            session("cal", "same", 60.0, &pairs),
            session("cal2", "same", 50.0, &pairs),
        ];
        let test: Vec<_> = (0..16)
            .map(|i| {
                session(
                    &format!("t{i}"),
                    if i % 2 == 0 { "same" } else { "different" },
                    30.0 + i as f64 * 3.0,
                    &pairs,
                )
            })
            .collect();
        let mut cfg = ProtocolConfig {
            execution: Execution::Sequential,
            ..Default::default()
        };
        let a = serde_json::to_string(&run_protocol(&cal, &test, &pairs, &cfg).unwrap()).unwrap();
        cfg.execution = Execution::Parallel;
        let b = serde_json::to_string(&run_protocol(&cal, &test, &pairs, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
