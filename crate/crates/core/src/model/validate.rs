use super::{ScoreSeries, SessionManifest};
use serde::{Deserialize, Serialize};
use std::fmt;

/// One broken invariant, located by a dotted field path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a manifest together with the score series recorded for it.
///
/// Every violated invariant is reported; nothing is short-circuited.
pub fn validate_manifest(manifest: &SessionManifest, series: &[ScoreSeries]) -> ValidationReport {
    let mut violations = manifest.violations("manifest");
    for (i, s) in series.iter().enumerate() {
        let path = format!("series[{i}]");
        violations.extend(s.violations(&path));
        if let (Some(a), Some((first, last))) = (manifest.annotation_time, s.span()) {
            if a.is_finite() && !(first..=last).contains(&a) {
                violations.push(Violation::new(
                    "manifest.annotation_time",
                    format!(
                        "annotation outside series span: {a} not in [{first}, {last}] of {path} ({})",
                        s.prompt_pair_id
                    ),
                ));
            }
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GazeArea, ScoreSample, SeriesMode, StateChangeKind};

    fn manifest(annotation: Option<f64>) -> SessionManifest {
        SessionManifest {
            session_id: "boil".into(),
            state_change_kind: StateChangeKind::Vaporization,
            heat_power: "same".into(),
            annotation_time: annotation,
            score_source: "boil.jsonl".into(),
            gaze_area: GazeArea::EntireVessel,
        }
    }

    fn series_spanning(end: usize) -> ScoreSeries {
        let samples = (0..=end)
            .map(|i| ScoreSample::new(i as f64, 0.3, 0.2))
            .collect();
        ScoreSeries::new("vaporization.b.entire", samples, SeriesMode::Continuous).unwrap()
    }

    #[test]
    fn annotation_inside_span_is_valid() {
        let report = validate_manifest(&manifest(Some(95.7)), &[series_spanning(120)]);
        assert!(report.is_valid(), "{:?}", report);
    }

    #[test]
    fn annotation_outside_span_is_reported() {
        let report = validate_manifest(&manifest(Some(200.0)), &[series_spanning(120)]);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].path, "manifest.annotation_time");
        assert!(report.violations[0]
            .message
            .contains("annotation outside series span"));
    }

    #[test]
    fn empty_series_is_reported() {
        let empty = ScoreSeries {
            prompt_pair_id: "p".into(),
            samples: vec![],
            mode: SeriesMode::Continuous,
        };
        let report = validate_manifest(&manifest(Some(1.0)), &[empty]);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].path, "series[0].samples");
        assert_eq!(report.violations[0].message, "series non-empty");
    }

    #[test]
    fn reports_every_violation() {
        let mut m = manifest(Some(-1.0));
        m.session_id = String::new();
        let bad = ScoreSeries {
            prompt_pair_id: "p".into(),
            samples: vec![
                ScoreSample::new(2.0, 0.0, 0.0),
                ScoreSample::new(1.0, 0.0, 0.0),
            ],
            mode: SeriesMode::Continuous,
        };
        let report = validate_manifest(&m, &[bad]);
        let paths: Vec<_> = report.violations.iter().map(|v| v.path.as_str()).collect();
        assert!(paths.contains(&"manifest.session_id"));
        assert!(paths.contains(&"manifest.annotation_time"));
        assert!(paths.contains(&"series[0].samples[1].t"));
    }
}
