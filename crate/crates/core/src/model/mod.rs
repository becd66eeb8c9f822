//! Domain types shared across the pipeline.
//!
//! Everything here is a plain value object. Constructors named `new` check the
//! type invariants; the `violations` methods report every broken invariant
//! with a field path instead of stopping at the first one.

mod catalog;
mod validate;

pub use catalog::{load_catalog_file, load_prompt_catalog, parse_catalog, CatalogError};
pub use validate::{validate_manifest, ValidationReport, Violation};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Errors raised when constructing a value that breaks its invariants.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid {what}: {}", join_violations(.violations))]
    Invalid {
        what: &'static str,
        violations: Vec<Violation>,
    },
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

fn checked<T>(value: T, what: &'static str, violations: Vec<Violation>) -> Result<T, ModelError> {
    if violations.is_empty() {
        Ok(value)
    } else {
        Err(ModelError::Invalid { what, violations })
    }
}

/// The four heat-induced state changes covered by the bundled catalog.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateChangeKind {
    Vaporization,
    Melting,
    ProteinDenaturation,
    Maillard,
}

impl StateChangeKind {
    pub const ALL: [StateChangeKind; 4] = [
        StateChangeKind::Vaporization,
        StateChangeKind::Melting,
        StateChangeKind::ProteinDenaturation,
        StateChangeKind::Maillard,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StateChangeKind::Vaporization => "vaporization",
            StateChangeKind::Melting => "melting",
            StateChangeKind::ProteinDenaturation => "protein_denaturation",
            StateChangeKind::Maillard => "maillard",
        }
    }
}

impl fmt::Display for StateChangeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StateChangeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StateChangeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown state change kind '{s}'"))
    }
}

/// How the positive/negative descriptions are phrased.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TemplateForm {
    /// "Boiling water"
    #[serde(rename = "A_simple")]
    Simple,
    /// "Boiling and bubbling water"
    #[serde(rename = "B_with_change_desc")]
    WithChangeDescription,
    /// "Water that is boiling"
    #[serde(rename = "C_ingredient_first_simple")]
    IngredientFirstSimple,
    /// "Water that is boiling and bubbling"
    #[serde(rename = "D_ingredient_first_with_change_desc")]
    IngredientFirstWithChangeDescription,
}

impl TemplateForm {
    pub fn letter(self) -> char {
        match self {
            TemplateForm::Simple => 'a',
            TemplateForm::WithChangeDescription => 'b',
            TemplateForm::IngredientFirstSimple => 'c',
            TemplateForm::IngredientFirstWithChangeDescription => 'd',
        }
    }
}

/// Image region the scorer looks at. Cropping happens before scoring, outside
/// this crate; here it is metadata only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GazeArea {
    EntireVessel,
    ContentsOnly,
}

impl GazeArea {
    pub fn short_name(self) -> &'static str {
        match self {
            GazeArea::EntireVessel => "entire",
            GazeArea::ContentsOnly => "contents",
        }
    }
}

impl fmt::Display for GazeArea {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GazeArea::EntireVessel => "entire_vessel",
            GazeArea::ContentsOnly => "contents_only",
        })
    }
}

/// A positive description asserting the state change and a negative one
/// denying it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptPair {
    pub id: String,
    pub positive: String,
    pub negative: String,
    pub template_form: TemplateForm,
    pub gaze_area: GazeArea,
}

impl PromptPair {
    pub fn new(
        id: impl Into<String>,
        positive: impl Into<String>,
        negative: impl Into<String>,
        template_form: TemplateForm,
        gaze_area: GazeArea,
    ) -> Result<Self, ModelError> {
        let pair = PromptPair {
            id: id.into(),
            positive: positive.into(),
            negative: negative.into(),
            template_form,
            gaze_area,
        };
        let violations = pair.violations("prompt_pair");
        checked(pair, "prompt pair", violations)
    }

    /// Row label in the style of the comparison tables, e.g. `(b)-entire`.
    pub fn label(&self) -> String {
        format!(
            "({})-{}",
            self.template_form.letter(),
            self.gaze_area.short_name()
        )
    }

    pub fn violations(&self, path: &str) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.id.trim().is_empty() {
            out.push(Violation::new(format!("{path}.id"), "id must be non-empty"));
        }
        if self.positive.trim().is_empty() {
            out.push(Violation::new(
                format!("{path}.positive"),
                "positive description must be non-empty",
            ));
        }
        if self.negative.trim().is_empty() {
            out.push(Violation::new(
                format!("{path}.negative"),
                "negative description must be non-empty",
            ));
        }
        if self.positive == self.negative {
            out.push(Violation::new(
                format!("{path}.negative"),
                "positive and negative descriptions must differ",
            ));
        }
        out
    }
}

/// Raw scorer output for one frame: image-text similarities before softmax.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSample {
    /// Seconds from session start.
    pub t: f64,
    pub sim_pos: f64,
    pub sim_neg: f64,
}

impl ScoreSample {
    pub fn new(t: f64, sim_pos: f64, sim_neg: f64) -> Self {
        ScoreSample {
            t,
            sim_pos,
            sim_neg,
        }
    }

    /// The same frame scored with the descriptions exchanged.
    pub fn swapped(self) -> Self {
        ScoreSample {
            t: self.t,
            sim_pos: self.sim_neg,
            sim_neg: self.sim_pos,
        }
    }
}

/// Sampling regime of a session.
///
/// `Discrete` marks sparse captures (e.g. frames taken only while stirring is
/// paused); such series are thresholded without smoothing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesMode {
    #[default]
    Continuous,
    Discrete,
}

/// Score samples for one session under one prompt pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    pub prompt_pair_id: String,
    pub samples: Vec<ScoreSample>,
    #[serde(default)]
    pub mode: SeriesMode,
}

impl ScoreSeries {
    pub fn new(
        prompt_pair_id: impl Into<String>,
        samples: Vec<ScoreSample>,
        mode: SeriesMode,
    ) -> Result<Self, ModelError> {
        let series = ScoreSeries {
            prompt_pair_id: prompt_pair_id.into(),
            samples,
            mode,
        };
        let violations = series.violations("series");
        checked(series, "score series", violations)
    }

    /// First and last sample times, if any.
    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.samples.first()?.t, self.samples.last()?.t))
    }

    pub fn violations(&self, path: &str) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.prompt_pair_id.trim().is_empty() {
            out.push(Violation::new(
                format!("{path}.prompt_pair_id"),
                "prompt pair id must be non-empty",
            ));
        }
        if self.samples.is_empty() {
            out.push(Violation::new(
                format!("{path}.samples"),
                "series non-empty",
            ));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if !s.t.is_finite() || s.t < 0.0 {
                out.push(Violation::new(
                    format!("{path}.samples[{i}].t"),
                    format!("t must be finite and >= 0, got {}", s.t),
                ));
            }
            if !s.sim_pos.is_finite() {
                out.push(Violation::new(
                    format!("{path}.samples[{i}].sim_pos"),
                    "sim_pos must be finite",
                ));
            }
            if !s.sim_neg.is_finite() {
                out.push(Violation::new(
                    format!("{path}.samples[{i}].sim_neg"),
                    "sim_neg must be finite",
                ));
            }
        }
        for (i, w) in self.samples.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                out.push(Violation::new(
                    format!("{path}.samples[{}].t", i + 1),
                    format!(
                        "t must be strictly increasing ({} after {})",
                        w[1].t, w[0].t
                    ),
                ));
            }
        }
        out
    }
}

/// One recorded cooking session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub session_id: String,
    pub state_change_kind: StateChangeKind,
    /// Free-form label such as "same" or "different" (relative to the
    /// calibration session's stove setting).
    pub heat_power: String,
    /// Seconds at which a person judged the change to have happened.
    #[serde(default)]
    pub annotation_time: Option<f64>,
    /// Path of a JSONL score file or a bridge endpoint.
    pub score_source: String,
    pub gaze_area: GazeArea,
}

impl SessionManifest {
    pub fn violations(&self, path: &str) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.session_id.trim().is_empty() {
            out.push(Violation::new(
                format!("{path}.session_id"),
                "session id must be non-empty",
            ));
        }
        if self.score_source.trim().is_empty() {
            out.push(Violation::new(
                format!("{path}.score_source"),
                "score source must be non-empty",
            ));
        }
        if let Some(a) = self.annotation_time {
            if !a.is_finite() || a < 0.0 {
                out.push(Violation::new(
                    format!("{path}.annotation_time"),
                    format!("annotation time must be finite and >= 0, got {a}"),
                ));
            }
        }
        out
    }
}

/// Smoothing applied before thresholding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Smoothing {
    /// Trailing simple moving average over `window` samples.
    Sma {
        window: usize,
    },
    Raw,
}

impl Smoothing {
    pub const DEFAULT_WINDOW: usize = 10;

    /// The default for a sampling regime: SMA(10) when continuous, raw when discrete.
    pub fn default_for(mode: SeriesMode) -> Self {
        match mode {
            SeriesMode::Continuous => Smoothing::Sma {
                window: Self::DEFAULT_WINDOW,
            },
            SeriesMode::Discrete => Smoothing::Raw,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DetectionPolicy {
    /// Number of consecutive samples at or above threshold required to fire.
    pub min_consecutive: usize,
}

impl Default for DetectionPolicy {
    fn default() -> Self {
        DetectionPolicy { min_consecutive: 1 }
    }
}

/// A calibrated recognizer, persisted as JSON between invocations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecognizerProfile {
    pub prompt_pair: PromptPair,
    pub smoothing: Smoothing,
    pub threshold: f64,
    pub detection_policy: DetectionPolicy,
    pub temperature: f64,
}

impl RecognizerProfile {
    pub fn new(
        prompt_pair: PromptPair,
        smoothing: Smoothing,
        threshold: f64,
        detection_policy: DetectionPolicy,
        temperature: f64,
    ) -> Result<Self, ModelError> {
        let profile = RecognizerProfile {
            prompt_pair,
            smoothing,
            threshold,
            detection_policy,
            temperature,
        };
        let violations = profile.violations("profile");
        checked(profile, "recognizer profile", violations)
    }

    pub fn violations(&self, path: &str) -> Vec<Violation> {
        let mut out = self.prompt_pair.violations(&format!("{path}.prompt_pair"));
        if !(0.0..=1.0).contains(&self.threshold) {
            out.push(Violation::new(
                format!("{path}.threshold"),
                format!("threshold must lie in [0, 1], got {}", self.threshold),
            ));
        }
        if let Smoothing::Sma { window: 0 } = self.smoothing {
            out.push(Violation::new(
                format!("{path}.smoothing.window"),
                "window must be >= 1",
            ));
        }
        if self.detection_policy.min_consecutive == 0 {
            out.push(Violation::new(
                format!("{path}.detection_policy.min_consecutive"),
                "min_consecutive must be >= 1",
            ));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            out.push(Violation::new(
                format!("{path}.temperature"),
                format!(
                    "temperature must be a positive real, got {}",
                    self.temperature
                ),
            ));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionStatus {
    Detected,
    NotDetected,
}

/// Outcome of running a recognizer on one session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecognitionReport {
    pub session_id: String,
    pub detected_time: Option<f64>,
    pub annotation_time: Option<f64>,
    /// Detected minus annotated, in seconds.
    pub diff_seconds: Option<f64>,
    pub abs_diff_seconds: Option<f64>,
    pub status: DetectionStatus,
}
