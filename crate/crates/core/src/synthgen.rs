//! Synthetic sessions with a known change time.
//!
//! The degree trajectory is a logistic step from `pre_level` to `post_level`
//! centred on `t_change`, plus Gaussian noise, clipped to the unit interval.
//! Degrees are turned back into raw similarities by inverting the softmax
//! with `sim_neg = 0`, so the output goes through exactly the same path as
//! real scorer output.

use crate::model::{
    load_prompt_catalog, GazeArea, ModelError, ScoreSample, ScoreSeries, SeriesMode,
    SessionManifest, StateChangeKind, Violation,
};
use crate::scoring::ScoreMap;
use crate::signal::{invert_degree, DEFAULT_TEMPERATURE};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Degrees are clipped to `[CLIP, 1 - CLIP]` so the logit stays finite.
pub const CLIP: f64 = 1e-9;

fn default_session_id() -> String {
    "synthetic".into()
}

fn default_kind() -> StateChangeKind {
    StateChangeKind::Vaporization
}

fn default_gaze() -> GazeArea {
    GazeArea::EntireVessel
}

fn default_heat_power() -> String {
    "same".into()
}

fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    #[serde(default = "default_session_id")]
    pub session_id: String,
    #[serde(default = "default_kind")]
    pub state_change_kind: StateChangeKind,
    #[serde(default = "default_gaze")]
    pub gaze_area: GazeArea,
    #[serde(default = "default_heat_power")]
    pub heat_power: String,
    pub t_change: f64,
    pub duration: f64,
    pub sampling_period: f64,
    pub pre_level: f64,
    pub post_level: f64,
    pub transition_width: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    #[serde(default)]
    pub mode: SeriesMode,
    /// Swing multiplier per candidate series; 1 reproduces the nominal
    /// pre-to-post swing, 0 gives a flat series.
    pub slope_quality: Vec<f64>,
    /// Series ids, one per multiplier. Defaults to the bundled catalog ids for
    /// the kind and gaze area, in template-form order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_pair_ids: Option<Vec<String>>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

impl SynthSpec {
    /// Sample times `0, p, 2p, ...` up to and including `duration`.
    pub fn times(&self) -> Vec<f64> {
        let n = (self.duration / self.sampling_period + 1e-9).floor() as usize + 1;
        (0..n).map(|i| i as f64 * self.sampling_period).collect()
    }

    /// Noise-free degree of the candidate with swing multiplier `multiplier`.
    pub fn analytic_degree(&self, multiplier: f64, t: f64) -> f64 {
        let x = (t - self.t_change) / self.transition_width;
        self.pre_level + multiplier * (self.post_level - self.pre_level) / (1.0 + (-x).exp())
    }

    pub fn series_ids(&self) -> Vec<String> {
        match &self.prompt_pair_ids {
            Some(ids) => ids.clone(),
            None => load_prompt_catalog(self.state_change_kind)
                .into_iter()
                .filter(|p| p.gaze_area == self.gaze_area)
                .map(|p| p.id)
                .take(self.slope_quality.len())
                .collect(),
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |path: &str, msg: String| out.push(Violation::new(path, msg));
        let finite = [
            ("t_change", self.t_change),
            ("duration", self.duration),
            ("sampling_period", self.sampling_period),
            ("pre_level", self.pre_level),
            ("post_level", self.post_level),
            ("transition_width", self.transition_width),
            ("noise_sigma", self.noise_sigma),
            ("temperature", self.temperature),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                bad(name, format!("{name} must be finite"));
            }
        }
        if !(self.t_change > 0.0 && self.t_change < self.duration) {
            bad("t_change", "must satisfy 0 < t_change < duration".into());
        }
        if !(self.sampling_period > 0.0) {
            bad("sampling_period", "must be > 0".into());
        } else if self.duration.is_finite() {
            let last = *self.times().last().expect("at least one sample");
            if self.t_change > last {
                bad(
                    "t_change",
                    format!("must not follow the last sample at {last}"),
                );
            }
        }
        if !(self.pre_level < self.post_level) {
            bad("pre_level", "must be below post_level".into());
        }
        if !(0.0..=1.0).contains(&self.pre_level) || !(0.0..=1.0).contains(&self.post_level) {
            bad("post_level", "levels must lie in [0, 1]".into());
        }
        if !(self.transition_width > 0.0) {
            bad("transition_width", "must be > 0".into());
        }
        if !(self.noise_sigma >= 0.0) {
            bad("noise_sigma", "must be >= 0".into());
        }
        if !(self.temperature > 0.0) {
            bad("temperature", "must be > 0".into());
        }
        if self.slope_quality.is_empty() {
            bad("slope_quality", "needs at least one multiplier".into());
        }
        if self.slope_quality.iter().any(|m| !m.is_finite()) {
            bad("slope_quality", "multipliers must be finite".into());
        }
        if self.session_id.trim().is_empty() {
            bad("session_id", "must be non-empty".into());
        }
        let ids = self.series_ids();
        if ids.len() != self.slope_quality.len() {
            bad(
                "prompt_pair_ids",
                format!(
                    "{} ids for {} multipliers",
                    ids.len(),
                    self.slope_quality.len()
                ),
            );
        }
        if ids.iter().collect::<BTreeSet<_>>().len() != ids.len() {
            bad("prompt_pair_ids", "ids must be unique".into());
        }
        out
    }
}

/// Generator output.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSession {
    pub manifest: SessionManifest,
    pub scores: ScoreMap,
    /// Ground-truth change time.
    pub t_change: f64,
}

pub fn generate_session(spec: &SynthSpec) -> Result<SyntheticSession, ModelError> {
    let violations = spec.violations();
    if !violations.is_empty() {
        return Err(ModelError::Invalid {
            what: "synth spec",
            violations,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = (spec.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, spec.noise_sigma).expect("sigma is finite and positive"));
    let times = spec.times();

    let mut scores = ScoreMap::new();
    for (id, &multiplier) in spec.series_ids().into_iter().zip(&spec.slope_quality) {
        let samples = times
            .iter()
            .map(|&t| {
                let mut d = spec.analytic_degree(multiplier, t);
                if let Some(n) = &noise {
                    d += n.sample(&mut rng);
                }
                let d = d.clamp(CLIP, 1.0 - CLIP);
                ScoreSample::new(t, invert_degree(d, spec.temperature), 0.0)
            })
            .collect();
        let series = ScoreSeries::new(id.clone(), samples, spec.mode)?;
        scores.insert(id, series);
    }

    Ok(SyntheticSession {
        manifest: SessionManifest {
            session_id: spec.session_id.clone(),
            state_change_kind: spec.state_change_kind,
            heat_power: spec.heat_power.clone(),
            annotation_time: Some(spec.t_change),
            score_source: format!("{}.jsonl", spec.session_id),
            gaze_area: spec.gaze_area,
        },
        scores,
        t_change: spec.t_change,
    })
}
