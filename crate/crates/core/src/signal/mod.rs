//! Numeric kernel: degree of state change, least-squares line fit and the
//! trailing simple moving average.

mod exact;

pub use exact::ExactSum;

use crate::model::{ModelError, ScoreSample, ScoreSeries, SeriesMode, Violation};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Logit scale applied to raw similarities when none is configured.
pub const DEFAULT_TEMPERATURE: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("temperature must be a positive finite real, got {0}")]
    InvalidTemperature(f64),
    #[error(transparent)]
    InvalidSeries(#[from] ModelError),
    #[error("line fit needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate abscissa: all t identical")]
    DegenerateAbscissa,
    #[error("window must be >= 1")]
    ZeroWindow,
    #[error("series shorter than window ({len} samples, window {window})")]
    ShorterThanWindow { len: usize, window: usize },
}

/// Two-class softmax probability that the frame matches the positive
/// description.
///
/// Evaluated as the logistic of the scaled difference, which is the
/// max-shifted softmax `exp(τa) / (exp(τa) + exp(τb))` with one exponential
/// left. It never overflows: a huge negative margin underflows to 0 and a huge
/// positive one rounds to 1.
pub fn degree(sample: &ScoreSample, temperature: f64) -> f64 {
    debug_assert!(temperature > 0.0);
    1.0 / (1.0 + (temperature * (sample.sim_neg - sample.sim_pos)).exp())
}

/// Inverse of [`degree`] with `sim_neg` pinned to zero.
///
/// Returns the `sim_pos` for which `degree` yields `p`. `p` must lie strictly
/// inside (0, 1).
pub fn invert_degree(p: f64, temperature: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    (p.ln() - (-p).ln_1p()) / temperature
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreePoint {
    pub t: f64,
    pub degree: f64,
}

/// Degree-of-state-change values over time for one prompt pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DegreeSeriesRepr")]
pub struct DegreeSeries {
    prompt_pair_id: String,
    points: Vec<DegreePoint>,
    mode: SeriesMode,
}

#[derive(Deserialize)]
struct DegreeSeriesRepr {
    prompt_pair_id: String,
    points: Vec<DegreePoint>,
    mode: SeriesMode,
}

impl TryFrom<DegreeSeriesRepr> for DegreeSeries {
    type Error = ModelError;

    fn try_from(r: DegreeSeriesRepr) -> Result<Self, Self::Error> {
        DegreeSeries::new(r.prompt_pair_id, r.points, r.mode)
    }
}

impl DegreeSeries {
    /// Checked constructor: non-empty, every degree in [0, 1], t finite and
    /// strictly increasing.
    pub fn new(
        prompt_pair_id: impl Into<String>,
        points: Vec<DegreePoint>,
        mode: SeriesMode,
    ) -> Result<Self, ModelError> {
        let mut violations = Vec::new();
        if points.is_empty() {
            violations.push(Violation::new("points", "series non-empty"));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.t.is_finite() {
                violations.push(Violation::new(format!("points[{i}].t"), "t must be finite"));
            }
            if !(0.0..=1.0).contains(&p.degree) {
                violations.push(Violation::new(
                    format!("points[{i}].degree"),
                    format!("degree must lie in [0, 1], got {}", p.degree),
                ));
            }
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                violations.push(Violation::new(
                    format!("points[{}].t", i + 1),
                    "t must be strictly increasing",
                ));
            }
        }
        if !violations.is_empty() {
            return Err(ModelError::Invalid {
                what: "degree series",
                violations,
            });
        }
        Ok(DegreeSeries {
            prompt_pair_id: prompt_pair_id.into(),
            points,
            mode,
        })
    }

    /// Builds a series from parallel `(t, degree)` pairs.
    pub fn from_pairs(
        prompt_pair_id: impl Into<String>,
        pairs: impl IntoIterator<Item = (f64, f64)>,
        mode: SeriesMode,
    ) -> Result<Self, ModelError> {
        let points = pairs
            .into_iter()
            .map(|(t, degree)| DegreePoint { t, degree })
            .collect();
        DegreeSeries::new(prompt_pair_id, points, mode)
    }

    pub fn prompt_pair_id(&self) -> &str {
        &self.prompt_pair_id
    }

    pub fn points(&self) -> &[DegreePoint] {
        &self.points
    }

    pub fn mode(&self) -> SeriesMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.t)
    }

    pub fn degrees(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.degree)
    }

    /// Same series with the degrees replaced by `f(degree)`. The result is
    /// re-validated.
    pub fn map_degrees(&self, f: impl Fn(f64) -> f64) -> Result<Self, ModelError> {
        let points = self
            .points
            .iter()
            .map(|p| DegreePoint {
                t: p.t,
                degree: f(p.degree),
            })
            .collect();
        DegreeSeries::new(self.prompt_pair_id.clone(), points, self.mode)
    }
}

fn check_temperature(temperature: f64) -> Result<(), SignalError> {
    if temperature.is_finite() && temperature > 0.0 {
        Ok(())
    } else {
        Err(SignalError::InvalidTemperature(temperature))
    }
}

/// Applies [`degree`] to every sample, keeping times and mode.
pub fn degree_series(series: &ScoreSeries, temperature: f64) -> Result<DegreeSeries, SignalError> {
    check_temperature(temperature)?;
    let violations = series.violations("series");
    if !violations.is_empty() {
        return Err(ModelError::Invalid {
            what: "score series",
            violations,
        }
        .into());
    }
    let points = series
        .samples
        .iter()
        .map(|s| DegreePoint {
            t: s.t,
            degree: degree(s, temperature),
        })
        .collect();
    Ok(DegreeSeries::new(
        series.prompt_pair_id.clone(),
        points,
        series.mode,
    )?)
}

/// Ordinary least-squares line through a degree series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    /// Degree units per second.
    pub slope: f64,
    pub intercept: f64,
    pub n: usize,
}

impl LinearFit {
    pub fn predict(&self, t: f64) -> f64 {
        self.intercept + self.slope * t
    }
}

/// Least-squares fit of `y` on `x`, computed from centered sums.
pub fn fit_line(points: impl IntoIterator<Item = (f64, f64)>) -> Result<LinearFit, SignalError> {
    let points: Vec<(f64, f64)> = points.into_iter().collect();
    let n = points.len();
    if n < 2 {
        return Err(SignalError::TooFewPoints(n));
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (sxx, sxy) = points.iter().fold((0.0, 0.0), |(sxx, sxy), &(x, y)| {
        let dx = x - mean_x;
        (sxx + dx * dx, sxy + dx * (y - mean_y))
    });
    if sxx == 0.0 {
        return Err(SignalError::DegenerateAbscissa);
    }
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope,
        intercept: mean_y - slope * mean_x,
        n,
    })
}

/// Least-squares line through `(t, degree)`; `t` in seconds as given.
pub fn linear_fit(series: &DegreeSeries) -> Result<LinearFit, SignalError> {
    fit_line(series.points.iter().map(|p| (p.t, p.degree)))
}

/// Trailing simple moving average.
///
/// Output point `i` is the mean of input degrees `i - window + 1 ..= i`,
/// stamped with the input's `t_i`; the first `window - 1` points are dropped.
/// Each mean is the correctly rounded value of the exact window mean, so a
/// constant window reproduces its value and results never leave the window's
/// [min, max].
pub fn sma(series: &DegreeSeries, window: usize) -> Result<DegreeSeries, SignalError> {
    if window == 0 {
        return Err(SignalError::ZeroWindow);
    }
    let len = series.points.len();
    if len < window {
        return Err(SignalError::ShorterThanWindow { len, window });
    }
    let mut sum = ExactSum::new();
    let mut out = Vec::with_capacity(len - window + 1);
    for (i, p) in series.points.iter().enumerate() {
        sum.add(p.degree);
        if i >= window {
            sum.add(-series.points[i - window].degree);
        }
        if i + 1 >= window {
            out.push(DegreePoint {
                t: p.t,
                degree: sum.mean(window),
            });
        }
    }
    Ok(DegreeSeries::new(
        series.prompt_pair_id.clone(),
        out,
        series.mode,
    )?)
}
