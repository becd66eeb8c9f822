use crate::args::{
    CalibrateArgs, CatalogArgs, Cli, Command, CompareArgs, DetectArgs, ProtocolArgs, SimulateArgs,
};
use crate::error::{CliError, Result};
use cookstate_core::model::{
    load_catalog_file, load_prompt_catalog, validate_manifest, DetectionPolicy, PromptPair,
    RecognizerProfile, ScoreSeries, SeriesMode, SessionManifest, Smoothing, StateChangeKind,
};
use cookstate_core::recognizer::{
    calibrate_threshold, detect_change, evaluate, run_protocol, select_prompt, PromptRanking,
    ProtocolConfig, ProtocolSession,
};
use cookstate_core::scoring::{read_score_file, scores_to_jsonl, ScoreMap};
use cookstate_core::signal::degree_series;
use cookstate_core::synthgen::{generate_session, SynthSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ComparePrompts(a) => compare_prompts(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Detect(a) => detect(a),
        Command::Protocol(a) => protocol(a),
        Command::Simulate(a) => simulate(a),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::at(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::at(path, e))
}

fn to_json(value: &impl Serialize) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn write_out(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

/// Writes to `out`, or to stdout when no path was given.
fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(p) => write_out(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn load_scores(path: &Path) -> Result<ScoreMap> {
    read_score_file(path).map_err(|e| CliError::at(path, e))
}

fn check_params(window: usize, temperature: f64, min_consecutive: usize) -> Result<()> {
    if window == 0 {
        return Err(CliError::user("--window must be >= 1"));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(CliError::user("--temperature must be a positive real"));
    }
    if min_consecutive == 0 {
        return Err(CliError::user("--min-consecutive must be >= 1"));
    }
    Ok(())
}

fn check_manifest(path: &Path, manifest: &SessionManifest, series: &[ScoreSeries]) -> Result<()> {
    let report = validate_manifest(manifest, series);
    if report.is_valid() {
        return Ok(());
    }
    let lines: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
    Err(CliError::at(path, lines.join("; ")))
}

fn catalog(args: &CatalogArgs) -> Result<BTreeMap<String, PromptPair>> {
    let pairs = match (&args.catalog, args.kind) {
        (Some(path), _) => load_catalog_file(path).map_err(|e| CliError::at(path, e))?,
        (None, Some(kind)) => load_prompt_catalog(kind),
        (None, None) => StateChangeKind::ALL
            .into_iter()
            .flat_map(load_prompt_catalog)
            .collect(),
    };
    Ok(pairs.into_iter().map(|p| (p.id.clone(), p)).collect())
}

fn ranking_table(ranking: &PromptRanking, pairs: &BTreeMap<String, PromptPair>) -> String {
    let labels: Vec<String> = ranking
        .entries
        .iter()
        .map(|e| {
            pairs
                .get(&e.prompt_pair_id)
                .map_or_else(|| e.prompt_pair_id.clone(), |p| p.label())
        })
        .collect();
    let width = labels
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(0)
        .max("Prompt".len());
    let mut out = format!(
        "  {:<width$}  {:>9}  Positive / Negative\n",
        "Prompt", "LA Slope"
    );
    for (entry, label) in ranking.entries.iter().zip(&labels) {
        let mark = if entry.prompt_pair_id == ranking.chosen {
            '*'
        } else {
            ' '
        };
        let texts = pairs
            .get(&entry.prompt_pair_id)
            .map_or_else(String::new, |p| format!("{} / {}", p.positive, p.negative));
        let _ = writeln!(
            out,
            "{mark} {label:<width$}  {:>9.5}  {texts}",
            entry.fit.slope
        );
    }
    out
}

fn compare_prompts(args: CompareArgs) -> Result<()> {
    check_params(1, args.temperature, 1)?;
    let pairs = catalog(&args.catalog)?;
    let scores = load_scores(&args.scores)?;
    if scores.is_empty() {
        return Err(CliError::at(&args.scores, "no series found"));
    }
    let degrees = scores
        .iter()
        .map(|(id, s)| {
            degree_series(s, args.temperature)
                .map(|d| (id.clone(), d))
                .map_err(|e| CliError::at(&args.scores, format!("{id}: {e}")))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    let ranking = select_prompt(&degrees).map_err(|e| CliError::at(&args.scores, e))?;
    let json = to_json(&ranking)?;
    if let Some(out) = &args.out {
        write_out(out, &json)?;
    }
    print!("{}", ranking_table(&ranking, &pairs));
    Ok(())
}

fn calibrate(args: CalibrateArgs) -> Result<()> {
    check_params(args.window, args.temperature, args.min_consecutive)?;
    let mode = SeriesMode::from(args.mode);
    let manifest: SessionManifest = read_json(&args.manifest)?;
    let annotation = manifest.annotation_time.ok_or_else(|| {
        CliError::at(
            &args.manifest,
            "manifest has no annotation_time; cannot calibrate",
        )
    })?;
    let scores = load_scores(&args.scores)?;
    let series: Vec<ScoreSeries> = scores.values().cloned().collect();
    check_manifest(&args.manifest, &manifest, &series)?;

    let pairs = catalog(&args.catalog)?;
    let pair = pairs
        .get(&args.pair_id)
        .cloned()
        .ok_or_else(|| CliError::user(format!("unknown prompt pair {}", args.pair_id)))?;
    let mut raw = scores.get(&args.pair_id).cloned().ok_or_else(|| {
        CliError::at(
            &args.scores,
            format!("no scores for prompt pair {}", args.pair_id),
        )
    })?;
    raw.mode = mode;
    let degrees =
        degree_series(&raw, args.temperature).map_err(|e| CliError::at(&args.scores, e))?;
    let smoothing = match mode {
        SeriesMode::Continuous => Smoothing::Sma {
            window: args.window,
        },
        SeriesMode::Discrete => Smoothing::Raw,
    };
    let threshold = calibrate_threshold(&degrees, smoothing, annotation).map_err(CliError::user)?;
    let profile = RecognizerProfile::new(
        pair,
        smoothing,
        threshold,
        DetectionPolicy {
            min_consecutive: args.min_consecutive,
        },
        args.temperature,
    )
    .map_err(CliError::user)?;
    emit(args.out.as_deref(), &to_json(&profile)?)
}

fn detect(args: DetectArgs) -> Result<()> {
    let profile: RecognizerProfile = read_json(&args.profile)?;
    let violations = profile.violations("profile");
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(CliError::at(&args.profile, lines.join("; ")));
    }
    let scores = load_scores(&args.scores)?;
    let manifest = match &args.manifest {
        Some(path) => {
            let m: SessionManifest = read_json(path)?;
            let series: Vec<ScoreSeries> = scores.values().cloned().collect();
            check_manifest(path, &m, &series)?;
            Some(m)
        }
        None => None,
    };
    let id = &profile.prompt_pair.id;
    let mut raw = scores
        .get(id)
        .cloned()
        .ok_or_else(|| CliError::at(&args.scores, format!("no scores for prompt pair {id}")))?;
    raw.mode = args.mode.into();
    let degrees =
        degree_series(&raw, profile.temperature).map_err(|e| CliError::at(&args.scores, e))?;
    let detected = detect_change(&degrees, &profile).map_err(|e| CliError::at(&args.scores, e))?;
    let session_id = match &manifest {
        Some(m) => m.session_id.clone(),
        None => args.scores.file_stem().map_or_else(
            || "session".to_string(),
            |s| s.to_string_lossy().into_owned(),
        ),
    };
    let report = evaluate(
        &session_id,
        detected,
        manifest.and_then(|m| m.annotation_time),
    );
    emit(args.out.as_deref(), &to_json(&report)?)
}

/// Protocol config. Manifest paths are relative to the config file, score
/// sources relative to their manifest.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProtocolFile {
    calibration: Vec<PathBuf>,
    #[serde(default)]
    test: Vec<PathBuf>,
    /// Candidate prompt pair ids; defaults to the bundled catalog for the
    /// sessions' kind and gaze area.
    #[serde(default)]
    candidates: Option<Vec<String>>,
    #[serde(default)]
    catalog: Option<PathBuf>,
    #[serde(default)]
    temperature: Option<f64>,
    #[serde(default)]
    window: Option<usize>,
    #[serde(default)]
    min_consecutive: Option<usize>,
    #[serde(default)]
    mode: Option<SeriesMode>,
}

fn load_session(manifest_path: &Path) -> Result<ProtocolSession> {
    let manifest: SessionManifest = read_json(manifest_path)?;
    let source = &manifest.score_source;
    if source.starts_with("tcp://") || source.starts_with("unix://") {
        return Err(CliError::at(
            manifest_path,
            format!(
                "live score source {source} is not supported here; export a JSONL score file first"
            ),
        ));
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let scores_path = base.join(source);
    let scores = load_scores(&scores_path)?;
    let series: Vec<ScoreSeries> = scores.values().cloned().collect();
    check_manifest(manifest_path, &manifest, &series)?;
    Ok(ProtocolSession { manifest, scores })
}

fn protocol(args: ProtocolArgs) -> Result<()> {
    let file: ProtocolFile = read_json(&args.config)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let defaults = ProtocolConfig::default();
    let config = ProtocolConfig {
        temperature: args
            .temperature
            .or(file.temperature)
            .unwrap_or(defaults.temperature),
        window: args.window.or(file.window).unwrap_or(defaults.window),
        min_consecutive: args
            .min_consecutive
            .or(file.min_consecutive)
            .unwrap_or(defaults.min_consecutive),
        mode: args
            .mode
            .map(SeriesMode::from)
            .or(file.mode)
            .unwrap_or(defaults.mode),
        execution: defaults.execution,
    };
    check_params(config.window, config.temperature, config.min_consecutive)?;

    let calibration = file
        .calibration
        .iter()
        .map(|p| load_session(&base.join(p)))
        .collect::<Result<Vec<_>>>()?;
    let test = file
        .test
        .iter()
        .map(|p| load_session(&base.join(p)))
        .collect::<Result<Vec<_>>>()?;
    let first = calibration
        .first()
        .ok_or_else(|| CliError::at(&args.config, "no calibration sessions"))?;
    let kind = first.manifest.state_change_kind;
    let gaze = first.manifest.gaze_area;

    let pool: Vec<PromptPair> = match &file.catalog {
        Some(p) => {
            let path = base.join(p);
            load_catalog_file(&path).map_err(|e| CliError::at(&path, e))?
        }
        None => load_prompt_catalog(kind),
    };
    let candidates: Vec<PromptPair> = match &file.candidates {
        Some(ids) => {
            ids.iter()
                .map(|id| {
                    pool.iter().find(|p| &p.id == id).cloned().ok_or_else(|| {
                        CliError::at(&args.config, format!("unknown prompt pair {id}"))
                    })
                })
                .collect::<Result<_>>()?
        }
        None => pool.into_iter().filter(|p| p.gaze_area == gaze).collect(),
    };

    let report = run_protocol(&calibration, &test, &candidates, &config).map_err(CliError::user)?;
    let json = to_json(&report)?;
    if let Some(out) = &args.out {
        write_out(out, &json)?;
    }
    print!("{}", report.render_table());
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let spec: SynthSpec = read_json(&args.spec)?;
    let session = generate_session(&spec).map_err(|e| CliError::at(&args.spec, e))?;
    let manifest_json = to_json(&session.manifest)?;
    let jsonl = scores_to_jsonl(session.scores.values());
    if args.out.exists() && !args.out.is_dir() {
        return Err(CliError::at(&args.out, "exists and is not a directory"));
    }
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", args.out.display())))?;
    let id = &session.manifest.session_id;
    write_out(&args.out.join(&session.manifest.score_source), &jsonl)?;
    write_out(
        &args.out.join(format!("{id}.manifest.json")),
        &manifest_json,
    )
}
