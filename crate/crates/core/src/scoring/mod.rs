//! Score series acquisition: JSONL score files and live scoring through a
//! [`ScorerBackend`].

mod bridge;
mod file;
mod session;

pub use bridge::BridgeBackend;
pub use file::{
    read_score_file, read_scores, scores_to_jsonl, write_score_file, write_scores, LineError,
    ScoreFileError, ScoreMap,
};
pub use session::{
    score_session, BackendError, Crop, FramePolicy, ScoreOptions, ScoreRequest, ScorerBackend,
    ScoringError, Similarities,
};
