//! Batch front end for svsprep: configuration, manifests and the commands
//! behind the `svsprep` binary.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::Path;

use anyhow::Result;
use svsprep::dsp::DspError;
use svsprep::formats::FormatError;
use svsprep::lexicon::LexiconError;
use svsprep::metrics::MetricsError;
use svsprep::pseudo::PseudoError;
use svsprep::score::ScoreError;

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Exit status for bugs and failures writing outputs.
pub const EXIT_INTERNAL: i32 = 1;
/// Exit status for bad input: unreadable, malformed or failing validation.
pub const EXIT_INPUT: i32 = 2;

/// A problem with what the user supplied.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct InputError(pub String);

/// Map an error chain to the process exit status.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<InputError>()
            || cause.is::<LexiconError>()
            || cause.is::<FormatError>()
            || cause.is::<PseudoError>()
            || cause.is::<MetricsError>()
            || cause.is::<serde_json::Error>()
        {
            return EXIT_INPUT;
        }
        if let Some(e) = cause.downcast_ref::<ScoreError>() {
            return if matches!(e, ScoreError::Internal(_)) { EXIT_INTERNAL } else { EXIT_INPUT };
        }
        if let Some(e) = cause.downcast_ref::<DspError>() {
            return if matches!(e, DspError::Io(_)) { EXIT_INTERNAL } else { EXIT_INPUT };
        }
    }
    EXIT_INTERNAL
}

/// Read a text input, reporting failure as an input error.
pub fn read_input(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())).into())
}

/// Per-utterance seed: FNV-1a over the run seed and the utterance id, so a
/// file's randomness does not depend on which worker handles it.
pub fn utterance_seed(seed: u64, utterance_id: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    seed.to_le_bytes()
        .iter()
        .chain(utterance_id.as_bytes())
        .fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}

/// Map `f` over `items` on `workers` threads, keeping input order.
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if workers <= 1 {
        return Ok(items.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}

/// Utterance ids become file names, so they may not name other directories.
pub fn check_file_stem(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && !id.chars().any(|c| matches!(c, '/' | '\\' | '\0') || c.is_control());
    if ok {
        Ok(())
    } else {
        Err(InputError(format!("utterance id `{id}` cannot be used as a file name")).into())
    }
}
