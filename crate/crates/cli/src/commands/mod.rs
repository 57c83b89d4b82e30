//! One module per subcommand. Each takes resolved inputs and returns what
//! the binary prints or writes, so the commands can be driven in-process.

pub mod adapt;
pub mod eval;
pub mod g2p;
pub mod plan;
pub mod pseudo;
pub mod transcode;

use std::path::Path;

use anyhow::{Context, Result};

/// Write `text` to `path`, creating parent directories.
pub fn write_output(path: &Path, text: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
