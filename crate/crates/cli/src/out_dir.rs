use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// Creates `path`, or accepts it when it is empty. A non-empty directory
/// needs `force`.
pub fn prepare(path: &Path, force: bool) -> Result<PathBuf> {
    match fs::create_dir(path) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
            if !path.is_dir() {
                bail!("{} exists and is not a directory", path.display());
            }
            let non_empty = fs::read_dir(path)
                .with_context(|| format!("reading {}", path.display()))?
                .next()
                .is_some();
            if non_empty && !force {
                bail!("{} is not empty; pass --force to write into it", path.display());
            }
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        }
        Err(e) => return Err(e).with_context(|| format!("creating {}", path.display())),
    }
    Ok(path.to_path_buf())
}
