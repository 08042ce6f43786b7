use std::fs;
use std::path::{Path, PathBuf};

/// Relative output paths are rooted at `CAPFEM_OUT` when it is set.
pub fn rooted(path: &Path) -> PathBuf {
    match std::env::var_os("CAPFEM_OUT") {
        Some(root) if path.is_relative() && !root.is_empty() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}

pub fn write(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, contents)
}
