//! Artifacts are buffered and written only once the whole command has
//! succeeded, each through a temporary file and a rename.

use std::path::{Path, PathBuf};

use crate::failure::{Failure, Kind};

#[derive(Default)]
pub struct Staged {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Staged {
    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((path.into(), bytes));
    }

    /// Buffers whatever `write` produces.
    pub fn add_with(&mut self, path: impl Into<PathBuf>, write: impl FnOnce(&mut Vec<u8>) -> rbce::Result<()>) -> Result<(), Failure> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.add(path, buf);
        Ok(())
    }

    pub fn commit(self) -> Result<Vec<PathBuf>, Failure> {
        let io = |p: &Path, e: std::io::Error| Failure::new(Kind::BadData, format!("cannot write {}: {e}", p.display()));
        let mut temps = Vec::with_capacity(self.files.len());
        for (path, bytes) in &self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
            }
            let tmp = path.with_extension(format!("{}.partial", path.extension().and_then(|s| s.to_str()).unwrap_or("")));
            if let Err(e) = std::fs::write(&tmp, bytes) {
                for t in &temps {
                    let _ = std::fs::remove_file(t);
                }
                return Err(io(&tmp, e));
            }
            temps.push(tmp);
        }
        for ((path, _), tmp) in self.files.iter().zip(&temps) {
            std::fs::rename(tmp, path).map_err(|e| io(path, e))?;
        }
        Ok(self.files.into_iter().map(|(p, _)| p).collect())
    }
}
