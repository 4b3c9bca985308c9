//! Output files are written to temporaries beside their targets and renamed
//! into place only after every file of a command has been produced.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult};

#[derive(Default)]
pub struct Staged {
    files: Vec<(NamedTempFile, PathBuf)>,
}

impl Staged {
    pub fn new() -> Self {
        Staged::default()
    }

    pub fn add<F>(&mut self, path: &Path, write: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<&mut File>) -> CliResult<()>,
    {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let ctx = path.display().to_string();
        let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(&ctx, e))?;
        {
            let mut w = BufWriter::new(tmp.as_file_mut());
            write(&mut w)?;
            w.flush().map_err(|e| CliError::io(&ctx, e))?;
        }
        self.files.push((tmp, path.to_path_buf()));
        Ok(())
    }

    pub fn add_json<T: Serialize>(&mut self, path: &Path, value: &T) -> CliResult<()> {
        self.add(path, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(|e| CliError::io("json", e))?;
            writeln!(w).map_err(|e| CliError::io("json", e))
        })
    }

    pub fn commit(self) -> CliResult<()> {
        for (tmp, path) in self.files {
            tmp.persist(&path).map_err(|e| CliError::io(&path.display().to_string(), e.error))?;
        }
        Ok(())
    }
}
