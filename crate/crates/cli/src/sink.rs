//! Where artifacts go. With an output directory every artifact is a file
//! and stdout only lists what was written; without one the primary
//! artifact goes to stdout and summaries to stderr.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::CliResult;

pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> CliResult<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d)?;
        }
        Ok(Sink { dir })
    }

    /// Always writes to a file; experiments need a directory even without --out.
    pub fn dir_or_cwd(&self) -> &Path {
        self.dir.as_deref().unwrap_or(Path::new("."))
    }

    pub fn primary<F>(&self, name: &str, write: F) -> CliResult<()>
    where
        F: FnOnce(&mut dyn Write) -> CliResult<()>,
    {
        match &self.dir {
            Some(d) => write_file(&d.join(name), write),
            None => {
                let stdout = io::stdout();
                let mut lock = stdout.lock();
                write(&mut lock)?;
                lock.flush()?;
                Ok(())
            }
        }
    }

    pub fn summary(&self, name: &str, value: &serde_json::Value) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).expect("json values serialize");
        match &self.dir {
            Some(d) => write_file(&d.join(name), |w| Ok(writeln!(w, "{text}")?)),
            None => {
                eprintln!("{text}");
                Ok(())
            }
        }
    }

    /// A JSON document that is the primary artifact.
    pub fn json(&self, name: &str, value: &serde_json::Value) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).expect("json values serialize");
        self.primary(name, |w| Ok(writeln!(w, "{text}")?))
    }
}

pub fn write_file<F>(path: &Path, write: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> CliResult<()>,
{
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    write(&mut w)?;
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}
