//! Output directory bookkeeping: CSV tables, raw files and the MANIFEST.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Files written by one run. Every file starts with the same provenance
/// comment so that artifacts can be matched to the config that made them.
pub struct Artifacts {
    dir: PathBuf,
    header: String,
    files: Vec<String>,
}

/// Shortest round-trip form, so equal runs give equal bytes.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

impl Artifacts {
    pub fn new(dir: &Path, config_hash: &str, seed: u64) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            header: format!("# config={config_hash} seed={seed}"),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// The `# config=<hash> seed=<seed>` line.
    pub fn header(&self) -> &str {
        &self.header
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Opens `name` for writing and records it in the manifest.
    pub fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        if !self.files.iter().any(|n| n == name) {
            self.files.push(name.to_string());
        }
        Ok(BufWriter::new(f))
    }

    /// Header comment, then a CSV table with the given column names.
    pub fn write_csv(&mut self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = self.create(name)?;
        writeln!(w, "{}", self.header)?;
        let mut c = csv::Writer::from_writer(w);
        c.write_record(columns)?;
        for r in rows {
            c.write_record(r)?;
        }
        c.flush()?;
        Ok(())
    }

    /// Writes `MANIFEST`: the files produced so far and how the run ended.
    pub fn finish(&self, failure: Option<(&str, &CliError)>) -> Result<(), CliError> {
        let path = self.dir.join("MANIFEST");
        let mut w = BufWriter::new(File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?);
        writeln!(w, "{}", self.header)?;
        match failure {
            None => writeln!(w, "status = ok")?,
            Some((stage, e)) => {
                writeln!(w, "status = failed")?;
                writeln!(w, "stage = {stage}")?;
                writeln!(w, "exit_code = {}", e.exit_code())?;
                writeln!(w, "error = {}", e.to_string().replace('\n', " "))?;
            }
        }
        for f in &self.files {
            writeln!(w, "file = {f}")?;
        }
        w.flush()?;
        Ok(())
    }
}
