//! Deferred output files: commands compute everything first, then write.

use std::fs;
use std::path::{Path, PathBuf};

use dose_core::scores::write_scores;
use dose_core::{write_stat_table, DoseError, ScoreVector, StatTable};
use serde::Serialize;

pub enum Artifact {
    Table(String, StatTable),
    Scores(String, ScoreVector),
    Text(String, String),
}

#[derive(Default)]
pub struct Artifacts(Vec<Artifact>);

impl Artifacts {
    pub fn table(&mut self, name: &str, t: StatTable) {
        self.0.push(Artifact::Table(name.into(), t));
    }

    pub fn scores(&mut self, name: &str, s: ScoreVector) {
        self.0.push(Artifact::Scores(name.into(), s));
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), DoseError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.0.push(Artifact::Text(name.into(), text));
        Ok(())
    }

    pub fn text(&mut self, name: &str, text: String) {
        self.0.push(Artifact::Text(name.into(), text));
    }

    pub fn names(&self) -> Vec<&str> {
        self.0
            .iter()
            .map(|a| match a {
                Artifact::Table(n, _) | Artifact::Scores(n, _) | Artifact::Text(n, _) => n.as_str(),
            })
            .collect()
    }

    /// Write every artifact under `dir`, returning the paths written.
    pub fn write(self, dir: &Path) -> Result<Vec<PathBuf>, DoseError> {
        fs::create_dir_all(dir).map_err(|e| DoseError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let mut written = Vec::new();
        for a in self.0 {
            let path = match &a {
                Artifact::Table(n, _) | Artifact::Scores(n, _) | Artifact::Text(n, _) => dir.join(n),
            };
            match a {
                Artifact::Table(_, t) => write_stat_table(&t, &path)?,
                Artifact::Scores(_, s) => write_scores(&s, &path)?,
                Artifact::Text(_, text) => fs::write(&path, text).map_err(|e| DoseError::Io {
                    path: path.clone(),
                    source: e,
                })?,
            }
            written.push(path);
        }
        Ok(written)
    }
}

/// Render rows as CSV text with `\n` line endings.
pub fn csv_text<I, R>(header: &[&str], rows: I) -> Result<String, DoseError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.into_iter().collect::<Vec<_>>())?;
    }
    let bytes = w.into_inner().map_err(|e| DoseError::Io {
        path: PathBuf::from("<memory>"),
        source: e.into_error(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
