//! Output directory handling, CSV tables and JSON sidecars.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Destination directory of a run; refuses to replace existing files unless
/// `force` is set.
#[derive(Debug, Clone)]
pub struct OutputDir {
    dir: PathBuf,
    force: bool,
}

impl OutputDir {
    pub fn new(dir: PathBuf, force: bool) -> Self {
        Self { dir, force }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Fails before any work is done when one of `names` already exists
    /// and overwriting was not requested.
    pub fn check(&self, names: &[&str]) -> CliResult<()> {
        if self.force {
            return Ok(());
        }
        for name in names {
            let p = self.path(name);
            if p.exists() {
                return Err(CliError::Usage(format!(
                    "{} already exists; pass --force to overwrite",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    pub fn create(&self) -> CliResult<()> {
        fs::create_dir_all(&self.dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {}", self.dir.display(), e)))
    }
}

/// Shortest round-trip representation of a float.
pub fn num(x: f64) -> String {
    format!("{:?}", x)
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("cannot write {}: {}", path.display(), e)))
}

/// Sidecar recording the resolved configuration of a run.
pub fn sidecar(command: &str, config: Value, outputs: &[&str], threads: usize) -> Value {
    json!({
        "command": command,
        "version": VERSION,
        "threads": threads,
        "config": config,
        "outputs": outputs,
    })
}

/// A CSV table addressed by column name.
pub struct Table {
    path: PathBuf,
    columns: HashMap<String, usize>,
    pub rows: Vec<csv::StringRecord>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("cannot read {}: {}", path.display(), e)))?;
        let columns = r
            .headers()?
            .iter()
            .enumerate()
            .map(|(k, h)| (h.to_string(), k))
            .collect();
        let rows = r.records().collect::<Result<_, _>>()?;
        Ok(Self {
            path: path.to_path_buf(),
            columns,
            rows,
        })
    }

    fn cell<'a>(&self, row: &'a csv::StringRecord, column: &str) -> CliResult<&'a str> {
        let k = self
            .columns
            .get(column)
            .ok_or_else(|| CliError::Usage(format!("{} has no column '{}'", self.path.display(), column)))?;
        row.get(*k)
            .ok_or_else(|| CliError::Usage(format!("{}: short row", self.path.display())))
    }

    pub fn text<'a>(&self, row: &'a csv::StringRecord, column: &str) -> CliResult<&'a str> {
        self.cell(row, column)
    }

    pub fn float(&self, row: &csv::StringRecord, column: &str) -> CliResult<f64> {
        let s = self.cell(row, column)?;
        s.trim().parse().map_err(|_| {
            CliError::Usage(format!("{}: '{}' in column '{}' is not a number", self.path.display(), s, column))
        })
    }

    pub fn index(&self, row: &csv::StringRecord, column: &str) -> CliResult<usize> {
        let s = self.cell(row, column)?;
        s.trim().parse().map_err(|_| {
            CliError::Usage(format!("{}: '{}' in column '{}' is not an index", self.path.display(), s, column))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1e-300, -2.5e17, 1.0 / 3.0, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn refuses_to_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.csv"), "x\n").unwrap();
        let out = OutputDir::new(dir.path().to_path_buf(), false);
        assert!(out.check(&["b.csv"]).is_ok());
        assert!(matches!(out.check(&["a.csv"]), Err(CliError::Usage(_))));
        let forced = OutputDir::new(dir.path().to_path_buf(), true);
        assert!(forced.check(&["a.csv"]).is_ok());
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_csv(&p, &["i", "v"], &[vec!["0".into(), num(0.5)], vec!["1".into(), num(-2.0)]]).unwrap();
        let t = Table::read(&p).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.index(&t.rows[1], "i").unwrap(), 1);
        assert_eq!(t.float(&t.rows[1], "v").unwrap(), -2.0);
        assert!(t.float(&t.rows[0], "w").is_err());
    }
}
