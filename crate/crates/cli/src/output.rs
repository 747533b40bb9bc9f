use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};

/// Formats a float with 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Csv {
    path: PathBuf,
    out: BufWriter<File>,
    rows: usize,
}

impl Csv {
    pub fn create(path: PathBuf, header: &[&str]) -> Result<Self> {
        let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{}", header.join(","))?;
        Ok(Self { path, out, rows: 0 })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        writeln!(self.out, "{}", fields.join(","))?;
        self.rows += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(PathBuf, usize)> {
        self.out.flush()?;
        Ok((self.path, self.rows))
    }
}

/// Collects parameters, residuals and output files, then writes `<command>.json`.
pub struct Run {
    dir: PathBuf,
    command: &'static str,
    parameters: Map<String, Value>,
    results: Map<String, Value>,
    residuals: Map<String, Value>,
    violations: Vec<String>,
    files: Vec<Value>,
}

impl Run {
    pub fn new(dir: &Path, command: &'static str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            parameters: Map::new(),
            results: Map::new(),
            residuals: Map::new(),
            violations: Vec::new(),
            files: Vec::new(),
        })
    }

    pub fn csv(&self, stem: &str, header: &[&str]) -> Result<Csv> {
        Csv::create(self.dir.join(format!("{stem}.csv")), header)
    }

    pub fn param(&mut self, key: &str, v: impl Into<Value>) {
        self.parameters.insert(key.into(), v.into());
    }

    pub fn result(&mut self, key: &str, v: impl Into<Value>) {
        self.results.insert(key.into(), v.into());
    }

    /// Records a residual and flags it when it exceeds `tol`.
    pub fn residual(&mut self, key: &str, value: f64, tol: f64) {
        self.residuals.insert(key.into(), json!({ "value": value, "tolerance": tol }));
        if !(value <= tol) {
            self.violations.push(format!("{key} = {value:e} exceeds {tol:e}"));
        }
    }

    pub fn attach(&mut self, csv: Csv) -> Result<()> {
        let (path, rows) = csv.finish()?;
        self.files.push(json!({ "path": path.display().to_string(), "rows": rows }));
        Ok(())
    }

    /// Writes the summary; returns the violations.
    pub fn finish(self) -> Result<Vec<String>> {
        let summary = json!({
            "command": self.command,
            "parameters": self.parameters,
            "results": self.results,
            "residuals": self.residuals,
            "violations": self.violations,
            "outputs": self.files,
        });
        let path = self.dir.join(format!("{}.json", self.command));
        let text = serde_json::to_string_pretty(&summary)?;
        fs::write(&path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
        Ok(self.violations)
    }
}
