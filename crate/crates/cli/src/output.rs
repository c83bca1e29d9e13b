//! Flat-file output: versioned CSV, gnuplot data, JSON.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::HarnessError;

pub const SCHEMA_LINE: &str = "# liebrob-schema v1";

/// Shortest round-trip decimal, switching to exponent form for very large or small magnitudes.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if x == 0.0 || (1e-4..1e9).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// CSV table with a schema comment and a header row.
#[derive(Clone, Debug)]
pub struct Csv {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&'static str]) -> Self {
        Csv {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "CSV row width");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(SCHEMA_LINE);
        s.push('\n');
        s.push_str(&self.header.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Two-column gnuplot data with a comment naming the columns.
pub fn render_dat(title: &str, x: &str, y: &str, points: &[(f64, f64)]) -> String {
    let mut s = format!("# {title}\n# {x} {y}\n");
    for &(a, b) in points {
        let _ = writeln!(s, "{} {}", fmt_f64(a), fmt_f64(b));
    }
    s
}

/// Output directory that remembers what it wrote.
#[derive(Debug)]
pub struct Artifacts {
    root: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    pub fn create(root: &Path) -> Result<Self, HarnessError> {
        std::fs::create_dir_all(root).map_err(|e| HarnessError::Io {
            path: root.to_path_buf(),
            source: e,
        })?;
        Ok(Artifacts {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), HarnessError> {
        let path = self.root.join(name);
        std::fs::write(&path, contents).map_err(|e| HarnessError::Io { path, source: e })?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, csv: &Csv) -> Result<(), HarnessError> {
        self.write(name, &csv.render())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), HarnessError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Mismatch(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }
}

/// File-name friendly rendering of a number.
pub fn slug(x: f64) -> String {
    fmt_f64(x).replace('-', "m").replace('.', "p").replace('+', "")
}
