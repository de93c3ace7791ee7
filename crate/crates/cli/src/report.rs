//! Run reports and the files written next to them.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub values: Value,
    pub budget: Value,
    /// The offending datum of a failed check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<Value>,
}

impl Check {
    pub fn new(name: &str, pass: bool, values: Value, budget: Value, violation: Value) -> Self {
        Self {
            name: name.to_string(),
            pass,
            values,
            budget,
            violation: (!pass).then_some(violation),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Provenance {
    pub version: &'static str,
    pub wall_time_s: f64,
    pub parallel: bool,
    pub threads: usize,
}

#[derive(Debug, Serialize)]
pub struct RunReport<'a> {
    pub schema: u32,
    pub command: &'a str,
    pub passed: bool,
    pub config: &'a ExperimentConfig,
    pub checks: Vec<Check>,
    pub provenance: Provenance,
    pub files: Vec<String>,
}

/// Output directory and the manifest of files written into it.
pub struct Output {
    dir: PathBuf,
    pub files: Vec<String>,
}

impl Output {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    /// Write a file through a streaming writer.
    pub fn write_with<F>(&mut self, name: &str, f: F) -> std::io::Result<()>
    where
        F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>,
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(self.dir.join(name))?);
        f(&mut w)?;
        std::io::Write::flush(&mut w)?;
        if !self.files.iter().any(|x| x == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }
}

/// CSV text from a header and rows of already formatted fields.
pub fn csv<I>(header: &str, rows: I) -> String
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut s = String::new();
    s.push_str(header);
    s.push('\n');
    for row in rows {
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let s = csv("a,b", vec![vec!["1".into(), "2".into()], vec!["3".into(), "4".into()]]);
        assert_eq!(s, "a,b\n1,2\n3,4\n");
    }

    #[test]
    fn passing_checks_carry_no_violation() {
        let c = Check::new("x", true, Value::Null, Value::Null, Value::from(3));
        assert!(c.violation.is_none());
        let f = Check::new("x", false, Value::Null, Value::Null, Value::from(3));
        assert_eq!(f.violation, Some(Value::from(3)));
    }
}
