//! In-memory outputs, written only after the whole command has succeeded.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::Value;

use crate::CliError;

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.header.len());
        self.rows.push(values.to_vec());
    }

    fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| v.to_string())).map_err(io)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }
}

#[derive(Default)]
pub struct Output {
    files: Vec<(String, Vec<u8>)>,
    pending: Vec<(String, Table)>,
}

fn io(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

impl Output {
    pub fn csv(&mut self, name: &str, table: Table) {
        self.pending.push((name.to_string(), table));
    }

    pub fn json(&mut self, name: &str, value: Value) {
        let mut bytes = serde_json::to_vec_pretty(&value).expect("json values serialize");
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
    }

    pub fn names(&self) -> Vec<&str> {
        self.pending
            .iter()
            .map(|(n, _)| n.as_str())
            .chain(self.files.iter().map(|(n, _)| n.as_str()))
            .collect()
    }

    /// Each file goes to a temporary name first and is renamed into place.
    pub fn write(self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(io)?;
        let mut all = Vec::new();
        for (name, table) in &self.pending {
            all.push((name.clone(), table.to_bytes()?));
        }
        all.extend(self.files);
        let mut staged = Vec::new();
        for (name, bytes) in &all {
            let tmp = dir.join(format!(".{name}.tmp"));
            let mut f = fs::File::create(&tmp).map_err(io)?;
            f.write_all(bytes).map_err(io)?;
            f.sync_all().map_err(io)?;
            staged.push((tmp, dir.join(name)));
        }
        for (tmp, dst) in staged {
            fs::rename(tmp, dst).map_err(io)?;
        }
        Ok(())
    }
}
