//! TOML run configuration with dotted-path overrides.
//!
//! ```toml
//! [latency]
//! t_transpose = 32
//! [group]
//! R = 256
//! [grid]
//! l_sub = 4
//! [flash]
//! affiliations = 8
//! [[jobs]]
//! id = 0
//! N = 8192
//! L = 6
//! ops = { ntt = 4, mul = 2 }
//! ```
//!
//! `--set group.R=128` writes one key; a bare `N`, `L`, `l` or
//! `use_current_level` writes the key in both `group` and `grid`.

use crate::error::CliError;
use fhedse::flashsim::{FlashArchSpec, WorkloadSpec};
use fhedse::perfmodel::{GridArchSpec, GroupArchSpec, LatencyConstants};
use serde::de::DeserializeOwned;
use std::path::Path;
use toml::{Table, Value};

/// Keys that describe the workload rather than one architecture.
pub const SHARED_KEYS: [&str; 4] = ["N", "L", "l", "use_current_level"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    table: Table,
}

/// Parses a TOML literal, falling back to a bare string.
pub fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let table = text
            .parse::<Table>()
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Ok(Self { table })
    }

    #[cfg(test)]
    pub fn from_table(table: Table) -> Self {
        Self { table }
    }

    /// Applies `key=value`.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("override {assignment:?} is not key=value")))?;
        self.set(key.trim(), parse_value(raw.trim()))
    }

    pub fn set(&mut self, key: &str, value: Value) -> Result<(), CliError> {
        if SHARED_KEYS.contains(&key) {
            self.set_path(&["group", key], value.clone())?;
            return self.set_path(&["grid", key], value);
        }
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(CliError::config(format!("bad key {key:?}")));
        }
        self.set_path(&parts, value)
    }

    fn set_path(&mut self, parts: &[&str], value: Value) -> Result<(), CliError> {
        let (last, parents) = parts.split_last().expect("non-empty path");
        let mut cur = &mut self.table;
        for p in parents {
            let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
            cur = entry
                .as_table_mut()
                .ok_or_else(|| CliError::config(format!("{p} is not a table")))?;
        }
        cur.insert(last.to_string(), value);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        let mut parts = key.split('.');
        let mut cur = self.table.get(parts.next()?)?;
        for p in parts {
            cur = cur.as_table()?.get(p)?;
        }
        Some(cur)
    }

    pub fn get_str(&self, key: &str) -> Result<Option<&str>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(other) => Err(CliError::config(format!("{key} must be a string, got {other}"))),
        }
    }

    fn section<T: DeserializeOwned + Default>(&self, name: &str) -> Result<T, CliError> {
        match self.table.get(name) {
            None => Ok(T::default()),
            Some(v @ Value::Table(_)) => v
                .clone()
                .try_into()
                .map_err(|e| CliError::config(format!("[{name}]: {e}"))),
            Some(_) => Err(CliError::config(format!("{name} must be a table"))),
        }
    }

    pub fn latency(&self) -> Result<LatencyConstants, CliError> {
        self.section("latency")
    }

    pub fn group(&self) -> Result<GroupArchSpec, CliError> {
        let mut spec: GroupArchSpec = self.section("group")?;
        spec.latency = self.latency()?;
        Ok(spec)
    }

    pub fn grid(&self) -> Result<GridArchSpec, CliError> {
        let mut spec: GridArchSpec = self.section("grid")?;
        spec.latency = self.latency()?;
        Ok(spec)
    }

    pub fn flash(&self) -> Result<FlashArchSpec, CliError> {
        let mut spec: FlashArchSpec = self.section("flash")?;
        spec.latency = self.latency()?;
        Ok(spec)
    }

    pub fn jobs(&self) -> Result<Vec<WorkloadSpec>, CliError> {
        match self.table.get("jobs") {
            None => Ok(Vec::new()),
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    v.clone()
                        .try_into()
                        .map_err(|e| CliError::config(format!("jobs[{i}]: {e}")))
                })
                .collect(),
            Some(_) => Err(CliError::config("jobs must be an array of tables")),
        }
    }
}
