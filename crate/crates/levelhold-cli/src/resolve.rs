//! Merges command-line flags with an optional flat JSON config file.
//!
//! Config keys are the long flag names without the leading dashes; a
//! flag given on the command line always wins over the file value.

use std::path::Path;

use serde_json::{Map, Value};

use crate::errors::CliError;

/// Every key a config file may carry: the union of all long flag names.
const KNOWN_KEYS: &[&str] = &[
    "a",
    "algorithm",
    "cells",
    "curve-samples",
    "delta-n",
    "delta-n-tilde",
    "delta-t",
    "dt",
    "dt-list",
    "format",
    "from",
    "lambda-tilde",
    "lambda0",
    "map",
    "n0",
    "output",
    "plant",
    "q-setpoint",
    "q0",
    "samples",
    "steps",
    "t0",
    "to",
    "transient",
];

pub struct Resolver {
    config: Map<String, Value>,
}

impl Resolver {
    pub fn new(path: Option<&Path>) -> Result<Resolver, CliError> {
        let config = match path {
            None => Map::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Io(format!("cannot read config file {}: {e}", p.display()))
                })?;
                let value: Value = serde_json::from_str(&text).map_err(|e| {
                    CliError::Usage(format!("config file {}: {e}", p.display()))
                })?;
                match value {
                    Value::Object(map) => map,
                    _ => {
                        return Err(CliError::Usage(format!(
                            "config file {}: expected a flat JSON object",
                            p.display()
                        )))
                    }
                }
            }
        };
        for key in config.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("unknown key in config file: {key}")));
            }
        }
        Ok(Resolver { config })
    }

    fn finite(value: f64, key: &str) -> Result<f64, CliError> {
        if value.is_finite() {
            Ok(value)
        } else {
            Err(CliError::Usage(format!("non-finite value for key: {key}")))
        }
    }

    pub fn f64(&self, flag: Option<f64>, key: &str) -> Result<Option<f64>, CliError> {
        if let Some(v) = flag {
            return Self::finite(v, key).map(Some);
        }
        match self.config.get(key) {
            None => Ok(None),
            Some(Value::Number(n)) => match n.as_f64() {
                Some(v) => Self::finite(v, key).map(Some),
                None => Err(CliError::Usage(format!("value out of range for key: {key}"))),
            },
            Some(_) => Err(CliError::Usage(format!("expected a number for key: {key}"))),
        }
    }

    pub fn require_f64(&self, flag: Option<f64>, key: &str) -> Result<f64, CliError> {
        self.f64(flag, key)?
            .ok_or_else(|| CliError::Usage(format!("missing required key: {key}")))
    }

    pub fn f64_or(&self, flag: Option<f64>, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64(flag, key)?.unwrap_or(default))
    }

    pub fn usize(&self, flag: Option<usize>, key: &str) -> Result<Option<usize>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.config.get(key) {
            None => Ok(None),
            Some(Value::Number(n)) => match n.as_u64() {
                Some(v) => Ok(Some(v as usize)),
                None => Err(CliError::Usage(format!(
                    "expected a nonnegative integer for key: {key}"
                ))),
            },
            Some(_) => Err(CliError::Usage(format!(
                "expected a nonnegative integer for key: {key}"
            ))),
        }
    }

    pub fn require_usize(&self, flag: Option<usize>, key: &str) -> Result<usize, CliError> {
        self.usize(flag, key)?
            .ok_or_else(|| CliError::Usage(format!("missing required key: {key}")))
    }

    pub fn usize_or(
        &self,
        flag: Option<usize>,
        key: &str,
        default: usize,
    ) -> Result<usize, CliError> {
        Ok(self.usize(flag, key)?.unwrap_or(default))
    }

    pub fn string(&self, flag: Option<String>, key: &str) -> Result<Option<String>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.config.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(CliError::Usage(format!("expected a string for key: {key}"))),
        }
    }

    pub fn require_string(&self, flag: Option<String>, key: &str) -> Result<String, CliError> {
        self.string(flag, key)?
            .ok_or_else(|| CliError::Usage(format!("missing required key: {key}")))
    }

    pub fn string_or(
        &self,
        flag: Option<String>,
        key: &str,
        default: &str,
    ) -> Result<String, CliError> {
        Ok(self.string(flag, key)?.unwrap_or_else(|| default.to_string()))
    }

    /// A list of step sizes: comma-separated on the command line or as a
    /// config string, or a JSON array of numbers in the config.
    pub fn require_f64_list(
        &self,
        flag: Option<String>,
        key: &str,
    ) -> Result<Vec<f64>, CliError> {
        if let Some(text) = flag {
            return parse_f64_list(&text, key);
        }
        match self.config.get(key) {
            None => Err(CliError::Usage(format!("missing required key: {key}"))),
            Some(Value::String(s)) => parse_f64_list(s, key),
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    match item.as_f64() {
                        Some(v) if v.is_finite() => out.push(v),
                        _ => {
                            return Err(CliError::Usage(format!(
                                "expected finite numbers for key: {key}"
                            )))
                        }
                    }
                }
                if out.is_empty() {
                    return Err(CliError::Usage(format!("empty list for key: {key}")));
                }
                Ok(out)
            }
            Some(_) => Err(CliError::Usage(format!(
                "expected a comma-separated string or array for key: {key}"
            ))),
        }
    }
}

fn parse_f64_list(text: &str, key: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let trimmed = part.trim();
        let v: f64 = trimmed.parse().map_err(|_| {
            CliError::Usage(format!("cannot parse '{trimmed}' as a number for key: {key}"))
        })?;
        if !v.is_finite() {
            return Err(CliError::Usage(format!("non-finite value for key: {key}")));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!("empty list for key: {key}")));
    }
    Ok(out)
}
