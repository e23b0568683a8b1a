//! Snapshot files: one comment header, a column line, then `x,value` rows.
//!
//! ```text
//! # scenario=det-jump t=2.5000000000000000e0 dx=9.9502487562189057e-3
//! x,v
//! -1.9950248756218905e0,0.0000000000000000e0
//! ...
//! ```
//!
//! Numbers carry 17 significant digits, so parsing a file back gives the
//! exact doubles that were written.

use std::fmt::Write as _;
use std::path::Path;

use hybridfp_core::{DensityField, Grid, ObservableField};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub scenario: String,
    pub time: f64,
    pub dx: f64,
    pub x: Vec<f64>,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn density(&self) -> DensityField {
        DensityField {
            values: self.values.clone(),
            time: self.time,
        }
    }
}

fn header(out: &mut String, scenario: &str, time: f64, dx: f64, column: &str) {
    let _ = writeln!(out, "# scenario={scenario} t={time:.16e} dx={dx:.16e}");
    let _ = writeln!(out, "x,{column}");
}

pub fn density_csv(scenario: &str, field: &DensityField, grid: &Grid) -> String {
    let mut out = String::with_capacity(48 * (field.values.len() + 2));
    header(&mut out, scenario, field.time, grid.dx, "v");
    for (x, v) in grid.centers().zip(&field.values) {
        let _ = writeln!(out, "{x:.16e},{v:.16e}");
    }
    out
}

/// Cell-centre values followed by the end node at `x_max`.
pub fn observable_csv(scenario: &str, field: &ObservableField, grid: &Grid) -> String {
    let mut out = String::with_capacity(48 * (field.values.len() + 2));
    header(&mut out, scenario, field.time, grid.dx, "u");
    let xs = grid.centers().chain(std::iter::once(grid.x_max()));
    for (x, u) in xs.zip(&field.values) {
        let _ = writeln!(out, "{x:.16e},{u:.16e}");
    }
    out
}

pub fn parse_snapshot(text: &str) -> Result<Snapshot, CliError> {
    let bad = |msg: String| CliError::Config(format!("malformed snapshot: {msg}"));
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let fields = head.strip_prefix("# ").ok_or_else(|| bad(format!("header '{head}'")))?;
    let (mut scenario, mut time, mut dx) = (None, None, None);
    for item in fields.split_whitespace() {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| bad(format!("header item '{item}'")))?;
        match key {
            "scenario" => scenario = Some(value.to_string()),
            "t" => time = value.parse::<f64>().ok(),
            "dx" => dx = value.parse::<f64>().ok(),
            _ => return Err(bad(format!("unknown header key '{key}'"))),
        }
    }
    let columns = lines.next().ok_or_else(|| bad("missing column line".into()))?;
    if !columns.starts_with("x,") {
        return Err(bad(format!("column line '{columns}'")));
    }
    let (mut x, mut values) = (Vec::new(), Vec::new());
    for (k, line) in lines.enumerate() {
        let (a, b) = line.split_once(',').ok_or_else(|| bad(format!("row {k}: '{line}'")))?;
        let parse = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("row {k}: '{line}'")));
        x.push(parse(a)?);
        values.push(parse(b)?);
    }
    Ok(Snapshot {
        scenario: scenario.ok_or_else(|| bad("no scenario".into()))?,
        time: time.ok_or_else(|| bad("no time".into()))?,
        dx: dx.ok_or_else(|| bad("no dx".into()))?,
        x,
        values,
    })
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_snapshot(&text)
}
