//! Deterministic CSV output: 12 significant digits, `.` decimal separator,
//! LF line endings, no trailing whitespace.

use std::fmt::Write as _;
use std::path::Path;

use crate::integrator::Trajectory;

use super::ScenarioError;

/// Renders `x` with 12 significant digits, shortest form (like C's `%.12g`).
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exponent) = sci.split_once('e').expect("exponent present");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if (-5..12).contains(&exponent) {
        let decimals = (11 - exponent) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exponent}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
    Empty,
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_number(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(t) => escape(t),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i)
    }
}

impl From<&str> for Cell {
    fn from(t: &str) -> Self {
        Cell::Text(t.to_string())
    }
}

impl From<String> for Cell {
    fn from(t: String) -> Self {
        Cell::Text(t)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.header.iter().map(|h| escape(h)).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), ScenarioError> {
        write_file(path, &self.render())
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), ScenarioError> {
    std::fs::write(path, contents).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })
}

pub fn trajectory_csv(trajectory: &Trajectory, species_names: &[String]) -> String {
    let mut out = String::with_capacity(trajectory.len() * 16 * (species_names.len() + 1));
    out.push('t');
    for n in species_names {
        out.push(',');
        out.push_str(&escape(n));
    }
    out.push('\n');
    for (t, s) in trajectory.times().iter().zip(trajectory.states()) {
        out.push_str(&format_number(*t));
        for v in s {
            let _ = write!(out, ",{}", format_number(*v));
        }
        out.push('\n');
    }
    out
}

/// Header `t,<name1>,<name2>,...` followed by one row per sample.
pub fn write_trajectory_csv(
    trajectory: &Trajectory,
    species_names: &[String],
    path: &Path,
) -> Result<(), ScenarioError> {
    if trajectory.is_empty() {
        return Err(ScenarioError::Invalid("cannot write an empty trajectory".into()));
    }
    if species_names.len() != trajectory.dim() {
        return Err(ScenarioError::Invalid(format!(
            "{} species names for a {}-dimensional trajectory",
            species_names.len(),
            trajectory.dim()
        )));
    }
    write_file(path, &trajectory_csv(trajectory, species_names))
}
