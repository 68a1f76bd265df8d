//! CSV reports with a fixed schema per experiment.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::quenchlab::{ConvergenceOrders, CriticalLength, QuenchEvent, RunConfig, RunOutcome, SweepTable};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("row {row} has {got} cells, header has {expected}")]
    Schema { row: usize, expected: usize, got: usize },
    #[error("cannot write {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_g6(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as u64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

/// `%g` with six significant digits.
pub fn format_g6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    // Round to six digits first so the exponent reflects carries (9.999995 -> 10).
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// A header and homogeneous rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    /// Appends `wall_s` to every row; runs are otherwise byte-reproducible.
    pub fn with_wall_time(mut self, seconds: &[f64]) -> Self {
        self.columns.push("wall_s".into());
        for (row, s) in self.rows.iter_mut().zip(seconds) {
            row.push(Cell::Num(*s));
        }
        self
    }

    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io = |e: csv::Error| ReportError::Io {
            path: PathBuf::from("<memory>"),
            message: e.to_string(),
        };
        w.write_record(&self.columns).map_err(io)?;
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(ReportError::Schema {
                    row: i + 1,
                    expected: self.columns.len(),
                    got: row.len(),
                });
            }
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| ReportError::Io {
            path: PathBuf::from("<memory>"),
            message: e.to_string(),
        })?;
        Ok(String::from_utf8(bytes).expect("cells are UTF-8"))
    }

    pub fn write(&self, path: &Path) -> Result<(), ReportError> {
        let text = self.to_csv()?;
        fs::write(path, text).map_err(|e| ReportError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

fn quench_cells(q: Option<&QuenchEvent>) -> Vec<Cell> {
    match q {
        Some(q) => vec![q.t_quench.into(), q.x_star.into(), q.v_peak.into(), q.vt_peak.into()],
        None => vec![Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty],
    }
}

fn outcome_time(outcome: &RunOutcome) -> Cell {
    match outcome {
        RunOutcome::Quenched(q) => q.t_quench.into(),
        RunOutcome::SteadyState { t } | RunOutcome::MaxTimeReached { t } => (*t).into(),
        RunOutcome::NumericalFailure(_) => Cell::Empty,
    }
}

/// One row per run: parameters, outcome and quench data.
pub fn run_report(runs: &[(&RunConfig, &RunOutcome, usize)]) -> Report {
    let mut r = Report::new([
        "sigma", "theta", "kappa", "a", "b", "L", "outcome", "t_end", "steps", "T_a", "x_star",
        "v_peak", "vt_peak",
    ]);
    for (c, outcome, steps) in runs {
        let mut row = vec![
            c.spec.sigma.into(),
            c.spec.theta.into(),
            c.spec.kappa.into(),
            c.spec.a.into(),
            c.spec.b.into(),
            c.intervals.into(),
            outcome.label().into(),
            outcome_time(outcome),
            (*steps).into(),
        ];
        row.extend(quench_cells(outcome.quench()));
        r.push(row);
    }
    r
}

/// Columns `<param>,T_a,x_star,v_peak,vt_peak`; non-quenching rows leave the
/// quench cells empty.
pub fn sweep_report(table: &SweepTable) -> Report {
    let mut r = Report::new([table.param.name(), "T_a", "x_star", "v_peak", "vt_peak"]);
    for row in &table.rows {
        let mut cells = vec![Cell::Num(row.value)];
        cells.extend(quench_cells(row.quench()));
        r.push(cells);
    }
    r
}

/// Quench location columns `<param>,x_star,T_a,h`.
pub fn location_report(table: &SweepTable, template: &RunConfig) -> Report {
    let mut r = Report::new([table.param.name(), "x_star", "T_a", "h"]);
    for row in &table.rows {
        let a = match table.param {
            crate::quenchlab::SweepParam::A => row.value,
            _ => template.spec.a,
        };
        let q = row.quench();
        r.push(vec![
            row.value.into(),
            q.map(|q| q.x_star).into(),
            q.map(|q| q.t_quench).into(),
            (a / template.intervals as f64).into(),
        ]);
    }
    r
}

/// One row per search: `<param>,a_star,lo,hi,trials`.
pub fn critical_report(param: &str, rows: &[(f64, CriticalLength)]) -> Report {
    let mut r = Report::new([param, "a_star", "a_lo", "a_hi", "trials"]);
    for (value, c) in rows {
        r.push(vec![
            (*value).into(),
            c.a_star.into(),
            c.lo.into(),
            c.hi.into(),
            c.trials.len().into(),
        ]);
    }
    r
}

pub fn order_report(template: &RunConfig, h0: f64, o: &ConvergenceOrders) -> Report {
    let mut r = Report::new([
        "sigma", "b", "a", "h0", "tau", "step", "t_eval", "f", "g", "L0", "L1", "L2",
    ]);
    r.push(vec![
        template.spec.sigma.into(),
        template.spec.b.into(),
        template.spec.a.into(),
        h0.into(),
        o.tau.into(),
        o.step.into(),
        o.t_eval.into(),
        o.f.into(),
        o.g.into(),
        o.intervals[0].into(),
        o.intervals[1].into(),
        o.intervals[2].into(),
    ]);
    r
}
