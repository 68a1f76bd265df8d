use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::driver::{run_simulation, QuenchEvent, RunConfig, RunOutcome};
use super::QuenchlabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Convection strength `b`.
    B,
    Sigma,
    /// Interval length `a`.
    A,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::B => "b",
            SweepParam::Sigma => "sigma",
            SweepParam::A => "a",
        }
    }

    pub fn apply(self, template: &RunConfig, value: f64) -> RunConfig {
        let mut c = template.clone();
        match self {
            SweepParam::B => c.spec.b = value,
            SweepParam::Sigma => c.spec.sigma = value,
            SweepParam::A => c.spec.a = value,
        }
        c
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "b" => Ok(SweepParam::B),
            "sigma" => Ok(SweepParam::Sigma),
            "a" => Ok(SweepParam::A),
            other => Err(format!("unknown sweep parameter `{other}` (expected b, sigma or a)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: RunOutcome,
}

impl SweepRow {
    pub fn quench(&self) -> Option<&QuenchEvent> {
        self.outcome.quench()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
}

/// Runs the template once per value (in parallel); rows keep the input order.
/// Invalid parameter values fail the whole sweep, numerical failures are
/// reported per row.
pub fn quench_time_sweep(
    template: &RunConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<SweepTable, QuenchlabError> {
    if values.is_empty() {
        return Err(QuenchlabError::InvalidArgument("sweep needs at least one value".into()));
    }
    let rows = values
        .par_iter()
        .map(|&value| {
            let run = run_simulation(&param.apply(template, value))?;
            Ok(SweepRow {
                value,
                outcome: run.outcome,
            })
        })
        .collect::<Result<Vec<_>, QuenchlabError>>()?;
    Ok(SweepTable { param, rows })
}
