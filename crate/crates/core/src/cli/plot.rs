//! gnuplot scripts plus whitespace-separated data files.
//!
//! Each plot is written as `<stem>.gp` and `<stem>.dat` in the same directory;
//! the script refers to the data file by its bare name, so run gnuplot from
//! the output directory.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use super::report::format_g6;
use crate::fracops::Grid;
use crate::quenchlab::SnapshotSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `v` and `v_t` against `x` at the last snapshot.
    CrossSection,
    /// `max v` and `max v_t` against `t`.
    PeakTrajectory,
    /// `(x, t, v)` triples of the retained snapshots.
    Surface,
    /// One or more sweep columns against the swept parameter.
    SweepCurve,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::CrossSection => "cross_section",
            PlotKind::PeakTrajectory => "peak_trajectory",
            PlotKind::Surface => "surface",
            PlotKind::SweepCurve => "sweep_curve",
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            PlotKind::CrossSection,
            PlotKind::PeakTrajectory,
            PlotKind::Surface,
            PlotKind::SweepCurve,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| format!("unknown plot kind `{s}`"))
    }
}

/// Points of one or more curves sharing an abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub x_label: String,
    pub y_labels: Vec<String>,
    /// `(x, [y...])`; `None` marks a missing value (written as `NaN`, which
    /// gnuplot skips).
    pub points: Vec<(f64, Vec<Option<f64>>)>,
}

pub enum PlotData<'a> {
    Series { series: &'a SnapshotSeries, grid: &'a Grid },
    Sweep(&'a Curve),
}

impl PlotData<'_> {
    fn name(&self) -> &'static str {
        match self {
            PlotData::Series { .. } => "snapshot series",
            PlotData::Sweep(_) => "sweep table",
        }
    }
}

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("plot kind {kind} cannot be drawn from a {data}")]
    Unsupported { kind: PlotKind, data: &'static str },
    #[error("nothing to plot for {0}")]
    Empty(PlotKind),
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotFiles {
    pub script: PathBuf,
    pub data: PathBuf,
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format_g6(x)
    } else {
        "NaN".into()
    }
}

/// Pads the interior values with the homogeneous boundary values.
fn with_boundary(v: &[f64]) -> impl Iterator<Item = f64> + '_ {
    std::iter::once(0.0).chain(v.iter().copied()).chain(std::iter::once(0.0))
}

fn render(data: &PlotData<'_>, kind: PlotKind, dat_name: &str) -> Result<(String, String), PlotError> {
    let mut dat = String::new();
    let mut gp = String::new();
    let _ = writeln!(gp, "# {} plot; data in {dat_name}", kind.name());
    match (kind, data) {
        (PlotKind::CrossSection, PlotData::Series { series, grid }) => {
            let snap = series.last().ok_or(PlotError::Empty(kind))?;
            let _ = writeln!(dat, "# t = {}\n# x v v_t", num(snap.t));
            for ((x, v), vt) in grid.nodes().iter().zip(with_boundary(&snap.v)).zip(with_boundary(&snap.vt)) {
                let _ = writeln!(dat, "{} {} {}", num(*x), num(v), num(vt));
            }
            let _ = writeln!(gp, "set xlabel 'x'\nset ylabel 'v'\nset y2label 'v_t'\nset y2tics\nset ytics nomirror");
            let _ = writeln!(
                gp,
                "set title 't = {}'\nplot '{dat_name}' using 1:2 with lines title 'v', \\\n     '{dat_name}' using 1:3 axes x1y2 with lines title 'v_t'",
                num(snap.t)
            );
        }
        (PlotKind::PeakTrajectory, PlotData::Series { series, .. }) => {
            if series.peaks.is_empty() {
                return Err(PlotError::Empty(kind));
            }
            let _ = writeln!(dat, "# t max_v max_v_t");
            for p in &series.peaks {
                let _ = writeln!(dat, "{} {} {}", num(p.t), num(p.v_max), num(p.vt_max));
            }
            let _ = writeln!(gp, "set xlabel 't'\nset ylabel 'max v'\nset y2label 'max v_t'\nset y2tics\nset ytics nomirror");
            let _ = writeln!(
                gp,
                "plot '{dat_name}' using 1:2 with lines title 'max v', \\\n     '{dat_name}' using 1:3 axes x1y2 with lines title 'max v_t'"
            );
        }
        (PlotKind::Surface, PlotData::Series { series, grid }) => {
            if series.records.is_empty() {
                return Err(PlotError::Empty(kind));
            }
            let _ = writeln!(dat, "# x t v");
            for snap in &series.records {
                for (x, v) in grid.nodes().iter().zip(with_boundary(&snap.v)) {
                    let _ = writeln!(dat, "{} {} {}", num(*x), num(snap.t), num(v));
                }
                // Blank line between scans for gnuplot's grid surface.
                dat.push('\n');
            }
            let _ = writeln!(gp, "set xlabel 'x'\nset ylabel 't'\nset zlabel 'v'\nset hidden3d");
            let _ = writeln!(gp, "splot '{dat_name}' using 1:2:3 with lines title 'v'");
        }
        (PlotKind::SweepCurve, PlotData::Sweep(curve)) => {
            if curve.points.is_empty() || curve.y_labels.is_empty() {
                return Err(PlotError::Empty(kind));
            }
            let _ = writeln!(dat, "# {} {}", curve.x_label, curve.y_labels.join(" "));
            for (x, ys) in &curve.points {
                let ys: Vec<String> = ys.iter().map(|y| y.map_or("NaN".into(), num)).collect();
                let _ = writeln!(dat, "{} {}", num(*x), ys.join(" "));
            }
            let _ = writeln!(gp, "set xlabel '{}'", curve.x_label);
            if let [only] = curve.y_labels.as_slice() {
                let _ = writeln!(gp, "set ylabel '{only}'");
            }
            let parts: Vec<String> = curve
                .y_labels
                .iter()
                .enumerate()
                .map(|(i, l)| format!("'{dat_name}' using 1:{} with linespoints title '{l}'", i + 2))
                .collect();
            let _ = writeln!(gp, "plot {}", parts.join(", \\\n     "));
        }
        (kind, data) => {
            return Err(PlotError::Unsupported {
                kind,
                data: data.name(),
            })
        }
    }
    Ok((gp, dat))
}

/// Writes `<dir>/<stem>.gp` and `<dir>/<stem>.dat`.
pub fn emit_plot_script(
    data: &PlotData<'_>,
    kind: PlotKind,
    dir: &Path,
    stem: &str,
) -> Result<PlotFiles, PlotError> {
    let dat_name = format!("{stem}.dat");
    let (gp, dat) = render(data, kind, &dat_name)?;
    let files = PlotFiles {
        script: dir.join(format!("{stem}.gp")),
        data: dir.join(&dat_name),
    };
    for (path, text) in [(&files.data, dat), (&files.script, gp)] {
        fs::write(path, text).map_err(|source| PlotError::Io {
            path: path.clone(),
            source,
        })?;
    }
    Ok(files)
}
