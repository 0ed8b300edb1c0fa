//! Diagnostics CSV, VTK snapshots, run manifest and cylinder summary.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::assembly::{cell_geometry, gather};
use crate::diagnostics::TimeSeriesRecord;
use crate::fespace::{FieldCoeffs, TaylorHoodSpace};

use super::config::RunConfig;
use super::BenchError;

pub const BASE_COLUMNS: [&str; 8] = ["t", "E", "enstrophy", "Mx", "My", "Mang", "div_residual", "newton_iters"];

/// Column names in file order.
pub fn csv_columns(errors: bool, lift_drag: bool) -> Vec<&'static str> {
    let mut c = BASE_COLUMNS.to_vec();
    if errors {
        c.extend(["L2err", "H1err"]);
    }
    if lift_drag {
        c.extend(["cl", "cd"]);
    }
    c
}

/// 17 significant digits; round-trips every finite `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Streams [`TimeSeriesRecord`]s as CSV rows. The optional column groups
/// are fixed at construction; every record must carry exactly those.
pub struct CsvWriter<W: Write> {
    out: W,
    errors: bool,
    lift_drag: bool,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W, errors: bool, lift_drag: bool) -> io::Result<Self> {
        writeln!(out, "{}", csv_columns(errors, lift_drag).join(","))?;
        Ok(CsvWriter { out, errors, lift_drag })
    }

    pub fn write(&mut self, r: &TimeSeriesRecord) -> io::Result<()> {
        if r.errors.is_some() != self.errors || r.lift_drag.is_some() != self.lift_drag {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "record does not match the CSV columns"));
        }
        let mut line = String::new();
        for v in [r.t, r.energy, r.enstrophy, r.momentum[0], r.momentum[1], r.angular_momentum, r.div_residual] {
            line.push_str(&format_float(v));
            line.push(',');
        }
        let _ = write!(line, "{}", r.newton_iters);
        for (a, b) in [r.errors, r.lift_drag].into_iter().flatten() {
            let _ = write!(line, ",{},{}", format_float(a), format_float(b));
        }
        writeln!(self.out, "{line}")
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Parsed diagnostics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| BenchError::Csv("empty file".into()))?;
        let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| BenchError::Csv(format!("row {}: {e}", i + 1)))?;
            if row.len() != columns.len() {
                return Err(BenchError::Csv(format!(
                    "row {} has {} fields, header has {}",
                    i + 1,
                    row.len(),
                    columns.len()
                )));
            }
            rows.push(row);
        }
        Ok(CsvTable { columns, rows })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, BenchError> {
        let j = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| BenchError::Csv(format!("no column '{name}'")))?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// Largest `|a - b|` in `column` and the time at which it occurs. Both
/// tables must share the time grid.
pub fn compare_column(a: &CsvTable, b: &CsvTable, column: &str) -> Result<(f64, f64), BenchError> {
    let (ta, tb) = (a.column("t")?, b.column("t")?);
    if ta.len() != tb.len() {
        return Err(BenchError::Csv(format!("row counts differ: {} vs {}", ta.len(), tb.len())));
    }
    if let Some(i) = ta.iter().zip(&tb).position(|(x, y)| (x - y).abs() > 1e-12 * x.abs().max(1.0)) {
        return Err(BenchError::Csv(format!("time grids differ at row {}: {} vs {}", i + 1, ta[i], tb[i])));
    }
    let (ca, cb) = (a.column(column)?, b.column(column)?);
    let mut best = (0.0, ta.first().copied().unwrap_or(0.0));
    for ((x, y), t) in ca.iter().zip(&cb).zip(&ta) {
        let d = (x - y).abs();
        if d > best.0 || d.is_nan() {
            best = (d, *t);
        }
    }
    Ok(best)
}

/// Sub-triangles of a P2 cell in local node numbering.
const SUBCELLS: [[usize; 3]; 4] = [[0, 3, 5], [3, 1, 4], [5, 4, 2], [3, 4, 5]];
const LOCAL_BARY: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
];
const EDGE_ENDS: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

/// Legacy-VTK ASCII unstructured grid of the P2 nodes, each cell split into
/// four linear triangles.
pub fn vtk_snapshot(space: &TaylorHoodSpace, u: &FieldCoeffs, p: &FieldCoeffs, t: f64) -> String {
    let n = space.num_nodes();
    let cells = space.cell_nodes();
    let mut pressure = vec![0.0; n];
    let mut vorticity = vec![0.0; n];
    let mut count = vec![0usize; n];
    pressure[..space.pressure_dof_count()].copy_from_slice(&p.values);
    for (c, nodes) in cells.iter().enumerate() {
        for (k, e) in EDGE_ENDS.iter().enumerate() {
            pressure[nodes[3 + k]] = 0.5 * (p.values[nodes[e[0]]] + p.values[nodes[e[1]]]);
        }
        let geo = cell_geometry(space, c);
        let cu = gather(&u.values, nodes);
        for (a, l) in LOCAL_BARY.iter().enumerate() {
            let g = geo.p2_gradients(l);
            let w: f64 = (0..6).map(|b| cu[2 * b + 1] * g[b][0] - cu[2 * b] * g[b][1]).sum();
            vorticity[nodes[a]] += w;
            count[nodes[a]] += 1;
        }
    }
    for (w, c) in vorticity.iter_mut().zip(&count) {
        *w /= (*c).max(1) as f64;
    }

    let f = format_float;
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "emaclab snapshot t={}", f(t));
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n} double");
    for x in space.nodes() {
        let _ = writeln!(s, "{} {} 0", f(x[0]), f(x[1]));
    }
    let nc = 4 * cells.len();
    let _ = writeln!(s, "CELLS {nc} {}", 4 * nc);
    for nodes in cells {
        for sc in SUBCELLS {
            let _ = writeln!(s, "3 {} {} {}", nodes[sc[0]], nodes[sc[1]], nodes[sc[2]]);
        }
    }
    let _ = writeln!(s, "CELL_TYPES {nc}");
    for _ in 0..nc {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    s.push_str("VECTORS velocity double\n");
    for i in 0..n {
        let _ = writeln!(s, "{} {} 0", f(u.values[2 * i]), f(u.values[2 * i + 1]));
    }
    for (name, data) in [("pressure", &pressure), ("vorticity", &vorticity)] {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in data.iter() {
            let _ = writeln!(s, "{}", f(*v));
        }
    }
    s
}

/// Config echo preceded by comment lines with the code version and the
/// wall-clock time. Parsing the text reproduces the configuration.
pub fn manifest_text(config: &RunConfig, wall_clock_seconds: f64) -> String {
    format!(
        "# emaclab {}\n# wall_clock_seconds = {wall_clock_seconds:.3}\n{}",
        env!("CARGO_PKG_VERSION"),
        config.to_text()
    )
}

/// Extrema of lift and drag over a time window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftDragSummary {
    pub window: (f64, f64),
    pub cl_max: f64,
    pub cl_min: f64,
    pub cd_max: f64,
    pub cd_min: f64,
    pub t_cl_max: f64,
    pub t_cd_max: f64,
}

impl LiftDragSummary {
    /// `None` when no record in `[t0, t1]` carries finite lift/drag values.
    pub fn from_records(records: &[TimeSeriesRecord], t0: f64, t1: f64) -> Option<Self> {
        let tol = 1e-9 * t1.abs().max(1.0);
        let mut s: Option<LiftDragSummary> = None;
        for r in records.iter().filter(|r| r.t >= t0 - tol && r.t <= t1 + tol) {
            let Some((cl, cd)) = r.lift_drag.filter(|(l, d)| l.is_finite() && d.is_finite()) else {
                continue;
            };
            let e = s.get_or_insert(LiftDragSummary {
                window: (t0, t1),
                cl_max: cl,
                cl_min: cl,
                cd_max: cd,
                cd_min: cd,
                t_cl_max: r.t,
                t_cd_max: r.t,
            });
            if cl > e.cl_max {
                e.cl_max = cl;
                e.t_cl_max = r.t;
            }
            if cd > e.cd_max {
                e.cd_max = cd;
                e.t_cd_max = r.t;
            }
            e.cl_min = e.cl_min.min(cl);
            e.cd_min = e.cd_min.min(cd);
        }
        s
    }

    pub fn to_text(&self) -> String {
        let f = format_float;
        format!(
            "window_start = {}\nwindow_end = {}\ncl_max = {}\nt_cl_max = {}\ncl_min = {}\ncd_max = {}\nt_cd_max = {}\ncd_min = {}\n",
            f(self.window.0),
            f(self.window.1),
            f(self.cl_max),
            f(self.t_cl_max),
            f(self.cl_min),
            f(self.cd_max),
            f(self.t_cd_max),
            f(self.cd_min)
        )
    }
}
