//! CSV and JSON writers for spectra, kernels, plans and reports.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::estimates::LiYauReport;
use crate::heat::HeatState;
use crate::quotient::EigenBasis;

fn io_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

fn theta_label(theta: &[usize]) -> String {
    theta.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per `(χ, j)`: `n, theta, j, lambda_chi, lambda_chi_j, beta, supnorm`.
pub fn write_spectrum<W: Write>(out: W, bases: &[&EigenBasis]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "theta", "j", "lambda_chi", "lambda_chi_j", "beta", "supnorm"]).map_err(io_err)?;
    for basis in bases {
        let n = basis.quotient.n().to_string();
        for f in &basis.functions {
            w.write_record([
                n.clone(),
                theta_label(&basis.characters[f.chi].theta),
                f.j.to_string(),
                f.lambda_chi.to_string(),
                f.lambda.to_string(),
                opt(f.beta),
                f.sup_norm.to_string(),
            ])
            .map_err(io_err)?;
        }
    }
    w.flush()
}

/// Kernel values as `element, value` rows.
pub fn write_kernel_csv<W: Write>(out: W, state: &HeatState) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["element", "value"]).map_err(io_err)?;
    for (x, v) in state.values.iter() {
        w.write_record([x.to_string(), v.to_string()]).map_err(io_err)?;
    }
    w.flush()
}

#[derive(Serialize)]
struct KernelSidecar<'a> {
    group: &'a str,
    time: f64,
    beta: f64,
    radius: usize,
    points: usize,
    mass: f64,
    tail_bound: f64,
}

pub fn write_kernel_sidecar<W: Write>(out: W, group: &str, state: &HeatState) -> io::Result<()> {
    let side = KernelSidecar {
        group,
        time: state.time,
        beta: state.beta,
        radius: state.radius(),
        points: state.values.len(),
        mass: state.mass(),
        tail_bound: state.tail_bound,
    };
    write_json(out, &side)
}

/// Per-vertex detail: `trial, x, t, lhs_main, lhs_log`.
pub fn write_report_detail<W: Write>(out: W, report: &LiYauReport) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "x", "t", "lhs_main", "lhs_log"]).map_err(io_err)?;
    for r in &report.detail {
        w.write_record([
            r.trial.to_string(),
            r.x.to_string(),
            r.t.to_string(),
            r.lhs_main.to_string(),
            r.lhs_log.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush()
}

pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()
}

/// Create `path` and hand a buffered writer to `f`.
pub fn to_file(path: &Path, f: impl FnOnce(BufWriter<File>) -> io::Result<()>) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    f(BufWriter::new(File::create(path)?))
}
