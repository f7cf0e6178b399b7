//! File formats: CSV matrices and datasets, fit/eval outputs, atomic writes.
//!
//! Floats are written with Rust's shortest round-trip formatting, so files
//! are byte-stable for identical inputs. Count cells therefore print as
//! plain integers.

use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::model::Dataset;
use crate::train::FitResult;
use ndarray::Array2;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Write via a temp file in the same directory, then rename into place.
pub fn atomic_write(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension(format!(
        "tmp.{}",
        std::process::id()
    ));
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Dense matrix as headerless CSV, one row per line.
pub fn matrix_to_csv(m: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: &Path, m: &Array2<f64>) -> Result<()> {
    atomic_write(path, &matrix_to_csv(m))
}

pub fn matrix_from_csv(text: &str) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| Error::data(format!("line {}: {e}", ln + 1)))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::data("empty matrix file"));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::data("ragged matrix rows"));
    }
    let mut m = Array2::zeros((rows.len(), d));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    matrix_from_csv(&fs::read_to_string(path)?)
}

/// Dataset as CSV with a header row of column names and integer cells.
pub fn dataset_to_csv(x: &Dataset) -> String {
    let mut out = x.names().join(",");
    out.push('\n');
    for row in x.x().rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_dataset_csv(path: &Path, x: &Dataset) -> Result<()> {
    atomic_write(path, &dataset_to_csv(x))
}

pub fn dataset_from_csv(text: &str) -> Result<Dataset> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::data("empty dataset file"))?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| Error::data(format!("line {}: {e}", ln + 2)))?;
        if row.len() != names.len() {
            return Err(Error::data(format!(
                "line {}: {} cells for {} columns",
                ln + 2,
                row.len(),
                names.len()
            )));
        }
        rows.push(row);
    }
    let n = rows.len();
    let d = names.len();
    let mut m = Array2::zeros((n, d));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Dataset::new(m, Some(names))
}

pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    dataset_from_csv(&fs::read_to_string(path)?)
}

/// Per-epoch trace: epoch, objective, nll, h0, h1, mu, lambda_eff.
pub fn trace_to_csv(fit: &FitResult) -> String {
    let mut out = String::from("epoch,objective,nll,h0,h1,mu,lambda_eff\n");
    for epoch in 0..fit.loss_trace.len() {
        let (h0, h1) = fit.h_trace[epoch];
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            epoch,
            fit.loss_trace[epoch],
            fit.nll_trace[epoch],
            h0,
            h1,
            fit.mu_trace[epoch],
            fit.lambda_trace[epoch]
        );
    }
    out
}

/// Scalar summary + config echo for fit.json.
pub fn fit_summary_json(fit: &FitResult) -> String {
    let (h0, h1) = fit.h_trace.last().copied().unwrap_or((f64::NAN, f64::NAN));
    let summary = serde_json::json!({
        "family": fit.params.family.as_str(),
        "d": fit.params.d(),
        "elapsed_seconds": fit.elapsed_seconds,
        "final_objective": fit.loss_trace.last().copied().unwrap_or(f64::NAN),
        "final_nll": fit.nll_trace.last().copied().unwrap_or(f64::NAN),
        "final_h0": h0,
        "final_h1": h1,
        "aborted": fit.aborted,
        "rejected_steps": fit.rejected_steps,
        "gamma": fit.params.gamma.to_vec(),
        "delta": fit.params.delta.to_vec(),
        "dispersion": fit.params.dispersion().to_vec(),
        "config": fit.config,
    });
    serde_json::to_string_pretty(&summary).expect("fit summary serialize")
}

/// Write w0.csv, w1.csv, trace.csv, and fit.json into `dir`.
pub fn write_fit_outputs(dir: &Path, fit: &FitResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix_csv(&dir.join("w0.csv"), &fit.params.w0)?;
    write_matrix_csv(&dir.join("w1.csv"), &fit.params.w1)?;
    atomic_write(&dir.join("trace.csv"), &trace_to_csv(fit))?;
    atomic_write(&dir.join("fit.json"), &fit_summary_json(fit))?;
    Ok(())
}

pub const EVAL_CSV_HEADER: &str = "shd,tpr,fdr,auprc,auprc_ratio,tp,fp,fn,reversed";

/// One-row CSV rendering of an evaluation report.
pub fn eval_to_csv(report: &EvalReport) -> String {
    format!(
        "{EVAL_CSV_HEADER}\n{},{},{},{},{},{},{},{},{}\n",
        report.shd,
        report.tpr,
        report.fdr,
        report.auprc,
        report.auprc_ratio,
        report.tp,
        report.fp,
        report.fn_count,
        report.reversed
    )
}

/// Write eval.csv and pretty eval.json into `dir`.
pub fn write_eval_outputs(dir: &Path, report: &EvalReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    atomic_write(&dir.join("eval.csv"), &eval_to_csv(report))?;
    atomic_write(
        &dir.join("eval.json"),
        &serde_json::to_string_pretty(report)?,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn matrix_round_trip_is_exact() {
        let m = array![[0.1, -2.5e-7, 3.0], [1e13, 0.0, -0.30000000000000004]];
        let text = matrix_to_csv(&m);
        let back = matrix_from_csv(&text).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn dataset_round_trip_and_integer_rendering() {
        let x = Dataset::from_rows(vec![vec![0, 3, 10000000000000], vec![7, 0, 1]]).unwrap();
        let text = dataset_to_csv(&x);
        assert!(text.starts_with("x0,x1,x2\n0,3,10000000000000\n"));
        let back = dataset_from_csv(&text).unwrap();
        assert_eq!(x, back);
    }

    #[test]
    fn dataset_csv_rejects_bad_cells() {
        assert!(dataset_from_csv("a,b\n1,-2\n").is_err());
        assert!(dataset_from_csv("a,b\n1\n").is_err());
        assert!(dataset_from_csv("").is_err());
    }

    #[test]
    fn eval_csv_shape() {
        let rep = EvalReport {
            shd: 3,
            tpr: 0.5,
            fdr: 0.25,
            auprc: 0.75,
            auprc_ratio: 2.0,
            tp: 2,
            fp: 1,
            fn_count: 2,
            reversed: 1,
        };
        let text = eval_to_csv(&rep);
        assert_eq!(
            text,
            "shd,tpr,fdr,auprc,auprc_ratio,tp,fp,fn,reversed\n3,0.5,0.25,0.75,2,2,1,2,1\n"
        );
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        atomic_write(&path, "first\n").unwrap();
        atomic_write(&path, "second\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second\n");
        assert!(fs::read_dir(dir.path()).unwrap().count() == 1);
    }
}
