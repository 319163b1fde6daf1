//! CSV and JSON emission for experiment results and power curves.
//!
//! Floats are written in shortest round-trip form, so every file parses
//! back to the values that produced it and identical runs give identical
//! bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{CellResult, Manifest};
use crate::metrics::{power_curve, ParamMetrics, PowerCurve};

/// Discrepancy reported in the `power_at_0p5` column.
pub const SUMMARY_DISCREPANCY: f64 = 0.5;

/// One row of `cell_results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResultRow {
    pub case: u8,
    pub n: usize,
    pub k: usize,
    pub spec: String,
    pub param: String,
    pub mean_bias: f64,
    pub emp_var: f64,
    pub paper_var: f64,
    pub mse: f64,
    pub mae: f64,
    pub mpe: Option<f64>,
    pub mape: Option<f64>,
    pub ci_coverage: f64,
    pub ci_width: f64,
    pub power_at_0p5: f64,
    pub failures: usize,
}

/// One row of `fit_summary.csv`: the mean slope SE of `x1` per spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummaryRow {
    pub spec: String,
    pub se: f64,
    pub df: usize,
    pub alpha: f64,
}

/// One row of `power_curve.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub spec: String,
    pub discrepancy: f64,
    pub power: f64,
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
        csv::ErrorKind::Deserialize { err, .. } => Error::Parse {
            row,
            column: err.field().map_or_else(|| "?".into(), |f| f.to_string()),
            message: err.to_string(),
        },
        other => Error::Parse {
            row,
            column: "?".into(),
            message: format!("{other:?}"),
        },
    }
}

fn param_row(cell: &CellResult, spec: &str, p: &ParamMetrics, failures: usize) -> CellResultRow {
    CellResultRow {
        case: cell.config.case.id,
        n: cell.config.n,
        k: cell.config.k,
        spec: spec.to_string(),
        param: p.name.clone(),
        mean_bias: p.mean_bias,
        emp_var: p.emp_var,
        paper_var: p.paper_var,
        mse: p.mse,
        mae: p.mae,
        mpe: p.mpe,
        mape: p.mape,
        ci_coverage: p.ci_coverage,
        ci_width: p.ci_width,
        power_at_0p5: p.power.at(SUMMARY_DISCREPANCY).power,
        failures,
    }
}

/// Rows of `cell_results.csv` for one cell: each slope, then the trend.
pub fn cell_rows(cell: &CellResult) -> Vec<CellResultRow> {
    let mut rows = Vec::new();
    for o in &cell.outcomes {
        if let Some(m) = &o.metrics {
            for p in m.slopes.iter().chain(m.trend.as_ref()) {
                rows.push(param_row(cell, o.spec.name(), p, o.failure_count()));
            }
        }
    }
    rows
}

pub fn fit_summary_rows(cell: &CellResult) -> Vec<FitSummaryRow> {
    cell.outcomes
        .iter()
        .filter_map(|o| {
            let m = o.metrics.as_ref()?;
            Some(FitSummaryRow {
                spec: o.spec.name().into(),
                se: m.slopes[0].mean_se,
                df: m.df,
                alpha: m.alpha,
            })
        })
        .collect()
}

pub fn write_rows<T: Serialize, W: Write>(w: W, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_error)?;
    rdr.deserialize().map(|r| r.map_err(csv_error)).collect()
}

fn write_file<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_rows(BufWriter::new(File::create(path)?), rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

/// `manifest.json`, `cell_results.csv` and `cell_XXX/fit_summary.csv`.
pub fn write_experiment(dir: &Path, cells: &[CellResult], manifest: &Manifest) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("manifest.json"), manifest)?;
    let rows: Vec<CellResultRow> = cells.iter().flat_map(cell_rows).collect();
    write_file(&dir.join("cell_results.csv"), &rows)?;
    for cell in cells {
        let sub = dir.join(format!("cell_{:03}", cell.index));
        std::fs::create_dir_all(&sub)?;
        write_file(&sub.join("fit_summary.csv"), &fit_summary_rows(cell))?;
    }
    Ok(())
}

pub fn power_rows(spec: &str, curve: &PowerCurve) -> Vec<PowerRow> {
    curve
        .points
        .iter()
        .map(|p| PowerRow {
            spec: spec.to_string(),
            discrepancy: p.discrepancy,
            power: p.power,
        })
        .collect()
}

/// Power curves for every row of a fit summary.
pub fn power_rows_from_summary(summary: &[FitSummaryRow]) -> Result<Vec<PowerRow>> {
    let mut rows = Vec::with_capacity(summary.len() * crate::metrics::GRID_POINTS);
    for s in summary {
        let curve = power_curve(s.se, s.df, s.alpha)?;
        rows.extend(power_rows(&s.spec, &curve));
    }
    Ok(rows)
}

/// One console line per spec: mean bias and variance of `x1`, power at 0.5,
/// interval coverage.
pub fn summary_lines(cell: &CellResult) -> Vec<String> {
    cell.outcomes
        .iter()
        .map(|o| match &o.metrics {
            Some(m) => {
                let p = &m.slopes[0];
                format!(
                    "{:<10} {:<10} bias={:+.5} var={:.6} power@0.5={:.4} coverage={:.3} failures={}",
                    cell.config.label(),
                    o.spec.name(),
                    p.mean_bias,
                    p.emp_var,
                    p.power.at(SUMMARY_DISCREPANCY).power,
                    p.ci_coverage,
                    o.failure_count()
                )
            }
            None => format!("{:<10} {:<10} no successful fits", cell.config.label(), o.spec.name()),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip() {
        let rows = vec![
            CellResultRow {
                case: 1,
                n: 100,
                k: 1,
                spec: "FE_s".into(),
                param: "x1".into(),
                mean_bias: -1.2345678901234567e-4,
                emp_var: 0.1 + 0.2,
                paper_var: 1.0 / 3.0,
                mse: 1e-300,
                mae: 0.0,
                mpe: None,
                mape: Some(0.25),
                ci_coverage: 0.95,
                ci_width: 0.123,
                power_at_0p5: 1.0 - 1e-12,
                failures: 3,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_file(&path, &rows).unwrap();
        let back: Vec<CellResultRow> = read_rows(&path).unwrap();
        assert_eq!(back, rows);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(
            "case,n,k,spec,param,mean_bias,emp_var,paper_var,mse,mae,mpe,mape,ci_coverage,ci_width,power_at_0p5,failures\n"
        ));
    }

    #[test]
    fn malformed_summary_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "spec,se,df,alpha\nFE_s,abc,10,0.05\n").unwrap();
        assert!(matches!(read_rows::<FitSummaryRow>(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn power_rows_per_spec() {
        let s = vec![
            FitSummaryRow { spec: "FE_s".into(), se: 0.05, df: 2000, alpha: 0.05 },
            FitSummaryRow { spec: "FE_t".into(), se: 0.2, df: 2000, alpha: 0.05 },
        ];
        let rows = power_rows_from_summary(&s).unwrap();
        assert_eq!(rows.len(), 200);
        assert!(rows[..100].windows(2).all(|w| w[0].power <= w[1].power));
    }
}
