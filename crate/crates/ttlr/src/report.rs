//! CSV output for the analysis results, one row per grid point or per `eta`.

use std::io::Write;

use serde::Serialize;
use ttlr_core::analysis::{BayesCheck, CurvatureReport, InflectionKind};

#[derive(Serialize)]
struct CurvatureRow {
    margin: f64,
    loss: f64,
    first_deriv: f64,
    second_deriv: f64,
}

/// Columns `margin,loss,first_deriv,second_deriv`. Points outside the loss domain have
/// `inf` loss and `NaN` derivatives.
pub fn write_curvature_csv<W: Write>(out: W, report: &CurvatureReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for i in 0..report.grid.len() {
        w.serialize(CurvatureRow {
            margin: report.grid[i],
            loss: report.loss[i],
            first_deriv: report.first_deriv[i],
            second_deriv: report.second_deriv[i],
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct InflectionRow {
    margin: f64,
    kind: &'static str,
    residual: f64,
}

/// Columns `margin,kind,residual`.
pub fn write_inflections_csv<W: Write>(out: W, report: &CurvatureReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in &report.inflection_points {
        w.serialize(InflectionRow {
            margin: p.margin,
            kind: match p.kind {
                InflectionKind::SignChange => "sign_change",
                InflectionKind::PlateauBoundary => "plateau_boundary",
            },
            residual: p.residual,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct BayesRow {
    eta: f64,
    t1: f64,
    t2: f64,
    a_star_numeric: f64,
    a_star_closed_form: f64,
    abs_error: f64,
    sign_consistent: bool,
}

/// Columns `eta,t1,t2,a_star_numeric,a_star_closed_form,abs_error,sign_consistent`.
pub fn write_bayes_csv<W: Write>(out: W, checks: &[BayesCheck]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in checks {
        w.serialize(BayesRow {
            eta: c.eta,
            t1: c.temps.t1.get(),
            t2: c.temps.t2.get(),
            a_star_numeric: c.a_star_numeric,
            a_star_closed_form: c.a_star_closed_form,
            abs_error: c.abs_error(),
            sign_consistent: c.sign_consistent,
        })?;
    }
    w.flush()?;
    Ok(())
}
