//! CSV outputs. Column sets are fixed:
//!
//! | file | columns |
//! |---|---|
//! | axioms | `rule_or_model, axiom, distribution, n_applicable, satisfied_pct` |
//! | summary | `rule_or_model, metric, value, relative` |
//! | curve | `step, series, metric, value` |
//! | similarity | `row, column, identity_pct, subset_pct` |
//! | crossval | `fold, train_loss, train_accuracy, test_loss, test_accuracy` |
//!
//! Percentages are written with four decimals, curve values with six.

use std::path::Path;

use crate::eval::EvalReport;
use crate::error::Result;

pub fn fmt4(x: f64) -> String {
    format!("{x:.4}")
}

fn writer(path: &Path, header: &[&str]) -> Result<csv::Writer<std::fs::File>> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    Ok(w)
}

pub fn write_axioms(path: &Path, reports: &[&EvalReport]) -> Result<()> {
    let mut w = writer(
        path,
        &["rule_or_model", "axiom", "distribution", "n_applicable", "satisfied_pct"],
    )?;
    for r in reports {
        for a in &r.axioms {
            w.write_record([
                r.label.clone(),
                a.axiom.to_string(),
                r.distribution.clone(),
                a.n_applicable.to_string(),
                fmt4(a.satisfied_pct),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// The teacher's own row has relative 0 everywhere; model rows carry
/// `teacher − model`.
pub fn write_summary(path: &Path, teacher: &EvalReport, models: &[&EvalReport]) -> Result<()> {
    let mut w = writer(path, &["rule_or_model", "metric", "value", "relative"])?;
    for r in std::iter::once(teacher).chain(models.iter().copied()) {
        for ((name, value), (_, rel)) in r.columns().into_iter().zip(r.relative_to(teacher)) {
            w.write_record([r.label.clone(), name, fmt4(value), fmt4(rel)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per (step, series, metric).
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub step: usize,
    pub series: String,
    pub metric: String,
    pub value: f64,
}

pub fn write_curve(path: &Path, points: &[CurvePoint]) -> Result<()> {
    let mut w = writer(path, &["step", "series", "metric", "value"])?;
    for p in points {
        w.write_record([p.step.to_string(), p.series.clone(), p.metric.clone(), format!("{:.6}", p.value)])?;
    }
    w.flush()?;
    Ok(())
}
