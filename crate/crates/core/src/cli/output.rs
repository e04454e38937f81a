//! CSV emission. Floats are written with 17 significant digits so traces
//! can be diffed across implementations.

use std::io::Write;

use crate::bounds::BoundsRow;
use crate::error::Result;
use crate::optimizer::Trace;
use crate::pareto::SweepPoint;

pub const TRACE_HEADER: [&str; 6] = [
    "k",
    "alpha_k",
    "disagreement",
    "sum_sq_dist_to_opt",
    "f_of_y",
    "min_w_entry",
];

pub const BOUNDS_HEADER: [&str; 5] = [
    "k",
    "disagreement",
    "disagreement_bound",
    "sum_sq_dist_to_opt",
    "optimality_bound",
];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_trace_csv<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        w.write_record([
            r.k.to_string(),
            fmt_f64(r.alpha_k),
            fmt_f64(r.disagreement),
            fmt_opt(r.sum_sq_dist_to_opt),
            fmt_f64(r.f_of_y),
            fmt_f64(r.min_w_entry),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bounds_csv<W: Write>(rows: &[BoundsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BOUNDS_HEADER)?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            fmt_f64(r.disagreement),
            fmt_f64(r.disagreement_bound),
            fmt_opt(r.sum_sq_dist_to_opt),
            fmt_opt(r.optimality_bound),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let m = points.first().map_or(0, |p| p.f_values.len());
    let mut header = vec!["run_id".to_string()];
    header.extend((1..=m).map(|i| format!("wbar_{i}")));
    header.extend((1..=m).map(|i| format!("f_{i}")));
    header.extend(["weighted_value", "oracle_f", "relative_gap"].map(String::from));
    w.write_record(&header)?;
    for p in points {
        let mut row = vec![p.run_id.clone()];
        row.extend(p.wbar.iter().map(|v| fmt_f64(*v)));
        row.extend(p.f_values.iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(p.weighted_value));
        row.push(fmt_f64(p.oracle_f));
        row.push(fmt_f64(p.relative_gap()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
