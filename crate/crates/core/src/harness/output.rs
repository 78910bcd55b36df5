//! CSV tables and SVG plots.

use super::{ExperimentConfig, HarnessError, Overlay, Regime, RunReport, SweepResult, SweepRow};
use crate::io::{fmt17, write_state_csv};
use crate::solver::{SimState, Trajectory};
use plotters::prelude::*;
use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const SWEEP_HEADER: &str =
    "epsilon,delta,h,dt,l1_error,l2_norm,l5_norm,linf,tv_ratio,energy_residual,max_entropy_production,concentration,regime";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Csv,
    Svg,
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn row_fields(r: &SweepRow) -> [String; 13] {
    [
        fmt17(r.epsilon),
        fmt17(r.delta),
        fmt17(r.h),
        fmt17(r.dt),
        fmt17(r.l1_error),
        fmt17(r.l2_norm),
        fmt17(r.l5_norm),
        fmt17(r.linf),
        fmt17(r.tv_ratio),
        fmt17(r.energy_residual),
        fmt17(r.max_entropy_production),
        fmt17(r.concentration),
        r.regime.to_string(),
    ]
}

pub fn write_sweep_csv(rows: &[SweepRow], w: impl Write) -> Result<(), HarnessError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(SWEEP_HEADER.split(',')).map_err(csv_err)?;
    for r in rows {
        wtr.write_record(row_fields(r)).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Validation(format!("csv: {e}"))
}

pub fn read_sweep_csv(text: &str) -> Result<Vec<SweepRow>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header.join(",") != SWEEP_HEADER {
        return Err(HarnessError::Validation(format!("unexpected header {:?}", header.join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 13 {
            return Err(HarnessError::Validation(format!("row has {} fields, expected 13", rec.len())));
        }
        let v = |i: usize| -> Result<f64, HarnessError> {
            rec[i].parse::<f64>().map_err(|e| HarnessError::Validation(format!("column {i}: {e}")))
        };
        rows.push(SweepRow {
            epsilon: v(0)?,
            delta: v(1)?,
            h: v(2)?,
            dt: v(3)?,
            l1_error: v(4)?,
            l2_norm: v(5)?,
            l5_norm: v(6)?,
            linf: v(7)?,
            tv_ratio: v(8)?,
            energy_residual: v(9)?,
            max_entropy_production: v(10)?,
            concentration: v(11)?,
            regime: rec[12].parse::<Regime>()?,
        });
    }
    Ok(rows)
}

fn plot_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Plot(e.to_string())
}

fn padded_log_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| *v > 0.0 && v.is_finite())
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.1, 10.0);
    }
    if lo == hi {
        (lo / 2.0, hi * 2.0)
    } else {
        (lo / 1.3, hi * 1.3)
    }
}

/// Log-log plot of l1_error against ε.
pub fn plot_l1_error(rows: &[SweepRow], path: &Path) -> Result<(), HarnessError> {
    let (xlo, xhi) = padded_log_range(rows.iter().map(|r| r.epsilon));
    let (ylo, yhi) = padded_log_range(rows.iter().map(|r| r.l1_error));
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("L1 error against epsilon", ("sans-serif", 20))
        .margin(16)
        .x_label_area_size(48)
        .y_label_area_size(72)
        .build_cartesian_2d((xlo..xhi).log_scale(), (ylo..yhi).log_scale())
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("epsilon")
        .y_desc("L1 error")
        .x_label_formatter(&|v| format!("{v:.1e}"))
        .y_label_formatter(&|v| format!("{v:.1e}"))
        .draw()
        .map_err(plot_err)?;
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.epsilon > 0.0 && r.l1_error > 0.0).map(|r| (r.epsilon, r.l1_error)).collect();
    chart.draw_series(LineSeries::new(pts.clone(), &BLUE)).map_err(plot_err)?;
    chart.draw_series(pts.iter().map(|&p| Circle::new(p, 4, BLUE.filled()))).map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Final states of every member overlaid on their references.
pub fn plot_overlays(overlays: &[Overlay], path: &Path) -> Result<(), HarnessError> {
    let first = overlays.first().ok_or_else(|| HarnessError::Validation("nothing to plot".into()))?;
    let g = first.state.grid;
    let values = overlays.iter().flat_map(|o| o.state.u.iter().chain(&o.reference.u));
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let pad = 0.05 * (hi - lo).max(1e-12);
    let root = SVGBackend::new(path, (900, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("final states and reference", ("sans-serif", 20))
        .margin(16)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(g.x_left()..g.x_right(), (lo - pad)..(hi + pad))
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("x").y_desc("u").draw().map_err(plot_err)?;
    let reference = &first.reference;
    chart
        .draw_series(LineSeries::new(reference.grid.nodes().zip(reference.u.iter().copied()), BLACK.stroke_width(2)))
        .map_err(plot_err)?
        .label("reference")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], BLACK));
    for (i, o) in overlays.iter().enumerate() {
        let color = Palette99::pick(i + 1).to_rgba();
        chart
            .draw_series(LineSeries::new(o.state.grid.nodes().zip(o.state.u.iter().copied()), &color))
            .map_err(plot_err)?
            .label(format!("epsilon = {}", o.epsilon))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Writes `sweep.csv`, `l1_error.svg` and `overlay.svg` as requested.
pub fn emit_outputs(
    result: &SweepResult,
    formats: &BTreeSet<Format>,
    dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    if result.rows.is_empty() {
        return Err(HarnessError::Validation("empty sweep result".into()));
    }
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if formats.contains(&Format::Csv) {
        let p = dir.join("sweep.csv");
        write_sweep_csv(&result.rows, create(&p)?)?;
        written.push(p);
    }
    if formats.contains(&Format::Svg) {
        let p = dir.join("l1_error.svg");
        plot_l1_error(&result.rows, &p)?;
        written.push(p);
        if !result.overlays.is_empty() {
            let p = dir.join("overlay.svg");
            plot_overlays(&result.overlays, &p)?;
            written.push(p);
        }
    }
    Ok(written)
}

fn snapshot_name(t: f64) -> String {
    format!("snapshot_t{}.csv", fmt17(t))
}

fn write_state(dir: &Path, name: &str, s: &SimState) -> Result<(), HarnessError> {
    let mut w = create(&dir.join(name))?;
    write_state_csv(s, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Artifacts of a completed run.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, report: &RunReport) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    let traj = &report.trajectory;
    write_state(dir, "initial.csv", &traj.initial)?;
    for s in traj.snapshots.iter().filter(|s| cfg.snapshot_times.iter().any(|&t| (t - s.t).abs() <= 1e-12 * t)) {
        write_state(dir, &snapshot_name(s.t), s)?;
    }
    write_state(dir, "final.csv", traj.final_state())?;
    write_state(dir, "reference.csv", &report.reference.as_state())?;
    write_sweep_csv(std::slice::from_ref(&report.row), create(&dir.join("summary.csv"))?)?;
    if let Some(e) = &report.entropy {
        e.write_csv(create(&dir.join("entropy.csv"))?)?;
    }
    if let Some(h) = &report.histogram {
        h.write_csv(create(&dir.join("histogram.csv"))?)?;
    }
    let overlay =
        Overlay { epsilon: report.row.epsilon, state: traj.final_state().clone(), reference: report.reference.clone() };
    plot_overlays(std::slice::from_ref(&overlay), &dir.join("overlay.svg"))?;
    Ok(())
}

/// Whatever a blown-up run produced before failing.
pub fn write_partial(dir: &Path, traj: &Trajectory) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    write_state(dir, "initial.csv", &traj.initial)?;
    for s in &traj.snapshots {
        write_state(dir, &format!("partial_{}", snapshot_name(s.t)), s)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> Vec<SweepRow> {
        (0..3)
            .map(|i| {
                let e = 0.04 / 2f64.powi(i);
                SweepRow {
                    epsilon: e,
                    delta: 0.1 * e.powi(3),
                    h: e / 4.0,
                    dt: 1.0 / 3.0 * e,
                    l1_error: 0.1 * e.sqrt(),
                    l2_norm: std::f64::consts::PI,
                    l5_norm: 1e-300,
                    linf: 7.0,
                    tv_ratio: if i == 2 { f64::INFINITY } else { 1.0 + 1e-16 * i as f64 },
                    energy_residual: -2.5e-9,
                    max_entropy_production: 0.0,
                    concentration: 0.123_456_789_012_345_68,
                    regime: [Regime::Convergent, Regime::Indeterminate, Regime::Oscillatory][i as usize],
                }
            })
            .collect()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = sample_rows();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SWEEP_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 13));
        assert_eq!(read_sweep_csv(&text).unwrap(), rows);
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(read_sweep_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn svg_has_axis_labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l1.svg");
        plot_l1_error(&sample_rows(), &p).unwrap();
        let svg = fs::read_to_string(&p).unwrap();
        assert!(svg.contains("epsilon") && svg.contains("L1 error"));
    }
}
