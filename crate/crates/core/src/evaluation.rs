//! Comparison of measured marker traces with simulated rib centers.
//!
//! A trace is brought into the simulation frame by a rigid motion: the
//! origin marker goes to `(0, 0)` and the axis marker onto the +x axis.
//! Rib centers are then matched by index, base to tip.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::EquilibriumSolution;
use crate::skeleton::{forward_kinematics, Point2, SkeletonConfig, DEFAULT_THETA_START};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerTrace {
    pub origin_marker: Point2,
    pub axis_marker: Point2,
    pub rib_centers: Vec<Point2>,
    pub step_label: String,
}

impl MarkerTrace {
    /// Applies the rigid motion `p -> R(angle) p + (tx, ty)` to every marker.
    pub fn transformed(&self, angle: f64, tx: f64, ty: f64) -> MarkerTrace {
        let (s, c) = angle.sin_cos();
        let map = |p: &Point2| Point2::new(c * p.x - s * p.y + tx, s * p.x + c * p.y + ty);
        MarkerTrace {
            origin_marker: map(&self.origin_marker),
            axis_marker: map(&self.axis_marker),
            rib_centers: self.rib_centers.iter().map(map).collect(),
            step_label: self.step_label.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub step_labels: Vec<String>,
    pub per_step_rmse: Vec<f64>,
    pub average_rmse: f64,
    pub n_points: usize,
}

pub fn align_trace(trace: &MarkerTrace) -> Result<MarkerTrace> {
    let dx = trace.axis_marker.x - trace.origin_marker.x;
    let dy = trace.axis_marker.y - trace.origin_marker.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::DegenerateMarkers);
    }
    let angle = -dy.atan2(dx);
    let (s, c) = angle.sin_cos();
    let o = trace.origin_marker;
    let map = |p: &Point2| {
        let (x, y) = (p.x - o.x, p.y - o.y);
        Point2::new(c * x - s * y, s * x + c * y)
    };
    Ok(MarkerTrace {
        origin_marker: Point2::new(0.0, 0.0),
        axis_marker: Point2::new(dx.hypot(dy), 0.0),
        rib_centers: trace.rib_centers.iter().map(map).collect(),
        step_label: trace.step_label.clone(),
    })
}

/// Root-mean-square distance between index-matched point sets.
pub fn rmse(measured: &[Point2], simulated: &[Point2]) -> Result<f64> {
    if measured.len() != simulated.len() {
        return Err(Error::RibCountMismatch {
            expected: simulated.len(),
            actual: measured.len(),
        });
    }
    if measured.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = measured
        .iter()
        .zip(simulated)
        .map(|(m, s)| (m.x - s.x).powi(2) + (m.y - s.y).powi(2))
        .sum();
    Ok((sum / measured.len() as f64).sqrt())
}

/// Per-step and average RMSE of `traces` against the rib centers of
/// `solutions`, simulated with the spine leaving the origin along +x.
pub fn rmse_against_simulation(
    traces: &[MarkerTrace],
    solutions: &[EquilibriumSolution],
    cfg: &SkeletonConfig,
) -> Result<RmseReport> {
    rmse_against_simulation_in_frame(traces, solutions, cfg, DEFAULT_THETA_START)
}

/// As [`rmse_against_simulation`], with an explicit base rib orientation.
pub fn rmse_against_simulation_in_frame(
    traces: &[MarkerTrace],
    solutions: &[EquilibriumSolution],
    cfg: &SkeletonConfig,
    theta_start: f64,
) -> Result<RmseReport> {
    let angle_sets: Vec<&[f64]> = solutions.iter().map(|s| s.alphas.as_slice()).collect();
    rmse_against_angles(traces, &angle_sets, cfg, theta_start)
}

/// Per-step RMSE against shapes given directly as bending angles, one
/// angle list per trace.
pub fn rmse_against_angles(
    traces: &[MarkerTrace],
    angle_sets: &[&[f64]],
    cfg: &SkeletonConfig,
    theta_start: f64,
) -> Result<RmseReport> {
    if traces.len() != angle_sets.len() {
        return Err(Error::StepCountMismatch {
            traces: traces.len(),
            solutions: angle_sets.len(),
        });
    }
    let mut per_step_rmse = Vec::with_capacity(traces.len());
    for (trace, alphas) in traces.iter().zip(angle_sets) {
        if trace.rib_centers.len() != cfg.n_ribs {
            return Err(Error::RibCountMismatch {
                expected: cfg.n_ribs,
                actual: trace.rib_centers.len(),
            });
        }
        let aligned = align_trace(trace)?;
        let simulated = forward_kinematics(cfg, alphas, theta_start)?.rib_centers();
        per_step_rmse.push(rmse(&aligned.rib_centers, &simulated)?);
    }
    let average_rmse = if per_step_rmse.is_empty() {
        0.0
    } else {
        per_step_rmse.iter().sum::<f64>() / per_step_rmse.len() as f64
    };
    Ok(RmseReport {
        step_labels: traces.iter().map(|t| t.step_label.clone()).collect(),
        per_step_rmse,
        average_rmse,
        n_points: cfg.n_ribs,
    })
}

/// Noise-free trace of a simulated equilibrium, in the simulation frame.
/// The axis marker is placed `axis_distance` mm along +x.
pub fn simulated_trace(
    cfg: &SkeletonConfig,
    solution: &EquilibriumSolution,
    step_label: impl Into<String>,
    axis_distance: f64,
) -> Result<MarkerTrace> {
    let state = forward_kinematics(cfg, &solution.alphas, DEFAULT_THETA_START)?;
    Ok(MarkerTrace {
        origin_marker: Point2::new(0.0, 0.0),
        axis_marker: Point2::new(axis_distance, 0.0),
        rib_centers: state.rib_centers(),
        step_label: step_label.into(),
    })
}

/// Reads traces from CSV with header `step,ox,oy,ax,ay,x0,y0,...,xN,yN`.
pub fn read_traces_csv<R: Read>(reader: R) -> Result<Vec<MarkerTrace>> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    let fixed = ["step", "ox", "oy", "ax", "ay"];
    if headers.len() < fixed.len() || headers.iter().zip(fixed).any(|(h, f)| h != f) {
        return Err(Error::Format(format!(
            "trace CSV must start with {}",
            fixed.join(",")
        )));
    }
    let point_columns = headers.len() - fixed.len();
    if !point_columns.is_multiple_of(2) {
        return Err(Error::Format("rib columns must come in x,y pairs".into()));
    }
    for k in 0..point_columns / 2 {
        let (hx, hy) = (&headers[5 + 2 * k], &headers[6 + 2 * k]);
        if hx != format!("x{k}") || hy != format!("y{k}") {
            return Err(Error::Format(format!("expected columns x{k},y{k}, found {hx},{hy}")));
        }
    }
    let mut traces = Vec::new();
    for record in csv.records() {
        let record = record?;
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("column {} is not a number: {:?}", &headers[i], &record[i])))
        };
        traces.push(MarkerTrace {
            step_label: record[0].to_string(),
            origin_marker: Point2::new(num(1)?, num(2)?),
            axis_marker: Point2::new(num(3)?, num(4)?),
            rib_centers: (0..point_columns / 2)
                .map(|k| Ok(Point2::new(num(5 + 2 * k)?, num(6 + 2 * k)?)))
                .collect::<Result<_>>()?,
        });
    }
    Ok(traces)
}

pub fn write_traces_csv<W: Write>(writer: W, traces: &[MarkerTrace]) -> Result<()> {
    let n = traces.first().map_or(0, |t| t.rib_centers.len());
    let mut csv = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["step", "ox", "oy", "ax", "ay"].iter().map(|s| s.to_string()).collect();
    for k in 0..n {
        header.push(format!("x{k}"));
        header.push(format!("y{k}"));
    }
    csv.write_record(&header)?;
    for t in traces {
        if t.rib_centers.len() != n {
            return Err(Error::RibCountMismatch {
                expected: n,
                actual: t.rib_centers.len(),
            });
        }
        let mut row = vec![
            t.step_label.clone(),
            t.origin_marker.x.to_string(),
            t.origin_marker.y.to_string(),
            t.axis_marker.x.to_string(),
            t.axis_marker.y.to_string(),
        ];
        for p in &t.rib_centers {
            row.push(p.x.to_string());
            row.push(p.y.to_string());
        }
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

/// Report as CSV rows of `(step, rmse_mm)`.
pub fn write_report_csv<W: Write>(writer: W, report: &RmseReport) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["step", "rmse_mm"])?;
    for (label, value) in report.step_labels.iter().zip(&report.per_step_rmse) {
        csv.write_record([label.clone(), value.to_string()])?;
    }
    csv.flush()?;
    Ok(())
}
