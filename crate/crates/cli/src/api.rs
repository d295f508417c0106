//! Request and response documents shared by the CLI and the HTTP service.
//!
//! Both front ends parse into these types and build their output with the
//! same functions, so identical inputs give identical JSON.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use softsnap_core::inverse::DEFAULT_ALTERNATES;
use softsnap_core::io::{Document, PatternDocument};
use softsnap_core::skeleton::{midpoint, DEFAULT_THETA_START};
use softsnap_core::{
    design_with_alternates, forward_kinematics, solve_equilibrium, DesignQuery, DesignResult,
    EquilibriumProblem, EquilibriumSolution, Error, Point2, Pose, RankedDesign, SkeletonConfig,
    SweepStep, SweepStop, ThreadingPattern,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveRequest {
    /// Defaults to the stock module when absent.
    #[serde(default)]
    pub config: Option<SkeletonConfig>,
    pub pattern: PatternDocument,
    pub target_length: f64,
    #[serde(default)]
    pub initial_alphas: Option<Vec<f64>>,
    /// When set, the request and its result are appended to this session.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResponse {
    #[serde(flatten)]
    pub solution: EquilibriumSolution,
    pub target_length: f64,
    pub rib_poses: Vec<Pose>,
    pub centerline: Vec<Point2>,
    pub midpoint: Point2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRequest {
    #[serde(default)]
    pub config: Option<SkeletonConfig>,
    pub pattern: PatternDocument,
    pub contraction_max: f64,
    #[serde(default = "default_step")]
    pub step: f64,
}

fn default_step() -> f64 {
    softsnap_core::forward::DEFAULT_SWEEP_STEP
}

/// One sweep step as written to `sweep.csv` and streamed by the service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub step_index: usize,
    pub target_length_mm: f64,
    pub alphas: Vec<f64>,
    pub mid_x_mm: f64,
    pub mid_y_mm: f64,
    pub energy: f64,
}

impl From<&SweepStep> for SweepRow {
    fn from(step: &SweepStep) -> Self {
        SweepRow {
            step_index: step.step_index,
            target_length_mm: step.target_length,
            alphas: step.solution.alphas.clone(),
            mid_x_mm: step.midpoint.x,
            mid_y_mm: step.midpoint.y,
            energy: step.solution.energy,
        }
    }
}

/// A line of the streamed sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepEvent {
    Row(SweepRow),
    Stopped(SweepStop),
    Error(ErrorDetail),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignRequest {
    #[serde(default)]
    pub config: Option<SkeletonConfig>,
    /// Radians.
    pub target_alphas: Vec<f64>,
    #[serde(default)]
    pub max_candidates: Option<usize>,
    #[serde(default)]
    pub rank_tolerance: Option<f64>,
    #[serde(default = "default_alternates")]
    pub alternates: usize,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
}

fn default_alternates() -> usize {
    DEFAULT_ALTERNATES
}

/// A design result as reported to users: angles in both units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub offsets: Vec<f64>,
    pub total_length_mm: f64,
    pub achieved_alphas_rad: Vec<f64>,
    pub achieved_alphas_deg: Vec<f64>,
    pub residual_rad: f64,
    pub candidates_evaluated: usize,
}

impl From<&DesignResult> for DesignReport {
    fn from(r: &DesignResult) -> Self {
        DesignReport {
            offsets: r.pattern.offsets().to_vec(),
            total_length_mm: r.total_length,
            achieved_alphas_rad: r.achieved_alphas.clone(),
            achieved_alphas_deg: r.achieved_alphas.iter().map(|a| a.to_degrees()).collect(),
            residual_rad: r.residual,
            candidates_evaluated: r.candidates_evaluated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResponse {
    #[serde(flatten)]
    pub best: DesignReport,
    pub alternates: Vec<DesignReport>,
}

impl From<&RankedDesign> for DesignResponse {
    fn from(r: &RankedDesign) -> Self {
        DesignResponse {
            best: DesignReport::from(&r.best),
            alternates: r.alternates.iter().map(DesignReport::from).collect(),
        }
    }
}

/// Machine-readable error payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl From<&Error> for ErrorDetail {
    fn from(err: &Error) -> Self {
        let details = match err {
            Error::InfeasibleTarget { target, min_length } => {
                Some(json!({ "target_length": target, "min_length": min_length }))
            }
            Error::DidNotConverge { iterations, .. } => Some(json!({ "iterations": iterations })),
            Error::AmbiguousInversion { segment } => Some(json!({ "segment": segment })),
            Error::AllCandidatesFailed(n) => Some(json!({ "candidates": n })),
            _ => None,
        };
        ErrorDetail {
            code: err.code().to_string(),
            message: err.to_string(),
            details,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: ErrorDetail,
}

fn config_or_default(config: &Option<SkeletonConfig>) -> Result<SkeletonConfig, Error> {
    let cfg = config.clone().unwrap_or_default();
    cfg.validate()?;
    Ok(cfg)
}

impl SolveRequest {
    pub fn problem(&self) -> Result<EquilibriumProblem, Error> {
        let cfg = config_or_default(&self.config)?;
        let pattern = ThreadingPattern::new(&cfg, self.pattern.offsets.clone())?;
        let mut problem = EquilibriumProblem::new(cfg, pattern, self.target_length);
        problem.initial_alphas = self.initial_alphas.clone();
        Ok(problem)
    }
}

impl SweepRequest {
    pub fn problem(&self) -> Result<EquilibriumProblem, Error> {
        let cfg = config_or_default(&self.config)?;
        let pattern = ThreadingPattern::new(&cfg, self.pattern.offsets.clone())?;
        Ok(EquilibriumProblem::new(cfg, pattern, 0.0))
    }
}

impl DesignRequest {
    pub fn query(&self) -> Result<DesignQuery, Error> {
        let cfg = config_or_default(&self.config)?;
        let mut query = DesignQuery::new(cfg, self.target_alphas.clone());
        if let Some(n) = self.max_candidates {
            query.max_candidates = n;
        }
        if let Some(t) = self.rank_tolerance {
            query.rank_tolerance = t;
        }
        query.workers = self.workers;
        Ok(query)
    }
}

pub fn solve(request: &SolveRequest) -> Result<SolveResponse, Error> {
    let problem = request.problem()?;
    let solution = solve_equilibrium(&problem)?;
    solve_response(&problem.config, solution, problem.target_length)
}

pub fn solve_response(
    cfg: &SkeletonConfig,
    solution: EquilibriumSolution,
    target_length: f64,
) -> Result<SolveResponse, Error> {
    let state = forward_kinematics(cfg, &solution.alphas, DEFAULT_THETA_START)?;
    let mid = midpoint(cfg, &solution.alphas, DEFAULT_THETA_START)?;
    Ok(SolveResponse {
        solution,
        target_length,
        rib_poses: state.rib_poses,
        centerline: state.centerline,
        midpoint: mid,
    })
}

pub fn design(request: &DesignRequest) -> Result<DesignResponse, Error> {
    let ranked = design_with_alternates(&request.query()?, request.alternates)?;
    Ok(DesignResponse::from(&ranked))
}

/// Compact JSON with the schema field, as sent over HTTP.
pub fn to_json<T: Serialize>(body: &T) -> String {
    serde_json::to_string(&Document::new(body)).expect("response types serialize")
}

/// Indented JSON with the schema field, as written to files.
pub fn to_pretty_json<T: Serialize>(body: &T) -> String {
    serde_json::to_string_pretty(&Document::new(body)).expect("response types serialize")
}

pub fn sweep_csv_header(segments: usize) -> Vec<String> {
    let mut header = vec!["step_index".to_string(), "target_length_mm".to_string()];
    header.extend((0..segments).map(|i| format!("alpha_{i}")));
    header.extend(["mid_x_mm", "mid_y_mm", "energy"].map(String::from));
    header
}

pub fn write_sweep_csv<W: Write>(writer: W, segments: usize, rows: &[SweepRow]) -> Result<(), Error> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(sweep_csv_header(segments))?;
    for row in rows {
        let mut record = vec![row.step_index.to_string(), row.target_length_mm.to_string()];
        record.extend(row.alphas.iter().map(f64::to_string));
        record.extend([row.mid_x_mm, row.mid_y_mm, row.energy].map(|v| v.to_string()));
        csv.write_record(&record)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(reader: R) -> Result<Vec<SweepRow>, Error> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    let segments = headers.len().checked_sub(5).ok_or_else(|| Error::Format("sweep CSV has too few columns".into()))?;
    if headers.iter().ne(sweep_csv_header(segments).iter().map(String::as_str)) {
        return Err(Error::Format(format!(
            "sweep CSV header must be {}",
            sweep_csv_header(segments).join(",")
        )));
    }
    let mut rows = Vec::new();
    for record in csv.records() {
        let record = record?;
        let num = |i: usize| -> Result<f64, Error> {
            record[i]
                .parse()
                .map_err(|_| Error::Format(format!("column {} is not a number: {:?}", &headers[i], &record[i])))
        };
        rows.push(SweepRow {
            step_index: record[0]
                .parse()
                .map_err(|_| Error::Format(format!("bad step_index {:?}", &record[0])))?,
            target_length_mm: num(1)?,
            alphas: (0..segments).map(|i| num(2 + i)).collect::<Result<_, _>>()?,
            mid_x_mm: num(2 + segments)?,
            mid_y_mm: num(3 + segments)?,
            energy: num(4 + segments)?,
        });
    }
    Ok(rows)
}
