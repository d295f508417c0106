//! Inverse design: which threading pattern best reproduces a target
//! sequence of bending angles.
//!
//! Each segment is screened on its own: an (entry, exit) hole pair survives
//! when bending the segment to its target angle does not lengthen the string
//! between those holes. Surviving pairs are chained into hole-consistent
//! paths by backtracking, each path is simulated with the forward model at
//! its own total string length, and the path whose equilibrium angles are
//! closest to the target (L2, radians) wins.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{solve_equilibrium, EquilibriumProblem};
use crate::skeleton::{segment_length_unchecked, Pose, SkeletonConfig, ThreadingPattern};

pub const DEFAULT_MAX_CANDIDATES: usize = 10_000;
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_ALTERNATES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignQuery {
    pub config: SkeletonConfig,
    pub target_alphas: Vec<f64>,
    pub max_candidates: usize,
    pub rank_tolerance: f64,
    /// Width of the ranking worker pool; `None` uses the global pool.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl DesignQuery {
    pub fn new(config: SkeletonConfig, target_alphas: Vec<f64>) -> Self {
        DesignQuery {
            config,
            target_alphas,
            max_candidates: DEFAULT_MAX_CANDIDATES,
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
            workers: None,
        }
    }

    pub fn with_max_candidates(mut self, max_candidates: usize) -> Self {
        self.max_candidates = max_candidates;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.target_alphas.len() != self.config.segment_count() {
            return Err(Error::AngleCount {
                expected: self.config.segment_count(),
                actual: self.target_alphas.len(),
            });
        }
        if let Some(&bad) = self
            .target_alphas
            .iter()
            .find(|a| !a.is_finite() || **a <= -PI || **a > PI)
        {
            return Err(Error::AngleOutOfRange(bad));
        }
        if self.max_candidates == 0 {
            return Err(Error::InvalidProblem("max_candidates must be positive".into()));
        }
        if !(self.rank_tolerance >= 0.0) {
            return Err(Error::InvalidProblem("rank_tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

/// A hole pair that can realize a segment's target angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentCandidate {
    pub entry_offset: f64,
    pub exit_offset: f64,
    /// String length between the holes at the target angle (mm).
    pub string_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub pattern: ThreadingPattern,
    pub total_length: f64,
    pub achieved_alphas: Vec<f64>,
    pub residual: f64,
    pub candidates_evaluated: usize,
}

/// Best design plus the next-best distinct patterns, in ranking order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDesign {
    pub best: DesignResult,
    pub alternates: Vec<DesignResult>,
}

/// All hole pairs whose string does not lengthen when the segment bends to
/// `target_alpha`, in (entry, exit) order.
pub fn enumerate_segment_candidates(
    cfg: &SkeletonConfig,
    target_alpha: f64,
) -> Result<Vec<SegmentCandidate>> {
    cfg.validate()?;
    if !target_alpha.is_finite() || target_alpha <= -PI || target_alpha > PI {
        return Err(Error::AngleOutOfRange(target_alpha));
    }
    let length = |alpha: f64, entry: f64, exit: f64| {
        segment_length_unchecked(
            cfg.segment_arc_length,
            cfg.blend_threshold,
            Pose::default(),
            alpha,
            entry,
            exit,
        )
    };
    let mut out = Vec::with_capacity(cfg.hole_offsets.len().pow(2));
    for &entry in &cfg.hole_offsets {
        for &exit in &cfg.hole_offsets {
            let bent = length(target_alpha, entry, exit);
            if bent <= length(0.0, entry, exit) {
                out.push(SegmentCandidate {
                    entry_offset: entry,
                    exit_offset: exit,
                    string_length: bent,
                });
            }
        }
    }
    Ok(out)
}

/// Hole-consistent threading paths through the per-segment candidates, in
/// lexicographic order of offsets, with their summed string lengths. At most
/// `max_paths` are returned.
pub fn backtrack_paths(
    cfg: &SkeletonConfig,
    per_segment: &[Vec<SegmentCandidate>],
    max_paths: usize,
) -> Result<Vec<(ThreadingPattern, f64)>> {
    cfg.validate()?;
    if per_segment.len() != cfg.segment_count() {
        return Err(Error::AngleCount {
            expected: cfg.segment_count(),
            actual: per_segment.len(),
        });
    }
    let search = PathSearch::new(per_segment);
    let mut paths = Vec::new();
    let mut offsets = Vec::with_capacity(cfg.n_ribs);
    search.extend(0, None, 0.0, &mut offsets, &mut paths, max_paths);
    if paths.is_empty() {
        return Err(Error::NoValidPath);
    }
    Ok(paths)
}

struct PathSearch<'a> {
    // Per segment: candidates grouped by entry hole, each group sorted by exit.
    by_entry: Vec<BTreeMap<OffsetKey, Vec<&'a SegmentCandidate>>>,
    // Per segment: entry holes from which the remaining segments can finish.
    completes: Vec<Vec<OffsetKey>>,
}

#[derive(Debug, Clone, Copy)]
struct OffsetKey(f64);

impl PartialEq for OffsetKey {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for OffsetKey {}
impl PartialOrd for OffsetKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OffsetKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl<'a> PathSearch<'a> {
    fn new(per_segment: &'a [Vec<SegmentCandidate>]) -> Self {
        let by_entry: Vec<BTreeMap<OffsetKey, Vec<&SegmentCandidate>>> = per_segment
            .iter()
            .map(|cands| {
                let mut map: BTreeMap<OffsetKey, Vec<&SegmentCandidate>> = BTreeMap::new();
                for c in cands {
                    map.entry(OffsetKey(c.entry_offset)).or_default().push(c);
                }
                for group in map.values_mut() {
                    group.sort_by(|a, b| a.exit_offset.total_cmp(&b.exit_offset));
                }
                map
            })
            .collect();

        // Backward sweep: an entry hole is live if some candidate leaves it
        // towards a live entry of the next segment.
        let n = by_entry.len();
        let mut completes = vec![Vec::new(); n];
        for i in (0..n).rev() {
            completes[i] = by_entry[i]
                .iter()
                .filter(|(_, group)| {
                    i + 1 == n
                        || group
                            .iter()
                            .any(|c| completes[i + 1].binary_search(&OffsetKey(c.exit_offset)).is_ok())
                })
                .map(|(k, _)| *k)
                .collect();
        }
        PathSearch {
            by_entry,
            completes,
        }
    }

    fn live(&self, segment: usize, entry: f64) -> bool {
        self.completes[segment].binary_search(&OffsetKey(entry)).is_ok()
    }

    fn extend(
        &self,
        segment: usize,
        entry: Option<f64>,
        length_so_far: f64,
        offsets: &mut Vec<f64>,
        out: &mut Vec<(ThreadingPattern, f64)>,
        max_paths: usize,
    ) {
        if out.len() >= max_paths {
            return;
        }
        if segment == self.by_entry.len() {
            out.push((ThreadingPattern::from_trusted(offsets.clone()), length_so_far));
            return;
        }
        let groups: Vec<(&OffsetKey, &Vec<&SegmentCandidate>)> = match entry {
            Some(e) => self.by_entry[segment].get_key_value(&OffsetKey(e)).into_iter().collect(),
            None => self.by_entry[segment].iter().collect(),
        };
        for (key, group) in groups {
            if !self.live(segment, key.0) {
                continue;
            }
            if entry.is_none() {
                offsets.push(key.0);
            }
            for cand in group {
                if segment + 1 < self.by_entry.len() && !self.live(segment + 1, cand.exit_offset) {
                    continue;
                }
                offsets.push(cand.exit_offset);
                self.extend(
                    segment + 1,
                    Some(cand.exit_offset),
                    length_so_far + cand.string_length,
                    offsets,
                    out,
                    max_paths,
                );
                offsets.pop();
                if out.len() >= max_paths {
                    break;
                }
            }
            if entry.is_none() {
                offsets.pop();
            }
            if out.len() >= max_paths {
                return;
            }
        }
    }
}

/// Runs the full search and returns the best pattern.
pub fn design(query: &DesignQuery) -> Result<DesignResult> {
    design_with_alternates(query, 0).map(|ranked| ranked.best)
}

/// Like [`design`], also returning up to `alternates` runner-up patterns.
pub fn design_with_alternates(query: &DesignQuery, alternates: usize) -> Result<RankedDesign> {
    query.validate()?;
    let cfg = &query.config;
    let per_segment = query
        .target_alphas
        .iter()
        .map(|&alpha| enumerate_segment_candidates(cfg, alpha))
        .collect::<Result<Vec<_>>>()?;
    let paths = backtrack_paths(cfg, &per_segment, query.max_candidates)?;
    let evaluated = paths.len();

    let rank = || -> Vec<Option<DesignResult>> {
        paths
            .par_iter()
            .map(|(pattern, total)| evaluate_path(query, pattern, *total, evaluated))
            .collect()
    };
    let results = match query.workers {
        Some(width) => rayon::ThreadPoolBuilder::new()
            .num_threads(width.max(1))
            .build()
            .map_err(|e| Error::InvalidProblem(format!("worker pool: {e}")))?
            .install(rank),
        None => rank(),
    };

    let mut ranked: Vec<DesignResult> = results.into_iter().flatten().collect();
    if ranked.is_empty() {
        return Err(Error::AllCandidatesFailed(evaluated));
    }
    let best_residual = ranked.iter().map(|r| r.residual).fold(f64::INFINITY, f64::min);
    let tie = best_residual + query.rank_tolerance;
    // Residuals within tolerance of the best count as equal; the
    // lexicographically smallest pattern among them wins.
    ranked.sort_by(|a, b| {
        let band = |r: &DesignResult| r.residual > tie;
        band(a)
            .cmp(&band(b))
            .then_with(|| {
                if band(a) {
                    a.residual.total_cmp(&b.residual)
                } else {
                    Ordering::Equal
                }
            })
            .then_with(|| a.pattern.lex_cmp(&b.pattern))
    });
    let mut iter = ranked.into_iter();
    let best = iter.next().expect("non-empty");
    Ok(RankedDesign {
        best,
        alternates: iter.take(alternates).collect(),
    })
}

fn evaluate_path(
    query: &DesignQuery,
    pattern: &ThreadingPattern,
    total_length: f64,
    evaluated: usize,
) -> Option<DesignResult> {
    let problem = EquilibriumProblem::new(query.config.clone(), pattern.clone(), total_length);
    let solution = solve_equilibrium(&problem).ok()?;
    let residual = l2_distance(&solution.alphas, &query.target_alphas);
    Some(DesignResult {
        pattern: pattern.clone(),
        total_length,
        achieved_alphas: solution.alphas,
        residual,
        candidates_evaluated: evaluated,
    })
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
