//! Forward quasi-static model: the equilibrium shape of a module for a given
//! threading pattern and total string length.
//!
//! The bending energy `sum alpha_i^2` is minimized subject to
//! `sum L_i = L_target`. The decision variables are the per-segment string
//! lengths `L_i`; each is mapped back to a bending angle by inverting the
//! segment length function on the segment's preferred bending branch
//! ([`length_to_angle`]). Working over lengths makes the constraint linear
//! and the objective separable, so every outer iteration solves a diagonal
//! trust-region subproblem exactly.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{
    check_pattern, midpoint, segment_length_unchecked, total_string_length, Point2, Pose,
    SkeletonConfig, ThreadingPattern, DEFAULT_THETA_START,
};

/// String-length convergence threshold (mm).
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITERATIONS: usize = 500;
/// Contraction per step of a workspace sweep (mm).
pub const DEFAULT_SWEEP_STEP: f64 = 1.0;

const INVERSION_FD_STEP: f64 = 1e-7;
const MARGINAL_FD_STEP: f64 = 1e-6;
const INVERSION_MAX_ITERATIONS: usize = 200;
// Stand-in for the unbounded marginal energy at a segment's shortest string.
const MARGINAL_CAP: f64 = 1e12;
// Marginal energy (rad^2/mm) above which a segment is modelled by a secant.
const STEEP_MARGINAL: f64 = 1e3;

/// Direction a segment bends when its string shortens.
///
/// A string threaded off-center on one side pulls the spine towards that
/// side: the sign is `-sign(lambda1 + lambda2)`. When the offsets cancel
/// exactly the length is even in the angle, and the entry hole decides
/// (`-sign(lambda1)`), which makes alternating crossings bend alternately.
/// A string through both rib centers has no preferred side.
pub fn preferred_bend_sign(lambda1: f64, lambda2: f64) -> Option<f64> {
    let sum = lambda1 + lambda2;
    if sum != 0.0 {
        Some(-sum.signum())
    } else if lambda1 != 0.0 {
        Some(-lambda1.signum())
    } else {
        None
    }
}

/// String length of one segment as a function of the bend magnitude `a`
/// along a fixed direction, restricted to `[0, max_bend]` where it falls
/// from `straight_length` to `min_length`.
#[derive(Debug, Clone)]
pub(crate) struct SegmentBranch {
    arc_length: f64,
    blend_threshold: f64,
    lambda1: f64,
    lambda2: f64,
    sign: f64,
    pub(crate) max_bend: f64,
    pub(crate) straight_length: f64,
    pub(crate) min_length: f64,
}

impl SegmentBranch {
    pub(crate) fn new(cfg: &SkeletonConfig, lambda1: f64, lambda2: f64, sign: f64) -> Self {
        let mut branch = SegmentBranch {
            arc_length: cfg.segment_arc_length,
            blend_threshold: cfg.blend_threshold,
            lambda1,
            lambda2,
            sign,
            max_bend: PI,
            straight_length: 0.0,
            min_length: 0.0,
        };
        branch.straight_length = branch.length(0.0);
        branch.max_bend = branch.locate_minimum();
        branch.min_length = branch.length(branch.max_bend);
        branch
    }

    pub(crate) fn length(&self, bend: f64) -> f64 {
        segment_length_unchecked(
            self.arc_length,
            self.blend_threshold,
            Pose::default(),
            self.sign * bend,
            self.lambda1,
            self.lambda2,
        )
    }

    pub(crate) fn angle(&self, bend: f64) -> f64 {
        self.sign * bend
    }

    // Coarse scan then golden-section refinement of the shortest string on
    // [0, pi]. Negative bends stop just short of -pi.
    fn locate_minimum(&self) -> f64 {
        const SAMPLES: usize = 512;
        let upper = if self.sign < 0.0 { PI * (1.0 - 1e-12) } else { PI };
        let grid = |k: usize| upper * k as f64 / SAMPLES as f64;
        let best = (0..=SAMPLES)
            .min_by(|&i, &j| self.length(grid(i)).total_cmp(&self.length(grid(j))))
            .unwrap_or(0);
        if best == 0 {
            return 0.0;
        }
        let (mut lo, mut hi) = (grid(best - 1), grid((best + 1).min(SAMPLES)));
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - ratio * (hi - lo);
        let mut x2 = lo + ratio * (hi - lo);
        let (mut f1, mut f2) = (self.length(x1), self.length(x2));
        while hi - lo > 1e-13 {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - ratio * (hi - lo);
                f1 = self.length(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + ratio * (hi - lo);
                f2 = self.length(x2);
            }
        }
        let candidates = [lo, hi, 0.5 * (lo + hi), grid(best)];
        candidates
            .into_iter()
            .min_by(|a, b| self.length(*a).total_cmp(&self.length(*b)))
            .unwrap_or(hi)
            .min(upper)
    }

    fn fd_slope(&self, bend: f64) -> f64 {
        let h = INVERSION_FD_STEP;
        (self.length(bend + h) - self.length(bend - h)) / (2.0 * h)
    }

    /// Bend magnitude whose length is closest to `target`: safeguarded
    /// Newton-Raphson on the bracket, bisection whenever Newton leaves it.
    pub(crate) fn bend_for_length(&self, target: f64, warm_start: Option<f64>) -> f64 {
        let (mut lo, mut hi) = (0.0, self.max_bend);
        let f_lo = self.straight_length - target;
        let f_hi = self.min_length - target;
        if f_lo <= 0.0 || hi == 0.0 {
            return 0.0;
        }
        if f_hi >= 0.0 {
            return hi;
        }
        let mut x = match warm_start {
            Some(w) if w > lo && w < hi => w,
            _ => hi * f_lo / (f_lo - f_hi),
        };
        let scale = target.abs().max(1.0);
        for _ in 0..INVERSION_MAX_ITERATIONS {
            let fx = self.length(x) - target;
            if fx.abs() <= 1e-14 * scale {
                return x;
            }
            if fx > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
            let slope = self.fd_slope(x);
            let newton = x - fx / slope;
            x = if slope < 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        x
    }

    /// d(length)/d(bend), from the exact chord of the arc.
    fn slope(&self, bend: f64) -> f64 {
        let alpha = self.sign * bend;
        let half = 0.5 * alpha;
        let (sinc, dsinc) = sinc_and_derivative(half);
        let chord = self.arc_length * sinc;
        let psi = FRAC_PI_2 + half;
        let v = (
            chord * psi.cos() + self.lambda2 * alpha.cos() - self.lambda1,
            chord * psi.sin() + self.lambda2 * alpha.sin(),
        );
        let dchord = 0.5 * self.arc_length * dsinc;
        let dv = (
            dchord * psi.cos() - 0.5 * chord * psi.sin() - self.lambda2 * alpha.sin(),
            dchord * psi.sin() + 0.5 * chord * psi.cos() + self.lambda2 * alpha.cos(),
        );
        let norm = v.0.hypot(v.1);
        if norm == 0.0 {
            return 0.0;
        }
        self.sign * (v.0 * dv.0 + v.1 * dv.1) / norm
    }

    /// Marginal energy per millimetre of shortening, `-d(bend^2)/d(length)`.
    fn marginal(&self, bend: f64) -> f64 {
        let slope = self.slope(bend);
        if bend > 0.0 && slope < 0.0 {
            return 2.0 * bend / -slope;
        }
        // At the straight state the ratio is 0/0 for centered-sum threading;
        // use the limit 2 / (-d2L/da2).
        let h = MARGINAL_FD_STEP;
        let s0 = self.slope(0.0);
        if bend == 0.0 && s0 < -1e-12 {
            return 0.0;
        }
        let curvature = (self.slope(bend + h) - self.slope(bend.max(h) - h)) / h;
        if curvature < 0.0 {
            2.0 / -curvature
        } else {
            f64::INFINITY
        }
    }

    /// Secant estimate of the second derivative of `bend^2` with respect to
    /// length over `width` mm next to `length`. Near the shortest string the
    /// energy behaves like a square root of the slack, so a point estimate
    /// would freeze the segment there.
    fn energy_curvature(&self, bend: f64, length: f64, width: f64) -> f64 {
        let up = self.straight_length - length;
        let down = length - self.min_length;
        let w = width.min(up.max(down));
        if !(w > 0.0) {
            return f64::INFINITY;
        }
        let (la, lb, ba, bb) = if up >= w {
            (length, length + w, bend, self.bend_for_length(length + w, Some(bend)))
        } else {
            (length - w, length, self.bend_for_length(length - w, Some(bend)), bend)
        };
        let cap = |m: f64| if m.is_finite() { m } else { MARGINAL_CAP };
        let (ma, mb) = (cap(self.marginal(ba)), cap(self.marginal(bb)));
        ((ma - mb) / (lb - la)).max(0.0)
    }
}

fn sinc_and_derivative(x: f64) -> (f64, f64) {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        (1.0 - x2 / 6.0 + x2 * x2 / 120.0, -x / 3.0 + x * x2 / 30.0)
    } else {
        let (s, c) = x.sin_cos();
        (s / x, (x * c - s) / (x * x))
    }
}

/// Bending angle of segment `segment_index` whose string length is closest
/// to `target_segment_length`.
///
/// The search runs over the half-range selected by `sign_hint` (or by
/// [`preferred_bend_sign`] when absent) and is restricted to the bracket on
/// which the length falls monotonically; unreachable targets return the
/// bracket end with the smaller residual.
pub fn length_to_angle(
    cfg: &SkeletonConfig,
    segment_index: usize,
    pattern: &ThreadingPattern,
    target_segment_length: f64,
    sign_hint: Option<f64>,
) -> Result<f64> {
    cfg.validate()?;
    check_pattern(cfg, pattern)?;
    if segment_index >= cfg.segment_count() {
        return Err(Error::InvalidProblem(format!(
            "segment index {segment_index} out of range for {} segments",
            cfg.segment_count()
        )));
    }
    if !(target_segment_length > 0.0) {
        return Err(Error::InvalidProblem(
            "target segment length must be positive".into(),
        ));
    }
    let (l1, l2) = pattern.segment(segment_index);
    let sign = match sign_hint.filter(|h| *h != 0.0) {
        Some(h) => h.signum(),
        None => match preferred_bend_sign(l1, l2) {
            Some(sign) => sign,
            None => {
                let straight = SegmentBranch::new(cfg, l1, l2, 1.0).straight_length;
                if (straight - target_segment_length).abs() <= 1e-12 * straight.max(1.0) {
                    return Ok(0.0);
                }
                return Err(Error::AmbiguousInversion {
                    segment: segment_index,
                });
            }
        },
    };
    let branch = SegmentBranch::new(cfg, l1, l2, sign);
    Ok(branch.angle(branch.bend_for_length(target_segment_length, None)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumProblem {
    pub config: SkeletonConfig,
    pub pattern: ThreadingPattern,
    pub target_length: f64,
    pub theta_start: f64,
    pub tolerance: f64,
    pub initial_alphas: Option<Vec<f64>>,
    pub max_iterations: usize,
}

impl EquilibriumProblem {
    pub fn new(config: SkeletonConfig, pattern: ThreadingPattern, target_length: f64) -> Self {
        EquilibriumProblem {
            config,
            pattern,
            target_length,
            theta_start: DEFAULT_THETA_START,
            tolerance: DEFAULT_TOLERANCE,
            initial_alphas: None,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }

    pub fn with_target(mut self, target_length: f64) -> Self {
        self.target_length = target_length;
        self
    }

    pub fn with_initial_alphas(mut self, alphas: Vec<f64>) -> Self {
        self.initial_alphas = Some(alphas);
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_theta_start(mut self, theta_start: f64) -> Self {
        self.theta_start = theta_start;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub alphas: Vec<f64>,
    pub segment_lengths: Vec<f64>,
    pub energy: f64,
    pub achieved_length: f64,
    pub iterations: usize,
}

/// Shortest string the pattern can reach, bending every segment to its own
/// minimum. Fails for centered threading, which has no bending side.
pub fn minimum_string_length(cfg: &SkeletonConfig, pattern: &ThreadingPattern) -> Result<f64> {
    cfg.validate()?;
    check_pattern(cfg, pattern)?;
    Ok(branches(cfg, pattern)?.iter().map(|b| b.min_length).sum())
}

pub(crate) fn branches(cfg: &SkeletonConfig, pattern: &ThreadingPattern) -> Result<Vec<SegmentBranch>> {
    (0..cfg.segment_count())
        .map(|i| {
            let (l1, l2) = pattern.segment(i);
            preferred_bend_sign(l1, l2)
                .map(|sign| SegmentBranch::new(cfg, l1, l2, sign))
                .ok_or(Error::AmbiguousInversion { segment: i })
        })
        .collect()
}

pub fn solve_equilibrium(problem: &EquilibriumProblem) -> Result<EquilibriumSolution> {
    let cfg = &problem.config;
    cfg.validate()?;
    check_pattern(cfg, &problem.pattern)?;
    let target = problem.target_length;
    let tol = problem.tolerance;
    if !(tol > 0.0) {
        return Err(Error::InvalidProblem("tolerance must be positive".into()));
    }
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::InvalidProblem("target length must be positive".into()));
    }
    if let Some(init) = &problem.initial_alphas {
        if init.len() != cfg.segment_count() {
            return Err(Error::AngleCount {
                expected: cfg.segment_count(),
                actual: init.len(),
            });
        }
    }
    let n = cfg.segment_count();
    let original = total_string_length(cfg, &problem.pattern, &vec![0.0; n])?;
    if target > original + tol {
        return Err(Error::InvalidProblem(format!(
            "target {target} mm exceeds the straight-state length {original} mm"
        )));
    }
    if original - target <= tol {
        return finish(problem, vec![0.0; n], 0);
    }

    let segs = branches(cfg, &problem.pattern)?;
    let min_total: f64 = segs.iter().map(|b| b.min_length).sum();
    if target < min_total - tol {
        return Err(Error::InfeasibleTarget {
            target,
            min_length: min_total,
        });
    }
    TrustRegion::new(&segs, target, tol, problem)
        .run(problem.max_iterations)
        .and_then(|(bends, iterations)| {
            let alphas = segs.iter().zip(&bends).map(|(b, &a)| b.angle(a)).collect();
            finish(problem, alphas, iterations)
        })
}

fn finish(
    problem: &EquilibriumProblem,
    alphas: Vec<f64>,
    iterations: usize,
) -> Result<EquilibriumSolution> {
    let cfg = &problem.config;
    let segment_lengths: Vec<f64> = alphas
        .iter()
        .enumerate()
        .map(|(i, &alpha)| {
            let (l1, l2) = problem.pattern.segment(i);
            segment_length_unchecked(
                cfg.segment_arc_length,
                cfg.blend_threshold,
                Pose::default(),
                alpha,
                l1,
                l2,
            )
        })
        .collect();
    let achieved_length = total_string_length(cfg, &problem.pattern, &alphas)?;
    let energy = alphas.iter().map(|a| a * a).sum();
    Ok(EquilibriumSolution {
        alphas,
        segment_lengths,
        energy,
        achieved_length,
        iterations,
    })
}

struct TrustRegion<'a> {
    segs: &'a [SegmentBranch],
    target: f64,
    tol: f64,
    lengths: Vec<f64>,
    bends: Vec<f64>,
    problem: &'a EquilibriumProblem,
}

struct Subproblem {
    step: Vec<f64>,
    predicted: f64,
    truncated: bool,
}

impl<'a> TrustRegion<'a> {
    fn new(
        segs: &'a [SegmentBranch],
        target: f64,
        tol: f64,
        problem: &'a EquilibriumProblem,
    ) -> Self {
        let mut lengths: Vec<f64> = match &problem.initial_alphas {
            Some(init) => segs
                .iter()
                .zip(init)
                .map(|(b, &alpha)| {
                    let length = segment_length_unchecked(
                        b.arc_length,
                        b.blend_threshold,
                        Pose::default(),
                        alpha,
                        b.lambda1,
                        b.lambda2,
                    );
                    length.clamp(b.min_length, b.straight_length)
                })
                .collect(),
            None => segs.iter().map(|b| b.straight_length).collect(),
        };
        restore_feasibility(segs, &mut lengths, target);
        let bends = segs
            .iter()
            .zip(&lengths)
            .map(|(b, &l)| b.bend_for_length(l, None))
            .collect();
        TrustRegion {
            segs,
            target,
            tol,
            lengths,
            bends,
            problem,
        }
    }

    fn energy(bends: &[f64]) -> f64 {
        bends.iter().map(|a| a * a).sum()
    }

    fn run(mut self, max_iterations: usize) -> Result<(Vec<f64>, usize)> {
        let span = self
            .segs
            .iter()
            .map(|b| b.straight_length - b.min_length)
            .fold(0.0, f64::max);
        let mut radius = 0.5 * span.max(self.tol);
        let mut energy = Self::energy(&self.bends);
        let mut last_step = radius;

        for iteration in 1..=max_iterations {
            let marginals: Vec<f64> = self.bends.iter().zip(self.segs).map(|(&a, b)| b.marginal(a)).collect();
            let width = radius.min(last_step.max(1e-6));
            let mut marginals = marginals;
            let mut curvatures: Vec<f64> = self
                .bends
                .iter()
                .zip(&self.lengths)
                .zip(self.segs)
                .map(|((&a, &l), b)| b.energy_curvature(a, l, width))
                .collect();
            let mut pinned = false;
            for (i, b) in self.segs.iter().enumerate() {
                if !(marginals[i] <= STEEP_MARGINAL) {
                    // Next to the shortest string: model the energy by its
                    // secant over the trust width instead.
                    let (l, a) = (self.lengths[i], self.bends[i]);
                    let w = width.min(b.straight_length - l);
                    if w > 0.0 {
                        let ahead = b.bend_for_length(l + w, Some(a));
                        marginals[i] = (a * a - ahead * ahead) / w;
                        curvatures[i] = 0.0;
                        pinned = true;
                    }
                }
            }
            let residual = self.target - self.lengths.iter().sum::<f64>();
            let sub = self.subproblem(&marginals, &curvatures, residual, radius);
            let step_size = sub.step.iter().fold(0.0f64, |m, p| m.max(p.abs()));

            let trial_lengths: Vec<f64> = self
                .lengths
                .iter()
                .zip(&sub.step)
                .zip(self.segs)
                .map(|((l, p), b)| (l + p).clamp(b.min_length, b.straight_length))
                .collect();
            let trial_bends: Vec<f64> = self
                .segs
                .iter()
                .zip(&trial_lengths)
                .zip(&self.bends)
                .map(|((b, &l), &a)| b.bend_for_length(l, Some(a)))
                .collect();
            let trial_energy = Self::energy(&trial_bends);
            let actual = energy - trial_energy;
            let noise = 1e-14 * (1.0 + energy);

            let accept = if sub.predicted > noise {
                actual / sub.predicted > 1e-4
            } else {
                actual >= -noise
            };
            if accept {
                last_step = step_size;
                self.lengths = trial_lengths;
                self.bends = trial_bends;
                energy = trial_energy;
                let constraint = (self.target - self.lengths.iter().sum::<f64>()).abs();
                if step_size <= self.tol && constraint <= self.tol && (!sub.truncated || actual.abs() <= noise) {
                    // A segment bent to its shortest string is never optimal
                    // while another can still give way: narrow the secant.
                    let movable = self.segs.iter().zip(&self.lengths).any(|(b, &l)| l - b.min_length > self.tol);
                    if !(pinned && movable && radius > 1e-12) {
                        return Ok((self.bends, iteration));
                    }
                    radius *= 0.25;
                    last_step = radius;
                    continue;
                }
                let ratio = if sub.predicted > noise { actual / sub.predicted } else { 1.0 };
                if ratio > 0.75 && sub.truncated {
                    radius = (2.0 * radius).min(span.max(self.tol));
                } else if ratio < 0.25 {
                    radius = 0.25 * step_size.max(self.tol * 1e-3);
                }
            } else {
                radius = 0.25 * step_size;
                if radius < 1e-15 {
                    // No representable improvement left.
                    return Ok((self.bends, iteration));
                }
            }
        }
        let alphas = self
            .segs
            .iter()
            .zip(&self.bends)
            .map(|(b, &a)| b.angle(a))
            .collect();
        Err(Error::DidNotConverge {
            iterations: max_iterations,
            best: Box::new(finish(self.problem, alphas, max_iterations)?),
        })
    }

    /// Minimizes the separable model `sum(-m_i p_i + h_i p_i^2 / 2)` subject
    /// to `sum p_i = residual`, the length box and `|p_i| <= radius`.
    fn subproblem(
        &self,
        marginals: &[f64],
        curvatures: &[f64],
        residual: f64,
        radius: f64,
    ) -> Subproblem {
        let bounds: Vec<(f64, f64)> = self
            .segs
            .iter()
            .zip(&self.lengths)
            .map(|(b, &l)| ((b.min_length - l).max(-radius).min(0.0), (b.straight_length - l).min(radius).max(0.0)))
            .collect();
        let h: Vec<f64> = curvatures
            .iter()
            .map(|&c| if c.is_finite() { c.max(1e-9) } else { f64::INFINITY })
            .collect();
        let m: Vec<f64> = marginals
            .iter()
            .map(|&m| if m.is_finite() { m } else { MARGINAL_CAP })
            .collect();
        let step_at = |mu: f64| -> Vec<f64> {
            m.iter()
                .zip(&h)
                .zip(&bounds)
                .map(|((&mi, &hi), &(lo, up))| {
                    let free = if hi.is_finite() { (mi - mu) / hi } else { 0.0 };
                    free.clamp(lo, up)
                })
                .collect()
        };
        let lower_sum: f64 = bounds.iter().map(|b| b.0).sum();
        let upper_sum: f64 = bounds.iter().map(|b| b.1).sum();
        let mut step = if residual <= lower_sum {
            bounds.iter().map(|b| b.0).collect()
        } else if residual >= upper_sum {
            bounds.iter().map(|b| b.1).collect()
        } else {
            // Sum of the clamped step is nonincreasing in mu.
            let mut mu_lo = -1.0;
            let mut mu_hi = 1.0;
            while step_at(mu_lo).iter().sum::<f64>() < residual && mu_lo > -1e300 {
                mu_lo = mu_lo * 2.0 - 1.0;
            }
            while step_at(mu_hi).iter().sum::<f64>() > residual && mu_hi < 1e300 {
                mu_hi = mu_hi * 2.0 + 1.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (mu_lo + mu_hi);
                if step_at(mid).iter().sum::<f64>() > residual {
                    mu_lo = mid;
                } else {
                    mu_hi = mid;
                }
                if mu_hi - mu_lo <= 1e-16 * mu_hi.abs().max(1.0) {
                    break;
                }
            }
            let mut step = step_at(0.5 * (mu_lo + mu_hi));
            distribute_remainder(&mut step, &bounds, residual);
            step
        };
        if !residual.is_finite() {
            step.iter_mut().for_each(|p| *p = 0.0);
        }
        let predicted = step
            .iter()
            .zip(&m)
            .zip(&h)
            .map(|((&p, &mi), &hi)| mi * p - if hi.is_finite() { 0.5 * hi * p * p } else { 0.0 })
            .sum();
        let truncated = step
            .iter()
            .any(|p| (p.abs() - radius).abs() <= 1e-12 * radius.max(1e-300));
        Subproblem {
            step,
            predicted,
            truncated,
        }
    }
}

// Spreads `target - sum(step)` over coordinates with slack, in order.
fn distribute_remainder(step: &mut [f64], bounds: &[(f64, f64)], target: f64) {
    let mut rest = target - step.iter().sum::<f64>();
    for (p, &(lo, up)) in step.iter_mut().zip(bounds) {
        if rest == 0.0 {
            break;
        }
        let moved = (*p + rest).clamp(lo, up);
        rest -= moved - *p;
        *p = moved;
    }
}

// Shortens (or lengthens) every segment in proportion to its slack so the
// lengths sum to `target`.
fn restore_feasibility(segs: &[SegmentBranch], lengths: &mut [f64], target: f64) {
    let residual = target - lengths.iter().sum::<f64>();
    if residual < 0.0 {
        let room: f64 = segs.iter().zip(lengths.iter()).map(|(b, l)| l - b.min_length).sum();
        let t = if room > 0.0 { (-residual / room).min(1.0) } else { 0.0 };
        for (b, l) in segs.iter().zip(lengths.iter_mut()) {
            *l -= t * (*l - b.min_length);
        }
    } else if residual > 0.0 {
        let room: f64 = segs.iter().zip(lengths.iter()).map(|(b, l)| b.straight_length - l).sum();
        let t = if room > 0.0 { (residual / room).min(1.0) } else { 0.0 };
        for (b, l) in segs.iter().zip(lengths.iter_mut()) {
            *l += t * (b.straight_length - *l);
        }
    }
}

/// One equilibrium of a contraction sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepStep {
    pub step_index: usize,
    pub target_length: f64,
    pub solution: EquilibriumSolution,
    pub midpoint: Point2,
}

/// Why a sweep ended before reaching its full contraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepStop {
    pub step_index: usize,
    pub target_length: f64,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub steps: Vec<SweepStep>,
    pub stopped: Option<SweepStop>,
}

/// Target lengths `L_original - k * step`, ending exactly at
/// `L_original - contraction_max`.
pub fn sweep_targets(original: f64, contraction_max: f64, step: f64) -> Vec<f64> {
    let mut contractions = Vec::new();
    let count = (contraction_max / step + 1e-9).floor() as usize;
    for k in 0..=count {
        contractions.push(k as f64 * step);
    }
    if contractions.last().is_some_and(|&c| contraction_max - c > 1e-9 * step.max(1.0)) {
        contractions.push(contraction_max);
    }
    contractions.into_iter().map(|c| original - c).collect()
}

pub fn sweep_contraction(
    problem: &EquilibriumProblem,
    contraction_max: f64,
    step: f64,
) -> Result<Sweep> {
    let mut steps = Vec::new();
    let stopped = sweep_contraction_each(problem, contraction_max, step, |s| {
        steps.push(s.clone());
        true
    })?;
    Ok(Sweep { steps, stopped })
}

/// Runs a warm-started sweep, handing each step to `on_step` as soon as it
/// is solved. Returning `false` from `on_step` cancels the sweep.
pub fn sweep_contraction_each<F>(
    problem: &EquilibriumProblem,
    contraction_max: f64,
    step: f64,
    mut on_step: F,
) -> Result<Option<SweepStop>>
where
    F: FnMut(&SweepStep) -> bool,
{
    let cfg = &problem.config;
    cfg.validate()?;
    check_pattern(cfg, &problem.pattern)?;
    if !(step > 0.0) || !(contraction_max >= 0.0) || (contraction_max > 0.0 && step > contraction_max) {
        return Err(Error::InvalidProblem(format!(
            "need 0 < step <= contraction_max, got step {step}, contraction {contraction_max}"
        )));
    }
    let original = total_string_length(cfg, &problem.pattern, &vec![0.0; cfg.segment_count()])?;
    if original - contraction_max <= 0.0 {
        return Err(Error::InvalidProblem(format!(
            "contraction {contraction_max} mm exceeds the straight string length {original} mm"
        )));
    }
    let mut warm = problem.initial_alphas.clone();
    for (step_index, target_length) in sweep_targets(original, contraction_max, step).into_iter().enumerate() {
        let mut p = problem.clone().with_target(target_length);
        p.initial_alphas = warm.take();
        match solve_equilibrium(&p) {
            Ok(solution) => {
                let mid = midpoint(cfg, &solution.alphas, problem.theta_start)?;
                warm = Some(solution.alphas.clone());
                let record = SweepStep {
                    step_index,
                    target_length,
                    solution,
                    midpoint: mid,
                };
                if !on_step(&record) {
                    return Ok(None);
                }
            }
            Err(err @ (Error::InfeasibleTarget { .. } | Error::DidNotConverge { .. })) => {
                return Ok(Some(SweepStop {
                    step_index,
                    target_length,
                    code: err.code().to_string(),
                    message: err.to_string(),
                }));
            }
            Err(err) => return Err(err),
        }
    }
    Ok(None)
}
