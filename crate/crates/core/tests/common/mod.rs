//! Independent oracles shared by the integration suites.
//!
//! Nothing here calls the geometry or solver code under test except where a
//! function says so explicitly.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use softsnap_core::{
    length_to_angle, preferred_bend_sign, EquilibriumSolution, SkeletonConfig, ThreadingPattern,
};

/// Closed-form segment string length, derived from the arc geometry:
/// L² = (s·sinc(α/2) + Σλ·sin(α/2))² + Δλ²·cos²(α/2).
pub fn closed_form_length(s: f64, alpha: f64, l1: f64, l2: f64) -> f64 {
    let h = 0.5 * alpha;
    let sinc = if h.abs() < 1e-8 { 1.0 - h * h / 6.0 } else { h.sin() / h };
    let along = s * sinc + (l1 + l2) * h.sin();
    let across = (l2 - l1) * h.cos();
    along.hypot(across)
}

pub fn closed_form_total(cfg: &SkeletonConfig, offsets: &[f64], alphas: &[f64]) -> f64 {
    alphas
        .iter()
        .enumerate()
        .map(|(i, &a)| closed_form_length(cfg.segment_arc_length, a, offsets[i], offsets[i + 1]))
        .sum()
}

/// Distance between the end samples of an `n`-point sampling of a circular
/// arc of radius `r` swept by `sweep` radians.
pub fn sampled_chord(r: f64, sweep: f64, n: usize) -> f64 {
    let p = |k: usize| {
        let t = sweep * k as f64 / n as f64;
        (r * t.cos(), r * t.sin())
    };
    let (a, b) = (p(0), p(n));
    (a.0 - b.0).hypot(a.1 - b.1)
}

pub fn deg(values: &[f64]) -> Vec<f64> {
    values.iter().map(|v| v.to_radians()).collect()
}

pub fn alternating(n: usize, a: f64) -> Vec<f64> {
    (0..n).map(|i| if i % 2 == 0 { a } else { -a }).collect()
}

pub fn config(n_ribs: usize, s: f64, holes: Vec<f64>) -> SkeletonConfig {
    SkeletonConfig {
        n_ribs,
        segment_arc_length: s,
        ..SkeletonConfig::default()
    }
    .with_holes(holes)
}

pub fn random_pattern<R: Rng>(rng: &mut R, cfg: &SkeletonConfig) -> ThreadingPattern {
    loop {
        let offsets: Vec<f64> = (0..cfg.n_ribs)
            .map(|_| cfg.hole_offsets[rng.random_range(0..cfg.hole_offsets.len())])
            .collect();
        if offsets.windows(2).all(|w| preferred_bend_sign(w[0], w[1]).is_some()) {
            return ThreadingPattern::new(cfg, offsets).expect("offsets drawn from the hole set");
        }
    }
}

/// Shortest length a segment reaches on its preferred bending side, from a
/// dense scan of the closed form.
pub fn closed_form_segment_min(s: f64, l1: f64, l2: f64) -> f64 {
    let sign = preferred_bend_sign(l1, l2).expect("not centered");
    (0..=20_000)
        .map(|k| closed_form_length(s, sign * PI * k as f64 / 20_000.0, l1, l2))
        .fold(f64::INFINITY, f64::min)
}

pub fn closed_form_min_total(cfg: &SkeletonConfig, offsets: &[f64]) -> f64 {
    offsets
        .windows(2)
        .map(|w| closed_form_segment_min(cfg.segment_arc_length, w[0], w[1]))
        .sum()
}

/// Tabulated one-segment length curve on each bending side, with running
/// minimum envelopes so the smallest bend reaching a given length can be
/// found by binary search.
pub struct SideTable {
    step: f64,
    lengths: [Vec<f64>; 2],
    envelope_min: [Vec<f64>; 2],
    envelope_max: [Vec<f64>; 2],
}

impl SideTable {
    pub fn new(s: f64, l1: f64, l2: f64, step: f64) -> Self {
        let count = (PI / step).floor() as usize + 1;
        let side = |sign: f64| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
            let lengths: Vec<f64> = (0..count)
                .map(|k| closed_form_length(s, sign * (k as f64 * step).min(PI), l1, l2))
                .collect();
            let mut lo = lengths.clone();
            let mut hi = lengths.clone();
            for k in 1..count {
                lo[k] = lo[k].min(lo[k - 1]);
                hi[k] = hi[k].max(hi[k - 1]);
            }
            (lengths, lo, hi)
        };
        let (p, plo, phi) = side(1.0);
        let (n, nlo, nhi) = side(-1.0);
        SideTable {
            step,
            lengths: [p, n],
            envelope_min: [plo, nlo],
            envelope_max: [phi, nhi],
        }
    }

    /// Signed α of smallest magnitude (either side) with L(α) = `need`,
    /// linearly interpolated between table entries. `None` when the length is
    /// out of reach.
    pub fn smallest_bend(&self, need: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        for side in 0..2 {
            let lengths = &self.lengths[side];
            let start = lengths[0];
            let k = if need <= start {
                let env = &self.envelope_min[side];
                env.partition_point(|&v| v > need)
            } else {
                let env = &self.envelope_max[side];
                env.partition_point(|&v| v < need)
            };
            if k >= lengths.len() {
                continue;
            }
            let magnitude = if k == 0 {
                0.0
            } else {
                let (a, b) = (lengths[k - 1], lengths[k]);
                let frac = if b == a { 0.0 } else { ((need - a) / (b - a)).clamp(0.0, 1.0) };
                (k as f64 - 1.0 + frac) * self.step
            };
            if best.is_none_or(|m| magnitude < m.abs()) {
                best = Some(if side == 0 { magnitude } else { -magnitude });
            }
        }
        best
    }
}

/// Result of the exhaustive grid search for a three-segment module.
pub struct GridOptimum {
    pub energy: f64,
    pub alphas: [f64; 3],
}

/// Minimum of Σα² over a uniform grid of angle triples satisfying the length
/// constraint. Two angles run over the grid on (−π, π] at `resolution`; the
/// third is solved from the constraint. Every choice of the solved segment is
/// searched, so a segment whose length barely moves with its angle is never
/// the one that has to absorb the grid's quantization.
///
/// The best cell of each coarse pass is then searched again on a grid 40
/// times finer spanning ±2 coarse cells. A segment pulled to zero length
/// puts the optimum on a kink of the constraint, where the coarse grid's
/// error is first order in `resolution`.
pub fn grid_search_three_segments(
    cfg: &SkeletonConfig,
    offsets: &[f64],
    target: f64,
    resolution: f64,
) -> GridOptimum {
    assert_eq!(offsets.len(), 4);
    let half = (PI / resolution).floor() as i64;
    let grid: Vec<f64> = (-half..=half).map(|k| k as f64 * resolution).collect();
    let mut best = GridOptimum {
        energy: f64::INFINITY,
        alphas: [0.0; 3],
    };
    for solved in 0..3 {
        let (u, v) = free_pair(solved);
        let coarse = search_cells(cfg, offsets, target, solved, &grid, &grid, best.energy);
        let Some(coarse) = coarse else { continue };
        let local = |centre: f64| -> Vec<f64> {
            (-80..=80)
                .map(|k| centre + k as f64 * resolution / 40.0)
                .filter(|a| *a > -PI && *a <= PI)
                .collect()
        };
        let (gu, gv) = (local(coarse.alphas[u]), local(coarse.alphas[v]));
        let fine = search_cells(cfg, offsets, target, solved, &gu, &gv, coarse.energy).unwrap_or(coarse);
        if fine.energy < best.energy {
            best = fine;
        }
    }
    best
}

fn free_pair(solved: usize) -> (usize, usize) {
    match solved {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

fn search_cells(
    cfg: &SkeletonConfig,
    offsets: &[f64],
    target: f64,
    solved: usize,
    grid_u: &[f64],
    grid_v: &[f64],
    bound: f64,
) -> Option<GridOptimum> {
    let s = cfg.segment_arc_length;
    let (u, v) = free_pair(solved);
    let lu: Vec<f64> = grid_u.iter().map(|&a| closed_form_length(s, a, offsets[u], offsets[u + 1])).collect();
    let lv: Vec<f64> = grid_v.iter().map(|&a| closed_form_length(s, a, offsets[v], offsets[v + 1])).collect();
    let table = SideTable::new(s, offsets[solved], offsets[solved + 1], 2e-5);
    let mut best_energy = bound;
    let mut best = None;
    for (i, &au) in grid_u.iter().enumerate() {
        let eu = au * au;
        if eu >= best_energy {
            continue;
        }
        for (j, &av) in grid_v.iter().enumerate() {
            let euv = eu + av * av;
            if euv >= best_energy {
                continue;
            }
            if let Some(aw) = table.smallest_bend(target - lu[i] - lv[j]) {
                let energy = euv + aw * aw;
                if energy < best_energy {
                    let mut alphas = [0.0; 3];
                    alphas[u] = au;
                    alphas[v] = av;
                    alphas[solved] = aw;
                    best_energy = energy;
                    best = Some(GridOptimum { energy, alphas });
                }
            }
        }
    }
    best
}

/// Angle for a perturbed segment length on the segment's preferred side,
/// or `None` when the perturbed length is out of reach.
pub fn perturbed_angle(
    cfg: &SkeletonConfig,
    pattern: &ThreadingPattern,
    segment: usize,
    length: f64,
) -> Option<f64> {
    let (l1, l2) = pattern.segment(segment);
    let sign = preferred_bend_sign(l1, l2)?;
    let alpha = length_to_angle(cfg, segment, pattern, length, Some(sign)).ok()?;
    let reached = closed_form_length(cfg.segment_arc_length, alpha, l1, l2);
    ((reached - length).abs() <= 1e-9).then_some(alpha)
}

/// Outcome of the zero-sum perturbation test around an equilibrium.
pub struct PerturbationCheck {
    pub tested: usize,
    pub worst_drop: f64,
}

/// Energy change under `count` random feasible perturbations δ with Σδ = 0
/// and ‖δ‖₂ = `norm`. `worst_drop` is the largest energy decrease seen.
pub fn perturbation_check<R: Rng>(
    rng: &mut R,
    cfg: &SkeletonConfig,
    pattern: &ThreadingPattern,
    solution: &EquilibriumSolution,
    count: usize,
    norm: f64,
) -> PerturbationCheck {
    let n = solution.segment_lengths.len();
    let mut worst_drop = f64::NEG_INFINITY;
    let mut tested = 0;
    let mut attempts = 0;
    while tested < count && attempts < 50 * count {
        attempts += 1;
        let mut delta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = delta.iter().sum::<f64>() / n as f64;
        delta.iter_mut().for_each(|d| *d -= mean);
        let len = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
        if len < 1e-12 {
            continue;
        }
        delta.iter_mut().for_each(|d| *d *= norm / len);
        let mut energy = 0.0;
        let mut feasible = true;
        for (i, d) in delta.iter().enumerate() {
            match perturbed_angle(cfg, pattern, i, solution.segment_lengths[i] + d) {
                Some(a) => energy += a * a,
                None => {
                    feasible = false;
                    break;
                }
            }
        }
        if feasible {
            tested += 1;
            worst_drop = worst_drop.max(solution.energy - energy);
        }
    }
    PerturbationCheck { tested, worst_drop }
}

/// Every per-rib offset tuple over the hole set, in lexicographic order.
pub fn all_patterns(holes: &[f64], n_ribs: usize) -> Vec<Vec<f64>> {
    let m = holes.len();
    let total = m.pow(n_ribs as u32);
    (0..total)
        .map(|mut code| {
            let mut digits = vec![0usize; n_ribs];
            for slot in digits.iter_mut().rev() {
                *slot = code % m;
                code /= m;
            }
            digits.into_iter().map(|d| holes[d]).collect()
        })
        .collect()
}

/// Whether every segment of `offsets` passes the non-lengthening filter at
/// its target angle, judged with the closed form.
pub fn passes_filter(s: f64, offsets: &[f64], targets: &[f64]) -> bool {
    targets.iter().enumerate().all(|(i, &a)| {
        closed_form_length(s, a, offsets[i], offsets[i + 1])
            <= closed_form_length(s, 0.0, offsets[i], offsets[i + 1])
    })
}
