//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{
    all_patterns, alternating, closed_form_length, closed_form_min_total, closed_form_total, config,
    deg, grid_search_three_segments, passes_filter, perturbation_check, random_pattern,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softsnap_core::evaluation::simulated_trace;
use softsnap_core::{
    design, original_string_length, rmse_against_simulation, segment_string_length, solve_equilibrium,
    sweep_contraction, DesignQuery, EquilibriumProblem, Error, MarkerTrace, Point2, Pose, SkeletonConfig,
    ThreadingPattern,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn fmt_deg(alphas: &[f64]) -> String {
    let parts: Vec<String> = alphas.iter().map(|a| format!("{:.1}", a.to_degrees())).collect();
    format!("[{}]", parts.join(", "))
}

fn criterion_1() -> Outcome {
    let cfg = SkeletonConfig::default();
    let pattern = ThreadingPattern::new(&cfg, alternating(12, -10.0)).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let sol = solve_equilibrium(&EquilibriumProblem::new(cfg, pattern, 270.0)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let expected = deg(&alternating(11, 30.0));
    let worst = sol
        .alphas
        .iter()
        .zip(&expected)
        .map(|(a, e)| (a - e).abs())
        .fold(0.0, f64::max);
    check(sol.alphas.len() == 11, "expected 11 angles")?;
    check(worst <= 2f64.to_radians(), format!("angles {} off by {:.3} deg", fmt_deg(&sol.alphas), worst.to_degrees()))?;
    check(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("angles {}, max error {:.2e} deg, {:?}", fmt_deg(&sol.alphas), worst.to_degrees(), elapsed))
}

struct PublishedDesign {
    label: &'static str,
    target_deg: [f64; 11],
    obtained_deg: [f64; 11],
    pattern: [f64; 12],
    length: f64,
}

fn criterion_2() -> Outcome {
    let cases = [
        PublishedDesign {
            label: "single-sided bend",
            target_deg: [0.0, 0.0, 0.0, 10.0, 15.0, 0.0, 10.0, 30.0, 0.0, 0.0, 0.0],
            obtained_deg: [1.9, 1.9, 1.9, 7.2, 18.6, 1.9, 9.7, 27.7, 1.9, 1.9, 1.9],
            pattern: [-0.5, -0.5, -0.5, -0.5, -6.5, -0.5, -0.5, -10.0, -0.5, -0.5, -0.5, -0.5],
            length: 199.0,
        },
        PublishedDesign {
            label: "S-curve",
            target_deg: [0.0, 0.0, 0.0, -10.0, -30.0, 0.0, 10.0, 30.0, 0.0, 0.0, 0.0],
            obtained_deg: [3.0, 3.0, 3.0, -7.2, -28.1, 3.0, 11.6, 29.9, 3.0, 3.0, 3.0],
            pattern: [-0.5, -0.5, -0.5, -0.5, 6.5, -0.5, -0.5, -6.5, -0.5, -0.5, -0.5, -0.5],
            length: 196.0,
        },
    ];
    let cfg = SkeletonConfig::default();
    let mut failures = Vec::new();
    let mut notes = Vec::new();
    for case in &cases {
        let query = DesignQuery::new(cfg.clone(), deg(&case.target_deg)).with_max_candidates(10_000);
        let start = Instant::now();
        let result = design(&query).map_err(|e| format!("{}: {e}", case.label))?;
        let elapsed = start.elapsed();
        let angle_error = result
            .achieved_alphas
            .iter()
            .zip(deg(&case.obtained_deg))
            .map(|(a, e)| (a - e).abs())
            .fold(0.0, f64::max);
        let pattern_matches = result
            .pattern
            .offsets()
            .iter()
            .zip(case.pattern)
            .all(|(a, b)| (a - b).abs() < 1e-9);
        let length_error = (result.total_length - case.length).abs();

        // The published pattern, evaluated in this model, for the record.
        let published_pattern = ThreadingPattern::new(&cfg, case.pattern.to_vec()).map_err(|e| e.to_string())?;
        let published_length: f64 = case
            .target_deg
            .iter()
            .enumerate()
            .map(|(i, t)| closed_form_length(cfg.segment_arc_length, t.to_radians(), case.pattern[i], case.pattern[i + 1]))
            .sum();
        let published_solution = solve_equilibrium(&EquilibriumProblem::new(cfg.clone(), published_pattern, published_length))
            .map(|s| fmt_deg(&s.alphas))
            .unwrap_or_else(|e| e.to_string());

        notes.push(format!(
            "{}: got {:?} at {:.1} mm -> {} ({:?}); published pattern here needs {:.1} mm -> {}",
            case.label,
            result.pattern.offsets(),
            result.total_length,
            fmt_deg(&result.achieved_alphas),
            elapsed,
            published_length,
            published_solution
        ));
        if angle_error > 1f64.to_radians() {
            failures.push(format!("{} angles off by {:.2} deg", case.label, angle_error.to_degrees()));
        }
        if !pattern_matches {
            failures.push(format!("{} pattern differs", case.label));
        }
        if length_error > 3.0 {
            failures.push(format!("{} length off by {:.1} mm", case.label, length_error));
        }
        if elapsed >= Duration::from_secs(60) {
            failures.push(format!("{} took {elapsed:?}", case.label));
        }
    }
    if failures.is_empty() {
        Ok(notes.join("; "))
    } else {
        Err(format!("{}. {}", failures.join(", "), notes.join("; ")))
    }
}

fn random_target(rng: &mut ChaCha8Rng, cfg: &SkeletonConfig, pattern: &ThreadingPattern) -> f64 {
    let original = closed_form_total(cfg, pattern.offsets(), &vec![0.0; cfg.segment_count()]);
    let shortest = closed_form_min_total(cfg, pattern.offsets());
    original - rng.random_range(0.05..0.95) * (original - shortest)
}

fn criterion_3() -> Outcome {
    let base = SkeletonConfig::default();
    let cfg = config(4, base.segment_arc_length, base.hole_offsets);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for case in 0..20 {
        let pattern = random_pattern(&mut rng, &cfg);
        let target = random_target(&mut rng, &cfg, &pattern);
        let sol = solve_equilibrium(&EquilibriumProblem::new(cfg.clone(), pattern.clone(), target))
            .map_err(|e| format!("case {case}: {e}"))?;
        let grid = grid_search_three_segments(&cfg, pattern.offsets(), target, 2e-3);
        let gap = (grid.energy - sol.energy).abs();
        worst = worst.max(gap);
        check(
            gap <= 1e-4,
            format!("case {case} {:?} at {target:.3} mm: grid {} vs solver {}", pattern.offsets(), grid.energy, sol.energy),
        )?;
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(300), format!("took {elapsed:?}"))?;
    Ok(format!("20 cases, worst energy gap {worst:.2e} rad^2, {elapsed:?}"))
}

fn criterion_4() -> Outcome {
    let defaults = SkeletonConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let start = Instant::now();
    let mut with_paths = 0;
    for case in 0..20 {
        let n_ribs = rng.random_range(3..=5);
        let m = rng.random_range(2..=3);
        let mut holes = defaults.hole_offsets.clone();
        holes.shuffle(&mut rng);
        holes.truncate(m);
        holes.sort_by(f64::total_cmp);
        let cfg = config(n_ribs, defaults.segment_arc_length, holes.clone());
        let targets: Vec<f64> = (0..n_ribs - 1).map(|_| rng.random_range(-0.7..0.7)).collect();

        let mut best: Option<f64> = None;
        for offsets in all_patterns(&holes, n_ribs) {
            if !passes_filter(cfg.segment_arc_length, &offsets, &targets) {
                continue;
            }
            let total = closed_form_total(&cfg, &offsets, &targets);
            let pattern = ThreadingPattern::new(&cfg, offsets).map_err(|e| e.to_string())?;
            if let Ok(sol) = solve_equilibrium(&EquilibriumProblem::new(cfg.clone(), pattern, total)) {
                let r = sol.alphas.iter().zip(&targets).map(|(a, t)| (a - t).powi(2)).sum::<f64>().sqrt();
                best = Some(best.map_or(r, |b: f64| b.min(r)));
            }
        }
        let query = DesignQuery::new(cfg.clone(), targets.clone());
        match (design(&query), best) {
            (Ok(result), Some(b)) => {
                with_paths += 1;
                check(
                    (result.residual - b).abs() <= query.rank_tolerance,
                    format!("case {case}: design {} vs exhaustive {b}", result.residual),
                )?;
            }
            (Err(Error::NoValidPath), None) => {}
            (got, oracle) => {
                return Err(format!("case {case}: design {got:?} but exhaustive minimum {oracle:?}"));
            }
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(300), format!("took {elapsed:?}"))?;
    Ok(format!("20 queries ({with_paths} with valid paths) match exhaustive minimum, {elapsed:?}"))
}

fn criterion_5() -> Outcome {
    let cfg = SkeletonConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let start = Instant::now();
    let (mut worst_constraint, mut worst_drop) = (0.0f64, f64::NEG_INFINITY);
    for case in 0..200 {
        let pattern = random_pattern(&mut rng, &cfg);
        let target = random_target(&mut rng, &cfg, &pattern);
        let sol = solve_equilibrium(&EquilibriumProblem::new(cfg.clone(), pattern.clone(), target))
            .map_err(|e| format!("case {case}: {e}"))?;
        let achieved = closed_form_total(&cfg, pattern.offsets(), &sol.alphas);
        let gap = (achieved - target).abs();
        worst_constraint = worst_constraint.max(gap);
        check(gap <= 1e-6, format!("case {case}: |achieved - target| = {gap:.3e} mm"))?;
        let perturbed = perturbation_check(&mut rng, &cfg, &pattern, &sol, 200, 1e-3);
        check(perturbed.tested == 200, format!("case {case}: only {} feasible perturbations", perturbed.tested))?;
        worst_drop = worst_drop.max(perturbed.worst_drop);
        check(
            perturbed.worst_drop <= 1e-8,
            format!("case {case} {:?} at {target:.3} mm: energy drops by {:.3e}", pattern.offsets(), perturbed.worst_drop),
        )?;
    }
    Ok(format!(
        "200 solves, worst constraint gap {worst_constraint:.2e} mm, worst perturbation drop {worst_drop:.2e} rad^2, {:?}",
        start.elapsed()
    ))
}

fn criterion_6() -> Outcome {
    let cfg = SkeletonConfig::default();
    let s = cfg.segment_arc_length;
    let origin = Pose::default();
    let len = |a: f64, l1: f64, l2: f64| segment_string_length(&cfg, origin, a, l1, l2).map_err(|e| e.to_string());
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);

    for &l in &cfg.hole_offsets {
        check(len(0.0, l, l)? == s, format!("L(0, {l}, {l}) != s"))?;
    }
    let mut worst_chord = 0.0f64;
    for k in 1..=1000 {
        let a = PI * k as f64 / 1000.0;
        let chord = 2.0 * (s / a) * (0.5 * a).sin();
        worst_chord = worst_chord.max((len(a, 0.0, 0.0)? - chord).abs()).max((len(-a.min(PI - 1e-12), 0.0, 0.0)? - chord).abs());
    }
    check(worst_chord <= 1e-9, format!("chord mismatch {worst_chord:.3e}"))?;

    let bt = cfg.blend_threshold;
    let mut worst_blend = 0.0f64;
    for _ in 0..1000 {
        let (l1, l2) = (rng.random_range(-12.5..12.5), rng.random_range(-12.5..12.5));
        for side in [1.0, -1.0] {
            let jump = (len(side * bt * (1.0 - 1e-12), l1, l2)? - len(side * bt, l1, l2)?).abs();
            worst_blend = worst_blend.max(jump);
            // Either branch near the switch agrees with the exact curve.
            for a in [1e-9, 0.5 * bt, bt, 2.0 * bt] {
                let exact = closed_form_length(s, side * a, l1, l2);
                worst_blend = worst_blend.max((len(side * a, l1, l2)? - exact).abs());
            }
        }
    }
    check(len(1e-9, 2.0, -3.0).map(|v| (v - len(0.0, 2.0, -3.0).unwrap()).abs() <= 1e-9)?, "alpha=1e-9 example")?;
    check(worst_blend <= 1e-9, format!("blend discontinuity {worst_blend:.3e} mm"))?;

    let mut worst_mirror = 0.0f64;
    for _ in 0..10_000 {
        let a = rng.random_range(-PI + 1e-9..PI - 1e-9);
        let (l1, l2) = (rng.random_range(-12.5..12.5), rng.random_range(-12.5..12.5));
        worst_mirror = worst_mirror.max((len(a, l1, l2)? - len(-a, -l1, -l2)?).abs());
    }
    check(worst_mirror <= 1e-9, format!("mirror mismatch {worst_mirror:.3e}"))?;
    Ok(format!(
        "straight identity exact, chord {worst_chord:.1e}, blend {worst_blend:.1e} mm, mirror {worst_mirror:.1e}"
    ))
}

fn criterion_7() -> Outcome {
    let cfg = SkeletonConfig::default();
    let patterns: Vec<Vec<f64>> = vec![
        vec![-10.0; 12],
        vec![-10.0, -10.0, -10.0, -10.0, 10.0, 10.0, 10.0, 10.0, -10.0, -10.0, -10.0, -10.0],
        vec![-6.5, -6.5, -6.5, -6.5, -10.0, -10.0, -10.0, -10.0, -6.5, -6.5, -6.5, -6.5],
    ];
    let start = Instant::now();
    let (mut worst_angle, mut worst_jump) = (0.0f64, 0.0f64);
    for offsets in &patterns {
        let pattern = ThreadingPattern::new(&cfg, offsets.clone()).map_err(|e| e.to_string())?;
        let original = original_string_length(&cfg, &pattern).map_err(|e| e.to_string())?;
        let problem = EquilibriumProblem::new(cfg.clone(), pattern, original);
        let sweep = sweep_contraction(&problem, 80.0, 1.0).map_err(|e| e.to_string())?;
        check(sweep.stopped.is_none(), format!("{offsets:?}: stopped at {:?}", sweep.stopped))?;
        check(sweep.steps.len() == 81, format!("{offsets:?}: {} rows", sweep.steps.len()))?;
        for step in &sweep.steps {
            let cold = solve_equilibrium(&problem.clone().with_target(step.target_length)).map_err(|e| e.to_string())?;
            let gap = cold
                .alphas
                .iter()
                .zip(&step.solution.alphas)
                .map(|(c, w)| (c - w).abs())
                .fold(0.0, f64::max);
            worst_angle = worst_angle.max(gap);
            check(gap <= 1e-3, format!("{offsets:?} step {}: warm/cold differ by {gap:.3e} rad", step.step_index))?;
        }
        for pair in sweep.steps.windows(2) {
            let jump = pair[0].midpoint.distance(&pair[1].midpoint);
            worst_jump = worst_jump.max(jump);
            check(jump < 5.0, format!("{offsets:?} step {}: midpoint moved {jump:.3} mm", pair[1].step_index))?;
        }
    }
    Ok(format!(
        "{} patterns x 81 steps, worst warm/cold gap {worst_angle:.1e} rad, largest midpoint step {worst_jump:.2} mm, {:?}",
        patterns.len(),
        start.elapsed()
    ))
}

fn criterion_8() -> Outcome {
    let cfg = SkeletonConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let pattern = ThreadingPattern::uniform(&cfg, -10.0).map_err(|e| e.to_string())?;
    let original = original_string_length(&cfg, &pattern).map_err(|e| e.to_string())?;
    let sweep = sweep_contraction(&EquilibriumProblem::new(cfg.clone(), pattern, original), 60.0, 10.0)
        .map_err(|e| e.to_string())?;
    let solutions: Vec<_> = sweep.steps.iter().map(|s| s.solution.clone()).collect();
    let mut traces = Vec::new();
    for (k, sol) in solutions.iter().enumerate() {
        let clean = simulated_trace(&cfg, sol, format!("step{k}"), 30.0).map_err(|e| e.to_string())?;
        let noisy = MarkerTrace {
            rib_centers: clean
                .rib_centers
                .iter()
                .map(|p| {
                    let phi: f64 = rng.random_range(0.0..2.0 * PI);
                    Point2::new(p.x + 2.0 * phi.cos(), p.y + 2.0 * phi.sin())
                })
                .collect(),
            ..clean
        };
        traces.push(noisy.transformed(rng.random_range(-PI..PI), rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)));
    }
    let report = rmse_against_simulation(&traces, &solutions, &cfg).map_err(|e| e.to_string())?;
    let worst = report.per_step_rmse.iter().map(|r| (r - 2.0).abs()).fold(0.0, f64::max);
    check(worst <= 1e-6, format!("per-step RMSE off by {worst:.3e}"))?;
    check((report.average_rmse - 2.0).abs() <= 1e-6, format!("average {}", report.average_rmse))?;

    let mut worst_invariance = 0.0f64;
    for _ in 0..100 {
        let (a, tx, ty) = (rng.random_range(-PI..PI), rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3));
        let moved: Vec<_> = traces.iter().map(|t| t.transformed(a, tx, ty)).collect();
        let again = rmse_against_simulation(&moved, &solutions, &cfg).map_err(|e| e.to_string())?;
        for (x, y) in report.per_step_rmse.iter().zip(&again.per_step_rmse) {
            worst_invariance = worst_invariance.max((x - y).abs());
        }
    }
    check(worst_invariance <= 1e-9, format!("rigid motion changed RMSE by {worst_invariance:.3e}"))?;
    Ok(format!(
        "{} steps at 2.000 mm (max error {worst:.1e}), rigid-motion spread {worst_invariance:.1e} mm",
        report.per_step_rmse.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("alternating pattern at 270 mm gives +/-30 deg", criterion_1),
        ("inverse design reproduces the published reference designs", criterion_2),
        ("forward solve matches brute-force grid (n_ribs = 4)", criterion_3),
        ("inverse design matches exhaustive enumeration", criterion_4),
        ("constraint and local optimality on 200 solves", criterion_5),
        ("geometry identities", criterion_6),
        ("0-80 mm sweep: warm equals cold, continuous midpoint", criterion_7),
        ("RMSE harness on synthetic 2 mm traces", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} PASS {name} ({secs:.2}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL {name} ({secs:.2}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
