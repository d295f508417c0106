//! Skeleton geometry: ribs joined by constant-curvature spine segments, and
//! the length of a string threaded through one hole per rib.
//!
//! Conventions used throughout the crate:
//!
//! * lengths are millimetres, angles are radians;
//! * a rib with orientation `theta` points along `(cos theta, sin theta)` and
//!   the spine leaves it along `theta + pi/2`;
//! * a hole offset `lambda` is measured from the rib center along the rib
//!   direction;
//! * a positive bending angle turns the spine counter-clockwise, so the arc
//!   center sits on the negative-offset side and strings threaded through
//!   negative offsets shorten.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hole offsets (mm) of the stock rib, base of the default configuration.
pub const DEFAULT_HOLE_OFFSETS: [f64; 8] = [-10.0, -6.5, -3.5, -0.5, 0.5, 3.5, 6.5, 10.0];

/// Default number of centerline samples per segment.
pub const DEFAULT_CENTERLINE_DENSITY: usize = 16;

/// Base orientation that lays the undeformed spine along +x.
pub const DEFAULT_THETA_START: f64 = -FRAC_PI_2;

// Offsets read back from JSON are snapped to the configured hole within this.
const OFFSET_MATCH_TOLERANCE: f64 = 1e-9;

const DEFAULT_CONFIG_JSON: &str = include_str!("../data/default_config.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonConfig {
    pub n_ribs: usize,
    pub rib_length: f64,
    pub segment_arc_length: f64,
    pub hole_offsets: Vec<f64>,
    pub blend_threshold: f64,
}

impl Default for SkeletonConfig {
    /// The stock 12-rib module with the calibrated rib spacing.
    fn default() -> Self {
        crate::io::config_from_json(DEFAULT_CONFIG_JSON).expect("embedded default config is valid")
    }
}

impl SkeletonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_ribs < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_ribs must be at least 2, got {}",
                self.n_ribs
            )));
        }
        if !(self.rib_length > 0.0 && self.rib_length.is_finite()) {
            return Err(Error::InvalidConfig("rib_length must be positive".into()));
        }
        if !(self.segment_arc_length > 0.0 && self.segment_arc_length.is_finite()) {
            return Err(Error::InvalidConfig(
                "segment_arc_length must be positive".into(),
            ));
        }
        if !(self.blend_threshold > 0.0 && self.blend_threshold.is_finite()) {
            return Err(Error::InvalidConfig("blend_threshold must be positive".into()));
        }
        if self.hole_offsets.is_empty() {
            return Err(Error::InvalidConfig("hole_offsets is empty".into()));
        }
        let half = self.half_rib();
        for &offset in &self.hole_offsets {
            if !offset.is_finite() || offset.abs() > half {
                return Err(Error::InvalidConfig(format!(
                    "hole offset {offset} lies outside the rib (half-length {half})"
                )));
            }
        }
        if self.hole_offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "hole_offsets must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn segment_count(&self) -> usize {
        self.n_ribs - 1
    }

    pub fn half_rib(&self) -> f64 {
        self.rib_length / 2.0
    }

    /// Same skeleton with a different hole layout.
    pub fn with_holes(&self, hole_offsets: Vec<f64>) -> Self {
        SkeletonConfig {
            hole_offsets,
            ..self.clone()
        }
    }

    fn check_offset(&self, offset: f64) -> Result<()> {
        let half = self.half_rib();
        if !offset.is_finite() || offset.abs() > half + OFFSET_MATCH_TOLERANCE {
            return Err(Error::OffsetOutsideRib {
                offset,
                half_length: half,
            });
        }
        Ok(())
    }

    fn check_alphas(&self, alphas: &[f64]) -> Result<()> {
        if alphas.len() != self.segment_count() {
            return Err(Error::AngleCount {
                expected: self.segment_count(),
                actual: alphas.len(),
            });
        }
        if let Some(&bad) = alphas.iter().find(|a| !a.is_finite() || a.abs() > PI) {
            return Err(Error::AngleOutOfRange(bad));
        }
        Ok(())
    }
}

/// The hole chosen on every rib, base to tip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadingPattern {
    offsets: Vec<f64>,
}

impl ThreadingPattern {
    /// Validates the pattern against `cfg`; offsets within 1e-9 mm of a hole
    /// are snapped onto it.
    pub fn new(cfg: &SkeletonConfig, offsets: Vec<f64>) -> Result<Self> {
        if offsets.len() != cfg.n_ribs {
            return Err(Error::InvalidPattern(format!(
                "expected {} offsets (one per rib), got {}",
                cfg.n_ribs,
                offsets.len()
            )));
        }
        let snapped = offsets
            .iter()
            .map(|&o| {
                cfg.hole_offsets
                    .iter()
                    .copied()
                    .find(|h| (h - o).abs() <= OFFSET_MATCH_TOLERANCE)
                    .ok_or_else(|| {
                        Error::InvalidPattern(format!("offset {o} is not one of the rib holes"))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ThreadingPattern { offsets: snapped })
    }

    /// Same offset on every rib.
    pub fn uniform(cfg: &SkeletonConfig, offset: f64) -> Result<Self> {
        Self::new(cfg, vec![offset; cfg.n_ribs])
    }

    pub(crate) fn from_trusted(offsets: Vec<f64>) -> Self {
        ThreadingPattern { offsets }
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn segment_count(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    /// Entry and exit offsets of segment `i`.
    pub fn segment(&self, i: usize) -> (f64, f64) {
        (self.offsets[i], self.offsets[i + 1])
    }

    pub fn lex_cmp(&self, other: &Self) -> std::cmp::Ordering {
        for (a, b) in self.offsets.iter().zip(&other.offsets) {
            match a.total_cmp(b) {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.offsets.len().cmp(&other.offsets.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn offset_along(&self, angle: f64, amount: f64) -> Point2 {
        Point2::new(self.x + amount * angle.cos(), self.y + amount * angle.sin())
    }
}

/// Rib-center position and rib orientation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose { x, y, theta }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// Point on this rib at signed offset `lambda` from its center.
    pub fn hole(&self, lambda: f64) -> Point2 {
        self.position().offset_along(self.theta, lambda)
    }
}

/// One spine segment: the pose of its base rib and its bending angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentGeometry {
    pub base_pose: Pose,
    pub alpha: f64,
}

impl SegmentGeometry {
    pub fn new(base_pose: Pose, alpha: f64) -> Self {
        SegmentGeometry { base_pose, alpha }
    }

    /// Spine point a fraction `t` of the way along the segment.
    ///
    /// Above `blend_threshold` this is the circular arc about
    /// `c = P1 - R (cos theta, sin theta)` with the signed radius
    /// `R = s / alpha`. Below it the arc center is numerically useless and
    /// the point is placed along the chord direction `theta + pi/2 + t alpha/2`
    /// at the second-order chord length `t s (1 - (t alpha)^2 / 24)`, which
    /// agrees with the arc to O(s alpha^4).
    pub fn spine_point(&self, arc_length: f64, blend_threshold: f64, t: f64) -> Point2 {
        let base = self.base_pose;
        let turn = t * self.alpha;
        if self.alpha.abs() >= blend_threshold {
            let radius = arc_length / self.alpha;
            let cx = base.x - radius * base.theta.cos();
            let cy = base.y - radius * base.theta.sin();
            let phi = base.theta + turn;
            Point2::new(cx + radius * phi.cos(), cy + radius * phi.sin())
        } else {
            let chord = t * arc_length * (1.0 - turn * turn / 24.0);
            base.position()
                .offset_along(base.theta + FRAC_PI_2 + 0.5 * turn, chord)
        }
    }

    pub fn end_pose(&self, arc_length: f64, blend_threshold: f64) -> Pose {
        let end = self.spine_point(arc_length, blend_threshold, 1.0);
        Pose::new(end.x, end.y, self.base_pose.theta + self.alpha)
    }

    /// Threading points on the base and end ribs.
    pub fn threading_points(
        &self,
        arc_length: f64,
        blend_threshold: f64,
        lambda1: f64,
        lambda2: f64,
    ) -> (Point2, Point2) {
        let end = self.end_pose(arc_length, blend_threshold);
        (self.base_pose.hole(lambda1), end.hole(lambda2))
    }
}

/// Length of the string between the holes of one segment.
pub fn segment_string_length(
    cfg: &SkeletonConfig,
    base_pose: Pose,
    alpha: f64,
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    cfg.check_offset(lambda1)?;
    cfg.check_offset(lambda2)?;
    if !alpha.is_finite() || alpha.abs() > PI {
        return Err(Error::AngleOutOfRange(alpha));
    }
    Ok(segment_length_unchecked(
        cfg.segment_arc_length,
        cfg.blend_threshold,
        base_pose,
        alpha,
        lambda1,
        lambda2,
    ))
}

pub(crate) fn segment_length_unchecked(
    arc_length: f64,
    blend_threshold: f64,
    base_pose: Pose,
    alpha: f64,
    lambda1: f64,
    lambda2: f64,
) -> f64 {
    let (s1, s2) = SegmentGeometry::new(base_pose, alpha).threading_points(
        arc_length,
        blend_threshold,
        lambda1,
        lambda2,
    );
    s1.distance(&s2)
}

/// Total string length of `pattern` at the bending angles `alphas`, with
/// every segment placed by chaining the rib poses from the base.
pub fn total_string_length(
    cfg: &SkeletonConfig,
    pattern: &ThreadingPattern,
    alphas: &[f64],
) -> Result<f64> {
    cfg.validate()?;
    check_pattern(cfg, pattern)?;
    cfg.check_alphas(alphas)?;
    let mut pose = Pose::new(0.0, 0.0, DEFAULT_THETA_START);
    let mut total = 0.0;
    for (i, &alpha) in alphas.iter().enumerate() {
        let (l1, l2) = pattern.segment(i);
        total += segment_length_unchecked(
            cfg.segment_arc_length,
            cfg.blend_threshold,
            pose,
            alpha,
            l1,
            l2,
        );
        pose = SegmentGeometry::new(pose, alpha).end_pose(cfg.segment_arc_length, cfg.blend_threshold);
    }
    Ok(total)
}

/// String length of the straight module.
pub fn original_string_length(cfg: &SkeletonConfig, pattern: &ThreadingPattern) -> Result<f64> {
    total_string_length(cfg, pattern, &vec![0.0; cfg.segment_count()])
}

pub(crate) fn check_pattern(cfg: &SkeletonConfig, pattern: &ThreadingPattern) -> Result<()> {
    if pattern.offsets().len() != cfg.n_ribs {
        return Err(Error::InvalidPattern(format!(
            "pattern has {} offsets for {} ribs",
            pattern.offsets().len(),
            cfg.n_ribs
        )));
    }
    for &o in pattern.offsets() {
        cfg.check_offset(o)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleState {
    pub alphas: Vec<f64>,
    pub rib_poses: Vec<Pose>,
    pub centerline: Vec<Point2>,
}

impl ModuleState {
    pub fn rib_centers(&self) -> Vec<Point2> {
        self.rib_poses.iter().map(Pose::position).collect()
    }
}

pub fn forward_kinematics(
    cfg: &SkeletonConfig,
    alphas: &[f64],
    theta_start: f64,
) -> Result<ModuleState> {
    forward_kinematics_with_density(cfg, alphas, theta_start, DEFAULT_CENTERLINE_DENSITY)
}

/// Chains rib poses from `(0, 0, theta_start)` and samples the spine with
/// `density` points per segment (plus the base point).
pub fn forward_kinematics_with_density(
    cfg: &SkeletonConfig,
    alphas: &[f64],
    theta_start: f64,
    density: usize,
) -> Result<ModuleState> {
    cfg.validate()?;
    cfg.check_alphas(alphas)?;
    let density = density.max(1);
    let s = cfg.segment_arc_length;
    let bt = cfg.blend_threshold;

    let mut pose = Pose::new(0.0, 0.0, theta_start);
    let mut rib_poses = Vec::with_capacity(cfg.n_ribs);
    let mut centerline = Vec::with_capacity(alphas.len() * density + 1);
    rib_poses.push(pose);
    centerline.push(pose.position());
    for &alpha in alphas {
        let segment = SegmentGeometry::new(pose, alpha);
        for k in 1..=density {
            centerline.push(segment.spine_point(s, bt, k as f64 / density as f64));
        }
        pose = segment.end_pose(s, bt);
        rib_poses.push(pose);
    }
    Ok(ModuleState {
        alphas: alphas.to_vec(),
        rib_poses,
        centerline,
    })
}

/// Spine point at `fraction` of the total spine arc length.
pub fn spine_point_at(
    cfg: &SkeletonConfig,
    alphas: &[f64],
    theta_start: f64,
    fraction: f64,
) -> Result<Point2> {
    cfg.validate()?;
    cfg.check_alphas(alphas)?;
    let n = alphas.len();
    let position = fraction.clamp(0.0, 1.0) * n as f64;
    let index = (position.floor() as usize).min(n - 1);
    let t = position - index as f64;
    let mut pose = Pose::new(0.0, 0.0, theta_start);
    for &alpha in &alphas[..index] {
        pose = SegmentGeometry::new(pose, alpha).end_pose(cfg.segment_arc_length, cfg.blend_threshold);
    }
    Ok(SegmentGeometry::new(pose, alphas[index]).spine_point(
        cfg.segment_arc_length,
        cfg.blend_threshold,
        t,
    ))
}

/// Mid-skeleton point, the one tracked in workspace plots.
pub fn midpoint(cfg: &SkeletonConfig, alphas: &[f64], theta_start: f64) -> Result<Point2> {
    spine_point_at(cfg, alphas, theta_start, 0.5)
}

/// Finds the rib spacing for which `pattern_offsets` bent to `alphas` needs
/// `target_total` mm of string. Everything else is taken from `cfg`.
pub fn calibrate_segment_arc_length(
    cfg: &SkeletonConfig,
    pattern_offsets: &[f64],
    alphas: &[f64],
    target_total: f64,
) -> Result<f64> {
    let total_for = |s: f64| -> Result<f64> {
        let trial = SkeletonConfig {
            segment_arc_length: s,
            ..cfg.clone()
        };
        let pattern = ThreadingPattern::new(&trial, pattern_offsets.to_vec())?;
        total_string_length(&trial, &pattern, alphas)
    };
    let (mut lo, mut hi) = (1e-3, 1e3);
    let (f_lo, f_hi) = (total_for(lo)? - target_total, total_for(hi)? - target_total);
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::InvalidProblem(format!(
            "no rib spacing in [{lo}, {hi}] mm yields {target_total} mm"
        )));
    }
    let increasing = f_hi > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let above = total_for(mid)? > target_total;
        if above == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Degrees or radians, accepted at file boundaries only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnits {
    Deg,
    #[default]
    Rad,
}

impl AngleUnits {
    pub fn to_radians(self, value: f64) -> f64 {
        match self {
            AngleUnits::Deg => value.to_radians(),
            AngleUnits::Rad => value,
        }
    }

    pub fn from_radians(self, value: f64) -> f64 {
        match self {
            AngleUnits::Deg => value.to_degrees(),
            AngleUnits::Rad => value,
        }
    }
}

impl std::str::FromStr for AngleUnits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deg" | "degrees" => Ok(AngleUnits::Deg),
            "rad" | "radians" => Ok(AngleUnits::Rad),
            other => Err(Error::Format(format!("unknown angle units {other:?}"))),
        }
    }
}
