//! Benchmark fixtures shared by the criterion suites.

use softsnap_core::{SkeletonConfig, ThreadingPattern};

/// The stock twelve-rib module.
pub fn stock() -> SkeletonConfig {
    SkeletonConfig::default()
}

/// `offset` and `-offset` on alternating ribs.
pub fn alternating_pattern(cfg: &SkeletonConfig, offset: f64) -> ThreadingPattern {
    let offsets = (0..cfg.n_ribs).map(|i| if i % 2 == 0 { offset } else { -offset }).collect();
    ThreadingPattern::new(cfg, offsets).expect("offset is a hole of the config")
}
