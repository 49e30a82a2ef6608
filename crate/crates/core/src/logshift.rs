//! Dilation-invariant bottleneck distance on dilation classes.
//!
//! Under `(x, y) -> (ln(x + eps), ln(y + eps))` a dilation by `c` becomes a
//! diagonal shift by `ln c`, so `D_S([A], [B]) = min_s d_inf(log A + s, log B)`.
//! The shift is searched on a uniform grid; `Theta(s)` is 1-Lipschitz in `s`.

use rayon::prelude::*;
use serde::Serialize;

use crate::bottleneck::bottleneck_value;
use crate::diagram::{PersistenceDiagram, PersistencePoint};
use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-10;
pub const DEFAULT_PARTITIONS: usize = 100;
/// Log coordinates below this trigger a warning.
pub const LOG_FLOOR: f64 = -50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftInterval {
    pub s_min: f64,
    pub s_max: f64,
    /// `d_inf(log A, log B)`, the value at `s = 0`.
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftSearchResult {
    pub value: f64,
    pub s_star: f64,
    /// Sampled `(s, Theta(s))`, sorted by `s`.
    pub curve: Vec<(f64, f64)>,
    pub interval: ShiftInterval,
    pub partitions: usize,
    /// `(s_max - s_min) / N`.
    pub error_bound: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftOptions {
    pub partitions: usize,
    pub epsilon: f64,
    /// Drop points born before this value ahead of the log map.
    pub crop_below: Option<f64>,
}

impl Default for ShiftOptions {
    fn default() -> Self {
        Self {
            partitions: DEFAULT_PARTITIONS,
            epsilon: DEFAULT_EPSILON,
            crop_below: None,
        }
    }
}

/// Search interval for log-domain diagrams, from the largest-death point of
/// each characteristic diagram.
pub fn shift_interval(
    log_a: &PersistenceDiagram,
    log_b: &PersistenceDiagram,
) -> Result<ShiftInterval> {
    let sa = log_a.stats()?;
    let sb = log_b.stats()?;
    let d = bottleneck_value(log_a.points(), log_b.points());
    let (Some(top_a), Some(top_b)) = (sa.top, sb.top) else {
        return Ok(ShiftInterval {
            s_min: 0.0,
            s_max: 0.0,
            d,
        });
    };
    Ok(ShiftInterval {
        s_min: top_b.death - sa.bd - d,
        s_max: sb.bd - top_a.death + d,
        d,
    })
}

fn shifted_distance(a: &[PersistencePoint], b: &[PersistencePoint], s: f64) -> f64 {
    let moved: Vec<PersistencePoint> = a
        .iter()
        .map(|p| PersistencePoint {
            dim: p.dim,
            birth: p.birth + s,
            death: p.death + s,
        })
        .collect();
    bottleneck_value(&moved, b)
}

fn to_log(
    d: &PersistenceDiagram,
    opts: &ShiftOptions,
    name: &str,
    warnings: &mut Vec<String>,
) -> Result<PersistenceDiagram> {
    d.ensure_finite()?;
    let d = match opts.crop_below {
        Some(t) => d.crop_below(t),
        None => d.clone(),
    };
    let logged = d.log_map(opts.epsilon);
    if let Some(p) = logged
        .iter()
        .find(|p| !p.birth.is_finite() || !p.death.is_finite())
    {
        return Err(Error::InvalidArgument(format!(
            "{name}: log of ({}, {}) is not finite; use a positive epsilon or --crop-below",
            p.birth.exp(),
            p.death.exp()
        )));
    }
    let low = logged.iter().filter(|p| p.birth < LOG_FLOOR).count();
    if low > 0 {
        warnings.push(format!(
            "{name}: {low} point(s) map below {LOG_FLOOR} in log scale; consider --crop-below"
        ));
    }
    Ok(logged)
}

pub fn di_distance(
    a: &PersistenceDiagram,
    b: &PersistenceDiagram,
    partitions: usize,
    epsilon: f64,
) -> Result<ShiftSearchResult> {
    di_distance_with(
        a,
        b,
        &ShiftOptions {
            partitions,
            epsilon,
            crop_below: None,
        },
    )
}

pub fn di_distance_with(
    a: &PersistenceDiagram,
    b: &PersistenceDiagram,
    opts: &ShiftOptions,
) -> Result<ShiftSearchResult> {
    let n = opts.partitions;
    if n < 1 {
        return Err(Error::InvalidPartitions(n));
    }
    if !(opts.epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be non-negative, got {}",
            opts.epsilon
        )));
    }
    let mut warnings = Vec::new();
    let log_a = to_log(a, opts, "first diagram", &mut warnings)?;
    let log_b = to_log(b, opts, "second diagram", &mut warnings)?;
    let interval = shift_interval(&log_a, &log_b)?;

    if log_a.is_empty() || log_b.is_empty() {
        warnings.push(
            "empty diagram: the dilation class is degenerate, reporting the unshifted distance"
                .into(),
        );
        return Ok(ShiftSearchResult {
            value: interval.d,
            s_star: 0.0,
            curve: vec![(0.0, interval.d)],
            interval,
            partitions: n,
            error_bound: 0.0,
            warnings,
        });
    }

    let (pa, pb) = (log_a.points(), log_b.points());
    let (lo, hi) = (interval.s_min, interval.s_max);
    let step = (hi - lo) / n as f64;
    let mut curve: Vec<(f64, f64)> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let s = if i == n { hi } else { lo + step * i as f64 };
            (s, shifted_distance(pa, pb, s))
        })
        .collect();

    // s = 0 attains d; a far shift leaves only the diagonal matching.
    let p = log_a.stats()?.pers.max(log_b.stats()?.pers);
    let max_death_b = pb.iter().map(|q| q.death).fold(f64::NEG_INFINITY, f64::max);
    let min_death_a = pa.iter().map(|q| q.death).fold(f64::INFINITY, f64::min);
    let s_far = p + max_death_b - min_death_a;
    let mut best = first_min(&curve);
    for anchor in [(0.0, interval.d), (s_far, p)] {
        if anchor.1 < best.1 {
            let pos = curve.partition_point(|q| q.0 < anchor.0);
            curve.insert(pos, anchor);
            best = first_min(&curve);
        }
    }
    Ok(ShiftSearchResult {
        value: best.1,
        s_star: best.0,
        curve,
        interval,
        partitions: n,
        error_bound: (hi - lo).max(0.0) / n as f64,
        warnings,
    })
}

fn first_min(curve: &[(f64, f64)]) -> (f64, f64) {
    let mut best = curve[0];
    for &q in &curve[1..] {
        if q.1 < best.1 {
            best = q;
        }
    }
    best
}
