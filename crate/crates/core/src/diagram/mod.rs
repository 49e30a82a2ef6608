//! Persistence diagrams and the transforms the comparison measures are built on.
//!
//! A diagram is a finite multiset of `(birth, death)` points tagged with a
//! homology dimension. The diagonal is implicit: it is never stored, and every
//! comparison lets points vanish into it.

mod io;

pub use io::{format_diagram, parse_diagram, read_diagram, write_diagram};

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};

/// One homology class: born at `birth`, dies at `death` (possibly `+inf`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PersistencePoint {
    pub dim: usize,
    pub birth: f64,
    pub death: f64,
}

impl PersistencePoint {
    /// Panics if `death < birth`; use [`PersistencePoint::try_new`] for untrusted input.
    pub fn new(dim: usize, birth: f64, death: f64) -> Self {
        assert!(
            birth <= death,
            "persistence point must satisfy birth <= death, got ({birth}, {death})"
        );
        Self { dim, birth, death }
    }

    pub fn try_new(dim: usize, birth: f64, death: f64) -> Option<Self> {
        (birth <= death).then_some(Self { dim, birth, death })
    }

    pub fn is_finite(&self) -> bool {
        self.birth.is_finite() && self.death.is_finite()
    }

    pub fn is_essential(&self) -> bool {
        self.death == f64::INFINITY
    }

    /// Half the lifetime, i.e. the L-infinity distance to the diagonal.
    pub fn pers(&self) -> Result<f64> {
        if self.is_essential() {
            return Err(Error::UnboundedPoint { birth: self.birth });
        }
        Ok(self.persistence_unchecked())
    }

    #[inline]
    pub(crate) fn persistence_unchecked(&self) -> f64 {
        (self.death - self.birth) / 2.0
    }

    /// Orthogonal projection onto the diagonal.
    pub fn diagonal_projection(&self) -> (f64, f64) {
        let m = (self.birth + self.death) / 2.0;
        (m, m)
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        self.dim
            .cmp(&other.dim)
            .then(self.birth.total_cmp(&other.birth))
            .then(self.death.total_cmp(&other.death))
    }
}

/// Persistence of a single point: `(death - birth) / 2`.
pub fn pers_point(p: &PersistencePoint) -> Result<f64> {
    p.pers()
}

/// How infinite deaths are handled before a comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EssentialPolicy {
    /// Leave them in place; comparisons will fail with `UnboundedPoint`.
    Keep,
    Drop,
    /// Replace `inf` by a fixed death value.
    Cap(f64),
    /// Replace `inf` by the largest finite death of the same diagram.
    CapMax,
}

impl std::str::FromStr for EssentialPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "keep" => Ok(Self::Keep),
            "drop" => Ok(Self::Drop),
            "max" => Ok(Self::CapMax),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Self::Cap)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "essential policy must be 'keep', 'drop', 'max' or a finite number, got '{other}'"
                    ))
                }),
        }
    }
}

/// Which homology dimensions take part in a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DimensionPolicy {
    /// Keep every dimension; points only match points of the same dimension.
    #[default]
    PerDimension,
    /// Keep a single dimension.
    Only(usize),
    /// Relabel everything as dimension 0 so all points can match each other.
    Pooled,
}

/// Summary statistics used to bound the dilation search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramStats {
    /// Largest point persistence (0 for the empty diagram).
    pub pers: f64,
    /// Largest death (0 for the empty diagram).
    pub bd: f64,
    /// All points attaining `pers`.
    pub chi: Vec<PersistencePoint>,
    /// The member of `chi` with the largest death (ties: largest birth).
    pub top: Option<PersistencePoint>,
}

/// Finite multiset of persistence points. The empty diagram is `D0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PersistenceDiagram {
    points: Vec<PersistencePoint>,
}

impl PersistenceDiagram {
    pub fn new(points: Vec<PersistencePoint>) -> Self {
        Self { points }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a single-dimension diagram from `(birth, death)` pairs.
    pub fn from_pairs(dim: usize, pairs: &[(f64, f64)]) -> Self {
        Self::new(
            pairs
                .iter()
                .map(|&(b, d)| PersistencePoint::new(dim, b, d))
                .collect(),
        )
    }

    pub fn points(&self) -> &[PersistencePoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<PersistencePoint> {
        self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PersistencePoint> {
        self.points.iter()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, p: PersistencePoint) {
        self.points.push(p);
    }

    /// Sorted list of the dimensions present.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.points.iter().map(|p| p.dim).collect();
        dims.sort_unstable();
        dims.dedup();
        dims
    }

    pub fn restrict_dim(&self, dim: usize) -> Self {
        Self::new(
            self.points
                .iter()
                .filter(|p| p.dim == dim)
                .copied()
                .collect(),
        )
    }

    pub fn pooled(&self) -> Self {
        Self::new(
            self.points
                .iter()
                .map(|p| PersistencePoint { dim: 0, ..*p })
                .collect(),
        )
    }

    pub fn select(&self, policy: DimensionPolicy) -> Self {
        match policy {
            DimensionPolicy::PerDimension => self.clone(),
            DimensionPolicy::Only(d) => self.restrict_dim(d),
            DimensionPolicy::Pooled => self.pooled(),
        }
    }

    pub fn has_essential(&self) -> bool {
        self.points.iter().any(PersistencePoint::is_essential)
    }

    /// Fails with `UnboundedPoint` on the first infinite death.
    pub fn ensure_finite(&self) -> Result<()> {
        match self.points.iter().find(|p| !p.is_finite()) {
            Some(p) => Err(Error::UnboundedPoint { birth: p.birth }),
            None => Ok(()),
        }
    }

    pub fn with_essential(&self, policy: EssentialPolicy) -> Self {
        match policy {
            EssentialPolicy::Keep => self.clone(),
            EssentialPolicy::Drop => Self::new(
                self.points
                    .iter()
                    .filter(|p| !p.is_essential())
                    .copied()
                    .collect(),
            ),
            EssentialPolicy::Cap(v) => self.cap_essential_at(v),
            EssentialPolicy::CapMax => {
                let max_finite = self
                    .points
                    .iter()
                    .filter(|p| !p.is_essential())
                    .map(|p| p.death)
                    .fold(f64::NEG_INFINITY, f64::max);
                if max_finite.is_finite() {
                    self.cap_essential_at(max_finite)
                } else {
                    // nothing finite to cap against
                    self.with_essential(EssentialPolicy::Drop)
                }
            }
        }
    }

    fn cap_essential_at(&self, value: f64) -> Self {
        Self::new(
            self.points
                .iter()
                .map(|p| {
                    if p.is_essential() {
                        PersistencePoint {
                            death: value.max(p.birth),
                            ..*p
                        }
                    } else {
                        *p
                    }
                })
                .collect(),
        )
    }

    /// Removes points born strictly before `min_birth`.
    pub fn crop_below(&self, min_birth: f64) -> Self {
        Self::new(
            self.points
                .iter()
                .filter(|p| p.birth >= min_birth)
                .copied()
                .collect(),
        )
    }

    /// Removes points with zero lifetime.
    pub fn without_diagonal(&self) -> Self {
        Self::new(
            self.points
                .iter()
                .filter(|p| p.death > p.birth)
                .copied()
                .collect(),
        )
    }

    pub fn stats(&self) -> Result<DiagramStats> {
        self.ensure_finite()?;
        Ok(self.stats_unchecked())
    }

    pub(crate) fn stats_unchecked(&self) -> DiagramStats {
        if self.points.is_empty() {
            return DiagramStats {
                pers: 0.0,
                bd: 0.0,
                chi: Vec::new(),
                top: None,
            };
        }
        let pers = self
            .points
            .iter()
            .map(PersistencePoint::persistence_unchecked)
            .fold(f64::NEG_INFINITY, f64::max);
        let bd = self
            .points
            .iter()
            .map(|p| p.death)
            .fold(f64::NEG_INFINITY, f64::max);
        let chi: Vec<PersistencePoint> = self
            .points
            .iter()
            .filter(|p| p.persistence_unchecked() == pers)
            .copied()
            .collect();
        let top = chi.iter().copied().max_by(|a, b| {
            a.death
                .total_cmp(&b.death)
                .then(a.birth.total_cmp(&b.birth))
        });
        DiagramStats { pers, bd, chi, top }
    }

    /// Largest point persistence, 0 for `D0`.
    pub fn pers(&self) -> Result<f64> {
        Ok(self.stats()?.pers)
    }

    /// Dilation `(x, y) -> (c x, c y)`; `c = 0` collapses everything onto the diagonal.
    pub fn scale(&self, c: f64) -> Result<Self> {
        if !(c >= 0.0) {
            return Err(Error::InvalidDilation(c));
        }
        Ok(self.scale_unchecked(c))
    }

    pub(crate) fn scale_unchecked(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::empty();
        }
        Self::new(
            self.points
                .iter()
                .map(|p| PersistencePoint {
                    dim: p.dim,
                    birth: c * p.birth,
                    death: c * p.death,
                })
                .collect(),
        )
    }

    /// `(x, y) -> (ln(x + eps), ln(y + eps))`. With `eps = 0` every birth must be
    /// positive or the image contains `-inf`.
    pub fn log_map(&self, epsilon: f64) -> Self {
        Self::new(
            self.points
                .iter()
                .map(|p| PersistencePoint {
                    dim: p.dim,
                    birth: (p.birth + epsilon).ln(),
                    death: (p.death + epsilon).ln(),
                })
                .collect(),
        )
    }

    /// Translation along the diagonal.
    pub fn shift(&self, s: f64) -> Self {
        Self::new(
            self.points
                .iter()
                .map(|p| PersistencePoint {
                    dim: p.dim,
                    birth: p.birth + s,
                    death: p.death + s,
                })
                .collect(),
        )
    }

    /// Canonical ordering (dimension, birth, death), for multiset comparison.
    pub fn sorted(&self) -> Self {
        let mut points = self.points.clone();
        points.sort_by(PersistencePoint::total_cmp);
        Self::new(points)
    }

    /// Multiset equality.
    pub fn same_points(&self, other: &Self) -> bool {
        self.sorted() == other.sorted()
    }
}

impl FromIterator<PersistencePoint> for PersistenceDiagram {
    fn from_iter<I: IntoIterator<Item = PersistencePoint>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a PersistenceDiagram {
    type Item = &'a PersistencePoint;
    type IntoIter = std::slice::Iter<'a, PersistencePoint>;

    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}
