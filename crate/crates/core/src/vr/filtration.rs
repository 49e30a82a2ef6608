use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric_spaces::FiniteMetricSpace;

/// Highest homology dimension supported; simplices then have at most
/// `MAX_DIM + 2` vertices.
pub const MAX_DIM: usize = 3;
pub const MAX_VERTICES: usize = MAX_DIM + 2;
pub const DEFAULT_SIMPLEX_CAP: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VrOptions {
    pub max_dim: usize,
    pub max_radius: f64,
    pub simplex_cap: usize,
}

impl Default for VrOptions {
    fn default() -> Self {
        Self {
            max_dim: 2,
            max_radius: f64::INFINITY,
            simplex_cap: DEFAULT_SIMPLEX_CAP,
        }
    }
}

impl VrOptions {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.max_dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "max_dim {} exceeds the supported maximum {MAX_DIM}",
                self.max_dim
            )));
        }
        if self.max_radius.is_nan() || self.max_radius < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "max_radius must be non-negative, got {}",
                self.max_radius
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simplex {
    verts: [u32; MAX_VERTICES],
    len: u8,
    pub value: f64,
}

impl Simplex {
    pub fn new(vertices: &[u32], value: f64) -> Self {
        assert!(!vertices.is_empty() && vertices.len() <= MAX_VERTICES);
        let mut verts = [0; MAX_VERTICES];
        verts[..vertices.len()].copy_from_slice(vertices);
        verts[..vertices.len()].sort_unstable();
        Self {
            verts,
            len: vertices.len() as u8,
            value,
        }
    }

    pub fn vertices(&self) -> &[u32] {
        &self.verts[..self.len as usize]
    }

    pub fn dim(&self) -> usize {
        self.len as usize - 1
    }

    fn order(&self, other: &Self) -> std::cmp::Ordering {
        self.value
            .total_cmp(&other.value)
            .then(self.len.cmp(&other.len))
            .then_with(|| self.vertices().cmp(other.vertices()))
    }
}

/// Simplices sorted by (value, dimension, vertex tuple); faces precede cofaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtration {
    pub simplices: Vec<Simplex>,
    pub max_dim: usize,
}

impl Filtration {
    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn count_by_dim(&self) -> Vec<usize> {
        let mut counts = vec![0; self.max_dim + 2];
        for s in &self.simplices {
            counts[s.dim()] += 1;
        }
        counts
    }
}

/// Calls `visit(vertices, diameter)` for every clique of at most `max_vertices`
/// vertices whose diameter is at most `radius`, in lexicographic order.
pub(crate) fn for_each_clique(
    space: &FiniteMetricSpace,
    radius: f64,
    max_vertices: usize,
    mut visit: impl FnMut(&[u32], f64) -> Result<()>,
) -> Result<()> {
    let n = space.len();
    let neighbours: Vec<Vec<u32>> = (0..n)
        .map(|i| {
            (i + 1..n)
                .filter(|&j| space.get(i, j) <= radius)
                .map(|j| j as u32)
                .collect()
        })
        .collect();
    let mut stack = Vec::with_capacity(max_vertices);
    for v in 0..n as u32 {
        stack.clear();
        stack.push(v);
        visit(&stack, 0.0)?;
        if max_vertices > 1 {
            expand(
                space,
                &neighbours,
                &mut stack,
                0.0,
                &neighbours[v as usize],
                max_vertices,
                &mut visit,
            )?;
        }
    }
    Ok(())
}

fn expand(
    space: &FiniteMetricSpace,
    neighbours: &[Vec<u32>],
    stack: &mut Vec<u32>,
    value: f64,
    candidates: &[u32],
    max_vertices: usize,
    visit: &mut impl FnMut(&[u32], f64) -> Result<()>,
) -> Result<()> {
    for (k, &c) in candidates.iter().enumerate() {
        let v = stack
            .iter()
            .map(|&u| space.get(u as usize, c as usize))
            .fold(value, f64::max);
        stack.push(c);
        visit(stack, v)?;
        if stack.len() < max_vertices {
            let next: Vec<u32> = candidates[k + 1..]
                .iter()
                .copied()
                .filter(|w| neighbours[c as usize].binary_search(w).is_ok())
                .collect();
            if !next.is_empty() {
                expand(space, neighbours, stack, v, &next, max_vertices, visit)?;
            }
        }
        stack.pop();
    }
    Ok(())
}

/// Vietoris-Rips filtration up to dimension `max_dim + 1`.
pub fn vr_filtration(space: &FiniteMetricSpace, opts: &VrOptions) -> Result<Filtration> {
    opts.validate()?;
    let mut simplices = Vec::new();
    for_each_clique(space, opts.max_radius, opts.max_dim + 2, |verts, value| {
        if simplices.len() >= opts.simplex_cap {
            return Err(Error::TooManySimplices {
                cap: opts.simplex_cap,
            });
        }
        simplices.push(Simplex::new(verts, value));
        Ok(())
    })?;
    simplices.sort_unstable_by(Simplex::order);
    Ok(Filtration {
        simplices,
        max_dim: opts.max_dim,
    })
}
