//! Persistent cohomology with clearing and implicit coboundaries. Produces the
//! same diagram as boundary-matrix reduction without materialising the
//! filtration, which keeps point clouds of a few hundred points cheap.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};

use super::filtration::{for_each_clique, VrOptions, MAX_VERTICES};
use super::Binomial;
use crate::diagram::{PersistenceDiagram, PersistencePoint};
use crate::error::{Error, Result};
use crate::metric_spaces::FiniteMetricSpace;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    value: f64,
    key: u64,
}

impl Cell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.value
            .total_cmp(&other.value)
            .then(other.key.cmp(&self.key))
    }
}

struct Complex<'a> {
    space: &'a FiniteMetricSpace,
    binom: Binomial,
    radius: f64,
}

impl Complex<'_> {
    /// Cofaces of the `dim`-simplex `cell`, unordered.
    fn coboundary(&self, cell: Cell, dim: usize, out: &mut Vec<Cell>) {
        out.clear();
        let mut verts = [0u32; MAX_VERTICES];
        self.binom.decode(cell.key, dim + 1, &mut verts[..dim + 1]);
        let verts = &verts[..dim + 1];
        let mut merged = [0u32; MAX_VERTICES];
        'next: for w in 0..self.space.len() as u32 {
            let mut value = cell.value;
            for &u in verts {
                if u == w {
                    continue 'next;
                }
                value = value.max(self.space.get(u as usize, w as usize));
            }
            if value > self.radius {
                continue;
            }
            let pos = verts.partition_point(|&u| u < w);
            merged[..pos].copy_from_slice(&verts[..pos]);
            merged[pos] = w;
            merged[pos + 1..dim + 2].copy_from_slice(&verts[pos..]);
            out.push(Cell {
                value,
                key: self.binom.key(&merged[..dim + 2]),
            });
        }
    }
}

fn xor_into(col: &mut Vec<Cell>, other: &[Cell], scratch: &mut Vec<Cell>) {
    scratch.clear();
    let (mut i, mut j) = (0, 0);
    while i < col.len() && j < other.len() {
        match col[i].cmp(&other[j]) {
            Ordering::Less => {
                scratch.push(col[i]);
                i += 1;
            }
            Ordering::Greater => {
                scratch.push(other[j]);
                j += 1;
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    scratch.extend_from_slice(&col[i..]);
    scratch.extend_from_slice(&other[j..]);
    std::mem::swap(col, scratch);
}

/// Heap entry ordered so that the earliest cell in the filtration is on top.
#[derive(Debug, Clone, Copy, PartialEq)]
struct MinCell(Cell);

impl Eq for MinCell {}

impl PartialOrd for MinCell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MinCell {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.cmp(&self.0)
    }
}

/// Removes and returns the earliest cell with odd multiplicity in the heap.
fn pop_pivot(heap: &mut BinaryHeap<MinCell>) -> Option<Cell> {
    while let Some(MinCell(top)) = heap.pop() {
        match heap.peek() {
            Some(MinCell(next)) if next.key == top.key => {
                heap.pop();
            }
            _ => return Some(top),
        }
    }
    None
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        parent[x as usize] = parent[parent[x as usize] as usize];
        x = parent[x as usize];
    }
    x
}

/// Smallest `r` at which some vertex is adjacent to all others; the complex is a
/// cone from there on and no finite class survives past it.
pub fn enclosing_radius(space: &FiniteMetricSpace) -> f64 {
    (0..space.len())
        .map(|i| {
            (0..space.len())
                .map(|j| space.get(i, j))
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Vietoris-Rips persistence of `space` in dimensions `0..=max_dim`.
pub fn vr_persistence(space: &FiniteMetricSpace, opts: &VrOptions) -> Result<PersistenceDiagram> {
    opts.validate()?;
    let n = space.len();
    if n == 0 {
        return Ok(PersistenceDiagram::empty());
    }
    let r_enc = enclosing_radius(space);
    let radius = if opts.max_radius >= r_enc {
        r_enc
    } else {
        opts.max_radius
    };
    let complex = Complex {
        space,
        binom: Binomial::new(n, MAX_VERTICES),
        radius,
    };
    if complex.binom.get(n, opts.max_dim + 2) == u64::MAX {
        return Err(Error::TooLarge {
            what: "point cloud",
            size: n,
            limit: n - 1,
        });
    }
    let mut points = Vec::new();

    // dimension 0: Kruskal
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let value = space.get(i, j);
            if value <= radius {
                edges.push(Cell {
                    value,
                    key: complex.binom.key(&[i as u32, j as u32]),
                });
            }
        }
    }
    if edges.len() + n > opts.simplex_cap {
        return Err(Error::TooManySimplices {
            cap: opts.simplex_cap,
        });
    }
    edges.sort_unstable_by(Cell::cmp);
    let mut parent: Vec<u32> = (0..n as u32).collect();
    let mut cleared: HashSet<u64> = HashSet::new();
    let mut pair = [0u32; 2];
    for e in &edges {
        complex.binom.decode(e.key, 2, &mut pair);
        let (a, b) = (find(&mut parent, pair[0]), find(&mut parent, pair[1]));
        if a != b {
            parent[a.max(b) as usize] = a.min(b);
            cleared.insert(e.key);
            if e.value > 0.0 {
                points.push(PersistencePoint::new(0, 0.0, e.value));
            }
        }
    }
    let components = (0..n as u32).filter(|&v| find(&mut parent, v) == v).count();
    points.extend((0..components).map(|_| PersistencePoint::new(0, 0.0, f64::INFINITY)));

    let mut columns = edges;
    for dim in 1..=opts.max_dim {
        if dim > 1 {
            columns = Vec::new();
            let mut count = 0usize;
            for_each_clique(space, radius, dim + 1, |verts, value| {
                count += 1;
                if count > opts.simplex_cap {
                    return Err(Error::TooManySimplices {
                        cap: opts.simplex_cap,
                    });
                }
                if verts.len() == dim + 1 {
                    columns.push(Cell {
                        value,
                        key: complex.binom.key(verts),
                    });
                }
                Ok(())
            })?;
            columns.sort_unstable_by(Cell::cmp);
        }
        // for each pivot, the combination of columns whose coboundary owns it
        let mut pivots: HashMap<u64, Vec<Cell>> = HashMap::new();
        let mut next_cleared = HashSet::new();
        let mut cob = Vec::new();
        let mut scratch = Vec::new();
        let mut heap = BinaryHeap::new();
        for &sigma in columns.iter().rev() {
            if cleared.contains(&sigma.key) {
                continue;
            }
            heap.clear();
            complex.coboundary(sigma, dim, &mut cob);
            heap.extend(cob.iter().map(|&c| MinCell(c)));
            let mut combo = vec![sigma];
            let mut low = pop_pivot(&mut heap);
            while let Some(p) = low {
                let Some(owner) = pivots.get(&p.key) else {
                    break;
                };
                for &c in owner {
                    complex.coboundary(c, dim, &mut cob);
                    heap.extend(cob.iter().map(|&c| MinCell(c)));
                }
                xor_into(&mut combo, owner, &mut scratch);
                // the pivot itself was popped; the owner's copy cancels it
                heap.push(MinCell(p));
                low = pop_pivot(&mut heap);
            }
            match low {
                None => points.push(PersistencePoint::new(dim, sigma.value, f64::INFINITY)),
                Some(p) => {
                    if p.value > sigma.value {
                        points.push(PersistencePoint::new(dim, sigma.value, p.value));
                    }
                    next_cleared.insert(p.key);
                    pivots.insert(p.key, combo);
                }
            }
        }
        cleared = next_cleared;
    }
    Ok(PersistenceDiagram::new(points).sorted())
}
