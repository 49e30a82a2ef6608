use std::collections::HashMap;

use super::filtration::{Filtration, MAX_VERTICES};
use super::Binomial;
use crate::diagram::{PersistenceDiagram, PersistencePoint};

const NONE: u32 = u32::MAX;

/// Symmetric difference of two sorted index lists.
fn xor_into(col: &mut Vec<u32>, other: &[u32], scratch: &mut Vec<u32>) {
    scratch.clear();
    let (mut i, mut j) = (0, 0);
    while i < col.len() && j < other.len() {
        match col[i].cmp(&other[j]) {
            std::cmp::Ordering::Less => {
                scratch.push(col[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                scratch.push(other[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    scratch.extend_from_slice(&col[i..]);
    scratch.extend_from_slice(&other[j..]);
    std::mem::swap(col, scratch);
}

/// Standard GF(2) reduction of the boundary matrix, with clearing of columns
/// already known to be positive. Zero-length pairs are dropped; simplices that
/// stay unpaired give classes with infinite death.
pub fn persistence(filtration: &Filtration) -> PersistenceDiagram {
    let simplices = &filtration.simplices;
    let n_vertices = simplices
        .iter()
        .flat_map(|s| s.vertices().iter().copied())
        .max()
        .map_or(0, |v| v as usize + 1);
    let binom = Binomial::new(n_vertices, MAX_VERTICES);
    let index: HashMap<(u8, u64), u32> = simplices
        .iter()
        .enumerate()
        .map(|(i, s)| ((s.dim() as u8, binom.key(s.vertices())), i as u32))
        .collect();

    let boundary = |j: usize| -> Vec<u32> {
        let s = &simplices[j];
        let v = s.vertices();
        if v.len() == 1 {
            return Vec::new();
        }
        let mut face = [0u32; MAX_VERTICES];
        let mut col: Vec<u32> = (0..v.len())
            .map(|skip| {
                let mut k = 0;
                for (t, &w) in v.iter().enumerate() {
                    if t != skip {
                        face[k] = w;
                        k += 1;
                    }
                }
                index[&((s.dim() - 1) as u8, binom.key(&face[..k]))]
            })
            .collect();
        col.sort_unstable();
        col
    };

    let n = simplices.len();
    let mut pivot_owner = vec![NONE; n];
    let mut reduced: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut cleared = vec![false; n];
    let mut paired_death = vec![false; n];
    let mut scratch = Vec::new();
    let mut points = Vec::new();

    for dim in (1..=filtration.max_dim + 1).rev() {
        for j in 0..n {
            if simplices[j].dim() != dim || cleared[j] {
                continue;
            }
            let mut col = boundary(j);
            while let Some(&low) = col.last() {
                let owner = pivot_owner[low as usize];
                if owner == NONE {
                    break;
                }
                xor_into(&mut col, &reduced[owner as usize], &mut scratch);
            }
            if let Some(&low) = col.last() {
                let low = low as usize;
                pivot_owner[low] = j as u32;
                cleared[low] = true;
                paired_death[j] = true;
                let (b, d) = (simplices[low].value, simplices[j].value);
                if d > b {
                    points.push(PersistencePoint::new(dim - 1, b, d));
                }
                reduced[j] = col;
            }
        }
    }
    for (i, s) in simplices.iter().enumerate() {
        if s.dim() <= filtration.max_dim && pivot_owner[i] == NONE && !paired_death[i] {
            points.push(PersistencePoint::new(s.dim(), s.value, f64::INFINITY));
        }
    }
    PersistenceDiagram::new(points).sorted()
}
