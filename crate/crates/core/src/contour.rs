//! Marching-squares extraction of density level sets.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::grid::Grid2D;
use crate::{Error, Result};

/// A chain of points in domain coordinates. Closed chains do not repeat
/// their first point.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
}

impl Polyline {
    /// Signed shoelace area; only meaningful for closed chains.
    pub fn signed_area(&self) -> f64 {
        let p = &self.points;
        let n = p.len();
        let mut a = 0.0;
        for k in 0..n {
            let (x0, y0) = (p[k][0], p[k][1]);
            let (x1, y1) = (p[(k + 1) % n][0], p[(k + 1) % n][1]);
            a += x0 * y1 - x1 * y0;
        }
        0.5 * a
    }
}

// Square edges, counter-clockwise from the bottom.
const BOTTOM: u8 = 0;
const RIGHT: u8 = 1;
const TOP: u8 = 2;
const LEFT: u8 = 3;

/// Edge pairs crossed by the level set for a corner mask
/// (bit 0 bottom-left, 1 bottom-right, 2 top-right, 3 top-left).
fn segments(mask: u8, center_inside: bool) -> &'static [(u8, u8)] {
    match mask {
        1 | 14 => &[(LEFT, BOTTOM)],
        2 | 13 => &[(BOTTOM, RIGHT)],
        3 | 12 => &[(LEFT, RIGHT)],
        4 | 11 => &[(RIGHT, TOP)],
        6 | 9 => &[(BOTTOM, TOP)],
        7 | 8 => &[(LEFT, TOP)],
        5 if center_inside => &[(BOTTOM, RIGHT), (TOP, LEFT)],
        5 => &[(LEFT, BOTTOM), (RIGHT, TOP)],
        10 if center_inside => &[(LEFT, BOTTOM), (RIGHT, TOP)],
        10 => &[(BOTTOM, RIGHT), (TOP, LEFT)],
        _ => &[],
    }
}

/// Level set `field = threshold` of a cell-centred field, traced through the
/// squares whose corners are neighbouring cell centres.
pub fn support_contour(field: &[f64], grid: &Grid2D, threshold: f64) -> Result<Vec<Polyline>> {
    if !(threshold > 0.0) {
        return Err(Error::invalid("contour threshold must be positive"));
    }
    let (nx, ny) = (grid.nx, grid.ny);
    if nx < 2 || ny < 2 {
        return Ok(Vec::new());
    }
    let value = |ix: usize, iy: usize| field[iy * nx + ix];
    let inside = |v: f64| v >= threshold;

    // Edge ids: 2·cell for the horizontal edge to the right of a cell centre,
    // 2·cell + 1 for the vertical edge above it.
    let edge_id = |ix: usize, iy: usize, side: u8| -> usize {
        match side {
            BOTTOM => 2 * (iy * nx + ix),
            TOP => 2 * ((iy + 1) * nx + ix),
            LEFT => 2 * (iy * nx + ix) + 1,
            _ => 2 * (iy * nx + ix + 1) + 1,
        }
    };
    let crossing = |ix: usize, iy: usize, side: u8| -> [f64; 2] {
        let (a, b) = match side {
            BOTTOM => ((ix, iy), (ix + 1, iy)),
            TOP => ((ix, iy + 1), (ix + 1, iy + 1)),
            LEFT => ((ix, iy), (ix, iy + 1)),
            _ => ((ix + 1, iy), (ix + 1, iy + 1)),
        };
        let (va, vb) = (value(a.0, a.1), value(b.0, b.1));
        let t = if vb == va {
            0.5
        } else {
            (threshold - va) / (vb - va)
        };
        let pa = grid.center_unchecked(a.0, a.1);
        let pb = grid.center_unchecked(b.0, b.1);
        [pa.0 + t * (pb.0 - pa.0), pa.1 + t * (pb.1 - pa.1)]
    };

    let mut points: BTreeMap<usize, [f64; 2]> = BTreeMap::new();
    let mut segs: Vec<(usize, usize)> = Vec::new();
    for iy in 0..ny - 1 {
        for ix in 0..nx - 1 {
            let corners = [
                value(ix, iy),
                value(ix + 1, iy),
                value(ix + 1, iy + 1),
                value(ix, iy + 1),
            ];
            let mask =
                corners
                    .iter()
                    .enumerate()
                    .fold(0u8, |m, (b, &v)| if inside(v) { m | (1 << b) } else { m });
            let center = corners.iter().sum::<f64>() * 0.25;
            for &(ea, eb) in segments(mask, inside(center)) {
                let (ia, ib) = (edge_id(ix, iy, ea), edge_id(ix, iy, eb));
                points.entry(ia).or_insert_with(|| crossing(ix, iy, ea));
                points.entry(ib).or_insert_with(|| crossing(ix, iy, eb));
                segs.push((ia, ib));
            }
        }
    }

    let mut by_edge: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, &(a, b)) in segs.iter().enumerate() {
        by_edge.entry(a).or_default().push(k);
        by_edge.entry(b).or_default().push(k);
    }
    let mut used = vec![false; segs.len()];
    let mut out = Vec::new();

    let trace = |start_seg: usize, start_edge: usize, used: &mut Vec<bool>| -> (Vec<usize>, bool) {
        let mut chain = vec![start_edge];
        let mut seg = start_seg;
        let mut edge = start_edge;
        loop {
            used[seg] = true;
            let (a, b) = segs[seg];
            let next = if a == edge { b } else { a };
            if next == start_edge {
                return (chain, true);
            }
            chain.push(next);
            edge = next;
            match by_edge[&edge].iter().copied().find(|&s| !used[s]) {
                Some(s) => seg = s,
                None => return (chain, false),
            }
        }
    };

    // Open chains start at edges touched by a single segment.
    for (&edge, list) in &by_edge {
        if list.len() == 1 && !used[list[0]] {
            let (chain, closed) = trace(list[0], edge, &mut used);
            out.push(Polyline {
                points: chain.iter().map(|e| points[e]).collect(),
                closed,
            });
        }
    }
    for k in 0..segs.len() {
        if !used[k] {
            let (chain, closed) = trace(k, segs[k].0, &mut used);
            out.push(Polyline {
                points: chain.iter().map(|e| points[e]).collect(),
                closed,
            });
        }
    }
    Ok(out)
}
