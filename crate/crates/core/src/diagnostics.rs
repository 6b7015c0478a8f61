//! Per-frame summary quantities.

use alloc::vec::Vec;

use crate::contour::{support_contour, Polyline};
use crate::grid::StateField;
use crate::kinetics::{total_density, TargetField};

/// Cumulative mass that left the domain through each edge.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EdgeOutflow {
    pub left: f64,
    pub right: f64,
    pub bottom: f64,
    pub top: f64,
}

impl EdgeOutflow {
    pub fn total(&self) -> f64 {
        self.left + self.right + self.bottom + self.top
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupDiagnostics {
    pub mass: f64,
    /// Mass-weighted mean position; `None` for an empty group.
    pub center_of_mass: Option<[f64; 2]>,
    /// Mass-weighted mean of `cos(θ_i − θ_ν)`; `None` for an empty group.
    pub alignment: Option<f64>,
    pub outflow: EdgeOutflow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub time: f64,
    pub step: usize,
    pub groups: Vec<GroupDiagnostics>,
    pub rho_max: f64,
    pub min_f: f64,
    /// Level set of the total density at the configured threshold.
    pub support: Vec<Polyline>,
}

/// Mass-weighted alignment of `group` with its target direction.
pub fn alignment(f: &StateField, targets: &TargetField, group: usize) -> Option<f64> {
    let v = f.vgrid();
    let theta_target = targets.group(group);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..v.n() {
        for j in 0..v.m() {
            for (cell, &x) in f.component(group, i, j).iter().enumerate() {
                if x != 0.0 {
                    num += libm::cos(v.angle(i) - theta_target[cell]) * x;
                    den += x;
                }
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Mass-weighted mean cell-centre position of `group`.
pub fn center_of_mass(f: &StateField, group: usize) -> Option<[f64; 2]> {
    let grid = f.grid();
    let v = f.vgrid();
    let (mut sx, mut sy, mut den) = (0.0, 0.0, 0.0);
    for i in 0..v.n() {
        for j in 0..v.m() {
            for (cell, &x) in f.component(group, i, j).iter().enumerate() {
                if x != 0.0 {
                    let (cx, cy) = grid.center_unchecked(cell % grid.nx, cell / grid.nx);
                    sx += cx * x;
                    sy += cy * x;
                    den += x;
                }
            }
        }
    }
    (den > 0.0).then(|| [sx / den, sy / den])
}

pub fn compute(
    f: &StateField,
    targets: &TargetField,
    outflow: &[EdgeOutflow],
    time: f64,
    step: usize,
    contour_threshold: f64,
) -> Diagnostics {
    let groups = (0..f.groups())
        .map(|g| GroupDiagnostics {
            mass: f.total_mass(g),
            center_of_mass: center_of_mass(f, g),
            alignment: alignment(f, targets, g),
            outflow: outflow.get(g).copied().unwrap_or_default(),
        })
        .collect();
    let rho = total_density(f);
    let rho_max = rho.iter().copied().fold(0.0, f64::max);
    let support = support_contour(&rho, f.grid(), contour_threshold).unwrap_or_default();
    Diagnostics {
        time,
        step,
        groups,
        rho_max,
        min_f: f.min_value(),
        support,
    }
}
