//! Spatial grid, velocity lattice and the distribution container.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::{Error, Result};

/// Tolerance used when snapping `cos θ`/`sin θ` to exact zero.
const TRIG_SNAP: f64 = 1e-15;

/// Uniform cell-centred grid over a rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, origin: (f64, f64), extent: (f64, f64)) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("grid cell counts must be positive"));
        }
        if !(extent.0 > 0.0 && extent.1 > 0.0) || !extent.0.is_finite() || !extent.1.is_finite() {
            return Err(Error::invalid("grid extents must be positive and finite"));
        }
        if !origin.0.is_finite() || !origin.1.is_finite() {
            return Err(Error::invalid("grid origin must be finite"));
        }
        Ok(Grid2D {
            nx,
            ny,
            dx: extent.0 / nx as f64,
            dy: extent.1 / ny as f64,
            x0: origin.0,
            y0: origin.1,
        })
    }

    /// The unit square `[0,1] × [0,1]`.
    pub fn unit_square(nx: usize, ny: usize) -> Result<Self> {
        Self::new(nx, ny, (0.0, 0.0), (1.0, 1.0))
    }

    pub fn ncells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn width(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn height(&self) -> f64 {
        self.ny as f64 * self.dy
    }

    /// Row-major flat index (`iy` outer, `ix` inner).
    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Result<(f64, f64)> {
        if ix >= self.nx {
            return Err(Error::IndexOutOfRange {
                what: "grid x index",
                index: ix,
                len: self.nx,
            });
        }
        if iy >= self.ny {
            return Err(Error::IndexOutOfRange {
                what: "grid y index",
                index: iy,
                len: self.ny,
            });
        }
        Ok(self.center_unchecked(ix, iy))
    }

    #[inline]
    pub(crate) fn center_unchecked(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.x0 + (ix as f64 + 0.5) * self.dx,
            self.y0 + (iy as f64 + 0.5) * self.dy,
        )
    }
}

/// How speed moduli are laid out.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SpeedLattice {
    /// One modulus shared by every pedestrian.
    Single(f64),
    /// `m ≥ 2` moduli equally spaced on `[0, 1]`.
    Uniform(usize),
}

/// Discrete walking directions and speed moduli.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    angles: Vec<f64>,
    speeds: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    wrap: bool,
}

/// Builds `n` directions equally spaced over `span` (inclusive ends) and the
/// speed moduli described by `speeds`.
pub fn build_velocity_grid(
    n: usize,
    span: (f64, f64),
    wrap: bool,
    speeds: SpeedLattice,
) -> Result<VelocityGrid> {
    if n == 0 {
        return Err(Error::invalid("number of directions must be positive"));
    }
    let (lo, hi) = span;
    if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi > TAU || hi < lo {
        return Err(Error::invalid("direction span must lie within [0, 2π]"));
    }
    if n > 1 && hi <= lo {
        return Err(Error::invalid("direction span must be non-empty for n > 1"));
    }
    let angles: Vec<f64> = if n == 1 {
        vec![lo]
    } else {
        let step = (hi - lo) / (n - 1) as f64;
        (0..n).map(|i| lo + i as f64 * step).collect()
    };
    if angles.iter().any(|&a| a >= TAU) {
        return Err(Error::invalid("directions must lie in [0, 2π)"));
    }

    let speeds = match speeds {
        SpeedLattice::Single(v) => {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid("single speed modulus must lie in (0, 1]"));
            }
            vec![v]
        }
        SpeedLattice::Uniform(m) => {
            if m < 2 {
                return Err(Error::invalid(
                    "a uniform speed lattice needs at least two moduli",
                ));
            }
            (0..m).map(|j| j as f64 / (m - 1) as f64).collect()
        }
    };

    let snap = |v: f64| if v.abs() < TRIG_SNAP { 0.0 } else { v };
    let cos = angles.iter().map(|&a| snap(libm::cos(a))).collect();
    let sin = angles.iter().map(|&a| snap(libm::sin(a))).collect();

    Ok(VelocityGrid {
        angles,
        speeds,
        cos,
        sin,
        wrap,
    })
}

impl VelocityGrid {
    /// `n` directions over `[0, 2π(n−1)/n]` with wrapping neighbours.
    pub fn full_circle(n: usize, speeds: SpeedLattice) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("number of directions must be positive"));
        }
        build_velocity_grid(n, (0.0, TAU * (n - 1) as f64 / n as f64), true, speeds)
    }

    pub fn n(&self) -> usize {
        self.angles.len()
    }

    pub fn m(&self) -> usize {
        self.speeds.len()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    pub fn wrap(&self) -> bool {
        self.wrap
    }

    pub fn angle(&self, i: usize) -> f64 {
        self.angles[i]
    }

    pub fn speed(&self, j: usize) -> f64 {
        self.speeds[j]
    }

    /// `cos θ_i`, with values within 1e-15 of zero stored as exact zero.
    pub fn cos(&self, i: usize) -> f64 {
        self.cos[i]
    }

    pub fn sin(&self, i: usize) -> f64 {
        self.sin[i]
    }

    pub fn max_speed(&self) -> f64 {
        self.speeds.iter().copied().fold(0.0, f64::max)
    }

    /// Neighbouring direction index, `None` when it falls off a non-wrapping
    /// lattice.
    pub fn neighbor(&self, h: usize, up: bool) -> Option<usize> {
        let n = self.n();
        if up {
            if h + 1 < n {
                Some(h + 1)
            } else if self.wrap {
                Some(0)
            } else {
                None
            }
        } else if h > 0 {
            Some(h - 1)
        } else if self.wrap {
            Some(n - 1)
        } else {
            None
        }
    }
}

/// Discrete distribution `f[σ][i][j]` sampled at cell centres.
///
/// Storage is component-major: each `(σ, i, j)` owns a contiguous row-major
/// block of `nx·ny` cell values.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    grid: Grid2D,
    vgrid: VelocityGrid,
    groups: usize,
    data: Vec<f64>,
}

impl StateField {
    pub fn zeros(grid: Grid2D, vgrid: VelocityGrid, groups: usize) -> Self {
        let len = groups * vgrid.n() * vgrid.m() * grid.ncells();
        StateField {
            grid,
            vgrid,
            groups,
            data: vec![0.0; len],
        }
    }

    pub fn from_data(
        grid: Grid2D,
        vgrid: VelocityGrid,
        groups: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        let len = groups * vgrid.n() * vgrid.m() * grid.ncells();
        if data.len() != len {
            return Err(Error::invalid("state data length does not match its shape"));
        }
        if let Some(&v) = data.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::NegativeDensity(v));
        }
        Ok(StateField {
            grid,
            vgrid,
            groups,
            data,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn vgrid(&self) -> &VelocityGrid {
        &self.vgrid
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    /// Number of velocity states per group, `n·m`.
    pub fn states(&self) -> usize {
        self.vgrid.n() * self.vgrid.m()
    }

    pub fn components(&self) -> usize {
        self.groups * self.states()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn component_index(&self, group: usize, i: usize, j: usize) -> usize {
        (group * self.vgrid.n() + i) * self.vgrid.m() + j
    }

    /// Splits a component index back into `(group, direction, speed)`.
    pub fn component_parts(&self, c: usize) -> (usize, usize, usize) {
        let m = self.vgrid.m();
        let n = self.vgrid.n();
        (c / (n * m), (c / m) % n, c % m)
    }

    pub fn component(&self, group: usize, i: usize, j: usize) -> &[f64] {
        let nc = self.grid.ncells();
        let c = self.component_index(group, i, j);
        &self.data[c * nc..(c + 1) * nc]
    }

    pub fn component_mut(&mut self, group: usize, i: usize, j: usize) -> &mut [f64] {
        let nc = self.grid.ncells();
        let c = self.component_index(group, i, j);
        &mut self.data[c * nc..(c + 1) * nc]
    }

    #[inline]
    pub fn get(&self, group: usize, i: usize, j: usize, ix: usize, iy: usize) -> f64 {
        let c = self.component_index(group, i, j);
        self.data[c * self.grid.ncells() + self.grid.index(ix, iy)]
    }

    #[inline]
    pub fn set(&mut self, group: usize, i: usize, j: usize, ix: usize, iy: usize, value: f64) {
        let c = self.component_index(group, i, j);
        let k = c * self.grid.ncells() + self.grid.index(ix, iy);
        self.data[k] = value;
    }

    /// Replaces the values with `data` of identical shape.
    pub fn with_data(&self, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), self.data.len());
        StateField {
            grid: self.grid,
            vgrid: self.vgrid.clone(),
            groups: self.groups,
            data,
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.with_data(self.data.iter().map(|v| a * v).collect())
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Σ f·dx·dy` over every state and cell of `group`.
    pub fn total_mass(&self, group: usize) -> f64 {
        let nc = self.grid.ncells();
        let per_group = self.states() * nc;
        let block = &self.data[group * per_group..(group + 1) * per_group];
        block.iter().sum::<f64>() * self.grid.cell_area()
    }
}
