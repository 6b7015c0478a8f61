//! Macroscopic moments, target directions, visibility zones and the
//! gain/loss interaction operator.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use crate::games::{eta_unchecked, speed_table_unchecked, turn_table_unchecked, GameParams};
use crate::grid::{Grid2D, StateField};
use crate::{par, Error, Result};

/// Density and flux per group plus their totals.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentField {
    pub rho: Vec<Vec<f64>>,
    pub qx: Vec<Vec<f64>>,
    pub qy: Vec<Vec<f64>>,
    pub rho_total: Vec<f64>,
    pub qx_total: Vec<f64>,
    pub qy_total: Vec<f64>,
}

/// `ρ^σ = Σ_ij f_ij^σ`, `q^σ = Σ_ij v_j (cos θ_i, sin θ_i) f_ij^σ`.
pub fn moments(f: &StateField) -> MomentField {
    let nc = f.grid().ncells();
    let v = f.vgrid();
    let mut out = MomentField {
        rho: vec![vec![0.0; nc]; f.groups()],
        qx: vec![vec![0.0; nc]; f.groups()],
        qy: vec![vec![0.0; nc]; f.groups()],
        rho_total: vec![0.0; nc],
        qx_total: vec![0.0; nc],
        qy_total: vec![0.0; nc],
    };
    for s in 0..f.groups() {
        for i in 0..v.n() {
            for j in 0..v.m() {
                let cx = v.speed(j) * v.cos(i);
                let cy = v.speed(j) * v.sin(i);
                let comp = f.component(s, i, j);
                for (cell, &val) in comp.iter().enumerate() {
                    out.rho[s][cell] += val;
                    out.qx[s][cell] += cx * val;
                    out.qy[s][cell] += cy * val;
                }
            }
        }
        for cell in 0..nc {
            out.rho_total[cell] += out.rho[s][cell];
            out.qx_total[cell] += out.qx[s][cell];
            out.qy_total[cell] += out.qy[s][cell];
        }
    }
    out
}

/// Total density `Σ_σ Σ_ij f` per cell.
pub fn total_density(f: &StateField) -> Vec<f64> {
    let nc = f.grid().ncells();
    let mut rho = vec![0.0; nc];
    for comp in f.data().chunks(nc) {
        for (r, v) in rho.iter_mut().zip(comp) {
            *r += v;
        }
    }
    rho
}

/// Where a group is heading.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Target {
    /// A point in the domain; the target angle varies with position.
    Point([f64; 2]),
    /// A fixed exit direction, in radians.
    Direction(f64),
}

#[inline]
fn normalize_angle(a: f64) -> f64 {
    let r = libm::fmod(a, TAU);
    let r = if r < 0.0 { r + TAU } else { r };
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Angle in `[0, 2π)` from `x` toward `target`.
pub fn target_angle(x: (f64, f64), target: &Target) -> Result<f64> {
    match *target {
        Target::Direction(a) => Ok(normalize_angle(a)),
        Target::Point([tx, ty]) => {
            let (dx, dy) = (tx - x.0, ty - x.1);
            if dx == 0.0 && dy == 0.0 {
                return Err(Error::CoincidentTarget);
            }
            Ok(normalize_angle(libm::atan2(dy, dx)))
        }
    }
}

/// Target angle per group and cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetField {
    ncells: usize,
    angles: Vec<f64>,
}

impl TargetField {
    /// Evaluates each group's target at every cell centre. A cell whose centre
    /// sits on a point target borrows the angle of an adjacent cell.
    pub fn new(grid: &Grid2D, targets: &[Target]) -> Result<Self> {
        let nc = grid.ncells();
        let mut angles = Vec::with_capacity(nc * targets.len());
        for t in targets {
            for iy in 0..grid.ny {
                for ix in 0..grid.nx {
                    let a = match target_angle(grid.center_unchecked(ix, iy), t) {
                        Ok(a) => a,
                        Err(Error::CoincidentTarget) => {
                            let neighbor = [
                                (ix + 1 < grid.nx).then(|| (ix + 1, iy)),
                                ix.checked_sub(1).map(|x| (x, iy)),
                                (iy + 1 < grid.ny).then(|| (ix, iy + 1)),
                                iy.checked_sub(1).map(|y| (ix, y)),
                            ]
                            .into_iter()
                            .flatten()
                            .next()
                            .ok_or(Error::CoincidentTarget)?;
                            target_angle(grid.center_unchecked(neighbor.0, neighbor.1), t)?
                        }
                        Err(e) => return Err(e),
                    };
                    angles.push(a);
                }
            }
        }
        Ok(TargetField { ncells: nc, angles })
    }

    pub fn groups(&self) -> usize {
        self.angles.len() / self.ncells.max(1)
    }

    #[inline]
    pub fn angle(&self, group: usize, cell: usize) -> f64 {
        self.angles[group * self.ncells + cell]
    }

    pub fn group(&self, group: usize) -> &[f64] {
        &self.angles[group * self.ncells..(group + 1) * self.ncells]
    }
}

/// Visibility zone shape.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "mode", rename_all = "snake_case"))]
pub enum VisibilityZone {
    /// Only the pedestrian's own cell.
    #[default]
    Local,
    /// Cells within `radius` whose bearing is within `half_angle` of the
    /// heading, plus the own cell, uniformly weighted.
    Sector { radius: f64, half_angle: f64 },
}

impl VisibilityZone {
    pub fn validate(&self) -> Result<()> {
        if let VisibilityZone::Sector { radius, half_angle } = *self {
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(Error::validation("radius", "must be positive"));
            }
            if !(half_angle > 0.0 && half_angle <= PI) {
                return Err(Error::validation("half_angle", "must lie in (0, π]"));
            }
        }
        Ok(())
    }
}

/// Zone membership precomputed for every `(cell, heading)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityKernel {
    zone: VisibilityZone,
    n: usize,
    /// CSR offsets into `cells`, indexed by `cell * n + heading`.
    offsets: Vec<usize>,
    cells: Vec<usize>,
}

impl VisibilityKernel {
    pub fn new(grid: &Grid2D, angles: &[f64], zone: VisibilityZone) -> Self {
        let n = angles.len();
        let mut kernel = VisibilityKernel {
            zone,
            n,
            offsets: Vec::new(),
            cells: Vec::new(),
        };
        let VisibilityZone::Sector { radius, half_angle } = zone else {
            return kernel;
        };
        let reach_x = libm::floor(radius / grid.dx) as isize;
        let reach_y = libm::floor(radius / grid.dy) as isize;
        kernel.offsets.push(0);
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let here = grid.index(ix, iy);
                for &heading in angles {
                    kernel.cells.push(here);
                    for oy in -reach_y..=reach_y {
                        for ox in -reach_x..=reach_x {
                            if ox == 0 && oy == 0 {
                                continue;
                            }
                            let (jx, jy) = (ix as isize + ox, iy as isize + oy);
                            if jx < 0 || jy < 0 || jx >= grid.nx as isize || jy >= grid.ny as isize
                            {
                                continue;
                            }
                            let (ddx, ddy) = (ox as f64 * grid.dx, oy as f64 * grid.dy);
                            if libm::hypot(ddx, ddy) > radius {
                                continue;
                            }
                            let bearing = libm::atan2(ddy, ddx);
                            let mut off = libm::fmod(bearing - heading, TAU);
                            if off > PI {
                                off -= TAU;
                            } else if off <= -PI {
                                off += TAU;
                            }
                            if libm::fabs(off) <= half_angle + 1e-12 {
                                kernel.cells.push(grid.index(jx as usize, jy as usize));
                            }
                        }
                    }
                    kernel.offsets.push(kernel.cells.len());
                }
            }
        }
        kernel
    }

    pub fn zone(&self) -> VisibilityZone {
        self.zone
    }

    pub fn is_local(&self) -> bool {
        matches!(self.zone, VisibilityZone::Local)
    }

    /// Cells seen from `cell` when heading along direction index `heading`.
    /// Each carries weight `1 / len`.
    pub fn members(&self, cell: usize, heading: usize) -> &[usize] {
        if self.is_local() {
            return core::slice::from_ref(&LOCAL_SENTINEL);
        }
        let k = cell * self.n + heading;
        &self.cells[self.offsets[k]..self.offsets[k + 1]]
    }

    /// Weighted cell list; local zones resolve to `[(cell, 1.0)]`.
    pub fn weights(&self, cell: usize, heading: usize) -> Vec<(usize, f64)> {
        if self.is_local() {
            return vec![(cell, 1.0)];
        }
        let m = self.members(cell, heading);
        let w = 1.0 / m.len() as f64;
        m.iter().map(|&c| (c, w)).collect()
    }
}

static LOCAL_SENTINEL: usize = usize::MAX;

/// Kernel-weighted average of a cell field around `cell` for the given
/// heading index.
pub fn visibility_average(
    field: &[f64],
    cell: usize,
    kernel: &VisibilityKernel,
    heading: usize,
) -> f64 {
    if kernel.is_local() {
        return field[cell];
    }
    let m = kernel.members(cell, heading);
    if m.is_empty() {
        return field[cell];
    }
    m.iter().map(|&c| field[c]).sum::<f64>() / m.len() as f64
}

/// Everything the interaction operator needs besides the state.
#[derive(Debug, Clone, Copy)]
pub struct InteractionModel<'a> {
    pub games: &'a [GameParams],
    pub kernel: &'a VisibilityKernel,
    pub targets: &'a TargetField,
}

/// Evaluates the interaction operator `J[f]`, returned with the same layout as
/// `f.data()`.
///
/// For each cell and group the candidate `(h, k)` sees averages over its own
/// zone: `ρ̄` of the total density and `f̄_pq` of its group. Gains are
/// `η(ρ̄) f_hk Σ_pq A_{hk,pq}(ij)[ρ̄] f̄_pq`, losses `η(ρ̄) f_ij Σ_pq f̄_pq`.
/// Both use the zone of the state that changes, so `Σ_ij J_ij = 0` cellwise.
pub fn collision(f: &StateField, model: &InteractionModel<'_>) -> Vec<f64> {
    let grid = *f.grid();
    let nc = grid.ncells();
    let ncomp = f.components();
    let rho = total_density(f);

    // Cell-major scratch, one chunk per grid row.
    let mut scratch = vec![0.0; nc * ncomp];
    par::for_each_chunk_mut(&mut scratch, grid.nx * ncomp, |iy, row| {
        let mut work = CellWork::new(f);
        for ix in 0..grid.nx {
            let cell = grid.index(ix, iy);
            work.evaluate(f, &rho, model, cell, &mut row[ix * ncomp..(ix + 1) * ncomp]);
        }
    });

    let mut out = vec![0.0; nc * ncomp];
    for cell in 0..nc {
        for c in 0..ncomp {
            out[c * nc + cell] = scratch[cell * ncomp + c];
        }
    }
    out
}

/// Per-thread scratch buffers for one cell evaluation.
struct CellWork {
    states: usize,
    local: Vec<f64>,
    avg: Vec<f64>,
    rho_bar: Vec<f64>,
    eta: Vec<f64>,
    field_sum: Vec<f64>,
    gain: Vec<f64>,
    acc: Vec<f64>,
}

impl CellWork {
    fn new(f: &StateField) -> Self {
        let n = f.vgrid().n();
        let s = f.states();
        CellWork {
            states: s,
            local: vec![0.0; s],
            avg: vec![0.0; n * s],
            rho_bar: vec![0.0; n],
            eta: vec![0.0; n],
            field_sum: vec![0.0; n],
            gain: vec![0.0; s],
            acc: vec![0.0; s],
        }
    }

    fn evaluate(
        &mut self,
        f: &StateField,
        rho: &[f64],
        model: &InteractionModel<'_>,
        cell: usize,
        out: &mut [f64],
    ) {
        let v = f.vgrid();
        let (n, m) = (v.n(), v.m());
        let nc = f.grid().ncells();
        let states = self.states;
        let data = f.data();

        for group in 0..f.groups() {
            let params = &model.games[group];
            let theta_target = model.targets.angle(group, cell);
            let base = group * states;

            for s in 0..states {
                self.local[s] = data[(base + s) * nc + cell];
            }
            if self.local.iter().all(|&x| x == 0.0) {
                out[base..base + states].fill(0.0);
                continue;
            }

            // Zone averages per candidate heading.
            for h in 0..n {
                let avg = &mut self.avg[h * states..(h + 1) * states];
                if model.kernel.is_local() {
                    self.rho_bar[h] = rho[cell];
                    avg.copy_from_slice(&self.local);
                } else {
                    let members = model.kernel.members(cell, h);
                    let w = 1.0 / members.len() as f64;
                    let mut r = 0.0;
                    for &c in members {
                        r += rho[c];
                    }
                    self.rho_bar[h] = r * w;
                    for (s, a) in avg.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for &c in members {
                            acc += data[(base + s) * nc + c];
                        }
                        *a = acc * w;
                    }
                }
                self.eta[h] = eta_unchecked(self.rho_bar[h].max(0.0), params);
                self.field_sum[h] = avg.iter().sum();
            }

            self.gain.fill(0.0);
            for h in 0..n {
                let rho_bar = self.rho_bar[h];
                let avg = &self.avg[h * states..(h + 1) * states];
                for k in 0..m {
                    let fhk = self.local[h * m + k];
                    if fhk == 0.0 {
                        continue;
                    }
                    self.acc.fill(0.0);
                    for p in 0..n {
                        let turn =
                            turn_table_unchecked(h, v.angle(p), theta_target, rho_bar, params, v);
                        let dirs = [
                            (v.neighbor(h, false), turn.p_minus),
                            (Some(h), turn.p_stay),
                            (v.neighbor(h, true), turn.p_plus),
                        ];
                        for q in 0..m {
                            let fpq = avg[p * m + q];
                            if fpq == 0.0 {
                                continue;
                            }
                            let speed = speed_table_unchecked(k, q, rho_bar, params, m);
                            let speeds = [
                                (k.checked_sub(1), speed.p_lower),
                                (Some(k), speed.p_stay),
                                ((k + 1 < m).then_some(k + 1), speed.p_upper),
                            ];
                            for &(i, bi) in &dirs {
                                let Some(i) = i else { continue };
                                if bi == 0.0 {
                                    continue;
                                }
                                for &(j, cj) in &speeds {
                                    let Some(j) = j else { continue };
                                    if cj == 0.0 {
                                        continue;
                                    }
                                    self.acc[i * m + j] += fpq * bi * cj;
                                }
                            }
                        }
                    }
                    let w = self.eta[h] * fhk;
                    for (g, a) in self.gain.iter_mut().zip(&self.acc) {
                        if *a != 0.0 {
                            *g += w * a;
                        }
                    }
                }
            }

            for i in 0..n {
                for j in 0..m {
                    let s = i * m + j;
                    let loss = (self.local[s] * self.eta[i]) * self.field_sum[i];
                    out[base + s] = self.gain[s] - loss;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::GameMode;
    use crate::grid::{build_velocity_grid, SpeedLattice, VelocityGrid};

    #[test]
    fn moments_examples() {
        let g = Grid2D::unit_square(2, 2).unwrap();
        let v = VelocityGrid::full_circle(4, SpeedLattice::Single(1.0)).unwrap();
        let mut f = StateField::zeros(g, v, 2);
        f.set(0, 0, 0, 0, 0, 0.3);
        let mo = moments(&f);
        assert_eq!(mo.rho[0][0], 0.3);
        assert_eq!(mo.qx[0][0], 0.3);
        assert_eq!(mo.qy[0][0], 0.0);

        f.set(0, 0, 0, 1, 0, 0.2);
        f.set(0, 2, 0, 1, 0, 0.2);
        let mo = moments(&f);
        assert!((mo.rho[0][1] - 0.4).abs() < 1e-15);
        assert!(mo.qx[0][1].abs() < 1e-15);
        assert!(mo.qy[0][1].abs() < 1e-15);

        f.set(0, 1, 0, 1, 1, 0.2);
        f.set(1, 1, 0, 1, 1, 0.2);
        let mo = moments(&f);
        let c = g.index(1, 1);
        assert_eq!(mo.rho[0][c], 0.2);
        assert_eq!(mo.rho[1][c], 0.2);
        assert!((mo.rho_total[c] - 0.4).abs() < 1e-15);
        assert_eq!(total_density(&f), mo.rho_total);
    }

    #[test]
    fn target_angles() {
        let t = |x, y, tx, ty| target_angle((x, y), &Target::Point([tx, ty])).unwrap();
        assert_eq!(t(0.0, 0.0, 1.0, 0.0), 0.0);
        assert!((t(0.0, 0.0, 0.0, 1.0) - PI / 2.0).abs() < 1e-15);
        assert!((t(0.5, 0.5, 0.0, 0.5) - PI).abs() < 1e-15);
        assert!((t(0.0, 0.0, 0.0, -1.0) - 1.5 * PI).abs() < 1e-15);
        assert_eq!(
            target_angle((0.2, 0.2), &Target::Point([0.2, 0.2])),
            Err(Error::CoincidentTarget)
        );
        assert_eq!(
            target_angle((0.0, 0.0), &Target::Direction(-PI / 2.0)).unwrap(),
            1.5 * PI
        );
    }

    #[test]
    fn coincident_target_borrows_neighbour() {
        let g = Grid2D::unit_square(2, 1).unwrap();
        let tf = TargetField::new(&g, &[Target::Point([0.25, 0.5])]).unwrap();
        assert!((tf.angle(0, 0) - PI).abs() < 1e-15);
        assert!((tf.angle(0, 1) - PI).abs() < 1e-15);
    }

    fn sector(grid: &Grid2D, angles: &[f64]) -> VisibilityKernel {
        VisibilityKernel::new(
            grid,
            angles,
            VisibilityZone::Sector {
                radius: 0.26,
                half_angle: PI / 4.0,
            },
        )
    }

    #[test]
    fn local_average_is_point_value() {
        let g = Grid2D::unit_square(4, 4).unwrap();
        let k = VisibilityKernel::new(&g, &[0.0], VisibilityZone::Local);
        let field: Vec<f64> = (0..16).map(|i| i as f64).collect();
        assert_eq!(visibility_average(&field, 5, &k, 0), 5.0);
        assert_eq!(k.weights(5, 0), vec![(5, 1.0)]);
    }

    #[test]
    fn sector_weights_sum_to_one() {
        let g = Grid2D::unit_square(20, 20).unwrap();
        let angles = [0.0, PI / 2.0, PI];
        let k = sector(&g, &angles);
        for cell in [0, 45, 210, 399] {
            for h in 0..3 {
                let w: f64 = k.weights(cell, h).iter().map(|p| p.1).sum();
                assert!((w - 1.0).abs() < 1e-12);
                assert_eq!(k.weights(cell, h)[0].0, cell);
            }
        }
        let uniform = vec![0.7; 400];
        assert!((visibility_average(&uniform, 210, &k, 1) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn forward_sector_sees_larger_values_of_increasing_field() {
        let g = Grid2D::unit_square(20, 20).unwrap();
        let k = sector(&g, &[0.0]);
        let field: Vec<f64> = (0..400)
            .map(|c| g.center_unchecked(c % 20, c / 20).0)
            .collect();
        let cell = g.index(10, 10);

        // Direct quadrature over cells inside the sector.
        let (cx, cy) = g.center_unchecked(10, 10);
        let mut sum = 0.0;
        let mut count = 0usize;
        for iy in 0..20 {
            for ix in 0..20 {
                let (x, y) = g.center_unchecked(ix, iy);
                let (ddx, ddy) = (x - cx, y - cy);
                let r = (ddx * ddx + ddy * ddy).sqrt();
                let inside = r == 0.0 || (r <= 0.26 && ddy.atan2(ddx).abs() <= PI / 4.0 + 1e-12);
                if inside {
                    sum += x;
                    count += 1;
                }
            }
        }
        let oracle = sum / count as f64;
        let avg = visibility_average(&field, cell, &k, 0);
        assert!((avg - oracle).abs() < 1e-14);
        assert!(avg > field[cell]);
    }

    fn model_parts(
        grid: &Grid2D,
        v: &VelocityGrid,
        games: GameParams,
        targets: &[Target],
    ) -> (Vec<GameParams>, VisibilityKernel, TargetField) {
        (
            vec![games; 2],
            VisibilityKernel::new(grid, v.angles(), VisibilityZone::Local),
            TargetField::new(grid, targets).unwrap(),
        )
    }

    #[test]
    fn identity_games_give_zero_collision() {
        let g = Grid2D::unit_square(3, 3).unwrap();
        let v = build_velocity_grid(5, (0.0, PI), false, SpeedLattice::Uniform(3)).unwrap();
        let mut f = StateField::zeros(g, v.clone(), 2);
        for (k, x) in f.data_mut().iter_mut().enumerate() {
            *x = ((k * 37) % 11) as f64 * 0.002;
        }
        let (games, kernel, targets) =
            model_parts(&g, &v, GameParams::default(), &[Target::Direction(1.0); 2]);
        let j = collision(
            &f,
            &InteractionModel {
                games: &games,
                kernel: &kernel,
                targets: &targets,
            },
        );
        assert!(j.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_state_hand_oracle() {
        let g = Grid2D::unit_square(1, 1).unwrap();
        let v = build_velocity_grid(5, (0.0, PI / 2.0), false, SpeedLattice::Single(0.03)).unwrap();
        let c = 0.4;
        let s = 0.06;
        let mut f = StateField::zeros(g, v.clone(), 2);
        f.set(0, 1, 0, 0, 0, c);
        let params = GameParams {
            alpha: s,
            mode: GameMode::TargetOnly,
            ..GameParams::default()
        };
        let (games, kernel, targets) = model_parts(&g, &v, params, &[Target::Direction(1.2); 2]);
        let j = collision(
            &f,
            &InteractionModel {
                games: &games,
                kernel: &kernel,
                targets: &targets,
            },
        );
        let eta_c = (1.0 + c) * (-c).exp();
        let expected = eta_c * s * c * c;
        assert!((j[f.component_index(0, 2, 0)] - expected).abs() < 1e-15);
        assert!((j[f.component_index(0, 1, 0)] + expected).abs() < 1e-15);
        for (idx, &x) in j.iter().enumerate() {
            if idx != f.component_index(0, 2, 0) && idx != f.component_index(0, 1, 0) {
                assert_eq!(x, 0.0);
            }
        }
    }
}
