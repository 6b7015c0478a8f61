//! Time integration by operator splitting.
//!
//! One Lie step applies transport along `x`, then along `y`, then the local
//! interaction ODE `∂_t f = J[f]`. Strang splitting wraps the interaction step
//! in half transport steps. Transport uses a conservative flux form, either
//! first-order upwind or MUSCL with minmod slopes, with zero inflow and
//! zero-order extrapolation at outflow boundaries.

use alloc::vec;
use alloc::vec::Vec;

use crate::diagnostics::{self, Diagnostics, EdgeOutflow};
use crate::games::GameParams;
use crate::grid::{Grid2D, StateField};
use crate::kinetics::{
    collision, InteractionModel, Target, TargetField, VisibilityKernel, VisibilityZone,
};
use crate::scenario::Scenario;
use crate::{par, Error, Result};

/// Courant numbers up to `1 + COURANT_SLACK` are accepted.
const COURANT_SLACK: f64 = 1e-12;
/// Negative values produced by the reaction step down to this size are
/// rounding noise and are reset to zero.
pub const NEGATIVE_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Limiter {
    /// First-order upwind.
    #[default]
    None,
    /// Second-order MUSCL reconstruction with minmod-limited slopes.
    Minmod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Splitting {
    #[default]
    Lie,
    Strang,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ReactionIntegrator {
    #[default]
    Euler,
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Zero inflow, zero-order extrapolation at the outflow end.
    #[default]
    Open,
    Periodic,
}

/// Numerical settings of one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub limiter: Limiter,
    pub splitting: Splitting,
    pub reaction: ReactionIntegrator,
}

impl StepConfig {
    pub fn new(dt: f64) -> Self {
        StepConfig {
            dt,
            limiter: Limiter::None,
            splitting: Splitting::Lie,
            reaction: ReactionIntegrator::Euler,
        }
    }

    /// Largest stable `dt` for transport at Courant number `cfl`.
    pub fn cfl_dt(cfl: f64, grid: &Grid2D, v_max: f64) -> f64 {
        cfl * grid.dx.min(grid.dy) / v_max
    }
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a > 0.0 && b > 0.0 {
        a.min(b)
    } else if a < 0.0 && b < 0.0 {
        a.max(b)
    } else {
        0.0
    }
}

/// Amount of `Σ f` (in cell units) that left through each end of a 1D sweep.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EndFlux {
    pub low: f64,
    pub high: f64,
}

/// Advances `input` by one step of `∂_t f + a ∂_s f = 0` with signed Courant
/// number `courant = a·dt/ds`, writing into `out`.
pub fn advect_1d(
    input: &[f64],
    courant: f64,
    limiter: Limiter,
    boundary: Boundary,
    out: &mut [f64],
) -> Result<EndFlux> {
    if !(courant.abs() <= 1.0 + COURANT_SLACK) {
        return Err(Error::CflViolation { courant });
    }
    assert_eq!(input.len(), out.len());
    let n = input.len();
    if n == 0 {
        return Ok(EndFlux::default());
    }
    if courant == 0.0 {
        out.copy_from_slice(input);
        return Ok(EndFlux::default());
    }
    let c = courant.abs();
    let forward = courant > 0.0;
    // Work in upwind order: position 0 is the inflow end.
    let at = |k: usize| if forward { input[k] } else { input[n - 1 - k] };
    let ghost = |k: isize| -> f64 {
        if (0..n as isize).contains(&k) {
            at(k as usize)
        } else {
            match boundary {
                Boundary::Periodic => at(k.rem_euclid(n as isize) as usize),
                Boundary::Open if k < 0 => 0.0,
                Boundary::Open => at(n - 1),
            }
        }
    };
    let flux = |k: isize| -> f64 {
        // Flux through the downwind face of upwind-ordered cell k.
        let fk = ghost(k);
        match limiter {
            Limiter::None => fk,
            Limiter::Minmod => {
                let slope = minmod(fk - ghost(k - 1), ghost(k + 1) - fk);
                fk + 0.5 * (1.0 - c) * slope
            }
        }
    };

    let mut upstream = flux(-1);
    for k in 0..n {
        let downstream = flux(k as isize);
        let value = at(k) - c * downstream + c * upstream;
        if forward {
            out[k] = value;
        } else {
            out[n - 1 - k] = value;
        }
        upstream = downstream;
    }
    let outof = match boundary {
        Boundary::Open => c * upstream,
        Boundary::Periodic => 0.0,
    };
    Ok(if forward {
        EndFlux {
            low: 0.0,
            high: outof,
        }
    } else {
        EndFlux {
            low: outof,
            high: 0.0,
        }
    })
}

/// One upwind/MUSCL step of `∂_t f + speed ∂_x f = 0` on an open row.
pub fn advect_x(slice: &[f64], speed: f64, dt: f64, dx: f64, limiter: Limiter) -> Result<Vec<f64>> {
    let mut out = vec![0.0; slice.len()];
    advect_1d(slice, speed * dt / dx, limiter, Boundary::Open, &mut out)?;
    Ok(out)
}

/// One upwind/MUSCL step of `∂_t f + speed ∂_y f = 0` on an open column.
pub fn advect_y(
    column: &[f64],
    speed: f64,
    dt: f64,
    dy: f64,
    limiter: Limiter,
) -> Result<Vec<f64>> {
    advect_x(column, speed, dt, dy, limiter)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Transports every component of `f` along one axis over `dt`. Returns the
/// new state and the mass that left through each edge, per group.
pub fn transport(
    f: &StateField,
    axis: Axis,
    dt: f64,
    limiter: Limiter,
) -> Result<(StateField, Vec<EdgeOutflow>)> {
    let (data, outflow) = sweep(f, axis, dt, limiter)?;
    Ok((f.with_data(data), outflow))
}

fn sweep(
    f: &StateField,
    axis: Axis,
    dt: f64,
    limiter: Limiter,
) -> Result<(Vec<f64>, Vec<EdgeOutflow>)> {
    let grid = *f.grid();
    let v = f.vgrid();
    let nc = grid.ncells();
    let (nx, ny) = (grid.nx, grid.ny);
    let ncomp = f.components();

    let mut courants = Vec::with_capacity(ncomp);
    for comp in 0..ncomp {
        let (_, i, j) = f.component_parts(comp);
        let c = match axis {
            Axis::X => v.speed(j) * v.cos(i) * dt / grid.dx,
            Axis::Y => v.speed(j) * v.sin(i) * dt / grid.dy,
        };
        if !(c.abs() <= 1.0 + COURANT_SLACK) {
            return Err(Error::CflViolation { courant: c });
        }
        courants.push(c);
    }

    let input = f.data();
    let mut out = vec![0.0; input.len()];
    match axis {
        Axis::X => par::for_each_chunk_mut(&mut out, nx, |row_id, row| {
            let c = courants[row_id / ny];
            let src = &input[row_id * nx..(row_id + 1) * nx];
            advect_1d(src, c, limiter, Boundary::Open, row).expect("courant checked");
        }),
        Axis::Y => par::for_each_chunk_mut(&mut out, nc, |comp, block| {
            let c = courants[comp];
            let src = &input[comp * nc..(comp + 1) * nc];
            let mut col_in = vec![0.0; ny];
            let mut col_out = vec![0.0; ny];
            for ix in 0..nx {
                for iy in 0..ny {
                    col_in[iy] = src[iy * nx + ix];
                }
                advect_1d(&col_in, c, limiter, Boundary::Open, &mut col_out)
                    .expect("courant checked");
                for iy in 0..ny {
                    block[iy * nx + ix] = col_out[iy];
                }
            }
        }),
    }

    // Both schemes leave through the boundary cell's value (its limited
    // slope vanishes against the extrapolated ghost), so the outflow can be
    // tallied from the input in a fixed order.
    let area = grid.cell_area();
    let mut outflow = vec![EdgeOutflow::default(); f.groups()];
    for (comp, &c) in courants.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let (group, _, _) = f.component_parts(comp);
        let src = &input[comp * nc..(comp + 1) * nc];
        let e = &mut outflow[group];
        match axis {
            Axis::X => {
                let col = if c > 0.0 { nx - 1 } else { 0 };
                let mut s = 0.0;
                for iy in 0..ny {
                    s += src[iy * nx + col];
                }
                let m = c.abs() * s * area;
                if c > 0.0 {
                    e.right += m;
                } else {
                    e.left += m;
                }
            }
            Axis::Y => {
                let row = if c > 0.0 { ny - 1 } else { 0 };
                let s: f64 = src[row * nx..(row + 1) * nx].iter().sum();
                let m = c.abs() * s * area;
                if c > 0.0 {
                    e.top += m;
                } else {
                    e.bottom += m;
                }
            }
        }
    }
    Ok((out, outflow))
}

/// Checks reaction output for negative entries, resetting rounding noise.
fn enforce_positivity(f: &StateField, data: &mut [f64], time: f64) -> Result<()> {
    let nc = f.grid().ncells();
    let nx = f.grid().nx;
    for (k, v) in data.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v >= -NEGATIVE_TOLERANCE {
                *v = 0.0;
            } else {
                let (group, direction, speed) = f.component_parts(k / nc);
                let cell = k % nc;
                return Err(Error::PositivityViolation {
                    time,
                    group,
                    direction,
                    speed,
                    ix: cell % nx,
                    iy: cell / nx,
                    value: *v,
                });
            }
        }
    }
    Ok(())
}

/// Integrates `∂_t f = J[f]` over `dt` at time `time` (used in diagnostics).
pub fn react(
    f: &StateField,
    dt: f64,
    model: &InteractionModel<'_>,
    integrator: ReactionIntegrator,
    time: f64,
) -> Result<StateField> {
    let j0 = collision(f, model);
    let mut data: Vec<f64> = match integrator {
        ReactionIntegrator::Euler => f.data().iter().zip(&j0).map(|(x, j)| x + dt * j).collect(),
        ReactionIntegrator::Midpoint => {
            let mut half: Vec<f64> = f
                .data()
                .iter()
                .zip(&j0)
                .map(|(x, j)| x + 0.5 * dt * j)
                .collect();
            enforce_positivity(f, &mut half, time)?;
            let j1 = collision(&f.with_data(half), model);
            f.data().iter().zip(&j1).map(|(x, j)| x + dt * j).collect()
        }
    };
    enforce_positivity(f, &mut data, time)?;
    Ok(f.with_data(data))
}

/// Result of a split step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: StateField,
    /// Mass that left the domain during the step, per group.
    pub outflow: Vec<EdgeOutflow>,
}

fn add_outflow(total: &mut [EdgeOutflow], part: &[EdgeOutflow]) {
    for (t, p) in total.iter_mut().zip(part) {
        t.left += p.left;
        t.right += p.right;
        t.bottom += p.bottom;
        t.top += p.top;
    }
}

/// Advances `f` from `time` by `cfg.dt`.
pub fn step(
    f: &StateField,
    cfg: &StepConfig,
    model: &InteractionModel<'_>,
    time: f64,
) -> Result<StepOutput> {
    let dt = cfg.dt;
    let mut outflow = vec![EdgeOutflow::default(); f.groups()];
    let mut transport = |state: &StateField, axis: Axis, tau: f64| -> Result<StateField> {
        let (data, out) = sweep(state, axis, tau, cfg.limiter)?;
        add_outflow(&mut outflow, &out);
        Ok(state.with_data(data))
    };
    let state = match cfg.splitting {
        Splitting::Lie => {
            let s = transport(f, Axis::X, dt)?;
            let s = transport(&s, Axis::Y, dt)?;
            react(&s, dt, model, cfg.reaction, time)?
        }
        Splitting::Strang => {
            let half = 0.5 * dt;
            let s = transport(f, Axis::X, half)?;
            let s = transport(&s, Axis::Y, half)?;
            let s = react(&s, dt, model, cfg.reaction, time)?;
            let s = transport(&s, Axis::Y, half)?;
            transport(&s, Axis::X, half)?
        }
    };
    Ok(StepOutput { state, outflow })
}

/// A running simulation: state, model and accumulated boundary outflow.
#[derive(Debug, Clone)]
pub struct Simulation {
    state: StateField,
    games: Vec<GameParams>,
    kernel: VisibilityKernel,
    targets: TargetField,
    cfg: StepConfig,
    t_end: f64,
    total_steps: usize,
    steps: usize,
    time: f64,
    outflow: Vec<EdgeOutflow>,
}

impl Simulation {
    pub fn new(
        state: StateField,
        games: Vec<GameParams>,
        zone: VisibilityZone,
        targets: &[Target],
        cfg: StepConfig,
        t_end: f64,
    ) -> Result<Self> {
        if games.len() != state.groups() || targets.len() != state.groups() {
            return Err(Error::invalid(
                "one game parameter set and target per group required",
            ));
        }
        if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
            return Err(Error::invalid("time step must be positive"));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::invalid("end time must be non-negative"));
        }
        let kernel = VisibilityKernel::new(state.grid(), state.vgrid().angles(), zone);
        let targets = TargetField::new(state.grid(), targets)?;
        let ratio = t_end / cfg.dt;
        let total_steps = if ratio - libm::round(ratio) <= 1e-9 * ratio.max(1.0) {
            libm::round(ratio) as usize
        } else {
            libm::ceil(ratio) as usize
        };
        let groups = state.groups();
        Ok(Simulation {
            state,
            games,
            kernel,
            targets,
            cfg,
            t_end,
            total_steps,
            steps: 0,
            time: 0.0,
            outflow: vec![EdgeOutflow::default(); groups],
        })
    }

    pub fn from_scenario(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let state = scenario.initial_state()?;
        let cfg = scenario.step_config(state.grid(), state.vgrid());
        Simulation::new(
            state,
            scenario.game_params(),
            scenario.visibility,
            &scenario.targets(),
            cfg,
            scenario.stepping.t_end,
        )
    }

    pub fn state(&self) -> &StateField {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn is_finished(&self) -> bool {
        self.steps >= self.total_steps
    }

    pub fn config(&self) -> &StepConfig {
        &self.cfg
    }

    pub fn targets(&self) -> &TargetField {
        &self.targets
    }

    /// Cumulative mass that left through each edge, per group.
    pub fn outflow(&self) -> &[EdgeOutflow] {
        &self.outflow
    }

    pub fn model(&self) -> InteractionModel<'_> {
        InteractionModel {
            games: &self.games,
            kernel: &self.kernel,
            targets: &self.targets,
        }
    }

    /// Takes one step; the final step is shortened to land on `t_end`.
    pub fn advance(&mut self) -> Result<()> {
        if self.is_finished() {
            return Ok(());
        }
        let next = if self.steps + 1 == self.total_steps {
            self.t_end
        } else {
            (self.steps + 1) as f64 * self.cfg.dt
        };
        let cfg = StepConfig {
            dt: next - self.time,
            ..self.cfg
        };
        let out = step(&self.state, &cfg, &self.model(), self.time)?;
        self.state = out.state;
        add_outflow(&mut self.outflow, &out.outflow);
        self.steps += 1;
        self.time = next;
        Ok(())
    }

    pub fn diagnostics(&self, contour_threshold: f64) -> Diagnostics {
        diagnostics::compute(
            &self.state,
            &self.targets,
            &self.outflow,
            self.time,
            self.steps,
            contour_threshold,
        )
    }
}

/// Runs a scenario to its end time, handing each output frame to `observer`.
pub fn run_with<E, F>(
    scenario: &Scenario,
    mut observer: F,
) -> core::result::Result<Vec<Diagnostics>, E>
where
    E: From<Error>,
    F: FnMut(&Simulation, &Diagnostics) -> core::result::Result<(), E>,
{
    let mut sim = Simulation::from_scenario(scenario)?;
    let stride = scenario.output.stride.max(1);
    let threshold = scenario.output.contour_threshold;
    let mut frames = Vec::new();
    loop {
        if sim.steps_taken().is_multiple_of(stride) || sim.is_finished() {
            let d = sim.diagnostics(threshold);
            observer(&sim, &d)?;
            frames.push(d);
        }
        if sim.is_finished() {
            break;
        }
        sim.advance()?;
    }
    Ok(frames)
}

/// Runs a scenario and returns its diagnostic frames.
pub fn run(scenario: &Scenario) -> Result<Vec<Diagnostics>> {
    run_with(scenario, |_, _| Ok::<(), Error>(()))
}

/// L¹ errors and observed orders for one periodic advection study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub limiter: Limiter,
    pub cells: Vec<usize>,
    pub errors: Vec<f64>,
    /// `log2(e_k / e_{k+1})` for consecutive refinements.
    pub rates: Vec<f64>,
}

/// Smooth profile used by the convergence study.
pub fn convergence_profile(x: f64) -> f64 {
    let s = 0.1;
    libm::exp(-(x - 0.5) * (x - 0.5) / (2.0 * s * s))
}

/// Advects [`convergence_profile`] once around the periodic unit interval at
/// Courant number `courant` on each grid and reports L¹ errors and orders.
pub fn convergence_study(
    limiter: Limiter,
    cells: &[usize],
    courant: f64,
) -> Result<ConvergenceStudy> {
    let mut errors = Vec::with_capacity(cells.len());
    for &n in cells {
        let dx = 1.0 / n as f64;
        let steps = libm::round(n as f64 / courant) as usize;
        let c = n as f64 / steps as f64;
        let exact: Vec<f64> = (0..n)
            .map(|k| convergence_profile((k as f64 + 0.5) * dx))
            .collect();
        let mut u = exact.clone();
        let mut next = vec![0.0; n];
        for _ in 0..steps {
            advect_1d(&u, c, limiter, Boundary::Periodic, &mut next)?;
            core::mem::swap(&mut u, &mut next);
        }
        let err: f64 = u
            .iter()
            .zip(&exact)
            .map(|(a, b)| libm::fabs(a - b))
            .sum::<f64>()
            * dx;
        errors.push(err);
    }
    let rates = errors.windows(2).map(|w| libm::log2(w[0] / w[1])).collect();
    Ok(ConvergenceStudy {
        limiter,
        cells: cells.to_vec(),
        errors,
        rates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_speed_is_identity() {
        let f = [0.1, 0.5, 0.2];
        assert_eq!(advect_x(&f, 0.0, 0.1, 0.1, Limiter::None).unwrap(), f);
        assert_eq!(advect_y(&f, 0.0, 0.1, 0.1, Limiter::Minmod).unwrap(), f);
    }

    #[test]
    fn unit_courant_shifts_exactly() {
        let f = [0.3, 0.1, 0.7, 0.2, 0.0];
        for lim in [Limiter::None, Limiter::Minmod] {
            let g = advect_x(&f, 1.0, 0.1, 0.1, lim).unwrap();
            assert_eq!(g, vec![0.0, 0.3, 0.1, 0.7, 0.2]);
            let g = advect_x(&f, -1.0, 0.1, 0.1, lim).unwrap();
            assert_eq!(g, vec![0.1, 0.7, 0.2, 0.0, 0.0]);
        }
    }

    #[test]
    fn half_courant_pulse() {
        let f = [0.0, 1.0, 0.0, 0.0];
        let g = advect_x(&f, 0.5, 1.0, 1.0, Limiter::None).unwrap();
        assert_eq!(g, vec![0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn cfl_violation() {
        assert!(matches!(
            advect_x(&[1.0, 0.0], 2.0, 1.0, 1.0, Limiter::None),
            Err(Error::CflViolation { .. })
        ));
    }

    #[test]
    fn interior_mass_conserved_and_outflow_accounted() {
        let f = [0.0, 0.2, 0.9, 0.4, 0.1, 0.0, 0.0];
        for lim in [Limiter::None, Limiter::Minmod] {
            let mut out = [0.0; 7];
            let e = advect_1d(&f, 0.6, lim, Boundary::Open, &mut out).unwrap();
            assert_eq!(e.high, 0.0);
            assert!((out.iter().sum::<f64>() - f.iter().sum::<f64>()).abs() < 1e-15);

            let g = [0.0, 0.0, 0.3, 0.5, 0.8];
            let e = advect_1d(&g, 0.6, lim, Boundary::Open, &mut out[..5]).unwrap();
            let after: f64 = out[..5].iter().sum();
            assert!((after + e.high - 1.6).abs() < 1e-15);
            assert!((e.high - 0.6 * 0.8).abs() < 1e-15);
        }
    }

    #[test]
    fn negative_speed_leaves_through_low_end() {
        let f = [0.5, 0.2, 0.0];
        let mut out = [0.0; 3];
        let e = advect_1d(&f, -0.4, Limiter::None, Boundary::Open, &mut out).unwrap();
        assert!((e.low - 0.2).abs() < 1e-15);
        assert_eq!(e.high, 0.0);
        assert!((out.iter().sum::<f64>() + e.low - 0.7).abs() < 1e-15);
    }

    #[test]
    fn minmod_stays_non_negative() {
        let f = [0.0, 0.0, 1.0, 1.0, 0.0, 0.3, 0.0, 0.0];
        let mut u = f.to_vec();
        let mut v = vec![0.0; f.len()];
        for _ in 0..5 {
            advect_1d(&u, 0.7, Limiter::Minmod, Boundary::Periodic, &mut v).unwrap();
            core::mem::swap(&mut u, &mut v);
            assert!(u.iter().all(|&x| (0.0..=1.0 + 1e-15).contains(&x)));
        }
    }

    #[test]
    fn periodic_sweep_conserves_exactly_at_rounding() {
        let mut u: Vec<f64> = (0..50)
            .map(|k| convergence_profile(k as f64 / 50.0))
            .collect();
        let total: f64 = u.iter().sum();
        let mut v = vec![0.0; 50];
        for _ in 0..40 {
            advect_1d(&u, -0.37, Limiter::Minmod, Boundary::Periodic, &mut v).unwrap();
            core::mem::swap(&mut u, &mut v);
        }
        assert!((u.iter().sum::<f64>() - total).abs() < 1e-12);
    }
}
