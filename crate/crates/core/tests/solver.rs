use std::f64::consts::PI;

use crowdkin_core::games::{GameMode, GameParams, RateModel};
use crowdkin_core::kinetics::{
    collision, InteractionModel, Target, TargetField, VisibilityKernel, VisibilityZone,
};
use crowdkin_core::scenario::{case_study_2, Scenario};
use crowdkin_core::solver::{
    advect_1d, convergence_study, react, run, step, transport, Axis, Boundary, Limiter,
    ReactionIntegrator, Simulation, Splitting, StepConfig,
};
use crowdkin_core::{build_velocity_grid, Grid2D, SpeedLattice, StateField, VelocityGrid};
use proptest::prelude::*;

fn identity_games(groups: usize) -> Vec<GameParams> {
    vec![
        GameParams {
            rate_model: RateModel::Constant,
            ..GameParams::default()
        };
        groups
    ]
}

fn blob(grid: Grid2D, v: VelocityGrid, groups: usize, centre: [f64; 2], amp: f64) -> StateField {
    let mut f = StateField::zeros(grid, v, groups);
    let states = f.states();
    let nc = grid.ncells();
    for g in 0..groups {
        for s in 0..states {
            for cell in 0..nc {
                let (x, y) = grid.cell_center(cell % grid.nx, cell / grid.nx).unwrap();
                let r2 = (x - centre[0]).powi(2) + (y - centre[1]).powi(2);
                let w =
                    amp * (-r2 / 0.01).exp() / (states * groups) as f64 * (1.0 + 0.1 * s as f64);
                f.data_mut()[(g * states + s) * nc + cell] = w;
            }
        }
    }
    f
}

#[test]
fn still_identity_state_is_unchanged() {
    let grid = Grid2D::unit_square(8, 8).unwrap();
    let v = VelocityGrid::full_circle(4, SpeedLattice::Uniform(2)).unwrap();
    let mut f = StateField::zeros(grid, v.clone(), 1);
    for cell in 0..grid.ncells() {
        for i in 0..4 {
            // speed index 0 has zero speed
            let c = f.component_index(0, i, 0);
            f.data_mut()[c * grid.ncells() + cell] = 0.01 * (1 + cell % 5) as f64;
        }
    }
    let games = identity_games(1);
    let kernel = VisibilityKernel::new(&grid, v.angles(), VisibilityZone::Local);
    let targets = TargetField::new(&grid, &[Target::Direction(1.0)]).unwrap();
    let model = InteractionModel {
        games: &games,
        kernel: &kernel,
        targets: &targets,
    };
    let cfg = StepConfig::new(0.05);
    let mut s = f.clone();
    for k in 0..5 {
        s = step(&s, &cfg, &model, k as f64 * 0.05).unwrap().state;
    }
    assert_eq!(s.data(), f.data());
}

#[test]
fn courant_one_is_an_exact_shift() {
    let grid = Grid2D::unit_square(10, 4).unwrap();
    let v = build_velocity_grid(1, (0.0, 0.0), false, SpeedLattice::Single(1.0)).unwrap();
    let mut f = StateField::zeros(grid, v.clone(), 1);
    for iy in 0..4 {
        for ix in 0..10 {
            f.data_mut()[iy * 10 + ix] = (ix * 7 + iy) as f64 * 1e-3;
        }
    }
    let games = identity_games(1);
    let kernel = VisibilityKernel::new(&grid, v.angles(), VisibilityZone::Local);
    let targets = TargetField::new(&grid, &[Target::Direction(0.0)]).unwrap();
    let model = InteractionModel {
        games: &games,
        kernel: &kernel,
        targets: &targets,
    };
    for limiter in [Limiter::None, Limiter::Minmod] {
        let cfg = StepConfig {
            limiter,
            ..StepConfig::new(0.1)
        };
        let out = step(&f, &cfg, &model, 0.0).unwrap();
        for iy in 0..4 {
            assert_eq!(out.state.data()[iy * 10], 0.0);
            for ix in 1..10 {
                assert_eq!(out.state.data()[iy * 10 + ix], f.data()[iy * 10 + ix - 1]);
            }
        }
        let lost: f64 = (0..4).map(|iy| f.data()[iy * 10 + 9]).sum::<f64>() * grid.cell_area();
        assert!((out.outflow[0].right - lost).abs() <= 1e-15);
    }
}

#[test]
fn interior_mass_is_conserved() {
    let grid = Grid2D::unit_square(40, 40).unwrap();
    let v = VelocityGrid::full_circle(8, SpeedLattice::Uniform(3)).unwrap();
    let f = blob(grid, v.clone(), 2, [0.5, 0.5], 0.4);
    let games = vec![
        GameParams {
            alpha: 0.3,
            beta: 0.2,
            eta0: 5.0,
            ..GameParams::default()
        },
        GameParams {
            alpha: 0.1,
            beta: 0.4,
            eta0: 5.0,
            ..GameParams::default()
        },
    ];
    let kernel = VisibilityKernel::new(&grid, v.angles(), VisibilityZone::Local);
    let targets =
        TargetField::new(&grid, &[Target::Point([0.0, 1.0]), Target::Direction(0.5)]).unwrap();
    let model = InteractionModel {
        games: &games,
        kernel: &kernel,
        targets: &targets,
    };
    for splitting in [Splitting::Lie, Splitting::Strang] {
        for limiter in [Limiter::None, Limiter::Minmod] {
            let cfg = StepConfig {
                limiter,
                splitting,
                ..StepConfig::new(StepConfig::cfl_dt(0.5, &grid, 1.0))
            };
            let mut s = f.clone();
            for k in 0..10 {
                let before: Vec<f64> = (0..2).map(|g| s.total_mass(g)).collect();
                let out = step(&s, &cfg, &model, k as f64 * cfg.dt).unwrap();
                for g in 0..2 {
                    let after = out.state.total_mass(g) + out.outflow[g].total();
                    assert!(
                        (after - before[g]).abs() <= 1e-12 * before[g],
                        "{splitting:?} {limiter:?}"
                    );
                }
                s = out.state;
            }
            assert!(s.min_value() >= 0.0);
        }
    }
}

#[test]
fn directional_sweeps_commute() {
    let grid = Grid2D::unit_square(20, 16).unwrap();
    let v = VelocityGrid::full_circle(6, SpeedLattice::Single(1.0)).unwrap();
    let f = blob(grid, v, 1, [0.5, 0.5], 0.3);
    let dt = StepConfig::cfl_dt(0.5, &grid, 1.0);
    let (xy, _) = transport(
        &transport(&f, Axis::X, dt, Limiter::None).unwrap().0,
        Axis::Y,
        dt,
        Limiter::None,
    )
    .unwrap();
    let (yx, _) = transport(
        &transport(&f, Axis::Y, dt, Limiter::None).unwrap().0,
        Axis::X,
        dt,
        Limiter::None,
    )
    .unwrap();
    for (a, b) in xy.data().iter().zip(yx.data()) {
        assert!((a - b).abs() <= 1e-13);
    }
}

#[test]
fn single_state_reaction_matches_hand_value() {
    // One direction, one speed, one group: nothing can change, J = 0.
    let grid = Grid2D::unit_square(2, 2).unwrap();
    let v = build_velocity_grid(1, (0.0, 0.0), false, SpeedLattice::Single(0.5)).unwrap();
    let f = StateField::from_data(grid, v.clone(), 1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let games = vec![GameParams {
        alpha: 0.5,
        beta: 0.5,
        ..GameParams::default()
    }];
    let kernel = VisibilityKernel::new(&grid, v.angles(), VisibilityZone::Local);
    let targets = TargetField::new(&grid, &[Target::Direction(1.0)]).unwrap();
    let model = InteractionModel {
        games: &games,
        kernel: &kernel,
        targets: &targets,
    };
    let r = react(&f, 0.1, &model, ReactionIntegrator::Euler, 0.0).unwrap();
    assert_eq!(r.data(), f.data());

    // Two directions {0, π/2}, target π/2, target-only switching with constant η:
    // J_0 = -η s f0 ρ... computed as f0' = f0 - dt·η·s·f0·ρ.
    let v = build_velocity_grid(2, (0.0, PI / 2.0), false, SpeedLattice::Single(0.5)).unwrap();
    let grid = Grid2D::unit_square(1, 1).unwrap();
    let (a, b) = (0.2, 0.1);
    let f = StateField::from_data(grid, v.clone(), 1, vec![a, b]).unwrap();
    let (eta0, alpha) = (2.0, 0.3);
    let games = vec![GameParams {
        alpha,
        eta0,
        mode: GameMode::TargetOnly,
        rate_model: RateModel::Constant,
        ..GameParams::default()
    }];
    let kernel = VisibilityKernel::new(&grid, v.angles(), VisibilityZone::Local);
    let targets = TargetField::new(&grid, &[Target::Direction(PI / 2.0)]).unwrap();
    let model = InteractionModel {
        games: &games,
        kernel: &kernel,
        targets: &targets,
    };
    let dt = 0.1;
    let r = react(&f, dt, &model, ReactionIntegrator::Euler, 0.0).unwrap();
    let moved = eta0 * alpha * a * (a + b);
    assert!((r.data()[0] - (a - dt * moved)).abs() <= 1e-15);
    assert!((r.data()[1] - (b + dt * moved)).abs() <= 1e-15);
    let j = collision(&f, &model);
    assert!((j[0] + moved).abs() <= 1e-15 && (j[1] - moved).abs() <= 1e-15);
}

#[test]
fn reaction_preserves_cell_mass() {
    let grid = Grid2D::unit_square(6, 6).unwrap();
    let v = VelocityGrid::full_circle(8, SpeedLattice::Uniform(3)).unwrap();
    let f = blob(grid, v.clone(), 2, [0.4, 0.6], 0.6);
    let games = vec![
        GameParams {
            alpha: 0.4,
            beta: 0.3,
            eta0: 3.0,
            ..GameParams::default()
        };
        2
    ];
    let kernel = VisibilityKernel::new(&grid, v.angles(), VisibilityZone::Local);
    let targets =
        TargetField::new(&grid, &[Target::Point([1.0, 1.0]), Target::Direction(3.0)]).unwrap();
    let model = InteractionModel {
        games: &games,
        kernel: &kernel,
        targets: &targets,
    };
    for integrator in [ReactionIntegrator::Euler, ReactionIntegrator::Midpoint] {
        let r = react(&f, 0.2, &model, integrator, 0.0).unwrap();
        let nc = grid.ncells();
        let states = f.states();
        for g in 0..2 {
            for cell in 0..nc {
                let m = |s: &StateField| {
                    (0..states)
                        .map(|c| s.data()[(g * states + c) * nc + cell])
                        .sum::<f64>()
                };
                assert!((m(&r) - m(&f)).abs() <= 1e-12 * m(&f).max(1e-300));
            }
        }
    }
}

#[test]
fn advection_orders() {
    let upwind = convergence_study(Limiter::None, &[100, 200, 400], 0.5).unwrap();
    let minmod = convergence_study(Limiter::Minmod, &[100, 200, 400], 0.5).unwrap();
    assert!(upwind.rates.iter().all(|&r| r >= 0.8), "{:?}", upwind.rates);
    assert!(minmod.rates.iter().all(|&r| r >= 1.5), "{:?}", minmod.rates);
    assert!(minmod.errors.last() < upwind.errors.last());
}

#[test]
fn periodic_advection_conserves_sum() {
    let u: Vec<f64> = (0..50).map(|k| ((k * 37) % 11) as f64).collect();
    let mut out = vec![0.0; 50];
    for c in [-0.9, -0.3, 0.4, 1.0] {
        advect_1d(&u, c, Limiter::Minmod, Boundary::Periodic, &mut out).unwrap();
        let (a, b): (f64, f64) = (u.iter().sum(), out.iter().sum());
        assert!((a - b).abs() <= 1e-12 * a);
        assert!(out.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn zero_end_time_yields_initial_frame_only() {
    let mut s = case_study_2();
    s.stepping.t_end = 0.0;
    let frames = run(&s).unwrap();
    assert_eq!(frames.len(), 1);
    assert_eq!(frames[0].step, 0);
    let f = s.initial_state().unwrap();
    assert_eq!(frames[0].groups[0].mass, f.total_mass(0));
}

#[test]
fn final_step_lands_on_end_time() {
    let mut s = case_study_2();
    s.stepping.t_end = 0.1;
    s.stepping.dt = Some(0.03);
    let mut sim = Simulation::from_scenario(&s).unwrap();
    assert_eq!(sim.total_steps(), 4);
    while !sim.is_finished() {
        sim.advance().unwrap();
    }
    assert!((sim.time() - 0.1).abs() <= 1e-15);
}

fn mirrored(s: &Scenario) -> Scenario {
    let mut m = s.clone();
    let (a0, a1) = (m.groups[0].alpha, m.groups[1].alpha);
    m.groups[0].alpha = a1;
    m.groups[1].alpha = a0;
    m
}

#[test]
fn swapping_preferences_mirrors_the_crossing() {
    let mut s = case_study_2();
    s.stepping.t_end = 2.0;
    let a = run(&s).unwrap();
    let b = run(&mirrored(&s)).unwrap();
    let (fa, fb) = (a.last().unwrap(), b.last().unwrap());
    let ca = fa.groups[1].center_of_mass.unwrap();
    let cb = fb.groups[0].center_of_mass.unwrap();
    assert!((ca[0] - (1.0 - cb[0])).abs() <= 1e-9, "{ca:?} {cb:?}");
    assert!((ca[1] - cb[1]).abs() <= 1e-9);
    assert!((fa.groups[1].mass - fb.groups[0].mass).abs() <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn admissible_runs_stay_non_negative(
        alpha in 0.0f64..=0.5, beta in 0.0f64..=0.5, amp in 0.05f64..0.9,
        cfl in 0.1f64..=1.0, minmod in any::<bool>(), strang in any::<bool>(),
        cx in 0.2f64..0.8, cy in 0.2f64..0.8,
    ) {
        let grid = Grid2D::unit_square(12, 12).unwrap();
        let v = VelocityGrid::full_circle(6, SpeedLattice::Uniform(2)).unwrap();
        let f = blob(grid, v.clone(), 2, [cx, cy], amp);
        let games = vec![GameParams { alpha, beta, eta0: 4.0, ..GameParams::default() }; 2];
        let dt = StepConfig::cfl_dt(cfl, &grid, 1.0).min(1.0 / 4.0);
        let cfg = StepConfig {
            limiter: if minmod { Limiter::Minmod } else { Limiter::None },
            splitting: if strang { Splitting::Strang } else { Splitting::Lie },
            ..StepConfig::new(dt)
        };
        let mut sim = Simulation::new(
            f, games, VisibilityZone::Local,
            &[Target::Point([1.0, 0.5]), Target::Direction(PI)], cfg, 20.0 * dt,
        ).unwrap();
        while !sim.is_finished() {
            sim.advance().unwrap();
            prop_assert!(sim.state().min_value() >= -1e-14);
        }
    }
}

#[test]
fn case_study_initial_alignment() {
    use crowdkin_core::scenario::case_study_1;
    // Equal mass in each of the five directions iπ/8 against target 0.
    let oracle = (0..5).map(|i| (i as f64 * PI / 8.0).cos()).sum::<f64>() / 5.0;
    let mut s = case_study_1();
    s.stepping.t_end = 0.0;
    let frames = run(&s).unwrap();
    let a = frames[0].groups[0].alignment.unwrap();
    assert!((a - oracle).abs() <= 1e-12, "{a} vs {oracle}");
    assert!(frames[0].groups[1].alignment.is_none());

    let mut s = case_study_2();
    s.stepping.t_end = 0.0;
    let d = &run(&s).unwrap()[0];
    for g in &d.groups {
        assert!(g.alignment.unwrap().abs() <= 1e-15);
    }
}
