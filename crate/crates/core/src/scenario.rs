//! Scenario description, validation and the two built-in case studies.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use crate::games::{GameMode, GameParams, RateModel};
use crate::grid::{build_velocity_grid, Grid2D, SpeedLattice, StateField, VelocityGrid};
use crate::kinetics::{total_density, Target, VisibilityZone};
use crate::solver::{Limiter, ReactionIntegrator, Splitting, StepConfig};
use crate::{Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

fn default_origin() -> [f64; 2] {
    [0.0, 0.0]
}

fn default_extent() -> [f64; 2] {
    [1.0, 1.0]
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    #[cfg_attr(feature = "serde", serde(default = "default_origin"))]
    pub origin: [f64; 2],
    #[cfg_attr(feature = "serde", serde(default = "default_extent"))]
    pub extent: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct VelocitySpec {
    pub directions: usize,
    /// Inclusive angle range; `None` means the full circle with wrapping.
    #[cfg_attr(feature = "serde", serde(default))]
    pub span: Option<[f64; 2]>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub wrap: bool,
    pub speeds: SpeedLattice,
}

/// Spatial support of an initial patch.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Region {
    /// Disk of the given radius. The `gaussian` profile is
    /// `exp(−4.5 r²/R²)` cut off at `R`.
    Disk {
        center: [f64; 2],
        radius: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        profile: Profile,
    },
    /// Axis-aligned rectangle with a flat profile.
    Rect { min: [f64; 2], max: [f64; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Profile {
    #[default]
    Flat,
    Gaussian,
}

impl Region {
    /// Shape factor in `[0, 1]` at `p`.
    pub fn weight(&self, p: (f64, f64)) -> f64 {
        match *self {
            Region::Disk {
                center,
                radius,
                profile,
            } => {
                let r2 =
                    (p.0 - center[0]) * (p.0 - center[0]) + (p.1 - center[1]) * (p.1 - center[1]);
                if r2 > radius * radius {
                    0.0
                } else {
                    match profile {
                        Profile::Flat => 1.0,
                        Profile::Gaussian => libm::exp(-4.5 * r2 / (radius * radius)),
                    }
                }
            }
            Region::Rect { min, max } => {
                if p.0 >= min[0] && p.0 <= max[0] && p.1 >= min[1] && p.1 <= max[1] {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Density placed in one velocity state over a region.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct InitialPatch {
    pub region: Region,
    pub direction: usize,
    pub speed: usize,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct GroupSpec {
    #[cfg_attr(feature = "serde", serde(default))]
    pub name: String,
    pub alpha: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub beta: f64,
    #[cfg_attr(feature = "serde", serde(default = "one"))]
    pub u0: f64,
    #[cfg_attr(feature = "serde", serde(default = "one"))]
    pub eta0: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_jam"))]
    pub jam_threshold: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub mode: GameMode,
    #[cfg_attr(feature = "serde", serde(default))]
    pub rate_model: RateModel,
    pub target: Target,
    #[cfg_attr(feature = "serde", serde(default))]
    pub initial: Vec<InitialPatch>,
}

#[cfg(feature = "serde")]
fn one() -> f64 {
    1.0
}

#[cfg(feature = "serde")]
fn default_jam() -> f64 {
    0.8
}

impl GroupSpec {
    pub fn params(&self) -> GameParams {
        GameParams {
            alpha: self.alpha,
            beta: self.beta,
            u0: self.u0,
            eta0: self.eta0,
            jam_threshold: self.jam_threshold,
            mode: self.mode,
            rate_model: self.rate_model,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SteppingSpec {
    /// Explicit time step; derived from `cfl` when absent.
    #[cfg_attr(feature = "serde", serde(default))]
    pub dt: Option<f64>,
    pub cfl: f64,
    pub t_end: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub limiter: Limiter,
    #[cfg_attr(feature = "serde", serde(default))]
    pub splitting: Splitting,
    #[cfg_attr(feature = "serde", serde(default))]
    pub reaction: ReactionIntegrator,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct OutputSpec {
    /// Steps between frames.
    pub stride: usize,
    /// Density mapped to white in heatmaps.
    pub rho_display_max: f64,
    pub contour_threshold: f64,
    /// Also write one column per velocity state in the CSV files.
    #[cfg_attr(feature = "serde", serde(default))]
    pub full_state: bool,
}

/// Everything needed to run one simulation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Scenario {
    #[cfg_attr(feature = "serde", serde(default))]
    pub name: String,
    pub grid: GridSpec,
    pub velocity: VelocitySpec,
    pub groups: Vec<GroupSpec>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub visibility: VisibilityZone,
    pub stepping: SteppingSpec,
    pub output: OutputSpec,
}

fn at(path: &str, e: Error) -> Error {
    match e {
        Error::Validation { path: sub, message } => {
            Error::validation(format!("{path}.{sub}"), message)
        }
        Error::InvalidArgument(message) => Error::validation(path, message),
        other => other,
    }
}

impl Scenario {
    pub fn build_grid(&self) -> Result<Grid2D> {
        let g = &self.grid;
        Grid2D::new(
            g.nx,
            g.ny,
            (g.origin[0], g.origin[1]),
            (g.extent[0], g.extent[1]),
        )
        .map_err(|e| at("grid", e))
    }

    pub fn build_velocity_grid(&self) -> Result<VelocityGrid> {
        let v = &self.velocity;
        match v.span {
            Some([lo, hi]) => build_velocity_grid(v.directions, (lo, hi), v.wrap, v.speeds),
            None => VelocityGrid::full_circle(v.directions, v.speeds),
        }
        .map_err(|e| at("velocity", e))
    }

    pub fn game_params(&self) -> Vec<GameParams> {
        self.groups.iter().map(GroupSpec::params).collect()
    }

    pub fn targets(&self) -> Vec<Target> {
        self.groups.iter().map(|g| g.target).collect()
    }

    /// Time step actually used: the explicit `dt`, or the CFL-limited one.
    pub fn dt(&self, grid: &Grid2D, vgrid: &VelocityGrid) -> f64 {
        self.stepping
            .dt
            .unwrap_or_else(|| StepConfig::cfl_dt(self.stepping.cfl, grid, vgrid.max_speed()))
    }

    pub fn step_config(&self, grid: &Grid2D, vgrid: &VelocityGrid) -> StepConfig {
        StepConfig {
            dt: self.dt(grid, vgrid),
            limiter: self.stepping.limiter,
            splitting: self.stepping.splitting,
            reaction: self.stepping.reaction,
        }
    }

    /// Samples the initial patches at cell centres.
    pub fn initial_state(&self) -> Result<StateField> {
        let grid = self.build_grid()?;
        let vgrid = self.build_velocity_grid()?;
        let mut f = StateField::zeros(grid, vgrid, self.groups.len());
        for (g, group) in self.groups.iter().enumerate() {
            for (k, patch) in group.initial.iter().enumerate() {
                let path = format!("groups[{g}].initial[{k}]");
                if patch.direction >= f.vgrid().n() {
                    return Err(Error::validation(
                        format!("{path}.direction"),
                        "direction index out of range",
                    ));
                }
                if patch.speed >= f.vgrid().m() {
                    return Err(Error::validation(
                        format!("{path}.speed"),
                        "speed index out of range",
                    ));
                }
                if !(patch.density >= 0.0 && patch.density.is_finite()) {
                    return Err(Error::validation(
                        format!("{path}.density"),
                        "must be non-negative",
                    ));
                }
                if let Region::Disk { radius, .. } = patch.region {
                    if !(radius > 0.0) {
                        return Err(Error::validation(
                            format!("{path}.region.radius"),
                            "must be positive",
                        ));
                    }
                }
                for iy in 0..grid.ny {
                    for ix in 0..grid.nx {
                        let w = patch.region.weight(grid.center_unchecked(ix, iy));
                        if w > 0.0 {
                            let old = f.get(g, patch.direction, patch.speed, ix, iy);
                            f.set(
                                g,
                                patch.direction,
                                patch.speed,
                                ix,
                                iy,
                                old + patch.density * w,
                            );
                        }
                    }
                }
            }
        }
        Ok(f)
    }

    /// Checks every parameter bound; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        let grid = self.build_grid()?;
        let vgrid = self.build_velocity_grid()?;
        if self.groups.is_empty() {
            return Err(Error::validation(
                "groups",
                "at least one group is required",
            ));
        }
        for (g, group) in self.groups.iter().enumerate() {
            let path = format!("groups[{g}]");
            group.params().validate().map_err(|e| at(&path, e))?;
            if let Target::Direction(a) = group.target {
                if !a.is_finite() {
                    return Err(Error::validation(
                        format!("{path}.target"),
                        "must be finite",
                    ));
                }
            }
        }
        self.visibility
            .validate()
            .map_err(|e| at("visibility", e))?;

        let s = &self.stepping;
        if !(s.cfl > 0.0 && s.cfl <= 1.0) {
            return Err(Error::validation("stepping.cfl", "must lie in (0, 1]"));
        }
        if !(s.t_end >= 0.0 && s.t_end.is_finite()) {
            return Err(Error::validation("stepping.t_end", "must be non-negative"));
        }
        let dt = self.dt(&grid, &vgrid);
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::validation("stepping.dt", "must be positive"));
        }
        let cfl_dt = StepConfig::cfl_dt(s.cfl, &grid, vgrid.max_speed());
        if dt > cfl_dt * (1.0 + 1e-12) {
            return Err(Error::validation(
                "stepping.dt",
                format!("exceeds the CFL limit {cfl_dt}"),
            ));
        }
        let eta_max = self
            .game_params()
            .iter()
            .map(GameParams::eta_max)
            .fold(0.0, f64::max);
        if dt * eta_max > 1.0 {
            return Err(Error::validation(
                "stepping.dt",
                "dt·η_max·ρ_max must not exceed 1 for the interaction step",
            ));
        }

        let o = &self.output;
        if o.stride == 0 {
            return Err(Error::validation("output.stride", "must be positive"));
        }
        if !(o.rho_display_max > 0.0) {
            return Err(Error::validation(
                "output.rho_display_max",
                "must be positive",
            ));
        }
        if !(o.contour_threshold > 0.0) {
            return Err(Error::validation(
                "output.contour_threshold",
                "must be positive",
            ));
        }

        let f = self.initial_state()?;
        let rho = total_density(&f);
        if let Some((cell, r)) = rho.iter().enumerate().find(|(_, &r)| r > 1.0 + 1e-12) {
            return Err(Error::validation(
                "groups",
                format!(
                    "initial total density {r} exceeds 1 at cell ({}, {})",
                    cell % grid.nx,
                    cell / grid.nx
                ),
            ));
        }
        Ok(())
    }
}

/// Interaction rate shared by the case studies.
pub const CASE_STUDY_ETA0: f64 = 20.0;

fn blob(center: [f64; 2], direction: usize, density: f64) -> InitialPatch {
    InitialPatch {
        region: Region::Disk {
            center,
            radius: 0.15,
            profile: Profile::Gaussian,
        },
        direction,
        speed: 0,
        density,
    }
}

fn case_group(name: &str, alpha: f64, target: f64, initial: Vec<InitialPatch>) -> GroupSpec {
    GroupSpec {
        name: name.to_string(),
        alpha,
        beta: 0.0,
        u0: 1.0,
        eta0: CASE_STUDY_ETA0,
        jam_threshold: 0.8,
        mode: GameMode::TargetOnly,
        rate_model: RateModel::DensityDependent,
        target: Target::Direction(target),
        initial,
    }
}

/// A crowd in the bottom-left corner of the unit room, split evenly over the
/// headings `iπ/8`, `i = 0..4`, re-aligning toward an exit along `+x`.
pub fn case_study_1() -> Scenario {
    let initial = (0..5).map(|i| blob([0.15, 0.15], i, 0.1)).collect();
    Scenario {
        name: "case1".to_string(),
        grid: GridSpec {
            nx: 100,
            ny: 100,
            origin: default_origin(),
            extent: default_extent(),
        },
        velocity: VelocitySpec {
            directions: 5,
            span: Some([0.0, FRAC_PI_2]),
            wrap: false,
            speeds: SpeedLattice::Single(0.03),
        },
        groups: vec![
            case_group("G1", 0.06, 0.0, initial),
            case_group("G2", 0.06, 0.0, Vec::new()),
        ],
        visibility: VisibilityZone::Local,
        stepping: SteppingSpec {
            dt: Some(0.04),
            cfl: 0.5,
            t_end: 8.0,
            limiter: Limiter::None,
            splitting: Splitting::Lie,
            reaction: ReactionIntegrator::Euler,
        },
        output: OutputSpec {
            stride: 20,
            rho_display_max: 0.5,
            contour_threshold: 0.05,
            full_state: false,
        },
    }
}

/// Two crowds facing each other across the unit room (G1 heading `0`, G2
/// heading `π`) with headings `iπ/4`, both turning toward an exit at `π/2`.
/// G1 reacts with probability 0.2, G2 with 0.1.
pub fn case_study_2() -> Scenario {
    Scenario {
        name: "case2".to_string(),
        grid: GridSpec {
            nx: 100,
            ny: 100,
            origin: default_origin(),
            extent: default_extent(),
        },
        velocity: VelocitySpec {
            directions: 5,
            span: Some([0.0, PI]),
            wrap: false,
            speeds: SpeedLattice::Single(0.03),
        },
        groups: vec![
            case_group("G1", 0.2, FRAC_PI_2, vec![blob([0.2, 0.5], 0, 0.5)]),
            case_group("G2", 0.1, FRAC_PI_2, vec![blob([0.8, 0.5], 4, 0.5)]),
        ],
        visibility: VisibilityZone::Local,
        stepping: SteppingSpec {
            dt: Some(0.04),
            cfl: 0.5,
            t_end: 24.0,
            limiter: Limiter::None,
            splitting: Splitting::Lie,
            reaction: ReactionIntegrator::Euler,
        },
        output: OutputSpec {
            stride: 20,
            rho_display_max: 1.0,
            contour_threshold: 0.05,
            full_state: false,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn built_ins_validate() {
        case_study_1().validate().unwrap();
        case_study_2().validate().unwrap();
    }

    #[test]
    fn case1_parameters() {
        let s = case_study_1();
        assert_eq!(s.velocity.speeds, SpeedLattice::Single(0.03));
        assert_eq!(s.groups[0].alpha, 0.06);
        let v = s.build_velocity_grid().unwrap();
        for i in 0..5 {
            assert!((v.angle(i) - i as f64 * PI / 8.0).abs() < 1e-15);
        }
    }

    #[test]
    fn case2_parameters() {
        let s = case_study_2();
        assert_eq!(s.groups[0].alpha, 0.2);
        assert_eq!(s.groups[1].alpha, 0.1);
        let v = s.build_velocity_grid().unwrap();
        for i in 0..5 {
            assert!((v.angle(i) - i as f64 * PI / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn alpha_bound_reports_field_path() {
        let mut s = case_study_1();
        s.groups[0].alpha = 0.9;
        match s.validate() {
            Err(Error::Validation { path, .. }) => assert_eq!(path, "groups[0].alpha"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overfull_initial_density_rejected() {
        let mut s = case_study_2();
        s.groups[1].initial[0].region = Region::Disk {
            center: [0.2, 0.5],
            radius: 0.15,
            profile: Profile::Gaussian,
        };
        s.groups[1].initial[0].density = 0.6;
        assert!(matches!(s.validate(), Err(Error::Validation { path, .. }) if path == "groups"));
    }

    #[test]
    fn stepping_bounds() {
        let mut s = case_study_1();
        s.stepping.dt = Some(0.2);
        assert!(
            matches!(s.validate(), Err(Error::Validation { path, .. }) if path == "stepping.dt")
        );
        s.stepping.dt = None;
        s.stepping.cfl = 1.5;
        assert!(
            matches!(s.validate(), Err(Error::Validation { path, .. }) if path == "stepping.cfl")
        );
        let mut s = case_study_1();
        s.groups[0].eta0 = 40.0;
        assert!(
            matches!(s.validate(), Err(Error::Validation { path, .. }) if path == "stepping.dt")
        );
    }

    #[test]
    fn patch_index_errors() {
        let mut s = case_study_1();
        s.groups[0].initial[0].direction = 7;
        assert!(
            matches!(s.validate(), Err(Error::Validation { path, .. }) if path == "groups[0].initial[0].direction")
        );
    }
}
