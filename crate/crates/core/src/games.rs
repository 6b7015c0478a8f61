//! Interaction rate and the tables of games.
//!
//! A candidate pedestrian in state `(h, k)` meeting a field pedestrian in
//! state `(p, q)` moves to `(i, j)` with probability `B_hp(i) · C_kq(j)`,
//! where `B` acts on the direction index and `C` on the speed index.

use core::f64::consts::{PI, TAU};

use crate::grid::VelocityGrid;
use crate::{Error, Result};

/// Angles closer than this are treated as equal.
const ANGLE_TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GameMode {
    /// Target attraction weighted by `1 − ρ` plus stream following weighted by `ρ`.
    #[default]
    Full,
    /// Turning toward the target only, with probability `α·u0`.
    TargetOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RateModel {
    Constant,
    /// `η0 (1 + ρ) e^{−ρ}`.
    #[default]
    DensityDependent,
}

/// Per-group game parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GameParams {
    /// Sensitivity to target and stream.
    pub alpha: f64,
    /// Sensitivity to speed changes.
    pub beta: f64,
    /// Activity level, homogeneous over the crowd.
    pub u0: f64,
    /// Base interaction rate.
    pub eta0: f64,
    /// Density at or above which pedestrians decelerate deterministically.
    pub jam_threshold: f64,
    pub mode: GameMode,
    pub rate_model: RateModel,
}

impl Default for GameParams {
    fn default() -> Self {
        GameParams {
            alpha: 0.0,
            beta: 0.0,
            u0: 1.0,
            eta0: 1.0,
            jam_threshold: 0.8,
            mode: GameMode::Full,
            rate_model: RateModel::DensityDependent,
        }
    }
}

impl GameParams {
    /// Checks the bounds that make every table row a probability vector.
    /// Errors carry field names relative to the parameter block.
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::validation(name, "must lie in [0, 1]"))
            }
        };
        unit("alpha", self.alpha)?;
        unit("beta", self.beta)?;
        if !(self.u0 >= 0.0 && self.u0.is_finite()) {
            return Err(Error::validation("u0", "must be non-negative"));
        }
        if self.alpha * self.u0 > 0.5 {
            return Err(Error::validation("alpha", "alpha·u0 must not exceed 1/2"));
        }
        if self.beta * self.u0 > 0.5 {
            return Err(Error::validation("beta", "beta·u0 must not exceed 1/2"));
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::validation("eta0", "must be positive"));
        }
        if !(self.jam_threshold > 0.0 && self.jam_threshold <= 1.0) {
            return Err(Error::validation("jam_threshold", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Upper bound of `η` over all densities.
    pub fn eta_max(&self) -> f64 {
        // (1 + ρ) e^{−ρ} is maximal at ρ = 0.
        self.eta0
    }
}

#[inline]
fn clamp_density(rho: f64) -> f64 {
    rho.clamp(0.0, 1.0)
}

/// Interaction rate at local density `rho`. Densities above one are clamped.
pub fn eta(rho: f64, params: &GameParams) -> Result<f64> {
    if rho < 0.0 || rho.is_nan() {
        return Err(Error::NegativeDensity(rho));
    }
    Ok(eta_unchecked(rho, params))
}

#[inline]
pub(crate) fn eta_unchecked(rho: f64, params: &GameParams) -> f64 {
    match params.rate_model {
        RateModel::Constant => params.eta0,
        RateModel::DensityDependent => {
            let r = clamp_density(rho);
            params.eta0 * (1.0 + r) * libm::exp(-r)
        }
    }
}

/// Probabilities of moving to direction `h − 1`, staying at `h`, or moving to
/// `h + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurnDistribution {
    pub p_minus: f64,
    pub p_stay: f64,
    pub p_plus: f64,
}

impl TurnDistribution {
    pub const IDENTITY: TurnDistribution = TurnDistribution {
        p_minus: 0.0,
        p_stay: 1.0,
        p_plus: 0.0,
    };

    pub fn sum(&self) -> f64 {
        self.p_minus + self.p_stay + self.p_plus
    }

    /// Probability of ending in direction `i` when starting from `h`.
    pub fn prob_to(&self, h: usize, i: usize, vgrid: &VelocityGrid) -> f64 {
        let mut p = 0.0;
        if i == h {
            p += self.p_stay;
        }
        if vgrid.neighbor(h, false) == Some(i) {
            p += self.p_minus;
        }
        if vgrid.neighbor(h, true) == Some(i) {
            p += self.p_plus;
        }
        p
    }
}

/// Sign of the angular offset of `theta` relative to `reference`: `1` when
/// above, `-1` when below, `0` on a tie.
///
/// Wrapping lattices compare the signed shortest difference in `(−π, π]`;
/// non-wrapping lattices compare raw angles.
pub fn angular_order(theta: f64, reference: f64, wrap: bool) -> i8 {
    let mut d = theta - reference;
    if wrap {
        d = libm::fmod(d, TAU);
        if d > PI {
            d -= TAU;
        } else if d <= -PI {
            d += TAU;
        }
    }
    if d > ANGLE_TIE {
        1
    } else if d < -ANGLE_TIE {
        -1
    } else {
        0
    }
}

/// Direction game for a candidate heading `h` meeting a field pedestrian
/// heading `theta_field`, with the target seen at `theta_target`.
///
/// Rotations that would leave a non-wrapping lattice stay at `h`.
pub fn turn_table(
    h: usize,
    theta_field: f64,
    theta_target: f64,
    rho: f64,
    params: &GameParams,
    vgrid: &VelocityGrid,
) -> Result<TurnDistribution> {
    if h >= vgrid.n() {
        return Err(Error::IndexOutOfRange {
            what: "direction index",
            index: h,
            len: vgrid.n(),
        });
    }
    let t = turn_table_unchecked(h, theta_field, theta_target, rho, params, vgrid);
    if (t.sum() - 1.0).abs() > 1e-12
        || [t.p_minus, t.p_stay, t.p_plus]
            .iter()
            .any(|p| !(0.0..=1.0).contains(p))
    {
        return Err(Error::invalid("turn table row is not a probability vector"));
    }
    Ok(t)
}

pub(crate) fn turn_table_unchecked(
    h: usize,
    theta_field: f64,
    theta_target: f64,
    rho: f64,
    params: &GameParams,
    vgrid: &VelocityGrid,
) -> TurnDistribution {
    let s = params.alpha * params.u0;
    let theta_h = vgrid.angle(h);
    let wrap = vgrid.wrap();
    let target = angular_order(theta_target, theta_h, wrap);

    let (mut plus, mut minus) = (0.0, 0.0);
    match params.mode {
        GameMode::TargetOnly => match target {
            1 => plus += s,
            -1 => minus += s,
            _ => {}
        },
        GameMode::Full => {
            let r = clamp_density(rho);
            let toward_target = s * (1.0 - r);
            let with_stream = s * r;
            match target {
                1 => plus += toward_target,
                -1 => minus += toward_target,
                _ => {}
            }
            match angular_order(theta_field, theta_h, wrap) {
                1 => plus += with_stream,
                -1 => minus += with_stream,
                _ => {}
            }
        }
    }
    if vgrid.neighbor(h, true).is_none() {
        plus = 0.0;
    }
    if vgrid.neighbor(h, false).is_none() {
        minus = 0.0;
    }
    TurnDistribution {
        p_minus: minus,
        p_stay: 1.0 - plus - minus,
        p_plus: plus,
    }
}

/// Speed game outcome relative to the candidate speed index `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedDistribution {
    pub k: usize,
    pub p_lower: f64,
    pub p_stay: f64,
    pub p_upper: f64,
}

impl SpeedDistribution {
    pub fn sum(&self) -> f64 {
        self.p_lower + self.p_stay + self.p_upper
    }

    /// Probability of ending at speed index `j`.
    pub fn prob(&self, j: usize) -> f64 {
        if j == self.k {
            self.p_stay
        } else if j + 1 == self.k {
            self.p_lower
        } else if j == self.k + 1 {
            self.p_upper
        } else {
            0.0
        }
    }
}

/// Speed game for candidate speed `k` meeting a field pedestrian at speed `q`
/// (both zero-based).
pub fn speed_table(
    k: usize,
    q: usize,
    rho: f64,
    params: &GameParams,
    vgrid: &VelocityGrid,
) -> Result<SpeedDistribution> {
    let m = vgrid.m();
    for (what, idx) in [("speed index k", k), ("speed index q", q)] {
        if idx >= m {
            return Err(Error::IndexOutOfRange {
                what,
                index: idx,
                len: m,
            });
        }
    }
    Ok(speed_table_unchecked(k, q, rho, params, m))
}

pub(crate) fn speed_table_unchecked(
    k: usize,
    q: usize,
    rho: f64,
    params: &GameParams,
    m: usize,
) -> SpeedDistribution {
    let mut out = SpeedDistribution {
        k,
        p_lower: 0.0,
        p_stay: 1.0,
        p_upper: 0.0,
    };
    if m == 1 {
        return out;
    }
    let r = clamp_density(rho);
    if r >= params.jam_threshold {
        if k > 0 {
            out.p_lower = 1.0;
            out.p_stay = 0.0;
        }
        return out;
    }
    let w = params.beta * params.u0 * r;
    let top = m - 1;
    if k < q {
        out.p_stay = 1.0 - w;
        out.p_upper = w;
    } else if k > q {
        out.p_stay = 1.0 - w;
        out.p_lower = w;
    } else if k == 0 {
        out.p_stay = 1.0 - w;
        out.p_upper = w;
    } else if k == top {
        out.p_lower = w;
        out.p_stay = 1.0 - w;
    } else {
        out.p_lower = w;
        out.p_stay = 1.0 - 2.0 * w;
        out.p_upper = w;
    }
    out
}

/// Probability that candidate `(h, k)` meeting field `(p, q)` ends in `(i, j)`.
#[allow(clippy::too_many_arguments)]
pub fn transition_prob(
    (h, k): (usize, usize),
    (p, q): (usize, usize),
    (i, j): (usize, usize),
    theta_target: f64,
    rho: f64,
    params: &GameParams,
    vgrid: &VelocityGrid,
) -> Result<f64> {
    for (what, idx, len) in [
        ("direction index p", p, vgrid.n()),
        ("direction index i", i, vgrid.n()),
        ("speed index j", j, vgrid.m()),
    ] {
        if idx >= len {
            return Err(Error::IndexOutOfRange {
                what,
                index: idx,
                len,
            });
        }
    }
    let b = turn_table(h, vgrid.angle(p), theta_target, rho, params, vgrid)?;
    let c = speed_table(k, q, rho, params, vgrid)?;
    Ok(b.prob_to(h, i, vgrid) * c.prob(j))
}
