//! Stationary stars: the dimensionless Lane-Emden problem and its
//! dimensional counterpart for a general equation of state.
//!
//! A star with central density `mu` solves `Δy = -c_n rho` with
//! `rho = (Φ')^{-1}(y_+)` and `y(0) = Φ'(mu)`, where `c_n` is the Poisson
//! coupling of the dimension. The support radius is the first zero of `y`.

use std::sync::Arc;

use crate::eos::{EosError, EosSpec, PolytropicEos};
use crate::geometry::poisson_coupling;
use crate::numeric::ode::{Dopri5, OdeError};
use crate::profile::{surface_clustered_grid, ProfileError, RadialProfile};
use crate::{GaussRule, Integrator, Trajectory2};

/// Number of intervals of the grid carried by a [`StarSolution`].
pub const STAR_GRID_INTERVALS: usize = 16384;
/// Integration horizon for indices without a finite first zero.
pub const DIMENSIONLESS_HORIZON: f64 = 1e4;
const SERIES_START: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LaneEmdenError {
    #[error("Lane-Emden index must be finite and nonnegative, got {0}")]
    InvalidIndex(f64),
    #[error("central density must be positive, got {0}")]
    InvalidCentralDensity(f64),
    #[error("dimension must be at least 3, got {0}")]
    InvalidDimension(usize),
    #[error("no zero of the structure function before r = {horizon}")]
    UnboundedSupport { horizon: f64 },
    #[error(transparent)]
    Eos(#[from] EosError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

fn dimensionless_integrator() -> Integrator {
    Dopri5 {
        rtol: 1e-13,
        atol: 1e-15,
        event_tol: 1e-14,
        ..Default::default()
    }
}

/// Series start `θ = 1 - s²/6 + q s⁴/120 - q(8q - 5) s⁶/15120`.
fn series_start(q: f64, s: f64) -> [f64; 2] {
    let s2 = s * s;
    let theta = 1.0 - s2 / 6.0 + q * s2 * s2 / 120.0 - q * (8.0 * q - 5.0) * s2 * s2 * s2 / 15120.0;
    let dtheta = -s / 3.0 + q * s2 * s / 30.0 - q * (8.0 * q - 5.0) * s2 * s2 * s / 2520.0;
    [theta, dtheta]
}

fn lane_emden_rhs(q: f64) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] {
    move |s, y| {
        let src = if y[0] > 0.0 { y[0].powf(q) } else { 0.0 };
        [y[1], -src - 2.0 * y[1] / s]
    }
}

/// Solution of `θ'' + (2/s) θ' + θ_+^q = 0`, `θ(0) = 1`, `θ'(0) = 0`.
#[derive(Debug, Clone)]
pub struct DimensionlessSolution {
    pub index: f64,
    /// First zero `s_1`, absent when none occurs before the horizon.
    pub first_zero: Option<f64>,
    /// `-s_1² θ'(s_1)`.
    pub slope_integral: Option<f64>,
    pub trajectory: Trajectory2,
}

impl DimensionlessSolution {
    /// `θ(s)` on the integrated range; zero past the first zero.
    pub fn theta(&self, s: f64) -> f64 {
        if s < SERIES_START {
            return series_start(self.index, s)[0];
        }
        if let Some(s1) = self.first_zero {
            if s >= s1 {
                return 0.0;
            }
        }
        self.trajectory.eval(s)[0]
    }

    pub fn theta_derivative(&self, s: f64) -> f64 {
        if s < SERIES_START {
            return series_start(self.index, s)[1];
        }
        self.trajectory.eval(s.min(self.trajectory.t_end))[1]
    }

    /// `θ` sampled at `count` equally spaced points on `[0, s_1]` (or the horizon).
    pub fn samples(&self, count: usize) -> Vec<(f64, f64)> {
        let end = self.first_zero.unwrap_or(self.trajectory.t_end);
        (0..count)
            .map(|i| {
                let s = end * i as f64 / (count - 1) as f64;
                (s, self.theta(s))
            })
            .collect()
    }

    /// `∫_0^{s_1} θ^q s² ds` by Gauss-Legendre on the dense output; equals the
    /// slope integral for an exact solution.
    pub fn mass_integral_quadrature(&self) -> Option<f64> {
        let s1 = self.first_zero?;
        let rule = GaussRule::new(20);
        let pieces = 400;
        let mut acc = 0.0;
        for i in 0..pieces {
            let a = s1 * i as f64 / pieces as f64;
            let b = s1 * (i + 1) as f64 / pieces as f64;
            acc += rule.integrate(a, b, |s| self.theta(s).max(0.0).powf(self.index) * s * s);
        }
        Some(acc)
    }
}

fn check_index(q: f64) -> Result<(), LaneEmdenError> {
    if !(q.is_finite() && q >= 0.0) {
        return Err(LaneEmdenError::InvalidIndex(q));
    }
    Ok(())
}

/// Adaptive solve of the dimensionless problem of index `q`.
pub fn solve_dimensionless(q: f64) -> Result<DimensionlessSolution, LaneEmdenError> {
    check_index(q)?;
    let sol = dimensionless_integrator().integrate(
        lane_emden_rhs(q),
        SERIES_START,
        series_start(q, SERIES_START),
        DIMENSIONLESS_HORIZON,
        Some(|_s: f64, y: &[f64; 2]| y[0]),
    )?;
    let (first_zero, slope_integral) = match sol.event {
        Some((s1, y)) => (Some(s1), Some(-s1 * s1 * y[1])),
        None => (None, None),
    };
    Ok(DimensionlessSolution {
        index: q,
        first_zero,
        slope_integral,
        trajectory: sol.trajectory,
    })
}

/// First zero and slope integral from a fixed-step solve with step `h`.
pub fn first_zero_fixed_step(q: f64, h: f64) -> Result<Option<(f64, f64)>, LaneEmdenError> {
    check_index(q)?;
    let sol = dimensionless_integrator().integrate_fixed(
        lane_emden_rhs(q),
        SERIES_START,
        series_start(q, SERIES_START),
        DIMENSIONLESS_HORIZON,
        h,
        Some(|_s: f64, y: &[f64; 2]| y[0]),
    )?;
    Ok(sol.event.map(|(s1, y)| (s1, -s1 * s1 * y[1])))
}

#[derive(Debug, Clone)]
enum Shape {
    /// `y(r) = alpha θ(beta r)`.
    Scaled {
        alpha: f64,
        beta: f64,
        dimless: Arc<DimensionlessSolution>,
    },
    Direct {
        trajectory: Trajectory2,
        series: [f64; 3],
        r0: f64,
    },
}

/// Stationary star of central density `mu`.
#[derive(Debug, Clone)]
pub struct StarSolution {
    pub eos: EosSpec,
    pub dim: usize,
    pub mu: f64,
    pub radius: f64,
    pub mass: f64,
    /// Potential at the surface, `-M / R^{n-2}`.
    pub boundary_potential: f64,
    pub profile: RadialProfile,
    shape: Shape,
}

impl StarSolution {
    /// Structure function `y = Φ'(rho)` inside the star, negative outside.
    pub fn structure(&self, r: f64) -> f64 {
        match &self.shape {
            Shape::Scaled { alpha, beta, dimless } => {
                let s = beta * r;
                if s >= dimless.first_zero.unwrap_or(f64::INFINITY) {
                    return 0.0;
                }
                alpha * dimless.theta(s)
            }
            Shape::Direct { trajectory, series, r0 } => {
                if r < *r0 {
                    series[0] + series[1] * r * r + series[2] * r.powi(4)
                } else if r >= self.radius {
                    0.0
                } else {
                    trajectory.eval(r)[0]
                }
            }
        }
    }

    /// Radial derivative of the structure function.
    pub fn structure_derivative(&self, r: f64) -> f64 {
        match &self.shape {
            Shape::Scaled { alpha, beta, dimless } => alpha * beta * dimless.theta_derivative(beta * r),
            Shape::Direct { trajectory, series, r0 } => {
                if r < *r0 {
                    2.0 * series[1] * r + 4.0 * series[2] * r.powi(3)
                } else {
                    trajectory.eval(r.min(self.radius))[1]
                }
            }
        }
    }

    pub fn density(&self, r: f64) -> f64 {
        if r >= self.radius {
            return 0.0;
        }
        self.eos.density_from_slope(self.structure(r)).unwrap_or(0.0)
    }
}

/// Star of central density `mu` in three dimensions.
pub fn solve_star(eos: &EosSpec, mu: f64) -> Result<StarSolution, LaneEmdenError> {
    match eos {
        EosSpec::Polytropic(p) => solve_polytrope(p, mu),
        EosSpec::WhiteDwarf(_) => solve_star_direct(eos, mu, 3),
    }
}

fn check_mu(mu: f64) -> Result<(), LaneEmdenError> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(LaneEmdenError::InvalidCentralDensity(mu));
    }
    Ok(())
}

/// Polytrope by rescaling the dimensionless solution.
pub fn solve_polytrope(eos: &PolytropicEos, mu: f64) -> Result<StarSolution, LaneEmdenError> {
    solve_polytrope_on_grid(eos, mu, STAR_GRID_INTERVALS)
}

/// As [`solve_polytrope`] with a chosen number of profile intervals.
pub fn solve_polytrope_on_grid(eos: &PolytropicEos, mu: f64, intervals: usize) -> Result<StarSolution, LaneEmdenError> {
    eos.validate()?;
    check_mu(mu)?;
    let q = eos.index();
    let dimless = Arc::new(solve_dimensionless(q)?);
    let s1 = dimless.first_zero.ok_or(LaneEmdenError::UnboundedSupport {
        horizon: DIMENSIONLESS_HORIZON,
    })?;
    let slope = dimless.slope_integral.unwrap();
    let c = 4.0 * std::f64::consts::PI * ((eos.gamma - 1.0) / (eos.k * eos.gamma)).powf(q);
    let alpha = eos.enthalpy_derivative(mu);
    let beta = c.sqrt() * alpha.powf(0.5 * (q - 1.0));
    let radius = s1 / beta;
    let mass = alpha.powf(0.5 * (3.0 - q)) / c.sqrt() * slope;
    let spec = EosSpec::Polytropic(*eos);
    let grid = surface_clustered_grid(radius, intervals);
    let values = grid
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            if i == intervals {
                0.0
            } else {
                eos.density_from_slope(alpha * dimless.theta(beta * r))
            }
        })
        .collect();
    let profile = RadialProfile::new(3, grid, values)?;
    Ok(StarSolution {
        eos: spec,
        dim: 3,
        mu,
        radius,
        mass,
        boundary_potential: -mass / radius,
        profile,
        shape: Shape::Scaled { alpha, beta, dimless },
    })
}

/// Star of central density `mu` in dimension `dim` by direct integration of
/// the structure equation.
pub fn solve_star_direct(eos: &EosSpec, mu: f64, dim: usize) -> Result<StarSolution, LaneEmdenError> {
    solve_star_direct_on_grid(eos, mu, dim, STAR_GRID_INTERVALS)
}

/// As [`solve_star_direct`] with a chosen number of profile intervals.
pub fn solve_star_direct_on_grid(
    eos: &EosSpec,
    mu: f64,
    dim: usize,
    intervals: usize,
) -> Result<StarSolution, LaneEmdenError> {
    eos.validate()?;
    check_mu(mu)?;
    if dim < 3 {
        return Err(LaneEmdenError::InvalidDimension(dim));
    }
    let n = dim as f64;
    let c = poisson_coupling(dim);
    let y0 = eos.enthalpy_derivative(mu);
    let a2 = -c * mu / (2.0 * n);
    let a4 = -c * eos.density_from_slope_derivative(y0) * a2 / (4.0 * (n + 2.0));
    let scale = (y0 / (c * mu)).sqrt();
    let r0 = 1e-3 * scale;
    let horizon = 1e6 * scale;
    let start = [
        y0 + a2 * r0 * r0 + a4 * r0.powi(4),
        2.0 * a2 * r0 + 4.0 * a4 * r0.powi(3),
    ];
    let spec = *eos;
    let rhs = move |r: f64, y: &[f64; 2]| {
        let rho = spec.density_from_slope(y[0]).unwrap_or(0.0);
        [y[1], -c * rho - (n - 1.0) * y[1] / r]
    };
    let solver = Dopri5 {
        rtol: 1e-11,
        atol: 1e-14 * y0,
        event_tol: 1e-14 * scale,
        ..Default::default()
    };
    let sol = solver.integrate(rhs, r0, start, horizon, Some(|_r: f64, y: &[f64; 2]| y[0]))?;
    let (radius, y_end) = sol.event.ok_or(LaneEmdenError::UnboundedSupport { horizon })?;
    let mass = radius.powi(dim as i32 - 1) * y_end[1].abs() / (n - 2.0);
    let trajectory = sol.trajectory;
    let series = [y0, a2, a4];
    let grid = surface_clustered_grid(radius, intervals);
    let values = grid
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let y = if i == intervals {
                0.0
            } else if r < r0 {
                y0 + a2 * r * r + a4 * r.powi(4)
            } else {
                trajectory.eval(r)[0]
            };
            eos.density_from_slope(y).unwrap_or(0.0)
        })
        .collect();
    let profile = RadialProfile::new(dim, grid, values)?;
    Ok(StarSolution {
        eos: *eos,
        dim,
        mu,
        radius,
        mass,
        boundary_potential: -mass / radius.powi(dim as i32 - 2),
        profile,
        shape: Shape::Direct { trajectory, series, r0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn index_zero_closed_form() {
        let sol = solve_dimensionless(0.0).unwrap();
        let s1 = sol.first_zero.unwrap();
        assert!((s1 - 6f64.sqrt()).abs() < 1e-11);
        assert!((sol.slope_integral.unwrap() - 2.0 * 6f64.sqrt()).abs() < 1e-10);
        assert!((sol.theta(1.0) - (1.0 - 1.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn index_one_closed_form() {
        let sol = solve_dimensionless(1.0).unwrap();
        assert!((sol.first_zero.unwrap() - PI).abs() < 1e-11);
        assert!((sol.slope_integral.unwrap() - PI).abs() < 1e-10);
        for &s in &[0.005, 0.3, 1.0, 2.5, 3.0] {
            assert!((sol.theta(s) - s.sin() / s).abs() < 1e-11, "s={s}");
        }
    }

    #[test]
    fn index_five_has_no_zero() {
        let sol = solve_dimensionless(5.0).unwrap();
        assert!(sol.first_zero.is_none());
        for &s in &[0.5_f64, 3.0, 50.0, 2000.0] {
            let exact = (1.0 + s * s / 3.0).powf(-0.5);
            assert!(((sol.theta(s) - exact) / exact).abs() < 1e-8, "s={s}");
        }
    }

    #[test]
    fn negative_index_rejected() {
        assert!(matches!(
            solve_dimensionless(-1.0),
            Err(LaneEmdenError::InvalidIndex(_))
        ));
    }

    #[test]
    fn slope_integral_matches_mass_quadrature() {
        for &q in &[1.5, 3.0, 3.3333333333333335] {
            let sol = solve_dimensionless(q).unwrap();
            let a = sol.slope_integral.unwrap();
            let b = sol.mass_integral_quadrature().unwrap();
            assert!(((a - b) / a).abs() < 1e-9, "q={q} {a} {b}");
        }
    }

    #[test]
    fn q_one_polytrope_radius() {
        let eos = PolytropicEos::new(1.0, 2.0).unwrap();
        let star = solve_polytrope(&eos, 1.0).unwrap();
        assert!((star.radius - PI * (0.5 / PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn direct_integration_agrees_with_rescaling() {
        let p = PolytropicEos::new(1.0, 1.3).unwrap();
        let a = solve_polytrope(&p, 0.8).unwrap();
        let b = solve_star_direct(&EosSpec::Polytropic(p), 0.8, 3).unwrap();
        assert!(((a.radius - b.radius) / a.radius).abs() < 1e-8);
        assert!(((a.mass - b.mass) / a.mass).abs() < 1e-8);
        let r = 0.5 * a.radius;
        assert!(((a.density(r) - b.density(r)) / a.density(r)).abs() < 1e-8);
    }

    #[test]
    fn profile_mass_matches_surface_slope() {
        let p = PolytropicEos::new(1.0, 1.3).unwrap();
        let star = solve_polytrope(&p, 1.0).unwrap();
        let m = star.profile.mass();
        assert!(((m - star.mass) / star.mass).abs() < 1e-5, "{m} vs {}", star.mass);
    }
}
