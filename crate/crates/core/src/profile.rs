//! Radial profiles on a node grid.
//!
//! A profile is continuous and piecewise linear in the volume coordinate
//! `w = r^n` between the nodes, and vanishes beyond the last node (a jump at
//! the outer radius is allowed). Integrals of powers of the density are
//! evaluated exactly under this model; integrals with radial weights use
//! Gauss-Legendre quadrature on each interval.

use crate::geometry::unit_ball_volume;
use crate::GaussRule;

/// Smallest number of intervals accepted on a grid.
pub const MIN_INTERVALS: usize = 16;

const GAUSS_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("dimension must be at least 3, got {0}")]
    Dimension(usize),
    #[error("radii and values differ in length ({radii} vs {values})")]
    LengthMismatch { radii: usize, values: usize },
    #[error("grid needs at least {min} intervals, got {got}")]
    TooFewNodes { min: usize, got: usize },
    #[error("grid must start at r = 0, got {0}")]
    NonzeroOrigin(f64),
    #[error("radii must be strictly increasing (index {0})")]
    NonMonotoneGrid(usize),
    #[error("invalid value {value} at index {index}")]
    InvalidValue { index: usize, value: f64 },
    #[error("profiles are defined in different dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("velocity grid ends at {velocity_extent} inside the density support {support}")]
    GridCoverage { support: f64, velocity_extent: f64 },
}

fn validate_grid(dim: usize, radii: &[f64], n_values: usize) -> Result<(), ProfileError> {
    if dim < 3 {
        return Err(ProfileError::Dimension(dim));
    }
    if radii.len() != n_values {
        return Err(ProfileError::LengthMismatch {
            radii: radii.len(),
            values: n_values,
        });
    }
    if radii.len() < MIN_INTERVALS + 1 {
        return Err(ProfileError::TooFewNodes {
            min: MIN_INTERVALS,
            got: radii.len().saturating_sub(1),
        });
    }
    if radii[0] != 0.0 {
        return Err(ProfileError::NonzeroOrigin(radii[0]));
    }
    for i in 1..radii.len() {
        if !(radii[i] > radii[i - 1]) || !radii[i].is_finite() {
            return Err(ProfileError::NonMonotoneGrid(i));
        }
    }
    Ok(())
}

/// Mean of `t^p` for `t` uniform on `[a, b]` (either order).
pub(crate) fn mean_power(a: f64, b: f64, p: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if hi <= 0.0 {
        return 0.0;
    }
    if hi - lo > 1e-6 * hi {
        (hi.powf(p + 1.0) - lo.powf(p + 1.0)) / ((p + 1.0) * (hi - lo))
    } else {
        let m = 0.5 * (lo + hi);
        let d2 = ((hi - lo) / (2.0 * m)).powi(2);
        m.powf(p) * (1.0 + p * (p - 1.0) / 6.0 * d2 + p * (p - 1.0) * (p - 2.0) * (p - 3.0) / 120.0 * d2 * d2)
    }
}

/// Nonnegative radial density.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    dim: usize,
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(dim: usize, radii: Vec<f64>, values: Vec<f64>) -> Result<Self, ProfileError> {
        validate_grid(dim, &radii, values.len())?;
        for (i, &v) in values.iter().enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ProfileError::InvalidValue { index: i, value: v });
            }
        }
        Ok(Self { dim, radii, values })
    }

    /// Samples `f` on the given grid.
    pub fn from_fn(dim: usize, radii: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self, ProfileError> {
        let values = radii.iter().map(|&r| f(r)).collect();
        Self::new(dim, radii, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn outer_radius(&self) -> f64 {
        *self.radii.last().expect("validated grid is nonempty")
    }

    fn w(&self, i: usize) -> f64 {
        self.radii[i].powi(self.dim as i32)
    }

    /// Density at radius `r` under the linear-in-volume model.
    pub fn value_at(&self, r: f64) -> f64 {
        interpolate(self.dim, &self.radii, &self.values, r)
    }

    /// Radius beyond which the profile vanishes identically.
    pub fn support_radius(&self) -> f64 {
        match self.values.iter().rposition(|&v| v > 0.0) {
            None => 0.0,
            Some(i) if i + 1 < self.len() => self.radii[i + 1],
            Some(i) => self.radii[i],
        }
    }

    fn support_end(&self) -> usize {
        match self.values.iter().rposition(|&v| v > 0.0) {
            None => 0,
            Some(i) => (i + 1).min(self.len() - 1),
        }
    }

    /// Measure of `{rho > 0}`.
    pub fn support_measure(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.len() - 1 {
            if self.values[i] > 0.0 || self.values[i + 1] > 0.0 {
                acc += self.w(i + 1) - self.w(i);
            }
        }
        unit_ball_volume(self.dim) * acc
    }

    /// `∫ rho^p dx`.
    pub fn integral_power(&self, p: f64) -> f64 {
        let bn = unit_ball_volume(self.dim);
        let mut acc = 0.0;
        for i in 0..self.len() - 1 {
            let (a, b) = (self.values[i], self.values[i + 1]);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            acc += (self.w(i + 1) - self.w(i)) * mean_power(a, b, p);
        }
        bn * acc
    }

    pub fn mass(&self) -> f64 {
        self.integral_power(1.0)
    }

    /// `∫ g(rho) dx` by Gauss-Legendre in the volume coordinate.
    pub fn integral_of(&self, g: impl Fn(f64) -> f64) -> f64 {
        let rule = GaussRule::new(GAUSS_POINTS);
        let bn = unit_ball_volume(self.dim);
        let mut acc = 0.0;
        for i in 0..self.len() - 1 {
            let (a, b) = (self.values[i], self.values[i + 1]);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let dw = self.w(i + 1) - self.w(i);
            acc += dw * rule.integrate(0.0, 1.0, |x| g(a + (b - a) * x));
        }
        bn * acc
    }

    /// Enclosed mass at every node.
    pub fn enclosed_mass_nodes(&self) -> Vec<f64> {
        let bn = unit_ball_volume(self.dim);
        let mut out = Vec::with_capacity(self.len());
        let mut m = 0.0;
        out.push(0.0);
        for i in 0..self.len() - 1 {
            m += bn * (self.w(i + 1) - self.w(i)) * 0.5 * (self.values[i] + self.values[i + 1]);
            out.push(m);
        }
        out
    }

    fn segment_mass(&self, i: usize, m_i: f64, w: f64) -> f64 {
        let bn = unit_ball_volume(self.dim);
        let (wi, wj) = (self.w(i), self.w(i + 1));
        let (a, b) = (self.values[i], self.values[i + 1]);
        let x = w - wi;
        m_i + bn * (x * a + 0.5 * x * x * (b - a) / (wj - wi))
    }

    /// Radii enclosing each of the (nondecreasing) target masses.
    pub fn radii_enclosing(&self, targets: &[f64]) -> Vec<f64> {
        let nodes = self.enclosed_mass_nodes();
        let inv = 1.0 / self.dim as f64;
        targets
            .iter()
            .map(|&m| {
                if m <= 0.0 {
                    return 0.0;
                }
                let i = nodes.partition_point(|&x| x < m);
                if i >= nodes.len() {
                    return self.support_radius();
                }
                if i == 0 {
                    return 0.0;
                }
                let seg = i - 1;
                let (mut lo, mut hi) = (self.w(seg), self.w(seg + 1));
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid == lo || mid == hi {
                        break;
                    }
                    if self.segment_mass(seg, nodes[seg], mid) < m {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                (0.5 * (lo + hi)).powf(inv)
            })
            .collect()
    }

    /// Mass inside radius `r`.
    pub fn enclosed_mass(&self, r: f64) -> f64 {
        let nodes = self.enclosed_mass_nodes();
        if r >= self.outer_radius() {
            return *nodes.last().unwrap();
        }
        if r <= 0.0 {
            return 0.0;
        }
        let i = self.radii.partition_point(|&x| x <= r) - 1;
        self.segment_mass(i, nodes[i], r.powi(self.dim as i32))
    }

    /// Integrates `h(r, m(r), i)` over each interval `i` in `r` with the enclosed mass `m(r)`.
    fn radial_integral_with_mass(&self, upto: usize, h: impl Fn(f64, f64, usize) -> f64) -> f64 {
        let rule = GaussRule::new(GAUSS_POINTS);
        let nodes = self.enclosed_mass_nodes();
        let n = self.dim as i32;
        let mut acc = 0.0;
        for (i, &m0) in nodes.iter().enumerate().take(upto) {
            acc += rule.integrate(self.radii[i], self.radii[i + 1], |r| {
                let m = self.segment_mass(i, m0, r.powi(n));
                h(r, m, i)
            });
        }
        acc
    }

    /// `D = ∫∫ rho(x) rho(y) |x - y|^{2-n} dx dy`, from the enclosed-mass form
    /// `(n-2) ∫_0^R m(r)² r^{1-n} dr + M² R^{2-n}`.
    pub fn potential_double_integral(&self) -> f64 {
        let end = self.support_end();
        if end == 0 {
            return 0.0;
        }
        let n = self.dim as i32;
        let rs = self.radii[end];
        let mass = self.enclosed_mass_nodes()[end];
        let inner = self.radial_integral_with_mass(end, |r, m, _| m * m / r.powi(n - 1));
        (self.dim as f64 - 2.0) * inner + mass * mass / rs.powi(n - 2)
    }

    /// `∫ rho(x) g(|x|) dx` by Gauss-Legendre in `r`.
    pub fn radial_moment(&self, g: impl Fn(f64) -> f64) -> f64 {
        let rule = GaussRule::new(GAUSS_POINTS);
        let area = crate::geometry::unit_sphere_area(self.dim);
        let n = self.dim as i32;
        let mut acc = 0.0;
        for i in 0..self.support_end() {
            acc += rule.integrate(self.radii[i], self.radii[i + 1], |r| {
                let rho = self.segment_value(i, r);
                rho * g(r) * r.powi(n - 1)
            });
        }
        area * acc
    }

    fn segment_value(&self, i: usize, r: f64) -> f64 {
        let (wi, wj) = (self.w(i), self.w(i + 1));
        let t = (r.powi(self.dim as i32) - wi) / (wj - wi);
        self.values[i] + (self.values[i + 1] - self.values[i]) * t
    }

    /// `½ ∫ rho(x) |x|² dx`.
    pub fn second_moment(&self) -> f64 {
        0.5 * self.radial_moment(|r| r * r)
    }

    /// `∫ rho u² dx` with the velocity resampled onto this grid.
    pub fn kinetic_integral(&self, u: &VelocityProfile) -> Result<f64, ProfileError> {
        if u.dim() != self.dim {
            return Err(ProfileError::DimensionMismatch(self.dim, u.dim()));
        }
        let support = self.support_radius();
        if u.outer_radius() < support * (1.0 - 1e-12) {
            return Err(ProfileError::GridCoverage {
                support,
                velocity_extent: u.outer_radius(),
            });
        }
        Ok(self.radial_moment(|r| {
            let v = u.value_at(r);
            v * v
        }))
    }

    /// Dilation `rho_lambda(x) = lambda^n rho(lambda x)` (mass preserving).
    pub fn scaled(&self, lambda: f64) -> Self {
        let f = lambda.powi(self.dim as i32);
        Self {
            dim: self.dim,
            radii: self.radii.iter().map(|r| r / lambda).collect(),
            values: self.values.iter().map(|v| v * f).collect(),
        }
    }

    /// Multiplies the density by a constant factor.
    pub fn amplified(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            radii: self.radii.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Resamples onto another grid (zero outside the current outer radius).
    pub fn resampled(&self, radii: Vec<f64>) -> Result<Self, ProfileError> {
        let values = radii.iter().map(|&r| self.value_at(r)).collect();
        Self::new(self.dim, radii, values)
    }
}

fn interpolate(dim: usize, radii: &[f64], values: &[f64], r: f64) -> f64 {
    let last = radii.len() - 1;
    if r > radii[last] {
        return 0.0;
    }
    if r <= 0.0 {
        return values[0];
    }
    let i = (radii.partition_point(|&x| x <= r).max(1) - 1).min(last - 1);
    let n = dim as i32;
    let (wi, wj) = (radii[i].powi(n), radii[i + 1].powi(n));
    let t = ((r.powi(n) - wi) / (wj - wi)).clamp(0.0, 1.0);
    values[i] + (values[i + 1] - values[i]) * t
}

/// Signed radial velocity on a node grid, interpolated like a density.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityProfile {
    dim: usize,
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl VelocityProfile {
    pub fn new(dim: usize, radii: Vec<f64>, values: Vec<f64>) -> Result<Self, ProfileError> {
        validate_grid(dim, &radii, values.len())?;
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(ProfileError::InvalidValue { index: i, value: v });
            }
        }
        Ok(Self { dim, radii, values })
    }

    pub fn zero_on(rho: &RadialProfile) -> Self {
        Self {
            dim: rho.dim,
            radii: rho.radii.clone(),
            values: vec![0.0; rho.len()],
        }
    }

    pub fn from_fn(dim: usize, radii: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self, ProfileError> {
        let values = radii.iter().map(|&r| f(r)).collect();
        Self::new(dim, radii, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn outer_radius(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    /// Velocity at `r`; beyond the last node the outermost value is held.
    pub fn value_at(&self, r: f64) -> f64 {
        if r > self.outer_radius() {
            return *self.values.last().unwrap();
        }
        interpolate(self.dim, &self.radii, &self.values, r)
    }
}

/// `m + 1` nodes on `[0, R]` clustered toward the surface: `r_i = R sin(π i / 2m)`.
pub fn surface_clustered_grid(radius: f64, intervals: usize) -> Vec<f64> {
    let m = intervals as f64;
    (0..=intervals)
        .map(|i| {
            if i == intervals {
                radius
            } else {
                radius * (std::f64::consts::FRAC_PI_2 * i as f64 / m).sin()
            }
        })
        .collect()
}

/// `m + 1` equally spaced nodes on `[0, R]`.
pub fn uniform_grid(radius: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals)
        .map(|i| {
            if i == intervals {
                radius
            } else {
                radius * i as f64 / intervals as f64
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ball(n: usize, rho: f64, r: f64) -> RadialProfile {
        RadialProfile::from_fn(3, uniform_grid(r, n), |_| rho).unwrap()
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            RadialProfile::new(2, vec![0.0; 17], vec![0.0; 17]),
            Err(ProfileError::Dimension(2))
        ));
        assert!(matches!(
            RadialProfile::new(3, uniform_grid(1.0, 8), vec![1.0; 9]),
            Err(ProfileError::TooFewNodes { .. })
        ));
        let mut v = vec![1.0; 17];
        v[3] = -1.0;
        assert!(matches!(
            RadialProfile::new(3, uniform_grid(1.0, 16), v),
            Err(ProfileError::InvalidValue { index: 3, .. })
        ));
        let mut r = uniform_grid(1.0, 16);
        r.swap(4, 5);
        assert!(matches!(
            RadialProfile::new(3, r, vec![1.0; 17]),
            Err(ProfileError::NonMonotoneGrid(_))
        ));
    }

    #[test]
    fn uniform_ball_closed_forms() {
        let p = ball(32, 1.0, 1.0);
        let m = 4.0 * PI / 3.0;
        assert!((p.mass() - m).abs() < 1e-13);
        assert!((p.potential_double_integral() - 1.2 * m * m).abs() < 1e-12);
        assert!((p.second_moment() - 0.5 * 0.6 * m).abs() < 1e-13);
        assert!((p.enclosed_mass(0.5) - m / 8.0).abs() < 1e-14);
        assert_eq!(p.support_radius(), 1.0);
    }

    #[test]
    fn power_integrals_are_exact_for_linear_in_volume() {
        // rho = 1 - r³ is linear in w; ∫ rho^2 dx = 4π/3 ∫_0^1 (1-w)² dw = 4π/9.
        let p = RadialProfile::from_fn(3, surface_clustered_grid(1.0, 16), |r| 1.0 - r.powi(3)).unwrap();
        assert!((p.integral_power(2.0) - 4.0 * PI / 9.0).abs() < 1e-14);
        assert!((p.integral_of(|x| x * x) - 4.0 * PI / 9.0).abs() < 1e-14);
        assert!((p.support_radius() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scaling_preserves_mass() {
        let p = RadialProfile::from_fn(3, uniform_grid(2.0, 40), |r| (4.0 - r * r).max(0.0)).unwrap();
        let s = p.scaled(1.7);
        assert!((s.mass() - p.mass()).abs() < 1e-12 * p.mass());
        let d = p.potential_double_integral();
        assert!((s.potential_double_integral() - 1.7 * d).abs() < 1e-10 * d);
    }

    #[test]
    fn mean_power_series_branch_is_continuous() {
        let a = 0.8;
        let exact = mean_power(a, a * (1.0 + 2e-6), 4.0 / 3.0);
        let series = mean_power(a, a * (1.0 + 5e-7), 4.0 / 3.0);
        assert!((exact - series).abs() < 1e-6);
        assert_eq!(mean_power(0.0, 0.0, 1.3), 0.0);
    }

    #[test]
    fn velocity_coverage_is_checked() {
        let p = ball(16, 1.0, 2.0);
        let u = VelocityProfile::new(3, uniform_grid(1.0, 16), vec![0.0; 17]).unwrap();
        assert!(matches!(p.kinetic_integral(&u), Err(ProfileError::GridCoverage { .. })));
    }
}
