//! Energy, virial and variational functionals of radial states, plus the
//! mass-preserving dilation and the symmetric decreasing rearrangement.

use serde::{Deserialize, Serialize};

use crate::eos::{EosError, EosSpec, PolytropicEos};
use crate::geometry::unit_sphere_area;
use crate::lane_emden::StarSolution;
use crate::profile::{ProfileError, RadialProfile, VelocityProfile, MIN_INTERVALS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FunctionalError {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Eos(#[from] EosError),
    #[error("gamma = {gamma} outside the admissible range ({lo}, {hi})")]
    GammaOutOfRange { gamma: f64, lo: f64, hi: f64 },
    #[error("scaling factor must be positive, got {0}")]
    InvalidScale(f64),
    #[error("profile has no mass")]
    EmptyProfile,
    #[error("operation requires three dimensions, got {0}")]
    Dimension(usize),
    #[error("reference star lives in dimension {star}, profile in {profile}")]
    ReferenceDimension { star: usize, profile: usize },
}

/// Integral quantities of a state `(rho, u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub dim: usize,
    pub mass: f64,
    /// `∫ rho^gamma dx` for a polytrope, `∫ Φ(rho) dx` for the white dwarf law.
    pub lgamma_integral: f64,
    /// `∫ Φ(rho) dx`.
    pub internal_energy: f64,
    /// `∫ P(rho) dx`.
    pub pressure_integral: f64,
    /// `½ ∫ rho u² dx`.
    pub kinetic: f64,
    /// `D(rho, rho)`.
    pub potential_double_integral: f64,
    pub energy: f64,
    /// `n ∫ P dx - (n - 2)/2 D`, the virial quantity.
    pub q_value: f64,
    /// Variational functional relative to the reference star, when supplied.
    pub s_mu: Option<f64>,
}

/// Evaluates the functionals of `(rho, u)`.
pub fn evaluate(
    rho: &RadialProfile,
    u: Option<&VelocityProfile>,
    eos: &EosSpec,
    mu_ref: Option<&StarSolution>,
) -> Result<FunctionalReport, FunctionalError> {
    eos.validate()?;
    let n = rho.dim();
    let mass = rho.mass();
    let (lgamma, internal, pressure) = match eos {
        EosSpec::Polytropic(p) => {
            let lg = rho.integral_power(p.gamma);
            (lg, lg * p.k / (p.gamma - 1.0), lg * p.k)
        }
        EosSpec::WhiteDwarf(w) => {
            let phi = rho.integral_of(|x| w.enthalpy(x));
            (phi, phi, rho.integral_of(|x| w.pressure(x)))
        }
    };
    let kinetic = match u {
        Some(u) => 0.5 * rho.kinetic_integral(u)?,
        None => 0.0,
    };
    let d = rho.potential_double_integral();
    let energy = kinetic + internal - 0.5 * d;
    let q_value = n as f64 * pressure - 0.5 * (n as f64 - 2.0) * d;
    let s_mu = match mu_ref {
        Some(star) => {
            if star.dim != n {
                return Err(FunctionalError::ReferenceDimension {
                    star: star.dim,
                    profile: n,
                });
            }
            Some(internal - 0.5 * d - star.boundary_potential * mass)
        }
        None => None,
    };
    Ok(FunctionalReport {
        dim: n,
        mass,
        lgamma_integral: lgamma,
        internal_energy: internal,
        pressure_integral: pressure,
        kinetic,
        potential_double_integral: d,
        energy,
        q_value,
        s_mu,
    })
}

/// `rho_lambda(x) = lambda^n rho(lambda x)`.
pub fn scale_profile(rho: &RadialProfile, lambda: f64) -> Result<RadialProfile, FunctionalError> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(FunctionalError::InvalidScale(lambda));
    }
    Ok(rho.scaled(lambda))
}

/// Open interval of exponents for which the dilation family has a unique
/// critical point: `(2n/(n+2), (2n-2)/n)`.
pub fn subcritical_gamma_range(dim: usize) -> (f64, f64) {
    let n = dim as f64;
    (2.0 * n / (n + 2.0), (2.0 * n - 2.0) / n)
}

/// Dilation factor at which the virial quantity of `rho_lambda` vanishes.
pub fn lambda_star(rho: &RadialProfile, eos: &PolytropicEos) -> Result<f64, FunctionalError> {
    let (lo, hi) = subcritical_gamma_range(rho.dim());
    if !(eos.gamma > lo && eos.gamma < hi) {
        return Err(FunctionalError::GammaOutOfRange {
            gamma: eos.gamma,
            lo,
            hi,
        });
    }
    let d = rho.potential_double_integral();
    if !(d > 0.0) {
        return Err(FunctionalError::EmptyProfile);
    }
    let n = rho.dim() as f64;
    let lg = rho.integral_power(eos.gamma);
    let ratio = 2.0 * n * eos.k * lg / ((n - 2.0) * d);
    let ls = ratio.powf(1.0 / (2.0 * n - 2.0 - n * eos.gamma));
    if !(ls.is_finite() && ls > 0.0) {
        return Err(FunctionalError::InvalidScale(ls));
    }
    Ok(ls)
}

/// Measure of `{rho > level}` (strict) and `{rho >= level}` in the volume coordinate.
fn level_measures(w: &[f64], v: &[f64], level: f64) -> (f64, f64) {
    let mut strict = 0.0;
    let mut weak = 0.0;
    for i in 0..w.len() - 1 {
        let dw = w[i + 1] - w[i];
        let (lo, hi) = if v[i] <= v[i + 1] {
            (v[i], v[i + 1])
        } else {
            (v[i + 1], v[i])
        };
        if lo == hi {
            if lo > level {
                strict += dw;
            }
            if lo >= level {
                weak += dw;
            }
            continue;
        }
        if level < lo {
            strict += dw;
            weak += dw;
        } else if level < hi {
            let frac = dw * (hi - level) / (hi - lo);
            strict += frac;
            weak += if level == lo { dw } else { frac };
        }
    }
    (strict, weak)
}

/// Symmetric decreasing rearrangement.
///
/// The result is exact for the piecewise-linear-in-volume model: between two
/// consecutive node values the distribution function is linear, so the
/// rearranged profile is again piecewise linear in volume and every `L^p`
/// norm is preserved up to rounding.
pub fn rearrange_decreasing(rho: &RadialProfile) -> Result<RadialProfile, FunctionalError> {
    let n = rho.dim() as i32;
    let w: Vec<f64> = rho.radii().iter().map(|r| r.powi(n)).collect();
    let v = rho.values();
    let mut levels: Vec<f64> = v.to_vec();
    levels.sort_by(|a, b| b.partial_cmp(a).unwrap());
    levels.dedup();
    let has_zero = levels.last() == Some(&0.0);
    let positive: Vec<f64> = levels.into_iter().filter(|&l| l > 0.0).collect();
    if positive.is_empty() {
        return Ok(rho.clone());
    }
    let mut nodes: Vec<(f64, f64)> = Vec::new();
    let push = |pos: f64, val: f64, nodes: &mut Vec<(f64, f64)>| {
        let pos = nodes.last().map_or(pos, |&(p, _)| pos.max(p));
        match nodes.last() {
            Some(&(p, _)) if p == pos => {}
            _ => nodes.push((pos, val)),
        }
    };
    for &level in &positive {
        let (strict, weak) = level_measures(&w, v, level);
        push(strict, level, &mut nodes);
        push(weak, level, &mut nodes);
    }
    if has_zero {
        let (strict, _) = level_measures(&w, v, 0.0);
        push(strict, 0.0, &mut nodes);
    }
    if nodes.first().map(|n| n.0) != Some(0.0) {
        nodes.insert(0, (0.0, positive[0]));
    }
    let inv = 1.0 / n as f64;
    // Volume positions that differ only in the last bits can map to the same
    // radius; keep the first of such nodes. Refine until the grid is admissible.
    let mut radii: Vec<f64>;
    let mut values: Vec<f64>;
    loop {
        radii = Vec::with_capacity(nodes.len());
        values = Vec::with_capacity(nodes.len());
        let mut kept = Vec::with_capacity(nodes.len());
        for &(p, val) in &nodes {
            let r = p.powf(inv);
            if radii.last().is_none_or(|&last| r > last) {
                radii.push(r);
                values.push(val);
                kept.push((p, val));
            }
        }
        if radii.len() > MIN_INTERVALS {
            break;
        }
        let mut refined = Vec::with_capacity(2 * kept.len());
        for pair in kept.windows(2) {
            refined.push(pair[0]);
            refined.push((0.5 * (pair[0].0 + pair[1].0), 0.5 * (pair[0].1 + pair[1].1)));
        }
        refined.push(*kept.last().unwrap());
        nodes = refined;
    }
    Ok(RadialProfile::new(rho.dim(), radii, values)?)
}

fn require_three_dims(rho: &RadialProfile) -> Result<(), FunctionalError> {
    if rho.dim() != 3 {
        return Err(FunctionalError::Dimension(rho.dim()));
    }
    Ok(())
}

/// `D` by the midpoint rule on `[0, R]²` with `points²` cells and the
/// shell-averaged kernel `σ² r^{n-1} s^{n-1} max(r, s)^{2-n}`. Quadratic cost;
/// only meant as an independent check of [`RadialProfile::potential_double_integral`].
pub fn potential_double_integral_brute_force(rho: &RadialProfile, points: usize) -> f64 {
    let n = rho.dim() as i32;
    let area = unit_sphere_area(rho.dim());
    let h = rho.outer_radius() / points as f64;
    let weights: Vec<(f64, f64)> = (0..points)
        .map(|i| {
            let r = (i as f64 + 0.5) * h;
            (r, area * r.powi(n - 1) * rho.value_at(r) * h)
        })
        .collect();
    let mut acc = 0.0;
    for (i, &(r, a)) in weights.iter().enumerate() {
        // Symmetric kernel: diagonal once, off-diagonal twice.
        acc += a * a / r.powi(n - 2);
        for &(_, b) in &weights[..i] {
            acc += 2.0 * a * b / r.powi(n - 2);
        }
    }
    acc
}

/// `J(rho) = M^{2/3} ∫ rho^{4/3} dx / D(rho, rho)`.
pub fn hls_ratio(rho: &RadialProfile) -> Result<f64, FunctionalError> {
    require_three_dims(rho)?;
    let d = rho.potential_double_integral();
    if !(d > 0.0) {
        return Err(FunctionalError::EmptyProfile);
    }
    Ok(rho.mass().powf(2.0 / 3.0) * rho.integral_power(4.0 / 3.0) / d)
}

/// `C_min M^{2/3} ∫ rho^{4/3} dx - D(rho, rho)`, nonnegative when `C_min` is sharp.
pub fn hls_sharp_check(rho: &RadialProfile, c_min: f64) -> Result<f64, FunctionalError> {
    require_three_dims(rho)?;
    Ok(c_min * rho.mass().powf(2.0 / 3.0) * rho.integral_power(4.0 / 3.0) - rho.potential_double_integral())
}
