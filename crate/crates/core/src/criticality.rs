//! Critical constants and invariant-set membership.
//!
//! For `gamma = 4/3` the relevant scalars are the Chandrasekhar mass `M_ch`
//! and the sharp constant `C_min` of the gravitational inequality
//! `D(rho, rho) <= C_min M^{2/3} ∫ rho^{4/3}`. For `6/5 < gamma < 4/3` they are
//! the mass `M_1`, radius `R_1` and variational level `l_1 = S_1(rho_1)` of the
//! unit-central-density star, from which every other star follows by scaling.

use serde::{Deserialize, Serialize};

use crate::eos::{EosSpec, PolytropicEos};
use crate::functionals::{evaluate, lambda_star, FunctionalError};
use crate::lane_emden::{solve_dimensionless, solve_polytrope, LaneEmdenError};
use crate::profile::{RadialProfile, VelocityProfile};

/// Tolerance used to decide whether `gamma` is the critical exponent 4/3.
pub const GAMMA_CRITICAL_TOL: f64 = 1e-9;
/// Relative tolerance on the virial quantity below which it counts as zero.
pub const Q_ZERO_TOL: f64 = 1e-6;
const FORMULATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CriticalityError {
    #[error("K must be positive, got {0}")]
    InvalidK(f64),
    #[error("gamma = {0} must lie strictly inside (6/5, 4/3)")]
    GammaOutOfRange(f64),
    #[error("missing reference-star constants (l_1, M_1, R_1)")]
    MissingReference,
    #[error("the two membership formulations disagree: explicit slack {explicit}, optimised slack {optimised}")]
    FormulationMismatch { explicit: f64, optimised: f64 },
    #[error("dilation factor lambda* = {0} is not above 1")]
    LambdaNotAboveOne(f64),
    #[error("central density must be positive, got {0}")]
    InvalidMu(f64),
    #[error(transparent)]
    LaneEmden(#[from] LaneEmdenError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
}

/// Scalars fixing the critical thresholds for a given `(K, gamma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalConstants {
    #[serde(rename = "K")]
    pub k: f64,
    pub gamma: f64,
    #[serde(rename = "M_ch")]
    pub m_ch: Option<f64>,
    #[serde(rename = "C_min")]
    pub c_min: Option<f64>,
    pub l_1: Option<f64>,
    #[serde(rename = "M_1")]
    pub m_1: Option<f64>,
    #[serde(rename = "R_1")]
    pub r_1: Option<f64>,
    #[serde(rename = "M_c_gamma")]
    pub m_c_gamma: f64,
}

fn check_k(k: f64) -> Result<(), CriticalityError> {
    if !(k.is_finite() && k > 0.0) {
        return Err(CriticalityError::InvalidK(k));
    }
    Ok(())
}

/// Comparison mass `(9K/8π)^{3/2} |S^3|` with `|S^3| = 2π²` the area of the
/// unit sphere in four dimensions.
pub fn comparison_mass(k: f64) -> f64 {
    let pi = std::f64::consts::PI;
    (9.0 * k / (8.0 * pi)).powf(1.5) * 2.0 * pi * pi
}

/// Chandrasekhar mass and sharp constant for `gamma = 4/3`.
pub fn chandrasekhar_constants(k: f64) -> Result<CriticalConstants, CriticalityError> {
    check_k(k)?;
    let sol = solve_dimensionless(3.0)?;
    let slope = sol.slope_integral.ok_or(LaneEmdenError::UnboundedSupport {
        horizon: crate::lane_emden::DIMENSIONLESS_HORIZON,
    })?;
    let pi = std::f64::consts::PI;
    let m_ch = (k / pi).powf(1.5) * 4.0 * pi * slope;
    Ok(CriticalConstants {
        k,
        gamma: 4.0 / 3.0,
        m_ch: Some(m_ch),
        c_min: Some(6.0 * k / m_ch.powf(2.0 / 3.0)),
        l_1: None,
        m_1: None,
        r_1: None,
        m_c_gamma: comparison_mass(k),
    })
}

/// Reference-star scalars for `6/5 < gamma < 4/3`.
pub fn reference_constants(k: f64, gamma: f64) -> Result<CriticalConstants, CriticalityError> {
    check_k(k)?;
    if !(gamma > 1.2 && gamma < 4.0 / 3.0) {
        return Err(CriticalityError::GammaOutOfRange(gamma));
    }
    let eos = PolytropicEos::new(k, gamma).map_err(FunctionalError::from)?;
    let star = solve_polytrope(&eos, 1.0)?;
    let report = evaluate(&star.profile, None, &EosSpec::Polytropic(eos), Some(&star))?;
    Ok(CriticalConstants {
        k,
        gamma,
        m_ch: None,
        c_min: None,
        l_1: report.s_mu,
        m_1: Some(star.mass),
        r_1: Some(star.radius),
        m_c_gamma: comparison_mass(k),
    })
}

/// Dispatches on `gamma`: the critical exponent (within [`GAMMA_CRITICAL_TOL`])
/// or the subcritical range.
pub fn critical_constants(k: f64, gamma: f64) -> Result<CriticalConstants, CriticalityError> {
    if (gamma - 4.0 / 3.0).abs() <= GAMMA_CRITICAL_TOL {
        chandrasekhar_constants(k)
    } else {
        reference_constants(k, gamma)
    }
}

impl CriticalConstants {
    fn reference(&self) -> Result<(f64, f64, f64), CriticalityError> {
        match (self.l_1, self.m_1, self.r_1) {
            (Some(l), Some(m), Some(r)) => Ok((l, m, r)),
            _ => Err(CriticalityError::MissingReference),
        }
    }

    /// `l_mu = mu^{(5 gamma - 6)/2} l_1`.
    pub fn level(&self, mu: f64) -> Result<f64, CriticalityError> {
        let (l1, _, _) = self.reference()?;
        Ok(mu.powf(0.5 * (5.0 * self.gamma - 6.0)) * l1)
    }

    /// `M_mu = M_1 mu^{(3 gamma - 4)/2}`.
    pub fn star_mass(&self, mu: f64) -> Result<f64, CriticalityError> {
        let (_, m1, _) = self.reference()?;
        Ok(m1 * mu.powf(0.5 * (3.0 * self.gamma - 4.0)))
    }

    /// `R_mu = R_1 mu^{(gamma - 2)/2}`.
    pub fn star_radius(&self, mu: f64) -> Result<f64, CriticalityError> {
        let (_, _, r1) = self.reference()?;
        Ok(r1 * mu.powf(0.5 * (self.gamma - 2.0)))
    }

    /// Surface potential `V_mu(R_mu) = -(M_1/R_1) mu^{gamma - 1}`.
    pub fn boundary_potential(&self, mu: f64) -> Result<f64, CriticalityError> {
        let (_, m1, r1) = self.reference()?;
        Ok(-(m1 / r1) * mu.powf(self.gamma - 1.0))
    }

    /// Energy threshold `f(mu) = V_mu(R_mu) M + l_mu` for a state of mass `m`.
    pub fn threshold(&self, mu: f64, mass: f64) -> Result<f64, CriticalityError> {
        Ok(self.boundary_potential(mu)? * mass + self.level(mu)?)
    }

    /// Maximiser `mu_0` of [`Self::threshold`] at mass `m`.
    pub fn optimal_mu(&self, mass: f64) -> Result<f64, CriticalityError> {
        let (l1, m1, r1) = self.reference()?;
        let g = self.gamma;
        let base = (5.0 * g - 6.0) * l1 * r1 / (2.0 * (g - 1.0) * m1 * mass);
        Ok(base.powf(2.0 / (4.0 - 3.0 * g)))
    }

    /// Right-hand side of the explicit mass condition
    /// `M < c(gamma) l_1^{2(gamma-1)/(5gamma-6)} (R_1/M_1) E^{(3gamma-4)/(5gamma-6)}`.
    pub fn explicit_mass_bound(&self, energy: f64) -> Result<f64, CriticalityError> {
        let (l1, m1, r1) = self.reference()?;
        let g = self.gamma;
        let d = 5.0 * g - 6.0;
        let c = ((5.0 * g - 6.0) / (2.0 * (g - 1.0))).powf(2.0 * (g - 1.0) / d)
            * ((4.0 - 3.0 * g) / (5.0 * g - 6.0)).powf((4.0 - 3.0 * g) / d);
        Ok(c * l1.powf(2.0 * (g - 1.0) / d) * (r1 / m1) * energy.powf((3.0 * g - 4.0) / d))
    }
}

/// Outcome of a membership test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub in_set: bool,
    pub mu_star: Option<f64>,
    /// `min(Q - tol, f(mu_0) - E)`; `None` encodes minus infinity.
    pub margin: Option<f64>,
    pub lambda_lower_bound: Option<f64>,
    pub mass: f64,
    pub energy: f64,
    pub q_value: f64,
    pub threshold: Option<f64>,
    /// Verdict of the explicit mass condition, absent when it is undefined (`E <= 0`).
    pub explicit_in_set: Option<bool>,
    /// Set when the explicit condition could not be evaluated.
    pub explicit_undefined: bool,
}

/// Decides membership of `(rho, u)` in the invariant set.
pub fn check_invariant_set(
    rho: &RadialProfile,
    u: Option<&VelocityProfile>,
    eos: &PolytropicEos,
    consts: &CriticalConstants,
) -> Result<MembershipVerdict, CriticalityError> {
    if !(eos.gamma > 1.2 && eos.gamma < 4.0 / 3.0) {
        return Err(CriticalityError::GammaOutOfRange(eos.gamma));
    }
    consts.reference()?;
    let report = evaluate(rho, u, &EosSpec::Polytropic(*eos), None)?;
    let (mass, energy, q) = (report.mass, report.energy, report.q_value);
    let q_tol = Q_ZERO_TOL * rho.dim() as f64 * eos.k * report.lgamma_integral;
    let degenerate = |explicit_undefined| MembershipVerdict {
        in_set: false,
        mu_star: None,
        margin: None,
        lambda_lower_bound: None,
        mass,
        energy,
        q_value: q,
        threshold: None,
        explicit_in_set: None,
        explicit_undefined,
    };
    if !(mass > 0.0) || energy == 0.0 {
        return Ok(degenerate(true));
    }
    let mu0 = consts.optimal_mu(mass)?;
    let f0 = consts.threshold(mu0, mass)?;
    let q_ok = q > q_tol;
    let optimised = f0 - energy;
    let in_set = q_ok && optimised > 0.0;
    let (explicit_in_set, explicit_undefined) = if energy > 0.0 {
        let bound = consts.explicit_mass_bound(energy)?;
        let explicit = bound - mass;
        let a = q_ok && explicit > 0.0;
        if a != in_set {
            let rel_a = explicit.abs() / bound.abs().max(mass);
            let rel_b = optimised.abs() / f0.abs().max(energy.abs());
            if rel_a > FORMULATION_TOL && rel_b > FORMULATION_TOL {
                return Err(CriticalityError::FormulationMismatch { explicit, optimised });
            }
        }
        (Some(a), false)
    } else {
        (None, true)
    };
    let lambda_lower_bound = if q_ok {
        q_lower_bound(rho, eos, consts, mu0).ok()
    } else {
        None
    };
    Ok(MembershipVerdict {
        in_set,
        mu_star: Some(mu0),
        margin: Some((q - q_tol).min(optimised)),
        lambda_lower_bound,
        mass,
        energy,
        q_value: q,
        threshold: Some(f0),
        explicit_in_set,
        explicit_undefined,
    })
}

/// Lower bound `max(0, (l_mu - S_mu(rho)) / (lambda*(rho) - 1))` on `Q(rho)`.
pub fn q_lower_bound(
    rho: &RadialProfile,
    eos: &PolytropicEos,
    consts: &CriticalConstants,
    mu: f64,
) -> Result<f64, CriticalityError> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(CriticalityError::InvalidMu(mu));
    }
    let ls = lambda_star(rho, eos)?;
    if !(ls > 1.0) {
        return Err(CriticalityError::LambdaNotAboveOne(ls));
    }
    let report = evaluate(rho, None, &EosSpec::Polytropic(*eos), None)?;
    let s_mu =
        report.internal_energy - 0.5 * report.potential_double_integral - consts.boundary_potential(mu)? * report.mass;
    Ok(((consts.level(mu)? - s_mu) / (ls - 1.0)).max(0.0))
}
