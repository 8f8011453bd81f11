//! Barotropic equations of state: the polytrope `P = K rho^gamma` and the
//! ideal white dwarf law `P = A f((rho / B)^{1/3})`.
//!
//! Every law exposes the pressure, the enthalpy `Φ(rho) = rho ∫_0^rho P(s)/s² ds`
//! (so that `Φ'' = P'/rho`) and the inverse of `Φ'` used by the stellar
//! structure equations.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EosError {
    #[error("negative density {0}")]
    NegativeDensity(f64),
    #[error("enthalpy slope {s} outside the admissible range [0, {s_max}]")]
    SlopeOutOfRange { s: f64, s_max: f64 },
    #[error("invalid equation of state parameter: {0}")]
    InvalidParameter(String),
}

/// `P = K rho^gamma` with `1 < gamma <= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytropicEos {
    #[serde(rename = "K")]
    pub k: f64,
    pub gamma: f64,
}

impl PolytropicEos {
    pub fn new(k: f64, gamma: f64) -> Result<Self, EosError> {
        let eos = Self { k, gamma };
        eos.validate()?;
        Ok(eos)
    }

    pub fn validate(&self) -> Result<(), EosError> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(EosError::InvalidParameter(format!(
                "K must be positive, got {}",
                self.k
            )));
        }
        if !(self.gamma > 1.0 && self.gamma <= 2.0) {
            return Err(EosError::InvalidParameter(format!(
                "gamma must lie in (1, 2], got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Lane-Emden index `q = 1 / (gamma - 1)`.
    pub fn index(&self) -> f64 {
        1.0 / (self.gamma - 1.0)
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        self.k * rho.max(0.0).powf(self.gamma)
    }

    pub fn pressure_derivative(&self, rho: f64) -> f64 {
        self.k * self.gamma * rho.max(0.0).powf(self.gamma - 1.0)
    }

    pub fn enthalpy(&self, rho: f64) -> f64 {
        self.pressure(rho) / (self.gamma - 1.0)
    }

    pub fn enthalpy_derivative(&self, rho: f64) -> f64 {
        self.k * self.gamma / (self.gamma - 1.0) * rho.max(0.0).powf(self.gamma - 1.0)
    }

    pub fn density_from_slope(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        ((self.gamma - 1.0) * s / (self.k * self.gamma)).powf(self.index())
    }
}

/// Ideal white dwarf law with pressure scale `A` and density scale `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhiteDwarfEos {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

/// Below this value of `xi` the closed forms lose digits to cancellation and
/// the power series are used instead.
const XI_SERIES_CUTOFF: f64 = 0.25;
const SERIES_TERMS: usize = 20;

fn binomial(alpha: f64, k: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c *= (alpha - i as f64) / (i + 1) as f64;
    }
    c
}

/// `f(xi) = xi sqrt(xi² + 1) (2 xi² - 3) + 3 asinh(xi)`.
pub fn white_dwarf_f(xi: f64) -> f64 {
    if xi < XI_SERIES_CUTOFF {
        let x2 = xi * xi;
        let mut pow = xi.powi(5);
        let mut acc = 0.0;
        for k in 0..SERIES_TERMS {
            acc += binomial(-0.5, k) * pow / (5 + 2 * k) as f64;
            pow *= x2;
        }
        8.0 * acc
    } else {
        xi * (xi * xi + 1.0).sqrt() * (2.0 * xi * xi - 3.0) + 3.0 * xi.asinh()
    }
}

/// Dimensionless enthalpy `Φ / A` as a function of `xi`.
pub fn white_dwarf_enthalpy_dimless(xi: f64) -> f64 {
    if xi < XI_SERIES_CUTOFF {
        let x2 = xi * xi;
        let mut pow = xi.powi(5);
        let mut acc = 0.0;
        for j in 0..SERIES_TERMS {
            acc += pow * (binomial(0.5, j + 1) - binomial(-0.5, j) / (5 + 2 * j) as f64);
            pow *= x2;
        }
        8.0 * acc
    } else {
        let r = (1.0 + xi * xi).sqrt();
        8.0 * xi.powi(3) * (r - 1.0) - white_dwarf_f(xi)
    }
}

impl WhiteDwarfEos {
    pub fn new(a: f64, b: f64) -> Result<Self, EosError> {
        let eos = Self { a, b };
        eos.validate()?;
        Ok(eos)
    }

    pub fn validate(&self) -> Result<(), EosError> {
        if !(self.a.is_finite() && self.a > 0.0 && self.b.is_finite() && self.b > 0.0) {
            return Err(EosError::InvalidParameter(format!(
                "A and B must be positive, got A = {}, B = {}",
                self.a, self.b
            )));
        }
        Ok(())
    }

    pub fn xi(&self, rho: f64) -> f64 {
        (rho.max(0.0) / self.b).cbrt()
    }

    /// Coefficient `A B^{-4/3}` of the relativistic limit `P ~ 2 A B^{-4/3} rho^{4/3}`.
    pub fn kappa(&self) -> f64 {
        self.a * self.b.powf(-4.0 / 3.0)
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        self.a * white_dwarf_f(self.xi(rho))
    }

    pub fn pressure_derivative(&self, rho: f64) -> f64 {
        let xi = self.xi(rho);
        8.0 * self.a * xi * xi / (3.0 * self.b * (1.0 + xi * xi).sqrt())
    }

    pub fn enthalpy(&self, rho: f64) -> f64 {
        self.a * white_dwarf_enthalpy_dimless(self.xi(rho))
    }

    pub fn enthalpy_derivative(&self, rho: f64) -> f64 {
        let xi = self.xi(rho);
        let x2 = xi * xi;
        8.0 * self.a / self.b * x2 / ((1.0 + x2).sqrt() + 1.0)
    }

    pub fn density_from_slope(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let t = s * self.b / (8.0 * self.a);
        self.b * (t * (2.0 + t)).powf(1.5)
    }
}

/// Equation of state selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EosSpec {
    Polytropic(PolytropicEos),
    WhiteDwarf(WhiteDwarfEos),
}

impl From<PolytropicEos> for EosSpec {
    fn from(e: PolytropicEos) -> Self {
        EosSpec::Polytropic(e)
    }
}

impl From<WhiteDwarfEos> for EosSpec {
    fn from(e: WhiteDwarfEos) -> Self {
        EosSpec::WhiteDwarf(e)
    }
}

impl EosSpec {
    pub fn polytropic(k: f64, gamma: f64) -> Result<Self, EosError> {
        PolytropicEos::new(k, gamma).map(Into::into)
    }

    pub fn white_dwarf(a: f64, b: f64) -> Result<Self, EosError> {
        WhiteDwarfEos::new(a, b).map(Into::into)
    }

    pub fn validate(&self) -> Result<(), EosError> {
        match self {
            EosSpec::Polytropic(e) => e.validate(),
            EosSpec::WhiteDwarf(e) => e.validate(),
        }
    }

    pub fn as_polytrope(&self) -> Option<&PolytropicEos> {
        match self {
            EosSpec::Polytropic(e) => Some(e),
            EosSpec::WhiteDwarf(_) => None,
        }
    }

    fn check(rho: f64) -> Result<f64, EosError> {
        if rho < 0.0 || rho.is_nan() {
            Err(EosError::NegativeDensity(rho))
        } else {
            Ok(rho)
        }
    }

    /// Pressure; rejects negative densities.
    pub fn try_pressure(&self, rho: f64) -> Result<f64, EosError> {
        Self::check(rho).map(|r| self.pressure(r))
    }

    /// Enthalpy `Φ`; rejects negative densities.
    pub fn try_enthalpy(&self, rho: f64) -> Result<f64, EosError> {
        Self::check(rho).map(|r| self.enthalpy(r))
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        match self {
            EosSpec::Polytropic(e) => e.pressure(rho),
            EosSpec::WhiteDwarf(e) => e.pressure(rho),
        }
    }

    pub fn pressure_derivative(&self, rho: f64) -> f64 {
        match self {
            EosSpec::Polytropic(e) => e.pressure_derivative(rho),
            EosSpec::WhiteDwarf(e) => e.pressure_derivative(rho),
        }
    }

    pub fn sound_speed(&self, rho: f64) -> f64 {
        self.pressure_derivative(rho).max(0.0).sqrt()
    }

    pub fn enthalpy(&self, rho: f64) -> f64 {
        match self {
            EosSpec::Polytropic(e) => e.enthalpy(rho),
            EosSpec::WhiteDwarf(e) => e.enthalpy(rho),
        }
    }

    pub fn enthalpy_derivative(&self, rho: f64) -> f64 {
        match self {
            EosSpec::Polytropic(e) => e.enthalpy_derivative(rho),
            EosSpec::WhiteDwarf(e) => e.enthalpy_derivative(rho),
        }
    }

    /// `Φ'' = P' / rho`.
    pub fn enthalpy_second(&self, rho: f64) -> f64 {
        match self {
            EosSpec::Polytropic(e) => e.k * e.gamma * rho.max(0.0).powf(e.gamma - 2.0),
            EosSpec::WhiteDwarf(e) => {
                let xi = e.xi(rho);
                8.0 * e.a / (3.0 * e.b * e.b * xi * (1.0 + xi * xi).sqrt())
            }
        }
    }

    /// Upper end of the range of `Φ'`; both laws are unbounded.
    pub fn slope_max(&self) -> f64 {
        f64::INFINITY
    }

    /// `(Φ')^{-1}(s_+)`: the density whose enthalpy slope is `s`, zero for `s <= 0`.
    pub fn density_from_slope(&self, s: f64) -> Result<f64, EosError> {
        if s.is_nan() || s > self.slope_max() {
            return Err(EosError::SlopeOutOfRange {
                s,
                s_max: self.slope_max(),
            });
        }
        Ok(match self {
            EosSpec::Polytropic(e) => e.density_from_slope(s),
            EosSpec::WhiteDwarf(e) => e.density_from_slope(s),
        })
    }

    /// Inverse of the (strictly increasing) pressure law; zero for `p <= 0`.
    pub fn density_from_pressure(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        match self {
            EosSpec::Polytropic(e) => (p / e.k).powf(1.0 / e.gamma),
            EosSpec::WhiteDwarf(e) => {
                let target = p / e.a;
                // f grows like 1.6 xi^5 for small xi and 2 xi^4 for large xi.
                let mut hi = (target / 1.6).powf(0.2).max((target / 2.0).powf(0.25)) * 2.0 + 1e-300;
                while white_dwarf_f(hi) < target {
                    hi *= 2.0;
                }
                let xi = crate::numeric::roots::bisect(|x| white_dwarf_f(x) - target, 0.0, hi, 0.0, 200).unwrap_or(hi);
                e.b * xi.powi(3)
            }
        }
    }

    /// Derivative of [`Self::density_from_slope`], i.e. `rho / P'(rho)`.
    pub fn density_from_slope_derivative(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self {
            EosSpec::Polytropic(e) => e.index() * e.density_from_slope(s) / s,
            EosSpec::WhiteDwarf(e) => {
                let t = s * e.b / (8.0 * e.a);
                // d/dt of B (t(2+t))^{3/2}
                e.b * 1.5 * (t * (2.0 + t)).sqrt() * (2.0 + 2.0 * t) * e.b / (8.0 * e.a)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::quad::integrate_adaptive;

    #[test]
    fn polytrope_rejects_bad_parameters() {
        assert!(EosSpec::polytropic(1.0, 1.0).is_err());
        assert!(EosSpec::polytropic(-1.0, 1.3).is_err());
        assert!(EosSpec::polytropic(1.0, 2.0).is_ok());
        assert!(EosSpec::white_dwarf(0.0, 1.0).is_err());
    }

    #[test]
    fn negative_density_is_an_error() {
        let e = EosSpec::polytropic(1.0, 1.3).unwrap();
        assert!(matches!(e.try_pressure(-1.0), Err(EosError::NegativeDensity(_))));
    }

    #[test]
    fn polytrope_enthalpy_closed_forms() {
        let e = EosSpec::polytropic(1.0, 1.3).unwrap();
        let rho = 0.7_f64;
        assert!((e.enthalpy(rho) - rho.powf(1.3) / 0.3).abs() < 1e-15);
        let s = e.enthalpy_derivative(rho);
        assert!((e.density_from_slope(s).unwrap() - rho).abs() < 1e-14);
    }

    #[test]
    fn white_dwarf_series_matches_closed_form_at_cutoff() {
        let below = XI_SERIES_CUTOFF * (1.0 - 1e-12);
        let above = XI_SERIES_CUTOFF;
        let f0 = white_dwarf_f(below);
        let f1 = white_dwarf_f(above);
        assert!(((f0 - f1) / f1).abs() < 1e-10);
        let p0 = white_dwarf_enthalpy_dimless(below);
        let p1 = white_dwarf_enthalpy_dimless(above);
        assert!(((p0 - p1) / p1).abs() < 1e-10);
    }

    #[test]
    fn white_dwarf_small_density_leading_terms() {
        let xi = 1e-3_f64;
        assert!((white_dwarf_f(xi) / xi.powi(5) - 1.6).abs() < 1e-6);
        assert!((white_dwarf_enthalpy_dimless(xi) / xi.powi(5) - 2.4).abs() < 1e-6);
    }

    #[test]
    fn white_dwarf_enthalpy_matches_quadrature_of_pressure_slope() {
        // Φ'(rho) = ∫_0^rho P'(s)/s ds
        let e = WhiteDwarfEos::new(1.3, 0.7).unwrap();
        let spec = EosSpec::from(e);
        for &rho in &[1e-4, 0.05, 0.7, 3.0, 50.0] {
            let (q, _) = integrate_adaptive(|s: f64| spec.pressure_derivative(s) / s, 0.0, rho, 1e-15, 1e-13, 4000);
            let d = spec.enthalpy_derivative(rho);
            assert!(((q - d) / d).abs() < 1e-10, "rho={rho} q={q} d={d}");
            let (phi, _) = integrate_adaptive(|s: f64| spec.enthalpy_derivative(s), 0.0, rho, 1e-18, 1e-13, 4000);
            assert!(((phi - spec.enthalpy(rho)) / phi).abs() < 1e-10);
        }
    }

    #[test]
    fn white_dwarf_relativistic_limit() {
        let e = WhiteDwarfEos::new(1.0, 2.0).unwrap();
        let rho: f64 = 1e12;
        let k = e.kappa() * rho.powf(4.0 / 3.0);
        // Leading corrections are O(1/xi) for Φ and O(1/xi²) for P.
        let xi = e.xi(rho);
        assert!((e.pressure(rho) / (2.0 * k) - 1.0).abs() < 2.0 / (xi * xi));
        assert!((e.enthalpy(rho) / (6.0 * k) - 1.0).abs() < 2.0 / xi);
    }

    #[test]
    fn white_dwarf_inverse_slope_and_derivative() {
        let spec = EosSpec::white_dwarf(2.0, 0.5).unwrap();
        for &rho in &[1e-6, 0.01, 1.0, 1e3] {
            let s = spec.enthalpy_derivative(rho);
            let back = spec.density_from_slope(s).unwrap();
            assert!(((back - rho) / rho).abs() < 1e-12);
            let h = s * 1e-6;
            let fd = (spec.density_from_slope(s + h).unwrap() - spec.density_from_slope(s - h).unwrap()) / (2.0 * h);
            let an = spec.density_from_slope_derivative(s);
            assert!(((fd - an) / an).abs() < 1e-7);
            assert!(((an - rho / spec.pressure_derivative(rho)) / an).abs() < 1e-10);
        }
    }

    #[test]
    fn pressure_inverse() {
        for spec in [
            EosSpec::polytropic(2.0, 1.4).unwrap(),
            EosSpec::white_dwarf(1.5, 0.3).unwrap(),
        ] {
            for &rho in &[1e-5, 0.2, 3.0, 1e4] {
                let back = spec.density_from_pressure(spec.pressure(rho));
                assert!(((back - rho) / rho).abs() < 1e-12, "{spec:?} {rho} {back}");
            }
        }
    }

    #[test]
    fn eos_json_round_trip() {
        let spec = EosSpec::polytropic(1.0, 1.3).unwrap();
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(s, r#"{"kind":"polytropic","K":1.0,"gamma":1.3}"#);
        let back: EosSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
    }
}
