//! Lagrangian integration of the spherically symmetric free-boundary
//! Euler-Poisson system in `n >= 3` dimensions.
//!
//! Cells carry fixed masses between edges `r_0 < r_1 < ... < r_N`; velocities
//! live on the edges. Edge `0` sits at the inner radius `a` and does not move.
//! The outer edge is the free boundary and sees zero pressure outside.
//! Gravity uses the exact enclosed mass, so no Poisson solve is needed.
//!
//! Inviscid runs (`epsilon = 0`) use a von Neumann-Richtmyer artificial
//! viscosity in compressing cells. For `epsilon > 0` the viscous force is
//! `epsilon ∂_r(rho div u) - epsilon (n-1) u ∂_r rho / r`, which is minus the
//! variation of `R = (epsilon/2) ∫ rho (u_r² + (n-1) u²/r²) dx`; it is
//! discretised through `R`, so the discrete viscous power is `-2R <= 0`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::criticality::{critical_constants, CriticalConstants, CriticalityError};
use crate::eos::{EosError, EosSpec};
use crate::geometry::{poisson_coupling, unit_ball_volume, unit_sphere_area};
use crate::lane_emden::{solve_star, solve_star_direct, LaneEmdenError};
use crate::profile::{uniform_grid, ProfileError, RadialProfile, VelocityProfile, MIN_INTERVALS};

pub const CFL: f64 = 0.4;
pub const FREE_FALL_FRACTION: f64 = 0.1;
pub const AV_QUADRATIC: f64 = 2.0;
pub const AV_LINEAR: f64 = 0.1;
/// Steps shorter than this fraction of the initial dynamical time halt a run.
pub const DT_COLLAPSE_FRACTION: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HydroError {
    #[error("at least {min} cells are required, got {got}")]
    TooFewCells { min: usize, got: usize },
    #[error("initial profile has no mass")]
    ZeroMass,
    #[error("inner radius {a} is not inside the support radius {support}")]
    InnerRadius { a: f64, support: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("time step collapsed to {dt} at t = {time}")]
    DtCollapse { time: f64, dt: f64 },
    #[error("hydrostatic relaxation failed: {0}")]
    Relaxation(String),
    #[error(transparent)]
    Eos(#[from] EosError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    LaneEmden(#[from] LaneEmdenError),
    #[error(transparent)]
    Criticality(#[from] CriticalityError),
    #[error("cannot read {path}: {message}")]
    Input { path: String, message: String },
}

/// How the initial mass is split into cells.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    #[default]
    EqualMass,
    UniformRadius,
    /// Cell `k` ends at mass fraction `1 - (1 - k/N)^3`, so cell masses shrink
    /// quadratically toward the surface.
    SurfaceRefined,
}

/// Lagrangian fluid state.
#[derive(Debug, Clone)]
pub struct FluidState {
    pub dim: usize,
    pub time: f64,
    pub cell_masses: Vec<f64>,
    pub edge_radii: Vec<f64>,
    pub edge_velocities: Vec<f64>,
    pub cell_densities: Vec<f64>,
    pub eos: EosSpec,
    pub epsilon: f64,
    pub inner_radius: f64,
    /// Reference time scale `1/sqrt(c_n rho_max)` of the initial state.
    pub time_scale: f64,
    pub steps: u64,
    node_masses: Vec<f64>,
    enclosed: Vec<f64>,
    accel: Vec<f64>,
}

/// Builds the initial Lagrangian state from a density and velocity profile.
pub fn init_state(
    rho0: &RadialProfile,
    u0: Option<&VelocityProfile>,
    eos: &EosSpec,
    epsilon: f64,
    a: f64,
    cells: usize,
    partition: Partition,
) -> Result<FluidState, HydroError> {
    eos.validate()?;
    if cells < MIN_INTERVALS {
        return Err(HydroError::TooFewCells {
            min: MIN_INTERVALS,
            got: cells,
        });
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(HydroError::InvalidParameter(format!(
            "epsilon must be nonnegative, got {epsilon}"
        )));
    }
    if let Some(u) = u0 {
        if u.dim() != rho0.dim() {
            return Err(ProfileError::DimensionMismatch(rho0.dim(), u.dim()).into());
        }
    }
    let support = rho0.support_radius();
    if !(a >= 0.0) || a >= support {
        return Err(HydroError::InnerRadius { a, support });
    }
    let dim = rho0.dim();
    let m_inner = rho0.enclosed_mass(a);
    let total = rho0.enclosed_mass(support);
    if !(total - m_inner > 0.0) {
        return Err(HydroError::ZeroMass);
    }
    let (edges, masses) = match partition {
        Partition::EqualMass | Partition::SurfaceRefined => {
            let span = total - m_inner;
            let fraction = |k: usize| {
                let x = k as f64 / cells as f64;
                match partition {
                    Partition::SurfaceRefined => 1.0 - (1.0 - x).powi(3),
                    _ => x,
                }
            };
            let targets: Vec<f64> = (1..cells).map(|k| m_inner + span * fraction(k)).collect();
            let mut edges = vec![a];
            edges.extend(rho0.radii_enclosing(&targets));
            edges.push(support);
            let masses = (0..cells).map(|k| span * (fraction(k + 1) - fraction(k))).collect();
            (edges, masses)
        }
        Partition::UniformRadius => {
            let edges: Vec<f64> = uniform_grid(support - a, cells).into_iter().map(|r| r + a).collect();
            let m: Vec<f64> = edges.iter().map(|&r| rho0.enclosed_mass(r)).collect();
            let masses = m.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
            (edges, masses)
        }
    };
    for i in 1..edges.len() {
        if !(edges[i] > edges[i - 1]) {
            return Err(HydroError::InvalidParameter(
                "initial density has interior vacuum; cells cannot be placed".into(),
            ));
        }
    }
    let velocities = edges
        .iter()
        .enumerate()
        .map(|(i, &r)| if i == 0 { 0.0 } else { u0.map_or(0.0, |u| u.value_at(r)) })
        .collect();
    let mut state = FluidState {
        dim,
        time: 0.0,
        cell_masses: masses,
        edge_radii: edges,
        edge_velocities: velocities,
        cell_densities: Vec::new(),
        eos: *eos,
        epsilon,
        inner_radius: a,
        time_scale: 0.0,
        steps: 0,
        node_masses: Vec::new(),
        enclosed: Vec::new(),
        accel: Vec::new(),
    };
    state.refresh_mass_tables();
    state.cell_densities = state.densities_for(&state.edge_radii);
    let rho_max = state.cell_densities.iter().cloned().fold(0.0, f64::max);
    state.time_scale = 1.0 / (poisson_coupling(dim) * rho_max).sqrt();
    state.accel = state.acceleration(&state.edge_radii, &state.edge_velocities);
    Ok(state)
}

impl FluidState {
    pub fn cells(&self) -> usize {
        self.cell_masses.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.cell_masses.iter().sum()
    }

    pub fn outer_radius(&self) -> f64 {
        *self.edge_radii.last().unwrap()
    }

    /// Current edge accelerations.
    pub fn accelerations(&self) -> &[f64] {
        &self.accel
    }

    fn refresh_mass_tables(&mut self) {
        let n = self.cells();
        let mut node = vec![0.0; n + 1];
        let mut enclosed = vec![0.0; n + 1];
        for j in 0..n {
            node[j] += 0.5 * self.cell_masses[j];
            node[j + 1] += 0.5 * self.cell_masses[j];
            enclosed[j + 1] = enclosed[j] + self.cell_masses[j];
        }
        self.node_masses = node;
        self.enclosed = enclosed;
    }

    fn densities_for(&self, r: &[f64]) -> Vec<f64> {
        let bn = unit_ball_volume(self.dim);
        let n = self.dim as i32;
        (0..self.cells())
            .map(|j| self.cell_masses[j] / (bn * (r[j + 1].powi(n) - r[j].powi(n))))
            .collect()
    }

    /// Edge accelerations for edge radii `r` and velocities `u`.
    fn acceleration(&self, r: &[f64], u: &[f64]) -> Vec<f64> {
        let cells = self.cells();
        let n = self.dim as i32;
        let nf = self.dim as f64;
        let area = unit_sphere_area(self.dim);
        let rho = self.densities_for(r);
        let mut p_eff = vec![0.0; cells + 1];
        for j in 0..cells {
            let mut p = self.eos.pressure(rho[j]);
            if self.epsilon == 0.0 {
                let du = u[j + 1] - u[j];
                if du < 0.0 {
                    let c = self.eos.sound_speed(rho[j]);
                    p += rho[j] * (AV_QUADRATIC * du * du + AV_LINEAR * c * (-du));
                }
            }
            p_eff[j] = p;
        }
        let mut force = vec![0.0; cells + 1];
        for j in 1..=cells {
            let rn1 = r[j].powi(n - 1);
            let p_out = if j < cells { p_eff[j] } else { 0.0 };
            force[j] = area * rn1 * (p_eff[j - 1] - p_out) - (nf - 2.0) * self.enclosed[j] * self.node_masses[j] / rn1;
        }
        if self.epsilon > 0.0 {
            let eps = self.epsilon;
            for j in 0..cells {
                let dr = r[j + 1] - r[j];
                let shear = eps * self.cell_masses[j] * (u[j + 1] - u[j]) / (dr * dr);
                force[j] += shear;
                force[j + 1] -= shear;
                let hoop = 0.5 * eps * self.cell_masses[j] * (nf - 1.0);
                for k in [j, j + 1] {
                    if r[k] > 0.0 {
                        force[k] -= hoop * u[k] / (r[k] * r[k]);
                    }
                }
            }
        }
        let mut acc: Vec<f64> = force.iter().zip(&self.node_masses).map(|(f, m)| f / m).collect();
        acc[0] = 0.0;
        acc
    }

    /// Largest stable step for the current state.
    pub fn stable_dt(&self) -> f64 {
        let r = &self.edge_radii;
        let u = &self.edge_velocities;
        let mut dt = f64::INFINITY;
        let mut rho_max = 0.0f64;
        for j in 0..self.cells() {
            let dr = r[j + 1] - r[j];
            let du = u[j + 1] - u[j];
            let rho = self.cell_densities[j];
            rho_max = rho_max.max(rho);
            let signal = self.eos.sound_speed(rho) + du.abs() + 2.0 * AV_QUADRATIC * (-du).max(0.0);
            if signal > 0.0 {
                dt = dt.min(CFL * dr / signal);
            }
            if self.epsilon > 0.0 {
                dt = dt.min(0.2 * dr * dr / (self.epsilon * self.dim as f64));
            }
        }
        if rho_max > 0.0 {
            dt = dt.min(FREE_FALL_FRACTION / (poisson_coupling(self.dim) * rho_max).sqrt());
        }
        dt
    }

    /// Advances by one kick-drift-kick step of at most `dt_cap`; returns the
    /// step taken. Failed attempts (crossed edges, non-finite values) are
    /// retried with half the step; once the step drops below
    /// [`DT_COLLAPSE_FRACTION`] of the time scale the state is left untouched
    /// and [`HydroError::DtCollapse`] is returned.
    pub fn step(&mut self, dt_cap: f64) -> Result<f64, HydroError> {
        let mut dt = self.stable_dt().min(dt_cap);
        let floor = DT_COLLAPSE_FRACTION * self.time_scale;
        let nodes = self.edge_radii.len();
        loop {
            if !(dt >= floor) {
                return Err(HydroError::DtCollapse { time: self.time, dt });
            }
            let mut u_half = vec![0.0; nodes];
            let mut r_new = vec![0.0; nodes];
            for i in 0..nodes {
                u_half[i] = if i == 0 {
                    0.0
                } else {
                    self.edge_velocities[i] + 0.5 * dt * self.accel[i]
                };
                r_new[i] = self.edge_radii[i] + dt * u_half[i];
            }
            let ordered =
                r_new[0] >= 0.0 && r_new.windows(2).all(|w| w[1] > w[0]) && r_new.iter().all(|x| x.is_finite());
            if !ordered {
                dt *= 0.5;
                continue;
            }
            let acc = self.acceleration(&r_new, &u_half);
            let u_new: Vec<f64> = u_half.iter().zip(&acc).map(|(v, a)| v + 0.5 * dt * a).collect();
            if !u_new.iter().chain(acc.iter()).all(|x| x.is_finite()) {
                dt *= 0.5;
                continue;
            }
            self.cell_densities = self.densities_for(&r_new);
            self.edge_radii = r_new;
            self.edge_velocities = u_new;
            self.accel = acc;
            self.time += dt;
            self.steps += 1;
            return Ok(dt);
        }
    }

    /// Solves for edge radii in exact discrete force balance, keeping the cell
    /// masses, then zeroes the velocities.
    ///
    /// The radii are marched outward from the inner edge for a trial central
    /// density, and that density is bisected until the outer edge balances
    /// against vacuum.
    pub fn relax_hydrostatic(&mut self) -> Result<(), HydroError> {
        let base = self.cell_densities[0];
        let march = |rho0: f64| -> (f64, Vec<f64>) { self.march_hydrostatic(rho0) };
        let (mut lo, mut hi) = (base, base);
        let s0 = march(base).0.signum();
        let mut found = false;
        for _ in 0..80 {
            lo *= 0.8;
            hi *= 1.25;
            if march(lo).0.signum() != s0 {
                hi = lo / 0.8;
                found = true;
                break;
            }
            if march(hi).0.signum() != s0 {
                lo = hi / 1.25;
                found = true;
                break;
            }
        }
        if !found {
            return Err(HydroError::Relaxation(
                "no sign change of the outer force balance".into(),
            ));
        }
        let s_lo = march(lo).0.signum();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if march(mid).0.signum() == s_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (_, radii) = march(0.5 * (lo + hi));
        if radii.len() != self.edge_radii.len() {
            return Err(HydroError::Relaxation(
                "marching terminated before the outer edge".into(),
            ));
        }
        self.edge_radii = radii;
        self.edge_velocities.iter_mut().for_each(|u| *u = 0.0);
        self.cell_densities = self.densities_for(&self.edge_radii);
        let rho_max = self.cell_densities.iter().cloned().fold(0.0, f64::max);
        self.time_scale = 1.0 / (poisson_coupling(self.dim) * rho_max).sqrt();
        self.accel = self.acceleration(&self.edge_radii, &self.edge_velocities);
        Ok(())
    }

    /// Returns the normalised outer residual (negative when pressure runs out
    /// early) and the radii reached.
    fn march_hydrostatic(&self, rho0: f64) -> (f64, Vec<f64>) {
        let cells = self.cells();
        let n = self.dim as i32;
        let nf = self.dim as f64;
        let bn = unit_ball_volume(self.dim);
        let area = unit_sphere_area(self.dim);
        let mut radii = vec![self.inner_radius];
        let mut rho = rho0;
        let mut p = self.eos.pressure(rho);
        for j in 0..cells {
            let r_in = radii[j];
            let r_out = (r_in.powi(n) + self.cell_masses[j] / (bn * rho)).powf(1.0 / nf);
            radii.push(r_out);
            let g = (nf - 2.0) * self.enclosed[j + 1] * self.node_masses[j + 1] / (area * r_out.powi(2 * n - 2));
            if j + 1 == cells {
                return ((p - g) / p, radii);
            }
            p -= g;
            if p <= 0.0 {
                return (-1.0 - (cells - j) as f64, radii);
            }
            rho = self.eos.density_from_pressure(p);
        }
        unreachable!("loop returns at the outer edge")
    }

    /// Density profile of the current state (cell values at cell centres in volume).
    pub fn density_profile(&self) -> Result<RadialProfile, ProfileError> {
        let n = self.dim as i32;
        let inv = 1.0 / self.dim as f64;
        let mut radii = vec![0.0];
        let mut values = vec![self.cell_densities[0]];
        for j in 0..self.cells() {
            let mid = (0.5 * (self.edge_radii[j].powi(n) + self.edge_radii[j + 1].powi(n))).powf(inv);
            if mid > 0.0 {
                radii.push(mid);
                values.push(self.cell_densities[j]);
            }
        }
        radii.push(self.outer_radius());
        values.push(*self.cell_densities.last().unwrap());
        RadialProfile::new(self.dim, radii, values)
    }
}

/// Energy and virial quantities of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub kinetic: f64,
    pub internal: f64,
    /// `-½ D` in discrete form.
    pub potential: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    pub s_mu: Option<f64>,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "Hp")]
    pub hp: f64,
    #[serde(rename = "Hpp")]
    pub hpp: f64,
    pub bound_residual: f64,
    pub q_lower_bound: Option<f64>,
    pub blowup_indicator: f64,
}

/// Critical constants and central density used for the variational diagnostics.
#[derive(Debug, Clone)]
pub struct ReferenceLevel {
    pub consts: CriticalConstants,
    pub mu: f64,
}

/// Evaluates the diagnostics of a state. `bound_residual` is left at zero;
/// [`run`] fills it once the reference values are known.
pub fn diagnostics(state: &FluidState, reference: Option<&ReferenceLevel>) -> DiagnosticsRecord {
    let n = state.dim as i32;
    let nf = state.dim as f64;
    let bn = unit_ball_volume(state.dim);
    let area = unit_sphere_area(state.dim);
    let r = &state.edge_radii;
    let u = &state.edge_velocities;
    let mut kinetic2 = 0.0;
    let mut h = 0.0;
    let mut hp = 0.0;
    let mut potential = 0.0;
    for i in 0..r.len() {
        let m = state.node_masses[i];
        kinetic2 += m * u[i] * u[i];
        h += 0.5 * m * r[i] * r[i];
        hp += m * r[i] * u[i];
        if i > 0 {
            potential -= m * state.enclosed[i] / r[i].powi(n - 2);
        }
    }
    let mut internal = 0.0;
    let mut pressure = 0.0;
    let mut lgamma = 0.0;
    let mut blowup = 0.0;
    for j in 0..state.cells() {
        let vol = bn * (r[j + 1].powi(n) - r[j].powi(n));
        let rho = state.cell_densities[j];
        internal += vol * state.eos.enthalpy(rho);
        pressure += vol * state.eos.pressure(rho);
        if let Some(p) = state.eos.as_polytrope() {
            lgamma += vol * rho.powf(p.gamma);
        }
        if j > 0 {
            let d = rho.sqrt() - state.cell_densities[j - 1].sqrt();
            let dr = 0.5 * (r[j + 1] - r[j - 1]);
            blowup += area * r[j].powi(n - 1) * d * d / dr;
        }
    }
    let mass = state.total_mass();
    let q = nf * pressure + (nf - 2.0) * potential;
    let (s_mu, q_lower_bound) = match (reference, state.eos.as_polytrope()) {
        (Some(rf), Some(p)) if state.dim == 3 => {
            let s = rf
                .consts
                .boundary_potential(rf.mu)
                .ok()
                .map(|v| internal + potential - v * mass);
            let d = -2.0 * potential;
            let lambda_star = (2.0 * nf * p.k * lgamma / ((nf - 2.0) * d)).powf(1.0 / (2.0 * nf - 2.0 - nf * p.gamma));
            let bound = match (s, rf.consts.level(rf.mu).ok()) {
                (Some(s), Some(l)) if lambda_star > 1.0 => Some(((l - s) / (lambda_star - 1.0)).max(0.0)),
                _ => None,
            };
            (s, bound)
        }
        _ => (None, None),
    };
    DiagnosticsRecord {
        t: state.time,
        r: state.outer_radius(),
        m: mass,
        e: 0.5 * kinetic2 + internal + potential,
        kinetic: 0.5 * kinetic2,
        internal,
        potential,
        q,
        s_mu,
        h,
        hp,
        hpp: kinetic2 + q,
        bound_residual: 0.0,
        q_lower_bound,
        blowup_indicator: blowup,
    }
}

/// `R² - [c t² / M + 2 H'(0) t / M + 2 H(0) / M]`.
pub fn expansion_bound_residual(record: &DiagnosticsRecord, coefficient: f64, hp0: f64, h0: f64) -> f64 {
    let m = record.m;
    let t = record.t;
    record.r * record.r - (coefficient / m * t * t + 2.0 * hp0 / m * t + 2.0 * h0 / m)
}

/// Initial density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// Stationary star of central density `mu`, optionally multiplied by `amplitude`.
    LaneEmden {
        mu: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Stationary star dilated by `lambda` (mass preserving).
    ScaledLaneEmden {
        mu: f64,
        lambda: f64,
    },
    UniformBall {
        density: f64,
        radius: f64,
    },
    /// `central_density (1 - r²/radius²)^exponent`.
    PowerCap {
        central_density: f64,
        radius: f64,
        exponent: f64,
    },
    /// Profile CSV with columns `r,rho[,u]`; relative paths resolve against the config file.
    Csv {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

/// Initial velocity.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocitySpec {
    #[default]
    Zero,
    /// `u(r) = amplitude r / R` (outflow when positive, inflow when negative).
    Homologous { amplitude: f64 },
    /// Velocity column `u` of a profile CSV.
    Csv { path: PathBuf },
}

/// Where the CLI writes run outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub csv: PathBuf,
    #[serde(default)]
    pub manifest: Option<PathBuf>,
}

fn default_dim() -> usize {
    3
}

/// Complete description of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub eos: EosSpec,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub initial_profile: ProfileSpec,
    #[serde(default)]
    pub velocity: VelocitySpec,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub inner_radius: f64,
    pub cells: usize,
    #[serde(default)]
    pub partition: Partition,
    /// Replace the sampled initial radii by an exact discrete equilibrium.
    #[serde(default)]
    pub hydrostatic_start: bool,
    pub t_end: f64,
    pub output_interval: f64,
    #[serde(default)]
    pub max_steps: Option<u64>,
    /// Central density of the reference star for the variational diagnostics;
    /// defaults to the optimal one for the initial mass.
    #[serde(default)]
    pub reference_mu: Option<f64>,
    #[serde(default)]
    pub output: Option<OutputPaths>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), HydroError> {
        self.eos.validate()?;
        let bad = |m: String| Err(HydroError::InvalidParameter(m));
        if self.dim < 3 {
            return bad(format!("dim must be at least 3, got {}", self.dim));
        }
        if self.cells < MIN_INTERVALS {
            return Err(HydroError::TooFewCells {
                min: MIN_INTERVALS,
                got: self.cells,
            });
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be nonnegative, got {}", self.t_end));
        }
        if !(self.output_interval > 0.0 && self.output_interval.is_finite()) {
            return bad(format!(
                "output_interval must be positive, got {}",
                self.output_interval
            ));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be nonnegative, got {}", self.epsilon));
        }
        if !(self.inner_radius >= 0.0 && self.inner_radius.is_finite()) {
            return bad(format!("inner_radius must be nonnegative, got {}", self.inner_radius));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                bad(format!("{name} must be positive, got {v}"))
            }
        };
        match &self.initial_profile {
            ProfileSpec::LaneEmden { mu, amplitude } => {
                positive("mu", *mu)?;
                positive("amplitude", *amplitude)?;
            }
            ProfileSpec::ScaledLaneEmden { mu, lambda } => {
                positive("mu", *mu)?;
                positive("lambda", *lambda)?;
            }
            ProfileSpec::UniformBall { density, radius } => {
                positive("density", *density)?;
                positive("radius", *radius)?;
            }
            ProfileSpec::PowerCap {
                central_density,
                radius,
                exponent,
            } => {
                positive("central_density", *central_density)?;
                positive("radius", *radius)?;
                positive("exponent", *exponent)?;
            }
            ProfileSpec::Csv { .. } => {}
        }
        if let Some(mu) = self.reference_mu {
            positive("reference_mu", mu)?;
        }
        Ok(())
    }

    fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
        match base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Initial density and velocity profiles; relative CSV paths resolve against `base`.
    pub fn initial_profiles(
        &self,
        base: Option<&Path>,
    ) -> Result<(RadialProfile, Option<VelocityProfile>), HydroError> {
        let dim = self.dim;
        let star = |mu: f64| {
            if dim == 3 {
                solve_star(&self.eos, mu)
            } else {
                solve_star_direct(&self.eos, mu, dim)
            }
        };
        let intervals = self.cells.max(1024) * 4;
        let rho = match &self.initial_profile {
            ProfileSpec::LaneEmden { mu, amplitude } => star(*mu)?.profile.amplified(*amplitude),
            ProfileSpec::ScaledLaneEmden { mu, lambda } => star(*mu)?.profile.scaled(*lambda),
            ProfileSpec::UniformBall { density, radius } => {
                RadialProfile::from_fn(dim, uniform_grid(*radius, intervals), |_| *density)?
            }
            ProfileSpec::PowerCap {
                central_density,
                radius,
                exponent,
            } => RadialProfile::from_fn(dim, uniform_grid(*radius, intervals), |r| {
                central_density * (1.0 - (r / radius).powi(2)).max(0.0).powf(*exponent)
            })?,
            ProfileSpec::Csv { path } => {
                let path = Self::resolve(base, path);
                crate::io::read_profile_csv(&path, dim)
                    .map_err(|e| HydroError::Input {
                        path: path.display().to_string(),
                        message: e.to_string(),
                    })?
                    .0
            }
        };
        let u = match &self.velocity {
            VelocitySpec::Zero => None,
            VelocitySpec::Homologous { amplitude } => {
                let big_r = rho.support_radius();
                Some(VelocityProfile::from_fn(dim, rho.radii().to_vec(), |r| {
                    amplitude * r / big_r
                })?)
            }
            VelocitySpec::Csv { path } => {
                let path = Self::resolve(base, path);
                let (_, u) = crate::io::read_profile_csv(&path, dim).map_err(|e| HydroError::Input {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                Some(u.ok_or_else(|| HydroError::Input {
                    path: path.display().to_string(),
                    message: "no velocity column".into(),
                })?)
            }
        };
        Ok((rho, u))
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    MaxSteps,
    DtCollapse,
}

/// Which quadratic lower bound the residual column tracks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum BoundForm {
    /// `(n-2) E_0`.
    Energy { coefficient: f64 },
    /// Minimum over the run of the virial lower bound.
    Lambda { coefficient: f64 },
}

/// Time series and end state of a run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: FluidState,
    pub termination: Termination,
    pub bound: BoundForm,
    /// `max |E(t) - E(0)| / |E(0)|` over every step.
    pub max_energy_drift: f64,
    /// `max |M(t) - M(0)| / M(0)` over every step.
    pub max_mass_drift: f64,
    pub reference_mu: Option<f64>,
}

/// Runs a configuration; relative CSV paths resolve against `base`.
pub fn run(config: &RunConfig, base: Option<&Path>) -> Result<RunOutput, HydroError> {
    config.validate()?;
    let (rho, u) = config.initial_profiles(base)?;
    let mut state = init_state(
        &rho,
        u.as_ref(),
        &config.eos,
        config.epsilon,
        config.inner_radius,
        config.cells,
        config.partition,
    )?;
    if config.hydrostatic_start {
        state.relax_hydrostatic()?;
    }
    run_state(state, config)
}

/// Runs from an already initialised state.
pub fn run_state(mut state: FluidState, config: &RunConfig) -> Result<RunOutput, HydroError> {
    let reference = match state.eos.as_polytrope() {
        Some(p) if state.dim == 3 && p.gamma > 1.2 && p.gamma < 4.0 / 3.0 - crate::criticality::GAMMA_CRITICAL_TOL => {
            let consts = critical_constants(p.k, p.gamma)?;
            let mu = match config.reference_mu {
                Some(mu) => mu,
                None => consts.optimal_mu(state.total_mass())?,
            };
            Some(ReferenceLevel { consts, mu })
        }
        _ => None,
    };
    let first = diagnostics(&state, reference.as_ref());
    let (e0, m0, h0, hp0) = (first.e, first.m, first.h, first.hp);
    let mut records = vec![first];
    let mut max_energy_drift = 0.0f64;
    let mut max_mass_drift = 0.0f64;
    let mut termination = Termination::Completed;
    let mut next_output = 1u64;
    let energy_of = |s: &FluidState| diagnostics(s, None);
    while state.time < config.t_end {
        if let Some(limit) = config.max_steps {
            if state.steps >= limit {
                termination = Termination::MaxSteps;
                break;
            }
        }
        let target = (next_output as f64 * config.output_interval).min(config.t_end);
        match state.step(target - state.time) {
            Ok(_) => {}
            Err(HydroError::DtCollapse { .. }) => {
                termination = Termination::DtCollapse;
                break;
            }
            Err(e) => return Err(e),
        }
        let d = energy_of(&state);
        if e0 != 0.0 {
            max_energy_drift = max_energy_drift.max(((d.e - e0) / e0).abs());
        }
        max_mass_drift = max_mass_drift.max(((d.m - m0) / m0).abs());
        // Snap to the output time when the step landed on it up to rounding.
        if state.time >= target * (1.0 - 1e-12) {
            if (state.time - target).abs() <= 1e-12 * target.max(1.0) {
                state.time = target;
            }
            records.push(diagnostics(&state, reference.as_ref()));
            next_output += 1;
        }
    }
    if records.last().map(|r| r.t) != Some(state.time) {
        records.push(diagnostics(&state, reference.as_ref()));
    }
    let nf = state.dim as f64;
    let bound = match &reference {
        Some(_) => BoundForm::Lambda {
            coefficient: records
                .iter()
                .map(|r| r.q_lower_bound.unwrap_or(0.0))
                .fold(f64::INFINITY, f64::min),
        },
        None => BoundForm::Energy {
            coefficient: (nf - 2.0) * e0,
        },
    };
    let coefficient = match bound {
        BoundForm::Energy { coefficient } | BoundForm::Lambda { coefficient } => coefficient,
    };
    for r in &mut records {
        r.bound_residual = expansion_bound_residual(r, coefficient, hp0, h0);
    }
    Ok(RunOutput {
        records,
        final_state: state,
        termination,
        bound,
        max_energy_drift,
        max_mass_drift,
        reference_mu: reference.map(|r| r.mu),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball_state(cells: usize) -> FluidState {
        let rho = RadialProfile::from_fn(3, uniform_grid(1.0, 64), |_| 1.0).unwrap();
        let eos = EosSpec::polytropic(1.0, 5.0 / 3.0).unwrap();
        init_state(&rho, None, &eos, 0.0, 0.0, cells, Partition::EqualMass).unwrap()
    }

    #[test]
    fn rejects_small_cell_counts_and_bad_inner_radius() {
        let rho = RadialProfile::from_fn(3, uniform_grid(1.0, 64), |_| 1.0).unwrap();
        let eos = EosSpec::polytropic(1.0, 1.3).unwrap();
        assert!(matches!(
            init_state(&rho, None, &eos, 0.0, 0.0, 1, Partition::EqualMass),
            Err(HydroError::TooFewCells { .. })
        ));
        assert!(matches!(
            init_state(&rho, None, &eos, 0.0, 1.0, 32, Partition::EqualMass),
            Err(HydroError::InnerRadius { .. })
        ));
        let empty = RadialProfile::from_fn(3, uniform_grid(1.0, 64), |_| 0.0).unwrap();
        assert!(init_state(&empty, None, &eos, 0.0, 0.0, 32, Partition::EqualMass).is_err());
    }

    #[test]
    fn equal_mass_partition_of_uniform_ball() {
        let s = ball_state(32);
        let m = 4.0 * std::f64::consts::PI / 3.0;
        assert!((s.total_mass() - m).abs() < 1e-13);
        for &rho in &s.cell_densities {
            assert!((rho - 1.0).abs() < 1e-9);
        }
        let d = diagnostics(&s, None);
        assert_eq!(d.hp, 0.0);
        assert!((d.r * d.r - 2.0 * d.h / d.m) >= 0.0);
    }

    #[test]
    fn discrete_virial_identity_holds_for_critical_exponent() {
        // For gamma = (2n-2)/n the assembled H'' equals (n-2)E + (4-n)/2 Σ m u².
        let n = 5usize;
        let rho = RadialProfile::from_fn(n, uniform_grid(1.0, 64), |r| 1.0 - 0.5 * r * r).unwrap();
        let u = VelocityProfile::from_fn(n, uniform_grid(1.0, 64), |r| 0.3 * r).unwrap();
        let eos = EosSpec::polytropic(0.7, 8.0 / 5.0).unwrap();
        let s = init_state(&rho, Some(&u), &eos, 0.0, 0.0, 40, Partition::EqualMass).unwrap();
        let d = diagnostics(&s, None);
        let nf = n as f64;
        let expected = (nf - 2.0) * d.e + (4.0 - nf) / 2.0 * 2.0 * d.kinetic;
        assert!((d.hpp - expected).abs() < 1e-12 * d.hpp.abs().max(1.0));
    }

    #[test]
    fn viscous_force_dissipates() {
        let rho = RadialProfile::from_fn(3, uniform_grid(1.0, 64), |r| 1.0 - 0.5 * r * r).unwrap();
        let u = VelocityProfile::from_fn(3, uniform_grid(1.0, 64), |r| (3.0 * r).sin()).unwrap();
        let eos = EosSpec::polytropic(1.0, 1.3).unwrap();
        let inviscid = init_state(&rho, Some(&u), &eos, 0.0, 0.0, 32, Partition::EqualMass).unwrap();
        let viscous = init_state(&rho, Some(&u), &eos, 1e-2, 0.0, 32, Partition::EqualMass).unwrap();
        let power: f64 = (0..=32)
            .map(|i| {
                let dv = viscous.accelerations()[i] - inviscid.accelerations()[i];
                viscous.node_masses[i] * dv * viscous.edge_velocities[i]
            })
            .sum();
        assert!(power < 0.0);
    }

    #[test]
    fn mass_is_exactly_conserved_by_steps() {
        let mut s = ball_state(32);
        let m0 = s.total_mass();
        for _ in 0..50 {
            s.step(f64::INFINITY).unwrap();
        }
        assert_eq!(s.total_mass(), m0);
        assert!(s.outer_radius() > 1.0);
    }

    #[test]
    fn empty_time_range_gives_one_record() {
        let cfg = RunConfig {
            eos: EosSpec::polytropic(1.0, 5.0 / 3.0).unwrap(),
            dim: 3,
            initial_profile: ProfileSpec::UniformBall {
                density: 1.0,
                radius: 1.0,
            },
            velocity: VelocitySpec::Zero,
            epsilon: 0.0,
            inner_radius: 0.0,
            cells: 16,
            partition: Partition::EqualMass,
            hydrostatic_start: false,
            t_end: 0.0,
            output_interval: 0.1,
            max_steps: None,
            reference_mu: None,
            output: None,
        };
        let out = run(&cfg, None).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.termination, Termination::Completed);
        assert!(out.records[0].bound_residual >= 0.0);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let txt = r#"{"eos":{"kind":"polytropic","K":1,"gamma":1.3},"initial_profile":{"kind":"lane_emden","mu":1},
            "cells":64,"t_end":1,"output_interval":0.1,"bogus":1}"#;
        assert!(serde_json::from_str::<RunConfig>(txt).is_err());
        let ok = txt.replace(r#","bogus":1"#, "");
        let cfg: RunConfig = serde_json::from_str(&ok).unwrap();
        assert_eq!(cfg.dim, 3);
        assert!(cfg.validate().is_ok());
    }
}
