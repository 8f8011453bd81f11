//! Critical-mass criteria for self-gravitating compressible fluids.
//!
//! Gravitational units are normalised so that the potential of a density
//! `rho` in three dimensions is `V = -∫ rho(y) / |x - y| dy` and satisfies
//! `ΔV = 4π rho`. In `n ≥ 4` dimensions the kernel is `|x - y|^{2-n}` and the
//! Poisson coupling is `n (n - 2) |B_1|` with `|B_1|` the unit-ball volume.
//!
//! The numerical kernels in [`numeric`] are generic over the scalar type;
//! the physics modules work in `f64`.

// Negated float comparisons are used on purpose so that NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criticality;
pub mod eos;
pub mod functionals;
pub mod geometry;
pub mod hydro;
pub mod io;
pub mod lane_emden;
pub mod numeric;
pub mod profile;
pub mod white_dwarf;

/// Scalar used by the physics modules.
pub type Scalar = f64;
/// Dense ODE trajectory over a two-component state.
pub type Trajectory2 = numeric::ode::Trajectory<Scalar, 2>;
/// Dormand-Prince settings in the physics scalar.
pub type Integrator = numeric::ode::Dopri5<Scalar>;
/// Gauss-Legendre rule in the physics scalar.
pub type GaussRule = numeric::quad::GaussLegendre<Scalar>;

pub use criticality::{CriticalConstants, MembershipVerdict};
pub use eos::{EosSpec, PolytropicEos, WhiteDwarfEos};
pub use functionals::FunctionalReport;
pub use hydro::{FluidState, RunConfig};
pub use lane_emden::{DimensionlessSolution, StarSolution};
pub use profile::{RadialProfile, VelocityProfile};
