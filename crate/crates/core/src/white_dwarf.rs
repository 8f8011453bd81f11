//! Ideal white dwarfs: the mass-central-density curve, its supremum, and a
//! lower bound on the support of non-collapsing states below that supremum.

use serde::{Deserialize, Serialize};

use crate::criticality::{chandrasekhar_constants, CriticalityError};
use crate::eos::{white_dwarf_enthalpy_dimless, EosError, EosSpec, WhiteDwarfEos};
use crate::functionals::{evaluate, FunctionalError};
use crate::lane_emden::{solve_star, LaneEmdenError};
use crate::profile::{RadialProfile, VelocityProfile};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WhiteDwarfError {
    #[error(transparent)]
    Eos(#[from] EosError),
    #[error("central densities must be positive and strictly increasing")]
    InvalidGrid,
    #[error("white dwarf states live in three dimensions, got {0}")]
    Dimension(usize),
    #[error(transparent)]
    Criticality(#[from] CriticalityError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
}

/// One sample of the mass curve; failed solves leave a gap with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub mu: f64,
    pub mass: Option<f64>,
    pub radius: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassCurve {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub points: Vec<CurvePoint>,
    pub limit_mass: f64,
}

impl MassCurve {
    /// Whether the computed masses increase strictly along the grid (gaps skipped).
    pub fn is_strictly_increasing(&self) -> bool {
        let masses: Vec<f64> = self.points.iter().filter_map(|p| p.mass).collect();
        masses.windows(2).all(|w| w[1] > w[0])
    }

    /// Largest computed mass.
    pub fn max_mass(&self) -> Option<f64> {
        self.points
            .iter()
            .filter_map(|p| p.mass)
            .fold(None, |acc, m| Some(acc.map_or(m, |a: f64| a.max(m))))
    }
}

/// `(12 A B^{-4/3} / C_min)^{3/2}`, the Chandrasekhar mass of the relativistic
/// limit `P ~ 2 A B^{-4/3} rho^{4/3}`.
pub fn limit_mass(eos: &WhiteDwarfEos) -> Result<f64, WhiteDwarfError> {
    eos.validate()?;
    let kappa = eos.kappa();
    let consts = chandrasekhar_constants(2.0 * kappa)?;
    let c_min = consts.c_min.expect("critical branch sets C_min");
    Ok((12.0 * kappa / c_min).powf(1.5))
}

fn solve_point(eos: &EosSpec, mu: f64) -> CurvePoint {
    match solve_star(eos, mu) {
        Ok(star) => CurvePoint {
            mu,
            mass: Some(star.mass),
            radius: Some(star.radius),
            error: None,
        },
        Err(e) => CurvePoint {
            mu,
            mass: None,
            radius: None,
            error: Some(e.to_string()),
        },
    }
}

/// Solves one star per central density, using up to `threads` worker threads.
pub fn mass_curve(eos: &WhiteDwarfEos, mus: &[f64], threads: usize) -> Result<MassCurve, WhiteDwarfError> {
    eos.validate()?;
    if mus.is_empty() || mus.iter().any(|m| !(m.is_finite() && *m > 0.0)) || mus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(WhiteDwarfError::InvalidGrid);
    }
    let spec = EosSpec::WhiteDwarf(*eos);
    let threads = threads.max(1).min(mus.len());
    let chunk = mus.len().div_ceil(threads);
    let points = if threads == 1 {
        mus.iter().map(|&mu| solve_point(&spec, mu)).collect()
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = mus
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(|&mu| solve_point(&spec, mu)).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("mass curve worker panicked"))
                .collect()
        })
    };
    Ok(MassCurve {
        a: eos.a,
        b: eos.b,
        points,
        limit_mass: limit_mass(eos)?,
    })
}

/// `count` logarithmically spaced central densities on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut grid: Vec<f64> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect();
    grid[0] = lo;
    grid[count - 1] = hi;
    grid
}

/// Smallest central density in `[lo, hi]` (to relative tolerance `1e-6`)
/// above which stars have compact support; `None` if even `hi` fails.
pub fn compact_support_threshold(eos: &EosSpec, lo: f64, hi: f64) -> Option<f64> {
    let compact = |mu: f64| match solve_star(eos, mu) {
        Ok(_) => true,
        Err(LaneEmdenError::UnboundedSupport { .. }) => false,
        Err(_) => false,
    };
    if compact(lo) {
        return Some(lo);
    }
    if !compact(hi) {
        return None;
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    while b - a > 1e-6 {
        let m = 0.5 * (a + b);
        if compact(m.exp()) {
            b = m;
        } else {
            a = m;
        }
    }
    Some(b.exp())
}

/// Lower bound on the support measure of a state below the limiting mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NonCollapseBound {
    Bound {
        /// `M⁴ / X³` with `X` the bound on `∫ rho^{4/3}`.
        measure_lower_bound: f64,
        rho_prime: f64,
        lgamma_bound: f64,
    },
    Unavailable {
        reason: String,
    },
}

/// Supremum tables of `|Φ_w(rho) - 6 A B^{-4/3} rho^{4/3}|` relative to
/// `rho^{4/3}` above and to `rho` below a split density, on a log grid in `xi`.
struct ComparisonTables {
    xi: Vec<f64>,
    above: Vec<f64>,
    below: Vec<f64>,
}

impl ComparisonTables {
    fn new() -> Self {
        let count = 4001;
        let xi = log_grid(1e-6, 1e9, count);
        let diff = |x: f64| (white_dwarf_enthalpy_dimless(x) - 6.0 * x.powi(4)).abs();
        let r43: Vec<f64> = xi.iter().map(|&x| diff(x) / x.powi(4)).collect();
        let r1: Vec<f64> = xi.iter().map(|&x| diff(x) / x.powi(3)).collect();
        let mut above = vec![0.0; count];
        let mut run = 0.0f64;
        for i in (0..count).rev() {
            run = run.max(r43[i]);
            above[i] = run;
        }
        let mut below = vec![0.0; count];
        let mut run = 0.0f64;
        for i in 0..count {
            run = run.max(r1[i]);
            below[i] = run;
        }
        Self { xi, above, below }
    }
}

/// Support bound from the energy chain
/// `E >= (6 A B^{-4/3} - ½ C_min M^{2/3} - a(rho')) X - b(rho') M`.
pub fn noncollapse_bound(
    rho: &RadialProfile,
    u: Option<&VelocityProfile>,
    eos: &WhiteDwarfEos,
) -> Result<NonCollapseBound, WhiteDwarfError> {
    eos.validate()?;
    if rho.dim() != 3 {
        return Err(WhiteDwarfError::Dimension(rho.dim()));
    }
    let report = evaluate(rho, u, &EosSpec::WhiteDwarf(*eos), None)?;
    let limit = limit_mass(eos)?;
    let mass = report.mass;
    if !(mass > 0.0) {
        return Ok(NonCollapseBound::Unavailable {
            reason: "state has no mass".into(),
        });
    }
    if mass >= limit {
        return Ok(NonCollapseBound::Unavailable {
            reason: format!("mass {mass} is not below the limiting mass {limit}"),
        });
    }
    let kappa = eos.kappa();
    let c_min = chandrasekhar_constants(1.0)?.c_min.expect("critical branch sets C_min");
    let lead = 6.0 * kappa - 0.5 * c_min * mass.powf(2.0 / 3.0);
    let tables = ComparisonTables::new();
    // Sampled suprema are inflated slightly to stay on the safe side.
    let safety = 1.0 + 1e-3;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..tables.xi.len() {
        let a = safety * kappa * tables.above[i];
        let b = safety * eos.a / eos.b * tables.below[i];
        let den = lead - a;
        if den <= 0.0 {
            continue;
        }
        let x = (report.energy + b * mass) / den;
        if x > 0.0 && best.is_none_or(|(bx, _)| x < bx) {
            best = Some((x, eos.b * tables.xi[i].powi(3)));
        }
    }
    Ok(match best {
        Some((x, rho_prime)) => NonCollapseBound::Bound {
            measure_lower_bound: mass.powi(4) / x.powi(3),
            rho_prime,
            lgamma_bound: x,
        },
        None => NonCollapseBound::Unavailable {
            reason: "no split density gives a positive coefficient".into(),
        },
    })
}
