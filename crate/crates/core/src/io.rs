//! CSV and JSON emission with fixed, deterministic formatting.

use std::io::Write;
use std::path::Path;

use crate::hydro::DiagnosticsRecord;
use crate::lane_emden::StarSolution;
use crate::profile::{ProfileError, RadialProfile, VelocityProfile};
use crate::white_dwarf::MassCurve;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed profile CSV: {0}")]
    Format(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// Scientific notation with 17 significant digits and a signed two-digit
/// exponent, e.g. `1.2500000000000000e+00`.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.16e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn format_opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

/// Writes `r,rho` (and `u` when given) with one row per node.
pub fn write_profile_csv<W: Write>(out: W, rho: &RadialProfile, u: Option<&VelocityProfile>) -> Result<(), IoError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    if u.is_some() {
        w.write_record(["r", "rho", "u"])?;
    } else {
        w.write_record(["r", "rho"])?;
    }
    for (i, (&r, &v)) in rho.radii().iter().zip(rho.values()).enumerate() {
        match u {
            Some(u) => {
                let uv = if u.radii() == rho.radii() {
                    u.values()[i]
                } else {
                    u.value_at(r)
                };
                w.write_record([format_float(r), format_float(v), format_float(uv)])?;
            }
            None => w.write_record([format_float(r), format_float(v)])?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a profile CSV with header `r,rho[,u]`.
pub fn read_profile_csv(path: &Path, dim: usize) -> Result<(RadialProfile, Option<VelocityProfile>), IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let ri = col("r").ok_or_else(|| IoError::Format("missing column r".into()))?;
    let di = col("rho").ok_or_else(|| IoError::Format("missing column rho".into()))?;
    let ui = col("u");
    let (mut radii, mut values, mut vel) = (Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64, IoError> {
            rec.get(i)
                .ok_or_else(|| IoError::Format(format!("row {} is short", line + 2)))?
                .parse::<f64>()
                .map_err(|e| IoError::Format(format!("row {}: {e}", line + 2)))
        };
        radii.push(parse(ri)?);
        values.push(parse(di)?);
        if let Some(i) = ui {
            vel.push(parse(i)?);
        }
    }
    let u = match ui {
        Some(_) => Some(VelocityProfile::new(dim, radii.clone(), vel)?),
        None => None,
    };
    Ok((RadialProfile::new(dim, radii, values)?, u))
}

/// Writes `r,rho,y` for a stationary star, `y` being the structure function.
pub fn write_star_csv<W: Write>(out: W, star: &StarSolution) -> Result<(), IoError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["r", "rho", "y"])?;
    for (&r, &v) in star.profile.radii().iter().zip(star.profile.values()) {
        w.write_record([format_float(r), format_float(v), format_float(star.structure(r))])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `mu,M,R`; failed points leave `M` and `R` empty.
pub fn write_mass_curve_csv<W: Write>(out: W, curve: &MassCurve) -> Result<(), IoError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["mu", "M", "R"])?;
    for p in &curve.points {
        w.write_record([format_float(p.mu), format_opt(p.mass), format_opt(p.radius)])?;
    }
    w.flush()?;
    Ok(())
}

/// Column order of the diagnostics CSV.
pub const TIMESERIES_COLUMNS: [&str; 14] = [
    "t",
    "R",
    "M",
    "E",
    "kinetic",
    "internal",
    "potential",
    "Q",
    "H",
    "Hp",
    "Hpp",
    "bound_residual",
    "q_lower_bound",
    "blowup_indicator",
];

/// Writes the diagnostics time series; absent optional values are empty fields.
pub fn write_timeseries_csv<W: Write>(out: W, records: &[DiagnosticsRecord]) -> Result<(), IoError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(TIMESERIES_COLUMNS)?;
    for r in records {
        w.write_record([
            format_float(r.t),
            format_float(r.r),
            format_float(r.m),
            format_float(r.e),
            format_float(r.kinetic),
            format_float(r.internal),
            format_float(r.potential),
            format_float(r.q),
            format_float(r.h),
            format_float(r.hp),
            format_float(r.hpp),
            format_float(r.bound_residual),
            format_opt(r.q_lower_bound),
            format_float(r.blowup_indicator),
        ])?;
    }
    w.flush()?;
    Ok(())
}
