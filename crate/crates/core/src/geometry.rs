//! Ball volumes and gravitational couplings in `n` dimensions.

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// Surface area of the unit sphere in `R^n`.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

/// Coupling `c` in `ΔV = c rho` for the kernel `|x|^{2-n}` (4π when n = 3).
pub fn poisson_coupling(n: usize) -> f64 {
    (n * (n - 2)) as f64 * unit_ball_volume(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn known_values() {
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-15);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-15);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-14);
        assert!((poisson_coupling(3) - 4.0 * PI).abs() < 1e-14);
    }
}
