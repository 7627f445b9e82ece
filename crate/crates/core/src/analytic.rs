//! Closed-form references: the self-similar isothermal Riemann solution and
//! the Child–Langmuir sheath thickness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `G(u) = (1 − n e^u)(u² − 2u − 2 ln n) − 2u²`, whose positive root is the plateau velocity.
pub fn um_residual(u: f64, n_r: f64) -> f64 {
    (1.0 - n_r * u.exp()) * (u * u - 2.0 * u - 2.0 * n_r.ln()) - 2.0 * u * u
}

fn um_derivative(u: f64, n_r: f64) -> f64 {
    let e = n_r * u.exp();
    -e * (u * u - 2.0 * u - 2.0 * n_r.ln()) + (1.0 - e) * (2.0 * u - 2.0) - 4.0 * u
}

/// Smallest positive root of `G` (the branch with `u_m → 0` as `n_r → 1`).
pub fn solve_um(n_r: f64) -> Result<f64> {
    if !(n_r > 0.0 && n_r <= 1.0) {
        return Err(Error::NoBracket(format!("right density {n_r} outside (0, 1]")));
    }
    if n_r == 1.0 {
        return Ok(0.0);
    }
    let g0 = um_residual(0.0, n_r);
    let mut lo = 0.0;
    let mut hi = 1e-8;
    while um_residual(hi, n_r).signum() == g0.signum() {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::NoBracket(format!("no sign change of G up to u = {hi} for n_r = {n_r}")));
        }
    }
    let mut glo = um_residual(lo, n_r);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = um_residual(mid, n_r);
        if gm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    let mut u = 0.5 * (lo + hi);
    // polish; keep the bisection answer if Newton wanders
    for _ in 0..3 {
        let d = um_derivative(u, n_r);
        if d == 0.0 {
            break;
        }
        let next = u - um_residual(u, n_r) / d;
        if (next - u).abs() > 1e-8 * (1.0 + u.abs()) {
            break;
        }
        u = next;
    }
    Ok(u)
}

/// `u_s = u_m / (1 − n_r e^{u_m})`; not defined for `n_r = 1`.
pub fn shock_speed(u_m: f64, n_r: f64) -> Result<f64> {
    let den = 1.0 - n_r * u_m.exp();
    if den == 0.0 {
        return Err(Error::Precondition(format!(
            "shock speed undefined for n_r = {n_r}, u_m = {u_m}"
        )));
    }
    Ok(u_m / den)
}

/// Plateau velocity and shock speed of the isothermal Riemann problem `(1, 0) | (n_r, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiemannIceSolution {
    pub n_r: f64,
    pub u_m: f64,
    pub u_s: f64,
}

impl RiemannIceSolution {
    pub fn new(n_r: f64) -> Result<Self> {
        let u_m = solve_um(n_r)?;
        let u_s = shock_speed(u_m, n_r)?;
        Ok(RiemannIceSolution { n_r, u_m, u_s })
    }

    /// `(ρ, u)` at `(t, x)`.
    pub fn eval(&self, t: f64, x: f64) -> (f64, f64) {
        ice_riemann_exact_with(self, t, x)
    }
}

fn ice_riemann_exact_with(s: &RiemannIceSolution, t: f64, x: f64) -> (f64, f64) {
    if x <= -t {
        (1.0, 0.0)
    } else if x <= (s.u_m - 1.0) * t {
        ((-x / t - 1.0).exp(), x / t + 1.0)
    } else if x <= s.u_s * t {
        ((-s.u_m).exp(), s.u_m)
    } else {
        (s.n_r, 0.0)
    }
}

/// Self-similar solution: left state, rarefaction, plateau, then the shock into `(n_r, 0)`.
pub fn ice_riemann_exact(n_r: f64, t: f64, x: f64) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("time {t} must be positive")));
    }
    Ok(RiemannIceSolution::new(n_r)?.eval(t, x))
}

/// Child–Langmuir sheath thickness `½ (2^{5/4}/3) V^{3/4} ε / √u`.
pub fn child_langmuir(v: f64, u: f64, eps: f64) -> f64 {
    0.5 * (2f64.powf(1.25) / 3.0) * v.powf(0.75) * eps / u.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn um_roots() {
        assert_eq!(solve_um(1.0).unwrap(), 0.0);
        for n in [0.5, 0.75, 0.95] {
            let u = solve_um(n).unwrap();
            assert!(u > 0.0);
            assert!(um_residual(u, n).abs() <= 1e-12, "{n}: {}", um_residual(u, n));
        }
        assert!(solve_um(0.0).is_err());
        assert!(solve_um(1.5).is_err());
    }

    #[test]
    fn um_decreases_with_nr() {
        let mut prev = f64::INFINITY;
        for i in 1..20 {
            let u = solve_um(i as f64 / 20.0).unwrap();
            assert!(u < prev);
            prev = u;
        }
    }

    #[test]
    fn rankine_hugoniot() {
        for n in [0.2, 0.5, 0.75, 0.95] {
            let s = RiemannIceSolution::new(n).unwrap();
            assert!(s.u_s > s.u_m && s.u_s.is_finite());
            let lhs = n * s.u_s;
            let rhs = (-s.u_m).exp() * (s.u_s - s.u_m);
            assert!((lhs - rhs).abs() < 1e-12, "{n}");
        }
    }

    #[test]
    fn exact_branches() {
        let s = RiemannIceSolution::new(0.5).unwrap();
        let t = 2.0;
        assert_eq!(s.eval(t, -10.0), (1.0, 0.0));
        let (r, u) = s.eval(t, -t);
        assert_eq!((r, u), (1.0, 0.0));
        let (r, u) = s.eval(t, -t + 1e-12);
        assert!((r - 1.0).abs() < 1e-11 && u.abs() < 1e-11);
        let edge = (s.u_m - 1.0) * t;
        let (r1, u1) = s.eval(t, edge);
        let (r2, u2) = s.eval(t, edge + 1e-12);
        assert!((r1 - r2).abs() < 1e-10 && (u1 - u2).abs() < 1e-10);
        assert_eq!(s.eval(t, s.u_s * t + 1e-9), (0.5, 0.0));
    }

    #[test]
    fn child_langmuir_values() {
        let s = child_langmuir(500.0, 1.25, 1e-2);
        assert!((s - 0.375).abs() < 1e-3, "{s}");
        assert_eq!(child_langmuir(0.0, 1.25, 1e-2), 0.0);
        assert!((child_langmuir(500.0, 1.25, 2e-2) - 2.0 * s).abs() < 1e-15);
    }
}
