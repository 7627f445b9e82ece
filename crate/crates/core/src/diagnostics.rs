//! Discrete energy, conservation monitors and the sheath-edge locator.

use std::io::Write;

use crate::boundary::{Bc, Side};
use crate::discops::gradient;
use crate::error::{Error, Result};
use crate::mesh::{dual_average, MacMesh, State};

/// The three parts of the discrete total energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    /// `Σ ½ |D_σ| ρ_{D_σ} u_σ²` over interior faces.
    pub kinetic: f64,
    /// `Σ |K| e^{φ_K} (φ_K − 1)`.
    pub boltzmann: f64,
    /// `(ε²/2) Σ |D_σ| (∂φ)_σ²` over interior faces and periodic seams.
    pub field: f64,
    pub total: f64,
}

/// Discrete total energy of a staggered state.
pub fn total_energy(mesh: &MacMesh, state: &State, eps: f64, potential_bc: &[Bc; 4]) -> Result<EnergyBreakdown> {
    let rho_dual = dual_average(mesh, &state.rho)?;
    let grad = gradient(mesh, &state.phi, potential_bc)?;
    let mut kinetic = 0.0;
    let mut field = 0.0;
    for a in 0..mesh.dim() {
        for (f, g) in mesh.faces(a).iter().enumerate() {
            match g.side {
                None => {
                    let u = state.u.axes[a][f];
                    kinetic += 0.5 * g.dual_volume * rho_dual.axes[a][f] * u * u;
                    field += g.dual_volume * grad.axes[a][f] * grad.axes[a][f];
                }
                // the seam is one face seen from both sides: count it on the lower side
                Some(side @ (Side::XMin | Side::YMin)) if potential_bc[side.index()] == Bc::Periodic => {
                    field += mesh.periodic_dual_volume(a, f) * grad.axes[a][f] * grad.axes[a][f];
                }
                Some(_) => {}
            }
        }
    }
    field *= 0.5 * eps * eps;
    let boltzmann: f64 = (0..mesh.n_cells())
        .map(|k| mesh.cell_volume(k) * state.phi[k].exp() * (state.phi[k] - 1.0))
        .sum();
    Ok(EnergyBreakdown {
        kinetic,
        boltzmann,
        field,
        total: kinetic + boltzmann + field,
    })
}

/// `Σ |K| ρ_K`.
pub fn total_mass(mesh: &MacMesh, rho: &[f64]) -> f64 {
    rho.iter().enumerate().map(|(k, r)| mesh.cell_volume(k) * r).sum()
}

pub fn min_value(v: &[f64]) -> f64 {
    v.iter().fold(f64::INFINITY, |m, x| m.min(*x))
}

/// `max_K |ρ_K − e^{φ_K}|`.
pub fn quasineutrality_residual(rho: &[f64], phi: &[f64]) -> f64 {
    rho.iter()
        .zip(phi)
        .fold(0.0_f64, |m, (r, p)| m.max((r - p.exp()).abs()))
}

/// Cell remainder `e^{φ'}(φ' − φ − 1) + e^{φ}` of the potential balance; non-negative by convexity.
pub fn boltzmann_remainder(phi_next: &[f64], phi: &[f64]) -> Vec<f64> {
    phi_next
        .iter()
        .zip(phi)
        .map(|(x, y)| x.exp() * (x - y - 1.0) + y.exp())
        .collect()
}

/// Largest `x` where the profile still reaches half the plateau density, by linear interpolation.
pub fn sheath_edge(x: &[f64], rho: &[f64], plateau: f64) -> Result<f64> {
    if x.len() != rho.len() || x.len() < 2 {
        return Err(Error::Shape {
            expected: x.len(),
            got: rho.len(),
        });
    }
    if !(plateau > 0.0) {
        return Err(Error::Precondition(format!("plateau density {plateau} is not positive")));
    }
    let half = 0.5 * plateau;
    let k = rho
        .iter()
        .rposition(|r| *r >= half)
        .ok_or_else(|| Error::NoCrossing(format!("density never reaches {half}")))?;
    if k + 1 == rho.len() {
        return Err(Error::NoCrossing(format!("density stays above {half} up to the last point")));
    }
    let s = (half - rho[k]) / (rho[k + 1] - rho[k]);
    Ok(x[k] + s * (x[k + 1] - x[k]))
}

/// One row of the diagnostics series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagRecord {
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub min_rho: f64,
    pub energy: EnergyBreakdown,
    pub qn_residual: f64,
}

pub const DIAG_HEADER: &str = "t,dt,mass,min_rho,E_kin,E_boltz,E_field,E_total,qn_residual";

/// Append-only time series of [`DiagRecord`]s.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagSeries {
    records: Vec<DiagRecord>,
}

impl DiagSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, rec: DiagRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if !(rec.t > last.t) {
                return Err(Error::Precondition(format!(
                    "diagnostic time {} does not follow {}",
                    rec.t, last.t
                )));
            }
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn records(&self) -> &[DiagRecord] {
        &self.records
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{DIAG_HEADER}")?;
        for r in &self.records {
            let e = &r.energy;
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t, r.dt, r.mass, r.min_rho, e.kinetic, e.boltzmann, e.field, e.total, r.qn_residual
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FaceField, FieldRole, PrimalField};
    use crate::mesh::build_mesh;

    #[test]
    fn uniform_energy() {
        let m = build_mesh(&[(0.0, 2.0), (0.0, 3.0)], &[4, 6], &[]).unwrap();
        let mut s = State {
            t: 0.0,
            rho: PrimalField::constant(FieldRole::Density, 24, 1.0),
            u: FaceField::zeros(&m.face_counts()),
            phi: PrimalField::constant(FieldRole::Potential, 24, 0.0),
        };
        let e = total_energy(&m, &s, 1.0, &[Bc::NeumannZero; 4]).unwrap();
        assert_eq!(e.kinetic, 0.0);
        assert_eq!(e.field, 0.0);
        assert!((e.boltzmann + 6.0).abs() < 1e-14);
        s.u = FaceField::constant(&m.face_counts(), 0.3);
        let k1 = total_energy(&m, &s, 1.0, &[Bc::NeumannZero; 4]).unwrap().kinetic;
        s.u = FaceField::constant(&m.face_counts(), 0.6);
        let k2 = total_energy(&m, &s, 1.0, &[Bc::NeumannZero; 4]).unwrap().kinetic;
        assert!((k2 - 4.0 * k1).abs() < 1e-14);
    }

    #[test]
    fn sheath_edge_examples() {
        let n = 100;
        let h = 1.0 / n as f64;
        let x: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) * h).collect();
        let step: Vec<f64> = x.iter().map(|&x| if x < 0.6 { 5.0 } else { 0.1 }).collect();
        let e = sheath_edge(&x, &step, 5.0).unwrap();
        assert!((e - 0.6).abs() <= 0.02 * h, "{e}");
        let ramp: Vec<f64> = x.iter().map(|&x| 4.0 - 4.0 * x).collect();
        // 4 − 4x = 1.5 at x = 0.625, exact for a linear profile
        assert!((sheath_edge(&x, &ramp, 3.0).unwrap() - 0.625).abs() < 1e-12);
        assert!(sheath_edge(&x, &vec![0.1; n], 5.0).is_err());
    }

    #[test]
    fn remainder_non_negative() {
        let a = [-3.0, 0.0, 2.0, 5.0];
        let b = [1.0, -2.0, 2.0, 0.5];
        assert!(boltzmann_remainder(&a, &b).iter().all(|r| *r >= 0.0));
    }

    #[test]
    fn csv_header_and_monotone_time() {
        let mut s = DiagSeries::new();
        let e = EnergyBreakdown {
            kinetic: 0.0,
            boltzmann: -1.0,
            field: 0.0,
            total: -1.0,
        };
        let rec = DiagRecord {
            t: 0.0,
            dt: 0.0,
            mass: 1.0,
            min_rho: 1.0,
            energy: e,
            qn_residual: 0.0,
        };
        s.push(rec).unwrap();
        assert!(s.push(rec).is_err());
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(DIAG_HEADER));
        assert_eq!(text.lines().count(), 2);
    }
}
