//! Reference solvers: the explicit collocated Rusanov scheme and the
//! semi-implicit scheme for the isothermal Euler limit.

use crate::apscheme::{
    compute_dt, convective_flux, dual_fluxes, eta_field, implicit_potential_solve, lambda_field, mass_update,
    momentum_convection, total_flux, SchemeConfig,
};
use crate::boundary::{Bc, BoundarySpec, Side};
use crate::discops::{gradient, interface_density, log_mean};
use crate::diagnostics::{total_energy, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::field::{first_non_positive, FaceField, FieldRole, PrimalField};
use crate::mesh::{apply_velocity_bc, dual_average, InitialData, MacMesh, State};
use crate::pbsolver::{solve_pb, EllipticProblem, PbOptions};

/// Cell-centred state of the collocated scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocatedState {
    pub t: f64,
    pub rho: Vec<f64>,
    /// One cell-centred component per axis.
    pub vel: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RusanovConfig {
    pub eps: f64,
    /// Fraction of the positivity limit `δt Σ_a λ_a / h_a ≤ 1`.
    pub theta: f64,
    pub pb: PbOptions,
    pub bcs: BoundarySpec,
}

impl RusanovConfig {
    pub fn new(eps: f64, bcs: BoundarySpec) -> Self {
        RusanovConfig {
            eps,
            theta: 0.9,
            pb: PbOptions::default(),
            bcs,
        }
    }
}

/// Samples `data` at cell centres and solves for the initial potential.
pub fn collocated_initial(
    data: &dyn InitialData,
    mesh: &MacMesh,
    cfg: &RusanovConfig,
) -> Result<CollocatedState> {
    let n = mesh.n_cells();
    let rho: Vec<f64> = (0..n).map(|k| data.density(mesh.cell_center(k))).collect();
    if let Some((cell, value)) = first_non_positive(&rho) {
        return Err(Error::NonPositiveDensity { cell, value });
    }
    let vel = (0..mesh.dim())
        .map(|a| (0..n).map(|k| data.velocity(mesh.cell_center(k), a)).collect())
        .collect();
    let phi = potential(mesh, &rho, cfg, None)?;
    Ok(CollocatedState { t: 0.0, rho, vel, phi })
}

fn potential(mesh: &MacMesh, rho: &[f64], cfg: &RusanovConfig, guess: Option<&[f64]>) -> Result<Vec<f64>> {
    let coeff = FaceField::constant(&mesh.face_counts(), cfg.eps * cfg.eps);
    let problem = EllipticProblem::new(mesh, coeff, rho.to_vec(), cfg.bcs.potential, cfg.pb.clone())?;
    Ok(solve_pb(&problem, guess)?.phi)
}

/// Conserved variables `(ρ, ρu_0, ρu_1)` of a cell.
type Cons = [f64; 3];

fn conserved(s: &CollocatedState, k: usize) -> Cons {
    let mut w = [s.rho[k], 0.0, 0.0];
    for (a, v) in s.vel.iter().enumerate() {
        w[1 + a] = s.rho[k] * v[k];
    }
    w
}

/// Outside value of the conserved variables across boundary face `side` of cell `k`.
fn ghost(s: &CollocatedState, k: usize, side: Side, bcs: &BoundarySpec) -> Cons {
    let rho = match bcs.density_at(side) {
        Bc::Dirichlet(v) => v,
        _ => s.rho[k],
    };
    let normal = side.axis();
    let mut w = [rho, 0.0, 0.0];
    for (a, v) in s.vel.iter().enumerate() {
        let u = v[k];
        let g = match bcs.velocity_at(side) {
            Bc::Dirichlet(val) if a == normal => val,
            Bc::NoSlip => -u,
            Bc::NeumannZero if a == normal => -u,
            _ => u,
        };
        w[1 + a] = rho * g;
    }
    w
}

/// Physical flux along `axis`: `(ρu, ρu u_0, ρu u_1)` with `u` the `axis` component.
fn physical_flux(w: &Cons, axis: usize, dim: usize) -> Cons {
    let un = w[1 + axis] / w[0];
    let mut f = [w[1 + axis], 0.0, 0.0];
    for b in 0..dim {
        f[1 + b] = w[1 + b] * un;
    }
    f
}

fn rusanov_flux(wl: &Cons, wr: &Cons, axis: usize, dim: usize) -> Cons {
    let lambda = (wl[1 + axis] / wl[0]).abs().max((wr[1 + axis] / wr[0]).abs()) + 1.0;
    let fl = physical_flux(wl, axis, dim);
    let fr = physical_flux(wr, axis, dim);
    let mut f = [0.0; 3];
    for c in 0..=dim {
        f[c] = 0.5 * (fl[c] + fr[c]) - 0.5 * lambda * (wr[c] - wl[c]);
    }
    f
}

/// Energy of a collocated state: cell kinetic energy, the Boltzmann part and the
/// field energy of the staggered potential gradient.
pub fn collocated_energy(mesh: &MacMesh, s: &CollocatedState, eps: f64, potential_bc: &[Bc; 4]) -> Result<EnergyBreakdown> {
    let at_rest = State {
        t: s.t,
        rho: PrimalField::new(FieldRole::Density, s.rho.clone()),
        u: FaceField::zeros(&mesh.face_counts()),
        phi: PrimalField::new(FieldRole::Potential, s.phi.clone()),
    };
    let mut e = total_energy(mesh, &at_rest, eps, potential_bc)?;
    e.kinetic = (0..mesh.n_cells())
        .map(|k| 0.5 * mesh.cell_volume(k) * s.rho[k] * s.vel.iter().map(|v| v[k] * v[k]).sum::<f64>())
        .sum();
    e.total = e.kinetic + e.boltzmann + e.field;
    Ok(e)
}

/// Explicit step limit `θ / max_K Σ_a λ_{K,a}/h_{K,a}` with `λ = max |u| + 1` over the cell's faces.
pub fn rusanov_dt(mesh: &MacMesh, s: &CollocatedState, cfg: &RusanovConfig) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..mesh.n_cells() {
        let (i, j) = mesh.cell_ij(k);
        let mut rate = 0.0;
        for a in 0..mesh.dim() {
            let mut lam = s.vel[a][k].abs();
            for upper in [false, true] {
                let g = mesh.face(a, mesh.cell_face(k, a, upper));
                if let (Some(m), Some(p)) = (g.minus, g.plus) {
                    lam = lam.max(s.vel[a][if m == k { p } else { m }].abs());
                }
            }
            let h = mesh.widths(a)[if a == 0 { i } else { j }];
            rate += (lam + 1.0) / h;
        }
        worst = worst.max(rate);
    }
    cfg.theta / worst
}

/// Centred cell gradient of `phi` along `axis`, with mirrored ghosts at the boundary.
fn cell_gradient(mesh: &MacMesh, phi: &[f64], bc: &[Bc; 4], axis: usize) -> Vec<f64> {
    let widths = mesh.widths(axis);
    let width = |k: usize| {
        let (i, j) = mesh.cell_ij(k);
        widths[if axis == 0 { i } else { j }]
    };
    (0..mesh.n_cells())
        .map(|k| {
            let mut vals = [0.0; 2];
            let mut dist = [0.0; 2];
            for (s, upper) in [false, true].into_iter().enumerate() {
                let f = mesh.cell_face(k, axis, upper);
                let g = mesh.face(axis, f);
                let (value, d) = match (g.minus, g.plus) {
                    (Some(m), Some(p)) => {
                        let l = if m == k { p } else { m };
                        (phi[l], 0.5 * (width(k) + width(l)))
                    }
                    _ => match bc[Side::from_axis(axis, upper).index()] {
                        Bc::Dirichlet(v) => (2.0 * v - phi[k], width(k)),
                        Bc::Periodic => {
                            let l = mesh.face(axis, mesh.periodic_partner(axis, f)).boundary_cell();
                            (phi[l], 0.5 * (width(k) + width(l)))
                        }
                        _ => (phi[k], width(k)),
                    },
                };
                vals[s] = value;
                dist[s] = d;
            }
            (vals[1] - vals[0]) / (dist[0] + dist[1])
        })
        .collect()
}

/// One explicit Rusanov step followed by the potential solve and the source term.
pub fn rusanov_step(mesh: &MacMesh, s: &CollocatedState, dt: f64, cfg: &RusanovConfig) -> Result<CollocatedState> {
    let dim = mesh.dim();
    let n = mesh.n_cells();
    let mut w: Vec<Cons> = (0..n).map(|k| conserved(s, k)).collect();
    for a in 0..dim {
        for g in mesh.faces(a) {
            let (wl, wr) = match (g.minus, g.plus, g.side) {
                (Some(m), Some(p), _) => (conserved(s, m), conserved(s, p)),
                (Some(m), None, Some(side)) => (conserved(s, m), ghost(s, m, side, &cfg.bcs)),
                (None, Some(p), Some(side)) => (ghost(s, p, side, &cfg.bcs), conserved(s, p)),
                _ => unreachable!("face without cells"),
            };
            let f = rusanov_flux(&wl, &wr, a, dim);
            for c in 0..=dim {
                let amount = dt * g.area * f[c];
                if let Some(m) = g.minus {
                    w[m][c] -= amount / mesh.cell_volume(m);
                }
                if let Some(p) = g.plus {
                    w[p][c] += amount / mesh.cell_volume(p);
                }
            }
        }
    }
    let rho: Vec<f64> = w.iter().map(|x| x[0]).collect();
    if let Some((cell, value)) = first_non_positive(&rho) {
        return Err(Error::NonPositiveDensity { cell, value });
    }
    let phi = potential(mesh, &rho, cfg, Some(&s.phi))?;
    let vel = (0..dim)
        .map(|a| {
            let grad = cell_gradient(mesh, &phi, &cfg.bcs.potential, a);
            (0..n)
                .map(|k| (w[k][1 + a] - dt * rho[k] * grad[k]) / rho[k])
                .collect()
        })
        .collect();
    Ok(CollocatedState {
        t: s.t + dt,
        rho,
        vel,
        phi,
    })
}

/// Semi-implicit limit scheme with unknowns `(ρ̃, U)`.
///
/// The mass flux carries `η δt ∂ ln ρ̃^{n+1}`, and the momentum equation the
/// corrected pressure gradient
/// `∂ρ̃^{n+1} − (ρ̃^{n+1}_σ − ρ̃^n_σ) ∂ ln ρ̃^{n+1} − δt ∂(div U^n)`.
/// Only `gamma`, `theta`, `dt_max`, `pb` and `bcs` of the configuration are used;
/// the potential boundary conditions apply to `ln ρ̃`.
#[derive(Debug, Clone)]
pub struct IceScheme<'m> {
    mesh: &'m MacMesh,
    cfg: SchemeConfig,
}

/// Staggered state of the limit scheme; `phi` holds `ln ρ̃`.
pub type IceState = State;

impl<'m> IceScheme<'m> {
    pub fn new(mesh: &'m MacMesh, mut cfg: SchemeConfig) -> Result<Self> {
        cfg.eps = 0.0;
        cfg.validate(mesh.dim())?;
        Ok(IceScheme { mesh, cfg })
    }

    /// Projects initial data, setting `ln ρ̃` in place of the potential.
    pub fn initial(&self, data: &dyn InitialData) -> Result<IceState> {
        let mesh = self.mesh;
        let rho: Vec<f64> = (0..mesh.n_cells()).map(|k| data.density(mesh.cell_center(k))).collect();
        if let Some((cell, value)) = first_non_positive(&rho) {
            return Err(Error::NonPositiveDensity { cell, value });
        }
        let mut u = FaceField {
            axes: (0..mesh.dim())
                .map(|a| mesh.faces(a).iter().map(|g| data.velocity(g.center, a)).collect())
                .collect(),
        };
        apply_velocity_bc(mesh, &self.cfg.bcs, &mut u);
        Ok(ice_state(0.0, rho, u))
    }

    pub fn stable_dt(&self, s: &IceState) -> Result<f64> {
        let rho_sigma = interface_density(self.mesh, &s.rho)?;
        let rho_dual = dual_average(self.mesh, &s.rho)?;
        let eta = eta_field(self.mesh, &rho_sigma, &rho_dual, self.cfg.gamma);
        Ok(compute_dt(self.mesh, s, &rho_sigma, &rho_dual, &eta, &self.cfg))
    }

    /// One step of length `dt`.
    pub fn step_with_dt(&self, s: &IceState, dt: f64) -> Result<IceState> {
        let mesh = self.mesh;
        let cfg = &self.cfg;
        let rho = &s.rho.values;
        let rho_sigma = interface_density(mesh, rho)?;
        let rho_dual = dual_average(mesh, rho)?;
        let eta = eta_field(mesh, &rho_sigma, &rho_dual, cfg.gamma);
        let conv = convective_flux(mesh, rho, &rho_sigma, &s.u, &cfg.bcs);
        let z = implicit_potential_solve(mesh, rho, &conv, &eta, dt, 0.0, cfg.bcs.potential, &cfg.pb, Some(&s.phi))?.phi;
        let grad_z = gradient(mesh, &z, &cfg.bcs.potential)?;
        let flux = total_flux(&conv, &eta, &grad_z, dt);
        let rho_next = mass_update(mesh, rho, &flux, dt);
        if let Some((cell, value)) = first_non_positive(&rho_next) {
            return Err(Error::NonPositiveDensity { cell, value });
        }
        let rho_dual_next = dual_average(mesh, &rho_next)?;
        let duals = dual_fluxes(mesh, &flux);
        let conv_mom = momentum_convection(mesh, &s.u, &duals, &cfg.bcs);
        let lambda = lambda_field(mesh, &s.u, dt);
        let mut u = FaceField::zeros(&mesh.face_counts());
        for a in 0..mesh.dim() {
            for (f, g) in mesh.faces(a).iter().enumerate() {
                let (Some(k), Some(l)) = (g.minus, g.plus) else {
                    continue;
                };
                let c = g.grad_coef();
                let sigma_next = log_mean(rho_next[k], rho_next[l]);
                let starred = c * (rho_next[l] - rho_next[k])
                    - (sigma_next - rho_sigma.axes[a][f]) * grad_z.axes[a][f]
                    - c * (lambda[l] - lambda[k]);
                let momentum = rho_dual.axes[a][f] * s.u.axes[a][f] - dt / g.dual_volume * conv_mom.axes[a][f]
                    - dt * starred;
                u.axes[a][f] = momentum / rho_dual_next.axes[a][f];
            }
        }
        apply_velocity_bc(mesh, &cfg.bcs, &mut u);
        Ok(ice_state(s.t + dt, rho_next, u))
    }

    /// Advances by the stable step, capped at `dt_cap`.
    pub fn step(&self, s: &IceState, dt_cap: f64) -> Result<(IceState, f64)> {
        let dt = self.stable_dt(s)?.min(dt_cap);
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::TimeStepUnderflow { dt });
        }
        Ok((self.step_with_dt(s, dt)?, dt))
    }
}

/// A limit-scheme state with `ln ρ` in the potential slot.
pub fn ice_state(t: f64, rho: Vec<f64>, u: FaceField) -> IceState {
    let z = rho.iter().map(|r| r.ln()).collect();
    State {
        t,
        rho: PrimalField::new(FieldRole::Density, rho),
        u,
        phi: PrimalField::new(FieldRole::Potential, z),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apscheme::ApScheme;
    use crate::diagnostics::total_mass;
    use crate::mesh::build_mesh;

    fn uniform(mesh: &MacMesh, rho: f64) -> CollocatedState {
        CollocatedState {
            t: 0.0,
            rho: vec![rho; mesh.n_cells()],
            vel: vec![vec![0.0; mesh.n_cells()]; mesh.dim()],
            phi: vec![rho.ln(); mesh.n_cells()],
        }
    }

    #[test]
    fn rusanov_uniform_fixed_point() {
        let m = build_mesh(&[(0.0, 1.0), (0.0, 1.0)], &[5, 4], &[]).unwrap();
        let cfg = RusanovConfig::new(0.1, BoundarySpec::closed());
        let s = uniform(&m, 2.0);
        let dt = rusanov_dt(&m, &s, &cfg);
        let next = rusanov_step(&m, &s, dt, &cfg).unwrap();
        for k in 0..m.n_cells() {
            assert!((next.rho[k] - 2.0).abs() < 1e-14);
            assert!(next.vel[0][k].abs() < 1e-12 && next.vel[1][k].abs() < 1e-12);
        }
    }

    #[test]
    fn rusanov_conserves_mass_with_walls() {
        let m = build_mesh(&[(0.0, 1.0)], &[50], &[]).unwrap();
        let cfg = RusanovConfig::new(0.1, BoundarySpec::closed());
        let mut s = uniform(&m, 1.0);
        for k in 0..50 {
            let x = m.cell_center(k)[0];
            s.rho[k] = 1.0 + 0.5 * (-(x - 0.5f64).powi(2) * 50.0).exp();
            s.vel[0][k] = (6.0 * x).sin();
        }
        let m0 = total_mass(&m, &s.rho);
        for _ in 0..50 {
            let dt = rusanov_dt(&m, &s, &cfg);
            s = rusanov_step(&m, &s, dt, &cfg).unwrap();
        }
        assert!((total_mass(&m, &s.rho) - m0).abs() <= 1e-13 * m0);
    }

    #[test]
    fn ice_uniform_fixed_point() {
        let m = build_mesh(&[(0.0, 1.0)], &[10], &[]).unwrap();
        let mut cfg = SchemeConfig::new(0.0, BoundarySpec::closed());
        cfg.dt_max = 0.01;
        let ice = IceScheme::new(&m, cfg).unwrap();
        let s = ice_state(0.0, vec![3.0; 10], FaceField::zeros(&m.face_counts()));
        let (next, _) = ice.step(&s, 1.0).unwrap();
        assert!(next.rho.iter().all(|r| (r - 3.0).abs() < 1e-13));
        assert!(next.u.max_abs() < 1e-13);
    }

    #[test]
    fn ice_matches_ap_scheme_without_debye_length() {
        let m = build_mesh(&[(0.0, 1.0)], &[20], &[]).unwrap();
        let mut cfg = SchemeConfig::new(0.0, BoundarySpec::closed());
        cfg.pb.tol = 1e-15;
        let rho: Vec<f64> = (0..20).map(|k| 1.0 + 0.3 * (k as f64 * 0.7).sin()).collect();
        let mut u = FaceField::zeros(&m.face_counts());
        for (f, v) in u.axes[0].iter_mut().enumerate() {
            *v = 0.2 * (f as f64 * 1.3).cos();
        }
        apply_velocity_bc(&m, &cfg.bcs, &mut u);
        let s = ice_state(0.0, rho, u);
        let dt = 1e-3;
        let a = ApScheme::new(&m, cfg.clone()).unwrap().step_with_dt(&s, dt).unwrap();
        let b = IceScheme::new(&m, cfg).unwrap().step_with_dt(&s, dt).unwrap();
        for k in 0..20 {
            assert!((a.rho_next[k] - b.rho[k]).abs() < 1e-12);
        }
        for f in 0..21 {
            assert!((a.u_next.axes[0][f] - b.u.axes[0][f]).abs() < 1e-12, "face {f}");
        }
    }
}
