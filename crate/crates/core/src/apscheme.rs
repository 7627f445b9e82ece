//! Semi-implicit, energy-stable staggered scheme.
//!
//! One step: interface densities and `η`, an explicit time step from the
//! current fields, the implicit potential solve, then explicit mass and
//! momentum updates. The mass flux carries the shift `Q = η δt ∂φ^{n+1}` and
//! the momentum source the shift `∂Λ` with `Λ = δt div u^n`.

use crate::boundary::{Bc, BoundarySpec, Side};
use serde::{Deserialize, Serialize};

use crate::discops::{gradient, interface_density, laplacian, outward_face_sum, upwind_density};
use crate::error::{Error, Result};
use crate::field::{first_non_positive, FaceField, FieldRole, PrimalField};
use crate::mesh::{apply_velocity_bc, dual_average, MacMesh, State};
use crate::pbsolver::{solve_pb, EllipticProblem, PbOptions, PbSolution};

/// Face density shared by the mass flux, `η` and the momentum source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceDensity {
    /// Logarithmic mean; gives a conservative pressure gradient in the quasineutral limit.
    #[default]
    LogMean,
    /// Donor cell. Damps the odd-even modes of the centred flux in supersonic
    /// beams, at the price of the conservative limit.
    Upwind,
}

/// `ρ_σ` of the chosen kind.
pub fn face_density(mesh: &MacMesh, rho: &[f64], u: &FaceField, kind: InterfaceDensity) -> Result<FaceField> {
    match kind {
        InterfaceDensity::LogMean => interface_density(mesh, rho),
        InterfaceDensity::Upwind => upwind_density(mesh, rho, u),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    /// Scaled Debye length.
    pub eps: f64,
    /// Safety factor on the `η` lower bound; must exceed 1.
    pub gamma: f64,
    /// CFL safety factor in `(0, 1]`.
    pub theta: f64,
    /// Upper bound on the time step when the CFL bound degenerates.
    pub dt_max: f64,
    /// Halvings of `δt` attempted after a positivity failure.
    pub max_retries: usize,
    /// Also enforce `4 δt² α_{K,σ} ≤ 1` with the current dual densities.
    pub energy_dt_bound: bool,
    pub interface: InterfaceDensity,
    pub pb: PbOptions,
    pub bcs: BoundarySpec,
}

impl SchemeConfig {
    pub fn new(eps: f64, bcs: BoundarySpec) -> Self {
        SchemeConfig {
            eps,
            gamma: 1.01,
            theta: 0.9,
            dt_max: f64::INFINITY,
            max_retries: 1,
            energy_dt_bound: true,
            interface: InterfaceDensity::LogMean,
            pb: PbOptions::default(),
            bcs,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(Error::Config(format!("eps must be non-negative, got {}", self.eps)));
        }
        if !(self.gamma > 1.0) {
            return Err(Error::Config(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::Config(format!("theta must lie in (0, 1], got {}", self.theta)));
        }
        if !(self.dt_max > 0.0) {
            return Err(Error::Config("dt_max must be positive".into()));
        }
        self.bcs.validate(dim)
    }
}

/// `η_σ = γ · 5 ρ_σ² / (4 ρ_{D_σ})` on interior faces, zero on external faces.
pub fn eta_field(mesh: &MacMesh, rho_sigma: &FaceField, rho_dual: &FaceField, gamma: f64) -> FaceField {
    let mut eta = FaceField::zeros(&mesh.face_counts());
    for a in 0..mesh.dim() {
        for (f, g) in mesh.faces(a).iter().enumerate() {
            if g.is_interior() {
                let rs = rho_sigma.axes[a][f];
                eta.axes[a][f] = gamma * 5.0 * rs * rs / (4.0 * rho_dual.axes[a][f]);
            }
        }
    }
    eta
}

/// Density carried by an external face: the cell value on outflow, Dirichlet data on inflow.
fn boundary_density(rho_k: f64, u_b: f64, side: Side, bc: Bc) -> f64 {
    let outflow = u_b * side.outward_sign() >= 0.0;
    match bc {
        Bc::Dirichlet(v) if !outflow => v,
        _ => rho_k,
    }
}

/// Convective mass flux per unit area along `+e^(i)`: `ρ_σ u_σ` inside, upwinded boundary values outside.
pub fn convective_flux(mesh: &MacMesh, rho: &[f64], rho_sigma: &FaceField, u: &FaceField, bcs: &BoundarySpec) -> FaceField {
    let mut m = FaceField::zeros(&mesh.face_counts());
    for a in 0..mesh.dim() {
        for (f, g) in mesh.faces(a).iter().enumerate() {
            let uf = u.axes[a][f];
            m.axes[a][f] = match g.side {
                None => rho_sigma.axes[a][f] * uf,
                Some(side) => {
                    boundary_density(rho[g.boundary_cell()], uf, side, bcs.density_at(side)) * uf
                }
            };
        }
    }
    m
}

/// Explicit time step from the sufficient positivity condition, evaluated with `φ^n`.
pub fn compute_dt(
    mesh: &MacMesh,
    state: &State,
    rho_sigma: &FaceField,
    rho_dual: &FaceField,
    eta: &FaceField,
    cfg: &SchemeConfig,
) -> f64 {
    let rho = &state.rho;
    let phi = &state.phi;
    let ratio = |k: usize| mesh.perimeter(k) / mesh.cell_volume(k);
    let mut bound = f64::INFINITY;
    for a in 0..mesh.dim() {
        for (f, g) in mesh.faces(a).iter().enumerate() {
            let uf = state.u.axes[a][f].abs();
            match (g.minus, g.plus) {
                (Some(k), Some(l)) => {
                    let m = ratio(k).max(ratio(l));
                    let eta_t = eta.axes[a][f] * g.area / (g.dual_volume * m);
                    let mu = rho[k].min(rho[l]) / rho_sigma.axes[a][f];
                    let speed = uf + (eta_t * (phi[l] - phi[k]).abs()).sqrt();
                    if speed > 0.0 {
                        bound = bound.min(mu / (5.0 * m * speed));
                    }
                }
                _ => {
                    if uf > 0.0 {
                        bound = bound.min(1.0 / (5.0 * ratio(g.boundary_cell()) * uf));
                    }
                }
            }
        }
    }
    if cfg.energy_dt_bound {
        for a in 0..mesh.dim() {
            for (f, g) in mesh.faces(a).iter().enumerate() {
                if let (Some(k), Some(l)) = (g.minus, g.plus) {
                    let alpha = ratio(k).max(ratio(l)) * g.grad_coef() / rho_dual.axes[a][f];
                    bound = bound.min(0.5 / alpha.sqrt());
                }
            }
        }
    }
    (cfg.theta * bound).min(cfg.dt_max)
}

/// Solves `−div((ε² + η δt²)∇φ) + e^φ = ρ^n − δt div(m)` for `φ^{n+1}`.
pub fn implicit_potential_solve(
    mesh: &MacMesh,
    rho: &[f64],
    conv: &FaceField,
    eta: &FaceField,
    dt: f64,
    eps: f64,
    potential_bc: [Bc; 4],
    pb: &PbOptions,
    phi_guess: Option<&[f64]>,
) -> Result<PbSolution> {
    let flux_sum = outward_face_sum(mesh, conv);
    let rhs: Vec<f64> = (0..mesh.n_cells())
        .map(|k| rho[k] - dt * flux_sum[k] / mesh.cell_volume(k))
        .collect();
    let coeff = eta.map(|e| eps * eps + e * dt * dt);
    let problem = EllipticProblem::new(mesh, coeff, rhs, potential_bc, pb.clone())?;
    solve_pb(&problem, phi_guess)
}

/// Total mass flux per unit area `ρ_σ u_σ − η δt (∂φ^{n+1})_σ`.
pub fn total_flux(conv: &FaceField, eta: &FaceField, grad_phi: &FaceField, dt: f64) -> FaceField {
    let mut out = conv.clone();
    for (a, axis) in out.axes.iter_mut().enumerate() {
        for (f, v) in axis.iter_mut().enumerate() {
            *v -= eta.axes[a][f] * dt * grad_phi.axes[a][f];
        }
    }
    out
}

/// `ρ^{n+1}_K = ρ^n_K − (δt/|K|) Σ_σ |σ| m_{σ,K}`, without a positivity check.
pub fn mass_update(mesh: &MacMesh, rho: &[f64], flux: &FaceField, dt: f64) -> Vec<f64> {
    let s = outward_face_sum(mesh, flux);
    (0..mesh.n_cells())
        .map(|k| rho[k] - dt * s[k] / mesh.cell_volume(k))
        .collect()
}

/// Outward mass fluxes through the edges of each dual cell.
///
/// Edge order per face: axial lower, axial upper, then (2D) lateral lower, lateral upper.
#[derive(Debug, Clone, PartialEq)]
pub struct DualFluxes {
    pub axes: Vec<Vec<[f64; 4]>>,
}

impl DualFluxes {
    /// Number of edges per dual cell.
    pub fn edges(&self) -> usize {
        2 * self.axes.len()
    }

    /// Sum of outward fluxes of the dual cell around face `f`.
    pub fn net_outflow(&self, axis: usize, f: usize) -> f64 {
        self.axes[axis][f][..self.edges()].iter().sum()
    }
}

/// Dual fluxes from primal fluxes per unit area, with coefficient ½ on each neighbouring primal flux.
///
/// Only interior faces get dual fluxes; lateral edges on the domain boundary
/// carry the average of the two external primal fluxes, which vanishes for walls.
pub fn dual_fluxes(mesh: &MacMesh, flux: &FaceField) -> DualFluxes {
    let area_flux = |a: usize, f: usize| mesh.face(a, f).area * flux.axes[a][f];
    let mut axes = Vec::with_capacity(mesh.dim());
    for a in 0..mesh.dim() {
        let mut out = vec![[0.0; 4]; mesh.face_count(a)];
        for (f, g) in mesh.faces(a).iter().enumerate() {
            let (Some(k), Some(l)) = (g.minus, g.plus) else {
                continue;
            };
            let here = area_flux(a, f);
            let e = &mut out[f];
            e[0] = -0.5 * (area_flux(a, mesh.cell_face(k, a, false)) + here);
            e[1] = 0.5 * (here + area_flux(a, mesh.cell_face(l, a, true)));
            if mesh.dim() == 2 {
                let b = 1 - a;
                e[2] = -0.5 * (area_flux(b, mesh.cell_face(k, b, false)) + area_flux(b, mesh.cell_face(l, b, false)));
                e[3] = 0.5 * (area_flux(b, mesh.cell_face(k, b, true)) + area_flux(b, mesh.cell_face(l, b, true)));
            }
        }
        axes.push(out);
    }
    DualFluxes { axes }
}

/// `Λ_K = δt (div u)_K`, boundary faces included.
pub fn lambda_field(mesh: &MacMesh, u: &FaceField, dt: f64) -> Vec<f64> {
    let s = outward_face_sum(mesh, u);
    (0..mesh.n_cells())
        .map(|k| dt * s[k] / mesh.cell_volume(k))
        .collect()
}

/// Velocity of the neighbour across dual edge `e` of face `f`, with ghosts outside the domain.
fn neighbour_velocity(mesh: &MacMesh, u: &FaceField, bcs: &BoundarySpec, a: usize, f: usize, e: usize) -> f64 {
    let (b, upper) = match e {
        0 => (a, false),
        1 => (a, true),
        2 => (1 - a, false),
        _ => (1 - a, true),
    };
    match mesh.face_shift(a, f, b, upper) {
        Some(n) => u.axes[a][n],
        None => match bcs.velocity_at(Side::from_axis(b, upper)) {
            Bc::NoSlip => 0.0,
            _ => u.axes[a][f],
        },
    }
}

/// Upwinded momentum convection `Σ_ε F_ε u_ε,up` for every interior face.
pub fn momentum_convection(mesh: &MacMesh, u: &FaceField, duals: &DualFluxes, bcs: &BoundarySpec) -> FaceField {
    let mut out = FaceField::zeros(&mesh.face_counts());
    for a in 0..mesh.dim() {
        for (f, g) in mesh.faces(a).iter().enumerate() {
            if !g.is_interior() {
                continue;
            }
            let uf = u.axes[a][f];
            let mut s = 0.0;
            for e in 0..duals.edges() {
                let flux = duals.axes[a][f][e];
                let up = if flux >= 0.0 {
                    uf
                } else {
                    neighbour_velocity(mesh, u, bcs, a, f, e)
                };
                s += flux * up;
            }
            out.axes[a][f] = s;
        }
    }
    out
}

/// Inputs of the explicit momentum update, all at the current level unless noted.
pub struct MomentumInputs<'a> {
    pub u: &'a FaceField,
    pub rho_dual: &'a FaceField,
    /// Dual densities at the new level.
    pub rho_dual_next: &'a FaceField,
    /// Face density multiplying the potential gradient.
    pub rho_sigma: &'a FaceField,
    /// Potential gradient at the new level.
    pub grad_phi: &'a FaceField,
    pub lambda: &'a [f64],
    pub duals: &'a DualFluxes,
}

/// `ρ_D^{n+1} u^{n+1} = ρ_D^n u^n − (δt/|D|) Σ F u_up − δt ρ_σ ∂φ^{n+1} + δt ∂Λ`, then boundary values.
pub fn momentum_update(mesh: &MacMesh, inp: &MomentumInputs, dt: f64, bcs: &BoundarySpec) -> FaceField {
    let conv = momentum_convection(mesh, inp.u, inp.duals, bcs);
    let mut next = FaceField::zeros(&mesh.face_counts());
    for a in 0..mesh.dim() {
        for (f, g) in mesh.faces(a).iter().enumerate() {
            let (Some(k), Some(l)) = (g.minus, g.plus) else {
                continue;
            };
            let grad_lambda = g.grad_coef() * (inp.lambda[l] - inp.lambda[k]);
            let momentum = inp.rho_dual.axes[a][f] * inp.u.axes[a][f] - dt / g.dual_volume * conv.axes[a][f]
                - dt * inp.rho_sigma.axes[a][f] * inp.grad_phi.axes[a][f]
                + dt * grad_lambda;
            next.axes[a][f] = momentum / inp.rho_dual_next.axes[a][f];
        }
    }
    apply_velocity_bc(mesh, bcs, &mut next);
    next
}

/// Per-step diagnostics of the solver itself.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub dt: f64,
    pub retries: usize,
    pub newton_iterations: usize,
    pub pb_residual: f64,
    /// `max_σ ρ_D^n / ρ_D^{n+1}`; the stability analysis wants at most 5/4.
    pub density_ratio_max: f64,
    /// Mass entering through the boundary during the step.
    pub boundary_inflow: f64,
}

/// Intermediate quantities of one step, exposed for verification.
#[derive(Debug, Clone)]
pub struct StepParts {
    pub dt: f64,
    pub rho_sigma: FaceField,
    pub rho_dual: FaceField,
    pub eta: FaceField,
    pub conv: FaceField,
    pub rho_dual_next: FaceField,
    pub flux: FaceField,
    pub rho_next: Vec<f64>,
    pub phi_next: Vec<f64>,
    pub grad_phi: FaceField,
    pub lambda: Vec<f64>,
    pub duals: DualFluxes,
    pub u_next: FaceField,
    pub solution: PbSolution,
}

/// Mass that leaves the domain during the step (negative for net inflow).
pub(crate) fn boundary_outflow(mesh: &MacMesh, flux: &FaceField, dt: f64) -> f64 {
    let mut out = 0.0;
    for &side in mesh.sides() {
        let a = side.axis();
        for &f in mesh.boundary_faces(side) {
            out += dt * side.outward_sign() * mesh.face(a, f).area * flux.axes[a][f];
        }
    }
    out
}

/// The staggered AP scheme bound to a mesh.
#[derive(Debug, Clone)]
pub struct ApScheme<'m> {
    mesh: &'m MacMesh,
    cfg: SchemeConfig,
}

impl<'m> ApScheme<'m> {
    pub fn new(mesh: &'m MacMesh, cfg: SchemeConfig) -> Result<Self> {
        cfg.validate(mesh.dim())?;
        Ok(ApScheme { mesh, cfg })
    }

    pub fn mesh(&self) -> &MacMesh {
        self.mesh
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    /// Interface densities, dual densities and `η` of `state`.
    fn prepare(&self, state: &State) -> Result<Prepared> {
        let rho_sigma = face_density(self.mesh, &state.rho, &state.u, self.cfg.interface)?;
        let rho_dual = dual_average(self.mesh, &state.rho)?;
        let eta = eta_field(self.mesh, &rho_sigma, &rho_dual, self.cfg.gamma);
        Ok(Prepared { rho_sigma, rho_dual, eta })
    }

    /// Time step the scheme would take from `state`, before clipping.
    pub fn stable_dt(&self, state: &State) -> Result<f64> {
        let p = self.prepare(state)?;
        Ok(compute_dt(self.mesh, state, &p.rho_sigma, &p.rho_dual, &p.eta, &self.cfg))
    }

    /// One step with a given `δt`, no retries. Fails on loss of positivity.
    pub fn step_with_dt(&self, state: &State, dt: f64) -> Result<StepParts> {
        let p = self.prepare(state)?;
        self.advance(state, p, dt)
    }

    fn advance(&self, state: &State, p: Prepared, dt: f64) -> Result<StepParts> {
        let mesh = self.mesh;
        let cfg = &self.cfg;
        let rho = &state.rho.values;
        let Prepared { rho_sigma, rho_dual, eta } = p;
        let conv = convective_flux(mesh, rho, &rho_sigma, &state.u, &cfg.bcs);
        let solution = implicit_potential_solve(
            mesh,
            rho,
            &conv,
            &eta,
            dt,
            cfg.eps,
            cfg.bcs.potential,
            &cfg.pb,
            Some(&state.phi.values),
        )?;
        let phi_next = solution.phi.clone();
        let grad_phi = gradient(mesh, &phi_next, &cfg.bcs.potential)?;
        let flux = total_flux(&conv, &eta, &grad_phi, dt);
        let rho_next = mass_update(mesh, rho, &flux, dt);
        if let Some((cell, value)) = first_non_positive(&rho_next) {
            return Err(Error::NonPositiveDensity { cell, value });
        }
        let rho_dual_next = dual_average(mesh, &rho_next)?;
        let duals = dual_fluxes(mesh, &flux);
        let lambda = lambda_field(mesh, &state.u, dt);
        let u_next = momentum_update(
            mesh,
            &MomentumInputs {
                u: &state.u,
                rho_dual: &rho_dual,
                rho_dual_next: &rho_dual_next,
                rho_sigma: &rho_sigma,
                grad_phi: &grad_phi,
                lambda: &lambda,
                duals: &duals,
            },
            dt,
            &cfg.bcs,
        );
        Ok(StepParts {
            dt,
            rho_sigma,
            rho_dual,
            eta,
            conv,
            rho_dual_next,
            flux,
            rho_next,
            phi_next,
            grad_phi,
            lambda,
            duals,
            u_next,
            solution,
        })
    }

    /// Advances `state` by at most `dt_cap`, halving `δt` on positivity or solver failure.
    pub fn step(&self, state: &State, dt_cap: f64) -> Result<(State, StepInfo)> {
        let p = self.prepare(state)?;
        let mut dt = compute_dt(self.mesh, state, &p.rho_sigma, &p.rho_dual, &p.eta, &self.cfg).min(dt_cap);
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::TimeStepUnderflow { dt });
        }
        let mut retries = 0;
        loop {
            match self.advance(state, p.clone(), dt) {
                Ok(parts) => {
                    let ratio = parts
                        .rho_dual
                        .axes
                        .iter()
                        .flatten()
                        .zip(parts.rho_dual_next.axes.iter().flatten())
                        .fold(0.0_f64, |m, (a, b)| m.max(a / b));
                    let info = StepInfo {
                        dt,
                        retries,
                        newton_iterations: parts.solution.iterations,
                        pb_residual: parts.solution.residual,
                        density_ratio_max: ratio,
                        boundary_inflow: -boundary_outflow(self.mesh, &parts.flux, dt),
                    };
                    let next = State {
                        t: state.t + dt,
                        rho: PrimalField::new(FieldRole::Density, parts.rho_next),
                        u: parts.u_next,
                        phi: PrimalField::new(FieldRole::Potential, parts.phi_next),
                    };
                    return Ok((next, info));
                }
                Err(e @ (Error::NonPositiveDensity { .. } | Error::Precondition(_) | Error::SolverDiverged { .. })) => {
                    if retries >= self.cfg.max_retries {
                        return Err(e);
                    }
                    retries += 1;
                    dt *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Prepared {
    rho_sigma: FaceField,
    rho_dual: FaceField,
    eta: FaceField,
}

/// `max_K |ρ_K − e^{φ_K} + ε² (Δφ)_K|`: how well a state satisfies the discrete Poisson–Boltzmann equation.
pub fn poisson_defect(mesh: &MacMesh, rho: &[f64], phi: &[f64], eps: f64, potential_bc: &[Bc; 4]) -> Result<f64> {
    let lap = laplacian(mesh, phi, potential_bc, None)?;
    Ok((0..mesh.n_cells()).fold(0.0_f64, |m, k| {
        m.max((rho[k] - phi[k].exp() + eps * eps * lap[k]).abs())
    }))
}
