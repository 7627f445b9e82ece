//! Nonlinear Poisson–Boltzmann solve `−div(c ∇φ) + e^φ = r`.
//!
//! Newton with backtracking is the primary path. When it fails and the
//! potential has no Dirichlet side, the fixed point on `z = e^φ` (an M-matrix
//! solve per iterate) takes over.
//!
//! The discrete operator is assembled with each row multiplied by `|K|`, which
//! makes it symmetric.

use crate::boundary::{Bc, Side};
use crate::discops::{check_coefficient, log_mean};
use crate::error::{Error, Result};
use crate::field::FaceField;
use crate::linsolve::{solve_linear, LinearOptions, LinearSystem, StencilMatrix};
use crate::mesh::{check_len, MacMesh};

/// Exponent above which a Newton trial point is rejected as overflowing.
const EXP_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PbOptions {
    /// Residual tolerance, relative to `max |r|`.
    pub tol: f64,
    pub max_newton: usize,
    pub max_picard: usize,
    pub linear: LinearOptions,
}

impl Default for PbOptions {
    fn default() -> Self {
        PbOptions {
            tol: 1e-10,
            max_newton: 50,
            max_picard: 200,
            linear: LinearOptions::default(),
        }
    }
}

/// `−div(c ∇φ) + e^φ = r` with the potential boundary conditions.
#[derive(Debug, Clone)]
pub struct EllipticProblem<'m> {
    mesh: &'m MacMesh,
    coeff: FaceField,
    rhs: Vec<f64>,
    bc: [Bc; 4],
    opts: PbOptions,
    op: Operator,
}

/// `|K|`-weighted linear part: `A φ − b` equals `−|K| div(c∇φ)` row by row.
#[derive(Debug, Clone)]
struct Operator {
    diag: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
    /// Dirichlet contributions moved to the right side.
    b: Vec<f64>,
    volumes: Vec<f64>,
}

impl Operator {
    fn apply(&self, phi: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self
            .diag
            .iter()
            .zip(phi)
            .zip(&self.b)
            .map(|((d, p), b)| d * p - b)
            .collect();
        for &(k, l, w) in &self.edges {
            y[k] -= w * phi[l];
            y[l] -= w * phi[k];
        }
        y
    }

    /// Largest per-cell sum of term magnitudes in the residual at `phi`; scales its round-off floor.
    fn term_magnitude(&self, phi: &[f64], rhs: &[f64]) -> f64 {
        let mut y: Vec<f64> = self
            .diag
            .iter()
            .zip(phi)
            .zip(&self.b)
            .map(|((d, p), b)| (d * p).abs() + b.abs())
            .collect();
        for &(k, l, w) in &self.edges {
            y[k] += (w * phi[l]).abs();
            y[l] += (w * phi[k]).abs();
        }
        y.iter()
            .zip(&self.volumes)
            .zip(phi.iter().zip(rhs))
            .fold(0.0_f64, |m, ((a, v), (p, r))| m.max(a / v + p.exp() + r.abs()))
    }
}

/// Face weights `c|σ|²/|D_σ|` for the `|K|`-scaled operator.
fn assemble(mesh: &MacMesh, coeff: &FaceField, bc: &[Bc; 4]) -> Operator {
    let n = mesh.n_cells();
    let mut diag = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut edges = Vec::with_capacity(n * mesh.dim());
    for axis in 0..mesh.dim() {
        for (f, g) in mesh.faces(axis).iter().enumerate() {
            let c = coeff.axes[axis][f];
            match (g.minus, g.plus, g.side) {
                (Some(k), Some(l), _) => {
                    let w = c * g.area * g.area / g.dual_volume;
                    diag[k] += w;
                    diag[l] += w;
                    edges.push((k, l, w));
                }
                (_, _, Some(side)) => {
                    let k = g.boundary_cell();
                    match bc[side.index()] {
                        Bc::Dirichlet(value) => {
                            let w = c * g.area * g.area / g.dual_volume;
                            diag[k] += w;
                            b[k] += w * value;
                        }
                        Bc::Periodic => {
                            // one edge per seam, from the lower side
                            if matches!(side, Side::XMin | Side::YMin) {
                                let p = mesh.periodic_partner(axis, f);
                                let l = mesh.face(axis, p).boundary_cell();
                                let w = c * g.area * g.area / mesh.periodic_dual_volume(axis, f);
                                if k != l {
                                    diag[k] += w;
                                    diag[l] += w;
                                    edges.push((l, k, w));
                                }
                            }
                        }
                        Bc::NeumannZero | Bc::ExtrapolateZeroOrder | Bc::NoSlip => {}
                    }
                }
                _ => unreachable!("face without cells"),
            }
        }
    }
    Operator {
        diag,
        edges,
        b,
        volumes: mesh.cell_volumes(),
    }
}

impl<'m> EllipticProblem<'m> {
    pub fn new(mesh: &'m MacMesh, coeff: FaceField, rhs: Vec<f64>, bc: [Bc; 4], opts: PbOptions) -> Result<Self> {
        check_len(mesh, &rhs)?;
        // external faces may carry zero: they only enter through Dirichlet or periodic data
        check_coefficient(mesh, &coeff)?;
        if let Some(k) = rhs.iter().position(|r| !r.is_finite()) {
            return Err(Error::Precondition(format!("non-finite right side in cell {k}")));
        }
        let has_dirichlet = mesh
            .sides()
            .iter()
            .any(|s| matches!(bc[s.index()], Bc::Dirichlet(_)));
        if !has_dirichlet {
            if let Some((cell, value)) = crate::field::first_non_positive(&rhs) {
                return Err(Error::Precondition(format!(
                    "right side {value:e} in cell {cell} is not positive under zero-flux boundaries"
                )));
            }
        }
        let op = assemble(mesh, &coeff, &bc);
        Ok(EllipticProblem {
            mesh,
            coeff,
            rhs,
            bc,
            opts,
            op,
        })
    }

    pub fn mesh(&self) -> &MacMesh {
        self.mesh
    }

    pub fn coefficient(&self) -> &FaceField {
        &self.coeff
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn bc(&self) -> &[Bc; 4] {
        &self.bc
    }

    pub fn options(&self) -> &PbOptions {
        &self.opts
    }

    /// No Dirichlet side: the maximum principle bounds `ln min r ≤ φ ≤ ln max r` apply.
    pub fn has_bounds(&self) -> bool {
        !self
            .mesh
            .sides()
            .iter()
            .any(|s| matches!(self.bc[s.index()], Bc::Dirichlet(_)))
    }

    fn scale(&self) -> f64 {
        self.rhs.iter().fold(0.0_f64, |m, r| m.max(r.abs())).max(f64::MIN_POSITIVE)
    }

    /// `ln(clamp(r, min r⁺, max r))`, with `0` when no entry is positive.
    pub fn default_guess(&self) -> Vec<f64> {
        let lo = self
            .rhs
            .iter()
            .filter(|r| **r > 0.0)
            .fold(f64::INFINITY, |m, r| m.min(*r));
        if !lo.is_finite() {
            return vec![0.0; self.rhs.len()];
        }
        let hi = self.rhs.iter().fold(lo, |m, r| m.max(*r));
        self.rhs.iter().map(|r| r.clamp(lo, hi).ln()).collect()
    }
}

/// Pointwise residual `−div(c∇φ)_K + e^{φ_K} − r_K`.
pub fn residual(problem: &EllipticProblem, phi: &[f64]) -> Vec<f64> {
    let op = &problem.op;
    op.apply(phi)
        .iter()
        .zip(&op.volumes)
        .zip(phi)
        .zip(&problem.rhs)
        .map(|(((a, v), p), r)| a / v + p.exp() - r)
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// `|K|`-weighted squared residual norm, the line-search merit.
fn merit(problem: &EllipticProblem, res: &[f64]) -> f64 {
    res.iter()
        .zip(&problem.op.volumes)
        .map(|(r, v)| (r * v) * (r * v))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    pub phi_next: Vec<f64>,
    /// `max_K |R_K|` at `phi_next`.
    pub residual_norm: f64,
    /// Accepted damping factor.
    pub lambda: f64,
    /// `max_K |δ_K|` of the full Newton correction.
    pub delta_norm: f64,
}

/// One damped Newton iteration.
pub fn newton_step(problem: &EllipticProblem, phi: &[f64]) -> Result<NewtonStep> {
    check_len(problem.mesh, phi)?;
    if phi.iter().any(|p| !p.is_finite()) {
        return Err(Error::Precondition("non-finite Newton iterate".into()));
    }
    let (res, e) = residual_and_exp(problem, phi);
    newton_iteration(problem, phi, &res, &e).map(|(step, _, _)| step)
}

/// Residual at `phi` together with `e^φ`.
fn residual_and_exp(problem: &EllipticProblem, phi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let op = &problem.op;
    let e: Vec<f64> = phi.iter().map(|p| p.exp()).collect();
    let res = op
        .apply(phi)
        .iter()
        .zip(&op.volumes)
        .zip(&e)
        .zip(&problem.rhs)
        .map(|(((a, v), x), r)| a / v + x - r)
        .collect();
    (res, e)
}

/// Newton iteration from a known residual; also returns the residual and `e^φ` at the new iterate.
fn newton_iteration(
    problem: &EllipticProblem,
    phi: &[f64],
    res: &[f64],
    e: &[f64],
) -> Result<(NewtonStep, Vec<f64>, Vec<f64>)> {
    let op = &problem.op;
    let m0 = merit(problem, res);
    let diag: Vec<f64> = op
        .diag
        .iter()
        .zip(&op.volumes)
        .zip(e)
        .map(|((d, v), x)| d + v * x)
        .collect();
    let rhs: Vec<f64> = res.iter().zip(&op.volumes).map(|(r, v)| -r * v).collect();
    let system = LinearSystem {
        matrix: StencilMatrix {
            diag,
            edges: op.edges.clone(),
            banded: problem.mesh.dim() == 1,
        },
        rhs,
    };
    let delta = solve_linear(&system, &problem.opts.linear)?.x;
    let delta_norm = max_abs(&delta);
    if delta_norm <= 1e-14 * (1.0 + max_abs(phi)) {
        // at the root up to round-off: the merit cannot decrease any further
        let phi_next: Vec<f64> = phi.iter().zip(&delta).map(|(p, d)| p + d).collect();
        let (r, x) = residual_and_exp(problem, &phi_next);
        let step = NewtonStep {
            phi_next,
            residual_norm: max_abs(&r),
            lambda: 1.0,
            delta_norm,
        };
        return Ok((step, r, x));
    }
    let mut lambda = 1.0;
    loop {
        let trial: Vec<f64> = phi.iter().zip(&delta).map(|(p, d)| p + lambda * d).collect();
        if trial.iter().all(|p| *p < EXP_LIMIT && p.is_finite()) {
            let (r, x) = residual_and_exp(problem, &trial);
            let m = merit(problem, &r);
            if m < m0 * (1.0 - 1e-4 * lambda) || m == 0.0 {
                let step = NewtonStep {
                    phi_next: trial,
                    residual_norm: max_abs(&r),
                    lambda,
                    delta_norm,
                };
                return Ok((step, r, x));
            }
        }
        lambda *= 0.5;
        if lambda < 1e-12 {
            return Err(Error::SolverDiverged {
                iterations: 1,
                residual: max_abs(res),
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbMethod {
    Newton,
    Picard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PbSolution {
    pub phi: Vec<f64>,
    pub iterations: usize,
    /// `max_K |R_K|` at the returned potential.
    pub residual: f64,
    /// Residual after each iteration, starting with the initial guess.
    pub history: Vec<f64>,
    pub method: PbMethod,
}

fn newton_solve(problem: &EllipticProblem, phi_init: Vec<f64>) -> Result<PbSolution> {
    let target = problem.opts.tol * problem.scale();
    // strong fields can put the round-off floor of the residual above the requested tolerance
    let floor = |phi: &[f64]| 1e2 * f64::EPSILON * problem.op.term_magnitude(phi, &problem.rhs);
    let mut phi = phi_init;
    let (mut res_vec, mut e) = residual_and_exp(problem, &phi);
    let mut res = max_abs(&res_vec);
    let mut history = vec![res];
    for it in 0..problem.opts.max_newton {
        if res <= target {
            return Ok(PbSolution {
                phi,
                iterations: it,
                residual: res,
                history,
                method: PbMethod::Newton,
            });
        }
        match newton_iteration(problem, &phi, &res_vec, &e) {
            Ok((step, r, x)) => {
                res_vec = r;
                e = x;
                let stalled = step.delta_norm <= 1e-14 * (1.0 + max_abs(&phi));
                phi = step.phi_next;
                res = step.residual_norm;
                history.push(res);
                if stalled {
                    // the correction is at round-off: the residual floor is reached
                    return Ok(PbSolution {
                        phi,
                        iterations: it + 1,
                        residual: res,
                        history,
                        method: PbMethod::Newton,
                    });
                }
            }
            Err(Error::SolverDiverged { .. }) => {
                // no decrease along the Newton direction: round-off floor, or failure
                if res <= (1e3 * target).max(floor(&phi)) {
                    return Ok(PbSolution {
                        phi,
                        iterations: it,
                        residual: res,
                        history,
                        method: PbMethod::Newton,
                    });
                }
                return Err(Error::SolverDiverged { iterations: it, residual: res });
            }
            Err(e) => return Err(e),
        }
    }
    if res <= target {
        let iterations = problem.opts.max_newton;
        return Ok(PbSolution {
            phi,
            iterations,
            residual: res,
            history,
            method: PbMethod::Newton,
        });
    }
    Err(Error::SolverDiverged {
        iterations: problem.opts.max_newton,
        residual: res,
    })
}

/// Newton from `phi_init` (default guess when absent), with the fixed-point fallback.
pub fn solve_pb(problem: &EllipticProblem, phi_init: Option<&[f64]>) -> Result<PbSolution> {
    let init = match phi_init {
        Some(p) => {
            check_len(problem.mesh, p)?;
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::Precondition("non-finite initial potential".into()));
            }
            p.to_vec()
        }
        None => problem.default_guess(),
    };
    match newton_solve(problem, init) {
        Ok(s) => Ok(s),
        Err(newton_err) => {
            if !problem.has_bounds() {
                return Err(newton_err);
            }
            picard_solve(problem).map_err(|_| newton_err)
        }
    }
}

/// Fixed point `v ↦ u` with `−div((c/v_σ)∇u) + u = r`, `v_σ` the logarithmic mean.
///
/// Requires zero-flux or periodic boundaries and `r > 0`; the iterates stay in `[min r, max r]`.
pub fn picard_solve(problem: &EllipticProblem) -> Result<PbSolution> {
    picard_iterate(problem, |_| {})
}

/// As [`picard_solve`], calling `observe` with every iterate.
pub fn picard_iterate(problem: &EllipticProblem, mut observe: impl FnMut(&[f64])) -> Result<PbSolution> {
    if !problem.has_bounds() {
        return Err(Error::Precondition(
            "the fixed-point iteration needs boundaries without Dirichlet data".into(),
        ));
    }
    let mesh = problem.mesh;
    let r = &problem.rhs;
    let tol = problem.opts.tol * problem.scale();
    let mut v = r.clone();
    let mut history = Vec::new();
    for it in 1..=problem.opts.max_picard {
        let mut scaled = problem.coeff.clone();
        for axis in 0..mesh.dim() {
            for (f, g) in mesh.faces(axis).iter().enumerate() {
                let vs = match (g.minus, g.plus) {
                    (Some(k), Some(l)) => log_mean(v[k], v[l]),
                    _ => {
                        let k = g.boundary_cell();
                        let l = mesh.face(axis, mesh.periodic_partner(axis, f)).boundary_cell();
                        log_mean(v[k], v[l])
                    }
                };
                scaled.axes[axis][f] /= vs;
            }
        }
        let op = assemble(mesh, &scaled, &problem.bc);
        let diag: Vec<f64> = op.diag.iter().zip(&op.volumes).map(|(d, w)| d + w).collect();
        let rhs: Vec<f64> = r.iter().zip(&op.volumes).map(|(x, w)| x * w).collect();
        let u = solve_linear(
            &LinearSystem {
                matrix: StencilMatrix {
                    diag,
                    edges: op.edges,
                    banded: mesh.dim() == 1,
                },
                rhs,
            },
            &problem.opts.linear,
        )?
        .x;
        observe(&u);
        let change = u.iter().zip(&v).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        history.push(change);
        v = u;
        if change <= tol {
            if let Some((cell, value)) = crate::field::first_non_positive(&v) {
                return Err(Error::NonPositiveDensity { cell, value });
            }
            let phi: Vec<f64> = v.iter().map(|x| x.ln()).collect();
            let res = max_abs(&residual(problem, &phi));
            return Ok(PbSolution {
                phi,
                iterations: it,
                residual: res,
                history,
                method: PbMethod::Picard,
            });
        }
    }
    Err(Error::SolverDiverged {
        iterations: problem.opts.max_picard,
        residual: *history.last().unwrap_or(&f64::NAN),
    })
}
