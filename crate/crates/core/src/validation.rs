//! Verification suites, one per acceptance criterion.
//!
//! Each suite returns a [`Check`] with its verdict and the measured numbers,
//! so the same code backs the acceptance tests and `qn-epb verify`.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::RiemannIceSolution;
use crate::apscheme::{dual_fluxes, mass_update, ApScheme, SchemeConfig};
use crate::bench::{case, CaseSpec, InitialProfile, Reference};
use crate::boundary::{Bc, BoundarySpec};
use crate::diagnostics::sheath_edge;
use crate::discops::{divergence, duality_residual, gradient};
use crate::error::{Error, Result};
use crate::field::FaceField;
use crate::mesh::{apply_velocity_bc, dual_average, MacMesh};
use crate::output::{centre_cut, Frame};
use crate::pbsolver::{picard_solve, solve_pb, EllipticProblem, PbOptions};
use crate::refschemes::{ice_state, IceScheme};
use crate::runner::{build_stepper, run, RunSummary, SchemeKind, Tuning};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Operators,
    PoissonBoltzmann,
    Conservation,
    Energy,
    Asymptotic,
    Riemann,
    Sheath,
    Explosion,
    ShockTube,
    LimitConsistency,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Operators,
        Suite::PoissonBoltzmann,
        Suite::Conservation,
        Suite::Energy,
        Suite::Asymptotic,
        Suite::Riemann,
        Suite::Sheath,
        Suite::Explosion,
        Suite::ShockTube,
        Suite::LimitConsistency,
    ];

    /// Criterion number, 1 to 10.
    pub fn id(self) -> usize {
        Suite::ALL.iter().position(|s| *s == self).unwrap() + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Operators => "operators",
            Suite::PoissonBoltzmann => "poisson_boltzmann",
            Suite::Conservation => "conservation",
            Suite::Energy => "energy",
            Suite::Asymptotic => "asymptotic",
            Suite::Riemann => "riemann",
            Suite::Sheath => "sheath",
            Suite::Explosion => "explosion",
            Suite::ShockTube => "shock_tube",
            Suite::LimitConsistency => "limit_consistency",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite '{s}'")))
    }
}

/// Problem sizes: `Full` uses the criterion settings, `Quick` a smoke-test scale
/// with the same thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Full,
    Quick,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: usize,
    pub suite: Suite,
    pub passed: bool,
    /// Names of the conditions that failed.
    pub failed: Vec<String>,
    pub summary: String,
    pub metrics: BTreeMap<String, f64>,
    pub seconds: f64,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<18} {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.suite.name(),
            self.summary,
            self.seconds
        )
    }
}

/// Accumulates named measurements and failed conditions.
#[derive(Default)]
struct Tally {
    metrics: BTreeMap<String, f64>,
    failed: Vec<String>,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Tally {
    fn metric(&mut self, name: impl Into<String>, v: f64) {
        self.metrics.insert(name.into(), v);
    }

    /// Records `value ≤ bound` under `name`.
    fn at_most(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        let name = name.into();
        if !(value <= bound) {
            self.failures.push(format!("{name} = {value:.3e} > {bound:.1e}"));
            self.failed.push(name.clone());
        }
        self.notes.push(format!("{name} {value:.2e}"));
        self.metrics.insert(name, value);
    }

    fn require(&mut self, ok: bool, name: &str, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
            self.failed.push(name.into());
        }
    }

    fn fail(&mut self, name: &str, what: impl Into<String>) {
        self.failures.push(what.into());
        self.failed.push(name.into());
    }

    fn finish(self, suite: Suite, start: Instant) -> Check {
        let passed = self.failures.is_empty();
        let summary = if passed {
            self.notes.join(", ")
        } else {
            self.failures.join("; ")
        };
        Check {
            id: suite.id(),
            suite,
            passed,
            failed: self.failed,
            summary,
            metrics: self.metrics,
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}

/// Runs one suite. Errors inside a suite are reported as failures.
pub fn run_suite(suite: Suite, scale: Scale) -> Check {
    let start = Instant::now();
    let mut t = Tally::default();
    let outcome = match suite {
        Suite::Operators => operators(&mut t, scale),
        Suite::PoissonBoltzmann => poisson_boltzmann(&mut t, scale),
        Suite::Conservation => conservation(&mut t, scale),
        Suite::Energy => energy(&mut t, scale),
        Suite::Asymptotic => asymptotic(&mut t, scale),
        Suite::Riemann => riemann(&mut t, scale),
        Suite::Sheath => sheath(&mut t, scale),
        Suite::Explosion => explosion(&mut t, scale),
        Suite::ShockTube => shock_tube(&mut t, scale),
        Suite::LimitConsistency => limit_consistency(&mut t, scale),
    };
    if let Err(e) = outcome {
        t.fail("error", format!("error: {e}"));
    }
    t.finish(suite, start)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly increasing coordinates of `n` cells on `[0, 1]` with widths in `[0.5, 1.5]` times the mean.
fn random_coords(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| r.gen_range(0.5..1.5)).collect();
    let total: f64 = w.iter().sum();
    let mut c = vec![0.0];
    let mut acc = 0.0;
    for wi in w {
        acc += wi / total;
        c.push(acc);
    }
    c
}

fn random_mesh(r: &mut ChaCha8Rng, dim: usize) -> Result<MacMesh> {
    let nx = r.gen_range(2..24);
    let x = random_coords(r, nx);
    let y = (dim == 2).then(|| {
        let ny = r.gen_range(2..24);
        random_coords(r, ny)
    });
    MacMesh::from_face_coords(x, y)
}

/// Random face field vanishing on external faces.
fn random_interior_field(r: &mut ChaCha8Rng, mesh: &MacMesh) -> FaceField {
    FaceField {
        axes: (0..mesh.dim())
            .map(|a| {
                mesh.faces(a)
                    .iter()
                    .map(|g| if g.is_interior() { r.gen_range(-1.0..1.0) } else { 0.0 })
                    .collect()
            })
            .collect(),
    }
}

fn operators(t: &mut Tally, scale: Scale) -> Result<()> {
    let trials = if scale == Scale::Full { 100 } else { 10 };
    for dim in [1, 2] {
        let mut r = rng(10 + dim as u64);
        let mut worst_duality: f64 = 0.0;
        let mut worst_balance: f64 = 0.0;
        for _ in 0..trials {
            let mesh = random_mesh(&mut r, dim)?;
            let n = mesh.n_cells();
            let q: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
            let v = random_interior_field(&mut r, &mesh);

            // scale of the two sums, so the residual is relative
            let div = divergence(&mesh, &v)?;
            let grad = gradient(&mesh, &q, &[Bc::NeumannZero; 4])?;
            let mut size = 0.0;
            for k in 0..n {
                size += (mesh.cell_volume(k) * q[k] * div[k]).abs();
            }
            for a in 0..dim {
                for (f, g) in mesh.faces(a).iter().enumerate() {
                    size += (g.dual_volume * grad.axes[a][f] * v.axes[a][f]).abs();
                }
            }
            worst_duality = worst_duality.max(duality_residual(&mesh, &q, &v)?.abs() / size);

            let rho: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..2.0)).collect();
            let flux = random_interior_field(&mut r, &mesh);
            let dt = r.gen_range(1e-3..1e-1);
            let next = mass_update(&mesh, &rho, &flux, dt);
            let before = dual_average(&mesh, &rho)?;
            let after = dual_average(&mesh, &next)?;
            let duals = dual_fluxes(&mesh, &flux);
            for a in 0..dim {
                for (f, g) in mesh.faces(a).iter().enumerate() {
                    if !g.is_interior() {
                        continue;
                    }
                    let change = g.dual_volume * (after.axes[a][f] - before.axes[a][f]);
                    let out = dt * duals.net_outflow(a, f);
                    let size = g.dual_volume * before.axes[a][f]
                        + dt * duals.axes[a][f].iter().map(|e| e.abs()).sum::<f64>();
                    worst_balance = worst_balance.max((change + out).abs() / size);
                }
            }
        }
        t.at_most(format!("duality_{dim}d"), worst_duality, 1e-12);
        t.at_most(format!("dual_balance_{dim}d"), worst_balance, 1e-12);
    }
    Ok(())
}

fn pb_problem<'m>(mesh: &'m MacMesh, rho: Vec<f64>, eps: f64, bc: [Bc; 4], tol: f64) -> Result<EllipticProblem<'m>> {
    let opts = PbOptions {
        tol,
        ..PbOptions::default()
    };
    EllipticProblem::new(mesh, FaceField::constant(&mesh.face_counts(), eps * eps), rho, bc, opts)
}

fn poisson_boltzmann(t: &mut Tally, scale: Scale) -> Result<()> {
    let pairs = if scale == Scale::Full { 100 } else { 10 };
    let mut r = rng(20);
    let neumann = [Bc::NeumannZero; 4];

    let mut worst_const: f64 = 0.0;
    for (dim, bc) in [(1, neumann), (2, neumann), (1, [Bc::Periodic; 4]), (2, [Bc::Periodic; 4])] {
        let mesh = random_mesh(&mut r, dim)?;
        for c in [1e-3, 0.5, 1.0, 7.0] {
            let p = pb_problem(&mesh, vec![c; mesh.n_cells()], 0.1, bc, 1e-12)?;
            let phi = solve_pb(&p, None)?.phi;
            worst_const = worst_const.max(phi.iter().map(|v| (v - c.ln()).abs()).fold(0.0, f64::max));
        }
    }
    t.at_most("constant_solution_error", worst_const, 1e-10);

    // comparison principle and max-principle bounds on Neumann solves
    let mut order_violation: f64 = 0.0;
    let mut bound_violation: f64 = 0.0;
    let mut picard_gap: f64 = 0.0;
    for trial in 0..pairs {
        let dim = 1 + trial % 2;
        let mesh = random_mesh(&mut r, dim)?;
        let eps = [1.0, 1e-1, 1e-2, 1e-4][trial % 4];
        let low: Vec<f64> = (0..mesh.n_cells()).map(|_| r.gen_range(0.05..3.0)).collect();
        let high: Vec<f64> = low.iter().map(|v| v + r.gen_range(0.0..1.0)).collect();
        let mut sols = Vec::new();
        for rho in [low, high] {
            let p = pb_problem(&mesh, rho.clone(), eps, neumann, 1e-12)?;
            let phi = solve_pb(&p, None)?.phi;
            let lo = rho.iter().copied().fold(f64::INFINITY, f64::min).ln();
            let hi = rho.iter().copied().fold(0.0, f64::max).ln();
            for v in &phi {
                bound_violation = bound_violation.max(lo - v).max(v - hi);
            }
            sols.push(phi);
        }
        for (a, b) in sols[0].iter().zip(&sols[1]) {
            order_violation = order_violation.max(a - b);
        }
        if trial % 5 == 0 {
            let p = pb_problem(&mesh, (0..mesh.n_cells()).map(|_| r.gen_range(0.1..2.0)).collect(), eps, neumann, 1e-12)?;
            let newton = solve_pb(&p, None)?.phi;
            let picard = picard_solve(&p)?.phi;
            let gap = newton.iter().zip(&picard).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            picard_gap = picard_gap.max(gap);
        }
    }
    // both are zero in exact arithmetic; 1e-10 absorbs the solver tolerance
    t.at_most("comparison_violation", order_violation.max(0.0), 1e-10);
    t.at_most("bound_violation", bound_violation.max(0.0), 1e-10);
    t.at_most("newton_picard_gap", picard_gap, 1e-8);
    Ok(())
}

/// A named benchmark run with its settings.
struct Job {
    label: String,
    case: CaseSpec,
    t_final: f64,
}

fn job(name: &str, eps: f64, cells: usize, t_final: f64) -> Result<Job> {
    let mut c = case(name)?.with_cells(&[cells])?;
    c.eps = eps;
    Ok(Job {
        label: format!("{name}_eps{eps:e}_n{cells}"),
        case: c,
        t_final,
    })
}

fn riemann_job(n_r: f64, cells: usize, t_final: f64) -> Result<Job> {
    let mut c = case("riemann")?.with_cells(&[cells])?;
    c.initial = InitialProfile::Riemann { n_r };
    Ok(Job {
        label: format!("riemann_nr{n_r}_n{cells}"),
        case: c,
        t_final,
    })
}

/// Runs `case` with `scheme` and returns the summary and the final frame.
fn simulate(c: &CaseSpec, scheme: SchemeKind, t_final: f64) -> Result<(RunSummary, Frame, MacMesh)> {
    let mesh = c.mesh()?;
    let mut frame = None;
    let summary = {
        let mut stepper = build_stepper(c, &mesh, scheme, &Tuning::default())?;
        run(stepper.as_mut(), t_final, &[], |s| {
            frame = Some(s.frame());
            Ok(())
        })
    };
    if let Some(e) = summary.failure.clone() {
        return Err(e);
    }
    let frame = frame.ok_or_else(|| Error::Config("run ended without a final snapshot".into()))?;
    Ok((summary, frame, mesh))
}

fn conservation(t: &mut Tally, scale: Scale) -> Result<()> {
    let full = scale == Scale::Full;
    let (tube_fine, riemann_cells, expansion_cells) = if full { (1000, 2000, 2000) } else { (200, 400, 400) };
    let riemann_t = if full { 50.0 } else { 10.0 };
    let mut jobs = vec![
        job("five_branch", 1.0, 100, 1.0)?,
        job("five_branch", 1e-2, 100, 1.0)?,
        job("shock_tube", 1e-2, 100, 0.2)?,
        job("shock_tube", 1e-4, tube_fine, 0.1)?,
        job("plasma_expansion", 1e-2, expansion_cells, 10.0)?,
    ];
    for n_r in [0.5, 0.75, 0.95] {
        jobs.push(riemann_job(n_r, riemann_cells, riemann_t)?);
    }
    for j in jobs {
        match simulate(&j.case, SchemeKind::Ap, j.t_final) {
            Ok((summary, _, _)) => {
                t.at_most(format!("{}_mass_drift", j.label), summary.mass_drift(), 1e-11);
                let min_rho = summary.min_density();
                t.metric(format!("{}_min_rho", j.label), min_rho);
                t.require(min_rho > 0.0, &format!("{}_min_rho", j.label), format!("{}: min rho {min_rho:e} not positive", j.label));
            }
            Err(e) => t.fail(&j.label, format!("{}: {e}", j.label)),
        }
    }
    Ok(())
}

/// Largest step-to-step energy increase relative to `|E⁰|`.
fn worst_energy_rise(summary: &RunSummary) -> f64 {
    let r = summary.series.records();
    let e0 = r[0].energy.total.abs().max(f64::MIN_POSITIVE);
    r.windows(2).map(|w| (w[1].energy.total - w[0].energy.total) / e0).fold(f64::NEG_INFINITY, f64::max)
}

fn energy(t: &mut Tally, scale: Scale) -> Result<()> {
    let tube_cells = if scale == Scale::Full { 1000 } else { 200 };
    let mut closed_tube = job("shock_tube", 1e-4, tube_cells, 0.1)?;
    closed_tube.case.bcs = BoundarySpec::closed();
    closed_tube.label = format!("shock_tube_closed_eps1e-4_n{tube_cells}");
    for j in [job("five_branch", 1.0, 100, 1.0)?, job("five_branch", 1e-2, 100, 1.0)?, closed_tube] {
        match simulate(&j.case, SchemeKind::Ap, j.t_final) {
            Ok((summary, _, _)) => {
                t.at_most(format!("{}_energy_rise", j.label), worst_energy_rise(&summary).max(0.0), 1e-10);
            }
            Err(e) => t.fail(&j.label, format!("{}: {e}", j.label)),
        }
    }
    Ok(())
}

fn l1(mesh: &MacMesh, a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).enumerate().map(|(k, (x, y))| mesh.cell_volume(k) * (x - y).abs()).sum()
}

fn l1_norm(mesh: &MacMesh, a: &[f64]) -> f64 {
    a.iter().enumerate().map(|(k, x)| mesh.cell_volume(k) * x.abs()).sum()
}

fn asymptotic(t: &mut Tally, _scale: Scale) -> Result<()> {
    let mut residuals = Vec::new();
    for eps in [1e-2, 1e-3] {
        let j = job("five_branch", eps, 100, 1.0)?;
        let (summary, _, _) = simulate(&j.case, SchemeKind::Ap, j.t_final)?;
        let last = summary.series.records().last().map(|r| r.qn_residual).unwrap_or(f64::NAN);
        t.metric(format!("qn_residual_eps{eps:e}"), last);
        residuals.push(last);
    }
    let slope = (residuals[0] / residuals[1]).log10();
    t.at_most("qn_slope_deviation", (slope - 2.0).abs(), 0.3);
    t.metric("qn_slope", slope);

    let j = job("five_branch", 1e-8, 100, 1.0)?;
    let (_, ap, mesh) = simulate(&j.case, SchemeKind::Ap, 1.0)?;
    let (_, ice, _) = simulate(&j.case, SchemeKind::Ice, 1.0)?;
    t.at_most("ap_vs_ice_l1", l1(&mesh, &ap.rho, &ice.rho), 1e-3);
    Ok(())
}

/// Position where the density first drops below the midpoint of `above` and `below`,
/// scanning from the right end leftwards, interpolated linearly.
fn front_position(x: &[f64], rho: &[f64], above: f64, below: f64) -> Option<f64> {
    let mid = 0.5 * (above + below);
    let k = rho.iter().rposition(|r| *r >= mid)?;
    if k + 1 == rho.len() {
        return None;
    }
    let s = (mid - rho[k]) / (rho[k + 1] - rho[k]);
    Some(x[k] + s * (x[k + 1] - x[k]))
}

fn riemann(t: &mut Tally, scale: Scale) -> Result<()> {
    let (cells, t_final) = if scale == Scale::Full { (2000, 50.0) } else { (500, 20.0) };
    for n_r in [0.5, 0.75, 0.95] {
        let j = riemann_job(n_r, cells, t_final)?;
        let (_, frame, mesh) = simulate(&j.case, SchemeKind::Ap, t_final)?;
        let sol = RiemannIceSolution::new(n_r)?;
        let x: Vec<f64> = (0..mesh.n_cells()).map(|k| mesh.cell_center(k)[0]).collect();
        let exact: Vec<f64> = x.iter().map(|&xi| sol.eval(t_final, xi).0).collect();
        t.at_most(format!("nr{n_r}_rel_l1"), l1(&mesh, &frame.rho, &exact) / l1_norm(&mesh, &exact), 0.05);

        let shock = sol.u_s * t_final;
        let rho_m = sol.eval(t_final, 0.5 * shock.max(0.0) + 0.5 * sol.u_m * t_final).0;
        let h = mesh.widths(0)[0];
        match front_position(&x, &frame.rho, rho_m, n_r) {
            Some(pos) => {
                t.at_most(format!("nr{n_r}_shock_offset_cells"), (pos - shock).abs() / h, 3.0);
                // for information: distance to the shock of the full jump conditions
                let rh = rankine_hugoniot_speed(n_r)? * t_final;
                t.metric(format!("nr{n_r}_offset_vs_jump_conditions_cells"), (pos - rh).abs() / h);
            }
            None => t.fail(&format!("nr{n_r}_shock_offset_cells"), format!("nr{n_r}: no shock found")),
        }
    }
    Ok(())
}

/// Shock speed of the isothermal Riemann problem from the mass and momentum jump
/// conditions joined to the rarefaction `u = −ln ρ`: with `a = 1 − n_r e^{u_m}`,
/// `u_m² (1 − a) = a²` and `u_s = u_m / a`.
fn rankine_hugoniot_speed(n_r: f64) -> Result<f64> {
    let g = |u: f64| {
        let a = 1.0 - n_r * u.exp();
        u * u * (1.0 - a) - a * a
    };
    // g < 0 near 0 and g > 0 at u = −ln n_r, where a vanishes
    let (mut lo, mut hi) = (1e-12, -n_r.ln());
    if !(g(lo) < 0.0 && g(hi) > 0.0) {
        return Err(Error::NoBracket(format!("jump conditions for n_r = {n_r}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u = 0.5 * (lo + hi);
    Ok(u / (1.0 - n_r * u.exp()))
}

/// Sheath edge of a 1D sheath run, measured from the left boundary.
fn sheath_width(cells: usize) -> Result<f64> {
    let c = case("sheath_1d")?.with_cells(&[cells])?;
    let plateau = match c.bcs.density[0] {
        Bc::Dirichlet(v) => v,
        _ => return Err(Error::Config("sheath inlet density must be Dirichlet".into())),
    };
    let (_, frame, mesh) = simulate(&c, SchemeKind::Ap, c.t_final)?;
    let x: Vec<f64> = (0..mesh.n_cells()).map(|k| mesh.cell_center(k)[0]).collect();
    sheath_edge(&x, &frame.rho, plateau)
}

fn sheath(t: &mut Tally, scale: Scale) -> Result<()> {
    let (coarse, fine) = if scale == Scale::Full { (500, 1000) } else { (100, 200) };
    let a = sheath_width(coarse)?;
    let b = sheath_width(fine)?;
    t.metric(format!("edge_n{coarse}"), a);
    t.metric(format!("edge_n{fine}"), b);
    t.at_most("child_langmuir_gap", ((1.0 - a) - 0.375).abs(), 0.1);
    t.at_most("edge_grid_change", (a - b).abs(), 0.02);
    Ok(())
}

fn explosion(t: &mut Tally, scale: Scale) -> Result<()> {
    let n = if scale == Scale::Full { 100 } else { 40 };
    let c = case("cylindrical_explosion")?.with_cells(&[n, n])?;
    let (_, ap, mesh) = simulate(&c, SchemeKind::Ap, c.t_final)?;
    let (_, ice, _) = simulate(&c, SchemeKind::Ice, c.t_final)?;
    let (_, x_cut) = centre_cut(&mesh, &ap.rho, 0);
    let (_, y_cut) = centre_cut(&mesh, &ap.rho, 1);
    let peak = x_cut.iter().copied().fold(0.0, f64::max);
    let asym = x_cut.iter().zip(&y_cut).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / peak;
    t.at_most("axis_asymmetry", asym, 0.02);
    let (_, ref_cut) = centre_cut(&mesh, &ice.rho, 0);
    let diff: f64 = x_cut.iter().zip(&ref_cut).map(|(a, b)| (a - b).abs()).sum();
    let size: f64 = ref_cut.iter().map(|v| v.abs()).sum();
    t.at_most("cut_vs_limit_rel_l1", diff / size, 0.05);
    Ok(())
}

/// Interior local extrema of `v`, ignoring plateaus flatter than `tol`.
fn count_extrema(v: &[f64], tol: f64) -> usize {
    let d: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).filter(|d| d.abs() > tol).collect();
    d.windows(2).filter(|w| w[0] * w[1] < 0.0).count()
}

/// Cell averages of a fine 1D profile onto a mesh `factor` times coarser.
fn restrict(fine: &[f64], factor: usize) -> Vec<f64> {
    fine.chunks(factor).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}

fn shock_tube(t: &mut Tally, _scale: Scale) -> Result<()> {
    let c = case("shock_tube")?.with_cells(&[100])?;
    let (_, ap, mesh) = simulate(&c, SchemeKind::Ap, c.t_final)?;
    let extrema = count_extrema(&ap.rho, 1e-8);
    t.metric("local_extrema", extrema as f64);
    t.require(extrema >= 3, "local_extrema", format!("only {extrema} local extrema in rho"));
    let fine_cells = match c.reference {
        Reference::RusanovFine { cells } => cells,
        _ => 500,
    };
    let fine = c.clone().with_cells(&[fine_cells])?;
    let (_, reference, _) = simulate(&fine, SchemeKind::Rusanov, c.t_final)?;
    let coarse_ref = restrict(&reference.rho, fine_cells / 100);
    t.at_most("vs_rusanov_rel_l1", l1(&mesh, &ap.rho, &coarse_ref) / l1_norm(&mesh, &coarse_ref), 0.1);
    Ok(())
}

fn limit_consistency(t: &mut Tally, scale: Scale) -> Result<()> {
    let trials = if scale == Scale::Full { 50 } else { 10 };
    let mut r = rng(100);
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let dim = 1 + trial % 2;
        let mesh = random_mesh(&mut r, dim)?;
        let bcs = if trial % 4 < 2 {
            BoundarySpec::closed()
        } else {
            BoundarySpec {
                density: [Bc::NeumannZero; 4],
                velocity: [Bc::NeumannZero; 4],
                potential: [Bc::Periodic; 4],
            }
        };
        let mut cfg = SchemeConfig::new(0.0, bcs);
        cfg.pb.tol = 1e-15;
        let rho: Vec<f64> = (0..mesh.n_cells()).map(|_| r.gen_range(0.2..2.0)).collect();
        let mut u = FaceField {
            axes: (0..dim).map(|a| (0..mesh.face_count(a)).map(|_| r.gen_range(-0.5..0.5)).collect()).collect(),
        };
        apply_velocity_bc(&mesh, &cfg.bcs, &mut u);
        let s = ice_state(0.0, rho, u);
        let ap = ApScheme::new(&mesh, cfg.clone())?;
        let dt = 0.5 * ap.stable_dt(&s)?;
        let a = ap.step_with_dt(&s, dt)?;
        let b = IceScheme::new(&mesh, cfg)?.step_with_dt(&s, dt)?;
        for (x, y) in a.rho_next.iter().zip(b.rho.iter()) {
            worst = worst.max((x - y).abs() / y.abs().max(1.0));
        }
        for d in 0..dim {
            for (x, y) in a.u_next.axes[d].iter().zip(&b.u.axes[d]) {
                worst = worst.max((x - y).abs() / y.abs().max(1.0));
            }
        }
    }
    t.at_most("ap_eps0_vs_ice", worst, 1e-12);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_ids_and_names() {
        for (i, s) in Suite::ALL.iter().enumerate() {
            assert_eq!(s.id(), i + 1);
            assert_eq!(s.name().parse::<Suite>().unwrap(), *s);
        }
    }

    #[test]
    fn extrema_counting() {
        assert_eq!(count_extrema(&[0.0, 1.0, 0.0, 1.0, 0.0], 0.0), 3);
        assert_eq!(count_extrema(&[0.0, 1.0, 1.0, 2.0], 1e-12), 0);
    }

    #[test]
    fn restriction_averages_blocks() {
        assert_eq!(restrict(&[1.0, 3.0, 5.0, 7.0], 2), vec![2.0, 6.0]);
    }

    #[test]
    fn jump_condition_speed() {
        // both jump conditions hold at the returned speed
        let n_r: f64 = 0.5;
        let s = rankine_hugoniot_speed(n_r).unwrap();
        let a_u = {
            // recover u_m from s: u_m = s (1 − n_r e^{u_m}) by fixed point
            let mut u = 0.3;
            for _ in 0..200 {
                u = s * (1.0 - n_r * f64::exp(u));
            }
            u
        };
        let rho_m = (-a_u).exp();
        assert!((s * (rho_m - n_r) - rho_m * a_u).abs() < 1e-12);
        assert!((s * rho_m * a_u - (rho_m * a_u * a_u + rho_m - n_r)).abs() < 1e-12);
        assert!((s * 50.0 - 59.435).abs() < 1e-2);
    }

    #[test]
    fn front_is_interpolated() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let rho = [2.0, 2.0, 1.0, 1.0];
        assert!((front_position(&x, &rho, 2.0, 1.0).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn quick_operator_suite_passes() {
        let c = run_suite(Suite::Operators, Scale::Quick);
        assert!(c.passed, "{c}");
    }
}
