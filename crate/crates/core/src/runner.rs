//! Time loop shared by the command line and the validation suites.

use serde::{Deserialize, Serialize};

use crate::analytic::RiemannIceSolution;
use crate::apscheme::ApScheme;
use crate::bench::{CaseSpec, InitialProfile, Reference};
use crate::diagnostics::{min_value, quasineutrality_residual, total_energy, total_mass, DiagRecord, DiagSeries};
use crate::error::{Error, Result};
use crate::mesh::{project_initial, MacMesh, State};
use crate::output::{face_to_cell, Frame};
use crate::refschemes::{
    collocated_energy, collocated_initial, rusanov_dt, rusanov_step, CollocatedState, IceScheme, RusanovConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// The staggered asymptotic-preserving scheme.
    Ap,
    /// Explicit collocated Rusanov scheme.
    Rusanov,
    /// Limit scheme of the isothermal Euler system; ignores `eps`.
    Ice,
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ap" => Ok(SchemeKind::Ap),
            "rusanov" => Ok(SchemeKind::Rusanov),
            "ice" => Ok(SchemeKind::Ice),
            _ => Err(Error::Config(format!("unknown scheme '{s}' (expected ap, rusanov or ice)"))),
        }
    }
}

/// Optional overrides of the scheme defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub gamma: Option<f64>,
    pub theta: Option<f64>,
    pub pb_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    /// Mass entering through the boundary during the step. The reference
    /// schemes report zero, so their drift includes boundary fluxes.
    pub inflow: f64,
}

/// A scheme together with its current time level.
pub trait Stepper {
    fn time(&self) -> f64;
    /// Advances by the scheme's own step, never past `dt_cap`.
    fn advance(&mut self, dt_cap: f64) -> Result<StepReport>;
    fn frame(&self) -> Frame;
    /// Diagnostics of the current level; `dt` is the step that produced it.
    fn record(&self, dt: f64) -> Result<DiagRecord>;
}

pub struct ApStepper<'m> {
    scheme: ApScheme<'m>,
    pub state: State,
}

impl<'m> ApStepper<'m> {
    pub fn new(scheme: ApScheme<'m>, state: State) -> Self {
        ApStepper { scheme, state }
    }
}

impl Stepper for ApStepper<'_> {
    fn time(&self) -> f64 {
        self.state.t
    }

    fn advance(&mut self, dt_cap: f64) -> Result<StepReport> {
        let (next, info) = self.scheme.step(&self.state, dt_cap)?;
        self.state = next;
        Ok(StepReport {
            dt: info.dt,
            inflow: info.boundary_inflow,
        })
    }

    fn frame(&self) -> Frame {
        Frame {
            t: self.state.t,
            rho: self.state.rho.values.clone(),
            vel: face_to_cell(self.scheme.mesh(), &self.state.u),
            phi: self.state.phi.values.clone(),
        }
    }

    fn record(&self, dt: f64) -> Result<DiagRecord> {
        let mesh = self.scheme.mesh();
        let cfg = self.scheme.config();
        let s = &self.state;
        Ok(DiagRecord {
            t: s.t,
            dt,
            mass: total_mass(mesh, &s.rho),
            min_rho: min_value(&s.rho),
            energy: total_energy(mesh, s, cfg.eps, &cfg.bcs.potential)?,
            qn_residual: quasineutrality_residual(&s.rho, &s.phi),
        })
    }
}

pub struct IceStepper<'m> {
    mesh: &'m MacMesh,
    scheme: IceScheme<'m>,
    bc: [crate::Bc; 4],
    pub state: State,
}

impl Stepper for IceStepper<'_> {
    fn time(&self) -> f64 {
        self.state.t
    }

    fn advance(&mut self, dt_cap: f64) -> Result<StepReport> {
        let (next, dt) = self.scheme.step(&self.state, dt_cap)?;
        self.state = next;
        Ok(StepReport { dt, inflow: 0.0 })
    }

    fn frame(&self) -> Frame {
        Frame {
            t: self.state.t,
            rho: self.state.rho.values.clone(),
            vel: face_to_cell(self.mesh, &self.state.u),
            phi: self.state.phi.values.clone(),
        }
    }

    fn record(&self, dt: f64) -> Result<DiagRecord> {
        let s = &self.state;
        Ok(DiagRecord {
            t: s.t,
            dt,
            mass: total_mass(self.mesh, &s.rho),
            min_rho: min_value(&s.rho),
            // with φ = ln ρ̃ the Boltzmann part is the isothermal internal energy
            energy: total_energy(self.mesh, s, 0.0, &self.bc)?,
            qn_residual: 0.0,
        })
    }
}

pub struct RusanovStepper<'m> {
    mesh: &'m MacMesh,
    cfg: RusanovConfig,
    pub state: CollocatedState,
}

impl Stepper for RusanovStepper<'_> {
    fn time(&self) -> f64 {
        self.state.t
    }

    fn advance(&mut self, dt_cap: f64) -> Result<StepReport> {
        let dt = rusanov_dt(self.mesh, &self.state, &self.cfg).min(dt_cap);
        let next = rusanov_step(self.mesh, &self.state, dt, &self.cfg)?;
        self.state = next;
        Ok(StepReport { dt, inflow: 0.0 })
    }

    fn frame(&self) -> Frame {
        Frame {
            t: self.state.t,
            rho: self.state.rho.clone(),
            vel: self.state.vel.clone(),
            phi: self.state.phi.clone(),
        }
    }

    fn record(&self, dt: f64) -> Result<DiagRecord> {
        let s = &self.state;
        Ok(DiagRecord {
            t: s.t,
            dt,
            mass: total_mass(self.mesh, &s.rho),
            min_rho: min_value(&s.rho),
            energy: collocated_energy(self.mesh, s, self.cfg.eps, &self.cfg.bcs.potential)?,
            qn_residual: quasineutrality_residual(&s.rho, &s.phi),
        })
    }
}

/// Builds the stepper of `scheme` for `case` on `mesh`, starting from the projected initial data.
pub fn build_stepper<'m>(
    case: &CaseSpec,
    mesh: &'m MacMesh,
    scheme: SchemeKind,
    tuning: &Tuning,
) -> Result<Box<dyn Stepper + 'm>> {
    match scheme {
        SchemeKind::Ap => {
            let mut cfg = case.scheme_config();
            if let Some(g) = tuning.gamma {
                cfg.gamma = g;
            }
            if let Some(t) = tuning.theta {
                cfg.theta = t;
            }
            if let Some(t) = tuning.pb_tol {
                cfg.pb.tol = t;
            }
            let state = project_initial(&case.initial, mesh, &case.bcs, case.eps, &cfg.pb)?;
            Ok(Box::new(ApStepper::new(ApScheme::new(mesh, cfg)?, state)))
        }
        SchemeKind::Ice => {
            let mut cfg = case.scheme_config();
            // the limit scheme keeps the logarithmic mean
            cfg.interface = Default::default();
            if let Some(g) = tuning.gamma {
                cfg.gamma = g;
            }
            if let Some(t) = tuning.theta {
                cfg.theta = t;
            }
            if let Some(t) = tuning.pb_tol {
                cfg.pb.tol = t;
            }
            let bc = cfg.bcs.potential;
            let scheme = IceScheme::new(mesh, cfg)?;
            let state = scheme.initial(&case.initial)?;
            Ok(Box::new(IceStepper {
                mesh,
                scheme,
                bc,
                state,
            }))
        }
        SchemeKind::Rusanov => {
            let mut cfg = RusanovConfig::new(case.eps, case.bcs.clone());
            if let Some(t) = tuning.theta {
                cfg.theta = t;
            }
            if let Some(t) = tuning.pb_tol {
                cfg.pb.tol = t;
            }
            if tuning.gamma.is_some() {
                return Err(Error::Config("gamma has no meaning for the Rusanov scheme".into()));
            }
            let state = collocated_initial(&case.initial, mesh, &cfg)?;
            Ok(Box::new(RusanovStepper { mesh, cfg, state }))
        }
    }
}

/// What the time loop did.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: usize,
    pub t: f64,
    pub series: DiagSeries,
    /// Cumulative boundary inflow at each recorded level.
    pub inflow: Vec<f64>,
    /// Times at which snapshots were taken, in order.
    pub snapshots: Vec<f64>,
    /// The error that stopped the run early, if any.
    pub failure: Option<Error>,
}

impl RunSummary {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    /// Largest `|m^n − m^0 − inflow^n| / m^0` over the recorded levels.
    pub fn mass_drift(&self) -> f64 {
        let r = self.series.records();
        let Some(m0) = r.first().map(|r| r.mass) else {
            return 0.0;
        };
        r.iter()
            .zip(&self.inflow)
            .fold(0.0_f64, |m, (rec, inflow)| m.max((rec.mass - m0 - inflow).abs() / m0.abs()))
    }

    /// Smallest density over all recorded levels.
    pub fn min_density(&self) -> f64 {
        self.series.records().iter().map(|r| r.min_rho).fold(f64::INFINITY, f64::min)
    }
}

/// Sorted snapshot times in `(0, t_final]`, always ending at `t_final`.
pub fn snapshot_schedule(times: &[f64], t_final: f64) -> Vec<f64> {
    let mut out: Vec<f64> = times.iter().copied().filter(|t| *t > 0.0 && *t < t_final).collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out.push(t_final);
    out
}

/// Runs `stepper` to `t_final`, clipping steps to land on every snapshot time.
///
/// Diagnostics are recorded at the start and after every step. A failing step
/// or callback ends the loop and is reported in the summary.
pub fn run(
    stepper: &mut dyn Stepper,
    t_final: f64,
    snapshot_times: &[f64],
    mut on_snapshot: impl FnMut(&dyn Stepper) -> Result<()>,
) -> RunSummary {
    let schedule = snapshot_schedule(snapshot_times, t_final);
    let mut summary = RunSummary {
        steps: 0,
        t: stepper.time(),
        series: DiagSeries::new(),
        inflow: Vec::new(),
        snapshots: Vec::new(),
        failure: None,
    };
    let outcome = (|| -> Result<()> {
        summary.series.push(stepper.record(0.0)?)?;
        summary.inflow.push(0.0);
        let mut total_inflow = 0.0;
        let mut next = 0;
        while next < schedule.len() {
            let target = schedule[next];
            let t = stepper.time();
            if target - t <= 1e-12 * target.abs().max(1.0) {
                on_snapshot(stepper)?;
                summary.snapshots.push(target);
                next += 1;
                continue;
            }
            let report = stepper.advance(target - t)?;
            if report.dt < 1e-14 * t_final {
                return Err(Error::TimeStepUnderflow { dt: report.dt });
            }
            summary.steps += 1;
            total_inflow += report.inflow;
            summary.t = stepper.time();
            summary.series.push(stepper.record(report.dt)?)?;
            summary.inflow.push(total_inflow);
        }
        Ok(())
    })();
    summary.t = stepper.time();
    summary.failure = outcome.err();
    summary
}

/// Exact-solution columns for cases with a closed-form reference.
pub fn exact_columns(case: &CaseSpec, mesh: &MacMesh, t: f64) -> Result<Vec<(String, Vec<f64>)>> {
    match (case.reference, &case.initial) {
        (Reference::IceExact, InitialProfile::Riemann { n_r }) if t > 0.0 => {
            let sol = RiemannIceSolution::new(*n_r)?;
            let (rho, u): (Vec<f64>, Vec<f64>) =
                (0..mesh.n_cells()).map(|k| sol.eval(t, mesh.cell_center(k)[0])).unzip();
            Ok(vec![("rho_exact".into(), rho), ("u_exact".into(), u)])
        }
        _ => Ok(Vec::new()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::case;

    #[test]
    fn schedule_ends_at_final_time() {
        assert_eq!(snapshot_schedule(&[0.5, 0.1, 2.0, 0.1], 1.0), vec![0.1, 0.5, 1.0]);
        assert_eq!(snapshot_schedule(&[], 2.0), vec![2.0]);
    }

    #[test]
    fn lands_on_snapshot_times() {
        let c = case("five_branch").unwrap().with_cells(&[40]).unwrap();
        let mesh = c.mesh().unwrap();
        for scheme in [SchemeKind::Ap, SchemeKind::Rusanov, SchemeKind::Ice] {
            let mut s = build_stepper(&c, &mesh, scheme, &Tuning::default()).unwrap();
            let mut seen = Vec::new();
            let summary = run(s.as_mut(), 0.05, &[0.013, 0.02], |st| {
                seen.push(st.time());
                Ok(())
            });
            assert!(summary.completed(), "{scheme:?}: {:?}", summary.failure);
            assert_eq!(seen.len(), 3);
            for (a, b) in seen.iter().zip([0.013, 0.02, 0.05]) {
                assert!((a - b).abs() < 1e-12, "{scheme:?}: {a} vs {b}");
            }
            assert_eq!(summary.series.records().len(), summary.steps + 1);
        }
    }

    #[test]
    fn scheme_names_parse() {
        assert_eq!("ice".parse::<SchemeKind>().unwrap(), SchemeKind::Ice);
        assert!("upwind".parse::<SchemeKind>().is_err());
    }
}
