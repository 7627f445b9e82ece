//! Registry of benchmark cases.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::apscheme::{InterfaceDensity, SchemeConfig};
use crate::boundary::{Bc, BoundarySpec};
use crate::error::{Error, Result};
use crate::mesh::{build_mesh, Grading, InitialData, MacMesh};

/// Closed-form initial data of each case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialProfile {
    /// `ρ = e^{−(x−π)²}/π`, `u = sin³ x`.
    FiveBranch,
    /// `ρ = 1`, `u = −1` left of `x = 0` and `+1` from it.
    ShockTube,
    /// `ρ = ½ − arctan(πx)/π`, `u = 0`.
    PlasmaExpansion,
    /// `ρ = 1` left of `x = 0`, `n_r` from it; `u = 0`.
    Riemann { n_r: f64 },
    /// `ρ = 1` inside `r ≤ ½`, `0.1` outside; at rest.
    CylindricalExplosion,
    /// Uniform `rho` at rest; the inflow comes from boundary data.
    Sheath { rho: f64 },
    /// Block `[x0, x1] × [y0, y1]` of density `rho` moving with `velocity`, background `floor` at rest.
    IonExtraction {
        block: [f64; 4],
        rho: f64,
        floor: f64,
        velocity: [f64; 2],
    },
}

impl InitialData for InitialProfile {
    fn density(&self, p: [f64; 2]) -> f64 {
        let [x, y] = p;
        match *self {
            InitialProfile::FiveBranch => (-(x - PI).powi(2)).exp() / PI,
            InitialProfile::ShockTube => 1.0,
            InitialProfile::PlasmaExpansion => 0.5 - (PI * x).atan() / PI,
            InitialProfile::Riemann { n_r } => {
                if x < 0.0 {
                    1.0
                } else {
                    n_r
                }
            }
            InitialProfile::CylindricalExplosion => {
                if x.hypot(y) <= 0.5 {
                    1.0
                } else {
                    0.1
                }
            }
            InitialProfile::Sheath { rho } => rho,
            InitialProfile::IonExtraction { block, rho, floor, .. } => {
                if in_block(&block, x, y) {
                    rho
                } else {
                    floor
                }
            }
        }
    }

    fn velocity(&self, p: [f64; 2], axis: usize) -> f64 {
        let [x, y] = p;
        match *self {
            InitialProfile::FiveBranch => x.sin().powi(3),
            InitialProfile::ShockTube => {
                if x < 0.0 {
                    -1.0
                } else {
                    1.0
                }
            }
            InitialProfile::IonExtraction { block, velocity, .. } => {
                if in_block(&block, x, y) {
                    velocity[axis]
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    }
}

fn in_block(b: &[f64; 4], x: f64, y: f64) -> bool {
    x >= b[0] && x <= b[1] && y >= b[2] && y <= b[3]
}

/// How a case's reference solution is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Reference {
    None,
    /// Collocated Rusanov scheme on a finer 1D mesh.
    RusanovFine { cells: usize },
    /// Self-similar isothermal solution.
    IceExact,
    /// Limit scheme on the same mesh.
    IceScheme,
}

/// Optional 1D cuts written next to 2D snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutPlan {
    None,
    /// Cuts along the two axes through the domain centre.
    AxesThroughCentre,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputPlan {
    /// Snapshot times; the final time is always written.
    pub snapshot_times: Vec<f64>,
    pub cut: CutPlan,
}

/// A benchmark: geometry, data, boundary conditions and outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub name: String,
    pub dim: usize,
    pub bounds: Vec<(f64, f64)>,
    pub cells: Vec<usize>,
    pub eps: f64,
    pub t_final: f64,
    pub initial: InitialProfile,
    pub bcs: BoundarySpec,
    pub reference: Reference,
    pub outputs: OutputPlan,
    /// Face density of the staggered scheme for this case.
    #[serde(default)]
    pub interface: InterfaceDensity,
    pub notes: String,
}

impl CaseSpec {
    pub fn mesh(&self) -> Result<MacMesh> {
        build_mesh(&self.bounds, &self.cells, &vec![Grading::Uniform; self.dim])
    }

    /// Replaces the cell count of every axis by `n` (1D) or scales a 2D mesh to `n` cells along x.
    pub fn with_cells(mut self, cells: &[usize]) -> Result<Self> {
        if cells.len() != self.dim {
            return Err(Error::Config(format!(
                "case '{}' is {}D but {} cell counts were given",
                self.name,
                self.dim,
                cells.len()
            )));
        }
        self.cells = cells.to_vec();
        Ok(self)
    }

    /// Default scheme settings for this case.
    pub fn scheme_config(&self) -> SchemeConfig {
        let mut cfg = SchemeConfig::new(self.eps, self.bcs.clone());
        cfg.interface = self.interface;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.len() != self.dim || self.cells.len() != self.dim {
            return Err(Error::Config(format!("case '{}' has inconsistent dimensions", self.name)));
        }
        self.bcs.validate(self.dim)?;
        let mesh = self.mesh()?;
        for k in 0..mesh.n_cells() {
            let r = self.initial.density(mesh.cell_center(k));
            if !(r > 0.0) {
                return Err(Error::NonPositiveDensity { cell: k, value: r });
            }
        }
        Ok(())
    }
}

pub const CASE_NAMES: [&str; 7] = [
    "five_branch",
    "shock_tube",
    "plasma_expansion",
    "riemann",
    "cylindrical_explosion",
    "sheath_1d",
    "ion_extraction_2d",
];

fn bcs_1d(density: [Bc; 2], velocity: [Bc; 2], potential: [Bc; 2]) -> BoundarySpec {
    let pad = |b: [Bc; 2]| [b[0], b[1], Bc::NeumannZero, Bc::NeumannZero];
    BoundarySpec {
        density: pad(density),
        velocity: pad(velocity),
        potential: pad(potential),
    }
}

/// Looks up a case by name with its default parameters.
pub fn case(name: &str) -> Result<CaseSpec> {
    use Bc::*;
    let spec = match name {
        "five_branch" => CaseSpec {
            name: name.into(),
            dim: 1,
            bounds: vec![(0.0, 2.0 * PI)],
            cells: vec![100],
            eps: 1.0,
            t_final: 1.0,
            initial: InitialProfile::FiveBranch,
            bcs: bcs_1d([NeumannZero; 2], [NeumannZero; 2], [Periodic; 2]),
            reference: Reference::RusanovFine { cells: 500 },
            outputs: OutputPlan {
                snapshot_times: vec![1.0],
                cut: CutPlan::None,
            },
            interface: InterfaceDensity::LogMean,
            notes: "run with eps 1 (dispersive) and 1e-2 (quasineutral)".into(),
        },
        "shock_tube" => CaseSpec {
            name: name.into(),
            dim: 1,
            bounds: vec![(-0.2, 0.2)],
            cells: vec![100],
            eps: 1e-2,
            t_final: 0.2,
            initial: InitialProfile::ShockTube,
            bcs: bcs_1d([ExtrapolateZeroOrder; 2], [ExtrapolateZeroOrder; 2], [Periodic; 2]),
            reference: Reference::RusanovFine { cells: 500 },
            outputs: OutputPlan {
                snapshot_times: vec![0.2],
                cut: CutPlan::None,
            },
            interface: InterfaceDensity::Upwind,
            notes: "second setting: eps 1e-4 on 1000 cells up to t = 0.1, Rusanov reference on 2000 cells".into(),
        },
        "plasma_expansion" => CaseSpec {
            name: name.into(),
            dim: 1,
            bounds: vec![(-10.0, 40.0)],
            cells: vec![10000],
            eps: 1e-2,
            t_final: 10.0,
            initial: InitialProfile::PlasmaExpansion,
            bcs: bcs_1d([NeumannZero; 2], [NoSlip, NeumannZero], [NeumannZero; 2]),
            reference: Reference::None,
            outputs: OutputPlan {
                snapshot_times: vec![2.5, 5.0, 7.5, 10.0],
                cut: CutPlan::None,
            },
            interface: InterfaceDensity::LogMean,
            notes: "final time is not fixed by the benchmark; 10 is used".into(),
        },
        "riemann" => CaseSpec {
            name: name.into(),
            dim: 1,
            bounds: vec![(-80.0, 100.0)],
            cells: vec![9000],
            eps: 1e-4,
            t_final: 50.0,
            initial: InitialProfile::Riemann { n_r: 0.5 },
            bcs: bcs_1d([ExtrapolateZeroOrder; 2], [NoSlip; 2], [NeumannZero; 2]),
            reference: Reference::IceExact,
            outputs: OutputPlan {
                snapshot_times: vec![50.0],
                cut: CutPlan::None,
            },
            interface: InterfaceDensity::LogMean,
            notes: "right density n_r in {0.5, 0.75, 0.95}".into(),
        },
        "cylindrical_explosion" => CaseSpec {
            name: name.into(),
            dim: 2,
            bounds: vec![(-1.0, 1.0), (-1.0, 1.0)],
            cells: vec![200, 200],
            eps: 1e-4,
            t_final: 0.2,
            initial: InitialProfile::CylindricalExplosion,
            bcs: BoundarySpec {
                density: [NeumannZero; 4],
                velocity: [NoSlip; 4],
                potential: [NeumannZero; 4],
            },
            reference: Reference::IceScheme,
            outputs: OutputPlan {
                snapshot_times: vec![0.2],
                cut: CutPlan::AxesThroughCentre,
            },
            interface: InterfaceDensity::LogMean,
            notes: String::new(),
        },
        "sheath_1d" => CaseSpec {
            name: name.into(),
            dim: 1,
            bounds: vec![(0.0, 1.0)],
            cells: vec![500],
            eps: 1e-2,
            t_final: 2.5,
            initial: InitialProfile::Sheath { rho: 1e-5 },
            bcs: bcs_1d(
                [Dirichlet(5.0), ExtrapolateZeroOrder],
                [Dirichlet(1.25), ExtrapolateZeroOrder],
                [NeumannZero, Dirichlet(-500.0)],
            ),
            reference: Reference::None,
            outputs: OutputPlan {
                snapshot_times: vec![2.5],
                cut: CutPlan::None,
            },
            interface: InterfaceDensity::Upwind,
            notes: "inlet density and velocity enter as boundary data on the left face; meshes of 100, 500 and 1000 cells"
                .into(),
        },
        "ion_extraction_2d" => CaseSpec {
            name: name.into(),
            dim: 2,
            bounds: vec![(0.0, 1.0), (0.0, 2.5)],
            cells: vec![80, 200],
            eps: 0.18e-2,
            t_final: 0.5,
            initial: InitialProfile::IonExtraction {
                block: [0.0, 0.75, 0.75, 1.75],
                rho: 5.0,
                floor: 1e-5,
                velocity: [0.0, 0.25],
            },
            bcs: BoundarySpec {
                density: [ExtrapolateZeroOrder; 4],
                velocity: [NoSlip, ExtrapolateZeroOrder, ExtrapolateZeroOrder, ExtrapolateZeroOrder],
                potential: [NeumannZero, Dirichlet(-1000.0), Dirichlet(-10.0), Dirichlet(-10.0)],
            },
            reference: Reference::None,
            outputs: OutputPlan {
                snapshot_times: vec![0.1, 0.3, 0.5],
                cut: CutPlan::None,
            },
            interface: InterfaceDensity::LogMean,
            notes: "plasma block placement inferred from the schematic: free boundary at x = 0, cathode at x = 1".into(),
        },
        _ => return Err(Error::UnknownCase(name.into())),
    };
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_cases_valid_and_round_trip() {
        for name in CASE_NAMES {
            let c = case(name).unwrap();
            c.bcs.validate(c.dim).unwrap();
            let text = serde_json::to_string(&c).unwrap();
            let back: CaseSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(back, c, "{name}");
            assert_eq!(serde_json::to_string(&back).unwrap(), text);
        }
        assert!(matches!(case("nope"), Err(Error::UnknownCase(_))));
    }

    #[test]
    fn small_cases_have_positive_density() {
        for name in ["five_branch", "shock_tube", "sheath_1d", "riemann"] {
            case(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn profiles() {
        let p = InitialProfile::FiveBranch;
        assert!((p.density([PI, 0.0]) - 1.0 / PI).abs() < 1e-15);
        assert!((p.velocity([PI / 2.0, 0.0], 0) - 1.0).abs() < 1e-15);
        let s = InitialProfile::ShockTube;
        assert_eq!(s.velocity([0.0, 0.0], 0), 1.0);
        assert_eq!(s.velocity([-1e-9, 0.0], 0), -1.0);
        let c = InitialProfile::CylindricalExplosion;
        assert_eq!(c.density([0.3, 0.3]), 1.0);
        assert_eq!(c.density([0.4, 0.4]), 0.1);
    }
}
