//! Run configuration: a JSON file whose keys the command-line flags override.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use qnepb::bench::{case, CaseSpec, InitialProfile};
use qnepb::runner::{SchemeKind, Tuning};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Vtk,
}

impl std::str::FromStr for Format {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "vtk" => Ok(Format::Vtk),
            _ => bail!("unknown format '{s}' (expected csv or vtk)"),
        }
    }
}

/// Everything a run can set. Absent keys fall back to the case defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub case: Option<String>,
    pub scheme: Option<SchemeKind>,
    pub eps: Option<f64>,
    pub cells: Option<Vec<usize>>,
    /// Right density of the Riemann problem.
    pub nr: Option<f64>,
    pub t_final: Option<f64>,
    pub gamma: Option<f64>,
    pub theta: Option<f64>,
    pub pb_tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub snapshot_times: Option<Vec<f64>>,
    pub format: Option<Format>,
}

/// A checked configuration ready to run.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub case: CaseSpec,
    pub scheme: SchemeKind,
    pub tuning: Tuning,
    pub t_final: f64,
    pub snapshot_times: Vec<f64>,
    pub out: PathBuf,
    pub format: Format,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

/// Parses `500`, `100x100` or `100,100`.
pub fn parse_cells(s: &str) -> Result<Vec<usize>> {
    s.split(['x', ','])
        .map(|p| p.trim().parse::<usize>().with_context(|| format!("bad cell count '{p}' in '{s}'")))
        .collect()
}

fn positive(name: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => bail!("{name} must be positive and finite, got {x}"),
        _ => Ok(()),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid run configuration in {}", path.display()))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn apply_flags(
        &mut self,
        case: Option<String>,
        scheme: Option<String>,
        eps: Option<f64>,
        cells: Option<String>,
        nr: Option<f64>,
        t_final: Option<f64>,
        out: Option<PathBuf>,
        format: Option<String>,
    ) -> Result<()> {
        if case.is_some() {
            self.case = case;
        }
        if let Some(s) = scheme {
            self.scheme = Some(s.parse()?);
        }
        if eps.is_some() {
            self.eps = eps;
        }
        if let Some(c) = cells {
            self.cells = Some(parse_cells(&c)?);
        }
        if nr.is_some() {
            self.nr = nr;
        }
        if t_final.is_some() {
            self.t_final = t_final;
        }
        if out.is_some() {
            self.out = out;
        }
        if let Some(f) = format {
            self.format = Some(f.parse()?);
        }
        Ok(())
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let name = self.case.as_deref().context("no case given (use --case or the 'case' key)")?;
        let mut spec = case(name)?;
        let scheme = self.scheme.unwrap_or(SchemeKind::Ap);
        let mut warnings = Vec::new();

        positive("eps", self.eps)?;
        positive("nr", self.nr)?;
        positive("t_final", self.t_final)?;
        positive("gamma", self.gamma)?;
        positive("theta", self.theta)?;
        positive("pb_tol", self.pb_tol)?;

        if let Some(eps) = self.eps {
            if scheme == SchemeKind::Ice {
                warnings.push(format!("the ice scheme has no Debye length; eps = {eps} is ignored"));
            }
            spec.eps = eps;
        }
        if let Some(cells) = &self.cells {
            spec = spec.with_cells(cells)?;
        }
        if let Some(n_r) = self.nr {
            match spec.initial {
                InitialProfile::Riemann { .. } => spec.initial = InitialProfile::Riemann { n_r },
                _ => bail!("--nr only applies to the riemann case"),
            }
        }
        if self.theta.is_some_and(|t| t >= 1.0) {
            bail!("theta must be below 1");
        }
        let t_final = self.t_final.unwrap_or(spec.t_final);
        spec.t_final = t_final;
        let snapshot_times = match &self.snapshot_times {
            Some(t) => t.clone(),
            None => spec.outputs.snapshot_times.clone(),
        };
        if let Some(t) = snapshot_times.iter().find(|t| !t.is_finite() || **t > t_final) {
            if self.snapshot_times.is_some() {
                bail!("snapshot time {t} lies beyond the final time {t_final}");
            }
        }
        spec.validate()?;

        let format = self.format.unwrap_or(if spec.dim == 1 { Format::Csv } else { Format::Vtk });
        if format == Format::Vtk && spec.dim == 1 {
            bail!("VTK snapshots need a 2D case; use --format csv");
        }
        let out = self.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(&spec.name));
        Ok(Resolved {
            case: spec,
            scheme,
            tuning: Tuning {
                gamma: self.gamma,
                theta: self.theta,
                pb_tol: self.pb_tol,
            },
            t_final,
            snapshot_times,
            out,
            format,
            warnings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_lists() {
        assert_eq!(parse_cells("500").unwrap(), vec![500]);
        assert_eq!(parse_cells("100x80").unwrap(), vec![100, 80]);
        assert_eq!(parse_cells("100,80").unwrap(), vec![100, 80]);
        assert!(parse_cells("ten").is_err());
    }

    #[test]
    fn flags_override_file_keys() {
        let mut c: RunConfig = serde_json::from_str(r#"{"case": "five_branch", "eps": 0.5, "cells": [50]}"#).unwrap();
        c.apply_flags(None, None, Some(1.0), None, None, None, None, None).unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.case.eps, 1.0);
        assert_eq!(r.case.cells, vec![50]);
        assert_eq!(r.format, Format::Csv);
        assert_eq!(r.out, PathBuf::from("runs/five_branch"));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"case": "x", "epsilon": 1}"#).is_err());
        let mut c = RunConfig {
            case: Some("five_branch".into()),
            nr: Some(0.5),
            ..RunConfig::default()
        };
        assert!(c.resolve().is_err());
        c.nr = None;
        c.format = Some(Format::Vtk);
        assert!(c.resolve().is_err());
        c.format = None;
        c.eps = Some(-1.0);
        assert!(c.resolve().is_err());
    }

    #[test]
    fn ice_warns_about_eps() {
        let c = RunConfig {
            case: Some("riemann".into()),
            scheme: Some(SchemeKind::Ice),
            eps: Some(1e-3),
            cells: Some(vec![100]),
            ..RunConfig::default()
        };
        assert_eq!(c.resolve().unwrap().warnings.len(), 1);
    }
}
