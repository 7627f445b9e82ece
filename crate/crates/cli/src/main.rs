//! `qn-epb`: run benchmark cases, verify the schemes, list the cases.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qnepb::bench::{case, CutPlan, CASE_NAMES};
use qnepb::output::{write_axis_cuts, write_csv, write_file, write_vtk, Frame};
use qnepb::runner::{build_stepper, exact_columns, run, Stepper};
use qnepb::validation::{run_suite, Scale, Suite};

use config::{Format, Resolved, RunConfig};

#[derive(Parser)]
#[command(name = "qn-epb", version, about = "Euler-Poisson-Boltzmann plasma solvers on staggered grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark case and write snapshots, diagnostics and a manifest.
    Run(RunArgs),
    /// Run verification suites and report pass/fail.
    Verify(VerifyArgs),
    /// List the benchmark cases.
    ListCases {
        /// Print the full case specifications as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    case: Option<String>,
    /// ap, rusanov or ice.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    /// Cell counts, e.g. `500` or `100x100`.
    #[arg(long)]
    cells: Option<String>,
    /// Right density of the Riemann problem.
    #[arg(long)]
    nr: Option<f64>,
    #[arg(long)]
    tfinal: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON run configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// csv or vtk.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite to run; repeat for several. All suites when omitted.
    #[arg(long)]
    suite: Vec<String>,
    /// Smaller problems with the same thresholds.
    #[arg(long)]
    quick: bool,
    /// One JSON object per suite instead of text lines.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
        Command::ListCases { json } => cmd_list(json),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("QNEPB_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().with_context(|| format!("QNEPB_THREADS='{v}' is not a thread count"))?;
    if n == 0 {
        bail!("QNEPB_THREADS must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn cmd_list(json: bool) -> Result<bool> {
    let specs = CASE_NAMES.iter().map(|n| case(n)).collect::<qnepb::Result<Vec<_>>>()?;
    if json {
        println!("{}", serde_json::to_string_pretty(&specs)?);
        return Ok(true);
    }
    for c in specs {
        let cells: Vec<String> = c.cells.iter().map(|n| n.to_string()).collect();
        println!(
            "{:<22} {}D  cells {:<9} eps {:<8e} T {:<5} {}",
            c.name,
            c.dim,
            cells.join("x"),
            c.eps,
            c.t_final,
            c.notes
        );
    }
    Ok(true)
}

fn cmd_verify(args: VerifyArgs) -> Result<bool> {
    let suites: Vec<Suite> = if args.suite.is_empty() {
        Suite::ALL.to_vec()
    } else {
        args.suite.iter().map(|s| s.parse()).collect::<qnepb::Result<_>>()?
    };
    let scale = if args.quick { Scale::Quick } else { Scale::Full };
    let mut all = true;
    for s in suites {
        let check = run_suite(s, scale);
        all &= check.passed;
        if args.json {
            println!("{}", serde_json::to_string(&check)?);
        } else {
            println!("{check}");
        }
    }
    Ok(all)
}

#[derive(Serialize)]
struct SnapshotEntry {
    t: f64,
    files: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    status: &'static str,
    error: Option<String>,
    config: &'a Resolved,
    steps: usize,
    t_reached: f64,
    mass_drift: f64,
    min_rho: f64,
    diagnostics: String,
    snapshots: Vec<SnapshotEntry>,
}

fn cmd_run(args: RunArgs) -> Result<bool> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_flags(
        args.case,
        args.scheme,
        args.eps,
        args.cells,
        args.nr,
        args.tfinal,
        args.out,
        args.format,
    )?;
    let resolved = cfg.resolve()?;
    for w in &resolved.warnings {
        eprintln!("warning: {w}");
    }
    std::fs::create_dir_all(&resolved.out)
        .with_context(|| format!("cannot create output directory {}", resolved.out.display()))?;

    let mesh = resolved.case.mesh()?;
    let mut stepper = build_stepper(&resolved.case, &mesh, resolved.scheme, &resolved.tuning)?;
    let mut snapshots = Vec::new();
    let summary = run(stepper.as_mut(), resolved.t_final, &resolved.snapshot_times, |s| {
        let index = snapshots.len();
        let files = write_snapshot(&resolved, &mesh, s, index)?;
        snapshots.push(SnapshotEntry { t: s.time(), files });
        Ok(())
    });

    let diagnostics = "diagnostics.csv".to_string();
    write_file(&resolved.out.join(&diagnostics), |w| summary.series.write_csv(w))?;
    let manifest = Manifest {
        status: if summary.completed() { "completed" } else { "failed" },
        error: summary.failure.as_ref().map(|e| e.to_string()),
        config: &resolved,
        steps: summary.steps,
        t_reached: summary.t,
        mass_drift: summary.mass_drift(),
        min_rho: summary.min_density(),
        diagnostics,
        snapshots,
    };
    let path = resolved.out.join("MANIFEST.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;

    match &summary.failure {
        None => {
            println!(
                "{}: {} steps to t = {}, output in {}",
                resolved.case.name,
                summary.steps,
                summary.t,
                resolved.out.display()
            );
            Ok(true)
        }
        Some(e) => bail!("run stopped at t = {} after {} steps: {e}", summary.t, summary.steps),
    }
}

/// Writes the field file of one snapshot, plus the axis cut when the case declares one.
fn write_snapshot(r: &Resolved, mesh: &qnepb::MacMesh, s: &dyn Stepper, index: usize) -> qnepb::Result<Vec<String>> {
    let frame: Frame = s.frame();
    let mut files = Vec::new();
    let mut put = |name: String, f: &dyn Fn(&mut dyn std::io::Write) -> qnepb::Result<()>| -> qnepb::Result<()> {
        write_file(&r.out.join(&name), |w| f(w))?;
        files.push(name);
        Ok(())
    };
    match r.format {
        Format::Csv => {
            let extra = exact_columns(&r.case, mesh, frame.t)?;
            put(format!("snap_{index:03}.csv"), &|w| write_csv(mesh, &frame, &extra, w))?;
        }
        Format::Vtk => {
            put(format!("snap_{index:03}.vtk"), &|w| write_vtk(mesh, &frame, w))?;
        }
    }
    if mesh.dim() == 2 && r.case.outputs.cut == CutPlan::AxesThroughCentre {
        put(format!("radial_cut_{index:03}.csv"), &|w| write_axis_cuts(mesh, &frame, w))?;
        if (frame.t - r.t_final).abs() <= 1e-12 * r.t_final.abs().max(1.0) {
            put("radial_cut.csv".into(), &|w| write_axis_cuts(mesh, &frame, w))?;
        }
    }
    Ok(files)
}
