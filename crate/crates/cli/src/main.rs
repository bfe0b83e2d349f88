mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use csbp::advection::{convergence_study, operator_spectrum, AdvectionProblem, ConvergenceConfig};
use csbp::euler::{entropy_trace, vortex_study, EulerOptions, NewtonOptions};
use csbp::lps::{reference_spectra, write_spectrum_csv};
use csbp::mesh::kernel_square_mesh;
use csbp::ref1d::equivalence_for_degree;
use csbp::study::{write_csv, SpectrumRow};
use csbp::tri_cubature::{build_tri_cubature, verify_cubature, TriCubature};
use csbp::tri_sbp::{build_sbp_tri, sbp_from_cubature, verify_sbp};

use config::{flux_by_name, kernel_by_name, StudyConfig};

#[derive(Parser)]
#[command(name = "csbp", version, about = "SBP operators on triangles, LPS stabilization and the studies built on them")]
struct Cli {
    /// Print every configuration key with its default value and exit.
    #[arg(long)]
    dump_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the degree-p triangle operator and check its defining properties.
    OpsVerify {
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=4))]
        p: u8,
        /// Use this cubature JSON instead of the built-in rule.
        #[arg(long)]
        cubature: Option<PathBuf>,
    },
    /// Print the degree-p cubature as JSON.
    Cubature {
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=4))]
        p: u8,
        /// Write to this file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write reference-element dissipation spectra as CSV.
    Spectra {
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=4))]
        p: u8,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Linear advection convergence study and operator spectrum.
    Advect(StudyArgs),
    /// Euler studies.
    Euler {
        #[arg(value_enum)]
        study: EulerStudy,
        #[command(flatten)]
        args: StudyArgs,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum EulerStudy {
    VortexConverge,
    EntropyTrace,
}

#[derive(Args)]
struct StudyArgs {
    /// Configuration file in `key = value` form with `[section]` headers.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, as `section.key=value`; may be repeated.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory for CSV files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Distinguishes bad input (exit 2) from failed checks or computations (exit 1).
enum Failure {
    Usage(anyhow::Error),
    Check(anyhow::Error),
}

type Outcome = std::result::Result<(), Failure>;

fn usage<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Usage)
}

fn check<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Check)
}

fn load_config(args: &StudyArgs) -> Result<StudyConfig> {
    let mut cfg = match &args.config {
        Some(path) => StudyConfig::load(path)?,
        None => StudyConfig::default(),
    };
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn line(ok: bool, name: &str, detail: String) -> bool {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn ops_verify(p: usize, cubature: Option<&Path>) -> Outcome {
    let cub = match cubature {
        Some(path) => {
            let text = usage(fs::read_to_string(path).with_context(|| format!("reading {}", path.display())))?;
            let c: TriCubature = usage(serde_json::from_str(&text).context("parsing cubature JSON"))?;
            if c.p != p {
                return Err(Failure::Usage(anyhow::anyhow!("cubature file has p = {}, requested p = {p}", c.p)));
            }
            c
        }
        None => check(build_tri_cubature(p).map_err(Into::into))?,
    };
    let mut ok = true;
    if let Err(e) = cub.validate() {
        line(false, "cubature", e.to_string());
        return Err(Failure::Check(anyhow::anyhow!("cubature for p = {p} is invalid")));
    }
    ok &= line(true, "cubature", format!("{} nodes, degree-{} moment residual {:.2e}", cub.n_k(), 2 * p, verify_cubature(&cub, 2 * p)));
    let op = match sbp_from_cubature(cub) {
        Ok(op) => op,
        Err(e) => {
            line(false, "operator", e.to_string());
            return Err(Failure::Check(anyhow::anyhow!("operator construction failed for p = {p}")));
        }
    };
    let r = verify_sbp(&op);
    ok &= line(r.h_min > 0.0, "norm", format!("min weight {:.3e}", r.h_min));
    ok &= line(r.accuracy * r.h_min <= 1e-12, "accuracy", format!("max |D L - L'| = {:.2e}", r.accuracy));
    ok &= line(r.skew <= 1e-13, "skew", format!("max |S + S^T| = {:.2e}", r.skew));
    ok &= line(r.boundary <= 1e-12, "boundary", format!("max |L^T E L - boundary integral| = {:.2e}", r.boundary));
    ok &= line(r.e_closure <= 1e-13, "face-closure", format!("{:.2e}", r.e_closure));
    match equivalence_for_degree(p) {
        Ok(eq) => {
            ok &= line(
                eq.alpha.is_finite() && eq.alpha > 0.0,
                "rank-one-1d",
                format!("alpha = {:.6}, lambda_D = {:.6}, lambda_P = {:.6}", eq.alpha, eq.lambda_d, eq.lambda_p),
            )
        }
        Err(e) => ok &= line(false, "rank-one-1d", e.to_string()),
    }
    match reference_spectra(&op) {
        Ok((dis, proj)) => {
            ok &= line(
                (proj.ratio - 1.0).abs() <= 1e-8 && proj.zero_count == op.basis.n_p,
                "projection-spectrum",
                format!("ratio {:.12}, zero eigenvalues {} of expected {}", proj.ratio, proj.zero_count, op.basis.n_p),
            );
            line(true, "derivative-spectrum", format!("ratio {:.4}, zero eigenvalues {}", dis.ratio, dis.zero_count));
        }
        Err(e) => ok &= line(false, "projection-spectrum", e.to_string()),
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Check(anyhow::anyhow!("operator checks failed for p = {p}")))
    }
}

fn cubature(p: usize, out: Option<&Path>) -> Outcome {
    let c = check(build_tri_cubature(p).map_err(Into::into))?;
    let json = check(c.to_json().map_err(Into::into))?;
    match out {
        Some(path) => check(fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display())))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn spectra(p: usize, out: &Path) -> Outcome {
    let op = check(build_sbp_tri(p).map_err(Into::into))?;
    let (dis, proj) = check(reference_spectra(&op).map_err(Into::into))?;
    check(write_spectrum_csv(&dis, create(out, &format!("derivative_spectrum_p{p}.csv")).map_err(Failure::Check)?).map_err(Into::into))?;
    check(write_spectrum_csv(&proj, create(out, &format!("projection_spectrum_p{p}.csv")).map_err(Failure::Check)?).map_err(Into::into))?;
    println!("p = {p}: derivative ratio {:.4}, projection ratio {:.10}", dis.ratio, proj.ratio);
    Ok(())
}

fn advect(args: &StudyArgs) -> Outcome {
    let cfg = usage(load_config(args))?.advect;
    let kernel = usage(kernel_by_name(&cfg.kernel))?;
    let op = check(build_sbp_tri(cfg.p).map_err(Into::into))?;
    let conv = ConvergenceConfig {
        levels: cfg.levels.clone(),
        lps_enabled: cfg.lps,
        lambda: cfg.lambda,
        final_time: cfg.final_time,
        cfl: cfg.cfl,
        kernel,
        max_dense: cfg.max_dense,
        ..ConvergenceConfig::default()
    };
    if cfg.levels.len() >= 2 {
        let rows = check(convergence_study(&op, &conv).map_err(Into::into))?;
        check(write_csv(&rows, create(&args.out, "convergence.csv").map_err(Failure::Check)?).map_err(Into::into))?;
        for r in &rows {
            let rate = r.rate.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
            println!("level {} n_dof {} l2 error {:.4e} rate {rate}", r.lev, r.n_dof, r.l2_error);
        }
    } else {
        println!("one level given; skipping the convergence study");
    }
    let mesh = check(kernel_square_mesh(cfg.spectrum_level, kernel).map_err(Into::into))?;
    let problem = check(AdvectionProblem::new(&mesh, &op, cfg.lambda, cfg.lps).map_err(Into::into))?;
    let (ev, rho) = check(operator_spectrum(&problem, cfg.max_dense).map_err(Into::into))?;
    let rows: Vec<SpectrumRow> = ev.iter().map(|&(re, im)| SpectrumRow { re, im }).collect();
    check(write_csv(&rows, create(&args.out, "spectrum.csv").map_err(Failure::Check)?).map_err(Into::into))?;
    let max_re = ev.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    let max_abs_re = ev.iter().map(|e| e.0.abs()).fold(0.0, f64::max);
    println!("spectrum at level {}: {} eigenvalues, radius {rho:.4}, max Re {max_re:.3e}, max |Re| / radius {:.3e}", cfg.spectrum_level, ev.len(), max_abs_re / rho);
    Ok(())
}

fn euler(study: EulerStudy, args: &StudyArgs) -> Outcome {
    let cfg = usage(load_config(args))?;
    match study {
        EulerStudy::VortexConverge => {
            let v = cfg.vortex;
            let opts = EulerOptions { flux: usage(flux_by_name(&v.flux))?, lps_enabled: v.lps, ..EulerOptions::default() };
            let newton = NewtonOptions { rel_tol: v.newton_tol, abs_tol: v.newton_tol, max_iter: v.newton_max_iter, ..NewtonOptions::default() };
            let op = check(build_sbp_tri(v.p).map_err(Into::into))?;
            let rows = check(vortex_study(&op, &v.n, opts, &newton).map_err(Into::into))?;
            check(write_csv(&rows, create(&args.out, "vortex.csv").map_err(Failure::Check)?).map_err(Into::into))?;
            for r in &rows {
                let fmt = |x: Option<f64>| x.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
                println!(
                    "N {} newton {} density error {:.4e} rate {} drag error {:.4e} rate {}",
                    r.n,
                    r.newton_iterations,
                    r.density_error,
                    fmt(r.density_rate),
                    r.drag_error,
                    fmt(r.drag_rate)
                );
            }
        }
        EulerStudy::EntropyTrace => {
            let t = cfg.trace;
            let opts = EulerOptions { flux: usage(flux_by_name(&t.flux))?, lps_enabled: t.lps, ..EulerOptions::default() };
            let newton = NewtonOptions { rel_tol: t.newton_tol, abs_tol: t.newton_tol, max_iter: t.newton_max_iter, ..NewtonOptions::default() };
            let op = check(build_sbp_tri(t.p).map_err(Into::into))?;
            let tc = csbp::euler::TraceConfig { cfl: t.cfl, final_time: t.final_time };
            let (rows, dt) = check(entropy_trace(&op, opts, &tc, &newton).map_err(Into::into))?;
            check(write_csv(&rows, create(&args.out, "entropy_trace.csv").map_err(Failure::Check)?).map_err(Into::into))?;
            let max_d = rows.iter().map(|r| r.delta_entropy).fold(f64::NEG_INFINITY, f64::max);
            let max_abs = rows.iter().map(|r| r.delta_entropy.abs()).fold(0.0, f64::max);
            println!("{} steps of dt {dt:.4e}: max delta {max_d:.3e}, max |delta| {max_abs:.3e}", rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.dump_config {
        print!("{}", StudyConfig::default().dump());
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: no subcommand given; see --help");
        return ExitCode::from(2);
    };
    let result = match &command {
        Command::OpsVerify { p, cubature: c } => ops_verify(*p as usize, c.as_deref()),
        Command::Cubature { p, out } => cubature(*p as usize, out.as_deref()),
        Command::Spectra { p, out } => spectra(*p as usize, out),
        Command::Advect(args) => advect(args),
        Command::Euler { study, args } => euler(*study, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Check(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
