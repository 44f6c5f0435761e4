//! Command-line driver: configuration parsing, run orchestration, and
//! bit-stable result emission.
//!
//! Subcommands: `solve` (one problem), `convergence` (h-refinement study),
//! `eps-sweep` (moment-scaling probe), `n-sweep` (angular decay against the
//! kinetic oracle), and `verify-matrices` (moment-matrix invariant suite).
//! Data-producing subcommands write a CSV and a JSON manifest into the
//! output directory. Exit codes: 0 on success, 1 on configuration errors,
//! 2 on solver failures, 3 on failed verification checks.
//!
//! With a fixed `--threads` value, repeated runs of the same configuration
//! produce byte-identical CSV files; wall-clock timings are reported only
//! in the manifest.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{moment_matrices, MomentBasis};
use crate::solver::{SolverConfig, SolverMethod};
use crate::study::{
    moment_scaling_probe, run_convergence, run_n_sweep, smooth_fourier_forcing,
    smooth_isotropic_forcing, smooth_manufactured_solution, smooth_variable_materials,
    ErrorReport, MaterialSpec, NSweepConfig, NSweepRecord, Oracle, RunRecord, ScalingRecord,
    StudyConfig,
};

/// Which oracle a study measures errors against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    /// Exact moment solution from the Fourier-mode solve.
    PnFourier,
    /// Exact kinetic moments; errors include the closure error.
    Kinetic,
    /// Manufactured smooth solution; supports variable cross sections.
    Manufactured,
}

/// Which linear solver path to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Sparse direct LU.
    Direct,
    /// Restarted GMRES with element-block Jacobi preconditioning.
    Iterative,
}

/// `[problem]` section of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSection {
    /// Spatial dimension, 1 or 2.
    pub dimension: usize,
    /// Scaling parameter for single-solve and n-sweep runs.
    pub eps: f64,
}

/// `[discretization]` section of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationSection {
    /// Moment order `N`.
    pub order: usize,
    /// Local polynomial degree `k`.
    pub degree: usize,
    /// Cells per axis for single-solve and eps-sweep runs.
    pub cells: usize,
}

/// `[materials]` section of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialsSection {
    /// Total cross section.
    pub sigma_t: f64,
    /// Absorption cross section.
    pub sigma_a: f64,
    /// Use the built-in smooth variable cross sections instead of the
    /// constants (manufactured oracle only).
    pub variable: bool,
}

/// `[study]` section of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySection {
    /// Cells per axis of each refinement level.
    pub cells_list: Vec<usize>,
    /// Scaling parameters to sweep.
    pub eps_list: Vec<f64>,
    /// Moment orders for the n-sweep.
    pub orders_list: Vec<usize>,
    /// Oracle choice.
    pub oracle: OracleKind,
    /// Solver choice.
    pub solver: SolverKind,
    /// Iterative solver tolerance.
    pub tolerance: f64,
    /// Iterative solver budget.
    pub max_iterations: usize,
}

/// Fully parsed run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// `[problem]` section.
    pub problem: ProblemSection,
    /// `[discretization]` section.
    pub discretization: DiscretizationSection,
    /// `[materials]` section.
    pub materials: MaterialsSection,
    /// `[study]` section.
    pub study: StudySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: ProblemSection {
                dimension: 1,
                eps: 1.0,
            },
            discretization: DiscretizationSection {
                order: 3,
                degree: 1,
                cells: 16,
            },
            materials: MaterialsSection {
                sigma_t: 2.0,
                sigma_a: 1.0,
                variable: false,
            },
            study: StudySection {
                cells_list: vec![8, 16, 32, 64],
                eps_list: vec![1.0, 1e-2, 1e-4, 1e-6],
                orders_list: vec![1, 3, 5, 7],
                oracle: OracleKind::PnFourier,
                solver: SolverKind::Direct,
                tolerance: 1e-10,
                max_iterations: 1000,
            },
        }
    }
}

/// A config file that parses back to [`RunConfig::default`], with every
/// recognised key present.
pub fn sample_config() -> String {
    concat!(
        "# pndg run configuration\n",
        "\n",
        "[problem]\n",
        "dimension = 1\n",
        "eps = 1.0\n",
        "\n",
        "[discretization]\n",
        "order = 3\n",
        "degree = 1\n",
        "cells = 16\n",
        "\n",
        "[materials]\n",
        "sigma_t = 2.0\n",
        "sigma_a = 1.0\n",
        "variable = false\n",
        "\n",
        "[study]\n",
        "cells_list = 8, 16, 32, 64\n",
        "eps_list = 1.0, 1e-2, 1e-4, 1e-6\n",
        "orders_list = 1, 3, 5, 7\n",
        "oracle = pn-fourier\n",
        "solver = direct\n",
        "tolerance = 1e-10\n",
        "max_iterations = 1000\n",
    )
    .to_string()
}

fn parse_scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("invalid value for {key}: '{value}'")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::config(format!("invalid entry in {key}: '{s}'")))
        })
        .collect()
}

fn parse_enum<T: ValueEnum>(key: &str, value: &str) -> Result<T> {
    T::from_str(value, true).map_err(|_| {
        let options: Vec<String> = T::value_variants()
            .iter()
            .filter_map(|v| v.to_possible_value())
            .map(|p| p.get_name().to_string())
            .collect();
        Error::config(format!(
            "invalid value for {key}: '{value}' (expected one of {})",
            options.join(", ")
        ))
    })
}

/// Parses the sectioned key/value config format.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    let mut section = String::new();
    for (index, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let context = format!("config line {}", index + 1);
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            if !matches!(name, "problem" | "discretization" | "materials" | "study") {
                return Err(Error::config(format!("{context}: unknown section [{name}]")));
            }
            section = name.to_string();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(format!(
                "{context}: expected 'key = value', got '{line}'"
            )));
        };
        let (key, value) = (key.trim(), value.trim());
        apply_key(&mut config, &section, key, value).map_err(|e| e.annotate(&context))?;
    }
    Ok(config)
}

fn apply_key(config: &mut RunConfig, section: &str, key: &str, value: &str) -> Result<()> {
    match (section, key) {
        ("problem", "dimension") => config.problem.dimension = parse_scalar(key, value)?,
        ("problem", "eps") => config.problem.eps = parse_scalar(key, value)?,
        ("discretization", "order") => config.discretization.order = parse_scalar(key, value)?,
        ("discretization", "degree") => config.discretization.degree = parse_scalar(key, value)?,
        ("discretization", "cells") => config.discretization.cells = parse_scalar(key, value)?,
        ("materials", "sigma_t") => config.materials.sigma_t = parse_scalar(key, value)?,
        ("materials", "sigma_a") => config.materials.sigma_a = parse_scalar(key, value)?,
        ("materials", "variable") => config.materials.variable = parse_scalar(key, value)?,
        ("study", "cells_list") => config.study.cells_list = parse_list(key, value)?,
        ("study", "eps_list") => config.study.eps_list = parse_list(key, value)?,
        ("study", "orders_list") => config.study.orders_list = parse_list(key, value)?,
        ("study", "oracle") => config.study.oracle = parse_enum(key, value)?,
        ("study", "solver") => config.study.solver = parse_enum(key, value)?,
        ("study", "tolerance") => config.study.tolerance = parse_scalar(key, value)?,
        ("study", "max_iterations") => {
            config.study.max_iterations = parse_scalar(key, value)?
        }
        ("", _) => {
            return Err(Error::config(format!(
                "key '{key}' appears before any section header"
            )))
        }
        _ => {
            return Err(Error::config(format!(
                "unknown key '{key}' in section [{section}]"
            )))
        }
    }
    Ok(())
}

/// Reads and parses a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_config_str(&text)
}

impl RunConfig {
    fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            method: match self.study.solver {
                SolverKind::Direct => SolverMethod::Direct,
                SolverKind::Iterative => SolverMethod::Iterative,
            },
            tolerance: self.study.tolerance,
            max_iterations: self.study.max_iterations,
        }
    }

    fn material_spec(&self) -> MaterialSpec {
        if self.materials.variable {
            smooth_variable_materials()
        } else {
            MaterialSpec::Constant {
                sigma_t: self.materials.sigma_t,
                sigma_a: self.materials.sigma_a,
            }
        }
    }

    fn oracle(&self, kind: OracleKind) -> Result<Oracle> {
        let dim = self.problem.dimension;
        let l = MomentBasis::new(self.discretization.order).len();
        Ok(match kind {
            OracleKind::PnFourier => Oracle::PnFourier(smooth_fourier_forcing(dim, l)?),
            OracleKind::Kinetic => Oracle::Kinetic(smooth_isotropic_forcing(dim)?),
            OracleKind::Manufactured => {
                Oracle::Manufactured(smooth_manufactured_solution(dim, l)?)
            }
        })
    }

    /// The study this config describes, with `cells` and `eps` chosen by
    /// the subcommand.
    fn study_config(
        &self,
        kind: OracleKind,
        cells: Vec<usize>,
        eps_values: Vec<f64>,
    ) -> Result<StudyConfig> {
        Ok(StudyConfig {
            dim: self.problem.dimension,
            order: self.discretization.order,
            degree: self.discretization.degree,
            cells,
            eps_values,
            materials: self.material_spec(),
            oracle: self.oracle(kind)?,
            solver: self.solver_config(),
        })
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pndg",
    version,
    about = "P_N discontinuous Galerkin solver for scaled radiative transfer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one problem and report its errors against the oracle.
    Solve(CommonArgs),
    /// Run the h-refinement convergence study over the eps list.
    Convergence(CommonArgs),
    /// Sweep eps at a fixed mesh and report discrete moment scaling.
    EpsSweep(CommonArgs),
    /// Sweep the moment order against the kinetic oracle.
    NSweep(CommonArgs),
    /// Run the moment-matrix invariant suite and print one line per check.
    VerifyMatrices(VerifyArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Path to the run configuration file; defaults apply if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory the CSV and manifest are written to.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for the linear algebra backend.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Override the oracle choice from the config file.
    #[arg(long, value_enum)]
    oracle: Option<OracleKind>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Largest moment order to verify.
    #[arg(long = "N", default_value_t = 9)]
    order: usize,
    /// Worker threads for the linear algebra backend.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

fn set_threads(threads: usize) -> Result<()> {
    if threads == 0 {
        return Err(Error::config("requires threads >= 1"));
    }
    let parallelism = if threads == 1 {
        faer::Par::Seq
    } else {
        faer::Par::rayon(threads)
    };
    faer::set_global_parallelism(parallelism);
    Ok(())
}

/// Formats a float with 17 significant digits, enough to round-trip f64.
fn fmt_full(value: f64) -> String {
    format!("{value:.16e}")
}

const CONVERGENCE_HEADER: &str = "d,N,k,eps,h,err_l2,err_q,err_triple,eoc_l2,wall_ms";

/// Renders convergence records as CSV.
///
/// Timings are written as 0 so that repeated runs of the same
/// configuration yield byte-identical files; real timings live in the
/// manifest.
pub fn convergence_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(CONVERGENCE_HEADER);
    out.push('\n');
    for r in records {
        let eoc = r.eoc_l2.map(fmt_full).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},0",
            r.dim,
            r.order,
            r.degree,
            fmt_full(r.eps),
            fmt_full(r.h),
            fmt_full(r.errors.l2),
            fmt_full(r.errors.q),
            fmt_full(r.errors.triple),
            eoc,
        );
    }
    out
}

fn eps_sweep_csv(config: &RunConfig, records: &[ScalingRecord]) -> String {
    let mut out = String::from("d,N,k,eps,h,norm_first,norm_rest_over_eps");
    out.push('\n');
    let h = 1.0 / config.discretization.cells as f64;
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            config.problem.dimension,
            config.discretization.order,
            config.discretization.degree,
            fmt_full(r.eps),
            fmt_full(h),
            fmt_full(r.first),
            fmt_full(r.rest_over_eps),
        );
    }
    out
}

fn n_sweep_csv(config: &RunConfig, records: &[NSweepRecord]) -> String {
    let mut out = String::from("d,eps,N,moment_error");
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            config.problem.dimension,
            fmt_full(config.problem.eps),
            r.order,
            fmt_full(r.moment_error),
        );
    }
    out
}

#[derive(Serialize)]
struct ManifestRun {
    params: serde_json::Value,
    errors: serde_json::Value,
    timings: serde_json::Value,
    status: &'static str,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    created: String,
    command: &'a str,
    config: &'a RunConfig,
    runs: Vec<ManifestRun>,
    outputs: Vec<String>,
}

fn convergence_manifest_runs(records: &[RunRecord]) -> Vec<ManifestRun> {
    records
        .iter()
        .map(|r| ManifestRun {
            params: serde_json::json!({
                "d": r.dim, "N": r.order, "k": r.degree,
                "eps": r.eps, "cells": r.cells, "h": r.h,
            }),
            errors: serde_json::json!({
                "l2": r.errors.l2, "q": r.errors.q, "triple": r.errors.triple,
                "eoc_l2": r.eoc_l2,
            }),
            timings: serde_json::json!({ "wall_ms": r.wall_ms }),
            status: "ok",
        })
        .collect()
}

fn write_outputs(
    out_dir: &Path,
    command: &str,
    config: &RunConfig,
    csv_name: &str,
    csv: &str,
    runs: Vec<ManifestRun>,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(csv_name);
    std::fs::write(&csv_path, csv)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        created: chrono::Utc::now().to_rfc3339(),
        command,
        config,
        runs,
        outputs: vec![csv_name.to_string(), "manifest.json".to_string()],
    };
    let manifest_path = out_dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Internal(format!("manifest serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(&manifest_path, text)?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", manifest_path.display());
    Ok(())
}

fn load_common(args: &CommonArgs) -> Result<(RunConfig, OracleKind)> {
    set_threads(args.threads)?;
    let config = match &args.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    let oracle = args.oracle.unwrap_or(config.study.oracle);
    Ok((config, oracle))
}

fn run_solve(args: &CommonArgs) -> Result<i32> {
    let (config, oracle) = load_common(args)?;
    let study = config.study_config(
        oracle,
        vec![config.discretization.cells],
        vec![config.problem.eps],
    )?;
    let report = run_convergence(&study)?;
    let record = &report.runs[0];
    println!(
        "solve: d = {}, N = {}, k = {}, eps = {}, h = 1/{}: err_l2 = {:.6e}, err_q = {:.6e}, err_triple = {:.6e}",
        record.dim, record.order, record.degree, record.eps, record.cells,
        record.errors.l2, record.errors.q, record.errors.triple,
    );
    write_outputs(
        &args.out,
        "solve",
        &config,
        "solve.csv",
        &convergence_csv(&report.runs),
        convergence_manifest_runs(&report.runs),
    )?;
    Ok(0)
}

fn run_convergence_command(args: &CommonArgs) -> Result<i32> {
    let (config, oracle) = load_common(args)?;
    let study = config.study_config(
        oracle,
        config.study.cells_list.clone(),
        config.study.eps_list.clone(),
    )?;
    let report: ErrorReport = run_convergence(&study)?;
    for &eps in &config.study.eps_list {
        if let Some(eoc) = report.terminal_eoc(eps) {
            println!("convergence: eps = {eps}: terminal EOC {eoc:.3}");
        }
    }
    write_outputs(
        &args.out,
        "convergence",
        &config,
        "convergence.csv",
        &convergence_csv(&report.runs),
        convergence_manifest_runs(&report.runs),
    )?;
    Ok(0)
}

fn run_eps_sweep(args: &CommonArgs) -> Result<i32> {
    let (config, oracle) = load_common(args)?;
    let study = config.study_config(
        oracle,
        vec![config.discretization.cells],
        config.study.eps_list.clone(),
    )?;
    let records = moment_scaling_probe(&study)?;
    for r in &records {
        println!(
            "eps-sweep: eps = {:.1e}: |u_1| = {:.6e}, max |u_i| / eps = {:.6e}",
            r.eps, r.first, r.rest_over_eps
        );
    }
    let runs = records
        .iter()
        .map(|r| ManifestRun {
            params: serde_json::json!({
                "d": config.problem.dimension,
                "N": config.discretization.order,
                "k": config.discretization.degree,
                "eps": r.eps,
                "cells": config.discretization.cells,
            }),
            errors: serde_json::json!({
                "norm_first": r.first, "norm_rest_over_eps": r.rest_over_eps,
            }),
            timings: serde_json::json!({}),
            status: "ok",
        })
        .collect();
    write_outputs(
        &args.out,
        "eps-sweep",
        &config,
        "eps_sweep.csv",
        &eps_sweep_csv(&config, &records),
        runs,
    )?;
    Ok(0)
}

fn run_n_sweep_command(args: &CommonArgs) -> Result<i32> {
    let (config, _) = load_common(args)?;
    let sweep = NSweepConfig {
        dim: config.problem.dimension,
        orders: config.study.orders_list.clone(),
        sigma_t: config.materials.sigma_t,
        sigma_a: config.materials.sigma_a,
        eps: config.problem.eps,
        forcing: smooth_isotropic_forcing(config.problem.dimension)?,
    };
    let records = run_n_sweep(&sweep)?;
    for r in &records {
        println!("n-sweep: N = {}: moment error {:.6e}", r.order, r.moment_error);
    }
    let runs = records
        .iter()
        .map(|r| ManifestRun {
            params: serde_json::json!({
                "d": config.problem.dimension, "N": r.order, "eps": config.problem.eps,
            }),
            errors: serde_json::json!({ "moment_error": r.moment_error }),
            timings: serde_json::json!({}),
            status: "ok",
        })
        .collect();
    write_outputs(
        &args.out,
        "n-sweep",
        &config,
        "n_sweep.csv",
        &n_sweep_csv(&config, &records),
        runs,
    )?;
    Ok(0)
}

/// Deterministic well-spread direction samples (a Fibonacci spiral on the
/// sphere), used as probe points for the recursion identity.
pub fn fibonacci_sphere(count: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    (0..count)
        .map(|j| {
            let z = 1.0 - (2.0 * j as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * j as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// One verification check: name plus the worst observed deviation and its
/// allowance.
#[derive(Debug, Clone)]
pub struct VerifyCheck {
    /// Check name as printed.
    pub name: &'static str,
    /// Largest deviation observed over the whole suite.
    pub worst: f64,
    /// Allowed bound.
    pub bound: f64,
}

impl VerifyCheck {
    /// Whether the check passed.
    pub fn passed(&self) -> bool {
        self.worst <= self.bound
    }
}

/// Runs the moment-matrix invariant suite for all orders up to `max_order`.
///
/// Checks, aggregated over `N = 1..=max_order` and all three flux
/// matrices: exact symmetry, block-tridiagonal sparsity (entries outside
/// adjacent-degree blocks vanish and every adjacent-degree block is
/// populated), the recursion identity at 100 spread-out directions, and
/// the unit spectral-norm bound.
pub fn verify_matrix_suite(max_order: usize) -> Result<Vec<VerifyCheck>> {
    let mut symmetry = 0.0f64;
    let mut sparsity = 0.0f64;
    let mut recursion = 0.0f64;
    let mut spectral = 0.0f64;
    let directions = fibonacci_sphere(100);

    for n in 1..=max_order {
        let basis = MomentBasis::new(n);
        let matrices = moment_matrices(&basis)?;
        let l = basis.len();
        for i in 0..3 {
            let a = matrices.a(i);
            for r in 0..l {
                for c in 0..l {
                    symmetry = symmetry.max((a[(r, c)] - a[(c, r)]).abs());
                    let (lr, _) = basis.degree_order(r)?;
                    let (lc, _) = basis.degree_order(c)?;
                    if lr.abs_diff(lc) != 1 {
                        sparsity = sparsity.max(a[(r, c)].abs());
                    }
                }
            }
            // Every adjacent-degree block must carry coupling; an empty one
            // would make the sparsity check vacuous.
            for degree in 0..n {
                let mut block_max = 0.0f64;
                for r in 0..l {
                    for c in 0..l {
                        let (lr, _) = basis.degree_order(r)?;
                        let (lc, _) = basis.degree_order(c)?;
                        if (lr == degree && lc == degree + 1)
                            || (lr == degree + 1 && lc == degree)
                        {
                            block_max = block_max.max(a[(r, c)].abs());
                        }
                    }
                }
                if block_max == 0.0 {
                    sparsity = f64::INFINITY;
                }
            }
            spectral = spectral.max(matrices.spectral_norm(i));

            for omega in &directions {
                let values = basis.eval(omega)?;
                let product = a * nalgebra::DVector::from_column_slice(&values);
                for row in 0..l {
                    let (lr, _) = basis.degree_order(row)?;
                    if lr < n {
                        recursion = recursion.max((omega[i] * values[row] - product[row]).abs());
                    }
                }
            }
        }
    }

    Ok(vec![
        VerifyCheck {
            name: "symmetry",
            worst: symmetry,
            bound: 1e-12,
        },
        VerifyCheck {
            name: "block-tridiagonal sparsity",
            worst: sparsity,
            bound: 0.0,
        },
        VerifyCheck {
            name: "recursion identity",
            worst: recursion,
            bound: 1e-11,
        },
        VerifyCheck {
            name: "spectral norm <= 1",
            worst: spectral,
            bound: 1.0 + 1e-10,
        },
    ])
}

fn run_verify(args: &VerifyArgs) -> Result<i32> {
    set_threads(args.threads)?;
    if args.order == 0 {
        return Err(Error::config("requires N >= 1"));
    }
    let start = Instant::now();
    let checks = verify_matrix_suite(args.order)?;
    let mut all_passed = true;
    for check in &checks {
        let verdict = if check.passed() { "PASS" } else { "FAIL" };
        all_passed &= check.passed();
        println!(
            "{verdict} {} (N <= {}): worst {:.3e}, allowed {:.3e}",
            check.name, args.order, check.worst, check.bound
        );
    }
    println!(
        "verify-matrices: {} in {:.2} s",
        if all_passed { "all checks passed" } else { "checks FAILED" },
        start.elapsed().as_secs_f64()
    );
    Ok(if all_passed { 0 } else { 3 })
}

fn execute(cli: Cli) -> Result<i32> {
    match &cli.command {
        Command::Solve(args) => run_solve(args),
        Command::Convergence(args) => run_convergence_command(args),
        Command::EpsSweep(args) => run_eps_sweep(args),
        Command::NSweep(args) => run_n_sweep_command(args),
        Command::VerifyMatrices(args) => run_verify(args),
    }
}

/// Exit code of an error, per the documented mapping.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::InvalidInput(_) | Error::Config(_) | Error::Io(_) => 1,
        Error::Solver(_) | Error::Internal(_) => 2,
    }
}

/// Parses arguments, dispatches the subcommand, and returns the process
/// exit code. Usage errors print to the error stream and exit with 1.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}
