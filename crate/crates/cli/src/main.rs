//! `unilateral`: equilibrium, bifurcation and cone-stability solves plus
//! parameter sweeps for the Rayleigh benchmark.

mod config;
mod grid;
mod output;
mod problems;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use unilateral_core::bifurcation::{solve_bifurcation, Spectrum};
use unilateral_core::fem1d::{build_mesh, BlockState, ScalarField};
use unilateral_core::harness::{closed_form_reference, support_size, ClosedFormReference};
use unilateral_core::models::{rayleigh_pencil, RayleighPencil, RayleighQuotientModel};
use unilateral_core::stability::{solve_cone_eigen, ConeMetric, ConeResult, Termination};

use config::Config;
use grid::GridSpec;
use problems::ModelKind;

#[derive(Parser, Debug)]
#[command(name = "unilateral", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Equilibrium of a bound-constrained FEM test problem (hybrid solver)
    Solve {
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long, default_value_t = 100)]
        n_cells: usize,
        /// TOML file with [model] and [hybrid] sections
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON report
        #[arg(long)]
        out: PathBuf,
    },
    /// Smallest eigenpairs of the Rayleigh pencil on the whole space
    Bifurcation {
        #[command(flatten)]
        coef: Coefficients,
        #[arg(long, default_value_t = 1000)]
        n_cells: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Smallest eigenvalue of the Rayleigh pencil on the cone β ≥ 0
    Stability {
        #[command(flatten)]
        coef: Coefficients,
        #[arg(long, default_value_t = 1000)]
        n_cells: usize,
        #[arg(long)]
        tol_lambda: Option<f64>,
        #[arg(long)]
        tol_x: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Preconditioning metric of the projected iteration
        #[arg(long, value_enum)]
        metric: Option<MetricArg>,
        /// Step scale; defaults to 1 (energy) or 1/λmax(A) (euclidean)
        #[arg(long)]
        step_scale: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Per-iteration CSV: iter,lambda,x_error,residual_norm
        #[arg(long)]
        history: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Space and cone minima over a (π²a, bc²) grid with b = 1
    Sweep {
        /// MIN:MAX:COUNT
        #[arg(long)]
        pi2a: GridSpec,
        /// MIN:MAX:COUNT
        #[arg(long)]
        bc2: GridSpec,
        #[arg(long, default_value_t = 1000)]
        n_cells: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Relative threshold for measuring the support of β
        #[arg(long)]
        epsilon_rel: Option<f64>,
        /// CSV output
        #[arg(long)]
        out: PathBuf,
        /// JSON mirror; defaults to the CSV path with a .json extension
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(clap::Args, Debug, Clone, Copy)]
struct Coefficients {
    #[arg(long)]
    a: f64,
    #[arg(long)]
    b: f64,
    #[arg(long, allow_negative_numbers = true)]
    c: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    Energy,
    Euclidean,
}

/// Nodal fields of a pencil vector.
#[derive(Serialize)]
struct Fields {
    v: Vec<f64>,
    beta: Vec<f64>,
}

impl From<BlockState> for Fields {
    fn from(s: BlockState) -> Self {
        Self {
            v: s.first,
            beta: s.second,
        }
    }
}

#[derive(Serialize)]
struct BifurcationOutput {
    a: f64,
    b: f64,
    c: f64,
    n_cells: usize,
    reference: ClosedFormReference,
    eigenvalues: Vec<f64>,
    is_positive_definite: bool,
    clamped: bool,
    tol_pd: f64,
    modes: Vec<Fields>,
}

#[derive(Serialize)]
struct StabilityOutput {
    a: f64,
    b: f64,
    c: f64,
    n_cells: usize,
    reference: ClosedFormReference,
    lambda_star: f64,
    converged: bool,
    termination: Termination,
    iterations: usize,
    step_scale: f64,
    complementarity: f64,
    dual_feasibility_violation: f64,
    stationarity_violation: f64,
    /// `λ* > 1`.
    stable: bool,
    support: Option<f64>,
    state: Fields,
}

fn benchmark_pencil(
    coef: Coefficients,
    n_cells: usize,
) -> Result<(RayleighQuotientModel, RayleighPencil)> {
    let model = RayleighQuotientModel::new(coef.a, coef.b, coef.c)?;
    let mesh = build_mesh(n_cells)?;
    let pencil = rayleigh_pencil(&model, &mesh, &[RayleighQuotientModel::clamped_ends(&mesh)])?;
    Ok((model, pencil))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve {
            model,
            n_cells,
            config,
            out,
        } => {
            let config = Config::load_or_default(config.as_deref())?;
            let mesh = build_mesh(n_cells)?;
            let result = problems::solve(model, &mesh, &config.model, &config.hybrid)?;
            eprintln!(
                "{:?}: converged={} phase1={} phase2={} residual={:.3e}",
                model,
                result.report.converged,
                result.report.iterations_phase1,
                result.report.iterations_phase2,
                result.final_residual
            );
            output::write_json(&out, &result)
        }
        Command::Bifurcation {
            coef,
            n_cells,
            k,
            config,
            out,
        } => {
            let config = Config::load_or_default(config.as_deref())?;
            let (_, rp) = benchmark_pencil(coef, n_cells)?;
            let all: Vec<usize> = (0..rp.dim()).collect();
            let Spectrum {
                eigenvalues,
                eigenvectors,
                is_positive_definite,
                clamped,
                tol_pd,
            } = solve_bifurcation(&rp.pencil, &all, k, &config.bifurcation)?;
            let modes = eigenvectors
                .iter()
                .map(|x| rp.extend(x).map(Fields::from))
                .collect::<Result<_, _>>()?;
            eprintln!("smallest eigenvalues: {eigenvalues:?}");
            let result = BifurcationOutput {
                a: coef.a,
                b: coef.b,
                c: coef.c,
                n_cells,
                reference: closed_form_reference(coef.a, coef.b, coef.c)?,
                eigenvalues,
                is_positive_definite,
                clamped,
                tol_pd,
                modes,
            };
            output::write_json(&out, &result)
        }
        Command::Stability {
            coef,
            n_cells,
            tol_lambda,
            tol_x,
            max_iter,
            metric,
            step_scale,
            config,
            history,
            out,
        } => {
            let config = Config::load_or_default(config.as_deref())?;
            let mut params = config.stability;
            params.tol_lambda = tol_lambda.unwrap_or(params.tol_lambda);
            params.tol_x = tol_x.unwrap_or(params.tol_x);
            params.max_iter = max_iter.unwrap_or(params.max_iter);
            params.step_scale = step_scale.or(params.step_scale);
            match metric {
                Some(MetricArg::Euclidean) => params.metric = ConeMetric::Euclidean,
                Some(MetricArg::Energy) if params.metric == ConeMetric::Euclidean => {
                    params.metric = ConeMetric::Energy { shift: 0.0 }
                }
                _ => {}
            }
            let (_, rp) = benchmark_pencil(coef, n_cells)?;
            let res: ConeResult = solve_cone_eigen(&rp.pencil, &rp.cone(), &params)?;
            if let Some(path) = &history {
                output::write_history_csv(path, &res.history)?;
            }
            let state = rp.extend(&res.z_star)?;
            let mesh = build_mesh(n_cells)?;
            let support = support_size(
                &ScalarField::new(&mesh, state.second.clone())?,
                config.sweep.epsilon_rel,
            )
            .ok();
            eprintln!(
                "lambda*={:.10} converged={} ({:?}) iterations={}",
                res.lambda_star, res.converged, res.termination, res.iterations
            );
            let result = StabilityOutput {
                a: coef.a,
                b: coef.b,
                c: coef.c,
                n_cells,
                reference: closed_form_reference(coef.a, coef.b, coef.c)?,
                lambda_star: res.lambda_star,
                converged: res.converged,
                termination: res.termination,
                iterations: res.iterations,
                step_scale: res.step_scale,
                complementarity: res.complementarity,
                dual_feasibility_violation: res.dual_feasibility_violation,
                stationarity_violation: res.stationarity_violation,
                stable: res.lambda_star > 1.0,
                support,
                state: state.into(),
            };
            output::write_json(&out, &result)
        }
        Command::Sweep {
            pi2a,
            bc2,
            n_cells,
            config,
            epsilon_rel,
            out,
            json,
        } => {
            let config = Config::load_or_default(config.as_deref())?;
            let mut sweep = config.sweep_config(n_cells);
            sweep.epsilon_rel = epsilon_rel.unwrap_or(sweep.epsilon_rel);
            let records = grid::parallel_sweep(&pi2a.values(), &bc2.values(), &sweep)?;
            let failed = records
                .iter()
                .filter(|r| !(r.converged_space && r.converged_cone))
                .count();
            eprintln!("{} grid points, {} not converged", records.len(), failed);
            output::write_sweep_csv(&out, &records)?;
            let json = json.unwrap_or_else(|| output::json_sibling(&out));
            output::write_json(&json, &records).context("writing JSON mirror")
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
