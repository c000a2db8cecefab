use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use resoforge::fourier::ModeVector;
use resoforge_cli::{
    run, Command, NormalFormKind, Outputs, ParamBlock, ParamMode, PotentialSource, RunConfig, RunError, Tolerances,
    EXIT_CONFIG,
};

/// Resonance geometry, genericity checks and standard-form reduction for
/// H(y, x) = |y|^2/2 + eps f(x).
#[derive(Parser, Debug)]
#[command(name = "resoforge", version)]
struct Cli {
    /// Replay a saved run configuration (JSON); other inputs are ignored.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the resolved configuration here and continue.
    #[arg(long, global = true)]
    save_config: Option<PathBuf>,
    /// Seed for every random stream of the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// JSON report path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// CSV path for bulk output (samples, labels, rasters).
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Worker threads for the parallel kernels.
    #[arg(long, global = true, env = "RESOFORGE_THREADS")]
    threads: Option<usize>,
    #[command(flatten)]
    potential: PotentialArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    tolerances: ToleranceArgs,
    #[command(subcommand)]
    command: Option<Sub>,
}

#[derive(Args, Debug)]
struct PotentialArgs {
    /// Potential file: {"n", "s", "modes": [{"k", "re", "im"}]} or a "rule" entry.
    #[arg(long, global = true, conflicts_with = "preset")]
    potential: Option<PathBuf>,
    /// Built-in potential: lacunary, two-mode or random(SEED).
    #[arg(long, global = true)]
    preset: Option<String>,
}

#[derive(Args, Debug)]
struct ParamArgs {
    /// Parameter block (JSON); the flags below override its fields.
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    /// Derive the resonance width alpha from eps and the outer cutoff instead of taking it as a knob.
    #[arg(long, global = true)]
    derive_alpha: bool,
    /// Number of degrees of freedom.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Analyticity width of the potential.
    #[arg(long, global = true)]
    s: Option<f64>,
    /// Perturbation size eps.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Resonance width alpha (free mode).
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Inner Fourier cutoff, separating non-resonant from simply resonant modes.
    #[arg(long, global = true)]
    k0: Option<u32>,
    /// Outer Fourier cutoff, separating simply from doubly resonant modes.
    #[arg(long, global = true)]
    kcut: Option<u32>,
    /// Lower-bound constant of the coefficient decay condition.
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Morse constant required of the low-mode projections.
    #[arg(long, global = true)]
    beta: Option<f64>,
}

#[derive(Args, Debug)]
struct ToleranceArgs {
    /// Relative tolerance of the pipeline energy identity.
    #[arg(long, global = true)]
    tol_energy: Option<f64>,
    /// Tolerance of the decoupling identity.
    #[arg(long, global = true)]
    tol_decoupling: Option<f64>,
    /// Tolerance on max |J^T Omega J - Omega|.
    #[arg(long, global = true)]
    tol_symplectic: Option<f64>,
    /// Residual tolerance of the fixed-point solver.
    #[arg(long, global = true)]
    tol_fixed_point: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Draw a potential from the product measure on unit-disk coefficients.
    Sample {
        /// Largest |k|_1 sampled.
        #[arg(long)]
        kmax: u32,
        /// Also estimate the fraction passing the coefficient lower bound over this many draws.
        #[arg(long, default_value_t = 0)]
        trials: u64,
        /// Write the sampled potential file here.
        #[arg(long)]
        write: Option<PathBuf>,
    },
    /// Check the coefficient lower bound and low-mode Morse condition on a finite window.
    CheckGeneric {
        /// Upper end of the checked window in |k|_1.
        #[arg(long)]
        kmax: u32,
    },
    /// Covering of the action ball by resonance regions.
    Cover {
        #[command(subcommand)]
        action: CoverAction,
    },
    /// Unimodular completion of a generator and the decoupling matrix.
    Bezout {
        /// Generator, e.g. 2,3.
        #[arg(long, allow_hyphen_values = true)]
        k: String,
    },
    /// Lie-series averaging around a base point.
    Normalize {
        /// Keep the lattice of this generator (resonant normal form); omit for the non-resonant one.
        #[arg(long, allow_hyphen_values = true)]
        k: Option<String>,
        /// Base action, e.g. 0.7,0.31.
        #[arg(long, allow_hyphen_values = true)]
        base_point: String,
        /// Number of averaging steps.
        #[arg(long, default_value_t = 2)]
        order: usize,
        /// Taylor degree in the actions.
        #[arg(long, default_value_t = 2)]
        degree: u32,
        /// Points for the numerical conjugacy check.
        #[arg(long, default_value_t = 16)]
        verify_points: usize,
    },
    /// Reduce a resonant normal form to the one-degree-of-freedom standard form.
    Standardize {
        /// Resonance generator.
        #[arg(long, allow_hyphen_values = true)]
        k: String,
        /// Base action on or near the resonance.
        #[arg(long, allow_hyphen_values = true)]
        base_point: String,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, default_value_t = 2)]
        degree: u32,
        /// Sample points for the identities and size checks.
        #[arg(long, default_value_t = 32)]
        samples: usize,
        /// Angle grid of the fixed-point solver.
        #[arg(long, default_value_t = 256)]
        grid: usize,
    },
    /// Run the acceptance battery and print a pass/fail table.
    Report {
        /// Tenfold fewer Monte-Carlo samples, widened statistical tolerances.
        #[arg(long)]
        quick: bool,
        /// Run only these criteria, e.g. 1,5,9.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<u32>>,
    },
}

#[derive(Subcommand, Debug)]
enum CoverAction {
    /// Region labels of given action points.
    Classify {
        /// Action point, e.g. 0.3,-0.2; repeatable.
        #[arg(long = "point", required = true, allow_hyphen_values = true)]
        points: Vec<String>,
    },
    /// Monte-Carlo volume of the doubly resonant region.
    Measure {
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
    },
    /// Region codes on a square grid (n = 2), written to --csv.
    Raster {
        #[arg(long, default_value_t = 201)]
        resolution: usize,
    },
}

fn parse_floats(text: &str) -> Result<Vec<f64>, RunError> {
    text.split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| RunError {
            code: EXIT_CONFIG,
            message: format!("cannot parse '{text}' as a comma-separated list of numbers"),
        })
}

fn parse_mode(text: &str) -> Result<Vec<i64>, RunError> {
    Ok(ModeVector::parse(text)?.0)
}

fn params_from(args: &ParamArgs) -> Result<ParamBlock, RunError> {
    let mut p = match &args.params {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text).map_err(|e| RunError {
                code: EXIT_CONFIG,
                message: format!("parameter file {}: {e}", path.display()),
            })?
        }
        None => ParamBlock::default(),
    };
    if args.derive_alpha {
        p.mode = ParamMode::Derived;
    }
    p.n = args.n.unwrap_or(p.n);
    p.s = args.s.unwrap_or(p.s);
    p.epsilon = args.eps.or(p.epsilon);
    p.alpha = args.alpha.or(p.alpha);
    p.k0 = args.k0.unwrap_or(p.k0);
    p.k_cut = args.kcut.unwrap_or(p.k_cut);
    p.delta = args.delta.unwrap_or(p.delta);
    p.beta = args.beta.unwrap_or(p.beta);
    Ok(p)
}

fn build_config(cli: &Cli) -> Result<RunConfig, RunError> {
    if let Some(path) = &cli.config {
        return Ok(RunConfig::load(path)?);
    }
    let sub = cli.command.as_ref().ok_or_else(|| RunError {
        code: EXIT_CONFIG,
        message: "no subcommand given (see --help)".into(),
    })?;
    let mut outputs = Outputs {
        report: cli.out.clone(),
        csv: cli.csv.clone(),
        potential: None,
    };
    let command = match sub {
        Sub::Sample { kmax, trials, write } => {
            outputs.potential = write.clone();
            Command::Sample {
                k_max: *kmax,
                trials: *trials,
            }
        }
        Sub::CheckGeneric { kmax } => Command::CheckGeneric { k_max: *kmax },
        Sub::Cover { action } => match action {
            CoverAction::Classify { points } => Command::CoverClassify {
                points: points.iter().map(|p| parse_floats(p)).collect::<Result<_, _>>()?,
            },
            CoverAction::Measure { samples } => Command::CoverMeasure { samples: *samples },
            CoverAction::Raster { resolution } => Command::CoverRaster {
                resolution: *resolution,
            },
        },
        Sub::Bezout { k } => Command::Bezout { k: parse_mode(k)? },
        Sub::Normalize {
            k,
            base_point,
            order,
            degree,
            verify_points,
        } => Command::Normalize {
            kind: if k.is_some() {
                NormalFormKind::Resonant
            } else {
                NormalFormKind::Nonresonant
            },
            k: k.as_deref().map(parse_mode).transpose()?,
            base_point: parse_floats(base_point)?,
            order: *order,
            degree: *degree,
            verify_points: *verify_points,
        },
        Sub::Standardize {
            k,
            base_point,
            order,
            degree,
            samples,
            grid,
        } => Command::Standardize {
            k: parse_mode(k)?,
            base_point: parse_floats(base_point)?,
            order: *order,
            degree: *degree,
            samples: *samples,
            grid: *grid,
        },
        Sub::Report { quick, only } => Command::Report {
            quick: *quick,
            only: only.clone(),
        },
    };
    let potential = match (&cli.potential.potential, &cli.potential.preset) {
        (Some(path), _) => Some(PotentialSource::File(path.clone())),
        (None, Some(name)) => Some(PotentialSource::Preset(name.clone())),
        (None, None) => None,
    };
    let defaults = Tolerances::default();
    let t = &cli.tolerances;
    Ok(RunConfig {
        command,
        potential,
        params: params_from(&cli.params)?,
        seed: cli.seed,
        outputs,
        tolerances: Tolerances {
            energy_identity: t.tol_energy.unwrap_or(defaults.energy_identity),
            decoupling: t.tol_decoupling.unwrap_or(defaults.decoupling),
            symplectic: t.tol_symplectic.unwrap_or(defaults.symplectic),
            fixed_point_residual: t.tol_fixed_point.unwrap_or(defaults.fixed_point_residual),
        },
    })
}

fn execute(cli: &Cli) -> Result<i32, RunError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .map_err(|e| RunError {
                code: EXIT_CONFIG,
                message: format!("thread pool: {e}"),
            })?;
    }
    let config = build_config(cli)?;
    if let Some(path) = &cli.save_config {
        std::fs::write(path, serde_json::to_string_pretty(&config).expect("config serializes"))?;
    }
    let report = run(&config)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    match &config.outputs.report {
        Some(path) => {
            std::fs::write(path, text + "\n")?;
            if let Some(table) = report.result.get("table").and_then(|t| t.as_str()) {
                let _ = write!(std::io::stdout().lock(), "{table}");
            }
        }
        None => {
            let _ = writeln!(std::io::stdout().lock(), "{text}");
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for f in report.flags.iter().filter(|f| f.hard && !f.pass) {
        eprintln!("failed: {}", f.name);
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
