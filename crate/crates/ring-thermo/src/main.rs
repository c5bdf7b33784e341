//! Command-line front end: temperature sweeps, method comparisons, single
//! points and configuration inspection.
//!
//! Exit codes: 0 on full success, 2 when any row failed (the CSV records
//! the per-row error), 1 on configuration or IO errors.

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ring_thermo::sweep::{
    compare_methods, emit_csv, evaluate_point, parse_config_file, resolve_config, run_sweep,
    write_csv, ConfigOverrides, SweepConfig,
};
use ring_thermo::Method;

#[derive(Parser)]
#[command(
    name = "ring-thermo",
    version,
    about = "Canonical-ensemble thermodynamics of a Dirac fermion on a flux-threaded quantum ring",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a temperature sweep over the configured flux values and emit CSV
    Sweep(CommonOpts),
    /// Evaluate ln Z1 with several methods and report pairwise deviations
    Compare(CommonOpts),
    /// Evaluate a single (flux, tau) point and print it
    Point {
        #[command(flatten)]
        common: CommonOpts,
        /// Temperature in energy units (tau = k_B T)
        #[arg(long)]
        tau: f64,
    },
    /// Print the fully resolved configuration as config-file text
    ShowConfig(CommonOpts),
}

#[derive(Args)]
struct CommonOpts {
    /// Built-in starting configuration: fig1 (relativistic) or fig2
    /// (non-relativistic)
    #[arg(long)]
    preset: Option<String>,
    /// Flat key=value config file merged over the preset
    #[arg(long)]
    config: Option<PathBuf>,
    /// relativistic|nonrelativistic
    #[arg(long)]
    regime: Option<String>,
    /// Flux ratio; repeat the flag to sweep several values
    #[arg(long = "flux-ratio", value_name = "PHI")]
    flux_ratio: Vec<f64>,
    /// Rest mass (natural units)
    #[arg(long)]
    mass: Option<f64>,
    /// Ring radius (inverse energy units)
    #[arg(long)]
    radius: Option<f64>,
    /// Number of fermions in the ensemble
    #[arg(long = "n-fermions")]
    n_fermions: Option<u32>,
    #[arg(long = "tau-min")]
    tau_min: Option<f64>,
    #[arg(long = "tau-max")]
    tau_max: Option<f64>,
    #[arg(long = "tau-steps")]
    tau_steps: Option<usize>,
    /// Grid spacing: linear|log
    #[arg(long)]
    grid: Option<String>,
    /// Partition method: direct|em|high-t|geometric. `compare` accepts the
    /// flag several times; the other commands take it once.
    #[arg(long = "method", value_name = "METHOD")]
    method: Vec<String>,
    /// Coefficient fidelity: paper|derived
    #[arg(long)]
    fidelity: Option<String>,
    /// Highest beta power kept by the em method: 0|1|2
    #[arg(long = "em-order")]
    em_order: Option<u8>,
    /// Direct-sum truncation tolerance, in (0, 1)
    #[arg(long = "tail-tol")]
    tail_tol: Option<f64>,
    /// Direct-sum term cap
    #[arg(long = "max-terms")]
    max_terms: Option<u64>,
    /// Output CSV path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8, String> {
    match cli.command {
        Command::Sweep(opts) => {
            let (config, _) = resolve(&opts, true)?;
            let rows = run_sweep(&config).map_err(|e| e.to_string())?;
            match &config.output_path {
                Some(path) => {
                    emit_csv(&rows, path).map_err(|e| e.to_string())?;
                    eprintln!("wrote {} rows to {}", rows.len(), path.display());
                }
                None => write_csv(&rows, io::stdout().lock()).map_err(|e| e.to_string())?,
            }
            let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
            if failed > 0 {
                eprintln!("{failed} of {} rows failed; see the error column", rows.len());
                Ok(2)
            } else {
                Ok(0)
            }
        }
        Command::Compare(opts) => {
            let (config, methods) = resolve(&opts, false)?;
            let table = compare_methods(&config, &methods).map_err(|e| e.to_string())?;
            match &config.output_path {
                Some(path) => {
                    table.emit_csv(path).map_err(|e| e.to_string())?;
                    eprintln!("wrote {} rows to {}", table.rows.len(), path.display());
                }
                None => table
                    .write_csv(io::stdout().lock())
                    .map_err(|e| e.to_string())?,
            }
            let failed = table
                .rows
                .iter()
                .filter(|r| r.log_z1.iter().any(|v| v.is_err()))
                .count();
            if failed > 0 {
                eprintln!(
                    "{failed} of {} rows had failing methods; see the error column",
                    table.rows.len()
                );
                Ok(2)
            } else {
                Ok(0)
            }
        }
        Command::Point { common, tau } => {
            let (config, _) = resolve(&common, true)?;
            if config.flux_ratios.len() != 1 {
                return Err(format!(
                    "point needs exactly one flux ratio (resolved config has {}); \
                     pass --flux-ratio once",
                    config.flux_ratios.len()
                ));
            }
            let row =
                evaluate_point(&config, config.flux_ratios[0], tau).map_err(|e| e.to_string())?;
            println!("regime: {}", row.regime);
            println!("method: {}", row.method);
            println!("fidelity: {}", row.fidelity);
            println!("phi: {}", row.phi);
            println!("tau: {}", row.tau);
            match &row.outcome {
                Ok(v) => {
                    println!("F_per_N: {}", v.f_per_n);
                    println!("U_per_N: {}", v.u_per_n);
                    println!("S_per_NkB: {}", v.s_per_nk);
                    println!("Cv_per_NkB: {}", v.cv_per_nk);
                    println!("validity: {}", v.validity);
                    Ok(0)
                }
                Err(message) => {
                    eprintln!("point failed: {message}");
                    Ok(2)
                }
            }
        }
        Command::ShowConfig(opts) => {
            let (config, _) = resolve(&opts, true)?;
            print!("{}", config.config_text());
            Ok(0)
        }
    }
}

/// Build the configuration from preset, config file and flags. With
/// `single_method` the `--method` flag is folded into the config; `compare`
/// keeps the full list instead.
fn resolve(opts: &CommonOpts, single_method: bool) -> Result<(SweepConfig, Vec<Method>), String> {
    let methods: Vec<Method> = opts
        .method
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()?;
    if single_method && methods.len() > 1 {
        return Err(
            "--method may be given once for this command (compare accepts several)".to_string(),
        );
    }
    let overrides = ConfigOverrides {
        preset: opts.preset.as_deref().map(str::parse).transpose()?,
        regime: opts.regime.as_deref().map(str::parse).transpose()?,
        flux_ratios: (!opts.flux_ratio.is_empty()).then(|| opts.flux_ratio.clone()),
        mass: opts.mass,
        radius: opts.radius,
        n_fermions: opts.n_fermions,
        tau_min: opts.tau_min,
        tau_max: opts.tau_max,
        tau_steps: opts.tau_steps,
        grid_scale: opts.grid.as_deref().map(str::parse).transpose()?,
        method: if single_method {
            methods.first().copied()
        } else {
            None
        },
        fidelity: opts.fidelity.as_deref().map(str::parse).transpose()?,
        em_order: opts.em_order,
        tail_tolerance: opts.tail_tol,
        max_terms: opts.max_terms,
        output_path: opts.out.clone(),
    };
    let file = opts
        .config
        .as_deref()
        .map(parse_config_file)
        .transpose()
        .map_err(|e| e.to_string())?;
    let config = resolve_config(file.as_ref(), &overrides).map_err(|e| e.to_string())?;
    Ok((config, methods))
}
