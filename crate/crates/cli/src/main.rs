//! `qspect`: sweeps, single-point evaluations, crossover location, the
//! approximate-DL fit, and figure reproduction on top of qspect-core.

mod config;
mod figures;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use qspect_core::configurations::{
    anti_squeeze_phase, eta_from_kappa, ic_moments, ic_optimal_phase, su11_moments, DLParams,
    GainSpec,
};
use qspect_core::qfi::fit_dl_alpha;
use qspect_core::spectral::evaluate_mismatch;
use qspect_core::sweep::{
    crossover, emit_csv, evaluate_point, parse_csv, run_sweep, Model, SweepConfig,
};
use qspect_core::twinbeam::LossChannel;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "qspect", about = "Twin-beam absorption-sensing QFI toolkit")]
struct Cli {
    /// Run-configuration file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set run.model=\"dl\".
    #[arg(long = "set", global = true)]
    overrides: Vec<String>,
    /// Output directory for generated files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Output format for tabular artifacts.
    #[arg(long, global = true, default_value = "csv")]
    format: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the second-order moments of the configured model at one point.
    Moments {
        #[arg(long, default_value_t = 1.0)]
        gain: f64,
        /// Decay rate in nm^-1.
        #[arg(long)]
        kappa: f64,
    },
    /// Evaluate the configured QFI (or inverse error) at one point.
    Qfi {
        #[arg(long, default_value_t = 1.0)]
        gain: f64,
        #[arg(long)]
        kappa: f64,
    },
    /// Run the configured sweep and write its CSV (plus an SVG rendering).
    Sweep,
    /// Locate the per-gain log-ratio zero crossing between two sweep CSVs.
    Crossover {
        csv_a: PathBuf,
        csv_b: PathBuf,
    },
    /// Fit the approximate-DL-QFI constant alpha over the configured grid.
    FitAlpha,
    /// Regenerate a paper figure panel (fig2a..fig2l, fig3, fig4).
    Reproduce {
        figure: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

/// Exit code 2 for configuration problems, 3 for numerical-convergence
/// failures, 1 otherwise.
fn classify(err: &anyhow::Error) -> u8 {
    if let Some(core) = err.downcast_ref::<qspect_core::Error>() {
        use qspect_core::Error::*;
        return match core {
            QuadratureNotConverged { .. }
            | UnphysicalState { .. }
            | PureStateSingularity { .. }
            | IllConditioned { .. } => EXIT_NUMERIC,
            _ => EXIT_CONFIG,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return 1;
    }
    EXIT_CONFIG
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if cli.format != "csv" {
        anyhow::bail!("unsupported format {:?} (only csv)", cli.format);
    }
    let loaded = config::load(cli.config.as_deref(), &cli.overrides)?;
    let cfg = &loaded.sweep;
    let meta = vec![
        ("config_hash".into(), loaded.hash.clone()),
        (
            "version".into(),
            format!("qspect {}", env!("CARGO_PKG_VERSION")),
        ),
    ];

    match &cli.command {
        Command::Moments { gain, kappa } => print_moments(cfg, *gain, *kappa),
        Command::Qfi { gain, kappa } => {
            let row = evaluate_point(cfg, *gain, *kappa)?;
            println!("model: {}", cfg.model.as_str());
            println!("access: {}", cfg.access.as_str());
            println!("estimand: {}", cfg.estimand.as_str());
            println!("quantity: {}", cfg.quantity.as_str());
            println!("kappa_i_nm^-1: {:e}", row.kappa);
            println!("eta_i: {:e}", row.eta);
            println!("gain_Npeak: {:e}", row.gain);
            println!("value: {:e}", row.value);
            println!("flag: {}", row.flag.as_str());
            Ok(())
        }
        Command::Sweep => {
            let mut result = run_sweep(cfg)?;
            for kv in &meta {
                result.meta.push(kv.clone());
            }
            std::fs::create_dir_all(&cli.out)?;
            let stem = format!(
                "sweep_{}_{}_{}",
                cfg.model.as_str(),
                cfg.access.as_str(),
                cfg.quantity.as_str()
            );
            let csv_path = cli.out.join(format!("{stem}.csv"));
            std::fs::write(&csv_path, emit_csv(&result))?;
            println!("wrote {}", csv_path.display());
            Ok(())
        }
        Command::Crossover { csv_a, csv_b } => {
            let a = parse_csv(&std::fs::read_to_string(csv_a).context("reading first CSV")?)?;
            let b = parse_csv(&std::fs::read_to_string(csv_b).context("reading second CSV")?)?;
            for point in crossover(&a, &b)? {
                match point.kappa {
                    Some(k) => println!("gain_Npeak: {:e}  kappa_star_nm^-1: {k:e}", point.gain),
                    None => println!("gain_Npeak: {:e}  kappa_star_nm^-1: no_crossover", point.gain),
                }
            }
            Ok(())
        }
        Command::FitAlpha => {
            let grid: Vec<(f64, f64)> = cfg
                .gains
                .iter()
                .flat_map(|&g| cfg.grid.points().into_iter().map(move |k| (k, g)))
                .collect();
            let report = fit_dl_alpha(&grid, cfg.length)?;
            println!("alpha: {:.6}", report.alpha);
            println!("mean_r_squared: {:.6}", report.r_squared);
            for (g, r2) in cfg.gains.iter().zip(&report.gain_r_squared) {
                println!("r_squared_gain_{g}: {r2:.6}");
            }
            Ok(())
        }
        Command::Reproduce { figure } => {
            std::fs::create_dir_all(&cli.out)?;
            for file in figures::reproduce(figure, cfg, &meta)? {
                let path = cli.out.join(&file.name);
                std::fs::write(&path, &file.contents)?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn print_moments(cfg: &SweepConfig, gain_n_peak: f64, kappa: f64) -> anyhow::Result<()> {
    let gain = GainSpec::new(gain_n_peak)?;
    let pm = evaluate_mismatch(&cfg.dispersion, cfg.omega, gain.gamma_abs(cfg.length));
    let eta = eta_from_kappa(kappa, cfg.length);
    let ch = LossChannel::new(1.0, eta, cfg.phases.phi_s, cfg.phases.phi_i)?;
    println!("model: {}", cfg.model.as_str());
    println!("kappa_i_nm^-1: {kappa:e}");
    println!("eta_i: {eta:e}");
    println!("gain_Npeak: {gain_n_peak:e}");
    match cfg.model {
        Model::Su11 => {
            let phi = cfg
                .phases
                .phi_p2
                .unwrap_or_else(|| anti_squeeze_phase(&gain, &pm, &ch, cfg.length));
            let m = su11_moments(&gain, &pm, &ch, phi, cfg.length);
            println!("phi_p2: {phi:e}");
            println!("n_s: {:e}", m.n_s);
            println!("n_i: {:e}", m.n_i);
            println!("m_abs: {:e}", m.m.norm());
            println!("m_arg: {:e}", m.m.arg());
        }
        Model::Ic => {
            let phi = cfg
                .phases
                .phi_p2
                .unwrap_or_else(|| ic_optimal_phase(&pm, &ch, cfg.length));
            let ic = ic_moments(&gain, &pm, &ch, phi, cfg.length);
            println!("phi_p2: {phi:e}");
            println!("n_s: {:e}", ic.n_s);
            println!("n_i: {:e}", ic.n_i);
            println!("n_a: {:e}", ic.n_a);
            println!("n_sa_abs: {:e}", ic.n_sa.norm());
            println!("n_sa_arg: {:e}", ic.n_sa.arg());
            println!("m_si_abs: {:e}", ic.m_si.norm());
            println!("m_ai_abs: {:e}", ic.m_ai.norm());
        }
        Model::Dl => {
            let dl = DLParams::idler_only(kappa, cfg.length)?;
            let m = qspect_core::configurations::dl_moments(&gain, &pm, &dl)?;
            println!("n_s: {:e}", m.n_s);
            println!("n_i: {:e}", m.n_i);
            println!("m_abs: {:e}", m.m.norm());
            println!("m_arg: {:e}", m.m.arg());
        }
    }
    Ok(())
}
