use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dfig_core::controller::{GainConfig, DEFAULT_K};
use dfig_core::num_complex::Complex64;
use dfig_core::plant::TurbineParams;
use dfig_core::scenario::{emit_plots, load_scenario, load_wind, read_results, write_results};
use dfig_core::verify::{
    bound_regime, check_estimator_decay, check_gain_bound_agreement, check_hessian_definiteness,
    check_pole_placement, check_theorem1, check_torque_identity, EstimatorDecayConfig,
    Theorem1Config,
};
use dfig_core::Error;

#[derive(Parser)]
#[command(name = "dfig", version, about = "DFIG wind turbine simulator and controller checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write results.csv, scenario.txt and plots to a directory.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Wind CSV overriding the scenario's wind source.
        #[arg(long)]
        wind: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run numerical checks of the controller design.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        /// Write the per-trajectory stability report to this CSV file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Render plots from a results CSV.
    Plot {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    All,
    Theorem1,
    Quadratic,
    Estimator,
    Gainbound,
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Ok,
    ChecksFailed,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Simulate { scenario, wind, out } => simulate(&scenario, wind.as_deref(), &out),
        Command::Verify { suite, report } => verify(suite, report.as_deref()),
        Command::Plot { log, out } => plot(&log, &out),
    };
    match res {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn simulate(scenario: &Path, wind: Option<&Path>, out: &Path) -> Result<Outcome, Error> {
    let sc = load_scenario(scenario)?;
    let wind = wind.map(load_wind).transpose()?;
    std::fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    let resolved = out.join("scenario.txt");
    std::fs::write(&resolved, sc.to_text()).map_err(|e| io_error(&resolved, e))?;
    let log = sc.run(wind)?;
    write_results(&log, &out.join("results.csv"))?;
    let plots = emit_plots(&log, &out.join("plots"))?;
    println!(
        "wrote {} rows to {} and {} plots",
        log.len(),
        out.join("results.csv").display(),
        plots.len()
    );
    Ok(Outcome::Ok)
}

fn plot(log: &Path, out: &Path) -> Result<Outcome, Error> {
    let log = read_results(log)?;
    let plots = emit_plots(&log, out)?;
    println!("wrote {} plots to {}", plots.len(), out.display());
    Ok(Outcome::Ok)
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn line(pass: bool, name: &str, detail: String) -> bool {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn verify(suite: Suite, report: Option<&Path>) -> Result<Outcome, Error> {
    let p = TurbineParams::default();
    let gc = GainConfig::default();
    let run = |s: Suite| suite == Suite::All || suite == s;
    let mut ok = true;

    if run(Suite::Quadratic) {
        let worst = check_torque_identity(&p, &DEFAULT_K, 1000, 1)?;
        ok &= line(
            worst < 1e-9,
            "torque identity",
            format!("max |T_e - r^2 - a'| = {worst:.3e} over 1000 samples"),
        );
        let eigs = check_hessian_definiteness(&p, &DEFAULT_K, 100, 0.1, 2)?;
        let min = eigs.iter().copied().fold(f64::INFINITY, f64::min);
        ok &= line(
            min > 0.0,
            "hessian definiteness",
            format!("smallest eigenvalue {min:.3e} over {} parameter sets", eigs.len()),
        );
        let targets = [
            Complex64::new(-10.0, 0.0),
            Complex64::new(-15.0, 0.0),
            Complex64::new(-20.0, 5.0),
            Complex64::new(-20.0, -5.0),
        ];
        let poles = check_pole_placement(&p, &DEFAULT_K, targets)?;
        let stable = poles.eigenvalues.iter().all(|z| z.re < 0.0);
        ok &= line(
            stable && poles.worst_relative_gap < 0.1,
            "pole placement",
            format!(
                "eigenvalues {:?}, worst relative gap {:.3}",
                poles
                    .eigenvalues
                    .iter()
                    .map(|z| format!("{:.3}{:+.3}j", z.re, z.im))
                    .collect::<Vec<_>>(),
                poles.worst_relative_gap
            ),
        );
    }

    if run(Suite::Estimator) {
        let cfg = EstimatorDecayConfig {
            inertia: p.inertia,
            h: gc.h,
            alpha: gc.alpha,
            ..EstimatorDecayConfig::default()
        };
        let rep = check_estimator_decay(&cfg)?;
        ok &= line(
            rep.max_rel_error < 1e-5,
            "estimator decay",
            format!("max relative error {:.3e}", rep.max_rel_error),
        );
    }

    if run(Suite::Gainbound) {
        let pairs = check_gain_bound_agreement(50, 3);
        let worst = pairs.iter().map(|(_, e)| *e).fold(0.0, f64::max);
        let regimes: std::collections::BTreeSet<_> =
            pairs.iter().map(|(gb, _)| bound_regime(gb)).collect();
        ok &= line(
            worst < 1e-3,
            "gain bound",
            format!(
                "worst relative error {worst:.3e} over {} pairs in {} regimes",
                pairs.len(),
                regimes.len()
            ),
        );
    }

    if run(Suite::Theorem1) {
        let cfg = Theorem1Config::default();
        let rep = check_theorem1(&p, &gc, &cfg)?;
        println!(
            "     zero speed {:.4} pu, reference {:.4} pu, slope bounds [{:.4e}, {:.4e}], h = {} vs bound {:.4e}",
            rep.omega_zero,
            rep.omega_rd,
            rep.gamma.lower,
            rep.gamma.upper,
            rep.h,
            rep.gain_bound
        );
        let n = rep.trajectories.len();
        let count = |f: &dyn Fn(&dfig_core::verify::TrajectoryReport) -> bool| {
            rep.trajectories.iter().filter(|t| f(t)).count()
        };
        let converged = count(&|t| t.converged);
        let invariant = count(&|t| t.invariant);
        let decreasing = count(&|t| t.max_v_increase <= rep.lyapunov_tol);
        ok &= line(
            converged == n,
            "stability: convergence",
            format!("{converged}/{n} within {} s", cfg.horizon),
        );
        ok &= line(
            invariant == n,
            "stability: invariance",
            format!("{invariant}/{n}"),
        );
        ok &= line(
            decreasing == n,
            "stability: lyapunov decrease",
            format!("{decreasing}/{n}"),
        );
        if let Some(path) = report {
            rep.write_csv(path)?;
            println!("     report written to {}", path.display());
        }
    }

    Ok(if ok { Outcome::Ok } else { Outcome::ChecksFailed })
}
