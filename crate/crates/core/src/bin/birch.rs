use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use birch::experiments::{
    expand_grid, quadratic_race, run_cell, run_grid, write_output, ExperimentConfig, ExperimentError,
    RaceOptions, Regime, RunStatus, Setup,
};
use birch::problems::ProblemSpec;
use birch::timing::{optimal_b, optimal_m, optimal_s, total_time_bound, BoundMethod, TimingModel};
use birch::tree::{read_audit, verify_conditions, write_audit};

#[derive(Parser)]
#[command(name = "birch", version, about = "Simulate and audit asynchronous and local SGD methods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Replace the config's seeds with this one.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the first cell of a config once.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Run every cell of a config and write one CSV row per run.
    Grid {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print the closed-form total-time bounds and optimal hyperparameters.
    Formulas {
        #[arg(long, default_value = "classical")]
        regime: String,
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "L", default_value_t = 1.0)]
        l: f64,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
    },
    /// Time for Rennala and Ringmaster to reach a loss level on a 2-d quadratic.
    QuadraticRace {
        #[arg(long, default_value_t = 0.01)]
        mu: f64,
        #[arg(long = "L", default_value_t = 1.0)]
        l: f64,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        h: f64,
        #[arg(long = "B", default_value_t = 64)]
        b: usize,
        #[arg(long, default_value_t = 1e-6)]
        target: f64,
    },
    /// Check the distance and containment conditions of a serialized tree.
    VerifyTree {
        path: PathBuf,
        #[arg(long)]
        claimed_r: Option<usize>,
    },
    /// Print the timing regimes.
    Presets {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Config(String),
    Deadlock(String),
    Other(String),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => Failure::Config(c.to_string()),
            ExperimentError::Problem(p) => Failure::Config(p.to_string()),
            ExperimentError::Sim(birch::sim::SimError::Deadlock { time }) => {
                Failure::Deadlock(format!("policy deadlocked at t={time}"))
            }
            other => Failure::Other(other.to_string()),
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(&common.config).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(s) = common.seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = &common.out {
        cfg.out_dir = Some(o.clone());
    }
    Ok(cfg)
}

fn simulate(common: &Common) -> Result<(), Failure> {
    let cfg = load(common)?;
    let setup = Setup::from_config(&cfg)?;
    let cells = expand_grid(&cfg, &setup)?;
    let cell = &cells[0];
    let r = run_cell(&cfg, &setup, cell)?;
    if r.row.status == RunStatus::Deadlock {
        return Err(Failure::Deadlock(format!("{} deadlocked", cell.method.name())));
    }
    let out = r.output.expect("finished run has output");
    println!("method: {}", cell.method.name());
    println!("gamma: {}", cell.cols.gamma);
    println!("seed: {}", cell.seed);
    print!("{}", out.trace.summary());
    println!("final_loss: {}", out.trace.final_loss());
    if let Some(t) = r.row.time_to_target {
        println!("time_to_target: {t}");
    }
    if let Some(rep) = &r.report {
        print!("{}", rep.summary());
    }
    if let Some(dir) = &cfg.out_dir {
        write_output(dir, "trace.csv", &out.trace.to_csv())?;
        write_output(dir, "curve.dat", &out.trace.to_dat(cell.method.name()))?;
        if cfg.write_tree {
            let claimed = cell.method.claimed_r(cfg.n);
            write_output(dir, "tree.txt", &write_audit(&out.tree, Some(&out.record), claimed))?;
        }
    }
    Ok(())
}

fn grid(common: &Common, jobs: usize) -> Result<(), Failure> {
    let cfg = load(common)?;
    let g = run_grid(&cfg, jobs)?;
    match &cfg.out_dir {
        Some(dir) => {
            write_output(dir, "results.csv", &g.to_csv())?;
            write_output(dir, "top1.csv", &g.top1_csv())?;
            for (name, dat) in &g.curves {
                write_output(&dir.join("curves"), name, dat)?;
            }
            print!("{}", g.summary());
        }
        None => print!("{}", g.to_csv()),
    }
    Ok(())
}

fn regime_model(name: &str, n: usize, seed: u64) -> Result<TimingModel, Failure> {
    let r = Regime::from_name(name).ok_or_else(|| Failure::Config(format!("unknown regime `{name}`")))?;
    r.model(n, seed).map_err(|e| Failure::Config(e.to_string()))
}

#[allow(clippy::too_many_arguments)]
fn formulas(regime: &str, n: usize, seed: u64, l: f64, delta: f64, sigma2: f64, epsilon: f64) -> Result<(), Failure> {
    let timing = regime_model(regime, n, seed)?;
    let spec = ProblemSpec {
        dimension: 0,
        l,
        f_star: 0.0,
        sigma2,
        delta,
    };
    println!("B* = {}", optimal_b(sigma2, epsilon));
    println!("M* = {}", optimal_m(sigma2, n, epsilon));
    println!("s* = {}", optimal_s(n, epsilon, sigma2));
    for m in BoundMethod::ALL {
        let t = total_time_bound(m, &timing, &spec, epsilon).map_err(|e| Failure::Config(e.to_string()))?;
        println!("{:<18}{t:.6e}", m.name());
    }
    Ok(())
}

fn race(mu: f64, l: f64, n: usize, h: f64, b: usize, target: f64) -> Result<(), Failure> {
    let opts = RaceOptions {
        target,
        ..RaceOptions::default()
    };
    let r = quadratic_race(mu, l, n, h, b, &opts)?;
    let show = |t: Option<f64>| t.map(|t| t.to_string()).unwrap_or_else(|| "not reached".into());
    println!("time_rennala: {}", show(r.time_rennala));
    if let Some(g) = r.gamma_rennala {
        println!("gamma_rennala: {g}");
    }
    println!("time_ringmaster: {}", show(r.time_ringmaster));
    println!("gamma_ringmaster: {}", r.gamma_ringmaster);
    if let Some(q) = r.ratio() {
        println!("ratio: {q}");
    }
    if !r.diverged.is_empty() {
        println!("rennala diverged for gamma in {:?}", r.diverged);
    }
    if r.ringmaster_diverged {
        println!("ringmaster diverged");
    }
    Ok(())
}

fn verify_tree(path: &Path, claimed_r: Option<usize>) -> Result<bool, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let file = read_audit(&text).map_err(|e| Failure::Config(e.to_string()))?;
    let branch = file
        .branch
        .ok_or_else(|| Failure::Config("file has no #branch line".into()))?;
    let claimed = claimed_r.or(file.claimed_r);
    let rep = verify_conditions(&file.tree, &branch, claimed).map_err(|e| Failure::Config(e.to_string()))?;
    print!("{}", rep.summary());
    Ok(rep.containment_holds() && rep.within_claim() && rep.fork_residual_max <= 1e-9)
}

fn presets(n: usize, seed: u64) -> Result<(), Failure> {
    for name in Regime::PRESETS {
        let t = regime_model(name, n, seed)?;
        println!("{name}");
        println!("  h   = {:?}", t.h);
        println!("  tau = {:?}", t.tau);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common } => simulate(common).map(|_| true),
        Command::Grid { common, jobs } => grid(common, *jobs).map(|_| true),
        Command::Formulas {
            regime,
            n,
            seed,
            l,
            delta,
            sigma2,
            epsilon,
        } => formulas(regime, *n, *seed, *l, *delta, *sigma2, *epsilon).map(|_| true),
        Command::QuadraticRace { mu, l, n, h, b, target } => race(*mu, *l, *n, *h, *b, *target).map(|_| true),
        Command::VerifyTree { path, claimed_r } => verify_tree(path, *claimed_r),
        Command::Presets { n, seed } => presets(*n, *seed).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Deadlock(m)) => {
            eprintln!("deadlock: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
