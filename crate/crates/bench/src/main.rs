use std::fs::{self, File};
use std::io::BufWriter;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use onramp::rsu::{self, RsuService, TrafficSnapshot};
use onramp::ScenarioConfig;
use onramp_bench::experiments::{motivation, run_sweep, SweepKind, SweepSpec};
use onramp_bench::probes::{measure_latency, spacetime, write_latency_log};
use onramp_bench::training::{train_policy, TrainOptions};
use onramp_bench::{BenchError, EvalOptions, Mode, Policy, Result};

#[derive(Debug, Parser)]
#[command(name = "rlpg", about = "On-ramp merging experiments with adaptive platoon gaps")]
struct Cli {
    /// Scenario JSON; missing keys take the built-in experiment scenario.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed for traffic and training.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output root; each command writes its own subdirectory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Restrict to one mode (default: both where it applies).
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// Policy checkpoint to write (train) or read (everything else).
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a gap policy and write the checkpoint and reward log.
    Train {
        #[arg(long, default_value_t = 1000)]
        episodes: usize,
        /// Platoon sizes cycled through episode by episode.
        #[arg(long, value_delimiter = ',', default_value = "20,30")]
        sizes: Vec<usize>,
        /// Ramp demands (veh/h) cycled through as well; default is the scenario's.
        #[arg(long, value_delimiter = ',')]
        ramp_rates: Vec<f64>,
    },
    /// Base-mode mean speed as the platoon grows.
    Motivation {
        #[arg(long, value_delimiter = ',', default_value = "2,5,10,15,20,25,30")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
    },
    /// Base against rlpg over one scenario parameter.
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepKind,
        /// Parameter values (default depends on the kind).
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', default_value = "20,30")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
    },
    /// Space-time speed grid over the merge area.
    Spacetime {
        #[arg(long, default_value_t = 30)]
        size: usize,
    },
    /// Compute-delay distribution of the gap advisor.
    Latency {
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
    /// Run the roadside gap-advisory service over TCP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: String,
        /// Largest platoon the loaded policy accepts; must match the checkpoint.
        #[arg(long)]
        n_max: Option<usize>,
    },
}

fn modes(cli: &Cli) -> Vec<Mode> {
    cli.mode.map_or_else(|| vec![Mode::Base, Mode::Rlpg], |m| vec![m])
}

fn load_policy(cli: &Cli, needed: bool) -> Result<Option<Policy>> {
    match &cli.checkpoint {
        Some(path) => Ok(Some(Policy::load(path)?)),
        None if needed => Err(BenchError::MissingCheckpoint),
        None => Ok(None),
    }
}

fn experiment_dir(cli: &Cli, name: &str, scenario: &ScenarioConfig) -> Result<PathBuf> {
    let dir = cli.out.join(name);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.json"), scenario.to_json())?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run(cli: &Cli) -> Result<()> {
    let mut scenario = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    match &cli.command {
        Command::Train { episodes, sizes, ramp_rates } => {
            let dir = experiment_dir(cli, "train", &scenario)?;
            let ckpt = cli.checkpoint.clone().unwrap_or_else(|| dir.join("policy.ckpt"));
            let opts = TrainOptions { episodes: *episodes, seed: cli.seed, sizes: sizes.clone(), ramp_rates: ramp_rates.clone() };
            let (_, log) = train_policy(&scenario, &opts, Some(&ckpt))?;
            log.write_csv(create(&dir.join("rewards.csv"))?)?;
            println!("{} episodes, checkpoint {}", log.len(), ckpt.display());
        }
        Command::Motivation { sizes, repetitions } => {
            let dir = experiment_dir(cli, "motivation", &scenario)?;
            let seeds: Vec<u64> = (0..*repetitions as u64).map(|k| cli.seed + k).collect();
            let result = motivation(&scenario, sizes, &seeds, &EvalOptions::default())?;
            result.write_runs_csv(create(&dir.join("runs.csv"))?)?;
            result.write_cells_csv(create(&dir.join("summary.csv"))?)?;
            for c in result.cells() {
                println!("size {:>2}: {:.2} ± {:.2} m/s", c.size, c.mean_speed, c.std_speed);
            }
        }
        Command::Sweep { kind, values, sizes, repetitions } => {
            let modes = modes(cli);
            let policy = load_policy(cli, modes.contains(&Mode::Rlpg))?;
            let dir = experiment_dir(cli, &format!("sweep-{}", kind.as_str()), &scenario)?;
            let mut spec = SweepSpec::new(*kind, modes, *repetitions, cli.seed);
            if let Some(v) = values {
                spec.values = v.clone();
            }
            spec.sizes = sizes.clone();
            let result = run_sweep(&scenario, &spec, policy.as_ref())?;
            result.write_runs_csv(create(&dir.join("runs.csv"))?)?;
            result.write_cells_csv(create(&dir.join("summary.csv"))?)?;
            result.write_gains_csv(create(&dir.join("gains.csv"))?)?;
            for c in result.cells() {
                println!("{} {:>6} size {:>2} {}: {:.2} ± {:.2} m/s", kind.as_str(), c.value, c.size, c.mode, c.mean_speed, c.std_speed);
            }
        }
        Command::Spacetime { size } => {
            scenario.world.platoons[0].size = *size;
            scenario.validate()?;
            let modes = modes(cli);
            let policy = load_policy(cli, modes.contains(&Mode::Rlpg))?;
            let dir = experiment_dir(cli, "spacetime", &scenario)?;
            for mode in modes {
                let run = spacetime(&scenario, cli.seed, mode, policy.as_ref())?;
                run.grid.write_csv(create(&dir.join(format!("grid-{mode}.csv")))?)?;
                let upstream = run.band.is_some_and(|b| b.propagates_upstream(2));
                println!("{mode}: {} cells below {:.2} m/s, upstream band: {upstream}", run.cells_below, scenario.env.reward.v_congestion);
            }
        }
        Command::Latency { n } => {
            let policy = load_policy(cli, true)?.expect("checked");
            let dir = experiment_dir(cli, "latency", &scenario)?;
            let delays = measure_latency(&scenario, &policy, *n, cli.seed)?;
            write_latency_log(create(&dir.join("latency_log.csv"))?, &delays)?;
            let cdf = rsu::latency_cdf(&delays)?;
            cdf.write_csv(create(&dir.join("latency_cdf.csv"))?)?;
            println!(
                "{n} requests: mean {:.1} µs, p90 {:.1} µs, {:.1}% under 10 ms",
                cdf.mean,
                cdf.quantile(0.9),
                cdf.fraction_below(10_000.0) * 100.0
            );
        }
        Command::Serve { listen, n_max } => {
            if let Some(k) = n_max {
                scenario.env.n_max = *k;
            }
            let policy = load_policy(cli, true)?.expect("checked");
            let service: RsuService = policy.service(&scenario)?;
            service.update_snapshot(TrafficSnapshot::free_flow(scenario.world.road.speed_limit));
            let listener = TcpListener::bind(listen)?;
            println!("serving gap advice on {}", listener.local_addr()?);
            rsu::serve(Arc::new(service), listener)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
