use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reactsim::harness::{self, ScenarioConfig, SweepSpec, TopologySpec, UseCase};
use reactsim::{topo, Error, Result};

#[derive(Parser)]
#[command(name = "reactsim", version, about = "Simulate in-network reaction algorithms on switch topologies")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV files.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Output directory (default: the config's output_dir, else ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every combination of seeds and loss rates in parallel.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Comma-separated per-link loss rates.
        #[arg(long = "loss", value_delimiter = ',')]
        losses: Vec<f64>,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
    /// Check that a topology loads, is well formed and is connected.
    ValidateTopo {
        #[arg(long)]
        topo: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write the brute-force expected output of an algorithm.
    Oracle {
        #[arg(long)]
        algo: String,
        #[arg(long)]
        topo: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output file (default: <algo>_oracle.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// TOML scenario file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// clocksync, mcast or algorithm.
    #[arg(long)]
    use_case: Option<String>,
    /// Algorithm name for --use-case algorithm.
    #[arg(long)]
    algo: Option<String>,
    /// fat-tree:k=8, jellyfish:n=200,r=8 or file:path.
    #[arg(long)]
    topo: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    loss_rate: Option<f64>,
    #[arg(long)]
    horizon_ns: Option<u64>,
    /// Number of injected worst-case failures.
    #[arg(long)]
    failures: Option<usize>,
    /// Control bandwidth cap per link, in bits per second.
    #[arg(long)]
    budget_bps: Option<f64>,
    /// Multicast group count.
    #[arg(long)]
    groups: Option<usize>,
    #[arg(long)]
    spanner_k: Option<u32>,
    /// Messages per packet in the multicast optimization phase.
    #[arg(long)]
    batch: Option<usize>,
}

impl ScenarioArgs {
    fn build(&self) -> Result<(ScenarioConfig, Option<PathBuf>)> {
        let (mut cfg, base) = match &self.config {
            Some(p) => (ScenarioConfig::load(p)?, p.parent().map(Path::to_path_buf)),
            None => {
                let topo = self.topo.as_deref().ok_or_else(|| Error::config("--topo or --config is required"))?;
                let uc = self.use_case.as_deref().ok_or_else(|| Error::config("--use-case or --config is required"))?;
                (ScenarioConfig::new(TopologySpec::parse(topo)?, self.parse_use_case(uc)?, 1), None)
            }
        };
        if self.config.is_some() {
            if let Some(t) = &self.topo {
                cfg.topology = TopologySpec::parse(t)?;
            }
            if let Some(uc) = &self.use_case {
                cfg.use_case = self.parse_use_case(uc)?;
            }
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(l) = self.loss_rate {
            cfg.loss_rate = l;
        }
        if let Some(h) = self.horizon_ns {
            cfg.horizon_ns = Some(h);
        }
        if let Some(n) = self.failures {
            cfg.auto_failures = n;
        }
        if let Some(b) = self.budget_bps {
            let mut e = cfg.engine_config();
            e.control_budget_bps = Some(b);
            cfg.engine = Some(e);
        }
        if let Some(g) = self.groups {
            cfg.mcast.groups.count = g;
        }
        if let Some(k) = self.spanner_k {
            cfg.mcast.spanner_k = k;
        }
        if let Some(b) = self.batch {
            cfg.mcast.opt_batch = b;
        }
        cfg.validate()?;
        Ok((cfg, base))
    }

    fn parse_use_case(&self, s: &str) -> Result<UseCase> {
        match s {
            "clocksync" => Ok(UseCase::Clocksync),
            "mcast" => Ok(UseCase::Mcast),
            "algorithm" => {
                let name = self.algo.clone().ok_or_else(|| Error::config("--use-case algorithm needs --algo"))?;
                Ok(UseCase::Algorithm { name })
            }
            other => Err(Error::config(format!("unknown use case '{other}'"))),
        }
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { scenario, out } => {
            let (cfg, base) = scenario.build()?;
            let out = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| "out".into());
            let s = harness::run_scenario(&cfg, &out, base.as_deref())?;
            log::info!("{} on {} finished; files in {}", s.use_case, s.topology, out.display());
            println!("{}", serde_json::to_string(&s).expect("summary serializes"));
        }
        Command::Sweep { scenario, seeds, losses, out } => {
            let (base_cfg, base) = scenario.build()?;
            let spec = SweepSpec { base: base_cfg, seeds, loss_rates: losses };
            let rows = harness::sweep(&spec, &out, base.as_deref())?;
            for r in &rows {
                println!("{}\t{}", r.dir, r.status);
            }
            if let Some(bad) = rows.iter().find(|r| r.status != "ok") {
                return Err(if bad.status == "not_converged" {
                    Error::NotConverged(bad.dir.clone())
                } else {
                    Error::Contract(format!("{}: {}", bad.dir, bad.status))
                });
            }
        }
        Command::ValidateTopo { topo: spec, seed } => {
            let t = TopologySpec::parse(&spec)?.build(seed, None)?;
            t.validate()?;
            let comps = topo::components(&t).len();
            if comps != 1 {
                return Err(Error::config(format!("{spec}: {comps} connected components")));
            }
            println!("{spec}: {} switches, {} links, diameter {}", t.node_count(), t.edge_count(), topo::diameter(&t)?);
        }
        Command::Oracle { algo, topo: spec, seed, out } => {
            let t = TopologySpec::parse(&spec)?.build(seed, None)?;
            let out = out.unwrap_or_else(|| format!("{algo}_oracle.csv").into());
            harness::oracle(&algo, &t, seed, &out)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
