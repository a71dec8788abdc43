use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use swarmtime::fluidsim::default_step;
use swarmtime::multiplicity::max_classic_multiplicity;
use swarmtime::{
    check_plan, classic_multiplicity, derive_quantities, differentiated_service_time,
    equal_service_time, parse_config, parse_plan, plan_differentiated, plan_equal_service,
    plan_to_text, run_sweep, schedule_nested, service_multiplicity, simulate, sweep_csv,
    validate_distribution, FlowPlan, RunConfig,
};

/// Minimum finish times, bandwidth plans and fluid simulation for
/// upload-constrained peer-to-peer file distribution.
#[derive(Parser)]
#[command(name = "swarmtime", version, author)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// JSON run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Write the result here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Directory for results when no output file is given.
    #[arg(long, env = "SWARMTIME_OUT_DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Minimum last finish time for one instance.
    Analyze {
        #[command(flatten)]
        io: Io,
        /// Size of the favoured first set; defaults to equal service.
        #[arg(short = 'l', long)]
        first_set: Option<usize>,
    },
    /// Classic and peer-data-aware multiplicity.
    Multiplicity {
        #[command(flatten)]
        io: Io,
    },
    /// Finish time over the configured phi and L grid, as CSV.
    Sweep {
        #[command(flatten)]
        io: Io,
    },
    /// Bandwidth plan in line-oriented text form.
    Plan {
        #[command(flatten)]
        io: Io,
        #[arg(short = 'l', long)]
        first_set: Option<usize>,
    },
    /// Run a plan through the fluid simulator.
    Simulate {
        #[command(flatten)]
        io: Io,
        #[arg(short = 'l', long)]
        first_set: Option<usize>,
        /// Plan file; built from the configuration if absent.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Time step; defaults to the horizon over 10^4.
        #[arg(long)]
        step: Option<f64>,
    },
    /// Tiered service schedule.
    Nested {
        #[command(flatten)]
        io: Io,
        /// Tier sizes, e.g. 12,6.
        #[arg(long, value_delimiter = ',')]
        tiers: Vec<usize>,
    },
    /// Check the configured distribution, and optionally a plan.
    Validate {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        plan: Option<PathBuf>,
    },
}

impl Command {
    fn io(&self) -> &Io {
        match self {
            Self::Analyze { io, .. }
            | Self::Multiplicity { io }
            | Self::Sweep { io }
            | Self::Plan { io, .. }
            | Self::Simulate { io, .. }
            | Self::Nested { io, .. }
            | Self::Validate { io, .. } => io,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Analyze { .. } => "analyze",
            Self::Multiplicity { .. } => "multiplicity",
            Self::Sweep { .. } => "sweep",
            Self::Plan { .. } => "plan",
            Self::Simulate { .. } => "simulate",
            Self::Nested { .. } => "nested",
            Self::Validate { .. } => "validate",
        }
    }

    fn extension(&self) -> &'static str {
        match self {
            Self::Sweep { .. } | Self::Simulate { .. } | Self::Nested { .. } => "csv",
            _ => "txt",
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

fn load_plan(path: &Path) -> Result<FlowPlan> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_plan(&text).with_context(|| format!("in {}", path.display()))
}

fn build_plan(cfg: &RunConfig, first_set: Option<usize>) -> Result<FlowPlan> {
    let (swarm, dist) = cfg.instance()?;
    Ok(match first_set.or(cfg.first_set_size) {
        Some(l) => plan_differentiated(&swarm, &dist, l)?,
        None => plan_equal_service(&swarm, &dist)?,
    })
}

fn analyze(cfg: &RunConfig, first_set: Option<usize>) -> Result<String> {
    let (swarm, dist) = cfg.instance()?;
    let q = derive_quantities(&swarm, &dist)?;
    let m = service_multiplicity(&swarm, &dist)?;
    let (label, outcome) = match first_set.or(cfg.first_set_size) {
        Some(l) => (
            format!("differentiated (L = {l})"),
            differentiated_service_time(&swarm, &dist, l)?,
        ),
        None => ("equal".to_string(), equal_service_time(&swarm, &dist)?),
    };
    let mut s = String::new();
    writeln!(s, "peers: {}", swarm.len())?;
    writeln!(s, "phi: {}", cfg.phi)?;
    if cfg.common_data > 0.0 {
        writeln!(
            s,
            "common_data: {} (reduced phi {})",
            cfg.common_data, dist.phi
        )?;
    }
    writeln!(s, "phi_zero: {}", q.phi_zero)?;
    writeln!(s, "t_0: {}", q.bottleneck_time)?;
    writeln!(s, "t_a: {}", q.exchange_time)?;
    writeln!(s, "service: {label}")?;
    writeln!(s, "T_L: {}", outcome.t_last)?;
    writeln!(s, "regime: {}", outcome.regime)?;
    writeln!(s, "multiplicity: {} ({})", m.m, m.rule_used)?;
    Ok(s)
}

fn multiplicity(cfg: &RunConfig) -> Result<String> {
    let (swarm, dist) = cfg.instance()?;
    let classic = classic_multiplicity(&swarm);
    let sorted = max_classic_multiplicity(&swarm);
    let m = service_multiplicity(&swarm, &dist)?;
    let mut s = String::new();
    writeln!(s, "classic: {}", classic.m)?;
    writeln!(s, "classic_sorted: {}", sorted.m)?;
    write!(s, "phi_multiplicity: {} ({})", m.m, m.rule_used)?;
    if let Some(lp) = m.l_prime {
        write!(s, ", L' = {lp}")?;
    }
    writeln!(s)?;
    Ok(s)
}

fn validate(cfg: &RunConfig, plan: Option<&Path>) -> Result<(String, bool)> {
    let swarm = cfg.swarm()?;
    let dist = cfg.distribution()?;
    let report = validate_distribution(&swarm, &dist);
    let mut ok = report.passed();
    let mut s = format!("distribution\n{report}");
    if let Some(path) = plan {
        let plan = load_plan(path)?;
        let (swarm, dist) = cfg.instance()?;
        let check = check_plan(&plan, &swarm, &dist);
        ok &= check.passed();
        write!(s, "plan\n{}", check.report)?;
    }
    writeln!(s, "{}", if ok { "valid" } else { "invalid" })?;
    Ok((s, ok))
}

/// Returns the rendered result and whether it represents success.
fn run(command: &Command, cfg: &RunConfig) -> Result<(String, bool)> {
    let out = match command {
        Command::Analyze { first_set, .. } => analyze(cfg, *first_set)?,
        Command::Multiplicity { .. } => multiplicity(cfg)?,
        Command::Sweep { .. } => sweep_csv(&run_sweep(cfg)?),
        Command::Plan { first_set, .. } => plan_to_text(&build_plan(cfg, *first_set)?),
        Command::Simulate {
            first_set,
            plan,
            step,
            ..
        } => {
            let plan = match plan {
                Some(p) => load_plan(p)?,
                None => build_plan(cfg, *first_set)?,
            };
            let (swarm, dist) = cfg.instance()?;
            let step = step.or(cfg.sim_step).unwrap_or_else(|| default_step(&plan));
            let result = simulate(&swarm, &dist, &plan, step)?;
            let ok = result.violations.is_empty();
            return Ok((result.to_csv(), ok));
        }
        Command::Nested { tiers, .. } => {
            let tiers = if tiers.is_empty() {
                match &cfg.tiers {
                    Some(t) => t.clone(),
                    None => bail!("no tiers given; pass --tiers or set `tiers` in the config"),
                }
            } else {
                tiers.clone()
            };
            let (swarm, dist) = (cfg.swarm()?, cfg.distribution()?);
            schedule_nested(&swarm, &dist, &tiers)?.to_csv()
        }
        Command::Validate { plan, .. } => return validate(cfg, plan.as_deref()),
    };
    Ok((out, true))
}

fn destination(command: &Command, cfg_output: Option<String>) -> Option<PathBuf> {
    let io = command.io();
    io.output
        .clone()
        .or_else(|| cfg_output.map(PathBuf::from))
        .or_else(|| {
            io.out_dir
                .as_ref()
                .map(|d| d.join(format!("{}.{}", command.name(), command.extension())))
        })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load_config(&cli.command.io().config).and_then(|cfg| {
        let (text, ok) = run(&cli.command, &cfg)?;
        match destination(&cli.command, cfg.output.clone()) {
            Some(path) => {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir)?;
                }
                fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            }
            None => print!("{text}"),
        }
        Ok(ok)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
