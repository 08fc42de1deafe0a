use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use qospf::config::load_config;
use qospf::error::format_violations;
use qospf::harness::{self, ScalabilityPoint, SensitivityResult};
use qospf::metrics::{kpi, AggregateReport, ALL_CLASSES};
use qospf::model::validate_scenario;
use qospf::{Config, ExperimentPlan, SchedulerKind};

#[derive(Parser)]
#[command(name = "qospf", version, about = "Downlink QoS scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario and experiment file (INI).
    config: PathBuf,
    /// Base seed; run k uses seed + k.
    #[arg(long)]
    seed: Option<u64>,
    /// Independent runs per configuration.
    #[arg(long)]
    runs: Option<u32>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration file and list any problems.
    Validate { config: PathBuf },
    /// Batch-run one scheduler, or every scheduler listed in the file.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scheduler: Option<SchedulerKind>,
        /// Also write arrivals.csv, channel.csv and decisions.csv per run.
        #[arg(long)]
        dump_traces: bool,
    },
    /// Batch-run several schedulers on common random numbers.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, e.g. qos-pf,max-ci,static-priority.
        #[arg(long, value_delimiter = ',')]
        schedulers: Option<Vec<SchedulerKind>>,
    },
    /// QoS-PF under each weight configuration in the file.
    SweepWeights {
        #[command(flatten)]
        common: Common,
    },
    /// QoS-PF decision time against UE count.
    SweepScale {
        #[command(flatten)]
        common: Common,
        /// Comma-separated UE counts.
        #[arg(long, value_delimiter = ',')]
        ues: Option<Vec<u32>>,
    },
    /// Print the result files found in an output directory.
    Report { dir: PathBuf },
}

fn load(path: &Path) -> Result<Config> {
    load_config(path).with_context(|| format!("loading {}", path.display()))
}

fn plan(common: &Common) -> Result<ExperimentPlan> {
    let mut plan = ExperimentPlan::from(load(&common.config)?);
    if let Some(seed) = common.seed {
        plan.base_seed = seed;
    }
    if let Some(runs) = common.runs {
        plan.runs = runs;
    }
    plan.output_dir = Some(common.out.clone());
    Ok(plan)
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.4}"))
}

fn print_comparison(agg: &AggregateReport, schedulers: &[SchedulerKind], classes: &[String]) {
    println!(
        "{:<16} {:<8} {:>12} {:>12} {:>10} {:>10} {:>14}",
        "scheduler", "class", "mean_delay", "p95_delay", "viol", "gbr_sat", "thr_bps"
    );
    for s in schedulers {
        let name = s.name();
        for c in classes {
            println!(
                "{:<16} {:<8} {:>12} {:>12} {:>10} {:>10} {:>14}",
                name,
                c,
                fmt(agg.mean(name, c, kpi::MEAN_DELAY)),
                fmt(agg.mean(name, c, kpi::P95_DELAY)),
                fmt(agg.mean(name, c, kpi::VIOLATION_RATIO)),
                fmt(agg.mean(name, c, kpi::GBR_SATISFACTION)),
                agg.mean(name, c, kpi::THROUGHPUT)
                    .map_or("n/a".into(), |x| format!("{x:.0}")),
            );
        }
        println!(
            "{:<16} jain {}  jain_raw {}  mean call {} s",
            name,
            fmt(agg.mean(name, ALL_CLASSES, kpi::JAIN)),
            fmt(agg.mean(name, ALL_CLASSES, kpi::JAIN_RAW)),
            agg.mean(name, ALL_CLASSES, kpi::RUNTIME_MEAN)
                .map_or("n/a".into(), |x| format!("{x:.3e}")),
        );
    }
}

fn batch(mut plan: ExperimentPlan, schedulers: Vec<SchedulerKind>) -> Result<()> {
    plan.schedulers = schedulers;
    let res = harness::run_batch(&plan)?;
    let classes: Vec<String> = plan
        .scenario
        .flows_per_ue
        .iter()
        .map(|f| f.role.clone())
        .collect();
    print_comparison(&res.aggregate, &plan.schedulers, &classes);
    if let Some(out) = &plan.output_dir {
        println!("results written to {}", out.display());
    }
    Ok(())
}

fn print_sensitivity(results: &[SensitivityResult], classes: &[String]) {
    for r in results {
        let a = &r.aggregate;
        let q = SchedulerKind::QosPf.name();
        print!(
            "{:<16} jain {}",
            r.name,
            fmt(a.mean(q, ALL_CLASSES, kpi::JAIN))
        );
        for c in classes {
            print!(
                "  {c}: delay {} viol {}",
                fmt(a.mean(q, c, kpi::MEAN_DELAY)),
                fmt(a.mean(q, c, kpi::VIOLATION_RATIO))
            );
        }
        println!();
    }
}

fn print_scale(points: &[ScalabilityPoint]) {
    println!("{:>6} {:>14} {:>14}", "ues", "mean_s", "p99_s");
    for p in points {
        println!(
            "{:>6} {:>14.3e} {:>14.3e}",
            p.ues, p.mean_runtime, p.p99_runtime
        );
    }
    match harness::scaling_exponent(points) {
        Some(e) => println!("fitted exponent {e:.3}"),
        None => println!("fitted exponent n/a"),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let mut problems = validate_scenario(&cfg.scenario);
            problems.extend(cfg.scheduler.violations());
            if !problems.is_empty() {
                bail!(
                    "{} is invalid:\n{}",
                    config.display(),
                    format_violations(&problems)
                );
            }
            println!(
                "{}: ok ({} UEs, {} flows, {} TTIs)",
                config.display(),
                cfg.scenario.num_ues,
                cfg.scenario.num_flows(),
                cfg.scenario.num_ttis()
            );
        }
        Command::Run {
            common,
            scheduler,
            dump_traces,
        } => {
            let mut p = plan(&common)?;
            p.dump_traces = dump_traces;
            let kinds = scheduler.map_or_else(|| p.schedulers.clone(), |k| vec![k]);
            batch(p, kinds)?;
        }
        Command::Compare { common, schedulers } => {
            let p = plan(&common)?;
            let kinds = schedulers.unwrap_or_else(|| SchedulerKind::ALL.to_vec());
            batch(p, kinds)?;
        }
        Command::SweepWeights { common } => {
            let p = plan(&common)?;
            let res = harness::sensitivity_sweep(&p)?;
            let classes: Vec<String> = p
                .scenario
                .flows_per_ue
                .iter()
                .map(|f| f.role.clone())
                .collect();
            print_sensitivity(&res, &classes);
        }
        Command::SweepScale { common, ues } => {
            let mut p = plan(&common)?;
            if let Some(u) = ues {
                p.ue_sweep = u;
            }
            print_scale(&harness::scalability_sweep(&p)?);
        }
        Command::Report { dir } => print!("{}", harness::render_report(&dir)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
