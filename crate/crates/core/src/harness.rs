//! Batch runs, weight sensitivity and UE-count scalability sweeps, and the
//! CSV files they leave behind.
//!
//! Output layout under the plan's output directory:
//!
//! ```text
//! <out>/aggregate.csv              KPI mean and 95% CI per scheduler and class
//! <out>/runtime.csv                scheduling-call timing (not reproducible)
//! <out>/<scheduler>/<seed>/flows.csv
//! <out>/<scheduler>/<seed>/{arrivals,channel,decisions}.csv   with trace dumps
//! <out>/sensitivity.csv            from the weight sweep
//! <out>/scalability.csv            from the UE sweep
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::Config;
use crate::error::Error;
use crate::metrics::{aggregate_runs, AggregateReport, KpiSummary, RunReport};
use crate::model::{validate_scenario, Scenario};
use crate::presets::WeightConfig;
use crate::scalar::Scalar;
use crate::scheduler::{QosPfParams, SchedulerKind};
use crate::sim::Simulation;
use crate::traffic;

#[derive(Debug, Clone)]
pub struct ExperimentPlan<T> {
    pub scenario: Scenario<T>,
    pub params: QosPfParams<T>,
    pub schedulers: Vec<SchedulerKind>,
    pub runs: u32,
    /// Run `k` uses seed `base_seed + k`.
    pub base_seed: u64,
    pub weights: Vec<WeightConfig<T>>,
    pub ue_sweep: Vec<u32>,
    pub output_dir: Option<PathBuf>,
    /// Also write arrival, channel and decision traces per run.
    pub dump_traces: bool,
}

impl<T: Scalar> ExperimentPlan<T> {
    pub fn new(scenario: Scenario<T>) -> Self {
        Self::from(Config::new(scenario))
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.runs as u64).map(|k| self.base_seed.wrapping_add(k))
    }

    pub fn with_output(mut self, dir: impl Into<PathBuf>) -> Self {
        self.output_dir = Some(dir.into());
        self
    }

    fn check(&self) -> Result<(), Error> {
        let mut problems = validate_scenario(&self.scenario);
        problems.extend(self.params.violations());
        if !problems.is_empty() {
            return Err(Error::InvalidScenario(problems));
        }
        if self.runs == 0 {
            return Err(Error::Plan("runs must be at least 1".into()));
        }
        Ok(())
    }
}

impl<T: Scalar> From<Config<T>> for ExperimentPlan<T> {
    fn from(c: Config<T>) -> Self {
        Self {
            scenario: c.scenario,
            params: c.scheduler,
            schedulers: c.experiment.schedulers,
            runs: c.experiment.runs,
            base_seed: c.experiment.base_seed,
            weights: c.weights,
            ue_sweep: c.experiment.ue_sweep,
            output_dir: None,
            dump_traces: false,
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| Error::File {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })
}

pub fn run_dir(out: &Path, kind: SchedulerKind, seed: u64) -> PathBuf {
    out.join(kind.name()).join(seed.to_string())
}

fn run_job<T: Scalar>(
    scenario: &Scenario<T>,
    params: &QosPfParams<T>,
    kind: SchedulerKind,
    seed: u64,
    trace_dir: Option<&Path>,
) -> Result<RunReport, Error> {
    let mut sim = Simulation::new(scenario, params, kind, seed)?;
    if let Some(dir) = trace_dir {
        let ttis = 0..sim.num_ttis();
        traffic::write_trace(
            create(&dir.join("arrivals.csv"))?,
            sim.arrival_processes(),
            ttis.clone(),
            scenario.tti_ns(),
        )?;
        sim.channel()
            .write_csv(create(&dir.join("channel.csv"))?, ttis)?;
        sim = sim.with_decision_log(Box::new(create(&dir.join("decisions.csv"))?))?;
    }
    sim.run_to_end()?;
    sim.finish()
}

/// Runs every `(scheduler, seed)` pair in parallel. Reports come back in
/// plan order, so the aggregate does not depend on thread timing.
fn run_all<T: Scalar>(
    scenario: &Scenario<T>,
    plan: &ExperimentPlan<T>,
    kinds: &[SchedulerKind],
) -> Result<Vec<RunReport>, Error> {
    let jobs: Vec<(SchedulerKind, u64)> = kinds
        .iter()
        .flat_map(|&k| plan.seeds().map(move |s| (k, s)))
        .collect();
    let trace_root = plan.output_dir.as_deref().filter(|_| plan.dump_traces);
    let results: Vec<Result<RunReport, Error>> = jobs
        .par_iter()
        .map(|&(kind, seed)| {
            let dir = trace_root.map(|o| run_dir(o, kind, seed));
            run_job(scenario, &plan.params, kind, seed, dir.as_deref()).map_err(|e| {
                Error::RunFailed {
                    scheduler: kind.name().to_string(),
                    seed,
                    source: Box::new(e),
                }
            })
        })
        .collect();
    results.into_iter().collect()
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub reports: Vec<RunReport>,
    pub aggregate: AggregateReport,
}

/// `runs` seeds for each scheduler in the plan.
pub fn run_batch<T: Scalar>(plan: &ExperimentPlan<T>) -> Result<BatchResult, Error> {
    plan.check()?;
    let reports = run_all(&plan.scenario, plan, &plan.schedulers)?;
    let aggregate = aggregate_runs(&reports);
    if let Some(out) = &plan.output_dir {
        for r in &reports {
            let kind: SchedulerKind = r
                .scheduler
                .parse()
                .map_err(|e| Error::Plan(format!("{e}")))?;
            let path = run_dir(out, kind, r.run_seed).join("flows.csv");
            r.write_flows_csv(create(&path)?)?;
        }
        aggregate.write_csv(create(&out.join("aggregate.csv"))?)?;
        aggregate.write_runtime_csv(create(&out.join("runtime.csv"))?)?;
    }
    Ok(BatchResult { reports, aggregate })
}

#[derive(Debug, Clone)]
pub struct SensitivityResult {
    pub name: String,
    pub aggregate: AggregateReport,
}

pub const SENSITIVITY_COLUMNS: [&str; 6] = ["weights", "class", "kpi", "mean", "ci95", "n"];

/// Runs QoS-PF once per weight configuration, with the weights applied to
/// every flow.
pub fn sensitivity_sweep<T: Scalar>(
    plan: &ExperimentPlan<T>,
) -> Result<Vec<SensitivityResult>, Error> {
    plan.check()?;
    if plan.weights.is_empty() {
        return Err(Error::Plan("no weight configurations to sweep".into()));
    }
    let mut scenarios = Vec::new();
    for w in &plan.weights {
        let scenario = plan.scenario.clone().with_weights(w.alpha, w.beta, w.gamma);
        let problems = validate_scenario(&scenario);
        if !problems.is_empty() {
            return Err(Error::Plan(format!(
                "weights `{}` rejected:\n{}",
                w.name,
                crate::error::format_violations(&problems)
            )));
        }
        scenarios.push(scenario);
    }
    let mut out = Vec::new();
    for (w, scenario) in plan.weights.iter().zip(&scenarios) {
        let reports = run_all(scenario, plan, &[SchedulerKind::QosPf])?;
        out.push(SensitivityResult {
            name: w.name.clone(),
            aggregate: aggregate_runs(&reports),
        });
    }
    if let Some(dir) = &plan.output_dir {
        write_sensitivity_csv(&out, create(&dir.join("sensitivity.csv"))?)?;
    }
    Ok(out)
}

pub fn write_sensitivity_csv<W: Write>(results: &[SensitivityResult], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SENSITIVITY_COLUMNS)?;
    for r in results {
        for row in &r.aggregate.rows {
            w.write_record([
                r.name.clone(),
                row.class.clone(),
                row.kpi.clone(),
                row.mean.to_string(),
                row.ci95
                    .map_or_else(|| crate::metrics::NA.to_string(), |v| v.to_string()),
                row.n.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalabilityPoint {
    pub ues: u32,
    /// Mean over runs of the per-run mean call time, seconds.
    pub mean_runtime: f64,
    /// Mean over runs of the per-run p99 call time, seconds.
    pub p99_runtime: f64,
}

pub const SCALABILITY_COLUMNS: [&str; 3] = ["ues", "mean_runtime", "p99_runtime"];

/// Times QoS-PF at each UE count. Runs go one at a time so the timings
/// don't compete for cores.
pub fn scalability_sweep<T: Scalar>(
    plan: &ExperimentPlan<T>,
) -> Result<Vec<ScalabilityPoint>, Error> {
    plan.check()?;
    if plan.ue_sweep.is_empty() || plan.ue_sweep.contains(&0) {
        return Err(Error::Plan("ue sweep needs positive UE counts".into()));
    }
    let mut points = Vec::new();
    for &ues in &plan.ue_sweep {
        let scenario = plan.scenario.clone().with_num_ues(ues);
        let mut mean = Vec::new();
        let mut p99 = Vec::new();
        for seed in plan.seeds() {
            let r = run_job(&scenario, &plan.params, SchedulerKind::QosPf, seed, None).map_err(
                |e| Error::RunFailed {
                    scheduler: SchedulerKind::QosPf.name().to_string(),
                    seed,
                    source: Box::new(e),
                },
            )?;
            mean.push(r.sched_runtime.mean);
            p99.push(r.sched_runtime.p99);
        }
        points.push(ScalabilityPoint {
            ues,
            mean_runtime: mean.iter().sum::<f64>() / mean.len() as f64,
            p99_runtime: p99.iter().sum::<f64>() / p99.len() as f64,
        });
    }
    if let Some(dir) = &plan.output_dir {
        let mut w = csv::Writer::from_writer(create(&dir.join("scalability.csv"))?);
        w.write_record(SCALABILITY_COLUMNS)?;
        for p in &points {
            w.write_record([
                p.ues.to_string(),
                p.mean_runtime.to_string(),
                p.p99_runtime.to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(points)
}

/// Least-squares slope of `ln y` against `ln x`. Needs two distinct
/// positive `x` values and positive `y`.
pub fn power_law_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 || logs.len() != points.len() {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn scaling_exponent(points: &[ScalabilityPoint]) -> Option<f64> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.ues as f64, p.mean_runtime))
        .collect();
    power_law_exponent(&xy)
}

/// Renders the CSV summaries found in an output directory as text.
pub fn render_report(dir: &Path) -> Result<String, Error> {
    let mut text = String::new();
    let mut found = false;
    for name in ["aggregate.csv", "runtime.csv"] {
        let path = dir.join(name);
        if !path.exists() {
            continue;
        }
        found = true;
        let file = File::open(&path).map_err(|source| Error::File {
            path: path.clone(),
            source,
        })?;
        let rows = AggregateReport::read_rows(file)?;
        text.push_str(&format!("== {name}\n"));
        text.push_str(&render_rows(&rows));
    }
    for name in ["sensitivity.csv", "scalability.csv"] {
        let path = dir.join(name);
        if !path.exists() {
            continue;
        }
        found = true;
        let body = fs::read_to_string(&path).map_err(|source| Error::File {
            path: path.clone(),
            source,
        })?;
        text.push_str(&format!("== {name}\n"));
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let headers = r.headers()?.clone();
        text.push_str(&headers.iter().collect::<Vec<_>>().join("\t"));
        text.push('\n');
        for rec in r.records() {
            text.push_str(&rec?.iter().collect::<Vec<_>>().join("\t"));
            text.push('\n');
        }
    }
    if !found {
        return Err(Error::Plan(format!("no result files in {}", dir.display())));
    }
    Ok(text)
}

fn render_rows(rows: &[KpiSummary]) -> String {
    let mut s = String::new();
    for ((sched, class), group) in AggregateReport::by_group(rows) {
        s.push_str(&format!("{sched} / {class}\n"));
        for r in group {
            let ci = r
                .ci95
                .map_or_else(|| "n/a".to_string(), |c| format!("{c:.4e}"));
            s.push_str(&format!(
                "  {:<24} {:>14.6e} ± {} (n={})\n",
                r.kpi, r.mean, ci, r.n
            ));
        }
    }
    s
}
