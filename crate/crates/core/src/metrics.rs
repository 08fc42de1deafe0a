//! KPIs computed from per-flow run traces, and their aggregation across
//! Monte Carlo runs.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::time::Duration;

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::model::{FlowId, Packet, UeId};
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("packet of flow {0} has not departed")]
    Pending(FlowId),
}

/// `(departure - arrival + 1) * tti`: a packet served in its arrival TTI
/// took one full TTI.
pub fn packet_delay<T: Scalar>(p: &Packet, tti_duration: T) -> Result<T, MetricsError> {
    let dep = p.departure_tti.ok_or(MetricsError::Pending(p.flow_id))?;
    Ok(T::from_count(dep - p.arrival_tti + 1) * tti_duration)
}

/// Everything recorded about one flow during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    pub flow_id: FlowId,
    pub ue_id: UeId,
    pub role: String,
    pub qfi: u8,
    pub tti_ns: u64,
    pub delay_bound_ns: Option<u64>,
    /// Bits per second.
    pub gbr: Option<f64>,
    pub arrivals: u64,
    pub arrived_bytes: u64,
    pub departures: u64,
    pub drops: u64,
    /// Packets (whole or partial) still queued at the end of the run.
    pub residual: u64,
    /// Delay of every departed packet, in TTIs.
    pub delays_ttis: Vec<u32>,
    /// Bytes served in each TTI of the run.
    pub served_bytes: Vec<u32>,
}

impl FlowTrace {
    pub fn new(
        flow_id: FlowId,
        ue_id: UeId,
        role: &str,
        qfi: u8,
        tti_ns: u64,
        delay_bound_ns: Option<u64>,
        gbr: Option<f64>,
    ) -> Self {
        Self {
            flow_id,
            ue_id,
            role: role.to_string(),
            qfi,
            tti_ns,
            delay_bound_ns,
            gbr,
            arrivals: 0,
            arrived_bytes: 0,
            departures: 0,
            drops: 0,
            residual: 0,
            delays_ttis: Vec::new(),
            served_bytes: Vec::new(),
        }
    }

    pub fn record_departure(&mut self, p: &Packet) {
        let dep = p.departure_tti.expect("departed packet");
        self.departures += 1;
        self.delays_ttis.push((dep - p.arrival_tti + 1) as u32);
    }

    pub fn served_bits(&self) -> u64 {
        self.served_bytes.iter().map(|&b| b as u64 * 8).sum()
    }

    pub fn num_ttis(&self) -> usize {
        self.served_bytes.len()
    }

    fn tti_secs(&self) -> f64 {
        self.tti_ns as f64 * 1e-9
    }

    pub fn delays_secs(&self) -> impl Iterator<Item = f64> + '_ {
        let tti = self.tti_secs();
        self.delays_ttis.iter().map(move |&d| d as f64 * tti)
    }

    /// Bits per second over the whole run.
    pub fn throughput(&self) -> f64 {
        let secs = self.num_ttis() as f64 * self.tti_secs();
        if secs > 0.0 {
            self.served_bits() as f64 / secs
        } else {
            0.0
        }
    }

    /// Offered bits per second over the whole run.
    pub fn offered(&self) -> f64 {
        let secs = self.num_ttis() as f64 * self.tti_secs();
        if secs > 0.0 {
            self.arrived_bytes as f64 * 8.0 / secs
        } else {
            0.0
        }
    }
}

/// Fraction of arrived packets that departed late or were dropped, against
/// an explicit bound. Zero when nothing arrived.
pub fn violation_ratio_with_bound(trace: &FlowTrace, bound_ns: u64) -> f64 {
    if trace.arrivals == 0 {
        return 0.0;
    }
    let late = trace
        .delays_ttis
        .iter()
        .filter(|&&d| d as u64 * trace.tti_ns > bound_ns)
        .count() as u64;
    (late + trace.drops) as f64 / trace.arrivals as f64
}

/// `None` for flows without a delay bound.
pub fn violation_ratio(trace: &FlowTrace) -> Option<f64> {
    trace
        .delay_bound_ns
        .map(|b| violation_ratio_with_bound(trace, b))
}

/// Share of consecutive `window` second windows in which the flow was
/// served at least its GBR. `None` for non-GBR flows or runs shorter than
/// one window.
pub fn gbr_satisfaction(trace: &FlowTrace, window: f64) -> Option<f64> {
    let gbr = trace.gbr?;
    let window_ttis = ((window / trace.tti_secs()).round() as usize).max(1);
    let windows = trace.num_ttis() / window_ttis;
    if windows == 0 {
        return None;
    }
    let secs = window_ttis as f64 * trace.tti_secs();
    let met = trace
        .served_bytes
        .chunks_exact(window_ttis)
        .filter(|w| {
            let bits: u64 = w.iter().map(|&b| b as u64 * 8).sum();
            bits as f64 / secs >= gbr
        })
        .count();
    Some(met as f64 / windows as f64)
}

/// `(sum x)^2 / (n * sum x^2)`. `None` for empty input, negative values or
/// all zeros.
pub fn jain_index<T: Scalar>(xs: &[T]) -> Option<T> {
    if xs.is_empty() || xs.iter().any(|&x| x < T::zero()) {
        return None;
    }
    let (sum, sq) = xs
        .iter()
        .fold((T::zero(), T::zero()), |(s, q), &x| (s + x, q + x * x));
    if sq == T::zero() {
        return None;
    }
    Some(sum * sum / (T::from_count(xs.len() as u64) * sq))
}

/// Nearest-rank percentile of unsorted samples.
fn percentile(values: &mut [f64], pct: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let rank = ((pct / 100.0) * values.len() as f64).ceil() as usize;
    Some(values[rank.clamp(1, values.len()) - 1])
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowReport {
    pub flow_id: FlowId,
    pub ue_id: UeId,
    pub role: String,
    pub qfi: u8,
    pub arrivals: u64,
    pub departures: u64,
    pub residual: u64,
    pub drops: u64,
    pub mean_delay: Option<f64>,
    pub p95_delay: Option<f64>,
    pub violation_ratio: Option<f64>,
    pub gbr_satisfaction: Option<f64>,
    pub throughput: f64,
    pub offered: f64,
}

/// Flow KPIs pooled over every flow of one role.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub role: String,
    pub flows: usize,
    pub mean_delay: Option<f64>,
    pub p95_delay: Option<f64>,
    pub violation_ratio: Option<f64>,
    /// Mean over the class's GBR flows.
    pub gbr_satisfaction: Option<f64>,
    /// Aggregate over the class, bits per second.
    pub throughput: f64,
    pub drops: u64,
}

/// Per-TTI scheduling-call duration, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RuntimeStats {
    pub calls: u64,
    pub mean: f64,
    pub p99: f64,
}

impl RuntimeStats {
    pub fn from_samples(samples: &[Duration]) -> Self {
        let mut secs: Vec<f64> = samples.iter().map(Duration::as_secs_f64).collect();
        Self {
            calls: samples.len() as u64,
            mean: mean(&secs).unwrap_or(0.0),
            p99: percentile(&mut secs, 99.0).unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scheduler: String,
    pub run_seed: u64,
    pub per_flow: Vec<FlowReport>,
    pub per_class: Vec<ClassReport>,
    /// Jain index over per-flow served/offered ratios.
    pub jain_index: Option<f64>,
    /// Jain index over raw per-flow throughput.
    pub jain_raw: Option<f64>,
    pub sched_runtime: RuntimeStats,
}

impl RunReport {
    pub fn from_traces(
        scheduler: &str,
        run_seed: u64,
        traces: &[FlowTrace],
        gbr_window: f64,
        runtimes: &[Duration],
    ) -> Self {
        let per_flow: Vec<FlowReport> = traces
            .iter()
            .map(|t| {
                let mut delays: Vec<f64> = t.delays_secs().collect();
                FlowReport {
                    flow_id: t.flow_id,
                    ue_id: t.ue_id,
                    role: t.role.clone(),
                    qfi: t.qfi,
                    arrivals: t.arrivals,
                    departures: t.departures,
                    residual: t.residual,
                    drops: t.drops,
                    mean_delay: mean(&delays),
                    p95_delay: percentile(&mut delays, 95.0),
                    violation_ratio: violation_ratio(t),
                    gbr_satisfaction: gbr_satisfaction(t, gbr_window),
                    throughput: t.throughput(),
                    offered: t.offered(),
                }
            })
            .collect();

        let mut roles: Vec<&str> = Vec::new();
        for t in traces {
            if !roles.contains(&t.role.as_str()) {
                roles.push(&t.role);
            }
        }
        let per_class = roles
            .into_iter()
            .map(|role| {
                let members: Vec<(&FlowTrace, &FlowReport)> = traces
                    .iter()
                    .zip(&per_flow)
                    .filter(|(t, _)| t.role == role)
                    .collect();
                let mut delays: Vec<f64> =
                    members.iter().flat_map(|(t, _)| t.delays_secs()).collect();
                let bounded: Vec<_> = members
                    .iter()
                    .filter_map(|(t, _)| t.delay_bound_ns.map(|b| (t, b)))
                    .collect();
                let violation_ratio = (!bounded.is_empty()).then(|| {
                    let arrivals: u64 = bounded.iter().map(|(t, _)| t.arrivals).sum();
                    let bad: f64 = bounded
                        .iter()
                        .map(|(t, b)| violation_ratio_with_bound(t, *b) * t.arrivals as f64)
                        .sum();
                    if arrivals > 0 {
                        bad / arrivals as f64
                    } else {
                        0.0
                    }
                });
                let sats: Vec<f64> = members
                    .iter()
                    .filter_map(|(_, r)| r.gbr_satisfaction)
                    .collect();
                ClassReport {
                    role: role.to_string(),
                    flows: members.len(),
                    mean_delay: mean(&delays),
                    p95_delay: percentile(&mut delays, 95.0),
                    violation_ratio,
                    gbr_satisfaction: mean(&sats),
                    throughput: members.iter().map(|(_, r)| r.throughput).sum(),
                    drops: members.iter().map(|(_, r)| r.drops).sum(),
                }
            })
            .collect();

        let normalized: Vec<f64> = traces
            .iter()
            .filter(|t| t.arrived_bytes > 0)
            .map(|t| t.served_bits() as f64 / (t.arrived_bytes as f64 * 8.0))
            .collect();
        let raw: Vec<f64> = per_flow.iter().map(|r| r.throughput).collect();

        Self {
            scheduler: scheduler.to_string(),
            run_seed,
            per_flow,
            per_class,
            jain_index: jain_index(&normalized),
            jain_raw: jain_index(&raw),
            sched_runtime: RuntimeStats::from_samples(runtimes),
        }
    }

    pub fn class(&self, role: &str) -> Option<&ClassReport> {
        self.per_class.iter().find(|c| c.role == role)
    }

    /// `flows.csv`: one row per flow.
    pub fn write_flows_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(FLOW_COLUMNS)?;
        for f in &self.per_flow {
            w.write_record([
                f.flow_id.to_string(),
                f.ue_id.to_string(),
                f.role.clone(),
                f.qfi.to_string(),
                f.arrivals.to_string(),
                f.departures.to_string(),
                f.residual.to_string(),
                f.drops.to_string(),
                fmt_opt(f.mean_delay),
                fmt_opt(f.p95_delay),
                fmt_opt(f.violation_ratio),
                fmt_opt(f.gbr_satisfaction),
                f.throughput.to_string(),
                f.offered.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub const FLOW_COLUMNS: [&str; 14] = [
    "flow_id",
    "ue_id",
    "role",
    "qfi",
    "arrivals",
    "departures",
    "residual",
    "drops",
    "mean_delay_s",
    "p95_delay_s",
    "violation_ratio",
    "gbr_satisfaction",
    "throughput_bps",
    "offered_bps",
];

pub const NA: &str = "n/a";

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| x.to_string())
}

fn parse_opt(s: &str) -> Option<f64> {
    if s == NA || s.is_empty() {
        None
    } else {
        s.parse().ok()
    }
}

/// Two-sided 95% Student-t critical value.
pub fn t_critical_95(df: u64) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("df > 0")
        .inverse_cdf(0.975)
}

/// Sample mean and 95% CI half-width. The half-width is `None` below two
/// samples. Values are sorted before summation so the result does not depend
/// on input order.
pub fn mean_ci95(values: &[f64]) -> Option<(f64, Option<f64>)> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return Some((m, None));
    }
    let mut dev: Vec<f64> = v.iter().map(|x| (x - m) * (x - m)).collect();
    dev.sort_by(f64::total_cmp);
    let var = dev.iter().sum::<f64>() / (n - 1.0);
    Some((
        m,
        Some(t_critical_95(v.len() as u64 - 1) * var.sqrt() / n.sqrt()),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KpiSummary {
    pub scheduler: String,
    pub class: String,
    pub kpi: String,
    pub mean: f64,
    pub ci95: Option<f64>,
    pub n: usize,
}

/// Mean and CI of every KPI, per scheduler and class. Runtime rows are kept
/// apart because they are the only non-reproducible numbers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AggregateReport {
    pub rows: Vec<KpiSummary>,
    pub runtime: Vec<KpiSummary>,
}

pub const ALL_CLASSES: &str = "all";

pub mod kpi {
    pub const MEAN_DELAY: &str = "mean_delay_s";
    pub const P95_DELAY: &str = "p95_delay_s";
    pub const VIOLATION_RATIO: &str = "violation_ratio";
    pub const GBR_SATISFACTION: &str = "gbr_satisfaction";
    pub const THROUGHPUT: &str = "throughput_bps";
    pub const DROPS: &str = "drops";
    pub const JAIN: &str = "jain_index";
    pub const JAIN_RAW: &str = "jain_raw";
    pub const RUNTIME_MEAN: &str = "sched_runtime_mean_s";
    pub const RUNTIME_P99: &str = "sched_runtime_p99_s";
}

type Extract = fn(&ClassReport) -> Option<f64>;

const CLASS_KPIS: [(&str, Extract); 6] = [
    (kpi::MEAN_DELAY, |c| c.mean_delay),
    (kpi::P95_DELAY, |c| c.p95_delay),
    (kpi::VIOLATION_RATIO, |c| c.violation_ratio),
    (kpi::GBR_SATISFACTION, |c| c.gbr_satisfaction),
    (kpi::THROUGHPUT, |c| Some(c.throughput)),
    (kpi::DROPS, |c| Some(c.drops as f64)),
];

fn summary(scheduler: &str, class: &str, kpi: &str, values: &[f64]) -> Option<KpiSummary> {
    mean_ci95(values).map(|(mean, ci95)| KpiSummary {
        scheduler: scheduler.to_string(),
        class: class.to_string(),
        kpi: kpi.to_string(),
        mean,
        ci95,
        n: values.len(),
    })
}

/// Aggregates runs grouped by scheduler name. Groups and classes appear in
/// first-seen order.
pub fn aggregate_runs(reports: &[RunReport]) -> AggregateReport {
    let mut schedulers: Vec<&str> = Vec::new();
    for r in reports {
        if !schedulers.contains(&r.scheduler.as_str()) {
            schedulers.push(&r.scheduler);
        }
    }
    let mut out = AggregateReport::default();
    for sched in schedulers {
        let group: Vec<&RunReport> = reports.iter().filter(|r| r.scheduler == sched).collect();
        let mut classes: Vec<&str> = Vec::new();
        for r in &group {
            for c in &r.per_class {
                if !classes.contains(&c.role.as_str()) {
                    classes.push(&c.role);
                }
            }
        }
        for class in classes {
            for (name, extract) in CLASS_KPIS {
                let values: Vec<f64> = group
                    .iter()
                    .filter_map(|r| r.class(class).and_then(extract))
                    .collect();
                out.rows.extend(summary(sched, class, name, &values));
            }
        }
        let jain: Vec<f64> = group.iter().filter_map(|r| r.jain_index).collect();
        out.rows
            .extend(summary(sched, ALL_CLASSES, kpi::JAIN, &jain));
        let raw: Vec<f64> = group.iter().filter_map(|r| r.jain_raw).collect();
        out.rows
            .extend(summary(sched, ALL_CLASSES, kpi::JAIN_RAW, &raw));

        let rt_mean: Vec<f64> = group.iter().map(|r| r.sched_runtime.mean).collect();
        out.runtime
            .extend(summary(sched, ALL_CLASSES, kpi::RUNTIME_MEAN, &rt_mean));
        let rt_p99: Vec<f64> = group.iter().map(|r| r.sched_runtime.p99).collect();
        out.runtime
            .extend(summary(sched, ALL_CLASSES, kpi::RUNTIME_P99, &rt_p99));
    }
    out
}

pub const AGGREGATE_COLUMNS: [&str; 6] = ["scheduler", "class", "kpi", "mean", "ci95", "n"];

impl AggregateReport {
    pub fn get(&self, scheduler: &str, class: &str, kpi: &str) -> Option<&KpiSummary> {
        self.rows
            .iter()
            .chain(&self.runtime)
            .find(|r| r.scheduler == scheduler && r.class == class && r.kpi == kpi)
    }

    pub fn mean(&self, scheduler: &str, class: &str, kpi: &str) -> Option<f64> {
        self.get(scheduler, class, kpi).map(|r| r.mean)
    }

    pub fn merge(&mut self, other: AggregateReport) {
        self.rows.extend(other.rows);
        self.runtime.extend(other.runtime);
    }

    fn write_rows<W: Write>(rows: &[KpiSummary], out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(AGGREGATE_COLUMNS)?;
        for r in rows {
            w.write_record([
                r.scheduler.clone(),
                r.class.clone(),
                r.kpi.clone(),
                r.mean.to_string(),
                fmt_opt(r.ci95),
                r.n.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `aggregate.csv`: reproducible KPI rows.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        Self::write_rows(&self.rows, out)
    }

    /// `runtime.csv`: scheduling-call timing rows.
    pub fn write_runtime_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        Self::write_rows(&self.runtime, out)
    }

    pub fn read_rows<R: Read>(input: R) -> csv::Result<Vec<KpiSummary>> {
        let mut r = csv::Reader::from_reader(input);
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            rows.push(KpiSummary {
                scheduler: field(0).to_string(),
                class: field(1).to_string(),
                kpi: field(2).to_string(),
                mean: field(3).parse().unwrap_or(f64::NAN),
                ci95: parse_opt(field(4)),
                n: field(5).parse().unwrap_or(0),
            });
        }
        Ok(rows)
    }

    /// Rows grouped by `(scheduler, class)` for display.
    pub fn by_group(rows: &[KpiSummary]) -> BTreeMap<(String, String), Vec<&KpiSummary>> {
        let mut map: BTreeMap<(String, String), Vec<&KpiSummary>> = BTreeMap::new();
        for r in rows {
            map.entry((r.scheduler.clone(), r.class.clone()))
                .or_default()
                .push(r);
        }
        map
    }
}
