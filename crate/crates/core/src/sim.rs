//! The TTI loop: arrivals, scheduling, service and EMA update, metric
//! bookkeeping.

use std::io::Write;
use std::time::{Duration, Instant};

use crate::channel::{ChannelModel, ResourceGrid};
use crate::error::Error;
use crate::metrics::{FlowTrace, RunReport};
use crate::model::{validate_scenario, FlowState, Scenario, TtiClock};
use crate::scalar::{nanos_from_secs, Scalar};
use crate::scheduler::{
    update_ema, Allocation, DecisionLog, QosPfParams, Scheduler, SchedulerInput, SchedulerKind,
};
use crate::traffic::ArrivalProcess;

/// What one TTI looked like from the scheduler's side.
#[derive(Debug)]
pub struct StepView<'a> {
    pub tti: u64,
    /// Queued bytes per flow when the scheduler ran.
    pub queued_before: &'a [u64],
    pub grid: &'a ResourceGrid,
    pub allocation: &'a Allocation,
}

pub struct Simulation<T: Scalar> {
    kind: SchedulerKind,
    seed: u64,
    scheduler: Box<dyn Scheduler<T>>,
    params: QosPfParams<T>,
    channel: ChannelModel,
    procs: Vec<ArrivalProcess>,
    flows: Vec<FlowState<T>>,
    traces: Vec<FlowTrace>,
    clock: TtiClock,
    num_ttis: u64,
    gbr_window: f64,
    runtimes: Vec<Duration>,
    queued_before: Vec<u64>,
    grid: ResourceGrid,
    last: Allocation,
    log: Option<DecisionLog<Box<dyn Write + Send>>>,
}

impl<T: Scalar> Simulation<T> {
    pub fn new(
        scenario: &Scenario<T>,
        params: &QosPfParams<T>,
        kind: SchedulerKind,
        seed: u64,
    ) -> Result<Self, Error> {
        let mut problems = validate_scenario(scenario);
        problems.extend(params.violations());
        if !problems.is_empty() {
            return Err(Error::InvalidScenario(problems));
        }
        let tti_ns = scenario.tti_ns();
        let mut procs = Vec::new();
        let mut flows = Vec::new();
        let mut traces = Vec::new();
        for slot in scenario.flows() {
            procs.push(ArrivalProcess::for_flow(
                &slot,
                scenario.start_offsets,
                seed,
            ));
            flows.push(FlowState::new(
                slot.flow_id,
                slot.ue_id,
                slot.class_index,
                slot.profile.clone(),
                scenario.buffer_capacity,
                params.throughput_floor,
            ));
            traces.push(FlowTrace::new(
                slot.flow_id,
                slot.ue_id,
                &slot.profile.role,
                slot.profile.qfi,
                tti_ns,
                slot.profile.delay_bound.map(nanos_from_secs),
                slot.profile.gbr.map(Scalar::as_f64),
            ));
        }
        let channel = ChannelModel::for_scenario(scenario, seed);
        let num_ttis = scenario.num_ttis();
        let n = flows.len();
        Ok(Self {
            kind,
            seed,
            scheduler: kind.build(params),
            params: params.clone(),
            grid: channel.grid_for_tti(0),
            channel,
            procs,
            flows,
            traces,
            clock: TtiClock::new(tti_ns),
            num_ttis,
            gbr_window: scenario.gbr_window.as_f64(),
            runtimes: Vec::with_capacity(num_ttis as usize),
            queued_before: vec![0; n],
            last: Allocation::default(),
            log: None,
        })
    }

    /// Streams every scheduling decision to `out` as CSV.
    pub fn with_decision_log(mut self, out: Box<dyn Write + Send>) -> Result<Self, Error> {
        self.log = Some(DecisionLog::new(out)?);
        Ok(self)
    }

    pub fn kind(&self) -> SchedulerKind {
        self.kind
    }

    pub fn num_ttis(&self) -> u64 {
        self.num_ttis
    }

    pub fn flows(&self) -> &[FlowState<T>] {
        &self.flows
    }

    pub fn traces(&self) -> &[FlowTrace] {
        &self.traces
    }

    pub fn channel(&self) -> &ChannelModel {
        &self.channel
    }

    pub fn arrival_processes(&self) -> &[ArrivalProcess] {
        &self.procs
    }

    pub fn is_done(&self) -> bool {
        self.clock.index() >= self.num_ttis
    }

    /// Runs one TTI. `None` once the horizon is reached.
    pub fn step(&mut self) -> Result<Option<StepView<'_>>, Error> {
        if self.is_done() {
            return Ok(None);
        }
        let tti = self.clock.index();

        for ((flow, proc), trace) in self.flows.iter_mut().zip(&self.procs).zip(&mut self.traces) {
            let pkts = proc.arrivals_at(&self.clock);
            trace.arrivals += pkts.len() as u64;
            trace.arrived_bytes += pkts.iter().map(|p| p.size as u64).sum::<u64>();
            trace.drops += flow.enqueue(pkts);
        }

        self.grid = self.channel.grid_for_tti(tti);
        for (q, f) in self.queued_before.iter_mut().zip(&self.flows) {
            *q = f.queued_bytes();
        }
        let input = SchedulerInput {
            clock: self.clock,
            flows: &self.flows,
            grid: &self.grid,
        };
        let started = Instant::now();
        let mut alloc = self.scheduler.schedule(&input);
        alloc.decision_time = started.elapsed();
        self.runtimes.push(alloc.decision_time);

        let mut served = vec![0u64; self.flows.len()];
        for g in &alloc.grants {
            let idx = g.flow_id as usize;
            self.grid.assign(g.flow_id, g.prbs)?;
            let flow = &mut self.flows[idx];
            let trace = &mut self.traces[idx];
            served[idx] = flow.serve(g.bytes, tti, |p| trace.record_departure(p));
        }

        let dur: T = self.clock.duration();
        for ((flow, trace), &bytes) in self.flows.iter_mut().zip(&mut self.traces).zip(&served) {
            if bytes == 0 {
                flow.bytes_served_this_tti = 0;
            }
            flow.avg_throughput = update_ema(flow.avg_throughput, bytes * 8, dur, &self.params);
            trace.served_bytes.push(bytes as u32);
        }

        if let Some(log) = self.log.as_mut() {
            log.record(self.kind, &alloc)?;
        }
        self.last = alloc;
        self.clock.advance();
        Ok(Some(StepView {
            tti,
            queued_before: &self.queued_before,
            grid: &self.grid,
            allocation: &self.last,
        }))
    }

    pub fn run_to_end(&mut self) -> Result<(), Error> {
        while self.step()?.is_some() {}
        Ok(())
    }

    /// Closes the run and builds its report.
    pub fn finish(mut self) -> Result<RunReport, Error> {
        for (trace, flow) in self.traces.iter_mut().zip(&self.flows) {
            trace.residual = flow.queue_len() as u64;
        }
        if let Some(log) = self.log.take() {
            log.finish()?.flush()?;
        }
        Ok(RunReport::from_traces(
            self.kind.name(),
            self.seed,
            &self.traces,
            self.gbr_window,
            &self.runtimes,
        ))
    }
}

/// One full run of `scenario` under `kind` with `seed`.
pub fn run_single<T: Scalar>(
    scenario: &Scenario<T>,
    params: &QosPfParams<T>,
    kind: SchedulerKind,
    seed: u64,
) -> Result<RunReport, Error> {
    let mut sim = Simulation::new(scenario, params, kind, seed)?;
    sim.run_to_end()?;
    sim.finish()
}
