//! Downlink schedulers.
//!
//! Every policy ranks the backlogged flows and then hands out PRBs greedily
//! in rank order through [`allocate_in_order`]; the policies differ only in
//! the ranking.

mod max_ci;
pub mod qos_pf;
mod static_priority;

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use crate::channel::ResourceGrid;
use crate::model::{FlowId, FlowState, TtiClock};
use crate::scalar::Scalar;

pub use max_ci::MaxCi;
pub use qos_pf::{
    delay_urgency, gbr_deficit, pf_metric, priority_weight, update_ema, utility,
    PriorityNormalizer, QosPf, QosPfParams,
};
pub use static_priority::StaticPriority;

/// Read-only view a scheduler decides on.
#[derive(Debug, Clone, Copy)]
pub struct SchedulerInput<'a, T> {
    pub clock: TtiClock,
    pub flows: &'a [FlowState<T>],
    pub grid: &'a ResourceGrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankEntry {
    pub flow_id: FlowId,
    /// Policy-specific ranking key (PF metric, bits per PRB, priority level).
    pub metric: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grant {
    pub flow_id: FlowId,
    pub prbs: u32,
    pub bytes: u64,
}

/// Scheduler output for one TTI.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Allocation {
    pub tti: u64,
    /// Backlogged flows in service order.
    pub ranking: Vec<RankEntry>,
    /// Non-empty grants, in service order.
    pub grants: Vec<Grant>,
    /// Wall-clock time of the scheduling call; filled in by the caller.
    pub decision_time: Duration,
}

impl Allocation {
    pub fn total_prbs(&self) -> u32 {
        self.grants.iter().map(|g| g.prbs).sum()
    }

    pub fn grant_for(&self, flow: FlowId) -> Option<&Grant> {
        self.grants.iter().find(|g| g.flow_id == flow)
    }

    /// Equality ignoring the measured decision time.
    pub fn same_decision(&self, other: &Allocation) -> bool {
        self.tti == other.tti && self.ranking == other.ranking && self.grants == other.grants
    }
}

pub trait Scheduler<T: Scalar>: Send {
    fn kind(&self) -> SchedulerKind;
    fn schedule(&mut self, input: &SchedulerInput<'_, T>) -> Allocation;
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown scheduler {0:?} (expected qos-pf, max-ci or static-priority)")]
pub struct UnknownScheduler(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchedulerKind {
    QosPf,
    MaxCi,
    StaticPriority,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 3] = [
        SchedulerKind::QosPf,
        SchedulerKind::MaxCi,
        SchedulerKind::StaticPriority,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerKind::QosPf => "qos-pf",
            SchedulerKind::MaxCi => "max-ci",
            SchedulerKind::StaticPriority => "static-priority",
        }
    }

    pub fn build<T: Scalar>(self, params: &QosPfParams<T>) -> Box<dyn Scheduler<T>> {
        match self {
            SchedulerKind::QosPf => Box::new(QosPf::new(params.clone())),
            SchedulerKind::MaxCi => Box::new(MaxCi),
            SchedulerKind::StaticPriority => Box::new(StaticPriority::default()),
        }
    }

    /// Parses a comma separated list such as `qos-pf,max-ci`.
    pub fn parse_list(s: &str) -> Result<Vec<SchedulerKind>, UnknownScheduler> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedulerKind {
    type Err = UnknownScheduler;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qos-pf" | "qospf" => Ok(SchedulerKind::QosPf),
            "max-ci" | "maxci" => Ok(SchedulerKind::MaxCi),
            "static-priority" | "sp" => Ok(SchedulerKind::StaticPriority),
            other => Err(UnknownScheduler(other.to_string())),
        }
    }
}

/// Per-TTI byte budget implied by a flow's rate cap, if any.
pub fn rate_cap_bytes<T: Scalar>(flow: &FlowState<T>, clock: &TtiClock) -> Option<u64> {
    flow.profile.rate_cap.map(|cap| {
        let bytes = (cap * clock.duration::<T>()).as_f64() / 8.0;
        bytes.floor().max(0.0) as u64
    })
}

/// Greedy PRB assignment in the given order.
///
/// Each flow gets the fewest PRBs that cover `min(queued bytes, rate-cap
/// budget)` at its UE's bits per PRB, or whatever is left of the grid.
pub fn allocate_in_order<T: Scalar>(
    input: &SchedulerInput<'_, T>,
    order: &[(usize, f64)],
) -> Allocation {
    let mut remaining = input.grid.unassigned();
    let mut grants = Vec::new();
    let mut ranking = Vec::with_capacity(order.len());
    for &(idx, metric) in order {
        let flow = &input.flows[idx];
        ranking.push(RankEntry {
            flow_id: flow.flow_id,
            metric,
        });
        if remaining == 0 {
            continue;
        }
        let mut want = flow.queued_bytes();
        if let Some(cap) = rate_cap_bytes(flow, &input.clock) {
            want = want.min(cap);
        }
        if want == 0 {
            continue;
        }
        let bits_per_prb = input
            .grid
            .bits_per_prb(flow.ue_id)
            .expect("flow UE exists in grid") as u64;
        let needed = (want * 8).div_ceil(bits_per_prb);
        let prbs = needed.min(remaining as u64) as u32;
        let bytes = want.min(prbs as u64 * bits_per_prb / 8);
        if bytes == 0 {
            continue;
        }
        remaining -= prbs;
        grants.push(Grant {
            flow_id: flow.flow_id,
            prbs,
            bytes,
        });
    }
    Allocation {
        tti: input.clock.index(),
        ranking,
        grants,
        decision_time: Duration::ZERO,
    }
}

/// Optional per-TTI decision log: `tti,scheduler,flow_id,metric,prbs,bytes`.
///
/// One row per ranked flow; flows ranked but not served get zero PRBs.
pub struct DecisionLog<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> DecisionLog<W> {
    pub fn new(out: W) -> csv::Result<Self> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["tti", "scheduler", "flow_id", "metric", "prbs", "bytes"])?;
        Ok(Self { writer })
    }

    pub fn record(&mut self, kind: SchedulerKind, alloc: &Allocation) -> csv::Result<()> {
        for r in &alloc.ranking {
            let (prbs, bytes) = alloc
                .grant_for(r.flow_id)
                .map_or((0, 0), |g| (g.prbs, g.bytes));
            self.writer.write_record([
                alloc.tti.to_string(),
                kind.name().to_string(),
                r.flow_id.to_string(),
                format!("{:e}", r.metric),
                prbs.to_string(),
                bytes.to_string(),
            ])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> csv::Result<W> {
        self.writer.flush()?;
        self.writer
            .into_inner()
            .map_err(|e| csv::Error::from(e.into_error()))
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::model::{FlowState, Packet, QfiProfile};

    pub fn flow(
        id: FlowId,
        ue: u32,
        profile: QfiProfile<f64>,
        queued: &[(u32, u64)],
        avg: f64,
    ) -> FlowState<f64> {
        let mut f = FlowState::new(id, ue, 0, profile, 500, avg);
        f.enqueue(queued.iter().map(|&(size, at)| Packet::new(id, size, at)));
        f
    }

    pub fn grid(prbs: u32, bits: &[u32]) -> ResourceGrid {
        ResourceGrid::new(prbs, bits.to_vec())
    }
}
