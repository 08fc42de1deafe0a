//! Packet arrival processes and per-flow FIFO admission.
//!
//! Arrivals are pure functions of the process parameters, the run seed and the
//! TTI index, so a flow's packets can be recomputed for any TTI without
//! replaying the ones before it.

use std::io::Write;
use std::ops::Range;

use rand::Rng;

use crate::model::{ArrivalSpec, FlowId, FlowSlot, FlowState, Packet, StartOffsetPolicy, TtiClock};
use crate::rng::{self, TAG_BURST, TAG_OFFSET};
use crate::scalar::{nanos_from_secs, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalKind {
    Periodic {
        period_ns: u64,
    },
    VariableVideo {
        frame_interval_ns: u64,
        burst_min: u32,
        burst_max: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrivalProcess {
    pub flow_id: FlowId,
    pub packet_size: u32,
    pub kind: ArrivalKind,
    pub start_offset_ns: u64,
    seed: u64,
}

impl ArrivalProcess {
    pub fn periodic(
        flow_id: FlowId,
        packet_size: u32,
        period_ns: u64,
        start_offset_ns: u64,
    ) -> Self {
        assert!(period_ns > 0);
        Self {
            flow_id,
            packet_size,
            kind: ArrivalKind::Periodic { period_ns },
            start_offset_ns,
            seed: 0,
        }
    }

    pub fn video(
        flow_id: FlowId,
        packet_size: u32,
        frame_interval_ns: u64,
        bursts: (u32, u32),
        start_offset_ns: u64,
        seed: u64,
    ) -> Self {
        assert!(frame_interval_ns > 0 && bursts.0 >= 1 && bursts.1 >= bursts.0);
        Self {
            flow_id,
            packet_size,
            kind: ArrivalKind::VariableVideo {
                frame_interval_ns,
                burst_min: bursts.0,
                burst_max: bursts.1,
            },
            start_offset_ns,
            seed,
        }
    }

    /// Builds the process for one scenario flow, drawing its start offset
    /// from the run seed.
    pub fn for_flow<T: Scalar>(
        slot: &FlowSlot<'_, T>,
        policy: StartOffsetPolicy,
        seed: u64,
    ) -> Self {
        let p = slot.profile;
        let interval_ns = nanos_from_secs(p.arrival.interval()).max(1);
        let offset = match policy {
            StartOffsetPolicy::Zero => 0,
            StartOffsetPolicy::Random => {
                rng::stream(seed, &[TAG_OFFSET, slot.flow_id as u64]).random_range(0..interval_ns)
            }
        };
        match p.arrival {
            ArrivalSpec::Periodic { .. } => {
                let mut proc = Self::periodic(slot.flow_id, p.packet_size, interval_ns, offset);
                proc.seed = seed;
                proc
            }
            ArrivalSpec::Video {
                burst_min,
                burst_max,
                ..
            } => Self::video(
                slot.flow_id,
                p.packet_size,
                interval_ns,
                (burst_min, burst_max),
                offset,
                seed,
            ),
        }
    }

    fn interval_ns(&self) -> u64 {
        match self.kind {
            ArrivalKind::Periodic { period_ns } => period_ns,
            ArrivalKind::VariableVideo {
                frame_interval_ns, ..
            } => frame_interval_ns,
        }
    }

    /// Packets in emission instant `k`.
    pub fn burst_len(&self, k: u64) -> u32 {
        match self.kind {
            ArrivalKind::Periodic { .. } => 1,
            ArrivalKind::VariableVideo {
                burst_min,
                burst_max,
                ..
            } => rng::stream(self.seed, &[TAG_BURST, self.flow_id as u64, k])
                .random_range(burst_min..=burst_max),
        }
    }

    /// Emission instants whose time falls in `[start_ns, end_ns)`.
    fn instants_in(&self, start_ns: u64, end_ns: u64) -> Range<u64> {
        let interval = self.interval_ns();
        let first_at_or_after = |t: u64| {
            if t <= self.start_offset_ns {
                0
            } else {
                (t - self.start_offset_ns).div_ceil(interval)
            }
        };
        first_at_or_after(start_ns)..first_at_or_after(end_ns)
    }

    pub fn arrivals_at(&self, clock: &TtiClock) -> Vec<Packet> {
        let start = clock.start_ns();
        let instants = self.instants_in(start, start + clock.duration_ns());
        let mut out = Vec::new();
        for k in instants {
            for _ in 0..self.burst_len(k) {
                out.push(Packet::new(self.flow_id, self.packet_size, clock.index()));
            }
        }
        out
    }

    /// Long-run offered load in bits per second.
    pub fn offered_load(&self) -> f64 {
        let mean_burst = match self.kind {
            ArrivalKind::Periodic { .. } => 1.0,
            ArrivalKind::VariableVideo {
                burst_min,
                burst_max,
                ..
            } => (burst_min + burst_max) as f64 / 2.0,
        };
        self.packet_size as f64 * 8.0 * mean_burst * 1e9 / self.interval_ns() as f64
    }
}

/// Appends `pkts` to the flow's FIFO with tail drop. Returns how many were
/// dropped.
pub fn enqueue<T: Scalar>(flow: &mut FlowState<T>, pkts: Vec<Packet>) -> u64 {
    flow.enqueue(pkts)
}

/// Writes `tti,flow_id,packet_size`, one row per packet.
pub fn write_trace<W: Write>(
    out: W,
    procs: &[ArrivalProcess],
    ttis: Range<u64>,
    tti_ns: u64,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tti", "flow_id", "packet_size"])?;
    for tti in ttis {
        let clock = TtiClock::at(tti, tti_ns);
        for p in procs {
            for pkt in p.arrivals_at(&clock) {
                w.write_record([
                    tti.to_string(),
                    pkt.flow_id.to_string(),
                    pkt.size.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
