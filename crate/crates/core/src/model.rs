//! Domain types shared by traffic, channel, schedulers and metrics.

use std::collections::VecDeque;
use std::fmt;

use crate::channel::ChannelVariation;
use crate::scalar::{nanos_from_secs, secs_from_nanos, Scalar};

pub type FlowId = u32;
pub type UeId = u32;

/// Default per-flow buffer, in packets.
pub const DEFAULT_BUFFER_CAPACITY: usize = 500;

/// Discrete scheduling clock. One tick per TTI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TtiClock {
    index: u64,
    duration_ns: u64,
}

impl TtiClock {
    pub fn new(duration_ns: u64) -> Self {
        assert!(duration_ns > 0, "TTI duration must be positive");
        Self {
            index: 0,
            duration_ns,
        }
    }

    pub fn at(index: u64, duration_ns: u64) -> Self {
        Self {
            index,
            ..Self::new(duration_ns)
        }
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn duration_ns(&self) -> u64 {
        self.duration_ns
    }

    pub fn duration<T: Scalar>(&self) -> T {
        secs_from_nanos(self.duration_ns)
    }

    /// Start of the current TTI in nanoseconds since simulation start.
    pub fn start_ns(&self) -> u64 {
        self.index * self.duration_ns
    }

    pub fn advance(&mut self) {
        self.index += 1;
    }
}

/// How packets of a flow are generated.
#[derive(Debug, Clone, PartialEq)]
pub enum ArrivalSpec<T> {
    /// One packet every `period` seconds.
    Periodic { period: T },
    /// A burst of `burst_min..=burst_max` packets every `frame_interval` seconds.
    Video {
        frame_interval: T,
        burst_min: u32,
        burst_max: u32,
    },
}

impl<T: Scalar> ArrivalSpec<T> {
    /// Period between emission instants (packet or frame).
    pub fn interval(&self) -> T {
        match *self {
            ArrivalSpec::Periodic { period } => period,
            ArrivalSpec::Video { frame_interval, .. } => frame_interval,
        }
    }

    /// Mean packets per emission instant.
    pub fn mean_burst(&self) -> f64 {
        match *self {
            ArrivalSpec::Periodic { .. } => 1.0,
            ArrivalSpec::Video {
                burst_min,
                burst_max,
                ..
            } => (burst_min as f64 + burst_max as f64) / 2.0,
        }
    }
}

/// Per-flow QoS contract.
///
/// `role` is the stable key ("control", "sensor", "video"); `qfi` and
/// `five_qi` are carried as labels only.
#[derive(Debug, Clone, PartialEq)]
pub struct QfiProfile<T> {
    pub role: String,
    pub qfi: u8,
    pub five_qi: u16,
    /// Bytes per packet.
    pub packet_size: u32,
    pub arrival: ArrivalSpec<T>,
    /// Seconds.
    pub delay_bound: Option<T>,
    /// Bits per second.
    pub gbr: Option<T>,
    /// Lower is more important; 1 is the top level.
    pub priority_level: i32,
    /// Explicit priority scalar in (0, 1], overriding the level-derived one.
    pub priority_weight: Option<T>,
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    /// Bits per second.
    pub rate_cap: Option<T>,
}

impl<T: Scalar> QfiProfile<T> {
    pub fn is_gbr(&self) -> bool {
        self.gbr.is_some()
    }

    /// Long-run offered load in bits per second.
    pub fn offered_load(&self) -> f64 {
        let interval = self.arrival.interval().as_f64();
        self.packet_size as f64 * 8.0 * self.arrival.mean_burst() / interval
    }

    pub fn with_weights(mut self, alpha: T, beta: T, gamma: T) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self.gamma = gamma;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub flow_id: FlowId,
    pub size: u32,
    pub arrival_tti: u64,
    pub remaining_bytes: u32,
    pub departure_tti: Option<u64>,
}

impl Packet {
    pub fn new(flow_id: FlowId, size: u32, arrival_tti: u64) -> Self {
        Self {
            flow_id,
            size,
            arrival_tti,
            remaining_bytes: size,
            departure_tti: None,
        }
    }
}

/// Live scheduling context of one flow.
#[derive(Debug, Clone)]
pub struct FlowState<T> {
    pub flow_id: FlowId,
    pub ue_id: UeId,
    /// Index into the scenario's per-UE profile list.
    pub class_index: usize,
    pub profile: QfiProfile<T>,
    queue: VecDeque<Packet>,
    queued_bytes: u64,
    buffer_capacity: usize,
    /// EMA of served rate, bits per second.
    pub avg_throughput: T,
    pub bytes_served_this_tti: u64,
    pub cumulative_bits_served: u64,
    pub drops: u64,
}

impl<T: Scalar> FlowState<T> {
    pub fn new(
        flow_id: FlowId,
        ue_id: UeId,
        class_index: usize,
        profile: QfiProfile<T>,
        buffer_capacity: usize,
        initial_throughput: T,
    ) -> Self {
        Self {
            flow_id,
            ue_id,
            class_index,
            profile,
            queue: VecDeque::new(),
            queued_bytes: 0,
            buffer_capacity,
            avg_throughput: initial_throughput,
            bytes_served_this_tti: 0,
            cumulative_bits_served: 0,
            drops: 0,
        }
    }

    pub fn queue(&self) -> &VecDeque<Packet> {
        &self.queue
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn queued_bytes(&self) -> u64 {
        self.queued_bytes
    }

    pub fn buffer_capacity(&self) -> usize {
        self.buffer_capacity
    }

    pub fn is_backlogged(&self) -> bool {
        !self.queue.is_empty()
    }

    pub fn head_of_line(&self) -> Option<&Packet> {
        self.queue.front()
    }

    /// Appends in FIFO order with tail drop. Returns the number dropped.
    pub fn enqueue<I: IntoIterator<Item = Packet>>(&mut self, packets: I) -> u64 {
        let mut dropped = 0;
        for pkt in packets {
            if self.queue.len() >= self.buffer_capacity {
                dropped += 1;
                continue;
            }
            self.queued_bytes += pkt.remaining_bytes as u64;
            self.queue.push_back(pkt);
        }
        self.drops += dropped;
        dropped
    }

    /// Drains up to `bytes` from the head of the queue. Every packet that
    /// completes in `tti` is passed to `on_depart` with its departure set.
    /// Returns the number of bytes actually served.
    pub fn serve(&mut self, bytes: u64, tti: u64, mut on_depart: impl FnMut(&Packet)) -> u64 {
        let mut budget = bytes;
        while budget > 0 {
            let Some(head) = self.queue.front_mut() else {
                break;
            };
            let take = budget.min(head.remaining_bytes as u64);
            head.remaining_bytes -= take as u32;
            budget -= take;
            self.queued_bytes -= take;
            if head.remaining_bytes == 0 {
                let mut done = self.queue.pop_front().expect("head exists");
                done.departure_tti = Some(tti);
                on_depart(&done);
            }
        }
        let served = bytes - budget;
        self.bytes_served_this_tti = served;
        self.cumulative_bits_served += served * 8;
        served
    }
}

/// How the per-flow start offset is chosen at the beginning of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartOffsetPolicy {
    /// Uniform over `[0, interval)`, drawn once per flow per run.
    Random,
    /// Every flow starts at t = 0.
    Zero,
}

impl fmt::Display for StartOffsetPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StartOffsetPolicy::Random => "random",
            StartOffsetPolicy::Zero => "zero",
        })
    }
}

/// Static description of one simulated cell and its traffic.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub num_ues: u32,
    /// Profiles instantiated once per UE.
    pub flows_per_ue: Vec<QfiProfile<T>>,
    /// Seconds.
    pub sim_duration: T,
    /// Seconds.
    pub tti_duration: T,
    /// Bits per second at nominal efficiency.
    pub cell_capacity: T,
    pub num_prbs: u32,
    pub seed: u64,
    pub start_offsets: StartOffsetPolicy,
    pub buffer_capacity: usize,
    pub channel: ChannelVariation,
    /// Seconds.
    pub gbr_window: T,
}

/// One flow instance of a scenario.
#[derive(Debug, Clone, Copy)]
pub struct FlowSlot<'a, T> {
    pub flow_id: FlowId,
    pub ue_id: UeId,
    pub class_index: usize,
    pub profile: &'a QfiProfile<T>,
}

impl<T: Scalar> Scenario<T> {
    pub fn tti_ns(&self) -> u64 {
        nanos_from_secs(self.tti_duration)
    }

    pub fn num_ttis(&self) -> u64 {
        let ratio = self.sim_duration.as_f64() / self.tti_duration.as_f64();
        if ratio.is_finite() && ratio > 0.0 {
            ratio.round() as u64
        } else {
            0
        }
    }

    pub fn num_flows(&self) -> usize {
        self.num_ues as usize * self.flows_per_ue.len()
    }

    /// Bits one PRB carries at nominal efficiency in one TTI.
    pub fn base_bits_per_prb(&self) -> u32 {
        let per_tti = self.cell_capacity.as_f64() * self.tti_duration.as_f64();
        (per_tti / self.num_prbs.max(1) as f64).floor().max(0.0) as u32
    }

    /// Flow ids are `ue * flows_per_ue + class_index`.
    pub fn flows(&self) -> impl Iterator<Item = FlowSlot<'_, T>> + '_ {
        let per_ue = self.flows_per_ue.len();
        (0..self.num_ues).flat_map(move |ue| {
            self.flows_per_ue
                .iter()
                .enumerate()
                .map(move |(k, profile)| FlowSlot {
                    flow_id: (ue as usize * per_ue + k) as FlowId,
                    ue_id: ue,
                    class_index: k,
                    profile,
                })
        })
    }

    /// Replaces the QoS-PF weights of every profile.
    pub fn with_weights(mut self, alpha: T, beta: T, gamma: T) -> Self {
        for p in &mut self.flows_per_ue {
            p.alpha = alpha;
            p.beta = beta;
            p.gamma = gamma;
        }
        self
    }

    pub fn with_num_ues(mut self, num_ues: u32) -> Self {
        self.num_ues = num_ues;
        self
    }
}

/// A single failed scenario invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub reason: String,
}

impl Violation {
    fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

/// Lists every invariant the scenario breaks. An empty list means valid.
pub fn validate_scenario<T: Scalar>(s: &Scenario<T>) -> Vec<Violation> {
    let zero = T::zero();
    let one = T::one();
    let mut out = Vec::new();

    if s.num_ues < 1 {
        out.push(Violation::new("num_ues", "must be at least 1"));
    }
    if !(s.sim_duration > zero) {
        out.push(Violation::new("sim_duration", "must be positive"));
    }
    if !(s.tti_duration > zero) || s.tti_ns() == 0 {
        out.push(Violation::new("tti_duration", "must be positive"));
    }
    if !(s.cell_capacity > zero) {
        out.push(Violation::new("cell_capacity", "must be positive"));
    }
    if s.num_prbs < 1 {
        out.push(Violation::new("num_prbs", "must be at least 1"));
    } else if s.cell_capacity > zero && s.tti_duration > zero && s.base_bits_per_prb() == 0 {
        out.push(Violation::new(
            "cell_capacity",
            "too small to carry one bit per PRB per TTI",
        ));
    }
    if s.buffer_capacity < 1 {
        out.push(Violation::new(
            "buffer_capacity",
            "must be at least 1 packet",
        ));
    }
    if !(s.gbr_window > zero) {
        out.push(Violation::new("gbr_window", "must be positive"));
    }
    out.extend(s.channel.violations());

    let mut roles = std::collections::HashSet::new();
    for p in &s.flows_per_ue {
        let f = |k: &str| format!("flow.{}.{k}", p.role);
        if p.role.is_empty() {
            out.push(Violation::new("flow", "role name must not be empty"));
        }
        if !roles.insert(p.role.as_str()) {
            out.push(Violation::new(f("role"), "duplicate role name"));
        }
        if p.packet_size == 0 {
            out.push(Violation::new(f("packet_size"), "must be positive"));
        }
        match p.arrival {
            ArrivalSpec::Periodic { period } => {
                if !(period > zero) || nanos_from_secs(period) == 0 {
                    out.push(Violation::new(f("period"), "must be positive"));
                }
            }
            ArrivalSpec::Video {
                frame_interval,
                burst_min,
                burst_max,
            } => {
                if !(frame_interval > zero) || nanos_from_secs(frame_interval) == 0 {
                    out.push(Violation::new(f("frame_interval"), "must be positive"));
                }
                if burst_min < 1 {
                    out.push(Violation::new(f("burst_min"), "must be at least 1"));
                }
                if burst_max < burst_min {
                    out.push(Violation::new(f("burst_max"), "must be >= burst_min"));
                }
            }
        }
        if let Some(d) = p.delay_bound {
            if !(d > zero) {
                out.push(Violation::new(
                    f("delay_bound"),
                    "must be positive when set",
                ));
            }
        }
        if let Some(g) = p.gbr {
            if !(g > zero) {
                out.push(Violation::new(f("gbr"), "must be positive when set"));
            }
        }
        if let Some(c) = p.rate_cap {
            if !(c > zero) {
                out.push(Violation::new(f("rate_cap"), "must be positive when set"));
            }
        }
        if p.priority_level < 1 {
            out.push(Violation::new(f("priority_level"), "must be at least 1"));
        }
        if let Some(w) = p.priority_weight {
            if !(w > zero && w <= one) {
                out.push(Violation::new(f("priority_weight"), "must lie in (0, 1]"));
            }
        }
        for (name, w) in [("alpha", p.alpha), ("beta", p.beta), ("gamma", p.gamma)] {
            if !(w >= zero && w <= one) {
                out.push(Violation::new(f(name), "must lie in [0, 1]"));
            }
        }
        if !(p.alpha + p.beta + p.gamma > zero) {
            out.push(Violation::new(
                f("weights"),
                "alpha + beta + gamma must be positive",
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn reference_scenario_is_valid() {
        let s = presets::reference_scenario();
        assert_eq!(s.num_ues, 6);
        assert_eq!(s.flows_per_ue.len(), 3);
        assert!(validate_scenario(&s).is_empty());
    }

    #[test]
    fn zero_ues_is_one_violation() {
        let s = presets::reference_scenario().with_num_ues(0);
        let v = validate_scenario(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "num_ues");
    }

    #[test]
    fn negative_gbr_names_the_flow() {
        let mut s = presets::reference_scenario();
        s.flows_per_ue[1].gbr = Some(-1.0);
        let v = validate_scenario(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "flow.sensor.gbr");
    }

    #[test]
    fn flow_ids_are_unique_and_owned_by_one_ue() {
        let s = presets::reference_scenario();
        let slots: Vec<_> = s.flows().collect();
        assert_eq!(slots.len(), 18);
        let mut ids: Vec<_> = slots.iter().map(|f| f.flow_id).collect();
        ids.dedup();
        assert_eq!(ids.len(), 18);
        for f in &slots {
            assert_eq!(f.flow_id as usize / 3, f.ue_id as usize);
        }
    }

    #[test]
    fn serve_splits_packets_across_ttis() {
        let p = presets::control_profile();
        let mut f = FlowState::new(0, 0, 0, p, 10, 1.0f64);
        f.enqueue([Packet::new(0, 64, 3), Packet::new(0, 64, 3)]);
        let mut departed = Vec::new();
        assert_eq!(f.serve(100, 3, |p| departed.push(p.clone())), 100);
        assert_eq!(departed.len(), 1);
        assert_eq!(f.head_of_line().unwrap().remaining_bytes, 28);
        assert_eq!(f.serve(100, 4, |p| departed.push(p.clone())), 28);
        assert_eq!(departed[1].departure_tti, Some(4));
        assert_eq!(f.queued_bytes(), 0);
        assert_eq!(f.cumulative_bits_served, 128 * 8);
    }

    #[test]
    fn clock_advances_by_one() {
        let mut c = TtiClock::new(1_000_000);
        c.advance();
        c.advance();
        assert_eq!(c.index(), 2);
        assert_eq!(c.duration::<f64>(), 0.001);
    }
}
