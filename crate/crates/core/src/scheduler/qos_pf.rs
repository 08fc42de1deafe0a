//! QoS-aware proportional fair scheduling.
//!
//! Each backlogged flow is ranked by
//!
//! ```text
//! M = U / max(R_avg, floor)      U = alpha * D + beta * G + gamma * P
//! ```
//!
//! where `R_avg` is the flow's EMA throughput, `D` the delay urgency of its
//! head-of-line packet, `G` its GBR deficit and `P` its priority scalar. All
//! three terms are normalized to `[0, 1]` so the weights compare directly.

use super::{allocate_in_order, Allocation, Scheduler, SchedulerInput, SchedulerKind};
use crate::model::{FlowState, QfiProfile, TtiClock, Violation};
use crate::scalar::Scalar;

/// Maps a priority level to a scalar in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorityNormalizer {
    /// `1 / level`.
    Reciprocal,
    /// `(levels + 1 - level) / levels`, clamped to the lowest step.
    Linear { levels: u32 },
}

impl PriorityNormalizer {
    pub fn apply<T: Scalar>(self, level: i32) -> Option<T> {
        if level < 1 {
            return None;
        }
        Some(match self {
            PriorityNormalizer::Reciprocal => T::one() / T::from_count(level as u64),
            PriorityNormalizer::Linear { levels } => {
                let levels = levels.max(1) as u64;
                let rank = (level as u64).min(levels);
                T::from_count(levels + 1 - rank) / T::from_count(levels)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QosPfParams<T> {
    /// EMA window `T_c`, in TTIs.
    pub ema_window_ttis: u32,
    /// Largest value of `bound / remaining` before normalization.
    pub d_max_cap: T,
    /// Smallest remaining time used in `bound / remaining`, seconds.
    pub epsilon_time: T,
    pub priority_normalizer: PriorityNormalizer,
    /// Lower bound on EMA throughput, bits per second.
    pub throughput_floor: T,
}

impl<T: Scalar> Default for QosPfParams<T> {
    fn default() -> Self {
        Self {
            ema_window_ttis: 100,
            d_max_cap: T::from_count(10),
            epsilon_time: T::ratio(1, 10_000),
            priority_normalizer: PriorityNormalizer::Reciprocal,
            throughput_floor: T::one(),
        }
    }
}

impl<T: Scalar> QosPfParams<T> {
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |field: &str, reason: &str| {
            out.push(Violation {
                field: format!("scheduler.{field}"),
                reason: reason.into(),
            })
        };
        if self.ema_window_ttis < 1 {
            bad("ema_window_ttis", "must be at least 1");
        }
        if !(self.d_max_cap >= T::one()) {
            bad("d_max_cap", "must be at least 1");
        }
        if !(self.epsilon_time > T::zero()) {
            bad("epsilon_time", "must be positive");
        }
        if !(self.throughput_floor > T::zero()) {
            bad("throughput_floor", "must be positive");
        }
        if let PriorityNormalizer::Linear { levels: 0 } = self.priority_normalizer {
            bad(
                "priority_normalizer",
                "linear normalizer needs at least one level",
            );
        }
        out
    }
}

/// Delay urgency for a head-of-line packet that has waited `wait` seconds
/// against a bound of `bound` seconds.
pub fn urgency_from_wait<T: Scalar>(wait: T, bound: T, p: &QosPfParams<T>) -> T {
    let remaining = (bound - wait).max_of(p.epsilon_time);
    (bound / remaining).min_of(p.d_max_cap) / p.d_max_cap
}

/// `D` in `[0, 1]`. Zero without a delay bound or without a queued packet.
pub fn delay_urgency<T: Scalar>(flow: &FlowState<T>, clock: &TtiClock, p: &QosPfParams<T>) -> T {
    match (flow.profile.delay_bound, flow.head_of_line()) {
        (Some(bound), Some(hol)) => {
            let waited = clock.index().saturating_sub(hol.arrival_tti);
            let wait = T::from_count(waited) * clock.duration::<T>();
            urgency_from_wait(wait, bound, p)
        }
        _ => T::zero(),
    }
}

/// `G = max(0, 1 - R_avg / gbr)` for GBR flows, zero otherwise.
pub fn gbr_deficit<T: Scalar>(flow: &FlowState<T>) -> T {
    match flow.profile.gbr {
        Some(gbr) => (T::one() - flow.avg_throughput / gbr).max_of(T::zero()),
        None => T::zero(),
    }
}

/// `P` from the explicit per-flow weight if set, else from the level.
/// `None` for levels below 1.
pub fn priority_weight<T: Scalar>(
    profile: &QfiProfile<T>,
    normalizer: PriorityNormalizer,
) -> Option<T> {
    match profile.priority_weight {
        Some(w) => Some(w),
        None => normalizer.apply(profile.priority_level),
    }
}

/// `U = alpha * D + beta * G + gamma * P`. An invalid priority level
/// contributes nothing; scenario validation rejects such configs up front.
pub fn utility<T: Scalar>(flow: &FlowState<T>, clock: &TtiClock, p: &QosPfParams<T>) -> T {
    let prof = &flow.profile;
    let d = delay_urgency(flow, clock, p);
    let g = gbr_deficit(flow);
    let pw = priority_weight(prof, p.priority_normalizer).unwrap_or_else(T::zero);
    prof.alpha * d + prof.beta * g + prof.gamma * pw
}

/// `M = U / max(R_avg, floor)`.
pub fn pf_metric<T: Scalar>(flow: &FlowState<T>, clock: &TtiClock, p: &QosPfParams<T>) -> T {
    utility(flow, clock, p) / flow.avg_throughput.max_of(p.throughput_floor)
}

/// One EMA step with `served_bits` delivered in a TTI of `tti_duration`
/// seconds, floored at `throughput_floor`.
pub fn update_ema<T: Scalar>(avg: T, served_bits: u64, tti_duration: T, p: &QosPfParams<T>) -> T {
    let w = T::one() / T::from_count(p.ema_window_ttis.max(1) as u64);
    let instant = T::from_count(served_bits) / tti_duration;
    ((T::one() - w) * avg + w * instant).max_of(p.throughput_floor)
}

#[derive(Debug, Clone)]
pub struct QosPf<T> {
    params: QosPfParams<T>,
}

impl<T: Scalar> QosPf<T> {
    pub fn new(params: QosPfParams<T>) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &QosPfParams<T> {
        &self.params
    }

    /// Backlogged flows in service order with their metric.
    pub fn rank(&self, input: &SchedulerInput<'_, T>) -> Vec<(usize, T)> {
        let mut scored: Vec<(usize, T)> = input
            .flows
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_backlogged())
            .map(|(i, f)| (i, pf_metric(f, &input.clock, &self.params)))
            .collect();
        scored.sort_by(|a, b| {
            let (fa, fb) = (&input.flows[a.0], &input.flows[b.0]);
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(fa.profile.priority_level.cmp(&fb.profile.priority_level))
                .then(fa.flow_id.cmp(&fb.flow_id))
        });
        scored
    }
}

impl<T: Scalar> Scheduler<T> for QosPf<T> {
    fn kind(&self) -> SchedulerKind {
        SchedulerKind::QosPf
    }

    fn schedule(&mut self, input: &SchedulerInput<'_, T>) -> Allocation {
        let order: Vec<_> = self
            .rank(input)
            .into_iter()
            .map(|(i, m)| (i, m.as_f64()))
            .collect();
        allocate_in_order(input, &order)
    }
}
