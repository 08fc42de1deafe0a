use super::{allocate_in_order, Allocation, Scheduler, SchedulerInput, SchedulerKind};
use crate::scalar::Scalar;

/// Strict priority on `priority_level` (lower first). Flows on the same
/// level rotate: the one served least recently goes first.
#[derive(Debug, Clone, Default)]
pub struct StaticPriority {
    /// Service stamp per flow id; 0 means never served.
    last_served: Vec<u64>,
    stamp: u64,
}

impl StaticPriority {
    fn last(&self, flow: u32) -> u64 {
        self.last_served.get(flow as usize).copied().unwrap_or(0)
    }
}

impl<T: Scalar> Scheduler<T> for StaticPriority {
    fn kind(&self) -> SchedulerKind {
        SchedulerKind::StaticPriority
    }

    fn schedule(&mut self, input: &SchedulerInput<'_, T>) -> Allocation {
        let mut order: Vec<usize> = input
            .flows
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_backlogged())
            .map(|(i, _)| i)
            .collect();
        order.sort_by_key(|&i| {
            let f = &input.flows[i];
            (f.profile.priority_level, self.last(f.flow_id), f.flow_id)
        });
        let order: Vec<_> = order
            .into_iter()
            .map(|i| (i, input.flows[i].profile.priority_level as f64))
            .collect();
        let alloc = allocate_in_order(input, &order);
        for g in &alloc.grants {
            let id = g.flow_id as usize;
            if self.last_served.len() <= id {
                self.last_served.resize(id + 1, 0);
            }
            self.stamp += 1;
            self.last_served[id] = self.stamp;
        }
        alloc
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use crate::model::{FlowState, TtiClock};
    use crate::presets;

    fn run(
        sched: &mut StaticPriority,
        flows: &[FlowState<f64>],
        prbs: u32,
        tti: u64,
    ) -> Allocation {
        let g = grid(prbs, &[800, 800, 800]);
        let input = SchedulerInput {
            clock: TtiClock::at(tti, 1_000_000),
            flows,
            grid: &g,
        };
        Scheduler::<f64>::schedule(sched, &input)
    }

    #[test]
    fn control_beats_video() {
        let flows = [
            flow(0, 0, presets::video_profile(), &[(100, 0)], 1.0),
            flow(1, 1, presets::control_profile(), &[(100, 0)], 1.0),
        ];
        let a = run(&mut StaticPriority::default(), &flows, 1, 0);
        assert_eq!(a.grants.len(), 1);
        assert_eq!(a.grants[0].flow_id, 1);
    }

    #[test]
    fn overload_starves_lowest_priority() {
        let mut sp = StaticPriority::default();
        let control = flow(0, 0, presets::control_profile(), &[(100, 0); 400], 1.0);
        let video = flow(1, 1, presets::video_profile(), &[(1000, 0); 10], 1.0);
        let flows = [control, video];
        for tti in 0..100 {
            let a = run(&mut sp, &flows, 1, tti);
            assert!(a.grant_for(1).is_none());
        }
    }

    #[test]
    fn equal_priority_alternates_like_round_robin() {
        let mut sp = StaticPriority::default();
        let flows = [
            flow(0, 0, presets::video_profile(), &[(100, 0)], 1.0),
            flow(1, 1, presets::video_profile(), &[(100, 0)], 1.0),
        ];
        // Oracle: a plain two-slot rotation starting at the lower id.
        let mut rr = std::collections::VecDeque::from([0u32, 1]);
        for tti in 0..20 {
            let a = run(&mut sp, &flows, 1, tti);
            let expect = rr.pop_front().unwrap();
            rr.push_back(expect);
            assert_eq!(a.grants.len(), 1);
            assert_eq!(a.grants[0].flow_id, expect, "tti {tti}");
        }
    }
}
