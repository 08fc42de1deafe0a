use super::{allocate_in_order, Allocation, Scheduler, SchedulerInput, SchedulerKind};
use crate::scalar::Scalar;

/// Serves flows in order of their UE's bits per PRB, best channel first.
/// Ties go to the lower flow id. No QoS input.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaxCi;

impl<T: Scalar> Scheduler<T> for MaxCi {
    fn kind(&self) -> SchedulerKind {
        SchedulerKind::MaxCi
    }

    fn schedule(&mut self, input: &SchedulerInput<'_, T>) -> Allocation {
        let mut order: Vec<(usize, u32)> = input
            .flows
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_backlogged())
            .map(|(i, f)| {
                (
                    i,
                    input.grid.bits_per_prb(f.ue_id).expect("flow UE in grid"),
                )
            })
            .collect();
        order.sort_by(|a, b| {
            b.1.cmp(&a.1)
                .then(input.flows[a.0].flow_id.cmp(&input.flows[b.0].flow_id))
        });
        let order: Vec<_> = order.into_iter().map(|(i, b)| (i, b as f64)).collect();
        allocate_in_order(input, &order)
    }
}
