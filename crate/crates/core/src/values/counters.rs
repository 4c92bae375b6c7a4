use serde::{Deserialize, Serialize};

/// Exact event counters for the overhead sources of a dynamic interpreter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuntimeCounters {
    /// Generic dynamic-type resolutions (tier-0 operators and tier-1 misses).
    pub dyn_dispatches: u64,
    pub box_allocs: u64,
    /// Reference-count increments plus decrements.
    pub rc_ops: u64,
    pub guard_misses: u64,
    pub quicken_rewrites: u64,
    pub deopt_events: u64,
}

impl RuntimeCounters {
    /// Component-wise `self - earlier`.
    pub fn delta(&self, earlier: &RuntimeCounters) -> RuntimeCounters {
        RuntimeCounters {
            dyn_dispatches: self.dyn_dispatches - earlier.dyn_dispatches,
            box_allocs: self.box_allocs - earlier.box_allocs,
            rc_ops: self.rc_ops - earlier.rc_ops,
            guard_misses: self.guard_misses - earlier.guard_misses,
            quicken_rewrites: self.quicken_rewrites - earlier.quicken_rewrites,
            deopt_events: self.deopt_events - earlier.deopt_events,
        }
    }
}
