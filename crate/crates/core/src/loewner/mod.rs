//! Forward and reversed chordal Loewner flows, slit-map chains and traces.

mod bounds;
mod flow;
mod slit;
mod swallow;
mod trace;

pub use bounds::{map_compare_bound, map_compare_bound_exp, INTERVAL_CONSTANT};
pub use flow::{forward_flow, FlowOptions, FlowResult};
pub use slit::{eval_chain, SlitElement, SlitKind, SlitMapChain};
pub(crate) use slit::build_elements;
pub use swallow::{
    reverse_hit_time, reverse_swallow_time, swallowed_interval, SwallowReport,
};
pub use trace::{
    compute_trace, compute_trace_with, hull_bounds_check, restarted_trace, HullCheck, Trace,
    TraceMeta, TraceOptions,
};

/// Points of the closed upper half-plane.
pub type ComplexPoint<T> = num_complex::Complex<T>;
