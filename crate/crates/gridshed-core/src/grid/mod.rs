//! Static grid model: network types, admittance construction, power flow,
//! and graph operators.

mod admittance;
mod network;
mod power_flow;
mod shift;

pub use admittance::{build_admittance, kron_reduce};
pub use network::{Bus, BusKind, Generator, Line, Load, Network};
pub use power_flow::{
    residual_infnorm, solve_power_flow, PowerFlowSolution, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
pub use shift::{graph_shift_operator, highest_degree_bus, ShiftKind};
