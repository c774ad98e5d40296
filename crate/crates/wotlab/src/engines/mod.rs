//! Self-contained optimization primitives: dense simplex LP with Farkas
//! certificates, a transport linear-minimization oracle, Frank-Wolfe drivers,
//! and generic concave ascent. Everything is deterministic under fixed seeds
//! and holds no global state.

pub mod ascent;
pub mod frank_wolfe;
mod linalg;
pub mod simplex;
pub mod transport;

pub use ascent::{concave_ascent, fixed_point_ascent, AscentOptions, StepRule};
pub use frank_wolfe::{frank_wolfe, minimize_over_simplex, FwOptions, FwResult, LineSearch};
pub use simplex::{
    farkas_certificate, simplex_solve, simplex_solve_with, verify_farkas, Constraint,
    LinearProgram, LpSolution, LpStatus, Sense, SimplexOptions, VarBounds,
};
pub use transport::{
    cost_matrix, distance_cost, squared_distance_cost, transport_lmo, transport_lmo_detailed,
    wasserstein_1, StartVertex, TransportPlan,
};


pub(crate) use linalg::solve_kkt_ridge;
