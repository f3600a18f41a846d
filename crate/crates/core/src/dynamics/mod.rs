//! Exact oracles: the linear moment flow with its Lyapunov steady state, the
//! Lindblad master equation in a truncated spin ⊗ Fock space, and numeric QFIMs
//! from finite differences of exact steady states.

mod density;
mod liouvillian;
mod moment;
mod qfim;
mod space;
mod steady;

pub use density::{
    expectations, quadratures, read_density, write_density, write_moments, DensityMatrix, MomentRecord,
    DEFAULT_TAIL_GUARD,
};
pub use liouvillian::{build_liouvillian, Liouvillian, MemoryBudget, Model};
pub use moment::{
    hurwitz_critical_coupling, lyapunov, max_real_eigenvalue, moment_flow, moment_flow_model, steady_moments,
    MomentFlow,
};
pub use qfim::{numeric_qfim_exact, spectral_slds, NumericQfimOptions};
pub use space::{Factor, FactorKind, HilbertSpace, LocalOp, SparseOp};
pub use steady::{
    resolve_method, solve_converged, steady_state, steady_state_with, HarnessOptions, SteadyMethod, SteadyOptions,
    SteadyReport,
};
