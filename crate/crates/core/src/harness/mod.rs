//! Scenario files, ε-sweeps and the files they produce.

mod output;
mod scenario;
mod sweep;
mod tables;

pub use output::{
    config_hash, fits_csv, history_csv, manifest_json, scaling_csv, scenario_from_text, sweep_csv, write_outputs,
    VERSION,
};
pub use scenario::{validate_scenario, DiagnosticsToggles, GridSpec, InitialDatum, Scenario};
pub use sweep::{
    quantity, run_sweep, BoundaryNote, Coverage, EpsilonOutcome, EpsilonResult, InequalityCheck, NamedFit, ReferenceInfo,
    SweepResult, BOUNDARY_SHARE_TOL, FITTED_QUANTITIES, TV_INCREASE_TOL, TV_TRANSFER_GAP_TOL,
};
pub use tables::{inspect_kernel, riemann_table, DEFAULT_RIEMANN_PAIRS};
