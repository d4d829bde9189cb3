//! Experiment orchestration: configs, seeded simulation, grids and replay.

mod config;
mod experiment;
mod grid;
mod offline;

pub use config::{ExperimentConfig, GridRow, HyperConfig, PolicySpec, SCHEMA_VERSION};
pub use experiment::{
    run_cell, run_experiment, simulate, simulate_env, CellOutcome, ReplicationRecord,
    ResolvedPolicy, RunManifest, SimulationOutput,
};
pub use grid::{grid_summary, run_table_grid, GridSummaryRow};
pub use offline::{
    click_probability, generate_event_log, replay_policies, run_gen_log, run_replay, CLICK_NOISE_SD,
};
