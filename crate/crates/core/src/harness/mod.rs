//! Closed-loop simulation, Monte-Carlo envelopes, controller comparison and export.

mod compare;
mod config;
mod episode;
mod export;
mod monte_carlo;

pub use compare::{compare_controllers, ComparisonReport, ControllerOutcome, Failure, SeedOutcome};
pub use config::{AffineConfig, Controller, ModelConfig, Nominal, RunConfig, Scenario};
pub use episode::{
    run_episode, run_scenario, DisturbanceSource, LogHeader, Phase, ReplayDisturbance, RngDisturbance,
    StepRecord, TrajectoryLog, RNG_ALGORITHM, SAFETY_TOL,
};
pub use export::{csv_header, export, render_svg, svg_panels, write_csv, write_json, write_svg, Format};
pub use monte_carlo::{
    derive_seeds, envelope, estimation_report, estimation_summary, run_monte_carlo, run_seeds, Envelope,
    EnvelopeReport, EstimationReport, EstimationSummary,
};
