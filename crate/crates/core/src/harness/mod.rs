//! Scenarios, comparison studies, configuration and the run pipeline.

mod compare;
mod config;
mod harmonic;
mod pipeline;
mod scenarios;

pub use compare::{compare_against, compare_glhf_hhf, trace_l2_distance, ComparisonReport};
pub use config::{parse_anchors, parse_config, AnchorSpec, RunConfig, StepChoice};
pub use harmonic::{harmonic_extension, HarmonicExtension, HarmonicOptions};
pub use pipeline::{
    diagnose_command, diagnose_records, execute, exit_code, load_trace, run_command,
    sha256_hex, sweep_command, write_records, Manifest, RunStatus,
};
pub use scenarios::{
    equator_origin_node, great_circle_phase, make_cap_map, make_equator_map, make_great_circle,
    make_smoothed_equator, ScenarioKind,
};
