//! Scenario runner: TOML configuration, experiment orchestration, CSV/JSON
//! artifacts and plot-ready data.

mod config;
mod report;
mod run;

pub use config::{DensitySpec, DomainSpec, ExperimentKind, Overrides, ProbeSpec, ScenarioConfig, SweepSpec, K_SCAN_MAX};
pub use report::{export_report, plot_text, Manifest, ManifestEntry, PLOT_DIR};
pub use run::{describe_fits, read_bundle_files, run_scenario, Bundle, PlotData, COLLAR_WIDTH};
