//! File formats and campaign orchestration.

pub mod campaign;
pub mod manifest;
pub mod scene;
pub mod sweepfile;

pub use campaign::{
    fit_records, ingest_sweeps, records_from_csv, records_to_csv, run_campaign, CampaignOutput, FitReport,
    FitSummary, FitValues,
};
pub use manifest::{Analysis, DatasetManifest, LinkEntry, RunConfig};
pub use scene::{load_scene, parse_scene, SceneSpec};
pub use sweepfile::{read_calibration, read_sweep, write_calibration, write_sweep};
