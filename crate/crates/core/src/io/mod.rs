//! Trajectory bundles on disk, deterministic tracking runs and their CSV/JSON
//! reports.

mod array;
mod bundle;
mod run;

pub use array::{Array2, DTYPE_F32, FORMAT_VERSION, MAGIC};
pub use bundle::{
    read_bundle, read_manifest, write_bundle, CameraFrame, CameraTrack, GroundTruthTable, Manifest, TrajectoryBundle,
    MANIFEST_FILE,
};
pub use run::{
    records_from_csv, records_to_csv, run_tracking, simulate, FilterKind, KeypointSummary, Report, RunConfig,
    TrackingOutput,
};
