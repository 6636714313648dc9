//! On-disk formats: clip records, track dumps, run configuration, images and
//! metrics.

mod config;
mod record;
mod render;

pub use config::{load_config, parse_config, RunConfig, CONFIG_KEYS};
pub use record::{
    clip_file_name, clip_record_from_str, clip_record_to_string, read_clip_dir, read_clip_record, read_track_dump,
    track_dump_from_str, track_dump_to_string, write_clip_record, write_track_dump, ClipGroundTruth, ClipRecord,
};
pub use render::{
    metrics_csv, palette_color, render_frame, render_rgb, render_trajectories, track_trajectories,
    write_metrics_csv, Metrics, MetricsRow, Trajectory, METRICS_HEADER, PALETTE,
};
