//! Batch analysis of vessel trees in transverse grayscale slice stacks.
//!
//! The pipeline loads a 16-bit volume, binarizes each slice by an intensity
//! window, keeps only ovalar clusters, tracks the descending aorta and its
//! branches slice-to-slice by pixel overlap, splits each tracked
//! cross-section into lumen vs. calcification, and emits overlay images, a
//! per-slice metrics CSV, a stenosis profile, and an Agatston-style
//! calcification score.
//!
//! Verification rests on a deterministic synthetic phantom ([`phantom`])
//! whose per-voxel labels and per-slice vessel counts are known by
//! construction.
//!
//! Per-slice stages run on rayon when the `parallel` feature (default) is
//! enabled and fall back to plain iterators otherwise; either way the
//! outputs are bit-identical.

pub mod classify;
pub mod config;
pub mod error;
pub mod eval;
pub mod exec;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod render;
pub mod rng;
pub mod segment;
pub mod track;
pub mod volume;

pub use classify::{classify_component, otsu_threshold, ClassifyMode, ClassifyParams, Partition};
pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use eval::{compare_counts, AgreementReport};
pub use exec::ExecMode;
pub use metrics::{
    agatston_score, calcification_intensity_profile, compute_slice_metrics, AgatstonParams,
    SliceMetrics, StenosisProfile,
};
pub use phantom::{generate as generate_phantom, GroundTruth, PhantomSpec};
pub use pipeline::{run_pipeline, run_track, RunManifest};
pub use render::{plot_profile_svg, render_overlay, write_ppm, RgbImage};
pub use segment::{
    label_components, passes_ovalar, shape_metrics, threshold_slice, BinaryMask, Component,
    OvalCriteria, ShapeMetrics,
};
pub use track::{
    propagate_slice, seed_arteries, track_volume, TrackNode, TrackParams, VesselTree,
};
pub use volume::{load_pgm_stack, load_raw_volume, write_raw_volume, Rescale, Volume};
