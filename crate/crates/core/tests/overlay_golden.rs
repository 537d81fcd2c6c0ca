//! Pinned overlay rendering for a lesioned slice: the stenosis-20 preset at
//! slice 97. The PPM bytes are content-hashed rather than stored; any change
//! to phantom geometry, classification, or rendering shows up here.

use arteria::config::PipelineConfig;
use arteria::phantom;
use arteria::pipeline::{run_pipeline, sha256_hex};
use arteria::render::{ppm_bytes, render_overlay};

const OVERLAY_97_SHA256: &str = "92ada4ea08a2b9114b5180c672decc08d7479d4e0f88c73a7d945bb7e5ceadf8";

#[test]
fn stenosis20_slice97_overlay_bytes_are_pinned() {
    let (volume, _) = phantom::generate(&phantom::stenosis_20()).unwrap();
    let config = PipelineConfig::default();
    let out = run_pipeline(&volume, &config).unwrap();

    let mut lumen = Vec::new();
    let mut calc = Vec::new();
    for p in &out.partitions {
        if p.slice_index == 97 {
            lumen.extend_from_slice(&p.lumen);
            calc.extend_from_slice(&p.calc);
        }
    }
    // The wedge covers roughly 20% of the radius-18 aortic disk.
    assert!((150..280).contains(&calc.len()), "calc px {}", calc.len());

    let img = render_overlay(
        volume.slice(97),
        volume.width(),
        volume.height(),
        &lumen,
        &calc,
        (config.render_lo, config.render_hi),
    )
    .unwrap();
    assert_eq!(sha256_hex(&ppm_bytes(&img)), OVERLAY_97_SHA256);
}
