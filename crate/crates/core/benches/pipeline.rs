//! Sequential vs. parallel throughput of the per-slice stages, plus the
//! full pipeline. Run with `cargo bench`; with `--no-default-features`
//! the parallel entries degrade to the sequential path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use arteria::config::PipelineConfig;
use arteria::exec::ExecMode;
use arteria::phantom::{self, PhantomSpec};
use arteria::pipeline::{classify_tree_with, run_pipeline};
use arteria::track::{stage_one_with, track_volume_with};
use arteria::volume::Volume;

/// A scaled-down branching phantom that still exercises every stage:
/// the full 1 -> 2 -> 4 structure compressed into 64 slices, with a
/// calcified wedge and mild noise.
fn bench_spec() -> PhantomSpec {
    let mut spec = phantom::stenosis_20();
    spec.depth = 64;
    for seg in &mut spec.segments {
        let (start, end) = match seg.id {
            0 => (0, 31),
            1 | 2 => (32, 43),
            _ => (44, 63),
        };
        seg.slice_start = start;
        seg.slice_end = end;
    }
    spec.lesions[0].slice_start = 20;
    spec.lesions[0].slice_end = 24;
    spec.noise_sigma = 30.0;
    spec
}

fn bench_volume() -> Volume {
    phantom::generate_with(&bench_spec(), ExecMode::Sequential)
        .expect("valid spec")
        .0
}

fn modes() -> [(&'static str, ExecMode); 2] {
    [
        ("seq", ExecMode::Sequential),
        ("par", ExecMode::Parallel),
    ]
}

fn phantom_generation(c: &mut Criterion) {
    let spec = bench_spec();
    let mut group = c.benchmark_group("phantom_generate");
    for (label, mode) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(label), &mode, |b, &mode| {
            b.iter(|| phantom::generate_with(&spec, mode).unwrap());
        });
    }
    group.finish();
}

fn stage_one(c: &mut Criterion) {
    let volume = bench_volume();
    let mut group = c.benchmark_group("stage_one");
    for (label, mode) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(label), &mode, |b, &mode| {
            b.iter(|| stage_one_with(&volume, (600, 4000), mode).unwrap());
        });
    }
    group.finish();
}

fn classification(c: &mut Criterion) {
    let volume = bench_volume();
    let config = PipelineConfig::default();
    let tree = track_volume_with(&volume, &config.track_params(), ExecMode::Sequential).unwrap();
    let mut group = c.benchmark_group("classify_tree");
    for (label, mode) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(label), &mode, |b, &mode| {
            b.iter(|| classify_tree_with(&volume, &tree, &config, mode));
        });
    }
    group.finish();
}

fn full_pipeline(c: &mut Criterion) {
    let volume = bench_volume();
    let config = PipelineConfig::default();
    c.bench_function("run_pipeline", |b| {
        b.iter(|| run_pipeline(&volume, &config).unwrap());
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = phantom_generation, stage_one, classification, full_pipeline
}
criterion_main!(benches);
