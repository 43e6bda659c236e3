//! Throughput comparison between the rayon data-parallel path and the
//! sequential path.
//!
//! Built with the default `parallel` feature, every group benches the same
//! workload inside a 1-thread pool versus the default pool; built with
//! `--no-default-features` the pure sequential code path runs instead.
//! Results are bit-identical across all three modes by construction.

use bcgnn_core::config::RunConfig;
use bcgnn_core::data::{synth_dataset, SynthSpec};
use bcgnn_core::model::{Ablation, BcGnn, ModelDims};
use bcgnn_core::par::with_jobs;
use bcgnn_core::pipeline::infer_video;
use bcgnn_core::tensor::{Tape, Tensor};
use bcgnn_core::training::{assign_labels, total_loss};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn modes() -> Vec<(&'static str, Option<usize>)> {
    #[cfg(feature = "parallel")]
    {
        vec![("1_thread", Some(1)), ("default_pool", None)]
    }
    #[cfg(not(feature = "parallel"))]
    {
        vec![("sequential", None)]
    }
}

fn random_tensor(shape: Vec<usize>, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn bench_matmul(c: &mut Criterion) {
    let a = random_tensor(vec![192, 256], 1);
    let b = random_tensor(vec![256, 192], 2);
    let mut group = c.benchmark_group("matmul_192x256x192");
    for (label, jobs) in modes() {
        group.bench_function(label, |bencher| {
            bencher.iter(|| {
                with_jobs(jobs, || {
                    let mut tape = Tape::new();
                    let av = tape.constant(&a);
                    let bv = tape.constant(&b);
                    let out = tape.matmul(av, bv).unwrap();
                    tape.value(out)[0]
                })
            })
        });
    }
    group.finish();
}

fn bench_conv1d(c: &mut Criterion) {
    let x = random_tensor(vec![32, 512], 3);
    let w = random_tensor(vec![32, 32, 3], 4);
    let bias = random_tensor(vec![32], 5);
    let mut group = c.benchmark_group("conv1d_32ch_512len");
    for (label, jobs) in modes() {
        group.bench_function(label, |bencher| {
            bencher.iter(|| {
                with_jobs(jobs, || {
                    let mut tape = Tape::new();
                    let xv = tape.constant(&x);
                    let wv = tape.constant(&w);
                    let bv = tape.constant(&bias);
                    let out = tape.conv1d_same(xv, wv, bv).unwrap();
                    tape.value(out)[0]
                })
            })
        });
    }
    group.finish();
}

fn anet_scale_model() -> (BcGnn, bcgnn_core::tensor::ParamStore, Tensor) {
    let dims = ModelDims {
        d_i: 16,
        d_b: 32,
        d_g: 32,
        d_c: 32,
        l_w: 100,
        d_max: 99,
        n_content: 16,
    };
    let model = BcGnn::new(dims.clone(), Ablation::default());
    let store = model.init_params(6);
    let features = random_tensor(vec![dims.d_i, dims.l_w], 7);
    (model, store, features)
}

fn bench_window_forward(c: &mut Criterion) {
    let (model, store, features) = anet_scale_model();
    let mut group = c.benchmark_group("window_forward_lw100");
    group.sample_size(10);
    for (label, jobs) in modes() {
        group.bench_function(label, |bencher| {
            bencher.iter(|| {
                with_jobs(jobs, || {
                    let mut tape = Tape::new();
                    let scores = model.forward(&mut tape, &store, &features).unwrap();
                    tape.value(scores.p_content)[0]
                })
            })
        });
    }
    group.finish();
}

fn bench_train_step(c: &mut Criterion) {
    let (model, store, features) = anet_scale_model();
    let labels = assign_labels(
        &[bcgnn_core::data::GroundTruthInstance::new(20.0, 55.0)],
        model.dims.l_w,
        model.pairs(),
    );
    let mut group = c.benchmark_group("train_step_lw100");
    group.sample_size(10);
    for (label, jobs) in modes() {
        group.bench_function(label, |bencher| {
            bencher.iter(|| {
                with_jobs(jobs, || {
                    let mut store = store.clone();
                    let mut tape = Tape::new();
                    let scores = model.forward(&mut tape, &store, &features).unwrap();
                    let loss = total_loss(&mut tape, &scores, &labels).unwrap();
                    tape.backward(loss, &mut store).unwrap();
                    store.get("out.theta_so").unwrap().grad.as_ref().unwrap()[0]
                })
            })
        });
    }
    group.finish();
}

fn bench_infer_videos(c: &mut Criterion) {
    let cfg = RunConfig {
        d_i: 8,
        d_b: 16,
        d_g: 16,
        d_c: 16,
        n_content: 8,
        l_w: 32,
        ..RunConfig::default()
    };
    let model = BcGnn::new(cfg.model_dims(), cfg.ablation());
    let store = model.init_params(9);
    let data = synth_dataset(&SynthSpec {
        n_videos: 4,
        l_s: 128,
        d_i: 8,
        ..SynthSpec::default()
    })
    .unwrap();
    let mut group = c.benchmark_group("infer_4_videos");
    group.sample_size(10);
    for (label, jobs) in modes() {
        group.bench_function(label, |bencher| {
            bencher.iter(|| {
                with_jobs(jobs, || {
                    data.iter()
                        .map(|(seq, _)| infer_video(&model, &store, &cfg, seq).unwrap().len())
                        .sum::<usize>()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_matmul,
    bench_conv1d,
    bench_window_forward,
    bench_train_step,
    bench_infer_videos
);
criterion_main!(benches);
