//! Throughput of the training-loop hot paths on line-sized inputs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use bocr::blstm::{blstm_backward, blstm_forward};
use bocr::ctc::{beam_decode, ctc_loss, greedy_decode, LabelSeq};

use bocr_bench::{desk_model, full_size_model, random_features, random_logits};

fn bench_blstm(c: &mut Criterion) {
    let mut group = c.benchmark_group("blstm");
    for (name, model) in [("desk_32u", desk_model()), ("full_128u", full_size_model())] {
        let features = random_features(256, 11);
        group.bench_function(BenchmarkId::new("forward_256f", name), |b| {
            b.iter(|| blstm_forward(black_box(&model), black_box(&features)).unwrap())
        });
        let (logits, tape) = blstm_forward(&model, &features).unwrap();
        let grad: Vec<Vec<f64>> = logits.iter().map(|f| vec![0.1; f.len()]).collect();
        group.bench_function(BenchmarkId::new("backward_256f", name), |b| {
            b.iter(|| blstm_backward(black_box(&model), black_box(&tape), black_box(&grad)).unwrap())
        });
    }
    group.finish();
}

fn bench_ctc(c: &mut Criterion) {
    let mut group = c.benchmark_group("ctc");
    let logits = random_logits(256, 166, 3);
    let target = LabelSeq((0..24).map(|i| i % 160).collect());
    group.bench_function("loss_256f_166c", |b| {
        b.iter(|| ctc_loss(black_box(&logits), black_box(&target), 165).unwrap())
    });
    group.bench_function("greedy_256f_166c", |b| {
        b.iter(|| greedy_decode(black_box(&logits), 165))
    });
    group.bench_function("beam10_256f_166c", |b| {
        b.iter(|| beam_decode(black_box(&logits), 165, 10).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_blstm, bench_ctc);
criterion_main!(benches);
