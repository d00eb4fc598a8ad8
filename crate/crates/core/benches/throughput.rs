//! Throughput of the pipeline's hot loops on the sequential and
//! data-parallel execution paths. The `*_seq` benches always run; the
//! `*_par` benches exist only with the `parallel` feature (the default)
//! and go through rayon. The model bench measures whichever path the
//! build routes to, matching what `train` and `infer` actually do.

use apnea_core::exec;
use apnea_core::nn::{Model, ModelSpec, ModelVariant, Phase, Tensor3};
use apnea_core::signal::{butterworth_bandpass, BandpassSpec, ChannelKind, SignalChannel};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Pointwise-conv-shaped row fill: 32 instances x 16 output channels over
/// 180 s of latent, each output row a weighted sum of 16 input rows.
fn channel_mix(c: &mut Criterion) {
    let (n_batch, ch, t) = (32, 16, 180);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_vec(&mut rng, n_batch * ch * t);
    let w = random_vec(&mut rng, ch * ch);
    let mut out = vec![0.0; n_batch * ch * t];

    let fill = |i: usize, row: &mut [f64]| {
        let (n, o) = (i / ch, i % ch);
        row.fill(0.0);
        for ci in 0..ch {
            let wv = w[o * ch + ci];
            let src = &x[(n * ch + ci) * t..(n * ch + ci + 1) * t];
            for (r, &v) in row.iter_mut().zip(src) {
                *r += wv * v;
            }
        }
    };

    let mut g = c.benchmark_group("channel_mix");
    g.bench_function("seq", |b| {
        b.iter(|| exec::for_each_row_mut_seq(black_box(&mut out), t, fill))
    });
    #[cfg(feature = "parallel")]
    g.bench_function("par", |b| {
        b.iter(|| exec::for_each_row_mut_par(black_box(&mut out), t, fill))
    });
    g.finish();
}

/// Bandpass filtering a cohort of ECG channels, the per-recording unit of
/// work during preprocessing.
fn cohort_filter(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let spec = BandpassSpec::default();
    let channels: Vec<SignalChannel> = (0..8)
        .map(|i| SignalChannel {
            patient_id: format!("bench{i}"),
            kind: ChannelKind::Ecg,
            rate_hz: 80.0,
            start_epoch_s: 0.0,
            values: random_vec(&mut rng, 600 * 80),
        })
        .collect();

    let mut g = c.benchmark_group("cohort_filter");
    g.sample_size(20);
    g.bench_function("seq", |b| {
        b.iter(|| {
            exec::map_vec_seq(black_box(&channels), |ch| {
                butterworth_bandpass(ch, &spec).unwrap()
            })
        })
    });
    #[cfg(feature = "parallel")]
    g.bench_function("par", |b| {
        b.iter(|| {
            exec::map_vec_par(black_box(&channels), |ch| {
                butterworth_bandpass(ch, &spec).unwrap()
            })
        })
    });
    g.finish();
}

/// Full-scale fused-model forward pass in eval phase, batch of 4.
fn model_forward(c: &mut Criterion) {
    let spec = ModelSpec::new(ModelVariant::CnnLstmSpo2, 80).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ecg = Tensor3::zeros(4, 1, spec.ecg_len());
    let mut spo2 = Tensor3::zeros(4, 1, spec.spo2_len());
    for v in ecg.data.iter_mut().chain(spo2.data.iter_mut()) {
        *v = rng.random_range(0.0..1.0);
    }
    let mut model = Model::new(spec, 5).unwrap();

    let mut g = c.benchmark_group("model_forward");
    g.sample_size(10);
    let label = if cfg!(feature = "parallel") { "routed_par" } else { "routed_seq" };
    g.bench_function(label, |b| {
        b.iter(|| model.forward(Some(black_box(&ecg)), Some(black_box(&spo2)), &mut Phase::Eval))
    });
    g.finish();
}

criterion_group!(benches, channel_mix, cohort_filter, model_forward);
criterion_main!(benches);
