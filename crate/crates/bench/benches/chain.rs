use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use nbwsd::framing::{build_packet, deframe};
use nbwsd::rxfront::demodulate;
use nbwsd::signal::bytes_to_bits;
use nbwsd::spectral::{avg_fft_power, DEFAULT_FFT_SIZE, DEFAULT_ITERATIONS};
use nbwsd::txmodem::modulate;
use nbwsd::{FrameConfig, ModParams, Scheme, SyncConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

const N_BITS: usize = 40_000;

fn random_bits(n: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

fn modulation(c: &mut Criterion) {
    let bits = random_bits(N_BITS);
    let mut group = c.benchmark_group("modulate");
    group.throughput(Throughput::Elements(N_BITS as u64));
    for scheme in Scheme::ALL {
        let p = ModParams::default_for(scheme);
        group.bench_with_input(BenchmarkId::from_parameter(scheme), &p, |b, p| {
            b.iter(|| modulate(black_box(&bits), p).unwrap())
        });
    }
    group.finish();
}

fn demodulation(c: &mut Criterion) {
    let bits = random_bits(N_BITS);
    let mut group = c.benchmark_group("demodulate");
    group.throughput(Throughput::Elements(N_BITS as u64));
    group.sample_size(20);
    for scheme in Scheme::ALL {
        let p = ModParams::default_for(scheme);
        let s = SyncConfig::default_for(&p);
        let x = modulate(&bits, &p).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(scheme), &x, |b, x| {
            b.iter(|| demodulate(scheme, black_box(x), &p, &s).unwrap())
        });
    }
    group.finish();
}

fn spectrum(c: &mut Criterion) {
    let p = ModParams::default_for(Scheme::Gmsk);
    let x = modulate(&random_bits(DEFAULT_FFT_SIZE * DEFAULT_ITERATIONS / p.sps), &p).unwrap();
    c.bench_function("avg_fft_power/1024x100", |b| {
        b.iter(|| avg_fft_power(black_box(&x), DEFAULT_FFT_SIZE, DEFAULT_ITERATIONS).unwrap())
    });
}

fn framing(c: &mut Criterion) {
    let cfg = FrameConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bits = Vec::new();
    for seq in 0..20u16 {
        let payload: Vec<u8> = (0..cfg.payload_len).map(|_| rng.random()).collect();
        bits.extend(bytes_to_bits(&build_packet(&payload, &cfg, seq).unwrap()));
    }
    let mut group = c.benchmark_group("deframe");
    group.throughput(Throughput::Elements(bits.len() as u64));
    group.bench_function("20_packets", |b| b.iter(|| deframe(black_box(&bits), &cfg, 2).unwrap()));
    group.finish();
}

criterion_group!(benches, modulation, demodulation, spectrum, framing);
criterion_main!(benches);
