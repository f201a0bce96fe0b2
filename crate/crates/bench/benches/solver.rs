use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use gkp_bench::{blow_up_params, power_law_trace};
use gkp_core::diagnostics::gaussian_initial;
use gkp_core::etd::contour_coefficients;
use gkp_core::fit::{fit_log_power, SimplexConfig};
use gkp_core::gkp::linear_symbol;
use gkp_core::{DirectSolver, Fft2d, InitialData, NormId, NormTrace};

fn transforms(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft2d");
    for n in [128, 256, 512] {
        let p = blow_up_params(n);
        let fft = Fft2d::new(p.grid);
        let u = gaussian_initial(p.grid, 1.0);
        let u_hat = fft.forward(&u).unwrap();
        group.bench_with_input(BenchmarkId::new("forward", n), &u, |b, u| {
            b.iter(|| fft.forward(black_box(u)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("inverse", n), &u_hat, |b, u_hat| {
            b.iter(|| fft.inverse(black_box(u_hat)).unwrap())
        });
    }
    group.finish();
}

fn coefficients(c: &mut Criterion) {
    let p = blow_up_params(256);
    let op = linear_symbol(p.grid, p.lambda, p.regularization).unwrap();
    c.bench_function("etd_coefficients/256", |b| {
        b.iter(|| contour_coefficients(black_box(&op), p.h, &p.contour).unwrap())
    });
}

fn steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("direct_step");
    group.sample_size(20);
    for n in [128, 256] {
        let solver = DirectSolver::new(blow_up_params(n)).unwrap();
        let state = solver.initial_state(&InitialData::Gaussian { beta: 6.0 }).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &state, |b, s| {
            b.iter(|| solver.step(black_box(s)).unwrap())
        });
    }
    group.finish();
}

fn fitting(c: &mut Criterion) {
    let (t, v) = power_law_trace(800, 0.29, -0.44, 0.0258);
    let trace = NormTrace::from_pairs("linf_u", t, v).unwrap();
    let cfg = SimplexConfig::default();
    c.bench_function("fit_log_power/800", |b| {
        b.iter(|| fit_log_power(black_box(&trace), NormId::LinfU, 800, None, &cfg).unwrap())
    });
}

criterion_group!(benches, transforms, coefficients, steps, fitting);
criterion_main!(benches);
