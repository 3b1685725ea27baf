use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use twistbad_bench::{golden, planar};
use twistbad_core::game::{delta_interval, run_game, BobStrategy, CurveSpec, GameOptions};
use twistbad_core::geometry::make_context;
use twistbad_core::lattice::{big_box_betas, build_lambda, enumerate_pi, LambdaOptions, ParallelepipedSpec, DEFAULT_BUDGET};
use twistbad_core::numeric::dist_nearest_int;
use twistbad_core::quality::lower_estimate;
use twistbad_core::transference::{verify_fact_a, DEFAULT_Q_BUDGET};
use twistbad_core::{QualityKind, SystemMatrix, Weights};

fn quality(c: &mut Criterion) {
    let g = golden();
    let x = g.prec.float(0.3);
    c.bench_function("dist_nearest_int", |b| b.iter(|| dist_nearest_int(black_box(&x))));
    let mut group = c.benchmark_group("lower_estimate");
    for q in [1_000u64, 10_000, 100_000] {
        group.bench_with_input(BenchmarkId::new("homogeneous_phi", q), &q, |b, &q| {
            b.iter(|| lower_estimate(QualityKind::Homogeneous, &g.theta, &g.k, None, q, &g.prec).unwrap())
        });
    }
    let p = planar();
    group.bench_function("dual_planar_Q100", |b| {
        b.iter(|| lower_estimate(QualityKind::Dual, &p.theta, &p.k, None, 100, &p.prec).unwrap())
    });
    group.finish();
}

fn lattice(c: &mut Criterion) {
    let p = planar();
    let ctx = make_context(&p.line.direction, &p.prec).unwrap();
    let cert = lower_estimate(QualityKind::Dual, &p.theta, &p.k, None, 1000, &p.prec).unwrap();
    let betas = big_box_betas(&ctx, &cert.gamma, 1);
    let mut group = c.benchmark_group("enumerate_pi");
    for scale in [100u32, 10_000, 1_000_000] {
        let spec = ParallelepipedSpec::new(&p.theta, &p.k, p.prec.float(scale), betas.clone()).unwrap();
        group.bench_with_input(BenchmarkId::new("big_box", scale), &spec, |b, spec| {
            b.iter(|| enumerate_pi(spec, &p.prec, DEFAULT_BUDGET).unwrap())
        });
    }
    group.finish();
    let mut group = c.benchmark_group("build_lambda");
    group.sample_size(10);
    group.bench_function("planar_r2", |b| {
        b.iter(|| build_lambda(&p.theta, &p.k, &p.line, &cert, 2, &LambdaOptions::default(), &p.prec).unwrap())
    });
    group.finish();
}

fn game(c: &mut Criterion) {
    let g = golden();
    let prec = &g.prec;
    let parabola = CurveSpec::from_name("parabola", prec).unwrap();
    let theta = SystemMatrix::parse("sqrt(2);sqrt(3)", prec).unwrap();
    let k = Weights::parse(&["1/2", "1/2"], 1, prec).unwrap();
    let eps = prec.float(1e-3);
    c.bench_function("delta_interval_parabola", |b| {
        b.iter(|| delta_interval(&parabola, &theta, &k, &eps, black_box(&[1, 2]), black_box(&[1])).unwrap())
    });
    let mut group = c.benchmark_group("run_game");
    group.sample_size(10);
    group.bench_function("golden_depth5", |b| {
        b.iter(|| run_game(&g.curve, &g.theta, &g.k, &g.game, BobStrategy::Center, 5, &GameOptions::default(), prec).unwrap())
    });
    group.finish();
}

fn transference(c: &mut Criterion) {
    let g = golden();
    let x = vec![g.prec.float(0.3141592653589793)];
    let mut group = c.benchmark_group("verify_fact_a");
    group.sample_size(10);
    group.bench_function("golden_r5", |b| {
        b.iter(|| verify_fact_a(&x, &g.sequence, &g.theta, &g.k, None, DEFAULT_Q_BUDGET, &g.prec).unwrap())
    });
    group.finish();
}

criterion_group!(benches, quality, lattice, game, transference);
criterion_main!(benches);
