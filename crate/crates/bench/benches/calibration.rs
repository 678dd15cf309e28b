use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use xcal_bench::campaign;
use xcal_core::calibmath::DEFAULT_HT_TARGET;
use xcal_core::pipeline::{aggregate_by_lp, calibrate, Dataset, Level, Targets};
use xcal_core::report::{compute_report, ReportOptions};
use xcal_core::stats::{bootstrap_cv_linreg, DEFAULT_RESAMPLES};
use xcal_core::Method;

fn pipeline(c: &mut Criterion) {
    let sim = campaign(14, 3);
    let targets = Targets::for_campaign(&sim.campaign, DEFAULT_HT_TARGET).unwrap();
    c.bench_function("aggregate_14_pairs", |b| {
        b.iter(|| {
            aggregate_by_lp(&Dataset::build(
                black_box(&sim.campaign),
                black_box(&sim.judgments),
            ))
        })
    });
    let ds = Dataset::build(&sim.campaign, &sim.judgments);
    let raw = aggregate_by_lp(&ds);
    for method in [Method::Cs, Method::CsHt] {
        c.bench_function(&format!("calibrate_{}_per_evaluator", method.name()), |b| {
            b.iter(|| calibrate(method, Level::Evaluator, &ds, &raw, targets).unwrap())
        });
    }
    let options = ReportOptions {
        resamples: 500,
        ..ReportOptions::default()
    };
    c.bench_function("report_14_pairs", |b| {
        b.iter(|| {
            compute_report(
                &sim.campaign,
                &sim.judgments,
                &sim.automatic_scores,
                &options,
            )
            .unwrap()
        })
    });
}

fn bootstrap(c: &mut Criterion) {
    let x: Vec<f64> = (0..28)
        .map(|i| (i as f64 * 0.61).sin() * 10.0 + 20.0)
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|v| 2.0 + v / 10.0 + (v * 3.1).cos() * 0.2)
        .collect();
    c.bench_function("bootstrap_cv_linreg_5000", |b| {
        b.iter(|| bootstrap_cv_linreg(black_box(&x), black_box(&y), DEFAULT_RESAMPLES, 0).unwrap())
    });
}

criterion_group!(benches, pipeline, bootstrap);
criterion_main!(benches);
