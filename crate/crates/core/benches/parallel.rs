//! Benchmarks comparing the rayon-dispatched and sequential execution modes
//! on the three data-parallel workloads: corpus sweeps of the ATL checker,
//! the refinement oracle's candidate search, and the flat-fragment checker's
//! assignment batches.
//!
//! Run with `cargo bench -p atlr-core`. When the crate is built without the
//! `parallel` feature both series measure the sequential path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use atlr_core::corpus::{formula_corpus, lock_model, random_model, random_onestep_body, two_state_models};
use atlr_core::formula::Formula;
use atlr_core::refinement::brute_force_refine;
use atlr_core::{check_atl, check_flat_all, exec, Caps, FlatChain};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bench_atl_sweep(c: &mut Criterion) {
    let models = two_state_models();
    let formulas = formula_corpus(&["p"], 20, 9);
    let mut group = c.benchmark_group("atl_corpus_sweep");
    group.sample_size(10);
    for &par in &[true, false] {
        let label = if par { "parallel" } else { "sequential" };
        group.bench_with_input(BenchmarkId::from_parameter(label), &par, |b, &par| {
            exec::set_parallel(par);
            b.iter(|| {
                let total: usize = exec::map_slice(&models, |m| {
                    formulas
                        .iter()
                        .map(|f| check_atl(m, f).unwrap().len())
                        .sum::<usize>()
                })
                .into_iter()
                .sum();
                total
            });
        });
    }
    exec::set_parallel(true);
    group.finish();
}

fn bench_refine_search(c: &mut Criterion) {
    let m = lock_model();
    let unl = Formula::atom("unlocked_p");
    let chain = FlatChain {
        elements: vec![("1".into(), vec!["a".into(), "b".into()])],
        body: Formula::and(
            Formula::and(
                Formula::neg(Formula::next(&["a"], unl.clone())),
                Formula::neg(Formula::next(&["b"], unl.clone())),
            ),
            Formula::next(&["a", "b"], unl),
        ),
        negative: false,
    };
    let mut group = c.benchmark_group("refine_oracle_bound3");
    group.sample_size(10);
    for &par in &[true, false] {
        let label = if par { "parallel" } else { "sequential" };
        group.bench_with_input(BenchmarkId::from_parameter(label), &par, |b, &par| {
            exec::set_parallel(par);
            b.iter(|| brute_force_refine(&m, "locked", &chain, 3).unwrap());
        });
    }
    exec::set_parallel(true);
    group.finish();
}

fn bench_flat_check(c: &mut Criterion) {
    let models: Vec<_> = (0..8).map(|s| random_model(s, 3, 2, 2)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let bodies: Vec<Formula> = (0..4)
        .map(|_| random_onestep_body(&mut rng, &["x", "y"], &["2"], 3))
        .collect();
    let caps = Caps::default();
    let mut group = c.benchmark_group("check_flat_sweep");
    group.sample_size(10);
    for &par in &[true, false] {
        let label = if par { "parallel" } else { "sequential" };
        group.bench_with_input(BenchmarkId::from_parameter(label), &par, |b, &par| {
            exec::set_parallel(par);
            b.iter(|| {
                let mut proven = 0usize;
                for m in &models {
                    for body in &bodies {
                        let f = Formula::split("1", &["x", "y"], body.clone());
                        proven += check_flat_all(m, &f, &caps).unwrap().lo.len();
                    }
                }
                proven
            });
        });
    }
    exec::set_parallel(true);
    group.finish();
}

criterion_group!(benches, bench_atl_sweep, bench_refine_search, bench_flat_check);
criterion_main!(benches);
