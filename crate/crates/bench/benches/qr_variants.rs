use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use eigenshare_bench::{hessenberg_shares, run_both};
use eigenshare_core::eigen::{secure_qr_basic, secure_qr_optimized, EigenOpts};
use eigenshare_core::PartyCtx;

fn bench_qr(c: &mut Criterion) {
    let mut group = c.benchmark_group("secure_qr");
    group.sample_size(10);
    for m in [15usize, 30] {
        let (s1, s2) = hessenberg_shares(m, 42);
        for (name, optimized) in [("basic", false), ("optimized", true)] {
            let (a, b) = (s1.clone(), s2.clone());
            group.bench_with_input(BenchmarkId::new(name, m), &m, |bencher, &m| {
                bencher.iter(|| {
                    let (a, b) = (a.clone(), b.clone());
                    run_both(9, move |ctx: PartyCtx| {
                        let mine = if ctx.is_p1() { a.clone() } else { b.clone() };
                        let opts = EigenOpts::default();
                        if optimized {
                            secure_qr_optimized(&ctx, &mine, m, 1, &opts)
                        } else {
                            secure_qr_basic(&ctx, &mine, m, 1, &opts)
                        }
                    })
                });
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_qr);
criterion_main!(benches);
