use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rnm_core::experiment::{run, ExperimentConfig, ReceiverKind};
use rnm_core::{Execution, RnmConfig};

fn config(receiver: ReceiverKind) -> ExperimentConfig {
    let mut c = ExperimentConfig::rnm("bench", RnmConfig::new(6, 4).unwrap(), vec![6.0]);
    c.trials = 32;
    c.messages_per_trial = 50;
    c.receiver = receiver;
    c
}

fn trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("rnm_trials");
    group.sample_size(10);
    for (name, receiver) in [
        ("naive", ReceiverKind::Naive),
        ("sequence", ReceiverKind::Sequence),
    ] {
        let cfg = config(receiver);
        for (mode, exec) in [
            ("sequential", Execution::Sequential),
            ("parallel", Execution::Parallel),
        ] {
            group.bench_with_input(BenchmarkId::new(name, mode), &exec, |b, &exec| {
                b.iter(|| run(&cfg, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, trials);
criterion_main!(benches);
