//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{max_rel, network_grad_error, numeric_grad, random_unit_sample};
use moment_match::adaptation::{sensitivity_sweep, train, SweepAxis, TrainConfig};
use moment_match::checkpoint;
use moment_match::discrepancy::{cmd_k, cmd_k_grad, cmd_term_bound, mkl, mkl_grad, mmd2, mmd2_grad};
use moment_match::network::Activation;
use moment_match::samples::{make_synthetic_pair, DomainDataset, ShiftKind};
use moment_match::{Bounds, DiscrepancySpec, Sample};
use ndarray::{array, Array2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn unit(data: Array2<f64>) -> Sample {
    Sample::new(data, Bounds::unit()).unwrap()
}

fn fixtures() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut check = |got: f64, want: f64| worst = worst.max((got - want).abs());
    check(
        cmd_k(&unit(array![[0.0], [1.0]]), &unit(array![[0.5], [0.5]]), 5)
            .unwrap()
            .value,
        0.3125,
    );
    check(
        cmd_k(&unit(array![[0.2], [0.4]]), &unit(array![[0.6], [0.8]]), 5)
            .unwrap()
            .value,
        0.4,
    );
    check(
        mmd2(&unit(array![[0.0]]), &unit(array![[1.0]]), 1.0).unwrap(),
        2.0 - 2.0 * (-1.0f64).exp(),
    );
    let half_quarter = 0.25 * 2f64.ln();
    check(mkl(&unit(array![[0.5]]), &unit(array![[0.25]])).unwrap(), half_quarter);
    check(
        mkl(&unit(array![[0.5, 0.5]]), &unit(array![[0.25, 0.25]])).unwrap(),
        2.0 * half_quarter,
    );
    check(mkl(&unit(array![[0.3, 0.7]]), &unit(array![[0.3, 0.7]])).unwrap(), 0.0);
    outcome(worst <= 1e-12, format!("max abs error {worst:.3e}"))
}

/// The 200 random triples shared by the metric and tail-bound criteria.
fn random_triples() -> Vec<(Sample, Sample, Sample, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..200)
        .map(|_| {
            let dim = rng.random_range(1..=8);
            let k = rng.random_range(1..=7);
            let lo = rng.random_range(-3.0..3.0);
            let b = Bounds::new(lo, lo + rng.random_range(0.1..4.0)).unwrap();
            let draw = |rng: &mut ChaCha8Rng| {
                let rows = rng.random_range(2..=50);
                let data = Array2::from_shape_simple_fn((rows, dim), || rng.random_range(b.lo()..=b.hi()));
                Sample::new(data, b).unwrap()
            };
            (draw(&mut rng), draw(&mut rng), draw(&mut rng), k)
        })
        .collect()
}

fn metric_axioms(triples: &[(Sample, Sample, Sample, usize)]) -> Outcome {
    let mut violations = 0;
    for (x, y, z, k) in triples {
        let xy = cmd_k(x, y, *k).unwrap().value;
        let ok = xy >= 0.0
            && xy == cmd_k(y, x, *k).unwrap().value
            && cmd_k(x, z, *k).unwrap().value <= xy + cmd_k(y, z, *k).unwrap().value + 1e-12
            && cmd_k(x, x, *k).unwrap().value == 0.0;
        violations += usize::from(!ok);
    }
    outcome(
        violations == 0,
        format!("{violations} violations in {} triples", triples.len()),
    )
}

fn tail_bound(triples: &[(Sample, Sample, Sample, usize)]) -> Outcome {
    let mut violations = 0;
    for (x, y, _, _) in triples {
        let terms = cmd_k(x, y, 7).unwrap().per_term.unwrap();
        for (i, t) in terms.iter().enumerate() {
            violations += usize::from(*t > cmd_term_bound(i + 1, x.dim()).unwrap() + 1e-12);
        }
    }
    let decreasing = (1..30).all(|k| cmd_term_bound(k + 1, 5).unwrap() < cmd_term_bound(k, 5).unwrap());
    outcome(
        violations == 0 && decreasing,
        format!("{violations} term violations, bound strictly decreasing k=1..30: {decreasing}"),
    )
}

fn gradient_oracles() -> Outcome {
    let (mut cmd, mut mmd, mut kl, mut net) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let specs = [
        DiscrepancySpec::cmd(5, 1.0).unwrap(),
        DiscrepancySpec::mmd(1.0, 1.0).unwrap(),
        DiscrepancySpec::mkl(1.0).unwrap(),
    ];
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + seed);
        let (x, y) = (random_unit_sample(&mut rng, 6, 3), random_unit_sample(&mut rng, 6, 3));
        cmd = cmd.max(max_rel(
            cmd_k_grad(&x, &y, 5).unwrap().iter(),
            numeric_grad(&x, |s| cmd_k(s, &y, 5).unwrap().value).iter(),
        ));
        mmd = mmd.max(max_rel(
            mmd2_grad(&x, &y, 1.0).unwrap().iter(),
            numeric_grad(&x, |s| mmd2(s, &y, 1.0).unwrap()).iter(),
        ));
        kl = kl.max(max_rel(
            mkl_grad(&x, &y).unwrap().iter(),
            numeric_grad(&x, |s| mkl(s, &y).unwrap()).iter(),
        ));
        let activation = if seed % 2 == 0 {
            Activation::Sigmoid
        } else {
            Activation::Tanh
        };
        net = net.max(network_grad_error(specs[seed as usize % 3], activation, seed));
    }
    outcome(
        cmd < 1e-5 && mmd < 1e-5 && kl < 1e-5 && net < 1e-4,
        format!("max rel error cmd {cmd:.2e}, mmd {mmd:.2e}, mkl {kl:.2e}, network {net:.2e}"),
    )
}

fn complexity() -> Outcome {
    let (n, dim) = (20_000, 50);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = unit(Array2::from_shape_simple_fn((n, dim), || rng.random_range(0.0..1.0)));
    let y = unit(Array2::from_shape_simple_fn((n, dim), || rng.random_range(0.0..1.0)));
    let t = Instant::now();
    cmd_k(&x, &y, 5).unwrap();
    let cmd_time = t.elapsed();
    let t = Instant::now();
    mmd2(&x, &y, 1.0).unwrap();
    let mmd_time = t.elapsed();
    outcome(
        cmd_time * 10 < mmd_time,
        format!("cmd_k {cmd_time:.2?}, mmd2 {mmd_time:.2?}"),
    )
}

fn convergence() -> Outcome {
    let dim = 5;
    let medians: Vec<f64> = [50, 200, 800, 3200]
        .iter()
        .map(|&n| {
            let mut values: Vec<f64> = (0..20u64)
                .map(|seed| {
                    let mut rng = ChaCha8Rng::seed_from_u64(n as u64 * 1000 + seed);
                    let x = unit(Array2::from_shape_simple_fn((n, dim), || rng.random_range(0.0..=1.0)));
                    let y = unit(Array2::from_shape_simple_fn((n, dim), || rng.random_range(0.0..=1.0)));
                    cmd_k(&x, &y, 5).unwrap().value
                })
                .collect();
            values.sort_by(f64::total_cmp);
            (values[9] + values[10]) / 2.0
        })
        .collect();
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    outcome(
        decreasing && medians[3] < 0.05,
        format!("medians at n=50,200,800,3200: {medians:.4?}"),
    )
}

fn benchmark_task(kind: ShiftKind, magnitude: f64, seed: u64) -> DomainDataset {
    make_synthetic_pair(kind, magnitude, 1000, 1000, 2000, seed).unwrap()
}

fn synthetic_benchmark() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (kind, magnitude) in [(ShiftKind::Shift, 0.8), (ShiftKind::Rotation, 0.6)] {
        let (mut wins, mut gain) = (0, 0.0);
        for seed in 0..10u64 {
            let data = benchmark_task(kind, magnitude, 1000 + seed);
            let config = TrainConfig::new(2, 2, seed);
            let cmd = train(
                &data,
                &config.clone().with_discrepancy(DiscrepancySpec::cmd(5, 1.0).unwrap()),
            )
            .unwrap();
            let plain = train(&data, &config.with_discrepancy(DiscrepancySpec::cmd(5, 0.0).unwrap())).unwrap();
            let diff = cmd.target_test_accuracy - plain.target_test_accuracy;
            wins += usize::from(diff > 0.0);
            gain += diff / 10.0;
        }
        pass &= wins >= 8 && gain > 0.0;
        parts.push(format!("{kind:?} {magnitude}: wins {wins}/10, mean gain {gain:+.4}"));
    }
    outcome(pass, parts.join("; "))
}

fn k_insensitivity() -> Outcome {
    let tasks = vec![
        benchmark_task(ShiftKind::Shift, 0.8, 1),
        benchmark_task(ShiftKind::Rotation, 0.6, 2),
    ];
    let values: Vec<f64> = (3..=7).map(f64::from).collect();
    let seeds: Vec<u64> = (0..10).collect();
    let sweep = sensitivity_sweep(&tasks, &TrainConfig::new(2, 2, 0), SweepAxis::K, &values, 5.0, &seeds).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for task in &sweep.tasks {
        let ratios: Vec<f64> = [3.0, 4.0, 6.0, 7.0]
            .iter()
            .map(|&k| sweep.mean_ratio(task, k).unwrap())
            .collect();
        pass &= ratios.iter().all(|r| (0.97..=1.03).contains(r));
        parts.push(format!("{task} K=3,4,6,7: {ratios:.4?}"));
    }
    outcome(pass, parts.join("; "))
}

fn determinism() -> Outcome {
    let data = benchmark_task(ShiftKind::Rotation, 0.6, 3);
    let mut config = TrainConfig::new(2, 2, 11);
    config.epochs = 10;
    let run = || {
        let r = train(&data, &config).unwrap();
        format!(
            "{}\n{}\n{}",
            serde_json::to_string(&r.history).unwrap(),
            r.target_test_accuracy,
            checkpoint::to_json(&r.state).unwrap()
        )
    };
    let sweep = || {
        let s = sensitivity_sweep(
            std::slice::from_ref(&data),
            &config,
            SweepAxis::Lambda,
            &[0.3, 1.0, 3.0],
            1.0,
            &[0, 1],
        )
        .unwrap();
        serde_json::to_string(&s).unwrap()
    };
    let same_train = run() == run();
    let same_sweep = sweep() == sweep();
    outcome(
        same_train && same_sweep,
        format!("train identical: {same_train}, sweep identical: {same_sweep}"),
    )
}

fn main() -> ExitCode {
    let triples = random_triples();
    let criteria: Vec<Criterion> = vec![
        ("fixture exactness", Box::new(fixtures)),
        ("metric axioms", Box::new(|| metric_axioms(&triples))),
        ("moment term tail bound", Box::new(|| tail_bound(&triples))),
        ("gradient oracles", Box::new(gradient_oracles)),
        ("complexity", Box::new(complexity)),
        ("convergence", Box::new(convergence)),
        ("synthetic adaptation benchmark", Box::new(synthetic_benchmark)),
        ("K insensitivity", Box::new(k_insensitivity)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = check();
        failures += usize::from(!o.pass);
        println!(
            "{} {}. {name}: {} [{:.1?}]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            t.elapsed()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
