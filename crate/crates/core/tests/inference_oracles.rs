use ifm_core::inference::{reduce, CountRecord, CountTable, Propagation, ReduceOptions, RunConfig};
use ifm_core::{Group, ObjectKind};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

const REFERENCE_COUNTS: &str = include_str!("../data/reference_counts.csv");

fn table(trans: (u64, u64), black: (u64, u64, u64), bg: (u64, u64, u64)) -> CountTable {
    CountTable::from_records([
        CountRecord::new(RunConfig::TransparentRun, trans.0, trans.1, None).unwrap(),
        CountRecord::new(RunConfig::BlackRun, black.0, black.1, Some(black.2)).unwrap(),
        CountRecord::new(RunConfig::BackgroundRun, bg.0, bg.1, Some(bg.2)).unwrap(),
    ])
    .unwrap()
}

fn estimates(counts: &CountTable, propagation: Propagation) -> Vec<(f64, f64)> {
    let r = reduce(
        counts,
        &ReduceOptions {
            propagation,
            ..Default::default()
        },
    )
    .unwrap();
    let mut out = Vec::new();
    for kind in ObjectKind::ALL {
        let row = r.table.row(kind);
        for g in Group::ALL {
            if kind == ObjectKind::Transparent && g == Group::III {
                continue;
            }
            let e = row.get(g);
            out.push((e.value, e.sigma));
        }
    }
    out
}

fn resample(counts: &CountTable, rng: &mut ChaCha8Rng) -> CountTable {
    let draw = |rng: &mut ChaCha8Rng, n: u64| -> u64 {
        if n == 0 {
            0
        } else {
            Poisson::new(n as f64).unwrap().sample(rng) as u64
        }
    };
    let records: Vec<CountRecord> = counts
        .records()
        .map(|r| {
            CountRecord::new(
                r.config,
                draw(rng, r.p1),
                draw(rng, r.p2),
                r.d.map(|d| draw(rng, d)),
            )
            .unwrap()
        })
        .collect();
    CountTable::from_records(records).unwrap()
}

/// Parametric bootstrap: sample standard deviation of each probability
/// over Poisson resamples of every raw count.
fn bootstrap_sigmas(counts: &CountTable, draws: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = estimates(counts, Propagation::Exact).len();
    let (mut sum, mut sum_sq) = (vec![0.0; k], vec![0.0; k]);
    for _ in 0..draws {
        let sample = resample(counts, &mut rng);
        for (i, (v, _)) in estimates(&sample, Propagation::Exact)
            .into_iter()
            .enumerate()
        {
            sum[i] += v;
            sum_sq[i] += v * v;
        }
    }
    let n = draws as f64;
    (0..k)
        .map(|i| ((sum_sq[i] - sum[i] * sum[i] / n) / (n - 1.0)).sqrt())
        .collect()
}

#[test]
fn first_order_sigmas_match_bootstrap() {
    let cases = [
        CountTable::parse(REFERENCE_COUNTS).unwrap(),
        table((12_000, 3_000), (6_000, 2_500, 4_000), (400, 150, 900)),
    ];
    for counts in &cases {
        let boot = bootstrap_sigmas(counts, 100_000, 17);
        let exact = estimates(counts, Propagation::Exact);
        let loose = estimates(counts, Propagation::Uncorrelated);
        for (i, (b, (_, s))) in boot.iter().zip(&exact).enumerate() {
            assert!(
                (s / b - 1.0).abs() < 0.10,
                "quantity {i}: first order {s}, bootstrap {b}"
            );
        }
        // black p_i and p_ii do not depend on the propagation mode
        for i in 0..2 {
            assert!((loose[i].1 / boot[i] - 1.0).abs() < 0.10);
        }
    }
}

#[test]
fn full_pipeline_reproduces_probability_table() {
    let counts = CountTable::parse(REFERENCE_COUNTS).unwrap();
    let r = reduce(&counts, &ReduceOptions::default()).unwrap();
    let round = |x: f64| (x * 1000.0).round() / 1000.0;
    let b = &r.table.black;
    let t = &r.table.transparent;
    assert_eq!(round(b.p_i.value), 0.455);
    // 940 / 4080 = 0.23039; the printed table rounds this to .231
    assert_eq!(b.p_ii.value, 940.0 / 4080.0);
    assert!((b.p_ii.value - 0.231).abs() < 1e-3);
    assert_eq!(round(b.p_iii.unwrap().value), 0.314);
    assert_eq!(round(t.p_i.value), 0.820);
    assert_eq!(round(t.p_ii.value), 0.180);
    assert_eq!(round(b.p_i.sigma), 0.014);
    assert_eq!(round(b.p_ii.sigma), 0.009);
    assert!((b.p_iii.unwrap().sigma - 0.018).abs() <= 0.002);
    assert_eq!(round(t.p_i.sigma), 0.020);
    assert_eq!(round(t.p_ii.sigma), 0.008);
    let c = r.consistency.unwrap();
    assert!(c.pull.abs() < 1.0);
    assert!((c.predicted.value - 833.0).abs() < 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_counts_keeps_probabilities(kappa in 2u64..50) {
        let counts = CountTable::parse(REFERENCE_COUNTS).unwrap();
        let base = reduce(&counts, &ReduceOptions::default()).unwrap();
        let scaled = reduce(&counts.scaled(kappa), &ReduceOptions::default()).unwrap();
        let k = kappa as f64;
        for kind in ObjectKind::ALL {
            for g in Group::ALL {
                let a = base.table.row(kind).get(g);
                let b = scaled.table.row(kind).get(g);
                prop_assert!((a.value - b.value).abs() < 1e-12);
                prop_assert!((b.sigma * k.sqrt() - a.sigma).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rows_are_normalised(
        t1 in 100u64..100_000, t2 in 0u64..50_000,
        b_share in 0.0..1.0f64, b_split in 0.0..1.0f64,
        bg in 0u64..50,
    ) {
        // black counts chosen so the black run never exceeds the transparent total
        let total = t1 + t2;
        let b1 = (total as f64 * b_share * b_split * 0.9) as u64;
        let b2 = (total as f64 * b_share * (1.0 - b_split) * 0.9) as u64;
        let counts = table((t1 + bg, t2 + bg), (b1 + bg, b2 + bg, 10), (bg, bg, 5));
        let r = reduce(&counts, &ReduceOptions::default()).unwrap();
        let sum_b: f64 = r.table.black.values().iter().sum();
        let sum_t: f64 = r.table.transparent.values().iter().sum();
        prop_assert!((sum_b - 1.0).abs() < 1e-9);
        prop_assert!((sum_t - 1.0).abs() < 1e-9);
        for p in r.table.black.values().iter().chain(r.table.transparent.values().iter()) {
            prop_assert!((0.0..=1.0).contains(p));
        }
    }
}
