use ganimals_core::catalogue::welch_t_test;
use ganimals_core::{
    AnnotationRecord, AnnotationStore, Genome, Metric, SubjectiveRating, Taxonomy, WorldId,
};
use proptest::prelude::*;

/// Small deterministic generator for the oracle, independent of the crate's RNG.
struct SplitMix(u64);

impl SplitMix {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn unit(&mut self) -> f64 {
        (self.next() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn below(&mut self, n: usize) -> usize {
        (self.unit() * n as f64) as usize
    }

    fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

fn welch_t(a: &[f64], b: &[f64]) -> f64 {
    let stats = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
        (m, v / n)
    };
    let ((ma, sa), (mb, sb)) = (stats(a), stats(b));
    (ma - mb) / (sa + sb).sqrt()
}

/// Two-sided permutation p-value of the Welch statistic.
fn permutation_p(a: &[f64], b: &[f64], resamples: usize, rng: &mut SplitMix) -> f64 {
    let observed = welch_t(a, b).abs();
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut extreme = 0usize;
    for _ in 0..resamples {
        for i in (1..pooled.len()).rev() {
            pooled.swap(i, rng.below(i + 1));
        }
        let (x, y) = pooled.split_at(a.len());
        if welch_t(x, y).abs() >= observed - 1e-12 {
            extreme += 1;
        }
    }
    (extreme + 1) as f64 / (resamples + 1) as f64
}

#[test]
fn welch_agrees_with_permutation_oracle() {
    let mut rng = SplitMix(0xC0FFEE);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let na = 5 + rng.below(46);
        let nb = 5 + rng.below(46);
        let shift = rng.unit() * 1.5;
        let a: Vec<f64> = (0..na).map(|_| 4.0 + shift + rng.normal()).collect();
        let b: Vec<f64> = (0..nb).map(|_| 4.0 + rng.normal()).collect();
        let p = welch_t_test(&a, &b).unwrap().p_value;
        let oracle = permutation_p(&a, &b, 10_000, &mut rng);
        worst = worst.max((p - oracle).abs());
    }
    assert!(worst <= 0.02, "max |welch - permutation| = {worst}");
}

#[test]
fn null_calibration() {
    let mut rng = SplitMix(7);
    let runs = 500;
    let rejections = (0..runs)
        .filter(|_| {
            let a: Vec<f64> = (0..30).map(|_| rng.normal()).collect();
            let b: Vec<f64> = (0..30).map(|_| rng.normal()).collect();
            welch_t_test(&a, &b).unwrap().p_value < 0.05
        })
        .count();
    let rate = rejections as f64 / runs as f64;
    assert!((rate - 0.05).abs() <= 0.02, "rejection rate {rate}");
}

fn planted_store(tax: &Taxonomy, rng: &mut SplitMix) -> AnnotationStore {
    let mut store = AnnotationStore::new();
    let mut made = 0;
    let mut ts = 0;
    while made < 400 {
        let a = tax.categories()[rng.below(tax.len())].id;
        let b = tax.categories()[rng.below(tax.len())].id;
        let Ok(g) = Genome::pair(tax, a, b, 0.5, rng.next()) else {
            continue;
        };
        made += 1;
        store.register(&g);
        let dog = tax.is_dog(a) || tax.is_dog(b);
        let insect = tax.is_insect(a) || tax.is_insect(b);
        let centre = 4.0 + if dog { 1.5 } else { 0.0 } - if insect { 1.5 } else { 0.0 };
        for u in 0..5 {
            ts += 1;
            let v = (centre + rng.normal()).round().clamp(1.0, 7.0) as u8;
            store
                .record_annotation(&AnnotationRecord {
                    user_id: format!("u{u}"),
                    ganimal_id: g.id(),
                    world_id: WorldId(0),
                    timestamp: ts,
                    morphology: None,
                    ratings: Some(SubjectiveRating {
                        cute: Some(v),
                        ..Default::default()
                    }),
                })
                .unwrap();
        }
    }
    store
}

#[test]
fn planted_effects_are_recovered() {
    use ganimals_core::CategoryPredicate;
    let tax = Taxonomy::bundled();
    let store = planted_store(&tax, &mut SplitMix(42));
    let dog = store
        .compare_by(Metric::Cute, CategoryPredicate::ContainsDog, &tax)
        .unwrap();
    assert!(
        dog.mean_with > dog.mean_without && dog.p_value < 0.05,
        "{dog:?}"
    );
    let insect = store
        .compare_by(Metric::Cute, CategoryPredicate::ContainsInsect, &tax)
        .unwrap();
    assert!(
        insect.mean_with < insect.mean_without && insect.p_value < 0.05,
        "{insect:?}"
    );
}

proptest! {
    #[test]
    fn relabelling_groups_flips_t_and_keeps_p(
        a in proptest::collection::vec(1.0f64..7.0, 2..40),
        b in proptest::collection::vec(1.0f64..7.0, 2..40),
    ) {
        let ab = welch_t_test(&a, &b).unwrap();
        let ba = welch_t_test(&b, &a).unwrap();
        prop_assert_eq!(ab.t_statistic, -ba.t_statistic);
        prop_assert_eq!(ab.p_value, ba.p_value);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }

    #[test]
    fn mean_rating_ignores_arrival_order(
        votes in proptest::collection::vec((0u8..6, 0u64..8, 1u8..=7), 1..40),
        shuffle_seed in any::<u64>(),
    ) {
        let tax = Taxonomy::bundled();
        let g = Genome::pair(&tax, 1, 2, 0.5, 0).unwrap();
        let records: Vec<AnnotationRecord> = votes
            .iter()
            .map(|&(user, ts, value)| AnnotationRecord {
                user_id: format!("user{user}"),
                ganimal_id: g.id(),
                world_id: WorldId(0),
                timestamp: ts,
                morphology: None,
                ratings: Some(SubjectiveRating { cute: Some(value), ..Default::default() }),
            })
            .collect();
        let mut shuffled = records.clone();
        let mut rng = SplitMix(shuffle_seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.below(i + 1));
        }
        let mean = |rs: &[AnnotationRecord]| {
            let mut store = AnnotationStore::new();
            store.register(&g);
            for r in rs {
                store.record_annotation(r).unwrap();
            }
            store.mean_rating(&g.id(), Metric::Cute)
        };

        // Oracle: per user, the vote with the greatest (timestamp, value).
        let mut latest: std::collections::BTreeMap<u8, (u64, u8)> = Default::default();
        for &(user, ts, value) in &votes {
            let e = latest.entry(user).or_insert((ts, value));
            if (ts, value) > *e {
                *e = (ts, value);
            }
        }
        let expected = latest.values().map(|v| v.1 as f64).sum::<f64>() / latest.len() as f64;

        let forward = mean(&records).unwrap();
        prop_assert_eq!(forward, mean(&shuffled).unwrap());
        prop_assert!((forward - expected).abs() < 1e-12);
    }
}
