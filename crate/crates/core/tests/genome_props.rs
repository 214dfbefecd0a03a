use std::collections::BTreeSet;

use ganimals_core::genome::{count_space, WEIGHT_SUM_TOLERANCE};
use ganimals_core::taxonomy::{Expectations, RecipeCores};
use ganimals_core::{
    Category, CategoryId, Component, Generation, Genome, GenomeError, NoiseRule, Taxonomy,
    TruncationRule,
};
use proptest::prelude::*;

fn bundled() -> &'static Taxonomy {
    use std::sync::OnceLock;
    static TAX: OnceLock<Taxonomy> = OnceLock::new();
    TAX.get_or_init(Taxonomy::bundled)
}

fn toy(n: usize) -> Taxonomy {
    let categories = (0..n as CategoryId)
        .map(|id| Category {
            id,
            name: format!("animal{id}"),
            species_id: format!("species{id}"),
            is_dog: false,
            is_insect: false,
        })
        .collect();
    Taxonomy::build(categories, RecipeCores::default(), Expectations::STRUCTURAL).unwrap()
}

fn assert_well_formed(g: &Genome) {
    let c = g.components();
    assert!(c.iter().all(|c| c.weight > 0.0));
    let sum: f64 = c.iter().map(|c| c.weight).sum();
    assert!((sum - 1.0).abs() <= WEIGHT_SUM_TOLERANCE, "sum {sum}");
    assert!(c.windows(2).all(|w| w[0].category < w[1].category));
    let expected = match c.len() {
        1 => Generation::G0,
        2 => Generation::G1,
        3 | 4 => Generation::G2,
        n => panic!("{n} components"),
    };
    assert_eq!(g.generation(), expected);
    assert!(g.truncation() > 0.0 && g.truncation() <= 1.0);
}

fn category() -> impl Strategy<Value = CategoryId> {
    (0..bundled().len()).prop_map(|i| bundled().categories()[i].id)
}

fn truncation() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(0.5), (1e-6f64..=1.0)]
}

fn g0() -> impl Strategy<Value = Genome> {
    (category(), truncation(), any::<u64>())
        .prop_map(|(c, t, s)| Genome::make_g0(bundled(), c, t, s).unwrap())
}

fn g1() -> impl Strategy<Value = Genome> {
    (g0(), g0())
        .prop_filter("distinct categories", |(a, b)| {
            a.components()[0].category != b.components()[0].category
        })
        .prop_map(|(a, b)| {
            Genome::breed_pair(&a, &b, NoiseRule::default(), TruncationRule::Mean).unwrap()
        })
}

proptest! {
    #[test]
    fn bred_genomes_are_well_formed(a in g1(), b in g1()) {
        assert_well_formed(&a);
        assert_well_formed(&b);
        match Genome::breed_quad(&a, &b, NoiseRule::default(), TruncationRule::Mean) {
            Ok(child) => {
                assert_well_formed(&child);
                let parents: BTreeSet<CategoryId> = a.categories().chain(b.categories()).collect();
                let child_set: BTreeSet<CategoryId> = child.categories().collect();
                prop_assert_eq!(parents, child_set);
                for cat in child.categories() {
                    let expected = (a.weight_of(cat) + b.weight_of(cat)) / 2.0;
                    prop_assert_eq!(child.weight_of(cat), expected);
                }
            }
            Err(GenomeError::IdenticalParents) => {
                prop_assert!(a.categories().eq(b.categories()));
            }
            Err(e) => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn breeding_commutes_at_the_id_level(a in g0(), b in g0(), c in g1(), d in g1()) {
        if a.components()[0].category != b.components()[0].category {
            let ab = Genome::breed_pair(&a, &b, NoiseRule::default(), TruncationRule::Mean).unwrap();
            let ba = Genome::breed_pair(&b, &a, NoiseRule::default(), TruncationRule::Mean).unwrap();
            prop_assert_eq!(ab.id(), ba.id());
        }
        if let Ok(cd) = Genome::breed_quad(&c, &d, NoiseRule::default(), TruncationRule::Mean) {
            let dc = Genome::breed_quad(&d, &c, NoiseRule::default(), TruncationRule::Mean).unwrap();
            prop_assert_eq!(cd.id(), dc.id());
        }
    }

    #[test]
    fn input_order_does_not_change_identity(
        cats in proptest::sample::subsequence((0..396u16).collect::<Vec<_>>(), 4),
        rot in 0usize..4,
        seed in any::<u64>(),
    ) {
        let weights = [0.125, 0.375, 0.25, 0.25];
        let mut components: Vec<Component> = cats
            .iter()
            .zip(weights)
            .map(|(&category, weight)| Component { category, weight })
            .collect();
        let sorted = Genome::new(components.clone(), 0.5, seed, Generation::G2).unwrap();
        components.rotate_left(rot);
        components.reverse();
        let shuffled = Genome::new(components, 0.5, seed, Generation::G2).unwrap();
        prop_assert_eq!(sorted.id(), shuffled.id());
        prop_assert_eq!(sorted.canonical_string(), shuffled.canonical_string());
    }

    #[test]
    fn seed_and_truncation_are_identity_bearing(g in g1(), other in any::<u64>()) {
        prop_assume!(other != g.noise_seed());
        let moved = Genome::new(g.components().to_vec(), g.truncation(), other, Generation::G1).unwrap();
        prop_assert_ne!(g.id(), moved.id());
        let t = if g.truncation() == 1.0 { 0.5 } else { 1.0 };
        let retrunc = Genome::new(g.components().to_vec(), t, g.noise_seed(), Generation::G1).unwrap();
        prop_assert_ne!(g.id(), retrunc.id());
    }

    #[test]
    fn serde_round_trip_preserves_identity(g in g1()) {
        let json = serde_json::to_string(&g).unwrap();
        let back: Genome = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back.id(), g.id());
        prop_assert_eq!(back, g);
    }
}

#[test]
fn fixed_blend_weights() {
    let tax = bundled();
    let p = |a, b, seed| Genome::pair(tax, a, b, 0.5, seed).unwrap();
    let (mantis, terrier, puffer, poodle) = (315, 195, 397, 267);

    let disjoint = Genome::breed_quad(
        &p(mantis, terrier, 1),
        &p(puffer, poodle, 2),
        NoiseRule::default(),
        TruncationRule::Mean,
    )
    .unwrap();
    assert_eq!(disjoint.components().len(), 4);
    assert!(disjoint.components().iter().all(|c| c.weight == 0.25));
    let sum: f64 = disjoint.components().iter().map(|c| c.weight).sum();
    assert!((sum - 1.0).abs() <= 1e-12);

    let shared = Genome::breed_quad(
        &p(mantis, terrier, 1),
        &p(mantis, poodle, 2),
        NoiseRule::default(),
        TruncationRule::Mean,
    )
    .unwrap();
    let weights: Vec<(CategoryId, f64)> = shared
        .components()
        .iter()
        .map(|c| (c.category, c.weight))
        .collect();
    assert_eq!(
        weights,
        vec![(terrier, 0.25), (poodle, 0.25), (mantis, 0.5)]
    );
}

/// Counts by enumerating genomes through the blend algebra itself.
fn brute_force_counts(n: usize) -> (u128, u128, u128) {
    let tax = toy(n);
    let ids: Vec<CategoryId> = tax.categories().iter().map(|c| c.id).collect();
    let g0: BTreeSet<_> = ids
        .iter()
        .map(|&c| Genome::make_g0(&tax, c, 0.5, 0).unwrap().id())
        .collect();
    let mut g1 = Vec::new();
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            g1.push(Genome::pair(&tax, a, b, 0.5, 0).unwrap());
        }
    }
    let distinct_g1: BTreeSet<_> = g1.iter().map(Genome::id).collect();
    let mut g2_pairs = 0u128;
    for (i, a) in g1.iter().enumerate() {
        for b in &g1[i + 1..] {
            Genome::breed_quad(a, b, NoiseRule::default(), TruncationRule::Mean).unwrap();
            g2_pairs += 1;
        }
    }
    (g0.len() as u128, distinct_g1.len() as u128, g2_pairs)
}

#[test]
fn counting_formula_matches_enumeration() {
    for n in 1..=6 {
        let counts = count_space(n as u64);
        assert_eq!(
            (counts.g0, counts.g1, counts.g2),
            brute_force_counts(n),
            "n = {n}"
        );
    }
    let c3 = count_space(3);
    assert_eq!((c3.g0, c3.g1, c3.g2), (3, 3, 3));
    let c2 = count_space(2);
    assert_eq!((c2.g0, c2.g1, c2.g2), (2, 1, 0));
}

#[test]
fn full_taxonomy_space() {
    let counts = count_space(bundled().len() as u64);
    assert_eq!(
        (counts.g0, counts.g1, counts.g2),
        (396, 78_210, 3_058_362_945)
    );
}
