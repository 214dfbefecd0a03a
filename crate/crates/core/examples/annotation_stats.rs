//! Record crowd ratings and compare dog-containing ganimals with the rest.
//!
//! cargo run -p ganimals-core --example annotation_stats

use ganimals_core::{
    AnnotationRecord, AnnotationStore, CategoryPredicate, DrawRng, Genome, Metric,
    SubjectiveRating, Taxonomy, WorldId,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let taxonomy = Taxonomy::bundled();
    let mut store = AnnotationStore::new();
    let mut rng = DrawRng::derive(3, "example-ratings", &[]);
    let ids: Vec<_> = taxonomy.categories().iter().map(|c| c.id).collect();

    let mut timestamp = 0;
    for i in 0..200u64 {
        let a = ids[rng.index(ids.len())];
        let b = ids[rng.index(ids.len())];
        let Ok(genome) = Genome::pair(&taxonomy, a, b, 0.5, i) else {
            continue;
        };
        store.register(&genome);
        let dog = CategoryPredicate::ContainsDog.holds(&genome, &taxonomy);
        for rater in 0..5 {
            let score = 4.0 + if dog { 1.0 } else { 0.0 } + rng.approx_normal();
            timestamp += 1;
            store.record_annotation(&AnnotationRecord {
                user_id: format!("rater-{rater}"),
                ganimal_id: genome.id(),
                world_id: WorldId(0),
                timestamp,
                morphology: None,
                ratings: Some(SubjectiveRating {
                    cute: Some(score.round().clamp(1.0, 7.0) as u8),
                    ..Default::default()
                }),
            })?;
        }
    }

    for predicate in [
        CategoryPredicate::ContainsDog,
        CategoryPredicate::ContainsInsect,
    ] {
        let c = store.compare_by(Metric::Cute, predicate, &taxonomy)?;
        println!(
            "cute by {}: {:.2} (n={}) vs {:.2} (n={}), t = {:.2}, p = {:.2e}",
            c.predicate,
            c.mean_with,
            c.n_with,
            c.mean_without,
            c.n_without,
            c.t_statistic,
            c.p_value
        );
    }
    Ok(())
}
