//! Draw discoveries with the default policy mix and tally what comes out.
//!
//! cargo run -p ganimals-core --example discovery_sampler

use std::collections::BTreeMap;

use ganimals_core::sampler::{next_discovery, sample_leaderboard, sample_stratified_pair};
use ganimals_core::{
    Characteristic, DiscoveryResult, DrawRng, GanimalId, LayoutVariant, SamplerConfig, Taxonomy,
    World, WorldId,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let taxonomy = Taxonomy::bundled();
    let config = SamplerConfig::default();
    let mut rng = DrawRng::derive(2024, "example", &[]);

    // A world with a cute board so exploitation has something to draw from.
    let (mut world, seeds) = World::create(
        &mut rng,
        &taxonomy,
        &config,
        WorldId(0),
        LayoutVariant::FeedLinear,
        20,
        10.0,
    )?;
    let ratings: BTreeMap<GanimalId, f64> = seeds
        .iter()
        .enumerate()
        .map(|(i, g)| (g.id(), 7.0 - i as f64 * 0.25))
        .collect();
    world.update_leaderboard(Characteristic::Cute, &ratings)?;

    let mut by_procedure = BTreeMap::new();
    let mut dogs = 0;
    let draws = 10_000;
    for _ in 0..draws {
        let d = next_discovery(&mut rng, &config, &taxonomy, &world)?;
        *by_procedure
            .entry(format!("{:?}", d.procedure()))
            .or_insert(0) += 1;
        if let DiscoveryResult::New { genome, .. } = d {
            dogs += genome.categories().filter(|c| taxonomy.is_dog(*c)).count();
        }
    }
    println!("{draws} discoveries:");
    for (procedure, n) in &by_procedure {
        println!("  {procedure:<11} {:.3}", *n as f64 / draws as f64);
    }
    println!("(only the cute board is filled; draws for the other three explore uniformly)");
    println!("dog slots among new genomes: {dogs}");

    let (a, b) = sample_stratified_pair(&mut rng, &taxonomy)?;
    println!(
        "one stratified pair: {} x {}",
        taxonomy.get(a).unwrap().name,
        taxonomy.get(b).unwrap().name
    );

    let board = world.leaderboard(Characteristic::Cute);
    let mut top = [0u32; 10];
    for _ in 0..5_500 {
        let g = sample_leaderboard(&mut rng, board, config.leaderboard_k)?;
        top[board.iter().position(|x| *x == g).unwrap()] += 1;
    }
    println!("leaderboard draws by rank (weights 10..1): {top:?}");
    Ok(())
}
