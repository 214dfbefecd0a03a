//! Seed a world, adopt and feed a few ganimals, and watch the rest starve.
//!
//! cargo run -p ganimals-core --example world_ecology

use ganimals_core::ecology::category_entropy;
use ganimals_core::{
    DrawRng, EnergyParams, LayoutVariant, SamplerConfig, Taxonomy, World, WorldId,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let taxonomy = Taxonomy::bundled();
    let params = EnergyParams::default();
    let mut rng = DrawRng::derive(7, "example-world", &[]);
    let (mut world, genomes) = World::create(
        &mut rng,
        &taxonomy,
        &SamplerConfig::default(),
        WorldId(0),
        LayoutVariant::for_world(0),
        12,
        params.initial,
    )?;
    let lookup = |gid: &_| genomes.iter().find(|g| g.id() == *gid);
    println!(
        "seed set of {} with category entropy {:.3} nats",
        world.seed_set().len(),
        category_entropy(world.seed_set(), lookup)
    );

    let favourites: Vec<_> = world.seed_set()[..3].to_vec();
    for tick in 1..=12 {
        for gid in &favourites {
            world.feed(gid, params.feed_amount)?;
        }
        let removed = world.tick(params.decay)?;
        if !removed.is_empty() {
            println!("tick {tick}: {} removed", removed.len());
        }
    }
    println!("survivors after 12 ticks:");
    for (gid, state) in world.promoted() {
        println!("  {gid} energy {:.2}", state.energy);
    }
    println!(
        "population entropy {:.3} nats",
        category_entropy(world.population().keys(), lookup)
    );
    Ok(())
}
