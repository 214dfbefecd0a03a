//! Blend two explored G1 ganimals into a G2 and count the possibility space.
//!
//! cargo run -p ganimals-core --example genome_algebra

use ganimals_core::genome::count_space;
use ganimals_core::{Genome, NoiseRule, Taxonomy, TruncationRule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let taxonomy = Taxonomy::bundled();
    let name = |id| taxonomy.get(id).map_or("?", |c| c.name.as_str());

    let a = Genome::pair(&taxonomy, 315, 195, 0.5, 1)?;
    let b = Genome::pair(&taxonomy, 397, 267, 0.7, 2)?;
    let child = Genome::breed_quad(&a, &b, NoiseRule::default(), TruncationRule::Mean)?;

    for (label, g) in [("parent a", &a), ("parent b", &b), ("child", &child)] {
        println!("{label}: {} {}", g.generation(), g.id());
        for c in g.components() {
            println!("  {:>5.3} {} ({})", c.weight, name(c.category), c.category);
        }
        println!(
            "  truncation {} noise seed {}",
            g.truncation(),
            g.noise_seed()
        );
    }
    let swapped = Genome::breed_quad(&b, &a, NoiseRule::default(), TruncationRule::Mean)?;
    println!("parent order irrelevant: {}", swapped.id() == child.id());
    println!("canonical form: {}", child.canonical_string());

    let counts = count_space(taxonomy.len() as u64);
    println!(
        "{} categories: {} G0, {} G1, {} G2 parent pairs",
        taxonomy.len(),
        counts.g0,
        counts.g1,
        counts.g2
    );
    Ok(())
}
