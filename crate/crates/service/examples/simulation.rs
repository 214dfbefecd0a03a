//! Drive synthetic users with planted rating effects and summarise each world.
//!
//! cargo run -p ganimals --example simulation -- [users] [steps] [seed]

use ganimals::simulate::run;
use ganimals::ServiceConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let arg = |i: usize, default: u64| {
        std::env::args()
            .nth(i)
            .and_then(|v| v.parse().ok())
            .unwrap_or(default)
    };
    let (users, steps, seed) = (arg(1, 60) as usize, arg(2, 80), arg(3, 1));
    let report = run(&ServiceConfig::default(), users, steps, seed)?.report;

    println!(
        "{users} users x {steps} steps, seed {seed}, {} ticks",
        report.ticks
    );
    println!(
        "{:<6} {:<14} {:>5} {:>10} {:>8} {:>6}",
        "world", "profile", "users", "population", "entropy", "dogs"
    );
    for w in &report.worlds {
        println!(
            "{:<6} {:<14} {:>5} {:>10} {:>8.3} {:>6.3}",
            w.world_id.0, w.profile, w.users, w.population, w.entropy, w.dog_fraction
        );
    }
    for s in &report.stats {
        match &s.comparison {
            Some(c) => println!(
                "{} by {}: {:.2} vs {:.2}, p = {:.2e}",
                c.metric.as_str(),
                c.predicate,
                c.mean_with,
                c.mean_without,
                c.p_value
            ),
            None => println!(
                "{}: {}",
                s.predicate.as_str(),
                s.error.as_deref().unwrap_or("")
            ),
        }
    }
    println!("state hash {}", report.state_hash);
    Ok(())
}
