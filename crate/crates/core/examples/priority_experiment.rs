//! Compares popping when propagation favors long arrows against a random
//! order, over several seeds of the translating vortex.
//!
//! ```sh
//! cargo run --release --example priority_experiment -- [seeds]
//! ```

use arrowflow::density::DensityMode;
use arrowflow::field::{GridSpec, SyntheticField};
use arrowflow::geom::DomainRect;
use arrowflow::metrics::popping_score;
use arrowflow::placement::{PlacementParams, PriorityOrder, Scene};

fn main() -> arrowflow::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let grid = GridSpec::over_rect(DomainRect::new(0.0, 0.0, 1.0, 1.0), 64, 64, 40, 0.0, 0.05);
    let field = SyntheticField::parse("translating_vortex", &[])?.sample_on(grid)?;

    println!("seed  longest_first  random");
    let mut wins = 0;
    for seed in 0..seeds {
        let mut totals = [0; 2];
        for (slot, priority) in [PriorityOrder::LongestFirst, PriorityOrder::Random].into_iter().enumerate() {
            let mut params = PlacementParams::for_field(&field, 0.06);
            params.rng_seed = seed;
            params.priority = priority;
            let set = Scene::new(&field, params, &DensityMode::Uniform)?.place()?;
            totals[slot] = popping_score(&set).total();
        }
        wins += usize::from(totals[0] <= totals[1]);
        println!("{seed:>4}  {:>13}  {:>6}", totals[0], totals[1]);
    }
    println!("longest-first popped no more than random in {wins} of {seeds} runs");
    Ok(())
}
