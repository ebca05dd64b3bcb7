//! Places moving arrows on the dipole stress field and prints per-step
//! counts.
//!
//! ```sh
//! cargo run --release --example place_arrows -- [rng_seed]
//! ```

use std::time::Instant;

use arrowflow::density::DensityMode;
use arrowflow::field::{GridSpec, SyntheticField};
use arrowflow::geom::DomainRect;
use arrowflow::placement::{PlacementParams, Scene};

fn main() -> arrowflow::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let grid = GridSpec::over_rect(DomainRect::new(0.0, 0.0, 1.0, 1.0), 64, 64, 40, 0.0, 0.05);
    let field = SyntheticField::parse("dipole", &[])?.sample_on(grid)?;

    // Eight grid cells between arrows.
    let mut params = PlacementParams::for_field(&field, 8.0 * grid.dx);
    params.rng_seed = seed;

    let start = Instant::now();
    let scene = Scene::new(&field, params, &DensityMode::Uniform)?;
    let set = scene.place()?;
    let elapsed = start.elapsed();

    println!("step  alive  born");
    for t in 0..set.step_count() {
        let alive = set.alive_at(t).count();
        let born = set.alive_at(t).filter(|a| a.birth_step == t).count();
        println!("{t:>4}  {alive:>5}  {born:>4}");
    }
    let mean = set.arrows().iter().map(|a| a.lifetime() as f64).sum::<f64>() / set.arrows().len() as f64;
    println!("{} arrows, mean lifetime {mean:.2} steps, placed in {elapsed:.2?}", set.arrows().len());
    Ok(())
}
