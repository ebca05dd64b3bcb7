//! Audits a placement: separation against an independent shortest-path
//! oracle, coverage, popping and time-resolution, printed as CSV.
//!
//! ```sh
//! cargo run --release --example audit_report
//! ```

use arrowflow::density::DensityMode;
use arrowflow::field::{GridSpec, SyntheticField};
use arrowflow::geom::DomainRect;
use arrowflow::metrics::{time_resolution_audit, MetricsReport};
use arrowflow::placement::{count_insertable, PlacementParams, Scene};

fn main() -> arrowflow::Result<()> {
    let grid = GridSpec::over_rect(DomainRect::new(0.0, 0.0, 1.0, 1.0), 64, 64, 20, 0.0, 0.05);
    let field = SyntheticField::parse("dipole", &[])?.sample_on(grid)?;
    let scene = Scene::new(&field, PlacementParams::for_field(&field, 0.08), &DensityMode::Uniform)?;
    let set = scene.place()?;

    let report = MetricsReport::build(&set, &scene.field, &scene.density, true);
    print!("{}", report.to_csv());

    let refill: usize = (0..set.step_count())
        .map(|t| count_insertable(&set, &scene.field, &scene.density, t))
        .sum();
    println!("# arrows a further completion pass would add: {refill}");
    println!("# time-resolution violations: {}", time_resolution_audit(&set).len());
    Ok(())
}
