//! Jacobian-based density maps: raw Frobenius norms and their normalization
//! into [1, scale_max].
//!
//! ```sh
//! cargo run --example density_map -- [out.dm2d]
//! ```

use arrowflow::density::{jacobian_frobenius, DensityMode, DensitySeries, Normalization};
use arrowflow::field::{GridSpec, SyntheticField};
use arrowflow::geom::{DomainRect, Vec2};
use arrowflow::grid::RasterSpec;

fn main() -> arrowflow::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "density.dm2d".into());
    let rect = DomainRect::new(0.0, 0.0, 1.0, 1.0);
    let grid = GridSpec::over_rect(rect, 64, 64, 10, 0.0, 0.05);

    let rotation = SyntheticField::RigidRotation {
        omega: 2.0,
        center: Vec2::new(0.5, 0.5),
    }
    .sample_on(grid)?;
    let raw = jacobian_frobenius(&rotation, 0);
    println!("rigid rotation omega=2: raw norm {:.12} (2·sqrt(2) = {:.12})", raw.get(10, 10), 2.0 * 2f64.sqrt());

    let dipole = SyntheticField::parse("dipole", &[])?.sample_on(grid)?;
    let raster = RasterSpec::covering(rect, 1.0 / 128.0)?;
    for normalization in [Normalization::Global, Normalization::PerStep] {
        let mode = DensityMode::Jacobian {
            scale_max: 4.0,
            normalization,
        };
        let series = DensitySeries::build(&mode, &dipole, raster)?;
        let first = series.at_step(0);
        let (lo, hi) = first
            .values()
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        println!(
            "dipole {normalization:?}: step 0 in [{lo:.3}, {hi:.3}], near source {:.3}, far corner {:.3}",
            first.at(Vec2::new(0.32, 0.5)),
            first.at(Vec2::new(0.02, 0.02))
        );
        if normalization == Normalization::Global {
            first.as_grid().write_dm2d(&out)?;
        }
    }
    println!("wrote {out}");
    Ok(())
}
