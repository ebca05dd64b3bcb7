//! Samples each analytic field on the unit square and writes VF2D files.
//!
//! ```sh
//! cargo run --example synth_field -- [out_dir]
//! ```

use std::path::PathBuf;

use arrowflow::field::{GridSpec, SyntheticField, VectorField2D};
use arrowflow::geom::DomainRect;

fn main() -> arrowflow::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synth".into()));
    std::fs::create_dir_all(&dir)?;
    let grid = GridSpec::over_rect(DomainRect::new(0.0, 0.0, 1.0, 1.0), 64, 64, 40, 0.0, 0.05);

    for kind in SyntheticField::KINDS {
        let field = SyntheticField::parse(kind, &[])?.sample_on(grid)?;
        let path = dir.join(format!("{kind}.vf2d"));
        field.write_vf2d(&path)?;
        let back = VectorField2D::read_vf2d(&path)?;
        assert_eq!(back.checksum(), field.checksum());
        println!("{kind:<20} max |v| {:>7.4}  {}", field.max_speed(), path.display());
    }

    // Overrides use the same keys as `arrowflow synth --param`.
    let fast = SyntheticField::parse("rigid_rotation", &[("omega".into(), 4.0)])?;
    println!("rigid_rotation omega=4 at (1, 0.5): {:?}", fast.velocity_at(arrowflow::geom::Vec2::new(1.0, 0.5), 0.0));
    Ok(())
}
