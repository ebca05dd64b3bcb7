//! Builds a density-weighted distance map around two streamlets and dumps it
//! as a DM2D file.
//!
//! ```sh
//! cargo run --example distance_map -- [out.dm2d]
//! ```

use arrowflow::density::DensityMap;
use arrowflow::distmap::DistanceMap;
use arrowflow::geom::{DomainRect, Vec2};
use arrowflow::grid::RasterSpec;
use arrowflow::integrate::Streamlet;

fn main() -> arrowflow::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "distance.dm2d".into());
    let raster = RasterSpec::covering(DomainRect::new(0.0, 0.0, 1.0, 1.0), 1.0 / 64.0)?;

    // Density rises to 4 on the right half: distances grow four times faster there.
    let values = (0..raster.len())
        .map(|k| if raster.coords(k).0 >= raster.width / 2 { 4.0 } else { 1.0 })
        .collect();
    let density = DensityMap::from_values(raster, values, 4.0)?;
    let mut map = DistanceMap::new(raster, &density)?;

    let line = |a: Vec2, b: Vec2| {
        let pts = (0..=16).map(|i| a.lerp(b, i as f64 / 16.0)).collect();
        Streamlet::from_points(pts, 8, 0.02, b - a)
    };
    let first = line(Vec2::new(0.2, 0.2), Vec2::new(0.2, 0.8));
    let second = line(Vec2::new(0.8, 0.2), Vec2::new(0.8, 0.8));
    map.insert_arrow(&first);
    println!("distance from the second streamlet to the first: {:.4}", map.distance_to_arrows(&second));
    map.insert_arrow(&second);

    for x in [0.3, 0.45, 0.55, 0.7] {
        let (i, j) = raster.pixel_of(Vec2::new(x, 0.5)).unwrap();
        println!("D({x:.2}, 0.50) = {:.4}", map.value(i, j));
    }
    map.to_grid().write_dm2d(&out)?;
    println!("wrote {out}");
    Ok(())
}
