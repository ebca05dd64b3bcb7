//! Full pipeline on the translating vortex: placement with a Jacobian
//! density, then PNG frames with fades and arrow-to-disc morphing.
//!
//! ```sh
//! cargo run --release --example render_frames -- [out_dir]
//! ```

use arrowflow::density::{DensityMode, Normalization};
use arrowflow::field::{GridSpec, SyntheticField};
use arrowflow::geom::DomainRect;
use arrowflow::placement::{PlacementParams, Scene};
use arrowflow::render::{render_all, RenderStyle};

fn main() -> arrowflow::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "frames".into());
    let grid = GridSpec::over_rect(DomainRect::new(0.0, 0.0, 2.0, 1.0), 96, 48, 20, 0.0, 0.1);
    let field = SyntheticField::parse("translating_vortex", &[("ux".into(), 0.5)])?.sample_on(grid)?;

    let params = PlacementParams::for_field(&field, 0.08);
    let mode = DensityMode::Jacobian {
        scale_max: 2.0,
        normalization: Normalization::Global,
    };
    let scene = Scene::new(&field, params, &mode)?;
    let set = scene.place()?;

    let style = RenderStyle {
        width: 640,
        height: 320,
        frames_per_step: 3,
        outline: Some(([255, 255, 255, 255], 0.75)),
        ..RenderStyle::default()
    };
    let frames = render_all(&set, &scene.field, &scene.density, &style, &dir)?;
    println!("{} arrows, {} frames in {dir}/", set.arrows().len(), frames.len());
    Ok(())
}
