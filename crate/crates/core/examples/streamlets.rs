//! Traces streamlets and pathlines with RK4 and shows the integrator's
//! fourth-order convergence on a rigid rotation.
//!
//! ```sh
//! cargo run --example streamlets
//! ```

use std::f64::consts::FRAC_PI_2;

use arrowflow::field::SyntheticField;
use arrowflow::geom::Vec2;
use arrowflow::integrate::{advect_handle, clamp_aspect, integrate_streamlet, Advection, IntegratorConfig};

fn main() {
    let rotation = SyntheticField::RigidRotation {
        omega: 1.0,
        center: Vec2::ZERO,
    };
    let cfg = IntegratorConfig {
        step_h: 0.01,
        length_gain: 2.0,
        max_aspect_ratio: 100.0,
        substeps_per_dt: 64,
    };

    let s = integrate_streamlet(&rotation, Vec2::new(1.0, 0.0), 0.0, &cfg, 0.1).unwrap();
    let drift = s.points().iter().map(|p| (p.length() - 1.0).abs()).fold(0.0, f64::max);
    println!(
        "streamlet at (1, 0): {} samples, arc length {:.6}, max radial drift {drift:.2e}",
        s.points().len(),
        s.arc_length()
    );

    let clamped = clamp_aspect(&s, 6.0);
    println!("clamped to aspect 6: arc length {:.6} (thickness 0.1)", clamped.arc_length());

    // A quarter turn of the pathline; the exact endpoint is (0, 1).
    println!("\nsubsteps  endpoint error   ratio");
    let mut prev: Option<f64> = None;
    for n in [4, 8, 16, 32, 64] {
        let cfg = IntegratorConfig { substeps_per_dt: n, ..cfg };
        let Advection::Moved(p) = advect_handle(&rotation, Vec2::new(1.0, 0.0), 0.0, FRAC_PI_2, &cfg) else {
            unreachable!("rotation never leaves an unbounded domain")
        };
        let err = p.distance(Vec2::new(0.0, 1.0));
        let ratio = prev.map_or(String::from("-"), |e| format!("{:.2}", e / err));
        println!("{n:>8}  {err:>14.3e}  {ratio:>6}");
        prev = Some(err);
    }
}
