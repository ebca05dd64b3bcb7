//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::f64::consts::SQRT_2;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use arrowflow::density::{jacobian_frobenius, DensityMap, DensityMode};
use arrowflow::distmap::{rasterize_polyline, DistanceMap};
use arrowflow::field::{GridSpec, SyntheticField, VectorField2D};
use arrowflow::geom::{DomainRect, Vec2};
use arrowflow::grid::RasterSpec;
use arrowflow::integrate::{integrate_streamlet, IntegratorConfig};
use arrowflow::metrics::{coverage_audit, popping_score, separation_audit};
use arrowflow::placement::{count_insertable, Arrow, ArrowSet, PlacementParams, PriorityOrder, Scene};
use arrowflow::render::{frame_glyphs, interpolate_handle, opacity, RenderStyle};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn unit_grid(nt: usize) -> GridSpec {
    GridSpec::over_rect(DomainRect::new(0.0, 0.0, 1.0, 1.0), 64, 64, nt, 0.0, 0.05)
}

fn field(kind: &str) -> VectorField2D {
    SyntheticField::parse(kind, &[]).unwrap().sample_on(unit_grid(40)).unwrap()
}

/// Eight grid cells of separation; the raster pixel is then two cells.
fn params(field: &VectorField2D, seed: u64) -> PlacementParams {
    let mut p = PlacementParams::for_field(field, 8.0 * field.grid().dx);
    p.rng_seed = seed;
    p
}

struct DipoleRun {
    scene: Scene,
    set: ArrowSet,
    without_s3: ArrowSet,
    elapsed: Duration,
}

fn dipole_run() -> DipoleRun {
    let f = field("dipole");
    let start = Instant::now();
    let scene = Scene::new(&f, params(&f, 0), &DensityMode::Uniform).unwrap();
    let set = scene.place().unwrap();
    let elapsed = start.elapsed();
    let mut p = scene.params;
    p.backward_stage = false;
    let without_s3 = arrowflow::placement::place_moving_arrows(&scene.field, &scene.density, p).unwrap();
    DipoleRun {
        scene,
        set,
        without_s3,
        elapsed,
    }
}

fn separation_and_coverage(set: &ArrowSet, scene: &Scene) -> (f64, f64, usize) {
    let mut min_sep = f64::INFINITY;
    let mut min_cov = 1.0f64;
    let mut refill = 0;
    for t in 0..set.step_count() {
        min_sep = min_sep.min(separation_audit(set, &scene.density, t, true));
        min_cov = min_cov.min(coverage_audit(set, &scene.field, &scene.density, t));
        refill += count_insertable(set, &scene.field, &scene.density, t);
    }
    (min_sep, min_cov, refill)
}

fn total_lifetime(set: &ArrowSet) -> usize {
    set.arrows().iter().map(Arrow::lifetime).sum()
}

fn criterion_1(run: &DipoleRun) -> Outcome {
    let d_sep = run.scene.params.d_sep;
    let mut worst = f64::INFINITY;
    let mut failing = Vec::new();
    for t in 0..run.set.step_count() {
        let s = separation_audit(&run.set, &run.scene.density, t, true);
        worst = worst.min(s);
        if s < d_sep {
            failing.push(t);
        }
    }
    let fast = run.elapsed < Duration::from_secs(60);
    outcome(
        failing.is_empty() && fast,
        format!(
            "{} arrows, min oracle separation {worst:.6} vs d_sep {d_sep:.6}, failing steps {failing:?}, placement {:.2?}",
            run.set.arrows().len(),
            run.elapsed
        ),
    )
}

fn criterion_2(run: &DipoleRun) -> Outcome {
    let mut min_cov = 1.0f64;
    let mut refill = 0;
    for t in 0..run.set.step_count() {
        min_cov = min_cov.min(coverage_audit(&run.set, &run.scene.field, &run.scene.density, t));
        refill += count_insertable(&run.set, &run.scene.field, &run.scene.density, t);
    }
    outcome(
        min_cov == 1.0 && refill == 0,
        format!("min coverage {min_cov}, arrows added by a repeated completion pass {refill}"),
    )
}

fn criterion_3(run: &DipoleRun) -> Outcome {
    let (with, without) = (total_lifetime(&run.set), total_lifetime(&run.without_s3));
    let (sep, cov, refill) = separation_and_coverage(&run.set, &run.scene);
    let invariants = sep >= run.scene.params.d_sep && cov == 1.0 && refill == 0;

    let vortex = field("translating_vortex");
    let mut extended = None;
    for seed in 0..3 {
        let mut scene = Scene::new(&vortex, params(&vortex, seed), &DensityMode::Uniform).unwrap();
        let a = scene.place().unwrap();
        scene.params.backward_stage = false;
        let b = scene.place().unwrap();
        let moved = a
            .arrows()
            .iter()
            .zip(b.arrows())
            .filter(|(x, y)| x.birth_step < y.birth_step)
            .count();
        if moved > 0 {
            extended = Some((seed, moved));
            break;
        }
    }
    outcome(
        with >= without && invariants && extended.is_some(),
        format!(
            "dipole lifetimes {with} with backward stage vs {without} without; invariants hold: {invariants}; \
             vortex births moved earlier (seed, arrows): {extended:?}"
        ),
    )
}

fn criterion_4() -> Outcome {
    let vortex = field("translating_vortex");
    let mut wins = 0;
    let mut pairs = Vec::new();
    for seed in 0..10 {
        let mut totals = [0; 2];
        for (k, priority) in [PriorityOrder::LongestFirst, PriorityOrder::Random].into_iter().enumerate() {
            let mut p = params(&vortex, seed);
            p.priority = priority;
            let set = Scene::new(&vortex, p, &DensityMode::Uniform).unwrap().place().unwrap();
            totals[k] = popping_score(&set).total();
        }
        wins += usize::from(totals[0] <= totals[1]);
        pairs.push((totals[0], totals[1]));
    }
    outcome(
        wins >= 8,
        format!("longest-first <= random in {wins}/10 runs; (longest, random) popping {pairs:?}"),
    )
}

/// Shortest paths by repeated full relaxation sweeps until nothing changes.
fn sweep_oracle(raster: &RasterSpec, rho: &[f64], sources: &[usize]) -> Vec<f64> {
    let (w, h) = (raster.width as i64, raster.height as i64);
    let mut d = vec![f64::INFINITY; rho.len()];
    for &s in sources {
        d[s] = 0.0;
    }
    loop {
        let mut changed = false;
        for v in 0..d.len() {
            let (i, j) = (v as i64 % w, v as i64 / w);
            for (di, dj) in [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)] {
                let (ni, nj) = (i + di, j + dj);
                if ni < 0 || nj < 0 || ni >= w || nj >= h {
                    continue;
                }
                let u = (nj * w + ni) as usize;
                let len = if di != 0 && dj != 0 { SQRT_2 } else { 1.0 };
                let cand = d[u] + raster.pixel_size * len * (rho[u] + rho[v]) / 2.0;
                if cand < d[v] {
                    d[v] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            return d;
        }
    }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (w, h) = (rng.random_range(4..=64), rng.random_range(4..=64));
        let raster = RasterSpec {
            width: w,
            height: h,
            origin: Vec2::ZERO,
            pixel_size: 1.0 / 64.0,
        };
        let rho: Vec<f64> = (0..w * h).map(|_| rng.random_range(1.0..=10.0)).collect();
        let density = DensityMap::from_values(raster, rho.clone(), 10.0).unwrap();
        let mut map = DistanceMap::new(raster, &density).unwrap();
        let mut sources = Vec::new();
        for _ in 0..rng.random_range(1..=10) {
            let pts: Vec<Vec2> = (0..rng.random_range(1..=5))
                .map(|_| {
                    Vec2::new(
                        rng.random_range(0.0..w as f64) * raster.pixel_size,
                        rng.random_range(0.0..h as f64) * raster.pixel_size,
                    )
                })
                .collect();
            let px = rasterize_polyline(&pts, &raster);
            map.insert_pixels(&px);
            sources.extend(px);
        }
        let oracle = sweep_oracle(&raster, &rho, &sources);
        for (a, b) in map.values().iter().zip(&oracle) {
            worst = worst.max((a - b).abs() / b.max(1e-300).max(1.0));
        }
    }

    let mut octile = 0.0f64;
    for _ in 0..20 {
        let (w, h) = (rng.random_range(4..=64), rng.random_range(4..=64));
        let raster = RasterSpec {
            width: w,
            height: h,
            origin: Vec2::ZERO,
            pixel_size: 0.25,
        };
        let mut map = DistanceMap::new(raster, &DensityMap::uniform(raster)).unwrap();
        let (si, sj) = (rng.random_range(0..w), rng.random_range(0..h));
        map.insert_pixels(&[raster.index(si, sj)]);
        for j in 0..h {
            for i in 0..w {
                let (dx, dy) = (i.abs_diff(si) as f64, j.abs_diff(sj) as f64);
                let exact = 0.25 * (dx.max(dy) + (SQRT_2 - 1.0) * dx.min(dy));
                octile = octile.max((map.value(i, j) - exact).abs() / exact.max(1.0));
            }
        }
    }
    outcome(
        worst <= 1e-12 && octile <= 1e-12,
        format!("max deviation from the sweep oracle {worst:.1e}, from the octile formula {octile:.1e}"),
    )
}

fn criterion_6() -> Outcome {
    let rotation = SyntheticField::RigidRotation {
        omega: 1.0,
        center: Vec2::ZERO,
    };
    // Forward half of a streamlet of length 2 on the unit circle ends at angle 1.
    let error = |h: f64| {
        let cfg = IntegratorConfig {
            step_h: h,
            length_gain: 2.0,
            max_aspect_ratio: 100.0,
            substeps_per_dt: 1,
        };
        let s = integrate_streamlet(&rotation, Vec2::new(1.0, 0.0), 0.0, &cfg, 0.1).unwrap();
        s.points().last().unwrap().distance(Vec2::new(1f64.cos(), 1f64.sin()))
    };
    let mut h = 0.2;
    let mut prev = error(h);
    let mut ratios = Vec::new();
    for _ in 0..3 {
        h /= 2.0;
        let e = error(h);
        if e < 1e-12 {
            break;
        }
        ratios.push(prev / e);
        prev = e;
    }
    outcome(
        ratios.iter().all(|&r| r >= 7.5),
        format!("error ratios per halving from h = 0.2: {ratios:.2?}"),
    )
}

fn criterion_7() -> Outcome {
    let grid = GridSpec::over_rect(DomainRect::new(-1.0, -1.0, 1.0, 1.0), 33, 33, 1, 0.0, 1.0);
    let omega = -1.7;
    let rotation = SyntheticField::RigidRotation {
        omega,
        center: Vec2::new(0.1, -0.2),
    }
    .sample_on(grid)
    .unwrap();
    let shear = VectorField2D::from_fn(grid, |p, _| Vec2::new(p.y, 0.0)).unwrap();
    let interior_error = |f: &VectorField2D, exact: f64| {
        let g = jacobian_frobenius(f, 0);
        let mut worst = 0.0f64;
        for j in 1..32 {
            for i in 1..32 {
                worst = worst.max((g.get(i, j) - exact).abs());
            }
        }
        worst
    };
    let rot = interior_error(&rotation, SQRT_2 * omega.abs());
    let sh = interior_error(&shear, 1.0);
    outcome(
        rot <= 1e-10 && sh <= 1e-10,
        format!("max interior error: rotation {rot:.1e}, shear {sh:.1e}"),
    )
}

fn criterion_8() -> Outcome {
    let f = field("constant");
    let mut means = [0.0; 2];
    for (k, ratio) in [2.0, 1.01].into_iter().enumerate() {
        let mut total = 0.0;
        for seed in 0..5 {
            let mut p = params(&f, seed);
            p.seed_ratio = ratio;
            let set = Scene::new(&f, p, &DensityMode::Uniform).unwrap().place().unwrap();
            total += total_lifetime(&set) as f64 / set.arrows().len() as f64;
        }
        means[k] = total / 5.0;
    }
    outcome(
        means[0] >= means[1],
        format!("mean lifetime {:.3} steps at seed_ratio 2 vs {:.3} at 1.01", means[0], means[1]),
    )
}

fn criterion_9(run: &DipoleRun) -> Outcome {
    let (scene, set) = (&run.scene, &run.set);
    let style = RenderStyle::default();
    let dt = scene.field.grid().dt;
    let eps = 1e-3;
    let handle_bound = 2.0 * scene.field.max_speed() * dt * eps;
    let alpha_bound = 1.5 * eps / style.fade_length;

    let mut candidates: Vec<&Arrow> = set.arrows().iter().filter(|a| a.lifetime() >= 2).collect();
    candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
    let picked = &candidates[..3.min(candidates.len())];
    let (mut worst_h, mut worst_a, mut worst_knot) = (0.0f64, 0.0f64, 0.0f64);
    for a in picked {
        let n = ((a.death_step - a.birth_step) as f64 / eps).round() as usize;
        let tau = |k: usize| a.birth_step as f64 + k as f64 * eps;
        let mut prev_h = interpolate_handle(a, tau(0), dt).unwrap();
        let mut prev_a = opacity(a, tau(0), style.fade_length, set.last_step());
        for k in 1..=n {
            let h = interpolate_handle(a, tau(k), dt).unwrap();
            let al = opacity(a, tau(k), style.fade_length, set.last_step());
            worst_h = worst_h.max(h.distance(prev_h) / handle_bound);
            worst_a = worst_a.max((al - prev_a).abs() / alpha_bound);
            prev_h = h;
            prev_a = al;
        }
        for step in a.birth_step..=a.death_step {
            let glyphs = frame_glyphs(set, &scene.field, &scene.density, step as f64, &style).unwrap();
            if let Some(g) = glyphs.iter().find(|g| g.arrow_id == a.id) {
                let rec = &a.record(step).unwrap().streamlet;
                if g.streamlet.points().len() != rec.points().len() {
                    worst_knot = f64::INFINITY;
                    continue;
                }
                for (p, q) in g.streamlet.points().iter().zip(rec.points()) {
                    worst_knot = worst_knot.max(p.distance(*q));
                }
            }
        }
    }
    outcome(
        picked.len() == 3 && worst_h <= 1.0 && worst_a <= 1.0 + 1e-9 && worst_knot <= 1e-9,
        format!(
            "arrows {:?}: handle step / bound {worst_h:.3}, opacity step / bound {worst_a:.3}, knot streamlet deviation {worst_knot:.1e}",
            picked.iter().map(|a| a.id).collect::<Vec<_>>()
        ),
    )
}

fn run_cli(args: &[&str], cwd: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_arrowflow"))
        .args(args)
        .current_dir(cwd)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut ok = run_cli(&["synth", "--kind", "dipole", "--grid", "48x48x12", "--out", "f.vf2d"], d);
    for k in ["a", "b"] {
        ok &= run_cli(
            &["generate", "--input", "f.vf2d", "--density", "jacobian", "--rng-seed", "3", "--out", &format!("{k}.txt")],
            d,
        );
        ok &= run_cli(
            &["render", "--arrows", &format!("{k}.txt"), "--input", "f.vf2d", "--out", &format!("frames_{k}"), "--frames-per-step", "2", "--size", "160x160"],
            d,
        );
    }
    if !ok {
        return outcome(false, "a CLI command failed");
    }
    let same_set = std::fs::read(d.join("a.txt")).unwrap() == std::fs::read(d.join("b.txt")).unwrap();
    let mut frames = 0;
    let mut same_frames = true;
    for entry in std::fs::read_dir(d.join("frames_a")).unwrap() {
        let name = entry.unwrap().file_name();
        if !name.to_string_lossy().ends_with(".png") {
            continue;
        }
        frames += 1;
        same_frames &= std::fs::read(d.join("frames_a").join(&name)).ok() == std::fs::read(d.join("frames_b").join(&name)).ok();
    }
    outcome(
        same_set && same_frames && frames == 23,
        format!("arrow sets identical: {same_set}; {frames} frames identical: {same_frames}"),
    )
}

fn criterion_11(run: &DipoleRun) -> Outcome {
    outcome(
        run.elapsed < Duration::from_secs(60),
        format!("dipole 64x64x40 placement in {:.2?} (bound 60 s)", run.elapsed),
    )
}

fn main() {
    let run = dipole_run();
    let results = [
        ("1 separation", criterion_1(&run)),
        ("2 saturation", criterion_2(&run)),
        ("3 backward stage", criterion_3(&run)),
        ("4 length priority", criterion_4()),
        ("5 distance map", criterion_5()),
        ("6 RK4 order", criterion_6()),
        ("7 Jacobian density", criterion_7()),
        ("8 seeding margin", criterion_8()),
        ("9 render continuity", criterion_9(&run)),
        ("10 determinism", criterion_10()),
        ("11 performance", criterion_11(&run)),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("criterion {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
