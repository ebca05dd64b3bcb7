//! Audits of a finished [`ArrowSet`]: separation, coverage, popping, and
//! time-resolution checks, with a CSV report.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::density::{DensityMap, DensitySeries};
use crate::distmap::{rasterize_streamlet, DistanceMap};
use crate::field::VectorField2D;
use crate::grid::RasterSpec;
use crate::integrate::integrate_streamlet;
use crate::placement::{Arrow, ArrowSet};

/// Smallest weighted distance between two arrows alive at `step` (+∞ with
/// fewer than two arrows).
///
/// With `oracle` set, every arrow gets its own from-scratch shortest-path run
/// that shares no code with [`DistanceMap`]; otherwise arrows are inserted
/// one by one into an incremental map and each is measured against those
/// before it.
pub fn separation_audit(set: &ArrowSet, density: &DensitySeries, step: usize, oracle: bool) -> f64 {
    let raster = set.raster();
    let pixels: Vec<Vec<usize>> = set
        .alive_at(step)
        .map(|a| rasterize_streamlet(&a.record(step).unwrap().streamlet, raster))
        .collect();
    let rho = density.at_step(step);
    if oracle {
        (0..pixels.len())
            .into_par_iter()
            .map(|i| {
                let dist = dijkstra(raster, rho, &pixels[i]);
                pixels[i + 1..]
                    .iter()
                    .flatten()
                    .map(|&p| dist[p])
                    .fold(f64::INFINITY, f64::min)
            })
            .reduce(|| f64::INFINITY, f64::min)
    } else {
        let mut map = DistanceMap::new(*raster, rho).expect("density raster matches arrow set");
        let mut best = f64::INFINITY;
        for px in &pixels {
            best = best.min(map.distance_at_pixels(px));
            map.insert_pixels(px);
        }
        best
    }
}

/// Plain single-run Dijkstra over the 8-connected pixel graph.
fn dijkstra(raster: &RasterSpec, rho: &DensityMap, sources: &[usize]) -> Vec<f64> {
    let (w, h) = (raster.width, raster.height);
    let mut dist = vec![f64::INFINITY; w * h];
    let mut done = vec![false; w * h];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = 0.0;
        heap.push(Reverse((Ord64(0.0), s)));
    }
    while let Some(Reverse((Ord64(d), u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        let (i, j) = (u % w, u / w);
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if ni < 0 || nj < 0 || ni >= w as i64 || nj >= h as i64 {
                    continue;
                }
                let v = nj as usize * w + ni as usize;
                let len = if di != 0 && dj != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
                let nd = d + raster.pixel_size * len * ((rho.at_pixel(u) + rho.at_pixel(v)) / 2.0);
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Reverse((Ord64(nd), v)));
                }
            }
        }
    }
    dist
}

#[derive(Clone, Copy, PartialEq)]
struct Ord64(f64);

impl Eq for Ord64 {}

impl PartialOrd for Ord64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ord64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Fraction of seed-grid positions whose candidate streamlet at `step` lies
/// within `d_seed` of an alive arrow. A saturated step scores 1.
pub fn coverage_audit(set: &ArrowSet, field: &VectorField2D, density: &DensitySeries, step: usize) -> f64 {
    let params = set.params();
    let map = set.distance_map_at(step, density);
    let time = field.step_time(step);
    let (mut covered, mut total) = (0usize, 0usize);
    for p in set.seed_positions(field) {
        let Ok(s) = integrate_streamlet(field, p, time, &params.integrator, params.thickness) else {
            continue;
        };
        total += 1;
        if map.distance_to_arrows(&s) <= params.d_seed() {
            covered += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        covered as f64 / total as f64
    }
}

/// Births and deaths between consecutive steps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Popping {
    /// `births[t]`: arrows alive at `t` but not at `t - 1` (zero at step 0).
    pub births: Vec<usize>,
    /// `deaths[t]`: arrows alive at `t - 1` but not at `t` (zero at step 0).
    pub deaths: Vec<usize>,
}

impl Popping {
    pub fn total(&self) -> usize {
        self.births.iter().sum::<usize>() + self.deaths.iter().sum::<usize>()
    }
}

/// Popping events. Arrows present at the first step are not births and
/// arrows present at the last step are not deaths.
pub fn popping_score(set: &ArrowSet) -> Popping {
    let n = set.step_count();
    let mut births = vec![0; n];
    let mut deaths = vec![0; n];
    for a in set.arrows() {
        if a.birth_step > 0 {
            births[a.birth_step] += 1;
        }
        if a.death_step + 1 < n {
            deaths[a.death_step + 1] += 1;
        }
    }
    Popping { births, deaths }
}

/// A step where the handle moved farther than the arrow is long.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolutionViolation {
    pub arrow_id: usize,
    /// Destination step of the move.
    pub step: usize,
    pub displacement: f64,
    pub arc_length: f64,
}

/// Flags every move whose handle displacement exceeds the destination
/// step's streamlet arc length.
pub fn time_resolution_audit(set: &ArrowSet) -> Vec<ResolutionViolation> {
    let mut out = Vec::new();
    for a in set.arrows() {
        for t in a.birth_step + 1..=a.death_step {
            let (prev, cur) = (a.record(t - 1).unwrap(), a.record(t).unwrap());
            let displacement = prev.handle.distance(cur.handle);
            let arc_length = cur.streamlet.arc_length();
            if displacement > arc_length {
                out.push(ResolutionViolation {
                    arrow_id: a.id,
                    step: t,
                    displacement,
                    arc_length,
                });
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRow {
    pub step: usize,
    pub alive: usize,
    pub births: usize,
    pub survivors: usize,
    pub deaths: usize,
    pub min_distance: f64,
    pub coverage: f64,
    /// Largest handle displacement over arc length among arrows arriving from
    /// the previous step (0 if none).
    pub max_displacement_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<StepRow>,
    pub d_sep: f64,
    pub arrow_count: usize,
    pub mean_lifetime: f64,
    pub total_popping: usize,
    pub resolution_violations: usize,
}

impl MetricsReport {
    /// Runs every audit. Steps are processed in parallel.
    pub fn build(set: &ArrowSet, field: &VectorField2D, density: &DensitySeries, oracle: bool) -> Self {
        let popping = popping_score(set);
        let rows = (0..set.step_count())
            .into_par_iter()
            .map(|t| {
                let alive = set.alive_at(t).count();
                let births = if t == 0 { alive } else { popping.births[t] };
                StepRow {
                    step: t,
                    alive,
                    births,
                    survivors: alive - births,
                    deaths: popping.deaths[t],
                    min_distance: separation_audit(set, density, t, oracle),
                    coverage: coverage_audit(set, field, density, t),
                    max_displacement_ratio: max_displacement_ratio(set, t),
                }
            })
            .collect();
        let lifetimes: Vec<usize> = set.arrows().iter().map(Arrow::lifetime).collect();
        let mean_lifetime = if lifetimes.is_empty() {
            0.0
        } else {
            lifetimes.iter().sum::<usize>() as f64 / lifetimes.len() as f64
        };
        MetricsReport {
            rows,
            d_sep: set.params().d_sep,
            arrow_count: lifetimes.len(),
            mean_lifetime,
            total_popping: popping.total(),
            resolution_violations: time_resolution_audit(set).len(),
        }
    }

    pub fn separation_ok(&self) -> bool {
        self.rows.iter().all(|r| r.min_distance >= self.d_sep)
    }

    pub fn coverage_ok(&self) -> bool {
        self.rows.iter().all(|r| r.coverage == 1.0)
    }

    /// Header row, one row per step, then `#` summary lines.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("step,alive,births,survivors,deaths,min_distance,coverage,max_displacement_ratio\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.step, r.alive, r.births, r.survivors, r.deaths, r.min_distance, r.coverage, r.max_displacement_ratio
            );
        }
        let _ = writeln!(out, "# d_sep,{}", self.d_sep);
        let _ = writeln!(out, "# arrows,{}", self.arrow_count);
        let _ = writeln!(out, "# mean_lifetime,{}", self.mean_lifetime);
        let _ = writeln!(out, "# total_popping,{}", self.total_popping);
        let _ = writeln!(out, "# resolution_violations,{}", self.resolution_violations);
        let _ = writeln!(out, "# separation_ok,{}", self.separation_ok());
        let _ = writeln!(out, "# coverage_ok,{}", self.coverage_ok());
        out
    }
}

fn max_displacement_ratio(set: &ArrowSet, t: usize) -> f64 {
    if t == 0 {
        return 0.0;
    }
    set.alive_at(t)
        .filter_map(|a| Some((a.record(t - 1)?, a.record(t)?)))
        .map(|(p, c)| {
            let d = p.handle.distance(c.handle);
            match c.streamlet.arc_length() {
                l if l > 0.0 => d / l,
                _ if d > 0.0 => f64::INFINITY,
                _ => 0.0,
            }
        })
        .fold(0.0, f64::max)
}
