//! Weighted distance to the arrows placed so far.
//!
//! The raster is an 8-connected pixel graph. The edge between neighbors `a`
//! and `b` costs `pixel_size · len · (ρ(a) + ρ(b)) / 2` with `len` either 1
//! or √2 and `ρ` the density, so arrows end up spaced inversely to the
//! density. Every inserted streamlet seeds a multi-source Dijkstra run that
//! only lowers existing values.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::density::DensityMap;
use crate::error::ConfigError;
use crate::geom::Vec2;
use crate::grid::{RasterSpec, ScalarGrid};
use crate::integrate::Streamlet;

const NEIGHBORS: [(isize, isize, f64); 8] = [
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, std::f64::consts::SQRT_2),
    (-1, 1, std::f64::consts::SQRT_2),
    (1, -1, std::f64::consts::SQRT_2),
    (-1, -1, std::f64::consts::SQRT_2),
];

#[derive(Clone, Copy, Debug)]
struct Entry {
    dist: f64,
    idx: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // min-heap on distance, ties by pixel index
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

#[derive(Clone, Debug)]
pub struct DistanceMap {
    raster: RasterSpec,
    density: Vec<f64>,
    dist: Vec<f64>,
    cutoff: f64,
    heap: BinaryHeap<Entry>,
}

impl DistanceMap {
    /// Empty map (every pixel at +∞). `density` must live on `raster`.
    pub fn new(raster: RasterSpec, density: &DensityMap) -> Result<Self, ConfigError> {
        if *density.raster() != raster {
            return Err(ConfigError::invalid("density", "raster does not match the distance map"));
        }
        Ok(DistanceMap {
            density: density.values().to_vec(),
            dist: vec![f64::INFINITY; raster.len()],
            raster,
            cutoff: f64::INFINITY,
            heap: BinaryHeap::new(),
        })
    }

    /// Stops expanding pixels farther than `cutoff`. Values up to the cutoff
    /// stay exact; values beyond it are only known to exceed it.
    pub fn with_cutoff(mut self, cutoff: f64) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn raster(&self) -> &RasterSpec {
        &self.raster
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn values(&self) -> &[f64] {
        &self.dist
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.dist[self.raster.index(i, j)]
    }

    /// Weight of the edge from pixel `a` to its neighbor `b`, `len` ∈ {1, √2}.
    #[inline]
    pub fn edge_weight(&self, a: usize, b: usize, len: f64) -> f64 {
        self.raster.pixel_size * len * ((self.density[a] + self.density[b]) / 2.0)
    }

    pub fn insert_arrow(&mut self, streamlet: &Streamlet) {
        let pixels = rasterize_streamlet(streamlet, &self.raster);
        self.insert_pixels(&pixels);
    }

    /// Multi-source Dijkstra from `sources` (at distance 0), merged into the
    /// current values by pointwise minimum.
    pub fn insert_pixels(&mut self, sources: &[usize]) {
        for &s in sources {
            if self.dist[s] > 0.0 {
                self.dist[s] = 0.0;
                self.heap.push(Entry { dist: 0.0, idx: s });
            }
        }
        let (w, h) = (self.raster.width as isize, self.raster.height as isize);
        while let Some(Entry { dist, idx }) = self.heap.pop() {
            if dist > self.dist[idx] {
                continue;
            }
            if dist > self.cutoff {
                break;
            }
            let (i, j) = self.raster.coords(idx);
            for &(di, dj, len) in &NEIGHBORS {
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if ni < 0 || nj < 0 || ni >= w || nj >= h {
                    continue;
                }
                let n = nj as usize * self.raster.width + ni as usize;
                let nd = dist + self.edge_weight(idx, n, len);
                if nd < self.dist[n] {
                    self.dist[n] = nd;
                    self.heap.push(Entry { dist: nd, idx: n });
                }
            }
        }
        self.heap.clear();
    }

    /// Smallest map value under the rasterized streamlet (+∞ on an empty map).
    pub fn distance_to_arrows(&self, streamlet: &Streamlet) -> f64 {
        self.distance_at_pixels(&rasterize_streamlet(streamlet, &self.raster))
    }

    pub fn distance_at_pixels(&self, pixels: &[usize]) -> f64 {
        pixels.iter().map(|&p| self.dist[p]).fold(f64::INFINITY, f64::min)
    }

    /// Snapshot as a pixel-center scalar grid (for DM2D dumps).
    pub fn to_grid(&self) -> ScalarGrid {
        self.raster.center_grid(self.dist.clone())
    }
}

/// Pixels crossed by the streamlet polyline, sorted and without duplicates.
pub fn rasterize_streamlet(streamlet: &Streamlet, raster: &RasterSpec) -> Vec<usize> {
    rasterize_polyline(streamlet.points(), raster)
}

/// 8-connected line rasterization of every segment. Vertices outside the
/// raster are dropped.
pub fn rasterize_polyline(points: &[Vec2], raster: &RasterSpec) -> Vec<usize> {
    let cells: Vec<(usize, usize)> = points.iter().filter_map(|p| raster.pixel_of(*p)).collect();
    let mut out = Vec::with_capacity(cells.len() * 2);
    match cells.as_slice() {
        [] => {}
        [only] => out.push(raster.index(only.0, only.1)),
        _ => {
            for w in cells.windows(2) {
                bresenham(w[0], w[1], |i, j| out.push(raster.index(i, j)));
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn bresenham(a: (usize, usize), b: (usize, usize), mut visit: impl FnMut(usize, usize)) {
    let (mut x, mut y) = (a.0 as isize, a.1 as isize);
    let (x1, y1) = (b.0 as isize, b.1 as isize);
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        visit(x as usize, y as usize);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::DomainRect;
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    fn raster(n: usize) -> RasterSpec {
        RasterSpec::covering(DomainRect::new(0.0, 0.0, n as f64, n as f64), 1.0).unwrap()
    }

    fn point_streamlet(p: Vec2) -> Streamlet {
        Streamlet::from_points(vec![p], 0, 0.1, Vec2::ZERO)
    }

    fn octile(dx: usize, dy: usize) -> f64 {
        let (a, b) = (dx.max(dy) as f64, dx.min(dy) as f64);
        a + (SQRT_2 - 1.0) * b
    }

    #[test]
    fn new_map_is_infinite() {
        let r = raster(8);
        let m = DistanceMap::new(r, &DensityMap::uniform(r)).unwrap();
        assert!(m.values().iter().all(|v| *v == f64::INFINITY));
        assert_eq!(m.distance_to_arrows(&point_streamlet(Vec2::new(3.5, 3.5))), f64::INFINITY);
        assert!(DistanceMap::new(raster(9), &DensityMap::uniform(r)).is_err());
    }

    #[test]
    fn single_source_offset_three_four() {
        let r = RasterSpec::covering(DomainRect::new(0.0, 0.0, 2.0, 2.0), 0.125).unwrap();
        let mut m = DistanceMap::new(r, &DensityMap::uniform(r)).unwrap();
        m.insert_arrow(&point_streamlet(r.pixel_center(5, 5)));
        let expected = 0.125 * (4.0 + 3.0 * (SQRT_2 - 1.0));
        assert!((m.value(8, 9) - expected).abs() < 1e-12);
        assert!((m.value(8, 9) / 0.125 - 5.243).abs() < 1e-3);
        let cand = point_streamlet(r.pixel_center(8, 9));
        assert!((m.distance_to_arrows(&cand) - expected).abs() < 1e-12);
        assert_eq!(m.distance_to_arrows(&point_streamlet(r.pixel_center(5, 5))), 0.0);
    }

    #[test]
    fn doubled_density_doubles_distances() {
        let r = raster(20);
        let mut one = DistanceMap::new(r, &DensityMap::uniform(r)).unwrap();
        let two_map = DensityMap::from_values(r, vec![2.0; r.len()], 4.0).unwrap();
        let mut two = DistanceMap::new(r, &two_map).unwrap();
        let s = Streamlet::from_points(vec![Vec2::new(3.2, 4.1), Vec2::new(9.7, 12.3)], 0, 0.1, Vec2::ZERO);
        one.insert_arrow(&s);
        two.insert_arrow(&s);
        for (a, b) in one.values().iter().zip(two.values()) {
            assert_eq!(*b, 2.0 * *a);
        }
    }

    #[test]
    fn insertion_is_idempotent() {
        let r = raster(16);
        let mut m = DistanceMap::new(r, &DensityMap::uniform(r)).unwrap();
        let s = Streamlet::from_points(vec![Vec2::new(1.5, 1.5), Vec2::new(7.5, 3.5), Vec2::new(9.0, 12.0)], 1, 0.1, Vec2::ZERO);
        m.insert_arrow(&s);
        let snapshot = m.values().to_vec();
        m.insert_arrow(&s);
        assert_eq!(m.values(), &snapshot[..]);
        assert_eq!(m.distance_to_arrows(&s), 0.0);
    }

    #[test]
    fn rasterization_counts() {
        let r = raster(16);
        let seg = Streamlet::from_points(vec![Vec2::new(2.5, 3.5), Vec2::new(10.5, 3.5)], 0, 0.1, Vec2::ZERO);
        assert_eq!(rasterize_streamlet(&seg, &r).len(), 9);
        assert_eq!(rasterize_streamlet(&point_streamlet(Vec2::new(4.2, 4.9)), &r), vec![4 * 16 + 4]);
        let loop_pts: Vec<Vec2> = (0..=40)
            .map(|k| {
                let a = k as f64 / 40.0 * std::f64::consts::TAU;
                Vec2::new(8.0 + 5.0 * a.cos(), 8.0 + 5.0 * a.sin())
            })
            .collect();
        let px = rasterize_polyline(&loop_pts, &r);
        let mut d = px.clone();
        d.dedup();
        assert_eq!(d, px);
        assert!(px.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn cutoff_keeps_values_below_it_exact() {
        let r = raster(32);
        let mut full = DistanceMap::new(r, &DensityMap::uniform(r)).unwrap();
        let mut cut = DistanceMap::new(r, &DensityMap::uniform(r)).unwrap().with_cutoff(5.0);
        let s = point_streamlet(Vec2::new(10.5, 10.5));
        full.insert_arrow(&s);
        cut.insert_arrow(&s);
        for (a, b) in full.values().iter().zip(cut.values()) {
            if *a <= 5.0 {
                assert_eq!(a, b);
            } else {
                assert!(*b > 5.0);
            }
        }
        assert!(cut.values().iter().any(|v| v.is_infinite()));
    }

    fn random_map(n: usize, seed: &[f64]) -> (RasterSpec, DensityMap) {
        let r = raster(n);
        let vals = (0..r.len()).map(|i| 1.0 + 9.0 * seed[i % seed.len()]).collect();
        (r, DensityMap::from_values(r, vals, 10.0).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn uniform_density_matches_octile(n in 4usize..24, si in 0usize..24, sj in 0usize..24) {
            let (si, sj) = (si % n, sj % n);
            let r = raster(n);
            let mut m = DistanceMap::new(r, &DensityMap::uniform(r)).unwrap();
            m.insert_pixels(&[r.index(si, sj)]);
            for j in 0..n {
                for i in 0..n {
                    let expect = octile(i.abs_diff(si), j.abs_diff(sj));
                    prop_assert!((m.value(i, j) - expect).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn weighted_map_is_lipschitz_and_monotone(seed in prop::collection::vec(0.0f64..1.0, 7..40),
                                                  sources in prop::collection::vec((0usize..20, 0usize..20), 1..5)) {
            let (r, d) = random_map(20, &seed);
            let mut m = DistanceMap::new(r, &d).unwrap();
            for (i, j) in sources {
                let before = m.values().to_vec();
                m.insert_pixels(&[r.index(i, j)]);
                prop_assert!(m.values().iter().zip(&before).all(|(a, b)| a <= b));
                prop_assert_eq!(m.value(i, j), 0.0);
            }
            for idx in 0..r.len() {
                let (i, j) = r.coords(idx);
                for &(di, dj, len) in &NEIGHBORS {
                    let (ni, nj) = (i as isize + di, j as isize + dj);
                    if ni < 0 || nj < 0 || ni >= 20 || nj >= 20 { continue; }
                    let n = r.index(ni as usize, nj as usize);
                    let w = m.edge_weight(idx, n, len);
                    prop_assert!((m.values()[idx] - m.values()[n]).abs() <= w * (1.0 + 1e-12));
                }
            }
        }

        #[test]
        fn triangle_inequality(seed in prop::collection::vec(0.0f64..1.0, 5..30),
                               a in (0usize..16, 0usize..16), b in (0usize..16, 0usize..16), c in (0usize..16, 0usize..16)) {
            let (r, d) = random_map(16, &seed);
            let from = |p: (usize, usize)| {
                let mut m = DistanceMap::new(r, &d).unwrap();
                m.insert_pixels(&[r.index(p.0, p.1)]);
                m
            };
            let (ma, mb) = (from(a), from(b));
            let ab = ma.value(b.0, b.1);
            let bc = mb.value(c.0, c.1);
            let ac = ma.value(c.0, c.1);
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert!((ab - mb.value(a.0, a.1)).abs() < 1e-12);
        }
    }
}
