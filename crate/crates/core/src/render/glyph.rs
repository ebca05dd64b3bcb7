//! Arrow glyph geometry: the unit outline, its warp along a streamlet, and
//! the blend toward a disc.

use std::f64::consts::TAU;

use crate::geom::Vec2;
use crate::integrate::Streamlet;

/// Glyph proportions relative to the support: `u` runs tail to tip over
/// `[0, 1]`, `w` across over `[-0.5, 0.5]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlyphShape {
    /// Head length as a fraction of the support length.
    pub head_length: f64,
    /// Head width as a fraction of the support thickness.
    pub head_width: f64,
    /// Shaft width as a fraction of the support thickness.
    pub shaft_width: f64,
}

impl Default for GlyphShape {
    fn default() -> Self {
        GlyphShape {
            head_length: 0.35,
            head_width: 1.0,
            shaft_width: 0.4,
        }
    }
}

/// Samples along each unit of `u` on the long edges of the outline.
const EDGE_DENSITY: f64 = 48.0;

impl GlyphShape {
    /// Counter-clockwise outline in `(u, w)` coordinates, densely subdivided
    /// along `u` so it bends smoothly when warped. The vertex count depends
    /// only on the shape.
    pub fn unit_outline(&self) -> Vec<(f64, f64)> {
        let (s, h, b) = (self.shaft_width / 2.0, self.head_width / 2.0, 1.0 - self.head_length);
        let corners = [
            (0.0, -s),
            (b, -s),
            (b, -h),
            (1.0, 0.0),
            (b, h),
            (b, s),
            (0.0, s),
        ];
        let mut out = Vec::new();
        for (i, &a) in corners.iter().enumerate() {
            let z = corners[(i + 1) % corners.len()];
            let n = ((z.0 - a.0).abs() * EDGE_DENSITY).ceil().max(1.0) as usize;
            for k in 0..n {
                let t = k as f64 / n as f64;
                out.push((a.0 + (z.0 - a.0) * t, a.1 + (z.1 - a.1) * t));
            }
        }
        out
    }
}

/// Maps glyph coordinates onto a streamlet: `u` follows arc length from the
/// backward tip, `w` is scaled by the support width along smoothed normals.
/// Streamlets shorter than the width map onto a square centered on the handle
/// and oriented by the extremity vector.
pub struct GlyphWarp<'a> {
    streamlet: &'a Streamlet,
    width: f64,
    cum: Vec<f64>,
    tangents: Vec<Vec2>,
    square: Option<(Vec2, Vec2)>,
}

impl<'a> GlyphWarp<'a> {
    pub fn new(streamlet: &'a Streamlet, width: f64) -> Self {
        let pts = streamlet.points();
        if streamlet.arc_length() < width || pts.len() < 2 {
            let dir = streamlet.extremity_vector().normalized().unwrap_or(Vec2::new(1.0, 0.0));
            return GlyphWarp {
                streamlet,
                width,
                cum: Vec::new(),
                tangents: Vec::new(),
                square: Some((streamlet.handle(), dir)),
            };
        }
        let mut cum = vec![0.0];
        let seg_dirs: Vec<Option<Vec2>> = pts.windows(2).map(|w| (w[1] - w[0]).normalized()).collect();
        for w in pts.windows(2) {
            cum.push(cum.last().unwrap() + w[0].distance(w[1]));
        }
        let fallback = seg_dirs.iter().flatten().next().copied().unwrap_or(Vec2::new(1.0, 0.0));
        let tangents = (0..pts.len())
            .map(|i| {
                let before = i.checked_sub(1).and_then(|k| seg_dirs[k]);
                let after = seg_dirs.get(i).copied().flatten();
                match (before, after) {
                    (Some(a), Some(b)) => (a + b).normalized().unwrap_or(b),
                    (Some(d), None) | (None, Some(d)) => d,
                    (None, None) => fallback,
                }
            })
            .collect();
        GlyphWarp {
            streamlet,
            width,
            cum,
            tangents,
            square: None,
        }
    }

    /// Whether the support degenerated to a square.
    pub fn is_square(&self) -> bool {
        self.square.is_some()
    }

    pub fn map(&self, u: f64, w: f64) -> Vec2 {
        if let Some((center, dir)) = self.square {
            return center + dir * ((u - 0.5) * self.width) + dir.perp() * (w * self.width);
        }
        let pts = self.streamlet.points();
        let s = u.clamp(0.0, 1.0) * self.cum[self.cum.len() - 1];
        let k = match self.cum.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(k) => k.min(pts.len() - 2),
            Err(k) => k.saturating_sub(1).min(pts.len() - 2),
        };
        let seg = self.cum[k + 1] - self.cum[k];
        let t = if seg > 0.0 { (s - self.cum[k]) / seg } else { 0.0 };
        let p = pts[k].lerp(pts[k + 1], t);
        let tan = self.tangents[k]
            .lerp(self.tangents[k + 1], t)
            .normalized()
            .unwrap_or(self.tangents[k]);
        p + tan.perp() * (w * self.width)
    }
}

/// Arrow-to-disc blend factor: 0 draws a full arrow, 1 a disc.
/// `ratio = arc_length / thickness`; the blend is linear between ratio 1 and
/// `r_full`.
pub fn morph_parameter(arc_length: f64, thickness: f64, r_full: f64) -> f64 {
    let ratio = arc_length / thickness;
    ((r_full - ratio) / (r_full - 1.0)).clamp(0.0, 1.0)
}

/// Outline polygon for a glyph of support width `width` on `streamlet`,
/// blended with weight `m` toward a disc of diameter `disc_factor · width`
/// centered on the handle. Both outlines have the same vertex count, and the
/// disc is rotated with the extremity vector so the blend does not twist.
pub fn warp_glyph(streamlet: &Streamlet, width: f64, m: f64, shape: &GlyphShape, disc_factor: f64) -> Vec<Vec2> {
    let unit = shape.unit_outline();
    let warp = GlyphWarp::new(streamlet, width);
    let m = m.clamp(0.0, 1.0);
    let arrow: Vec<Vec2> = unit.iter().map(|&(u, w)| warp.map(u, w)).collect();
    if m == 0.0 {
        return arrow;
    }
    let disc = disc_outline(streamlet, &unit, width * disc_factor / 2.0);
    if m == 1.0 {
        return disc;
    }
    arrow.iter().zip(&disc).map(|(a, d)| a.lerp(*d, m)).collect()
}

/// Circle with one vertex per outline vertex, spaced by the outline's own
/// perimeter fractions.
fn disc_outline(streamlet: &Streamlet, unit: &[(f64, f64)], radius: f64) -> Vec<Vec2> {
    let dir = streamlet.extremity_vector().normalized().unwrap_or(Vec2::new(1.0, 0.0));
    let n = unit.len();
    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    for i in 0..n {
        cum.push(acc);
        let (a, b) = (unit[i], unit[(i + 1) % n]);
        acc += (b.0 - a.0).hypot(b.1 - a.1);
    }
    let start = unit[0].1.atan2(unit[0].0 - 0.5);
    let c = streamlet.handle();
    cum.iter()
        .map(|f| {
            let th = start + TAU * f / acc;
            c + dir * (radius * th.cos()) + dir.perp() * (radius * th.sin())
        })
        .collect()
}

/// Signed area (positive when counter-clockwise).
pub fn polygon_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        / 2.0
}
