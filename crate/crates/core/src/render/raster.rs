//! RGBA frames and anti-aliased polygon filling.

use std::path::Path;

use crate::geom::Vec2;

/// 8-bit RGBA image, row-major from the top row. Colors are stored with
/// straight (non-premultiplied) alpha.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

pub type Rgba = [u8; 4];

impl FrameImage {
    pub fn filled(width: u32, height: u32, color: Rgba) -> Self {
        let data = color.iter().copied().cycle().take(width as usize * height as usize * 4).collect();
        FrameImage { width, height, data }
    }

    /// Loads a PNG (or any decodable image) and scales it to the given size.
    pub fn load_scaled(path: impl AsRef<Path>, width: u32, height: u32) -> crate::Result<Self> {
        let img = image::open(path)?.to_rgba8();
        let img = if img.dimensions() == (width, height) {
            img
        } else {
            image::imageops::resize(&img, width, height, image::imageops::FilterType::Triangle)
        };
        Ok(FrameImage {
            width,
            height,
            data: img.into_raw(),
        })
    }

    pub fn pixel(&self, x: u32, y: u32) -> Rgba {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        [self.data[i], self.data[i + 1], self.data[i + 2], self.data[i + 3]]
    }

    /// Source-over compositing of `color` at extra opacity `alpha`.
    pub fn blend(&mut self, x: u32, y: u32, color: Rgba, alpha: f64) {
        let a = alpha.clamp(0.0, 1.0) * color[3] as f64 / 255.0;
        if a <= 0.0 {
            return;
        }
        let i = (y as usize * self.width as usize + x as usize) * 4;
        let px = &mut self.data[i..i + 4];
        let da = px[3] as f64 / 255.0;
        let oa = a + da * (1.0 - a);
        for c in 0..3 {
            let v = (color[c] as f64 * a + px[c] as f64 * da * (1.0 - a)) / oa;
            px[c] = v.round().clamp(0.0, 255.0) as u8;
        }
        px[3] = (oa * 255.0).round() as u8;
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> crate::Result<()> {
        image::save_buffer_with_format(
            path,
            &self.data,
            self.width,
            self.height,
            image::ExtendedColorType::Rgba8,
            image::ImageFormat::Png,
        )?;
        Ok(())
    }
}

/// Subsamples per pixel along each axis.
pub const SUPERSAMPLE: usize = 4;

/// Fills the union of `contours` (image coordinates, pixel `(x, y)` covering
/// `[x, x+1) × [y, y+1)`) under the nonzero winding rule, calling
/// `paint(x, y, coverage)` for every pixel with nonzero coverage.
pub fn fill_polygons(contours: &[Vec<Vec2>], width: u32, height: u32, mut paint: impl FnMut(u32, u32, f64)) {
    let edges: Vec<(Vec2, Vec2)> = contours
        .iter()
        .flat_map(|c| (0..c.len()).map(move |i| (c[i], c[(i + 1) % c.len()])))
        .filter(|(a, b)| a.y != b.y)
        .collect();
    if edges.is_empty() {
        return;
    }
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (a, _) in &edges {
        xmin = xmin.min(a.x);
        xmax = xmax.max(a.x);
        ymin = ymin.min(a.y);
        ymax = ymax.max(a.y);
    }
    for c in contours.iter().flatten() {
        xmin = xmin.min(c.x);
        xmax = xmax.max(c.x);
        ymin = ymin.min(c.y);
        ymax = ymax.max(c.y);
    }
    let x0 = (xmin.floor().max(0.0)) as i64;
    let x1 = (xmax.ceil().min(width as f64)) as i64;
    let y0 = (ymin.floor().max(0.0)) as i64;
    let y1 = (ymax.ceil().min(height as f64)) as i64;
    if x0 >= x1 || y0 >= y1 {
        return;
    }
    let bw = (x1 - x0) as usize;
    let ss = SUPERSAMPLE as f64;
    let mut counts = vec![0u32; bw];
    let mut crossings: Vec<(f64, i32)> = Vec::new();
    for py in y0..y1 {
        counts.iter_mut().for_each(|c| *c = 0);
        for sy in 0..SUPERSAMPLE {
            let y = py as f64 + (sy as f64 + 0.5) / ss;
            crossings.clear();
            for &(a, b) in &edges {
                let (lo, hi, dir) = if a.y < b.y { (a, b, 1) } else { (b, a, -1) };
                if y >= lo.y && y < hi.y {
                    let x = lo.x + (y - lo.y) / (hi.y - lo.y) * (hi.x - lo.x);
                    crossings.push((x, dir));
                }
            }
            crossings.sort_by(|p, q| p.0.total_cmp(&q.0));
            let mut winding = 0;
            for k in 0..crossings.len() {
                winding += crossings[k].1;
                if winding == 0 || k + 1 == crossings.len() {
                    continue;
                }
                // Subsample columns whose centers lie in [xa, xb).
                let (xa, xb) = (crossings[k].0, crossings[k + 1].0);
                let first = ((xa - x0 as f64) * ss - 0.5).ceil().max(0.0) as i64;
                let last = ((xb - x0 as f64) * ss - 0.5).ceil().min((bw * SUPERSAMPLE) as f64) as i64;
                for s in first..last {
                    counts[s as usize / SUPERSAMPLE] += 1;
                }
            }
        }
        let total = (SUPERSAMPLE * SUPERSAMPLE) as f64;
        for (i, &c) in counts.iter().enumerate() {
            if c > 0 {
                paint((x0 + i as i64) as u32, py as u32, c as f64 / total);
            }
        }
    }
}

/// Quads of width `width` along every edge of `poly`, each counter-clockwise
/// so their nonzero union is the stroke.
pub fn stroke_contours(poly: &[Vec2], width: f64) -> Vec<Vec<Vec2>> {
    let n = poly.len();
    let half = width / 2.0;
    (0..n)
        .filter_map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let d = (b - a).normalized()?;
            let (e, o) = (d * half, d.perp() * half);
            let quad = vec![a - e - o, b + e - o, b + e + o, a - e + o];
            Some(if super::glyph::polygon_area(&quad) < 0.0 {
                quad.into_iter().rev().collect()
            } else {
                quad
            })
        })
        .collect()
}
