//! Scalar rasters: the distance-map pixel grid and generic scalar grids with
//! the DM2D codec.
//!
//! ```text
//! "DM2D" u32 version=1 u32 nx u32 ny
//! f64 x0 f64 y0 f64 dx f64 dy        // position of sample (0, 0) and spacing
//! ny × nx × f32                       // row-major, y increasing
//! ```

use std::path::Path;

use crate::binio::{put_f32, put_f64, put_u32, Reader};
use crate::error::{ConfigError, FormatError};
use crate::geom::{DomainRect, Vec2};

const DM2D_MAGIC: &str = "DM2D";
const DM2D_VERSION: u32 = 1;

/// Pixel raster over a rectangle. Pixel `(i, j)` covers
/// `[origin + i·size, origin + (i+1)·size)` on each axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RasterSpec {
    pub width: usize,
    pub height: usize,
    /// Lower-left corner of pixel (0, 0).
    pub origin: Vec2,
    pub pixel_size: f64,
}

impl RasterSpec {
    /// Smallest raster of `pixel_size` pixels anchored at the lower-left
    /// corner of `rect` that covers it.
    pub fn covering(rect: DomainRect, pixel_size: f64) -> Result<Self, ConfigError> {
        if !(pixel_size > 0.0 && pixel_size.is_finite()) {
            return Err(ConfigError::invalid("pixel_size", "must be positive"));
        }
        let n = |len: f64| ((len / pixel_size - 1e-9).ceil() as usize).max(1);
        Ok(RasterSpec {
            width: n(rect.width()),
            height: n(rect.height()),
            origin: Vec2::new(rect.xmin, rect.ymin),
            pixel_size,
        })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    pub fn pixel_center(&self, i: usize, j: usize) -> Vec2 {
        self.origin + Vec2::new((i as f64 + 0.5) * self.pixel_size, (j as f64 + 0.5) * self.pixel_size)
    }

    /// Continuous pixel coordinates (pixel (i, j) spans `[i, i+1)`).
    #[inline]
    pub fn to_pixel_space(&self, p: Vec2) -> Vec2 {
        (p - self.origin) / self.pixel_size
    }

    /// Pixel containing `p`; points on the far edges map to the last pixel.
    pub fn pixel_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let q = self.to_pixel_space(p);
        let fit = |v: f64, n: usize| -> Option<usize> {
            if !(v >= 0.0 && v <= n as f64 + 1e-9) {
                return None;
            }
            Some((v.floor() as usize).min(n - 1))
        };
        Some((fit(q.x, self.width)?, fit(q.y, self.height)?))
    }

    pub fn rect(&self) -> DomainRect {
        DomainRect::new(
            self.origin.x,
            self.origin.y,
            self.origin.x + self.width as f64 * self.pixel_size,
            self.origin.y + self.height as f64 * self.pixel_size,
        )
    }

    /// Geometry of a scalar grid sampled at pixel centers.
    pub fn center_grid(&self, values: Vec<f64>) -> ScalarGrid {
        ScalarGrid {
            nx: self.width,
            ny: self.height,
            x0: self.origin.x + 0.5 * self.pixel_size,
            y0: self.origin.y + 0.5 * self.pixel_size,
            dx: self.pixel_size,
            dy: self.pixel_size,
            values,
        }
    }
}

/// Row-major scalar samples on a regular grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGrid {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    /// Bilinear sample with coordinates clamped onto the grid.
    pub fn sample_clamped(&self, p: Vec2) -> f64 {
        let axis = |v: f64, o: f64, d: f64, n: usize| -> (usize, usize, f64) {
            if n == 1 {
                return (0, 0, 0.0);
            }
            let f = ((v - o) / d).clamp(0.0, (n - 1) as f64);
            let i = (f.floor() as usize).min(n - 2);
            (i, i + 1, f - i as f64)
        };
        let (i0, i1, s) = axis(p.x, self.x0, self.dx, self.nx);
        let (j0, j1, r) = axis(p.y, self.y0, self.dy, self.ny);
        let a = self.get(i0, j0) * (1.0 - s) + self.get(i1, j0) * s;
        let b = self.get(i0, j1) * (1.0 - s) + self.get(i1, j1) * s;
        a * (1.0 - r) + b * r
    }

    pub fn to_dm2d_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(52 + self.values.len() * 4);
        out.extend_from_slice(DM2D_MAGIC.as_bytes());
        put_u32(&mut out, DM2D_VERSION);
        put_u32(&mut out, self.nx as u32);
        put_u32(&mut out, self.ny as u32);
        for v in [self.x0, self.y0, self.dx, self.dy] {
            put_f64(&mut out, v);
        }
        for v in &self.values {
            put_f32(&mut out, *v as f32);
        }
        out
    }

    pub fn from_dm2d_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader::new(bytes);
        r.magic(DM2D_MAGIC)?;
        let version = r.u32()?;
        if version != DM2D_VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let nx = r.u32()? as usize;
        let ny = r.u32()? as usize;
        let (x0, y0, dx, dy) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
        if nx == 0 || ny == 0 {
            return Err(FormatError::Header("empty grid".into()));
        }
        if !(dx > 0.0 && dy > 0.0 && x0.is_finite() && y0.is_finite() && dx.is_finite() && dy.is_finite()) {
            return Err(FormatError::Header("invalid grid geometry".into()));
        }
        let count = nx
            .checked_mul(ny)
            .ok_or_else(|| FormatError::Header("grid size overflows".into()))?;
        r.require(count.saturating_mul(4))?;
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            values.push(r.f32()? as f64);
        }
        r.finish()?;
        Ok(ScalarGrid {
            nx,
            ny,
            x0,
            y0,
            dx,
            dy,
            values,
        })
    }

    pub fn write_dm2d(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_dm2d_bytes())
    }

    pub fn read_dm2d(path: impl AsRef<Path>) -> crate::Result<Self> {
        Ok(Self::from_dm2d_bytes(&std::fs::read(path)?)?)
    }
}
