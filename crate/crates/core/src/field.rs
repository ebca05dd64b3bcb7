//! Gridded time-dependent 2D vector fields.
//!
//! A [`VectorField2D`] stores `nt` slices of `ny × nx` velocity samples on a
//! regular grid. Continuous sampling is bilinear in space and linear in time;
//! times outside the sampled interval are clamped to the first/last slice, so
//! a single-slice field behaves as a steady flow.
//!
//! Fields can be prefiltered with a Gaussian, padded with a hidden buffer zone
//! and serialized in the little-endian VF2D format:
//!
//! ```text
//! "VF2D" u32 version=1 u32 nx u32 ny u32 nt
//! f64 x0 f64 y0 f64 dx f64 dy f64 t0 f64 dt
//! nt × ny × nx × (f32 vx, f32 vy)   // row-major, y increasing
//! ```

use std::f64::consts::TAU;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::binio::{put_f32, put_f64, put_u32, Reader};
use crate::error::{ConfigError, FormatError, OutOfDomain};
use crate::geom::{DomainRect, Vec2};

const VF2D_MAGIC: &str = "VF2D";
const VF2D_VERSION: u32 = 1;

/// Relative tolerance (in cells) under which a sample coordinate snaps onto a
/// grid line. Keeps node values exact despite rounding in `x0 + i·dx`.
const NODE_SNAP: f64 = 1e-12;

/// Anything that can be sampled for a velocity at a point in space-time.
pub trait VelocitySource {
    fn velocity(&self, p: Vec2, t: f64) -> Result<Vec2, OutOfDomain>;
}

/// Regular space-time grid layout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub t0: f64,
    pub dt: f64,
}

impl GridSpec {
    /// Grid with `nx × ny` nodes spanning `rect` exactly.
    pub fn over_rect(rect: DomainRect, nx: usize, ny: usize, nt: usize, t0: f64, dt: f64) -> Self {
        GridSpec {
            nx,
            ny,
            nt,
            x0: rect.xmin,
            y0: rect.ymin,
            dx: rect.width() / (nx.max(2) - 1) as f64,
            dy: rect.height() / (ny.max(2) - 1) as f64,
            t0,
            dt,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.nx < 2 || self.ny < 2 {
            return Err(ConfigError::invalid("grid", "need at least 2×2 nodes"));
        }
        if self.nt < 1 {
            return Err(ConfigError::invalid("grid", "need at least one time slice"));
        }
        for (name, v) in [("dx", self.dx), ("dy", self.dy), ("dt", self.dt)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::invalid("grid", format!("{name} must be positive")));
            }
        }
        if !(self.x0.is_finite() && self.y0.is_finite() && self.t0.is_finite()) {
            return Err(ConfigError::invalid("grid", "origin must be finite"));
        }
        Ok(())
    }

    pub fn rect(&self) -> DomainRect {
        DomainRect {
            xmin: self.x0,
            ymin: self.y0,
            xmax: self.x0 + (self.nx - 1) as f64 * self.dx,
            ymax: self.y0 + (self.ny - 1) as f64 * self.dy,
        }
    }

    pub fn node_position(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(self.x0 + i as f64 * self.dx, self.y0 + j as f64 * self.dy)
    }

    pub fn step_time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    #[inline]
    fn slice_len(&self) -> usize {
        self.nx * self.ny
    }
}

/// Fractional grid coordinate; `None` when outside `[0, n-1]`.
#[inline]
fn cell_coord(x: f64, origin: f64, spacing: f64, n: usize) -> Option<(usize, f64)> {
    let mut f = (x - origin) / spacing;
    let r = f.round();
    if (f - r).abs() < NODE_SNAP * r.abs().max(1.0) {
        f = r;
    }
    let last = (n - 1) as f64;
    if !(0.0..=last).contains(&f) {
        return None;
    }
    let i = (f.floor() as usize).min(n - 2);
    Some((i, f - i as f64))
}

#[derive(Clone, Debug)]
pub struct VectorField2D {
    grid: GridSpec,
    data: Vec<Vec2>,
    visible: DomainRect,
}

impl VectorField2D {
    /// Builds a field from `nt × ny × nx` samples (x fastest).
    pub fn new(grid: GridSpec, data: Vec<Vec2>) -> Result<Self, ConfigError> {
        grid.validate()?;
        if data.len() != grid.slice_len() * grid.nt {
            return Err(ConfigError::invalid(
                "data",
                format!("expected {} samples, got {}", grid.slice_len() * grid.nt, data.len()),
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(ConfigError::invalid("data", format!("non-finite velocity at sample {i}")));
        }
        Ok(VectorField2D {
            visible: grid.rect(),
            grid,
            data,
        })
    }

    /// Samples `f(position, time)` at every node of `grid`.
    pub fn from_fn(grid: GridSpec, f: impl Fn(Vec2, f64) -> Vec2) -> Result<Self, ConfigError> {
        grid.validate()?;
        let mut data = Vec::with_capacity(grid.slice_len() * grid.nt);
        for k in 0..grid.nt {
            let t = grid.step_time(k);
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    data.push(f(grid.node_position(i, j), t));
                }
            }
        }
        Self::new(grid, data)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// The full (possibly extended) sampling rectangle.
    pub fn domain_rect(&self) -> DomainRect {
        self.grid.rect()
    }

    /// The original rectangle before any buffer-zone extension.
    pub fn visible_rect(&self) -> DomainRect {
        self.visible
    }

    /// Index of the last time step.
    pub fn last_step(&self) -> usize {
        self.grid.nt - 1
    }

    pub fn step_time(&self, k: usize) -> f64 {
        self.grid.step_time(k)
    }

    /// Field time of a fractional step index.
    pub fn time_at(&self, tau: f64) -> f64 {
        self.grid.t0 + tau * self.grid.dt
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec2 {
        self.data[(k * self.grid.ny + j) * self.grid.nx + i]
    }

    pub fn slice(&self, k: usize) -> &[Vec2] {
        let n = self.grid.slice_len();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn samples(&self) -> &[Vec2] {
        &self.data
    }

    pub fn max_speed(&self) -> f64 {
        self.data.iter().map(|v| v.length()).fold(0.0, f64::max)
    }

    fn bilinear(&self, k: usize, i: usize, j: usize, s: f64, r: f64) -> Vec2 {
        let v00 = self.node(i, j, k);
        let v10 = self.node(i + 1, j, k);
        let v01 = self.node(i, j + 1, k);
        let v11 = self.node(i + 1, j + 1, k);
        v00 * ((1.0 - s) * (1.0 - r)) + v10 * (s * (1.0 - r)) + v01 * ((1.0 - s) * r) + v11 * (s * r)
    }

    /// Bilinear-in-space, linear-in-time velocity at `(p, t)`.
    pub fn sample(&self, p: Vec2, t: f64) -> Result<Vec2, OutOfDomain> {
        let g = &self.grid;
        let (i, s) = cell_coord(p.x, g.x0, g.dx, g.nx).ok_or(OutOfDomain(p))?;
        let (j, r) = cell_coord(p.y, g.y0, g.dy, g.ny).ok_or(OutOfDomain(p))?;
        if g.nt == 1 {
            return Ok(self.bilinear(0, i, j, s, r));
        }
        let ft = ((t - g.t0) / g.dt).clamp(0.0, (g.nt - 1) as f64);
        let ft = if (ft - ft.round()).abs() < NODE_SNAP * ft.round().max(1.0) {
            ft.round()
        } else {
            ft
        };
        let k = (ft.floor() as usize).min(g.nt - 2);
        let w = ft - k as f64;
        let a = self.bilinear(k, i, j, s, r);
        if w == 0.0 {
            return Ok(a);
        }
        let b = self.bilinear(k + 1, i, j, s, r);
        if w == 1.0 {
            return Ok(b);
        }
        Ok(a * (1.0 - w) + b * w)
    }

    /// Per-slice separable Gaussian blur of both components.
    ///
    /// `sigma` is in domain units; the kernel is truncated at ±3σ and
    /// renormalized, and the boundary is clamped to the edge.
    pub fn gaussian_prefilter(&self, sigma: f64) -> VectorField2D {
        let g = self.grid;
        if !(sigma > 0.0) {
            return self.clone();
        }
        let kx = gaussian_kernel(sigma / g.dx);
        let ky = gaussian_kernel(sigma / g.dy);
        let mut data = Vec::with_capacity(self.data.len());
        let mut tmp = vec![Vec2::ZERO; g.slice_len()];
        for k in 0..g.nt {
            let src = self.slice(k);
            let rx = (kx.len() / 2) as isize;
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let mut acc = Vec2::ZERO;
                    for (o, w) in kx.iter().enumerate() {
                        let ii = (i as isize + o as isize - rx).clamp(0, g.nx as isize - 1) as usize;
                        acc += src[j * g.nx + ii] * *w;
                    }
                    tmp[j * g.nx + i] = acc;
                }
            }
            let ry = (ky.len() / 2) as isize;
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let mut acc = Vec2::ZERO;
                    for (o, w) in ky.iter().enumerate() {
                        let jj = (j as isize + o as isize - ry).clamp(0, g.ny as isize - 1) as usize;
                        acc += tmp[jj * g.nx + i] * *w;
                    }
                    data.push(acc);
                }
            }
        }
        VectorField2D {
            grid: g,
            data,
            visible: self.visible,
        }
    }

    /// Pads the grid by `ceil(margin / spacing)` cells per side using
    /// nearest-edge extrapolation. The visible rectangle is kept.
    pub fn extend_domain(&self, margin: f64) -> VectorField2D {
        let g = self.grid;
        let cells = |m: f64, d: f64| -> usize {
            if m > 0.0 {
                (m / d - 1e-9).ceil().max(0.0) as usize
            } else {
                0
            }
        };
        let (mx, my) = (cells(margin, g.dx), cells(margin, g.dy));
        if mx == 0 && my == 0 {
            return self.clone();
        }
        let ng = GridSpec {
            nx: g.nx + 2 * mx,
            ny: g.ny + 2 * my,
            x0: g.x0 - mx as f64 * g.dx,
            y0: g.y0 - my as f64 * g.dy,
            ..g
        };
        let mut data = Vec::with_capacity(ng.slice_len() * ng.nt);
        for k in 0..ng.nt {
            for j in 0..ng.ny {
                let sj = j.saturating_sub(my).min(g.ny - 1);
                for i in 0..ng.nx {
                    let si = i.saturating_sub(mx).min(g.nx - 1);
                    data.push(self.node(si, sj, k));
                }
            }
        }
        VectorField2D {
            grid: ng,
            data,
            visible: self.visible,
        }
    }

    /// Canonical VF2D encoding. Velocities are stored as `f32`.
    pub fn to_vf2d_bytes(&self) -> Vec<u8> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(60 + self.data.len() * 8);
        out.extend_from_slice(VF2D_MAGIC.as_bytes());
        put_u32(&mut out, VF2D_VERSION);
        for n in [g.nx, g.ny, g.nt] {
            put_u32(&mut out, n as u32);
        }
        for v in [g.x0, g.y0, g.dx, g.dy, g.t0, g.dt] {
            put_f64(&mut out, v);
        }
        for v in &self.data {
            put_f32(&mut out, v.x as f32);
            put_f32(&mut out, v.y as f32);
        }
        out
    }

    pub fn from_vf2d_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader::new(bytes);
        r.magic(VF2D_MAGIC)?;
        let version = r.u32()?;
        if version != VF2D_VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let nx = r.u32()? as usize;
        let ny = r.u32()? as usize;
        let nt = r.u32()? as usize;
        let grid = GridSpec {
            nx,
            ny,
            nt,
            x0: r.f64()?,
            y0: r.f64()?,
            dx: r.f64()?,
            dy: r.f64()?,
            t0: r.f64()?,
            dt: r.f64()?,
        };
        grid.validate().map_err(|e| FormatError::Header(e.to_string()))?;
        let count = nx
            .checked_mul(ny)
            .and_then(|n| n.checked_mul(nt))
            .ok_or_else(|| FormatError::Header("grid size overflows".into()))?;
        r.require(count.saturating_mul(8))?;
        let mut data = Vec::with_capacity(count);
        for idx in 0..count {
            let vx = r.f32()?;
            let vy = r.f32()?;
            if !(vx.is_finite() && vy.is_finite()) {
                return Err(FormatError::NonFinite(idx));
            }
            data.push(Vec2::new(vx as f64, vy as f64));
        }
        r.finish()?;
        Ok(VectorField2D {
            visible: grid.rect(),
            grid,
            data,
        })
    }

    pub fn write_vf2d(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_vf2d_bytes())
    }

    pub fn read_vf2d(path: impl AsRef<Path>) -> crate::Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(Self::from_vf2d_bytes(&bytes)?)
    }

    /// SHA-256 of the canonical VF2D encoding, hex encoded.
    pub fn checksum(&self) -> String {
        sha256_hex(&self.to_vf2d_bytes())
    }
}

impl VelocitySource for VectorField2D {
    fn velocity(&self, p: Vec2, t: f64) -> Result<Vec2, OutOfDomain> {
        self.sample(p, t)
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Normalized 1D Gaussian with radius `ceil(3σ)`; `sigma` in cells.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    if radius == 0 {
        return vec![1.0];
    }
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

/// Analytic flows used for stress tests and demos.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SyntheticField {
    Constant { velocity: Vec2 },
    /// `v = ω · perp(x - c)`.
    RigidRotation { omega: f64, center: Vec2 },
    /// Radial flow of magnitude `strength` away from `center`, linear inside `core`.
    Source { strength: f64, center: Vec2, core: f64 },
    Sink { strength: f64, center: Vec2, core: f64 },
    /// A source and a sink of equal strength.
    Dipole {
        strength: f64,
        source: Vec2,
        sink: Vec2,
        core: f64,
    },
    /// Rigid rotation about a center moving at constant `drift`.
    TranslatingVortex { omega: f64, center: Vec2, drift: Vec2 },
}

fn radial(p: Vec2, center: Vec2, strength: f64, core: f64) -> Vec2 {
    let d = p - center;
    d * (strength / d.length().max(core))
}

impl SyntheticField {
    pub const KINDS: [&'static str; 7] = [
        "constant",
        "rigid_rotation",
        "source",
        "sink",
        "dipole",
        "translating_vortex",
        "zero",
    ];

    pub fn velocity_at(&self, p: Vec2, t: f64) -> Vec2 {
        match *self {
            SyntheticField::Constant { velocity } => velocity,
            SyntheticField::RigidRotation { omega, center } => (p - center).perp() * omega,
            SyntheticField::Source {
                strength,
                center,
                core,
            } => radial(p, center, strength, core),
            SyntheticField::Sink {
                strength,
                center,
                core,
            } => -radial(p, center, strength, core),
            SyntheticField::Dipole {
                strength,
                source,
                sink,
                core,
            } => radial(p, source, strength, core) - radial(p, sink, strength, core),
            SyntheticField::TranslatingVortex {
                omega,
                center,
                drift,
            } => (p - (center + drift * t)).perp() * omega,
        }
    }

    /// Builds a field from its kind name and `key=value` overrides.
    ///
    /// Defaults are laid out for the unit square. Recognized keys: `vx vy`
    /// (constant), `omega cx cy` (rotation, vortex), `ux uy` (vortex drift),
    /// `strength cx cy core` (source, sink), `strength sx sy kx ky core`
    /// (dipole). `zero` is a constant field with null velocity.
    pub fn parse(kind: &str, params: &[(String, f64)]) -> Result<Self, ConfigError> {
        let allowed: &[&str] = match kind {
            "constant" => &["vx", "vy"],
            "zero" => &[],
            "rigid_rotation" => &["omega", "cx", "cy"],
            "source" | "sink" => &["strength", "cx", "cy", "core"],
            "dipole" => &["strength", "sx", "sy", "kx", "ky", "core"],
            "translating_vortex" => &["omega", "cx", "cy", "ux", "uy"],
            other => return Err(ConfigError::UnknownKind(other.to_string())),
        };
        for (k, v) in params {
            if !allowed.contains(&k.as_str()) {
                return Err(ConfigError::UnknownParam(k.clone()));
            }
            if !v.is_finite() {
                return Err(ConfigError::Parse(format!("{k}={v}")));
            }
        }
        let get = |key: &str, default: f64| {
            params
                .iter()
                .rev()
                .find(|(k, _)| k == key)
                .map_or(default, |(_, v)| *v)
        };
        let field = match kind {
            "constant" => SyntheticField::Constant {
                velocity: Vec2::new(get("vx", 1.0), get("vy", 0.0)),
            },
            "zero" => SyntheticField::Constant {
                velocity: Vec2::ZERO,
            },
            "rigid_rotation" => SyntheticField::RigidRotation {
                omega: get("omega", 1.0),
                center: Vec2::new(get("cx", 0.5), get("cy", 0.5)),
            },
            "source" | "sink" => {
                let (strength, center, core) = (
                    get("strength", 0.5),
                    Vec2::new(get("cx", 0.5), get("cy", 0.5)),
                    get("core", 0.05),
                );
                if kind == "source" {
                    SyntheticField::Source {
                        strength,
                        center,
                        core,
                    }
                } else {
                    SyntheticField::Sink {
                        strength,
                        center,
                        core,
                    }
                }
            }
            "dipole" => SyntheticField::Dipole {
                strength: get("strength", 0.5),
                source: Vec2::new(get("sx", 0.3), get("sy", 0.5)),
                sink: Vec2::new(get("kx", 0.7), get("ky", 0.5)),
                core: get("core", 0.05),
            },
            "translating_vortex" => SyntheticField::TranslatingVortex {
                omega: get("omega", TAU / 4.0),
                center: Vec2::new(get("cx", 0.25), get("cy", 0.5)),
                drift: Vec2::new(get("ux", 0.5), get("uy", 0.0)),
            },
            _ => unreachable!(),
        };
        if let SyntheticField::Source { core, .. }
        | SyntheticField::Sink { core, .. }
        | SyntheticField::Dipole { core, .. } = field
        {
            if !(core > 0.0) {
                return Err(ConfigError::invalid("core", "must be positive"));
            }
        }
        Ok(field)
    }

    /// Samples the analytic field on `grid`.
    pub fn sample_on(&self, grid: GridSpec) -> Result<VectorField2D, ConfigError> {
        VectorField2D::from_fn(grid, |p, t| self.velocity_at(p, t))
    }
}

impl VelocitySource for SyntheticField {
    fn velocity(&self, p: Vec2, t: f64) -> Result<Vec2, OutOfDomain> {
        Ok(self.velocity_at(p, t))
    }
}
