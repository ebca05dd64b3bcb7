//! Animation frames from a placed [`ArrowSet`].
//!
//! Between steps, handles follow a cubic Hermite curve through the recorded
//! positions, with the recorded velocities as tangents. A streamlet is traced
//! from the interpolated handle at the frame's field time, a glyph is warped
//! along it (blended toward a disc when the streamlet is short relative to
//! its thickness), and the result is filled at the arrow's fade opacity.

mod glyph;
mod raster;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::density::DensitySeries;
use crate::error::{ConfigError, Error};
use crate::field::VectorField2D;
use crate::geom::{DomainRect, Vec2};
use crate::integrate::integrate_streamlet;
use crate::placement::{Arrow, ArrowSet};

pub use glyph::{morph_parameter, polygon_area, warp_glyph, GlyphShape, GlyphWarp};
pub use raster::{fill_polygons, stroke_contours, FrameImage, Rgba, SUPERSAMPLE};

/// Environment variable capping the number of frame-rendering threads.
pub const THREADS_ENV: &str = "ARROWFLOW_THREADS";

#[derive(Clone, Debug, PartialEq)]
pub struct RenderStyle {
    pub frames_per_step: usize,
    pub fill: Rgba,
    /// Outline color and width in image pixels.
    pub outline: Option<(Rgba, f64)>,
    /// Fade ramp duration, in steps.
    pub fade_length: f64,
    /// Streamlet length over thickness at which an arrow is fully formed.
    pub morph_full_ratio: f64,
    /// Disc diameter relative to the support thickness.
    pub disc_radius_factor: f64,
    pub width: u32,
    pub height: u32,
    pub background_color: Rgba,
    /// Replaces `background_color` when set; must match the image size.
    pub background: Option<FrameImage>,
    pub glyph: GlyphShape,
}

impl Default for RenderStyle {
    fn default() -> Self {
        RenderStyle {
            frames_per_step: 4,
            fill: [20, 40, 120, 255],
            outline: None,
            fade_length: 1.0,
            morph_full_ratio: 3.0,
            disc_radius_factor: 1.0,
            width: 512,
            height: 512,
            background_color: [255, 255, 255, 255],
            background: None,
            glyph: GlyphShape::default(),
        }
    }
}

impl RenderStyle {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.frames_per_step < 1 {
            return Err(ConfigError::invalid("frames_per_step", "must be at least 1"));
        }
        if !(self.fade_length > 0.0 && self.fade_length <= 1.0) {
            return Err(ConfigError::invalid("fade_length", "must be in (0, 1]"));
        }
        if !(self.morph_full_ratio > 1.0 && self.morph_full_ratio.is_finite()) {
            return Err(ConfigError::invalid("morph_full_ratio", "must be greater than 1"));
        }
        if !(self.disc_radius_factor > 0.0 && self.disc_radius_factor.is_finite()) {
            return Err(ConfigError::invalid("disc_radius_factor", "must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(ConfigError::invalid("size", "must be at least 1x1"));
        }
        if let Some(bg) = &self.background {
            if (bg.width, bg.height) != (self.width, self.height) {
                return Err(ConfigError::invalid("background", "size differs from the frame size"));
            }
        }
        Ok(())
    }

    /// Number of frames for `step_count` steps.
    pub fn frame_count(&self, step_count: usize) -> usize {
        self.frames_per_step * (step_count - 1) + 1
    }

    /// Continuous step time of frame `frame`.
    pub fn frame_tau(&self, frame: usize) -> f64 {
        frame as f64 / self.frames_per_step as f64
    }

    fn blank(&self) -> FrameImage {
        match &self.background {
            Some(bg) => bg.clone(),
            None => FrameImage::filled(self.width, self.height, self.background_color),
        }
    }
}

/// Handle position at continuous step time `tau`. `dt` converts recorded
/// velocities into per-step tangents.
pub fn interpolate_handle(arrow: &Arrow, tau: f64, dt: f64) -> crate::Result<Vec2> {
    let (tb, td) = (arrow.birth_step as f64, arrow.death_step as f64);
    if !(tau >= tb && tau <= td) {
        return Err(Error::TimeOutOfRange(tau));
    }
    let k = (tau.floor() as usize).clamp(arrow.birth_step, arrow.death_step);
    let s = tau - k as f64;
    let r0 = arrow.record(k).expect("alive at k");
    if s == 0.0 {
        return Ok(r0.handle);
    }
    let r1 = arrow.record(k + 1).expect("alive at k + 1");
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    Ok(r0.handle * h00 + r0.velocity * (dt * h10) + r1.handle * h01 + r1.velocity * (dt * h11))
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Fade opacity at `tau`. The fade-in starts `fade_delay` after birth and the
/// fade-out ends `fade_delay` before death, each a smoothstep over
/// `fade_length` steps. Arrows alive at the first or last step do not fade
/// there. Zero outside the lifetime.
pub fn opacity(arrow: &Arrow, tau: f64, fade_length: f64, last_step: usize) -> f64 {
    let (tb, td) = (arrow.birth_step as f64, arrow.death_step as f64);
    if !(tau >= tb && tau <= td) {
        return 0.0;
    }
    let fade_in = if arrow.birth_step == 0 {
        1.0
    } else {
        smoothstep((tau - tb - arrow.fade_delay) / fade_length)
    };
    let fade_out = if arrow.death_step >= last_step {
        1.0
    } else {
        smoothstep((td - arrow.fade_delay - tau) / fade_length)
    };
    fade_in.min(fade_out)
}

/// Domain to image mapping: `rect` fills the image, y pointing up.
#[derive(Clone, Copy, Debug)]
pub struct Viewport {
    pub rect: DomainRect,
    pub width: u32,
    pub height: u32,
}

impl Viewport {
    pub fn to_image(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            (p.x - self.rect.xmin) / self.rect.width() * self.width as f64,
            (self.rect.ymax - p.y) / self.rect.height() * self.height as f64,
        )
    }

    /// Image pixels per domain unit along x.
    pub fn scale(&self) -> f64 {
        self.width as f64 / self.rect.width()
    }
}

/// Geometry of one arrow at one frame.
#[derive(Clone, Debug)]
pub struct GlyphInstance {
    pub arrow_id: usize,
    pub handle: Vec2,
    pub alpha: f64,
    pub morph: f64,
    /// Support width after dividing by the density.
    pub width: f64,
    pub streamlet: crate::integrate::Streamlet,
    /// Outline in domain coordinates.
    pub outline: Vec<Vec2>,
}

/// Glyphs visible at `tau`, by ascending arrow id.
pub fn frame_glyphs(
    set: &ArrowSet,
    field: &VectorField2D,
    density: &DensitySeries,
    tau: f64,
    style: &RenderStyle,
) -> crate::Result<Vec<GlyphInstance>> {
    let last = set.last_step();
    if !(tau >= 0.0 && tau <= last as f64) {
        return Err(Error::TimeOutOfRange(tau));
    }
    let params = set.params();
    let time = field.time_at(tau);
    let mut out = Vec::new();
    for arrow in set.arrows() {
        let alpha = opacity(arrow, tau, style.fade_length, last);
        if alpha <= 0.0 {
            continue;
        }
        let handle = interpolate_handle(arrow, tau, field.grid().dt)?;
        let Ok(streamlet) = integrate_streamlet(field, handle, time, &params.integrator, params.thickness) else {
            continue;
        };
        let width = params.thickness / density.at(handle, tau);
        let morph = morph_parameter(streamlet.arc_length(), width, style.morph_full_ratio);
        let outline = warp_glyph(&streamlet, width, morph, &style.glyph, style.disc_radius_factor);
        out.push(GlyphInstance {
            arrow_id: arrow.id,
            handle,
            alpha,
            morph,
            width,
            streamlet,
            outline,
        });
    }
    Ok(out)
}

/// Renders the frame at continuous step time `tau` over the field's visible
/// rectangle.
pub fn render_frame(
    set: &ArrowSet,
    field: &VectorField2D,
    density: &DensitySeries,
    tau: f64,
    style: &RenderStyle,
) -> crate::Result<FrameImage> {
    style.validate()?;
    let glyphs = frame_glyphs(set, field, density, tau, style)?;
    let view = Viewport {
        rect: field.visible_rect(),
        width: style.width,
        height: style.height,
    };
    let mut img = style.blank();
    for g in &glyphs {
        let poly: Vec<Vec2> = g.outline.iter().map(|p| view.to_image(*p)).collect();
        let (w, h) = (img.width, img.height);
        fill_polygons(std::slice::from_ref(&poly), w, h, |x, y, c| {
            img.blend(x, y, style.fill, c * g.alpha)
        });
        if let Some((color, px)) = style.outline {
            fill_polygons(&stroke_contours(&poly, px), w, h, |x, y, c| img.blend(x, y, color, c * g.alpha));
        }
    }
    Ok(img)
}

/// Name of frame `i` inside the output directory.
pub fn frame_file_name(i: usize) -> String {
    format!("frame_{i:06}.png")
}

/// Renders every frame into `dir` as PNG files plus `manifest.txt`, in
/// parallel. Returns the frame paths in order.
pub fn render_all(
    set: &ArrowSet,
    field: &VectorField2D,
    density: &DensitySeries,
    style: &RenderStyle,
    dir: impl AsRef<Path>,
) -> crate::Result<Vec<PathBuf>> {
    style.validate()?;
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let n = style.frame_count(set.step_count());
    let job = || {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let img = render_frame(set, field, density, style.frame_tau(i), style)?;
                let path = dir.join(frame_file_name(i));
                img.save_png(&path)?;
                Ok(path)
            })
            .collect::<crate::Result<Vec<_>>>()
    };
    let paths = match thread_cap() {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| ConfigError::invalid(THREADS_ENV, e.to_string()))?
            .install(job)?,
        None => job()?,
    };
    std::fs::write(dir.join("manifest.txt"), manifest(set, style, n))?;
    Ok(paths)
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&k| k > 0)
}

fn manifest(set: &ArrowSet, style: &RenderStyle, frames: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "tool_version {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "arrowset_config_hash {}", set.config_hash());
    if let Some(sum) = set.meta_value("field_checksum") {
        let _ = writeln!(out, "field_checksum {sum}");
    }
    let _ = writeln!(out, "frame_count {frames}");
    let _ = writeln!(out, "frames_per_step {}", style.frames_per_step);
    let _ = writeln!(out, "size {}x{}", style.width, style.height);
    let _ = writeln!(out, "fill {}", format_color(style.fill));
    if let Some((c, w)) = style.outline {
        let _ = writeln!(out, "outline {} {w}", format_color(c));
    }
    let _ = writeln!(out, "background {}", match style.background {
        Some(_) => "image".to_string(),
        None => format_color(style.background_color),
    });
    let _ = writeln!(out, "fade_length {}", style.fade_length);
    let _ = writeln!(out, "morph_full_ratio {}", style.morph_full_ratio);
    let _ = writeln!(out, "disc_radius_factor {}", style.disc_radius_factor);
    let g = style.glyph;
    let _ = writeln!(out, "glyph {} {} {}", g.head_length, g.head_width, g.shaft_width);
    for i in 0..frames {
        let _ = writeln!(out, "{} {}", frame_file_name(i), style.frame_tau(i));
    }
    out
}

/// Parses `#rrggbb` or `#rrggbbaa`.
pub fn parse_color(s: &str) -> Result<Rgba, ConfigError> {
    let hex = s.strip_prefix('#').unwrap_or(s);
    let bad = || ConfigError::Parse(format!("color `{s}`, expected #rrggbb or #rrggbbaa"));
    if !(hex.len() == 6 || hex.len() == 8) || !hex.is_ascii() {
        return Err(bad());
    }
    let mut c = [255u8; 4];
    for (k, slot) in c.iter_mut().enumerate().take(hex.len() / 2) {
        *slot = u8::from_str_radix(&hex[2 * k..2 * k + 2], 16).map_err(|_| bad())?;
    }
    Ok(c)
}

pub fn format_color(c: Rgba) -> String {
    format!("#{:02x}{:02x}{:02x}{:02x}", c[0], c[1], c[2], c[3])
}
