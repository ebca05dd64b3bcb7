//! Density maps: the local "zoom factor" in `[1, scale_max]` that shrinks the
//! spacing between arrows.
//!
//! The automatic map is the Frobenius norm of the velocity Jacobian, mapped
//! affinely so the smallest value becomes 1 and the largest `scale_max`.

use std::path::Path;

use crate::error::{ConfigError, FormatError};
use crate::field::VectorField2D;
use crate::geom::Vec2;
use crate::grid::{RasterSpec, ScalarGrid};

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMap {
    raster: RasterSpec,
    values: Vec<f64>,
    scale_max: f64,
}

impl DensityMap {
    pub fn uniform(raster: RasterSpec) -> Self {
        DensityMap {
            values: vec![1.0; raster.len()],
            raster,
            scale_max: 1.0,
        }
    }

    /// Wraps raw per-pixel values, clamping them into `[1, scale_max]`.
    pub fn from_values(raster: RasterSpec, values: Vec<f64>, scale_max: f64) -> Result<Self, ConfigError> {
        check_scale_max(scale_max)?;
        if values.len() != raster.len() {
            return Err(ConfigError::invalid("density", "value count does not match raster"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(ConfigError::invalid("density", "NaN value"));
        }
        Ok(DensityMap {
            values: values.into_iter().map(|v| v.clamp(1.0, scale_max)).collect(),
            raster,
            scale_max,
        })
    }

    /// Reads a DM2D file, rejecting non-finite samples and clamping the rest
    /// into `[1, scale_max]`, then resamples it onto `raster`.
    pub fn load(path: impl AsRef<Path>, scale_max: f64, raster: RasterSpec) -> crate::Result<Self> {
        let grid = ScalarGrid::read_dm2d(path)?;
        Self::from_grid(&grid, scale_max, raster)
    }

    pub fn from_grid(grid: &ScalarGrid, scale_max: f64, raster: RasterSpec) -> crate::Result<Self> {
        if let Some(i) = grid.values.iter().position(|v| !v.is_finite()) {
            return Err(FormatError::NonFinite(i).into());
        }
        check_scale_max(scale_max)?;
        let clamped = ScalarGrid {
            values: grid.values.iter().map(|v| v.clamp(1.0, scale_max)).collect(),
            ..grid.clone()
        };
        let values = pixel_centers(&raster).map(|p| clamped.sample_clamped(p)).collect();
        Ok(Self::from_values(raster, values, scale_max)?)
    }

    pub fn raster(&self) -> &RasterSpec {
        &self.raster
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scale_max(&self) -> f64 {
        self.scale_max
    }

    #[inline]
    pub fn at_pixel(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Bilinear value between pixel centers.
    pub fn at(&self, p: Vec2) -> f64 {
        self.as_grid().sample_clamped(p)
    }

    pub fn as_grid(&self) -> ScalarGrid {
        self.raster.center_grid(self.values.clone())
    }
}

fn check_scale_max(scale_max: f64) -> Result<(), ConfigError> {
    if !(scale_max >= 1.0 && scale_max.is_finite()) {
        return Err(ConfigError::invalid("scale_max", "must be at least 1"));
    }
    Ok(())
}

fn pixel_centers(raster: &RasterSpec) -> impl Iterator<Item = Vec2> + '_ {
    (0..raster.height).flat_map(move |j| (0..raster.width).map(move |i| raster.pixel_center(i, j)))
}

/// Frobenius norm of the velocity Jacobian at every node of slice `k`.
///
/// Central differences inside, one-sided differences on the boundary.
pub fn jacobian_frobenius(field: &VectorField2D, k: usize) -> ScalarGrid {
    let g = field.grid();
    let (nx, ny) = (g.nx, g.ny);
    let diff = |a: Vec2, b: Vec2, h: f64| (b - a) / h;
    let mut values = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let ddx = match i {
                0 => diff(field.node(0, j, k), field.node(1, j, k), g.dx),
                i if i == nx - 1 => diff(field.node(i - 1, j, k), field.node(i, j, k), g.dx),
                i => diff(field.node(i - 1, j, k), field.node(i + 1, j, k), 2.0 * g.dx),
            };
            let ddy = match j {
                0 => diff(field.node(i, 0, k), field.node(i, 1, k), g.dy),
                j if j == ny - 1 => diff(field.node(i, j - 1, k), field.node(i, j, k), g.dy),
                j => diff(field.node(i, j - 1, k), field.node(i, j + 1, k), 2.0 * g.dy),
            };
            values.push((ddx.x * ddx.x + ddy.x * ddy.x + ddx.y * ddx.y + ddy.y * ddy.y).sqrt());
        }
    }
    ScalarGrid {
        nx,
        ny,
        x0: g.x0,
        y0: g.y0,
        dx: g.dx,
        dy: g.dy,
        values,
    }
}

fn raw_on_raster(field: &VectorField2D, k: usize, raster: &RasterSpec) -> Vec<f64> {
    let raw = jacobian_frobenius(field, k);
    pixel_centers(raster).map(|p| raw.sample_clamped(p)).collect()
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
}

/// Affine map of `raw` with `lo → 1` and `hi → scale_max`. Spreads below
/// 1e-9 relative are rounding noise and map to all ones.
fn normalize(raw: &[f64], lo: f64, hi: f64, scale_max: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 1e-9 * hi.abs()) {
        return vec![1.0; raw.len()];
    }
    raw.iter()
        .map(|v| (1.0 + (scale_max - 1.0) * (v - lo) / span).clamp(1.0, scale_max))
        .collect()
}

/// Jacobian density of slice `k`, normalized over that slice alone.
pub fn jacobian_density(
    field: &VectorField2D,
    k: usize,
    scale_max: f64,
    raster: RasterSpec,
) -> Result<DensityMap, ConfigError> {
    check_scale_max(scale_max)?;
    let raw = raw_on_raster(field, k, &raster);
    let (lo, hi) = min_max(&raw);
    DensityMap::from_values(raster, normalize(&raw, lo, hi, scale_max), scale_max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// One affine map for all time steps (no spacing flicker over time).
    Global,
    PerStep,
}

/// Where the density of each time step comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum DensityMode {
    Uniform,
    Jacobian {
        scale_max: f64,
        normalization: Normalization,
    },
    /// A user map, constant over time.
    Map { grid: ScalarGrid, scale_max: f64 },
}

impl DensityMode {
    pub fn scale_max(&self) -> f64 {
        match self {
            DensityMode::Uniform => 1.0,
            DensityMode::Jacobian { scale_max, .. } | DensityMode::Map { scale_max, .. } => *scale_max,
        }
    }
}

/// Density maps for every time step of a field, on a common raster.
#[derive(Clone, Debug)]
pub struct DensitySeries {
    maps: Vec<DensityMap>,
}

impl DensitySeries {
    pub fn build(mode: &DensityMode, field: &VectorField2D, raster: RasterSpec) -> crate::Result<Self> {
        let maps = match mode {
            DensityMode::Uniform => vec![DensityMap::uniform(raster)],
            DensityMode::Map { grid, scale_max } => vec![DensityMap::from_grid(grid, *scale_max, raster)?],
            DensityMode::Jacobian {
                scale_max,
                normalization,
            } => {
                check_scale_max(*scale_max)?;
                let raws: Vec<Vec<f64>> = (0..field.grid().nt)
                    .map(|k| raw_on_raster(field, k, &raster))
                    .collect();
                let global = raws
                    .iter()
                    .map(|r| min_max(r))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)));
                raws.iter()
                    .map(|raw| {
                        let (lo, hi) = match normalization {
                            Normalization::Global => global,
                            Normalization::PerStep => min_max(raw),
                        };
                        DensityMap::from_values(raster, normalize(raw, lo, hi, *scale_max), *scale_max)
                    })
                    .collect::<Result<_, _>>()?
            }
        };
        Ok(DensitySeries { maps })
    }

    /// Density of time step `k` (steps past the end reuse the last map).
    pub fn at_step(&self, k: usize) -> &DensityMap {
        &self.maps[k.min(self.maps.len() - 1)]
    }

    /// Density at a point and fractional step, linear between steps.
    pub fn at(&self, p: Vec2, tau: f64) -> f64 {
        if self.maps.len() == 1 {
            return self.maps[0].at(p);
        }
        let last = (self.maps.len() - 1) as f64;
        let tau = tau.clamp(0.0, last);
        let k = (tau.floor() as usize).min(self.maps.len() - 2);
        let w = tau - k as f64;
        let a = self.maps[k].at(p);
        if w == 0.0 {
            return a;
        }
        a * (1.0 - w) + self.maps[k + 1].at(p) * w
    }

    pub fn raster(&self) -> &RasterSpec {
        self.maps[0].raster()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{GridSpec, SyntheticField};
    use crate::geom::DomainRect;
    use proptest::prelude::*;

    fn grid(nt: usize) -> GridSpec {
        GridSpec::over_rect(DomainRect::new(-1.0, -1.0, 1.0, 1.0), 17, 13, nt, 0.0, 0.1)
    }

    fn raster() -> RasterSpec {
        RasterSpec::covering(DomainRect::new(-1.0, -1.0, 1.0, 1.0), 0.1).unwrap()
    }

    #[test]
    fn constant_field_has_unit_density() {
        let f = SyntheticField::Constant {
            velocity: Vec2::new(2.0, 1.0),
        }
        .sample_on(grid(1))
        .unwrap();
        let d = jacobian_density(&f, 0, 4.0, raster()).unwrap();
        assert!(d.values().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn rotation_jacobian_is_root_two_omega() {
        let f = SyntheticField::RigidRotation {
            omega: 2.0,
            center: Vec2::ZERO,
        }
        .sample_on(grid(1))
        .unwrap();
        let raw = jacobian_frobenius(&f, 0);
        for v in &raw.values {
            assert!((v - 2.0 * 2f64.sqrt()).abs() < 1e-10);
        }
        let d = jacobian_density(&f, 0, 4.0, raster()).unwrap();
        assert!(d.values().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn shear_jacobian_is_one() {
        let f = VectorField2D::from_fn(grid(1), |p, _| Vec2::new(p.y, 0.0)).unwrap();
        let raw = jacobian_frobenius(&f, 0);
        for v in &raw.values {
            assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn uniform_density_is_one_everywhere() {
        let d = DensityMap::uniform(raster());
        assert!(d.values().iter().all(|v| *v == 1.0));
        assert_eq!(d.at(Vec2::new(0.123, -0.7)), 1.0);
        let s = DensitySeries::build(&DensityMode::Uniform, &SyntheticField::parse("zero", &[]).unwrap().sample_on(grid(3)).unwrap(), raster()).unwrap();
        assert_eq!(s.at(Vec2::new(0.5, 0.5), 1.5), 1.0);
    }

    fn dm2d(values: Vec<f64>) -> ScalarGrid {
        ScalarGrid {
            nx: 2,
            ny: 2,
            x0: -1.0,
            y0: -1.0,
            dx: 2.0,
            dy: 2.0,
            values,
        }
    }

    #[test]
    fn loaded_maps_are_clamped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.dm2d");
        dm2d(vec![5.0; 4]).write_dm2d(&path).unwrap();
        let d = DensityMap::load(&path, 10.0, raster()).unwrap();
        assert!(d.values().iter().all(|v| *v == 5.0));

        dm2d(vec![0.2; 4]).write_dm2d(&path).unwrap();
        let d = DensityMap::load(&path, 10.0, raster()).unwrap();
        assert!(d.values().iter().all(|v| *v == 1.0));

        let bytes = dm2d(vec![2.0; 4]).to_dm2d_bytes();
        std::fs::write(&path, &bytes[..bytes.len() - 2]).unwrap();
        assert!(matches!(
            DensityMap::load(&path, 10.0, raster()),
            Err(crate::Error::Format(FormatError::Truncated { .. }))
        ));
    }

    #[test]
    fn per_step_and_global_normalization() {
        // Jacobian grows over time: per-step maps are identical, global ones are not.
        let f = VectorField2D::from_fn(grid(3), |p, t| Vec2::new(p.x * p.x * (1.0 + 10.0 * t), 0.0)).unwrap();
        let per = DensitySeries::build(
            &DensityMode::Jacobian {
                scale_max: 4.0,
                normalization: Normalization::PerStep,
            },
            &f,
            raster(),
        )
        .unwrap();
        let glob = DensitySeries::build(
            &DensityMode::Jacobian {
                scale_max: 4.0,
                normalization: Normalization::Global,
            },
            &f,
            raster(),
        )
        .unwrap();
        let max = |m: &DensityMap| m.values().iter().cloned().fold(0.0, f64::max);
        assert!((max(per.at_step(0)) - 4.0).abs() < 1e-12);
        assert!((max(per.at_step(2)) - 4.0).abs() < 1e-12);
        assert!(max(glob.at_step(0)) < 3.0);
        assert!((max(glob.at_step(2)) - 4.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn density_range_and_scale_invariance(a in -3.0f64..3.0, b in -3.0f64..3.0, c in 0.1f64..5.0,
                                              k in 0.01f64..100.0, scale_max in 1.0f64..10.0) {
            let make = |gain: f64| VectorField2D::from_fn(grid(1), move |p, _| {
                Vec2::new(a * p.x * p.x + c * p.y, b * p.x * p.y + (c * p.x).sin()) * gain
            }).unwrap();
            let d1 = jacobian_density(&make(1.0), 0, scale_max, raster()).unwrap();
            let dk = jacobian_density(&make(k), 0, scale_max, raster()).unwrap();
            for (x, y) in d1.values().iter().zip(dk.values()) {
                prop_assert!(*x >= 1.0 - 1e-12 && *x <= scale_max + 1e-12);
                prop_assert!((x - y).abs() < 1e-9 * scale_max);
            }
        }

        #[test]
        fn linear_fields_have_exact_interior_jacobians(a in -5.0f64..5.0, b in -5.0f64..5.0,
                                                        c in -5.0f64..5.0, d in -5.0f64..5.0) {
            let f = VectorField2D::from_fn(grid(1), |p, _| Vec2::new(a * p.x + b * p.y, c * p.x + d * p.y)).unwrap();
            let raw = jacobian_frobenius(&f, 0);
            let exact = (a * a + b * b + c * c + d * d).sqrt();
            for j in 0..raw.ny {
                for i in 0..raw.nx {
                    prop_assert!((raw.get(i, j) - exact).abs() < 1e-10);
                }
            }
        }
    }
}
