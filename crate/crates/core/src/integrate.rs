//! RK4 streamlets and pathline advection.
//!
//! A streamlet is traced at a frozen time, backward and forward from its
//! handle, with the arc-length parameterized ODE `dS/ds = v/|v|`. Samples are
//! therefore spaced `step_h` apart in arc parameter. Handles move between
//! time steps along pathlines of the time-dependent field.

use crate::error::{ConfigError, OutOfDomain};
use crate::field::{VectorField2D, VelocitySource};
use crate::geom::Vec2;

/// Speed under which a point is treated as a critical point.
pub const DEGENERATE_SPEED: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    /// Arc-length step of the streamlet tracer, in domain units.
    pub step_h: f64,
    /// Target streamlet length is `length_gain · |v(handle)|`.
    pub length_gain: f64,
    pub max_aspect_ratio: f64,
    /// RK4 substeps used to advect a handle across one time step.
    pub substeps_per_dt: usize,
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.step_h > 0.0 && self.step_h.is_finite()) {
            return Err(ConfigError::invalid("step_h", "must be positive"));
        }
        if !(self.length_gain > 0.0 && self.length_gain.is_finite()) {
            return Err(ConfigError::invalid("length_gain", "must be positive"));
        }
        if !(self.max_aspect_ratio >= 1.0) {
            return Err(ConfigError::invalid("max_aspect_ratio", "must be at least 1"));
        }
        if self.substeps_per_dt < 1 {
            return Err(ConfigError::invalid("substeps_per_dt", "must be at least 1"));
        }
        Ok(())
    }

    /// Length gain giving the median node speed of `field` a streamlet
    /// `aspect` times as long as `thickness`.
    pub fn auto_length_gain(field: &VectorField2D, thickness: f64, aspect: f64) -> f64 {
        let mut speeds: Vec<f64> = field
            .samples()
            .iter()
            .map(|v| v.length())
            .filter(|s| *s > DEGENERATE_SPEED)
            .collect();
        if speeds.is_empty() {
            return 1.0;
        }
        let mid = speeds.len() / 2;
        let (_, median, _) = speeds.select_nth_unstable_by(mid, f64::total_cmp);
        aspect * thickness / *median
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Streamlet {
    points: Vec<Vec2>,
    handle_index: usize,
    arc_length: f64,
    thickness: f64,
    velocity_at_handle: Vec2,
}

fn polyline_length(points: &[Vec2]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

impl Streamlet {
    /// Assembles a streamlet from explicit samples. `handle_index` must point
    /// into `points`.
    pub fn from_points(points: Vec<Vec2>, handle_index: usize, thickness: f64, velocity_at_handle: Vec2) -> Self {
        assert!(handle_index < points.len(), "handle must be one of the samples");
        Streamlet {
            arc_length: polyline_length(&points),
            points,
            handle_index,
            thickness,
            velocity_at_handle,
        }
    }

    pub fn handle(&self) -> Vec2 {
        self.points[self.handle_index]
    }

    pub fn handle_index(&self) -> usize {
        self.handle_index
    }

    /// Samples ordered from the backward tip to the forward tip.
    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn arc_length(&self) -> f64 {
        self.arc_length
    }

    pub fn thickness(&self) -> f64 {
        self.thickness
    }

    pub fn velocity_at_handle(&self) -> Vec2 {
        self.velocity_at_handle
    }

    pub fn is_degenerate(&self) -> bool {
        self.points.len() == 1
    }

    /// Arc length from the backward tip to the handle.
    pub fn backward_length(&self) -> f64 {
        polyline_length(&self.points[..=self.handle_index])
    }

    pub fn forward_length(&self) -> f64 {
        polyline_length(&self.points[self.handle_index..])
    }

    /// Vector from the backward tip to the forward tip.
    pub fn extremity_vector(&self) -> Vec2 {
        self.points[self.points.len() - 1] - self.points[0]
    }

    /// Point and unit tangent at arc position `s` measured from the backward
    /// tip (clamped to the polyline). The tangent is `None` for a degenerate
    /// streamlet.
    pub fn point_at_arc(&self, s: f64) -> (Vec2, Option<Vec2>) {
        if self.points.len() == 1 {
            return (self.points[0], None);
        }
        let mut acc = 0.0;
        let mut last_dir = None;
        for w in self.points.windows(2) {
            let seg = w[0].distance(w[1]);
            let dir = (w[1] - w[0]).normalized();
            if dir.is_some() {
                last_dir = dir;
            }
            if s <= acc + seg && seg > 0.0 {
                let u = ((s - acc) / seg).clamp(0.0, 1.0);
                return (w[0].lerp(w[1], u), dir.or(last_dir));
            }
            acc += seg;
        }
        if s <= 0.0 {
            return (self.points[0], last_dir);
        }
        (self.points[self.points.len() - 1], last_dir)
    }

    /// Keeps the arc interval `[from, to]` (measured from the backward tip),
    /// which must contain the handle.
    fn trimmed(&self, from: f64, to: f64) -> Streamlet {
        let mut cum = Vec::with_capacity(self.points.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in self.points.windows(2) {
            acc += w[0].distance(w[1]);
            cum.push(acc);
        }
        let mut out: Vec<Vec2> = Vec::with_capacity(self.points.len());
        let push = |p: Vec2, out: &mut Vec<Vec2>| {
            if out.last() != Some(&p) {
                out.push(p);
            }
        };
        push(self.point_at_arc(from).0, &mut out);
        let mut handle_index = 0;
        for (idx, (&p, &s)) in self.points.iter().zip(&cum).enumerate() {
            if idx == self.handle_index {
                push(p, &mut out);
                handle_index = out.len() - 1;
            } else if s > from && s < to {
                push(p, &mut out);
            }
        }
        push(self.point_at_arc(to).0, &mut out);
        Streamlet::from_points(out, handle_index, self.thickness, self.velocity_at_handle)
    }
}

/// Trims the tips so that `arc_length / thickness <= max_aspect_ratio`.
///
/// The kept piece is a window of the target length centered on the handle,
/// shifted along the curve when one side is too short to fill its half.
pub fn clamp_aspect(streamlet: &Streamlet, max_aspect_ratio: f64) -> Streamlet {
    let target = max_aspect_ratio * streamlet.thickness;
    if streamlet.is_degenerate() || !(streamlet.thickness > 0.0) || streamlet.arc_length <= target {
        return streamlet.clone();
    }
    let handle_s = streamlet.backward_length();
    let from = (handle_s - target / 2.0).clamp(0.0, streamlet.arc_length - target);
    streamlet.trimmed(from, from + target)
}

fn unit_direction<S: VelocitySource + ?Sized>(src: &S, p: Vec2, t: f64, sign: f64) -> Option<Vec2> {
    let v = src.velocity(p, t).ok()?;
    if v.length() < DEGENERATE_SPEED {
        return None;
    }
    (v * sign).normalized()
}

/// Traces one half of a streamlet; returns the samples after `p`.
fn trace_half<S: VelocitySource + ?Sized>(src: &S, p: Vec2, t: f64, sign: f64, half: f64, h: f64) -> Vec<Vec2> {
    let mut out = Vec::new();
    let mut pos = p;
    let mut s = 0.0;
    while half - s > 1e-12 * half.max(1.0) {
        let step = h.min(half - s);
        let Some(k1) = unit_direction(src, pos, t, sign) else { break };
        let Some(k2) = unit_direction(src, pos + k1 * (step / 2.0), t, sign) else { break };
        let Some(k3) = unit_direction(src, pos + k2 * (step / 2.0), t, sign) else { break };
        let Some(k4) = unit_direction(src, pos + k3 * step, t, sign) else { break };
        let next = pos + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step / 6.0);
        if src.velocity(next, t).is_err() {
            break;
        }
        out.push(next);
        pos = next;
        s += step;
    }
    out
}

/// Integrates the streamlet through `p` at time `t` and clamps its aspect
/// ratio. Critical points yield a single-sample streamlet.
pub fn integrate_streamlet<S: VelocitySource + ?Sized>(
    src: &S,
    p: Vec2,
    t: f64,
    cfg: &IntegratorConfig,
    thickness: f64,
) -> Result<Streamlet, OutOfDomain> {
    let v = src.velocity(p, t)?;
    let speed = v.length();
    if speed < DEGENERATE_SPEED {
        return Ok(Streamlet::from_points(vec![p], 0, thickness, v));
    }
    let half = cfg.length_gain * speed / 2.0;
    let mut back = trace_half(src, p, t, -1.0, half, cfg.step_h);
    let fwd = trace_half(src, p, t, 1.0, half, cfg.step_h);
    back.reverse();
    let handle_index = back.len();
    let mut points = back;
    points.push(p);
    points.extend(fwd);
    let raw = Streamlet::from_points(points, handle_index, thickness, v);
    Ok(clamp_aspect(&raw, cfg.max_aspect_ratio))
}

/// Outcome of advecting a handle across one time step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Advection {
    Moved(Vec2),
    /// The pathline left the domain.
    Died,
}

/// RK4 pathline from `t_from` to `t_to` (either direction) with
/// `cfg.substeps_per_dt` substeps.
pub fn advect_handle<S: VelocitySource + ?Sized>(
    src: &S,
    p: Vec2,
    t_from: f64,
    t_to: f64,
    cfg: &IntegratorConfig,
) -> Advection {
    let n = cfg.substeps_per_dt.max(1);
    let h = (t_to - t_from) / n as f64;
    let mut pos = p;
    let f = |q: Vec2, t: f64| src.velocity(q, t).ok();
    for i in 0..n {
        let t = t_from + i as f64 * h;
        let step = || -> Option<Vec2> {
            let k1 = f(pos, t)?;
            let k2 = f(pos + k1 * (h / 2.0), t + h / 2.0)?;
            let k3 = f(pos + k2 * (h / 2.0), t + h / 2.0)?;
            let k4 = f(pos + k3 * h, t + h)?;
            let next = pos + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            f(next, t + h).map(|_| next)
        };
        match step() {
            Some(next) => pos = next,
            None => return Advection::Died,
        }
    }
    Advection::Moved(pos)
}
