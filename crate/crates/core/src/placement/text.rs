//! Line-oriented text form of an [`ArrowSet`].
//!
//! ```text
//! arrowflow-arrowset 1
//! tool_version 0.1.0
//! rng_algorithm chacha8
//! d_sep 0.0625
//! ...
//! config_hash <sha256 of the header lines above it>
//! arrows 2
//! arrow 0 0 0 3 0.41
//! 0 0.5 0.5 1 0
//! ...
//! end
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so a parse of the output
//! reproduces every value bit for bit. Streamlets are not stored; they are
//! re-integrated from the handles when loading.

use std::fmt::Write as _;
use std::path::Path;

use super::{Arrow, ArrowSet, PlacementParams, PriorityOrder, StepRecord, RNG_ALGORITHM};
use crate::error::FormatError;
use crate::field::{sha256_hex, VectorField2D};
use crate::geom::Vec2;
use crate::integrate::{integrate_streamlet, IntegratorConfig};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "arrowflow-arrowset";
const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

const PARAM_KEYS: [&str; 11] = [
    "d_sep",
    "seed_ratio",
    "rng_seed",
    "thickness",
    "step_h",
    "length_gain",
    "max_aspect_ratio",
    "substeps_per_dt",
    "priority",
    "backward_stage",
    "last_step",
];

pub(super) fn is_reserved(key: &str) -> bool {
    PARAM_KEYS.contains(&key) || matches!(key, "rng_algorithm" | "tool_version" | "config_hash" | "arrows")
}

fn priority_name(p: PriorityOrder) -> &'static str {
    match p {
        PriorityOrder::LongestFirst => "longest_first",
        PriorityOrder::Random => "random",
    }
}

impl ArrowSet {
    fn header_lines(&self) -> Vec<(String, String)> {
        let p = &self.params;
        let mut lines: Vec<(String, String)> = vec![
            ("rng_algorithm".into(), RNG_ALGORITHM.into()),
            ("d_sep".into(), p.d_sep.to_string()),
            ("seed_ratio".into(), p.seed_ratio.to_string()),
            ("rng_seed".into(), p.rng_seed.to_string()),
            ("thickness".into(), p.thickness.to_string()),
            ("step_h".into(), p.integrator.step_h.to_string()),
            ("length_gain".into(), p.integrator.length_gain.to_string()),
            ("max_aspect_ratio".into(), p.integrator.max_aspect_ratio.to_string()),
            ("substeps_per_dt".into(), p.integrator.substeps_per_dt.to_string()),
            ("priority".into(), priority_name(p.priority).into()),
            ("backward_stage".into(), p.backward_stage.to_string()),
            ("last_step".into(), self.last_step.to_string()),
        ];
        lines.extend(self.meta.iter().cloned());
        lines
    }

    /// SHA-256 of the parameter and metadata header lines.
    pub fn config_hash(&self) -> String {
        sha256_hex(join_header(&self.header_lines()).as_bytes())
    }

    pub fn to_text(&self) -> String {
        let header = self.header_lines();
        let mut out = format!("{MAGIC} {FORMAT_VERSION}\ntool_version {TOOL_VERSION}\n");
        out.push_str(&join_header(&header));
        let _ = writeln!(out, "config_hash {}", sha256_hex(join_header(&header).as_bytes()));
        let _ = writeln!(out, "arrows {}", self.arrows.len());
        for a in &self.arrows {
            let _ = writeln!(
                out,
                "arrow {} {} {} {} {}",
                a.id, a.birth_step, a.seed_step, a.death_step, a.fade_delay
            );
            for r in &a.records {
                let _ = writeln!(out, "{} {} {} {} {}", r.step, r.handle.x, r.handle.y, r.velocity.x, r.velocity.y);
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_text())
    }

    /// Parses `text` and re-integrates every streamlet on `field`, which must
    /// be the (extended) field the set was placed on.
    pub fn from_text(text: &str, field: &VectorField2D) -> Result<ArrowSet, FormatError> {
        let (header, consumed) = parse_header(text)?;
        let ArrowSetHeader { params, last_step, meta } = header;
        if last_step != field.last_step() {
            return Err(FormatError::Header(format!(
                "arrow set has {} steps but the field has {}",
                last_step + 1,
                field.last_step() + 1
            )));
        }
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).skip(consumed);
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| FormatError::Header(format!("unexpected end of file, expected {what}")))
        };

        let (n, line) = next("arrow count")?;
        let count: usize = line
            .strip_prefix("arrows ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(n, "expected `arrows N`"))?;

        let mut arrows = Vec::with_capacity(count);
        let mut pending: Option<Pending> = None;
        loop {
            let (n, line) = next("arrow record or `end`")?;
            let mut fields = line.split_whitespace();
            match fields.next() {
                Some("end") => {
                    finish(pending.take(), last_step, &mut arrows)?;
                    break;
                }
                Some("arrow") => {
                    finish(pending.take(), last_step, &mut arrows)?;
                    let vals: Vec<&str> = fields.collect();
                    if vals.len() != 5 {
                        return Err(parse_err(n, "expected `arrow id t_b t_s t_d fade_delay`"));
                    }
                    let mut ints = [0usize; 4];
                    for (slot, v) in ints.iter_mut().zip(&vals[..4]) {
                        *slot = v.parse().map_err(|_| parse_err(n, "bad integer"))?;
                    }
                    let fade: f64 = vals[4].parse().map_err(|_| parse_err(n, "bad fade_delay"))?;
                    if !(0.0..1.0).contains(&fade) {
                        return Err(parse_err(n, "fade_delay outside [0, 1)"));
                    }
                    pending = Some((n, ints, fade, Vec::new()));
                }
                Some(step) => {
                    let Some((_, _, _, records)) = pending.as_mut() else {
                        return Err(parse_err(n, "step record before any arrow"));
                    };
                    let step: usize = step.parse().map_err(|_| parse_err(n, "bad step"))?;
                    let vals: Vec<f64> = fields
                        .map(str::parse)
                        .collect::<Result<_, _>>()
                        .map_err(|_| parse_err(n, "bad number"))?;
                    if vals.len() != 4 || vals.iter().any(|v| !v.is_finite()) {
                        return Err(parse_err(n, "expected `t x y vx vy` with finite values"));
                    }
                    let handle = Vec2::new(vals[0], vals[1]);
                    let streamlet = integrate_streamlet(
                        field,
                        handle,
                        field.step_time(step.min(last_step)),
                        &params.integrator,
                        params.thickness,
                    )
                    .map_err(|_| parse_err(n, "handle outside the field domain"))?;
                    records.push(StepRecord {
                        step,
                        handle,
                        velocity: Vec2::new(vals[2], vals[3]),
                        streamlet,
                    });
                }
                None => return Err(parse_err(n, "empty line")),
            }
        }
        if arrows.len() != count {
            return Err(FormatError::Header(format!("expected {count} arrows, found {}", arrows.len())));
        }
        if let Some((n, _)) = lines.next() {
            return Err(parse_err(n, "content after `end`"));
        }
        let mut ids: Vec<usize> = arrows.iter().map(|a| a.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(FormatError::Header("duplicate arrow id".into()));
        }

        let raster = super::Placement::raster_for(field, &params).map_err(|e| FormatError::Header(e.to_string()))?;
        let mut set = ArrowSet::new(arrows, last_step, params, raster);
        set.meta = meta;
        Ok(set)
    }

    pub fn read(path: impl AsRef<Path>, field: &VectorField2D) -> crate::Result<ArrowSet> {
        let text = std::fs::read_to_string(path)?;
        Ok(ArrowSet::from_text(&text, field)?)
    }
}

/// Arrow header line number, `[id, t_b, t_s, t_d]`, fade delay and records.
type Pending = (usize, [usize; 4], f64, Vec<StepRecord>);

fn finish(pending: Option<Pending>, last_step: usize, arrows: &mut Vec<Arrow>) -> Result<(), FormatError> {
    if let Some((n, [id, t_b, t_s, t_d], fade, records)) = pending {
        let arrow = Arrow::from_records(id, t_s, fade, records)
            .filter(|a| a.birth_step == t_b && a.death_step == t_d && t_d <= last_step)
            .ok_or_else(|| parse_err(n, "records do not match t_b..t_d"))?;
        arrows.push(arrow);
    }
    Ok(())
}

/// Everything above the arrow records.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrowSetHeader {
    pub params: PlacementParams,
    pub last_step: usize,
    /// Entries other than the placement parameters, in file order.
    pub meta: Vec<(String, String)>,
}

impl ArrowSetHeader {
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Reads and verifies the header. Returns it with the number of lines it
/// spans.
pub fn parse_header(text: &str) -> Result<(ArrowSetHeader, usize), FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| FormatError::Header(format!("unexpected end of file, expected {what}")))
    };

    let (_, first) = next("magic")?;
    match first.split_once(' ') {
        Some((MAGIC, v)) if v == FORMAT_VERSION.to_string() => {}
        Some((MAGIC, v)) => return Err(FormatError::UnsupportedVersion(v.parse().unwrap_or(0))),
        _ => return Err(FormatError::BadMagic { expected: MAGIC }),
    }

    let mut header: Vec<(String, String)> = Vec::new();
    let (consumed, stored_hash) = loop {
        let (n, line) = next("header")?;
        let (key, value) = line
            .split_once(' ')
            .ok_or_else(|| parse_err(n, "expected `key value`"))?;
        match key {
            "tool_version" => {}
            "config_hash" => break (n, value.to_string()),
            _ => header.push((key.to_string(), value.to_string())),
        }
    };
    if sha256_hex(join_header(&header).as_bytes()) != stored_hash {
        return Err(FormatError::Header("config_hash does not match header".into()));
    }

    let get = |key: &str| {
        header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| FormatError::Header(format!("missing `{key}`")))
    };
    if get("rng_algorithm")? != RNG_ALGORITHM {
        return Err(FormatError::Header(format!("unsupported rng_algorithm `{}`", get("rng_algorithm")?)));
    }
    let num = |key: &str| -> Result<f64, FormatError> {
        get(key)?
            .parse()
            .map_err(|_| FormatError::Header(format!("bad number for `{key}`")))
    };
    let int = |key: &str| -> Result<u64, FormatError> {
        get(key)?
            .parse()
            .map_err(|_| FormatError::Header(format!("bad integer for `{key}`")))
    };
    let params = PlacementParams {
        d_sep: num("d_sep")?,
        seed_ratio: num("seed_ratio")?,
        rng_seed: int("rng_seed")?,
        thickness: num("thickness")?,
        integrator: IntegratorConfig {
            step_h: num("step_h")?,
            length_gain: num("length_gain")?,
            max_aspect_ratio: num("max_aspect_ratio")?,
            substeps_per_dt: int("substeps_per_dt")? as usize,
        },
        priority: match get("priority")? {
            "longest_first" => PriorityOrder::LongestFirst,
            "random" => PriorityOrder::Random,
            other => return Err(FormatError::Header(format!("unknown priority `{other}`"))),
        },
        backward_stage: match get("backward_stage")? {
            "true" => true,
            "false" => false,
            other => return Err(FormatError::Header(format!("bad backward_stage `{other}`"))),
        },
    };
    params.validate().map_err(|e| FormatError::Header(e.to_string()))?;
    let last_step = int("last_step")? as usize;
    let meta = header
        .iter()
        .filter(|(k, _)| !PARAM_KEYS.contains(&k.as_str()) && k != "rng_algorithm")
        .cloned()
        .collect();
    Ok((
        ArrowSetHeader {
            params,
            last_step,
            meta,
        },
        consumed,
    ))
}

fn join_header(lines: &[(String, String)]) -> String {
    lines.iter().map(|(k, v)| format!("{k} {v}\n")).collect()
}

fn parse_err(line: usize, msg: &str) -> FormatError {
    FormatError::Parse {
        line,
        msg: msg.to_string(),
    }
}
