//! Command-line front end: `synth`, `generate`, `render` and `audit`.
//!
//! Settings come from built-in defaults, then an optional `key=value` config
//! file, then `--set key=value` overrides, then dedicated flags.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::density::{DensityMode, Normalization};
use crate::error::{ConfigError, Error, FormatError};
use crate::field::{sha256_hex, GridSpec, SyntheticField, VectorField2D};
use crate::geom::DomainRect;
use crate::grid::ScalarGrid;
use crate::integrate::IntegratorConfig;
use crate::metrics::MetricsReport;
use crate::placement::{parse_header, ArrowSet, PlacementParams, PriorityOrder, Scene, RNG_ALGORITHM};
use crate::render::{self, format_color, parse_color, FrameImage, RenderStyle, Rgba};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const FORMAT: i32 = 3;
    pub const INVARIANT: i32 = 4;
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::TimeOutOfRange(_) => exit::CONFIG,
        Error::Format(_) | Error::ChecksumMismatch { .. } => exit::FORMAT,
        Error::Io(_) | Error::Image(_) | Error::OutOfDomain(_) => exit::IO,
    }
}

#[derive(Parser, Debug)]
#[command(name = "arrowflow", version, about = "Animated, evenly spaced arrows for unsteady 2D flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample an analytic field into a VF2D file.
    Synth(SynthArgs),
    /// Place moving arrows on a VF2D field.
    Generate(GenerateArgs),
    /// Render PNG frames of a placed arrow set.
    Render(RenderArgs),
    /// Audit an arrow set and write a CSV report.
    Audit(AuditArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// One of constant, zero, rigid_rotation, source, sink, dipole, translating_vortex.
    #[arg(long)]
    pub kind: String,
    /// Node counts as NXxNYxNT.
    #[arg(long, default_value = "64x64x40")]
    pub grid: String,
    /// Time between slices.
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    pub dt: f64,
    /// Domain as xmin,ymin,xmax,ymax.
    #[arg(long, default_value = "0,0,1,1")]
    pub rect: String,
    /// Field parameter override, e.g. `--param omega=2`.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Flags shared by commands that read settings.
#[derive(Args, Debug, Default)]
pub struct ConfigArgs {
    /// Flat `key=value` settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Setting override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// VF2D field file.
    #[arg(long)]
    pub input: PathBuf,
    /// Arrow set file to write; the run manifest goes next to it.
    #[arg(long, default_value = "arrows.txt")]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub dsep: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub seed_ratio: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub scale_max: Option<f64>,
    /// uniform, jacobian, or file=PATH (DM2D).
    #[arg(long)]
    pub density: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub prefilter_sigma: Option<f64>,
    #[arg(long)]
    pub rng_seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Arrow set file written by `generate`.
    #[arg(long)]
    pub arrows: PathBuf,
    /// The VF2D field the arrows were generated from.
    #[arg(long)]
    pub input: PathBuf,
    /// Frame directory.
    #[arg(long, default_value = "frames")]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub frames_per_step: Option<usize>,
    /// PNG drawn under the arrows, scaled to the frame size.
    #[arg(long)]
    pub background: Option<PathBuf>,
    /// Frame size as WxH.
    #[arg(long)]
    pub size: Option<String>,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    #[arg(long)]
    pub arrows: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// CSV report path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Use the slow independent shortest-path oracle for separation.
    #[arg(long)]
    pub oracle: bool,
}

/// Density source of a run.
#[derive(Clone, Debug, PartialEq)]
pub enum DensitySpec {
    Uniform,
    Jacobian,
    File(PathBuf),
}

impl DensitySpec {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "uniform" => Ok(DensitySpec::Uniform),
            "jacobian" => Ok(DensitySpec::Jacobian),
            _ => match s.strip_prefix("file=") {
                Some(p) if !p.is_empty() => Ok(DensitySpec::File(PathBuf::from(p))),
                _ => Err(ConfigError::Parse(format!(
                    "density `{s}`, expected uniform, jacobian or file=PATH"
                ))),
            },
        }
    }

    fn name(&self) -> String {
        match self {
            DensitySpec::Uniform => "uniform".into(),
            DensitySpec::Jacobian => "jacobian".into(),
            DensitySpec::File(p) => format!("file={}", p.display()),
        }
    }
}

/// Every setting of a run. `None` means "derive from the field".
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Defaults to eight grid cells.
    pub d_sep: Option<f64>,
    pub seed_ratio: f64,
    pub rng_seed: u64,
    /// Defaults to `0.3 · d_sep`.
    pub thickness: Option<f64>,
    /// Defaults to a median arrow aspect ratio of 3.
    pub length_gain: Option<f64>,
    /// Defaults to `d_sep / 8`.
    pub step_h: Option<f64>,
    pub max_aspect_ratio: f64,
    pub substeps_per_dt: usize,
    pub priority: PriorityOrder,
    pub backward_stage: bool,
    pub density: DensitySpec,
    pub scale_max: f64,
    pub normalization: Normalization,
    pub prefilter_sigma: f64,
    pub frames_per_step: usize,
    /// Defaults to 512 pixels on the longer side of the visible domain.
    pub size: Option<(u32, u32)>,
    pub background: Option<PathBuf>,
    pub background_color: Rgba,
    pub fill: Rgba,
    pub outline: Option<Rgba>,
    pub outline_width: f64,
    pub fade_length: f64,
    pub morph_full_ratio: f64,
    pub disc_radius_factor: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let style = RenderStyle::default();
        RunConfig {
            d_sep: None,
            seed_ratio: 2.0,
            rng_seed: 0,
            thickness: None,
            length_gain: None,
            step_h: None,
            max_aspect_ratio: 6.0,
            substeps_per_dt: 4,
            priority: PriorityOrder::LongestFirst,
            backward_stage: true,
            density: DensitySpec::Uniform,
            scale_max: 4.0,
            normalization: Normalization::Global,
            prefilter_sigma: 0.0,
            frames_per_step: style.frames_per_step,
            size: None,
            background: None,
            background_color: style.background_color,
            fill: style.fill,
            outline: None,
            outline_width: 1.0,
            fade_length: style.fade_length,
            morph_full_ratio: style.morph_full_ratio,
            disc_radius_factor: style.disc_radius_factor,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError::Parse(format!("{key}={value}")))
}

fn opt_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>, ConfigError> {
    if value == "auto" {
        Ok(None)
    } else {
        num(key, value).map(Some)
    }
}

/// Parses `WxH`.
pub fn parse_size(s: &str) -> Result<(u32, u32), ConfigError> {
    let bad = || ConfigError::Parse(format!("size `{s}`, expected WxH"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((w.trim().parse().map_err(|_| bad())?, h.trim().parse().map_err(|_| bad())?))
}

fn split_kv(s: &str) -> Result<(&str, &str), ConfigError> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| ConfigError::Parse(format!("`{s}`, expected KEY=VALUE")))
}

impl RunConfig {
    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "d_sep" => self.d_sep = opt_num(key, value)?,
            "seed_ratio" => self.seed_ratio = num(key, value)?,
            "rng_seed" => self.rng_seed = num(key, value)?,
            "thickness" => self.thickness = opt_num(key, value)?,
            "length_gain" => self.length_gain = opt_num(key, value)?,
            "step_h" => self.step_h = opt_num(key, value)?,
            "max_aspect_ratio" => self.max_aspect_ratio = num(key, value)?,
            "substeps_per_dt" => self.substeps_per_dt = num(key, value)?,
            "priority" => {
                self.priority = match value {
                    "longest_first" => PriorityOrder::LongestFirst,
                    "random" => PriorityOrder::Random,
                    _ => return Err(ConfigError::Parse(format!("{key}={value}"))),
                }
            }
            "backward_stage" => self.backward_stage = num(key, value)?,
            "density" => self.density = DensitySpec::parse(value)?,
            "scale_max" => self.scale_max = num(key, value)?,
            "normalization" => {
                self.normalization = match value {
                    "global" => Normalization::Global,
                    "per_step" => Normalization::PerStep,
                    _ => return Err(ConfigError::Parse(format!("{key}={value}"))),
                }
            }
            "prefilter_sigma" => self.prefilter_sigma = num(key, value)?,
            "frames_per_step" => self.frames_per_step = num(key, value)?,
            "size" => self.size = if value == "auto" { None } else { Some(parse_size(value)?) },
            "background" => self.background = (!value.is_empty()).then(|| PathBuf::from(value)),
            "background_color" => self.background_color = parse_color(value)?,
            "fill" => self.fill = parse_color(value)?,
            "outline" => self.outline = if value == "none" { None } else { Some(parse_color(value)?) },
            "outline_width" => self.outline_width = num(key, value)?,
            "fade_length" => self.fade_length = num(key, value)?,
            "morph_full_ratio" => self.morph_full_ratio = num(key, value)?,
            "disc_radius_factor" => self.disc_radius_factor = num(key, value)?,
            _ => return Err(ConfigError::UnknownParam(key.to_string())),
        }
        Ok(())
    }

    /// Applies a `key=value` file; blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, path: &Path) -> crate::Result<()> {
        let text = std::fs::read_to_string(path)?;
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = split_kv(line)?;
            self.set(k, v)?;
        }
        Ok(())
    }

    fn resolve(args: &ConfigArgs) -> crate::Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &args.config {
            cfg.apply_file(path)?;
        }
        for s in &args.sets {
            let (k, v) = split_kv(s)?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Settings as `key=value` lines, in a fixed order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let auto = |v: Option<f64>| v.map_or("auto".to_string(), |x| x.to_string());
        vec![
            ("d_sep", auto(self.d_sep)),
            ("seed_ratio", self.seed_ratio.to_string()),
            ("rng_seed", self.rng_seed.to_string()),
            ("thickness", auto(self.thickness)),
            ("length_gain", auto(self.length_gain)),
            ("step_h", auto(self.step_h)),
            ("max_aspect_ratio", self.max_aspect_ratio.to_string()),
            ("substeps_per_dt", self.substeps_per_dt.to_string()),
            (
                "priority",
                match self.priority {
                    PriorityOrder::LongestFirst => "longest_first",
                    PriorityOrder::Random => "random",
                }
                .to_string(),
            ),
            ("backward_stage", self.backward_stage.to_string()),
            ("density", self.density.name()),
            ("scale_max", self.scale_max.to_string()),
            ("normalization", normalization_name(self.normalization).to_string()),
            ("prefilter_sigma", self.prefilter_sigma.to_string()),
            ("frames_per_step", self.frames_per_step.to_string()),
            ("size", self.size.map_or("auto".to_string(), |(w, h)| format!("{w}x{h}"))),
            (
                "background",
                self.background.as_ref().map_or(String::new(), |p| p.display().to_string()),
            ),
            ("background_color", format_color(self.background_color)),
            ("fill", format_color(self.fill)),
            ("outline", self.outline.map_or("none".to_string(), format_color)),
            ("outline_width", self.outline_width.to_string()),
            ("fade_length", self.fade_length.to_string()),
            ("morph_full_ratio", self.morph_full_ratio.to_string()),
            ("disc_radius_factor", self.disc_radius_factor.to_string()),
        ]
    }

    /// Placement parameters for `field`, filling in derived defaults.
    pub fn placement_params(&self, field: &VectorField2D) -> Result<PlacementParams, ConfigError> {
        let g = field.grid();
        let d_sep = self.d_sep.unwrap_or(8.0 * g.dx.min(g.dy));
        if !(d_sep > 0.0 && d_sep.is_finite()) {
            return Err(ConfigError::invalid("d_sep", "must be positive"));
        }
        let mut p = PlacementParams::for_field(field, d_sep);
        if let Some(th) = self.thickness {
            if !(th > 0.0 && th.is_finite()) {
                return Err(ConfigError::invalid("thickness", "must be positive"));
            }
            p.thickness = th;
            p.integrator.length_gain = IntegratorConfig::auto_length_gain(field, th, 3.0);
        }
        if let Some(c) = self.length_gain {
            p.integrator.length_gain = c;
        }
        if let Some(h) = self.step_h {
            p.integrator.step_h = h;
        }
        p.integrator.max_aspect_ratio = self.max_aspect_ratio;
        p.integrator.substeps_per_dt = self.substeps_per_dt;
        p.seed_ratio = self.seed_ratio;
        p.rng_seed = self.rng_seed;
        p.priority = self.priority;
        p.backward_stage = self.backward_stage;
        p.validate()?;
        Ok(p)
    }

    pub fn density_mode(&self) -> crate::Result<DensityMode> {
        Ok(match &self.density {
            DensitySpec::Uniform => DensityMode::Uniform,
            DensitySpec::Jacobian => DensityMode::Jacobian {
                scale_max: self.scale_max,
                normalization: self.normalization,
            },
            DensitySpec::File(path) => DensityMode::Map {
                grid: ScalarGrid::read_dm2d(path)?,
                scale_max: self.scale_max,
            },
        })
    }

    /// Render style for a field whose visible rectangle is `visible`.
    pub fn render_style(&self, visible: DomainRect) -> crate::Result<RenderStyle> {
        let (width, height) = self.size.unwrap_or_else(|| {
            let aspect = visible.width() / visible.height();
            if aspect >= 1.0 {
                (512, ((512.0 / aspect).round() as u32).max(1))
            } else {
                (((512.0 * aspect).round() as u32).max(1), 512)
            }
        });
        let background = match &self.background {
            Some(p) => Some(FrameImage::load_scaled(p, width, height)?),
            None => None,
        };
        let style = RenderStyle {
            frames_per_step: self.frames_per_step,
            fill: self.fill,
            outline: self.outline.map(|c| (c, self.outline_width)),
            fade_length: self.fade_length,
            morph_full_ratio: self.morph_full_ratio,
            disc_radius_factor: self.disc_radius_factor,
            width,
            height,
            background_color: self.background_color,
            background,
            ..RenderStyle::default()
        };
        style.validate()?;
        Ok(style)
    }
}

fn normalization_name(n: Normalization) -> &'static str {
    match n {
        Normalization::Global => "global",
        Normalization::PerStep => "per_step",
    }
}

/// Runs the tool on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::CONFIG } else { exit::OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> crate::Result<i32> {
    match cmd {
        Command::Synth(a) => cmd_synth(&a).map(|_| exit::OK),
        Command::Generate(a) => cmd_generate(&a).map(|_| exit::OK),
        Command::Render(a) => cmd_render(&a).map(|_| exit::OK),
        Command::Audit(a) => cmd_audit(&a).map(|ok| if ok { exit::OK } else { exit::INVARIANT }),
    }
}

/// Parses `NXxNYxNT`.
pub fn parse_grid(s: &str) -> Result<(usize, usize, usize), ConfigError> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    let bad = || ConfigError::Parse(format!("grid `{s}`, expected NXxNYxNT"));
    match parts.as_slice() {
        [a, b, c] => Ok((
            a.parse().map_err(|_| bad())?,
            b.parse().map_err(|_| bad())?,
            c.parse().map_err(|_| bad())?,
        )),
        _ => Err(bad()),
    }
}

fn parse_rect(s: &str) -> Result<DomainRect, ConfigError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| ConfigError::Parse(format!("rect `{s}`")))?;
    match v.as_slice() {
        &[x0, y0, x1, y1] if x0 < x1 && y0 < y1 => Ok(DomainRect::new(x0, y0, x1, y1)),
        _ => Err(ConfigError::invalid("rect", "expected xmin,ymin,xmax,ymax with min < max")),
    }
}

pub fn cmd_synth(args: &SynthArgs) -> crate::Result<VectorField2D> {
    let params = args
        .params
        .iter()
        .map(|s| {
            let (k, v) = split_kv(s)?;
            Ok((k.to_string(), num::<f64>(k, v)?))
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    let kind = SyntheticField::parse(&args.kind, &params)?;
    let (nx, ny, nt) = parse_grid(&args.grid)?;
    let grid = GridSpec::over_rect(parse_rect(&args.rect)?, nx, ny, nt, 0.0, args.dt);
    let field = kind.sample_on(grid)?;
    field.write_vf2d(&args.out)?;
    println!("wrote {} ({nx}x{ny}x{nt}, checksum {})", args.out.display(), field.checksum());
    Ok(field)
}

fn with_prefilter(field: VectorField2D, sigma: f64) -> Result<VectorField2D, ConfigError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(ConfigError::invalid("prefilter_sigma", "must be non-negative"));
    }
    Ok(if sigma > 0.0 { field.gaussian_prefilter(sigma) } else { field })
}

pub fn cmd_generate(args: &GenerateArgs) -> crate::Result<ArrowSet> {
    let mut cfg = RunConfig::resolve(&args.config)?;
    if let Some(v) = args.dsep {
        cfg.d_sep = Some(v);
    }
    if let Some(v) = args.seed_ratio {
        cfg.seed_ratio = v;
    }
    if let Some(v) = args.scale_max {
        cfg.scale_max = v;
    }
    if let Some(v) = &args.density {
        cfg.density = DensitySpec::parse(v)?;
    }
    if let Some(v) = args.prefilter_sigma {
        cfg.prefilter_sigma = v;
    }
    if let Some(v) = args.rng_seed {
        cfg.rng_seed = v;
    }

    let field = VectorField2D::read_vf2d(&args.input)?;
    let checksum = field.checksum();
    let work = with_prefilter(field, cfg.prefilter_sigma)?;
    let params = cfg.placement_params(&work)?;
    let mode = cfg.density_mode()?;
    let scene = Scene::new(&work, params, &mode)?;
    let mut set = scene.place()?;

    set.set_meta("field_checksum", checksum.clone());
    set.set_meta("prefilter_sigma", cfg.prefilter_sigma.to_string());
    match &mode {
        DensityMode::Uniform => set.set_meta("density", "uniform"),
        DensityMode::Jacobian {
            scale_max,
            normalization,
        } => {
            set.set_meta("density", "jacobian");
            set.set_meta("scale_max", scale_max.to_string());
            set.set_meta("normalization", normalization_name(*normalization));
        }
        DensityMode::Map { grid, scale_max } => {
            let DensitySpec::File(path) = &cfg.density else { unreachable!() };
            set.set_meta("density", "file");
            set.set_meta("scale_max", scale_max.to_string());
            set.set_meta("density_file", path.display().to_string());
            set.set_meta("density_checksum", sha256_hex(&grid.to_dm2d_bytes()));
        }
    }
    set.write(&args.out)?;

    let mut manifest = String::new();
    let _ = writeln!(manifest, "tool_version {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(manifest, "config_hash {}", set.config_hash());
    let _ = writeln!(manifest, "rng_algorithm {RNG_ALGORITHM}");
    let _ = writeln!(manifest, "input {}", args.input.display());
    let _ = writeln!(manifest, "input_checksum {checksum}");
    let _ = writeln!(manifest, "arrow_count {}", set.arrows().len());
    let _ = writeln!(manifest, "steps {}", set.step_count());
    let p = set.params();
    let _ = writeln!(manifest, "resolved.d_sep {}", p.d_sep);
    let _ = writeln!(manifest, "resolved.d_seed {}", p.d_seed());
    let _ = writeln!(manifest, "resolved.thickness {}", p.thickness);
    let _ = writeln!(manifest, "resolved.length_gain {}", p.integrator.length_gain);
    let _ = writeln!(manifest, "resolved.step_h {}", p.integrator.step_h);
    let r = set.raster();
    let _ = writeln!(manifest, "raster {}x{} pixel_size {}", r.width, r.height, r.pixel_size);
    for (k, v) in cfg.to_pairs() {
        let _ = writeln!(manifest, "config.{k} {v}");
    }
    std::fs::write(manifest_path(&args.out), manifest)?;
    println!(
        "placed {} arrows over {} steps into {}",
        set.arrows().len(),
        set.step_count(),
        args.out.display()
    );
    Ok(set)
}

/// Run manifest written next to an arrow set file.
pub fn manifest_path(arrows: &Path) -> PathBuf {
    let mut name = arrows.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest");
    arrows.with_file_name(name)
}

/// An arrow set file re-attached to the field it was generated from.
pub struct Restored {
    pub scene: Scene,
    pub set: ArrowSet,
}

/// Reads an arrow set and its field, checks the field checksum, and rebuilds
/// the extended field and density maps used during placement.
pub fn restore(arrows: &Path, field_path: &Path) -> crate::Result<Restored> {
    let text = std::fs::read_to_string(arrows)?;
    let (header, _) = parse_header(&text)?;
    let field = VectorField2D::read_vf2d(field_path)?;
    let expected = header
        .meta_value("field_checksum")
        .ok_or_else(|| FormatError::Header("missing field_checksum".into()))?;
    let found = field.checksum();
    if expected != found {
        return Err(Error::ChecksumMismatch {
            expected: expected.to_string(),
            found,
        });
    }
    let meta_num = |key: &str| -> Result<f64, FormatError> {
        header
            .meta_value(key)
            .ok_or_else(|| FormatError::Header(format!("missing `{key}`")))?
            .parse()
            .map_err(|_| FormatError::Header(format!("bad `{key}`")))
    };
    let sigma = meta_num("prefilter_sigma")?;
    let mode = match header.meta_value("density") {
        Some("uniform") => DensityMode::Uniform,
        Some("jacobian") => DensityMode::Jacobian {
            scale_max: meta_num("scale_max")?,
            normalization: match header.meta_value("normalization") {
                Some("global") => Normalization::Global,
                Some("per_step") => Normalization::PerStep,
                _ => return Err(FormatError::Header("bad `normalization`".into()).into()),
            },
        },
        Some("file") => {
            let path = header
                .meta_value("density_file")
                .ok_or_else(|| FormatError::Header("missing `density_file`".into()))?;
            let grid = ScalarGrid::read_dm2d(path)?;
            let expected = header.meta_value("density_checksum").unwrap_or_default();
            let found = sha256_hex(&grid.to_dm2d_bytes());
            if expected != found {
                return Err(Error::ChecksumMismatch {
                    expected: expected.to_string(),
                    found,
                });
            }
            DensityMode::Map {
                grid,
                scale_max: meta_num("scale_max")?,
            }
        }
        _ => return Err(FormatError::Header("missing or unknown `density`".into()).into()),
    };
    let work = with_prefilter(field, sigma)?;
    let scene = Scene::new(&work, header.params, &mode)?;
    let set = ArrowSet::from_text(&text, &scene.field)?;
    Ok(Restored { scene, set })
}

pub fn cmd_render(args: &RenderArgs) -> crate::Result<Vec<PathBuf>> {
    let mut cfg = RunConfig::resolve(&args.config)?;
    if let Some(v) = args.frames_per_step {
        cfg.frames_per_step = v;
    }
    if let Some(v) = &args.background {
        cfg.background = Some(v.clone());
    }
    if let Some(v) = &args.size {
        cfg.size = Some(parse_size(v)?);
    }
    let Restored { scene, set } = restore(&args.arrows, &args.input)?;
    let style = cfg.render_style(scene.field.visible_rect())?;
    let paths = render::render_all(&set, &scene.field, &scene.density, &style, &args.out)?;
    println!("rendered {} frames into {}", paths.len(), args.out.display());
    Ok(paths)
}

/// Writes the report and returns whether separation and coverage hold.
pub fn cmd_audit(args: &AuditArgs) -> crate::Result<bool> {
    let Restored { scene, set } = restore(&args.arrows, &args.input)?;
    let report = MetricsReport::build(&set, &scene.field, &scene.density, args.oracle);
    let mut csv = report.to_csv();
    let _ = writeln!(csv, "# tool_version,{}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(csv, "# config_hash,{}", set.config_hash());
    match &args.out {
        Some(path) => std::fs::write(path, &csv)?,
        None => print!("{csv}"),
    }
    let ok = report.separation_ok() && report.coverage_ok();
    if !ok {
        eprintln!(
            "audit failed: separation {}, coverage {}",
            if report.separation_ok() { "ok" } else { "violated" },
            if report.coverage_ok() { "ok" } else { "incomplete" }
        );
    }
    Ok(ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_keys_round_trip_through_pairs() {
        let mut cfg = RunConfig::default();
        for (k, v) in [
            ("d_sep", "0.1"),
            ("density", "file=maps/d.dm2d"),
            ("normalization", "per_step"),
            ("size", "320x200"),
            ("outline", "#000000ff"),
            ("priority", "random"),
            ("backward_stage", "false"),
        ] {
            cfg.set(k, v).unwrap();
        }
        let mut again = RunConfig::default();
        for (k, v) in cfg.to_pairs() {
            again.set(k, &v).unwrap();
        }
        assert_eq!(again, cfg);
    }

    #[test]
    fn bad_settings_are_config_errors() {
        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.set("nope", "1"), Err(ConfigError::UnknownParam(_))));
        assert!(cfg.set("seed_ratio", "two").is_err());
        assert!(cfg.set("density", "file=").is_err());
        assert!(cfg.set("size", "12").is_err());
        assert_eq!(exit_code(&ConfigError::UnknownKind("x".into()).into()), exit::CONFIG);
        assert_eq!(exit_code(&FormatError::BadMagic { expected: "VF2D" }.into()), exit::FORMAT);
    }

    #[test]
    fn grid_and_size_parsing() {
        assert_eq!(parse_grid("64x32x40").unwrap(), (64, 32, 40));
        assert!(parse_grid("64x32").is_err());
        assert_eq!(parse_size("640x480").unwrap(), (640, 480));
        assert_eq!(manifest_path(Path::new("out/a.txt")), PathBuf::from("out/a.txt.manifest"));
    }

    #[test]
    fn default_size_follows_the_domain_aspect() {
        let cfg = RunConfig::default();
        let s = cfg.render_style(DomainRect::new(0.0, 0.0, 2.0, 1.0)).unwrap();
        assert_eq!((s.width, s.height), (512, 256));
    }
}
