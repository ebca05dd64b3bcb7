//! Placement of moving arrows over all time steps.
//!
//! Three stages:
//!
//! 1. fill step 0 with arrows seeded at least `d_seed` apart;
//! 2. for every later step, first carry over the arrows of the previous step
//!    (longest first, dropping those that end up closer than `d_sep` to an
//!    already carried arrow or leave the domain), then fill the gaps with
//!    new arrows;
//! 3. walk back from the last step and extend births backward wherever the
//!    earlier step still has room.
//!
//! Distances are read from a [`DistanceMap`] rebuilt for every step.

mod text;

use std::cmp::Ordering;
use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::density::{DensityMode, DensitySeries};
use crate::distmap::DistanceMap;
use crate::error::ConfigError;
use crate::field::VectorField2D;
use crate::geom::{DomainRect, Vec2};
use crate::grid::RasterSpec;
use crate::integrate::{advect_handle, integrate_streamlet, Advection, IntegratorConfig, Streamlet};

pub use text::{parse_header, ArrowSetHeader, FORMAT_VERSION};

/// Identifier of the PRNG used for shuffles and fade delays.
pub const RNG_ALGORITHM: &str = "chacha8";

/// Order in which arrows compete when propagated to a neighboring step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorityOrder {
    /// Longest screen-space streamlet first, ties by ascending id.
    LongestFirst,
    /// Seeded shuffle; a baseline for comparisons.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlacementParams {
    pub d_sep: f64,
    /// `d_seed = seed_ratio · d_sep`.
    pub seed_ratio: f64,
    pub rng_seed: u64,
    /// Glyph support thickness, domain units.
    pub thickness: f64,
    pub integrator: IntegratorConfig,
    pub priority: PriorityOrder,
    /// Run the backward stage that extends births.
    pub backward_stage: bool,
}

impl PlacementParams {
    /// Defaults derived from `d_sep` and the field: thickness `0.3·d_sep`,
    /// arc step `d_sep/8`, aspect ratio at most 6, 4 RK4 substeps per step,
    /// and a length gain giving the median arrow an aspect ratio of 3.
    pub fn for_field(field: &VectorField2D, d_sep: f64) -> Self {
        let thickness = 0.3 * d_sep;
        PlacementParams {
            d_sep,
            seed_ratio: 2.0,
            rng_seed: 0,
            thickness,
            integrator: IntegratorConfig {
                step_h: d_sep / 8.0,
                length_gain: IntegratorConfig::auto_length_gain(field, thickness, 3.0),
                max_aspect_ratio: 6.0,
                substeps_per_dt: 4,
            },
            priority: PriorityOrder::LongestFirst,
            backward_stage: true,
        }
    }

    pub fn d_seed(&self) -> f64 {
        self.seed_ratio * self.d_sep
    }

    /// Distance-map pixel size: a quarter of `d_sep`.
    pub fn pixel_size(&self) -> f64 {
        self.d_sep / 4.0
    }

    /// Pitch of the Cartesian grid of candidate seeds.
    pub fn seed_pitch(&self) -> f64 {
        self.d_sep / 2.0
    }

    /// Longest streamlet the clamp allows.
    pub fn max_arrow_length(&self) -> f64 {
        self.integrator.max_aspect_ratio * self.thickness
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.d_sep > 0.0 && self.d_sep.is_finite()) {
            return Err(ConfigError::invalid("d_sep", "must be positive"));
        }
        if !(self.seed_ratio > 1.0 && self.seed_ratio.is_finite()) {
            return Err(ConfigError::invalid("seed_ratio", "must be greater than 1"));
        }
        if !(self.thickness > 0.0 && self.thickness.is_finite()) {
            return Err(ConfigError::invalid("thickness", "must be positive"));
        }
        self.integrator.validate()
    }
}

/// Buffer-zone width for a field: half of the longest possible arrow.
pub fn buffer_margin(field: &VectorField2D, params: &PlacementParams) -> f64 {
    let longest = (params.integrator.length_gain * field.max_speed()).min(params.max_arrow_length());
    longest / 2.0
}

/// State of an arrow at one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub handle: Vec2,
    pub velocity: Vec2,
    pub streamlet: Streamlet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Arrow {
    pub id: usize,
    pub seed_step: usize,
    pub birth_step: usize,
    pub death_step: usize,
    /// Delay before fading, as a fraction of a step in `[0, 1)`.
    pub fade_delay: f64,
    records: VecDeque<StepRecord>,
}

impl Arrow {
    fn seeded(id: usize, step: usize, streamlet: Streamlet, fade_delay: f64) -> Self {
        let mut records = VecDeque::new();
        records.push_back(StepRecord {
            step,
            handle: streamlet.handle(),
            velocity: streamlet.velocity_at_handle(),
            streamlet,
        });
        Arrow {
            id,
            seed_step: step,
            birth_step: step,
            death_step: step,
            fade_delay,
            records,
        }
    }

    pub(crate) fn from_records(
        id: usize,
        seed_step: usize,
        fade_delay: f64,
        records: Vec<StepRecord>,
    ) -> Option<Self> {
        let birth = records.first()?.step;
        let death = records.last()?.step;
        if records.iter().enumerate().any(|(i, r)| r.step != birth + i) || !(birth..=death).contains(&seed_step) {
            return None;
        }
        Some(Arrow {
            id,
            seed_step,
            birth_step: birth,
            death_step: death,
            fade_delay,
            records: records.into(),
        })
    }

    pub fn is_alive(&self, step: usize) -> bool {
        (self.birth_step..=self.death_step).contains(&step)
    }

    pub fn record(&self, step: usize) -> Option<&StepRecord> {
        if self.is_alive(step) {
            self.records.get(step - self.birth_step)
        } else {
            None
        }
    }

    pub fn records(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter()
    }

    /// Number of steps the arrow is alive.
    pub fn lifetime(&self) -> usize {
        self.death_step - self.birth_step + 1
    }
}

/// Sort key for propagation: ascending order puts long arrows first.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorityKey {
    pub neg_screen_length: f64,
    pub id: usize,
}

impl Eq for PriorityKey {}

impl PartialOrd for PriorityKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PriorityKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.neg_screen_length
            .total_cmp(&other.neg_screen_length)
            .then(self.id.cmp(&other.id))
    }
}

/// Priority of `arrow` at `step`: its streamlet length divided by the
/// density at the handle (the on-screen length relative to its thickness).
pub fn priority_key(arrow: &Arrow, step: usize, density: &DensitySeries) -> PriorityKey {
    let rec = arrow.record(step).expect("arrow must be alive at the priority step");
    let rho = density.at_step(step).at(rec.handle);
    PriorityKey {
        neg_screen_length: -(rec.streamlet.arc_length() / rho),
        id: arrow.id,
    }
}

/// Direction of a propagation pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Counts from one propagation pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PropagationStats {
    pub candidates: usize,
    pub accepted: usize,
    pub left_domain: usize,
    pub conflicts: usize,
}

/// All arrows of an animation plus the parameters that produced them.
#[derive(Clone, Debug)]
pub struct ArrowSet {
    arrows: Vec<Arrow>,
    last_step: usize,
    params: PlacementParams,
    raster: RasterSpec,
    alive: Vec<Vec<usize>>,
    meta: Vec<(String, String)>,
}

impl ArrowSet {
    pub(crate) fn new(arrows: Vec<Arrow>, last_step: usize, params: PlacementParams, raster: RasterSpec) -> Self {
        let mut set = ArrowSet {
            arrows,
            last_step,
            params,
            raster,
            alive: Vec::new(),
            meta: Vec::new(),
        };
        set.reindex();
        set
    }

    fn reindex(&mut self) {
        self.arrows.sort_by_key(|a| a.id);
        let mut alive = vec![Vec::new(); self.last_step + 1];
        for (i, a) in self.arrows.iter().enumerate() {
            let last = a.death_step.min(self.last_step);
            for ids in &mut alive[a.birth_step..=last] {
                ids.push(i);
            }
        }
        self.alive = alive;
    }

    pub fn arrows(&self) -> &[Arrow] {
        &self.arrows
    }

    pub fn params(&self) -> &PlacementParams {
        &self.params
    }

    pub fn raster(&self) -> &RasterSpec {
        &self.raster
    }

    pub fn last_step(&self) -> usize {
        self.last_step
    }

    pub fn step_count(&self) -> usize {
        self.last_step + 1
    }

    /// Arrows alive at `step`, by ascending id.
    pub fn alive_at(&self, step: usize) -> impl Iterator<Item = &Arrow> + '_ {
        self.alive
            .get(step)
            .into_iter()
            .flatten()
            .map(move |&i| &self.arrows[i])
    }

    pub fn get(&self, id: usize) -> Option<&Arrow> {
        self.arrows
            .binary_search_by_key(&id, |a| a.id)
            .ok()
            .map(|i| &self.arrows[i])
    }

    /// Copy keeping only the arrows for which `keep` holds.
    pub fn filtered(&self, keep: impl Fn(&Arrow) -> bool) -> ArrowSet {
        let arrows = self.arrows.iter().filter(|a| keep(a)).cloned().collect();
        let mut set = ArrowSet::new(arrows, self.last_step, self.params, self.raster);
        set.meta = self.meta.clone();
        set
    }

    /// Free-form header entries carried through serialization.
    pub fn meta(&self) -> &[(String, String)] {
        &self.meta
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Sets (or replaces) a header entry.
    ///
    /// # Panics
    ///
    /// If the key is empty, contains whitespace or names a placement
    /// parameter, or if the value spans several lines.
    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let key = key.into();
        let value = value.into();
        assert!(
            !key.is_empty() && !key.contains(char::is_whitespace) && !text::is_reserved(&key),
            "invalid header key `{key}`"
        );
        assert!(!value.contains(['\n', '\r']), "header value for `{key}` spans lines");
        match self.meta.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => entry.1 = value,
            None => self.meta.push((key, value)),
        }
    }

    /// Distance map of `step` holding every arrow alive there.
    pub fn distance_map_at(&self, step: usize, density: &DensitySeries) -> DistanceMap {
        let mut map = DistanceMap::new(self.raster, density.at_step(step)).expect("density raster matches arrow set");
        for a in self.alive_at(step) {
            map.insert_arrow(&a.record(step).unwrap().streamlet);
        }
        map
    }

    /// Candidate seed positions of the Cartesian grid (unshuffled).
    pub fn seed_positions(&self, field: &VectorField2D) -> Vec<Vec2> {
        seed_grid(field.domain_rect(), self.params.seed_pitch())
    }
}

/// Cell-centered Cartesian grid of pitch `pitch` inside `rect`.
pub fn seed_grid(rect: DomainRect, pitch: f64) -> Vec<Vec2> {
    let nx = ((rect.width() / pitch).floor() as usize).max(1);
    let ny = ((rect.height() / pitch).floor() as usize).max(1);
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let p = Vec2::new(rect.xmin + (i as f64 + 0.5) * pitch, rect.ymin + (j as f64 + 0.5) * pitch);
            if rect.contains(p) {
                out.push(p);
            }
        }
    }
    out
}

/// Incremental placement state. [`place_moving_arrows`] drives it through
/// all three stages; the individual passes are public for inspection.
pub struct Placement<'a> {
    field: &'a VectorField2D,
    density: &'a DensitySeries,
    params: PlacementParams,
    raster: RasterSpec,
    seeds: Vec<Vec2>,
    rng: ChaCha8Rng,
    order_rng: ChaCha8Rng,
    arrows: Vec<Arrow>,
}

impl<'a> Placement<'a> {
    /// `field` should already carry its buffer zone. `density` must be built
    /// on [`Placement::raster_for`] of the same field.
    pub fn new(field: &'a VectorField2D, density: &'a DensitySeries, params: PlacementParams) -> crate::Result<Self> {
        params.validate()?;
        let raster = Self::raster_for(field, &params)?;
        if *density.raster() != raster {
            return Err(ConfigError::invalid("density", "raster does not match d_sep/4 pixels over the field").into());
        }
        let mut order_rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
        order_rng.set_stream(1);
        Ok(Placement {
            field,
            density,
            raster,
            seeds: seed_grid(field.domain_rect(), params.seed_pitch()),
            rng: ChaCha8Rng::seed_from_u64(params.rng_seed),
            order_rng,
            params,
            arrows: Vec::new(),
        })
    }

    /// Distance-map raster: `d_sep/4` pixels covering the whole field.
    pub fn raster_for(field: &VectorField2D, params: &PlacementParams) -> Result<RasterSpec, ConfigError> {
        RasterSpec::covering(field.domain_rect(), params.pixel_size())
    }

    pub fn arrows(&self) -> &[Arrow] {
        &self.arrows
    }

    pub fn raster(&self) -> &RasterSpec {
        &self.raster
    }

    /// Fresh map of `step` containing the arrows currently alive there.
    pub fn distance_map(&self, step: usize) -> DistanceMap {
        let mut map = DistanceMap::new(self.raster, self.density.at_step(step))
            .expect("raster checked at construction")
            .with_cutoff(self.params.d_seed() * self.density.at_step(step).scale_max());
        for a in self.arrows.iter().filter(|a| a.is_alive(step)) {
            map.insert_arrow(&a.record(step).unwrap().streamlet);
        }
        map
    }

    fn streamlet_at(&self, p: Vec2, step: usize) -> Option<Streamlet> {
        integrate_streamlet(
            self.field,
            p,
            self.field.step_time(step),
            &self.params.integrator,
            self.params.thickness,
        )
        .ok()
    }

    /// Greedy fill of `step`: walks a shuffled copy of the seed grid and
    /// inserts every candidate whose distance to the map exceeds `d_seed`.
    /// Returns the number of new arrows.
    pub fn complete_time_step(&mut self, step: usize, map: &mut DistanceMap) -> usize {
        let mut order = self.seeds.clone();
        order.shuffle(&mut self.rng);
        let d_seed = self.params.d_seed();
        let mut inserted = 0;
        for pos in order {
            let Some(candidate) = self.streamlet_at(pos, step) else {
                continue;
            };
            if map.distance_to_arrows(&candidate) > d_seed {
                map.insert_arrow(&candidate);
                let fade_delay = self.rng.random::<f64>();
                let id = self.arrows.len();
                self.arrows.push(Arrow::seeded(id, step, candidate, fade_delay));
                inserted += 1;
            }
        }
        inserted
    }

    /// Tries to extend every arrow alive at the neighboring step (`step - 1`
    /// forward, `step + 1` backward) but not at `step` into `step`.
    pub fn propagate_arrows_one_step(&mut self, step: usize, dir: Direction, map: &mut DistanceMap) -> PropagationStats {
        let prev = match dir {
            Direction::Forward => step.checked_sub(1),
            Direction::Backward => Some(step + 1),
        };
        let mut stats = PropagationStats::default();
        let Some(prev) = prev else { return stats };
        let mut candidates: Vec<usize> = (0..self.arrows.len())
            .filter(|&i| self.arrows[i].is_alive(prev) && !self.arrows[i].is_alive(step))
            .collect();
        match self.params.priority {
            PriorityOrder::LongestFirst => {
                candidates.sort_by_cached_key(|&i| priority_key(&self.arrows[i], prev, self.density));
            }
            PriorityOrder::Random => candidates.shuffle(&mut self.order_rng),
        }
        stats.candidates = candidates.len();
        let (t_from, t_to) = (self.field.step_time(prev), self.field.step_time(step));
        for i in candidates {
            let handle = self.arrows[i].record(prev).unwrap().handle;
            let moved = match advect_handle(self.field, handle, t_from, t_to, &self.params.integrator) {
                Advection::Moved(p) => self.streamlet_at(p, step),
                Advection::Died => None,
            };
            let Some(streamlet) = moved else {
                stats.left_domain += 1;
                continue;
            };
            if map.distance_to_arrows(&streamlet) < self.params.d_sep {
                stats.conflicts += 1;
                continue;
            }
            map.insert_arrow(&streamlet);
            let rec = StepRecord {
                step,
                handle: streamlet.handle(),
                velocity: streamlet.velocity_at_handle(),
                streamlet,
            };
            let arrow = &mut self.arrows[i];
            match dir {
                Direction::Forward => {
                    arrow.records.push_back(rec);
                    arrow.death_step = step;
                }
                Direction::Backward => {
                    arrow.records.push_front(rec);
                    arrow.birth_step = step;
                }
            }
            stats.accepted += 1;
        }
        stats
    }

    /// Runs the three stages and returns the finished set.
    pub fn run(mut self) -> ArrowSet {
        let last = self.field.last_step();
        let mut map = self.distance_map(0);
        self.complete_time_step(0, &mut map);
        for t in 1..=last {
            let mut map = self.distance_map(t);
            self.propagate_arrows_one_step(t, Direction::Forward, &mut map);
            self.complete_time_step(t, &mut map);
        }
        if self.params.backward_stage {
            for t in (0..last).rev() {
                let mut map = self.distance_map(t);
                self.propagate_arrows_one_step(t, Direction::Backward, &mut map);
            }
        }
        self.into_arrow_set()
    }

    pub fn into_arrow_set(self) -> ArrowSet {
        let mut set = ArrowSet::new(self.arrows, self.field.last_step(), self.params, self.raster);
        set.set_meta("field_checksum", self.field.checksum());
        set
    }
}

/// A field extended by its buffer zone together with its density maps and
/// placement parameters: everything [`place_moving_arrows`] consumes.
#[derive(Clone, Debug)]
pub struct Scene {
    pub field: VectorField2D,
    pub density: DensitySeries,
    pub params: PlacementParams,
}

impl Scene {
    /// Extends `field` by [`buffer_margin`] and builds the density maps on
    /// the distance-map raster of the extended field.
    pub fn new(field: &VectorField2D, params: PlacementParams, mode: &DensityMode) -> crate::Result<Self> {
        params.validate()?;
        let field = field.extend_domain(buffer_margin(field, &params));
        let raster = Placement::raster_for(&field, &params)?;
        let density = DensitySeries::build(mode, &field, raster)?;
        Ok(Scene { field, density, params })
    }

    pub fn place(&self) -> crate::Result<ArrowSet> {
        place_moving_arrows(&self.field, &self.density, self.params)
    }

    pub fn placement(&self) -> crate::Result<Placement<'_>> {
        Placement::new(&self.field, &self.density, self.params)
    }
}

/// Places moving arrows over every time step of `field`.
pub fn place_moving_arrows(
    field: &VectorField2D,
    density: &DensitySeries,
    params: PlacementParams,
) -> crate::Result<ArrowSet> {
    Ok(Placement::new(field, density, params)?.run())
}

/// Number of arrows one more completion pass would add at `step` (zero for a
/// saturated step). Seeds are walked in grid order.
pub fn count_insertable(set: &ArrowSet, field: &VectorField2D, density: &DensitySeries, step: usize) -> usize {
    let params = set.params();
    let mut map = set.distance_map_at(step, density);
    let mut inserted = 0;
    for pos in set.seed_positions(field) {
        let Ok(candidate) = integrate_streamlet(field, pos, field.step_time(step), &params.integrator, params.thickness)
        else {
            continue;
        };
        if map.distance_to_arrows(&candidate) > params.d_seed() {
            map.insert_arrow(&candidate);
            inserted += 1;
        }
    }
    inserted
}
