//! Online tracking loop.
//!
//! Each frame is handled in two steps: the target is located by maximizing
//! the continuous score over a small scale pyramid, then the model is updated
//! with a sample extracted at the new estimate (position descent, memory
//! insertion, incremental coefficient solve).

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::deformation::{bb_descent, BbParams, DeformationState, Mat2, TransformMode};
use crate::error::{bail, Error, Result};
use crate::eval::BoundingBox;
use crate::features::{
    colornames, extract_patch, grayscale_cells, raster_channels, ColorNamesTable, FeatureConfig, FeatureKind, Image,
};
use crate::spectral::{interpolate, Grid, InterpolationKernel, Point, Spectrum, SpectrumLayout};
use crate::training::{
    full_score, gaussian_label, solve_coefficients, CgParams, FilterCoefficients, FilterShape, SampleMemory,
    SpatialRegularizer, TrainingSample,
};
// Float methods for no_std builds; shadowed by inherent ones when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

/// Deformation prior weight used on OTB-style sequences.
pub const LAMBDA_OTB: f64 = 3e-4;
/// Deformation prior weight used on VOT and TempleColor sequences.
pub const LAMBDA_VOT: f64 = 3e-6;
/// Period of the continuous domain: positions are fractions of the search
/// region side.
pub const DOMAIN_PERIOD: f64 = 1.0;
/// Targets at least this large (px^2) get a 3x3 part grid instead of 2x2.
pub const PART_AREA_THRESHOLD: f64 = 6400.0;

/// How many part sub-filters accompany the root filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartGrid {
    /// 2x2 below [`PART_AREA_THRESHOLD`], 3x3 otherwise.
    Auto,
    /// Root filter only (a rigid correlation filter).
    RootOnly,
    Fixed { cols: usize, rows: usize },
}

impl PartGrid {
    /// Grid columns and rows for a target of `size` pixels.
    pub fn dims(&self, size: [f64; 2]) -> (usize, usize) {
        match *self {
            PartGrid::Auto if size[0] * size[1] < PART_AREA_THRESHOLD => (2, 2),
            PartGrid::Auto => (3, 3),
            PartGrid::RootOnly => (0, 0),
            PartGrid::Fixed { cols, rows } => (cols, rows),
        }
    }

    /// Total sub-filter count including the root.
    pub fn subfilters(&self, size: [f64; 2]) -> usize {
        let (c, r) = self.dims(size);
        c * r + 1
    }
}

/// Part centers relative to the target center, in pixels: a uniform
/// `cols x rows` grid over the target extent.
pub fn part_offsets(size: [f64; 2], cols: usize, rows: usize) -> Vec<Point> {
    let mut out = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for c in 0..cols {
            let u = (c as f64 + 0.5) / cols as f64 - 0.5;
            let v = (r as f64 + 0.5) / rows as f64 - 0.5;
            out.push([u * size[0], v * size[1]]);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerConfig {
    pub parts: PartGrid,
    pub lambda_p: f64,
    pub transform: TransformMode,
    /// Scale pyramid levels (odd).
    pub scales: usize,
    pub scale_step: f64,
    /// Factor applied to a level's peak per step away from the current
    /// scale when picking the best level; 1 disables it.
    pub scale_penalty: f64,
    pub features: FeatureConfig,
    /// Color Names lookup, required when the feature set includes it.
    pub colornames: Option<Arc<ColorNamesTable>>,
    pub cg_init: CgParams,
    pub cg_update: CgParams,
    pub bb: BbParams,
    pub learning_rate: f64,
    pub memory_capacity: usize,
    /// Label standard deviation relative to the target extent, per axis.
    pub sigma_factor: f64,
    /// Regularizer value at the sub-filter center.
    pub reg_min: f64,
    /// Regularizer value at the edge of the sub-filter's support.
    pub reg_edge: f64,
    /// Part regularizer radius relative to the root radius.
    pub part_radius_factor: f64,
    /// Bounds on the feature grid side, in cells.
    pub min_cells: usize,
    pub max_cells: usize,
    /// Taper features with a separable cosine window before interpolation.
    pub cosine_window: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            parts: PartGrid::Auto,
            lambda_p: LAMBDA_OTB,
            transform: TransformMode::Affine,
            scales: 5,
            scale_step: 1.02,
            scale_penalty: 0.98,
            features: FeatureConfig::default(),
            colornames: None,
            cg_init: CgParams { max_iter: 100, tol: 1e-6 },
            cg_update: CgParams { max_iter: 5, tol: 1e-6 },
            bb: BbParams::default(),
            learning_rate: 0.0125,
            memory_capacity: 30,
            sigma_factor: 0.1,
            reg_min: 1e-4,
            reg_edge: 1e-2,
            part_radius_factor: 1.0 / 3.0,
            min_cells: 21,
            max_cells: 51,
            cosine_window: true,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        if self.scales == 0 || self.scales.is_multiple_of(2) {
            bail!(Config, "scale count must be odd and positive, got {}", self.scales);
        }
        if !(self.scale_step > 1.0) {
            bail!(Config, "scale step must exceed 1, got {}", self.scale_step);
        }
        if !(self.scale_penalty > 0.0 && self.scale_penalty <= 1.0) {
            bail!(Config, "scale penalty must lie in (0, 1], got {}", self.scale_penalty);
        }
        if !(self.lambda_p >= 0.0 && self.lambda_p.is_finite()) {
            bail!(Config, "lambda_p must be finite and nonnegative, got {}", self.lambda_p);
        }
        if let PartGrid::Fixed { cols, rows } = self.parts {
            if (cols == 0) != (rows == 0) {
                bail!(Config, "part grid {cols}x{rows} is degenerate");
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            bail!(Config, "learning rate must lie in (0, 1], got {}", self.learning_rate);
        }
        if self.memory_capacity == 0 {
            bail!(Config, "memory capacity must be at least 1");
        }
        if !(self.sigma_factor > 0.0) {
            bail!(Config, "sigma factor must be positive, got {}", self.sigma_factor);
        }
        if !(self.reg_min > 0.0 && self.reg_edge >= self.reg_min) {
            bail!(Config, "need 0 < reg_min <= reg_edge, got {} and {}", self.reg_min, self.reg_edge);
        }
        if !(self.part_radius_factor > 0.0) {
            bail!(Config, "part radius factor must be positive");
        }
        if self.min_cells < 3 || self.max_cells < self.min_cells {
            bail!(Config, "cell bounds [{}, {}] are invalid", self.min_cells, self.max_cells);
        }
        if self.cg_init.max_iter == 0 {
            bail!(Config, "initial CG budget must be positive");
        }
        self.bb.validate().map_err(|e| e.context("bb"))?;
        if self.features.kinds.contains(&FeatureKind::ColorNames) && self.colornames.is_none() {
            bail!(Config, "color names features need a lookup table");
        }
        Ok(())
    }
}

/// One video frame with optional precomputed features covering it.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub image: Image,
    pub features: Option<Image>,
}

impl Frame {
    pub fn new(image: Image) -> Self {
        Self { image, features: None }
    }
}

/// Feature channels sharing a sampling grid.
#[derive(Clone, Debug)]
struct Block {
    kind: FeatureKind,
    /// Patch resolution per side.
    patch_px: usize,
    kernel: InterpolationKernel,
    channels: usize,
}

/// Sampling geometry fixed at initialization.
#[derive(Clone, Debug)]
struct Geometry {
    /// Side of the square search region at scale 1, px.
    region: f64,
    /// Filter period in domain units.
    period: f64,
    blocks: Vec<Block>,
    shape: FilterShape,
    label: Spectrum,
}

impl Geometry {
    fn cell_px(&self, scale: f64) -> f64 {
        self.region * scale / self.period
    }
}

fn odd_cells(x: f64, lo: usize, hi: usize) -> usize {
    let mut n = x.round().max(1.0) as usize;
    if n.is_multiple_of(2) {
        n += 1;
    }
    let lo = lo | 1;
    let hi = if hi.is_multiple_of(2) { hi - 1 } else { hi };
    n.clamp(lo, hi.max(lo))
}

/// Mutable per-target tracking state.
#[derive(Clone, Debug)]
pub struct TrackState {
    pub center: Point,
    /// Target size at scale 1, px.
    pub size: [f64; 2],
    pub scale: f64,
    pub filter: FilterCoefficients,
    pub deformation: DeformationState,
    pub memory: SampleMemory,
    /// Index of the last processed frame.
    pub frame: usize,
}

/// Outcome of the localization step.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub center: Point,
    pub scale: f64,
    pub score: f64,
    /// Sub-filter positions the score was computed with.
    pub positions: Vec<Point>,
}

/// What the model update did.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateReport {
    pub descent_iterations: usize,
    pub cg_iterations: usize,
    /// Set when a numerical failure left the previous model in place.
    pub stale: bool,
}

/// Per-frame tracker output.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameResult {
    pub frame_index: usize,
    pub bbox: BoundingBox,
    pub score: f64,
    /// Sub-filter centers in image pixels, root first.
    pub parts: Vec<Point>,
    pub transform: Mat2,
}

#[derive(Clone, Debug)]
pub struct Tracker {
    config: TrackerConfig,
    geometry: Geometry,
    regularizer: SpatialRegularizer,
    state: TrackState,
}

const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 5.0;

impl Tracker {
    /// Trains the initial model on `bbox` in `frame`.
    pub fn init(frame: &Frame, bbox: BoundingBox, config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        if !(bbox.w > 0.0 && bbox.h > 0.0) || !bbox.x.is_finite() || !bbox.y.is_finite() {
            bail!(Argument, "initial box must have positive area, got {:?}", bbox);
        }
        let size = [bbox.w, bbox.h];
        let center = bbox.center();
        let geometry = build_geometry(frame, size, &config)?;
        let cell = geometry.cell_px(1.0);

        let (cols, rows) = config.parts.dims(size);
        let offsets = part_offsets(size, cols, rows);
        // A sub-filter placed at p answers to image content at -p.
        let mut initial = vec![[0.0, 0.0]];
        initial.extend(offsets.iter().map(|u| [-u[0] / cell, -u[1] / cell]));
        let mut deformation =
            DeformationState::new(initial.clone(), config.lambda_p, config.transform, [geometry.period; 2])?;
        deformation.fixed[0] = true;

        let root = [size[0] / 2.0 / cell, size[1] / 2.0 / cell];
        let mut radii = vec![root];
        let part = [root[0] * config.part_radius_factor, root[1] * config.part_radius_factor];
        radii.extend(core::iter::repeat_n(part, offsets.len()));
        let regularizer = SpatialRegularizer::bowls(
            [geometry.period; 2],
            &radii,
            geometry.shape.channels(),
            config.reg_min,
            config.reg_edge,
        )?;

        let (channels, _) = extract_sample(&geometry, &config, frame, center, 1.0, None)?;
        let mut memory = SampleMemory::new(config.memory_capacity, config.learning_rate)?;
        memory.insert(TrainingSample { channels, label: geometry.label.clone(), weight: 1.0, positions: initial })?;
        let shape = geometry.shape.clone();
        let (filter, _) =
            solve_coefficients(&shape, memory.samples(), &regularizer, &memory.positions(), config.cg_init, None)?;

        let state = TrackState { center, size, scale: 1.0, filter, deformation, memory, frame: 0 };
        Ok(Self { config, geometry, regularizer, state })
    }

    pub fn state(&self) -> &TrackState {
        &self.state
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Domain period and the pixels per domain unit at the current scale.
    pub fn grid(&self) -> (f64, f64) {
        (self.geometry.period, self.geometry.cell_px(self.state.scale))
    }

    /// Positions used for detection: half the transform prediction, half the
    /// previous frame's positions.
    pub fn predicted_positions(&self) -> Vec<Point> {
        let d = &self.state.deformation;
        d.predicted()
            .iter()
            .zip(&d.current)
            .map(|(a, b)| [0.5 * a[0] + 0.5 * b[0], 0.5 * a[1] + 0.5 * b[1]])
            .collect()
    }

    /// Sample spectra at `center` and `scale`, normalized as for training.
    pub fn sample_at(&self, frame: &Frame, center: Point, scale: f64, positions: Vec<Point>) -> Result<TrainingSample> {
        let (channels, _) = extract_sample(&self.geometry, &self.config, frame, center, scale, None)?;
        Ok(TrainingSample { channels, label: self.geometry.label.clone(), weight: 1.0, positions })
    }

    /// Locates the target over the scale pyramid. All levels share the
    /// feature gain of the current scale; the reported score is unpenalized.
    pub fn detect(&self, frame: &Frame) -> Result<Detection> {
        let positions = self.predicted_positions();
        let s = self.config.scales;
        let (mut current, gain) = extract_sample(&self.geometry, &self.config, frame, self.state.center, self.state.scale, None)?;
        let mut best: Option<(f64, Point, f64, f64)> = None;
        for level in 0..s {
            let exponent = level as f64 - (s - 1) as f64 / 2.0;
            let scale = (self.state.scale * self.config.scale_step.powf(exponent)).clamp(MIN_SCALE, MAX_SCALE);
            let channels = if 2 * level + 1 == s {
                core::mem::take(&mut current)
            } else {
                extract_sample(&self.geometry, &self.config, frame, self.state.center, scale, Some(gain))?.0
            };
            let sample = TrainingSample { channels, label: self.geometry.label.clone(), weight: 1.0, positions: positions.clone() };
            let score = full_score(&self.state.filter, &sample, &positions)?;
            if let Some((t, v)) = locate_peak(&score, self.geometry.period)? {
                let rank = v * self.config.scale_penalty.powf(exponent.abs());
                if best.is_none_or(|(br, ..)| rank > br) {
                    best = Some((rank, t, scale, v));
                }
            }
        }
        Ok(match best {
            Some((_, t, scale, score)) => {
                let cell = self.geometry.cell_px(scale);
                let center = [self.state.center[0] + t[0] * cell, self.state.center[1] + t[1] * cell];
                Detection { center, scale, score, positions }
            }
            None => Detection { center: self.state.center, scale: self.state.scale, score: 0.0, positions },
        })
    }

    /// Retrains on the sample at the detected state. Numerical failures keep
    /// the previous model and are reported through [`UpdateReport::stale`].
    pub fn update(&mut self, frame: &Frame, detection: &Detection) -> Result<UpdateReport> {
        let mut report = UpdateReport::default();
        self.state.center = detection.center;
        self.state.scale = detection.scale;
        self.state.frame += 1;

        let mut sample = self.sample_at(frame, detection.center, detection.scale, detection.positions.clone())?;
        sample.weight = self.state.memory.next_weight();

        let mut deform = self.state.deformation.clone();
        deform.current = detection.positions.clone();
        match bb_descent(&self.state.filter, &sample, &deform, &self.config.bb) {
            Ok((d, r)) => {
                deform = d;
                report.descent_iterations = r.iterations;
            }
            Err(Error::Numerical(_)) => report.stale = true,
            Err(e) => return Err(e),
        }
        sample.positions = deform.current.clone();

        let mut memory = self.state.memory.clone();
        memory.insert(sample)?;
        match solve_coefficients(
            &self.geometry.shape,
            memory.samples(),
            &self.regularizer,
            &memory.positions(),
            self.config.cg_update,
            Some(&self.state.filter),
        ) {
            Ok((filter, r)) => {
                self.state.filter = filter;
                self.state.memory = memory;
                self.state.deformation = deform;
                report.cg_iterations = r.iterations;
            }
            Err(Error::Numerical(_)) => report.stale = true,
            Err(e) => return Err(e),
        }
        Ok(report)
    }

    /// Detects and updates on the next frame.
    pub fn step(&mut self, frame: &Frame) -> Result<FrameResult> {
        let detection = self.detect(frame)?;
        self.update(frame, &detection)?;
        Ok(self.result(detection.score))
    }

    /// Current box, part centers and transform.
    pub fn result(&self, score: f64) -> FrameResult {
        let st = &self.state;
        let size = [st.size[0] * st.scale, st.size[1] * st.scale];
        let cell = self.geometry.cell_px(st.scale);
        let parts = st.deformation.current.iter().map(|p| [st.center[0] - p[0] * cell, st.center[1] - p[1] * cell]).collect();
        FrameResult {
            frame_index: st.frame,
            bbox: BoundingBox::from_center(st.center, size),
            score,
            parts,
            transform: st.deformation.transform,
        }
    }

    /// Score of the current model at the target center of `frame`.
    pub fn self_score(&self, frame: &Frame) -> Result<f64> {
        let positions = self.state.deformation.current.clone();
        let sample = self.sample_at(frame, self.state.center, self.state.scale, positions.clone())?;
        full_score(&self.state.filter, &sample, &positions)?.evaluate([0.0, 0.0])
    }
}

/// Runs the tracker over `frames`, initialized with `init` on the first one.
pub fn track_sequence(frames: &[Frame], init: BoundingBox, config: TrackerConfig) -> Result<Vec<FrameResult>> {
    let Some(first) = frames.first() else {
        bail!(Argument, "sequence has no frames");
    };
    let mut tracker = Tracker::init(first, init, config).map_err(|e| e.context("frame 0"))?;
    let mut out = Vec::with_capacity(frames.len());
    let mut r = tracker.result(tracker.self_score(first)?);
    r.bbox = init;
    out.push(r);
    for (i, frame) in frames.iter().enumerate().skip(1) {
        out.push(tracker.step(frame).map_err(|e| e.context(&format!("frame {i}")))?);
    }
    Ok(out)
}

fn build_geometry(frame: &Frame, size: [f64; 2], config: &TrackerConfig) -> Result<Geometry> {
    let fc = &config.features;
    let region = (fc.padding * size[0] * size[1]).sqrt();
    let mut blocks = Vec::new();
    for kind in &fc.kinds {
        let (cells, patch_px, channels) = match kind {
            FeatureKind::Grayscale | FeatureKind::ColorNames => {
                let n = odd_cells(region / fc.cell_size as f64, config.min_cells, config.max_cells);
                let d = if *kind == FeatureKind::Grayscale { 1 } else { crate::features::COLORNAMES_CHANNELS };
                (n, n * fc.cell_size, d)
            }
            FeatureKind::Precomputed => {
                let Some(raster) = &frame.features else {
                    bail!(Config, "precomputed features requested but the frame carries none");
                };
                let q = raster.width() as f64 / frame.image.width() as f64;
                let n = odd_cells(region * q, config.min_cells, config.max_cells);
                (n, n, raster.channels())
            }
        };
        blocks.push((*kind, cells, patch_px, channels));
    }
    let period = DOMAIN_PERIOD;
    let k = blocks.iter().map(|b| b.1 / 2).max().unwrap_or(0);
    let layout = SpectrumLayout::new([period; 2], k)?;
    let mut channel_k = Vec::new();
    let blocks = blocks
        .into_iter()
        .map(|(kind, cells, patch_px, channels)| {
            channel_k.extend(core::iter::repeat_n(cells / 2, channels));
            let kernel = InterpolationKernel::cubic(layout, [cells, cells])?;
            Ok(Block { kind, patch_px, kernel, channels })
        })
        .collect::<Result<Vec<_>>>()?;
    let subfilters = config.parts.subfilters(size);
    let shape = FilterShape::new(layout, channel_k, subfilters)?;
    let cell = region / period;
    let sigma = [config.sigma_factor * size[0] / cell, config.sigma_factor * size[1] / cell];
    let label = gaussian_label(&layout, sigma, [0.0, 0.0])?;
    Ok(Geometry { region, period, blocks, shape, label })
}

/// Interpolated feature spectra of the region around `center`, windowed and
/// scaled by `gain`, plus the applied gain. Without one, the gain brings the
/// windowed features to unit mean square per value.
fn extract_sample(
    geometry: &Geometry,
    config: &TrackerConfig,
    frame: &Frame,
    center: Point,
    scale: f64,
    gain: Option<f64>,
) -> Result<(Vec<Spectrum>, f64)> {
    let side = [geometry.region; 2];
    let mut grids: Vec<(usize, Grid)> = Vec::new();
    for (bi, block) in geometry.blocks.iter().enumerate() {
        let map = match block.kind {
            FeatureKind::Grayscale => {
                let patch = extract_patch(&frame.image, center, side, scale, [block.patch_px; 2])?;
                grayscale_cells(&patch, config.features.cell_size)?
            }
            FeatureKind::ColorNames => {
                let patch = extract_patch(&frame.image, center, side, scale, [block.patch_px; 2])?;
                let table = config.colornames.as_deref().ok_or_else(|| Error::Config("color names table missing".into()))?;
                colornames(&patch, config.features.cell_size, table)?
            }
            FeatureKind::Precomputed => {
                let Some(raster) = &frame.features else {
                    bail!(Config, "frame carries no precomputed features");
                };
                let q = [
                    raster.width() as f64 / frame.image.width() as f64,
                    raster.height() as f64 / frame.image.height() as f64,
                ];
                let patch = extract_patch(
                    raster,
                    [center[0] * q[0], center[1] * q[1]],
                    [side[0] * q[0], side[1] * q[1]],
                    scale,
                    [block.patch_px; 2],
                )?;
                raster_channels(&patch)?
            }
        };
        if map.len() != block.channels {
            bail!(Dimension, "feature block has {} channels, model expects {}", map.len(), block.channels);
        }
        grids.extend(map.channels.into_iter().map(|g| (bi, g)));
    }
    if config.cosine_window {
        for (_, g) in grids.iter_mut() {
            let (w, h) = (g.width(), g.height());
            let (wx, wy) = (cosine_window(w), cosine_window(h));
            for (i, v) in g.data_mut().iter_mut().enumerate() {
                *v *= wx[i % w] * wy[i / w];
            }
        }
    }
    let count: usize = grids.iter().map(|(_, g)| g.data().len()).sum();
    let energy: f64 = grids.iter().flat_map(|(_, g)| g.data().iter().map(|v| v * v)).sum();
    let gain = gain.unwrap_or(if energy > 0.0 { (count as f64 / energy).sqrt() } else { 1.0 });
    let layout = *geometry.shape.layout();
    let spectra = grids
        .into_iter()
        .map(|(bi, mut g)| {
            for v in g.data_mut() {
                *v *= gain;
            }
            interpolate(&g, &geometry.blocks[bi].kernel, &layout)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((spectra, gain))
}

/// `sin^2` taper peaking at the grid center, zero just outside the grid.
fn cosine_window(n: usize) -> Vec<f64> {
    (0..n).map(|i| (core::f64::consts::PI * (i as f64 + 1.0) / (n as f64 + 1.0)).sin().powi(2)).collect()
}

/// Grid argmax of the score at four samples per coefficient, refined by
/// Newton steps. `None` for a flat score.
fn locate_peak(score: &Spectrum, period: f64) -> Result<Option<(Point, f64)>> {
    let g = 4 * score.layout().side();
    let values = score.sample_grid([g, g])?;
    let (mut imax, mut vmax, mut vmin) = (0, f64::MIN, f64::MAX);
    for (i, v) in values.iter().enumerate() {
        if *v > vmax {
            vmax = *v;
            imax = i;
        }
        vmin = vmin.min(*v);
    }
    if !vmax.is_finite() {
        bail!(Numerical, "score map is not finite");
    }
    if vmax - vmin <= 1e-12 * vmax.abs().max(1.0) {
        return Ok(None);
    }
    let step = period / g as f64;
    let wrap = |x: f64| x - period * (x / period - 0.5).ceil();
    let t0 = [wrap((imax % g) as f64 * step), wrap((imax / g) as f64 * step)];
    let mut t = t0;
    for _ in 0..5 {
        let (_, grad, h) = score.evaluate_with_derivatives(t)?;
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if !(h[0][0] < 0.0 && det > 0.0) {
            t = t0;
            break;
        }
        let dx = (h[1][1] * grad[0] - h[0][1] * grad[1]) / det;
        let dy = (h[0][0] * grad[1] - h[1][0] * grad[0]) / det;
        t = [t[0] - dx, t[1] - dy];
    }
    let mut v = score.evaluate(t)?;
    if !(v >= vmax) || (t[0] - t0[0]).abs() > step || (t[1] - t0[1]).abs() > step {
        t = t0;
        v = score.evaluate(t)?;
    }
    Ok(Some((t, v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{center_error, iou};
    use crate::synthetic::{generate, SequenceKind};
    use crate::training::{objective, subfilter_score};

    /// Blocky random RGB texture, 5 px blocks.
    fn pattern(x: i64, y: i64) -> [f32; 3] {
        let (bx, by) = (x.div_euclid(5) as u64, y.div_euclid(5) as u64);
        [0u64, 1, 2].map(|c| {
            let mut z = bx.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ by.wrapping_mul(0xbf58_476d_1ce4_e5b9) ^ (c << 56);
            z = (z ^ (z >> 31)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^= z >> 29;
            0.2 + 0.6 * ((z >> 11) as f64 / (1u64 << 53) as f64) as f32
        })
    }

    fn frame_with_offset(dx: i64, dy: i64) -> Frame {
        let (w, h) = (160, 140);
        let mut data = Vec::with_capacity(w * h * 3);
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                data.extend(pattern(x - dx, y - dy));
            }
        }
        Frame::new(Image::new(w, h, 3, data).unwrap())
    }

    fn target() -> BoundingBox {
        BoundingBox::new(60.0, 50.0, 36.0, 30.0)
    }

    fn fast() -> TrackerConfig {
        TrackerConfig { cg_init: CgParams { max_iter: 60, tol: 1e-6 }, ..Default::default() }
    }

    #[test]
    fn subfilter_count_follows_area() {
        let cfg = TrackerConfig::default();
        assert_eq!(cfg.parts.subfilters([60.0, 60.0]), 5);
        assert_eq!(cfg.parts.subfilters([120.0, 100.0]), 10);
        assert_eq!(PartGrid::RootOnly.subfilters([120.0, 100.0]), 1);
        assert_eq!(part_offsets([40.0, 20.0], 2, 2), vec![[-10.0, -5.0], [10.0, -5.0], [-10.0, 5.0], [10.0, 5.0]]);
        let third = part_offsets([90.0, 60.0], 3, 3);
        assert!((third[0][0] + 30.0).abs() < 1e-12 && (third[0][1] + 20.0).abs() < 1e-12);
        assert_eq!(third[4], [0.0, 0.0]);
    }

    #[test]
    fn init_places_root_at_origin() {
        let frame = frame_with_offset(0, 0);
        let t = Tracker::init(&frame, BoundingBox::new(40.0, 40.0, 60.0, 60.0), fast()).unwrap();
        let d = &t.state().deformation;
        assert_eq!(d.len(), 5);
        assert_eq!(d.current[0], [0.0, 0.0]);
        assert!(d.fixed[0] && !d.fixed[1]);
        assert_eq!(d.transform, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(t.state().memory.len(), 1);
        // part markers land on the grid over the target
        let r = t.result(0.0);
        let want = [[55.0, 55.0], [85.0, 55.0], [55.0, 85.0], [85.0, 85.0]];
        for (p, w) in r.parts[1..].iter().zip(want) {
            assert!((p[0] - w[0]).abs() < 1e-9 && (p[1] - w[1]).abs() < 1e-9, "{p:?} vs {w:?}");
        }
        assert!(Tracker::init(&frame, BoundingBox::new(10.0, 10.0, 0.0, 5.0), fast()).is_err());
    }

    #[test]
    fn self_detection() {
        let frame = frame_with_offset(0, 0);
        let t = Tracker::init(&frame, target(), fast()).unwrap();
        let det = t.detect(&frame).unwrap();
        let c = target().center();
        assert!((det.center[0] - c[0]).hypot(det.center[1] - c[1]) < 0.5, "{:?}", det.center);
    }

    #[test]
    fn planted_translation() {
        let cfg = TrackerConfig { scales: 1, ..fast() };
        let t = Tracker::init(&frame_with_offset(0, 0), target(), cfg).unwrap();
        let (dx, dy) = (3, -2);
        let det = t.detect(&frame_with_offset(dx, dy)).unwrap();
        let (dx, dy) = (dx as f64, dy as f64);
        let c = target().center();
        let (ex, ey) = (det.center[0] - c[0] - dx, det.center[1] - c[1] - dy);
        assert!(ex.hypot(ey) < 0.5, "error ({ex}, {ey})");
        assert_eq!(det.scale, 1.0);
    }

    #[test]
    fn identical_frames_are_a_fixed_point() {
        let frame = frame_with_offset(0, 0);
        let mut t = Tracker::init(&frame, target(), fast()).unwrap();
        let before = t.state().deformation.clone();
        let det = t.detect(&frame).unwrap();
        let sample = t.sample_at(&frame, det.center, det.scale, det.positions.clone()).unwrap();
        let (filter, reg) = (t.state().filter.clone(), t.regularizer.clone());
        // descent runs against the model from before the update
        let value = |d: &DeformationState| {
            let terms = objective(&filter, core::slice::from_ref(&sample), core::slice::from_ref(&d.current), &reg, d).unwrap();
            terms.data + terms.deformation
        };
        let start = value(&before);
        t.update(&frame, &det).unwrap();
        let after = &t.state().deformation;
        for (p, q) in after.current.iter().zip(&before.current) {
            assert!((p[0] - q[0]).hypot(p[1] - q[1]) < 1e-3, "{p:?} moved from {q:?}");
        }
        assert!(value(after) <= start);
    }

    #[test]
    fn stiff_prior_pins_positions() {
        let cfg = TrackerConfig { transform: TransformMode::Identity, lambda_p: 1e9, ..fast() };
        let seq = generate(SequenceKind::Articulate, 6, 3).unwrap();
        let frames: Vec<Frame> = seq.frames.into_iter().map(Frame::new).collect();
        let mut t = Tracker::init(&frames[0], seq.groundtruth[0], cfg).unwrap();
        let initial = t.state().deformation.initial.clone();
        for f in &frames[1..] {
            t.step(f).unwrap();
            for (p, q) in t.state().deformation.current.iter().zip(&initial) {
                assert!((p[0] - q[0]).abs().max((p[1] - q[1]).abs()) < 1e-3);
            }
        }
    }

    #[test]
    fn memory_grows_to_capacity() {
        let cfg = TrackerConfig { memory_capacity: 3, scales: 1, ..fast() };
        let frame = frame_with_offset(0, 0);
        let mut t = Tracker::init(&frame, target(), cfg).unwrap();
        let mut sizes = vec![t.state().memory.len()];
        for _ in 0..4 {
            t.step(&frame).unwrap();
            sizes.push(t.state().memory.len());
        }
        assert_eq!(sizes, [1, 2, 3, 3, 3]);
        assert_eq!(t.state().frame, 4);
    }

    #[test]
    fn single_frame_sequence_returns_init_box() {
        let out = track_sequence(&[frame_with_offset(0, 0)], target(), fast()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].bbox, target());
        assert_eq!(out[0].frame_index, 0);
        assert!(track_sequence(&[], target(), fast()).is_err());
    }

    #[test]
    fn static_scene_keeps_the_box() {
        let frames = vec![frame_with_offset(0, 0); 10];
        let out = track_sequence(&frames, target(), fast()).unwrap();
        for r in &out {
            assert!(iou(&r.bbox, &target()) > 0.95, "frame {}: {:?}", r.frame_index, r.bbox);
        }
    }

    #[test]
    fn follows_translating_square() {
        let seq = generate(SequenceKind::Translate, 30, 1).unwrap();
        let frames: Vec<Frame> = seq.frames.into_iter().map(Frame::new).collect();
        let out = track_sequence(&frames, seq.groundtruth[0], fast()).unwrap();
        let mean = out.iter().zip(&seq.groundtruth).map(|(r, g)| iou(&r.bbox, g)).sum::<f64>() / 30.0;
        assert!(mean > 0.7, "mean IoU {mean}");
        assert!(out.iter().zip(&seq.groundtruth).all(|(r, g)| center_error(&r.bbox, g) < 2.0));
    }

    #[test]
    fn tracking_is_deterministic() {
        let seq = generate(SequenceKind::Articulate, 5, 9).unwrap();
        let frames: Vec<Frame> = seq.frames.into_iter().map(Frame::new).collect();
        let a = track_sequence(&frames, seq.groundtruth[0], fast()).unwrap();
        let b = track_sequence(&frames, seq.groundtruth[0], fast()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn root_only_reduces_to_single_filter() {
        let cfg = TrackerConfig { parts: PartGrid::RootOnly, ..fast() };
        let seq = generate(SequenceKind::Translate, 4, 2).unwrap();
        let frames: Vec<Frame> = seq.frames.into_iter().map(Frame::new).collect();
        let mut t = Tracker::init(&frames[0], seq.groundtruth[0], cfg).unwrap();
        for f in &frames[1..] {
            let det = t.detect(f).unwrap();
            let sample = t.sample_at(f, t.state().center, t.state().scale, det.positions.clone()).unwrap();
            let full = full_score(&t.state().filter, &sample, &det.positions).unwrap();
            let single = subfilter_score(t.state().filter.subfilter(0), &sample).unwrap();
            for (a, b) in full.coeffs().iter().zip(single.coeffs()) {
                assert!((a - b).norm() < 1e-12);
            }
            t.update(f, &det).unwrap();
            assert_eq!(crate::deformation::reg_energy(&t.state().deformation), 0.0);
        }
    }

    #[test]
    fn reported_score_matches_the_score_function() {
        let seq = generate(SequenceKind::Translate, 3, 4).unwrap();
        let frames: Vec<Frame> = seq.frames.into_iter().map(Frame::new).collect();
        let t = Tracker::init(&frames[0], seq.groundtruth[0], fast()).unwrap();
        let det = t.detect(&frames[1]).unwrap();
        // the winning level shares the current-scale gain
        let (_, gain) = extract_sample(&t.geometry, &t.config, &frames[1], t.state().center, t.state().scale, None).unwrap();
        let (channels, _) = extract_sample(&t.geometry, &t.config, &frames[1], t.state().center, det.scale, Some(gain)).unwrap();
        let sample = TrainingSample { channels, label: t.geometry.label.clone(), weight: 1.0, positions: det.positions.clone() };
        let score = full_score(&t.state().filter, &sample, &det.positions).unwrap();
        let cell = t.geometry.cell_px(det.scale);
        let arg = [(det.center[0] - t.state().center[0]) / cell, (det.center[1] - t.state().center[1]) / cell];
        assert!((score.evaluate(arg).unwrap() - det.score).abs() < 1e-6);
    }

    #[test]
    fn peak_location_refines_off_grid() {
        let layout = SpectrumLayout::new([1.0, 1.0], 6).unwrap();
        let label = gaussian_label(&layout, [0.08, 0.08], [0.0137, -0.0211]).unwrap();
        let (t, v) = locate_peak(&label, 1.0).unwrap().unwrap();
        assert!((t[0] - 0.0137).abs() < 1e-4 && (t[1] + 0.0211).abs() < 1e-4, "{t:?}");
        assert!((v - label.evaluate(t).unwrap()).abs() < 1e-15);
        assert!(locate_peak(&Spectrum::zeros(layout), 1.0).unwrap().is_none());
    }

    #[test]
    fn config_validation() {
        assert!(TrackerConfig::default().validate().is_ok());
        assert!(TrackerConfig { scales: 4, ..Default::default() }.validate().is_err());
        assert!(TrackerConfig { scale_step: 1.0, ..Default::default() }.validate().is_err());
        assert!(TrackerConfig { learning_rate: 0.0, ..Default::default() }.validate().is_err());
        let cn = FeatureConfig { kinds: vec![FeatureKind::ColorNames], ..Default::default() };
        assert!(matches!(TrackerConfig { features: cn, ..Default::default() }.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn odd_cell_counts() {
        assert_eq!(odd_cells(10.0, 3, 51), 11);
        assert_eq!(odd_cells(2.0, 21, 51), 21);
        assert_eq!(odd_cells(80.0, 21, 51), 51);
        assert_eq!(odd_cells(30.2, 21, 50), 31);
    }
}
