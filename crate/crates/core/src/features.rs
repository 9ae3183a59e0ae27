//! Image patches and hand-crafted feature channels.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::spectral::{Grid, Point};
// Float methods for no_std builds; shadowed by inherent ones when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

/// Interleaved multi-channel raster, row-major. Intensity images hold values
/// in `[0, 1]`; feature rasters hold arbitrary finite values.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            bail!(Argument, "image must be nonempty, got {width}x{height}x{channels}");
        }
        if data.len() != width * height * channels {
            bail!(Dimension, "{}x{}x{} image needs {} values, got {}", width, height, channels, width * height * channels, data.len());
        }
        Ok(Self { width, height, channels, data })
    }

    /// 8-bit samples scaled to `[0, 1]`.
    pub fn from_u8(width: usize, height: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, channels, bytes.iter().map(|&b| b as f32 / 255.0).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Rounds and clamps to 8-bit samples.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0 + 0.5) as u8).collect()
    }

    /// Bilinear sample at pixel-index coordinates with edge replication.
    pub fn bilinear(&self, u: f64, v: f64, c: usize) -> f64 {
        let x0 = u.floor();
        let y0 = v.floor();
        let (fx, fy) = (u - x0, v - y0);
        let clamp = |i: f64, n: usize| -> usize { i.clamp(0.0, (n - 1) as f64) as usize };
        let (xa, xb) = (clamp(x0, self.width), clamp(x0 + 1.0, self.width));
        let (ya, yb) = (clamp(y0, self.height), clamp(y0 + 1.0, self.height));
        let p = |x, y| self.get(x, y, c) as f64;
        (1.0 - fy) * ((1.0 - fx) * p(xa, ya) + fx * p(xb, ya)) + fy * ((1.0 - fx) * p(xa, yb) + fx * p(xb, yb))
    }
}

/// Resamples the region of extent `size * scale` around `center` to an
/// `out[0] x out[1]` patch.
///
/// Pixel `(i, j)` of the source covers `[i, i + 1) x [j, j + 1)`, so its
/// center is at `(i + 0.5, j + 0.5)`. Outside samples replicate the edge.
pub fn extract_patch(image: &Image, center: Point, size: [f64; 2], scale: f64, out: [usize; 2]) -> Result<Image> {
    if !(size[0] > 0.0 && size[1] > 0.0) {
        bail!(Argument, "patch size must be positive, got {:?}", size);
    }
    if !(scale > 0.0) {
        bail!(Argument, "scale must be positive, got {scale}");
    }
    if out[0] == 0 || out[1] == 0 {
        bail!(Argument, "output patch must be nonempty");
    }
    let (ow, oh) = (out[0], out[1]);
    let (ew, eh) = (size[0] * scale, size[1] * scale);
    let mut data = Vec::with_capacity(ow * oh * image.channels);
    for j in 0..oh {
        let v = center[1] + ((j as f64 + 0.5) / oh as f64 - 0.5) * eh - 0.5;
        for i in 0..ow {
            let u = center[0] + ((i as f64 + 0.5) / ow as f64 - 0.5) * ew - 0.5;
            for c in 0..image.channels {
                data.push(image.bilinear(u, v, c) as f32);
            }
        }
    }
    Image::new(ow, oh, image.channels, data)
}

/// Where a feature map was sampled from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region {
    pub center: Point,
    pub extent: [f64; 2],
    pub scale: f64,
}

/// Multi-channel feature samples of one patch.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub channels: Vec<Grid>,
    pub region: Option<Region>,
}

impl FeatureMap {
    pub fn new(channels: Vec<Grid>) -> Result<Self> {
        if channels.is_empty() {
            bail!(Argument, "feature map needs at least one channel");
        }
        if channels.iter().any(|g| g.data().iter().any(|v| !v.is_finite())) {
            bail!(Argument, "feature values must be finite");
        }
        Ok(Self { channels, region: None })
    }

    pub fn with_region(mut self, region: Region) -> Self {
        self.region = Some(region);
        self
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }
}

/// Feature channel families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureKind {
    /// Cell-averaged intensity, one channel.
    Grayscale,
    /// Color Names probabilities, ten channels.
    ColorNames,
    /// Externally computed dense feature maps covering the whole frame.
    Precomputed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureConfig {
    pub kinds: Vec<FeatureKind>,
    /// Cell size in pixels for hand-crafted channels.
    pub cell_size: usize,
    /// Sampled area relative to the target area.
    pub padding: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { kinds: vec![FeatureKind::Grayscale], cell_size: 4, padding: 4.0 }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() {
            bail!(Config, "at least one feature kind is required");
        }
        if self.cell_size == 0 {
            bail!(Config, "cell size must be at least 1");
        }
        if !(self.padding >= 1.0) {
            bail!(Config, "padding factor must be at least 1, got {}", self.padding);
        }
        Ok(())
    }
}

fn luminance(patch: &Image, x: usize, y: usize) -> f64 {
    match patch.channels() {
        1 => patch.get(x, y, 0) as f64,
        _ => {
            0.299 * patch.get(x, y, 0) as f64 + 0.587 * patch.get(x, y, 1) as f64 + 0.114 * patch.get(x, y, 2) as f64
        }
    }
}

fn cell_grid(patch: &Image, cell: usize) -> Result<(usize, usize)> {
    if cell == 0 || !patch.width().is_multiple_of(cell) || !patch.height().is_multiple_of(cell) {
        bail!(Dimension, "{}x{} patch is not divisible into {} px cells", patch.width(), patch.height(), cell);
    }
    Ok((patch.width() / cell, patch.height() / cell))
}

/// Mean intensity per cell, shifted to `[-0.5, 0.5]`.
pub fn grayscale_cells(patch: &Image, cell: usize) -> Result<FeatureMap> {
    let (cw, ch) = cell_grid(patch, cell)?;
    let mut data = vec![0.0; cw * ch];
    let norm = (cell * cell) as f64;
    for cy in 0..ch {
        for cx in 0..cw {
            let mut sum = 0.0;
            for y in cy * cell..(cy + 1) * cell {
                for x in cx * cell..(cx + 1) * cell {
                    sum += luminance(patch, x, y);
                }
            }
            data[cy * cw + cx] = sum / norm - 0.5;
        }
    }
    FeatureMap::new(vec![Grid::new(cw, ch, data)?])
}

/// Number of Color Names channels.
pub const COLORNAMES_CHANNELS: usize = 10;
/// Rows of the lookup table, one per 15-bit RGB code.
pub const COLORNAMES_ENTRIES: usize = 32768;

/// RGB to color-name probability lookup, indexed by `r5 << 10 | g5 << 5 | b5`.
#[derive(Clone, Debug, PartialEq)]
pub struct ColorNamesTable {
    data: Vec<f32>,
}

/// Prototype colors of the generated table.
const PROTOTYPES: [[f32; 3]; COLORNAMES_CHANNELS] = [
    [0.0, 0.0, 0.0],    // black
    [0.1, 0.2, 0.9],    // blue
    [0.55, 0.35, 0.15], // brown
    [0.1, 0.7, 0.1],    // green
    [1.0, 0.55, 0.0],   // orange
    [1.0, 0.6, 0.75],   // pink
    [0.55, 0.15, 0.65], // purple
    [0.9, 0.05, 0.05],  // red
    [1.0, 1.0, 1.0],    // white
    [1.0, 0.95, 0.1],   // yellow
];

impl ColorNamesTable {
    pub fn new(data: Vec<f32>) -> Result<Self> {
        if data.len() != COLORNAMES_ENTRIES * COLORNAMES_CHANNELS {
            bail!(Config, "color names table needs {} values, got {}", COLORNAMES_ENTRIES * COLORNAMES_CHANNELS, data.len());
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            bail!(Config, "color names table holds negative or non-finite values");
        }
        Ok(Self { data })
    }

    /// Soft assignment of every quantized color to ten prototype colors
    /// (Gaussian affinity in RGB, rows normalized to one).
    pub fn generated() -> Self {
        let mut data = Vec::with_capacity(COLORNAMES_ENTRIES * COLORNAMES_CHANNELS);
        for code in 0..COLORNAMES_ENTRIES {
            let rgb = [(code >> 10) & 31, (code >> 5) & 31, code & 31].map(|q| (q as f32 * 8.0 + 4.0) / 255.0);
            let mut w = [0.0f32; COLORNAMES_CHANNELS];
            for (wi, p) in w.iter_mut().zip(&PROTOTYPES) {
                let d2: f32 = rgb.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum();
                *wi = (-d2 / (2.0 * 0.12 * 0.12)).exp() + 1e-6;
            }
            let total: f32 = w.iter().sum();
            data.extend(w.iter().map(|v| v / total));
        }
        Self { data }
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Table row for an RGB color in `[0, 1]`.
    pub fn lookup(&self, rgb: [f32; 3]) -> &[f32] {
        let i = Self::index(rgb);
        &self.data[i * COLORNAMES_CHANNELS..(i + 1) * COLORNAMES_CHANNELS]
    }

    pub fn index(rgb: [f32; 3]) -> usize {
        let q = |v: f32| ((v.clamp(0.0, 1.0) * 255.0 + 0.5) as usize) >> 3;
        (q(rgb[0]) << 10) | (q(rgb[1]) << 5) | q(rgb[2])
    }
}

/// Cell means of the per-pixel Color Names probabilities, before centering.
pub fn colornames_uncentered(patch: &Image, cell: usize, table: &ColorNamesTable) -> Result<FeatureMap> {
    let (cw, ch) = cell_grid(patch, cell)?;
    let mut grids = vec![vec![0.0; cw * ch]; COLORNAMES_CHANNELS];
    let norm = (cell * cell) as f64;
    for y in 0..patch.height() {
        for x in 0..patch.width() {
            let rgb = if patch.channels() >= 3 {
                [patch.get(x, y, 0), patch.get(x, y, 1), patch.get(x, y, 2)]
            } else {
                [patch.get(x, y, 0); 3]
            };
            let row = table.lookup(rgb);
            let c = (y / cell) * cw + x / cell;
            for (g, p) in grids.iter_mut().zip(row) {
                g[c] += *p as f64 / norm;
            }
        }
    }
    FeatureMap::new(grids.into_iter().map(|g| Grid::new(cw, ch, g)).collect::<Result<Vec<_>>>()?)
}

/// Color Names channels, mean-centered per channel over the patch.
pub fn colornames(patch: &Image, cell: usize, table: &ColorNamesTable) -> Result<FeatureMap> {
    let mut map = colornames_uncentered(patch, cell, table)?;
    for g in &mut map.channels {
        let mean = g.data().iter().sum::<f64>() / g.data().len() as f64;
        for v in g.data_mut() {
            *v -= mean;
        }
    }
    Ok(map)
}

/// Splits a dense feature raster into one grid per channel.
pub fn raster_channels(raster: &Image) -> Result<FeatureMap> {
    let (w, h, d) = (raster.width(), raster.height(), raster.channels());
    let grids = (0..d)
        .map(|c| Grid::new(w, h, (0..w * h).map(|i| raster.data()[i * d + c] as f64).collect()))
        .collect::<Result<Vec<_>>>()?;
    FeatureMap::new(grids)
}
