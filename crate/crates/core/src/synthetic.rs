//! Procedural test sequences with exact ground truth.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{bail, Result};
use crate::eval::BoundingBox;
use crate::features::Image;
// Float methods for no_std builds; shadowed by inherent ones when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SequenceKind {
    /// Textured square moving 2 px per frame to the right.
    Translate,
    /// Textured bar rotating 3 degrees per frame about its center.
    Rotate,
    /// Two textured discs whose separation oscillates while drifting.
    Articulate,
}

impl SequenceKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "translate" => Ok(Self::Translate),
            "rotate" => Ok(Self::Rotate),
            "articulate" => Ok(Self::Articulate),
            _ => bail!(Argument, "unknown sequence kind {name:?}, expected translate, rotate or articulate"),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Translate => "translate",
            Self::Rotate => "rotate",
            Self::Articulate => "articulate",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSequence {
    pub frames: Vec<Image>,
    pub groundtruth: Vec<BoundingBox>,
}

pub const TRANSLATE_SIDE: f64 = 24.0;
pub const TRANSLATE_STEP: f64 = 2.0;
pub const BAR_SIZE: [f64; 2] = [48.0, 16.0];
pub const ROTATE_STEP_DEG: f64 = 3.0;
/// Texture block of the bar; coarse so the pattern survives rotation.
const BAR_BLOCK: f64 = 16.0;
const BLOB_RADIUS: f64 = 10.0;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic value in `[0, 1)` for an integer lattice cell.
fn hash_unit(seed: u64, salt: u64, x: i64, y: i64) -> f64 {
    let h = splitmix64(seed ^ splitmix64(salt ^ splitmix64((x as u64) ^ (y as u64).rotate_left(32))));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Blocky random color texture over continuous coordinates.
fn texture(seed: u64, salt: u64, u: f64, v: f64, block: f64) -> [f64; 3] {
    let (bx, by) = ((u / block).floor() as i64, (v / block).floor() as i64);
    [0, 1, 2].map(|c| 0.1 + 0.8 * hash_unit(seed, salt * 3 + c, bx, by))
}

/// Low-contrast background with bilinearly blended 16 px lattice.
fn background(seed: u64, x: f64, y: f64) -> [f64; 3] {
    let (u, v) = (x / 16.0, y / 16.0);
    let (x0, y0) = (u.floor(), v.floor());
    let (fx, fy) = (u - x0, v - y0);
    let (i, j) = (x0 as i64, y0 as i64);
    [0, 1, 2].map(|c| {
        let h = |a, b| hash_unit(seed, 100 + c, a, b);
        let n = (1.0 - fy) * ((1.0 - fx) * h(i, j) + fx * h(i + 1, j)) + fy * ((1.0 - fx) * h(i, j + 1) + fx * h(i + 1, j + 1));
        0.4 + 0.2 * n
    })
}

/// Renders a frame: `object` returns the foreground color at a point, if any.
/// Each pixel averages a 2x2 grid of subsamples.
fn render(width: usize, height: usize, seed: u64, object: impl Fn(f64, f64) -> Option<[f64; 3]>) -> Image {
    let mut data = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        for x in 0..width {
            let mut acc = [0.0; 3];
            for (dx, dy) in [(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)] {
                let (px, py) = (x as f64 + dx, y as f64 + dy);
                let c = object(px, py).unwrap_or_else(|| background(seed, px, py));
                for (a, v) in acc.iter_mut().zip(c) {
                    *a += v / 4.0;
                }
            }
            data.extend(acc.iter().map(|v| *v as f32));
        }
    }
    Image::new(width, height, 3, data).expect("frame dimensions are nonzero")
}

/// Ground truth of a `w x h` rectangle rotated by `theta` about `center`.
pub fn rotated_rect_bounds(center: [f64; 2], size: [f64; 2], theta: f64) -> BoundingBox {
    let (c, s) = (theta.cos().abs(), theta.sin().abs());
    let w = size[0] * c + size[1] * s;
    let h = size[0] * s + size[1] * c;
    BoundingBox::from_center(center, [w, h])
}

fn translate(frames: usize, seed: u64) -> SyntheticSequence {
    let width = 160.max(40 + (TRANSLATE_STEP as usize) * frames + TRANSLATE_SIDE as usize + 20);
    let height = 120;
    let (x0, y0) = (20.0, 48.0);
    let mut seq = SyntheticSequence { frames: Vec::new(), groundtruth: Vec::new() };
    for t in 0..frames {
        let x = x0 + TRANSLATE_STEP * t as f64;
        let frame = render(width, height, seed, |px, py| {
            let (u, v) = (px - x, py - y0);
            (0.0..TRANSLATE_SIDE).contains(&u).then_some(())?;
            (0.0..TRANSLATE_SIDE).contains(&v).then_some(())?;
            Some(texture(seed, 1, u, v, 4.0))
        });
        seq.frames.push(frame);
        seq.groundtruth.push(BoundingBox::new(x, y0, TRANSLATE_SIDE, TRANSLATE_SIDE));
    }
    seq
}

fn rotate(frames: usize, seed: u64) -> SyntheticSequence {
    let (width, height) = (160, 120);
    let center = [80.0, 60.0];
    let mut seq = SyntheticSequence { frames: Vec::new(), groundtruth: Vec::new() };
    for t in 0..frames {
        let theta = (ROTATE_STEP_DEG * t as f64).to_radians();
        let (c, s) = (theta.cos(), theta.sin());
        let frame = render(width, height, seed, |px, py| {
            let (dx, dy) = (px - center[0], py - center[1]);
            // rotate back into the bar frame
            let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
            if u.abs() > BAR_SIZE[0] / 2.0 || v.abs() > BAR_SIZE[1] / 2.0 {
                return None;
            }
            // point-symmetric texture, so the rotation center is unambiguous
            let (u, v) = if u < 0.0 { (-u, -v) } else { (u, v) };
            Some(texture(seed, 2, u + BAR_SIZE[0] / 2.0, v + BAR_SIZE[1] / 2.0, BAR_BLOCK))
        });
        seq.frames.push(frame);
        seq.groundtruth.push(rotated_rect_bounds(center, BAR_SIZE, theta));
    }
    seq
}

fn articulate(frames: usize, seed: u64) -> SyntheticSequence {
    let width = 160.max(60 + frames + 80);
    let height = 120;
    let mut seq = SyntheticSequence { frames: Vec::new(), groundtruth: Vec::new() };
    for t in 0..frames {
        let cx = 60.0 + t as f64;
        let cy = 60.0;
        let sep = 30.0 + 10.0 * (2.0 * PI * t as f64 / 20.0).sin();
        let centers = [[cx - sep / 2.0, cy], [cx + sep / 2.0, cy]];
        let frame = render(width, height, seed, |px, py| {
            centers.iter().enumerate().find_map(|(i, c)| {
                let (u, v) = (px - c[0], py - c[1]);
                (u * u + v * v <= BLOB_RADIUS * BLOB_RADIUS).then(|| texture(seed, 3 + i as u64, u + BLOB_RADIUS, v + BLOB_RADIUS, 4.0))
            })
        });
        seq.frames.push(frame);
        seq.groundtruth.push(BoundingBox::from_center([cx, cy], [sep + 2.0 * BLOB_RADIUS, 2.0 * BLOB_RADIUS]));
    }
    seq
}

/// Generates `frames` RGB frames; the output depends only on the arguments.
pub fn generate(kind: SequenceKind, frames: usize, seed: u64) -> Result<SyntheticSequence> {
    if frames == 0 {
        bail!(Argument, "a sequence needs at least one frame");
    }
    Ok(match kind {
        SequenceKind::Translate => translate(frames, seed),
        SequenceKind::Rotate => rotate(frames, seed),
        SequenceKind::Articulate => articulate(frames, seed),
    })
}
