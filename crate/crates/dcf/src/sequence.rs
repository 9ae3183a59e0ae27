//! Frame directories and annotation files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use deform_dcf_core::eval::{parse_groundtruth, BoundingBox};
use deform_dcf_core::features::Image;

use crate::error::{Error, Result};

const FRAME_EXTENSIONS: [&str; 5] = ["png", "bmp", "pgm", "ppm", "pnm"];

/// Image files in `dir`, in ascending lexicographic order of file name.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut frames = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(Error::io(dir))? {
        let path = entry.map_err(Error::io(dir))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| FRAME_EXTENSIONS.contains(&e.as_str())) {
            frames.push(path);
        }
    }
    frames.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(frames)
}

/// Reads an 8-bit grayscale or RGB frame; other layouts are converted to RGB.
pub fn read_frame(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|source| Error::Image { path: path.into(), source })?;
    let image = match img {
        image::DynamicImage::ImageLuma8(g) => Image::from_u8(g.width() as usize, g.height() as usize, 1, g.as_raw())?,
        other => {
            let rgb = other.to_rgb8();
            Image::from_u8(rgb.width() as usize, rgb.height() as usize, 3, rgb.as_raw())?
        }
    };
    Ok(image)
}

/// Writes a 1- or 3-channel image as 8-bit PNG.
pub fn write_frame(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (image.width() as u32, image.height() as u32);
    let bytes = image.to_u8();
    let color = match image.channels() {
        1 => image::ExtendedColorType::L8,
        3 => image::ExtendedColorType::Rgb8,
        c => return Err(Error::Config(format!("cannot write a {c}-channel image"))),
    };
    image::save_buffer_with_format(path, &bytes, w, h, color, image::ImageFormat::Png)
        .map_err(|source| Error::Image { path: path.into(), source })
}

pub fn read_groundtruth(path: impl AsRef<Path>) -> Result<Vec<BoundingBox>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    parse_groundtruth(&text).map_err(|e| Error::Parse { path: path.into(), message: e.to_string() })
}

/// One `x,y,w,h` line per box, shortest round-tripping decimals.
pub fn format_groundtruth(boxes: &[BoundingBox]) -> String {
    let mut out = String::new();
    for b in boxes {
        writeln!(out, "{},{},{},{}", b.x, b.y, b.w, b.h).unwrap();
    }
    out
}

pub fn write_groundtruth(path: impl AsRef<Path>, boxes: &[BoundingBox]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_groundtruth(boxes)).map_err(Error::io(path))
}
