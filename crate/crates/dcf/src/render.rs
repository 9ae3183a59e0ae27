//! Burns the predicted box and sub-filter markers into a frame.

use deform_dcf_core::eval::BoundingBox;
use deform_dcf_core::features::Image;
use deform_dcf_core::tracker::FrameResult;

pub const BOX_COLOR: [f32; 3] = [1.0, 0.1, 0.1];
pub const ROOT_COLOR: [f32; 3] = [0.1, 0.4, 1.0];
pub const PART_COLOR: [f32; 3] = [0.1, 1.0, 0.2];
const MARKER_ARM: i64 = 3;

fn put(img: &mut Image, x: i64, y: i64, color: [f32; 3]) {
    if x < 0 || y < 0 || x >= img.width() as i64 || y >= img.height() as i64 {
        return;
    }
    for (c, v) in color.iter().enumerate() {
        img.set(x as usize, y as usize, c, *v);
    }
}

/// One-pixel outline; parts outside the image are clipped.
pub fn draw_box(img: &mut Image, b: &BoundingBox, color: [f32; 3]) {
    let (x0, y0) = (b.x.round() as i64, b.y.round() as i64);
    let (x1, y1) = ((b.x + b.w).round() as i64 - 1, (b.y + b.h).round() as i64 - 1);
    let (w, h) = (img.width() as i64, img.height() as i64);
    for x in x0.max(0)..=x1.min(w - 1) {
        put(img, x, y0, color);
        put(img, x, y1, color);
    }
    for y in y0.max(0)..=y1.min(h - 1) {
        put(img, x0, y, color);
        put(img, x1, y, color);
    }
}

/// Plus-shaped marker centered on the pixel containing `p`.
pub fn draw_marker(img: &mut Image, p: [f64; 2], color: [f32; 3]) {
    let (cx, cy) = (p[0].floor() as i64, p[1].floor() as i64);
    for d in -MARKER_ARM..=MARKER_ARM {
        put(img, cx + d, cy, color);
        put(img, cx, cy + d, color);
    }
}

/// RGB copy of `frame` with the result's box, root marker and part markers.
pub fn render(frame: &Image, result: &FrameResult) -> Image {
    let mut img = if frame.channels() == 3 {
        frame.clone()
    } else {
        let mut rgb = Vec::with_capacity(frame.width() * frame.height() * 3);
        for y in 0..frame.height() {
            for x in 0..frame.width() {
                rgb.extend([frame.get(x, y, 0); 3]);
            }
        }
        Image::new(frame.width(), frame.height(), 3, rgb).expect("same dimensions")
    };
    draw_box(&mut img, &result.bbox, BOX_COLOR);
    for (m, p) in result.parts.iter().enumerate() {
        draw_marker(&mut img, *p, if m == 0 { ROOT_COLOR } else { PART_COLOR });
    }
    img
}
