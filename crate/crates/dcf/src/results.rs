//! Per-frame result files: headerless CSV, one line per frame,
//! `frame_index, x, y, w, h, score, m1x, m1y, ..., mMx, mMy, r11, r12, r21, r22`
//! with six decimals.

use std::fmt::Write as _;
use std::path::Path;

use deform_dcf_core::deformation::Mat2;
use deform_dcf_core::eval::BoundingBox;
use deform_dcf_core::spectral::Point;
use deform_dcf_core::tracker::FrameResult;

use crate::error::{Error, Result};

pub fn format_line(r: &FrameResult) -> String {
    let mut s = format!("{}, {:.6}, {:.6}, {:.6}, {:.6}, {:.6}", r.frame_index, r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h, r.score);
    for p in &r.parts {
        write!(s, ", {:.6}, {:.6}", p[0], p[1]).unwrap();
    }
    let t = &r.transform;
    write!(s, ", {:.6}, {:.6}, {:.6}, {:.6}", t[0][0], t[0][1], t[1][0], t[1][1]).unwrap();
    s
}

pub fn format_results(results: &[FrameResult]) -> String {
    results.iter().map(|r| format_line(r) + "\n").collect()
}

pub fn write_results(path: impl AsRef<Path>, results: &[FrameResult]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_results(results)).map_err(Error::io(path))
}

/// A parsed result line.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub frame_index: usize,
    pub bbox: BoundingBox,
    pub score: f64,
    pub parts: Vec<Point>,
    pub transform: Mat2,
}

pub fn parse_line(line: &str) -> std::result::Result<ResultRow, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() < 10 || !(fields.len() - 10).is_multiple_of(2) {
        return Err(format!("expected 10 + 2M fields, found {}", fields.len()));
    }
    let frame_index = fields[0].parse().map_err(|_| format!("invalid frame index {:?}", fields[0]))?;
    let v = fields[1..]
        .iter()
        .map(|f| f.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| format!("invalid number {f:?}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let n = v.len();
    Ok(ResultRow {
        frame_index,
        bbox: BoundingBox::new(v[0], v[1], v[2], v[3]),
        score: v[4],
        parts: v[5..n - 4].chunks(2).map(|c| [c[0], c[1]]).collect(),
        transform: [[v[n - 4], v[n - 3]], [v[n - 2], v[n - 1]]],
    })
}

/// Parses a result file's text; blank lines are skipped.
pub fn parse_results(text: &str) -> std::result::Result<Vec<ResultRow>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| parse_line(l).map_err(|m| format!("line {}: {m}", n + 1)))
        .collect()
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    parse_results(&text).map_err(|message| Error::Parse { path: path.into(), message })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FrameResult {
        FrameResult {
            frame_index: 3,
            bbox: BoundingBox::new(5.0, 6.5, 10.0, 12.25),
            score: 0.1234567,
            parts: vec![[10.0, 12.625], [7.5, 9.0]],
            transform: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    #[test]
    fn line_layout() {
        assert_eq!(
            format_line(&sample()),
            "3, 5.000000, 6.500000, 10.000000, 12.250000, 0.123457, 10.000000, 12.625000, 7.500000, 9.000000, 1.000000, 0.000000, 0.000000, 1.000000"
        );
    }

    #[test]
    fn parse_round_trip() {
        let rows = parse_results(&format_results(&[sample(), sample()])).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].bbox, sample().bbox);
        assert_eq!(rows[0].parts, sample().parts);
        assert_eq!(rows[0].transform, sample().transform);
        assert!((rows[0].score - 0.123457).abs() < 1e-12);
        assert!(parse_results("1, 2, 3\n").unwrap_err().contains("line 1"));
        assert!(parse_results("0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10\n").is_err());
    }
}
