//! Overlap metrics and annotation parsing.

use alloc::vec::Vec;

use crate::error::{bail, Result};
// Float methods for no_std builds; shadowed by inherent ones when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

/// Axis-aligned box, top-left corner plus extent, in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_center(center: [f64; 2], size: [f64; 2]) -> Self {
        Self::new(center[0] - size[0] / 2.0, center[1] - size[1] / 2.0, size[0], size[1])
    }

    pub fn center(&self) -> [f64; 2] {
        [self.x + self.w / 2.0, self.y + self.h / 2.0]
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }
}

/// Intersection over union; 0 when the union is empty.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
    let ih = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    // Extents as right minus left, like the intersection, so iou(a, a) is exactly 1.
    let extent = |r: &BoundingBox| ((r.x + r.w) - r.x).max(0.0) * ((r.y + r.h) - r.y).max(0.0);
    let union = extent(a) + extent(b) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Distance between box centers.
pub fn center_error(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ca, cb) = (a.center(), b.center());
    (ca[0] - cb[0]).hypot(ca[1] - cb[1])
}

/// Fraction of entries strictly above `threshold`.
pub fn overlap_precision(ious: &[f64], threshold: f64) -> Result<f64> {
    if ious.is_empty() {
        bail!(Argument, "overlap precision of an empty sequence");
    }
    Ok(ious.iter().filter(|v| **v > threshold).count() as f64 / ious.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuccessCurve {
    pub thresholds: Vec<f64>,
    pub op_values: Vec<f64>,
    pub auc: f64,
}

pub const SUCCESS_THRESHOLDS: usize = 21;

/// OP at thresholds 0, 0.05, ..., 1 and their mean.
pub fn success_curve(ious: &[f64]) -> Result<SuccessCurve> {
    let thresholds: Vec<f64> = (0..SUCCESS_THRESHOLDS).map(|i| i as f64 / (SUCCESS_THRESHOLDS - 1) as f64).collect();
    let op_values = thresholds.iter().map(|t| overlap_precision(ious, *t)).collect::<Result<Vec<_>>>()?;
    let auc = op_values.iter().sum::<f64>() / op_values.len() as f64;
    Ok(SuccessCurve { thresholds, op_values, auc })
}

/// Per-frame IoU of two equally long box lists.
pub fn sequence_ious(results: &[BoundingBox], truth: &[BoundingBox]) -> Result<Vec<f64>> {
    if results.len() != truth.len() {
        bail!(Dimension, "{} result boxes but {} ground-truth boxes", results.len(), truth.len());
    }
    Ok(results.iter().zip(truth).map(|(a, b)| iou(a, b)).collect())
}

/// One `x,y,w,h` box per line, comma or whitespace separated. Blank lines
/// are skipped.
pub fn parse_groundtruth(text: &str) -> Result<Vec<BoundingBox>> {
    let mut boxes = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        if fields.len() != 4 {
            bail!(Argument, "line {}: expected 4 fields, found {}", n + 1, fields.len());
        }
        let mut v = [0.0; 4];
        for (slot, field) in v.iter_mut().zip(&fields) {
            *slot = match field.parse::<f64>() {
                Ok(x) if x.is_finite() => x,
                _ => bail!(Argument, "line {}: invalid number {:?}", n + 1, field),
            };
        }
        if v[2] < 0.0 || v[3] < 0.0 {
            bail!(Argument, "line {}: negative box extent", n + 1);
        }
        boxes.push(BoundingBox::new(v[0], v[1], v[2], v[3]));
    }
    Ok(boxes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn iou_examples() {
        let a = BoundingBox::new(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &BoundingBox::new(5.0, 5.0, 1.0, 1.0)), 0.0);
        assert!((iou(&a, &BoundingBox::new(1.0, 0.0, 2.0, 2.0)) - 2.0 / 6.0).abs() < 1e-15);
        let empty = BoundingBox::new(0.0, 0.0, 0.0, 0.0);
        assert_eq!(iou(&empty, &empty), 0.0);
    }

    #[test]
    fn overlap_precision_examples() {
        assert_eq!(overlap_precision(&[1.0, 1.0], 0.5).unwrap(), 1.0);
        assert_eq!(overlap_precision(&[0.4, 0.6], 0.5).unwrap(), 0.5);
        assert_eq!(overlap_precision(&[0.99, 0.3], 1.0).unwrap(), 0.0);
        assert!(overlap_precision(&[], 0.5).is_err());
    }

    #[test]
    fn success_curve_examples() {
        let ones = success_curve(&[1.0; 4]).unwrap();
        assert_eq!(ones.thresholds.len(), 21);
        assert!(ones.op_values[..20].iter().all(|v| *v == 1.0));
        assert_eq!(ones.op_values[20], 0.0);
        assert_eq!(ones.auc, 20.0 / 21.0);
        assert_eq!(success_curve(&[0.0, 0.0]).unwrap().auc, 0.0);
        let half = success_curve(&[0.5]).unwrap();
        for (t, op) in half.thresholds.iter().zip(&half.op_values) {
            assert_eq!(*op, if *t < 0.5 { 1.0 } else { 0.0 });
        }
        assert_eq!(half.auc, 10.0 / 21.0);
        assert!(success_curve(&[]).is_err());
    }

    #[test]
    fn groundtruth_parsing() {
        let want = [BoundingBox::new(10.0, 20.0, 30.0, 40.0)];
        assert_eq!(parse_groundtruth("10,20,30,40\n").unwrap(), want);
        assert_eq!(parse_groundtruth("10 20 30 40\n\n\n").unwrap(), want);
        assert_eq!(parse_groundtruth("10,\t20, 30 ,40").unwrap(), want);
        let err = parse_groundtruth("10,20,30\n").unwrap_err();
        assert!(alloc::format!("{err}").contains("line 1"));
        let err = parse_groundtruth("1,2,3,4\n1,2,x,4\n").unwrap_err();
        assert!(alloc::format!("{err}").contains("line 2"));
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (-50.0..50.0f64, -50.0..50.0f64, 0.0..40.0f64, 0.0..40.0f64).prop_map(|(x, y, w, h)| BoundingBox::new(x, y, w, h))
    }

    proptest! {
        #[test]
        fn iou_is_symmetric(a in arb_box(), b in arb_box()) {
            prop_assert_eq!(iou(&a, &b), iou(&b, &a));
            let v = iou(&a, &b);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn iou_self_is_one(a in arb_box()) {
            prop_assume!(a.w > 1e-6 && a.h > 1e-6);
            prop_assert_eq!(iou(&a, &a), 1.0);
        }

        #[test]
        fn success_curve_is_monotone(ious in proptest::collection::vec(0.0..=1.0f64, 1..40)) {
            let c = success_curve(&ious).unwrap();
            for w in c.op_values.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            let mean = c.op_values.iter().sum::<f64>() / 21.0;
            prop_assert!((c.auc - mean).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&c.auc));
        }
    }
}
