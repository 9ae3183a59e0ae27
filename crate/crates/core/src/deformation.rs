//! Sub-filter displacement.
//!
//! Positions of the current frame minimize `alpha |S_f{x} - y|^2 + prior`,
//! where the prior `lambda * sum_m |p^m - R p0^m|^2` ties them to the initial
//! grid through a linear map `R`. The loss is not convex in the positions, so
//! it is descended with Barzilai-Borwein steps; in affine mode `R` is refitted
//! in closed form after every step.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{bail, Result};
use crate::spectral::{Point, Spectrum};
use crate::training::{subfilter_score, FilterCoefficients, TrainingSample};
// Float methods for no_std builds; shadowed by inherent ones when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

/// Row-major 2x2 matrix.
pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub fn apply(r: &Mat2, p: Point) -> Point {
    [r[0][0] * p[0] + r[0][1] * p[1], r[1][0] * p[0] + r[1][1] * p[1]]
}

/// How the deformation prior maps initial positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformMode {
    /// `R` is a free linear map refitted after every position step.
    Affine,
    /// `R` stays the identity.
    Identity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeformationState {
    /// Frame-1 positions relative to the target center.
    pub initial: Vec<Point>,
    pub current: Vec<Point>,
    pub transform: Mat2,
    pub lambda: f64,
    pub mode: TransformMode,
    /// Filter period; positions are kept within one period around the origin.
    pub period: [f64; 2],
    /// Sub-filters excluded from descent (the root filter).
    pub fixed: Vec<bool>,
}

impl DeformationState {
    pub fn new(initial: Vec<Point>, lambda: f64, mode: TransformMode, period: [f64; 2]) -> Result<Self> {
        if initial.is_empty() {
            bail!(Argument, "need at least one sub-filter position");
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            bail!(Argument, "lambda must be finite and nonnegative, got {lambda}");
        }
        if initial.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            bail!(Argument, "positions must be finite");
        }
        let fixed = alloc::vec![false; initial.len()];
        Ok(Self { current: initial.clone(), initial, transform: IDENTITY, lambda, mode, period, fixed })
    }

    pub fn len(&self) -> usize {
        self.initial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.initial.is_empty()
    }

    /// `R p0^m` for every sub-filter.
    pub fn predicted(&self) -> Vec<Point> {
        self.initial.iter().map(|p| apply(&self.transform, *p)).collect()
    }
}

/// Prior energy `lambda * sum_m |p^m - R p0^m|^2`.
pub fn reg_energy(state: &DeformationState) -> f64 {
    let sum: f64 = state
        .current
        .iter()
        .zip(&state.initial)
        .map(|(p, p0)| {
            let q = apply(&state.transform, *p0);
            (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
        })
        .sum();
    state.lambda * sum
}

/// Wraps into `(-T/2, T/2]`.
fn wrap(x: f64, period: f64) -> f64 {
    x - period * (x / period - 0.5).ceil()
}

/// Data term of one sample as a function of the positions: sub-filter scores
/// do not depend on positions and are computed once.
struct PositionProblem {
    parts: Vec<Spectrum>,
    label: Spectrum,
    weight: f64,
}

impl PositionProblem {
    fn new(f: &FilterCoefficients, sample: &TrainingSample, state: &DeformationState) -> Result<Self> {
        let m = f.shape().subfilters();
        if state.len() != m || state.current.len() != m || state.fixed.len() != m {
            bail!(Dimension, "deformation state has {} positions for {} sub-filters", state.current.len(), m);
        }
        if sample.label.layout() != f.shape().layout() {
            bail!(Dimension, "sample layout differs from filter layout");
        }
        let parts = (0..m).map(|i| subfilter_score(f.subfilter(i), sample)).collect::<Result<Vec<_>>>()?;
        Ok(Self { parts, label: sample.label.clone(), weight: sample.weight })
    }

    fn error(&self, positions: &[Point]) -> (Vec<Spectrum>, Spectrum) {
        let shifted: Vec<Spectrum> = self.parts.iter().zip(positions).map(|(s, p)| s.shift(*p)).collect();
        let mut e = self.label.clone();
        e.scale(-1.0);
        for s in &shifted {
            // same layout by construction
            let _ = e.axpy(Complex64::new(1.0, 0.0), s);
        }
        (shifted, e)
    }

    fn value(&self, state: &DeformationState) -> f64 {
        let (_, e) = self.error(&state.current);
        self.weight * e.norm2() + reg_energy(state)
    }

    fn gradient(&self, state: &DeformationState) -> Vec<[f64; 2]> {
        let (shifted, e) = self.error(&state.current);
        let layout = *self.label.layout();
        let [t1, t2] = layout.period();
        let mut out = Vec::with_capacity(shifted.len());
        for (m, s) in shifted.iter().enumerate() {
            let (mut g1, mut g2) = (0.0, 0.0);
            for (i, (ev, sv)) in e.coeffs().iter().zip(s.coeffs()).enumerate() {
                let (k1, k2) = layout.frequency(i);
                let c = ev.conj() * sv;
                // Re(c * (-i w)) = w * Im(c)
                g1 += 2.0 * PI * k1 as f64 / t1 * c.im;
                g2 += 2.0 * PI * k2 as f64 / t2 * c.im;
            }
            let q = apply(&state.transform, state.initial[m]);
            let p = state.current[m];
            out.push([
                2.0 * self.weight * g1 + 2.0 * state.lambda * (p[0] - q[0]),
                2.0 * self.weight * g2 + 2.0 * state.lambda * (p[1] - q[1]),
            ]);
        }
        out
    }
}

/// Gradient of `alpha |S_f{x} - y|^2 + prior` with respect to each current
/// position (`sample.weight` is `alpha`).
pub fn grad_positions(f: &FilterCoefficients, sample: &TrainingSample, state: &DeformationState) -> Result<Vec<[f64; 2]>> {
    Ok(PositionProblem::new(f, sample, state)?.gradient(state))
}

/// `alpha |S_f{x} - y|^2 + prior` at the state's current positions.
pub fn position_objective(f: &FilterCoefficients, sample: &TrainingSample, state: &DeformationState) -> Result<f64> {
    Ok(PositionProblem::new(f, sample, state)?.value(state))
}

/// Least-squares linear map taking `initial` to `current`.
pub fn estimate_transform(initial: &[Point], current: &[Point]) -> Result<Mat2> {
    if initial.len() != current.len() {
        bail!(Dimension, "{} initial vs {} current points", initial.len(), current.len());
    }
    if initial.len() < 2 {
        bail!(Argument, "need at least two points to fit a transform");
    }
    let (mut g, mut h) = ([[0.0; 2]; 2], [[0.0; 2]; 2]);
    for (p0, p) in initial.iter().zip(current) {
        for i in 0..2 {
            for j in 0..2 {
                g[i][j] += p0[i] * p0[j];
                h[i][j] += p[i] * p0[j];
            }
        }
    }
    let trace = g[0][0] + g[1][1];
    if trace == 0.0 {
        bail!(Degenerate, "all initial points are at the origin");
    }
    // Ridge only for (near-)collinear configurations; a well-conditioned
    // Gram matrix is inverted exactly.
    let half = trace / 2.0;
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    if det <= 1e-10 * half * half {
        let eps = 1e-8 * half;
        g[0][0] += eps;
        g[1][1] += eps;
    }
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let inv = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];
    let mut r = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = h[i][0] * inv[0][j] + h[i][1] * inv[1][j];
        }
    }
    if r.iter().flatten().any(|v| !v.is_finite()) {
        bail!(Numerical, "non-finite transform estimate");
    }
    Ok(r)
}

/// Barzilai-Borwein descent settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BbParams {
    pub max_iters: usize,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Step multiplier of the fallback when the last iterate is worse than the start.
    pub backtrack: f64,
}

impl Default for BbParams {
    fn default() -> Self {
        Self { max_iters: 10, initial_step: 1.0, min_step: 1e-4, max_step: 10.0, backtrack: 0.5 }
    }
}

impl BbParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            bail!(Argument, "max_iters must be at least 1");
        }
        if !(self.min_step > 0.0 && self.min_step <= self.max_step) {
            bail!(Argument, "need 0 < min_step <= max_step");
        }
        if !(self.initial_step > 0.0) {
            bail!(Argument, "initial step must be positive");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            bail!(Argument, "backtrack factor must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BbReport {
    pub iterations: usize,
    pub initial_value: f64,
    pub final_value: f64,
    /// A non-finite gradient stopped the descent; the input state was returned.
    pub aborted: bool,
    pub backtracked: bool,
}

const GRAD_TOL: f64 = 1e-6;

fn step_from(base: &DeformationState, g: &[[f64; 2]], step: f64) -> DeformationState {
    let mut next = base.clone();
    for (m, p) in next.current.iter_mut().enumerate() {
        if base.fixed[m] {
            continue;
        }
        p[0] = wrap(p[0] - step * g[m][0], base.period[0]);
        p[1] = wrap(p[1] - step * g[m][1], base.period[1]);
    }
    if next.mode == TransformMode::Affine {
        // keep the previous transform on degenerate configurations
        if let Ok(r) = estimate_transform(&next.initial, &next.current) {
            next.transform = r;
        }
    }
    next
}

fn masked_norm(g: &[[f64; 2]], fixed: &[bool]) -> f64 {
    g.iter()
        .zip(fixed)
        .filter(|(_, f)| !**f)
        .map(|(v, _)| v[0] * v[0] + v[1] * v[1])
        .sum::<f64>()
        .sqrt()
}

/// Descends the current positions with BB1 steps.
///
/// The returned state never has a larger `data + prior` value than `state`:
/// when the final iterate is worse than the start, the last step is halved
/// up to ten times and the best iterate seen is returned.
pub fn bb_descent(
    f: &FilterCoefficients,
    sample: &TrainingSample,
    state: &DeformationState,
    params: &BbParams,
) -> Result<(DeformationState, BbReport)> {
    params.validate()?;
    let problem = PositionProblem::new(f, sample, state)?;
    let start_value = problem.value(state);
    let mut report = BbReport { initial_value: start_value, final_value: start_value, ..Default::default() };
    let finite = |g: &[[f64; 2]]| g.iter().flatten().all(|v| v.is_finite());

    let mut g = problem.gradient(state);
    if !finite(&g) || !start_value.is_finite() {
        report.aborted = true;
        return Ok((state.clone(), report));
    }
    let mut cur = state.clone();
    let mut best = (start_value, state.clone());
    let mut step = params.initial_step;
    let mut last = None;
    report.iterations = 1;
    if masked_norm(&g, &state.fixed) < GRAD_TOL {
        return Ok((cur, report));
    }
    report.iterations = 0;
    for _ in 0..params.max_iters {
        report.iterations += 1;
        let next = step_from(&cur, &g, step);
        let gn = problem.gradient(&next);
        if !finite(&gn) {
            report.aborted = true;
            return Ok((state.clone(), report));
        }
        let value = problem.value(&next);
        if value < best.0 {
            best = (value, next.clone());
        }
        // BB1 from the unwrapped displacement
        let (mut ss, mut sy) = (0.0, 0.0);
        for m in 0..g.len() {
            if cur.fixed[m] {
                continue;
            }
            for a in 0..2 {
                let s = -step * g[m][a];
                ss += s * s;
                sy += s * (gn[m][a] - g[m][a]);
            }
        }
        last = Some((cur, g, step));
        step = if sy > 0.0 { (ss / sy).clamp(params.min_step, params.max_step) } else { params.max_step };
        cur = next;
        g = gn;
        report.final_value = value;
        if masked_norm(&g, &cur.fixed) < GRAD_TOL {
            break;
        }
    }
    if report.final_value > start_value {
        report.backtracked = true;
        if let Some((base, base_g, mut h)) = last {
            for _ in 0..10 {
                h *= params.backtrack;
                let candidate = step_from(&base, &base_g, h);
                let value = problem.value(&candidate);
                if value < best.0 {
                    best = (value, candidate);
                }
                if value <= start_value {
                    break;
                }
            }
        }
        report.final_value = best.0;
        return Ok((best.1, report));
    }
    Ok((cur, report))
}
