//! Filter coefficient training.
//!
//! The deformable filter is `f = sum_m shift(f^m, p^m)`. For a fixed set of
//! positions the weighted least-squares loss
//!
//! ```text
//! sum_c alpha_c |S_f{x^c} - y^c|^2 + sum_{m,d} |w^{m,d} f^m_d|^2
//! ```
//!
//! is quadratic in the coefficients; its minimizer solves the normal
//! equations `(A^H G A + W^H W) f = A^H G y`, which are applied matrix-free
//! and solved by conjugate gradient.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::deformation::{self, DeformationState};
use crate::error::{bail, Result};
use crate::spectral::{phasors, Point, Spectrum, SpectrumLayout};
// Float methods for no_std builds; shadowed by inherent ones when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// One stored training sample.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    /// Interpolated feature spectra, one per channel, all on the full layout.
    pub channels: Vec<Spectrum>,
    /// Desired score spectrum.
    pub label: Spectrum,
    pub weight: f64,
    /// Sub-filter positions the sample was trained with.
    pub positions: Vec<Point>,
}

impl TrainingSample {
    pub fn layout(&self) -> &SpectrumLayout {
        self.label.layout()
    }

    fn check(&self, layout: &SpectrumLayout, channels: usize) -> Result<()> {
        if self.channels.len() != channels {
            bail!(Dimension, "sample has {} channels, expected {}", self.channels.len(), channels);
        }
        if self.label.layout() != layout || self.channels.iter().any(|c| c.layout() != layout) {
            bail!(Dimension, "sample layout differs from filter layout {:?}", layout);
        }
        Ok(())
    }
}

/// Weighted, bounded training set with exponential forgetting.
#[derive(Clone, Debug)]
pub struct SampleMemory {
    samples: Vec<TrainingSample>,
    capacity: usize,
    learning_rate: f64,
}

impl SampleMemory {
    pub fn new(capacity: usize, learning_rate: f64) -> Result<Self> {
        if capacity == 0 {
            bail!(Argument, "memory capacity must be at least 1");
        }
        if !(learning_rate > 0.0 && learning_rate <= 1.0) {
            bail!(Argument, "learning rate must lie in (0, 1], got {learning_rate}");
        }
        Ok(Self { samples: Vec::new(), capacity, learning_rate })
    }

    pub fn samples(&self) -> &[TrainingSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn weights(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.weight).collect()
    }

    pub fn positions(&self) -> Vec<Vec<Point>> {
        self.samples.iter().map(|s| s.positions.clone()).collect()
    }

    /// Weight a newly inserted sample receives before renormalization.
    pub fn next_weight(&self) -> f64 {
        if self.samples.is_empty() {
            1.0
        } else {
            self.learning_rate
        }
    }

    /// Appends `sample`: existing weights decay by `1 - rate`, the new one
    /// gets `rate` (or 1 when the memory is empty). Over capacity, the
    /// lowest-weight sample is evicted (earliest on ties) and its index
    /// returned. Weights are renormalized to sum to one.
    pub fn insert(&mut self, mut sample: TrainingSample) -> Result<Option<usize>> {
        if let Some(first) = self.samples.first() {
            let layout = *first.layout();
            sample.check(&layout, first.channels.len())?;
            if sample.positions.len() != first.positions.len() {
                bail!(Dimension, "sample carries {} positions, memory has {}", sample.positions.len(), first.positions.len());
            }
        }
        sample.weight = self.next_weight();
        if !self.samples.is_empty() {
            for s in &mut self.samples {
                s.weight *= 1.0 - self.learning_rate;
            }
        }
        self.samples.push(sample);
        let mut evicted = None;
        if self.samples.len() > self.capacity {
            let mut lowest = 0;
            for (i, s) in self.samples.iter().enumerate() {
                if s.weight < self.samples[lowest].weight {
                    lowest = i;
                }
            }
            self.samples.remove(lowest);
            evicted = Some(lowest);
        }
        let total: f64 = self.samples.iter().map(|s| s.weight).sum();
        for s in &mut self.samples {
            s.weight /= total;
        }
        Ok(evicted)
    }
}

/// Sub-filter count, channel truncations and the shared layout of a filter.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterShape {
    layout: SpectrumLayout,
    channel_k: Vec<usize>,
    subfilters: usize,
    /// Storage indices (in the full layout) of the free coefficients of each
    /// channel, in `k1`-major order.
    support: Vec<Vec<usize>>,
}

impl FilterShape {
    /// `channel_k[d]` is the truncation of channel `d`; the layout truncation
    /// must equal the largest of them.
    pub fn new(layout: SpectrumLayout, channel_k: Vec<usize>, subfilters: usize) -> Result<Self> {
        if subfilters == 0 || channel_k.is_empty() {
            bail!(Argument, "need at least one sub-filter and one channel");
        }
        let kmax = channel_k.iter().copied().max().unwrap_or(0);
        if kmax != layout.k() {
            bail!(Dimension, "layout truncation {} differs from max channel truncation {}", layout.k(), kmax);
        }
        let support = channel_k
            .iter()
            .map(|&kd| {
                let kd = kd as isize;
                (0..layout.len())
                    .filter(|&i| {
                        let (k1, k2) = layout.frequency(i);
                        k1.abs() <= kd && k2.abs() <= kd
                    })
                    .collect()
            })
            .collect();
        Ok(Self { layout, channel_k, subfilters, support })
    }

    pub fn layout(&self) -> &SpectrumLayout {
        &self.layout
    }

    pub fn channels(&self) -> usize {
        self.channel_k.len()
    }

    pub fn channel_k(&self) -> &[usize] {
        &self.channel_k
    }

    pub fn subfilters(&self) -> usize {
        self.subfilters
    }

    /// Length of the vectorized coefficient array.
    pub fn unknowns(&self) -> usize {
        self.subfilters * self.support.iter().map(Vec::len).sum::<usize>()
    }
}

/// Coefficients of every sub-filter and channel.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterCoefficients {
    shape: FilterShape,
    /// Indexed `m * D + d`, each on the full layout and zero outside `K^d`.
    spectra: Vec<Spectrum>,
}

impl FilterCoefficients {
    pub fn zeros(shape: FilterShape) -> Self {
        let spectra = vec![Spectrum::zeros(shape.layout); shape.subfilters * shape.channels()];
        Self { shape, spectra }
    }

    /// Builds coefficients from per-sub-filter, per-channel spectra. Entries
    /// outside each channel truncation are dropped.
    pub fn from_spectra(shape: FilterShape, spectra: Vec<Spectrum>) -> Result<Self> {
        if spectra.len() != shape.subfilters * shape.channels() {
            bail!(Dimension, "expected {} spectra, got {}", shape.subfilters * shape.channels(), spectra.len());
        }
        let mut out = Self::zeros(shape);
        for (i, s) in spectra.iter().enumerate() {
            if s.layout() != &out.shape.layout {
                bail!(Dimension, "spectrum {i} has layout {:?}", s.layout());
            }
            let d = i % out.shape.channels();
            for &j in &out.shape.support[d] {
                out.spectra[i].coeffs_mut()[j] = s.coeffs()[j];
            }
        }
        Ok(out)
    }

    pub fn shape(&self) -> &FilterShape {
        &self.shape
    }

    pub fn get(&self, m: usize, d: usize) -> &Spectrum {
        &self.spectra[m * self.shape.channels() + d]
    }

    /// Channel spectra of sub-filter `m`.
    pub fn subfilter(&self, m: usize) -> &[Spectrum] {
        let d = self.shape.channels();
        &self.spectra[m * d..(m + 1) * d]
    }

    /// Vectorized coefficients: sub-filter major, then channel, then
    /// frequency with `k1` outer.
    pub fn to_vector(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.shape.unknowns());
        for (i, s) in self.spectra.iter().enumerate() {
            let d = i % self.shape.channels();
            out.extend(self.shape.support[d].iter().map(|&j| s.coeffs()[j]));
        }
        out
    }

    pub fn from_vector(shape: FilterShape, v: &[Complex64]) -> Result<Self> {
        if v.len() != shape.unknowns() {
            bail!(Dimension, "expected {} unknowns, got {}", shape.unknowns(), v.len());
        }
        let mut out = Self::zeros(shape);
        let mut pos = 0;
        let channels = out.shape.channels();
        for i in 0..out.spectra.len() {
            let support = &out.shape.support[i % channels];
            let coeffs = out.spectra[i].coeffs_mut();
            for &j in support {
                coeffs[j] = v[pos];
                pos += 1;
            }
        }
        Ok(out)
    }

    pub fn symmetrize(&mut self) {
        for s in &mut self.spectra {
            s.symmetrize();
        }
    }

    pub fn is_real_symmetric(&self, tol: f64) -> bool {
        self.spectra.iter().all(|s| s.is_real_symmetric(tol))
    }
}

/// Spatial penalty spectra `w^{m,d}`, truncated to at most 5x5 coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialRegularizer {
    /// Indexed `m * D + d`.
    spectra: Vec<Spectrum>,
    channels: usize,
}

/// Largest regularizer truncation.
pub const MAX_REGULARIZER_K: usize = 2;

impl SpatialRegularizer {
    pub fn from_spectra(spectra: Vec<Spectrum>, channels: usize) -> Result<Self> {
        if channels == 0 || spectra.is_empty() || !spectra.len().is_multiple_of(channels) {
            bail!(Dimension, "{} regularizer spectra do not split into {} channels", spectra.len(), channels);
        }
        for s in &spectra {
            if s.layout().k() > MAX_REGULARIZER_K {
                bail!(Argument, "regularizer truncation {} exceeds {}", s.layout().k(), MAX_REGULARIZER_K);
            }
            if !s.is_real_symmetric(1e-12) {
                bail!(Argument, "regularizer spectrum must be real-symmetric");
            }
            if !(s.get(0, 0).re > 0.0) {
                bail!(Argument, "regularizer mean must be positive");
            }
        }
        Ok(Self { spectra, channels })
    }

    /// Quadratic bowls `w(t) = w_min + (w_edge - w_min) * ((t1/r1)^2 + (t2/r2)^2)`,
    /// periodized over `period` and truncated to `|k| <= 2`; one radius pair per
    /// sub-filter, shared by all channels.
    pub fn bowls(period: [f64; 2], radii: &[[f64; 2]], channels: usize, w_min: f64, w_edge: f64) -> Result<Self> {
        if !(w_min > 0.0 && w_edge >= w_min) {
            bail!(Argument, "need 0 < w_min <= w_edge, got {w_min}, {w_edge}");
        }
        let layout = SpectrumLayout::new(period, MAX_REGULARIZER_K)?;
        let quad = w_edge - w_min;
        let mut spectra = Vec::with_capacity(radii.len() * channels);
        for r in radii {
            if !(r[0] > 0.0 && r[1] > 0.0) {
                bail!(Argument, "regularizer radii must be positive, got {:?}", r);
            }
            // Fourier series of t^2 on [-T/2, T/2]: T^2/12 at k = 0 and
            // (-1)^k T^2 / (2 pi^2 k^2) elsewhere.
            let series = |k: isize, t: f64, rad: f64| -> f64 {
                let s = t * t / (rad * rad);
                if k == 0 {
                    s / 12.0
                } else {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    sign * s / (2.0 * PI * PI * (k * k) as f64)
                }
            };
            let w = Spectrum::from_fn(layout, |k1, k2| {
                let v = match (k1, k2) {
                    (0, 0) => w_min + quad * (series(0, period[0], r[0]) + series(0, period[1], r[1])),
                    (k1, 0) => quad * series(k1, period[0], r[0]),
                    (0, k2) => quad * series(k2, period[1], r[1]),
                    _ => 0.0,
                };
                Complex64::new(v, 0.0)
            });
            for _ in 0..channels {
                spectra.push(w.clone());
            }
        }
        Self::from_spectra(spectra, channels)
    }

    pub fn subfilters(&self) -> usize {
        self.spectra.len() / self.channels
    }

    pub fn get(&self, m: usize, d: usize) -> &Spectrum {
        &self.spectra[m * self.channels + d]
    }

    fn check(&self, shape: &FilterShape) -> Result<()> {
        if self.channels != shape.channels() || self.subfilters() != shape.subfilters() {
            bail!(
                Dimension,
                "regularizer is {}x{}, filter is {}x{}",
                self.subfilters(),
                self.channels,
                shape.subfilters(),
                shape.channels()
            );
        }
        if self.spectra.iter().any(|s| s.layout().period() != shape.layout.period()) {
            bail!(Dimension, "regularizer period differs from filter period");
        }
        Ok(())
    }

    /// `W^H W` applied to one channel filter, restricted to truncation `kd`
    /// and returned on the filter layout.
    fn gram(&self, m: usize, d: usize, f: &Spectrum, kd: usize) -> Result<Spectrum> {
        let w = self.get(m, d);
        let wf = f.resized(kd).convolve(w)?;
        Ok(wf.convolve(w)?.resized(kd).resized(f.layout().k()))
    }

    /// `|w^{m,d} f|^2` by Parseval.
    fn energy(&self, m: usize, d: usize, f: &Spectrum) -> Result<f64> {
        Ok(f.convolve(self.get(m, d))?.norm2())
    }
}

/// Spectrum of a periodically summed Gaussian of unit peak height centered
/// at `offset`.
pub fn gaussian_label(layout: &SpectrumLayout, sigma: [f64; 2], offset: Point) -> Result<Spectrum> {
    if !(sigma[0] > 0.0 && sigma[1] > 0.0) {
        bail!(Argument, "label sigma must be positive, got {:?}", sigma);
    }
    let [t1, t2] = layout.period();
    let amp = 2.0 * PI * sigma[0] * sigma[1] / (t1 * t2);
    let e1 = phasors(layout.k(), offset[0], t1, -1.0);
    let e2 = phasors(layout.k(), offset[1], t2, -1.0);
    let k = layout.k() as isize;
    Ok(Spectrum::from_fn(*layout, |k1, k2| {
        let (a, b) = (k1 as f64 / t1, k2 as f64 / t2);
        let g = amp * (-2.0 * PI * PI * (sigma[0] * sigma[0] * a * a + sigma[1] * sigma[1] * b * b)).exp();
        e1[(k1 + k) as usize] * e2[(k2 + k) as usize] * g
    }))
}

/// Score spectrum of one sub-filter: `sum_d f_d * X_d`.
pub fn subfilter_score(filter: &[Spectrum], sample: &TrainingSample) -> Result<Spectrum> {
    if filter.len() != sample.channels.len() {
        bail!(Dimension, "filter has {} channels, sample has {}", filter.len(), sample.channels.len());
    }
    let layout = *sample.layout();
    let mut out = Spectrum::zeros(layout);
    for (f, x) in filter.iter().zip(&sample.channels) {
        let prod = x.pointwise_mul(f)?;
        out.axpy(Complex64::new(1.0, 0.0), &prod)?;
    }
    Ok(out)
}

/// Score spectrum of the deformable filter with sub-filters at `positions`.
pub fn full_score(f: &FilterCoefficients, sample: &TrainingSample, positions: &[Point]) -> Result<Spectrum> {
    let shape = f.shape();
    if positions.len() != shape.subfilters() {
        bail!(Dimension, "{} positions for {} sub-filters", positions.len(), shape.subfilters());
    }
    sample.check(shape.layout(), shape.channels())?;
    let mut out = Spectrum::zeros(*shape.layout());
    for (m, p) in positions.iter().enumerate() {
        let s = subfilter_score(f.subfilter(m), sample)?.shift(*p);
        out.axpy(Complex64::new(1.0, 0.0), &s)?;
    }
    Ok(out)
}

/// Shift factors `exp(-i 2 pi (p1 k1 / T1 + p2 k2 / T2))` over the layout.
fn shift_factors(layout: &SpectrumLayout, p: Point) -> Vec<Complex64> {
    let [t1, t2] = layout.period();
    let e1 = phasors(layout.k(), p[0], t1, -1.0);
    let e2 = phasors(layout.k(), p[1], t2, -1.0);
    let s = layout.side();
    (0..layout.len()).map(|i| e1[i / s] * e2[i % s]).collect()
}

fn check_problem(
    shape: &FilterShape,
    samples: &[TrainingSample],
    regularizer: &SpatialRegularizer,
    positions: &[Vec<Point>],
) -> Result<()> {
    regularizer.check(shape)?;
    if positions.len() != samples.len() {
        bail!(Dimension, "{} position sets for {} samples", positions.len(), samples.len());
    }
    for (s, p) in samples.iter().zip(positions) {
        s.check(shape.layout(), shape.channels())?;
        if p.len() != shape.subfilters() {
            bail!(Dimension, "{} positions for {} sub-filters", p.len(), shape.subfilters());
        }
    }
    Ok(())
}

/// `(A^H G A + W^H W) x` for the vectorized coefficients `x`.
pub fn apply_normal_operator(
    x: &[Complex64],
    shape: &FilterShape,
    samples: &[TrainingSample],
    regularizer: &SpatialRegularizer,
    positions: &[Vec<Point>],
) -> Result<Vec<Complex64>> {
    check_problem(shape, samples, regularizer, positions)?;
    let f = FilterCoefficients::from_vector(shape.clone(), x)?;
    let (m_count, d_count) = (shape.subfilters(), shape.channels());
    let n = shape.layout.len();
    let mut acc = vec![ZERO; m_count * d_count * n];
    let mut score = vec![ZERO; n];
    let mut inner = vec![ZERO; n];
    for (sample, pos) in samples.iter().zip(positions) {
        let betas: Vec<Vec<Complex64>> = pos.iter().map(|p| shift_factors(&shape.layout, *p)).collect();
        score.fill(ZERO);
        for (m, beta) in betas.iter().enumerate() {
            inner.fill(ZERO);
            for (fd, xd) in f.subfilter(m).iter().zip(&sample.channels) {
                for ((o, a), b) in inner.iter_mut().zip(fd.coeffs()).zip(xd.coeffs()) {
                    *o += a * b;
                }
            }
            for ((s, b), v) in score.iter_mut().zip(beta).zip(&inner) {
                *s += b * v;
            }
        }
        for s in &mut score {
            *s *= sample.weight;
        }
        for (m, beta) in betas.iter().enumerate() {
            for (d, xd) in sample.channels.iter().enumerate() {
                let out = &mut acc[(m * d_count + d) * n..(m * d_count + d + 1) * n];
                for (((o, s), b), xv) in out.iter_mut().zip(&score).zip(beta).zip(xd.coeffs()) {
                    *o += (b * xv).conj() * s;
                }
            }
        }
    }
    let mut result = Vec::with_capacity(shape.unknowns());
    for m in 0..m_count {
        for d in 0..d_count {
            let reg = regularizer.gram(m, d, f.get(m, d), shape.channel_k[d])?;
            let out = &acc[(m * d_count + d) * n..(m * d_count + d + 1) * n];
            result.extend(shape.support[d].iter().map(|&j| out[j] + reg.coeffs()[j]));
        }
    }
    Ok(result)
}

/// Right-hand side `A^H G y` of the normal equations.
pub fn normal_rhs(shape: &FilterShape, samples: &[TrainingSample], positions: &[Vec<Point>]) -> Result<Vec<Complex64>> {
    let n = shape.layout.len();
    let d_count = shape.channels();
    let mut acc = vec![ZERO; shape.subfilters() * d_count * n];
    for (sample, pos) in samples.iter().zip(positions) {
        sample.check(shape.layout(), d_count)?;
        for (m, p) in pos.iter().enumerate() {
            let beta = shift_factors(&shape.layout, *p);
            for (d, xd) in sample.channels.iter().enumerate() {
                let out = &mut acc[(m * d_count + d) * n..(m * d_count + d + 1) * n];
                for (((o, y), b), xv) in out.iter_mut().zip(sample.label.coeffs()).zip(&beta).zip(xd.coeffs()) {
                    *o += (b * xv).conj() * y * sample.weight;
                }
            }
        }
    }
    let mut result = Vec::with_capacity(shape.unknowns());
    for m in 0..shape.subfilters() {
        for d in 0..d_count {
            let out = &acc[(m * d_count + d) * n..(m * d_count + d + 1) * n];
            result.extend(shape.support[d].iter().map(|&j| out[j]));
        }
    }
    Ok(result)
}

/// Conjugate gradient budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgParams {
    pub max_iter: usize,
    /// Stop once `|r| / |b|` falls below this.
    pub tol: f64,
}

impl Default for CgParams {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-6 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
    /// `1/2 x^H A x - Re(x^H b)` at the start and after every iteration.
    pub objective_trace: Vec<f64>,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Conjugate gradient for a Hermitian positive-definite operator.
pub fn conjugate_gradient(
    mut apply: impl FnMut(&[Complex64]) -> Result<Vec<Complex64>>,
    b: &[Complex64],
    x0: Option<&[Complex64]>,
    params: CgParams,
) -> Result<(Vec<Complex64>, CgReport)> {
    let b_norm = dot(b, b).re.sqrt();
    let mut report = CgReport::default();
    if b_norm == 0.0 {
        report.objective_trace.push(0.0);
        return Ok((vec![ZERO; b.len()], report));
    }
    let mut x = match x0 {
        Some(x0) if x0.len() == b.len() => x0.to_vec(),
        Some(x0) => bail!(Dimension, "warm start has {} entries, expected {}", x0.len(), b.len()),
        None => vec![ZERO; b.len()],
    };
    let ax = apply(&x)?;
    let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let quad = |x: &[Complex64], r: &[Complex64]| -> f64 {
        -0.5 * x.iter().zip(b.iter().zip(r)).map(|(xi, (bi, ri))| (xi.conj() * (bi + ri)).re).sum::<f64>()
    };
    report.objective_trace.push(quad(&x, &r));
    let mut rs = dot(&r, &r).re;
    report.relative_residual = rs.sqrt() / b_norm;
    let mut p = r.clone();
    while report.iterations < params.max_iter && report.relative_residual >= params.tol {
        let ap = apply(&p)?;
        let pap = dot(&p, &ap).re;
        if !pap.is_finite() || pap <= 0.0 {
            if !pap.is_finite() {
                bail!(Numerical, "non-finite curvature in conjugate gradient");
            }
            break;
        }
        let alpha = rs / pap;
        for ((xi, pi), (ri, api)) in x.iter_mut().zip(&p).zip(r.iter_mut().zip(&ap)) {
            *xi += pi * alpha;
            *ri -= api * alpha;
        }
        let rs_new = dot(&r, &r).re;
        if !rs_new.is_finite() {
            bail!(Numerical, "non-finite residual in conjugate gradient");
        }
        let beta = rs_new / rs;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + *pi * beta;
        }
        rs = rs_new;
        report.iterations += 1;
        report.relative_residual = rs.sqrt() / b_norm;
        report.objective_trace.push(quad(&x, &r));
    }
    Ok((x, report))
}

/// Solves the normal equations for all sub-filter coefficients.
///
/// The result is projected back onto real-symmetric spectra. On a numerical
/// failure the error is returned and callers keep their previous filter.
pub fn solve_coefficients(
    shape: &FilterShape,
    samples: &[TrainingSample],
    regularizer: &SpatialRegularizer,
    positions: &[Vec<Point>],
    params: CgParams,
    warm_start: Option<&FilterCoefficients>,
) -> Result<(FilterCoefficients, CgReport)> {
    if samples.is_empty() {
        bail!(Argument, "cannot train on an empty memory");
    }
    if !samples.iter().any(|s| s.weight > 0.0) {
        bail!(Argument, "all sample weights are zero");
    }
    check_problem(shape, samples, regularizer, positions)?;
    let b = normal_rhs(shape, samples, positions)?;
    let x0 = match warm_start {
        Some(f) if f.shape() == shape => Some(f.to_vector()),
        Some(_) => bail!(Dimension, "warm start shape differs from the problem shape"),
        None => None,
    };
    let (x, report) = conjugate_gradient(
        |v| apply_normal_operator(v, shape, samples, regularizer, positions),
        &b,
        x0.as_deref(),
        params,
    )?;
    let mut f = FilterCoefficients::from_vector(shape.clone(), &x)?;
    f.symmetrize();
    Ok((f, report))
}

/// The three loss terms: weighted data error, spatial regularization and
/// deformation prior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveTerms {
    pub data: f64,
    pub regularization: f64,
    pub deformation: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.data + self.regularization + self.deformation
    }
}

/// `alpha |S_f{x} - y|^2` for one sample with sub-filters at `positions`.
pub fn data_term(f: &FilterCoefficients, sample: &TrainingSample, positions: &[Point]) -> Result<f64> {
    let mut e = full_score(f, sample, positions)?;
    e.axpy(Complex64::new(-1.0, 0.0), &sample.label)?;
    Ok(sample.weight * e.norm2())
}

/// Evaluates the loss terms; the deformation term is the prior energy of
/// `prior` (the current frame's positions against the initial ones).
pub fn objective(
    f: &FilterCoefficients,
    samples: &[TrainingSample],
    positions: &[Vec<Point>],
    regularizer: &SpatialRegularizer,
    prior: &DeformationState,
) -> Result<ObjectiveTerms> {
    check_problem(f.shape(), samples, regularizer, positions)?;
    let mut data = 0.0;
    for (s, p) in samples.iter().zip(positions) {
        data += data_term(f, s, p)?;
    }
    let mut reg = 0.0;
    for m in 0..f.shape().subfilters() {
        for d in 0..f.shape().channels() {
            reg += regularizer.energy(m, d, f.get(m, d))?;
        }
    }
    Ok(ObjectiveTerms { data, regularization: reg, deformation: deformation::reg_energy(prior) })
}
