//! Truncated 2-D Fourier series of periodic functions.
//!
//! A [`Spectrum`] stores the coefficients `c[k1, k2]` for `|k1|, |k2| <= K` of
//! a function with periods `(T1, T2)`:
//!
//! ```text
//! f(t1, t2) = sum c[k1, k2] * exp(i 2 pi (k1 t1 / T1 + k2 t2 / T2))
//! ```
//!
//! Axis 1 is horizontal (image x, grid columns) and axis 2 vertical (image y,
//! grid rows). Coefficients are stored densely with `k1` as the outer index,
//! so the mirror of storage index `i` is `len - 1 - i`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{bail, Result};
// Float methods for no_std builds; shadowed by inherent ones when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

/// A point (or displacement) in the continuous domain, `(t1, t2)`.
pub type Point = [f64; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Periods and truncation of a spectrum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumLayout {
    period: [f64; 2],
    k: usize,
}

impl SpectrumLayout {
    pub fn new(period: [f64; 2], k: usize) -> Result<Self> {
        if !(period[0] > 0.0 && period[1] > 0.0 && period[0].is_finite() && period[1].is_finite()) {
            bail!(Argument, "periods must be positive and finite, got {:?}", period);
        }
        Ok(Self { period, k })
    }

    pub fn period(&self) -> [f64; 2] {
        self.period
    }

    /// Highest frequency index on each axis.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Coefficients per axis, `2K + 1`.
    pub fn side(&self) -> usize {
        2 * self.k + 1
    }

    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Same periods, different truncation.
    pub fn with_k(&self, k: usize) -> Self {
        Self { period: self.period, k }
    }

    pub fn index(&self, k1: isize, k2: isize) -> Option<usize> {
        let k = self.k as isize;
        if k1.abs() > k || k2.abs() > k {
            return None;
        }
        Some(((k1 + k) as usize) * self.side() + (k2 + k) as usize)
    }

    /// Frequency pair of a storage index.
    pub fn frequency(&self, index: usize) -> (isize, isize) {
        let k = self.k as isize;
        let s = self.side();
        ((index / s) as isize - k, (index % s) as isize - k)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self != other {
            bail!(Dimension, "layout mismatch: {:?} vs {:?}", self, other);
        }
        Ok(())
    }
}

/// `exp(sign * i 2 pi k t / period)` for `k = -K..=K`.
pub(crate) fn phasors(k: usize, t: f64, period: f64, sign: f64) -> Vec<Complex64> {
    let k = k as isize;
    (-k..=k)
        .map(|kk| Complex64::from_polar(1.0, sign * 2.0 * PI * kk as f64 * t / period))
        .collect()
}

/// Truncated Fourier coefficients of a periodic function.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    layout: SpectrumLayout,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(layout: SpectrumLayout) -> Self {
        Self { layout, coeffs: vec![ZERO; layout.len()] }
    }

    pub fn from_coeffs(layout: SpectrumLayout, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != layout.len() {
            bail!(Dimension, "expected {} coefficients, got {}", layout.len(), coeffs.len());
        }
        Ok(Self { layout, coeffs })
    }

    /// Builds a spectrum from a function of the frequency pair `(k1, k2)`.
    pub fn from_fn(layout: SpectrumLayout, mut f: impl FnMut(isize, isize) -> Complex64) -> Self {
        let coeffs = (0..layout.len())
            .map(|i| {
                let (k1, k2) = layout.frequency(i);
                f(k1, k2)
            })
            .collect();
        Self { layout, coeffs }
    }

    pub fn layout(&self) -> &SpectrumLayout {
        &self.layout
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient at `(k1, k2)`; zero outside the truncation.
    pub fn get(&self, k1: isize, k2: isize) -> Complex64 {
        self.layout.index(k1, k2).map_or(ZERO, |i| self.coeffs[i])
    }

    pub fn set(&mut self, k1: isize, k2: isize, value: Complex64) -> Result<()> {
        match self.layout.index(k1, k2) {
            Some(i) => {
                self.coeffs[i] = value;
                Ok(())
            }
            None => bail!(Dimension, "frequency ({k1}, {k2}) outside truncation {}", self.layout.k),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// True when `c[-k] = conj(c[k])` for every index, within `tol` scaled by
    /// `max(1, max |c|)`. Such spectra represent real-valued functions.
    pub fn is_real_symmetric(&self, tol: f64) -> bool {
        let n = self.coeffs.len();
        let bound = tol * self.max_abs().max(1.0);
        (0..n).all(|i| (self.coeffs[i] - self.coeffs[n - 1 - i].conj()).norm() <= bound)
    }

    /// Projects onto the real-symmetric subspace.
    pub fn symmetrize(&mut self) {
        let n = self.coeffs.len();
        for i in 0..=n / 2 {
            let j = n - 1 - i;
            let avg = (self.coeffs[i] + self.coeffs[j].conj()) * 0.5;
            self.coeffs[i] = avg;
            self.coeffs[j] = avg.conj();
        }
    }

    fn require_real(&self) -> Result<()> {
        if !self.is_real_symmetric(1e-9) {
            bail!(Domain, "spectrum is not real-symmetric");
        }
        Ok(())
    }

    /// Point value of the represented real function.
    pub fn evaluate(&self, t: Point) -> Result<f64> {
        self.require_real()?;
        let v = self.evaluate_complex(t);
        if v.im.abs() >= 1e-8 * (1.0 + v.re.abs()) {
            bail!(Domain, "imaginary residue {} at {:?}", v.im, t);
        }
        Ok(v.re)
    }

    pub(crate) fn evaluate_complex(&self, t: Point) -> Complex64 {
        let k = self.layout.k;
        let [p1, p2] = self.layout.period;
        let e1 = phasors(k, t[0], p1, 1.0);
        let e2 = phasors(k, t[1], p2, 1.0);
        let s = self.layout.side();
        let mut total = ZERO;
        for (a, row) in self.coeffs.chunks_exact(s).enumerate() {
            let inner: Complex64 = row.iter().zip(&e2).map(|(c, e)| c * e).sum();
            total += e1[a] * inner;
        }
        total
    }

    /// Value, gradient and Hessian of the represented function at `t`.
    pub fn evaluate_with_derivatives(&self, t: Point) -> Result<(f64, [f64; 2], [[f64; 2]; 2])> {
        self.require_real()?;
        let k = self.layout.k;
        let [p1, p2] = self.layout.period;
        let e1 = phasors(k, t[0], p1, 1.0);
        let e2 = phasors(k, t[1], p2, 1.0);
        let (mut v, mut g1, mut g2) = (ZERO, ZERO, ZERO);
        let (mut h11, mut h12, mut h22) = (ZERO, ZERO, ZERO);
        for i in 0..self.coeffs.len() {
            let (k1, k2) = self.layout.frequency(i);
            let term = self.coeffs[i] * e1[(k1 + k as isize) as usize] * e2[(k2 + k as isize) as usize];
            let w1 = Complex64::new(0.0, 2.0 * PI * k1 as f64 / p1);
            let w2 = Complex64::new(0.0, 2.0 * PI * k2 as f64 / p2);
            v += term;
            g1 += term * w1;
            g2 += term * w2;
            h11 += term * w1 * w1;
            h12 += term * w1 * w2;
            h22 += term * w2 * w2;
        }
        Ok((v.re, [g1.re, g2.re], [[h11.re, h12.re], [h12.re, h22.re]]))
    }

    /// Samples the function on the uniform grid `t = (j1 T1 / g1, j2 T2 / g2)`.
    /// Output is row-major with `j2` as the row.
    pub fn sample_grid(&self, grid: [usize; 2]) -> Result<alloc::vec::Vec<f64>> {
        self.require_real()?;
        let [g1, g2] = grid;
        if g1 == 0 || g2 == 0 {
            bail!(Argument, "grid must be nonempty");
        }
        let k = self.layout.k;
        let s = self.layout.side();
        // exp(i 2 pi k j / g) only depends on (k j) mod g.
        let table = |g: usize| -> Vec<Complex64> {
            (0..g).map(|r| Complex64::from_polar(1.0, 2.0 * PI * r as f64 / g as f64)).collect()
        };
        let (tab1, tab2) = (table(g1), table(g2));
        let wrap = |kk: isize, j: usize, g: usize| -> usize { (kk.rem_euclid(g as isize) as usize * j) % g };
        // inner[a][j2] = sum_b c[a, b] exp(i 2 pi k2 j2 / g2)
        let mut inner = vec![ZERO; s * g2];
        for a in 0..s {
            let row = &self.coeffs[a * s..(a + 1) * s];
            for j2 in 0..g2 {
                let mut acc = ZERO;
                for (b, c) in row.iter().enumerate() {
                    acc += c * tab2[wrap(b as isize - k as isize, j2, g2)];
                }
                inner[a * g2 + j2] = acc;
            }
        }
        let mut out = vec![0.0; g1 * g2];
        for j2 in 0..g2 {
            for j1 in 0..g1 {
                let mut acc = ZERO;
                for a in 0..s {
                    acc += inner[a * g2 + j2] * tab1[wrap(a as isize - k as isize, j1, g1)];
                }
                out[j2 * g1 + j1] = acc.re;
            }
        }
        Ok(out)
    }

    /// Translates the function by `p`: `g(t) = f(t - p)`.
    pub fn shift(&self, p: Point) -> Spectrum {
        let k = self.layout.k;
        let [p1, p2] = self.layout.period;
        let e1 = phasors(k, p[0], p1, -1.0);
        let e2 = phasors(k, p[1], p2, -1.0);
        let s = self.layout.side();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| e1[i / s] * e2[i % s] * c)
            .collect();
        Spectrum { layout: self.layout, coeffs }
    }

    /// `sum conj(other[k]) * self[k]`, the L2 inner product over one period
    /// normalized by the period area.
    pub fn inner(&self, other: &Spectrum) -> Result<Complex64> {
        self.layout.check_same(&other.layout)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| b.conj() * a).sum())
    }

    pub fn norm2(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Elementwise product of coefficients.
    pub fn pointwise_mul(&self, other: &Spectrum) -> Result<Spectrum> {
        self.layout.check_same(&other.layout)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).collect();
        Ok(Spectrum { layout: self.layout, coeffs })
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: Complex64, other: &Spectrum) -> Result<()> {
        self.layout.check_same(&other.layout)?;
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
        Ok(())
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.coeffs {
            *c *= a;
        }
    }

    /// Zero-pads or truncates to a new maximum frequency.
    pub fn resized(&self, k: usize) -> Spectrum {
        let layout = self.layout.with_k(k);
        Spectrum::from_fn(layout, |k1, k2| self.get(k1, k2))
    }

    /// Full discrete convolution of the coefficient arrays, which is the
    /// spectrum of the product of the two functions.
    pub fn convolve(&self, other: &Spectrum) -> Result<Spectrum> {
        if self.layout.period != other.layout.period {
            bail!(Dimension, "period mismatch: {:?} vs {:?}", self.layout.period, other.layout.period);
        }
        let (ka, kb) = (self.layout.k as isize, other.layout.k as isize);
        let out_layout = self.layout.with_k((ka + kb) as usize);
        let mut out = Spectrum::zeros(out_layout);
        let so = out_layout.side();
        let sb = other.layout.side();
        for (ia, a) in self.coeffs.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            let (a1, a2) = self.layout.frequency(ia);
            for (ib, b) in other.coeffs.iter().enumerate() {
                let (b1, b2) = ((ib / sb) as isize - kb, (ib % sb) as isize - kb);
                let o = ((a1 + b1 + ka + kb) as usize) * so + (a2 + b2 + ka + kb) as usize;
                out.coeffs[o] += a * b;
            }
        }
        Ok(out)
    }
}

/// A real 2-D sample grid, row-major, `width` samples along axis 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            bail!(Argument, "grid must be nonempty");
        }
        if data.len() != width * height {
            bail!(Dimension, "grid {}x{} needs {} values, got {}", width, height, width * height, data.len());
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Continuous-domain location of sample `n` on an axis with `count`
    /// samples over `period`; the grid center maps to 0.
    pub fn node(n: usize, count: usize, period: f64) -> f64 {
        (n as f64 - (count as f64 - 1.0) / 2.0) * period / count as f64
    }
}

/// Keys cubic convolution kernel, `a = -0.75`.
pub fn cubic_kernel(u: f64) -> f64 {
    const A: f64 = -0.75;
    let x = u.abs();
    if x <= 1.0 {
        (A + 2.0) * x * x * x - (A + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        A * x * x * x - 5.0 * A * x * x + 8.0 * A * x - 4.0 * A
    } else {
        0.0
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * x * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            dp = n as f64 * (x * p1 - p2) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Continuous Fourier transform of [`cubic_kernel`] at frequency `xi`
/// (cycles per sample spacing), by composite Gauss-Legendre quadrature.
pub fn cubic_kernel_transform(xi: f64) -> f64 {
    let (nodes, weights) = gauss_legendre(16);
    // panels never straddle the knot at u = 1
    let per_unit = 2 + (2.0 * xi.abs()).ceil() as usize;
    let panels = 2 * per_unit;
    let h = 1.0 / per_unit as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (x, w) in nodes.iter().zip(&weights) {
            let u = mid + 0.5 * h * x;
            sum += w * 0.5 * h * cubic_kernel(u) * (2.0 * PI * xi * u).cos();
        }
    }
    // even integrand over [-2, 2]
    2.0 * sum
}

/// Fourier coefficients of the periodized interpolation kernel for one
/// sample grid.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationKernel {
    spectrum: Spectrum,
    samples: [usize; 2],
}

impl InterpolationKernel {
    /// Cubic kernel scaled to the sample spacing `T / N` on each axis.
    pub fn cubic(layout: SpectrumLayout, samples: [usize; 2]) -> Result<Self> {
        if samples[0] == 0 || samples[1] == 0 {
            bail!(Argument, "sample counts must be positive");
        }
        let k = layout.k as isize;
        let axis = |n: usize| -> Vec<f64> {
            (-k..=k).map(|kk| cubic_kernel_transform(kk as f64 / n as f64) / n as f64).collect()
        };
        let (b1, b2) = (axis(samples[0]), axis(samples[1]));
        let spectrum = Spectrum::from_fn(layout, |k1, k2| {
            Complex64::new(b1[(k1 + k) as usize] * b2[(k2 + k) as usize], 0.0)
        });
        Ok(Self { spectrum, samples })
    }

    pub fn layout(&self) -> &SpectrumLayout {
        self.spectrum.layout()
    }

    pub fn samples(&self) -> [usize; 2] {
        self.samples
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }
}

/// Fourier coefficients of the continuous interpolation of `samples`.
///
/// Sample `(n1, n2)` sits at `Grid::node` on each axis, so the grid center is
/// the origin of the continuous domain.
pub fn interpolate(samples: &Grid, kernel: &InterpolationKernel, layout: &SpectrumLayout) -> Result<Spectrum> {
    layout.check_same(kernel.layout())?;
    let [n1, n2] = kernel.samples;
    if samples.width != n1 || samples.height != n2 {
        bail!(
            Dimension,
            "kernel built for {}x{} samples, grid is {}x{}",
            n1,
            n2,
            samples.width,
            samples.height
        );
    }
    let k = layout.k as isize;
    let s = layout.side();
    let twiddles = |n: usize| -> Vec<Complex64> {
        let c = (n as f64 - 1.0) / 2.0;
        let mut t = Vec::with_capacity(s * n);
        for kk in -k..=k {
            for m in 0..n {
                t.push(Complex64::from_polar(1.0, -2.0 * PI * kk as f64 * (m as f64 - c) / n as f64));
            }
        }
        t
    };
    let (tw1, tw2) = (twiddles(n1), twiddles(n2));
    // rows[b][n1] = sum_{n2} x[n2][n1] w2[b][n2]
    let mut rows = vec![ZERO; s * n1];
    for b in 0..s {
        for (y, row) in samples.data.chunks_exact(n1).enumerate() {
            let w = tw2[b * n2 + y];
            for (x, v) in row.iter().enumerate() {
                rows[b * n1 + x] += w * v;
            }
        }
    }
    let b_hat = kernel.spectrum.coeffs();
    let mut coeffs = vec![ZERO; layout.len()];
    for a in 0..s {
        let w1 = &tw1[a * n1..(a + 1) * n1];
        for b in 0..s {
            let acc: Complex64 = rows[b * n1..(b + 1) * n1].iter().zip(w1).map(|(r, w)| r * w).sum();
            coeffs[a * s + b] = acc * b_hat[a * s + b];
        }
    }
    let mut out = Spectrum { layout: *layout, coeffs };
    out.symmetrize();
    Ok(out)
}
