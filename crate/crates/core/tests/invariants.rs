use deform_dcf_core::deformation::{bb_descent, estimate_transform, BbParams, DeformationState, TransformMode, IDENTITY};
use deform_dcf_core::features::{colornames_uncentered, extract_patch, grayscale_cells, ColorNamesTable, Image};
use deform_dcf_core::spectral::{interpolate, Grid, InterpolationKernel, Point, Spectrum, SpectrumLayout};
use deform_dcf_core::training::{
    apply_normal_operator, conjugate_gradient, full_score, normal_rhs, CgParams, FilterCoefficients, FilterShape,
    SampleMemory, SpatialRegularizer, TrainingSample,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn real_spectrum(rng: &mut StdRng, layout: SpectrumLayout) -> Spectrum {
    let mut s = Spectrum::from_fn(layout, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    s.symmetrize();
    s
}

fn complex_vec(rng: &mut StdRng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn point(rng: &mut StdRng) -> Point {
    [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
}

struct Problem {
    shape: FilterShape,
    samples: Vec<TrainingSample>,
    reg: SpatialRegularizer,
    positions: Vec<Vec<Point>>,
}

fn problem(seed: u64, m: usize, d: usize, k: usize, count: usize) -> Problem {
    let mut rng = StdRng::seed_from_u64(seed);
    let period = [rng.gen_range(0.8..2.5), rng.gen_range(0.8..2.5)];
    let layout = SpectrumLayout::new(period, k).unwrap();
    let mut channel_k: Vec<usize> = (0..d).map(|_| rng.gen_range(0..=k)).collect();
    channel_k[0] = k;
    let shape = FilterShape::new(layout, channel_k, m).unwrap();
    let radii: Vec<[f64; 2]> = (0..m).map(|_| [rng.gen_range(0.1..0.5) * period[0], rng.gen_range(0.1..0.5) * period[1]]).collect();
    let reg = SpatialRegularizer::bowls(period, &radii, d, 0.05, 2.0).unwrap();
    let samples = (0..count)
        .map(|_| TrainingSample {
            channels: (0..d).map(|_| real_spectrum(&mut rng, layout)).collect(),
            label: real_spectrum(&mut rng, layout),
            weight: rng.gen_range(0.1..1.0),
            positions: vec![],
        })
        .collect();
    let positions = (0..count).map(|_| (0..m).map(|_| point(&mut rng)).collect()).collect();
    Problem { shape, samples, reg, positions }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shift_theorem(seed in any::<u64>(), k in 0..=8usize, p in (-2.0..2.0f64, -2.0..2.0f64), t in (-2.0..2.0f64, -2.0..2.0f64)) {
        let mut rng = StdRng::seed_from_u64(seed);
        let layout = SpectrumLayout::new([rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0)], k).unwrap();
        let s = real_spectrum(&mut rng, layout);
        let want = s.evaluate([t.0 - p.0, t.1 - p.1]).unwrap();
        let got = s.shift([p.0, p.1]).evaluate([t.0, t.1]).unwrap();
        prop_assert!((got - want).abs() < 1e-9 * (1.0 + want.abs()));
    }

    #[test]
    fn shift_group_law(seed in any::<u64>(), k in 0..=8usize, p in (-3.0..3.0f64, -3.0..3.0f64), q in (-3.0..3.0f64, -3.0..3.0f64)) {
        let mut rng = StdRng::seed_from_u64(seed);
        let layout = SpectrumLayout::new([rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0)], k).unwrap();
        let s = real_spectrum(&mut rng, layout);
        let a = s.shift([p.0, p.1]).shift([q.0, q.1]);
        let b = s.shift([p.0 + q.0, p.1 + q.1]);
        for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn parseval(seed in any::<u64>(), k in 0..=8usize) {
        let mut rng = StdRng::seed_from_u64(seed);
        let layout = SpectrumLayout::new([rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0)], k).unwrap();
        let s = real_spectrum(&mut rng, layout);
        let n = 64 * (2 * k + 1);
        let v = s.sample_grid([n, n]).unwrap();
        let quad = v.iter().map(|x| x * x).sum::<f64>() / (n * n) as f64;
        prop_assert!((quad - s.norm2()).abs() <= 1e-4 * s.norm2());
    }

    #[test]
    fn real_symmetry_is_preserved(seed in any::<u64>(), k in 0..=6usize, w in 1..12usize, h in 1..12usize) {
        let mut rng = StdRng::seed_from_u64(seed);
        let layout = SpectrumLayout::new([rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0)], k).unwrap();
        let grid = Grid::new(w, h, (0..w * h).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let kernel = InterpolationKernel::cubic(layout, [w, h]).unwrap();
        let (a, b) = (real_spectrum(&mut rng, layout), real_spectrum(&mut rng, layout));
        let mut combo = a.clone();
        combo.scale(rng.gen_range(-2.0..2.0));
        combo.axpy(Complex64::new(rng.gen_range(-2.0..2.0), 0.0), &b).unwrap();
        let outputs = [
            interpolate(&grid, &kernel, &layout).unwrap(),
            a.shift(point(&mut rng)),
            a.pointwise_mul(&b).unwrap(),
            combo,
        ];
        for s in &outputs {
            prop_assert!(s.is_real_symmetric(1e-12));
        }
    }

    #[test]
    fn grayscale_mean_is_patch_mean_minus_half(seed in any::<u64>(), cw in 1..6usize, ch in 1..6usize, cell in 1..5usize) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (w, h) = (cw * cell, ch * cell);
        let img = Image::new(w, h, 1, (0..w * h).map(|_| rng.gen_range(0.0..1.0f32)).collect()).unwrap();
        let cells = grayscale_cells(&img, cell).unwrap();
        let data = cells.channels[0].data();
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        let pix = img.data().iter().map(|v| *v as f64).sum::<f64>() / (w * h) as f64;
        prop_assert!((mean - (pix - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn colornames_cells_are_distributions(seed in any::<u64>(), cell in 1..4usize) {
        let mut rng = StdRng::seed_from_u64(seed);
        let table = ColorNamesTable::generated();
        let (w, h) = (3 * cell, 2 * cell);
        let img = Image::new(w, h, 3, (0..w * h * 3).map(|_| rng.gen_range(0.0..1.0f32)).collect()).unwrap();
        let map = colornames_uncentered(&img, cell, &table).unwrap();
        for i in 0..6 {
            let values: Vec<f64> = map.channels.iter().map(|g| g.data()[i]).collect();
            prop_assert!(values.iter().all(|v| *v >= 0.0));
            prop_assert!((values.iter().sum::<f64>() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn feature_extraction_is_deterministic(seed in any::<u64>(), cx in 0.0..40.0f64, cy in 0.0..30.0f64, scale in 0.5..2.0f64) {
        let mut rng = StdRng::seed_from_u64(seed);
        let img = Image::new(40, 30, 3, (0..40 * 30 * 3).map(|_| rng.gen_range(0.0..1.0f32)).collect()).unwrap();
        let run = || grayscale_cells(&extract_patch(&img, [cx, cy], [16.0, 12.0], scale, [16, 12]).unwrap(), 4).unwrap();
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn normal_operator_is_self_adjoint_and_positive(seed in any::<u64>(), m in 1..=3usize, d in 1..=2usize, k in 0..=4usize) {
        let pr = problem(seed, m, d, k, 2);
        let mut rng = StdRng::seed_from_u64(seed ^ 1);
        let n = pr.shape.unknowns();
        let (a, b) = (complex_vec(&mut rng, n), complex_vec(&mut rng, n));
        let op = |x: &[Complex64]| apply_normal_operator(x, &pr.shape, &pr.samples, &pr.reg, &pr.positions).unwrap();
        let (oa, ob) = (op(&a), op(&b));
        let lhs = dot(&oa, &b);
        prop_assert!((lhs - dot(&a, &ob)).norm() < 1e-10 * (1.0 + lhs.norm()));
        prop_assert!(dot(&oa, &a).re > 0.0);
    }

    #[test]
    fn cg_objective_never_increases(seed in any::<u64>(), m in 1..=2usize, d in 1..=2usize, k in 1..=4usize) {
        let pr = problem(seed, m, d, k, 3);
        let b = normal_rhs(&pr.shape, &pr.samples, &pr.positions).unwrap();
        let (_, report) = conjugate_gradient(
            |x| apply_normal_operator(x, &pr.shape, &pr.samples, &pr.reg, &pr.positions),
            &b,
            None,
            CgParams { max_iter: 50, tol: 1e-12 },
        ).unwrap();
        for w in report.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
    }

    #[test]
    fn full_score_is_linear(seed in any::<u64>(), m in 1..=3usize, d in 1..=3usize, k in 0..=5usize) {
        let pr = problem(seed, m, d, k, 1);
        let mut rng = StdRng::seed_from_u64(seed ^ 2);
        let layout = *pr.shape.layout();
        let mut filter = || {
            let spectra = (0..m * d).map(|_| real_spectrum(&mut rng, layout)).collect();
            FilterCoefficients::from_spectra(pr.shape.clone(), spectra).unwrap()
        };
        let (f, g) = (filter(), filter());
        let sum: Vec<Complex64> = f.to_vector().iter().zip(g.to_vector()).map(|(a, b)| a + b).collect();
        let fg = FilterCoefficients::from_vector(pr.shape.clone(), &sum).unwrap();
        let (s, p) = (&pr.samples[0], &pr.positions[0]);
        let want: Vec<Complex64> = full_score(&f, s, p).unwrap().coeffs().iter()
            .zip(full_score(&g, s, p).unwrap().coeffs()).map(|(a, b)| a + b).collect();
        for (x, y) in full_score(&fg, s, p).unwrap().coeffs().iter().zip(&want) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn memory_weights_stay_normalized(capacity in 1..8usize, inserts in 1..30usize, rate in 0.001..0.9f64) {
        let layout = SpectrumLayout::new([1.0, 1.0], 1).unwrap();
        let mut memory = SampleMemory::new(capacity, rate).unwrap();
        for _ in 0..inserts {
            let sample = TrainingSample { channels: vec![Spectrum::zeros(layout)], label: Spectrum::zeros(layout), weight: 0.0, positions: vec![] };
            memory.insert(sample).unwrap();
            let w = memory.weights();
            prop_assert!(memory.len() <= capacity);
            prop_assert!(w.iter().all(|v| *v >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn estimated_transform_is_a_least_squares_minimum(seed in any::<u64>(), n in 2..8usize) {
        let mut rng = StdRng::seed_from_u64(seed);
        let initial: Vec<Point> = (0..n).map(|_| point(&mut rng)).collect();
        let current: Vec<Point> = (0..n).map(|_| point(&mut rng)).collect();
        let r = estimate_transform(&initial, &current).unwrap();
        let residual = |r: &[[f64; 2]; 2]| -> f64 {
            initial.iter().zip(&current).map(|(p0, p)| {
                let q = [r[0][0] * p0[0] + r[0][1] * p0[1], r[1][0] * p0[0] + r[1][1] * p0[1]];
                (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
            }).sum()
        };
        let base = residual(&r);
        let mut dirs = StdRng::seed_from_u64(8);
        for _ in 0..8 {
            let mut e = [[0.0; 2]; 2];
            for v in e.iter_mut().flatten() {
                *v = dirs.gen_range(-1.0..1.0);
            }
            let len = e.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
            let perturbed = [[r[0][0] + 1e-3 * e[0][0] / len, r[0][1] + 1e-3 * e[0][1] / len],
                             [r[1][0] + 1e-3 * e[1][0] / len, r[1][1] + 1e-3 * e[1][1] / len]];
            prop_assert!(residual(&perturbed) >= base);
        }
    }

    #[test]
    fn identity_mode_keeps_the_identity(seed in any::<u64>(), m in 1..=4usize, calls in 1..4usize) {
        let pr = problem(seed, m, 1, 3, 1);
        let mut rng = StdRng::seed_from_u64(seed ^ 3);
        let layout = *pr.shape.layout();
        let spectra = (0..m).map(|_| real_spectrum(&mut rng, layout)).collect();
        let f = FilterCoefficients::from_spectra(pr.shape.clone(), spectra).unwrap();
        let initial: Vec<Point> = (0..m).map(|_| point(&mut rng)).collect();
        let mut state = DeformationState::new(initial, 0.1, TransformMode::Identity, layout.period()).unwrap();
        for _ in 0..calls {
            state = bb_descent(&f, &pr.samples[0], &state, &BbParams::default()).unwrap().0;
            prop_assert_eq!(state.transform, IDENTITY);
        }
    }
}
