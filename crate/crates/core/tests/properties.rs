use nonlocal_core::asymptotics::{conjugate, fit_rate, ErrorCurve, Rescaling};
use nonlocal_core::grid::{convolve, lq_norm, sup_norm};
use nonlocal_core::semigroup::propagate_linear;
use nonlocal_core::solver::{absorption_step, solve, ProblemSpec, SolverConfig};
use nonlocal_core::{Field, Grid, InitialDatum, Kernel, KernelShape, ParabolaWindow};
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = KernelShape> {
    prop_oneof![
        Just(KernelShape::Bump),
        Just(KernelShape::Uniform),
        Just(KernelShape::Quadratic)
    ]
}

fn field_1d(values: Vec<f64>) -> Field {
    let grid = Grid::new(1, 16.0, values.len()).unwrap();
    Field::new(&grid, values, 0.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convolution_conserves_integral_and_sign(
        values in prop::collection::vec(0.0f64..10.0, 128),
        shape in shape(),
        radius in 1.0f64..4.0,
    ) {
        let f = field_1d(values);
        let k = Kernel::new(shape, radius, 1).unwrap().discretize(f.grid()).unwrap();
        let g = convolve(&k, &f).unwrap();
        let l1 = lq_norm(&f, 1.0).unwrap();
        prop_assert!((g.integral() - f.integral()).abs() <= 1e-10 * l1.max(1e-300));
        prop_assert!(g.min() >= -1e-12 * f.max().max(1.0));
    }

    #[test]
    fn lq_triangle_inequality(
        a in prop::collection::vec(-5.0f64..5.0, 64),
        b in prop::collection::vec(-5.0f64..5.0, 64),
        q in prop_oneof![1.0f64..8.0, Just(f64::INFINITY)],
    ) {
        let (fa, fb) = (field_1d(a), field_1d(b));
        let sum = Field::new(fa.grid(), fa.values().iter().zip(fb.values()).map(|(x, y)| x + y).collect(), 0.0).unwrap();
        let lhs = lq_norm(&sum, q).unwrap();
        let rhs = lq_norm(&fa, q).unwrap() + lq_norm(&fb, q).unwrap();
        prop_assert!(lhs <= rhs + 1e-12 * rhs.max(1.0));
    }

    #[test]
    fn lq_monotone_under_truncation(values in prop::collection::vec(-5.0f64..5.0, 64), r in 0.0f64..16.0, q in 1.0f64..6.0) {
        let f = field_1d(values);
        let grid = f.grid().clone();
        let cut = Field::new(&grid, (0..grid.len()).map(|i| if grid.radius(i) < r { f.values()[i] } else { 0.0 }).collect(), 0.0).unwrap();
        prop_assert!(lq_norm(&cut, q).unwrap() <= lq_norm(&f, q).unwrap() + 1e-12);
    }

    #[test]
    fn window_monotonicity(values in prop::collection::vec(-5.0f64..5.0, 64), k1 in 0.1f64..3.0, extra in 0.0f64..3.0, t in 0.1f64..1.5) {
        let f = field_1d(values);
        let small = sup_norm(&f, Some(ParabolaWindow::new(k1).unwrap()), t).unwrap();
        let large = sup_norm(&f, Some(ParabolaWindow::new(k1 + extra).unwrap()), t).unwrap();
        prop_assert!(small <= large);
        prop_assert!(large <= sup_norm(&f, None, t).unwrap());
    }

    #[test]
    fn fit_recovers_synthetic_powers(mu in -3.0f64..1.0, c in 0.01f64..100.0, start in 0.5f64..50.0) {
        let points = (0..8).map(|k| {
            let t = start * 10f64.powf(k as f64 / 4.0);
            (t, c * t.powf(mu))
        }).collect();
        let fit = fit_rate(&ErrorCurve::new("power", points, Rescaling::plain()).unwrap()).unwrap();
        prop_assert!((fit.exponent - mu).abs() < 1e-10);
        prop_assert!((fit.log_constant - c.ln()).abs() < 1e-9);
    }

    #[test]
    fn conjugate_pairs(q in 1.0f64..100.0) {
        let qp = conjugate(q).unwrap();
        let inv = if qp.is_infinite() { 0.0 } else { 1.0 / qp };
        prop_assert!((1.0 / q + inv - 1.0).abs() < 1e-12);
    }

    #[test]
    fn absorption_is_odd_and_contracting(values in prop::collection::vec(-3.0f64..3.0, 32), p in 1.1f64..9.0, dt in 0.0f64..5.0) {
        let f = field_1d(values);
        let plus = absorption_step(&f, p, dt).unwrap();
        let minus = absorption_step(&f.map(|v| -v), p, dt).unwrap();
        for ((a, b), w) in plus.values().iter().zip(minus.values()).zip(f.values()) {
            prop_assert_eq!(*a, -*b);
            prop_assert!(a.abs() <= w.abs());
            prop_assert!(a * w >= 0.0);
        }
    }

    #[test]
    fn semigroup_law(s in 0.0f64..5.0, t in 0.0f64..5.0, values in prop::collection::vec(-1.0f64..1.0, 128)) {
        let f = field_1d(values);
        let k = Kernel::new(KernelShape::Bump, 1.0, 1).unwrap().discretize(f.grid()).unwrap();
        let two = propagate_linear(&k, &propagate_linear(&k, &f, s).unwrap(), t).unwrap();
        let one = propagate_linear(&k, &f, s + t).unwrap();
        let gap = sup_norm(&two.difference(&one).unwrap(), None, 0.0).unwrap();
        prop_assert!(gap < 1e-12);
    }

    #[test]
    fn kernel_radial_symmetry(shape in shape(), radius in 0.5f64..3.0, x in -3.0f64..3.0, y in -3.0f64..3.0, theta in 0.0f64..6.3) {
        let k = Kernel::new(shape, radius, 2).unwrap();
        let v = k.value(&[x, y]);
        let rotated = [x * theta.cos() - y * theta.sin(), x * theta.sin() + y * theta.cos()];
        prop_assert!(v >= 0.0);
        prop_assert!((k.value(&[-x, -y]) - v).abs() <= 1e-12 * v.max(1.0));
        prop_assert!((k.value(&rotated) - v).abs() <= 1e-9 * v.max(1.0) || (x.hypot(y) - radius).abs() < 1e-9);
        if x.hypot(y) > radius {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn diffusivity_scales_quadratically(shape in shape(), dimension in 1usize..=2, scale in 0.2f64..5.0) {
        let a = Kernel::new(shape, 1.0, dimension).unwrap().diffusivity();
        let b = Kernel::new(shape, scale, dimension).unwrap().diffusivity();
        prop_assert!(a > 0.0);
        prop_assert!((b - scale * scale * a).abs() <= 1e-12 * b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn symbol_is_even_bounded_and_decaying(shape in shape(), radius in 1.0f64..4.0, dimension in 1usize..=2) {
        let grid = Grid::new(dimension, 16.0, if dimension == 1 { 512 } else { 128 }).unwrap();
        let k = Kernel::new(shape, radius, dimension).unwrap().discretize(&grid).unwrap();
        let s = k.symbol();
        prop_assert!((s[0] - 1.0).abs() < 1e-12);
        prop_assert!(s.iter().all(|&v| v <= 1.0 + 1e-12));
        let n = grid.points_per_axis();
        if dimension == 1 {
            for j in 1..n {
                prop_assert!((s[j] - s[n - j]).abs() < 1e-12);
            }
        }
        let upper = grid.frequency_sq().iter().zip(s).filter(|(k2, _)| k2.sqrt() >= std::f64::consts::PI / grid.spacing() / 2.0).map(|(_, v)| v.abs()).fold(0.0, f64::max);
        prop_assert!(upper <= 0.5);
    }

    #[test]
    fn solutions_stay_between_zero_and_datum_bound(amplitude in 0.1f64..2.0, alpha in 0.2f64..1.0, p in 1.5f64..8.0) {
        let grid = Grid::new(1, 32.0, 512).unwrap();
        let kernel = Kernel::new(KernelShape::Bump, 1.0, 1).unwrap().discretize(&grid).unwrap();
        let spec = ProblemSpec::new(kernel, InitialDatum::regularized_power(amplitude, alpha).unwrap(), p).unwrap();
        let bound = spec.initial_field().unwrap().max();
        let traj = solve(&spec, &[0.5, 2.0, 6.0], &SolverConfig::default()).unwrap();
        for snap in traj.snapshots() {
            prop_assert!(snap.field.min() >= -1e-10);
            prop_assert!(snap.field.max() <= bound + 1e-10);
        }
    }
}
