use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

use super::*;
use crate::geometry::{make_circle, make_ellipse, Boundary, CellConfiguration, Curve, Mat2, Vec2};
use crate::special::gauss_legendre;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn cmax(v: &DVector<Complex64>) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn circle_disc(r0: f64, n: usize) -> Discretization {
    Discretization::new(&Boundary::single(make_circle(r0).unwrap()), n)
}

/// int_0^{2pi} f(tau) dtau for f with log singularities at tau = 0 and 2pi,
/// geometrically graded Gauss-Legendre panels toward both ends.
fn graded_quadrature<F: Fn(f64) -> f64>(f: F) -> f64 {
    let (x, w) = gauss_legendre(20);
    let mut edges = vec![0.0];
    let mut e = PI;
    while e > 1e-10 {
        edges.push(e);
        e *= 0.5;
    }
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut acc = 0.0;
    for k in 0..edges.len() - 1 {
        let (a, b) = (edges[k], edges[k + 1]);
        for (xi, wi) in x.iter().zip(&w) {
            let t = 0.5 * (a + b) + 0.5 * (b - a) * xi;
            let wt = 0.5 * (b - a) * wi;
            acc += wt * (f(t) + f(2.0 * PI - t));
        }
    }
    acc
}

/// S[phi](x(t)) by direct quadrature of the log kernel.
fn single_layer_oracle(curve: &Curve, phi: &dyn Fn(f64) -> f64, t: f64) -> f64 {
    let x = curve.point(t);
    graded_quadrature(|s| {
        let tau = t + s;
        let [y, d, _] = curve.eval(tau);
        (x - y).norm().ln() * phi(tau) * d.norm() / (2.0 * PI)
    })
}

#[test]
fn single_layer_circle_symbol() {
    let r0 = 0.3;
    let n = 128;
    let disc = circle_disc(r0, n);
    let s = single_layer_real(&disc, &Kernel::Free);
    let curve = make_circle(r0).unwrap();
    let t = &disc.curves()[0].t;
    for mode in 1..=n / 4 {
        let phi = DVector::from_iterator(n, t.iter().map(|&t| (mode as f64 * t).cos()));
        let out = &s * &phi;
        for i in (0..n).step_by(9) {
            let expected = -(r0 / (2.0 * mode as f64)) * (mode as f64 * t[i]).cos();
            assert!((out[i] - expected).abs() < 1e-10, "mode {mode}: {} vs {expected}", out[i]);
        }
    }
    // the closed form itself against direct quadrature of the kernel
    for mode in [1usize, 3, 7] {
        let phi = move |t: f64| (mode as f64 * t).cos();
        let q = single_layer_oracle(&curve, &phi, 0.4);
        let expected = -(r0 / (2.0 * mode as f64)) * (mode as f64 * 0.4).cos();
        assert!((q - expected).abs() < 1e-12, "oracle mode {mode}: {q} vs {expected}");
    }
    let ones = DVector::from_element(n, 1.0);
    let out = &s * &ones;
    let q = single_layer_oracle(&curve, &|_| 1.0, 1.0);
    for i in 0..n {
        assert!((out[i] - r0 * r0.ln()).abs() < 1e-10);
    }
    assert!((q - r0 * r0.ln()).abs() < 1e-12, "{q} vs {}", r0 * r0.ln());
}

#[test]
fn single_layer_ellipse_against_direct_quadrature() {
    let curve = make_ellipse(0.5, 0.2, Vec2::new(0.1, 0.0), 0.3).unwrap();
    let n = 128;
    let disc = Discretization::new(&Boundary::single(curve.clone()), n);
    let s = single_layer_real(&disc, &Kernel::Free);
    let f = |t: f64| (2.0 * t).sin() + 0.3 * t.cos().exp();
    let phi = DVector::from_iterator(n, disc.curves()[0].t.iter().map(|&t| f(t)));
    let out = &s * &phi;
    for i in [0usize, 17, 64, 101] {
        let q = single_layer_oracle(&curve, &f, disc.curves()[0].t[i]);
        assert!((out[i] - q).abs() < 1e-10, "node {i}: {} vs {q}", out[i]);
    }
}

#[test]
fn separated_blocks_are_plain_trapezoid() {
    let a = make_circle(0.2).unwrap();
    let b = make_circle(0.2).unwrap().transform(Vec2::new(5.0, 1.0), 0.0, 1.0).unwrap();
    let disc = Discretization::new(&Boundary::new(vec![a, b]).unwrap(), 32);
    let s = single_layer_real(&disc, &Kernel::Free);
    let (pa, cb) = (&disc.curves()[0].points, &disc.curves()[1]);
    for i in 0..32 {
        for j in 0..32 {
            let direct = (pa[i] - cb.points[j]).norm().ln() * cb.weights[j] / (2.0 * PI);
            assert!((s[(i, 32 + j)] - direct).abs() < 1e-12);
        }
    }
}

#[test]
fn double_layer_jump_relations_on_circle() {
    let r0 = 0.7;
    let n = 128;
    let disc = circle_disc(r0, n);
    let k = double_layer_real(&disc, &Kernel::Free);
    let ones = DVector::from_element(n, 1.0);
    let k1 = &k * &ones;
    for i in 0..n {
        assert!((k1[i] - 0.5).abs() < 1e-12);
    }
    let nodes = &disc.curves()[0];
    for mode in 1..=n / 4 {
        let phi = DVector::from_iterator(n, nodes.t.iter().map(|&t| (mode as f64 * t).cos()));
        assert!((&k * &phi).amax() < 1e-10, "mode {mode}");
    }
    // off-curve potentials: traces of D[cos] are +-cos/2 and the field is harmonic
    let dens: Vec<Complex64> = nodes.t.iter().map(|&t| c(t.cos())).collect();
    let ones_c: Vec<Complex64> = vec![c(1.0); n];
    for th in [0.0f64, 1.0, 2.5] {
        let inner = Vec2::new(th.cos(), th.sin()) * (0.5 * r0);
        let outer = Vec2::new(th.cos(), th.sin()) * (2.0 * r0);
        let di = double_layer_potential(nodes, &dens, inner).re;
        let de = double_layer_potential(nodes, &dens, outer).re;
        assert!((di - 0.25 * th.cos()).abs() < 1e-10);
        assert!((de + 0.25 * th.cos()).abs() < 1e-10);
        assert!((double_layer_potential(nodes, &ones_c, inner).re - 1.0).abs() < 1e-12);
        assert!(double_layer_potential(nodes, &ones_c, outer).re.abs() < 1e-12);
    }
}

#[test]
fn double_layer_of_constant_vanishes_far_away() {
    let e = make_ellipse(0.5, 0.2, Vec2::new(0.3, -0.1), 0.7).unwrap();
    let nodes = e.discretize(128);
    let ones: Vec<Complex64> = vec![c(1.0); 128];
    for p in [Vec2::new(3.0, 0.0), Vec2::new(-2.0, 5.0), Vec2::new(0.0, -40.0)] {
        assert!(double_layer_potential(&nodes, &ones, p).norm() < 1e-12);
    }
    let d = double_layer_real(&Discretization::new(&Boundary::single(e.clone()), 128), &Kernel::Free);
    let row_sums = &d * DVector::from_element(128, 1.0);
    assert!(row_sums.iter().all(|v| (v - 0.5).abs() < 1e-12));
    let inside = double_layer_potential(&nodes, &ones, Vec2::new(0.3, -0.1));
    assert!((inside.re - 1.0).abs() < 1e-12);
}

#[test]
fn adjoint_double_layer_is_the_weighted_transpose() {
    let e = make_ellipse(0.5, 0.3, Vec2::zeros(), 0.2).unwrap();
    let disc = Discretization::new(&Boundary::single(e), 64);
    let k = double_layer_real(&disc, &Kernel::Free);
    let ks = adjoint_double_layer_real(&disc, &Kernel::Free);
    let w = DMatrix::from_diagonal(&DVector::from_vec(disc.weights()));
    let lhs = &w * &ks;
    let rhs = (&w * &k).transpose();
    assert!((lhs - rhs).amax() < 1e-14);
}

fn hypersingular_of(curve: Curve, n: usize) -> (Discretization, DMatrix<f64>) {
    let disc = Discretization::new(&Boundary::single(curve), n);
    let l = hypersingular_real(&disc, &Kernel::Free);
    (disc, l)
}

#[test]
fn hypersingular_circle_symbol() {
    let r0 = 0.3;
    let n = 128;
    let disc = circle_disc(r0, n);
    let alpha = Complex64::new(0.37, -1.2);
    let sys = hypersingular_matrix(&disc, &Kernel::Free, alpha).unwrap();
    let t = disc.curves()[0].t.clone();
    for mode in 0..=32usize {
        let phi = DensityGrid::from_fn(&disc, |_, _, j| c((mode as f64 * t[j]).cos()));
        let out = sys.apply(&phi);
        let mult = Complex64::new(1.0, 0.0) + alpha * (mode as f64 / (2.0 * r0));
        for j in 0..n {
            assert!((out.values[j] - mult * phi.values[j]).norm() < 1e-10, "mode {mode}");
        }
    }
    let ones = DensityGrid::from_fn(&disc, |_, _, _| c(1.0));
    assert!(cmax(&(sys.apply(&ones).values - &ones.values)) < 1e-12);
    let id = hypersingular_matrix(&disc, &Kernel::Free, c(0.0)).unwrap();
    assert_eq!(id.matrix, DMatrix::identity(n, n));
    assert!(hypersingular_matrix(&disc, &Kernel::Free, Complex64::new(-1.0, 1.0)).is_err());
    assert!(hypersingular_matrix(&disc, &Kernel::Free, Complex64::new(0.0, 1.0)).is_err());
}

fn bessel_i(n: usize, x: f64) -> f64 {
    let mut term = (0.5 * x).powi(n as i32) / (1..=n).map(|k| k as f64).product::<f64>();
    let mut sum = 0.0;
    for k in 0..60 {
        sum += term;
        term *= 0.25 * x * x / ((k + 1) as f64 * (k + 1 + n) as f64);
    }
    sum
}

#[test]
fn hypersingular_spectral_convergence() {
    // density exp(cos t) = I0(1) + 2 sum I_n(1) cos(nt), so L maps it to sum n I_n(1) cos(nt) / r0
    let r0 = 0.5;
    let exact = |t: f64| (1..40).map(|k| k as f64 * bessel_i(k, 1.0) * (k as f64 * t).cos() / r0).sum::<f64>();
    let mut errors = Vec::new();
    for n in [8usize, 16, 32, 64] {
        let (disc, l) = hypersingular_of(make_circle(r0).unwrap(), n);
        let t = &disc.curves()[0].t;
        let phi = DVector::from_iterator(n, t.iter().map(|&t| t.cos().exp()));
        let out = &l * phi;
        let err = (0..n).map(|j| (out[j] - exact(t[j])).abs()).fold(0.0, f64::max);
        errors.push(err);
    }
    for k in 0..errors.len() - 1 {
        let floor = 1e-12f64;
        assert!(errors[k + 1] <= floor.max(errors[k] * 1e-4), "{errors:?}");
    }
    assert!(errors[3] < 1e-12);
}

#[test]
fn hypersingular_cross_block_matches_direct_kernel() {
    let a = make_circle(0.2).unwrap();
    let b = make_ellipse(0.25, 0.15, Vec2::new(0.9, 0.3), 0.4).unwrap();
    let disc = Discretization::new(&Boundary::new(vec![a, b]).unwrap(), 64);
    let l = hypersingular_real(&disc, &Kernel::Free);
    let (ca, cb) = (&disc.curves()[0], &disc.curves()[1]);
    // smooth density on b applied through the block vs direct -n_x^T Hess G n_y quadrature
    let phi: Vec<f64> = cb.t.iter().map(|&t| t.sin() + 0.5 * (3.0 * t).cos()).collect();
    for i in [0usize, 13, 40] {
        let mut direct = 0.0;
        for j in 0..cb.len() {
            let d = ca.points[i] - cb.points[j];
            let r2 = d.norm_squared();
            let hess = (Mat2::identity() * r2 - d * d.transpose() * 2.0) / (2.0 * PI * r2 * r2);
            direct -= ca.normal[i].dot(&(hess * cb.normal[j])) * cb.weights[j] * phi[j];
        }
        let via_maue: f64 = (0..cb.len()).map(|j| l[(i, 64 + j)] * phi[j]).sum();
        assert!((via_maue - direct).abs() < 1e-10 * direct.abs().max(1.0), "{via_maue} vs {direct}");
    }
}

#[test]
fn weighted_hypersingular_is_symmetric_and_positive() {
    let e = make_ellipse(0.5, 0.2, Vec2::new(0.1, 0.2), 0.3).unwrap();
    let f = make_circle(0.15).unwrap().transform(Vec2::new(1.0, 0.1), 0.0, 1.0).unwrap();
    for boundary in [Boundary::single(e.clone()), Boundary::new(vec![e, f]).unwrap()] {
        let disc = Discretization::new(&boundary, 128);
        let l = hypersingular_real(&disc, &Kernel::Free);
        let w = DMatrix::from_diagonal(&DVector::from_vec(disc.weights()));
        let wl = &w * &l;
        let asym = (&wl - wl.transpose()).norm() / wl.norm();
        assert!(asym < 1e-10, "asymmetry {asym}");
        let sym = (&wl + wl.transpose()) * 0.5;
        let eig = sym.symmetric_eigenvalues();
        assert!(eig.min() > -1e-10 * eig.max(), "min eigenvalue {}", eig.min());
    }
}

#[test]
fn solve_contracts() {
    let disc = circle_disc(0.3, 64);
    let id = hypersingular_matrix(&disc, &Kernel::Free, c(0.0)).unwrap();
    let rhs = DensityGrid::from_fn(&disc, |_, nodes, j| Complex64::new(nodes.t[j].sin(), 2.0));
    let (x, res) = solve(&id, &rhs).unwrap();
    assert!(cmax(&(x.values - &rhs.values)) < 1e-15);
    assert!(res < 1e-15);

    let alpha = Complex64::new(2e-3, -0.8);
    let sys = hypersingular_matrix(&disc, &Kernel::Free, alpha).unwrap();
    let n1 = DensityGrid::real(&disc, &disc.normal_component(0));
    let (psi, res) = solve(&sys, &n1).unwrap();
    let mult = Complex64::new(1.0, 0.0) + alpha / (2.0 * 0.3);
    assert!(cmax(&(psi.values - n1.values.map(|v| v / mult))) < 1e-10);
    assert!(res < 1e-10);

    let singular = OperatorMatrix {
        kind: OperatorKind::SingleLayer,
        periodic: false,
        sizes: vec![2],
        matrix: DMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(2.0), c(4.0)]),
    };
    let rhs = DensityGrid::new(vec![2], DVector::from_vec(vec![c(1.0), c(1.0)])).unwrap();
    assert!(matches!(solve(&singular, &rhs), Err(Error::SingularMatrix { .. })));
}

#[test]
fn periodic_green_symmetries() {
    let pg = PeriodicGreen::new().unwrap();
    let (real_tail, spectral_tail) = pg.tail_estimate();
    assert!(real_tail < 1e-12 && spectral_tail < 1e-12);
    for p in [Vec2::new(0.3, 0.1), Vec2::new(-0.45, 0.2), Vec2::new(0.05, -0.33), Vec2::new(0.49, 0.49)] {
        let g = pg.value(p).unwrap();
        assert!((g - pg.value(p + Vec2::new(1.0, 0.0)).unwrap()).abs() < 1e-12);
        assert!((g - pg.value(p + Vec2::new(0.0, -1.0)).unwrap()).abs() < 1e-12);
        assert!((g - pg.value(-p).unwrap()).abs() < 1e-12);
        // the splitting parameter must not matter
        let other = PeriodicGreen::with_eta(1.3, 1e-13).unwrap();
        assert!((g - other.value(p).unwrap()).abs() < 1e-12);
        let (_, grad, hess) = pg.eval(p).unwrap();
        let (_, grad2, hess2) = other.eval(p).unwrap();
        assert!((grad - grad2).norm() < 1e-11);
        assert!((hess - hess2).norm() < 1e-10);
        // Delta G = -1 away from the lattice
        assert!((hess.trace() + 1.0).abs() < 1e-10);
    }
    assert!(pg.value(Vec2::new(1.0, 0.0)).is_err());
}

#[test]
fn periodic_green_against_fourier_series() {
    // lattice sum of a smoothed field: sum_n e^{-|n|^2/64} e^{2 pi i n.x}/(4 pi^2 |n|^2) converges fast;
    // compare through a finite difference in the smoothing, i.e. only the mean-zero structure
    let pg = PeriodicGreen::new().unwrap();
    let x = Vec2::new(0.31, 0.17);
    let y = Vec2::new(-0.22, 0.41);
    let fourier = |p: Vec2| {
        let mut acc = 0.0;
        for nx in -400i32..=400 {
            for ny in -400i32..=400 {
                if nx == 0 && ny == 0 {
                    continue;
                }
                let n2 = (nx * nx + ny * ny) as f64;
                acc -= (2.0 * PI * (nx as f64 * p.x + ny as f64 * p.y)).cos() / (4.0 * PI * PI * n2);
            }
        }
        acc
    };
    let diff_ewald = pg.value(x).unwrap() - pg.value(y).unwrap();
    let diff_fourier = fourier(x) - fourier(y);
    assert!((diff_ewald - diff_fourier).abs() < 5e-4, "{diff_ewald} vs {diff_fourier}");
    assert!((pg.value(x).unwrap() - fourier(x)).abs() < 5e-4);
}

#[test]
fn r2_local_expansion() {
    let pg = PeriodicGreen::new().unwrap();
    let r0 = pg.r2_zero();
    for dir in [0.0, 0.4, 1.1] {
        let u = Vec2::new(f64::cos(dir), f64::sin(dir));
        // least squares for R2(x) - R2(0) = c2 r^2 + c4 r^4 over r in [1e-3, 1e-2]
        let mut ata = nalgebra::Matrix2::<f64>::zeros();
        let mut atb = nalgebra::Vector2::<f64>::zeros();
        for k in 0..40 {
            let r = 1e-3 * 10f64.powf(k as f64 / 39.0);
            let v = pg.r2(u * r) - r0;
            let row = nalgebra::Vector2::new(r * r, r.powi(4));
            ata += row * row.transpose();
            atb += row * v;
        }
        let coef = ata.lu().solve(&atb).unwrap();
        assert!((coef[0] + 0.25).abs() < 1e-6, "c2 = {}", coef[0]);
    }
    // R2 is smooth: its Hessian at 0 is -I/2
    assert!((pg.r2_hessian(Vec2::zeros()) + Mat2::identity() * 0.5).norm() < 1e-11);
    assert!(pg.r2_gradient(Vec2::zeros()).norm() < 1e-15);
}

#[test]
fn periodic_double_layer_of_constant() {
    // int_Gamma dG#(x-y)/dn_y ds_y = 1/2 - |Y-| on Gamma
    let e = make_ellipse(0.2, 0.1, Vec2::new(0.5, 0.5), 0.3).unwrap();
    let cfg = CellConfiguration::new(vec![e]).unwrap();
    let disc = Discretization::of_configuration(&cfg, 128).unwrap();
    let kernel = Kernel::periodic().unwrap();
    let d = double_layer_real(&disc, &kernel);
    let row = &d * DVector::from_element(disc.len(), 1.0);
    let target = 0.5 - cfg.volume_fraction();
    assert!(row.iter().all(|v| (v - target).abs() < 1e-11), "{} vs {target}", row[0]);
    let l = hypersingular_real(&disc, &kernel);
    assert!((&l * DVector::from_element(disc.len(), 1.0)).amax() < 1e-10);
    let w = DMatrix::from_diagonal(&DVector::from_vec(disc.weights()));
    let wl = &w * &l;
    assert!((&wl - wl.transpose()).norm() / wl.norm() < 1e-10);
    let s = single_layer_real(&disc, &kernel);
    let ws = &w * &s;
    assert!((&ws - ws.transpose()).norm() / ws.norm() < 1e-12);
}

#[test]
fn periodic_correction_shrinks_with_cell_size() {
    let kernel = Kernel::periodic().unwrap();
    let mut rel = Vec::new();
    let sizes = [0.05, 0.1, 0.2];
    for &a in &sizes {
        let e = make_ellipse(a, 0.6 * a, Vec2::new(0.5, 0.5), 0.2).unwrap();
        let disc = Discretization::new(&Boundary::single(e), 64);
        let lf = hypersingular_real(&disc, &Kernel::Free);
        let lp = hypersingular_real(&disc, &kernel);
        let n1 = disc.normal_component(0);
        rel.push(((&lp - &lf) * &n1).norm() / (&lf * &n1).norm());
    }
    let slope = (rel[2] / rel[0]).ln() / (sizes[2] / sizes[0]).ln();
    assert!((slope - 2.0).abs() < 0.1, "slope {slope}, {rel:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hypersingular_positive_on_random_densities(seed in prop::collection::vec(-1.0f64..1.0, 12)) {
        let e = make_ellipse(0.5, 0.25, Vec2::zeros(), 0.6).unwrap();
        let (disc, l) = hypersingular_of(e, 64);
        let t = &disc.curves()[0].t;
        let phi = DVector::from_iterator(64, t.iter().map(|&t| {
            (0..6).map(|k| seed[2 * k] * ((k + 1) as f64 * t).cos() + seed[2 * k + 1] * ((k + 1) as f64 * t).sin()).sum::<f64>() + 3.0
        }));
        let w = DVector::from_vec(disc.weights());
        let lphi = &l * &phi;
        let quad: f64 = (0..64).map(|j| lphi[j] * phi[j] * w[j]).sum();
        prop_assert!(quad >= -1e-10);
    }

    #[test]
    fn periodic_green_is_even_and_periodic(x in -0.49f64..0.49, y in -0.49f64..0.49) {
        prop_assume!(x.abs() + y.abs() > 1e-3);
        let pg = PeriodicGreen::new().unwrap();
        let p = Vec2::new(x, y);
        let g = pg.value(p).unwrap();
        prop_assert!((g - pg.value(-p).unwrap()).abs() < 1e-12);
        prop_assert!((g - pg.value(p + Vec2::new(1.0, 1.0)).unwrap()).abs() < 1e-12);
    }
}
