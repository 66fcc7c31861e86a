use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

/// Rotation matrix for angle `theta`.
pub fn rotation(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    Mat2::new(c, -s, s, c)
}

/// Truncated Fourier series of a closed curve: x(t) = sum_k cos_k cos(kt) + sin_k sin(kt).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierShape {
    pub cos: Vec<[f64; 2]>,
    pub sin: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Ellipse { a: f64, b: f64 },
    Fourier(FourierShape),
}

impl Shape {
    fn eval(&self, t: f64) -> [Vec2; 3] {
        match self {
            Shape::Ellipse { a, b } => {
                let (s, c) = t.sin_cos();
                [
                    Vec2::new(a * c, b * s),
                    Vec2::new(-a * s, b * c),
                    Vec2::new(-a * c, -b * s),
                ]
            }
            Shape::Fourier(fs) => {
                let mut x = Vec2::zeros();
                let mut d1 = Vec2::zeros();
                let mut d2 = Vec2::zeros();
                for (k, (c, s)) in fs.cos.iter().zip(&fs.sin).enumerate() {
                    let kf = k as f64;
                    let (sk, ck) = (kf * t).sin_cos();
                    let c = Vec2::new(c[0], c[1]);
                    let s = Vec2::new(s[0], s[1]);
                    x += c * ck + s * sk;
                    d1 += (s * ck - c * sk) * kf;
                    d2 -= (c * ck + s * sk) * (kf * kf);
                }
                [x, d1, d2]
            }
        }
    }
}

/// Node data of a curve sampled at N equispaced parameter values.
#[derive(Debug, Clone)]
pub struct CurveNodes {
    pub t: Vec<f64>,
    pub points: Vec<Vec2>,
    pub tangent: Vec<Vec2>,
    pub second: Vec<Vec2>,
    pub speed: Vec<f64>,
    pub normal: Vec<Vec2>,
    pub curvature: Vec<f64>,
    /// Trapezoid arclength weights h |x'(t_j)|.
    pub weights: Vec<f64>,
}

impl CurveNodes {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn step(&self) -> f64 {
        2.0 * PI / self.t.len() as f64
    }

    pub fn arclength(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// A smooth closed counterclockwise curve: x(t) = A * base(t) + c.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    shape: Shape,
    matrix: [[f64; 2]; 2],
    offset: [f64; 2],
}

const CHECK_SAMPLES: usize = 256;

impl Curve {
    fn build(shape: Shape, matrix: Mat2, offset: Vec2) -> Result<Self> {
        let det = matrix.determinant();
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "affine part must preserve orientation (det = {det})"
            )));
        }
        let curve = Curve {
            shape,
            matrix: [[matrix[(0, 0)], matrix[(0, 1)]], [matrix[(1, 0)], matrix[(1, 1)]]],
            offset: [offset.x, offset.y],
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn circle(r0: f64) -> Result<Self> {
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::InvalidGeometry(format!("radius must be positive, got {r0}")));
        }
        Self::build(Shape::Ellipse { a: r0, b: r0 }, Mat2::identity(), Vec2::zeros())
    }

    pub fn ellipse(a: f64, b: f64, center: Vec2, angle: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "semi-axes must be positive, got ({a}, {b})"
            )));
        }
        Self::build(Shape::Ellipse { a, b }, rotation(angle), center)
    }

    /// Curve given by Fourier coefficient vectors (index = mode number).
    pub fn fourier(cos: Vec<[f64; 2]>, sin: Vec<[f64; 2]>) -> Result<Self> {
        if cos.len() != sin.len() || cos.len() < 2 {
            return Err(Error::InvalidGeometry(
                "fourier curve needs matching cos/sin lists with at least one mode".into(),
            ));
        }
        if cos.iter().chain(&sin).flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite fourier coefficient".into()));
        }
        Self::build(Shape::Fourier(FourierShape { cos, sin }), Mat2::identity(), Vec2::zeros())
    }

    /// Trigonometric interpolant of equispaced samples x(2 pi j / N).
    pub fn from_samples(points: &[Vec2]) -> Result<Self> {
        let n = points.len();
        if n < 8 {
            return Err(Error::InvalidGeometry("need at least 8 samples".into()));
        }
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(n);
        let mut coords = [vec![Complex::new(0.0, 0.0); n], vec![Complex::new(0.0, 0.0); n]];
        for (j, p) in points.iter().enumerate() {
            coords[0][j] = Complex::new(p.x, 0.0);
            coords[1][j] = Complex::new(p.y, 0.0);
        }
        for c in coords.iter_mut() {
            fft.process(c);
        }
        // keep modes strictly below Nyquist
        let kmax = (n - 1) / 2;
        let mut cos = vec![[0.0; 2]; kmax + 1];
        let mut sin = vec![[0.0; 2]; kmax + 1];
        let nf = n as f64;
        for d in 0..2 {
            cos[0][d] = coords[d][0].re / nf;
            for k in 1..=kmax {
                cos[k][d] = 2.0 * coords[d][k].re / nf;
                sin[k][d] = -2.0 * coords[d][k].im / nf;
            }
        }
        Self::fourier(cos, sin)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn matrix(&self) -> Mat2 {
        let m = &self.matrix;
        Mat2::new(m[0][0], m[0][1], m[1][0], m[1][1])
    }

    pub fn offset(&self) -> Vec2 {
        Vec2::new(self.offset[0], self.offset[1])
    }

    /// x(t), x'(t), x''(t).
    pub fn eval(&self, t: f64) -> [Vec2; 3] {
        let [x, d1, d2] = self.shape.eval(t);
        let a = self.matrix();
        [a * x + self.offset(), a * d1, a * d2]
    }

    pub fn point(&self, t: f64) -> Vec2 {
        self.eval(t)[0]
    }

    /// Outward unit normal (x2', -x1')/|x'|.
    pub fn normal(&self, t: f64) -> Vec2 {
        let d = self.eval(t)[1];
        Vec2::new(d.y, -d.x) / d.norm()
    }

    pub fn curvature(&self, t: f64) -> f64 {
        let [_, d1, d2] = self.eval(t);
        (d1.x * d2.y - d1.y * d2.x) / d1.norm().powi(3)
    }

    pub fn discretize(&self, n: usize) -> CurveNodes {
        assert!(n >= 8 && n % 2 == 0, "node count must be even and at least 8, got {n}");
        let h = 2.0 * PI / n as f64;
        let mut nodes = CurveNodes {
            t: Vec::with_capacity(n),
            points: Vec::with_capacity(n),
            tangent: Vec::with_capacity(n),
            second: Vec::with_capacity(n),
            speed: Vec::with_capacity(n),
            normal: Vec::with_capacity(n),
            curvature: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
        };
        for j in 0..n {
            let t = h * j as f64;
            let [x, d1, d2] = self.eval(t);
            let sp = d1.norm();
            nodes.t.push(t);
            nodes.points.push(x);
            nodes.tangent.push(d1);
            nodes.second.push(d2);
            nodes.speed.push(sp);
            nodes.normal.push(Vec2::new(d1.y, -d1.x) / sp);
            nodes.curvature.push((d1.x * d2.y - d1.y * d2.x) / (sp * sp * sp));
            nodes.weights.push(h * sp);
        }
        nodes
    }

    /// Spectrally converged trapezoid value of a periodic integrand.
    fn converged<F: Fn(&[Vec2; 3]) -> f64>(&self, f: F) -> f64 {
        let mut n = 128;
        let mut prev = f64::NAN;
        loop {
            let h = 2.0 * PI / n as f64;
            let v: f64 = (0..n).map(|j| f(&self.eval(h * j as f64))).sum::<f64>() * h;
            if (v - prev).abs() <= 1e-14 * v.abs() || n >= 1 << 16 {
                return v;
            }
            prev = v;
            n *= 2;
        }
    }

    pub fn enclosed_area(&self) -> f64 {
        self.converged(|[x, d, _]| 0.5 * (x.x * d.y - x.y * d.x))
    }

    pub fn arclength(&self) -> f64 {
        self.converged(|[_, d, _]| d.norm())
    }

    pub fn centroid(&self) -> Vec2 {
        let area = self.enclosed_area();
        let cx = self.converged(|[x, d, _]| 0.5 * x.x * x.x * d.y);
        let cy = self.converged(|[x, d, _]| -0.5 * x.y * x.y * d.x);
        Vec2::new(cx, cy) / area
    }

    /// x -> scale R(rotation) x + translation.
    pub fn transform(&self, translation: Vec2, rotation_angle: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidGeometry(format!("scale must be positive, got {scale}")));
        }
        self.affine(rotation(rotation_angle) * scale, translation)
    }

    /// x -> A x + b with det A > 0.
    pub fn affine(&self, a: Mat2, b: Vec2) -> Result<Self> {
        Self::build(self.shape.clone(), a * self.matrix(), a * self.offset() + b)
    }

    /// Winding-number test at sample resolution.
    pub fn contains(&self, p: Vec2) -> bool {
        let n = 512;
        let h = 2.0 * PI / n as f64;
        let mut wind = 0.0;
        let mut prev = self.point(0.0) - p;
        for j in 1..=n {
            let cur = self.point(h * j as f64) - p;
            wind += (prev.x * cur.y - prev.y * cur.x).atan2(prev.dot(&cur));
            prev = cur;
        }
        wind > PI
    }

    fn validate(&self) -> Result<()> {
        let nodes = self.discretize(CHECK_SAMPLES);
        let smax = nodes.speed.iter().cloned().fold(0.0, f64::max);
        let smin = nodes.speed.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(smax.is_finite() && smin > 1e-10 * smax) {
            return Err(Error::InvalidGeometry("parameterisation is not regular".into()));
        }
        let area: f64 = (0..CHECK_SAMPLES)
            .map(|j| {
                let (x, d) = (nodes.points[j], nodes.tangent[j]);
                0.5 * (x.x * d.y - x.y * d.x)
            })
            .sum::<f64>()
            * nodes.step();
        if !(area > 0.0) {
            return Err(Error::InvalidGeometry(
                "curve must be counterclockwise with positive enclosed area".into(),
            ));
        }
        if self_intersects(&nodes.points) {
            return Err(Error::InvalidGeometry("curve intersects itself".into()));
        }
        Ok(())
    }
}

fn segments_cross(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let orient = |a: Vec2, b: Vec2, c: Vec2| (b - a).perp(&(c - a));
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn self_intersects(pts: &[Vec2]) -> bool {
    let n = pts.len();
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(a, b, pts[j], pts[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}

pub fn make_circle(r0: f64) -> Result<Curve> {
    Curve::circle(r0)
}

pub fn make_ellipse(a: f64, b: f64, center: Vec2, angle: f64) -> Result<Curve> {
    Curve::ellipse(a, b, center, angle)
}

pub fn transform(curve: &Curve, translation: Vec2, rotation_angle: f64, scale: f64) -> Result<Curve> {
    curve.transform(translation, rotation_angle, scale)
}

pub fn enclosed_area(curve: &Curve) -> f64 {
    curve.enclosed_area()
}
