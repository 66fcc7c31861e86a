//! Green function of the Laplacian on the unit torus by Ewald splitting.
//!
//! G(x) = -sum_{n != 0} e^{2 pi i n.x} / (4 pi^2 |n|^2), so that Delta G = delta - 1.
//! With the heat-kernel split at s0 = 1/(4 eta^2):
//!
//! G(x) = -1/(4 pi) sum_m E1(|x-m|^2/(4 s0)) + s0 - sum_{n != 0} e^{-4 pi^2 |n|^2 s0} cos(2 pi n.x)/(4 pi^2 |n|^2)
//!
//! and R2 = G - ln|x|/(2 pi) is smooth near the origin.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{Mat2, Vec2};
use crate::special::{e1, ein, ein_prime, ein_second, EULER_GAMMA};

/// Tolerance on the truncation tails of both lattice sums.
pub const EWALD_TOLERANCE: f64 = 1e-12;

/// Images with exponent beyond this contribute below 1e-21.
const MAX_EXPONENT: f64 = 48.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGreen {
    eta: f64,
    s0: f64,
    real_box: i32,
    spectral_box: i32,
    real_tail: f64,
    spectral_tail: f64,
    r2_zero: f64,
}

impl PeriodicGreen {
    /// eta = sqrt(pi), the balanced split for the unit square.
    pub fn new() -> Result<Self> {
        Self::with_eta(PI.sqrt(), EWALD_TOLERANCE)
    }

    /// Chooses the smallest image and wave-vector boxes whose tails stay below `tol`
    /// for arguments with |x|_inf <= 1.
    pub fn with_eta(eta: f64, tol: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("Ewald parameter must be positive, got {eta}")));
        }
        let s0 = 1.0 / (4.0 * eta * eta);
        // Bounds cover the value, gradient and Hessian terms of the omitted shells.
        let real_tail_of = |m: i32| {
            // images outside the box sit at distance >= m from any |x|_inf <= 1
            let d = m as f64;
            let u = d * d / (4.0 * s0);
            let shell = 8.0 * (m + 1) as f64;
            shell * (e1(u) / (4.0 * PI) + (-u).exp() * (3.0 / (d * d) + 1.0 / (2.0 * s0)) / (2.0 * PI))
        };
        let spectral_tail_of = |k: i32| {
            let n2 = ((k + 1) * (k + 1)) as f64;
            let shell = 8.0 * (k + 1) as f64;
            shell * (-4.0 * PI * PI * n2 * s0).exp() * (1.0 + 1.0 / (4.0 * PI * PI * n2))
        };
        let mut real_box = 1;
        while real_tail_of(real_box) > tol {
            real_box += 1;
            if real_box > 64 {
                return Err(Error::Truncation {
                    estimate: real_tail_of(real_box),
                    tolerance: tol,
                });
            }
        }
        let mut spectral_box = 1;
        while spectral_tail_of(spectral_box) > tol {
            spectral_box += 1;
            if spectral_box > 64 {
                return Err(Error::Truncation {
                    estimate: spectral_tail_of(spectral_box),
                    tolerance: tol,
                });
            }
        }
        let mut pg = Self {
            eta,
            s0,
            real_box: real_box + 1,
            spectral_box,
            real_tail: real_tail_of(real_box),
            spectral_tail: spectral_tail_of(spectral_box),
            r2_zero: 0.0,
        };
        pg.r2_zero = pg.r2(Vec2::zeros());
        Ok(pg)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn r2_zero(&self) -> f64 {
        self.r2_zero
    }

    /// Bound on the omitted real-space and spectral terms.
    pub fn tail_estimate(&self) -> (f64, f64) {
        (self.real_tail, self.spectral_tail)
    }

    /// R2 and its gradient and Hessian. Valid for |x|_inf <= 1.
    pub fn r2_all(&self, x: Vec2) -> (f64, Vec2, Mat2) {
        let s0 = self.s0;
        let four_pi = 4.0 * PI;
        let two_pi = 2.0 * PI;

        // m = 0 with the logarithm removed
        let r2 = x.norm_squared();
        let u = r2 / (4.0 * s0);
        let mut val = -(ein(u) - EULER_GAMMA + (4.0 * s0).ln()) / four_pi + s0;
        let gu = ein_prime(u);
        let xs = x / (2.0 * s0);
        let mut grad = -xs * (gu / four_pi);
        let mut hess = -(Mat2::identity() * (gu / (2.0 * s0)) + xs * xs.transpose() * ein_second(u)) / four_pi;

        let mb = self.real_box;
        for mx in -mb..=mb {
            for my in -mb..=mb {
                if mx == 0 && my == 0 {
                    continue;
                }
                let d = Vec2::new(x.x - mx as f64, x.y - my as f64);
                let rr = d.norm_squared();
                let u = rr / (4.0 * s0);
                if u > MAX_EXPONENT {
                    continue;
                }
                let eu = (-u).exp();
                val -= e1(u) / four_pi;
                grad += d * (eu / (two_pi * rr));
                let ddt = d * d.transpose();
                hess += (Mat2::identity() / rr - ddt * (2.0 / (rr * rr)) - ddt / (2.0 * s0 * rr)) * (eu / two_pi);
            }
        }

        let kb = self.spectral_box;
        let decay = 4.0 * PI * PI * s0;
        for nx in 0..=kb {
            for ny in -kb..=kb {
                if nx == 0 && ny <= 0 {
                    continue;
                }
                let n = Vec2::new(nx as f64, ny as f64);
                let n2 = n.norm_squared();
                // both n and -n
                let c = 2.0 * (-decay * n2).exp() / (4.0 * PI * PI * n2);
                let (s, co) = (two_pi * n.dot(&x)).sin_cos();
                val -= c * co;
                grad += n * (c * two_pi * s);
                hess += n * n.transpose() * (c * 4.0 * PI * PI * co);
            }
        }
        (val, grad, hess)
    }

    pub fn r2(&self, x: Vec2) -> f64 {
        self.r2_all(x).0
    }

    pub fn r2_gradient(&self, x: Vec2) -> Vec2 {
        self.r2_all(x).1
    }

    pub fn r2_hessian(&self, x: Vec2) -> Mat2 {
        self.r2_all(x).2
    }

    /// Full periodic Green function, its gradient and Hessian. x must not be a lattice point.
    pub fn eval(&self, x: Vec2) -> Result<(f64, Vec2, Mat2)> {
        let w = Vec2::new(x.x - x.x.round(), x.y - x.y.round());
        let r2 = w.norm_squared();
        if r2 == 0.0 {
            return Err(Error::Precondition("periodic Green function is singular at lattice points".into()));
        }
        let (v, g, h) = self.r2_all(w);
        let lv = r2.ln() / (4.0 * PI);
        let lg = w / (2.0 * PI * r2);
        let lh = (Mat2::identity() * r2 - w * w.transpose() * 2.0) / (2.0 * PI * r2 * r2);
        Ok((v + lv, g + lg, h + lh))
    }

    pub fn value(&self, x: Vec2) -> Result<f64> {
        Ok(self.eval(x)?.0)
    }
}
