use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::curve::{rotation, Curve, Mat2, Vec2};
use super::CellConfiguration;
use crate::error::{Error, Result};
use crate::special::gauss_legendre;

/// Bounds of the random per-cell map
/// Phi = bump o (blended shear + translation) o (twist rotation).
///
/// The rotation and the affine part act fully on the cells and are blended
/// to the identity by a radial cutoff before the cell wall, so Phi - I is
/// Y-periodic. The twist rotation has unit Jacobian everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeformationParams {
    pub max_translation: f64,
    pub max_rotation: f64,
    pub max_shear: f64,
    pub bump_amplitude: f64,
    pub bump_modes: usize,
    /// Position of the outer cutoff radius between the cells and the wall, in (0, 1).
    pub cutoff: f64,
    /// Lower bound on det(grad Phi).
    pub kappa: f64,
    /// Upper bound on the Frobenius norm of grad Phi.
    pub kappa_prime: f64,
    pub max_attempts: usize,
}

impl Default for DeformationParams {
    fn default() -> Self {
        Self {
            max_translation: 0.0,
            max_rotation: 0.0,
            max_shear: 0.0,
            bump_amplitude: 0.0,
            bump_modes: 1,
            cutoff: 0.3,
            kappa: 0.1,
            kappa_prime: 12.0,
            max_attempts: 1000,
        }
    }
}

impl DeformationParams {
    /// Uniform rotations in [-pi, pi) and nothing else.
    pub fn rotations() -> Self {
        Self {
            max_rotation: PI,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [self.max_translation, self.max_rotation, self.max_shear, self.bump_amplitude];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter("deformation bounds must be finite and >= 0".into()));
        }
        if self.max_shear >= 1.0 / 2f64.sqrt() {
            return Err(Error::InvalidParameter("max_shear must be below 1/sqrt(2)".into()));
        }
        if !(self.cutoff > 0.0 && self.cutoff < 1.0) {
            return Err(Error::InvalidParameter("cutoff must lie in (0, 1)".into()));
        }
        if !(self.kappa > 0.0 && self.kappa_prime > self.kappa) {
            return Err(Error::InvalidParameter("need 0 < kappa < kappa_prime".into()));
        }
        if self.max_attempts == 0 {
            return Err(Error::InvalidParameter("max_attempts must be positive".into()));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.max_translation == 0.0
            && self.max_rotation == 0.0
            && self.max_shear == 0.0
            && self.bump_amplitude == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub wave: [i32; 2],
    pub amplitude: [f64; 2],
    pub phase: f64,
}

/// One draw of the random map for a given cell configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationSample {
    pub seed: u64,
    pub stream: u64,
    pub attempts: usize,
    pub center: [f64; 2],
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub translation: [f64; 2],
    pub angle: f64,
    /// Symmetric traceless shear [[s0, s1], [s1, -s0]].
    pub shear: [f64; 2],
    pub bumps: Vec<Bump>,
}

fn smoothstep_cutoff(r: f64, r1: f64, r2: f64) -> (f64, f64) {
    if r <= r1 {
        return (1.0, 0.0);
    }
    if r >= r2 {
        return (0.0, 0.0);
    }
    let w = r2 - r1;
    let s = (r - r1) / w;
    let s2 = s * s;
    let chi = 1.0 - s2 * s * (10.0 - 15.0 * s + 6.0 * s2);
    let dchi = -30.0 * s2 * (1.0 - s) * (1.0 - s) / w;
    (chi, dchi)
}

impl DeformationSample {
    pub fn is_identity(&self) -> bool {
        self.translation == [0.0, 0.0]
            && self.angle == 0.0
            && self.shear == [0.0, 0.0]
            && self.bumps.iter().all(|b| b.amplitude == [0.0, 0.0])
    }

    fn center(&self) -> Vec2 {
        Vec2::new(self.center[0], self.center[1])
    }

    fn shear_matrix(&self) -> Mat2 {
        Mat2::new(self.shear[0], self.shear[1], self.shear[1], -self.shear[0])
    }

    /// Phi(x) and grad Phi(x); Phi - I is extended Y-periodically.
    pub fn map(&self, x: Vec2) -> (Vec2, Mat2) {
        if self.is_identity() {
            return (x, Mat2::identity());
        }
        let cell = Vec2::new(x.x.floor(), x.y.floor());
        let (y, j) = self.map_in_cell(x - cell);
        (y + cell, j)
    }

    fn map_in_cell(&self, x: Vec2) -> (Vec2, Mat2) {
        let c = self.center();
        let (r1, r2) = (self.inner_radius, self.outer_radius);

        // twist rotation about c
        let d = x - c;
        let r = d.norm();
        let (chi, dchi) = smoothstep_cutoff(r, r1, r2);
        let phi = self.angle * chi;
        let rot = rotation(phi);
        let w = c + rot * d;
        let grad_phi = if r > 0.0 { d * (self.angle * dchi / r) } else { Vec2::zeros() };
        let jw = rot + rotation(phi + 0.5 * PI) * d * grad_phi.transpose();

        // blended shear and translation (|w - c| = r)
        let e = w - c;
        let s = self.shear_matrix();
        let t = Vec2::new(self.translation[0], self.translation[1]);
        let disp = t + s * e;
        let grad_chi = if r > 0.0 { e * (dchi / r) } else { Vec2::zeros() };
        let a = w + disp * chi;
        let ja = Mat2::identity() + s * chi + disp * grad_chi.transpose();

        // periodic bumps
        let mut y = a;
        let mut jb = Mat2::identity();
        for b in &self.bumps {
            let k = Vec2::new(b.wave[0] as f64, b.wave[1] as f64) * (2.0 * PI);
            let arg = k.dot(&a) + b.phase;
            let amp = Vec2::new(b.amplitude[0], b.amplitude[1]);
            y += amp * arg.sin();
            jb += amp * k.transpose() * arg.cos();
        }
        (y, jb * ja * jw)
    }

    /// Cell map restricted to the cells when no bumps are present: x -> A x + b.
    fn cell_affine(&self) -> Option<(Mat2, Vec2)> {
        if self.bumps.iter().any(|b| b.amplitude != [0.0, 0.0]) {
            return None;
        }
        let c = self.center();
        let a = (Mat2::identity() + self.shear_matrix()) * rotation(self.angle);
        let t = Vec2::new(self.translation[0], self.translation[1]);
        Some((a, c + t - a * c))
    }

    /// Deformed configuration Phi(Gamma).
    pub fn apply(&self, config: &CellConfiguration) -> Result<CellConfiguration> {
        if self.is_identity() {
            return Ok(config.clone());
        }
        let curves = match self.cell_affine() {
            Some((a, b)) => config.curves().iter().map(|c| c.affine(a, b)).collect::<Result<Vec<_>>>()?,
            None => config
                .curves()
                .iter()
                .map(|c| {
                    let pts: Vec<Vec2> = c.discretize(512).points.iter().map(|&p| self.map(p).0).collect();
                    Curve::from_samples(&pts)
                })
                .collect::<Result<Vec<_>>>()?,
        };
        CellConfiguration::new(curves)
    }

    /// varrho = 1 / det(mean over Y of grad Phi). The mean is the boundary integral
    /// int_{dY} Phi n^T ds, by Gauss-Legendre on each side of the square.
    pub fn volume_factor(&self) -> f64 {
        if self.is_identity() {
            return 1.0;
        }
        let (xs, ws) = gauss_legendre(32);
        let sides = [
            (Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, -1.0)),
            (Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)),
            (Vec2::new(1.0, 1.0), Vec2::new(-1.0, 0.0), Vec2::new(0.0, 1.0)),
            (Vec2::new(0.0, 1.0), Vec2::new(0.0, -1.0), Vec2::new(-1.0, 0.0)),
        ];
        let mut mean = Mat2::zeros();
        for (start, dir, n) in sides {
            for (x, w) in xs.iter().zip(&ws) {
                let p = start + dir * (0.5 * (x + 1.0));
                mean += self.map(p).0 * n.transpose() * (0.5 * w);
            }
        }
        1.0 / mean.determinant()
    }

    /// Checks det >= kappa, |grad Phi|_F <= kappa', and sup |Phi - I| <= clearance / 2.
    fn constraint_violation(&self, config: &CellConfiguration, params: &DeformationParams) -> Option<String> {
        let half_gap = 0.5 * config.wall_clearance();
        let mut probes: Vec<Vec2> = Vec::new();
        let g = 48;
        for i in 0..=g {
            for j in 0..=g {
                probes.push(Vec2::new(i as f64 / g as f64, j as f64 / g as f64));
            }
        }
        let c = self.center();
        for k in 0..=16 {
            let r = self.inner_radius + (self.outer_radius - self.inner_radius) * k as f64 / 16.0;
            for m in 0..64 {
                let th = 2.0 * PI * m as f64 / 64.0;
                probes.push(c + Vec2::new(th.cos(), th.sin()) * r);
            }
        }
        for curve in config.curves() {
            probes.extend(curve.discretize(256).points);
        }
        for p in probes {
            let (y, j) = self.map(p);
            let det = j.determinant();
            if det < params.kappa {
                return Some(format!("det grad Phi = {det:.3e} < kappa at ({:.3}, {:.3})", p.x, p.y));
            }
            let fro = j.norm();
            if fro > params.kappa_prime {
                return Some(format!("|grad Phi|_F = {fro:.3e} > kappa' at ({:.3}, {:.3})", p.x, p.y));
            }
            let disp = (y - p).norm();
            if disp > half_gap {
                return Some(format!("|Phi(x) - x| = {disp:.3e} exceeds {half_gap:.3e}"));
            }
        }
        None
    }
}

/// Draws a map satisfying the determinant, gradient and displacement bounds by rejection.
///
/// The draw is a pure function of (params, config, seed, stream).
pub fn sample_deformation(
    params: &DeformationParams,
    config: &CellConfiguration,
    seed: u64,
    stream: u64,
) -> Result<DeformationSample> {
    params.validate()?;
    if config.is_empty() {
        return Err(Error::InvalidGeometry("cannot deform an empty configuration".into()));
    }
    let boundary = config.boundary()?;
    let c = boundary.centroid();
    let mut r1: f64 = 0.0;
    for curve in config.curves() {
        for p in curve.discretize(256).points {
            r1 = r1.max((p - c).norm());
        }
    }
    r1 *= 1.0 + 1e-3;
    let r_wall = c.x.min(1.0 - c.x).min(c.y).min(1.0 - c.y);
    if r1 >= r_wall {
        return Err(Error::InvalidGeometry(
            "cells do not fit in a disk inside the unit cell; cannot blend the deformation".into(),
        ));
    }
    let r2 = r1 + params.cutoff * (r_wall - r1);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut uniform = |bound: f64| if bound > 0.0 { rng.gen_range(-bound..bound) } else { 0.0 };

    let mut last = String::new();
    for attempt in 1..=params.max_attempts {
        let translation = [uniform(params.max_translation), uniform(params.max_translation)];
        let angle = uniform(params.max_rotation);
        let shear = [uniform(params.max_shear), uniform(params.max_shear)];
        let mut bumps = Vec::new();
        if params.bump_amplitude > 0.0 {
            let m = params.bump_modes as i32;
            let count = (2 * m + 1) * (2 * m + 1) / 2;
            let scale = params.bump_amplitude / count as f64;
            for kx in 0..=m {
                for ky in -m..=m {
                    if kx == 0 && ky <= 0 {
                        continue;
                    }
                    bumps.push(Bump {
                        wave: [kx, ky],
                        amplitude: [uniform(scale), uniform(scale)],
                        phase: uniform(PI),
                    });
                }
            }
        }
        let sample = DeformationSample {
            seed,
            stream,
            attempts: attempt,
            center: [c.x, c.y],
            inner_radius: r1,
            outer_radius: r2,
            translation,
            angle,
            shear,
            bumps,
        };
        match sample.constraint_violation(config, params) {
            None => return Ok(sample),
            Some(reason) => last = reason,
        }
    }
    Err(Error::RejectionBudget {
        attempts: params.max_attempts,
        reason: last,
    })
}
