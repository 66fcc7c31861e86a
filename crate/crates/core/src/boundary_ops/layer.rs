//! Nystrom blocks of the Laplace layer operators with kernel (1/2pi) ln|x-y|.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{Discretization, Kernel};
use crate::geometry::{CurveNodes, Vec2};

/// Dense matrix filled row-parallel from an entry function.
pub(crate) fn assemble<F>(rows: usize, cols: usize, entry: F) -> DMatrix<f64>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let mut data = vec![0.0; rows * cols];
    if cols > 0 {
        data.par_chunks_mut(cols).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = entry(i, j);
            }
        });
    }
    DMatrix::from_row_slice(rows, cols, &data)
}

/// Kress weights R_k = -(2pi/n) sum_{m<n} cos(m k h)/m - (pi/n^2)(-1)^k, N = 2n.
fn kress_weights(len: usize) -> Vec<f64> {
    let n = len / 2;
    let h = 2.0 * PI / len as f64;
    (0..len)
        .map(|k| {
            let mut acc = 0.0;
            for m in 1..n {
                acc += (m as f64 * k as f64 * h).cos() / m as f64;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            -2.0 * PI / n as f64 * acc - PI / (n * n) as f64 * sign
        })
        .collect()
}

/// Spectral differentiation matrix in the parameter t for N equispaced nodes.
pub fn differentiation_matrix(len: usize) -> DMatrix<f64> {
    let h = 2.0 * PI / len as f64;
    assemble(len, len, |i, j| {
        if i == j {
            0.0
        } else {
            let d = i as f64 - j as f64;
            let sign = if (i + len - j) % 2 == 0 { 1.0 } else { -1.0 };
            0.5 * sign / (0.5 * d * h).tan()
        }
    })
}

/// Single layer with log-singular product quadrature on the diagonal block.
pub fn single_layer_self(c: &CurveNodes) -> DMatrix<f64> {
    let len = c.len();
    let r = kress_weights(len);
    let h = c.step();
    assemble(len, len, |i, j| {
        let k2 = if i == j {
            c.speed[i].ln()
        } else {
            let dt = c.t[i] - c.t[j];
            let s = (0.5 * dt).sin();
            (c.points[i] - c.points[j]).norm().ln() - 0.5 * (4.0 * s * s).ln()
        };
        let ridx = (i + len - j) % len;
        (0.5 * r[ridx] + h * k2) * c.speed[j] / (2.0 * PI)
    })
}

/// Single layer from `source` nodes evaluated at `target` points (plain trapezoid).
pub fn single_layer_cross(target: &[Vec2], source: &CurveNodes) -> DMatrix<f64> {
    assemble(target.len(), source.len(), |i, j| {
        (target[i] - source.points[j]).norm().ln() * source.weights[j] / (2.0 * PI)
    })
}

/// Double layer (y-x).n_y/(2pi|x-y|^2) on one curve, diagonal limit kappa/(4pi).
pub fn double_layer_self(c: &CurveNodes) -> DMatrix<f64> {
    let len = c.len();
    assemble(len, len, |i, j| {
        if i == j {
            c.curvature[i] * c.weights[i] / (4.0 * PI)
        } else {
            let d = c.points[j] - c.points[i];
            d.dot(&c.normal[j]) / (2.0 * PI * d.norm_squared()) * c.weights[j]
        }
    })
}

/// Double layer from `source` nodes at off-curve `target` points.
pub fn double_layer_cross(target: &[Vec2], source: &CurveNodes) -> DMatrix<f64> {
    assemble(target.len(), source.len(), |i, j| {
        let d = source.points[j] - target[i];
        d.dot(&source.normal[j]) / (2.0 * PI * d.norm_squared()) * source.weights[j]
    })
}

/// Adjoint double layer (x-y).n_x/(2pi|x-y|^2) on one curve, diagonal limit kappa/(4pi).
pub fn adjoint_double_layer_self(c: &CurveNodes) -> DMatrix<f64> {
    let len = c.len();
    assemble(len, len, |i, j| {
        if i == j {
            c.curvature[i] * c.weights[i] / (4.0 * PI)
        } else {
            let d = c.points[i] - c.points[j];
            d.dot(&c.normal[i]) / (2.0 * PI * d.norm_squared()) * c.weights[j]
        }
    })
}

/// Normal derivative at target nodes (with normals) of the single layer on `source`.
pub fn normal_derivative_cross(target: &CurveNodes, source: &CurveNodes) -> DMatrix<f64> {
    assemble(target.len(), source.len(), |i, j| {
        let d = target.points[i] - source.points[j];
        d.dot(&target.normal[i]) / (2.0 * PI * d.norm_squared()) * source.weights[j]
    })
}

/// Block-diagonal arclength differentiation diag(1/|x'|) D_t.
fn arclength_derivative(disc: &Discretization) -> DMatrix<f64> {
    let n = disc.len();
    let mut ds = DMatrix::zeros(n, n);
    for (k, c) in disc.curves().iter().enumerate() {
        let off = disc.offset(k);
        let dt = differentiation_matrix(c.len());
        for i in 0..c.len() {
            for j in 0..c.len() {
                ds[(off + i, off + j)] = dt[(i, j)] / c.speed[i];
            }
        }
    }
    ds
}

pub(super) fn single_layer(disc: &Discretization, kernel: &Kernel) -> DMatrix<f64> {
    let n = disc.len();
    let mut s = DMatrix::zeros(n, n);
    let curves = disc.curves();
    for (a, ca) in curves.iter().enumerate() {
        for (b, cb) in curves.iter().enumerate() {
            let block = if a == b {
                single_layer_self(ca)
            } else {
                single_layer_cross(&ca.points, cb)
            };
            s.view_mut((disc.offset(a), disc.offset(b)), (ca.len(), cb.len())).copy_from(&block);
        }
    }
    if let Kernel::Periodic(pg) = kernel {
        let (pts, w) = (disc.points(), disc.weights());
        s += assemble(n, n, |i, j| pg.r2(pts[i] - pts[j]) * w[j]);
    }
    s
}

pub(super) fn double_layer(disc: &Discretization, kernel: &Kernel, adjoint: bool) -> DMatrix<f64> {
    let n = disc.len();
    let mut d = DMatrix::zeros(n, n);
    let curves = disc.curves();
    for (a, ca) in curves.iter().enumerate() {
        for (b, cb) in curves.iter().enumerate() {
            let block = match (a == b, adjoint) {
                (true, false) => double_layer_self(ca),
                (true, true) => adjoint_double_layer_self(ca),
                (false, false) => double_layer_cross(&ca.points, cb),
                (false, true) => normal_derivative_cross(ca, cb),
            };
            d.view_mut((disc.offset(a), disc.offset(b)), (ca.len(), cb.len())).copy_from(&block);
        }
    }
    if let Kernel::Periodic(pg) = kernel {
        let (pts, nrm, w) = (disc.points(), disc.normals(), disc.weights());
        d += assemble(n, n, |i, j| {
            let g = pg.r2_gradient(pts[i] - pts[j]);
            if adjoint {
                g.dot(&nrm[i]) * w[j]
            } else {
                -g.dot(&nrm[j]) * w[j]
            }
        });
    }
    d
}

/// Hypersingular operator through the Maue identity L = (d/ds) S (d/ds), plus the
/// smooth correction -n_x^T Hess R2(x-y) n_y for the periodic kernel.
pub(super) fn hypersingular(disc: &Discretization, kernel: &Kernel) -> DMatrix<f64> {
    let s = single_layer(disc, &Kernel::Free);
    let ds = arclength_derivative(disc);
    let mut l = &ds * s * &ds;
    if let Kernel::Periodic(pg) = kernel {
        let n = disc.len();
        let (pts, nrm, w) = (disc.points(), disc.normals(), disc.weights());
        l -= assemble(n, n, |i, j| {
            let hess = pg.r2_hessian(pts[i] - pts[j]);
            nrm[i].dot(&(hess * nrm[j])) * w[j]
        });
    }
    // L[1] = 0 on each curve; remove the rounding left in the block row sums
    for (k, c) in disc.curves().iter().enumerate() {
        let off = disc.offset(k);
        for i in off..off + c.len() {
            let s: f64 = (off..off + c.len()).map(|j| l[(i, j)]).sum();
            l[(i, i)] -= s;
        }
    }
    l
}

/// Double-layer potential of a density at an off-curve point.
pub fn double_layer_potential(c: &CurveNodes, density: &[Complex64], x: Vec2) -> Complex64 {
    (0..c.len())
        .map(|j| {
            let d = c.points[j] - x;
            density[j] * (d.dot(&c.normal[j]) / (2.0 * PI * d.norm_squared()) * c.weights[j])
        })
        .sum()
}

/// Single-layer potential of a density at an off-curve point.
pub fn single_layer_potential(c: &CurveNodes, density: &[Complex64], x: Vec2) -> Complex64 {
    (0..c.len())
        .map(|j| density[j] * ((x - c.points[j]).norm().ln() * c.weights[j] / (2.0 * PI)))
        .sum()
}
