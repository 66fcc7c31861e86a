//! Membrane polarization tensor M(omega), its spectrum and Debye relaxation times.
//!
//! M_ij = alpha * int n_j psi_i ds with psi_i = -(I + alpha L)^{-1} n_i and alpha = beta k0.
//! The curves passed here are the rescaled cell boundary; `cell_problem` performs the
//! rescaling for a configuration in the unit cell.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary_ops::{
    check_coercive, hypersingular_real, lu_solve, Discretization, Kernel, DEFAULT_NODES,
};
use crate::error::{Error, Result};
use crate::geometry::{Boundary, CellConfiguration, Mat2, Vec2};
use crate::media::{FrequencyGrid, MembraneModel};
use crate::peak::{count_local_maxima, refine_peak};

pub type CMat2 = Matrix2<Complex64>;

/// Relative tolerance on the Debye frequency.
pub const PEAK_TOLERANCE: f64 = 1e-6;

/// Symmetry tolerance on computed tensors, relative to their norm.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

const CONVERGENCE_TOL: f64 = 1e-10;
const MAX_NODES: usize = 512;

fn cnorm(m: &CMat2) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalues (ascending) of a real symmetric 2x2 matrix.
pub fn sym_eigenvalues(m: &Mat2) -> (f64, f64) {
    let (a, b, d) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (mean - rad, mean + rad)
}

/// Unit eigenvector of a real symmetric 2x2 matrix for its larger eigenvalue.
pub fn sym_major_axis(m: &Mat2) -> Vec2 {
    let (a, b, d) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
    let theta = 0.5 * (2.0 * b).atan2(a - d);
    Vec2::new(theta.cos(), theta.sin())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationTensor {
    pub omega: f64,
    pub m: CMat2,
}

impl PolarizationTensor {
    pub fn norm(&self) -> f64 {
        cnorm(&self.m)
    }

    pub fn symmetry_defect(&self) -> f64 {
        (self.m[(0, 1)] - self.m[(1, 0)]).norm()
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.symmetry_defect() <= rel_tol * self.norm()
    }

    /// Symmetrised imaginary part.
    pub fn im(&self) -> Mat2 {
        let im = self.m.map(|z| z.im);
        (im + im.transpose()) * 0.5
    }

    /// Eigenvalues of Im M, ascending.
    pub fn im_eigenvalues(&self) -> (f64, f64) {
        sym_eigenvalues(&self.im())
    }

    /// Symmetry and positive definite imaginary part.
    pub fn check(&self) -> Result<()> {
        if !self.is_symmetric(SYMMETRY_TOLERANCE) {
            return Err(Error::Precondition(format!(
                "tensor at omega = {} is not symmetric (defect {:.3e})",
                self.omega,
                self.symmetry_defect()
            )));
        }
        let (l1, _) = self.im_eigenvalues();
        if !(l1 > 0.0) {
            return Err(Error::Precondition(format!(
                "Im M is not positive definite at omega = {} (eigenvalue {l1:.3e})",
                self.omega
            )));
        }
        Ok(())
    }
}

/// Anything that provides M(omega).
pub trait PolarizationSource: Send + Sync {
    fn tensor(&self, omega: f64) -> Result<CMat2>;
}

/// Precomputed hypersingular data on one discretised boundary.
///
/// With W the quadrature weights, A = W^{1/2} L W^{-1/2} is symmetric; A = Q diag(lam) Q^T
/// turns every M(alpha) into a sum over modes.
#[derive(Debug, Clone)]
pub struct PolarizationSolver {
    nodes_per_curve: usize,
    periodic: bool,
    l: DMatrix<f64>,
    normals: [DVector<f64>; 2],
    weights: DVector<f64>,
    lambda: DVector<f64>,
    proj: [DVector<f64>; 2],
}

impl PolarizationSolver {
    pub fn new(boundary: &Boundary, nodes_per_curve: usize, kernel: &Kernel) -> Result<Self> {
        if nodes_per_curve < 8 || nodes_per_curve % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "nodes per curve must be even and at least 8, got {nodes_per_curve}"
            )));
        }
        let disc = Discretization::new(boundary, nodes_per_curve);
        Ok(Self::from_discretization(&disc, kernel))
    }

    pub fn from_discretization(disc: &Discretization, kernel: &Kernel) -> Self {
        let l = hypersingular_real(disc, kernel);
        let weights = DVector::from_vec(disc.weights());
        let sw = weights.map(f64::sqrt);
        let n = disc.len();
        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                a[(i, j)] = sw[i] * l[(i, j)] / sw[j];
            }
        }
        let a = (&a + a.transpose()) * 0.5;
        let eig = SymmetricEigen::new(a);
        let normals = [disc.normal_component(0), disc.normal_component(1)];
        let proj = [
            eig.eigenvectors.tr_mul(&normals[0].component_mul(&sw)),
            eig.eigenvectors.tr_mul(&normals[1].component_mul(&sw)),
        ];
        Self {
            nodes_per_curve: disc.curves().first().map_or(0, |c| c.len()),
            periodic: kernel.is_periodic(),
            l,
            normals,
            weights,
            lambda: eig.eigenvalues,
            proj,
        }
    }

    /// Doubles the node count from DEFAULT_NODES until M agrees with the next refinement
    /// to 1e-10 relative at every probe value of alpha.
    pub fn adaptive(boundary: &Boundary, kernel: &Kernel, alphas: &[Complex64]) -> Result<Self> {
        let mut n = DEFAULT_NODES;
        let mut coarse = Self::new(boundary, n, kernel)?;
        loop {
            let fine = Self::new(boundary, 2 * n, kernel)?;
            let mut worst: f64 = 0.0;
            for &a in alphas {
                let (mc, mf) = (coarse.tensor_alpha(a)?, fine.tensor_alpha(a)?);
                let scale = cnorm(&mf).max(f64::MIN_POSITIVE);
                worst = worst.max(cnorm(&(mc - mf)) / scale);
            }
            if worst <= CONVERGENCE_TOL || 2 * n >= MAX_NODES {
                return Ok(fine);
            }
            n *= 2;
            coarse = fine;
        }
    }

    pub fn nodes_per_curve(&self) -> usize {
        self.nodes_per_curve
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    /// Eigenvalues of the weighted hypersingular operator.
    pub fn spectrum(&self) -> &DVector<f64> {
        &self.lambda
    }

    /// M(alpha) = -alpha sum_k p_ik p_jk / (1 + alpha lam_k).
    pub fn tensor_alpha(&self, alpha: Complex64) -> Result<CMat2> {
        check_coercive(alpha)?;
        let mut m = CMat2::zeros();
        for k in 0..self.lambda.len() {
            let s = -alpha / (1.0 + alpha * self.lambda[k]);
            let (p0, p1) = (self.proj[0][k], self.proj[1][k]);
            m[(0, 0)] += s * (p0 * p0);
            m[(0, 1)] += s * (p0 * p1);
            m[(1, 1)] += s * (p1 * p1);
        }
        m[(1, 0)] = m[(0, 1)];
        Ok(m)
    }

    /// Same tensor by a dense LU solve of (I + alpha L) psi_i = -n_i; also returns the residual.
    pub fn tensor_direct(&self, alpha: Complex64) -> Result<(CMat2, f64)> {
        check_coercive(alpha)?;
        let n = self.l.nrows();
        let mut sys = self.l.map(|v| alpha * v);
        for i in 0..n {
            sys[(i, i)] += 1.0;
        }
        let mut rhs = DMatrix::zeros(n, 2);
        for i in 0..2 {
            for k in 0..n {
                rhs[(k, i)] = Complex64::new(-self.normals[i][k], 0.0);
            }
        }
        let (psi, res) = lu_solve(&sys, &rhs)?;
        let mut m = CMat2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += psi[(k, i)] * (self.normals[j][k] * self.weights[k]);
                }
                m[(i, j)] = alpha * acc;
            }
        }
        Ok((m, res))
    }

    /// int n n^T ds.
    pub fn normal_moment(&self) -> Mat2 {
        self.moment(0)
    }

    /// int n (L^k n)^T ds via the modal expansion.
    pub fn moment(&self, power: i32) -> Mat2 {
        let mut m = Mat2::zeros();
        for k in 0..self.lambda.len() {
            let lk = self.lambda[k].powi(power);
            for i in 0..2 {
                for j in 0..2 {
                    m[(i, j)] += self.proj[i][k] * self.proj[j][k] * lk;
                }
            }
        }
        m
    }
}

/// M on a boundary with the membrane of `model`, via `solver`.
#[derive(Debug, Clone)]
pub struct BemPolarization {
    pub solver: PolarizationSolver,
    pub model: MembraneModel,
}

impl BemPolarization {
    pub fn new(boundary: &Boundary, model: &MembraneModel, grid: &FrequencyGrid) -> Result<Self> {
        model.validate()?;
        let alphas = probe_alphas(model, grid)?;
        Ok(Self {
            solver: PolarizationSolver::adaptive(boundary, &Kernel::Free, &alphas)?,
            model: *model,
        })
    }

    pub fn with_nodes(boundary: &Boundary, model: &MembraneModel, nodes_per_curve: usize) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            solver: PolarizationSolver::new(boundary, nodes_per_curve, &Kernel::Free)?,
            model: *model,
        })
    }
}

impl PolarizationSource for BemPolarization {
    fn tensor(&self, omega: f64) -> Result<CMat2> {
        self.solver.tensor_alpha(self.model.beta_k0(omega)?)
    }
}

fn probe_alphas(model: &MembraneModel, grid: &FrequencyGrid) -> Result<Vec<Complex64>> {
    let (lo, hi) = (grid.min(), grid.max());
    [lo, (lo * hi).sqrt(), hi].iter().map(|&w| model.beta_k0(w)).collect()
}

/// Closed-form tensor of a circle of radius r0.
#[derive(Debug, Clone, Copy)]
pub struct MwfCircle {
    pub model: MembraneModel,
    pub r0: f64,
}

impl PolarizationSource for MwfCircle {
    fn tensor(&self, omega: f64) -> Result<CMat2> {
        Ok(mwf_circle(&self.model, omega, self.r0)?.m)
    }
}

/// M sampled on a grid and interpolated by local cubics in ln(omega).
#[derive(Debug, Clone)]
pub struct TabulatedPolarization {
    log_omegas: Vec<f64>,
    tensors: Vec<CMat2>,
}

impl TabulatedPolarization {
    pub fn new(omegas: &[f64], tensors: Vec<CMat2>) -> Result<Self> {
        if omegas.len() != tensors.len() || omegas.len() < 4 {
            return Err(Error::InvalidParameter("tabulated tensors need at least 4 matching samples".into()));
        }
        FrequencyGrid::new(omegas.to_vec())?;
        Ok(Self {
            log_omegas: omegas.iter().map(|w| w.ln()).collect(),
            tensors,
        })
    }

    pub fn from_spectrum(spec: &PolarizationSpectrum) -> Result<Self> {
        Self::new(spec.grid.omegas(), spec.tensors.iter().map(|t| t.m).collect())
    }

    pub fn covers(&self, omega: f64) -> bool {
        let x = omega.ln();
        x >= self.log_omegas[0] && x <= *self.log_omegas.last().unwrap()
    }
}

impl PolarizationSource for TabulatedPolarization {
    fn tensor(&self, omega: f64) -> Result<CMat2> {
        if !self.covers(omega) {
            return Err(Error::Precondition(format!("omega = {omega} is outside the tabulated range")));
        }
        let x = omega.ln();
        let xs = &self.log_omegas;
        let k = xs.partition_point(|&v| v <= x).clamp(2, xs.len() - 2);
        let idx = [k - 2, k - 1, k, k + 1];
        let mut m = CMat2::zeros();
        for &a in &idx {
            let mut w = 1.0;
            for &b in &idx {
                if a != b {
                    w *= (x - xs[b]) / (xs[a] - xs[b]);
                }
            }
            m += self.tensors[a] * Complex64::new(w, 0.0);
        }
        Ok(m)
    }
}

/// Rescaled boundary rho^{-1} Gamma (centroid at the origin) and the membrane with
/// thickness delta / rho, so that M does not depend on the volume fraction.
pub fn cell_problem(config: &CellConfiguration, model: &MembraneModel) -> Result<(Boundary, MembraneModel)> {
    if config.is_empty() {
        return Err(Error::Precondition("empty configuration has no polarization tensor".into()));
    }
    let rho = config.rho();
    Ok((config.rescaled()?, model.with_delta(model.delta / rho)))
}

/// M at one frequency on an already rescaled boundary.
pub fn polarization_tensor(boundary: &Boundary, model: &MembraneModel, omega: f64) -> Result<PolarizationTensor> {
    let alpha = model.beta_k0(omega)?;
    let solver = PolarizationSolver::adaptive(boundary, &Kernel::Free, &[alpha])?;
    Ok(PolarizationTensor {
        omega,
        m: solver.tensor_alpha(alpha)?,
    })
}

/// M = -beta k0 pi r0 / (1 + beta k0 / (2 r0)) I.
pub fn mwf_circle(model: &MembraneModel, omega: f64, r0: f64) -> Result<PolarizationTensor> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r0}")));
    }
    let a = model.beta_k0(omega)?;
    let s = -a * std::f64::consts::PI * r0 / (1.0 + a / (2.0 * r0));
    Ok(PolarizationTensor {
        omega,
        m: CMat2::new(s, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), s),
    })
}

/// Peak frequency of Im M for the circle.
pub fn mwf_peak_frequency(model: &MembraneModel, r0: f64) -> f64 {
    let q = model.delta / (2.0 * r0);
    (model.sigma_m + model.sigma0 * q) / (model.eps_m + model.eps0 * q)
}

#[derive(Debug, Clone)]
pub struct PolarizationSpectrum {
    pub grid: FrequencyGrid,
    pub tensors: Vec<PolarizationTensor>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub tau1: f64,
    pub tau2: f64,
    pub nodes_per_curve: usize,
}

impl PolarizationSpectrum {
    pub fn omegas(&self) -> &[f64] {
        self.grid.omegas()
    }

    /// Number of interior local maxima of (lambda1, lambda2) on the grid.
    pub fn peak_counts(&self) -> (usize, usize) {
        (count_local_maxima(&self.lambda1), count_local_maxima(&self.lambda2))
    }
}

/// Samples `source` on `grid`, checks every tensor and extracts the Debye times.
pub fn spectrum_of<S: PolarizationSource + ?Sized>(source: &S, grid: &FrequencyGrid) -> Result<PolarizationSpectrum> {
    let tensors: Vec<PolarizationTensor> = grid
        .omegas()
        .par_iter()
        .map(|&omega| Ok(PolarizationTensor { omega, m: source.tensor(omega)? }))
        .collect::<Result<_>>()?;
    for t in &tensors {
        t.check()?;
    }
    let (lambda1, lambda2): (Vec<f64>, Vec<f64>) = tensors.iter().map(PolarizationTensor::im_eigenvalues).unzip();
    let eig = |w: f64, which: usize| -> Result<f64> {
        let t = PolarizationTensor { omega: w, m: source.tensor(w)? };
        let (a, b) = t.im_eigenvalues();
        Ok(if which == 0 { a } else { b })
    };
    let (w1, _) = refine_peak(grid.omegas(), &lambda1, |w| eig(w, 0), PEAK_TOLERANCE)?;
    let (w2, _) = refine_peak(grid.omegas(), &lambda2, |w| eig(w, 1), PEAK_TOLERANCE)?;
    Ok(PolarizationSpectrum {
        grid: grid.clone(),
        tensors,
        lambda1,
        lambda2,
        tau1: 1.0 / w1,
        tau2: 1.0 / w2,
        nodes_per_curve: 0,
    })
}

/// Spectrum of the boundary integral tensor on an already rescaled boundary.
pub fn spectrum(boundary: &Boundary, model: &MembraneModel, grid: &FrequencyGrid) -> Result<PolarizationSpectrum> {
    let source = BemPolarization::new(boundary, model, grid)?;
    let mut spec = spectrum_of(&source, grid)?;
    spec.nodes_per_curve = source.solver.nodes_per_curve();
    Ok(spec)
}

/// Spectrum of the cells of a unit-cell configuration.
pub fn configuration_spectrum(
    config: &CellConfiguration,
    model: &MembraneModel,
    grid: &FrequencyGrid,
) -> Result<PolarizationSpectrum> {
    let (boundary, m) = cell_problem(config, model)?;
    spectrum(&boundary, &m, grid)
}

/// Operator moments of a boundary that do not depend on the membrane.
#[derive(Debug, Clone, Copy)]
pub struct ShapeSpectralData {
    /// Eigenvalues of int n L[n]^T ds, ascending.
    pub l1: f64,
    pub l2: f64,
    pub arclength: f64,
    /// int n n^T ds.
    pub p: Mat2,
    /// int n L[n]^T ds.
    pub q: Mat2,
    /// int n L^2[n]^T ds.
    pub r: Mat2,
}

pub fn shape_spectral_data(boundary: &Boundary) -> Result<ShapeSpectralData> {
    let solver = PolarizationSolver::new(boundary, 2 * DEFAULT_NODES, &Kernel::Free)?;
    let q = solver.moment(1);
    let (l1, l2) = sym_eigenvalues(&q);
    Ok(ShapeSpectralData {
        l1,
        l2,
        arclength: boundary.arclength(),
        p: solver.moment(0),
        q,
        r: solver.moment(2),
    })
}

/// Debye times from the small-thickness quartic -eps_m^4 |G| w^4 + 6 delta eps_m^2 sigma_m l_i rho w^2
/// + sigma_m^4 |G| = 0, with rho = 1 and |G| the arclength of the given boundary.
pub fn small_delta_tau(boundary: &Boundary, model: &MembraneModel) -> Result<(f64, f64)> {
    model.validate()?;
    if model.sigma0 != 1.0 || model.eps0 != 0.0 {
        return Err(Error::Precondition("the small-thickness expansion assumes sigma0 = 1 and eps0 = 0".into()));
    }
    if !(model.eps_m > 0.0) {
        return Err(Error::Precondition("the small-thickness expansion needs eps_m > 0".into()));
    }
    let data = shape_spectral_data(boundary)?;
    let g = data.arclength;
    let a = model.eps_m.powi(4) * g;
    let c = model.sigma_m.powi(4) * g;
    let tau = |l: f64| {
        let b = 6.0 * model.delta * model.eps_m * model.eps_m * model.sigma_m * l;
        let disc = b * b + 4.0 * a * c;
        debug_assert!(disc > 0.0);
        let x = (b + disc.sqrt()) / (2.0 * a);
        1.0 / x.sqrt()
    };
    Ok((tau(data.l1), tau(data.l2)))
}

/// lambda1 / lambda2 per frequency.
pub fn anisotropy_ratio(spec: &PolarizationSpectrum) -> Result<Vec<f64>> {
    spec.lambda1
        .iter()
        .zip(&spec.lambda2)
        .map(|(&a, &b)| {
            if b > 0.0 {
                Ok(a / b)
            } else {
                Err(Error::Precondition(format!("second eigenvalue is not positive ({b:.3e})")))
            }
        })
        .collect()
}

/// Large-frequency behaviour of lambda1/lambda2 against D = sigma_m^2 + omega^2 eps_m^2.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AnisotropyFit {
    /// c in 1 + c/D, least squares over the upper half of the grid.
    pub fitted_c: f64,
    /// (l1 - l2) 2 delta sigma_m rho / |G|.
    pub predicted_c: f64,
    /// r and c' in r + c'/D, least squares over the same points.
    pub fitted_limit: f64,
    pub fitted_slope: f64,
    /// p1/p2 from the eigenvalues of int n n^T ds.
    pub limit: f64,
    /// [2 delta sigma_m (p1 q2 - p2 q1) + delta^2 (p1 r2 - p2 r1)] / p2^2 in the eigenframe of int n n^T.
    pub slope: f64,
    /// Whether the ratio is nondecreasing over the fitted range.
    pub increasing: bool,
}

pub fn anisotropy_fit(
    spec: &PolarizationSpectrum,
    data: &ShapeSpectralData,
    model: &MembraneModel,
    rho: f64,
) -> Result<AnisotropyFit> {
    let ratio = anisotropy_ratio(spec)?;
    let omegas = spec.omegas();
    let start = omegas.len() / 2;
    if omegas.len() - start < 3 {
        return Err(Error::InvalidParameter("grid too short for the anisotropy fit".into()));
    }
    let inv_d: Vec<f64> = omegas[start..]
        .iter()
        .map(|w| 1.0 / (model.sigma_m.powi(2) + (w * model.eps_m).powi(2)))
        .collect();
    let rs = &ratio[start..];
    let fitted_c =
        inv_d.iter().zip(rs).map(|(x, r)| x * (r - 1.0)).sum::<f64>() / inv_d.iter().map(|x| x * x).sum::<f64>();
    let n = inv_d.len() as f64;
    let (sx, sy) = (inv_d.iter().sum::<f64>(), rs.iter().sum::<f64>());
    let sxx = inv_d.iter().map(|x| x * x).sum::<f64>();
    let sxy = inv_d.iter().zip(rs).map(|(x, y)| x * y).sum::<f64>();
    let det = n * sxx - sx * sx;
    let (fitted_limit, fitted_slope) = if det.abs() > 0.0 {
        ((sxx * sy - sx * sxy) / det, (n * sxy - sx * sy) / det)
    } else {
        (sy / n, 0.0)
    };

    let eig = SymmetricEigen::new(data.p);
    let (i1, i2) = if eig.eigenvalues[0] <= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let e1 = eig.eigenvectors.column(i1).into_owned();
    let e2 = eig.eigenvectors.column(i2).into_owned();
    let (p1, p2) = (eig.eigenvalues[i1], eig.eigenvalues[i2]);
    let (q1, q2) = ((e1.transpose() * data.q * e1)[0], (e2.transpose() * data.q * e2)[0]);
    let (r1, r2) = ((e1.transpose() * data.r * e1)[0], (e2.transpose() * data.r * e2)[0]);
    let d = model.delta;
    let slope = (2.0 * d * model.sigma_m * (p1 * q2 - p2 * q1) + d * d * (p1 * r2 - p2 * r1)) / (p2 * p2);

    Ok(AnisotropyFit {
        fitted_c,
        predicted_c: (data.l1 - data.l2) * 2.0 * d * model.sigma_m * rho / data.arclength,
        fitted_limit,
        fitted_slope,
        limit: p1 / p2,
        slope,
        increasing: ratio[start..].windows(2).all(|w| w[1] >= w[0]),
    })
}
