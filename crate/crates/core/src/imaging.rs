//! Spectroscopic imaging of a suspension-filled inclusion D inside a disk-shaped probe domain.
//!
//! Forward model: div((1 + f M chi_D) grad u) = 0 in Omega, du/dn = g on the boundary.
//! With u = S_Omega[psi] + S_D[phi] the unknowns satisfy
//!
//!   (-1/2 + K*_Omega) psi + 1 (w^T psi) + dS_D[phi]/dn = g        on the probe boundary
//!   ((k+1)/2 - (k-1) K*_D) phi - (k-1) dS_Omega[psi]/dn = 0       on dD, k = 1 + f m
//!
//! The first block is frequency independent, so it is factored once and only the
//! dD-sized Schur complement is solved per frequency.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::boundary_ops::{
    adjoint_double_layer_self, double_layer_self, lu_solve, normal_derivative_cross, single_layer_cross,
    single_layer_self,
};
use crate::error::{Error, Result};
use crate::geometry::{make_circle, Curve, CurveNodes, Vec2};
use crate::media::FrequencyGrid;
use crate::peak::refine_peak;
use crate::polarization::{sym_major_axis, CMat2, PolarizationSource, PEAK_TOLERANCE};

/// Relative tolerance for treating M as a multiple of the identity.
pub const ISOTROPY_TOLERANCE: f64 = 1e-6;

const ZERO_MEAN_TOLERANCE: f64 = 1e-12;

/// Disk of radius `radius` centred at the origin, sampled at `nodes` boundary points.
#[derive(Debug, Clone)]
pub struct ProbeDomain {
    radius: f64,
    nodes: CurveNodes,
}

impl ProbeDomain {
    pub fn new(radius: f64, nodes: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("probe radius must be positive, got {radius}")));
        }
        if nodes < 8 || nodes % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "probe nodes must be even and at least 8, got {nodes}"
            )));
        }
        Ok(Self {
            radius,
            nodes: make_circle(radius)?.discretize(nodes),
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn nodes(&self) -> &CurveNodes {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// g = a . n at the nodes.
    pub fn linear_pattern(&self, a: Vec2) -> Vec<f64> {
        self.nodes.normal.iter().map(|n| a.dot(n)).collect()
    }

    /// g = cos(m theta + phase) at the nodes.
    pub fn fourier_pattern(&self, mode: usize, phase: f64) -> Vec<f64> {
        self.nodes.t.iter().map(|t| (mode as f64 * t + phase).cos()).collect()
    }

    /// Boundary integral of a real node function.
    pub fn integrate(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.nodes.weights).map(|(a, w)| a * w).sum()
    }

    pub fn check_pattern(&self, g: &[f64]) -> Result<()> {
        if g.len() != self.len() {
            return Err(Error::Precondition(format!(
                "pattern has {} values for {} nodes",
                g.len(),
                self.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("pattern has non-finite values".into()));
        }
        let scale = self.integrate(&g.iter().map(|v| v.abs()).collect::<Vec<_>>()).max(1.0);
        let mean = self.integrate(g);
        if mean.abs() > ZERO_MEAN_TOLERANCE * scale {
            return Err(Error::Precondition(format!("current pattern must have zero mean, got {mean:.3e}")));
        }
        Ok(())
    }
}

/// An inclusion D filled with cells at volume fraction f, with M(omega) of those cells.
#[derive(Clone)]
pub struct SuspensionInclusion {
    pub curve: Curve,
    pub f: f64,
    pub source: Arc<dyn PolarizationSource>,
}

impl std::fmt::Debug for SuspensionInclusion {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("SuspensionInclusion").field("curve", &self.curve).field("f", &self.f).finish()
    }
}

impl SuspensionInclusion {
    pub fn new(curve: Curve, f: f64, source: Arc<dyn PolarizationSource>) -> Result<Self> {
        if !(0.0..1.0).contains(&f) {
            return Err(Error::InvalidParameter(format!("volume fraction must lie in [0, 1), got {f}")));
        }
        Ok(Self { curve, f, source })
    }

    pub fn tensor(&self, omega: f64) -> Result<CMat2> {
        self.source.tensor(omega)
    }
}

/// Scalar m from an isotropic M.
pub fn isotropic_value(m: &CMat2) -> Result<Complex64> {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let off = (m[(0, 1)].norm()).max(m[(1, 0)].norm());
    if (m[(0, 0)] - m[(1, 1)]).norm() > ISOTROPY_TOLERANCE * scale || off > ISOTROPY_TOLERANCE * scale {
        return Err(Error::Precondition("forward solver needs an isotropic polarization tensor".into()));
    }
    Ok(0.5 * (m[(0, 0)] + m[(1, 1)]))
}

/// Frequency-independent operator data of a probe and inclusion shape.
#[derive(Debug, Clone)]
pub struct ForwardScene {
    probe: ProbeDomain,
    inclusion: CurveNodes,
    /// K*_D.
    kd: DMatrix<f64>,
    /// dS_Omega/dn at dD times A^{-1}, with A the probe block.
    b_ainv: DMatrix<f64>,
    /// dS_Omega/dn at dD times A^{-1} dS_D/dn at the probe.
    schur: DMatrix<f64>,
    /// S_Omega A^{-1} (probe potential of the background).
    s_ainv: DMatrix<f64>,
    /// S_D at the probe minus S_Omega A^{-1} dS_D/dn.
    response: DMatrix<f64>,
    /// Double layer on the probe boundary.
    k_probe: DMatrix<f64>,
}

impl ForwardScene {
    pub fn new(probe: ProbeDomain, inclusion: &Curve, inclusion_nodes: usize) -> Result<Self> {
        let nd = inclusion.discretize(inclusion_nodes);
        let r = probe.radius();
        let clearance = nd.points.iter().map(|p| r - p.norm()).fold(f64::INFINITY, f64::min);
        if !(clearance > 1e-3 * r) {
            return Err(Error::InvalidGeometry("inclusion must lie strictly inside the probe disk".into()));
        }
        let no = probe.nodes();
        let n = no.len();

        let mut a = adjoint_double_layer_self(no);
        for i in 0..n {
            a[(i, i)] -= 0.5;
            for j in 0..n {
                a[(i, j)] += no.weights[j];
            }
        }
        let ainv = a
            .clone()
            .try_inverse()
            .ok_or(Error::SingularMatrix { pivot_ratio: 0.0 })?;
        let c = normal_derivative_cross(no, &nd);
        let b = normal_derivative_cross(&nd, no);
        let s_oo = single_layer_self(no);
        let s_od = single_layer_cross(&no.points, &nd);

        let b_ainv = &b * &ainv;
        let schur = &b_ainv * &c;
        let s_ainv = &s_oo * &ainv;
        let response = s_od - &s_ainv * &c;
        Ok(Self {
            kd: adjoint_double_layer_self(&nd),
            k_probe: double_layer_self(no),
            probe,
            inclusion: nd,
            b_ainv,
            schur,
            s_ainv,
            response,
        })
    }

    pub fn probe(&self) -> &ProbeDomain {
        &self.probe
    }

    pub fn inclusion_nodes(&self) -> &CurveNodes {
        &self.inclusion
    }

    /// Boundary potential for contrast k = 1 + f m and pattern g, shifted to zero mean.
    pub fn solve_scalar(&self, g: &[f64], fm: Complex64) -> Result<Vec<Complex64>> {
        self.probe.check_pattern(g)?;
        let gv = DVector::from_column_slice(g);
        let background = &self.s_ainv * &gv;
        let mut u: DVector<Complex64> = background.map(|v| Complex64::new(v, 0.0));
        if fm != Complex64::new(0.0, 0.0) {
            let k = 1.0 + fm;
            if !(k.re > 0.0) {
                return Err(Error::Precondition(format!("inclusion admittivity {k} is not coercive")));
            }
            let km1 = k - 1.0;
            let nd = self.inclusion.len();
            let mut sys = DMatrix::from_fn(nd, nd, |i, j| {
                -km1 * self.kd[(i, j)] + km1 * self.schur[(i, j)]
            });
            for i in 0..nd {
                sys[(i, i)] += 0.5 * (k + 1.0);
            }
            let rhs = (&self.b_ainv * &gv).map(|v| km1 * v);
            let rhs = DMatrix::from_column_slice(nd, 1, rhs.as_slice());
            let (phi, _) = lu_solve(&sys, &rhs)?;
            let resp = self.response.map(|v| Complex64::new(v, 0.0));
            u += resp * phi.column(0);
        }
        let w = &self.probe.nodes().weights;
        let total: f64 = w.iter().sum();
        let mean: Complex64 = u.iter().zip(w).map(|(z, w)| z * w).sum::<Complex64>() / total;
        Ok(u.iter().map(|z| z - mean).collect())
    }

    /// Anisotropic first-order superposition for g = a . n: the solve is split along the
    /// eigenvectors q_k of Im M, each with the scalar q_k^T M q_k and pattern (a . q_k) q_k . n.
    pub fn solve_linear_anisotropic(&self, a: Vec2, f: f64, m: &CMat2) -> Result<Vec<Complex64>> {
        let im = m.map(|z| z.im);
        let q1 = sym_major_axis(&im);
        let q2 = Vec2::new(-q1.y, q1.x);
        let mut u = vec![Complex64::new(0.0, 0.0); self.probe.len()];
        for q in [q1, q2] {
            let qc = q.map(|v| Complex64::new(v, 0.0));
            let mk = (qc.transpose() * m * qc)[0];
            let g = self.probe.linear_pattern(q * a.dot(&q));
            let uk = self.solve_scalar(&g, mk * f)?;
            for (acc, v) in u.iter_mut().zip(uk) {
                *acc += v;
            }
        }
        Ok(u)
    }

    /// F = Im[u/2 - K[u]] at the probe nodes, K the double layer on the probe boundary.
    pub fn functional(&self, u: &[Complex64]) -> Vec<f64> {
        let im = DVector::from_iterator(u.len(), u.iter().map(|z| z.im));
        let ku = &self.k_probe * &im;
        (0..u.len()).map(|i| 0.5 * im[i] - ku[i]).collect()
    }
}

/// Isotropic forward solve at one frequency.
pub fn forward_solve(scene: &ForwardScene, inc: &SuspensionInclusion, g: &[f64], omega: f64) -> Result<Vec<Complex64>> {
    let m = isotropic_value(&inc.tensor(omega)?)?;
    scene.solve_scalar(g, m * inc.f)
}

/// The boundary imaging functional of the measured potential.
pub fn imaging_functional(scene: &ForwardScene, u: &[Complex64]) -> Vec<f64> {
    scene.functional(u)
}

#[derive(Debug, Clone)]
pub struct DebyeEstimate {
    pub tau_hat: f64,
    pub omega_peak: f64,
    pub peak_value: f64,
    /// ||F(., omega)||_2 on the grid.
    pub norms: Vec<f64>,
}

fn functional_norm(scene: &ForwardScene, inc: &SuspensionInclusion, g: &[f64], omega: f64) -> Result<f64> {
    let u = forward_solve(scene, inc, g, omega)?;
    let f = scene.functional(&u);
    let w = &scene.probe().nodes().weights;
    Ok(f.iter().zip(w).map(|(v, w)| v * v * w).sum::<f64>().sqrt())
}

/// tau_hat = 1 / argmax_omega ||F(., omega)||_2 over the grid, refined by golden section.
pub fn estimate_debye(
    scene: &ForwardScene,
    inc: &SuspensionInclusion,
    g: &[f64],
    grid: &FrequencyGrid,
) -> Result<DebyeEstimate> {
    let norms = grid
        .omegas()
        .par_iter()
        .map(|&w| functional_norm(scene, inc, g, w))
        .collect::<Result<Vec<_>>>()?;
    let (omega_peak, peak_value) =
        refine_peak(grid.omegas(), &norms, |w| functional_norm(scene, inc, g, w), PEAK_TOLERANCE)?;
    Ok(DebyeEstimate {
        tau_hat: 1.0 / omega_peak,
        omega_peak,
        peak_value,
        norms,
    })
}

#[derive(Debug, Clone)]
pub struct AnisotropyStatistic {
    pub angles: Vec<f64>,
    /// S[a] = int g F[g] ds for g = a . n.
    pub values: Vec<f64>,
    pub s_min: f64,
    pub s_max: f64,
    /// min |S| / max |S|.
    pub ratio: f64,
}

/// S over `angles` equispaced directions in [0, pi).
pub fn anisotropy_statistic(
    scene: &ForwardScene,
    inc: &SuspensionInclusion,
    omega: f64,
    angles: usize,
) -> Result<AnisotropyStatistic> {
    if angles < 2 {
        return Err(Error::InvalidParameter("need at least two angles".into()));
    }
    let m = inc.tensor(omega)?;
    let thetas: Vec<f64> = (0..angles).map(|k| PI * k as f64 / angles as f64).collect();
    let values = thetas
        .par_iter()
        .map(|&th| {
            let a = Vec2::new(th.cos(), th.sin());
            let u = scene.solve_linear_anisotropic(a, inc.f, &m)?;
            let f = scene.functional(&u);
            let g = scene.probe().linear_pattern(a);
            Ok(scene.probe().integrate(&g.iter().zip(&f).map(|(a, b)| a * b).collect::<Vec<_>>()))
        })
        .collect::<Result<Vec<f64>>>()?;
    let s_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let s_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let big = mags.iter().copied().fold(0.0, f64::max);
    if !(big > 0.0) {
        return Err(Error::Precondition("anisotropy statistic vanishes for every direction".into()));
    }
    let small = mags.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(AnisotropyStatistic {
        angles: thetas,
        values,
        s_min,
        s_max,
        ratio: small / big,
    })
}

/// Raised-cosine band h(omega) = cos^2(pi (omega - center) / bandwidth) on
/// [center - bandwidth/2, center + bandwidth/2].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub center: f64,
    pub bandwidth: f64,
    /// Samples of the time grid on [-T, T], T = 20 / bandwidth.
    pub time_points: usize,
    /// Trapezoid nodes across the band.
    pub frequency_points: usize,
}

impl PulseSpec {
    pub fn new(center: f64, bandwidth: f64) -> Result<Self> {
        let p = Self {
            center,
            bandwidth,
            time_points: 801,
            frequency_points: 1001,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.center - 0.5 * self.bandwidth > 0.0 && self.center.is_finite()) {
            return Err(Error::InvalidParameter(
                "pulse band must have positive width and lie in omega > 0".into(),
            ));
        }
        if self.time_points < 2 || self.frequency_points < 3 {
            return Err(Error::InvalidParameter("pulse grids are too small".into()));
        }
        Ok(())
    }

    pub fn h_hat(&self, omega: f64) -> f64 {
        let x = (omega - self.center) / self.bandwidth;
        if x.abs() > 0.5 {
            0.0
        } else {
            (PI * x).cos().powi(2)
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - 0.5 * self.bandwidth, self.center + 0.5 * self.bandwidth)
    }

    pub fn half_window(&self) -> f64 {
        20.0 / self.bandwidth
    }

    pub fn times(&self) -> Vec<f64> {
        let t = self.half_window();
        let n = self.time_points;
        (0..n).map(|k| -t + 2.0 * t * k as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Debug, Clone)]
pub struct PulseResponse {
    pub times: Vec<f64>,
    pub tensors: Vec<CMat2>,
}

impl PulseResponse {
    /// max over t of the Frobenius norm.
    pub fn sup_norm(&self) -> f64 {
        self.tensors
            .iter()
            .map(|m| m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// M_i(t) = int h(omega) M_i(omega) e^{i omega t} d omega, trapezoid on a uniform grid of the band.
pub fn pulse_response(pulse: &PulseSpec, sources: &[&dyn PolarizationSource]) -> Result<Vec<PulseResponse>> {
    pulse.validate()?;
    let (lo, hi) = pulse.support();
    let n = pulse.frequency_points;
    let step = (hi - lo) / (n - 1) as f64;
    let omegas: Vec<f64> = (0..n).map(|k| lo + step * k as f64).collect();
    let weights: Vec<f64> = omegas
        .iter()
        .enumerate()
        .map(|(k, &w)| pulse.h_hat(w) * step * if k == 0 || k == n - 1 { 0.5 } else { 1.0 })
        .collect();
    let times = pulse.times();
    sources
        .iter()
        .map(|src| {
            let ms = omegas
                .iter()
                .map(|&w| src.tensor(w))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| match e {
                    Error::Precondition(msg) => Error::Precondition(format!("pulse band not covered: {msg}")),
                    other => other,
                })?;
            let tensors = times
                .par_iter()
                .map(|&t| {
                    let mut acc = CMat2::zeros();
                    for ((m, &w), &om) in ms.iter().zip(&weights).zip(&omegas) {
                        if w != 0.0 {
                            acc += m * (Complex64::from_polar(w, om * t));
                        }
                    }
                    acc
                })
                .collect();
            Ok(PulseResponse {
                times: times.clone(),
                tensors,
            })
        })
        .collect()
}
