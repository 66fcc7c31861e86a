//! Effective admittivity of a suspension: dilute expansion, periodic cell problem and
//! Monte-Carlo average over randomly deformed cells.

use nalgebra::Matrix2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::boundary_ops::Kernel;
use crate::error::{Error, Result};
use crate::geometry::{sample_deformation, Boundary, CellConfiguration, DeformationParams};
use crate::media::{FrequencyGrid, MembraneModel};
use crate::polarization::{cell_problem, BemPolarization, CMat2, PolarizationSolver, PolarizationSource};

/// Relative symmetry tolerance on K*.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Default Monte-Carlo sample count.
pub const DEFAULT_SAMPLES: usize = 64;

const SINGULAR_FLOOR: f64 = 1e-12;
const BAND_DIRECTIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectiveMode {
    Dilute,
    Periodic,
    Random,
}

impl EffectiveMode {
    pub fn name(&self) -> &'static str {
        match self {
            EffectiveMode::Dilute => "dilute",
            EffectiveMode::Periodic => "periodic",
            EffectiveMode::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveDiagnostics {
    pub f: f64,
    pub samples: usize,
    /// Largest standard error over the entries of K* (random mode), else 0.
    pub std_error: f64,
    /// Set when the standard error exceeds the requested tolerance.
    pub insufficient_samples: bool,
    /// varrho averaged over the samples; 1 outside random mode.
    pub volume_factor: f64,
    /// Sample mean of M (random mode) or the single M used (dilute).
    pub mean_m: Option<CMat2>,
}

impl EffectiveDiagnostics {
    fn plain(f: f64, m: Option<CMat2>) -> Self {
        Self {
            f,
            samples: 1,
            std_error: 0.0,
            insufficient_samples: false,
            volume_factor: 1.0,
            mean_m: m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveTensor {
    pub omega: f64,
    pub k0: Complex64,
    pub k_star: CMat2,
    pub mode: EffectiveMode,
    pub diagnostics: EffectiveDiagnostics,
}

impl EffectiveTensor {
    pub fn symmetry_defect(&self) -> f64 {
        (self.k_star[(0, 1)] - self.k_star[(1, 0)]).norm()
    }

    /// (min, max) of Re(xi^T K* xi) / |k0| over real unit vectors.
    pub fn coercivity_band(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..BAND_DIRECTIONS {
            let th = std::f64::consts::PI * k as f64 / BAND_DIRECTIONS as f64;
            let (s, c) = th.sin_cos();
            let q = self.k_star[(0, 0)] * c * c
                + (self.k_star[(0, 1)] + self.k_star[(1, 0)]) * c * s
                + self.k_star[(1, 1)] * s * s;
            let v = q.re / self.k0.norm();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Symmetry and a positive coercivity band.
    pub fn check(&self) -> Result<()> {
        let scale = self.k_star.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if self.symmetry_defect() > SYMMETRY_TOLERANCE * scale {
            return Err(Error::Precondition(format!(
                "K* at omega = {} is not symmetric (defect {:.3e})",
                self.omega,
                self.symmetry_defect()
            )));
        }
        let (lo, hi) = self.coercivity_band();
        if !(lo > 0.0 && hi.is_finite()) {
            return Err(Error::Precondition(format!(
                "K* at omega = {} is not coercive (band [{lo:.3e}, {hi:.3e}])",
                self.omega
            )));
        }
        Ok(())
    }
}

fn scalar(z: Complex64) -> CMat2 {
    CMat2::identity() * z
}

/// k0 (I + f M (I - f M / 2)^{-1}).
pub fn dilute_from_tensor(m: &CMat2, f: f64, k0: Complex64) -> Result<CMat2> {
    let one = CMat2::identity();
    let g = Complex64::new(f, 0.0);
    let a = one - m * (g * 0.5);
    let det = a.determinant();
    let scale = 1.0 + a.iter().map(|z| z.norm()).fold(0.0, f64::max).powi(2);
    if !(det.norm() > SINGULAR_FLOOR * scale) {
        return Err(Error::NearSingular { det: det.norm() });
    }
    let inv = a.try_inverse().ok_or(Error::NearSingular { det: det.norm() })?;
    Ok((one + m * g * inv) * k0)
}

fn empty_sweep(model: &MembraneModel, grid: &FrequencyGrid, mode: EffectiveMode) -> Vec<EffectiveTensor> {
    grid.omegas()
        .iter()
        .map(|&omega| {
            let k0 = model.admittivity_k0(omega);
            EffectiveTensor {
                omega,
                k0,
                k_star: scalar(k0),
                mode,
                diagnostics: EffectiveDiagnostics::plain(0.0, None),
            }
        })
        .collect()
}

/// Dilute expansion on a frequency sweep; one boundary discretisation serves all frequencies.
pub fn dilute_sweep(config: &CellConfiguration, model: &MembraneModel, grid: &FrequencyGrid) -> Result<Vec<EffectiveTensor>> {
    model.validate()?;
    if config.is_empty() {
        return Ok(empty_sweep(model, grid, EffectiveMode::Dilute));
    }
    let (boundary, cell_model) = cell_problem(config, model)?;
    let source = BemPolarization::new(&boundary, &cell_model, grid)?;
    let f = config.volume_fraction();
    grid.omegas()
        .par_iter()
        .map(|&omega| {
            let m = source.tensor(omega)?;
            let k0 = model.admittivity_k0(omega);
            Ok(EffectiveTensor {
                omega,
                k0,
                k_star: dilute_from_tensor(&m, f, k0)?,
                mode: EffectiveMode::Dilute,
                diagnostics: EffectiveDiagnostics::plain(f, Some(m)),
            })
        })
        .collect()
}

pub fn dilute_effective(config: &CellConfiguration, model: &MembraneModel, omega: f64) -> Result<EffectiveTensor> {
    Ok(dilute_sweep(config, model, &FrequencyGrid::new(vec![omega])?)?[0])
}

/// K*_ij = k0 (delta_ij - beta k0 int (I + beta k0 L~)^{-1}[n_i] n_j ds) with the periodic
/// hypersingular operator on the cells as they sit in the unit cell.
pub fn periodic_sweep(config: &CellConfiguration, model: &MembraneModel, grid: &FrequencyGrid) -> Result<Vec<EffectiveTensor>> {
    model.validate()?;
    if config.is_empty() {
        return Ok(empty_sweep(model, grid, EffectiveMode::Periodic));
    }
    let boundary = config.boundary()?;
    let alphas = [grid.min(), (grid.min() * grid.max()).sqrt(), grid.max()]
        .iter()
        .map(|&w| model.beta_k0(w))
        .collect::<Result<Vec<_>>>()?;
    let solver = PolarizationSolver::adaptive(&boundary, &Kernel::periodic()?, &alphas)?;
    let f = config.volume_fraction();
    grid.omegas()
        .par_iter()
        .map(|&omega| {
            let mp = solver.tensor_alpha(model.beta_k0(omega)?)?;
            let k0 = model.admittivity_k0(omega);
            Ok(EffectiveTensor {
                omega,
                k0,
                k_star: (CMat2::identity() + mp) * k0,
                mode: EffectiveMode::Periodic,
                diagnostics: EffectiveDiagnostics::plain(f, None),
            })
        })
        .collect()
}

pub fn periodic_effective(config: &CellConfiguration, model: &MembraneModel, omega: f64) -> Result<EffectiveTensor> {
    Ok(periodic_sweep(config, model, &FrequencyGrid::new(vec![omega])?)?[0])
}

/// Reference cells and the law of the random map applied to them.
#[derive(Debug, Clone)]
pub struct RandomEnsemble {
    pub config: CellConfiguration,
    pub params: DeformationParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomOptions {
    pub samples: usize,
    pub seed: u64,
    /// Nodes per curve; adaptive refinement when None.
    pub nodes_per_curve: Option<usize>,
    /// Flag the result when the standard error exceeds this.
    pub tolerance: Option<f64>,
}

impl Default for RandomOptions {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            nodes_per_curve: None,
            tolerance: None,
        }
    }
}

/// Running mean and squared deviations of complex 2x2 samples.
#[derive(Debug, Clone, Copy)]
struct Welford {
    count: usize,
    mean: CMat2,
    m2: Matrix2<f64>,
}

impl Welford {
    fn new() -> Self {
        Self {
            count: 0,
            mean: CMat2::zeros(),
            m2: Matrix2::zeros(),
        }
    }

    fn push(&mut self, x: &CMat2) {
        self.count += 1;
        let n = self.count as f64;
        for k in 0..4 {
            let d = x[k] - self.mean[k];
            self.mean[k] += d / n;
            let d2 = x[k] - self.mean[k];
            self.m2[k] += (d.conj() * d2).re;
        }
    }

    /// Standard error of the mean, per entry.
    fn std_error(&self) -> Matrix2<f64> {
        if self.count < 2 {
            return Matrix2::zeros();
        }
        let n = self.count as f64;
        self.m2.map(|v| (v.max(0.0) / (n - 1.0) / n).sqrt())
    }
}

fn sample_source(
    ensemble: &RandomEnsemble,
    model: &MembraneModel,
    grid: &FrequencyGrid,
    opts: &RandomOptions,
    stream: u64,
) -> Result<(BemPolarization, f64)> {
    let sample = sample_deformation(&ensemble.params, &ensemble.config, opts.seed, stream)?;
    let deformed = sample.apply(&ensemble.config)?;
    // rescale by the reference rho so the deformation itself is not normalised away
    let rho = ensemble.config.rho();
    let b = deformed.boundary()?;
    let c = b.centroid();
    let s = 1.0 / rho;
    let boundary: Boundary = b.transform(-c * s, 0.0, s)?;
    let cell_model = model.with_delta(model.delta / rho);
    let source = match opts.nodes_per_curve {
        Some(n) => BemPolarization::with_nodes(&boundary, &cell_model, n)?,
        None => BemPolarization::new(&boundary, &cell_model, grid)?,
    };
    Ok((source, sample.volume_factor()))
}

/// K* = k0 (I + g Mbar (I - g Mbar / 2)^{-1}) with g = varrho f and Mbar the sample mean of M
/// over the deformed, rescaled cells.
pub fn random_dilute_sweep(
    ensemble: &RandomEnsemble,
    model: &MembraneModel,
    grid: &FrequencyGrid,
    opts: &RandomOptions,
) -> Result<Vec<EffectiveTensor>> {
    model.validate()?;
    if opts.samples == 0 {
        return Err(Error::InvalidParameter("random mode needs at least one sample".into()));
    }
    if ensemble.config.is_empty() {
        return Ok(empty_sweep(model, grid, EffectiveMode::Random));
    }
    let per_sample: Vec<(Vec<CMat2>, f64)> = (0..opts.samples as u64)
        .into_par_iter()
        .map(|stream| {
            let (source, varrho) = sample_source(ensemble, model, grid, opts, stream)?;
            let ms = grid.omegas().iter().map(|&w| source.tensor(w)).collect::<Result<Vec<_>>>()?;
            Ok((ms, varrho))
        })
        .collect::<Result<_>>()?;

    // fixed summation order keeps the result independent of the thread count
    let varrho = per_sample.iter().map(|(_, v)| v).sum::<f64>() / opts.samples as f64;
    let f = ensemble.config.volume_fraction();
    let g = varrho * f;
    grid.omegas()
        .iter()
        .enumerate()
        .map(|(k, &omega)| {
            let mut acc = Welford::new();
            for (ms, _) in &per_sample {
                acc.push(&ms[k]);
            }
            let k0 = model.admittivity_k0(omega);
            let k_star = dilute_from_tensor(&acc.mean, g, k0)?;
            let se_m = acc.std_error().max();
            let std_error = se_m * g * k0.norm();
            Ok(EffectiveTensor {
                omega,
                k0,
                k_star,
                mode: EffectiveMode::Random,
                diagnostics: EffectiveDiagnostics {
                    f,
                    samples: opts.samples,
                    std_error,
                    insufficient_samples: opts.tolerance.is_some_and(|t| std_error > t),
                    volume_factor: varrho,
                    mean_m: Some(acc.mean),
                },
            })
        })
        .collect()
}

pub fn random_dilute_effective(
    ensemble: &RandomEnsemble,
    model: &MembraneModel,
    omega: f64,
    opts: &RandomOptions,
) -> Result<EffectiveTensor> {
    Ok(random_dilute_sweep(ensemble, model, &FrequencyGrid::new(vec![omega])?, opts)?[0])
}
