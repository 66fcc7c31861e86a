//! Nystrom discretisations of the layer operators on closed curves and dense solves.
//!
//! Conventions: G(x) = (1/2pi) ln|x|, S[phi](x) = int G(x-y) phi(y) ds(y),
//! D[phi](x) = int dG(x-y)/dn_y phi(y) ds(y), K* its adjoint (normal at x),
//! L = d/dn_x D. On a circle of radius r0, L has Fourier symbol |n|/(2 r0).

mod layer;
mod periodic;

pub use layer::{
    adjoint_double_layer_self, differentiation_matrix, double_layer_cross, double_layer_potential,
    double_layer_self, normal_derivative_cross, single_layer_cross, single_layer_potential, single_layer_self,
};
pub use periodic::{PeriodicGreen, EWALD_TOLERANCE};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{Boundary, CellConfiguration, CurveNodes, Vec2};

/// Default nodes per curve.
pub const DEFAULT_NODES: usize = 128;

/// Solves with a relative pivot below this are treated as singular.
const PIVOT_FLOOR: f64 = 1e-14;

/// Stacked node data of all curves of a boundary.
#[derive(Debug, Clone)]
pub struct Discretization {
    curves: Vec<CurveNodes>,
    offsets: Vec<usize>,
    total: usize,
}

impl Discretization {
    pub fn new(boundary: &Boundary, nodes_per_curve: usize) -> Self {
        Self::from_nodes(boundary.discretize(nodes_per_curve))
    }

    pub fn of_configuration(config: &CellConfiguration, nodes_per_curve: usize) -> Result<Self> {
        Ok(Self::new(&config.boundary()?, nodes_per_curve))
    }

    pub fn from_nodes(curves: Vec<CurveNodes>) -> Self {
        let mut offsets = Vec::with_capacity(curves.len());
        let mut total = 0;
        for c in &curves {
            offsets.push(total);
            total += c.len();
        }
        Self { curves, offsets, total }
    }

    pub fn curves(&self) -> &[CurveNodes] {
        &self.curves
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn offset(&self, curve: usize) -> usize {
        self.offsets[curve]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.curves.iter().map(CurveNodes::len).collect()
    }

    pub fn points(&self) -> Vec<Vec2> {
        self.curves.iter().flat_map(|c| c.points.iter().copied()).collect()
    }

    pub fn normals(&self) -> Vec<Vec2> {
        self.curves.iter().flat_map(|c| c.normal.iter().copied()).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.curves.iter().flat_map(|c| c.weights.iter().copied()).collect()
    }

    /// i-th component of the outward normal at every node.
    pub fn normal_component(&self, i: usize) -> DVector<f64> {
        DVector::from_iterator(self.total, self.curves.iter().flat_map(|c| c.normal.iter().map(move |n| n[i])))
    }

    pub fn arclength(&self) -> f64 {
        self.curves.iter().map(CurveNodes::arclength).sum()
    }
}

/// Free-space or unit-periodic Laplace kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Free,
    Periodic(PeriodicGreen),
}

impl Kernel {
    pub fn periodic() -> Result<Self> {
        Ok(Kernel::Periodic(PeriodicGreen::new()?))
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Kernel::Periodic(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    SingleLayer,
    DoubleLayer,
    AdjointDoubleLayer,
    Hypersingular,
    /// I + beta k0 L.
    HypersingularSystem,
}

/// Dense complex operator acting on stacked per-curve densities.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub kind: OperatorKind,
    pub periodic: bool,
    pub sizes: Vec<usize>,
    pub matrix: DMatrix<Complex64>,
}

impl OperatorMatrix {
    fn from_real(kind: OperatorKind, kernel: &Kernel, disc: &Discretization, m: DMatrix<f64>) -> Self {
        Self {
            kind,
            periodic: kernel.is_periodic(),
            sizes: disc.sizes(),
            matrix: m.map(|v| Complex64::new(v, 0.0)),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, density: &DensityGrid) -> DensityGrid {
        DensityGrid {
            sizes: density.sizes.clone(),
            values: &self.matrix * &density.values,
        }
    }
}

/// Per-curve complex node values, stacked.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub sizes: Vec<usize>,
    pub values: DVector<Complex64>,
}

impl DensityGrid {
    pub fn new(sizes: Vec<usize>, values: DVector<Complex64>) -> Result<Self> {
        if sizes.iter().sum::<usize>() != values.len() {
            return Err(Error::Precondition("density length does not match node counts".into()));
        }
        Ok(Self { sizes, values })
    }

    /// Samples f(curve index, nodes, local index) at every node.
    pub fn from_fn<F>(disc: &Discretization, f: F) -> Self
    where
        F: Fn(usize, &CurveNodes, usize) -> Complex64,
    {
        let mut values = Vec::with_capacity(disc.len());
        for (k, c) in disc.curves().iter().enumerate() {
            for j in 0..c.len() {
                values.push(f(k, c, j));
            }
        }
        Self {
            sizes: disc.sizes(),
            values: DVector::from_vec(values),
        }
    }

    pub fn real(disc: &Discretization, v: &DVector<f64>) -> Self {
        Self {
            sizes: disc.sizes(),
            values: v.map(|x| Complex64::new(x, 0.0)),
        }
    }

    pub fn curve(&self, k: usize) -> &[Complex64] {
        let start: usize = self.sizes[..k].iter().sum();
        &self.values.as_slice()[start..start + self.sizes[k]]
    }
}

pub fn single_layer_real(disc: &Discretization, kernel: &Kernel) -> DMatrix<f64> {
    layer::single_layer(disc, kernel)
}

pub fn double_layer_real(disc: &Discretization, kernel: &Kernel) -> DMatrix<f64> {
    layer::double_layer(disc, kernel, false)
}

pub fn adjoint_double_layer_real(disc: &Discretization, kernel: &Kernel) -> DMatrix<f64> {
    layer::double_layer(disc, kernel, true)
}

pub fn hypersingular_real(disc: &Discretization, kernel: &Kernel) -> DMatrix<f64> {
    layer::hypersingular(disc, kernel)
}

pub fn single_layer_matrix(disc: &Discretization, kernel: &Kernel) -> OperatorMatrix {
    OperatorMatrix::from_real(OperatorKind::SingleLayer, kernel, disc, single_layer_real(disc, kernel))
}

pub fn double_layer_matrix(disc: &Discretization, kernel: &Kernel) -> OperatorMatrix {
    OperatorMatrix::from_real(OperatorKind::DoubleLayer, kernel, disc, double_layer_real(disc, kernel))
}

pub fn adjoint_double_layer_matrix(disc: &Discretization, kernel: &Kernel) -> OperatorMatrix {
    OperatorMatrix::from_real(
        OperatorKind::AdjointDoubleLayer,
        kernel,
        disc,
        adjoint_double_layer_real(disc, kernel),
    )
}

/// The real hypersingular operator together with I + alpha L assembly.
#[derive(Debug, Clone)]
pub struct HypersingularOperator {
    pub l: DMatrix<f64>,
    pub periodic: bool,
    pub sizes: Vec<usize>,
}

impl HypersingularOperator {
    pub fn new(disc: &Discretization, kernel: &Kernel) -> Self {
        Self {
            l: hypersingular_real(disc, kernel),
            periodic: kernel.is_periodic(),
            sizes: disc.sizes(),
        }
    }

    /// I + alpha L, requiring Re(alpha) > 0 unless alpha = 0.
    pub fn system(&self, alpha: Complex64) -> Result<OperatorMatrix> {
        check_coercive(alpha)?;
        let n = self.l.nrows();
        let mut m = self.l.map(|v| alpha * v);
        for i in 0..n {
            m[(i, i)] += 1.0;
        }
        Ok(OperatorMatrix {
            kind: OperatorKind::HypersingularSystem,
            periodic: self.periodic,
            sizes: self.sizes.clone(),
            matrix: m,
        })
    }
}

pub(crate) fn check_coercive(alpha: Complex64) -> Result<()> {
    if alpha != Complex64::new(0.0, 0.0) && !(alpha.re > 0.0) {
        return Err(Error::Precondition(format!(
            "I + alpha L needs Re(alpha) > 0, got alpha = {alpha}"
        )));
    }
    if !(alpha.re.is_finite() && alpha.im.is_finite()) {
        return Err(Error::Precondition("alpha is not finite".into()));
    }
    Ok(())
}

pub fn hypersingular_matrix(disc: &Discretization, kernel: &Kernel, beta_k0: Complex64) -> Result<OperatorMatrix> {
    check_coercive(beta_k0)?;
    HypersingularOperator::new(disc, kernel).system(beta_k0)
}

/// Dense LU solve with partial pivoting; returns the solution and ||Ax - b|| / ||b||.
pub fn lu_solve(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<(DMatrix<Complex64>, f64)> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::Precondition(format!(
            "system is {}x{} with a right-hand side of {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    if a.iter().chain(b.iter()).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Precondition("system has non-finite entries".into()));
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let mut pmax: f64 = 0.0;
    let mut pmin = f64::INFINITY;
    for i in 0..u.nrows() {
        let p = u[(i, i)].norm();
        pmax = pmax.max(p);
        pmin = pmin.min(p);
    }
    let ratio = if pmax > 0.0 { pmin / pmax } else { 0.0 };
    if ratio < PIVOT_FLOOR {
        return Err(Error::SingularMatrix { pivot_ratio: ratio });
    }
    let x = lu.solve(b).ok_or(Error::SingularMatrix { pivot_ratio: ratio })?;
    let bn = b.norm();
    let res = (a * &x - b).norm();
    Ok((x, if bn > 0.0 { res / bn } else { res }))
}

/// Solves system * x = rhs.
pub fn solve(system: &OperatorMatrix, rhs: &DensityGrid) -> Result<(DensityGrid, f64)> {
    let b = DMatrix::from_column_slice(rhs.values.len(), 1, rhs.values.as_slice());
    let (x, res) = lu_solve(&system.matrix, &b)?;
    Ok((
        DensityGrid {
            sizes: rhs.sizes.clone(),
            values: x.column(0).into_owned(),
        },
        res,
    ))
}

#[cfg(test)]
mod tests;
