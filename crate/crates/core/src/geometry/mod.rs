//! Closed curves, multi-curve boundaries, unit-cell configurations and random deformations.

mod curve;
mod deform;

pub use curve::{
    enclosed_area, make_circle, make_ellipse, rotation, transform, Curve, CurveNodes, FourierShape, Mat2,
    Shape, Vec2,
};
pub use deform::{sample_deformation, DeformationParams, DeformationSample};

use crate::error::{Error, Result};

/// Minimum gap between distinct curves and between curves and the cell wall.
pub const GAP_MARGIN: f64 = 1e-3;

const GAP_SAMPLES: usize = 256;

/// One or more pairwise disjoint, non-nested closed curves.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    curves: Vec<Curve>,
}

impl Boundary {
    pub fn new(curves: Vec<Curve>) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::InvalidGeometry("boundary has no curves".into()));
        }
        let samples: Vec<_> = curves.iter().map(|c| c.discretize(GAP_SAMPLES).points).collect();
        for i in 0..curves.len() {
            for j in i + 1..curves.len() {
                let gap = min_distance(&samples[i], &samples[j]);
                if gap <= GAP_MARGIN {
                    return Err(Error::InvalidGeometry(format!(
                        "curves {i} and {j} are closer than {GAP_MARGIN} (gap {gap:.3e})"
                    )));
                }
                if curves[j].contains(samples[i][0]) || curves[i].contains(samples[j][0]) {
                    return Err(Error::InvalidGeometry(format!("curves {i} and {j} are nested")));
                }
            }
        }
        Ok(Self { curves })
    }

    pub fn single(curve: Curve) -> Self {
        Self { curves: vec![curve] }
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn total_area(&self) -> f64 {
        self.curves.iter().map(Curve::enclosed_area).sum()
    }

    pub fn arclength(&self) -> f64 {
        self.curves.iter().map(Curve::arclength).sum()
    }

    /// Area-weighted centroid of the enclosed regions.
    pub fn centroid(&self) -> Vec2 {
        let mut acc = Vec2::zeros();
        let mut area = 0.0;
        for c in &self.curves {
            let a = c.enclosed_area();
            acc += c.centroid() * a;
            area += a;
        }
        acc / area
    }

    pub fn transform(&self, translation: Vec2, rotation_angle: f64, scale: f64) -> Result<Self> {
        let curves = self
            .curves
            .iter()
            .map(|c| c.transform(translation, rotation_angle, scale))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { curves })
    }

    pub fn affine(&self, a: Mat2, b: Vec2) -> Result<Self> {
        let curves = self.curves.iter().map(|c| c.affine(a, b)).collect::<Result<Vec<_>>>()?;
        Self::new(curves)
    }

    pub fn discretize(&self, n: usize) -> Vec<CurveNodes> {
        self.curves.iter().map(|c| c.discretize(n)).collect()
    }
}

fn min_distance(a: &[Vec2], b: &[Vec2]) -> f64 {
    let mut best = f64::INFINITY;
    for p in a {
        for q in b {
            best = best.min((p - q).norm_squared());
        }
    }
    best.sqrt()
}

/// Cells inside the unit square Y = [0, 1]^2.
#[derive(Debug, Clone, PartialEq)]
pub struct CellConfiguration {
    curves: Vec<Curve>,
    rho: f64,
    f: f64,
}

impl CellConfiguration {
    pub fn new(curves: Vec<Curve>) -> Result<Self> {
        if curves.is_empty() {
            return Ok(Self::empty());
        }
        let boundary = Boundary::new(curves)?;
        let clearance = wall_clearance(boundary.curves());
        if clearance <= GAP_MARGIN {
            return Err(Error::InvalidGeometry(format!(
                "cells must lie strictly inside the unit square (clearance {clearance:.3e})"
            )));
        }
        let f = boundary.total_area();
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidGeometry(format!("volume fraction {f} outside (0, 1)")));
        }
        Ok(Self {
            curves: boundary.curves,
            rho: f.sqrt(),
            f,
        })
    }

    pub fn empty() -> Self {
        Self {
            curves: Vec::new(),
            rho: 0.0,
            f: 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn volume_fraction(&self) -> f64 {
        self.f
    }

    /// Distance from the cells to the cell wall.
    pub fn wall_clearance(&self) -> f64 {
        wall_clearance(&self.curves)
    }

    pub fn boundary(&self) -> Result<Boundary> {
        if self.is_empty() {
            return Err(Error::InvalidGeometry("configuration is empty".into()));
        }
        Ok(Boundary {
            curves: self.curves.clone(),
        })
    }

    /// The cells translated to their centroid and scaled by 1/rho (unit total area).
    pub fn rescaled(&self) -> Result<Boundary> {
        let b = self.boundary()?;
        let c = b.centroid();
        let s = 1.0 / self.rho;
        b.transform(-c * s, 0.0, s)
    }

    /// The given cells scaled about their centroid and placed at the centre of the unit square.
    pub fn centered(boundary: &Boundary, volume_fraction: f64) -> Result<Self> {
        if !(volume_fraction > 0.0 && volume_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "volume fraction must lie in (0, 1), got {volume_fraction}"
            )));
        }
        let s = (volume_fraction / boundary.total_area()).sqrt();
        let c = boundary.centroid();
        let moved = boundary.transform(Vec2::new(0.5, 0.5) - c * s, 0.0, s)?;
        Self::new(moved.curves)
    }
}

fn wall_clearance(curves: &[Curve]) -> f64 {
    let mut best = f64::INFINITY;
    for c in curves {
        for p in c.discretize(GAP_SAMPLES).points {
            best = best.min(p.x).min(1.0 - p.x).min(p.y).min(1.0 - p.y);
        }
    }
    best
}
