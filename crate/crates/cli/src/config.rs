//! TOML run configuration. Everything is parsed and checked here, before any solve.

use std::path::Path;

use cellspec::effective::RandomOptions;
use cellspec::geometry::{Boundary, CellConfiguration, Curve, DeformationParams, Vec2};
use cellspec::imaging::{ProbeDomain, PulseSpec};
use cellspec::media::{FrequencyGrid, MembraneModel};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: Option<MembraneModel>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub geometry: Option<GeometrySpec>,
    #[serde(default)]
    pub mwf: Option<MwfSpec>,
    #[serde(default)]
    pub effective: Option<EffectiveSpec>,
    #[serde(default)]
    pub imaging: Option<ImagingSpec>,
    #[serde(default)]
    pub pulse: Option<PulseConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub points: Option<usize>,
    /// Explicit list; excludes the three keys above.
    pub omegas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Curves in free space, used as given.
    Free,
    /// Cells inside the unit square [0, 1]^2.
    Cell,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub frame: Frame,
    pub cells: Vec<CurveSpec>,
    /// Rescale the cells about their centroid to this volume fraction (cell frame only).
    pub volume_fraction: Option<f64>,
    /// Membrane thickness as a fraction of rho = sqrt(total cell area); overrides model.delta
    /// (cell frame only).
    pub delta_over_rho: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum CurveSpec {
    Circle {
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    Ellipse {
        a: f64,
        b: f64,
        #[serde(default)]
        center: [f64; 2],
        #[serde(default)]
        angle: f64,
    },
    Fourier {
        cos: Vec<[f64; 2]>,
        sin: Vec<[f64; 2]>,
        #[serde(default)]
        center: [f64; 2],
        #[serde(default)]
        angle: f64,
    },
}

impl CurveSpec {
    pub fn build(&self) -> cellspec::Result<Curve> {
        match self {
            CurveSpec::Circle { radius, center } => Curve::ellipse(*radius, *radius, vec2(center), 0.0),
            CurveSpec::Ellipse { a, b, center, angle } => Curve::ellipse(*a, *b, vec2(center), *angle),
            CurveSpec::Fourier { cos, sin, center, angle } => {
                Curve::fourier(cos.clone(), sin.clone())?.transform(vec2(center), *angle, 1.0)
            }
        }
    }
}

fn vec2(p: &[f64; 2]) -> Vec2 {
    Vec2::new(p[0], p[1])
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MwfSpec {
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSpec {
    Dilute,
    Periodic,
    Random,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveSpec {
    pub mode: ModeSpec,
    #[serde(default)]
    pub random: Option<RandomSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub nodes_per_curve: Option<usize>,
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub deformation: DeformationParams,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImagingSpec {
    pub probe_radius: f64,
    #[serde(default = "default_nodes")]
    pub probe_nodes: usize,
    pub inclusion: CurveSpec,
    #[serde(default = "default_nodes")]
    pub inclusion_nodes: usize,
    /// Volume fraction of cells inside the inclusion.
    pub fraction: f64,
    #[serde(default)]
    pub pattern: PatternSpec,
    /// Directions in [0, pi) for the anisotropy statistic.
    #[serde(default = "default_angles")]
    pub angles: usize,
}

fn default_nodes() -> usize {
    128
}

fn default_angles() -> usize {
    36
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PatternSpec {
    Linear { direction: [f64; 2] },
    Fourier { mode: usize, phase: f64 },
}

impl Default for PatternSpec {
    fn default() -> Self {
        PatternSpec::Linear { direction: [1.0, 0.0] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub center: f64,
    pub bandwidth: f64,
    pub time_points: Option<usize>,
    pub frequency_points: Option<usize>,
    pub suspensions: Vec<SuspensionSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuspensionSpec {
    pub name: String,
    pub geometry: GeometrySpec,
    /// Membrane thickness override for this suspension.
    pub delta: Option<f64>,
}

/// A checked geometry: either a free-space boundary or a unit-cell configuration.
#[derive(Debug, Clone)]
pub enum Cells {
    Free(Boundary),
    Cell(CellConfiguration),
}

#[derive(Debug, Clone)]
pub struct Imaging {
    pub probe: ProbeDomain,
    pub inclusion: Curve,
    pub inclusion_nodes: usize,
    pub fraction: f64,
    pub pattern: Vec<f64>,
    pub angles: usize,
}

#[derive(Debug, Clone)]
pub struct Suspension {
    pub name: String,
    pub cells: Cells,
    pub model: MembraneModel,
}

fn cfg_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| cfg_err(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn model(&self) -> Result<MembraneModel, CliError> {
        let m = match self.model {
            Some(m) => m,
            None => MembraneModel::eukaryote(0.7e-3).map_err(cfg_err)?,
        };
        m.validate().map_err(cfg_err)?;
        Ok(m)
    }

    pub fn grid(&self) -> Result<FrequencyGrid, CliError> {
        let Some(g) = &self.grid else {
            return Ok(FrequencyGrid::default_sweep());
        };
        match (&g.omegas, g.omega_min, g.omega_max, g.points) {
            (Some(list), None, None, None) => FrequencyGrid::new(list.clone()).map_err(cfg_err),
            (None, lo, hi, n) => FrequencyGrid::log_spaced(
                lo.unwrap_or(1e4),
                hi.unwrap_or(1e9),
                n.unwrap_or(200),
            )
            .map_err(cfg_err),
            _ => Err(cfg_err("grid: give either omegas or omega_min/omega_max/points")),
        }
    }

    pub fn cells(&self) -> Result<Cells, CliError> {
        let g = self.geometry.as_ref().ok_or_else(|| cfg_err("missing [geometry] section"))?;
        build_cells(g)
    }

    /// The model with delta = delta_over_rho * rho when the geometry asks for it.
    pub fn cell_model(&self, cells: &Cells) -> Result<MembraneModel, CliError> {
        let base = self.model()?;
        let g = self.geometry.as_ref().ok_or_else(|| cfg_err("missing [geometry] section"))?;
        scaled_model(base, g, cells)
    }

    pub fn cell_configuration(&self) -> Result<CellConfiguration, CliError> {
        match self.cells()? {
            Cells::Cell(c) => Ok(c),
            Cells::Free(_) => Err(cfg_err("this command needs geometry.frame = \"cell\"")),
        }
    }

    pub fn mwf_radius(&self) -> Result<f64, CliError> {
        let r = self.mwf.as_ref().ok_or_else(|| cfg_err("missing [mwf] section"))?.radius;
        if !(r > 0.0 && r.is_finite()) {
            return Err(cfg_err(format!("mwf.radius must be positive, got {r}")));
        }
        Ok(r)
    }

    pub fn random_options(&self, seed: Option<u64>) -> Result<Option<(DeformationParams, RandomOptions)>, CliError> {
        let Some(e) = &self.effective else {
            return Err(cfg_err("missing [effective] section"));
        };
        if e.mode != ModeSpec::Random {
            if e.random.is_some() {
                return Err(cfg_err("effective.random is only allowed with mode = \"random\""));
            }
            return Ok(None);
        }
        let r = e.random.clone().unwrap_or(RandomSpec {
            samples: None,
            seed: None,
            nodes_per_curve: None,
            tolerance: None,
            deformation: DeformationParams::default(),
        });
        r.deformation.validate().map_err(cfg_err)?;
        let defaults = RandomOptions::default();
        let opts = RandomOptions {
            samples: r.samples.unwrap_or(defaults.samples),
            seed: seed.or(r.seed).unwrap_or(defaults.seed),
            nodes_per_curve: r.nodes_per_curve,
            tolerance: r.tolerance,
        };
        if opts.samples == 0 {
            return Err(cfg_err("effective.random.samples must be positive"));
        }
        if let Some(n) = opts.nodes_per_curve {
            if n < 16 || n % 2 != 0 {
                return Err(cfg_err("effective.random.nodes_per_curve must be even and at least 16"));
            }
        }
        if opts.tolerance.is_some_and(|t| !(t > 0.0)) {
            return Err(cfg_err("effective.random.tolerance must be positive"));
        }
        Ok(Some((r.deformation, opts)))
    }

    pub fn mode(&self) -> Result<ModeSpec, CliError> {
        Ok(self.effective.as_ref().ok_or_else(|| cfg_err("missing [effective] section"))?.mode)
    }

    pub fn imaging(&self) -> Result<Imaging, CliError> {
        let s = self.imaging.as_ref().ok_or_else(|| cfg_err("missing [imaging] section"))?;
        let probe = ProbeDomain::new(s.probe_radius, s.probe_nodes).map_err(cfg_err)?;
        let inclusion = s.inclusion.build().map_err(cfg_err)?;
        if s.inclusion_nodes < 16 || s.inclusion_nodes % 2 != 0 {
            return Err(cfg_err("imaging.inclusion_nodes must be even and at least 16"));
        }
        if !(s.fraction >= 0.0 && s.fraction < 1.0) {
            return Err(cfg_err(format!("imaging.fraction must lie in [0, 1), got {}", s.fraction)));
        }
        let clearance = inclusion
            .discretize(256)
            .points
            .iter()
            .map(|p| s.probe_radius - p.norm())
            .fold(f64::INFINITY, f64::min);
        if !(clearance > 1e-3 * s.probe_radius) {
            return Err(cfg_err("imaging.inclusion must lie strictly inside the probe disk"));
        }
        let pattern = match &s.pattern {
            PatternSpec::Linear { direction } => {
                let a = vec2(direction);
                if !(a.norm() > 0.0 && a.norm().is_finite()) {
                    return Err(cfg_err("imaging.pattern.direction must be a nonzero vector"));
                }
                probe.linear_pattern(a)
            }
            PatternSpec::Fourier { mode, phase } => {
                if *mode == 0 || 2 * mode >= s.probe_nodes {
                    return Err(cfg_err("imaging.pattern.mode must lie in [1, probe_nodes / 2)"));
                }
                probe.fourier_pattern(*mode, *phase)
            }
        };
        probe.check_pattern(&pattern).map_err(cfg_err)?;
        if s.angles < 2 {
            return Err(cfg_err("imaging.angles must be at least 2"));
        }
        Ok(Imaging {
            probe,
            inclusion,
            inclusion_nodes: s.inclusion_nodes,
            fraction: s.fraction,
            pattern,
            angles: s.angles,
        })
    }

    pub fn pulse(&self) -> Result<(PulseSpec, Vec<Suspension>), CliError> {
        let p = self.pulse.as_ref().ok_or_else(|| cfg_err("missing [pulse] section"))?;
        let mut spec = PulseSpec::new(p.center, p.bandwidth).map_err(cfg_err)?;
        if let Some(n) = p.time_points {
            spec.time_points = n;
        }
        if let Some(n) = p.frequency_points {
            spec.frequency_points = n;
        }
        spec.validate().map_err(cfg_err)?;
        if p.suspensions.is_empty() {
            return Err(cfg_err("pulse.suspensions is empty"));
        }
        let base = self.model()?;
        let mut out = Vec::new();
        for s in &p.suspensions {
            let cells = build_cells(&s.geometry)?;
            let model = match s.delta {
                Some(_) if s.geometry.delta_over_rho.is_some() => {
                    return Err(cfg_err(format!("suspension {}: give delta or delta_over_rho, not both", s.name)));
                }
                Some(d) => {
                    let m = base.with_delta(d);
                    m.validate().map_err(cfg_err)?;
                    m
                }
                None => scaled_model(base, &s.geometry, &cells)?,
            };
            out.push(Suspension {
                name: s.name.clone(),
                cells,
                model,
            });
        }
        Ok((spec, out))
    }
}

fn scaled_model(base: MembraneModel, g: &GeometrySpec, cells: &Cells) -> Result<MembraneModel, CliError> {
    match (g.delta_over_rho, cells) {
        (None, _) => Ok(base),
        (Some(r), Cells::Cell(c)) => {
            if !(r > 0.0 && r.is_finite()) {
                return Err(cfg_err(format!("geometry.delta_over_rho must be positive, got {r}")));
            }
            let m = base.with_delta(r * c.rho());
            m.validate().map_err(cfg_err)?;
            Ok(m)
        }
        (Some(_), Cells::Free(_)) => Err(cfg_err("geometry.delta_over_rho needs frame = \"cell\"")),
    }
}

fn build_cells(g: &GeometrySpec) -> Result<Cells, CliError> {
    if g.cells.is_empty() {
        return Err(cfg_err("geometry.cells is empty"));
    }
    let curves = g
        .cells
        .iter()
        .map(|c| c.build())
        .collect::<cellspec::Result<Vec<_>>>()
        .map_err(cfg_err)?;
    match g.frame {
        Frame::Free => {
            if g.volume_fraction.is_some() {
                return Err(cfg_err("geometry.volume_fraction needs frame = \"cell\""));
            }
            Ok(Cells::Free(Boundary::new(curves).map_err(cfg_err)?))
        }
        Frame::Cell => match g.volume_fraction {
            Some(f) => {
                let b = Boundary::new(curves).map_err(cfg_err)?;
                Ok(Cells::Cell(CellConfiguration::centered(&b, f).map_err(cfg_err)?))
            }
            None => Ok(Cells::Cell(CellConfiguration::new(curves).map_err(cfg_err)?)),
        },
    }
}
