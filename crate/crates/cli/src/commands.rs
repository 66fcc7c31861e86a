use std::sync::Arc;

use cellspec::effective::{dilute_sweep, periodic_sweep, random_dilute_sweep, EffectiveTensor, RandomEnsemble};
use cellspec::imaging::{
    anisotropy_statistic, estimate_debye, forward_solve, imaging_functional, pulse_response, ForwardScene,
    SuspensionInclusion,
};
use cellspec::media::{FrequencyGrid, MembraneModel};
use cellspec::polarization::{
    anisotropy_ratio, configuration_spectrum, mwf_circle, mwf_peak_frequency, spectrum, spectrum_of, CMat2,
    MwfCircle, PolarizationSource, PolarizationSpectrum, TabulatedPolarization,
};
use serde_json::{json, Value};

use crate::config::{Cells, ModeSpec, RunConfig};
use crate::output::{Output, Table};
use crate::CliError;

fn num(e: cellspec::Error) -> CliError {
    CliError::Numerical(e.to_string())
}

fn cells_spectrum(cells: &Cells, model: &MembraneModel, grid: &FrequencyGrid) -> Result<PolarizationSpectrum, CliError> {
    match cells {
        Cells::Free(b) => spectrum(b, model, grid),
        Cells::Cell(c) => configuration_spectrum(c, model, grid),
    }
    .map_err(num)
}

fn tensor_columns(m: &CMat2) -> [f64; 6] {
    [m[(0, 0)].re, m[(0, 0)].im, m[(0, 1)].re, m[(0, 1)].im, m[(1, 1)].re, m[(1, 1)].im]
}

pub fn mwf(cfg: &RunConfig) -> Result<Output, CliError> {
    let model = cfg.model()?;
    let grid = cfg.grid()?;
    let r0 = cfg.mwf_radius()?;
    let omega_star = mwf_peak_frequency(&model, r0);
    let mut table = Table::new(&["omega", "re_m", "im_m", "omega_star"]);
    for &w in grid.omegas() {
        let m = mwf_circle(&model, w, r0).map_err(num)?.m[(0, 0)];
        table.row(&[w, m.re, m.im, omega_star]);
    }
    let swept = spectrum_of(&MwfCircle { model, r0 }, &grid).map_err(num)?;
    let mut out = Output::default();
    out.csv("mwf.csv", table);
    out.json(
        "mwf.json",
        json!({
            "radius": r0,
            "omega_star": omega_star,
            "tau": 1.0 / omega_star,
            "omega_peak_sweep": 1.0 / swept.tau1,
        }),
    );
    Ok(out)
}

pub fn spectrum_cmd(cfg: &RunConfig) -> Result<Output, CliError> {
    let grid = cfg.grid()?;
    let cells = cfg.cells()?;
    let model = cfg.cell_model(&cells)?;
    let spec = cells_spectrum(&cells, &model, &grid)?;
    let ratio = anisotropy_ratio(&spec).map_err(num)?;
    let mut table = Table::new(&[
        "omega", "m11_re", "m11_im", "m12_re", "m12_im", "m22_re", "m22_im", "lambda1", "lambda2", "ratio",
    ]);
    for (k, t) in spec.tensors.iter().enumerate() {
        let c = tensor_columns(&t.m);
        table.row(&[t.omega, c[0], c[1], c[2], c[3], c[4], c[5], spec.lambda1[k], spec.lambda2[k], ratio[k]]);
    }
    let (frame, f) = match &cells {
        Cells::Free(_) => ("free", Value::Null),
        Cells::Cell(c) => ("cell", json!(c.volume_fraction())),
    };
    let delta = model.delta;
    let mut out = Output::default();
    out.csv("spectrum.csv", table);
    out.json(
        "debye.json",
        json!({
            "frame": frame,
            "volume_fraction": f,
            "delta": delta,
            "tau1": spec.tau1,
            "tau2": spec.tau2,
            "omega1": 1.0 / spec.tau1,
            "omega2": 1.0 / spec.tau2,
            "nodes_per_curve": spec.nodes_per_curve,
        }),
    );
    Ok(out)
}

pub fn effective(cfg: &RunConfig, seed: Option<u64>) -> Result<Output, CliError> {
    let grid = cfg.grid()?;
    let config = cfg.cell_configuration()?;
    let model = cfg.cell_model(&Cells::Cell(config.clone()))?;
    let mode = cfg.mode()?;
    let random = cfg.random_options(seed)?;
    let sweep: Vec<EffectiveTensor> = match mode {
        ModeSpec::Dilute => dilute_sweep(&config, &model, &grid),
        ModeSpec::Periodic => periodic_sweep(&config, &model, &grid),
        ModeSpec::Random => {
            let (params, opts) = random.clone().expect("random options validated");
            random_dilute_sweep(&RandomEnsemble { config: config.clone(), params }, &model, &grid, &opts)
        }
    }
    .map_err(num)?;
    let mut table = Table::new(&[
        "omega", "k11_re", "k11_im", "k12_re", "k12_im", "k22_re", "k22_im", "band_lo", "band_hi", "std_error",
    ]);
    for e in &sweep {
        e.check().map_err(num)?;
        let c = tensor_columns(&e.k_star);
        let (lo, hi) = e.coercivity_band();
        table.row(&[e.omega, c[0], c[1], c[2], c[3], c[4], c[5], lo, hi, e.diagnostics.std_error]);
    }
    let flagged = sweep.iter().filter(|e| e.diagnostics.insufficient_samples).count();
    let max_se = sweep.iter().map(|e| e.diagnostics.std_error).fold(0.0, f64::max);
    let (samples, seed) = match &random {
        Some((_, o)) => (json!(o.samples), json!(o.seed)),
        None => (json!(1), Value::Null),
    };
    let mut out = Output::default();
    out.csv("effective.csv", table);
    out.json(
        "effective.json",
        json!({
            "mode": sweep.first().map(|e| e.mode.name()).unwrap_or("none"),
            "volume_fraction": config.volume_fraction(),
            "volume_factor": sweep.first().map(|e| e.diagnostics.volume_factor),
            "samples": samples,
            "seed": seed,
            "max_std_error": max_se,
            "insufficient_samples": flagged,
        }),
    );
    Ok(out)
}

struct Scene {
    scene: ForwardScene,
    inclusion: SuspensionInclusion,
    spectrum: PolarizationSpectrum,
    pattern: Vec<f64>,
    angles: usize,
}

fn scene(cfg: &RunConfig) -> Result<(Scene, FrequencyGrid), CliError> {
    let grid = cfg.grid()?;
    let cells = cfg.cells()?;
    let model = cfg.cell_model(&cells)?;
    let im = cfg.imaging()?;
    let spec = cells_spectrum(&cells, &model, &grid)?;
    let source: Arc<dyn PolarizationSource> = Arc::new(TabulatedPolarization::from_spectrum(&spec).map_err(num)?);
    let scene = ForwardScene::new(im.probe, &im.inclusion, im.inclusion_nodes).map_err(num)?;
    let inclusion = SuspensionInclusion::new(im.inclusion, im.fraction, source).map_err(num)?;
    Ok((
        Scene {
            scene,
            inclusion,
            spectrum: spec,
            pattern: im.pattern,
            angles: im.angles,
        },
        grid,
    ))
}

pub fn forward(cfg: &RunConfig) -> Result<Output, CliError> {
    let (s, grid) = scene(cfg)?;
    let nodes = s.scene.probe().nodes();
    let mut table = Table::new(&["omega", "node_index", "x", "y", "re_u", "im_u"]);
    let mut peak = 0.0f64;
    for &w in grid.omegas() {
        let u = forward_solve(&s.scene, &s.inclusion, &s.pattern, w).map_err(num)?;
        for (i, z) in u.iter().enumerate() {
            table.row(&[w, i as f64, nodes.points[i].x, nodes.points[i].y, z.re, z.im]);
            peak = peak.max(z.im.abs());
        }
    }
    let mut out = Output::default();
    out.csv("forward.csv", table);
    out.json(
        "forward.json",
        json!({
            "nodes": nodes.len(),
            "frequencies": grid.omegas().len(),
            "fraction": s.inclusion.f,
            "max_abs_im_u": peak,
        }),
    );
    Ok(out)
}

pub fn image(cfg: &RunConfig) -> Result<Output, CliError> {
    let (s, grid) = scene(cfg)?;
    let mut table = Table::new(&["omega", "functional_norm"]);
    let report = if s.inclusion.f == 0.0 {
        let w = &s.scene.probe().nodes().weights;
        for &om in grid.omegas() {
            let u = forward_solve(&s.scene, &s.inclusion, &s.pattern, om).map_err(num)?;
            let f = imaging_functional(&s.scene, &u);
            table.row(&[om, f.iter().zip(w).map(|(v, w)| v * v * w).sum::<f64>().sqrt()]);
        }
        json!({
            "null": true,
            "tau_hat": Value::Null,
            "omega_peak": Value::Null,
            "peak_value": 0.0,
            "tau1": s.spectrum.tau1,
            "tau2": s.spectrum.tau2,
        })
    } else {
        let est = estimate_debye(&s.scene, &s.inclusion, &s.pattern, &grid).map_err(num)?;
        for (&om, n) in grid.omegas().iter().zip(&est.norms) {
            table.row(&[om, *n]);
        }
        json!({
            "null": false,
            "tau_hat": est.tau_hat,
            "omega_peak": est.omega_peak,
            "peak_value": est.peak_value,
            "tau1": s.spectrum.tau1,
            "tau2": s.spectrum.tau2,
            "relative_error": (est.tau_hat - s.spectrum.tau1).abs() / s.spectrum.tau1,
        })
    };
    let mut out = Output::default();
    out.csv("functional.csv", table);
    out.json("image.json", report);
    Ok(out)
}

pub fn anisotropy(cfg: &RunConfig) -> Result<Output, CliError> {
    let (s, grid) = scene(cfg)?;
    if s.inclusion.f == 0.0 {
        return Err(CliError::Config("anisotropy statistic needs imaging.fraction > 0".into()));
    }
    let ratio = anisotropy_ratio(&s.spectrum).map_err(num)?;
    let mut table = Table::new(&["omega", "s_min", "s_max", "ratio", "lambda_ratio"]);
    let mut ratios = Vec::new();
    for (k, &w) in grid.omegas().iter().enumerate() {
        let st = anisotropy_statistic(&s.scene, &s.inclusion, w, s.angles).map_err(num)?;
        table.row(&[w, st.s_min, st.s_max, st.ratio, ratio[k]]);
        ratios.push(st.ratio);
    }
    let mut out = Output::default();
    out.csv("anisotropy.csv", table);
    out.json(
        "anisotropy.json",
        json!({
            "angles": s.angles,
            "ratio_first": ratios.first(),
            "ratio_last": ratios.last(),
            "ratio_min": ratios.iter().copied().fold(f64::INFINITY, f64::min),
            "ratio_max": ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }),
    );
    Ok(out)
}

pub fn pulse(cfg: &RunConfig) -> Result<Output, CliError> {
    let grid = cfg.grid()?;
    let (spec, suspensions) = cfg.pulse()?;
    let (lo, hi) = spec.support();
    let omegas = grid.omegas();
    if lo < omegas[0] || hi > omegas[omegas.len() - 1] {
        return Err(CliError::Config(format!(
            "frequency grid [{}, {}] does not cover the pulse band [{lo}, {hi}]",
            omegas[0],
            omegas[omegas.len() - 1]
        )));
    }
    let tables = suspensions
        .iter()
        .map(|s| {
            let sp = cells_spectrum(&s.cells, &s.model, &grid)?;
            TabulatedPolarization::from_spectrum(&sp).map_err(num)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&dyn PolarizationSource> = tables.iter().map(|t| t as &dyn PolarizationSource).collect();
    let responses = pulse_response(&spec, &refs).map_err(num)?;

    let mut header = vec!["time".to_string()];
    header.extend(suspensions.iter().map(|s| format!("norm_{}", s.name)));
    let mut table = Table::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for (k, &t) in responses[0].times.iter().enumerate() {
        let mut row = vec![t];
        for r in &responses {
            row.push(r.tensors[k].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
        }
        table.row(&row);
    }
    let sup: Vec<f64> = responses.iter().map(|r| r.sup_norm()).collect();
    let entries: Vec<Value> = suspensions
        .iter()
        .zip(&sup)
        .map(|(s, n)| json!({"name": s.name, "sup_norm": n, "ratio_to_first": n / sup[0]}))
        .collect();
    let mut out = Output::default();
    out.csv("pulse.csv", table);
    out.json(
        "pulse.json",
        json!({
            "center": spec.center,
            "bandwidth": spec.bandwidth,
            "half_window": spec.half_window(),
            "suspensions": entries,
        }),
    );
    Ok(out)
}
