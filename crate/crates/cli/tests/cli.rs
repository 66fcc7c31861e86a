use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

const EPS_VAC: f64 = 8.85e-12;

fn run(dir: &Path, config: &str, args: &[&str]) -> (i32, PathBuf) {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_cellspec"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    (status.status.code().unwrap(), out)
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

fn report(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn model(delta: f64) -> String {
    format!(
        "[model]\nsigma0 = 0.5\neps0 = {}\nsigma_m = 1e-8\neps_m = {}\ndelta = {delta}\n",
        90.0 * EPS_VAC,
        3.5 * EPS_VAC
    )
}

const GRID: &str = "[grid]\nomega_min = 1e4\nomega_max = 1e9\npoints = 60\n";

fn spectrum_taus(cells: &str, delta: f64, frame: &str) -> (f64, f64) {
    let dir = TempDir::new().unwrap();
    let cfg = format!("{}{GRID}[geometry]\nframe = \"{frame}\"\n{cells}", model(delta));
    let (code, out) = run(dir.path(), &cfg, &["debye"]);
    assert_eq!(code, 0);
    let r = report(&out.join("debye.json"));
    (r["tau1"].as_f64().unwrap(), r["tau2"].as_f64().unwrap())
}

#[test]
fn mwf_matches_closed_form_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = format!("{}{GRID}[mwf]\nradius = 0.3\n", model(0.7e-3));
    let (code, out) = run(dir.path(), &cfg, &["mwf"]);
    assert_eq!(code, 0);
    let q = 0.7e-3 / 0.6;
    let closed = (1e-8 + 0.5 * q) / (3.5 * EPS_VAC + 90.0 * EPS_VAC * q);
    let col = csv_column(&out.join("mwf.csv"), "omega_star");
    assert_eq!(col.len(), 60);
    assert!(col.iter().all(|w| (w - closed).abs() <= 1e-15 * closed));
    let r = report(&out.join("mwf.json"));
    assert!((r["omega_peak_sweep"].as_f64().unwrap() / closed - 1.0).abs() < 1e-5);

    let first = fs::read(out.join("mwf.csv")).unwrap();
    let (code, out2) = run(dir.path(), &cfg, &["mwf", "--threads", "1"]);
    assert_eq!(code, 0);
    assert_eq!(first, fs::read(out2.join("mwf.csv")).unwrap());
    assert!(!first.contains(&b'\r'));
}

#[test]
fn invalid_configs_exit_with_code_two_and_write_nothing() {
    let cases = [
        format!("{}[grid]\nomegas = []\n[mwf]\nradius = 0.3\n", model(1e-3)),
        format!("{}{GRID}[mwf]\nradius = 0.3\ncolour = 1\n", model(1e-3)),
        format!("{}{GRID}[mwf]\nradius = -1.0\n", model(1e-3)),
        format!("{GRID}[mwf]\nradius = 0.3\n[model]\nsigma0 = 0.5\n"),
        format!("{}{GRID}", model(1e-3)),
        "this is not toml".to_string(),
    ];
    for cfg in &cases {
        let dir = TempDir::new().unwrap();
        let (code, out) = run(dir.path(), cfg, &["mwf"]);
        assert_eq!(code, 2, "{cfg}");
        assert!(!out.exists());
    }
    let dir = TempDir::new().unwrap();
    let cfg = format!(
        "{}{GRID}[geometry]\nframe = \"cell\"\ncells = [{{ shape = \"circle\", radius = 0.7, center = [0.5, 0.5] }}]\n",
        model(1e-3)
    );
    let (code, out) = run(dir.path(), &cfg, &["spectrum"]);
    assert_eq!(code, 2);
    assert!(!out.exists());
}

#[test]
fn grid_without_peak_is_a_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let cfg = format!(
        "{}[grid]\nomega_min = 1e4\nomega_max = 1e5\npoints = 10\n[mwf]\nradius = 0.3\n",
        model(0.7e-3)
    );
    let (code, out) = run(dir.path(), &cfg, &["mwf"]);
    assert_eq!(code, 3);
    assert!(!out.exists());
}

#[test]
fn ellipse_family_shares_debye_times() {
    let base = spectrum_taus(
        "cells = [{ shape = \"ellipse\", a = 0.3, b = 0.15 }]\n",
        0.7e-3,
        "free",
    );
    let moved = spectrum_taus(
        "cells = [{ shape = \"ellipse\", a = 0.3, b = 0.15, center = [0.4, -0.2] }]\n",
        0.7e-3,
        "free",
    );
    let turned = spectrum_taus(
        "cells = [{ shape = \"ellipse\", a = 0.3, b = 0.15, angle = 1.1 }]\n",
        0.7e-3,
        "free",
    );
    let scaled = spectrum_taus(
        "cells = [{ shape = \"ellipse\", a = 0.6, b = 0.3 }]\n",
        1.4e-3,
        "free",
    );
    for t in [moved, turned, scaled] {
        assert!((t.0 / base.0 - 1.0).abs() < 1e-5 && (t.1 / base.1 - 1.0).abs() < 1e-5);
    }
}

fn separated(a: (f64, f64), b: (f64, f64)) -> bool {
    ((a.0 - b.0) / b.0).abs().max(((a.1 - b.1) / b.1).abs()) > 0.05
}

#[test]
fn shapes_and_groups_are_distinguished() {
    let shapes = [
        "cells = [{ shape = \"circle\", radius = 0.3 }]\n",
        "cells = [{ shape = \"ellipse\", a = 0.4243, b = 0.2121 }]\n",
        "cells = [{ shape = \"ellipse\", a = 0.6708, b = 0.1342 }]\n",
    ];
    let taus: Vec<_> = shapes.iter().map(|s| spectrum_taus(s, 0.7e-3, "free")).collect();
    let groups = [
        "cells = [{ shape = \"circle\", radius = 0.1, center = [0.5, 0.5] }]\n",
        "cells = [{ shape = \"circle\", radius = 0.1, center = [0.3, 0.5] }, { shape = \"circle\", radius = 0.1, center = [0.7, 0.5] }]\n",
        "cells = [{ shape = \"circle\", radius = 0.1, center = [0.3, 0.3] }, { shape = \"circle\", radius = 0.1, center = [0.7, 0.3] }, { shape = \"circle\", radius = 0.1, center = [0.5, 0.7] }]\n",
    ];
    let gtaus: Vec<_> = groups
        .iter()
        .map(|s| spectrum_taus(&format!("delta_over_rho = 0.7e-3\n{s}"), 1.0, "cell"))
        .collect();
    for set in [&taus, &gtaus] {
        for i in 0..3 {
            for j in i + 1..3 {
                assert!(separated(set[i], set[j]), "{set:?}");
            }
        }
    }
}

fn effective_run(mode_block: &str, extra: &[&str]) -> (i32, PathBuf, TempDir) {
    let dir = TempDir::new().unwrap();
    let cfg = format!(
        "{}[grid]\nomegas = [1e5, 1e6, 1e7, 1e8]\n[geometry]\nframe = \"cell\"\nvolume_fraction = 0.05\ncells = [{{ shape = \"ellipse\", a = 1.0, b = 0.6, angle = 0.3 }}]\n{mode_block}",
        model(1e-4)
    );
    let mut args = vec!["effective"];
    args.extend_from_slice(extra);
    let (code, out) = run(dir.path(), &cfg, &args);
    (code, out, dir)
}

#[test]
fn effective_modes() {
    let (code, dilute, _d1) = effective_run("[effective]\nmode = \"dilute\"\n", &[]);
    assert_eq!(code, 0);
    let (code, periodic, _d2) = effective_run("[effective]\nmode = \"periodic\"\n", &[]);
    assert_eq!(code, 0);
    let (code, zero, _d3) = effective_run("[effective]\nmode = \"random\"\n[effective.random]\nsamples = 3\n", &[]);
    assert_eq!(code, 0);
    for col in ["k11_re", "k11_im", "k12_re", "k22_im"] {
        assert_eq!(csv_column(&dilute.join("effective.csv"), col), csv_column(&zero.join("effective.csv"), col));
        let (d, p) = (csv_column(&dilute.join("effective.csv"), col), csv_column(&periodic.join("effective.csv"), col));
        for (a, b) in d.iter().zip(&p) {
            assert!((a - b).abs() < 1e-2 * 0.5);
        }
    }
    assert!(csv_column(&dilute.join("effective.csv"), "band_lo").iter().all(|v| *v > 0.0));

    let block = "[effective]\nmode = \"random\"\n[effective.random]\nsamples = 6\nnodes_per_curve = 64\nseed = 1\n[effective.random.deformation]\nmax_rotation = 1.0\nmax_shear = 0.05\n";
    let (c1, a, _d4) = effective_run(block, &["--seed", "9", "--threads", "1"]);
    let (c2, b, _d5) = effective_run(block, &["--seed", "9", "--threads", "3"]);
    let (c3, c, _d6) = effective_run(block, &["--seed", "10"]);
    assert_eq!((c1, c2, c3), (0, 0, 0));
    let bytes = |p: &PathBuf| fs::read(p.join("effective.csv")).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    assert_ne!(bytes(&a), bytes(&c));
    assert_eq!(report(&a.join("effective.json"))["seed"], 9);

    let (code, _, _d7) = effective_run("[effective]\nmode = \"dilute\"\n[effective.random]\nsamples = 3\n", &[]);
    assert_eq!(code, 2);
    let (code, _, _d8) = effective_run("[effective]\nmode = \"random\"\n[effective.random.deformation]\ntwist = 1.0\n", &[]);
    assert_eq!(code, 2);
}

fn imaging_config(fraction: f64, cells: &str) -> String {
    format!(
        "{}[grid]\nomega_min = 1e4\nomega_max = 1e9\npoints = 80\n[geometry]\nframe = \"cell\"\nvolume_fraction = 0.05\ndelta_over_rho = 0.7e-3\n{cells}[imaging]\nprobe_radius = 1.0\nprobe_nodes = 96\ninclusion = {{ shape = \"circle\", radius = 0.4 }}\ninclusion_nodes = 96\nfraction = {fraction}\nangles = 12\n",
        model(1.0)
    )
}

#[test]
fn imaging_closed_loop_and_null_report() {
    let circle = "cells = [{ shape = \"circle\", radius = 1.0 }]\n";
    let dir = TempDir::new().unwrap();
    let (code, out) = run(dir.path(), &imaging_config(0.01, circle), &["image"]);
    assert_eq!(code, 0);
    let r = report(&out.join("image.json"));
    assert!(r["relative_error"].as_f64().unwrap() < 0.02, "{r}");

    let dir = TempDir::new().unwrap();
    let (code, out) = run(dir.path(), &imaging_config(0.0, circle), &["image"]);
    assert_eq!(code, 0);
    let r = report(&out.join("image.json"));
    assert_eq!(r["null"], true);
    assert!(csv_column(&out.join("functional.csv"), "functional_norm").iter().all(|v| v.abs() < 1e-12));

    let dir = TempDir::new().unwrap();
    let (code, out) = run(dir.path(), &imaging_config(0.01, circle), &["forward"]);
    assert_eq!(code, 0);
    assert_eq!(csv_column(&out.join("forward.csv"), "node_index").len(), 80 * 96);
}

#[test]
fn anisotropy_table() {
    let dir = TempDir::new().unwrap();
    let circle = "cells = [{ shape = \"circle\", radius = 1.0 }]\n";
    let (code, out) = run(dir.path(), &imaging_config(0.01, circle), &["anisotropy"]);
    assert_eq!(code, 0);
    assert!(csv_column(&out.join("anisotropy.csv"), "ratio").iter().all(|r| (r - 1.0).abs() < 5e-2));

    let dir = TempDir::new().unwrap();
    let ellipse = "cells = [{ shape = \"ellipse\", a = 1.0, b = 0.5 }]\n";
    let (code, out) = run(dir.path(), &imaging_config(0.01, ellipse), &["anisotropy"]);
    assert_eq!(code, 0);
    let s = csv_column(&out.join("anisotropy.csv"), "ratio");
    let l = csv_column(&out.join("anisotropy.csv"), "lambda_ratio");
    for (a, b) in s.iter().zip(&l) {
        assert!((a - b).abs() < 5e-2, "{a} vs {b}");
    }
    // isotropic-only forward solver rejects the elliptic suspension
    let (code, _) = run(dir.path(), &imaging_config(0.01, ellipse), &["forward"]);
    assert_eq!(code, 3);
}

#[test]
fn pulse_selects_the_on_target_suspension() {
    let dir = TempDir::new().unwrap();
    let r0 = 1.0 / std::f64::consts::PI.sqrt();
    let cfg = format!(
        "{}[grid]\nomega_min = 1e5\nomega_max = 1e9\npoints = 120\n[pulse]\ncenter = 3e7\nbandwidth = 3e7\ntime_points = 201\nfrequency_points = 401\n\
         [[pulse.suspensions]]\nname = \"thick\"\ngeometry = {{ frame = \"free\", cells = [{{ shape = \"circle\", radius = {r0} }}] }}\n\
         [[pulse.suspensions]]\nname = \"thin\"\ndelta = 7e-5\ngeometry = {{ frame = \"free\", cells = [{{ shape = \"circle\", radius = {r0} }}] }}\n",
        model(7e-4)
    );
    let (code, out) = run(dir.path(), &cfg, &["pulse"]);
    assert_eq!(code, 0);
    let r = report(&out.join("pulse.json"));
    assert_eq!(r["suspensions"][0]["name"], "thick");
    assert!(r["suspensions"][1]["ratio_to_first"].as_f64().unwrap() < 0.2, "{r}");
    assert_eq!(csv_column(&out.join("pulse.csv"), "norm_thin").len(), 201);

    let bad = cfg.replace("center = 3e7", "center = 9.9e8");
    let (code, _) = run(dir.path(), &bad, &["pulse"]);
    assert_eq!(code, 2);
}
