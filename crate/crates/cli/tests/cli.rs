use std::path::Path;
use std::process::Command;

use serde_json::Value;
use skbm_cli::{execute, validate, CliError, ExperimentConfig, Overrides};

const MC: &str = r#"
[mc]
seed = 42
n_paths = 20000
h = 1.0
step_rule = { rule = "adaptive", fraction = 0.05, min_length = 1e-3 }
"#;

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("exp.toml");
    std::fs::write(&p, body).unwrap();
    p
}

fn run_bin(config: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_skbm"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn catalog_check_reports_delta() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "experiment = \"catalog-check\"\nsubordinator = \"stable:0.5\"\n[mc]\nn_paths = 20000\n");
    let out = tmp.path().join("out");
    let o = run_bin(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["pass"], true);
    let cond = s["reports"].as_array().unwrap().iter().find(|r| r["condition"] == "scaling-conditions").unwrap();
    assert_eq!(cond["constants"]["delta"].as_f64().unwrap(), 0.5);
    assert!(out.join("detail.csv").exists());
    assert!(out.join("plotdata/densities.csv").exists());
    assert_eq!(s["check"], "catalog/laplace-density-scaling");
    assert_eq!(s["config"]["subordinator"], "stable:0.5");
}

#[test]
fn malformed_domain_leaves_no_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    for body in [
        "experiment = \"harnack\"\nsubordinator = \"stable:0.5\"\n[domain]\nkind = \"box\"\nlo = [0.0, 0.0]\nhi = [1.0]\n",
        "experiment = \"harnack\"\nsubordinator = \"stable:0.5\"\n[domain]\nkind = \"ball\"\ncenter = [0.0, 0.0, 0.0]\n",
        "experiment = \"harnack\"\nsubordinator = \"stable:0.5\"\n[domain]\nkind = \"torus\"\nd = 3\n",
        "experiment = \"harnack\"\nsubordinator = \"stable:0.5\"\n[domain]\nkind = \"half-space\"\nd = 3\nradius = 1.0\n",
    ] {
        let cfg = write_config(tmp.path(), body);
        let out = tmp.path().join("never");
        let o = run_bin(&cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(2), "{body}");
        assert!(!out.exists(), "{body}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    }
}

#[test]
fn unknown_keys_are_rejected() {
    for body in [
        "experiment = \"catalog-check\"\nsubordinator = \"stable:0.5\"\ncolour = 1\n",
        "experiment = \"catalog-check\"\nsubordinator = \"stable:0.5\"\n[mc]\npaths = 10\n",
        "experiment = \"catalog-check\"\nsubordinator = \"stable:0.5\"\n[grid]\nr = 0.5\n",
    ] {
        let c = ExperimentConfig::from_toml(body).and_then(|c| validate(c, &Overrides::default()));
        assert!(matches!(c, Err(CliError::Config(_))), "{body}: {c:?}");
    }
}

#[test]
fn large_scale_scan_with_gamma_names_the_condition() {
    let body = "experiment = \"kernel-scan\"\nsubordinator = \"gamma\"\n[domain]\nkind = \"half-space\"\nd = 3\n[grid]\nenvelope = \"large-scale-jump\"\n";
    let err = validate(ExperimentConfig::from_toml(body).unwrap(), &Overrides::default()).unwrap_err();
    match &err {
        CliError::Gating { condition, .. } => assert_eq!(condition, "A6"),
        e => panic!("{e:?}"),
    }
    assert!(err.to_string().contains("(A6)"));
    // the local envelopes need no lower scaling of μ
    let local = body.replace("large-scale-jump", "jump");
    assert!(validate(ExperimentConfig::from_toml(&local).unwrap(), &Overrides::default()).is_ok());
}

#[test]
fn gamma_path_experiments_need_a_bounded_domain() {
    let body = format!("experiment = \"carleson\"\nsubordinator = \"gamma\"\n[domain]\nkind = \"half-space\"\nd = 3\n{MC}");
    let err = validate(ExperimentConfig::from_toml(&body).unwrap(), &Overrides::default()).unwrap_err();
    assert!(err.to_string().contains("(A6)"), "{err}");
}

#[test]
fn unsampled_subordinator_is_refused_for_paths() {
    let body = format!("experiment = \"carleson\"\nsubordinator = \"log-stable:0.5:0.2:+\"\n[domain]\nkind = \"ball\"\ncenter = [0.0, 0.0, 0.0]\nradius = 1.0\n[grid]\nq = [0.0, 0.0, -1.0]\n{MC}");
    assert!(validate(ExperimentConfig::from_toml(&body).unwrap(), &Overrides::default()).is_err());
}

#[test]
fn same_seed_gives_identical_summaries() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!(
        "experiment = \"carleson\"\nsubordinator = \"stable:0.5\"\n[domain]\nkind = \"half-space\"\nd = 3\n[grid]\nr = 0.5\n{}",
        MC.replace("20000", "3000")
    );
    let cfg = write_config(tmp.path(), &body);
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    execute(&cfg, &Overrides { out: Some(a.clone()), ..Default::default() }, Some(1)).unwrap();
    execute(&cfg, &Overrides { out: Some(b.clone()), ..Default::default() }, Some(3)).unwrap();
    execute(&cfg, &Overrides { out: Some(c.clone()), seed: Some(43), ..Default::default() }, Some(1)).unwrap();
    let read = |p: &Path| std::fs::read_to_string(p.join("summary.json")).unwrap();
    assert!(read(&a) == read(&b), "summaries differ");
    assert_ne!(read(&a), read(&c));
    assert_eq!(summary(&c)["seed"], 43);
    assert_eq!(summary(&c)["config"]["mc"]["seed"], 43);
}

#[test]
fn bhp_interior_slope_in_plot_data() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!(
        r#"experiment = "bhp-interior"
subordinator = "stable:0.5"
[domain]
kind = "box"
lo = [-2.0, -2.0, -2.0]
hi = [2.0, 2.0, 2.0]
[domain.interior]
kind = "ball"
center = [0.0, 0.0, 0.0]
radius = 0.5
[grid]
q = [0.5, 0.0, 0.0]
r = 0.05
{MC}"#
    );
    let cfg = write_config(tmp.path(), &body);
    let out = tmp.path().join("out");
    let o = run_bin(&cfg, &out, &["--workers", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("plotdata/ray.csv")).unwrap();
    let pts: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|c| c[4] == "1")
        .map(|c| (c[0].parse().unwrap(), c[1].parse().unwrap()))
        .collect();
    assert!(pts.len() >= 5);
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 0.5).abs() < 0.15, "slope {slope}");
    let s = summary(&out);
    assert_eq!(s["check"], "boundary-harnack/interior-decay");
    assert!(s["reports"].as_array().unwrap().iter().any(|r| r["condition"] == "compensator-b"));
}

#[test]
fn failing_checks_exit_with_one() {
    // far too few paths to resolve the Carleson reference value
    let tmp = tempfile::tempdir().unwrap();
    let body = format!(
        "experiment = \"carleson\"\nsubordinator = \"stable:0.5\"\n[domain]\nkind = \"half-space\"\nd = 3\n[grid]\nr = 0.5\n{}",
        MC.replace("20000", "3")
    );
    let cfg = write_config(tmp.path(), &body);
    let out = tmp.path().join("out");
    let o = run_bin(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(summary(&out)["pass"], false);
}

#[test]
fn tol_flag_overrides_quadrature() {
    let body = "experiment = \"catalog-check\"\nsubordinator = \"stable:0.5\"\n";
    let plan = validate(
        ExperimentConfig::from_toml(body).unwrap(),
        &Overrides { tol: Some(1e-6), ..Default::default() },
    )
    .unwrap();
    assert_eq!(plan.config.quadrature.rel_tol, 1e-6);
    assert!(validate(ExperimentConfig::from_toml(body).unwrap(), &Overrides { tol: Some(2.0), ..Default::default() }).is_err());
}

#[test]
fn example_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let cfg = ExperimentConfig::load(&p).unwrap();
        let r = validate(cfg, &Overrides::default());
        if p.file_name().unwrap().to_string_lossy().starts_with("large-scale-gamma") {
            assert!(matches!(r, Err(CliError::Gating { .. })));
        } else {
            assert!(r.is_ok(), "{}: {:?}", p.display(), r.err());
        }
        n += 1;
    }
    assert!(n >= 9);
}
