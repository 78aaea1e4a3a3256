use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use elastic_shape::grid::{make_grid, save_surface, SphericalGrid, Surface};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_elastic-shape"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn blob(grid: SphericalGrid, a: f64) -> Surface {
    Surface::from_fn(grid, move |t, p| {
        SphericalGrid::embed(t, p) * (1.0 + a * (2.0 * t).cos() * p.sin() + 0.1 * p.cos())
    })
    .unwrap()
}

fn surfaces(dir: &Path, n: usize) -> Vec<PathBuf> {
    let g = make_grid(10, 8).unwrap();
    (0..n)
        .map(|i| {
            let p = dir.join(format!("s{i}.json"));
            save_surface(&blob(g, 0.05 * i as f64), &p).unwrap();
            p
        })
        .collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_input_exits_3_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out_dir = dir.path().join("out");
    let o = run(&[
        "register",
        "--fixed",
        s(&missing),
        "--moving",
        s(&missing),
        "--out",
        s(&out_dir),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("nope.json"), "{}", stderr(&o));
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", "{\"n_subjects\": \"many\"}");
    let o = run(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = run(&["simulate", "--grid", "12by12"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pca_scores_round_trip_is_exact_at_full_rank() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = surfaces(dir.path(), 5);
    let out = dir.path().join("pca");
    let mut args = vec!["pca", "--mean", s(&inputs[0]), "--out", s(&out)];
    args.extend(inputs.iter().map(|p| s(p)));
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("cumulative_variance.csv").exists());

    let model = out.join("model.esm");
    let sc = dir.path().join("scores");
    let mut args = vec!["scores", "--model", s(&model), "--out", s(&sc)];
    args.extend(inputs.iter().map(|p| s(p)));
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(sc.join("summary.json")).unwrap()).unwrap();
    assert!(
        summary["max_relative_error"].as_f64().unwrap() <= 1e-8,
        "{summary}"
    );
    let manifest = fs::read_to_string(sc.join("manifest.json")).unwrap();
    assert!(manifest.contains("scores.csv"));

    let frames = dir.path().join("path");
    let o = run(&[
        "export-path",
        "--model",
        s(&model),
        "--k",
        "1",
        "--frames",
        "3",
        "--out",
        s(&frames),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(frames.join("frames/pc1_002.obj").exists());
    assert!(frames.join("frames/pc1_002_diff.csv").exists());
}

#[test]
fn register_and_mean_write_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = surfaces(dir.path(), 3);
    let cfg = write_config(
        dir.path(),
        "reg.json",
        r#"{"rounds": 1, "reparam": {"max_iters": 5}}"#,
    );
    let out = dir.path().join("reg");
    let o = run(&[
        "register",
        "--fixed",
        s(&inputs[0]),
        "--moving",
        s(&inputs[1]),
        "--config",
        &cfg,
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let jac = fs::read_to_string(out.join("jacobian.csv")).unwrap();
    assert_eq!(jac.lines().count(), 1 + 80);

    let cfg = write_config(
        dir.path(),
        "mean.json",
        r#"{"iterations": 1, "registration": {"rounds": 1, "reparam": {"max_iters": 3}}}"#,
    );
    let out = dir.path().join("mean");
    let mut args = vec!["mean", "--config", &cfg, "--out", s(&out)];
    args.extend(inputs.iter().map(|p| s(p)));
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("mean.json").exists());
    assert!(out.join("registered/003.json").exists());
}

#[test]
fn regress_synthetic_cohort_reports_ten_models() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "regress.json",
        r#"{"suite": {"n_ps": 6, "n_interact_ps": 2}, "cohort": {"n_subjects": 80, "n_u": 8, "n_v": 8, "n_modes": 6}}"#,
    );
    let out = dir.path().join("r");
    let o = run(&["regress", "--config", &cfg, "--seed", "4", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let suite = fs::read_to_string(out.join("suite.csv")).unwrap();
    assert_eq!(suite.lines().count(), 11);

    // the written cohort feeds back in as files
    let out2 = dir.path().join("r2");
    let o = run(&[
        "regress",
        "--config",
        &write_config(
            dir.path(),
            "s.json",
            r#"{"suite": {"n_ps": 6, "n_interact_ps": 2}, "strictness": "lenient"}"#,
        ),
        "--covariates",
        s(&out.join("covariates.csv")),
        "--scores",
        s(&out.join("scores_s1.csv")),
        "--out",
        s(&out2),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out2.join("suite.csv")).unwrap(), suite);
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sim.json",
        r#"{"n_subjects": 6, "karcher": {"iterations": 0, "registration": {"rounds": 1, "reparam": {"max_iters": 3}}}}"#,
    );
    let outs: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("sim{i}"))).collect();
    for o in &outs {
        let r = run(&[
            "simulate",
            "--config",
            &cfg,
            "--grid",
            "12x10",
            "--seed",
            "3",
            "--threads",
            "1",
            "--out",
            s(o),
        ]);
        assert!(r.status.success(), "{}", stderr(&r));
    }
    for stage in ["registered", "perturbed", "reregistered"] {
        for kind in ["distances", "mds"] {
            let name = format!("{kind}_{stage}.csv");
            let a = fs::read(outs[0].join(&name)).unwrap();
            assert_eq!(a, fs::read(outs[1].join(&name)).unwrap(), "{name}");
        }
    }
    assert_eq!(
        fs::read(outs[0].join("manifest.json")).unwrap(),
        fs::read(outs[1].join("manifest.json")).unwrap()
    );
}

#[test]
fn compare_writes_both_pipelines() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cmp.json",
        r#"{"n_per_class": 3, "karcher": {"iterations": 0, "registration": {"rounds": 1, "reparam": {"max_iters": 3}}}}"#,
    );
    let out = dir.path().join("c");
    let o = run(&[
        "compare",
        "--config",
        &cfg,
        "--grid",
        "10x8",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(out.join("compare.csv")).unwrap();
    assert!(table.contains("elastic") && table.contains("vertex"));
}
