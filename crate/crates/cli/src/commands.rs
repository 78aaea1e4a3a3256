use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use elastic_shape::baseline::{align_to_reference, vertex_pca, IcpOptions, PointCloud};
use elastic_shape::experiments::{run_compare, run_simulation, CompareConfig, SimulationConfig};
use elastic_shape::grid::{export_obj, load_surface, save_surface, SphericalGrid, Surface};
use elastic_shape::registration::{jacobian_det, register as register_pair, RegistrationOptions};
use elastic_shape::regression::{
    run_model_suite, write_suite_csv, write_suite_json, CovariateTable, Strictness, SuiteOptions,
};
use elastic_shape::statistics::{
    diff_field, karcher_mean, load_model, pc_path, pc_scores, reconstruct, save_model, shape_pca,
    InitialMean, KarcherOptions, PcScores, VarianceConvention,
};
use elastic_shape::synthetic::{gen_regression_cohort, CohortSpec};

use crate::error::{reading, CliError};
use crate::output::{csv, load_config, num, Run};
use crate::GlobalArgs;

fn load(path: &Path) -> Result<Surface, CliError> {
    reading(path, load_surface(path))
}

fn load_all(paths: &[PathBuf]) -> Result<Vec<Surface>, CliError> {
    paths.iter().map(|p| load(p)).collect()
}

fn check_grid(g: &GlobalArgs, grid: &SphericalGrid, path: &Path) -> Result<(), CliError> {
    match g.grid {
        Some((u, v)) if (u, v) != (grid.n_u(), grid.n_v()) => Err(CliError::input(
            path,
            format!(
                "surface grid {}x{} differs from --grid {u}x{v}",
                grid.n_u(),
                grid.n_v()
            ),
        )),
        _ => Ok(()),
    }
}

fn refs(paths: &[PathBuf]) -> Vec<&Path> {
    paths.iter().map(PathBuf::as_path).collect()
}

/// Per-node values with their spherical coordinates.
fn node_table(grid: &SphericalGrid, name: &str, values: &[f64]) -> String {
    let header = ["index", "theta", "phi", name].map(String::from);
    let rows = (0..grid.n_v()).flat_map(|j| {
        (0..grid.n_u()).map(move |i| {
            let k = j * grid.n_u() + i;
            vec![
                k.to_string(),
                num(grid.theta(i)),
                num(grid.phi(j)),
                num(values[k]),
            ]
        })
    });
    csv(&header, rows)
}

pub fn simulate(g: &GlobalArgs) -> Result<(), CliError> {
    let mut cfg: SimulationConfig = load_config(g)?;
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some((u, v)) = g.grid {
        (cfg.n_u, cfg.n_v) = (u, v);
    }
    let mut run = Run::start(g, "simulate")?;
    let result = run_simulation(&cfg)?;
    for stage in &result.stages {
        let p = run.path(&format!("distances_{}.csv", stage.name))?;
        stage.distances.to_csv(&p)?;
        let p = run.path(&format!("mds_{}.csv", stage.name))?;
        stage.mds.to_csv(&result.labels, &p)?;
    }
    let header = ["index", "coefficient", "label"].map(String::from);
    let rows = result
        .coefficients
        .iter()
        .zip(&result.labels)
        .enumerate()
        .map(|(i, (x, l))| vec![(i + 1).to_string(), num(*x), l.to_string()]);
    run.write_text("cohort.csv", &csv(&header, rows))?;
    let [a, b, c] = result.accuracies();
    run.write_json(
        "summary.json",
        &serde_json::json!({
            "accuracy_registered": a,
            "accuracy_perturbed": b,
            "accuracy_reregistered": c,
        }),
    )?;
    println!("1-NN accuracy: registered {a:.3}, perturbed {b:.3}, re-registered {c:.3}");
    run.finish(g, &cfg, &[])
}

#[derive(Args, Debug)]
pub struct RegisterArgs {
    /// Surface kept fixed.
    #[arg(long)]
    pub fixed: PathBuf,
    /// Surface rotated and reparameterized onto `fixed`.
    #[arg(long)]
    pub moving: PathBuf,
}

pub fn register(g: &GlobalArgs, a: &RegisterArgs) -> Result<(), CliError> {
    let cfg: RegistrationOptions = load_config(g)?;
    let f1 = load(&a.fixed)?;
    let f2 = load(&a.moving)?;
    check_grid(g, f1.grid(), &a.fixed)?;
    if f1.grid() != f2.grid() {
        return Err(CliError::input(
            &a.moving,
            "grid differs from the fixed surface",
        ));
    }
    let mut run = Run::start(g, "register")?;
    let out = register_pair(&f1, &f2, &cfg)?;
    let jac = jacobian_det(&out.reparam);
    save_surface(&out.aligned, run.path("aligned.json")?)?;
    run.write_text("jacobian.csv", &node_table(f1.grid(), "jacobian", &jac))?;
    let r = out.rotation.matrix();
    run.write_json(
        "registration.json",
        &serde_json::json!({
            "distance": out.distance,
            "rotation": [[r[(0, 0)], r[(0, 1)], r[(0, 2)]], [r[(1, 0)], r[(1, 1)], r[(1, 2)]], [r[(2, 0)], r[(2, 1)], r[(2, 2)]]],
            "objective_trace": out.objective_trace,
            "jacobian_min": jac.iter().copied().fold(f64::INFINITY, f64::min),
            "jacobian_max": jac.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }),
    )?;
    println!("shape distance {:.6}", out.distance);
    run.finish(g, &cfg, &[&a.fixed, &a.moving])
}

#[derive(Args, Debug)]
pub struct MeanArgs {
    /// Input surfaces.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

pub fn mean(g: &GlobalArgs, a: &MeanArgs) -> Result<(), CliError> {
    let mut cfg: KarcherOptions = load_config(g)?;
    if let Some(seed) = g.seed {
        cfg.init = InitialMean::Random(seed);
    }
    let surfaces = load_all(&a.inputs)?;
    check_grid(g, surfaces[0].grid(), &a.inputs[0])?;
    let mut run = Run::start(g, "mean")?;
    let k = karcher_mean(&surfaces, &cfg)?;
    save_surface(&k.mean, run.path("mean.json")?)?;
    for (i, f) in k.registered.iter().enumerate() {
        save_surface(f, run.path(&format!("registered/{:03}.json", i + 1))?)?;
    }
    run.write_json(
        "karcher.json",
        &serde_json::json!({
            "variance_trace": k.variance_trace,
            "distances": k.distances,
        }),
    )?;
    println!(
        "karcher variance {:.6e}",
        k.variance_trace.last().copied().unwrap_or(0.0)
    );
    run.finish(g, &cfg, &refs(&a.inputs))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaConfig {
    /// ICP options for the vertex-wise curve.
    pub icp: IcpOptions,
}

#[derive(Args, Debug)]
pub struct PcaArgs {
    /// Mean surface the inputs were registered to.
    #[arg(long)]
    pub mean: PathBuf,
    /// Registered surfaces.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Unregistered surfaces for the vertex-wise (ICP) variance curve.
    #[arg(long, num_args = 1..)]
    pub vertex_inputs: Vec<PathBuf>,
}

pub fn pca(g: &GlobalArgs, a: &PcaArgs) -> Result<(), CliError> {
    let cfg: PcaConfig = load_config(g)?;
    let mean = load(&a.mean)?;
    check_grid(g, mean.grid(), &a.mean)?;
    let registered = load_all(&a.inputs)?;
    let raw = load_all(&a.vertex_inputs)?;
    let mut run = Run::start(g, "pca")?;
    let model = shape_pca(&registered, &mean)?;
    save_model(&model, run.path("model.esm")?)?;
    let single = model
        .basis()
        .cumulative_variance(VarianceConvention::Singular);
    let squared = model
        .basis()
        .cumulative_variance(VarianceConvention::Squared);
    let vertex = if raw.is_empty() {
        None
    } else {
        let clouds: Vec<PointCloud> = raw.iter().map(PointCloud::from_surface).collect();
        let aligned: Vec<PointCloud> = align_to_reference(&clouds, 0, &cfg.icp)?
            .into_iter()
            .map(|r| r.aligned)
            .collect();
        Some(vertex_pca(&aligned)?.cumulative_variance(VarianceConvention::Singular))
    };
    let mut header: Vec<String> = ["d", "singular", "squared"].map(String::from).to_vec();
    if vertex.is_some() {
        header.push("vertex_singular".into());
    }
    let rows = (0..single.len()).map(|d| {
        let mut r = vec![(d + 1).to_string(), num(single[d]), num(squared[d])];
        if let Some(v) = &vertex {
            r.push(v.get(d).map_or(String::new(), |x| num(*x)));
        }
        r
    });
    run.write_text("cumulative_variance.csv", &csv(&header, rows))?;
    println!(
        "{} directions from {} surfaces",
        model.n_directions(),
        model.n_train()
    );
    let mut inputs = vec![a.mean.as_path()];
    inputs.extend(refs(&a.inputs));
    inputs.extend(refs(&a.vertex_inputs));
    run.finish(g, &cfg, &inputs)
}

#[derive(Args, Debug)]
pub struct ScoresArgs {
    /// Model file written by `pca`.
    #[arg(long)]
    pub model: PathBuf,
    /// Surfaces to score, registered to the model mean.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Number of scores; defaults to every direction.
    #[arg(long)]
    pub d: Option<usize>,
}

pub fn scores(g: &GlobalArgs, a: &ScoresArgs) -> Result<(), CliError> {
    let model = reading(&a.model, load_model(&a.model))?;
    let surfaces = load_all(&a.inputs)?;
    let d = a.d.unwrap_or(model.n_directions());
    if d > model.n_directions() {
        return Err(CliError::Config(format!(
            "--d {d} exceeds the model's {} directions",
            model.n_directions()
        )));
    }
    let mut run = Run::start(g, "scores")?;
    let mut score_rows = Vec::new();
    let mut err_rows = Vec::new();
    let mut max_err: f64 = 0.0;
    for (path, f) in a.inputs.iter().zip(&surfaces) {
        let z = pc_scores(f, &model, d)?;
        let back = reconstruct(&z, &model)?;
        let rel = back.l2_distance(f)
            / f.l2_distance(&Surface::new(
                *f.grid(),
                vec![Default::default(); f.grid().len()],
            )?);
        max_err = max_err.max(rel);
        let name = path.display().to_string();
        let mut row = vec![name.clone()];
        row.extend(z.as_slice().iter().map(|x| num(*x)));
        score_rows.push(row);
        err_rows.push(vec![name, num(rel)]);
    }
    let mut header = vec!["file".to_string()];
    header.extend((1..=d).map(|k| format!("ps{k}")));
    run.write_text("scores.csv", &csv(&header, score_rows))?;
    run.write_text(
        "reconstruction.csv",
        &csv(&["file".into(), "relative_error".into()], err_rows),
    )?;
    run.write_json(
        "summary.json",
        &serde_json::json!({ "d": d, "max_relative_error": max_err }),
    )?;
    println!("max relative reconstruction error {max_err:.3e} at d = {d}");
    let mut inputs = vec![a.model.as_path()];
    inputs.extend(refs(&a.inputs));
    run.finish(g, &serde_json::json!({ "d": d }), &inputs)
}

#[derive(Args, Debug)]
pub struct ExportPathArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Principal direction, 1-based.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Number of frames from `-range` to `+range`.
    #[arg(long, default_value_t = 9)]
    pub frames: usize,
    /// Path extent in units of the direction's singular value.
    #[arg(long, default_value_t = 1.0)]
    pub range: f64,
}

pub fn export_path(g: &GlobalArgs, a: &ExportPathArgs) -> Result<(), CliError> {
    let model = reading(&a.model, load_model(&a.model))?;
    if a.k == 0 || a.k > model.n_directions() || a.frames < 2 || !a.range.is_finite() {
        return Err(CliError::Config(format!(
            "need 1 <= k <= {}, frames >= 2 and a finite range",
            model.n_directions()
        )));
    }
    let t: Vec<f64> = (0..a.frames)
        .map(|i| -a.range + 2.0 * a.range * i as f64 / (a.frames - 1) as f64)
        .collect();
    let mut run = Run::start(g, "export-path")?;
    let mean = model.mean();
    let frames = pc_path(&model, a.k - 1, &t)?;
    for (i, f) in frames.iter().enumerate() {
        export_obj(f, run.path(&format!("frames/pc{}_{:03}.obj", a.k, i))?)?;
        let diff = diff_field(f, &mean)?;
        run.write_text(
            &format!("frames/pc{}_{:03}_diff.csv", a.k, i),
            &node_table(f.grid(), "diff", &diff),
        )?;
    }
    let rows = t
        .iter()
        .enumerate()
        .map(|(i, t)| vec![i.to_string(), num(*t)]);
    run.write_text(
        "frames/t_values.csv",
        &csv(&["frame".into(), "t".into()], rows),
    )?;
    println!("{} frames along direction {}", frames.len(), a.k);
    run.finish(
        g,
        &serde_json::json!({ "k": a.k, "frames": a.frames, "range": a.range }),
        &[a.model.as_path()],
    )
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressConfig {
    pub suite: SuiteOptions,
    pub strictness: Strictness,
    /// Generate a synthetic cohort instead of reading files.
    pub cohort: Option<CohortSpec>,
}

#[derive(Args, Debug)]
pub struct RegressArgs {
    /// Covariate CSV with columns id, age, bdi, icv, pss, ctqtot, label.
    #[arg(long, requires = "scores")]
    pub covariates: Option<PathBuf>,
    /// One score CSV per structure (columns id, ps1, ps2, ...), rows matching
    /// the covariate ids.
    #[arg(long, num_args = 1..)]
    pub scores: Vec<PathBuf>,
}

fn read_scores(path: &Path, ids: &[String]) -> Result<Vec<PcScores>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    lines
        .next()
        .ok_or_else(|| CliError::input(path, "empty file"))?;
    let mut out = Vec::new();
    for (r, line) in lines.enumerate() {
        let mut cells = line.split(',').map(str::trim);
        let id = cells.next().unwrap_or_default();
        if ids.get(r).map(String::as_str) != Some(id) {
            return Err(CliError::input(
                path,
                format!(
                    "row {}: id `{id}` does not match the covariate table",
                    r + 1
                ),
            ));
        }
        let z = cells
            .map(|c| c.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::input(path, format!("row {}: {e}", r + 1)))?;
        out.push(PcScores(z));
    }
    if out.len() != ids.len() {
        return Err(CliError::input(
            path,
            format!("{} rows for {} subjects", out.len(), ids.len()),
        ));
    }
    Ok(out)
}

fn write_scores(
    run: &mut Run,
    name: &str,
    ids: &[String],
    scores: &[PcScores],
) -> Result<(), CliError> {
    let d = scores.first().map_or(0, PcScores::len);
    let mut header = vec!["id".to_string()];
    header.extend((1..=d).map(|k| format!("ps{k}")));
    let rows = ids.iter().zip(scores).map(|(id, z)| {
        let mut r = vec![id.clone()];
        r.extend(z.as_slice().iter().map(|x| num(*x)));
        r
    });
    run.write_text(name, &csv(&header, rows))
}

pub fn regress(g: &GlobalArgs, a: &RegressArgs) -> Result<(), CliError> {
    let mut cfg: RegressConfig = load_config(g)?;
    let mut run = Run::start(g, "regress")?;
    let mut inputs: Vec<&Path> = Vec::new();
    let (cov, scores) = match (&a.covariates, &mut cfg.cohort) {
        (Some(path), _) => {
            let cov = reading(path, CovariateTable::from_csv(path, cfg.strictness))?;
            let ids: Vec<String> = cov.rows().iter().map(|s| s.id.clone()).collect();
            let scores = a
                .scores
                .iter()
                .map(|p| read_scores(p, &ids))
                .collect::<Result<Vec<_>, _>>()?;
            inputs.push(path);
            inputs.extend(refs(&a.scores));
            (cov, scores)
        }
        (None, Some(spec)) => {
            if let Some(seed) = g.seed {
                spec.seed = seed;
            }
            if let Some((u, v)) = g.grid {
                (spec.n_u, spec.n_v) = (u, v);
            }
            let cohort = gen_regression_cohort(spec)?;
            let ids: Vec<String> = cohort
                .covariates
                .rows()
                .iter()
                .map(|s| s.id.clone())
                .collect();
            cohort.covariates.to_csv(run.path("covariates.csv")?)?;
            for (s, set) in cohort.scores.iter().enumerate() {
                write_scores(&mut run, &format!("scores_s{}.csv", s + 1), &ids, set)?;
            }
            run.write_json("truth.json", &cohort.truth)?;
            (cohort.covariates, cohort.scores)
        }
        (None, None) => {
            return Err(CliError::Config(
                "give --covariates and --scores, or a `cohort` section in the config".into(),
            ))
        }
    };
    let reports = run_model_suite(&cov, &scores, &cfg.suite)?;
    write_suite_csv(&reports, run.path("suite.csv")?)?;
    write_suite_json(&reports, run.path("suite.json")?)?;
    for r in &reports {
        println!(
            "model {:>2} ({}): adj R2 {:.3}, {} terms",
            r.model,
            r.response.name(),
            r.adj_r_squared,
            r.terms.len()
        );
    }
    run.finish(g, &cfg, &inputs)
}

pub fn compare(g: &GlobalArgs) -> Result<(), CliError> {
    let mut cfg: CompareConfig = load_config(g)?;
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some((u, v)) = g.grid {
        (cfg.n_u, cfg.n_v) = (u, v);
    }
    let mut run = Run::start(g, "compare")?;
    let r = run_compare(&cfg)?;
    let header = [
        "pipeline",
        "d_inter",
        "d_intra",
        "margin",
        "cumulative_variance",
    ]
    .map(String::from);
    let rows = [("elastic", r.elastic), ("vertex", r.vertex)].map(|(name, s)| {
        vec![
            name.to_string(),
            num(s.d_inter),
            num(s.d_intra),
            num(s.margin()),
            num(s.cumulative_variance),
        ]
    });
    run.write_text("compare.csv", &csv(&header, rows))?;
    let n = r.elastic_curve.len().max(r.vertex_curve.len());
    let cell = |c: &[f64], d: usize| c.get(d).map_or(String::new(), |x| num(*x));
    let rows = (0..n).map(|d| {
        vec![
            (d + 1).to_string(),
            cell(&r.elastic_curve, d),
            cell(&r.vertex_curve, d),
        ]
    });
    run.write_text(
        "cumulative_variance.csv",
        &csv(&["d".into(), "elastic".into(), "vertex".into()], rows),
    )?;
    run.write_json("compare.json", &r)?;
    println!(
        "elastic: inter {:.4} intra {:.4}; vertex: inter {:.4} intra {:.4}",
        r.elastic.d_inter, r.elastic.d_intra, r.vertex.d_inter, r.vertex.d_intra
    );
    run.finish(g, &cfg, &[])
}
