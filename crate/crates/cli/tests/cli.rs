use serde_json::Value;
use sparse_music::analysis::ric_bruteforce;
use sparse_music::forward::{assemble_data, scheme_pair, DataMode};
use sparse_music::harness::*;
use sparse_music::io::{imaging_csv, read_matrix, write_matrix};
use sparse_music::linalg::{CMat, CVec, C64};
use sparse_music::scene::SceneDocument;
use sparse_music::solvers::{bpdn_solve, omp_solve, BpdnOptions, ProblemFile, SolutionFile, SparseProblem};
use sparse_music::spectral::{draw_model, exact_covariances, identify_frequencies};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sparse-music"));
    c.env_remove("SPARSE_MUSIC_THREADS");
    c
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn ok(args: &[&str], dir: &Path) -> Value {
    let o = run(args, dir);
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn unit_columns(rows: usize, cols: usize, seed: u64) -> CMat {
    let mut m = CMat::from_fn(rows, cols, |i, j| {
        let t = (seed as f64 + 1.0) * (1.3 * i as f64 + 0.7 * j as f64 * j as f64 + 0.1);
        C64::new(t.sin(), (1.7 * t).cos())
    });
    for mut c in m.column_iter_mut() {
        let n = c.norm();
        c /= C64::new(n, 0.0);
    }
    m
}

#[test]
fn simulate_then_music_matches_library() {
    let d = scratch("music");
    ok(&["simulate", "--set", "n=12", "--set", "s=3", "--set", "sigma=0.01", "--out", "sim"], &d);
    let summary = ok(&["music", "--config", "sim/scene.json", "--threshold", "fixed", "--data", "sim/data.bin", "--out", "img"], &d);
    let doc = SceneDocument::from_json(&std::fs::read_to_string(d.join("sim/scene.json")).unwrap()).unwrap();
    let pair = scheme_pair(&doc.grid, &doc.scene, doc.scheme.as_ref().unwrap()).unwrap();
    let y = read_matrix(&d.join("sim/data.bin")).unwrap();
    let img = music_image(&y, &pair, &doc.scene.support, 3, SupportChoice::Fixed, &mut Diagnostics::default()).unwrap();
    assert_eq!(std::fs::read_to_string(d.join("img/imaging.csv")).unwrap(), imaging_csv(&doc.grid, &img).unwrap());
    assert!(d.join("img/imaging.pgm").exists());
    assert_eq!(summary["threshold"], 128.0 / 25.0);
    assert_eq!(summary["recovered"], serde_json::to_value(&img.recovered_support).unwrap());
    std::fs::remove_dir_all(d).unwrap();
}

#[test]
fn simulated_instance_is_the_first_trial() {
    let d = scratch("sim");
    ok(&["simulate", "--set", "n=10", "--set", "s=4", "--seed", "5", "--out", "sim"], &d);
    let c = ExperimentConfig { n: 10, s: 4, seed: 5, ..Default::default() };
    let inst = draw_instance(&c, c.trial_seed(0)).unwrap();
    let doc = SceneDocument::from_json(&std::fs::read_to_string(d.join("sim/scene.json")).unwrap()).unwrap();
    assert_eq!(doc.scene, inst.scene);
    assert_eq!(read_matrix(&d.join("sim/data.bin")).unwrap(), inst.data.y);
    assert!(std::fs::read_to_string(d.join("sim/data.csv")).unwrap().starts_with("row,col,re,im"));
    let music = ok(&["music", "--set", "n=10", "--set", "s=4", "--seed", "5", "--out", "img"], &d);
    let trial = run_trial(&c, c.trial_seed(0));
    assert_eq!(music["recovered"], serde_json::to_value(&trial.recovered).unwrap());
    assert_eq!(music["exact"], trial.exact);
    std::fs::remove_dir_all(d).unwrap();
}

#[test]
fn noiseless_scene_document_recovers_support() {
    let d = scratch("doc");
    ok(&["simulate", "--set", "n=15", "--set", "s=5", "--out", "sim"], &d);
    let v = ok(&["music", "--config", "sim/scene.json", "--out", "img"], &d);
    assert_eq!(v["exact"], true);
    let doc = SceneDocument::from_json(&std::fs::read_to_string(d.join("sim/scene.json")).unwrap()).unwrap();
    let pair = scheme_pair(&doc.grid, &doc.scene, doc.scheme.as_ref().unwrap()).unwrap();
    let y = assemble_data(&pair, &doc.scene, DataMode::Born).unwrap().y;
    let img = music_image(&y, &pair, &doc.scene.support, 5, SupportChoice::TopPeaks, &mut Diagnostics::default()).unwrap();
    assert_eq!(std::fs::read_to_string(d.join("img/imaging.csv")).unwrap(), imaging_csv(&doc.grid, &img).unwrap());
    std::fs::remove_dir_all(d).unwrap();
}

#[test]
fn analyze_bruteforce_matches_library() {
    let d = scratch("analyze");
    let m = unit_columns(6, 10, 3);
    write_matrix(&d.join("matrix.bin"), &m).unwrap();
    let v = ok(&["analyze", "--ric", "bruteforce", "--order", "3", "matrix.bin"], &d);
    let want = ric_bruteforce(&m, 3).unwrap();
    assert_eq!(v["ric"], serde_json::to_value(&want).unwrap());
    let entries = v["entries"].as_array().unwrap();
    assert!(entries.iter().all(|e| e["satisfied"] == true && e.get("name").is_some() && e.get("measured").is_some() && e.get("bound").is_some()));
    assert!(d.join("results/report.json").exists());
    std::fs::remove_dir_all(d).unwrap();
}

#[test]
fn analyze_scene_emits_budget() {
    let d = scratch("budget");
    ok(&["simulate", "--set", "n=10", "--set", "s=2", "--set", "sigma=0.001", "--set", "geometry.side=10", "--out", "sim"], &d);
    let v = ok(&["analyze", "sim/scene.json", "--data", "sim/data.bin"], &d);
    let names: Vec<&str> = v["entries"].as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"noise_to_scatterer_ratio") && names.contains(&"error_term_norm"), "{names:?}");
    assert!(v["budget"]["epsilon"].as_f64().unwrap() > 0.0);
    std::fs::remove_dir_all(d).unwrap();
}

#[test]
fn solvers_match_library() {
    let d = scratch("solvers");
    let a = unit_columns(6, 10, 1);
    let mut z = CVec::zeros(10);
    z[2] = C64::new(1.5, -0.5);
    let y = &a * &z;
    let p = SparseProblem::new(a.clone(), y.clone(), 0.0).unwrap();
    std::fs::write(d.join("problem.json"), serde_json::to_string(&ProblemFile::from_problem(&p)).unwrap()).unwrap();
    let v = ok(&["bpdn", "problem.json", "--set", "tol=1e-9", "--set", "max_iters=20000"], &d);
    let want = bpdn_solve(&p, &BpdnOptions { tol: 1e-9, max_iters: 20000, ..Default::default() }).unwrap();
    assert_eq!(serde_json::from_value::<SolutionFile>(v).unwrap(), SolutionFile::from(&want));
    write_matrix(&d.join("a.bin"), &a).unwrap();
    write_matrix(&d.join("y.bin"), &CMat::from_column_slice(6, 1, y.as_slice())).unwrap();
    let v = ok(&["omp", "a.bin", "--data", "y.bin", "--sparsity", "1"], &d);
    let want = omp_solve(&p, 1).unwrap();
    assert_eq!(serde_json::from_value::<SolutionFile>(v).unwrap(), SolutionFile::from(&want));
    let o = run(&["omp", "a.bin", "--sparsity", "1"], &d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--data"));
    std::fs::remove_dir_all(d).unwrap();
}

#[test]
fn spectral_matches_library() {
    let d = scratch("spectral");
    let v = ok(&["spectral", "--tones", "64", "--sparsity", "4", "--samples", "24", "--realizations", "1", "--noise", "1", "--mode", "exact", "--seed", "7"], &d);
    let model = draw_model(64, 4, 24, 1, 7).unwrap();
    let est = identify_frequencies(&model, &exact_covariances(&model, 1.0)).unwrap();
    assert_eq!(v["indices"], serde_json::to_value(&est.indices).unwrap());
    assert_eq!(v["exact"], true);
    let e = ok(&["spectral", "--mode", "empirical", "--realizations", "200", "--noise", "0.1"], &d);
    assert_eq!(e["indices"].as_array().unwrap().len(), 4);
    std::fs::remove_dir_all(d).unwrap();
}

#[test]
fn experiment_sweep_writes_hashed_results() {
    let d = scratch("experiment");
    std::fs::write(
        d.join("exp.toml"),
        "n = 10\ns = 3\ntrials = 8\n[geometry]\nside = 20\n[sweep]\naxis = \"noise\"\nvalues = [0.0, 0.5]\n",
    )
    .unwrap();
    let v = ok(&["experiment", "--config", "exp.toml", "--out", "res"], &d);
    let c = ExperimentConfig {
        n: 10,
        s: 3,
        trials: 8,
        geometry: Geometry { side: 20, ..Default::default() },
        sweep: Some(Sweep { axis: Axis::Noise, values: vec![0.0, 0.5] }),
        ..Default::default()
    };
    let dir = results_dir(&d.join("res"), &c);
    assert_eq!(Path::new(v["dir"].as_str().unwrap()), Path::new("res").join(c.hash()));
    let curve = success_curve(&c, Axis::Noise, &[0.0, 0.5]).unwrap();
    assert_eq!(std::fs::read_to_string(dir.join("curves.csv")).unwrap(), curve_csv(&curve));
    for ext in ["json", "svg"] {
        assert!(dir.join(format!("curves.{ext}")).exists());
    }
    let saved: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(dir.join("config.json")).unwrap()).unwrap();
    assert_eq!(saved, c);
    std::fs::remove_dir_all(d).unwrap();
}

#[test]
fn experiment_point_and_sparsity() {
    let d = scratch("point");
    let v = ok(&["experiment", "--set", "n=8", "--set", "s=2", "--set", "trials=10", "--set", "geometry.side=20", "--threads", "2"], &d);
    let c = ExperimentConfig { n: 8, s: 2, trials: 10, geometry: Geometry { side: 20, ..Default::default() }, ..Default::default() };
    let k = run_point(&c).unwrap().iter().filter(|o| o.exact).count();
    assert_eq!(v["successes"], k);
    let v = ok(&["experiment", "--set", "trials=10", "--set", "geometry.side=20", "--recoverable", "4,6"], &d);
    assert_eq!(v["sparsity"][1]["s_max"], 5);
    std::fs::remove_dir_all(d).unwrap();
}

#[test]
fn precedence_file_then_overrides_then_flags() {
    let d = scratch("precedence");
    std::fs::write(d.join("c.json"), r#"{"n": 5, "s": 2, "seed": 1, "threshold": "gamma"}"#).unwrap();
    let o = run(&["simulate", "--config", "c.json", "--set", "seed=2", "--set", "s=3", "--seed", "3", "--threshold", "fixed"], &d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stderr(&o).lines().find(|l| l.starts_with("effective config: ")).unwrap().to_string();
    let eff: ExperimentConfig = serde_json::from_str(line.trim_start_matches("effective config: ")).unwrap();
    assert_eq!((eff.n, eff.s, eff.seed, eff.threshold), (5, 3, 3, SupportChoice::Fixed));
    std::fs::remove_dir_all(d).unwrap();
}

#[test]
fn error_exit_codes() {
    let d = scratch("errors");
    let o = run(&["music", "--config", "missing.json"], &d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.json"));
    let o = run(&["music", "--treshold", "fixed"], &d);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--threshold"), "{}", stderr(&o));
    assert_eq!(run(&["music", "--threshold", "median"], &d).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"], &d).status.code(), Some(2));
    assert_eq!(run(&[], &d).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--set", "novalue"], &d).status.code(), Some(2));
    let o = run(&["simulate", "--set", "geometry.sidee=3"], &d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("geometry.sidee"));
    let o = run(&["simulate", "--set", "s=0"], &d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"), "{}", stderr(&o));
    std::fs::remove_dir_all(d).unwrap();
}

#[test]
fn thread_count_from_environment() {
    let d = scratch("threads");
    let o = bin().args(["experiment", "--set", "trials=4", "--set", "geometry.side=10"]).env("SPARSE_MUSIC_THREADS", "1").current_dir(&d).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = bin().args(["simulate"]).env("SPARSE_MUSIC_THREADS", "many").current_dir(&d).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    std::fs::remove_dir_all(d).unwrap();
}
