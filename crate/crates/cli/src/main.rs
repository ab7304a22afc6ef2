//! `sparse-music`: forward simulation, MUSIC imaging, BPDN/OMP baselines,
//! analysis reports, spectral estimation and Monte Carlo sweeps.

mod config;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sparse_music::analysis::{mutual_coherence, ric_bruteforce, ric_coherence_bound, ric_sampled, stability_budget, BoundEntry, BudgetReport};
use sparse_music::forward::{assemble_data, scheme_pair, DataMode};
use sparse_music::harness::{
    draw_instance, export, music_image, recoverable_sparsity, results_dir, run_point, success_curve, wilson_interval, Axis,
    Diagnostics, ExperimentConfig, Format,
};
use sparse_music::io::{decode_matrix, imaging_csv, imaging_heatmap, read_matrix, write_matrix, write_matrix_csv, MATRIX_MAGIC};
use sparse_music::linalg::{CMat, CVec};
use sparse_music::rng::derive_label;
use sparse_music::scene::SceneDocument;
use sparse_music::solvers::{bpdn_solve, omp_solve, BpdnOptions, ProblemFile, SolutionFile, SparseProblem};
use sparse_music::spectral::{draw_model, empirical_covariances, exact_covariances, identify_frequencies, synthesize};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Environment variable holding the default worker-thread count.
const THREADS_ENV: &str = "SPARSE_MUSIC_THREADS";

#[derive(Parser)]
#[command(name = "sparse-music", version, about = "MUSIC imaging of sparse objects with compressed-sensing diagnostics")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Configuration file (TOML or JSON); `music` and `analyze` also accept a scene document.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Configuration override; dotted keys reach nested fields. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true, value_parser = config::parse_override)]
    overrides: Vec<(String, Value)>,
    /// Master seed [default: 0].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Worker threads for Monte Carlo sweeps [default: all cores].
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    /// Support rule for MUSIC [default: top-peaks].
    #[arg(long, global = true, value_enum)]
    threshold: Option<ThresholdArg>,
    /// Recovery method for experiments [default: music].
    #[arg(long, global = true, value_enum)]
    method: Option<MethodArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ThresholdArg {
    Gamma,
    Ric,
    Fixed,
    TopPeaks,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Music,
    BpdnFullMatrix,
    BpdnSingleColumn,
    Omp,
}

#[derive(Clone, Copy, ValueEnum)]
enum RicArg {
    Bruteforce,
    Coherence,
    Sampled,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    #[default]
    Exact,
    Empirical,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Svg,
}

#[derive(Subcommand)]
enum Command {
    /// Draw an instance and write its scene document and data matrix.
    Simulate,
    /// MUSIC imaging of a drawn instance or of a scene document.
    Music {
        /// Data matrix container replacing the simulated data.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Basis pursuit denoising.
    Bpdn(SolverInput),
    /// Orthogonal matching pursuit.
    Omp {
        #[command(flatten)]
        input: SolverInput,
        /// Number of atoms to select.
        #[arg(long)]
        sparsity: usize,
    },
    /// Coherence/RIC report for a matrix, or stability budget for a scene.
    Analyze {
        /// Matrix container or scene document; without it the configured instance is analyzed.
        input: Option<PathBuf>,
        /// RIC estimator.
        #[arg(long, value_enum)]
        ric: Option<RicArg>,
        /// RIC order.
        #[arg(long, default_value_t = 2)]
        order: usize,
        /// Subsets drawn by the sampled estimator.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Noisy data matrix container for a scene document.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Multi-tone spectral estimation from sample covariances.
    Spectral {
        #[arg(long)]
        tones: Option<usize>,
        #[arg(long)]
        sparsity: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        realizations: Option<usize>,
        /// Noise standard deviation σ.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Monte Carlo experiment: a sweep, a recoverable-sparsity curve or a single point.
    Experiment {
        /// Sensor counts for a recoverable-sparsity curve.
        #[arg(long, value_delimiter = ',')]
        recoverable: Vec<usize>,
        /// Curve export formats.
        #[arg(long, value_enum, value_delimiter = ',', default_value = "csv,json,svg")]
        format: Vec<FormatArg>,
    },
}

#[derive(Args)]
struct SolverInput {
    /// Problem JSON or matrix container.
    input: PathBuf,
    /// Data vector container (required with a matrix container).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Noise budget ε, overriding the problem file.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
struct SpectralConfig {
    tones: usize,
    sparsity: usize,
    samples: usize,
    realizations: usize,
    noise: f64,
    mode: ModeArg,
    seed: u64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig { tones: 64, sparsity: 4, samples: 24, realizations: 1, noise: 0.0, mode: ModeArg::Exact, seed: 0 }
    }
}

fn name_of<T: ValueEnum>(v: T) -> Value {
    Value::String(v.to_possible_value().expect("named variant").get_name().to_string())
}

impl Global {
    fn file(&self) -> Result<Option<Value>> {
        self.config.as_deref().map(config::load).transpose()
    }

    fn experiment(&self) -> Result<ExperimentConfig> {
        let mut flags = Vec::new();
        if let Some(s) = self.seed {
            flags.push(("seed", Value::from(s)));
        }
        if let Some(t) = self.threshold {
            flags.push(("threshold", name_of(t)));
        }
        if let Some(m) = self.method {
            flags.push(("method", name_of(m)));
        }
        let c: ExperimentConfig = config::effective(self.file()?, &self.overrides, &flags)?;
        c.validate()?;
        print_effective(&c)?;
        Ok(c)
    }

    fn out_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("cannot create output directory {}", self.out.display()))?;
        Ok(&self.out)
    }
}

fn print_effective<T: Serialize>(c: &T) -> Result<()> {
    eprintln!("effective config: {}", serde_json::to_string(c)?);
    Ok(())
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn emit(path: &Path, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    write(path, format!("{text}\n"))?;
    // A closed stdout (e.g. piped into `head`) is not an error; the file holds the result.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    Ok(())
}

fn is_scene_document(v: &Value) -> bool {
    v.get("format").is_some()
}

fn simulate(g: &Global) -> Result<()> {
    let c = g.experiment()?;
    let seed = c.trial_seed(0);
    let inst = draw_instance(&c, seed)?;
    let out = g.out_dir()?;
    let doc = SceneDocument::new(inst.grid, inst.scene, Some(inst.scheme), seed);
    write(&out.join("scene.json"), doc.to_json()?)?;
    write_matrix(&out.join("data.bin"), &inst.data.y)?;
    write_matrix_csv(&out.join("data.csv"), &inst.data.y)?;
    write_matrix(&out.join("clean.bin"), &inst.data.clean())?;
    write(&out.join("config.json"), serde_json::to_string_pretty(&c)?)?;
    emit(
        &out.join("simulate.json"),
        &json!({
            "seed": seed,
            "n": c.n,
            "s": doc.scene.s(),
            "support": doc.scene.support,
            "epsilon": inst.data.epsilon_realized,
            "files": ["scene.json", "data.bin", "data.csv", "clean.bin", "config.json"],
        }),
    )
}

fn music(g: &Global, data: Option<&Path>) -> Result<()> {
    let file = g.file()?;
    let mut diag = Diagnostics::default();
    let (grid, truth, img) = if let Some(doc_value) = file.filter(is_scene_document) {
        if !g.overrides.is_empty() {
            bail!("--set overrides do not apply to scene documents");
        }
        let doc: SceneDocument = SceneDocument::from_json(&doc_value.to_string())?;
        let scheme = doc.scheme.as_ref().ok_or_else(|| anyhow!("scene document has no sampling scheme"))?;
        let pair = scheme_pair(&doc.grid, &doc.scene, scheme)?;
        let y = match data {
            Some(p) => read_matrix(p)?,
            None => assemble_data(&pair, &doc.scene, DataMode::Born)?.y,
        };
        let choice = serde_json::from_value(g.threshold.map_or(Value::from("top-peaks"), name_of))?;
        print_effective(&json!({"scene": g.config, "threshold": choice, "data": data}))?;
        let img = music_image(&y, &pair, &doc.scene.support, doc.scene.s(), choice, &mut diag)?;
        (doc.grid, doc.scene.support, img)
    } else {
        let c = g.experiment()?;
        let inst = draw_instance(&c, c.trial_seed(0))?;
        let y = match data {
            Some(p) => read_matrix(p)?,
            None => inst.data.y,
        };
        let img = music_image(&y, &inst.pair, &inst.scene.support, c.s, c.threshold, &mut diag)?;
        (inst.grid, inst.scene.support, img)
    };
    let out = g.out_dir()?;
    write(&out.join("imaging.csv"), imaging_csv(&grid, &img)?)?;
    let mut files = vec!["imaging.csv"];
    if grid.side.is_some() {
        write(&out.join("imaging.pgm"), imaging_heatmap(&grid, &img)?)?;
        files.push("imaging.pgm");
    }
    emit(
        &out.join("music.json"),
        &json!({
            "truth": truth,
            "recovered": img.recovered_support,
            "exact": img.recovered_support == truth,
            "rule": img.rule,
            "threshold": img.threshold_value,
            "diagnostics": diag,
            "files": files,
        }),
    )
}

fn as_vector(m: CMat, path: &Path) -> Result<CVec> {
    match m.shape() {
        (_, 1) => Ok(m.column(0).into_owned()),
        (1, _) => Ok(m.row(0).transpose()),
        s => bail!("{} holds a {}x{} matrix, expected a vector", path.display(), s.0, s.1),
    }
}

fn load_problem(input: &SolverInput) -> Result<SparseProblem> {
    let bytes = std::fs::read(&input.input).with_context(|| format!("cannot read {}", input.input.display()))?;
    let p = if bytes.starts_with(MATRIX_MAGIC) {
        let a = decode_matrix(&bytes)?;
        let path = input.data.as_deref().ok_or_else(|| anyhow!("--data is required with a matrix container"))?;
        SparseProblem::new(a, as_vector(read_matrix(path)?, path)?, input.epsilon.unwrap_or(0.0))?
    } else {
        let file: ProblemFile =
            serde_json::from_slice(&bytes).with_context(|| format!("{} is neither a matrix container nor a problem file", input.input.display()))?;
        let p = file.to_problem()?;
        match input.epsilon {
            Some(e) => SparseProblem::new(p.matrix, p.data, e)?,
            None => p,
        }
    };
    Ok(p)
}

fn bpdn(g: &Global, input: &SolverInput) -> Result<()> {
    let opts: BpdnOptions = config::effective(g.file()?, &g.overrides, &[])?;
    print_effective(&opts)?;
    let sol = bpdn_solve(&load_problem(input)?, &opts)?;
    emit(&g.out_dir()?.join("solution.json"), &serde_json::to_value(SolutionFile::from(&sol))?)
}

fn omp(g: &Global, input: &SolverInput, sparsity: usize) -> Result<()> {
    let sol = omp_solve(&load_problem(input)?, sparsity)?;
    emit(&g.out_dir()?.join("solution.json"), &serde_json::to_value(SolutionFile::from(&sol))?)
}

fn matrix_report(m: &CMat, method: RicArg, order: usize, samples: usize, seed: u64) -> Result<Value> {
    let coherence = mutual_coherence(m)?;
    let bound = ric_coherence_bound(&coherence, order);
    let (name, ric) = match method {
        RicArg::Bruteforce => ("bruteforce", ric_bruteforce(m, order)?),
        RicArg::Coherence => ("coherence", bound.clone()),
        RicArg::Sampled => {
            let all = ric_sampled(m, order, samples, seed)?;
            let first = all.first().cloned().ok_or_else(|| anyhow!("no subsets sampled"))?;
            ("sampled", all.iter().fold(first, |acc, r| acc.max(r)))
        }
    };
    let entries = vec![
        BoundEntry::upper("delta_plus_vs_coherence_bound", ric.delta_plus, bound.delta_plus),
        BoundEntry::upper("delta_minus_vs_coherence_bound", ric.delta_minus, bound.delta_minus),
    ];
    Ok(json!({
        "rows": m.nrows(),
        "cols": m.ncols(),
        "order": order,
        "method": name,
        "coherence": coherence,
        "ric": ric,
        "coherence_bound": bound,
        "entries": entries,
    }))
}

fn budget_report(doc: &SceneDocument, data: Option<&Path>, brute: bool) -> Result<Value> {
    let scheme = doc.scheme.as_ref().ok_or_else(|| anyhow!("scene document has no sampling scheme"))?;
    let pair = scheme_pair(&doc.grid, &doc.scene, scheme)?;
    let clean = assemble_data(&pair, &doc.scene, DataMode::Born)?.y;
    let noise = data.map(read_matrix).transpose()?.map(|y| y - &clean);
    let ric = if brute {
        let s = doc.scene.s();
        let rs = ric_bruteforce(&pair.phi_ext, s)?.max(&ric_bruteforce(&pair.psi_ext, s)?);
        Some((rs, ric_bruteforce(&pair.phi_ext, s + 1)?))
    } else {
        None
    };
    let budget = stability_budget(&pair, &doc.scene.amplitudes, &clean, noise.as_ref(), ric.as_ref().map(|(a, b)| (a, b)), None)?;
    Ok(serde_json::to_value(BudgetReport { entries: budget.entries(), budget })?)
}

fn analyze(g: &Global, input: Option<&Path>, ric: Option<RicArg>, order: usize, samples: usize, data: Option<&Path>) -> Result<()> {
    let brute = matches!(ric, Some(RicArg::Bruteforce));
    let report = match input {
        Some(path) => {
            let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
            if bytes.starts_with(MATRIX_MAGIC) {
                print_effective(&json!({"input": path, "order": order, "samples": samples, "seed": g.seed.unwrap_or(0)}))?;
                matrix_report(&decode_matrix(&bytes)?, ric.unwrap_or(RicArg::Bruteforce), order, samples, g.seed.unwrap_or(0))?
            } else {
                let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8 JSON", path.display()))?;
                budget_report(&SceneDocument::from_json(&text)?, data, brute)?
            }
        }
        None => match g.file()?.filter(is_scene_document) {
            Some(doc) => budget_report(&SceneDocument::from_json(&doc.to_string())?, data, brute)?,
            None => {
                let c = g.experiment()?;
                let inst = draw_instance(&c, c.trial_seed(0))?;
                let doc = SceneDocument::new(inst.grid, inst.scene, Some(inst.scheme), 0);
                let pair = scheme_pair(&doc.grid, &doc.scene, doc.scheme.as_ref().unwrap())?;
                let clean = assemble_data(&pair, &doc.scene, DataMode::Born)?.y;
                let budget = stability_budget(&pair, &doc.scene.amplitudes, &clean, inst.data.noise.as_ref(), None, None)?;
                serde_json::to_value(BudgetReport { entries: budget.entries(), budget })?
            }
        },
    };
    emit(&g.out_dir()?.join("report.json"), &report)
}

fn spectral(g: &Global, flags: Vec<(&str, Value)>) -> Result<()> {
    let mut flags = flags;
    if let Some(s) = g.seed {
        flags.push(("seed", Value::from(s)));
    }
    let c: SpectralConfig = config::effective(g.file()?, &g.overrides, &flags)?;
    print_effective(&c)?;
    let model = draw_model(c.tones, c.sparsity, c.samples, c.realizations, c.seed)?;
    let var = c.noise * c.noise;
    let triple = match c.mode {
        ModeArg::Exact => exact_covariances(&model, var),
        ModeArg::Empirical => empirical_covariances(&model, &synthesize(&model, var, derive_label(c.seed, "synthesis"))?, var),
    };
    let est = identify_frequencies(&model, &triple)?;
    let frequencies: Vec<f64> = est.indices.iter().map(|&j| model.frequency(j)).collect();
    emit(
        &g.out_dir()?.join("spectral.json"),
        &json!({
            "support": model.support,
            "indices": est.indices,
            "frequencies": frequencies,
            "exact": est.indices == model.support,
            "relative_gap": est.relative_gap,
            "times": model.times,
        }),
    )
}

fn experiment(g: &Global, recoverable: &[usize], formats: &[FormatArg]) -> Result<()> {
    let c = g.experiment()?;
    let dir = results_dir(&g.out, &c);
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create results directory {}", dir.display()))?;
    write(&dir.join("config.json"), serde_json::to_string_pretty(&c)?)?;
    let summary = if !recoverable.is_empty() {
        let pts = recoverable_sparsity(&c, recoverable, c.method)?;
        let csv: String = std::iter::once("n,s_max\n".to_string()).chain(pts.iter().map(|p| format!("{},{}\n", p.n, p.s_max))).collect();
        write(&dir.join("sparsity.csv"), csv)?;
        json!({"method": c.method, "sparsity": pts})
    } else if let Some((axis, values)) = c.sweep.as_ref().map(|s| (s.axis, s.values.clone())).or_else(|| (!c.sigmas.is_empty()).then(|| (Axis::Noise, c.sigmas.clone()))) {
        let curve = success_curve(&c, axis, &values)?;
        let fmts: Vec<Format> = formats
            .iter()
            .map(|f| match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
                FormatArg::Svg => Format::Svg,
            })
            .collect();
        let files = export(std::slice::from_ref(&curve), &fmts, &dir)?;
        json!({"method": c.method, "axis": axis, "points": curve.points, "degenerate": curve.degenerate, "files": files})
    } else {
        let outcomes = run_point(&c)?;
        let k = outcomes.iter().filter(|o| o.exact).count();
        let (lo, hi) = wilson_interval(k, outcomes.len());
        write(&dir.join("outcomes.json"), serde_json::to_string_pretty(&outcomes)?)?;
        json!({"method": c.method, "successes": k, "trials": outcomes.len(), "rate": k as f64 / outcomes.len() as f64, "lo": lo, "hi": hi})
    };
    let mut summary = summary;
    summary["dir"] = json!(dir);
    emit(&dir.join("summary.json"), &summary)
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(t) = g.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("cannot start the worker pool")?;
    }
    match &cli.command {
        Command::Simulate => simulate(g),
        Command::Music { data } => music(g, data.as_deref()),
        Command::Bpdn(input) => bpdn(g, input),
        Command::Omp { input, sparsity } => omp(g, input, *sparsity),
        Command::Analyze { input, ric, order, samples, data } => analyze(g, input.as_deref(), *ric, *order, *samples, data.as_deref()),
        Command::Spectral { tones, sparsity, samples, realizations, noise, mode } => {
            let flags: Vec<(&str, Value)> = [
                ("tones", tones.map(Value::from)),
                ("sparsity", sparsity.map(Value::from)),
                ("samples", samples.map(Value::from)),
                ("realizations", realizations.map(Value::from)),
                ("noise", noise.map(Value::from)),
                ("mode", mode.map(name_of)),
            ]
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k, v)))
            .collect();
            spectral(g, flags)
        }
        Command::Experiment { recoverable, format } => experiment(g, recoverable, format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
