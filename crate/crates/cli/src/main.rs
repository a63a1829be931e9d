use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hpssd_core::evaluation::{read_results, write_results, ResultsError};
use hpssd_core::harness::{
    self, execute_run_detailed, stream, Phase, SweepError, DESK_RUNS, PAPER_RUNS,
};
use hpssd_core::recruitment::write_forests_csv;
use hpssd_core::{
    evaluate, plot, report, sample_run_config, EvaluationReport, Population, RunResult,
    SweepManifest,
};

#[derive(Parser)]
#[command(
    name = "hpssd",
    version,
    about = "Hybrid probabilistic-snowball sampling simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one population and write its node table and edge list.
    Generate(GenerateArgs),
    /// Execute a single run and write its population, forests and result row.
    Run(RunArgs),
    /// Execute a Monte Carlo sweep and report on it.
    Sweep(SweepArgs),
    /// Recompute the report from a results CSV.
    Report(ReportArgs),
    /// Render SVG charts from a results CSV.
    Plot(PlotArgs),
}

/// Run parameters; anything left unset is drawn from the sweep ranges.
#[derive(Args)]
struct ParamArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Run index whose sampled parameters are used as defaults.
    #[arg(long, default_value_t = 0)]
    index: u64,
    #[arg(long)]
    omega: Option<u32>,
    #[arg(long)]
    p_d: Option<f64>,
    #[arg(long)]
    mean_degree: Option<f64>,
    #[arg(long)]
    w: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    r_v: Option<f64>,
}

impl ParamArgs {
    fn config(&self) -> harness::RunConfig {
        let mut c = sample_run_config(self.seed, self.index);
        if let Some(v) = self.omega {
            c.omega_count = v;
        }
        if let Some(v) = self.p_d {
            c.p_d = v;
        }
        if let Some(v) = self.mean_degree {
            c.target_mean_degree = v;
        }
        if let Some(v) = self.w {
            c.w = v;
        }
        if let Some(v) = self.gamma {
            c.gamma = v;
        }
        if let Some(v) = self.r_v {
            c.r_v = v;
        }
        c
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Output directory for nodes.csv and edges.tsv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Desk,
    Paper,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON manifest; flags given explicitly override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long, value_enum)]
    scale: Option<Scale>,
    #[arg(long, env = "HPSSD_PARALLELISM")]
    parallelism: Option<usize>,
    /// Output directory for results, report and tables.
    #[arg(long, default_value = "hpssd-out")]
    out: PathBuf,
    /// Also write SVG charts.
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct ReportArgs {
    results: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct PlotArgs {
    results: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// An error with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(error: anyhow::Error) -> Self {
        Self { code: 2, error }
    }
    fn data(error: anyhow::Error) -> Self {
        Self { code: 3, error }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self { code: 1, error }
    }
}

type CliResult = Result<(), Failure>;

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("cannot create {}", path.display())
    })?))
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create directory {}", dir.display()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn param_header(c: &harness::RunConfig) -> String {
    format!(
        "# seed={} index={} omega={} p_d={:.4} mean_degree={:.4} w={:.4} gamma={:.4} r_v={:.4}",
        c.master_seed, c.run_id, c.omega_count, c.p_d, c.target_mean_degree, c.w, c.gamma, c.r_v
    )
}

fn summary(pop: &Population) -> String {
    format!(
        "N={} edges={} mean_degree={:.4} y={:.4} phi_y={} phi_k={}",
        pop.len(),
        pop.edges.len(),
        pop.mean_degree(),
        pop.prevalence(),
        fmt_opt(pop.phi_y),
        fmt_opt(pop.phi_k)
    )
}

fn write_population(pop: &Population, header: &str, dir: &Path) -> anyhow::Result<()> {
    let mut nodes = create(&dir.join("nodes.csv"))?;
    pop.write_node_table(&mut nodes)?;
    nodes.flush()?;
    let mut edges = create(&dir.join("edges.tsv"))?;
    writeln!(edges, "{header}")?;
    pop.write_edge_list(&mut edges)?;
    edges.flush()?;
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> CliResult {
    let config = args.params.config();
    let params = config.network();
    params.validate().map_err(|e| Failure::usage(e.into()))?;
    let mut rng = stream(config.master_seed, config.run_id, Phase::Population);
    let pop = Population::generate(params, &mut rng).map_err(|e| Failure::usage(e.into()))?;
    ensure_dir(&args.out)?;
    let header = param_header(&config);
    write_population(&pop, &header, &args.out)?;
    for w in &pop.warnings {
        log::warn!("{w}");
    }
    println!("{header}");
    println!("{}", summary(&pop));
    Ok(())
}

fn cmd_run(args: RunArgs) -> CliResult {
    let config = args.params.config();
    config
        .network()
        .validate()
        .map_err(|e| Failure::usage(e.into()))?;
    let artifacts = execute_run_detailed(&config).map_err(|e| Failure::usage(e.into()))?;
    ensure_dir(&args.out)?;
    let header = param_header(&config);
    write_population(&artifacts.population, &header, &args.out)?;
    let mut forests = create(&args.out.join("forests.csv"))?;
    write_forests_csv(&mut forests, &artifacts.forests).map_err(anyhow::Error::from)?;
    forests.flush().map_err(anyhow::Error::from)?;
    write_results(
        create(&args.out.join("result.csv"))?,
        std::slice::from_ref(&artifacts.result),
    )
    .map_err(anyhow::Error::from)?;

    println!("{header}");
    println!("{}", summary(&artifacts.population));
    let r = &artifacts.result;
    println!(
        "golden: drawn={} responded={} estimate={}",
        r.golden_drawn,
        r.golden_size,
        fmt_opt(r.golden_estimate)
    );
    for s in hpssd_core::Scenario::ALL {
        let o = r.scenario(s);
        println!(
            "{:<4} seeds={} size={} seed_estimate={} estimate={}",
            s.label(),
            o.seeds,
            o.size,
            fmt_opt(o.seed_estimate),
            fmt_opt(o.estimate)
        );
    }
    Ok(())
}

fn load_manifest(path: &Path) -> Result<SweepManifest, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read manifest {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("malformed manifest {}", path.display()))
        .map_err(Failure::usage)
}

fn write_report(
    report: &EvaluationReport,
    results: &[RunResult],
    dir: &Path,
    plots: bool,
) -> anyhow::Result<()> {
    let mut file = create(&dir.join("report.json"))?;
    serde_json::to_writer_pretty(&mut file, report)?;
    writeln!(file)?;
    file.flush()?;
    report::write_tables(report, &dir.join("tables"))?;
    if plots {
        write_plots(report, results, dir)?;
    }
    Ok(())
}

fn write_plots(report: &EvaluationReport, results: &[RunResult], dir: &Path) -> anyhow::Result<()> {
    for (name, svg) in [
        ("phi_density.svg", plot::phi_density_svg(results)),
        ("zeta_quartiles.svg", plot::report_bars_svg(report, false)),
        (
            "zeta_debiased_quartiles.svg",
            plot::report_bars_svg(report, true),
        ),
    ] {
        let path = dir.join(name);
        fs::write(&path, svg).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> CliResult {
    let mut manifest = match &args.config {
        Some(path) => load_manifest(path)?,
        None => SweepManifest::new(args.seed.unwrap_or(1), DESK_RUNS),
    };
    if let Some(seed) = args.seed {
        manifest.master_seed = seed;
    }
    match (args.runs, args.scale) {
        (Some(n), _) => manifest.n_runs = n,
        (None, Some(Scale::Desk)) => manifest.n_runs = DESK_RUNS,
        (None, Some(Scale::Paper)) => manifest.n_runs = PAPER_RUNS,
        (None, None) => {}
    }
    if let Some(p) = args.parallelism {
        manifest.parallelism = p;
    }
    if args.config.is_none() || manifest.results_path.is_none() {
        manifest.results_path = Some(args.out.join("results.csv"));
    }
    manifest.report_path = None;
    manifest.validate().map_err(|e| Failure::usage(e.into()))?;
    let dir = manifest
        .results_path
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default();
    ensure_dir(&dir)?;

    let outcome = harness::execute_sweep(&manifest).map_err(|e| match e {
        SweepError::Manifest(_) => Failure::usage(e.into()),
        SweepError::Results { .. } => Failure::data(e.into()),
        other => Failure::from(anyhow::Error::from(other)),
    })?;
    for f in &outcome.failures {
        log::warn!("{f}");
    }
    eprintln!(
        "completed {} runs ({} resumed, {} failed)",
        outcome.results.len(),
        outcome.resumed,
        outcome.failures.len()
    );
    write_report(&outcome.report, &outcome.results, &dir, args.plot)?;
    print!("{}", report::render_text(&outcome.report));
    Ok(())
}

fn load_results(path: &Path) -> Result<Vec<RunResult>, Failure> {
    let file = File::open(path)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(Failure::from)?;
    match read_results(file) {
        Ok(rows) => Ok(rows),
        Err(ResultsError::Csv(e)) if e.is_io_error() => Err(anyhow!(e).into()),
        Err(e) => Err(Failure::data(anyhow!("{}: {e}", path.display()))),
    }
}

fn cmd_report(args: ReportArgs) -> CliResult {
    let results = load_results(&args.results)?;
    let report = evaluate(&results);
    ensure_dir(&args.out)?;
    write_report(&report, &results, &args.out, args.plot)?;
    print!("{}", report::render_text(&report));
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> CliResult {
    let results = load_results(&args.results)?;
    ensure_dir(&args.out)?;
    write_plots(&evaluate(&results), &results, &args.out)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
        Command::Plot(a) => cmd_plot(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
