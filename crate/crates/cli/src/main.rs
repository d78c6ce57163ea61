use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use log::info;

use privgraph_core::align::{d_two_infinity_report, hausdorff};
use privgraph_core::harness::{adjusted_rand_index, kmeans, run_experiment, ExperimentConfig, ExperimentOutput};
use privgraph_core::io::read_table;
use privgraph_core::model::{sample_grdpg, sample_latent};
use privgraph_core::privacy::edge_flip;
use privgraph_core::spectral::{embed_graph, pase};
use privgraph_core::tda::{bottleneck_pairs, rips_persistence, topo_cluster_with, PersistenceDiagram};
use privgraph_core::util::{fmt_f64, parse_f64};
use privgraph_core::{Error, Graph, LatentDistributionSpec, Result, Signature};

/// Edge-private spectral inference on random dot-product graphs.
#[derive(Parser)]
#[command(name = "privgraph", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample latent positions and a graph from a latent distribution.
    Sample(SampleArgs),
    /// Flip every vertex pair with probability 1/(e^eps + 1).
    Flip(FlipArgs),
    /// Adjacency spectral embedding.
    Embed(EmbedArgs),
    /// Privacy-adjusted spectral embedding of a flipped graph.
    Pase(PaseArgs),
    /// Distance between an estimate and the true latent positions.
    Metric(MetricArgs),
    /// Rips persistence diagrams and bottleneck distances.
    Tda(TdaArgs),
    /// Cluster a point set.
    Cluster(ClusterArgs),
    /// Run a configured experiment grid.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SampleArgs {
    /// JSON latent distribution spec.
    #[arg(long)]
    latent: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Latent positions CSV.
    #[arg(long)]
    latent_out: Option<PathBuf>,
    /// Edge list; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FlipArgs {
    /// Graph file.
    #[arg(long = "in", alias = "graph")]
    input: PathBuf,
    #[arg(long, value_parser = parse_eps)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    /// Graph file.
    #[arg(long = "in", alias = "graph")]
    input: PathBuf,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PaseArgs {
    /// The flipped graph.
    #[arg(long = "in", alias = "graph")]
    input: PathBuf,
    #[arg(long, value_parser = parse_eps)]
    eps: f64,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Write X̌/√ρ̌ instead of X̌.
    #[arg(long)]
    rescale: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricKind {
    D2inf,
    Hausdorff,
}

/// Inputs are numeric CSVs. A `rho_check=` header (embedding files) divides
/// the rows by `√rho_check` and a `mu=` header (latent files) by `√mu`, so
/// estimates and truths are compared at the same scale.
#[derive(Args)]
struct MetricArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Signature `p,q`; read from a latent file header when absent.
    #[arg(long)]
    sig: Option<Signature>,
    #[arg(long, value_enum, default_value_t = MetricKind::D2inf)]
    kind: MetricKind,
    /// Use the rows as stored, ignoring scale headers.
    #[arg(long)]
    raw: bool,
}

#[derive(Args)]
struct TdaArgs {
    /// Point set CSV; its diagram is written to --out.
    #[arg(long = "in", alias = "points", required_unless_present = "bottleneck", conflicts_with = "bottleneck")]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    max_dim: usize,
    #[arg(long)]
    max_radius: Option<f64>,
    /// Two diagram CSVs to compare.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    bottleneck: Option<Vec<PathBuf>>,
    #[arg(long, default_value_t = 0)]
    dim: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClusterMethod {
    Topo,
    Kmeans,
}

#[derive(Args)]
struct ClusterArgs {
    /// Point set CSV.
    #[arg(long = "in", alias = "points")]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = ClusterMethod::Topo)]
    method: ClusterMethod,
    /// Number of clusters for k-means.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Outlier cutoff for topological clustering.
    #[arg(long, default_value_t = 10.0)]
    q: f64,
    #[arg(long, default_value_t = 5)]
    lof_neighbors: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Labels file to score against; the ARI is printed.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    name: String,
    #[arg(long)]
    config: PathBuf,
    /// Results CSV; defaults to the config's `output`, then standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Contour CSV of the heatmap; defaults to `<out>.contours.csv`.
    #[arg(long)]
    contours: Option<PathBuf>,
}

fn parse_eps(s: &str) -> std::result::Result<f64, String> {
    match parse_f64(s) {
        Some(v) if v >= 0.0 => Ok(v),
        _ => Err(format!("{s:?} is not a nonnegative number or `inf`")),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn finish(mut w: Box<dyn Write>) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn read_graph(path: &Path) -> Result<Graph> {
    Graph::read_from(open(path)?)
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && *l != "label")
        .map(|l| l.parse().map_err(|_| Error::Parse(format!("bad label {l:?}"))))
        .collect()
}

fn sample(a: SampleArgs) -> Result<()> {
    let spec: LatentDistributionSpec = serde_json::from_reader(open(&a.latent)?)?;
    let x = sample_latent(&spec, a.n, a.seed)?;
    let g = sample_grdpg(&x, a.rho, a.seed)?;
    if let Some(p) = &a.latent_out {
        x.write_csv(BufWriter::new(File::create(p)?))?;
    }
    info!("sampled {} vertices, {} edges", g.n(), g.edge_count());
    let mut w = sink(a.out.as_deref())?;
    g.write_to(&mut w)?;
    finish(w)
}

fn flip(a: FlipArgs) -> Result<()> {
    let z = edge_flip(&read_graph(&a.input)?, a.eps, a.seed)?;
    let mut w = sink(a.out.as_deref())?;
    z.write_to(&mut w)?;
    finish(w)
}

fn embed(a: EmbedArgs) -> Result<()> {
    let e = embed_graph(&read_graph(&a.input)?, a.dim)?;
    let mut w = sink(a.out.as_deref())?;
    e.write_csv(f64::NAN, &mut w)?;
    finish(w)
}

fn run_pase(a: PaseArgs) -> Result<()> {
    let r = pase(&read_graph(&a.input)?, a.eps, a.dim)?;
    let mut e = r.embedding.clone();
    if a.rescale {
        e.xhat = r.rescaled()?;
    }
    let mut w = sink(a.out.as_deref())?;
    e.write_csv(r.rho_check, &mut w)?;
    finish(w)
}

struct PointFile {
    rows: DMatrix<f64>,
    sig: Option<Signature>,
}

fn read_points(path: &Path, raw: bool) -> Result<PointFile> {
    let t = read_table(open(path)?)?;
    let number = |k: &str| t.header.get(k).map(|v| parse_f64(v).ok_or_else(|| Error::Parse(format!("bad {k} {v:?}"))));
    let scale = match (number("rho_check").transpose()?, number("mu").transpose()?) {
        _ if raw => 1.0,
        (Some(r), _) if r > 0.0 => r,
        (Some(r), _) => return Err(Error::RescaleInvalid(r)),
        (None, Some(mu)) => mu,
        (None, None) => 1.0,
    };
    let sig = match (t.header.get("p"), t.header.get("q")) {
        (Some(p), Some(q)) => Some(format!("{p},{q}").parse()?),
        _ => None,
    };
    Ok(PointFile {
        rows: t.matrix / scale.sqrt(),
        sig,
    })
}

fn metric(a: MetricArgs) -> Result<()> {
    let x = read_points(&a.a, a.raw)?;
    let y = read_points(&a.b, a.raw)?;
    match a.kind {
        MetricKind::D2inf => {
            let sig = a
                .sig
                .or(x.sig)
                .or(y.sig)
                .ok_or_else(|| Error::Parameter("no signature: pass --sig p,q".into()))?;
            let r = d_two_infinity_report(&x.rows, &y.rows, sig)?;
            println!("d2inf={}", fmt_f64(r.value));
            println!("frobenius_residual={}", fmt_f64(r.frobenius_residual));
            println!("signature_a={},{}", r.sig_x.p, r.sig_x.q);
            println!("signature_b={},{}", r.sig_y.p, r.sig_y.q);
        }
        MetricKind::Hausdorff => println!("hausdorff={}", fmt_f64(hausdorff(&x.rows, &y.rows)?)),
    }
    Ok(())
}

fn tda(a: TdaArgs) -> Result<()> {
    if let Some(files) = &a.bottleneck {
        let d1 = PersistenceDiagram::read_csv(open(&files[0])?)?;
        let d2 = PersistenceDiagram::read_csv(open(&files[1])?)?;
        let b = bottleneck_pairs(&d1.pairs(a.dim), &d2.pairs(a.dim));
        if b.essential_mismatch {
            log::warn!("essential feature counts differ in dimension {}", a.dim);
        }
        println!("{}", fmt_f64(b.distance));
        return Ok(());
    }
    let points = read_table(open(a.input.as_deref().expect("clap enforces --in"))?)?.matrix;
    let dgm = rips_persistence(&points, a.max_dim, a.max_radius)?;
    let mut w = sink(a.out.as_deref())?;
    dgm.write_csv(&mut w)?;
    finish(w)
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let points = read_table(open(&a.input)?)?.matrix;
    let labels = match a.method {
        ClusterMethod::Topo => topo_cluster_with(&points, a.q, a.lof_neighbors)?,
        ClusterMethod::Kmeans => kmeans(&points, a.k, a.seed)?,
    };
    if let Some(t) = &a.truth {
        let ari = adjusted_rand_index(&read_labels(t)?, &labels)?;
        eprintln!("ari {}", fmt_f64(ari));
    }
    let mut w = sink(a.out.as_deref())?;
    writeln!(w, "label")?;
    for l in labels {
        writeln!(w, "{l}")?;
    }
    finish(w)
}

fn contour_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.contours.csv"))
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let cfg = ExperimentConfig::from_json(&std::fs::read_to_string(&a.config)?)?;
    let name: privgraph_core::harness::ExperimentKind = a.name.parse()?;
    if name != cfg.experiment {
        return Err(Error::Parameter(format!(
            "--name {} does not match the config's experiment {:?}",
            a.name, cfg.experiment
        )));
    }
    let out = a.out.or_else(|| cfg.output.as_ref().map(PathBuf::from));
    let result = run_experiment(&cfg)?;
    let mut w = sink(out.as_deref())?;
    result.write_csv(&mut w)?;
    finish(w)?;
    if let ExperimentOutput::Heatmap(h) = &result {
        if let Some(path) = a.contours.or_else(|| out.as_deref().map(contour_path)) {
            let mut w = sink(Some(&path))?;
            h.write_contours_csv(&mut w)?;
            finish(w)?;
        }
    }
    Ok(())
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Sample(a) => sample(a),
        Command::Flip(a) => flip(a),
        Command::Embed(a) => embed(a),
        Command::Pase(a) => run_pase(a),
        Command::Metric(a) => metric(a),
        Command::Tda(a) => tda(a),
        Command::Cluster(a) => cluster(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

