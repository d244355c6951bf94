//! Batch command line. Every subcommand reads files (or `-` for stdin) and
//! writes files (or `-` for stdout); nothing is kept between runs.

use std::ffi::OsString;
use std::fmt;
use std::io::{self, Read, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use csng::baseline_cluster::{compare, run_baseline, BaselineParams, DEFAULT_RESAMPLE};
use csng::community::{detect, modularity, CommunitiesJson, CommunityTree, MergeOptions, NodeId, Partition, SplitOutcome, UndirectedWeightedGraph};
use csng::csng_graph::{build_csng, Csng, GRAPH_MAGIC};
use csng::curve_model::{Dataset, LinesFormat, SegmentsJson, LINES_MAGIC};
use csng::field_tracer::{trace, TraceConfig};
use csng::layout_engine::{aggregate, run_layout, LayoutParams};
use csng::segment_index::SegmentDistanceMetric;
use serde::Serialize;
use serde_json::{json, Value};

use crate::api::{self, ServiceConfig};
use crate::inputs::{self, parse_domain, parse_f64_list, parse_field, parse_id_list, parse_seeding, GraphRequest, Method};
use crate::session::{SessionConfig, DEFAULT_MAX_SEGMENTS};

#[derive(Debug, Parser)]
#[command(name = "csng", version, about = "Curve segment neighborhood graphs: trace, cluster, lay out and compare")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate streamlines through a vector field.
    Trace(TraceArgs),
    /// Cut lines into fixed-span curve segments.
    Decompose(DecomposeArgs),
    /// Build the segment neighborhood graph.
    Build(BuildArgs),
    /// Run Louvain and write the community tree.
    Detect(DetectArgs),
    /// Re-run Louvain inside one leaf community.
    Split(SplitArgs),
    /// Merge sibling or nested communities.
    Merge(MergeArgs),
    /// Force-directed layout of the visible communities.
    Layout(LayoutArgs),
    /// Flat PCA + k-means clustering of the segments.
    PcaKmeans(PcaKmeansArgs),
    /// Time graph construction and Louvain; prints one CSV row.
    Bench(BenchArgs),
    /// Community count per resolution as CSV.
    Sweep(SweepArgs),
    /// Run the HTTP/WebSocket service.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LinesOut {
    Json,
    Bin,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GraphOut {
    Csv,
    Bin,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MetricArg {
    Shortest,
    Longest,
    Average,
}

impl From<MetricArg> for SegmentDistanceMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Shortest => SegmentDistanceMetric::Shortest,
            MetricArg::Longest => SegmentDistanceMetric::Longest,
            MetricArg::Average => SegmentDistanceMetric::Average,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Knn,
    Rbn,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// `uniform[:vx,vy,vz]`, `circular`, `saddle`, `abc[:a,b,c]` or a `.vf.json` grid.
    #[arg(long)]
    pub field: String,
    /// Seeding box `xmin,ymin,zmin,xmax,ymax,zmax` for analytic fields.
    #[arg(long)]
    pub domain: Option<String>,
    /// `uniform:NXxNYxNZ` or `random:N[:seed=S]`.
    #[arg(long)]
    pub seeding: String,
    #[arg(long)]
    pub step: f64,
    #[arg(long)]
    pub steps: usize,
    /// Integrate the raw field instead of its direction.
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(long)]
    pub bidirectional: bool,
    /// Overrides the seed of `random:` seedings.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub format: Option<LinesOut>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Lines file (JSON or binary).
    #[arg(long)]
    pub lines: PathBuf,
    /// Line segments per curve segment.
    #[arg(short = 'L', long = "span")]
    pub span: usize,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(short = 'k', long)]
    pub k: Option<usize>,
    /// RBN radius as a fraction of the bounds diagonal.
    #[arg(long)]
    pub radius_frac: Option<f64>,
    /// RBN radius in world units.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, value_enum, default_value = "longest")]
    pub metric: MetricArg,
    #[arg(long)]
    pub d_scale: Option<f64>,
    /// Worker threads for the neighbor search.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl GraphArgs {
    fn request(&self) -> GraphRequest {
        GraphRequest {
            method: match self.method {
                MethodArg::Knn => Method::Knn,
                MethodArg::Rbn => Method::Rbn,
            },
            k: self.k,
            radius_frac: self.radius_frac,
            radius: self.radius,
            metric: self.metric.into(),
            d_scale: self.d_scale,
            threads: self.threads,
        }
    }
}

#[derive(Debug, Args)]
pub struct SegsInput {
    /// Segments file, or a lines file together with `-L`.
    #[arg(long)]
    pub segs: PathBuf,
    /// Span used when `--segs` holds undecomposed lines.
    #[arg(short = 'L', long = "span")]
    pub span: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub input: SegsInput,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub format: Option<GraphOut>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GraphInput {
    /// Graph file (binary or CSV).
    #[arg(long)]
    pub graph: PathBuf,
    /// Node count for CSV graphs whose last segments have no edges.
    #[arg(long)]
    pub nodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: GraphInput,
    #[arg(long, default_value_t = 1.0)]
    pub resolution: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub communities: PathBuf,
    #[command(flatten)]
    pub input: GraphInput,
    #[arg(long)]
    pub node: NodeId,
    #[arg(long, default_value_t = 1.0)]
    pub resolution: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(long)]
    pub communities: PathBuf,
    /// Comma-separated node ids.
    #[arg(long = "ids")]
    pub ids: String,
    /// Attach the merged node at the lowest common ancestor.
    #[arg(long)]
    pub allow_lca_merge: bool,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LayoutArgs {
    #[arg(long)]
    pub communities: PathBuf,
    #[command(flatten)]
    pub input: GraphInput,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PcaKmeansArgs {
    #[command(flatten)]
    pub input: SegsInput,
    #[arg(long, default_value_t = 5)]
    pub dim: usize,
    #[arg(short = 'k', long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Points resampled per segment.
    #[arg(long, default_value_t = DEFAULT_RESAMPLE)]
    pub resample: usize,
    /// Communities file to score the clustering against (ARI).
    #[arg(long)]
    pub compare: Option<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub input: SegsInput,
    #[arg(short = 'k', long, default_value_t = 60)]
    pub k: usize,
    #[arg(long, default_value_t = 0.10)]
    pub radius_frac: f64,
    #[arg(long, default_value_t = 1.0)]
    pub resolution: f64,
    #[arg(long, value_enum, default_value = "longest")]
    pub metric: MetricArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Timed runs after one warm-up; the median is reported.
    #[arg(long, default_value_t = 3)]
    pub runs: usize,
    /// Dataset name in the row; defaults to the file stem.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub no_header: bool,
    #[arg(long, short, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: GraphInput,
    #[arg(long, default_value = "0.05,0.1,0.5,1.0")]
    pub resolutions: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Directory with the explorer bundle, served at `/`.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_SEGMENTS)]
    pub max_segments: usize,
}

/// Exit code 1 for bad input, 2 for failures on our side.
#[derive(Debug)]
pub enum CliError {
    User(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }

    /// The single stderr line: `{"error":"user"|"internal","message":...}`.
    pub fn to_line(&self) -> String {
        let (kind, msg) = match self {
            CliError::User(m) => ("user", m),
            CliError::Internal(m) => ("internal", m),
        };
        json!({ "error": kind, "message": msg }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::User(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

fn user(e: impl fmt::Display) -> CliError {
    CliError::User(e.to_string())
}

fn internal(e: impl fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

impl From<inputs::InputError> for CliError {
    fn from(e: inputs::InputError) -> Self {
        user(e)
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                _ => {
                    let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
                    eprintln!("{}", CliError::User(first).to_line());
                    1
                }
            };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_line());
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Trace(a) => cmd_trace(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Build(a) => cmd_build(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Split(a) => cmd_split(a),
        Command::Merge(a) => cmd_merge(a),
        Command::Layout(a) => cmd_layout(a),
        Command::PcaKmeans(a) => cmd_pca_kmeans(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Serve(a) => cmd_serve(a),
    }
}

fn is_stdio(p: &Path) -> bool {
    p.as_os_str() == "-"
}

fn read_input(p: &Path) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    if is_stdio(p) {
        io::stdin().read_to_end(&mut buf).map_err(|e| user(format!("stdin: {e}")))?;
    } else {
        buf = std::fs::read(p).map_err(|e| user(format!("{}: {e}", p.display())))?;
    }
    Ok(buf)
}

fn write_output(p: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if is_stdio(p) {
        let mut out = io::stdout().lock();
        out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| internal(format!("stdout: {e}")))
    } else {
        std::fs::write(p, bytes).map_err(|e| user(format!("{}: {e}", p.display())))
    }
}

fn write_json<T: Serialize>(p: &Path, doc: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec(doc).map_err(internal)?;
    bytes.push(b'\n');
    write_output(p, &bytes)
}

/// One JSON line on stdout summarizing the run, unless stdout carries the data.
fn report(out: &Path, v: Value) {
    if !is_stdio(out) {
        println!("{v}");
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(bytes: &[u8], what: &Path) -> Result<T, CliError> {
    serde_json::from_slice(bytes).map_err(|e| user(format!("{}: {e}", what.display())))
}

fn load_lines(path: &Path) -> Result<Dataset, CliError> {
    let bytes = read_input(path)?;
    let format = if bytes.starts_with(LINES_MAGIC) { LinesFormat::Binary } else { LinesFormat::Json };
    Dataset::from_bytes(&bytes, format).map_err(|e| user(format!("{}: {e}", path.display())))
}

fn load_segs(input: &SegsInput) -> Result<Dataset, CliError> {
    let bytes = read_input(&input.segs)?;
    let located = |e: &dyn fmt::Display| user(format!("{}: {e}", input.segs.display()));
    if bytes.starts_with(LINES_MAGIC) {
        return decompose_loaded(Dataset::from_bytes(&bytes, LinesFormat::Binary).map_err(|e| located(&e))?, input);
    }
    let v: Value = parse_json(&bytes, &input.segs)?;
    if v.get("segments").is_some() {
        if input.span.is_some() {
            return Err(user("-L applies to lines files; the segments file already fixes the span"));
        }
        let doc: SegmentsJson = serde_json::from_value(v).map_err(|e| located(&e))?;
        Dataset::from_segments_json(doc).map_err(|e| located(&e))
    } else {
        let ds = Dataset::from_json_lines(serde_json::from_value(v).map_err(|e| located(&e))?).map_err(|e| located(&e))?;
        decompose_loaded(ds, input)
    }
}

fn decompose_loaded(mut ds: Dataset, input: &SegsInput) -> Result<Dataset, CliError> {
    let span = input.span.ok_or_else(|| user(format!("{} holds lines; pass -L to decompose them", input.segs.display())))?;
    ds.decompose(span).map_err(user)?;
    Ok(ds)
}

fn load_graph(input: &GraphInput) -> Result<Csng, CliError> {
    let bytes = read_input(&input.graph)?;
    let g = if bytes.starts_with(GRAPH_MAGIC) {
        Csng::read_binary(&bytes[..])
    } else {
        Csng::read_csv(&bytes[..], input.nodes)
    };
    let g = g.map_err(|e| user(format!("{}: {e}", input.graph.display())))?;
    if let Some(n) = input.nodes {
        if g.node_count != n {
            return Err(user(format!("graph has {} nodes, --nodes says {n}", g.node_count)));
        }
    }
    Ok(g)
}

fn load_tree(path: &Path) -> Result<CommunityTree, CliError> {
    let doc: CommunitiesJson = parse_json(&read_input(path)?, path)?;
    CommunityTree::from_json(&doc).map_err(|e| user(format!("{}: {e}", path.display())))
}

fn check_cover(tree: &CommunityTree, g: &Csng) -> Result<(), CliError> {
    if tree.segment_count() != g.node_count {
        return Err(user(format!(
            "communities cover {} segments but the graph has {} nodes",
            tree.segment_count(),
            g.node_count
        )));
    }
    Ok(())
}

fn cmd_trace(a: TraceArgs) -> Result<(), CliError> {
    let domain = a.domain.as_deref().map(parse_domain).transpose()?;
    let field = parse_field(&a.field, domain)?;
    let mut seeding = parse_seeding(&a.seeding)?;
    if let (Some(s), csng::field_tracer::Seeding::Random { seed, .. }) = (a.seed, &mut seeding) {
        *seed = s;
    }
    let mut cfg = TraceConfig::new(seeding, a.step, a.steps);
    cfg.normalize_steps = !a.no_normalize;
    cfg.bidirectional = a.bidirectional;
    let ds = trace(&field, &cfg).map_err(user)?;
    let binary = match a.format {
        Some(LinesOut::Bin) => true,
        Some(LinesOut::Json) => false,
        None => !is_stdio(&a.out) && LinesFormat::from_path(&a.out) == LinesFormat::Binary,
    };
    if binary {
        write_output(&a.out, &ds.to_binary())?;
    } else {
        write_json(&a.out, &ds.to_json_lines())?;
    }
    report(&a.out, json!({ "lines": ds.lines.len(), "vertices": ds.vertex_count() }));
    Ok(())
}

fn cmd_decompose(a: DecomposeArgs) -> Result<(), CliError> {
    let mut ds = load_lines(&a.lines)?;
    ds.decompose(a.span).map_err(user)?;
    write_json(&a.out, &ds.to_segments_json().map_err(internal)?)?;
    report(&a.out, json!({ "lines": ds.lines.len(), "segments": ds.segments.len(), "L": a.span }));
    Ok(())
}

fn cmd_build(a: BuildArgs) -> Result<(), CliError> {
    let ds = load_segs(&a.input)?;
    let opts = a.graph.request().to_options()?;
    let started = Instant::now();
    let g = build_csng(&ds, &opts).map_err(user)?;
    let secs = started.elapsed().as_secs_f64();
    let csv = match a.format {
        Some(GraphOut::Csv) => true,
        Some(GraphOut::Bin) => false,
        None => a.out.extension().is_some_and(|e| e == "csv"),
    };
    let mut bytes = Vec::new();
    if csv { g.write_csv(&mut bytes) } else { g.write_binary(&mut bytes) }.map_err(internal)?;
    write_output(&a.out, &bytes)?;
    report(
        &a.out,
        json!({
            "nodes": g.node_count,
            "edges": g.logical_edge_count(),
            "directed": !g.is_symmetric(),
            "d_scale": g.params.as_ref().map(|p| p.d_scale),
            "build_s": secs,
        }),
    );
    Ok(())
}

fn tree_report(tree: &CommunityTree) -> Value {
    json!({
        "segments": tree.segment_count(),
        "nodes": tree.nodes().count(),
        "leaves": tree.leaves().count(),
        "root_children": tree.root().children.len(),
    })
}

fn cmd_detect(a: DetectArgs) -> Result<(), CliError> {
    let g = load_graph(&a.input)?;
    let tree = detect(&g, a.resolution, a.seed).map_err(user)?;
    write_json(&a.out, &tree.to_json())?;
    report(&a.out, tree_report(&tree));
    Ok(())
}

fn cmd_split(a: SplitArgs) -> Result<(), CliError> {
    let mut tree = load_tree(&a.communities)?;
    let g = load_graph(&a.input)?;
    check_cover(&tree, &g)?;
    let outcome = tree.split_node(&g, a.node, a.resolution, a.seed).map_err(user)?;
    write_json(&a.out, &tree.to_json())?;
    let mut r = tree_report(&tree);
    r["split"] = match outcome {
        SplitOutcome::Split { children } => json!(children),
        SplitOutcome::NoSplit => json!("no_split"),
    };
    report(&a.out, r);
    Ok(())
}

fn cmd_merge(a: MergeArgs) -> Result<(), CliError> {
    let mut tree = load_tree(&a.communities)?;
    let ids = parse_id_list(&a.ids)?;
    let merged = tree.merge_nodes(&ids, MergeOptions { allow_lca_merge: a.allow_lca_merge }).map_err(user)?;
    write_json(&a.out, &tree.to_json())?;
    let mut r = tree_report(&tree);
    r["merged"] = json!(merged);
    report(&a.out, r);
    Ok(())
}

fn cmd_layout(a: LayoutArgs) -> Result<(), CliError> {
    let tree = load_tree(&a.communities)?;
    let g = load_graph(&a.input)?;
    check_cover(&tree, &g)?;
    let mut params = LayoutParams::default();
    if let Some(m) = a.max_iter {
        params.max_iter = m;
    }
    let cg = aggregate(&tree, &g).map_err(internal)?;
    let st = run_layout(&cg, a.seed, &params);
    write_json(&a.out, &st.to_json(&cg))?;
    report(&a.out, json!({ "nodes": cg.nodes.len(), "converged": st.converged, "iteration": st.iteration }));
    Ok(())
}

fn cmd_pca_kmeans(a: PcaKmeansArgs) -> Result<(), CliError> {
    let ds = load_segs(&a.input)?;
    let params = BaselineParams { dim: a.dim, k: a.k, seed: a.seed, resample: a.resample };
    let r = run_baseline(&ds, params).map_err(user)?;
    let ari = match &a.compare {
        Some(path) => {
            let tree = load_tree(path)?;
            if tree.segment_count() != r.assignment.len() {
                return Err(user(format!(
                    "{} covers {} segments, the clustering {}",
                    path.display(),
                    tree.segment_count(),
                    r.assignment.len()
                )));
            }
            Some(compare(&r.assignment, &tree.leaf_assignment()).map_err(internal)?.ari)
        }
        None => None,
    };
    write_json(&a.out, &r.to_clusters_json())?;
    let summary = json!({ "segments": r.assignment.len(), "k": a.k, "inertia": r.inertia, "ari": ari });
    match (is_stdio(&a.out), ari) {
        // the ARI is the point of --compare, so it is never swallowed
        (true, Some(_)) => eprintln!("{summary}"),
        _ => report(&a.out, summary),
    }
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs `f` once untimed, then `runs` times; returns the last result and the median seconds.
fn timed<T>(runs: usize, mut f: impl FnMut() -> Result<T, CliError>) -> Result<(T, f64), CliError> {
    let mut last = f()?;
    let mut secs = Vec::with_capacity(runs);
    for _ in 0..runs {
        let t = Instant::now();
        last = f()?;
        secs.push(t.elapsed().as_secs_f64());
    }
    Ok((last, median(secs)))
}

pub const BENCH_HEADER: &str = "name,lines,segments,knn_s,rbn_s,louvain_s,knn_edges,rbn_edges,communities";

fn cmd_bench(a: BenchArgs) -> Result<(), CliError> {
    if a.runs == 0 {
        return Err(user("--runs must be >= 1"));
    }
    let ds = load_segs(&a.input)?;
    let name = a.name.clone().unwrap_or_else(|| {
        let file = a.input.segs.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "stdin".into());
        file.split('.').next().unwrap_or_default().to_string()
    });
    let graph = |method, k, radius_frac| GraphArgs {
        method,
        k,
        radius_frac,
        radius: None,
        metric: a.metric,
        d_scale: None,
        threads: a.threads,
    };
    let knn_opts = graph(MethodArg::Knn, Some(a.k), None).request().to_options()?;
    let rbn_opts = graph(MethodArg::Rbn, None, Some(a.radius_frac)).request().to_options()?;
    let (knn, knn_s) = timed(a.runs, || build_csng(&ds, &knn_opts).map_err(user))?;
    let (rbn, rbn_s) = timed(a.runs, || build_csng(&ds, &rbn_opts).map_err(user))?;
    let (tree, louvain_s) = timed(a.runs, || detect(&knn, a.resolution, a.seed).map_err(user))?;
    let mut csv = String::new();
    if !a.no_header {
        csv.push_str(BENCH_HEADER);
        csv.push('\n');
    }
    csv.push_str(&format!(
        "{name},{},{},{knn_s:.6},{rbn_s:.6},{louvain_s:.6},{},{},{}\n",
        ds.lines.len(),
        ds.segments.len(),
        knn.logical_edge_count(),
        rbn.logical_edge_count(),
        tree.leaves().count()
    ));
    write_output(&a.out, csv.as_bytes())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), CliError> {
    let resolutions = parse_f64_list(&a.resolutions)?;
    if resolutions.is_empty() {
        return Err(user("--resolutions is empty"));
    }
    let g = load_graph(&a.input)?;
    let ug = UndirectedWeightedGraph::from_csng(&g);
    let mut csv = String::from("resolution,communities,modularity\n");
    for r in resolutions {
        let tree = detect(&g, r, a.seed).map_err(user)?;
        let q = modularity(&ug, &Partition::from_labels(&tree.leaf_assignment()), r).map_err(user)?;
        csv.push_str(&format!("{r},{},{q:.12}\n", tree.leaves().count()));
    }
    write_output(&a.out, csv.as_bytes())
}

fn cmd_serve(a: ServeArgs) -> Result<(), CliError> {
    if let Some(dir) = &a.static_dir {
        if !dir.is_dir() {
            return Err(user(format!("{} is not a directory", dir.display())));
        }
    }
    let config = ServiceConfig {
        session: SessionConfig { max_segments: a.max_segments, ..SessionConfig::default() },
        static_dir: a.static_dir,
        ..ServiceConfig::default()
    };
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(internal)?;
    rt.block_on(api::serve(SocketAddr::new(a.host, a.port), config))
        .map_err(|e| user(format!("cannot serve on {}:{}: {e}", a.host, a.port)))
}
