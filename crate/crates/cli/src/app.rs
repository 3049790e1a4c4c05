use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use seamforge_core::atlas::Flattener;
use seamforge_core::mesh::load_obj;
use seamforge_core::neural::{
    greedy_reconstruction_rate, load_weights, loss_csv, save_weights, toy_dataset, train_toy, Model,
    ModelConfig, TrainConfig,
};
use seamforge_core::order::canonical_order;
use seamforge_core::seams::{
    chains_to_edges, extract_seams_from_uv, tokenize, trace_chains, DEFAULT_UV_TOLERANCE,
};
use seamforge_core::{build_adjacency, AdjacencyTable, ChainSet, Error, Mesh, SeamEdgeSet, TokenSequence};

use crate::error::{CliError, CliResult};
use crate::pipeline::{
    atlas_stage, decode_stage, obj_bytes, ply_bytes, reference_tokens, report_json, run_pipeline, svg_bytes,
    PipelineConfig, ScorerChoice, ScorerKind,
};

pub const CHARTS_SCHEMA: &str = "seamforge.charts/1";
pub const TRAIN_SCHEMA: &str = "seamforge.train/1";
pub const PIPELINE_SCHEMA: &str = "seamforge.pipeline/1";

#[derive(Debug, Parser)]
#[command(name = "seamforge", version, about = "Mesh-native UV seam toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Seam edges of a UV-mapped mesh.
    Extract {
        mesh: PathBuf,
        #[arg(long, default_value_t = DEFAULT_UV_TOLERANCE)]
        tolerance: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Trace a seam edge set into chains.
    Chains {
        seams: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Canonically order a chain set on its mesh.
    Order {
        mesh: PathBuf,
        chains: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Serialize chains into tokens, in file order.
    Tokenize {
        chains: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Autoregressive decode over the whole mesh.
    Decode(DecodeArgs),
    /// Divide-and-conquer decode.
    DcDecode {
        #[command(flatten)]
        decode: DecodeArgs,
        #[arg(long)]
        min_faces: Option<usize>,
        #[arg(long)]
        max_depth: Option<usize>,
    },
    /// Cut into charts and summarize them.
    Cut(AtlasArgs),
    /// Write the packed atlas as OBJ with per-corner UVs.
    Flatten(AtlasArgs),
    /// Atlas quality report.
    Metrics(AtlasArgs),
    /// SVG drawing of the packed UV layout.
    VizUv(AtlasArgs),
    /// PLY with one colored edge set per chain.
    VizSeams {
        mesh: PathBuf,
        #[command(flatten)]
        seams: SeamArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Train the toy model on the synthetic dataset.
    TrainToy(TrainArgs),
    /// Decode, cut, flatten, pack, measure and export one or more meshes.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Pipeline configuration JSON; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub greedy: bool,
    #[arg(long)]
    pub allow_empty: bool,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    pub mesh: PathBuf,
    #[arg(long, value_enum, default_value_t = ScorerKind::Heuristic)]
    pub scorer: ScorerKind,
    /// Weights file for `--scorer model`.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Tokens or chains to replay; defaults to the mesh's own UV seams.
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[command(flatten)]
    pub common: ConfigArgs,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SeamArgs {
    /// Seam edge set JSON.
    #[arg(long, conflicts_with = "chains")]
    pub seams: Option<PathBuf>,
    /// Any JSON with a `chains` array (chains, ordered chains, decode output).
    #[arg(long)]
    pub chains: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AtlasArgs {
    pub mesh: PathBuf,
    #[command(flatten)]
    pub seams: SeamArgs,
    #[command(flatten)]
    pub common: ConfigArgs,
    #[arg(long)]
    pub flattener: Option<Flattener>,
    /// Add cuts until every chart is a disk.
    #[arg(long)]
    pub auto_cut: bool,
    #[arg(long)]
    pub samples_per_loop: Option<usize>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// `key = value` file with model and training settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of synthetic training meshes.
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(required = true)]
    pub meshes: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = ScorerKind::Heuristic)]
    pub scorer: ScorerKind,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[command(flatten)]
    pub common: ConfigArgs,
    #[arg(long)]
    pub flattener: Option<Flattener>,
    /// Fail on non-disk charts instead of cutting them open.
    #[arg(long)]
    pub no_auto_cut: bool,
    /// Decode each mesh in a single pass.
    #[arg(long)]
    pub no_divide: bool,
    #[arg(long)]
    pub min_faces: Option<usize>,
    /// Meshes processed in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match output {
        Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::io(path, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

fn emit_text(output: Option<&Path>, text: String) -> CliResult<()> {
    let text = if text.ends_with('\n') { text } else { text + "\n" };
    emit(output, text.as_bytes())
}

fn load_mesh(path: &Path) -> CliResult<(Mesh, AdjacencyTable)> {
    let mesh = load_obj(path)?;
    let adj = build_adjacency(&mesh)?;
    Ok((mesh, adj))
}

fn load_chains(path: &Path) -> CliResult<ChainSet> {
    Ok(ChainSet::from_json(&read_text(path)?)?)
}

impl ConfigArgs {
    fn resolve(&self, base: PipelineConfig) -> CliResult<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_json(&read_text(path)?)?,
            None => base,
        };
        if let Some(v) = self.temperature {
            cfg.temperature = v;
        }
        if let Some(v) = self.max_len {
            cfg.max_len = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.tolerance {
            cfg.tolerance = v;
        }
        cfg.greedy |= self.greedy;
        cfg.allow_empty |= self.allow_empty;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Seams from `--seams`, `--chains`, or else the mesh's own UV layout. A mesh
/// without UVs and no seam file has no seams.
fn load_seams(
    mesh: &Mesh,
    adj: &AdjacencyTable,
    args: &SeamArgs,
    tolerance: f64,
) -> CliResult<(SeamEdgeSet, ChainSet)> {
    if let Some(path) = &args.seams {
        let seams = SeamEdgeSet::from_json(&read_text(path)?)?;
        let seams = SeamEdgeSet::from_edges(adj, seams.iter())?;
        let chains = trace_chains(&seams);
        return Ok((seams, chains));
    }
    if let Some(path) = &args.chains {
        let chains = load_chains(path)?;
        chains.validate_on(adj)?;
        return Ok((chains_to_edges(&chains)?, chains));
    }
    if mesh.has_uvs() {
        let seams = extract_seams_from_uv(mesh, adj, tolerance)?;
        let chains = trace_chains(&seams);
        return Ok((seams, chains));
    }
    log::info!("no seams given and the mesh has no UVs; using an empty seam set");
    Ok((SeamEdgeSet::new(), ChainSet::empty()))
}

fn replay_target(
    mesh: &Mesh,
    adj: &AdjacencyTable,
    target: Option<&Path>,
    tolerance: f64,
) -> CliResult<TokenSequence> {
    let Some(path) = target else {
        return Ok(reference_tokens(mesh, adj, tolerance)?);
    };
    let text = read_text(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(Error::from)?;
    if value.get("tokens").is_some() {
        return Ok(TokenSequence::from_json(&text)?);
    }
    let chains = ChainSet::from_json(&text)?;
    chains.validate_on(adj)?;
    Ok(tokenize(&canonical_order(mesh, adj, &chains).chain_set()))
}

fn load_model(kind: ScorerKind, weights: Option<&Path>) -> CliResult<Option<Model>> {
    match (kind, weights) {
        (ScorerKind::Model, Some(path)) => Ok(Some(load_weights(path)?)),
        (ScorerKind::Model, None) => Err(Error::Config("--scorer model needs --weights".into()).into()),
        _ => Ok(None),
    }
}

fn run_decode(args: &DecodeArgs, divide: Option<(Option<usize>, Option<usize>)>) -> CliResult<()> {
    let (mesh, adj) = load_mesh(&args.mesh)?;
    let mut cfg = args.common.resolve(PipelineConfig::default())?;
    if let Some((min_faces, max_depth)) = divide {
        cfg.min_faces = min_faces.unwrap_or(cfg.min_faces);
        cfg.max_depth = max_depth.unwrap_or(cfg.max_depth);
    }
    let model = load_model(args.scorer, args.weights.as_deref())?;
    let scorer = match args.scorer {
        ScorerKind::Heuristic => ScorerChoice::Heuristic,
        ScorerKind::Replay => {
            ScorerChoice::Replay(replay_target(&mesh, &adj, args.target.as_deref(), cfg.tolerance)?)
        }
        ScorerKind::Model => ScorerChoice::Model(model.as_ref().expect("loaded above")),
    };
    let decoded = decode_stage(&mesh, &adj, &scorer, &cfg, divide.is_some())?;
    emit_text(args.output.as_deref(), decoded.json)
}

impl AtlasArgs {
    fn config(&self) -> CliResult<PipelineConfig> {
        let base = PipelineConfig {
            auto_cut: false,
            ..PipelineConfig::default()
        };
        let mut cfg = self.common.resolve(base)?;
        if let Some(f) = self.flattener {
            cfg.flattener = f;
        }
        cfg.auto_cut |= self.auto_cut;
        if let Some(n) = self.samples_per_loop {
            cfg.samples_per_loop = n;
        }
        if let Some(m) = self.margin {
            cfg.margin = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct ChartSummary {
    index: usize,
    faces: usize,
    vertices: usize,
    boundary_loops: usize,
    euler: i64,
    disk: bool,
    area: f64,
}

fn run_cut(args: &AtlasArgs) -> CliResult<()> {
    let (mesh, adj) = load_mesh(&args.mesh)?;
    let cfg = args.config()?;
    let (seams, _) = load_seams(&mesh, &adj, &args.seams, cfg.tolerance)?;
    let (charts, added) = if cfg.auto_cut {
        let (charts, _, rec) = seamforge_core::atlas::auto_cut(&mesh, &adj, &seams)?;
        (charts, rec.added.len())
    } else {
        (seamforge_core::atlas::cut_mesh(&mesh, &adj, &seams)?, 0)
    };
    #[derive(Serialize)]
    struct Wire<'a> {
        schema: &'a str,
        auto_cut_edges: usize,
        charts: Vec<ChartSummary>,
    }
    let wire = Wire {
        schema: CHARTS_SCHEMA,
        auto_cut_edges: added,
        charts: charts
            .iter()
            .map(|c| ChartSummary {
                index: c.index,
                faces: c.faces.len(),
                vertices: c.mesh.vertex_count(),
                boundary_loops: c.boundary_loops.len(),
                euler: c.euler,
                disk: c.is_disk(),
                area: c.area(),
            })
            .collect(),
    };
    emit_text(
        args.output.as_deref(),
        serde_json::to_string_pretty(&wire).expect("charts serialize"),
    )
}

enum AtlasOutput {
    Obj,
    Report,
    Svg,
}

fn run_atlas(args: &AtlasArgs, what: AtlasOutput) -> CliResult<()> {
    let (mesh, adj) = load_mesh(&args.mesh)?;
    let cfg = args.config()?;
    let (seams, _) = load_seams(&mesh, &adj, &args.seams, cfg.tolerance)?;
    let atlas = atlas_stage(&mesh, &adj, &seams, &cfg)?;
    let bytes = match what {
        AtlasOutput::Obj => obj_bytes(&mesh, &atlas)?,
        AtlasOutput::Report => report_json(&atlas.report).into_bytes(),
        AtlasOutput::Svg => svg_bytes(&atlas),
    };
    emit(args.output.as_deref(), &bytes)
}

fn run_train(args: &TrainArgs) -> CliResult<()> {
    let (model_cfg, mut train_cfg) = match &args.config {
        Some(path) => TrainConfig::from_kv(&read_text(path)?)?,
        None => (ModelConfig::toy(), TrainConfig::default()),
    };
    if let Some(e) = args.epochs {
        train_cfg.epochs = e;
    }
    if let Some(s) = args.seed {
        train_cfg.seed = s;
    }
    train_cfg.validate()?;
    let dataset = toy_dataset(args.count)?;
    let out = train_toy(&dataset, &model_cfg, &train_cfg)?;
    let rate = greedy_reconstruction_rate(&out.model, &dataset)?;
    save_weights(&out.model, &args.output)?;
    if let Some(path) = &args.loss_csv {
        std::fs::write(path, loss_csv(&out.losses)).map_err(|e| CliError::io(path, e))?;
    }
    #[derive(Serialize)]
    struct Wire<'a> {
        schema: &'a str,
        epochs: usize,
        examples: usize,
        parameters: usize,
        final_loss: f64,
        reconstruction_rate: f64,
        config_digest: String,
    }
    let wire = Wire {
        schema: TRAIN_SCHEMA,
        epochs: train_cfg.epochs,
        examples: dataset.len(),
        parameters: out.model.weights().parameter_count(),
        final_loss: out.losses.last().copied().unwrap_or(f64::NAN),
        reconstruction_rate: rate,
        config_digest: model_cfg.digest().iter().map(|b| format!("{b:02x}")).collect(),
    };
    emit_text(
        None,
        serde_json::to_string_pretty(&wire).expect("summary serializes"),
    )
}

#[derive(Serialize)]
struct RunSummary {
    mesh: String,
    out_dir: String,
    n_charts: usize,
    overall_dist: f64,
    angular_dist: f64,
}

fn run_pipeline_cmd(args: &PipelineArgs) -> CliResult<()> {
    let mut cfg = args.common.resolve(PipelineConfig::default())?;
    if let Some(f) = args.flattener {
        cfg.flattener = f;
    }
    if args.no_auto_cut {
        cfg.auto_cut = false;
    }
    if args.no_divide {
        cfg.divide_and_conquer = false;
    }
    if let Some(n) = args.min_faces {
        cfg.min_faces = n;
    }
    cfg.validate()?;
    if args.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()).into());
    }
    let mut stems = std::collections::BTreeSet::new();
    let targets: Vec<(PathBuf, PathBuf)> = args
        .meshes
        .iter()
        .map(|m| {
            let stem = m
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            if !stems.insert(stem.clone()) {
                return Err(CliError::from(Error::Config(format!(
                    "two inputs share the name {stem:?}"
                ))));
            }
            Ok((m.clone(), args.out_dir.join(stem)))
        })
        .collect::<CliResult<_>>()?;
    let model = load_model(args.scorer, args.weights.as_deref())?;

    let run_one = |(mesh_path, dir): &(PathBuf, PathBuf)| -> CliResult<RunSummary> {
        let (mesh, adj) = load_mesh(mesh_path)?;
        let scorer = match args.scorer {
            ScorerKind::Heuristic => ScorerChoice::Heuristic,
            ScorerKind::Replay => ScorerChoice::Replay(reference_tokens(&mesh, &adj, cfg.tolerance)?),
            ScorerKind::Model => ScorerChoice::Model(model.as_ref().expect("loaded above")),
        };
        let out = run_pipeline(&mesh, &scorer, &cfg)?;
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for (name, bytes) in &out.files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        }
        Ok(RunSummary {
            mesh: mesh_path.display().to_string(),
            out_dir: dir.display().to_string(),
            n_charts: out.report.n_charts,
            overall_dist: out.report.overall_dist,
            angular_dist: out.report.angular_dist,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<CliResult<RunSummary>> = pool.install(|| targets.par_iter().map(run_one).collect());
    let runs = results.into_iter().collect::<CliResult<Vec<_>>>()?;
    #[derive(Serialize)]
    struct Wire<'a> {
        schema: &'a str,
        runs: Vec<RunSummary>,
    }
    emit_text(
        None,
        serde_json::to_string_pretty(&Wire {
            schema: PIPELINE_SCHEMA,
            runs,
        })
        .expect("summary serializes"),
    )
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Extract {
            mesh,
            tolerance,
            output,
        } => {
            let (mesh, adj) = load_mesh(&mesh)?;
            let seams = extract_seams_from_uv(&mesh, &adj, tolerance)?;
            emit_text(output.as_deref(), seams.to_json())
        }
        Command::Chains { seams, output } => {
            let seams = SeamEdgeSet::from_json(&read_text(&seams)?)?;
            emit_text(output.as_deref(), trace_chains(&seams).to_json())
        }
        Command::Order { mesh, chains, output } => {
            let (mesh, adj) = load_mesh(&mesh)?;
            let chains = load_chains(&chains)?;
            chains.validate_on(&adj)?;
            emit_text(output.as_deref(), canonical_order(&mesh, &adj, &chains).to_json())
        }
        Command::Tokenize { chains, output } => {
            let chains = load_chains(&chains)?;
            emit_text(output.as_deref(), tokenize(&chains).to_json())
        }
        Command::Decode(args) => run_decode(&args, None),
        Command::DcDecode {
            decode,
            min_faces,
            max_depth,
        } => run_decode(&decode, Some((min_faces, max_depth))),
        Command::Cut(args) => run_cut(&args),
        Command::Flatten(args) => run_atlas(&args, AtlasOutput::Obj),
        Command::Metrics(args) => run_atlas(&args, AtlasOutput::Report),
        Command::VizUv(args) => run_atlas(&args, AtlasOutput::Svg),
        Command::VizSeams { mesh, seams, output } => {
            let (mesh, adj) = load_mesh(&mesh)?;
            let (_, chains) = load_seams(&mesh, &adj, &seams, DEFAULT_UV_TOLERANCE)?;
            emit(output.as_deref(), &ply_bytes(&mesh, &chains))
        }
        Command::TrainToy(args) => run_train(&args),
        Command::Pipeline(args) => run_pipeline_cmd(&args),
    }
}
