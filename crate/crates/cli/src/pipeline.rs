use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use seamforge_core::atlas::{
    auto_cut, compute_metrics, cut_mesh, flatten_chart, pack_charts, write_atlas_obj, write_seam_ply,
    write_uv_svg, AtlasReport, Chart, Flattener, MetricsConfig, PackConfig, UvChart,
};
use seamforge_core::neural::{Model, ModelScorer};
use seamforge_core::order::canonical_order;
use seamforge_core::seams::{
    chains_to_edges, extract_seams_from_uv, tokenize, trace_chains, DEFAULT_UV_TOLERANCE,
};
use seamforge_core::traversal::{
    decode, divide_and_conquer_decode, DcConfig, DecodeConfig, HeuristicScorer, ReplayScorer, Scorer, SubMesh,
};
use seamforge_core::{AdjacencyTable, ChainSet, Error, Mesh, Result, SeamEdgeSet, TokenSequence};

/// Which scorer drives decoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Heuristic,
    Replay,
    Model,
}

/// Every knob of the end-to-end run. Missing JSON fields take the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub tolerance: f64,
    pub temperature: f64,
    pub max_len: usize,
    pub seed: u64,
    pub greedy: bool,
    pub allow_empty: bool,
    pub divide_and_conquer: bool,
    pub min_faces: usize,
    pub max_depth: usize,
    pub flattener: Flattener,
    pub auto_cut: bool,
    pub samples_per_loop: usize,
    pub margin: f64,
    pub gap: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let decode = DecodeConfig::default();
        let dc = DcConfig::default();
        let pack = PackConfig::default();
        PipelineConfig {
            tolerance: DEFAULT_UV_TOLERANCE,
            temperature: decode.temperature,
            max_len: decode.max_len,
            seed: decode.seed,
            greedy: decode.greedy,
            allow_empty: decode.allow_empty,
            divide_and_conquer: true,
            min_faces: dc.min_faces,
            max_depth: dc.max_depth,
            flattener: Flattener::Tutte,
            auto_cut: true,
            samples_per_loop: MetricsConfig::default().samples_per_loop,
            margin: pack.margin,
            gap: pack.gap,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.decode_config().validate()?;
        self.pack_config().validate()?;
        if !(self.tolerance >= 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be >= 0, got {}",
                self.tolerance
            )));
        }
        if self.samples_per_loop < 3 {
            return Err(Error::Config("samples_per_loop must be at least 3".into()));
        }
        Ok(())
    }

    pub fn decode_config(&self) -> DecodeConfig {
        DecodeConfig {
            temperature: self.temperature,
            max_len: self.max_len,
            seed: self.seed,
            greedy: self.greedy,
            allow_empty: self.allow_empty,
        }
    }

    pub fn dc_config(&self) -> DcConfig {
        DcConfig {
            decode: self.decode_config(),
            min_faces: self.min_faces,
            max_depth: self.max_depth,
        }
    }

    pub fn pack_config(&self) -> PackConfig {
        PackConfig {
            margin: self.margin,
            gap: self.gap,
        }
    }

    pub fn metrics_config(&self) -> MetricsConfig {
        MetricsConfig {
            samples_per_loop: self.samples_per_loop,
        }
    }
}

/// A scorer ready to run on one mesh.
pub enum ScorerChoice<'m> {
    Heuristic,
    /// Replays a token stream over the whole mesh.
    Replay(TokenSequence),
    Model(&'m Model),
}

/// Ground-truth token stream of a UV-mapped mesh: extracted, traced and
/// canonically ordered seams.
pub fn reference_tokens(mesh: &Mesh, adjacency: &AdjacencyTable, tolerance: f64) -> Result<TokenSequence> {
    let seams = extract_seams_from_uv(mesh, adjacency, tolerance)?;
    let ordered = canonical_order(mesh, adjacency, &trace_chains(&seams));
    Ok(tokenize(&ordered.chain_set()))
}

pub struct Decoded {
    pub chains: ChainSet,
    pub json: String,
}

/// Runs the decoder. Replay always decodes the whole mesh in one pass since
/// its target is expressed in whole-mesh vertex ids.
pub fn decode_stage(
    mesh: &Mesh,
    adjacency: &AdjacencyTable,
    scorer: &ScorerChoice<'_>,
    config: &PipelineConfig,
    divide: bool,
) -> Result<Decoded> {
    if let ScorerChoice::Replay(target) = scorer {
        let mut s = ReplayScorer::new(target);
        let out = decode(mesh, adjacency, &mut s, &config.decode_config())?;
        return Ok(Decoded {
            json: out.to_json(),
            chains: out.chains,
        });
    }
    if divide {
        let mut factory = |sub: &SubMesh<'_>| -> Result<Box<dyn Scorer + '_>> {
            Ok(match scorer {
                ScorerChoice::Model(model) => Box::new(ModelScorer::new(model)),
                _ => Box::new(HeuristicScorer::new(sub.mesh, sub.adjacency)),
            })
        };
        let out = divide_and_conquer_decode(mesh, adjacency, &mut factory, &config.dc_config())?;
        Ok(Decoded {
            json: out.to_json(),
            chains: out.chains,
        })
    } else {
        let out = match scorer {
            ScorerChoice::Model(model) => decode(
                mesh,
                adjacency,
                &mut ModelScorer::new(model),
                &config.decode_config(),
            )?,
            _ => decode(
                mesh,
                adjacency,
                &mut HeuristicScorer::new(mesh, adjacency),
                &config.decode_config(),
            )?,
        };
        Ok(Decoded {
            json: out.to_json(),
            chains: out.chains,
        })
    }
}

pub struct Atlas {
    pub charts: Vec<Chart>,
    /// Packed into the unit square.
    pub uvs: Vec<UvChart>,
    /// Input seams plus any auto-cut edges.
    pub seams: SeamEdgeSet,
    pub report: AtlasReport,
}

/// Cut, flatten (charts in parallel), pack and measure.
pub fn atlas_stage(
    mesh: &Mesh,
    adjacency: &AdjacencyTable,
    seams: &SeamEdgeSet,
    config: &PipelineConfig,
) -> Result<Atlas> {
    let (charts, seams, added) = if config.auto_cut {
        let (charts, seams, rec) = auto_cut(mesh, adjacency, seams)?;
        (charts, seams, rec.added.len())
    } else {
        (cut_mesh(mesh, adjacency, seams)?, seams.clone(), 0)
    };
    let uvs: Vec<UvChart> = charts
        .par_iter()
        .map(|c| flatten_chart(c, config.flattener))
        .collect::<Result<_>>()?;
    let uvs = pack_charts(&charts, &uvs, &config.pack_config())?;
    let mut report = compute_metrics(mesh, &charts, &uvs, &seams, &config.metrics_config())?;
    report.auto_cut_edges = added;
    Ok(Atlas {
        charts,
        uvs,
        seams,
        report,
    })
}

pub fn report_json(report: &AtlasReport) -> String {
    report.to_json() + "\n"
}

pub fn svg_bytes(atlas: &Atlas) -> Vec<u8> {
    let mut buf = Vec::new();
    write_uv_svg(&atlas.charts, &atlas.uvs, 1024, &mut buf).expect("writing to memory");
    buf
}

pub fn obj_bytes(mesh: &Mesh, atlas: &Atlas) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_atlas_obj(mesh, &atlas.charts, &atlas.uvs, &mut buf)?;
    Ok(buf)
}

pub fn ply_bytes(mesh: &Mesh, chains: &ChainSet) -> Vec<u8> {
    let mut buf = Vec::new();
    write_seam_ply(mesh, chains.chains(), &mut buf).expect("writing to memory");
    buf
}

/// Artifacts of one end-to-end run, as (file name, contents).
pub struct PipelineOutput {
    pub files: Vec<(&'static str, Vec<u8>)>,
    pub report: AtlasReport,
}

pub fn run_pipeline(
    mesh: &Mesh,
    scorer: &ScorerChoice<'_>,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    config.validate()?;
    let adjacency = seamforge_core::build_adjacency(mesh)?;
    let decoded = decode_stage(mesh, &adjacency, scorer, config, config.divide_and_conquer)?;
    log::info!("decoded {} chains", decoded.chains.len());
    let seams = chains_to_edges(&decoded.chains)?;
    let atlas = atlas_stage(mesh, &adjacency, &seams, config)?;
    log::info!(
        "{} charts, {} auto-cut edges",
        atlas.charts.len(),
        atlas.report.auto_cut_edges
    );
    let files = vec![
        ("decode.json", (decoded.json + "\n").into_bytes()),
        ("chains.json", (decoded.chains.to_json() + "\n").into_bytes()),
        ("seams.json", (atlas.seams.to_json() + "\n").into_bytes()),
        ("atlas.obj", obj_bytes(mesh, &atlas)?),
        ("report.json", report_json(&atlas.report).into_bytes()),
        ("uv.svg", svg_bytes(&atlas)),
        ("seams.ply", ply_bytes(mesh, &decoded.chains)),
    ];
    Ok(PipelineOutput {
        files,
        report: atlas.report,
    })
}
