//! Cutting, flattening, packing and measuring UV atlases.

mod cut;
mod export;
mod flatten;
mod metrics;
mod pack;

pub use cut::{auto_cut, cut_mesh, disk_cut, AutoCut, Chart};
pub use export::{atlas_mesh, write_atlas_obj, write_seam_ply, write_uv_svg, PALETTE};
pub use flatten::{flatten_chart, flatten_lscm, flatten_tutte, Flattener, UvChart};
pub use metrics::{
    compactness, compute_metrics, conformality, convexity, loop_jaggedness, resample_loop, AtlasReport,
    ChartReport, MetricsConfig, REPORT_SCHEMA,
};
pub use pack::{pack_charts, PackConfig};
