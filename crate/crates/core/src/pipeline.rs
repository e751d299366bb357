//! End-to-end run: per segment, shares -> initial parameters -> focal
//! points -> sharing -> recalculation, then coefficient synthesis.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::info;

use crate::clustergen::{assemble_clusters, ClusterSet};
use crate::coefficients::{synthesize, ChannelTensor};
use crate::config::{OutputFormat, RunConfig};
use crate::error::{GscmError, Result};
use crate::export;
use crate::grouping::{plan_shares, ShareTable};
use crate::layout::UserLayout;
use crate::lsp::{draw_lsp, LspDraw};
use crate::metrics::{correlation_metrics, planar_error_summary, shared_counts, MetricsReport};
use crate::sharing::{recalculate_views, share_clusters, OwnerViews};
use crate::spherical::attach_focal_points;
use crate::tensor_file;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub layout: UserLayout,
    pub shares: ShareTable,
    pub lsp: LspDraw,
    pub clusters: ClusterSet,
    pub views: OwnerViews,
    pub tensor: ChannelTensor,
    pub metrics: MetricsReport,
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| GscmError::Config(format!("cannot start {workers} workers: {e}")))?;
    pool.install(f)
}

/// Share allocation only, no synthesis.
pub fn plan(config: &RunConfig) -> Result<(UserLayout, ShareTable)> {
    let layout = config.build_layout()?;
    let shares = with_workers(config.workers, || {
        plan_shares(&layout, config.scenario.clusters_per_user)
    })?;
    Ok((layout, shares))
}

pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let layout = config.build_layout()?;
    with_workers(config.workers, || run_layout(config, layout))
}

fn run_layout(config: &RunConfig, layout: UserLayout) -> Result<RunOutput> {
    let seed = config.seed;
    let scenario = &config.scenario;
    let k = scenario.clusters_per_user;

    let shares = plan_shares(&layout, k)?;
    info!("share table: {} segments", shares.segments.len());
    let lsp = draw_lsp(scenario, &layout, seed)?;
    let mut clusters = assemble_clusters(&shares, &lsp, &layout, scenario, seed)?;
    attach_focal_points(&mut clusters, &layout, seed)?;
    info!("{} clusters generated", clusters.len());
    let views = share_clusters(&clusters, &layout)?;
    let views = recalculate_views(&views, &layout)?;
    let tensor = synthesize(&views, &layout, &config.synthesis_params(), k as usize)?;

    let mut metrics = correlation_metrics(&tensor);
    metrics.shared_counts = shared_counts(&shares, &layout);
    metrics.planar_phase_error = planar_error_summary(&views, &layout, scenario.carrier_hz);

    Ok(RunOutput {
        layout,
        shares,
        lsp,
        clusters,
        views,
        tensor,
        metrics,
    })
}

fn create(dir: &Path, name: &str, written: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| GscmError::Io(e).context(format!("creating {}", path.display())))?;
    written.push(path);
    Ok(BufWriter::new(file))
}

/// Writes every report into `dir`; returns the paths written.
pub fn write_outputs(out: &RunOutput, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    export::write_share_table(&out.shares, create(dir, "shares.tsv", &mut written)?)?;
    export::write_lsp(&out.lsp, create(dir, "lsp.tsv", &mut written)?)?;
    export::write_cluster_table(
        &out.views,
        out.layout.array().subarray_count(),
        create(dir, "clusters.tsv", &mut written)?,
    )?;
    export::write_correlations(&out.metrics, create(dir, "metrics_correlation.tsv", &mut written)?)?;
    export::write_shared_counts(&out.metrics, create(dir, "metrics_shared.tsv", &mut written)?)?;
    export::write_planar_error(&out.metrics, create(dir, "metrics_planar.tsv", &mut written)?)?;
    match format {
        OutputFormat::Binary => {
            tensor_file::write_binary(&out.tensor, create(dir, "channel.bin", &mut written)?)?;
        }
        OutputFormat::Text => {
            tensor_file::write_text_coefficients(&out.tensor, create(dir, "channel_coefficients.tsv", &mut written)?)?;
            tensor_file::write_text_delays(&out.tensor, create(dir, "channel_delays.tsv", &mut written)?)?;
        }
    }
    Ok(written)
}
