//! Tab-separated reports: share table, large-scale parameters, cluster
//! tables and metrics.

use std::io::Write;

use itertools::Itertools;

use crate::error::Result;
use crate::geometry::Position;
use crate::grouping::ShareTable;
use crate::lsp::LspDraw;
use crate::metrics::MetricsReport;
use crate::sharing::{OwnerView, OwnerViews};

fn point(p: Position) -> String {
    format!("{}\t{}\t{}", p.x, p.y, p.z)
}

pub fn write_share_table<W: Write>(table: &ShareTable, mut w: W) -> Result<()> {
    writeln!(
        w,
        "segment\tmembers\tcentroid_x_m\tcentroid_y_m\tmean_distance_m\tproportion\tscaled_proportion\tcount\tcluster_ids"
    )?;
    for seg in &table.segments {
        for g in &seg.groups {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                seg.segment,
                g.members.iter().join(","),
                g.centroid.x,
                g.centroid.y,
                g.mean_distance,
                g.proportion,
                g.scaled_proportion,
                g.count,
                g.cluster_ids.iter().join(",")
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_lsp<W: Write>(lsp: &LspDraw, mut w: W) -> Result<()> {
    writeln!(
        w,
        "user\tsegment\tdelay_spread_s\taoa_spread_deg\taod_spread_deg\teoa_spread_deg\teod_spread_deg"
    )?;
    for (user, segment, l) in lsp.iter() {
        writeln!(
            w,
            "{user}\t{segment}\t{}\t{}\t{}\t{}\t{}",
            l.sigma_tau, l.sigma_aoa, l.sigma_aod, l.sigma_eoa, l.sigma_eod
        )?;
    }
    w.flush()?;
    Ok(())
}

fn cluster_header(subarrays: usize) -> String {
    let mut cols = vec![
        "segment",
        "user",
        "cluster_id",
        "generating_user",
        "recalc_mode",
        "power",
        "delay_s",
        "aoa_az_deg",
        "aoa_el_deg",
        "lbs_x_m",
        "lbs_y_m",
        "lbs_z_m",
        "interior_length_m",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    for a in 0..subarrays {
        for name in ["aod_az_deg", "aod_el_deg", "fbs_x_m", "fbs_y_m", "fbs_z_m"] {
            cols.push(format!("{name}_{a}"));
        }
    }
    cols.join("\t")
}

/// Parameter columns of a view, without the segment/user/mode prefix.
pub fn view_parameters(v: &OwnerView) -> String {
    let mut s = format!(
        "{}\t{}\t{}\t{}\t{}\t{}",
        v.power,
        v.delay,
        v.aoa_az_deg,
        v.aoa_el_deg,
        point(v.lbs),
        v.interior_length_m
    );
    for ((az, el), fbs) in v.departures.iter().zip(&v.fbs) {
        s.push_str(&format!("\t{az}\t{el}\t{}", point(*fbs)));
    }
    s
}

/// One row per (owner, cluster) with every table entry of the cluster.
pub fn write_cluster_table<W: Write>(views: &OwnerViews, subarrays: usize, mut w: W) -> Result<()> {
    writeln!(w, "{}", cluster_header(subarrays))?;
    for v in views.iter() {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            v.segment,
            v.user,
            v.cluster_id,
            v.generating_user,
            v.recalc_mode.as_str(),
            view_parameters(v)
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_correlations<W: Write>(report: &MetricsReport, mut w: W) -> Result<()> {
    writeln!(w, "user_a\tuser_b\tsnapshot\tcorrelation")?;
    for p in &report.correlations {
        for (t, c) in p.per_snapshot.iter().enumerate() {
            writeln!(w, "{}\t{}\t{t}\t{c}", p.user_a, p.user_b)?;
        }
        writeln!(w, "{}\t{}\tmean\t{}", p.user_a, p.user_b, p.mean)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_shared_counts<W: Write>(report: &MetricsReport, mut w: W) -> Result<()> {
    writeln!(w, "segment\tuser_a\tuser_b\tshared_clusters")?;
    for s in &report.shared_counts {
        writeln!(w, "{}\t{}\t{}\t{}", s.segment, s.user_a, s.user_b, s.shared_clusters)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_planar_error<W: Write>(report: &MetricsReport, mut w: W) -> Result<()> {
    writeln!(w, "subarray\tmax_phase_error_rad")?;
    for (a, e) in report.planar_phase_error.iter().enumerate() {
        writeln!(w, "{a}\t{e}")?;
    }
    w.flush()?;
    Ok(())
}
