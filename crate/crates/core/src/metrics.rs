//! Multi-user channel correlation and spherical-wave diagnostics.

use num_complex::Complex64;
use serde::Serialize;

use crate::coefficients::{planar_vs_spherical_error, ChannelTensor};
use crate::grouping::ShareTable;
use crate::layout::{UserId, UserLayout};
use crate::sharing::OwnerViews;

/// `|aᴴb| / (‖a‖ ‖b‖)`, zero when either vector vanishes.
pub fn normalized_correlation(a: &[Complex64], b: &[Complex64]) -> f64 {
    let inner: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (inner.norm() / (na * nb)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCorrelation {
    pub user_a: UserId,
    pub user_b: UserId,
    pub per_snapshot: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharedCount {
    pub segment: usize,
    pub user_a: UserId,
    pub user_b: UserId,
    pub shared_clusters: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MetricsReport {
    pub correlations: Vec<PairCorrelation>,
    pub shared_counts: Vec<SharedCount>,
    /// Largest planar-vs-spherical phase error per sub-array over all views,
    /// radians.
    pub planar_phase_error: Vec<f64>,
}

impl MetricsReport {
    pub fn correlation(&self, a: UserId, b: UserId) -> Option<&PairCorrelation> {
        self.correlations
            .iter()
            .find(|p| (p.user_a, p.user_b) == (a, b) || (p.user_a, p.user_b) == (b, a))
    }
}

/// Normalized inner products of every user pair over the stacked
/// (rx, tx, cluster) channel, per snapshot and averaged.
pub fn correlation_metrics(tensor: &ChannelTensor) -> MetricsReport {
    let n = tensor.users.len();
    let rows: Vec<Vec<Vec<Complex64>>> = (0..n)
        .map(|u| (0..tensor.snapshots).map(|t| tensor.row(u, t)).collect())
        .collect();
    let mut correlations = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let per_snapshot: Vec<f64> = (0..tensor.snapshots)
                .map(|t| normalized_correlation(&rows[a][t], &rows[b][t]))
                .collect();
            let mean = if per_snapshot.is_empty() {
                0.0
            } else {
                per_snapshot.iter().sum::<f64>() / per_snapshot.len() as f64
            };
            correlations.push(PairCorrelation {
                user_a: tensor.users[a],
                user_b: tensor.users[b],
                per_snapshot,
                mean,
            });
        }
    }
    MetricsReport {
        correlations,
        ..Default::default()
    }
}

/// Number of clusters each user pair shares, per segment.
pub fn shared_counts(table: &ShareTable, layout: &UserLayout) -> Vec<SharedCount> {
    let users: Vec<UserId> = layout.users().collect();
    let mut out = Vec::new();
    for seg in &table.segments {
        for (i, &a) in users.iter().enumerate() {
            let ca = seg.clusters_of(a);
            for &b in &users[i + 1..] {
                let cb = seg.clusters_of(b);
                out.push(SharedCount {
                    segment: seg.segment,
                    user_a: a,
                    user_b: b,
                    shared_clusters: ca.iter().filter(|id| cb.binary_search(id).is_ok()).count(),
                });
            }
        }
    }
    out
}

/// Worst planar-approximation phase error per sub-array over all views.
pub fn planar_error_summary(views: &OwnerViews, layout: &UserLayout, carrier_hz: f64) -> Vec<f64> {
    let mut worst = vec![0.0f64; layout.array().subarray_count()];
    for v in views.iter() {
        for (w, e) in worst
            .iter_mut()
            .zip(planar_vs_spherical_error(v, layout.array(), carrier_hz))
        {
            *w = w.max(e);
        }
    }
    worst
}
