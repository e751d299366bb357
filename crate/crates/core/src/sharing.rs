//! Per-owner views of shared clusters.
//!
//! A shared cluster is generated from one user's parameters and position.
//! Every other owner gets a copy that is then adapted to its own position in
//! one of two ways:
//!
//! * far clusters keep delay, power and angles, and the focal points are
//!   re-solved from the owner's position;
//! * clusters closer than three segment lengths keep their focal points, and
//!   angles and delay are re-derived from the owner's position, so the
//!   cluster stays the same physical object for everybody.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::clustergen::{Cluster, ClusterSet};
use crate::error::{GscmError, Result};
use crate::geometry::{Position, SPEED_OF_LIGHT};
use crate::grouping::ClusterId;
use crate::layout::{ArrayGeometry, UserId, UserLayout};
use crate::spherical::{interior_length, total_path_length, FocalGeometry};

/// Recalculation threshold in segment lengths.
pub const KEEP_FOCAL_POINT_SEGMENTS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecalcMode {
    /// The user whose parameters generated the cluster.
    Generator,
    /// Copied from the generator and not yet adapted.
    Duplicate,
    KeptParameters,
    KeptFocalPoint,
}

impl RecalcMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RecalcMode::Generator => "generator",
            RecalcMode::Duplicate => "duplicate",
            RecalcMode::KeptParameters => "kept-parameters",
            RecalcMode::KeptFocalPoint => "kept-focal-point",
        }
    }
}

/// One owner's parameters for one cluster.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OwnerView {
    pub user: UserId,
    pub segment: usize,
    pub cluster_id: ClusterId,
    pub generating_user: UserId,
    pub recalc_mode: RecalcMode,
    /// Segment-start position of the owner.
    pub owner_position: Position,
    /// Segment-start position of the generating user.
    pub generator_position: Position,
    pub delay: f64,
    /// Weight within the owner's power budget.
    pub power: f64,
    pub aoa_az_deg: f64,
    pub aoa_el_deg: f64,
    /// (azimuth, elevation) per sub-array.
    pub departures: Vec<(f64, f64)>,
    pub lbs: Position,
    pub fbs: Vec<Position>,
    pub interior_length_m: f64,
    pub interior_clamped: bool,
}

impl OwnerView {
    fn from_cluster(
        cluster: &Cluster,
        user: UserId,
        power: f64,
        owner_position: Position,
        generator_position: Position,
    ) -> Result<Self> {
        let missing = || GscmError::IncompleteViews(format!("cluster {} has no focal points", cluster.id));
        let lbs = cluster.lbs.ok_or_else(missing)?;
        let fbs = cluster
            .departures
            .iter()
            .map(|d| d.fbs.ok_or_else(missing))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            user,
            segment: cluster.segment,
            cluster_id: cluster.id,
            generating_user: cluster.generating_user,
            recalc_mode: if user == cluster.generating_user {
                RecalcMode::Generator
            } else {
                RecalcMode::Duplicate
            },
            owner_position,
            generator_position,
            delay: cluster.delay,
            power,
            aoa_az_deg: cluster.aoa_az_deg,
            aoa_el_deg: cluster.aoa_el_deg,
            departures: cluster
                .departures
                .iter()
                .map(|d| (d.azimuth_deg, d.elevation_deg))
                .collect(),
            lbs,
            fbs,
            interior_length_m: cluster.interior_length_m.ok_or_else(missing)?,
            interior_clamped: cluster.interior_clamped,
        })
    }

    /// Length of the path through the reference sub-array's focal point,
    /// the interior segment and the receiver-side focal point, ending at `rx`.
    pub fn center_path_length(&self, array: &ArrayGeometry, rx: Position) -> f64 {
        let reference = array.reference_subarray();
        reference.center.distance(self.fbs[reference.index]) + self.interior_length_m + self.lbs.distance(rx)
    }

    /// Relative mismatch between the focal-point path and the path length
    /// implied by the view's delay, at the owner's segment start.
    pub fn path_closure_error(&self, array: &ArrayGeometry) -> f64 {
        let apos = array.reference_subarray().center;
        let d_c = total_path_length(self.delay, apos, self.owner_position);
        (self.center_path_length(array, self.owner_position) - d_c).abs() / d_c
    }
}

/// Owner views keyed by (user, segment), each list ordered by cluster id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OwnerViews {
    views: BTreeMap<(UserId, usize), Vec<OwnerView>>,
}

impl OwnerViews {
    pub fn get(&self, user: UserId, segment: usize) -> Option<&[OwnerView]> {
        self.views.get(&(user, segment)).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = &OwnerView> {
        self.views.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.views.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn view(&self, user: UserId, segment: usize, cluster: ClusterId) -> Option<&OwnerView> {
        self.get(user, segment)?.iter().find(|v| v.cluster_id == cluster)
    }
}

/// Copies every cluster into the table of each of its owners.
pub fn share_clusters(clusters: &ClusterSet, layout: &UserLayout) -> Result<OwnerViews> {
    let mut views = BTreeMap::new();
    for ((user, segment), list) in clusters.user_lists() {
        let owner_position = layout.segment_start(user, segment)?;
        let row = list
            .iter()
            .map(|&(id, power)| {
                let cluster = clusters
                    .cluster(id)
                    .ok_or_else(|| GscmError::IncompleteViews(format!("unknown cluster {id}")))?;
                let generator_position = layout.segment_start(cluster.generating_user, segment)?;
                OwnerView::from_cluster(cluster, user, power, owner_position, generator_position)
            })
            .collect::<Result<Vec<_>>>()?;
        views.insert((user, segment), row);
    }
    Ok(OwnerViews { views })
}

/// Keeps the focal point when the receiver-side focal point lies closer than
/// three segment lengths to the joining owner (strict).
pub fn choose_recalc_mode(lbs: Position, owner_position: Position, segment_length_m: f64) -> RecalcMode {
    if lbs.distance(owner_position) < KEEP_FOCAL_POINT_SEGMENTS * segment_length_m {
        RecalcMode::KeptFocalPoint
    } else {
        RecalcMode::KeptParameters
    }
}

/// Keeps delay, power and angles; re-solves both focal points for the owner.
pub fn recalc_kept_parameters(view: &OwnerView, array: &ArrayGeometry) -> Result<OwnerView> {
    let owner = view.owner_position;
    let reference = array.reference_subarray();
    let d_ref = total_path_length(view.delay, reference.center, owner);
    let g_hat = Position::from_angles_deg(view.aoa_az_deg, view.aoa_el_deg);
    let lbs = FocalGeometry::solve(owner, reference.center, g_hat, d_ref)?;

    let fbs = array
        .subarrays
        .iter()
        .map(|sa| {
            let (az, el) = view.departures[sa.index];
            let d_c = total_path_length(view.delay, sa.center, owner);
            FocalGeometry::solve(sa.center, owner, Position::from_angles_deg(az, el), d_c)
        })
        .collect::<Result<Vec<_>>>()?;
    let (interior, clamped) = interior_length(d_ref, fbs[reference.index].e_len, lbs.e_len);

    Ok(OwnerView {
        recalc_mode: RecalcMode::KeptParameters,
        lbs: lbs.focal_point(),
        fbs: fbs.iter().map(FocalGeometry::focal_point).collect(),
        interior_length_m: interior,
        interior_clamped: clamped,
        ..view.clone()
    })
}

/// Keeps the focal points and the interior length; re-derives angles and
/// delay from the owner's position. Power is unchanged.
pub fn recalc_kept_focal_point(view: &OwnerView, array: &ArrayGeometry) -> OwnerView {
    if view.owner_position == view.generator_position {
        // A co-located owner sees exactly the generator's geometry.
        return OwnerView {
            recalc_mode: RecalcMode::KeptFocalPoint,
            ..view.clone()
        };
    }
    let owner = view.owner_position;
    let (aoa_az_deg, aoa_el_deg) = (view.lbs - owner).angles_deg();
    let departures = array
        .subarrays
        .iter()
        .map(|sa| (view.fbs[sa.index] - sa.center).angles_deg())
        .collect();
    let reference = array.reference_subarray();
    let path = view.center_path_length(array, owner);
    let delay = ((path - owner.distance(reference.center)) / SPEED_OF_LIGHT).max(0.0);
    OwnerView {
        recalc_mode: RecalcMode::KeptFocalPoint,
        aoa_az_deg,
        aoa_el_deg,
        departures,
        delay,
        ..view.clone()
    }
}

/// Adapts every duplicated view to its owner.
pub fn recalculate_views(views: &OwnerViews, layout: &UserLayout) -> Result<OwnerViews> {
    let array = layout.array();
    let out = views
        .views
        .par_iter()
        .map(|(&(user, segment), row)| {
            let seg_len = layout.segment(segment)?.length_m;
            let row = row
                .iter()
                .map(|v| match v.recalc_mode {
                    RecalcMode::Duplicate => match choose_recalc_mode(v.lbs, v.owner_position, seg_len) {
                        RecalcMode::KeptFocalPoint => Ok(recalc_kept_focal_point(v, array)),
                        _ => recalc_kept_parameters(v, array).map_err(|e| {
                            e.context(format!("user {user}, segment {segment}, cluster {}", v.cluster_id))
                        }),
                    },
                    _ => Ok(v.clone()),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(((user, segment), row))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(OwnerViews { views: out })
}
