//! Initial cluster parameters.
//!
//! Every group of the share table gets its clusters generated from the
//! large-scale parameters of a single user: the group's sole member, or a
//! member picked uniformly at random when the group is shared. Each cluster
//! carries a delay, a power, one arrival direction and one departure
//! direction per base-station sub-array, drawn independently per sub-array.
//!
//! Angles are stored in the global frame. They are drawn as Gaussian offsets
//! around the line-of-sight direction between the generating user and the
//! relevant array point.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GscmError, Result};
use crate::geometry::{wrap_deg, Position};
use crate::grouping::{ClusterId, GroupShare, ShareTable};
use crate::layout::{UserId, UserLayout};
use crate::lsp::{Lsp, LspDraw, ScenarioConfig};
use crate::rng::{self, stream, StreamRng};

/// Departure direction and transmitter-side focal point for one sub-array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Departure {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub fbs: Option<Position>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    pub id: ClusterId,
    pub segment: usize,
    pub owners: Vec<UserId>,
    pub generating_user: UserId,
    /// Excess delay, seconds.
    pub delay: f64,
    /// Fraction of the generating group's power.
    pub power: f64,
    pub aoa_az_deg: f64,
    pub aoa_el_deg: f64,
    pub lbs: Option<Position>,
    pub departures: Vec<Departure>,
    /// Path length between the transmitter-side and receiver-side focal
    /// points; set together with the focal points.
    pub interior_length_m: Option<f64>,
    pub interior_clamped: bool,
    /// Large-scale parameters the cluster was drawn from.
    #[serde(skip)]
    pub generator_lsp: Lsp,
}

/// One named entry of a cluster's parameter table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamValue {
    Scalar(f64),
    Point(Position),
}

impl Cluster {
    pub fn subarray_count(&self) -> usize {
        self.departures.len()
    }

    pub fn has_focal_points(&self) -> bool {
        self.lbs.is_some() && self.departures.iter().all(|d| d.fbs.is_some())
    }

    /// The cluster's parameter table: `4 + 2A` scalars before focal points,
    /// `5 + 3A` entries once the focal points are attached.
    pub fn parameter_table(&self) -> Vec<(String, ParamValue)> {
        let mut table = vec![
            ("power".to_string(), ParamValue::Scalar(self.power)),
            ("delay_s".to_string(), ParamValue::Scalar(self.delay)),
            ("aoa_az_deg".to_string(), ParamValue::Scalar(self.aoa_az_deg)),
            ("aoa_el_deg".to_string(), ParamValue::Scalar(self.aoa_el_deg)),
        ];
        if let Some(lbs) = self.lbs {
            table.push(("lbs_m".to_string(), ParamValue::Point(lbs)));
        }
        for (a, d) in self.departures.iter().enumerate() {
            table.push((format!("aod_az_deg[{a}]"), ParamValue::Scalar(d.azimuth_deg)));
            table.push((format!("aod_el_deg[{a}]"), ParamValue::Scalar(d.elevation_deg)));
            if let Some(fbs) = d.fbs {
                table.push((format!("fbs_m[{a}]"), ParamValue::Point(fbs)));
            }
        }
        table
    }
}

/// Clusters of a run plus every user's (budget-normalized) cluster list.
///
/// A shared cluster is stored once and referenced by id from each owner's
/// list, so changes to it are seen by every owner.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClusterSet {
    clusters: BTreeMap<ClusterId, Cluster>,
    /// (user, segment) -> [(cluster id, power normalized over the user's list)]
    user_lists: BTreeMap<(UserId, usize), Vec<(ClusterId, f64)>>,
}

impl ClusterSet {
    pub fn cluster(&self, id: ClusterId) -> Option<&Cluster> {
        self.clusters.get(&id)
    }

    pub fn cluster_mut(&mut self, id: ClusterId) -> Option<&mut Cluster> {
        self.clusters.get_mut(&id)
    }

    pub fn clusters(&self) -> impl Iterator<Item = &Cluster> {
        self.clusters.values()
    }

    pub fn clusters_mut(&mut self) -> impl Iterator<Item = &mut Cluster> {
        self.clusters.values_mut()
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// A user's clusters in one segment with the user's own power weights.
    pub fn user_clusters(&self, user: UserId, segment: usize) -> Vec<(&Cluster, f64)> {
        self.user_lists
            .get(&(user, segment))
            .map(|list| list.iter().map(|(id, w)| (&self.clusters[id], *w)).collect())
            .unwrap_or_default()
    }

    pub fn user_lists(&self) -> impl Iterator<Item = ((UserId, usize), &[(ClusterId, f64)])> {
        self.user_lists.iter().map(|(k, v)| (*k, v.as_slice()))
    }
}

/// Excess delays: exponential draws with scale `delay_scaling * sigma_tau`,
/// sorted and shifted so the first is zero.
pub fn gen_delays<R: Rng + ?Sized>(n: usize, sigma_tau: f64, delay_scaling: f64, rng: &mut R) -> Vec<f64> {
    let scale = delay_scaling * sigma_tau;
    let mut delays: Vec<f64> = if scale > 0.0 {
        let law = Exp::new(1.0 / scale).expect("positive rate");
        (0..n).map(|_| law.sample(rng)).collect()
    } else {
        vec![0.0; n]
    };
    delays.sort_by(f64::total_cmp);
    if let Some(&min) = delays.first() {
        delays.iter_mut().for_each(|d| *d -= min);
    }
    delays
}

/// Exponentially decaying powers with log-normal per-cluster shadowing,
/// normalized to sum to one.
pub fn gen_powers<R: Rng + ?Sized>(
    delays: &[f64],
    sigma_tau: f64,
    delay_scaling: f64,
    shadowing_std_db: f64,
    rng: &mut R,
) -> Vec<f64> {
    let shadow = Normal::new(0.0, shadowing_std_db).expect("non-negative std");
    let decay = (delay_scaling - 1.0) / (delay_scaling * sigma_tau);
    let raw: Vec<f64> = delays
        .iter()
        .map(|&tau| {
            let z: f64 = shadow.sample(rng);
            (-tau * decay).exp() * 10f64.powf(-z / 10.0)
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

fn draw_angle_pair<R: Rng + ?Sized>(sigma_az: f64, sigma_el: f64, rng: &mut R) -> (f64, f64) {
    let az: f64 = Normal::new(0.0, sigma_az).expect("non-negative std").sample(rng);
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let el: f64 = Normal::new(0.0, sigma_el).expect("non-negative std").sample(rng);
    (wrap_deg(sign * az), el.clamp(-90.0, 90.0))
}

/// Arrival (azimuth, elevation) offsets in degrees, one per cluster.
pub fn gen_arrival_angles<R: Rng + ?Sized>(
    powers: &[f64],
    sigma_aoa: f64,
    sigma_eoa: f64,
    rng: &mut R,
) -> Vec<(f64, f64)> {
    powers
        .iter()
        .map(|_| draw_angle_pair(sigma_aoa, sigma_eoa, rng))
        .collect()
}

/// Departure (azimuth, elevation) offsets, drawn independently for each of
/// `subarrays` sub-arrays.
pub fn gen_departure_angles<R: Rng + ?Sized>(
    subarrays: usize,
    sigma_aod: f64,
    sigma_eod: f64,
    rng: &mut R,
) -> Vec<(f64, f64)> {
    (0..subarrays)
        .map(|_| draw_angle_pair(sigma_aod, sigma_eod, rng))
        .collect()
}

/// Line-of-sight direction from `from` to `to` as (azimuth, elevation).
pub(crate) fn los_angles(from: Position, to: Position) -> (f64, f64) {
    (to - from).angles_deg()
}

/// Adds a drawn offset to a line-of-sight direction.
pub(crate) fn offset_direction(los: (f64, f64), offset: (f64, f64)) -> (f64, f64) {
    (wrap_deg(los.0 + offset.0), (los.1 + offset.1).clamp(-90.0, 90.0))
}

/// Redraws the arrival direction of a cluster.
pub(crate) fn redraw_arrival(cluster: &Cluster, user_pos: Position, apos: Position, rng: &mut StreamRng) -> (f64, f64) {
    let lsp = &cluster.generator_lsp;
    offset_direction(
        los_angles(user_pos, apos),
        draw_angle_pair(lsp.sigma_aoa, lsp.sigma_eoa, rng),
    )
}

/// Redraws the departure direction of a cluster for one sub-array.
pub(crate) fn redraw_departure(
    cluster: &Cluster,
    apos: Position,
    user_pos: Position,
    rng: &mut StreamRng,
) -> (f64, f64) {
    let lsp = &cluster.generator_lsp;
    offset_direction(
        los_angles(apos, user_pos),
        draw_angle_pair(lsp.sigma_aod, lsp.sigma_eod, rng),
    )
}

/// Picks the user whose parameters generate a group's clusters.
pub fn pick_generating_user(group: &GroupShare, segment: usize, seed: u64) -> UserId {
    if group.members.len() == 1 {
        return group.members[0];
    }
    let mut rng = rng::keyed(seed, &[stream::GENERATOR_PICK, segment as u64, group_key(group)]);
    group.members[rng.random_range(0..group.members.len())]
}

fn group_key(group: &GroupShare) -> u64 {
    group.cluster_ids.first().map_or(u64::MAX, |&id| id as u64)
}

fn generate_group(
    group: &GroupShare,
    segment: usize,
    lsp: &LspDraw,
    layout: &UserLayout,
    scenario: &ScenarioConfig,
    seed: u64,
) -> Result<Vec<Cluster>> {
    let n = group.cluster_ids.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let generator = pick_generating_user(group, segment, seed);
    let params = *lsp.get(generator, segment)?;
    let user_pos = layout.segment_start(generator, segment)?;
    let array = layout.array();
    let apos_ref = array.reference_subarray().center;

    let mut rng = rng::keyed(seed, &[stream::CLUSTER_PARAMS, segment as u64, group_key(group)]);
    let delays = gen_delays(n, params.sigma_tau, scenario.delay_scaling, &mut rng);
    let powers = gen_powers(
        &delays,
        params.sigma_tau,
        scenario.delay_scaling,
        scenario.cluster_shadowing_std_db,
        &mut rng,
    );
    let arrivals = gen_arrival_angles(&powers, params.sigma_aoa, params.sigma_eoa, &mut rng);
    let min_delay = scenario.min_excess_delay_ns * 1e-9;
    let arrival_los = los_angles(user_pos, apos_ref);

    Ok(group
        .cluster_ids
        .iter()
        .enumerate()
        .map(|(c, &id)| {
            let (aoa_az_deg, aoa_el_deg) = offset_direction(arrival_los, arrivals[c]);
            let departures = gen_departure_angles(array.subarray_count(), params.sigma_aod, params.sigma_eod, &mut rng)
                .into_iter()
                .zip(&array.subarrays)
                .map(|(offset, sa)| {
                    let (azimuth_deg, elevation_deg) = offset_direction(los_angles(sa.center, user_pos), offset);
                    Departure {
                        azimuth_deg,
                        elevation_deg,
                        fbs: None,
                    }
                })
                .collect();
            Cluster {
                id,
                segment,
                owners: group.members.clone(),
                generating_user: generator,
                delay: delays[c].max(min_delay),
                power: powers[c],
                aoa_az_deg,
                aoa_el_deg,
                lbs: None,
                departures,
                interior_length_m: None,
                interior_clamped: false,
                generator_lsp: params,
            }
        })
        .collect())
}

/// Generates every cluster of the share table and the users' cluster lists.
pub fn assemble_clusters(
    table: &ShareTable,
    lsp: &LspDraw,
    layout: &UserLayout,
    scenario: &ScenarioConfig,
    seed: u64,
) -> Result<ClusterSet> {
    let work: Vec<(usize, &GroupShare)> = table
        .segments
        .iter()
        .flat_map(|s| s.groups.iter().map(move |g| (s.segment, g)))
        .collect();
    let generated = work
        .par_iter()
        .map(|&(segment, group)| {
            generate_group(group, segment, lsp, layout, scenario, seed)
                .map_err(|e| e.context(format!("segment {segment}, group {:?}", group.members)))
        })
        .collect::<Result<Vec<_>>>()?;

    let clusters: BTreeMap<ClusterId, Cluster> = generated.into_iter().flatten().map(|c| (c.id, c)).collect();

    let mut user_lists = BTreeMap::new();
    for shares in &table.segments {
        for user in layout.users() {
            let ids = shares.clusters_of(user);
            let total: f64 = ids.iter().map(|id| clusters[id].power).sum();
            if ids.len() != table.total_clusters_per_user as usize {
                return Err(GscmError::IncompleteViews(format!(
                    "user {user} has {} clusters in segment {}, expected {}",
                    ids.len(),
                    shares.segment,
                    table.total_clusters_per_user
                )));
            }
            let list = ids.iter().map(|id| (*id, clusters[id].power / total)).collect();
            user_lists.insert((user, shares.segment), list);
        }
    }
    Ok(ClusterSet { clusters, user_lists })
}
