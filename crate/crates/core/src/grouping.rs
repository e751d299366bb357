//! Connectivity groups and shared-cluster allocation.
//!
//! Users whose auras overlap are joined in an overlap graph. Within each
//! connected component every subset of users is examined: a subset whose
//! members all lie within one aura radius of their centroid shares a
//! proportion `p = 1 - md / R` of its clusters, where `md` is the mean member
//! distance to the centroid. That proportion is debited from the subsets one
//! member smaller, so single users keep only what is not shared.
//!
//! Proportions are then clamped, rescaled so no user exceeds its budget, and
//! turned into integer cluster counts with globally unique cluster ids.

use std::collections::{BTreeMap, HashMap};

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GscmError, Result};
use crate::geometry::Position;
use crate::layout::{Aura, UserId, UserLayout};

pub type ClusterId = u32;

/// Largest connected component for which subsets are enumerated.
pub const MAX_COMPONENT_USERS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapGraph {
    pub vertices: Vec<UserId>,
    /// Unordered pairs stored as `(smaller, larger)`, sorted.
    pub edges: Vec<(UserId, UserId)>,
}

pub fn build_overlap_graph(auras: &[(UserId, Aura)]) -> OverlapGraph {
    let mut sorted: Vec<_> = auras.to_vec();
    sorted.sort_by_key(|(u, _)| *u);
    let vertices = sorted.iter().map(|(u, _)| *u).collect();
    let edges = sorted
        .iter()
        .tuple_combinations()
        .filter(|((_, a), (_, b))| a.overlaps(b))
        .map(|((u, _), (v, _))| (*u, *v))
        .collect();
    OverlapGraph { vertices, edges }
}

/// Connected components by depth-first search. Each component is sorted and
/// components are ordered by their smallest member.
pub fn connected_components(graph: &OverlapGraph) -> Vec<Vec<UserId>> {
    let index: HashMap<UserId, usize> = graph.vertices.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let mut adjacency = vec![Vec::new(); graph.vertices.len()];
    for &(u, v) in &graph.edges {
        let (iu, iv) = (index[&u], index[&v]);
        adjacency[iu].push(iv);
        adjacency[iv].push(iu);
    }
    let mut marked = vec![false; graph.vertices.len()];
    let mut components = Vec::new();
    for start in 0..graph.vertices.len() {
        if marked[start] {
            continue;
        }
        marked[start] = true;
        let mut stack = vec![start];
        let mut members = Vec::new();
        while let Some(i) = stack.pop() {
            members.push(graph.vertices[i]);
            for &j in &adjacency[i] {
                if !marked[j] {
                    marked[j] = true;
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components.sort_by_key(|c| c[0]);
    components
}

/// Outcome of the subset sweep for one group of users.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawGroup {
    pub members: Vec<UserId>,
    pub centroid: Position,
    pub mean_distance: f64,
    /// Proportion after all debits; may be negative.
    pub proportion: f64,
}

/// Raw proportions of one connected component, keyed by sorted member list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawProportions {
    pub groups: BTreeMap<Vec<UserId>, RawGroup>,
}

impl RawProportions {
    pub fn proportion(&self, members: &[UserId]) -> Option<f64> {
        self.groups.get(members).map(|g| g.proportion)
    }

    fn merge(&mut self, other: RawProportions) {
        self.groups.extend(other.groups);
    }
}

fn planar(p: Position) -> Position {
    Position::new(p.x, p.y, 0.0)
}

/// Sweeps every subset of `component`, smallest groups first.
///
/// Positions are projected onto the horizontal plane, matching the circular
/// auras.
pub fn compute_proportions(
    component: &[UserId],
    positions: &BTreeMap<UserId, Position>,
    radius_m: f64,
) -> Result<RawProportions> {
    let n = component.len();
    if n > MAX_COMPONENT_USERS {
        return Err(GscmError::ComponentTooLarge {
            size: n,
            limit: MAX_COMPONENT_USERS,
        });
    }
    let mut members: Vec<UserId> = component.to_vec();
    members.sort_unstable();
    let pos: Vec<Position> = members
        .iter()
        .map(|u| positions.get(u).copied().map(planar).ok_or(GscmError::UnknownUser(*u)))
        .collect::<Result<_>>()?;

    // Groups are bitmasks over `members`.
    let mut proportion: HashMap<u32, f64> = HashMap::new();
    let mut geometry: HashMap<u32, (Position, f64)> = HashMap::new();
    for i in 0..n {
        proportion.insert(1 << i, 1.0);
        geometry.insert(1 << i, (pos[i], 0.0));
    }
    for size in 2..=n {
        for combo in (0..n).combinations(size) {
            let mask = combo.iter().fold(0u32, |m, &i| m | (1 << i));
            let pts: Vec<Position> = combo.iter().map(|&i| pos[i]).collect();
            let centroid = Position::centroid(&pts).expect("non-empty group");
            let distances: Vec<f64> = pts.iter().map(|p| p.distance(centroid)).collect();
            if distances.iter().all(|&d| d < radius_m) {
                let md = distances.iter().sum::<f64>() / size as f64;
                let p = -md / radius_m + 1.0;
                *proportion.entry(mask).or_insert(0.0) += p;
                geometry.insert(mask, (centroid, md));
                let debit = p / (size - 1) as f64;
                for &i in &combo {
                    *proportion.entry(mask & !(1 << i)).or_insert(0.0) -= debit;
                }
            }
        }
    }

    let mut out = RawProportions::default();
    for (mask, p) in proportion {
        let group: Vec<UserId> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| members[i]).collect();
        let (centroid, mean_distance) = geometry.get(&mask).copied().unwrap_or_else(|| {
            let pts: Vec<Position> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| pos[i]).collect();
            let c = Position::centroid(&pts).expect("non-empty group");
            let md = pts.iter().map(|p| p.distance(c)).sum::<f64>() / pts.len() as f64;
            (c, md)
        });
        out.groups.insert(
            group.clone(),
            RawGroup {
                members: group,
                centroid,
                mean_distance,
                proportion: p,
            },
        );
    }
    Ok(out)
}

/// One row of the share table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupShare {
    pub members: Vec<UserId>,
    pub centroid: Position,
    pub mean_distance: f64,
    /// Raw proportion from the subset sweep.
    pub proportion: f64,
    /// Proportion after clamping and per-user rescaling. For a single user
    /// this is the share left over for individual clusters.
    pub scaled_proportion: f64,
    pub count: u32,
    pub cluster_ids: Vec<ClusterId>,
}

impl GroupShare {
    pub fn is_shared(&self) -> bool {
        self.members.len() > 1
    }

    pub fn contains(&self, user: UserId) -> bool {
        self.members.binary_search(&user).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentShares {
    pub segment: usize,
    /// Ordered by group size (largest first), then member list.
    pub groups: Vec<GroupShare>,
}

impl SegmentShares {
    pub fn groups_of(&self, user: UserId) -> impl Iterator<Item = &GroupShare> {
        self.groups.iter().filter(move |g| g.contains(user))
    }

    pub fn cluster_count_of(&self, user: UserId) -> u32 {
        self.groups_of(user).map(|g| g.count).sum()
    }

    /// Cluster ids owned by `user`, ascending.
    pub fn clusters_of(&self, user: UserId) -> Vec<ClusterId> {
        let mut ids: Vec<_> = self
            .groups_of(user)
            .flat_map(|g| g.cluster_ids.iter().copied())
            .collect();
        ids.sort_unstable();
        ids
    }

    pub fn next_cluster_id(&self) -> Option<ClusterId> {
        self.groups
            .iter()
            .flat_map(|g| g.cluster_ids.iter())
            .max()
            .map(|m| m + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShareTable {
    pub total_clusters_per_user: u32,
    pub segments: Vec<SegmentShares>,
}

/// Clamps, rescales and rounds raw proportions into cluster counts.
///
/// Cluster ids are handed out consecutively from `first_cluster_id`, larger
/// groups first.
pub fn normalize_and_count(
    raw: &RawProportions,
    total_clusters_per_user: u32,
    segment: usize,
    first_cluster_id: ClusterId,
) -> SegmentShares {
    let shared: Vec<(&RawGroup, f64)> = raw
        .groups
        .values()
        .filter(|g| g.members.len() > 1)
        .map(|g| (g, g.proportion.clamp(0.0, 1.0)))
        .filter(|(_, p)| *p > 0.0)
        .collect();

    let mut load: BTreeMap<UserId, f64> = BTreeMap::new();
    for (g, p) in &shared {
        for u in &g.members {
            *load.entry(*u).or_insert(0.0) += p;
        }
    }

    let mut groups: Vec<GroupShare> = shared
        .iter()
        .map(|(g, p)| {
            let worst = g.members.iter().map(|u| load[u]).fold(0.0, f64::max);
            let scaled = if worst > 1.0 { p / worst } else { *p };
            GroupShare {
                members: g.members.clone(),
                centroid: g.centroid,
                mean_distance: g.mean_distance,
                proportion: g.proportion,
                scaled_proportion: scaled,
                count: (scaled * total_clusters_per_user as f64).floor() as u32,
                cluster_ids: Vec::new(),
            }
        })
        .collect();

    for g in raw.groups.values().filter(|g| g.members.len() == 1) {
        let user = g.members[0];
        let (shared_count, shared_share) = groups
            .iter()
            .filter(|s| s.contains(user))
            .fold((0u32, 0.0), |(c, s), g| (c + g.count, s + g.scaled_proportion));
        let count = total_clusters_per_user
            .checked_sub(shared_count)
            .expect("scaled proportions of a user never exceed one");
        groups.push(GroupShare {
            members: g.members.clone(),
            centroid: g.centroid,
            mean_distance: 0.0,
            proportion: g.proportion,
            scaled_proportion: (1.0 - shared_share).max(0.0),
            count,
            cluster_ids: Vec::new(),
        });
    }

    groups.sort_by(|a, b| {
        b.members
            .len()
            .cmp(&a.members.len())
            .then_with(|| a.members.cmp(&b.members))
    });
    let mut next = first_cluster_id;
    for g in &mut groups {
        g.cluster_ids = (next..next + g.count).collect();
        next += g.count;
    }
    SegmentShares { segment, groups }
}

/// Share allocation for one segment of a layout.
pub fn plan_segment(
    layout: &UserLayout,
    segment: usize,
    total_clusters_per_user: u32,
    first_cluster_id: ClusterId,
) -> Result<SegmentShares> {
    let auras = layout.auras(segment)?;
    let radius = layout.stationarity_user_m();
    let positions: BTreeMap<UserId, Position> = auras.iter().map(|(u, a)| (*u, a.center)).collect();
    let components = connected_components(&build_overlap_graph(&auras));
    let parts = components
        .par_iter()
        .map(|c| compute_proportions(c, &positions, radius))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.context(format!("segment {segment}")))?;
    let mut raw = RawProportions::default();
    for p in parts {
        raw.merge(p);
    }
    Ok(normalize_and_count(
        &raw,
        total_clusters_per_user,
        segment,
        first_cluster_id,
    ))
}

/// Share allocation for every segment; cluster ids are unique across the run.
pub fn plan_shares(layout: &UserLayout, total_clusters_per_user: u32) -> Result<ShareTable> {
    let mut segments = Vec::with_capacity(layout.segments().len());
    let mut next = 0;
    for seg in layout.segments() {
        let shares = plan_segment(layout, seg.index, total_clusters_per_user, next)?;
        next = shares.next_cluster_id().unwrap_or(next);
        segments.push(shares);
    }
    Ok(ShareTable {
        total_clusters_per_user,
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aura(x: f64, y: f64, r: f64) -> Aura {
        Aura {
            center: Position::new(x, y, 1.5),
            radius_m: r,
        }
    }

    fn positions(pts: &[(UserId, f64, f64)]) -> BTreeMap<UserId, Position> {
        pts.iter().map(|&(u, x, y)| (u, Position::new(x, y, 1.5))).collect()
    }

    #[test]
    fn overlap_edges_strict() {
        let g = build_overlap_graph(&[(1, aura(0.0, 0.0, 2.0)), (2, aura(3.0, 0.0, 2.0))]);
        assert_eq!(g.edges, vec![(1, 2)]);
        let g = build_overlap_graph(&[(1, aura(0.0, 0.0, 2.0)), (2, aura(4.0, 0.0, 2.0))]);
        assert!(g.edges.is_empty());
        let g = build_overlap_graph(&[(1, aura(0.0, 0.0, 2.0))]);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn six_user_components() {
        let g = OverlapGraph {
            vertices: vec![1, 2, 3, 4, 5, 6],
            edges: vec![(1, 2), (2, 3)],
        };
        assert_eq!(connected_components(&g), vec![vec![1, 2, 3], vec![4], vec![5], vec![6]]);
        let g = OverlapGraph {
            vertices: vec![3, 1, 2],
            edges: vec![],
        };
        assert_eq!(connected_components(&g), vec![vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn two_users_one_radius_apart() {
        let raw = compute_proportions(&[1, 2], &positions(&[(1, 0.0, 0.0), (2, 2.0, 0.0)]), 2.0).unwrap();
        let pair = &raw.groups[&vec![1, 2]];
        assert!((pair.mean_distance - 1.0).abs() < 1e-12);
        assert!((pair.proportion - 0.5).abs() < 1e-12);
        assert!((pair.centroid.x - 1.0).abs() < 1e-12);
        assert!((raw.proportion(&[1]).unwrap() - 0.5).abs() < 1e-12);
        assert!((raw.proportion(&[2]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn coincident_pair_shares_everything() {
        let raw = compute_proportions(&[1, 2], &positions(&[(1, 1.0, 1.0), (2, 1.0, 1.0)]), 2.0).unwrap();
        assert_eq!(raw.proportion(&[1, 2]), Some(1.0));
        assert_eq!(raw.proportion(&[1]), Some(0.0));
    }

    #[test]
    fn coincident_triple_trace() {
        let raw = compute_proportions(
            &[1, 2, 3],
            &positions(&[(1, 0.0, 0.0), (2, 0.0, 0.0), (3, 0.0, 0.0)]),
            2.0,
        )
        .unwrap();
        assert_eq!(raw.proportion(&[1, 2, 3]), Some(1.0));
        for pair in [[1, 2], [1, 3], [2, 3]] {
            assert_eq!(raw.proportion(&pair), Some(0.5));
        }
        for u in 1..=3 {
            assert_eq!(raw.proportion(&[u]), Some(-1.0));
        }
    }

    #[test]
    fn pair_counts_with_total_seven() {
        let raw = compute_proportions(&[1, 2], &positions(&[(1, 0.0, 0.0), (2, 2.0, 0.0)]), 2.0).unwrap();
        let shares = normalize_and_count(&raw, 7, 0, 0);
        let pair = shares.groups.iter().find(|g| g.members == vec![1, 2]).unwrap();
        assert_eq!(pair.count, 3);
        assert_eq!(pair.cluster_ids, vec![0, 1, 2]);
        for u in [1, 2] {
            let single = shares.groups.iter().find(|g| g.members == vec![u]).unwrap();
            assert_eq!(single.count, 4);
            assert_eq!(shares.cluster_count_of(u), 7);
        }
    }

    #[test]
    fn triple_counts_with_total_seven() {
        let raw = compute_proportions(
            &[1, 2, 3],
            &positions(&[(1, 0.0, 0.0), (2, 0.0, 0.0), (3, 0.0, 0.0)]),
            2.0,
        )
        .unwrap();
        let shares = normalize_and_count(&raw, 7, 0, 0);
        let find = |m: &[UserId]| shares.groups.iter().find(|g| g.members == m).unwrap();
        assert_eq!(find(&[1, 2, 3]).scaled_proportion, 0.5);
        assert_eq!(find(&[1, 2, 3]).count, 3);
        for pair in [[1, 2], [1, 3], [2, 3]] {
            assert_eq!(find(&pair).scaled_proportion, 0.25);
            assert_eq!(find(&pair).count, 1);
        }
        for u in 1..=3 {
            assert_eq!(find(&[u]).count, 2);
            assert_eq!(shares.cluster_count_of(u), 7);
        }
    }

    #[test]
    fn isolated_user_keeps_all_clusters() {
        let raw = compute_proportions(&[4], &positions(&[(4, 0.0, 0.0)]), 2.0).unwrap();
        let shares = normalize_and_count(&raw, 7, 0, 10);
        assert_eq!(shares.groups.len(), 1);
        assert_eq!(shares.groups[0].count, 7);
        assert_eq!(shares.clusters_of(4), (10..17).collect::<Vec<_>>());
    }

    #[test]
    fn oversized_component_rejected() {
        let ids: Vec<UserId> = (0..21).collect();
        let pos = ids.iter().map(|&u| (u, Position::ORIGIN)).collect();
        assert!(matches!(
            compute_proportions(&ids, &pos, 1.0),
            Err(GscmError::ComponentTooLarge { size: 21, .. })
        ));
    }

    #[test]
    fn proportion_is_affine_in_mean_distance() {
        let r = 4.0;
        let p = |d: f64| {
            compute_proportions(&[1, 2], &positions(&[(1, 0.0, 0.0), (2, d, 0.0)]), r)
                .unwrap()
                .proportion(&[1, 2])
                .unwrap_or(0.0)
        };
        assert_eq!(p(0.0), 1.0);
        let mut last = 1.0;
        for k in 1..16 {
            let v = p(k as f64 * 0.5);
            assert!(v < last);
            last = v;
        }
        // md = R exactly at d = 2R, where the strict test shares nothing.
        assert_eq!(p(2.0 * r), 0.0);
    }
}
