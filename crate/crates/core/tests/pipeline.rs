mod common;

use gscm::clustergen::{assemble_clusters, pick_generating_user};
use gscm::grouping::{plan_shares, GroupShare};
use gscm::lsp::{draw_lsp, ScenarioConfig};
use gscm::pipeline::{self, RunOutput};
use gscm::sharing::{choose_recalc_mode, recalc_kept_focal_point, recalc_kept_parameters, OwnerView, RecalcMode};
use gscm::spherical::total_path_length;
use gscm::Position;

fn moving_run(seed: u64) -> RunOutput {
    let config = common::run_config(&[(1, 0.0, 30.0), (2, 3.0, 30.0), (3, 40.0, 20.0)], 5.0, 60, 16, 4, seed);
    pipeline::run(&config).unwrap()
}

#[test]
fn smoke_two_users_one_segment() {
    let config = common::run_config(&[(1, -30.0, 20.0), (2, 30.0, 20.0)], 5.0, 4, 4, 4, 3);
    let out = pipeline::run(&config).unwrap();
    assert_eq!(out.layout.segments().len(), 1);
    assert_eq!(out.layout.array().subarray_count(), 1);
    assert_eq!(out.tensor.dims(), [2, 1, 4, 7, 4]);
    assert_eq!(out.clusters.len(), 14);
    assert!(out.tensor.is_finite());
    assert!(out.tensor.delays.iter().all(|&d| d >= 0.0));
}

#[test]
fn runs_are_deterministic() {
    let a = moving_run(11);
    let b = moving_run(11);
    assert_eq!(a.shares, b.shares);
    assert_eq!(a.clusters, b.clusters);
    assert_eq!(a.views, b.views);
    assert_eq!(a.tensor, b.tensor);
    assert_ne!(a.tensor, moving_run(12).tensor);
}

#[test]
fn cluster_lists_are_complete_and_normalized() {
    let out = moving_run(5);
    assert!(out.layout.segments().len() >= 3);
    for seg in out.layout.segments() {
        for user in out.layout.users() {
            let list = out.clusters.user_clusters(user, seg.index);
            assert_eq!(list.len(), 7);
            let total: f64 = list.iter().map(|(_, w)| w).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
    let ids: Vec<_> = out.clusters.clusters().map(|c| c.id).collect();
    assert_eq!(ids, (0..ids.len() as u32).collect::<Vec<_>>());
}

#[test]
fn parameter_counts_follow_subarray_count() {
    for subarrays in [1usize, 2, 4, 8] {
        let config = common::run_config(&[(1, 0.0, 30.0), (2, 2.0, 30.0)], 5.0, 4, 4 * subarrays, 4, 9);
        let layout = config.build_layout().unwrap();
        assert_eq!(layout.array().subarray_count(), subarrays);
        let shares = plan_shares(&layout, 7).unwrap();
        let lsp = draw_lsp(&config.scenario, &layout, config.seed).unwrap();
        let pre = assemble_clusters(&shares, &lsp, &layout, &config.scenario, config.seed).unwrap();
        for c in pre.clusters() {
            assert_eq!(c.parameter_table().len(), 4 + 2 * subarrays);
        }
        let out = pipeline::run(&config).unwrap();
        for c in out.clusters.clusters() {
            assert_eq!(c.parameter_table().len(), 5 + 3 * subarrays);
        }
    }
}

#[test]
fn shared_cluster_is_one_object() {
    let config = common::run_config(&[(1, 0.0, 30.0), (2, 1.0, 30.0)], 5.0, 4, 4, 4, 2);
    let layout = config.build_layout().unwrap();
    let shares = plan_shares(&layout, 7).unwrap();
    let lsp = draw_lsp(&config.scenario, &layout, config.seed).unwrap();
    let mut clusters = assemble_clusters(&shares, &lsp, &layout, &config.scenario, config.seed).unwrap();
    let shared = clusters.clusters().find(|c| c.owners.len() == 2).map(|c| c.id).unwrap();
    clusters.cluster_mut(shared).unwrap().aoa_az_deg = 12.5;
    for user in [1, 2] {
        let list = clusters.user_clusters(user, 0);
        let (c, _) = list.iter().find(|(c, _)| c.id == shared).unwrap();
        assert_eq!(c.aoa_az_deg, 12.5);
    }
}

#[test]
fn generating_user_is_uniform_within_group() {
    let group = GroupShare {
        members: vec![4, 9],
        centroid: Position::ORIGIN,
        mean_distance: 1.0,
        proportion: 0.5,
        scaled_proportion: 0.5,
        count: 3,
        cluster_ids: vec![0, 1, 2],
    };
    let n = 10_000;
    let first = (0..n)
        .filter(|&seed| pick_generating_user(&group, 0, seed) == 4)
        .count() as f64;
    let expected = n as f64 / 2.0;
    let chi2 = 2.0 * (first - expected).powi(2) / expected;
    // 1 degree of freedom, 1% level.
    assert!(chi2 < 6.635, "chi2 = {chi2}");

    let single = GroupShare {
        members: vec![7],
        ..group
    };
    assert!((0..100).all(|seed| pick_generating_user(&single, 3, seed) == 7));
}

#[test]
fn every_subarray_focal_point_closes_its_path() {
    let out = moving_run(8);
    let array = out.layout.array();
    for c in out.clusters.clusters() {
        let user = out.layout.segment_start(c.generating_user, c.segment).unwrap();
        for (sa, dep) in array.subarrays.iter().zip(&c.departures) {
            let d_c = total_path_length(c.delay, sa.center, user);
            let fbs = dep.fbs.unwrap();
            let err = (sa.center.distance(fbs) + fbs.distance(user) - d_c).abs() / d_c;
            assert!(err <= 1e-9, "cluster {} sub-array {}: {err}", c.id, sa.index);
        }
        let reference = array.reference_subarray().center;
        let d_ref = total_path_length(c.delay, reference, user);
        let lbs = c.lbs.unwrap();
        assert!((user.distance(lbs) + lbs.distance(reference) - d_ref).abs() / d_ref <= 1e-9);
    }
}

#[test]
fn owner_views_cover_every_list_entry() {
    let out = moving_run(4);
    let users = out.layout.user_count();
    let segments = out.layout.segments().len();
    assert_eq!(out.views.len(), users * segments * 7);
    for seg in out.layout.segments() {
        for user in out.layout.users() {
            assert_eq!(out.views.get(user, seg.index).unwrap().len(), 7);
        }
    }
    for v in out.views.iter() {
        let cluster = out.clusters.cluster(v.cluster_id).unwrap();
        assert!(cluster.owners.contains(&v.user));
        match v.recalc_mode {
            RecalcMode::Generator => {
                assert_eq!(v.user, cluster.generating_user);
                assert_eq!(v.delay, cluster.delay);
                assert_eq!(Some(v.lbs), cluster.lbs);
            }
            RecalcMode::KeptParameters => {
                assert_eq!(v.delay, cluster.delay);
                assert_eq!((v.aoa_az_deg, v.aoa_el_deg), (cluster.aoa_az_deg, cluster.aoa_el_deg));
                let deps: Vec<_> = cluster
                    .departures
                    .iter()
                    .map(|d| (d.azimuth_deg, d.elevation_deg))
                    .collect();
                assert_eq!(v.departures, deps);
            }
            RecalcMode::KeptFocalPoint => {
                assert_eq!(Some(v.lbs), cluster.lbs);
                let fbs: Vec<_> = cluster.departures.iter().map(|d| d.fbs.unwrap()).collect();
                assert_eq!(v.fbs, fbs);
                assert_eq!(Some(v.interior_length_m), cluster.interior_length_m);
            }
            RecalcMode::Duplicate => panic!("view left unrecalculated"),
        }
    }
}

#[test]
fn recalculated_views_close_their_paths() {
    let mut checked = 0;
    for seed in 0..10 {
        let out = moving_run(seed);
        let array = out.layout.array();
        for v in out.views.iter().filter(|v| !v.interior_clamped && v.delay > 0.0) {
            let err = v.path_closure_error(array);
            assert!(
                err <= 1e-9,
                "{:?} view of cluster {}: {err}",
                v.recalc_mode,
                v.cluster_id
            );
            checked += 1;
        }
    }
    assert!(checked > 0);
}

fn generator_views(out: &RunOutput) -> Vec<OwnerView> {
    out.views
        .iter()
        .filter(|v| v.recalc_mode == RecalcMode::Generator && !v.interior_clamped)
        .cloned()
        .collect()
}

fn as_duplicate(view: &OwnerView, owner: Position) -> OwnerView {
    OwnerView {
        recalc_mode: RecalcMode::Duplicate,
        owner_position: owner,
        ..view.clone()
    }
}

#[test]
fn co_located_owner_is_a_fixed_point() {
    let out = moving_run(6);
    let array = out.layout.array();
    for g in generator_views(&out) {
        let dup = as_duplicate(&g, g.generator_position);
        let kp = recalc_kept_parameters(&dup, array).unwrap();
        assert_eq!(
            OwnerView {
                recalc_mode: RecalcMode::Generator,
                ..kp
            },
            g
        );
        let kf = recalc_kept_focal_point(&dup, array);
        assert_eq!(
            OwnerView {
                recalc_mode: RecalcMode::Generator,
                ..kf
            },
            g
        );
    }
}

#[test]
fn owner_moving_toward_lbs_sees_shorter_delay() {
    let out = moving_run(7);
    let array = out.layout.array();
    let mut checked = 0;
    for g in generator_views(&out) {
        let toward = (g.lbs - g.generator_position).normalized().unwrap();
        let owner = g.generator_position + toward * 0.5;
        let view = recalc_kept_focal_point(&as_duplicate(&g, owner), array);
        assert!(
            view.delay < g.delay,
            "cluster {}: {} !< {}",
            g.cluster_id,
            view.delay,
            g.delay
        );
        let d = g.lbs - owner;
        let az = d.y.atan2(d.x).to_degrees();
        assert!((view.aoa_az_deg - az).abs() < 1e-9);
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn recalc_mode_threshold_at_three_segments() {
    let owner = Position::new(1.0, 2.0, 1.5);
    let seg = 5.0;
    let at = |r: f64| choose_recalc_mode(owner + Position::new(r, 0.0, 0.0), owner, seg);
    assert_eq!(at(5.0), RecalcMode::KeptFocalPoint);
    assert_eq!(at(14.999), RecalcMode::KeptFocalPoint);
    assert_eq!(at(15.0), RecalcMode::KeptParameters);
    assert_eq!(at(20.0), RecalcMode::KeptParameters);
}

#[test]
fn co_located_users_share_everything() {
    let config = common::run_config(&[(1, 5.0, 30.0), (2, 5.0, 30.0)], 5.0, 8, 8, 4, 1);
    let out = pipeline::run(&config).unwrap();
    for seg in &out.shares.segments {
        assert_eq!(seg.groups[0].members, vec![1, 2]);
        assert_eq!(seg.groups[0].count, 7);
        assert!(seg.groups[1..].iter().all(|g| g.count == 0));
    }
}

#[test]
fn scenario_defaults_validate() {
    ScenarioConfig::default().validate().unwrap();
    let bad = ScenarioConfig {
        clusters_per_user: 0,
        ..ScenarioConfig::default()
    };
    assert!(bad.validate().is_err());
}
