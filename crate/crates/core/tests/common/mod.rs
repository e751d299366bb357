#![allow(dead_code)]

use std::path::PathBuf;

use gscm::config::{ArrayConfig, LayoutConfig, OutputConfig, OutputFormat, RunConfig, TerminalConfig, UserConfig};
use gscm::layout::{ArrayGeometry, Track, UserId, UserLayout};
use gscm::lsp::ScenarioConfig;
use gscm::sharing::{OwnerView, RecalcMode};
use gscm::Position;

pub const BS_HEIGHT: f64 = 10.0;
pub const USER_HEIGHT: f64 = 1.5;

/// Uniform linear array along y, centered above the origin.
pub fn ula(elements: usize, spacing: f64, bs_stationarity: f64) -> ArrayGeometry {
    ArrayGeometry::uniform_linear(
        elements,
        spacing,
        Position::new(0.0, 0.0, BS_HEIGHT),
        Position::new(0.0, 1.0, 0.0),
        bs_stationarity,
    )
    .unwrap()
}

/// Array with exactly `subarrays` sub-arrays of `per` elements each.
pub fn array_with_subarrays(subarrays: usize, per: usize) -> ArrayGeometry {
    let spacing = 0.05;
    ula(subarrays * per, spacing, per as f64 * spacing)
}

/// Users on straight tracks heading along +y from the given (x, y) starts.
pub fn layout(starts: &[(UserId, f64, f64)], radius: f64, snapshots: usize, array: ArrayGeometry) -> UserLayout {
    let tracks = starts
        .iter()
        .map(|&(u, x, y)| Track::linear(u, Position::new(x, y, USER_HEIGHT), 90.0, 0.25, snapshots).unwrap())
        .collect();
    UserLayout::new(tracks, radius, array).unwrap()
}

pub fn user_configs(starts: &[(UserId, f64, f64)], snapshots: usize) -> Vec<UserConfig> {
    starts
        .iter()
        .map(|&(id, x, y)| UserConfig {
            id,
            points_m: None,
            start_m: Some(Position::new(x, y, USER_HEIGHT)),
            heading_deg: Some(90.0),
            snapshots: Some(snapshots),
        })
        .collect()
}

/// A complete run configuration: ULA of `elements` at 3.5 GHz with
/// half-wavelength spacing, sub-arrays of `per_subarray` elements.
pub fn run_config(
    starts: &[(UserId, f64, f64)],
    radius: f64,
    snapshots: usize,
    elements: usize,
    per_subarray: usize,
    seed: u64,
) -> RunConfig {
    let scenario = ScenarioConfig::default();
    let spacing = gscm::SPEED_OF_LIGHT / scenario.carrier_hz / 2.0;
    RunConfig {
        seed,
        workers: 1,
        scenario,
        layout: LayoutConfig {
            stationarity_user_m: radius,
            snapshot_spacing_m: 0.25,
            users: user_configs(starts, snapshots),
        },
        array: ArrayConfig {
            bs_stationarity_m: per_subarray as f64 * spacing * (1.0 + 1e-6),
            element_positions_m: None,
            elements: Some(elements),
            spacing_m: Some(spacing),
            center_m: Some(Position::new(0.0, 0.0, BS_HEIGHT)),
            axis: Some(Position::new(0.0, 1.0, 0.0)),
        },
        terminal: TerminalConfig::default(),
        output: OutputConfig {
            dir: PathBuf::from("out"),
            format: OutputFormat::Binary,
        },
    }
}

/// A view whose transmitter-side focal points sit `range_m` from each
/// sub-array center along the given direction; the remaining fields only
/// need to be well formed.
pub fn view_with_fbs(array: &ArrayGeometry, azimuth_deg: f64, elevation_deg: f64, range_m: f64) -> OwnerView {
    let dir = Position::from_angles_deg(azimuth_deg, elevation_deg);
    let owner = Position::new(30.0, 0.0, USER_HEIGHT);
    OwnerView {
        user: 1,
        segment: 0,
        cluster_id: 0,
        generating_user: 1,
        recalc_mode: RecalcMode::Generator,
        owner_position: owner,
        generator_position: owner,
        delay: 1e-7,
        power: 1.0,
        aoa_az_deg: 0.0,
        aoa_el_deg: 0.0,
        departures: array.subarrays.iter().map(|_| (azimuth_deg, elevation_deg)).collect(),
        lbs: owner + Position::new(5.0, 0.0, 0.0),
        fbs: array.subarrays.iter().map(|sa| sa.center + dir * range_m).collect(),
        interior_length_m: 0.0,
        interior_clamped: false,
    }
}
