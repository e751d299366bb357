//! Focal points of clusters on both link ends.
//!
//! A cluster with excess delay `tau` and total path length
//! `d_c = tau * c0 + |r0|` is seen from an anchor point (a sub-array center
//! for the transmitter side, the user for the receiver side) along a unit
//! direction `ê`. The focal point sits at distance `e` along `ê` such that
//! the path anchor -> focal point -> far end has length `d_c`:
//!
//! ```text
//! e + |e ê - r0| = d_c,   r0 = far end - anchor
//! e = (d_c² - |r0|²) / (2 (d_c - r0ᵀê))
//! ```
//!
//! The denominator is at least `d_c - |r0|`, so any geometry with positive
//! excess path has a unique positive solution.

use log::warn;
use rayon::prelude::*;

use crate::clustergen::{redraw_arrival, redraw_departure, Cluster, ClusterSet};
use crate::error::{GscmError, Result};
use crate::geometry::{Position, SPEED_OF_LIGHT};
use crate::layout::UserLayout;
use crate::rng::{self, stream};

/// Tolerance on excess path and denominator, meters.
pub const GEOMETRY_EPS_M: f64 = 1e-9;

/// Angle redraws allowed before a degenerate geometry is a hard error.
pub const MAX_REDRAWS: usize = 16;

/// Solved triangle anchor / far end / focal point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalGeometry {
    pub anchor: Position,
    /// Anchor to far end.
    pub r0: Position,
    pub d_c: f64,
    pub e_hat: Position,
    pub e_len: f64,
    /// Angle at the anchor between `r0` and `e_hat`, radians.
    pub beta: f64,
    /// Far end to focal point.
    pub f_vec: Position,
}

impl FocalGeometry {
    pub fn solve(anchor: Position, far_end: Position, direction: Position, d_c: f64) -> Result<Self> {
        let e_hat = direction
            .normalized()
            .ok_or_else(|| GscmError::DegenerateGeometry("zero direction vector".into()))?;
        let r0 = far_end - anchor;
        let r0_len = r0.norm();
        if !(d_c > r0_len + GEOMETRY_EPS_M) {
            return Err(GscmError::DegenerateGeometry(format!(
                "path length {d_c} m leaves no excess over the direct distance {r0_len} m"
            )));
        }
        let denominator = d_c - r0.dot(e_hat);
        if !(denominator > GEOMETRY_EPS_M) {
            return Err(GscmError::DegenerateGeometry(format!(
                "direction is inconsistent with path length (denominator {denominator})"
            )));
        }
        let e_len = (d_c - r0_len) * (d_c + r0_len) / (2.0 * denominator);
        let beta = if r0_len > 0.0 {
            (r0.dot(e_hat) / r0_len).clamp(-1.0, 1.0).acos()
        } else {
            0.0
        };
        Ok(Self {
            anchor,
            r0,
            d_c,
            e_hat,
            e_len,
            beta,
            f_vec: e_hat * e_len - r0,
        })
    }

    pub fn focal_point(&self) -> Position {
        self.e_hat * self.e_len + self.anchor
    }

    /// `e + |focal point - far end| - d_c`; zero for an exact solution.
    pub fn closure_error(&self) -> f64 {
        self.e_len + self.f_vec.norm() - self.d_c
    }
}

/// `tau * c0 + |user - apos|`.
pub fn total_path_length(tau: f64, apos: Position, user_pos: Position) -> f64 {
    tau * SPEED_OF_LIGHT + user_pos.distance(apos)
}

/// Transmitter-side focal point seen from the sub-array center `apos`.
pub fn fbs_focal_point(apos: Position, user_pos: Position, e_hat: Position, d_c: f64) -> Result<Position> {
    Ok(FocalGeometry::solve(apos, user_pos, e_hat, d_c)?.focal_point())
}

/// Receiver-side focal point seen from the user; the mirror of
/// [`fbs_focal_point`] with the link ends swapped.
pub fn lbs_focal_point(user_pos: Position, apos: Position, g_hat: Position, d_c: f64) -> Result<Position> {
    Ok(FocalGeometry::solve(user_pos, apos, g_hat, d_c)?.focal_point())
}

/// Focal points of one cluster, with angle redraws on degenerate geometry.
fn attach_one(cluster: &mut Cluster, layout: &UserLayout, seed: u64) -> Result<usize> {
    let user_pos = layout.segment_start(cluster.generating_user, cluster.segment)?;
    let array = layout.array();
    let reference = array.reference_subarray();
    let mut retry_rng = rng::keyed(seed, &[stream::FOCAL_RETRY, cluster.segment as u64, cluster.id as u64]);
    let mut redraws = 0;

    let d_ref = total_path_length(cluster.delay, reference.center, user_pos);
    let lbs = loop {
        let g_hat = Position::from_angles_deg(cluster.aoa_az_deg, cluster.aoa_el_deg);
        match FocalGeometry::solve(user_pos, reference.center, g_hat, d_ref) {
            Ok(g) => break g,
            Err(e) if redraws < MAX_REDRAWS => {
                log::debug!("cluster {}: {e}; redrawing arrival angle", cluster.id);
                (cluster.aoa_az_deg, cluster.aoa_el_deg) =
                    redraw_arrival(cluster, user_pos, reference.center, &mut retry_rng);
                redraws += 1;
            }
            Err(e) => return Err(e),
        }
    };

    let mut e_len_ref = 0.0;
    for sa in &array.subarrays {
        let d_c = total_path_length(cluster.delay, sa.center, user_pos);
        let mut tries = 0;
        let fbs = loop {
            let dep = cluster.departures[sa.index];
            let e_hat = Position::from_angles_deg(dep.azimuth_deg, dep.elevation_deg);
            match FocalGeometry::solve(sa.center, user_pos, e_hat, d_c) {
                Ok(g) => break g,
                Err(e) if tries < MAX_REDRAWS => {
                    log::debug!(
                        "cluster {} sub-array {}: {e}; redrawing departure angle",
                        cluster.id,
                        sa.index
                    );
                    let (az, el) = redraw_departure(cluster, sa.center, user_pos, &mut retry_rng);
                    cluster.departures[sa.index].azimuth_deg = az;
                    cluster.departures[sa.index].elevation_deg = el;
                    tries += 1;
                }
                Err(e) => return Err(e),
            }
        };
        if sa.index == reference.index {
            e_len_ref = fbs.e_len;
        }
        cluster.departures[sa.index].fbs = Some(fbs.focal_point());
    }

    let (interior, clamped) = interior_length(d_ref, e_len_ref, lbs.e_len);
    cluster.lbs = Some(lbs.focal_point());
    cluster.interior_length_m = Some(interior);
    cluster.interior_clamped = clamped;
    Ok(redraws)
}

/// Interior path length between the focal points, floored at zero.
/// Returns the value and whether the floor was applied.
pub fn interior_length(d_c_ref: f64, e_len_ref: f64, g_len: f64) -> (f64, bool) {
    let interior = d_c_ref - e_len_ref - g_len;
    (interior.max(0.0), interior < 0.0)
}

/// Adds the receiver-side focal point and one transmitter-side focal point
/// per sub-array to every cluster.
pub fn attach_focal_points(clusters: &mut ClusterSet, layout: &UserLayout, seed: u64) -> Result<()> {
    let mut all: Vec<&mut Cluster> = clusters.clusters_mut().collect();
    all.par_iter_mut()
        .map(|c| {
            attach_one(c, layout, seed)
                .map(|_| ())
                .map_err(|e| e.context(format!("segment {}, cluster {}", c.segment, c.id)))
        })
        .collect::<Result<Vec<()>>>()?;
    let clamped = clusters.clusters().filter(|c| c.interior_clamped).count();
    if clamped > 0 {
        warn!(
            "{clamped} of {} clusters have overlapping focal-point distances; interior length clamped to 0",
            clusters.len()
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const C0: f64 = SPEED_OF_LIGHT;

    #[test]
    fn path_length_arithmetic() {
        let apos = Position::ORIGIN;
        let user = Position::new(10.0, 0.0, 0.0);
        assert_eq!(total_path_length(0.0, apos, user), 10.0);
        assert!((total_path_length(50e-9, apos, user) - (10.0 + 50e-9 * C0)).abs() < 1e-12);
        assert!((total_path_length(50e-9, apos, user) - 24.989_623).abs() < 1e-6);
        assert!((total_path_length(100e-9, apos, apos) - 29.979_245_8).abs() < 1e-9);
    }

    #[test]
    fn fbs_on_axis() {
        let g = FocalGeometry::solve(
            Position::ORIGIN,
            Position::new(10.0, 0.0, 0.0),
            Position::new(1.0, 0.0, 0.0),
            20.0,
        )
        .unwrap();
        assert_eq!(g.e_len, 15.0);
        assert_eq!(g.focal_point(), Position::new(15.0, 0.0, 0.0));
        assert_eq!(g.e_len + g.f_vec.norm(), 20.0);
    }

    #[test]
    fn fbs_off_axis() {
        let p = fbs_focal_point(
            Position::ORIGIN,
            Position::new(10.0, 0.0, 0.0),
            Position::new(0.0, 1.0, 0.0),
            20.0,
        )
        .unwrap();
        assert_eq!(p, Position::new(0.0, 7.5, 0.0));
        assert_eq!(p.distance(Position::new(10.0, 0.0, 0.0)), 12.5);
    }

    #[test]
    fn zero_excess_is_degenerate() {
        let user = Position::new(10.0, 0.0, 0.0);
        let d = total_path_length(0.0, Position::ORIGIN, user);
        assert!(matches!(
            fbs_focal_point(Position::ORIGIN, user, Position::new(0.0, 1.0, 0.0), d),
            Err(GscmError::DegenerateGeometry(_))
        ));
        assert!(matches!(
            lbs_focal_point(user, Position::ORIGIN, Position::new(0.0, 1.0, 0.0), d),
            Err(GscmError::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn lbs_mirrors_fbs() {
        let user = Position::new(10.0, 0.0, 0.0);
        let p = lbs_focal_point(user, Position::ORIGIN, Position::new(-1.0, 0.0, 0.0), 20.0).unwrap();
        assert_eq!(p, Position::new(-5.0, 0.0, 0.0));
        let q = lbs_focal_point(user, Position::ORIGIN, Position::new(0.0, 0.0, 1.0), 20.0).unwrap();
        assert_eq!(q, Position::new(10.0, 0.0, 7.5));
        assert_eq!(q.distance(Position::ORIGIN) + 7.5, 20.0);
    }

    #[test]
    fn beta_and_direction() {
        let g = FocalGeometry::solve(
            Position::ORIGIN,
            Position::new(10.0, 0.0, 0.0),
            Position::new(0.0, 2.0, 0.0),
            20.0,
        )
        .unwrap();
        assert!((g.beta - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(g.e_hat, Position::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn interior_length_floor() {
        assert_eq!(interior_length(20.0, 5.0, 6.0), (9.0, false));
        assert_eq!(interior_length(20.0, 15.0, 15.0), (0.0, true));
    }
}
