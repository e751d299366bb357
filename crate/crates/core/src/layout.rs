//! Users, tracks, segments, auras and the base-station array.
//!
//! All user tracks share one segment schedule: segment transitions happen at
//! the same snapshot index for every user. Each segment spans the user-side
//! stationarity interval, and a user's aura is re-centered only at the first
//! snapshot of a segment.
//!
//! The base-station array is cut into contiguous sub-arrays no longer than
//! the base-station stationarity interval; each sub-array later draws its own
//! departure angles.

use serde::{Deserialize, Serialize};

use crate::error::{GscmError, Result};
use crate::geometry::Position;

pub type UserId = u32;

const SPACING_TOL_M: f64 = 1e-9;

/// Snapshot positions of one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub user_id: UserId,
    pub points: Vec<Position>,
    pub snapshot_spacing: f64,
}

impl Track {
    pub fn new(user_id: UserId, points: Vec<Position>, snapshot_spacing: f64) -> Result<Self> {
        let track = Self {
            user_id,
            points,
            snapshot_spacing,
        };
        track.validate()?;
        Ok(track)
    }

    /// Straight track of `snapshots` points starting at `start`, heading
    /// `heading_deg` in the horizontal plane.
    pub fn linear(
        user_id: UserId,
        start: Position,
        heading_deg: f64,
        snapshot_spacing: f64,
        snapshots: usize,
    ) -> Result<Self> {
        let step = Position::from_angles_deg(heading_deg, 0.0) * snapshot_spacing;
        let points = (0..snapshots).map(|i| start + step * i as f64).collect();
        Self::new(user_id, points, snapshot_spacing)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| GscmError::InvalidTrack {
            user: self.user_id,
            reason,
        };
        if self.points.is_empty() {
            return Err(invalid("track has no points".into()));
        }
        if !self.snapshot_spacing.is_finite() || self.snapshot_spacing < 0.0 {
            return Err(invalid(format!(
                "snapshot spacing {} m is not a non-negative number",
                self.snapshot_spacing
            )));
        }
        if let Some(p) = self.points.iter().find(|p| !p.is_finite()) {
            return Err(invalid(format!("non-finite point {p:?}")));
        }
        for (i, w) in self.points.windows(2).enumerate() {
            let step = w[0].distance(w[1]);
            if (step - self.snapshot_spacing).abs() > SPACING_TOL_M {
                return Err(invalid(format!(
                    "points {i} and {} are {step} m apart, expected {} m",
                    i + 1,
                    self.snapshot_spacing
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One entry of the shared segment schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub index: usize,
    pub first_snapshot: usize,
    pub snapshot_count: usize,
    /// Nominal length, the user-side stationarity interval.
    pub length_m: f64,
}

impl Segment {
    pub fn snapshots(&self) -> std::ops::Range<usize> {
        self.first_snapshot..self.first_snapshot + self.snapshot_count
    }
}

/// Circle around a user's segment-start position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aura {
    pub center: Position,
    pub radius_m: f64,
}

impl Aura {
    /// Auras overlap when their centers are closer than the sum of the radii
    /// (strict), measured in the horizontal plane.
    pub fn overlaps(&self, other: &Aura) -> bool {
        self.center.distance_xy(other.center) < self.radius_m + other.radius_m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubArray {
    pub index: usize,
    pub element_range: std::ops::Range<usize>,
    pub center: Position,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub element_positions: Vec<Position>,
    pub subarrays: Vec<SubArray>,
    pub bs_stationarity_m: f64,
    element_subarray: Vec<usize>,
    reference: usize,
}

impl ArrayGeometry {
    pub fn new(element_positions: Vec<Position>, bs_stationarity_m: f64) -> Result<Self> {
        let subarrays = partition_subarrays(&element_positions, bs_stationarity_m)?;
        let mut element_subarray = vec![0; element_positions.len()];
        for sa in &subarrays {
            for i in sa.element_range.clone() {
                element_subarray[i] = sa.index;
            }
        }
        let centroid = Position::centroid(&element_positions).ok_or(GscmError::EmptyArray)?;
        let reference = subarrays
            .iter()
            .map(|sa| (sa.index, sa.center.distance(centroid)))
            .fold(
                (0, f64::INFINITY),
                |best, (i, d)| if d < best.1 { (i, d) } else { best },
            )
            .0;
        Ok(Self {
            element_positions,
            subarrays,
            bs_stationarity_m,
            element_subarray,
            reference,
        })
    }

    /// Uniform linear array centered at `center` along `axis`.
    pub fn uniform_linear(
        elements: usize,
        spacing_m: f64,
        center: Position,
        axis: Position,
        bs_stationarity_m: f64,
    ) -> Result<Self> {
        let axis = axis
            .normalized()
            .ok_or_else(|| GscmError::InvalidArray("array axis has zero length".into()))?;
        let half = (elements as f64 - 1.0) / 2.0;
        let positions = (0..elements)
            .map(|i| center + axis * ((i as f64 - half) * spacing_m))
            .collect();
        Self::new(positions, bs_stationarity_m)
    }

    pub fn element_count(&self) -> usize {
        self.element_positions.len()
    }

    /// Number of sub-arrays (A).
    pub fn subarray_count(&self) -> usize {
        self.subarrays.len()
    }

    pub fn subarray_of(&self, element: usize) -> usize {
        self.element_subarray[element]
    }

    /// Sub-array whose center is nearest to the array centroid.
    pub fn reference_subarray(&self) -> &SubArray {
        &self.subarrays[self.reference]
    }
}

/// Cuts an ordered element list into contiguous sub-arrays.
///
/// The element pitch is the mean spacing between consecutive elements; each
/// sub-array holds `floor(bs_stationarity_m / pitch)` elements (at least one),
/// and the last sub-array takes whatever remains.
pub fn partition_subarrays(elements: &[Position], bs_stationarity_m: f64) -> Result<Vec<SubArray>> {
    if elements.is_empty() {
        return Err(GscmError::EmptyArray);
    }
    if !(bs_stationarity_m > 0.0) {
        return Err(GscmError::InvalidArray(format!(
            "base-station stationarity interval must be positive, got {bs_stationarity_m}"
        )));
    }
    if let Some(p) = elements.iter().find(|p| !p.is_finite()) {
        return Err(GscmError::InvalidArray(format!("non-finite element position {p:?}")));
    }
    let n = elements.len();
    let pitch = if n > 1 {
        elements[0].distance(elements[n - 1]) / (n - 1) as f64
    } else {
        0.0
    };
    let per_subarray = if pitch > 0.0 {
        ((bs_stationarity_m / pitch + 1e-9).floor() as usize).clamp(1, n)
    } else {
        n
    };
    Ok((0..n)
        .step_by(per_subarray)
        .enumerate()
        .map(|(index, start)| {
            let range = start..(start + per_subarray).min(n);
            let center = Position::centroid(&elements[range.clone()]).expect("non-empty range");
            SubArray {
                index,
                element_range: range,
                center,
            }
        })
        .collect())
}

/// Builds the shared segment schedule.
pub fn build_segments(tracks: &[Track], stationarity_user_m: f64) -> Result<Vec<Segment>> {
    if !(stationarity_user_m > 0.0) || !stationarity_user_m.is_finite() {
        return Err(GscmError::Config(format!(
            "user stationarity interval must be positive, got {stationarity_user_m}"
        )));
    }
    let Some(first) = tracks.first() else {
        return Ok(Vec::new());
    };
    for t in &tracks[1..] {
        if t.len() != first.len() {
            return Err(GscmError::UnsynchronizedTracks {
                user: t.user_id,
                reason: format!(
                    "has {} snapshots while user {} has {}",
                    t.len(),
                    first.user_id,
                    first.len()
                ),
            });
        }
        if (t.snapshot_spacing - first.snapshot_spacing).abs() > SPACING_TOL_M {
            return Err(GscmError::UnsynchronizedTracks {
                user: t.user_id,
                reason: format!(
                    "has snapshot spacing {} m while user {} has {} m",
                    t.snapshot_spacing, first.user_id, first.snapshot_spacing
                ),
            });
        }
    }
    let total = first.len();
    let spacing = first.snapshot_spacing;
    let per_segment = if spacing > 0.0 {
        ((stationarity_user_m / spacing + 1e-9).floor() as usize).max(1)
    } else {
        total.max(1)
    };
    Ok((0..total)
        .step_by(per_segment)
        .enumerate()
        .map(|(index, first_snapshot)| Segment {
            index,
            first_snapshot,
            snapshot_count: per_segment.min(total - first_snapshot),
            length_m: stationarity_user_m,
        })
        .collect())
}

/// The full simulation layout. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct UserLayout {
    tracks: Vec<Track>,
    segments: Vec<Segment>,
    array: ArrayGeometry,
    stationarity_user_m: f64,
}

impl UserLayout {
    /// Tracks are stored sorted by user id, so insertion order never matters.
    pub fn new(mut tracks: Vec<Track>, stationarity_user_m: f64, array: ArrayGeometry) -> Result<Self> {
        for t in &tracks {
            t.validate()?;
        }
        tracks.sort_by_key(|t| t.user_id);
        if let Some(w) = tracks.windows(2).find(|w| w[0].user_id == w[1].user_id) {
            return Err(GscmError::DuplicateUser(w[0].user_id));
        }
        let segments = build_segments(&tracks, stationarity_user_m)?;
        Ok(Self {
            tracks,
            segments,
            array,
            stationarity_user_m,
        })
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.tracks.iter().map(|t| t.user_id)
    }

    pub fn user_count(&self) -> usize {
        self.tracks.len()
    }

    /// Position of `user` in `self.tracks()` order.
    pub fn user_index(&self, user: UserId) -> Result<usize> {
        self.tracks
            .binary_search_by_key(&user, |t| t.user_id)
            .map_err(|_| GscmError::UnknownUser(user))
    }

    pub fn track(&self, user: UserId) -> Result<&Track> {
        Ok(&self.tracks[self.user_index(user)?])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, index: usize) -> Result<&Segment> {
        self.segments.get(index).ok_or(GscmError::UnknownSegment(index))
    }

    pub fn array(&self) -> &ArrayGeometry {
        &self.array
    }

    pub fn stationarity_user_m(&self) -> f64 {
        self.stationarity_user_m
    }

    pub fn snapshot_count(&self) -> usize {
        self.tracks.first().map_or(0, Track::len)
    }

    /// First position of `user` in segment `segment`.
    pub fn segment_start(&self, user: UserId, segment: usize) -> Result<Position> {
        let seg = self.segment(segment)?;
        Ok(self.track(user)?.points[seg.first_snapshot])
    }

    pub fn aura_of(&self, user: UserId, segment: usize) -> Result<Aura> {
        let seg = self.segment(segment)?;
        let track = self.track(user)?;
        Ok(Aura {
            center: track.points[seg.first_snapshot],
            radius_m: self.stationarity_user_m,
        })
    }

    /// Aura of the segment containing `snapshot`.
    pub fn aura_at_snapshot(&self, user: UserId, snapshot: usize) -> Result<Aura> {
        let seg = self
            .segments
            .iter()
            .find(|s| s.snapshots().contains(&snapshot))
            .ok_or(GscmError::UnknownSegment(snapshot))?;
        self.aura_of(user, seg.index)
    }

    /// All users' auras for one segment, ordered by user id.
    pub fn auras(&self, segment: usize) -> Result<Vec<(UserId, Aura)>> {
        self.users().map(|u| Ok((u, self.aura_of(u, segment)?))).collect()
    }
}
