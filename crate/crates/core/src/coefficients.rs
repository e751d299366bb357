//! Channel coefficient synthesis with spherical wavefronts.
//!
//! Every cluster is expanded into 20 scatterers whose azimuths deviate from
//! the cluster direction by fixed Laplacian offsets, independently coupled at
//! the transmitter and receiver sides. A scatterer sits at the focal-point
//! range along its perturbed direction. The path of scatterer `l` from
//! transmit element `i` to the receiver at snapshot `t` is
//!
//! ```text
//! L = |tx_i - S_dep(a(i), l)| + D_int + |S_arr(l) - rx(t)|
//! ```
//!
//! where `a(i)` is the element's sub-array, so each sub-array sees its own
//! transmitter-side scatterers. The scatterer positions stay fixed for the
//! whole segment while the receiver moves, which produces the drift of
//! delays and phases between snapshots.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{GscmError, Result};
use crate::geometry::{Position, SPEED_OF_LIGHT};
use crate::layout::{ArrayGeometry, UserId, UserLayout};
use crate::rng::{self, stream};
use crate::sharing::{OwnerView, OwnerViews};

pub const SCATTERERS_PER_CLUSTER: usize = 20;

/// Zero-mean Laplacian evaluated at the centers of 20 equal-probability
/// bins, scaled to unit RMS. Symmetric by construction.
pub fn laplacian_offsets() -> [f64; SCATTERERS_PER_CLUSTER] {
    let n = SCATTERERS_PER_CLUSTER;
    let mut out = [0.0; SCATTERERS_PER_CLUSTER];
    for k in 0..n / 2 {
        let q = (k as f64 + 0.5) / n as f64;
        let x = (2.0 * q).ln();
        out[k] = x;
        out[n - 1 - k] = -x;
    }
    let rms = (out.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    out.map(|x| x / rms)
}

/// Angular offsets and initial phases of the scatterers of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ScattererSet {
    pub arrival_offsets_deg: Vec<f64>,
    pub departure_offsets_deg: Vec<f64>,
    pub phases: Vec<f64>,
}

impl ScattererSet {
    /// Offsets scaled by the intra-cluster spreads; the departure offsets are
    /// a random permutation of the arrival ones, and phases are uniform.
    pub fn for_cluster(seed: u64, segment: usize, cluster: u32, aoa_spread_deg: f64, aod_spread_deg: f64) -> Self {
        let base = laplacian_offsets();
        let mut rng = rng::keyed(seed, &[stream::SCATTERERS, segment as u64, cluster as u64]);
        let mut order: Vec<usize> = (0..base.len()).collect();
        order.shuffle(&mut rng);
        let phases = (0..base.len())
            .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        Self {
            arrival_offsets_deg: base.iter().map(|x| x * aoa_spread_deg).collect(),
            departure_offsets_deg: order.iter().map(|&i| base[i] * aod_spread_deg).collect(),
            phases,
        }
    }

    /// One scatterer at the focal points with zero phase.
    pub fn single() -> Self {
        Self {
            arrival_offsets_deg: vec![0.0],
            departure_offsets_deg: vec![0.0],
            phases: vec![0.0],
        }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

/// Receive antenna offsets relative to the track position.
#[derive(Debug, Clone, PartialEq)]
pub struct Terminal {
    pub element_offsets: Vec<Position>,
}

impl Default for Terminal {
    fn default() -> Self {
        Self {
            element_offsets: vec![Position::ORIGIN],
        }
    }
}

impl Terminal {
    /// Linear array along y centered on the track position.
    pub fn linear(elements: usize, spacing_m: f64) -> Self {
        let half = (elements as f64 - 1.0) / 2.0;
        Self {
            element_offsets: (0..elements)
                .map(|i| Position::new(0.0, (i as f64 - half) * spacing_m, 0.0))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisParams {
    pub carrier_hz: f64,
    pub seed: u64,
    pub cluster_aoa_spread_deg: f64,
    pub cluster_aod_spread_deg: f64,
    pub terminal: Terminal,
    /// Collapse every cluster to a single scatterer at its focal points.
    pub single_scatterer: bool,
}

impl SynthesisParams {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }
}

/// Complex coefficients indexed `[user, rx, tx, cluster, snapshot]` and
/// delays indexed `[user, cluster, snapshot]`. Users are ordered by id.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    pub users: Vec<UserId>,
    pub rx: usize,
    pub tx: usize,
    pub clusters: usize,
    pub snapshots: usize,
    pub carrier_hz: f64,
    pub seed: u64,
    pub coefficients: Vec<Complex64>,
    pub delays: Vec<f64>,
}

impl ChannelTensor {
    pub fn zeros(
        users: Vec<UserId>,
        rx: usize,
        tx: usize,
        clusters: usize,
        snapshots: usize,
        carrier_hz: f64,
        seed: u64,
    ) -> Self {
        let n = users.len();
        Self {
            coefficients: vec![Complex64::new(0.0, 0.0); n * rx * tx * clusters * snapshots],
            delays: vec![0.0; n * clusters * snapshots],
            users,
            rx,
            tx,
            clusters,
            snapshots,
            carrier_hz,
            seed,
        }
    }

    pub fn dims(&self) -> [usize; 5] {
        [self.users.len(), self.rx, self.tx, self.clusters, self.snapshots]
    }

    pub fn index(&self, user: usize, rx: usize, tx: usize, cluster: usize, snapshot: usize) -> usize {
        (((user * self.rx + rx) * self.tx + tx) * self.clusters + cluster) * self.snapshots + snapshot
    }

    pub fn delay_index(&self, user: usize, cluster: usize, snapshot: usize) -> usize {
        (user * self.clusters + cluster) * self.snapshots + snapshot
    }

    pub fn coefficient(&self, user: usize, rx: usize, tx: usize, cluster: usize, snapshot: usize) -> Complex64 {
        self.coefficients[self.index(user, rx, tx, cluster, snapshot)]
    }

    pub fn delay(&self, user: usize, cluster: usize, snapshot: usize) -> f64 {
        self.delays[self.delay_index(user, cluster, snapshot)]
    }

    /// Channel of one user at one snapshot, stacked over (rx, tx, cluster).
    pub fn row(&self, user: usize, snapshot: usize) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.rx * self.tx * self.clusters);
        for j in 0..self.rx {
            for i in 0..self.tx {
                for c in 0..self.clusters {
                    out.push(self.coefficient(user, j, i, c, snapshot));
                }
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.coefficients.iter().all(|c| c.re.is_finite() && c.im.is_finite())
            && self.delays.iter().all(|d| d.is_finite())
    }
}

/// Scatterer positions of one owner view, frozen for the segment.
struct ViewPaths {
    power: f64,
    /// `[scatterer][tx element]`: transmitter-side length plus interior length.
    tx_len: Vec<Vec<f64>>,
    arrival: Vec<Position>,
    phases: Vec<f64>,
}

impl ViewPaths {
    fn new(view: &OwnerView, array: &ArrayGeometry, scatterers: &ScattererSet) -> Self {
        let g_len = view.lbs.distance(view.owner_position);
        let arrival = scatterers
            .arrival_offsets_deg
            .iter()
            .map(|d| {
                if *d == 0.0 {
                    view.lbs
                } else {
                    view.owner_position + Position::from_angles_deg(view.aoa_az_deg + d, view.aoa_el_deg) * g_len
                }
            })
            .collect();
        let departure: Vec<Vec<Position>> = scatterers
            .departure_offsets_deg
            .iter()
            .map(|d| {
                array
                    .subarrays
                    .iter()
                    .map(|sa| {
                        let fbs = view.fbs[sa.index];
                        if *d == 0.0 {
                            fbs
                        } else {
                            let (az, el) = view.departures[sa.index];
                            sa.center + Position::from_angles_deg(az + d, el) * fbs.distance(sa.center)
                        }
                    })
                    .collect()
            })
            .collect();
        let tx_len = departure
            .iter()
            .map(|per_sa| {
                array
                    .element_positions
                    .iter()
                    .enumerate()
                    .map(|(i, tx)| tx.distance(per_sa[array.subarray_of(i)]) + view.interior_length_m)
                    .collect()
            })
            .collect();
        Self {
            power: view.power,
            tx_len,
            arrival,
            phases: scatterers.phases.clone(),
        }
    }

    fn coefficient(&self, tx: usize, rx: Position, wavenumber: f64) -> Complex64 {
        let amplitude = (self.power / self.phases.len() as f64).sqrt();
        self.phases
            .iter()
            .enumerate()
            .map(|(l, phi)| {
                let length = self.tx_len[l][tx] + self.arrival[l].distance(rx);
                Complex64::from_polar(amplitude, phi - wavenumber * length)
            })
            .sum()
    }
}

/// Synthesizes the channel tensor of all users over all snapshots.
pub fn synthesize(
    views: &OwnerViews,
    layout: &UserLayout,
    params: &SynthesisParams,
    clusters_per_user: usize,
) -> Result<ChannelTensor> {
    let array = layout.array();
    let users: Vec<UserId> = layout.users().collect();
    let rx = params.terminal.element_offsets.len();
    let tx = array.element_count();
    let k = clusters_per_user;
    let wavenumber = 2.0 * std::f64::consts::PI / params.wavelength();

    let mut work = Vec::new();
    for (u, &user) in users.iter().enumerate() {
        for seg in layout.segments() {
            let row = views.get(user, seg.index).ok_or_else(|| {
                GscmError::IncompleteViews(format!("no views for user {user} in segment {}", seg.index))
            })?;
            if row.len() != k {
                return Err(GscmError::IncompleteViews(format!(
                    "user {user} has {} views in segment {}, expected {k}",
                    row.len(),
                    seg.index
                )));
            }
            work.push((u, user, *seg, row));
        }
    }

    let blocks: Vec<_> = work
        .par_iter()
        .map(|&(u, user, seg, row)| {
            let track = layout.track(user).expect("user from layout");
            let paths: Vec<ViewPaths> = row
                .iter()
                .map(|v| {
                    let scatterers = if params.single_scatterer {
                        ScattererSet::single()
                    } else {
                        ScattererSet::for_cluster(
                            params.seed,
                            v.segment,
                            v.cluster_id,
                            params.cluster_aoa_spread_deg,
                            params.cluster_aod_spread_deg,
                        )
                    };
                    ViewPaths::new(v, array, &scatterers)
                })
                .collect();
            let mut coeffs = Vec::with_capacity(seg.snapshot_count * rx * tx * k);
            let mut delays = Vec::with_capacity(seg.snapshot_count * k);
            for t in seg.snapshots() {
                let pos = track.points[t];
                for offset in &params.terminal.element_offsets {
                    let rx_pos = pos + *offset;
                    for i in 0..tx {
                        for p in &paths {
                            coeffs.push(p.coefficient(i, rx_pos, wavenumber));
                        }
                    }
                }
                for v in row {
                    delays.push(v.center_path_length(array, pos) / SPEED_OF_LIGHT);
                }
            }
            (u, seg, coeffs, delays)
        })
        .collect();

    let mut tensor = ChannelTensor::zeros(
        users,
        rx,
        tx,
        k,
        layout.snapshot_count(),
        params.carrier_hz,
        params.seed,
    );
    for (u, seg, coeffs, delays) in blocks {
        let mut it = coeffs.into_iter();
        let mut dt = delays.into_iter();
        for t in seg.snapshots() {
            for j in 0..rx {
                for i in 0..tx {
                    for c in 0..k {
                        let idx = tensor.index(u, j, i, c, t);
                        tensor.coefficients[idx] = it.next().expect("block size");
                    }
                }
            }
            for c in 0..k {
                let idx = tensor.delay_index(u, c, t);
                tensor.delays[idx] = dt.next().expect("block size");
            }
        }
    }
    Ok(tensor)
}

/// Largest phase deviation, per sub-array, between spherical propagation to
/// the view's transmitter-side focal point and the planar approximation
/// along the sub-array's departure direction.
pub fn planar_vs_spherical_error(view: &OwnerView, array: &ArrayGeometry, carrier_hz: f64) -> Vec<f64> {
    let wavenumber = 2.0 * std::f64::consts::PI * carrier_hz / SPEED_OF_LIGHT;
    array
        .subarrays
        .iter()
        .map(|sa| {
            let fbs = view.fbs[sa.index];
            let (az, el) = view.departures[sa.index];
            let e_hat = Position::from_angles_deg(az, el);
            let r_center = fbs.distance(sa.center);
            array.element_positions[sa.element_range.clone()]
                .iter()
                .map(|&x| {
                    let r = fbs.distance(x);
                    // r - r_center, written to avoid cancellation at long range
                    let spherical = ((x - sa.center).dot(x + sa.center - fbs * 2.0)) / (r + r_center);
                    let planar = -(x - sa.center).dot(e_hat);
                    (wavenumber * (spherical - planar)).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect()
}
