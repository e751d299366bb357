//! Large-scale parameters per user and segment.
//!
//! Each parameter is log-normal. Its log-domain values at the segment-start
//! positions of all users form a zero-mean Gaussian field with covariance
//! `exp(-d / correlation_distance)`; the fields of different parameters are
//! independent. Only segment-start values are ever consumed, so the field is
//! sampled at those points directly instead of being rasterized into a map.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GscmError, Result};
use crate::geometry::Position;
use crate::layout::{UserId, UserLayout};
use crate::rng::{self, stream};

/// Log-normal law given by its median and the standard deviation of the
/// natural logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormal {
    pub median: f64,
    pub ln_std: f64,
}

impl LogNormal {
    pub fn new(median: f64, ln_std: f64) -> Self {
        Self { median, ln_std }
    }

    fn at_gaussian(&self, g: f64) -> f64 {
        self.median * (self.ln_std * g).exp()
    }
}

/// Scenario statistics. Units are carried in the field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub delay_spread_ns: LogNormal,
    pub aoa_spread_deg: LogNormal,
    pub aod_spread_deg: LogNormal,
    pub eoa_spread_deg: LogNormal,
    pub eod_spread_deg: LogNormal,
    /// Per-cluster shadowing standard deviation.
    pub cluster_shadowing_std_db: f64,
    /// Delay distribution proportionality factor.
    pub delay_scaling: f64,
    pub clusters_per_user: u32,
    pub carrier_hz: f64,
    pub correlation_distance_m: f64,
    /// Intra-cluster azimuth spread at the receiver.
    pub cluster_aoa_spread_deg: f64,
    /// Intra-cluster azimuth spread at the base station.
    pub cluster_aod_spread_deg: f64,
    /// Excess delays below this floor are raised to it before focal points
    /// are computed; a zero-excess path has no defined scatterer position.
    pub min_excess_delay_ns: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            delay_spread_ns: LogNormal::new(100.0, 0.3),
            aoa_spread_deg: LogNormal::new(40.0, 0.2),
            aod_spread_deg: LogNormal::new(8.0, 0.3),
            eoa_spread_deg: LogNormal::new(10.0, 0.2),
            eod_spread_deg: LogNormal::new(3.0, 0.2),
            cluster_shadowing_std_db: 3.0,
            delay_scaling: 2.3,
            clusters_per_user: 7,
            carrier_hz: 3.5e9,
            correlation_distance_m: 40.0,
            cluster_aoa_spread_deg: 15.0,
            cluster_aod_spread_deg: 2.0,
            min_excess_delay_ns: 10.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GscmError::InvalidScenario(m));
        for (name, law) in self.spreads() {
            if !(law.median > 0.0) || !law.median.is_finite() {
                return bad(format!("{name} median must be positive and finite, got {}", law.median));
            }
            if !(law.ln_std >= 0.0) || !law.ln_std.is_finite() {
                return bad(format!("{name} ln_std must be non-negative, got {}", law.ln_std));
            }
        }
        if !(self.delay_scaling > 1.0) || !self.delay_scaling.is_finite() {
            return bad(format!("delay_scaling must exceed 1, got {}", self.delay_scaling));
        }
        if !(self.cluster_shadowing_std_db >= 0.0) || !self.cluster_shadowing_std_db.is_finite() {
            return bad("cluster_shadowing_std_db must be non-negative".into());
        }
        if self.clusters_per_user == 0 {
            return bad("clusters_per_user must be at least 1".into());
        }
        if !(self.carrier_hz > 0.0) || !self.carrier_hz.is_finite() {
            return bad(format!("carrier_hz must be positive, got {}", self.carrier_hz));
        }
        if !(self.correlation_distance_m > 0.0) {
            return bad(format!(
                "correlation_distance_m must be positive, got {}",
                self.correlation_distance_m
            ));
        }
        for (name, v) in [
            ("cluster_aoa_spread_deg", self.cluster_aoa_spread_deg),
            ("cluster_aod_spread_deg", self.cluster_aod_spread_deg),
            ("min_excess_delay_ns", self.min_excess_delay_ns),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.min_excess_delay_ns > 0.0) {
            return bad("min_excess_delay_ns must be positive".into());
        }
        Ok(())
    }

    fn spreads(&self) -> [(&'static str, LogNormal); 5] {
        [
            ("delay_spread_ns", self.delay_spread_ns),
            ("aoa_spread_deg", self.aoa_spread_deg),
            ("aod_spread_deg", self.aod_spread_deg),
            ("eoa_spread_deg", self.eoa_spread_deg),
            ("eod_spread_deg", self.eod_spread_deg),
        ]
    }
}

/// Large-scale parameters of one user in one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lsp {
    /// Delay spread, seconds.
    pub sigma_tau: f64,
    pub sigma_aoa: f64,
    pub sigma_aod: f64,
    pub sigma_eoa: f64,
    pub sigma_eod: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LspDraw {
    values: BTreeMap<(UserId, usize), Lsp>,
}

impl LspDraw {
    pub fn get(&self, user: UserId, segment: usize) -> Result<&Lsp> {
        self.values
            .get(&(user, segment))
            .ok_or(GscmError::MissingLsp { user, segment })
    }

    pub fn iter(&self) -> impl Iterator<Item = (UserId, usize, &Lsp)> {
        self.values.iter().map(|(&(u, s), l)| (u, s, l))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Square-root factor `F` with `F Fᵀ = C` for `C_ij = exp(-|p_i - p_j| / dc)`.
fn correlation_factor(points: &[Position], correlation_distance_m: f64) -> DMatrix<f64> {
    let n = points.len();
    let cov = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            (-points[i].distance(points[j]) / correlation_distance_m).exp()
        }
    });
    let eig = SymmetricEigen::new(cov);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    eig.eigenvectors * DMatrix::from_diagonal(&roots)
}

/// Draws every user's parameters for every segment.
pub fn draw_lsp(scenario: &ScenarioConfig, layout: &UserLayout, seed: u64) -> Result<LspDraw> {
    scenario.validate()?;
    let mut keys = Vec::new();
    for seg in layout.segments() {
        for user in layout.users() {
            keys.push(((user, seg.index), layout.segment_start(user, seg.index)?));
        }
    }

    // Coincident positions map to one field sample so co-located users draw
    // bit-identical values.
    let mut points: Vec<Position> = Vec::new();
    let slot: Vec<usize> = keys
        .iter()
        .map(|(_, p)| match points.iter().position(|q| q == p) {
            Some(i) => i,
            None => {
                points.push(*p);
                points.len() - 1
            }
        })
        .collect();
    if points.is_empty() {
        return Ok(LspDraw::default());
    }

    let factor = correlation_factor(&points, scenario.correlation_distance_m);
    let fields: Vec<DVector<f64>> = (0..5u64)
        .map(|f| {
            let mut rng = rng::keyed(seed, &[stream::LSP, f]);
            let white = DVector::from_fn(points.len(), |_, _| StandardNormal.sample(&mut rng));
            &factor * white
        })
        .collect();

    let values = keys
        .iter()
        .zip(&slot)
        .map(|((key, _), &i)| {
            let lsp = Lsp {
                sigma_tau: scenario.delay_spread_ns.at_gaussian(fields[0][i]) * 1e-9,
                sigma_aoa: scenario.aoa_spread_deg.at_gaussian(fields[1][i]),
                sigma_aod: scenario.aod_spread_deg.at_gaussian(fields[2][i]),
                sigma_eoa: scenario.eoa_spread_deg.at_gaussian(fields[3][i]),
                sigma_eod: scenario.eod_spread_deg.at_gaussian(fields[4][i]),
            };
            (*key, lsp)
        })
        .collect();
    Ok(LspDraw { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{ArrayGeometry, Track};

    fn layout_at(points: &[Position]) -> UserLayout {
        let tracks = points
            .iter()
            .enumerate()
            .map(|(i, p)| Track::new(i as UserId + 1, vec![*p], 0.5).unwrap())
            .collect();
        let arr = ArrayGeometry::uniform_linear(
            4,
            0.05,
            Position::new(0.0, 0.0, 10.0),
            Position::new(0.0, 1.0, 0.0),
            1.0,
        )
        .unwrap();
        UserLayout::new(tracks, 5.0, arr).unwrap()
    }

    #[test]
    fn infinite_correlation_distance_gives_identical_values() {
        let layout = layout_at(&[Position::new(0.0, 0.0, 1.5), Position::new(3.0, 0.0, 1.5)]);
        let scenario = ScenarioConfig {
            correlation_distance_m: f64::INFINITY,
            ..Default::default()
        };
        for seed in 0..20 {
            let d = draw_lsp(&scenario, &layout, seed).unwrap();
            let (a, b) = (d.get(1, 0).unwrap(), d.get(2, 0).unwrap());
            assert!((a.sigma_tau / b.sigma_tau - 1.0).abs() < 1e-9);
            assert!((a.sigma_aoa / b.sigma_aoa - 1.0).abs() < 1e-9);
            assert!((a.sigma_eod / b.sigma_eod - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn log_correlation_at_one_correlation_distance() {
        let dc = 40.0;
        let layout = layout_at(&[Position::new(0.0, 0.0, 1.5), Position::new(dc, 0.0, 1.5)]);
        let scenario = ScenarioConfig {
            correlation_distance_m: dc,
            ..Default::default()
        };
        let law = scenario.aoa_spread_deg;
        let draws = 10_000;
        let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for seed in 0..draws {
            let d = draw_lsp(&scenario, &layout, seed).unwrap();
            let a = (d.get(1, 0).unwrap().sigma_aoa / law.median).ln();
            let b = (d.get(2, 0).unwrap().sigma_aoa / law.median).ln();
            sa += a;
            sb += b;
            saa += a * a;
            sbb += b * b;
            sab += a * b;
        }
        let n = draws as f64;
        let cov = sab / n - sa * sb / (n * n);
        let corr = cov / ((saa / n - (sa / n).powi(2)) * (sbb / n - (sb / n).powi(2))).sqrt();
        assert!((corr - (-1.0f64).exp()).abs() < 0.05, "corr = {corr}");
    }

    #[test]
    fn zero_log_std_returns_median() {
        let layout = layout_at(&[Position::new(0.0, 0.0, 1.5), Position::new(7.0, 2.0, 1.5)]);
        let flat = LogNormal::new(25.0, 0.0);
        let scenario = ScenarioConfig {
            delay_spread_ns: LogNormal::new(80.0, 0.0),
            aoa_spread_deg: flat,
            aod_spread_deg: flat,
            eoa_spread_deg: flat,
            eod_spread_deg: flat,
            ..Default::default()
        };
        let d = draw_lsp(&scenario, &layout, 3).unwrap();
        for (_, _, l) in d.iter() {
            assert!((l.sigma_tau - 80e-9).abs() < 1e-20);
            assert_eq!(l.sigma_aoa, 25.0);
            assert_eq!(l.sigma_eod, 25.0);
        }
    }

    #[test]
    fn reproducible_and_positive() {
        let layout = layout_at(&[
            Position::new(0.0, 0.0, 1.5),
            Position::new(3.0, 1.0, 1.5),
            Position::new(-8.0, 2.0, 1.5),
        ]);
        let scenario = ScenarioConfig::default();
        let a = draw_lsp(&scenario, &layout, 11).unwrap();
        let b = draw_lsp(&scenario, &layout, 11).unwrap();
        assert_eq!(a, b);
        for (_, _, l) in a.iter() {
            for v in [l.sigma_tau, l.sigma_aoa, l.sigma_aod, l.sigma_eoa, l.sigma_eod] {
                assert!(v > 0.0 && v.is_finite());
            }
        }
        assert_ne!(a, draw_lsp(&scenario, &layout, 12).unwrap());
    }

    #[test]
    fn invalid_scenarios_rejected() {
        let layout = layout_at(&[Position::ORIGIN]);
        let cases = [
            ScenarioConfig {
                delay_scaling: 1.0,
                ..Default::default()
            },
            ScenarioConfig {
                aoa_spread_deg: LogNormal::new(0.0, 0.1),
                ..Default::default()
            },
            ScenarioConfig {
                correlation_distance_m: 0.0,
                ..Default::default()
            },
            ScenarioConfig {
                clusters_per_user: 0,
                ..Default::default()
            },
        ];
        for s in cases {
            assert!(matches!(draw_lsp(&s, &layout, 0), Err(GscmError::InvalidScenario(_))));
        }
    }
}
