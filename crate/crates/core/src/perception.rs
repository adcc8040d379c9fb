//! Pluggable provider of (collision probability, scaled steering) pairs.
//!
//! The built-in provider is a range-scan oracle: collision probability ramps
//! up as the nearest frontal obstacle approaches, and steering points at the
//! most open angular sector. A learned provider can replace it behind the
//! same output contract.

use serde::{Deserialize, Serialize};

use crate::world::LaserScan;
use crate::{Error, Result};

/// Per-frame perception output: collision probability `p_t` in [0, 1] and
/// scaled steering `s_k` in [-1, 1] (positive steers left).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PerceptionOutput {
    pub p_t: f64,
    pub s_k: f64,
    pub stamp: f64,
}

impl PerceptionOutput {
    pub fn new(p_t: f64, s_k: f64, stamp: f64) -> Result<Self> {
        if !p_t.is_finite() || !(0.0..=1.0).contains(&p_t) {
            return Err(Error::Contract(format!("p_t must be in [0, 1], got {p_t}")));
        }
        if !s_k.is_finite() || !(-1.0..=1.0).contains(&s_k) {
            return Err(Error::Contract(format!("s_k must be in [-1, 1], got {s_k}")));
        }
        Ok(PerceptionOutput { p_t, s_k, stamp })
    }
}

/// Range-oracle parameters. The collision probability ramps linearly from 0
/// at `d_free` down to 1 at `d_stop` using the minimum range inside the
/// frontal cone. Steering partitions the scan into `sector_count` equal
/// sectors (odd so a center sector exists; sector boundaries land on beam
/// indices, so pick a count dividing the beam count for exact symmetry).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OracleParams {
    pub cone_half_angle: f64,
    pub d_stop: f64,
    pub d_free: f64,
    pub sector_count: usize,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            cone_half_angle: 30f64.to_radians(),
            d_stop: 0.3,
            d_free: 1.5,
            sector_count: 9,
        }
    }
}

impl OracleParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.d_stop && self.d_stop < self.d_free) {
            return Err(Error::Validation(format!(
                "perception requires 0 < d_stop < d_free, got {} / {}",
                self.d_stop, self.d_free
            )));
        }
        if self.sector_count < 3 || self.sector_count % 2 == 0 {
            return Err(Error::Validation(format!(
                "perception.sector_count must be odd and >= 3, got {}",
                self.sector_count
            )));
        }
        if !(self.cone_half_angle > 0.0) {
            return Err(Error::Validation(
                "perception.cone_half_angle must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Produce a (p_t, s_k) pair from a scan.
///
/// p_t: 1 when the frontal minimum range is at or below `d_stop`, 0 at or
/// beyond `d_free`, linear in between. s_k: the center bearing of the sector
/// with the greatest mean range (ties prefer the sector nearest the center,
/// then the leftmost), scaled by pi/2 and clamped to [-1, 1].
pub fn oracle_perception(scan: &LaserScan, params: &OracleParams) -> Result<PerceptionOutput> {
    params.validate()?;
    let n = scan.params.beam_count;

    let mut d_min = f64::INFINITY;
    let mut cone_beams = 0usize;
    for i in 0..n {
        if scan.params.bearing(i).abs() <= params.cone_half_angle {
            cone_beams += 1;
            d_min = d_min.min(scan.ranges[i]);
        }
    }
    if cone_beams == 0 {
        return Err(Error::Contract(
            "scan does not cover the frontal cone".into(),
        ));
    }

    let p_t = if d_min <= params.d_stop {
        1.0
    } else if d_min >= params.d_free {
        0.0
    } else {
        (params.d_free - d_min) / (params.d_free - params.d_stop)
    };

    let s = params.sector_count;
    let mut sums = vec![0.0f64; s];
    let mut counts = vec![0usize; s];
    for i in 0..n {
        let sector = (i * s / n).min(s - 1);
        sums[sector] += scan.ranges[i];
        counts[sector] += 1;
    }
    let center = (s - 1) / 2;
    let mut best: Option<(f64, usize, usize)> = None; // (mean, center distance, index)
    for sector in 0..s {
        if counts[sector] == 0 {
            continue;
        }
        let mean = sums[sector] / counts[sector] as f64;
        let dist = sector.abs_diff(center);
        let better = match best {
            None => true,
            Some((bm, bd, _)) => mean > bm || (mean == bm && dist < bd) || (mean == bm && dist == bd),
        };
        if better {
            best = Some((mean, dist, sector));
        }
    }
    let (_, _, winner) = best.ok_or_else(|| Error::Contract("scan has no beams".into()))?;

    // Angular midpoint of the winning sector's beam index range.
    let lo = (winner * n).div_ceil(s);
    let hi = ((winner + 1) * n).div_ceil(s) - 1;
    let center_bearing =
        scan.params.angle_min + ((lo + hi) as f64 / 2.0 + 0.5) * scan.params.increment();
    let s_k = (center_bearing / std::f64::consts::FRAC_PI_2).clamp(-1.0, 1.0);

    PerceptionOutput::new(p_t, s_k, scan.stamp)
}
