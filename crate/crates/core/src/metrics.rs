//! Condensed channel parameters computed from gated power delay profiles.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sounding::{
    apply_gating, calibrate, correct_wraparound, reconstruct_omni, select_max_dir,
    with_noise_floor, AngleGrid, CalibrationTrace, DelayTransform, DirectionalPdps,
    PowerDelayProfile, SweepGrid, DEFAULT_GATE_DELAY, DEFAULT_NOISE_MARGIN_DB,
};
use crate::SPEED_OF_LIGHT;

fn require_gated(pdp: &PowerDelayProfile) -> Result<()> {
    if pdp.gated {
        Ok(())
    } else {
        Err(Error::Ungated)
    }
}

/// `-10 log10` of the total power of a gated profile, in dB.
pub fn path_loss(pdp: &PowerDelayProfile) -> Result<f64> {
    require_gated(pdp)?;
    let total = pdp.total_power();
    if !(total > 0.0) {
        return Err(Error::UnusableLink("profile is fully gated".into()));
    }
    Ok(-10.0 * total.log10())
}

/// RMS delay spread (second central moment of the profile), in seconds.
pub fn rms_delay_spread(pdp: &PowerDelayProfile) -> Result<f64> {
    require_gated(pdp)?;
    let total = pdp.total_power();
    if !(total > 0.0) {
        return Err(Error::UnusableLink("profile is fully gated".into()));
    }
    let bins = || pdp.delays.iter().zip(&pdp.powers).filter(|(_, p)| **p > 0.0);
    let mean = bins().map(|(d, p)| d * p).sum::<f64>() / total;
    let var = bins().map(|(d, p)| p * (d - mean).powi(2)).sum::<f64>() / total;
    Ok(var.max(0.0).sqrt())
}

/// Delay-integrated power per beam pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Ddaps {
    pub angles: AngleGrid,
    /// Linear power in [`AngleGrid::pair_index`] order.
    pub power: Vec<f64>,
}

impl Ddaps {
    pub fn new(angles: AngleGrid, power: Vec<f64>) -> Result<Self> {
        if power.len() != angles.n_pairs() {
            return Err(Error::LengthMismatch {
                expected: angles.n_pairs(),
                actual: power.len(),
            });
        }
        if power.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidParameter("DDAPS power must be non-negative".into()));
        }
        Ok(Self { angles, power })
    }

    pub fn get(&self, tx: usize, rx: usize) -> f64 {
        self.power[self.angles.pair_index(tx, rx)]
    }

    pub fn total(&self) -> f64 {
        self.power.iter().sum()
    }
}

pub fn compute_ddaps(set: &DirectionalPdps) -> Result<Ddaps> {
    let power = set
        .pdps
        .iter()
        .map(|p| require_gated(p).map(|_| p.total_power()))
        .collect::<Result<Vec<_>>>()?;
    Ddaps::new(set.angles.clone(), power)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Tx,
    Rx,
}

/// Single-ended angular power spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Aps {
    pub side: Side,
    /// Azimuths in degrees.
    pub angles: Vec<f64>,
    pub power: Vec<f64>,
}

/// Marginalizes the DDAPS over the opposite link end.
pub fn marginal_aps(ddaps: &Ddaps, side: Side) -> Aps {
    let g = &ddaps.angles;
    let (angles, power) = match side {
        Side::Tx => (
            g.tx().to_vec(),
            (0..g.n_tx())
                .map(|t| (0..g.n_rx()).map(|r| ddaps.get(t, r)).sum())
                .collect(),
        ),
        Side::Rx => (
            g.rx().to_vec(),
            (0..g.n_rx())
                .map(|r| (0..g.n_tx()).map(|t| ddaps.get(t, r)).sum())
                .collect(),
        ),
    };
    Aps { side, angles, power }
}

/// Fleury angular spread of an APS; dimensionless, in [0, 1].
pub fn angular_spread(aps: &Aps) -> Result<f64> {
    let total: f64 = aps.power.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter("APS has zero total power".into()));
    }
    let phasors: Vec<Complex64> = aps
        .angles
        .iter()
        .map(|a| Complex64::from_polar(1.0, a.to_radians()))
        .collect();
    let mu: Complex64 = phasors
        .iter()
        .zip(&aps.power)
        .map(|(e, p)| e * *p)
        .sum::<Complex64>()
        / total;
    let spread = phasors
        .iter()
        .zip(&aps.power)
        .map(|(e, p)| (e - mu).norm_sqr() * p)
        .sum::<f64>()
        / total;
    Ok(spread.clamp(0.0, 1.0).sqrt())
}

/// Powers of the local maxima of a profile, strongest first.
///
/// A bin is a local maximum when it is nonzero and strictly larger than each
/// neighbor it has; the first and last bins compare against one neighbor.
pub fn local_maxima(pdp: &PowerDelayProfile) -> Vec<f64> {
    let p = &pdp.powers;
    let n = p.len();
    let mut peaks: Vec<f64> = (0..n)
        .filter(|&k| {
            p[k] > 0.0 && (k == 0 || p[k] > p[k - 1]) && (k + 1 == n || p[k] > p[k + 1])
        })
        .map(|k| p[k])
        .collect();
    peaks.sort_by(|a, b| b.total_cmp(a));
    peaks
}

/// Ratio of the strongest local maximum to the sum of all other local
/// maxima, in dB. `+inf` when there is only one local maximum.
pub fn kappa1(pdp: &PowerDelayProfile) -> Result<f64> {
    require_gated(pdp)?;
    let peaks = local_maxima(pdp);
    kappa1_from_peaks(&peaks)
}

/// κ₁ from peak powers sorted strongest first.
pub fn kappa1_from_peaks(peaks: &[f64]) -> Result<f64> {
    let strongest = *peaks
        .first()
        .ok_or_else(|| Error::UnusableLink("profile has no local maximum".into()))?;
    let rest: f64 = peaks[1..].iter().sum();
    if rest > 0.0 {
        Ok(10.0 * (strongest / rest).log10())
    } else {
        Ok(f64::INFINITY)
    }
}

/// Condensed parameters of one Tx-Rx link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRecord {
    pub id: String,
    pub distance: f64,
    pub los: bool,
    pub pl_omni: f64,
    pub pl_maxdir: f64,
    pub ds_omni: f64,
    pub ds_maxdir: f64,
    pub as_tx: f64,
    pub as_rx: f64,
    pub k1_omni: f64,
    pub k1_maxdir: f64,
    /// Azimuths of the best beam pair, degrees.
    pub maxdir_tx_deg: f64,
    pub maxdir_rx_deg: f64,
}

/// Knobs of the sweep-to-parameter pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessingConfig {
    pub gate_delay: f64,
    pub noise_margin_db: f64,
    /// Relocate aliased bins that precede the geometric first arrival.
    pub correct_wraparound: bool,
    /// A link counts as unusable unless at least one beam pair has a gated
    /// bin this far above its own noise floor.
    pub detection_db: f64,
}

impl Default for ProcessingConfig {
    fn default() -> Self {
        Self {
            gate_delay: DEFAULT_GATE_DELAY,
            noise_margin_db: DEFAULT_NOISE_MARGIN_DB,
            correct_wraparound: true,
            detection_db: 15.0,
        }
    }
}

/// Gated directional profiles of a calibrated sweep grid.
pub fn directional_pdps(grid: &SweepGrid, config: &ProcessingConfig) -> Result<DirectionalPdps> {
    let transform = DelayTransform::new(*grid.axis());
    let first_arrival = grid.meta.distance / SPEED_OF_LIGHT;
    let wrap = config.correct_wraparound && first_arrival < grid.axis().delay_span();
    if config.correct_wraparound && !wrap {
        log::warn!(
            "link {}: first arrival {:.1} ns beyond the delay span, wrap-around left uncorrected",
            grid.meta.id,
            first_arrival * 1e9
        );
    }
    let sweeps: Vec<&[Complex64]> = grid.responses().map(|(_, _, h)| h).collect();
    let pdps = sweeps
        .par_iter()
        .map(|h| {
            let mut pdp = transform.pdp(h)?;
            if wrap {
                pdp = correct_wraparound(&pdp, first_arrival)?;
            }
            let pdp = with_noise_floor(pdp, config.gate_delay)?;
            apply_gating(&pdp, config.gate_delay, config.noise_margin_db)
        })
        .collect::<Result<Vec<_>>>()?;
    DirectionalPdps::new(grid.angles().clone(), pdps)
}

fn detected(set: &DirectionalPdps, detection_db: f64) -> bool {
    let factor = 10f64.powf(detection_db / 10.0);
    set.pdps.iter().any(|p| {
        let floor = p.noise_floor.unwrap_or(f64::INFINITY);
        p.powers.iter().any(|&v| v > 0.0 && v >= floor * factor)
    })
}

/// Condensed parameters from already-gated directional profiles.
pub fn condense_pdps(
    id: &str,
    distance: f64,
    los: bool,
    set: &DirectionalPdps,
) -> Result<LinkRecord> {
    if !(distance > 0.0) {
        return Err(Error::InvalidParameter(format!("distance must be positive, got {distance}")));
    }
    let omni = reconstruct_omni(&set.pdps)?;
    let best = select_max_dir(set)?;
    let ddaps = compute_ddaps(set)?;
    Ok(LinkRecord {
        id: id.to_string(),
        distance,
        los,
        pl_omni: path_loss(&omni)?,
        pl_maxdir: path_loss(&best.pdp)?,
        ds_omni: rms_delay_spread(&omni)?,
        ds_maxdir: rms_delay_spread(&best.pdp)?,
        as_tx: angular_spread(&marginal_aps(&ddaps, Side::Tx))?,
        as_rx: angular_spread(&marginal_aps(&ddaps, Side::Rx))?,
        k1_omni: kappa1(&omni)?,
        k1_maxdir: kappa1(&best.pdp)?,
        maxdir_tx_deg: best.tx_deg,
        maxdir_rx_deg: best.rx_deg,
    })
}

/// Full pipeline for one link: calibration, per-direction profiles, gating,
/// omni and max-dir reconstruction, and all condensed parameters.
pub fn condense(
    raw: &SweepGrid,
    cal: &CalibrationTrace,
    config: &ProcessingConfig,
) -> Result<LinkRecord> {
    let grid = calibrate(raw, cal)?;
    let set = directional_pdps(&grid, config)?;
    if !detected(&set, config.detection_db) {
        return Err(Error::UnusableLink(format!(
            "link {}: no beam pair rises {} dB above its noise floor",
            grid.meta.id, config.detection_db
        )));
    }
    condense_pdps(&grid.meta.id, grid.meta.distance, grid.meta.los, &set)
}
