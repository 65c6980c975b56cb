//! Synthetic multipath scenes rendered through a horn-antenna model, plus an
//! analytic oracle that computes condensed parameters straight from the MPC
//! list.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::chanmodel::link_rng;
use crate::error::{Error, Result};
use crate::metrics::{angular_spread, kappa1_from_peaks, marginal_aps, Ddaps, LinkRecord, ProcessingConfig, Side};
use crate::sounding::{AngleGrid, FrequencyAxis, LinkMeta, SweepGrid, WRAP_GUARD_BINS};
use crate::SPEED_OF_LIGHT;

/// One specular multipath component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mpc {
    /// Propagation delay, seconds.
    pub delay: f64,
    /// Departure azimuth, degrees.
    pub aod: f64,
    /// Arrival azimuth, degrees.
    pub aoa: f64,
    pub amplitude: Complex64,
}

impl Mpc {
    pub fn new(delay: f64, aod: f64, aoa: f64, amplitude: Complex64) -> Result<Self> {
        let mpc = Self { delay, aod, aoa, amplitude };
        mpc.validate()?;
        Ok(mpc)
    }

    /// Free-space direct ray over `d` meters at frequency `f`.
    pub fn line_of_sight(d: f64, f: f64, aod: f64, aoa: f64) -> Result<Self> {
        let lambda = SPEED_OF_LIGHT / f;
        Self::new(d / SPEED_OF_LIGHT, aod, aoa, Complex64::new(lambda / (4.0 * PI * d), 0.0))
    }

    pub fn power(&self) -> f64 {
        self.amplitude.norm_sqr()
    }

    fn validate(&self) -> Result<()> {
        if !(self.delay >= 0.0 && self.delay.is_finite()) {
            return Err(Error::InvalidParameter(format!("MPC delay must be >= 0, got {}", self.delay)));
        }
        for a in [self.aod, self.aoa] {
            if !(0.0..360.0).contains(&a) {
                return Err(Error::InvalidAngles(format!("MPC azimuth {a} outside [0, 360)")));
            }
        }
        if !(self.amplitude.re.is_finite() && self.amplitude.im.is_finite()) {
            return Err(Error::InvalidParameter("MPC amplitude must be finite".into()));
        }
        Ok(())
    }
}

/// Gaussian main lobe with a constant backlobe floor, unit boresight gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaModel {
    /// Half-power beamwidth, degrees.
    pub hpbw: f64,
    /// Floor relative to boresight, dB.
    pub backlobe_db: f64,
}

impl Default for AntennaModel {
    fn default() -> Self {
        Self { hpbw: 13.0, backlobe_db: -30.0 }
    }
}

impl AntennaModel {
    pub fn new(hpbw: f64, backlobe_db: f64) -> Result<Self> {
        if !(hpbw > 0.0 && hpbw < 360.0) {
            return Err(Error::InvalidParameter(format!("hpbw must be in (0, 360), got {hpbw}")));
        }
        if !(backlobe_db < 0.0) {
            return Err(Error::InvalidParameter(format!("backlobe level must be < 0 dB, got {backlobe_db}")));
        }
        Ok(Self { hpbw, backlobe_db })
    }

    /// Power gain in dB at `offset` degrees from boresight.
    pub fn power_gain_db(&self, offset: f64) -> f64 {
        let delta = wrap_degrees(offset);
        (-3.0 * (2.0 * delta / self.hpbw).powi(2)).max(self.backlobe_db)
    }

    pub fn power_gain(&self, offset: f64) -> f64 {
        10f64.powf(self.power_gain_db(offset) / 10.0)
    }

    pub fn amplitude_gain(&self, offset: f64) -> f64 {
        10f64.powf(self.power_gain_db(offset) / 20.0)
    }
}

/// Maps an angle difference to [-180, 180).
fn wrap_degrees(x: f64) -> f64 {
    (x + 180.0).rem_euclid(360.0) - 180.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub mpcs: Vec<Mpc>,
    /// Noise power per frequency sample, linear.
    pub noise_power: f64,
    /// Tx-Rx distance, meters.
    pub distance: f64,
    pub los: bool,
}

impl Scene {
    pub fn new(mpcs: Vec<Mpc>, noise_power: f64, distance: f64, los: bool) -> Result<Self> {
        let scene = Self { mpcs, noise_power, distance, los };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        for m in &self.mpcs {
            m.validate()?;
        }
        if !(self.noise_power >= 0.0 && self.noise_power.is_finite()) {
            return Err(Error::InvalidParameter("noise power must be >= 0".into()));
        }
        if !(self.distance > 0.0 && self.distance.is_finite()) {
            return Err(Error::InvalidParameter(format!("distance must be positive, got {}", self.distance)));
        }
        Ok(())
    }
}

/// `exp(-j 2π f_n τ)` over the axis, with the phase reduced modulo one turn
/// before scaling so that large `f τ` products keep their precision.
fn delay_phasors(axis: &FrequencyAxis, tau: f64) -> Vec<Complex64> {
    let base = (axis.f_start() * tau).fract();
    let step = axis.spacing() * tau;
    (0..axis.n_points())
        .map(|n| {
            let turns = (base + (n as f64 * step).fract()).fract();
            Complex64::from_polar(1.0, -2.0 * PI * turns)
        })
        .collect()
}

/// Renders the scene into a raw (already calibrated) sweep grid.
///
/// Noise for beam pair `p` comes from stream `p` of `seed`, so output does
/// not depend on thread scheduling.
pub fn scene_to_sweeps(
    scene: &Scene,
    antenna: &AntennaModel,
    axis: &FrequencyAxis,
    angles: &AngleGrid,
    seed: u64,
) -> Result<SweepGrid> {
    scene.validate()?;
    let phasors: Vec<Vec<Complex64>> = scene.mpcs.iter().map(|m| delay_phasors(axis, m.delay)).collect();
    let n = axis.n_points();
    let noise_sd = (scene.noise_power / 2.0).sqrt();
    let blocks: Vec<Vec<Complex64>> = (0..angles.n_pairs())
        .into_par_iter()
        .map(|p| {
            let (tx, rx) = (p % angles.n_tx(), p / angles.n_tx());
            let mut h = vec![Complex64::new(0.0, 0.0); n];
            for (m, ph) in scene.mpcs.iter().zip(&phasors) {
                let g = antenna.amplitude_gain(angles.tx()[tx] - m.aod)
                    * antenna.amplitude_gain(angles.rx()[rx] - m.aoa);
                let a = m.amplitude * g;
                for (acc, e) in h.iter_mut().zip(ph) {
                    *acc += a * e;
                }
            }
            if noise_sd > 0.0 {
                let mut rng = link_rng(seed, p as u64);
                for acc in h.iter_mut() {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *acc += Complex64::new(re, im) * noise_sd;
                }
            }
            h
        })
        .collect();
    let samples = blocks.concat();
    let meta = LinkMeta::new("scene", scene.distance, scene.los);
    SweepGrid::new(*axis, angles.clone(), samples, meta)
}

/// A resolvable delay tap: MPCs that land on the same delay after aliasing.
struct Tap {
    delay: f64,
    members: Vec<usize>,
}

fn taps(scene: &Scene, axis: &FrequencyAxis, config: &ProcessingConfig) -> Vec<Tap> {
    let span = axis.delay_span();
    let res = axis.delay_resolution();
    let first = scene.distance / SPEED_OF_LIGHT;
    let wrap = config.correct_wraparound && first < span;
    let cutoff = first - WRAP_GUARD_BINS as f64 * res;
    let mut seen: Vec<(f64, usize)> = scene
        .mpcs
        .iter()
        .enumerate()
        .filter_map(|(k, m)| {
            let mut d = m.delay.rem_euclid(span);
            if wrap && d < cutoff {
                d += span;
            }
            (d <= config.gate_delay && m.power() > 0.0).then_some((d, k))
        })
        .collect();
    seen.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<Tap> = Vec::new();
    for (d, k) in seen {
        match out.last_mut() {
            Some(t) if d - t.delay < 0.5 * res => t.members.push(k),
            _ => out.push(Tap { delay: d, members: vec![k] }),
        }
    }
    out
}

fn delay_moments(delays: &[f64], powers: &[f64]) -> (f64, f64) {
    let total: f64 = powers.iter().sum();
    let mean = delays.iter().zip(powers).map(|(d, p)| d * p).sum::<f64>() / total;
    let var = delays.iter().zip(powers).map(|(d, p)| (d - mean).powi(2) * p).sum::<f64>() / total;
    (total, var.max(0.0).sqrt())
}

fn peaks_of(powers: &[f64]) -> Vec<f64> {
    let mut peaks: Vec<f64> = powers.iter().copied().filter(|&p| p > 0.0).collect();
    peaks.sort_by(|a, b| b.total_cmp(a));
    peaks
}

/// Condensed parameters computed directly from the MPC list.
///
/// Aliasing, wrap-around relocation and the delay gate are modeled exactly;
/// MPCs that share a delay tap add in power. Noise is ignored.
pub fn oracle_params(
    scene: &Scene,
    angles: &AngleGrid,
    antenna: &AntennaModel,
    axis: &FrequencyAxis,
    config: &ProcessingConfig,
) -> Result<LinkRecord> {
    scene.validate()?;
    if scene.mpcs.is_empty() {
        return Err(Error::Empty("scene"));
    }
    let taps = taps(scene, axis, config);
    if taps.is_empty() {
        return Err(Error::UnusableLink("every MPC falls outside the delay gate".into()));
    }
    let n_pairs = angles.n_pairs();
    // tap_power[p][t]: power of tap t seen by beam pair p.
    let tap_power: Vec<Vec<f64>> = (0..n_pairs)
        .map(|p| {
            let (tx, rx) = (p % angles.n_tx(), p / angles.n_tx());
            taps.iter()
                .map(|t| {
                    t.members
                        .iter()
                        .map(|&k| {
                            let m = &scene.mpcs[k];
                            m.power()
                                * antenna.power_gain(angles.tx()[tx] - m.aod)
                                * antenna.power_gain(angles.rx()[rx] - m.aoa)
                        })
                        .sum()
                })
                .collect()
        })
        .collect();
    let delays: Vec<f64> = taps.iter().map(|t| t.delay).collect();

    let omni: Vec<f64> = (0..taps.len())
        .map(|t| tap_power.iter().map(|row| row[t]).fold(0.0, f64::max))
        .collect();

    let totals: Vec<f64> = tap_power.iter().map(|row| row.iter().sum()).collect();
    let mut best = (0, 0, f64::NEG_INFINITY);
    for tx in 0..angles.n_tx() {
        for rx in 0..angles.n_rx() {
            let total = totals[angles.pair_index(tx, rx)];
            if total > best.2 {
                best = (tx, rx, total);
            }
        }
    }
    let best_row = &tap_power[angles.pair_index(best.0, best.1)];

    let (p_omni, ds_omni) = delay_moments(&delays, &omni);
    let (p_best, ds_best) = delay_moments(&delays, best_row);
    let ddaps = Ddaps::new(angles.clone(), totals)?;

    Ok(LinkRecord {
        id: "oracle".into(),
        distance: scene.distance,
        los: scene.los,
        pl_omni: -10.0 * p_omni.log10(),
        pl_maxdir: -10.0 * p_best.log10(),
        ds_omni,
        ds_maxdir: ds_best,
        as_tx: angular_spread(&marginal_aps(&ddaps, Side::Tx))?,
        as_rx: angular_spread(&marginal_aps(&ddaps, Side::Rx))?,
        k1_omni: kappa1_from_peaks(&peaks_of(&omni))?,
        k1_maxdir: kappa1_from_peaks(&peaks_of(best_row))?,
        maxdir_tx_deg: angles.tx()[best.0],
        maxdir_rx_deg: angles.rx()[best.1],
    })
}

/// Random noiseless scene whose MPC delays sit on delay-bin centers (at
/// least two bins apart, all after the first arrival and inside the gate)
/// and whose angles sit on grid points.
pub fn random_on_grid_scene(
    axis: &FrequencyAxis,
    angles: &AngleGrid,
    config: &ProcessingConfig,
    n_mpc: usize,
    seed: u64,
) -> Result<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let res = axis.delay_resolution();
    let max_d = (0.4 * config.gate_delay * SPEED_OF_LIGHT).min(100.0);
    let distance = rng.random_range(2.0..max_d.max(2.5));
    let first_bin = (distance / SPEED_OF_LIGHT / res).ceil() as usize;
    let last_bin = (config.gate_delay / res).floor() as usize;
    if last_bin < first_bin + 2 * n_mpc {
        return Err(Error::InvalidParameter("gate too short for the requested scene".into()));
    }
    let mut bins: Vec<usize> = Vec::with_capacity(n_mpc);
    while bins.len() < n_mpc {
        let b = rng.random_range(first_bin..=last_bin);
        if bins.iter().all(|&o| o.abs_diff(b) >= 2) {
            bins.push(b);
        }
    }
    let lambda = SPEED_OF_LIGHT / axis.center();
    let los_amp = lambda / (4.0 * PI * distance);
    let mpcs = bins
        .iter()
        .map(|&b| {
            let aod = angles.tx()[rng.random_range(0..angles.n_tx())];
            let aoa = angles.rx()[rng.random_range(0..angles.n_rx())];
            let rel_db: f64 = rng.random_range(-20.0..0.0);
            let phase: f64 = rng.random_range(0.0..2.0 * PI);
            let amp = Complex64::from_polar(los_amp * 10f64.powf(rel_db / 20.0), phase);
            Mpc::new(b as f64 * res, aod, aoa, amp)
        })
        .collect::<Result<Vec<_>>>()?;
    Scene::new(mpcs, 0.0, distance, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{condense, path_loss};
    use crate::sounding::{
        apply_gating, compute_pdp, with_noise_floor, CalibrationTrace, DelayInterval, estimate_noise_floor,
        NOISE_TAIL_FRACTION,
    };
    use approx::assert_relative_eq;

    fn one(mpc: Mpc, noise: f64, d: f64) -> Scene {
        Scene::new(vec![mpc], noise, d, true).unwrap()
    }

    #[test]
    fn pattern_normalization() {
        let a = AntennaModel::default();
        assert_eq!(a.amplitude_gain(0.0), 1.0);
        assert_relative_eq!(a.amplitude_gain(6.5), 10f64.powf(-3.0 / 20.0), max_relative = 1e-12);
        assert_relative_eq!(a.amplitude_gain(-6.5), a.amplitude_gain(353.5 - 360.0 + 360.0), max_relative = 1e-12);
        assert_eq!(a.power_gain_db(180.0), -30.0);
        assert!(AntennaModel::new(0.0, -30.0).is_err());
        assert!(AntennaModel::new(13.0, 0.0).is_err());
    }

    #[test]
    fn boresight_single_mpc_is_flat() {
        let axis = FrequencyAxis::default();
        let angles = AngleGrid::uniform(4, 4).unwrap();
        let amp = Complex64::new(0.003, -0.004);
        let scene = one(Mpc::new(120e-9, 90.0, 270.0, amp).unwrap(), 0.0, 30.0);
        let grid = scene_to_sweeps(&scene, &AntennaModel::default(), &axis, &angles, 1).unwrap();
        let tx = angles.tx().iter().position(|&a| a == 90.0).unwrap();
        let rx = angles.rx().iter().position(|&a| a == 270.0).unwrap();
        for h in grid.response(tx, rx) {
            assert_relative_eq!(h.norm(), 0.005, max_relative = 1e-12);
        }
    }

    #[test]
    fn half_beamwidth_offset_loses_3db_per_antenna() {
        let axis = FrequencyAxis::new(145e9, 146e9, 11).unwrap();
        let angles = AngleGrid::from_lists(vec![0.0], vec![0.0], 10.0).unwrap();
        let scene = one(Mpc::new(0.0, 6.5, 0.0, Complex64::new(1.0, 0.0)).unwrap(), 0.0, 1.0);
        let grid = scene_to_sweeps(&scene, &AntennaModel::default(), &axis, &angles, 1).unwrap();
        let db = 10.0 * grid.response(0, 0)[0].norm_sqr().log10();
        assert!((db + 3.0).abs() <= 0.1, "{db}");
        let scene = one(Mpc::new(0.0, 6.5, 353.5, Complex64::new(1.0, 0.0)).unwrap(), 0.0, 1.0);
        let grid = scene_to_sweeps(&scene, &AntennaModel::default(), &axis, &angles, 1).unwrap();
        let db = 10.0 * grid.response(0, 0)[0].norm_sqr().log10();
        assert!((db + 6.0).abs() <= 0.1, "{db}");
    }

    fn pdp_of(scene: &Scene, axis: &FrequencyAxis) -> Vec<f64> {
        let angles = AngleGrid::from_lists(vec![0.0], vec![0.0], 10.0).unwrap();
        let grid = scene_to_sweeps(scene, &AntennaModel::default(), axis, &angles, 3).unwrap();
        compute_pdp(grid.response(0, 0), axis).unwrap().powers
    }

    #[test]
    fn late_mpc_aliases_into_the_span() {
        let axis = FrequencyAxis::default();
        let amp = Complex64::new(1.0, 0.0);
        let late = pdp_of(&one(Mpc::new(1.1e-6, 0.0, 0.0, amp).unwrap(), 0.0, 1.0), &axis);
        let peak = (0..late.len()).max_by(|&a, &b| late[a].total_cmp(&late[b])).unwrap();
        assert!((axis.delay(peak) - 0.1e-6).abs() <= axis.delay_resolution(), "{}", axis.delay(peak));

        // Shifting by exactly one span leaves the profile unchanged.
        let tau = 37.0 * axis.delay_resolution();
        let a = pdp_of(&one(Mpc::new(tau, 0.0, 0.0, amp).unwrap(), 0.0, 1.0), &axis);
        let b = pdp_of(&one(Mpc::new(tau + axis.delay_span(), 0.0, 0.0, amp).unwrap(), 0.0, 1.0), &axis);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-9 * a[37], "{x} {y}");
        }
    }

    #[test]
    fn noise_floor_matches_rendered_noise() {
        // 5001 points: a 5 us span whose last 10% (about 500 bins) is noise only.
        let axis = FrequencyAxis::new(145e9, 146e9, 5001).unwrap();
        let sigma2 = 1e-6;
        let amp = Complex64::new(1e-3, 0.0);
        let scene = one(Mpc::new(50e-9, 0.0, 0.0, amp).unwrap(), sigma2, 10.0);
        let angles = AngleGrid::from_lists(vec![0.0], vec![0.0], 10.0).unwrap();
        let grid = scene_to_sweeps(&scene, &AntennaModel::default(), &axis, &angles, 11).unwrap();
        let pdp = compute_pdp(grid.response(0, 0), &axis).unwrap();
        let region = DelayInterval::noise_tail(&pdp, NOISE_TAIL_FRACTION, 833.33e-9);
        let n_region = pdp.delays.iter().filter(|d| region.contains(**d)).count();
        assert!(n_region >= 500, "{n_region}");
        let floor = estimate_noise_floor(&pdp, region).unwrap();
        let expected = sigma2 / axis.n_points() as f64;
        assert!((floor / expected - 1.0).abs() <= 0.1, "{floor} vs {expected}");
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let axis = FrequencyAxis::new(145e9, 146e9, 64).unwrap();
        let angles = AngleGrid::uniform(3, 3).unwrap();
        let scene = Scene::new(vec![], 1.0, 5.0, false).unwrap();
        let ant = AntennaModel::default();
        let a = scene_to_sweeps(&scene, &ant, &axis, &angles, 5).unwrap();
        let b = scene_to_sweeps(&scene, &ant, &axis, &angles, 5).unwrap();
        let c = scene_to_sweeps(&scene, &ant, &axis, &angles, 6).unwrap();
        assert_eq!(a.samples(), b.samples());
        assert_ne!(a.samples(), c.samples());
        let mean_power = a.samples().iter().map(|h| h.norm_sqr()).sum::<f64>() / a.samples().len() as f64;
        assert!((mean_power - 1.0).abs() < 0.15, "{mean_power}");
    }

    #[test]
    fn friis_ray_path_loss() {
        let axis = FrequencyAxis::default();
        let angles = AngleGrid::full_circle(10.0).unwrap();
        let d = 10.0;
        let scene = one(Mpc::line_of_sight(d, axis.center(), 0.0, 180.0).unwrap(), 0.0, d);
        let grid = scene_to_sweeps(&scene, &AntennaModel::default(), &axis, &angles, 1).unwrap();
        let rec = condense(&grid, &CalibrationTrace::unit(axis), &ProcessingConfig::default()).unwrap();
        let fspl = 20.0 * (4.0 * PI * d * axis.center() / SPEED_OF_LIGHT).log10();
        assert!((rec.pl_omni - fspl).abs() < 0.1, "{} vs {fspl}", rec.pl_omni);
        assert!((rec.pl_maxdir - fspl).abs() < 0.1);
        assert_eq!((rec.maxdir_tx_deg, rec.maxdir_rx_deg), (0.0, 180.0));
    }

    #[test]
    fn fully_noise_scene_is_unusable() {
        let axis = FrequencyAxis::default();
        let angles = AngleGrid::full_circle(10.0).unwrap();
        let scene = Scene::new(vec![], 1e-6, 20.0, false).unwrap();
        let grid = scene_to_sweeps(&scene, &AntennaModel::default(), &axis, &angles, 2).unwrap();
        let err = condense(&grid, &CalibrationTrace::unit(axis), &ProcessingConfig::default()).unwrap_err();
        assert!(matches!(err, Error::UnusableLink(_)), "{err}");
    }

    #[test]
    fn oracle_single_and_pair() {
        let axis = FrequencyAxis::default();
        let angles = AngleGrid::full_circle(10.0).unwrap();
        let ant = AntennaModel::default();
        let cfg = ProcessingConfig::default();
        let amp = Complex64::new(1e-3, 0.0);
        let rec = oracle_params(&one(Mpc::new(40e-9, 0.0, 0.0, amp).unwrap(), 0.0, 3.0), &angles, &ant, &axis, &cfg)
            .unwrap();
        assert_eq!(rec.ds_omni, 0.0);
        assert_eq!(rec.k1_omni, f64::INFINITY);
        assert_relative_eq!(rec.pl_omni, 60.0, epsilon = 1e-9);
        assert!(rec.as_tx > 0.0 && rec.as_tx < 0.3);

        let two = Scene::new(
            vec![Mpc::new(0.0, 0.0, 0.0, amp).unwrap(), Mpc::new(10e-9, 0.0, 0.0, amp).unwrap()],
            0.0,
            1.0,
            true,
        )
        .unwrap();
        let rec = oracle_params(&two, &angles, &ant, &axis, &cfg).unwrap();
        assert_relative_eq!(rec.ds_omni, 5e-9, max_relative = 1e-12);
        assert_relative_eq!(rec.k1_omni, 0.0, epsilon = 1e-12);
        let empty = Scene::new(vec![], 0.0, 1.0, true).unwrap();
        assert!(matches!(oracle_params(&empty, &angles, &ant, &axis, &cfg), Err(Error::Empty(_))));
    }

    #[test]
    fn oracle_gates_late_mpcs() {
        let axis = FrequencyAxis::default();
        let angles = AngleGrid::uniform(4, 4).unwrap();
        let amp = Complex64::new(1e-3, 0.0);
        let scene = Scene::new(
            vec![Mpc::new(20e-9, 0.0, 0.0, amp).unwrap(), Mpc::new(900e-9, 0.0, 0.0, amp).unwrap()],
            0.0,
            5.0,
            true,
        )
        .unwrap();
        let rec = oracle_params(&scene, &angles, &AntennaModel::default(), &axis, &ProcessingConfig::default()).unwrap();
        assert_relative_eq!(rec.pl_omni, 60.0, epsilon = 1e-9);
    }

    #[test]
    fn pipeline_matches_oracle_on_grid() {
        let axis = FrequencyAxis::default();
        let angles = AngleGrid::full_circle(30.0).unwrap();
        let ant = AntennaModel::default();
        let cfg = ProcessingConfig::default();
        for seed in 0..4 {
            let scene = random_on_grid_scene(&axis, &angles, &cfg, 5, seed).unwrap();
            let truth = oracle_params(&scene, &angles, &ant, &axis, &cfg).unwrap();
            let grid = scene_to_sweeps(&scene, &ant, &axis, &angles, seed).unwrap();
            let got = condense(&grid, &CalibrationTrace::unit(axis), &cfg).unwrap();
            assert!((got.pl_omni - truth.pl_omni).abs() <= 0.1, "{got:?} {truth:?}");
            assert!((got.pl_maxdir - truth.pl_maxdir).abs() <= 0.1);
            assert!((got.ds_omni - truth.ds_omni).abs() <= 0.5 * axis.delay_resolution());
            assert!((got.as_tx - truth.as_tx).abs() <= 0.02);
            assert!((got.k1_omni - truth.k1_omni).abs() <= 0.2, "{} {}", got.k1_omni, truth.k1_omni);
        }
    }

    #[test]
    fn gated_noiseless_profile_keeps_all_power() {
        let axis = FrequencyAxis::default();
        let amp = Complex64::new(1e-2, 0.0);
        let scene = one(Mpc::new(100.0 * axis.delay_resolution(), 0.0, 0.0, amp).unwrap(), 0.0, 10.0);
        let angles = AngleGrid::from_lists(vec![0.0], vec![0.0], 10.0).unwrap();
        let grid = scene_to_sweeps(&scene, &AntennaModel::default(), &axis, &angles, 1).unwrap();
        let pdp = with_noise_floor(compute_pdp(grid.response(0, 0), &axis).unwrap(), 833.33e-9).unwrap();
        let gated = apply_gating(&pdp, 833.33e-9, 6.0).unwrap();
        assert_relative_eq!(path_loss(&gated).unwrap(), 40.0, epsilon = 1e-9);
    }
}
