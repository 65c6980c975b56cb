//! Calibration, delay-domain transform, gating and omni-directional
//! reconstruction of double-directional frequency sweeps.
//!
//! Frequency samples are taken at `f_start + n * spacing` for
//! `n in 0..n_points`, with `spacing = bandwidth / (n_points - 1)`. The inverse
//! DFT of a sweep therefore yields `n_points` delay bins of width
//! `1 / (n_points * spacing)` covering an unambiguous span of `1 / spacing`
//! (1 us for 1001 points over 1 GHz).

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Default delay gate, 250 m of excess run length.
pub const DEFAULT_GATE_DELAY: f64 = 833.33e-9;
/// Default noise threshold above the noise floor.
pub const DEFAULT_NOISE_MARGIN_DB: f64 = 6.0;
/// Bins re-interpreted by wrap-around correction must precede the first
/// arrival by more than this many bins.
pub const WRAP_GUARD_BINS: usize = 5;
/// Trailing fraction of delay bins used for noise-floor estimation.
pub const NOISE_TAIL_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyAxis {
    f_start: f64,
    f_stop: f64,
    n_points: usize,
}

impl FrequencyAxis {
    pub fn new(f_start: f64, f_stop: f64, n_points: usize) -> Result<Self> {
        if !(f_start.is_finite() && f_stop.is_finite()) || f_start < 0.0 {
            return Err(Error::InvalidAxis(format!(
                "frequencies must be finite and non-negative ({f_start}, {f_stop})"
            )));
        }
        if f_stop <= f_start {
            return Err(Error::InvalidAxis(format!(
                "f_stop {f_stop} must exceed f_start {f_start}"
            )));
        }
        if n_points < 2 {
            return Err(Error::InvalidAxis(format!(
                "need at least 2 frequency points, got {n_points}"
            )));
        }
        Ok(Self {
            f_start,
            f_stop,
            n_points,
        })
    }

    pub fn f_start(&self) -> f64 {
        self.f_start
    }

    pub fn f_stop(&self) -> f64 {
        self.f_stop
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn bandwidth(&self) -> f64 {
        self.f_stop - self.f_start
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.f_start + self.f_stop)
    }

    /// Frequency step between adjacent sweep points.
    pub fn spacing(&self) -> f64 {
        self.bandwidth() / (self.n_points - 1) as f64
    }

    pub fn frequency(&self, n: usize) -> f64 {
        self.f_start + n as f64 * self.spacing()
    }

    /// Width of one delay bin after the inverse DFT.
    pub fn delay_resolution(&self) -> f64 {
        1.0 / (self.n_points as f64 * self.spacing())
    }

    /// Unambiguous delay span; delays alias modulo this value.
    pub fn delay_span(&self) -> f64 {
        1.0 / self.spacing()
    }

    pub fn delay(&self, bin: usize) -> f64 {
        bin as f64 * self.delay_resolution()
    }
}

impl Default for FrequencyAxis {
    /// 145-146 GHz, 1001 points.
    fn default() -> Self {
        Self {
            f_start: 145e9,
            f_stop: 146e9,
            n_points: 1001,
        }
    }
}

/// Uniform azimuth grids at both link ends, in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    tx: Vec<f64>,
    rx: Vec<f64>,
    step: f64,
}

impl AngleGrid {
    /// Full-circle grid at both ends with the given step (must divide 360).
    pub fn full_circle(step: f64) -> Result<Self> {
        if !(step > 0.0 && step <= 360.0) {
            return Err(Error::InvalidAngles(format!("step {step} out of range")));
        }
        let count = (360.0 / step).round();
        if (count * step - 360.0).abs() > 1e-9 {
            return Err(Error::InvalidAngles(format!("step {step} does not divide 360")));
        }
        let az: Vec<f64> = (0..count as usize).map(|i| i as f64 * step).collect();
        Ok(Self {
            tx: az.clone(),
            rx: az,
            step,
        })
    }

    /// Full-circle grid with `n_tx` and `n_rx` equally spaced azimuths. Both
    /// counts must give the same step.
    pub fn uniform(n_tx: usize, n_rx: usize) -> Result<Self> {
        if n_tx == 0 || n_rx == 0 {
            return Err(Error::InvalidAngles("empty azimuth grid".into()));
        }
        if n_tx != n_rx {
            return Err(Error::InvalidAngles(format!(
                "Tx and Rx grids must share a step ({n_tx} vs {n_rx} azimuths)"
            )));
        }
        Self::full_circle(360.0 / n_tx as f64)
    }

    /// Explicit azimuth lists. Both must be strictly increasing in [0, 360)
    /// with spacing `step`.
    pub fn from_lists(tx: Vec<f64>, rx: Vec<f64>, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::InvalidAngles(format!("step {step} must be positive")));
        }
        for (side, list) in [("tx", &tx), ("rx", &rx)] {
            if list.is_empty() {
                return Err(Error::InvalidAngles(format!("{side} azimuth list is empty")));
            }
            if list.iter().any(|a| !(0.0..360.0).contains(a)) {
                return Err(Error::InvalidAngles(format!("{side} azimuth outside [0, 360)")));
            }
            for w in list.windows(2) {
                if ((w[1] - w[0]) - step).abs() > 1e-9 {
                    return Err(Error::InvalidAngles(format!(
                        "{side} azimuths not uniformly spaced by {step}"
                    )));
                }
            }
        }
        Ok(Self { tx, rx, step })
    }

    pub fn tx(&self) -> &[f64] {
        &self.tx
    }

    pub fn rx(&self) -> &[f64] {
        &self.rx
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn n_tx(&self) -> usize {
        self.tx.len()
    }

    pub fn n_rx(&self) -> usize {
        self.rx.len()
    }

    pub fn n_pairs(&self) -> usize {
        self.tx.len() * self.rx.len()
    }

    pub fn is_full_circle(&self) -> bool {
        (self.tx.len() as f64 * self.step - 360.0).abs() < 1e-9
            && (self.rx.len() as f64 * self.step - 360.0).abs() < 1e-9
    }

    /// Flat index of a beam pair; Tx varies fastest.
    pub fn pair_index(&self, tx: usize, rx: usize) -> usize {
        tx + self.tx.len() * rx
    }
}

impl Default for AngleGrid {
    /// 10 degree full-circle scan at both ends.
    fn default() -> Self {
        Self::full_circle(10.0).expect("10 degrees divides the circle")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkMeta {
    pub id: String,
    /// Direct Tx-Rx distance in meters.
    pub distance: f64,
    pub los: bool,
    /// Tx/Rx height in meters.
    pub height: f64,
}

impl LinkMeta {
    pub fn new(id: impl Into<String>, distance: f64, los: bool) -> Self {
        Self {
            id: id.into(),
            distance,
            los,
            height: 1.6,
        }
    }
}

/// Transfer functions `H(f, phi_tx, phi_rx)` for all beam pairs of one link.
///
/// Samples are stored with frequency fastest, then Tx azimuth, then Rx
/// azimuth, so each beam pair's sweep is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    axis: FrequencyAxis,
    angles: AngleGrid,
    samples: Vec<Complex64>,
    pub meta: LinkMeta,
}

impl SweepGrid {
    pub fn new(
        axis: FrequencyAxis,
        angles: AngleGrid,
        samples: Vec<Complex64>,
        meta: LinkMeta,
    ) -> Result<Self> {
        let expected = axis.n_points() * angles.n_pairs();
        if samples.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: samples.len(),
            });
        }
        if let Some(index) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            axis,
            angles,
            samples,
            meta,
        })
    }

    pub fn axis(&self) -> &FrequencyAxis {
        &self.axis
    }

    pub fn angles(&self) -> &AngleGrid {
        &self.angles
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    /// Sweep of one beam pair.
    pub fn response(&self, tx: usize, rx: usize) -> &[Complex64] {
        let n = self.axis.n_points();
        let start = n * self.angles.pair_index(tx, rx);
        &self.samples[start..start + n]
    }

    /// Iterator over `(tx, rx, sweep)` in flat pair order.
    pub fn responses(&self) -> impl Iterator<Item = (usize, usize, &[Complex64])> + '_ {
        let n_tx = self.angles.n_tx();
        self.samples
            .chunks_exact(self.axis.n_points())
            .enumerate()
            .map(move |(p, chunk)| (p % n_tx, p / n_tx, chunk))
    }
}

/// Over-the-air calibration response `H_OTA(f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTrace {
    axis: FrequencyAxis,
    samples: Vec<Complex64>,
}

impl CalibrationTrace {
    pub fn new(axis: FrequencyAxis, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != axis.n_points() {
            return Err(Error::LengthMismatch {
                expected: axis.n_points(),
                actual: samples.len(),
            });
        }
        if let Some(index) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        if let Some(index) = samples.iter().position(|s| s.norm_sqr() == 0.0) {
            return Err(Error::ZeroCalibration { index });
        }
        Ok(Self { axis, samples })
    }

    /// Flat unit response; leaves a sweep unchanged.
    pub fn unit(axis: FrequencyAxis) -> Self {
        Self {
            axis,
            samples: vec![Complex64::new(1.0, 0.0); axis.n_points()],
        }
    }

    pub fn axis(&self) -> &FrequencyAxis {
        &self.axis
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }
}

/// Divides every beam-pair sweep by the calibration response.
pub fn calibrate(raw: &SweepGrid, cal: &CalibrationTrace) -> Result<SweepGrid> {
    if raw.axis != cal.axis {
        return Err(Error::AxisMismatch);
    }
    if let Some(index) = cal.samples.iter().position(|s| s.norm_sqr() == 0.0) {
        return Err(Error::ZeroCalibration { index });
    }
    let n = raw.axis.n_points();
    let samples = raw
        .samples
        .chunks_exact(n)
        .flat_map(|chunk| chunk.iter().zip(&cal.samples).map(|(h, c)| h / c))
        .collect();
    Ok(SweepGrid {
        axis: raw.axis,
        angles: raw.angles.clone(),
        samples,
        meta: raw.meta.clone(),
    })
}

/// Power per delay bin, plus the gating state that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    /// Delay of each bin in seconds. Uniform unless wrap-around correction
    /// relocated some bins.
    pub delays: Vec<f64>,
    /// Linear power per bin.
    pub powers: Vec<f64>,
    /// Unambiguous delay span of the sweep that produced the profile.
    pub delay_span: f64,
    pub noise_floor: Option<f64>,
    pub gate_delay: Option<f64>,
    pub threshold: Option<f64>,
    pub gated: bool,
}

impl PowerDelayProfile {
    /// Ungated profile from explicit bins.
    pub fn from_bins(delays: Vec<f64>, powers: Vec<f64>, delay_span: f64) -> Result<Self> {
        if delays.len() != powers.len() {
            return Err(Error::LengthMismatch {
                expected: delays.len(),
                actual: powers.len(),
            });
        }
        if let Some(index) = powers.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "power at bin {index} must be finite and non-negative"
            )));
        }
        Ok(Self {
            delays,
            powers,
            delay_span,
            noise_floor: None,
            gate_delay: None,
            threshold: None,
            gated: false,
        })
    }

    /// Uniform delay axis of `powers.len()` bins with spacing `resolution`.
    pub fn uniform(powers: Vec<f64>, resolution: f64) -> Result<Self> {
        let span = resolution * powers.len() as f64;
        let delays = (0..powers.len()).map(|k| k as f64 * resolution).collect();
        Self::from_bins(delays, powers, span)
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    /// Width of one delay bin.
    pub fn resolution(&self) -> f64 {
        self.delay_span / self.powers.len().max(1) as f64
    }

    /// Marks the profile as gated without changing any bin. Used for
    /// profiles that are already thresholded by construction.
    pub fn mark_gated(mut self) -> Self {
        self.gated = true;
        self
    }
}

/// Reusable inverse-DFT plan for one frequency axis.
#[derive(Clone)]
pub struct DelayTransform {
    axis: FrequencyAxis,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for DelayTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DelayTransform").field("axis", &self.axis).finish()
    }
}

impl DelayTransform {
    pub fn new(axis: FrequencyAxis) -> Self {
        let fft = FftPlanner::new().plan_fft_inverse(axis.n_points());
        Self { axis, fft }
    }

    pub fn axis(&self) -> &FrequencyAxis {
        &self.axis
    }

    /// `|IDFT(h)|^2` normalized by `1/N` so that the bin powers sum to the
    /// mean of `|h|^2` over frequency.
    pub fn pdp(&self, h: &[Complex64]) -> Result<PowerDelayProfile> {
        let n = self.axis.n_points();
        if h.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: h.len(),
            });
        }
        if let Some(index) = h.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        let mut buf = h.to_vec();
        self.fft.process(&mut buf);
        let scale = 1.0 / (n as f64 * n as f64);
        let powers = buf.iter().map(|x| x.norm_sqr() * scale).collect();
        let res = self.axis.delay_resolution();
        Ok(PowerDelayProfile {
            delays: (0..n).map(|k| k as f64 * res).collect(),
            powers,
            delay_span: self.axis.delay_span(),
            noise_floor: None,
            gate_delay: None,
            threshold: None,
            gated: false,
        })
    }
}

/// Directional power delay profile of one sweep.
pub fn compute_pdp(h: &[Complex64], axis: &FrequencyAxis) -> Result<PowerDelayProfile> {
    DelayTransform::new(*axis).pdp(h)
}

/// Half-open delay interval `[start, end)` in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayInterval {
    pub start: f64,
    pub end: f64,
}

impl DelayInterval {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, delay: f64) -> bool {
        delay >= self.start && delay < self.end
    }

    /// The trailing `fraction` of the profile's bins, restricted to delays
    /// beyond `gate_delay`.
    pub fn noise_tail(pdp: &PowerDelayProfile, fraction: f64, gate_delay: f64) -> Self {
        let n = pdp.len();
        let tail = ((n as f64 * fraction).ceil() as usize).clamp(1, n.max(1));
        let first = n.saturating_sub(tail);
        let res = pdp.resolution();
        let start = (first as f64 * res).max(gate_delay.next_up());
        Self {
            start,
            end: pdp.delay_span,
        }
    }
}

/// Mean power over the bins whose delay falls in `region`.
///
/// A region that holds only exact zeros (noiseless synthetic data) yields
/// `f64::MIN_POSITIVE` so that the floor stays strictly positive.
pub fn estimate_noise_floor(pdp: &PowerDelayProfile, region: DelayInterval) -> Result<f64> {
    let (sum, count) = pdp
        .delays
        .iter()
        .zip(&pdp.powers)
        .filter(|(d, _)| region.contains(**d))
        .fold((0.0, 0usize), |(s, c), (_, p)| (s + p, c + 1));
    if count == 0 {
        return Err(Error::EmptyNoiseRegion {
            lo: region.start,
            hi: region.end,
        });
    }
    let mean = sum / count as f64;
    Ok(if mean > 0.0 { mean } else { f64::MIN_POSITIVE })
}

/// Sets the noise floor of `pdp` from its trailing delay bins.
pub fn with_noise_floor(mut pdp: PowerDelayProfile, gate_delay: f64) -> Result<PowerDelayProfile> {
    let region = DelayInterval::noise_tail(&pdp, NOISE_TAIL_FRACTION, gate_delay);
    pdp.noise_floor = Some(estimate_noise_floor(&pdp, region)?);
    Ok(pdp)
}

/// Zeroes every bin that is later than `gate_delay` or weaker than
/// `noise_floor * 10^(margin_db/10)`. Both bounds are inclusive for retained
/// bins.
pub fn apply_gating(
    pdp: &PowerDelayProfile,
    gate_delay: f64,
    margin_db: f64,
) -> Result<PowerDelayProfile> {
    let floor = pdp.noise_floor.ok_or(Error::MissingNoiseFloor)?;
    if !(gate_delay > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gate delay must be positive, got {gate_delay}"
        )));
    }
    if !margin_db.is_finite() {
        return Err(Error::InvalidParameter("noise margin must be finite".into()));
    }
    let threshold = floor * 10f64.powf(margin_db / 10.0);
    let powers = pdp
        .delays
        .iter()
        .zip(&pdp.powers)
        .map(|(&d, &p)| if d <= gate_delay && p >= threshold { p } else { 0.0 })
        .collect();
    Ok(PowerDelayProfile {
        delays: pdp.delays.clone(),
        powers,
        delay_span: pdp.delay_span,
        noise_floor: Some(floor),
        gate_delay: Some(gate_delay),
        threshold: Some(threshold),
        gated: true,
    })
}

fn check_shared_axis(pdps: &[PowerDelayProfile]) -> Result<&PowerDelayProfile> {
    let first = pdps.first().ok_or(Error::Empty("directional profile set"))?;
    for p in pdps {
        if !p.gated {
            return Err(Error::Ungated);
        }
        if p.delays != first.delays {
            return Err(Error::DelayAxisMismatch);
        }
    }
    Ok(first)
}

/// Omni-directional profile: per-bin maximum over all beam pairs.
pub fn reconstruct_omni(pdps: &[PowerDelayProfile]) -> Result<PowerDelayProfile> {
    let first = check_shared_axis(pdps)?;
    let mut powers = first.powers.clone();
    for p in &pdps[1..] {
        for (acc, &v) in powers.iter_mut().zip(&p.powers) {
            if v > *acc {
                *acc = v;
            }
        }
    }
    Ok(PowerDelayProfile {
        delays: first.delays.clone(),
        powers,
        delay_span: first.delay_span,
        noise_floor: None,
        gate_delay: first.gate_delay,
        threshold: None,
        gated: true,
    })
}

/// Gated profiles of every beam pair of a link, in [`AngleGrid::pair_index`]
/// order.
#[derive(Debug, Clone)]
pub struct DirectionalPdps {
    pub angles: AngleGrid,
    pub pdps: Vec<PowerDelayProfile>,
}

impl DirectionalPdps {
    pub fn new(angles: AngleGrid, pdps: Vec<PowerDelayProfile>) -> Result<Self> {
        if pdps.len() != angles.n_pairs() {
            return Err(Error::LengthMismatch {
                expected: angles.n_pairs(),
                actual: pdps.len(),
            });
        }
        Ok(Self { angles, pdps })
    }

    pub fn get(&self, tx: usize, rx: usize) -> &PowerDelayProfile {
        &self.pdps[self.angles.pair_index(tx, rx)]
    }
}

/// Beam pair with the largest delay-integrated power.
#[derive(Debug, Clone)]
pub struct MaxDirection {
    pub tx_index: usize,
    pub rx_index: usize,
    pub tx_deg: f64,
    pub rx_deg: f64,
    pub pdp: PowerDelayProfile,
}

/// Picks the beam pair maximizing total power. Ties go to the smallest Tx
/// azimuth, then the smallest Rx azimuth.
pub fn select_max_dir(set: &DirectionalPdps) -> Result<MaxDirection> {
    check_shared_axis(&set.pdps)?;
    let mut best: Option<(usize, usize, f64)> = None;
    for tx in 0..set.angles.n_tx() {
        for rx in 0..set.angles.n_rx() {
            let total = set.get(tx, rx).total_power();
            if best.is_none_or(|(_, _, b)| total > b) {
                best = Some((tx, rx, total));
            }
        }
    }
    let (tx, rx, total) = best.ok_or(Error::Empty("directional profile set"))?;
    if !(total > 0.0) {
        return Err(Error::UnusableLink(
            "every beam pair is fully gated".into(),
        ));
    }
    Ok(MaxDirection {
        tx_index: tx,
        rx_index: rx,
        tx_deg: set.angles.tx()[tx],
        rx_deg: set.angles.rx()[rx],
        pdp: set.get(tx, rx).clone(),
    })
}

/// Moves bins that precede `first_arrival` by more than the guard interval
/// one delay span later. Powers are untouched.
pub fn correct_wraparound(pdp: &PowerDelayProfile, first_arrival: f64) -> Result<PowerDelayProfile> {
    if !(first_arrival >= 0.0 && first_arrival < pdp.delay_span) {
        return Err(Error::FirstArrivalOutOfSpan(first_arrival));
    }
    let cutoff = first_arrival - WRAP_GUARD_BINS as f64 * pdp.resolution();
    let mut out = pdp.clone();
    for d in out.delays.iter_mut() {
        if *d < cutoff {
            *d += pdp.delay_span;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    /// Direct O(N^2) inverse DFT, normalized like `DelayTransform::pdp`.
    fn dft_sum_pdp(h: &[Complex64]) -> Vec<f64> {
        let n = h.len();
        (0..n)
            .map(|k| {
                let acc: Complex64 = h
                    .iter()
                    .enumerate()
                    .map(|(m, x)| x * Complex64::from_polar(1.0, 2.0 * PI * (m * k % n) as f64 / n as f64))
                    .sum();
                (acc / n as f64).norm_sqr()
            })
            .collect()
    }

    fn tone(axis: &FrequencyAxis, amp: f64, tau: f64) -> Vec<Complex64> {
        (0..axis.n_points())
            .map(|m| Complex64::from_polar(amp, -2.0 * PI * axis.frequency(m) * tau))
            .collect()
    }

    fn argmax(v: &[f64]) -> usize {
        v.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap()
    }

    fn small_grid(raw: impl Fn(usize) -> Complex64, n: usize) -> SweepGrid {
        let axis = FrequencyAxis::new(145e9, 146e9, n).unwrap();
        let angles = AngleGrid::full_circle(120.0).unwrap();
        let samples = (0..n * angles.n_pairs()).map(|i| raw(i % n)).collect();
        SweepGrid::new(axis, angles, samples, LinkMeta::new("t", 1.0, true)).unwrap()
    }

    #[test]
    fn default_axis_covers_one_microsecond() {
        let axis = FrequencyAxis::default();
        assert_relative_eq!(axis.bandwidth(), 1e9);
        assert_relative_eq!(axis.spacing(), 1e6, max_relative = 1e-12);
        assert_relative_eq!(axis.delay_span(), 1e-6, max_relative = 1e-12);
        assert!(FrequencyAxis::new(146e9, 145e9, 10).is_err());
        assert!(FrequencyAxis::new(145e9, 146e9, 1).is_err());
    }

    #[test]
    fn angle_grid_validation() {
        let g = AngleGrid::default();
        assert_eq!(g.n_tx(), 36);
        assert!(g.is_full_circle());
        assert!(AngleGrid::full_circle(7.0).is_err());
        assert!(AngleGrid::from_lists(vec![0.0, 10.0, 25.0], vec![0.0], 10.0).is_err());
        assert!(AngleGrid::from_lists(vec![0.0, 10.0], vec![0.0, 10.0], 10.0).is_ok());
    }

    #[test]
    fn self_calibration_gives_ones() {
        let f = |m: usize| Complex64::new(1.0 + m as f64, -0.5 * m as f64);
        let grid = small_grid(f, 16);
        let cal = CalibrationTrace::new(*grid.axis(), (0..16).map(f).collect()).unwrap();
        let out = calibrate(&grid, &cal).unwrap();
        for s in out.samples() {
            assert_relative_eq!(s.re, 1.0, epsilon = 1e-15);
            assert_relative_eq!(s.im, 0.0, epsilon = 1e-15);
        }
        assert_eq!(out.meta, grid.meta);
    }

    #[test]
    fn unit_and_scalar_calibration() {
        let f = |m: usize| Complex64::new(0.3 * m as f64, 1.0);
        let grid = small_grid(f, 8);
        let out = calibrate(&grid, &CalibrationTrace::unit(*grid.axis())).unwrap();
        assert_eq!(out.samples(), grid.samples());

        let doubled = small_grid(|m| f(m) * 2.0, 8);
        let cal = CalibrationTrace::new(*grid.axis(), (0..8).map(f).collect()).unwrap();
        for s in calibrate(&doubled, &cal).unwrap().samples() {
            assert_relative_eq!(s.re, 2.0, epsilon = 1e-15);
            assert_relative_eq!(s.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn calibration_errors() {
        let grid = small_grid(|_| Complex64::new(1.0, 0.0), 8);
        let other = FrequencyAxis::new(140e9, 141e9, 8).unwrap();
        assert!(matches!(
            calibrate(&grid, &CalibrationTrace::unit(other)),
            Err(Error::AxisMismatch)
        ));
        let mut zeros = vec![Complex64::new(1.0, 0.0); 8];
        zeros[3] = Complex64::new(0.0, 0.0);
        assert!(matches!(
            CalibrationTrace::new(*grid.axis(), zeros),
            Err(Error::ZeroCalibration { index: 3 })
        ));
    }

    #[test]
    fn flat_spectrum_is_a_delta() {
        let axis = FrequencyAxis::default();
        let pdp = compute_pdp(&vec![Complex64::new(1.0, 0.0); 1001], &axis).unwrap();
        assert_relative_eq!(pdp.powers[0], 1.0, max_relative = 1e-12);
        assert!(pdp.powers[1..].iter().all(|&p| p <= 1e-20));
        assert!(!pdp.gated && pdp.noise_floor.is_none());
    }

    #[test]
    fn single_tone_matches_dft_sum() {
        let axis = FrequencyAxis::default();
        let h = tone(&axis, 1.0, 100e-9);
        let pdp = compute_pdp(&h, &axis).unwrap();
        let oracle = dft_sum_pdp(&h);
        assert_eq!(argmax(&oracle), 100);
        assert_eq!(argmax(&pdp.powers), 100);
        for (a, b) in pdp.powers.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12 * oracle[100]);
        }
    }

    #[test]
    fn two_tones_match_dft_sum() {
        let axis = FrequencyAxis::default();
        let res = axis.delay_resolution();
        // on-grid delays: bins 0 and 50
        let h: Vec<Complex64> = tone(&axis, 1.0, 0.0)
            .iter()
            .zip(tone(&axis, 0.5, 50.0 * res))
            .map(|(a, b)| a + b)
            .collect();
        let pdp = compute_pdp(&h, &axis).unwrap();
        let oracle = dft_sum_pdp(&h);
        assert_relative_eq!(oracle[0] / oracle[50], 4.0, max_relative = 1e-9);
        assert_relative_eq!(pdp.powers[0] / pdp.powers[50], 4.0, max_relative = 1e-9);
        let mut sorted: Vec<usize> = (0..1001).collect();
        sorted.sort_by(|&a, &b| pdp.powers[b].total_cmp(&pdp.powers[a]));
        let mut top = [sorted[0], sorted[1]];
        top.sort();
        assert_eq!(top, [0, 50]);
    }

    #[test]
    fn pdp_input_errors() {
        let axis = FrequencyAxis::new(0.0, 1.0, 4).unwrap();
        assert!(matches!(
            compute_pdp(&[Complex64::new(1.0, 0.0); 3], &axis),
            Err(Error::LengthMismatch { .. })
        ));
        let mut h = vec![Complex64::new(1.0, 0.0); 4];
        h[2].re = f64::NAN;
        assert!(matches!(compute_pdp(&h, &axis), Err(Error::NonFinite { index: 2 })));
    }

    #[test]
    fn noise_floor_means() {
        let pdp = PowerDelayProfile::uniform(vec![1e-8; 20], 1e-9).unwrap();
        let f = estimate_noise_floor(&pdp, DelayInterval::new(5e-9, 15e-9)).unwrap();
        assert_relative_eq!(f, 1e-8, max_relative = 1e-12);

        let pdp = PowerDelayProfile::uniform(vec![5.0, 1e-8, 3e-8], 1e-9).unwrap();
        let f = estimate_noise_floor(&pdp, DelayInterval::new(0.5e-9, 3e-9)).unwrap();
        assert_relative_eq!(f, 2e-8, max_relative = 1e-12);

        assert!(matches!(
            estimate_noise_floor(&pdp, DelayInterval::new(10.0, 11.0)),
            Err(Error::EmptyNoiseRegion { .. })
        ));
    }

    #[test]
    fn noise_tail_lies_beyond_gate() {
        let axis = FrequencyAxis::default();
        let pdp = compute_pdp(&vec![Complex64::new(1.0, 0.0); 1001], &axis).unwrap();
        let region = DelayInterval::noise_tail(&pdp, NOISE_TAIL_FRACTION, DEFAULT_GATE_DELAY);
        let bins = pdp.delays.iter().filter(|d| region.contains(**d)).count();
        assert_eq!(bins, 101);
        assert!(region.start > DEFAULT_GATE_DELAY);
    }

    fn floored(powers: Vec<f64>, res: f64, floor: f64) -> PowerDelayProfile {
        let mut p = PowerDelayProfile::uniform(powers, res).unwrap();
        p.noise_floor = Some(floor);
        p
    }

    #[test]
    fn gating_keeps_clear_tap() {
        // 1 ns bins, tap at 10 ns
        let mut powers = vec![1e-8; 1000];
        powers[10] = 1.0;
        let g = apply_gating(&floored(powers, 1e-9, 1e-8), DEFAULT_GATE_DELAY, 6.0).unwrap();
        assert_eq!(g.powers[10], 1.0);
        assert_eq!(g.powers.iter().filter(|&&p| p > 0.0).count(), 1);
        assert!(g.gated);
        assert_relative_eq!(g.threshold.unwrap(), 1e-8 * 10f64.powf(0.6));
    }

    #[test]
    fn gating_drops_late_tap() {
        let mut powers = vec![0.0; 1000];
        powers[900] = 1.0;
        let g = apply_gating(&floored(powers, 1e-9, 1e-8), 833.33e-9, 6.0).unwrap();
        assert_eq!(g.powers[900], 0.0);
    }

    #[test]
    fn gating_threshold_is_inclusive() {
        let floor = 1e-8;
        let threshold = floor * 10f64.powf(6.0 / 10.0);
        let g = apply_gating(&floored(vec![threshold, threshold * 0.999], 1e-9, floor), 1e-6, 6.0).unwrap();
        assert_eq!(g.powers, vec![threshold, 0.0]);
    }

    #[test]
    fn gating_requires_floor() {
        let p = PowerDelayProfile::uniform(vec![1.0], 1e-9).unwrap();
        assert!(matches!(apply_gating(&p, 1e-6, 6.0), Err(Error::MissingNoiseFloor)));
    }

    fn gated(powers: Vec<f64>) -> PowerDelayProfile {
        PowerDelayProfile::uniform(powers, 1e-9).unwrap().mark_gated()
    }

    #[test]
    fn omni_is_per_bin_max() {
        let omni = reconstruct_omni(&[gated(vec![1.0, 3.0]), gated(vec![2.0, 1.0])]).unwrap();
        assert_eq!(omni.powers, vec![2.0, 3.0]);
        let single = reconstruct_omni(&[gated(vec![0.5, 0.25])]).unwrap();
        assert_eq!(single.powers, vec![0.5, 0.25]);
        assert!(matches!(reconstruct_omni(&[]), Err(Error::Empty(_))));
        let other = PowerDelayProfile::uniform(vec![1.0, 1.0], 2e-9).unwrap().mark_gated();
        assert!(matches!(
            reconstruct_omni(&[gated(vec![1.0, 1.0]), other]),
            Err(Error::DelayAxisMismatch)
        ));
    }

    fn set_from_totals(totals: &[f64], n: usize) -> DirectionalPdps {
        let angles = AngleGrid::full_circle(360.0 / n as f64).unwrap();
        DirectionalPdps::new(angles, totals.iter().map(|&t| gated(vec![t])).collect()).unwrap()
    }

    #[test]
    fn max_dir_picks_strongest_pair() {
        let mut totals = vec![0.1; 9];
        totals[0] = 1.0;
        let best = select_max_dir(&set_from_totals(&totals, 3)).unwrap();
        assert_eq!((best.tx_deg, best.rx_deg), (0.0, 0.0));

        let mut totals = vec![0.1; 9];
        totals[5] = 1.0; // tx 2, rx 1
        let best = select_max_dir(&set_from_totals(&totals, 3)).unwrap();
        assert_eq!((best.tx_index, best.rx_index), (2, 1));
    }

    #[test]
    fn max_dir_tie_break_is_lexicographic() {
        let mut totals = vec![0.0; 9];
        // (tx 1, rx 0) and (tx 0, rx 2) tie; tx 0 wins
        totals[1] = 1.0;
        totals[6] = 1.0;
        let best = select_max_dir(&set_from_totals(&totals, 3)).unwrap();
        assert_eq!((best.tx_index, best.rx_index), (0, 2));
        // same tx, rx decides
        let mut totals = vec![0.0; 9];
        totals[4] = 1.0; // tx 1, rx 1
        totals[7] = 1.0; // tx 1, rx 2
        let best = select_max_dir(&set_from_totals(&totals, 3)).unwrap();
        assert_eq!((best.tx_index, best.rx_index), (1, 1));
    }

    #[test]
    fn max_dir_rejects_fully_gated_link() {
        assert!(matches!(
            select_max_dir(&set_from_totals(&[0.0; 4], 2)),
            Err(Error::UnusableLink(_))
        ));
    }

    #[test]
    fn wraparound_relocates_early_bins() {
        let axis = FrequencyAxis::default();
        let res = axis.delay_resolution();
        let los = 98.4 / crate::SPEED_OF_LIGHT;
        assert_relative_eq!(los, 328e-9, max_relative = 1e-3);
        let mut powers = vec![0.0; 1001];
        let spurious = (10e-9 / res).round() as usize;
        powers[spurious] = 0.1;
        powers[(los / res).round() as usize] = 1.0;
        let mut pdp = PowerDelayProfile::uniform(powers, res).unwrap();
        pdp.delay_span = axis.delay_span();
        let fixed = correct_wraparound(&pdp, los).unwrap();
        assert!((fixed.delays[spurious] - 1010e-9).abs() <= res);
        assert_eq!(fixed.powers, pdp.powers);
        // the LoS bin and everything within the guard stay put
        let los_bin = (los / res).round() as usize;
        assert_eq!(fixed.delays[los_bin], pdp.delays[los_bin]);
        assert_eq!(fixed.delays[los_bin - WRAP_GUARD_BINS], pdp.delays[los_bin - WRAP_GUARD_BINS]);
    }

    #[test]
    fn wraparound_identity_and_errors() {
        let pdp = PowerDelayProfile::uniform(vec![1.0; 100], 1e-9).unwrap();
        assert_eq!(correct_wraparound(&pdp, 0.0).unwrap(), pdp);
        assert!(matches!(
            correct_wraparound(&pdp, 2e-7),
            Err(Error::FirstArrivalOutOfSpan(_))
        ));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn sweep(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
            prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
                .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
        }

        fn gated_set(n_pairs: usize) -> impl Strategy<Value = Vec<PowerDelayProfile>> {
            prop::collection::vec(prop::collection::vec(0.0f64..1.0, 32), n_pairs).prop_map(|sets| {
                sets.into_iter()
                    .map(|p| {
                        let pdp = PowerDelayProfile::uniform(p, 1e-9).unwrap();
                        apply_gating(&with_noise_floor(pdp, 20e-9).unwrap(), 25e-9, 0.0).unwrap()
                    })
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn parseval_holds(h in sweep(257)) {
                let axis = FrequencyAxis::new(145e9, 146e9, 257).unwrap();
                let pdp = compute_pdp(&h, &axis).unwrap();
                let mean = h.iter().map(|x| x.norm_sqr()).sum::<f64>() / h.len() as f64;
                prop_assert!((pdp.total_power() - mean).abs() <= 1e-9 * mean);
            }

            #[test]
            fn global_phase_leaves_pdp_unchanged(h in sweep(128), theta in 0.0f64..6.3) {
                let axis = FrequencyAxis::new(145e9, 146e9, 128).unwrap();
                let rot: Vec<Complex64> = h.iter().map(|x| x * Complex64::from_polar(1.0, theta)).collect();
                let a = compute_pdp(&h, &axis).unwrap();
                let b = compute_pdp(&rot, &axis).unwrap();
                let peak = a.powers.iter().copied().fold(0.0, f64::max);
                for (x, y) in a.powers.iter().zip(&b.powers) {
                    prop_assert!((x - y).abs() <= 1e-12 * peak);
                }
            }

            #[test]
            fn gating_is_idempotent(p in prop::collection::vec(0.0f64..1.0, 64), margin in 0.0f64..10.0) {
                let pdp = with_noise_floor(PowerDelayProfile::uniform(p, 1e-9).unwrap(), 40e-9).unwrap();
                let once = apply_gating(&pdp, 40e-9, margin).unwrap();
                let twice = apply_gating(&once, 40e-9, margin).unwrap();
                prop_assert_eq!(once, twice);
            }

            #[test]
            fn omni_dominates_every_direction(set in gated_set(9)) {
                let omni = reconstruct_omni(&set).unwrap();
                for p in &set {
                    for (o, v) in omni.powers.iter().zip(&p.powers) {
                        prop_assert!(o >= v);
                    }
                }
                let dir = DirectionalPdps::new(AngleGrid::uniform(3, 3).unwrap(), set).unwrap();
                if let Ok(best) = select_max_dir(&dir) {
                    prop_assert!(omni.total_power() >= best.pdp.total_power());
                }
            }

            #[test]
            fn wraparound_keeps_powers(p in prop::collection::vec(0.0f64..1.0, 100), first in 0.0f64..99e-9) {
                let pdp = PowerDelayProfile::uniform(p, 1e-9).unwrap();
                let fixed = correct_wraparound(&pdp, first).unwrap();
                prop_assert_eq!(&fixed.powers, &pdp.powers);
                prop_assert!(fixed.delays.iter().all(|d| *d >= first - 5e-9 - 1e-18));
            }
        }
    }
}
