//! Little-endian binary sweep files.
//!
//! Layout (56-byte header, then payload):
//!
//! | offset | type      | field                          |
//! |--------|-----------|--------------------------------|
//! | 0      | [u8; 8]   | magic `THZSWEEP`               |
//! | 8      | u32       | format version (1)             |
//! | 12     | u32       | N frequency points             |
//! | 16     | u32       | n_tx azimuths                  |
//! | 20     | u32       | n_rx azimuths                  |
//! | 24     | f64       | f_start, Hz                    |
//! | 32     | f64       | f_stop, Hz                     |
//! | 40     | f64       | Tx-Rx distance, m              |
//! | 48     | u8        | LoS flag (0/1)                 |
//! | 49     | [u8; 7]   | reserved, zero                 |
//!
//! The payload holds `N * n_tx * n_rx` samples as interleaved `(re, im)`
//! f64 pairs, frequency fastest, then Tx azimuth, then Rx azimuth. Azimuth
//! `i` of an end with `n` positions is `i * 360 / n` degrees. Calibration
//! traces use the same format with `n_tx = n_rx = 1`.
//!
//! Converting other data into this format only requires resampling each
//! beam-pair sweep to the header's frequency grid and ordering the payload
//! as above.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sounding::{AngleGrid, CalibrationTrace, FrequencyAxis, LinkMeta, SweepGrid};

pub const MAGIC: &[u8; 8] = b"THZSWEEP";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 56;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepHeader {
    pub n_points: u32,
    pub n_tx: u32,
    pub n_rx: u32,
    pub f_start: f64,
    pub f_stop: f64,
    pub distance: f64,
    pub los: bool,
}

impl SweepHeader {
    fn n_samples(&self) -> usize {
        self.n_points as usize * self.n_tx as usize * self.n_rx as usize
    }

    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..8].copy_from_slice(MAGIC);
        out[8..12].copy_from_slice(&VERSION.to_le_bytes());
        out[12..16].copy_from_slice(&self.n_points.to_le_bytes());
        out[16..20].copy_from_slice(&self.n_tx.to_le_bytes());
        out[20..24].copy_from_slice(&self.n_rx.to_le_bytes());
        out[24..32].copy_from_slice(&self.f_start.to_le_bytes());
        out[32..40].copy_from_slice(&self.f_stop.to_le_bytes());
        out[40..48].copy_from_slice(&self.distance.to_le_bytes());
        out[48] = self.los as u8;
        out
    }

    fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::SweepFormat(format!(
                "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        if &bytes[0..8] != MAGIC {
            return Err(Error::SweepFormat("bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(8);
        if version != VERSION {
            return Err(Error::SweepFormat(format!("unsupported version {version}")));
        }
        let los = match bytes[48] {
            0 => false,
            1 => true,
            v => return Err(Error::SweepFormat(format!("bad LoS flag {v}"))),
        };
        Ok(Self {
            n_points: u32_at(12),
            n_tx: u32_at(16),
            n_rx: u32_at(20),
            f_start: f64_at(24),
            f_stop: f64_at(32),
            distance: f64_at(40),
            los,
        })
    }

    pub fn axis(&self) -> Result<FrequencyAxis> {
        FrequencyAxis::new(self.f_start, self.f_stop, self.n_points as usize)
    }

    pub fn angles(&self) -> Result<AngleGrid> {
        AngleGrid::uniform(self.n_tx as usize, self.n_rx as usize)
    }
}

fn encode_samples(header: &SweepHeader, samples: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * samples.len());
    out.extend_from_slice(&header.encode());
    for s in samples {
        out.extend_from_slice(&s.re.to_le_bytes());
        out.extend_from_slice(&s.im.to_le_bytes());
    }
    out
}

/// Header plus payload, with the payload length checked against the header.
pub fn decode_samples(bytes: &[u8]) -> Result<(SweepHeader, Vec<Complex64>)> {
    let header = SweepHeader::decode(bytes)?;
    let payload = &bytes[HEADER_LEN..];
    let expected = header.n_samples() * 16;
    if payload.len() != expected {
        return Err(Error::Dimension(format!(
            "header declares {}x{}x{} samples ({expected} bytes) but payload holds {} bytes ({} complete sweeps)",
            header.n_points,
            header.n_tx,
            header.n_rx,
            payload.len(),
            payload.len() / (16 * (header.n_points as usize).max(1)),
        )));
    }
    let samples = payload
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect();
    Ok((header, samples))
}

fn check_writable_grid(angles: &AngleGrid) -> Result<()> {
    let uniform = AngleGrid::uniform(angles.n_tx(), angles.n_rx())?;
    if &uniform != angles {
        return Err(Error::SweepFormat(
            "only full-circle grids starting at 0 degrees can be stored".into(),
        ));
    }
    Ok(())
}

pub fn encode_sweep(grid: &SweepGrid) -> Result<Vec<u8>> {
    check_writable_grid(grid.angles())?;
    let axis = grid.axis();
    let header = SweepHeader {
        n_points: axis.n_points() as u32,
        n_tx: grid.angles().n_tx() as u32,
        n_rx: grid.angles().n_rx() as u32,
        f_start: axis.f_start(),
        f_stop: axis.f_stop(),
        distance: grid.meta.distance,
        los: grid.meta.los,
    };
    Ok(encode_samples(&header, grid.samples()))
}

pub fn decode_sweep(bytes: &[u8], id: &str) -> Result<SweepGrid> {
    let (header, samples) = decode_samples(bytes)?;
    let meta = LinkMeta::new(id, header.distance, header.los);
    SweepGrid::new(header.axis()?, header.angles()?, samples, meta)
}

pub fn write_sweep(path: &Path, grid: &SweepGrid) -> Result<()> {
    fs::write(path, encode_sweep(grid)?)?;
    Ok(())
}

/// Reads a sweep file; the link id is taken from the file stem.
pub fn read_sweep(path: &Path) -> Result<SweepGrid> {
    let bytes = fs::read(path)?;
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    decode_sweep(&bytes, id)
}

pub fn write_calibration(path: &Path, cal: &CalibrationTrace) -> Result<()> {
    let axis = cal.axis();
    let header = SweepHeader {
        n_points: axis.n_points() as u32,
        n_tx: 1,
        n_rx: 1,
        f_start: axis.f_start(),
        f_stop: axis.f_stop(),
        distance: 0.0,
        los: true,
    };
    fs::write(path, encode_samples(&header, cal.samples()))?;
    Ok(())
}

pub fn read_calibration(path: &Path) -> Result<CalibrationTrace> {
    let (header, samples) = decode_samples(&fs::read(path)?)?;
    if header.n_tx != 1 || header.n_rx != 1 {
        return Err(Error::Dimension(format!(
            "calibration file must hold a single 1x1 sweep, found {}x{}",
            header.n_tx, header.n_rx
        )));
    }
    CalibrationTrace::new(header.axis()?, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, n_az: usize) -> SweepGrid {
        let axis = FrequencyAxis::new(145e9, 146e9, n).unwrap();
        let angles = AngleGrid::uniform(n_az, n_az).unwrap();
        let samples = (0..n * n_az * n_az)
            .map(|i| Complex64::new(i as f64 * 0.25, -(i as f64).sqrt()))
            .collect();
        SweepGrid::new(axis, angles, samples, LinkMeta::new("x", 12.5, false)).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let g = grid(1001, 4);
        let back = decode_sweep(&encode_sweep(&g).unwrap(), "x").unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn default_dimensions_load() {
        let g = grid(1001, 36);
        let bytes = encode_sweep(&g).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 1001 * 36 * 36 * 16);
        let back = decode_sweep(&bytes, "x").unwrap();
        assert_eq!((back.axis().n_points(), back.angles().n_tx(), back.angles().n_rx()), (1001, 36, 36));
    }

    #[test]
    fn short_payload_is_a_dimension_error() {
        let mut bytes = encode_sweep(&grid(1001, 1)).unwrap();
        bytes.truncate(bytes.len() - 16);
        assert!(matches!(decode_sweep(&bytes, "x"), Err(Error::Dimension(_))));
    }

    #[test]
    fn corrupt_headers_are_rejected() {
        let good = encode_sweep(&grid(8, 1)).unwrap();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_sweep(&bad, "x"), Err(Error::SweepFormat(_))));
        let mut bad = good.clone();
        bad[8] = 2;
        assert!(matches!(decode_sweep(&bad, "x"), Err(Error::SweepFormat(_))));
        assert!(decode_sweep(&good[..20], "x").is_err());
    }

    #[test]
    fn nan_samples_are_rejected() {
        let mut bytes = encode_sweep(&grid(8, 1)).unwrap();
        bytes[HEADER_LEN..HEADER_LEN + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(decode_sweep(&bytes, "x"), Err(Error::NonFinite { index: 0 })));
    }

    #[test]
    fn partial_grids_cannot_be_stored() {
        let axis = FrequencyAxis::new(145e9, 146e9, 4).unwrap();
        let angles = AngleGrid::from_lists(vec![10.0], vec![10.0], 10.0).unwrap();
        let g = SweepGrid::new(axis, angles, vec![Complex64::new(1.0, 0.0); 4], LinkMeta::new("p", 1.0, true))
            .unwrap();
        assert!(encode_sweep(&g).is_err());
    }

    #[test]
    fn calibration_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let axis = FrequencyAxis::new(145e9, 146e9, 16).unwrap();
        let cal = CalibrationTrace::new(axis, (1..=16).map(|i| Complex64::new(i as f64, 1.0)).collect()).unwrap();
        let path = dir.path().join("cal.sweep");
        write_calibration(&path, &cal).unwrap();
        assert_eq!(read_calibration(&path).unwrap(), cal);
        let sweep_path = dir.path().join("g.sweep");
        write_sweep(&sweep_path, &grid(16, 2)).unwrap();
        assert!(matches!(read_calibration(&sweep_path), Err(Error::Dimension(_))));
        assert_eq!(read_sweep(&sweep_path).unwrap().meta.id, "g");
    }
}
