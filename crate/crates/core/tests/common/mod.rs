//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use thzchan::chanmodel::{draw_links, Condition, ModelTable, View};
use thzchan::io::{write_calibration, write_sweep, DatasetManifest, LinkEntry};
use thzchan::sounding::{AngleGrid, CalibrationTrace, FrequencyAxis};
use thzchan::synthscene::{scene_to_sweeps, AntennaModel, Mpc, Scene};
use thzchan::SPEED_OF_LIGHT;

/// LoS link distances of the measured campaign, meters.
pub const LOS_DISTANCES: [f64; 21] = [
    2.5, 10.0, 14.0, 24.0, 35.0, 60.0, 80.0, 93.0, 1.0, 2.0, 5.0, 15.0, 60.0, 80.0, 98.4, 25.0, 35.0, 40.0, 40.0,
    28.0, 28.0,
];

/// NLoS link distances of the measured campaign, meters.
pub const NLOS_DISTANCES: [f64; 17] = [
    2.25, 7.0, 10.0, 27.0, 25.0, 23.0, 60.0, 80.0, 93.0, 25.0, 35.0, 35.0, 40.0, 40.0, 60.0, 80.0, 97.59,
];

/// Two-MPC scene whose omni path loss follows a model draw: the taps split
/// the drawn total power by the drawn κ₁ and sit on grid angles and bins.
pub fn model_scene(table: &ModelTable, d: f64, los: bool, index: usize, seed: u64, axis: &FrequencyAxis, angles: &AngleGrid) -> Scene {
    let cond = Condition::from_los(los);
    let draw = draw_links(table, &[d], cond, View::Omni, seed.wrapping_add(index as u64)).unwrap().remove(0);
    let total = 10f64.powf(-draw.path_loss / 10.0);
    let ratio = 10f64.powf(-draw.kappa1 / 10.0).clamp(0.01, 1.0);
    let res = axis.delay_resolution();
    let b0 = (d / SPEED_OF_LIGHT / res).ceil() as usize + 1;
    let gap = ((2.0 * draw.delay_spread / res).round() as usize).clamp(2, 400);
    let n = angles.n_tx();
    let a = |k: usize| angles.tx()[k % n];
    let mpcs = vec![
        Mpc::new(b0 as f64 * res, a(index), a(index + n / 2), Complex64::from_polar((total / (1.0 + ratio)).sqrt(), 0.3))
            .unwrap(),
        Mpc::new(
            (b0 + gap) as f64 * res,
            a(index + 3),
            a(index + n / 2 + 5),
            Complex64::from_polar((total * ratio / (1.0 + ratio)).sqrt(), 1.1),
        )
        .unwrap(),
    ];
    Scene::new(mpcs, total * 1e-3, d, los).unwrap()
}

/// Writes sweeps, a unit calibration and a manifest for the given links;
/// returns the manifest path.
pub fn write_campaign(dir: &Path, links: &[(f64, bool)], seed: u64, step: f64) -> PathBuf {
    let axis = FrequencyAxis::default();
    let angles = AngleGrid::full_circle(step).unwrap();
    let ant = AntennaModel::default();
    let table = ModelTable::builtin();
    fs::create_dir_all(dir).unwrap();
    write_calibration(&dir.join("cal.sweep"), &CalibrationTrace::unit(axis)).unwrap();
    let mut entries = Vec::new();
    for (i, &(d, los)) in links.iter().enumerate() {
        let id = format!("{}{:02}", if los { "L" } else { "N" }, i);
        let scene = model_scene(&table, d, los, i, seed, &axis, &angles);
        let grid = scene_to_sweeps(&scene, &ant, &axis, &angles, seed ^ i as u64).unwrap();
        let sweep = PathBuf::from(format!("{id}.sweep"));
        write_sweep(&dir.join(&sweep), &grid).unwrap();
        entries.push(LinkEntry {
            id,
            sweep,
            calibration: PathBuf::from("cal.sweep"),
            distance_m: d,
            los,
            tx: format!("T{i}"),
            rx: format!("R{i}"),
        });
    }
    let manifest = DatasetManifest { campaign: Default::default(), links: entries };
    let path = dir.join("manifest.toml");
    fs::write(&path, manifest.to_toml()).unwrap();
    path
}

/// The 38-link layout of the measured campaign.
pub fn reference_layout() -> Vec<(f64, bool)> {
    LOS_DISTANCES
        .iter()
        .map(|&d| (d, true))
        .chain(NLOS_DISTANCES.iter().map(|&d| (d, false)))
        .collect()
}
