//! Scene description documents (TOML) for the `synth` verb.
//!
//! ```toml
//! id = "demo"
//! distance_m = 10.0
//! los = true
//! noise_power = 1e-14       # linear, per frequency sample
//! seed = 1
//!
//! [axis]                    # optional, default 145-146 GHz / 1001 points
//! f_start_hz = 145e9
//! f_stop_hz = 146e9
//! n_points = 1001
//!
//! [antenna]                 # optional
//! hpbw_deg = 13.0
//! backlobe_db = -30.0
//!
//! [grid]                    # optional
//! step_deg = 10.0
//!
//! [[mpc]]
//! delay_ns = 33.36
//! aod_deg = 0.0
//! aoa_deg = 180.0
//! power_db = -95.7
//! phase_deg = 0.0
//! ```

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::sounding::{AngleGrid, FrequencyAxis};
use crate::synthscene::{AntennaModel, Mpc, Scene};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxisDoc {
    f_start_hz: f64,
    f_stop_hz: f64,
    n_points: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AntennaDoc {
    hpbw_deg: f64,
    backlobe_db: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDoc {
    step_deg: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MpcDoc {
    delay_ns: f64,
    aod_deg: f64,
    aoa_deg: f64,
    power_db: f64,
    #[serde(default)]
    phase_deg: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    #[serde(default = "default_id")]
    id: String,
    distance_m: f64,
    los: bool,
    #[serde(default)]
    noise_power: f64,
    #[serde(default)]
    seed: u64,
    axis: Option<AxisDoc>,
    antenna: Option<AntennaDoc>,
    grid: Option<GridDoc>,
    #[serde(default)]
    mpc: Vec<MpcDoc>,
}

fn default_id() -> String {
    "scene".into()
}

/// Everything needed to render one synthetic link.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub id: String,
    pub scene: Scene,
    pub axis: FrequencyAxis,
    pub antenna: AntennaModel,
    pub angles: AngleGrid,
    pub seed: u64,
}

pub fn parse_scene(text: &str) -> Result<SceneSpec> {
    let doc: SceneDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let axis = match doc.axis {
        Some(a) => FrequencyAxis::new(a.f_start_hz, a.f_stop_hz, a.n_points)?,
        None => FrequencyAxis::default(),
    };
    let antenna = match doc.antenna {
        Some(a) => AntennaModel::new(a.hpbw_deg, a.backlobe_db)?,
        None => AntennaModel::default(),
    };
    let angles = match doc.grid {
        Some(g) => AngleGrid::full_circle(g.step_deg)?,
        None => AngleGrid::default(),
    };
    let mpcs = doc
        .mpc
        .iter()
        .map(|m| {
            let amp = Complex64::from_polar(10f64.powf(m.power_db / 20.0), m.phase_deg.to_radians());
            Mpc::new(m.delay_ns * 1e-9, m.aod_deg, m.aoa_deg, amp)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SceneSpec {
        id: doc.id,
        scene: Scene::new(mpcs, doc.noise_power, doc.distance_m, doc.los)?,
        axis,
        antenna,
        angles,
        seed: doc.seed,
    })
}

pub fn load_scene(path: &Path) -> Result<SceneSpec> {
    parse_scene(&fs::read_to_string(path)?)
}
