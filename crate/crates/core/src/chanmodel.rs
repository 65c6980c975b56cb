//! Consolidated statistical channel model, stochastic parameter generator
//! and link-budget arithmetic.
//!
//! Unit conventions of the table values:
//! - path loss, shadowing and κ₁ in dB;
//! - delay spread as `10 log10(seconds)` ("dB-s"), so `-71.92` is 64.3 ns;
//! - angular spread as `log10` of the dimensionless Fleury spread.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance range covered by the measurements behind the built-in table.
pub const CALIBRATED_RANGE_M: (f64, f64) = (1.0, 100.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    PathLoss,
    DelaySpread,
    AngularSpread,
    Kappa1,
    Shadowing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Los,
    Nlos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum View {
    #[serde(rename = "omni")]
    Omni,
    #[serde(rename = "max_dir")]
    MaxDir,
    /// Parameters pooled over both link ends (angular spread).
    #[serde(rename = "n/a")]
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    LinearLogd,
    Statistical,
}

/// Which regression produced a row. Path loss and shadowing come in both
/// flavors; the other parameters only use `Standard`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Standard,
    Ols,
}

macro_rules! text_enum {
    ($ty:ty { $($variant:path => $text:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $text),+ })
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($variant),)+
                    other => Err(Error::Parse(format!(
                        "unknown {} '{other}'", stringify!($ty).to_ascii_lowercase()
                    ))),
                }
            }
        }
    };
}

text_enum!(Parameter {
    Parameter::PathLoss => "path_loss",
    Parameter::DelaySpread => "delay_spread",
    Parameter::AngularSpread => "angular_spread",
    Parameter::Kappa1 => "kappa1",
    Parameter::Shadowing => "shadowing",
});
text_enum!(Condition { Condition::Los => "los", Condition::Nlos => "nlos" });
text_enum!(View { View::Omni => "omni", View::MaxDir => "max_dir", View::NotApplicable => "n/a" });
text_enum!(FitKind { FitKind::LinearLogd => "linear_logd", FitKind::Statistical => "statistical" });
text_enum!(Estimator { Estimator::Standard => "standard", Estimator::Ols => "ols" });

impl Condition {
    pub fn from_los(los: bool) -> Self {
        if los {
            Condition::Los
        } else {
            Condition::Nlos
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    Db,
    DbSeconds,
    Log10,
}

impl Units {
    pub fn as_str(&self) -> &'static str {
        match self {
            Units::Db => "dB",
            Units::DbSeconds => "dB-s",
            Units::Log10 => "log10",
        }
    }

    pub fn for_parameter(p: Parameter) -> Self {
        match p {
            Parameter::PathLoss | Parameter::Shadowing | Parameter::Kappa1 => Units::Db,
            Parameter::DelaySpread => Units::DbSeconds,
            Parameter::AngularSpread => Units::Log10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowKey {
    pub parameter: Parameter,
    pub condition: Condition,
    pub view: View,
    pub kind: FitKind,
    pub estimator: Estimator,
}

impl RowKey {
    pub fn new(parameter: Parameter, condition: Condition, view: View, kind: FitKind) -> Self {
        Self {
            parameter,
            condition,
            view,
            kind,
            estimator: Estimator::Standard,
        }
    }

    pub fn ols(mut self) -> Self {
        self.estimator = Estimator::Ols;
        self
    }
}

impl fmt::Display for RowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}/{}/{}",
            self.parameter, self.condition, self.view, self.kind, self.estimator
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowValues {
    Linear { alpha: f64, beta: f64 },
    Statistical { mu: f64, sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelRow {
    pub key: RowKey,
    pub values: RowValues,
}

impl ModelRow {
    pub fn linear(key: RowKey, alpha: f64, beta: f64) -> Self {
        Self { key, values: RowValues::Linear { alpha, beta } }
    }

    pub fn statistical(key: RowKey, mu: f64, sigma: f64) -> Self {
        Self { key, values: RowValues::Statistical { mu, sigma } }
    }

    pub fn units(&self) -> Units {
        Units::for_parameter(self.key.parameter)
    }

    fn validate(&self) -> Result<()> {
        let consistent = matches!(
            (self.key.kind, self.values),
            (FitKind::LinearLogd, RowValues::Linear { .. })
                | (FitKind::Statistical, RowValues::Statistical { .. })
        );
        if !consistent {
            return Err(Error::ModelTable(format!("row {} has values of the wrong kind", self.key)));
        }
        match self.values {
            RowValues::Linear { alpha, beta } if !(alpha.is_finite() && beta.is_finite()) => {
                Err(Error::ModelTable(format!("row {} has non-finite coefficients", self.key)))
            }
            RowValues::Statistical { mu, sigma } if !(mu.is_finite() && sigma >= 0.0 && sigma.is_finite()) => {
                Err(Error::ModelTable(format!("row {}: need finite mu and sigma >= 0", self.key)))
            }
            _ => Ok(()),
        }
    }
}

/// Validated model table holding every row the generator needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTable {
    rows: BTreeMap<RowKey, ModelRow>,
}

fn required_keys() -> Vec<RowKey> {
    use FitKind::*;
    use Parameter::*;
    let mut keys = Vec::new();
    for c in [Condition::Los, Condition::Nlos] {
        for v in [View::Omni, View::MaxDir] {
            keys.push(RowKey::new(PathLoss, c, v, LinearLogd));
            keys.push(RowKey::new(Shadowing, c, v, Statistical).ols());
            keys.push(RowKey::new(DelaySpread, c, v, Statistical));
            keys.push(RowKey::new(Kappa1, c, v, Statistical));
        }
        keys.push(RowKey::new(AngularSpread, c, View::NotApplicable, Statistical));
    }
    keys
}

impl ModelTable {
    /// Builds a table, rejecting invalid rows, duplicates and missing
    /// generator inputs.
    pub fn from_rows(rows: impl IntoIterator<Item = ModelRow>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for row in rows {
            row.validate()?;
            if map.insert(row.key, row).is_some() {
                return Err(Error::ModelTable(format!("duplicate row {}", row.key)));
            }
        }
        for key in required_keys() {
            if !map.contains_key(&key) {
                return Err(Error::ModelTable(format!("missing row {key}")));
            }
        }
        Ok(Self { rows: map })
    }

    /// Summary model of the urban D2D campaign at 145-146 GHz, 1-100 m.
    pub fn builtin() -> Self {
        use Condition::*;
        use FitKind::*;
        use Parameter::*;
        use View::*;
        let lin = |p, c, v, a, b| ModelRow::linear(RowKey::new(p, c, v, LinearLogd), a, b);
        let lin_ols = |p, c, v, a, b| ModelRow::linear(RowKey::new(p, c, v, LinearLogd).ols(), a, b);
        let stat = |p, c, v, m, s| ModelRow::statistical(RowKey::new(p, c, v, Statistical), m, s);
        let stat_ols = |p, c, v, m, s| ModelRow::statistical(RowKey::new(p, c, v, Statistical).ols(), m, s);
        let rows = vec![
            lin(PathLoss, Los, Omni, 76.77, 1.74),
            lin(PathLoss, Los, MaxDir, 76.77, 1.78),
            lin_ols(PathLoss, Los, Omni, 76.53, 1.8),
            lin_ols(PathLoss, Los, MaxDir, 76.42, 1.86),
            lin(DelaySpread, Los, Omni, -82.7, 4.65),
            lin(DelaySpread, Los, MaxDir, -86.96, 4.26),
            lin(Kappa1, Los, Omni, 14.95, -3.39),
            lin(Kappa1, Los, MaxDir, 11.47, 6.19),
            lin(AngularSpread, Los, NotApplicable, -0.68, 0.12),
            lin(AngularSpread, Nlos, NotApplicable, -0.02, -0.17),
            lin(PathLoss, Nlos, Omni, 95.45, 1.49),
            lin(PathLoss, Nlos, MaxDir, 100.47, 1.35),
            lin_ols(PathLoss, Nlos, Omni, 96.26, 1.53),
            lin_ols(PathLoss, Nlos, MaxDir, 101.03, 1.45),
            lin(DelaySpread, Nlos, Omni, -67.74, -3.24),
            lin(DelaySpread, Nlos, MaxDir, -70.77, -6.96),
            lin(Kappa1, Nlos, Omni, -4.88, 4.35),
            lin(Kappa1, Nlos, MaxDir, 4.71, 2.69),
            stat(Shadowing, Los, Omni, 0.58, 1.45),
            stat(Shadowing, Los, MaxDir, 0.8, 1.81),
            stat_ols(Shadowing, Los, Omni, -0.01, 1.4),
            stat_ols(Shadowing, Los, MaxDir, 0.05, 1.73),
            stat(AngularSpread, Los, NotApplicable, -0.49, 0.19),
            stat(DelaySpread, Los, Omni, -76.84, 3.05),
            stat(DelaySpread, Los, MaxDir, -83.15, 3.08),
            stat(Kappa1, Los, Omni, 9.58, 6.05),
            stat(Kappa1, Los, MaxDir, 17.88, 6.07),
            stat(Shadowing, Nlos, Omni, 1.37, 5.21),
            stat(Shadowing, Nlos, MaxDir, 2.09, 6.72),
            stat_ols(Shadowing, Nlos, Omni, 0.02, 5.2),
            stat_ols(Shadowing, Nlos, MaxDir, 0.0, 6.69),
            stat(AngularSpread, Nlos, NotApplicable, -0.23, 0.16),
            stat(DelaySpread, Nlos, Omni, -71.92, 1.8),
            stat(DelaySpread, Nlos, MaxDir, -80.34, 3.96),
            stat(Kappa1, Nlos, Omni, 0.54, 4.93),
            stat(Kappa1, Nlos, MaxDir, 9.84, 6.95),
        ];
        Self::from_rows(rows).expect("built-in table is complete")
    }

    pub fn get(&self, key: &RowKey) -> Option<&ModelRow> {
        self.rows.get(key)
    }

    pub fn rows(&self) -> impl Iterator<Item = &ModelRow> {
        self.rows.values()
    }

    fn linear(&self, key: RowKey) -> Result<(f64, f64)> {
        match self.rows.get(&key).map(|r| r.values) {
            Some(RowValues::Linear { alpha, beta }) => Ok((alpha, beta)),
            _ => Err(Error::ModelTable(format!("missing row {key}"))),
        }
    }

    fn statistical(&self, key: RowKey) -> Result<(f64, f64)> {
        match self.rows.get(&key).map(|r| r.values) {
            Some(RowValues::Statistical { mu, sigma }) => Ok((mu, sigma)),
            _ => Err(Error::ModelTable(format!("missing row {key}"))),
        }
    }

    /// Copy of the table with every statistical sigma replaced.
    pub fn with_sigma(&self, sigma: f64) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|(k, r)| {
                let values = match r.values {
                    RowValues::Statistical { mu, .. } => RowValues::Statistical { mu, sigma },
                    v => v,
                };
                (*k, ModelRow { key: *k, values })
            })
            .collect();
        Self { rows }
    }

    /// Structured text form, one entry per row with explicit units.
    pub fn to_document(&self) -> String {
        rows_to_document(self.rows.values())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    #[serde(default)]
    row: Vec<RowDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowDoc {
    parameter: Parameter,
    condition: Condition,
    view: View,
    kind: FitKind,
    #[serde(default = "standard")]
    estimator: Estimator,
    units: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
}

fn standard() -> Estimator {
    Estimator::Standard
}

const DOCUMENT_FORMAT: &str = "thzchan-model-table";

/// Serializes rows even when they do not form a complete table.
pub fn rows_to_document<'a>(rows: impl IntoIterator<Item = &'a ModelRow>) -> String {
    let row = rows
        .into_iter()
        .map(|r| {
            let (alpha, beta, mu, sigma) = match r.values {
                RowValues::Linear { alpha, beta } => (Some(alpha), Some(beta), None, None),
                RowValues::Statistical { mu, sigma } => (None, None, Some(mu), Some(sigma)),
            };
            RowDoc {
                parameter: r.key.parameter,
                condition: r.key.condition,
                view: r.key.view,
                kind: r.key.kind,
                estimator: r.key.estimator,
                units: r.units().as_str().to_string(),
                alpha,
                beta,
                mu,
                sigma,
            }
        })
        .collect();
    let doc = Document { format: DOCUMENT_FORMAT.into(), version: 1, row };
    toml::to_string(&doc).expect("model table serializes")
}

/// Parses and validates a model table document.
pub fn load_model_table(source: &str) -> Result<ModelTable> {
    let doc: Document = toml::from_str(source).map_err(|e| Error::ModelTable(e.to_string()))?;
    if doc.format != DOCUMENT_FORMAT || doc.version != 1 {
        return Err(Error::ModelTable(format!(
            "unsupported document {} v{}",
            doc.format, doc.version
        )));
    }
    let mut rows = Vec::with_capacity(doc.row.len());
    for r in doc.row {
        let key = RowKey {
            parameter: r.parameter,
            condition: r.condition,
            view: r.view,
            kind: r.kind,
            estimator: r.estimator,
        };
        let expected = Units::for_parameter(r.parameter).as_str();
        if r.units != expected {
            return Err(Error::ModelTable(format!(
                "row {key}: units '{}' should be '{expected}'",
                r.units
            )));
        }
        let values = match (r.kind, r.alpha, r.beta, r.mu, r.sigma) {
            (FitKind::LinearLogd, Some(alpha), Some(beta), None, None) => RowValues::Linear { alpha, beta },
            (FitKind::Statistical, None, None, Some(mu), Some(sigma)) => RowValues::Statistical { mu, sigma },
            _ => {
                return Err(Error::ModelTable(format!(
                    "row {key}: linear rows need alpha/beta, statistical rows mu/sigma"
                )))
            }
        };
        rows.push(ModelRow { key, values });
    }
    ModelTable::from_rows(rows)
}

/// One generated set of condensed channel parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRealization {
    pub distance: f64,
    pub condition: Condition,
    pub view: View,
    /// Path loss including shadowing, dB.
    pub path_loss: f64,
    pub shadowing: f64,
    /// RMS delay spread, seconds.
    pub delay_spread: f64,
    /// Fleury angular spread, clamped to [0, 1].
    pub angular_spread: f64,
    /// The log10-domain draw before clamping.
    pub angular_spread_log10: f64,
    pub angular_spread_clamped: bool,
    pub kappa1: f64,
    pub seed: u64,
    pub stream: u64,
    pub out_of_range: bool,
}

impl LinkRealization {
    pub const CSV_HEADER: &'static str = "distance_m,condition,view,path_loss_db,shadowing_db,delay_spread_s,angular_spread,angular_spread_log10,angular_spread_clamped,kappa1_db,seed,stream,out_of_range";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{:.16e},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{},{},{}",
            self.distance,
            self.condition,
            self.view,
            self.path_loss,
            self.shadowing,
            self.delay_spread,
            self.angular_spread,
            self.angular_spread_log10,
            self.angular_spread_clamped,
            self.kappa1,
            self.seed,
            self.stream,
            self.out_of_range
        )
    }
}

/// Generator stream `stream` of `seed`.
pub fn link_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_with(
    table: &ModelTable,
    d: f64,
    condition: Condition,
    view: View,
    seed: u64,
    stream: u64,
) -> Result<LinkRealization> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidParameter(format!("distance must be positive, got {d}")));
    }
    if view == View::NotApplicable {
        return Err(Error::InvalidParameter("draws need an omni or max_dir view".into()));
    }
    use FitKind::*;
    use Parameter::*;
    let (alpha, beta) = table.linear(RowKey::new(PathLoss, condition, view, LinearLogd))?;
    let (_, sigma_eps) = table.statistical(RowKey::new(Shadowing, condition, view, Statistical).ols())?;
    let (ds_mu, ds_sigma) = table.statistical(RowKey::new(DelaySpread, condition, view, Statistical))?;
    let (as_mu, as_sigma) =
        table.statistical(RowKey::new(AngularSpread, condition, View::NotApplicable, Statistical))?;
    let (k_mu, k_sigma) = table.statistical(RowKey::new(Kappa1, condition, view, Statistical))?;

    let out_of_range = d < CALIBRATED_RANGE_M.0 || d > CALIBRATED_RANGE_M.1;
    if out_of_range {
        log::warn!(
            "distance {d} m is outside the calibrated {}-{} m range; the model extrapolates",
            CALIBRATED_RANGE_M.0,
            CALIBRATED_RANGE_M.1
        );
    }

    let mut rng = link_rng(seed, stream);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let shadowing = sigma_eps * normal();
    let ds_db = ds_mu + ds_sigma * normal();
    let as_log = as_mu + as_sigma * normal();
    let kappa1 = k_mu + k_sigma * normal();

    let raw_as = 10f64.powf(as_log);
    Ok(LinkRealization {
        distance: d,
        condition,
        view,
        path_loss: alpha + 10.0 * beta * d.log10() + shadowing,
        shadowing,
        delay_spread: 10f64.powf(ds_db / 10.0),
        angular_spread: raw_as.clamp(0.0, 1.0),
        angular_spread_log10: as_log,
        angular_spread_clamped: raw_as > 1.0,
        kappa1,
        seed,
        stream,
        out_of_range,
    })
}

/// Draws one realization; identical inputs give identical output.
pub fn draw_link(
    table: &ModelTable,
    d: f64,
    condition: Condition,
    view: View,
    seed: u64,
) -> Result<LinkRealization> {
    draw_with(table, d, condition, view, seed, 0)
}

/// Draws one realization per distance; realization `i` uses stream `i` of
/// `seed`, so results do not depend on evaluation order.
pub fn draw_links(
    table: &ModelTable,
    distances: &[f64],
    condition: Condition,
    view: View,
    seed: u64,
) -> Result<Vec<LinkRealization>> {
    distances
        .iter()
        .enumerate()
        .map(|(i, &d)| draw_with(table, d, condition, view, seed, i as u64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBudgetSpec {
    pub tx_power_dbm: f64,
    pub gain_tx_dbi: f64,
    pub gain_rx_dbi: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub required_snr_db: f64,
    /// Thermal noise density, dBm/Hz.
    pub noise_density_dbm_hz: f64,
}

impl Default for LinkBudgetSpec {
    /// 10 dBm, two 23 dBi horns, 1 GHz, NF 5 dB, SNR 5 dB.
    fn default() -> Self {
        Self {
            tx_power_dbm: 10.0,
            gain_tx_dbi: 23.0,
            gain_rx_dbi: 23.0,
            bandwidth_hz: 1e9,
            noise_figure_db: 5.0,
            required_snr_db: 5.0,
            noise_density_dbm_hz: -174.0,
        }
    }
}

impl LinkBudgetSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::InvalidParameter("bandwidth must be positive".into()));
        }
        Ok(())
    }

    /// Largest path loss that still meets the required SNR, dB.
    pub fn max_path_loss(&self) -> f64 {
        self.tx_power_dbm + self.gain_tx_dbi + self.gain_rx_dbi
            - self.noise_density_dbm_hz
            - 10.0 * self.bandwidth_hz.log10()
            - self.noise_figure_db
            - self.required_snr_db
    }
}

/// Margin left after a path loss of `pl` dB.
pub fn link_budget_margin(spec: &LinkBudgetSpec, pl: f64) -> f64 {
    spec.max_path_loss() - pl
}
