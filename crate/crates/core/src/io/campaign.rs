//! End-to-end campaign processing: ingest, condense, fit and report.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::chanmodel::{rows_to_document, Condition, Estimator, FitKind, ModelRow, Parameter, RowKey, View};
use crate::error::{Error, Result};
use crate::io::manifest::{Analysis, DatasetManifest, LinkEntry, RunConfig};
use crate::io::sweepfile::{read_calibration, read_sweep};
use crate::metrics::{condense, LinkRecord};
use crate::sounding::{CalibrationTrace, SweepGrid};
use crate::statfit::{
    fit_linear_logd, fit_lognormal, fit_ols, fit_power_law_binned, shadowing_residuals, Interval,
};

/// Links needed in a condition before any fit is attempted.
pub const MIN_LINKS_FOR_FIT: usize = 3;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{what}: cannot parse '{s}' as a number")))
}

pub const RECORDS_HEADER: [&str; 13] = [
    "id",
    "distance_m",
    "los",
    "pl_omni_db",
    "pl_maxdir_db",
    "ds_omni_s",
    "ds_maxdir_s",
    "as_tx",
    "as_rx",
    "k1_omni_db",
    "k1_maxdir_db",
    "maxdir_tx_deg",
    "maxdir_rx_deg",
];

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

pub fn records_to_csv(records: &[LinkRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RECORDS_HEADER).map_err(csv_err)?;
    for r in records {
        let nums = [
            r.distance,
            r.pl_omni,
            r.pl_maxdir,
            r.ds_omni,
            r.ds_maxdir,
            r.as_tx,
            r.as_rx,
            r.k1_omni,
            r.k1_maxdir,
            r.maxdir_tx_deg,
            r.maxdir_rx_deg,
        ]
        .map(fmt_f64);
        let mut row = vec![r.id.clone(), nums[0].clone(), r.los.to_string()];
        row.extend_from_slice(&nums[1..]);
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn records_from_csv(text: &str) -> Result<Vec<LinkRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != RECORDS_HEADER {
        return Err(Error::Parse("records CSV header does not match".into()));
    }
    let mut out = Vec::new();
    for row in r.records() {
        let row = row.map_err(csv_err)?;
        let f = |i: usize| parse_f64(&row[i], RECORDS_HEADER[i]);
        let los = match row[2].trim() {
            "true" => true,
            "false" => false,
            other => return Err(Error::Parse(format!("los: expected true/false, got '{other}'"))),
        };
        out.push(LinkRecord {
            id: row[0].to_string(),
            distance: f(1)?,
            los,
            pl_omni: f(3)?,
            pl_maxdir: f(4)?,
            ds_omni: f(5)?,
            ds_maxdir: f(6)?,
            as_tx: f(7)?,
            as_rx: f(8)?,
            k1_omni: f(9)?,
            k1_maxdir: f(10)?,
            maxdir_tx_deg: f(11)?,
            maxdir_rx_deg: f(12)?,
        });
    }
    Ok(out)
}

/// Estimates of one fitted model row.
#[derive(Debug, Clone, PartialEq)]
pub enum FitValues {
    Linear {
        alpha: f64,
        alpha_ci: Interval,
        beta: f64,
        beta_ci: Interval,
        /// Residual scatter of path-loss fits, dB.
        sigma_eps: Option<f64>,
    },
    Statistical {
        mu: f64,
        mu_ci: Interval,
        sigma: f64,
        sigma_ci: Interval,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub key: RowKey,
    pub n: usize,
    pub values: FitValues,
}

impl FitReport {
    pub fn row(&self) -> ModelRow {
        match self.values {
            FitValues::Linear { alpha, beta, .. } => ModelRow::linear(self.key, alpha, beta),
            FitValues::Statistical { mu, sigma, .. } => ModelRow::statistical(self.key, mu, sigma),
        }
    }
}

/// Fits plus per-parameter samples of one campaign.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitSummary {
    pub reports: BTreeMap<RowKey, FitReport>,
    /// `(condition, parameter, view) -> [(distance, value)]` in model units.
    pub samples: BTreeMap<(Condition, Parameter, View), Vec<(f64, f64)>>,
    pub notices: Vec<String>,
}

impl FitSummary {
    pub fn rows(&self) -> Vec<ModelRow> {
        self.reports.values().map(FitReport::row).collect()
    }

    pub fn get(&self, key: &RowKey) -> Option<&FitReport> {
        self.reports.get(key)
    }
}

fn linear_key(p: Parameter, c: Condition, v: View) -> RowKey {
    RowKey::new(p, c, v, FitKind::LinearLogd)
}

fn stat_key(p: Parameter, c: Condition, v: View) -> RowKey {
    RowKey::new(p, c, v, FitKind::Statistical)
}

fn fit_pair(summary: &mut FitSummary, p: Parameter, c: Condition, v: View, pts: &[(f64, f64)], n_bins: usize) -> Result<()> {
    if pts.len() < MIN_LINKS_FOR_FIT {
        summary.notices.push(format!(
            "{c} {p} {v}: {} usable values, fits skipped (need {MIN_LINKS_FOR_FIT})",
            pts.len()
        ));
        return Ok(());
    }
    let d: Vec<f64> = pts.iter().map(|x| x.0).collect();
    let z: Vec<f64> = pts.iter().map(|x| x.1).collect();
    let lin = fit_linear_logd(&z, &d, n_bins)?;
    let key = linear_key(p, c, v);
    summary.reports.insert(
        key,
        FitReport {
            key,
            n: lin.n,
            values: FitValues::Linear {
                alpha: lin.alpha,
                alpha_ci: lin.alpha_ci,
                beta: lin.beta,
                beta_ci: lin.beta_ci,
                sigma_eps: None,
            },
        },
    );
    insert_lognormal(summary, stat_key(p, c, v), &z)
}

fn insert_lognormal(summary: &mut FitSummary, key: RowKey, z: &[f64]) -> Result<()> {
    let ln = fit_lognormal(z)?;
    if ln.degenerate {
        summary.notices.push(format!("{key}: all values identical, zero spread"));
    }
    summary.reports.insert(
        key,
        FitReport {
            key,
            n: ln.n,
            values: FitValues::Statistical {
                mu: ln.mu,
                mu_ci: ln.mu_ci,
                sigma: ln.sigma,
                sigma_ci: ln.sigma_ci,
            },
        },
    );
    Ok(())
}

/// Per-condition fits of path loss (weighted and OLS), shadowing, delay
/// spread, angular spread and κ₁.
///
/// Delay spreads are fitted as `10 log10(seconds)`, angular spreads as
/// `log10` pooled over both link ends, κ₁ in dB. Zero spreads and infinite
/// κ₁ have no log-domain value and are left out with a notice.
pub fn fit_records(records: &[LinkRecord], n_bins: usize) -> Result<FitSummary> {
    let mut s = FitSummary::default();
    for c in [Condition::Los, Condition::Nlos] {
        let links: Vec<&LinkRecord> = records.iter().filter(|r| Condition::from_los(r.los) == c).collect();
        if links.is_empty() {
            continue;
        }
        let mut dropped = 0usize;
        let mut collect = |f: &dyn Fn(&LinkRecord) -> f64, map: fn(f64) -> Option<f64>| -> Vec<(f64, f64)> {
            let mut out = Vec::new();
            for r in &links {
                match map(f(r)) {
                    Some(v) if v.is_finite() => out.push((r.distance, v)),
                    _ => dropped += 1,
                }
            }
            out
        };
        let db_s = |v: f64| (v > 0.0).then(|| 10.0 * v.log10());
        let log10 = |v: f64| (v > 0.0).then(|| v.log10());
        let finite = |v: f64| v.is_finite().then_some(v);
        let per_view = [
            (View::Omni, collect(&|r| r.pl_omni, finite), collect(&|r| r.ds_omni, db_s), collect(&|r| r.k1_omni, finite)),
            (View::MaxDir, collect(&|r| r.pl_maxdir, finite), collect(&|r| r.ds_maxdir, db_s), collect(&|r| r.k1_maxdir, finite)),
        ];
        let mut as_pts = collect(&|r| r.as_tx, log10);
        as_pts.extend(collect(&|r| r.as_rx, log10));
        if dropped > 0 {
            s.notices.push(format!(
                "{c}: {dropped} values without a finite log-domain form (zero spread or single-peak κ₁) left out"
            ));
        }
        s.samples.insert((c, Parameter::AngularSpread, View::NotApplicable), as_pts.clone());
        for (v, pl, ds, k1) in &per_view {
            s.samples.insert((c, Parameter::PathLoss, *v), pl.clone());
            s.samples.insert((c, Parameter::DelaySpread, *v), ds.clone());
            s.samples.insert((c, Parameter::Kappa1, *v), k1.clone());
        }

        if links.len() < MIN_LINKS_FOR_FIT {
            s.notices.push(format!(
                "{c}: {} links, fits skipped (need {MIN_LINKS_FOR_FIT})",
                links.len()
            ));
            continue;
        }
        for (v, pl, ds, k1) in &per_view {
            let d: Vec<f64> = pl.iter().map(|x| x.0).collect();
            let y: Vec<f64> = pl.iter().map(|x| x.1).collect();
            let fits = [
                (Estimator::Standard, fit_power_law_binned(&d, &y, n_bins)?),
                (Estimator::Ols, fit_ols(&d, &y)?),
            ];
            for (est, fit) in fits {
                let mut key = linear_key(Parameter::PathLoss, c, *v);
                key.estimator = est;
                s.reports.insert(
                    key,
                    FitReport {
                        key,
                        n: fit.n,
                        values: FitValues::Linear {
                            alpha: fit.alpha,
                            alpha_ci: fit.alpha_ci,
                            beta: fit.beta,
                            beta_ci: fit.beta_ci,
                            sigma_eps: Some(fit.sigma_eps),
                        },
                    },
                );
                let eps = shadowing_residuals(&fit, &d, &y);
                let mut skey = stat_key(Parameter::Shadowing, c, *v);
                skey.estimator = est;
                insert_lognormal(&mut s, skey, &eps)?;
                if est == Estimator::Standard {
                    let pts = d.iter().copied().zip(eps).collect();
                    s.samples.insert((c, Parameter::Shadowing, *v), pts);
                }
            }
            fit_pair(&mut s, Parameter::DelaySpread, c, *v, ds, n_bins)?;
            fit_pair(&mut s, Parameter::Kappa1, c, *v, k1, n_bins)?;
        }
        fit_pair(&mut s, Parameter::AngularSpread, c, View::NotApplicable, &as_pts, n_bins)?;
    }
    Ok(s)
}

const FITS_HEADER: &str = "condition,parameter,view,kind,estimator,units,n,alpha,alpha_lo,alpha_hi,beta,beta_lo,beta_hi,sigma_eps,mu,mu_lo,mu_hi,sigma,sigma_lo,sigma_hi";

pub fn fits_to_csv(summary: &FitSummary) -> String {
    let mut out = String::from(FITS_HEADER);
    out.push('\n');
    for r in summary.reports.values() {
        let k = r.key;
        let units = r.row().units().as_str();
        let blank = || String::new();
        let cols: Vec<String> = match &r.values {
            FitValues::Linear { alpha, alpha_ci, beta, beta_ci, sigma_eps } => {
                let mut v = vec![
                    fmt_f64(*alpha),
                    fmt_f64(alpha_ci.lo),
                    fmt_f64(alpha_ci.hi),
                    fmt_f64(*beta),
                    fmt_f64(beta_ci.lo),
                    fmt_f64(beta_ci.hi),
                    sigma_eps.map(fmt_f64).unwrap_or_default(),
                ];
                v.extend((0..6).map(|_| blank()));
                v
            }
            FitValues::Statistical { mu, mu_ci, sigma, sigma_ci } => {
                let mut v: Vec<String> = (0..7).map(|_| blank()).collect();
                v.extend([mu, &mu_ci.lo, &mu_ci.hi, sigma, &sigma_ci.lo, &sigma_ci.hi].map(|x| fmt_f64(*x)));
                v
            }
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            k.condition,
            k.parameter,
            k.view,
            k.kind,
            k.estimator,
            units,
            r.n,
            cols.join(",")
        ));
    }
    out
}

/// Empirical CDFs of every sampled parameter, probability `i / n`.
pub fn cdf_csv(summary: &FitSummary) -> String {
    let mut out = String::from("condition,parameter,view,value,probability\n");
    for ((c, p, v), pts) in &summary.samples {
        let mut vals: Vec<f64> = pts.iter().map(|x| x.1).collect();
        vals.sort_by(f64::total_cmp);
        let n = vals.len();
        for (i, x) in vals.iter().enumerate() {
            out.push_str(&format!("{c},{p},{v},{},{}\n", fmt_f64(*x), fmt_f64((i + 1) as f64 / n as f64)));
        }
    }
    out
}

/// Parameter versus distance with the fitted weighted mean, where available.
pub fn scatter_csv(summary: &FitSummary) -> String {
    let mut out = String::from("condition,parameter,view,distance_m,value,fit\n");
    for ((c, p, v), pts) in &summary.samples {
        if *p == Parameter::Shadowing {
            continue;
        }
        let fit = summary.get(&linear_key(*p, *c, *v)).and_then(|r| match r.values {
            FitValues::Linear { alpha, beta, .. } => Some((alpha, beta)),
            _ => None,
        });
        // Path loss uses the 10 log10(d) convention, other parameters log10(d).
        let scale = if *p == Parameter::PathLoss { 10.0 } else { 1.0 };
        for (d, x) in pts {
            let fitted = fit.map(|(a, b)| fmt_f64(a + scale * b * d.log10())).unwrap_or_default();
            out.push_str(&format!("{c},{p},{v},{},{},{fitted}\n", fmt_f64(*d), fmt_f64(*x)));
        }
    }
    out
}

/// Loads one link's sweep and calibration, taking id, distance and LoS flag
/// from the manifest.
pub fn ingest_link(link: &LinkEntry) -> Result<(SweepGrid, CalibrationTrace, Vec<String>)> {
    let mut grid = read_sweep(&link.sweep)?;
    let cal = read_calibration(&link.calibration)?;
    let mut notices = Vec::new();
    let hd = grid.meta.distance;
    if hd != 0.0 && (hd - link.distance_m).abs() > 1e-6 * link.distance_m {
        notices.push(format!(
            "link {}: sweep header distance {hd} m differs from manifest {} m; using the manifest",
            link.id, link.distance_m
        ));
    }
    if grid.meta.los != link.los {
        notices.push(format!("link {}: sweep header LoS flag differs from manifest; using the manifest", link.id));
    }
    grid.meta.id = link.id.clone();
    grid.meta.distance = link.distance_m;
    grid.meta.los = link.los;
    Ok((grid, cal, notices))
}

/// Loads every sweep of the manifest in manifest order.
pub fn ingest_sweeps(manifest: &DatasetManifest) -> Result<Vec<SweepGrid>> {
    manifest
        .links
        .par_iter()
        .map(|l| ingest_link(l).map(|(g, _, _)| g))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOutput {
    /// Usable links, sorted by id.
    pub records: Vec<LinkRecord>,
    pub fits: FitSummary,
    pub notices: Vec<String>,
}

impl CampaignOutput {
    pub fn model_table_document(&self) -> String {
        rows_to_document(&self.fits.rows())
    }

    /// Writes the selected reports into `dir`, one file each.
    pub fn write(&self, dir: &Path, config: &RunConfig) -> Result<()> {
        fs::create_dir_all(dir)?;
        if config.wants(Analysis::Records) {
            fs::write(dir.join("records.csv"), records_to_csv(&self.records)?)?;
        }
        if config.wants(Analysis::Fits) {
            fs::write(dir.join("fits.csv"), fits_to_csv(&self.fits))?;
        }
        if config.wants(Analysis::ModelTable) {
            fs::write(dir.join("model_table.toml"), self.model_table_document())?;
        }
        if config.wants(Analysis::Plots) {
            fs::write(dir.join("cdf.csv"), cdf_csv(&self.fits))?;
            fs::write(dir.join("scatter.csv"), scatter_csv(&self.fits))?;
        }
        let mut notes = self.notices.join("\n");
        if !notes.is_empty() {
            notes.push('\n');
        }
        fs::write(dir.join("notices.txt"), notes)?;
        Ok(())
    }
}

/// Processes every link of the manifest and fits the per-condition models.
///
/// Links are condensed in parallel; results are merged in link-id order so
/// the output does not depend on scheduling. Unusable links are reported as
/// notices and left out of the fits.
pub fn run_campaign(manifest: &DatasetManifest, config: &RunConfig) -> Result<CampaignOutput> {
    config.validate()?;
    let processing = config.processing();
    let mut links: Vec<&LinkEntry> = manifest.links.iter().collect();
    links.sort_by(|a, b| a.id.cmp(&b.id));
    let staged: Vec<Result<(Option<LinkRecord>, Vec<String>)>> = links
        .par_iter()
        .map(|link| {
            let (grid, cal, mut notices) = ingest_link(link)?;
            match condense(&grid, &cal, &processing) {
                Ok(rec) => Ok((Some(rec), notices)),
                Err(Error::UnusableLink(msg)) => {
                    notices.push(format!("link {} unusable: {msg}", link.id));
                    Ok((None, notices))
                }
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut records = Vec::new();
    let mut notices = Vec::new();
    for s in staged {
        let (rec, n) = s?;
        notices.extend(n);
        records.extend(rec);
    }
    let fits = fit_records(&records, config.n_bins)?;
    notices.extend(fits.notices.iter().cloned());
    Ok(CampaignOutput { records, fits, notices })
}
