use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use thzchan::chanmodel::{draw_links, link_budget_margin, load_model_table, Condition, LinkBudgetSpec, LinkRealization, ModelTable, View};
use thzchan::io::campaign::{fits_to_csv, records_to_csv};
use thzchan::io::{fit_records, load_scene, records_from_csv, run_campaign, write_calibration, write_sweep, Analysis, DatasetManifest, LinkEntry, RunConfig};
use thzchan::chanmodel::rows_to_document;
use thzchan::sounding::CalibrationTrace;
use thzchan::synthscene::{oracle_params, scene_to_sweeps};

#[derive(Parser)]
#[command(name = "thzchan", version, about = "THz double-directional channel-sounding analysis")]
struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Process a dataset manifest into records, fits and plot data.
    Analyze(AnalyzeArgs),
    /// Render a scene description into sweep files and a manifest.
    Synth(SynthArgs),
    /// Fit a model table from a records CSV.
    Fit(FitArgs),
    /// Draw channel realizations from a model table.
    Draw(DrawArgs),
    /// Maximum tolerable path loss and margin of a link budget.
    Budget(BudgetArgs),
    /// Print the built-in model table document.
    Table,
}

#[derive(Args)]
struct AnalyzeArgs {
    manifest: PathBuf,
    /// Run configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    gate_ns: Option<f64>,
    #[arg(long)]
    margin_db: Option<f64>,
    #[arg(long)]
    n_bins: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Comma-separated subset of records, fits, model_table, plots.
    #[arg(long, value_delimiter = ',')]
    analyses: Option<Vec<String>>,
    #[arg(long)]
    no_wraparound: bool,
    #[arg(long)]
    detection_db: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    scene: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    /// Overrides the scene's noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Also print the oracle parameters of the scene as CSV.
    #[arg(long)]
    oracle: bool,
}

#[derive(Args)]
struct FitArgs {
    records: PathBuf,
    #[arg(long, default_value_t = thzchan::statfit::DEFAULT_N_BINS)]
    n_bins: usize,
    /// Model table output; standard output when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write the fit report with confidence intervals.
    #[arg(long)]
    fits: Option<PathBuf>,
}

#[derive(Args)]
struct DrawArgs {
    /// Model table document; the built-in table when absent.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Distances in meters, comma-separated.
    #[arg(long, short, value_delimiter = ',', required = true)]
    distance: Vec<f64>,
    #[arg(long, short)]
    condition: String,
    #[arg(long, short, default_value = "omni")]
    view: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Realizations per distance.
    #[arg(long, short = 'n', default_value_t = 1)]
    count: usize,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BudgetArgs {
    /// Link budget file; flags override its values.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    tx_power_dbm: Option<f64>,
    #[arg(long)]
    gain_tx_dbi: Option<f64>,
    #[arg(long)]
    gain_rx_dbi: Option<f64>,
    #[arg(long)]
    bandwidth_hz: Option<f64>,
    #[arg(long)]
    noise_figure_db: Option<f64>,
    #[arg(long)]
    snr_db: Option<f64>,
    /// Path loss to evaluate the margin at, dB.
    #[arg(long)]
    path_loss: Option<f64>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    match cli.cmd {
        Cmd::Analyze(a) => analyze(a),
        Cmd::Synth(a) => synth(a),
        Cmd::Fit(a) => fit(a),
        Cmd::Draw(a) => draw(a),
        Cmd::Budget(a) => budget(a),
        Cmd::Table => {
            print!("{}", ModelTable::builtin().to_document());
            Ok(())
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let mut config = match &a.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(v) = a.gate_ns {
        config.gate_delay_ns = v;
    }
    if let Some(v) = a.margin_db {
        config.noise_margin_db = v;
    }
    if let Some(v) = a.n_bins {
        config.n_bins = v;
    }
    if let Some(v) = a.seed {
        config.seed = v;
    }
    if let Some(v) = a.out {
        config.output_dir = v;
    }
    if let Some(v) = a.detection_db {
        config.detection_db = v;
    }
    if a.no_wraparound {
        config.correct_wraparound = false;
    }
    if let Some(list) = a.analyses {
        config.analyses = list
            .iter()
            .map(|s| match s.trim() {
                "records" => Ok(Analysis::Records),
                "fits" => Ok(Analysis::Fits),
                "model_table" => Ok(Analysis::ModelTable),
                "plots" => Ok(Analysis::Plots),
                other => bail!("unknown analysis '{other}'"),
            })
            .collect::<Result<_>>()?;
    }
    config.validate()?;
    let manifest = DatasetManifest::load(&a.manifest).with_context(|| format!("loading {}", a.manifest.display()))?;
    let output = run_campaign(&manifest, &config)?;
    output.write(&config.output_dir, &config)?;
    for n in &output.notices {
        eprintln!("notice: {n}");
    }
    eprintln!(
        "{} of {} links processed; reports in {}",
        output.records.len(),
        manifest.links.len(),
        config.output_dir.display()
    );
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = load_scene(&a.scene).with_context(|| format!("loading {}", a.scene.display()))?;
    let seed = a.seed.unwrap_or(spec.seed);
    let mut grid = scene_to_sweeps(&spec.scene, &spec.antenna, &spec.axis, &spec.angles, seed)?;
    grid.meta.id = spec.id.clone();
    fs::create_dir_all(&a.out)?;
    let sweep = PathBuf::from(format!("{}.sweep", spec.id));
    let cal = PathBuf::from("cal.sweep");
    write_sweep(&a.out.join(&sweep), &grid)?;
    write_calibration(&a.out.join(&cal), &CalibrationTrace::unit(spec.axis))?;
    let manifest = DatasetManifest {
        campaign: Default::default(),
        links: vec![LinkEntry {
            id: spec.id.clone(),
            sweep,
            calibration: cal,
            distance_m: spec.scene.distance,
            los: spec.scene.los,
            tx: String::new(),
            rx: String::new(),
        }],
    };
    fs::write(a.out.join("manifest.toml"), manifest.to_toml())?;
    if a.oracle {
        let config = RunConfig::default().processing();
        let mut rec = oracle_params(&spec.scene, &spec.angles, &spec.antenna, &spec.axis, &config)?;
        rec.id = spec.id;
        print!("{}", records_to_csv(&[rec])?);
    }
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    if a.n_bins == 0 {
        bail!("n_bins must be at least 1");
    }
    let text = fs::read_to_string(&a.records).with_context(|| format!("reading {}", a.records.display()))?;
    let records = records_from_csv(&text)?;
    let summary = fit_records(&records, a.n_bins)?;
    for n in &summary.notices {
        eprintln!("notice: {n}");
    }
    if let Some(p) = &a.fits {
        fs::write(p, fits_to_csv(&summary))?;
    }
    emit(a.out.as_deref(), &rows_to_document(&summary.rows()))
}

fn draw(a: DrawArgs) -> Result<()> {
    let table = match &a.table {
        Some(p) => load_model_table(&fs::read_to_string(p)?).with_context(|| format!("loading {}", p.display()))?,
        None => ModelTable::builtin(),
    };
    let condition: Condition = a.condition.parse()?;
    let view: View = a.view.parse()?;
    let distances: Vec<f64> = a.distance.iter().flat_map(|&d| std::iter::repeat_n(d, a.count)).collect();
    let draws = draw_links(&table, &distances, condition, view, a.seed)?;
    let mut text = String::from(LinkRealization::CSV_HEADER);
    text.push('\n');
    for r in &draws {
        text.push_str(&r.to_csv_row());
        text.push('\n');
    }
    emit(a.out.as_deref(), &text)
}

fn budget(a: BudgetArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => toml::from_str::<LinkBudgetSpec>(&fs::read_to_string(p)?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => LinkBudgetSpec::default(),
    };
    let overrides = [
        (a.tx_power_dbm, &mut spec.tx_power_dbm),
        (a.gain_tx_dbi, &mut spec.gain_tx_dbi),
        (a.gain_rx_dbi, &mut spec.gain_rx_dbi),
        (a.bandwidth_hz, &mut spec.bandwidth_hz),
        (a.noise_figure_db, &mut spec.noise_figure_db),
        (a.snr_db, &mut spec.required_snr_db),
    ];
    for (v, slot) in overrides {
        if let Some(v) = v {
            *slot = v;
        }
    }
    spec.validate()?;
    println!("max_path_loss_db = {}", spec.max_path_loss());
    if let Some(pl) = a.path_loss {
        println!("margin_db = {}", link_budget_margin(&spec, pl));
    }
    Ok(())
}
