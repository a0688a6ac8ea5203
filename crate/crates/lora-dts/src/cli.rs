//! Command-line front end.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lora_dts_core::estimators::{recommended_midamble_interval, MidambleAdvice};
use lora_dts_core::modem::payload_symbol_count;
use lora_dts_core::sim::Simulator;
use lora_dts_core::{DopplerProfile, EstimatorKind, ModemConfig, OrbitGeometry};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, Manifest, OneOrMany};
use crate::output::{self, ResultRow};
use crate::sweep::{self, CellResult};
use crate::{iq, plot};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{0}")]
    Runtime(String),
}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

fn runtime<E: std::fmt::Display>(context: &str) -> impl Fn(E) -> AppError + '_ {
    move |e| AppError::Runtime(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(name = "lora-dts", version, about = "LoRa direct-to-satellite Doppler compensation simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Doppler shift and rate over a LEO pass.
    DopplerProfile(DopplerArgs),
    /// Run one scenario (or a small grid) from flags, optionally on top of a config file.
    Simulate(SimulateArgs),
    /// Run the grid described by a config file.
    Sweep(SweepArgs),
    /// Midamble spacing for a given Doppler rate.
    MidambleAdvisor(AdvisorArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long, env = "LORA_DTS_OUT_DIR", default_value = "out")]
    pub out_dir: PathBuf,
    /// Files to write, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv")]
    pub emit: Vec<Emit>,
}

#[derive(Debug, Args)]
pub struct OrbitArgs {
    #[arg(long, default_value_t = 550.0)]
    pub altitude_km: f64,
    #[arg(long, default_value_t = 868e6)]
    pub carrier_hz: f64,
}

impl OrbitArgs {
    fn geometry(&self) -> Result<OrbitGeometry, AppError> {
        OrbitGeometry::new(self.altitude_km * 1e3, self.carrier_hz).map_err(|e| {
            AppError::Config(ConfigError::Invalid {
                field: "orbit",
                message: e.to_string(),
            })
        })
    }
}

#[derive(Debug, Args)]
pub struct DopplerArgs {
    #[command(flatten)]
    pub orbit: OrbitArgs,
    /// First time, seconds from zenith; defaults to the start of visibility.
    #[arg(long, allow_hyphen_values = true)]
    pub t_min: Option<f64>,
    /// Last time; defaults to the end of visibility.
    #[arg(long, allow_hyphen_values = true)]
    pub t_max: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub step_s: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Overrides the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the estimator list, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_estimator)]
    pub estimators: Option<Vec<EstimatorKind>>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Also write per-trial estimator diagnostics as JSON.
    #[arg(long)]
    pub dump_estimates: bool,
    /// Trials per cell covered by --dump-estimates.
    #[arg(long, default_value_t = 1)]
    pub dump_trials: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_estimator(s: &str) -> Result<EstimatorKind, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = EstimatorKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown estimator `{s}` (expected one of {})", names.join(", "))
    })
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Base configuration; flags below replace the matching axes.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub sf: Option<u8>,
    #[arg(long)]
    pub ldro: Option<bool>,
    #[arg(long, allow_hyphen_values = true)]
    pub t_start: Option<f64>,
    #[arg(long, allow_hyphen_values = true, conflicts_with = "snr")]
    pub esn0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub snr: Option<f64>,
    #[arg(long)]
    pub payload_bytes: Option<usize>,
    #[arg(long, conflicts_with = "min_symbols")]
    pub trials: Option<u64>,
    #[arg(long)]
    pub min_symbols: Option<u64>,
    /// Write the received frame of trial 0 of every cell as raw I/Q.
    #[arg(long)]
    pub dump_iq: bool,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct AdvisorArgs {
    #[arg(long)]
    pub sf: u8,
    #[arg(long, default_value_t = 125e3)]
    pub bandwidth_hz: f64,
    #[arg(long)]
    pub ldro: bool,
    /// Tolerated drift in symbol spacings, in (0, 0.5].
    #[arg(long, default_value_t = 0.1)]
    pub k: f64,
    /// Doppler rate in Hz/s.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "t_start", required_unless_present = "t_start")]
    pub xi: Option<f64>,
    /// Read the rate from a LEO pass at this time instead.
    #[arg(long, allow_hyphen_values = true)]
    pub t_start: Option<f64>,
    #[command(flatten)]
    pub orbit: OrbitArgs,
    /// Payload chirps; derived from --payload-bytes when absent.
    #[arg(long, conflicts_with = "payload_bytes", required_unless_present = "payload_bytes")]
    pub n_sym: Option<usize>,
    #[arg(long)]
    pub payload_bytes: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub cr: u8,
    #[arg(long)]
    pub json: bool,
}

/// Parses `args` and runs the command, mapping failures to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::DopplerProfile(a) => doppler_profile(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Sweep(a) => sweep_cmd(&a),
        Command::MidambleAdvisor(a) => advisor(&a),
    }
}

#[derive(Debug, Serialize, serde::Deserialize, PartialEq)]
pub struct ProfileRow {
    pub t_s: f64,
    pub doppler_shift_hz: f64,
    pub doppler_rate_hz_per_s: f64,
}

pub fn profile_rows(geom: OrbitGeometry, t_min: f64, t_max: f64, step: f64) -> Result<Vec<ProfileRow>, AppError> {
    if !(step > 0.0 && step.is_finite()) || !t_min.is_finite() || !t_max.is_finite() || t_min > t_max {
        return Err(AppError::Config(ConfigError::Invalid {
            field: "doppler-profile",
            message: "need t_min <= t_max and a positive step".into(),
        }));
    }
    let profile = DopplerProfile::LeoPass(geom);
    let count = ((t_max - t_min) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|i| {
            let t = t_min + i as f64 * step;
            Ok(ProfileRow {
                t_s: t,
                doppler_shift_hz: profile.doppler_shift(t).map_err(runtime("doppler-profile"))?,
                doppler_rate_hz_per_s: profile.doppler_rate(t).map_err(runtime("doppler-profile"))?,
            })
        })
        .collect()
}

fn doppler_profile(a: &DopplerArgs) -> Result<(), AppError> {
    let geom = a.orbit.geometry()?;
    let hw = geom.visibility_half_window_s();
    let t_min = a.t_min.unwrap_or(-hw.floor());
    let t_max = a.t_max.unwrap_or(hw.floor());
    let rows = profile_rows(geom, t_min, t_max, a.step_s)?;
    fs::create_dir_all(&a.output.out_dir).map_err(runtime("creating output directory"))?;
    let stem = a.output.out_dir.join("doppler_profile");
    if a.output.emit.contains(&Emit::Csv) {
        let path = stem.with_extension("csv");
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(runtime("writing CSV"))?;
        for r in &rows {
            w.serialize(r).map_err(runtime("writing CSV"))?;
        }
        w.flush().map_err(runtime("writing CSV"))?;
        println!("wrote {}", path.display());
    }
    if a.output.emit.contains(&Emit::Json) {
        let path = stem.with_extension("json");
        write_json_file(&path, &rows)?;
        println!("wrote {}", path.display());
    }
    if a.output.emit.contains(&Emit::Svg) {
        let path = stem.with_extension("svg");
        let t: Vec<f64> = rows.iter().map(|r| r.t_s).collect();
        let f: Vec<f64> = rows.iter().map(|r| r.doppler_shift_hz).collect();
        let x: Vec<f64> = rows.iter().map(|r| r.doppler_rate_hz_per_s).collect();
        let title = format!("h = {} km, F_C = {} MHz", a.orbit.altitude_km, a.orbit.carrier_hz / 1e6);
        plot::plot_doppler(&path, &t, &f, &x, &title).map_err(runtime("plotting"))?;
        println!("wrote {}", path.display());
    }
    let profile = DopplerProfile::LeoPass(geom);
    println!("visibility half-window: {hw:.2} s");
    if let (Ok(f), Ok(x)) = (profile.doppler_shift(-hw), profile.doppler_rate(0.0)) {
        println!("shift at horizon: {:.1} Hz, rate at zenith: {:.2} Hz/s", f, x);
    }
    Ok(())
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    let f = File::create(path).map_err(runtime("writing JSON"))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value).map_err(runtime("writing JSON"))
}

fn apply_run_overrides(m: &mut Manifest, r: &RunArgs) {
    if let Some(seed) = r.seed {
        m.run.seed = seed;
    }
    if let Some(est) = &r.estimators {
        m.receiver.estimators = OneOrMany::Many(est.clone());
    }
    if let Some(w) = r.workers {
        m.run.workers = w;
    }
}

fn sweep_cmd(a: &SweepArgs) -> Result<(), AppError> {
    let text = fs::read_to_string(&a.config).map_err(|source| ConfigError::Io {
        path: a.config.clone(),
        source,
    })?;
    let mut m = Manifest::parse(&text)?;
    apply_run_overrides(&mut m, &a.run);
    let stem = a
        .config
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sweep".into());
    execute(&m, &a.run, &stem, Some(&text), false)
}

fn simulate(a: &SimulateArgs) -> Result<(), AppError> {
    let (mut m, text) = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.clone(),
                source,
            })?;
            (Manifest::parse(&text)?, Some(text))
        }
        None => (Manifest::default(), None),
    };
    if let Some(sf) = a.sf {
        m.modem.sf = OneOrMany::One(sf);
    }
    if let Some(l) = a.ldro {
        m.modem.ldro = OneOrMany::One(l);
    }
    if let Some(t) = a.t_start {
        m.channel.t_start_s = OneOrMany::One(t);
    }
    if let Some(e) = a.esn0 {
        m.channel.esn0_db = Some(OneOrMany::One(e));
        m.channel.snr_db = None;
        m.channel.noiseless = false;
    }
    if let Some(s) = a.snr {
        m.channel.snr_db = Some(OneOrMany::One(s));
        m.channel.esn0_db = None;
        m.channel.noiseless = false;
    }
    if let Some(b) = a.payload_bytes {
        m.frame.payload_bytes = Some(OneOrMany::One(b));
        m.frame.payload_bits = None;
    }
    if let Some(t) = a.trials {
        m.run.trials = Some(t);
        m.run.min_symbols = None;
    }
    if let Some(s) = a.min_symbols {
        m.run.min_symbols = Some(s);
        m.run.trials = None;
    }
    apply_run_overrides(&mut m, &a.run);
    let stem = a
        .config
        .as_ref()
        .and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "simulate".into());
    execute(&m, &a.run, &stem, text.as_deref(), a.dump_iq)
}

fn execute(m: &Manifest, r: &RunArgs, stem: &str, config_text: Option<&str>, dump_iq: bool) -> Result<(), AppError> {
    let cells = m.expand()?;
    let out_dir = &r.output.out_dir;
    fs::create_dir_all(out_dir).map_err(runtime("creating output directory"))?;

    let results = sweep::run_sweep(&cells, m.run.workers).map_err(runtime("sweep"))?;
    print_table(&results);
    let rows = output::rows(&results);

    if r.output.emit.contains(&Emit::Csv) {
        let path = out_dir.join(format!("{stem}.csv"));
        let f = File::create(&path).map_err(runtime("writing CSV"))?;
        output::write_csv(BufWriter::new(f), &rows).map_err(runtime("writing CSV"))?;
        println!("wrote {}", path.display());
    }
    if r.output.emit.contains(&Emit::Json) {
        let path = out_dir.join(format!("{stem}.json"));
        let f = File::create(&path).map_err(runtime("writing JSON"))?;
        output::write_json(BufWriter::new(f), &results, config_text).map_err(runtime("writing JSON"))?;
        println!("wrote {}", path.display());
    }
    if r.output.emit.contains(&Emit::Svg) {
        for p in plot::plot_ser(out_dir, stem, &rows).map_err(runtime("plotting"))? {
            println!("wrote {}", p.display());
        }
    }
    if r.dump_estimates {
        let dumps = sweep::dump_estimates(&cells, r.dump_trials, m.run.workers).map_err(runtime("estimate dump"))?;
        let path = out_dir.join(format!("{stem}_estimates.json"));
        #[derive(Serialize)]
        struct Dump<'a> {
            cells: Vec<ResultRow>,
            trials: &'a [sweep::EstimateDump],
        }
        let cells_meta = cells.iter().map(ResultRow::from_scenario).collect();
        write_json_file(
            &path,
            &Dump {
                cells: cells_meta,
                trials: &dumps,
            },
        )?;
        println!("wrote {}", path.display());
    }
    if dump_iq {
        for (i, sc) in cells.iter().enumerate() {
            let Ok(sim) = Simulator::new(*sc) else { continue };
            let (_, frame) = sim.received_frame(0).map_err(runtime("I/Q dump"))?;
            let path = out_dir.join(format!("{stem}_cell{i}.iq"));
            iq::write_iq(&path, &frame).map_err(runtime("I/Q dump"))?;
            println!("wrote {}", path.display());
        }
    }
    let failed = results.iter().filter(|c| c.result.is_err()).count();
    if failed > 0 {
        return Err(AppError::Runtime(format!("{failed} of {} cells failed", results.len())));
    }
    Ok(())
}

fn print_table(results: &[CellResult]) {
    println!(
        "{:>3} {:>5} {:>16} {:>8} {:>7} {:>6} {:>5} {:>9} {:>10}  {:<21}",
        "sf", "ldro", "estimator", "t_start", "esn0", "bytes", "n_int", "symbols", "ser", "95% ci"
    );
    for c in results {
        let sc = &c.scenario;
        let esn0 = sc
            .noise
            .esn0_db(&sc.modem)
            .map_or_else(|| "-".to_string(), |e| format!("{e:.1}"));
        let head = format!(
            "{:>3} {:>5} {:>16} {:>8.1} {:>7} {:>6} {:>5}",
            sc.modem.sf(),
            sc.modem.ldro(),
            sc.estimator.name(),
            sc.t_start_s,
            esn0,
            sc.payload_bits / 8,
            sc.n_int
        );
        match &c.result {
            Ok(p) => println!(
                "{head} {:>9} {:>10.3e}  [{:.3e}, {:.3e}]",
                p.symbols_total, p.ser, p.ci_lo, p.ci_hi
            ),
            Err(e) => println!("{head} error: {e}"),
        }
    }
}

#[derive(Debug, Serialize)]
struct AdvisorReport {
    sf: u8,
    bandwidth_hz: f64,
    ldro: bool,
    k: f64,
    xi_hz_per_s: f64,
    n_sym: usize,
    midambles_needed: bool,
    update_interval_s: Option<f64>,
    n_star: Option<usize>,
    n_int: Option<usize>,
}

fn advisor(a: &AdvisorArgs) -> Result<(), AppError> {
    let bad = |e: lora_dts_core::Error| {
        AppError::Config(ConfigError::Invalid {
            field: "midamble-advisor",
            message: e.to_string(),
        })
    };
    let cfg = ModemConfig::new(a.sf, a.bandwidth_hz, a.ldro).map_err(bad)?;
    let xi = match (a.xi, a.t_start) {
        (Some(xi), _) => xi,
        (None, Some(t)) => DopplerProfile::LeoPass(a.orbit.geometry()?).doppler_rate(t).map_err(bad)?,
        (None, None) => unreachable!("clap requires --xi or --t-start"),
    };
    let n_sym = match (a.n_sym, a.payload_bytes) {
        (Some(n), _) => n,
        (None, Some(b)) => payload_symbol_count(&cfg, 8 * b, a.cr).map_err(bad)?,
        (None, None) => unreachable!("clap requires --n-sym or --payload-bytes"),
    };
    let advice = recommended_midamble_interval(&cfg, a.k, xi, n_sym).map_err(bad)?;
    let mut report = AdvisorReport {
        sf: a.sf,
        bandwidth_hz: a.bandwidth_hz,
        ldro: a.ldro,
        k: a.k,
        xi_hz_per_s: xi,
        n_sym,
        midambles_needed: false,
        update_interval_s: None,
        n_star: None,
        n_int: None,
    };
    if let MidambleAdvice::Interval {
        update_interval_s,
        n_star,
        n_int,
    } = advice
    {
        report.midambles_needed = true;
        report.update_interval_s = Some(update_interval_s);
        report.n_star = Some(n_star);
        report.n_int = Some(n_int);
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(runtime("JSON"))?);
        return Ok(());
    }
    println!("Doppler rate xi = {xi:.2} Hz/s, {n_sym} payload chirps");
    match advice {
        MidambleAdvice::NotNeeded => println!("no midambles needed: the Doppler rate is zero"),
        MidambleAdvice::Interval {
            update_interval_s,
            n_star,
            n_int,
        } => {
            println!("update interval T = {update_interval_s:.4} s");
            println!("estimates per frame n* = {n_star}");
            println!("midamble every n_int = {n_int} data chirps");
        }
    }
    Ok(())
}
