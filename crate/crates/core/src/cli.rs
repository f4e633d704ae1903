//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use crate::ao::{initialize, AoConfig};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Schedule, Scheme};
use crate::harness::output::{write_all, write_summary};
use crate::harness::validate::{run_criterion, Scale};
use crate::harness::{aggregate, run_experiment};
use crate::model::{derive_csi, generate_channels, sample_delta, DeltaMode};
use crate::precoder::build_qv;
use crate::sinr::min_worst_case_sinr;

#[derive(Debug, Parser)]
#[command(name = "ic-maxmin", version, about = "Robust max-min transceiver design for MIMO interference channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a config file.
    Run(RunArgs),
    /// Goodput versus SNR; writes one summary row per (scheme, SNR, ε).
    SweepSnr(SweepArgs),
    /// Goodput versus CSI error radius at a fixed SNR.
    SweepEps(SweepArgs),
    /// Run the acceptance property suites and print pass/fail per criterion.
    Validate(ValidateArgs),
    /// Write the precoder SDP of one drop as JSON.
    DumpSdp(DumpArgs),
}

fn parse_json_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unrecognized value `{s}`"))
}

#[derive(Debug, Args)]
pub struct Overrides {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV path (summary and trace files are written next to it).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `nominal` or `worst-case`.
    #[arg(long, value_parser = parse_json_enum::<Schedule>)]
    pub schedule: Option<Schedule>,
    /// `boundary` or `interior`.
    #[arg(long, value_parser = parse_json_enum::<DeltaMode>)]
    pub delta_mode: Option<DeltaMode>,
    #[arg(long)]
    pub drops: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(s) = self.schedule {
            cfg.schedule = s;
        }
        if let Some(d) = self.delta_mode {
            cfg.delta_mode = d;
        }
        if let Some(d) = self.drops {
            cfg.drops = d;
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Base config; the flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub l: Option<usize>,
    /// Comma-separated SNR grid in dB.
    #[arg(long, value_delimiter = ',')]
    pub snr_db: Option<Vec<f64>>,
    /// Comma-separated error radii.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Comma-separated schemes (proposed, ia3, max_sinr, min_leakage).
    #[arg(long, value_delimiter = ',', value_parser = parse_json_enum::<Scheme>)]
    pub schemes: Option<Vec<Scheme>>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Smaller sample counts for a smoke test.
    #[arg(long)]
    pub quick: bool,
    /// Criteria to run (default: all).
    #[arg(long, value_delimiter = ',')]
    pub criterion: Vec<u8>,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub drop: usize,
    /// Target as a multiple of the initial minimum surrogate SINR.
    #[arg(long, default_value_t = 1.0)]
    pub gamma_scale: f64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

enum SweepAxis {
    Snr,
    Eps,
}

fn sweep_config(args: &SweepArgs, axis: SweepAxis) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig {
            k: 3,
            m: 4,
            n: 4,
            l: 2,
            snr_db: match axis {
                SweepAxis::Snr => vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
                SweepAxis::Eps => vec![18.0],
            },
            eps: match axis {
                SweepAxis::Snr => vec![0.1, 0.15],
                SweepAxis::Eps => vec![0.02, 0.05, 0.1, 0.15],
            },
            drops: 20,
            schemes: Scheme::ALL.to_vec(),
            seed: 1,
            out: PathBuf::from(match axis {
                SweepAxis::Snr => "sweep_snr.csv",
                SweepAxis::Eps => "sweep_eps.csv",
            }),
            delta_mode: DeltaMode::default(),
            schedule: Schedule::default(),
            baseline_sweeps: crate::baselines::DEFAULT_SWEEPS,
            ao_max_iters: 50,
        },
    };
    for (dst, src) in [(&mut cfg.k, args.k), (&mut cfg.m, args.m), (&mut cfg.n, args.n), (&mut cfg.l, args.l)] {
        if let Some(v) = src {
            *dst = v;
        }
    }
    if let Some(v) = &args.snr_db {
        cfg.snr_db = v.clone();
    }
    if let Some(v) = &args.eps {
        cfg.eps = v.clone();
    }
    if let Some(v) = &args.schemes {
        cfg.schemes = v.clone();
    }
    args.overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn run(cfg: &ExperimentConfig) -> Result<()> {
    let records = run_experiment(cfg)?;
    let summaries = aggregate(&records);
    let paths = write_all(&cfg.out, &records, &summaries)?;
    let failed = records.iter().filter(|r| r.failed.is_some()).count();
    eprintln!(
        "{} records ({failed} failed designs) -> {}, {}, {}",
        records.len(),
        paths.csv.display(),
        paths.summary.display(),
        paths.traces.display()
    );
    Ok(())
}

fn sweep(cfg: &ExperimentConfig) -> Result<()> {
    let summaries = aggregate(&run_experiment(cfg)?);
    let to_io = |e: csv::Error| Error::Io(e.to_string());
    write_summary(create(&cfg.out)?, &summaries).map_err(to_io)?;
    write_summary(std::io::stdout().lock(), &summaries).map_err(to_io)?;
    Ok(())
}

fn validate(args: &ValidateArgs) -> Result<bool> {
    let scale = if args.quick { Scale::Quick } else { Scale::Full };
    let ids: Vec<u8> = if args.criterion.is_empty() { (1..=9).collect() } else { args.criterion.clone() };
    if let Some(bad) = ids.iter().find(|&&i| !(1..=9).contains(&i)) {
        return Err(Error::Config(format!("no criterion {bad} (expected 1 to 9)")));
    }
    let mut all = true;
    for id in ids {
        let report = run_criterion(id, scale);
        println!("{report}");
        all &= report.passed;
    }
    Ok(all)
}

fn dump_sdp(args: &DumpArgs) -> Result<()> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let dims = cfg.dims(cfg.snr_db[0], cfg.eps[0])?;
    let seed = crate::harness::run::drop_seed(cfg.seed, args.drop);
    let h = generate_channels(&dims, seed);
    let csi = derive_csi(&h, &sample_delta(&dims, seed, cfg.delta_mode), dims.eps)?;
    let tx = initialize(&dims, &csi, &AoConfig { seed, ..AoConfig::default() })?;
    let (gamma, _) = min_worst_case_sinr(&csi, &tx, dims.noise)?;
    if gamma <= 0.0 {
        return Err(Error::NonPositiveSinr(gamma));
    }
    let inst = build_qv(&csi, &tx.decorrelators, gamma * args.gamma_scale, &dims)?;
    let text = serde_json::to_string_pretty(&inst.to_sdp().to_json()).map_err(|e| Error::Io(e.to_string()))?;
    match &args.out {
        Some(p) => writeln!(create(p)?, "{text}")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(a) => {
            let mut cfg = ExperimentConfig::load(&a.config)?;
            a.overrides.apply(&mut cfg);
            cfg.validate()?;
            run(&cfg).map(|_| true)
        }
        Command::SweepSnr(a) => sweep(&sweep_config(&a, SweepAxis::Snr)?).map(|_| true),
        Command::SweepEps(a) => sweep(&sweep_config(&a, SweepAxis::Eps)?).map(|_| true),
        Command::Validate(a) => validate(&a),
        Command::DumpSdp(a) => dump_sdp(&a).map(|_| true),
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
