//! `supsim` command line.
//!
//! Exit codes: 0 success, 1 simulation failure, 2 configuration or usage
//! error, 3 file system error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use supsim_core::experiments::{
    mspe_run_length, replicate, store_fill_rate, sweep, sweep_rows, MspeError, ReplicateOptions, ScenarioResult,
    SweepError,
};
use supsim_core::export::{write_csv, write_mspe_csv, write_sweep_summary, write_txt};
use supsim_core::model::SimError;
use supsim_core::scenario::{ConfigError, IntensityMapping, ScenarioConfig};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

#[derive(Parser, Debug)]
#[command(name = "supsim", version, about = "Three-stage supply chain simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a scenario file and print the effective configuration.
    Validate {
        file: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run every replication of one scenario.
    Run {
        file: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        output: Output,
    },
    /// Run the 27-scenario factorial design built on a base scenario.
    Sweep {
        file: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        output: Output,
    },
    /// Compare candidate run lengths by mean square pure error.
    Mspe {
        file: PathBuf,
        /// Comma-separated run lengths in working days, increasing.
        #[arg(long, default_value = "130,260,390,520", value_parser = parse_lengths_arg)]
        lengths: Lengths,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        output: Output,
    },
    /// Serve the HTTP interface.
    Serve {
        /// Scenario to load at startup.
        file: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory for stored scenarios and results.
        #[arg(long, env = "SUPSIM_DATA_DIR", default_value = "supsim-data")]
        data_dir: PathBuf,
        /// Simulations allowed to run at once.
        #[arg(long, default_value_t = 2)]
        jobs: usize,
    },
}

#[derive(Args, Debug, Clone, Default)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    /// Common random numbers across scenarios.
    #[arg(long)]
    crn: bool,
    #[arg(long)]
    reps: Option<u32>,
    #[arg(long)]
    warmup_days: Option<u32>,
    #[arg(long, value_enum)]
    intensity_mapping: Option<Mapping>,
    /// Parallel simulation instances; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args, Debug, Clone)]
struct Output {
    #[arg(long, env = "SUPSIM_OUT_DIR", default_value = "supsim-out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Txt,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Mapping {
    Inverse,
    Direct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lengths(pub Vec<u32>);

/// Parse `130,260,390`: positive, strictly increasing integers.
pub fn parse_lengths(text: &str) -> Result<Vec<u32>, String> {
    let mut out: Vec<u32> = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        let n: u32 = part.parse().map_err(|_| format!("`{part}` is not a whole number of days"))?;
        if n == 0 {
            return Err("run lengths must be positive".into());
        }
        if out.last().is_some_and(|&last| n <= last) {
            return Err(format!("run lengths must increase, {n} follows {}", out[out.len() - 1]));
        }
        out.push(n);
    }
    Ok(out)
}

fn parse_lengths_arg(text: &str) -> Result<Lengths, String> {
    parse_lengths(text).map(Lengths)
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Io(String),
    Sim(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Io(_) => EXIT_IO,
            Failure::Sim(_) => EXIT_FAILURE,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Io(m) | Failure::Sim(m) => m,
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn config_failure(file: &Path, e: ConfigError) -> Failure {
    Failure::Config(format!("{}: {e}", file.display()))
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => Failure::Config(c.to_string()),
            other => Failure::Sim(other.to_string()),
        }
    }
}

fn load(file: &Path, o: &Overrides) -> Result<ScenarioConfig, Failure> {
    let text = fs::read_to_string(file).map_err(|e| io_failure(file, e))?;
    let mut c = ScenarioConfig::from_json(&text).map_err(|e| config_failure(file, e))?;
    if let Some(seed) = o.seed {
        c.run.master_seed = seed;
    }
    if o.crn {
        c.run.crn = true;
    }
    if let Some(r) = o.reps {
        c.run.replications = r;
    }
    if let Some(w) = o.warmup_days {
        c.run.warmup_days = w;
    }
    match o.intensity_mapping {
        Some(Mapping::Inverse) => c.intensity_mapping = IntensityMapping::Inverse,
        Some(Mapping::Direct) => c.intensity_mapping = IntensityMapping::Direct,
        None => {}
    }
    c.validate().map_err(|e| config_failure(file, e))?;
    Ok(c)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_failure(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<(), Failure> {
    w.flush().map_err(|e| io_failure(path, e))
}

fn out_dir(out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))
}

fn summary(result: &ScenarioResult, format: Format) -> String {
    let mut s = String::new();
    match format {
        Format::Csv => {
            s.push_str("node_id,node_kind,fill_rate_orders,fill_rate_orders_std,fill_rate_quantity,avg_on_hand\n");
            for a in &result.aggregate {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    a.node_id,
                    a.node_kind.as_str(),
                    a.fill_rate_orders.mean,
                    a.fill_rate_orders.std,
                    a.fill_rate_quantity.mean,
                    a.avg_on_hand.mean
                );
            }
        }
        Format::Txt => {
            let _ = writeln!(s, "{:>5} {:<20} {:>8} {:>8} {:>8} {:>11}", "node", "kind", "fr_ord", "std", "fr_qty", "avg_on_hand");
            for a in &result.aggregate {
                let _ = writeln!(
                    s,
                    "{:>5} {:<20} {:>8.4} {:>8.4} {:>8.4} {:>11.2}",
                    a.node_id,
                    a.node_kind.as_str(),
                    a.fill_rate_orders.mean,
                    a.fill_rate_orders.std,
                    a.fill_rate_quantity.mean,
                    a.avg_on_hand.mean
                );
            }
        }
    }
    for w in &result.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

fn cmd_run(config: &ScenarioConfig, jobs: usize, output: &Output) -> Result<(), Failure> {
    let result = replicate(
        config,
        &ReplicateOptions {
            jobs,
            control: None,
        },
    )?;
    out_dir(&output.out)?;
    let csv_path = output.out.join("results.csv");
    let mut w = create(&csv_path)?;
    write_csv(std::slice::from_ref(&result), &mut w).map_err(|e| io_failure(&csv_path, e))?;
    finish(&csv_path, w)?;

    let txt_path = output.out.join("results.txt");
    let mut w = create(&txt_path)?;
    let preamble = format!("effective configuration\n{}", config.to_json_pretty());
    write_txt(std::slice::from_ref(&result), Some(&preamble), &mut w).map_err(|e| io_failure(&txt_path, e))?;
    finish(&txt_path, w)?;

    print!("{}", summary(&result, output.format));
    Ok(())
}

fn cmd_sweep(config: &ScenarioConfig, jobs: usize, output: &Output) -> Result<(), Failure> {
    out_dir(&output.out)?;
    let cfg_path = output.out.join("config.json");
    fs::write(&cfg_path, config.to_json_pretty()).map_err(|e| io_failure(&cfg_path, e))?;
    let marker = output.out.join(INCOMPLETE_MARKER);
    if marker.exists() {
        fs::remove_file(&marker).map_err(|e| io_failure(&marker, e))?;
    }

    let mut rows = Vec::new();
    let ext = match output.format {
        Format::Csv => "csv",
        Format::Txt => "txt",
    };
    let opts = ReplicateOptions {
        jobs,
        control: None,
    };
    let outcome = sweep(config, &opts, |k, scenario, result| {
        let path = output.out.join(format!("{}.{ext}", scenario.name));
        let mut w = BufWriter::new(File::create(&path)?);
        match output.format {
            Format::Csv => write_csv(std::slice::from_ref(result), &mut w)?,
            Format::Txt => write_txt(std::slice::from_ref(result), Some(&scenario.factors.label()), &mut w)?,
        }
        w.flush()?;
        rows.extend(sweep_rows(k as u32 + 1, result));
        eprintln!(
            "{} {} store fill rate {:.4}",
            scenario.name,
            scenario.factors.label(),
            result
                .replications
                .iter()
                .map(|r| store_fill_rate(&r.nodes))
                .sum::<f64>()
                / result.replications.len().max(1) as f64
        );
        Ok(())
    });

    let complete = outcome.is_ok();
    let summary_path = output.out.join(if complete { "summary.csv" } else { "summary.incomplete.csv" });
    let mut w = create(&summary_path)?;
    write_sweep_summary(&rows, &mut w).map_err(|e| io_failure(&summary_path, e))?;
    finish(&summary_path, w)?;

    match outcome {
        Ok(results) => {
            println!("{} scenarios, {} summary rows", results.len(), rows.len());
            Ok(())
        }
        Err(e) => {
            let failure = match &e {
                SweepError::Io { .. } => Failure::Io(e.to_string()),
                SweepError::Sim { source, .. } => match source {
                    SimError::Config(_) => Failure::Config(e.to_string()),
                    _ => Failure::Sim(e.to_string()),
                },
            };
            let note = format!(
                "sweep stopped after {} of 27 scenarios: {}\n",
                rows.len() / config.run.replications.max(1) as usize,
                failure.message()
            );
            fs::write(&marker, note).map_err(|e| io_failure(&marker, e))?;
            Err(failure)
        }
    }
}

fn cmd_mspe(config: &ScenarioConfig, lengths: &[u32], jobs: usize, output: &Output) -> Result<(), Failure> {
    let opts = ReplicateOptions {
        jobs,
        control: None,
    };
    let analysis = mspe_run_length(config, lengths, config.run.replications, &opts).map_err(|e| match e {
        MspeError::Sim(s) => Failure::from(s),
        other => Failure::Config(other.to_string()),
    })?;
    out_dir(&output.out)?;
    let path = output.out.join("mspe.csv");
    let mut w = create(&path)?;
    write_mspe_csv(&analysis, &mut w).map_err(|e| io_failure(&path, e))?;
    finish(&path, w)?;
    for p in &analysis.points {
        println!("{:>6} days  mean {:.4}  mspe {:.3e}", p.length_days, p.mean, p.mspe);
    }
    println!("selected run length: {} days", analysis.selected_length);
    Ok(())
}

fn cmd_serve(file: Option<&Path>, port: u16, data_dir: &Path, jobs: usize) -> Result<(), Failure> {
    let state = supsim_service::AppState::open(data_dir, jobs).map_err(|e| io_failure(data_dir, e))?;
    if let Some(file) = file {
        let config = load(file, &Overrides::default())?;
        let id = state.preload(config).map_err(|e| io_failure(data_dir, e))?;
        eprintln!("loaded {} as scenario {id}", file.display());
    }
    let addr = std::net::SocketAddr::from(([127, 0, 0, 1], port));
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Sim(e.to_string()))?;
    eprintln!("listening on http://{addr}");
    rt.block_on(supsim_service::serve(addr, state))
        .map_err(|e| Failure::Io(format!("{addr}: {e}")))
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { file, overrides } => {
            let c = load(&file, &overrides)?;
            print!("{}", c.to_json_pretty());
            Ok(())
        }
        Command::Run {
            file,
            overrides,
            output,
        } => cmd_run(&load(&file, &overrides)?, overrides.jobs, &output),
        Command::Sweep {
            file,
            overrides,
            output,
        } => cmd_sweep(&load(&file, &overrides)?, overrides.jobs, &output),
        Command::Mspe {
            file,
            lengths,
            overrides,
            output,
        } => cmd_mspe(&load(&file, &overrides)?, &lengths.0, overrides.jobs, &output),
        Command::Serve {
            file,
            port,
            data_dir,
            jobs,
        } => cmd_serve(file.as_deref(), port, &data_dir, jobs),
    }
}

/// Parse `args` (program name first) and run. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths_parse() {
        assert_eq!(parse_lengths("130,260, 390").unwrap(), vec![130, 260, 390]);
        assert_eq!(parse_lengths("7").unwrap(), vec![7]);
        assert!(parse_lengths("").is_err());
        assert!(parse_lengths("10,10").is_err());
        assert!(parse_lengths("20,10").is_err());
        assert!(parse_lengths("0,10").is_err());
        assert!(parse_lengths("1,x").is_err());
        assert!(parse_lengths("-5").is_err());
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(main_with_args(["supsim", "run", "x.json", "--bogus"]), EXIT_CONFIG);
    }
}
