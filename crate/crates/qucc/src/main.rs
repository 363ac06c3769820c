use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qucc::driver::{run, RunOptions, System};
use qucc::fcidump::read_fcidump;
use qucc::info::info_report;
use qucc::manifest::{Large, Method, MethodSpec, ScanManifest};
use qucc::scan::{scan, write_csv, ScanOptions};
use qucc::Error;
use qucc_core::SeedOrder;

#[derive(Parser)]
#[command(name = "qucc", version, about = "Quadratic unitary coupled cluster energies from FCIDUMP integrals")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "QUCC_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl From<Switch> for bool {
    fn from(s: Switch) -> bool {
        matches!(s, Switch::On)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    LargestFirst,
    LargestLast,
}

impl From<Order> for SeedOrder {
    fn from(o: Order) -> SeedOrder {
        match o {
            Order::LargestFirst => SeedOrder::LargestFirst,
            Order::LargestLast => SeedOrder::LargestLast,
        }
    }
}

#[derive(clap::Args)]
struct Shared {
    /// Promote small singles whose solved angle exceeds the threshold.
    #[arg(long, value_enum, default_value = "on")]
    promote_singles: Switch,
    /// Promote small doubles as well.
    #[arg(long, value_enum, default_value = "off")]
    promote_doubles: Switch,
    /// Compare b (and A when N <= 30) with finite differences.
    #[arg(long)]
    fd_check: bool,
    #[arg(long, value_enum, default_value = "largest-first")]
    seed_order: Order,
    /// Use the FCI root with the largest Hartree-Fock overlap as the benchmark.
    #[arg(long)]
    track_hf: bool,
    /// FCI roots computed when tracking.
    #[arg(long, default_value_t = 4)]
    roots: usize,
}

impl Shared {
    fn options(&self, large: Large) -> RunOptions {
        RunOptions {
            large,
            promote_singles: self.promote_singles.into(),
            promote_doubles: self.promote_doubles.into(),
            fd_check: self.fd_check,
            seed_order: self.seed_order.into(),
            roots: self.roots,
            track_hf: self.track_hf,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print sizes and counts for an FCIDUMP file.
    Info { fcidump: PathBuf },
    /// Run one method and print a JSON record.
    Run {
        fcidump: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        /// Exactly treated factors (`all` for every factor).
        #[arg(long, default_value = "0", value_parser = parse_large)]
        large: Large,
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        pretty: bool,
    },
    /// Run a manifest's method matrix and write CSV.
    Scan {
        manifest: PathBuf,
        /// Method specification such as `fci` or `qucc:20,30,all`; replaces
        /// the manifest's methods when given.
        #[arg(long = "method", value_parser = parse_spec)]
        methods: Vec<MethodSpec>,
        #[command(flatten)]
        shared: Shared,
        /// Leave the wall_seconds column empty.
        #[arg(long)]
        no_timing: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: qucc::manifest::ManifestError| e.to_string())
}

fn parse_large(s: &str) -> Result<Large, String> {
    s.parse().map_err(|e: qucc::manifest::ManifestError| e.to_string())
}

fn parse_spec(s: &str) -> Result<MethodSpec, String> {
    s.parse().map_err(|e: qucc::manifest::ManifestError| e.to_string())
}

fn execute(cli: Cli) -> Result<(), Error> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Error::Usage(e.to_string()))?;
    }
    let stdout = io::stdout();
    match cli.command {
        Command::Info { fcidump } => {
            let dump = read_fcidump(&fcidump)?;
            write!(stdout.lock(), "{}", info_report(&dump))?;
        }
        Command::Run {
            fcidump,
            method,
            large,
            shared,
            pretty,
        } => {
            let dump = read_fcidump(&fcidump)?;
            let mut system = System::new(dump.integrals);
            let record = run(&mut system, method, &shared.options(large))?;
            let text = if pretty {
                serde_json::to_string_pretty(&record)
            } else {
                serde_json::to_string(&record)
            }
            .map_err(io::Error::from)?;
            writeln!(stdout.lock(), "{text}")?;
        }
        Command::Scan {
            manifest,
            methods,
            shared,
            no_timing,
            output,
        } => {
            let manifest = ScanManifest::load(&manifest)?;
            let methods = (!methods.is_empty()).then_some(methods.as_slice());
            if methods.unwrap_or(&manifest.methods).is_empty() {
                return Err(Error::Usage("no methods given in the manifest or with --method".into()));
            }
            let opts = ScanOptions {
                run: shared.options(Large::Count(0)),
                omit_timing: no_timing,
            };
            let rows = scan(&manifest, methods, &opts);
            match output {
                Some(path) => write_csv(&rows, no_timing, BufWriter::new(File::create(path)?))?,
                None => write_csv(&rows, no_timing, stdout.lock())?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let object = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            println!("{object}");
            ExitCode::FAILURE
        }
    }
}
