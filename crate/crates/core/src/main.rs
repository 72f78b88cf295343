use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use confsub::catalog::{describe, NAMES};
use confsub::cli::{export_field, run, write_csv, Exit, KeyValues, RunConfig, Task, THREADS_ENV};

#[derive(Parser)]
#[command(name = "confsub", version, about = "Conformal invariants of parametrized submanifolds")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Key-value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Seed for random maps and bumps
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the report and CSV grids
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the tasks listed in the configuration
    Run(Common),
    /// Conformal factor, invariants, identity and integrability checks
    Analyze(Common),
    /// Möbius invariance and lift independence of the conformal metric
    Invariance(Common),
    /// Willmore residual and its refinement
    Willmore(Common),
    /// First variation of the conformal volume against seeded bumps
    Variation(Common),
    /// Conformal isotropy classification
    Isotropy(Common),
    /// Catalog surfaces
    Catalog {
        #[command(subcommand)]
        cmd: CatalogCmd,
    },
    /// Write one field as a CSV grid
    Export {
        #[command(flatten)]
        common: Common,
        /// Field name
        #[arg(long)]
        field: String,
    },
}

#[derive(Subcommand)]
enum CatalogCmd {
    /// List catalog surfaces
    List,
}

fn load(c: &Common, task: Option<Task>) -> Result<RunConfig, Exit> {
    let mut kv = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Exit::Config(format!("{}: {e}", p.display())))?;
            KeyValues::parse(&text).map_err(|e| Exit::Config(e.to_string()))?
        }
        None => KeyValues::default(),
    };
    for s in &c.set {
        kv.set(s).map_err(|e| Exit::Config(e.to_string()))?;
    }
    if let Some(s) = c.seed {
        kv.insert("seeds", &s.to_string());
    }
    if let Some(t) = task {
        kv.insert("tasks", t.name());
    }
    if let Some(o) = &c.out {
        kv.insert("output_dir", &o.to_string_lossy());
    }
    RunConfig::from_kv(&kv).map_err(|e| Exit::from_error(&e))
}

fn threads(c: &Common) -> Result<(), Exit> {
    let n = match c.threads {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| Exit::Config(format!("{THREADS_ENV}: '{v}' is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Exit::Config(e.to_string()))?;
    }
    Ok(())
}

fn execute(c: &Common, task: Option<Task>) -> Result<Exit, Exit> {
    threads(c)?;
    let cfg = load(c, task)?;
    let out = run(&cfg);
    let text = out.rendered();
    print!("{text}");
    for w in out.report.warnings() {
        eprintln!("warning: {w}");
    }
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir).map_err(|e| Exit::TaskFailed(e.to_string()))?;
        std::fs::write(dir.join("report.txt"), &text).map_err(|e| Exit::TaskFailed(e.to_string()))?;
        if let Some(chart) = &out.chart {
            for f in &out.fields {
                write_csv(&dir.join("fields"), chart, f).map_err(|e| Exit::TaskFailed(e.to_string()))?;
            }
        }
    }
    Ok(out.exit)
}

fn export(c: &Common, field: &str) -> Result<Exit, Exit> {
    threads(c)?;
    let cfg = load(c, None)?;
    let (chart, f) = export_field(&cfg, field).map_err(|e| Exit::from_error(&e))?;
    match &cfg.output_dir {
        Some(dir) => {
            let p = write_csv(dir, &chart, &f).map_err(|e| Exit::TaskFailed(e.to_string()))?;
            eprintln!("wrote {}", p.display());
        }
        None => print!("{}", confsub::cli::to_csv(&chart, &f)),
    }
    Ok(Exit::Ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Run(c) => execute(c, None),
        Cmd::Analyze(c) => execute(c, Some(Task::Analyze)),
        Cmd::Invariance(c) => execute(c, Some(Task::Invariance)),
        Cmd::Willmore(c) => execute(c, Some(Task::Willmore)),
        Cmd::Variation(c) => execute(c, Some(Task::Variation)),
        Cmd::Isotropy(c) => execute(c, Some(Task::Isotropy)),
        Cmd::Catalog { cmd: CatalogCmd::List } => {
            for n in NAMES {
                println!("{n:<20} {}", describe(n));
            }
            Ok(Exit::Ok)
        }
        Cmd::Export { common, field } => export(common, field),
    };
    let exit = res.unwrap_or_else(|e| e);
    match &exit {
        Exit::Ok => {}
        Exit::TaskFailed(m) => eprintln!("error: task failed: {m}"),
        Exit::Config(m) => eprintln!("error: {m}"),
        Exit::Grid(m) => eprintln!("error: {m}"),
    }
    ExitCode::from(exit.code() as u8)
}
