//! `ricci-lab`: runs, validates and reports on scenario files.

mod plot;
mod report;
mod run;
mod scenario;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use scenario::Severity;

const EXIT_VALIDATION: u8 = 1;
const EXIT_TASK: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "ricci-lab", version, about = "Ricci flow laboratory on homogeneous three-manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and execute a scenario.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory; defaults to the scenario's `output` field, then `<scenario stem>-out`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        /// Treat validation warnings as errors.
        #[arg(long)]
        strict: bool,
    },
    /// Check a scenario without running it.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        strict: bool,
    },
    /// Verify checksums and print a summary of a finished run.
    Report {
        /// Manifest file or the run directory containing `manifest.json`.
        manifest: PathBuf,
    },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn load(path: &Path, strict: bool) -> Result<(scenario::Scenario, Vec<u8>), u8> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: reading {}: {e}", path.display());
            return Err(EXIT_IO);
        }
    };
    let text = match String::from_utf8(bytes.clone()) {
        Ok(t) => t,
        Err(_) => {
            eprintln!("error: {}: not UTF-8", path.display());
            return Err(EXIT_VALIDATION);
        }
    };
    let sc = match scenario::parse(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return Err(EXIT_VALIDATION);
        }
    };
    let findings = sc.validate();
    for f in &findings {
        eprintln!("{f}");
    }
    let fatal = findings.iter().any(|f| f.severity == Severity::Error || strict);
    if fatal {
        return Err(EXIT_VALIDATION);
    }
    Ok((sc, bytes))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Validate { scenario, strict } => match load(&scenario, strict) {
            Ok(_) => {
                println!("{}: ok", scenario.display());
                0
            }
            Err(c) => c,
        },
        Command::Run { scenario, out, jobs, strict } => match load(&scenario, strict) {
            Err(c) => c,
            Ok((sc, bytes)) => {
                let out = out.unwrap_or_else(|| {
                    let base = scenario.parent().unwrap_or(Path::new("."));
                    match &sc.output {
                        Some(o) => base.join(o),
                        None => base.join(format!(
                            "{}-out",
                            scenario.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario")
                        )),
                    }
                });
                match run::run_scenario(&sc, &bytes, &out, jobs.max(1)) {
                    Ok(m) => {
                        for t in m.tasks.iter().filter(|t| t.status == run::TaskStatus::Failed) {
                            eprintln!("task {:02} ({}) failed: {}", t.index, t.kind, t.error.as_deref().unwrap_or(""));
                        }
                        println!("{} tasks, {} files, manifest {}", m.tasks.len(), m.files.len(), out.join(run::MANIFEST_NAME).display());
                        if m.failed_tasks() > 0 {
                            EXIT_TASK
                        } else {
                            0
                        }
                    }
                    Err(e) => {
                        eprintln!("error: {:#}", e.error);
                        if e.io {
                            EXIT_IO
                        } else {
                            EXIT_VALIDATION
                        }
                    }
                }
            }
        },
        Command::Report { manifest } => {
            let path = run::manifest_path(&manifest);
            let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
            let parsed = fs::read(&path)
                .map_err(|e| (EXIT_IO, format!("reading {}: {e}", path.display())))
                .and_then(|b| {
                    serde_json::from_slice::<run::RunManifest>(&b)
                        .map_err(|e| (EXIT_VALIDATION, format!("{}: {e}", path.display())))
                });
            match parsed {
                Err((c, msg)) => {
                    eprintln!("error: {msg}");
                    c
                }
                Ok(m) => match report::verify(&m, &dir) {
                    Err(e) => {
                        eprintln!("error: {e:#}");
                        EXIT_IO
                    }
                    Ok(()) => {
                        print!("{}", report::summarize(&m));
                        if m.failed_tasks() > 0 {
                            EXIT_TASK
                        } else {
                            0
                        }
                    }
                },
            }
        }
    };
    ExitCode::from(code)
}
