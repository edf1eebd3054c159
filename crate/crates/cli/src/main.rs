use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use casorati_core::report::EXIT_INVALID;
use casorati_core::scenario::{BUILTINS, ScenarioFile, SceneKind};
use casorati_core::{Error, Scene};
use clap::{Parser, Subcommand};

/// Pointwise checks of Casorati curvature inequalities for Riemannian maps and
/// submersions involving quaternionic space forms.
#[derive(Parser)]
#[command(name = "casorati", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a scenario (builtin name or file) and write the JSON report.
    Run {
        scenario: String,
        /// JSON output path (stdout if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write (point, theorem, variant, lhs, rhs, slack, verdict) rows.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Abort on the first invalid point.
        #[arg(long)]
        strict: bool,
        /// Override a tolerance: `equality=<v>` or `space_form=<v>`.
        #[arg(long = "tolerance", value_name = "KEY=VALUE")]
        tolerances: Vec<String>,
    },
    /// List builtin scenarios.
    List,
    /// Check scene invariants without evaluating theorems.
    Validate { scenario: String },
}

fn load(reference: &str, overrides: &[String]) -> Result<Scene, Error> {
    let mut file = ScenarioFile::load(reference)?;
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--tolerance `{o}`: expected KEY=VALUE")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("--tolerance `{o}`: `{v}` is not a number")))?;
        match k.trim() {
            "equality" => file.tolerances.equality = Some(v),
            "space_form" => file.tolerances.space_form = Some(v),
            other => return Err(Error::Config(format!("unknown tolerance `{other}`"))),
        }
    }
    Scene::from_file(&file)
}

fn write_to(path: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Io(e.to_string())),
    }
}

fn execute(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::List => {
            for (name, src) in BUILTINS {
                let f = ScenarioFile::parse(src)?;
                let mode = match Scene::from_file(&f)?.kind {
                    SceneKind::Chart(_) => "chart",
                    SceneKind::Pointwise(_) => "pointwise",
                };
                println!("{name:<26} {mode:<10} {}", f.theorems.join(","));
            }
            Ok(0)
        }
        Command::Validate { scenario } => {
            let scene = load(&scenario, &[])?;
            let report = casorati_core::validate(&scene);
            let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
            json.push('\n');
            write_to(&None, &json)?;
            if let Some((i, e)) = report.first_error() {
                eprintln!("point {i}: {e}");
            }
            Ok(report.exit_code())
        }
        Command::Run {
            scenario,
            output,
            csv,
            strict,
            tolerances,
        } => {
            let start = Instant::now();
            let scene = load(&scenario, &tolerances)?;
            let report = casorati_core::run(&scene, strict)?;
            write_to(&output, &report.to_json())?;
            if let Some(p) = csv {
                let f = File::create(&p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
                report.write_csv(f)?;
            }
            for p in report.points.iter().filter(|p| !p.valid) {
                eprintln!("point {}: {}", p.index, p.error.as_deref().unwrap_or("invalid"));
            }
            eprintln!(
                "{}: {} points, {} violated, {} invalid in {:.2?}",
                report.scene,
                report.points.len(),
                report.violated,
                report.invalid_points,
                start.elapsed()
            );
            Ok(report.exit_code())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID as u8)
        }
    }
}
