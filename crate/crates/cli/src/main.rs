use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use eikonal_core::canon::canonicalize;
use eikonal_core::dynamics::HydraSet;
use eikonal_core::eikonal::build_pipeline;
use eikonal_core::fd::{fd_wave, sample_wave, ControlSignal, GridSpec, DEFAULT_BUMP_WIDTH};
use eikonal_core::io::{graph_json, hydra_dot, hydra_json, read_graph, spectrum_dot, to_json, to_value as value};
use eikonal_core::spectrum::build_spectrum;
use eikonal_core::verify::verify_instance;
use eikonal_core::{Error, MetricGraph, Rational, Result};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Hydra,
    Partition,
    Parametric,
    Canonical,
    Spectrum,
    Simulate,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Json,
    Dot,
}

/// Canonical eikonal algebra of a metric graph.
#[derive(Debug, Parser)]
#[command(name = "eikonal-canon", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Graph file with `vertex` and `edge` records.
    #[arg(long)]
    graph: PathBuf,
    /// Control vertices, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    sigma: Vec<String>,
    /// Final time as `p/q` or an integer.
    #[arg(long)]
    horizon: Rational,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Use the time functions without the `+1` shift.
    #[arg(long)]
    unshifted: bool,
    /// Directory for artifacts; results go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "json")]
    emit: Vec<Emit>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(1)
        }
    }
}

fn name(c: Command) -> &'static str {
    match c {
        Command::Hydra => "hydra",
        Command::Partition => "partition",
        Command::Parametric => "parametric",
        Command::Canonical => "canonical",
        Command::Spectrum => "spectrum",
        Command::Simulate => "simulate",
        Command::Verify => "verify",
    }
}

struct Output {
    json: Value,
    dot: Option<String>,
    files: Vec<(String, String)>,
    ok: bool,
}

fn run(cli: &Cli) -> Result<bool> {
    let g = read_graph(&cli.graph)?;
    let names: Vec<&str> = cli.sigma.iter().map(String::as_str).collect();
    let sigma = g.boundary_ids(&names)?;
    if !cli.horizon.is_positive() {
        return Err(Error::InvalidInput(format!("horizon {} is not positive", cli.horizon)));
    }
    let out = execute(cli, &g, &sigma)?;
    let envelope = json!({
        "command": name(cli.command),
        "graph": graph_json(&g),
        "sigma": cli.sigma,
        "horizon": cli.horizon,
        "result": out.json,
    });
    let text = to_json(&envelope)?;
    match &cli.out {
        None => print!("{text}"),
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let stem = name(cli.command);
            if cli.emit.contains(&Emit::Json) {
                write(dir, &format!("{stem}.json"), &text)?;
            }
            if let (true, Some(dot)) = (cli.emit.contains(&Emit::Dot), &out.dot) {
                write(dir, &format!("{stem}.dot"), dot)?;
            }
            for (file, body) in &out.files {
                write(dir, file, body)?;
            }
        }
    }
    Ok(out.ok)
}

fn write(dir: &Path, file: &str, body: &str) -> Result<()> {
    std::fs::write(dir.join(file), body)?;
    Ok(())
}

fn execute(cli: &Cli, g: &MetricGraph, sigma: &[usize]) -> Result<Output> {
    let plain = |json| Output { json, dot: None, files: vec![], ok: true };
    let shifted = !cli.unshifted;
    Ok(match cli.command {
        Command::Hydra => {
            let set = HydraSet::build(g, sigma, &cli.horizon)?;
            Output { dot: Some(hydra_dot(g, &set)), ..plain(hydra_json(g, &set)) }
        }
        Command::Partition => plain(value(&build_pipeline(g, sigma, &cli.horizon, cli.tol, shifted)?.partition)?),
        Command::Parametric => plain(value(&build_pipeline(g, sigma, &cli.horizon, cli.tol, shifted)?.repr)?),
        Command::Canonical => {
            let p = build_pipeline(g, sigma, &cli.horizon, cli.tol, shifted)?;
            plain(value(&canonicalize(&p.repr, cli.tol)?)?)
        }
        Command::Spectrum => {
            let p = build_pipeline(g, sigma, &cli.horizon, cli.tol, shifted)?;
            let sp = build_spectrum(&canonicalize(&p.repr, cli.tol)?, cli.tol)?;
            Output { dot: Some(spectrum_dot(&sp)), ..plain(value(&sp)?) }
        }
        Command::Simulate => {
            let grid = GridSpec::fitting(g, &cli.horizon, 512)?;
            let set = HydraSet::build(g, sigma, &cli.horizon)?;
            let width = DEFAULT_BUMP_WIDTH;
            let controls: Vec<_> = sigma.iter().map(|&s| ControlSignal::bump(s, width)).collect();
            let fd = fd_wave(g, &controls, &cli.horizon, &grid)?;
            let ev = sample_wave(g, &set, &controls, &grid)?;
            let err = eikonal_core::fd::compare_snapshots(&ev, &fd)?;
            Output {
                json: json!({ "h": grid.h, "bump_width": width, "relative_l2": err }),
                dot: None,
                files: vec![("fd.csv".into(), fd.to_csv(g)), ("wave.csv".into(), ev.to_csv(g))],
                ok: true,
            }
        }
        Command::Verify => {
            let rep = verify_instance(g, sigma, &cli.horizon, cli.tol, 0x5EED)?;
            for c in &rep.checks {
                eprintln!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name);
            }
            Output { ok: rep.passed(), ..plain(value(&rep)?) }
        }
    })
}
