use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use csawg::harness::{best_by_final_error, run_all, run_experiment, sweep, ExperimentConfig, Grid};
use csawg::presets::{preset, PRESET_NAMES};
use csawg::report::{combined_csv_string, render_svg, write_csv, PlotOptions, XAxis};
use csawg::theory::{summarize, verify_theorems, CheckStatus};
use csawg::{Trace, TraceStatus};

#[derive(Parser)]
#[command(name = "csawg", version, about = "Step-size planning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Run {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run several configs and overlay them in one plot.
    Compare {
        /// Experiment config (JSON). Repeat for each run to overlay.
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a parameter grid over a base config.
    Sweep {
        /// Sweep file: `{"base": <config>, "grid": {"optimizer.gamma": [...]}}`.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Check the quadratic step-size theorems on random instances.
    Verify {
        /// Number of random quadratics.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Largest dimension drawn.
        #[arg(long, default_value_t = 10)]
        max_dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for verify.json.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Reproduce a canned experiment set.
    Repro {
        /// One of convex-fig4, rosenbrock-fig6, rosenbrock-p5-fig8, rosenbrock-adam-fig10.
        preset: String,
        /// Output root; files go to `<out>/<preset>/`.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        svg: SvgFlag,
    },
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted-path override, e.g. `optimizer.gamma=0.002`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(flatten)]
    svg: SvgFlag,
}

#[derive(Args)]
struct SvgFlag {
    /// Write an SVG plot (default).
    #[arg(long, overrides_with = "no_svg")]
    svg: bool,
    /// Skip the SVG plot.
    #[arg(long, overrides_with = "svg")]
    no_svg: bool,
}

impl SvgFlag {
    fn enabled(&self) -> bool {
        self.svg || !self.no_svg
    }
}

/// Bad input from the user: exit code 2 rather than 1.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Usage(format!("cannot read {}: {e}", path.display())).into())
}

fn load_config(path: &Path, common: &Common) -> Result<ExperimentConfig> {
    let text = read_text(path)?;
    let cfg = ExperimentConfig::from_json(&text).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
    customize(cfg, common)
}

fn customize(cfg: ExperimentConfig, common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = cfg.with_overrides(&common.overrides).map_err(|e| Usage(e.to_string()))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn slug(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "run".into()
    } else {
        s
    }
}

fn x_axis_for(traces: &[Trace]) -> XAxis {
    if traces.iter().all(|t| t.total_grad_evals == t.records.last().map_or(0, |r| r.iteration)) {
        XAxis::Iteration
    } else {
        XAxis::GradEvals
    }
}

fn plot(traces: &[Trace], title: &str, x_axis: XAxis, path: &Path) -> Result<()> {
    let opts = PlotOptions {
        title: title.to_string(),
        x_axis,
        ..PlotOptions::default()
    };
    render_svg(traces, path, &opts).with_context(|| format!("writing {}", path.display()))
}

fn summary_line(t: &Trace) -> String {
    format!(
        "{:<32} {:<17} {:>10} {:>14}",
        t.label,
        t.status.to_string(),
        t.total_grad_evals,
        t.final_error().map_or("-".into(), |e| format!("{e:.6e}"))
    )
}

fn print_summary(traces: &[&Trace]) {
    println!("{:<32} {:<17} {:>10} {:>14}", "label", "status", "grad_evals", "final_error");
    for t in traces {
        println!("{}", summary_line(t));
    }
}

fn summary_csv(traces: &[&Trace]) -> String {
    let mut out = String::from("label,status,grad_evals,final_error\n");
    for t in traces {
        let err = t.final_error().map_or(String::new(), |e| format!("{e:e}"));
        out.push_str(&format!("{},{},{},{err}\n", t.label.replace(',', ";"), t.status, t.total_grad_evals));
    }
    out
}

fn write_runs(out: &Path, traces: &[&Trace]) -> Result<()> {
    for t in traces {
        write_csv(t, out.join(format!("{}.csv", slug(&t.label))))?;
    }
    fs::write(out.join("summary.csv"), summary_csv(traces))?;
    Ok(())
}

fn cmd_run(config: &Path, common: &Common) -> Result<bool> {
    let cfg = load_config(config, common)?;
    fs::create_dir_all(&common.out)?;
    let trace = run_experiment(&cfg)?;
    let name = slug(&trace.label);
    write_csv(&trace, common.out.join(format!("{name}.csv")))?;
    if common.svg.enabled() {
        let axis = x_axis_for(std::slice::from_ref(&trace));
        plot(std::slice::from_ref(&trace), &trace.label, axis, &common.out.join(format!("{name}.svg")))?;
    }
    print_summary(&[&trace]);
    if trace.status == TraceStatus::Diverged {
        eprintln!("error: run `{}` diverged", trace.label);
        return Ok(false);
    }
    Ok(true)
}

fn cmd_compare(configs: &[PathBuf], common: &Common) -> Result<()> {
    let cfgs = configs.iter().map(|p| load_config(p, common)).collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(&common.out)?;
    let traces: Vec<Trace> = run_all(cfgs)?.into_iter().map(|(_, t)| t).collect();
    fs::write(common.out.join("combined.csv"), combined_csv_string(&traces))?;
    if common.svg.enabled() {
        plot(&traces, "comparison", x_axis_for(&traces), &common.out.join("compare.svg"))?;
    }
    print_summary(&traces.iter().collect::<Vec<_>>());
    Ok(())
}

fn cmd_sweep(config: &Path, common: &Common) -> Result<()> {
    let doc: Value = serde_json::from_str(&read_text(config)?)
        .map_err(|e| Usage(format!("{}: {e}", config.display())))?;
    let (Some(base), Some(grid)) = (doc.get("base"), doc.get("grid")) else {
        return Err(Usage(format!("{}: sweep file needs `base` and `grid`", config.display())).into());
    };
    let base: ExperimentConfig =
        serde_json::from_value(base.clone()).map_err(|e| Usage(format!("base config: {e}")))?;
    let grid: Grid = serde_json::from_value(grid.clone()).map_err(|e| Usage(format!("grid: {e}")))?;
    let base = customize(base, common)?;
    fs::create_dir_all(&common.out)?;
    let runs = sweep(&grid, &base).map_err(|e| match e {
        csawg::Error::Config(_) => anyhow::Error::from(Usage(e.to_string())),
        other => other.into(),
    })?;
    let traces: Vec<&Trace> = runs.iter().map(|(_, t)| t).collect();
    write_runs(&common.out, &traces)?;
    if common.svg.enabled() {
        let owned: Vec<Trace> = traces.iter().map(|t| (*t).clone()).collect();
        plot(&owned, "sweep", x_axis_for(&owned), &common.out.join("sweep.svg"))?;
    }
    print_summary(&traces);
    if let Some((cfg, t)) = best_by_final_error(&runs) {
        println!("best: {} ({:e})", cfg.label, t.final_error().unwrap_or(f64::NAN));
    }
    Ok(())
}

fn cmd_verify(trials: usize, max_dim: usize, seed: u64, out: &Path) -> Result<bool> {
    let reports = verify_theorems(trials, max_dim, seed).map_err(|e| Usage(e.to_string()))?;
    let summary = summarize(&reports);
    println!("{:<20} {:>7} {:>7} {:>8} {:>14}", "check", "passed", "failed", "skipped", "worst_margin");
    for s in &summary {
        println!(
            "{:<20} {:>7} {:>7} {:>8} {:>14.3e}",
            s.check.as_str(),
            s.passed,
            s.failed,
            s.skipped,
            s.worst_margin
        );
    }
    let failures: Vec<_> = reports.iter().filter(|r| r.status == CheckStatus::Fail).collect();
    let ok = failures.is_empty();
    fs::create_dir_all(out)?;
    let doc = json!({
        "trials": trials,
        "max_dim": max_dim,
        "seed": seed,
        "passed": ok,
        "summary": summary,
        "failures": failures,
    });
    let path = out.join("verify.json");
    fs::write(&path, serde_json::to_string_pretty(&doc)?)?;
    println!("{} ({})", if ok { "all checks passed" } else { "CHECKS FAILED" }, path.display());
    Ok(ok)
}

fn cmd_repro(name: &str, out: &Path, svg: bool) -> Result<()> {
    let preset = preset(name).map_err(|_| {
        Usage(format!("unknown preset `{name}`; expected one of {}", PRESET_NAMES.join(", ")))
    })?;
    let dir = out.join(preset.name);
    fs::create_dir_all(&dir)?;
    let runs = run_all(preset.configs)?;
    let traces: Vec<&Trace> = runs.iter().map(|(_, t)| t).collect();
    write_runs(&dir, &traces)?;
    if svg {
        let owned: Vec<Trace> = traces.iter().map(|t| (*t).clone()).collect();
        plot(&owned, preset.title, preset.x_axis, &dir.join(format!("{}.svg", preset.name)))?;
    }
    print_summary(&traces);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, common } => cmd_run(config, common),
        Command::Compare { configs, common } => cmd_compare(configs, common).map(|_| true),
        Command::Sweep { config, common } => cmd_sweep(config, common).map(|_| true),
        Command::Verify {
            trials,
            max_dim,
            seed,
            out,
        } => cmd_verify(*trials, *max_dim, *seed, out),
        Command::Repro { preset, out, svg } => cmd_repro(preset, out, svg.enabled()).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.downcast_ref::<Usage>().is_some() { 2 } else { 1 })
        }
    }
}
