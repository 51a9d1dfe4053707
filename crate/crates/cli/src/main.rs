use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use hklab_cli::{
    emit_csv, emit_svg, fit_exponent, run_stage, Experiment, ExperimentConfig, PlotKind, PlotMeta, Predictor, Preset,
    Stage,
};
use hklab_core::{eigendecompose, ModeCount};

#[derive(Parser)]
#[command(name = "hklab", version, about = "Dirichlet heat kernels of higher-order operators: bounds and checks")]
struct Cli {
    /// TOML config with dotted keys; see the README for every key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Start from a preset; keys in --config still override it.
    #[arg(long, global = true)]
    preset: Option<Preset>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lowest eigenvalues and the spectral gap.
    Spectrum {
        #[arg(long, default_value_t = 10)]
        modes: usize,
    },
    /// Diagonal heat kernel over the (t, x) grid.
    Kernel,
    /// Resolvent by all routes plus the certified lower bound.
    Green,
    /// Calibrated upper and lower templates.
    Bounds,
    /// Bootstrap lower bounds from the certified Green bound.
    Bootstrap,
    /// Full pipeline with every check.
    Verify,
    /// Full pipeline, then the sandwich, exponent and regime-map plots.
    Plot,
}

fn load(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match (&cli.config, cli.preset) {
        (Some(path), preset) => {
            let mut text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            if let Some(p) = preset {
                text = format!("preset = \"{p}\"\n{text}");
            }
            ExperimentConfig::from_toml(&text).with_context(|| format!("in {}", path.display()))?
        }
        (None, Some(p)) => ExperimentConfig::preset(p),
        (None, None) => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    cfg.check_output()?;
    Ok(cfg)
}

fn summary(exp: &Experiment) {
    let rows = &exp.rows;
    let count = |f: fn(&hklab_cli::Flags) -> Option<bool>| {
        let evaluated = rows.iter().filter(|r| f(&r.flags).is_some()).count();
        let failed = rows.iter().filter(|r| f(&r.flags) == Some(false)).count();
        format!("{failed}/{evaluated}")
    };
    println!("rows {}, errored {}", rows.len(), rows.iter().filter(|r| !r.is_ok()).count());
    println!("spectral gap {:.10e}, calibration samples {}", exp.mu, exp.calibration_size);
    println!(
        "failed checks: certified {}, routes {}, bootstrap {} | templates: upper {}, lower {}",
        count(|f| f.certified),
        count(|f| f.routes),
        count(|f| f.bootstrap),
        count(|f| f.upper),
        count(|f| f.lower),
    );
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let cfg = load(cli)?;
    let echo = cfg.to_toml();
    let stage = match &cli.command {
        Command::Spectrum { modes } => {
            let op = cfg.build_operator()?;
            let sd = eigendecompose(&op, ModeCount::Lowest(*modes))?;
            let path = cfg.output.dir.join("spectrum.csv");
            let mut text: String = echo.lines().map(|l| format!("# {l}\n")).collect();
            text.push_str("index,lambda\n");
            for (i, l) in sd.eigenvalues.iter().enumerate() {
                text.push_str(&format!("{i},{l:.16e}\n"));
            }
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            println!("spectral gap {:.10e}", sd.spectral_gap());
            println!("wrote {}", path.display());
            return Ok(true);
        }
        Command::Kernel => Stage::Kernel,
        Command::Green => Stage::Green,
        Command::Bounds => Stage::Bounds,
        Command::Bootstrap => Stage::Bootstrap,
        Command::Verify | Command::Plot => Stage::Full,
    };
    let exp = run_stage(&cfg, stage)?;
    let name = match &cli.command {
        Command::Kernel => "kernel.csv".to_string(),
        Command::Green => "green.csv".to_string(),
        Command::Bounds => "bounds.csv".to_string(),
        Command::Bootstrap => "bootstrap.csv".to_string(),
        _ => cfg.output.csv.clone(),
    };
    let path = cfg.output.dir.join(name);
    emit_csv(&exp.rows, &echo, &path)?;
    summary(&exp);
    println!("wrote {}", path.display());

    if matches!(cli.command, Command::Plot | Command::Verify) {
        let op = cfg.build_operator()?;
        let node = op.grid.nearest_node(&cfg.output.plot_point)?;
        if let Ok((slope, stderr)) = fit_exponent(
            &exp.rows.iter().filter(|r| r.node == node).cloned().collect::<Vec<_>>(),
            Predictor::Time,
            (cfg.time.t_min, cfg.time.t_max),
        ) {
            println!("log k vs log t at node {node}: slope {slope:.4} ± {stderr:.1e}");
        }
        if matches!(cli.command, Command::Plot) {
            let params = exp.params.as_ref().expect("full stage calibrates");
            let meta = PlotMeta {
                node,
                m: cfg.operator.m,
                seam: params.seam(),
            };
            for kind in [PlotKind::Sandwich, PlotKind::Exponent, PlotKind::RegimeMap] {
                let path = cfg.output.dir.join(format!("{}.svg", kind.name()));
                emit_svg(&exp.rows, kind, &meta, &path)?;
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(exp.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some checks failed or rows errored; see the report");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
