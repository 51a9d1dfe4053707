//! The full pipeline over a `(t, x)` grid.

use std::collections::HashSet;
use std::sync::Arc;

use hklab_core::kernel::VariationalOptions;
use hklab_core::{
    bootstrap_from_green, calibration_points, eigendecompose, fit_power_law, green_solve, green_variational,
    BootstrapConfig, BootstrapStatus, BoundParams, CalibrationSample, DiscreteOperator, KernelEvaluator, ModeCount,
    Regime, TestFunctionFamily,
};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{log_grid, ExperimentConfig, SampleRule};
use crate::HarnessError;

/// Directional slack allowed on every checked inequality.
pub const SLACK: f64 = 1e-10;
/// Relative agreement demanded of the spectral route against the direct solve.
pub const SPECTRAL_ROUTE_TOL: f64 = 1e-8;
pub const VARIATIONAL_ROUTE_TOL: f64 = 1e-4;

/// How much of the pipeline to run. Columns of skipped stages are NaN.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Kernel,
    Green,
    Bounds,
    Bootstrap,
    Full,
}

impl Stage {
    fn green(self) -> bool {
        matches!(self, Stage::Green | Stage::Full)
    }

    fn certified(self) -> bool {
        matches!(self, Stage::Green | Stage::Bootstrap | Stage::Full)
    }

    fn bounds(self) -> bool {
        matches!(self, Stage::Bounds | Stage::Bootstrap | Stage::Full)
    }

    fn bootstrap(self) -> bool {
        matches!(self, Stage::Bootstrap | Stage::Full)
    }
}

/// Outcome of each checked inequality; `None` when it was not evaluated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    /// Certified Green bound below the solved resolvent.
    pub certified: Option<bool>,
    /// Spectral and variational resolvents agree with the solve.
    pub routes: Option<bool>,
    /// Bootstrap lower bound below the kernel.
    pub bootstrap: Option<bool>,
    /// Kernel below the calibrated upper template.
    pub upper: Option<bool>,
    /// Calibrated lower template below the kernel.
    pub lower: Option<bool>,
}

impl Flags {
    /// The rigorous checks. The two template flags measure how well the
    /// calibrated constants hold off-sample and are reported, not enforced.
    pub fn valid(&self) -> bool {
        [self.certified, self.routes, self.bootstrap]
            .iter()
            .all(|f| f.unwrap_or(true))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub t: f64,
    pub node: usize,
    pub x: f64,
    /// Second coordinate; NaN on 1D domains.
    pub y: f64,
    pub d: f64,
    pub k: f64,
    pub g_spectral: f64,
    pub g_solve: f64,
    pub g_variational: f64,
    pub g_certified: f64,
    pub upper: f64,
    pub regime: Option<Regime>,
    pub delta: f64,
    pub delta_star: f64,
    pub bootstrap_status: Option<BootstrapStatus>,
    pub bootstrap_lower: f64,
    pub lower_template: f64,
    pub flags: Flags,
    /// `ok`, or the error that stopped this row.
    pub status: String,
}

impl ReportRow {
    /// Row at `(t, node)` with every computed quantity NaN.
    pub fn new(t: f64, node: usize, point: &[f64], d: f64) -> Self {
        ReportRow {
            t,
            node,
            x: point[0],
            y: point.get(1).copied().unwrap_or(f64::NAN),
            d,
            k: f64::NAN,
            g_spectral: f64::NAN,
            g_solve: f64::NAN,
            g_variational: f64::NAN,
            g_certified: f64::NAN,
            upper: f64::NAN,
            regime: None,
            delta: f64::NAN,
            delta_star: f64::NAN,
            bootstrap_status: None,
            bootstrap_lower: f64::NAN,
            lower_template: f64::NAN,
            flags: Flags::default(),
            status: "ok".into(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Rows plus the calibrated state they were checked against.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub rows: Vec<ReportRow>,
    pub params: Option<BoundParams>,
    pub mu: f64,
    pub calibration_size: usize,
}

impl Experiment {
    /// Exit contract: every validity flag passes and no row errored.
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.is_ok() && r.flags.valid())
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>, HarnessError> {
    Ok(run_stage(cfg, Stage::Full)?.rows)
}

/// Nodes the rows are reported at, sorted by flat index.
pub fn verification_nodes(cfg: &ExperimentConfig, op: &DiscreteOperator) -> Result<Vec<usize>, HarnessError> {
    let n = op.len();
    let mut nodes: Vec<usize> = match cfg.sample.rule {
        SampleRule::All => (0..n).collect(),
        SampleRule::Stride => (0..n).step_by(cfg.sample.stride).collect(),
        SampleRule::List => cfg
            .sample
            .points
            .iter()
            .map(|p| op.grid.nearest_node(&p.coords()))
            .collect::<Result<_, _>>()?,
    };
    nodes.sort_unstable();
    nodes.dedup();
    if nodes.is_empty() {
        return Err(HarnessError::Config("sample rule selects no nodes".into()));
    }
    Ok(nodes)
}

pub fn run_stage(cfg: &ExperimentConfig, stage: Stage) -> Result<Experiment, HarnessError> {
    cfg.validate()?;
    let op = cfg.build_operator()?;
    let n = op.len();
    let times = cfg.time.points();
    let nodes = verification_nodes(cfg, &op)?;
    let cal_times = log_grid(
        cfg.time.t_min / cfg.calibration.t_pad,
        cfg.time.t_max * cfg.calibration.t_pad,
        cfg.calibration.t_count,
    );

    let complete = n <= cfg.green.spectral_max_nodes;
    let ke = if complete {
        KernelEvaluator::new(Arc::new(eigendecompose(&op, ModeCount::All)?))
    } else {
        KernelEvaluator::for_min_time(&op, cal_times[0].min(times[0]))?
    };
    let mu = ke.decomposition().spectral_gap();

    let (params, calibration_size) = if stage.bounds() {
        let mut params = cfg.bound_params(mu)?;
        let samples = calibration_set(cfg, &op, &ke, &params, &cal_times, &times, &nodes)?;
        params.calibrate_upper(&samples)?;
        params.calibrate_lower(&samples)?;
        (Some(params), samples.len())
    } else {
        (None, 0)
    };
    let family = TestFunctionFamily::for_operator(&op)?;
    let boot = BootstrapConfig {
        alpha: cfg.bootstrap.alpha,
        nodes: cfg.bootstrap.nodes,
        sweep_alpha: cfg.bootstrap.sweep_alpha,
        ..BootstrapConfig::default()
    };
    boot.validate()?;

    let pairs: Vec<(f64, usize)> = times
        .iter()
        .flat_map(|&t| nodes.iter().map(move |&x| (t, x)))
        .collect();
    let ctx = RowContext {
        cfg,
        op: &op,
        ke: &ke,
        complete,
        params: params.as_ref(),
        family: &family,
        boot: &boot,
        stage,
    };
    let rows = pairs.par_iter().map(|&(t, x)| ctx.row(t, x)).collect();
    Ok(Experiment {
        rows,
        params,
        mu,
        calibration_size,
    })
}

struct RowContext<'a> {
    cfg: &'a ExperimentConfig,
    op: &'a DiscreteOperator,
    ke: &'a KernelEvaluator,
    complete: bool,
    params: Option<&'a BoundParams>,
    family: &'a TestFunctionFamily,
    boot: &'a BootstrapConfig,
    stage: Stage,
}

impl RowContext<'_> {
    fn row(&self, t: f64, x: usize) -> ReportRow {
        let grid = &self.op.grid;
        let mut row = ReportRow::new(t, x, &grid.node_point(x), grid.node_distance(x));
        if let Err(e) = self.fill(&mut row) {
            row.status = e.to_string();
        }
        row
    }

    fn fill(&self, row: &mut ReportRow) -> Result<(), hklab_core::Error> {
        let (t, x, d) = (row.t, row.node, row.d);
        let below = |a: f64, b: f64| a <= b * (1.0 + SLACK);
        row.k = self.ke.diagonal(t, x)?;

        if self.stage.green() {
            row.g_solve = green_solve(self.op, t, &[x])?[0];
            let mut agree = true;
            if self.complete {
                row.g_spectral = self.ke.green_spectral(t, x)?;
                agree &= (row.g_spectral / row.g_solve - 1.0).abs() <= SPECTRAL_ROUTE_TOL;
            }
            if self.op.len() <= self.cfg.green.variational_max_nodes {
                row.g_variational = green_variational(self.op, t, x, &VariationalOptions::default())?.value;
                agree &= (row.g_variational / row.g_solve - 1.0).abs() <= VARIATIONAL_ROUTE_TOL;
            }
            row.flags.routes = Some(agree);
        }
        if self.stage.certified() {
            row.g_certified = self
                .family
                .green_lower_bound_discrete(self.op, t, x, self.cfg.green.scan)?
                .value;
            if row.g_solve.is_finite() {
                row.flags.certified = Some(below(row.g_certified, row.g_solve));
            }
        }
        if let Some(params) = self.params {
            let regime = params.classify_regime(t, d);
            row.regime = Some(regime);
            row.upper = params.upper_bound_u(t, d)?;
            row.delta = row.k / row.upper;
            row.lower_template = params.lower_bound(regime, t, d)?;
            row.flags.upper = Some(below(row.k, row.upper));
            row.flags.lower = Some(below(row.lower_template, row.k));
            if self.stage.bootstrap() {
                let out = bootstrap_from_green(row.g_certified, params, d, t, self.boot)?;
                row.delta_star = out.delta_star;
                row.bootstrap_status = Some(out.status);
                row.bootstrap_lower = out.lower;
                row.flags.bootstrap = Some(below(out.lower, row.k));
            }
        }
        Ok(())
    }
}

/// Held-out calibration samples. Shares no `(t, node)` pair with the rows.
fn calibration_set(
    cfg: &ExperimentConfig,
    op: &DiscreteOperator,
    ke: &KernelEvaluator,
    params: &BoundParams,
    cal_times: &[f64],
    times: &[f64],
    nodes: &[usize],
) -> Result<Vec<CalibrationSample>, HarnessError> {
    let n = op.len();
    let distances: Vec<f64> = (0..n).map(|x| op.grid.node_distance(x)).collect();
    let verify: HashSet<usize> = nodes.iter().copied().collect();
    let free: Vec<usize> = (0..n).filter(|x| !verify.contains(x)).collect();

    // nodes spread evenly over the distinct boundary distances
    let mut levels = distances.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    let want = cfg.calibration.x_count.min(levels.len());
    let mut base: Vec<usize> = (0..want)
        .filter_map(|i| {
            let level = levels[i * (levels.len() - 1) / (want - 1).max(1)];
            free.iter()
                .copied()
                .find(|&x| (distances[x] - level).abs() <= 1e-12 * level.max(1.0))
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    base.extend(free.choose_multiple(&mut rng, cfg.calibration.random_nodes).copied());
    base.sort_unstable();
    base.dedup();

    let held: HashSet<(u64, usize)> = times
        .iter()
        .flat_map(|t| nodes.iter().map(move |&x| (t.to_bits(), x)))
        .collect();
    let pairs: Vec<(f64, usize)> = calibration_points(params, &distances, cal_times, &base)
        .into_iter()
        .filter(|(t, x)| !held.contains(&(t.to_bits(), *x)))
        .collect();
    let samples = pairs
        .par_iter()
        .map(|&(t, x)| {
            Ok(CalibrationSample {
                t,
                d: distances[x],
                k: ke.diagonal(t, x)?,
            })
        })
        .collect::<Result<Vec<_>, hklab_core::Error>>()?;
    Ok(samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predictor {
    Time,
    Distance,
}

/// Least-squares slope of `log k` against the log of the predictor, over the
/// rows whose predictor lies in `window`. Returns `(slope, stderr)`.
pub fn fit_exponent(rows: &[ReportRow], predictor: Predictor, window: (f64, f64)) -> Result<(f64, f64), HarnessError> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .map(|r| {
            let p = match predictor {
                Predictor::Time => r.t,
                Predictor::Distance => r.d,
            };
            (p, r.k)
        })
        .filter(|(p, _)| *p >= window.0 && *p <= window.1)
        .unzip();
    let fit = fit_power_law(&xs, &ys).map_err(|e| HarnessError::Fit(e.to_string()))?;
    Ok((fit.slope, fit.stderr))
}
