//! Experiment configuration.
//!
//! The file format is TOML written with dotted keys (`operator.m = 2`,
//! `time.t_min = 1e-4`, ...). Every key has a default, so an empty file is the
//! `laplace1d` preset. [`ExperimentConfig::to_toml`] produces the fully resolved
//! form that is echoed into every CSV report.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hklab_core::{BoundParams, Coefficient, DiscreteOperator, Domain, Grid, OperatorSpec};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Name of the preset this configuration started from, if any.
    pub preset: String,
    pub seed: u64,
    pub operator: OperatorConfig,
    pub domain: DomainConfig,
    pub grid: GridConfig,
    pub bounds: BoundsConfig,
    pub bootstrap: BootstrapSection,
    pub time: TimeGrid,
    pub sample: SampleConfig,
    pub calibration: CalibrationConfig,
    pub green: GreenConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorConfig {
    pub m: usize,
    /// `constant` uses `mean` alone; `oscillatory` is
    /// `mean + amplitude · Π sin(2π · frequency · x_i)`.
    pub coefficient: CoefficientKind,
    pub mean: f64,
    pub amplitude: f64,
    pub frequency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientKind {
    Constant,
    Oscillatory,
}

/// Box `[lower_i, upper_i]`; its length fixes the dimension (1 or 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Interior nodes per axis.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    /// Defaults to just below its admissible maximum `1 − N/2m`.
    pub eps: Option<f64>,
    pub theta: Option<f64>,
    /// Long regime starts at `seam_factor / μ` (1 or 2).
    pub seam_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSection {
    pub alpha: f64,
    pub sweep_alpha: bool,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
}

impl TimeGrid {
    /// Log-spaced times, endpoints included.
    pub fn points(&self) -> Vec<f64> {
        log_grid(self.t_min, self.t_max, self.count)
    }
}

pub(crate) fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let span = (hi / lo).ln();
    (0..count)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == count {
                hi
            } else {
                (lo.ln() + span * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleRule {
    All,
    Stride,
    List,
}

/// A sample point; plain numbers are accepted for 1D domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Point {
    pub fn coords(&self) -> Vec<f64> {
        match self {
            Point::Scalar(x) => vec![*x],
            Point::Vector(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub rule: SampleRule,
    /// Every `stride`-th node (flat index) when `rule = "stride"`.
    pub stride: usize,
    /// Points snapped to their nearest node when `rule = "list"`.
    pub points: Vec<Point>,
}

/// Held-out calibration set: a wider log time grid crossed with nodes spread
/// over the range of boundary distances, plus `random_nodes` nodes drawn with
/// the experiment seed. Pairs shared with the verification set are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub t_count: usize,
    /// The calibration times span `[t_min / t_pad, t_max · t_pad]`.
    pub t_pad: f64,
    pub x_count: usize,
    pub random_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreenConfig {
    /// The spectral route needs a complete decomposition; skipped above this size.
    pub spectral_max_nodes: usize,
    pub variational_max_nodes: usize,
    /// Scan radii `d·2^{-k/4}` for the certified bound.
    pub scan: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub csv: String,
    /// Node closest to this point is used for the sandwich and exponent plots.
    pub plot_point: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Laplace1d,
    Beam1d,
    Laplace2d,
    Varcoef1d,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Laplace1d, Preset::Beam1d, Preset::Laplace2d, Preset::Varcoef1d];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Laplace1d => "laplace1d",
            Preset::Beam1d => "beam1d",
            Preset::Laplace2d => "laplace2d",
            Preset::Varcoef1d => "varcoef1d",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown preset `{s}`")))
    }
}

fn tenths() -> Vec<Point> {
    [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5]
        .map(Point::Scalar)
        .to_vec()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            preset: Preset::Laplace1d.name().into(),
            seed: 0,
            operator: OperatorConfig::default(),
            domain: DomainConfig::default(),
            grid: GridConfig::default(),
            bounds: BoundsConfig::default(),
            bootstrap: BootstrapSection::default(),
            time: TimeGrid::default(),
            sample: SampleConfig::default(),
            calibration: CalibrationConfig::default(),
            green: GreenConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            m: 1,
            coefficient: CoefficientKind::Constant,
            mean: 1.0,
            amplitude: 0.0,
            frequency: 1.0,
        }
    }
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            lower: vec![0.0],
            upper: vec![1.0],
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n: 399 }
    }
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            eps: None,
            theta: None,
            seam_factor: 2.0,
        }
    }
}

impl Default for BootstrapSection {
    fn default() -> Self {
        BootstrapSection {
            alpha: 0.5,
            sweep_alpha: false,
            nodes: 256,
        }
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid {
            t_min: 1e-4,
            t_max: 1e-2,
            count: 10,
        }
    }
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            rule: SampleRule::List,
            stride: 1,
            points: tenths(),
        }
    }
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            t_count: 9,
            t_pad: 4.0,
            x_count: 13,
            random_nodes: 4,
        }
    }
}

impl Default for GreenConfig {
    fn default() -> Self {
        GreenConfig {
            spectral_max_nodes: 700,
            variational_max_nodes: 1000,
            scan: true,
        }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            csv: "report.csv".into(),
            plot_point: vec![0.5],
        }
    }
}

impl ExperimentConfig {
    pub fn preset(p: Preset) -> Self {
        let mut cfg = ExperimentConfig {
            preset: p.name().into(),
            ..ExperimentConfig::default()
        };
        match p {
            Preset::Laplace1d => {}
            Preset::Beam1d => {
                cfg.operator.m = 2;
                // short time for the beam means t well below 1/μ ≈ 2e-3
                cfg.time = TimeGrid {
                    t_min: 2e-6,
                    t_max: 2e-4,
                    count: 10,
                };
            }
            Preset::Laplace2d => {
                // 2m > N rules out m = 1 in the plane
                cfg.operator.m = 2;
                cfg.domain = DomainConfig {
                    lower: vec![0.0, 0.0],
                    upper: vec![1.0, 1.0],
                };
                cfg.grid.n = 31;
                cfg.time = TimeGrid {
                    t_min: 1e-6,
                    t_max: 1e-4,
                    count: 8,
                };
                cfg.sample.points = [0.1, 0.2, 0.3, 0.4, 0.5]
                    .map(|x| Point::Vector(vec![x, 0.5]))
                    .to_vec();
                cfg.output.plot_point = vec![0.5, 0.5];
            }
            Preset::Varcoef1d => {
                cfg.operator.coefficient = CoefficientKind::Oscillatory;
                cfg.operator.mean = 1.5;
                cfg.operator.amplitude = 0.5;
                cfg.operator.frequency = 3.0;
            }
        }
        cfg
    }

    /// Parses a config file on top of the preset it names (`laplace1d` if none).
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let table: toml::Table = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let base = match table.get("preset").and_then(|v| v.as_str()) {
            Some(name) => ExperimentConfig::preset(name.parse()?),
            None => ExperimentConfig::default(),
        };
        let mut merged = toml::Table::try_from(&base).map_err(|e| HarnessError::Config(e.to_string()))?;
        merge(&mut merged, table);
        let cfg: ExperimentConfig = merged.try_into().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn dim(&self) -> usize {
        self.domain.lower.len()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        let dim = self.dim();
        if !(dim == 1 || dim == 2) || self.domain.upper.len() != dim {
            return bad(format!(
                "domain.lower and domain.upper must both have length 1 or 2, got {} and {}",
                self.domain.lower.len(),
                self.domain.upper.len()
            ));
        }
        if self.operator.m == 0 || 2 * self.operator.m <= dim {
            return bad(format!("operator.m = {} needs 2m > N = {dim}", self.operator.m));
        }
        let t = &self.time;
        if !(t.t_min > 0.0 && t.t_max >= t.t_min && t.t_max.is_finite()) {
            return bad(format!("need 0 < time.t_min <= time.t_max, got {} and {}", t.t_min, t.t_max));
        }
        if t.count < 2 {
            return bad(format!("time.count must be at least 2, got {}", t.count));
        }
        let max_eps = 1.0 - dim as f64 / (2.0 * self.operator.m as f64);
        if let Some(eps) = self.bounds.eps {
            if !(eps > 0.0 && eps < max_eps) {
                return bad(format!("bounds.eps must lie in (0, {max_eps}), got {eps}"));
            }
        }
        if !(self.bounds.seam_factor == 1.0 || self.bounds.seam_factor == 2.0) {
            return bad(format!("bounds.seam_factor must be 1 or 2, got {}", self.bounds.seam_factor));
        }
        match self.sample.rule {
            SampleRule::List if self.sample.points.is_empty() => {
                return bad("sample.points is empty: nothing to evaluate".into());
            }
            SampleRule::List => {
                if let Some(p) = self.sample.points.iter().find(|p| p.coords().len() != dim) {
                    return bad(format!("sample point {:?} does not have {dim} coordinates", p.coords()));
                }
            }
            SampleRule::Stride if self.sample.stride == 0 => {
                return bad("sample.stride must be positive".into());
            }
            _ => {}
        }
        if self.calibration.t_count < 2 || self.calibration.x_count < 2 || !(self.calibration.t_pad >= 1.0) {
            return bad("calibration needs t_count, x_count >= 2 and t_pad >= 1".into());
        }
        if self.output.plot_point.len() != dim {
            return bad(format!("output.plot_point must have {dim} coordinates"));
        }
        Ok(())
    }

    /// Checks that the output directory can be created and written to.
    pub fn check_output(&self) -> Result<(), HarnessError> {
        let dir = &self.output.dir;
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.clone(),
            source,
        })?;
        let probe = dir.join(".hklab-write-probe");
        std::fs::write(&probe, b"").map_err(|source| HarnessError::Io { path: probe.clone(), source })?;
        let _ = std::fs::remove_file(probe);
        Ok(())
    }

    pub fn build_operator(&self) -> Result<DiscreteOperator, HarnessError> {
        let (lo, hi) = (&self.domain.lower, &self.domain.upper);
        let domain = match self.dim() {
            1 => Domain::interval(lo[0], hi[0])?,
            _ => Domain::box2d(lo[0], hi[0], lo[1], hi[1])?,
        };
        let op = &self.operator;
        let coeff = match op.coefficient {
            CoefficientKind::Constant => Coefficient::Constant(op.mean),
            CoefficientKind::Oscillatory => Coefficient::Oscillatory {
                mean: op.mean,
                amplitude: op.amplitude,
                frequency: op.frequency,
            },
        };
        let spec = OperatorSpec::new(op.m, self.dim(), coeff)?;
        Ok(DiscreteOperator::build(spec, Grid::new(domain, self.grid.n)?)?)
    }

    pub fn bound_params(&self, mu: f64) -> Result<BoundParams, HarnessError> {
        let (dim, m) = (self.dim(), self.operator.m);
        let eps = self.bounds.eps.unwrap_or_else(|| BoundParams::default_eps(dim, m));
        let mut params = BoundParams::new(dim, m, eps, mu)?.with_seam_factor(self.bounds.seam_factor)?;
        if let Some(theta) = self.bounds.theta {
            params = params.with_theta(theta)?;
        }
        Ok(params)
    }

    pub fn csv_path(&self) -> PathBuf {
        self.output.dir.join(&self.output.csv)
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default_preset() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn resolved_config_round_trips() {
        for p in Preset::ALL {
            let cfg = ExperimentConfig::preset(p);
            cfg.validate().unwrap();
            assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        }
    }

    #[test]
    fn dotted_keys_override_a_preset() {
        let cfg = ExperimentConfig::from_toml("preset = \"beam1d\"\ngrid.n = 99\ntime.count = 4\n").unwrap();
        assert_eq!(cfg.operator.m, 2);
        assert_eq!(cfg.grid.n, 99);
        assert_eq!(cfg.time.count, 4);
        assert_eq!(cfg.time.t_min, 2e-6);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "time.t_min = 0.0",
            "time.count = 1",
            "bounds.eps = 0.6",
            "bounds.seam_factor = 3.0",
            "operator.m = 0",
            "sample.points = [[0.5, 0.5]]",
            "unknown.key = 1",
        ] {
            assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn log_grid_hits_both_ends() {
        let ts = log_grid(1e-4, 1e-2, 3);
        assert_eq!(ts[0], 1e-4);
        assert_eq!(ts[2], 1e-2);
        assert!((ts[1] - 1e-3).abs() < 1e-15);
    }
}
