//! Config-driven harness around `hklab-core`: runs the pipeline over a
//! `(t, x)` grid, checks every inequality with held-out calibration, and writes
//! CSV and SVG reports.

// `!(x > 0.0)` is how argument checks reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

pub mod config;
pub mod experiment;
pub mod report;
pub mod svg;

pub use config::{ExperimentConfig, Preset};
pub use experiment::{fit_exponent, run_experiment, run_stage, Experiment, Flags, Predictor, ReportRow, Stage};
pub use report::{emit_csv, read_csv, COLUMNS};
pub use svg::{emit_svg, render_svg, PlotKind, PlotMeta};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] hklab_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("parse: {0}")]
    Parse(String),

    #[error("fit: {0}")]
    Fit(String),

    #[error("plot: {0}")]
    Plot(String),
}
