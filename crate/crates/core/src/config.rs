//! Run configuration for the `mkdv-lab` command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::Equation;
use crate::error::{Error, Result};
use crate::invariance::TestSet;
use crate::measures::FieldNorm;
use crate::pairing::{ENUMERATION_CAP, WICK_CAP};
use crate::Sign;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "MKDV_LAB_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Sample,
    Evolve,
    Conservation,
    E3starDecay,
    Invariance,
    PairingLemmas,
    Convergence,
    Tails,
    DensityMoments,
    GaugeCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::Sample,
        Experiment::Evolve,
        Experiment::Conservation,
        Experiment::E3starDecay,
        Experiment::Invariance,
        Experiment::PairingLemmas,
        Experiment::Convergence,
        Experiment::Tails,
        Experiment::DensityMoments,
        Experiment::GaugeCheck,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Sample => "sample",
            Experiment::Evolve => "evolve",
            Experiment::Conservation => "conservation",
            Experiment::E3starDecay => "e3star-decay",
            Experiment::Invariance => "invariance",
            Experiment::PairingLemmas => "pairing-lemmas",
            Experiment::Convergence => "convergence",
            Experiment::Tails => "tails",
            Experiment::DensityMoments => "density-moments",
            Experiment::GaugeCheck => "gauge-check",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

/// Enumeration limits, never above the library caps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    #[serde(default = "default_enumeration_cap")]
    pub enumeration: usize,
    #[serde(default = "default_wick_cap")]
    pub wick: usize,
}

fn default_enumeration_cap() -> usize {
    16
}

fn default_wick_cap() -> usize {
    WICK_CAP
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            enumeration: default_enumeration_cap(),
            wick: default_wick_cap(),
        }
    }
}

/// A parsed run configuration. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(rename = "N", default = "d_n")]
    pub n: usize,
    /// Multi-truncation experiments; defaults depend on the experiment.
    #[serde(default)]
    pub n_grid: Option<Vec<usize>>,
    #[serde(rename = "R", default = "d_r")]
    pub r: f64,
    #[serde(default = "d_sign")]
    pub sign: Sign,
    #[serde(default = "d_equation")]
    pub equation: Equation,
    /// Regularity of norms (or of the data, for `convergence`).
    #[serde(default = "d_s")]
    pub s: f64,
    /// Regularity of the measured norm in `convergence`.
    #[serde(default = "d_s_measure")]
    pub s_measure: f64,
    #[serde(default = "d_p")]
    pub p: f64,
    /// Final time.
    #[serde(default = "d_t")]
    pub t: f64,
    #[serde(default = "d_dt")]
    pub dt: f64,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Number of equal time increments for sup-in-time diagnostics.
    #[serde(default = "d_steps")]
    pub steps: usize,
    #[serde(default)]
    pub caps: Caps,
    #[serde(default = "d_true")]
    pub chi_on: bool,
    /// Moment order for `density-moments`.
    #[serde(default = "d_q")]
    pub q: f64,
    /// Thresholds for `tails`.
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    /// Norm for `tails`.
    #[serde(default)]
    pub norm: Option<FieldNorm>,
    /// Sets for `invariance`.
    #[serde(default)]
    pub test_sets: Option<Vec<TestSet>>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "d_workers")]
    pub workers: usize,
}

fn d_n() -> usize {
    8
}
fn d_r() -> f64 {
    4.0
}
fn d_sign() -> Sign {
    Sign::Defocusing
}
fn d_equation() -> Equation {
    Equation::Mkdv2
}
fn d_s() -> f64 {
    0.5
}
fn d_s_measure() -> f64 {
    0.5
}
fn d_p() -> f64 {
    4.0
}
fn d_t() -> f64 {
    1.0
}
fn d_dt() -> f64 {
    1e-2
}
fn d_tol() -> f64 {
    1e-9
}
fn d_samples() -> usize {
    100
}
fn d_steps() -> usize {
    10
}
fn d_true() -> bool {
    true
}
fn d_q() -> f64 {
    2.0
}
fn d_workers() -> usize {
    1
}

impl RunConfig {
    /// Parses JSON text; unknown keys and ill-typed values are configuration errors.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n == 0 {
            return bad("N must be >= 1".into());
        }
        if let Some(grid) = &self.n_grid {
            if grid.is_empty() || grid.contains(&0) {
                return bad("n_grid must be a nonempty list of positive truncations".into());
            }
        }
        if self.samples == 0 {
            return bad("samples must be >= 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be >= 1".into());
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return bad(format!("R must be positive, got {}", self.r));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad("dt and tol must be positive".into());
        }
        if !self.t.is_finite() || !self.s.is_finite() || !self.s_measure.is_finite() {
            return bad("t, s and s_measure must be finite".into());
        }
        if self.p.is_nan() || self.p < 1.0 {
            return bad(format!("p must be >= 1, got {}", self.p));
        }
        if self.steps == 0 {
            return bad("steps must be >= 1".into());
        }
        if self.q < 1.0 {
            return bad(format!("q must be >= 1, got {}", self.q));
        }
        if self.caps.enumeration > ENUMERATION_CAP || self.caps.wick > WICK_CAP {
            return bad(format!(
                "caps exceed the supported limits (enumeration <= {ENUMERATION_CAP}, wick <= {WICK_CAP})"
            ));
        }
        Ok(())
    }

    /// Root under which the run directory is created: `--out`, then
    /// `output_dir`, then `$MKDV_LAB_OUT`, then `./runs`.
    pub fn output_root(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"))
    }
}
