//! Galerkin-truncated renormalized complex mKdV on the torus, together with a
//! Monte Carlo laboratory for the associated Gaussian and weighted Gibbs-type
//! measures.
//!
//! The crate is organized bottom-up:
//!
//! * [`spectral_field`]: Fourier-coefficient fields, projections, transforms and norms.
//! * [`energies`]: hierarchy energies, mass, momentum and the `E_3` truncation drift.
//! * [`dynamics`]: resonance bookkeeping, the truncated nonlinearity, the
//!   integrating-factor RK4 flow and the gauge map between mKdV and mKdV2.
//! * [`measures`]: the random Fourier series, cutoff densities and estimators.
//! * [`pairing`]: six-frequency index sets, Wick pairings and lemma sums.
//! * [`invariance`]: end-to-end almost-invariance and conservation experiments.
//! * [`config`], [`experiments`], [`ensemble`]: the command-line runner.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub mod config;
pub mod dynamics;
pub mod energies;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod invariance;
pub mod measures;
pub mod pairing;
pub mod spectral_field;
pub mod stats;
pub mod transform;

pub use error::{Error, Result};
pub use spectral_field::{GridField, NormSpec, SpectralField, Trajectory};

/// Branch of the cubic nonlinearity: `+` is defocusing, `-` is focusing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Defocusing,
    Focusing,
}

impl Sign {
    /// `+1.0` for defocusing, `-1.0` for focusing.
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Sign::Defocusing => 1.0,
            Sign::Focusing => -1.0,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Defocusing => "defocusing",
            Sign::Focusing => "focusing",
        })
    }
}

impl FromStr for Sign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "defocusing" | "+" | "plus" => Ok(Sign::Defocusing),
            "focusing" | "-" | "minus" => Ok(Sign::Focusing),
            other => Err(Error::InvalidArgument(format!("unknown sign {other:?}"))),
        }
    }
}
