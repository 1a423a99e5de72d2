use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::nonlinearity::NonlinearityKernel;
use crate::error::{Error, Result};
use crate::spectral_field::{SpectralField, Trajectory};
use crate::Sign;

/// Smallest step the adaptive controller accepts before giving up.
pub const MIN_STEP: f64 = 1e-12;

/// Coefficients below this fraction of the largest modulus are reset to zero after
/// every accepted step (Krasny filter). Without it, transform roundoff seeds
/// modulational instabilities off invariant subspaces such as single modes.
pub const ROUNDOFF_FLOOR: f64 = 1e-14;

/// The controller steers the local error estimate towards this fraction of `tol`.
pub const TARGET_FRACTION: f64 = 0.1;

/// Which Galerkin system to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Equation {
    /// `d_t u + u_xxx = ±6 Pi_N(|u|^2 u_x)`.
    Mkdv,
    /// The renormalized equation with `M(u) u_x` and `i P(u) u` subtracted.
    Mkdv2,
    /// Airy flow only (nonlinearity switched off).
    Linear,
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Equation::Mkdv => "mkdv",
            Equation::Mkdv2 => "mkdv2",
            Equation::Linear => "linear",
        })
    }
}

impl FromStr for Equation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mkdv" => Ok(Equation::Mkdv),
            "mkdv2" => Ok(Equation::Mkdv2),
            "linear" => Ok(Equation::Linear),
            other => Err(Error::InvalidArgument(format!("unknown equation {other:?}"))),
        }
    }
}

/// Parameters of a truncated flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Truncation `N`.
    pub n: usize,
    pub sign: Sign,
    pub equation: Equation,
    /// Initial and largest step.
    pub dt: f64,
    /// Relative local error target of the step-doubling controller.
    pub tol: f64,
    pub t_final: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            n: 8,
            sign: Sign::Defocusing,
            equation: Equation::Mkdv2,
            dt: 1e-2,
            tol: 1e-9,
            t_final: 1.0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidArgument("truncation N must be >= 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !self.t_final.is_finite() {
            return Err(Error::InvalidArgument("t_final must be finite".into()));
        }
        Ok(())
    }
}

/// Counters accumulated by an [`Integrator`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub min_step: f64,
    pub max_step: f64,
}

/// Integrating-factor RK4 (Lawson) for the Galerkin system with step doubling.
///
/// The state is the coefficient vector on `|n| <= N`. The Airy phase
/// `exp(i n^3 t)` is applied exactly; only the nonlinearity is discretized.
#[derive(Debug, Clone)]
pub struct Integrator {
    cfg: FlowConfig,
    kernel: NonlinearityKernel,
    cubes: Vec<f64>,
    // exp(i n^3 h / 4), exp(i n^3 h / 2), exp(i n^3 h) for the current step h
    phases: [Vec<Complex64>; 3],
    phase_step: f64,
    k: [Vec<Complex64>; 4],
    stage: Vec<Complex64>,
    y1: Vec<Complex64>,
    y2: Vec<Complex64>,
    next_step: f64,
    stats: FlowStats,
}

impl Integrator {
    pub fn new(cfg: &FlowConfig) -> Result<Self> {
        cfg.validate()?;
        let len = 2 * cfg.n + 1;
        let zeros = vec![Complex64::new(0.0, 0.0); len];
        let n = cfg.n as i64;
        Ok(Integrator {
            cfg: *cfg,
            kernel: NonlinearityKernel::new(cfg.n, cfg.sign, cfg.equation),
            cubes: (-n..=n).map(|k| (k * k * k) as f64).collect(),
            phases: [zeros.clone(), zeros.clone(), zeros.clone()],
            phase_step: f64::NAN,
            k: [zeros.clone(), zeros.clone(), zeros.clone(), zeros.clone()],
            stage: zeros.clone(),
            y1: zeros.clone(),
            y2: zeros,
            next_step: cfg.dt,
            stats: FlowStats {
                min_step: f64::INFINITY,
                ..FlowStats::default()
            },
        })
    }

    pub fn config(&self) -> &FlowConfig {
        &self.cfg
    }

    pub fn stats(&self) -> FlowStats {
        self.stats
    }

    fn set_phases(&mut self, h: f64) {
        if self.phase_step == h {
            return;
        }
        let [quarter, half, full] = &mut self.phases;
        for (i, &c) in self.cubes.iter().enumerate() {
            let q = Complex64::from_polar(1.0, 0.25 * c * h);
            quarter[i] = q;
            half[i] = q * q;
            full[i] = half[i] * half[i];
        }
        self.phase_step = h;
    }

    /// One Lawson RK4 step from `y` into `out`: of size `h` when `halved` is false,
    /// of size `h / 2` otherwise, with `h` the step last passed to `set_phases`.
    /// With `k1_ready`, the first stage from the previous call on the same `y` is reused.
    fn rk4(&mut self, y: &[Complex64], halved: bool, out: &mut [Complex64], k1_ready: bool) {
        let h = if halved { 0.5 * self.phase_step } else { self.phase_step };
        let (half, full) = if halved {
            (&self.phases[0], &self.phases[1])
        } else {
            (&self.phases[1], &self.phases[2])
        };
        let [k1, k2, k3, k4] = &mut self.k;
        let stage = &mut self.stage;
        if !k1_ready {
            self.kernel.eval(y, k1);
            self.stats.evaluations += 1;
        }
        for i in 0..y.len() {
            stage[i] = half[i] * (y[i] + 0.5 * h * k1[i]);
        }
        self.kernel.eval(stage, k2);
        for i in 0..y.len() {
            // k2 lives at the midpoint; stage 3 restarts from y pulled forward
            stage[i] = half[i] * y[i] + 0.5 * h * k2[i];
        }
        self.kernel.eval(stage, k3);
        for i in 0..y.len() {
            stage[i] = full[i] * y[i] + h * half[i] * k3[i];
        }
        self.kernel.eval(stage, k4);
        for i in 0..y.len() {
            let mid = 2.0 * (k2[i] + k3[i]) * half[i];
            out[i] = full[i] * (y[i] + h / 6.0 * k1[i]) + h / 6.0 * (mid + k4[i]);
        }
        self.stats.evaluations += 3;
    }

    /// Advances `c` (length `2N + 1`) by the signed `duration`.
    pub fn advance(&mut self, c: &mut [Complex64], duration: f64) -> Result<()> {
        self.advance_observed(c, duration, |_, _| {})
    }

    /// [`Integrator::advance`], calling `observe(elapsed, state)` after every
    /// accepted step. `elapsed` is signed and measured from the start of the call.
    pub fn advance_observed(
        &mut self,
        c: &mut [Complex64],
        duration: f64,
        mut observe: impl FnMut(f64, &[Complex64]),
    ) -> Result<()> {
        if c.len() != 2 * self.cfg.n + 1 {
            return Err(Error::InvalidArgument(format!(
                "state has {} coefficients, expected {}",
                c.len(),
                2 * self.cfg.n + 1
            )));
        }
        if duration == 0.0 {
            return Ok(());
        }
        let dir = duration.signum();
        let total = duration.abs();
        let mut done = 0.0;
        let mut h = self.next_step.min(self.cfg.dt);
        let mut y1 = std::mem::take(&mut self.y1);
        let mut y2 = std::mem::take(&mut self.y2);
        let mut mid = c.to_vec();
        let result = loop {
            let remaining = total - done;
            if remaining <= total * 1e-15 {
                break Ok(());
            }
            let last = h >= remaining;
            let hh = if last { remaining } else { h };
            self.set_phases(dir * hh);
            self.rk4(c, false, &mut y1, false);
            self.rk4(c, true, &mut mid, true);
            self.rk4(&mid, true, &mut y2, false);
            let (mut diff, mut scale) = (0.0, 0.0);
            for (a, b) in y1.iter().zip(&y2) {
                diff += (b - a).norm_sqr();
                scale += b.norm_sqr();
            }
            if !c.iter().all(|z| z.is_finite()) {
                break Err(Error::NonFinite {
                    time: dir * done,
                });
            }
            // an overflowing trial step is rejected like any inaccurate one
            let err = if !(diff.is_finite() && scale.is_finite()) {
                f64::INFINITY
            } else if scale > 0.0 {
                (diff / scale).sqrt() / 15.0
            } else {
                0.0
            };
            if err <= self.cfg.tol {
                for ((ci, a), b) in c.iter_mut().zip(&y1).zip(&y2) {
                    *ci = b + (b - a) / 15.0;
                }
                krasny_filter(c);
                done = if last { total } else { done + hh };
                observe(dir * done, c);
                self.stats.accepted += 1;
                self.stats.min_step = self.stats.min_step.min(hh);
                self.stats.max_step = self.stats.max_step.max(hh);
                let fac = if err > 0.0 {
                    (0.9 * (TARGET_FRACTION * self.cfg.tol / err).powf(0.2)).clamp(0.2, 4.0)
                } else {
                    4.0
                };
                // a shortened final step says nothing about the next step size
                if !last || hh >= h {
                    h = (hh * fac).min(self.cfg.dt);
                }
            } else {
                self.stats.rejected += 1;
                let fac = (0.9 * (TARGET_FRACTION * self.cfg.tol / err).powf(0.2)).clamp(0.2, 1.0);
                h = hh * fac;
                if h < MIN_STEP {
                    break Err(Error::StepUnderflow {
                        time: dir * done,
                        dt: h,
                    });
                }
            }
        };
        self.next_step = h;
        self.y1 = y1;
        self.y2 = y2;
        result
    }
}

fn krasny_filter(c: &mut [Complex64]) {
    let peak = c.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    let floor = peak * ROUNDOFF_FLOOR * ROUNDOFF_FLOOR;
    for z in c.iter_mut() {
        if z.norm_sqr() < floor {
            *z = Complex64::new(0.0, 0.0);
        }
    }
}

fn split_state(u: &SpectralField, n: usize) -> (Vec<Complex64>, SpectralField) {
    let container = u.max_freq().max(n);
    let full = u.resized(container);
    let low = full.project_low(n).into_coeffs();
    (low, full)
}

fn merge_state(low: &[Complex64], full: &SpectralField, n: usize, t: f64) -> SpectralField {
    let container = full.max_freq();
    let ni = n as i64;
    SpectralField::from_fn(container, |k| {
        if k.abs() <= ni {
            low[(k + ni) as usize]
        } else {
            let cube = (k * k * k) as f64;
            full.coeff(k) * Complex64::from_polar(1.0, cube * t)
        }
    })
}

/// One fixed (non-adaptive) Lawson RK4 step of size `dt` (may be negative).
pub fn step(u: &SpectralField, dt: f64, cfg: &FlowConfig) -> Result<SpectralField> {
    let mut integ = Integrator::new(cfg)?;
    let (low, full) = split_state(u, cfg.n);
    let mut out = vec![Complex64::new(0.0, 0.0); low.len()];
    integ.set_phases(dt);
    integ.rk4(&low, false, &mut out, false);
    Ok(merge_state(&out, &full, cfg.n, dt))
}

/// `Phi_N(t) u` for signed `t`; modes above `N` follow the free flow exactly.
///
/// The output container is `max(N, u.max_freq())`.
pub fn evolve(u: &SpectralField, cfg: &FlowConfig, t: f64) -> Result<SpectralField> {
    evolve_with_stats(u, cfg, t).map(|(v, _)| v)
}

/// [`evolve`] that also reports controller statistics.
pub fn evolve_with_stats(
    u: &SpectralField,
    cfg: &FlowConfig,
    t: f64,
) -> Result<(SpectralField, FlowStats)> {
    let mut integ = Integrator::new(cfg)?;
    let (mut low, full) = split_state(u, cfg.n);
    integ.advance(&mut low, t)?;
    Ok((merge_state(&low, &full, cfg.n, t), integ.stats()))
}

/// Trajectory on `[0, t_final]` recording only the two endpoints.
pub fn flow(u0: &SpectralField, cfg: &FlowConfig) -> Result<Trajectory> {
    if cfg.t_final > 0.0 {
        flow_to_times(u0, cfg, &[0.0, cfg.t_final])
    } else {
        flow_to_times(u0, cfg, &[0.0])
    }
}

/// Trajectory sampled at the given strictly increasing, nonnegative times.
pub fn flow_to_times(u0: &SpectralField, cfg: &FlowConfig, times: &[f64]) -> Result<Trajectory> {
    if times.is_empty() || times[0] < 0.0 {
        return Err(Error::InvalidArgument(
            "output times must be nonempty and nonnegative".into(),
        ));
    }
    let mut integ = Integrator::new(cfg)?;
    let (mut low, full) = split_state(u0, cfg.n);
    let mut states = Vec::with_capacity(times.len());
    let mut t = 0.0;
    for &target in times {
        if target < t {
            return Err(Error::InvalidArgument("output times must increase".into()));
        }
        integ.advance(&mut low, target - t)?;
        t = target;
        states.push(merge_state(&low, &full, cfg.n, t));
    }
    Trajectory::new(times.to_vec(), states)
}
