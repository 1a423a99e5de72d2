//! Complex fields on the torus `T = R / 2 pi Z`, stored by Fourier coefficients.
//!
//! A field is `u(x) = sum_{|n| <= N} c_n exp(i n x)`; integrals run over a
//! period of length `2 pi`. No Hermitian symmetry is assumed.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::{efficient_size, GridPlan};

/// Japanese bracket `sqrt(1 + x^2)`.
#[inline]
pub fn bracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// Fourier coefficients `c_{-N}, ..., c_N` of a complex field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    max_freq: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(max_freq: usize) -> Self {
        SpectralField {
            max_freq,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * max_freq + 1],
        }
    }

    /// Wraps a coefficient vector ordered from frequency `-N` to `N`.
    pub fn from_coeffs(max_freq: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != 2 * max_freq + 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients for max_freq {max_freq}, got {}",
                2 * max_freq + 1,
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        Ok(SpectralField { max_freq, coeffs })
    }

    pub fn from_fn(max_freq: usize, mut f: impl FnMut(i64) -> Complex64) -> Self {
        let n = max_freq as i64;
        SpectralField {
            max_freq,
            coeffs: (-n..=n).map(&mut f).collect(),
        }
    }

    /// `amplitude * exp(i m x)` in a container of size `max_freq`.
    pub fn single_mode(max_freq: usize, m: i64, amplitude: Complex64) -> Self {
        let mut u = Self::zeros(max_freq);
        u.set(m, amplitude);
        u
    }

    pub fn max_freq(&self) -> usize {
        self.max_freq
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient at frequency `n`; zero outside the container.
    #[inline]
    pub fn coeff(&self, n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.max_freq {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(n + self.max_freq as i64) as usize]
        }
    }

    /// Sets the coefficient at `n`. Panics if `|n| > max_freq`.
    pub fn set(&mut self, n: i64, value: Complex64) {
        assert!(
            n.unsigned_abs() as usize <= self.max_freq,
            "frequency {n} outside container of size {}",
            self.max_freq
        );
        self.coeffs[(n + self.max_freq as i64) as usize] = value;
    }

    /// `(n, c_n)` pairs in increasing frequency.
    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let n0 = self.max_freq as i64;
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, &c)| (i as i64 - n0, c))
    }

    /// Same field in a container of size `max_freq` (zero padding or truncation).
    pub fn resized(&self, max_freq: usize) -> Self {
        Self::from_fn(max_freq, |n| self.coeff(n))
    }

    /// Dirichlet projection onto `|n| <= k`; the container shrinks to `min(k, N)`.
    pub fn project_low(&self, k: usize) -> Self {
        self.resized(k.min(self.max_freq))
    }

    /// Dirichlet projection onto `|n| <= k`, keeping the container size.
    pub fn project_low_in_place(&self, k: usize) -> Self {
        let k = k as i64;
        Self::from_fn(self.max_freq, |n| {
            if n.abs() <= k {
                self.coeff(n)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// `u - project_low(u, k)`, in the original container.
    pub fn project_high(&self, k: usize) -> Self {
        let k = k as i64;
        Self::from_fn(self.max_freq, |n| {
            if n.abs() > k {
                self.coeff(n)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// `k`-th spatial derivative: `c_n -> (i n)^k c_n`.
    pub fn derivative(&self, order: u32) -> Self {
        let factor = |n: i64| Complex64::new(0.0, n as f64).powu(order);
        Self::from_fn(self.max_freq, |n| factor(n) * self.coeff(n))
    }

    /// Coefficients of the complex conjugate field: `conj(c_{-n})`.
    pub fn conjugate(&self) -> Self {
        Self::from_fn(self.max_freq, |n| self.coeff(-n).conj())
    }

    pub fn scale(&self, lambda: Complex64) -> Self {
        Self::from_fn(self.max_freq, |n| lambda * self.coeff(n))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Coefficient-space `l^2` norm.
    pub fn l2_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Coefficient-space `l^2` distance over the union of both supports.
    pub fn l2_distance(&self, other: &SpectralField) -> f64 {
        let n = self.max_freq.max(other.max_freq) as i64;
        (-n..=n)
            .map(|k| (self.coeff(k) - other.coeff(k)).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest `|n|` with a nonzero coefficient.
    pub fn support_radius(&self) -> usize {
        self.modes()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(n, _)| n.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Fourier-Lebesgue norm `|| <n>^s c_n ||_{l^p}`.
    pub fn fl_norm(&self, spec: &NormSpec) -> f64 {
        let weighted = self
            .modes()
            .map(|(n, c)| bracket(n as f64).powf(spec.s) * c.norm());
        if spec.p.is_infinite() {
            weighted.fold(0.0, f64::max)
        } else {
            weighted.map(|a| a.powf(spec.p)).sum::<f64>().powf(1.0 / spec.p)
        }
    }

    /// `H^s` norm `(2 pi sum <n>^{2s} |c_n|^2)^{1/2}`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        (2.0 * PI
            * self
                .modes()
                .map(|(n, c)| bracket(n as f64).powf(2.0 * s) * c.norm_sqr())
                .sum::<f64>())
        .sqrt()
    }

    /// Physical `L^p` norm by the `M`-point rectangle rule.
    pub fn lp_physical_norm(&self, p: f64, grid: usize) -> Result<QuadratureValue> {
        let g = self.to_grid(grid)?;
        let integral =
            2.0 * PI / grid as f64 * g.samples.iter().map(|z| z.norm().powf(p)).sum::<f64>();
        let exact = is_even_integer(p) && grid > (p as usize) * self.support_radius();
        Ok(QuadratureValue {
            value: integral.powf(1.0 / p),
            exact,
        })
    }

    /// Samples on the `M`-point grid. Requires `M >= 2N + 1`.
    pub fn to_grid(&self, grid: usize) -> Result<GridField> {
        let required = 2 * self.max_freq + 1;
        if grid < required {
            return Err(Error::Aliasing {
                grid,
                max_freq: self.max_freq,
                required,
            });
        }
        let plan = GridPlan::new(grid);
        let mut samples = vec![Complex64::new(0.0, 0.0); grid];
        plan.synthesize(&self.coeffs, &mut samples);
        Ok(GridField { samples })
    }

    /// Samples on the smallest efficient grid that holds this field.
    pub fn to_default_grid(&self) -> GridField {
        self.to_grid(efficient_size(2 * self.max_freq + 1))
            .expect("efficient size is large enough")
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        let n = self.max_freq.max(rhs.max_freq);
        SpectralField::from_fn(n, |k| self.coeff(k) + rhs.coeff(k))
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        let n = self.max_freq.max(rhs.max_freq);
        SpectralField::from_fn(n, |k| self.coeff(k) - rhs.coeff(k))
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scale(Complex64::new(rhs, 0.0))
    }
}

fn is_even_integer(p: f64) -> bool {
    p.is_finite() && p.fract() == 0.0 && (p as i64) % 2 == 0
}

/// A quadrature result with a flag telling whether the rule is exact for the integrand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureValue {
    pub value: f64,
    pub exact: bool,
}

/// Physical samples `u(2 pi m / M)`, `m = 0..M`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub samples: Vec<Complex64>,
}

impl GridField {
    pub fn new(samples: Vec<Complex64>) -> Self {
        GridField { samples }
    }

    pub fn grid_size(&self) -> usize {
        self.samples.len()
    }

    /// Coefficients `|n| <= N`. Rejects `2N + 1 > M`, where aliased content
    /// could not be told apart from retained modes.
    pub fn from_grid(&self, max_freq: usize) -> Result<SpectralField> {
        let grid = self.samples.len();
        let required = 2 * max_freq + 1;
        if grid < required {
            return Err(Error::Aliasing {
                grid,
                max_freq,
                required,
            });
        }
        let plan = GridPlan::new(grid);
        let mut work = self.samples.clone();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); required];
        plan.analyze(&mut work, &mut coeffs);
        Ok(SpectralField { max_freq, coeffs })
    }

    /// `(2 pi / M) sum_m f(x_m)`.
    pub fn integrate(&self) -> Complex64 {
        self.samples.iter().sum::<Complex64>() * (2.0 * PI / self.samples.len() as f64)
    }
}

/// Regularity/integrability indices of `FL^{s,p}` and `X^{s,b}_{p,q}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub s: f64,
    /// `f64::INFINITY` selects the sup norm.
    pub p: f64,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub q: Option<f64>,
}

impl NormSpec {
    pub fn new(s: f64, p: f64) -> Result<Self> {
        let spec = NormSpec {
            s,
            p,
            b: None,
            q: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn space_time(s: f64, p: f64, b: f64, q: f64) -> Result<Self> {
        let spec = NormSpec {
            s,
            p,
            b: Some(b),
            q: Some(q),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad_index = |x: f64| x.is_nan() || x < 1.0;
        if !self.s.is_finite() || bad_index(self.p) || self.q.is_some_and(bad_index) {
            return Err(Error::InvalidArgument(format!("illegal norm indices {self:?}")));
        }
        if self.b.is_some_and(|b| !b.is_finite()) {
            return Err(Error::InvalidArgument(format!("illegal norm indices {self:?}")));
        }
        Ok(())
    }

    /// Inside the admissible window `1/2 <= s < 1 - 1/p`, `2 < p < inf`.
    pub fn is_admissible(&self) -> bool {
        self.p > 2.0 && self.p.is_finite() && self.s >= 0.5 && self.s < 1.0 - 1.0 / self.p
    }
}

/// Time-stamped states of a flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<SpectralField>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<SpectralField>) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(Error::InvalidArgument(format!(
                "trajectory needs matching non-empty times/states ({} vs {})",
                times.len(),
                states.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("times must be strictly increasing".into()));
        }
        let n = states[0].max_freq();
        if states.iter().any(|s| s.max_freq() != n) {
            return Err(Error::InvalidArgument("states must share max_freq".into()));
        }
        Ok(Trajectory { times, states })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[SpectralField] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> (f64, &SpectralField) {
        let i = self.times.len() - 1;
        (self.times[i], &self.states[i])
    }

    pub fn max_freq(&self) -> usize {
        self.states[0].max_freq()
    }

    pub fn map_states(&self, mut f: impl FnMut(f64, &SpectralField) -> SpectralField) -> Self {
        Trajectory {
            times: self.times.clone(),
            states: self
                .times
                .iter()
                .zip(&self.states)
                .map(|(&t, u)| f(t, u))
                .collect(),
        }
    }

    /// CSV with columns `t,n,re,im`, one row per time and mode.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,n,re,im")?;
        for (t, u) in self.times.iter().zip(&self.states) {
            for (n, c) in u.modes() {
                writeln!(out, "{t:.17e},{n},{:.17e},{:.17e}", c.re, c.im)?;
            }
        }
        Ok(())
    }

    /// Little-endian binary: `u64 N`, `u64 steps`, then per step `f64 t`
    /// followed by `2N + 1` pairs of `f64 (re, im)`.
    pub fn write_binary<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&(self.max_freq() as u64).to_le_bytes())?;
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        for (t, u) in self.times.iter().zip(&self.states) {
            out.write_all(&t.to_le_bytes())?;
            for c in u.coeffs() {
                out.write_all(&c.re.to_le_bytes())?;
                out.write_all(&c.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: std::io::Read>(mut input: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |input: &mut R| -> Result<[u8; 8]> {
            input.read_exact(&mut word)?;
            Ok(word)
        };
        let n = u64::from_le_bytes(next(&mut input)?) as usize;
        let steps = u64::from_le_bytes(next(&mut input)?) as usize;
        let mut times = Vec::with_capacity(steps);
        let mut states = Vec::with_capacity(steps);
        for _ in 0..steps {
            times.push(f64::from_le_bytes(next(&mut input)?));
            let mut coeffs = Vec::with_capacity(2 * n + 1);
            for _ in 0..2 * n + 1 {
                let re = f64::from_le_bytes(next(&mut input)?);
                let im = f64::from_le_bytes(next(&mut input)?);
                coeffs.push(Complex64::new(re, im));
            }
            states.push(SpectralField::from_coeffs(n, coeffs)?);
        }
        Trajectory::new(times, states)
    }
}

/// Modulation spectrum of one spatial mode over a uniformly sampled window.
///
/// The mode is demodulated by the free phase `exp(i n^3 t)` and Hann-windowed
/// before the discrete time transform, so bin `j` sits at `tau_j = n^3 + sigma_j`
/// with `sigma_j` the centred FFT frequencies. Returns `(tau_j, |transform|)`.
pub fn modulation_spectrum(traj: &Trajectory, n: i64, window: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    let (t0, dt, idx) = window_indices(traj, window)?;
    let k = idx.len();
    let plan = GridPlan::new(k);
    let free = (n * n * n) as f64;
    let mut buf: Vec<Complex64> = idx
        .iter()
        .enumerate()
        .map(|(j, &i)| {
            let t = traj.times[i];
            let w = hann(j, k);
            traj.states[i].coeff(n) * Complex64::from_polar(w, -free * (t - t0))
        })
        .collect();
    // unnormalized forward transform times dt approximates the time integral
    plan.forward_raw(&mut buf);
    let spectrum = buf;
    let dsigma = 2.0 * PI / (k as f64 * dt);
    Ok((0..k)
        .map(|j| {
            let shifted = if j <= k / 2 { j as f64 } else { j as f64 - k as f64 };
            (free + shifted * dsigma, spectrum[j].norm() * dt)
        })
        .collect())
}

fn hann(j: usize, k: usize) -> f64 {
    if k <= 1 {
        return 1.0;
    }
    let x = j as f64 / (k - 1) as f64;
    (PI * x).sin().powi(2)
}

fn window_indices(traj: &Trajectory, window: (f64, f64)) -> Result<(f64, f64, Vec<usize>)> {
    let (t0, t1) = window;
    let idx: Vec<usize> = (0..traj.len())
        .filter(|&i| traj.times[i] >= t0 - 1e-12 && traj.times[i] <= t1 + 1e-12)
        .collect();
    if idx.len() < 2 {
        return Err(Error::InvalidArgument(
            "window must contain at least two samples".into(),
        ));
    }
    let steps: Vec<f64> = idx.windows(2).map(|w| traj.times[w[1]] - traj.times[w[0]]).collect();
    let dt = steps.iter().sum::<f64>() / steps.len() as f64;
    let deviation = steps.iter().map(|s| (s - dt).abs()).fold(0.0, f64::max);
    if deviation > 1e-9 * dt.max(1.0) {
        return Err(Error::NonUniformGrid { deviation });
    }
    Ok((traj.times[idx[0]], dt, idx))
}

/// Discrete proxy for the `X^{s,b}_{p,q}` norm of a sampled trajectory.
///
/// Each mode is Hann-windowed over `window`, transformed in time, and weighted
/// by `<tau - n^3>^b`; the `L^q_tau` norm is taken with bin width `dtau`, then
/// the `<n>^s`-weighted `l^p_n` norm. This is a finite-window diagnostic and
/// does not converge to the continuum norm in any controlled way.
pub fn xsb_norm(traj: &Trajectory, spec: &NormSpec, window: (f64, f64)) -> Result<f64> {
    spec.validate()?;
    let b = spec.b.unwrap_or(0.0);
    let q = spec.q.unwrap_or(2.0);
    let (_, dt, idx) = window_indices(traj, window)?;
    let dtau = 2.0 * PI / (idx.len() as f64 * dt);
    let nmax = traj.max_freq() as i64;
    let mut per_mode = Vec::with_capacity(2 * nmax as usize + 1);
    for n in -nmax..=nmax {
        let spectrum = modulation_spectrum(traj, n, window)?;
        let free = (n * n * n) as f64;
        let weighted = spectrum
            .iter()
            .map(|&(tau, a)| bracket(tau - free).powf(b) * a);
        let lq = if q.is_infinite() {
            weighted.fold(0.0, f64::max)
        } else {
            (weighted.map(|a| a.powf(q)).sum::<f64>() * dtau).powf(1.0 / q)
        };
        per_mode.push(bracket(n as f64).powf(spec.s) * lq);
    }
    Ok(if spec.p.is_infinite() {
        per_mode.into_iter().fold(0.0, f64::max)
    } else {
        per_mode
            .into_iter()
            .map(|a| a.powf(spec.p))
            .sum::<f64>()
            .powf(1.0 / spec.p)
    })
}
