//! Flow-plus-measure experiments: almost-invariance of the truncated weighted
//! measures, conservation checks, uniform bounds and convergence of `Phi_N`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve, flow_to_times, FlowConfig, Integrator};
use crate::energies::{e1, e3, mass, momentum, DriftEvaluator};
use crate::ensemble::ensemble_map;
use crate::error::{Error, Result};
use crate::measures::{density_weight, gaussians, sample_field, EnsembleSpec};
use crate::spectral_field::{bracket, NormSpec, SpectralField};
use crate::stats::{linear_fit, ratio_of_means, Estimate, LinearFit};

/// Largest tolerated fraction of samples whose integration failed.
pub const MAX_EXCLUSION_RATE: f64 = 1e-3;

/// Measurable sets used as `A` in [`invariance_delta`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestSet {
    WholeSpace,
    /// `{ E_1(Pi_N u) <= r }`.
    E1Ball { r: f64 },
    /// `{ ||Pi_N u||_{FL^{s,p}} <= r }`.
    FlBall { s: f64, p: f64, r: f64 },
    /// `{ Re c_{n0} <= r }`.
    HalfSpace { n0: i64, r: f64 },
}

impl TestSet {
    pub fn contains(&self, u: &SpectralField, n: usize) -> Result<bool> {
        Ok(match *self {
            TestSet::WholeSpace => true,
            TestSet::E1Ball { r } => e1(&u.project_low(n)) <= r,
            TestSet::FlBall { s, p, r } => u.project_low(n).fl_norm(&NormSpec::new(s, p)?) <= r,
            TestSet::HalfSpace { n0, r } => {
                if n0.unsigned_abs() as usize > n {
                    return Err(Error::InvalidArgument(format!(
                        "half-space mode {n0} lies above the truncation {n}"
                    )));
                }
                u.coeff(n0).re <= r
            }
        })
    }

    pub fn label(&self) -> String {
        match self {
            TestSet::WholeSpace => "whole_space".into(),
            TestSet::E1Ball { r } => format!("e1_ball(r={r})"),
            TestSet::FlBall { s, p, r } => format!("fl_ball(s={s},p={p},r={r})"),
            TestSet::HalfSpace { n0, r } => format!("half_space(n0={n0},r={r})"),
        }
    }
}

/// Change of `E_3(Pi_N u)` along `Phi_N` over `[0, t]`, together with the
/// trapezoid integral of the drift `E*_{3,N}` over the accepted steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct E3Change {
    pub difference: f64,
    pub trapezoid: f64,
    /// Trapezoid integral of `|E*_{3,N}|`, the natural scale of quadrature errors.
    pub variation: f64,
    pub steps: usize,
}

/// Trapezoid rule on arbitrary nodes.
pub fn trapezoid(t: &[f64], f: &[f64]) -> f64 {
    t.windows(2)
        .zip(f.windows(2))
        .map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1]))
        .sum()
}

/// Integrates `Pi_N v` to time `t` and records both forms of the `E_3` change.
pub fn e3_change(v: &SpectralField, cfg: &FlowConfig, t: f64) -> Result<(E3Change, SpectralField)> {
    let n = cfg.n;
    let start = v.project_low(n).resized(n);
    if t == 0.0 {
        let zero = E3Change {
            difference: 0.0,
            trapezoid: 0.0,
            variation: 0.0,
            steps: 0,
        };
        return Ok((zero, start));
    }
    let mut integ = Integrator::new(cfg)?;
    let mut c = start.coeffs().to_vec();
    let mut evaluator = DriftEvaluator::new(n);
    let mut times = vec![0.0];
    let mut drift = vec![evaluator.eval(&c)];
    integ.advance_observed(&mut c, t, |elapsed, state| {
        times.push(elapsed);
        drift.push(evaluator.eval(state));
    })?;
    let end = SpectralField::from_coeffs(n, c)?;
    let change = E3Change {
        difference: e3(&end, cfg.sign) - e3(&start, cfg.sign),
        trapezoid: trapezoid(&times, &drift),
        variation: trapezoid(&times, &drift.iter().map(|d| d.abs()).collect::<Vec<_>>()).abs(),
        steps: integ.stats().accepted,
    };
    Ok((change, end))
}

/// Parameters of [`invariance_delta`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvarianceSpec {
    /// Truncation, sign, step and tolerance of `Phi_N`.
    pub flow: FlowConfig,
    /// Cutoff radius `R` of the weight.
    pub r: f64,
    pub t: f64,
    pub count: usize,
    pub master_seed: u64,
}

impl InvarianceSpec {
    pub fn validate(&self) -> Result<()> {
        self.flow.validate()?;
        if !(self.t.abs() <= 2.0) {
            return Err(Error::InvalidArgument(format!("|t| must be <= 2, got {}", self.t)));
        }
        self.ensemble().validate()
    }

    fn ensemble(&self) -> EnsembleSpec {
        EnsembleSpec {
            n: self.flow.n,
            master_seed: self.master_seed,
            count: self.count,
            sign: self.flow.sign,
            r: self.r,
        }
    }
}

/// `rho(Phi_N(t) A) - rho(A)` for one test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetDelta {
    pub set: TestSet,
    pub delta: Estimate,
}

/// Output of [`invariance_delta`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub deltas: Vec<SetDelta>,
    /// `E_mu[chi exp(∓ int |u|^4)]`.
    pub normalization: Estimate,
    pub excluded: usize,
    pub exclusion_rate: f64,
    /// Samples that had to be integrated (non-zero weight).
    pub evolved: usize,
}

struct SampleTerm {
    weight: f64,
    factor: f64,
    members: Vec<bool>,
}

/// Monte Carlo estimate of `rho_{R,N,±}(Phi_N(t) A) - rho_{R,N,±}(A)` through the
/// change of variables `u = Phi_N(t) v`:
///
/// `Z^{-1} E_mu[ 1_A(v) chi_R(E_1(v)) exp(∓ int |v|^4) (exp(-Delta E_3(v, t)) - 1) ]`,
/// `Z = E_mu[chi_R exp(∓ int |v|^4)]`. The volume and `E_1` are preserved by the
/// truncated flow, so only `E_3` enters. `Delta E_3` is the trapezoid integral of
/// `E*_{3,N}` along the computed trajectory. All sets share one ensemble.
pub fn invariance_delta(spec: &InvarianceSpec, sets: &[TestSet], workers: usize) -> Result<InvarianceReport> {
    spec.validate()?;
    let ensemble = spec.ensemble();
    let n = spec.flow.n;
    let out = ensemble_map(spec.count, workers, |i| {
        let v = sample_field(&ensemble, i)?;
        let w = density_weight(&v, spec.r, n, spec.flow.sign);
        let members = sets
            .iter()
            .map(|s| s.contains(&v, n))
            .collect::<Result<Vec<bool>>>()?;
        let factor = if w.weight > 0.0 && spec.t != 0.0 {
            let (change, _) = e3_change(&v, &spec.flow, spec.t)?;
            (-change.trapezoid).exp_m1()
        } else {
            0.0
        };
        if !factor.is_finite() {
            return Err(Error::NonFinite { time: spec.t });
        }
        Ok(SampleTerm {
            weight: w.weight,
            factor,
            members,
        })
    })?;
    let excluded = out.failures.len();
    let exclusion_rate = out.exclusion_rate();
    if exclusion_rate > MAX_EXCLUSION_RATE {
        return Err(Error::ExcessiveExclusion {
            excluded,
            count: spec.count,
        });
    }
    let terms: Vec<&SampleTerm> = out.results.iter().flatten().collect();
    let den: Vec<f64> = terms.iter().map(|t| t.weight).collect();
    let normalization = crate::stats::mean_se(&den);
    let mut deltas = Vec::with_capacity(sets.len());
    for (k, set) in sets.iter().enumerate() {
        let num: Vec<f64> = terms
            .iter()
            .map(|t| if t.members[k] { t.weight * t.factor } else { 0.0 })
            .collect();
        let delta = if spec.t == 0.0 {
            Estimate::exact(0.0)
        } else {
            ratio_of_means(&num, &den)?
        };
        deltas.push(SetDelta { set: *set, delta });
    }
    Ok(InvarianceReport {
        deltas,
        normalization,
        excluded,
        exclusion_rate,
        evolved: terms.iter().filter(|t| t.weight > 0.0).count(),
    })
}

/// Initial data for [`conservation_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// Draws of the Gaussian ensemble.
    Gaussian,
    /// `amplitude e^{i m x}` with a sample-dependent phase.
    SingleMode { m: i64, amplitude: f64 },
    Zero,
}

/// Parameters of [`conservation_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationSpec {
    pub flow: FlowConfig,
    pub data: InitialData,
    pub count: usize,
    pub master_seed: u64,
}

/// One trajectory of [`conservation_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationRow {
    pub index: usize,
    pub e1_initial: f64,
    pub e1_drift: f64,
    pub mass_drift: f64,
    /// Recorded only.
    pub momentum_drift: f64,
    pub e3_initial: f64,
    pub e3_difference: f64,
    /// Trapezoid integral of the drift over the accepted steps.
    pub e3_integral: f64,
    /// `|difference - integral| / max(int |E*_3|, tol |E_3|)`, 0 when both vanish.
    pub e3_mismatch: f64,
    pub steps: usize,
}

pub const CONSERVATION_HEADER: &str =
    "index,e1_initial,e1_drift,mass_drift,momentum_drift,e3_initial,e3_difference,e3_integral,e3_mismatch,steps";

impl ConservationRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            self.index,
            self.e1_initial,
            self.e1_drift,
            self.mass_drift,
            self.momentum_drift,
            self.e3_initial,
            self.e3_difference,
            self.e3_integral,
            self.e3_mismatch,
            self.steps
        )
    }
}

fn conservation_data(spec: &ConservationSpec, index: usize) -> Result<SpectralField> {
    let n = spec.flow.n;
    match spec.data {
        InitialData::Gaussian => sample_field(
            &EnsembleSpec {
                n,
                master_seed: spec.master_seed,
                count: spec.count,
                sign: spec.flow.sign,
                r: 1.0,
            },
            index,
        ),
        InitialData::SingleMode { m, amplitude } => {
            if m.unsigned_abs() as usize > n {
                return Err(Error::InvalidArgument(format!("mode {m} above truncation {n}")));
            }
            let phase = gaussians(spec.master_seed, index as u64, 0)[0].arg();
            Ok(SpectralField::single_mode(n, m, Complex64::from_polar(amplitude, phase)))
        }
        InitialData::Zero => Ok(SpectralField::zeros(n)),
    }
}

/// Per-sample conservation diagnostics of `Phi_N` on `[0, t_final]`.
pub fn conservation_suite(spec: &ConservationSpec, workers: usize) -> Result<Vec<ConservationRow>> {
    spec.flow.validate()?;
    let rel = |a: f64, b: f64| if b == 0.0 { (a - b).abs() } else { ((a - b) / b).abs() };
    let out = ensemble_map(spec.count, workers, |index| {
        let u0 = conservation_data(spec, index)?;
        let (change, end) = e3_change(&u0, &spec.flow, spec.flow.t_final)?;
        let start = u0.project_low(spec.flow.n);
        let e3_initial = e3(&start, spec.flow.sign);
        let gap = (change.difference - change.trapezoid).abs();
        let scale = change.variation.max(spec.flow.tol * e3_initial.abs());
        Ok(ConservationRow {
            index,
            e1_initial: e1(&start),
            e1_drift: rel(e1(&end), e1(&start)),
            mass_drift: rel(mass(&end), mass(&start)),
            momentum_drift: (momentum(&end) - momentum(&start)).abs(),
            e3_initial,
            e3_difference: change.difference,
            e3_integral: change.trapezoid,
            e3_mismatch: if gap == 0.0 { 0.0 } else { gap / scale },
            steps: change.steps,
        })
    })?;
    if let Some(f) = out.failures.first() {
        return Err(Error::InvalidArgument(format!(
            "sample {} failed: {}",
            f.index, f.message
        )));
    }
    Ok(out.results.into_iter().flatten().collect())
}

/// Parameters of [`prop31_bound_study`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundStudySpec {
    pub s_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    /// Regularity and exponent of the Fourier-Lebesgue norm.
    pub s: f64,
    pub p: f64,
    pub count: usize,
    pub master_seed: u64,
    /// Time window `[0, t_max]` sampled at `steps` equal increments.
    pub t_max: f64,
    pub steps: usize,
    pub flow: FlowConfig,
}

/// One `(S, N)` cell of [`prop31_bound_study`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub size: f64,
    pub n: usize,
    /// `max_{t, samples} ||Phi_N(t) u_0|| / (S + 1/S)` over the whole window.
    pub max_ratio: f64,
    /// Largest sampled time up to which every sample keeps the ratio `<= 1`.
    pub admissible_window: f64,
}

/// Sup of `||Phi_N(t) u_0||_{FL^{s,p}}` for Gaussian draws rescaled to norm `S`.
pub fn prop31_bound_study(spec: &BoundStudySpec, workers: usize) -> Result<Vec<BoundRow>> {
    let norm = NormSpec::new(spec.s, spec.p)?;
    if spec.steps == 0 || !(spec.t_max > 0.0) {
        return Err(Error::InvalidArgument("bound study needs steps >= 1 and t_max > 0".into()));
    }
    let times: Vec<f64> = (0..=spec.steps)
        .map(|k| spec.t_max * k as f64 / spec.steps as f64)
        .collect();
    let mut rows = Vec::new();
    for &size in &spec.s_grid {
        if !(size > 0.0) {
            return Err(Error::InvalidArgument(format!("scale S must be positive, got {size}")));
        }
        for &n in &spec.n_grid {
            let cfg = FlowConfig { n, ..spec.flow };
            let bound = size + 1.0 / size;
            let out = ensemble_map(spec.count, workers, |i| {
                let ens = EnsembleSpec {
                    n,
                    master_seed: spec.master_seed,
                    count: spec.count,
                    sign: cfg.sign,
                    r: 1.0,
                };
                let v = sample_field(&ens, i)?;
                let u0 = v.scale(Complex64::new(size / v.fl_norm(&norm), 0.0));
                let traj = flow_to_times(&u0, &cfg, &times)?;
                Ok(traj
                    .states()
                    .iter()
                    .map(|u| u.fl_norm(&norm) / bound)
                    .collect::<Vec<f64>>())
            })?;
            if let Some(f) = out.failures.first() {
                return Err(Error::InvalidArgument(format!("sample {} failed: {}", f.index, f.message)));
            }
            let ratios: Vec<Vec<f64>> = out.results.into_iter().flatten().collect();
            let max_ratio = ratios.iter().flatten().cloned().fold(0.0, f64::max);
            let mut window = 0.0;
            for (k, &t) in times.iter().enumerate() {
                if ratios.iter().all(|r| r[..=k].iter().all(|&x| x <= 1.0)) {
                    window = t;
                } else {
                    break;
                }
            }
            rows.push(BoundRow {
                size,
                n,
                max_ratio,
                admissible_window: window,
            });
        }
    }
    Ok(rows)
}

/// Parameters of [`convergence_study`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSpec {
    pub n_grid: Vec<usize>,
    /// Regularity `s` of the data and `s'` of the measured norm.
    pub s_data: f64,
    pub s_measure: f64,
    pub p: f64,
    pub t_final: f64,
    /// Number of equal time increments over which the sup is taken.
    pub steps: usize,
    pub master_seed: u64,
    pub flow: FlowConfig,
}

/// Excess decay of the data beyond `FL^{s,p}`: `c_n = g_n <n>^{-(s + 1/p + EPS)}`.
pub const DATA_DECAY_MARGIN: f64 = 0.05;

/// Fixed random data, just inside `FL^{s,p}`, on `|n| <= max_freq`.
pub fn convergence_data(s: f64, p: f64, master_seed: u64, max_freq: usize) -> SpectralField {
    let g = gaussians(master_seed, 0, max_freq);
    let alpha = s + 1.0 / p + DATA_DECAY_MARGIN;
    SpectralField::from_fn(max_freq, |j| g[(j + max_freq as i64) as usize] * bracket(j as f64).powf(-alpha))
}

/// Output of [`convergence_study`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// `(N, sup_t ||Phi_N(t) u_0 - Phi_{2N}(t) u_0||_{FL^{s',p}})`.
    pub rows: Vec<(usize, f64)>,
    /// Fit of `log2(difference)` against `log2(N)`.
    pub fit: LinearFit,
    /// `-slope`.
    pub exponent: f64,
}

/// `sup_{t <= T} || Phi_N(t) u_0 - Phi_{2N}(t) u_0 ||_{FL^{s',p}}` and its decay rate.
pub fn convergence_study(spec: &ConvergenceSpec, workers: usize) -> Result<ConvergenceReport> {
    if spec.n_grid.len() < 2 || spec.steps == 0 {
        return Err(Error::InvalidArgument("convergence study needs >= 2 values of N and steps >= 1".into()));
    }
    let norm = NormSpec::new(spec.s_measure, spec.p)?;
    let top = 2 * spec.n_grid.iter().copied().max().unwrap_or(1);
    let u0 = convergence_data(spec.s_data, spec.p, spec.master_seed, top);
    let times: Vec<f64> = (0..=spec.steps)
        .map(|k| spec.t_final * k as f64 / spec.steps as f64)
        .collect();
    let mut levels: Vec<usize> = spec.n_grid.iter().flat_map(|&n| [n, 2 * n]).collect();
    levels.sort_unstable();
    levels.dedup();
    let out = ensemble_map(levels.len(), workers, |k| {
        let cfg = FlowConfig {
            n: levels[k],
            ..spec.flow
        };
        Ok(flow_to_times(&u0, &cfg, &times)?.states().to_vec())
    })?;
    if let Some(f) = out.failures.first() {
        return Err(Error::InvalidArgument(format!("level {} failed: {}", levels[f.index], f.message)));
    }
    let trajectories: Vec<Vec<SpectralField>> = out.results.into_iter().flatten().collect();
    let at = |n: usize| &trajectories[levels.binary_search(&n).expect("level present")];
    let rows: Vec<(usize, f64)> = spec
        .n_grid
        .iter()
        .map(|&n| {
            let sup = at(n)
                .iter()
                .zip(at(2 * n))
                .map(|(a, b)| (a - b).fl_norm(&norm))
                .fold(0.0, f64::max);
            (n, sup)
        })
        .collect();
    let x: Vec<f64> = rows.iter().map(|r| (r.0 as f64).log2()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.1.log2()).collect();
    let fit = linear_fit(&x, &y, None)?;
    Ok(ConvergenceReport {
        exponent: -fit.slope,
        rows,
        fit,
    })
}

/// Parameters of [`growth_diagnostic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthSpec {
    pub flow: FlowConfig,
    pub t_max: f64,
    pub steps: usize,
    pub count: usize,
    pub master_seed: u64,
}

/// `max_t ||Phi_N(t) u_0||_{FL^{1/2,4}}^2 / log(2 + t)` per Gaussian draw.
///
/// A diagnostic only: the logarithmic growth bound holds almost surely with a
/// random constant, so nothing is asserted.
pub fn growth_diagnostic(spec: &GrowthSpec, workers: usize) -> Result<Vec<f64>> {
    let norm = NormSpec::new(0.5, 4.0)?;
    if spec.steps == 0 || !(spec.t_max > 0.0) {
        return Err(Error::InvalidArgument("growth diagnostic needs steps >= 1 and t_max > 0".into()));
    }
    let times: Vec<f64> = (0..=spec.steps)
        .map(|k| spec.t_max * k as f64 / spec.steps as f64)
        .collect();
    let ens = EnsembleSpec {
        n: spec.flow.n,
        master_seed: spec.master_seed,
        count: spec.count,
        sign: spec.flow.sign,
        r: 1.0,
    };
    let out = ensemble_map(spec.count, workers, |i| {
        let u0 = sample_field(&ens, i)?;
        let traj = flow_to_times(&u0, &spec.flow, &times)?;
        Ok(traj
            .times()
            .iter()
            .zip(traj.states())
            .map(|(t, u)| u.fl_norm(&norm).powi(2) / (2.0 + t).ln())
            .fold(0.0, f64::max))
    })?;
    if let Some(f) = out.failures.first() {
        return Err(Error::InvalidArgument(format!("sample {} failed: {}", f.index, f.message)));
    }
    Ok(out.results.into_iter().flatten().collect())
}

/// `Phi_N(t) u` for every sample of an ensemble; used by the `evolve` experiment.
pub fn evolve_samples(ens: &EnsembleSpec, cfg: &FlowConfig, t: f64, workers: usize) -> Result<Vec<SpectralField>> {
    ens.validate()?;
    let out = ensemble_map(ens.count, workers, |i| evolve(&sample_field(ens, i)?, cfg, t))?;
    if let Some(f) = out.failures.first() {
        return Err(Error::InvalidArgument(format!("sample {} failed: {}", f.index, f.message)));
    }
    Ok(out.results.into_iter().flatten().collect())
}

/// A numeric output, either exact or carrying a standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Output {
    pub name: String,
    pub value: f64,
    /// `None` marks an exact value.
    pub stderr: Option<f64>,
}

/// A threshold check of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Summary of a finished experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub parameters: serde_json::Value,
    pub outputs: Vec<Output>,
    pub checks: Vec<Check>,
}

impl ExperimentResult {
    pub fn new(name: impl Into<String>, parameters: serde_json::Value) -> Self {
        ExperimentResult {
            name: name.into(),
            parameters,
            outputs: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn exact(&mut self, name: impl Into<String>, value: f64) {
        self.outputs.push(Output {
            name: name.into(),
            value,
            stderr: None,
        });
    }

    pub fn estimate(&mut self, name: impl Into<String>, e: &Estimate) {
        self.outputs.push(Output {
            name: name.into(),
            value: e.value,
            stderr: Some(e.stderr),
        });
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// `name,value,stderr` lines; exact values have an empty error column.
    pub fn outputs_csv(&self) -> String {
        let mut s = String::from("name,value,stderr\n");
        for o in &self.outputs {
            let se = o.stderr.map(|e| format!("{e:e}")).unwrap_or_default();
            s.push_str(&format!("{},{:e},{}\n", o.name, o.value, se));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Sign;

    fn flow(n: usize) -> FlowConfig {
        FlowConfig {
            n,
            tol: 1e-9,
            dt: 1e-2,
            ..FlowConfig::default()
        }
    }

    #[test]
    fn zero_time_delta_is_exact_zero() {
        let spec = InvarianceSpec {
            flow: flow(8),
            r: 4.0,
            t: 0.0,
            count: 50,
            master_seed: 3,
        };
        let rep = invariance_delta(&spec, &[TestSet::WholeSpace, TestSet::E1Ball { r: 4.0 }], 1).unwrap();
        for d in &rep.deltas {
            assert_eq!(d.delta.value, 0.0);
            assert_eq!(d.delta.stderr, 0.0);
        }
        assert_eq!(rep.excluded, 0);
    }

    #[test]
    fn whole_space_delta_consistent_with_zero() {
        let spec = InvarianceSpec {
            flow: FlowConfig { tol: 1e-6, ..flow(8) },
            r: 4.0,
            t: 0.3,
            count: 400,
            master_seed: 9,
        };
        let rep = invariance_delta(&spec, &[TestSet::WholeSpace], 2).unwrap();
        let d = rep.deltas[0].delta;
        assert!(d.consistent_with(0.0, 3.0), "{d:?}");
        assert!(d.stderr > 0.0);
        assert!(rep.evolved > 0);
    }

    #[test]
    fn test_set_membership() {
        let u = SpectralField::single_mode(4, 1, Complex64::new(0.5, 0.0));
        assert!(TestSet::WholeSpace.contains(&u, 4).unwrap());
        let mass = e1(&u);
        assert!(TestSet::E1Ball { r: mass }.contains(&u, 4).unwrap());
        assert!(!TestSet::E1Ball { r: 0.9 * mass }.contains(&u, 4).unwrap());
        assert!(TestSet::HalfSpace { n0: 1, r: 0.5 }.contains(&u, 4).unwrap());
        assert!(!TestSet::HalfSpace { n0: 1, r: 0.4 }.contains(&u, 4).unwrap());
        assert!(TestSet::HalfSpace { n0: 9, r: 0.0 }.contains(&u, 4).is_err());
        let fl = TestSet::FlBall { s: 0.5, p: 4.0, r: 0.5 * 2f64.powf(0.25) + 1e-12 };
        assert!(fl.contains(&u, 4).unwrap());
    }

    #[test]
    fn e3_change_matches_integral() {
        let ens = EnsembleSpec {
            n: 16,
            master_seed: 1,
            count: 3,
            sign: Sign::Defocusing,
            r: 1.0,
        };
        for i in 0..3 {
            let v = sample_field(&ens, i).unwrap();
            let cfg = FlowConfig { tol: 1e-12, ..flow(16) };
            let (c, _) = e3_change(&v, &cfg, 0.5).unwrap();
            assert!(c.difference.abs() > 1e-8);
            assert!((c.difference - c.trapezoid).abs() < 1e-6 * c.variation, "{c:?}");
        }
    }

    #[test]
    fn trapezoid_on_uneven_nodes() {
        let t = [0.0, 0.1, 0.25, 0.3, 0.5];
        let lin: Vec<f64> = t.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((trapezoid(&t, &lin) - 0.75).abs() < 1e-15);
        let back: Vec<f64> = t.iter().map(|x| -x).collect();
        assert!((trapezoid(&back, &lin) + 0.75).abs() < 1e-15);
        assert_eq!(trapezoid(&[0.0], &[1.0]), 0.0);
    }

    #[test]
    fn conservation_single_mode_and_zero() {
        for data in [
            InitialData::SingleMode { m: 3, amplitude: 0.5 },
            InitialData::Zero,
        ] {
            let spec = ConservationSpec {
                flow: FlowConfig { t_final: 0.5, ..flow(8) },
                data,
                count: 3,
                master_seed: 2,
            };
            for row in conservation_suite(&spec, 1).unwrap() {
                assert!(row.e1_drift <= 10.0 * spec.flow.tol, "{row:?}");
                assert!(row.mass_drift <= 10.0 * spec.flow.tol);
                assert!(row.e3_difference.abs() <= 10.0 * spec.flow.tol * (1.0 + row.e3_initial.abs()));
                if data == InitialData::Zero {
                    assert_eq!(row.e1_initial, 0.0);
                    assert_eq!(row.e3_integral, 0.0);
                }
            }
        }
    }

    #[test]
    fn linear_flow_keeps_bound_ratio() {
        let spec = BoundStudySpec {
            s_grid: vec![2.0],
            n_grid: vec![8],
            s: 0.5,
            p: 4.0,
            count: 3,
            master_seed: 4,
            t_max: 0.5,
            steps: 5,
            flow: FlowConfig {
                equation: crate::dynamics::Equation::Linear,
                ..flow(8)
            },
        };
        let rows = prop31_bound_study(&spec, 1).unwrap();
        assert!((rows[0].max_ratio - 2.0 / 2.5).abs() < 1e-12);
        assert_eq!(rows[0].admissible_window, 0.5);
    }

    #[test]
    fn convergence_data_regularity() {
        let u = convergence_data(0.9, 4.0, 1, 256);
        let norm = NormSpec::new(0.9, 4.0).unwrap();
        let full = u.fl_norm(&norm);
        let half = u.project_low(128).fl_norm(&norm);
        assert!(full.is_finite() && (full - half) / full < 0.05);
    }
}
