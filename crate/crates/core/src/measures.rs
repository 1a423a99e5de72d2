//! Gaussian random Fourier series, the mass cutoff, Gibbs-type densities and the
//! Monte Carlo estimators built on them.
//!
//! A sample is `u = (2 pi)^{-1/2} sum_{|j| <= N} g_j / <j> e^{ijx}` with `g_j`
//! independent standard complex Gaussians (`E|g|^2 = 1`, `E g^2 = 0`).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::energies::{e1, l4_fourth};
use crate::ensemble::ensemble_map;
use crate::error::{Error, Result};
use crate::spectral_field::{bracket, NormSpec, SpectralField};
use crate::stats::{proportion, self_normalized, Estimate};
use crate::transform::{quadrature_grid, GridPlan};
use crate::Sign;

/// Description of a Gaussian ensemble and the cutoff radius of its density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n: usize,
    pub master_seed: u64,
    pub count: usize,
    pub sign: Sign,
    pub r: f64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidArgument("ensemble count must be >= 1".into()));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidArgument(format!("cutoff radius must be positive, got {}", self.r)));
        }
        Ok(())
    }
}

/// Gibbs weight of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleWeight {
    pub e1: f64,
    pub l4_fourth: f64,
    pub chi: f64,
    /// `chi * exp(∓ int |u|^4)`.
    pub weight: f64,
}

fn h(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// Smooth cutoff `chi(x / R)`: 1 on `|t| <= 1`, 0 on `|t| >= 2`, and
/// `h(2 - |t|) / (h(2 - |t|) + h(|t| - 1))` in between, `h(s) = exp(-1/s)`.
pub fn bump_chi(x: f64, r: f64) -> f64 {
    let t = (x / r).abs();
    if t <= 1.0 {
        1.0
    } else if t >= 2.0 {
        0.0
    } else {
        let a = h(2.0 - t);
        a / (a + h(t - 1.0))
    }
}

/// Position of frequency `j` in the sampling order `0, 1, -1, 2, -2, ...`.
pub fn zigzag(j: i64) -> u64 {
    if j > 0 {
        (2 * j - 1) as u64
    } else {
        (-2 * j) as u64
    }
}

fn unit_open(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn unit_closed_open(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard complex Gaussians `g_j` for `|j| <= n`, indexed `j + n`.
///
/// Sample `index` reads ChaCha8 stream `index` keyed by `master_seed`; the Gaussian
/// of frequency `j` consumes words `4k .. 4k + 4` with `k = zigzag(j)`, so the
/// draws nest across truncations: the first `2N + 1` Gaussians do not depend on
/// the requested `n >= N`.
pub fn gaussians(master_seed: u64, index: u64, n: usize) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    let mut by_order = Vec::with_capacity(2 * n + 1);
    for _ in 0..2 * n + 1 {
        let u1 = unit_open(rng.next_u64());
        let u2 = unit_closed_open(rng.next_u64());
        by_order.push(Complex64::from_polar((-u1.ln()).sqrt(), 2.0 * PI * u2));
    }
    let ni = n as i64;
    (-ni..=ni).map(|j| by_order[zigzag(j) as usize]).collect()
}

/// The `index`-th field of the ensemble: `c_j = g_j / (sqrt(2 pi) <j>)`.
pub fn sample_field(spec: &EnsembleSpec, index: usize) -> Result<SpectralField> {
    if index >= spec.count {
        return Err(Error::InvalidArgument(format!(
            "sample index {index} outside ensemble of {}",
            spec.count
        )));
    }
    Ok(field_from_gaussians(spec.n, &gaussians(spec.master_seed, index as u64, spec.n)))
}

/// `c_j = g_j / (sqrt(2 pi) <j>)` for `|j| <= n`.
pub fn field_from_gaussians(n: usize, g: &[Complex64]) -> SpectralField {
    let norm = 1.0 / (2.0 * PI).sqrt();
    SpectralField::from_fn(n, |j| g[(j + n as i64) as usize] * (norm / bracket(j as f64)))
}

/// `chi_R(E_1(Pi_N u)) exp(∓ int |Pi_N u|^4)`.
pub fn density_weight(u: &SpectralField, r: f64, n: usize, sign: Sign) -> SampleWeight {
    let low = u.project_low(n);
    let e1 = e1(&low);
    let l4 = l4_fourth(&low);
    let chi = bump_chi(e1, r);
    let weight = if chi > 0.0 {
        chi * (-sign.value() * l4).exp()
    } else {
        0.0
    };
    SampleWeight {
        e1,
        l4_fourth: l4,
        chi,
        weight,
    }
}

/// Norm used by [`tail_probability`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldNorm {
    /// `(2 pi sum <n>^{2s} |c_n|^2)^{1/2}`; `s = 0` is the `L^2` norm.
    Sobolev { s: f64 },
    FourierLebesgue { s: f64, p: f64 },
}

impl FieldNorm {
    pub fn eval(&self, u: &SpectralField) -> Result<f64> {
        match *self {
            FieldNorm::Sobolev { s } => Ok(u.sobolev_norm(s)),
            FieldNorm::FourierLebesgue { s, p } => Ok(u.fl_norm(&NormSpec::new(s, p)?)),
        }
    }
}

/// `P(||u|| > lambda)` with binomial standard error.
pub fn tail_probability(
    spec: &EnsembleSpec,
    norm: &FieldNorm,
    lambda: f64,
    workers: usize,
) -> Result<Estimate> {
    spec.validate()?;
    let out = ensemble_map(spec.count, workers, |i| {
        let u = sample_field(spec, i)?;
        Ok(norm.eval(&u)? > lambda)
    })?;
    fail_on_exclusions(out.failures.len(), spec.count)?;
    let hits = out.successes().filter(|(_, &b)| b).count();
    Ok(proportion(hits, out.success_count()))
}

/// `E_mu[F^q]` with the largest single-sample share of the sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub estimate: Estimate,
    pub max_share: f64,
}

/// Monte Carlo moment `E_mu[F_{R,N,±}^q]`.
pub fn density_moment(spec: &EnsembleSpec, q: f64, workers: usize) -> Result<MomentEstimate> {
    spec.validate()?;
    if q < 1.0 {
        return Err(Error::InvalidArgument(format!("moment order must be >= 1, got {q}")));
    }
    let weights = sample_weights(spec, workers)?;
    let values: Vec<f64> = weights.iter().map(|w| w.weight.powf(q)).collect();
    let total: f64 = values.iter().sum();
    let max = values.iter().cloned().fold(0.0, f64::max);
    Ok(MomentEstimate {
        estimate: crate::stats::mean_se(&values),
        max_share: if total > 0.0 { max / total } else { 0.0 },
    })
}

/// Weights of every sample of the ensemble, in index order.
pub fn sample_weights(spec: &EnsembleSpec, workers: usize) -> Result<Vec<SampleWeight>> {
    spec.validate()?;
    let out = ensemble_map(spec.count, workers, |i| {
        let u = sample_field(spec, i)?;
        Ok(density_weight(&u, spec.r, spec.n, spec.sign))
    })?;
    fail_on_exclusions(out.failures.len(), spec.count)?;
    Ok(out.results.into_iter().flatten().collect())
}

/// Self-normalized `rho_{R,N,±}`-expectation of `functional`.
pub fn weighted_expectation<F>(spec: &EnsembleSpec, functional: F, workers: usize) -> Result<Estimate>
where
    F: Fn(&SpectralField, &SampleWeight) -> f64 + Sync,
{
    spec.validate()?;
    let out = ensemble_map(spec.count, workers, |i| {
        let u = sample_field(spec, i)?;
        let w = density_weight(&u, spec.r, spec.n, spec.sign);
        let f = if w.weight > 0.0 { functional(&u, &w) } else { 0.0 };
        Ok((w.weight, f))
    })?;
    fail_on_exclusions(out.failures.len(), spec.count)?;
    let (w, f): (Vec<f64>, Vec<f64>) = out.results.into_iter().flatten().unzip();
    self_normalized(&w, &f)
}

fn fail_on_exclusions(failed: usize, count: usize) -> Result<()> {
    if failed > 0 {
        return Err(Error::InvalidArgument(format!("{failed} of {count} samples failed")));
    }
    Ok(())
}

/// Both sides of `||u||_{L^4} <= ||<D>^{1/4} u||_{L^8}^{2/5} ||u||_{L^2}^{3/5}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl GnCheck {
    /// Holds up to a relative slack.
    pub fn holds(&self, rel: f64) -> bool {
        self.lhs <= self.rhs * (1.0 + rel)
    }
}

/// Evaluates the Gagliardo–Nirenberg inequality with exact quadratures.
pub fn gagliardo_nirenberg(u: &SpectralField) -> GnCheck {
    let n = u.max_freq().max(1);
    let plan = GridPlan::new(quadrature_grid(n, 8));
    let m = plan.len();
    let mut g = vec![Complex64::new(0.0, 0.0); m];
    plan.synthesize(u.coeffs(), &mut g);
    let w = 2.0 * PI / m as f64;
    let l4 = (w * g.iter().map(|z| z.norm_sqr().powi(2)).sum::<f64>()).powf(0.25);
    let smoothed = SpectralField::from_fn(u.max_freq(), |k| u.coeff(k) * bracket(k as f64).powf(0.25));
    plan.synthesize(smoothed.coeffs(), &mut g);
    let l8 = (w * g.iter().map(|z| z.norm_sqr().powi(4)).sum::<f64>()).powf(0.125);
    let l2 = u.sobolev_norm(0.0);
    GnCheck {
        lhs: l4,
        rhs: l8.powf(0.4) * l2.powf(0.6),
    }
}

/// Empirical `L^r(Omega)` norms of `X = sum_j a_j g_j` for each `r`, together with
/// `norm / (sqrt(r) ||X||_{L^2})`.
pub fn hypercontractivity(
    a: &[Complex64],
    rs: &[f64],
    samples: usize,
    seed: u64,
) -> Vec<(f64, f64, f64)> {
    let n = a.len().saturating_sub(1) / 2;
    let mags: Vec<f64> = (0..samples)
        .map(|i| {
            let g = gaussians(seed, i as u64, n);
            a.iter().zip(&g).map(|(a, g)| a * g).sum::<Complex64>().norm()
        })
        .collect();
    let norm = |r: f64| (mags.iter().map(|m| m.powf(r)).sum::<f64>() / samples as f64).powf(1.0 / r);
    let l2 = norm(2.0);
    rs.iter()
        .map(|&r| {
            let v = norm(r);
            (r, v, v / (r.sqrt() * l2))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_se;

    fn spec(n: usize, count: usize) -> EnsembleSpec {
        EnsembleSpec {
            n,
            master_seed: 42,
            count,
            sign: Sign::Defocusing,
            r: 4.0,
        }
    }

    #[test]
    fn chi_values() {
        assert_eq!(bump_chi(0.5 * 3.0, 3.0), 1.0);
        assert_eq!(bump_chi(2.5 * 3.0, 3.0), 0.0);
        assert!((bump_chi(1.5 * 3.0, 3.0) - 0.5).abs() < 1e-15);
        assert_eq!(bump_chi(-0.9, 1.0), 1.0);
        let mut prev = 1.0;
        for k in 0..=100 {
            let v = bump_chi(1.0 + k as f64 / 100.0, 1.0);
            assert!(v <= prev + 1e-15 && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn zigzag_order() {
        let order: Vec<u64> = [0, 1, -1, 2, -2].iter().map(|&j| zigzag(j)).collect();
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn sampling_is_deterministic_and_nested() {
        let a = sample_field(&spec(8, 10), 3).unwrap();
        let b = sample_field(&spec(8, 10), 3).unwrap();
        assert_eq!(a, b);
        let big = sample_field(&spec(16, 10), 3).unwrap();
        assert_eq!(big.project_low(8), a);
        assert_ne!(sample_field(&spec(8, 10), 4).unwrap(), a);
        assert!(sample_field(&spec(8, 10), 10).is_err());
    }

    #[test]
    fn mean_l2_norm_matches_variance_sum() {
        // E ||u||^2 = sum_{|j| <= 1} 1 / <j>^2 = 2
        let s = spec(1, 100_000);
        let xs: Vec<f64> = (0..s.count)
            .map(|i| sample_field(&s, i).unwrap().sobolev_norm(0.0).powi(2))
            .collect();
        let e = mean_se(&xs);
        assert!((e.value - 2.0).abs() < 3.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn second_moments() {
        let s = spec(2, 100_000);
        let fields: Vec<SpectralField> = (0..s.count).map(|i| sample_field(&s, i).unwrap()).collect();
        for (j, k) in [(0i64, 0i64), (1, 1), (-2, -2), (1, 2), (0, -1)] {
            let herm: Vec<f64> = fields.iter().map(|u| (u.coeff(j) * u.coeff(k).conj()).re).collect();
            let pseudo: Vec<f64> = fields.iter().map(|u| (u.coeff(j) * u.coeff(k)).re).collect();
            let expect = if j == k { 1.0 / (2.0 * PI * (1.0 + (j * j) as f64)) } else { 0.0 };
            let (h, p) = (mean_se(&herm), mean_se(&pseudo));
            assert!((h.value - expect).abs() < 3.0 * h.stderr.max(1e-15), "{j} {k} {h:?}");
            assert!(p.value.abs() < 3.0 * p.stderr, "{j} {k} {p:?}");
        }
    }

    #[test]
    fn weights_basic_properties() {
        let zero = density_weight(&SpectralField::zeros(4), 1.0, 4, Sign::Focusing);
        assert_eq!(zero.weight, 1.0);
        let big = SpectralField::single_mode(4, 0, Complex64::new(3.0, 0.0));
        assert_eq!(density_weight(&big, 1.0, 4, Sign::Defocusing).weight, 0.0);
        for i in 0..200 {
            let u = sample_field(&spec(6, 200), i).unwrap();
            let w = density_weight(&u, 4.0, 6, Sign::Defocusing);
            assert!((0.0..=1.0).contains(&w.weight));
            assert!((w.weight - w.chi * (-w.l4_fourth).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn l2_tail_is_exponential_for_single_mode() {
        let s = spec(0, 20_000);
        let norm = FieldNorm::Sobolev { s: 0.0 };
        for lambda in [0.5, 1.0, 1.5] {
            let e = tail_probability(&s, &norm, lambda, 1).unwrap();
            let exact = (-lambda * lambda as f64).exp();
            assert!((e.value - exact).abs() < 3.0 * e.stderr, "{lambda}: {e:?} vs {exact}");
        }
        assert_eq!(tail_probability(&s, &norm, 0.0, 1).unwrap().value, 1.0);
    }

    #[test]
    fn weighted_expectation_identities() {
        let s = spec(6, 2000);
        let one = weighted_expectation(&s, |_, _| 1.0, 2).unwrap();
        assert_eq!(one.value, 1.0);
        let inside = weighted_expectation(&s, |_, w| if w.e1 <= 2.0 * s.r { 1.0 } else { 0.0 }, 2).unwrap();
        assert_eq!(inside.value, 1.0);
        let tiny = EnsembleSpec { r: 1e-300, ..spec(6, 50) };
        assert!(matches!(
            weighted_expectation(&tiny, |_, _| 1.0, 1),
            Err(Error::DegenerateWeights { .. })
        ));
    }

    #[test]
    fn defocusing_moments_bounded_by_one() {
        let s = spec(8, 500);
        for q in [1.0, 2.0, 3.5] {
            assert!(density_moment(&s, q, 1).unwrap().estimate.value <= 1.0);
        }
        assert!(density_moment(&s, 0.5, 1).is_err());
    }

    #[test]
    fn gn_holds_on_samples_and_modes() {
        for i in 0..200 {
            let u = sample_field(&spec(12, 200), i).unwrap();
            assert!(gagliardo_nirenberg(&u).holds(1e-10));
        }
        assert!(gagliardo_nirenberg(&SpectralField::single_mode(3, 2, Complex64::new(1.0, 0.0))).holds(1e-12));
    }

    #[test]
    fn hypercontractive_growth() {
        let a: Vec<Complex64> = (-4i64..=4).map(|j| Complex64::new(1.0 / bracket(j as f64), 0.0)).collect();
        let rows = hypercontractivity(&a, &[2.0, 4.0, 8.0], 20_000, 9);
        // exact ratios: Gamma(1 + r/2)^{1/r} / sqrt(r)
        for (r, _, ratio) in rows {
            assert!(ratio <= 1.0, "{r}: {ratio}");
        }
    }
}
