use num_complex::Complex64;

use super::integrator::{Equation, FlowConfig};
use super::resonance::resonance;
use crate::energies::{mass, momentum};
use crate::error::{Error, Result};
use crate::spectral_field::SpectralField;
use crate::transform::{dealiased_grid, GridPlan};
use crate::Sign;

/// Largest truncation accepted by the direct triple-sum evaluation.
pub const DIRECT_CAP: usize = 64;

/// Pseudospectral evaluation of the truncated nonlinearity with reusable buffers.
///
/// The cubic `|u|^2 u_x` is formed on a grid with `M >= 4N + 1`, which is enough
/// for its projection onto `|n| <= N` to be alias-free.
#[derive(Debug, Clone)]
pub struct NonlinearityKernel {
    n: usize,
    sign: Sign,
    equation: Equation,
    plan: GridPlan,
    u: Vec<Complex64>,
    du: Vec<Complex64>,
    du_coeffs: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl NonlinearityKernel {
    pub fn new(n: usize, sign: Sign, equation: Equation) -> Self {
        Self::with_grid(n, sign, equation, dealiased_grid(n.max(1), 3))
            .expect("dealiased grid is large enough")
    }

    pub fn with_grid(n: usize, sign: Sign, equation: Equation, grid: usize) -> Result<Self> {
        let required = 4 * n + 1;
        if grid < required {
            return Err(Error::Aliasing {
                grid,
                max_freq: n,
                required,
            });
        }
        let plan = GridPlan::new(grid);
        Ok(NonlinearityKernel {
            n,
            sign,
            equation,
            u: vec![Complex64::new(0.0, 0.0); grid],
            du: vec![Complex64::new(0.0, 0.0); grid],
            du_coeffs: vec![Complex64::new(0.0, 0.0); 2 * n + 1],
            scratch: vec![Complex64::new(0.0, 0.0); plan.scratch_len()],
            plan,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.plan.len()
    }

    /// Writes the right-hand side nonlinearity for coefficients `c` (length `2N + 1`)
    /// into `out`.
    pub fn eval(&mut self, c: &[Complex64], out: &mut [Complex64]) {
        let n = self.n as i64;
        debug_assert_eq!(c.len(), 2 * self.n + 1);
        if self.equation == Equation::Linear {
            out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            return;
        }
        for (idx, (d, &a)) in self.du_coeffs.iter_mut().zip(c).enumerate() {
            let k = idx as i64 - n;
            *d = Complex64::new(0.0, k as f64) * a;
        }
        self.plan.synthesize_with_scratch(c, &mut self.u, &mut self.scratch);
        self.plan
            .synthesize_with_scratch(&self.du_coeffs, &mut self.du, &mut self.scratch);
        for (du, u) in self.du.iter_mut().zip(&self.u) {
            *du *= u.norm_sqr();
        }
        self.plan.analyze_with_scratch(&mut self.du, out, &mut self.scratch);
        let scale = 6.0 * self.sign.value();
        if self.equation == Equation::Mkdv2 {
            let (mut m, mut p) = (0.0, 0.0);
            for (idx, a) in c.iter().enumerate() {
                let w = a.norm_sqr();
                m += w;
                p += (idx as i64 - n) as f64 * w;
            }
            for ((o, d), a) in out.iter_mut().zip(&self.du_coeffs).zip(c) {
                *o -= d * m + Complex64::new(0.0, p) * a;
            }
        }
        for o in out.iter_mut() {
            *o *= scale;
        }
    }
}

/// `±6 Pi_N (|u|^2 u_x - M(u) u_x - i P(u) u)` for mKdV2 (`±6 Pi_N |u|^2 u_x` for
/// mKdV), with `u` replaced by `Pi_N u`. The result lives in a container of size `N`.
pub fn nonlinearity(u: &SpectralField, cfg: &FlowConfig) -> Result<SpectralField> {
    cfg.validate()?;
    let low = u.project_low(cfg.n).resized(cfg.n);
    let mut kernel = NonlinearityKernel::new(cfg.n, cfg.sign, cfg.equation);
    let mut out = vec![Complex64::new(0.0, 0.0); 2 * cfg.n + 1];
    kernel.eval(low.coeffs(), &mut out);
    SpectralField::from_coeffs(cfg.n, out)
}

/// Non-resonant and resonant parts of the renormalized cubic, by explicit triple sums.
///
/// Frequencies follow `n = n1 + n2 + n3` with `n2` the frequency carried by
/// `conj(u)` (`conj(u)^(n2) = conj(c_{-n2})`). The two non-resonant halves share
/// the diagonal `|n2| = |n3|`, reported separately in `diagonal`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearitySplit {
    pub nr_ge: SpectralField,
    pub nr_le: SpectralField,
    pub diagonal: SpectralField,
    pub resonant: SpectralField,
}

impl NonlinearitySplit {
    /// Full non-resonant sum `nr_ge + nr_le - diagonal`.
    pub fn non_resonant(&self) -> SpectralField {
        &(&self.nr_ge + &self.nr_le) - &self.diagonal
    }

    /// `Pi_N (|u|^2 u_x - M u_x - i P u)`, without the `±6` prefactor.
    pub fn recombine(&self) -> SpectralField {
        &self.non_resonant() + &self.resonant
    }
}

/// Direct `O(N^3)` evaluation of the nonlinearity split; capped at [`DIRECT_CAP`].
pub fn nonlinearity_direct(u: &SpectralField, cfg: &FlowConfig) -> Result<NonlinearitySplit> {
    if cfg.n > DIRECT_CAP {
        return Err(Error::CapExceeded {
            requested: cfg.n,
            cap: DIRECT_CAP,
        });
    }
    let n = cfg.n as i64;
    let low = u.project_low(cfg.n).resized(cfg.n);
    let mut nr_ge = SpectralField::zeros(cfg.n);
    let mut nr_le = SpectralField::zeros(cfg.n);
    let mut diagonal = SpectralField::zeros(cfg.n);
    let mut resonant = SpectralField::zeros(cfg.n);
    let conj_hat = |k: i64| low.coeff(-k).conj();
    for n1 in -n..=n {
        let a1 = Complex64::new(0.0, n1 as f64) * low.coeff(n1);
        if a1.norm_sqr() == 0.0 {
            continue;
        }
        for n2 in -n..=n {
            let a12 = a1 * conj_hat(n2);
            for n3 in -n..=n {
                let out = n1 + n2 + n3;
                if out.abs() > n || resonance(n1, n2, n3) == 0 {
                    continue;
                }
                let term = a12 * low.coeff(n3);
                let idx = (out + n) as usize;
                if n2.abs() >= n3.abs() {
                    nr_ge.coeffs_mut()[idx] += term;
                }
                if n2.abs() <= n3.abs() {
                    nr_le.coeffs_mut()[idx] += term;
                }
                if n2.abs() == n3.abs() {
                    diagonal.coeffs_mut()[idx] += term;
                }
            }
        }
    }
    for k in -n..=n {
        let c = low.coeff(k);
        resonant.set(k, Complex64::new(0.0, -(k as f64)) * c.norm_sqr() * c);
    }
    Ok(NonlinearitySplit {
        nr_ge,
        nr_le,
        diagonal,
        resonant,
    })
}

/// `|u|^2 u_x` on `|n| <= N` recovered from the split: adds back `M u_x + i P u`.
pub fn full_cubic_from_split(split: &NonlinearitySplit, u: &SpectralField) -> SpectralField {
    let n = split.resonant.max_freq();
    let low = u.project_low(n).resized(n);
    let (m, p) = (mass(&low), momentum(&low));
    let correction = SpectralField::from_fn(n, |k| {
        Complex64::new(0.0, k as f64 * m + p) * low.coeff(k)
    });
    &split.recombine() + &correction
}
