//! FFT bridge between Fourier coefficients and uniform torus grids.
//!
//! Conventions: `u(x_m) = sum_n c_n exp(i n x_m)` with `x_m = 2 pi m / M`, and
//! `c_n = (1/M) sum_m u(x_m) exp(-i n x_m)`. Coefficient `n` lives in bin
//! `n mod M` of the grid spectrum.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANS: RefCell<PlanCache> = RefCell::new(PlanCache::default());
}

struct PlanCache {
    planner: FftPlanner<f64>,
    forward: HashMap<usize, Arc<dyn Fft<f64>>>,
    inverse: HashMap<usize, Arc<dyn Fft<f64>>>,
}

impl Default for PlanCache {
    fn default() -> Self {
        PlanCache {
            planner: FftPlanner::new(),
            forward: HashMap::new(),
            inverse: HashMap::new(),
        }
    }
}

/// Forward and inverse plans for one grid size.
#[derive(Clone)]
pub struct GridPlan {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GridPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridPlan").field("len", &self.len).finish()
    }
}

impl GridPlan {
    pub fn new(len: usize) -> Self {
        PLANS.with(|cache| {
            let mut cache = cache.borrow_mut();
            let PlanCache {
                planner,
                forward,
                inverse,
            } = &mut *cache;
            let fwd = forward
                .entry(len)
                .or_insert_with(|| planner.plan_fft_forward(len))
                .clone();
            let inv = inverse
                .entry(len)
                .or_insert_with(|| planner.plan_fft_inverse(len))
                .clone();
            GridPlan {
                len,
                forward: fwd,
                inverse: inv,
            }
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized forward DFT `X_j = sum_m x_m exp(-2 pi i j m / M)`, in place.
    pub fn forward_raw(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Unnormalized inverse DFT, in place.
    pub fn inverse_raw(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }

    /// Scatter band-limited coefficients (index `k + n_max` holds `c_k`) into
    /// `grid` and synthesize physical samples in place.
    pub fn synthesize(&self, coeffs: &[Complex64], grid: &mut [Complex64]) {
        debug_assert_eq!(grid.len(), self.len);
        scatter(coeffs, grid);
        self.inverse.process(grid);
    }

    /// Scratch length needed by the `*_with_scratch` methods.
    pub fn scratch_len(&self) -> usize {
        self.forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len())
    }

    /// [`GridPlan::synthesize`] without internal allocation.
    pub fn synthesize_with_scratch(
        &self,
        coeffs: &[Complex64],
        grid: &mut [Complex64],
        scratch: &mut [Complex64],
    ) {
        scatter(coeffs, grid);
        self.inverse.process_with_scratch(grid, scratch);
    }

    /// [`GridPlan::analyze`] without internal allocation.
    pub fn analyze_with_scratch(
        &self,
        grid: &mut [Complex64],
        out: &mut [Complex64],
        scratch: &mut [Complex64],
    ) {
        self.forward.process_with_scratch(grid, scratch);
        gather(grid, out);
    }

    /// Analyze physical samples in place and gather `|k| <= n_max` into `out`
    /// (length `2 n_max + 1`), normalized by `1/M`.
    pub fn analyze(&self, grid: &mut [Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(grid.len(), self.len);
        self.forward.process(grid);
        gather(grid, out);
    }
}

fn scatter(coeffs: &[Complex64], grid: &mut [Complex64]) {
    let m = grid.len();
    let n_max = coeffs.len() / 2;
    debug_assert!(m > 2 * n_max);
    grid.fill(Complex64::new(0.0, 0.0));
    grid[..=n_max].copy_from_slice(&coeffs[n_max..]);
    grid[m - n_max..].copy_from_slice(&coeffs[..n_max]);
}

fn gather(spectrum: &[Complex64], out: &mut [Complex64]) {
    let m = spectrum.len();
    let n_max = out.len() / 2;
    debug_assert!(m > 2 * n_max);
    let scale = 1.0 / m as f64;
    for (o, s) in out[n_max..].iter_mut().zip(&spectrum[..=n_max]) {
        *o = s * scale;
    }
    for (o, s) in out[..n_max].iter_mut().zip(&spectrum[m - n_max..]) {
        *o = s * scale;
    }
}

/// Smallest `2^a 3^b 5^c` that is `>= min`.
pub fn efficient_size(min: usize) -> usize {
    let mut n = min.max(1);
    loop {
        let mut r = n;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return n;
        }
        n += 1;
    }
}

/// Grid size on which products of `degree` band-`n` factors are integrated exactly.
pub fn quadrature_grid(n: usize, degree: usize) -> usize {
    efficient_size(degree * n + 1)
}

/// Grid size on which a degree-`degree` product of band-`n` factors can be
/// projected back to `|k| <= n` without aliasing.
pub fn dealiased_grid(n: usize, degree: usize) -> usize {
    efficient_size((degree + 1) * n + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn efficient_sizes() {
        assert_eq!(efficient_size(1), 1);
        assert_eq!(efficient_size(7), 8);
        assert_eq!(efficient_size(97), 100);
        assert_eq!(efficient_size(129), 135);
        assert_eq!(quadrature_grid(16, 6), 100);
    }

    #[test]
    fn round_trip_is_identity() {
        let coeffs: Vec<Complex64> = (0..9)
            .map(|i| Complex64::new(i as f64 * 0.3 - 1.0, 0.7 - i as f64 * 0.1))
            .collect();
        let plan = GridPlan::new(20);
        let mut grid = vec![Complex64::default(); 20];
        plan.synthesize(&coeffs, &mut grid);
        let mut back = vec![Complex64::default(); 9];
        plan.analyze(&mut grid, &mut back);
        for (a, b) in coeffs.iter().zip(&back) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}
