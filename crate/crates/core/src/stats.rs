//! Small statistics toolkit: means, jackknife, weighted regression, trend tests.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            stderr: 0.0,
            samples: 0,
        }
    }

    /// `|self - other| <= k * sqrt(se_1^2 + se_2^2)`.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        (self.value - other.value).abs() <= k * self.stderr.hypot(other.stderr)
    }

    /// `|self - value| <= k * se`.
    pub fn consistent_with(&self, value: f64, k: f64) -> bool {
        (self.value - value).abs() <= k * self.stderr
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> Estimate {
    let n = xs.len();
    if n == 0 {
        return Estimate {
            value: f64::NAN,
            stderr: f64::NAN,
            samples: 0,
        };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        f64::INFINITY
    };
    Estimate {
        value: mean,
        stderr,
        samples: n,
    }
}

/// Binomial proportion `hits / n` with standard error `sqrt(p (1 - p) / n)`.
pub fn proportion(hits: usize, n: usize) -> Estimate {
    let p = hits as f64 / n as f64;
    Estimate {
        value: p,
        stderr: (p * (1.0 - p) / n as f64).sqrt(),
        samples: n,
    }
}

/// Root mean square `sqrt(mean(x^2))` with a leave-one-out jackknife error.
pub fn rms_jackknife(xs: &[f64]) -> Estimate {
    let n = xs.len();
    let total: f64 = xs.iter().map(|x| x * x).sum();
    let value = (total / n as f64).sqrt();
    if n < 2 {
        return Estimate {
            value,
            stderr: f64::INFINITY,
            samples: n,
        };
    }
    let loo: Vec<f64> = xs
        .iter()
        .map(|x| ((total - x * x).max(0.0) / (n - 1) as f64).sqrt())
        .collect();
    let mean_loo = loo.iter().sum::<f64>() / n as f64;
    let var = loo.iter().map(|v| (v - mean_loo).powi(2)).sum::<f64>() * (n - 1) as f64 / n as f64;
    Estimate {
        value,
        stderr: var.sqrt(),
        samples: n,
    }
}

/// Self-normalized importance estimate `sum w f / sum w` with delta-method error.
pub fn self_normalized(weights: &[f64], values: &[f64]) -> Result<Estimate> {
    let sw: f64 = weights.iter().sum();
    if !(sw > 0.0) {
        return Err(Error::DegenerateWeights {
            samples: weights.len(),
        });
    }
    let est = weights.iter().zip(values).map(|(w, f)| w * f).sum::<f64>() / sw;
    let var = weights
        .iter()
        .zip(values)
        .map(|(w, f)| (w * (f - est)).powi(2))
        .sum::<f64>()
        / (sw * sw);
    Ok(Estimate {
        value: est,
        stderr: var.sqrt(),
        samples: weights.len(),
    })
}

/// Ratio of means `sum a / sum b` of paired samples with delta-method error.
pub fn ratio_of_means(num: &[f64], den: &[f64]) -> Result<Estimate> {
    let n = num.len() as f64;
    let (ma, mb) = (num.iter().sum::<f64>() / n, den.iter().sum::<f64>() / n);
    if !(mb > 0.0) {
        return Err(Error::DegenerateWeights { samples: num.len() });
    }
    let r = ma / mb;
    let var = num
        .iter()
        .zip(den)
        .map(|(a, b)| (a - r * b).powi(2))
        .sum::<f64>()
        / (n * (n - 1.0).max(1.0) * mb * mb);
    Ok(Estimate {
        value: r,
        stderr: var.sqrt(),
        samples: num.len(),
    })
}

/// Weighted least-squares line fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    /// 95% normal interval for the slope.
    pub slope_ci: (f64, f64),
}

/// Fits `y = a + b x` with weights `1 / sigma^2`; `sigma = None` means unit weights
/// with the residual variance used for the slope error.
pub fn linear_fit(x: &[f64], y: &[f64], sigma: Option<&[f64]>) -> Result<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::InvalidArgument("need at least two paired points".into()));
    }
    let w: Vec<f64> = match sigma {
        Some(s) => s.iter().map(|s| 1.0 / (s * s).max(f64::MIN_POSITIVE)).collect(),
        None => vec![1.0; n],
    };
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let my = w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidArgument("abscissae are all equal".into()));
    }
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if sigma.is_some() {
        (1.0 / sxx).sqrt()
    } else if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_se,
        slope_ci: (slope - 1.96 * slope_se, slope + 1.96 * slope_se),
    })
}

/// Outcome of a Mann–Kendall trend test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannKendall {
    /// `sum_{i<j} sign(x_j - x_i)`.
    pub s: i64,
    /// One-sided p-value for a decreasing trend.
    pub p_decreasing: f64,
    /// One-sided p-value for an increasing trend.
    pub p_increasing: f64,
    /// Whether the p-values come from the exact permutation distribution.
    pub exact: bool,
}

fn kendall_s(xs: &[f64]) -> i64 {
    let mut s = 0;
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            s += match xs[j].partial_cmp(&xs[i]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    s
}

fn permutations(n: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(k: usize, perm: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if k == perm.len() {
            f(perm);
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            rec(k + 1, perm, f);
            perm.swap(k, i);
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    rec(0, &mut perm, f);
}

/// Mann–Kendall test; exact permutation distribution for up to 8 points (ties
/// broken as in the data), normal approximation with continuity correction beyond.
pub fn mann_kendall(xs: &[f64]) -> MannKendall {
    let n = xs.len();
    let s = kendall_s(xs);
    if n <= 8 {
        let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
        let mut buf = vec![0.0; n];
        permutations(n, &mut |perm| {
            for (b, &p) in buf.iter_mut().zip(perm) {
                *b = xs[p];
            }
            let sp = kendall_s(&buf);
            total += 1;
            if sp <= s {
                le += 1;
            }
            if sp >= s {
                ge += 1;
            }
        });
        return MannKendall {
            s,
            p_decreasing: le as f64 / total as f64,
            p_increasing: ge as f64 / total as f64,
            exact: true,
        };
    }
    let nf = n as f64;
    let var = nf * (nf - 1.0) * (2.0 * nf + 5.0) / 18.0;
    let z = |shift: f64| (s as f64 + shift) / var.sqrt();
    MannKendall {
        s,
        p_decreasing: normal_cdf(z(1.0)),
        p_increasing: normal_cdf(-z(-1.0)),
        exact: false,
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_proportion() {
        let e = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.value, 2.5);
        assert!((e.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        let p = proportion(25, 100);
        assert!((p.stderr - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn jackknife_of_constant_has_zero_error() {
        let e = rms_jackknife(&[2.0; 10]);
        assert!((e.value - 2.0).abs() < 1e-15 && e.stderr < 1e-12);
        assert_eq!(rms_jackknife(&[0.0; 5]).value, 0.0);
    }

    #[test]
    fn jackknife_matches_delta_method_for_large_samples() {
        let xs: Vec<f64> = (0..2000).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
        let e = rms_jackknife(&xs);
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let m = mean_se(&sq);
        let delta = m.stderr / (2.0 * m.value.sqrt());
        assert!((e.stderr / delta - 1.0).abs() < 0.01);
    }

    #[test]
    fn self_normalized_identities() {
        let w = [0.5, 1.0, 0.0, 2.0];
        let one = self_normalized(&w, &[1.0; 4]).unwrap();
        assert_eq!(one.value, 1.0);
        assert_eq!(one.stderr, 0.0);
        assert!(self_normalized(&[0.0; 3], &[1.0; 3]).is_err());
    }

    #[test]
    fn exact_line_is_recovered() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|x| 3.0 - 0.5 * x).collect();
        let fit = linear_fit(&x, &y, None).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-14 && (fit.intercept - 3.0).abs() < 1e-14);
        let fit = linear_fit(&x, &y, Some(&[0.1, 0.2, 0.1, 0.3])).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-14);
        assert!(fit.slope_ci.0 < fit.slope && fit.slope < fit.slope_ci.1);
    }

    #[test]
    fn mann_kendall_exact_tails() {
        let mk = mann_kendall(&[4.0, 3.0, 2.0, 1.0]);
        assert_eq!(mk.s, -6);
        assert!((mk.p_decreasing - 1.0 / 24.0).abs() < 1e-15);
        assert!(mk.exact);
        let mk = mann_kendall(&[3.0, 2.0, 1.0]);
        assert!((mk.p_decreasing - 1.0 / 6.0).abs() < 1e-15);
        let long: Vec<f64> = (0..20).map(|i| -(i as f64)).collect();
        let mk = mann_kendall(&long);
        assert!(!mk.exact && mk.p_decreasing < 1e-6);
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.959_964) - 0.975).abs() < 1e-6);
        assert!((normal_cdf(-1.644_854) - 0.05).abs() < 1e-6);
    }
}
