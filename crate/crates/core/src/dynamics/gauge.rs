use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::energies::{mass, momentum};
use crate::error::{Error, Result};
use crate::spectral_field::{SpectralField, Trajectory};
use crate::Sign;

/// Drift in `M` or `P` beyond which an input is not treated as an mKdV solution.
pub const CONSERVATION_SLACK: f64 = 1e-9;

/// Phase rate `phi` and translation speed `sigma` of the gauge map
/// `v(t, x) = exp(i phi t) u(t, x - sigma t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeRates {
    pub phase_rate: f64,
    pub speed: f64,
}

/// `(phi, sigma) = (∓6 P(u), ±6 M(u))`, which sends truncated mKdV solutions to
/// truncated mKdV2 solutions under the `±6` normalization of both equations.
pub fn gauge_rates(u: &SpectralField, sign: Sign) -> GaugeRates {
    let s = sign.value();
    GaugeRates {
        phase_rate: -6.0 * s * momentum(u),
        speed: 6.0 * s * mass(u),
    }
}

/// Applies the gauge map to a trajectory of the truncated mKdV.
///
/// Coefficient `n` at time `t` is multiplied by `exp(i (phi - n sigma) t)`, with the
/// rates taken from the first state. Rejects trajectories along which `M` or `P`
/// move by more than [`CONSERVATION_SLACK`] (relative to `max(M(0), 1)`).
pub fn gauge_transform(traj: &Trajectory, sign: Sign) -> Result<Trajectory> {
    let first = &traj.states()[0];
    let (m0, p0) = (mass(first), momentum(first));
    let scale = m0.max(1.0);
    for state in traj.states() {
        let dm = (mass(state) - m0).abs();
        if dm > CONSERVATION_SLACK * scale {
            return Err(Error::NotConserved {
                quantity: "mass",
                drift: dm,
            });
        }
        let dp = (momentum(state) - p0).abs();
        if dp > CONSERVATION_SLACK * scale {
            return Err(Error::NotConserved {
                quantity: "momentum",
                drift: dp,
            });
        }
    }
    let rates = gauge_rates(first, sign);
    let t0 = traj.times()[0];
    Ok(traj.map_states(|t, u| {
        let tau = t - t0;
        SpectralField::from_fn(u.max_freq(), |n| {
            u.coeff(n) * Complex64::from_polar(1.0, (rates.phase_rate - n as f64 * rates.speed) * tau)
        })
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve, flow_to_times, nonlinearity, Equation, FlowConfig};

    fn cfg(sign: Sign, equation: Equation) -> FlowConfig {
        FlowConfig {
            n: 8,
            sign,
            equation,
            ..FlowConfig::default()
        }
    }

    #[test]
    fn single_mode_maps_to_mkdv2_closed_form() {
        for sign in [Sign::Defocusing, Sign::Focusing] {
            let (m, c) = (2i64, Complex64::new(0.6, 0.2));
            let u0 = SpectralField::single_mode(8, m, c);
            let times: Vec<f64> = (0..=4).map(|k| 0.25 * k as f64).collect();
            let traj = flow_to_times(&u0, &cfg(sign, Equation::Mkdv), &times).unwrap();
            let v = gauge_transform(&traj, sign).unwrap();
            let rate = (m * m * m) as f64 - 6.0 * sign.value() * m as f64 * c.norm_sqr();
            for (&t, state) in v.times().iter().zip(v.states()) {
                let exact = c * Complex64::from_polar(1.0, rate * t);
                assert!((state.coeff(m) - exact).norm() < 1e-9, "{sign} t={t}");
            }
        }
    }

    #[test]
    fn zero_maps_to_zero() {
        let traj = Trajectory::new(vec![0.0, 1.0], vec![SpectralField::zeros(3); 2]).unwrap();
        let v = gauge_transform(&traj, Sign::Focusing).unwrap();
        assert!(v.states().iter().all(SpectralField::is_zero));
    }

    #[test]
    fn rejects_non_conserving_input() {
        let a = SpectralField::single_mode(3, 1, Complex64::new(1.0, 0.0));
        let b = SpectralField::single_mode(3, 1, Complex64::new(1.1, 0.0));
        let traj = Trajectory::new(vec![0.0, 1.0], vec![a, b]).unwrap();
        assert!(matches!(
            gauge_transform(&traj, Sign::Defocusing),
            Err(Error::NotConserved { .. })
        ));
    }

    #[test]
    fn gauged_mkdv_matches_mkdv2_flow() {
        let u0 = SpectralField::from_fn(8, |k| {
            Complex64::new(0.3 / (1.0 + (k * k) as f64), 0.1 * (k as f64).sin())
        });
        for sign in [Sign::Defocusing, Sign::Focusing] {
            let traj = flow_to_times(&u0, &cfg(sign, Equation::Mkdv), &[0.0, 0.5]).unwrap();
            let v = gauge_transform(&traj, sign).unwrap();
            let direct = evolve(&u0, &cfg(sign, Equation::Mkdv2), 0.5).unwrap();
            assert!(v.last().1.l2_distance(&direct) < 1e-8);

            // residual of the mKdV2 Galerkin equation, five-point stencil in t
            let (t, h) = (0.25, 2e-5);
            let times: Vec<f64> = (-2..=2).map(|k| t + k as f64 * h).collect();
            let mut out = vec![0.0];
            out.extend(&times);
            let traj = flow_to_times(&u0, &cfg(sign, Equation::Mkdv), &out).unwrap();
            let v = gauge_transform(&traj, sign).unwrap();
            let s = &v.states()[1..];
            let dvdt = SpectralField::from_fn(8, |n| {
                (s[0].coeff(n) - 8.0 * s[1].coeff(n) + 8.0 * s[3].coeff(n) - s[4].coeff(n)) / (12.0 * h)
            });
            let rhs = nonlinearity(&s[2], &cfg(sign, Equation::Mkdv2)).unwrap();
            let airy = SpectralField::from_fn(8, |n| Complex64::new(0.0, (n * n * n) as f64) * s[2].coeff(n));
            let residual = &(&dvdt - &rhs) - &airy;
            let res = residual.l2_coeff_norm();
            assert!(res < 1e-6, "{res}");
        }
    }
}
