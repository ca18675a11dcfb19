//! Exact flows of the split subsystems.
//!
//! Both subsystems of the conditionally linear model are exactly
//! solvable once the other block is frozen:
//!
//! * the voltage (and the OU auxiliary) solve a scalar linear SDE
//!   `dY = (a Y + c) dt + s dW`, whose one-step law is
//!
//!   ```text
//!   Y_{t+dt} = e^{a dt} Y_t + (c/a)(e^{a dt} - 1) + nu(dt) xi,
//!   nu^2(dt) = (s^2 / 2a)(e^{2 a dt} - 1),     xi ~ N(0,1),
//!   ```
//!
//!   with the a -> 0 limits `c dt` and `s^2 dt` ([`linear_transition`]);
//!
//! * the gating variables follow the linear ODE with frozen voltage,
//!   whose flow is the convex combination ([`psi_d`])
//!
//!   ```text
//!   psi_D(dt; v, u) = e^{-(alpha+beta) dt} ∘ u
//!                   + (1 - e^{-(alpha+beta) dt}) ∘ U_inf(v),
//!   U_inf_l(v) = alpha_l(v) / (alpha_l(v) + beta_l(v)),
//!   ```
//!
//!   so `u` in `[0,1]^d` stays in `[0,1]^d` structurally.
//!
//! One parametrization covers all three stochastic sub-flows used by the
//! schemes: the Brownian voltage flow (a = a(u), c = b(u), s = Sigma(u)),
//! the OU-driven voltage flow (c = b(u) + theta (mu - z), s = sigma), and
//! the OU auxiliary flow (a = -theta, c = theta mu, s = sigma).

use crate::model::CoefficientSet;
use crate::{Error, Result};

/// Exact one-step law of the scalar linear SDE `dY = (aY + c)dt + s dW`:
/// `Y' = mean_mult * Y + mean_add + stdev * xi` with `xi ~ N(0,1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearTransition {
    /// e^{a dt}
    pub mean_mult: f64,
    /// (c/a)(e^{a dt} - 1), with the a -> 0 limit c dt.
    pub mean_add: f64,
    /// nu(dt) >= 0, with nu^2 = (s^2/2a)(e^{2 a dt} - 1) and limit s^2 dt.
    pub stdev: f64,
}

impl LinearTransition {
    /// Applies the transition to a start value and a standardized draw.
    pub fn apply(&self, y0: f64, xi: f64) -> f64 {
        self.mean_mult * y0 + self.mean_add + self.stdev * xi
    }

    /// One-step variance nu^2(dt).
    pub fn variance(&self) -> f64 {
        self.stdev * self.stdev
    }
}

/// Crossover below which the a -> 0 series limit is used; at this scale
/// the omitted terms are O(1e-10) relative, below the 1e-12 composition
/// tolerances only when the limit form is exact, which it is at a = 0.
const A_DT_CROSSOVER: f64 = 1e-10;

/// Exact transition parameters of `dY = (a_val Y + c_val) dt + s_val dW`
/// over a step of length `dt`. `s_val` must be >= 0 and `dt >= 0`.
pub fn linear_transition(a_val: f64, c_val: f64, s_val: f64, dt: f64) -> Result<LinearTransition> {
    for (what, value) in [("a_val", a_val), ("c_val", c_val), ("s_val", s_val), ("dt", dt)] {
        if !value.is_finite() {
            return Err(Error::NonFinite { what, value });
        }
    }
    if dt < 0.0 {
        return Err(Error::InvalidArgument(format!("dt must be >= 0, got {dt}")));
    }
    if s_val < 0.0 {
        return Err(Error::InvalidArgument(format!("s_val must be >= 0, got {s_val}")));
    }
    let x = a_val * dt;
    let (mean_add, variance) = if x.abs() < A_DT_CROSSOVER {
        (c_val * dt, s_val * s_val * dt)
    } else {
        (
            c_val * x.exp_m1() / a_val,
            s_val * s_val * (2.0 * x).exp_m1() / (2.0 * a_val),
        )
    };
    Ok(LinearTransition {
        mean_mult: x.exp(),
        mean_add,
        stdev: variance.max(0.0).sqrt(),
    })
}

/// Gating steady state `U_inf(v)`, componentwise `alpha / (alpha + beta)`,
/// each strictly inside (0, 1).
pub fn u_infinity(v: f64, coeffs: &CoefficientSet) -> Vec<f64> {
    let alpha = coeffs.alpha(v);
    let beta = coeffs.beta(v);
    alpha
        .iter()
        .zip(beta.iter())
        .map(|(a, b)| a / (a + b))
        .collect()
}

/// Exact gating flow over `dt` with frozen voltage `v`.
pub fn psi_d(dt: f64, v: f64, u: &[f64], coeffs: &CoefficientSet) -> Vec<f64> {
    let d = coeffs.dim();
    debug_assert_eq!(u.len(), d);
    let mut alpha = vec![0.0; d];
    let mut beta = vec![0.0; d];
    let mut out = vec![0.0; d];
    psi_d_into(dt, v, u, coeffs, &mut alpha, &mut beta, &mut out);
    out
}

/// Allocation-free kernel of [`psi_d`]; all slices have length `d` and
/// `out` must not alias `u`.
pub(crate) fn psi_d_into(
    dt: f64,
    v: f64,
    u: &[f64],
    coeffs: &CoefficientSet,
    alpha_buf: &mut [f64],
    beta_buf: &mut [f64],
    out: &mut [f64],
) {
    coeffs.alpha_into(v, alpha_buf);
    coeffs.beta_into(v, beta_buf);
    for l in 0..u.len() {
        let rate = alpha_buf[l] + beta_buf[l];
        let decay = (-rate * dt).exp();
        let u_inf = alpha_buf[l] / rate;
        out[l] = decay * u[l] + (1.0 - decay) * u_inf;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{hh_coefficients, CoefficientSet, HHParams};
    use proptest::prelude::*;

    #[test]
    fn long_time_limit_is_stationary_value() {
        let t = linear_transition(-1.0, 3.0, 0.0, 1e3).unwrap();
        assert!(t.mean_mult.abs() < 1e-300);
        assert!((t.mean_add - 3.0).abs() < 1e-12);
        assert_eq!(t.stdev, 0.0);
    }

    #[test]
    fn zero_dt_is_identity() {
        let t = linear_transition(-1.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(t.mean_mult, 1.0);
        assert_eq!(t.mean_add, 0.0);
        assert_eq!(t.stdev, 0.0);
        assert_eq!(t.apply(1.7, 123.0), 1.7);
    }

    #[test]
    fn variance_matches_closed_form_at_half() {
        // (1 - e^{-1})/2, frozen.
        let t = linear_transition(-1.0, 0.0, 1.0, 0.5).unwrap();
        assert!((t.variance() - 0.31606027941427884).abs() < 1e-15);
        assert!((t.variance() - (1.0 - (-1.0f64).exp()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn near_zero_a_uses_series_limit_continuously() {
        let dt = 0.3;
        let tiny = linear_transition(-1e-12, 2.0, 1.5, dt).unwrap();
        assert_eq!(tiny.mean_add, 2.0 * dt);
        assert_eq!(tiny.variance(), 1.5 * 1.5 * dt);
        let small = linear_transition(-1e-8, 2.0, 1.5, dt).unwrap();
        assert!((small.mean_add - tiny.mean_add).abs() < 1e-8);
        assert!((small.variance() - tiny.variance()).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(linear_transition(-1.0, 0.0, 1.0, -0.1).is_err());
        assert!(linear_transition(-1.0, 0.0, -1.0, 0.1).is_err());
        assert!(linear_transition(f64::NAN, 0.0, 1.0, 0.1).is_err());
        assert!(linear_transition(-1.0, f64::INFINITY, 1.0, 0.1).is_err());
    }

    #[test]
    fn psi_d_identity_at_zero_dt() {
        let coeffs = hh_coefficients(&HHParams::spiking(0.02)).unwrap();
        let u = vec![0.3, 0.7, 0.1];
        assert_eq!(psi_d(0.0, -40.0, &u, &coeffs), u);
    }

    #[test]
    fn psi_d_long_time_reaches_steady_state() {
        let coeffs = CoefficientSet::constant(-1.0, 0.0, vec![1.0, 1.0], vec![1.0, 1.0], 0.0).unwrap();
        let out = psi_d(1e3, 0.0, &[0.9, 0.05], &coeffs);
        for x in out {
            assert!((x - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn psi_d_closed_form_point() {
        // d=1, alpha = beta = 1, u = 0, dt = ln2 / 2:
        // e^{-ln2} * 0 + (1 - 1/2) * 1/2 = 1/4.
        let coeffs = CoefficientSet::constant(-1.0, 0.0, vec![1.0], vec![1.0], 0.0).unwrap();
        let out = psi_d(std::f64::consts::LN_2 / 2.0, 0.0, &[0.0], &coeffs);
        assert!((out[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn u_infinity_hh_rest_values() {
        let p = HHParams::spiking(0.02);
        let coeffs = hh_coefficients(&p).unwrap();
        let u_inf = u_infinity(p.v_rest, &coeffs);
        assert!((u_inf[0] - 0.31768).abs() < 5e-6);
        for x in &u_inf {
            assert!(*x > 0.0 && *x < 1.0);
        }
        // Symmetric rates give 1/2 in every component.
        let sym = CoefficientSet::constant(-1.0, 0.0, vec![2.0, 2.0], vec![2.0, 2.0], 0.0).unwrap();
        assert_eq!(u_infinity(7.0, &sym), vec![0.5, 0.5]);
    }

    #[test]
    fn half_step_composition_reproduces_full_step() {
        let (a, c, s, dt) = (-1.3, 0.7, 0.9, 0.4);
        let full = linear_transition(a, c, s, dt).unwrap();
        let half = linear_transition(a, c, s, dt / 2.0).unwrap();
        // Mean: y -> m(m y + d) + d = m^2 y + d(m + 1).
        assert!((half.mean_mult * half.mean_mult - full.mean_mult).abs() < 1e-12);
        assert!((half.mean_add * (half.mean_mult + 1.0) - full.mean_add).abs() < 1e-12);
        // Variance: first half propagated through the second plus the second.
        let composed = half.mean_mult * half.mean_mult * half.variance() + half.variance();
        assert!((composed - full.variance()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn small_dt_variance_expansion(a in -5.0..-1e-3f64, s in 0.1..3.0f64, dt in 1e-6..0.1f64) {
            let t = linear_transition(a, 0.0, s, dt).unwrap();
            let rel = (t.variance() / (s * s * dt) - 1.0).abs();
            prop_assert!(rel <= a.abs() * dt * (1.0 + 1e-9));
        }

        #[test]
        fn mean_recursion_over_random_parameters(
            a in -4.0..-0.01f64,
            c in -3.0..3.0f64,
            s in 0.0..2.0f64,
            dt in 1e-4..1.0f64,
        ) {
            let full = linear_transition(a, c, s, dt).unwrap();
            let half = linear_transition(a, c, s, dt / 2.0).unwrap();
            prop_assert!((half.mean_mult * half.mean_mult - full.mean_mult).abs() < 1e-12);
            prop_assert!((half.mean_add * (half.mean_mult + 1.0) - full.mean_add).abs() < 1e-12);
            let var2 = half.mean_mult * half.mean_mult * half.variance() + half.variance();
            prop_assert!((var2 - full.variance()).abs() < 1e-12);
        }

        #[test]
        fn psi_d_semigroup(
            v in -120.0..60.0f64,
            u0 in 0.0..1.0f64, u1 in 0.0..1.0f64, u2 in 0.0..1.0f64,
            s in 0.0..0.5f64,
            t in 0.0..0.5f64,
        ) {
            let coeffs = hh_coefficients(&HHParams::spiking(0.02)).unwrap();
            let u = [u0, u1, u2];
            let direct = psi_d(s + t, v, &u, &coeffs);
            let stage = psi_d(s, v, &u, &coeffs);
            let composed = psi_d(t, v, &stage, &coeffs);
            for (a, b) in direct.iter().zip(composed.iter()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn psi_d_preserves_unit_cube(
            v in -200.0..200.0f64,
            u0 in 0.0..1.0f64, u1 in 0.0..1.0f64, u2 in 0.0..1.0f64,
            dt in 0.0..10.0f64,
        ) {
            let coeffs = hh_coefficients(&HHParams::spiking(0.02)).unwrap();
            let out = psi_d(dt, v, &[u0, u1, u2], &coeffs);
            for x in out {
                prop_assert!(x >= -1e-12 && x <= 1.0 + 1e-12);
            }
        }
    }
}
