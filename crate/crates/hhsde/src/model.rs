//! The conditionally linear SDE family and its Hodgkin-Huxley instance.
//!
//! A model couples a voltage equation, linear in `V` for frozen gating
//! state `u`, with gating dynamics that are linear in `U` for frozen
//! voltage `v`:
//!
//! ```text
//! dV = (a(U) V + b(U)) dt + dzeta,
//! dU^l = (alpha_l(V) (1 - U^l) - beta_l(V) U^l) dt,   l = 1..d,
//! ```
//!
//! with `a(u) < 0` on the gating cube and `alpha, beta > 0`. The noise
//! term `dzeta` is selected by [`NoiseVariant`]: multiplicative Brownian
//! `Sigma(U) dW`, an Ornstein-Uhlenbeck process `Z` driven by the same
//! scalar Brownian motion, or zero.
//!
//! All coefficient callables are expected to be C^1; the library cannot
//! verify smoothness of user closures, so this is a caller obligation
//! (constructors only check sign and finiteness by sampling).

use std::fmt;
use std::sync::Arc;

use crate::{Error, Result};

/// Scalar coefficient of the voltage equation, evaluated on the gating state.
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Vector coefficient of the gating equation; fills `out` (length `d`) for a voltage `v`.
pub type VectorFn = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

/// Coefficient functions (a, b, alpha, beta, Sigma) of a conditionally
/// linear model. Carries callables rather than symbolic expressions so
/// user-defined instances beyond Hodgkin-Huxley plug in directly.
#[derive(Clone)]
pub struct CoefficientSet {
    dim: usize,
    a_fn: ScalarFn,
    b_fn: ScalarFn,
    alpha_fn: VectorFn,
    beta_fn: VectorFn,
    sigma_fn: ScalarFn,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet").field("dim", &self.dim).finish()
    }
}

/// Fixed probe voltages used by the heuristic sign/finiteness validation.
const VALIDATION_VOLTAGES: [f64; 7] = [-100.0, -65.0, -20.0, 0.0, 10.0, 55.0, 100.0];

impl CoefficientSet {
    /// Builds a coefficient set and validates the sign structure by
    /// sampling the gating cube and a bracket of voltages: `a < 0` on
    /// the cube, `alpha, beta > 0`, and all values finite. The check is
    /// heuristic (finitely many samples); smoothness is not verified.
    pub fn new(
        dim: usize,
        a_fn: ScalarFn,
        b_fn: ScalarFn,
        alpha_fn: VectorFn,
        beta_fn: VectorFn,
        sigma_fn: ScalarFn,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("gating dimension must be >= 1".into()));
        }
        let set = Self { dim, a_fn, b_fn, alpha_fn, beta_fn, sigma_fn };
        set.validate_by_sampling()?;
        Ok(set)
    }

    /// Constant-coefficient instance (used by frozen-coefficient tests
    /// and the CLI `custom` model).
    pub fn constant(a: f64, b: f64, alpha: Vec<f64>, beta: Vec<f64>, sigma: f64) -> Result<Self> {
        if alpha.len() != beta.len() || alpha.is_empty() {
            return Err(Error::InvalidArgument(
                "alpha and beta must have equal nonzero length".into(),
            ));
        }
        let dim = alpha.len();
        Self::new(
            dim,
            Arc::new(move |_| a),
            Arc::new(move |_| b),
            Arc::new(move |_, out: &mut [f64]| out.copy_from_slice(&alpha)),
            Arc::new(move |_, out: &mut [f64]| out.copy_from_slice(&beta)),
            Arc::new(move |_| sigma),
        )
    }

    /// Replaces the diffusion coefficient Sigma (used by the [BM] variant only).
    pub fn with_sigma(mut self, sigma_fn: ScalarFn) -> Self {
        self.sigma_fn = sigma_fn;
        self
    }

    /// Constant diffusion coefficient (additive noise).
    pub fn with_sigma_const(self, sigma: f64) -> Self {
        self.with_sigma(Arc::new(move |_| sigma))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a(&self, u: &[f64]) -> f64 {
        (self.a_fn)(u)
    }

    pub fn b(&self, u: &[f64]) -> f64 {
        (self.b_fn)(u)
    }

    pub fn sigma(&self, u: &[f64]) -> f64 {
        (self.sigma_fn)(u)
    }

    pub fn alpha_into(&self, v: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        (self.alpha_fn)(v, out);
    }

    pub fn beta_into(&self, v: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        (self.beta_fn)(v, out);
    }

    pub fn alpha(&self, v: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.alpha_into(v, &mut out);
        out
    }

    pub fn beta(&self, v: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.beta_into(v, &mut out);
        out
    }

    fn validate_by_sampling(&self) -> Result<()> {
        let mut u = vec![0.0; self.dim];
        let mut rates = vec![0.0; self.dim];
        // Cube corners up to 2^8, then a deterministic low-discrepancy-ish sweep.
        let n_corners = 1usize << self.dim.min(8);
        for c in 0..n_corners + 16 {
            if c < n_corners {
                for (l, ul) in u.iter_mut().enumerate() {
                    *ul = ((c >> l.min(63)) & 1) as f64;
                }
            } else {
                for (l, ul) in u.iter_mut().enumerate() {
                    *ul = (((c * 37 + l * 13 + 7) % 101) as f64) / 100.0;
                }
            }
            let a = self.a(&u);
            if !(a < 0.0) || !a.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "a(u) must be finite and < 0 on the gating cube; got {a} at u = {u:?}"
                )));
            }
            for (what, val) in [("b", self.b(&u)), ("sigma", self.sigma(&u))] {
                if !val.is_finite() {
                    return Err(Error::NonFinite { what: if what == "b" { "b(u)" } else { "sigma(u)" }, value: val });
                }
            }
        }
        for &v in &VALIDATION_VOLTAGES {
            self.alpha_into(v, &mut rates);
            if rates.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "alpha(v) must be finite and > 0 componentwise; got {rates:?} at v = {v}"
                )));
            }
            self.beta_into(v, &mut rates);
            if rates.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "beta(v) must be finite and > 0 componentwise; got {rates:?} at v = {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Noise entering the voltage equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseVariant {
    /// `dzeta = Sigma(U) dW` with `Sigma` from the [`CoefficientSet`].
    BrownianMultiplicative,
    /// `dzeta = dZ`, `dZ = theta (mu - Z) dt + sigma dW`, with the same
    /// Brownian motion driving both the V- and Z-updates.
    OrnsteinUhlenbeck { theta: f64, mu: f64, sigma: f64 },
    /// No noise; the splitting schemes still apply.
    Deterministic,
}

impl NoiseVariant {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseVariant::BrownianMultiplicative => "brownian",
            NoiseVariant::OrnsteinUhlenbeck { .. } => "ornstein-uhlenbeck",
            NoiseVariant::Deterministic => "deterministic",
        }
    }

    pub fn has_z(&self) -> bool {
        matches!(self, NoiseVariant::OrnsteinUhlenbeck { .. })
    }
}

/// A complete model: coefficient functions plus noise variant.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub coefficients: CoefficientSet,
    pub noise: NoiseVariant,
}

impl ModelSpec {
    pub fn new(coefficients: CoefficientSet, noise: NoiseVariant) -> Result<Self> {
        if let NoiseVariant::OrnsteinUhlenbeck { theta, mu, sigma } = noise {
            if !(theta > 0.0) || !(sigma > 0.0) || !theta.is_finite() || !mu.is_finite() || !sigma.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "OU variant requires finite theta > 0 and sigma > 0 (got theta = {theta}, mu = {mu}, sigma = {sigma})"
                )));
            }
        }
        Ok(Self { coefficients, noise })
    }

    /// Gating dimension d.
    pub fn dim(&self) -> usize {
        self.coefficients.dim()
    }

    pub fn has_z(&self) -> bool {
        self.noise.has_z()
    }

    /// Length of the flat state vector: 1 + d (+1 with OU noise).
    pub fn state_dim(&self) -> usize {
        1 + self.dim() + usize::from(self.has_z())
    }

    pub fn validate_state(&self, x: &State) -> Result<()> {
        if x.u.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.u.len() });
        }
        if x.z.is_some() != self.has_z() {
            return Err(Error::InvalidArgument(format!(
                "state {} a z-component but the noise variant is {}",
                if x.z.is_some() { "carries" } else { "lacks" },
                self.noise.name()
            )));
        }
        Ok(())
    }
}

/// System state: membrane potential `v`, gating vector `u`, and the OU
/// auxiliary `z` (present iff the noise variant is Ornstein-Uhlenbeck).
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub v: f64,
    pub u: Vec<f64>,
    pub z: Option<f64>,
}

impl State {
    pub fn new(v: f64, u: Vec<f64>, z: Option<f64>) -> Self {
        Self { v, u, z }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite()
            && self.u.iter().all(|x| x.is_finite())
            && self.z.map_or(true, |z| z.is_finite())
    }

    /// Flattens to (v, u_1..u_d[, z]).
    pub fn to_flat(&self, out: &mut Vec<f64>) {
        out.clear();
        out.push(self.v);
        out.extend_from_slice(&self.u);
        if let Some(z) = self.z {
            out.push(z);
        }
    }
}

/// Standard Hodgkin-Huxley parameters (d = 3, u = (n, m, h)).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HHParams {
    /// Membrane capacitance C > 0.
    pub c_m: f64,
    /// Potassium / sodium / leak conductances, all > 0.
    pub g_k: f64,
    pub g_na: f64,
    pub g_l: f64,
    /// Reversal potentials.
    pub e_k: f64,
    pub e_na: f64,
    pub e_l: f64,
    /// Input current I.
    pub i_ext: f64,
    /// Resting potential entering the rate functions.
    pub v_rest: f64,
}

impl HHParams {
    /// Every parameter set to 1 (the convergence-study instance).
    pub fn unit() -> Self {
        Self {
            c_m: 1.0,
            g_k: 1.0,
            g_na: 1.0,
            g_l: 1.0,
            e_k: 1.0,
            e_na: 1.0,
            e_l: 1.0,
            i_ext: 1.0,
            v_rest: 1.0,
        }
    }

    /// Spiking parameter set; the capacitance is the experiment knob.
    pub fn spiking(c_m: f64) -> Self {
        Self {
            c_m,
            g_k: 36.0,
            g_na: 120.0,
            g_l: 0.3,
            e_k: -77.0,
            e_na: 55.0,
            e_l: -61.0,
            i_ext: 10.0,
            v_rest: -65.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("c_m", self.c_m), ("g_k", self.g_k), ("g_na", self.g_na), ("g_l", self.g_l)];
        for (name, val) in positive {
            if !(val > 0.0) || !val.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite and > 0, got {val}")));
            }
        }
        for (name, val) in [
            ("e_k", self.e_k),
            ("e_na", self.e_na),
            ("e_l", self.e_l),
            ("i_ext", self.i_ext),
            ("v_rest", self.v_rest),
        ] {
            if !val.is_finite() {
                return Err(Error::NonFinite { what: match name {
                    "e_k" => "e_k",
                    "e_na" => "e_na",
                    "e_l" => "e_l",
                    "i_ext" => "i_ext",
                    _ => "v_rest",
                }, value: val });
            }
        }
        Ok(())
    }
}

/// x / (e^{x/10} - 1) with the removable singularity at x = 0 filled in.
///
/// Evaluated via expm1 to avoid cancellation; for |x/10| < 1e-8 the
/// series 10 (1 - y/2 + y^2/12), y = x/10, is used (the next term is
/// O(y^4), far below double rounding at that threshold).
fn rate_ratio_10(x: f64) -> f64 {
    let y = x / 10.0;
    if y.abs() < 1e-8 {
        10.0 * (1.0 - 0.5 * y + y * y / 12.0)
    } else {
        x / y.exp_m1()
    }
}

fn hh_rates_raw(v: f64, v_rest: f64) -> ([f64; 3], [f64; 3]) {
    let dv = v_rest - v;
    let alpha_n = 0.01 * rate_ratio_10(10.0 + dv);
    let alpha_m = 0.1 * rate_ratio_10(25.0 + dv);
    let alpha_h = 0.07 * (dv / 20.0).exp();
    let beta_n = 0.125 * (dv / 80.0).exp();
    let beta_m = 4.0 * (dv / 18.0).exp();
    let beta_h = 1.0 / (((30.0 + dv) / 10.0).exp() + 1.0);
    ([alpha_n, alpha_m, alpha_h], [beta_n, beta_m, beta_h])
}

/// Hodgkin-Huxley opening/closing rates (alpha_n, alpha_m, alpha_h) and
/// (beta_n, beta_m, beta_h). The removable singularities of alpha_n (at
/// v = v_rest + 10) and alpha_m (at v = v_rest + 25) are evaluated via
/// the analytic limit of x/(e^{x/10} - 1).
pub fn hh_rates(v: f64, v_rest: f64) -> Result<([f64; 3], [f64; 3])> {
    if !v.is_finite() {
        return Err(Error::NonFinite { what: "v", value: v });
    }
    if !v_rest.is_finite() {
        return Err(Error::NonFinite { what: "v_rest", value: v_rest });
    }
    Ok(hh_rates_raw(v, v_rest))
}

/// Hodgkin-Huxley coefficient set (d = 3, u = (n, m, h)):
///
/// ```text
/// a(u) = (-g_K n^4 - g_Na m^3 h - g_L) / C,
/// b(u) = (I + g_K E_K n^4 + g_Na E_Na m^3 h + g_L E_L) / C,
/// ```
///
/// with alpha/beta wrapping [`hh_rates`]. The diffusion coefficient
/// defaults to Sigma = 1; override with
/// [`CoefficientSet::with_sigma_const`] / [`CoefficientSet::with_sigma`].
pub fn hh_coefficients(params: &HHParams) -> Result<CoefficientSet> {
    params.validate()?;
    let p = *params;
    let a_fn: ScalarFn = Arc::new(move |u: &[f64]| {
        let n4 = u[0] * u[0] * u[0] * u[0];
        let m3h = u[1] * u[1] * u[1] * u[2];
        (-p.g_k * n4 - p.g_na * m3h - p.g_l) / p.c_m
    });
    let b_fn: ScalarFn = Arc::new(move |u: &[f64]| {
        let n4 = u[0] * u[0] * u[0] * u[0];
        let m3h = u[1] * u[1] * u[1] * u[2];
        (p.i_ext + p.g_k * p.e_k * n4 + p.g_na * p.e_na * m3h + p.g_l * p.e_l) / p.c_m
    });
    let alpha_fn: VectorFn = Arc::new(move |v: f64, out: &mut [f64]| {
        let (alpha, _) = hh_rates_raw(v, p.v_rest);
        out.copy_from_slice(&alpha);
    });
    let beta_fn: VectorFn = Arc::new(move |v: f64, out: &mut [f64]| {
        let (_, beta) = hh_rates_raw(v, p.v_rest);
        out.copy_from_slice(&beta);
    });
    CoefficientSet::new(3, a_fn, b_fn, alpha_fn, beta_fn, Arc::new(|_| 1.0))
}

/// Drift of the full system in flat state order (V-row, U-rows[, Z-row]):
/// V-row `a(u) v + b(u)` (plus `theta (mu - z)` under OU noise), U-rows
/// `-(alpha(v) + beta(v)) u + alpha(v)`, Z-row `theta (mu - z)`. This is
/// the drift consumed by the Euler-Maruyama family.
pub fn full_drift(spec: &ModelSpec, x: &State) -> Result<Vec<f64>> {
    spec.validate_state(x)?;
    let mut out = vec![0.0; spec.state_dim()];
    drift_into(spec, x.v, &x.u, x.z, &mut out);
    Ok(out)
}

/// Allocation-free drift kernel shared with the EM-family stepper; `out`
/// must have length `spec.state_dim()`. No dimension validation.
pub(crate) fn drift_into(spec: &ModelSpec, v: f64, u: &[f64], z: Option<f64>, out: &mut [f64]) {
    let d = spec.dim();
    let coeffs = &spec.coefficients;
    let (alpha_slot, rest) = out[1..].split_at_mut(d);
    coeffs.alpha_into(v, alpha_slot);
    let mut v_row = coeffs.a(u) * v + coeffs.b(u);
    // U-rows: alpha(v) (1 - u) - beta(v) u, assembled in place.
    let mut beta_buf = [0.0; 8];
    if d <= 8 {
        let beta_slot = &mut beta_buf[..d];
        coeffs.beta_into(v, beta_slot);
        for l in 0..d {
            alpha_slot[l] = alpha_slot[l] * (1.0 - u[l]) - beta_slot[l] * u[l];
        }
    } else {
        let beta = coeffs.beta(v);
        for l in 0..d {
            alpha_slot[l] = alpha_slot[l] * (1.0 - u[l]) - beta[l] * u[l];
        }
    }
    if let NoiseVariant::OrnsteinUhlenbeck { theta, mu, .. } = spec.noise {
        let z = z.unwrap_or(mu);
        let z_row = theta * (mu - z);
        v_row += z_row;
        rest[0] = z_row;
    }
    out[0] = v_row;
}

/// Diffusion column of the full system in flat state order; `out` must
/// have length `spec.state_dim()`. Under BM noise this is (Sigma(u), 0..);
/// under OU noise (sigma, 0.., sigma); zero for the deterministic variant.
pub(crate) fn diffusion_into(spec: &ModelSpec, u: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    match spec.noise {
        NoiseVariant::BrownianMultiplicative => out[0] = spec.coefficients.sigma(u),
        NoiseVariant::OrnsteinUhlenbeck { sigma, .. } => {
            out[0] = sigma;
            let last = out.len() - 1;
            out[last] = sigma;
        }
        NoiseVariant::Deterministic => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn rates_at_rest_match_closed_forms() {
        let v_rest = -65.0;
        let (alpha, beta) = hh_rates(v_rest, v_rest).unwrap();
        // Frozen closed-form values at v = v_rest.
        assert!((alpha[0] - 0.1 / (E - 1.0)).abs() < 1e-15);
        assert!((alpha[0] - 0.058197670686932645).abs() < 1e-15);
        assert!((alpha[1] - 2.5 / (2.5f64.exp() - 1.0)).abs() < 1e-15);
        assert!((alpha[2] - 0.07).abs() < 1e-15);
        assert_eq!(beta[0], 0.125);
        assert_eq!(beta[1], 4.0);
        assert!((beta[2] - 1.0 / (E.powi(3) + 1.0)).abs() < 1e-15);
        assert!((beta[2] - 0.04742587317756678).abs() < 1e-15);
    }

    #[test]
    fn removable_singularities_hit_their_limits() {
        let v_rest = -65.0;
        let (alpha, _) = hh_rates(v_rest + 10.0, v_rest).unwrap();
        assert_eq!(alpha[0], 0.1);
        let (alpha, _) = hh_rates(v_rest + 25.0, v_rest).unwrap();
        assert_eq!(alpha[1], 1.0);
        // Continuity across the singular points.
        for eps in [-1e-6, 1e-6] {
            let (alpha, _) = hh_rates(v_rest + 10.0 + eps, v_rest).unwrap();
            assert!((alpha[0] - 0.1).abs() <= 1e-8, "alpha_n near singularity: {}", alpha[0]);
            let (alpha, _) = hh_rates(v_rest + 25.0 + eps, v_rest).unwrap();
            assert!((alpha[1] - 1.0).abs() <= 1e-7, "alpha_m near singularity: {}", alpha[1]);
        }
    }

    #[test]
    fn rates_positive_over_voltage_sweep() {
        for i in -400..=400 {
            let v = i as f64 / 2.0;
            let (alpha, beta) = hh_rates(v, -65.0).unwrap();
            for (a, b) in alpha.iter().zip(beta.iter()) {
                assert!(*a > 0.0 && a.is_finite(), "alpha at v={v}: {a}");
                assert!(*b > 0.0 && b.is_finite(), "beta at v={v}: {b}");
            }
        }
    }

    #[test]
    fn rates_reject_non_finite_input() {
        assert!(hh_rates(f64::NAN, -65.0).is_err());
        assert!(hh_rates(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn unit_coefficients_at_origin() {
        let coeffs = hh_coefficients(&HHParams::unit()).unwrap();
        let u = [0.0, 0.0, 0.0];
        assert_eq!(coeffs.a(&u), -1.0);
        // Only the leak and input terms survive: b = (I + g_L E_L) / C = 2.
        assert_eq!(coeffs.b(&u), 2.0);
    }

    #[test]
    fn a_bounded_by_leak_term() {
        let p = HHParams::spiking(0.02);
        let coeffs = hh_coefficients(&p).unwrap();
        let bound = -p.g_l / p.c_m;
        for i in 0..64 {
            let u = [
                ((i * 7 + 1) % 13) as f64 / 12.0,
                ((i * 5 + 3) % 11) as f64 / 10.0,
                ((i * 3 + 5) % 9) as f64 / 8.0,
            ];
            assert!(coeffs.a(&u) <= bound, "a(u) = {} above -g_L/C = {bound}", coeffs.a(&u));
        }
    }

    #[test]
    fn spiking_parameters_accepted() {
        for c in [0.2, 0.02, 0.002] {
            let p = HHParams::spiking(c);
            assert!(p.validate().is_ok());
            assert!(hh_coefficients(&p).is_ok());
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = HHParams::unit();
        p.c_m = 0.0;
        assert!(hh_coefficients(&p).is_err());
        let mut p = HHParams::unit();
        p.g_na = -3.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn constant_set_requires_sign_structure() {
        assert!(CoefficientSet::constant(-1.0, 0.0, vec![1.0], vec![1.0], 0.5).is_ok());
        // a >= 0 violates the conditional-linearity contract.
        assert!(CoefficientSet::constant(0.5, 0.0, vec![1.0], vec![1.0], 0.5).is_err());
        assert!(CoefficientSet::constant(-1.0, 0.0, vec![-1.0], vec![1.0], 0.5).is_err());
    }

    #[test]
    fn full_drift_constant_model_hand_value() {
        let coeffs = CoefficientSet::constant(-1.0, 0.0, vec![1.0], vec![1.0], 0.0).unwrap();
        let spec = ModelSpec::new(coeffs, NoiseVariant::BrownianMultiplicative).unwrap();
        let x = State::new(2.0, vec![0.5], None);
        let drift = full_drift(&spec, &x).unwrap();
        // V-row: -1 * 2 + 0 = -2; U-row: 1*(1-0.5) - 1*0.5 = 0.
        assert_eq!(drift, vec![-2.0, 0.0]);
    }

    #[test]
    fn full_drift_ou_z_row_vanishes_at_mu() {
        let coeffs = CoefficientSet::constant(-1.0, 0.0, vec![1.0], vec![1.0], 0.0).unwrap();
        let noise = NoiseVariant::OrnsteinUhlenbeck { theta: 2.0, mu: 0.7, sigma: 1.0 };
        let spec = ModelSpec::new(coeffs, noise).unwrap();
        let x = State::new(1.0, vec![0.5], Some(0.7));
        let drift = full_drift(&spec, &x).unwrap();
        assert_eq!(drift[2], 0.0);
        assert_eq!(drift[0], -1.0); // a v + b + theta (mu - z) = -1 + 0 + 0
    }

    #[test]
    fn full_drift_u_rows_vanish_at_gating_equilibrium() {
        let p = HHParams::spiking(0.02);
        let coeffs = hh_coefficients(&p).unwrap();
        let v = -42.0;
        let (alpha, beta) = hh_rates(v, p.v_rest).unwrap();
        let u_inf: Vec<f64> = alpha.iter().zip(beta.iter()).map(|(a, b)| a / (a + b)).collect();
        let spec = ModelSpec::new(coeffs, NoiseVariant::BrownianMultiplicative).unwrap();
        let x = State::new(v, u_inf, None);
        let drift = full_drift(&spec, &x).unwrap();
        for row in &drift[1..] {
            assert!(row.abs() <= 1e-12, "U-row not stationary: {row}");
        }
    }

    #[test]
    fn full_drift_checks_dimensions() {
        let coeffs = hh_coefficients(&HHParams::unit()).unwrap();
        let spec = ModelSpec::new(coeffs, NoiseVariant::BrownianMultiplicative).unwrap();
        let x = State::new(0.0, vec![0.0; 2], None);
        assert!(matches!(full_drift(&spec, &x), Err(Error::DimensionMismatch { .. })));
        let x = State::new(0.0, vec![0.0; 3], Some(0.0));
        assert!(full_drift(&spec, &x).is_err());
    }

    #[test]
    fn ou_variant_validates_parameters() {
        let coeffs = CoefficientSet::constant(-1.0, 0.0, vec![1.0], vec![1.0], 1.0).unwrap();
        let bad = NoiseVariant::OrnsteinUhlenbeck { theta: 0.0, mu: 0.0, sigma: 1.0 };
        assert!(ModelSpec::new(coeffs.clone(), bad).is_err());
        let bad = NoiseVariant::OrnsteinUhlenbeck { theta: 1.0, mu: 0.0, sigma: -1.0 };
        assert!(ModelSpec::new(coeffs, bad).is_err());
    }

    #[test]
    fn state_finiteness_flags() {
        assert!(State::new(1.0, vec![0.5, 0.2], None).is_finite());
        assert!(!State::new(f64::NAN, vec![0.5], None).is_finite());
        assert!(!State::new(0.0, vec![f64::INFINITY], None).is_finite());
        assert!(!State::new(0.0, vec![0.1], Some(f64::NAN)).is_finite());
    }
}
