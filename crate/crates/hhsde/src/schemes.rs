//! One-step maps and path simulation.
//!
//! Splitting schemes compose the exact sub-flows of [`crate::flows`]:
//!
//! ```text
//! LT1:    U' = psi_D(dt; v, u);            V' = psi_lin(dt; v, U')
//! LT2:    V' = psi_lin(dt; v, u);          U' = psi_D(dt; V', u)
//! Strang: Uh = psi_D(dt/2; v, u);          V' = psi_lin(dt; v, Uh);
//!         U' = psi_D(dt/2; V', Uh)
//! ```
//!
//! Under OU noise the auxiliary `Z` gets its own exact flow: LT1 updates
//! `Z` first and lets `V'` consume the new `Z'`; LT2 propagates `V` with
//! the pre-step `z`; Strang wraps the `V`-update between two `Z` half
//! steps driven by the half-window increments, while `V` consumes the
//! full-window increment. Within a step the same Brownian window drives
//! both the `V`- and `Z`-updates.
//!
//! The Euler-Maruyama family (`EM`, tamed `TEM`, fully tamed `DTEM`,
//! truncated `TrEM`, fully truncated `DTrEM`) applies the stated
//! increment to the flat state; it never clamps the gating variables, so
//! `U` may escape `[0,1]^d` (that escape is one of the studies).

use std::fmt;
use std::str::FromStr;

use crate::flows::{linear_transition, psi_d_into, LinearTransition};
use crate::model::{diffusion_into, drift_into, ModelSpec, NoiseVariant, State};
use crate::noise::{grid_ratio, increment_at, ito_sum, xi_at, Half, PathNoise};
use crate::{Error, Result};

/// The eight schemes exposed by the library and the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Lt1,
    Lt2,
    Strang,
    Em,
    Tem,
    Dtem,
    Trem,
    Dtrem,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 8] = [
        SchemeKind::Lt1,
        SchemeKind::Lt2,
        SchemeKind::Strang,
        SchemeKind::Em,
        SchemeKind::Tem,
        SchemeKind::Dtem,
        SchemeKind::Trem,
        SchemeKind::Dtrem,
    ];

    pub fn is_splitting(&self) -> bool {
        matches!(self, SchemeKind::Lt1 | SchemeKind::Lt2 | SchemeKind::Strang)
    }

    /// Stable lowercase CLI name.
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Lt1 => "lt1",
            SchemeKind::Lt2 => "lt2",
            SchemeKind::Strang => "strang",
            SchemeKind::Em => "em",
            SchemeKind::Tem => "tem",
            SchemeKind::Dtem => "dtem",
            SchemeKind::Trem => "trem",
            SchemeKind::Dtrem => "dtrem",
        }
    }

    /// Splittings run under every noise variant; the EM family needs a
    /// stochastic variant (its formulas are defined for the full SDE).
    pub fn supports(&self, noise: &NoiseVariant) -> bool {
        self.is_splitting() || !matches!(noise, NoiseVariant::Deterministic)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!(
                "unknown scheme '{s}' (expected one of lt1, lt2, strang, em, tem, dtem, trem, dtrem)"
            )))
    }
}

/// How a splitting scheme realizes the Gaussian integral of its exact
/// voltage flow from the underlying Brownian path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StochasticTerm {
    /// `nu(dt) * xi` with `xi` the standardized window increment: the
    /// variance-exact sampling used for path simulation and the RMSE
    /// studies.
    ScaledIncrement,
    /// Left-endpoint Riemann-Ito aggregation of the integral over the
    /// base grid: realizes the scheme's continuous-time extension on the
    /// shared fine path, used by the one-step consistency study where
    /// the `ScaledIncrement` coupling noise would mask orders above 3/2.
    FineIntegral,
}

/// Read-only view of one step's Brownian window.
#[derive(Clone, Copy)]
pub struct NoiseView<'a> {
    path: &'a PathNoise,
    step_index: usize,
    dt: f64,
    term: StochasticTerm,
}

impl<'a> NoiseView<'a> {
    pub fn new(path: &'a PathNoise, step_index: usize, dt: f64, term: StochasticTerm) -> Self {
        Self { path, step_index, dt, term }
    }

    /// Standardized increment over the window (0 for a zero-length step).
    pub fn xi(&self, half: Half) -> Result<f64> {
        if self.dt == 0.0 {
            return Ok(0.0);
        }
        xi_at(self.path, self.step_index, self.dt, half)
    }

    /// Raw Brownian increment over the full step.
    pub fn increment(&self) -> Result<f64> {
        if self.dt == 0.0 {
            return Ok(0.0);
        }
        increment_at(self.path, self.step_index, self.dt, Half::Full)
    }

    /// Stochastic summand of a linear flow with rate `a` and diffusion
    /// `s` over the selected window; `stdev` is the matching transition
    /// standard deviation (used by the `ScaledIncrement` realization).
    fn stochastic(&self, stdev: f64, a: f64, s: f64, half: Half) -> Result<f64> {
        if self.dt == 0.0 || s == 0.0 {
            return Ok(0.0);
        }
        match self.term {
            StochasticTerm::ScaledIncrement => Ok(stdev * self.xi(half)?),
            StochasticTerm::FineIntegral => {
                Ok(s * ito_sum(self.path, self.step_index, self.dt, half, a)?)
            }
        }
    }
}

/// Everything a one-step map needs: the model, the step size, and the
/// Brownian window.
pub struct StepContext<'a> {
    pub spec: &'a ModelSpec,
    pub dt: f64,
    noise: NoiseView<'a>,
}

impl<'a> StepContext<'a> {
    /// Context with the default `ScaledIncrement` realization.
    pub fn new(spec: &'a ModelSpec, dt: f64, path: &'a PathNoise, step_index: usize) -> Result<Self> {
        Self::with_term(spec, dt, path, step_index, StochasticTerm::ScaledIncrement)
    }

    pub fn with_term(
        spec: &'a ModelSpec,
        dt: f64,
        path: &'a PathNoise,
        step_index: usize,
        term: StochasticTerm,
    ) -> Result<Self> {
        if !dt.is_finite() || dt < 0.0 {
            return Err(Error::InvalidArgument(format!("dt must be finite and >= 0, got {dt}")));
        }
        if dt > 0.0 && !matches!(spec.noise, NoiseVariant::Deterministic) {
            grid_ratio(dt, path.base_dt)?;
        }
        Ok(Self { spec, dt, noise: NoiseView::new(path, step_index, dt, term) })
    }
}

/// Reusable per-thread buffers for the step kernels.
pub(crate) struct StepScratch {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    u_half: Vec<f64>,
    drift: Vec<f64>,
    diff: Vec<f64>,
    proj_u: Vec<f64>,
}

impl StepScratch {
    pub(crate) fn new(spec: &ModelSpec) -> Self {
        let d = spec.dim();
        let n = spec.state_dim();
        Self {
            alpha: vec![0.0; d],
            beta: vec![0.0; d],
            u_half: vec![0.0; d],
            drift: vec![0.0; n],
            diff: vec![0.0; n],
            proj_u: vec![0.0; d],
        }
    }
}

/// One splitting step (LT1, LT2 or Strang). `x.u` must lie in `[0,1]^d`
/// and `x.z` must be present exactly under OU noise.
pub fn step_splitting(kind: SchemeKind, ctx: &StepContext<'_>, x: &State) -> Result<State> {
    if !kind.is_splitting() {
        return Err(Error::InvalidArgument(format!("{kind} is not a splitting scheme")));
    }
    ctx.spec.validate_state(x)?;
    if !x.is_finite() {
        return Err(Error::NonFinite { what: "state", value: f64::NAN });
    }
    let mut out = x.clone();
    let mut scratch = StepScratch::new(ctx.spec);
    split_step_into(kind, ctx.spec, ctx.dt, &ctx.noise, x, &mut out, &mut scratch)?;
    Ok(out)
}

/// One Euler-Maruyama-family step (EM, TEM, DTEM, TrEM or DTrEM).
pub fn step_em_family(kind: SchemeKind, ctx: &StepContext<'_>, x: &State) -> Result<State> {
    if kind.is_splitting() {
        return Err(Error::InvalidArgument(format!("{kind} is not an EM-family scheme")));
    }
    if !kind.supports(&ctx.spec.noise) {
        return Err(Error::SchemeVariantMismatch { scheme: kind.name(), variant: ctx.spec.noise.name() });
    }
    ctx.spec.validate_state(x)?;
    let mut out = x.clone();
    let mut scratch = StepScratch::new(ctx.spec);
    em_step_into(kind, ctx.spec, ctx.dt, &ctx.noise, x, &mut out, &mut scratch);
    Ok(out)
}

fn split_step_into(
    kind: SchemeKind,
    spec: &ModelSpec,
    dt: f64,
    noise: &NoiseView<'_>,
    x: &State,
    out: &mut State,
    sc: &mut StepScratch,
) -> Result<()> {
    let coeffs = &spec.coefficients;
    match spec.noise {
        NoiseVariant::BrownianMultiplicative | NoiseVariant::Deterministic => {
            let multiplicative = matches!(spec.noise, NoiseVariant::BrownianMultiplicative);
            let sigma_at = |u: &[f64]| if multiplicative { coeffs.sigma(u) } else { 0.0 };
            match kind {
                SchemeKind::Lt1 => {
                    psi_d_into(dt, x.v, &x.u, coeffs, &mut sc.alpha, &mut sc.beta, &mut out.u);
                    let (a, c, s) = (coeffs.a(&out.u), coeffs.b(&out.u), sigma_at(&out.u));
                    let tr = linear_transition(a, c, s, dt)?;
                    out.v = tr.mean_mult * x.v + tr.mean_add
                        + noise.stochastic(tr.stdev, a, s, Half::Full)?;
                }
                SchemeKind::Lt2 => {
                    let (a, c, s) = (coeffs.a(&x.u), coeffs.b(&x.u), sigma_at(&x.u));
                    let tr = linear_transition(a, c, s, dt)?;
                    out.v = tr.mean_mult * x.v + tr.mean_add
                        + noise.stochastic(tr.stdev, a, s, Half::Full)?;
                    psi_d_into(dt, out.v, &x.u, coeffs, &mut sc.alpha, &mut sc.beta, &mut out.u);
                }
                SchemeKind::Strang => {
                    psi_d_into(dt / 2.0, x.v, &x.u, coeffs, &mut sc.alpha, &mut sc.beta, &mut sc.u_half);
                    let (a, c, s) = (coeffs.a(&sc.u_half), coeffs.b(&sc.u_half), sigma_at(&sc.u_half));
                    let tr = linear_transition(a, c, s, dt)?;
                    out.v = tr.mean_mult * x.v + tr.mean_add
                        + noise.stochastic(tr.stdev, a, s, Half::Full)?;
                    psi_d_into(dt / 2.0, out.v, &sc.u_half, coeffs, &mut sc.alpha, &mut sc.beta, &mut out.u);
                }
                _ => unreachable!("split_step_into called with non-splitting kind"),
            }
            out.z = None;
        }
        NoiseVariant::OrnsteinUhlenbeck { theta, mu, sigma } => {
            let z = x.z.expect("OU state must carry z (validated at entry)");
            let z_flow = |window: f64| linear_transition(-theta, theta * mu, sigma, window);
            match kind {
                SchemeKind::Lt1 => {
                    // Z' first; V' consumes the new Z' and the updated U'.
                    psi_d_into(dt, x.v, &x.u, coeffs, &mut sc.alpha, &mut sc.beta, &mut out.u);
                    let ztr = z_flow(dt)?;
                    let z_new = ztr.mean_mult * z + ztr.mean_add
                        + noise.stochastic(ztr.stdev, -theta, sigma, Half::Full)?;
                    let a = coeffs.a(&out.u);
                    let c = coeffs.b(&out.u) + theta * (mu - z_new);
                    let vtr = linear_transition(a, c, sigma, dt)?;
                    out.v = vtr.mean_mult * x.v + vtr.mean_add
                        + noise.stochastic(vtr.stdev, a, sigma, Half::Full)?;
                    out.z = Some(z_new);
                }
                SchemeKind::Lt2 => {
                    // V' consumes the pre-step z; the same window drives Z'.
                    let a = coeffs.a(&x.u);
                    let c = coeffs.b(&x.u) + theta * (mu - z);
                    let vtr = linear_transition(a, c, sigma, dt)?;
                    out.v = vtr.mean_mult * x.v + vtr.mean_add
                        + noise.stochastic(vtr.stdev, a, sigma, Half::Full)?;
                    psi_d_into(dt, out.v, &x.u, coeffs, &mut sc.alpha, &mut sc.beta, &mut out.u);
                    let ztr = z_flow(dt)?;
                    out.z = Some(
                        ztr.mean_mult * z + ztr.mean_add
                            + noise.stochastic(ztr.stdev, -theta, sigma, Half::Full)?,
                    );
                }
                SchemeKind::Strang => {
                    psi_d_into(dt / 2.0, x.v, &x.u, coeffs, &mut sc.alpha, &mut sc.beta, &mut sc.u_half);
                    let zhtr = z_flow(dt / 2.0)?;
                    let z_half = zhtr.mean_mult * z + zhtr.mean_add
                        + noise.stochastic(zhtr.stdev, -theta, sigma, Half::First)?;
                    let a = coeffs.a(&sc.u_half);
                    let c = coeffs.b(&sc.u_half) + theta * (mu - z_half);
                    let vtr = linear_transition(a, c, sigma, dt)?;
                    out.v = vtr.mean_mult * x.v + vtr.mean_add
                        + noise.stochastic(vtr.stdev, a, sigma, Half::Full)?;
                    psi_d_into(dt / 2.0, out.v, &sc.u_half, coeffs, &mut sc.alpha, &mut sc.beta, &mut out.u);
                    out.z = Some(
                        zhtr.mean_mult * z_half + zhtr.mean_add
                            + noise.stochastic(zhtr.stdev, -theta, sigma, Half::Second)?,
                    );
                }
                _ => unreachable!("split_step_into called with non-splitting kind"),
            }
        }
    }
    // Structural preservation: psi_D is a convex combination, so a cube
    // input must stay inside the 1e-12 band without clamping.
    debug_assert!(
        !x.u.iter().all(|ul| (-1e-12..=1.0 + 1e-12).contains(ul))
            || out.u.iter().all(|ul| (-1e-12..=1.0 + 1e-12).contains(ul))
            || !out.u.iter().all(|ul| ul.is_finite()),
        "splitting step left the gating cube: {:?}",
        out.u
    );
    Ok(())
}

fn em_step_into(
    kind: SchemeKind,
    spec: &ModelSpec,
    dt: f64,
    noise: &NoiseView<'_>,
    x: &State,
    out: &mut State,
    sc: &mut StepScratch,
) {
    let d = spec.dim();
    let dw = noise.increment().unwrap_or(f64::NAN);
    let projected = matches!(kind, SchemeKind::Trem | SchemeKind::Dtrem);
    let (eval_v, eval_z) = if projected {
        let norm_sq = x.v * x.v
            + x.u.iter().map(|ul| ul * ul).sum::<f64>()
            + x.z.map_or(0.0, |z| z * z);
        let radius = if dt > 0.0 { 1.0 / dt.sqrt() } else { f64::INFINITY };
        let norm = norm_sq.sqrt();
        let scale = if norm > radius { radius / norm } else { 1.0 };
        for (dst, src) in sc.proj_u.iter_mut().zip(&x.u) {
            *dst = scale * src;
        }
        (scale * x.v, x.z.map(|z| scale * z))
    } else {
        sc.proj_u.copy_from_slice(&x.u);
        (x.v, x.z)
    };
    drift_into(spec, eval_v, &sc.proj_u, eval_z, &mut sc.drift);
    if kind == SchemeKind::Dtrem {
        diffusion_into(spec, &sc.proj_u, &mut sc.diff);
    } else {
        diffusion_into(spec, &x.u, &mut sc.diff);
    }

    let b_norm = sc.drift.iter().map(|b| b * b).sum::<f64>().sqrt();
    let s_dw_norm = sc.diff.iter().map(|s| s * s).sum::<f64>().sqrt() * dw.abs();
    let increment = |i: usize| -> f64 {
        match kind {
            SchemeKind::Em | SchemeKind::Trem | SchemeKind::Dtrem => dt * sc.drift[i] + sc.diff[i] * dw,
            SchemeKind::Tem => dt * sc.drift[i] / (1.0 + dt * b_norm) + sc.diff[i] * dw,
            SchemeKind::Dtem => (dt * sc.drift[i] + sc.diff[i] * dw) / (1.0 + dt * b_norm + s_dw_norm),
            _ => unreachable!("em_step_into called with splitting kind"),
        }
    };
    out.v = x.v + increment(0);
    for l in 0..d {
        out.u[l] = x.u[l] + increment(1 + l);
    }
    out.z = x.z.map(|z| z + increment(1 + d));
}

/// Simulation outcome markers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimOutcome {
    /// Grid index of the first non-finite state, if stepping blew up.
    pub exploded_at: Option<usize>,
    /// Number of steps actually taken (== n unless exploded early).
    pub n_steps: usize,
}

/// Options for [`simulate_path_with`].
#[derive(Clone, Copy, Debug)]
pub struct SimOptions {
    pub term: StochasticTerm,
    /// Store every k-th grid state (k >= 1); the initial state is always
    /// stored. Explosion indices stay in scheme-step units.
    pub store_every: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { term: StochasticTerm::ScaledIncrement, store_every: 1 }
    }
}

/// A simulated path sampled on a uniform grid, stored flat (row = state).
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Time between stored rows.
    pub sample_dt: f64,
    pub dim: usize,
    pub has_z: bool,
    /// Scheme-step index of the first non-finite state; the trajectory
    /// holds only the finite states before it.
    pub exploded_at: Option<usize>,
    data: Vec<f64>,
}

impl Trajectory {
    fn row_len(&self) -> usize {
        1 + self.dim + usize::from(self.has_z)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.row_len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Flat row (v, u_1..u_d[, z]) at stored index `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.row_len();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn v(&self, i: usize) -> f64 {
        self.data[i * self.row_len()]
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.sample_dt
    }

    pub fn state(&self, i: usize) -> State {
        let row = self.row(i);
        State::new(
            row[0],
            row[1..1 + self.dim].to_vec(),
            self.has_z.then(|| row[1 + self.dim]),
        )
    }

    fn push(&mut self, x: &State) {
        self.data.push(x.v);
        self.data.extend_from_slice(&x.u);
        if let Some(z) = x.z {
            self.data.push(z);
        }
    }
}

/// Drives one path, invoking `visit(grid_index, state)` for every grid
/// state including the initial one; stops at the first non-finite state
/// (which is not visited).
pub fn simulate_visit<F>(
    kind: SchemeKind,
    spec: &ModelSpec,
    x0: &State,
    dt: f64,
    t_end: f64,
    noise: &PathNoise,
    term: StochasticTerm,
    mut visit: F,
) -> Result<SimOutcome>
where
    F: FnMut(usize, &State),
{
    spec.validate_state(x0)?;
    if !kind.supports(&spec.noise) {
        return Err(Error::SchemeVariantMismatch { scheme: kind.name(), variant: spec.noise.name() });
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be finite and > 0, got {dt}")));
    }
    let n = grid_ratio(t_end, dt)?;
    if !matches!(spec.noise, NoiseVariant::Deterministic) {
        grid_ratio(dt, noise.base_dt)?;
    }
    let mut cur = x0.clone();
    let mut next = x0.clone();
    let mut scratch = StepScratch::new(spec);
    visit(0, &cur);
    for i in 0..n {
        let view = NoiseView::new(noise, i, dt, term);
        if kind.is_splitting() {
            split_step_into(kind, spec, dt, &view, &cur, &mut next, &mut scratch)?;
        } else {
            em_step_into(kind, spec, dt, &view, &cur, &mut next, &mut scratch);
        }
        if !next.is_finite() {
            return Ok(SimOutcome { exploded_at: Some(i + 1), n_steps: i + 1 });
        }
        std::mem::swap(&mut cur, &mut next);
        visit(i + 1, &cur);
    }
    Ok(SimOutcome { exploded_at: None, n_steps: n })
}

/// Simulates one path on the grid t_i = i dt up to t_end = n dt, storing
/// every state.
pub fn simulate_path(
    kind: SchemeKind,
    spec: &ModelSpec,
    x0: &State,
    dt: f64,
    t_end: f64,
    noise: &PathNoise,
) -> Result<Trajectory> {
    simulate_path_with(kind, spec, x0, dt, t_end, noise, SimOptions::default())
}

/// [`simulate_path`] with an explicit stochastic-term realization and
/// storage stride.
pub fn simulate_path_with(
    kind: SchemeKind,
    spec: &ModelSpec,
    x0: &State,
    dt: f64,
    t_end: f64,
    noise: &PathNoise,
    opts: SimOptions,
) -> Result<Trajectory> {
    if opts.store_every == 0 {
        return Err(Error::InvalidArgument("store_every must be >= 1".into()));
    }
    let mut traj = Trajectory {
        sample_dt: dt * opts.store_every as f64,
        dim: spec.dim(),
        has_z: spec.has_z(),
        exploded_at: None,
        data: Vec::new(),
    };
    let outcome = simulate_visit(kind, spec, x0, dt, t_end, noise, opts.term, |i, s| {
        if i % opts.store_every == 0 {
            traj.push(s);
        }
    })?;
    traj.exploded_at = outcome.exploded_at;
    Ok(traj)
}
