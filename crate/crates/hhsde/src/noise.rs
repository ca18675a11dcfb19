//! Deterministic, seed-addressed Brownian increments on a fine base grid.
//!
//! Every study draws its randomness from here: one ChaCha stream per
//! path index derived from a master seed, holding the Brownian
//! increments over the base grid `t_k = k * base_dt`. Schemes running at
//! a coarser step `dt = k * base_dt` aggregate those increments, so the
//! reference trajectory and every candidate scheme see exactly the same
//! Brownian path (telescoping sums), which is what makes strong-error
//! comparisons across step sizes meaningful.
//!
//! Standardized increments `xi = (W_b - W_a)/sqrt(b - a)` are served for
//! a full step or either half step; halves satisfy
//! `xi_full * sqrt(dt) = xi_1 * sqrt(dt/2) + xi_2 * sqrt(dt/2)` up to
//! summation rounding. [`ito_sum`] additionally aggregates the weighted
//! sums `sum_k e^{a (t_end_window - s_k)} dW_k` used when a study needs
//! the Ito integral of the exact flow realized on the shared fine path
//! rather than a variance-matched draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// Stream-space split: path streams occupy [0, 2^63), auxiliary study
/// streams (start-state samplers, probe draws) occupy [2^63, 2^64).
const AUX_STREAM_BASE: u64 = 1 << 63;

/// Addressing scheme for every Brownian path of a study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoisePlan {
    pub master_seed: u64,
    pub n_paths: usize,
    pub t_end: f64,
    /// Finest grid resolution; must divide every step size used on the
    /// plan (and every half step where Strang-OU participates).
    pub base_dt: f64,
}

impl NoisePlan {
    pub fn new(master_seed: u64, n_paths: usize, t_end: f64, base_dt: f64) -> Result<Self> {
        if n_paths == 0 {
            return Err(Error::InvalidArgument("n_paths must be >= 1".into()));
        }
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(Error::InvalidArgument(format!("t_end must be finite and > 0, got {t_end}")));
        }
        if !(base_dt > 0.0) || !base_dt.is_finite() {
            return Err(Error::InvalidArgument(format!("base_dt must be finite and > 0, got {base_dt}")));
        }
        grid_ratio(t_end, base_dt)?;
        Ok(Self { master_seed, n_paths, t_end, base_dt })
    }

    /// Number of base-grid increments covering [0, t_end].
    pub fn n_increments(&self) -> usize {
        grid_ratio(self.t_end, self.base_dt).expect("validated at construction")
    }
}

/// Brownian increments of one path over the base grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PathNoise {
    pub path_index: usize,
    pub base_dt: f64,
    /// W_{(k+1) base_dt} - W_{k base_dt}, i.i.d. N(0, base_dt).
    pub increments: Vec<f64>,
}

/// Window selector within one scheme step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Half {
    Full,
    First,
    Second,
}

/// Integer ratio `dt / base_dt`, rejecting misaligned grids.
pub(crate) fn grid_ratio(dt: f64, base_dt: f64) -> Result<usize> {
    let ratio = dt / base_dt;
    let rounded = ratio.round();
    if !(rounded >= 1.0) || (ratio - rounded).abs() > 1e-9 * ratio.abs().max(1.0) {
        return Err(Error::GridMisaligned { dt, base_dt, ratio });
    }
    Ok(rounded as usize)
}

/// Deterministic per-path generator: stream `path_index` of a ChaCha
/// cipher keyed by the master seed. Regeneration is bit-identical and
/// distinct indices give statistically independent streams.
pub fn generate_path_noise(plan: &NoisePlan, path_index: usize) -> Result<PathNoise> {
    if path_index >= plan.n_paths {
        return Err(Error::InvalidArgument(format!(
            "path_index {path_index} out of range for plan with {} paths",
            plan.n_paths
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.master_seed);
    rng.set_stream(path_index as u64);
    let sqrt_dt = plan.base_dt.sqrt();
    let n = plan.n_increments();
    let increments = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sqrt_dt * z
        })
        .collect();
    Ok(PathNoise { path_index, base_dt: plan.base_dt, increments })
}

/// Auxiliary RNG stream for non-path randomness (start-state samplers,
/// one-step probe draws); lives in a stream range disjoint from paths.
pub fn aux_rng(master_seed: u64, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(AUX_STREAM_BASE | (lane & (AUX_STREAM_BASE - 1)));
    rng
}

fn window_bounds(noise: &PathNoise, step_index: usize, dt: f64, half: Half) -> Result<(usize, usize)> {
    let k = grid_ratio(dt, noise.base_dt)?;
    let (offset, len) = match half {
        Half::Full => (0, k),
        Half::First | Half::Second => {
            if k % 2 != 0 {
                return Err(Error::GridMisaligned {
                    dt: dt / 2.0,
                    base_dt: noise.base_dt,
                    ratio: k as f64 / 2.0,
                });
            }
            (if half == Half::First { 0 } else { k / 2 }, k / 2)
        }
    };
    let start = step_index * k + offset;
    let end = start + len;
    if end > noise.increments.len() {
        return Err(Error::NoiseOutOfRange { start, end, len: noise.increments.len() });
    }
    Ok((start, end))
}

/// Standardized increment `xi = (W_b - W_a)/sqrt(b - a)` over the full
/// step `[i dt, (i+1) dt]` or one of its halves, aggregated from the base
/// grid.
pub fn xi_at(noise: &PathNoise, step_index: usize, dt: f64, half: Half) -> Result<f64> {
    let (start, end) = window_bounds(noise, step_index, dt, half)?;
    let sum: f64 = noise.increments[start..end].iter().sum();
    let window = (end - start) as f64 * noise.base_dt;
    Ok(sum / window.sqrt())
}

/// Raw Brownian increment `W_b - W_a` over the selected window.
pub fn increment_at(noise: &PathNoise, step_index: usize, dt: f64, half: Half) -> Result<f64> {
    let (start, end) = window_bounds(noise, step_index, dt, half)?;
    Ok(noise.increments[start..end].iter().sum())
}

/// Left-endpoint Riemann-Ito aggregation of `int e^{a (t_b - s)} dW_s`
/// over the selected window `[t_a, t_b]`: each base increment with left
/// endpoint `s_k` is weighted by `e^{a (t_b - s_k)}`. For `a = 0` this
/// reduces to the raw increment.
pub fn ito_sum(noise: &PathNoise, step_index: usize, dt: f64, half: Half, a: f64) -> Result<f64> {
    let (start, end) = window_bounds(noise, step_index, dt, half)?;
    let factor = (a * noise.base_dt).exp();
    let mut acc = 0.0;
    for inc in &noise.increments[start..end] {
        acc = (acc + inc) * factor;
    }
    Ok(acc)
}
