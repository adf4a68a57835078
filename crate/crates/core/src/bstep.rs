//! Decoy + tagged/untagged accounting + a run of B steps.
//!
//! Each B step acts on the whole sifted key (overall QBER `delta`) and,
//! separately, on the untagged single-photon part, whose worst-case input is
//! `(1 - du - dp, du, 0, dp)`. `q11` stays zero under B steps, so four rates
//! plus the accumulated survival residue describe the state completely.

use alloc::vec::Vec;

use crate::decoy::{DecoyEstimates, SchemeConfig, MAX_B_STEPS};
use crate::math::h2;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BStepState {
    /// Product of `p_s / 2` over the steps done so far.
    pub r_b: f64,
    /// Overall QBER of the surviving key.
    pub delta: f64,
    /// Fraction of surviving bits that are untagged.
    pub omega: f64,
    /// Bit error rate of the untagged part.
    pub delta_u: f64,
    /// Phase error rate of the untagged part.
    pub delta_p: f64,
}

pub fn bstep_init(est: &DecoyEstimates) -> Result<BStepState> {
    if !(est.q_mu > 0.0) {
        return Err(Error::Domain("overall gain must be positive"));
    }
    Ok(BStepState { r_b: 1.0, delta: est.e_mu, omega: est.q1 / est.q_mu, delta_u: est.e1, delta_p: est.e1 })
}

/// One B step. The flag reports that the untagged phase error rate exceeded
/// 1/2 and was clamped.
pub fn bstep_update(s: &BStepState) -> (BStepState, bool) {
    let p_s = s.delta * s.delta + (1.0 - s.delta) * (1.0 - s.delta);
    let p_s_u = s.delta_u * s.delta_u + (1.0 - s.delta_u) * (1.0 - s.delta_u);
    let delta_p = 2.0 * s.delta_p * (1.0 - s.delta_u - s.delta_p) / p_s_u;
    let clamped = delta_p > 0.5;
    let next = BStepState {
        r_b: s.r_b * 0.5 * p_s,
        delta: s.delta * s.delta / p_s,
        omega: s.omega * s.omega * p_s_u / p_s,
        delta_u: s.delta_u * s.delta_u / p_s_u,
        delta_p: delta_p.min(0.5),
    };
    (next, clamped)
}

/// Residue of the surviving key, unclamped:
/// `r_b (-f H2(delta) + omega (1 - H2(dp)))`.
pub fn bstep_residue_raw(s: &BStepState, f_ec: f64) -> f64 {
    s.r_b * (-f_ec * h2(s.delta) + s.omega * (1.0 - h2(s.delta_p)))
}

/// Initial state followed by the state after each of `n` steps, with the
/// per-step clamp flags. Used for diagnostic dumps.
pub fn bstep_trace(est: &DecoyEstimates, n: u8) -> Result<Vec<(BStepState, bool)>> {
    if n > MAX_B_STEPS {
        return Err(Error::Domain("bsteps count must lie in 0..=8"));
    }
    let mut trace = Vec::with_capacity(usize::from(n) + 1);
    let mut s = bstep_init(est)?;
    trace.push((s, false));
    for _ in 0..n {
        let (next, clamped) = bstep_update(&s);
        trace.push((next, clamped));
        s = next;
    }
    Ok(trace)
}

/// Key rate per signal pulse after `n` B steps: `q Q_mu max(0, residue)`.
pub fn bstep_rate(est: &DecoyEstimates, n: u8, cfg: &SchemeConfig) -> Result<f64> {
    if n > MAX_B_STEPS {
        return Err(Error::Domain("bsteps count must lie in 0..=8"));
    }
    if est.q_mu <= 0.0 {
        return Ok(0.0);
    }
    let mut s = bstep_init(est)?;
    for _ in 0..n {
        s = bstep_update(&s).0;
    }
    Ok(cfg.q_sift * est.q_mu * bstep_residue_raw(&s, cfg.f_ec).max(0.0))
}
