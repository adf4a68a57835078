//! Finite-size analysis: counting-statistics confidence bounds on the decoy
//! observables, worst-case decoy estimates, and the search for the best
//! pulse allocation and intensities.
//!
//! A quantity `X` estimated from `N` pulses (so about `N X` events) is bounded
//! by `X (1 +- n_sigma / sqrt(N X))`. This is applied to the weak-decoy gain,
//! to its error-event count and to the vacuum yield. The signal gain and QBER
//! are taken as exact.

use alloc::vec::Vec;

use crate::channel::{link_transmittance, overall_gain_qber, ChannelParams};
use crate::decoy::{
    max_secure_distance, practical_bounds, scheme_rate, DecoyEstimates, DecoyObservation, EstimateMode, SchemeConfig,
    DISTANCE_TOL_KM,
};
use crate::math::{exp, sqrt};
use crate::{Error, Result};

pub const DEFAULT_N_TOTAL: f64 = 6e9;
pub const DEFAULT_N_SIGMA: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentPlan {
    pub n_total: f64,
    pub frac_signal: f64,
    pub frac_vacuum: f64,
    pub frac_weak: f64,
    pub mu: f64,
    pub nu: f64,
    pub n_sigma: f64,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        let fr = [self.frac_signal, self.frac_vacuum, self.frac_weak];
        if fr.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::Domain("pulse fractions must be positive"));
        }
        if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Domain("pulse fractions must sum to 1"));
        }
        if !(self.nu > 0.0 && self.nu < self.mu) {
            return Err(Error::Domain("intensities must satisfy 0 < nu < mu"));
        }
        if !(self.n_sigma >= 0.0) {
            return Err(Error::Domain("n_sigma must be non-negative"));
        }
        if !(self.n_total > 0.0) {
            return Err(Error::Domain("n_total must be positive"));
        }
        Ok(())
    }

    pub fn n_weak(&self) -> f64 {
        self.n_total * self.frac_weak
    }

    pub fn n_vacuum(&self) -> f64 {
        self.n_total * self.frac_vacuum
    }
}

/// Two-sided bound on a rate `x` estimated from `n` trials. Returns
/// `(lo, hi, degenerate)`; with fewer than one expected event the interval
/// becomes `[0, 1]`.
pub fn count_bounds(x: f64, n: f64, n_sigma: f64) -> (f64, f64, bool) {
    let events = n * x;
    if n_sigma == 0.0 {
        return (x, x, false);
    }
    if events < 1.0 {
        return (0.0, 1.0, true);
    }
    let rel = n_sigma / sqrt(events);
    ((x * (1.0 - rel)).max(0.0), (x * (1.0 + rel)).min(1.0), false)
}

/// Worst-case values of the weak-decoy and vacuum observables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuatedStats {
    pub q_nu_lo: f64,
    pub q_nu_hi: f64,
    /// Error rate such that `e_nu_hi * q_nu_lo` is the upper bound on the
    /// error-event rate `E_nu Q_nu`.
    pub e_nu_hi: f64,
    pub y0_lo: f64,
    pub y0_hi: f64,
    /// Some expected event count was below one.
    pub degenerate: bool,
}

pub fn fluctuation_bounds(q_nu: f64, e_nu: f64, y0: f64, plan: &ExperimentPlan) -> Result<FluctuatedStats> {
    plan.validate()?;
    let k = plan.n_sigma;
    let (q_lo, q_hi, d1) = count_bounds(q_nu, plan.n_weak(), k);
    let (_, eq_hi, d2) = count_bounds(q_nu * e_nu, plan.n_weak(), k);
    let (y0_lo, y0_hi, d3) = count_bounds(y0, plan.n_vacuum(), k);
    let e_nu_hi = if q_lo > 0.0 { (eq_hi / q_lo).min(1.0) } else { 1.0 };
    Ok(FluctuatedStats { q_nu_lo: q_lo, q_nu_hi: q_hi, e_nu_hi, y0_lo, y0_hi, degenerate: d1 || d2 || d3 })
}

/// Decoy estimates at one distance with the fluctuated observables
/// substituted. `Q1` is the smaller and `e1` the larger of the bounds
/// obtained with `Y0` at either end of its interval; `Q0` uses the lower end.
pub fn finite_estimates(
    channel: &ChannelParams,
    plan: &ExperimentPlan,
    distance_km: f64,
) -> Result<(DecoyEstimates, FluctuatedStats)> {
    plan.validate()?;
    let eta = link_transmittance(channel, distance_km)?;
    let sig = overall_gain_qber(channel, eta, plan.mu);
    let weak = overall_gain_qber(channel, eta, plan.nu);
    let fl = fluctuation_bounds(weak.q_mu, weak.e_mu, channel.y0, plan)?;
    let obs = |y0: f64| DecoyObservation {
        mu: plan.mu,
        nu: plan.nu,
        q_mu: sig.q_mu,
        e_mu: sig.e_mu,
        q_nu: fl.q_nu_lo,
        e_nu: fl.e_nu_hi,
        y0,
        e0: channel.e0,
    };
    let a = practical_bounds(&obs(fl.y0_lo))?;
    let b = practical_bounds(&obs(fl.y0_hi))?;
    let est = DecoyEstimates {
        q_mu: sig.q_mu,
        e_mu: sig.e_mu,
        q0: fl.y0_lo * exp(-plan.mu),
        q1: a.q1.min(b.q1),
        e1: a.e1.max(b.e1),
        mode: EstimateMode::Practical,
        clamped: a.clamped || b.clamped || fl.degenerate,
    };
    Ok((est, fl))
}

/// Key rate per transmitted pulse: the signal fraction times the scheme
/// rate on the fluctuated estimates. The intensity comes from the plan.
pub fn finite_rate(
    channel: &ChannelParams,
    plan: &ExperimentPlan,
    cfg: &SchemeConfig,
    distance_km: f64,
) -> Result<f64> {
    let (est, _) = finite_estimates(channel, plan, distance_km)?;
    Ok(plan.frac_signal * scheme_rate(&est, cfg)?)
}

/// Grid over pulse allocations and intensities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanGrid {
    pub n_total: f64,
    pub n_sigma: f64,
    pub frac_step: f64,
    pub mu_step: f64,
    pub nu_step: f64,
    pub mu_max: f64,
}

impl PlanGrid {
    pub fn new(n_total: f64, n_sigma: f64) -> Self {
        Self { n_total, n_sigma, frac_step: 0.05, mu_step: 0.02, nu_step: 0.01, mu_max: 1.0 }
    }

    /// Every candidate plan, in a fixed order: vacuum fraction, weak
    /// fraction, `mu`, `nu`, each ascending.
    pub fn plans(&self) -> Vec<ExperimentPlan> {
        let nf = libm::round(1.0 / self.frac_step) as usize;
        let nm = libm::floor(self.mu_max / self.mu_step + 1e-9) as usize;
        let mut out = Vec::new();
        for iv in 1..nf {
            for iw in 1..nf - iv {
                let frac_vacuum = iv as f64 / nf as f64;
                let frac_weak = iw as f64 / nf as f64;
                let frac_signal = (nf - iv - iw) as f64 / nf as f64;
                for im in 1..=nm {
                    let mu = im as f64 * self.mu_step;
                    let mut jn = 1;
                    loop {
                        let nu = jn as f64 * self.nu_step;
                        if nu >= mu - 1e-12 {
                            break;
                        }
                        out.push(ExperimentPlan {
                            n_total: self.n_total,
                            frac_signal,
                            frac_vacuum,
                            frac_weak,
                            mu,
                            nu,
                            n_sigma: self.n_sigma,
                        });
                        jn += 1;
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOptimum {
    pub plan: ExperimentPlan,
    pub rate: f64,
    /// Index of the plan in [`PlanGrid::plans`].
    pub index: usize,
}

/// Whether candidate `(rate, plan, index)` beats `best` under the total order
/// used by the plan search: higher rate, then larger signal fraction, then
/// lower grid index.
pub fn plan_beats(rate: f64, plan: &ExperimentPlan, index: usize, best: &PlanOptimum) -> bool {
    if rate != best.rate {
        return rate > best.rate;
    }
    if plan.frac_signal != best.plan.frac_signal {
        return plan.frac_signal > best.plan.frac_signal;
    }
    index < best.index
}

/// Pick the best of a list of evaluated candidates. The result does not
/// depend on the order in which candidates are supplied.
pub fn select_plan<I>(candidates: I) -> Option<PlanOptimum>
where
    I: IntoIterator<Item = PlanOptimum>,
{
    let mut best: Option<PlanOptimum> = None;
    for c in candidates {
        match best {
            Some(ref b) if !plan_beats(c.rate, &c.plan, c.index, b) => {}
            _ => best = Some(c),
        }
    }
    best
}

/// Exhaustive plan search at one distance. A zero rate means no plan gives
/// key at this distance.
pub fn optimize_plan(
    channel: &ChannelParams,
    cfg: &SchemeConfig,
    grid: &PlanGrid,
    distance_km: f64,
) -> Result<PlanOptimum> {
    if !(distance_km >= 0.0) {
        return Err(Error::Domain("distance must be non-negative"));
    }
    let plans = grid.plans();
    let mut evaluated = Vec::with_capacity(plans.len());
    for (index, plan) in plans.into_iter().enumerate() {
        let rate = finite_rate(channel, &plan, cfg, distance_km)?;
        evaluated.push(PlanOptimum { plan, rate, index });
    }
    select_plan(evaluated).ok_or(Error::Domain("plan grid is empty"))
}

/// Largest distance at which `rate` is positive, given an upper bracket
/// `hi_km` where it is known to vanish. Steps down by `coarse_km` until a
/// positive point is found, then bisects to `tol_km`. Returns 0 when nothing
/// below `hi_km` is positive.
pub fn max_distance_below<F>(mut rate: F, hi_km: f64, coarse_km: f64, tol_km: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut hi = hi_km;
    let mut lo = (hi - coarse_km).max(0.0);
    loop {
        if rate(lo)? > 0.0 {
            break;
        }
        if lo == 0.0 {
            return Ok(0.0);
        }
        hi = lo;
        lo = (lo - coarse_km).max(0.0);
    }
    while hi - lo > tol_km {
        let mid = 0.5 * (lo + hi);
        if rate(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Coarse step and final resolution of [`max_finite_distance`].
pub const FINITE_COARSE_KM: f64 = 5.0;
pub const FINITE_TOL_KM: f64 = 0.1;

/// Largest distance at which some plan on `grid` gives a positive finite-size
/// rate. The asymptotic maximum bounds it from above.
pub fn max_finite_distance(channel: &ChannelParams, cfg: &SchemeConfig, grid: &PlanGrid) -> Result<f64> {
    let asym = max_secure_distance(channel, cfg)?;
    if !asym.positive_at_zero {
        return Ok(0.0);
    }
    max_distance_below(
        |d| Ok(optimize_plan(channel, cfg, grid, d)?.rate),
        asym.km + DISTANCE_TOL_KM,
        FINITE_COARSE_KM,
        FINITE_TOL_KM,
    )
}
