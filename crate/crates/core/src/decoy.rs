//! Tagged/untagged residues, decoy-state estimation of the single-photon
//! gain and error rate, the one-way key rate, and the optimizers shared by
//! every scheme (signal intensity search, maximal secure distance).

use core::fmt;
use core::str::FromStr;

use crate::channel::{link_transmittance, overall_gain_qber, photon_number_stats, ChannelParams};
use crate::math::{exp, golden_section_max, h2};
use crate::{bstep, recurrence, Error, Result};

/// Largest number of B steps a [`Scheme::BSteps`] may request.
pub const MAX_B_STEPS: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimateMode {
    /// Yields and error rates taken directly from the channel model.
    #[default]
    Asymptotic,
    /// Vacuum + weak decoy bounds.
    Practical,
}

/// The quantities every post-processing scheme consumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyEstimates {
    pub q_mu: f64,
    pub e_mu: f64,
    /// Vacuum contribution to the signal gain, `Y0 e^{-mu}`.
    pub q0: f64,
    /// Single-photon gain (a lower bound in practical mode).
    pub q1: f64,
    /// Single-photon error rate (an upper bound in practical mode).
    pub e1: f64,
    pub mode: EstimateMode,
    /// Set when a bound had to be clamped (negative `Y1`, `e1` above 1/2).
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    OneWay,
    BSteps(u8),
    Recurrence,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::OneWay => f.write_str("oneway"),
            Scheme::BSteps(n) => write!(f, "bsteps:{n}"),
            Scheme::Recurrence => f.write_str("recurrence"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oneway" => Ok(Scheme::OneWay),
            "recurrence" => Ok(Scheme::Recurrence),
            _ => {
                let n = s
                    .strip_prefix("bsteps:")
                    .and_then(|n| n.parse::<u8>().ok())
                    .ok_or(Error::Domain("scheme must be oneway, bsteps:<n> or recurrence"))?;
                if n > MAX_B_STEPS {
                    return Err(Error::Domain("bsteps count must lie in 0..=8"));
                }
                Ok(Scheme::BSteps(n))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuPolicy {
    Fixed(f64),
    Optimized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    /// Sifting factor, 1/2 for plain BB84.
    pub q_sift: f64,
    /// Error-correction inefficiency, applied as a constant factor.
    pub f_ec: f64,
    pub scheme: Scheme,
    pub mu_policy: MuPolicy,
    /// Upper end of the signal intensity search range.
    pub mu_max: f64,
    /// Whether the recurrence parity-check sacrifice carries the `f_ec`
    /// factor. Off gives the variant without inefficiency on that term.
    pub ec_on_parity_check: bool,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme) -> Self {
        Self { q_sift: 0.5, f_ec: 1.22, scheme, mu_policy: MuPolicy::Optimized, mu_max: 1.0, ec_on_parity_check: true }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q_sift > 0.0 && self.q_sift <= 1.0) {
            return Err(Error::Domain("q_sift must lie in (0, 1]"));
        }
        if !(self.f_ec >= 1.0) {
            return Err(Error::Domain("f_ec must be at least 1"));
        }
        if !(self.mu_max > 0.0) {
            return Err(Error::Domain("mu_max must be positive"));
        }
        if let MuPolicy::Fixed(mu) = self.mu_policy {
            if !(mu > 0.0) {
                return Err(Error::Domain("fixed mu must be positive"));
            }
        }
        if let Scheme::BSteps(n) = self.scheme {
            if n > MAX_B_STEPS {
                return Err(Error::Domain("bsteps count must lie in 0..=8"));
            }
        }
        Ok(())
    }
}

/// Residue with several untagged-like groups, unclamped:
/// `-f H2(delta) + sum_g omega_g (1 - H2(dp_g))`.
pub fn gllp_residue_raw(delta: f64, groups: &[(f64, f64)], f_ec: f64) -> f64 {
    let pa: f64 = groups.iter().map(|&(omega, dp)| omega * (1.0 - h2(dp))).sum();
    -f_ec * h2(delta) + pa
}

/// [`gllp_residue_raw`] clamped at zero.
pub fn gllp_residue(delta: f64, groups: &[(f64, f64)], f_ec: f64) -> f64 {
    gllp_residue_raw(delta, groups, f_ec).max(0.0)
}

/// Estimates read straight off the channel model (infinitely many decoys).
pub fn asymptotic_estimates(channel: &ChannelParams, mu: f64, distance_km: f64) -> Result<DecoyEstimates> {
    if !(mu > 0.0) {
        return Err(Error::Domain("mu must be positive"));
    }
    let eta = link_transmittance(channel, distance_km)?;
    let overall = overall_gain_qber(channel, eta, mu);
    let single = photon_number_stats(channel, eta, mu, 1)?;
    Ok(DecoyEstimates {
        q_mu: overall.q_mu,
        e_mu: overall.e_mu,
        q0: channel.y0 * exp(-mu),
        q1: single.q_i,
        e1: single.e_i,
        mode: EstimateMode::Asymptotic,
        clamped: false,
    })
}

/// Gains and QBERs measured at the signal and weak decoy intensities, with
/// the background figures from the vacuum decoy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyObservation {
    pub mu: f64,
    pub nu: f64,
    pub q_mu: f64,
    pub e_mu: f64,
    pub q_nu: f64,
    pub e_nu: f64,
    pub y0: f64,
    pub e0: f64,
}

/// Lower bound on the single-photon yield from vacuum + weak decoy data.
/// May be negative; callers clamp.
pub fn y1_lower_bound(q_mu: f64, q_nu: f64, y0: f64, mu: f64, nu: f64) -> f64 {
    mu / (mu * nu - nu * nu)
        * (q_nu * exp(nu) - q_mu * exp(mu) * nu * nu / (mu * mu) - (mu * mu - nu * nu) / (mu * mu) * y0)
}

/// Upper bound on the single-photon error rate given the error-weighted weak
/// decoy gain `E_nu Q_nu`. Not clamped.
pub fn e1_upper_bound(eq_nu: f64, y0: f64, e0: f64, y1_lower: f64, nu: f64) -> f64 {
    (eq_nu * exp(nu) - e0 * y0) / (y1_lower * nu)
}

/// Two-decoy (vacuum + weak) bounds on `Q1` and `e1`.
///
/// A non-positive `Y1` bound yields `q1 = 0` and `e1 = 1/2`; `e1` is clamped
/// into `[0, 1/2]`. Either clamp sets `clamped`.
pub fn practical_bounds(obs: &DecoyObservation) -> Result<DecoyEstimates> {
    let DecoyObservation { mu, nu, q_mu, e_mu, q_nu, e_nu, y0, e0 } = *obs;
    if !(nu > 0.0 && nu < mu) {
        return Err(Error::Domain("decoy intensity must satisfy 0 < nu < mu"));
    }
    let y1 = y1_lower_bound(q_mu, q_nu, y0, mu, nu);
    let q0 = y0 * exp(-mu);
    if y1 <= 0.0 {
        return Ok(DecoyEstimates { q_mu, e_mu, q0, q1: 0.0, e1: 0.5, mode: EstimateMode::Practical, clamped: true });
    }
    let e1_raw = e1_upper_bound(e_nu * q_nu, y0, e0, y1, nu);
    let e1 = e1_raw.clamp(0.0, 0.5);
    Ok(DecoyEstimates {
        q_mu,
        e_mu,
        q0,
        q1: y1 * mu * exp(-mu),
        e1,
        mode: EstimateMode::Practical,
        clamped: e1 != e1_raw,
    })
}

/// One-way (hashing) key rate per signal pulse, clamped at zero.
pub fn oneway_rate(est: &DecoyEstimates, cfg: &SchemeConfig) -> f64 {
    (cfg.q_sift * (-est.q_mu * cfg.f_ec * h2(est.e_mu) + est.q1 * (1.0 - h2(est.e1)))).max(0.0)
}

/// Key rate of the configured scheme for the given estimates.
pub fn scheme_rate(est: &DecoyEstimates, cfg: &SchemeConfig) -> Result<f64> {
    match cfg.scheme {
        Scheme::OneWay => Ok(oneway_rate(est, cfg)),
        Scheme::BSteps(n) => bstep::bstep_rate(est, n, cfg),
        Scheme::Recurrence => recurrence::recurrence_rate(est, cfg),
    }
}

/// Asymptotic key rate at a fixed intensity and distance.
pub fn rate_at(channel: &ChannelParams, cfg: &SchemeConfig, distance_km: f64, mu: f64) -> Result<f64> {
    scheme_rate(&asymptotic_estimates(channel, mu, distance_km)?, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuOptimum {
    pub mu: f64,
    pub rate: f64,
}

/// Grid spacing of the coarse intensity scan.
pub const MU_GRID_STEP: f64 = 0.01;
/// Final bracket width of the golden-section refinement.
pub const MU_REFINE_TOL: f64 = 1e-4;

/// Best signal intensity on `(0, mu_max]` at one distance.
///
/// A 0.01 grid locates the best cell and golden-section search refines it
/// to 1e-4. The refined point is kept only if it beats the grid maximum, so
/// the result dominates every grid point. A fixed [`MuPolicy`] short-circuits
/// the search.
pub fn optimize_mu(channel: &ChannelParams, cfg: &SchemeConfig, distance_km: f64) -> Result<MuOptimum> {
    cfg.validate()?;
    if let MuPolicy::Fixed(mu) = cfg.mu_policy {
        return Ok(MuOptimum { mu, rate: rate_at(channel, cfg, distance_km, mu)? });
    }
    let n = libm::round(cfg.mu_max / MU_GRID_STEP).max(1.0) as usize;
    let mut best = MuOptimum { mu: cfg.mu_max, rate: f64::NEG_INFINITY };
    for k in 1..=n {
        let mu = (k as f64 * MU_GRID_STEP).min(cfg.mu_max);
        let rate = rate_at(channel, cfg, distance_km, mu)?;
        if rate > best.rate {
            best = MuOptimum { mu, rate };
        }
    }
    if best.rate <= 0.0 {
        return Ok(MuOptimum { mu: best.mu, rate: 0.0 });
    }
    let lo = (best.mu - MU_GRID_STEP).max(MU_GRID_STEP * 1e-3);
    let hi = (best.mu + MU_GRID_STEP).min(cfg.mu_max);
    let mut failure = None;
    let (mu, rate) = golden_section_max(
        |mu| match rate_at(channel, cfg, distance_km, mu) {
            Ok(r) => r,
            Err(e) => {
                failure = Some(e);
                f64::NEG_INFINITY
            }
        },
        lo,
        hi,
        MU_REFINE_TOL,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if rate > best.rate {
        best = MuOptimum { mu, rate };
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceLimit {
    pub km: f64,
    /// False when no positive rate exists even at zero distance.
    pub positive_at_zero: bool,
}

/// Longest fiber the forward scan will explore.
pub const DISTANCE_SCAN_LIMIT_KM: f64 = 1000.0;

/// Largest distance with a positive key rate, for any monotone-in-distance
/// rate function. A 1 km forward scan brackets the zero crossing and
/// bisection narrows it to `tol_km`.
pub fn max_positive_distance<F>(mut rate: F, tol_km: f64) -> Result<DistanceLimit>
where
    F: FnMut(f64) -> Result<f64>,
{
    if rate(0.0)? <= 0.0 {
        return Ok(DistanceLimit { km: 0.0, positive_at_zero: false });
    }
    let mut lo = 0.0;
    loop {
        let next = lo + 1.0;
        if next > DISTANCE_SCAN_LIMIT_KM {
            return Ok(DistanceLimit { km: lo, positive_at_zero: true });
        }
        if rate(next)? <= 0.0 {
            break;
        }
        lo = next;
    }
    let mut hi = lo + 1.0;
    while hi - lo > tol_km {
        let mid = 0.5 * (lo + hi);
        if rate(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DistanceLimit { km: lo, positive_at_zero: true })
}

/// Resolution of [`max_secure_distance`].
pub const DISTANCE_TOL_KM: f64 = 0.01;

/// Maximal secure distance of a scheme with the intensity optimized (or
/// fixed) per distance.
pub fn max_secure_distance(channel: &ChannelParams, cfg: &SchemeConfig) -> Result<DistanceLimit> {
    max_positive_distance(|d| Ok(optimize_mu(channel, cfg, d)?.rate), DISTANCE_TOL_KM)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use approx::assert_relative_eq;

    #[test]
    fn scheme_names() {
        for s in ["oneway", "bsteps:0", "bsteps:4", "recurrence"] {
            assert_eq!(s.parse::<Scheme>().unwrap().to_string(), s);
        }
        assert!("bsteps:9".parse::<Scheme>().is_err());
        assert!("bsteps".parse::<Scheme>().is_err());
        assert!("twoway".parse::<Scheme>().is_err());
    }

    #[test]
    fn residue_examples() {
        assert_eq!(gllp_residue(0.0, &[(1.0, 0.0)], 1.0), 1.0);
        // 0.9 (1 - H2(0.05)) - 1.22 H2(0.05)
        assert_relative_eq!(gllp_residue(0.05, &[(0.9, 0.05)], 1.22), 0.292_838_450_914, max_relative = 1e-10);
        assert!(gllp_residue_raw(0.3, &[(0.5, 0.3)], 1.22) < 0.0);
        assert_eq!(gllp_residue(0.3, &[(0.5, 0.3)], 1.22), 0.0);
    }

    #[test]
    fn asymptotic_examples() {
        let gys = ChannelParams::gys();
        let est = asymptotic_estimates(&gys, 0.48, 100.0).unwrap();
        assert_relative_eq!(est.e1, 0.035_210_511, max_relative = 1e-7);
        assert_relative_eq!(est.q_mu, 1.732_601_8e-4, max_relative = 1e-7);

        let clean = ChannelParams::new(0.2, 0.1, 0.0, 0.0).unwrap();
        let est = asymptotic_estimates(&clean, 0.5, 10.0).unwrap();
        assert_eq!(est.e1, 0.0);
        assert_eq!(est.e_mu, 0.0);

        // Distance where the single-photon error rate reaches 1/4.
        let eta_star = 0.25 * gys.y0 / (0.25 - gys.e_d);
        let d_star = -10.0 / gys.alpha_db_per_km * libm::log10(eta_star / gys.eta_bob);
        let est = asymptotic_estimates(&gys, 0.5, d_star).unwrap();
        assert_relative_eq!(est.e1, 0.25, max_relative = 1e-9);
    }

    #[test]
    fn practical_example() {
        let (mu, nu) = (0.5, 0.1);
        let obs = DecoyObservation {
            mu,
            nu,
            q_mu: 0.01 * exp(-mu),
            e_mu: 0.03,
            q_nu: 0.002 * exp(-nu),
            e_nu: 1e-4 / 0.002,
            y0: 1e-5,
            e0: 0.5,
        };
        let est = practical_bounds(&obs).unwrap();
        let y1 = est.q1 / (mu * exp(-mu));
        assert_relative_eq!(y1, 0.019_88, max_relative = 1e-10);
        assert_relative_eq!(est.q1, 6.029e-3, max_relative = 1e-3);
        assert_relative_eq!(est.e1, 0.047_786_7, max_relative = 1e-5);
        assert!(!est.clamped);

        let zero_err = DecoyObservation { e_nu: 0.0, y0: 0.0, ..obs };
        assert_eq!(practical_bounds(&zero_err).unwrap().e1, 0.0);

        assert!(practical_bounds(&DecoyObservation { nu: 0.5, ..obs }).is_err());
    }

    #[test]
    fn practical_clamps_negative_yield() {
        let obs =
            DecoyObservation { mu: 0.5, nu: 0.1, q_mu: 0.5, e_mu: 0.03, q_nu: 1e-6, e_nu: 0.1, y0: 1e-5, e0: 0.5 };
        let est = practical_bounds(&obs).unwrap();
        assert!(est.clamped);
        assert_eq!(est.q1, 0.0);
    }

    #[test]
    fn oneway_perfect_channel() {
        let est = DecoyEstimates {
            q_mu: 0.3,
            e_mu: 0.0,
            q0: 0.0,
            q1: 0.3,
            e1: 0.0,
            mode: EstimateMode::Asymptotic,
            clamped: false,
        };
        let cfg = SchemeConfig::new(Scheme::OneWay);
        assert_eq!(oneway_rate(&est, &cfg), 0.5 * 0.3);
    }

    #[test]
    fn noiseless_mu_optimum_at_upper_edge() {
        let ch = ChannelParams::new(0.0, 1.0, 0.0, 0.0).unwrap();
        let cfg = SchemeConfig::new(Scheme::OneWay);
        let opt = optimize_mu(&ch, &cfg, 0.0).unwrap();
        assert!((opt.mu - 1.0).abs() < 1e-3, "{opt:?}");
        let r_half = rate_at(&ch, &cfg, 0.0, 0.5).unwrap();
        assert!(opt.rate > r_half);
    }

    #[test]
    fn mu_optimum_dominates_grid() {
        let gys = ChannelParams::gys();
        let cfg = SchemeConfig::new(Scheme::OneWay);
        let opt = optimize_mu(&gys, &cfg, 100.0).unwrap();
        for k in 1..=100 {
            let r = rate_at(&gys, &cfg, 100.0, k as f64 * 0.01).unwrap();
            assert!(opt.rate >= r);
        }
        assert_eq!(optimize_mu(&gys, &cfg, 160.0).unwrap().rate, 0.0);
    }

    #[test]
    fn fixed_mu_policy() {
        let gys = ChannelParams::gys();
        let mut cfg = SchemeConfig::new(Scheme::OneWay);
        cfg.mu_policy = MuPolicy::Fixed(0.48);
        let opt = optimize_mu(&gys, &cfg, 50.0).unwrap();
        assert_eq!(opt.mu, 0.48);
        assert_eq!(opt.rate, rate_at(&gys, &cfg, 50.0, 0.48).unwrap());
    }

    #[test]
    fn oneway_monotone_in_single_photon_inputs() {
        let cfg = SchemeConfig::new(Scheme::OneWay);
        let base = asymptotic_estimates(&ChannelParams::gys(), 0.5, 60.0).unwrap();
        let r0 = oneway_rate(&base, &cfg);
        assert!(oneway_rate(&DecoyEstimates { e1: base.e1 * 1.2, ..base }, &cfg) <= r0);
        assert!(oneway_rate(&DecoyEstimates { q1: base.q1 * 0.8, ..base }, &cfg) <= r0);
    }
}
