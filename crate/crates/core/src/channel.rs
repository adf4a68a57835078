//! Fiber channel model: transmittance, photon-number resolved yields and
//! error rates, and the overall gain and QBER of a Poissonian source.

use crate::math::{poisson, pow};
use crate::{Error, Result};

/// How the yield of an `i`-photon state combines signal and background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum YieldModel {
    /// `Y_i = Y0 + eta_i`, valid while both terms are small. Every reported
    /// figure uses this form.
    #[default]
    Approximate,
    /// `Y_i = Y0 + eta_i - Y0 * eta_i`.
    Exact,
}

/// Physical parameters of the link and receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Fiber loss in dB/km.
    pub alpha_db_per_km: f64,
    /// Receiver-side transmittance including detector efficiency.
    pub eta_bob: f64,
    /// Probability that a photon hits the wrong detector.
    pub e_d: f64,
    /// Background (dark count) probability per pulse.
    pub y0: f64,
    /// Error rate of background counts.
    pub e0: f64,
    pub yield_model: YieldModel,
}

impl ChannelParams {
    pub fn new(alpha_db_per_km: f64, eta_bob: f64, e_d: f64, y0: f64) -> Result<Self> {
        let p = Self { alpha_db_per_km, eta_bob, e_d, y0, e0: 0.5, yield_model: YieldModel::Approximate };
        p.validate()?;
        Ok(p)
    }

    /// The 1550 nm fiber experiment parameters: 0.21 dB/km, 4.5 % receiver
    /// transmittance, 3.3 % misalignment, 1.7e-6 background.
    pub fn gys() -> Self {
        Self {
            alpha_db_per_km: 0.21,
            eta_bob: 0.045,
            e_d: 0.033,
            y0: 1.7e-6,
            e0: 0.5,
            yield_model: YieldModel::Approximate,
        }
    }

    pub fn with_e0(mut self, e0: f64) -> Result<Self> {
        self.e0 = e0;
        self.validate()?;
        Ok(self)
    }

    pub fn with_yield_model(mut self, model: YieldModel) -> Self {
        self.yield_model = model;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_db_per_km >= 0.0 && self.alpha_db_per_km.is_finite()) {
            return Err(Error::Domain("alpha must be a non-negative finite loss"));
        }
        if !(self.eta_bob > 0.0 && self.eta_bob <= 1.0) {
            return Err(Error::Domain("eta_bob must lie in (0, 1]"));
        }
        if !(self.e_d >= 0.0 && self.e_d < 0.5) {
            return Err(Error::Domain("e_d must lie in [0, 0.5)"));
        }
        if !(self.y0 >= 0.0 && self.y0 < 1.0) {
            return Err(Error::Domain("y0 must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.e0) {
            return Err(Error::Domain("e0 must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Yield of a class whose signal transmittance is `eta_i`.
    pub fn yield_for(&self, eta_i: f64) -> f64 {
        match self.yield_model {
            YieldModel::Approximate => self.y0 + eta_i,
            YieldModel::Exact => self.y0 + eta_i - self.y0 * eta_i,
        }
    }
}

/// Photon-number resolved statistics for one `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonStats {
    pub i: u32,
    pub eta_i: f64,
    pub y_i: f64,
    pub q_i: f64,
    pub e_i: f64,
}

/// Gain and QBER of all pulses at one intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverallStats {
    pub q_mu: f64,
    pub e_mu: f64,
}

/// Overall transmittance of `distance_km` of fiber followed by the receiver.
pub fn link_transmittance(params: &ChannelParams, distance_km: f64) -> Result<f64> {
    if !(distance_km >= 0.0) {
        return Err(Error::Domain("distance must be non-negative"));
    }
    Ok(params.eta_bob * pow(10.0, -params.alpha_db_per_km * distance_km / 10.0))
}

pub fn photon_number_stats(params: &ChannelParams, eta: f64, mu: f64, i: u32) -> Result<PhotonStats> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain("eta must lie in [0, 1]"));
    }
    if !(mu > 0.0) {
        return Err(Error::Domain("mu must be positive"));
    }
    // 1 - (1 - eta)^i without cancellation for small eta.
    let eta_i = -libm::expm1(f64::from(i) * libm::log1p(-eta));
    let y_i = params.yield_for(eta_i);
    if y_i <= 0.0 {
        return Err(Error::UndefinedErrorRate);
    }
    let q_i = y_i * poisson(mu, i);
    let e_i = (params.e0 * params.y0 + params.e_d * eta_i) / y_i;
    Ok(PhotonStats { i, eta_i, y_i, q_i, e_i })
}

/// Closed-form gain and QBER of a Poissonian source of mean `mu`.
pub fn overall_gain_qber(params: &ChannelParams, eta: f64, mu: f64) -> OverallStats {
    let detect = -libm::expm1(-eta * mu);
    let q_mu = match params.yield_model {
        YieldModel::Approximate => params.y0 + detect,
        YieldModel::Exact => params.y0 + (1.0 - params.y0) * detect,
    };
    let e_mu = if q_mu > 0.0 { (params.e0 * params.y0 + params.e_d * detect) / q_mu } else { params.e0 };
    OverallStats { q_mu, e_mu }
}

/// Number of photon-number terms kept by [`overall_gain_qber_series`].
pub const SERIES_TERMS: u32 = 50;

/// Gain and QBER summed term by term over `i = 0..=SERIES_TERMS`, together
/// with the Poisson tail mass left out (an upper bound on the truncation
/// error of the gain).
pub fn overall_gain_qber_series(params: &ChannelParams, eta: f64, mu: f64) -> Result<(OverallStats, f64)> {
    let mut q = 0.0;
    let mut eq = 0.0;
    let mut mass = 0.0;
    for i in 0..=SERIES_TERMS {
        let s = photon_number_stats(params, eta, mu, i)?;
        q += s.q_i;
        eq += s.e_i * s.q_i;
        mass += poisson(mu, i);
    }
    let tail = (1.0 - mass).max(0.0);
    Ok((OverallStats { q_mu: q, e_mu: eq / q }, tail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn transmittance_examples() {
        let gys = ChannelParams::gys();
        assert_eq!(link_transmittance(&gys, 0.0).unwrap(), 0.045);
        assert_relative_eq!(link_transmittance(&gys, 100.0).unwrap(), 3.5745e-4, max_relative = 1e-4);
        let lossless = ChannelParams::new(0.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(link_transmittance(&lossless, 1234.0).unwrap(), 1.0);
        assert!(link_transmittance(&gys, -1.0).is_err());
    }

    #[test]
    fn single_photon_at_100km() {
        let gys = ChannelParams::gys();
        let eta = link_transmittance(&gys, 100.0).unwrap();
        let s = photon_number_stats(&gys, eta, 0.48, 1).unwrap();
        assert_relative_eq!(s.y_i, 3.5915e-4, max_relative = 1e-4);
        assert_relative_eq!(s.e_i, 0.03521, max_relative = 1e-3);
    }

    #[test]
    fn vacuum_term_is_background_only() {
        let gys = ChannelParams::gys();
        let s = photon_number_stats(&gys, 0.01, 0.5, 0).unwrap();
        assert_eq!(s.eta_i, 0.0);
        assert_eq!(s.y_i, gys.y0);
        assert_eq!(s.e_i, 0.5);
    }

    #[test]
    fn noiseless_single_photon_has_no_errors() {
        let p = ChannelParams::new(0.2, 0.1, 0.0, 0.0).unwrap();
        assert_eq!(photon_number_stats(&p, 0.01, 0.5, 1).unwrap().e_i, 0.0);
        assert_eq!(photon_number_stats(&p, 0.01, 0.5, 0), Err(Error::UndefinedErrorRate));
    }

    #[test]
    fn overall_examples() {
        let gys = ChannelParams::gys();
        let eta = link_transmittance(&gys, 100.0).unwrap();
        let o = overall_gain_qber(&gys, eta, 0.48);
        assert_relative_eq!(o.q_mu, 1.7327e-4, max_relative = 1e-4);
        assert_relative_eq!(o.e_mu, 0.03758, max_relative = 1e-3);

        let o = overall_gain_qber(&gys, 0.0, 0.48);
        assert_eq!(o.q_mu, gys.y0);
        assert_eq!(o.e_mu, 0.5);

        let quiet = ChannelParams::new(0.2, 0.1, 0.02, 0.0).unwrap();
        let o = overall_gain_qber(&quiet, 1e-9, 1e-3);
        assert!(o.q_mu < 1e-11);
        assert_relative_eq!(o.e_mu, 0.02, max_relative = 1e-12);
    }

    #[test]
    fn series_matches_closed_form() {
        let gys = ChannelParams::gys();
        for &d in &[0.0, 50.0, 150.0] {
            let eta = link_transmittance(&gys, d).unwrap();
            for &mu in &[0.05, 0.48, 1.0] {
                let closed = overall_gain_qber(&gys, eta, mu);
                let (series, tail) = overall_gain_qber_series(&gys, eta, mu).unwrap();
                assert!(tail < 1e-12);
                assert!((closed.q_mu - series.q_mu).abs() < 1e-12);
                assert!((closed.e_mu - series.e_mu).abs() < 1e-12, "{d} {mu} {} {}", closed.e_mu, series.e_mu);
            }
        }
    }

    #[test]
    fn exact_yield_is_slightly_lower() {
        let exact = ChannelParams::gys().with_yield_model(YieldModel::Exact);
        let approx = ChannelParams::gys();
        let a = photon_number_stats(&approx, 0.01, 0.5, 2).unwrap();
        let e = photon_number_stats(&exact, 0.01, 0.5, 2).unwrap();
        assert!(e.y_i < a.y_i);
        let (series, _) = overall_gain_qber_series(&exact, 0.01, 0.5).unwrap();
        assert!((series.q_mu - overall_gain_qber(&exact, 0.01, 0.5).q_mu).abs() < 1e-14);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ChannelParams::new(-0.1, 0.5, 0.0, 0.0).is_err());
        assert!(ChannelParams::new(0.2, 0.0, 0.0, 0.0).is_err());
        assert!(ChannelParams::new(0.2, 0.5, 0.5, 0.0).is_err());
        assert!(ChannelParams::new(0.2, 0.5, 0.0, 1.0).is_err());
    }
}
