//! Scheme-independent upper bounds: the distance at which the single-photon
//! error rate reaches 1/4, and the single-photon mutual-information rate.

use crate::channel::ChannelParams;
use crate::decoy::DecoyEstimates;
use crate::math::h2;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceBound {
    Finite(f64),
    /// The single-photon error rate never reaches 1/4.
    Unbounded,
}

/// Transmittance below which `e1 > 1/4` under the approximate yield model:
/// `eta* = (e0 - 1/4) Y0 / (1/4 - e_d)`. `None` when `e1` stays below 1/4
/// for every transmittance.
pub fn critical_transmittance(channel: &ChannelParams) -> Result<Option<f64>> {
    if channel.e_d >= 0.25 {
        return Err(Error::Domain("distance bound is undefined for e_d >= 1/4"));
    }
    let num = (channel.e0 - 0.25) * channel.y0;
    if num <= 0.0 {
        return Ok(None);
    }
    Ok(Some(num / (0.25 - channel.e_d)))
}

/// Fiber length at which the transmittance drops to [`critical_transmittance`].
pub fn distance_upper_bound(channel: &ChannelParams) -> Result<DistanceBound> {
    let eta_star = match critical_transmittance(channel)? {
        None => return Ok(DistanceBound::Unbounded),
        Some(e) => e,
    };
    if eta_star >= channel.eta_bob {
        return Ok(DistanceBound::Finite(0.0));
    }
    if channel.alpha_db_per_km == 0.0 {
        return Ok(DistanceBound::Unbounded);
    }
    // 10^(-alpha d / 10) = eta*/eta_bob
    let decades = libm::log10(channel.eta_bob / eta_star);
    Ok(DistanceBound::Finite(10.0 * decades / channel.alpha_db_per_km))
}

/// `Q1 (1 - H2(e1))`: the key rate if the single-photon signals could be
/// singled out and the key were limited only by Alice-Bob mutual
/// information.
pub fn rate_upper_bound(est: &DecoyEstimates) -> f64 {
    est.q1 * (1.0 - h2(est.e1))
}
