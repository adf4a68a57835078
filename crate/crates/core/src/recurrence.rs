//! One round of recurrence (BXOR onto borrowed perfect pairs, syndromes
//! learned by hashing) followed by hashing, for an ideal single-photon source
//! and for the three-population decoy source.
//!
//! Both parity outcomes feed privacy amplification. For the decoy source the
//! vacuum (V), single-photon (S) and multi-photon (M) populations are
//! combined pairwise; only pairs involving S contribute, and the remaining
//! free parameter `a = q11` of the S population is fixed at its worst case
//! by maximizing `F_a`.

use crate::decoy::{DecoyEstimates, SchemeConfig};
use crate::math::{bisect, golden_section_max, h2, ln, weighted_h2};
use crate::{Error, Result};

/// Bit error rate, phase error rate and `q11` of one input population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRates {
    pub delta_b: f64,
    pub delta_p: f64,
    pub q11: f64,
}

impl PairRates {
    pub fn new(delta_b: f64, delta_p: f64, q11: f64) -> Self {
        Self { delta_b, delta_p, q11 }
    }
}

/// Probability that control and target show even parity.
pub fn parity_prob(delta_b_c: f64, delta_b_t: f64) -> f64 {
    (1.0 - delta_b_c) * (1.0 - delta_b_t) + delta_b_c * delta_b_t
}

/// Phase-error entropy of a population split by its known bit syndrome:
/// `(1-db) H2((dp - q11)/(1-db))` and `db H2(q11/db)`.
fn split_entropies(r: &PairRates) -> (f64, f64) {
    (weighted_h2(1.0, r.delta_p - r.q11, 1.0 - r.delta_b), weighted_h2(1.0, r.q11, r.delta_b))
}

/// Privacy-amplification residue of the even-parity outcome.
pub fn k_even(c: &PairRates, t: &PairRates) -> f64 {
    let (hc0, hc1) = split_entropies(c);
    let (ht0, ht1) = split_entropies(t);
    let both_clean = (1.0 - c.delta_b) * (1.0 - t.delta_b);
    let both_flip = c.delta_b * t.delta_b;
    parity_prob(c.delta_b, t.delta_b) - 0.5 * both_clean * (hc0 + ht0) - 0.5 * both_flip * (hc1 + ht1)
}

/// Privacy-amplification residue of the odd-parity outcome, where the target
/// is measured to reveal the control syndrome.
pub fn k_odd(c: &PairRates, t: &PairRates) -> f64 {
    let (hc0, hc1) = split_entropies(c);
    0.5 * (1.0 - c.delta_b) * t.delta_b * (1.0 - hc0) + 0.5 * c.delta_b * (1.0 - t.delta_b) * (1.0 - hc1)
}

/// Total privacy-amplification residue `K = K_even + K_odd`, written out in
/// its simplified form.
pub fn privacy_residue_generic(c: &PairRates, t: &PairRates) -> f64 {
    let (bc, bt) = (c.delta_b, t.delta_b);
    let (hc0, hc1) = split_entropies(c);
    let (ht0, ht1) = split_entropies(t);
    1.0 - 0.5 * (1.0 - bc) * bt
        - 0.5 * bc * (1.0 - bt)
        - 0.5 * (1.0 - bc) * hc0
        - 0.5 * bc * hc1
        - 0.5 * (1.0 - bc) * (1.0 - bt) * ht0
        - 0.5 * bc * bt * ht1
}

/// Error-correction and parity-check cost for one recurrence round:
/// `(1/2) f_pc H2(pS) + (1/2) pS f_ec H2(dbC dbT / pS)`.
pub fn recurrence_cost(delta_b_c: f64, delta_b_t: f64, f_parity: f64, f_ec: f64) -> f64 {
    let p_s = parity_prob(delta_b_c, delta_b_t);
    0.5 * f_parity * h2(p_s) + 0.5 * p_s * f_ec * weighted_h2(1.0, delta_b_c * delta_b_t, p_s)
}

/// Residue of one recurrence round on a single-photon source at given `q11`
/// values (no clamping).
pub fn single_photon_residue_at(c: &PairRates, t: &PairRates) -> f64 {
    -recurrence_cost(c.delta_b, t.delta_b, 1.0, 1.0) + privacy_residue_generic(c, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePhotonRecurrence {
    /// Residue with `K` at its minimum over the free `q11` values.
    pub residue: f64,
    pub q11_c: f64,
    pub q11_t: f64,
    /// `q * max(0, residue)`.
    pub rate: f64,
}

/// Grid points per axis of the `q11` minimization.
pub const Q11_GRID: usize = 101;

/// Recurrence key rate for an ideal single-photon source, with `K`
/// minimized over `q11C in [0, min(dbC, dpC)]` and `q11T` likewise.
///
/// `K` separates into a convex function of each `q11`, so the 101 x 101 grid
/// is searched per axis and each axis refined by golden section.
pub fn recurrence_rate_single_photon(
    delta_b_c: f64,
    delta_b_t: f64,
    delta_p_c: f64,
    delta_p_t: f64,
    q: f64,
) -> Result<SinglePhotonRecurrence> {
    for r in [delta_b_c, delta_b_t, delta_p_c, delta_p_t] {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Domain("error rates must lie in [0, 1]"));
        }
    }
    let c_max = delta_b_c.min(delta_p_c);
    let t_max = delta_b_t.min(delta_p_t);
    let k_at = |qc: f64, qt: f64| {
        privacy_residue_generic(&PairRates::new(delta_b_c, delta_p_c, qc), &PairRates::new(delta_b_t, delta_p_t, qt))
    };
    let grid = |k: usize, max: f64| max * k as f64 / (Q11_GRID - 1) as f64;
    let mut best = (0.0, 0.0, f64::INFINITY);
    for i in 0..Q11_GRID {
        for j in 0..Q11_GRID {
            let (qc, qt) = (grid(i, c_max), grid(j, t_max));
            let k = k_at(qc, qt);
            if k < best.2 {
                best = (qc, qt, k);
            }
        }
    }
    let (mut qc, mut qt, mut k_min) = best;
    let cell = |max: f64| max / (Q11_GRID - 1) as f64;
    if c_max > 0.0 {
        let lo = (qc - cell(c_max)).max(0.0);
        let hi = (qc + cell(c_max)).min(c_max);
        let (x, neg_k) = golden_section_max(|x| -k_at(x, qt), lo, hi, 1e-12 * c_max.max(1e-300));
        if -neg_k < k_min {
            qc = x;
            k_min = -neg_k;
        }
    }
    if t_max > 0.0 {
        let lo = (qt - cell(t_max)).max(0.0);
        let hi = (qt + cell(t_max)).min(t_max);
        let (x, neg_k) = golden_section_max(|x| -k_at(qc, x), lo, hi, 1e-12 * t_max.max(1e-300));
        if -neg_k < k_min {
            qt = x;
            k_min = -neg_k;
        }
    }
    let residue = -recurrence_cost(delta_b_c, delta_b_t, 1.0, 1.0) + k_min;
    Ok(SinglePhotonRecurrence { residue, q11_c: qc, q11_t: qt, rate: q * residue.max(0.0) })
}

/// Fractions and error rates of the vacuum, single and multi-photon parts of
/// the sifted key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecurrenceInputs {
    pub omega_v: f64,
    pub omega: f64,
    pub omega_m: f64,
    pub e1: f64,
    pub e_m: f64,
    /// Overall QBER.
    pub delta: f64,
}

/// Multi-photon error rate implied by the overall QBER constraint
/// `omega_v/2 + e1 omega + e_m omega_m = delta`.
///
/// Clamped into `[0, 1/2]`; the flag reports clamping.
pub fn multi_error_from_qber(omega_v: f64, omega: f64, e1: f64, delta: f64) -> Result<(f64, bool)> {
    let omega_m = 1.0 - omega_v - omega;
    let residual = delta - 0.5 * omega_v - e1 * omega;
    if omega_m <= 1e-15 {
        if residual.abs() <= 1e-12 {
            return Ok((0.0, false));
        }
        return Err(Error::Inconsistent("no multi-photon fraction left to carry the residual QBER"));
    }
    let e_m = residual / omega_m;
    let clamped_e_m = e_m.clamp(0.0, 0.5);
    Ok((clamped_e_m, clamped_e_m != e_m))
}

/// `F_a = D1 (1-e1) H2((e1-a)/(1-e1)) + D2 e1 H2(a/e1)`.
pub fn f_a(a: f64, e1: f64, d1: f64, d2: f64) -> f64 {
    d1 * (1.0 - e1) * h2((e1 - a) / (1.0 - e1)) + d2 * e1 * h2(a / e1)
}

/// Edge of the bracket kept away from the logarithmic singularities.
pub const F_A_EDGE: f64 = 1e-12;

/// Worst case of the free single-photon parameter `a in [0, e1]`: the
/// maximizer of the concave `F_a`, found as the root of its (decreasing)
/// derivative by bisection. Returns `(a_star, F(a_star))`.
pub fn maximize_f_a(e1: f64, d1: f64, d2: f64) -> Result<(f64, f64)> {
    if !(0.0..=0.5).contains(&e1) {
        return Err(Error::Domain("e1 must lie in [0, 1/2]"));
    }
    if !(d1 >= 0.0 && d2 >= 0.0) {
        return Err(Error::Domain("D1 and D2 must be non-negative"));
    }
    if e1 == 0.0 {
        return Ok((0.0, 0.0));
    }
    // dF/da up to the positive factor 1/ln 2.
    let slope = |a: f64| d1 * ln((e1 - a) / (1.0 - 2.0 * e1 + a)) + d2 * ln((e1 - a) / a);
    let lo = F_A_EDGE.min(0.5 * e1);
    let hi = e1 - lo;
    let (s_lo, s_hi) = (slope(lo), slope(hi));
    let a_star = if s_lo <= 0.0 {
        lo
    } else if s_hi >= 0.0 {
        hi
    } else {
        bisect(slope, lo, hi, 1e-16)
    };
    Ok((a_star, f_a(a_star, e1, d1, d2)))
}

/// Constants of the worst-case residue bound and its value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecurrenceBound {
    pub b: f64,
    pub c: f64,
    pub d1: f64,
    pub d2: f64,
    pub a_star: f64,
    pub f_star: f64,
    /// `-B + C - F(a_star)`, unclamped.
    pub residue: f64,
}

/// Lower bound on the recurrence residue for the V/S/M source, tight at
/// `q11^V = 1/4`, `q11^M = e_M/2`.
///
/// `ec_on_parity_check` selects whether the `H2(pS)` sacrifice carries the
/// `f_ec` factor.
pub fn recurrence_residue_bound(
    inp: &RecurrenceInputs,
    f_ec: f64,
    ec_on_parity_check: bool,
) -> Result<RecurrenceBound> {
    let RecurrenceInputs { omega_v, omega, omega_m, e1, e_m, delta } = *inp;
    let f_parity = if ec_on_parity_check { f_ec } else { 1.0 };
    let b = recurrence_cost(delta, delta, f_parity, f_ec);
    let vs = omega_v * omega;
    let ss = omega * omega;
    let sm = omega * omega_m;
    let c = 0.75 * vs + ss * (1.0 - e1 + e1 * e1) + 0.5 * sm * (2.0 - e1 - e_m + 2.0 * e1 * e_m);
    let d1 = 0.75 * vs + 0.5 * ss * (2.0 - e1) + 0.5 * sm * (2.0 - e_m);
    let d2 = 0.75 * vs + 0.5 * ss * (1.0 + e1) + 0.5 * sm * (e_m + 1.0);
    let (a_star, f_star) = maximize_f_a(e1, d1, d2)?;
    Ok(RecurrenceBound { b, c, d1, d2, a_star, f_star, residue: -b + c - f_star })
}

/// Decompose decoy estimates into the V/S/M populations.
pub fn recurrence_inputs(est: &DecoyEstimates) -> Result<(RecurrenceInputs, bool)> {
    if !(est.q_mu > 0.0) {
        return Err(Error::Domain("overall gain must be positive"));
    }
    let omega_v = est.q0 / est.q_mu;
    let omega = est.q1 / est.q_mu;
    let omega_m = (1.0 - omega_v - omega).max(0.0);
    let (e_m, clamped) = multi_error_from_qber(omega_v, omega, est.e1, est.e_mu)?;
    Ok((RecurrenceInputs { omega_v, omega, omega_m, e1: est.e1, e_m, delta: est.e_mu }, clamped))
}

/// Key rate per signal pulse of the decoy + recurrence scheme.
pub fn recurrence_rate(est: &DecoyEstimates, cfg: &SchemeConfig) -> Result<f64> {
    if est.q1 <= 0.0 || est.q_mu <= 0.0 {
        return Ok(0.0);
    }
    let (inp, _) = recurrence_inputs(est)?;
    let bound = recurrence_residue_bound(&inp, cfg.f_ec, cfg.ec_on_parity_check)?;
    Ok(cfg.q_sift * est.q_mu * bound.residue.max(0.0))
}

/// Closed forms of the privacy-amplification residue for the five
/// population pairings that involve a single-photon qubit, and their lower
/// bounds after eliminating `q11^V` and `q11^M`. Control is written first.
pub mod cases {
    use crate::math::h2;

    fn hx(e1: f64, a: f64) -> f64 {
        h2((e1 - a) / (1.0 - e1))
    }

    fn hy(e1: f64, a: f64) -> f64 {
        if e1 > 0.0 {
            h2(a / e1)
        } else {
            0.0
        }
    }

    pub fn k_vs(e1: f64, a: f64, q11_v: f64) -> f64 {
        1.0 - 0.25
            - 0.25 * h2(1.0 - 2.0 * q11_v)
            - 0.25 * h2(2.0 * q11_v)
            - 0.25 * (1.0 - e1) * hx(e1, a)
            - 0.25 * e1 * hy(e1, a)
    }

    pub fn k_vs_bound(e1: f64, a: f64) -> f64 {
        0.25 - 0.25 * (1.0 - e1) * hx(e1, a) - 0.25 * e1 * hy(e1, a)
    }

    pub fn k_sv(e1: f64, a: f64, q11_v: f64) -> f64 {
        1.0 - 0.25
            - 0.5 * (1.0 - e1) * hx(e1, a)
            - 0.5 * e1 * hy(e1, a)
            - 0.25 * (1.0 - e1) * h2(1.0 - 2.0 * q11_v)
            - 0.25 * e1 * h2(2.0 * q11_v)
    }

    pub fn k_sv_bound(e1: f64, a: f64) -> f64 {
        0.5 - 0.5 * (1.0 - e1) * hx(e1, a) - 0.5 * e1 * hy(e1, a)
    }

    pub fn k_ss(e1: f64, a: f64) -> f64 {
        1.0 - e1 * (1.0 - e1)
            - 0.5 * (1.0 - e1) * hx(e1, a)
            - 0.5 * e1 * hy(e1, a)
            - 0.5 * (1.0 - e1) * (1.0 - e1) * hx(e1, a)
            - 0.5 * e1 * e1 * hy(e1, a)
    }

    fn hm(e_m: f64, q11_m: f64) -> (f64, f64) {
        let h0 = h2((1.0 - 2.0 * q11_m) / (2.0 - 2.0 * e_m));
        let h1 = if e_m > 0.0 { h2(q11_m / e_m) } else { 0.0 };
        (h0, h1)
    }

    pub fn k_sm(e1: f64, a: f64, e_m: f64, q11_m: f64) -> f64 {
        let (h0, h1) = hm(e_m, q11_m);
        1.0 - 0.5 * e1 * (1.0 - e_m)
            - 0.5 * e_m * (1.0 - e1)
            - 0.5 * (1.0 - e1) * hx(e1, a)
            - 0.5 * e1 * hy(e1, a)
            - 0.5 * (1.0 - e1) * (1.0 - e_m) * h0
            - 0.5 * e1 * e_m * h1
    }

    pub fn k_sm_bound(e1: f64, a: f64) -> f64 {
        0.5 - 0.5 * (1.0 - e1) * hx(e1, a) - 0.5 * e1 * hy(e1, a)
    }

    pub fn k_ms(e1: f64, a: f64, e_m: f64, q11_m: f64) -> f64 {
        let (h0, h1) = hm(e_m, q11_m);
        1.0 - 0.5 * e_m * (1.0 - e1)
            - 0.5 * e1 * (1.0 - e_m)
            - 0.5 * (1.0 - e_m) * h0
            - 0.5 * e_m * h1
            - 0.5 * (1.0 - e1) * (1.0 - e_m) * hx(e1, a)
            - 0.5 * e1 * e_m * hy(e1, a)
    }

    pub fn k_ms_bound(e1: f64, a: f64, e_m: f64) -> f64 {
        0.5 - 0.5 * e_m * (1.0 - e1)
            - 0.5 * e1 * (1.0 - e_m)
            - 0.5 * (1.0 - e1) * (1.0 - e_m) * hx(e1, a)
            - 0.5 * e1 * e_m * hy(e1, a)
    }
}
