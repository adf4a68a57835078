//! Bell-diagonal state algebra.
//!
//! A two-qubit state is tracked only through its four Bell-basis
//! probabilities `(q00, q10, q11, q01)`, where the first index is the bit
//! flip and the second the phase flip. Bit error rate is `q10 + q11`, phase
//! error rate `q11 + q01`.

use core::fmt;

use crate::math::{bisect, h2, sqrt};
use crate::{Error, Result};

/// Normalization tolerance for [`BellDiagonal`].
pub const NORM_TOL: f64 = 1e-12;

/// Survival probabilities below this are reported as degenerate.
pub const MIN_SURVIVAL: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellDiagonal {
    pub q00: f64,
    pub q10: f64,
    pub q11: f64,
    pub q01: f64,
}

impl BellDiagonal {
    pub const PERFECT: BellDiagonal = BellDiagonal { q00: 1.0, q10: 0.0, q11: 0.0, q01: 0.0 };

    pub fn new(q00: f64, q10: f64, q11: f64, q01: f64) -> Result<Self> {
        let s = Self { q00, q10, q11, q01 };
        for q in s.to_array() {
            if !(-NORM_TOL..=1.0 + NORM_TOL).contains(&q) {
                return Err(Error::Domain("Bell-diagonal components must lie in [0, 1]"));
            }
        }
        if (s.total() - 1.0).abs() > NORM_TOL {
            return Err(Error::Domain("Bell-diagonal components must sum to 1"));
        }
        Ok(s)
    }

    /// The state with the given error rates and `q11 = 0`, which is the
    /// least favourable completion for B/P-step processing.
    pub fn worst_case(delta_b: f64, delta_p: f64) -> Result<Self> {
        Self::new(1.0 - delta_b - delta_p, delta_b, 0.0, delta_p)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.q00, self.q10, self.q11, self.q01]
    }

    pub fn from_array(q: [f64; 4]) -> Self {
        Self { q00: q[0], q10: q[1], q11: q[2], q01: q[3] }
    }

    pub fn total(&self) -> f64 {
        self.q00 + self.q10 + self.q11 + self.q01
    }

    pub fn rates(&self) -> ErrorRates {
        rates_of(self)
    }
}

impl fmt::Display for BellDiagonal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.q00, self.q10, self.q11, self.q01)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRates {
    pub delta_b: f64,
    pub delta_p: f64,
}

pub fn rates_of(state: &BellDiagonal) -> ErrorRates {
    ErrorRates { delta_b: state.q10 + state.q11, delta_p: state.q11 + state.q01 }
}

/// One-way hashing (CSS) key rate `q (1 - H2(db) - H2(dp))`. Not clamped.
pub fn css_rate(rates: ErrorRates, q: f64) -> f64 {
    q * (1.0 - h2(rates.delta_b) - h2(rates.delta_p))
}

/// `1 - H2(x)` for `x = (1 - t)/2`, accurate when `t` is tiny.
fn entropy_deficit(t: f64) -> f64 {
    let t = t.abs().min(1.0);
    if t == 1.0 {
        return 1.0;
    }
    ((1.0 + t) * libm::log1p(t) + (1.0 - t) * libm::log1p(-t)) / (2.0 * core::f64::consts::LN_2)
}

/// Hashing rate `1 - H2(db) - H2(dp)` of a state, evaluated so that states
/// close to a separable mixture (one error rate near 1/2, the other near 0)
/// keep their small residual rate instead of cancellation noise.
pub fn hashing_rate(state: &BellDiagonal) -> f64 {
    let BellDiagonal { q00, q10, q11, q01 } = *state;
    let r = state.rates();
    // 1 - 2 db and 1 - 2 dp straight from the components.
    let tb = (q00 + q01) - (q10 + q11);
    let tp = (q00 + q10) - (q11 + q01);
    if tb.abs() <= tp.abs() {
        entropy_deficit(tb) - h2(r.delta_p)
    } else {
        entropy_deficit(tp) - h2(r.delta_b)
    }
}

/// B step: bilateral XOR of `control` onto `target`, target measured in Z,
/// control kept when the parities agree.
///
/// Returns the survival probability and the renormalized control state.
pub fn b_step(control: &BellDiagonal, target: &BellDiagonal) -> Result<(f64, BellDiagonal)> {
    let (c, t) = (control, target);
    let p_s = (c.q00 + c.q01) * (t.q00 + t.q01) + (c.q10 + c.q11) * (t.q10 + t.q11);
    if p_s < MIN_SURVIVAL {
        return Err(Error::DegeneratePostselection);
    }
    let out = BellDiagonal {
        q00: (c.q00 * t.q00 + c.q01 * t.q01) / p_s,
        q10: (c.q10 * t.q10 + c.q11 * t.q11) / p_s,
        q11: (c.q10 * t.q11 + c.q11 * t.q10) / p_s,
        q01: (c.q00 * t.q01 + c.q01 * t.q00) / p_s,
    };
    Ok((p_s, out))
}

/// Classical P step: three identical copies combined into their joint parity.
pub fn p_step(state: &BellDiagonal) -> BellDiagonal {
    let BellDiagonal { q00, q10, q11, q01 } = *state;
    let cube = |x: f64| x * x * x;
    BellDiagonal {
        q00: cube(q00) + 3.0 * q00 * q00 * q01 + 3.0 * q10 * q10 * (q00 + q01) + 6.0 * q00 * q10 * q11,
        q10: cube(q10) + 3.0 * q10 * q10 * q11 + 3.0 * q00 * q00 * (q10 + q11) + 6.0 * q00 * q10 * q01,
        q11: cube(q11) + 3.0 * q10 * q11 * q11 + 3.0 * q01 * q01 * (q10 + q11) + 6.0 * q00 * q11 * q01,
        q01: cube(q01) + 3.0 * q00 * q01 * q01 + 3.0 * q11 * q11 * (q00 + q01) + 6.0 * q10 * q11 * q01,
    }
}

/// Largest phase error rate compatible with a source of basis fidelity `F`
/// and an observed bit error rate, capped at 1/2.
///
/// Solves `F = sqrt((1-db)(1-dp)) + sqrt(db dp)` for `dp` on `[db, 1/2]`;
/// the right-hand side equals 1 at `dp = db` and decreases beyond it.
pub fn phase_bound_from_fidelity(fidelity: f64, delta_b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(Error::Domain("fidelity must lie in [0, 1]"));
    }
    if !(0.0..0.5).contains(&delta_b) {
        return Err(Error::Domain("delta_b must lie in [0, 1/2)"));
    }
    let overlap = |dp: f64| sqrt((1.0 - delta_b) * (1.0 - dp)) + sqrt(delta_b * dp);
    if fidelity <= overlap(0.5) {
        return Ok(0.5);
    }
    if fidelity >= 1.0 {
        return Ok(delta_b);
    }
    Ok(bisect(|dp| overlap(dp) - fidelity, delta_b, 0.5, 1e-15))
}
