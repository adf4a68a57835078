//! Tolerable error-rate region of B/P-step distillation followed by hashing.
//!
//! For an observed `(delta_b, delta_p)` the least favourable input is
//! `(1 - db - dp, db, 0, dp)`. A point is secure when some sequence of at
//! most `max_steps` B/P steps leaves a state with positive hashing rate.
//! Sequences are searched breadth-first so the witness is the shortest one,
//! ties broken lexicographically with `B < P`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::edp::{b_step, hashing_rate, p_step, BellDiagonal};
use crate::{Error, Result};

/// Default search depth for B/P sequences.
pub const DEFAULT_MAX_STEPS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Step {
    B,
    P,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct StepSequence(pub Vec<Step>);

impl StepSequence {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn steps(&self) -> &[Step] {
        &self.0
    }

    /// The sequence indexed by `bits` at depth `len`: bit `len-1-k` of
    /// `bits` selects step `k`, `0` for B and `1` for P.
    fn from_bits(bits: u32, len: usize) -> Self {
        Self((0..len).map(|k| if (bits >> (len - 1 - k)) & 1 == 0 { Step::B } else { Step::P }).collect())
    }
}

impl fmt::Display for StepSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            f.write_str(match s {
                Step::B => "B",
                Step::P => "P",
            })?;
        }
        Ok(())
    }
}

impl FromStr for StepSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                'B' | 'b' => Ok(Step::B),
                'P' | 'p' => Ok(Step::P),
                _ => Err(Error::Domain("step sequences use only the letters B and P")),
            })
            .collect::<Result<Vec<_>>>()
            .map(StepSequence)
    }
}

fn apply_step(state: &BellDiagonal, step: Step) -> Result<(BellDiagonal, f64)> {
    match step {
        Step::B => {
            let (p_s, out) = b_step(state, state)?;
            Ok((out, 0.5 * p_s))
        }
        Step::P => Ok((p_step(state), 1.0 / 3.0)),
    }
}

/// Run a B/P sequence on identical copies of `state`.
///
/// Returns the output state and the yield factor: `p_s / 2` per B step and
/// `1/3` per P step.
pub fn apply_sequence(state: &BellDiagonal, seq: &StepSequence) -> Result<(BellDiagonal, f64)> {
    seq.0.iter().try_fold((*state, 1.0), |(s, y), &step| {
        let (next, factor) = apply_step(&s, step)?;
        Ok((next, y * factor))
    })
}

/// Hashing rates at or below this are treated as zero.
///
/// Near the boundary the best sequences drive the state towards a separable
/// mixture such as `(1/2, 0, 0, 1/2)` and the rate left over decays
/// geometrically with distance from the boundary; rates smaller than the
/// unit round-off of the state components are not resolved.
pub const HASHING_EPS: f64 = f64::EPSILON;

fn hashing_positive(state: &BellDiagonal) -> bool {
    hashing_rate(state) > HASHING_EPS
}

/// Search every B/P sequence of length `0..=max_steps` for one that makes the
/// worst-case state distillable.
///
/// Returns `Ok(None)` when none does. Points with `db + dp >= 1/2` are
/// separable and always reported insecure. Points with `db > dp` or negative
/// rates are outside the searched regime.
pub fn secure_with_some_sequence(delta_b: f64, delta_p: f64, max_steps: usize) -> Result<Option<StepSequence>> {
    if !(delta_b >= 0.0 && delta_p >= 0.0) {
        return Err(Error::Domain("error rates must be non-negative"));
    }
    if delta_b > delta_p {
        return Err(Error::Domain("searched regime requires delta_b <= delta_p"));
    }
    if delta_b + delta_p >= 0.5 {
        return Ok(None);
    }
    if max_steps > 31 {
        return Err(Error::Domain("max_steps above 31 is not supported"));
    }
    let start = BellDiagonal::worst_case(delta_b, delta_p)?;
    if hashing_positive(&start) {
        return Ok(Some(StepSequence::empty()));
    }
    // Level k holds the 2^k states in lexicographic order of their sequence.
    let mut level = alloc::vec![start];
    for depth in 1..=max_steps {
        let mut next = Vec::with_capacity(level.len() * 2);
        for s in &level {
            next.push(apply_step(s, Step::B)?.0);
            next.push(apply_step(s, Step::P)?.0);
        }
        if let Some(idx) = next.iter().position(hashing_positive) {
            return Ok(Some(StepSequence::from_bits(idx as u32, depth)));
        }
        level = next;
    }
    Ok(None)
}

/// Largest `delta` such that `delta_b = delta_p = delta` is secure with at
/// most `max_steps` steps, located by bisection to within `tol`.
///
/// Security is assumed monotone along the diagonal; [`region_grid`] gives the
/// empirical check.
pub fn diagonal_threshold(max_steps: usize, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive"));
    }
    let (mut lo, mut hi) = (0.0_f64, 0.25_f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if secure_with_some_sequence(mid, mid, max_steps)?.is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionPoint {
    pub delta_b: f64,
    pub delta_p: f64,
    pub secure: bool,
    pub witness: Option<StepSequence>,
}

/// Evaluate one point of the `(delta_b, delta_p)` plane.
pub fn region_point(delta_b: f64, delta_p: f64, max_steps: usize) -> Result<RegionPoint> {
    let witness = secure_with_some_sequence(delta_b, delta_p, max_steps)?;
    Ok(RegionPoint { delta_b, delta_p, secure: witness.is_some(), witness })
}

/// Grid coordinates of the searched regime (`db <= dp`, `db + dp < 1/2`) at
/// spacing `step`, in row-major order (`db` outer).
pub fn region_grid(step: f64) -> Result<Vec<(f64, f64)>> {
    if !(step > 0.0 && step <= 0.25) {
        return Err(Error::Domain("grid step must lie in (0, 0.25]"));
    }
    let n = libm::round(0.5 / step) as usize;
    let mut pts = Vec::new();
    for i in 0..=n {
        let db = i as f64 * step;
        for j in i..=n {
            let dp = j as f64 * step;
            if db + dp < 0.5 - 1e-15 {
                pts.push((db, dp));
            }
        }
    }
    Ok(pts)
}

/// Upper edge of the secure region in one row: the largest `delta_p >= db`
/// that is still secure, refined by bisection to `tol`. `None` when the
/// diagonal point itself is insecure.
pub fn row_boundary(delta_b: f64, max_steps: usize, tol: f64) -> Result<Option<f64>> {
    if secure_with_some_sequence(delta_b, delta_b, max_steps)?.is_none() {
        return Ok(None);
    }
    let (mut lo, mut hi) = (delta_b, 0.5 - delta_b);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if secure_with_some_sequence(delta_b, mid, max_steps)?.is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Witness column text: `-` for the empty sequence, empty when insecure.
pub fn witness_label(w: &Option<StepSequence>) -> String {
    use alloc::string::ToString;
    match w {
        None => String::new(),
        Some(s) if s.is_empty() => "-".to_string(),
        Some(s) => s.to_string(),
    }
}
