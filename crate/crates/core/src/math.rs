//! Scalar helpers shared by every module: binary entropy, Poisson weights and
//! the two one-dimensional searches (bisection, golden section).

/// Tolerance used when clamping probabilities that drifted outside `[0, 1]`
/// through renormalization round-off.
pub const PROB_TOL: f64 = 1e-12;

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

/// Binary Shannon entropy in bits.
///
/// `H2(0) = H2(1) = 0`. Arguments within [`PROB_TOL`] of the unit interval
/// are clamped; anything further out is treated the same way, so the caller
/// must validate genuinely out-of-range inputs itself.
pub fn h2(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * log2(x) - (1.0 - x) * log2(1.0 - x)
}

/// `weight * H2(num / den)`, with the `0 * H2(0/0) = 0` convention when the
/// denominator vanishes.
pub fn weighted_h2(weight: f64, num: f64, den: f64) -> f64 {
    if den <= 0.0 || weight == 0.0 {
        0.0
    } else {
        weight * h2(num / den)
    }
}

/// Clamp a probability that should lie in `[0, 1]`.
pub fn clamp_prob(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Poisson probability `mu^i e^{-mu} / i!`.
pub fn poisson(mu: f64, i: u32) -> f64 {
    let mut p = exp(-mu);
    for k in 1..=i {
        p *= mu / f64::from(k);
    }
    p
}

/// Root of a monotone function on `[lo, hi]` by bisection.
///
/// `f(lo)` and `f(hi)` are assumed to bracket a sign change. Stops once the
/// bracket is narrower than `tol` or after 200 halvings.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Maximizer of a unimodal function on `[lo, hi]` by golden-section search.
/// Returns `(argmax, max)`.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
