//! Independent checks of the Bell-diagonal transforms.
//!
//! A Bell-diagonal pair is a classical pair of error flags `(bit, phase)`
//! drawn from `(q00, q10, q11, q01)`. Under a bilateral XOR, bit flips travel
//! from control to target and phase flips from target to control. The B and
//! P steps are checked by exact enumeration over flag configurations and by
//! seeded Monte Carlo on sampled flag ensembles.
//!
//! Monte Carlo uses ChaCha8. Samples are split into shards of
//! [`MC_SHARD_SIZE`]; shard `k` draws from stream `k` of the seeded
//! generator, so results do not depend on how shards are scheduled.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::boundary::{apply_sequence, Step, StepSequence};
use crate::edp::{b_step, p_step, BellDiagonal};
use crate::math::sqrt;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlagPair {
    pub bit: bool,
    pub phase: bool,
}

impl FlagPair {
    pub const ALL: [FlagPair; 4] = [
        FlagPair { bit: false, phase: false },
        FlagPair { bit: true, phase: false },
        FlagPair { bit: true, phase: true },
        FlagPair { bit: false, phase: true },
    ];

    /// Position of this flag pair in `BellDiagonal::to_array`.
    pub fn index(self) -> usize {
        match (self.bit, self.phase) {
            (false, false) => 0,
            (true, false) => 1,
            (true, true) => 2,
            (false, true) => 3,
        }
    }
}

/// Exact B step by summing over the 16 control/target flag configurations.
/// The output is renormalized unless nothing survives, in which case it is
/// all zeros.
pub fn enumerate_b(control: &BellDiagonal, target: &BellDiagonal) -> (f64, BellDiagonal) {
    let (c, t) = (control.to_array(), target.to_array());
    let mut out = [0.0; 4];
    for fc in FlagPair::ALL {
        for ft in FlagPair::ALL {
            if fc.bit != ft.bit {
                continue;
            }
            let kept = FlagPair { bit: fc.bit, phase: fc.phase ^ ft.phase };
            out[kept.index()] += c[fc.index()] * t[ft.index()];
        }
    }
    let p_s: f64 = out.iter().sum();
    if p_s > 0.0 {
        for q in &mut out {
            *q /= p_s;
        }
    }
    (p_s, BellDiagonal::from_array(out))
}

fn p_rule(a: FlagPair, b: FlagPair, c: FlagPair) -> FlagPair {
    let phases = u8::from(a.phase) + u8::from(b.phase) + u8::from(c.phase);
    FlagPair { bit: a.bit ^ b.bit ^ c.bit, phase: phases >= 2 }
}

/// Exact P step by summing over the 64 trio configurations.
pub fn enumerate_p(state: &BellDiagonal) -> BellDiagonal {
    let s = state.to_array();
    let mut out = [0.0; 4];
    for a in FlagPair::ALL {
        for b in FlagPair::ALL {
            for c in FlagPair::ALL {
                out[p_rule(a, b, c).index()] += s[a.index()] * s[b.index()] * s[c.index()];
            }
        }
    }
    BellDiagonal::from_array(out)
}

pub const MC_SHARD_SIZE: u64 = 1 << 16;

/// Raw tallies of a Monte Carlo run. Merging is a plain sum.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct McCounts {
    pub samples: u64,
    /// Per step: groups formed and groups that produced an output pair.
    pub groups: Vec<u64>,
    pub accepted: Vec<u64>,
    pub survivors: u64,
    pub bit_errors: u64,
    pub phase_errors: u64,
}

impl McCounts {
    fn zero(steps: usize) -> Self {
        Self { groups: vec![0; steps], accepted: vec![0; steps], ..Self::default() }
    }

    pub fn merge(mut self, other: &McCounts) -> McCounts {
        self.samples += other.samples;
        for (a, b) in self.groups.iter_mut().zip(&other.groups) {
            *a += b;
        }
        for (a, b) in self.accepted.iter_mut().zip(&other.accepted) {
            *a += b;
        }
        self.survivors += other.survivors;
        self.bit_errors += other.bit_errors;
        self.phase_errors += other.phase_errors;
        self
    }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn sample_flag(rng: &mut ChaCha8Rng, cdf: &[f64; 3]) -> FlagPair {
    let u = uniform(rng);
    let idx = cdf.iter().position(|&c| u < c).unwrap_or(3);
    FlagPair::ALL[idx]
}

fn shuffle(rng: &mut ChaCha8Rng, v: &mut [FlagPair]) {
    for i in (1..v.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        v.swap(i, j);
    }
}

/// Number of shards covering `n_samples`.
pub fn shard_count(n_samples: u64) -> u64 {
    n_samples.div_ceil(MC_SHARD_SIZE)
}

/// Run shard `shard` of a Monte Carlo sequence simulation.
pub fn mc_shard(state: &BellDiagonal, seq: &StepSequence, n_samples: u64, seed: u64, shard: u64) -> McCounts {
    let len = MC_SHARD_SIZE.min(n_samples.saturating_sub(shard * MC_SHARD_SIZE));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    let q = state.to_array();
    let cdf = [q[0], q[0] + q[1], q[0] + q[1] + q[2]];
    let mut pop: Vec<FlagPair> = (0..len).map(|_| sample_flag(&mut rng, &cdf)).collect();
    let mut counts = McCounts::zero(seq.len());
    counts.samples = len;
    for (k, step) in seq.steps().iter().enumerate() {
        shuffle(&mut rng, &mut pop);
        let next: Vec<FlagPair> = match step {
            Step::B => {
                counts.groups[k] = (pop.len() / 2) as u64;
                pop.chunks_exact(2)
                    .filter(|g| g[0].bit == g[1].bit)
                    .map(|g| FlagPair { bit: g[0].bit, phase: g[0].phase ^ g[1].phase })
                    .collect()
            }
            Step::P => {
                counts.groups[k] = (pop.len() / 3) as u64;
                pop.chunks_exact(3).map(|g| p_rule(g[0], g[1], g[2])).collect()
            }
        };
        counts.accepted[k] = next.len() as u64;
        pop = next;
    }
    counts.survivors = pop.len() as u64;
    counts.bit_errors = pop.iter().filter(|f| f.bit).count() as u64;
    counts.phase_errors = pop.iter().filter(|f| f.phase).count() as u64;
    counts
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub yield_: f64,
    pub yield_se: f64,
    pub delta_b: f64,
    pub delta_b_se: f64,
    pub delta_p: f64,
    pub delta_p_se: f64,
    pub survivors: u64,
}

/// Turn merged tallies into estimates. The yield is the product over steps
/// of the acceptance fraction divided by the group size, matching
/// `apply_sequence`; its error follows from the per-step binomial errors.
pub fn mc_estimate(seq: &StepSequence, counts: &McCounts) -> Result<McEstimate> {
    if counts.survivors == 0 {
        return Err(Error::Inconsistent("no pairs survived; Monte Carlo result is inconclusive"));
    }
    let mut yield_ = 1.0;
    let mut rel_var = 0.0;
    for (k, step) in seq.steps().iter().enumerate() {
        let g = counts.groups[k] as f64;
        let p = counts.accepted[k] as f64 / g;
        let size = match step {
            Step::B => 2.0,
            Step::P => 3.0,
        };
        yield_ *= p / size;
        rel_var += (1.0 - p) / (p * g);
    }
    let n = counts.survivors as f64;
    let db = counts.bit_errors as f64 / n;
    let dp = counts.phase_errors as f64 / n;
    Ok(McEstimate {
        yield_,
        yield_se: yield_ * sqrt(rel_var),
        delta_b: db,
        delta_b_se: sqrt(db * (1.0 - db) / n),
        delta_p: dp,
        delta_p_se: sqrt(dp * (1.0 - dp) / n),
        survivors: counts.survivors,
    })
}

/// Smallest sample count accepted by [`mc_sequence`].
pub const MC_MIN_SAMPLES: u64 = 10_000;

/// Sample `n_samples` flag pairs from `state`, run `seq` with random
/// pairing, and report yield and error rates with standard errors.
pub fn mc_sequence(state: &BellDiagonal, seq: &StepSequence, n_samples: u64, seed: u64) -> Result<McEstimate> {
    if n_samples < MC_MIN_SAMPLES {
        return Err(Error::Domain("Monte Carlo needs at least 10000 samples"));
    }
    let counts = mc_counts_serial(state, seq, n_samples, seed);
    mc_estimate(seq, &counts)
}

/// Random normalized Bell-diagonal state (uniform on the simplex).
pub fn random_state(rng: &mut ChaCha8Rng) -> BellDiagonal {
    let mut e = [0.0; 4];
    for x in &mut e {
        *x = -libm::log(1.0 - uniform(rng));
    }
    let s: f64 = e.iter().sum();
    BellDiagonal::from_array([e[0] / s, e[1] / s, e[2] / s, e[3] / s])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Largest componentwise gap between two states, plus the gap in survival.
fn max_gap(a: &BellDiagonal, b: &BellDiagonal) -> f64 {
    a.to_array().iter().zip(b.to_array()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn check_enumerate_b(n: usize, seed: u64, tol: f64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..n {
        let c = random_state(&mut rng);
        let t = random_state(&mut rng);
        let (pe, oe) = enumerate_b(&c, &t);
        match b_step(&c, &t) {
            Ok((pa, oa)) => worst = worst.max((pe - pa).abs()).max(max_gap(&oe, &oa)),
            Err(_) => worst = f64::INFINITY,
        }
    }
    Check { name: "enumerate_b", passed: worst <= tol, detail: format!("{n} random pairs, max deviation {worst:.3e}") }
}

pub fn check_enumerate_p(n: usize, seed: u64, tol: f64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..n {
        let s = random_state(&mut rng);
        worst = worst.max(max_gap(&enumerate_p(&s), &p_step(&s)));
    }
    Check { name: "enumerate_p", passed: worst <= tol, detail: format!("{n} random states, max deviation {worst:.3e}") }
}

/// Compare a Monte Carlo run with `apply_sequence`; passes when yield and
/// both error rates are within `n_se` standard errors.
pub fn check_mc(
    name: &'static str,
    state: &BellDiagonal,
    seq: &StepSequence,
    n_samples: u64,
    seed: u64,
    n_se: f64,
) -> Check {
    check_mc_with(name, state, seq, n_samples, seed, n_se, &mc_counts_serial)
}

/// Shard runner: merged tallies of `(state, seq, n_samples, seed)`.
pub type ShardRunner<'a> = dyn Fn(&BellDiagonal, &StepSequence, u64, u64) -> McCounts + 'a;

/// All shards of a run, one after the other.
pub fn mc_counts_serial(state: &BellDiagonal, seq: &StepSequence, n_samples: u64, seed: u64) -> McCounts {
    (0..shard_count(n_samples))
        .map(|k| mc_shard(state, seq, n_samples, seed, k))
        .fold(McCounts::zero(seq.len()), |acc, c| acc.merge(&c))
}

/// [`check_mc`] with the shards executed by `run`, which must return the
/// merged tallies of every shard.
pub fn check_mc_with(
    name: &'static str,
    state: &BellDiagonal,
    seq: &StepSequence,
    n_samples: u64,
    seed: u64,
    n_se: f64,
    run: &ShardRunner<'_>,
) -> Check {
    if n_samples < MC_MIN_SAMPLES {
        return Check {
            name,
            passed: false,
            detail: format!("{}", Error::Domain("Monte Carlo needs at least 10000 samples")),
        };
    }
    let est = match mc_estimate(seq, &run(state, seq, n_samples, seed)) {
        Ok(e) => e,
        Err(e) => return Check { name, passed: false, detail: format!("{e}") },
    };
    let (out, y) = match apply_sequence(state, seq) {
        Ok(v) => v,
        Err(e) => return Check { name, passed: false, detail: format!("{e}") },
    };
    let r = out.rates();
    let z = |x: f64, mean: f64, se: f64| {
        if se > 0.0 {
            (x - mean).abs() / se
        } else if x == mean {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let zs = [
        z(est.yield_, y, est.yield_se),
        z(est.delta_b, r.delta_b, est.delta_b_se),
        z(est.delta_p, r.delta_p, est.delta_p_se),
    ];
    let worst = zs.iter().cloned().fold(0.0, f64::max);
    Check {
        name,
        passed: worst <= n_se,
        detail: format!("seq {seq}, {n_samples} samples, largest deviation {worst:.2} standard errors"),
    }
}

/// Checks of the flag propagation convention on single configurations.
pub fn check_convention() -> Check {
    let only = |i: usize| {
        let mut q = [0.0; 4];
        q[i] = 1.0;
        BellDiagonal::from_array(q)
    };
    // Control phase flip, clean target: the flip stays on the control.
    let (_, a) = enumerate_b(&only(3), &BellDiagonal::PERFECT);
    // Clean control, target phase flip: the flip comes back to the control.
    let (_, b) = enumerate_b(&BellDiagonal::PERFECT, &only(3));
    // Both carry bit and phase flips: bits agree, phases cancel.
    let (p, c) = enumerate_b(&only(2), &only(2));
    let passed = a == only(3) && b == only(3) && p == 1.0 && c == only(1);
    Check { name: "bxor_convention", passed, detail: String::from("phase target->control, bit control->target") }
}

/// The full suite run by the `verify` command, with default sizes.
pub fn verify_all(seed: u64) -> Vec<Check> {
    verify_suite(seed, 1000, 1_000_000, &mc_counts_serial)
}

/// Convention check, enumeration checks on `states` random inputs, and Monte
/// Carlo checks of `B` and `BPB` with `samples` pairs each.
pub fn verify_suite(seed: u64, states: usize, samples: u64, run: &ShardRunner<'_>) -> Vec<Check> {
    let s = BellDiagonal::from_array([0.8, 0.1, 0.0, 0.1]);
    let b: StepSequence = StepSequence(vec![Step::B]);
    let bpb: StepSequence = StepSequence(vec![Step::B, Step::P, Step::B]);
    vec![
        check_convention(),
        check_enumerate_b(states, seed, 1e-12),
        check_enumerate_p(states, seed.wrapping_add(1), 1e-12),
        check_mc_with("mc_b_step", &s, &b, samples, seed, 5.0, run),
        check_mc_with("mc_bpb", &s, &bpb, samples, seed.wrapping_add(2), 5.0, run),
        check_mc_with("mc_perfect", &BellDiagonal::PERFECT, &bpb, (samples / 10).max(MC_MIN_SAMPLES), seed, 0.0, run),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn st(a: f64, b: f64, c: f64, d: f64) -> BellDiagonal {
        BellDiagonal::from_array([a, b, c, d])
    }

    #[test]
    fn enumerate_b_examples() {
        let s = st(0.8, 0.1, 0.0, 0.1);
        let (pe, oe) = enumerate_b(&s, &s);
        let (pa, oa) = b_step(&s, &s).unwrap();
        assert_abs_diff_eq!(pe, pa, epsilon = 1e-15);
        assert!(max_gap(&oe, &oa) <= 1e-15);
        assert_eq!(enumerate_b(&st(1.0, 0.0, 0.0, 0.0), &st(0.0, 1.0, 0.0, 0.0)).0, 0.0);
        let (p, o) = enumerate_b(&st(0.0, 0.0, 1.0, 0.0), &st(0.0, 0.0, 1.0, 0.0));
        assert_eq!(p, 1.0);
        assert_eq!(o, st(0.0, 1.0, 0.0, 0.0));
    }

    #[test]
    fn reversed_convention_disagrees() {
        // Phase flips travelling control -> target would leave the control
        // phase untouched, which contradicts the q01 term of the B step.
        let s = st(0.8, 0.1, 0.0, 0.1);
        let (ps, out) = b_step(&s, &s).unwrap();
        let (c, t) = (s.to_array(), s.to_array());
        let mut alt = [0.0; 4];
        for fc in FlagPair::ALL {
            for ft in FlagPair::ALL {
                if fc.bit == ft.bit {
                    alt[FlagPair { bit: fc.bit, phase: fc.phase }.index()] += c[fc.index()] * t[ft.index()];
                }
            }
        }
        assert!((alt[3] / ps - out.q01).abs() > 1e-3);
        assert!(check_convention().passed);
    }

    #[test]
    fn enumerate_p_examples() {
        assert_eq!(enumerate_p(&BellDiagonal::PERFECT), BellDiagonal::PERFECT);
        let r = enumerate_p(&st(0.8, 0.1, 0.0, 0.1)).rates();
        assert_abs_diff_eq!(r.delta_b, 0.244, epsilon = 1e-15);
        assert_abs_diff_eq!(r.delta_p, 0.028, epsilon = 1e-15);
    }

    #[test]
    fn random_agreement() {
        assert!(check_enumerate_b(1000, 7, 1e-12).passed);
        assert!(check_enumerate_p(1000, 8, 1e-12).passed);
    }

    #[test]
    fn perfect_state_is_exact() {
        let seq: StepSequence = "BPB".parse().unwrap();
        let e = mc_sequence(&BellDiagonal::PERFECT, &seq, 50_000, 1).unwrap();
        assert_eq!(e.yield_, 1.0 / 12.0);
        assert_eq!((e.delta_b, e.delta_p), (0.0, 0.0));
    }

    #[test]
    fn mc_matches_b_step() {
        let s = st(0.8, 0.1, 0.0, 0.1);
        let c = check_mc("b", &s, &"B".parse().unwrap(), 1_000_000, 42, 5.0);
        assert!(c.passed, "{}", c.detail);
    }

    #[test]
    fn shard_order_is_irrelevant() {
        let s = st(0.7, 0.1, 0.05, 0.15);
        let seq: StepSequence = "BP".parse().unwrap();
        let n = 200_000;
        let shards: Vec<McCounts> = (0..shard_count(n)).map(|k| mc_shard(&s, &seq, n, 9, k)).collect();
        let fwd = shards.iter().fold(McCounts::zero(2), |a, c| a.merge(c));
        let rev = shards.iter().rev().fold(McCounts::zero(2), |a, c| a.merge(c));
        assert_eq!(fwd, rev);
        assert_eq!(fwd.samples, n);
        assert_eq!(mc_estimate(&seq, &fwd).unwrap(), mc_sequence(&s, &seq, n, 9).unwrap());
    }

    #[test]
    fn too_few_samples_or_empty() {
        let seq: StepSequence = "B".parse().unwrap();
        assert!(mc_sequence(&BellDiagonal::PERFECT, &seq, 100, 0).is_err());
        let flipped = st(0.0, 1.0, 0.0, 0.0);
        let all_b = mc_sequence(&flipped, &"PPPPPPPPPP".parse().unwrap(), 10_000, 0);
        assert!(all_b.is_err());
    }
}
