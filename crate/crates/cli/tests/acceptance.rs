//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs under `cargo test` (harness disabled).

use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twoway::commands::max_finite_distance_par;
use twoway_core::boundary::diagonal_threshold;
use twoway_core::channel::{link_transmittance, overall_gain_qber, ChannelParams};
use twoway_core::decoy::{
    asymptotic_estimates, max_secure_distance, optimize_mu, practical_bounds, DecoyObservation, Scheme, SchemeConfig,
};
use twoway_core::edp::{b_step, p_step, BellDiagonal};
use twoway_core::fluctuations::{PlanGrid, DEFAULT_N_SIGMA, DEFAULT_N_TOTAL};
use twoway_core::oracle::{random_state, verify_all};
use twoway_core::recurrence::{cases, f_a, maximize_f_a, privacy_residue_generic, PairRates};

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn c1_diagonal() -> Outcome {
    let t0 = diagonal_threshold(0, 1e-6).unwrap();
    let t12 = diagonal_threshold(12, 1e-6).unwrap();
    (within(t0, 0.110, 0.001) && within(t12, 0.189, 0.001), format!("threshold(0)={t0:.5}, threshold(12)={t12:.5}"))
}

fn c2_distance_bound() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_twoway"))
        .args(["bounds", "--preset", "gys", "--from", "0", "--to", "0"])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    let km = text.lines().find_map(|l| l.strip_prefix("# distance_upper_km=")).and_then(|v| v.parse::<f64>().ok());
    match km {
        Some(km) => (out.status.success() && within(km, 208.0, 0.5), format!("distance_upper_km={km:.3}")),
        None => (false, format!("no distance_upper_km in output: {text}")),
    }
}

fn cfg(s: Scheme) -> SchemeConfig {
    SchemeConfig::new(s)
}

fn c3_max_distances() -> Outcome {
    let ch = ChannelParams::gys();
    let targets =
        [(Scheme::OneWay, 142.8), (Scheme::Recurrence, 149.1), (Scheme::BSteps(1), 163.8), (Scheme::BSteps(4), 181.0)];
    let mut ok = true;
    let mut detail = Vec::new();
    for (s, target) in targets {
        let km = max_secure_distance(&ch, &cfg(s)).unwrap().km;
        ok &= within(km, target, 3.0);
        detail.push(format!("{s}={km:.2} (target {target})"));
    }
    (ok, detail.join(", "))
}

fn rate(ch: &ChannelParams, s: Scheme, d: f64) -> f64 {
    optimize_mu(ch, &cfg(s), d).unwrap().rate
}

fn c4_crossover() -> Outcome {
    let ch = ChannelParams::gys();
    let last_1b = max_secure_distance(&ch, &cfg(Scheme::BSteps(1))).unwrap().km.floor() as u32;
    let below: Vec<u32> =
        (0..=128).filter(|&d| rate(&ch, Scheme::BSteps(1), d as f64) >= rate(&ch, Scheme::OneWay, d as f64)).collect();
    let above: Vec<u32> = (136..=last_1b)
        .filter(|&d| rate(&ch, Scheme::BSteps(1), d as f64) <= rate(&ch, Scheme::OneWay, d as f64))
        .collect();
    let crossing = (0..=last_1b * 10)
        .map(|k| k as f64 * 0.1)
        .find(|&d| rate(&ch, Scheme::BSteps(1), d) > rate(&ch, Scheme::OneWay, d))
        .unwrap_or(f64::NAN);
    (
        below.is_empty() && above.is_empty(),
        format!(
            "first 0.1 km point with bsteps:1 ahead {crossing:.1} km; violations at <=128 km: {below:?}, at 136..={last_1b} km: {above:?}"
        ),
    )
}

fn c5_improvement() -> Outcome {
    let ch = ChannelParams::gys();
    let mut ok = true;
    let mut detail = Vec::new();
    for d in [50.0, 100.0] {
        let gain = rate(&ch, Scheme::Recurrence, d) / rate(&ch, Scheme::OneWay, d) - 1.0;
        ok &= gain >= 0.10;
        detail.push(format!("{d} km: +{:.2}%", 100.0 * gain));
    }
    (ok, detail.join(", "))
}

fn c6_finite_distances() -> Outcome {
    let ch = ChannelParams::gys();
    let grid = PlanGrid::new(DEFAULT_N_TOTAL, DEFAULT_N_SIGMA);
    let targets = [(Scheme::OneWay, 120.0), (Scheme::BSteps(1), 125.0), (Scheme::Recurrence, 147.0)];
    let mut ok = true;
    let mut detail = Vec::new();
    for (s, target) in targets {
        let km = max_finite_distance_par(&ch, &cfg(s), &grid).unwrap();
        let pass = within(km, target, 10.0);
        ok &= pass;
        detail.push(format!("{s}={km:.1} (target {target}{})", if pass { "" } else { ", out of range" }));
    }
    (ok, detail.join(", "))
}

fn c7_oracle() -> Outcome {
    let checks = verify_all(20240601);
    let ok = checks.iter().all(|c| c.passed);
    let detail: Vec<String> =
        checks.iter().map(|c| format!("{}:{}", c.name, if c.passed { "ok" } else { "FAIL" })).collect();
    (ok, detail.join(", "))
}

fn c8_bound_structure() -> Outcome {
    let v = |q11: f64| PairRates::new(0.5, 0.5, q11);
    let s = |e1: f64, a: f64| PairRates::new(e1, e1, a);
    let m = |e_m: f64, q11: f64| PairRates::new(e_m, 0.5, q11);
    let mut closed_gap = 0.0_f64;
    let mut tight_gap = 0.0_f64;
    let mut slack_min = f64::INFINITY;
    for e1 in [0.02, 0.05, 0.1, 0.2, 0.35] {
        for af in [0.0, 0.1, 0.5, 0.9, 1.0] {
            let a = af * e1;
            closed_gap = closed_gap.max((cases::k_ss(e1, a) - privacy_residue_generic(&s(e1, a), &s(e1, a))).abs());
            for k in 0..=20 {
                let q11_v = 0.025 * k as f64;
                let gvs = privacy_residue_generic(&v(q11_v), &s(e1, a));
                let gsv = privacy_residue_generic(&s(e1, a), &v(q11_v));
                closed_gap = closed_gap
                    .max((cases::k_vs(e1, a, q11_v) - gvs).abs())
                    .max((cases::k_sv(e1, a, q11_v) - gsv).abs());
                let lvs = cases::k_vs(e1, a, q11_v) - cases::k_vs_bound(e1, a);
                let lsv = cases::k_sv(e1, a, q11_v) - cases::k_sv_bound(e1, a);
                if k == 10 {
                    tight_gap = tight_gap.max(lvs.abs()).max(lsv.abs());
                } else {
                    slack_min = slack_min.min(lvs).min(lsv);
                }
            }
            for e_m in [0.05, 0.2, 0.45] {
                for k in 0..=20 {
                    let q11_m = e_m * k as f64 / 20.0;
                    let gsm = privacy_residue_generic(&s(e1, a), &m(e_m, q11_m));
                    let gms = privacy_residue_generic(&m(e_m, q11_m), &s(e1, a));
                    closed_gap = closed_gap
                        .max((cases::k_sm(e1, a, e_m, q11_m) - gsm).abs())
                        .max((cases::k_ms(e1, a, e_m, q11_m) - gms).abs());
                    let lsm = cases::k_sm(e1, a, e_m, q11_m) - cases::k_sm_bound(e1, a);
                    let lms = cases::k_ms(e1, a, e_m, q11_m) - cases::k_ms_bound(e1, a, e_m);
                    if k == 10 {
                        tight_gap = tight_gap.max(lsm.abs()).max(lms.abs());
                    } else {
                        slack_min = slack_min.min(lsm).min(lms);
                    }
                }
            }
        }
    }
    (
        closed_gap <= 1e-12 && tight_gap <= 1e-12 && slack_min > 0.0,
        format!("closed-form gap {closed_gap:.1e}, gap at q11V=1/4, q11M=eM/2 {tight_gap:.1e}, smallest slack elsewhere {slack_min:.2e}"),
    )
}

fn c9_f_a() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    // The grid cannot resolve peaks narrower than its spacing, so the root
    // must never lose to the grid and must sit within one grid cell of it.
    let mut grid_wins = 0.0_f64;
    let mut worst_f = 0.0_f64;
    let mut worst_a = 0.0_f64;
    for _ in 0..1000 {
        let e1: f64 = rng.gen_range(1e-3..0.5);
        let d1: f64 = rng.gen_range(0.05..1.0);
        let d2: f64 = rng.gen_range(0.05..1.0);
        let (a_star, f_star) = maximize_f_a(e1, d1, d2).unwrap();
        let n = (e1 / 1e-6).floor() as usize;
        let (mut a_grid, mut f_grid) = (0.0, f64::NEG_INFINITY);
        for k in 0..=n {
            let a = k as f64 * 1e-6;
            let f = f_a(a, e1, d1, d2);
            if f > f_grid {
                (a_grid, f_grid) = (a, f);
            }
        }
        grid_wins = grid_wins.max(f_grid - f_star);
        worst_f = worst_f.max((f_star - f_grid).abs());
        worst_a = worst_a.max((a_star - a_grid).abs());
    }
    let mut sq_gap = 0.0_f64;
    for e1 in [0.01, 0.05, 0.1, 0.25, 0.4] {
        for d in [0.2, 1.0] {
            let (a_star, _) = maximize_f_a(e1, d, d).unwrap();
            sq_gap = sq_gap.max((a_star - e1 * e1).abs());
        }
    }
    (
        grid_wins <= 1e-9 && worst_a <= 1e-6 && sq_gap <= 1e-9,
        format!(
            "max F(grid argmax) - F(root) {grid_wins:.1e}, max |a_root - a_grid| {worst_a:.1e}, \
             max |F(root) - F(grid argmax)| {worst_f:.1e}, max |a* - e1^2| at D1=D2 {sq_gap:.1e}"
        ),
    )
}

fn c10_decoy_limit() -> Outcome {
    let ch = ChannelParams::gys();
    let nu = 1e-4;
    let mut worst = 0.0_f64;
    for d in [0.0, 50.0, 100.0, 140.0] {
        for mu in [0.3, 0.5, 0.8] {
            let asym = asymptotic_estimates(&ch, mu, d).unwrap();
            let eta = link_transmittance(&ch, d).unwrap();
            let sig = overall_gain_qber(&ch, eta, mu);
            let weak = overall_gain_qber(&ch, eta, nu);
            let est = practical_bounds(&DecoyObservation {
                mu,
                nu,
                q_mu: sig.q_mu,
                e_mu: sig.e_mu,
                q_nu: weak.q_mu,
                e_nu: weak.e_mu,
                y0: ch.y0,
                e0: ch.e0,
            })
            .unwrap();
            worst = worst.max(((est.q1 - asym.q1) / asym.q1).abs()).max(((est.e1 - asym.e1) / asym.e1).abs());
        }
    }
    (worst < 0.01, format!("largest relative deviation of Q1, e1: {:.3}%", 100.0 * worst))
}

fn c11_normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut norm = 0.0_f64;
    let mut eq6 = 0.0_f64;
    for _ in 0..10_000 {
        let c = random_state(&mut rng);
        let t = random_state(&mut rng);
        let p = p_step(&c);
        norm = norm.max((p.total() - 1.0).abs());
        if let Ok((ps, out)) = b_step(&c, &t) {
            norm = norm.max((out.total() - 1.0).abs());
            let (rc, rt) = (c.rates(), t.rates());
            let expect = rc.delta_b * rt.delta_b / ps;
            eq6 = eq6.max((out.rates().delta_b - expect).abs());
        }
    }
    let w = BellDiagonal::worst_case(0.1, 0.2).unwrap();
    norm = norm.max((w.total() - 1.0).abs());
    (
        norm <= 1e-12 && eq6 <= 1e-12,
        format!("max normalization error {norm:.1e}, max B-step bit-error identity gap {eq6:.1e}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("diagonal thresholds", c1_diagonal),
        ("distance upper bound", c2_distance_bound),
        ("asymptotic maximal distances", c3_max_distances),
        ("1B / one-way crossover", c4_crossover),
        ("recurrence rate improvement", c5_improvement),
        ("finite-size distances", c6_finite_distances),
        ("oracle equivalence", c7_oracle),
        ("recurrence bound structure", c8_bound_structure),
        ("F_a optimizer", c9_f_a),
        ("decoy-limit consistency", c10_decoy_limit),
        ("normalization and B-step identity", c11_normalization),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = f();
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<4} {name}: {detail} [{:.1}s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
