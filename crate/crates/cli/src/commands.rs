//! Subcommand implementations. Each builds a [`Table`]; parallel work is
//! collected in index order so the output does not depend on thread count.

use std::fmt::Write as _;

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use twoway_core::boundary::StepSequence;
use twoway_core::boundary::{diagonal_threshold, region_grid, region_point, row_boundary, witness_label};
use twoway_core::bounds::{distance_upper_bound, rate_upper_bound, DistanceBound};
use twoway_core::bstep::bstep_trace;
use twoway_core::channel::ChannelParams;
use twoway_core::decoy::{
    asymptotic_estimates, max_secure_distance, optimize_mu, MuPolicy, Scheme, SchemeConfig, DISTANCE_TOL_KM,
};
use twoway_core::edp::BellDiagonal;
use twoway_core::fluctuations::{
    finite_rate, max_distance_below, select_plan, PlanGrid, PlanOptimum, FINITE_COARSE_KM, FINITE_TOL_KM,
};
use twoway_core::oracle::{mc_shard, shard_count, verify_suite, Check, McCounts};
use twoway_core::recurrence::{recurrence_inputs, recurrence_residue_bound};

use crate::args::{BoundaryArgs, BoundsArgs, FluctArgs, RangeArgs, ScanArgs, SchemeArgs, VerifyArgs};
use crate::config::ChannelConfig;
use crate::table::{fmt_num, Cell, Table};

pub const SCHEME_NAMES: &str = "oneway, bsteps:<0-8>, bsteps (with --n-bsteps), recurrence";

/// What a command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub table: Table,
    /// Diagnostics for stderr.
    pub diagnostics: String,
    /// False when a verification check failed.
    pub ok: bool,
}

impl Outcome {
    fn ok(table: Table) -> Self {
        Self { table, diagnostics: String::new(), ok: true }
    }
}

/// Everything that determines a command's output; hashed into the
/// provenance line.
#[derive(Debug, Serialize)]
pub struct RunConfig<'a, T: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub channel: &'a ChannelConfig,
    pub args: &'a T,
}

/// Resolve scheme names, sorted by name without duplicates.
pub fn parse_schemes(args: &SchemeArgs) -> Result<Vec<Scheme>> {
    if args.schemes.is_empty() {
        bail!("no --scheme given; valid names: {SCHEME_NAMES}");
    }
    let mut out = Vec::new();
    for name in &args.schemes {
        let s = if name == "bsteps" {
            format!("bsteps:{}", args.n_bsteps).parse::<Scheme>()
        } else {
            name.parse::<Scheme>()
        };
        let s = s.map_err(|e| anyhow::anyhow!("scheme '{name}': {e}; valid names: {SCHEME_NAMES}"))?;
        out.push(s);
    }
    out.sort_by_key(|s| s.to_string());
    out.dedup();
    Ok(out)
}

pub fn scheme_config(scheme: Scheme, args: &SchemeArgs, mu_policy: MuPolicy, mu_max: f64) -> Result<SchemeConfig> {
    let mut cfg = SchemeConfig::new(scheme);
    cfg.q_sift = args.q_sift;
    cfg.f_ec = args.f_ec;
    cfg.ec_on_parity_check = !args.plain_parity_check;
    cfg.mu_policy = mu_policy;
    cfg.mu_max = mu_max;
    cfg.validate()?;
    Ok(cfg)
}

/// `from + k step` for every `k` that stays at or below `to`.
pub fn distances(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    ensure!(from.is_finite() && from >= 0.0, "--from must be a non-negative distance");
    ensure!(to.is_finite() && to >= from, "--to must not be below --from");
    ensure!(step.is_finite() && step > 0.0, "--step must be positive");
    let n = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| from + k as f64 * step).collect())
}

fn range(r: &RangeArgs) -> Result<Vec<f64>> {
    distances(r.from, r.to, r.step)
}

fn verbose_dump(ch: &ChannelParams, cfg: &SchemeConfig, d: f64, mu: f64) -> Result<String> {
    let mut out = String::new();
    let est = asymptotic_estimates(ch, mu, d)?;
    match cfg.scheme {
        Scheme::Recurrence if est.q1 > 0.0 => {
            let (inp, _) = recurrence_inputs(&est)?;
            let b = recurrence_residue_bound(&inp, cfg.f_ec, cfg.ec_on_parity_check)?;
            let cols = [d, mu, b.b, b.c, b.d1, b.d2, b.a_star, b.f_star, b.residue];
            let line: Vec<String> = cols.iter().map(|x| fmt_num(*x)).collect();
            writeln!(out, "recurrence,{}", line.join(","))?;
        }
        Scheme::BSteps(n) => {
            for (k, (s, _)) in bstep_trace(&est, n)?.iter().enumerate() {
                let cols = [s.r_b, s.delta, s.omega, s.delta_u, s.delta_p];
                let line: Vec<String> = cols.iter().map(|x| fmt_num(*x)).collect();
                writeln!(out, "bsteps:{n},{},{},{k},{}", fmt_num(d), fmt_num(mu), line.join(","))?;
            }
        }
        _ => {}
    }
    Ok(out)
}

pub fn scan(ch: &ChannelParams, args: &ScanArgs) -> Result<Outcome> {
    let schemes = parse_schemes(&args.schemes)?;
    let policy = match args.mu {
        Some(mu) => MuPolicy::Fixed(mu),
        None => MuPolicy::Optimized,
    };
    let cfgs: Vec<SchemeConfig> =
        schemes.iter().map(|s| scheme_config(*s, &args.schemes, policy, args.mu_max)).collect::<Result<_>>()?;
    let ds = range(&args.range)?;
    let tasks: Vec<(f64, &SchemeConfig)> = ds.iter().flat_map(|d| cfgs.iter().map(move |c| (*d, c))).collect();
    let verbose = args.verbose;
    let results: Vec<(Vec<Cell>, String)> = tasks
        .par_iter()
        .map(|(d, cfg)| {
            let opt = optimize_mu(ch, cfg, *d).with_context(|| format!("{} at {d} km", cfg.scheme))?;
            let dump = if verbose { verbose_dump(ch, cfg, *d, opt.mu)? } else { String::new() };
            Ok((
                vec![Cell::from(*d), Cell::from(cfg.scheme.to_string()), Cell::from(opt.mu), Cell::from(opt.rate)],
                dump,
            ))
        })
        .collect::<Result<_>>()?;
    let mut out = Outcome::ok(Table::new(&["distance_km", "scheme", "mu", "rate"]));
    for (row, dump) in results {
        out.table.push(row);
        out.diagnostics.push_str(&dump);
    }
    if args.max_distance {
        let limits: Vec<f64> =
            cfgs.par_iter().map(|cfg| Ok(max_secure_distance(ch, cfg)?.km)).collect::<Result<_>>()?;
        for (cfg, km) in cfgs.iter().zip(limits) {
            out.table.meta.push((format!("max_km_{}", cfg.scheme), Cell::from(km)));
        }
    }
    Ok(out)
}

pub fn boundary(args: &BoundaryArgs) -> Result<Outcome> {
    ensure!(args.max_steps <= 31, "--max-steps must be at most 31");
    ensure!(args.tol > 0.0, "--tol must be positive");
    if args.diagonal {
        let th: Vec<f64> = (0..=args.max_steps)
            .into_par_iter()
            .map(|n| Ok(diagonal_threshold(n, args.tol)?))
            .collect::<Result<_>>()?;
        let mut t = Table::new(&["max_steps", "threshold"]);
        for (n, x) in th.into_iter().enumerate() {
            t.push(vec![Cell::from(n), Cell::from(x)]);
        }
        return Ok(Outcome::ok(t));
    }
    if args.rows {
        ensure!(args.grid_step > 0.0 && args.grid_step <= 0.25, "--grid-step must lie in (0, 0.25]");
        let n = ((0.25 - 1e-12) / args.grid_step).floor() as usize;
        let rows: Vec<(f64, Option<f64>)> = (0..=n)
            .into_par_iter()
            .map(|k| {
                let db = k as f64 * args.grid_step;
                Ok((db, row_boundary(db, args.max_steps, args.tol)?))
            })
            .collect::<Result<_>>()?;
        let mut t = Table::new(&["delta_b", "delta_p_max"]);
        for (db, edge) in rows {
            t.push(vec![Cell::from(db), edge.map(Cell::from).unwrap_or_else(|| Cell::from(""))]);
        }
        return Ok(Outcome::ok(t));
    }
    let pts = region_grid(args.grid_step)?;
    let evaluated: Vec<_> =
        pts.par_iter().map(|(db, dp)| Ok(region_point(*db, *dp, args.max_steps)?)).collect::<Result<_>>()?;
    let mut t = Table::new(&["delta_b", "delta_p", "secure", "witness"]);
    for p in evaluated {
        t.push(vec![
            Cell::from(p.delta_b),
            Cell::from(p.delta_p),
            Cell::from(p.secure),
            Cell::from(witness_label(&p.witness)),
        ]);
    }
    Ok(Outcome::ok(t))
}

pub fn bounds(ch: &ChannelParams, args: &BoundsArgs) -> Result<Outcome> {
    ensure!(args.mu_max > 0.0, "--mu-max must be positive");
    let mu = args.mu.unwrap_or(args.mu_max.min(1.0));
    ensure!(mu > 0.0, "--mu must be positive");
    let upper = distance_upper_bound(ch)?;
    let ds = range(&args.range)?;
    let rows: Vec<Vec<Cell>> = ds
        .par_iter()
        .map(|d| {
            let est = asymptotic_estimates(ch, mu, *d)?;
            Ok(vec![
                Cell::from(*d),
                Cell::from(mu),
                Cell::from(est.q1),
                Cell::from(est.e1),
                Cell::from(rate_upper_bound(&est)),
            ])
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(&["distance_km", "mu", "q1", "e1", "rate_upper"]);
    t.rows = rows;
    t.meta.push((
        "distance_upper_km".into(),
        match upper {
            DistanceBound::Finite(km) => Cell::from(km),
            DistanceBound::Unbounded => Cell::from("unbounded"),
        },
    ));
    Ok(Outcome::ok(t))
}

/// Exhaustive plan search at one distance, spread over the thread pool.
pub fn optimize_plan_par(ch: &ChannelParams, cfg: &SchemeConfig, grid: &PlanGrid, d: f64) -> Result<PlanOptimum> {
    let plans = grid.plans();
    let evaluated: Vec<PlanOptimum> = plans
        .par_iter()
        .enumerate()
        .map(|(index, plan)| Ok(PlanOptimum { plan: *plan, rate: finite_rate(ch, plan, cfg, d)?, index }))
        .collect::<Result<_>>()?;
    select_plan(evaluated).context("plan grid is empty")
}

pub fn fluct(ch: &ChannelParams, args: &FluctArgs) -> Result<Outcome> {
    ensure!(args.n_total > 0.0 && args.n_total.is_finite(), "--n-total must be positive");
    ensure!(args.n_sigma >= 0.0 && args.n_sigma.is_finite(), "--n-sigma must be non-negative");
    let schemes = parse_schemes(&args.schemes)?;
    let cfgs: Vec<SchemeConfig> =
        schemes.iter().map(|s| scheme_config(*s, &args.schemes, MuPolicy::Optimized, 1.0)).collect::<Result<_>>()?;
    let grid = PlanGrid::new(args.n_total, args.n_sigma);
    let ds = distances(args.from, args.to, args.step)?;
    let mut t = Table::new(&["distance_km", "scheme", "rate", "frac_signal", "frac_vacuum", "frac_weak", "mu", "nu"]);
    for d in &ds {
        for cfg in &cfgs {
            let best = optimize_plan_par(ch, cfg, &grid, *d).with_context(|| format!("{} at {d} km", cfg.scheme))?;
            let p = best.plan;
            let z = |x: f64| Cell::from(if best.rate > 0.0 { x } else { 0.0 });
            t.push(vec![
                Cell::from(*d),
                Cell::from(cfg.scheme.to_string()),
                Cell::from(best.rate),
                z(p.frac_signal),
                z(p.frac_vacuum),
                z(p.frac_weak),
                z(p.mu),
                z(p.nu),
            ]);
        }
    }
    if args.max_distance {
        for cfg in &cfgs {
            let km = max_finite_distance_par(ch, cfg, &grid)?;
            t.meta.push((format!("finite_max_km_{}", cfg.scheme), Cell::from(km)));
        }
    }
    Ok(Outcome::ok(t))
}

/// Largest distance with a positive finite-size rate, bracketed by the
/// asymptotic maximum.
pub fn max_finite_distance_par(ch: &ChannelParams, cfg: &SchemeConfig, grid: &PlanGrid) -> Result<f64> {
    let asym = max_secure_distance(ch, cfg)?;
    if !asym.positive_at_zero {
        return Ok(0.0);
    }
    let mut failure = None;
    let km = max_distance_below(
        |d| match optimize_plan_par(ch, cfg, grid, d) {
            Ok(b) => Ok(b.rate),
            Err(e) => {
                failure = Some(e);
                Ok(0.0)
            }
        },
        asym.km + DISTANCE_TOL_KM,
        FINITE_COARSE_KM,
        FINITE_TOL_KM,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(km),
    }
}

/// Monte Carlo tallies with shards spread over the thread pool.
pub fn mc_counts_par(state: &BellDiagonal, seq: &StepSequence, n: u64, seed: u64) -> McCounts {
    let shards: Vec<McCounts> = (0..shard_count(n)).into_par_iter().map(|k| mc_shard(state, seq, n, seed, k)).collect();
    let zero = McCounts { groups: vec![0; seq.len()], accepted: vec![0; seq.len()], ..McCounts::default() };
    shards.iter().fold(zero, |acc, c| acc.merge(c))
}

pub fn verify(args: &VerifyArgs) -> Result<Outcome> {
    ensure!(args.states > 0, "--states must be positive");
    let checks: Vec<Check> = verify_suite(args.seed, args.states, args.samples, &mc_counts_par);
    let mut t = Table::new(&["check", "passed", "detail"]);
    let ok = checks.iter().all(|c| c.passed);
    for c in checks {
        t.push(vec![Cell::from(c.name), Cell::from(c.passed), Cell::from(c.detail)]);
    }
    Ok(Outcome { table: t, diagnostics: String::new(), ok })
}
