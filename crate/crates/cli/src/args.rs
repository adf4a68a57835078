use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::Preset;
use crate::table::Format;

#[derive(Debug, Parser)]
#[command(
    name = "twoway",
    version,
    about = "Decoy-state BB84 key rates with one-way, B-step and recurrence post-processing"
)]
pub struct Cli {
    /// Channel parameters as JSON (keys alpha_db_per_km, eta_bob, e_d, y0; optional e0, yield_model).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Built-in channel parameters. Used when no --config is given.
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write the table here instead of stdout.
    #[arg(long, short = 'o', global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores). Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Asymptotic key rate against distance.
    #[command(after_help = "CSV columns: distance_km, scheme, mu, rate\n\
        One row per (distance, scheme); schemes ordered by name within a distance.\n\
        With --max-distance, comment lines give the maximal secure distance as max_km_<scheme>.\n\
        With --verbose, per-distance internals go to stderr as CSV:\n\
        recurrence,distance_km,mu,b,c,d1,d2,a_star,f_star,residue\n\
        bsteps:<n>,distance_km,mu,step,r_b,delta,omega,delta_u,delta_p")]
    Scan(ScanArgs),
    /// Tolerable (delta_b, delta_p) region of B/P-step distillation.
    #[command(after_help = "CSV columns (grid): delta_b, delta_p, secure, witness\n\
        witness is the shortest succeeding B/P sequence, '-' when hashing alone works, empty when insecure.\n\
        --rows: delta_b, delta_p_max (upper edge of the region in each row, empty when none).\n\
        --diagonal: max_steps, threshold (largest secure delta_b = delta_p).")]
    Boundary(BoundaryArgs),
    /// Distance and rate upper bounds.
    #[command(after_help = "CSV columns: distance_km, mu, q1, e1, rate_upper\n\
        rate_upper = Q1 (1 - H2(e1)). A comment line gives distance_upper_km (or 'unbounded').")]
    Bounds(BoundsArgs),
    /// Finite-size key rate with optimized pulse allocation.
    #[command(after_help = "CSV columns: distance_km, scheme, rate, frac_signal, frac_vacuum, frac_weak, mu, nu\n\
        rate is per transmitted pulse. All-zero rows mean no plan on the grid gives key.\n\
        With --max-distance, comment lines give finite_max_km_<scheme>.")]
    Fluct(FluctArgs),
    /// Run the enumeration and Monte Carlo checks; exits nonzero on any failure.
    #[command(after_help = "CSV columns: check, passed, detail")]
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RangeArgs {
    #[arg(long, default_value_t = 0.0)]
    pub from: f64,
    #[arg(long, default_value_t = 200.0)]
    pub to: f64,
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SchemeArgs {
    /// oneway, bsteps:<n>, bsteps (uses --n-bsteps) or recurrence. Repeatable.
    #[arg(long = "scheme", value_name = "NAME")]
    pub schemes: Vec<String>,
    /// B-step count for a bare `bsteps` scheme.
    #[arg(long, default_value_t = 1)]
    pub n_bsteps: u8,
    /// Error-correction inefficiency.
    #[arg(long, default_value_t = 1.22)]
    pub f_ec: f64,
    /// Sifting factor.
    #[arg(long, default_value_t = 0.5)]
    pub q_sift: f64,
    /// Do not apply the inefficiency to the recurrence parity-check term.
    #[arg(long)]
    pub plain_parity_check: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScanArgs {
    #[command(flatten)]
    pub schemes: SchemeArgs,
    #[command(flatten)]
    pub range: RangeArgs,
    /// Fix the signal intensity instead of optimizing it per distance.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Upper end of the intensity search.
    #[arg(long, default_value_t = 1.0)]
    pub mu_max: f64,
    /// Also search for the largest distance with positive rate.
    #[arg(long)]
    pub max_distance: bool,
    /// Dump per-distance scheme internals to stderr.
    #[arg(long, short)]
    #[serde(skip)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundaryArgs {
    #[arg(long, default_value_t = 12)]
    pub max_steps: usize,
    /// Grid spacing in both error rates.
    #[arg(long, default_value_t = 0.01)]
    pub grid_step: f64,
    /// Emit the per-row upper edge instead of the grid.
    #[arg(long, conflicts_with = "diagonal")]
    pub rows: bool,
    /// Emit diagonal thresholds for 0..=max_steps.
    #[arg(long)]
    pub diagonal: bool,
    /// Bisection resolution for --rows and --diagonal.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub range: RangeArgs,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub mu_max: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FluctArgs {
    #[command(flatten)]
    pub schemes: SchemeArgs,
    #[arg(long, default_value_t = 0.0)]
    pub from: f64,
    #[arg(long, default_value_t = 150.0)]
    pub to: f64,
    #[arg(long, default_value_t = 10.0)]
    pub step: f64,
    /// Total number of pulses.
    #[arg(long, default_value_t = 6e9)]
    pub n_total: f64,
    /// Confidence multiplier on the counting standard deviation.
    #[arg(long, default_value_t = 10.0)]
    pub n_sigma: f64,
    /// Also search for the largest distance with positive finite-size rate.
    #[arg(long)]
    pub max_distance: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Random states per enumeration check.
    #[arg(long, default_value_t = 1000)]
    pub states: usize,
    /// Monte Carlo samples per sequence check.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
}
