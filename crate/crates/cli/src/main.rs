//! Command-line front end: one subcommand per registered experiment.
//!
//! Every run writes report.json, sample dumps, and plot CSVs under
//! out/<experiment>/<confighash>/ and prints one line per check. Exit code
//! is 0 iff every asserted check passed, 1 on a failed check, 2 on error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use tasep_core::harness::{self, ExperimentConfig, ResultRecord, RunEnv};

#[derive(Parser)]
#[command(
    name = "tasep",
    version,
    about = "kinetic Monte Carlo laboratory for multicolor TASEP",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// base RNG seed; replica r uses the stream keyed (seed, r)
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// number of replicas (experiment-specific default if omitted)
    #[arg(long)]
    replicas: Option<u64>,
    /// time horizon (experiment-specific default if omitted)
    #[arg(long)]
    t: Option<f64>,
    /// output root directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// widen simulation windows by this factor (>= 1)
    #[arg(long, default_value_t = 1.0)]
    window_factor: f64,
    /// reference CDF table for tw_onepoint (csv: s,F plus # mean/# variance)
    #[arg(long, default_value = "data/tw_gue.csv")]
    tw_ref: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact color-position symmetry on random transposition words
    #[command(name = "symmetry")]
    Symmetry {
        #[command(flatten)]
        common: Common,
        /// maximum word length
        #[arg(long)]
        max_len: Option<i64>,
        /// lowest bond a letter may use
        #[arg(long)]
        bond_lo: Option<i64>,
        /// highest bond a letter may use
        #[arg(long)]
        bond_hi: Option<i64>,
    },

    /// Simulator vs exact finite-window law of N(x, t)
    #[command(name = "oracle_validate")]
    OracleValidate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        window_lo: Option<i64>,
        #[arg(long)]
        window_hi: Option<i64>,
        /// site whose counting law is compared
        #[arg(long)]
        x: Option<i64>,
        /// truncation tolerance of the exact transient solve
        #[arg(long)]
        tol: Option<f64>,
        /// KS bound against the exact law
        #[arg(long)]
        ks_bound: Option<f64>,
    },

    /// One-shock identity: tagged particle vs step-run functional
    #[command(name = "identity1")]
    Identity1 {
        #[command(flatten)]
        common: Common,
        /// micro (exact laws on a closed window) or bulk (two-sample)
        #[arg(long)]
        mode: Option<String>,
        /// block length right of the tagged particle
        #[arg(long)]
        m_plus: Option<i64>,
        /// block length left of the tagged particle
        #[arg(long)]
        m_minus: Option<i64>,
        #[arg(long)]
        window_lo: Option<i64>,
        #[arg(long)]
        window_hi: Option<i64>,
        #[arg(long)]
        tol: Option<f64>,
        /// total-variation bound for micro mode
        #[arg(long)]
        tv_bound: Option<f64>,
    },

    /// Two-shock identity: tagged particle vs step-run functional
    #[command(name = "identity2")]
    Identity2 {
        #[command(flatten)]
        common: Common,
        /// micro (exact laws on a closed window) or bulk (two-sample)
        #[arg(long)]
        mode: Option<String>,
        /// left block length
        #[arg(long)]
        m: Option<i64>,
        /// right block length
        #[arg(long)]
        n: Option<i64>,
        #[arg(long)]
        window_lo: Option<i64>,
        #[arg(long)]
        window_hi: Option<i64>,
        #[arg(long)]
        tol: Option<f64>,
        /// total-variation bound for micro mode
        #[arg(long)]
        tv_bound: Option<f64>,
    },

    /// Pathwise concatenation of backwards paths across intermediate times
    #[command(name = "concatenation")]
    Concatenation {
        #[command(flatten)]
        common: Common,
        /// intermediate times (comma separated)
        #[arg(long, value_delimiter = ',')]
        taus: Option<Vec<f64>>,
        /// sampled alternative starting sites per tau
        #[arg(long)]
        n_y: Option<i64>,
        /// path endpoints, cycled over replicas (comma separated)
        #[arg(long, value_delimiter = ',')]
        x_ends: Option<Vec<i64>>,
    },

    /// Height-increment comparison where coupled backwards paths meet
    #[command(name = "comparison")]
    Comparison {
        #[command(flatten)]
        common: Common,
        /// site pairs as x:y (comma separated)
        #[arg(long, value_delimiter = ',')]
        pairs: Option<Vec<String>>,
        /// evenly spaced order checkpoints for the coupled-order probe
        #[arg(long)]
        checkpoints: Option<i64>,
    },

    /// Slow decorrelation along a characteristic
    #[command(name = "slowdec")]
    Slowdec {
        #[command(flatten)]
        common: Common,
        /// characteristic direction
        #[arg(long)]
        alpha: Option<f64>,
        /// time ladder (comma separated)
        #[arg(long, value_delimiter = ',')]
        t_list: Option<Vec<f64>>,
        /// intermediate time exponent: tau = t^exponent
        #[arg(long)]
        tau_exponent: Option<f64>,
        /// deviation threshold in units of t^(1/3)
        #[arg(long)]
        epsilon: Option<f64>,
    },

    /// Midpoint localization of backwards paths (step data)
    #[command(name = "midtime")]
    Midtime {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<f64>,
        /// thresholds in units of t^(2/3) (comma separated)
        #[arg(long, value_delimiter = ',')]
        u_grid: Option<Vec<f64>>,
    },

    /// Whole-path tube around the straight line (step data)
    #[command(name = "tube")]
    Tube {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<f64>,
        /// thresholds in units of t^(2/3) (comma separated)
        #[arg(long, value_delimiter = ',')]
        u_grid: Option<Vec<f64>>,
    },

    /// Exit-point localization for Bernoulli data along its characteristic
    #[command(name = "stationary_exit")]
    StationaryExit {
        #[command(flatten)]
        common: Common,
        /// particle density of the initial data
        #[arg(long)]
        rho: Option<f64>,
        /// thresholds in units of t^(2/3) (comma separated)
        #[arg(long, value_delimiter = ',')]
        u_grid: Option<Vec<f64>>,
    },

    /// One-shock front fluctuation against its simulated reference combo
    #[command(name = "shock1_limit")]
    Shock1Limit {
        #[command(flatten)]
        common: Common,
        /// left block density parameter
        #[arg(long)]
        a: Option<f64>,
        /// right block density parameter
        #[arg(long)]
        b: Option<f64>,
        /// linear, meso, or sub
        #[arg(long)]
        scale: Option<String>,
        /// block exponent for meso/sub scales
        #[arg(long)]
        delta: Option<f64>,
        /// time ladder for the linear scale (comma separated)
        #[arg(long, value_delimiter = ',')]
        t_ladder: Option<Vec<f64>>,
        /// scan halfwidth in units of the fluctuation scale
        #[arg(long)]
        grid_sigmas: Option<f64>,
        /// final KS bound for the linear scale
        #[arg(long)]
        ks_bound: Option<f64>,
        /// tagged (colored run) or identity_rhs (event scan)
        #[arg(long)]
        f_source: Option<String>,
    },

    /// Two-shock front fluctuation in its four scaling regimes
    #[command(name = "shock2_limit")]
    Shock2Limit {
        #[command(flatten)]
        common: Common,
        /// airy, separate, critical, or merged
        #[arg(long)]
        mode: Option<String>,
        /// first block coefficient (t^(2/3) blocks for airy, t blocks else)
        #[arg(long)]
        m: Option<f64>,
        /// second block coefficient (ignored for airy and critical)
        #[arg(long)]
        n: Option<f64>,
        /// scan halfwidth in units of the fluctuation scale
        #[arg(long)]
        grid_sigmas: Option<f64>,
    },

    /// Decorrelation of one-point heights at distinct angles
    #[command(name = "decoupling")]
    Decoupling {
        #[command(flatten)]
        common: Common,
        /// observation angles (comma separated)
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        /// absolute correlation bound for every pair
        #[arg(long)]
        corr_bound: Option<f64>,
    },

    /// Gaussianity of mesoscopic height increments
    #[command(name = "local_gaussian")]
    LocalGaussian {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<f64>,
        /// offset coefficient at scale t^delta
        #[arg(long)]
        beta: Option<f64>,
        /// increment endpoints at scale t^delta
        #[arg(long)]
        gamma1: Option<f64>,
        #[arg(long)]
        gamma2: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
    },

    /// One-point rescaled height against a tabulated reference CDF
    #[command(name = "tw_onepoint")]
    TwOnepoint {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<f64>,
        /// bound on |sample mean - reference mean|
        #[arg(long)]
        mean_tol: Option<f64>,
        /// bound on |sample variance - reference variance|
        #[arg(long)]
        var_tol: Option<f64>,
    },

    /// Tail decay diagnostics of the rescaled one-point height
    #[command(name = "tails")]
    Tails {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<f64>,
        /// upper-tail thresholds (comma separated)
        #[arg(long, value_delimiter = ',')]
        s_upper: Option<Vec<f64>>,
        /// lower-tail thresholds (comma separated)
        #[arg(long, value_delimiter = ',')]
        s_lower: Option<Vec<f64>>,
        /// minimum R^2 of the tail fits
        #[arg(long)]
        r2_bound: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(record) => {
            if record.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Insert a value under `key` if the flag was given.
fn put<T: Into<Value>>(map: &mut Map<String, Value>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        map.insert(key.to_string(), v.into());
    }
}

fn put_list(map: &mut Map<String, Value>, key: &str, v: Option<Vec<f64>>) {
    if let Some(v) = v {
        map.insert(key.to_string(), Value::Array(v.into_iter().map(Value::from).collect()));
    }
}

fn put_ilist(map: &mut Map<String, Value>, key: &str, v: Option<Vec<i64>>) {
    if let Some(v) = v {
        map.insert(key.to_string(), Value::Array(v.into_iter().map(Value::from).collect()));
    }
}

fn parse_pairs(raw: Vec<String>) -> Result<Value> {
    let mut out = Vec::new();
    for item in raw {
        let (x, y) = item
            .split_once(':')
            .with_context(|| format!("pair {item:?} must look like x:y"))?;
        let x: i64 = x.trim().parse().with_context(|| format!("bad pair x in {item:?}"))?;
        let y: i64 = y.trim().parse().with_context(|| format!("bad pair y in {item:?}"))?;
        out.push(Value::Array(vec![Value::from(x), Value::from(y)]));
    }
    Ok(Value::Array(out))
}

fn execute(cmd: Cmd) -> Result<ResultRecord> {
    let (name, common, params) = match cmd {
        Cmd::Symmetry { common, max_len, bond_lo, bond_hi } => {
            let mut m = Map::new();
            put(&mut m, "max_len", max_len);
            put(&mut m, "bond_lo", bond_lo);
            put(&mut m, "bond_hi", bond_hi);
            ("symmetry", common, m)
        }
        Cmd::OracleValidate { common, window_lo, window_hi, x, tol, ks_bound } => {
            let mut m = Map::new();
            put(&mut m, "window_lo", window_lo);
            put(&mut m, "window_hi", window_hi);
            put(&mut m, "x", x);
            put(&mut m, "tol", tol);
            put(&mut m, "ks_bound", ks_bound);
            ("oracle_validate", common, m)
        }
        Cmd::Identity1 { common, mode, m_plus, m_minus, window_lo, window_hi, tol, tv_bound } => {
            let mut m = Map::new();
            put(&mut m, "mode", mode);
            put(&mut m, "m_plus", m_plus);
            put(&mut m, "m_minus", m_minus);
            put(&mut m, "window_lo", window_lo);
            put(&mut m, "window_hi", window_hi);
            put(&mut m, "tol", tol);
            put(&mut m, "tv_bound", tv_bound);
            ("identity1", common, m)
        }
        Cmd::Identity2 { common, mode, m, n, window_lo, window_hi, tol, tv_bound } => {
            let mut mp = Map::new();
            put(&mut mp, "mode", mode);
            put(&mut mp, "m", m);
            put(&mut mp, "n", n);
            put(&mut mp, "window_lo", window_lo);
            put(&mut mp, "window_hi", window_hi);
            put(&mut mp, "tol", tol);
            put(&mut mp, "tv_bound", tv_bound);
            ("identity2", common, mp)
        }
        Cmd::Concatenation { common, taus, n_y, x_ends } => {
            let mut m = Map::new();
            put_list(&mut m, "taus", taus);
            put(&mut m, "n_y", n_y);
            put_ilist(&mut m, "x_ends", x_ends);
            ("concatenation", common, m)
        }
        Cmd::Comparison { common, pairs, checkpoints } => {
            let mut m = Map::new();
            if let Some(raw) = pairs {
                m.insert("pairs".to_string(), parse_pairs(raw)?);
            }
            put(&mut m, "checkpoints", checkpoints);
            ("comparison", common, m)
        }
        Cmd::Slowdec { common, alpha, t_list, tau_exponent, epsilon } => {
            let mut m = Map::new();
            put(&mut m, "alpha", alpha);
            put_list(&mut m, "t_list", t_list);
            put(&mut m, "tau_exponent", tau_exponent);
            put(&mut m, "epsilon", epsilon);
            ("slowdec", common, m)
        }
        Cmd::Midtime { common, alpha, u_grid } => {
            let mut m = Map::new();
            put(&mut m, "alpha", alpha);
            put_list(&mut m, "u_grid", u_grid);
            ("midtime", common, m)
        }
        Cmd::Tube { common, alpha, u_grid } => {
            let mut m = Map::new();
            put(&mut m, "alpha", alpha);
            put_list(&mut m, "u_grid", u_grid);
            ("tube", common, m)
        }
        Cmd::StationaryExit { common, rho, u_grid } => {
            let mut m = Map::new();
            put(&mut m, "rho", rho);
            put_list(&mut m, "u_grid", u_grid);
            ("stationary_exit", common, m)
        }
        Cmd::Shock1Limit { common, a, b, scale, delta, t_ladder, grid_sigmas, ks_bound, f_source } => {
            let mut m = Map::new();
            put(&mut m, "a", a);
            put(&mut m, "b", b);
            put(&mut m, "scale", scale);
            put(&mut m, "delta", delta);
            put_list(&mut m, "t_ladder", t_ladder);
            put(&mut m, "grid_sigmas", grid_sigmas);
            put(&mut m, "ks_bound", ks_bound);
            put(&mut m, "f_source", f_source);
            ("shock1_limit", common, m)
        }
        Cmd::Shock2Limit { common, mode, m, n, grid_sigmas } => {
            let mut mp = Map::new();
            put(&mut mp, "mode", mode);
            put(&mut mp, "m", m);
            put(&mut mp, "n", n);
            put(&mut mp, "grid_sigmas", grid_sigmas);
            ("shock2_limit", common, mp)
        }
        Cmd::Decoupling { common, alphas, corr_bound } => {
            let mut m = Map::new();
            put_list(&mut m, "alphas", alphas);
            put(&mut m, "corr_bound", corr_bound);
            ("decoupling", common, m)
        }
        Cmd::LocalGaussian { common, alpha, beta, gamma1, gamma2, delta } => {
            let mut m = Map::new();
            put(&mut m, "alpha", alpha);
            put(&mut m, "beta", beta);
            put(&mut m, "gamma1", gamma1);
            put(&mut m, "gamma2", gamma2);
            put(&mut m, "delta", delta);
            ("local_gaussian", common, m)
        }
        Cmd::TwOnepoint { common, alpha, mean_tol, var_tol } => {
            let mut m = Map::new();
            put(&mut m, "alpha", alpha);
            put(&mut m, "mean_tol", mean_tol);
            put(&mut m, "var_tol", var_tol);
            ("tw_onepoint", common, m)
        }
        Cmd::Tails { common, alpha, s_upper, s_lower, r2_bound } => {
            let mut m = Map::new();
            put(&mut m, "alpha", alpha);
            put_list(&mut m, "s_upper", s_upper);
            put_list(&mut m, "s_lower", s_lower);
            put(&mut m, "r2_bound", r2_bound);
            ("tails", common, m)
        }
    };

    let mut cfg = ExperimentConfig::new(name, common.seed);
    if let Some(r) = common.replicas {
        cfg.replicas = r;
    }
    if let Some(t) = common.t {
        cfg.t = t;
    }
    cfg.window_factor = common.window_factor;
    cfg.params = Value::Object(params);
    let env = RunEnv { tw_ref: Some(common.tw_ref.clone()) };

    let record = harness::run(&cfg, &common.out, &env)
        .with_context(|| format!("experiment {name} failed to run"))?;
    print_record(&record, &common.out);
    Ok(record)
}

fn print_record(record: &ResultRecord, out_root: &std::path::Path) {
    for c in &record.checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        if c.op == "report" {
            println!("[{tag}] {}: {:.6}  ({})", c.name, c.statistic, c.detail);
        } else {
            println!(
                "[{tag}] {}: {:.6} {} {:.6}  ({})",
                c.name, c.statistic, c.op, c.bound, c.detail
            );
        }
    }
    for note in &record.notes {
        println!("note: {note}");
    }
    let verdict = if record.pass { "PASS" } else { "FAIL" };
    println!(
        "{}: {verdict}  -> {}",
        record.experiment,
        out_root
            .join(&record.experiment)
            .join(&record.config_hash)
            .join("report.json")
            .display()
    );
}
