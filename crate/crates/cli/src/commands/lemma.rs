use clap::{Args, ValueEnum};
use serde::Serialize;

use ellfit_core::conclab::deviation::{self, DeviationConstants};
use ellfit_core::conclab::directions::{direction_profile, net_factor_check, net_profile_event};
use ellfit_core::conclab::moments::{l_hat_two, moment_suite, projected_moment_growth};
use ellfit_core::conclab::tails::{self, WeibullParams};
use ellfit_core::conclab::{CheckRow, TailCurve};
use ellfit_core::linalg::{random_orthogonal, SymMatrix};
use ellfit_core::rng::{Purpose, RandomStream};

use crate::config::OutputFormat;
use crate::error::{CliError, ExitStatus};
use crate::output::{self, real, Table};
use crate::{Outcome, Resolved};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaName {
    GramDeviation,
    ThetaInverse,
    InftyNorm,
    SEta,
    WeibullSum,
    HansonWright,
    Chi2,
    Qtilde,
    Moments,
    MomentGrowth,
    InversePerturbation,
    NetProfile,
    DirectionDiagnostics,
}

/// Test matrices for the quadratic-form check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    /// `I_d`.
    Identity,
    /// `e₁e₁ᵀ`.
    RankOne,
    /// `diag(1, …, d)`.
    Ramp,
    /// `Q diag(1, …, d) Qᵀ` for a random orthogonal `Q`.
    RotatedRamp,
}

#[derive(Debug, Clone, Args)]
pub struct LemmaArgs {
    #[arg(long, value_enum)]
    pub name: LemmaName,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Threshold grid, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub grid: Option<Vec<f64>>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Absolute constant of the bound under test.
    #[arg(long)]
    pub constant: Option<f64>,
    #[arg(long)]
    pub weibull_q: Option<f64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long)]
    pub c2_inverse: Option<f64>,
    #[arg(long, value_enum)]
    pub matrix: Option<MatrixKind>,
    /// Number of probe directions (or `t` matrices for moment growth).
    #[arg(long)]
    pub directions: Option<usize>,
    #[arg(long)]
    pub k_max: Option<u32>,
    #[arg(long)]
    pub max_dim: Option<usize>,
    /// Replace `Θ⁻¹` by the identity in the sup-norm event.
    #[arg(long)]
    pub identity_operator: bool,
    /// Level of the event under test: `‖Θ⁻¹‖_op` for theta-inverse, `|f|` for direction-diagnostics.
    #[arg(long)]
    pub level: Option<f64>,
    /// Largest tolerated miss frequency for event checks.
    #[arg(long)]
    pub miss: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub name: LemmaName,
    pub master_seed: u64,
    pub pass: bool,
    pub rows: Vec<CheckRow>,
    pub details: serde_json::Value,
}

pub const LEMMA_HEADER: [&str; 4] = ["threshold", "empirical", "bound", "trials"];

pub fn lemma_table(rows: &[CheckRow]) -> Table {
    let mut t = Table::new(LEMMA_HEADER.to_vec());
    for r in rows {
        t.push(vec![real(r.threshold), real(r.empirical), real(r.bound), r.trials.to_string()]);
    }
    t
}

fn row(threshold: f64, empirical: f64, bound: f64, trials: u64, pass: bool) -> CheckRow {
    CheckRow { threshold, empirical, bound, trials, pass }
}

/// `empirical ≤ bound` with no Monte Carlo slack.
fn hard_row(threshold: f64, empirical: f64, bound: f64, trials: u64) -> CheckRow {
    row(threshold, empirical, bound, trials, empirical <= bound)
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report serializes")
}

fn curve_report(curve: &TailCurve, details: serde_json::Value) -> (Vec<CheckRow>, serde_json::Value) {
    (curve.rows(), details)
}

pub fn build_matrix(kind: MatrixKind, d: usize, seed: u64) -> SymMatrix {
    let ramp: Vec<f64> = (1..=d).map(|i| i as f64).collect();
    match kind {
        MatrixKind::Identity => SymMatrix::identity(d),
        MatrixKind::RankOne => SymMatrix::from_fn(d, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 }),
        MatrixKind::Ramp => SymMatrix::from_diagonal(&ramp),
        MatrixKind::RotatedRamp => {
            let q = random_orthogonal(d, &mut RandomStream::for_purpose(seed, Purpose::Auxiliary, 7).rng());
            SymMatrix::from_diagonal(&ramp).conjugate(&q)
        }
    }
}

pub fn evaluate(args: &LemmaArgs, seed: u64, file_trials: Option<u64>) -> Result<LemmaReport, CliError> {
    let trials_or = |default: u64| args.trials.or(file_trials).unwrap_or(default);
    let d_or = |default: usize| args.d.unwrap_or(default);
    let n_or = |default: usize| args.n.unwrap_or(default);
    let grid_or = |default: &[f64]| args.grid.clone().unwrap_or_else(|| default.to_vec());
    let miss_or = |default: f64| args.miss.unwrap_or(default);
    let (rows, details) = match args.name {
        LemmaName::GramDeviation | LemmaName::ThetaInverse => {
            let (d, n) = if args.name == LemmaName::GramDeviation { (d_or(40), n_or(80)) } else { (d_or(60), n_or(180)) };
            let trials = trials_or(if args.name == LemmaName::GramDeviation { 50 } else { 100 });
            let stats = deviation::gram_deviation(d, n, trials, seed)?;
            let miss = miss_or(0.05);
            let rows = if args.name == LemmaName::GramDeviation {
                let defaults = DeviationConstants::default();
                let k = DeviationConstants {
                    c1: args.c1.unwrap_or(defaults.c1),
                    c2: args.c2.unwrap_or(defaults.c2),
                    c2_inverse: args.c2_inverse.unwrap_or(defaults.c2_inverse),
                };
                let gb = k.gram_bound(d, n);
                let ib = k.inverse_bound(d, n);
                let gram_miss = stats.gram_deviation.iter().filter(|&&v| v >= gb).count() as f64 / trials as f64;
                let inv_miss = stats.inverse_deviation.iter().filter(|v| v.is_none_or(|x| x >= ib)).count() as f64 / trials as f64;
                vec![hard_row(gb, gram_miss, miss, trials), hard_row(ib, inv_miss, miss, trials)]
            } else {
                let level = args.level.unwrap_or(2.0);
                vec![hard_row(level, 1.0 - stats.inverse_norm_frequency(level), miss, trials)]
            };
            (rows, to_value(&stats))
        }
        LemmaName::InftyNorm => {
            let (d, n, trials) = (d_or(60), n_or(180), trials_or(200));
            let r = deviation::infty_norm_event(d, n, trials, seed, args.identity_operator)?;
            let misses = r.frequencies.iter().map(|f| 1.0 - f).collect();
            let curve = TailCurve::new(r.constants.clone(), misses, vec![r.miss_bound; r.constants.len()], trials);
            (curve.rows(), to_value(&r))
        }
        LemmaName::SEta => {
            let (d, n, trials) = (d_or(100), n_or(500), trials_or(10_000));
            let eta = args.eta.unwrap_or(0.5);
            let c = args.constant.unwrap_or(tails::SPHERE_SUBGAUSSIAN_C);
            let curve = tails::s_eta_tail(d, n, eta, &grid_or(&[1.0, 2.0, 4.0, 8.0]), trials, seed, c)?;
            let lambda = tails::s_eta_lambda(d, n, eta, c);
            curve_report(&curve, serde_json::json!({"d": d, "n": n, "eta": eta, "constant": c, "lambda": lambda, "curve": curve}))
        }
        LemmaName::WeibullSum => {
            let (d, n, trials) = (d_or(50), n_or(250), trials_or(10_000));
            let eta = args.eta.unwrap_or(1.0);
            let defaults = WeibullParams::default();
            let params = WeibullParams { q: args.weibull_q.unwrap_or(defaults.q), c: args.constant.unwrap_or(defaults.c) };
            let curve = tails::weibull_sum_tail(d, n, eta, &grid_or(&[1.0, 2.0, 4.0]), trials, seed, params)?;
            curve_report(&curve, serde_json::json!({"d": d, "n": n, "eta": eta, "params": params, "curve": curve}))
        }
        LemmaName::HansonWright => {
            let (d, trials) = (d_or(20), trials_or(10_000));
            let kind = args.matrix.unwrap_or(MatrixKind::RankOne);
            let m = build_matrix(kind, d, seed);
            let c = args.constant.unwrap_or(tails::HANSON_WRIGHT_C);
            let curve = tails::hanson_wright_tail(&m, &grid_or(&[1.0, 2.0, 4.0]), trials, seed, c)?;
            curve_report(&curve, serde_json::json!({"d": d, "matrix": kind, "constant": c, "curve": curve}))
        }
        LemmaName::Chi2 => {
            let (d, trials) = (d_or(10), trials_or(10_000));
            let tails = tails::chi2_tail(d, &grid_or(&[0.5, 1.0, 2.0, 4.0]), trials, seed)?;
            let combined = tails.combined();
            let mut rows = combined.rows();
            let pass = tails.passes();
            rows.iter_mut().for_each(|r| r.pass = r.pass && pass);
            (rows, serde_json::json!({"d": d, "upper": tails.upper, "lower": tails.lower}))
        }
        LemmaName::Qtilde => {
            let (d, trials) = (d_or(100), trials_or(10_000));
            let curve = tails::qtilde_tail(d, &grid_or(&[0.1, 0.25, 0.5, 0.75, 0.99]), trials, seed)?;
            curve_report(&curve, serde_json::json!({"d": d, "curve": curve}))
        }
        LemmaName::Moments => {
            let (d, trials) = (d_or(10), trials_or(10_000));
            let r = moment_suite(d, trials, seed)?;
            let e = &r.identity_errors;
            let identity_max = [e.x_norm, e.y_norm_sq, e.y_orthogonal, e.v_gram, e.theta_split].into_iter().fold(0.0, f64::max);
            let rows = vec![
                row(0.0, r.covariance_error, 5.0 * r.covariance_se, trials, r.covariance_ok()),
                hard_row(1.0, (r.fourth_moment.mean - r.fourth_moment_exact).abs(), 5.0 * r.fourth_moment.std_error, trials),
                hard_row(2.0, (r.pair_square.mean - r.pair_square_exact).abs(), 5.0 * r.pair_square.std_error, trials),
                row(3.0, identity_max, 1e-10, trials, e.within_tolerance()),
                hard_row(4.0, (r.sigma_minus_identity - 1.0 / d as f64).abs(), 1e-14, trials),
            ];
            (rows, to_value(&r))
        }
        LemmaName::MomentGrowth => {
            let (d, trials) = (d_or(20), trials_or(10_000));
            let r = projected_moment_growth(d, args.k_max.unwrap_or(8), args.directions.unwrap_or(5), trials, seed)?;
            let lo = r.l_hat.iter().copied().fold(f64::INFINITY, f64::min);
            let spread_ok = r.spread() <= 3.0;
            let rows = r.ks.iter().zip(&r.l_hat).map(|(&k, &l)| row(k as f64, l, 3.0 * lo, trials, spread_ok)).collect();
            (rows, serde_json::json!({"report": r, "l_hat_two_exact": l_hat_two(d), "spread": r.spread()}))
        }
        LemmaName::InversePerturbation => {
            let pairs = trials_or(500);
            let sweep = deviation::inverse_perturbation_sweep(pairs, args.max_dim.unwrap_or(8), seed)?;
            let rows = sweep.checks.iter().map(|c| row(c.eps, c.lhs, c.rhs, 1, c.holds)).collect();
            (rows, serde_json::json!({"pairs": sweep.pairs, "holds": sweep.holds, "worst_ratio": sweep.worst_ratio}))
        }
        LemmaName::NetProfile => {
            let (d, n, trials) = (d_or(60), n_or(180), trials_or(100));
            let r = net_profile_event(d, n, args.directions.unwrap_or(500), trials, seed)?;
            let miss = miss_or(0.01);
            let mut rows: Vec<CheckRow> = r.constants.iter().zip(&r.frequencies).map(|(&c, &f)| hard_row(c, 1.0 - f, miss, trials)).collect();
            let exact = if d <= 3 && d >= 2 {
                let check = net_factor_check(d, trials as usize, seed)?;
                rows.push(hard_row(2.0, check.worst_ratio, 2.0, trials));
                Some(check)
            } else {
                None
            };
            (rows, serde_json::json!({"profile": r, "exact_net": exact}))
        }
        LemmaName::DirectionDiagnostics => {
            let (d, n, trials) = (d_or(60), n_or(180), trials_or(200));
            let level = args.level.unwrap_or(0.25);
            let r = direction_profile(d, n, args.directions.unwrap_or(50), trials, args.eta.unwrap_or(0.5), seed)?;
            let above = r.abs_f.iter().filter(|&&v| v > level).count() as f64 / r.abs_f.len() as f64;
            let rows = vec![hard_row(level, above, miss_or(0.01), trials)];
            let details = serde_json::json!({
                "d": r.d, "n": r.n, "trials": r.trials, "num_directions": r.num_directions, "eta": r.eta,
                "skipped": r.skipped, "q99": r.q99, "max": r.max, "abs_f1_max": r.abs_f1_max, "abs_f2_max": r.abs_f2_max,
            });
            (rows, details)
        }
    };
    let pass = rows.iter().all(|r| r.pass);
    Ok(LemmaReport { name: args.name, master_seed: seed, pass, rows, details })
}

pub fn run(args: &LemmaArgs, settings: &Resolved) -> Result<Outcome, CliError> {
    let report = evaluate(args, settings.seed, settings.file.trials)?;
    let payload = match settings.format.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Csv => lemma_table(&report.rows).render(),
        OutputFormat::Json => output::json(&report),
    };
    let status = if report.pass { ExitStatus::Pass } else { ExitStatus::BoundFailure };
    Ok(Outcome { payload, status })
}
