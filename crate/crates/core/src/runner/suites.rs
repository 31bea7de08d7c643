use rand::Rng;
use rand_distr::StandardNormal;

use crate::bayes::{bayes_predict, bayes_rate};
use crate::error::Result;
use crate::flow::{default_dt, integrate_flow, suggested_horizon, FlowState, FlowTrajectory};
use crate::linalg::{Mat, Vector};
use crate::predictors::{
    predict_gd_beta_prompt, predict_lsa_prompt, predict_ltb_reduced_prompt, GdBetaParams, LsaParamsReduced,
    LtbParamsReduced,
};
use crate::risk::{
    canonical_ltb_optimum, central_gradient, check_gd_beta_optimality, check_ltb_optimality, default_tolerance,
    excess_risk_gd_beta, fourth_moment_closed, gap_lower_bound, lambda_h, min_risk_gd_beta, minimize_lsa_risk_with,
    monte_carlo_fourth_moment, monte_carlo_paired, monte_carlo_risks, omega, optimal_gamma, risk_gd_beta_closed,
    risk_lsa_closed, risk_ltb_closed, LsaSearchOptions, RiskReport,
};
use crate::runner::config::{Auto, ExperimentConfig, InitRule, Suite};
use crate::runner::report::{CheckRecord, SuiteReport};
use crate::task::{substream, Prompt, TaskSpec};

/// Monte-Carlo agreement threshold in standard errors.
pub const Z_LIMIT: f64 = 4.0;

/// Substream indices for parameter draws; prompt draws use `0..MC_SHARDS`.
const PARAM_STREAM: u64 = 1 << 32;

/// Output of a suite run; `trajectory` is set by the flow suite.
#[derive(Clone, Debug)]
pub struct SuiteOutput {
    pub report: SuiteReport,
    pub trajectory: Option<FlowTrajectory>,
}

fn randn(rng: &mut impl Rng, r: usize, c: usize, scale: f64) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal) * scale)
}

fn randv(rng: &mut impl Rng, n: usize, scale: f64) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal) * scale)
}

/// Random parameters for each family at scale `1/√d`.
pub struct RandomParams {
    pub gd: GdBetaParams,
    pub lsa: LsaParamsReduced,
    pub ltb: LtbParamsReduced,
}

pub fn random_params(spec: &TaskSpec, seed: u64, stream: u64) -> RandomParams {
    let d = spec.dim();
    let s = 1.0 / (d as f64).sqrt();
    let mut rng = substream(seed, PARAM_STREAM + stream);
    let gd = GdBetaParams {
        beta: spec.beta_star() + randv(&mut rng, d, s),
        gamma: randn(&mut rng, d, d, s),
    };
    let lsa = LsaParamsReduced {
        u11: randn(&mut rng, d, d, s),
        u12: randv(&mut rng, d, s * 0.5),
        u21: randv(&mut rng, d, s),
        u_last: rng.sample::<f64, _>(StandardNormal),
    };
    let ltb = LtbParamsReduced {
        v11: randn(&mut rng, d, d, s),
        v12: randv(&mut rng, d, s * 0.5),
        v21: randv(&mut rng, d, s),
        v_last: rng.sample::<f64, _>(StandardNormal),
        gamma: randv(&mut rng, d, s),
    };
    RandomParams { gd, lsa, ltb }
}

fn mc_record(name: &str, closed: f64, r: &RiskReport) -> CheckRecord {
    let r = r.clone().with_closed_form(closed);
    let z = r.z_score().unwrap_or(f64::INFINITY);
    CheckRecord::new(name, z <= Z_LIMIT)
        .closed_form(closed)
        .estimate(r.estimate)
        .std_err(r.std_err)
        .bound(Z_LIMIT)
        .note(format!("z = {z:.3}"))
}

/// Closed-form risks of every family against common-prompt Monte-Carlo.
pub fn risk_equivalence_records(spec: &TaskSpec, n: u64, seed: u64, stream: u64) -> Result<Vec<CheckRecord>> {
    let p = random_params(spec, seed, stream);
    let closed = [
        risk_lsa_closed(spec, &LsaParamsReduced::zeros(spec.dim()))?,
        risk_gd_beta_closed(spec, &p.gd)?,
        risk_lsa_closed(spec, &p.lsa)?,
        risk_ltb_closed(spec, &p.ltb)?,
    ];
    type Pred<'a> = Box<dyn Fn(&Prompt) -> f64 + Sync + 'a>;
    let preds: Vec<Pred> = vec![
        Box::new(|_: &Prompt| 0.0),
        Box::new(|pr: &Prompt| predict_gd_beta_prompt(&p.gd, pr).expect("validated shapes")),
        Box::new(|pr: &Prompt| predict_lsa_prompt(&p.lsa, pr).expect("validated shapes")),
        Box::new(|pr: &Prompt| predict_ltb_reduced_prompt(&p.ltb, pr).expect("validated shapes")),
    ];
    let reports = monte_carlo_risks(spec, &preds, n, seed)?;
    let names = ["zero_predictor", "gd_beta", "lsa", "ltb"];
    Ok(names
        .iter()
        .zip(closed.iter().zip(&reports))
        .map(|(name, (c, r))| mc_record(name, *c, r))
        .collect())
}

fn risk_equivalence(cfg: &ExperimentConfig, spec: &TaskSpec) -> Result<Vec<CheckRecord>> {
    let mut records = risk_equivalence_records(spec, cfg.n_samples, cfg.seed, 0)?;
    let zero_formula = spec.sigma2() + spec.beta_star_h_norm2() + spec.signal();
    let zero_closed = records[0].closed_form.unwrap_or(f64::NAN);
    records.push(
        CheckRecord::new(
            "zero_predictor_formula",
            (zero_closed - zero_formula).abs() <= 1e-10 * (1.0 + zero_formula),
        )
        .closed_form(zero_formula)
        .estimate(zero_closed),
    );
    Ok(records)
}

fn flatten_gd(p: &GdBetaParams) -> Vec<f64> {
    p.beta.iter().chain(p.gamma.iter()).copied().collect()
}

fn unflatten_gd(d: usize, theta: &[f64]) -> GdBetaParams {
    GdBetaParams {
        beta: Vector::from_column_slice(&theta[..d]),
        gamma: Mat::from_column_slice(d, d, &theta[d..]),
    }
}

/// Rank of `H^{1/2}Ψ^{1/2}`.
pub fn cross_rank(spec: &TaskSpec) -> usize {
    let c = spec.h_sqrt().matrix() * spec.psi_sqrt().matrix();
    let scale = c.norm();
    c.singular_values().iter().filter(|&&s| s > 1e-10 * scale).count()
}

fn minima(cfg: &ExperimentConfig, spec: &TaskSpec) -> Result<Vec<CheckRecord>> {
    let d = spec.dim();
    let mut records = Vec::new();
    let om = omega(spec)?;
    let lam = lambda_h(spec);
    let comm = (om.matrix() * &lam - &lam * om.matrix()).norm();
    records.push(CheckRecord::new("omega_commutes", comm <= 1e-9).estimate(comm).bound(1e-9));

    let gstar = optimal_gamma(spec)?;
    let min = min_risk_gd_beta(spec)?;
    records.push(
        CheckRecord::new("gamma_star_trace", gstar.iter().all(|v| v.is_finite()))
            .closed_form(gstar.trace())
            .note(format!("Γ*[0;0] = {:.6e}", gstar[(0, 0)])),
    );
    records.push(CheckRecord::new("min_risk_gd_beta", min.is_finite()).closed_form(min));

    let opt = GdBetaParams {
        beta: spec.beta_star().clone(),
        gamma: gstar.clone(),
    };
    let excess = excess_risk_gd_beta(spec, &opt)?;
    records.push(
        CheckRecord::new("excess_at_optimum", excess.abs() <= 1e-10)
            .estimate(excess)
            .bound(1e-10),
    );

    let f = |theta: &[f64]| risk_gd_beta_closed(spec, &unflatten_gd(d, theta)).unwrap_or(f64::NAN);
    let grad = central_gradient(&f, &flatten_gd(&opt));
    let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    records.push(
        CheckRecord::new("gradient_at_optimum", gnorm <= 1e-6)
            .estimate(gnorm)
            .bound(1e-6),
    );

    let mut spread: f64 = 0.0;
    for bs in [Vector::zeros(d), Vector::from_element(d, 1.0), Vector::from_element(d, 10.0)] {
        let other = min_risk_gd_beta(&spec.with_beta_star(bs)?)?;
        spread = spread.max((other - min).abs());
    }
    records.push(
        CheckRecord::new("min_risk_beta_star_invariant", spread <= 1e-12)
            .closed_form(min)
            .estimate(spread)
            .bound(1e-12),
    );

    let tol = default_tolerance(spec)?;
    records.push(CheckRecord::new("gd_beta_optimality_check", check_gd_beta_optimality(spec, &opt, tol)?).bound(tol));

    let canonical = canonical_ltb_optimum(spec, 1.0)?;
    let ltb_risk = risk_ltb_closed(spec, &canonical)?;
    records.push(
        CheckRecord::new("ltb_optimum_risk", (ltb_risk - min).abs() <= 1e-9 * (1.0 + min))
            .closed_form(min)
            .estimate(ltb_risk)
            .bound(1e-9 * (1.0 + min)),
    );
    for c in [1.0, -2.0, 0.5, 10.0] {
        let name = format!("ltb_optimality_scale_{c}");
        let p = canonical_ltb_optimum(spec, c)?;
        records.push(match check_ltb_optimality(spec, &p, tol) {
            Ok(ok) => CheckRecord::new(name, ok).bound(tol),
            Err(crate::error::IclError::NotApplicable(msg)) => CheckRecord::new(name, true).note(format!("not applicable: {msg}")),
            Err(e) => return Err(e),
        });
    }

    let mc = monte_carlo_risks(
        spec,
        &[|pr: &Prompt| predict_gd_beta_prompt(&opt, pr).expect("validated shapes")],
        cfg.n_samples,
        cfg.seed,
    )?;
    records.push(mc_record("min_risk_monte_carlo", min, &mc[0]));
    Ok(records)
}

fn gap(cfg: &ExperimentConfig, spec: &TaskSpec) -> Result<Vec<CheckRecord>> {
    let opts = LsaSearchOptions {
        max_iters: cfg.max_iters,
        ..Default::default()
    };
    let found = minimize_lsa_risk_with(spec, cfg.restarts, cfg.seed, &opts)?;
    let min = min_risk_gd_beta(spec)?;
    let bound = gap_lower_bound(spec);
    let mut records = vec![
        CheckRecord::new("gap_lower_bound", bound.is_finite() && bound >= 0.0).closed_form(bound),
        CheckRecord::new("lsa_not_below_gd_min", found.risk >= min - 1e-8)
            .closed_form(min)
            .estimate(found.risk)
            .bound(min - 1e-8)
            .note(format!("best restart {}", found.restart)),
    ];
    let rank = cross_rank(spec);
    let record = if spec.beta_star_h_norm2() == 0.0 {
        CheckRecord::new("gap_certificate", found.risk <= min + 1e-4)
            .closed_form(min)
            .estimate(found.risk)
            .bound(min + 1e-4)
            .note("zero prior mean: LSA attains the GD-β minimum")
    } else if rank >= 2 {
        CheckRecord::new("gap_certificate", found.risk >= min + bound - 1e-6)
            .closed_form(min + bound)
            .estimate(found.risk)
            .bound(min + bound - 1e-6)
    } else {
        CheckRecord::new("gap_certificate", true)
            .closed_form(min + bound)
            .estimate(found.risk)
            .note(format!("not certified: rank(H^(1/2) Ψ^(1/2)) = {rank} < 2"))
    };
    records.push(record);
    Ok(records)
}

pub fn flow_init(spec: &TaskSpec, rule: InitRule) -> Result<FlowState> {
    let d = spec.dim();
    Ok(match rule {
        InitRule::Zero => FlowState::new(Vector::zeros(d), Mat::zeros(d, d)),
        InitRule::Optimum => FlowState::new(spec.beta_star().clone(), optimal_gamma(spec)?),
        InitRule::Random(seed) => {
            let mut rng = substream(seed, PARAM_STREAM);
            let s = 1.0 / (d as f64).sqrt();
            FlowState::new(spec.beta_star() + randv(&mut rng, d, 1.0), randn(&mut rng, d, d, s))
        }
    })
}

/// Certification checks on a recorded trajectory.
pub fn flow_records(traj: &FlowTrajectory) -> Vec<CheckRecord> {
    let ms = &traj.metrics;
    let max_rise = ms
        .windows(2)
        .map(|w| w[1].excess_risk - w[0].excess_risk)
        .fold(f64::NEG_INFINITY, f64::max);
    let bound_ratio = ms
        .iter()
        .filter(|m| m.rate_bound > 0.0)
        .map(|m| m.beta_img_dist.powi(2) / m.rate_bound)
        .fold(0.0, f64::max);
    let bound_ok = ms.iter().all(|m| m.rate_bound.is_nan() || m.beta_img_dist.powi(2) <= m.rate_bound * (1.0 + 1e-6));
    let beta_drift = ms.iter().map(|m| m.beta_null_drift).fold(0.0, f64::max);
    let gamma_drift = ms.iter().map(|m| m.gamma_null_drift).fold(0.0, f64::max);
    let last = traj.final_metrics();
    vec![
        CheckRecord::new("excess_risk_monotone", max_rise <= 1e-9)
            .estimate(max_rise)
            .bound(1e-9),
        CheckRecord::new("beta_rate_bound", bound_ok)
            .estimate(bound_ratio)
            .bound(1.0 + 1e-6)
            .note("max of squared distance over bound"),
        CheckRecord::new("beta_null_drift", beta_drift <= 1e-8)
            .estimate(beta_drift)
            .bound(1e-8),
        CheckRecord::new("gamma_null_drift", gamma_drift <= 1e-8)
            .estimate(gamma_drift)
            .bound(1e-8),
        CheckRecord::new("terminal_beta", last.beta_img_dist <= 1e-5)
            .estimate(last.beta_img_dist)
            .bound(1e-5),
        CheckRecord::new("terminal_gamma", last.gamma_img_dist <= 1e-4)
            .estimate(last.gamma_img_dist)
            .bound(1e-4),
        CheckRecord::new("terminal_excess_risk", last.excess_risk.is_finite())
            .estimate(last.excess_risk)
            .note(format!("T = {:.6e}", last.t)),
    ]
}

/// Resolves `auto` step and horizon for `init`.
pub fn flow_schedule(spec: &TaskSpec, init: &FlowState, dt: Auto, horizon: Auto) -> Result<(f64, f64)> {
    let dt = match dt {
        Auto::Value(v) => v,
        Auto::Auto => default_dt(spec, &init.beta)?,
    };
    let t = match horizon {
        Auto::Value(v) => v,
        Auto::Auto => suggested_horizon(spec, init, 1e-12, 1e-6)?.max(2.0 * dt),
    };
    Ok((dt, t))
}

fn flow(cfg: &ExperimentConfig, spec: &TaskSpec) -> Result<(Vec<CheckRecord>, FlowTrajectory)> {
    let init = flow_init(spec, cfg.init)?;
    let (dt, t) = flow_schedule(spec, &init, cfg.dt, cfg.horizon)?;
    let traj = integrate_flow(spec, &init, dt, t, cfg.record_every)?;
    let mut records = flow_records(&traj);
    records.push(
        CheckRecord::new("time_scale", true)
            .estimate(dt)
            .note("dynamics are (β; Γ)' = −½∇R; the undamped flow runs twice as fast"),
    );
    Ok((records, traj))
}

fn bayes(cfg: &ExperimentConfig, spec: &TaskSpec) -> Result<Vec<CheckRecord>> {
    let min = min_risk_gd_beta(spec)?;
    let opt = GdBetaParams {
        beta: spec.beta_star().clone(),
        gamma: optimal_gamma(spec)?,
    };
    let paired = monte_carlo_paired(
        spec,
        |p: &Prompt| bayes_predict(spec, p).expect("validated shapes"),
        |p: &Prompt| predict_gd_beta_prompt(&opt, p).expect("validated shapes"),
        cfg.n_samples,
        cfg.seed,
    )?;
    let mut records = vec![
        CheckRecord::new("bayes_dominates_gd_beta", paired.diff <= Z_LIMIT * paired.diff_std_err)
            .closed_form(min)
            .estimate(paired.first.estimate)
            .std_err(paired.diff_std_err)
            .bound(paired.second.estimate + Z_LIMIT * paired.diff_std_err)
            .note(format!("paired difference {:.6e}", paired.diff)),
        mc_record("gd_beta_optimum_monte_carlo", min, &paired.second),
    ];
    let rate = bayes_rate(spec)?;
    let excess = min - spec.sigma2();
    let rec = if spec.signal() > spec.sigma2() {
        CheckRecord::new("rate_ratio", true)
            .closed_form(rate.rate)
            .estimate(excess)
            .note("not checked: tr(HΨ) > σ²")
    } else if rate.rate == 0.0 {
        CheckRecord::new("rate_ratio", excess.abs() <= 1e-12)
            .closed_form(0.0)
            .estimate(excess)
            .note("zero rate")
    } else {
        let ratio = excess / rate.rate;
        CheckRecord::new("rate_ratio", (1.0 / 8.0..=8.0).contains(&ratio))
            .closed_form(rate.rate)
            .estimate(ratio)
            .bound(8.0)
            .note("constant 8 is an artifact choice")
    };
    records.push(rec);
    Ok(records)
}

/// Random symmetric `A` with standard normal entries.
pub fn random_symmetric(d: usize, seed: u64, stream: u64) -> Mat {
    let mut rng = substream(seed, PARAM_STREAM + stream);
    let g = randn(&mut rng, d, d, 1.0);
    (&g + g.transpose()) * 0.5
}

pub fn fourth_moment_record(name: &str, spec: &TaskSpec, a: &Mat, n: u64, seed: u64) -> Result<CheckRecord> {
    let closed = fourth_moment_closed(spec.h(), a, spec.context_len())?;
    let (mean, se) = monte_carlo_fourth_moment(spec.h(), a, spec.context_len(), n, seed)?;
    let mut worst: f64 = 0.0;
    for ((c, m), s) in closed.iter().zip(mean.iter()).zip(se.iter()) {
        let diff = (c - m).abs();
        let z = if *s > 0.0 {
            diff / s
        } else if diff <= 1e-12 * (1.0 + c.abs()) {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z);
    }
    Ok(CheckRecord::new(name, worst <= Z_LIMIT)
        .closed_form(closed.trace())
        .estimate(mean.trace())
        .bound(Z_LIMIT)
        .note(format!("max entrywise z = {worst:.3}")))
}

fn moments(cfg: &ExperimentConfig, spec: &TaskSpec) -> Result<Vec<CheckRecord>> {
    let d = spec.dim();
    let a = random_symmetric(d, cfg.seed, 1);
    let mut records = vec![fourth_moment_record("fourth_moment", spec, &a, cfg.n_samples, cfg.seed)?];

    let h = spec.h().matrix();
    let single = fourth_moment_closed(spec.h(), &a, 1)?;
    let direct = h * (&a + a.transpose()) * h + h * (&a * h).trace();
    let err = (&single - &direct).norm();
    records.push(
        CheckRecord::new("single_vector_identity", err <= 1e-10 * (1.0 + direct.norm()))
            .estimate(err)
            .bound(1e-10 * (1.0 + direct.norm())),
    );
    Ok(records)
}

fn run_one(cfg: &ExperimentConfig, spec: &TaskSpec, suite: Suite) -> Result<(Vec<CheckRecord>, Option<FlowTrajectory>)> {
    Ok(match suite {
        Suite::RiskEquivalence => (risk_equivalence(cfg, spec)?, None),
        Suite::Minima => (minima(cfg, spec)?, None),
        Suite::Gap => (gap(cfg, spec)?, None),
        Suite::Flow => {
            let (r, t) = flow(cfg, spec)?;
            (r, Some(t))
        }
        Suite::Bayes => (bayes(cfg, spec)?, None),
        Suite::Moments => (moments(cfg, spec)?, None),
        Suite::All => unreachable!("expanded by run_suite"),
    })
}

/// Runs the configured suite in memory. `all` prefixes record names with the suite.
pub fn run_suite_in_memory(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    let spec = cfg.task_spec()?;
    let (records, trajectory) = if cfg.suite == Suite::All {
        let mut all = Vec::new();
        let mut traj = None;
        for s in Suite::INDIVIDUAL {
            let (recs, t) = run_one(cfg, &spec, s)?;
            all.extend(recs.into_iter().map(|mut r| {
                r.name = format!("{}/{}", s.name(), r.name);
                r
            }));
            traj = traj.or(t);
        }
        (all, traj)
    } else {
        run_one(cfg, &spec, cfg.suite)?
    };
    Ok(SuiteOutput {
        report: SuiteReport::new(cfg.suite.name(), cfg.seed, records),
        trajectory,
    })
}

/// Runs the suite and writes the report, records and (for flow) `trajectory.csv` to `cfg.out`.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let out = run_suite_in_memory(cfg)?;
    out.report.write(&cfg.out)?;
    if let Some(traj) = &out.trajectory {
        std::fs::write(cfg.out.join("trajectory.csv"), traj.to_csv())?;
    }
    Ok(out.report)
}
