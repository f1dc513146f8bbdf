//! The four commands. Each builds a [`Report`] from a [`RunConfig`].

use crate::config::{CommandName, GridSpec, RunConfig, SampleTarget};
use crate::error::{CliError, CliResult};
use crate::report::{Report, Table};
use gffcube::field::{field_covariance, sample_field_spectral, SpectralNoise};
use gffcube::limits::{
    inversion_residuals, kappa_cov, kappa_cov_series, kappa_sample, levelset_clt_check,
    levelset_cov_matrix, levelset_direct, parseval_check, transform_cov, InversionGrid, KappaSpec,
    MixingLaw,
};
use gffcube::pointproc::{Sign, SpinMeasure, YLaw};
use gffcube::rng::{replicate_rng, root_rng, run_blocks, SimRng};
use gffcube::stats::{covariance_estimate, Estimate, Moments, ProductMoments, ZSummary};
use gffcube::walk::{green_kernel, green_matrix_oracle, MAX_ORACLE_BITS};
use gffcube::{Error, GreenSpec, IncrementModel};
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde_json::json;

const BLOCK: usize = 1000;
/// Largest N for full-cube samples and verify matrices.
const MAX_SAMPLE_BITS: usize = 20;
const MAX_VERIFY_BITS: usize = 6;
const DEFAULT_T_GRID: [f64; 5] = [-1.5, -0.75, 0.0, 0.75, 1.5];
const DEFAULT_DIMS: [usize; 4] = [50, 100, 200, 400];

pub fn run(cfg: &RunConfig) -> CliResult<Report> {
    match cfg.command {
        Some(CommandName::Green) => green(cfg),
        Some(CommandName::Sample) => match cfg.target {
            Some(SampleTarget::Field) => sample_field(cfg),
            Some(SampleTarget::Levelset) => sample_levelset(cfg),
            Some(SampleTarget::Kappa) => sample_kappa(cfg),
            None => Err(CliError::Usage(
                "sample needs a target: field, levelset or kappa".into(),
            )),
        },
        Some(CommandName::Ylaw) => ylaw(cfg),
        Some(CommandName::Limits) => limits(cfg),
        None => Err(CliError::Usage("no command given".into())),
    }
}

fn grid_or(spec: &Option<GridSpec>, default: &[f64]) -> CliResult<Vec<f64>> {
    match spec {
        Some(g) => g.values(),
        None => Ok(default.to_vec()),
    }
}

fn green_spec(cfg: &RunConfig) -> CliResult<GreenSpec> {
    Ok(GreenSpec::new(
        cfg.require_n()?,
        cfg.require_model()?.clone(),
        cfg.require_alpha()?,
    )?)
}

fn z_row(est: Estimate, target: f64) -> [f64; 4] {
    [target, est.value, est.se, est.z_score(target)]
}

fn note_zsummary(report: &mut Report, z: &ZSummary, n_se: f64) {
    report.note("entries", z.entries);
    report.note("within", z.within);
    report.note("fraction_within", z.fraction_within());
    report.note("max_abs_z", z.max_abs_z);
    report.note("n_se", n_se);
}

fn green(cfg: &RunConfig) -> CliResult<Report> {
    let spec = green_spec(cfg)?;
    let n = spec.n;
    let kernel = green_kernel(&spec)?;
    let size = kernel.len() as u64;
    let mut report = Report::new("green", cfg);
    let mut table = Table::new("green", &["x", "y", "green"]);
    let rows: Vec<u64> = match cfg.from {
        Some(x) if x >= size => {
            return Err(CliError::Usage(format!(
                "--from {x} is not a vertex of the {n}-cube"
            )))
        }
        Some(x) => vec![x],
        None if n > MAX_ORACLE_BITS => {
            return Err(CliError::Usage(format!(
                "full tables are limited to N <= {MAX_ORACLE_BITS}; pick a row with --from"
            )))
        }
        None => (0..size).collect(),
    };
    for &x in &rows {
        for y in 0..size {
            table.push(vec![x as f64, y as f64, kernel[(x ^ y) as usize]]);
        }
    }
    report.note("model", spec.model.name());
    report.note("N", n);
    report.note("alpha", spec.alpha);
    report.note("row_sum", kernel.iter().sum::<f64>());
    report.note("quantity", "(1-alpha) G(x, y)");
    if n <= MAX_ORACLE_BITS {
        let oracle = green_matrix_oracle(&spec)?;
        let mut gap: f64 = 0.0;
        for &x in &rows {
            for y in 0..size {
                gap = gap.max((oracle[(x as usize, y as usize)] - kernel[(x ^ y) as usize]).abs());
            }
        }
        report.note("oracle_max_discrepancy", gap);
    }
    report.tables.push(table);
    Ok(report)
}

fn field_draw(spec: &GreenSpec, rng: &mut SimRng) -> CliResult<Vec<f64>> {
    let noise = SpectralNoise::sample(spec.n, rng)?;
    Ok(sample_field_spectral(spec, &noise)?.values)
}

fn levelset_draw(spec: &GreenSpec, rng: &mut SimRng) -> CliResult<Vec<f64>> {
    let noise = SpectralNoise::sample(spec.n, rng)?;
    Ok(levelset_direct(&sample_field_spectral(spec, &noise)?)?.values)
}

/// Per-replicate draws in replicate order, or a verify table of second
/// moments against `analytic`.
fn sample_vectors<D>(
    cfg: &RunConfig,
    report: &mut Report,
    index_name: &str,
    draw: D,
    analytic: impl FnOnce() -> CliResult<DMatrix<f64>>,
    labels: &[f64],
) -> CliResult<()>
where
    D: Fn(&mut SimRng) -> CliResult<Vec<f64>> + Sync,
{
    let replicates = cfg.replicates.unwrap_or(1).max(1);
    report.note("replicates", replicates);
    report.note("seed", cfg.seed);
    if !cfg.verify {
        let draws: Vec<Vec<f64>> = (0..replicates)
            .into_par_iter()
            .map(|r| draw(&mut replicate_rng(cfg.seed, r as u64)))
            .collect::<CliResult<_>>()?;
        let mut table = Table::new("samples", &["replicate", index_name, "value"]);
        for (r, values) in draws.iter().enumerate() {
            for (i, v) in values.iter().enumerate() {
                table.push(vec![r as f64, labels[i], *v]);
            }
        }
        report.tables.push(table);
        return Ok(());
    }
    let dim = labels.len();
    let moments = run_blocks(
        cfg.seed,
        replicates,
        BLOCK,
        |rng, len| -> CliResult<ProductMoments> {
            let mut pm = ProductMoments::new(dim);
            for _ in 0..len {
                pm.push(&draw(rng)?);
            }
            Ok(pm)
        },
        |a, b| Ok(a?.merge(b?)),
    )
    .expect("at least one block")?;
    let target = analytic()?;
    let (s_name, t_name) = (format!("{index_name}_2"), index_name.to_string());
    let mut table = Table::new(
        "verify",
        &[&t_name, &s_name, "analytic", "estimate", "se", "z"],
    );
    let mut pairs = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let est = moments.get(i, j);
            let [a, v, se, z] = z_row(est, target[(i, j)]);
            table.push(vec![labels[i], labels[j], a, v, se, z]);
            pairs.push((est, a));
        }
    }
    let n_se = cfg.n_se();
    let z = ZSummary::from_pairs(pairs, n_se);
    note_zsummary(report, &z, n_se);
    report.note("pass", z.fraction_within() >= 0.99);
    report.tables.push(table);
    Ok(())
}

fn check_sample_dim(cfg: &RunConfig, n: usize) -> CliResult<()> {
    if n > MAX_SAMPLE_BITS {
        return Err(CliError::Usage(format!(
            "full-cube samples are limited to N <= {MAX_SAMPLE_BITS}"
        )));
    }
    if cfg.verify && n > MAX_VERIFY_BITS {
        return Err(CliError::Usage(format!(
            "verify mode is limited to N <= {MAX_VERIFY_BITS}"
        )));
    }
    Ok(())
}

fn sample_field(cfg: &RunConfig) -> CliResult<Report> {
    let spec = green_spec(cfg)?;
    check_sample_dim(cfg, spec.n)?;
    let mut report = Report::new("sample-field", cfg);
    report.note("model", spec.model.name());
    let size = 1usize << spec.n;
    let labels: Vec<f64> = (0..size).map(|x| x as f64).collect();
    let points: Vec<u64> = (0..size as u64).collect();
    sample_vectors(
        cfg,
        &mut report,
        "x",
        |rng| field_draw(&spec, rng),
        || Ok(field_covariance(&spec, &points)?),
        &labels,
    )?;
    Ok(report)
}

fn sample_levelset(cfg: &RunConfig) -> CliResult<Report> {
    let spec = green_spec(cfg)?;
    check_sample_dim(cfg, spec.n)?;
    if !spec.model.is_exchangeable() {
        return Err(
            Error::Unsupported(format!("{} is not exchangeable", spec.model.name())).into(),
        );
    }
    let mut report = Report::new("sample-levelset", cfg);
    report.note("model", spec.model.name());
    let labels: Vec<f64> = (0..=spec.n).map(|v| v as f64).collect();
    sample_vectors(
        cfg,
        &mut report,
        "v",
        |rng| levelset_draw(&spec, rng),
        || Ok(levelset_cov_matrix(&spec)?),
        &labels,
    )?;
    Ok(report)
}

fn kappa_spec(cfg: &RunConfig, default_grid: &[f64]) -> CliResult<KappaSpec> {
    let model = cfg
        .model
        .clone()
        .unwrap_or(IncrementModel::LimitLinear { gamma: 2.0 });
    let law = MixingLaw::from_model(&model)?;
    Ok(KappaSpec::new(law, grid_or(&cfg.grid, default_grid)?)?)
}

fn normals(rng: &mut SimRng, count: usize) -> Vec<f64> {
    (0..count).map(|_| StandardNormal.sample(rng)).collect()
}

fn sample_kappa(cfg: &RunConfig) -> CliResult<Report> {
    let spec = kappa_spec(cfg, &DEFAULT_T_GRID)?;
    let mut report = Report::new("sample-kappa", cfg);
    report.note("truncation", &spec.truncation);
    let order = spec.order();
    let labels = spec.grid.clone();
    sample_vectors(
        cfg,
        &mut report,
        "t",
        |rng| Ok(kappa_sample(&spec, &normals(rng, order + 1))?),
        || {
            let g = &spec.grid;
            let mut m = DMatrix::zeros(g.len(), g.len());
            for (i, &t) in g.iter().enumerate() {
                for (j, &s) in g.iter().enumerate() {
                    m[(i, j)] = kappa_cov_series(&spec, t, s);
                }
            }
            Ok(m)
        },
        &labels,
    )?;
    if cfg.verify {
        // draws carry the truncated series; the limit covariance differs by
        // at most the reported tail bound
        let mut limit = Table::new("limit", &["t", "s", "cov", "truncated_series"]);
        for &t in &spec.grid {
            for &s in &spec.grid {
                limit.push(vec![
                    t,
                    s,
                    kappa_cov(&spec, t, s)?,
                    kappa_cov_series(&spec, t, s),
                ]);
            }
        }
        report.tables.push(limit);
    }
    Ok(report)
}

struct YAcc {
    moments: Vec<Moments>,
    positive: Moments,
    pairs: Vec<(f64, f64)>,
    hist: Vec<u64>,
}

impl YAcc {
    fn new(kmax: usize, bins: usize) -> Self {
        Self {
            moments: vec![Moments::default(); kmax + 1],
            positive: Moments::default(),
            pairs: Vec::new(),
            hist: vec![0; bins],
        }
    }

    fn merge(mut self, other: YAcc) -> YAcc {
        for (a, b) in self.moments.iter_mut().zip(other.moments) {
            *a = a.merge(b);
        }
        self.positive = self.positive.merge(other.positive);
        self.pairs.extend(other.pairs);
        for (a, b) in self.hist.iter_mut().zip(other.hist) {
            *a += b;
        }
        self
    }
}

fn ylaw(cfg: &RunConfig) -> CliResult<Report> {
    let model = cfg.require_model()?;
    let alpha = cfg.require_alpha()?;
    let phi = cfg.phi.unwrap_or(1.0);
    let mut law = YLaw::from_model(model, alpha)?.with_phi(phi)?;
    if let Some(x) = cfg.initial_spin {
        law = law.with_initial(SpinMeasure::delta(x))?;
    }
    let kmax = cfg.kmax.unwrap_or(6);
    let replicates = cfg.replicates.unwrap_or(100_000).max(1);
    let bins = cfg.bins.unwrap_or(0);
    let n_se = cfg.n_se();
    let acc = run_blocks(
        cfg.seed,
        replicates,
        10 * BLOCK,
        |rng, len| -> CliResult<YAcc> {
            let mut acc = YAcc::new(kmax, bins);
            for _ in 0..len {
                let (count, y) = if phi == 1.0 {
                    let (t, y) = law.sample_with_count(rng)?;
                    (Some(t), y)
                } else {
                    (None, law.sample_phi(rng))
                };
                let v = y.value();
                let mut p = 1.0;
                for m in acc.moments.iter_mut() {
                    m.push(p);
                    p *= v;
                }
                acc.positive.push(if !y.negative && !y.is_zero() {
                    1.0
                } else {
                    0.0
                });
                if count.is_some_and(|t| t >= 1) {
                    acc.pairs
                        .push((if y.negative { -1.0 } else { 1.0 }, v.abs()));
                }
                if bins > 0 {
                    let i = (((v + 1.0) * 0.5 * bins as f64) as usize).min(bins - 1);
                    acc.hist[i] += 1;
                }
            }
            Ok(acc)
        },
        |a, b| Ok(a?.merge(b?)),
    )
    .expect("at least one block")?;

    let mut report = Report::new("ylaw", cfg);
    report.note("model", model.name());
    report.note("alpha", alpha);
    report.note("c", law.c());
    report.note("phi", phi);
    report.note("replicates", replicates);
    report.note("seed", cfg.seed);

    let half = law.clone().with_phi(0.5 * phi)?;
    let mut moments = Table::new(
        "moments",
        &["k", "closed_form", "half_moment", "estimate", "se", "z"],
    );
    let mut pairs = Vec::new();
    let mut half_gap: f64 = 0.0;
    for k in 0..=kmax {
        let m = law.moment(k);
        let h = half.moment(k);
        half_gap = half_gap.max((h * h - m).abs());
        let est = acc.moments[k].estimate();
        moments.push(vec![k as f64, m, h, est.value, est.se, est.z_score(m)]);
        pairs.push((est, m));
    }
    let z = ZSummary::from_pairs(pairs, n_se);
    report.note("moments_within", z.within);
    report.note("moments_max_abs_z", z.max_abs_z);
    report.note("half_moment_max_gap", half_gap);
    report.tables.push(moments);

    let thetas = grid_or(&cfg.theta_grid, &[0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0])?;
    let mut laplace = Table::new("laplace", &["theta", "laplace", "positive", "negative"]);
    let curve: Result<(), Error> = thetas.iter().try_for_each(|&th| {
        laplace.push(vec![
            th,
            law.laplace_neg_log_abs(th)?,
            law.joint_sign_laplace(th, Sign::Positive)?,
            law.joint_sign_laplace(th, Sign::Negative)?,
        ]);
        Ok(())
    });
    match curve {
        Ok(()) => {
            report.tables.push(laplace);
            let mut sign = Table::new("sign", &["sign", "probability", "estimate", "se", "z"]);
            let p = law.sign_probability(Sign::Positive)?;
            let est = acc.positive.estimate();
            sign.push(vec![1.0, p, est.value, est.se, est.z_score(p)]);
            let q = law.sign_probability(Sign::Negative)?;
            let neg = Estimate {
                value: 1.0 - est.value,
                se: est.se,
            };
            sign.push(vec![-1.0, q, neg.value, neg.se, neg.z_score(q)]);
            report.tables.push(sign);
        }
        Err(e) => report.note("laplace_unavailable", e.to_string()),
    }
    if acc.pairs.len() >= 2 {
        let cov = covariance_estimate(&acc.pairs);
        report.note(
            "sign_abs_covariance_given_a_step",
            json!({ "estimate": cov.value, "se": cov.se, "z": cov.z_score(0.0), "draws": acc.pairs.len() }),
        );
    }
    if bins > 0 {
        let mut hist = Table::new("histogram", &["lo", "hi", "count", "fraction"]);
        for (i, c) in acc.hist.iter().enumerate() {
            let lo = -1.0 + 2.0 * i as f64 / bins as f64;
            let hi = -1.0 + 2.0 * (i + 1) as f64 / bins as f64;
            hist.push(vec![lo, hi, *c as f64, *c as f64 / replicates as f64]);
        }
        report.tables.push(hist);
    }
    Ok(report)
}

fn limits(cfg: &RunConfig) -> CliResult<Report> {
    let spec = kappa_spec(cfg, &DEFAULT_T_GRID)?;
    let mut report = Report::new("limits", cfg);
    let model = cfg
        .model
        .clone()
        .unwrap_or(IncrementModel::LimitLinear { gamma: 2.0 });
    report.note("model", model.name());
    report.note("truncation", &spec.truncation);
    report.note("seed", cfg.seed);

    if let IncrementModel::LimitLinear { gamma } = model {
        let dims = cfg.dims.clone().unwrap_or(DEFAULT_DIMS.to_vec());
        let clt = levelset_clt_check(gamma, &dims, &spec.grid)?;
        let mut table = Table::new("clt", &["N", "alpha", "gap"]);
        for g in &clt.gaps {
            table.push(vec![g.n as f64, g.alpha, g.gap]);
        }
        report.note("clt_decreasing", clt.decreasing);
        report.note("clt_final_gap", clt.gaps.last().map(|g| g.gap));
        report.tables.push(table);
    } else {
        report.note(
            "clt_unavailable",
            "the level-set check is defined for limit-linear",
        );
    }

    let mut cov = Table::new("kappa_cov", &["t", "s", "cov", "truncated_series"]);
    for &t in &spec.grid {
        for &s in &spec.grid {
            cov.push(vec![
                t,
                s,
                kappa_cov(&spec, t, s)?,
                kappa_cov_series(&spec, t, s),
            ]);
        }
    }
    report.tables.push(cov);

    let thetas = grid_or(&cfg.theta_grid, &[0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0])?;
    let mut transform = Table::new("transform", &["theta", "full", "U", "V"]);
    for &th in &thetas {
        let c = transform_cov(&spec.law, th, th)?;
        transform.push(vec![th, c.full, c.even, c.odd]);
    }
    report.tables.push(transform);

    match parseval_check(&spec.law) {
        Ok(p) => {
            let mut t = Table::new("parseval", &["lhs", "rhs", "t_side"]);
            t.push(vec![p.lhs, p.rhs, p.t_side]);
            report.note("parseval_gap", (p.lhs - p.rhs).abs());
            report.tables.push(t);
        }
        Err(Error::Unsupported(msg)) => report.note("parseval_unavailable", msg),
        Err(e) => return Err(e.into()),
    }

    let zeta = normals(&mut root_rng(cfg.seed), spec.order() + 1);
    let residuals = inversion_residuals(
        &spec,
        &zeta,
        &spec.grid,
        InversionGrid::for_order(spec.order()),
    )?;
    let mut inv = Table::new("inversion", &["t", "residual"]);
    for (t, r) in spec.grid.iter().zip(&residuals) {
        inv.push(vec![*t, *r]);
    }
    report.note(
        "inversion_max_residual",
        residuals.iter().fold(0.0f64, |m, r| m.max(*r)),
    );
    report.tables.push(inv);
    Ok(report)
}
