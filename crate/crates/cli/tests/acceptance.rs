//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero when any
//! criterion fails.

use gffcube::bits::{binomial_i128, character, weight};
use gffcube::field::{
    field_covariance, gff_log_density_check, sample_field_naive, sample_field_spectral,
    SpectralNoise,
};
use gffcube::limits::{
    inversion_residuals, kappa_cov_mixture, kappa_cov_resolvent, kappa_cov_series,
    levelset::representation_matrix, levelset_clt_check, levelset_cov_matrix, levelset_direct,
    parseval_check, transform_at, transform_cov, InversionGrid, KappaSpec, MixingLaw,
};
use gffcube::pointproc::{
    beta_example_atom, beta_example_density, beta_example_interval, killed_measure_moments,
    sample_beta_example, Sign, YLaw,
};
use gffcube::quadrature::integrate;
use gffcube::rng::{root_rng, run_blocks, SimRng};
use gffcube::stats::{
    chi_square, chi_square_critical, covariance_estimate, Moments, ProductMoments, ZSummary,
};
use gffcube::walk::{green_matrix_oracle, green_matrix_spectral, green_spectral};
use gffcube::{GreenSpec, IncrementModel, KrawtchoukBasis};
use num_rational::Ratio;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn normals(rng: &mut SimRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn discrete_model() -> IncrementModel {
    IncrementModel::DeFinettiDiscrete {
        atoms: vec![0.15, 0.6],
        weights: vec![0.4, 0.6],
    }
}

fn green_oracle() -> Outcome {
    let t0 = Instant::now();
    let models = [
        IncrementModel::SingleFlip,
        IncrementModel::MFlip { m: 2 },
        IncrementModel::IidBernoulli { p: 0.3 },
        discrete_model(),
        IncrementModel::RandomSiteHalf,
        IncrementModel::MarkovEntries {
            initial: [0.7, 0.3],
            transition: [[0.8, 0.2], [0.4, 0.6]],
        },
    ];
    let mut worst: f64 = 0.0;
    for model in &models {
        for n in 2..=4 {
            for alpha in [0.3, 0.5, 0.9] {
                let spec = GreenSpec::new(n, model.clone(), alpha).unwrap();
                let d = green_matrix_spectral(&spec).unwrap() - green_matrix_oracle(&spec).unwrap();
                worst = worst.max(d.amax());
            }
        }
    }
    let el = t0.elapsed();
    outcome(
        worst < 1e-10 && el < Duration::from_secs(10),
        format!("max error {worst:.2e}, {:.2} s", el.as_secs_f64()),
    )
}

fn one_step_mixing() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 1..=10 {
        for alpha in [0.1, 0.5, 0.9] {
            let spec = GreenSpec::new(n, IncrementModel::IidBernoulli { p: 0.5 }, alpha).unwrap();
            let g = green_matrix_spectral(&spec).unwrap();
            let size = 1usize << n;
            let off = alpha / size as f64;
            for x in 0..size {
                for y in 0..size {
                    let want = if x == y { 1.0 - alpha + off } else { off };
                    worst = worst.max((g[(x, y)] - want).abs());
                }
            }
        }
    }
    outcome(worst < 1e-12, format!("max error {worst:.2e} over N <= 10"))
}

fn gff_density() -> Outcome {
    let mut rng = root_rng(3);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for model in [IncrementModel::SingleFlip, discrete_model()] {
        for n in [2usize, 3] {
            let spec = GreenSpec::new(n, model.clone(), 0.6).unwrap();
            for _ in 0..100 {
                let g = normals(&mut rng, 1 << n);
                let (lhs, rhs) = gff_log_density_check(&spec, &g).unwrap();
                worst = worst.max((lhs - rhs).abs());
                count += 1;
            }
        }
    }
    outcome(
        worst < 1e-9,
        format!("max |LHS - RHS| {worst:.2e} over {count} vectors"),
    )
}

fn field_mc() -> Outcome {
    let t0 = Instant::now();
    let spec = GreenSpec::new(4, IncrementModel::SingleFlip, 0.5).unwrap();
    let reps = 200_000;
    let pm = run_blocks(
        41,
        reps,
        1000,
        |rng, len| {
            let mut pm = ProductMoments::new(16);
            for _ in 0..len {
                let noise = SpectralNoise::sample(4, rng).unwrap();
                pm.push(&sample_field_spectral(&spec, &noise).unwrap().values);
            }
            pm
        },
        ProductMoments::merge,
    )
    .unwrap();
    let points: Vec<u64> = (0..16).collect();
    let cov = field_covariance(&spec, &points).unwrap();
    let z = ZSummary::from_pairs(
        (0..16)
            .flat_map(|i| (0..16).map(move |j| (i, j)))
            .map(|(i, j)| (pm.get(i, j), cov[(i, j)])),
        3.0,
    );
    let el = t0.elapsed();
    outcome(
        z.fraction_within() >= 0.99 && el < Duration::from_secs(60),
        format!(
            "{}/{} within 3 SE, max |z| {:.2}, {:.2} s",
            z.within,
            z.entries,
            z.max_abs_z,
            el.as_secs_f64()
        ),
    )
}

fn ylaw() -> Outcome {
    // ξ = ±0.6 with equal weights: symmetric spins
    let law = YLaw::from_model(
        &IncrementModel::DeFinettiDiscrete {
            atoms: vec![0.2, 0.8],
            weights: vec![0.5, 0.5],
        },
        0.5,
    )
    .unwrap();
    let half = law.clone().with_phi(0.5).unwrap();
    let mut rng = root_rng(5);
    let mut moments = [Moments::default(); 7];
    let mut positive = Moments::default();
    let mut pairs = Vec::new();
    for _ in 0..200_000 {
        let (t, y) = law.sample_with_count(&mut rng).unwrap();
        let v = y.value();
        for (k, m) in moments.iter_mut().enumerate() {
            m.push(v.powi(k as i32));
        }
        positive.push(if y.negative { 0.0 } else { 1.0 });
        if t >= 1 {
            pairs.push((if y.negative { -1.0 } else { 1.0 }, v.abs()));
        }
    }
    let c = law.c();
    let mut ok = true;
    let mut max_z: f64 = 0.0;
    let mut half_gap: f64 = 0.0;
    for (k, m) in moments.iter().enumerate() {
        let want = 1.0 / (1.0 + c * (1.0 - law.spin.moment(k)));
        let z = m.estimate().z_score(want).abs();
        max_z = max_z.max(z);
        ok &= z <= 3.0;
        half_gap = half_gap.max((half.moment(k).powi(2) - law.moment(k)).abs());
    }
    ok &= half_gap < 1e-14;
    let p = law.sign_probability(Sign::Positive).unwrap();
    let zp = positive.estimate().z_score(p);
    ok &= (p - 0.75).abs() < 1e-15 && zp.abs() <= 3.0;
    let cov = covariance_estimate(&pairs);
    let zc = cov.z_score(0.0);
    ok &= zc.abs() <= 3.0;
    outcome(
        ok,
        format!(
            "moments max |z| {max_z:.2}; max |m_k^2 - M_k| {half_gap:.1e}; P(+) {p} (z {zp:.2}); \
             Cov(sign, |Y|) given a step z {zc:.2}"
        ),
    )
}

fn killed_measure() -> Outcome {
    let model = discrete_model();
    let law = YLaw::from_model(&model, 0.7).unwrap();
    let spec = GreenSpec::new(3, model, 0.7).unwrap();
    let mut worst: f64 = 0.0;
    for y in 0..8u64 {
        let g = green_spectral(&spec, 0, y).unwrap();
        worst = worst.max((killed_measure_moments(&law, weight(y), 3).unwrap() - g).abs());
    }
    outcome(worst < 1e-10, format!("max error {worst:.2e}"))
}

fn beta_example() -> Outcome {
    let mut ok = true;
    let mut details = Vec::new();
    for (a, alpha, seed) in [(3.0, 0.4, 7u64), (1.5, 0.6, 8)] {
        let cont = 2.0
            * integrate(
                |z| beta_example_density(a, 1.0, alpha, z).unwrap(),
                0.0,
                1.0,
                1e-12,
            )
            .unwrap();
        let mass_err = (cont - alpha)
            .abs()
            .max((cont + beta_example_atom(alpha) - 1.0).abs());
        let bins = 40;
        let mut counts = vec![0u64; bins + 1];
        let mut rng = root_rng(seed);
        for _ in 0..200_000 {
            let y = sample_beta_example(a, 1, alpha, &mut rng).unwrap();
            if y.log_abs == 0.0 && !y.negative {
                counts[bins] += 1;
            } else {
                let i = (((y.value() + 1.0) * 0.5 * bins as f64) as usize).min(bins - 1);
                counts[i] += 1;
            }
        }
        let mut probs: Vec<f64> = (0..bins)
            .map(|i| {
                let lo = -1.0 + 2.0 * i as f64 / bins as f64;
                beta_example_interval(a, alpha, lo, lo + 2.0 / bins as f64)
            })
            .collect();
        probs.push(beta_example_atom(alpha));
        let (stat, dof) = chi_square(&counts, &probs, 5.0);
        let crit = chi_square_critical(dof, 0.99);
        ok &= mass_err < 1e-9 && stat < crit;
        details.push(format!(
            "a={a} alpha={alpha}: mass err {mass_err:.1e}, chi2 {stat:.1}/{crit:.1} ({dof} dof)"
        ));
    }
    outcome(ok, details.join("; "))
}

fn krawtchouk() -> Outcome {
    let mut ok = true;
    for n in 1..=12usize {
        let kb = KrawtchoukBasis::new(n).unwrap();
        let two_n = Ratio::from_integer(1i128 << n);
        for j in 0..=n {
            for k in 0..=n {
                let mut s = Ratio::from_integer(0i128);
                for w in 0..=n {
                    s += Ratio::from_integer(binomial_i128(n, w).unwrap())
                        * kb.exact(j, w)
                        * kb.exact(k, w);
                }
                let want = if j == k {
                    two_n / Ratio::from_integer(binomial_i128(n, k).unwrap())
                } else {
                    Ratio::from_integer(0)
                };
                ok &= s == want;
                ok &= kb.exact(j, k) == kb.exact(k, j);
            }
        }
    }
    for n in 1..=10usize {
        let kb = KrawtchoukBasis::new(n).unwrap();
        for x in 0..(1u64 << n) {
            let mut by_size = vec![0i128; n + 1];
            for a in 0..(1u64 << n) {
                by_size[weight(a)] += character(x, a) as i128;
            }
            for (k, s) in by_size.iter().enumerate() {
                ok &= *s == kb.scaled(k, weight(x));
            }
        }
    }
    outcome(
        ok,
        "orthogonality and duality exact for N <= 12; spin identity exact for N <= 10".into(),
    )
}

fn level_sets() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 1..=20 {
        let spec = GreenSpec::new(n, IncrementModel::SingleFlip, 0.7).unwrap();
        let r = representation_matrix(&spec).unwrap();
        worst = worst.max((&r * r.transpose() - levelset_cov_matrix(&spec).unwrap()).amax());
    }
    let spec = GreenSpec::new(5, IncrementModel::SingleFlip, 0.5).unwrap();
    let pm = run_blocks(
        43,
        200_000,
        1000,
        |rng, len| {
            let mut pm = ProductMoments::new(6);
            for _ in 0..len {
                let noise = SpectralNoise::sample(5, rng).unwrap();
                let f = sample_field_spectral(&spec, &noise).unwrap();
                pm.push(&levelset_direct(&f).unwrap().values);
            }
            pm
        },
        ProductMoments::merge,
    )
    .unwrap();
    let cov = levelset_cov_matrix(&spec).unwrap();
    let z = ZSummary::from_pairs(
        (0..6)
            .flat_map(|i| (0..6).map(move |j| (i, j)))
            .map(|(i, j)| (pm.get(i, j), cov[(i, j)])),
        3.0,
    );
    outcome(
        worst < 1e-10 && z.within == z.entries,
        format!(
            "representation max error {worst:.2e} (N <= 20); MC {}/{} within 3 SE, max |z| {:.2}",
            z.within, z.entries, z.max_abs_z
        ),
    )
}

fn clt_trend() -> Outcome {
    let t0 = Instant::now();
    let grid = [-1.5, -0.75, 0.0, 0.75, 1.5];
    let r = levelset_clt_check(2.0, &[50, 100, 200, 400], &grid).unwrap();
    let last = r.gaps.last().unwrap().gap;
    let el = t0.elapsed();
    let gaps: Vec<String> = r
        .gaps
        .iter()
        .map(|g| format!("{}:{:.4}", g.n, g.gap))
        .collect();
    outcome(
        r.decreasing && last < 0.02 && el < Duration::from_secs(60),
        format!("gaps {}, {:.2} s", gaps.join(" "), el.as_secs_f64()),
    )
}

fn kappa_transform() -> Outcome {
    let grid = [-1.5, -0.75, 0.0, 0.75, 1.5];
    let mut ok = true;
    let mut notes = Vec::new();

    // series (closed-form resummation) against the mixture, and the plain
    // truncated series where it converges
    let pow = MixingLaw::PowerDensity { a: 1.5 };
    let fixed = KappaSpec::new(MixingLaw::Degenerate { y: 0.6 }, grid.to_vec()).unwrap();
    let mut series_gap: f64 = 0.0;
    for &t in &grid {
        for &s in &grid {
            let m = kappa_cov_mixture(&pow, t, s).unwrap();
            series_gap = series_gap.max((kappa_cov_resolvent(&pow, t, s).unwrap() - m).abs());
            let m0 = kappa_cov_mixture(&fixed.law, t, s).unwrap();
            series_gap = series_gap.max((kappa_cov_series(&fixed, t, s) - m0).abs());
        }
    }
    ok &= series_gap < 1e-8;
    notes.push(format!("series vs mixture {series_gap:.1e}"));

    // Var(U_θ), Var(V_θ), Cov(U_θ, V_θ) at θ = 1
    let spec = KappaSpec::new(MixingLaw::PowerDensity { a: 1.0 }, vec![-1.0, 0.0, 1.0]).unwrap();
    let order = spec.order();
    let pm = run_blocks(
        47,
        400_000,
        2000,
        |rng, len| {
            let mut pm = ProductMoments::new(2);
            for _ in 0..len {
                let (u, v) = transform_at(&spec, &normals(rng, order + 1), 1.0).unwrap();
                pm.push(&[u, v]);
            }
            pm
        },
        ProductMoments::merge,
    )
    .unwrap();
    let c = transform_cov(&spec.law, 1.0, 1.0).unwrap();
    let (zu, zv, zc) = (
        pm.get(0, 0).z_score(c.even),
        pm.get(1, 1).z_score(c.odd),
        pm.get(0, 1).z_score(0.0),
    );
    ok &= zu.abs() <= 3.0 && zv.abs() <= 3.0 && zc.abs() <= 3.0;
    notes.push(format!("z Var U {zu:.2}, Var V {zv:.2}, Cov UV {zc:.2}"));

    let zeta = normals(&mut root_rng(53), order + 1);
    let res = inversion_residuals(
        &spec,
        &zeta,
        &[-1.0, 0.0, 1.0],
        InversionGrid::for_order(order),
    )
    .unwrap();
    let worst = res.iter().fold(0.0f64, |m, r| m.max(*r));
    ok &= worst < 1e-4;
    notes.push(format!("inversion {worst:.1e}"));

    let p = parseval_check(&MixingLaw::PowerDensity { a: 1.5 }).unwrap();
    let p0 = parseval_check(&MixingLaw::Degenerate { y: 0.0 }).unwrap();
    let d0 = (p0.lhs - PI.sqrt()).abs();
    ok &= (p.lhs - p.rhs).abs() < 1e-6 && p0.rhs == PI.sqrt() && d0 < 1e-12;
    notes.push(format!(
        "Parseval gamma=3 {:.1e}, Y=0 |lhs - sqrt(pi)| {d0:.1e}",
        (p.lhs - p.rhs).abs()
    ));
    outcome(ok, notes.join("; "))
}

fn performance() -> Outcome {
    let spec = GreenSpec::new(20, IncrementModel::SingleFlip, 0.5).unwrap();
    let t0 = Instant::now();
    let noise = SpectralNoise::sample(20, &mut root_rng(9)).unwrap();
    let f = sample_field_spectral(&spec, &noise).unwrap();
    let el = t0.elapsed();
    let small = GreenSpec::new(10, IncrementModel::SingleFlip, 0.5).unwrap();
    let noise10 = SpectralNoise::sample(10, &mut root_rng(10)).unwrap();
    let fast = sample_field_spectral(&small, &noise10).unwrap();
    let naive = sample_field_naive(&small, &noise10).unwrap();
    let gap = fast
        .values
        .iter()
        .zip(&naive.values)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    outcome(
        el < Duration::from_secs(2) && gap < 1e-12 && f.values.len() == 1 << 20,
        format!(
            "N=20 in {:.3} s; N=10 fast vs naive {gap:.1e}",
            el.as_secs_f64()
        ),
    )
}

fn determinism() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_gffcube");
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec![
            "green",
            "--model",
            "single-flip",
            "--N",
            "3",
            "--alpha",
            "0.5",
        ],
        vec![
            "green",
            "--model",
            "de-finetti-beta",
            "--a",
            "1.2",
            "--b",
            "0.8",
            "--N",
            "4",
            "--alpha",
            "0.7",
            "--format",
            "csv",
        ],
        vec![
            "sample",
            "field",
            "--model",
            "single-flip",
            "--N",
            "4",
            "--alpha",
            "0.5",
            "--replicates",
            "20000",
            "--verify",
        ],
        vec![
            "sample",
            "field",
            "--model",
            "mflip",
            "--M",
            "2",
            "--N",
            "3",
            "--alpha",
            "0.5",
            "--replicates",
            "50",
            "--format",
            "csv",
        ],
        vec![
            "sample",
            "levelset",
            "--model",
            "single-flip",
            "--N",
            "5",
            "--alpha",
            "0.5",
            "--replicates",
            "20000",
            "--verify",
        ],
        vec![
            "sample",
            "kappa",
            "--gamma",
            "2",
            "--grid",
            "-2:2:0.25",
            "--replicates",
            "5",
        ],
        vec![
            "ylaw",
            "--model",
            "de-finetti-discrete",
            "--atoms",
            "0.2,0.8",
            "--weights",
            "0.5,0.5",
            "--alpha",
            "0.5",
            "--bins",
            "20",
        ],
        vec!["limits", "--dims", "50,100"],
    ];
    let mut bad = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("run{i}_{rep}"));
            let sum = dir.path().join(format!("run{i}_{rep}.summary"));
            let status = Command::new(exe)
                .args(args)
                .args(["--seed", "12345", "--threads", "1", "--out"])
                .arg(&out)
                .arg("--summary")
                .arg(&sum)
                .status()
                .unwrap();
            let mut bytes = std::fs::read(&out).unwrap_or_default();
            bytes.extend(std::fs::read(&sum).unwrap_or_default());
            outputs.push((status.success(), bytes));
        }
        if !(outputs[0].0
            && outputs[1].0
            && outputs[0].1 == outputs[1].1
            && !outputs[0].1.is_empty())
        {
            bad.push(args[0..2].join(" "));
        }
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} command lines byte-identical across repeats", runs.len())
        } else {
            format!("differences in: {}", bad.join(", "))
        },
    )
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: Vec<(&str, Check)> = vec![
        ("Green oracle equivalence", green_oracle),
        ("One-step mixing closed form", one_step_mixing),
        ("GFF density identity", gff_density),
        ("Field MC covariance", field_mc),
        ("Y-law moments and signs", ylaw),
        ("Killed measure vs Green", killed_measure),
        ("Beta example", beta_example),
        ("Krawtchouk identities", krawtchouk),
        ("Level sets", level_sets),
        ("CLT trend", clt_trend),
        ("kappa and transform", kappa_transform),
        ("Performance gate", performance),
        ("Determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {} [{:.2} s]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            t0.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
