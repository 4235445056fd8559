//! Acceptance suite: eleven end-to-end checks, one test per criterion.
//! Each test prints a single PASS/FAIL line with its pinned tolerances;
//! the same line is the panic message when the assertion trips, so a plain
//! `cargo test` shows it for any red criterion.
//!
//! Known red: criterion 2's K-component clause. At M = 2000 the pre-limit
//! law of K_M still carries an O(1/sqrt(M)) mean shift (about -0.09 for
//! the pinned model), which floors its KS distance to N(0, sigma_T^2)
//! near 0.022 for every seed. The test reports the measured shift and the
//! recentered KS next to the failing number instead of widening the 0.01
//! tolerance; the variance, covariance and trend criteria confirm the
//! limit itself.

use std::fmt::Write as _;
use std::sync::OnceLock;
use std::time::Instant;

use modone::benford::{mantissa_experiment, BaseMode, LogFactorLaw, ProductModel};
use modone::density::{pointwise_convergence_sweep, LemmaScene};
use modone::experiment::{
    grid_axis, run, tv_clt_curve, ExperimentConfig, ExperimentKind, RunOptions,
};
use modone::frac::fractional_part;
use modone::limit::{limit_covariance_gamma, sigma_t_sq};
use modone::model::{JointLaw, ModelSpec, PhiSpec, ZMap};
use modone::resampling::{
    direct_variance, psi_k, second_moment_identity_check, variance_decomposition_estimate,
    OverlapArgs, ParticleLaw, ParticleSystem, ResampleModel, ScalarFn,
};
use modone::rng::{substream, substream_seed};
use modone::sim::{sample_batch, standardized_batch, BatchResult};
use modone::stats::{
    chi_square_quantile, grid_chi_square, ks_statistic, marginal_tvs, mean_and_variance,
    normal_cdf, uniform_cdf, weyl_sum, BinRule,
};
use nalgebra::DMatrix;
use rand::Rng;

const SEED: u64 = 1729;

fn line(criterion: &str, pass: bool, detail: &str) -> String {
    let tag = if pass { "PASS" } else { "FAIL" };
    let s = format!("acceptance {criterion}: {tag} {detail}");
    println!("{s}");
    s
}

fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs
}

/// The pinned joint-limit model shared by criteria 1 and 2.
fn pinned_model() -> ModelSpec {
    ModelSpec {
        q: 2,
        betas: vec![0.3, 0.6, 1.0],
        x: 0.5,
        z: -1.0,
        y: vec![0.25, 2.0],
        law: JointLaw::exp_pair(1.0, ZMap::Square),
        phi: PhiSpec::reciprocal(),
    }
}

struct SharedBatch {
    batch: BatchResult,
    elapsed_s: f64,
}

static BATCH: OnceLock<SharedBatch> = OnceLock::new();

fn shared_batch() -> &'static SharedBatch {
    BATCH.get_or_init(|| {
        let start = Instant::now();
        let batch = sample_batch(&pinned_model(), 2_000, 100_000, SEED).expect("pinned batch");
        SharedBatch {
            batch,
            elapsed_s: start.elapsed().as_secs_f64(),
        }
    })
}

#[test]
fn criterion_01_marginal_uniformity() {
    let shared = shared_batch();
    let spec = pinned_model();
    let mut detail = String::new();
    let mut worst = 0.0f64;
    for axis in 0..spec.q {
        let col = sorted(shared.batch.frac_column(axis));
        let ks = ks_statistic(&col, uniform_cdf).unwrap();
        worst = worst.max(ks);
        write!(detail, "ks_axis{axis}={ks:.5} ").unwrap();
    }
    write!(
        detail,
        "threshold=0.01 M=2000 N=100000 sampled_in={:.1}s limit=60s",
        shared.elapsed_s
    )
    .unwrap();
    let pass = worst < 0.01 && shared.elapsed_s < 60.0;
    let msg = line("01 marginal-uniformity", pass, &detail);
    assert!(pass, "{msg}");
}

#[test]
fn criterion_02_joint_law_and_independence() {
    let shared = shared_batch();
    let spec = pinned_model();
    let fracs = shared.batch.fracs_flat();
    let k_values = shared.batch.k_values();
    let n = k_values.len();

    let grid = grid_chi_square(&fracs, spec.q, 8).unwrap();
    let chi_q = chi_square_quantile(grid.dof as f64, 0.999).unwrap();
    let chi_pass = grid.statistic < chi_q;

    let mut worst_weyl = 0.0f64;
    for k1 in -3i64..=3 {
        for k2 in -3i64..=3 {
            if k1 == 0 && k2 == 0 {
                continue;
            }
            for &u in &[0.0, 1.0, 2.5] {
                let s = weyl_sum(&fracs, spec.q, &k_values, &[k1, k2], u).unwrap();
                worst_weyl = worst_weyl.max(s);
            }
        }
    }
    let weyl_bound = 4.0 / (n as f64).sqrt();
    let weyl_pass = worst_weyl <= weyl_bound;

    let sigma = sigma_t_sq(&spec).unwrap().sqrt();
    let sorted_k = sorted(k_values);
    let ks_k = ks_statistic(&sorted_k, |t| normal_cdf(t, 0.0, sigma)).unwrap();
    let (mean_k, _) = mean_and_variance(&sorted_k).unwrap();
    let ks_recentered = ks_statistic(&sorted_k, |t| normal_cdf(t, mean_k, sigma)).unwrap();
    let k_pass = ks_k < 0.01;

    let pass = chi_pass && weyl_pass && k_pass;
    let detail = format!(
        "chi2={:.2}<{:.2}:{} weyl_max={:.5}<={:.5}:{} ks_k={:.5}<0.01:{} \
         [k_mean={:+.4}, recentered ks_k={:.5}; the 0.022 floor is the \
         O(1/sqrt(M)) pre-limit mean shift at M=2000]",
        grid.statistic,
        chi_q,
        chi_pass,
        worst_weyl,
        weyl_bound,
        weyl_pass,
        ks_k,
        k_pass,
        mean_k,
        ks_recentered
    );
    let msg = line("02 joint-law-independence", pass, &detail);
    assert!(pass, "{msg}");
}

#[test]
fn criterion_03_delta_method_variance() {
    let cases: [(&str, ModelSpec); 3] = [
        (
            "constant",
            ModelSpec {
                q: 1,
                betas: vec![0.3, 0.6],
                x: 0.0,
                z: 0.0,
                y: vec![0.0],
                law: JointLaw::gaussian([1.0, 0.5], [[1.0, 0.3], [0.3, 2.0]]),
                phi: PhiSpec::constant(2.0),
            },
        ),
        (
            "reciprocal",
            ModelSpec {
                q: 1,
                betas: vec![0.3, 0.6],
                x: 0.0,
                z: 0.0,
                y: vec![0.0],
                law: JointLaw::gaussian([2.0, 1.0], [[0.5, 0.2], [0.2, 1.0]]),
                phi: PhiSpec::reciprocal(),
            },
        ),
        (
            "affine-reciprocal",
            ModelSpec {
                q: 1,
                betas: vec![0.3, 0.6],
                x: 0.0,
                z: 0.0,
                y: vec![0.0],
                law: JointLaw::exp_pair(1.0, ZMap::Square),
                phi: PhiSpec::affine_reciprocal(2.0, 1.0),
            },
        ),
    ];

    let mut detail = String::new();
    let mut pass = true;
    for (i, (name, spec)) in cases.iter().enumerate() {
        let target = sigma_t_sq(spec).unwrap();
        let batch = sample_batch(spec, 10_000, 100_000, SEED + 3 + i as u64).unwrap();
        let (_, var) = mean_and_variance(&batch.k_values()).unwrap();
        let rel = (var - target).abs() / target;
        pass &= rel < 0.05;
        write!(
            detail,
            "{name}: var={var:.4} target={target:.4} rel={rel:.4} "
        )
        .unwrap();
    }
    detail.push_str("tolerance=0.05 M=10000 N=100000");
    let msg = line("03 delta-method-variance", pass, &detail);
    assert!(pass, "{msg}");
}

#[test]
fn criterion_04_standardized_covariance() {
    let spec = ModelSpec {
        q: 2,
        betas: vec![0.2, 0.4, 0.6],
        x: 0.0,
        z: 0.0,
        y: vec![0.0, 0.0],
        law: JointLaw::exp_pair(1.0, ZMap::Square),
        phi: PhiSpec::reciprocal(),
    };
    let batch = standardized_batch(&spec, 10_000, 100_000, SEED + 4).unwrap();
    let dim = batch.dim;
    let rows = batch.rows();
    let law = limit_covariance_gamma(&spec).unwrap();
    let gamma = &law.gamma;
    let (_, cov) = modone::stats::covariance_matrix(&batch.flat, dim).unwrap();

    let mut worst_z = 0.0f64;
    for i in 0..dim {
        for j in i..dim {
            let se = modone::stats::gaussian_cov_entry_se(gamma, i, j, rows);
            worst_z = worst_z.max((cov[(i, j)] - gamma[(i, j)]).abs() / se);
        }
    }
    let cov_pass = worst_z < 5.0;

    let gauss = law.standardized_gaussian().unwrap();
    let tvs = marginal_tvs(&batch.flat, dim, &gauss, &BinRule::default()).unwrap();
    let worst_tv = tvs.iter().cloned().fold(0.0f64, f64::max);
    let tv_pass = worst_tv <= 0.03;

    let pass = cov_pass && tv_pass;
    let detail = format!(
        "max|cov-gamma|/se={worst_z:.2}<5 max_marginal_tv={worst_tv:.4}<=0.03 \
         bins=64 M=10000 N=100000"
    );
    let msg = line("04 standardized-covariance", pass, &detail);
    assert!(pass, "{msg}");
}

#[test]
fn criterion_05_tv_clt_trend() {
    let start = Instant::now();
    let law = JointLaw::exp_pair(1.0, ZMap::Square);
    let m_list = [1u64, 4, 16, 64, 256, 1024];
    let curve = tv_clt_curve(&law, &m_list, 100_000, SEED + 5, &BinRule::default()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let mut pass = elapsed < 120.0;
    let mut detail = String::new();
    for axis in 0..2 {
        let tvs: Vec<f64> = curve.iter().map(|(_, t)| t[axis]).collect();
        let monotone = tvs.windows(2).all(|w| w[1] <= 1.1 * w[0]);
        let last = *tvs.last().unwrap();
        pass &= monotone && last <= 0.03;
        write!(
            detail,
            "axis{axis}: [{}] monotone(10% slack)={monotone} final={last:.4}<=0.03 ",
            tvs.iter()
                .map(|t| format!("{t:.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        )
        .unwrap();
    }
    write!(detail, "N=100000 elapsed={elapsed:.1}s limit=120s").unwrap();
    let msg = line("05 tv-clt-trend", pass, &detail);
    assert!(pass, "{msg}");
}

#[test]
fn criterion_06_density_quadrature() {
    let start = Instant::now();
    let eta = vec![1.0, 0.0, 2.0];
    let sigma1 = DMatrix::<f64>::identity(3, 3);
    let axis = grid_axis(1.0, 11);
    let m_values = [100u64, 10_000, 1_000_000];

    let e = eta.clone();
    let s = sigma1.clone();
    let make = move |m: u64| LemmaScene::for_m(1, e.clone(), s.clone(), PhiSpec::reciprocal(), m);
    let sweep = pointwise_convergence_sweep(&make, &m_values, &axis).unwrap();
    let errs: Vec<f64> = sweep.levels.iter().map(|l| l.max_err).collect();
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let final_err = *errs.last().unwrap();

    let e2 = eta.clone();
    let s2 = sigma1.clone();
    let make_const =
        move |m: u64| LemmaScene::for_m(1, e2.clone(), s2.clone(), PhiSpec::constant(2.0), m);
    let const_sweep = pointwise_convergence_sweep(&make_const, &m_values, &axis).unwrap();
    let const_worst = const_sweep
        .levels
        .iter()
        .map(|l| l.max_err)
        .fold(0.0f64, f64::max);
    let elapsed = start.elapsed().as_secs_f64();

    let pass = decreasing && final_err < 1e-2 && const_worst <= 1e-8 && elapsed < 30.0;
    let detail = format!(
        "max_err=[{}] decreasing={decreasing} final={final_err:.3e}<1e-2 \
         constant_phi_worst={const_worst:.1e}<=1e-8 grid=11x11 elapsed={elapsed:.1}s limit=30s",
        errs.iter()
            .map(|x| format!("{x:.3e}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let msg = line("06 density-quadrature", pass, &detail);
    assert!(pass, "{msg}");
}

#[test]
fn criterion_07_psi_identity() {
    let mut rng = substream(SEED, 7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = rng.random_range(1..=20usize);
        let mut pos = Vec::with_capacity(m);
        let mut acc = rng.random_range(-2.0..2.0);
        let mut weights = Vec::with_capacity(m);
        let mut f_values = Vec::with_capacity(m);
        for _ in 0..m {
            acc += rng.random_range(0.01..1.0);
            pos.push(acc);
            weights.push(rng.random_range(0.05..3.0));
            f_values.push(rng.random_range(-2.0..2.0));
        }
        let sys = ParticleSystem::new(pos, weights).unwrap();
        let (direct, psi_form) = second_moment_identity_check(&sys, &f_values).unwrap();
        worst = worst.max((direct - psi_form).abs());
    }
    let pass = worst <= 1e-12;
    let detail = format!("max|direct-psi_form|={worst:.2e}<=1e-12 systems=100 M<=20");
    let msg = line("07 psi-identity", pass, &detail);
    assert!(pass, "{msg}");
}

#[test]
fn criterion_08_resampling_decomposition() {
    let model = ResampleModel {
        law: ParticleLaw::Exponential { rate: 1.0 },
        f: ScalarFn::Sin,
        g: ScalarFn::OnePlusSquare,
    };
    let (m, n) = (200usize, 10_000u64);
    let decomp = variance_decomposition_estimate(&model, m, n, SEED + 8).unwrap();
    let combined = decomp.combined();
    let direct = direct_variance(&model, m, n, substream_seed(SEED + 8, 1)).unwrap();
    let gap = (combined.value - direct.value).abs();
    let se = combined.se.hypot(direct.se);
    let pass = gap <= 3.0 * se;
    let detail = format!(
        "combined={:.4}+-{:.4} direct={:.4}+-{:.4} gap={gap:.4}={:.2}se<=3se M=200 N=10000",
        combined.value,
        combined.se,
        direct.value,
        direct.se,
        gap / se
    );
    let msg = line("08 resampling-decomposition", pass, &detail);
    assert!(pass, "{msg}");
}

#[test]
fn criterion_09_benford_mantissa() {
    let lognormal = LogFactorLaw::Normal { mean: 1.0, sd: 1.0 };
    let fixed = mantissa_experiment(
        &ProductModel {
            factors: lognormal,
            base: BaseMode::Fixed { base: 10.0 },
        },
        500,
        100_000,
        SEED + 9,
    )
    .unwrap();
    let adapted = mantissa_experiment(
        &ProductModel {
            factors: lognormal,
            base: BaseMode::Adapted { beta: 2.0 },
        },
        2_000,
        100_000,
        SEED + 10,
    )
    .unwrap();
    let degenerate = mantissa_experiment(
        &ProductModel {
            factors: LogFactorLaw::Degenerate {
                value: std::f64::consts::LN_10,
            },
            base: BaseMode::Fixed { base: 10.0 },
        },
        500,
        100_000,
        SEED + 11,
    )
    .unwrap();

    let pass = fixed.statistic < 0.01 && adapted.statistic < 0.01 && degenerate.statistic >= 0.01;
    let detail = format!(
        "fixed_base10_ks={:.5}<0.01 adapted_beta2_ks={:.5}<0.01 degenerate_ks={:.5}>=0.01 \
         N=100000",
        fixed.statistic, adapted.statistic, degenerate.statistic
    );
    let msg = line("09 benford-mantissa", pass, &detail);
    assert!(pass, "{msg}");
}

fn config_for(kind: ExperimentKind) -> ExperimentConfig {
    let mut config = ExperimentConfig {
        experiment: kind,
        seed: SEED + 12,
        n: 500,
        m_list: vec![100],
        m_tilde_max: 20,
        output: None,
        model: None,
        law: None,
        benford: None,
        resample: None,
        density: None,
    };
    match kind {
        ExperimentKind::Simulate | ExperimentKind::Uniformity | ExperimentKind::JointLimit => {
            config.model = Some(pinned_model());
        }
        ExperimentKind::TvClt => {
            config.law = Some(JointLaw::exp_pair(1.0, ZMap::Square));
            config.m_list = vec![1, 4];
            config.n = 1_000;
        }
        ExperimentKind::DensitySweep => {
            config.density = Some(modone::experiment::DensitySection {
                q: 1,
                eta: vec![1.0, 0.0, 2.0],
                sigma1: vec![
                    vec![1.0, 0.0, 0.0],
                    vec![0.0, 1.0, 0.0],
                    vec![0.0, 0.0, 1.0],
                ],
                phi: PhiSpec::reciprocal(),
                grid_half_width: 1.0,
                grid_points: 5,
            });
            config.m_list = vec![100, 1_000];
        }
        ExperimentKind::Benford => {
            config.benford = Some(ProductModel {
                factors: LogFactorLaw::Normal { mean: 1.0, sd: 1.0 },
                base: BaseMode::Fixed { base: 10.0 },
            });
            config.m_list = vec![50];
            config.n = 1_000;
        }
        ExperimentKind::ResampleVariance => {
            config.resample = Some(ResampleModel {
                law: ParticleLaw::Exponential { rate: 1.0 },
                f: ScalarFn::Sin,
                g: ScalarFn::OnePlusSquare,
            });
            config.m_list = vec![20];
            config.n = 200;
        }
        ExperimentKind::Integrability => {
            config.model = Some(pinned_model());
        }
    }
    config
}

#[test]
fn criterion_10_deterministic_csv() {
    let kinds = [
        ExperimentKind::Simulate,
        ExperimentKind::Uniformity,
        ExperimentKind::JointLimit,
        ExperimentKind::TvClt,
        ExperimentKind::DensitySweep,
        ExperimentKind::Benford,
        ExperimentKind::ResampleVariance,
        ExperimentKind::Integrability,
    ];
    let root = tempfile::tempdir().unwrap();
    let mut compared = 0usize;
    for kind in kinds {
        let config = config_for(kind);
        let mut outcomes = Vec::new();
        for threads in [1usize, 4] {
            let out = root.path().join(format!("{}-t{threads}", kind.name()));
            let opts = RunOptions {
                seed_override: None,
                out_override: Some(out),
                threads: Some(threads),
            };
            outcomes.push(run(&config, &opts).unwrap());
        }
        let (a, b) = (&outcomes[0], &outcomes[1]);
        assert_eq!(
            a.csv_files,
            b.csv_files,
            "{} artifact lists differ",
            kind.name()
        );
        assert!(!a.csv_files.is_empty(), "{} produced no CSV", kind.name());
        for f in &a.csv_files {
            let lhs = std::fs::read(a.out_dir.join(f)).unwrap();
            let rhs = std::fs::read(b.out_dir.join(f)).unwrap();
            assert!(
                lhs == rhs,
                "{}: {f} differs between 1 and 4 threads",
                kind.name()
            );
            compared += 1;
        }
    }
    let detail =
        format!("{compared} csv files byte-identical across 1 vs 4 threads, all 8 experiments");
    let msg = line("10 deterministic-csv", true, &detail);
    assert!(compared >= 8, "{msg}");
}

#[test]
fn criterion_11_randomized_invariants() {
    let mut rng = substream(SEED, 11);
    let mut families = Vec::new();

    // fractional parts land in [0,1) and differ from the input by an integer
    let mut cases = 0u32;
    for _ in 0..2_000 {
        let x: f64 = rng.random_range(-1.0e6..1.0e6);
        let f = fractional_part(x).unwrap();
        assert!((0.0..1.0).contains(&f), "frac({x}) = {f}");
        let back = x - f;
        assert!(
            (back - back.round()).abs() < 1e-6,
            "x - frac(x) not integral at {x}"
        );
        cases += 1;
    }
    families.push(("fractional-part", cases));

    // Benford CDF is monotone with pinned endpoints
    let mut cases = 0u32;
    for _ in 0..1_000 {
        let base: f64 = rng.random_range(1.5..16.0);
        let a1: f64 = rng.random_range(1.0..base);
        let a2: f64 = rng.random_range(1.0..base);
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let c_lo = modone::benford::benford_cdf(lo, base).unwrap();
        let c_hi = modone::benford::benford_cdf(hi, base).unwrap();
        assert!(c_lo <= c_hi + 1e-15);
        assert!(modone::benford::benford_cdf(1.0, base).unwrap().abs() < 1e-15);
        let near_top = modone::benford::benford_cdf(base - 1e-9, base).unwrap();
        assert!(near_top < 1.0 && (near_top - 1.0).abs() < 1e-8);
        cases += 1;
    }
    families.push(("benford-cdf", cases));

    // substreams reproduce exactly and separate across indices
    let mut cases = 0u32;
    for i in 0..1_000u64 {
        let a: u64 = substream(SEED + 13, i).random();
        let b: u64 = substream(SEED + 13, i).random();
        assert_eq!(a, b, "substream {i} not reproducible");
        let c: u64 = substream(SEED + 13, i + 1).random();
        assert_ne!(a, c, "substreams {i} and {} collide", i + 1);
        cases += 1;
    }
    families.push(("rng-substreams", cases));

    // KS statistic of the perfectly balanced grid is exactly 1/(2n)
    let mut cases = 0u32;
    for _ in 0..1_000 {
        let n = rng.random_range(1..200usize);
        let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let ks = ks_statistic(&grid, uniform_cdf).unwrap();
        assert!((ks - 0.5 / n as f64).abs() < 1e-12);
        cases += 1;
    }
    families.push(("ks-exactness", cases));

    // psi_k overlaps are nonnegative and bounded by either window length
    let mut cases = 0u32;
    for _ in 0..1_000 {
        let k = rng.random_range(0..4usize);
        let u0: f64 = rng.random_range(0.0..1.0);
        let w: Vec<f64> = (0..=k).map(|_| rng.random_range(0.01..2.0)).collect();
        let psi = psi_k(&OverlapArgs { u0, w: w.clone() }).unwrap();
        let bound = w[0].min(w[k]) + 1e-12;
        assert!(psi >= 0.0 && psi <= bound, "psi={psi} outside [0, {bound}]");
        cases += 1;
    }
    families.push(("psi-overlap-bounds", cases));

    let total: u32 = families.iter().map(|(_, c)| c).sum();
    let detail = format!(
        "{} invariant families, {total} randomized cases ({}); unit suites cover the \
         frozen worked examples",
        families.len(),
        families
            .iter()
            .map(|(name, c)| format!("{name}={c}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let msg = line("11 randomized-invariants", true, &detail);
    assert!(total >= 5_000, "{msg}");
}
