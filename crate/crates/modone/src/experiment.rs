//! Experiment runner shared by the command-line binary and the integration
//! suite: a TOML config in, deterministic CSV/JSON artifacts out.
//!
//! Every report row carries `seed`, `m` and `n` in its details, so any number
//! in any artifact is reproducible from the manifest alone. Reruns with the
//! same effective seed produce byte-identical CSV files regardless of the
//! thread count.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benford::ProductModel;
use crate::density::LemmaScene;
use crate::error::{Error, Result};
use crate::frac::CompensatedSum;
use crate::limit::limit_covariance_gamma;
use crate::model::{JointLaw, ModelSpec};
use crate::report::{self, RunManifest, RunSummary};
use crate::resampling::{direct_variance, variance_decomposition_estimate, ResampleModel};
use crate::rng::{substream, substream_seed};
use crate::sim::sample_batch;
use crate::stats::{
    chi_square_quantile, grid_chi_square, ks_statistic, ks_threshold, marginal_tvs, normal_cdf,
    uniform_cdf, weyl_sum, BinRule, TestReport,
};

/// Environment variable that overrides the config seed.
pub const SEED_ENV: &str = "MODONE_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Emit raw batch CSV only, no statistical verdicts.
    Simulate,
    Uniformity,
    JointLimit,
    TvClt,
    DensitySweep,
    Benford,
    ResampleVariance,
    Integrability,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Uniformity => "uniformity",
            ExperimentKind::JointLimit => "joint-limit",
            ExperimentKind::TvClt => "tv-clt",
            ExperimentKind::DensitySweep => "density-sweep",
            ExperimentKind::Benford => "benford",
            ExperimentKind::ResampleVariance => "resample-variance",
            ExperimentKind::Integrability => "integrability",
        }
    }
}

/// Explicit density-sweep scene (used when no sampling model is given).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensitySection {
    pub q: usize,
    /// `η_1..η_{q+2}`.
    pub eta: Vec<f64>,
    /// Rows of the `(q+2)×(q+2)` covariance `Σ₁`.
    pub sigma1: Vec<Vec<f64>>,
    pub phi: crate::model::PhiSpec,
    #[serde(default = "default_grid_half_width")]
    pub grid_half_width: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_grid_half_width() -> f64 {
    1.0
}

fn default_grid_points() -> usize {
    11
}

fn default_n() -> u64 {
    10_000
}

fn default_m_tilde_max() -> u32 {
    20
}

/// One experiment run: which verification to perform, with what sizes,
/// model and seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    #[serde(default = "default_n")]
    pub n: u64,
    #[serde(default)]
    pub m_list: Vec<u64>,
    #[serde(default = "default_m_tilde_max")]
    pub m_tilde_max: u32,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub law: Option<JointLaw>,
    #[serde(default)]
    pub benford: Option<ProductModel>,
    #[serde(default)]
    pub resample: Option<ResampleModel>,
    #[serde(default)]
    pub density: Option<DensitySection>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn require_model(&self) -> Result<&ModelSpec> {
        let model = self.model.as_ref().ok_or_else(|| {
            Error::InvalidConfig("this experiment needs a [model] section".into())
        })?;
        model
            .validate()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(model)
    }

    fn require_m_list(&self) -> Result<&[u64]> {
        if self.m_list.is_empty() || self.m_list.contains(&0) {
            return Err(Error::InvalidConfig(
                "m_list must contain at least one positive M".into(),
            ));
        }
        Ok(&self.m_list)
    }

    /// Full validation before any computation starts.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        match self.experiment {
            ExperimentKind::Simulate | ExperimentKind::Uniformity | ExperimentKind::JointLimit => {
                self.require_model()?;
                self.require_m_list()?;
            }
            ExperimentKind::TvClt => {
                let law = self.effective_law()?;
                law.validate()
                    .map_err(|e| Error::InvalidConfig(e.to_string()))?;
                self.require_m_list()?;
            }
            ExperimentKind::DensitySweep => {
                self.require_m_list()?;
                match (&self.density, &self.model) {
                    (Some(d), _) => {
                        if d.grid_points == 0 || !(d.grid_half_width > 0.0) {
                            return Err(Error::InvalidConfig(
                                "density grid needs positive width and points".into(),
                            ));
                        }
                        // constructor re-validates shapes; fail early on the cheap checks
                        if d.eta.len() != d.q + 2 || d.sigma1.len() != d.q + 2 {
                            return Err(Error::InvalidConfig(
                                "density section shapes must be q+2".into(),
                            ));
                        }
                    }
                    (None, Some(_)) => {
                        self.require_model()?;
                    }
                    (None, None) => {
                        return Err(Error::InvalidConfig(
                            "density-sweep needs a [density] scene or a [model]".into(),
                        ));
                    }
                }
            }
            ExperimentKind::Benford => {
                let b = self.benford.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("benford needs a [benford] section".into())
                })?;
                // surfaces invalid bases and β ≤ 1 before sampling
                b.to_model_spec()
                    .map_err(|e| Error::InvalidConfig(e.to_string()))?;
                self.require_m_list()?;
            }
            ExperimentKind::ResampleVariance => {
                if self.resample.is_none() {
                    return Err(Error::InvalidConfig(
                        "resample-variance needs a [resample] section".into(),
                    ));
                }
                self.require_m_list()?;
                if self.n < 2 {
                    return Err(Error::InvalidConfig(
                        "resample-variance needs n >= 2".into(),
                    ));
                }
            }
            ExperimentKind::Integrability => {
                self.require_model()?;
            }
        }
        Ok(())
    }

    fn effective_law(&self) -> Result<&JointLaw> {
        self.law
            .as_ref()
            .or(self.model.as_ref().map(|m| &m.law))
            .ok_or_else(|| Error::InvalidConfig("tv-clt needs a [law] or [model] section".into()))
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed_override: Option<u64>,
    pub out_override: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub reports: Vec<TestReport>,
    pub all_pass: bool,
    /// CSV artifacts, relative to `out_dir`.
    pub csv_files: Vec<String>,
}

/// Exit status contract: 0 all tests pass, 1 some test failed, 2 invalid
/// config or runtime failure.
pub fn exit_code(outcome: &Result<RunOutcome>) -> i32 {
    match outcome {
        Ok(o) if o.all_pass => 0,
        Ok(_) => 1,
        Err(_) => 2,
    }
}

fn effective_seed(config: &ExperimentConfig, opts: &RunOptions) -> Result<(u64, bool)> {
    if let Some(s) = opts.seed_override {
        return Ok((s, true));
    }
    match std::env::var(SEED_ENV) {
        Ok(text) => {
            let s: u64 = text.trim().parse().map_err(|_| {
                Error::InvalidConfig(format!("{SEED_ENV}={text} is not a 64-bit seed"))
            })?;
            Ok((s, true))
        }
        Err(_) => Ok((config.seed, false)),
    }
}

/// Run one experiment end to end: validate, compute, write artifacts.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    config.validate()?;
    let (seed, overridden) = effective_seed(config, opts)?;
    let out_dir = opts
        .out_override
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("modone-out"));
    std::fs::create_dir_all(&out_dir)?;

    let body = || run_in_dir(config, seed, &out_dir);
    let (reports, csv_files) = match opts.threads {
        Some(t) if t > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Contract(format!("thread pool: {e}")))?;
            pool.install(body)?
        }
        _ => body()?,
    };

    let config_echo =
        serde_json::to_value(config).map_err(|e| Error::Contract(format!("config echo: {e}")))?;
    let mut manifest = RunManifest::new(config.experiment.name(), seed, overridden, config_echo);
    for f in &csv_files {
        manifest.record_output(&out_dir.join(f));
    }
    manifest.record_output(&out_dir.join("summary.json"));
    manifest.write(&out_dir.join("manifest.json"))?;

    let summary = RunSummary::new(config.experiment.name(), seed, reports.clone());
    summary.write(&out_dir.join("summary.json"))?;
    report::write_atomic(
        &out_dir.join("reports.csv"),
        report::reports_to_csv(&reports).as_bytes(),
    )?;

    Ok(RunOutcome {
        out_dir,
        all_pass: reports.iter().all(|r| r.pass),
        reports,
        csv_files,
    })
}

fn run_in_dir(
    config: &ExperimentConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<(Vec<TestReport>, Vec<String>)> {
    match config.experiment {
        ExperimentKind::Simulate => run_simulate(config, seed, out_dir),
        ExperimentKind::Uniformity => run_uniformity(config, seed, out_dir),
        ExperimentKind::JointLimit => run_joint_limit(config, seed, out_dir),
        ExperimentKind::TvClt => run_tv_clt(config, seed, out_dir),
        ExperimentKind::DensitySweep => run_density_sweep(config, out_dir),
        ExperimentKind::Benford => run_benford(config, seed, out_dir),
        ExperimentKind::ResampleVariance => run_resample_variance(config, seed, out_dir),
        ExperimentKind::Integrability => run_integrability(config, out_dir),
    }
}

fn tag(report: TestReport, seed: u64, m: u64, n: u64) -> TestReport {
    report
        .with_detail("seed", seed)
        .with_detail("m", m)
        .with_detail("n", n)
}

fn write_batch_csv(
    batch: &crate::sim::BatchResult,
    out_dir: &Path,
    files: &mut Vec<String>,
) -> Result<()> {
    let name = format!("batch_m{}.csv", batch.m);
    let mut buf = Vec::new();
    batch.write_csv(&mut buf)?;
    report::write_atomic(&out_dir.join(&name), &buf)?;
    files.push(name);
    Ok(())
}

fn run_simulate(
    config: &ExperimentConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<(Vec<TestReport>, Vec<String>)> {
    let model = config.require_model()?;
    let mut files = Vec::new();
    for &m in config.require_m_list()? {
        let batch = sample_batch(model, m, config.n, seed)?;
        write_batch_csv(&batch, out_dir, &mut files)?;
    }
    Ok((Vec::new(), files))
}

fn uniformity_reports(
    batch: &crate::sim::BatchResult,
    q: usize,
    seed: u64,
) -> Result<Vec<TestReport>> {
    let rows = batch.samples.len() as u64;
    let threshold = ks_threshold(rows, 0.001)?;
    let mut out = Vec::with_capacity(q);
    for axis in 0..q {
        let mut fracs = batch.frac_column(axis);
        fracs.sort_by(|a, b| a.partial_cmp(b).expect("finite fracs"));
        let stat = ks_statistic(&fracs, uniform_cdf)?;
        out.push(tag(
            TestReport::new(
                format!("uniformity-ks-frac{}-m{}", axis + 1, batch.m),
                stat,
                threshold,
                rows,
            ),
            seed,
            batch.m,
            rows,
        ));
    }
    Ok(out)
}

fn run_uniformity(
    config: &ExperimentConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<(Vec<TestReport>, Vec<String>)> {
    let model = config.require_model()?;
    let mut files = Vec::new();
    let mut reports = Vec::new();
    for &m in config.require_m_list()? {
        let batch = sample_batch(model, m, config.n, seed)?;
        write_batch_csv(&batch, out_dir, &mut files)?;
        reports.extend(uniformity_reports(&batch, model.q, seed)?);
    }
    Ok((reports, files))
}

/// Frequency grid for the Weyl check: `{-3..3}^q \ {0}` for `q ≤ 2`, the
/// sign patterns `{-1,0,1}^q \ {0}` above that.
pub fn weyl_frequencies(q: usize) -> Vec<Vec<i64>> {
    let reach: Vec<i64> = if q <= 2 {
        (-3..=3).collect()
    } else {
        (-1..=1).collect()
    };
    let mut out = vec![vec![]];
    for _ in 0..q {
        let mut next = Vec::new();
        for prefix in &out {
            for &v in &reach {
                let mut row = prefix.clone();
                row.push(v);
                next.push(row);
            }
        }
        out = next;
    }
    out.retain(|k| k.iter().any(|&v| v != 0));
    out
}

fn joint_limit_reports(
    batch: &crate::sim::BatchResult,
    model: &ModelSpec,
    seed: u64,
) -> Result<Vec<TestReport>> {
    let q = model.q;
    let rows = batch.samples.len() as u64;
    let mut reports = uniformity_reports(batch, q, seed)?;

    let fracs = batch.fracs_flat();
    let cells_per_axis = 8usize;
    let grid = grid_chi_square(&fracs, q, cells_per_axis)?;
    let chi_threshold = chi_square_quantile(grid.dof as f64, 0.999)?;
    reports.push(tag(
        TestReport::new(
            format!(
                "joint-chi-square-{cells_per_axis}x{cells_per_axis}-m{}",
                batch.m
            ),
            grid.statistic,
            chi_threshold,
            rows,
        )
        .with_detail("dof", grid.dof),
        seed,
        batch.m,
        rows,
    ));

    let k_values = batch.k_values();
    let weyl_threshold = 4.0 / (rows as f64).sqrt();
    let mut worst = 0.0f64;
    let mut worst_label = String::from("none");
    for k in weyl_frequencies(q) {
        for &u in &[0.0, 1.0, 2.5] {
            let w = weyl_sum(&fracs, q, &k_values, &k, u)?;
            if w > worst {
                worst = w;
                worst_label = format!("k={k:?},u={u}");
            }
        }
    }
    reports.push(tag(
        TestReport::new(
            format!("joint-weyl-max-m{}", batch.m),
            worst,
            weyl_threshold,
            rows,
        )
        .with_detail("argmax", worst_label),
        seed,
        batch.m,
        rows,
    ));

    let law = limit_covariance_gamma(model)?;
    let sigma_t = law.sigma_t_sq.sqrt();
    let mut k_sorted = k_values;
    k_sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite K"));
    let ks_k = ks_statistic(&k_sorted, |x| normal_cdf(x, 0.0, sigma_t))?;
    reports.push(tag(
        TestReport::new(
            format!("joint-k-ks-m{}", batch.m),
            ks_k,
            ks_threshold(rows, 0.001)?,
            rows,
        )
        .with_detail("sigma_t_sq", report::format_float(law.sigma_t_sq)),
        seed,
        batch.m,
        rows,
    ));
    Ok(reports)
}

fn run_joint_limit(
    config: &ExperimentConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<(Vec<TestReport>, Vec<String>)> {
    let model = config.require_model()?;
    let mut files = Vec::new();
    let mut reports = Vec::new();
    for &m in config.require_m_list()? {
        let batch = sample_batch(model, m, config.n, seed)?;
        write_batch_csv(&batch, out_dir, &mut files)?;
        reports.extend(joint_limit_reports(&batch, model, seed)?);
    }
    Ok((reports, files))
}

/// Standardized i.i.d. sums `(Σ(V_i − EV))/√M` of the 2-d pair, flat
/// row-major. Replicate `r` of level `level` uses substream
/// `level·n + r`, so levels are independent and the batch is
/// order-deterministic.
pub fn standardized_pair_sums(
    law: &JointLaw,
    m: u64,
    n: u64,
    seed: u64,
    level: u64,
) -> Result<Vec<f64>> {
    let sampler = law.sampler()?;
    let (mean_y, mean_z) = (law.mean_y(), law.mean_z());
    let rows = (0..n)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, level * n + r);
            let mut sy = CompensatedSum::new();
            let mut sz = CompensatedSum::new();
            for _ in 0..m {
                let (y, z) = sampler.draw(&mut rng);
                sy.add(y - mean_y);
                sz.add(z - mean_z);
            }
            let root = (m as f64).sqrt();
            [sy.value() / root, sz.value() / root]
        })
        .collect::<Vec<[f64; 2]>>();
    let mut flat = Vec::with_capacity(2 * rows.len());
    for row in rows {
        flat.extend_from_slice(&row);
    }
    Ok(flat)
}

/// Per-axis total-variation distances of the standardized sum against its
/// Gaussian limit, one row per `M` in `m_list`.
pub fn tv_clt_curve(
    law: &JointLaw,
    m_list: &[u64],
    n: u64,
    seed: u64,
    rule: &BinRule,
) -> Result<Vec<(u64, Vec<f64>)>> {
    let s = law.sigma();
    let cov = DMatrix::from_row_slice(2, 2, &[s[0][0], s[0][1], s[1][0], s[1][1]]);
    let gauss = crate::limit::GaussianLaw::centered(cov)?;
    let mut out = Vec::with_capacity(m_list.len());
    for (level, &m) in m_list.iter().enumerate() {
        let flat = standardized_pair_sums(law, m, n, seed, level as u64)?;
        let tvs = marginal_tvs(&flat, 2, &gauss, rule)?;
        out.push((m, tvs));
    }
    Ok(out)
}

fn run_tv_clt(
    config: &ExperimentConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<(Vec<TestReport>, Vec<String>)> {
    let law = config.effective_law()?.clone();
    let m_list = config.require_m_list()?;
    let curve = tv_clt_curve(&law, m_list, config.n, seed, &BinRule::default())?;

    let mut rows = Vec::new();
    for (m, tvs) in &curve {
        for (axis, tv) in tvs.iter().enumerate() {
            rows.push(vec![*m as f64, (axis + 1) as f64, *tv]);
        }
    }
    report::write_atomic(
        &out_dir.join("tv.csv"),
        report::table_to_csv(&["m", "axis", "tv"], &rows).as_bytes(),
    )?;

    let mut reports = Vec::new();
    let last = curve.last().expect("m_list non-empty");
    for axis in 0..2 {
        let mut worst_ratio = 0.0f64;
        for pair in curve.windows(2) {
            let (prev, next) = (pair[0].1[axis], pair[1].1[axis]);
            if prev > 0.0 {
                worst_ratio = worst_ratio.max(next / prev);
            }
        }
        reports.push(tag(
            TestReport::new(
                format!("tv-clt-trend-axis{}", axis + 1),
                worst_ratio,
                1.1,
                config.n,
            )
            .with_detail("m_list", format!("{m_list:?}")),
            seed,
            *m_list.last().expect("non-empty"),
            config.n,
        ));
        reports.push(tag(
            TestReport::new(
                format!("tv-clt-final-axis{}", axis + 1),
                last.1[axis],
                0.03,
                config.n,
            ),
            seed,
            last.0,
            config.n,
        ));
    }
    Ok((reports, vec!["tv.csv".into()]))
}

/// Symmetric grid of `points` values spanning `[-half_width, half_width]`.
pub fn grid_axis(half_width: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![0.0];
    }
    (0..points)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (points - 1) as f64)
        .collect()
}

type SceneFactory = Box<dyn Fn(u64) -> Result<LemmaScene>>;

fn run_density_sweep(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(Vec<TestReport>, Vec<String>)> {
    let m_list = config.require_m_list()?;
    let (make_scene, q, axis): (SceneFactory, usize, Vec<f64>) =
        match (&config.density, &config.model) {
            (Some(d), _) => {
                let rows: Vec<f64> = d.sigma1.iter().flatten().copied().collect();
                let sigma1 = DMatrix::from_row_slice(d.q + 2, d.q + 2, &rows);
                let (eta, phi, q) = (d.eta.clone(), d.phi.clone(), d.q);
                let axis = grid_axis(d.grid_half_width, d.grid_points);
                (
                    Box::new(move |m| {
                        LemmaScene::for_m(q, eta.clone(), sigma1.clone(), phi.clone(), m)
                    }),
                    q,
                    axis,
                )
            }
            (None, Some(model)) => {
                let model = model.clone();
                let q = model.q;
                (
                    Box::new(move |m| LemmaScene::from_model(&model, m)),
                    q,
                    grid_axis(default_grid_half_width(), default_grid_points()),
                )
            }
            (None, None) => unreachable!("validated"),
        };

    let sweep = crate::density::pointwise_convergence_sweep(&*make_scene, m_list, &axis)?;

    let mut header: Vec<String> = vec!["m".into()];
    header.extend((1..=q).map(|i| format!("xi_{i}")));
    header.extend(["transformed".into(), "limit".into(), "abs_err".into()]);
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<f64>> = sweep
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.m as f64];
            row.extend(&r.xi);
            row.extend([r.transformed, r.limit, r.abs_err]);
            row
        })
        .collect();
    report::write_atomic(
        &out_dir.join("sweep.csv"),
        report::table_to_csv(&header_refs, &rows).as_bytes(),
    )?;

    let mut reports = Vec::new();
    let n_grid = axis.len().pow(q as u32) as u64;
    let mut worst_ratio = 0.0f64;
    for pair in sweep.levels.windows(2) {
        if pair[0].max_err > 0.0 {
            worst_ratio = worst_ratio.max(pair[1].max_err / pair[0].max_err);
        }
    }
    let last = sweep.levels.last().expect("at least one level");
    reports.push(
        TestReport::new("density-sweep-trend", worst_ratio, 1.0, n_grid)
            .with_detail("m_list", format!("{m_list:?}")),
    );
    reports.push(
        TestReport::new("density-sweep-final-max-err", last.max_err, 1e-2, n_grid)
            .with_detail("m", last.m)
            .with_detail("l1_err", report::format_float(last.l1_err)),
    );
    Ok((reports, vec!["sweep.csv".into()]))
}

fn run_benford(
    config: &ExperimentConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<(Vec<TestReport>, Vec<String>)> {
    let model = config.benford.as_ref().expect("validated");
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for &m in config.require_m_list()? {
        let r = crate::benford::mantissa_experiment(model, m, config.n, seed)?;
        rows.push(vec![m as f64, config.n as f64, r.statistic, r.threshold]);
        reports.push(tag(r, seed, m, config.n));
    }
    report::write_atomic(
        &out_dir.join("benford.csv"),
        report::table_to_csv(&["m", "n", "ks", "threshold"], &rows).as_bytes(),
    )?;
    Ok((reports, vec!["benford.csv".into()]))
}

fn run_resample_variance(
    config: &ExperimentConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<(Vec<TestReport>, Vec<String>)> {
    let model = config.resample.as_ref().expect("validated");
    let particles = config.require_m_list()?[0] as usize;
    let d = variance_decomposition_estimate(model, particles, config.n, seed)?;
    // independent randomness for the second estimation path
    let direct = direct_variance(model, particles, config.n, substream_seed(seed, 1))?;
    let combined = d.combined();
    let gap = (combined.value - direct.value).abs();
    let se = (combined.se.powi(2) + direct.se.powi(2)).sqrt();

    let rows = vec![
        vec![d.term_i.value, d.term_i.se],
        vec![d.term_ii.value, d.term_ii.se],
        vec![d.term_iii.value, d.term_iii.se],
        vec![combined.value, combined.se],
        vec![direct.value, direct.se],
    ];
    report::write_atomic(
        &out_dir.join("decomposition.csv"),
        report::table_to_csv(&["value", "se"], &rows).as_bytes(),
    )?;

    let report = tag(
        TestReport::new("resample-variance-gap", gap, 3.0 * se, config.n)
            .with_detail("combined", report::format_float(combined.value))
            .with_detail("direct", report::format_float(direct.value)),
        seed,
        particles as u64,
        config.n,
    );
    Ok((vec![report], vec!["decomposition.csv".into()]))
}

fn run_integrability(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(Vec<TestReport>, Vec<String>)> {
    let model = config.require_model()?;
    let exponent = (model.q + 1) as u32;
    let report = crate::model::check_integrability(
        &model.phi,
        model.anchor(),
        exponent,
        config.m_tilde_max,
    )?;

    let rows: Vec<Vec<f64>> = report
        .trace
        .iter()
        .map(|t| {
            vec![
                t.m_tilde as f64,
                t.value,
                t.error,
                t.panels as f64,
                if t.converged { 1.0 } else { 0.0 },
            ]
        })
        .collect();
    report::write_atomic(
        &out_dir.join("trace.csv"),
        report::table_to_csv(&["m_tilde", "value", "error", "panels", "converged"], &rows)
            .as_bytes(),
    )?;

    use crate::model::IntegrabilityVerdict as V;
    let test = match &report.verdict {
        V::IntegrableWitness { m_tilde, integral } => TestReport::new(
            "integrability",
            *m_tilde as f64,
            config.m_tilde_max as f64,
            1,
        )
        .with_detail("integral", report::format_float(*integral))
        .with_detail("verdict", "integrable"),
        V::LikelyDivergent { reason } => {
            TestReport::new("integrability", f64::INFINITY, config.m_tilde_max as f64, 1)
                .with_detail("verdict", "likely-divergent")
                .with_detail("reason", reason.clone())
        }
        V::Inconclusive => {
            TestReport::new("integrability", f64::INFINITY, config.m_tilde_max as f64, 1)
                .with_detail("verdict", "inconclusive")
        }
    };
    Ok((vec![test], vec!["trace.csv".into()]))
}
