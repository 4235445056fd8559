//! Generalized Benford analysis: mantissa in a fixed base, the data-adapted
//! base `b̂_M = exp((1/(βM)) Σ_{i≤β_M} ln X_i)`, and the reduction of both
//! mantissa laws to fractional sums.
//!
//! Products `Π X_i` are never materialized; everything runs on
//! `log_b M_b(x) = {log_b x}`, so overflow is impossible. The adapted-base
//! log-mantissa of the product of `M` factors is exactly
//!
//! `{Σ_{i≤M} ln X_i / ((1/(βM)) Σ_{i≤β_M} ln X_i)}`
//!
//! which is the fractional-sum vector with `Y_i = ln X_i`, indices
//! `β = (1, β)` and `φ(t) = β/t`.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frac::{ceil_int, fractional_part, CompensatedSum};
use crate::model::{JointLaw, ModelSpec, PhiSpec};
use crate::sim::sample_batch;
use crate::stats::{ks_statistic, ks_threshold, uniform_cdf, TestReport};

/// A positive real decomposed as `mantissa · base^k`, `mantissa ∈ [1, base)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MantissaSample {
    pub mantissa: f64,
    pub base: f64,
    /// `log_base(mantissa) = {log_base(x)}`, in `[0,1)`.
    pub log_mantissa: f64,
}

/// Unique representative of `x` in `[1, base)` under scaling by powers of
/// `base`, computed in log-space.
pub fn mantissa(x: f64, base: f64) -> Result<MantissaSample> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("mantissa needs x > 0, got {x}")));
    }
    if !(base > 1.0) || !base.is_finite() {
        return Err(Error::Domain(format!(
            "mantissa needs base > 1, got {base}"
        )));
    }
    let log_mantissa = fractional_part(x.ln() / base.ln())?;
    let mut m = base.powf(log_mantissa);
    if m >= base {
        m = f64::from_bits(base.to_bits() - 1);
    }
    if m < 1.0 {
        m = 1.0;
    }
    Ok(MantissaSample {
        mantissa: m,
        base,
        log_mantissa,
    })
}

/// Benford CDF in base `b`: `μ_b([1, a)) = log_b(a)`.
pub fn benford_cdf(a: f64, base: f64) -> Result<f64> {
    if !(base > 1.0) {
        return Err(Error::Domain(format!(
            "benford_cdf needs base > 1, got {base}"
        )));
    }
    if !(1.0..base).contains(&a) {
        return Err(Error::Domain(format!(
            "benford_cdf needs a in [1, {base}), got {a}"
        )));
    }
    Ok(a.ln() / base.ln())
}

/// Data-adapted base `exp((1/(βM)) Σ_{i≤⌈βM⌉} ln X_i)`.
pub fn adapted_base(xs: &[f64], beta: f64, m: u64) -> Result<f64> {
    if !(beta > 0.0) || m == 0 {
        return Err(Error::Domain(format!(
            "adapted_base needs beta > 0 and M >= 1, got beta={beta}, M={m}"
        )));
    }
    let beta_m = ceil_int(beta * m as f64)? as usize;
    if beta_m == 0 || beta_m > xs.len() {
        return Err(Error::Domain(format!(
            "adapted_base needs beta_M = {beta_m} samples, series has {}",
            xs.len()
        )));
    }
    let mut acc = CompensatedSum::new();
    for &x in &xs[..beta_m] {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::Domain(format!(
                "adapted_base needs positive data, got {x}"
            )));
        }
        acc.add(x.ln());
    }
    Ok((acc.value() / (beta * m as f64)).exp())
}

/// Law of one positive factor `X_i`, described through `ln X_i`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogFactorLaw {
    /// `ln X ~ N(mean, sd²)`, i.e. lognormal factors.
    Normal { mean: f64, sd: f64 },
    /// `X ≡ exp(value)` exactly; violates the theorem's hypotheses and is
    /// kept as the designed failure case.
    Degenerate { value: f64 },
}

impl LogFactorLaw {
    fn joint(&self) -> JointLaw {
        match *self {
            LogFactorLaw::Normal { mean, sd } => {
                JointLaw::gaussian([mean, 0.0], [[sd * sd, 0.0], [0.0, 1.0]])
            }
            LogFactorLaw::Degenerate { value } => {
                JointLaw::gaussian([value, 0.0], [[0.0, 0.0], [0.0, 1.0]])
            }
        }
    }

    fn log_mean(&self) -> f64 {
        match *self {
            LogFactorLaw::Normal { mean, .. } => mean,
            LogFactorLaw::Degenerate { value } => value,
        }
    }
}

/// Which mantissa base the experiment exercises.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BaseMode {
    Fixed { base: f64 },
    Adapted { beta: f64 },
}

/// Product model: mantissas of `Π_{i=1}^M X_i`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ProductModel {
    pub factors: LogFactorLaw,
    pub base: BaseMode,
}

impl ProductModel {
    /// The fractional-sum model whose first coordinate is the product's
    /// log-mantissa.
    pub fn to_model_spec(&self) -> Result<ModelSpec> {
        let law = self.factors.joint();
        let (betas, phi) = match self.base {
            BaseMode::Fixed { base } => {
                if !(base > 1.0) || !base.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "fixed mantissa base must exceed 1, got {base}"
                    )));
                }
                (vec![1.0, 1.25], PhiSpec::constant(1.0 / base.ln()))
            }
            BaseMode::Adapted { beta } => {
                if !(beta > 1.0) || !beta.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "the adapted-base construction needs beta > 1, got {beta}"
                    )));
                }
                (vec![1.0, beta], PhiSpec::affine_reciprocal(beta, 0.0))
            }
        };
        Ok(ModelSpec {
            q: 1,
            betas,
            x: 0.0,
            z: 0.0,
            y: vec![0.0],
            law,
            phi,
        })
    }
}

/// Sample `N` product log-mantissas at length `M` and KS-test them against
/// `Uniform[0,1]`. The degenerate factor law fails this test by design.
pub fn mantissa_experiment(model: &ProductModel, m: u64, n: u64, seed: u64) -> Result<TestReport> {
    let spec = model.to_model_spec()?;
    if matches!(model.base, BaseMode::Adapted { .. }) && model.factors.log_mean() == 0.0 {
        return Err(Error::InvalidConfig(
            "adapted base needs E[ln X] != 0; the scaling anchor sits on the φ pole".into(),
        ));
    }
    let batch = sample_batch(&spec, m, n, seed)?;
    let mut fracs = batch.frac_column(0);
    fracs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let stat = ks_statistic(&fracs, uniform_cdf)?;
    let threshold = ks_threshold(fracs.len() as u64, 0.001)?;
    let name = match model.base {
        BaseMode::Fixed { base } => format!("mantissa-fixed-base-{base}"),
        BaseMode::Adapted { beta } => format!("mantissa-adapted-beta-{beta}"),
    };
    Ok(TestReport::new(name, stat, threshold, fracs.len() as u64)
        .with_detail("m", m)
        .with_detail("seed", seed)
        .with_detail("exceptional", batch.exceptional_count))
}

/// Fixed-base mantissa analysis of a user-supplied positive series.
pub fn fixed_base_report(data: &[f64], base: f64) -> Result<TestReport> {
    if data.is_empty() {
        return Err(Error::Domain("empty data series".into()));
    }
    let mut logs = Vec::with_capacity(data.len());
    for &x in data {
        logs.push(mantissa(x, base)?.log_mantissa);
    }
    logs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let stat = ks_statistic(&logs, uniform_cdf)?;
    let threshold = ks_threshold(logs.len() as u64, 0.001)?;
    Ok(TestReport::new(
        format!("data-mantissa-base-{base}"),
        stat,
        threshold,
        logs.len() as u64,
    )
    .with_detail("base", base))
}

/// One positive real per line; blank lines are skipped.
pub fn read_positive_series(path: &Path) -> Result<Vec<f64>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let x: f64 = trimmed.parse().map_err(|_| {
            Error::Domain(format!("line {}: not a number: {trimmed:?}", lineno + 1))
        })?;
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::Domain(format!(
                "line {}: series must be positive, got {x}",
                lineno + 1
            )));
        }
        out.push(x);
    }
    if out.is_empty() {
        return Err(Error::Domain("no data rows in series".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    #[allow(clippy::approx_constant)]
    fn mantissa_examples() {
        let m = mantissa(314.0, 10.0).unwrap();
        assert!((m.mantissa - 3.14).abs() < 1e-12);
        let m = mantissa(0.00314, 10.0).unwrap();
        assert!((m.mantissa - 3.14).abs() < 1e-12);
        let m = mantissa(10.0, 2.0).unwrap();
        assert!((m.mantissa - 1.25).abs() < 1e-12);
        assert!(mantissa(0.0, 10.0).is_err());
        assert!(mantissa(-3.0, 10.0).is_err());
        assert!(mantissa(3.0, 1.0).is_err());
    }

    #[test]
    fn benford_cdf_examples() {
        assert_eq!(benford_cdf(1.0, 10.0).unwrap(), 0.0);
        assert!((benford_cdf(10f64.sqrt(), 10.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((benford_cdf(2.0, 10.0).unwrap() - 0.30102999566398114).abs() < 1e-15);
        assert!(benford_cdf(0.5, 10.0).is_err());
        assert!(benford_cdf(10.0, 10.0).is_err());
    }

    #[test]
    fn adapted_base_examples() {
        let e = std::f64::consts::E;
        let xs = vec![e; 8];
        assert!((adapted_base(&xs, 1.0, 8).unwrap() - e).abs() < 1e-14);
        let xs = vec![e * e; 5];
        assert!((adapted_base(&xs, 1.0, 5).unwrap() - e * e).abs() < 1e-13);
        let xs = [e, e.powi(3)];
        assert!((adapted_base(&xs, 1.0, 2).unwrap() - e * e).abs() < 1e-13);
        assert!(adapted_base(&[1.0], 1.0, 2).is_err());
        assert!(adapted_base(&[-1.0, 2.0], 1.0, 2).is_err());
    }

    #[test]
    fn product_mantissa_equals_fracsum_value() {
        // the brace identity, checked end to end on explicit draws
        let beta = 2.0;
        let m = 50u64;
        let model = ProductModel {
            factors: LogFactorLaw::Normal { mean: 1.0, sd: 0.5 },
            base: BaseMode::Adapted { beta },
        };
        let spec = model.to_model_spec().unwrap();
        let schedule = crate::model::beta_indices(&spec, m).unwrap();
        let sampler = spec.law.sampler().unwrap();
        for trial in 0..100 {
            let mut rng = crate::rng::substream(77, trial);
            let draws: Vec<(f64, f64)> = (0..schedule.draws())
                .map(|_| sampler.draw(&mut rng))
                .collect();
            let s = crate::sim::sample_vector(&spec, &schedule, &draws).unwrap();

            // direct route: adapted base from the log data, then the
            // product's log-mantissa
            let logs: Vec<f64> = draws.iter().map(|d| d.0).collect();
            let xs: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
            let b_hat = adapted_base(&xs, beta, m).unwrap();
            let sum_m: f64 = logs[..m as usize].iter().sum();
            let direct = fractional_part(sum_m / b_hat.ln()).unwrap();

            let d = (s.fracs[0] - direct).abs();
            let circ = d.min(1.0 - d);
            assert!(circ < 1e-9, "trial {trial}: {} vs {direct}", s.fracs[0]);
        }
    }

    #[test]
    fn fixed_base_lognormal_products_look_benford() {
        let model = ProductModel {
            factors: LogFactorLaw::Normal { mean: 1.0, sd: 1.0 },
            base: BaseMode::Fixed { base: 10.0 },
        };
        let report = mantissa_experiment(&model, 200, 20_000, 5).unwrap();
        assert!(report.pass, "KS = {}", report.statistic);
    }

    #[test]
    fn degenerate_factors_fail_the_uniformity_test() {
        let model = ProductModel {
            factors: LogFactorLaw::Degenerate { value: 10f64.ln() },
            base: BaseMode::Fixed { base: 10.0 },
        };
        let report = mantissa_experiment(&model, 100, 2_000, 5).unwrap();
        assert!(!report.pass);
        assert!(report.statistic > 0.9, "KS = {}", report.statistic);
    }

    #[test]
    fn adapted_base_requires_beta_above_one() {
        let model = ProductModel {
            factors: LogFactorLaw::Normal { mean: 1.0, sd: 1.0 },
            base: BaseMode::Adapted { beta: 0.8 },
        };
        assert!(matches!(
            mantissa_experiment(&model, 100, 100, 1),
            Err(Error::InvalidConfig(_))
        ));
        let model = ProductModel {
            factors: LogFactorLaw::Normal { mean: 0.0, sd: 1.0 },
            base: BaseMode::Adapted { beta: 2.0 },
        };
        assert!(mantissa_experiment(&model, 100, 100, 1).is_err());
    }

    #[test]
    fn read_series_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.txt");
        std::fs::write(&path, "4.5\n\n2.25\n100\n").unwrap();
        let xs = read_positive_series(&path).unwrap();
        assert_eq!(xs, vec![4.5, 2.25, 100.0]);

        std::fs::write(&path, "4.5\n-1\n").unwrap();
        assert!(read_positive_series(&path).is_err());
        std::fs::write(&path, "abc\n").unwrap();
        assert!(read_positive_series(&path).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1024))]

        #[test]
        fn mantissa_round_trip_and_log_identity(
            mag in -30i32..30,
            frac in 1.0f64..10.0,
            base_pick in 0usize..3,
        ) {
            let base = [10.0, 2.0, std::f64::consts::E][base_pick];
            let x = frac * 10f64.powi(mag);
            let m = mantissa(x, base).unwrap();
            prop_assert!((1.0..base).contains(&m.mantissa));

            // round trip: m * base^k == x for the integer k = log_b x - log_mantissa
            let k = (x.ln() / base.ln() - m.log_mantissa).round();
            let rebuilt = m.mantissa * base.powf(k);
            prop_assert!((rebuilt - x).abs() <= 1e-12 * x.abs());

            // the log identity
            let direct = fractional_part(x.ln() / base.ln()).unwrap();
            prop_assert!((m.log_mantissa - direct).abs() < 1e-12);

            // scale equivariance
            let scaled = mantissa(base * x, base).unwrap();
            prop_assert!((scaled.mantissa - m.mantissa).abs() < 1e-9 * m.mantissa);
        }
    }
}
