//! Statistical verification layer: Kolmogorov-Smirnov against arbitrary
//! CDFs, empirical Weyl (characteristic-function) sums, histogram
//! total-variation estimates, and grid chi-square tests for joint
//! uniformity on `[0,1)^q`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};
use crate::frac::{fractional_part, CompensatedSum};
use crate::limit::GaussianLaw;
use crate::quad::kronrod15;

/// Outcome of a single statistical check. `pass` is always
/// `statistic <= threshold`.
#[derive(Clone, Debug, Serialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub n: u64,
    pub pass: bool,
    pub details: BTreeMap<String, String>,
}

impl TestReport {
    pub fn new(name: impl Into<String>, statistic: f64, threshold: f64, n: u64) -> Self {
        TestReport {
            name: name.into(),
            statistic,
            threshold,
            n,
            pass: statistic <= threshold,
            details: BTreeMap::new(),
        }
    }

    pub fn with_detail(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.details.insert(key.into(), value.to_string());
        self
    }
}

/// `D_n = max_i max(i/n - F(x_(i)), F(x_(i)) - (i-1)/n)` over the order
/// statistics. `samples` must already be sorted ascending.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Contract(
            "ks_statistic needs at least one sample".into(),
        ));
    }
    if samples.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Contract(
            "ks_statistic requires sorted samples".into(),
        ));
    }
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        if !(-1e-9..=1.0 + 1e-9).contains(&f) {
            return Err(Error::Contract(format!("cdf({x}) = {f} is outside [0,1]")));
        }
        let hi = (i + 1) as f64 / n - f;
        let lo = f - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    Ok(d.max(0.0))
}

/// CDF of `Uniform[0,1]`.
pub fn uniform_cdf(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// CDF of `N(mean, sd^2)`.
pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2))
}

/// Density of `N(mean, sd^2)`.
pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// Quantile of the Kolmogorov distribution: the `c` with
/// `2 Σ_{k≥1} (-1)^{k-1} e^{-2 k² c²} = alpha`.
pub fn kolmogorov_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Contract(format!("alpha {alpha} outside (0,1)")));
    }
    let survival = |c: f64| -> f64 {
        let mut s = 0.0;
        for k in 1..=100 {
            let term = (-2.0 * (k * k) as f64 * c * c).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        2.0 * s
    };
    let (mut lo, mut hi) = (0.02, 4.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if survival(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Asymptotic KS acceptance threshold `c(alpha)/sqrt(n)`.
pub fn ks_threshold(n: u64, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Contract("ks_threshold needs n >= 1".into()));
    }
    Ok(kolmogorov_quantile(alpha)? / (n as f64).sqrt())
}

/// Quantile of the chi-square distribution with `df` degrees of freedom,
/// found by bisection on the regularized lower incomplete gamma.
pub fn chi_square_quantile(df: f64, p: f64) -> Result<f64> {
    if !(df > 0.0) || !(p > 0.0 && p < 1.0) {
        return Err(Error::Contract(format!(
            "chi_square_quantile(df={df}, p={p}) outside its domain"
        )));
    }
    let cdf = |x: f64| gamma_lr(0.5 * df, 0.5 * x);
    let (mut lo, mut hi) = (0.0, df + 60.0 * df.sqrt() + 200.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Magnitude of the empirical characteristic function at `(2πk, u)`:
/// `|N⁻¹ Σ_n exp(i(2π kᵀ frac_n + u h_n))|`.
///
/// `fracs` is row-major `N×q`; coordinates are reduced mod 1 internally, so
/// raw sums and their fractional parts give identical results. `h` may be
/// empty when `u == 0`.
pub fn weyl_sum(fracs: &[f64], q: usize, h: &[f64], k: &[i64], u: f64) -> Result<f64> {
    if q == 0 || !fracs.len().is_multiple_of(q) {
        return Err(Error::Contract(format!(
            "flat sample buffer of length {} is not a multiple of q={q}",
            fracs.len()
        )));
    }
    let n = fracs.len() / q;
    if n == 0 {
        return Err(Error::Contract("weyl_sum needs at least one sample".into()));
    }
    if k.len() != q {
        return Err(Error::Contract(format!(
            "frequency vector has length {}, expected q={q}",
            k.len()
        )));
    }
    if k.iter().all(|&ki| ki == 0) {
        return Err(Error::Contract("weyl_sum requires k != 0".into()));
    }
    if u != 0.0 && h.len() != n {
        return Err(Error::Contract(format!(
            "h has length {}, expected {n}",
            h.len()
        )));
    }
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for row in 0..n {
        let mut phase = 0.0;
        for (j, &kj) in k.iter().enumerate() {
            if kj != 0 {
                phase += kj as f64 * fractional_part(fracs[row * q + j])?;
            }
        }
        let mut angle = 2.0 * std::f64::consts::PI * phase;
        if u != 0.0 {
            angle += u * h[row];
        }
        re.add(angle.cos());
        im.add(angle.sin());
    }
    let (r, i) = (re.value() / n as f64, im.value() / n as f64);
    Ok(r.hypot(i))
}

/// Binning rule for [`histogram_tv`]: `bins` equal-width cells over either
/// the explicit `range` or the data range padded by `pad_sd` reference
/// standard deviations.
#[derive(Clone, Debug)]
pub struct BinRule {
    pub bins: usize,
    pub pad_sd: f64,
    pub range: Option<(f64, f64)>,
}

impl Default for BinRule {
    fn default() -> Self {
        BinRule {
            bins: 64,
            pad_sd: 3.0,
            range: None,
        }
    }
}

impl BinRule {
    pub fn with_range(lo: f64, hi: f64, bins: usize) -> Self {
        BinRule {
            bins,
            pad_sd: 0.0,
            range: Some((lo, hi)),
        }
    }
}

/// Histogram total-variation estimate against `reference` (a normalized
/// density):
/// `½ Σ_bins |empirical − ∫_bin reference| + ½ |empirical outside − reference outside|`.
///
/// A lower bound for the true total-variation distance.
pub fn histogram_tv(
    samples: &[f64],
    reference: &mut dyn FnMut(f64) -> f64,
    reference_sd: f64,
    rule: &BinRule,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Contract(
            "histogram_tv needs at least one sample".into(),
        ));
    }
    if rule.bins == 0 {
        return Err(Error::Contract(
            "histogram_tv needs at least one bin".into(),
        ));
    }
    if !(reference_sd.is_finite() && reference_sd >= 0.0) {
        return Err(Error::Contract(format!(
            "reference sd {reference_sd} must be finite and nonnegative"
        )));
    }
    let (lo, hi) = match rule.range {
        Some((lo, hi)) if lo < hi => (lo, hi),
        Some((lo, hi)) => {
            return Err(Error::Contract(format!("empty bin range [{lo}, {hi}]")));
        }
        None => {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &x in samples {
                if !x.is_finite() {
                    return Err(Error::Contract("non-finite sample in histogram_tv".into()));
                }
                lo = lo.min(x);
                hi = hi.max(x);
            }
            let pad = (rule.pad_sd * reference_sd).max(1e-12 * (1.0 + hi.abs()));
            (lo - pad, hi + pad)
        }
    };

    let n = samples.len() as f64;
    let width = (hi - lo) / rule.bins as f64;
    let mut counts = vec![0u64; rule.bins];
    let mut outside = 0u64;
    for &x in samples {
        if x < lo || x > hi {
            outside += 1;
            continue;
        }
        let idx = (((x - lo) / width) as usize).min(rule.bins - 1);
        counts[idx] += 1;
    }

    let mut ref_inside = CompensatedSum::new();
    let mut discrepancy = CompensatedSum::new();
    for (b, &c) in counts.iter().enumerate() {
        let (a, bnd) = (lo + b as f64 * width, lo + (b + 1) as f64 * width);
        let (mass, _) = kronrod15(&mut |x| reference(x), a, bnd)?;
        ref_inside.add(mass);
        discrepancy.add((c as f64 / n - mass).abs());
    }
    let ref_outside = (1.0 - ref_inside.value()).max(0.0);
    let emp_outside = outside as f64 / n;
    Ok(0.5 * (discrepancy.value() + (emp_outside - ref_outside).abs()))
}

/// Per-axis histogram TV of row-major `N×dim` samples against the marginals
/// `N(mean_i, Σ_ii)` of a Gaussian law.
pub fn marginal_tvs(
    flat: &[f64],
    dim: usize,
    law: &GaussianLaw,
    rule: &BinRule,
) -> Result<Vec<f64>> {
    if dim == 0 || !flat.len().is_multiple_of(dim) {
        return Err(Error::Contract(format!(
            "flat sample buffer of length {} is not a multiple of dim={dim}",
            flat.len()
        )));
    }
    if law.dim() != dim {
        return Err(Error::Contract(format!(
            "law dimension {} does not match samples of dimension {dim}",
            law.dim()
        )));
    }
    let n = flat.len() / dim;
    let mut out = Vec::with_capacity(dim);
    for axis in 0..dim {
        let column: Vec<f64> = (0..n).map(|r| flat[r * dim + axis]).collect();
        let mean = law.mean()[axis];
        let sd = law.covariance()[(axis, axis)].sqrt();
        let tv = histogram_tv(&column, &mut |x| normal_pdf(x, mean, sd), sd, rule)?;
        out.push(tv);
    }
    Ok(out)
}

/// Pearson chi-square of `N×q` fractional vectors against the uniform law
/// on a `cells^q` grid.
#[derive(Clone, Copy, Debug)]
pub struct GridChiSquare {
    pub statistic: f64,
    pub dof: u64,
    pub cells: u64,
}

pub fn grid_chi_square(fracs: &[f64], q: usize, cells_per_axis: usize) -> Result<GridChiSquare> {
    if q == 0 || !fracs.len().is_multiple_of(q) {
        return Err(Error::Contract(format!(
            "flat sample buffer of length {} is not a multiple of q={q}",
            fracs.len()
        )));
    }
    let n = fracs.len() / q;
    if cells_per_axis == 0 {
        return Err(Error::Contract(
            "grid needs at least one cell per axis".into(),
        ));
    }
    let cells = (cells_per_axis as u64)
        .checked_pow(q as u32)
        .ok_or_else(|| Error::Contract("cell count overflows".into()))?;
    if cells as f64 > n as f64 / 5.0 {
        return Err(Error::Contract(format!(
            "{cells} cells against {n} samples violates the expected-count >= 5 rule"
        )));
    }
    let mut counts = vec![0u64; cells as usize];
    for row in 0..n {
        let mut idx = 0usize;
        for j in 0..q {
            let f = fracs[row * q + j];
            if !(0.0..1.0).contains(&f) {
                return Err(Error::Contract(format!("coordinate {f} is outside [0,1)")));
            }
            let c = ((f * cells_per_axis as f64) as usize).min(cells_per_axis - 1);
            idx = idx * cells_per_axis + c;
        }
        counts[idx] += 1;
    }
    let expected = n as f64 / cells as f64;
    let mut stat = CompensatedSum::new();
    for &c in &counts {
        let d = c as f64 - expected;
        stat.add(d * d / expected);
    }
    Ok(GridChiSquare {
        statistic: stat.value(),
        dof: cells - 1,
        cells,
    })
}

/// Sample mean and unbiased variance in one compensated two-pass sweep.
pub fn mean_and_variance(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 2 {
        return Err(Error::Contract(
            "variance needs at least two samples".into(),
        ));
    }
    let mean = crate::frac::compensated_sum(xs) / xs.len() as f64;
    let mut ss = CompensatedSum::new();
    for &x in xs {
        let d = x - mean;
        ss.add(d * d);
    }
    Ok((mean, ss.value() / (xs.len() - 1) as f64))
}

/// Sample means and unbiased covariance matrix of row-major `N×dim` data.
pub fn covariance_matrix(flat: &[f64], dim: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if dim == 0 || !flat.len().is_multiple_of(dim) {
        return Err(Error::Contract(format!(
            "flat sample buffer of length {} is not a multiple of dim={dim}",
            flat.len()
        )));
    }
    let n = flat.len() / dim;
    if n < 2 {
        return Err(Error::Contract(
            "covariance needs at least two samples".into(),
        ));
    }
    let mut means = vec![0.0; dim];
    for (j, m) in means.iter_mut().enumerate() {
        let mut acc = CompensatedSum::new();
        for r in 0..n {
            acc.add(flat[r * dim + j]);
        }
        *m = acc.value() / n as f64;
    }
    let mut acc = vec![CompensatedSum::new(); dim * dim];
    for r in 0..n {
        for i in 0..dim {
            let di = flat[r * dim + i] - means[i];
            for j in i..dim {
                let dj = flat[r * dim + j] - means[j];
                acc[i * dim + j].add(di * dj);
            }
        }
    }
    let mut cov = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let v = acc[i * dim + j].value() / (n - 1) as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok((means, cov))
}

/// Standard error of the sample covariance entry `(i,j)` when the data are
/// Gaussian with covariance `cov`: `sqrt((Σ_ii Σ_jj + Σ_ij²)/(n-1))`.
pub fn gaussian_cov_entry_se(cov: &DMatrix<f64>, i: usize, j: usize, n: usize) -> f64 {
    ((cov[(i, i)] * cov[(j, j)] + cov[(i, j)] * cov[(i, j)]) / (n.max(2) - 1) as f64).sqrt()
}
