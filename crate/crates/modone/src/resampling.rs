//! Stratified resampling: offspring selection from normalized cumulative
//! weights, closed-form conditional expectations per stratum, the `ψ_k`
//! overlap kernel, and the exact variance decomposition
//!
//! `Var(M^{-1/2} Σ_m f(ξ_m)) = (i) + (ii) − (iii)`
//!
//! with `(i) = Var(√M Σ f g / Σ g)`, `(ii) = E(Σ g f² / Σ g)` and
//! `(iii) = E(M⁻¹ Σ_m E(f(ξ_m)|F)²)` (law of total variance; the identity
//! holds at every finite `M`, not just in the limit).

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frac::{fractional_part, CompensatedSum};
use crate::rng::substream;

/// Weighted particles with normalized cumulative sums
/// `S̄_j = M·(Σ_{m≤j} g_m)/(Σ g)`, `S̄_0 = 0`, `S̄_M = M` pinned exactly.
#[derive(Clone, Debug)]
pub struct ParticleSystem {
    positions: Vec<f64>,
    weights: Vec<f64>,
    cum_norm: Vec<f64>,
}

impl ParticleSystem {
    pub fn new(positions: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let m = positions.len();
        if m == 0 {
            return Err(Error::Contract("a particle system needs M >= 1".into()));
        }
        if weights.len() != m {
            return Err(Error::Contract(format!(
                "{} weights against {m} particles",
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::Domain("weights must be strictly positive".into()));
        }
        let mut prefix = Vec::with_capacity(m + 1);
        let mut acc = CompensatedSum::new();
        prefix.push(0.0);
        for &w in &weights {
            acc.add(w);
            prefix.push(acc.value());
        }
        let total = prefix[m];
        let mut cum_norm: Vec<f64> = prefix.iter().map(|p| m as f64 * p / total).collect();
        cum_norm[m] = m as f64;
        if cum_norm.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Degenerate(
                "normalized cumulative weights are not strictly increasing".into(),
            ));
        }
        Ok(ParticleSystem {
            positions,
            weights,
            cum_norm,
        })
    }

    /// `x, g` columns, header row.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut positions = Vec::new();
        let mut weights = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || (lineno == 0 && t.starts_with(|c: char| c.is_alphabetic())) {
                continue;
            }
            let mut fields = t.split(',');
            let (x, g) = (fields.next(), fields.next());
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| Error::Domain(format!("line {}: expected `x,g`", lineno + 1)))
            };
            positions.push(parse(x)?);
            weights.push(parse(g)?);
        }
        Self::new(positions, weights)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `S̄_0..S̄_M`.
    pub fn cum_norm(&self) -> &[f64] {
        &self.cum_norm
    }

    /// Normalized width `S̄_i − S̄_{i−1}` of particle `i` (0-based).
    pub fn width(&self, i: usize) -> f64 {
        self.cum_norm[i + 1] - self.cum_norm[i]
    }
}

/// For each stratum `m`, the unique particle `i` (0-based) with
/// `S̄_i < m − U_m ≤ S̄_{i+1}`.
pub fn stratified_resample(sys: &ParticleSystem, u: &[f64]) -> Result<Vec<usize>> {
    let m = sys.len();
    if u.len() != m {
        return Err(Error::Contract(format!(
            "{} uniforms against M = {m}",
            u.len()
        )));
    }
    let mut out = Vec::with_capacity(m);
    for (stratum, &um) in u.iter().enumerate() {
        if !(um > 0.0 && um < 1.0) {
            return Err(Error::Contract(format!(
                "U_{} = {um} is outside (0,1)",
                stratum + 1
            )));
        }
        let target = (stratum + 1) as f64 - um;
        let j = sys.cum_norm.partition_point(|&s| s < target);
        // j >= 1 because cum_norm[0] = 0 < target; particle index is j-1
        out.push(j.saturating_sub(1).min(m - 1));
    }
    Ok(out)
}

/// Reference multinomial resampler: M independent categorical draws.
pub fn multinomial_resample(sys: &ParticleSystem, u: &[f64]) -> Result<Vec<usize>> {
    let m = sys.len();
    if u.len() != m {
        return Err(Error::Contract(format!(
            "{} uniforms against M = {m}",
            u.len()
        )));
    }
    let mut out = Vec::with_capacity(m);
    for &um in u {
        if !(um > 0.0 && um < 1.0) {
            return Err(Error::Contract(format!("U = {um} is outside (0,1)")));
        }
        let target = um * m as f64;
        let j = sys.cum_norm.partition_point(|&s| s < target);
        out.push(j.saturating_sub(1).min(m - 1));
    }
    Ok(out)
}

fn stratum_overlap(a: f64, b: f64, stratum: i64) -> f64 {
    (b.min(stratum as f64) - a.max((stratum - 1) as f64)).max(0.0)
}

/// `E(f(ξ_m)|F) = Σ_i f_i · |(m−1, m] ∩ (S̄_{i−1}, S̄_i]|` for the 1-based
/// stratum `m`; exact interval arithmetic, no numeric integration.
pub fn conditional_expectation(sys: &ParticleSystem, f_values: &[f64], m: usize) -> Result<f64> {
    let n = sys.len();
    if f_values.len() != n {
        return Err(Error::Contract(format!(
            "{} f-values against M = {n}",
            f_values.len()
        )));
    }
    if m == 0 || m > n {
        return Err(Error::Contract(format!("stratum {m} outside 1..={n}")));
    }
    let (lo, hi) = ((m - 1) as f64, m as f64);
    // particles whose interval intersects (m-1, m]
    let first = sys.cum_norm.partition_point(|&s| s <= lo).saturating_sub(1);
    let mut acc = CompensatedSum::new();
    for (w, &f) in sys.cum_norm.windows(2).zip(f_values).skip(first) {
        if w[0] >= hi {
            break;
        }
        let o = (w[1].min(hi) - w[0].max(lo)).max(0.0);
        if o > 0.0 {
            acc.add(f * o);
        }
    }
    Ok(acc.value())
}

/// Arguments of the overlap kernel `ψ_k`: `k+1` window widths hanging off
/// the fractional anchor `u0`.
#[derive(Clone, Debug)]
pub struct OverlapArgs {
    pub u0: f64,
    pub w: Vec<f64>,
}

/// `ψ_k(u0, w_1..w_{k+1}) = Σ_{m≥1} |(u0, u0+w_1] ∩ (m−1,m]| ·
/// |(u0+Σ_{ℓ≤k} w_ℓ, u0+Σ_{ℓ≤k+1} w_ℓ] ∩ (m−1,m]|`, in closed form; at most
/// `⌈u0 + Σw⌉` strata contribute.
pub fn psi_k(args: &OverlapArgs) -> Result<f64> {
    if !(0.0..1.0).contains(&args.u0) {
        return Err(Error::Contract(format!("u0 = {} outside [0,1)", args.u0)));
    }
    if args.w.is_empty() || args.w.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::Contract(
            "psi_k needs k+1 strictly positive widths".into(),
        ));
    }
    let k = args.w.len() - 1;
    let a1 = args.u0;
    let b1 = a1 + args.w[0];
    let head: f64 = args.w[..k].iter().sum();
    let a2 = args.u0 + head;
    let b2 = a2 + args.w[k];
    let lo = (a1.max(a2).floor() as i64 + 1).max(1);
    let hi = b1.min(b2).ceil() as i64;
    let mut acc = CompensatedSum::new();
    for m in lo..=hi {
        acc.add(stratum_overlap(a1, b1, m) * stratum_overlap(a2, b2, m));
    }
    Ok(acc.value())
}

/// Both sides of the second-moment identity
/// `Σ_m E(f(ξ_m)|F)² = Σ_{k≥0} (1+1_{k≥1}) Σ_i f_i f_{i+k} ψ_k({S̄_{i−1}}, widths)`.
pub fn second_moment_identity_check(sys: &ParticleSystem, f_values: &[f64]) -> Result<(f64, f64)> {
    let n = sys.len();
    if f_values.len() != n {
        return Err(Error::Contract(format!(
            "{} f-values against M = {n}",
            f_values.len()
        )));
    }
    let mut direct = CompensatedSum::new();
    for m in 1..=n {
        let ce = conditional_expectation(sys, f_values, m)?;
        direct.add(ce * ce);
    }

    let mut psi_form = CompensatedSum::new();
    for i in 0..n {
        let u0 = fractional_part(sys.cum_norm[i])?;
        let b1_ceil = (u0 + sys.width(i)).ceil();
        let mut w = Vec::new();
        for k in 0..n - i {
            w.push(sys.width(i + k));
            let factor = if k == 0 { 1.0 } else { 2.0 };
            let psi = psi_k(&OverlapArgs { u0, w: w.clone() })?;
            psi_form.add(factor * f_values[i] * f_values[i + k] * psi);
            // once window k starts past the last stratum window 0 touches,
            // every later k is zero
            let next_start: f64 = u0 + w.iter().sum::<f64>();
            if next_start >= b1_ceil {
                break;
            }
        }
    }
    Ok((direct.value(), psi_form.value()))
}

/// Scalar functions the resampling experiments use for `f` and `g`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "snake_case")]
pub enum ScalarFn {
    Sin,
    Cos,
    Identity,
    Square,
    /// `1 + x²`, a convenient strictly positive weight.
    OnePlusSquare,
    Constant {
        value: f64,
    },
}

impl ScalarFn {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ScalarFn::Sin => x.sin(),
            ScalarFn::Cos => x.cos(),
            ScalarFn::Identity => x,
            ScalarFn::Square => x * x,
            ScalarFn::OnePlusSquare => 1.0 + x * x,
            ScalarFn::Constant { value } => value,
        }
    }
}

/// Particle position law.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParticleLaw {
    Exponential { rate: f64 },
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

impl ParticleLaw {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ParticleLaw::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            ParticleLaw::Uniform { lo, hi } => lo < hi && lo.is_finite() && hi.is_finite(),
            ParticleLaw::Normal { sd, mean } => sd > 0.0 && sd.is_finite() && mean.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad particle law {self:?}")))
        }
    }

    fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ParticleLaw::Exponential { rate } => {
                let u: f64 = rng.random_range(0.0f64..1.0);
                -(1.0 - u).ln() / rate
            }
            ParticleLaw::Uniform { lo, hi } => rng.random_range(lo..hi),
            ParticleLaw::Normal { mean, sd } => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                mean + sd * z
            }
        }
    }
}

/// Experiment description: i.i.d. particles, weight `g`, integrand `f`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ResampleModel {
    pub law: ParticleLaw,
    pub f: ScalarFn,
    pub g: ScalarFn,
}

/// A Monte Carlo point estimate with its standard error.
#[derive(Clone, Copy, Debug)]
pub struct TermEstimate {
    pub value: f64,
    pub se: f64,
}

/// The three decomposition terms.
#[derive(Clone, Debug)]
pub struct VarianceDecomposition {
    pub term_i: TermEstimate,
    pub term_ii: TermEstimate,
    pub term_iii: TermEstimate,
    pub m: usize,
    pub n: u64,
}

impl VarianceDecomposition {
    /// `(i) + (ii) − (iii)` with root-sum-square standard error.
    pub fn combined(&self) -> TermEstimate {
        TermEstimate {
            value: self.term_i.value + self.term_ii.value - self.term_iii.value,
            se: (self.term_i.se.powi(2) + self.term_ii.se.powi(2) + self.term_iii.se.powi(2))
                .sqrt(),
        }
    }
}

fn mean_with_se(xs: &[f64]) -> TermEstimate {
    let (mean, var) = crate::stats::mean_and_variance(xs).expect("n >= 2");
    TermEstimate {
        value: mean,
        se: (var / xs.len() as f64).sqrt(),
    }
}

fn variance_with_se(xs: &[f64]) -> TermEstimate {
    let (mean, var) = crate::stats::mean_and_variance(xs).expect("n >= 2");
    let n = xs.len() as f64;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    TermEstimate {
        value: var,
        se: ((m4 - var * var).max(0.0) / n).sqrt(),
    }
}

fn build_system<R: rand::Rng + ?Sized>(
    model: &ResampleModel,
    m: usize,
    rng: &mut R,
) -> Result<(ParticleSystem, Vec<f64>)> {
    let positions: Vec<f64> = (0..m).map(|_| model.law.draw(rng)).collect();
    let weights: Vec<f64> = positions.iter().map(|&x| model.g.eval(x)).collect();
    let f_values: Vec<f64> = positions.iter().map(|&x| model.f.eval(x)).collect();
    Ok((ParticleSystem::new(positions, weights)?, f_values))
}

/// Monte Carlo estimates of the three decomposition terms over `n`
/// independent particle clouds of size `m`.
pub fn variance_decomposition_estimate(
    model: &ResampleModel,
    m: usize,
    n: u64,
    seed: u64,
) -> Result<VarianceDecomposition> {
    if m == 0 || n < 2 {
        return Err(Error::Contract("need M >= 1 and N >= 2 replicates".into()));
    }
    model.law.validate()?;
    let per_replicate = (0..n)
        .into_par_iter()
        .map(|r| -> Result<(f64, f64, f64)> {
            let mut rng = substream(seed, r);
            let (sys, f_values) = build_system(model, m, &mut rng)?;
            let g_total: f64 = sys.weights().iter().sum();
            let fg: f64 = f_values.iter().zip(sys.weights()).map(|(f, g)| f * g).sum();
            let ffg: f64 = f_values
                .iter()
                .zip(sys.weights())
                .map(|(f, g)| f * f * g)
                .sum();
            let a = (m as f64).sqrt() * fg / g_total;
            let b = ffg / g_total;
            let mut c = CompensatedSum::new();
            for stratum in 1..=m {
                let ce = conditional_expectation(&sys, &f_values, stratum)?;
                c.add(ce * ce);
            }
            Ok((a, b, c.value() / m as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let a: Vec<f64> = per_replicate.iter().map(|t| t.0).collect();
    let b: Vec<f64> = per_replicate.iter().map(|t| t.1).collect();
    let c: Vec<f64> = per_replicate.iter().map(|t| t.2).collect();
    Ok(VarianceDecomposition {
        term_i: variance_with_se(&a),
        term_ii: mean_with_se(&b),
        term_iii: mean_with_se(&c),
        m,
        n,
    })
}

/// Direct simulation of `Var(M^{-1/2} Σ_m f(ξ_m))`: fresh particles and
/// fresh resampling uniforms per replicate.
pub fn direct_variance(model: &ResampleModel, m: usize, n: u64, seed: u64) -> Result<TermEstimate> {
    if m == 0 || n < 2 {
        return Err(Error::Contract("need M >= 1 and N >= 2 replicates".into()));
    }
    model.law.validate()?;
    let sums = (0..n)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let mut rng = substream(seed, r);
            let (sys, f_values) = build_system(model, m, &mut rng)?;
            let u: Vec<f64> = (0..m)
                .map(|_| {
                    let v: f64 = rng.random_range(0.0f64..1.0);
                    v.max(f64::MIN_POSITIVE)
                })
                .collect();
            let idx = stratified_resample(&sys, &u)?;
            let mut s = CompensatedSum::new();
            for i in idx {
                s.add(f_values[i]);
            }
            Ok(s.value() / (m as f64).sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(variance_with_se(&sums))
}
