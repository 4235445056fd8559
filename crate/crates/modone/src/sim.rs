//! Monte Carlo generator for the central random vector
//! `({R^{1,y_1}}, …, {R^{q,y_q}}, K_M)` and its standardized increment
//! form.
//!
//! One sample consumes `β_M^{q+1}` i.i.d. pairs `(Y_i, Z_i)`. The blockwise
//! assembly below makes the telescoping identity
//! `R^j = Σ_{ℓ≤j} R^{ℓ-1:ℓ}` hold exactly in floating point, not just in
//! distribution: `R^j` is a left fold of the per-block products.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frac::{fractional_part, CompensatedSum};
use crate::limit::theta;
use crate::model::{beta_indices, IndexSchedule, LawSampler, ModelSpec};
use crate::rng::substream;

/// Batches fail when more than this fraction of samples hit a φ pole.
pub const DEFAULT_EXCEPTIONAL_TOLERANCE: f64 = 1e-6;

/// One realization of the vector under study.
#[derive(Clone, Debug, PartialEq)]
pub struct FracVectorSample {
    /// `{R^{i,y_i}}` for `i = 1..q`, each in `[0,1)`.
    pub fracs: Vec<f64>,
    /// `K_M = √M (φ(·)·(Z₁+…+Z_{β_M^{q+1}}+z)/M − θ)`.
    pub k_value: f64,
    /// Pre-fractional `R^{i,y_i}`, retained for diagnostics.
    pub raw_r: Vec<f64>,
    /// True when φ was evaluated at a pole (or the sample overflowed).
    pub exceptional: bool,
}

impl FracVectorSample {
    fn exceptional_sample(q: usize) -> Self {
        FracVectorSample {
            fracs: vec![0.0; q],
            k_value: 0.0,
            raw_r: vec![0.0; q],
            exceptional: true,
        }
    }
}

/// A full Monte Carlo batch, deterministic in `(spec, m, n, seed)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchResult {
    pub samples: Vec<FracVectorSample>,
    pub m: u64,
    pub n: u64,
    pub seed: u64,
    pub exceptional_count: u64,
}

impl BatchResult {
    /// Row-major `N×q` fractional coordinates of non-exceptional samples.
    pub fn fracs_flat(&self) -> Vec<f64> {
        let q = self.samples.first().map_or(0, |s| s.fracs.len());
        let mut out = Vec::with_capacity(q * self.samples.len());
        for s in &self.samples {
            if !s.exceptional {
                out.extend_from_slice(&s.fracs);
            }
        }
        out
    }

    /// `K_M` values of non-exceptional samples, in sample order.
    pub fn k_values(&self) -> Vec<f64> {
        self.samples
            .iter()
            .filter(|s| !s.exceptional)
            .map(|s| s.k_value)
            .collect()
    }

    /// Single fractional coordinate (0-based axis), non-exceptional samples.
    pub fn frac_column(&self, axis: usize) -> Vec<f64> {
        self.samples
            .iter()
            .filter(|s| !s.exceptional)
            .map(|s| s.fracs[axis])
            .collect()
    }

    /// CSV stream: `frac_1,…,frac_q,k_value,exceptional`, one row per sample.
    pub fn write_csv(&self, w: &mut dyn std::io::Write) -> std::io::Result<()> {
        let q = self.samples.first().map_or(0, |s| s.fracs.len());
        let mut header = String::new();
        for i in 1..=q {
            header.push_str(&format!("frac_{i},"));
        }
        header.push_str("k_value,exceptional\n");
        w.write_all(header.as_bytes())?;
        for s in &self.samples {
            let mut row = String::new();
            for f in &s.fracs {
                row.push_str(&format!("{f:.16e},"));
            }
            row.push_str(&format!(
                "{:.16e},{}\n",
                s.k_value,
                if s.exceptional { 1 } else { 0 }
            ));
            w.write_all(row.as_bytes())?;
        }
        Ok(())
    }
}

/// Per-block sums of the Y draws and totals of both coordinates.
struct BlockSums {
    /// `Σ Y_i` over block `ℓ` (`β_M^{ℓ-1} < i ≤ β_M^ℓ`), `ℓ = 1..q+1`.
    y_blocks: Vec<f64>,
    y_total: f64,
    z_total: f64,
}

fn accumulate(schedule: &IndexSchedule, pairs: impl Iterator<Item = (f64, f64)>) -> BlockSums {
    let blocks = schedule.beta_m.len();
    let mut y_blocks = Vec::with_capacity(blocks);
    let mut y_total = CompensatedSum::new();
    let mut z_total = CompensatedSum::new();
    let mut block = CompensatedSum::new();
    let mut b = 0usize;
    for (i, (y, z)) in pairs.enumerate() {
        while b < blocks && i as u64 >= schedule.beta_m[b] {
            y_blocks.push(block.value());
            block = CompensatedSum::new();
            b += 1;
        }
        block.add(y);
        y_total.add(y);
        z_total.add(z);
    }
    while y_blocks.len() < blocks {
        y_blocks.push(block.value());
        block = CompensatedSum::new();
    }
    BlockSums {
        y_blocks,
        y_total: y_total.value(),
        z_total: z_total.value(),
    }
}

fn check_draw_count(schedule: &IndexSchedule, got: u64) -> Result<()> {
    if got != schedule.draws() {
        return Err(Error::Contract(format!(
            "expected {} draws, got {got}",
            schedule.draws()
        )));
    }
    Ok(())
}

/// Deterministic map from draws to the sampled vector. A φ pole (or an
/// overflow) marks the sample exceptional instead of failing.
pub fn sample_vector(
    spec: &ModelSpec,
    schedule: &IndexSchedule,
    draws: &[(f64, f64)],
) -> Result<FracVectorSample> {
    check_draw_count(schedule, draws.len() as u64)?;
    let th = theta(spec)?;
    let sums = accumulate(schedule, draws.iter().copied());
    assemble_vector(spec, schedule, th, &sums)
}

fn assemble_vector(
    spec: &ModelSpec,
    schedule: &IndexSchedule,
    th: f64,
    sums: &BlockSums,
) -> Result<FracVectorSample> {
    let q = spec.q;
    let m = schedule.m as f64;
    let arg = (sums.y_total + spec.x) / m;
    let phi_v = match spec.phi.eval(arg) {
        Ok(v) if v.is_finite() => v,
        Ok(_) | Err(Error::Singular { .. }) => return Ok(FracVectorSample::exceptional_sample(q)),
        Err(e) => return Err(e),
    };

    // R^j as a left fold of per-block products keeps telescoping exact
    let mut raw_r = Vec::with_capacity(q);
    let mut acc = 0.0;
    for i in 0..q {
        acc += phi_v * sums.y_blocks[i];
        raw_r.push(acc + phi_v * spec.y[i]);
    }
    let k_value = m.sqrt() * (phi_v * (sums.z_total + spec.z) / m - th);
    if !k_value.is_finite() || raw_r.iter().any(|r| !r.is_finite()) {
        return Ok(FracVectorSample::exceptional_sample(q));
    }
    let fracs = raw_r
        .iter()
        .map(|&r| fractional_part(r))
        .collect::<Result<Vec<f64>>>()?;
    Ok(FracVectorSample {
        fracs,
        k_value,
        raw_r,
        exceptional: false,
    })
}

/// The standardized increment vector
/// `((R^{ℓ-1:ℓ} − m_Y φ(β^{q+1}m_Y) γ̄_ℓ M)/√M for ℓ=1..q, K_M)`,
/// with offsets `y ≡ 0`, `z = 0` (only `x` is retained).
///
/// Errors with [`Error::Singular`] when φ is evaluated at a pole.
pub fn sample_standardized(
    spec: &ModelSpec,
    schedule: &IndexSchedule,
    draws: &[(f64, f64)],
) -> Result<Vec<f64>> {
    check_draw_count(schedule, draws.len() as u64)?;
    let th = theta(spec)?;
    let phi_anchor = spec.phi.eval(spec.anchor())?;
    let sums = accumulate(schedule, draws.iter().copied());
    assemble_standardized(spec, schedule, th, phi_anchor, &sums)
}

fn assemble_standardized(
    spec: &ModelSpec,
    schedule: &IndexSchedule,
    th: f64,
    phi_anchor: f64,
    sums: &BlockSums,
) -> Result<Vec<f64>> {
    let q = spec.q;
    let m = schedule.m as f64;
    let sqrt_m = m.sqrt();
    let arg = (sums.y_total + spec.x) / m;
    let phi_v = spec.phi.eval(arg)?;
    let m_y = spec.law.mean_y();
    let mut out = Vec::with_capacity(q + 1);
    for i in 0..q {
        let increment = phi_v * sums.y_blocks[i];
        let center = m_y * phi_anchor * schedule.gamma_bar[i] * m;
        out.push((increment - center) / sqrt_m);
    }
    out.push(sqrt_m * (phi_v * sums.z_total / m - th));
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { at: arg });
    }
    Ok(out)
}

fn checked_batch_inputs(
    spec: &ModelSpec,
    m: u64,
    n: u64,
) -> Result<(IndexSchedule, LawSampler, f64)> {
    if n == 0 {
        return Err(Error::Contract("a batch needs n >= 1 samples".into()));
    }
    spec.validate()?;
    let schedule = beta_indices(spec, m)?;
    let sampler = spec.law.sampler()?;
    let th = theta(spec)?;
    Ok((schedule, sampler, th))
}

fn fail_if_exceptional(count: u64, n: u64, tolerance: f64) -> Result<()> {
    if count as f64 / n as f64 > tolerance {
        return Err(Error::Domain(format!(
            "batch failed: {count} exceptional samples out of {n} \
             exceeds the tolerance {tolerance:e}"
        )));
    }
    Ok(())
}

/// `n` independent realizations; bit-identical for fixed
/// `(spec, m, n, seed)` regardless of worker count. Per-sample substreams
/// are derived by a 64-bit mixing hash of `(seed, index)`.
pub fn sample_batch(spec: &ModelSpec, m: u64, n: u64, seed: u64) -> Result<BatchResult> {
    sample_batch_with_tolerance(spec, m, n, seed, DEFAULT_EXCEPTIONAL_TOLERANCE)
}

pub fn sample_batch_with_tolerance(
    spec: &ModelSpec,
    m: u64,
    n: u64,
    seed: u64,
    tolerance: f64,
) -> Result<BatchResult> {
    let (schedule, sampler, th) = checked_batch_inputs(spec, m, n)?;
    let draws = schedule.draws();
    let samples = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            let sums = accumulate(&schedule, (0..draws).map(|_| sampler.draw(&mut rng)));
            assemble_vector(spec, &schedule, th, &sums)
        })
        .collect::<Result<Vec<FracVectorSample>>>()?;
    let exceptional_count = samples.iter().filter(|s| s.exceptional).count() as u64;
    fail_if_exceptional(exceptional_count, n, tolerance)?;
    Ok(BatchResult {
        samples,
        m,
        n,
        seed,
        exceptional_count,
    })
}

/// Standardized batch, flattened row-major `N×(q+1)`; exceptional samples
/// are dropped from `flat` but counted.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardizedBatch {
    pub flat: Vec<f64>,
    pub dim: usize,
    pub m: u64,
    pub n: u64,
    pub seed: u64,
    pub exceptional_count: u64,
}

impl StandardizedBatch {
    pub fn rows(&self) -> usize {
        self.flat.len() / self.dim
    }
}

pub fn standardized_batch(
    spec: &ModelSpec,
    m: u64,
    n: u64,
    seed: u64,
) -> Result<StandardizedBatch> {
    let (schedule, sampler, th) = checked_batch_inputs(spec, m, n)?;
    let phi_anchor = spec.phi.eval(spec.anchor())?;
    let draws = schedule.draws();
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            let sums = accumulate(&schedule, (0..draws).map(|_| sampler.draw(&mut rng)));
            match assemble_standardized(spec, &schedule, th, phi_anchor, &sums) {
                Ok(v) => Ok(Some(v)),
                Err(Error::Singular { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<Option<Vec<f64>>>>>()?;
    let dim = spec.q + 1;
    let mut flat = Vec::with_capacity(dim * rows.len());
    let mut exceptional_count = 0u64;
    for r in rows {
        match r {
            Some(v) => flat.extend_from_slice(&v),
            None => exceptional_count += 1,
        }
    }
    fail_if_exceptional(exceptional_count, n, DEFAULT_EXCEPTIONAL_TOLERANCE)?;
    Ok(StandardizedBatch {
        flat,
        dim,
        m,
        n,
        seed,
        exceptional_count,
    })
}
