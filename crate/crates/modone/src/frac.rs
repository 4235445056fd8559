//! Floor, ceiling and fractional-part arithmetic, plus shifted means.
//!
//! Conventions: `{x} = x - ⌊x⌋ ∈ [0,1)` with `⌊x⌋` the unique integer
//! `⌊x⌋ ≤ x < ⌊x⌋ + 1`, and `⌈x⌉` the unique integer `⌈x⌉ - 1 < x ≤ ⌈x⌉`.
//! The shifted mean of `x_1..x_M` with shift `c` is `(x_1 + … + x_M + c)/M`.

use crate::error::{Error, Result};

/// Magnitudes above this lose integer exactness in an f64.
const INT_EXACT_LIMIT: f64 = 9_007_199_254_740_992.0; // 2^53

fn require_finite(x: f64, what: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must be finite, got {x}")))
    }
}

/// Fractional part `{x} = x - ⌊x⌋`, always in `[0,1)`.
///
/// For `x` a hair below an integer the subtraction can round to exactly
/// `1.0`; the result is clamped to the largest double below one so the
/// codomain contract holds without introducing an atom at the boundary.
pub fn fractional_part(x: f64) -> Result<f64> {
    require_finite(x, "fractional_part input")?;
    let f = x - x.floor();
    if f >= 1.0 {
        return Ok(1.0f64.next_down());
    }
    // -0.0 normalizes to 0.0 so downstream bit-exact comparisons behave.
    Ok(f + 0.0)
}

/// Ceiling as an exact integer: the unique `n` with `n - 1 < x ≤ n`.
pub fn ceil_int(x: f64) -> Result<i64> {
    require_finite(x, "ceil_int input")?;
    if x.abs() > INT_EXACT_LIMIT {
        return Err(Error::Domain(format!(
            "|{x}| exceeds 2^53; ceiling would not be exact"
        )));
    }
    Ok(x.ceil() as i64)
}

/// Floor as an exact integer: the unique `n` with `n ≤ x < n + 1`.
pub fn floor_int(x: f64) -> Result<i64> {
    require_finite(x, "floor_int input")?;
    if x.abs() > INT_EXACT_LIMIT {
        return Err(Error::Domain(format!(
            "|{x}| exceeds 2^53; floor would not be exact"
        )));
    }
    Ok(x.floor() as i64)
}

/// Shifted mean `(x_1 + … + x_M + c)/M`.
pub fn shifted_mean(xs: &[f64], c: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Domain("shifted_mean of an empty sequence".into()));
    }
    require_finite(c, "shift")?;
    let mut acc = CompensatedSum::new();
    for &x in xs {
        require_finite(x, "shifted_mean term")?;
        acc.add(x);
    }
    acc.add(c);
    Ok(acc.value() / xs.len() as f64)
}

/// Neumaier-compensated accumulator. Deterministic for a fixed visit order
/// and accurate enough that batch statistics do not depend on chunking.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Compensated sum of a slice.
pub fn compensated_sum(xs: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}
