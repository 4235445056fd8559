//! Adaptive Gauss–Kronrod quadrature with an embedded error estimate.
//!
//! One panel evaluates the 15-point Kronrod rule together with its embedded
//! 7-point Gauss rule; the discrepancy drives a QUADPACK-style error
//! estimate. Adaptive integration keeps a worst-first queue of panels and
//! bisects until the summed error bound drops below the requested absolute
//! tolerance. Callers pass interior split points to isolate integrand
//! singularities; Kronrod nodes are strictly interior, so a split placed on
//! a pole is never evaluated.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Kronrod abscissae (positive half, descending), 15-point rule.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];

/// Gauss weights for the embedded 7-point rule (odd-index abscissae of `XGK`).
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    /// Absolute tolerance on the summed error estimate.
    pub abs_tol: f64,
    /// Panel budget; exceeding it yields `Error::QuadratureFailed`.
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            max_panels: 4096,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: f64,
    /// Error estimate actually achieved (sum of panel estimates).
    pub error: f64,
    /// Number of panels evaluated, the refinement trace in compact form.
    pub panels: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(Ordering::Equal)
    }
}

/// One Gauss–Kronrod 7/15 panel over `[a, b]`.
///
/// Returns `(value, error_estimate)`; the estimate follows the QUADPACK
/// heuristic built on the Gauss/Kronrod discrepancy and the integrand's
/// deviation from its panel mean.
pub fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)> {
    let half = 0.5 * (b - a);
    let center = 0.5 * (a + b);

    let mut fv = [0.0f64; 15];
    for (j, &x) in XGK.iter().enumerate() {
        let dx = half * x;
        let (lo, hi) = (center - dx, center + dx);
        let (flo, fhi) = (f(lo), f(hi));
        if !flo.is_finite() || !fhi.is_finite() {
            let at = if flo.is_finite() { hi } else { lo };
            return Err(Error::Singular { at });
        }
        fv[j] = flo;
        fv[14 - j] = fhi;
    }
    // fv[7] holds the centre twice via the loop above; fix the duplicate.
    let fc = fv[7];

    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;
    let mut resabs = WGK[7] * fc.abs();
    for j in 0..7 {
        let pair = fv[j] + fv[14 - j];
        resk += WGK[j] * pair;
        resabs += WGK[j] * (fv[j].abs() + fv[14 - j].abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * pair;
        }
    }
    let reskh = resk * 0.5;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv[j] - reskh).abs() + (fv[14 - j] - reskh).abs());
    }

    let value = resk * half;
    let resasc = resasc * half.abs();
    let resabs = resabs * half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    Ok((value, err))
}

/// Adaptive integration of `f` over `[a, b]`.
///
/// `splits` are interior points where the integrand is singular, kinked or
/// merely hard; each becomes a panel boundary. They need not be sorted and
/// points outside `(a, b)` are ignored.
pub fn integrate<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    splits: &[f64],
    opts: &QuadOptions,
) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain("integration bounds must be finite".into()));
    }
    if a > b {
        return Err(Error::Contract(format!("integration over [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            panels: 0,
        });
    }

    let mut cuts: Vec<f64> = splits
        .iter()
        .copied()
        .filter(|x| a < *x && *x < b)
        .collect();
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    cuts.dedup();
    cuts.insert(0, a);
    cuts.push(b);

    let mut heap = BinaryHeap::new();
    let mut panels = 0usize;
    for w in cuts.windows(2) {
        let (v, e) = kronrod15(f, w[0], w[1])?;
        panels += 1;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
    }

    loop {
        let total_err: f64 = heap.iter().map(|p| p.error).sum();
        if total_err <= opts.abs_tol {
            let value: f64 = heap.iter().map(|p| p.value).sum();
            return Ok(QuadResult {
                value,
                error: total_err,
                panels,
            });
        }
        if panels >= opts.max_panels {
            let value: f64 = heap.iter().map(|p| p.value).sum();
            return Err(Error::QuadratureFailed {
                estimate: value,
                error: total_err,
                panels,
            });
        }
        let worst = heap.pop().expect("heap cannot be empty here");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval has collapsed to machine precision but still carries
            // error: the integrand is effectively singular here
            return Err(Error::QuadratureFailed {
                estimate: heap.iter().map(|p| p.value).sum::<f64>() + worst.value,
                error: total_err,
                panels,
            });
        }
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (v, e) = kronrod15(f, lo, hi)?;
            panels += 1;
            heap.push(Panel {
                a: lo,
                b: hi,
                value: v,
                error: e,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed form for ∫_{-1}^{1} x^k dx.
    fn monomial_integral(k: u32) -> f64 {
        if k % 2 == 1 {
            0.0
        } else {
            2.0 / (k as f64 + 1.0)
        }
    }

    #[test]
    fn kronrod_exact_on_polynomials_to_degree_22() {
        // Also validates the hardcoded nodes/weights: a wrong digit breaks
        // exactness immediately.
        for k in 0..=22u32 {
            let (v, _) = kronrod15(&mut |x: f64| x.powi(k as i32), -1.0, 1.0).unwrap();
            assert!(
                (v - monomial_integral(k)).abs() < 1e-13,
                "degree {k}: {v} vs {}",
                monomial_integral(k)
            );
        }
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let (v, e) = kronrod15(&mut |_| 1.0, 3.0, 7.5).unwrap();
        assert!((v - 4.5).abs() < 1e-13);
        assert!(e < 1e-12);
    }

    #[test]
    fn gaussian_integral() {
        let opts = QuadOptions::default();
        let r = integrate(&mut |y: f64| (-y * y).exp(), -10.0, 10.0, &[], &opts).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn integrable_endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2; the singular point sits on a panel boundary.
        let opts = QuadOptions {
            abs_tol: 1e-9,
            max_panels: 10_000,
        };
        let r = integrate(&mut |x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &[], &opts).unwrap();
        assert!((r.value - 2.0).abs() < 1e-7, "got {}", r.value);
    }

    #[test]
    fn interior_singularity_with_split() {
        // ∫_{-1}^{1} |x|^{-1/2} dx = 4 with a split at the singular point.
        let opts = QuadOptions {
            abs_tol: 1e-9,
            max_panels: 20_000,
        };
        let r = integrate(&mut |x: f64| 1.0 / x.abs().sqrt(), -1.0, 1.0, &[0.0], &opts).unwrap();
        assert!((r.value - 4.0).abs() < 1e-6, "got {}", r.value);
    }

    #[test]
    fn divergent_integrand_fails_cleanly() {
        let opts = QuadOptions {
            abs_tol: 1e-10,
            max_panels: 2000,
        };
        let r = integrate(&mut |x: f64| 1.0 / x.abs(), -1.0, 1.0, &[0.0], &opts);
        assert!(matches!(
            r,
            Err(Error::QuadratureFailed { .. }) | Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn split_points_outside_range_are_ignored() {
        let opts = QuadOptions::default();
        let r = integrate(&mut |x: f64| x, 0.0, 1.0, &[-5.0, 0.25, 9.0], &opts).unwrap();
        assert!((r.value - 0.5).abs() < 1e-14);
    }

    #[test]
    fn empty_interval_is_zero() {
        let opts = QuadOptions::default();
        let r = integrate(&mut |x: f64| x, 2.0, 2.0, &[], &opts).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.panels, 0);
    }
}
