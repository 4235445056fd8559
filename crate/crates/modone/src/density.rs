//! Deterministic quadrature of the transformed density
//!
//! `p_M(ξ) = ∫ |φ(η_{M,q+2}/M + x/√M)|^{-(q+1)} p_{Σ₁}(x_{M,1}, …, x_{M,q+1}, x) dx`
//!
//! where `x_{M,i}` inverts the coordinate map at fixed last coordinate
//!
//! `x_{M,i} = ((√M ξ_i + M φ(η_{q+2}) η_i)/φ(η_{M,q+2}/M + x/√M) − η_{M,i})/√M`,
//!
//! and its comparison against the Gaussian limit `N(0, A₁Σ₁A₁ᵀ)`. The
//! integrand extends continuously by 0 across zeros of φ (the Gaussian
//! factor dominates every power), so the partition only needs to isolate
//! those points, not to excise them.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::frac::CompensatedSum;
use crate::limit::{build_a1, GaussianLaw};
use crate::model::{beta_indices, ModelSpec, PhiSpec};
use crate::quad::{integrate, QuadOptions};

/// Largest reported value of `√M·|η_{M,i}/M − η_i|` a scene accepts.
pub const DEFAULT_DRIFT_BOUND: f64 = 8.0;

/// One finite-`M` instance of the transformed-density setting.
#[derive(Clone, Debug)]
pub struct LemmaScene {
    pub q: usize,
    /// `η_{M,1..q+2}` for this `M`.
    pub eta_m: Vec<f64>,
    /// Limit parameters `η_{1..q+2}`.
    pub eta: Vec<f64>,
    /// Positive-definite `(q+2)×(q+2)` covariance of `W`.
    pub sigma1: DMatrix<f64>,
    pub phi: PhiSpec,
    pub m: u64,
    gauss: GaussianLaw,
    phi_at_eta: f64,
}

impl LemmaScene {
    pub fn new(
        q: usize,
        eta_m: Vec<f64>,
        eta: Vec<f64>,
        sigma1: DMatrix<f64>,
        phi: PhiSpec,
        m: u64,
    ) -> Result<Self> {
        if q == 0 || m == 0 {
            return Err(Error::Contract("scene needs q >= 1 and M >= 1".into()));
        }
        if eta_m.len() != q + 2 || eta.len() != q + 2 {
            return Err(Error::Contract(format!(
                "eta vectors must have length q+2 = {}, got {} and {}",
                q + 2,
                eta_m.len(),
                eta.len()
            )));
        }
        if sigma1.shape() != (q + 2, q + 2) {
            return Err(Error::Contract(format!("Sigma1 must be {0}x{0}", q + 2)));
        }
        let phi_at_eta = phi.eval(eta[q + 1])?;
        if phi_at_eta == 0.0 || !phi_at_eta.is_finite() {
            return Err(Error::Degenerate(format!(
                "phi(eta_{{q+2}}) = {phi_at_eta} invalidates the scene"
            )));
        }
        let gauss = GaussianLaw::centered(sigma1.clone())?;
        if gauss.eigen_min() <= 0.0 {
            return Err(Error::Degenerate("Sigma1 must be positive definite".into()));
        }
        let scene = LemmaScene {
            q,
            eta_m,
            eta,
            sigma1,
            phi,
            m,
            gauss,
            phi_at_eta,
        };
        let worst = scene
            .drift()
            .into_iter()
            .fold(0.0f64, |a, b| a.max(b.abs()));
        if worst > DEFAULT_DRIFT_BOUND {
            return Err(Error::Contract(format!(
                "eta_M drifts {worst} from M*eta, above the bound {DEFAULT_DRIFT_BOUND}"
            )));
        }
        Ok(scene)
    }

    /// Canonical scene with `η_M = M·η` exactly.
    pub fn for_m(
        q: usize,
        eta: Vec<f64>,
        sigma1: DMatrix<f64>,
        phi: PhiSpec,
        m: u64,
    ) -> Result<Self> {
        let eta_m = eta.iter().map(|e| e * m as f64).collect();
        Self::new(q, eta_m, eta, sigma1, phi, m)
    }

    /// Scene induced by a sampling model at level `M`: `η_{M,i}` carries the
    /// integer index slack and the `x` offset enters `η_{M,q+2}`.
    pub fn from_model(spec: &ModelSpec, m: u64) -> Result<Self> {
        spec.validate()?;
        let schedule = beta_indices(spec, m)?;
        let q = spec.q;
        let m_y = spec.law.mean_y();
        let m_z = spec.law.mean_z();
        let gbar = crate::limit::gamma_bar(spec);
        let beta_last = spec.betas[q];

        let mut eta: Vec<f64> = gbar.iter().take(q).map(|g| m_y * g).collect();
        eta.push(m_z * beta_last);
        eta.push(m_y * beta_last);

        let mut eta_m = Vec::with_capacity(q + 2);
        let mut prev = 0u64;
        for &b in schedule.beta_m.iter().take(q) {
            eta_m.push(m_y * (b - prev) as f64);
            prev = b;
        }
        let last = *schedule.beta_m.last().expect("q+1 indices") as f64;
        eta_m.push(m_z * last);
        eta_m.push(m_y * last + spec.x);

        let sigma1 = crate::limit::sigma1_matrix(spec.law.sigma(), &gbar);
        Self::new(q, eta_m, eta, sigma1, spec.phi.clone(), m)
    }

    /// `√M·|η_{M,i}/M − η_i|` per coordinate.
    pub fn drift(&self) -> Vec<f64> {
        let m = self.m as f64;
        self.eta_m
            .iter()
            .zip(&self.eta)
            .map(|(em, e)| m.sqrt() * (em / m - e).abs())
            .collect()
    }
}

fn integrand(scene: &LemmaScene, xi: &[f64], x: f64) -> f64 {
    let q = scene.q;
    let m = scene.m as f64;
    let sqrt_m = m.sqrt();
    let t = scene.eta_m[q + 1] / m + x / sqrt_m;
    let phi_m = match scene.phi.eval(t) {
        Ok(v) if v.is_finite() && v != 0.0 => v,
        _ => return 0.0,
    };
    let mut point = Vec::with_capacity(q + 2);
    for ((&c, &eta), &eta_m) in xi.iter().zip(&scene.eta).zip(&scene.eta_m).take(q + 1) {
        let numer = sqrt_m * c + m * scene.phi_at_eta * eta;
        let xm = (numer / phi_m - eta_m) / sqrt_m;
        if !xm.is_finite() {
            return 0.0;
        }
        point.push(xm);
    }
    point.push(x);
    let log_p = match scene.gauss.log_density(&point) {
        Ok(v) => v,
        Err(_) => return 0.0,
    };
    let v = (log_p - (q + 1) as f64 * phi_m.abs().ln()).exp();
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Integration range and φ-aware split points for the `x` variable.
fn partition(scene: &LemmaScene) -> (f64, f64, Vec<f64>) {
    let m = scene.m as f64;
    let sqrt_m = m.sqrt();
    let radius = 16.0 * scene.gauss.eigen_max().sqrt() + 1.0;
    let mut splits = vec![0.0];
    let center = scene.eta_m[scene.q + 1] / m;
    for t in scene.phi.real_zeros().into_iter().chain(scene.phi.poles()) {
        let x = (t - center) * sqrt_m;
        if x.abs() < radius {
            splits.push(x);
        }
    }
    (-radius, radius, splits)
}

/// Adaptive quadrature of the transformed density at `ξ` (length `q+1`),
/// absolute tolerance `1e-8`.
pub fn transformed_density(scene: &LemmaScene, xi: &[f64]) -> Result<f64> {
    if xi.len() != scene.q + 1 {
        return Err(Error::Contract(format!(
            "xi must have length q+1 = {}, got {}",
            scene.q + 1,
            xi.len()
        )));
    }
    let (lo, hi, splits) = partition(scene);
    let opts = QuadOptions {
        abs_tol: 1e-9,
        max_panels: 4096,
    };
    let r = integrate(&mut |x| integrand(scene, xi, x), lo, hi, &splits, &opts)?;
    Ok(r.value.max(0.0))
}

/// Gaussian limit density `N(0, A₁Σ₁A₁ᵀ)` at `ξ`.
pub fn limit_density(scene: &LemmaScene, xi: &[f64]) -> Result<f64> {
    limit_law(scene)?.density(xi)
}

/// The limit Gaussian itself, for callers that evaluate many points.
pub fn limit_law(scene: &LemmaScene) -> Result<GaussianLaw> {
    let etas = &scene.eta[..scene.q + 1];
    let a1 = build_a1(&scene.phi, etas, scene.eta[scene.q + 1])?;
    let mut cov = &a1 * &scene.sigma1 * a1.transpose();
    let covt = cov.transpose();
    cov = 0.5 * (cov + covt);
    GaussianLaw::centered(cov)
}

/// One grid evaluation within a sweep.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub m: u64,
    pub xi: Vec<f64>,
    pub transformed: f64,
    pub limit: f64,
    pub abs_err: f64,
}

/// Per-`M` summary of a sweep.
#[derive(Clone, Debug)]
pub struct SweepLevel {
    pub m: u64,
    pub max_err: f64,
    /// Grid-cell-weighted L¹ discrepancy.
    pub l1_err: f64,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub levels: Vec<SweepLevel>,
}

/// Evaluate `|transformed − limit|` for scenes built by `make_scene` at each
/// `M`, over the tensor grid `axes` (the same 1-D grid on every coordinate).
pub fn pointwise_convergence_sweep(
    make_scene: &dyn Fn(u64) -> Result<LemmaScene>,
    m_values: &[u64],
    axis: &[f64],
) -> Result<SweepResult> {
    if m_values.is_empty() || axis.is_empty() {
        return Err(Error::Contract(
            "sweep needs at least one M and one grid point".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut levels = Vec::new();
    let cell = if axis.len() > 1 {
        (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64
    } else {
        1.0
    };
    for &m in m_values {
        let scene = make_scene(m)?;
        let law = limit_law(&scene)?;
        let dim = scene.q + 1;
        let mut idx = vec![0usize; dim];
        let mut max_err = 0.0f64;
        let mut l1 = CompensatedSum::new();
        'grid: loop {
            let xi: Vec<f64> = idx.iter().map(|&i| axis[i]).collect();
            let transformed = transformed_density(&scene, &xi)?;
            let limit = law.density(&xi)?;
            let abs_err = (transformed - limit).abs();
            max_err = max_err.max(abs_err);
            l1.add(abs_err * cell.powi(dim as i32));
            rows.push(SweepRow {
                m,
                xi,
                transformed,
                limit,
                abs_err,
            });
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < axis.len() {
                    continue 'grid;
                }
                *slot = 0;
            }
            break;
        }
        levels.push(SweepLevel {
            m,
            max_err,
            l1_err: l1.value(),
        });
    }
    Ok(SweepResult { rows, levels })
}
