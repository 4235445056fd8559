//! Closed-form limit objects: `θ`, the delta-method variance `σ_T²`, the
//! matrix `A₁`, the joint limit covariance `Γ = A₁·Σ₁·A₁ᵀ`, and multivariate
//! Gaussian densities.
//!
//! `Σ₁` is the covariance of
//! `W = (√γ̄₁G₁¹, …, √γ̄_q G_q¹, Σ_j √γ̄_j G_j², Σ_j √γ̄_j G_j¹)` with
//! `G_j` i.i.d. centered bivariate normals of covariance `Σ = Cov(Y₁, Z₁)`;
//! independence across `j` reduces every entry to `γ̄`-weighted entries
//! of `Σ`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, PhiSpec};

/// Limit law of the studied vector: fractional components go to
/// `Uniform[0,1]^q` while `K_M ⇒ T ~ N(0, σ_T²)`; the standardized increment
/// vector converges to `N(0, Γ)`.
#[derive(Clone, Debug)]
pub struct LimitLaw {
    pub theta: f64,
    pub sigma_t_sq: f64,
    /// `(q+1)×(q+1)` covariance of the joint Gaussian limit.
    pub gamma: DMatrix<f64>,
    pub q: usize,
}

impl LimitLaw {
    /// The centered Gaussian with covariance `Γ`.
    pub fn standardized_gaussian(&self) -> Result<GaussianLaw> {
        GaussianLaw::centered(self.gamma.clone())
    }
}

/// `θ = φ(β^{q+1}·m_Y) · β^{q+1} · m_Z`.
pub fn theta(spec: &ModelSpec) -> Result<f64> {
    let beta_last = spec.betas[spec.q];
    Ok(spec.phi.eval(spec.anchor())? * beta_last * spec.law.mean_z())
}

/// Delta-method variance
/// `σ_T² = β^{q+1} · vᵀΣv`, `v = (φ′(β^{q+1}m_Y)·β^{q+1}·m_Z, φ(β^{q+1}m_Y))`.
pub fn sigma_t_sq(spec: &ModelSpec) -> Result<f64> {
    let beta_last = spec.betas[spec.q];
    let anchor = spec.anchor();
    let v = [
        spec.phi.derivative(anchor)? * beta_last * spec.law.mean_z(),
        spec.phi.eval(anchor)?,
    ];
    let s = spec.law.sigma();
    let form = v[0] * (s[0][0] * v[0] + s[0][1] * v[1]) + v[1] * (s[1][0] * v[0] + s[1][1] * v[1]);
    Ok((beta_last * form).max(0.0))
}

/// The `(q+1)×(q+2)` matrix with `φ(η_anchor)` on the diagonal and
/// `η_i·φ′(η_anchor)` in the last column.
pub fn build_a1(phi: &PhiSpec, etas: &[f64], eta_anchor: f64) -> Result<DMatrix<f64>> {
    let phi_val = phi.eval(eta_anchor)?;
    if phi_val == 0.0 {
        return Err(Error::Degenerate(format!(
            "phi({eta_anchor}) = 0; A1 would lose rank"
        )));
    }
    let phi_der = phi.derivative(eta_anchor)?;
    let rows = etas.len();
    let mut a = DMatrix::zeros(rows, rows + 1);
    for (i, &eta) in etas.iter().enumerate() {
        a[(i, i)] = phi_val;
        a[(i, rows)] = eta * phi_der;
    }
    Ok(a)
}

/// Increment proportions `γ̄ = (β^1, β^2−β^1, …, β^{q+1}−β^q)`, length `q+1`.
pub fn gamma_bar(spec: &ModelSpec) -> Vec<f64> {
    let mut g = Vec::with_capacity(spec.q + 1);
    g.push(spec.betas[0]);
    for i in 1..=spec.q {
        g.push(spec.betas[i] - spec.betas[i - 1]);
    }
    g
}

/// Covariance `Σ₁` of `W`, assembled from `Σ` and `γ̄`.
pub fn sigma1_matrix(sigma: [[f64; 2]; 2], gamma_bar: &[f64]) -> DMatrix<f64> {
    let q = gamma_bar.len() - 1;
    let beta_last: f64 = gamma_bar.iter().sum();
    let n = q + 2;
    let (syy, syz, szz) = (sigma[0][0], 0.5 * (sigma[0][1] + sigma[1][0]), sigma[1][1]);
    let mut s1 = DMatrix::zeros(n, n);
    for i in 0..q {
        s1[(i, i)] = gamma_bar[i] * syy;
        s1[(i, q)] = gamma_bar[i] * syz;
        s1[(q, i)] = gamma_bar[i] * syz;
        s1[(i, q + 1)] = gamma_bar[i] * syy;
        s1[(q + 1, i)] = gamma_bar[i] * syy;
    }
    s1[(q, q)] = beta_last * szz;
    s1[(q, q + 1)] = beta_last * syz;
    s1[(q + 1, q)] = beta_last * syz;
    s1[(q + 1, q + 1)] = beta_last * syy;
    s1
}

/// Everything the joint limit needs: `θ`, `σ_T²` (delta-method path) and
/// `Γ = A₁Σ₁A₁ᵀ` with the proposition's `η` substitutions.
pub fn limit_covariance_gamma(spec: &ModelSpec) -> Result<LimitLaw> {
    let s = spec.law.sigma();
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    if !(s[0][0] > 0.0 && det > 0.0) {
        return Err(Error::Degenerate(
            "Cov(Y,Z) must be positive definite for the joint Gaussian limit".into(),
        ));
    }
    let q = spec.q;
    let beta_last = spec.betas[q];
    let gbar = gamma_bar(spec);
    let m_y = spec.law.mean_y();
    let m_z = spec.law.mean_z();

    // (η_1,…,η_q, η_{q+1}) = (m_Y·γ̄_1,…,m_Y·γ̄_q, m_Z·β^{q+1}); anchor m_Y·β^{q+1}
    let mut etas: Vec<f64> = gbar.iter().take(q).map(|g| m_y * g).collect();
    etas.push(m_z * beta_last);
    let eta_anchor = m_y * beta_last;

    let a1 = build_a1(&spec.phi, &etas, eta_anchor)?;
    let s1 = sigma1_matrix(s, &gbar);
    let mut gamma = &a1 * s1 * a1.transpose();
    // exact symmetry for downstream Cholesky
    let gt = gamma.transpose();
    gamma = 0.5 * (gamma + gt);

    Ok(LimitLaw {
        theta: theta(spec)?,
        sigma_t_sq: sigma_t_sq(spec)?,
        gamma,
        q,
    })
}

/// A (possibly degenerate) multivariate normal.
#[derive(Clone, Debug)]
pub struct GaussianLaw {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    cholesky: Option<Cholesky<f64, Dyn>>,
    eigen_min: f64,
    eigen_max: f64,
}

impl GaussianLaw {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if !covariance.is_square() || covariance.nrows() != mean.len() {
            return Err(Error::Contract(format!(
                "covariance {}x{} does not match mean of length {}",
                covariance.nrows(),
                covariance.ncols(),
                mean.len()
            )));
        }
        let scale = covariance.amax().max(1e-300);
        for i in 0..covariance.nrows() {
            for j in 0..i {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Contract(
                        "covariance must be symmetric within 1e-12 relative".into(),
                    ));
                }
            }
        }
        let sym = 0.5 * (covariance.clone() + covariance.transpose());
        let eigen = sym.clone().symmetric_eigen();
        let eigen_min = eigen.eigenvalues.min();
        let eigen_max = eigen.eigenvalues.max();
        if eigen_min < -1e-12 * sym.trace().abs().max(1e-300) {
            return Err(Error::Degenerate(format!(
                "covariance has eigenvalue {eigen_min}, below the PSD tolerance"
            )));
        }
        let cholesky = Cholesky::new(sym.clone());
        Ok(GaussianLaw {
            mean,
            covariance: sym,
            cholesky,
            eigen_min,
            eigen_max,
        })
    }

    pub fn centered(covariance: DMatrix<f64>) -> Result<Self> {
        let d = covariance.nrows();
        Self::new(DVector::zeros(d), covariance)
    }

    pub fn standard(dim: usize) -> Self {
        Self::centered(DMatrix::identity(dim, dim)).expect("identity is PD")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }
    /// Smallest covariance eigenvalue (the precision's largest is its inverse).
    pub fn eigen_min(&self) -> f64 {
        self.eigen_min
    }
    pub fn eigen_max(&self) -> f64 {
        self.eigen_max
    }

    /// Log-density at `point`; the covariance must be positive definite.
    /// Underflows gracefully to `-inf` far in the tails.
    pub fn log_density(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dim() {
            return Err(Error::Contract(format!(
                "point of dimension {} against law of dimension {}",
                point.len(),
                self.dim()
            )));
        }
        let chol = self
            .cholesky
            .as_ref()
            .ok_or_else(|| Error::Degenerate("covariance is singular; density undefined".into()))?;
        let dv = DVector::from_row_slice(point) - &self.mean;
        // solve L w = (x - μ); then (x-μ)ᵀ Σ⁻¹ (x-μ) = |w|²
        let w = chol.l_dirty().solve_lower_triangular(&dv).ok_or_else(|| {
            Error::Degenerate("Cholesky solve failed; covariance near-singular".into())
        })?;
        let quad = w.norm_squared();
        let d = self.dim() as f64;
        let log_det: f64 = (0..self.dim()).map(|i| chol.l_dirty()[(i, i)].ln()).sum();
        Ok(-0.5 * quad - 0.5 * d * (2.0 * std::f64::consts::PI).ln() - log_det)
    }

    /// Density at `point`; the covariance must be positive definite.
    pub fn density(&self, point: &[f64]) -> Result<f64> {
        Ok(self.log_density(point)?.exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{JointLaw, ZMap};
    use proptest::prelude::*;

    fn spec_with(q: usize, betas: Vec<f64>, law: JointLaw, phi: PhiSpec) -> ModelSpec {
        ModelSpec {
            q,
            betas,
            x: 0.0,
            z: 0.0,
            y: vec![0.0; q],
            law,
            phi,
        }
    }

    #[test]
    fn theta_examples() {
        let spec = spec_with(
            1,
            vec![0.5, 1.0],
            JointLaw::gaussian([2.0, 4.0], [[1.0, 0.0], [0.0, 1.0]]),
            PhiSpec::reciprocal(),
        );
        assert_eq!(theta(&spec).unwrap(), 2.0);

        let spec = spec_with(
            1,
            vec![0.5, 1.0],
            JointLaw::gaussian([5.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]),
            PhiSpec::constant(9.0),
        );
        assert_eq!(theta(&spec).unwrap(), 0.0);

        let spec = spec_with(
            1,
            vec![1.0, 2.0],
            JointLaw::gaussian([3.0, 6.0], [[1.0, 0.0], [0.0, 1.0]]),
            PhiSpec::reciprocal(),
        );
        assert!((theta(&spec).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn sigma_t_sq_examples() {
        let spec = spec_with(
            1,
            vec![0.5, 1.0],
            JointLaw::gaussian([1.0, 1.0], [[1.0, 0.0], [0.0, 3.0]]),
            PhiSpec::constant(2.0),
        );
        assert_eq!(sigma_t_sq(&spec).unwrap(), 12.0);

        let spec = spec_with(
            1,
            vec![0.5, 1.0],
            JointLaw::gaussian([1.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]),
            PhiSpec::reciprocal(),
        );
        assert_eq!(sigma_t_sq(&spec).unwrap(), 1.0);

        // v = (phi'(2)·1·2, phi(2)) = (-0.5, 0.5); vᵀIv = 0.5
        let spec = spec_with(
            1,
            vec![0.5, 1.0],
            JointLaw::gaussian([2.0, 2.0], [[1.0, 0.0], [0.0, 1.0]]),
            PhiSpec::reciprocal(),
        );
        assert!((sigma_t_sq(&spec).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sigma_t_sq_scales_quadratically_in_z_under_constant_phi() {
        let base = spec_with(
            1,
            vec![0.5, 1.0],
            JointLaw::gaussian([1.0, 2.0], [[1.0, 0.5], [0.5, 3.0]]),
            PhiSpec::constant(2.0),
        );
        let scaled = spec_with(
            1,
            vec![0.5, 1.0],
            // Z ↦ 3Z: mean and covariance entries scale accordingly
            JointLaw::gaussian([1.0, 6.0], [[1.0, 1.5], [1.5, 27.0]]),
            PhiSpec::constant(2.0),
        );
        let a = sigma_t_sq(&base).unwrap();
        let b = sigma_t_sq(&scaled).unwrap();
        assert!((b - 9.0 * a).abs() < 1e-12 * b.abs().max(1.0));
    }

    #[test]
    fn a1_shape_examples() {
        let a = build_a1(&PhiSpec::constant(3.0), &[1.0, 2.0], 5.0).unwrap();
        assert_eq!(a.shape(), (2, 3));
        assert_eq!(a[(0, 0)], 3.0);
        assert_eq!(a[(1, 1)], 3.0);
        assert_eq!(a[(0, 2)], 0.0);
        assert_eq!(a[(1, 2)], 0.0);

        let eta = [0.7, -1.3];
        let a = build_a1(&PhiSpec::reciprocal(), &eta, 2.0).unwrap();
        assert_eq!(a[(0, 0)], 0.5);
        assert_eq!(a[(1, 1)], 0.5);
        assert_eq!(a[(0, 1)], 0.0);
        assert!((a[(0, 2)] - (-eta[0] / 4.0)).abs() < 1e-15);
        assert!((a[(1, 2)] - (-eta[1] / 4.0)).abs() < 1e-15);

        assert!(build_a1(&PhiSpec::constant(0.0), &[1.0], 1.0).is_err());
    }

    /// Row rank by Gaussian elimination with partial pivoting; independent
    /// of any nalgebra decomposition.
    fn rank_by_elimination(m: &DMatrix<f64>) -> usize {
        let mut a = m.clone();
        let (rows, cols) = a.shape();
        let mut rank = 0;
        let mut row = 0;
        for col in 0..cols {
            if row >= rows {
                break;
            }
            let mut pivot = row;
            for r in row + 1..rows {
                if a[(r, col)].abs() > a[(pivot, col)].abs() {
                    pivot = r;
                }
            }
            if a[(pivot, col)].abs() < 1e-10 {
                continue;
            }
            a.swap_rows(row, pivot);
            for r in row + 1..rows {
                let f = a[(r, col)] / a[(row, col)];
                for c in col..cols {
                    a[(r, c)] -= f * a[(row, c)];
                }
            }
            row += 1;
            rank += 1;
        }
        rank
    }

    #[test]
    fn a1_has_full_row_rank_on_random_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..200 {
            let q = rng.random_range(1usize..4);
            let etas: Vec<f64> = (0..=q).map(|_| rng.random_range(-3.0..3.0)).collect();
            let anchor = if rng.random_bool(0.5) {
                rng.random_range(0.5..3.0)
            } else {
                rng.random_range(-3.0..-0.5)
            };
            let phi = match rng.random_range(0..3) {
                0 => PhiSpec::reciprocal(),
                1 => PhiSpec::constant(rng.random_range(0.5..2.0)),
                _ => PhiSpec::affine_reciprocal(rng.random_range(0.5..2.0), 4.0),
            };
            let a = build_a1(&phi, &etas, anchor).unwrap();
            assert_eq!(rank_by_elimination(&a), q + 1);
        }
    }

    #[test]
    fn gamma_block_structure_for_constant_phi() {
        let spec = spec_with(
            1,
            vec![0.5, 1.0],
            JointLaw::gaussian([0.7, -0.3], [[1.0, 0.0], [0.0, 1.0]]),
            PhiSpec::constant(1.0),
        );
        let law = limit_covariance_gamma(&spec).unwrap();
        let expected = [[0.5, 0.0], [0.0, 1.0]];
        for (i, row) in expected.iter().enumerate() {
            for (j, want) in row.iter().enumerate() {
                assert!(
                    (law.gamma[(i, j)] - want).abs() < 1e-14,
                    "Gamma = {}",
                    law.gamma
                );
            }
        }
    }

    #[test]
    fn gamma_rejects_singular_sigma() {
        let spec = spec_with(
            1,
            vec![0.5, 1.0],
            JointLaw::exp_pair(1.0, ZMap::Identity), // Z = Y gives rank-1 Σ
            PhiSpec::reciprocal(),
        );
        assert!(matches!(
            limit_covariance_gamma(&spec),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn gaussian_density_values() {
        let law = GaussianLaw::standard(1);
        assert!((law.density(&[0.0]).unwrap() - 0.3989422804014327).abs() < 1e-15);
        assert!((law.density(&[1.0]).unwrap() - 0.24197072451914337).abs() < 1e-15);
        let law2 = GaussianLaw::standard(2);
        assert!(
            (law2.density(&[0.0, 0.0]).unwrap() - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15
        );
    }

    #[test]
    fn gaussian_density_rejects_singular_covariance() {
        let law =
            GaussianLaw::centered(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])).unwrap();
        assert!(law.density(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn gaussian_law_rejects_asymmetry_and_negative_eigenvalues() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, -0.2, 1.0]);
        assert!(GaussianLaw::centered(asym).is_err());
        let negative = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(GaussianLaw::centered(negative).is_err());
    }

    #[test]
    fn gaussian_density_integrates_to_one() {
        // Gauss-Legendre 5-point weights on [-1,1]
        let gl_x = [
            -0.906179845938664,
            -0.5384693101056831,
            0.0,
            0.5384693101056831,
            0.906179845938664,
        ];
        let gl_w = [
            0.23692688505618908,
            0.47862867049936647,
            0.5688888888888889,
            0.47862867049936647,
            0.23692688505618908,
        ];
        let tensor_mass = |law: &GaussianLaw, panels: usize| -> f64 {
            let d = law.dim();
            let mut axis_nodes: Vec<Vec<(f64, f64)>> = Vec::new();
            for i in 0..d {
                let sd = law.covariance()[(i, i)].sqrt();
                let (lo, hi) = (law.mean()[i] - 8.0 * sd, law.mean()[i] + 8.0 * sd);
                let width = (hi - lo) / panels as f64;
                let mut nodes = Vec::new();
                for p in 0..panels {
                    let c = lo + (p as f64 + 0.5) * width;
                    for k in 0..5 {
                        nodes.push((c + 0.5 * width * gl_x[k], 0.5 * width * gl_w[k]));
                    }
                }
                axis_nodes.push(nodes);
            }
            let mut total = 0.0;
            let mut point = vec![0.0; d];
            let mut idx = vec![0usize; d];
            'outer: loop {
                let mut w = 1.0;
                for i in 0..d {
                    let (x, wi) = axis_nodes[i][idx[i]];
                    point[i] = x;
                    w *= wi;
                }
                total += w * law.density(&point).unwrap();
                for i in 0..d {
                    idx[i] += 1;
                    if idx[i] < axis_nodes[i].len() {
                        continue 'outer;
                    }
                    idx[i] = 0;
                }
                break;
            }
            total
        };

        let law1 = GaussianLaw::centered(DMatrix::from_row_slice(1, 1, &[2.5])).unwrap();
        assert!((tensor_mass(&law1, 24) - 1.0).abs() < 1e-6);

        let law2 =
            GaussianLaw::centered(DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 0.8])).unwrap();
        assert!((tensor_mass(&law2, 20) - 1.0).abs() < 1e-6);

        let law3 = GaussianLaw::new(
            DVector::from_row_slice(&[0.3, -0.2, 1.0]),
            DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 0.7, 0.1, 0.0, 0.1, 0.5]),
        )
        .unwrap();
        assert!((tensor_mass(&law3, 14) - 1.0).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // 50+ random specs: the two sigma_T^2 paths agree and Gamma is PD
        #[test]
        fn gamma_bottom_right_is_sigma_t_sq(
            q in 1usize..4,
            b0 in 0.1f64..0.5,
            myz in (-2.0f64..2.0, 0.5f64..2.0),
            cov_seed in (0.5f64..2.0, -0.6f64..0.6, 0.5f64..2.0),
            phi_pick in 0usize..3,
        ) {
            let mut betas = vec![b0];
            for i in 0..q {
                betas.push(betas[i] + 0.2 + 0.1 * i as f64);
            }
            let (c_a, c_r, c_b) = cov_seed;
            let cov = [[c_a, c_r * (c_a * c_b).sqrt()], [c_r * (c_a * c_b).sqrt(), c_b]];
            let (m_z, m_y) = myz;
            let phi = match phi_pick {
                0 => PhiSpec::reciprocal(),
                1 => PhiSpec::constant(1.5),
                _ => PhiSpec::affine_reciprocal(2.0, 0.5),
            };
            let spec = spec_with(q, betas, JointLaw::gaussian([m_y, m_z], cov), phi);
            // keep the anchor clear of poles
            prop_assume!(spec.phi.eval(spec.anchor()).map(|v| v.abs() > 1e-3).unwrap_or(false));

            let law = limit_covariance_gamma(&spec).unwrap();
            let direct = sigma_t_sq(&spec).unwrap();
            let br = law.gamma[(q, q)];
            prop_assert!((br - direct).abs() <= 1e-10 * direct.abs().max(1.0),
                "bottom-right {br} vs sigma_T^2 {direct}");

            // symmetry within 1e-12 and successful Cholesky
            let g = &law.gamma;
            for i in 0..g.nrows() {
                for j in 0..g.ncols() {
                    prop_assert!((g[(i, j)] - g[(j, i)]).abs() <= 1e-12 * g.amax());
                }
            }
            prop_assert!(Cholesky::new(g.clone()).is_some(), "Gamma not PD: {g}");
        }
    }
}
