//! The random experiment being simulated: the law of `(Y, Z)`, the function
//! `φ`, the limit proportions `β^1 < … < β^{q+1}`, the offsets, and the
//! finite-`M` index schedules derived from them.
//!
//! Everything here is declarative and immutable after validation. `φ` lives
//! in a closed-form catalog so that its derivative and the integrability
//! condition are checkable; joint laws carry their exact first and second
//! moments so the limit quantities downstream are free of Monte Carlo error.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frac::ceil_int;
use crate::quad::{self, QuadOptions, QuadResult};

/// Closed-form catalog for `φ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PhiFamily {
    /// `φ(t) = 1/t`
    Reciprocal,
    /// `φ(t) = c`
    Constant { value: f64 },
    /// `φ(t) = a/(b + t)`
    AffineReciprocal { a: f64, b: f64 },
    /// `φ(t) = Σ coefficients[k]·t^k` (ascending powers)
    Polynomial { coefficients: Vec<f64> },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DerivativeMode {
    #[default]
    Analytic,
    /// Central difference `(φ(t+h) − φ(t−h))/(2h)`. `step = None` uses
    /// `h = ∛ε · max(1, |t|)`.
    CentralDifference { step: Option<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiSpec {
    #[serde(flatten)]
    pub family: PhiFamily,
    #[serde(default)]
    pub derivative_mode: DerivativeMode,
}

impl PhiSpec {
    pub fn reciprocal() -> Self {
        PhiFamily::Reciprocal.into()
    }
    pub fn constant(value: f64) -> Self {
        PhiFamily::Constant { value }.into()
    }
    pub fn affine_reciprocal(a: f64, b: f64) -> Self {
        PhiFamily::AffineReciprocal { a, b }.into()
    }
    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        PhiFamily::Polynomial { coefficients }.into()
    }

    pub fn with_central_difference(mut self, step: Option<f64>) -> Self {
        self.derivative_mode = DerivativeMode::CentralDifference { step };
        self
    }

    /// `φ(t)`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::Domain(format!(
                "phi argument must be finite, got {t}"
            )));
        }
        match &self.family {
            PhiFamily::Reciprocal => {
                if t == 0.0 {
                    Err(Error::Singular { at: t })
                } else {
                    Ok(1.0 / t)
                }
            }
            PhiFamily::Constant { value } => Ok(*value),
            PhiFamily::AffineReciprocal { a, b } => {
                let d = b + t;
                if d == 0.0 {
                    Err(Error::Singular { at: t })
                } else {
                    Ok(a / d)
                }
            }
            PhiFamily::Polynomial { coefficients } => Ok(horner(coefficients, t)),
        }
    }

    /// `φ′(t)`, analytic or by central difference per `derivative_mode`.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        match self.derivative_mode {
            DerivativeMode::Analytic => self.derivative_analytic(t),
            DerivativeMode::CentralDifference { step } => {
                let h = step.unwrap_or_else(|| f64::EPSILON.cbrt() * t.abs().max(1.0));
                Ok((self.eval(t + h)? - self.eval(t - h)?) / (2.0 * h))
            }
        }
    }

    fn derivative_analytic(&self, t: f64) -> Result<f64> {
        match &self.family {
            PhiFamily::Reciprocal => {
                if t == 0.0 {
                    Err(Error::Singular { at: t })
                } else {
                    Ok(-1.0 / (t * t))
                }
            }
            PhiFamily::Constant { .. } => Ok(0.0),
            PhiFamily::AffineReciprocal { a, b } => {
                let d = b + t;
                if d == 0.0 {
                    Err(Error::Singular { at: t })
                } else {
                    Ok(-a / (d * d))
                }
            }
            PhiFamily::Polynomial { coefficients } => {
                let mut acc = 0.0;
                for (k, &c) in coefficients.iter().enumerate().skip(1).rev() {
                    acc = acc * t + k as f64 * c;
                }
                Ok(acc)
            }
        }
    }

    /// Points where `φ` itself is undefined.
    pub fn poles(&self) -> Vec<f64> {
        match &self.family {
            PhiFamily::Reciprocal => vec![0.0],
            PhiFamily::AffineReciprocal { b, .. } => vec![-b],
            _ => vec![],
        }
    }

    /// All real zeros of `φ`. Exhaustive for the catalog: only the
    /// polynomial family can vanish, and its roots come from the companion
    /// matrix, so multiple roots are found too.
    pub fn real_zeros(&self) -> Vec<f64> {
        match &self.family {
            PhiFamily::Reciprocal | PhiFamily::AffineReciprocal { .. } => vec![],
            PhiFamily::Constant { .. } => vec![],
            PhiFamily::Polynomial { coefficients } => polynomial_real_roots(coefficients),
        }
    }

    fn is_identically_zero(&self) -> bool {
        match &self.family {
            PhiFamily::Constant { value } => *value == 0.0,
            PhiFamily::Polynomial { coefficients } => coefficients.iter().all(|&c| c == 0.0),
            _ => false,
        }
    }
}

impl From<PhiFamily> for PhiSpec {
    fn from(family: PhiFamily) -> Self {
        PhiSpec {
            family,
            derivative_mode: DerivativeMode::Analytic,
        }
    }
}

#[inline]
fn horner(coefficients: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coefficients.iter().rev() {
        acc = acc * t + c;
    }
    acc
}

/// Real roots of a polynomial with ascending coefficients, via the
/// companion matrix plus a few Newton polish steps.
fn polynomial_real_roots(coefficients: &[f64]) -> Vec<f64> {
    let scale = coefficients.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return vec![];
    }
    let mut coeffs: Vec<f64> = coefficients.to_vec();
    while coeffs.len() > 1 && coeffs.last().unwrap().abs() <= 1e-14 * scale {
        coeffs.pop();
    }
    let n = coeffs.len() - 1;
    if n == 0 {
        return vec![];
    }
    let lead = coeffs[n];
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        companion[(i, n - 1)] = -coeffs[i] / lead;
    }
    let eigen = companion.complex_eigenvalues();
    let mut roots: Vec<f64> = Vec::new();
    for ev in eigen.iter() {
        let magnitude = ev.norm().max(1.0);
        if ev.im.abs() <= 1e-8 * magnitude {
            let mut r = ev.re;
            for _ in 0..3 {
                let p = horner(&coeffs, r);
                let mut d = 0.0;
                for (k, &c) in coeffs.iter().enumerate().skip(1).rev() {
                    d = d * r + k as f64 * c;
                }
                if d != 0.0 && p.is_finite() {
                    r -= p / d;
                }
            }
            roots.push(r);
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * a.abs().max(1.0));
    roots
}

/// `Z = h(Y)` maps for the exponential pair law.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZMap {
    Zero,
    Identity,
    Square,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub y: f64,
    pub z: f64,
    pub weight: f64,
}

/// Shape of the law of `(Y_1, Z_1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LawKind {
    Gaussian2d {
        mean: [f64; 2],
        cov: [[f64; 2]; 2],
    },
    ExpPair {
        rate: f64,
        z_map: ZMap,
    },
    Mixture {
        /// Weight of the absolutely continuous part.
        weight_continuous: f64,
        continuous: Box<LawKind>,
        atoms: Vec<Atom>,
    },
}

/// A shape plus its exact moments: `m_Y`, `m_Z` and `Σ = Cov(Y_1, Z_1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "LawKind", into = "LawKind")]
pub struct JointLaw {
    kind: LawKind,
    m_y: f64,
    m_z: f64,
    sigma: [[f64; 2]; 2],
}

/// First and raw second moments of a 2-d law.
#[derive(Clone, Copy, Debug)]
struct Moments {
    ey: f64,
    ez: f64,
    eyy: f64,
    ezz: f64,
    eyz: f64,
}

fn kind_moments(kind: &LawKind) -> Moments {
    match kind {
        LawKind::Gaussian2d { mean, cov } => Moments {
            ey: mean[0],
            ez: mean[1],
            eyy: cov[0][0] + mean[0] * mean[0],
            ezz: cov[1][1] + mean[1] * mean[1],
            eyz: 0.5 * (cov[0][1] + cov[1][0]) + mean[0] * mean[1],
        },
        LawKind::ExpPair { rate, z_map } => {
            // E Y^k = k! / rate^k for Y ~ Exp(rate)
            let l = *rate;
            let (m1, m2, m3, m4) = (
                1.0 / l,
                2.0 / (l * l),
                6.0 / (l * l * l),
                24.0 / (l * l * l * l),
            );
            match z_map {
                ZMap::Zero => Moments {
                    ey: m1,
                    ez: 0.0,
                    eyy: m2,
                    ezz: 0.0,
                    eyz: 0.0,
                },
                ZMap::Identity => Moments {
                    ey: m1,
                    ez: m1,
                    eyy: m2,
                    ezz: m2,
                    eyz: m2,
                },
                ZMap::Square => Moments {
                    ey: m1,
                    ez: m2,
                    eyy: m2,
                    ezz: m4,
                    eyz: m3,
                },
            }
        }
        LawKind::Mixture {
            weight_continuous,
            continuous,
            atoms,
        } => {
            let p = *weight_continuous;
            let c = kind_moments(continuous);
            let total: f64 = atoms.iter().map(|a| a.weight).sum();
            let mut a = Moments {
                ey: 0.0,
                ez: 0.0,
                eyy: 0.0,
                ezz: 0.0,
                eyz: 0.0,
            };
            if total > 0.0 {
                for atom in atoms {
                    let w = atom.weight / total;
                    a.ey += w * atom.y;
                    a.ez += w * atom.z;
                    a.eyy += w * atom.y * atom.y;
                    a.ezz += w * atom.z * atom.z;
                    a.eyz += w * atom.y * atom.z;
                }
            }
            Moments {
                ey: p * c.ey + (1.0 - p) * a.ey,
                ez: p * c.ez + (1.0 - p) * a.ez,
                eyy: p * c.eyy + (1.0 - p) * a.eyy,
                ezz: p * c.ezz + (1.0 - p) * a.ezz,
                eyz: p * c.eyz + (1.0 - p) * a.eyz,
            }
        }
    }
}

impl From<LawKind> for JointLaw {
    fn from(kind: LawKind) -> Self {
        let m = kind_moments(&kind);
        let var_y = m.eyy - m.ey * m.ey;
        let var_z = m.ezz - m.ez * m.ez;
        let cov = m.eyz - m.ey * m.ez;
        JointLaw {
            kind,
            m_y: m.ey,
            m_z: m.ez,
            sigma: [[var_y, cov], [cov, var_z]],
        }
    }
}

impl From<JointLaw> for LawKind {
    fn from(law: JointLaw) -> Self {
        law.kind
    }
}

impl JointLaw {
    pub fn gaussian(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Self {
        LawKind::Gaussian2d { mean, cov }.into()
    }

    pub fn exp_pair(rate: f64, z_map: ZMap) -> Self {
        LawKind::ExpPair { rate, z_map }.into()
    }

    pub fn mixture(weight_continuous: f64, continuous: LawKind, atoms: Vec<Atom>) -> Self {
        LawKind::Mixture {
            weight_continuous,
            continuous: Box::new(continuous),
            atoms,
        }
        .into()
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }
    pub fn mean_y(&self) -> f64 {
        self.m_y
    }
    pub fn mean_z(&self) -> f64 {
        self.m_z
    }
    /// `Cov(Y_1, Z_1)` as a 2×2 matrix.
    pub fn sigma(&self) -> [[f64; 2]; 2] {
        self.sigma
    }

    /// Structural checks; hypothesis-level issues come back as warnings so
    /// negative-control experiments stay runnable.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        self.validate_kind(&self.kind, &mut warnings)?;
        let s = &self.sigma;
        if !(s[0][0].is_finite() && s[1][1].is_finite() && s[0][1].is_finite()) {
            return Err(Error::InvalidConfig("law moments are not finite".into()));
        }
        let scale = s[0][0].abs().max(s[1][1].abs()).max(1e-300);
        if s[0][0] < -1e-12 * scale
            || s[1][1] < -1e-12 * scale
            || s[0][0] * s[1][1] - s[0][1] * s[0][1] < -1e-10 * scale * scale
        {
            return Err(Error::InvalidConfig(
                "covariance of (Y,Z) must be positive semidefinite".into(),
            ));
        }
        if s[0][0] <= 0.0 {
            warnings.push("Y is (almost surely) constant: Var(Y) = 0".into());
        }
        if !self.has_continuous_y_component() {
            warnings.push("the law of Y has no absolutely continuous component".into());
        }
        Ok(warnings)
    }

    fn validate_kind(&self, kind: &LawKind, warnings: &mut Vec<String>) -> Result<()> {
        match kind {
            LawKind::Gaussian2d { mean, cov } => {
                for v in mean.iter().chain(cov.iter().flatten()) {
                    if !v.is_finite() {
                        return Err(Error::InvalidConfig(
                            "gaussian parameters must be finite".into(),
                        ));
                    }
                }
                let asym = (cov[0][1] - cov[1][0]).abs();
                if asym > 1e-12 * cov[0][1].abs().max(cov[1][0].abs()).max(1.0) {
                    return Err(Error::InvalidConfig(
                        "gaussian covariance must be symmetric".into(),
                    ));
                }
                Ok(())
            }
            LawKind::ExpPair { rate, .. } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "exponential rate must be > 0, got {rate}"
                    )));
                }
                Ok(())
            }
            LawKind::Mixture {
                weight_continuous,
                continuous,
                atoms,
            } => {
                if !(0.0..=1.0).contains(weight_continuous) {
                    return Err(Error::InvalidConfig(format!(
                        "mixture weight must lie in [0,1], got {weight_continuous}"
                    )));
                }
                if matches!(**continuous, LawKind::Mixture { .. }) {
                    return Err(Error::InvalidConfig(
                        "nested mixtures are not supported".into(),
                    ));
                }
                if *weight_continuous < 1.0 {
                    if atoms.is_empty() {
                        return Err(Error::InvalidConfig(
                            "mixture with atomic mass needs at least one atom".into(),
                        ));
                    }
                    if atoms.iter().any(|a| !(a.weight > 0.0)) {
                        return Err(Error::InvalidConfig("atom weights must be positive".into()));
                    }
                }
                if *weight_continuous == 0.0 {
                    warnings.push("mixture has no continuous component (p = 0)".into());
                }
                self.validate_kind(continuous, &mut Vec::new())
            }
        }
    }

    fn has_continuous_y_component(&self) -> bool {
        fn inner(kind: &LawKind) -> bool {
            match kind {
                LawKind::Gaussian2d { cov, .. } => cov[0][0] > 0.0,
                LawKind::ExpPair { .. } => true,
                LawKind::Mixture {
                    weight_continuous,
                    continuous,
                    ..
                } => *weight_continuous > 0.0 && inner(continuous),
            }
        }
        inner(&self.kind)
    }

    /// Pre-built sampler for the hot path.
    pub fn sampler(&self) -> Result<LawSampler> {
        LawSampler::build(&self.kind)
    }
}

enum SamplerKind {
    Gauss {
        mean: [f64; 2],
        l11: f64,
        l21: f64,
        l22: f64,
    },
    ExpPair {
        dist: Exp<f64>,
        z_map: ZMap,
    },
    Mixture {
        p: f64,
        continuous: Box<SamplerKind>,
        atoms: Vec<(f64, f64)>,
        cum_weights: Vec<f64>,
    },
}

pub struct LawSampler {
    inner: SamplerKind,
}

impl LawSampler {
    fn build(kind: &LawKind) -> Result<Self> {
        Ok(LawSampler {
            inner: Self::build_kind(kind)?,
        })
    }

    fn build_kind(kind: &LawKind) -> Result<SamplerKind> {
        match kind {
            LawKind::Gaussian2d { mean, cov } => {
                // 2x2 Cholesky with semidefinite guards (degenerate laws are
                // legitimate negative controls)
                let c01 = 0.5 * (cov[0][1] + cov[1][0]);
                let l11 = cov[0][0].max(0.0).sqrt();
                let (l21, l22) = if l11 > 0.0 {
                    let l21 = c01 / l11;
                    (l21, (cov[1][1] - l21 * l21).max(0.0).sqrt())
                } else {
                    (0.0, cov[1][1].max(0.0).sqrt())
                };
                Ok(SamplerKind::Gauss {
                    mean: *mean,
                    l11,
                    l21,
                    l22,
                })
            }
            LawKind::ExpPair { rate, z_map } => Ok(SamplerKind::ExpPair {
                dist: Exp::new(*rate)
                    .map_err(|e| Error::InvalidConfig(format!("exponential rate: {e}")))?,
                z_map: *z_map,
            }),
            LawKind::Mixture {
                weight_continuous,
                continuous,
                atoms,
            } => {
                let total: f64 = atoms.iter().map(|a| a.weight).sum();
                let mut cum = Vec::with_capacity(atoms.len());
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.weight / total.max(f64::MIN_POSITIVE);
                    cum.push(acc);
                }
                if let Some(last) = cum.last_mut() {
                    *last = 1.0;
                }
                Ok(SamplerKind::Mixture {
                    p: *weight_continuous,
                    continuous: Box::new(Self::build_kind(continuous)?),
                    atoms: atoms.iter().map(|a| (a.y, a.z)).collect(),
                    cum_weights: cum,
                })
            }
        }
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        Self::draw_kind(&self.inner, rng)
    }

    fn draw_kind<R: Rng + ?Sized>(kind: &SamplerKind, rng: &mut R) -> (f64, f64) {
        match kind {
            SamplerKind::Gauss {
                mean,
                l11,
                l21,
                l22,
            } => {
                let n1: f64 = StandardNormal.sample(rng);
                let n2: f64 = StandardNormal.sample(rng);
                (mean[0] + l11 * n1, mean[1] + l21 * n1 + l22 * n2)
            }
            SamplerKind::ExpPair { dist, z_map } => {
                let y = dist.sample(rng);
                let z = match z_map {
                    ZMap::Zero => 0.0,
                    ZMap::Identity => y,
                    ZMap::Square => y * y,
                };
                (y, z)
            }
            SamplerKind::Mixture {
                p,
                continuous,
                atoms,
                cum_weights,
            } => {
                let u: f64 = rng.random();
                if u < *p {
                    Self::draw_kind(continuous, rng)
                } else if atoms.is_empty() {
                    (0.0, 0.0)
                } else {
                    let v: f64 = rng.random();
                    let idx = cum_weights.partition_point(|&c| c < v).min(atoms.len() - 1);
                    atoms[idx]
                }
            }
        }
    }
}

/// The full experiment specification of the main construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub q: usize,
    /// `β^1 < … < β^{q+1}`, strictly increasing positive reals.
    pub betas: Vec<f64>,
    /// Offset inside the φ argument sum.
    #[serde(default)]
    pub x: f64,
    /// Offset on the Z sum.
    #[serde(default)]
    pub z: f64,
    /// Offsets `y_1..y_q` on the Y sums.
    #[serde(default)]
    pub y: Vec<f64>,
    pub law: JointLaw,
    pub phi: PhiSpec,
}

impl ModelSpec {
    /// The anchor point `β^{q+1}·m_Y` where `φ` and `φ′` must exist.
    pub fn anchor(&self) -> f64 {
        self.betas[self.q] * self.law.mean_y()
    }

    pub fn phi_at_anchor(&self) -> Result<f64> {
        self.phi.eval(self.anchor())
    }

    /// Full validation. Structural violations are errors; violated theorem
    /// hypotheses (constant Y, purely atomic Y) come back as warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.q == 0 {
            return Err(Error::InvalidConfig("q must be at least 1".into()));
        }
        if self.betas.len() != self.q + 1 {
            return Err(Error::InvalidConfig(format!(
                "expected q+1 = {} betas, got {}",
                self.q + 1,
                self.betas.len()
            )));
        }
        if self.y.len() != self.q {
            return Err(Error::InvalidConfig(format!(
                "expected q = {} y offsets, got {}",
                self.q,
                self.y.len()
            )));
        }
        let mut prev = 0.0;
        for (i, &b) in self.betas.iter().enumerate() {
            if !(b.is_finite() && b > prev) {
                return Err(Error::InvalidConfig(format!(
                    "betas must be strictly increasing and positive; beta[{i}] = {b} after {prev}"
                )));
            }
            prev = b;
        }
        for v in [self.x, self.z].iter().chain(self.y.iter()) {
            if !v.is_finite() {
                return Err(Error::InvalidConfig("offsets must be finite".into()));
            }
        }
        let warnings = self.law.validate()?;
        if self.phi.is_identically_zero() {
            return Err(Error::InvalidConfig("phi is identically zero".into()));
        }
        let anchor = self.anchor();
        let phi_val = self.phi.eval(anchor).map_err(|e| {
            Error::InvalidConfig(format!("phi not evaluable at anchor {anchor}: {e}"))
        })?;
        if phi_val == 0.0 || !phi_val.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "phi({anchor}) = {phi_val}; the anchor value must be finite and non-zero"
            )));
        }
        self.phi.derivative(anchor).map_err(|e| {
            Error::InvalidConfig(format!("phi not differentiable at anchor {anchor}: {e}"))
        })?;
        Ok(warnings)
    }
}

/// Finite-`M` cut points `β_M^i = ⌈β^i·M⌉` together with the increment
/// proportions `γ` and `γ̄` from the proposition on joint Gaussian limits.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexSchedule {
    pub m: u64,
    pub beta_m: Vec<u64>,
    /// `γ = (β^1, β^2−β^1, …, β^q−β^{q−1})`, length `q`.
    pub gamma: Vec<f64>,
    /// `γ̄ = (γ, β^{q+1}−β^q)`, length `q+1`.
    pub gamma_bar: Vec<f64>,
    /// Smallest `M` from which `β_M^i` is strictly increasing for every
    /// `M' ≥ M`.
    pub strict_from: u64,
}

impl IndexSchedule {
    /// Total number of `(Y, Z)` draws one sample consumes.
    pub fn draws(&self) -> u64 {
        *self.beta_m.last().expect("schedule is never empty")
    }

    pub fn is_strict(&self) -> bool {
        self.beta_m.windows(2).all(|w| w[0] < w[1])
    }
}

/// Build the index schedule for sample size `M`.
pub fn beta_indices(spec: &ModelSpec, m: u64) -> Result<IndexSchedule> {
    if m == 0 {
        return Err(Error::Contract("M must be at least 1".into()));
    }
    let beta_m: Vec<u64> = spec
        .betas
        .iter()
        .map(|&b| Ok(ceil_int(b * m as f64)? as u64))
        .collect::<Result<_>>()?;

    let q = spec.q;
    let mut gamma = Vec::with_capacity(q);
    gamma.push(spec.betas[0]);
    for i in 1..q {
        gamma.push(spec.betas[i] - spec.betas[i - 1]);
    }
    let mut gamma_bar = gamma.clone();
    gamma_bar.push(spec.betas[q] - spec.betas[q - 1]);

    Ok(IndexSchedule {
        m,
        beta_m,
        gamma,
        gamma_bar,
        strict_from: strict_threshold(&spec.betas),
    })
}

/// Smallest `M` such that `⌈β^i·M'⌉` is strictly increasing in `i` for every
/// `M' ≥ M`. Gaps larger than `1/M'` force strictness, so the scan is finite.
fn strict_threshold(betas: &[f64]) -> u64 {
    let min_gap = betas
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(betas[0], f64::min);
    let force = (1.0 / min_gap).floor() as u64 + 1;
    if force > 1_000_000 {
        return force;
    }
    let mut last_bad = 0u64;
    for m in 1..=force {
        let strict = betas
            .windows(2)
            .all(|w| (w[0] * m as f64).ceil() < (w[1] * m as f64).ceil());
        if !strict {
            last_bad = m;
        }
    }
    last_bad + 1
}

/// Verdict of the numeric integrability certificate for condition (7).
#[derive(Clone, Debug, PartialEq)]
pub enum IntegrabilityVerdict {
    /// Smallest `M̃` whose integral converged, with its value.
    IntegrableWitness {
        m_tilde: u32,
        integral: f64,
    },
    LikelyDivergent {
        reason: String,
    },
    Inconclusive,
}

/// Per-`M̃` refinement trace entry.
#[derive(Clone, Debug)]
pub struct IntegrabilityTrace {
    pub m_tilde: u32,
    pub value: f64,
    pub error: f64,
    pub panels: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct IntegrabilityReport {
    pub verdict: IntegrabilityVerdict,
    pub trace: Vec<IntegrabilityTrace>,
}

/// `∫ |φ(center+y)|^{−exponent} e^{−M̃y²} dy` over the effective support,
/// with panel boundaries on every pole and zero of the shifted `φ`.
pub fn condition_integral(
    phi: &PhiSpec,
    center: f64,
    exponent: u32,
    m_tilde: u32,
) -> Result<QuadResult> {
    let radius = truncation_radius(phi, center, exponent);
    let mut splits: Vec<f64> = phi
        .poles()
        .iter()
        .chain(phi.real_zeros().iter())
        .map(|t| t - center)
        .collect();
    splits.push(0.0);
    let e = exponent as i32;
    let mt = m_tilde as f64;
    let mut f = |y: f64| {
        let v = match phi.eval(center + y) {
            Ok(v) => v,
            // at a pole of φ the integrand extends continuously by 0
            Err(_) => return 0.0,
        };
        v.abs().powi(-e) * (-mt * y * y).exp()
    };
    quad::integrate(
        &mut f,
        -radius,
        radius,
        &splits,
        &QuadOptions {
            abs_tol: 1e-10,
            max_panels: 8192,
        },
    )
}

/// Radius beyond which the Gaussian factor crushes the catalog's at most
/// polynomially growing `|φ|^{−exponent}`.
fn truncation_radius(phi: &PhiSpec, center: f64, exponent: u32) -> f64 {
    let mut reach = center.abs();
    for p in phi.poles() {
        reach = reach.max(p.abs() + center.abs());
    }
    let mut radius = 9.0f64;
    for _ in 0..4 {
        let growth = (1.0 + reach + radius).powi(exponent as i32).max(1.0);
        radius = radius.max((growth.ln() + 80.0).sqrt());
    }
    radius
}

/// Numeric certificate for the integrability condition: for each zero of
/// `φ` the local exponent of the integrand is fitted from log-log slopes
/// (a zero of multiplicity `m` gives exponent `m·exponent ≥ 1`, which
/// diverges); absent zeros, adaptive quadrature hunts for the smallest
/// Gaussian weight `M̃ ≤ m_tilde_max` under which the integral converges.
pub fn check_integrability(
    phi: &PhiSpec,
    center: f64,
    exponent: u32,
    m_tilde_max: u32,
) -> Result<IntegrabilityReport> {
    if exponent == 0 {
        return Err(Error::Contract("exponent must be at least 1".into()));
    }
    if m_tilde_max == 0 {
        return Err(Error::Contract("M_tilde_max must be at least 1".into()));
    }
    if phi.is_identically_zero() {
        return Ok(IntegrabilityReport {
            verdict: IntegrabilityVerdict::LikelyDivergent {
                reason: "phi is identically zero".into(),
            },
            trace: vec![],
        });
    }

    for t0 in phi.real_zeros() {
        let y0 = t0 - center;
        if let Some(alpha) = local_singularity_exponent(phi, center, exponent, y0) {
            // integer multiplicities make any true singularity have α ≥ 1;
            // the 0.5 cut only has to separate α ≥ 1 from fitting noise
            if alpha >= 0.5 {
                return Ok(IntegrabilityReport {
                    verdict: IntegrabilityVerdict::LikelyDivergent {
                        reason: format!(
                            "phi vanishes at t = {t0}; local integrand exponent ≈ {alpha:.3} (non-integrable)"
                        ),
                    },
                    trace: vec![],
                });
            }
        }
    }

    let mut trace = Vec::new();
    let mut witness: Option<(u32, f64)> = None;
    for m_tilde in 1..=m_tilde_max {
        match condition_integral(phi, center, exponent, m_tilde) {
            Ok(r) => {
                trace.push(IntegrabilityTrace {
                    m_tilde,
                    value: r.value,
                    error: r.error,
                    panels: r.panels,
                    converged: true,
                });
                witness = Some((m_tilde, r.value));
                break;
            }
            Err(Error::QuadratureFailed {
                estimate,
                error,
                panels,
            }) => {
                trace.push(IntegrabilityTrace {
                    m_tilde,
                    value: estimate,
                    error,
                    panels,
                    converged: false,
                });
            }
            Err(Error::Singular { .. }) => {
                trace.push(IntegrabilityTrace {
                    m_tilde,
                    value: f64::NAN,
                    error: f64::INFINITY,
                    panels: 0,
                    converged: false,
                });
            }
            Err(e) => return Err(e),
        }
    }

    Ok(IntegrabilityReport {
        verdict: match witness {
            Some((m_tilde, integral)) => {
                IntegrabilityVerdict::IntegrableWitness { m_tilde, integral }
            }
            None => IntegrabilityVerdict::Inconclusive,
        },
        trace,
    })
}

/// Fit `α` in `integrand ≈ C·|y−y0|^{−α}` from two-scale log slopes on both
/// sides of a zero. `None` when the integrand is not actually singular.
fn local_singularity_exponent(phi: &PhiSpec, center: f64, exponent: u32, y0: f64) -> Option<f64> {
    let e = exponent as i32;
    let g = |y: f64| -> Option<f64> {
        let v = phi.eval(center + y).ok()?;
        let gv = v.abs().powi(-e);
        if gv.is_finite() && gv > 0.0 {
            Some(gv.ln())
        } else {
            None
        }
    };
    let scale = y0.abs().max(1.0);
    let mut best: Option<f64> = None;
    for side in [-1.0, 1.0] {
        let d1 = 1e-5 * scale;
        let d2 = 1e-7 * scale;
        let (l1, l2) = (g(y0 + side * d1)?, g(y0 + side * d2)?);
        let slope = (l2 - l1) / (d2.ln() - d1.ln());
        let alpha = -slope;
        best = Some(best.map_or(alpha, |b: f64| b.max(alpha)));
    }
    best
}
