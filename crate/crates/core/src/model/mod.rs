//! Model description, conditional moments, criticality and limit coefficients.

mod control;
mod diagnostics;
pub mod presets;

pub use control::{ControlLaw, Fallback, TableEntry};
pub use diagnostics::{hypothesis_diagnostics, shell_points, DiagnosticsReport};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::laws::{DiscreteLaw, MomentSummary};
use crate::linalg::{self, dot, Matrix, SpectralData};

pub const DEFAULT_BAND: f64 = 1e-9;
const MAX_TYPES: usize = 32;

/// Right/left eigenvectors supplied by the user instead of computed ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Eigenpair {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Serializable description of a controlled branching process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub p: usize,
    /// Law of one offspring vector of each type.
    pub offspring: Vec<DiscreteLaw>,
    pub control: ControlLaw,
    /// Declared linear part of ε(z) = Λz + α + g(z).
    #[serde(rename = "Lambda")]
    pub lambda: Matrix,
    pub alpha: Vec<f64>,
    /// Law of the initial population.
    pub z0: DiscreteLaw,
    /// Declared, not checked: P(‖Z_k‖ ≤ B) → 0 for every level B.
    #[serde(default)]
    pub escapes_bounded_levels: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenpair: Option<Eigenpair>,
}

/// Validated model with cached offspring moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub struct Model {
    spec: ModelSpec,
    m: Matrix,
    sigmas: Vec<Matrix>,
    zetas: Vec<Vec<f64>>,
    m_tilde: Matrix,
    m_alpha: Vec<f64>,
}

impl TryFrom<ModelSpec> for Model {
    type Error = Error;

    fn try_from(spec: ModelSpec) -> Result<Self> {
        Model::new(spec)
    }
}

impl From<Model> for ModelSpec {
    fn from(m: Model) -> Self {
        m.spec
    }
}

/// Σ_i z_i A_i.
pub fn odot(z: &[f64], mats: &[Matrix]) -> Result<Matrix> {
    if z.len() != mats.len() || mats.is_empty() {
        return Err(Error::Dimension(format!(
            "{} weights for {} matrices",
            z.len(),
            mats.len()
        )));
    }
    let d = mats[0].dim();
    let mut out = Matrix::zeros(d);
    for (w, a) in z.iter().zip(mats) {
        if a.dim() != d {
            return Err(Error::Dimension("matrices differ in dimension".into()));
        }
        if *w != 0.0 {
            out = out.add(&a.scale(*w));
        }
    }
    Ok(out)
}

impl Model {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let p = spec.p;
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if p == 0 || p > MAX_TYPES {
            return bad(format!("number of types must be in 1..={MAX_TYPES}"));
        }
        if spec.offspring.len() != p {
            return bad(format!("expected {p} offspring laws, found {}", spec.offspring.len()));
        }
        for (i, law) in spec.offspring.iter().enumerate() {
            law.validate()?;
            if law.dim() != p {
                return bad(format!("offspring law of type {} has dimension {}", i + 1, law.dim()));
            }
            if law.support_min().iter().any(|&x| x < 0) {
                return bad(format!("offspring law of type {} can be negative", i + 1));
            }
        }
        spec.control.validate(p)?;
        if spec.lambda.dim() != p || spec.alpha.len() != p {
            return bad("Lambda and alpha must match the number of types".into());
        }
        if spec.alpha.iter().any(|a| !a.is_finite()) {
            return bad("alpha must be finite".into());
        }
        spec.z0.validate()?;
        if spec.z0.dim() != p || spec.z0.support_min().iter().any(|&x| x < 0) {
            return bad("initial law must live on the nonnegative integers of dimension p".into());
        }
        if let Some(e) = &spec.eigenpair {
            if e.u.len() != p || e.v.len() != p {
                return bad("eigenpair dimension differs from p".into());
            }
        }
        let moments: Vec<MomentSummary> = spec.offspring.iter().map(|l| l.moments()).collect();
        let m = Matrix::from_columns(&moments.iter().map(|s| s.mean.clone()).collect::<Vec<_>>())?;
        let m_tilde = m.mul(&spec.lambda);
        let m_alpha = m.mul_vec(&spec.alpha);
        Ok(Model {
            sigmas: moments.iter().map(|s| s.cov.clone()).collect(),
            zetas: moments.iter().map(|s| s.fourth_central.clone()).collect(),
            m,
            m_tilde,
            m_alpha,
            spec,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn p(&self) -> usize {
        self.spec.p
    }

    /// Offspring mean matrix, column i is the mean offspring vector of type i.
    pub fn mean_matrix(&self) -> &Matrix {
        &self.m
    }

    /// mΛ.
    pub fn m_tilde(&self) -> &Matrix {
        &self.m_tilde
    }

    /// mα.
    pub fn m_alpha(&self) -> &[f64] {
        &self.m_alpha
    }

    /// Offspring covariance matrices, one per type.
    pub fn sigmas(&self) -> &[Matrix] {
        &self.sigmas
    }

    /// Offspring fourth central moments per type and coordinate.
    pub fn zetas(&self) -> &[Vec<f64>] {
        &self.zetas
    }

    pub fn lambda(&self) -> &Matrix {
        &self.spec.lambda
    }

    pub fn alpha(&self) -> &[f64] {
        &self.spec.alpha
    }

    fn check_state(&self, z: &[i64]) -> Result<()> {
        if z.len() != self.p() {
            return Err(Error::Dimension(format!("state has {} coordinates, expected {}", z.len(), self.p())));
        }
        if z.iter().any(|&x| x < 0) {
            return Err(Error::InvalidArgument("states must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn control_moments(&self, z: &[i64]) -> Result<MomentSummary> {
        self.check_state(z)?;
        self.spec.control.moments(z)
    }

    /// E[Z_k | Z_{k−1} = z] = m ε(z).
    pub fn conditional_mean(&self, z: &[i64]) -> Result<Vec<f64>> {
        Ok(self.m.mul_vec(&self.control_moments(z)?.mean))
    }

    /// Var[Z_k | Z_{k−1} = z] = ε(z)⊙Σ + m Γ(z) mᵀ.
    pub fn conditional_cov(&self, z: &[i64]) -> Result<Matrix> {
        let c = self.control_moments(z)?;
        let spread = odot(&c.mean, &self.sigmas)?;
        Ok(spread.add(&self.m.mul(&c.cov).mul(&self.m.transpose())))
    }

    /// g(z) = ε(z) − Λz − α.
    pub fn implied_g(&self, z: &[i64]) -> Result<Vec<f64>> {
        let eps = self.control_moments(z)?.mean;
        let zf: Vec<f64> = z.iter().map(|&x| x as f64).collect();
        let lz = self.spec.lambda.mul_vec(&zf);
        Ok((0..self.p())
            .map(|i| eps[i] - lz[i] - self.spec.alpha[i])
            .collect())
    }

    /// Short stable fingerprint of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.spec).expect("model serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criticality {
    Subcritical,
    Critical,
    Supercritical,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalityReport {
    pub rho: f64,
    pub class: Criticality,
    pub spectral: Option<SpectralData>,
    pub tolerance_band: f64,
    pub primitive: bool,
    pub note: Option<String>,
}

/// Classifies by the spectral radius of mΛ. A model within the band of 1 is
/// called critical only when the leading eigenvalue is simple, strictly
/// dominant and carries nonnegative eigenvectors.
pub fn classify(model: &Model, tolerance_band: f64) -> CriticalityReport {
    let mt = model.m_tilde();
    let scale = mt.max_abs().max(1.0);
    let rho = linalg::spectral_radius(mt);
    let by_band = |r: f64| {
        if (r - 1.0).abs() <= tolerance_band {
            Criticality::Critical
        } else if r < 1.0 {
            Criticality::Subcritical
        } else {
            Criticality::Supercritical
        }
    };
    if mt.entries().iter().any(|&x| x < -1e-12 * scale) {
        return CriticalityReport {
            rho,
            class: Criticality::Indeterminate,
            spectral: None,
            tolerance_band,
            primitive: false,
            note: Some("mΛ has negative entries".into()),
        };
    }
    let mut clean = mt.clone();
    for i in 0..mt.dim() {
        for j in 0..mt.dim() {
            if clean[(i, j)] < 0.0 {
                clean[(i, j)] = 0.0;
            }
        }
    }
    let primitive = linalg::is_primitive(&clean).unwrap_or(false);
    let eig = if primitive {
        linalg::perron_frobenius(&clean)
    } else {
        linalg::dominant_eigenpair(&clean)
    };
    match eig {
        Ok(s) => CriticalityReport {
            rho: s.rho,
            class: by_band(s.rho),
            spectral: Some(s),
            tolerance_band,
            primitive,
            note: None,
        },
        Err(e) => {
            let class = match by_band(rho) {
                Criticality::Critical => Criticality::Indeterminate,
                other => other,
            };
            CriticalityReport {
                rho,
                class,
                spectral: None,
                tolerance_band,
                primitive,
                note: Some(e.to_string()),
            }
        }
    }
}

/// Drift and diffusion of the limiting squared-Bessel-type diffusion, and the
/// ray it lives on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitCoefficients {
    /// b = ṽᵀmα.
    pub drift: f64,
    /// σ² = ṽᵀ((Λũ)⊙Σ)ṽ.
    pub diffusion: f64,
    /// ũ.
    pub direction: Vec<f64>,
    /// Λũ.
    pub lambda_u: Vec<f64>,
    /// ṽ, used to project Z onto the ray.
    pub projection: Vec<f64>,
}

/// Coefficients for a given eigenvector pair, without any checks.
pub fn coefficients_for_pair(model: &Model, u: &[f64], v: &[f64]) -> Result<LimitCoefficients> {
    let lambda_u = model.lambda().mul_vec(u);
    let spread = odot(&lambda_u, model.sigmas())?;
    Ok(LimitCoefficients {
        drift: dot(v, model.m_alpha()),
        diffusion: dot(v, &spread.mul_vec(v)),
        direction: u.to_vec(),
        lambda_u,
        projection: v.to_vec(),
    })
}

fn check_user_pair(model: &Model, e: &Eigenpair) -> Result<()> {
    let mt = model.m_tilde();
    let mu = mt.mul_vec(&e.u);
    let vm = mt.vec_mul(&e.v);
    let ok = (e.u.iter().sum::<f64>() - 1.0).abs() <= 1e-12
        && (dot(&e.u, &e.v) - 1.0).abs() <= 1e-12
        && e.u.iter().chain(&e.v).all(|&x| x >= 0.0)
        && mu.iter().zip(&e.u).all(|(a, b)| (a - b).abs() <= 1e-10 * (1.0 + b.abs()))
        && vm.iter().zip(&e.v).all(|(a, b)| (a - b).abs() <= 1e-10 * (1.0 + b.abs()));
    if ok {
        Ok(())
    } else {
        Err(Error::Precondition(
            "supplied eigenpair is not a normalized nonnegative eigenpair of mΛ for eigenvalue 1".into(),
        ))
    }
}

pub fn limit_coefficients(model: &Model) -> Result<LimitCoefficients> {
    limit_coefficients_with_band(model, DEFAULT_BAND)
}

pub fn limit_coefficients_with_band(model: &Model, band: f64) -> Result<LimitCoefficients> {
    let report = classify(model, band);
    if report.class != Criticality::Critical {
        return Err(Error::Precondition(format!(
            "model is {:?} (spectral radius {}), limit theory needs a critical model",
            report.class, report.rho
        )));
    }
    let (u, v) = match &model.spec().eigenpair {
        Some(e) => {
            check_user_pair(model, e)?;
            (e.u.clone(), e.v.clone())
        }
        None => {
            let s = report.spectral.expect("critical report carries spectral data");
            (s.u, s.v)
        }
    };
    let c = coefficients_for_pair(model, &u, &v)?;
    if c.lambda_u.iter().any(|&x| x < -1e-12) {
        return Err(Error::Precondition("Λũ has a negative coordinate".into()));
    }
    Ok(c)
}
