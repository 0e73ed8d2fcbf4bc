//! Ready-made models: branching with immigration, two-sex mating schemes,
//! migration, and a deterministic ray.

use serde::{Deserialize, Serialize};

use super::{ControlLaw, Fallback, ModelSpec, TableEntry};
use crate::error::{Error, Result};
use crate::laws::DiscreteLaw;
use crate::linalg::Matrix;

fn rows(r: &[&[f64]]) -> Matrix {
    Matrix::from_rows(&r.iter().map(|x| x.to_vec()).collect::<Vec<_>>()).expect("square literal")
}

/// φ(0) = 0 and φ(z) = (z₁ + 1, z₁ + z₂ − 1) otherwise, with a single
/// offspring (1, 0) per type-1 unit and none for type 2. Started from (1, 0)
/// the path is Z_k = (k + 1, 0).
pub fn deterministic_ray() -> ModelSpec {
    let lambda = rows(&[&[1.0, 0.0], &[1.0, 1.0]]);
    ModelSpec {
        p: 2,
        offspring: vec![
            DiscreteLaw::deterministic(vec![1, 0]),
            DiscreteLaw::deterministic(vec![0, 0]),
        ],
        control: ControlLaw::Table {
            entries: vec![TableEntry {
                z: vec![0, 0],
                law: DiscreteLaw::deterministic(vec![0, 0]),
            }],
            fallback: Fallback::Affine {
                lambda: lambda.clone(),
                beta: vec![1.0, -1.0],
            },
        },
        lambda,
        alpha: vec![1.0, -1.0],
        z0: DiscreteLaw::deterministic(vec![1, 0]),
        escapes_bounded_levels: true,
        eigenpair: None,
    }
}

/// Two types, each unit has offspring (1, 1) with probability q, and every
/// nonempty type gains or loses one unit uniformly before reproducing.
pub fn uniform_migration(q: f64, z0: Vec<i64>) -> ModelSpec {
    ModelSpec {
        p: 2,
        offspring: vec![DiscreteLaw::BernoulliVector { vector: vec![1, 1], q }; 2],
        control: ControlLaw::Migration {
            law: DiscreteLaw::product(vec![
                DiscreteLaw::uniform_scalar(-1, 1),
                DiscreteLaw::uniform_scalar(-1, 1),
            ]),
            gated: true,
        },
        lambda: Matrix::identity(2),
        alpha: vec![0.0, 0.0],
        z0: DiscreteLaw::deterministic(z0),
        escapes_bounded_levels: false,
        eigenpair: None,
    }
}

fn check_immigration_model(xi: &[DiscreteLaw], immigration: &DiscreteLaw, y0: &DiscreteLaw) -> Result<usize> {
    let p = xi.len();
    if p == 0 || xi.iter().any(|l| l.dim() != p) || immigration.dim() != p || y0.dim() != p {
        return Err(Error::InvalidModel(
            "offspring, immigration and initial laws must share one dimension".into(),
        ));
    }
    Ok(p)
}

/// Branching with immigration written as a (p+1)-type controlled process
/// whose last type is a single immigration unit present in every generation.
pub fn mbpi_embedding(xi: Vec<DiscreteLaw>, immigration: DiscreteLaw, y0: DiscreteLaw) -> Result<ModelSpec> {
    let p = check_immigration_model(&xi, &immigration, &y0)?;
    let mut offspring: Vec<DiscreteLaw> = xi.iter().map(|l| l.with_extra_coordinate(0)).collect();
    offspring.push(immigration.with_extra_coordinate(1));
    let mut diag = vec![1.0; p];
    diag.push(0.0);
    let mut alpha = vec![0.0; p];
    alpha.push(1.0);
    Ok(ModelSpec {
        p: p + 1,
        offspring,
        control: ControlLaw::AppendUnit { dim: p + 1 },
        lambda: Matrix::diag(&diag),
        alpha,
        z0: y0.with_extra_coordinate(1),
        escapes_bounded_levels: false,
        eigenpair: None,
    })
}

/// Branching with immigration as a p-type process whose control adds the
/// immigrants: φ(z) = z + I.
pub fn mbpi_migration_repr(xi: Vec<DiscreteLaw>, immigration: DiscreteLaw, y0: DiscreteLaw) -> Result<ModelSpec> {
    let p = check_immigration_model(&xi, &immigration, &y0)?;
    let alpha = immigration.moments().mean;
    Ok(ModelSpec {
        p,
        offspring: xi,
        control: ControlLaw::Migration {
            law: immigration,
            gated: false,
        },
        lambda: Matrix::identity(p),
        alpha,
        z0: y0,
        escapes_bounded_levels: false,
        eigenpair: None,
    })
}

fn check_two_sex(offspring: &DiscreteLaw, immigration: &DiscreteLaw, z0: &DiscreteLaw) -> Result<()> {
    if offspring.dim() != 2 || immigration.dim() != 2 || z0.dim() != 2 {
        return Err(Error::InvalidModel(
            "two-sex laws are (female, male) pairs".into(),
        ));
    }
    Ok(())
}

/// Two-sex process with promiscuous mating L(F, M) = F·min{1, M}. Type 1 is
/// the mating unit, type 2 the immigration unit. Male immigration must be
/// almost surely positive and the start must have both sexes present.
pub fn two_sex_promiscuous(offspring: DiscreteLaw, immigration: DiscreteLaw, z0: DiscreteLaw) -> Result<ModelSpec> {
    check_two_sex(&offspring, &immigration, &z0)?;
    if immigration.support_min()[1] < 1 {
        return Err(Error::InvalidModel(
            "male immigration must be at least one almost surely".into(),
        ));
    }
    if z0.support_min().iter().any(|&x| x < 1) {
        return Err(Error::InvalidModel(
            "initial females and males must both be positive".into(),
        ));
    }
    Ok(ModelSpec {
        p: 2,
        offspring: vec![offspring, immigration],
        control: ControlLaw::MatingPromiscuous,
        lambda: rows(&[&[1.0, 0.0], &[0.0, 0.0]]),
        alpha: vec![0.0, 1.0],
        z0,
        escapes_bounded_levels: true,
        eigenpair: None,
    })
}

/// Poisson offspring with means (ef, em); immigrants F^I ~ Poisson(ef_i) and
/// M^I ~ 1 + Poisson(em_i − 1).
pub fn two_sex_promiscuous_poisson(ef: f64, em: f64, ef_i: f64, em_i: f64) -> Result<ModelSpec> {
    if em_i < 1.0 {
        return Err(Error::InvalidModel("mean male immigration must be at least one".into()));
    }
    two_sex_promiscuous(
        DiscreteLaw::poisson(vec![ef, em]),
        DiscreteLaw::shifted(DiscreteLaw::poisson(vec![ef_i, em_i - 1.0]), vec![0, 1]),
        DiscreteLaw::deterministic(vec![1, 1]),
    )
}

/// Two-sex process where every individual reproduces alone:
/// L(F, M) = F + M.
pub fn two_sex_selffert(offspring: DiscreteLaw, immigration: DiscreteLaw, z0: DiscreteLaw) -> Result<ModelSpec> {
    check_two_sex(&offspring, &immigration, &z0)?;
    Ok(ModelSpec {
        p: 2,
        offspring: vec![offspring, immigration],
        control: ControlLaw::MatingSelffert,
        lambda: rows(&[&[1.0, 1.0], &[0.0, 0.0]]),
        alpha: vec![0.0, 1.0],
        z0,
        escapes_bounded_levels: false,
        eigenpair: None,
    })
}

pub fn two_sex_selffert_poisson(ef: f64, em: f64, ef_i: f64, em_i: f64) -> ModelSpec {
    two_sex_selffert(
        DiscreteLaw::poisson(vec![ef, em]),
        DiscreteLaw::poisson(vec![ef_i, em_i]),
        DiscreteLaw::deterministic(vec![1, 1]),
    )
    .expect("two-dimensional laws")
}

fn half() -> f64 {
    0.5
}
fn five_five() -> Vec<i64> {
    vec![5, 5]
}
fn xi_default() -> Vec<DiscreteLaw> {
    vec![DiscreteLaw::poisson(vec![0.5, 0.5]); 2]
}
fn imm_default() -> DiscreteLaw {
    DiscreteLaw::poisson(vec![1.0, 1.0])
}
fn one_one() -> DiscreteLaw {
    DiscreteLaw::deterministic(vec![1, 1])
}
fn promiscuous_offspring() -> DiscreteLaw {
    DiscreteLaw::poisson(vec![1.0, 1.0])
}
fn promiscuous_immigration() -> DiscreteLaw {
    DiscreteLaw::shifted(DiscreteLaw::poisson(vec![1.0, 0.5]), vec![0, 1])
}
fn selffert_offspring() -> DiscreteLaw {
    DiscreteLaw::poisson(vec![0.3, 0.7])
}
fn selffert_immigration() -> DiscreteLaw {
    DiscreteLaw::poisson(vec![2.5, 2.5])
}

/// Named preset with its parameters, as written in configuration files.
/// Every parameter has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    DeterministicRay {},
    UniformMigration {
        #[serde(default = "half")]
        q: f64,
        #[serde(default = "five_five")]
        z0: Vec<i64>,
    },
    MbpiEmbedding {
        #[serde(default = "xi_default")]
        xi: Vec<DiscreteLaw>,
        #[serde(default = "imm_default")]
        immigration: DiscreteLaw,
        #[serde(default = "one_one")]
        y0: DiscreteLaw,
    },
    MbpiMigrationRepr {
        #[serde(default = "xi_default")]
        xi: Vec<DiscreteLaw>,
        #[serde(default = "imm_default")]
        immigration: DiscreteLaw,
        #[serde(default = "one_one")]
        y0: DiscreteLaw,
    },
    TwoSexPromiscuous {
        #[serde(default = "promiscuous_offspring")]
        offspring: DiscreteLaw,
        #[serde(default = "promiscuous_immigration")]
        immigration: DiscreteLaw,
        #[serde(default = "one_one")]
        z0: DiscreteLaw,
    },
    TwoSexSelffert {
        #[serde(default = "selffert_offspring")]
        offspring: DiscreteLaw,
        #[serde(default = "selffert_immigration")]
        immigration: DiscreteLaw,
        #[serde(default = "one_one")]
        z0: DiscreteLaw,
    },
}

impl Preset {
    pub fn build(&self) -> Result<ModelSpec> {
        match self.clone() {
            Preset::DeterministicRay {} => Ok(deterministic_ray()),
            Preset::UniformMigration { q, z0 } => Ok(uniform_migration(q, z0)),
            Preset::MbpiEmbedding { xi, immigration, y0 } => mbpi_embedding(xi, immigration, y0),
            Preset::MbpiMigrationRepr { xi, immigration, y0 } => mbpi_migration_repr(xi, immigration, y0),
            Preset::TwoSexPromiscuous { offspring, immigration, z0 } => {
                two_sex_promiscuous(offspring, immigration, z0)
            }
            Preset::TwoSexSelffert { offspring, immigration, z0 } => {
                two_sex_selffert(offspring, immigration, z0)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::DeterministicRay {} => "deterministic_ray",
            Preset::UniformMigration { .. } => "uniform_migration",
            Preset::MbpiEmbedding { .. } => "mbpi_embedding",
            Preset::MbpiMigrationRepr { .. } => "mbpi_migration_repr",
            Preset::TwoSexPromiscuous { .. } => "two_sex_promiscuous",
            Preset::TwoSexSelffert { .. } => "two_sex_selffert",
        }
    }

    /// All presets with default parameters.
    pub fn defaults() -> Vec<Preset> {
        [
            "deterministic_ray",
            "uniform_migration",
            "mbpi_embedding",
            "mbpi_migration_repr",
            "two_sex_promiscuous",
            "two_sex_selffert",
        ]
        .iter()
        .map(|n| serde_json::from_str(&format!(r#"{{"name":"{n}"}}"#)).expect("preset defaults"))
        .collect()
    }
}
