use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::{DiscreteLaw, MomentSummary};
use crate::linalg::Matrix;

/// Law of the control vector φ(z): how many individuals of each type get to
/// reproduce, given the current population z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlLaw {
    Identity {
        dim: usize,
    },
    /// φ(z) = Λ₀z + β, which must land on ℤ₊^p.
    AffineDeterministic {
        lambda: Matrix,
        beta: Vec<f64>,
    },
    /// φ(z) = (z₁, …, z_{dim−1}, 1).
    AppendUnit {
        dim: usize,
    },
    /// φ(z) = z + M. With `gated`, coordinate i only moves when z_i > 0.
    Migration {
        law: DiscreteLaw,
        #[serde(default = "default_gated")]
        gated: bool,
    },
    /// φ(z) = (z₁·min{1, z₂}, 1).
    MatingPromiscuous,
    /// φ(z) = (z₁ + z₂, 1).
    MatingSelffert,
    /// Explicit laws on listed states, a fallback rule elsewhere.
    Table {
        entries: Vec<TableEntry>,
        #[serde(default)]
        fallback: Fallback,
    },
}

fn default_gated() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub z: Vec<i64>,
    pub law: DiscreteLaw,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum Fallback {
    #[default]
    Reject,
    Identity,
    Affine {
        lambda: Matrix,
        beta: Vec<f64>,
    },
}

fn affine_output(lambda: &Matrix, beta: &[f64], z: &[i64]) -> Result<Vec<i64>> {
    let zf: Vec<f64> = z.iter().map(|&x| x as f64).collect();
    lambda
        .mul_vec(&zf)
        .iter()
        .zip(beta)
        .map(|(a, b)| {
            let x = a + b;
            let r = x.round();
            if (x - r).abs() > 1e-9 * (1.0 + r.abs()) || r < 0.0 || r >= 9.2e18 {
                Err(Error::InvalidControl(format!(
                    "affine control maps {z:?} outside the nonnegative integers"
                )))
            } else {
                Ok(r as i64)
            }
        })
        .collect()
}

/// Small test grid: {0..3}^p for p ≤ 5, otherwise scaled unit vectors.
fn sample_grid(p: usize) -> Vec<Vec<i64>> {
    if p <= 5 {
        let mut grid = vec![vec![]];
        for _ in 0..p {
            grid = grid
                .into_iter()
                .flat_map(|g: Vec<i64>| {
                    (0..4).map(move |x| {
                        let mut h = g.clone();
                        h.push(x);
                        h
                    })
                })
                .collect();
        }
        grid
    } else {
        let mut grid = vec![vec![0; p], vec![1; p], vec![3; p]];
        for i in 0..p {
            for x in 1..4 {
                let mut z = vec![0; p];
                z[i] = x;
                grid.push(z);
            }
        }
        grid
    }
}

fn indicator(x: i64) -> f64 {
    if x > 0 {
        1.0
    } else {
        0.0
    }
}

impl ControlLaw {
    pub fn dim(&self) -> usize {
        match self {
            ControlLaw::Identity { dim } | ControlLaw::AppendUnit { dim } => *dim,
            ControlLaw::AffineDeterministic { lambda, .. } => lambda.dim(),
            ControlLaw::Migration { law, .. } => law.dim(),
            ControlLaw::MatingPromiscuous | ControlLaw::MatingSelffert => 2,
            ControlLaw::Table { entries, fallback } => match (entries.first(), fallback) {
                (Some(e), _) => e.z.len(),
                (None, Fallback::Affine { lambda, .. }) => lambda.dim(),
                _ => 0,
            },
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidControl(msg));
        if self.dim() != p {
            return bad(format!("control has dimension {}, model has {p}", self.dim()));
        }
        match self {
            ControlLaw::AppendUnit { dim } if *dim < 2 => {
                return bad("append_unit needs dimension at least 2".into());
            }
            ControlLaw::AffineDeterministic { lambda, beta } => {
                if beta.len() != p {
                    return bad("affine offset has the wrong length".into());
                }
                for z in sample_grid(p) {
                    affine_output(lambda, beta, &z)?;
                }
            }
            ControlLaw::Migration { law, gated } => {
                law.validate()?;
                let floor = if *gated { -1 } else { 0 };
                if law.support_min().iter().any(|&m| m < floor) {
                    return bad(if *gated {
                        "gated migration may remove at most one individual per type".into()
                    } else {
                        "ungated migration must be nonnegative".into()
                    });
                }
            }
            ControlLaw::Table { entries, fallback } => {
                for e in entries {
                    e.law.validate()?;
                    if e.z.len() != p || e.law.dim() != p {
                        return bad("table entry has the wrong dimension".into());
                    }
                    if e.z.iter().any(|&x| x < 0) || e.law.support_min().iter().any(|&x| x < 0) {
                        return bad("table entries must be nonnegative".into());
                    }
                }
                if let Fallback::Affine { lambda, beta } = fallback {
                    if lambda.dim() != p || beta.len() != p {
                        return bad("table fallback has the wrong dimension".into());
                    }
                    for z in sample_grid(p) {
                        if !entries.iter().any(|e| e.z == z) {
                            affine_output(lambda, beta, &z)?;
                        }
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn table_law<'a>(entries: &'a [TableEntry], z: &[i64]) -> Option<&'a DiscreteLaw> {
        entries.iter().find(|e| e.z == z).map(|e| &e.law)
    }

    /// Mean ε(z), covariance Γ(z) and fourth central moments κ(z) of φ(z).
    pub fn moments(&self, z: &[i64]) -> Result<MomentSummary> {
        let p = z.len();
        let zf: Vec<f64> = z.iter().map(|&x| x as f64).collect();
        Ok(match self {
            ControlLaw::Identity { .. } => MomentSummary::point(&zf),
            ControlLaw::AffineDeterministic { lambda, beta } => {
                let out = affine_output(lambda, beta, z)?;
                MomentSummary::point(&out.iter().map(|&x| x as f64).collect::<Vec<_>>())
            }
            ControlLaw::AppendUnit { .. } => {
                let mut e = zf.clone();
                e[p - 1] = 1.0;
                MomentSummary::point(&e)
            }
            ControlLaw::Migration { law, gated } => {
                let m = law.moments();
                let gate: Vec<f64> = if *gated {
                    z.iter().map(|&x| indicator(x)).collect()
                } else {
                    vec![1.0; p]
                };
                let mut out = m.clone();
                for i in 0..p {
                    out.mean[i] = zf[i] + m.mean[i] * gate[i];
                    out.fourth_central[i] = m.fourth_central[i] * gate[i];
                    for j in 0..p {
                        out.cov[(i, j)] = m.cov[(i, j)] * gate[i] * gate[j];
                    }
                }
                out
            }
            ControlLaw::MatingPromiscuous => {
                MomentSummary::point(&[zf[0] * (z[1].min(1) as f64), 1.0])
            }
            ControlLaw::MatingSelffert => MomentSummary::point(&[zf[0] + zf[1], 1.0]),
            ControlLaw::Table { entries, fallback } => match Self::table_law(entries, z) {
                Some(law) => law.moments(),
                None => match fallback {
                    Fallback::Reject => {
                        return Err(Error::InvalidControl(format!(
                            "state {z:?} is not covered by the control table"
                        )))
                    }
                    Fallback::Identity => MomentSummary::point(&zf),
                    Fallback::Affine { lambda, beta } => {
                        let out = affine_output(lambda, beta, z)?;
                        MomentSummary::point(&out.iter().map(|&x| x as f64).collect::<Vec<_>>())
                    }
                },
            },
        })
    }

    /// Draws φ(z) into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, z: &[i64], rng: &mut R, out: &mut [i64]) -> Result<()> {
        let p = z.len();
        match self {
            ControlLaw::Identity { .. } => out.copy_from_slice(z),
            ControlLaw::AffineDeterministic { lambda, beta } => {
                out.copy_from_slice(&affine_output(lambda, beta, z)?)
            }
            ControlLaw::AppendUnit { .. } => {
                out.copy_from_slice(z);
                out[p - 1] = 1;
            }
            ControlLaw::Migration { law, gated } => {
                law.sample_into(rng, out);
                for i in 0..p {
                    let shift = if !*gated || z[i] > 0 { out[i] } else { 0 };
                    out[i] = z[i].checked_add(shift).ok_or_else(|| {
                        Error::InvalidControl("migration overflowed".into())
                    })?;
                    if out[i] < 0 {
                        return Err(Error::InvalidControl(
                            "migration produced a negative count".into(),
                        ));
                    }
                }
            }
            ControlLaw::MatingPromiscuous => {
                out[0] = z[0] * z[1].min(1);
                out[1] = 1;
            }
            ControlLaw::MatingSelffert => {
                out[0] = z[0]
                    .checked_add(z[1])
                    .ok_or_else(|| Error::InvalidControl("mating units overflowed".into()))?;
                out[1] = 1;
            }
            ControlLaw::Table { entries, fallback } => match Self::table_law(entries, z) {
                Some(law) => law.sample_into(rng, out),
                None => match fallback {
                    Fallback::Reject => {
                        return Err(Error::InvalidControl(format!(
                            "state {z:?} is not covered by the control table"
                        )))
                    }
                    Fallback::Identity => out.copy_from_slice(z),
                    Fallback::Affine { lambda, beta } => {
                        out.copy_from_slice(&affine_output(lambda, beta, z)?)
                    }
                },
            },
        }
        Ok(())
    }

    /// True when φ(z) is a deterministic function of z.
    pub fn is_deterministic(&self) -> bool {
        match self {
            ControlLaw::Migration { .. } | ControlLaw::Table { .. } => false,
            _ => true,
        }
    }
}
