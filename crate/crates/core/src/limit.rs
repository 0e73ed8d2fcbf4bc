//! The one-dimensional limit diffusion dX = b dt + √(σ² X⁺) dW, X₀ = 0: an
//! Euler–Maruyama integrator and the closed-form marginal law.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::error::{Error, Result};
use crate::rng::StreamKey;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdePath {
    pub dt: f64,
    /// X at times j·dt, j = 0..J.
    pub values: Vec<f64>,
    pub seed: u64,
}

fn grid_steps(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_end >= dt) || !t_end.is_finite() {
        return Err(Error::InvalidArgument("need dt > 0 and T ≥ dt".into()));
    }
    let x = t_end / dt;
    let r = x.round();
    Ok(if (x - r).abs() <= 1e-9 * r { r as usize } else { x.ceil() as usize })
}

/// Full-truncation Euler–Maruyama path started at 0, driven by path `path_id`
/// of the stream family `seed`.
pub fn euler_maruyama_stream(b: f64, sigma2: f64, t_end: f64, dt: f64, seed: u64, path_id: u64) -> Result<SdePath> {
    if !(sigma2 >= 0.0) || !b.is_finite() {
        return Err(Error::InvalidArgument("need finite b and sigma2 ≥ 0".into()));
    }
    let steps = grid_steps(t_end, dt)?;
    let mut values = Vec::with_capacity(steps + 1);
    if sigma2 == 0.0 {
        // closed form of the recursion, free of accumulated rounding
        values.extend((0..=steps).map(|j| b * j as f64 * dt));
    } else {
        let mut rng = StreamKey::new(seed, path_id).substream(0, 0);
        let sdt = dt.sqrt();
        let mut x = 0.0_f64;
        values.push(x);
        for _ in 0..steps {
            let z: f64 = rng.sample(StandardNormal);
            x += b * dt + (sigma2 * x.max(0.0)).sqrt() * sdt * z;
            values.push(x);
        }
    }
    Ok(SdePath { dt, values, seed })
}

pub fn euler_maruyama(b: f64, sigma2: f64, t_end: f64, dt: f64, seed: u64) -> Result<SdePath> {
    euler_maruyama_stream(b, sigma2, t_end, dt, seed, 0)
}

/// Terminal values of paths 0..n_paths, in path order.
pub fn euler_maruyama_terminal(
    b: f64,
    sigma2: f64,
    t_end: f64,
    dt: f64,
    n_paths: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..n_paths)
        .into_par_iter()
        .map(|i| euler_maruyama_stream(b, sigma2, t_end, dt, seed, i).map(|p| *p.values.last().unwrap()))
        .collect()
}

/// Law of X_t.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaMarginal {
    /// X_t = value almost surely.
    DegenerateLine { value: f64, t: f64 },
    Gamma { shape: f64, rate: f64, t: f64 },
}

impl GammaMarginal {
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            GammaMarginal::DegenerateLine { value, .. } => {
                if x >= value {
                    1.0
                } else {
                    0.0
                }
            }
            GammaMarginal::Gamma { shape, rate, .. } => {
                if x <= 0.0 {
                    0.0
                } else {
                    Gamma::new(shape, rate).expect("validated parameters").cdf(x)
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            GammaMarginal::DegenerateLine { value, .. } => value,
            GammaMarginal::Gamma { shape, rate, .. } => shape / rate,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            GammaMarginal::DegenerateLine { .. } => 0.0,
            GammaMarginal::Gamma { shape, rate, .. } => shape / (rate * rate),
        }
    }
}

/// Marginal at time t: Gamma with shape 2b/σ² and rate 2/(σ²t), or the point
/// b·t when σ² = 0. With b = 0 the process never leaves 0.
pub fn gamma_marginal(b: f64, sigma2: f64, t: f64) -> Result<GammaMarginal> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument("time must be positive".into()));
    }
    if !(b >= 0.0) || !(sigma2 >= 0.0) {
        return Err(Error::InvalidArgument("need b ≥ 0 and sigma2 ≥ 0".into()));
    }
    if sigma2 == 0.0 || b == 0.0 {
        return Ok(GammaMarginal::DegenerateLine { value: b * t, t });
    }
    Ok(GammaMarginal::Gamma {
        shape: 2.0 * b / sigma2,
        rate: 2.0 / (sigma2 * t),
        t,
    })
}

/// X_t·ũ along the path.
pub fn limit_ray_path(sde: &SdePath, direction: &[f64]) -> Vec<Vec<f64>> {
    sde.values
        .iter()
        .map(|x| direction.iter().map(|u| x * u).collect())
        .collect()
}

/// CSV rows path_id,j,t,X.
pub fn write_sde_csv<W: Write>(mut w: W, paths: &[(u64, SdePath)]) -> std::io::Result<()> {
    writeln!(w, "path_id,j,t,X")?;
    for (id, path) in paths {
        for (j, x) in path.values.iter().enumerate() {
            writeln!(w, "{id},{j},{},{x}", j as f64 * path.dt)?;
        }
    }
    Ok(())
}
