//! Heuristic growth checks for the control moments on shells of increasing
//! radius. A flag means the sampled trend does not decay as required; it is a
//! warning, not a proof either way.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Model;
use crate::error::{Error, Result};
use crate::linalg::norm;

/// Fitted log-log slope above which a ratio that should vanish counts as not
/// decaying.
const DECAY_SLOPE: f64 = -0.1;
/// Fitted slope above which a ratio that should stay bounded counts as growing.
const GROWTH_SLOPE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub radii: Vec<f64>,
    /// max ‖g(z)‖ per shell.
    pub g_max: Vec<f64>,
    /// max ‖Γ(z)‖/‖z‖ per shell.
    pub gamma_ratio: Vec<f64>,
    /// max_i κ_i(z)/‖z‖² per shell.
    pub kappa_ratio: Vec<f64>,
    pub g_flag: bool,
    pub gamma_flag: bool,
    pub kappa_flag: bool,
    pub warnings: Vec<String>,
}

/// Random lattice points of ℤ₊^p near the sphere of the given radius.
pub fn shell_points<R: Rng + ?Sized>(p: usize, radius: f64, samples: usize, rng: &mut R) -> Vec<Vec<i64>> {
    let mut out = Vec::with_capacity(samples);
    while out.len() < samples {
        let dir: Vec<f64> = (0..p)
            .map(|_| rng.sample::<f64, _>(StandardNormal).abs())
            .collect();
        let n = norm(&dir);
        if n == 0.0 {
            continue;
        }
        let z: Vec<i64> = dir.iter().map(|d| (radius * d / n).round() as i64).collect();
        if z.iter().any(|&x| x > 0) {
            out.push(z);
        }
    }
    out
}

fn loglog_slope(radii: &[f64], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0)
        .map(|(r, v)| (r.ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn hypothesis_diagnostics<R: Rng + ?Sized>(
    model: &Model,
    radii: &[f64],
    samples_per_radius: usize,
    rng: &mut R,
) -> Result<DiagnosticsReport> {
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
        return Err(Error::InvalidArgument("radii must be positive and increasing".into()));
    }
    let p = model.p();
    let mut g_max = Vec::new();
    let mut gamma_ratio = Vec::new();
    let mut kappa_ratio = Vec::new();
    for &r in radii {
        let (mut g, mut gr, mut kr) = (0.0_f64, 0.0_f64, 0.0_f64);
        for z in shell_points(p, r, samples_per_radius, rng) {
            let zn = norm(&z.iter().map(|&x| x as f64).collect::<Vec<_>>());
            let c = model.control_moments(&z)?;
            g = g.max(norm(&model.implied_g(&z)?));
            gr = gr.max(c.cov.norm2() / zn);
            kr = kr.max(c.fourth_central.iter().fold(0.0_f64, |m, k| m.max(*k)) / (zn * zn));
        }
        g_max.push(g);
        gamma_ratio.push(gr);
        kappa_ratio.push(kr);
    }
    let flag_if = |vals: &[f64], limit: f64| {
        loglog_slope(radii, vals).is_some_and(|s| s > limit)
    };
    let g_flag = flag_if(&g_max, DECAY_SLOPE);
    let gamma_flag = flag_if(&gamma_ratio, DECAY_SLOPE);
    let kappa_flag = flag_if(&kappa_ratio, GROWTH_SLOPE);
    let mut warnings = Vec::new();
    if g_flag {
        warnings.push("‖g(z)‖ does not appear to vanish as ‖z‖ grows".to_string());
    }
    if gamma_flag {
        warnings.push("‖Γ(z)‖/‖z‖ does not appear to vanish as ‖z‖ grows".to_string());
    }
    if kappa_flag {
        warnings.push("κ(z)/‖z‖² appears to grow with ‖z‖".to_string());
    }
    Ok(DiagnosticsReport {
        radii: radii.to_vec(),
        g_max,
        gamma_ratio,
        kappa_ratio,
        g_flag,
        gamma_flag,
        kappa_flag,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::DiscreteLaw;
    use crate::model::{presets, ControlLaw, Fallback, TableEntry};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const RADII: [f64; 4] = [16.0, 64.0, 256.0, 1024.0];

    #[test]
    fn migration_ratio_decays() {
        let m = Model::new(presets::uniform_migration(0.5, vec![3, 3])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = hypothesis_diagnostics(&m, &RADII, 20, &mut rng).unwrap();
        assert!(!r.gamma_flag && !r.kappa_flag && !r.g_flag);
        assert!(r.gamma_ratio.windows(2).all(|w| w[1] < w[0]));
        let norms_bound = r.gamma_ratio.iter().zip(RADII).all(|(g, rad)| *g <= (2.0 / 3.0) / (rad - 1.0));
        assert!(norms_bound);
    }

    #[test]
    fn identity_control_is_all_zero() {
        let mut spec = presets::uniform_migration(0.5, vec![3, 3]);
        spec.control = ControlLaw::Identity { dim: 2 };
        let m = Model::new(spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = hypothesis_diagnostics(&m, &RADII, 10, &mut rng).unwrap();
        assert!(r.g_max.iter().chain(&r.gamma_ratio).chain(&r.kappa_ratio).all(|&x| x == 0.0));
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn linear_control_variance_is_flagged() {
        // Each coordinate moves by 0 or 2a with a² close to ‖z‖, so ‖Γ(z)‖ ≈ ‖z‖.
        let samples = 10;
        let mut probe = ChaCha8Rng::seed_from_u64(3);
        let mut entries = Vec::new();
        for &r in &RADII {
            for z in shell_points(2, r, samples, &mut probe) {
                let zn = ((z[0] * z[0] + z[1] * z[1]) as f64).sqrt();
                let a = zn.sqrt().round() as i64;
                let coord = |x: i64| DiscreteLaw::table(vec![vec![x], vec![x + 2 * a]], vec![0.5, 0.5]).unwrap();
                entries.push(TableEntry {
                    law: DiscreteLaw::product(vec![coord(z[0]), coord(z[1])]),
                    z,
                });
            }
        }
        let mut spec = presets::uniform_migration(0.5, vec![3, 3]);
        spec.control = ControlLaw::Table {
            entries,
            fallback: Fallback::Identity,
        };
        let m = Model::new(spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = hypothesis_diagnostics(&m, &RADII, samples, &mut rng).unwrap();
        assert!(r.gamma_flag, "{:?}", r.gamma_ratio);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn rejects_bad_radii() {
        let m = Model::new(presets::deterministic_ray()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(hypothesis_diagnostics(&m, &[4.0, 2.0], 3, &mut rng).is_err());
    }
}
