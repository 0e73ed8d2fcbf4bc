//! Statistical checks that tie simulated trajectories to the limit theory:
//! fixed-time marginals, moment growth, relative frequencies and the
//! Lindeberg sum.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::engine::{martingale_differences, monte_carlo, Collect, McConfig, Reducer, Trajectory};
use crate::error::{Error, Result};
use crate::limit::{gamma_marginal, GammaMarginal};
use crate::linalg::{dot, norm};
use crate::model::{classify, limit_coefficients_with_band, Criticality, LimitCoefficients, Model, DEFAULT_BAND};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_samples: usize,
}

/// P(K > λ) for the Kolmogorov distribution, series truncated at relative 1e-10.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    const REL: f64 = 1e-10;
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1..200 {
            let odd = (2 * k - 1) as f64;
            let term = (-odd * odd * c).exp();
            sum += term;
            if term <= REL * sum {
                break;
            }
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for k in 1..200 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term <= REL * sum.abs() {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("KS test needs at least one sample".into()));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("KS samples contain NaN".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let d = d.clamp(0.0, 1.0);
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_sf(n.sqrt() * d),
        n_samples: xs.len(),
    })
}

pub fn ks_against_marginal(samples: &[f64], marginal: &GammaMarginal) -> Result<KsResult> {
    ks_test(samples, |x| marginal.cdf(x))
}

fn ensure_critical(model: &Model, band: f64) -> Result<LimitCoefficients> {
    let report = classify(model, band);
    if report.class != Criticality::Critical {
        return Err(Error::Precondition(format!(
            "verification needs a critical model, this one is {:?} (spectral radius {})",
            report.class, report.rho
        )));
    }
    limit_coefficients_with_band(model, band)
}

fn generation_at(n: u64, t: f64) -> usize {
    (n as f64 * t + 1e-9).floor() as usize
}

/// ṽᵀZ_⌊nt⌋ / n over trajectories 0..N, in stream order.
pub fn projected_samples(
    model: &Model,
    projection: &[f64],
    n: u64,
    t: f64,
    cfg: &McConfig,
) -> Result<(Vec<f64>, Vec<(u64, Error)>)> {
    let k = generation_at(n, t);
    let cfg = McConfig { steps: k, ..*cfg };
    let nf = n as f64;
    let rep = monte_carlo(
        model,
        &cfg,
        &Collect(|tr: &Trajectory| {
            let z: Vec<f64> = tr.steps[k].iter().map(|&x| x as f64).collect();
            dot(projection, &z) / nf
        }),
    )?;
    Ok((rep.acc, rep.failures))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalReport {
    pub n: u64,
    pub t: f64,
    pub coefficients: LimitCoefficients,
    pub marginal: GammaMarginal,
    /// Present when σ² > 0.
    pub ks: Option<KsResult>,
    /// sup |ṽᵀZ/n − bt| when σ² = 0.
    pub line_deviation: Option<f64>,
    pub line_tolerance: f64,
    pub mean: f64,
    pub std_error: f64,
    pub completed: usize,
    pub failures: usize,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

impl MarginalReport {
    pub fn passes(&self, level: f64) -> bool {
        self.failures == 0
            && match (self.ks, self.line_deviation) {
                (Some(ks), _) => ks.p_value > level,
                (None, Some(d)) => d <= self.line_tolerance,
                _ => false,
            }
    }

    /// Whether the sample mean sits within 6 standard errors of b·t; the line
    /// case also allows the 2/n lattice offset.
    pub fn mean_matches(&self) -> bool {
        let slack = if self.ks.is_none() { self.line_tolerance } else { 0.0 };
        (self.mean - self.marginal.mean()).abs() <= 6.0 * self.std_error + slack + 1e-12
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Compares n⁻¹ṽᵀZ_⌊nt⌋ over N trajectories with the Gamma marginal of the
/// limit, or with the point b·t when σ² = 0.
pub fn marginal_convergence(model: &Model, n: u64, t: f64, cfg: &McConfig) -> Result<MarginalReport> {
    marginal_convergence_with_band(model, n, t, cfg, DEFAULT_BAND)
}

pub fn marginal_convergence_with_band(
    model: &Model,
    n: u64,
    t: f64,
    cfg: &McConfig,
    band: f64,
) -> Result<MarginalReport> {
    if n == 0 || !(t > 0.0) {
        return Err(Error::InvalidArgument("need n ≥ 1 and t > 0".into()));
    }
    let coefficients = ensure_critical(model, band)?;
    let b = coefficients.drift;
    let s2 = coefficients.diffusion;
    if !(b > 0.0) {
        return Err(Error::Precondition(format!("limit drift b = {b} must be positive")));
    }
    let degenerate = s2 <= 1e-12 * b.max(1.0);
    let marginal = if degenerate {
        GammaMarginal::DegenerateLine { value: b * t, t }
    } else {
        gamma_marginal(b, s2, t)?
    };
    let (samples, failures) = projected_samples(model, &coefficients.projection, n, t, cfg)?;
    if samples.is_empty() {
        return Err(Error::Precondition("every trajectory failed".into()));
    }
    let (mean, std_error) = mean_and_se(&samples);
    let line_tolerance = 2.0 / n as f64;
    let (ks, line_deviation) = if degenerate {
        let dev = samples.iter().map(|x| (x - b * t).abs()).fold(0.0, f64::max);
        (None, Some(dev))
    } else {
        (Some(ks_against_marginal(&samples, &marginal)?), None)
    };
    Ok(MarginalReport {
        n,
        t,
        coefficients,
        marginal,
        ks,
        line_deviation,
        line_tolerance,
        mean,
        std_error,
        completed: samples.len(),
        failures: failures.len(),
        samples,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub name: String,
    /// Mean generation index of each bin in the top decade.
    pub ks: Vec<f64>,
    /// Moment estimate averaged over each bin.
    pub values: Vec<f64>,
    pub fitted_exponent: Option<f64>,
    pub target_exponent: f64,
    pub accept_range: (f64, f64),
    /// All estimates are zero, e.g. a deterministic process.
    pub degenerate: bool,
}

impl GrowthReport {
    pub fn passes(&self) -> bool {
        self.degenerate
            || self
                .fitted_exponent
                .is_some_and(|e| e >= self.accept_range.0 && e <= self.accept_range.1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthCheck {
    pub k_max: usize,
    pub reports: Vec<GrowthReport>,
    pub completed: u64,
    pub failures: Vec<u64>,
}

struct MomentSums<'a> {
    model: &'a Model,
    k_max: usize,
}

struct MomentAcc {
    /// Per generation: ‖Z‖, ‖Z‖², ‖M‖², ‖M‖⁴.
    sums: Vec<[f64; 4]>,
    count: u64,
    errors: Vec<u64>,
}

impl Reducer for MomentSums<'_> {
    type Acc = MomentAcc;

    fn init(&self) -> MomentAcc {
        MomentAcc {
            sums: vec![[0.0; 4]; self.k_max + 1],
            count: 0,
            errors: Vec::new(),
        }
    }

    fn accept(&self, acc: &mut MomentAcc, traj: &Trajectory) {
        let Ok(diffs) = martingale_differences(traj, self.model) else {
            acc.errors.push(traj.seed_path.stream_id);
            return;
        };
        for (k, z) in traj.steps.iter().enumerate() {
            let zn = norm(&z.iter().map(|&x| x as f64).collect::<Vec<_>>());
            acc.sums[k][0] += zn;
            acc.sums[k][1] += zn * zn;
        }
        for (k, m) in diffs.iter().enumerate() {
            let m2 = m.iter().map(|x| x * x).sum::<f64>();
            acc.sums[k + 1][2] += m2;
            acc.sums[k + 1][3] += m2 * m2;
        }
        acc.count += 1;
    }

    fn merge(&self, acc: &mut MomentAcc, other: MomentAcc) {
        for (a, b) in acc.sums.iter_mut().zip(&other.sums) {
            for c in 0..4 {
                a[c] += b[c];
            }
        }
        acc.count += other.count;
        acc.errors.extend(other.errors);
    }
}

fn fit_top_decade(name: &str, series: &[f64], target: f64, range: (f64, f64)) -> GrowthReport {
    let k_max = series.len() - 1;
    let lo = (k_max as f64 / 10.0).max(1.0);
    let edges: Vec<f64> = (0..=10).map(|i| lo * (k_max as f64 / lo).powf(i as f64 / 10.0)).collect();
    let mut ks = Vec::new();
    let mut values = Vec::new();
    for b in 0..10 {
        let members: Vec<usize> = (lo.ceil() as usize..=k_max)
            .filter(|&k| {
                let kf = k as f64;
                kf >= edges[b] && (kf < edges[b + 1] || (b == 9 && k == k_max))
            })
            .collect();
        if members.is_empty() {
            continue;
        }
        let c = members.len() as f64;
        ks.push(members.iter().map(|&k| k as f64).sum::<f64>() / c);
        values.push(members.iter().map(|&k| series[k]).sum::<f64>() / c);
    }
    let degenerate = values.iter().all(|&v| v == 0.0);
    let fitted_exponent = if degenerate || ks.len() < 2 || values.iter().any(|&v| v <= 0.0) {
        None
    } else {
        let lx: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
        let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let n = lx.len() as f64;
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    };
    GrowthReport {
        name: name.to_string(),
        ks,
        values: values.iter().map(|v| v.max(0.0)).collect(),
        fitted_exponent,
        target_exponent: target,
        accept_range: range,
        degenerate,
    }
}

/// Monte Carlo estimates of E‖Z_k‖, E‖Z_k‖², E‖M_k‖², E‖M_k‖⁴ for k ≤ k_max,
/// with a log-log exponent fitted over bins of the top decade. The Z moments
/// are taken relative to their value at k = 0.
pub fn moment_growth_check(model: &Model, k_max: usize, cfg: &McConfig) -> Result<GrowthCheck> {
    if k_max < 10 {
        return Err(Error::InvalidArgument("k_max must be at least 10".into()));
    }
    let cfg = McConfig { steps: k_max, ..*cfg };
    let rep = monte_carlo(model, &cfg, &MomentSums { model, k_max })?;
    let acc = rep.acc;
    let mut failures: Vec<u64> = rep.failures.iter().map(|f| f.0).collect();
    failures.extend(&acc.errors);
    failures.sort_unstable();
    if acc.count == 0 {
        return Err(Error::Precondition("every trajectory failed".into()));
    }
    let c = acc.count as f64;
    let mean = |col: usize| -> Vec<f64> { acc.sums.iter().map(|s| s[col] / c).collect() };
    let relative = |col: usize| -> Vec<f64> {
        let m = mean(col);
        let base = m[0];
        m.iter().map(|x| x - base).collect()
    };
    let reports = vec![
        fit_top_decade("E‖Z_k‖", &relative(0), 1.0, (0.8, 1.2)),
        fit_top_decade("E‖Z_k‖²", &relative(1), 2.0, (1.7, 2.3)),
        fit_top_decade("E‖M_k‖²", &mean(2), 1.0, (0.8, 1.2)),
        fit_top_decade("E‖M_k‖⁴", &mean(3), 2.0, (1.7, 2.3)),
    ];
    Ok(GrowthCheck {
        k_max,
        reports,
        completed: acc.count,
        failures,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeFrequencyReport {
    pub i: usize,
    pub j: usize,
    pub delta: f64,
    /// Mean of 𝟙{Z_j≠0}·Z_i/Z_j over all trajectories.
    pub mean_ratio: f64,
    pub target: f64,
    /// Fraction of trajectories with Z_j ≠ 0 whose ratio lies within δ of the target.
    pub ratio_within: f64,
    /// Mean of 𝟙{Z≠0}·Z_i/ΣZ over all trajectories.
    pub mean_share: f64,
    pub share_target: f64,
    /// Fraction of nonextinct trajectories whose share lies within δ of ũ_i.
    pub share_within: f64,
    pub nonextinct: usize,
    pub completed: usize,
    pub failures: usize,
}

/// Type proportions at generation ⌊nt⌋ against the direction ũ. Indices are
/// zero-based.
#[allow(clippy::too_many_arguments)]
pub fn relative_frequency_check(
    model: &Model,
    n: u64,
    t: f64,
    cfg: &McConfig,
    i: usize,
    j: usize,
    delta: f64,
) -> Result<RelativeFrequencyReport> {
    let p = model.p();
    if i >= p || j >= p {
        return Err(Error::InvalidArgument(format!("type indices must be below {p}")));
    }
    let coeffs = ensure_critical(model, DEFAULT_BAND)?;
    if !(coeffs.drift > 0.0) {
        return Err(Error::Precondition("limit drift must be positive".into()));
    }
    let u = &coeffs.direction;
    let target = if u[j] > 0.0 { u[i] / u[j] } else { f64::INFINITY };
    let share_target = u[i];
    let k = generation_at(n, t);
    let cfg = McConfig { steps: k, ..*cfg };
    let rep = monte_carlo(
        model,
        &cfg,
        &Collect(|tr: &Trajectory| {
            let z = &tr.steps[k];
            let total: i64 = z.iter().sum();
            let ratio = (z[j] != 0).then(|| z[i] as f64 / z[j] as f64);
            let share = (total != 0).then(|| z[i] as f64 / total as f64);
            (ratio, share)
        }),
    )?;
    let rows = rep.acc;
    if rows.is_empty() {
        return Err(Error::Precondition("every trajectory failed".into()));
    }
    let total = rows.len() as f64;
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.0).collect();
    let shares: Vec<f64> = rows.iter().filter_map(|r| r.1).collect();
    let within = |xs: &[f64], c: f64| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().filter(|x| (*x - c).abs() <= delta).count() as f64 / xs.len() as f64
        }
    };
    Ok(RelativeFrequencyReport {
        i,
        j,
        delta,
        mean_ratio: ratios.iter().sum::<f64>() / total,
        target,
        ratio_within: within(&ratios, target),
        mean_share: shares.iter().sum::<f64>() / total,
        share_target,
        share_within: within(&shares, share_target),
        nonextinct: shares.len(),
        completed: rows.len(),
        failures: rep.failures.len(),
    })
}

/// Monte Carlo estimate of n⁻² Σ_{k≤⌊nT⌋} E[‖M_k‖² 𝟙{‖M_k‖ > nθ}].
pub fn lindeberg_diagnostic(model: &Model, n: u64, t_end: f64, theta: f64, cfg: &McConfig) -> Result<f64> {
    if !(theta > 0.0) || n == 0 || !(t_end > 0.0) {
        return Err(Error::InvalidArgument("need theta > 0, n ≥ 1, T > 0".into()));
    }
    let k = generation_at(n, t_end);
    let cfg = McConfig { steps: k, ..*cfg };
    let cut = n as f64 * theta;
    let rep = monte_carlo(
        model,
        &cfg,
        &Collect(|tr: &Trajectory| {
            martingale_differences(tr, model).map(|diffs| {
                diffs
                    .iter()
                    .map(|m| m.iter().map(|x| x * x).sum::<f64>())
                    .filter(|&m2| m2.sqrt() > cut)
                    .sum::<f64>()
            })
        }),
    )?;
    let vals: Vec<f64> = rep.acc.into_iter().collect::<Result<_>>()?;
    if vals.is_empty() {
        return Err(Error::Precondition("every trajectory failed".into()));
    }
    let nf = n as f64;
    Ok(vals.iter().sum::<f64>() / vals.len() as f64 / (nf * nf))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Ok,
    Failed,
    InsufficientSamples,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub model_hash: String,
    pub parameters: serde_json::Value,
    pub statistic: Option<f64>,
    pub p_value_or_exponent: Option<f64>,
    pub pass: bool,
    pub status: CheckStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub n: u64,
    pub t: f64,
    pub trajectories: u64,
    pub k_max: usize,
    pub growth_trajectories: u64,
    pub theta: f64,
    pub level: f64,
    pub delta: f64,
    /// Required fraction of nonextinct trajectories with share within δ.
    pub share_fraction: f64,
    pub master_seed: u64,
    pub tolerance_band: f64,
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            n: 500,
            t: 1.0,
            trajectories: 2000,
            k_max: 2000,
            growth_trajectories: 500,
            theta: 0.1,
            level: 0.01,
            delta: 0.05,
            share_fraction: 0.95,
            master_seed: 0,
            tolerance_band: DEFAULT_BAND,
            threads: None,
        }
    }
}

impl SuiteConfig {
    fn mc(&self, trajectories: u64) -> McConfig {
        McConfig {
            steps: 0,
            trajectories,
            master_seed: self.master_seed,
            threads: self.threads,
            options: Default::default(),
        }
    }
}

const STATISTICAL_CHECKS: [&str; 5] = [
    "marginal_convergence",
    "mean_identity",
    "moment_growth",
    "relative_frequency",
    "lindeberg",
];

/// Runs every check on a critical model. A model that is not critical is
/// refused with a precondition error.
pub fn run_suite(model: &Model, cfg: &SuiteConfig) -> Result<Vec<CheckReport>> {
    let crit = classify(model, cfg.tolerance_band);
    if crit.class != Criticality::Critical {
        return Err(Error::Precondition(format!(
            "the verification suite needs a critical model, this one is {:?} (spectral radius {})",
            crit.class, crit.rho
        )));
    }
    let hash = model.hash();
    let report = |check: &str, parameters: serde_json::Value, statistic, pv, pass: bool| CheckReport {
        check: check.to_string(),
        model_hash: hash.clone(),
        parameters,
        statistic,
        p_value_or_exponent: pv,
        pass,
        status: if pass { CheckStatus::Ok } else { CheckStatus::Failed },
    };
    let mut out = vec![report(
        "classification",
        json!({ "tolerance_band": cfg.tolerance_band }),
        Some(crit.rho),
        None,
        true,
    )];
    if cfg.trajectories < 2 || cfg.growth_trajectories < 2 {
        for check in STATISTICAL_CHECKS {
            out.push(CheckReport {
                check: check.to_string(),
                model_hash: hash.clone(),
                parameters: json!({ "trajectories": cfg.trajectories, "growth_trajectories": cfg.growth_trajectories }),
                statistic: None,
                p_value_or_exponent: None,
                pass: false,
                status: CheckStatus::InsufficientSamples,
            });
        }
        return Ok(out);
    }

    let mc = cfg.mc(cfg.trajectories);
    let marg = marginal_convergence_with_band(model, cfg.n, cfg.t, &mc, cfg.tolerance_band)?;
    let params = json!({
        "n": cfg.n, "t": cfg.t, "trajectories": cfg.trajectories, "master_seed": cfg.master_seed,
        "b": marg.coefficients.drift, "sigma2": marg.coefficients.diffusion, "level": cfg.level,
    });
    let (stat, pv) = match (marg.ks, marg.line_deviation) {
        (Some(ks), _) => (Some(ks.statistic), Some(ks.p_value)),
        (None, d) => (d, None),
    };
    out.push(report("marginal_convergence", params.clone(), stat, pv, marg.passes(cfg.level)));
    out.push(report(
        "mean_identity",
        params,
        Some(marg.mean),
        None,
        marg.failures == 0 && marg.mean_matches(),
    ));

    let growth = moment_growth_check(model, cfg.k_max, &cfg.mc(cfg.growth_trajectories))?;
    for g in &growth.reports {
        out.push(report(
            "moment_growth",
            json!({
                "moment": g.name, "k_max": cfg.k_max, "trajectories": cfg.growth_trajectories,
                "master_seed": cfg.master_seed, "target_exponent": g.target_exponent,
                "accept_range": [g.accept_range.0, g.accept_range.1], "degenerate": g.degenerate,
            }),
            g.values.last().copied(),
            g.fitted_exponent,
            growth.failures.is_empty() && g.passes(),
        ));
    }

    if model.p() >= 2 {
        let rf = relative_frequency_check(model, cfg.n, cfg.t, &mc, 0, 1, cfg.delta)?;
        out.push(report(
            "relative_frequency",
            json!({
                "n": cfg.n, "t": cfg.t, "i": 0, "j": 1, "delta": cfg.delta,
                "share_target": rf.share_target, "ratio_target": rf.target,
                "mean_share": rf.mean_share, "mean_ratio": rf.mean_ratio,
                "required_fraction": cfg.share_fraction, "master_seed": cfg.master_seed,
            }),
            Some(rf.share_within),
            None,
            rf.failures == 0 && rf.share_within >= cfg.share_fraction,
        ));
    }

    let lind = lindeberg_diagnostic(model, cfg.n, cfg.t, cfg.theta, &mc)?;
    out.push(report(
        "lindeberg",
        json!({ "n": cfg.n, "T": cfg.t, "theta": cfg.theta, "master_seed": cfg.master_seed }),
        Some(lind),
        None,
        lind.is_finite(),
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn single_point_distance() {
        let r = ks_test(&[0.5], |x| x.clamp(0.0, 1.0)).unwrap();
        assert_eq!(r.statistic, 0.5);
        assert!(ks_test(&[], |x| x).is_err());
    }

    #[test]
    fn kolmogorov_tail_values() {
        // P(K > 1.36) ≈ 0.049, P(K > 1.63) ≈ 0.0098
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.628) - 0.01).abs() < 1e-3);
        // both branches agree at the switch point
        let a = kolmogorov_sf(1.18 - 1e-12);
        let b = kolmogorov_sf(1.18);
        assert!((a - b).abs() < 1e-9);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        assert!(kolmogorov_sf(0.2) > 0.999_999);
    }

    #[test]
    fn ray_line_check() {
        let m = Model::new(presets::deterministic_ray()).unwrap();
        for n in [10, 100, 1000] {
            let r = marginal_convergence(&m, n, 1.0, &McConfig::new(0, 3, 0)).unwrap();
            assert!(r.ks.is_none());
            assert!(r.line_deviation.unwrap() <= 2.0 / n as f64);
            assert!(r.passes(0.01));
        }
    }

    #[test]
    fn ray_growth_is_linear() {
        let m = Model::new(presets::deterministic_ray()).unwrap();
        let g = moment_growth_check(&m, 500, &McConfig::new(0, 2, 0)).unwrap();
        assert!((g.reports[0].fitted_exponent.unwrap() - 1.0).abs() < 1e-6);
        assert!(g.reports[2].degenerate && g.reports[3].degenerate);
        assert!(g.reports.iter().all(GrowthReport::passes));
    }

    #[test]
    fn ratio_of_a_type_with_itself() {
        let m = Model::new(presets::two_sex_promiscuous_poisson(1.0, 1.0, 1.0, 1.5).unwrap()).unwrap();
        let r = relative_frequency_check(&m, 20, 1.0, &McConfig::new(0, 50, 1), 0, 0, 1e-12).unwrap();
        assert_eq!(r.ratio_within, 1.0);
        assert!(r.mean_ratio <= 1.0 && r.mean_ratio.is_finite());
    }

    #[test]
    fn lindeberg_on_deterministic_model() {
        let m = Model::new(presets::deterministic_ray()).unwrap();
        assert_eq!(lindeberg_diagnostic(&m, 50, 1.0, 0.1, &McConfig::new(0, 4, 0)).unwrap(), 0.0);
        let mig = Model::new(presets::uniform_migration(0.5, vec![5, 5])).unwrap();
        assert_eq!(lindeberg_diagnostic(&mig, 50, 1.0, 1e9, &McConfig::new(0, 4, 0)).unwrap(), 0.0);
    }

    #[test]
    fn suite_refuses_supercritical() {
        let mut spec = presets::deterministic_ray();
        spec.lambda = spec.lambda.scale(1.5);
        let m = Model::new(spec).unwrap();
        assert!(matches!(run_suite(&m, &SuiteConfig::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn suite_with_one_trajectory() {
        let m = Model::new(presets::deterministic_ray()).unwrap();
        let cfg = SuiteConfig { trajectories: 1, ..Default::default() };
        let r = run_suite(&m, &cfg).unwrap();
        assert!(r.iter().any(|c| c.status == CheckStatus::InsufficientSamples && !c.pass));
    }
}
