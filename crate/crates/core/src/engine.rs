//! Trajectory simulation, the step processes built from a trajectory, and
//! reproducible parallel Monte Carlo.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::CountOverflow;
use crate::linalg::Matrix;
use crate::model::Model;
use crate::rng::{slot_offspring, StreamKey, SLOT_CONTROL, SLOT_INITIAL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPath {
    pub master_seed: u64,
    pub stream_id: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    pub p: usize,
    /// Z_0, …, Z_K.
    pub steps: Vec<Vec<i64>>,
    pub seed_path: SeedPath,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Sum offspring one draw at a time instead of sampling the sum directly.
    pub naive_summation: bool,
}

/// One generation: draws φ(z), then the offspring of every controlled unit.
pub fn step(
    model: &Model,
    z: &[i64],
    key: &StreamKey,
    generation: u64,
    options: SimOptions,
) -> std::result::Result<Vec<i64>, StepError> {
    let p = model.p();
    let mut phi = vec![0; p];
    let mut rng = key.substream(generation, SLOT_CONTROL);
    model
        .spec()
        .control
        .sample_into(z, &mut rng, &mut phi)
        .map_err(StepError::Control)?;
    let mut next = vec![0_i64; p];
    let mut part = vec![0_i64; p];
    for (i, law) in model.spec().offspring.iter().enumerate() {
        let count = u64::try_from(phi[i]).map_err(|_| {
            StepError::Control(Error::InvalidControl("control produced a negative count".into()))
        })?;
        if count == 0 {
            continue;
        }
        let mut rng = key.substream(generation, slot_offspring(i));
        if options.naive_summation {
            law.sample_sum_naive_into(count, &mut rng, &mut part)
        } else {
            law.sample_sum_into(count, &mut rng, &mut part)
        }
        .map_err(|CountOverflow| StepError::Overflow)?;
        for (a, b) in next.iter_mut().zip(&part) {
            *a = a.checked_add(*b).ok_or(StepError::Overflow)?;
        }
    }
    Ok(next)
}

#[derive(Debug)]
pub enum StepError {
    Overflow,
    Control(Error),
}

/// Z_0, …, Z_K for one stream.
pub fn simulate_trajectory(model: &Model, k: usize, stream_id: u64, master_seed: u64) -> Result<Trajectory> {
    simulate_trajectory_with(model, k, stream_id, master_seed, SimOptions::default())
}

pub fn simulate_trajectory_with(
    model: &Model,
    k: usize,
    stream_id: u64,
    master_seed: u64,
    options: SimOptions,
) -> Result<Trajectory> {
    let key = StreamKey::new(master_seed, stream_id);
    let z0 = model
        .spec()
        .z0
        .sample(&mut key.substream(0, SLOT_INITIAL));
    let mut steps = Vec::with_capacity(k + 1);
    steps.push(z0);
    for generation in 0..k as u64 {
        let next = step(model, steps.last().unwrap(), &key, generation, options).map_err(|e| match e {
            StepError::Overflow => Error::Overflow {
                stream_id,
                generation: generation + 1,
            },
            StepError::Control(e) => e,
        })?;
        steps.push(next);
    }
    Ok(Trajectory {
        p: model.p(),
        steps,
        seed_path: SeedPath {
            master_seed,
            stream_id,
        },
    })
}

/// Piecewise constant path, value `values[k]` on [k/n, (k+1)/n).
#[derive(Clone, Debug, PartialEq)]
pub struct StepPath {
    pub n: u64,
    pub values: Vec<Vec<f64>>,
}

impl StepPath {
    /// Value at time t, index ⌊nt⌋.
    pub fn eval(&self, t: f64) -> Option<&[f64]> {
        if !(t >= 0.0) {
            return None;
        }
        let idx = (self.n as f64 * t).floor();
        self.values.get(idx as usize).map(|v| v.as_slice())
    }

    /// Value at the rational time num/den, index computed in integers.
    pub fn eval_rational(&self, num: u64, den: u64) -> Option<&[f64]> {
        let idx = (self.n as u128 * num as u128) / den as u128;
        self.values.get(usize::try_from(idx).ok()?).map(|v| v.as_slice())
    }

    pub fn max_abs_diff(&self, other: &StepPath) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Z_k / n.
pub fn scaled_path(traj: &Trajectory, n: u64) -> StepPath {
    let nf = n as f64;
    StepPath {
        n,
        values: traj
            .steps
            .iter()
            .map(|z| z.iter().map(|&x| x as f64 / nf).collect())
            .collect(),
    }
}

/// M_k = Z_k − m ε(Z_{k−1}) for k = 1..K.
pub fn martingale_differences(traj: &Trajectory, model: &Model) -> Result<Vec<Vec<f64>>> {
    traj.steps
        .windows(2)
        .map(|w| {
            let mean = model.conditional_mean(&w[0])?;
            Ok(w[1].iter().zip(&mean).map(|(&z, m)| z as f64 - m).collect())
        })
        .collect()
}

/// n⁻¹(Z_0 + Σ_{j≤k} M_j).
pub fn martingale_step_path(traj: &Trajectory, n: u64, model: &Model) -> Result<StepPath> {
    let nf = n as f64;
    let diffs = martingale_differences(traj, model)?;
    let mut acc: Vec<f64> = traj.steps[0].iter().map(|&x| x as f64).collect();
    let mut values = vec![acc.iter().map(|x| x / nf).collect::<Vec<_>>()];
    for d in diffs {
        for (a, x) in acc.iter_mut().zip(&d) {
            *a += x;
        }
        values.push(acc.iter().map(|x| x / nf).collect());
    }
    Ok(StepPath { n, values })
}

fn powers(a: &Matrix, k: usize) -> Vec<Matrix> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(Matrix::identity(a.dim()));
    for i in 1..=k {
        let next = out[i - 1].mul(a);
        out.push(next);
    }
    out
}

/// Ψₙ(f)(k/n) = m̃^k f(0) + Σ_{j=1}^k m̃^{k−j}(f(j/n) − f((j−1)/n) + n⁻¹mα),
/// summed term by term for each lattice index k.
pub fn psi_n(f: &StepPath, model: &Model) -> StepPath {
    let k_max = f.values.len().saturating_sub(1);
    let pw = powers(model.m_tilde(), k_max);
    let nf = f.n as f64;
    let drift: Vec<f64> = model.m_alpha().iter().map(|x| x / nf).collect();
    let increments: Vec<Vec<f64>> = (1..=k_max)
        .map(|j| {
            (0..drift.len())
                .map(|c| f.values[j][c] - f.values[j - 1][c] + drift[c])
                .collect()
        })
        .collect();
    let values = (0..=k_max)
        .map(|k| {
            let mut acc = pw[k].mul_vec(&f.values[0]);
            for j in 1..=k {
                let term = pw[k - j].mul_vec(&increments[j - 1]);
                for (a, t) in acc.iter_mut().zip(&term) {
                    *a += t;
                }
            }
            acc
        })
        .collect();
    StepPath { n: f.n, values }
}

/// Ψ(f)(t) = Π̃(f(t) + t·mα) at a single time.
pub fn psi_limit_at(pi: &Matrix, m_alpha: &[f64], f_t: &[f64], t: f64) -> Vec<f64> {
    let shifted: Vec<f64> = f_t.iter().zip(m_alpha).map(|(f, a)| f + t * a).collect();
    pi.mul_vec(&shifted)
}

/// Ψ applied to a step path at its lattice times k/n.
pub fn psi_limit(f: &StepPath, pi: &Matrix, m_alpha: &[f64]) -> StepPath {
    let nf = f.n as f64;
    StepPath {
        n: f.n,
        values: f
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| psi_limit_at(pi, m_alpha, v, k as f64 / nf))
            .collect(),
    }
}

/// V⁽ⁿ⁾(k/n) = n⁻¹ Σ_{j=1}^k m̃^{k−j} m g(Z_{j−1}).
pub fn v_n(traj: &Trajectory, n: u64, model: &Model) -> Result<StepPath> {
    let k_max = traj.steps.len().saturating_sub(1);
    let pw = powers(model.m_tilde(), k_max);
    let nf = n as f64;
    let forcing: Vec<Vec<f64>> = traj.steps[..k_max]
        .iter()
        .map(|z| Ok(model.mean_matrix().mul_vec(&model.implied_g(z)?)))
        .collect::<Result<_>>()?;
    let p = model.p();
    let values = (0..=k_max)
        .map(|k| {
            let mut acc = vec![0.0; p];
            for j in 1..=k {
                let term = pw[k - j].mul_vec(&forcing[j - 1]);
                for (a, t) in acc.iter_mut().zip(&term) {
                    *a += t;
                }
            }
            acc.iter().map(|x| x / nf).collect()
        })
        .collect();
    Ok(StepPath { n, values })
}

/// Number of steps needed to reach time T at scale n, ⌈nT⌉.
pub fn steps_for(n: u64, t: f64) -> usize {
    let x = n as f64 * t;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Folds simulated trajectories into an accumulator. Trajectories are handed
/// to `accept` in ascending stream order within fixed blocks, and blocks are
/// merged in ascending order, so the result does not depend on scheduling.
pub trait Reducer: Sync {
    type Acc: Send;
    fn init(&self) -> Self::Acc;
    fn accept(&self, acc: &mut Self::Acc, traj: &Trajectory);
    fn merge(&self, acc: &mut Self::Acc, other: Self::Acc);
}

/// Collects one value per trajectory, in stream order.
pub struct Collect<F>(pub F);

impl<T: Send, F: Fn(&Trajectory) -> T + Sync> Reducer for Collect<F> {
    type Acc = Vec<T>;

    fn init(&self) -> Vec<T> {
        Vec::new()
    }

    fn accept(&self, acc: &mut Vec<T>, traj: &Trajectory) {
        acc.push((self.0)(traj));
    }

    fn merge(&self, acc: &mut Vec<T>, other: Vec<T>) {
        acc.extend(other);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub steps: usize,
    pub trajectories: u64,
    pub master_seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub options: SimOptions,
}

impl McConfig {
    pub fn new(steps: usize, trajectories: u64, master_seed: u64) -> Self {
        McConfig {
            steps,
            trajectories,
            master_seed,
            threads: None,
            options: SimOptions::default(),
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }
}

#[derive(Debug)]
pub struct McReport<A> {
    pub acc: A,
    pub completed: u64,
    /// Stream ids whose trajectory was aborted, with the reason.
    pub failures: Vec<(u64, Error)>,
}

const BLOCK: u64 = 256;

/// Runs trajectories with stream ids 0..N and reduces them.
pub fn monte_carlo<R: Reducer>(model: &Model, cfg: &McConfig, reducer: &R) -> Result<McReport<R::Acc>> {
    if cfg.trajectories == 0 {
        return Err(Error::InvalidArgument("at least one trajectory is required".into()));
    }
    let run = || {
        let blocks = cfg.trajectories.div_ceil(BLOCK);
        let parts: Vec<(R::Acc, u64, Vec<(u64, Error)>)> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut acc = reducer.init();
                let mut done = 0;
                let mut failed = Vec::new();
                let end = ((b + 1) * BLOCK).min(cfg.trajectories);
                for sid in b * BLOCK..end {
                    match simulate_trajectory_with(model, cfg.steps, sid, cfg.master_seed, cfg.options) {
                        Ok(t) => {
                            reducer.accept(&mut acc, &t);
                            done += 1;
                        }
                        Err(e) => failed.push((sid, e)),
                    }
                }
                (acc, done, failed)
            })
            .collect();
        let mut acc = reducer.init();
        let mut completed = 0;
        let mut failures = Vec::new();
        for (a, d, f) in parts {
            reducer.merge(&mut acc, a);
            completed += d;
            failures.extend(f);
        }
        McReport {
            acc,
            completed,
            failures,
        }
    };
    match cfg.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}

/// Writes trajectories as CSV rows trajectory_id,k,Z_1,…,Z_p.
pub fn write_trajectories_csv<W: Write>(mut w: W, trajs: &[Trajectory]) -> std::io::Result<()> {
    let p = trajs.first().map_or(0, |t| t.p);
    let mut header = String::from("trajectory_id,k");
    for i in 1..=p {
        header.push_str(&format!(",Z_{i}"));
    }
    writeln!(w, "{header}")?;
    for t in trajs {
        for (k, z) in t.steps.iter().enumerate() {
            write!(w, "{},{}", t.seed_path.stream_id, k)?;
            for x in z {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}
