//! Discrete multivariate laws with exact sampling and closed-form moments.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Integer-valued law on ℤ^dim. Offspring laws are additionally required to
/// live on ℤ₊^dim, which the model checks through [`DiscreteLaw::support_min`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiscreteLaw {
    Deterministic {
        value: Vec<i64>,
    },
    Table {
        points: Vec<Vec<i64>>,
        probs: Vec<f64>,
    },
    /// Independent Poisson coordinates.
    Poisson {
        rates: Vec<f64>,
    },
    /// `vector` with probability q, the zero vector otherwise.
    BernoulliVector {
        vector: Vec<i64>,
        q: f64,
    },
    /// Independent blocks, concatenated in order.
    Product {
        factors: Vec<DiscreteLaw>,
    },
    Shifted {
        base: Box<DiscreteLaw>,
        offset: Vec<i64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentSummary {
    pub mean: Vec<f64>,
    pub cov: Matrix,
    pub fourth_central: Vec<f64>,
}

impl MomentSummary {
    pub fn zero(dim: usize) -> Self {
        MomentSummary {
            mean: vec![0.0; dim],
            cov: Matrix::zeros(dim),
            fourth_central: vec![0.0; dim],
        }
    }

    pub fn point(value: &[f64]) -> Self {
        MomentSummary {
            mean: value.to_vec(),
            ..MomentSummary::zero(value.len())
        }
    }
}

/// A sum of i.i.d. draws left the 64-bit signed range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountOverflow;

fn checked_scaled(count: u64, x: i64) -> std::result::Result<i64, CountOverflow> {
    i64::try_from(count)
        .ok()
        .and_then(|c| c.checked_mul(x))
        .ok_or(CountOverflow)
}

fn float_count(x: f64) -> std::result::Result<i64, CountOverflow> {
    // 2^63 is exactly representable; anything at or above it overflows
    if x >= 9.223_372_036_854_775_808e18 || !x.is_finite() {
        Err(CountOverflow)
    } else {
        Ok(x as i64)
    }
}

/// Poisson variate: inversion below rate 10, transformed rejection (PTRS)
/// above.
pub fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    if lambda < 10.0 {
        let mut k = 0.0;
        let mut prob = (-lambda).exp();
        let mut cum = prob;
        let u: f64 = rng.random();
        while u > cum {
            k += 1.0;
            prob *= lambda / k;
            cum += prob;
            if prob == 0.0 && cum < u {
                // lost to rounding in the far tail; restart the draw
                return sample_poisson(lambda, rng);
            }
        }
        return k;
    }
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln()
            <= -lambda + k * loglam - ln_gamma(k + 1.0)
        {
            return k;
        }
    }
}

fn binomial<R: Rng + ?Sized>(n: u64, q: f64, rng: &mut R) -> u64 {
    if n == 0 || q <= 0.0 {
        return 0;
    }
    if q >= 1.0 {
        return n;
    }
    Binomial::new(n, q).expect("valid binomial").sample(rng)
}

impl DiscreteLaw {
    pub fn deterministic(value: Vec<i64>) -> Self {
        DiscreteLaw::Deterministic { value }
    }

    pub fn poisson(rates: Vec<f64>) -> Self {
        DiscreteLaw::Poisson { rates }
    }

    pub fn table(points: Vec<Vec<i64>>, probs: Vec<f64>) -> Result<Self> {
        let law = DiscreteLaw::Table { points, probs };
        law.validate()?;
        Ok(law)
    }

    /// Uniform law on the integers lo..=hi (scalar).
    pub fn uniform_scalar(lo: i64, hi: i64) -> Self {
        let n = (hi - lo + 1) as usize;
        DiscreteLaw::Table {
            points: (lo..=hi).map(|x| vec![x]).collect(),
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn product(factors: Vec<DiscreteLaw>) -> Self {
        DiscreteLaw::Product { factors }
    }

    pub fn shifted(base: DiscreteLaw, offset: Vec<i64>) -> Self {
        DiscreteLaw::Shifted {
            base: Box::new(base),
            offset,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DiscreteLaw::Deterministic { value } => value.len(),
            DiscreteLaw::Table { points, .. } => points.first().map_or(0, |p| p.len()),
            DiscreteLaw::Poisson { rates } => rates.len(),
            DiscreteLaw::BernoulliVector { vector, .. } => vector.len(),
            DiscreteLaw::Product { factors } => factors.iter().map(|f| f.dim()).sum(),
            DiscreteLaw::Shifted { base, .. } => base.dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidLaw(msg));
        match self {
            DiscreteLaw::Deterministic { value } => {
                if value.is_empty() {
                    return bad("deterministic law needs a nonempty point".into());
                }
            }
            DiscreteLaw::Table { points, probs } => {
                if points.is_empty() || points.len() != probs.len() {
                    return bad("table needs equally many points and probabilities".into());
                }
                let d = points[0].len();
                if d == 0 || points.iter().any(|p| p.len() != d) {
                    return bad("table points must share one positive dimension".into());
                }
                if probs.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
                    return bad("table probabilities must be nonnegative".into());
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return bad(format!("table probabilities sum to {total}, not 1"));
                }
            }
            DiscreteLaw::Poisson { rates } => {
                if rates.is_empty() || rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                    return bad("poisson rates must be finite and nonnegative".into());
                }
            }
            DiscreteLaw::BernoulliVector { vector, q } => {
                if vector.is_empty() || !(0.0..=1.0).contains(q) {
                    return bad("bernoulli_vector needs a vector and q in [0, 1]".into());
                }
            }
            DiscreteLaw::Product { factors } => {
                if factors.is_empty() {
                    return bad("product needs at least one factor".into());
                }
                for f in factors {
                    f.validate()?;
                }
            }
            DiscreteLaw::Shifted { base, offset } => {
                base.validate()?;
                if offset.len() != base.dim() {
                    return bad("shift offset dimension differs from base law".into());
                }
            }
        }
        Ok(())
    }

    /// Coordinatewise minimum of the support.
    pub fn support_min(&self) -> Vec<i64> {
        match self {
            DiscreteLaw::Deterministic { value } => value.clone(),
            DiscreteLaw::Table { points, probs } => {
                let d = points[0].len();
                (0..d)
                    .map(|i| {
                        points
                            .iter()
                            .zip(probs)
                            .filter(|(_, q)| **q > 0.0)
                            .map(|(p, _)| p[i])
                            .min()
                            .unwrap_or(0)
                    })
                    .collect()
            }
            DiscreteLaw::Poisson { rates } => vec![0; rates.len()],
            DiscreteLaw::BernoulliVector { vector, q } => vector
                .iter()
                .map(|&w| if *q > 0.0 { w.min(0) } else { 0 })
                .collect(),
            DiscreteLaw::Product { factors } => {
                factors.iter().flat_map(|f| f.support_min()).collect()
            }
            DiscreteLaw::Shifted { base, offset } => base
                .support_min()
                .iter()
                .zip(offset)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// The same law with one extra coordinate fixed at `value`.
    pub fn with_extra_coordinate(&self, value: i64) -> DiscreteLaw {
        let append = |v: &[i64], x: i64| {
            let mut w = v.to_vec();
            w.push(x);
            w
        };
        match self {
            DiscreteLaw::Deterministic { value: v } => DiscreteLaw::deterministic(append(v, value)),
            DiscreteLaw::Table { points, probs } => DiscreteLaw::Table {
                points: points.iter().map(|p| append(p, value)).collect(),
                probs: probs.clone(),
            },
            DiscreteLaw::Poisson { rates } => {
                let mut r = rates.clone();
                r.push(0.0);
                let mut shift = vec![0; rates.len()];
                shift.push(value);
                DiscreteLaw::shifted(DiscreteLaw::Poisson { rates: r }, shift)
            }
            DiscreteLaw::BernoulliVector { vector, q } => {
                let mut shift = vec![0; vector.len()];
                shift.push(value);
                DiscreteLaw::shifted(
                    DiscreteLaw::BernoulliVector {
                        vector: append(vector, 0),
                        q: *q,
                    },
                    shift,
                )
            }
            DiscreteLaw::Product { factors } => {
                let mut f = factors.clone();
                f.push(DiscreteLaw::deterministic(vec![value]));
                DiscreteLaw::Product { factors: f }
            }
            DiscreteLaw::Shifted { base, offset } => {
                DiscreteLaw::shifted(base.with_extra_coordinate(0), append(offset, value))
            }
        }
    }

    pub fn moments(&self) -> MomentSummary {
        match self {
            DiscreteLaw::Deterministic { value } => {
                MomentSummary::point(&value.iter().map(|&x| x as f64).collect::<Vec<_>>())
            }
            DiscreteLaw::Table { points, probs } => {
                let d = points[0].len();
                let mut mean = vec![0.0; d];
                for (pt, q) in points.iter().zip(probs) {
                    for i in 0..d {
                        mean[i] += q * pt[i] as f64;
                    }
                }
                let mut cov = Matrix::zeros(d);
                let mut fourth = vec![0.0; d];
                for (pt, q) in points.iter().zip(probs) {
                    let c: Vec<f64> = (0..d).map(|i| pt[i] as f64 - mean[i]).collect();
                    for i in 0..d {
                        for j in 0..d {
                            cov[(i, j)] += q * c[i] * c[j];
                        }
                        fourth[i] += q * c[i].powi(4);
                    }
                }
                MomentSummary {
                    mean,
                    cov,
                    fourth_central: fourth,
                }
            }
            DiscreteLaw::Poisson { rates } => MomentSummary {
                mean: rates.clone(),
                cov: Matrix::diag(rates),
                fourth_central: rates.iter().map(|l| l * (1.0 + 3.0 * l)).collect(),
            },
            DiscreteLaw::BernoulliVector { vector, q } => {
                let w: Vec<f64> = vector.iter().map(|&x| x as f64).collect();
                // E(B - q)^4 for B ~ Bernoulli(q)
                let c4 = q * (1.0 - q) * (1.0 - 3.0 * q + 3.0 * q * q);
                MomentSummary {
                    mean: w.iter().map(|x| q * x).collect(),
                    cov: Matrix::outer(&w, &w).scale(q * (1.0 - q)),
                    fourth_central: w.iter().map(|x| c4 * x.powi(4)).collect(),
                }
            }
            DiscreteLaw::Product { factors } => {
                let d = self.dim();
                let mut out = MomentSummary::zero(d);
                let mut at = 0;
                for f in factors {
                    let m = f.moments();
                    let k = f.dim();
                    for i in 0..k {
                        out.mean[at + i] = m.mean[i];
                        out.fourth_central[at + i] = m.fourth_central[i];
                        for j in 0..k {
                            out.cov[(at + i, at + j)] = m.cov[(i, j)];
                        }
                    }
                    at += k;
                }
                out
            }
            DiscreteLaw::Shifted { base, offset } => {
                let mut m = base.moments();
                for (x, c) in m.mean.iter_mut().zip(offset) {
                    *x += *c as f64;
                }
                m
            }
        }
    }

    /// One draw written into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [i64]) {
        match self {
            DiscreteLaw::Deterministic { value } => out.copy_from_slice(value),
            DiscreteLaw::Table { points, probs } => {
                let u: f64 = rng.random();
                let mut cum = 0.0;
                let mut chosen = points.len() - 1;
                for (idx, q) in probs.iter().enumerate() {
                    cum += q;
                    if u < cum {
                        chosen = idx;
                        break;
                    }
                }
                out.copy_from_slice(&points[chosen]);
            }
            DiscreteLaw::Poisson { rates } => {
                for (o, &l) in out.iter_mut().zip(rates) {
                    *o = sample_poisson(l, rng) as i64;
                }
            }
            DiscreteLaw::BernoulliVector { vector, q } => {
                if rng.random::<f64>() < *q {
                    out.copy_from_slice(vector);
                } else {
                    out.iter_mut().for_each(|o| *o = 0);
                }
            }
            DiscreteLaw::Product { factors } => {
                let mut at = 0;
                for f in factors {
                    let k = f.dim();
                    f.sample_into(rng, &mut out[at..at + k]);
                    at += k;
                }
            }
            DiscreteLaw::Shifted { base, offset } => {
                base.sample_into(rng, out);
                for (o, c) in out.iter_mut().zip(offset) {
                    *o += c;
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<i64> {
        let mut out = vec![0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }

    /// Sum of `count` i.i.d. draws, sampled in aggregate: Poisson additivity,
    /// binomial thinning for Bernoulli vectors, multinomial counts over table
    /// support.
    pub fn sample_sum_into<R: Rng + ?Sized>(
        &self,
        count: u64,
        rng: &mut R,
        out: &mut [i64],
    ) -> std::result::Result<(), CountOverflow> {
        match self {
            DiscreteLaw::Deterministic { value } => {
                for (o, &x) in out.iter_mut().zip(value) {
                    *o = checked_scaled(count, x)?;
                }
            }
            DiscreteLaw::Table { points, probs } => {
                out.iter_mut().for_each(|o| *o = 0);
                let mut remaining = count;
                let mut mass = 1.0;
                for (idx, (pt, &q)) in points.iter().zip(probs).enumerate() {
                    if remaining == 0 {
                        break;
                    }
                    let hits = if idx + 1 == points.len() || q >= mass {
                        remaining
                    } else {
                        binomial(remaining, q / mass, rng)
                    };
                    mass -= q;
                    remaining -= hits;
                    for (o, &x) in out.iter_mut().zip(pt) {
                        *o = o.checked_add(checked_scaled(hits, x)?).ok_or(CountOverflow)?;
                    }
                }
            }
            DiscreteLaw::Poisson { rates } => {
                for (o, &l) in out.iter_mut().zip(rates) {
                    *o = float_count(sample_poisson(count as f64 * l, rng))?;
                }
            }
            DiscreteLaw::BernoulliVector { vector, q } => {
                let hits = binomial(count, *q, rng);
                for (o, &x) in out.iter_mut().zip(vector) {
                    *o = checked_scaled(hits, x)?;
                }
            }
            DiscreteLaw::Product { factors } => {
                let mut at = 0;
                for f in factors {
                    let k = f.dim();
                    f.sample_sum_into(count, rng, &mut out[at..at + k])?;
                    at += k;
                }
            }
            DiscreteLaw::Shifted { base, offset } => {
                base.sample_sum_into(count, rng, out)?;
                for (o, &c) in out.iter_mut().zip(offset) {
                    *o = o.checked_add(checked_scaled(count, c)?).ok_or(CountOverflow)?;
                }
            }
        }
        Ok(())
    }

    /// Sum of `count` i.i.d. draws, one draw at a time.
    pub fn sample_sum_naive_into<R: Rng + ?Sized>(
        &self,
        count: u64,
        rng: &mut R,
        out: &mut [i64],
    ) -> std::result::Result<(), CountOverflow> {
        out.iter_mut().for_each(|o| *o = 0);
        let mut draw = vec![0; out.len()];
        for _ in 0..count {
            self.sample_into(rng, &mut draw);
            for (o, &x) in out.iter_mut().zip(&draw) {
                *o = o.checked_add(x).ok_or(CountOverflow)?;
            }
        }
        Ok(())
    }
}

/// E[(A_1 + … + A_B)^4] for i.i.d. zero-mean A independent of the count B,
/// given Var A, E A^4, E B and Var B.
pub fn fourth_moment_random_sum(sigma2_a: f64, zeta_a: f64, mu_b: f64, gamma_b: f64) -> Result<f64> {
    let args = [sigma2_a, zeta_a, mu_b, gamma_b];
    if args.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("moments must be finite".into()));
    }
    if sigma2_a < 0.0 || gamma_b < 0.0 || mu_b < 0.0 {
        return Err(Error::InvalidArgument(
            "variances and the mean count must be nonnegative".into(),
        ));
    }
    if zeta_a < sigma2_a * sigma2_a * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(
            "fourth moment is below the squared variance".into(),
        ));
    }
    let s2 = sigma2_a * sigma2_a;
    Ok(3.0 * s2 * (gamma_b + mu_b * mu_b) + (zeta_a - 3.0 * s2) * mu_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_law() {
        let law = DiscreteLaw::deterministic(vec![3, 0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            assert_eq!(law.sample(&mut rng), vec![3, 0]);
        }
        let m = law.moments();
        assert_eq!(m.mean, vec![3.0, 0.0]);
        assert_eq!(m.cov, Matrix::zeros(2));
        assert_eq!(m.fourth_central, vec![0.0, 0.0]);
    }

    #[test]
    fn table_frequency() {
        let law = DiscreteLaw::table(vec![vec![0, 0], vec![1, 1]], vec![0.5, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let hits = (0..100_000)
            .filter(|_| law.sample(&mut rng) == vec![1, 1])
            .count();
        assert!((hits as f64 / 1e5 - 0.5).abs() < 0.01);
    }

    #[test]
    fn poisson_mean() {
        let law = DiscreteLaw::poisson(vec![2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: i64 = (0..100_000).map(|_| law.sample(&mut rng)[0]).sum();
        assert!((s as f64 / 1e5 - 2.0).abs() < 0.03);
    }

    #[test]
    fn uniform_migration_moments() {
        let m = DiscreteLaw::uniform_scalar(-1, 1).moments();
        assert!(m.mean[0].abs() < 1e-15);
        assert!((m.cov[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.fourth_central[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn poisson_fourth_moment_against_truncated_series() {
        for lambda in [1.0, 0.3, 4.0] {
            let mut pk = (-lambda as f64).exp();
            let mut sum = 0.0;
            for k in 0..=50 {
                if k > 0 {
                    pk *= lambda / k as f64;
                }
                sum += (k as f64 - lambda).powi(4) * pk;
            }
            let m = DiscreteLaw::poisson(vec![lambda]).moments();
            assert!((m.fourth_central[0] - sum).abs() < 1e-12, "{lambda}");
        }
        assert_eq!(DiscreteLaw::poisson(vec![1.0]).moments().fourth_central[0], 4.0);
    }

    #[test]
    fn bernoulli_fourth_moment_matches_table() {
        let b = DiscreteLaw::BernoulliVector { vector: vec![2, -1], q: 0.3 };
        let t = DiscreteLaw::table(vec![vec![0, 0], vec![2, -1]], vec![0.7, 0.3]).unwrap();
        let (mb, mt) = (b.moments(), t.moments());
        for i in 0..2 {
            assert!((mb.mean[i] - mt.mean[i]).abs() < 1e-14);
            assert!((mb.fourth_central[i] - mt.fourth_central[i]).abs() < 1e-14);
        }
        assert!(mb.cov.max_abs_diff(&mt.cov) < 1e-14);
    }

    #[test]
    fn random_sum_examples() {
        assert_eq!(fourth_moment_random_sum(1.0, 1.0, 2.0, 0.0).unwrap(), 8.0);
        assert_eq!(fourth_moment_random_sum(1.0, 1.0, 1.0, 1.0).unwrap(), 4.0);
        assert_eq!(fourth_moment_random_sum(0.0, 0.0, 3.0, 2.0).unwrap(), 0.0);
        assert!(fourth_moment_random_sum(1.0, 0.5, 1.0, 1.0).is_err());
        assert!(fourth_moment_random_sum(1.0, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn extra_coordinate_keeps_distribution() {
        let laws = [
            DiscreteLaw::poisson(vec![1.5, 0.5]),
            DiscreteLaw::BernoulliVector { vector: vec![1, 1], q: 0.5 },
            DiscreteLaw::product(vec![DiscreteLaw::uniform_scalar(0, 2), DiscreteLaw::poisson(vec![1.0])]),
            DiscreteLaw::shifted(DiscreteLaw::poisson(vec![1.0, 2.0]), vec![0, 1]),
        ];
        for law in laws {
            let ext = law.with_extra_coordinate(1);
            ext.validate().unwrap();
            assert_eq!(ext.dim(), law.dim() + 1);
            let (a, b) = (law.moments(), ext.moments());
            assert_eq!(&b.mean[..law.dim()], &a.mean[..]);
            assert_eq!(b.mean[law.dim()], 1.0);
            assert_eq!(b.cov[(law.dim(), law.dim())], 0.0);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            assert!((0..100).all(|_| ext.sample(&mut rng)[law.dim()] == 1));
        }
    }

    #[test]
    fn serde_shape() {
        let law = DiscreteLaw::poisson(vec![1.0, 2.0]);
        let s = serde_json::to_string(&law).unwrap();
        assert_eq!(s, r#"{"kind":"poisson","params":{"rates":[1.0,2.0]}}"#);
        assert_eq!(serde_json::from_str::<DiscreteLaw>(&s).unwrap(), law);
        assert!(serde_json::from_str::<DiscreteLaw>(
            r#"{"kind":"poisson","params":{"rates":[1.0]},"extra":1}"#
        )
        .is_err());
        assert!(serde_json::from_str::<DiscreteLaw>(
            r#"{"kind":"poisson","params":{"rates":[1.0],"mean":1}}"#
        )
        .is_err());
    }

    #[test]
    fn validation() {
        assert!(DiscreteLaw::table(vec![vec![0], vec![1]], vec![0.5, 0.6]).is_err());
        assert!(DiscreteLaw::poisson(vec![-1.0]).validate().is_err());
        assert!(DiscreteLaw::shifted(DiscreteLaw::poisson(vec![1.0]), vec![1, 2]).validate().is_err());
    }

    #[test]
    fn aggregate_overflow_is_reported() {
        let law = DiscreteLaw::deterministic(vec![i64::MAX / 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut out = [0];
        assert_eq!(law.sample_sum_into(3, &mut rng, &mut out), Err(CountOverflow));
        assert!(law.sample_sum_into(2, &mut rng, &mut out).is_ok());
    }
}
