//! Dense square matrices of small dimension and the Perron–Frobenius machinery
//! used to classify a model.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    p: usize,
    data: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(&rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.p + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.p + j]
    }
}

impl Matrix {
    pub fn zeros(p: usize) -> Self {
        Matrix {
            p,
            data: vec![0.0; p * p],
        }
    }

    pub fn identity(p: usize) -> Self {
        let mut m = Matrix::zeros(p);
        for i in 0..p {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Matrix::zeros(d.len());
        for (i, x) in d.iter().enumerate() {
            m[(i, i)] = *x;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        if p == 0 {
            return Err(Error::Dimension("matrix must have at least one row".into()));
        }
        let mut data = Vec::with_capacity(p * p);
        for r in rows {
            if r.len() != p {
                return Err(Error::Dimension(format!(
                    "expected square {p}x{p} matrix, found a row of length {}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("matrix entries must be finite".into()));
        }
        Ok(Matrix { p, data })
    }

    /// Matrix whose j-th column is `cols[j]`.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        Ok(Matrix::from_rows(cols)?.transpose())
    }

    pub fn outer(u: &[f64], v: &[f64]) -> Self {
        assert_eq!(u.len(), v.len());
        let p = u.len();
        let mut m = Matrix::zeros(p);
        for i in 0..p {
            for j in 0..p {
                m[(i, j)] = u[i] * v[j];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.p).map(|r| r.to_vec()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.p).map(|i| self[(i, j)]).collect()
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Matrix::zeros(self.p);
        for i in 0..self.p {
            for j in 0..self.p {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.p, other.p, "matrix dimensions differ");
        let p = self.p;
        let mut out = Matrix::zeros(p);
        for i in 0..p {
            for k in 0..p {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..p {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.p, x.len(), "vector length differs from matrix dimension");
        (0..self.p)
            .map(|i| (0..self.p).map(|j| self[(i, j)] * x[j]).sum())
            .collect()
    }

    /// Row vector times matrix, xᵀA.
    pub fn vec_mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.p, x.len(), "vector length differs from matrix dimension");
        (0..self.p)
            .map(|j| (0..self.p).map(|i| x[i] * self[(i, j)]).sum())
            .collect()
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.p, other.p);
        Matrix {
            p: self.p,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.p, other.p);
        Matrix {
            p: self.p,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            p: self.p,
            data: self.data.iter().map(|a| a * c).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Matrix {
        let mut result = Matrix::identity(self.p);
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    pub fn trace(&self) -> f64 {
        (0..self.p).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.p, other.p);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Operator 2-norm, the largest singular value.
    pub fn norm2(&self) -> f64 {
        let gram = self.transpose().mul(self);
        let top = symmetric_eigenvalues(&gram)
            .into_iter()
            .fold(0.0_f64, f64::max);
        top.max(0.0).sqrt()
    }
}

/// Euclidean norm of a vector.
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Eigenvalue data of a nonnegative matrix with a simple dominant eigenvalue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub rho: f64,
    /// Right eigenvector, coordinates summing to one.
    pub u: Vec<f64>,
    /// Left eigenvector scaled so that vᵀu = 1.
    pub v: Vec<f64>,
    pub pi: Matrix,
    pub second_modulus: f64,
}

/// Primitivity test via the Wielandt exponent on the zero pattern.
pub fn is_primitive(a: &Matrix) -> Result<bool> {
    if a.entries().iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidArgument(
            "primitivity is defined for nonnegative matrices only".into(),
        ));
    }
    let p = a.dim();
    let pattern: Vec<bool> = a.entries().iter().map(|&x| x > 0.0).collect();
    let exponent = (p - 1) * (p - 1) + 1;
    let bool_mul = |x: &[bool], y: &[bool]| -> Vec<bool> {
        let mut out = vec![false; p * p];
        for i in 0..p {
            for j in 0..p {
                out[i * p + j] = (0..p).any(|k| x[i * p + k] && y[k * p + j]);
            }
        }
        out
    };
    let mut result: Option<Vec<bool>> = None;
    let mut base = pattern;
    let mut e = exponent;
    while e > 0 {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => bool_mul(&r, &base),
            });
        }
        e >>= 1;
        if e > 0 {
            base = bool_mul(&base, &base);
        }
    }
    Ok(result.map(|r| r.iter().all(|&b| b)).unwrap_or(false))
}

/// Coefficients c_0..c_p (ascending, c_p = 1) of det(λI − A).
pub fn characteristic_polynomial(a: &Matrix) -> Vec<f64> {
    let p = a.dim();
    let mut c = vec![0.0; p + 1];
    c[p] = 1.0;
    if p == 2 {
        c[1] = -a.trace();
        c[0] = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
        return c;
    }
    // Faddeev–LeVerrier
    let mut mk = Matrix::zeros(p);
    for k in 1..=p {
        let mut next = a.mul(&mk);
        for i in 0..p {
            next[(i, i)] += c[p - k + 1];
        }
        mk = next;
        c[p - k] = -a.mul(&mk).trace() / k as f64;
    }
    c
}

fn horner(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut val = Complex64::new(0.0, 0.0);
    let mut der = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        der = der * z + val;
        val = val * z + c;
    }
    (val, der)
}

/// Roots of a monic polynomial given by ascending coefficients.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let d = coeffs.len() - 1;
    match d {
        0 => vec![],
        1 => vec![Complex64::new(-coeffs[0], 0.0)],
        2 => {
            let (b, c) = (coeffs[1], coeffs[0]);
            let disc = b * b - 4.0 * c;
            if disc >= 0.0 {
                let q = -0.5 * (b + b.signum() * disc.sqrt());
                if q == 0.0 {
                    vec![Complex64::new(0.0, 0.0); 2]
                } else {
                    vec![Complex64::new(q, 0.0), Complex64::new(c / q, 0.0)]
                }
            } else {
                let im = 0.5 * (-disc).sqrt();
                vec![Complex64::new(-0.5 * b, im), Complex64::new(-0.5 * b, -im)]
            }
        }
        _ => aberth(coeffs),
    }
}

fn aberth(coeffs: &[f64]) -> Vec<Complex64> {
    let d = coeffs.len() - 1;
    let radius = 1.0 + coeffs[..d].iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / d as f64 + 0.4;
            Complex64::from_polar(0.5 * radius, theta)
        })
        .collect();
    for _ in 0..1000 {
        let mut biggest = 0.0_f64;
        for k in 0..d {
            let (val, der) = horner(coeffs, z[k]);
            if val.norm() == 0.0 {
                continue;
            }
            let ratio = val / der;
            let repulsion: Complex64 = (0..d)
                .filter(|&j| j != k)
                .map(|j| {
                    let diff = z[k] - z[j];
                    if diff.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        1.0 / diff
                    }
                })
                .sum();
            let step = ratio / (1.0 - ratio * repulsion);
            if step.is_finite() {
                z[k] -= step;
                biggest = biggest.max(step.norm() / (1.0 + z[k].norm()));
            }
        }
        if biggest < 1e-16 {
            break;
        }
    }
    // Newton polishing, kept only when it lowers the residual
    for root in z.iter_mut() {
        for _ in 0..3 {
            let (val, der) = horner(coeffs, *root);
            if der.norm() == 0.0 {
                break;
            }
            let cand = *root - val / der;
            if horner(coeffs, cand).0.norm() < val.norm() {
                *root = cand;
            } else {
                break;
            }
        }
        if root.im.abs() <= 1e-13 * (1.0 + root.re.abs()) {
            root.im = 0.0;
        }
    }
    z
}

/// All eigenvalues, unordered.
pub fn eigenvalues(a: &Matrix) -> Vec<Complex64> {
    let p = a.dim();
    if p == 1 {
        return vec![Complex64::new(a[(0, 0)], 0.0)];
    }
    if p <= 4 {
        return polynomial_roots(&characteristic_polynomial(a));
    }
    let m = nalgebra::DMatrix::from_row_slice(p, p, a.entries());
    m.complex_eigenvalues()
        .iter()
        .map(|c| Complex64::new(c.re, c.im))
        .collect()
}

pub fn spectral_radius(a: &Matrix) -> f64 {
    eigenvalues(a).iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(s: &Matrix) -> Vec<f64> {
    let p = s.dim();
    let mut a = s.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off <= 1e-30 * (1.0 + a.max_abs() * a.max_abs()) {
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let aij = a[(i, j)];
                if aij == 0.0 {
                    continue;
                }
                let theta = (a[(j, j)] - a[(i, i)]) / (2.0 * aij);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s_ = t * c;
                for k in 0..p {
                    let aki = a[(k, i)];
                    let akj = a[(k, j)];
                    a[(k, i)] = c * aki - s_ * akj;
                    a[(k, j)] = s_ * aki + c * akj;
                }
                for k in 0..p {
                    let aik = a[(i, k)];
                    let ajk = a[(j, k)];
                    a[(i, k)] = c * aik - s_ * ajk;
                    a[(j, k)] = s_ * aik + c * ajk;
                }
            }
        }
    }
    (0..p).map(|i| a[(i, i)]).collect()
}

/// Solves B x = b in place with partial pivoting. Zero pivots are nudged to a
/// tiny value, which is what inverse iteration wants.
fn solve_nudged(b_mat: &Matrix, rhs: &[f64]) -> Vec<f64> {
    let p = b_mat.dim();
    let mut a = b_mat.clone();
    let mut x = rhs.to_vec();
    let tiny = f64::EPSILON * (1.0 + b_mat.max_abs()) * 1e-3;
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
            .unwrap();
        if piv != col {
            for k in 0..p {
                let tmp = a[(col, k)];
                a[(col, k)] = a[(piv, k)];
                a[(piv, k)] = tmp;
            }
            x.swap(col, piv);
        }
        if a[(col, col)].abs() < tiny {
            a[(col, col)] = tiny;
        }
        for i in (col + 1)..p {
            let f = a[(i, col)] / a[(col, col)];
            if f == 0.0 {
                continue;
            }
            for k in col..p {
                a[(i, k)] -= f * a[(col, k)];
            }
            x[i] -= f * x[col];
        }
    }
    for i in (0..p).rev() {
        let s: f64 = ((i + 1)..p).map(|k| a[(i, k)] * x[k]).sum();
        x[i] = (x[i] - s) / a[(i, i)];
    }
    x
}

fn inverse_iteration(a: &Matrix, lambda: f64) -> Vec<f64> {
    let p = a.dim();
    let shift = lambda + 1e-13 * (1.0 + lambda.abs());
    let shifted = a.sub(&Matrix::identity(p).scale(shift));
    let mut x: Vec<f64> = (0..p).map(|i| 1.0 + 0.1 * i as f64).collect();
    for _ in 0..8 {
        let y = solve_nudged(&shifted, &x);
        let n = norm(&y);
        if !(n.is_finite() && n > 0.0) {
            break;
        }
        let y: Vec<f64> = y.iter().map(|c| c / n).collect();
        let same = y.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-15)
            || y.iter().zip(&x).all(|(a, b)| (a + b).abs() < 1e-15);
        x = y;
        if same {
            break;
        }
    }
    x
}

fn power_iteration(a: &Matrix) -> Result<(f64, Vec<f64>)> {
    let p = a.dim();
    let mut x = vec![1.0 / p as f64; p];
    let mut rho = 0.0;
    for _ in 0..100_000 {
        let y = a.mul_vec(&x);
        let s: f64 = y.iter().sum();
        if !(s > 0.0) {
            return Err(Error::NoConvergence("power iteration collapsed".into()));
        }
        let y: Vec<f64> = y.iter().map(|c| c / s).collect();
        let rayleigh = dot(&y, &a.mul_vec(&y)) / dot(&y, &y);
        let delta = y.iter().zip(&x).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        x = y;
        if delta < 1e-12 && (rayleigh - rho).abs() < 1e-12 * rayleigh.abs().max(1.0) {
            return Ok((rayleigh, x));
        }
        rho = rayleigh;
    }
    Err(Error::NoConvergence(
        "power iteration did not converge within 100000 steps".into(),
    ))
}

fn second_modulus(eigs: &[Complex64], rho: f64) -> f64 {
    let Some(closest) = (0..eigs.len())
        .min_by(|&i, &j| (eigs[i] - rho).norm().total_cmp(&(eigs[j] - rho).norm()))
    else {
        return 0.0;
    };
    eigs.iter()
        .enumerate()
        .filter(|(i, _)| *i != closest)
        .fold(0.0_f64, |m, (_, z)| m.max(z.norm()))
}

fn normalize_pair(a: &Matrix, rho: f64, u: Vec<f64>, v: Vec<f64>, eigs: &[Complex64]) -> Result<SpectralData> {
    let clean = |w: Vec<f64>| -> Vec<f64> {
        let scale = w.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        w.into_iter()
            .map(|c| if c.abs() <= 1e-14 * scale { 0.0 } else { c })
            .collect()
    };
    let mut u = clean(u);
    let first = u.iter().copied().find(|c| *c != 0.0).unwrap_or(0.0);
    if first < 0.0 {
        u.iter_mut().for_each(|c| *c = -*c);
    }
    let total: f64 = u.iter().sum();
    if !(total > 0.0) || u.iter().any(|&c| c < 0.0) {
        return Err(Error::Precondition(
            "dominant right eigenvector is not nonnegative".into(),
        ));
    }
    let u: Vec<f64> = u.iter().map(|c| c / total).collect();
    let v = clean(v);
    let vu = dot(&v, &u);
    if vu == 0.0 {
        return Err(Error::Precondition(
            "left and right dominant eigenvectors are orthogonal".into(),
        ));
    }
    let v: Vec<f64> = v.iter().map(|c| c / vu).collect();
    if v.iter().any(|&c| c < 0.0) {
        return Err(Error::Precondition(
            "dominant left eigenvector is not nonnegative".into(),
        ));
    }
    let rho_refined = dot(&v, &a.mul_vec(&u));
    let rho = if (rho_refined - rho).abs() <= 1e-9 * (1.0 + rho.abs()) {
        rho_refined
    } else {
        rho
    };
    Ok(SpectralData {
        rho,
        pi: Matrix::outer(&u, &v),
        second_modulus: second_modulus(eigs, rho),
        u,
        v,
    })
}

/// Perron–Frobenius eigenpair of a primitive matrix, with u summing to one and
/// vᵀu = 1.
pub fn perron_frobenius(a: &Matrix) -> Result<SpectralData> {
    if !is_primitive(a)? {
        return Err(Error::Precondition("matrix is not primitive".into()));
    }
    let p = a.dim();
    let eigs = eigenvalues(a);
    if p <= 4 {
        let rho = eigs
            .iter()
            .filter(|z| z.im == 0.0 || z.im.abs() < 1e-12 * z.norm())
            .fold(0.0_f64, |m, z| m.max(z.re));
        let u = inverse_iteration(a, rho);
        let v = inverse_iteration(&a.transpose(), rho);
        normalize_pair(a, rho, u, v, &eigs)
    } else {
        let (rho, u) = power_iteration(a)?;
        let (_, v) = power_iteration(&a.transpose())?;
        normalize_pair(a, rho, u, v, &eigs)
    }
}

/// Eigenpair for a matrix that need not be primitive: the eigenvalue of largest
/// modulus must be real, positive, simple and strictly dominant, and its
/// eigenvectors nonnegative.
pub fn dominant_eigenpair(a: &Matrix) -> Result<SpectralData> {
    let eigs = eigenvalues(a);
    let rho = eigs.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    if !(rho > 0.0) {
        return Err(Error::Precondition("spectral radius is zero".into()));
    }
    let top: Vec<&Complex64> = eigs
        .iter()
        .filter(|z| z.norm() >= rho * (1.0 - 1e-7))
        .collect();
    if top.len() != 1 {
        return Err(Error::Precondition(
            "dominant eigenvalue is not simple or not strictly dominant".into(),
        ));
    }
    let lead = top[0];
    if lead.re <= 0.0 || lead.im.abs() > 1e-9 * rho {
        return Err(Error::Precondition(
            "dominant eigenvalue is not real and positive".into(),
        ));
    }
    let u = inverse_iteration(a, lead.re);
    let v = inverse_iteration(&a.transpose(), lead.re);
    normalize_pair(a, lead.re, u, v, &eigs)
}

/// ‖A^k − pi‖₂ for k = 1..=k_max.
pub fn power_decay(a: &Matrix, pi: &Matrix, k_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k_max);
    let mut power = Matrix::identity(a.dim());
    for _ in 0..k_max {
        power = power.mul(a);
        out.push(power.sub(pi).norm2());
    }
    out
}
