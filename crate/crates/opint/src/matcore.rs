//! Dense complex matrix algebra: Hermitian eigendecomposition, singular
//! values, Schatten norms, matrix functions. The substrate every other module
//! stands on.
//!
//! The eigensolver is cyclic Jacobi with complex rotations: unconditionally
//! stable, dependency-free, and fast enough at desk scale (n <= 256). SVD
//! reuses it on `M* M` with tiny negative eigenvalues clamped to zero.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::Zero;
use serde::Deserialize;
use thiserror::Error;

use crate::funkit::ScalarFn;
use crate::rng::SplitMix64;
use crate::Real;

#[derive(Debug, Error)]
pub enum MatError {
    #[error("matrix is not Hermitian: asymmetry {defect:e} exceeds tolerance {tol:e}")]
    NonHermitian { defect: f64, tol: f64 },
    #[error("eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("Schatten exponent must satisfy p >= 1, got {p}")]
    InvalidP { p: f64 },
    #[error("function {name} undefined at spectral point {x}")]
    DomainError { name: String, x: f64 },
    #[error("malformed matrix JSON: {0}")]
    Json(String),
}

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diag(d: &[Complex<T>]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn diag_real(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = Complex::new(v, T::zero());
        }
        m
    }

    /// Complex Gaussian matrix, entries with independent N(0,1) parts.
    pub fn gaussian(rows: usize, cols: usize, rng: &mut SplitMix64) -> Self {
        Self::from_fn(rows, cols, |_, _| rng.gaussian_c())
    }

    /// Random Hermitian matrix: Gaussian draw symmetrized as (G + G*)/2.
    pub fn hermitian_gaussian(n: usize, rng: &mut SplitMix64) -> Self {
        let g = Self::gaussian(n, n, rng);
        (&g + &g.adjoint()).scale_re(T::of(0.5))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, z: Complex<T>) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&w| w * z).collect() }
    }

    pub fn scale_re(&self, s: T) -> Self {
        self.scale(Complex::new(s, T::zero()))
    }

    pub fn trace(&self) -> Complex<T> {
        debug_assert!(self.is_square());
        (0..self.rows).fold(Complex::zero(), |acc, i| acc + self[(i, i)])
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, z| acc.max(z.norm()))
    }

    /// max |m_jk - conj(m_kj)|, the distance from being Hermitian.
    pub fn hermitian_defect(&self) -> T {
        debug_assert!(self.is_square());
        let mut d = T::zero();
        for i in 0..self.rows {
            for j in i..self.cols {
                d = d.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        d
    }

    pub fn is_hermitian(&self) -> bool {
        self.is_square() && self.hermitian_defect() <= hermitian_tol(self)
    }

    /// Matrix product; dimensions must agree.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in matrix product");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] = out[(i, j)] + a * rhs[(k, j)];
                }
            }
        }
        out
    }

    /// Entrywise product, the Schur/Hadamard multiplier action.
    pub fn hadamard(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a * b).collect(),
        }
    }

    /// JSON form {rows, cols, re[], im[]} with entries printed to 17
    /// significant digits, enough for exact f64 round-trips.
    pub fn to_json(&self) -> String {
        let fmt_parts = |pick: fn(&Complex<T>) -> T| {
            self.data
                .iter()
                .map(|z| format!("{:.16e}", pick(z).to_f64().unwrap_or(f64::NAN)))
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "{{\"rows\":{},\"cols\":{},\"re\":[{}],\"im\":[{}]}}",
            self.rows,
            self.cols,
            fmt_parts(|z| z.re),
            fmt_parts(|z| z.im)
        )
    }

    pub fn from_json(s: &str) -> Result<Self, MatError> {
        #[derive(Deserialize)]
        struct MatJson {
            rows: usize,
            cols: usize,
            re: Vec<f64>,
            im: Vec<f64>,
        }
        let j: MatJson = serde_json::from_str(s).map_err(|e| MatError::Json(e.to_string()))?;
        if j.re.len() != j.rows * j.cols || j.im.len() != j.rows * j.cols {
            return Err(MatError::Json(format!(
                "entry count {}/{} does not match {}x{}",
                j.re.len(),
                j.im.len(),
                j.rows,
                j.cols
            )));
        }
        let data = j
            .re
            .iter()
            .zip(&j.im)
            .map(|(&re, &im)| Complex::new(T::of(re), T::of(im)))
            .collect();
        Ok(Self { rows: j.rows, cols: j.cols, data })
    }
}

impl<T: Real> Index<(usize, usize)> for Mat<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Add for &Mat<T> {
    type Output = Mat<T>;
    fn add(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T: Real> Sub for &Mat<T> {
    type Output = Mat<T>;
    fn sub(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl<T: Real> Mul for &Mat<T> {
    type Output = Mat<T>;
    fn mul(self, rhs: &Mat<T>) -> Mat<T> {
        self.matmul(rhs)
    }
}

impl<T: Real> Neg for &Mat<T> {
    type Output = Mat<T>;
    fn neg(self) -> Mat<T> {
        self.scale_re(-T::one())
    }
}

impl<T: fmt::Debug> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = &self.data[i * self.cols + j];
                write!(f, "{:+.4?}{:+.4?}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Spectral decomposition of a Hermitian matrix: `basis * diag(values) * basis^*`
/// reconstructs the input; eigenvalues ascending, basis columns orthonormal.
#[derive(Clone, Debug)]
pub struct Eig<T> {
    pub values: Vec<T>,
    pub basis: Mat<T>,
}

impl<T: Real> Eig<T> {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn reconstruct(&self) -> Mat<T> {
        &(&self.basis * &Mat::diag_real(&self.values)) * &self.basis.adjoint()
    }

    /// U diag(g(lambda_j)) U* for an arbitrary spectral map g.
    pub fn apply(&self, mut g: impl FnMut(T) -> Complex<T>) -> Mat<T> {
        let d: Vec<Complex<T>> = self.values.iter().map(|&x| g(x)).collect();
        &(&self.basis * &Mat::diag(&d)) * &self.basis.adjoint()
    }
}

pub(crate) fn hermitian_tol<T: Real>(h: &Mat<T>) -> T {
    // 1e-12 is the contract scale; the epsilon floor keeps f32 usable.
    let rel = T::of(1e-12).max(T::epsilon() * T::of(4.0));
    rel * (T::one() + h.max_abs())
}

const MAX_SWEEPS: usize = 100;

/// Hermitian eigendecomposition by cyclic Jacobi.
///
/// Stops when the off-diagonal Frobenius mass drops below 1e-13 * ||H||_F
/// (floored at a small multiple of machine epsilon so f32 instantiations
/// terminate). Eigenvalues are sorted ascending, stably, so ties keep the
/// first-occurrence order of the Jacobi output.
pub fn hermitian_eig<T: Real>(h: &Mat<T>) -> Result<Eig<T>, MatError> {
    if !h.is_square() || h.hermitian_defect() > hermitian_tol(h) {
        return Err(MatError::NonHermitian {
            defect: h.hermitian_defect().to_f64().unwrap_or(f64::NAN),
            tol: hermitian_tol(h).to_f64().unwrap_or(f64::NAN),
        });
    }
    let n = h.rows();
    if n == 0 {
        return Ok(Eig { values: vec![], basis: Mat::zeros(0, 0) });
    }

    let hfrob = h.frobenius();
    let stop = T::of(1e-13).max(T::epsilon() * T::of(100.0)) * hfrob;
    let mut a = h.clone();
    let mut v = Mat::identity(n);
    if hfrob.is_zero() {
        return Ok(Eig { values: vec![T::zero(); n], basis: v });
    }

    // Entries below this cannot lift the total off-diagonal mass above stop.
    let entry_tol = stop / T::of((n * (n.max(2) - 1)) as f64).sqrt();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if offdiag_frobenius(&a) <= stop {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let g = a[(p, q)];
                let gn = g.norm();
                if gn <= entry_tol {
                    continue;
                }
                rotate(&mut a, &mut v, p, q, gn);
            }
        }
    }
    if !converged && offdiag_frobenius(&a) > stop {
        return Err(MatError::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut idx: Vec<usize> = (0..n).collect();
    let raw: Vec<T> = (0..n).map(|i| a[(i, i)].re).collect();
    idx.sort_by(|&i, &j| raw[i].partial_cmp(&raw[j]).unwrap_or(std::cmp::Ordering::Equal));
    let values: Vec<T> = idx.iter().map(|&i| raw[i]).collect();
    let basis = Mat::from_fn(n, n, |i, j| v[(i, idx[j])]);
    Ok(Eig { values, basis })
}

fn offdiag_frobenius<T: Real>(a: &Mat<T>) -> T {
    let n = a.rows();
    let mut s = T::zero();
    for p in 0..n {
        for q in (p + 1)..n {
            s += a[(p, q)].norm_sqr() + a[(q, p)].norm_sqr();
        }
    }
    s.sqrt()
}

/// One complex Jacobi rotation zeroing the (p, q) entry.
///
/// With a = A_pp, b = A_qq (real), g = A_pq = |g| e^{i phi}, the rotation
/// G = [[c, s], [-conj(s), c]] with s = t c e^{i phi},
/// t = sign(tau)/(|tau| + sqrt(1 + tau^2)), tau = (b - a)/(2|g|)
/// makes (G* A G)_pq vanish; |t| <= 1 keeps the update stable.
fn rotate<T: Real>(a: &mut Mat<T>, v: &mut Mat<T>, p: usize, q: usize, gn: T) {
    let n = a.rows();
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let g = a[(p, q)];
    let phase = g / Complex::new(gn, T::zero());

    let tau = (aqq - app) / (T::of(2.0) * gn);
    let sign = if tau < T::zero() { -T::one() } else { T::one() };
    let t = sign / (tau.abs() + (T::one() + tau * tau).sqrt());
    let c = T::one() / (T::one() + t * t).sqrt();
    let sigma = t * c;
    let s = phase * Complex::new(sigma, T::zero());

    // Columns: A <- A G.
    for i in 0..n {
        let aip = a[(i, p)];
        let aiq = a[(i, q)];
        a[(i, p)] = aip * c - aiq * s.conj();
        a[(i, q)] = aip * s + aiq * c;
    }
    // Rows: A <- G* A.
    for j in 0..n {
        let apj = a[(p, j)];
        let aqj = a[(q, j)];
        a[(p, j)] = apj * c - aqj * s;
        a[(q, j)] = apj * s.conj() + aqj * c;
    }
    // Closed forms kill roundoff drift on the pivot block.
    let two = T::of(2.0);
    a[(p, p)] = Complex::new(app * c * c + aqq * sigma * sigma - two * c * sigma * gn, T::zero());
    a[(q, q)] = Complex::new(app * sigma * sigma + aqq * c * c + two * c * sigma * gn, T::zero());
    a[(p, q)] = Complex::zero();
    a[(q, p)] = Complex::zero();

    for i in 0..n {
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = vip * c - viq * s.conj();
        v[(i, q)] = vip * s + viq * c;
    }
}

/// Singular values of an arbitrary matrix, nonincreasing: square roots of the
/// eigenvalues of M* M, tiny negatives clamped to zero.
pub fn singular_values<T: Real>(m: &Mat<T>) -> Result<Vec<T>, MatError> {
    let gram = &m.adjoint() * m;
    let eig = hermitian_eig(&gram)?;
    let mut s: Vec<T> = eig.values.iter().map(|&x| x.max(T::zero()).sqrt()).collect();
    s.reverse();
    Ok(s)
}

/// Schatten p-norm, p in [1, inf]. p = inf gives the operator norm.
pub fn schatten_norm<T: Real>(m: &Mat<T>, p: T) -> Result<T, MatError> {
    if p.is_nan() || p < T::one() {
        return Err(MatError::InvalidP { p: p.to_f64().unwrap_or(f64::NAN) });
    }
    let s = singular_values(m)?;
    if p.is_infinite() {
        return Ok(s.first().copied().unwrap_or_else(T::zero));
    }
    // The largest singular value is factored out so powf stays in range.
    let top = s.first().copied().unwrap_or_else(T::zero);
    if top.is_zero() {
        return Ok(T::zero());
    }
    let sum = s.iter().fold(T::zero(), |acc, &x| acc + (x / top).powf(p));
    Ok(top * sum.powf(T::one() / p))
}

/// Operator norm, shorthand for the Schatten infinity norm.
pub fn op_norm<T: Real>(m: &Mat<T>) -> Result<T, MatError> {
    schatten_norm(m, T::infinity())
}

/// Spectral functional calculus: U diag(f(lambda_j)) U*.
pub fn mat_fun<T: Real>(f: &ScalarFn<T>, d: &Eig<T>) -> Result<Mat<T>, MatError> {
    for &x in &d.values {
        let y = f.eval1(x);
        if y.re.is_nan() || y.im.is_nan() {
            return Err(MatError::DomainError {
                name: f.name().to_string(),
                x: x.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    Ok(d.apply(|x| f.eval1(x)))
}
