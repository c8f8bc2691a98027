//! Double operator integrals in finite dimensions.
//!
//! In eigenbases a double operator integral is a Schur product: with
//! A = U diag(lambda) U*, B = V diag(mu) V* and a kernel table
//! Phi[i][j] = Phi(lambda_i, mu_j), the transformer acts as
//! T -> U (Phi . (U* T V)) V* where . is the entrywise product. Everything
//! in this module is a corollary of that reduction: operator differences and
//! quasicommutators driven by divided-difference kernels, the trace identity,
//! Schur-multiplier norm bounds by factorization, and differences of functions
//! of normal operators.

use num_complex::Complex;
use num_traits::Zero;
use thiserror::Error;

use crate::funkit::{dd_kernel2, default_coincidence_tol, FunError, Kernel2, ScalarFn};
use crate::matcore::{hermitian_eig, mat_fun, op_norm, Eig, Mat, MatError};
use crate::report::{as_f64, rel_residual, Digest, Report};
use crate::rng::SplitMix64;
use crate::Real;

#[derive(Debug, Error)]
pub enum DoiError {
    #[error("dimension mismatch: transformer expects {expected_rows}x{expected_cols}, got {got_rows}x{got_cols}")]
    DimensionMismatch { expected_rows: usize, expected_cols: usize, got_rows: usize, got_cols: usize },
    #[error("matrix is not normal: commutation defect {defect:e} exceeds {tol:e}")]
    NotNormal { defect: f64, tol: f64 },
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Fun(#[from] FunError),
}

/// A double operator integral, held as its eigenbases and kernel table.
#[derive(Clone, Debug)]
pub struct DoiTransformer<T> {
    pub left: Eig<T>,
    pub right: Eig<T>,
    pub kernel: Kernel2<T>,
}

impl<T: Real> DoiTransformer<T> {
    pub fn new(left: Eig<T>, right: Eig<T>, kernel: Kernel2<T>) -> Self {
        assert_eq!(kernel.xs, left.values, "kernel x-grid must be the left spectrum");
        assert_eq!(kernel.ys, right.values, "kernel y-grid must be the right spectrum");
        Self { left, right, kernel }
    }

    /// Transformer with the first-order divided-difference kernel of f.
    pub fn from_symbol(
        f: &ScalarFn<T>,
        left: Eig<T>,
        right: Eig<T>,
        tol: T,
    ) -> Result<Self, FunError> {
        let kernel = dd_kernel2(f, &left.values, &right.values, tol)?;
        Ok(Self { left, right, kernel })
    }

    pub fn apply(&self, t: &Mat<T>) -> Result<Mat<T>, DoiError> {
        let (n, m) = (self.left.dim(), self.right.dim());
        if t.rows() != n || t.cols() != m {
            return Err(DoiError::DimensionMismatch {
                expected_rows: n,
                expected_cols: m,
                got_rows: t.rows(),
                got_cols: t.cols(),
            });
        }
        let mixed = &(&self.left.basis.adjoint() * t) * &self.right.basis;
        let schur = self.kernel.table.hadamard(&mixed);
        Ok(&(&self.left.basis * &schur) * &self.right.basis.adjoint())
    }
}

/// f(A) - f(B) through the divided-difference transformer applied to A - B,
/// cross-checked against direct functional calculus. The report carries both
/// route norms and the relative residual.
pub fn op_difference<T: Real>(
    f: &ScalarFn<T>,
    a: &Mat<T>,
    b: &Mat<T>,
) -> Result<(Mat<T>, Report), DoiError> {
    let ea = hermitian_eig(a)?;
    let eb = hermitian_eig(b)?;
    let tr = DoiTransformer::from_symbol(f, ea, eb, default_coincidence_tol())?;
    let via_doi = tr.apply(&(a - b))?;
    let direct = &mat_fun(f, &tr.left)? - &mat_fun(f, &tr.right)?;
    let report = two_route_report(
        "op_difference",
        Digest::new().str(f.name()).mat(a).mat(b),
        &via_doi,
        &direct,
    );
    Ok((via_doi, report))
}

/// f(A)Q - Qf(B) through the same kernel applied to AQ - QB.
pub fn quasicommutator<T: Real>(
    f: &ScalarFn<T>,
    a: &Mat<T>,
    b: &Mat<T>,
    q: &Mat<T>,
) -> Result<(Mat<T>, Report), DoiError> {
    let ea = hermitian_eig(a)?;
    let eb = hermitian_eig(b)?;
    let tr = DoiTransformer::from_symbol(f, ea, eb, default_coincidence_tol())?;
    let target = &(a * q) - &(q * b);
    let via_doi = tr.apply(&target)?;
    let direct = &(&mat_fun(f, &tr.left)? * q) - &(q * &mat_fun(f, &tr.right)?);
    let report = two_route_report(
        "quasicommutator",
        Digest::new().str(f.name()).mat(a).mat(b).mat(q),
        &via_doi,
        &direct,
    );
    Ok((via_doi, report))
}

fn two_route_report<T: Real>(
    operation: &str,
    digest: Digest,
    lhs: &Mat<T>,
    rhs: &Mat<T>,
) -> Report {
    let diff = (lhs - rhs).frobenius();
    Report::new(operation, &digest)
        .with_norms(lhs.frobenius(), rhs.frobenius())
        .with_residual(rel_residual(diff, rhs.frobenius()))
}

/// Trace identity: trace of the transformed operator equals the diagonal sum
/// sum_j Phi(lambda_j, lambda_j) (T v_j, v_j) when both sides share one
/// decomposition.
pub fn doi_trace<T: Real>(
    kernel: &Kernel2<T>,
    t: &Mat<T>,
    e: &Eig<T>,
) -> Result<(Complex<T>, Complex<T>), DoiError> {
    let tr = DoiTransformer::new(e.clone(), e.clone(), kernel.clone());
    let lhs = tr.apply(t)?.trace();
    let mixed = &(&e.basis.adjoint() * t) * &e.basis;
    let mut rhs = Complex::zero();
    for j in 0..e.dim() {
        rhs = rhs + kernel.table[(j, j)] * mixed[(j, j)];
    }
    Ok((lhs, rhs))
}

/// A factorization Phi[j][k] = <x_j, y_k>, stored as row stacks so that
/// kernel = x * y^*. The multiplier norm of the kernel is at most
/// (sup_j ||x_j||_2) * (sup_k ||y_k||_2).
#[derive(Clone, Debug)]
pub struct Factorization<T> {
    pub x: Mat<T>,
    pub y: Mat<T>,
}

impl<T: Real> Factorization<T> {
    pub fn bound(&self) -> T {
        max_row_norm(&self.x) * max_row_norm(&self.y)
    }

    pub fn kernel(&self) -> Mat<T> {
        &self.x * &self.y.adjoint()
    }
}

fn max_row_norm<T: Real>(m: &Mat<T>) -> T {
    let mut best = T::zero();
    for i in 0..m.rows() {
        let mut s = T::zero();
        for j in 0..m.cols() {
            s += m[(i, j)].norm_sqr();
        }
        best = best.max(s.sqrt());
    }
    best
}

/// Relative Frobenius distance between the kernel table and x y^*.
pub fn factorization_residual<T: Real>(kernel: &Kernel2<T>, fact: &Factorization<T>) -> T {
    let diff = (&fact.kernel() - &kernel.table).frobenius();
    rel_residual(diff, kernel.table.frobenius())
}

/// Balanced rank factorization through the kernel's singular value
/// decomposition: x = U sqrt(S), y = V sqrt(S). Exact (up to rank cutoff),
/// and its bound is tight on separable kernels.
pub fn svd_factorization<T: Real>(kernel: &Kernel2<T>) -> Result<Factorization<T>, DoiError> {
    let phi = &kernel.table;
    let (n, m) = (phi.rows(), phi.cols());
    let eig = hermitian_eig(&(&phi.adjoint() * phi))?;
    let lmax = eig.values.iter().fold(T::zero(), |a, &v| a.max(v));
    // Gram eigenvalues below the eigensolver's off-diagonal floor are noise
    // from exact-zero singular values; keeping them pollutes the row norms.
    let floor = T::of(1e-13).max(T::epsilon() * T::of(100.0)) * T::of(m as f64).sqrt();
    let kept: Vec<usize> = (0..m).filter(|&l| eig.values[l] > lmax * floor).collect();
    let d = kept.len();
    let mut x = Mat::zeros(n, d);
    let mut y = Mat::zeros(m, d);
    for (c, &l) in kept.iter().enumerate() {
        let sigma = eig.values[l].max(T::zero()).sqrt();
        let root = sigma.sqrt();
        // u = Phi v / sigma, scaled by sqrt(sigma) on both factors.
        for k in 0..m {
            y[(k, c)] = eig.basis[(k, l)].scale(root);
        }
        for j in 0..n {
            let mut acc = Complex::zero();
            for k in 0..m {
                acc = acc + phi[(j, k)] * eig.basis[(k, l)];
            }
            x[(j, c)] = acc.scale(root / sigma);
        }
    }
    Ok(Factorization { x, y })
}

/// Sampling factorization for the divided-difference kernel of a
/// band-limited f: the cardinal-series split
///   a_n(x) = sigma (f(x) - f(pi n / sigma)) / (sigma x - pi n),
///   b_n(y) = sin(sigma y - pi n) / (sigma y - pi n),
/// truncated to the index window covering the grids plus `margin` terms each
/// side. Row norms obey sum |a_n(x)|^2 <= 3 sigma^2 sup|f|^2 and
/// sum |b_n(y)|^2 = 1, so the bound never exceeds sqrt(3) sigma sup|f|.
pub fn sampling_factorization<T: Real>(
    f: &ScalarFn<T>,
    xs: &[T],
    ys: &[T],
    margin: usize,
) -> Result<Factorization<T>, DoiError> {
    let sigma = f.bandlimit().expect("sampling factorization needs a declared bandlimit");
    let pi = T::PI();
    let all_min = xs
        .iter()
        .chain(ys.iter())
        .fold(T::infinity(), |a, &v| a.min(v));
    let all_max = xs
        .iter()
        .chain(ys.iter())
        .fold(T::neg_infinity(), |a, &v| a.max(v));
    let lo = as_f64((sigma * all_min / pi).floor()) as i64 - margin as i64;
    let hi = as_f64((sigma * all_max / pi).ceil()) as i64 + margin as i64;
    let d = (hi - lo + 1) as usize;

    let mut x = Mat::zeros(xs.len(), d);
    for (j, &xj) in xs.iter().enumerate() {
        for c in 0..d {
            let n = T::of((lo + c as i64) as f64);
            let u = sigma * xj - pi * n;
            x[(j, c)] = if u.abs() < T::of(1e-8) {
                f.deriv1(1, xj)?
            } else {
                (f.eval1(xj) - f.eval1(pi * n / sigma)).scale(sigma / u)
            };
        }
    }
    let mut y = Mat::zeros(ys.len(), d);
    for (k, &yk) in ys.iter().enumerate() {
        for c in 0..d {
            let n = T::of((lo + c as i64) as f64);
            let u = sigma * yk - pi * n;
            y[(k, c)] = Complex::new(sinc(u), T::zero());
        }
    }
    Ok(Factorization { x, y })
}

/// sin(u)/u with the series branch near zero.
fn sinc<T: Real>(u: T) -> T {
    if u.abs() < T::of(1e-4) {
        let u2 = u * u;
        T::one() - u2 / T::of(6.0) + u2 * u2 / T::of(120.0)
    } else {
        u.sin() / u
    }
}

/// Monte-Carlo lower estimate of the Schur multiplier norm: the largest
/// observed ||Phi . T|| / ||T|| over seeded Gaussian trials. A lower bound by
/// construction, not the norm.
pub fn multiplier_lower<T: Real>(
    kernel: &Kernel2<T>,
    trials: usize,
    seed: u64,
) -> Result<T, DoiError> {
    let (n, m) = (kernel.table.rows(), kernel.table.cols());
    let mut best = T::zero();
    for trial in 0..trials {
        let mut rng = SplitMix64::substream(seed, trial as u64);
        let t = Mat::gaussian(n, m, &mut rng);
        let denom: T = op_norm(&t)?;
        if denom.is_zero() {
            continue;
        }
        best = best.max(op_norm(&kernel.table.hadamard(&t))? / denom);
    }
    Ok(best)
}

/// (lower, upper) multiplier-norm bracket with the default balanced SVD
/// factorization supplying the upper bound.
pub fn multiplier_bounds<T: Real>(
    kernel: &Kernel2<T>,
    trials: usize,
    seed: u64,
) -> Result<(T, T), DoiError> {
    let fact = svd_factorization(kernel)?;
    Ok((multiplier_lower(kernel, trials, seed)?, fact.bound()))
}

/// Same bracket with a caller-supplied factorization for the upper bound.
pub fn multiplier_bounds_with<T: Real>(
    kernel: &Kernel2<T>,
    fact: &Factorization<T>,
    trials: usize,
    seed: u64,
) -> Result<(T, T), DoiError> {
    Ok((multiplier_lower(kernel, trials, seed)?, fact.bound()))
}

/// Joint eigendecomposition of a commuting Hermitian pair: a single unitary
/// with per-column spectral points (x_j, y_j).
#[derive(Clone, Debug)]
pub struct PairEig<T> {
    pub basis: Mat<T>,
    pub xs: Vec<T>,
    pub ys: Vec<T>,
}

impl<T: Real> PairEig<T> {
    pub fn dim(&self) -> usize {
        self.xs.len()
    }

    /// U diag(f(x_j, y_j)) U* for a two-variable symbol.
    pub fn apply2(&self, f: &ScalarFn<T>) -> Mat<T> {
        let d: Vec<Complex<T>> =
            self.xs.iter().zip(&self.ys).map(|(&x, &y)| f.eval2(x, y)).collect();
        &(&self.basis * &Mat::diag(&d)) * &self.basis.adjoint()
    }

    pub fn apply_with(&self, mut g: impl FnMut(T, T) -> Complex<T>) -> Mat<T> {
        let d: Vec<Complex<T>> = self.xs.iter().zip(&self.ys).map(|(&x, &y)| g(x, y)).collect();
        &(&self.basis * &Mat::diag(&d)) * &self.basis.adjoint()
    }
}

/// Diagonalizes A, then rotates inside each (near-)degenerate eigenspace to
/// diagonalize the compressed B. Valid when A and B commute; the caller is
/// responsible for checking commutation at its own tolerance.
pub fn commuting_eig<T: Real>(a: &Mat<T>, b: &Mat<T>) -> Result<PairEig<T>, MatError> {
    let ea = hermitian_eig(a)?;
    let n = ea.dim();
    let maxab = ea.values.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()));
    let gap = T::of(1e-8) * (T::one() + maxab);

    let w = &(&ea.basis.adjoint() * b) * &ea.basis;
    let mut basis = ea.basis.clone();
    let mut xs = ea.values.clone();
    let mut ys = vec![T::zero(); n];

    let mut i0 = 0;
    while i0 < n {
        let mut i1 = i0 + 1;
        while i1 < n && ea.values[i1] - ea.values[i1 - 1] <= gap {
            i1 += 1;
        }
        let m = i1 - i0;
        if m == 1 {
            ys[i0] = w[(i0, i0)].re;
        } else {
            // Hermitize the block: off-Hermitian parts are commutation noise.
            let block = Mat::from_fn(m, m, |r, c| {
                (w[(i0 + r, i0 + c)] + w[(i0 + c, i0 + r)].conj()).scale(T::of(0.5))
            });
            let eb = hermitian_eig(&block)?;
            let mean =
                ea.values[i0..i1].iter().fold(T::zero(), |acc, &v| acc + v) / T::of(m as f64);
            let old = Mat::from_fn(n, m, |r, c| basis[(r, i0 + c)]);
            let rotated = &old * &eb.basis;
            for r in 0..n {
                for c in 0..m {
                    basis[(r, i0 + c)] = rotated[(r, c)];
                }
            }
            for c in 0..m {
                xs[i0 + c] = mean;
                ys[i0 + c] = eb.values[c];
            }
        }
        i0 = i1;
    }
    Ok(PairEig { basis, xs, ys })
}

fn normal_parts<T: Real>(n: &Mat<T>) -> Result<(Mat<T>, Mat<T>), DoiError> {
    let adj = n.adjoint();
    let defect = (&(n * &adj) - &(&adj * n)).frobenius();
    let tol = T::of(1e-10) * n.frobenius() * n.frobenius();
    if defect > tol {
        return Err(DoiError::NotNormal { defect: as_f64(defect), tol: as_f64(tol) });
    }
    let re = (n + &adj).scale_re(T::of(0.5));
    let im = (n - &adj).scale(Complex::new(T::zero(), -T::of(0.5)));
    Ok((re, im))
}

/// f(N1) - f(N2) for normal N1, N2 via the two partial divided-difference
/// transformers against Re and Im perturbations:
///
///   f(N1) - f(N2) = DOI(D_y f; B1 - B2) + DOI(D_x f; A1 - A2)
///
/// with A = Re N, B = Im N, D_x f evaluated at (x1, x2; y2) and D_y f at
/// (x1; y1, y2) on the joint spectra. Cross-checked against the direct
/// two-variable calculus on each joint spectrum.
pub fn normal_difference<T: Real>(
    f: &ScalarFn<T>,
    n1: &Mat<T>,
    n2: &Mat<T>,
) -> Result<(Mat<T>, Report), DoiError> {
    assert_eq!(f.arity(), 2, "normal_difference takes a two-variable symbol");
    let (a1, b1) = normal_parts(n1)?;
    let (a2, b2) = normal_parts(n2)?;
    let p1 = commuting_eig(&a1, &b1)?;
    let p2 = commuting_eig(&a2, &b2)?;
    let dim = p1.dim();

    let maxab = p1
        .xs
        .iter()
        .chain(p1.ys.iter())
        .chain(p2.xs.iter())
        .chain(p2.ys.iter())
        .fold(T::zero(), |acc, &v| acc.max(v.abs()));
    let ctol = default_coincidence_tol::<T>() * (T::one() + maxab);
    let half = T::of(0.5);

    let mut kx = Mat::zeros(dim, p2.dim());
    let mut ky = Mat::zeros(dim, p2.dim());
    for j in 0..dim {
        for k in 0..p2.dim() {
            let (x1, y1) = (p1.xs[j], p1.ys[j]);
            let (x2, y2) = (p2.xs[k], p2.ys[k]);
            kx[(j, k)] = if (x1 - x2).abs() <= ctol {
                f.deriv2(1, 0, (x1 + x2) * half, y2)?
            } else {
                (f.eval2(x1, y2) - f.eval2(x2, y2)) / Complex::new(x1 - x2, T::zero())
            };
            ky[(j, k)] = if (y1 - y2).abs() <= ctol {
                f.deriv2(0, 1, x1, (y1 + y2) * half)?
            } else {
                (f.eval2(x1, y1) - f.eval2(x1, y2)) / Complex::new(y1 - y2, T::zero())
            };
        }
    }

    let mix = |t: &Mat<T>| -> Mat<T> { &(&p1.basis.adjoint() * t) * &p2.basis };
    let unmix = |t: &Mat<T>| -> Mat<T> { &(&p1.basis * t) * &p2.basis.adjoint() };
    let term_y = unmix(&ky.hadamard(&mix(&(&b1 - &b2))));
    let term_x = unmix(&kx.hadamard(&mix(&(&a1 - &a2))));
    let via_doi = &term_y + &term_x;

    let direct = &p1.apply2(f) - &p2.apply2(f);
    let report = two_route_report(
        "normal_difference",
        Digest::new().str(f.name()).mat(n1).mat(n2),
        &via_doi,
        &direct,
    );
    Ok((via_doi, report))
}

/// Operator-norm form of the band-limited difference bound:
/// ||f(A) - f(B)|| against sigma sup|f| ||A - B||; the ratio is expected to
/// stay at or below 1.
pub fn fundamental_inequality_check<T: Real>(
    f: &ScalarFn<T>,
    a: &Mat<T>,
    b: &Mat<T>,
) -> Result<Report, DoiError> {
    let sigma = f.bandlimit().expect("fundamental inequality needs a declared bandlimit");
    let ea = hermitian_eig(a)?;
    let eb = hermitian_eig(b)?;
    let sup = f.sup_norm().unwrap_or_else(|| {
        let lo = ea.values.iter().chain(eb.values.iter()).fold(T::infinity(), |x, &v| x.min(v));
        let hi =
            ea.values.iter().chain(eb.values.iter()).fold(T::neg_infinity(), |x, &v| x.max(v));
        let n = 4096;
        let step = (hi - lo + T::of(2.0)) / T::of(n as f64);
        (0..=n).fold(T::zero(), |acc, i| {
            acc.max(f.eval1(lo - T::one() + step * T::of(i as f64)).norm())
        })
    });
    let lhs = op_norm(&(&mat_fun(f, &ea)? - &mat_fun(f, &eb)?))?;
    let rhs = sigma * sup * op_norm(&(a - b))?;
    let ratio_excess = if rhs.is_zero() { T::zero() } else { (lhs / rhs - T::one()).max(T::zero()) };
    Ok(Report::new(
        "fundamental_inequality",
        &Digest::new().str(f.name()).mat(a).mat(b),
    )
    .with_norms(lhs, rhs)
    .with_residual(ratio_excess)
    .with_meta("sigma", format!("{}", as_f64(sigma)))
    .with_meta("sup_norm", format!("{}", as_f64(sup))))
}
