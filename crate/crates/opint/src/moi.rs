//! Multiple operator integrals as kernel-weighted contractions in
//! eigenbases, plus the two objects they compute in practice: higher
//! derivatives and higher-order differences of t -> f(A + tK).
//!
//! With decompositions A_j = U_j diag(lambda^j) U_j* and interleaved
//! operators T_1 .. T_{m-1}, the integral of a kernel Psi is
//!
//!   U_1 R U_m*,  R[i_1, i_m] = sum Psi(lambda^1_{i_1}, .., lambda^m_{i_m})
//!                                  S_1[i_1, i_2] ... S_{m-1}[i_{m-1}, i_m]
//!
//! with S_j = U_j* T_j U_{j+1}. The contraction folds the rightmost index
//! innermost, so the cost is one kernel-weighted pass over the index tuples.

use num_complex::Complex;
use num_traits::Zero;
use thiserror::Error;

use crate::funkit::{divided_difference, FunError, Kernel2, Kernel3, ScalarFn};
use crate::matcore::{hermitian_eig, mat_fun, schatten_norm, Eig, Mat, MatError};
use crate::report::{as_f64, rel_residual, Digest, Report};
use crate::Real;

#[derive(Debug, Error)]
pub enum MoiError {
    #[error("dimension mismatch: {detail}")]
    DimensionMismatch { detail: String },
    #[error("unsupported integral order m = {m} (supported {min}..={max})")]
    UnsupportedOrder { m: usize, min: usize, max: usize },
    #[error("invalid Schatten exponents: {detail}")]
    InvalidExponents { detail: String },
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Fun(#[from] FunError),
}

/// Dense kernel of up to four real arguments sampled on per-axis grids.
#[derive(Clone, Debug)]
pub struct KernelN<T> {
    grids: Vec<Vec<T>>,
    table: Vec<Complex<T>>,
    strides: Vec<usize>,
    projective_bound: Option<T>,
}

impl<T: Real> KernelN<T> {
    pub fn from_fn(grids: Vec<Vec<T>>, mut f: impl FnMut(&[T]) -> Complex<T>) -> Self {
        let order = grids.len();
        assert!((2..=4).contains(&order), "kernels carry 2 to 4 arguments");
        let dims: Vec<usize> = grids.iter().map(|g| g.len()).collect();
        let total: usize = dims.iter().product();
        let mut strides = vec![1usize; order];
        for d in (0..order - 1).rev() {
            strides[d] = strides[d + 1] * dims[d + 1];
        }
        let mut table = Vec::with_capacity(total);
        let mut idx = vec![0usize; order];
        let mut args = vec![T::zero(); order];
        for _ in 0..total {
            for d in 0..order {
                args[d] = grids[d][idx[d]];
            }
            table.push(f(&args));
            for d in (0..order).rev() {
                idx[d] += 1;
                if idx[d] < dims[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        Self { grids, table, strides, projective_bound: None }
    }

    /// Product kernel a_1(x_1) ... a_m(x_m) given per-axis factor samples.
    /// Its projective bound is the product of the factor sup-norms.
    pub fn separable(grids: Vec<Vec<T>>, factors: &[Vec<Complex<T>>]) -> Self {
        assert_eq!(grids.len(), factors.len());
        for (g, f) in grids.iter().zip(factors) {
            assert_eq!(g.len(), f.len(), "factor samples must match the grid");
        }
        let bound = factors
            .iter()
            .map(|f| f.iter().fold(T::zero(), |a, z| a.max(z.norm())))
            .fold(T::one(), |a, b| a * b);
        let mut k = Self::from_fn(grids, |_| Complex::zero());
        let order = k.grids.len();
        let dims: Vec<usize> = k.grids.iter().map(|g| g.len()).collect();
        let mut idx = vec![0usize; order];
        for slot in k.table.iter_mut() {
            let mut v = Complex::new(T::one(), T::zero());
            for d in 0..order {
                v = v * factors[d][idx[d]];
            }
            *slot = v;
            for d in (0..order).rev() {
                idx[d] += 1;
                if idx[d] < dims[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        k.projective_bound = Some(bound);
        k
    }

    pub fn constant_one(grids: Vec<Vec<T>>) -> Self {
        let mut k = Self::from_fn(grids, |_| Complex::new(T::one(), T::zero()));
        k.projective_bound = Some(T::one());
        k
    }

    /// Divided-difference kernel of order grids.len() - 1.
    pub fn dd_symbol(f: &ScalarFn<T>, grids: Vec<Vec<T>>, tol: T) -> Result<Self, FunError> {
        let order = grids.len();
        assert!((2..=5).contains(&order));
        let dims: Vec<usize> = grids.iter().map(|g| g.len()).collect();
        let total: usize = dims.iter().product();
        let mut table = Vec::with_capacity(total);
        let mut idx = vec![0usize; order];
        let mut args = vec![T::zero(); order];
        for _ in 0..total {
            for d in 0..order {
                args[d] = grids[d][idx[d]];
            }
            table.push(divided_difference(f, &args, tol)?);
            for d in (0..order).rev() {
                idx[d] += 1;
                if idx[d] < dims[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        let mut strides = vec![1usize; order];
        for d in (0..order - 1).rev() {
            strides[d] = strides[d + 1] * dims[d + 1];
        }
        Ok(Self { grids, table, strides, projective_bound: None })
    }

    pub fn order(&self) -> usize {
        self.grids.len()
    }

    pub fn grids(&self) -> &[Vec<T>] {
        &self.grids
    }

    pub fn at(&self, idx: &[usize]) -> Complex<T> {
        debug_assert_eq!(idx.len(), self.grids.len());
        let flat: usize = idx.iter().zip(&self.strides).map(|(&i, &s)| i * s).sum();
        self.table[flat]
    }

    pub fn sup_abs(&self) -> T {
        self.table.iter().fold(T::zero(), |a, z| a.max(z.norm()))
    }

    /// Projective-tensor norm estimate: exact factor product for separable
    /// kernels, entrywise sup otherwise (exact for S_2 multipliers).
    pub fn projective_bound(&self) -> T {
        self.projective_bound.unwrap_or_else(|| self.sup_abs())
    }
}

impl<T: Real> From<Kernel2<T>> for KernelN<T> {
    fn from(k: Kernel2<T>) -> Self {
        let grids = vec![k.xs.clone(), k.ys.clone()];
        KernelN::from_fn(grids, |_| Complex::zero()).with_table_from2(&k)
    }
}

impl<T: Real> KernelN<T> {
    fn with_table_from2(mut self, k: &Kernel2<T>) -> Self {
        for i in 0..k.xs.len() {
            for j in 0..k.ys.len() {
                let flat = i * self.strides[0] + j;
                self.table[flat] = k.table[(i, j)];
            }
        }
        self
    }
}

impl<T: Real> From<Kernel3<T>> for KernelN<T> {
    fn from(k: Kernel3<T>) -> Self {
        let grids = vec![k.xs.clone(), k.ys.clone(), k.zs.clone()];
        let (ny, nz) = (k.ys.len(), k.zs.len());
        let mut out = KernelN::from_fn(grids, |_| Complex::zero());
        for i in 0..k.xs.len() {
            for j in 0..ny {
                for l in 0..nz {
                    out.table[(i * ny + j) * nz + l] = k.at(i, j, l);
                }
            }
        }
        out
    }
}

/// A multiple operator integral: m decompositions, an m-argument kernel on
/// their spectra, and m-1 interleaved matrices.
#[derive(Clone, Debug)]
pub struct MoiSpec<T> {
    pub decomps: Vec<Eig<T>>,
    pub kernel: KernelN<T>,
    pub interleaved: Vec<Mat<T>>,
}

impl<T: Real> MoiSpec<T> {
    pub fn new(
        decomps: Vec<Eig<T>>,
        kernel: KernelN<T>,
        interleaved: Vec<Mat<T>>,
    ) -> Result<Self, MoiError> {
        let m = decomps.len();
        if !(2..=4).contains(&m) {
            return Err(MoiError::UnsupportedOrder { m, min: 2, max: 4 });
        }
        if kernel.order() != m {
            return Err(MoiError::DimensionMismatch {
                detail: format!("kernel order {} vs {} decompositions", kernel.order(), m),
            });
        }
        if interleaved.len() != m - 1 {
            return Err(MoiError::DimensionMismatch {
                detail: format!("{} interleaved matrices, need {}", interleaved.len(), m - 1),
            });
        }
        for (d, e) in decomps.iter().enumerate() {
            if kernel.grids()[d] != e.values {
                return Err(MoiError::DimensionMismatch {
                    detail: format!("kernel grid {d} differs from spectrum {d}"),
                });
            }
        }
        for (j, t) in interleaved.iter().enumerate() {
            if t.rows() != decomps[j].dim() || t.cols() != decomps[j + 1].dim() {
                return Err(MoiError::DimensionMismatch {
                    detail: format!(
                        "interleaved {} is {}x{}, need {}x{}",
                        j,
                        t.rows(),
                        t.cols(),
                        decomps[j].dim(),
                        decomps[j + 1].dim()
                    ),
                });
            }
        }
        Ok(Self { decomps, kernel, interleaved })
    }
}

/// Evaluates the integral by successive basis changes and one kernel-weighted
/// contraction over index tuples.
pub fn moi_apply<T: Real>(spec: &MoiSpec<T>) -> Result<Mat<T>, MoiError> {
    let m = spec.decomps.len();
    let mixed: Vec<Mat<T>> = spec
        .interleaved
        .iter()
        .enumerate()
        .map(|(j, t)| &(&spec.decomps[j].basis.adjoint() * t) * &spec.decomps[j + 1].basis)
        .collect();
    let dims: Vec<usize> = spec.decomps.iter().map(|e| e.dim()).collect();
    let k = &spec.kernel;

    let mut r = Mat::zeros(dims[0], dims[m - 1]);
    match m {
        2 => {
            for i0 in 0..dims[0] {
                for i1 in 0..dims[1] {
                    r[(i0, i1)] = k.at(&[i0, i1]) * mixed[0][(i0, i1)];
                }
            }
        }
        3 => {
            for i0 in 0..dims[0] {
                for i1 in 0..dims[1] {
                    let s0 = mixed[0][(i0, i1)];
                    if s0.is_zero() {
                        continue;
                    }
                    for i2 in 0..dims[2] {
                        r[(i0, i2)] = r[(i0, i2)] + k.at(&[i0, i1, i2]) * s0 * mixed[1][(i1, i2)];
                    }
                }
            }
        }
        4 => {
            for i0 in 0..dims[0] {
                for i1 in 0..dims[1] {
                    let s0 = mixed[0][(i0, i1)];
                    if s0.is_zero() {
                        continue;
                    }
                    for i2 in 0..dims[2] {
                        let s01 = s0 * mixed[1][(i1, i2)];
                        if s01.is_zero() {
                            continue;
                        }
                        for i3 in 0..dims[3] {
                            r[(i0, i3)] =
                                r[(i0, i3)] + k.at(&[i0, i1, i2, i3]) * s01 * mixed[2][(i2, i3)];
                        }
                    }
                }
            }
        }
        _ => unreachable!("validated in MoiSpec::new"),
    }
    Ok(&(&spec.decomps[0].basis * &r) * &spec.decomps[m - 1].basis.adjoint())
}

/// Schatten-Hoelder check: ||integral||_{S_r} against
/// bound * prod ||T_j||_{S_{p_j}} with 1/r = sum 1/p_j and the kernel's
/// projective bound. The report carries both sides; residual is the relative
/// excess of the left side over the right.
pub fn moi_schatten_check<T: Real>(spec: &MoiSpec<T>, p_list: &[T]) -> Result<Report, MoiError> {
    let m = spec.decomps.len();
    if p_list.len() != m - 1 {
        return Err(MoiError::InvalidExponents {
            detail: format!("{} exponents for {} interleaved matrices", p_list.len(), m - 1),
        });
    }
    let mut inv_r = T::zero();
    for &p in p_list {
        if p.is_nan() || p < T::one() {
            return Err(MoiError::InvalidExponents { detail: format!("p = {p} below 1") });
        }
        inv_r += p.recip();
    }
    if inv_r > T::one() + T::epsilon() {
        return Err(MoiError::InvalidExponents {
            detail: format!("sum of 1/p_j = {inv_r} exceeds 1"),
        });
    }
    let r = inv_r.recip();
    let result = moi_apply(spec)?;
    let lhs = schatten_norm(&result, r)?;
    let bound = spec.kernel.projective_bound();
    let mut rhs = bound;
    for (t, &p) in spec.interleaved.iter().zip(p_list) {
        rhs = rhs * schatten_norm(t, p)?;
    }

    let mut digest = Digest::new().str("moi_schatten").u64(m as u64);
    for t in &spec.interleaved {
        digest = digest.mat(t);
    }
    let excess = if rhs.is_zero() { T::zero() } else { (lhs / rhs - T::one()).max(T::zero()) };
    Ok(Report::new("moi_schatten_check", &digest)
        .with_norms(lhs, rhs)
        .with_residual(excess)
        .with_meta("r", format!("{}", as_f64(r)))
        .with_meta("kernel_bound", format!("{}", as_f64(bound)))
        .with_meta(
            "p_list",
            p_list.iter().map(|&p| format!("{}", as_f64(p))).collect::<Vec<_>>().join(","),
        ))
}

fn shifted_eig<T: Real>(a: &Mat<T>, k: &Mat<T>, steps: usize) -> Result<Vec<Eig<T>>, MoiError> {
    let mut out = Vec::with_capacity(steps);
    for j in 0..steps {
        let shifted = a + &k.scale_re(T::of(j as f64));
        out.push(hermitian_eig(&shifted)?);
    }
    Ok(out)
}

/// m-th derivative of t -> f(A + tK) at t = 0, m <= 3:
/// m! times the integral of the order-m divided-difference kernel over m+1
/// copies of E_A with K in every interleaved slot.
pub fn higher_derivative<T: Real>(
    f: &ScalarFn<T>,
    a: &Mat<T>,
    k: &Mat<T>,
    m: usize,
    tol: T,
) -> Result<Mat<T>, MoiError> {
    if !(1..=3).contains(&m) {
        return Err(MoiError::UnsupportedOrder { m, min: 1, max: 3 });
    }
    let e = hermitian_eig(a)?;
    let grids = vec![e.values.clone(); m + 1];
    let kernel = KernelN::dd_symbol(f, grids, tol)?;
    let spec = MoiSpec::new(vec![e; m + 1], kernel, vec![k.clone(); m])?;
    Ok(moi_apply(&spec)?.scale_re(crate::funkit::factorial::<T>(m)))
}

/// Forward m-th difference: sum_j (-1)^(m-j) C(m,j) f(A + jK).
/// The centered variant at even m is this with base A - (m/2)K.
pub fn higher_difference_direct<T: Real>(
    f: &ScalarFn<T>,
    a: &Mat<T>,
    k: &Mat<T>,
    m: usize,
) -> Result<Mat<T>, MoiError> {
    assert!((1..=8).contains(&m));
    let n = a.rows();
    let mut acc = Mat::zeros(n, n);
    for j in 0..=m {
        let e = hermitian_eig(&(a + &k.scale_re(T::of(j as f64))))?;
        let term = mat_fun(f, &e)?;
        let c = binomial::<T>(m, j) * if (m - j) % 2 == 0 { T::one() } else { -T::one() };
        acc = &acc + &term.scale_re(c);
    }
    Ok(acc)
}

fn binomial<T: Real>(m: usize, j: usize) -> T {
    let mut c = T::one();
    for i in 0..j {
        c = c * T::of((m - i) as f64) / T::of((i + 1) as f64);
    }
    c
}

/// The same m-th difference through the integral route: m! times the
/// order-m kernel over the staircase E_A, E_{A+K}, .., E_{A+mK} with K
/// interleaved. Returns the matrix and a report against the direct route.
pub fn higher_difference_moi<T: Real>(
    f: &ScalarFn<T>,
    a: &Mat<T>,
    k: &Mat<T>,
    m: usize,
    tol: T,
) -> Result<(Mat<T>, Report), MoiError> {
    if !(1..=3).contains(&m) {
        return Err(MoiError::UnsupportedOrder { m, min: 1, max: 3 });
    }
    let decomps = shifted_eig(a, k, m + 1)?;
    let grids: Vec<Vec<T>> = decomps.iter().map(|e| e.values.clone()).collect();
    let kernel = KernelN::dd_symbol(f, grids, tol)?;
    let spec = MoiSpec::new(decomps, kernel, vec![k.clone(); m])?;
    let via_moi = moi_apply(&spec)?.scale_re(crate::funkit::factorial::<T>(m));
    let direct = higher_difference_direct(f, a, k, m)?;
    let diff = (&via_moi - &direct).frobenius();
    let report = Report::new(
        "higher_difference",
        &Digest::new().str(f.name()).mat(a).mat(k).u64(m as u64),
    )
    .with_norms(via_moi.frobenius(), direct.frobenius())
    .with_residual(rel_residual(diff, direct.frobenius()));
    Ok((via_moi, report))
}

/// Finite-difference oracle steps used throughout the derivative checks.
pub const FD_STEPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Central finite-difference stencil for the m-th derivative of
/// t -> f(A + tK) at 0, error O(h^2).
pub fn fd_derivative<T: Real>(
    f: &ScalarFn<T>,
    a: &Mat<T>,
    k: &Mat<T>,
    m: usize,
    h: T,
) -> Result<Mat<T>, MoiError> {
    let at = |t: T| -> Result<Mat<T>, MoiError> {
        Ok(mat_fun(f, &hermitian_eig(&(a + &k.scale_re(t)))?)?)
    };
    let two = T::of(2.0);
    match m {
        1 => Ok((&at(h)? - &at(-h)?).scale_re((two * h).recip())),
        2 => {
            let sum = &(&at(h)? + &at(-h)?) - &at(T::zero())?.scale_re(two);
            Ok(sum.scale_re((h * h).recip()))
        }
        3 => {
            let pos = &at(two * h)? - &at(h)?.scale_re(two);
            let neg = &at(-h)?.scale_re(two) - &at(-two * h)?;
            Ok((&pos + &neg).scale_re((two * h * h * h).recip()))
        }
        _ => Err(MoiError::UnsupportedOrder { m, min: 1, max: 3 }),
    }
}

/// Richardson extrapolation of the O(h^2) stencil across the documented
/// step ladder; the returned matrix is the extrapolant of the adjacent pair
/// best placed for the order. The stencil denominator h^m amplifies the
/// eigensolver noise floor near 1e-13, so first derivatives extrapolate
/// from the two finest steps while higher orders use the two coarsest.
pub fn richardson_fd<T: Real>(
    f: &ScalarFn<T>,
    a: &Mat<T>,
    k: &Mat<T>,
    m: usize,
) -> Result<Mat<T>, MoiError> {
    let (coarse, fine) = if m <= 1 {
        (FD_STEPS[1], FD_STEPS[2])
    } else {
        (FD_STEPS[0], FD_STEPS[1])
    };
    let d1 = fd_derivative(f, a, k, m, T::of(coarse))?;
    let d2 = fd_derivative(f, a, k, m, T::of(fine))?;
    // steps differ by 10, stencil error O(h^2): R = (100 d_fine - d_coarse)/99
    let r = (&d2.scale_re(T::of(100.0)) - &d1).scale_re(T::of(99.0).recip());
    Ok(r)
}
