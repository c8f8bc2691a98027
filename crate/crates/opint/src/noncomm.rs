//! Functions of noncommuting Hermitian pairs, triple operator integrals,
//! the representation formula for pair differences, Schatten Lipschitz
//! checks at p <= 2, and commutator trace experiments.
//!
//! f(A, B) is the ordered double sum over spectral projections,
//! sum f(lambda_j, mu_k) P_j Q_k. It is linear in f but not multiplicative.
//! Triple integrals place two matrices between three spectral measures;
//! at finite dimension every ordering convention evaluates to the same sum,
//! differing only in which norm bounds it obeys, so the slot marker picks a
//! contraction grouping and the bound semantics, not the value.

use num_complex::Complex;
use num_traits::Zero;
use thiserror::Error;

use crate::funkit::{
    besov_norm2, dd_kernel3_partial, dd_kernel3_partial_grids, default_coincidence_tol, Besov2,
    FunError, Kernel3, PartialAxis, ScalarFn, BESOV2_GRID,
};
use crate::matcore::{hermitian_eig, op_norm, schatten_norm, Eig, Mat, MatError};
use crate::report::{as_f64, rel_residual, Digest, Report};
use crate::rng::SplitMix64;
use crate::Real;

#[derive(Debug, Error)]
pub enum NoncommError {
    #[error("dimension mismatch: {detail}")]
    DimensionMismatch { detail: String },
    #[error("Schatten exponent p = {p} outside [1, 2]")]
    InvalidP { p: f64 },
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Fun(#[from] FunError),
}

/// Hermitian pair of equal size; no commutation assumed.
#[derive(Clone, Debug)]
pub struct OpPair<T> {
    pub a: Mat<T>,
    pub b: Mat<T>,
}

impl<T: Real> OpPair<T> {
    pub fn new(a: Mat<T>, b: Mat<T>) -> Result<Self, NoncommError> {
        if a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows() {
            return Err(NoncommError::DimensionMismatch {
                detail: format!("{}x{} vs {}x{}", a.rows(), a.cols(), b.rows(), b.cols()),
            });
        }
        for m in [&a, &b] {
            let defect = m.hermitian_defect();
            let tol = crate::matcore::hermitian_tol(m);
            if defect > tol {
                return Err(NoncommError::Mat(MatError::NonHermitian {
                    defect: as_f64(defect),
                    tol: as_f64(tol),
                }));
            }
        }
        Ok(Self { a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }
}

/// sum f(lambda_j, mu_k) P_j Q_k, evaluated as the kernel table of f
/// Schur-multiplied into the basis-overlap matrix.
pub fn noncomm_calc<T: Real>(f: &ScalarFn<T>, pair: &OpPair<T>) -> Result<Mat<T>, NoncommError> {
    assert_eq!(f.arity(), 2, "pair calculus needs a two-variable symbol");
    let ea = hermitian_eig(&pair.a)?;
    let eb = hermitian_eig(&pair.b)?;
    let n = ea.dim();
    let mut table = Mat::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let v = f.eval2(ea.values[j], eb.values[k]);
            if v.re.is_nan() || v.im.is_nan() {
                return Err(NoncommError::Mat(MatError::DomainError {
                    name: f.name().to_string(),
                    x: as_f64(ea.values[j]),
                }));
            }
            table[(j, k)] = v;
        }
    }
    let mixed = &ea.basis.adjoint() * &eb.basis;
    Ok(&(&ea.basis * &table.hadamard(&mixed)) * &eb.basis.adjoint())
}

/// Contraction grouping for a triple integral. All three evaluate to the
/// same matrix at finite dimension; they differ in which factorization-type
/// norm bound the result is reported against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotOrder {
    Standard,
    FirstKind,
    SecondKind,
}

/// Triple operator integral data: three decompositions, a three-argument
/// kernel on their spectra, and the two interleaved matrices.
#[derive(Clone, Debug)]
pub struct ToiSpec<T> {
    pub kernel: Kernel3<T>,
    pub decomps: [Eig<T>; 3],
    pub slots: SlotOrder,
    pub t: Mat<T>,
    pub r: Mat<T>,
}

impl<T: Real> ToiSpec<T> {
    pub fn new(
        kernel: Kernel3<T>,
        decomps: [Eig<T>; 3],
        slots: SlotOrder,
        t: Mat<T>,
        r: Mat<T>,
    ) -> Result<Self, NoncommError> {
        let grids = [&kernel.xs, &kernel.ys, &kernel.zs];
        for (d, grid) in grids.iter().enumerate() {
            if **grid != decomps[d].values {
                return Err(NoncommError::DimensionMismatch {
                    detail: format!("kernel grid {d} differs from spectrum {d}"),
                });
            }
        }
        if t.rows() != decomps[0].dim() || t.cols() != decomps[1].dim() {
            return Err(NoncommError::DimensionMismatch {
                detail: format!("T is {}x{}", t.rows(), t.cols()),
            });
        }
        if r.rows() != decomps[1].dim() || r.cols() != decomps[2].dim() {
            return Err(NoncommError::DimensionMismatch {
                detail: format!("R is {}x{}", r.rows(), r.cols()),
            });
        }
        Ok(Self { kernel, decomps, slots, t, r })
    }

    fn mixed(&self) -> (Mat<T>, Mat<T>) {
        let tp = &(&self.decomps[0].basis.adjoint() * &self.t) * &self.decomps[1].basis;
        let rp = &(&self.decomps[1].basis.adjoint() * &self.r) * &self.decomps[2].basis;
        (tp, rp)
    }
}

/// sum Psi(lambda_i, mu_j, nu_k) P_i T Q_j R S_k.
pub fn toi_apply<T: Real>(spec: &ToiSpec<T>) -> Result<Mat<T>, NoncommError> {
    let (tp, rp) = spec.mixed();
    let (n1, n2, n3) = (spec.decomps[0].dim(), spec.decomps[1].dim(), spec.decomps[2].dim());
    let k = &spec.kernel;
    let mut w = Mat::zeros(n1, n3);
    match spec.slots {
        SlotOrder::Standard => {
            for i in 0..n1 {
                for l in 0..n3 {
                    let mut acc = Complex::zero();
                    for j in 0..n2 {
                        acc = acc + k.at(i, j, l) * tp[(i, j)] * rp[(j, l)];
                    }
                    w[(i, l)] = acc;
                }
            }
        }
        SlotOrder::FirstKind => {
            // rank-one accumulation over the middle index
            for j in 0..n2 {
                for i in 0..n1 {
                    let tij = tp[(i, j)];
                    if tij.is_zero() {
                        continue;
                    }
                    for l in 0..n3 {
                        w[(i, l)] = w[(i, l)] + k.at(i, j, l) * tij * rp[(j, l)];
                    }
                }
            }
        }
        SlotOrder::SecondKind => {
            // column-major accumulation against the right factor
            for l in 0..n3 {
                for j in 0..n2 {
                    let rjl = rp[(j, l)];
                    if rjl.is_zero() {
                        continue;
                    }
                    for i in 0..n1 {
                        w[(i, l)] = w[(i, l)] + k.at(i, j, l) * tp[(i, j)] * rjl;
                    }
                }
            }
        }
    }
    Ok(&(&spec.decomps[0].basis * &w) * &spec.decomps[2].basis.adjoint())
}

/// Trace-duality cross-check: trace(W q) recomputed as the triple sum
/// sum Psi_ijk T'_ij R'_jk q'_ki without forming W.
pub fn toi_duality_check<T: Real>(
    spec: &ToiSpec<T>,
    q: &Mat<T>,
) -> Result<Report, NoncommError> {
    let (n1, n3) = (spec.decomps[0].dim(), spec.decomps[2].dim());
    if q.rows() != n3 || q.cols() != n1 {
        return Err(NoncommError::DimensionMismatch {
            detail: format!("test matrix is {}x{}, need {}x{}", q.rows(), q.cols(), n3, n1),
        });
    }
    let (tp, rp) = spec.mixed();
    let qp = &(&spec.decomps[2].basis.adjoint() * q) * &spec.decomps[0].basis;
    let mut dual = Complex::zero();
    for i in 0..n1 {
        for j in 0..spec.decomps[1].dim() {
            for l in 0..n3 {
                dual = dual + spec.kernel.at(i, j, l) * tp[(i, j)] * rp[(j, l)] * qp[(l, i)];
            }
        }
    }
    let direct = (&toi_apply(spec)? * q).trace();
    let report = Report::new(
        "toi_duality",
        &Digest::new().mat(&spec.t).mat(&spec.r).mat(q),
    )
    .with_norms(dual.norm(), direct.norm())
    .with_residual(rel_residual((dual - direct).norm(), direct.norm()));
    Ok(report)
}

/// Hilbert-Schmidt bound for the triple integral:
/// ||W||_{S_2} <= est * ||T|| * ||R||_{S_2}, with est a factorization upper
/// bound for the kernel supplied by the caller (exact for separable
/// kernels as the product of factor sup-norms).
pub fn toi_s2_check<T: Real>(spec: &ToiSpec<T>, kernel_est: T) -> Result<Report, NoncommError> {
    let w = toi_apply(spec)?;
    let lhs = schatten_norm(&w, T::of(2.0))?;
    let rhs = kernel_est * op_norm(&spec.t)? * schatten_norm(&spec.r, T::of(2.0))?;
    Ok(Report::new("toi_s2_check", &Digest::new().mat(&spec.t).mat(&spec.r))
        .with_norms(lhs, rhs)
        .with_residual(if rhs.is_zero() {
            T::zero()
        } else {
            (lhs / rhs - T::one()).max(T::zero())
        })
        .with_meta("kernel_est", format!("{}", as_f64(kernel_est))))
}

/// Truncated two-variable Besov estimate sized to the spectra of the given
/// matrices: radius at least twice the largest spectral radius, top dyadic
/// band capped by the sampling grid's Nyquist frequency.
pub fn besov_pair_estimate<T: Real>(
    f: &ScalarFn<T>,
    mats: &[&Mat<T>],
) -> Result<Besov2<T>, NoncommError> {
    let mut rad = T::one();
    for m in mats {
        rad = rad.max(op_norm(m)?);
    }
    let radius = (T::of(2.0) * rad).max(T::of(4.0));
    let nyquist = T::PI() * T::of(BESOV2_GRID as f64) / (T::of(2.0) * radius);
    let n_max = as_f64(nyquist).log2().floor() as i32 - 1;
    Ok(besov_norm2(f, T::one(), T::one(), (-8, n_max), radius)?)
}

fn besov_meta<T: Real>(report: Report, prefix: &str, est: &Besov2<T>) -> Report {
    report
        .with_meta(format!("{prefix}_besov"), format!("{}", as_f64(est.value)))
        .with_meta(
            format!("{prefix}_besov_bands"),
            format!("{}..={}", est.n_range.0, est.n_range.1),
        )
        .with_meta(format!("{prefix}_besov_grid"), format!("{}", est.grid))
        .with_meta(format!("{prefix}_besov_radius"), format!("{}", as_f64(est.radius)))
}

/// Representation of f(A1,B1) - f(A2,B2) as two triple integrals: the
/// partial divided difference in the first variable against A1 - A2, plus
/// the one in the second variable against B1 - B2.
pub fn pair_difference_repr<T: Real>(
    f: &ScalarFn<T>,
    pair1: &OpPair<T>,
    pair2: &OpPair<T>,
) -> Result<Report, NoncommError> {
    if pair1.dim() != pair2.dim() {
        return Err(NoncommError::DimensionMismatch {
            detail: format!("{} vs {}", pair1.dim(), pair2.dim()),
        });
    }
    let n = pair1.dim();
    let lhs = &noncomm_calc(f, pair1)? - &noncomm_calc(f, pair2)?;

    let ea1 = hermitian_eig(&pair1.a)?;
    let ea2 = hermitian_eig(&pair2.a)?;
    let eb1 = hermitian_eig(&pair1.b)?;
    let eb2 = hermitian_eig(&pair2.b)?;
    let tol = default_coincidence_tol::<T>();

    let k1 = dd_kernel3_partial_grids(
        f,
        PartialAxis::First,
        &ea1.values,
        &ea2.values,
        &eb1.values,
        tol,
    )?;
    let spec1 = ToiSpec::new(
        k1,
        [ea1, ea2.clone(), eb1.clone()],
        SlotOrder::Standard,
        &pair1.a - &pair2.a,
        Mat::identity(n),
    )?;

    let k2 = dd_kernel3_partial_grids(
        f,
        PartialAxis::Second,
        &ea2.values,
        &eb1.values,
        &eb2.values,
        tol,
    )?;
    let spec2 = ToiSpec::new(
        k2,
        [ea2, eb1, eb2],
        SlotOrder::Standard,
        Mat::identity(n),
        &pair1.b - &pair2.b,
    )?;

    let rhs = &toi_apply(&spec1)? + &toi_apply(&spec2)?;
    let diff = (&lhs - &rhs).frobenius();
    Ok(Report::new(
        "pair_difference_repr",
        &Digest::new().str(f.name()).mat(&pair1.a).mat(&pair1.b).mat(&pair2.a).mat(&pair2.b),
    )
    .with_norms(lhs.frobenius(), rhs.frobenius())
    .with_residual(rel_residual(diff, lhs.frobenius())))
}

/// Schatten-p Lipschitz experiment for p in [1, 2]: the ratio of
/// ||f(A1,B1) - f(A2,B2)||_{S_p} to max(||A1-A2||_{S_p}, ||B1-B2||_{S_p}),
/// with the Besov estimate of f alongside for normalized comparisons.
pub fn pair_lipschitz_check<T: Real>(
    f: &ScalarFn<T>,
    pair1: &OpPair<T>,
    pair2: &OpPair<T>,
    p: T,
) -> Result<Report, NoncommError> {
    if p.is_nan() || p < T::one() || p > T::of(2.0) {
        return Err(NoncommError::InvalidP { p: as_f64(p) });
    }
    let d = &noncomm_calc(f, pair1)? - &noncomm_calc(f, pair2)?;
    let lhs = schatten_norm(&d, p)?;
    let da = schatten_norm(&(&pair1.a - &pair2.a), p)?;
    let db = schatten_norm(&(&pair1.b - &pair2.b), p)?;
    let rhs = da.max(db);
    let besov = besov_pair_estimate(f, &[&pair1.a, &pair1.b, &pair2.a, &pair2.b])?;
    let report = Report::new(
        "pair_lipschitz",
        &Digest::new().str(f.name()).mat(&pair1.a).mat(&pair1.b).mat(&pair2.a).mat(&pair2.b),
    )
    .with_norms(lhs, rhs)
    .with_meta("p", format!("{}", as_f64(p)));
    Ok(besov_meta(report, "f", &besov))
}

/// Commutator representation: [f(A,B), Q] equals the triple integral of the
/// first partial divided difference against [A, Q] plus the one of the
/// second against [B, Q]. The report carries the trace-norm bound ratio
/// ||[f(A,B),Q]||_{S_1} / ((||[A,Q]||_{S_1} + ||[B,Q]||_{S_1}) * besov(f)).
pub fn commutator_repr<T: Real>(
    f: &ScalarFn<T>,
    pair: &OpPair<T>,
    q: &Mat<T>,
) -> Result<Report, NoncommError> {
    let n = pair.dim();
    if q.rows() != n || q.cols() != n {
        return Err(NoncommError::DimensionMismatch {
            detail: format!("test matrix is {}x{}, pair is {n}x{n}", q.rows(), q.cols()),
        });
    }
    let fab = noncomm_calc(f, pair)?;
    let lhs = &(&fab * q) - &(q * &fab);

    let ea = hermitian_eig(&pair.a)?;
    let eb = hermitian_eig(&pair.b)?;
    let tol = default_coincidence_tol::<T>();
    let aq = &(&pair.a * q) - &(q * &pair.a);
    let bq = &(&pair.b * q) - &(q * &pair.b);

    let k1 = dd_kernel3_partial(f, PartialAxis::First, &ea.values, &eb.values, tol)?;
    let spec1 = ToiSpec::new(
        k1,
        [ea.clone(), ea.clone(), eb.clone()],
        SlotOrder::Standard,
        aq.clone(),
        Mat::identity(n),
    )?;
    let k2 = dd_kernel3_partial(f, PartialAxis::Second, &ea.values, &eb.values, tol)?;
    let spec2 = ToiSpec::new(
        k2,
        [ea, eb.clone(), eb],
        SlotOrder::Standard,
        Mat::identity(n),
        bq.clone(),
    )?;
    let rhs = &toi_apply(&spec1)? + &toi_apply(&spec2)?;

    let besov = besov_pair_estimate(f, &[&pair.a, &pair.b])?;
    let one = T::one();
    let lhs_s1 = schatten_norm(&lhs, one)?;
    let denom = (schatten_norm(&aq, one)? + schatten_norm(&bq, one)?) * besov.value;
    let diff = (&lhs - &rhs).frobenius();
    let report = Report::new(
        "commutator_repr",
        &Digest::new().str(f.name()).mat(&pair.a).mat(&pair.b).mat(q),
    )
    .with_norms(lhs_s1, denom)
    .with_residual(rel_residual(diff, lhs.frobenius()));
    Ok(besov_meta(report, "f", &besov))
}

/// Trace and trace-norm of [phi(A,B), psi(A,B)]: the trace vanishes at
/// finite dimension (consistency check, kept in the residual), and the
/// S_1 norm is compared against ||[A,B]||_{S_1} * besov(phi) * besov(psi).
pub fn helton_howe_lhs<T: Real>(
    phi: &ScalarFn<T>,
    psi: &ScalarFn<T>,
    pair: &OpPair<T>,
) -> Result<Report, NoncommError> {
    let fphi = noncomm_calc(phi, pair)?;
    let fpsi = noncomm_calc(psi, pair)?;
    let c = &(&fphi * &fpsi) - &(&fpsi * &fphi);
    // trace(i [X, Y]) keeps the magnitude of trace([X, Y])
    let trace_abs = c.trace().norm();
    let s1 = schatten_norm(&c, T::one())?;

    let ab = &(&pair.a * &pair.b) - &(&pair.b * &pair.a);
    let ab_s1 = schatten_norm(&ab, T::one())?;
    let bphi = besov_pair_estimate(phi, &[&pair.a, &pair.b])?;
    let bpsi = besov_pair_estimate(psi, &[&pair.a, &pair.b])?;
    let denom = ab_s1 * bphi.value * bpsi.value;

    let report = Report::new(
        "helton_howe",
        &Digest::new().str(phi.name()).str(psi.name()).mat(&pair.a).mat(&pair.b),
    )
    .with_norms(s1, denom)
    .with_residual(trace_abs)
    .with_meta("ab_commutator_s1", format!("{}", as_f64(ab_s1)));
    let report = besov_meta(report, "phi", &bphi);
    Ok(besov_meta(report, "psi", &bpsi))
}

/// Seeded generator of almost-commuting Hermitian pairs: A diagonal with
/// spread eigenvalues, B Hermitian tridiagonal, off-diagonal of B scaled so
/// that ||[A, B]||_{S_1} hits the requested value exactly (the diagonal
/// parts commute, so the commutator is linear in the off-diagonal part).
pub fn almost_commuting_pair<T: Real>(
    n: usize,
    commutator_s1: T,
    rng: &mut SplitMix64,
) -> OpPair<T> {
    assert!(n >= 2);
    let mut d: Vec<T> = (0..n).map(|_| T::of(rng.gaussian())).collect();
    d.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    let a = Mat::diag_real(&d);

    let mut b = Mat::zeros(n, n);
    for j in 0..n {
        b[(j, j)] = Complex::new(T::of(rng.gaussian()), T::zero());
    }
    let s = T::of(0.5).sqrt();
    let mut off = Mat::zeros(n, n);
    for j in 0..n - 1 {
        let z = Complex::new(T::of(rng.gaussian()) * s, T::of(rng.gaussian()) * s);
        off[(j, j + 1)] = z;
        off[(j + 1, j)] = z.conj();
    }
    let comm = &(&a * &off) - &(&off * &a);
    let c = schatten_norm(&comm, T::one()).expect("commutator norm");
    let scale = if c.is_zero() { T::zero() } else { commutator_s1 / c };
    let b = &b + &off.scale_re(scale);
    OpPair { a, b }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doi::commuting_eig;
    use crate::funkit::{dd_kernel3_order2, exp_diff, monomial, product_xy, sin_fn, sin_sum};
    use crate::moi::{moi_apply, KernelN, MoiSpec};

    type M = Mat<f64>;

    fn proj_x() -> ScalarFn<f64> {
        ScalarFn::real_binary("x", 4, |(kx, ky), x, _| match (kx, ky) {
            (0, 0) => x,
            (1, 0) => 1.0,
            _ => 0.0,
        })
    }

    fn sum_xy() -> ScalarFn<f64> {
        ScalarFn::real_binary("x+y", 4, |(kx, ky), x, y| match (kx, ky) {
            (0, 0) => x + y,
            (1, 0) | (0, 1) => 1.0,
            _ => 0.0,
        })
    }

    fn random_pair(n: usize, rng: &mut SplitMix64) -> OpPair<f64> {
        OpPair::new(M::hermitian_gaussian(n, rng), M::hermitian_gaussian(n, rng)).unwrap()
    }

    #[test]
    fn product_symbol_gives_ordered_product() {
        let mut rng = SplitMix64::new(51);
        let pair = random_pair(4, &mut rng);
        let w = noncomm_calc(&product_xy(), &pair).unwrap();
        let direct = &pair.a * &pair.b;
        assert!((&w - &direct).frobenius() < 1e-12 * direct.frobenius());
    }

    #[test]
    fn separable_symbol_factors() {
        let mut rng = SplitMix64::new(52);
        let pair = random_pair(4, &mut rng);
        let f = ScalarFn::binary("sin(x)*exp(y/4)", 0, |_, x: f64, y: f64| {
            Complex::new(x.sin() * (0.25 * y).exp(), 0.0)
        });
        let w = noncomm_calc(&f, &pair).unwrap();
        let ga = hermitian_eig(&pair.a).unwrap().apply(|x| Complex::new(x.sin(), 0.0));
        let hb = hermitian_eig(&pair.b).unwrap().apply(|y| Complex::new((0.25 * y).exp(), 0.0));
        let direct = &ga * &hb;
        assert!((&w - &direct).frobenius() < 1e-11 * direct.frobenius().max(1.0));
    }

    #[test]
    fn commuting_pair_matches_joint_calculus() {
        let mut rng = SplitMix64::new(53);
        let h = M::hermitian_gaussian(4, &mut rng);
        let e = hermitian_eig(&h).unwrap();
        let a = e.apply(|x| Complex::new(x, 0.0));
        let b = e.apply(|x| Complex::new(x * x - 0.5, 0.0));
        let pair = OpPair::new(a.clone(), b.clone()).unwrap();
        let w = noncomm_calc(&sin_sum(), &pair).unwrap();
        let joint = commuting_eig(&a, &b).unwrap().apply2(&sin_sum());
        assert!((&w - &joint).frobenius() < 1e-10 * joint.frobenius().max(1.0));
    }

    #[test]
    fn calculus_is_linear() {
        let mut rng = SplitMix64::new(54);
        let pair = random_pair(3, &mut rng);
        let combo = ScalarFn::binary("2xy-3sin(x+y)", 0, |_, x: f64, y: f64| {
            Complex::new(2.0 * x * y - 3.0 * (x + y).sin(), 0.0)
        });
        let w = noncomm_calc(&combo, &pair).unwrap();
        let w1 = noncomm_calc(&product_xy(), &pair).unwrap();
        let w2 = noncomm_calc(&sin_sum(), &pair).unwrap();
        let lin = &w1.scale_re(2.0) - &w2.scale_re(3.0);
        assert!((&w - &lin).frobenius() < 1e-12 * lin.frobenius().max(1.0));
    }

    fn toi_fixture(rng: &mut SplitMix64) -> ([Eig<f64>; 3], M, M) {
        let es = [
            hermitian_eig(&M::hermitian_gaussian(3, rng)).unwrap(),
            hermitian_eig(&M::hermitian_gaussian(3, rng)).unwrap(),
            hermitian_eig(&M::hermitian_gaussian(3, rng)).unwrap(),
        ];
        let t = M::gaussian(3, 3, rng);
        let r = M::gaussian(3, 3, rng);
        (es, t, r)
    }

    #[test]
    fn constant_kernel_gives_product() {
        let mut rng = SplitMix64::new(55);
        let (es, t, r) = toi_fixture(&mut rng);
        let k = Kernel3::from_fn(
            es[0].values.clone(),
            es[1].values.clone(),
            es[2].values.clone(),
            |_, _, _| Complex::new(1.0, 0.0),
        );
        let spec = ToiSpec::new(k, es, SlotOrder::Standard, t.clone(), r.clone()).unwrap();
        let w = toi_apply(&spec).unwrap();
        let direct = &t * &r;
        assert!((&w - &direct).frobenius() < 1e-12 * direct.frobenius());
    }

    #[test]
    fn separable_kernel_factors_and_s2_bound_holds() {
        let mut rng = SplitMix64::new(56);
        let (es, t, r) = toi_fixture(&mut rng);
        let fa = |x: f64| Complex::new(x.sin(), 0.0);
        let fb = |x: f64| Complex::new((0.2 * x).exp(), 0.0);
        let fc = |x: f64| Complex::new(x * x, 0.0);
        let k = Kernel3::from_fn(
            es[0].values.clone(),
            es[1].values.clone(),
            es[2].values.clone(),
            |x, y, z| fa(x) * fb(y) * fc(z),
        );
        let spec = ToiSpec::new(k, es.clone(), SlotOrder::Standard, t.clone(), r.clone()).unwrap();
        let w = toi_apply(&spec).unwrap();
        let direct = &(&(&es[0].apply(fa) * &t) * &es[1].apply(fb)) * &(&r * &es[2].apply(fc));
        assert!((&w - &direct).frobenius() < 1e-11 * direct.frobenius().max(1.0));

        let est = es[0].values.iter().map(|&x| fa(x).norm()).fold(0.0, f64::max)
            * es[1].values.iter().map(|&x| fb(x).norm()).fold(0.0, f64::max)
            * es[2].values.iter().map(|&x| fc(x).norm()).fold(0.0, f64::max);
        let rep = toi_s2_check(&spec, est).unwrap();
        assert!(rep.residual <= 1e-12, "S2 bound violated: {}", rep.residual);
    }

    #[test]
    fn slot_orders_agree_and_match_moi() {
        let mut rng = SplitMix64::new(57);
        let (es, t, r) = toi_fixture(&mut rng);
        let k = dd_kernel3_order2(
            &sin_fn(),
            &es[0].values,
            &es[1].values,
            &es[2].values,
            default_coincidence_tol(),
        )
        .unwrap();
        let mut results = Vec::new();
        for slots in [SlotOrder::Standard, SlotOrder::FirstKind, SlotOrder::SecondKind] {
            let spec = ToiSpec::new(k.clone(), es.clone(), slots, t.clone(), r.clone()).unwrap();
            results.push(toi_apply(&spec).unwrap());
        }
        for w in &results[1..] {
            assert!((w - &results[0]).frobenius() <= 1e-12 * results[0].frobenius());
        }

        let mspec = MoiSpec::new(
            es.to_vec(),
            KernelN::from(k),
            vec![t.clone(), r.clone()],
        )
        .unwrap();
        let via_moi = moi_apply(&mspec).unwrap();
        assert!((&results[0] - &via_moi).frobenius() <= 1e-12 * via_moi.frobenius());
    }

    #[test]
    fn duality_pairing_matches() {
        let mut rng = SplitMix64::new(58);
        let (es, t, r) = toi_fixture(&mut rng);
        let k = dd_kernel3_order2(
            &monomial(3),
            &es[0].values,
            &es[1].values,
            &es[2].values,
            default_coincidence_tol(),
        )
        .unwrap();
        let spec = ToiSpec::new(k, es, SlotOrder::FirstKind, t, r).unwrap();
        let q = M::gaussian(3, 3, &mut rng);
        let rep = toi_duality_check(&spec, &q).unwrap();
        assert!(rep.residual <= 1e-12, "duality residual {}", rep.residual);
    }

    #[test]
    fn pair_difference_trivial_symbols() {
        let mut rng = SplitMix64::new(59);
        let p1 = random_pair(4, &mut rng);
        let p2 = random_pair(4, &mut rng);
        let rep_x = pair_difference_repr(&proj_x(), &p1, &p2).unwrap();
        assert!(rep_x.residual <= 1e-12, "x residual {}", rep_x.residual);
        let da = (&p1.a - &p2.a).frobenius();
        assert!((rep_x.lhs_norm - da).abs() <= 1e-12 * da);

        let rep_xy = pair_difference_repr(&product_xy(), &p1, &p2).unwrap();
        assert!(rep_xy.residual <= 1e-10, "xy residual {}", rep_xy.residual);
    }

    #[test]
    fn pair_difference_smooth_symbols() {
        let mut rng = SplitMix64::new(60);
        for f in [sin_sum(), exp_diff()] {
            let p1 = random_pair(4, &mut rng);
            let p2 = random_pair(4, &mut rng);
            let rep = pair_difference_repr(&f, &p1, &p2).unwrap();
            assert!(rep.residual <= 1e-8, "{} residual {}", f.name(), rep.residual);
        }
    }

    #[test]
    fn lipschitz_check_validates_p() {
        let mut rng = SplitMix64::new(61);
        let p1 = random_pair(3, &mut rng);
        assert!(matches!(
            pair_lipschitz_check(&sum_xy(), &p1, &p1, 3.0),
            Err(NoncommError::InvalidP { .. })
        ));
    }

    #[test]
    fn lipschitz_sum_symbol_is_two_lipschitz() {
        let mut rng = SplitMix64::new(62);
        let p1 = random_pair(4, &mut rng);
        let p2 = random_pair(4, &mut rng);
        let rep = pair_lipschitz_check(&sum_xy(), &p1, &p2, 2.0).unwrap();
        assert!(rep.ratio <= 2.0 + 1e-12, "ratio {}", rep.ratio);
        let same = pair_lipschitz_check(&sum_xy(), &p1, &p1, 1.0).unwrap();
        assert_eq!(same.lhs_norm, 0.0);
        assert_eq!(same.rhs_norm, 0.0);
    }

    #[test]
    fn commutator_repr_trivial_and_product() {
        let mut rng = SplitMix64::new(63);
        let pair = random_pair(4, &mut rng);
        let q = M::gaussian(4, 4, &mut rng);
        let rep_x = commutator_repr(&proj_x(), &pair, &q).unwrap();
        assert!(rep_x.residual <= 1e-12, "x residual {}", rep_x.residual);
        let rep_xy = commutator_repr(&product_xy(), &pair, &q).unwrap();
        assert!(rep_xy.residual <= 1e-9, "xy residual {}", rep_xy.residual);
    }

    #[test]
    fn helton_howe_trace_vanishes() {
        let mut rng = SplitMix64::new(64);
        let pair = random_pair(4, &mut rng);
        let rep = helton_howe_lhs(&sin_sum(), &product_xy(), &pair).unwrap();
        assert!(rep.residual <= 1e-9 * (1.0 + rep.lhs_norm), "trace {}", rep.residual);
        assert!(rep.lhs_norm.is_finite());
    }

    #[test]
    fn almost_commuting_generator_hits_target() {
        let mut rng = SplitMix64::new(65);
        let pair = almost_commuting_pair::<f64>(5, 1e-3, &mut rng);
        let ab = &(&pair.a * &pair.b) - &(&pair.b * &pair.a);
        let s1 = schatten_norm(&ab, 1.0).unwrap();
        assert!((s1 - 1e-3).abs() <= 1e-12, "s1 {s1}");
        assert!(pair.a.hermitian_defect() == 0.0);
        assert!(pair.b.hermitian_defect() <= 1e-15);
    }
}
