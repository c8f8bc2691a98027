//! Spectral shift functions and trace formulas at matrix scale: the
//! order-1 shift function by exact eigenvalue counting, the coupling
//! measure nu obtained by integrating spectral flows in the coupling
//! parameter, and Taylor remainders of t -> f(A + tK) with their trace
//! bounds.
//!
//! Orientation: everything here is normalized so that
//! trace(f(B) - f(A)) = integral of f' against the shift object. The
//! opposite sign convention also appears in the literature; reports note
//! the orientation in their metadata.

use num_complex::Complex;
use num_traits::Zero;
use thiserror::Error;

use crate::funkit::{factorial, FunError, ScalarFn};
use crate::matcore::{hermitian_eig, mat_fun, schatten_norm, Mat, MatError};
use crate::moi::{higher_derivative, moi_apply, KernelN, MoiError, MoiSpec};
use crate::quad::gauss_legendre;
use crate::report::{as_f64, rel_residual, Digest, Report};
use crate::Real;

#[derive(Debug, Error)]
pub enum ShiftError {
    #[error("dimension mismatch: {detail}")]
    DimensionMismatch { detail: String },
    #[error("unsupported remainder order m = {m} (supported 1..=3)")]
    UnsupportedOrder { m: usize },
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Fun(#[from] FunError),
    #[error(transparent)]
    Moi(#[from] MoiError),
}

/// Piecewise-constant function with compact support: values[k] on the open
/// interval (breakpoints[k], breakpoints[k+1]), zero outside the hull.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFn<T> {
    pub breakpoints: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> StepFn<T> {
    pub fn new(breakpoints: Vec<T>, values: Vec<T>) -> Self {
        if breakpoints.is_empty() {
            assert!(values.is_empty());
        } else {
            assert_eq!(values.len() + 1, breakpoints.len());
        }
        for w in breakpoints.windows(2) {
            assert!(w[0] < w[1], "breakpoints must be strictly ascending");
        }
        assert!(values.iter().all(|v| v.is_finite()));
        Self { breakpoints, values }
    }

    pub fn value(&self, s: T) -> T {
        for (k, v) in self.values.iter().enumerate() {
            if s > self.breakpoints[k] && s < self.breakpoints[k + 1] {
                return *v;
            }
        }
        T::zero()
    }

    pub fn integral(&self) -> T {
        let mut acc = T::zero();
        for (k, &v) in self.values.iter().enumerate() {
            acc += v * (self.breakpoints[k + 1] - self.breakpoints[k]);
        }
        acc
    }

    pub fn l1_norm(&self) -> T {
        let mut acc = T::zero();
        for (k, &v) in self.values.iter().enumerate() {
            acc += v.abs() * (self.breakpoints[k + 1] - self.breakpoints[k]);
        }
        acc
    }

    /// Exact evaluation of the Stieltjes pairing with f': since the function
    /// is constant on each interval, integral f' xi ds telescopes to
    /// sum_k xi_k (f(b_{k+1}) - f(b_k)). No quadrature involved.
    pub fn pair_with_derivative(&self, f: &ScalarFn<T>) -> Complex<T> {
        let mut acc = Complex::zero();
        for (k, &v) in self.values.iter().enumerate() {
            let hi = f.eval1(self.breakpoints[k + 1]);
            let lo = f.eval1(self.breakpoints[k]);
            acc = acc + (hi - lo) * Complex::new(v, T::zero());
        }
        acc
    }

    pub fn to_json(&self) -> String {
        let bp: Vec<String> =
            self.breakpoints.iter().map(|&b| format!("{:.16e}", as_f64(b))).collect();
        let vs: Vec<String> = self.values.iter().map(|&v| format!("{:.16e}", as_f64(v))).collect();
        format!("{{\"breakpoints\":[{}],\"values\":[{}]}}", bp.join(","), vs.join(","))
    }
}

/// Finite signed measure given by point masses.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicMeasure<T> {
    pub atoms: Vec<(T, T)>,
}

impl<T: Real> AtomicMeasure<T> {
    pub fn total_mass(&self) -> T {
        self.atoms.iter().fold(T::zero(), |a, &(_, m)| a + m)
    }

    pub fn total_variation(&self) -> T {
        self.atoms.iter().fold(T::zero(), |a, &(_, m)| a + m.abs())
    }

    pub fn integrate(&self, g: impl Fn(T) -> Complex<T>) -> Complex<T> {
        let mut acc = Complex::zero();
        for &(x, m) in &self.atoms {
            acc = acc + g(x) * Complex::new(m, T::zero());
        }
        acc
    }

    pub fn to_json(&self) -> String {
        let items: Vec<String> = self
            .atoms
            .iter()
            .map(|&(x, m)| {
                format!("{{\"x\":{:.16e},\"mass\":{:.16e}}}", as_f64(x), as_f64(m))
            })
            .collect();
        format!("{{\"atoms\":[{}]}}", items.join(","))
    }
}

fn check_square_pair<T: Real>(a: &Mat<T>, b: &Mat<T>) -> Result<(), ShiftError> {
    if a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows() {
        return Err(ShiftError::DimensionMismatch {
            detail: format!("{}x{} vs {}x{}", a.rows(), a.cols(), b.rows(), b.cols()),
        });
    }
    Ok(())
}

/// First-order spectral shift by eigenvalue counting:
/// xi(s) = #{eigenvalues of B above s} - #{eigenvalues of A above s},
/// assembled on the merged spectrum. Strict ">" counting; the values at
/// breakpoints have measure zero and are not stored.
pub fn spectral_shift<T: Real>(a: &Mat<T>, b: &Mat<T>) -> Result<StepFn<T>, ShiftError> {
    check_square_pair(a, b)?;
    let la = hermitian_eig(a)?.values;
    let lb = hermitian_eig(b)?.values;
    let mut merged: Vec<T> = la.iter().chain(lb.iter()).copied().collect();
    merged.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    merged.dedup();
    if merged.len() < 2 {
        return Ok(StepFn::new(Vec::new(), Vec::new()));
    }
    let count_above = |vals: &[T], s: T| vals.iter().filter(|&&v| v > s).count() as i64;
    let mut values = Vec::with_capacity(merged.len() - 1);
    for w in merged.windows(2) {
        let mid = (w[0] + w[1]) * T::of(0.5);
        let diff = count_above(&lb, mid) - count_above(&la, mid);
        values.push(T::of(diff as f64));
    }
    Ok(StepFn::new(merged, values))
}

/// Trace formula check: trace(f(B) - f(A)) against the exact step-function
/// pairing of f' with the spectral shift.
pub fn krein_trace_check<T: Real>(
    f: &ScalarFn<T>,
    a: &Mat<T>,
    b: &Mat<T>,
) -> Result<(T, T, T), ShiftError> {
    check_square_pair(a, b)?;
    let ea = hermitian_eig(a)?;
    let eb = hermitian_eig(b)?;
    let lhs_c = mat_fun(f, &eb)?.trace() - mat_fun(f, &ea)?.trace();
    let xi = spectral_shift(a, b)?;
    let rhs_c = xi.pair_with_derivative(f);
    let residual = (lhs_c - rhs_c).norm();
    Ok((lhs_c.re, rhs_c.re, residual))
}

/// Eigenvalue flows of A + u(B - A) across the quadrature nodes, with the
/// number of nodes where nearest-neighbor matching to the previous node is
/// not the sorted identity (a crossing indicator).
pub fn coupling_flows<T: Real>(
    a: &Mat<T>,
    b: &Mat<T>,
    order: usize,
) -> Result<(Vec<T>, Vec<Vec<T>>, usize), ShiftError> {
    check_square_pair(a, b)?;
    let t = b - a;
    let (nodes, _) = gauss_legendre::<T>(order);
    let half = T::of(0.5);
    let us: Vec<T> = nodes.iter().map(|&x| (x + T::one()) * half).collect();
    let mut flows: Vec<Vec<T>> = Vec::with_capacity(order);
    let mut crossings = 0usize;
    for &u in &us {
        let vals = hermitian_eig(&(a + &t.scale_re(u)))?.values;
        if let Some(prev) = flows.last() {
            for (j, &lam) in prev.iter().enumerate() {
                let nearest = vals
                    .iter()
                    .enumerate()
                    .min_by(|(_, x), (_, y)| {
                        (**x - lam).abs().partial_cmp(&(**y - lam).abs()).unwrap()
                    })
                    .map(|(i, _)| i)
                    .unwrap_or(j);
                if nearest != j {
                    crossings += 1;
                    break;
                }
            }
        }
        flows.push(vals);
    }
    Ok((us, flows, crossings))
}

/// Coupling measure nu = integral over u in [0,1] of the atomic measures
/// sum_j <T v_j(u), v_j(u)> delta at lambda_j(u), discretized by
/// Gauss-Legendre in u. Oriented so integral f' d(nu) tracks
/// trace(f(B) - f(A)).
pub fn birman_solomyak_nu<T: Real>(
    a: &Mat<T>,
    b: &Mat<T>,
    u_quadrature_order: usize,
) -> Result<AtomicMeasure<T>, ShiftError> {
    check_square_pair(a, b)?;
    let t = b - a;
    let (nodes, weights) = gauss_legendre::<T>(u_quadrature_order);
    let half = T::of(0.5);
    let mut atoms = Vec::new();
    for (&x, &w) in nodes.iter().zip(&weights) {
        let u = (x + T::one()) * half;
        let wu = w * half;
        let e = hermitian_eig(&(a + &t.scale_re(u)))?;
        // diagonal of V* T V gives <T v_j, v_j>, real for Hermitian T
        let mixed = &(&e.basis.adjoint() * &t) * &e.basis;
        for j in 0..e.dim() {
            let mass = wu * mixed[(j, j)].re;
            if mass != T::zero() {
                atoms.push((e.values[j], mass));
            }
        }
    }
    Ok(AtomicMeasure { atoms })
}

/// Report for the coupling-measure trace formula at the given quadrature
/// order. Residual is |trace(f(B)-f(A)) - integral f' d(nu)|, relative to
/// the trace scale.
pub fn nu_trace_check<T: Real>(
    f: &ScalarFn<T>,
    a: &Mat<T>,
    b: &Mat<T>,
    u_quadrature_order: usize,
) -> Result<Report, ShiftError> {
    let nu = birman_solomyak_nu(a, b, u_quadrature_order)?;
    let ea = hermitian_eig(a)?;
    let eb = hermitian_eig(b)?;
    let lhs = (mat_fun(f, &eb)?.trace() - mat_fun(f, &ea)?.trace()).norm();
    let mut rhs_c = Complex::zero();
    for &(x, mass) in &nu.atoms {
        rhs_c = rhs_c + f.deriv1(1, x)? * Complex::new(mass, T::zero());
    }
    let rhs = rhs_c.norm();
    Ok(Report::new(
        "nu_trace_check",
        &Digest::new().str(f.name()).mat(a).mat(b).u64(u_quadrature_order as u64),
    )
    .with_norms(lhs, rhs)
    .with_residual(rel_residual((lhs - rhs).abs(), lhs))
    .with_meta("orientation", "integral f' d(nu) = trace(f(B)-f(A)); the opposite sign convention also appears in the literature")
    .with_meta("u_quadrature_order", format!("{u_quadrature_order}"))
    .with_meta("total_variation", format!("{}", as_f64(nu.total_variation()))))
}

/// Taylor remainder of order m: f(A+K) minus the Taylor polynomial of
/// t -> f(A + tK) at t = 0 through order m - 1.
pub fn taylor_remainder<T: Real>(
    f: &ScalarFn<T>,
    a: &Mat<T>,
    k: &Mat<T>,
    m: usize,
) -> Result<Mat<T>, ShiftError> {
    if !(1..=3).contains(&m) {
        return Err(ShiftError::UnsupportedOrder { m });
    }
    check_square_pair(a, k)?;
    let eak = hermitian_eig(&(a + k))?;
    let ea = hermitian_eig(a)?;
    let mut acc = &mat_fun(f, &eak)? - &mat_fun(f, &ea)?;
    for order in 1..m {
        let d = higher_derivative(f, a, k, order, crate::funkit::default_coincidence_tol())?;
        acc = &acc - &d.scale_re(factorial::<T>(order).recip());
    }
    Ok(acc)
}

/// The same remainder through the integral representation: the order-m
/// divided-difference kernel over E_{A+K} followed by m copies of E_A,
/// with K in every interleaved slot. No factorial here.
pub fn taylor_remainder_moi<T: Real>(
    f: &ScalarFn<T>,
    a: &Mat<T>,
    k: &Mat<T>,
    m: usize,
) -> Result<Mat<T>, ShiftError> {
    if !(1..=3).contains(&m) {
        return Err(ShiftError::UnsupportedOrder { m });
    }
    check_square_pair(a, k)?;
    let ea = hermitian_eig(a)?;
    let eak = hermitian_eig(&(a + k))?;
    let mut decomps = vec![eak];
    decomps.extend(std::iter::repeat_with(|| ea.clone()).take(m));
    let grids: Vec<Vec<T>> = decomps.iter().map(|e| e.values.clone()).collect();
    let kernel = KernelN::dd_symbol(f, grids, crate::funkit::default_coincidence_tol())?;
    let spec = MoiSpec::new(decomps, kernel, vec![k.clone(); m])?;
    Ok(moi_apply(&spec)?)
}

/// Both remainder routes with an agreement report (relative Frobenius
/// residual of integral route against the direct subtraction).
pub fn taylor_remainder_check<T: Real>(
    f: &ScalarFn<T>,
    a: &Mat<T>,
    k: &Mat<T>,
    m: usize,
) -> Result<(Mat<T>, Report), ShiftError> {
    let direct = taylor_remainder(f, a, k, m)?;
    let via_moi = taylor_remainder_moi(f, a, k, m)?;
    let diff = (&via_moi - &direct).frobenius();
    let report = Report::new(
        "taylor_remainder",
        &Digest::new().str(f.name()).mat(a).mat(k).u64(m as u64),
    )
    .with_norms(via_moi.frobenius(), direct.frobenius())
    .with_residual(rel_residual(diff, direct.frobenius()));
    Ok((direct, report))
}

/// Trace bound for the order-m remainder: reports |trace T^(m)| against
/// sup|f^(m)| * ||K||_{S_m}^m; the ratio is the implied constant.
pub fn remainder_trace_bound<T: Real>(
    f: &ScalarFn<T>,
    a: &Mat<T>,
    k: &Mat<T>,
    m: usize,
) -> Result<Report, ShiftError> {
    let rem = taylor_remainder(f, a, k, m)?;
    let tr = rem.trace().norm();

    let ea = hermitian_eig(a)?;
    let eak = hermitian_eig(&(a + k))?;
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for v in ea.values.iter().chain(eak.values.iter()) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    let samples = 512usize;
    let mut sup = T::zero();
    for i in 0..=samples {
        let x = lo + (hi - lo) * T::of(i as f64 / samples as f64);
        sup = sup.max(f.deriv1(m, x)?.norm());
    }
    let km = schatten_norm(k, T::of(m as f64))?;
    let rhs = sup * km.powi(m as i32);
    Ok(Report::new(
        "remainder_trace_bound",
        &Digest::new().str(f.name()).mat(a).mat(k).u64(m as u64),
    )
    .with_norms(tr, rhs)
    .with_meta("f_deriv_sup", format!("{}", as_f64(sup)))
    .with_meta("k_schatten_m", format!("{}", as_f64(km)))
    .with_meta("order", format!("{m}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funkit::{exp_fn, monomial, sin_fn};
    use crate::rng::SplitMix64;

    type M = Mat<f64>;

    fn diag(vals: &[f64]) -> M {
        M::diag_real(vals)
    }

    #[test]
    fn shift_of_equal_operators_vanishes() {
        let a = diag(&[0.3, 1.7, -0.4]);
        let xi = spectral_shift(&a, &a).unwrap();
        assert!(xi.values.iter().all(|&v| v == 0.0));
        assert_eq!(xi.integral(), 0.0);
    }

    #[test]
    fn shift_of_interleaved_diagonals() {
        let a = diag(&[0.0, 2.0]);
        let b = diag(&[1.0, 3.0]);
        let xi = spectral_shift(&a, &b).unwrap();
        assert_eq!(xi.breakpoints, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(xi.values, vec![1.0, 0.0, 1.0]);
        assert!((xi.integral() - 2.0).abs() < 1e-12);
        assert!((xi.l1_norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn shift_blind_to_spectrum_swap() {
        let a = diag(&[0.0, 1.0]);
        let b = diag(&[1.0, 0.0]);
        let xi = spectral_shift(&a, &b).unwrap();
        assert!(xi.values.iter().all(|&v| v == 0.0));
        // the perturbation itself is large; equal spectra erase it
        assert!((schatten_norm(&(&b - &a), 1.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn krein_identity_for_polynomials() {
        let a = diag(&[0.0, 2.0]);
        let b = diag(&[1.0, 3.0]);
        let (lhs, rhs, res) = krein_trace_check(&monomial(1), &a, &b).unwrap();
        assert!((lhs - 2.0).abs() < 1e-12);
        assert!(res < 1e-12, "{lhs} vs {rhs}");
        let (lhs2, _, res2) = krein_trace_check(&monomial(2), &a, &b).unwrap();
        assert!((lhs2 - 6.0).abs() < 1e-12);
        assert!(res2 < 1e-12);
    }

    #[test]
    fn krein_identity_low_rank_exp() {
        let mut rng = SplitMix64::new(41);
        let a = M::hermitian_gaussian(6, &mut rng);
        // rank-2 Hermitian perturbation
        let g = M::gaussian(6, 2, &mut rng);
        let b = &a + &(&g * &g.adjoint()).scale_re(0.5);
        let (lhs, _, res) = krein_trace_check(&exp_fn(), &a, &b).unwrap();
        assert!(res <= 1e-9 * (1.0 + lhs.abs()), "residual {res}");
    }

    #[test]
    fn l1_bound_and_positivity() {
        let mut rng = SplitMix64::new(42);
        for _ in 0..10 {
            let a = M::hermitian_gaussian(5, &mut rng);
            let p = M::gaussian(5, 5, &mut rng);
            let psd = &p * &p.adjoint();
            let b = &a + &psd;
            let xi = spectral_shift(&a, &b).unwrap();
            assert!(xi.values.iter().all(|&v| v >= 0.0));
            let s1 = schatten_norm(&psd, 1.0).unwrap();
            assert!((xi.l1_norm() - s1).abs() < 1e-8 * (1.0 + s1));
            assert!((xi.integral() - psd.trace().re).abs() < 1e-9 * (1.0 + s1));
        }
    }

    #[test]
    fn nu_vanishes_at_zero_perturbation() {
        let a = diag(&[1.0, -2.0]);
        let nu = birman_solomyak_nu(&a, &a, 8).unwrap();
        assert!(nu.atoms.is_empty());
    }

    #[test]
    fn nu_total_mass_is_trace_for_diagonal_flow() {
        let a = diag(&[0.0, 1.0, 4.0]);
        let b = diag(&[0.5, 2.0, 3.0]);
        let nu = birman_solomyak_nu(&a, &b, 16).unwrap();
        let tr = (&b - &a).trace().re;
        assert!((nu.total_mass() - tr).abs() < 1e-12);
        // diagonal flow: atoms sit on the segments (1-u) lambda_j + u mu_j
        for &(x, _) in &nu.atoms {
            let on_some_segment = (0..3).any(|j| {
                let (lo, hi) = (a[(j, j)].re.min(b[(j, j)].re), a[(j, j)].re.max(b[(j, j)].re));
                x >= lo - 1e-12 && x <= hi + 1e-12
            });
            assert!(on_some_segment);
        }
        let s1 = schatten_norm(&(&b - &a), 1.0).unwrap();
        assert!(nu.total_variation() <= s1 + 1e-10);
    }

    #[test]
    fn coupling_flows_are_segments_for_diagonals() {
        let a = diag(&[0.0, 1.0, 4.0]);
        let b = diag(&[0.5, 2.0, 3.0]);
        let (us, flows, crossings) = coupling_flows(&a, &b, 8).unwrap();
        assert_eq!(crossings, 0);
        let start = [0.0, 1.0, 4.0];
        let end = [0.5, 2.0, 3.0];
        for (i, &u) in us.iter().enumerate() {
            for j in 0..3 {
                let expect = (1.0 - u) * start[j] + u * end[j];
                assert!((flows[i][j] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nu_trace_formula_at_order_32() {
        let mut rng = SplitMix64::new(43);
        let a = M::hermitian_gaussian(4, &mut rng);
        let b = &a + &M::hermitian_gaussian(4, &mut rng).scale_re(0.5);
        let report = nu_trace_check(&exp_fn(), &a, &b, 32).unwrap();
        assert!(
            (report.lhs_norm - report.rhs_norm).abs() <= 1e-4,
            "{} vs {}",
            report.lhs_norm,
            report.rhs_norm
        );
    }

    #[test]
    fn remainder_of_square_is_k_squared() {
        let mut rng = SplitMix64::new(44);
        let a = M::hermitian_gaussian(4, &mut rng);
        let k = M::hermitian_gaussian(4, &mut rng);
        let r = taylor_remainder(&monomial(2), &a, &k, 2).unwrap();
        let k2 = &k * &k;
        assert!((&r - &k2).frobenius() < 1e-9 * k2.frobenius());
    }

    #[test]
    fn remainder_of_cube_order_two() {
        let mut rng = SplitMix64::new(45);
        let a = M::hermitian_gaussian(3, &mut rng);
        let k = M::hermitian_gaussian(3, &mut rng);
        let r = taylor_remainder(&monomial(3), &a, &k, 2).unwrap();
        let expected = &(&(&(&a * &k) * &k) + &(&(&k * &a) * &k))
            + &(&(&(&k * &k) * &a) + &(&(&k * &k) * &k));
        assert!((&r - &expected).frobenius() < 1e-9 * expected.frobenius());
    }

    #[test]
    fn remainder_routes_agree() {
        let mut rng = SplitMix64::new(46);
        let a = M::hermitian_gaussian(4, &mut rng);
        let k = M::hermitian_gaussian(4, &mut rng).scale_re(0.3);
        for m in 1..=3 {
            let (_, report) = taylor_remainder_check(&exp_fn(), &a, &k, m).unwrap();
            assert!(report.residual <= 1e-7, "m={m} residual {}", report.residual);
        }
    }

    #[test]
    fn remainder_scales_at_order_two() {
        let mut rng = SplitMix64::new(47);
        let a = M::hermitian_gaussian(4, &mut rng);
        let k0 = M::hermitian_gaussian(4, &mut rng);
        let k0 = k0.scale_re(1.0 / crate::matcore::op_norm(&k0).unwrap());
        let mut norms = Vec::new();
        for scale in [1e-1, 1e-2, 1e-3] {
            let r = taylor_remainder(&exp_fn(), &a, &k0.scale_re(scale), 2).unwrap();
            norms.push(r.frobenius());
        }
        // successive decades, O(t^2) remainder: log-log slope >= 1.9
        for w in norms.windows(2) {
            let slope = (w[0] / w[1]).log10();
            assert!(slope >= 1.9, "slope {slope}");
        }
    }

    #[test]
    fn trace_bound_linear_vanishes_and_square_is_half() {
        let mut rng = SplitMix64::new(48);
        let a = M::hermitian_gaussian(4, &mut rng);
        let k = M::hermitian_gaussian(4, &mut rng);
        let lin = remainder_trace_bound(&monomial(1), &a, &k, 2).unwrap();
        assert!(lin.lhs_norm < 1e-10 * (1.0 + lin.rhs_norm));
        let sq = remainder_trace_bound(&monomial(2), &a, &k, 2).unwrap();
        assert!((sq.ratio - 0.5).abs() < 1e-9, "implied constant {}", sq.ratio);
    }

    #[test]
    fn trace_bound_sin_constant_is_finite() {
        let mut rng = SplitMix64::new(49);
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let a = M::hermitian_gaussian(4, &mut rng);
            let k = M::hermitian_gaussian(4, &mut rng).scale_re(0.5);
            let rep = remainder_trace_bound(&sin_fn(), &a, &k, 2).unwrap();
            assert!(rep.ratio.is_finite());
            worst = worst.max(rep.ratio);
        }
        assert!(worst <= 10.0, "implied constant {worst}");
    }

    #[test]
    fn order_cap() {
        let a = M::identity(2);
        assert!(matches!(
            taylor_remainder(&exp_fn(), &a, &a, 4),
            Err(ShiftError::UnsupportedOrder { m: 4 })
        ));
    }

    #[test]
    fn step_fn_json_shape() {
        let xi = StepFn::new(vec![0.0, 1.0], vec![2.0]);
        let s = xi.to_json();
        assert!(s.starts_with("{\"breakpoints\":["));
        assert!(s.contains("\"values\":["));
        let nu = AtomicMeasure { atoms: vec![(0.5, -1.0)] };
        assert!(nu.to_json().contains("\"mass\":"));
    }
}
