//! Scalar-function infrastructure: divided differences of all orders
//! (including confluent), Littlewood-Paley/Besov analysis via FFT, Hoelder
//! seminorms, and moduli of continuity.
//!
//! Everything downstream feeds on two objects built here: the kernel tables
//! of divided differences evaluated on spectra, and Besov-norm estimates of
//! the scalar symbols.

use std::cmp::Ordering;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::Zero;
use serde::Deserialize;
use thiserror::Error;

use crate::matcore::Mat;
use crate::quad;
use crate::Real;

#[derive(Debug, Error)]
pub enum FunError {
    #[error("derivative of order {needed} of {name} unavailable (max order {max_order})")]
    DerivativeUnavailable { name: String, needed: usize, max_order: usize },
    #[error("grid too coarse: Nyquist frequency {nyquist:e} below required {required:e}")]
    GridTooCoarse { nyquist: f64, required: f64 },
    #[error("modulus integral diverges: dyadic tail does not decay")]
    Divergent,
}

type Unary<T> = Arc<dyn Fn(usize, T) -> Complex<T> + Send + Sync>;
type Binary<T> = Arc<dyn Fn((usize, usize), T, T) -> Complex<T> + Send + Sync>;

/// A scalar test function of one or two real variables with evaluators for
/// its derivatives up to a declared order.
///
/// `bandlimit` asserts that the Fourier transform is supported in
/// [-sigma, sigma]^arity; [`bandlimit_leakage`] probes the claim. `sup_norm`
/// carries a known L-infinity bound when one exists. Derivative evaluators
/// take the requested order(s) first so one closure serves every order.
#[derive(Clone)]
pub struct ScalarFn<T> {
    name: String,
    arity: u8,
    max_order: usize,
    bandlimit: Option<T>,
    sup_norm: Option<T>,
    un: Option<Unary<T>>,
    bin: Option<Binary<T>>,
}

impl<T: Real> ScalarFn<T> {
    pub fn unary(
        name: impl Into<String>,
        max_order: usize,
        f: impl Fn(usize, T) -> Complex<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            arity: 1,
            max_order,
            bandlimit: None,
            sup_norm: None,
            un: Some(Arc::new(f)),
            bin: None,
        }
    }

    pub fn real_unary(
        name: impl Into<String>,
        max_order: usize,
        f: impl Fn(usize, T) -> T + Send + Sync + 'static,
    ) -> Self {
        Self::unary(name, max_order, move |k, x| Complex::new(f(k, x), T::zero()))
    }

    pub fn binary(
        name: impl Into<String>,
        max_order: usize,
        f: impl Fn((usize, usize), T, T) -> Complex<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            arity: 2,
            max_order,
            bandlimit: None,
            sup_norm: None,
            un: None,
            bin: Some(Arc::new(f)),
        }
    }

    pub fn real_binary(
        name: impl Into<String>,
        max_order: usize,
        f: impl Fn((usize, usize), T, T) -> T + Send + Sync + 'static,
    ) -> Self {
        Self::binary(name, max_order, move |k, x, y| Complex::new(f(k, x, y), T::zero()))
    }

    pub fn with_bandlimit(mut self, sigma: T) -> Self {
        self.bandlimit = Some(sigma);
        self
    }

    pub fn with_sup_norm(mut self, m: T) -> Self {
        self.sup_norm = Some(m);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> u8 {
        self.arity
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn bandlimit(&self) -> Option<T> {
        self.bandlimit
    }

    pub fn sup_norm(&self) -> Option<T> {
        self.sup_norm
    }

    pub fn eval1(&self, x: T) -> Complex<T> {
        (self.un.as_ref().expect("unary function"))(0, x)
    }

    pub fn eval2(&self, x: T, y: T) -> Complex<T> {
        (self.bin.as_ref().expect("binary function"))((0, 0), x, y)
    }

    pub fn deriv1(&self, k: usize, x: T) -> Result<Complex<T>, FunError> {
        if k > self.max_order {
            return Err(self.no_deriv(k));
        }
        Ok((self.un.as_ref().expect("unary function"))(k, x))
    }

    pub fn deriv2(&self, kx: usize, ky: usize, x: T, y: T) -> Result<Complex<T>, FunError> {
        if kx + ky > self.max_order {
            return Err(self.no_deriv(kx + ky));
        }
        Ok((self.bin.as_ref().expect("binary function"))((kx, ky), x, y))
    }

    fn no_deriv(&self, needed: usize) -> FunError {
        FunError::DerivativeUnavailable {
            name: self.name.clone(),
            needed,
            max_order: self.max_order,
        }
    }
}

impl<T> std::fmt::Debug for ScalarFn<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarFn").field("name", &self.name).field("arity", &self.arity).finish()
    }
}

pub fn factorial<T: Real>(k: usize) -> T {
    (1..=k).fold(T::one(), |acc, j| acc * T::of(j as f64))
}

// Function library shared by the tests and the command-line suites.

/// x^k with all derivatives.
pub fn monomial<T: Real>(k: u32) -> ScalarFn<T> {
    ScalarFn::real_unary(format!("x^{k}"), 64, move |d, x| {
        if d > k as usize {
            return T::zero();
        }
        let mut coef = T::one();
        for j in 0..d {
            coef *= T::of((k as usize - j) as f64);
        }
        coef * x.powi((k as usize - d) as i32)
    })
}

pub fn exp_fn<T: Real>() -> ScalarFn<T> {
    ScalarFn::real_unary("exp", 64, |_, x: T| x.exp())
}

/// sin with its derivative cycle; band-limited with sigma = 1 and sup norm 1.
pub fn sin_fn<T: Real>() -> ScalarFn<T> {
    ScalarFn::real_unary("sin", 64, |k, x: T| match k % 4 {
        0 => x.sin(),
        1 => x.cos(),
        2 => -x.sin(),
        _ => -x.cos(),
    })
    .with_bandlimit(T::one())
    .with_sup_norm(T::one())
}

/// (x^2 + delta^2)^(alpha/2), the smoothed |x|^alpha; derivatives to order 2.
pub fn abs_power_smoothed<T: Real>(alpha: T, delta: T) -> ScalarFn<T> {
    let name = format!("|x|^{:.3}~", alpha.to_f64().unwrap_or(f64::NAN));
    ScalarFn::real_unary(name, 2, move |k, x: T| {
        let r2 = x * x + delta * delta;
        let half = T::of(0.5);
        match k {
            0 => r2.powf(alpha * half),
            1 => alpha * x * r2.powf(alpha * half - T::one()),
            _ => {
                alpha
                    * r2.powf(alpha * half - T::of(2.0))
                    * ((alpha - T::one()) * x * x + delta * delta)
            }
        }
    })
}

/// f(x, y) = x y.
pub fn product_xy<T: Real>() -> ScalarFn<T> {
    ScalarFn::real_binary("x*y", 64, |(kx, ky), x, y| match (kx, ky) {
        (0, 0) => x * y,
        (1, 0) => y,
        (0, 1) => x,
        (1, 1) => T::one(),
        _ => T::zero(),
    })
}

/// f(x, y) = sin(x + y).
pub fn sin_sum<T: Real>() -> ScalarFn<T> {
    ScalarFn::real_binary("sin(x+y)", 64, |(kx, ky), x: T, y: T| match (kx + ky) % 4 {
        0 => (x + y).sin(),
        1 => (x + y).cos(),
        2 => -(x + y).sin(),
        _ => -(x + y).cos(),
    })
}

/// f(x, y) = exp(x - y).
pub fn exp_diff<T: Real>() -> ScalarFn<T> {
    ScalarFn::real_binary("exp(x-y)", 64, |(_, ky), x: T, y: T| {
        let v = (x - y).exp();
        if ky % 2 == 1 {
            -v
        } else {
            v
        }
    })
}

// Divided differences.

/// Coincidence tolerance used throughout when the caller does not override:
/// divided differences lose half the mantissa near coincident points, the
/// derivative branch restores it.
pub fn default_coincidence_tol<T: Real>() -> T {
    T::of(1e-7)
}

/// Confluent divided difference of order points.len() - 1 (at most 4).
///
/// Points are sorted first, so the value is exactly invariant under
/// permutation. Points within tol * (1 + max|point|) of their sorted
/// neighbour are merged to their cluster mean and the table switches to the
/// derivative branch f^(j)/j! there.
pub fn divided_difference<T: Real>(
    f: &ScalarFn<T>,
    points: &[T],
    tol: T,
) -> Result<Complex<T>, FunError> {
    assert!(
        !points.is_empty() && points.len() <= 5,
        "divided differences supported up to order 4"
    );
    let maxab = points.iter().fold(T::zero(), |a, &p| a.max(p.abs()));
    let coin = tol * (T::one() + maxab);

    let mut z: Vec<T> = points.to_vec();
    z.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let mut i = 0;
    while i < z.len() {
        let mut j = i + 1;
        while j < z.len() && z[j] - z[j - 1] <= coin {
            j += 1;
        }
        if j - i > 1 {
            let mean = z[i..j].iter().fold(T::zero(), |a, &v| a + v) / T::of((j - i) as f64);
            for v in &mut z[i..j] {
                *v = mean;
            }
        }
        i = j;
    }

    let n = z.len();
    let mut cur: Vec<Complex<T>> = z.iter().map(|&x| f.eval1(x)).collect();
    for order in 1..n {
        let mut next = Vec::with_capacity(n - order);
        for i in 0..(n - order) {
            let (lo, hi) = (z[i], z[i + order]);
            if hi == lo {
                next.push(f.deriv1(order, lo)? / Complex::new(factorial::<T>(order), T::zero()));
            } else {
                next.push((cur[i + 1] - cur[i]) / Complex::new(hi - lo, T::zero()));
            }
        }
        cur = next;
    }
    Ok(cur[0])
}

/// First-order divided-difference table on a pair of grids.
#[derive(Clone, Debug)]
pub struct Kernel2<T> {
    pub xs: Vec<T>,
    pub ys: Vec<T>,
    pub table: Mat<T>,
}

impl<T: Real> Kernel2<T> {
    /// Nested-array JSON: {"xs": [...], "ys": [...], "table": [[[re,im],..],..]}.
    pub fn to_json(&self) -> String {
        let g = |v: &[T]| {
            v.iter()
                .map(|x| format!("{:.16e}", x.to_f64().unwrap_or(f64::NAN)))
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut rows = Vec::with_capacity(self.xs.len());
        for i in 0..self.xs.len() {
            let row = (0..self.ys.len())
                .map(|j| {
                    let z = self.table[(i, j)];
                    format!(
                        "[{:.16e},{:.16e}]",
                        z.re.to_f64().unwrap_or(f64::NAN),
                        z.im.to_f64().unwrap_or(f64::NAN)
                    )
                })
                .collect::<Vec<_>>()
                .join(",");
            rows.push(format!("[{row}]"));
        }
        format!(
            "{{\"xs\":[{}],\"ys\":[{}],\"table\":[{}]}}",
            g(&self.xs),
            g(&self.ys),
            rows.join(",")
        )
    }
}

/// Second-order divided-difference table on a grid triple, row-major in
/// (i, j, k).
#[derive(Clone, Debug)]
pub struct Kernel3<T> {
    pub xs: Vec<T>,
    pub ys: Vec<T>,
    pub zs: Vec<T>,
    table: Vec<Complex<T>>,
}

impl<T: Real> Kernel3<T> {
    pub fn from_fn(
        xs: Vec<T>,
        ys: Vec<T>,
        zs: Vec<T>,
        mut f: impl FnMut(T, T, T) -> Complex<T>,
    ) -> Self {
        let mut table = Vec::with_capacity(xs.len() * ys.len() * zs.len());
        for &x in &xs {
            for &y in &ys {
                for &z in &zs {
                    table.push(f(x, y, z));
                }
            }
        }
        Self { xs, ys, zs, table }
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> Complex<T> {
        self.table[(i * self.ys.len() + j) * self.zs.len() + k]
    }
}

/// table[i][j] = (f(x_i) - f(y_j)) / (x_i - y_j), f' at coincidence.
pub fn dd_kernel2<T: Real>(
    f: &ScalarFn<T>,
    xs: &[T],
    ys: &[T],
    tol: T,
) -> Result<Kernel2<T>, FunError> {
    let maxab = xs
        .iter()
        .chain(ys.iter())
        .fold(T::zero(), |a, &p| a.max(p.abs()));
    let coin = tol * (T::one() + maxab);
    let mut table = Mat::zeros(xs.len(), ys.len());
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            table[(i, j)] = if (x - y).abs() <= coin {
                f.deriv1(1, (x + y) * T::of(0.5))?
            } else {
                (f.eval1(x) - f.eval1(y)) / Complex::new(x - y, T::zero())
            };
        }
    }
    Ok(Kernel2 { xs: xs.to_vec(), ys: ys.to_vec(), table })
}

/// table[i][j][k] = second-order divided difference on (x_i, y_j, z_k),
/// symmetric in its arguments by construction.
pub fn dd_kernel3_order2<T: Real>(
    f: &ScalarFn<T>,
    xs: &[T],
    ys: &[T],
    zs: &[T],
    tol: T,
) -> Result<Kernel3<T>, FunError> {
    let mut table = Vec::with_capacity(xs.len() * ys.len() * zs.len());
    for &x in xs {
        for &y in ys {
            for &z in zs {
                table.push(divided_difference(f, &[x, y, z], tol)?);
            }
        }
    }
    Ok(Kernel3 { xs: xs.to_vec(), ys: ys.to_vec(), zs: zs.to_vec(), table })
}

/// Which variable of a two-variable symbol the partial divided difference
/// acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartialAxis {
    First,
    Second,
}

/// Partial divided differences of a two-variable symbol.
///
/// Axis First:  (x1, x2, y) -> (f(x1,y) - f(x2,y)) / (x1 - x2) on xs*xs*ys.
/// Axis Second: (x, y1, y2) -> (f(x,y1) - f(x,y2)) / (y1 - y2) on xs*ys*ys.
/// Coincident pairs take the partial derivative at the midpoint.
pub fn dd_kernel3_partial<T: Real>(
    f: &ScalarFn<T>,
    axis: PartialAxis,
    xs: &[T],
    ys: &[T],
    tol: T,
) -> Result<Kernel3<T>, FunError> {
    match axis {
        PartialAxis::First => dd_kernel3_partial_grids(f, axis, xs, xs, ys, tol),
        PartialAxis::Second => dd_kernel3_partial_grids(f, axis, xs, ys, ys, tol),
    }
}

/// Same partial divided differences, with an independent grid per slot.
/// Needed when the two differenced slots carry different spectra.
pub fn dd_kernel3_partial_grids<T: Real>(
    f: &ScalarFn<T>,
    axis: PartialAxis,
    g1: &[T],
    g2: &[T],
    g3: &[T],
    tol: T,
) -> Result<Kernel3<T>, FunError> {
    let maxab = g1
        .iter()
        .chain(g2.iter())
        .chain(g3.iter())
        .fold(T::zero(), |a, &p| a.max(p.abs()));
    let coin = tol * (T::one() + maxab);
    let half = T::of(0.5);
    let mut table = Vec::with_capacity(g1.len() * g2.len() * g3.len());
    match axis {
        PartialAxis::First => {
            for &x1 in g1 {
                for &x2 in g2 {
                    for &y in g3 {
                        let v = if (x1 - x2).abs() <= coin {
                            f.deriv2(1, 0, (x1 + x2) * half, y)?
                        } else {
                            (f.eval2(x1, y) - f.eval2(x2, y)) / Complex::new(x1 - x2, T::zero())
                        };
                        table.push(v);
                    }
                }
            }
        }
        PartialAxis::Second => {
            for &x in g1 {
                for &y1 in g2 {
                    for &y2 in g3 {
                        let v = if (y1 - y2).abs() <= coin {
                            f.deriv2(0, 1, x, (y1 + y2) * half)?
                        } else {
                            (f.eval2(x, y1) - f.eval2(x, y2)) / Complex::new(y1 - y2, T::zero())
                        };
                        table.push(v);
                    }
                }
            }
        }
    }
    Ok(Kernel3 { xs: g1.to_vec(), ys: g2.to_vec(), zs: g3.to_vec(), table })
}

// Littlewood-Paley machinery.

/// The dyadic window: w(s) = h(2s-1) on [1/2, 1], 1 - h(s-1) on [1, 2],
/// 0 elsewhere, with h(t) = g(t)/(g(t) + g(1-t)), g(t) = exp(-1/t) for t > 0.
///
/// Chosen so that w(s) + w(s/2) = 1 holds bitwise for s in [1, 2]: the
/// argument 2*(s/2) - 1 reproduces s - 1 exactly in floating point.
pub fn lp_window<T: Real>(s: T) -> T {
    if s < T::one() {
        bump_h(T::of(2.0) * s - T::one())
    } else {
        T::one() - bump_h(s - T::one())
    }
}

fn bump_g<T: Real>(t: T) -> T {
    if t > T::zero() {
        (-t.recip()).exp()
    } else {
        T::zero()
    }
}

fn bump_h<T: Real>(t: T) -> T {
    if t <= T::zero() {
        return T::zero();
    }
    if t >= T::one() {
        return T::one();
    }
    let g = bump_g(t);
    g / (g + bump_g(T::one() - t))
}

/// Radix-2 FFT, in place. Forward is unscaled; inverse divides by the length.
pub(crate) fn fft<T: Real>(buf: &mut [Complex<T>], inverse: bool) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "FFT length must be a power of two");
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { T::one() } else { -T::one() };
    let mut len = 2;
    while len <= n {
        let base = sign * T::of(2.0) * T::PI() / T::of(len as f64);
        for start in (0..n).step_by(len) {
            for k in 0..len / 2 {
                let ang = base * T::of(k as f64);
                let w = Complex::new(ang.cos(), ang.sin());
                let u = buf[start + k];
                let v = buf[start + k + len / 2] * w;
                buf[start + k] = u + v;
                buf[start + k + len / 2] = u - v;
            }
        }
        len <<= 1;
    }
    if inverse {
        let scale = T::one() / T::of(n as f64);
        for z in buf.iter_mut() {
            *z = z.scale(scale);
        }
    }
}

/// Real function sampled on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFn<T> {
    pub grid_start: T,
    pub grid_step: T,
    pub values: Vec<T>,
}

impl<T: Real> SampledFn<T> {
    pub fn sample(f: impl Fn(T) -> T, start: T, step: T, len: usize) -> Self {
        let values = (0..len).map(|i| f(start + step * T::of(i as f64))).collect();
        Self { grid_start: start, grid_step: step, values }
    }

    /// Samples the real part of a unary ScalarFn.
    pub fn sample_scalar(f: &ScalarFn<T>, start: T, step: T, len: usize) -> Self {
        Self::sample(|x| f.eval1(x).re, start, step, len)
    }

    pub fn x(&self, i: usize) -> T {
        self.grid_start + self.grid_step * T::of(i as f64)
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &v| a.max(v.abs()))
    }

    pub fn l2_norm(&self) -> T {
        (self.values.iter().fold(T::zero(), |a, &v| a + v * v) * self.grid_step).sqrt()
    }

    pub fn to_json(&self) -> String {
        let vals = self
            .values
            .iter()
            .map(|v| format!("{:.16e}", v.to_f64().unwrap_or(f64::NAN)))
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "{{\"grid_start\":{:.16e},\"grid_step\":{:.16e},\"values\":[{}]}}",
            self.grid_start.to_f64().unwrap_or(f64::NAN),
            self.grid_step.to_f64().unwrap_or(f64::NAN),
            vals
        )
    }

    pub fn from_json(s: &str) -> Result<Self, String> {
        #[derive(Deserialize)]
        struct J {
            grid_start: f64,
            grid_step: f64,
            values: Vec<f64>,
        }
        let j: J = serde_json::from_str(s).map_err(|e| e.to_string())?;
        Ok(Self {
            grid_start: T::of(j.grid_start),
            grid_step: T::of(j.grid_step),
            values: j.values.into_iter().map(T::of).collect(),
        })
    }
}

/// Littlewood-Paley decomposition of a sampled function over a dyadic range.
///
/// `pieces[i]` is the band at scale n = n_range.0 + i restricted to the input
/// grid; `remainder` carries everything the truncated range misses (the low
/// frequencies and whatever sits between the top band and Nyquist). The sum
/// of all pieces plus the remainder reproduces the input samples.
#[derive(Clone, Debug)]
pub struct LpDecomp<T> {
    pub n_range: (i32, i32),
    pub pieces: Vec<SampledFn<T>>,
    pub norms: Vec<T>,
    pub remainder: SampledFn<T>,
    pub fft_len: usize,
}

/// Band decomposition by FFT multiplication with w(|t| / 2^n).
///
/// The grid is zero-risk padded to a power of two of at least 4096: when
/// padding is needed the gap is bridged by a half-cosine blend from the last
/// sample back to the first, so non-periodic inputs wrap smoothly. A grid
/// that is already a sufficient power of two is trusted as periodic.
pub fn lp_decompose<T: Real>(
    f: &SampledFn<T>,
    n_range: (i32, i32),
) -> Result<LpDecomp<T>, FunError> {
    assert!(n_range.0 <= n_range.1);
    let l = f.values.len();
    assert!(l >= 2, "need at least two samples");
    let nyquist = T::PI() / f.grid_step;
    let required = T::of(2.0).powi(n_range.1 + 1);
    if nyquist < required {
        return Err(FunError::GridTooCoarse {
            nyquist: nyquist.to_f64().unwrap_or(f64::NAN),
            required: required.to_f64().unwrap_or(f64::NAN),
        });
    }

    let n = l.max(4096).next_power_of_two();
    let mut buf: Vec<Complex<T>> = Vec::with_capacity(n);
    buf.extend(f.values.iter().map(|&v| Complex::new(v, T::zero())));
    if n > l {
        let (first, last) = (f.values[0], f.values[l - 1]);
        let pad = n - l;
        for t in 0..pad {
            let theta = T::PI() * T::of((t + 1) as f64) / T::of((pad + 1) as f64);
            let blend = (T::one() - theta.cos()) * T::of(0.5);
            buf.push(Complex::new(last + (first - last) * blend, T::zero()));
        }
    }
    fft(&mut buf, false);

    let freq = |k: usize| -> T {
        let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        T::of(2.0) * T::PI() * T::of(signed) / (T::of(n as f64) * f.grid_step)
    };

    let mut covered = vec![T::zero(); n];
    let mut pieces = Vec::new();
    let mut norms = Vec::new();
    for band in n_range.0..=n_range.1 {
        let scale = T::of(2.0).powi(band);
        let mut p = buf.clone();
        for (k, z) in p.iter_mut().enumerate() {
            let wgt = lp_window(freq(k).abs() / scale);
            covered[k] += wgt;
            *z = z.scale(wgt);
        }
        fft(&mut p, true);
        let piece = SampledFn {
            grid_start: f.grid_start,
            grid_step: f.grid_step,
            values: p[..l].iter().map(|z| z.re).collect(),
        };
        norms.push(piece.sup_norm());
        pieces.push(piece);
    }

    let mut r = buf;
    for (k, z) in r.iter_mut().enumerate() {
        *z = z.scale(T::one() - covered[k]);
    }
    fft(&mut r, true);
    let remainder = SampledFn {
        grid_start: f.grid_start,
        grid_step: f.grid_step,
        values: r[..l].iter().map(|z| z.re).collect(),
    };

    Ok(LpDecomp { n_range, pieces, norms, remainder, fft_len: n })
}

/// Truncated-scale Besov norm estimate: the l^q norm of {2^(n s) ||f_n||_p}
/// over the supplied dyadic range. The true norm runs over all scales; this
/// estimate is exact for band-limited inputs whose spectrum the range covers.
pub fn besov_norm<T: Real>(
    f: &SampledFn<T>,
    s: T,
    p: T,
    q: T,
    n_range: (i32, i32),
) -> Result<T, FunError> {
    let lp = lp_decompose(f, n_range)?;
    let weights: Vec<T> = lp
        .pieces
        .iter()
        .enumerate()
        .map(|(i, piece)| {
            let band = n_range.0 + i as i32;
            let a = lp_norm(piece, p);
            T::of(2.0).powi(band).powf(s) * a
        })
        .collect();
    Ok(lq_norm(&weights, q))
}

fn lp_norm<T: Real>(f: &SampledFn<T>, p: T) -> T {
    if p.is_infinite() {
        return f.sup_norm();
    }
    let sum = f
        .values
        .iter()
        .fold(T::zero(), |a, &v| a + v.abs().powf(p));
    (sum * f.grid_step).powf(T::one() / p)
}

fn lq_norm<T: Real>(v: &[T], q: T) -> T {
    if q.is_infinite() {
        return v.iter().fold(T::zero(), |a, &x| a.max(x));
    }
    v.iter().fold(T::zero(), |a, &x| a + x.powf(q)).powf(T::one() / q)
}

/// Two-dimensional Besov estimate for a two-variable symbol.
#[derive(Clone, Debug)]
pub struct Besov2<T> {
    pub value: T,
    pub n_range: (i32, i32),
    pub grid: usize,
    pub radius: T,
}

pub const BESOV2_GRID: usize = 512;

/// B^s_{inf,q} estimate of a two-variable symbol via a radial dyadic
/// decomposition on a tapered [-radius, radius]^2 grid.
///
/// The symbol is multiplied by a raised-cosine plateau window (identically 1
/// on half the box) before the transform, so the estimate reflects the symbol
/// on the inner box; callers choose radius at least twice the spectral
/// radius of their operators.
pub fn besov_norm2<T: Real>(
    f: &ScalarFn<T>,
    s: T,
    q: T,
    n_range: (i32, i32),
    radius: T,
) -> Result<Besov2<T>, FunError> {
    assert_eq!(f.arity(), 2, "two-variable symbol required");
    let m = BESOV2_GRID;
    let dx = T::of(2.0) * radius / T::of(m as f64);
    let nyquist = T::PI() / dx;
    let required = T::of(2.0).powi(n_range.1 + 1);
    if nyquist < required {
        return Err(FunError::GridTooCoarse {
            nyquist: nyquist.to_f64().unwrap_or(f64::NAN),
            required: required.to_f64().unwrap_or(f64::NAN),
        });
    }

    let taper = |x: T| -> T {
        let a = x.abs();
        let half = radius * T::of(0.5);
        if a <= half {
            T::one()
        } else if a >= radius {
            T::zero()
        } else {
            let t = (a - half) / half;
            ((T::one() + (T::PI() * t).cos()) * T::of(0.5)).powi(2)
        }
    };
    let coord = |i: usize| -radius + dx * T::of(i as f64);

    let mut grid: Vec<Complex<T>> = Vec::with_capacity(m * m);
    for i in 0..m {
        let x = coord(i);
        let tx = taper(x);
        for j in 0..m {
            let y = coord(j);
            grid.push(f.eval2(x, y).scale(tx * taper(y)));
        }
    }
    fft2(&mut grid, m, false);

    let freq = |k: usize| -> T {
        let signed = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
        T::of(2.0) * T::PI() * T::of(signed) / (T::of(m as f64) * dx)
    };

    let mut weights = Vec::new();
    for band in n_range.0..=n_range.1 {
        let scale = T::of(2.0).powi(band);
        let mut p = grid.clone();
        for i in 0..m {
            let fi = freq(i);
            for j in 0..m {
                let fj = freq(j);
                let rho = (fi * fi + fj * fj).sqrt();
                let wgt = lp_window(rho / scale);
                p[i * m + j] = p[i * m + j].scale(wgt);
            }
        }
        fft2(&mut p, m, true);
        let sup = p.iter().fold(T::zero(), |a, z| a.max(z.norm()));
        weights.push(T::of(2.0).powi(band).powf(s) * sup);
    }
    Ok(Besov2 { value: lq_norm(&weights, q), n_range, grid: m, radius })
}

/// Row-column FFT of a square grid stored row-major.
fn fft2<T: Real>(grid: &mut [Complex<T>], m: usize, inverse: bool) {
    assert_eq!(grid.len(), m * m);
    for row in grid.chunks_mut(m) {
        fft(row, inverse);
    }
    let mut col = vec![Complex::<T>::zero(); m];
    for j in 0..m {
        for i in 0..m {
            col[i] = grid[i * m + j];
        }
        fft(&mut col, inverse);
        for i in 0..m {
            grid[i * m + j] = col[i];
        }
    }
}

/// Fraction of spectral mass outside [-1.01 sigma, 1.01 sigma] on the probe
/// grid (4096 points spanning 64 pi / sigma). None when no bandlimit is
/// declared.
pub fn bandlimit_leakage<T: Real>(f: &ScalarFn<T>) -> Option<T> {
    let sigma = f.bandlimit()?;
    let n = 4096usize;
    let width = T::of(64.0) * T::PI() / sigma;
    let dx = width / T::of(n as f64);
    let start = -width * T::of(0.5);
    let mut buf: Vec<Complex<T>> =
        (0..n).map(|i| f.eval1(start + dx * T::of(i as f64))).collect();
    fft(&mut buf, false);
    let mut total = T::zero();
    let mut outside = T::zero();
    for (k, z) in buf.iter().enumerate() {
        let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let w = T::of(2.0) * T::PI() * T::of(signed) / (T::of(n as f64) * dx);
        let mass = z.norm_sqr();
        total += mass;
        if w.abs() > T::of(1.01) * sigma {
            outside += mass;
        }
    }
    Some(if total.is_zero() { T::zero() } else { outside / total })
}

/// Largest sampled |f'| against the band-limited bound 1.01 sigma max|f|.
/// Returns (max |f'|, bound); None when the function declares no bandlimit.
pub fn bernstein_check<T: Real>(f: &ScalarFn<T>, grid: &[T]) -> Option<(T, T)> {
    let sigma = f.bandlimit()?;
    let mut maxd = T::zero();
    let mut maxf = T::zero();
    for &x in grid {
        maxf = maxf.max(f.eval1(x).norm());
        if let Ok(d) = f.deriv1(1, x) {
            maxd = maxd.max(d.norm());
        }
    }
    let supf = f.sup_norm().unwrap_or(maxf);
    Some((maxd, T::of(1.01) * sigma * supf))
}

// Hoelder seminorms and moduli of continuity.

/// Lower estimate of the Hoelder-alpha seminorm from sampled pairs:
/// max |f(x) - f(y)| / |x - y|^alpha. Degenerate pairs are skipped.
pub fn holder_seminorm<T: Real>(f: &ScalarFn<T>, alpha: T, pairs: &[(T, T)]) -> T {
    assert!(alpha > T::zero() && alpha < T::one(), "alpha must lie in (0,1)");
    let mut best = T::zero();
    for &(x, y) in pairs {
        let d = (x - y).abs();
        if d.is_zero() {
            continue;
        }
        let ratio = (f.eval1(x) - f.eval1(y)).norm() / d.powf(alpha);
        best = best.max(ratio);
    }
    best
}

/// A modulus of continuity: nondecreasing, subadditive, vanishing at zero.
#[derive(Clone)]
pub struct Modulus<T> {
    name: String,
    f: Arc<dyn Fn(T) -> T + Send + Sync>,
}

impl<T: Real> Modulus<T> {
    pub fn new(name: impl Into<String>, f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }

    pub fn power(alpha: T) -> Self {
        Self::new(
            format!("t^{:.3}", alpha.to_f64().unwrap_or(f64::NAN)),
            move |t: T| t.powf(alpha),
        )
    }

    pub fn capped_linear() -> Self {
        Self::new("min(t,1)", |t: T| t.min(T::one()))
    }

    pub fn linear() -> Self {
        Self::new("t", |t: T| t)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, t: T) -> T {
        (self.f)(t)
    }
}

impl<T> std::fmt::Debug for Modulus<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Modulus").field("name", &self.name).finish()
    }
}

/// omega*(x) = x * integral_x^inf omega(t)/t^2 dt, computed after the
/// substitution t = x/u as integral_0^1 omega(x/u) du over dyadic panels
/// [2^-k-1, 2^-k] with geometric tail extrapolation.
///
/// Divergence shows up as panel contributions that stop decaying; after
/// `max_panels` dyadic levels without decay the integral is declared
/// divergent (omega(t)/t^2 must be integrable at infinity).
pub fn omega_star<T: Real>(omega: &Modulus<T>, x: T, max_panels: usize) -> Result<T, FunError> {
    assert!(x > T::zero(), "omega* needs x > 0");
    let rel = T::of(1e-8);
    let mut total = T::zero();
    let mut prev = T::infinity();
    let mut stalls = 0usize;
    for k in 0..max_panels.max(8) {
        let hi = T::of(2.0).powi(-(k as i32));
        let lo = hi * T::of(0.5);
        let panel_tol = rel * (total.abs() + T::of(1e-3)) * T::of(0.1);
        let panel = quad::adaptive_simpson(&|u| omega.eval(x / u), lo, hi, panel_tol);
        total += panel;
        if panel <= rel * total {
            return Ok(total);
        }
        if prev.is_finite() && panel > T::zero() {
            let r = panel / prev;
            if r >= T::of(0.999) {
                stalls += 1;
                if stalls >= 6 {
                    return Err(FunError::Divergent);
                }
            } else {
                stalls = 0;
                if r < T::of(0.995) {
                    let tail = panel * r / (T::one() - r);
                    if tail <= rel * total {
                        return Ok(total + tail);
                    }
                }
            }
        }
        prev = panel;
    }
    Err(FunError::Divergent)
}
