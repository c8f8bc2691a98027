//! Cross-checks against independently computed references: LAPACK
//! eigenvalues and singular values, a Pade matrix exponential, and an
//! in-test Taylor scaling-and-squaring exponential. The frozen digits were
//! produced by numpy/scipy on the exact same rational inputs.

use num_complex::Complex;
use opint::doi::{
    factorization_residual, op_difference, sampling_factorization, DoiTransformer,
};
use opint::funkit::{
    default_coincidence_tol, exp_fn, monomial, sin_fn, lp_decompose, SampledFn,
};
use opint::matcore::{hermitian_eig, mat_fun, schatten_norm, singular_values, Mat};
use opint::rng::SplitMix64;

type M = Mat<f64>;
type C = Complex<f64>;

fn mat_from_tables(re: &[&[i32]], im: &[&[i32]], denom: f64) -> M {
    M::from_fn(re.len(), re[0].len(), |j, k| {
        C::new(re[j][k] as f64 / denom, im[j][k] as f64 / denom)
    })
}

// Entries are multiples of 1/8, so the oracle saw bit-identical input.
const H6_RE: [[i32; 6]; 6] = [
    [-2, -1, 0, 1, 2, 3],
    [-1, 1, 3, -2, 0, 2],
    [0, 3, -1, 2, -2, 1],
    [1, -2, 2, -1, 3, 0],
    [2, 0, -2, 3, 1, -1],
    [3, 2, 1, 0, -1, -2],
];
const H6_IM: [[i32; 6]; 6] = [
    [0, 0, 2, -1, 1, -2],
    [0, 0, -2, 0, 2, -1],
    [-2, 2, 0, 1, -2, 0],
    [1, 0, -1, 0, -1, 1],
    [-1, -2, 2, 1, 0, 2],
    [2, 1, 0, -1, -2, 0],
];
const H6_EIGS: [f64; 6] = [
    -1.09872775704452397e0,
    -7.68766940273923116e-1,
    -6.49232834846345114e-2,
    2.09308826521500541e-1,
    3.62033547766667962e-1,
    8.61075606514913217e-1,
];

#[test]
fn eigenvalues_match_lapack_on_frozen_matrix() {
    let re: Vec<&[i32]> = H6_RE.iter().map(|r| &r[..]).collect();
    let im: Vec<&[i32]> = H6_IM.iter().map(|r| &r[..]).collect();
    let h = mat_from_tables(&re, &im, 8.0);
    let eig = hermitian_eig(&h).unwrap();
    for (got, want) in eig.values.iter().zip(H6_EIGS) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
    let recon = eig.reconstruct();
    assert!((&recon - &h).frobenius() < 1e-12);
}

const A4_RE: [[i32; 4]; 4] = [[-4, 1, 1, 1], [1, -4, 1, 1], [1, 1, -4, 1], [1, 1, 1, -4]];
const A4_IM: [[i32; 4]; 4] = [[0, 0, 2, -2], [0, 0, 0, 2], [-2, 0, 0, 0], [2, -2, 0, 0]];
const EXP_A4_RE: [[f64; 4]; 4] = [
    [
        7.95292171008680104e-1,
        4.63422836521676859e-2,
        5.20805833079079766e-2,
        5.22077854651242096e-2,
    ],
    [
        4.63422836521676929e-2,
        7.89426669195723574e-1,
        5.18261789934755107e-2,
        5.20805833079079766e-2,
    ],
    [
        5.20805833079079697e-2,
        5.18261789934754968e-2,
        7.89426669195723574e-1,
        4.63422836521676859e-2,
    ],
    [
        5.22077854651242027e-2,
        5.20805833079079628e-2,
        4.63422836521676859e-2,
        7.95292171008680104e-1,
    ],
];
const EXP_A4_IM: [[f64; 4]; 4] = [
    [0.0, -3.12355414230261301e-3, 9.50449085033405611e-2, -9.21757586754704261e-2],
    [3.12355414230261344e-3, 0.0, 5.99270397017275577e-3, 9.50449085033405749e-2],
    [-9.50449085033405749e-2, -5.99270397017275577e-3, 0.0, -3.12355414230261474e-3],
    [9.21757586754704261e-2, -9.50449085033405611e-2, 3.12355414230261301e-3, 0.0],
];

#[test]
fn matrix_exponential_matches_pade_oracle() {
    let re: Vec<&[i32]> = A4_RE.iter().map(|r| &r[..]).collect();
    let im: Vec<&[i32]> = A4_IM.iter().map(|r| &r[..]).collect();
    let a = mat_from_tables(&re, &im, 16.0);
    let e = mat_fun(&exp_fn(), &hermitian_eig(&a).unwrap()).unwrap();
    let want = M::from_fn(4, 4, |j, k| C::new(EXP_A4_RE[j][k], EXP_A4_IM[j][k]));
    assert!((&e - &want).frobenius() < 1e-13, "{}", (&e - &want).frobenius());
    assert!((e.trace().re - 3.16943768040880736e0).abs() < 1e-13);
}

const B43_RE: [[i32; 3]; 4] = [[-2, 2, 1], [-1, -2, 2], [0, -1, -2], [1, 0, -1]];
const B43_IM: [[i32; 3]; 4] = [[-1, 1, -1], [0, 2, 0], [1, -1, 1], [2, 0, 2]];
const B43_SVALS: [f64; 3] =
    [1.38206029586693280e0, 7.64562025573949589e-1, 4.39151736462997710e-1];

#[test]
fn singular_values_match_lapack_on_frozen_matrix() {
    let re: Vec<&[i32]> = B43_RE.iter().map(|r| &r[..]).collect();
    let im: Vec<&[i32]> = B43_IM.iter().map(|r| &r[..]).collect();
    let b = mat_from_tables(&re, &im, 4.0);
    let s = singular_values(&b).unwrap();
    for (got, want) in s.iter().zip(B43_SVALS) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
    assert!((schatten_norm(&b, 1.0).unwrap() - 2.58577405790388015e0).abs() < 1e-12);
    assert!((schatten_norm(&b, 2.0).unwrap() - 1.63935963107550053e0).abs() < 1e-12);
}

/// Scaling and squaring with a plain Taylor series, written without any of
/// the library's spectral machinery.
fn taylor_exp(a: &M) -> M {
    let mut s = 0u32;
    while a.max_abs() * (a.rows() as f64) / 2f64.powi(s as i32) > 0.25 {
        s += 1;
    }
    let b = a.scale_re(2f64.powi(-(s as i32)));
    let mut sum = M::identity(a.rows());
    let mut term = M::identity(a.rows());
    for k in 1..=24 {
        term = term.matmul(&b).scale_re(1.0 / k as f64);
        sum = &sum + &term;
    }
    for _ in 0..s {
        sum = sum.matmul(&sum);
    }
    sum
}

#[test]
fn spectral_exponential_matches_taylor_route() {
    for seed in 0..10u64 {
        let mut rng = SplitMix64::substream(101, seed);
        let a = M::hermitian_gaussian(6, &mut rng);
        let via_spec = mat_fun(&exp_fn(), &hermitian_eig(&a).unwrap()).unwrap();
        let via_taylor = taylor_exp(&a);
        let rel = (&via_spec - &via_taylor).frobenius() / via_taylor.frobenius();
        assert!(rel < 1e-11, "seed {seed}: {rel}");
    }
}

#[test]
fn doi_difference_agrees_with_direct_calculus() {
    let fns = [monomial(2), monomial(3), exp_fn(), sin_fn()];
    let mut worst = 0.0f64;
    for trial in 0..100u64 {
        let mut rng = SplitMix64::substream(707, trial);
        let n = 3 + (trial % 6) as usize;
        let a = M::hermitian_gaussian(n, &mut rng);
        let b = M::hermitian_gaussian(n, &mut rng);
        for f in &fns {
            let (_, report) = op_difference(f, &a, &b).unwrap();
            worst = worst.max(report.residual);
        }
    }
    assert!(worst <= 1e-8, "worst residual {worst}");
}

#[test]
fn sampling_factorization_bound_and_exactness() {
    let f = sin_fn::<f64>();
    let xs: Vec<f64> = (0..17).map(|i| -2.0 + 0.25 * i as f64).collect();
    let ys: Vec<f64> = (0..13).map(|i| -1.5 + 0.28 * i as f64).collect();

    let coarse = sampling_factorization(&f, &xs, &ys, 16).unwrap();
    let fine = sampling_factorization(&f, &xs, &ys, 512).unwrap();
    // Row-norm inequalities hold for every truncation.
    let limit = 3f64.sqrt();
    assert!(coarse.bound() <= limit + 1e-9, "coarse bound {}", coarse.bound());
    assert!(fine.bound() <= limit + 1e-9, "fine bound {}", fine.bound());

    let kernel = opint::funkit::dd_kernel2(&f, &xs, &ys, default_coincidence_tol()).unwrap();
    let r_coarse = factorization_residual(&kernel, &coarse);
    let r_fine = factorization_residual(&kernel, &fine);
    assert!(r_fine < r_coarse, "tail must shrink: {r_coarse} -> {r_fine}");
    assert!(r_fine < 2e-3, "fine residual {r_fine}");
}

#[test]
fn littlewood_paley_isolates_pure_tones() {
    // 4096 samples over [-4pi, 4pi): both sin(x) and sin(4x) are exactly
    // periodic on the window and land on the FFT frequency grid.
    let len = 4096;
    let step = std::f64::consts::PI / 512.0;
    let start = -(len as f64) / 2.0 * step;
    let range = (-3, 5);

    let slow = SampledFn::sample(|x: f64| x.sin(), start, step, len);
    let d = lp_decompose(&slow, range).unwrap();
    let idx0 = (0 - range.0) as usize;
    for (i, norm) in d.norms.iter().enumerate() {
        if i != idx0 {
            assert!(*norm < 1e-10, "band {i} norm {norm}");
        }
    }
    let err = d.pieces[idx0]
        .values
        .iter()
        .zip(&slow.values)
        .fold(0.0f64, |m, (&p, &v)| m.max((p - v).abs()));
    assert!(err < 1e-6, "sin reconstruction from a single band: {err}");

    let fast = SampledFn::sample(|x: f64| (4.0 * x).sin(), start, step, len);
    let d4 = lp_decompose(&fast, range).unwrap();
    let idx2 = (2 - range.0) as usize;
    for (i, norm) in d4.norms.iter().enumerate() {
        if i != idx2 {
            assert!(*norm < 1e-10, "band {i} norm {norm}");
        }
    }
}

#[test]
fn doi_transformer_rejects_mismatched_input() {
    let mut rng = SplitMix64::new(3);
    let a = M::hermitian_gaussian(4, &mut rng);
    let b = M::hermitian_gaussian(4, &mut rng);
    let tr = DoiTransformer::from_symbol(
        &monomial(2),
        hermitian_eig(&a).unwrap(),
        hermitian_eig(&b).unwrap(),
        default_coincidence_tol(),
    )
    .unwrap();
    assert!(tr.apply(&M::zeros(3, 4)).is_err());
}
