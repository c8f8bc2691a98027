//! Numerical laboratory for perturbation theory of operator functions on
//! finite-dimensional matrices.
//!
//! The crate is organised around one object: the spectral decomposition of a
//! Hermitian (or normal) matrix. Everything else consumes it.
//!
//! * [`matcore`]: dense Hermitian/normal eigensolvers, Schatten norms, matrix
//!   functions, JSON serialisation of matrices.
//! * [`funkit`]: scalar test functions with derivatives, divided differences,
//!   Littlewood-Paley decompositions and Besov-norm estimates, moduli of
//!   continuity.
//! * [`doi`]: double operator integrals as Schur multipliers in eigenbases,
//!   operator differences, commutator identities, multiplier-norm bounds.
//! * [`moi`]: multiple operator integrals, higher derivatives and higher-order
//!   finite differences of `t -> f(A + tK)`.
//! * [`shift`]: spectral shift functions of first and second order, trace
//!   formulas, Taylor remainders.
//! * [`noncomm`]: functions of pairs of commuting Hermitian matrices,
//!   Lipschitz-type bounds, commutator representations, trace duality.
//! * [`counterex`]: the explicit family of commuting pairs witnessing failure
//!   of Lipschitz estimates in every Schatten norm.
//!
//! All numerics are generic over the scalar via [`Real`]; concrete aliases
//! ([`MatC64`], [`MatC32`], ...) pin `f64`/`f32` at the crate root.

pub mod counterex;
pub mod doi;
pub mod funkit;
pub mod matcore;
pub mod moi;
pub mod noncomm;
pub mod quad;
pub mod report;
pub mod rng;
pub mod shift;

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Scalar field for all numerics. Implemented by `f32` and `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Debug + Display + Send + Sync + 'static
{
    /// Shorthand for pulling constants into the generic scalar.
    /// Panics only for values outside the target type's range, which cannot
    /// happen for the literals this crate feeds it.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }
}

impl<T> Real for T where
    T: Float + FloatConst + FromPrimitive + NumAssign + Debug + Display + Send + Sync + 'static
{
}

/// Complex scalar over the crate's real type.
pub type C<T> = Complex<T>;

/// Dense complex matrix over `f64` entries.
pub type MatC64 = matcore::Mat<f64>;
/// Dense complex matrix over `f32` entries.
pub type MatC32 = matcore::Mat<f32>;
/// Eigendecomposition over `f64`.
pub type Eig64 = matcore::Eig<f64>;
/// Eigendecomposition over `f32`.
pub type Eig32 = matcore::Eig<f32>;
/// Scalar test function over `f64`.
pub type ScalarFn64 = funkit::ScalarFn<f64>;
/// Scalar test function over `f32`.
pub type ScalarFn32 = funkit::ScalarFn<f32>;
