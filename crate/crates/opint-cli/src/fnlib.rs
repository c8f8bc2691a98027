//! The built-in scalar function library. Every entry carries analytic
//! derivatives, so divided-difference kernels never fall back to numerics.

use opint::counterex::build_counterexample;
use opint::funkit::{
    abs_power_smoothed, exp_diff, exp_fn, monomial, product_xy, sin_fn, sin_sum,
};
use opint::ScalarFn64;

use crate::CliError;

pub const NAMES: [&str; 10] =
    ["x", "x2", "x3", "exp", "sin", "abs-alpha", "xy", "sin-sum", "exp-diff", "counterexample-f"];

/// Smoothing width of the `abs-alpha` entry, (x^2 + delta^2)^(alpha/2).
pub const ABS_SMOOTHING: f64 = 1e-3;

fn canonical(name: &str) -> Option<&'static str> {
    match name {
        "x" => Some("x"),
        "x2" | "x^2" => Some("x2"),
        "x3" | "x^3" => Some("x3"),
        "exp" => Some("exp"),
        "sin" => Some("sin"),
        "abs-alpha" | "abs" => Some("abs-alpha"),
        "xy" | "x*y" => Some("xy"),
        "sin-sum" | "sin(x+y)" => Some("sin-sum"),
        "exp-diff" | "exp(x-y)" => Some("exp-diff"),
        "counterexample-f" => Some("counterexample-f"),
        _ => None,
    }
}

pub fn check_name(name: &str) -> Result<&'static str, CliError> {
    canonical(name).ok_or_else(|| {
        CliError::Config(format!("unknown function {name:?}; known: {}", NAMES.join(", ")))
    })
}

/// Builds a library function. `alpha` feeds `abs-alpha`; `n` sizes
/// `counterexample-f`, whose symbol depends on the instance dimension.
pub fn build(name: &str, alpha: f64, n: usize) -> Result<ScalarFn64, CliError> {
    let name = check_name(name)?;
    Ok(match name {
        "x" => monomial(1),
        "x2" => monomial(2),
        "x3" => monomial(3),
        "exp" => exp_fn(),
        "sin" => sin_fn(),
        "abs-alpha" => abs_power_smoothed(alpha, ABS_SMOOTHING),
        "xy" => product_xy(),
        "sin-sum" => sin_sum(),
        "exp-diff" => exp_diff(),
        "counterexample-f" => build_counterexample(n).f,
        _ => unreachable!(),
    })
}

pub fn is_binary(name: &str) -> bool {
    matches!(canonical(name), Some("xy" | "sin-sum" | "exp-diff" | "counterexample-f"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_name_builds() {
        for name in NAMES {
            let f = build(name, 0.5, 4).unwrap();
            assert_eq!(f.arity() == 2, is_binary(name), "{name}");
        }
    }

    #[test]
    fn aliases_resolve() {
        assert_eq!(check_name("x^2").unwrap(), "x2");
        assert_eq!(check_name("sin(x+y)").unwrap(), "sin-sum");
        assert!(check_name("tan").is_err());
    }
}
