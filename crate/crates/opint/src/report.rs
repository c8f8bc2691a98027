//! Two-route comparison reports.
//!
//! Every checking operation computes a quantity twice (transform route vs
//! direct route, bound vs estimate) and emits a `Report`. Reports serialize
//! deterministically: metadata lives in a BTreeMap, floats go through
//! serde_json's shortest-round-trip printer, so identical inputs and seeds
//! produce byte-identical JSON.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::matcore::Mat;
use crate::Real;

pub fn as_f64<T: ToPrimitive>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// diff / scale, falling back to the absolute diff when the scale vanishes.
pub fn rel_residual<T: Real>(diff: T, scale: T) -> T {
    if scale.is_zero() {
        diff
    } else {
        diff / scale
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub operation: String,
    pub inputs_digest: String,
    pub lhs_norm: f64,
    pub rhs_norm: f64,
    pub ratio: f64,
    pub residual: f64,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl Report {
    pub fn new(operation: impl Into<String>, digest: &Digest) -> Self {
        Self {
            operation: operation.into(),
            inputs_digest: digest.hex(),
            lhs_norm: 0.0,
            rhs_norm: 0.0,
            ratio: 1.0,
            residual: 0.0,
            seed: None,
            meta: BTreeMap::new(),
        }
    }

    /// Sets both route norms; ratio becomes lhs/rhs (1 when both vanish).
    pub fn with_norms<T: Real>(mut self, lhs: T, rhs: T) -> Self {
        self.lhs_norm = as_f64(lhs);
        self.rhs_norm = as_f64(rhs);
        self.ratio = if self.rhs_norm == 0.0 {
            if self.lhs_norm == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            self.lhs_norm / self.rhs_norm
        };
        self
    }

    pub fn with_residual<T: Real>(mut self, residual: T) -> Self {
        self.residual = as_f64(residual);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, String> {
        serde_json::from_str(s).map_err(|e| e.to_string())
    }
}

/// FNV-1a digest of the operation inputs, printed as 16 hex digits.
/// Not cryptographic; it only ties a report to its inputs.
#[derive(Clone, Debug)]
pub struct Digest {
    state: u64,
}

impl Default for Digest {
    fn default() -> Self {
        Self::new()
    }
}

impl Digest {
    pub fn new() -> Self {
        Self { state: 0xcbf2_9ce4_8422_2325 }
    }

    pub fn bytes(mut self, data: &[u8]) -> Self {
        for &b in data {
            self.state ^= b as u64;
            self.state = self.state.wrapping_mul(0x0000_0100_0000_01b3);
        }
        self
    }

    pub fn str(self, s: &str) -> Self {
        self.bytes(s.as_bytes())
    }

    pub fn u64(self, v: u64) -> Self {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f64<T: ToPrimitive>(self, v: T) -> Self {
        self.bytes(&as_f64(v).to_le_bytes())
    }

    pub fn mat<T: Real>(mut self, m: &Mat<T>) -> Self {
        self = self.u64(m.rows() as u64).u64(m.cols() as u64);
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let z = m[(i, j)];
                self = self.f64(z.re).f64(z.im);
            }
        }
        self
    }

    pub fn slice<T: Real>(mut self, v: &[T]) -> Self {
        self = self.u64(v.len() as u64);
        for &x in v {
            self = self.f64(x);
        }
        self
    }

    pub fn hex(&self) -> String {
        format!("{:016x}", self.state)
    }
}
