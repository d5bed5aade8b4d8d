//! Uniform carrier for one measured inequality.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Schema version written into every JSON and CSV artifact.
pub const SCHEMA_VERSION: u32 = 1;

/// Default slack allowed when deciding `holds`.
pub const BOUND_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
    /// The left-hand side rests on a sampled lower bound, so a violation does
    /// not refute anything.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    #[serde(deserialize_with = "crate::report::nan_f64")]
    pub lhs: f64,
    #[serde(deserialize_with = "crate::report::nan_f64")]
    pub rhs: f64,
    #[serde(deserialize_with = "crate::report::nan_f64")]
    pub slack: f64,
    pub holds: bool,
    pub verdict: Verdict,
    pub inputs: BTreeMap<String, f64>,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self::with_tolerance(name, lhs, rhs, BOUND_TOLERANCE)
    }

    pub fn with_tolerance(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let holds = lhs <= rhs + tolerance;
        Self {
            name: name.into(),
            lhs,
            rhs,
            slack: rhs - lhs,
            holds,
            verdict: if holds { Verdict::Holds } else { Verdict::Violated },
            inputs: BTreeMap::new(),
        }
    }

    pub fn input(mut self, key: &str, value: f64) -> Self {
        self.inputs.insert(key.to_string(), value);
        self
    }

    /// Downgrades a violation to inconclusive.
    pub fn sampled(mut self) -> Self {
        if !self.holds {
            self.verdict = Verdict::Inconclusive;
        }
        self
    }

    pub fn is_conclusive_violation(&self) -> bool {
        self.verdict == Verdict::Violated
    }
}

// serde_json writes non-finite floats as null; these read them back as NaN.
pub(crate) fn nan_vec<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    let v: Vec<Option<f64>> = serde::Deserialize::deserialize(d)?;
    Ok(v.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
}

pub(crate) fn nan_f64<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let v: Option<f64> = serde::Deserialize::deserialize(d)?;
    Ok(v.unwrap_or(f64::NAN))
}
