use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Named scalar diagnostic with the location of its extremum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub name: String,
    pub max_value: f64,
    pub argmax: Vec<f64>,
    /// `(parameter, value)` pairs, e.g. one entry per section height.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<(f64, f64)>,
    /// Context quantities (bounds, norms, counts).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub context: BTreeMap<String, f64>,
}

impl MonitorReport {
    pub fn new(name: impl Into<String>) -> Self {
        MonitorReport {
            name: name.into(),
            max_value: f64::NEG_INFINITY,
            argmax: Vec::new(),
            series: Vec::new(),
            context: BTreeMap::new(),
        }
    }

    /// Records a candidate value; keeps the first of equal maxima.
    pub fn observe(&mut self, value: f64, at: &[f64]) {
        if value > self.max_value {
            self.max_value = value;
            self.argmax = at.to_vec();
        }
    }

    pub fn with_context(mut self, key: &str, value: f64) -> Self {
        self.context.insert(key.to_string(), value);
        self
    }

    pub fn is_finite(&self) -> bool {
        self.max_value.is_finite()
            && self.argmax.iter().all(|a| a.is_finite())
            && self
                .series
                .iter()
                .all(|(a, b)| a.is_finite() && b.is_finite())
            && self.context.values().all(|v| v.is_finite())
    }
}

/// Outcome of a closed-form verification: the JSON shape emitted by `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub kind: String,
    pub max_deviation: f64,
    pub margin: f64,
    pub samples: usize,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_point: Option<Vec<f64>>,
}
