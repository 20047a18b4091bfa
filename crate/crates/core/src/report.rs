use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// A point at which a bound was tight or violated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub label: String,
    pub point: Vec<f64>,
    pub value: f64,
}

impl Witness {
    pub fn new(label: impl Into<String>, point: Vec<f64>, value: f64) -> Self {
        Witness {
            label: label.into(),
            point,
            value,
        }
    }
}

/// Outcome of a grid scan of an inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckReport {
    pub condition: String,
    pub constants: BTreeMap<String, f64>,
    pub grid: BTreeMap<String, serde_json::Value>,
    pub witnesses: Vec<Witness>,
    pub pass: bool,
}

impl BoundCheckReport {
    pub fn new(condition: impl Into<String>) -> Self {
        BoundCheckReport {
            condition: condition.into(),
            constants: BTreeMap::new(),
            grid: BTreeMap::new(),
            witnesses: Vec::new(),
            pass: true,
        }
    }

    pub fn constant(&mut self, name: &str, v: f64) -> &mut Self {
        self.constants.insert(name.to_string(), v);
        self
    }

    pub fn grid_entry(&mut self, name: &str, v: impl Serialize) -> &mut Self {
        self.grid
            .insert(name.to_string(), serde_json::to_value(v).expect("grid entry serializes"));
        self
    }

    pub fn witness(&mut self, w: Witness) -> &mut Self {
        self.witnesses.push(w);
        self
    }

    /// Record a failure with its witness.
    pub fn fail(&mut self, w: Witness) -> &mut Self {
        self.pass = false;
        self.witnesses.push(w);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.constants.get(name).copied()
    }
}

/// Running extremum of a ratio together with where it occurred.
#[derive(Debug, Clone)]
pub(crate) struct Extremum {
    pub min: f64,
    pub max: f64,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
    pub n: usize,
}

impl Extremum {
    pub fn new() -> Self {
        Extremum {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            argmin: vec![],
            argmax: vec![],
            n: 0,
        }
    }

    pub fn push(&mut self, v: f64, at: &[f64]) {
        self.n += 1;
        if v < self.min {
            self.min = v;
            self.argmin = at.to_vec();
        }
        if v > self.max {
            self.max = v;
            self.argmax = at.to_vec();
        }
    }
}
