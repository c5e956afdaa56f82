//! Shared CSV and JSON layouts for mode-pair matrices.

use ndarray::Array2;
use serde::Serialize;

use crate::lattice::ModeIndexing;
use crate::numeric::sig12;

/// CSV with a `mode` corner cell, a header row and a leading column of
/// `x_σ` labels. `None` cells are left empty.
pub fn matrix_csv(ix: &ModeIndexing, cell: impl Fn(usize, usize) -> Option<f64>) -> String {
    let labels = ix.labels();
    let mut out = String::from("mode");
    for l in &labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (i, l) in labels.iter().enumerate() {
        out.push_str(l);
        for j in 0..labels.len() {
            out.push(',');
            if let Some(v) = cell(i, j) {
                out.push_str(&sig12(v));
            }
        }
        out.push('\n');
    }
    out
}

/// JSON form of a mode-pair matrix; NaN and infinite cells become `null`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabeledMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl LabeledMatrix {
    pub fn new(ix: &ModeIndexing, m: &Array2<f64>) -> Self {
        let values = m
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|&x| x.is_finite().then_some(x)).collect())
            .collect();
        Self {
            labels: ix.labels(),
            values,
        }
    }
}
