use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Nominal Krippendorff's alpha over an `annotator × item` matrix.
///
/// Items with fewer than two values are unpairable and ignored. When only one
/// value occurs among pairable values, expected disagreement is zero and the
/// result is 1.
pub fn krippendorff_alpha<L: Ord + Clone>(annotations: &[Vec<Option<L>>]) -> Result<f64, EvalError> {
    if annotations.len() < 2 {
        return Err(EvalError::TooFewAnnotators(annotations.len()));
    }
    let items = annotations.iter().map(Vec::len).max().unwrap_or(0);
    let mut values: BTreeMap<L, usize> = BTreeMap::new();
    let mut units: Vec<Vec<L>> = Vec::new();
    for item in 0..items {
        let unit: Vec<L> = annotations
            .iter()
            .filter_map(|row| row.get(item).cloned().flatten())
            .collect();
        if unit.len() >= 2 {
            for v in &unit {
                let next = values.len();
                values.entry(v.clone()).or_insert(next);
            }
            units.push(unit);
        }
    }
    if units.is_empty() {
        return Err(EvalError::NoPairableValues);
    }
    // Coincidence matrix: each ordered pair within a unit adds 1/(m_u − 1).
    let k = values.len();
    let mut o = vec![vec![0.0; k]; k];
    for unit in &units {
        let w = 1.0 / (unit.len() - 1) as f64;
        for (i, a) in unit.iter().enumerate() {
            for (j, b) in unit.iter().enumerate() {
                if i != j {
                    o[values[a]][values[b]] += w;
                }
            }
        }
    }
    let n_c: Vec<f64> = o.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = n_c.iter().sum();
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for d in 0..k {
            if c != d {
                observed += o[c][d];
                expected += n_c[c] * n_c[d];
            }
        }
    }
    let d_o = observed / n;
    let d_e = expected / (n * (n - 1.0));
    if d_e == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - d_o / d_e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAlpha {
    pub first: String,
    pub second: String,
    /// `None` when the pair shares no annotated item.
    pub alpha: Option<f64>,
}

/// Alpha for every annotator pair, in (i, j) order with i < j.
pub fn pairwise_alpha<L: Ord + Clone>(annotators: &[String], annotations: &[Vec<Option<L>>]) -> Vec<PairAlpha> {
    let mut out = Vec::new();
    for i in 0..annotations.len() {
        for j in i + 1..annotations.len() {
            let pair = [annotations[i].clone(), annotations[j].clone()];
            out.push(PairAlpha {
                first: annotators[i].clone(),
                second: annotators[j].clone(),
                alpha: krippendorff_alpha(&pair).ok(),
            });
        }
    }
    out
}

/// Annotation table read from CSV: an item column followed by one column per
/// annotator; empty cells are missing annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationMatrix {
    pub annotators: Vec<String>,
    pub items: Vec<String>,
    /// `labels[annotator][item]`.
    pub labels: Vec<Vec<Option<String>>>,
}

pub fn parse_annotations_csv(text: &str) -> Result<AnnotationMatrix, EvalError> {
    let malformed = |message: String| EvalError::Malformed {
        what: "annotation CSV".into(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| malformed(e.to_string()))?.clone();
    if headers.len() < 3 {
        return Err(malformed(
            "need an item column and at least two annotator columns".into(),
        ));
    }
    let annotators: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut items = Vec::new();
    let mut labels = vec![Vec::new(); annotators.len()];
    for record in reader.records() {
        let record = record.map_err(|e| malformed(e.to_string()))?;
        items.push(record.get(0).unwrap_or_default().to_string());
        for (a, row) in labels.iter_mut().enumerate() {
            let cell = record.get(a + 1).unwrap_or_default();
            row.push((!cell.is_empty()).then(|| cell.to_lowercase()));
        }
    }
    Ok(AnnotationMatrix {
        annotators,
        items,
        labels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub annotators: Vec<String>,
    pub items: usize,
    pub groupwise: f64,
    pub pairwise: Vec<PairAlpha>,
    pub max_pairwise: Option<f64>,
}

impl AgreementReport {
    pub fn compute(m: &AnnotationMatrix) -> Result<Self, EvalError> {
        let groupwise = krippendorff_alpha(&m.labels)?;
        let pairwise = pairwise_alpha(&m.annotators, &m.labels);
        let max_pairwise = pairwise.iter().filter_map(|p| p.alpha).reduce(f64::max);
        Ok(AgreementReport {
            annotators: m.annotators.clone(),
            items: m.items.len(),
            groupwise,
            pairwise,
            max_pairwise,
        })
    }
}
