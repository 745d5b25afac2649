use serde::{Deserialize, Serialize};

use super::{Classifier, Dataset, Label, MlError};

/// Confusion counts with malicious as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn record(&mut self, actual: Label, predicted: Label) {
        match (actual, predicted) {
            (Label::Malicious, Label::Malicious) => self.tp += 1,
            (Label::Benign, Label::Malicious) => self.fp += 1,
            (Label::Malicious, Label::Benign) => self.fn_ += 1,
            (Label::Benign, Label::Benign) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn metrics(self) -> Metrics {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Metrics { accuracy: ratio(self.tp + self.tn, self.total()), precision, recall, f1, confusion: self }
    }
}

impl FromIterator<(Label, Label)> for ConfusionMatrix {
    fn from_iter<I: IntoIterator<Item = (Label, Label)>>(iter: I) -> Self {
        let mut m = ConfusionMatrix::default();
        for (actual, predicted) in iter {
            m.record(actual, predicted);
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: ConfusionMatrix,
}

/// Scores `model` on `test`, whose nominal values are matched to the model's
/// domains by text.
pub fn evaluate<C: Classifier + ?Sized>(model: &C, test: &Dataset) -> Result<Metrics, MlError> {
    if test.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    let encoded = test.encode_for(model.attributes())?;
    let mut m = ConfusionMatrix::default();
    for (row, inst) in test.rows.iter().zip(&encoded) {
        m.record(row.label, model.predict(inst)?.label);
    }
    Ok(m.metrics())
}
