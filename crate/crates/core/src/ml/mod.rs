//! Classifiers and the data plumbing around them: nominal datasets,
//! equal-frequency discretization, C4.5, tree-augmented naive Bayes,
//! stratified splitting and evaluation metrics.

mod c45;
mod dataset;
mod discretize;
mod info;
mod metrics;
mod split;
mod tan;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use c45::{c45_train, C45Params, DecisionTreeModel, Node, TrainingMeta};
pub use dataset::{Attribute, AttributeKind, Dataset, Instance, NominalData, Value, UNSEEN};
pub use discretize::{AttributeCuts, Discretizer};
pub use info::{entropy, gain_ratio, split_stats, SplitStats};
pub use metrics::{evaluate, ConfusionMatrix, Metrics};
pub use split::split_train_test;
pub use tan::{chow_liu_tree, conditional_mutual_information, tan_train, TanBayesModel};

#[derive(Debug, thiserror::Error)]
pub enum MlError {
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("too few rows: class {label} has {count}, need at least 2")]
    TooFewRows { label: Label, count: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("attribute {0:?} is numeric; discretize it first")]
    NumericAttribute(String),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Malicious,
    Benign,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Malicious, Label::Benign];

    pub fn index(self) -> usize {
        match self {
            Label::Malicious => 0,
            Label::Benign => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Malicious => "malicious",
            Label::Benign => "benign",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "malicious" => Ok(Label::Malicious),
            "benign" => Ok(Label::Benign),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub malicious: u64,
    pub benign: u64,
}

impl ClassCounts {
    pub fn get(&self, label: Label) -> u64 {
        match label {
            Label::Malicious => self.malicious,
            Label::Benign => self.benign,
        }
    }

    pub fn add(&mut self, label: Label) {
        match label {
            Label::Malicious => self.malicious += 1,
            Label::Benign => self.benign += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.malicious + self.benign
    }

    pub fn is_pure(&self) -> bool {
        self.malicious == 0 || self.benign == 0
    }

    /// Majority class; ties go to malicious.
    pub fn majority(&self) -> Label {
        if self.benign > self.malicious {
            Label::Benign
        } else {
            Label::Malicious
        }
    }

    pub fn fraction(&self, label: Label) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.get(label) as f64 / n as f64,
        }
    }
}

impl FromIterator<Label> for ClassCounts {
    fn from_iter<I: IntoIterator<Item = Label>>(iter: I) -> Self {
        let mut c = ClassCounts::default();
        for l in iter {
            c.add(l);
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassProbabilities {
    pub malicious: f64,
    pub benign: f64,
}

impl ClassProbabilities {
    pub fn get(&self, label: Label) -> f64 {
        match label {
            Label::Malicious => self.malicious,
            Label::Benign => self.benign,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    /// Probability the model assigns to `label`.
    pub confidence: f64,
    pub posterior: ClassProbabilities,
}

impl Prediction {
    /// Picks the larger posterior, malicious on an exact tie.
    fn from_posterior(posterior: ClassProbabilities) -> Self {
        let label = if posterior.benign > posterior.malicious { Label::Benign } else { Label::Malicious };
        Self { label, confidence: posterior.get(label), posterior }
    }
}

/// A trained model over nominal attributes. Instances are value indices into
/// each attribute's domain; an index outside the domain means "unseen".
pub trait Classifier {
    fn attributes(&self) -> &[Attribute];
    fn predict(&self, instance: &[usize]) -> Result<Prediction, MlError>;
}

fn check_arity(attributes: &[Attribute], instance: &[usize]) -> Result<(), MlError> {
    if instance.len() != attributes.len() {
        return Err(MlError::SchemaMismatch(format!(
            "instance has {} values, model expects {}",
            instance.len(),
            attributes.len()
        )));
    }
    Ok(())
}
