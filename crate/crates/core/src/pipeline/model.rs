use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::features::{Phase1Features, Phase2Features, FEATURE_SCHEMA_VERSION};
use super::PipelineError;
use crate::ml::{
    c45_train, evaluate, split_train_test, tan_train, Attribute, C45Params, Classifier, Dataset, DecisionTreeModel,
    Discretizer, Label, Metrics, Prediction, TanBayesModel,
};
use crate::tls::ExtensionRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Phase1,
    Phase2,
}

impl Phase {
    pub fn schema(self) -> Vec<Attribute> {
        match self {
            Phase::Phase1 => Phase1Features::schema(),
            Phase::Phase2 => Phase2Features::schema(),
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Phase1 => "phase1",
            Phase::Phase2 => "phase2",
        })
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "phase1" => Ok(Phase::Phase1),
            "phase2" => Ok(Phase::Phase2),
            other => Err(format!("unknown phase {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum ClassifierModel {
    C45(DecisionTreeModel),
    Tan(TanBayesModel),
}

impl ClassifierModel {
    pub fn as_classifier(&self) -> &(dyn Classifier + Send + Sync) {
        match self {
            ClassifierModel::C45(m) => m,
            ClassifierModel::Tan(m) => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub seed: u64,
    /// Training fraction; 1.0 trains on every row with no held-out set.
    pub split: f64,
    pub bins: usize,
    pub alpha: f64,
    pub c45: C45Params,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { seed: 42, split: 0.66, bins: 10, alpha: 1.0, c45: C45Params::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub options: TrainOptions,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Held-out metrics; absent when trained on every row.
    pub test_metrics: Option<Metrics>,
}

/// Serialized classifier plus everything needed to featurize inputs for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub phase: Phase,
    pub columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discretizer: Option<Discretizer>,
    /// Extension registry the phase-2 features were computed with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registry: Option<ExtensionRegistry>,
    pub classifier: ClassifierModel,
    pub training: TrainingSummary,
}

impl ModelFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let model: ModelFile = serde_json::from_str(text)?;
        if model.schema_version != FEATURE_SCHEMA_VERSION {
            return Err(PipelineError::ModelMismatch(format!(
                "model schema version {} but this build uses {FEATURE_SCHEMA_VERSION}",
                model.schema_version
            )));
        }
        let expected: Vec<String> = model.phase.schema().into_iter().map(|a| a.name).collect();
        if model.columns != expected {
            return Err(PipelineError::ModelMismatch(format!(
                "{} model columns do not match the feature schema",
                model.phase
            )));
        }
        Ok(model)
    }

    pub fn require_phase(&self, phase: Phase) -> Result<(), PipelineError> {
        if self.phase != phase {
            return Err(PipelineError::ModelMismatch(format!("expected a {phase} model, got {}", self.phase)));
        }
        Ok(())
    }

    /// Discretizes a raw-schema dataset for this model's classifier.
    fn prepare(&self, raw: &Dataset) -> Result<Dataset, PipelineError> {
        Ok(match &self.discretizer {
            Some(d) => d.apply(raw)?,
            None => raw.clone(),
        })
    }

    pub fn predict_text(&self, values: &[String]) -> Result<Prediction, PipelineError> {
        let schema = self.phase.schema();
        let mut raw = Dataset::new(schema);
        // The label is a placeholder; only the attribute values are used.
        raw.push_text(values, Label::Benign)?;
        let prepared = self.prepare(&raw)?;
        let classifier = self.classifier.as_classifier();
        let encoded = prepared.encode_for(classifier.attributes())?;
        Ok(classifier.predict(&encoded[0])?)
    }

    pub fn evaluate(&self, raw: &Dataset) -> Result<Metrics, PipelineError> {
        let prepared = self.prepare(raw)?;
        Ok(evaluate(self.classifier.as_classifier(), &prepared)?)
    }

    /// The held-out rows this model's seeded split set aside from `raw`.
    pub fn held_out(&self, raw: &Dataset, seed: u64) -> Result<Dataset, PipelineError> {
        let split = self.training.options.split;
        if split >= 1.0 {
            return Ok(raw.clone());
        }
        Ok(split_train_test(raw, split, seed)?.1)
    }
}

/// Fits the phase's classifier on a raw-schema dataset (C4.5 for phase 1,
/// TAN on discretized features for phase 2).
pub fn train_model(
    phase: Phase,
    raw: &Dataset,
    options: TrainOptions,
    registry: Option<&ExtensionRegistry>,
) -> Result<ModelFile, PipelineError> {
    let names: Vec<&str> = raw.attributes.iter().map(|a| a.name.as_str()).collect();
    let expected = phase.schema();
    if names != expected.iter().map(|a| a.name.as_str()).collect::<Vec<_>>() {
        return Err(PipelineError::ModelMismatch(format!("dataset columns do not match the {phase} schema")));
    }
    let (train, test) = if options.split >= 1.0 {
        (raw.clone(), None)
    } else {
        let (a, b) = split_train_test(raw, options.split, options.seed)?;
        (a, Some(b))
    };
    let (discretizer, classifier) = match phase {
        Phase::Phase1 => {
            let mut tree = c45_train(&train, options.c45)?;
            tree.training_meta.seed = Some(options.seed);
            (None, ClassifierModel::C45(tree))
        }
        Phase::Phase2 => {
            let d = Discretizer::fit(&train, options.bins)?;
            let model = tan_train(&d.apply(&train)?, options.alpha)?;
            (Some(d), ClassifierModel::Tan(model))
        }
    };
    let mut model = ModelFile {
        schema_version: FEATURE_SCHEMA_VERSION,
        phase,
        columns: expected.into_iter().map(|a| a.name).collect(),
        discretizer,
        registry: if phase == Phase::Phase2 { registry.cloned() } else { None },
        classifier,
        training: TrainingSummary {
            options,
            train_rows: train.len(),
            test_rows: test.as_ref().map_or(0, Dataset::len),
            test_metrics: None,
        },
    };
    if let Some(test) = &test {
        model.training.test_metrics = Some(model.evaluate(test)?);
    }
    Ok(model)
}
