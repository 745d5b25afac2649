use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::info::split_stats;
use super::{
    check_arity, Attribute, ClassCounts, ClassProbabilities, Classifier, Dataset, Label, MlError, NominalData,
    Prediction,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C45Params {
    /// Nodes with fewer rows than this become leaves.
    pub min_leaf: usize,
    /// Confidence factor for pessimistic-error pruning; `None` disables pruning.
    pub pruning_cf: Option<f64>,
}

impl Default for C45Params {
    fn default() -> Self {
        Self { min_leaf: 2, pruning_cf: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// Index into the split attribute's domain.
    pub value: usize,
    pub node: Node,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        label: Label,
        class_counts: ClassCounts,
    },
    Split {
        attribute: usize,
        class_counts: ClassCounts,
        /// One branch per value present in the training rows at this node.
        children: Vec<Branch>,
    },
}

impl Node {
    pub fn class_counts(&self) -> ClassCounts {
        match self {
            Node::Leaf { class_counts, .. } | Node::Split { class_counts, .. } => *class_counts,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { children, .. } => 1 + children.iter().map(|b| b.node.depth()).max().unwrap_or(0),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { children, .. } => children.iter().map(|b| b.node.leaf_count()).sum(),
        }
    }

    fn leaf(counts: ClassCounts) -> Node {
        Node::Leaf { label: counts.majority(), class_counts: counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: Option<u64>,
    pub min_leaf: usize,
    pub pruned: bool,
    pub pruning_cf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub attributes: Vec<Attribute>,
    pub root: Node,
    pub training_meta: TrainingMeta,
}

struct Builder<'a> {
    data: &'a NominalData,
    min_leaf: usize,
}

impl Builder<'_> {
    fn build(&self, rows: &[usize], available: &mut Vec<bool>) -> Node {
        let counts: ClassCounts = rows.iter().map(|&r| self.data.labels[r]).collect();
        if counts.is_pure() || rows.len() < self.min_leaf {
            return Node::leaf(counts);
        }
        let candidates: Vec<_> = (0..available.len())
            .filter(|&a| available[a])
            .map(|a| (a, split_stats(self.data, rows, a)))
            .filter(|(_, s)| s.branches > 1)
            .collect();
        if candidates.is_empty() {
            return Node::leaf(counts);
        }
        // C4.5: among attributes with at least average gain, take the best ratio.
        let mean_gain = candidates.iter().map(|(_, s)| s.gain).sum::<f64>() / candidates.len() as f64;
        let mut best: Option<(usize, f64)> = None;
        for (a, s) in &candidates {
            if s.gain + 1e-12 < mean_gain {
                continue;
            }
            if best.is_none_or(|(_, r)| s.ratio > r + 1e-12) {
                best = Some((*a, s.ratio));
            }
        }
        let (attribute, _) = best.expect("the max-gain candidate is never below the mean");

        let mut parts: Vec<Vec<usize>> = vec![Vec::new(); self.data.cards[attribute]];
        for &r in rows {
            parts[self.data.rows[r][attribute]].push(r);
        }
        available[attribute] = false;
        let children = parts
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_empty())
            .map(|(value, p)| Branch { value, node: self.build(p, available) })
            .collect();
        available[attribute] = true;
        Node::Split { attribute, class_counts: counts, children }
    }
}

/// Upper-bound extra errors for `e` observed errors in `n` cases at
/// confidence `cf` (Quinlan's estimate).
fn add_errs(n: f64, e: f64, cf: f64) -> f64 {
    if e < 1e-6 {
        return n * (1.0 - cf.powf(1.0 / n));
    }
    if e < 0.9999 {
        let v = n * (1.0 - cf.powf(1.0 / n));
        return v + e * (add_errs(n, 1.0, cf) - v);
    }
    if e + 0.5 >= n {
        return 0.67 * (n - e);
    }
    let z = Normal::standard().inverse_cdf(1.0 - cf);
    let f = (e + 0.5) / n;
    let r = (f + z * z / (2.0 * n) + z * (f / n - f * f / n + z * z / (4.0 * n * n)).sqrt()) / (1.0 + z * z / n);
    r * n - e
}

fn leaf_estimate(counts: ClassCounts, cf: f64) -> f64 {
    let n = counts.total() as f64;
    let e = n - counts.get(counts.majority()) as f64;
    e + add_errs(n, e, cf)
}

/// Bottom-up subtree replacement; returns the pruned node and its estimated errors.
fn prune(node: Node, cf: f64) -> (Node, f64) {
    match node {
        Node::Leaf { class_counts, .. } => {
            let est = leaf_estimate(class_counts, cf);
            (node, est)
        }
        Node::Split { attribute, class_counts, children } => {
            let mut subtree = 0.0;
            let children: Vec<Branch> = children
                .into_iter()
                .map(|b| {
                    let (node, est) = prune(b.node, cf);
                    subtree += est;
                    Branch { value: b.value, node }
                })
                .collect();
            let as_leaf = leaf_estimate(class_counts, cf);
            if as_leaf <= subtree + 0.1 {
                (Node::leaf(class_counts), as_leaf)
            } else {
                (Node::Split { attribute, class_counts, children }, subtree)
            }
        }
    }
}

pub fn c45_train(dataset: &Dataset, params: C45Params) -> Result<DecisionTreeModel, MlError> {
    if dataset.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    if let Some(cf) = params.pruning_cf {
        if !(cf > 0.0 && cf < 1.0) {
            return Err(MlError::InvalidParameter(format!("pruning confidence must be in (0, 1), got {cf}")));
        }
    }
    let data = dataset.to_nominal()?;
    let rows: Vec<usize> = (0..data.len()).collect();
    let builder = Builder { data: &data, min_leaf: params.min_leaf.max(1) };
    let mut root = builder.build(&rows, &mut vec![true; data.n_attributes()]);
    if let Some(cf) = params.pruning_cf {
        root = prune(root, cf).0;
    }
    Ok(DecisionTreeModel {
        attributes: dataset.attributes.clone(),
        root,
        training_meta: TrainingMeta {
            seed: None,
            min_leaf: params.min_leaf,
            pruned: params.pruning_cf.is_some(),
            pruning_cf: params.pruning_cf,
        },
    })
}

fn counts_prediction(counts: ClassCounts) -> Prediction {
    let label = counts.majority();
    let posterior =
        ClassProbabilities { malicious: counts.fraction(Label::Malicious), benign: counts.fraction(Label::Benign) };
    Prediction { label, confidence: posterior.get(label), posterior }
}

impl Classifier for DecisionTreeModel {
    fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    /// Walks the tree; a value with no branch stops at that node and answers
    /// with its majority class.
    fn predict(&self, instance: &[usize]) -> Result<Prediction, MlError> {
        check_arity(&self.attributes, instance)?;
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { class_counts, .. } => return Ok(counts_prediction(*class_counts)),
                Node::Split { attribute, class_counts, children } => {
                    let v = instance[*attribute];
                    match children.iter().find(|b| b.value == v) {
                        Some(b) => node = &b.node,
                        None => return Ok(counts_prediction(*class_counts)),
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::{Attribute, AttributeKind};

    const WEATHER: &str = include_str!("../../tests/fixtures/ml/weather.csv");

    fn weather() -> Dataset {
        let template: Vec<Attribute> =
            ["outlook", "temperature", "humidity", "wind"].iter().map(|n| Attribute::nominal(*n, &[])).collect();
        Dataset::read_csv(WEATHER.as_bytes(), &template).unwrap()
    }

    fn instance(ds: &Dataset, values: &[&str]) -> Vec<usize> {
        ds.attributes.iter().zip(values).map(|(a, v)| a.value_index(v).unwrap()).collect()
    }

    fn split_attrs_on_paths(node: &Node, seen: &mut Vec<usize>, ok: &mut bool) {
        if let Node::Split { attribute, children, .. } = node {
            if seen.contains(attribute) {
                *ok = false;
            }
            seen.push(*attribute);
            for b in children {
                split_attrs_on_paths(&b.node, seen, ok);
            }
            seen.pop();
        }
    }

    #[test]
    fn weather_tree_matches_hand_trace() {
        let ds = weather();
        let model = c45_train(&ds, C45Params::default()).unwrap();
        let Node::Split { attribute, ref children, .. } = model.root else { panic!("root should split") };
        assert_eq!(ds.attributes[attribute].name, "outlook");
        assert_eq!(children.len(), 3);
        let p = model.predict(&instance(&ds, &["sunny", "cool", "normal", "weak"])).unwrap();
        assert_eq!((p.label, p.confidence), (Label::Benign, 1.0));
        let p = model.predict(&instance(&ds, &["rain", "hot", "high", "strong"])).unwrap();
        assert_eq!(p.label, Label::Malicious);
        // Unpruned tree fits the training set exactly.
        let data = ds.to_nominal().unwrap();
        for (row, label) in data.rows.iter().zip(&data.labels) {
            assert_eq!(model.predict(row).unwrap().label, *label);
        }
    }

    #[test]
    fn single_label_gives_single_leaf() {
        let mut ds = Dataset::new(vec![Attribute::nominal("a", &[])]);
        ds.push_text(&["x"], Label::Benign).unwrap();
        ds.push_text(&["y"], Label::Benign).unwrap();
        let model = c45_train(&ds, C45Params::default()).unwrap();
        assert_eq!(
            model.root,
            Node::Leaf { label: Label::Benign, class_counts: ClassCounts { malicious: 0, benign: 2 } }
        );
    }

    #[test]
    fn xor_is_learned_exactly() {
        let mut ds = Dataset::new(vec![Attribute::nominal("a", &[]), Attribute::nominal("b", &[])]);
        for _ in 0..3 {
            for (a, b) in [("0", "0"), ("0", "1"), ("1", "0"), ("1", "1")] {
                let label = if a != b { Label::Malicious } else { Label::Benign };
                ds.push_text(&[a, b], label).unwrap();
            }
        }
        let model = c45_train(&ds, C45Params::default()).unwrap();
        assert_eq!(model.root.depth(), 2);
        let data = ds.to_nominal().unwrap();
        for (row, label) in data.rows.iter().zip(&data.labels) {
            assert_eq!(model.predict(row).unwrap().label, *label);
        }
    }

    #[test]
    fn unseen_value_at_root_falls_back_to_majority() {
        let ds = weather();
        let model = c45_train(&ds, C45Params::default()).unwrap();
        let mut x = instance(&ds, &["sunny", "cool", "normal", "weak"]);
        x[0] = crate::ml::UNSEEN;
        let p = model.predict(&x).unwrap();
        assert_eq!(p.label, Label::Benign);
        assert!((p.confidence - 9.0 / 14.0).abs() < 1e-12);
        assert!(matches!(model.predict(&x[..2]), Err(MlError::SchemaMismatch(_))));
    }

    #[test]
    fn empty_and_numeric_inputs_are_rejected() {
        let ds = Dataset::new(vec![Attribute::nominal("a", &[])]);
        assert!(matches!(c45_train(&ds, C45Params::default()), Err(MlError::EmptyDataset)));
        let mut ds = Dataset::new(vec![Attribute::numeric("n")]);
        ds.push_text(&["1"], Label::Benign).unwrap();
        assert!(matches!(c45_train(&ds, C45Params::default()), Err(MlError::NumericAttribute(_))));
        assert_eq!(ds.attributes[0].kind, AttributeKind::Numeric);
    }

    #[test]
    fn add_errs_against_binomial_bound() {
        // With no observed errors the upper limit p solves (1 - p)^n = cf.
        for n in [1.0, 6.0, 9.0, 40.0] {
            let p = 1.0 - 0.25f64.powf(1.0 / n);
            assert!((add_errs(n, 0.0, 0.25) - n * p).abs() < 1e-12);
        }
        assert!((add_errs(6.0, 0.0, 0.25) / 6.0 - 0.206).abs() < 1e-3);
        // U_0.25(1, 16) is about 0.157 per case, so about 1.5 extra errors.
        assert!((add_errs(16.0, 1.0, 0.25) - (0.157 * 16.0 - 1.0)).abs() < 0.05);
    }

    #[test]
    fn pruning_collapses_noise_splits() {
        // Attribute `noise` has a single contrary row per value; the split does not pay for itself.
        let mut ds = Dataset::new(vec![Attribute::nominal("noise", &[])]);
        for i in 0..40 {
            let v = (i % 4).to_string();
            let label = if i % 10 == 0 { Label::Malicious } else { Label::Benign };
            ds.push_text(&[v.as_str()], label).unwrap();
        }
        let unpruned = c45_train(&ds, C45Params::default()).unwrap();
        let pruned = c45_train(&ds, C45Params { min_leaf: 2, pruning_cf: Some(0.25) }).unwrap();
        assert!(matches!(unpruned.root, Node::Split { .. }));
        assert!(matches!(pruned.root, Node::Leaf { label: Label::Benign, .. }));
        assert!(pruned.training_meta.pruned);
    }

    #[test]
    fn model_json_round_trip() {
        let model = c45_train(&weather(), C45Params::default()).unwrap();
        let text = serde_json::to_string(&model).unwrap();
        let back: DecisionTreeModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, model);
    }

    proptest::proptest! {
        #[test]
        fn tree_invariants_on_random_data(
            rows in proptest::collection::vec((proptest::collection::vec(0usize..3, 4), proptest::bool::ANY), 1..60),
            min_leaf in 1usize..4,
        ) {
            let mut ds = Dataset::new((0..4).map(|i| Attribute::nominal(format!("a{i}"), &["0", "1", "2"])).collect());
            for (vals, mal) in &rows {
                let text: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
                ds.push_text(&text, if *mal { Label::Malicious } else { Label::Benign }).unwrap();
            }
            let params = C45Params { min_leaf, pruning_cf: None };
            let model = c45_train(&ds, params).unwrap();
            let mut ok = true;
            split_attrs_on_paths(&model.root, &mut Vec::new(), &mut ok);
            proptest::prop_assert!(ok);
            proptest::prop_assert!(model.root.leaf_count() >= 1);
            proptest::prop_assert_eq!(model.root.class_counts().total(), rows.len() as u64);
            proptest::prop_assert_eq!(&c45_train(&ds, params).unwrap(), &model);
        }
    }
}
