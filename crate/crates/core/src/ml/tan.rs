use serde::{Deserialize, Serialize};

use super::{
    check_arity, Attribute, ClassCounts, ClassProbabilities, Classifier, Dataset, Label, MlError, NominalData,
    Prediction,
};

/// Tree-augmented naive Bayes: every attribute has the class and at most one
/// other attribute as parents.
///
/// Only counts are stored; probabilities are derived with Laplace smoothing
/// on demand, so the model can be re-derived and inspected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TanBayesModel {
    pub attributes: Vec<Attribute>,
    pub alpha: f64,
    pub class_counts: ClassCounts,
    /// Attribute-level parent; the root (attribute 0) has none.
    pub parents: Vec<Option<usize>>,
    /// Conditional mutual information of each attribute with its parent.
    pub edge_weights: Vec<f64>,
    /// `counts[i][c][p][v]`: training rows of class `c` where attribute `i`
    /// takes value `v` and its parent takes value `p` (`p` = 0 without parent).
    pub counts: Vec<Vec<Vec<Vec<u64>>>>,
}

fn class_prior(counts: ClassCounts, alpha: f64, label: Label) -> f64 {
    (counts.get(label) as f64 + alpha) / (counts.total() as f64 + 2.0 * alpha)
}

impl TanBayesModel {
    pub fn prior(&self, label: Label) -> f64 {
        class_prior(self.class_counts, self.alpha, label)
    }

    /// Smoothed P(x_i = value | parent = parent_value, class). A parent value
    /// outside its domain falls back to P(x_i = value | class).
    pub fn conditional(&self, attribute: usize, value: usize, parent_value: Option<usize>, label: Label) -> f64 {
        let table = &self.counts[attribute][label.index()];
        let card = self.attributes[attribute].values.len() as f64;
        let row: Vec<u64> = match (self.parents[attribute], parent_value) {
            (Some(_), Some(p)) if p < table.len() => table[p].clone(),
            (None, _) => table[0].clone(),
            _ => (0..table[0].len()).map(|v| table.iter().map(|r| r[v]).sum()).collect(),
        };
        let total: u64 = row.iter().sum();
        (row.get(value).copied().unwrap_or(0) as f64 + self.alpha) / (total as f64 + self.alpha * card)
    }

    /// Unnormalized log joint ln P(c) + Σ ln P(x_i | parent, c). Attribute
    /// values outside the training domain contribute no factor.
    pub fn log_joint(&self, instance: &[usize], label: Label) -> f64 {
        let mut lp = self.prior(label).ln();
        for (i, &v) in instance.iter().enumerate() {
            if v >= self.attributes[i].values.len() {
                continue;
            }
            let pv = self.parents[i].map(|p| instance[p]);
            lp += self.conditional(i, v, pv, label).ln();
        }
        lp
    }
}

impl Classifier for TanBayesModel {
    fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    fn predict(&self, instance: &[usize]) -> Result<Prediction, MlError> {
        check_arity(&self.attributes, instance)?;
        let lm = self.log_joint(instance, Label::Malicious);
        let lb = self.log_joint(instance, Label::Benign);
        let m = lm.max(lb);
        let (em, eb) = ((lm - m).exp(), (lb - m).exp());
        let z = em + eb;
        Ok(Prediction::from_posterior(ClassProbabilities { malicious: em / z, benign: eb / z }))
    }
}

/// Empirical I(X_i; X_j | C) in bits.
pub fn conditional_mutual_information(data: &NominalData, i: usize, j: usize) -> f64 {
    let (ci, cj) = (data.cards[i], data.cards[j]);
    let mut joint = vec![vec![vec![0u64; cj]; ci]; 2];
    for (row, label) in data.rows.iter().zip(&data.labels) {
        joint[label.index()][row[i]][row[j]] += 1;
    }
    let n = data.len() as f64;
    let mut cmi = 0.0;
    for table in &joint {
        let nc: u64 = table.iter().flatten().sum();
        if nc == 0 {
            continue;
        }
        let row_sums: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
        let col_sums: Vec<u64> = (0..cj).map(|b| table.iter().map(|r| r[b]).sum()).collect();
        for a in 0..ci {
            for b in 0..cj {
                let nab = table[a][b];
                if nab == 0 {
                    continue;
                }
                let ratio = (nab as f64 * nc as f64) / (row_sums[a] as f64 * col_sums[b] as f64);
                cmi += nab as f64 / n * ratio.log2();
            }
        }
    }
    cmi.max(0.0)
}

/// Maximum-weight spanning tree over a symmetric weight matrix (Prim's
/// algorithm grown from vertex 0), returned as a parent array rooted at 0.
/// Ties keep the lowest-index vertex and the earliest-found parent.
pub fn chow_liu_tree(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let n = weights.len();
    let mut parents = vec![None; n];
    if n == 0 {
        return parents;
    }
    let mut in_tree = vec![false; n];
    in_tree[0] = true;
    let mut best: Vec<(f64, usize)> = (0..n).map(|v| (weights[0][v], 0)).collect();
    for _ in 1..n {
        let mut pick: Option<usize> = None;
        for v in 0..n {
            if !in_tree[v] && pick.is_none_or(|p| best[v].0 > best[p].0) {
                pick = Some(v);
            }
        }
        let v = pick.expect("a vertex remains outside the tree");
        in_tree[v] = true;
        parents[v] = Some(best[v].1);
        for u in 0..n {
            if !in_tree[u] && weights[v][u] > best[u].0 {
                best[u] = (weights[v][u], v);
            }
        }
    }
    parents
}

pub fn tan_train(dataset: &Dataset, alpha: f64) -> Result<TanBayesModel, MlError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(MlError::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if dataset.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    let data = dataset.to_nominal()?;
    let k = data.n_attributes();
    let mut weights = vec![vec![0.0; k]; k];
    for (i, j) in (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))) {
        let w = conditional_mutual_information(&data, i, j);
        weights[i][j] = w;
        weights[j][i] = w;
    }
    let parents = chow_liu_tree(&weights);
    let edge_weights = parents.iter().enumerate().map(|(i, p)| p.map_or(0.0, |p| weights[i][p])).collect();

    let mut counts: Vec<Vec<Vec<Vec<u64>>>> = (0..k)
        .map(|i| {
            let parent_card = parents[i].map_or(1, |p| data.cards[p]);
            vec![vec![vec![0u64; data.cards[i]]; parent_card]; 2]
        })
        .collect();
    for (row, label) in data.rows.iter().zip(&data.labels) {
        for i in 0..k {
            let p = parents[i].map_or(0, |p| row[p]);
            counts[i][label.index()][p][row[i]] += 1;
        }
    }
    Ok(TanBayesModel {
        attributes: dataset.attributes.clone(),
        alpha,
        class_counts: dataset.class_counts(),
        parents,
        edge_weights,
        counts,
    })
}
