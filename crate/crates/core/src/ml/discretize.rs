use serde::{Deserialize, Serialize};

use super::{Attribute, AttributeKind, Dataset, MlError, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeCuts {
    pub attribute: String,
    /// Strictly increasing. A value `v` falls in bin `#{cut < v}`.
    pub cuts: Vec<f64>,
}

impl AttributeCuts {
    pub fn bin_of(&self, v: f64) -> usize {
        self.cuts.partition_point(|&c| c < v)
    }

    pub fn bin_count(&self) -> usize {
        self.cuts.len() + 1
    }

    pub fn bin_labels(&self) -> Vec<String> {
        (0..self.bin_count()).map(|i| format!("b{i}")).collect()
    }
}

/// Equal-frequency numeric-to-nominal conversion fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretizer {
    pub bins: usize,
    pub attributes: Vec<AttributeCuts>,
    /// Constant columns collapsed to a single bin.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<String>,
}

/// Linear-interpolation sample quantile (R type 7) of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Discretizer {
    /// Fits every numeric attribute of `dataset`.
    pub fn fit(dataset: &Dataset, bins: usize) -> Result<Self, MlError> {
        let numeric: Vec<usize> =
            (0..dataset.attributes.len()).filter(|&i| dataset.attributes[i].kind == AttributeKind::Numeric).collect();
        Self::fit_attributes(dataset, &numeric, bins)
    }

    pub fn fit_attributes(dataset: &Dataset, attributes: &[usize], bins: usize) -> Result<Self, MlError> {
        if bins < 2 {
            return Err(MlError::InvalidParameter(format!("bins must be at least 2, got {bins}")));
        }
        if dataset.is_empty() {
            return Err(MlError::EmptyDataset);
        }
        let mut out = Discretizer { bins, attributes: Vec::new(), degenerate: Vec::new() };
        for &a in attributes {
            let attr = dataset
                .attributes
                .get(a)
                .ok_or_else(|| MlError::SchemaMismatch(format!("no attribute at index {a}")))?;
            if attr.kind != AttributeKind::Numeric {
                return Err(MlError::SchemaMismatch(format!("attribute {:?} is not numeric", attr.name)));
            }
            let mut xs: Vec<f64> = dataset
                .rows
                .iter()
                .map(|r| match r.values[a] {
                    Value::Numeric(x) => x,
                    Value::Nominal(_) => unreachable!("schema checked on push"),
                })
                .collect();
            xs.sort_by(f64::total_cmp);
            let mut cuts: Vec<f64> = Vec::new();
            if xs[0] == xs[xs.len() - 1] {
                log::warn!("attribute {:?} is constant; using a single bin", attr.name);
                out.degenerate.push(attr.name.clone());
            } else {
                for k in 1..bins {
                    let c = quantile(&xs, k as f64 / bins as f64);
                    if cuts.last().is_none_or(|&last| c > last) {
                        cuts.push(c);
                    }
                }
            }
            out.attributes.push(AttributeCuts { attribute: attr.name.clone(), cuts });
        }
        Ok(out)
    }

    pub fn cuts_for(&self, name: &str) -> Option<&AttributeCuts> {
        self.attributes.iter().find(|c| c.attribute == name)
    }

    /// Replaces each fitted numeric attribute with a nominal one whose values
    /// are bin labels `b0..bk`. Other attributes are copied unchanged.
    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset, MlError> {
        let mut plan: Vec<Option<&AttributeCuts>> = vec![None; dataset.attributes.len()];
        for c in &self.attributes {
            let i = dataset
                .attribute_index(&c.attribute)
                .ok_or_else(|| MlError::SchemaMismatch(format!("attribute {:?} missing", c.attribute)))?;
            if dataset.attributes[i].kind != AttributeKind::Numeric {
                return Err(MlError::SchemaMismatch(format!("attribute {:?} is not numeric", c.attribute)));
            }
            plan[i] = Some(c);
        }
        let attributes = dataset
            .attributes
            .iter()
            .zip(&plan)
            .map(|(a, p)| match p {
                Some(c) => Attribute { name: a.name.clone(), kind: AttributeKind::Nominal, values: c.bin_labels() },
                None => a.clone(),
            })
            .collect();
        let mut out = Dataset::new(attributes);
        for row in &dataset.rows {
            let values = row
                .values
                .iter()
                .zip(&plan)
                .map(|(v, p)| match (v, p) {
                    (Value::Numeric(x), Some(c)) => Value::Nominal(c.bin_of(*x)),
                    _ => v.clone(),
                })
                .collect();
            out.push(values, row.label)?;
        }
        Ok(out)
    }
}
