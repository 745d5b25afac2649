use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{ClassCounts, Label, MlError};

/// Index used for a nominal value outside an attribute's domain.
pub const UNSEEN: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Nominal,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
    /// Domain of a nominal attribute, in index order. Empty for numeric.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<String>,
}

impl Attribute {
    pub fn nominal(name: impl Into<String>, values: &[&str]) -> Self {
        Self { name: name.into(), kind: AttributeKind::Nominal, values: values.iter().map(|s| s.to_string()).collect() }
    }

    pub fn numeric(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: AttributeKind::Numeric, values: Vec::new() }
    }

    pub fn value_index(&self, value: &str) -> Option<usize> {
        self.values.iter().position(|v| v == value)
    }

    fn intern(&mut self, value: &str) -> usize {
        match self.value_index(value) {
            Some(i) => i,
            None => {
                self.values.push(value.to_string());
                self.values.len() - 1
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Nominal(usize),
    Numeric(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub values: Vec<Value>,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub attributes: Vec<Attribute>,
    pub rows: Vec<Instance>,
}

/// All-nominal view used by the classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct NominalData {
    pub rows: Vec<Vec<usize>>,
    pub labels: Vec<Label>,
    /// Domain size per attribute.
    pub cards: Vec<usize>,
}

impl NominalData {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_attributes(&self) -> usize {
        self.cards.len()
    }
}

impl Dataset {
    pub fn new(attributes: Vec<Attribute>) -> Self {
        Self { attributes, rows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn push(&mut self, values: Vec<Value>, label: Label) -> Result<(), MlError> {
        if values.len() != self.attributes.len() {
            return Err(MlError::SchemaMismatch(format!(
                "row has {} values, schema has {} attributes",
                values.len(),
                self.attributes.len()
            )));
        }
        for (attr, v) in self.attributes.iter().zip(&values) {
            match (attr.kind, v) {
                (AttributeKind::Nominal, Value::Nominal(i)) if *i < attr.values.len() => {}
                (AttributeKind::Numeric, Value::Numeric(x)) if x.is_finite() => {}
                _ => return Err(MlError::SchemaMismatch(format!("bad value {v:?} for attribute {:?}", attr.name))),
            }
        }
        self.rows.push(Instance { values, label });
        Ok(())
    }

    /// Parses textual values per attribute kind. Nominal values not yet in
    /// the domain are appended to it.
    pub fn push_text<S: AsRef<str>>(&mut self, fields: &[S], label: Label) -> Result<(), MlError> {
        if fields.len() != self.attributes.len() {
            return Err(MlError::SchemaMismatch(format!(
                "row has {} values, schema has {} attributes",
                fields.len(),
                self.attributes.len()
            )));
        }
        let mut values = Vec::with_capacity(fields.len());
        for (attr, field) in self.attributes.iter_mut().zip(fields) {
            let field = field.as_ref();
            values.push(match attr.kind {
                AttributeKind::Nominal => Value::Nominal(attr.intern(field)),
                AttributeKind::Numeric => {
                    let x: f64 = field.trim().parse().map_err(|_| {
                        MlError::SchemaMismatch(format!("attribute {:?}: {field:?} is not a number", attr.name))
                    })?;
                    Value::Numeric(x)
                }
            });
        }
        self.push(values, label)
    }

    pub fn text_values(&self, row: &Instance) -> Vec<String> {
        self.attributes
            .iter()
            .zip(&row.values)
            .map(|(attr, v)| match v {
                Value::Nominal(i) => attr.values[*i].clone(),
                Value::Numeric(x) => x.to_string(),
            })
            .collect()
    }

    pub fn class_counts(&self) -> ClassCounts {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset { attributes: self.attributes.clone(), rows: indices.iter().map(|&i| self.rows[i].clone()).collect() }
    }

    pub fn to_nominal(&self) -> Result<NominalData, MlError> {
        for attr in &self.attributes {
            if attr.kind == AttributeKind::Numeric {
                return Err(MlError::NumericAttribute(attr.name.clone()));
            }
        }
        let rows = self
            .rows
            .iter()
            .map(|r| {
                r.values
                    .iter()
                    .map(|v| match v {
                        Value::Nominal(i) => *i,
                        Value::Numeric(_) => unreachable!("checked above"),
                    })
                    .collect()
            })
            .collect();
        Ok(NominalData {
            rows,
            labels: self.rows.iter().map(|r| r.label).collect(),
            cards: self.attributes.iter().map(|a| a.values.len()).collect(),
        })
    }

    /// Re-encodes every row against another schema's nominal domains, matching
    /// attributes by position and values by text. Values missing from the
    /// target domain become [`UNSEEN`].
    pub fn encode_for(&self, target: &[Attribute]) -> Result<Vec<Vec<usize>>, MlError> {
        if target.len() != self.attributes.len() {
            return Err(MlError::SchemaMismatch(format!(
                "dataset has {} attributes, model has {}",
                self.attributes.len(),
                target.len()
            )));
        }
        for (a, b) in self.attributes.iter().zip(target) {
            if a.name != b.name {
                return Err(MlError::SchemaMismatch(format!("attribute {:?} where model has {:?}", a.name, b.name)));
            }
            if a.kind == AttributeKind::Numeric {
                return Err(MlError::NumericAttribute(a.name.clone()));
            }
        }
        Ok(self
            .rows
            .iter()
            .map(|r| {
                r.values
                    .iter()
                    .zip(self.attributes.iter().zip(target))
                    .map(|(v, (own, other))| match v {
                        Value::Nominal(i) => other.value_index(&own.values[*i]).unwrap_or(UNSEEN),
                        Value::Numeric(_) => UNSEEN,
                    })
                    .collect()
            })
            .collect())
    }

    /// Header row is the attribute names followed by `label`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), MlError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.attributes.iter().map(|a| a.name.as_str()).collect();
        header.push("label");
        w.write_record(&header)?;
        for row in &self.rows {
            let mut fields = self.text_values(row);
            fields.push(row.label.to_string());
            w.write_record(&fields)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads a CSV written by [`Dataset::write_csv`]. `template` fixes the
    /// attribute names and kinds; its nominal domains seed the result's.
    pub fn read_csv<R: Read>(reader: R, template: &[Attribute]) -> Result<Dataset, MlError> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let expected: Vec<&str> = template.iter().map(|a| a.name.as_str()).chain(["label"]).collect();
        let got: Vec<&str> = header.iter().collect();
        if got != expected {
            return Err(MlError::SchemaMismatch(format!("CSV header {got:?} does not match {expected:?}")));
        }
        let mut ds = Dataset::new(template.to_vec());
        for (line, record) in r.records().enumerate() {
            let record = record?;
            let fields: Vec<&str> = record.iter().collect();
            let (label_text, values) = fields.split_last().expect("header check guarantees a label column");
            let label =
                label_text.parse::<Label>().map_err(|e| MlError::SchemaMismatch(format!("row {}: {e}", line + 1)))?;
            ds.push_text(values, label)?;
        }
        Ok(ds)
    }
}
