use super::{Dataset, MlError, NominalData};

/// Shannon entropy in bits of a count vector. Zero counts contribute nothing.
pub fn entropy(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            -p * p.log2()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitStats {
    pub gain: f64,
    pub split_info: f64,
    /// `gain / split_info`, or 0 when the split information is 0.
    pub ratio: f64,
    /// Number of attribute values present among the rows.
    pub branches: usize,
}

/// Information gain, split information and gain ratio of splitting `rows` on
/// attribute `attr`.
pub fn split_stats(data: &NominalData, rows: &[usize], attr: usize) -> SplitStats {
    let mut per_value = vec![[0.0f64; 2]; data.cards[attr]];
    let mut class = [0.0f64; 2];
    for &r in rows {
        let c = data.labels[r].index();
        per_value[data.rows[r][attr]][c] += 1.0;
        class[c] += 1.0;
    }
    let n = rows.len() as f64;
    let mut conditional = 0.0;
    let mut sizes = Vec::with_capacity(per_value.len());
    for counts in &per_value {
        let nv = counts[0] + counts[1];
        if nv > 0.0 {
            conditional += nv / n * entropy(counts);
            sizes.push(nv);
        }
    }
    let gain = entropy(&class) - conditional;
    let split_info = entropy(&sizes);
    let ratio = if split_info > 1e-12 { gain / split_info } else { 0.0 };
    SplitStats { gain, split_info, ratio, branches: sizes.len() }
}

/// Gain ratio of a nominal attribute over the whole dataset.
pub fn gain_ratio(dataset: &Dataset, attribute: usize) -> Result<f64, MlError> {
    if dataset.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    if attribute >= dataset.attributes.len() {
        return Err(MlError::SchemaMismatch(format!("no attribute at index {attribute}")));
    }
    let data = dataset.to_nominal()?;
    let rows: Vec<usize> = (0..data.len()).collect();
    Ok(split_stats(&data, &rows, attribute).ratio)
}
