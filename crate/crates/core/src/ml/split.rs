use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Label, MlError};

/// Seeded, label-stratified train/test partition.
///
/// The training set has `round(fraction * n)` rows, apportioned across the
/// two classes by largest remainder so each class keeps its proportion to
/// within one row. Rows keep their original order inside each part.
pub fn split_train_test(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset), MlError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(MlError::InvalidParameter(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); 2];
    for (i, row) in dataset.rows.iter().enumerate() {
        by_class[row.label.index()].push(i);
    }
    for label in Label::ALL {
        let count = by_class[label.index()].len();
        if count < 2 {
            return Err(MlError::TooFewRows { label, count });
        }
    }

    let n = dataset.len();
    let target = (fraction * n as f64).round() as usize;
    let exact: Vec<f64> = by_class.iter().map(|c| fraction * c.len() as f64).collect();
    let mut take: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..2).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let mut short = target.saturating_sub(take.iter().sum());
    for &c in order.iter().cycle().take(2 * short.max(1)) {
        if short == 0 {
            break;
        }
        if take[c] < by_class[c].len() {
            take[c] += 1;
            short -= 1;
        }
    }
    for (c, t) in take.iter_mut().enumerate() {
        *t = (*t).clamp(1, by_class[c].len() - 1);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(target);
    let mut test = Vec::with_capacity(n - target);
    for (c, idx) in by_class.iter_mut().enumerate() {
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..take[c]]);
        test.extend_from_slice(&idx[take[c]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((dataset.subset(&train), dataset.subset(&test)))
}
