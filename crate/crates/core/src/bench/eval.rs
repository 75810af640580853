use crate::boost::Dataset;
use crate::ensemble::label_of;
use crate::error::{Error, Result};
use crate::TreeEnsemble;

/// Indices of the first `size` test rows that every model classifies
/// correctly.
pub fn eval_indices(models: &[&TreeEnsemble], test: &Dataset, size: usize) -> Result<Vec<usize>> {
    for m in models {
        if m.n_features != test.n_features() {
            return Err(Error::DimensionMismatch {
                expected: m.n_features,
                got: test.n_features(),
            });
        }
    }
    let mut out = Vec::with_capacity(size);
    for i in 0..test.len() {
        if out.len() == size {
            break;
        }
        let x = test.row(i);
        if models.iter().all(|m| label_of(m.margin(x)) == test.label(i)) {
            out.push(i);
        }
    }
    if out.len() < size {
        return Err(Error::InsufficientInstances {
            found: out.len(),
            wanted: size,
        });
    }
    Ok(out)
}

pub fn build_eval_set(models: &[&TreeEnsemble], test: &Dataset, size: usize) -> Result<Dataset> {
    Ok(test.select(&eval_indices(models, test, size)?))
}
