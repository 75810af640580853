use std::time::Instant;

use super::{EvasionOutcome, SolveStatus};
use crate::distance::DistanceSpec;
use crate::ensemble::TreeEnsemble;
use crate::error::{Error, Result};
use crate::interval::cell;
use crate::milp::Target;

pub const DEFAULT_CELL_CAP: u128 = 1_000_000;

/// Optimal evasion by enumerating every combination of per-feature cells.
///
/// Each cell is represented by its point nearest to `x`, which is where the
/// minimum distance inside the cell is attained. Ties keep the first
/// combination in lexicographic cell order. Fails with
/// [`Error::TooManyCells`] when the product of cell counts exceeds `cap`.
pub fn brute_force_oracle(
    model: &TreeEnsemble,
    x: &[f64],
    d: &DistanceSpec,
    cap: u128,
) -> Result<EvasionOutcome> {
    let start = Instant::now();
    model.check_dim(x)?;
    d.validate(x.len())?;
    let target = Target::for_margin(model.margin(x))?;
    let thresholds = model.collect_thresholds();
    let cells: u128 = thresholds
        .iter()
        .try_fold(1u128, |acc, t| acc.checked_mul(t.len() as u128 + 1))
        .unwrap_or(u128::MAX);
    if cells > cap {
        return Err(Error::TooManyCells { cells, cap });
    }

    // Candidate values per feature, one per cell.
    let reps: Vec<Vec<f64>> = thresholds
        .iter()
        .zip(x)
        .map(|(ts, &xk)| {
            (0..=ts.len())
                .map(|i| cell(ts, i).nearest_point(xk, d.epsilon))
                .collect()
        })
        .collect();
    let n = x.len();
    let mut idx = vec![0usize; n];
    let mut point: Vec<f64> = reps.iter().map(|r| r[0]).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut visited = 0u64;
    loop {
        visited += 1;
        if target.is_met(model.margin(&point)) {
            let obj = d.objective(x, &point);
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, point.clone()));
            }
        }
        // Odometer with the last feature turning fastest.
        let mut k = n;
        loop {
            if k == 0 {
                let wall = start.elapsed();
                return Ok(match best {
                    Some((obj, xp)) => EvasionOutcome {
                        boundary: target == Target::NonNegative && model.margin(&xp) == 0.0,
                        x_prime: Some(xp),
                        distance: d.to_distance(obj),
                        status: SolveStatus::Optimal,
                        nodes_expanded: visited,
                        wall_time: wall,
                    },
                    None => EvasionOutcome::not_found(SolveStatus::Infeasible, visited, wall),
                });
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < reps[k].len() {
                point[k] = reps[k][idx[k]];
                break;
            }
            idx[k] = 0;
            point[k] = reps[k][0];
        }
    }
}
