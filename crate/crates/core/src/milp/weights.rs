use crate::distance::pow_cost;
use crate::interval::cell;

/// Objective weights of one feature.
///
/// With predicate variables `p_1 <= .. <= p_K` for thresholds `t_1 < .. < t_K`
/// and the conventions `p_0 = 0`, `p_{K+1} = 1`, the cell `[t_i, t_{i+1})` is
/// selected by `p_1..p_i = 0`, `p_{i+1}..p_K = 1`, so its cost is the suffix
/// sum `w_{i+1} + .. + w_{K+1}`. The suffix sums are the cell costs, which
/// makes the system triangular.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveWeights {
    /// `w_0 ..= w_{K+1}`. `w_0` multiplies the constant-zero `p_0` and is
    /// always 0; `w_{K+1}` multiplies the constant-one `p_{K+1}`.
    pub w: Vec<f64>,
    /// Cost `|x_k - x'_k|^rho` of each of the `K + 1` cells, at the cell
    /// point nearest `x_k`.
    pub interval_costs: Vec<f64>,
}

impl ObjectiveWeights {
    /// Coefficient of `p_m` for `m in 1..=K`, i.e. of threshold `t_{m}`.
    pub fn coefficient(&self, m: usize) -> f64 {
        self.w[m]
    }

    pub fn constant(&self) -> f64 {
        *self.w.last().expect("w has K + 2 entries")
    }
}

/// Solves the triangular system by back-substitution.
///
/// The cell containing `x_k` costs 0. A cell above `x_k` costs the distance to
/// its left border. A cell below costs the distance to `hi - epsilon`, the
/// point used in place of the unattainable right border.
pub fn objective_weights(x_k: f64, thresholds: &[f64], rho: u32, epsilon: f64) -> ObjectiveWeights {
    let interval_costs: Vec<f64> = (0..=thresholds.len())
        .map(|i| pow_cost(x_k - cell(thresholds, i).nearest_point(x_k, epsilon), rho))
        .collect();
    ObjectiveWeights {
        w: weights_from_costs(&interval_costs),
        interval_costs,
    }
}

/// Weights `w_0..=w_{K+1}` whose suffix sums are the given `K + 1` cell costs.
pub(crate) fn weights_from_costs(costs: &[f64]) -> Vec<f64> {
    let k = costs.len() - 1;
    let mut w = vec![0.0; k + 2];
    w[k + 1] = costs[k];
    for m in (1..=k).rev() {
        w[m] = costs[m - 1] - costs[m];
    }
    w
}
