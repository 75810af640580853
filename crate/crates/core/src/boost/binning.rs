use super::Dataset;

/// Feature values replaced by their rank among the distinct values of each
/// column, so split search can run on histograms.
#[derive(Clone, Debug)]
pub(crate) struct Binned {
    n_features: usize,
    pub uniques: Vec<Vec<f64>>,
    pub offsets: Vec<usize>,
    bins: Vec<u32>,
}

fn rank(u: &[f64], v: f64) -> u32 {
    u.binary_search_by(|p| p.total_cmp(&v))
        .expect("value present in its column") as u32
}

impl Binned {
    pub fn build(data: &Dataset) -> Self {
        let n = data.n_features();
        let mut uniques: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                let mut col: Vec<f64> = data.rows().map(|r| r[k]).collect();
                col.sort_unstable_by(f64::total_cmp);
                col.dedup();
                col
            })
            .collect();
        uniques.shrink_to_fit();
        let mut bins = Vec::with_capacity(data.len() * n);
        for r in data.rows() {
            bins.extend(r.iter().enumerate().map(|(k, &v)| rank(&uniques[k], v)));
        }
        Binned::assemble(n, uniques, bins)
    }

    fn assemble(n_features: usize, uniques: Vec<Vec<f64>>, bins: Vec<u32>) -> Self {
        let mut offsets = Vec::with_capacity(n_features + 1);
        let mut acc = 0;
        for u in &uniques {
            offsets.push(acc);
            acc += u.len();
        }
        offsets.push(acc);
        Binned {
            n_features,
            uniques,
            offsets,
            bins,
        }
    }

    /// Bins for `base` followed by `extra`, where extra row `i` is a
    /// modified copy of base row `origin[i]`.
    pub fn extend(&self, base: &Dataset, extra: &Dataset, origin: &[usize]) -> Self {
        let n = self.n_features;
        let mut added: Vec<Vec<f64>> = vec![Vec::new(); n];
        for (i, &o) in origin.iter().enumerate() {
            let (r, b) = (extra.row(i), base.row(o));
            for k in 0..n {
                if r[k] != b[k] && self.uniques[k].binary_search_by(|p| p.total_cmp(&r[k])).is_err() {
                    added[k].push(r[k]);
                }
            }
        }
        let mut uniques = Vec::with_capacity(n);
        let mut remap: Vec<Vec<u32>> = Vec::with_capacity(n);
        for (k, mut add) in added.into_iter().enumerate() {
            let old = &self.uniques[k];
            if add.is_empty() {
                remap.push(Vec::new());
                uniques.push(old.clone());
                continue;
            }
            add.sort_unstable_by(f64::total_cmp);
            add.dedup();
            let mut merged = Vec::with_capacity(old.len() + add.len());
            let mut map = Vec::with_capacity(old.len());
            let mut j = 0;
            for &v in old {
                while j < add.len() && add[j] < v {
                    merged.push(add[j]);
                    j += 1;
                }
                map.push(merged.len() as u32);
                merged.push(v);
            }
            merged.extend_from_slice(&add[j..]);
            remap.push(map);
            uniques.push(merged);
        }
        let mut bins = Vec::with_capacity((base.len() + extra.len()) * n);
        for row in self.bins.chunks_exact(n.max(1)).take(base.len()) {
            bins.extend(row.iter().enumerate().map(|(k, &b)| {
                if remap[k].is_empty() {
                    b
                } else {
                    remap[k][b as usize]
                }
            }));
        }
        for (i, &o) in origin.iter().enumerate() {
            let (r, b) = (extra.row(i), base.row(o));
            for k in 0..n {
                let v = if r[k] == b[k] {
                    bins[o * n + k]
                } else {
                    rank(&uniques[k], r[k])
                };
                bins.push(v);
            }
        }
        Binned::assemble(n, uniques, bins)
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.bins[i * self.n_features..(i + 1) * self.n_features]
    }

    /// Threshold separating bin `lo` from bin `hi > lo` of feature `k`: the
    /// midpoint of their values, or the upper value if the midpoint rounds
    /// down onto the lower one.
    pub fn threshold(&self, k: usize, lo: u32, hi: u32) -> f64 {
        let (a, b) = (self.uniques[k][lo as usize], self.uniques[k][hi as usize]);
        let m = a + (b - a) / 2.0;
        if m > a {
            m
        } else {
            b
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extension_matches_rebuild() {
        let base = Dataset::from_rows(
            &[vec![0.0, 1.0], vec![0.5, 1.0], vec![0.25, 3.0]],
            &[1, -1, 1],
        )
        .unwrap();
        let extra = Dataset::from_rows(&[vec![0.1, 1.0], vec![0.5, 7.0]], &[-1, 1]).unwrap();
        let b = Binned::build(&base);
        let e = b.extend(&base, &extra, &[1, 2]);
        let mut all = base.clone();
        for i in 0..extra.len() {
            all.push(extra.row(i), extra.label(i)).unwrap();
        }
        let r = Binned::build(&all);
        assert_eq!(e.uniques, r.uniques);
        assert_eq!(e.bins, r.bins);
        assert_eq!(e.offsets, r.offsets);
    }

    #[test]
    fn thresholds_separate() {
        let base = Dataset::from_rows(&[vec![1.0], vec![1.0 + f64::EPSILON], vec![3.0]], &[1, 1, 1])
            .unwrap();
        let b = Binned::build(&base);
        assert_eq!(b.threshold(0, 0, 2), 2.0);
        let t = b.threshold(0, 0, 1);
        assert!(1.0 < t && t <= 1.0 + f64::EPSILON);
    }
}
