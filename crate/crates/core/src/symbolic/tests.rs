use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::ensemble::random::{random_ensemble, random_instance, RandomEnsembleConfig};
use crate::ensemble::tests::toy;
use crate::ensemble::TreeNode;

fn pred(feature: usize, threshold: f64) -> Predicate {
    Predicate::new(feature, threshold)
}

#[test]
fn feasibility_rules() {
    let x = [0.0, 3.0];
    let s = SymbolicInstance::new(&x);
    assert!(s.is_feasible(&pred(0, 2.0), false));

    let mut s = SymbolicInstance::new(&x);
    s.update(&pred(0, 2.0), false);
    assert_eq!(s.changed_dim(), Some(0));
    assert!(!s.is_feasible(&pred(1, 1.0), true));
    assert!(s.is_feasible(&pred(1, 1.0), false));
    assert!(!s.is_feasible(&pred(0, 1.0), true));
}

#[test]
fn updates_track_the_changed_feature() {
    let x = [0.0, 3.0];
    let mut s = SymbolicInstance::new(&x);
    s.update(&pred(0, 2.0), false);
    assert!(s.is_changed());
    assert_eq!(s.get_perturbation().unwrap(), (0, Interval::at_or_above(2.0)));

    let mut s = SymbolicInstance::new(&x);
    s.update(&pred(0, 2.0), true);
    assert!(!s.is_changed());
    assert!(matches!(s.get_perturbation(), Err(Error::NotChanged)));
    s.update(&pred(0, 1.0), false);
    assert_eq!(s.get_perturbation().unwrap(), (0, Interval::new(1.0, 2.0)));
    // Grid check of the intersection.
    for i in -10..40 {
        let v = i as f64 * 0.1;
        assert_eq!(s.interval(0).contains(v), (1.0..2.0).contains(&v));
    }
}

#[test]
fn toy_tuples() {
    let m = toy();
    let mut t = symbolic_predict(&m.trees[0], &[0.0, 3.0]);
    t.sort_by(|a, b| a.interval.lo.total_cmp(&b.interval.lo));
    assert_eq!(
        t,
        vec![
            PerturbationTuple {
                feature: 0,
                interval: Interval::new(1.0, 2.0),
                delta: 3.0
            },
            PerturbationTuple {
                feature: 0,
                interval: Interval::at_or_above(2.0),
                delta: 4.0
            },
        ]
    );
    let leaf = Tree::from_node(&TreeNode::leaf(1.0));
    assert!(symbolic_predict(&leaf, &[0.0]).is_empty());
}

#[test]
fn toy_best_change() {
    let c = best_single_change(&toy(), &[0.0, 3.0]).unwrap();
    assert_eq!(c.change, Some((0, Interval::at_or_above(2.0))));
    assert_eq!(c.delta, 4.0);
    assert_eq!(c.new_margin, 2.0);
    assert_eq!(c.apply(&[0.0, 3.0], 0.0, 1e-4), vec![2.0, 3.0]);
}

#[test]
fn overlapping_intervals_add_up() {
    let a = TreeNode::split(0, 0.5, TreeNode::leaf(0.0), TreeNode::leaf(1.0));
    let b = TreeNode::split(
        0,
        0.7,
        TreeNode::leaf(0.0),
        TreeNode::split(0, 0.9, TreeNode::leaf(1.0), TreeNode::leaf(-1.0)),
    );
    let c = TreeNode::split(1, 0.5, TreeNode::leaf(0.0), TreeNode::leaf(1.5));
    let m = TreeEnsemble::from_nodes(&[a, b, c], 2, -0.1).unwrap();
    let x = [0.0, 0.0];
    let best = best_single_change(&m, &x).unwrap();
    assert_eq!(best.change, Some((0, Interval::new(0.7, 0.9))));
    assert!((best.new_margin - 1.9).abs() < 1e-12);
    let brute = brute_force_single_change(&m, &x, 1.0).unwrap();
    assert!((brute.new_margin - best.new_margin).abs() < 1e-12);
}

#[test]
fn stay_put_when_nothing_helps() {
    let a = TreeNode::split(0, 0.5, TreeNode::leaf(1.0), TreeNode::leaf(-1.0));
    let m = TreeEnsemble::from_nodes(&[a], 1, 0.0).unwrap();
    let c = best_single_change(&m, &[0.2]).unwrap();
    assert_eq!(c.change, None);
    assert_eq!(c.delta, 0.0);
    assert_eq!(c.new_margin, 1.0);
    let dir = SearchDirection {
        sign: -1.0,
        allowed: None,
    };
    let (c, _) = best_single_change_with(&m, &[0.2], dir).unwrap();
    assert_eq!(c.change, Some((0, Interval::at_or_above(0.5))));
    assert_eq!(c.new_margin, -1.0);
}

#[test]
fn equal_neighbours_merge() {
    let a = TreeNode::split(0, 0.5, TreeNode::leaf(0.0), TreeNode::leaf(1.0));
    let b = TreeNode::split(
        0,
        0.8,
        TreeNode::leaf(0.0),
        TreeNode::split(0, 0.6, TreeNode::leaf(0.0), TreeNode::leaf(0.0)),
    );
    let m = TreeEnsemble::from_nodes(&[a, b], 1, 0.0).unwrap();
    let c = best_single_change(&m, &[0.1]).unwrap();
    assert_eq!(c.change, Some((0, Interval::at_or_above(0.5))));
}

fn random_pair(rng: &mut ChaCha8Rng) -> (TreeEnsemble, Vec<f64>) {
    let cfg = RandomEnsembleConfig {
        n_trees: rng.gen_range(1..=20),
        max_depth: rng.gen_range(1..=4),
        n_features: rng.gen_range(1..=10),
        ..Default::default()
    };
    let m = random_ensemble(rng, &cfg);
    let x = random_instance(rng, cfg.n_features);
    (m, x)
}

#[test]
fn matches_brute_force_both_directions() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..300 {
        let (m, x) = random_pair(&mut rng);
        for sign in [1.0, -1.0] {
            let dir = SearchDirection {
                sign,
                allowed: None,
            };
            let (fast, _) = best_single_change_with(&m, &x, dir).unwrap();
            let slow = brute_force_single_change(&m, &x, sign).unwrap();
            assert_eq!(fast.change.is_some(), slow.change.is_some(), "case {case}");
            assert!((fast.new_margin - slow.new_margin).abs() < 1e-9, "case {case}");
            if let Some((k, _)) = fast.change {
                let y = fast.apply(&x, x[k], 1e-6);
                assert!((m.margin(&y) - fast.new_margin).abs() < 1e-9, "case {case}");
            }
        }
    }
}

#[test]
fn feature_filter_is_honoured() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let (m, x) = random_pair(&mut rng);
        let only_even = |k: usize| k.is_multiple_of(2);
        let dir = SearchDirection {
            sign: 1.0,
            allowed: Some(&only_even),
        };
        let (c, _) = best_single_change_with(&m, &x, dir).unwrap();
        if let Some((k, _)) = c.change {
            assert_eq!(k % 2, 0);
        }
    }
}

#[test]
fn tuples_match_per_tree_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let (m, x) = random_pair(&mut rng);
        for tree in &m.trees {
            let own = tree.predict(&x);
            let tuples = symbolic_predict(tree, &x);
            let mut ts: Vec<Vec<f64>> = vec![Vec::new(); x.len()];
            for p in tree.predicates() {
                ts[p.feature].push(p.threshold);
            }
            for (k, t) in ts.iter_mut().enumerate() {
                t.sort_by(f64::total_cmp);
                t.dedup();
                for c in 0..=t.len() {
                    let iv = cell(t, c);
                    if iv.contains(x[k]) {
                        continue;
                    }
                    let mut y = x.clone();
                    y[k] = if iv.lo.is_finite() { iv.lo } else { iv.hi - 1.0 };
                    let delta = tree.predict(&y) - own;
                    let hits: Vec<_> = tuples
                        .iter()
                        .filter(|p| p.feature == k && p.interval.contains(y[k]))
                        .collect();
                    match hits.as_slice() {
                        [] => assert_eq!(delta, 0.0),
                        [p] => assert_eq!(p.delta, delta),
                        _ => panic!("overlapping tuples"),
                    }
                }
            }
            for p in &tuples {
                assert!(!p.interval.contains(x[p.feature]));
                assert!(!p.interval.is_empty());
            }
        }
    }
}

#[test]
fn at_most_one_copy_per_internal_node() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let (m, x) = random_pair(&mut rng);
        let (_, stats) = best_single_change_with(&m, &x, SearchDirection::default()).unwrap();
        assert!(stats.copies <= stats.internal_visited);
    }
}
