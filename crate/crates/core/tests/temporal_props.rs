mod common;

use std::collections::{BTreeMap, HashSet};

use common::{anisotropic, samples};
use proptest::prelude::*;
use ssa_core::temporal::{build_tree, JoinKind, JointSpace, TreeConfig};

/// Per id: (origin step, label, is_seed) of the latest leaf holding it.
type Latest = BTreeMap<String, (u32, Option<String>, bool)>;

/// `n` leaves of two offset classes. Neighbouring steps share `overlap` ids.
/// Earlier steps are fully labeled; the last one has two seeds per class.
fn leaves(n: usize, per_step: usize, overlap: usize, seed: u64) -> (Vec<JointSpace>, Latest) {
    let mut latest = Latest::new();
    let steps = (0..n)
        .map(|t| {
            let mut x = anisotropic(per_step, 4, seed.wrapping_add(t as u64));
            let mut labels = Vec::with_capacity(per_step);
            let mut is_seed = Vec::with_capacity(per_step);
            let mut ids = Vec::with_capacity(per_step);
            for i in 0..per_step {
                let class = i % 2;
                x[(i, 0)] += 8.0 * class as f64;
                let seed_row = t + 1 < n || i < 4;
                labels.push(seed_row.then(|| format!("k{class}")));
                is_seed.push(seed_row);
                ids.push(format!("p{}", t * (per_step - overlap) + i));
            }
            for i in 0..per_step {
                latest.insert(ids[i].clone(), (t as u32, labels[i].clone(), is_seed[i]));
            }
            JointSpace::leaf(t as u32, samples(x), labels, ids, is_seed).unwrap()
        })
        .collect();
    (steps, latest)
}

fn kind(k: u8) -> JoinKind {
    match k {
        0 => JoinKind::Unsupervised,
        1 => JoinKind::SemiSupervised { use_clusters: false },
        _ => JoinKind::SemiSupervised { use_clusters: true },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tree_shape_and_coverage(n in 2usize..7, per_step in 12usize..24, overlap in 0usize..4, d in 1usize..4, k in 0u8..3, seed in any::<u64>()) {
        let (steps, _) = leaves(n, per_step, overlap, seed);
        let config = TreeConfig { rng_seed: seed, clusters: 2, ..TreeConfig::new(d, kind(k)) };
        let tree = build_tree(steps, &config).unwrap();
        prop_assert_eq!(tree.levels.len(), n);
        for (level, spaces) in tree.levels.iter().enumerate() {
            prop_assert_eq!(spaces.len(), n - level);
            for (i, space) in spaces.iter().enumerate() {
                let window: Vec<u32> = (i as u32..=(i + level) as u32).collect();
                prop_assert_eq!(&space.covered_steps, &window);
                prop_assert_eq!(space.level, level);
                if level > 0 {
                    prop_assert_eq!(space.dim(), d);
                }
            }
        }
        prop_assert_eq!(&tree.root().covered_steps, &(0..n as u32).collect::<Vec<_>>());
    }

    #[test]
    fn root_keeps_each_id_once_with_its_latest_metadata(n in 2usize..7, per_step in 12usize..24, overlap in 0usize..4, k in 0u8..3, seed in any::<u64>()) {
        let (steps, latest) = leaves(n, per_step, overlap, seed);
        let config = TreeConfig { rng_seed: seed, clusters: 2, ..TreeConfig::new(2, kind(k)) };
        let root = build_tree(steps, &config).unwrap().into_root();
        let unique: HashSet<&String> = root.sample_ids.iter().collect();
        prop_assert_eq!(unique.len(), root.len());
        prop_assert_eq!(root.len(), latest.len());
        for (i, id) in root.sample_ids.iter().enumerate() {
            let (step, label, is_seed) = &latest[id];
            prop_assert_eq!(root.origin_steps[i], *step);
            prop_assert_eq!(root.is_seed[i], *is_seed);
            if *is_seed {
                prop_assert_eq!(&root.labels[i], label);
            }
        }
        prop_assert_eq!(root.labels.len(), root.len());
        prop_assert_eq!(root.is_seed.len(), root.len());
        prop_assert_eq!(root.origin_steps.len(), root.len());
        if let Some(c) = &root.cluster_ids {
            prop_assert_eq!(c.len(), root.len());
        }
    }

    #[test]
    fn tree_is_deterministic(n in 2usize..6, k in 0u8..3, seed in any::<u64>()) {
        let config = TreeConfig { rng_seed: seed, clusters: 2, ..TreeConfig::new(2, kind(k)) };
        let a = build_tree(leaves(n, 16, 2, seed).0, &config).unwrap();
        let b = build_tree(leaves(n, 16, 2, seed).0, &config).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn single_step_is_rejected() {
    let (steps, _) = leaves(1, 12, 0, 0);
    assert!(build_tree(steps, &TreeConfig::new(2, JoinKind::Unsupervised)).is_err());
}
