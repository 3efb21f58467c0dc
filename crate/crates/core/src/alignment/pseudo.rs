use std::collections::HashMap;

use nalgebra::DMatrix;

use super::{DomainData, SeedSet};
use crate::error::{Result, SsaError};
use crate::Label;

/// Labels every target row with the label of its nearest seed (Euclidean, in
/// the ambient space). Seed rows keep their own labels; distance ties go to
/// the seed listed first.
pub fn pseudo_label(target: &DomainData, seeds: &SeedSet) -> Result<Vec<Label>> {
    pseudo_label_rounds(target, seeds, 1)
}

/// Like [`pseudo_label`], followed by `rounds - 1` self-training passes in
/// which every non-seed row moves to the nearest class mean of the current
/// labeling. `rounds = 1` is the plain nearest-seed pass.
pub fn pseudo_label_rounds(target: &DomainData, seeds: &SeedSet, rounds: usize) -> Result<Vec<Label>> {
    if seeds.is_empty() {
        return Err(SsaError::EmptyInput("seed set".into()));
    }
    let seed_rows = seeds.resolve(target)?;
    let x = target.x.as_matrix();
    let is_seed: HashMap<usize, usize> = seed_rows.iter().enumerate().map(|(e, &r)| (r, e)).collect();

    let mut labels: Vec<Label> = (0..x.nrows())
        .map(|row| {
            if let Some(&entry) = is_seed.get(&row) {
                return seeds.entries[entry].1.clone();
            }
            let mut best = 0;
            let mut best_dist = f64::INFINITY;
            for (entry, &seed_row) in seed_rows.iter().enumerate() {
                let dist = sq_dist(x, row, x, seed_row);
                if dist < best_dist {
                    best = entry;
                    best_dist = dist;
                }
            }
            seeds.entries[best].1.clone()
        })
        .collect();

    for _ in 1..rounds.max(1) {
        let (names, means) = class_means(x, &labels);
        let mut changed = false;
        for (row, label) in labels.iter_mut().enumerate() {
            if is_seed.contains_key(&row) {
                continue;
            }
            let mut best = 0;
            let mut best_dist = f64::INFINITY;
            for (c, mean) in means.row_iter().enumerate() {
                let dist: f64 = x.row(row).iter().zip(mean.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                if dist < best_dist {
                    best = c;
                    best_dist = dist;
                }
            }
            if *label != names[best] {
                *label = names[best].clone();
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(labels)
}

fn class_means(x: &DMatrix<f64>, labels: &[Label]) -> (Vec<Label>, DMatrix<f64>) {
    let mut names: Vec<Label> = labels.to_vec();
    names.sort();
    names.dedup();
    let mut means = DMatrix::zeros(names.len(), x.ncols());
    let mut counts = vec![0usize; names.len()];
    for (row, label) in labels.iter().enumerate() {
        let c = names.binary_search(label).expect("label collected above");
        let mut target = means.row_mut(c);
        target += x.row(row);
        counts[c] += 1;
    }
    for (c, n) in counts.into_iter().enumerate() {
        let mut row = means.row_mut(c);
        row /= n as f64;
    }
    (names, means)
}

pub(crate) fn sq_dist(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    a.row(i)
        .iter()
        .zip(b.row(j).iter())
        .map(|(p, q)| (p - q) * (p - q))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SampleMatrix;

    fn domain(points: &[[f64; 2]]) -> DomainData {
        let rows: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
        let ids = (0..points.len()).map(|i| format!("t{i}")).collect();
        DomainData::new(SampleMatrix::from_rows(&rows).unwrap(), ids).unwrap()
    }

    #[test]
    fn nearest_seed_and_tie_break() {
        let t = domain(&[[0.0, 0.0], [10.0, 10.0], [1.0, 0.0], [9.0, 10.0], [5.0, 5.0]]);
        let seeds = SeedSet::new(vec![("t0".into(), "A".into()), ("t1".into(), "B".into())]).unwrap();
        let labels = pseudo_label(&t, &seeds).unwrap();
        assert_eq!(labels, vec!["A", "B", "A", "B", "A"]);

        // Reversing the seed entries flips the tie.
        let seeds = SeedSet::new(vec![("t1".into(), "B".into()), ("t0".into(), "A".into())]).unwrap();
        assert_eq!(pseudo_label(&t, &seeds).unwrap()[4], "B");
    }

    #[test]
    fn seed_rows_keep_labels_even_when_closer_to_other_seed() {
        let t = domain(&[[0.0, 0.0], [0.1, 0.0], [5.0, 0.0]]);
        // t1 is a "B" seed sitting right next to the "A" seed.
        let seeds = SeedSet::new(vec![("t0".into(), "A".into()), ("t1".into(), "B".into())]).unwrap();
        let labels = pseudo_label(&t, &seeds).unwrap();
        assert_eq!(labels[0], "A");
        assert_eq!(labels[1], "B");
        assert_eq!(labels[2], "B");
    }

    #[test]
    fn unknown_seed_id_and_empty_seeds() {
        let t = domain(&[[0.0, 0.0], [1.0, 1.0]]);
        let seeds = SeedSet::new(vec![("nope".into(), "A".into())]).unwrap();
        assert!(matches!(pseudo_label(&t, &seeds), Err(SsaError::UnknownSeedId(id)) if id == "nope"));
        let empty = SeedSet::new(vec![]).unwrap();
        assert!(pseudo_label(&t, &empty).is_err());
    }

    #[test]
    fn extra_rounds_refine_toward_class_means() {
        // Row 2 is nearer the B seed but nearer the A class mean once the
        // far-away B rows pull the B mean out.
        let t = domain(&[[0.0, 0.0], [6.0, 0.0], [3.4, 0.0], [-3.0, 0.0], [-3.0, 0.5], [20.0, 0.0], [22.0, 0.0]]);
        let seeds = SeedSet::new(vec![("t0".into(), "A".into()), ("t1".into(), "B".into())]).unwrap();
        let single = pseudo_label(&t, &seeds).unwrap();
        assert_eq!(single[2], "B");
        let refined = pseudo_label_rounds(&t, &seeds, 3).unwrap();
        assert_eq!(refined, vec!["A", "B", "A", "A", "A", "B", "B"]);
    }
}
