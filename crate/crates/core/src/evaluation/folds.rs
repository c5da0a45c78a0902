//! Stratified k-fold assignment.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    /// Fold index of each sample.
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    /// `(train, test)` row indices for `fold`, each ascending.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.fold_of.len()).partition(|&i| self.fold_of[i] != fold)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Every class needs at least two members. A class smaller than `k` is
/// allowed (some folds then hold none of it) and logged.
///
/// Shuffles the members of each class (classes in ascending order, one
/// ChaCha8 generator for the whole call) and deals them round-robin into
/// `k` folds. The dealing position carries over from one class to the next,
/// so fold totals also differ by at most one.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::config("cv_folds", format!("need at least 2 folds, got {k}")));
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    if labels.len() < k {
        return Err(Error::config("cv_folds", format!("{k} folds for {} samples", labels.len())));
    }
    for (&class, members) in &by_class {
        // a lone member would be missing from its own fold's training split
        if members.len() < 2 {
            return Err(Error::ClassTooSmall {
                class,
                count: members.len(),
                folds: k,
            });
        }
        if members.len() < k {
            log::warn!("class {class} has {} members, fewer than {k} folds", members.len());
        }
    }
    let mut rng = stream_rng(seed, 0);
    let mut fold_of = vec![0; labels.len()];
    let mut next = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            fold_of[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldAssignment { k, fold_of })
}
