//! Matched-pair fold construction: match groups are shuffled by seed and
//! dealt round-robin, so pairs never split across train and test.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::StudyRecord;

/// The per-study metadata cross-validation needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyKey {
    pub id: String,
    pub label: u8,
    pub match_group: u32,
}

impl StudyKey {
    pub fn from_study(study: &StudyRecord) -> StudyKey {
        StudyKey {
            id: study.id.clone(),
            label: study.label,
            match_group: study.match_group,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub fold_id: usize,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

pub fn make_folds(studies: &[StudyKey], k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 {
        return Err(Error::FoldPlan("k must be positive".into()));
    }
    let mut groups: BTreeMap<u32, Vec<&StudyKey>> = BTreeMap::new();
    for s in studies {
        groups.entry(s.match_group).or_default().push(s);
    }
    for (g, members) in &groups {
        let cases = members.iter().filter(|s| s.label == 1).count();
        let controls = members.len() - cases;
        if cases != 1 || controls != 1 {
            return Err(Error::FoldPlan(format!(
                "match group {g} has {cases} case(s) and {controls} control(s), expected 1 + 1"
            )));
        }
    }
    let n_pairs = groups.len();
    if n_pairs == 0 || n_pairs % k != 0 {
        return Err(Error::FoldPlan(format!(
            "{n_pairs} matched pairs cannot be dealt evenly into {k} folds"
        )));
    }
    let mut group_ids: Vec<u32> = groups.keys().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    group_ids.shuffle(&mut rng);
    let mut folds: Vec<Fold> = (0..k)
        .map(|fold_id| Fold {
            fold_id,
            train_ids: Vec::new(),
            test_ids: Vec::new(),
        })
        .collect();
    for (pos, &g) in group_ids.iter().enumerate() {
        let test_fold = pos % k;
        for (fold_id, fold) in folds.iter_mut().enumerate() {
            let target = if fold_id == test_fold {
                &mut fold.test_ids
            } else {
                &mut fold.train_ids
            };
            for s in &groups[&g] {
                target.push(s.id.clone());
            }
        }
    }
    Ok(FoldPlan { folds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn cohort(n_pairs: usize) -> Vec<StudyKey> {
        (0..n_pairs)
            .flat_map(|g| {
                [
                    StudyKey {
                        id: format!("case-{g:03}"),
                        label: 1,
                        match_group: g as u32,
                    },
                    StudyKey {
                        id: format!("ctrl-{g:03}"),
                        label: 0,
                        match_group: g as u32,
                    },
                ]
            })
            .collect()
    }

    #[test]
    fn six_folds_of_four_pairs() {
        let plan = make_folds(&cohort(24), 6, 7).unwrap();
        assert_eq!(plan.folds.len(), 6);
        for fold in &plan.folds {
            assert_eq!(fold.test_ids.len(), 8);
            assert_eq!(fold.train_ids.len(), 40);
            let cases = fold.test_ids.iter().filter(|id| id.starts_with("case")).count();
            assert_eq!(cases, 4);
        }
    }

    #[test]
    fn same_seed_same_plan() {
        let studies = cohort(12);
        assert_eq!(
            make_folds(&studies, 6, 3).unwrap(),
            make_folds(&studies, 6, 3).unwrap()
        );
        assert_ne!(
            make_folds(&studies, 6, 3).unwrap(),
            make_folds(&studies, 6, 4).unwrap()
        );
    }

    #[test]
    fn test_folds_partition_cohort() {
        let studies = cohort(24);
        let plan = make_folds(&studies, 6, 11).unwrap();
        let mut seen = BTreeSet::new();
        for fold in &plan.folds {
            for id in &fold.test_ids {
                assert!(seen.insert(id.clone()), "{id} in two test folds");
            }
        }
        assert_eq!(seen.len(), studies.len());
    }

    #[test]
    fn pairs_never_split() {
        let plan = make_folds(&cohort(24), 6, 2).unwrap();
        for fold in &plan.folds {
            for id in &fold.test_ids {
                let partner = if id.starts_with("case") {
                    id.replace("case", "ctrl")
                } else {
                    id.replace("ctrl", "case")
                };
                assert!(fold.test_ids.contains(&partner));
                assert!(!fold.train_ids.contains(&partner));
            }
        }
    }

    #[test]
    fn uneven_pair_count_rejected() {
        assert!(make_folds(&cohort(23), 6, 0).is_err());
    }

    #[test]
    fn unmatched_cohort_rejected() {
        let mut studies = cohort(6);
        studies[1].label = 1; // both members of group 0 are cases now
        let e = make_folds(&studies, 6, 0).unwrap_err();
        assert!(e.to_string().contains("match group 0"));
    }
}
