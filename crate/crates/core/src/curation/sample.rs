//! Hierarchical diversity sampling: domain, then dataset, then item, without
//! replacement, until the target size is reached.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::annotate::UNLABELED;
use super::report::{StageKind, StageRow};
use crate::prompt::McqQuestion;

pub const STAGE_NAME: &str = "Domain-dataset balanced sample";

/// Recorded in report headers so a run can be replayed.
pub const RNG_ALGORITHM: &str =
    "ChaCha8 (rand_chacha 0.9, seed_from_u64); uniform indices via rand 0.9 random_range";

/// `strata[domain][dataset]` lists item ids. An item may sit in several
/// domains; within one domain it belongs to exactly one dataset pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub target_n: usize,
    pub seed: u64,
    pub strata: BTreeMap<String, BTreeMap<String, Vec<String>>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("target {target} exceeds the {available} distinct items available")]
    TargetTooLarge { target: usize, available: usize },
    #[error("item {id:?} appears more than once in domain {domain:?}")]
    DuplicateInDomain { id: String, domain: String },
    #[error("item {id:?} is filed under datasets {first:?} and {second:?}")]
    ConflictingDataset {
        id: String,
        first: String,
        second: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleOutcome {
    /// Drawn ids in draw order.
    pub ids: Vec<String>,
    pub row: StageRow,
}

impl SamplingPlan {
    /// Strata from question domains (items without domains go to
    /// [`UNLABELED`]) and sources.
    pub fn from_questions(questions: &[McqQuestion], target_n: usize, seed: u64) -> Self {
        let mut strata: BTreeMap<String, BTreeMap<String, Vec<String>>> = BTreeMap::new();
        for q in questions {
            let mut domains: Vec<&str> = q.domains.iter().map(String::as_str).collect();
            domains.sort_unstable();
            domains.dedup();
            if domains.is_empty() {
                domains.push(UNLABELED);
            }
            for d in domains {
                strata
                    .entry(d.to_owned())
                    .or_default()
                    .entry(q.source.clone())
                    .or_default()
                    .push(q.id.clone());
            }
        }
        Self {
            target_n,
            seed,
            strata,
        }
    }

    pub fn validate(&self) -> Result<(), SampleError> {
        self.index().map(|_| ())
    }

    fn index(&self) -> Result<Index, SampleError> {
        let mut ids: Vec<String> = Vec::new();
        let mut lookup: HashMap<&str, usize> = HashMap::new();
        let mut dataset_of: Vec<String> = Vec::new();
        let mut domains = Vec::with_capacity(self.strata.len());
        for (dname, datasets) in &self.strata {
            let mut in_domain: HashSet<&str> = HashSet::new();
            let mut pools = Vec::with_capacity(datasets.len());
            for (sname, items) in datasets {
                let mut pool = Pool::default();
                for id in items {
                    if !in_domain.insert(id) {
                        return Err(SampleError::DuplicateInDomain {
                            id: id.clone(),
                            domain: dname.clone(),
                        });
                    }
                    let item = *lookup.entry(id).or_insert_with(|| {
                        ids.push(id.clone());
                        dataset_of.push(sname.clone());
                        ids.len() - 1
                    });
                    if &dataset_of[item] != sname {
                        return Err(SampleError::ConflictingDataset {
                            id: id.clone(),
                            first: dataset_of[item].clone(),
                            second: sname.clone(),
                        });
                    }
                    pool.push(item);
                }
                pools.push(pool);
            }
            domains.push(pools);
        }
        if self.target_n > ids.len() {
            return Err(SampleError::TargetTooLarge {
                target: self.target_n,
                available: ids.len(),
            });
        }
        let mut members = vec![Vec::new(); ids.len()];
        for (d, pools) in domains.iter().enumerate() {
            for (s, pool) in pools.iter().enumerate() {
                for &item in &pool.items {
                    members[item].push((d, s));
                }
            }
        }
        Ok(Index {
            ids,
            dataset_of,
            domains,
            members,
        })
    }
}

#[derive(Debug, Default, Clone)]
struct Pool {
    items: Vec<usize>,
    pos: HashMap<usize, usize>,
}

impl Pool {
    fn push(&mut self, item: usize) {
        self.pos.insert(item, self.items.len());
        self.items.push(item);
    }

    fn remove(&mut self, item: usize) {
        if let Some(p) = self.pos.remove(&item) {
            self.items.swap_remove(p);
            if let Some(&moved) = self.items.get(p) {
                self.pos.insert(moved, p);
            }
        }
    }
}

struct Index {
    ids: Vec<String>,
    dataset_of: Vec<String>,
    domains: Vec<Vec<Pool>>,
    members: Vec<Vec<(usize, usize)>>,
}

/// Draws `plan.target_n` distinct items. Each draw picks a domain uniformly
/// among domains with items left, then a dataset uniformly among that
/// domain's non-empty datasets, then an item uniformly. A drawn item leaves
/// every stratum it belongs to.
pub fn diversity_sample(plan: &SamplingPlan) -> Result<SampleOutcome, SampleError> {
    let mut idx = plan.index()?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut drawn = Vec::with_capacity(plan.target_n);
    while drawn.len() < plan.target_n {
        let live: Vec<usize> = (0..idx.domains.len())
            .filter(|&d| idx.domains[d].iter().any(|p| !p.items.is_empty()))
            .collect();
        let d = live[rng.random_range(0..live.len())];
        let sets: Vec<usize> = (0..idx.domains[d].len())
            .filter(|&s| !idx.domains[d][s].items.is_empty())
            .collect();
        let s = sets[rng.random_range(0..sets.len())];
        let pool = &idx.domains[d][s];
        let item = pool.items[rng.random_range(0..pool.items.len())];
        for &(md, ms) in &idx.members[item] {
            idx.domains[md][ms].remove(item);
        }
        drawn.push(item);
    }
    let row = StageRow::from_sources(
        STAGE_NAME,
        StageKind::Selection,
        drawn.iter().map(|&i| idx.dataset_of[i].as_str()),
    );
    Ok(SampleOutcome {
        ids: drawn.into_iter().map(|i| idx.ids[i].clone()).collect(),
        row,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(domains: usize, datasets: usize, per: usize, target: usize, seed: u64) -> SamplingPlan {
        let mut strata = BTreeMap::new();
        for d in 0..domains {
            let mut sets = BTreeMap::new();
            for s in 0..datasets {
                let ids = (0..per).map(|i| format!("d{d}s{s}i{i}")).collect();
                sets.insert(format!("set{s}"), ids);
            }
            strata.insert(format!("dom{d}"), sets);
        }
        SamplingPlan { target_n: target, seed, strata }
    }

    #[test]
    fn one_item_per_domain_takes_everything() {
        for seed in 0..20 {
            let out = diversity_sample(&plan(5, 1, 1, 5, seed)).unwrap();
            let got: HashSet<_> = out.ids.into_iter().collect();
            assert_eq!(got.len(), 5);
        }
    }

    #[test]
    fn too_large_target_rejected() {
        assert_eq!(
            diversity_sample(&plan(2, 2, 50, 1000, 1)),
            Err(SampleError::TargetTooLarge { target: 1000, available: 200 })
        );
    }

    #[test]
    fn deterministic_and_without_replacement() {
        let p = plan(3, 2, 30, 150, 99);
        let a = diversity_sample(&p).unwrap();
        let b = diversity_sample(&p).unwrap();
        assert_eq!(a, b);
        let uniq: HashSet<_> = a.ids.iter().collect();
        assert_eq!(uniq.len(), 150);
        assert_eq!(a.row.total, 150);
    }

    #[test]
    fn exhausted_domains_are_skipped() {
        // small domain runs out; the rest must come from the big one
        let mut p = plan(2, 1, 3, 0, 5);
        p.strata.get_mut("dom1").unwrap().get_mut("set0").unwrap().truncate(1);
        p.target_n = 4;
        let out = diversity_sample(&p).unwrap();
        assert!(out.ids.contains(&"d1s0i0".to_string()));
        assert_eq!(out.ids.len(), 4);
    }

    #[test]
    fn multi_domain_item_removed_everywhere() {
        let mut strata = BTreeMap::new();
        strata.insert(
            "A".to_string(),
            BTreeMap::from([("S".to_string(), vec!["x".to_string(), "y".to_string()])]),
        );
        strata.insert(
            "B".to_string(),
            BTreeMap::from([("S".to_string(), vec!["x".to_string()])]),
        );
        for seed in 0..50 {
            let p = SamplingPlan { target_n: 2, seed, strata: strata.clone() };
            let out = diversity_sample(&p).unwrap();
            let mut ids = out.ids.clone();
            ids.sort();
            assert_eq!(ids, ["x", "y"]);
        }
    }

    #[test]
    fn inconsistent_strata_rejected() {
        let strata = BTreeMap::from([
            (
                "A".to_string(),
                BTreeMap::from([
                    ("S".to_string(), vec!["x".to_string()]),
                    ("T".to_string(), vec!["x".to_string()]),
                ]),
            ),
        ]);
        let p = SamplingPlan { target_n: 1, seed: 0, strata };
        assert!(matches!(p.validate(), Err(SampleError::DuplicateInDomain { .. })));
    }

    #[test]
    fn plan_from_questions_uses_unlabeled() {
        let mut q1 = McqQuestion::new("1", "s", &["a", "b"], 'A', "MedQA");
        q1.domains = vec!["Drug Therapy".into(), "Diagnosis".into()];
        let q2 = McqQuestion::new("2", "s", &["a", "b"], 'A', "HeadQA");
        let p = SamplingPlan::from_questions(&[q1, q2], 2, 42);
        assert_eq!(p.strata.len(), 3);
        assert_eq!(p.strata[UNLABELED]["HeadQA"], ["2"]);
        assert_eq!(p.strata["Diagnosis"]["MedQA"], ["1"]);
    }
}
