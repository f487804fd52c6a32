//! Small synthetic knowledge graphs with a three-level concept tree.
//!
//! One root, three mid concepts and nine leaves (three per mid). Every
//! instance belongs to one leaf and, through the tree, to its mid concept and
//! the root. Every relation links instances of the same leaf, so relational
//! structure clusters instances by leaf without telling anything about mids.
//!
//! Training states every `(i, leaf)` and `(i, root)`, but `(i, mid)` only
//! for a fraction of instances. The graph is deliberately incomplete in the
//! way the transitivity extension repairs: for a held-out instance,
//! `(i, leaf)` sits in valid or test and `(i, mid)` is missing everywhere.
//! For a held-out leaf, `(leaf, mid)` sits in valid or test and
//! `(leaf, root)` is missing.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use serde::Serialize;

use crate::dataset::{build_m_extension, MExtensionReport};
use crate::error::Result;
use crate::eval::{classification_negatives, evaluate_classification, fit_thresholds, ClassificationMetrics, Confusion};
use crate::geometry::ModelKind;
use crate::kg::{InstanceOfTriple, KnowledgeGraph, RelationalTriple, SubClassOfTriple, TripleSet, Vocab};
use crate::rng::rng_for;
use crate::sampling::{PoolMode, SamplingStrategy};
use crate::training::{train, LossBreakdown, TrainConfig};

pub const ROOT: u32 = 0;
pub const MIDS: usize = 3;
pub const LEAVES: usize = 9;
pub const CONCEPTS: usize = 1 + MIDS + LEAVES;

pub fn mid_of_leaf(leaf: u32) -> u32 {
    1 + (leaf - 1 - MIDS as u32) / 3
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub instances: usize,
    pub relations: usize,
    /// Held-out instances for valid and test.
    pub held_out_instances: [usize; 2],
    /// Held-out leaves for valid and test.
    pub held_out_leaves: [usize; 2],
    /// Chance that a training instance also states its mid concept directly.
    pub mid_fact_rate: f64,
    /// Fractions of relational triples for valid and test.
    pub relational_held_out: [f64; 2],
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            instances: 100,
            relations: 5,
            held_out_instances: [15, 15],
            mid_fact_rate: 0.5,
            held_out_leaves: [2, 3],
            relational_held_out: [0.1, 0.1],
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Toy {
    pub kg: KnowledgeGraph,
    /// Leaf of each instance.
    pub leaf: Vec<u32>,
}

impl Toy {
    /// Every true instanceOf fact of the underlying tree.
    pub fn closure_instance_of(&self) -> BTreeSet<InstanceOfTriple> {
        let mut out = BTreeSet::new();
        for (i, &l) in self.leaf.iter().enumerate() {
            for c in [l, mid_of_leaf(l), ROOT] {
                out.insert(InstanceOfTriple::new(i as u32, c));
            }
        }
        out
    }

    /// Every true subClassOf fact of the underlying tree.
    pub fn closure_sub_class_of(&self) -> BTreeSet<SubClassOfTriple> {
        let mut out = BTreeSet::new();
        for l in (1 + MIDS as u32)..CONCEPTS as u32 {
            out.insert(SubClassOfTriple::new(l, mid_of_leaf(l)));
            out.insert(SubClassOfTriple::new(l, ROOT));
        }
        for m in 1..=MIDS as u32 {
            out.insert(SubClassOfTriple::new(m, ROOT));
        }
        out
    }
}

pub fn generate(config: &ToyConfig) -> Toy {
    let mut rng = rng_for(config.seed, "toy");
    let n = config.instances;
    let first_leaf = 1 + MIDS as u32;
    let leaf: Vec<u32> = (0..n).map(|i| first_leaf + (i % LEAVES) as u32).collect();
    let mut members = vec![Vec::new(); CONCEPTS];
    for (i, &l) in leaf.iter().enumerate() {
        members[l as usize].push(i as u32);
    }

    let mut train = TripleSet::default();
    let mut valid = TripleSet::default();
    let mut test = TripleSet::default();

    let mut leaves: Vec<u32> = (first_leaf..CONCEPTS as u32).collect();
    leaves.shuffle(&mut rng);
    let [lv, lt] = config.held_out_leaves;
    let held_leaves: Vec<u32> = leaves[..lv + lt].to_vec();
    for (pos, &l) in leaves.iter().enumerate() {
        let up = SubClassOfTriple::new(l, mid_of_leaf(l));
        if pos < lv + lt {
            let target = if pos < lv { &mut valid } else { &mut test };
            target.sub_class_of.push(up);
        } else {
            train.sub_class_of.push(up);
            train.sub_class_of.push(SubClassOfTriple::new(l, ROOT));
        }
    }
    // Held-out instances come from leaves whose edge to the mid stays in train,
    // so each one derives its missing mid fact.
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(&mut rng);
    order.sort_by_key(|&i| held_leaves.contains(&leaf[i as usize]));
    let [hv, ht] = config.held_out_instances;
    for (pos, &i) in order.iter().enumerate() {
        let l = leaf[i as usize];
        let direct = InstanceOfTriple::new(i, l);
        let root = InstanceOfTriple::new(i, ROOT);
        if pos < hv + ht {
            let target = if pos < hv { &mut valid } else { &mut test };
            target.instance_of.push(direct);
            train.instance_of.push(root);
        } else {
            train.instance_of.push(direct);
            // Members of held-out leaves always keep their mid fact: it is the
            // only evidence placing the leaf under its mid.
            if held_leaves.contains(&l) || rng.gen_bool(config.mid_fact_rate) {
                train.instance_of.push(InstanceOfTriple::new(i, mid_of_leaf(l)));
            }
            train.instance_of.push(root);
        }
    }

    for m in 1..=MIDS as u32 {
        train.sub_class_of.push(SubClassOfTriple::new(m, ROOT));
    }

    let mut relational = Vec::new();
    for r in 0..config.relations as u32 {
        for i in 0..n as u32 {
            let pool: Vec<u32> = members[leaf[i as usize] as usize].iter().copied().filter(|&t| t != i).collect();
            let count = rng.gen_range(2..=3).min(pool.len());
            for &t in pool.choose_multiple(&mut rng, count) {
                relational.push(RelationalTriple::new(i, r, t));
            }
        }
    }
    relational.shuffle(&mut rng);
    let nv = (relational.len() as f64 * config.relational_held_out[0]).round() as usize;
    let nt = (relational.len() as f64 * config.relational_held_out[1]).round() as usize;
    for (pos, t) in relational.into_iter().enumerate() {
        if pos < nv {
            valid.relational.push(t);
        } else if pos < nv + nt {
            test.relational.push(t);
        } else {
            train.relational.push(t);
        }
    }
    for set in [&mut train, &mut valid, &mut test] {
        set.sort_canonical();
    }

    let mut concept_names = vec!["root".to_owned()];
    concept_names.extend((0..MIDS).map(|m| format!("mid{m}")));
    concept_names.extend((0..LEAVES).map(|l| format!("leaf{l}")));
    let kg = KnowledgeGraph::new(
        Vocab::from_names((0..n).map(|i| format!("e{i:03}"))),
        Vocab::from_names(concept_names),
        Vocab::from_names((0..config.relations).map(|r| format!("rel{r}"))),
        train,
        valid,
        test,
    );
    Toy { kg, leaf }
}

/// Training setup for the transitivity experiment on the toy tree.
pub fn experiment_config(model: ModelKind, seed: u64) -> TrainConfig {
    TrainConfig {
        dim: 20,
        learning_rate: 0.03,
        margin_relational: 1.0,
        margin_instance_of: 0.1,
        margin_sub_class_of: 0.3,
        sampling: SamplingStrategy::Bern,
        pool: PoolMode::Uniform,
        epochs: 2000,
        batch_size: 32,
        seed,
        model,
        threads: 1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutcome {
    pub model: ModelKind,
    pub seed: u64,
    pub extension: MExtensionReport,
    pub instance_of: ClassificationMetrics,
    pub sub_class_of: ClassificationMetrics,
    /// Accuracy over instanceOf and subClassOf test triples together.
    pub pooled_accuracy: f64,
    pub final_loss: Option<LossBreakdown>,
}

/// Trains on the toy graph, extends valid/test by one transitivity hop,
/// regenerates balanced negatives, fits thresholds on the extended valid
/// split and classifies the extended test split.
pub fn run_experiment(toy: &Toy, config: &TrainConfig) -> Result<ExperimentOutcome> {
    let (ext, extension) = build_m_extension(&toy.kg, false);
    let valid_neg = classification_negatives(&ext, ext.valid(), config.seed, "valid", PoolMode::Uniform)?;
    let test_neg = classification_negatives(&ext, ext.test(), config.seed, "test", PoolMode::Uniform)?;
    let state = train(&toy.kg, config)?;
    let table = fit_thresholds(&state.space, &ext, ext.valid(), &valid_neg);
    let report = evaluate_classification(&state.space, &table, ext.test(), &test_neg);
    let missing = || crate::Error::Eval("toy test split lacks isA triples".into());
    let instance_of = report.instance_of.ok_or_else(missing)?;
    let sub_class_of = report.sub_class_of.ok_or_else(missing)?;
    let correct = |c: &Confusion| c.tp + c.tn;
    let (a, b) = (&instance_of.confusion, &sub_class_of.confusion);
    Ok(ExperimentOutcome {
        model: config.model,
        seed: config.seed,
        extension,
        instance_of,
        sub_class_of,
        pooled_accuracy: 100.0 * (correct(a) + correct(b)) as f64 / (a.total() + b.total()) as f64,
        final_loss: state.losses.last().copied(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::build_m_extension;
    use crate::kg::Triple;

    #[test]
    fn default_toy_shape() {
        let toy = generate(&ToyConfig::default());
        let kg = &toy.kg;
        assert_eq!(kg.num_concepts(), 13);
        assert_eq!(kg.num_instances(), 100);
        assert_eq!(kg.num_relations(), 5);
        let total = kg.train().len() + kg.valid().len() + kg.test().len();
        assert!((1300..1700).contains(&total), "{total}");
        assert_eq!(mid_of_leaf(4), 1);
        assert_eq!(mid_of_leaf(12), 3);
        // every stored fact is true
        let (ci, cs) = (toy.closure_instance_of(), toy.closure_sub_class_of());
        for set in [kg.train(), kg.valid(), kg.test()] {
            assert!(set.instance_of.iter().all(|t| ci.contains(t)));
            assert!(set.sub_class_of.iter().all(|t| cs.contains(t)));
        }
    }

    #[test]
    fn extension_adds_the_missing_mid_and_root_facts() {
        let toy = generate(&ToyConfig::default());
        let (ext, report) = build_m_extension(&toy.kg, false);
        assert_eq!(report.test_instance_of, 15);
        assert_eq!(report.test_sub_class_of, 3);
        assert_eq!(report.valid_instance_of, 15);
        assert_eq!(report.valid_sub_class_of, 2);
        let (ci, cs) = (toy.closure_instance_of(), toy.closure_sub_class_of());
        for t in ext.valid().iter().chain(ext.test().iter()) {
            match t {
                Triple::InstanceOf(t) => assert!(ci.contains(&t)),
                Triple::SubClassOf(t) => assert!(cs.contains(&t)),
                Triple::Relational(_) => {}
            }
        }
        // every held-out instance gains exactly its mid
        for t in &toy.kg.test().instance_of {
            let mid = InstanceOfTriple::new(t.instance.0, mid_of_leaf(t.concept.0));
            assert!(ext.test().instance_of.contains(&mid));
        }
        // the subClassOf closure is complete after extension
        let known: BTreeSet<SubClassOfTriple> = [ext.train(), ext.valid(), ext.test()]
            .iter()
            .flat_map(|s| s.sub_class_of.iter().copied())
            .collect();
        assert_eq!(known, cs);
    }

    #[test]
    fn deterministic() {
        let a = generate(&ToyConfig::default());
        let b = generate(&ToyConfig::default());
        assert_eq!(a.kg.train(), b.kg.train());
        assert_eq!(a.kg.test(), b.kg.test());
    }
}

