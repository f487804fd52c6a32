//! Negative triples by corruption.
//!
//! A positive triple is corrupted by replacing one side. The replacement is
//! preferably a "sibling" of the replaced entity: for an instance, another
//! instance sharing one of its concepts; for a concept, another concept
//! sharing one of its super-concepts. When the entity has no siblings, or the
//! sibling draws keep colliding with known triples, draws fall back to the
//! whole entity space. Draws are rejected while the corrupted triple is a
//! known positive.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{
    ConceptId, InstanceId, InstanceOfTriple, KnowledgeGraph, RelationalTriple, SubClassOfTriple,
    Triple, TripleKind,
};

/// Total draws before giving up on one positive.
pub const MAX_ATTEMPTS: usize = 100;
/// Draws that may use the sibling pool before switching to the full entity space.
pub const TYPED_ATTEMPTS: usize = MAX_ATTEMPTS / 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    /// Head and tail are replaced with equal probability.
    #[default]
    Unif,
    /// Head replaced with probability `tph / (tph + hpt)` per relation.
    Bern,
}

impl std::str::FromStr for SamplingStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unif" => Ok(Self::Unif),
            "bern" => Ok(Self::Bern),
            other => Err(format!("unknown sampling strategy {other:?} (expected unif or bern)")),
        }
    }
}

/// Where replacement candidates come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    /// Sibling pool first, full space as fallback.
    #[default]
    Typed,
    /// Always the full entity space.
    Uniform,
}

impl std::str::FromStr for PoolMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "typed" => Ok(Self::Typed),
            "uniform" => Ok(Self::Uniform),
            other => Err(format!("unknown pool mode {other:?} (expected typed or uniform)")),
        }
    }
}

/// Which positives a corruption must avoid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reject {
    /// Training triples only (used while training).
    Train,
    /// Any triple in train, valid or test (used for evaluation negatives).
    Known,
}

/// Which end of a triple was replaced. For isA triples the head is the
/// instance (or sub-concept) and the tail the concept (or super-concept).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Head,
    Tail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Corruption<T> {
    pub triple: T,
    pub side: Side,
    /// True when the replacement came from the sibling pool.
    pub from_pool: bool,
}

/// Probability of replacing the head, per relation and for the two isA relations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernTable {
    pub relational: Vec<f64>,
    pub instance_of: f64,
    pub sub_class_of: f64,
}

impl BernTable {
    pub fn uniform(num_relations: usize) -> Self {
        Self {
            relational: vec![0.5; num_relations],
            instance_of: 0.5,
            sub_class_of: 0.5,
        }
    }
}

/// `tph / (tph + hpt)` over a list of (head, tail) pairs; 0.5 when empty.
fn head_probability<H, T>(pairs: impl IntoIterator<Item = (H, T)>) -> f64
where
    H: std::hash::Hash + Eq,
    T: std::hash::Hash + Eq,
{
    let mut per_head: HashMap<H, usize> = HashMap::new();
    let mut per_tail: HashMap<T, usize> = HashMap::new();
    let mut n = 0usize;
    for (h, t) in pairs {
        *per_head.entry(h).or_default() += 1;
        *per_tail.entry(t).or_default() += 1;
        n += 1;
    }
    if n == 0 {
        return 0.5;
    }
    let tph = n as f64 / per_head.len() as f64;
    let hpt = n as f64 / per_tail.len() as f64;
    tph / (tph + hpt)
}

/// Builds the per-relation head-replacement table from the training split.
pub fn build_bern_table(kg: &KnowledgeGraph) -> BernTable {
    let train = kg.train();
    let mut by_relation: Vec<Vec<(InstanceId, InstanceId)>> = vec![Vec::new(); kg.num_relations()];
    for t in &train.relational {
        by_relation[t.relation.index()].push((t.head, t.tail));
    }
    BernTable {
        relational: by_relation.into_iter().map(head_probability).collect(),
        instance_of: head_probability(train.instance_of.iter().map(|t| (t.instance, t.concept))),
        sub_class_of: head_probability(train.sub_class_of.iter().map(|t| (t.sub, t.sup))),
    }
}

/// Generates corruptions for one graph. Cheap to clone; holds no RNG.
#[derive(Debug, Clone)]
pub struct NegativeSampler<'a> {
    kg: &'a KnowledgeGraph,
    table: BernTable,
    pool: PoolMode,
    reject: Reject,
}

impl<'a> NegativeSampler<'a> {
    pub fn new(kg: &'a KnowledgeGraph, strategy: SamplingStrategy, pool: PoolMode, reject: Reject) -> Self {
        let table = match strategy {
            SamplingStrategy::Unif => BernTable::uniform(kg.num_relations()),
            SamplingStrategy::Bern => build_bern_table(kg),
        };
        Self::with_table(kg, table, pool, reject)
    }

    pub fn with_table(kg: &'a KnowledgeGraph, table: BernTable, pool: PoolMode, reject: Reject) -> Self {
        assert_eq!(table.relational.len(), kg.num_relations(), "bern table size");
        Self {
            kg,
            table,
            pool,
            reject,
        }
    }

    pub fn table(&self) -> &BernTable {
        &self.table
    }

    fn rejected(&self, t: &Triple) -> bool {
        match self.reject {
            Reject::Train => self.kg.in_train(t),
            Reject::Known => self.kg.contains(t),
        }
    }

    fn pick_side<R: Rng + ?Sized>(p_head: f64, rng: &mut R) -> Side {
        if rng.gen_bool(p_head.clamp(0.0, 1.0)) {
            Side::Head
        } else {
            Side::Tail
        }
    }

    /// Another instance sharing at least one training concept with `e`, if any exists.
    pub fn instance_sibling<R: Rng + ?Sized>(&self, e: InstanceId, rng: &mut R) -> Option<InstanceId> {
        let kg = self.kg;
        let usable = kg
            .concepts_of(e)
            .iter()
            .filter(|&&c| kg.members(c).len() >= 2)
            .count();
        if usable == 0 {
            return None;
        }
        let pick = rng.gen_range(0..usable);
        let c = *kg
            .concepts_of(e)
            .iter()
            .filter(|&&c| kg.members(c).len() >= 2)
            .nth(pick)?;
        draw_excluding(kg.members(c), e, rng)
    }

    /// Another concept sharing at least one training super-concept with `c`, if any exists.
    pub fn concept_sibling<R: Rng + ?Sized>(&self, c: ConceptId, rng: &mut R) -> Option<ConceptId> {
        let kg = self.kg;
        let usable = kg
            .super_concepts(c)
            .iter()
            .filter(|&&s| kg.sub_concepts(s).len() >= 2)
            .count();
        if usable == 0 {
            return None;
        }
        let pick = rng.gen_range(0..usable);
        let s = *kg
            .super_concepts(c)
            .iter()
            .filter(|&&s| kg.sub_concepts(s).len() >= 2)
            .nth(pick)?;
        draw_excluding(kg.sub_concepts(s), c, rng)
    }

    fn replace_instance<R: Rng + ?Sized>(
        &self,
        e: InstanceId,
        attempt: usize,
        rng: &mut R,
    ) -> Option<(InstanceId, bool)> {
        if self.pool == PoolMode::Typed && attempt < TYPED_ATTEMPTS {
            if let Some(s) = self.instance_sibling(e, rng) {
                return Some((s, true));
            }
        }
        let n = self.kg.num_instances();
        let x = InstanceId(rng.gen_range(0..n as u32));
        (x != e).then_some((x, false))
    }

    fn replace_concept<R: Rng + ?Sized>(
        &self,
        c: ConceptId,
        attempt: usize,
        rng: &mut R,
    ) -> Option<(ConceptId, bool)> {
        if self.pool == PoolMode::Typed && attempt < TYPED_ATTEMPTS {
            if let Some(s) = self.concept_sibling(c, rng) {
                return Some((s, true));
            }
        }
        let n = self.kg.num_concepts();
        let x = ConceptId(rng.gen_range(0..n as u32));
        (x != c).then_some((x, false))
    }

    pub fn corrupt_relational<R: Rng + ?Sized>(
        &self,
        t: RelationalTriple,
        rng: &mut R,
    ) -> Result<Corruption<RelationalTriple>> {
        let p_head = self.table.relational[t.relation.index()];
        for attempt in 0..MAX_ATTEMPTS {
            let side = Self::pick_side(p_head, rng);
            let replaced = match side {
                Side::Head => t.head,
                Side::Tail => t.tail,
            };
            let Some((x, from_pool)) = self.replace_instance(replaced, attempt, rng) else {
                continue;
            };
            let mut neg = t;
            match side {
                Side::Head => neg.head = x,
                Side::Tail => neg.tail = x,
            }
            if !self.rejected(&Triple::Relational(neg)) {
                return Ok(Corruption {
                    triple: neg,
                    side,
                    from_pool,
                });
            }
        }
        Err(exhausted(Triple::Relational(t)))
    }

    pub fn corrupt_instance_of<R: Rng + ?Sized>(
        &self,
        t: InstanceOfTriple,
        rng: &mut R,
    ) -> Result<Corruption<InstanceOfTriple>> {
        for attempt in 0..MAX_ATTEMPTS {
            let side = Self::pick_side(self.table.instance_of, rng);
            let mut neg = t;
            let from_pool = match side {
                Side::Head => match self.replace_instance(t.instance, attempt, rng) {
                    Some((x, p)) => {
                        neg.instance = x;
                        p
                    }
                    None => continue,
                },
                Side::Tail => match self.replace_concept(t.concept, attempt, rng) {
                    Some((x, p)) => {
                        neg.concept = x;
                        p
                    }
                    None => continue,
                },
            };
            if !self.rejected(&Triple::InstanceOf(neg)) {
                return Ok(Corruption {
                    triple: neg,
                    side,
                    from_pool,
                });
            }
        }
        Err(exhausted(Triple::InstanceOf(t)))
    }

    pub fn corrupt_sub_class_of<R: Rng + ?Sized>(
        &self,
        t: SubClassOfTriple,
        rng: &mut R,
    ) -> Result<Corruption<SubClassOfTriple>> {
        for attempt in 0..MAX_ATTEMPTS {
            let side = Self::pick_side(self.table.sub_class_of, rng);
            let replaced = match side {
                Side::Head => t.sub,
                Side::Tail => t.sup,
            };
            let Some((x, from_pool)) = self.replace_concept(replaced, attempt, rng) else {
                continue;
            };
            let mut neg = t;
            match side {
                Side::Head => neg.sub = x,
                Side::Tail => neg.sup = x,
            }
            // A concept is trivially its own sub-concept; never use that as a negative.
            if neg.sub != neg.sup && !self.rejected(&Triple::SubClassOf(neg)) {
                return Ok(Corruption {
                    triple: neg,
                    side,
                    from_pool,
                });
            }
        }
        Err(exhausted(Triple::SubClassOf(t)))
    }

    /// Corrupts a triple of any kind.
    pub fn corrupt<R: Rng + ?Sized>(&self, t: &Triple, rng: &mut R) -> Result<(Triple, Side)> {
        Ok(match *t {
            Triple::Relational(t) => {
                let c = self.corrupt_relational(t, rng)?;
                (c.triple.into(), c.side)
            }
            Triple::InstanceOf(t) => {
                let c = self.corrupt_instance_of(t, rng)?;
                (c.triple.into(), c.side)
            }
            Triple::SubClassOf(t) => {
                let c = self.corrupt_sub_class_of(t, rng)?;
                (c.triple.into(), c.side)
            }
        })
    }

    pub fn head_probability(&self, kind: TripleKind, relation: Option<usize>) -> f64 {
        match kind {
            TripleKind::Relational => self.table.relational[relation.expect("relation id")],
            TripleKind::InstanceOf => self.table.instance_of,
            TripleKind::SubClassOf => self.table.sub_class_of,
        }
    }
}

/// Uniform element of the sorted slice `items` other than `exclude`.
fn draw_excluding<T: Copy + Ord, R: Rng + ?Sized>(items: &[T], exclude: T, rng: &mut R) -> Option<T> {
    match items.binary_search(&exclude) {
        Ok(pos) => {
            if items.len() < 2 {
                return None;
            }
            let k = rng.gen_range(0..items.len() - 1);
            Some(items[if k >= pos { k + 1 } else { k }])
        }
        Err(_) => {
            if items.is_empty() {
                return None;
            }
            Some(items[rng.gen_range(0..items.len())])
        }
    }
}

fn exhausted(t: Triple) -> Error {
    Error::SamplingExhausted {
        triple: t.to_string(),
        attempts: MAX_ATTEMPTS,
    }
}
