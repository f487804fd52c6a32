#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use transc_core::geometry::{EmbeddingSpace, ModelKind};
use transc_core::kg::{
    ConceptId, InstanceId, InstanceOfTriple, KnowledgeGraph, RelationalTriple, SubClassOfTriple, Triple, TripleSet,
};
use transc_core::training::Param;

pub fn unit_vector<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Uniform point in the ball of radius `r`.
pub fn point_in_ball<R: Rng>(rng: &mut R, dim: usize, r: f64) -> Vec<f64> {
    let u = unit_vector(rng, dim);
    let len = r * rng.gen::<f64>();
    u.into_iter().map(|x| x * len).collect()
}

/// `base + len * u`.
pub fn offset(base: &[f64], u: &[f64], len: f64) -> Vec<f64> {
    base.iter().zip(u).map(|(b, x)| b + len * x).collect()
}

pub fn set(space: &mut EmbeddingSpace, p: Param, v: &[f64]) {
    space.param_mut(p).copy_from_slice(v);
}

/// A space whose coordinates are multiples of 1/4 and radii multiples of 1/4,
/// so that exact score ties are common.
pub fn quantized_space<R: Rng>(rng: &mut R, model: ModelKind, dim: usize, ni: usize, nc: usize, nr: usize) -> EmbeddingSpace {
    let mut space = EmbeddingSpace::zeros(model, dim, ni, nc, nr);
    let q = |rng: &mut R| -> Vec<f64> { (0..dim).map(|_| rng.gen_range(-2i32..=2) as f64 / 4.0).collect() };
    for i in 0..ni as u32 {
        let v = q(rng);
        set(&mut space, Param::Instance(InstanceId(i)), &v);
    }
    for r in 0..nr {
        let v = q(rng);
        set(&mut space, Param::Relation(r), &v);
    }
    for c in 0..nc as u32 {
        let v = q(rng);
        set(&mut space, Param::Center(ConceptId(c)), &v);
        space.set_radius(ConceptId(c), rng.gen_range(1..=3) as f64 / 4.0);
    }
    space
}

/// A random KG with every distinct triple placed in exactly one split.
pub fn random_kg<R: Rng>(rng: &mut R, ni: usize, nc: usize, nr: usize) -> KnowledgeGraph {
    let mut all = BTreeSet::new();
    for _ in 0..3 * ni {
        let t = RelationalTriple::new(rng.gen_range(0..ni as u32), rng.gen_range(0..nr as u32), rng.gen_range(0..ni as u32));
        all.insert(Triple::from(t));
    }
    for _ in 0..2 * ni {
        all.insert(Triple::from(InstanceOfTriple::new(rng.gen_range(0..ni as u32), rng.gen_range(0..nc as u32))));
    }
    for _ in 0..2 * nc {
        let a = rng.gen_range(0..nc as u32);
        let b = rng.gen_range(0..nc as u32);
        if a != b {
            all.insert(Triple::from(SubClassOfTriple::new(a, b)));
        }
    }
    let mut splits = [TripleSet::default(), TripleSet::default(), TripleSet::default()];
    for t in all {
        let x: f64 = rng.gen();
        let k = if x < 0.6 { 0 } else if x < 0.8 { 1 } else { 2 };
        splits[k].push(t);
    }
    // link prediction needs at least one relational test triple
    if splits[2].relational.is_empty() {
        if let Some(t) = splits[0].relational.pop() {
            splits[2].relational.push(t);
        }
    }
    let [train, valid, test] = splits;
    KnowledgeGraph::from_counts(ni, nc, nr, train, valid, test)
}

/// Replaces one end of each positive with a uniformly random entity.
pub fn random_negatives<R: Rng>(rng: &mut R, kg: &KnowledgeGraph, positives: &TripleSet) -> TripleSet {
    let ni = kg.num_instances() as u32;
    let nc = kg.num_concepts() as u32;
    let mut out = TripleSet::default();
    for t in positives.iter() {
        let head = rng.gen_bool(0.5);
        let neg = match t {
            Triple::Relational(mut r) => {
                let e = InstanceId(rng.gen_range(0..ni));
                if head {
                    r.head = e
                } else {
                    r.tail = e
                }
                Triple::Relational(r)
            }
            Triple::InstanceOf(mut r) => {
                if head {
                    r.instance = InstanceId(rng.gen_range(0..ni))
                } else {
                    r.concept = ConceptId(rng.gen_range(0..nc))
                }
                Triple::InstanceOf(r)
            }
            Triple::SubClassOf(mut r) => {
                let c = ConceptId(rng.gen_range(0..nc));
                if head {
                    r.sub = c
                } else {
                    r.sup = c
                }
                Triple::SubClassOf(r)
            }
        };
        out.push(neg);
    }
    out
}
