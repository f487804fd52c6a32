//! Reading new isA facts off a trained space: an instance inside a sphere is
//! an instanceOf candidate, a sphere inside another a subClassOf candidate.

use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{classify_spheres, distance, score_instance_of, score_sub_class_of, EmbeddingSpace, SpherePosition};
use crate::kg::{ConceptId, InstanceId, InstanceOfTriple, KnowledgeGraph, SubClassOfTriple, Triple, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Inferred {
    pub head: u32,
    pub tail: u32,
    pub score: f64,
}

fn run<F>(n: usize, threads: usize, per_row: F) -> Vec<Inferred>
where
    F: Fn(u32) -> Vec<Inferred> + Sync + Send,
{
    let mut out: Vec<Inferred> = if threads > 1 {
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(|| (0..n as u32).into_par_iter().flat_map_iter(&per_row).collect()),
            Err(e) => {
                log::warn!("falling back to one thread: {e}");
                (0..n as u32).flat_map(&per_row).collect()
            }
        }
    } else {
        (0..n as u32).flat_map(&per_row).collect()
    };
    out.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.head.cmp(&b.head)).then(a.tail.cmp(&b.tail)));
    out
}

/// Unknown `(instance, concept)` pairs with `score_instance_of <= -slack`,
/// ascending by score (ties by ids).
pub fn infer_instance_of(space: &EmbeddingSpace, kg: &KnowledgeGraph, slack: f64, threads: usize) -> Vec<Inferred> {
    run(space.num_instances(), threads, |i| {
        let v = space.instance(InstanceId(i));
        (0..space.num_concepts() as u32)
            .filter_map(|c| {
                let sphere = space.sphere(ConceptId(c));
                let score = score_instance_of(v, sphere);
                let known = kg.contains(&InstanceOfTriple::new(i, c).into());
                (score <= -slack && !known).then_some(Inferred { head: i, tail: c, score })
            })
            .collect()
    })
}

/// Unknown `(sub, super)` pairs whose spheres are `Inside` with
/// `score_sub_class_of <= -slack`, ascending by score (ties by ids).
pub fn infer_sub_class_of(space: &EmbeddingSpace, kg: &KnowledgeGraph, slack: f64, threads: usize) -> Vec<Inferred> {
    run(space.num_concepts(), threads, |a| {
        let si = space.sphere(ConceptId(a));
        (0..space.num_concepts() as u32)
            .filter(|&b| b != a)
            .filter_map(|b| {
                let sj = space.sphere(ConceptId(b));
                // An inner sphere's center lies within the outer radius.
                if distance(si.center, sj.center) > sj.radius {
                    return None;
                }
                if classify_spheres(si, sj) != SpherePosition::Inside {
                    return None;
                }
                let score = score_sub_class_of(si, sj);
                let known = kg.contains(&Triple::SubClassOf(SubClassOfTriple::new(a, b)));
                (score <= -slack && !known).then_some(Inferred { head: a, tail: b, score })
            })
            .collect()
    })
}

/// `head<TAB>tail<TAB>score` lines with names resolved.
pub fn to_tsv(facts: &[Inferred], heads: &Vocab, tails: &Vocab) -> String {
    let mut out = String::new();
    for f in facts {
        out.push_str(&format!("{}\t{}\t{}\n", heads.name(f.head), tails.name(f.tail), f.score));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ModelKind;
    use crate::kg::TripleSet;

    fn space_2d(instances: &[[f64; 2]], spheres: &[([f64; 2], f64)]) -> EmbeddingSpace {
        let mut s = EmbeddingSpace::zeros(ModelKind::TransC, 2, instances.len(), spheres.len(), 0);
        for (i, v) in instances.iter().enumerate() {
            s.instance_mut(InstanceId(i as u32)).copy_from_slice(v);
        }
        for (c, (p, m)) in spheres.iter().enumerate() {
            s.center_mut(ConceptId(c as u32)).copy_from_slice(p);
            s.set_radius(ConceptId(c as u32), *m);
        }
        s
    }

    fn empty_kg(ni: usize, nc: usize) -> KnowledgeGraph {
        KnowledgeGraph::from_counts(ni, nc, 0, TripleSet::default(), TripleSet::default(), TripleSet::default())
    }

    #[test]
    fn instance_at_center_is_emitted_with_minus_radius() {
        let space = space_2d(&[[0.1, 0.2]], &[([0.1, 0.2], 0.3)]);
        let got = infer_instance_of(&space, &empty_kg(1, 1), 0.0, 1);
        assert_eq!(got, vec![Inferred { head: 0, tail: 0, score: -0.3 }]);
        assert!(infer_instance_of(&space, &empty_kg(1, 1), f64::INFINITY, 1).is_empty());
    }

    #[test]
    fn known_facts_are_not_emitted() {
        let space = space_2d(&[[0.0, 0.0]], &[([0.0, 0.0], 0.3)]);
        let train = TripleSet { instance_of: vec![InstanceOfTriple::new(0, 0)], ..Default::default() };
        let kg = KnowledgeGraph::from_counts(1, 1, 0, train, TripleSet::default(), TripleSet::default());
        assert!(infer_instance_of(&space, &kg, 0.0, 1).is_empty());
    }

    #[test]
    fn sub_class_of_rules() {
        // 0 deep inside 1; 2 identical to 1; 3 far away
        let space = space_2d(&[], &[([0.0, 0.0], 0.1), ([0.05, 0.0], 0.5), ([0.05, 0.0], 0.5), ([0.9, 0.0], 0.05)]);
        let kg = empty_kg(0, 4);
        let strict = infer_sub_class_of(&space, &kg, 1e-9, 1);
        let pairs: Vec<(u32, u32)> = strict.iter().map(|f| (f.head, f.tail)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2)]);
        assert!((strict[0].score - (0.05 + 0.1 - 0.5)).abs() < 1e-15);
        // without slack the identical pair is non-strictly inside both ways
        let loose = infer_sub_class_of(&space, &kg, 0.0, 1);
        assert!(loose.iter().any(|f| (f.head, f.tail) == (1, 2)));
        assert!(loose.iter().any(|f| (f.head, f.tail) == (2, 1)));
    }

    #[test]
    fn parallel_matches_serial() {
        use rand::Rng;
        let mut rng = crate::rng::rng_for(5, "test");
        let inst: Vec<[f64; 2]> = (0..40).map(|_| [rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7)]).collect();
        let sph: Vec<([f64; 2], f64)> = (0..15)
            .map(|_| ([rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)], rng.gen_range(0.01..0.6)))
            .collect();
        let space = space_2d(&inst, &sph);
        let kg = empty_kg(40, 15);
        assert_eq!(infer_instance_of(&space, &kg, 0.0, 1), infer_instance_of(&space, &kg, 0.0, 4));
        assert_eq!(infer_sub_class_of(&space, &kg, 0.0, 1), infer_sub_class_of(&space, &kg, 0.0, 4));
        let e = infer_instance_of(&space, &kg, 0.0, 1);
        assert!(e.windows(2).all(|w| w[0].score <= w[1].score));
    }

    #[test]
    fn tsv_uses_names() {
        let facts = [Inferred { head: 1, tail: 0, score: -0.25 }];
        let tsv = to_tsv(&facts, &Vocab::from_names(["x", "y"]), &Vocab::from_names(["City"]));
        assert_eq!(tsv, "y\tCity\t-0.25\n");
    }
}
