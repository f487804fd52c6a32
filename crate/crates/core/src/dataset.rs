//! Dataset construction: subset sampling from a raw export, train/valid/test
//! splitting, and the transitivity extension of valid/test isA triples.

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{
    ConceptId, CoverageReport, InstanceOfTriple, KnowledgeGraph, RelationalTriple, SubClassOfTriple, Triple,
    TripleKind, TripleSet, Vocab,
};
use crate::rng::rng_for;

pub const RAW_RELATIONAL_FILE: &str = "relational.tsv";
pub const RAW_INSTANCE_OF_FILE: &str = "instanceOf.tsv";
pub const RAW_SUB_CLASS_OF_FILE: &str = "subClassOf.tsv";

/// String-valued triples as exported from a source KG, one record per line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawExport {
    pub relational: Vec<[String; 3]>,
    pub instance_of: Vec<[String; 2]>,
    pub sub_class_of: Vec<[String; 2]>,
}

fn parse_records<const N: usize>(path: &Path, text: &str) -> Result<Vec<[String; N]>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let record: [String; N] = fields
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .try_into()
            .map_err(|_| Error::Parse {
                path: path.to_owned(),
                line: i + 1,
                message: format!("expected {N} tab-separated fields, found {}", fields.len()),
            })?;
        if record.iter().any(String::is_empty) {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: i + 1,
                message: "empty field".into(),
            });
        }
        out.push(record);
    }
    Ok(out)
}

impl RawExport {
    /// Reads `relational.tsv` (`head relation tail`), `instanceOf.tsv`
    /// (`instance concept`) and `subClassOf.tsv` (`sub super`) from `dir`.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path)
                .map_err(|e| Error::io(&path, e))
                .map(|text| (path, text))
        };
        let (p, t) = read(RAW_RELATIONAL_FILE)?;
        let relational = parse_records(&p, &t)?;
        let (p, t) = read(RAW_INSTANCE_OF_FILE)?;
        let instance_of = parse_records(&p, &t)?;
        let (p, t) = read(RAW_SUB_CLASS_OF_FILE)?;
        let sub_class_of = parse_records(&p, &t)?;
        Ok(Self {
            relational,
            instance_of,
            sub_class_of,
        })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        fn write<const N: usize>(path: &Path, records: &[[String; N]]) -> Result<()> {
            let mut w = BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?);
            for r in records {
                writeln!(w, "{}", r.join("\t")).map_err(|e| Error::io(path, e))?;
            }
            w.flush().map_err(|e| Error::io(path, e))
        }
        write(&dir.join(RAW_RELATIONAL_FILE), &self.relational)?;
        write(&dir.join(RAW_INSTANCE_OF_FILE), &self.instance_of)?;
        write(&dir.join(RAW_SUB_CLASS_OF_FILE), &self.sub_class_of)
    }

    /// Every triple of `kg` (all splits) with ids replaced by names.
    pub fn from_kg(kg: &KnowledgeGraph) -> Self {
        let (i, c, r) = (kg.instances(), kg.concepts(), kg.relations());
        let mut raw = Self::default();
        for set in [kg.train(), kg.valid(), kg.test()] {
            for t in set.iter() {
                match t {
                    Triple::Relational(t) => raw.relational.push([
                        i.name(t.head.0).into(),
                        r.name(t.relation.0).into(),
                        i.name(t.tail.0).into(),
                    ]),
                    Triple::InstanceOf(t) => {
                        raw.instance_of.push([i.name(t.instance.0).into(), c.name(t.concept.0).into()])
                    }
                    Triple::SubClassOf(t) => {
                        raw.sub_class_of.push([c.name(t.sub.0).into(), c.name(t.sup.0).into()])
                    }
                }
            }
        }
        raw
    }
}

fn sorted_vocab<'a>(names: impl Iterator<Item = &'a str>) -> Vocab {
    let mut v: Vec<&str> = names.collect();
    v.sort_unstable();
    v.dedup();
    Vocab::from_names(v)
}

/// Samples `sample_size` distinct relational records and keeps the isA
/// records that stay inside the sampled entities:
///
/// 1. sample relational triples;
/// 2. collect their instances and relations;
/// 3. keep instanceOf records whose instance was collected;
/// 4. collect the concepts of those records;
/// 5. keep subClassOf records with both concepts collected;
/// 6. assemble the graph.
///
/// Everything lands in the training split. Ids follow sorted name order, so
/// rebuilding from a graph's own export with the full sample size returns the
/// same graph.
pub fn build_subset(raw: &RawExport, sample_size: usize, seed: u64) -> Result<KnowledgeGraph> {
    let mut pool: Vec<&[String; 3]> = raw.relational.iter().collect();
    pool.sort_unstable();
    pool.dedup();
    if sample_size > pool.len() {
        return Err(Error::Dataset(format!(
            "sample size {sample_size} exceeds the {} distinct relational triples in the export",
            pool.len()
        )));
    }
    let mut rng = rng_for(seed, "subset");
    let sample: Vec<&[String; 3]> = rand::seq::index::sample(&mut rng, pool.len(), sample_size)
        .into_iter()
        .map(|i| pool[i])
        .collect();

    let instances = sorted_vocab(sample.iter().flat_map(|[h, _, t]| [h.as_str(), t.as_str()]));
    let relations = sorted_vocab(sample.iter().map(|[_, r, _]| r.as_str()));
    let kept_instance_of: Vec<&[String; 2]> = raw
        .instance_of
        .iter()
        .filter(|[i, _]| instances.get(i).is_some())
        .collect();
    let concepts = sorted_vocab(kept_instance_of.iter().map(|[_, c]| c.as_str()));

    let id = |v: &Vocab, name: &str| v.get(name).expect("name collected above");
    let mut train = TripleSet::default();
    for [h, r, t] in &sample {
        train
            .relational
            .push(RelationalTriple::new(id(&instances, h), id(&relations, r), id(&instances, t)));
    }
    for [i, c] in &kept_instance_of {
        train
            .instance_of
            .push(InstanceOfTriple::new(id(&instances, i), id(&concepts, c)));
    }
    for [a, b] in &raw.sub_class_of {
        if let (Some(a), Some(b)) = (concepts.get(a), concepts.get(b)) {
            train.sub_class_of.push(SubClassOfTriple::new(a, b));
        }
    }
    train.dedup_stable();
    train.sort_canonical();
    Ok(KnowledgeGraph::new(
        instances,
        concepts,
        relations,
        train,
        TripleSet::default(),
        TripleSet::default(),
    ))
}

/// Held-out sizes for one triple kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeldOut {
    pub valid: usize,
    pub test: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SplitRequest {
    /// `(train, valid, test)` weights applied to every kind; held-out sizes round to nearest.
    Ratios([f64; 3]),
    /// Exact held-out sizes per kind, in `TripleKind::ALL` order.
    Counts([HeldOut; 3]),
}

impl SplitRequest {
    fn held_out(&self, kind_index: usize, n: usize) -> Result<HeldOut> {
        let h = match *self {
            SplitRequest::Ratios(w) => {
                let sum: f64 = w.iter().sum();
                if w.iter().any(|x| !x.is_finite() || *x < 0.0) || sum <= 0.0 {
                    return Err(Error::Dataset(format!("invalid split ratios {w:?}")));
                }
                let valid = (n as f64 * w[1] / sum).round() as usize;
                let test = ((n as f64 * w[2] / sum).round() as usize).min(n - valid.min(n));
                HeldOut { valid, test }
            }
            SplitRequest::Counts(c) => c[kind_index],
        };
        if h.valid + h.test > n {
            return Err(Error::Dataset(format!(
                "requested {} valid + {} test {} triples but only {n} exist",
                h.valid,
                h.test,
                TripleKind::ALL[kind_index].name()
            )));
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitReport {
    /// Per-kind sizes `[train, valid, test]`, in `TripleKind::ALL` order.
    pub sizes: [[usize; 3]; 3],
    /// Held-out triples whose removal left an entity without training triples.
    pub forced: usize,
    pub coverage: CoverageReport,
}

/// Randomly splits every triple of `kg` (all splits pooled) per kind.
///
/// Held-out triples are drawn in shuffled order, skipping any whose removal
/// would leave one of its instances or concepts absent from training. If that
/// leaves a quota unfilled, skipped triples are taken anyway and counted in
/// [`SplitReport::forced`].
pub fn split(kg: &KnowledgeGraph, request: &SplitRequest, seed: u64) -> Result<(KnowledgeGraph, SplitReport)> {
    let mut pool = kg.train().clone();
    for t in kg.valid().iter().chain(kg.test().iter()) {
        pool.push(t);
    }
    pool.dedup_stable();
    pool.sort_canonical();

    // Training occurrences per entity; every triple starts in train.
    let mut inst_count = vec![0usize; kg.num_instances()];
    let mut conc_count = vec![0usize; kg.num_concepts()];
    let entities = |t: &Triple| -> (Vec<usize>, Vec<usize>) {
        match *t {
            Triple::Relational(t) => (vec![t.head.index(), t.tail.index()], vec![]),
            Triple::InstanceOf(t) => (vec![t.instance.index()], vec![t.concept.index()]),
            Triple::SubClassOf(t) => (vec![], vec![t.sub.index(), t.sup.index()]),
        }
    };
    for t in pool.iter() {
        let (is, cs) = entities(&t);
        is.iter().for_each(|&i| inst_count[i] += 1);
        cs.iter().for_each(|&c| conc_count[c] += 1);
    }

    let mut rng = rng_for(seed, "split");
    let mut out: [TripleSet; 3] = Default::default();
    let mut sizes = [[0usize; 3]; 3];
    let mut forced = 0;
    for (k, kind) in TripleKind::ALL.into_iter().enumerate() {
        let mut triples: Vec<Triple> = pool.iter().filter(|t| t.kind() == kind).collect();
        let want = request.held_out(k, triples.len())?;
        triples.shuffle(&mut rng);
        let quota = want.valid + want.test;
        let mut held: Vec<usize> = Vec::with_capacity(quota);
        let mut skipped: Vec<usize> = Vec::new();
        for (idx, t) in triples.iter().enumerate() {
            if held.len() == quota {
                break;
            }
            let (is, cs) = entities(t);
            // A triple mentioning the same entity twice needs it three times.
            let safe = is.iter().all(|&i| inst_count[i] > is.iter().filter(|&&x| x == i).count())
                && cs.iter().all(|&c| conc_count[c] > cs.iter().filter(|&&x| x == c).count());
            if safe {
                is.iter().for_each(|&i| inst_count[i] -= 1);
                cs.iter().for_each(|&c| conc_count[c] -= 1);
                held.push(idx);
            } else {
                skipped.push(idx);
            }
        }
        for idx in skipped {
            if held.len() == quota {
                break;
            }
            let (is, cs) = entities(&triples[idx]);
            is.iter().for_each(|&i| inst_count[i] -= 1);
            cs.iter().for_each(|&c| conc_count[c] -= 1);
            held.push(idx);
            forced += 1;
        }
        let mut slot = vec![0u8; triples.len()];
        for (n, &idx) in held.iter().enumerate() {
            slot[idx] = if n < want.valid { 1 } else { 2 };
        }
        for (t, s) in triples.into_iter().zip(slot) {
            out[s as usize].push(t);
            sizes[k][s as usize] += 1;
        }
    }
    for set in out.iter_mut() {
        set.sort_canonical();
    }
    let [train, valid, test] = out;
    let result = kg.with_splits(train, valid, test);
    let coverage = result.coverage();
    if forced > 0 {
        log::warn!("{forced} held-out triples leave an entity without training triples");
    }
    Ok((result, SplitReport { sizes, forced, coverage }))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MExtensionReport {
    pub valid_instance_of: usize,
    pub valid_sub_class_of: usize,
    pub test_instance_of: usize,
    pub test_sub_class_of: usize,
}

fn extend_split(kg: &KnowledgeGraph, split: &TripleSet, closure: bool, emitted: &mut HashSet<Triple>) -> TripleSet {
    let mut added = TripleSet::default();
    let mut frontier_e: Vec<InstanceOfTriple> = split.instance_of.clone();
    let mut frontier_c: Vec<SubClassOfTriple> = split.sub_class_of.clone();
    let mut accept = |t: Triple, added: &mut TripleSet| {
        let fresh = !kg.contains(&t) && emitted.insert(t);
        if fresh {
            added.push(t);
        }
        fresh
    };
    loop {
        let mut next_e = Vec::new();
        let mut next_c = Vec::new();
        for t in &frontier_e {
            for &sup in kg.super_concepts(t.concept) {
                let derived = InstanceOfTriple { instance: t.instance, concept: sup };
                if accept(derived.into(), &mut added) {
                    next_e.push(derived);
                }
            }
        }
        for t in &frontier_c {
            for &sup in kg.super_concepts(t.sup) {
                if sup == t.sub {
                    continue;
                }
                let derived = SubClassOfTriple { sub: t.sub, sup };
                if accept(derived.into(), &mut added) {
                    next_c.push(derived);
                }
            }
        }
        if !closure || (next_e.is_empty() && next_c.is_empty()) {
            break;
        }
        frontier_e = next_e;
        frontier_c = next_c;
    }
    added
}

/// Adds to valid and test every isA triple derivable from one of their isA
/// triples and one training subClassOf triple:
///
/// - `(i, instanceOf, c)` held out, `(c, subClassOf, d)` in train gives `(i, instanceOf, d)`;
/// - `(a, subClassOf, b)` held out, `(b, subClassOf, d)` in train gives `(a, subClassOf, d)`.
///
/// Triples already present in any split are not added, and valid takes
/// precedence when both splits derive the same triple. With `closure`, the
/// rules are re-applied to newly added triples until nothing changes.
pub fn build_m_extension(kg: &KnowledgeGraph, closure: bool) -> (KnowledgeGraph, MExtensionReport) {
    let mut emitted = HashSet::new();
    let add_valid = extend_split(kg, kg.valid(), closure, &mut emitted);
    let add_test = extend_split(kg, kg.test(), closure, &mut emitted);
    let report = MExtensionReport {
        valid_instance_of: add_valid.instance_of.len(),
        valid_sub_class_of: add_valid.sub_class_of.len(),
        test_instance_of: add_test.instance_of.len(),
        test_sub_class_of: add_test.sub_class_of.len(),
    };
    let mut valid = kg.valid().clone();
    let mut test = kg.test().clone();
    add_valid.iter().for_each(|t| valid.push(t));
    add_test.iter().for_each(|t| test.push(t));
    (kg.with_splits(kg.train().clone(), valid, test), report)
}

/// True if `t` follows from one rule application on `premise` and a training triple.
pub fn derivable_in_one_step(kg: &KnowledgeGraph, premises: &TripleSet, t: &Triple) -> bool {
    let via = |mid: ConceptId, sup: ConceptId| kg.in_train(&SubClassOfTriple { sub: mid, sup }.into());
    match *t {
        Triple::InstanceOf(t) => premises
            .instance_of
            .iter()
            .any(|p| p.instance == t.instance && via(p.concept, t.concept)),
        Triple::SubClassOf(t) => premises
            .sub_class_of
            .iter()
            .any(|p| p.sub == t.sub && via(p.sup, t.sup)),
        Triple::Relational(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::SplitName;
    use proptest::prelude::*;

    fn s(x: &str) -> String {
        x.to_owned()
    }

    #[test]
    fn subset_drops_sub_class_of_outside_concepts() {
        let raw = RawExport {
            relational: vec![[s("a"), s("likes"), s("b")]],
            instance_of: vec![[s("a"), s("c")]],
            sub_class_of: vec![[s("c"), s("d")], [s("x"), s("y")]],
        };
        let kg = build_subset(&raw, 1, 0).unwrap();
        assert_eq!(kg.instances().names(), ["a", "b"]);
        assert_eq!(kg.concepts().names(), ["c"]);
        assert_eq!(kg.train().instance_of.len(), 1);
        // d is only ever a super-concept, so it never joins the concept set
        assert!(kg.train().sub_class_of.is_empty());
    }

    #[test]
    fn subset_keeps_sub_class_of_inside_concepts() {
        let raw = RawExport {
            relational: vec![[s("a"), s("r"), s("b")]],
            instance_of: vec![[s("a"), s("c")], [s("b"), s("d")]],
            sub_class_of: vec![[s("c"), s("d")]],
        };
        let kg = build_subset(&raw, 1, 0).unwrap();
        assert_eq!(kg.train().sub_class_of, vec![SubClassOfTriple::new(0, 1)]);
    }

    #[test]
    fn empty_subset_and_oversized_request() {
        let raw = RawExport {
            relational: vec![[s("a"), s("r"), s("b")]],
            ..Default::default()
        };
        let kg = build_subset(&raw, 0, 0).unwrap();
        assert_eq!(kg.num_instances(), 0);
        assert_eq!(kg.num_relations(), 0);
        assert!(kg.train().is_empty());
        assert!(matches!(build_subset(&raw, 2, 0), Err(Error::Dataset(_))));
    }

    fn random_raw(seed: u64) -> RawExport {
        use rand::Rng;
        let mut rng = rng_for(seed, "test-raw");
        let mut raw = RawExport::default();
        for _ in 0..60 {
            raw.relational.push([
                format!("e{}", rng.gen_range(0..25)),
                format!("r{}", rng.gen_range(0..4)),
                format!("e{}", rng.gen_range(0..25)),
            ]);
        }
        for _ in 0..40 {
            raw.instance_of
                .push([format!("e{}", rng.gen_range(0..30)), format!("c{}", rng.gen_range(0..8))]);
        }
        for _ in 0..12 {
            raw.sub_class_of
                .push([format!("c{}", rng.gen_range(0..10)), format!("c{}", rng.gen_range(0..10))]);
        }
        raw
    }

    proptest! {
        #[test]
        fn subset_is_idempotent(seed in any::<u64>(), size in 0usize..40) {
            let raw = random_raw(seed);
            let kg = build_subset(&raw, size, seed).unwrap();
            let again = build_subset(&RawExport::from_kg(&kg), kg.train().relational.len(), seed ^ 1).unwrap();
            prop_assert_eq!(kg.instances(), again.instances());
            prop_assert_eq!(kg.concepts(), again.concepts());
            prop_assert_eq!(kg.relations(), again.relations());
            prop_assert_eq!(kg.train(), again.train());
        }

        #[test]
        fn split_partitions_the_pool(seed in any::<u64>(), v in 0.0f64..0.3, t in 0.0f64..0.3) {
            let kg = build_subset(&random_raw(seed), 40, seed).unwrap();
            let (out, report) = split(&kg, &SplitRequest::Ratios([1.0 - v - t, v, t]), seed).unwrap();
            let mut union = TripleSet::default();
            let mut seen = HashSet::new();
            for name in SplitName::ALL {
                for tr in out.split(name).iter() {
                    prop_assert!(seen.insert(tr), "{} in two splits", tr);
                    union.push(tr);
                }
            }
            union.sort_canonical();
            let mut pool = kg.train().clone();
            pool.sort_canonical();
            prop_assert_eq!(union, pool);
            let total: usize = report.sizes.iter().flatten().sum();
            prop_assert_eq!(total, kg.train().len());
            if report.forced == 0 {
                prop_assert_eq!(report.coverage, CoverageReport::default());
            }
        }
    }

    #[test]
    fn split_ratio_all_train_and_determinism() {
        let kg = build_subset(&random_raw(3), 40, 3).unwrap();
        let (out, report) = split(&kg, &SplitRequest::Ratios([1.0, 0.0, 0.0]), 1).unwrap();
        assert_eq!(out.train().len(), kg.train().len());
        assert!(out.valid().is_empty() && out.test().is_empty());
        assert_eq!(report.forced, 0);
        let r = SplitRequest::Ratios([0.8, 0.1, 0.1]);
        assert_eq!(split(&kg, &r, 9).unwrap().0.test(), split(&kg, &r, 9).unwrap().0.test());
    }

    #[test]
    fn split_counts_are_exact() {
        let kg = build_subset(&random_raw(4), 50, 4).unwrap();
        let counts = [HeldOut { valid: 5, test: 6 }, HeldOut { valid: 2, test: 3 }, HeldOut::default()];
        let (out, report) = split(&kg, &SplitRequest::Counts(counts), 2).unwrap();
        assert_eq!(out.valid().relational.len(), 5);
        assert_eq!(out.test().relational.len(), 6);
        assert_eq!(out.test().instance_of.len(), 3);
        assert_eq!(report.sizes[0][1..], [5, 6]);
        let too_many = [HeldOut { valid: 1000, test: 0 }, HeldOut::default(), HeldOut::default()];
        assert!(split(&kg, &SplitRequest::Counts(too_many), 2).is_err());
    }

    /// Concepts c=0, d=1, e=2 with c -> d -> e in training.
    fn chain_kg(test: TripleSet) -> KnowledgeGraph {
        let train = TripleSet {
            sub_class_of: vec![SubClassOfTriple::new(0, 1), SubClassOfTriple::new(1, 2)],
            instance_of: vec![InstanceOfTriple::new(1, 0)],
            ..Default::default()
        };
        KnowledgeGraph::from_counts(2, 3, 0, train, TripleSet::default(), test)
    }

    #[test]
    fn m_extension_single_hop() {
        let test = TripleSet { instance_of: vec![InstanceOfTriple::new(0, 0)], ..Default::default() };
        let (ext, report) = build_m_extension(&chain_kg(test.clone()), false);
        assert_eq!(ext.test().instance_of, vec![InstanceOfTriple::new(0, 0), InstanceOfTriple::new(0, 1)]);
        assert_eq!(report.test_instance_of, 1);

        let (ext, _) = build_m_extension(&chain_kg(test), true);
        assert_eq!(ext.test().instance_of.len(), 3);
    }

    #[test]
    fn m_extension_sub_class_of_and_known_skipped() {
        // concepts 0..4; train 1 -> 2, 1 -> 3 and 0 -> 3 (so (0, 3) is known)
        let train = TripleSet {
            sub_class_of: vec![
                SubClassOfTriple::new(1, 2),
                SubClassOfTriple::new(1, 3),
                SubClassOfTriple::new(0, 3),
            ],
            ..Default::default()
        };
        let test = TripleSet { sub_class_of: vec![SubClassOfTriple::new(0, 1)], ..Default::default() };
        let kg = KnowledgeGraph::from_counts(0, 4, 0, train, TripleSet::default(), test);
        let (ext, report) = build_m_extension(&kg, false);
        assert_eq!(report.test_sub_class_of, 1);
        assert_eq!(ext.test().sub_class_of[1], SubClassOfTriple::new(0, 2));
        let added: Vec<Triple> = ext.test().sub_class_of[1..].iter().map(|&t| t.into()).collect();
        for t in added {
            assert!(derivable_in_one_step(&kg, kg.test(), &t));
        }
    }

    #[test]
    fn raw_files_round_trip() {
        let raw = random_raw(11);
        let dir = tempfile::tempdir().unwrap();
        raw.save(dir.path()).unwrap();
        assert_eq!(RawExport::load(dir.path()).unwrap(), raw);
        fs::write(dir.path().join(RAW_INSTANCE_OF_FILE), "a\tb\nc\n").unwrap();
        let err = RawExport::load(dir.path()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }
}
