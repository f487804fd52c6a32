//! Knowledge graph data model: three disjoint ID spaces (instances, concepts,
//! instance relations) and the three triple kinds that connect them.
//!
//! On disk a graph is a directory in the OpenKE-style layout:
//!
//! ```text
//! instance2id.txt  concept2id.txt  relation2id.txt        N, then "name<TAB>id"
//! triple2id_{train,valid,test}.txt                        N, then "head tail relation"
//! instanceOf2id_{train,valid,test}.txt                    N, then "instance concept"
//! subClassOf2id_{train,valid,test}.txt                    N, then "sub super"
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
        )]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(
    /// Dense index into the instance vocabulary.
    InstanceId
);
id_type!(
    /// Dense index into the concept vocabulary.
    ConceptId
);
id_type!(
    /// Dense index into the instance-relation vocabulary (excludes instanceOf/subClassOf).
    RelationId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationalTriple {
    pub head: InstanceId,
    pub relation: RelationId,
    pub tail: InstanceId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstanceOfTriple {
    pub instance: InstanceId,
    pub concept: ConceptId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubClassOfTriple {
    pub sub: ConceptId,
    pub sup: ConceptId,
}

impl RelationalTriple {
    pub fn new(head: u32, relation: u32, tail: u32) -> Self {
        Self {
            head: InstanceId(head),
            relation: RelationId(relation),
            tail: InstanceId(tail),
        }
    }
}

impl InstanceOfTriple {
    pub fn new(instance: u32, concept: u32) -> Self {
        Self {
            instance: InstanceId(instance),
            concept: ConceptId(concept),
        }
    }
}

impl SubClassOfTriple {
    pub fn new(sub: u32, sup: u32) -> Self {
        Self {
            sub: ConceptId(sub),
            sup: ConceptId(sup),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripleKind {
    InstanceOf,
    SubClassOf,
    Relational,
}

impl TripleKind {
    pub const ALL: [TripleKind; 3] = [
        TripleKind::Relational,
        TripleKind::InstanceOf,
        TripleKind::SubClassOf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TripleKind::InstanceOf => "instanceOf",
            TripleKind::SubClassOf => "subClassOf",
            TripleKind::Relational => "relational",
        }
    }
}

/// A triple of any kind. The variant fixes which ID space each end lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Triple {
    InstanceOf(InstanceOfTriple),
    SubClassOf(SubClassOfTriple),
    Relational(RelationalTriple),
}

impl Triple {
    pub fn kind(&self) -> TripleKind {
        match self {
            Triple::InstanceOf(_) => TripleKind::InstanceOf,
            Triple::SubClassOf(_) => TripleKind::SubClassOf,
            Triple::Relational(_) => TripleKind::Relational,
        }
    }
}

impl From<RelationalTriple> for Triple {
    fn from(t: RelationalTriple) -> Self {
        Triple::Relational(t)
    }
}

impl From<InstanceOfTriple> for Triple {
    fn from(t: InstanceOfTriple) -> Self {
        Triple::InstanceOf(t)
    }
}

impl From<SubClassOfTriple> for Triple {
    fn from(t: SubClassOfTriple) -> Self {
        Triple::SubClassOf(t)
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Triple::InstanceOf(t) => write!(f, "(i{}, instanceOf, c{})", t.instance, t.concept),
            Triple::SubClassOf(t) => write!(f, "(c{}, subClassOf, c{})", t.sub, t.sup),
            Triple::Relational(t) => write!(f, "(i{}, r{}, i{})", t.head, t.relation, t.tail),
        }
    }
}

/// Bidirectional name <-> dense id map.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vocabulary where `names[i]` gets id `i`. Duplicate names keep the first id.
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::new();
        for name in names {
            vocab.push(name.into());
        }
        vocab
    }

    /// Builds `n` anonymous entries named by their id.
    pub fn anonymous(prefix: &str, n: usize) -> Self {
        Self::from_names((0..n).map(|i| format!("{prefix}{i}")))
    }

    fn push(&mut self, name: String) -> u32 {
        let id = self.names.len() as u32;
        self.index.entry(name.clone()).or_insert(id);
        self.names.push(name);
        id
    }

    /// Returns the existing id for `name`, or assigns the next one.
    pub fn intern(&mut self, name: &str) -> u32 {
        match self.index.get(name) {
            Some(&id) => id,
            None => self.push(name.to_owned()),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    /// Like [`Vocab::get`] but unknown names are an error.
    pub fn require(&self, what: &'static str, name: &str) -> Result<u32> {
        self.get(name).ok_or_else(|| Error::UnknownName {
            what,
            name: name.to_owned(),
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// One split's worth of triples, grouped by kind.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripleSet {
    pub relational: Vec<RelationalTriple>,
    pub instance_of: Vec<InstanceOfTriple>,
    pub sub_class_of: Vec<SubClassOfTriple>,
}

impl TripleSet {
    pub fn len(&self) -> usize {
        self.relational.len() + self.instance_of.len() + self.sub_class_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn len_of(&self, kind: TripleKind) -> usize {
        match kind {
            TripleKind::Relational => self.relational.len(),
            TripleKind::InstanceOf => self.instance_of.len(),
            TripleKind::SubClassOf => self.sub_class_of.len(),
        }
    }

    pub fn push(&mut self, triple: Triple) {
        match triple {
            Triple::Relational(t) => self.relational.push(t),
            Triple::InstanceOf(t) => self.instance_of.push(t),
            Triple::SubClassOf(t) => self.sub_class_of.push(t),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Triple> + '_ {
        self.relational
            .iter()
            .map(|&t| Triple::Relational(t))
            .chain(self.instance_of.iter().map(|&t| Triple::InstanceOf(t)))
            .chain(self.sub_class_of.iter().map(|&t| Triple::SubClassOf(t)))
    }

    /// Sorts into the canonical on-disk order (the order fields appear in the files).
    pub fn sort_canonical(&mut self) {
        self.relational
            .sort_unstable_by_key(|t| (t.head, t.tail, t.relation));
        self.instance_of.sort_unstable();
        self.sub_class_of.sort_unstable();
    }

    /// Removes duplicates while keeping first-occurrence order. Returns the number removed.
    pub fn dedup_stable(&mut self) -> usize {
        fn dedup<T: Copy + Eq + std::hash::Hash>(v: &mut Vec<T>) -> usize {
            let mut seen = HashSet::with_capacity(v.len());
            let before = v.len();
            v.retain(|t| seen.insert(*t));
            before - v.len()
        }
        dedup(&mut self.relational) + dedup(&mut self.instance_of) + dedup(&mut self.sub_class_of)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Valid,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Valid, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Valid => "valid",
            SplitName::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Default)]
struct KnownSets {
    relational: HashSet<RelationalTriple>,
    instance_of: HashSet<InstanceOfTriple>,
    sub_class_of: HashSet<SubClassOfTriple>,
}

impl KnownSets {
    fn extend(&mut self, set: &TripleSet) {
        self.relational.extend(set.relational.iter().copied());
        self.instance_of.extend(set.instance_of.iter().copied());
        self.sub_class_of.extend(set.sub_class_of.iter().copied());
    }

    fn contains(&self, triple: &Triple) -> bool {
        match triple {
            Triple::Relational(t) => self.relational.contains(t),
            Triple::InstanceOf(t) => self.instance_of.contains(t),
            Triple::SubClassOf(t) => self.sub_class_of.contains(t),
        }
    }
}

/// Instances, concepts, relations and their train/valid/test triples, plus
/// lookup indexes derived from them. Immutable once built.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    instances: Vocab,
    concepts: Vocab,
    relations: Vocab,
    train: TripleSet,
    valid: TripleSet,
    test: TripleSet,
    known: KnownSets,
    train_known: KnownSets,
    /// concept -> sorted instances (training instanceOf only)
    members: Vec<Vec<InstanceId>>,
    /// instance -> sorted concepts (training instanceOf only)
    concepts_of: Vec<Vec<ConceptId>>,
    /// concept -> sorted direct super-concepts (training subClassOf only)
    supers: Vec<Vec<ConceptId>>,
    /// concept -> sorted direct sub-concepts (training subClassOf only)
    subs: Vec<Vec<ConceptId>>,
}

impl KnowledgeGraph {
    /// Assembles a graph from vocabularies and splits. Duplicates within a
    /// split are dropped with a warning.
    ///
    /// Panics if a triple refers to an id outside its vocabulary; file loading
    /// reports that case as [`Error::Range`] before reaching here.
    pub fn new(
        instances: Vocab,
        concepts: Vocab,
        relations: Vocab,
        mut train: TripleSet,
        mut valid: TripleSet,
        mut test: TripleSet,
    ) -> Self {
        for (name, set) in [("train", &mut train), ("valid", &mut valid), ("test", &mut test)] {
            let removed = set.dedup_stable();
            if removed > 0 {
                log::warn!("dropped {removed} duplicate triples from the {name} split");
            }
            for t in set.iter() {
                check_ids(&t, instances.len(), concepts.len(), relations.len());
            }
        }

        let mut known = KnownSets::default();
        let mut train_known = KnownSets::default();
        train_known.extend(&train);
        known.extend(&train);
        known.extend(&valid);
        known.extend(&test);

        let mut members = vec![Vec::new(); concepts.len()];
        let mut concepts_of = vec![Vec::new(); instances.len()];
        for t in &train.instance_of {
            members[t.concept.index()].push(t.instance);
            concepts_of[t.instance.index()].push(t.concept);
        }
        let mut supers = vec![Vec::new(); concepts.len()];
        let mut subs = vec![Vec::new(); concepts.len()];
        for t in &train.sub_class_of {
            supers[t.sub.index()].push(t.sup);
            subs[t.sup.index()].push(t.sub);
        }
        for v in members.iter_mut() {
            v.sort_unstable();
        }
        for v in concepts_of.iter_mut().chain(supers.iter_mut()).chain(subs.iter_mut()) {
            v.sort_unstable();
        }

        Self {
            instances,
            concepts,
            relations,
            train,
            valid,
            test,
            known,
            train_known,
            members,
            concepts_of,
            supers,
            subs,
        }
    }

    /// A graph whose vocabularies are anonymous (`i0`, `c0`, `r0`, ...).
    pub fn from_counts(
        n_instances: usize,
        n_concepts: usize,
        n_relations: usize,
        train: TripleSet,
        valid: TripleSet,
        test: TripleSet,
    ) -> Self {
        Self::new(
            Vocab::anonymous("i", n_instances),
            Vocab::anonymous("c", n_concepts),
            Vocab::anonymous("r", n_relations),
            train,
            valid,
            test,
        )
    }

    /// Same vocabularies, replaced splits.
    pub fn with_splits(&self, train: TripleSet, valid: TripleSet, test: TripleSet) -> Self {
        Self::new(
            self.instances.clone(),
            self.concepts.clone(),
            self.relations.clone(),
            train,
            valid,
            test,
        )
    }

    pub fn instances(&self) -> &Vocab {
        &self.instances
    }

    pub fn concepts(&self) -> &Vocab {
        &self.concepts
    }

    pub fn relations(&self) -> &Vocab {
        &self.relations
    }

    pub fn num_instances(&self) -> usize {
        self.instances.len()
    }

    pub fn num_concepts(&self) -> usize {
        self.concepts.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn train(&self) -> &TripleSet {
        &self.train
    }

    pub fn valid(&self) -> &TripleSet {
        &self.valid
    }

    pub fn test(&self) -> &TripleSet {
        &self.test
    }

    pub fn split(&self, name: SplitName) -> &TripleSet {
        match name {
            SplitName::Train => &self.train,
            SplitName::Valid => &self.valid,
            SplitName::Test => &self.test,
        }
    }

    /// Membership in the union of train, valid and test.
    pub fn contains(&self, triple: &Triple) -> bool {
        self.known.contains(triple)
    }

    /// Membership in the training split only.
    pub fn in_train(&self, triple: &Triple) -> bool {
        self.train_known.contains(triple)
    }

    /// Instances of `concept` according to training instanceOf triples.
    pub fn members(&self, concept: ConceptId) -> &[InstanceId] {
        &self.members[concept.index()]
    }

    /// Concepts of `instance` according to training instanceOf triples.
    pub fn concepts_of(&self, instance: InstanceId) -> &[ConceptId] {
        &self.concepts_of[instance.index()]
    }

    pub fn super_concepts(&self, concept: ConceptId) -> &[ConceptId] {
        &self.supers[concept.index()]
    }

    pub fn sub_concepts(&self, concept: ConceptId) -> &[ConceptId] {
        &self.subs[concept.index()]
    }

    /// Valid/test entities that never occur in the training split.
    pub fn coverage(&self) -> CoverageReport {
        let mut seen_inst = vec![false; self.num_instances()];
        let mut seen_conc = vec![false; self.num_concepts()];
        mark_seen(&self.train, &mut seen_inst, &mut seen_conc);
        let mut report = CoverageReport::default();
        for (split, target) in [
            (&self.valid, &mut report.valid),
            (&self.test, &mut report.test),
        ] {
            let mut inst = HashSet::new();
            let mut conc = HashSet::new();
            for t in split.iter() {
                let (is, cs) = endpoints(&t);
                inst.extend(is.into_iter().flatten().filter(|i| !seen_inst[i.index()]));
                conc.extend(cs.into_iter().flatten().filter(|c| !seen_conc[c.index()]));
            }
            target.unseen_instances = inst.len();
            target.unseen_concepts = conc.len();
        }
        report
    }
}

fn check_ids(t: &Triple, ni: usize, nc: usize, nr: usize) {
    let ok = match t {
        Triple::Relational(t) => {
            t.head.index() < ni && t.tail.index() < ni && t.relation.index() < nr
        }
        Triple::InstanceOf(t) => t.instance.index() < ni && t.concept.index() < nc,
        Triple::SubClassOf(t) => t.sub.index() < nc && t.sup.index() < nc,
    };
    assert!(ok, "triple {t} outside vocabulary ({ni} instances, {nc} concepts, {nr} relations)");
}

type Endpoints = ([Option<InstanceId>; 2], [Option<ConceptId>; 2]);

fn endpoints(t: &Triple) -> Endpoints {
    match *t {
        Triple::Relational(t) => ([Some(t.head), Some(t.tail)], [None, None]),
        Triple::InstanceOf(t) => ([Some(t.instance), None], [Some(t.concept), None]),
        Triple::SubClassOf(t) => ([None, None], [Some(t.sub), Some(t.sup)]),
    }
}

fn mark_seen(set: &TripleSet, inst: &mut [bool], conc: &mut [bool]) {
    for t in set.iter() {
        let (is, cs) = endpoints(&t);
        for i in is.into_iter().flatten() {
            inst[i.index()] = true;
        }
        for c in cs.into_iter().flatten() {
            conc[c.index()] = true;
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SplitCoverage {
    pub unseen_instances: usize,
    pub unseen_concepts: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    pub valid: SplitCoverage,
    pub test: SplitCoverage,
}

// ---------------------------------------------------------------------------
// File IO

pub const INSTANCE_VOCAB_FILE: &str = "instance2id.txt";
pub const CONCEPT_VOCAB_FILE: &str = "concept2id.txt";
pub const RELATION_VOCAB_FILE: &str = "relation2id.txt";

/// File name for one kind of triple in one split, e.g. `instanceOf2id_valid.txt`.
/// `suffix` distinguishes auxiliary files such as persisted negatives.
pub fn triple_file_name(kind: TripleKind, split: SplitName, suffix: &str) -> String {
    let stem = match kind {
        TripleKind::Relational => "triple2id",
        TripleKind::InstanceOf => "instanceOf2id",
        TripleKind::SubClassOf => "subClassOf2id",
    };
    format!("{stem}_{}{suffix}.txt", split.as_str())
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Data lines of a counted file: skips the header, blank lines and yields (1-based line, text).
fn counted_lines<'a>(
    path: &Path,
    text: &'a str,
) -> Result<(usize, impl Iterator<Item = (usize, &'a str)>)> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| Error::Parse {
            path: path.to_owned(),
            line: 1,
            message: "missing count header".into(),
        })?;
    let count = header.1.trim().parse::<usize>().map_err(|_| Error::Parse {
        path: path.to_owned(),
        line: header.0 + 1,
        message: format!("count header is not an integer: {:?}", header.1),
    })?;
    let rest = lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l));
    Ok((count, rest))
}

fn read_vocab(dir: &Path, file: &str) -> Result<Vocab> {
    let path = dir.join(file);
    let text = read_to_string(&path)?;
    let (count, lines) = counted_lines(&path, &text)?;
    let mut slots: Vec<Option<String>> = vec![None; count];
    for (line_no, line) in lines {
        let (name, id) = line
            .rsplit_once('\t')
            .or_else(|| line.trim_end().rsplit_once(char::is_whitespace))
            .ok_or_else(|| Error::Parse {
                path: path.clone(),
                line: line_no,
                message: "expected \"name<TAB>id\"".into(),
            })?;
        let id: u64 = id.trim().parse().map_err(|_| Error::Parse {
            path: path.clone(),
            line: line_no,
            message: format!("id is not an integer: {id:?}"),
        })?;
        if id as usize >= count {
            return Err(Error::Range {
                path,
                line: line_no,
                what: "vocabulary",
                id,
                declared: count,
            });
        }
        let slot = &mut slots[id as usize];
        if slot.is_some() {
            return Err(Error::Parse {
                path,
                line: line_no,
                message: format!("id {id} assigned twice"),
            });
        }
        *slot = Some(name.to_owned());
    }
    let mut names = Vec::with_capacity(count);
    for (id, slot) in slots.into_iter().enumerate() {
        names.push(slot.ok_or_else(|| Error::Parse {
            path: path.clone(),
            line: 1,
            message: format!("header declares {count} entries but id {id} is missing"),
        })?);
    }
    let vocab = Vocab::from_names(names);
    Ok(vocab)
}

struct Limits {
    instances: usize,
    concepts: usize,
    relations: usize,
}

fn parse_ids<const N: usize>(path: &Path, line_no: usize, line: &str) -> Result<[u64; N]> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != N {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: line_no,
            message: format!("expected {N} fields, found {}", fields.len()),
        });
    }
    let mut out = [0u64; N];
    for (slot, field) in out.iter_mut().zip(fields) {
        *slot = field.parse().map_err(|_| Error::Parse {
            path: path.to_owned(),
            line: line_no,
            message: format!("field is not a non-negative integer: {field:?}"),
        })?;
    }
    Ok(out)
}

fn check_range(
    path: &Path,
    line: usize,
    what: &'static str,
    id: u64,
    declared: usize,
) -> Result<u32> {
    if id as usize >= declared {
        return Err(Error::Range {
            path: path.to_owned(),
            line,
            what,
            id,
            declared,
        });
    }
    Ok(id as u32)
}

fn read_triples_into(
    path: &Path,
    kind: TripleKind,
    limits: &Limits,
    out: &mut TripleSet,
) -> Result<()> {
    let text = read_to_string(path)?;
    let (count, lines) = counted_lines(path, &text)?;
    let mut seen = 0usize;
    for (line_no, line) in lines {
        seen += 1;
        match kind {
            TripleKind::Relational => {
                let [h, t, r] = parse_ids::<3>(path, line_no, line)?;
                out.relational.push(RelationalTriple {
                    head: InstanceId(check_range(path, line_no, "instance", h, limits.instances)?),
                    tail: InstanceId(check_range(path, line_no, "instance", t, limits.instances)?),
                    relation: RelationId(check_range(path, line_no, "relation", r, limits.relations)?),
                });
            }
            TripleKind::InstanceOf => {
                let [i, c] = parse_ids::<2>(path, line_no, line)?;
                out.instance_of.push(InstanceOfTriple {
                    instance: InstanceId(check_range(path, line_no, "instance", i, limits.instances)?),
                    concept: ConceptId(check_range(path, line_no, "concept", c, limits.concepts)?),
                });
            }
            TripleKind::SubClassOf => {
                let [a, b] = parse_ids::<2>(path, line_no, line)?;
                out.sub_class_of.push(SubClassOfTriple {
                    sub: ConceptId(check_range(path, line_no, "concept", a, limits.concepts)?),
                    sup: ConceptId(check_range(path, line_no, "concept", b, limits.concepts)?),
                });
            }
        }
    }
    if seen != count {
        log::warn!(
            "{}: header declares {count} records but {seen} were read",
            path.display()
        );
    }
    Ok(())
}

/// Reads one split of triples with the given file suffix (empty for the
/// regular files). Returns `None` when none of the three files exist.
pub fn load_triple_files(
    dir: &Path,
    kg: &KnowledgeGraph,
    split: SplitName,
    suffix: &str,
) -> Result<Option<TripleSet>> {
    let limits = Limits {
        instances: kg.num_instances(),
        concepts: kg.num_concepts(),
        relations: kg.num_relations(),
    };
    let mut set = TripleSet::default();
    let mut any = false;
    for kind in TripleKind::ALL {
        let path = dir.join(triple_file_name(kind, split, suffix));
        if path.exists() {
            any = true;
            read_triples_into(&path, kind, &limits, &mut set)?;
        }
    }
    Ok(any.then_some(set))
}

/// Loads a graph directory. All nine triple files and the three vocabularies are required.
pub fn load_kg(dir: impl AsRef<Path>) -> Result<KnowledgeGraph> {
    let dir = dir.as_ref();
    let instances = read_vocab(dir, INSTANCE_VOCAB_FILE)?;
    let concepts = read_vocab(dir, CONCEPT_VOCAB_FILE)?;
    let relations = read_vocab(dir, RELATION_VOCAB_FILE)?;
    let limits = Limits {
        instances: instances.len(),
        concepts: concepts.len(),
        relations: relations.len(),
    };
    let mut splits: [TripleSet; 3] = Default::default();
    for (split, set) in SplitName::ALL.into_iter().zip(splits.iter_mut()) {
        for kind in TripleKind::ALL {
            let path = dir.join(triple_file_name(kind, split, ""));
            read_triples_into(&path, kind, &limits, set)?;
        }
    }
    let [train, valid, test] = splits;
    Ok(KnowledgeGraph::new(
        instances, concepts, relations, train, valid, test,
    ))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_vocab(dir: &Path, file: &str, vocab: &Vocab) -> Result<()> {
    let path = dir.join(file);
    let mut w = create(&path)?;
    let io = |e| Error::io(&path, e);
    writeln!(w, "{}", vocab.len()).map_err(io)?;
    for (id, name) in vocab.names().iter().enumerate() {
        writeln!(w, "{name}\t{id}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes one split's three triple files, canonically sorted.
pub fn save_triple_files(dir: &Path, set: &TripleSet, split: SplitName, suffix: &str) -> Result<()> {
    let mut set = set.clone();
    set.sort_canonical();
    for kind in TripleKind::ALL {
        let path: PathBuf = dir.join(triple_file_name(kind, split, suffix));
        let mut w = create(&path)?;
        let io = |e| Error::io(&path, e);
        writeln!(w, "{}", set.len_of(kind)).map_err(io)?;
        match kind {
            TripleKind::Relational => {
                for t in &set.relational {
                    writeln!(w, "{}\t{}\t{}", t.head, t.tail, t.relation).map_err(io)?;
                }
            }
            TripleKind::InstanceOf => {
                for t in &set.instance_of {
                    writeln!(w, "{}\t{}", t.instance, t.concept).map_err(io)?;
                }
            }
            TripleKind::SubClassOf => {
                for t in &set.sub_class_of {
                    writeln!(w, "{}\t{}", t.sub, t.sup).map_err(io)?;
                }
            }
        }
        w.flush().map_err(io)?;
    }
    Ok(())
}

/// Writes the full directory layout, creating `dir` if needed.
pub fn save_kg(kg: &KnowledgeGraph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_vocab(dir, INSTANCE_VOCAB_FILE, kg.instances())?;
    write_vocab(dir, CONCEPT_VOCAB_FILE, kg.concepts())?;
    write_vocab(dir, RELATION_VOCAB_FILE, kg.relations())?;
    for split in SplitName::ALL {
        save_triple_files(dir, kg.split(split), split, "")?;
    }
    Ok(())
}
