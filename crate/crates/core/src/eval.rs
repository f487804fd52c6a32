//! Link prediction and triple classification.

use std::collections::BTreeMap;
use std::fmt;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::EmbeddingSpace;
use crate::kg::{InstanceId, KnowledgeGraph, RelationId, RelationalTriple, Triple, TripleKind, TripleSet};
use crate::rng::rng_for;
use crate::sampling::{NegativeSampler, PoolMode, Reject, SamplingStrategy, Side};

// ---------------------------------------------------------------------------
// Link prediction

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankResult {
    pub triple: RelationalTriple,
    pub side: Side,
    pub raw_rank: usize,
    pub filter_rank: usize,
}

/// Rank of the true entity given how many candidates score strictly better
/// and how many tie with it: `1 + better + tied/2`, halves rounded up.
#[inline]
pub fn tie_rank(better: usize, tied: usize) -> usize {
    1 + better + tied.div_ceil(2)
}

fn replace(t: RelationalTriple, side: Side, e: InstanceId) -> RelationalTriple {
    let mut c = t;
    match side {
        Side::Head => c.head = e,
        Side::Tail => c.tail = e,
    }
    c
}

/// Ranks the true entity of `t` at `side` against every instance.
pub fn rank_triple(space: &EmbeddingSpace, kg: &KnowledgeGraph, t: RelationalTriple, side: Side) -> RankResult {
    let r = space.relation(t.relation);
    let score_with = |e: InstanceId| match side {
        Side::Head => crate::geometry::score_relational(space.instance(e), r, space.instance(t.tail)),
        Side::Tail => crate::geometry::score_relational(space.instance(t.head), r, space.instance(e)),
    };
    let truth = match side {
        Side::Head => t.head,
        Side::Tail => t.tail,
    };
    let true_score = score_with(truth);
    let (mut better, mut tied, mut f_better, mut f_tied) = (0usize, 0usize, 0usize, 0usize);
    for e in (0..kg.num_instances() as u32).map(InstanceId) {
        if e == truth {
            continue;
        }
        let s = score_with(e);
        let is_better = s < true_score;
        let is_tied = s == true_score;
        if !(is_better || is_tied) {
            continue;
        }
        let known = kg.contains(&Triple::Relational(replace(t, side, e)));
        if is_better {
            better += 1;
            f_better += usize::from(!known);
        } else {
            tied += 1;
            f_tied += usize::from(!known);
        }
    }
    RankResult {
        triple: t,
        side,
        raw_rank: tie_rank(better, tied),
        filter_rank: tie_rank(f_better, f_tied),
    }
}

/// Percentages of rankings at or under 1, 3 and 10.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Hits {
    pub at1: f64,
    pub at3: f64,
    pub at10: f64,
}

impl Hits {
    fn from_ranks(ranks: impl Iterator<Item = usize> + Clone, n: usize) -> Self {
        let pct = |k: usize| 100.0 * ranks.clone().filter(|&r| r <= k).count() as f64 / n as f64;
        Self {
            at1: pct(1),
            at3: pct(3),
            at10: pct(10),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkPredictionReport {
    pub rankings: usize,
    pub mrr_raw: f64,
    pub mrr_filter: f64,
    pub hits_raw: Hits,
    pub hits_filter: Hits,
}

impl LinkPredictionReport {
    pub fn from_ranks(ranks: &[RankResult]) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::Eval("link prediction needs at least one test triple".into()));
        }
        let n = ranks.len();
        let mrr = |f: fn(&RankResult) -> usize| ranks.iter().map(|r| 1.0 / f(r) as f64).sum::<f64>() / n as f64;
        Ok(Self {
            rankings: n,
            mrr_raw: mrr(|r| r.raw_rank),
            mrr_filter: mrr(|r| r.filter_rank),
            hits_raw: Hits::from_ranks(ranks.iter().map(|r| r.raw_rank), n),
            hits_filter: Hits::from_ranks(ranks.iter().map(|r| r.filter_rank), n),
        })
    }
}

/// Ranks head and tail of every triple. `threads > 1` ranks in parallel; the
/// result order is always head-then-tail per triple in input order.
pub fn link_prediction(
    space: &EmbeddingSpace,
    kg: &KnowledgeGraph,
    triples: &[RelationalTriple],
    threads: usize,
) -> Result<(LinkPredictionReport, Vec<RankResult>)> {
    if triples.is_empty() {
        return Err(Error::Eval("link prediction needs at least one test triple".into()));
    }
    let both = |t: &RelationalTriple| [rank_triple(space, kg, *t, Side::Head), rank_triple(space, kg, *t, Side::Tail)];
    let ranks: Vec<RankResult> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Eval(format!("thread pool: {e}")))?;
        pool.install(|| triples.par_iter().flat_map_iter(both).collect())
    } else {
        triples.iter().flat_map(both).collect()
    };
    Ok((LinkPredictionReport::from_ranks(&ranks)?, ranks))
}

/// CSV of per-ranking results (`head,relation,tail,side,raw_rank,filter_rank`).
pub fn ranks_csv(ranks: &[RankResult]) -> String {
    let mut out = String::from("head,relation,tail,side,raw_rank,filter_rank\n");
    for r in ranks {
        let side = match r.side {
            Side::Head => "head",
            Side::Tail => "tail",
        };
        out.push_str(&format!(
            "{},{},{},{side},{},{}\n",
            r.triple.head, r.triple.relation, r.triple.tail, r.raw_rank, r.filter_rank
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Triple classification

/// Which threshold a triple is judged by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ThresholdKey {
    Relation(RelationId),
    InstanceOf,
    SubClassOf,
}

impl ThresholdKey {
    pub fn of(t: &Triple) -> Self {
        match t {
            Triple::Relational(t) => ThresholdKey::Relation(t.relation),
            Triple::InstanceOf(_) => ThresholdKey::InstanceOf,
            Triple::SubClassOf(_) => ThresholdKey::SubClassOf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub delta: f64,
    /// Validation accuracy at `delta` (fraction), or `None` for a fallback.
    pub valid_accuracy: Option<f64>,
    /// True when there was no validation data and `delta` is the global median.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub relational: Vec<Threshold>,
    pub instance_of: Threshold,
    pub sub_class_of: Threshold,
}

impl ThresholdTable {
    pub fn get(&self, key: ThresholdKey) -> &Threshold {
        match key {
            ThresholdKey::Relation(r) => &self.relational[r.index()],
            ThresholdKey::InstanceOf => &self.instance_of,
            ThresholdKey::SubClassOf => &self.sub_class_of,
        }
    }
}

/// The threshold maximizing accuracy of the rule `positive iff score < delta`.
///
/// Candidates are the midpoints between consecutive distinct scores, plus one
/// value below the minimum and one above the maximum. Ties go to the smallest
/// candidate. Returns `(delta, accuracy)` or `None` without any scores.
pub fn best_threshold(positives: &[f64], negatives: &[f64]) -> Option<(f64, f64)> {
    let n = positives.len() + negatives.len();
    if n == 0 {
        return None;
    }
    let mut scored: Vec<(f64, bool)> = positives
        .iter()
        .map(|&s| (s, true))
        .chain(negatives.iter().map(|&s| (s, false)))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let lo = scored[0].0;
    let hi = scored[n - 1].0;

    // Below every score: everything negative.
    let mut correct = negatives.len();
    let mut best = (lo - lo.abs().max(1.0), correct);
    let mut i = 0;
    while i < n {
        // Move the whole tie group at scored[i].0 to the positive side.
        let s = scored[i].0;
        while i < n && scored[i].0 == s {
            if scored[i].1 {
                correct += 1;
            } else {
                correct -= 1;
            }
            i += 1;
        }
        let delta = if i < n {
            s + (scored[i].0 - s) / 2.0
        } else {
            hi + hi.abs().max(1.0)
        };
        if correct > best.1 {
            best = (delta, correct);
        }
    }
    Some((best.0, best.1 as f64 / n as f64))
}

fn scores_by_key(space: &EmbeddingSpace, set: &TripleSet) -> BTreeMap<ThresholdKey, Vec<f64>> {
    let mut map: BTreeMap<ThresholdKey, Vec<f64>> = BTreeMap::new();
    for t in set.iter() {
        map.entry(ThresholdKey::of(&t)).or_default().push(space.score(&t));
    }
    map
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        (values[m - 1] + values[m]) / 2.0
    }
}

/// Fits one threshold per relation (and one each for instanceOf and
/// subClassOf) on labelled validation triples.
pub fn fit_thresholds(
    space: &EmbeddingSpace,
    kg: &KnowledgeGraph,
    positives: &TripleSet,
    negatives: &TripleSet,
) -> ThresholdTable {
    let pos = scores_by_key(space, positives);
    let neg = scores_by_key(space, negatives);
    let mut all: Vec<f64> = pos.values().chain(neg.values()).flatten().copied().collect();
    let global_median = median(&mut all);
    let empty = Vec::new();
    let fit = |key: ThresholdKey| {
        let p = pos.get(&key).unwrap_or(&empty);
        let n = neg.get(&key).unwrap_or(&empty);
        match best_threshold(p, n) {
            Some((delta, acc)) => Threshold {
                delta,
                valid_accuracy: Some(acc),
                fallback: false,
            },
            None => Threshold {
                delta: global_median,
                valid_accuracy: None,
                fallback: true,
            },
        }
    };
    ThresholdTable {
        relational: (0..kg.num_relations() as u32)
            .map(|r| fit(ThresholdKey::Relation(RelationId(r))))
            .collect(),
        instance_of: fit(ThresholdKey::InstanceOf),
        sub_class_of: fit(ThresholdKey::SubClassOf),
    }
}

/// `true` (positive) iff the triple's score is strictly below its threshold.
pub fn classify(space: &EmbeddingSpace, thresholds: &ThresholdTable, t: &Triple) -> bool {
    space.score(t) < thresholds.get(ThresholdKey::of(t)).delta
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn metrics(&self) -> ClassificationMetrics {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let accuracy = ratio(self.tp + self.tn, self.total());
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassificationMetrics {
            count: self.total(),
            accuracy: 100.0 * accuracy,
            precision: 100.0 * precision,
            recall: 100.0 * recall,
            f1: 100.0 * f1,
            confusion: *self,
        }
    }
}

/// Percentages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub count: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub relational: Option<ClassificationMetrics>,
    pub instance_of: Option<ClassificationMetrics>,
    pub sub_class_of: Option<ClassificationMetrics>,
}

impl ClassificationReport {
    pub fn get(&self, kind: TripleKind) -> Option<&ClassificationMetrics> {
        match kind {
            TripleKind::Relational => self.relational.as_ref(),
            TripleKind::InstanceOf => self.instance_of.as_ref(),
            TripleKind::SubClassOf => self.sub_class_of.as_ref(),
        }
    }
}

/// Classifies labelled triples and tallies metrics per kind.
pub fn evaluate_classification(
    space: &EmbeddingSpace,
    thresholds: &ThresholdTable,
    positives: &TripleSet,
    negatives: &TripleSet,
) -> ClassificationReport {
    let mut per_kind = [Confusion::default(); 3];
    let slot = |k: TripleKind| match k {
        TripleKind::Relational => 0,
        TripleKind::InstanceOf => 1,
        TripleKind::SubClassOf => 2,
    };
    for (set, label) in [(positives, true), (negatives, false)] {
        for t in set.iter() {
            per_kind[slot(t.kind())].record(classify(space, thresholds, &t), label);
        }
    }
    let m = |c: &Confusion| (c.total() > 0).then(|| c.metrics());
    ClassificationReport {
        relational: m(&per_kind[0]),
        instance_of: m(&per_kind[1]),
        sub_class_of: m(&per_kind[2]),
    }
}

/// One negative per positive, in the same order, corrupting a uniformly
/// chosen side. Negatives avoid every known triple. The stream is fixed by
/// `seed` and `label` (use the split name) so reruns give the same set.
pub fn classification_negatives(
    kg: &KnowledgeGraph,
    positives: &TripleSet,
    seed: u64,
    label: &str,
    pool: PoolMode,
) -> Result<TripleSet> {
    let sampler = NegativeSampler::new(kg, SamplingStrategy::Unif, pool, Reject::Known);
    let mut rng: ChaCha8Rng = rng_for(seed, &format!("classification-negatives/{label}"));
    let mut out = TripleSet::default();
    for t in positives.iter() {
        let (neg, _side) = sampler.corrupt(&t, &mut rng)?;
        out.push(neg);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link_prediction: Option<LinkPredictionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationReport>,
    /// Threshold keys that fell back to the global median.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fallback_thresholds: Vec<String>,
}

impl EvalReport {
    pub fn fallbacks(table: &ThresholdTable, kg: &KnowledgeGraph) -> Vec<String> {
        let mut out: Vec<String> = table
            .relational
            .iter()
            .enumerate()
            .filter(|(_, t)| t.fallback)
            .map(|(r, _)| kg.relations().name(r as u32).to_owned())
            .collect();
        if table.instance_of.fallback {
            out.push("instanceOf".into());
        }
        if table.sub_class_of.fallback {
            out.push("subClassOf".into());
        }
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(lp) = &self.link_prediction {
            writeln!(f, "Link prediction ({} rankings)", lp.rankings)?;
            writeln!(f, "{:<8} {:>8} {:>8} {:>8} {:>8}", "setting", "MRR", "Hits@1", "Hits@3", "Hits@10")?;
            for (name, mrr, h) in [("raw", lp.mrr_raw, lp.hits_raw), ("filter", lp.mrr_filter, lp.hits_filter)] {
                writeln!(f, "{name:<8} {mrr:>8.3} {:>8.1} {:>8.1} {:>8.1}", h.at1, h.at3, h.at10)?;
            }
        }
        if let Some(tc) = &self.classification {
            if self.link_prediction.is_some() {
                writeln!(f)?;
            }
            writeln!(f, "Triple classification (%)")?;
            writeln!(
                f,
                "{:<12} {:>6} {:>8} {:>9} {:>7} {:>7}",
                "kind", "n", "accuracy", "precision", "recall", "F1"
            )?;
            for kind in TripleKind::ALL {
                if let Some(m) = tc.get(kind) {
                    writeln!(
                        f,
                        "{:<12} {:>6} {:>8.1} {:>9.1} {:>7.1} {:>7.1}",
                        kind.name(),
                        m.count,
                        m.accuracy,
                        m.precision,
                        m.recall,
                        m.f1
                    )?;
                }
            }
        }
        if !self.fallback_thresholds.is_empty() {
            writeln!(f, "thresholds defaulted to the median: {}", self.fallback_thresholds.join(", "))?;
        }
        Ok(())
    }
}
