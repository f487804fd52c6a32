//! Margin-ranking training with plain SGD.
//!
//! The loss is the sum of three hinge losses, one per triple kind, each
//! comparing a positive triple with one freshly sampled negative:
//! `[margin + f(pos) - f(neg)]_+`. Gradients are computed for a whole batch
//! at the pre-step parameters, summed per parameter row, and applied at once.
//! After the step, touched vectors are projected back into the unit ball and
//! radii are clamped to [`RADIUS_FLOOR`].

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    classify_with_distance, distance, project_to_unit_ball, EmbeddingSpace, ModelKind,
    SpherePosition, RADIUS_FLOOR,
};
use crate::kg::{ConceptId, InstanceId, KnowledgeGraph, Triple, TripleKind};
use crate::rng::{rng_for, worker_rng};
use crate::sampling::{NegativeSampler, PoolMode, Reject, SamplingStrategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dim: usize,
    pub learning_rate: f64,
    pub margin_relational: f64,
    pub margin_instance_of: f64,
    pub margin_sub_class_of: f64,
    pub sampling: SamplingStrategy,
    pub pool: PoolMode,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub model: ModelKind,
    /// 1 = deterministic single-threaded; more shards each batch over a rayon pool.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            learning_rate: 0.001,
            margin_relational: 1.0,
            margin_instance_of: 0.1,
            margin_sub_class_of: 1.0,
            sampling: SamplingStrategy::Bern,
            pool: PoolMode::Typed,
            epochs: 1000,
            batch_size: 512,
            seed: 42,
            model: ModelKind::TransC,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_owned()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be a positive finite number");
        }
        for (name, m) in [
            ("margin-l", self.margin_relational),
            ("margin-e", self.margin_instance_of),
            ("margin-c", self.margin_sub_class_of),
        ] {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {m}")));
            }
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.threads == 0 {
            return bad("threads must be at least 1");
        }
        Ok(())
    }

    /// Margin for a kind. The baseline has a single margin for every kind.
    pub fn margin(&self, kind: TripleKind) -> f64 {
        match (self.model, kind) {
            (ModelKind::TransE, _) | (_, TripleKind::Relational) => self.margin_relational,
            (ModelKind::TransC, TripleKind::InstanceOf) => self.margin_instance_of,
            (ModelKind::TransC, TripleKind::SubClassOf) => self.margin_sub_class_of,
        }
    }
}

/// `max(0, margin + positive - negative)`.
#[inline]
pub fn hinge(positive_score: f64, negative_score: f64, margin: f64) -> f64 {
    (margin + (positive_score - negative_score)).max(0.0)
}

/// Random init: coordinates uniform in `[-6/sqrt(k), 6/sqrt(k)]`, rows
/// projected into the unit ball, radii `0.5 * U(0,1) + RADIUS_FLOOR`.
pub fn init_space<R: Rng + ?Sized>(
    num_instances: usize,
    num_concepts: usize,
    num_relations: usize,
    config: &TrainConfig,
    rng: &mut R,
) -> EmbeddingSpace {
    let dim = config.dim;
    let mut space = EmbeddingSpace::zeros(config.model, dim, num_instances, num_concepts, num_relations);
    let bound = 6.0 / (dim as f64).sqrt();
    for table in [&mut space.instances, &mut space.relations, &mut space.centers] {
        for x in table.iter_mut() {
            *x = rng.gen_range(-bound..=bound);
        }
        for row in table.chunks_exact_mut(dim) {
            project_to_unit_ball(row);
        }
    }
    for m in space.radii.iter_mut() {
        *m = 0.5 * rng.gen::<f64>() + RADIUS_FLOOR;
    }
    space
}

/// One learned parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    Instance(InstanceId),
    /// Row of the relation table (instance relations, then the baseline's isA translations).
    Relation(usize),
    Center(ConceptId),
    Radius(ConceptId),
}

impl EmbeddingSpace {
    /// Mutable view of a parameter block; radii are length-1 slices.
    pub fn param_mut(&mut self, p: Param) -> &mut [f64] {
        let dim = self.dim;
        match p {
            Param::Instance(i) => self.instance_mut(i),
            Param::Relation(r) => &mut self.relations[r * dim..(r + 1) * dim],
            Param::Center(c) => self.center_mut(c),
            Param::Radius(c) => std::slice::from_mut(&mut self.radii[c.index()]),
        }
    }

    pub fn param(&self, p: Param) -> &[f64] {
        let dim = self.dim;
        match p {
            Param::Instance(i) => self.instance(i),
            Param::Relation(r) => &self.relations[r * dim..(r + 1) * dim],
            Param::Center(c) => self.sphere(c).center,
            Param::Radius(c) => std::slice::from_ref(&self.radii[c.index()]),
        }
    }
}

/// Sparse gradient accumulator keyed by parameter block.
#[derive(Debug, Default, Clone)]
pub struct Gradient {
    blocks: HashMap<Param, Vec<f64>>,
}

impl Gradient {
    fn slot(&mut self, p: Param, dim: usize) -> &mut [f64] {
        let len = if matches!(p, Param::Radius(_)) { 1 } else { dim };
        self.blocks.entry(p).or_insert_with(|| vec![0.0; len])
    }

    fn add_vec(&mut self, p: Param, dim: usize, scale: f64, v: &[f64]) {
        for (g, x) in self.slot(p, dim).iter_mut().zip(v) {
            *g += scale * x;
        }
    }

    fn add_scalar(&mut self, p: Param, scale: f64) {
        self.slot(p, 1)[0] += scale;
    }

    pub fn get(&self, p: Param) -> Option<&[f64]> {
        self.blocks.get(&p).map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    fn is_finite(&self) -> bool {
        self.blocks.values().all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Adds `other` in a fixed order so merges are reproducible.
    fn merge(&mut self, other: Gradient) {
        let mut entries: Vec<_> = other.blocks.into_iter().collect();
        entries.sort_unstable_by_key(|(p, _)| *p);
        for (p, v) in entries {
            match self.blocks.get_mut(&p) {
                Some(dst) => dst.iter_mut().zip(&v).for_each(|(a, b)| *a += b),
                None => {
                    self.blocks.insert(p, v);
                }
            }
        }
    }
}

/// Unit vector of `a - b`, or zeros when the points coincide.
fn unit_difference(a: &[f64], b: &[f64]) -> Vec<f64> {
    let d = distance(a, b);
    if d > 0.0 {
        a.iter().zip(b).map(|(x, y)| (x - y) / d).collect()
    } else {
        vec![0.0; a.len()]
    }
}

fn add_translation_gradient(g: &mut Gradient, space: &EmbeddingSpace, head: Param, rel: Param, tail: Param, scale: f64) {
    let dim = space.dim;
    let residual: Vec<f64> = space
        .param(head)
        .iter()
        .zip(space.param(rel))
        .zip(space.param(tail))
        .map(|((h, r), t)| 2.0 * (h + r - t))
        .collect();
    g.add_vec(head, dim, scale, &residual);
    g.add_vec(rel, dim, scale, &residual);
    g.add_vec(tail, dim, -scale, &residual);
}

/// Adds `scale * d score(triple) / d params` to `g`.
///
/// Subgradient conventions: the gradient of `||x||` at zero is zero, and the
/// subClassOf case is taken from the current parameters.
pub fn add_score_gradient(g: &mut Gradient, space: &EmbeddingSpace, triple: &Triple, scale: f64) {
    let dim = space.dim;
    match (space.model, triple) {
        (_, Triple::Relational(t)) => add_translation_gradient(
            g,
            space,
            Param::Instance(t.head),
            Param::Relation(t.relation.index()),
            Param::Instance(t.tail),
            scale,
        ),
        (ModelKind::TransC, Triple::InstanceOf(t)) => {
            let u = unit_difference(space.instance(t.instance), space.sphere(t.concept).center);
            g.add_vec(Param::Instance(t.instance), dim, scale, &u);
            g.add_vec(Param::Center(t.concept), dim, -scale, &u);
            g.add_scalar(Param::Radius(t.concept), -scale);
        }
        (ModelKind::TransC, Triple::SubClassOf(t)) => {
            let (si, sj) = (space.sphere(t.sub), space.sphere(t.sup));
            let d = distance(si.center, sj.center);
            if classify_with_distance(d, si.radius, sj.radius) != SpherePosition::Contains {
                let u = unit_difference(si.center, sj.center);
                g.add_vec(Param::Center(t.sub), dim, scale, &u);
                g.add_vec(Param::Center(t.sup), dim, -scale, &u);
            }
            g.add_scalar(Param::Radius(t.sub), scale);
            g.add_scalar(Param::Radius(t.sup), -scale);
        }
        (ModelKind::TransE, Triple::InstanceOf(t)) => add_translation_gradient(
            g,
            space,
            Param::Instance(t.instance),
            Param::Relation(space.isa_row(false)),
            Param::Center(t.concept),
            scale,
        ),
        (ModelKind::TransE, Triple::SubClassOf(t)) => add_translation_gradient(
            g,
            space,
            Param::Center(t.sub),
            Param::Relation(space.isa_row(true)),
            Param::Center(t.sup),
            scale,
        ),
    }
}

/// A positive triple and the negative sampled for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampledPair {
    pub positive: Triple,
    pub negative: Triple,
}

/// Per-kind hinge totals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub instance_of: f64,
    pub sub_class_of: f64,
    pub relational: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.instance_of + self.sub_class_of + self.relational
    }

    fn add(&mut self, kind: TripleKind, v: f64) {
        match kind {
            TripleKind::InstanceOf => self.instance_of += v,
            TripleKind::SubClassOf => self.sub_class_of += v,
            TripleKind::Relational => self.relational += v,
        }
    }

    fn merge(&mut self, other: LossBreakdown) {
        self.instance_of += other.instance_of;
        self.sub_class_of += other.sub_class_of;
        self.relational += other.relational;
    }
}

/// Hinge loss of one pair at the given parameters.
pub fn pair_loss(space: &EmbeddingSpace, pair: &SampledPair, config: &TrainConfig) -> f64 {
    hinge(
        space.score(&pair.positive),
        space.score(&pair.negative),
        config.margin(pair.positive.kind()),
    )
}

fn shard_gradient(space: &EmbeddingSpace, pairs: &[SampledPair], config: &TrainConfig) -> Result<(Gradient, LossBreakdown)> {
    let mut grad = Gradient::default();
    let mut loss = LossBreakdown::default();
    for pair in pairs {
        let (pos, neg) = (space.score(&pair.positive), space.score(&pair.negative));
        if !(pos.is_finite() && neg.is_finite()) {
            return Err(Error::NonFinite {
                triple: pair.positive.to_string(),
                detail: format!("scores {pos} / {neg} against negative {}", pair.negative),
            });
        }
        let l = hinge(pos, neg, config.margin(pair.positive.kind()));
        if l > 0.0 {
            loss.add(pair.positive.kind(), l);
            let mut local = Gradient::default();
            add_score_gradient(&mut local, space, &pair.positive, 1.0);
            add_score_gradient(&mut local, space, &pair.negative, -1.0);
            if !local.is_finite() {
                return Err(Error::NonFinite {
                    triple: pair.positive.to_string(),
                    detail: format!("gradient against negative {}", pair.negative),
                });
            }
            grad.merge(local);
        }
    }
    Ok((grad, loss))
}

/// One SGD step on a batch. Gradients of all active hinges are summed at the
/// current parameters, applied with step `learning_rate`, then constraints are
/// restored on every touched block. Returns the batch's hinge totals.
pub fn step_batch(space: &mut EmbeddingSpace, batch: &[SampledPair], config: &TrainConfig) -> Result<LossBreakdown> {
    let (grad, loss) = if config.threads > 1 && batch.len() > 1 {
        let chunk = batch.len().div_ceil(config.threads);
        let view: &EmbeddingSpace = space;
        let parts = batch
            .par_chunks(chunk)
            .map(|c| shard_gradient(view, c, config))
            .collect::<Result<Vec<_>>>()?;
        let mut grad = Gradient::default();
        let mut loss = LossBreakdown::default();
        for (g, l) in parts {
            grad.merge(g);
            loss.merge(l);
        }
        (grad, loss)
    } else {
        shard_gradient(space, batch, config)?
    };
    apply_gradient(space, &grad, config.learning_rate);
    Ok(loss)
}

/// `param -= lr * grad` for each block, then projection / radius clamp.
pub fn apply_gradient(space: &mut EmbeddingSpace, grad: &Gradient, lr: f64) {
    for (&p, g) in &grad.blocks {
        let block = space.param_mut(p);
        for (x, dx) in block.iter_mut().zip(g) {
            *x -= lr * dx;
        }
        match p {
            Param::Radius(_) => {
                if block[0] < RADIUS_FLOOR {
                    block[0] = RADIUS_FLOOR;
                }
            }
            _ => {
                project_to_unit_ball(block);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub space: EmbeddingSpace,
    pub epoch: usize,
    pub losses: Vec<LossBreakdown>,
}

/// Drives epochs over the shuffled union of all training triples.
pub struct Trainer<'a> {
    config: TrainConfig,
    sampler: NegativeSampler<'a>,
    triples: Vec<Triple>,
    shuffle_rng: ChaCha8Rng,
    workers: Vec<ChaCha8Rng>,
    state: TrainState,
    record: bool,
    recorded: Vec<SampledPair>,
}

impl<'a> Trainer<'a> {
    pub fn new(kg: &'a KnowledgeGraph, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut init_rng = rng_for(config.seed, "init");
        let space = init_space(
            kg.num_instances(),
            kg.num_concepts(),
            kg.num_relations(),
            &config,
            &mut init_rng,
        );
        Self::resume(
            kg,
            config,
            TrainState {
                space,
                epoch: 0,
                losses: Vec::new(),
            },
        )
    }

    /// Continues from an existing state. RNG streams restart from the seed.
    pub fn resume(kg: &'a KnowledgeGraph, config: TrainConfig, state: TrainState) -> Result<Self> {
        config.validate()?;
        if state.space.dim() != config.dim || state.space.model() != config.model {
            return Err(Error::Config("state does not match config dim/model".into()));
        }
        let sampler = NegativeSampler::new(kg, config.sampling, config.pool, Reject::Train);
        let triples: Vec<Triple> = kg.train().iter().collect();
        let workers = (0..config.threads)
            .map(|w| worker_rng(config.seed, "negatives", w))
            .collect();
        Ok(Self {
            shuffle_rng: rng_for(config.seed, "shuffle"),
            config,
            sampler,
            triples,
            workers,
            state,
            record: false,
            recorded: Vec::new(),
        })
    }

    /// Keep the pairs sampled in the most recent epoch (for inspection/tests).
    pub fn record_pairs(&mut self, on: bool) {
        self.record = on;
    }

    pub fn recorded_pairs(&self) -> &[SampledPair] {
        &self.recorded
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    fn sample_batch(&mut self, batch: &[Triple]) -> Result<Vec<SampledPair>> {
        let sampler = &self.sampler;
        let draw = |rng: &mut ChaCha8Rng, chunk: &[Triple]| -> Result<Vec<SampledPair>> {
            chunk
                .iter()
                .map(|t| {
                    let (negative, _) = sampler.corrupt(t, rng)?;
                    Ok(SampledPair { positive: *t, negative })
                })
                .collect()
        };
        if self.workers.len() == 1 {
            return draw(&mut self.workers[0], batch);
        }
        let chunk = batch.len().div_ceil(self.workers.len()).max(1);
        let parts = self
            .workers
            .par_iter_mut()
            .zip(batch.par_chunks(chunk))
            .map(|(rng, c)| draw(rng, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(parts.into_iter().flatten().collect())
    }

    pub fn run_epoch(&mut self) -> Result<LossBreakdown> {
        let mut order = std::mem::take(&mut self.triples);
        order.shuffle(&mut self.shuffle_rng);
        self.recorded.clear();
        let mut total = LossBreakdown::default();
        let mut result = Ok(());
        for batch in order.chunks(self.config.batch_size) {
            let pairs = match self.sample_batch(batch) {
                Ok(p) => p,
                Err(e) => {
                    result = Err(e);
                    break;
                }
            };
            match step_batch(&mut self.state.space, &pairs, &self.config) {
                Ok(l) => total.merge(l),
                Err(e) => {
                    result = Err(e);
                    break;
                }
            }
            if self.record {
                self.recorded.extend_from_slice(&pairs);
            }
        }
        self.triples = order;
        result?;
        self.state.epoch += 1;
        self.state.losses.push(total);
        Ok(total)
    }
}

/// Trains for `config.epochs` epochs.
pub fn train(kg: &KnowledgeGraph, config: &TrainConfig) -> Result<TrainState> {
    train_with(kg, config, |_| Ok(()))
}

/// Like [`train`], calling `on_epoch` after every epoch (e.g. to checkpoint).
pub fn train_with<F>(kg: &KnowledgeGraph, config: &TrainConfig, mut on_epoch: F) -> Result<TrainState>
where
    F: FnMut(&TrainState) -> Result<()>,
{
    let mut trainer = Trainer::new(kg, config.clone())?;
    for _ in 0..config.epochs {
        let loss = trainer.run_epoch()?;
        log::debug!("epoch {} loss {:.6}", trainer.state.epoch, loss.total());
        on_epoch(&trainer.state)?;
    }
    Ok(trainer.into_state())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{InstanceOfTriple, RelationalTriple, SubClassOfTriple, TripleSet};
    use rand::SeedableRng;

    fn cfg(dim: usize) -> TrainConfig {
        TrainConfig {
            dim,
            epochs: 0,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn hinge_examples() {
        assert_eq!(hinge(0.2, 1.5, 1.0), 0.0);
        assert!((hinge(0.5, 0.6, 1.0) - 0.9).abs() < 1e-15);
        for x in [-3.0, 0.0, 0.7, 12.5] {
            assert_eq!(hinge(x, x, 0.3), 0.3);
        }
    }

    #[test]
    fn init_respects_constraints_and_is_deterministic() {
        let config = cfg(100);
        let a = init_space(50, 10, 5, &config, &mut rng_for(3, "init"));
        let b = init_space(50, 10, 5, &config, &mut rng_for(3, "init"));
        assert!(a.satisfies_constraints());
        assert_eq!(a, b);
        let bits = |s: &EmbeddingSpace| s.instance_table().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn init_coordinates_have_zero_mean() {
        // pre-projection draws: uniform on [-b, b], variance b^2 / 3
        let dim = 100usize;
        let b = 6.0 / (dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 1_000_000;
        let mean = (0..n).map(|_| rng.gen_range(-b..=b)).sum::<f64>() / n as f64;
        let sigma = (b * b / 3.0 / n as f64).sqrt();
        assert!(mean.abs() <= 3.0 * sigma, "{mean}");
    }

    #[test]
    fn inactive_batch_leaves_state_unchanged() {
        let mut space = EmbeddingSpace::zeros(ModelKind::TransC, 2, 2, 0, 1);
        space.instance_mut(InstanceId(1)).copy_from_slice(&[0.9, 0.0]);
        // positive (0, r, 0) scores 0, negative (0, r, 1) scores 0.81 > margin 0.5
        let pair = SampledPair {
            positive: RelationalTriple::new(0, 0, 0).into(),
            negative: RelationalTriple::new(0, 0, 1).into(),
        };
        let config = TrainConfig {
            dim: 2,
            margin_relational: 0.5,
            ..TrainConfig::default()
        };
        let before = space.clone();
        let loss = step_batch(&mut space, &[pair], &config).unwrap();
        assert_eq!(loss.total(), 0.0);
        assert_eq!(space, before);
    }

    #[test]
    fn single_relational_step_matches_hand_gradient() {
        let mut space = EmbeddingSpace::zeros(ModelKind::TransC, 2, 3, 0, 1);
        space.instance_mut(InstanceId(0)).copy_from_slice(&[0.1, 0.2]);
        space.relation_mut(crate::kg::RelationId(0)).copy_from_slice(&[0.3, -0.1]);
        space.instance_mut(InstanceId(1)).copy_from_slice(&[0.2, 0.4]);
        space.instance_mut(InstanceId(2)).copy_from_slice(&[0.4, 0.1]);
        let pair = SampledPair {
            positive: RelationalTriple::new(0, 0, 1).into(),
            negative: RelationalTriple::new(0, 0, 2).into(),
        };
        let lr = 0.01;
        let config = TrainConfig {
            dim: 2,
            learning_rate: lr,
            ..TrainConfig::default()
        };
        // positive residual h + r - t = (0.2, -0.3); negative residual (0.0, 0.0)
        // d/dh = 2(0.2,-0.3) - 2(0,0); d/dr same; d/dt_pos = -2(0.2,-0.3); d/dt_neg = +2(0,0)
        let before = space.clone();
        step_batch(&mut space, &[pair], &config).unwrap();
        let expect = |p: &[f64], g: [f64; 2]| [p[0] - lr * g[0], p[1] - lr * g[1]];
        let h = expect(before.instance(InstanceId(0)), [0.4, -0.6]);
        let r = expect(before.relation(crate::kg::RelationId(0)), [0.4, -0.6]);
        let t = expect(before.instance(InstanceId(1)), [-0.4, 0.6]);
        for (got, want) in [
            (space.instance(InstanceId(0)), h),
            (space.relation(crate::kg::RelationId(0)), r),
            (space.instance(InstanceId(1)), t),
        ] {
            assert!((got[0] - want[0]).abs() < 1e-15 && (got[1] - want[1]).abs() < 1e-15, "{got:?} vs {want:?}");
        }
        assert_eq!(space.instance(InstanceId(2)), before.instance(InstanceId(2)));
    }

    #[test]
    fn steps_restore_constraints() {
        let mut space = EmbeddingSpace::zeros(ModelKind::TransC, 2, 2, 2, 1);
        space.instance_mut(InstanceId(0)).copy_from_slice(&[0.99, 0.0]);
        space.instance_mut(InstanceId(1)).copy_from_slice(&[-0.99, 0.0]);
        space.center_mut(ConceptId(0)).copy_from_slice(&[-0.99, 0.0]);
        space.set_radius(ConceptId(0), 2e-4);
        space.set_radius(ConceptId(1), 0.5);
        let pairs = [
            SampledPair {
                positive: InstanceOfTriple::new(0, 0).into(),
                negative: InstanceOfTriple::new(0, 1).into(),
            },
            SampledPair {
                positive: SubClassOfTriple::new(1, 0).into(),
                negative: SubClassOfTriple::new(0, 1).into(),
            },
            SampledPair {
                positive: RelationalTriple::new(0, 0, 1).into(),
                negative: RelationalTriple::new(1, 0, 0).into(),
            },
        ];
        let config = TrainConfig {
            dim: 2,
            learning_rate: 5.0,
            ..TrainConfig::default()
        };
        step_batch(&mut space, &pairs, &config).unwrap();
        assert!(space.satisfies_constraints());
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut space = EmbeddingSpace::zeros(ModelKind::TransC, 2, 2, 0, 1);
        space.instance_mut(InstanceId(0)).copy_from_slice(&[f64::NAN, 0.0]);
        let pair = SampledPair {
            positive: RelationalTriple::new(0, 0, 1).into(),
            negative: RelationalTriple::new(1, 0, 1).into(),
        };
        let err = step_batch(&mut space, &[pair], &cfg(2)).unwrap_err();
        assert!(err.is_numerical());
        assert!(err.to_string().contains("(i0, r0, i1)"), "{err}");
    }

    #[test]
    fn zero_epochs_returns_init() {
        let train_set = TripleSet {
            relational: vec![RelationalTriple::new(0, 0, 1)],
            ..Default::default()
        };
        let kg = KnowledgeGraph::from_counts(2, 0, 1, train_set, TripleSet::default(), TripleSet::default());
        let config = cfg(8);
        let state = train(&kg, &config).unwrap();
        let init = init_space(2, 0, 1, &config, &mut rng_for(config.seed, "init"));
        assert_eq!(state.space, init);
        assert_eq!(state.epoch, 0);
        assert!(state.losses.is_empty());
    }

    #[test]
    fn invalid_config_rejected() {
        for c in [
            TrainConfig { dim: 0, ..TrainConfig::default() },
            TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
            TrainConfig { margin_instance_of: -1.0, ..TrainConfig::default() },
            TrainConfig { threads: 0, ..TrainConfig::default() },
        ] {
            assert!(matches!(c.validate(), Err(Error::Config(_))));
        }
    }
}
