//! Score functions and the embedding table they read from.
//!
//! Concepts are spheres `s(p, m)`, instances and instance relations are points.
//! All scores are "energies": lower means more plausible.

use serde::{Deserialize, Serialize};

use crate::kg::{ConceptId, InstanceId, RelationId, Triple};

/// Smallest radius a concept sphere may have after an update.
pub const RADIUS_FLOOR: f64 = 1e-4;

/// Borrowed view of one concept's sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConceptSphere<'a> {
    pub center: &'a [f64],
    pub radius: f64,
}

impl<'a> ConceptSphere<'a> {
    pub fn new(center: &'a [f64], radius: f64) -> Self {
        Self { center, radius }
    }
}

/// Relative position of sphere `s_i` with respect to sphere `s_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpherePosition {
    /// `s_i` lies inside `s_j` (the configuration a true subClassOf wants).
    Inside,
    Separate,
    Intersect,
    /// `s_j` lies strictly inside `s_i`.
    Contains,
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Euclidean distance `||a - b||_2`.
#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dimension mismatch");
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Rescales `v` onto the unit sphere if it lies outside the unit ball.
/// Returns whether it was changed. The result always has `norm(v) <= 1.0`
/// exactly, so a second call is a no-op.
#[inline]
pub fn project_to_unit_ball(v: &mut [f64]) -> bool {
    let n = norm(v);
    if n <= 1.0 {
        return false;
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    // rounding can leave the norm an ulp above one
    while norm(v) > 1.0 {
        for x in v.iter_mut() {
            *x *= 1.0 - f64::EPSILON;
        }
    }
    true
}

/// instanceOf score `||i - p||_2 - m`; negative iff the point is strictly inside.
#[inline]
pub fn score_instance_of(instance: &[f64], sphere: ConceptSphere<'_>) -> f64 {
    distance(instance, sphere.center) - sphere.radius
}

/// Classifies where `s_i` sits relative to `s_j`.
///
/// Boundary rules: `Inside` holds at `d + m_i == m_j`, `Separate` holds at
/// `d == m_i + m_j`, and `Contains` needs strict inequality.
pub fn classify_spheres(si: ConceptSphere<'_>, sj: ConceptSphere<'_>) -> SpherePosition {
    let d = distance(si.center, sj.center);
    classify_with_distance(d, si.radius, sj.radius)
}

#[inline]
pub(crate) fn classify_with_distance(d: f64, mi: f64, mj: f64) -> SpherePosition {
    if d + mi <= mj {
        SpherePosition::Inside
    } else if d + mj < mi {
        SpherePosition::Contains
    } else if d >= mi + mj {
        SpherePosition::Separate
    } else {
        SpherePosition::Intersect
    }
}

/// subClassOf score for `(c_i, subClassOf, c_j)`.
///
/// `m_i - m_j` when `s_j` is inside `s_i`; otherwise `d + m_i - m_j`, which
/// covers separate, intersecting and the already-inside case (where it goes
/// negative).
pub fn score_sub_class_of(si: ConceptSphere<'_>, sj: ConceptSphere<'_>) -> f64 {
    let d = distance(si.center, sj.center);
    match classify_with_distance(d, si.radius, sj.radius) {
        SpherePosition::Contains => si.radius - sj.radius,
        _ => d + si.radius - sj.radius,
    }
}

/// Translation score `||h + r - t||_2^2`.
#[inline]
pub fn score_relational(head: &[f64], relation: &[f64], tail: &[f64]) -> f64 {
    assert!(
        head.len() == relation.len() && relation.len() == tail.len(),
        "dimension mismatch"
    );
    head.iter()
        .zip(relation)
        .zip(tail)
        .map(|((h, r), t)| {
            let x = h + r - t;
            x * x
        })
        .sum()
}

/// Which scoring scheme a space was trained for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Concepts are spheres; isA triples use the sphere scores.
    #[default]
    TransC,
    /// Baseline: concepts are plain points (the sphere centers) and
    /// instanceOf/subClassOf are two extra translation vectors.
    TransE,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::TransC => "transc",
            ModelKind::TransE => "transe",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "transc" => Ok(Self::TransC),
            "transe" => Ok(Self::TransE),
            other => Err(format!("unknown model {other:?} (expected transc or transe)")),
        }
    }
}

/// Flat row-major tables of every learned parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    pub(crate) dim: usize,
    pub(crate) model: ModelKind,
    pub(crate) num_relations: usize,
    pub(crate) instances: Vec<f64>,
    /// `num_relations` rows, plus the instanceOf and subClassOf translations
    /// for [`ModelKind::TransE`].
    pub(crate) relations: Vec<f64>,
    pub(crate) centers: Vec<f64>,
    pub(crate) radii: Vec<f64>,
}

impl EmbeddingSpace {
    /// All-zero space with unit radii; mostly useful for hand-built fixtures.
    pub fn zeros(
        model: ModelKind,
        dim: usize,
        num_instances: usize,
        num_concepts: usize,
        num_relations: usize,
    ) -> Self {
        assert!(dim > 0, "dimension must be positive");
        let rel_rows = num_relations + model.extra_relation_rows();
        Self {
            dim,
            model,
            num_relations,
            instances: vec![0.0; num_instances * dim],
            relations: vec![0.0; rel_rows * dim],
            centers: vec![0.0; num_concepts * dim],
            radii: vec![1.0; num_concepts],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn num_instances(&self) -> usize {
        self.instances.len() / self.dim
    }

    pub fn num_concepts(&self) -> usize {
        self.radii.len()
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    #[inline]
    pub fn instance(&self, i: InstanceId) -> &[f64] {
        row(&self.instances, self.dim, i.index())
    }

    #[inline]
    pub fn instance_mut(&mut self, i: InstanceId) -> &mut [f64] {
        row_mut(&mut self.instances, self.dim, i.index())
    }

    #[inline]
    pub fn relation(&self, r: RelationId) -> &[f64] {
        assert!(r.index() < self.num_relations, "relation {r} out of range");
        row(&self.relations, self.dim, r.index())
    }

    #[inline]
    pub fn relation_mut(&mut self, r: RelationId) -> &mut [f64] {
        assert!(r.index() < self.num_relations, "relation {r} out of range");
        row_mut(&mut self.relations, self.dim, r.index())
    }

    /// Relation-table row index of the instanceOf (`false`) or subClassOf
    /// (`true`) translation in the baseline model.
    pub(crate) fn isa_row(&self, sub_class: bool) -> usize {
        debug_assert_eq!(self.model, ModelKind::TransE);
        self.num_relations + usize::from(sub_class)
    }

    #[inline]
    pub(crate) fn relation_row(&self, row_idx: usize) -> &[f64] {
        row(&self.relations, self.dim, row_idx)
    }

    #[inline]
    pub fn sphere(&self, c: ConceptId) -> ConceptSphere<'_> {
        ConceptSphere {
            center: row(&self.centers, self.dim, c.index()),
            radius: self.radii[c.index()],
        }
    }

    #[inline]
    pub fn center_mut(&mut self, c: ConceptId) -> &mut [f64] {
        row_mut(&mut self.centers, self.dim, c.index())
    }

    #[inline]
    pub fn set_radius(&mut self, c: ConceptId, radius: f64) {
        self.radii[c.index()] = radius;
    }

    pub fn instance_table(&self) -> &[f64] {
        &self.instances
    }

    pub fn relation_table(&self) -> &[f64] {
        &self.relations
    }

    pub fn center_table(&self) -> &[f64] {
        &self.centers
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Score of any triple under this space's model.
    pub fn score(&self, triple: &Triple) -> f64 {
        match (self.model, triple) {
            (_, Triple::Relational(t)) => score_relational(
                self.instance(t.head),
                self.relation(t.relation),
                self.instance(t.tail),
            ),
            (ModelKind::TransC, Triple::InstanceOf(t)) => {
                score_instance_of(self.instance(t.instance), self.sphere(t.concept))
            }
            (ModelKind::TransC, Triple::SubClassOf(t)) => {
                score_sub_class_of(self.sphere(t.sub), self.sphere(t.sup))
            }
            (ModelKind::TransE, Triple::InstanceOf(t)) => score_relational(
                self.instance(t.instance),
                self.relation_row(self.isa_row(false)),
                self.sphere(t.concept).center,
            ),
            (ModelKind::TransE, Triple::SubClassOf(t)) => score_relational(
                self.sphere(t.sub).center,
                self.relation_row(self.isa_row(true)),
                self.sphere(t.sup).center,
            ),
        }
    }

    /// True when every vector lies in the unit ball and every radius is at
    /// least [`RADIUS_FLOOR`].
    pub fn satisfies_constraints(&self) -> bool {
        let rows_ok = |table: &[f64]| table.chunks_exact(self.dim).all(|v| norm(v) <= 1.0);
        rows_ok(&self.instances)
            && rows_ok(&self.relations)
            && rows_ok(&self.centers)
            && self.radii.iter().all(|&m| m >= RADIUS_FLOOR)
    }
}

impl ModelKind {
    pub(crate) fn extra_relation_rows(self) -> usize {
        match self {
            ModelKind::TransC => 0,
            ModelKind::TransE => 2,
        }
    }
}

#[inline]
fn row(table: &[f64], dim: usize, i: usize) -> &[f64] {
    &table[i * dim..(i + 1) * dim]
}

#[inline]
fn row_mut(table: &mut [f64], dim: usize, i: usize) -> &mut [f64] {
    &mut table[i * dim..(i + 1) * dim]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(center: &[f64], radius: f64) -> ConceptSphere<'_> {
        ConceptSphere::new(center, radius)
    }

    /// Independent norm: compensated summation over explicit differences.
    fn oracle_distance(a: &[f64], b: &[f64]) -> f64 {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for k in 0..a.len() {
            let d = a[k] - b[k];
            let y = d.powi(2) - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum.sqrt()
    }

    #[test]
    fn instance_of_at_center_is_minus_radius() {
        let p = [0.3, -0.2];
        assert_eq!(score_instance_of(&p, s(&p, 0.5)), -0.5);
    }

    #[test]
    fn instance_of_three_four_five() {
        let v = score_instance_of(&[0.6, 0.8], s(&[0.0, 0.0], 0.3));
        assert!((v - 0.7).abs() < 1e-15, "{v}");
    }

    #[test]
    fn instance_of_matches_independent_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let i: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let got = score_instance_of(&i, s(&p, 0.2));
            let want = oracle_distance(&i, &p) - 0.2;
            assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    #[should_panic(expected = "dimension mismatch")]
    fn dimension_mismatch_panics() {
        score_instance_of(&[0.0, 1.0], s(&[0.0], 0.1));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(
            classify_spheres(s(&[0.2, 0.0], 0.3), s(&[0.0, 0.0], 0.6)),
            SpherePosition::Inside
        );
        assert_eq!(
            classify_spheres(s(&[1.0, 0.0], 0.3), s(&[0.0, 0.0], 0.4)),
            SpherePosition::Separate
        );
        assert_eq!(
            classify_spheres(s(&[0.0, 0.0], 0.5), s(&[0.0, 0.0], 0.2)),
            SpherePosition::Contains
        );
    }

    #[test]
    fn classify_intersect_by_hand() {
        // d = 0.5, m_i = 0.4, m_j = 0.3:
        //   inside:   0.9 <= 0.3  no
        //   contains: 0.8 <  0.4  no
        //   separate: 0.5 >= 0.7  no
        let (d, mi, mj) = (0.5f64, 0.4f64, 0.3f64);
        assert!(!(d + mi <= mj) && !(d + mj < mi) && !(d >= mi + mj));
        assert_eq!(
            classify_spheres(s(&[0.5, 0.0], mi), s(&[0.0, 0.0], mj)),
            SpherePosition::Intersect
        );
    }

    #[test]
    fn boundary_tie_breaks() {
        // Internally tangent: Inside wins.
        assert_eq!(classify_with_distance(0.25, 0.25, 0.5), SpherePosition::Inside);
        // Externally tangent: Separate wins.
        assert_eq!(classify_with_distance(0.75, 0.25, 0.5), SpherePosition::Separate);
        // Identical spheres are Inside, never Contains.
        assert_eq!(classify_with_distance(0.0, 0.5, 0.5), SpherePosition::Inside);
        // Internally tangent the other way round is not strict containment.
        assert_eq!(classify_with_distance(0.25, 0.5, 0.25), SpherePosition::Intersect);
    }

    #[test]
    fn sub_class_of_examples() {
        let v = score_sub_class_of(s(&[1.0, 0.0], 0.3), s(&[0.0, 0.0], 0.4));
        assert!((v - 0.9).abs() < 1e-15);
        let v = score_sub_class_of(s(&[0.0, 0.0], 0.5), s(&[0.0, 0.0], 0.2));
        assert!((v - 0.3).abs() < 1e-15);
        let (si, sj) = (s(&[0.2, 0.0], 0.3), s(&[0.0, 0.0], 0.6));
        assert_eq!(classify_spheres(si, sj), SpherePosition::Inside);
        let v = score_sub_class_of(si, sj);
        assert!((v - -0.1).abs() < 1e-15, "{v}");
    }

    #[test]
    fn contains_boundary_jump_is_distance() {
        // Approach d + m_j = m_i from the Intersect side.
        let (mi, mj) = (0.5, 0.2);
        let d_boundary: f64 = 0.3;
        let d_inside = d_boundary - 1e-9;
        let a = [0.0, 0.0];
        let b_contains = [d_inside, 0.0];
        let b_edge = [d_boundary, 0.0];
        assert_eq!(classify_spheres(s(&a, mi), s(&b_contains, mj)), SpherePosition::Contains);
        assert_eq!(classify_spheres(s(&a, mi), s(&b_edge, mj)), SpherePosition::Intersect);
        let jump = score_sub_class_of(s(&a, mi), s(&b_edge, mj))
            - score_sub_class_of(s(&a, mi), s(&b_contains, mj));
        assert!((jump - d_boundary).abs() < 1e-8, "{jump}");
    }

    #[test]
    fn relational_examples() {
        assert_eq!(score_relational(&[0.1, 0.2], &[0.3, -0.1], &[0.4, 0.1]), {
            let x: f64 = 0.1 + 0.3 - 0.4;
            let y: f64 = 0.2 - 0.1 - 0.1;
            x * x + y * y
        });
        assert_eq!(score_relational(&[0.5, 0.5], &[0.25, -0.25], &[0.75, 0.25]), 0.0);
        assert_eq!(score_relational(&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]), 2.0);
    }

    #[test]
    fn relational_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = |rng: &mut ChaCha8Rng| (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        for _ in 0..50 {
            let (h, r, t) = (v(&mut rng), v(&mut rng), v(&mut rng));
            let mut want = 0.0;
            for k in 0..100 {
                want += (h[k] + r[k] - t[k]) * (h[k] + r[k] - t[k]);
            }
            assert!((score_relational(&h, &r, &t) - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let mut v = vec![3.0, 4.0];
        assert!(project_to_unit_ball(&mut v));
        let once = v.clone();
        assert!(!project_to_unit_ball(&mut v));
        assert_eq!(v, once);
        assert!((norm(&v) - 1.0).abs() < 1e-15);
        let mut inside = vec![0.1, 0.2];
        assert!(!project_to_unit_ball(&mut inside));
        assert_eq!(inside, vec![0.1, 0.2]);
    }

    #[test]
    fn transe_space_scores_isa_as_translations() {
        let mut space = EmbeddingSpace::zeros(ModelKind::TransE, 2, 1, 2, 0);
        space.instance_mut(InstanceId(0)).copy_from_slice(&[0.1, 0.0]);
        space.center_mut(ConceptId(0)).copy_from_slice(&[0.5, 0.0]);
        space.center_mut(ConceptId(1)).copy_from_slice(&[0.5, 0.5]);
        let row = space.isa_row(false);
        space.relations[row * 2..row * 2 + 2].copy_from_slice(&[0.4, 0.0]);
        let t = Triple::InstanceOf(crate::kg::InstanceOfTriple::new(0, 0));
        assert!(space.score(&t).abs() < 1e-15);
        let t = Triple::SubClassOf(crate::kg::SubClassOfTriple::new(0, 1));
        assert!((space.score(&t) - 0.25).abs() < 1e-15);
    }
}
