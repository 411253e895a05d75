//! Moduli spaces that hidden neurons are embedded into.
//!
//! Six spaces are supported, each with a fixed chart:
//!
//! | kind          | stored coordinates                  | scale meaning        |
//! |---------------|-------------------------------------|----------------------|
//! | `Circle`      | angle θ ∈ [0, 2π)                   | radius (default 5)   |
//! | `Sphere`      | ambient 3-vector of norm = radius   | radius (default 5)   |
//! | `Torus2`      | [0, P)²                             | period P (default 10)|
//! | `KleinBottle` | [0, P)², glide-identified on x-seam | period P (default 10)|
//! | `Torus6`      | [0, P)⁶                             | period P (default 10)|
//! | `Euclidean`   | free k-vector                       | sampling box side    |
//!
//! The Klein bottle is `[0, P]² / ~` with `(x, 0) ~ (x, P)` and
//! `(0, y) ~ (P, P - y)`, carrying the flat quotient metric. Its distance is the
//! minimum over the nine lifts `g^a t^b q` for `a, b ∈ {-1, 0, 1}`, where
//! `t(x, y) = (x, y + P)` and `g(x, y) = (x + P, P - y)`.

use std::f64::consts::{PI, TAU};
use std::fmt;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RADIUS: f64 = 5.0;
pub const DEFAULT_PERIOD: f64 = 10.0;
pub const DEFAULT_EUCLIDEAN_BOX: f64 = 10.0;

/// Below this sine of the separation angle, sphere points are treated as
/// coincident or antipodal.
const SPHERE_DEGENERATE_SINE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Circle,
    Sphere,
    Torus2,
    KleinBottle,
    Torus6,
    Euclidean,
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ManifoldKind::Circle => "circle",
            ManifoldKind::Sphere => "sphere",
            ManifoldKind::Torus2 => "torus2",
            ManifoldKind::KleinBottle => "klein_bottle",
            ManifoldKind::Torus6 => "torus6",
            ManifoldKind::Euclidean => "euclidean",
        };
        f.write_str(name)
    }
}

/// One of the supported spaces together with its scale constant.
///
/// For `Euclidean` the scale is the side of the sampling box `[0, scale]^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    pub scale: f64,
    #[serde(default)]
    pub ambient_dim: Option<usize>,
}

impl ManifoldSpec {
    pub fn circle() -> Self {
        Self::with_kind(ManifoldKind::Circle)
    }

    pub fn sphere() -> Self {
        Self::with_kind(ManifoldKind::Sphere)
    }

    pub fn torus2() -> Self {
        Self::with_kind(ManifoldKind::Torus2)
    }

    pub fn klein_bottle() -> Self {
        Self::with_kind(ManifoldKind::KleinBottle)
    }

    pub fn torus6() -> Self {
        Self::with_kind(ManifoldKind::Torus6)
    }

    pub fn euclidean(dim: usize) -> Self {
        ManifoldSpec {
            kind: ManifoldKind::Euclidean,
            scale: DEFAULT_EUCLIDEAN_BOX,
            ambient_dim: Some(dim),
        }
    }

    /// Default parameterization for a kind. `Euclidean` defaults to ℝ³.
    pub fn with_kind(kind: ManifoldKind) -> Self {
        let scale = match kind {
            ManifoldKind::Circle | ManifoldKind::Sphere => DEFAULT_RADIUS,
            ManifoldKind::Torus2 | ManifoldKind::KleinBottle | ManifoldKind::Torus6 => DEFAULT_PERIOD,
            ManifoldKind::Euclidean => return Self::euclidean(3),
        };
        ManifoldSpec {
            kind,
            scale,
            ambient_dim: None,
        }
    }

    pub fn scaled(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "manifold scale must be positive, got {}",
                self.scale
            )));
        }
        if self.kind == ManifoldKind::Euclidean && self.ambient_dim.unwrap_or(0) == 0 {
            return Err(Error::InvalidArgument(
                "euclidean manifold needs ambient_dim >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Number of stored coordinates per point.
    pub fn coord_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Circle => 1,
            ManifoldKind::Sphere => 3,
            ManifoldKind::Torus2 | ManifoldKind::KleinBottle => 2,
            ManifoldKind::Torus6 => 6,
            ManifoldKind::Euclidean => self.ambient_dim.unwrap_or(0),
        }
    }

    /// Intrinsic dimension of the space.
    pub fn intrinsic_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Sphere => 2,
            _ => self.coord_dim(),
        }
    }

    pub fn is_compact(&self) -> bool {
        self.kind != ManifoldKind::Euclidean
    }

    fn check_same(&self, other: &ManifoldSpec) -> Result<()> {
        if self != other {
            return Err(Error::ManifoldMismatch {
                left: format!("{}(scale {})", self.kind, self.scale),
                right: format!("{}(scale {})", other.kind, other.scale),
            });
        }
        Ok(())
    }

    fn check_point(&self, p: &ManifoldPoint) -> Result<()> {
        let expected = self.coord_dim();
        if p.0.len() != expected {
            return Err(Error::MalformedPoint {
                expected,
                got: p.0.len(),
            });
        }
        if p.0.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("manifold point".into()));
        }
        if self.kind == ManifoldKind::Sphere && norm(&p.0) < 1e-12 {
            return Err(Error::InvalidArgument("sphere point at the origin".into()));
        }
        Ok(())
    }
}

/// Coordinates of a point in its manifold's chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ManifoldPoint(pub Vec<f64>);

impl ManifoldPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        ManifoldPoint(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ManifoldPoint {
    fn from(v: Vec<f64>) -> Self {
        ManifoldPoint(v)
    }
}

/// Assignment of hidden neurons to manifold points, neuron `j` ↦ `points[j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Embedding {
    pub manifold: ManifoldSpec,
    pub points: Vec<ManifoldPoint>,
    #[serde(default)]
    pub trainable: bool,
}

impl Embedding {
    pub fn new(manifold: ManifoldSpec, points: Vec<ManifoldPoint>) -> Result<Self> {
        manifold.validate()?;
        for p in &points {
            manifold.check_point(p)?;
        }
        Ok(Embedding {
            manifold,
            points,
            trainable: false,
        })
    }

    pub fn trainable(mut self, trainable: bool) -> Self {
        self.trainable = trainable;
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// All neurons mapped to the same point.
    pub fn collapsed(manifold: ManifoldSpec, point: ManifoldPoint, n: usize) -> Result<Self> {
        Embedding::new(manifold, vec![point; n])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let e: Embedding = serde_json::from_str(text)?;
        e.manifold.validate()?;
        for p in &e.points {
            e.manifold.check_point(p)?;
        }
        Ok(e)
    }
}

/// Draws `n` points i.i.d. from the manifold's uniform (volume) measure.
pub fn sample_uniform(manifold: &ManifoldSpec, n: usize, seed: u64) -> Result<Embedding> {
    manifold.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("cannot sample zero points".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = manifold.scale;
    let points = (0..n)
        .map(|_| {
            let coords = match manifold.kind {
                ManifoldKind::Circle => vec![rng.random_range(0.0..TAU)],
                ManifoldKind::Sphere => {
                    let v: [f64; 3] = UnitSphere.sample(&mut rng);
                    v.iter().map(|c| c * s).collect()
                }
                _ => (0..manifold.coord_dim()).map(|_| rng.random_range(0.0..s)).collect(),
            };
            ManifoldPoint(coords)
        })
        .collect();
    Ok(Embedding {
        manifold: manifold.clone(),
        points,
        trainable: false,
    })
}

/// Geodesic distance between two points of the same manifold.
pub fn geodesic_distance(manifold: &ManifoldSpec, p: &ManifoldPoint, q: &ManifoldPoint) -> Result<f64> {
    manifold.check_point(p)?;
    manifold.check_point(q)?;
    Ok(distance_unchecked(manifold, &p.0, &q.0))
}

pub(crate) fn distance_unchecked(manifold: &ManifoldSpec, p: &[f64], q: &[f64]) -> f64 {
    let s = manifold.scale;
    match manifold.kind {
        ManifoldKind::Circle => s * wrapped_offset(p[0] - q[0], TAU).abs(),
        ManifoldKind::Sphere => s * sphere_angle(p, q),
        ManifoldKind::Torus2 | ManifoldKind::Torus6 => p
            .iter()
            .zip(q)
            .map(|(a, b)| wrapped_offset(a - b, s).powi(2))
            .sum::<f64>()
            .sqrt(),
        ManifoldKind::KleinBottle => {
            // Evaluate with the pair in a fixed order so d(p, q) and d(q, p) agree bitwise.
            let (a, b) = if cmp_coords(p, q).is_le() { (p, q) } else { (q, p) };
            let (dx, dy) = klein_nearest_offset(a, b, s);
            dx.hypot(dy)
        }
        ManifoldKind::Euclidean => p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(),
    }
}

/// Gradient of `d(·, q)` at `p` in the chart coordinates of `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceGradient {
    pub grad: Vec<f64>,
    /// Set for sphere antipodes, where every direction is a descent direction
    /// and the zero vector is returned.
    pub degenerate: bool,
}

/// Gradient of the geodesic distance with respect to the first argument.
///
/// Returns the zero vector when `p == q`. At cut-locus ties the lift with the
/// lexicographically smallest deck-transformation index is used.
pub fn distance_gradient(manifold: &ManifoldSpec, p: &ManifoldPoint, q: &ManifoldPoint) -> Result<DistanceGradient> {
    manifold.check_point(p)?;
    manifold.check_point(q)?;
    Ok(gradient_unchecked(manifold, &p.0, &q.0))
}

pub(crate) fn gradient_unchecked(manifold: &ManifoldSpec, p: &[f64], q: &[f64]) -> DistanceGradient {
    let s = manifold.scale;
    let dim = p.len();
    let zero = |degenerate| DistanceGradient {
        grad: vec![0.0; dim],
        degenerate,
    };
    match manifold.kind {
        ManifoldKind::Circle => {
            let delta = wrapped_offset(p[0] - q[0], TAU);
            if delta == 0.0 {
                return zero(false);
            }
            DistanceGradient {
                grad: vec![s * delta.signum()],
                degenerate: false,
            }
        }
        ManifoldKind::Sphere => {
            let pn = norm(p);
            let qn = norm(q);
            let ph: Vec<f64> = p.iter().map(|c| c / pn).collect();
            let qh: Vec<f64> = q.iter().map(|c| c / qn).collect();
            let cos = dot(&ph, &qh);
            let sin = norm(&cross(&ph, &qh));
            if sin < SPHERE_DEGENERATE_SINE {
                return zero(cos < 0.0);
            }
            // d = s·θ(p, q) is invariant to |p|; its ambient gradient is tangent.
            let k = -s / (sin * pn);
            DistanceGradient {
                grad: ph.iter().zip(&qh).map(|(a, b)| k * (b - cos * a)).collect(),
                degenerate: false,
            }
        }
        ManifoldKind::Torus2 | ManifoldKind::Torus6 => {
            let offsets: Vec<f64> = p.iter().zip(q).map(|(a, b)| wrapped_offset(a - b, s)).collect();
            unit_or_zero(offsets)
        }
        ManifoldKind::KleinBottle => {
            let (dx, dy) = klein_nearest_offset(p, q, s);
            unit_or_zero(vec![dx, dy])
        }
        ManifoldKind::Euclidean => unit_or_zero(p.iter().zip(q).map(|(a, b)| a - b).collect()),
    }
}

/// Maps an arbitrary chart vector back onto the manifold's canonical domain.
pub fn retract(manifold: &ManifoldSpec, raw: &[f64]) -> Result<ManifoldPoint> {
    let expected = manifold.coord_dim();
    if raw.len() != expected {
        return Err(Error::MalformedPoint {
            expected,
            got: raw.len(),
        });
    }
    if raw.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("retract input".into()));
    }
    let s = manifold.scale;
    let coords = match manifold.kind {
        ManifoldKind::Circle => vec![canonical_mod(raw[0], TAU)],
        ManifoldKind::Sphere => {
            let n = norm(raw);
            if n < 1e-12 {
                return Err(Error::InvalidArgument(
                    "cannot retract a near-zero vector onto the sphere".into(),
                ));
            }
            raw.iter().map(|c| c * s / n).collect()
        }
        ManifoldKind::Torus2 | ManifoldKind::Torus6 => raw.iter().map(|&c| canonical_mod(c, s)).collect(),
        ManifoldKind::KleinBottle => {
            let (x, y) = klein_canonical(raw[0], raw[1], s);
            vec![x, y]
        }
        ManifoldKind::Euclidean => raw.to_vec(),
    };
    Ok(ManifoldPoint(coords))
}

/// `D[j][k] = d(rows[j], cols[k])`.
pub fn pairwise_distances(rows: &Embedding, cols: &Embedding) -> Result<Array2<f64>> {
    rows.manifold.check_same(&cols.manifold)?;
    let m = &rows.manifold;
    Ok(Array2::from_shape_fn((rows.len(), cols.len()), |(j, k)| {
        distance_unchecked(m, &rows.points[j].0, &cols.points[k].0)
    }))
}

/// Representative of `delta` modulo `period` with the smallest magnitude.
/// Ties at exactly `period / 2` resolve to the first of the offsets
/// `delta + period`, `delta`, `delta - period` in that order.
fn wrapped_offset(delta: f64, period: f64) -> f64 {
    let base = delta - period * (delta / period).round();
    let mut best = base + period;
    for cand in [base, base - period] {
        if cand.abs() < best.abs() {
            best = cand;
        }
    }
    best
}

fn canonical_mod(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

fn klein_canonical(x: f64, y: f64, period: f64) -> (f64, f64) {
    let k = (x / period).floor();
    let mut x = x - k * period;
    let mut y = if (k as i64).rem_euclid(2) == 1 { period - y } else { y };
    if x >= period {
        x -= period;
        y = period - y;
    }
    if x < 0.0 {
        x = 0.0;
    }
    (x, canonical_mod(y, period))
}

/// Offset `p - g^a t^b q` of smallest norm over `a, b ∈ {-1, 0, 1}`, scanning
/// `a` then `b` in increasing order and keeping the first strict minimum.
fn klein_nearest_offset(p: &[f64], q: &[f64], period: f64) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for a in [-1.0, 0.0, 1.0] {
        for b in [-1.0, 0.0, 1.0] {
            let (lx, ly) = if a == 0.0 {
                (q[0], q[1] + period * b)
            } else {
                (q[0] + period * a, period - q[1] - period * b)
            };
            let dx = p[0] - lx;
            let dy = p[1] - ly;
            let sq = dx * dx + dy * dy;
            if sq < best.0 {
                best = (sq, dx, dy);
            }
        }
    }
    (best.1, best.2)
}

fn sphere_angle(p: &[f64], q: &[f64]) -> f64 {
    norm(&cross(p, q)).atan2(dot(p, q))
}

fn unit_or_zero(mut v: Vec<f64>) -> DistanceGradient {
    let n = norm(&v);
    if n == 0.0 {
        v.iter_mut().for_each(|c| *c = 0.0);
    } else {
        v.iter_mut().for_each(|c| *c /= n);
    }
    DistanceGradient {
        grad: v,
        degenerate: false,
    }
}

fn cmp_coords(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Upper bound on the distance between any two points, when finite.
pub fn diameter(manifold: &ManifoldSpec) -> Option<f64> {
    let s = manifold.scale;
    match manifold.kind {
        ManifoldKind::Circle | ManifoldKind::Sphere => Some(PI * s),
        ManifoldKind::Torus2 | ManifoldKind::KleinBottle => Some(2f64.sqrt() * s / 2.0),
        ManifoldKind::Torus6 => Some(6f64.sqrt() * s / 2.0),
        ManifoldKind::Euclidean => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[f64]) -> ManifoldPoint {
        ManifoldPoint(c.to_vec())
    }

    #[test]
    fn torus_distances() {
        let t = ManifoldSpec::torus2();
        let d = geodesic_distance(&t, &pt(&[0.0, 0.0]), &pt(&[5.0, 5.0])).unwrap();
        assert!((d - 50f64.sqrt()).abs() < 1e-12);
        let d = geodesic_distance(&t, &pt(&[1.0, 1.0]), &pt(&[9.0, 1.0])).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn circle_antipodes() {
        let c = ManifoldSpec::circle();
        let d = geodesic_distance(&c, &pt(&[0.0]), &pt(&[PI])).unwrap();
        assert!((d - 5.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn klein_identified_points_coincide() {
        let k = ManifoldSpec::klein_bottle();
        let d = geodesic_distance(&k, &pt(&[0.0, 3.0]), &pt(&[10.0, 7.0])).unwrap();
        assert!(d.abs() < 1e-12);
        let d = geodesic_distance(&k, &pt(&[4.0, 0.0]), &pt(&[4.0, 10.0])).unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn klein_glide_is_shorter_than_torus_wrap() {
        // (0.5, 2) and (9.5, 8) meet across the glide seam: (9.5 - 10, 10 - 8) = (-0.5, 2).
        let k = ManifoldSpec::klein_bottle();
        let d = geodesic_distance(&k, &pt(&[0.5, 2.0]), &pt(&[9.5, 8.0])).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_quarter_circle() {
        let s = ManifoldSpec::sphere();
        let d = geodesic_distance(&s, &pt(&[0.0, 0.0, 5.0]), &pt(&[5.0, 0.0, 0.0])).unwrap();
        assert!((d - 5.0 * PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn euclidean_gradient_points_away() {
        let e = ManifoldSpec::euclidean(2);
        let g = distance_gradient(&e, &pt(&[0.0, 0.0]), &pt(&[3.0, 4.0])).unwrap();
        assert!((g.grad[0] + 0.6).abs() < 1e-15 && (g.grad[1] + 0.8).abs() < 1e-15);
    }

    #[test]
    fn torus_gradient_follows_wrap() {
        let t = ManifoldSpec::torus2();
        let g = distance_gradient(&t, &pt(&[1.0, 0.0]), &pt(&[9.0, 0.0])).unwrap();
        assert_eq!(g.grad, vec![1.0, 0.0]);
    }

    #[test]
    fn gradient_zero_at_coincident_points() {
        for m in [
            ManifoldSpec::circle(),
            ManifoldSpec::sphere(),
            ManifoldSpec::torus2(),
            ManifoldSpec::klein_bottle(),
            ManifoldSpec::torus6(),
            ManifoldSpec::euclidean(3),
        ] {
            let p = sample_uniform(&m, 1, 3).unwrap().points.remove(0);
            let g = distance_gradient(&m, &p, &p).unwrap();
            assert!(g.grad.iter().all(|&c| c == 0.0), "{m:?}");
            assert!(!g.degenerate);
        }
    }

    #[test]
    fn sphere_antipodes_are_flagged() {
        let s = ManifoldSpec::sphere();
        let g = distance_gradient(&s, &pt(&[0.0, 0.0, 5.0]), &pt(&[0.0, 0.0, -5.0])).unwrap();
        assert!(g.degenerate);
        assert!(g.grad.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn retract_examples() {
        let t = retract(&ManifoldSpec::torus2(), &[12.5, -3.0]).unwrap();
        assert_eq!(t.0, vec![2.5, 7.0]);
        let s = retract(&ManifoldSpec::sphere(), &[0.0, 0.0, 2.0]).unwrap();
        assert_eq!(s.0, vec![0.0, 0.0, 5.0]);
        let k = ManifoldSpec::klein_bottle();
        let r = retract(&k, &[11.0, 3.0]).unwrap();
        assert_eq!(r.0, vec![1.0, 7.0]);
        // the raw vector is a lift of the retracted point
        let d = distance_unchecked(&k, &[11.0, 3.0], &r.0);
        assert!(d.abs() < 1e-12);
        assert!(retract(&ManifoldSpec::sphere(), &[0.0, 0.0, 1e-13]).is_err());
    }

    #[test]
    fn sampling_contract() {
        let e = sample_uniform(&ManifoldSpec::torus2(), 100, 7).unwrap();
        assert_eq!(e.len(), 100);
        assert!(e.points.iter().all(|p| p.0.iter().all(|&c| (0.0..10.0).contains(&c))));
        let a = sample_uniform(&ManifoldSpec::circle(), 3, 5).unwrap();
        let b = sample_uniform(&ManifoldSpec::circle(), 3, 5).unwrap();
        assert_eq!(a, b);
        assert!(sample_uniform(&ManifoldSpec::circle(), 0, 5).is_err());
        let bad_box = ManifoldSpec::euclidean(2).scaled(0.0);
        assert!(sample_uniform(&bad_box, 3, 5).is_err());
    }

    #[test]
    fn sphere_sampling_has_zero_mean() {
        let e = sample_uniform(&ManifoldSpec::sphere(), 10_000, 1).unwrap();
        for axis in 0..3 {
            let mean = e.points.iter().map(|p| p.0[axis]).sum::<f64>() / 10_000.0;
            assert!(mean.abs() < 0.15, "axis {axis} mean {mean}");
        }
        for p in &e.points {
            assert!((norm(&p.0) - 5.0).abs() < 5e-9);
        }
    }

    #[test]
    fn pairwise_examples() {
        let t = ManifoldSpec::torus2();
        let e = Embedding::new(t.clone(), vec![pt(&[0.0, 0.0]), pt(&[5.0, 5.0])]).unwrap();
        let d = pairwise_distances(&e, &e).unwrap();
        assert_eq!(d[[0, 0]], 0.0);
        assert_eq!(d[[1, 1]], 0.0);
        assert!((d[[0, 1]] - 50f64.sqrt()).abs() < 1e-12);
        assert_eq!(d[[0, 1]], d[[1, 0]]);
        let one = Embedding::new(t, vec![pt(&[3.0, 4.0])]).unwrap();
        assert_eq!(pairwise_distances(&one, &one).unwrap()[[0, 0]], 0.0);
        let other = sample_uniform(&ManifoldSpec::circle(), 2, 0).unwrap();
        assert!(matches!(
            pairwise_distances(&e, &other),
            Err(Error::ManifoldMismatch { .. })
        ));
    }

    #[test]
    fn malformed_points_rejected() {
        let t = ManifoldSpec::torus2();
        assert!(matches!(
            geodesic_distance(&t, &pt(&[0.0]), &pt(&[1.0, 1.0])),
            Err(Error::MalformedPoint { .. })
        ));
        assert!(geodesic_distance(&t, &pt(&[f64::NAN, 0.0]), &pt(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn embedding_json_round_trip() {
        let e = sample_uniform(&ManifoldSpec::sphere(), 20, 11).unwrap();
        let back = Embedding::from_json(&e.to_json().unwrap()).unwrap();
        assert_eq!(e, back);
        let text = r#"{"manifold": {"kind": "torus2", "scale": 10.0, "ambient_dim": null}, "points": [[1.5, 2.25]]}"#;
        let parsed = Embedding::from_json(text).unwrap();
        assert_eq!(parsed.points[0].0, vec![1.5, 2.25]);
    }
}
