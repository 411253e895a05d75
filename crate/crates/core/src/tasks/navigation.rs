//! Path integration in a square arena.
//!
//! The model starts from an encoding of its start position, integrates a
//! sequence of velocities and reports a distribution over landmarks for its
//! final position. Positions are decoded by grid search against the arena's
//! own place-score model.

use std::f64::consts::PI;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rnn::{cross_entropy, log_sum_exp, softmax};

pub const DEFAULT_SIDE_CM: f64 = 220.0;
pub const DEFAULT_SIGMA_CM: f64 = 12.0;
pub const DEFAULT_GRID_RESOLUTION_CM: f64 = 2.2;

const MAX_SPEED_CM: f64 = 5.0;
const TURN_SIGMA_RAD: f64 = 0.5;

/// How landmark activations become a probability vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaceScoreForm {
    /// Gaussian activations normalized to sum to one, i.e. softmax of the
    /// log-densities `-d²/2σ²`.
    #[default]
    NormalizedGaussian,
    /// Softmax applied directly to the Gaussian density values. With σ = 12
    /// the densities are at most 0.033, so the result is close to uniform.
    SoftmaxOfDensity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NavArena {
    pub side_cm: f64,
    pub landmarks: Vec<[f64; 2]>,
    pub gaussian_sigma_cm: f64,
    #[serde(default)]
    pub score_form: PlaceScoreForm,
}

impl NavArena {
    pub fn new(side_cm: f64, landmarks: Vec<[f64; 2]>, gaussian_sigma_cm: f64) -> Result<Self> {
        let arena = NavArena {
            side_cm,
            landmarks,
            gaussian_sigma_cm,
            score_form: PlaceScoreForm::default(),
        };
        arena.validate()?;
        Ok(arena)
    }

    /// `count` landmarks drawn uniformly from the arena.
    pub fn random(side_cm: f64, count: usize, gaussian_sigma_cm: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let landmarks = (0..count)
            .map(|_| [rng.random::<f64>() * side_cm, rng.random::<f64>() * side_cm])
            .collect();
        Self::new(side_cm, landmarks, gaussian_sigma_cm)
    }

    pub fn with_score_form(mut self, form: PlaceScoreForm) -> Self {
        self.score_form = form;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.side_cm.is_finite() && self.side_cm > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "arena side must be positive, got {}",
                self.side_cm
            )));
        }
        if !(self.gaussian_sigma_cm.is_finite() && self.gaussian_sigma_cm > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gaussian sigma must be positive, got {}",
                self.gaussian_sigma_cm
            )));
        }
        if self.landmarks.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "arena needs at least 2 landmarks, got {}",
                self.landmarks.len()
            )));
        }
        if let Some(p) = self.landmarks.iter().find(|p| !self.contains(**p)) {
            return Err(Error::InvalidArgument(format!("landmark {p:?} lies outside the arena")));
        }
        Ok(())
    }

    pub fn num_landmarks(&self) -> usize {
        self.landmarks.len()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p.iter().all(|c| (0.0..=self.side_cm).contains(c))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let arena: NavArena = serde_json::from_str(text)?;
        arena.validate()?;
        Ok(arena)
    }

    /// Unnormalized log-scores; [`place_scores`] is their softmax.
    fn logits(&self, p: [f64; 2]) -> Vec<f64> {
        let s2 = self.gaussian_sigma_cm * self.gaussian_sigma_cm;
        let norm = 1.0 / (self.gaussian_sigma_cm * (2.0 * PI).sqrt());
        self.landmarks
            .iter()
            .map(|l| {
                let d2 = (p[0] - l[0]).powi(2) + (p[1] - l[1]).powi(2);
                match self.score_form {
                    PlaceScoreForm::NormalizedGaussian => -d2 / (2.0 * s2),
                    PlaceScoreForm::SoftmaxOfDensity => norm * (-d2 / (2.0 * s2)).exp(),
                }
            })
            .collect()
    }

    fn log_scores(&self, p: [f64; 2]) -> Vec<f64> {
        let z = self.logits(p);
        let lse = log_sum_exp(&z);
        z.into_iter().map(|v| v - lse).collect()
    }
}

fn check_position(arena: &NavArena, p: [f64; 2]) -> Result<()> {
    if !p.iter().all(|c| c.is_finite()) {
        return Err(Error::NonFinite(format!("position {p:?}")));
    }
    if !arena.contains(p) {
        return Err(Error::InvalidArgument(format!("position {p:?} lies outside the arena")));
    }
    Ok(())
}

/// Probability vector over landmarks for a position in the arena.
pub fn place_scores(arena: &NavArena, position_cm: [f64; 2]) -> Result<Vec<f64>> {
    check_position(arena, position_cm)?;
    softmax(&arena.logits(position_cm))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NavTrajectory {
    pub start_cm: [f64; 2],
    /// Per-step displacement in cm.
    pub velocities: Vec<[f64; 2]>,
    pub end_cm: [f64; 2],
}

impl NavTrajectory {
    /// Positions visited, starting with `start_cm`; the last equals `end_cm`.
    pub fn positions(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.velocities.len() + 1);
        let mut p = self.start_cm;
        out.push(p);
        for v in &self.velocities {
            p = [p[0] + v[0], p[1] + v[1]];
            out.push(p);
        }
        out
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Reflects one coordinate into `[0, side]`, returning the new coordinate and
/// whether a reflection happened.
fn reflect(q: f64, side: f64) -> (f64, bool) {
    if q < 0.0 {
        (-q, true)
    } else if q > side {
        (2.0 * side - q, true)
    } else {
        (q, false)
    }
}

/// Velocity from `p` toward `q` such that `p + v` stays in `[0, side]`.
fn step_component(p: f64, q: f64, side: f64) -> f64 {
    let v = q - p;
    let n = p + v;
    if n < 0.0 {
        -p
    } else if n > side {
        side - p
    } else {
        v
    }
}

/// Random-walk trajectories: speed uniform in `[0, 5]` cm per step, heading
/// perturbed by N(0, 0.5²) rad each step, reflecting off the walls.
pub fn gen_trajectories(arena: &NavArena, t_len: usize, batch: usize, seed: u64) -> Result<Vec<NavTrajectory>> {
    arena.validate()?;
    if t_len < 1 {
        return Err(Error::InvalidArgument("trajectory length must be >= 1".into()));
    }
    let side = arena.side_cm;
    let turn = Normal::new(0.0, TURN_SIGMA_RAD).expect("valid normal");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(batch);
    for _ in 0..batch {
        let start = [rng.random::<f64>() * side, rng.random::<f64>() * side];
        let mut heading = rng.random::<f64>() * 2.0 * PI - PI;
        let mut p = start;
        let mut velocities = Vec::with_capacity(t_len);
        for _ in 0..t_len {
            heading = wrap_angle(heading + turn.sample(&mut rng));
            let speed = rng.random::<f64>() * MAX_SPEED_CM;
            let (qx, flip_x) = reflect(p[0] + speed * heading.cos(), side);
            let (qy, flip_y) = reflect(p[1] + speed * heading.sin(), side);
            if flip_x {
                heading = wrap_angle(PI - heading);
            }
            if flip_y {
                heading = wrap_angle(-heading);
            }
            let v = [step_component(p[0], qx, side), step_component(p[1], qy, side)];
            p = [p[0] + v[0], p[1] + v[1]];
            velocities.push(v);
        }
        out.push(NavTrajectory {
            start_cm: start,
            velocities,
            end_cm: p,
        });
    }
    Ok(out)
}

/// Model-ready form of a trajectory batch.
#[derive(Clone, Debug, PartialEq)]
pub struct NavTensors {
    /// `T` matrices of `batch × 2` velocities.
    pub inputs: Vec<Array2<f64>>,
    /// `batch × ℓ` place scores of the start positions.
    pub start_scores: Array2<f64>,
    /// `batch × ℓ` place scores of the end positions.
    pub end_scores: Array2<f64>,
    pub ends: Vec<[f64; 2]>,
}

pub fn to_tensors(arena: &NavArena, trajectories: &[NavTrajectory]) -> Result<NavTensors> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty trajectory batch".into()))?;
    let t_len = first.velocities.len();
    if trajectories.iter().any(|t| t.velocities.len() != t_len) {
        return Err(Error::InvalidArgument("trajectories differ in length".into()));
    }
    let b = trajectories.len();
    let l = arena.num_landmarks();
    let inputs = (0..t_len)
        .map(|t| Array2::from_shape_fn((b, 2), |(i, c)| trajectories[i].velocities[t][c]))
        .collect();
    let mut start_scores = Array2::zeros((b, l));
    let mut end_scores = Array2::zeros((b, l));
    for (i, tr) in trajectories.iter().enumerate() {
        for (dst, p) in [(&mut start_scores, tr.start_cm), (&mut end_scores, tr.end_cm)] {
            let s = place_scores(arena, p)?;
            dst.row_mut(i).assign(&ndarray::ArrayView1::from(&s));
        }
    }
    Ok(NavTensors {
        inputs,
        start_scores,
        end_scores,
        ends: trajectories.iter().map(|t| t.end_cm).collect(),
    })
}

/// Grid-search decoder. Returns the grid point whose place scores are
/// closest to the given scores in cross-entropy, `-Σ sᵢ log ps(g)ᵢ`.
///
/// The grid holds the cell centers `(i + ½)·res` of a `side / res` square
/// lattice, indexed row-major by `(x, y)`.
#[derive(Clone, Debug)]
pub struct PositionDecoder {
    grid: Vec<[f64; 2]>,
    /// `grid × ℓ` log place scores.
    log_scores: Array2<f64>,
}

impl PositionDecoder {
    pub fn new(arena: &NavArena, resolution_cm: f64) -> Result<Self> {
        arena.validate()?;
        if !(resolution_cm.is_finite() && resolution_cm > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid resolution must be positive, got {resolution_cm}"
            )));
        }
        let n = (arena.side_cm / resolution_cm + 1e-9).floor() as usize;
        if n == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid resolution {resolution_cm} leaves no grid points in a {} cm arena",
                arena.side_cm
            )));
        }
        let coord = |i: usize| (i as f64 + 0.5) * resolution_cm;
        let grid: Vec<[f64; 2]> = (0..n * n).map(|k| [coord(k / n), coord(k % n)]).collect();
        let l = arena.num_landmarks();
        let mut log_scores = Array2::zeros((grid.len(), l));
        for (g, mut row) in grid.iter().zip(log_scores.axis_iter_mut(Axis(0))) {
            for (dst, v) in row.iter_mut().zip(arena.log_scores(*g)) {
                *dst = v;
            }
        }
        Ok(PositionDecoder { grid, log_scores })
    }

    pub fn grid(&self) -> &[[f64; 2]] {
        &self.grid
    }

    pub fn num_landmarks(&self) -> usize {
        self.log_scores.ncols()
    }

    pub fn decode(&self, scores: &[f64]) -> Result<[f64; 2]> {
        let m = Array2::from_shape_vec((1, scores.len()), scores.to_vec()).expect("row vector");
        Ok(self.decode_batch(&m)?[0])
    }

    /// Decodes each row of a `batch × ℓ` probability matrix.
    pub fn decode_batch(&self, scores: &Array2<f64>) -> Result<Vec<[f64; 2]>> {
        let l = self.num_landmarks();
        if scores.ncols() != l {
            return Err(Error::shape(&[scores.nrows(), l], &[scores.nrows(), scores.ncols()]));
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("decoder scores".into()));
        }
        let mut fit = Array2::zeros((scores.nrows(), self.grid.len()));
        general_mat_mul(1.0, scores, &self.log_scores.t(), 0.0, &mut fit);
        Ok(fit
            .axis_iter(Axis(0))
            .map(|row| {
                let mut best = 0;
                for (k, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = k;
                    }
                }
                self.grid[best]
            })
            .collect())
    }

    /// Mean Euclidean error of decoding `softmax(logits)` row by row against
    /// the true positions.
    pub fn mean_error(&self, logits: &Array2<f64>, truth: &[[f64; 2]]) -> Result<f64> {
        if logits.nrows() != truth.len() || truth.is_empty() {
            return Err(Error::shape(
                &[truth.len(), self.num_landmarks()],
                &[logits.nrows(), logits.ncols()],
            ));
        }
        let mut probs = Array2::zeros(logits.dim());
        for (src, mut dst) in logits.axis_iter(Axis(0)).zip(probs.axis_iter_mut(Axis(0))) {
            let p = softmax(&src.to_vec())?;
            dst.assign(&ndarray::ArrayView1::from(&p));
        }
        let decoded = self.decode_batch(&probs)?;
        let total: f64 = decoded
            .iter()
            .zip(truth)
            .map(|(d, t)| ((d[0] - t[0]).powi(2) + (d[1] - t[1]).powi(2)).sqrt())
            .sum();
        Ok(total / truth.len() as f64)
    }
}

/// One-off decode; build a [`PositionDecoder`] to decode many vectors.
pub fn decode_position(scores: &[f64], arena: &NavArena, grid_resolution_cm: f64) -> Result<[f64; 2]> {
    if scores.len() != arena.num_landmarks() {
        return Err(Error::shape(&[arena.num_landmarks()], &[scores.len()]));
    }
    PositionDecoder::new(arena, grid_resolution_cm)?.decode(scores)
}

/// Cross-entropy of `softmax(output)` against the place scores of `end_cm`.
pub fn nav_loss(output: &[f64], arena: &NavArena, end_cm: [f64; 2]) -> Result<f64> {
    if output.len() != arena.num_landmarks() {
        return Err(Error::shape(&[arena.num_landmarks()], &[output.len()]));
    }
    let target = place_scores(arena, end_cm)?;
    cross_entropy(&target, &softmax(output)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arena() -> NavArena {
        NavArena::random(DEFAULT_SIDE_CM, 16, DEFAULT_SIGMA_CM, 4).unwrap()
    }

    #[test]
    fn scores_peak_on_landmark_and_sum_to_one() {
        for form in [PlaceScoreForm::NormalizedGaussian, PlaceScoreForm::SoftmaxOfDensity] {
            let a = arena().with_score_form(form);
            for (j, &lm) in a.landmarks.iter().enumerate() {
                let s = place_scores(&a, lm).unwrap();
                assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let max = s.iter().copied().fold(f64::MIN, f64::max);
                assert_eq!(s[j], max);
            }
        }
    }

    #[test]
    fn equidistant_landmarks_score_equal() {
        let a = NavArena::new(100.0, vec![[40.0, 50.0], [60.0, 50.0], [5.0, 5.0]], 12.0).unwrap();
        let s = place_scores(&a, [50.0, 80.0]).unwrap();
        assert_eq!(s[0], s[1]);
    }

    #[test]
    fn rejects_bad_arenas_and_positions() {
        assert!(NavArena::new(100.0, vec![[1.0, 1.0]], 12.0).is_err());
        assert!(NavArena::new(100.0, vec![[1.0, 1.0], [101.0, 1.0]], 12.0).is_err());
        assert!(NavArena::new(0.0, vec![[0.0, 0.0], [0.0, 0.0]], 12.0).is_err());
        assert!(place_scores(&arena(), [-1.0, 3.0]).is_err());
        assert!(gen_trajectories(&arena(), 0, 3, 1).is_err());
    }

    #[test]
    fn trajectories_stay_inside_and_sum_exactly() {
        let a = NavArena::random(30.0, 4, 12.0, 1).unwrap();
        let batch = gen_trajectories(&a, 200, 20, 9).unwrap();
        assert_eq!(batch, gen_trajectories(&a, 200, 20, 9).unwrap());
        for tr in &batch {
            let pos = tr.positions();
            assert!(pos.iter().all(|p| a.contains(*p)));
            assert_eq!(*pos.last().unwrap(), tr.end_cm);
            assert!(tr.velocities.iter().all(|v| v[0].hypot(v[1]) <= MAX_SPEED_CM + 1e-9));
        }
    }

    #[test]
    fn zero_velocity_trajectory_ends_at_start() {
        let tr = NavTrajectory {
            start_cm: [3.0, 4.0],
            velocities: vec![[0.0, 0.0]; 5],
            end_cm: [3.0, 4.0],
        };
        assert_eq!(*tr.positions().last().unwrap(), tr.start_cm);
    }

    #[test]
    fn decoder_grid_is_100_by_100_by_default() {
        let d = PositionDecoder::new(&arena(), DEFAULT_GRID_RESOLUTION_CM).unwrap();
        assert_eq!(d.grid().len(), 10_000);
        assert!((d.grid()[0][0] - 1.1).abs() < 1e-12);
        assert!(PositionDecoder::new(&arena(), 500.0).is_err());
    }

    #[test]
    fn nav_loss_at_target_is_entropy() {
        let a = arena();
        let end = [100.0, 70.0];
        let target = place_scores(&a, end).unwrap();
        let logits: Vec<f64> = target.iter().map(|p| p.ln()).collect();
        let entropy: f64 = -target.iter().map(|p| p * p.ln()).sum::<f64>();
        assert!((nav_loss(&logits, &a, end).unwrap() - entropy).abs() < 1e-12);
        assert!(nav_loss(&[0.0; 3], &a, end).is_err());
    }

    #[test]
    fn arena_json_round_trip() {
        let a = arena().with_score_form(PlaceScoreForm::SoftmaxOfDensity);
        assert_eq!(NavArena::from_json(&a.to_json().unwrap()).unwrap(), a);
        assert!(NavArena::from_json(r#"{"side_cm":1,"landmarks":[],"gaussian_sigma_cm":1,"x":0}"#).is_err());
    }
}
