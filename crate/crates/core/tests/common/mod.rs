#![allow(dead_code)]

use moduli::geometry::{retract, ManifoldKind, ManifoldPoint, ManifoldSpec};
use moduli::geometry::{sample_uniform, Embedding};
use moduli::inhibitor::{evaluate, InhibitorSpec};
use moduli::regularizer::{
    build_coefficients, penalty, penalty_embedding_grad, penalty_weight_grad, CoefficientMatrix, CoefficientSource,
    EmbeddingPair,
};
use moduli::rnn::{
    backward, forward, softmax, Criterion, InitialState, Nonlinearity, OutputActivation, RnnParams, RnnShape,
};
use ndarray::{Array2, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn shifted(m: &ManifoldSpec, p: &ManifoldPoint, v: &[f64], t: f64) -> ManifoldPoint {
    let raw: Vec<f64> = p.0.iter().zip(v).map(|(a, b)| a + t * b).collect();
    retract(m, &raw).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal directions spanning the tangent space at `p`.
pub fn tangent_basis(m: &ManifoldSpec, p: &ManifoldPoint) -> Vec<Vec<f64>> {
    let n = p.0.len();
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    if m.kind != ManifoldKind::Sphere {
        return axes;
    }
    let r2 = dot(&p.0, &p.0);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for a in axes {
        let k = dot(&a, &p.0) / r2;
        let mut v: Vec<f64> = a.iter().zip(&p.0).map(|(x, y)| x - k * y).collect();
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let len = dot(&v, &v).sqrt();
        if len > 1e-3 && basis.len() < 2 {
            basis.push(v.iter().map(|x| x / len).collect());
        }
    }
    basis
}

pub struct Case {
    pub params: RnnParams,
    pub inputs: Vec<Array2<f64>>,
    pub context: Option<Array2<f64>>,
    pub targets: Array2<f64>,
    pub criterion: Criterion,
}

pub fn random(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((r, c), || rng.random_range(-scale..scale))
}

pub fn case(seed: u64, relu: bool, two_layers: bool, softmax_ce: bool) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (batch, t_len, input, out) = (3, 4, 2, 3);
    let hidden_dims = if two_layers { vec![4, 3] } else { vec![5] };
    let encoded = rng.random_bool(0.5);
    let shape = RnnShape {
        input_dim: input,
        hidden_dims,
        output_dim: out,
        bias: rng.random_bool(0.5),
        decoder_bias: rng.random_bool(0.5),
        init_dim: encoded.then_some(2),
    };
    let (nonlin, criterion, act) = (
        if relu { Nonlinearity::Relu } else { Nonlinearity::Tanh },
        if softmax_ce {
            Criterion::SoftmaxCrossEntropy
        } else {
            Criterion::Mse
        },
        if softmax_ce {
            OutputActivation::Softmax
        } else {
            OutputActivation::Identity
        },
    );
    let mut params = RnnParams::init(&shape, nonlin, act, rng.random()).unwrap();
    params.scale(1.5);
    let inputs = (0..t_len).map(|_| random(&mut rng, batch, input, 1.0)).collect();
    let context = encoded.then(|| random(&mut rng, batch, 2, 1.0));
    let targets = if softmax_ce {
        let raw = random(&mut rng, batch, out, 2.0);
        let mut t = raw.clone();
        for (mut row, src) in t.rows_mut().into_iter().zip(raw.rows()) {
            let s = softmax(src.as_slice().unwrap()).unwrap();
            row.iter_mut().zip(s).for_each(|(a, b)| *a = b);
        }
        t
    } else {
        random(&mut rng, batch, out, 1.0)
    };
    Case {
        params,
        inputs,
        context,
        targets,
        criterion,
    }
}

pub fn loss(c: &Case, params: &RnnParams) -> f64 {
    let init = match &c.context {
        Some(x) => InitialState::Encoded(x),
        None => InitialState::Zeros,
    };
    let trace = forward(params, &c.inputs, init).unwrap();
    c.criterion.loss_and_grad(&trace.logits, &c.targets).unwrap().0
}

pub fn analytic(c: &Case) -> RnnParams {
    let init = match &c.context {
        Some(x) => InitialState::Encoded(x),
        None => InitialState::Zeros,
    };
    let trace = forward(&c.params, &c.inputs, init).unwrap();
    let (_, g) = c.criterion.loss_and_grad(&trace.logits, &c.targets).unwrap();
    backward(&c.params, &trace, &g).unwrap().params
}

/// Largest entrywise relative gap between BPTT and central differences.
/// Worst relative gap between BPTT gradients and a fourth-order central
/// difference over every parameter entry, with the number of entries skipped
/// because two step sizes disagree (a ReLU kink lies within the stencil).
pub fn bptt_max_rel_error(c: &Case) -> (f64, usize) {
    let grads = analytic(c);
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for id in c.params.tensor_ids() {
        let n = c.params.tensor(id).unwrap().len();
        let g = grads.tensor(id).unwrap();
        for i in 0..n {
            let bump = |delta: f64| {
                let mut p = c.params.clone();
                let mut t = p.tensor_mut(id).unwrap();
                let idx: IxDyn = nth_index(t.shape(), i);
                t[&idx] += delta;
                loss(c, &p)
            };
            let stencil = |h: f64| (bump(-2.0 * h) - 8.0 * bump(-h) + 8.0 * bump(h) - bump(2.0 * h)) / (12.0 * h);
            let (fd, check) = (stencil(1e-4), stencil(5e-5));
            if (fd - check).abs() > 1e-6 * fd.abs().max(check.abs()) + 1e-10 {
                skipped += 1;
                continue;
            }
            let an = g[&nth_index(g.shape(), i)];
            worst = worst.max((fd - an).abs() / an.abs().max(fd.abs()).max(1e-6));
        }
    }
    (worst, skipped)
}

pub fn nth_index(shape: &[usize], mut i: usize) -> IxDyn {
    let mut idx = vec![0; shape.len()];
    for (slot, &len) in idx.iter_mut().zip(shape).rev() {
        *slot = i % len;
        i /= len;
    }
    IxDyn(&idx)
}

pub fn random_signed(rows: usize, cols: usize, seed: u64, lo: f64, hi: f64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || {
        let v = rng.random_range(lo..hi);
        if rng.random_bool(0.5) {
            v
        } else {
            -v
        }
    })
}

pub fn moved(e: &Embedding, j: usize, v: &[f64], t: f64) -> Embedding {
    let mut out = e.clone();
    out.points[j] = shifted(&e.manifold, &e.points[j], v, t);
    out
}

/// Norm of the gap between the penalty weight gradient and central differences,
/// and the norm of the gradient.
pub fn weight_grad_error(seed: u64, ell: f64) -> (f64, f64) {
    let (r, c) = (4, 5);
    let coeffs = CoefficientMatrix::from_values(
        random_signed(r, c, seed, 0.0, 4.0).mapv(f64::abs),
        CoefficientSource::Moduli,
        ell,
    )
    .unwrap();
    let w = random_signed(r, c, seed ^ 7, 1e-3, 2.0);
    let g = penalty_weight_grad(&coeffs, &w).unwrap();
    let (mut err2, mut norm2) = (0.0, 0.0);
    for j in 0..r {
        for k in 0..c {
            let h = 1e-4 * w[[j, k]].abs();
            let mut wp = w.clone();
            wp[[j, k]] += h;
            let mut wm = w.clone();
            wm[[j, k]] -= h;
            let fd = (penalty(&coeffs, &wp).unwrap() - penalty(&coeffs, &wm).unwrap()) / (2.0 * h);
            err2 += (fd - g[[j, k]]).powi(2);
            norm2 += g[[j, k]].powi(2);
        }
    }
    (err2.sqrt(), norm2.sqrt())
}

/// Largest per-point relative gap between the penalty embedding gradient and
/// central differences along tangent directions, skipping points next to a
/// cut locus.
pub fn embedding_grad_max_rel_error(m: &ManifoldSpec, inh: &InhibitorSpec, seed: u64, split: bool) -> f64 {
    let mut worst: f64 = 0.0;
    let n = 5;
    let rows = sample_uniform(m, n, seed).unwrap();
    let cols = sample_uniform(m, n, seed ^ 11).unwrap();
    let w = random_signed(n, n, seed ^ 5, 0.05, 1.0);
    let h = 1e-6;
    {
        let cost = |r: &Embedding, c: &Embedding| penalty(&build_coefficients(r, c, inh, 1.0).unwrap(), &w).unwrap();
        let (pair, grads) = if split {
            let g = penalty_embedding_grad(
                EmbeddingPair::Split {
                    rows: &rows,
                    cols: &cols,
                },
                inh,
                &w,
                1.0,
            )
            .unwrap();
            (true, vec![(0, g.rows), (1, g.cols.unwrap())])
        } else {
            let g = penalty_embedding_grad(EmbeddingPair::Shared(&rows), inh, &w, 1.0).unwrap();
            (false, vec![(0, g.rows)])
        };
        for (side, per_point) in grads {
            for (j, g) in per_point.iter().enumerate() {
                let base = if side == 0 { &rows } else { &cols };
                let eval = |t: f64, v: &[f64]| {
                    let moved = moved(base, j, v, t);
                    match (pair, side) {
                        (false, _) => cost(&moved, &moved),
                        (true, 0) => cost(&moved, &cols),
                        (true, _) => cost(&rows, &moved),
                    }
                };
                let centre = eval(0.0, &vec![0.0; g.len()]);
                let mut kink = false;
                let mut err2 = 0.0;
                let mut norm2 = 0.0;
                for v in tangent_basis(m, &base.points[j]) {
                    let (plus, minus) = (eval(h, &v), eval(-h, &v));
                    if ((plus - centre) / h - (centre - minus) / h).abs() > 1e-3 * (1.0 + dot(g, &v).abs()) {
                        kink = true;
                    }
                    let fd = (plus - minus) / (2.0 * h);
                    let an = dot(g, &v);
                    err2 += (fd - an).powi(2);
                    norm2 += an * an;
                }
                if !kink {
                    worst = worst.max(err2.sqrt() / norm2.sqrt().max(1e-2));
                }
            }
        }
    }
    worst
}

/// Fourth-order central difference of an inhibitor.
pub fn inhibitor_fd(spec: &InhibitorSpec, d: f64) -> f64 {
    let f = |x: f64| evaluate(spec, x).unwrap();
    let h = 1e-3 * d.max(0.05).min(1.0);
    (f(d - 2.0 * h) - 8.0 * f(d - h) + 8.0 * f(d + h) - f(d + 2.0 * h)) / (12.0 * h)
}

pub fn smooth_inhibitors() -> Vec<InhibitorSpec> {
    vec![
        InhibitorSpec::dog(10.0, 1.0, 5.0).unwrap(),
        InhibitorSpec::ricker(2.0, 1.5).unwrap(),
        InhibitorSpec::sinusoid(3.0, 0.7).unwrap(),
        InhibitorSpec::diffusion(0.5, 2.0).unwrap(),
    ]
}

pub fn manifolds() -> Vec<ManifoldSpec> {
    vec![
        ManifoldSpec::circle(),
        ManifoldSpec::sphere(),
        ManifoldSpec::torus2(),
        ManifoldSpec::klein_bottle(),
        ManifoldSpec::torus6(),
        ManifoldSpec::euclidean(2),
    ]
}
