//! The spectral GNN of the artifact: `logits = g_theta(M) f_W(X)` with
//! `f_W` a two-layer MLP, softmax fused into the cross-entropy loss, and
//! exact hand-derived gradients for both parameter blocks.
//!
//! Dropout is applied before and inside the MLP, never after the graph
//! filter, with inverted scaling so eval mode needs no rescale. Biases
//! belong to the W block for all norm/GPNR/Hessian purposes.

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{apply_filter, BasisCache, FilterCoeffs, FilterFamily, FilterSpec};
use crate::error::{Error, Result};
use crate::graphcore::SparseMatrix;

/// Filter coefficients theta plus the two-layer MLP weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta: FilterCoeffs,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Gradients (or any co-shaped accumulator) partitioned like [`ModelParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBundle {
    pub theta: Vec<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl ModelParams {
    pub fn d_theta(&self) -> usize {
        self.theta.len()
    }

    /// Total parameter count of the W block (both MLP layers and biases).
    pub fn d_w(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn theta_norm(&self) -> f64 {
        self.theta.norm()
    }

    pub fn w_norm(&self) -> f64 {
        let s: f64 = self.w1.iter().map(|x| x * x).sum::<f64>()
            + self.b1.iter().map(|x| x * x).sum::<f64>()
            + self.w2.iter().map(|x| x * x).sum::<f64>()
            + self.b2.iter().map(|x| x * x).sum::<f64>();
        s.sqrt()
    }

    pub fn zeros_like_grad(&self) -> GradientBundle {
        GradientBundle {
            theta: vec![0.0; self.theta.len()],
            w1: Array2::zeros(self.w1.raw_dim()),
            b1: Array1::zeros(self.b1.raw_dim()),
            w2: Array2::zeros(self.w2.raw_dim()),
            b2: Array1::zeros(self.b2.raw_dim()),
        }
    }

    /// Canonical flattening `[theta; vec(w1); b1; vec(w2); b2]` (row-major).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.d_theta() + self.d_w());
        out.extend_from_slice(&self.theta.0);
        out.extend(self.w1.iter());
        out.extend(self.b1.iter());
        out.extend(self.w2.iter());
        out.extend(self.b2.iter());
        out
    }

    /// Rebuild params from a flat vector laid out in canonical order, using
    /// `self` as the shape template.
    pub fn from_flat(&self, flat: &[f64]) -> ModelParams {
        assert_eq!(flat.len(), self.d_theta() + self.d_w());
        let mut it = flat.iter().copied();
        let theta: Vec<f64> = (&mut it).take(self.theta.len()).collect();
        let w1 = Array2::from_shape_vec(
            self.w1.raw_dim(),
            (&mut it).take(self.w1.len()).collect(),
        )
        .unwrap();
        let b1 = Array1::from_iter((&mut it).take(self.b1.len()));
        let w2 = Array2::from_shape_vec(
            self.w2.raw_dim(),
            (&mut it).take(self.w2.len()).collect(),
        )
        .unwrap();
        let b2 = Array1::from_iter(it);
        ModelParams {
            theta: FilterCoeffs(theta),
            w1,
            b1,
            w2,
            b2,
        }
    }
}

impl GradientBundle {
    pub fn theta_norm(&self) -> f64 {
        self.theta.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn w_norm(&self) -> f64 {
        let s: f64 = self.w1.iter().map(|x| x * x).sum::<f64>()
            + self.b1.iter().map(|x| x * x).sum::<f64>()
            + self.w2.iter().map(|x| x * x).sum::<f64>()
            + self.b2.iter().map(|x| x * x).sum::<f64>();
        s.sqrt()
    }

    /// Same canonical flattening as [`ModelParams::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.theta);
        out.extend(self.w1.iter());
        out.extend(self.b1.iter());
        out.extend(self.w2.iter());
        out.extend(self.b2.iter());
        out
    }

    /// Scale the theta block by `s_theta` and every W-block tensor by `s_w`.
    pub fn scale_blocks(&self, s_theta: f64, s_w: f64) -> GradientBundle {
        GradientBundle {
            theta: self.theta.iter().map(|x| x * s_theta).collect(),
            w1: &self.w1 * s_w,
            b1: &self.b1 * s_w,
            w2: &self.w2 * s_w,
            b2: &self.b2 * s_w,
        }
    }

    /// Visit the matched coordinates of two bundles, mutating `self`.
    pub fn zip_apply(&mut self, other: &GradientBundle, mut f: impl FnMut(&mut f64, f64)) {
        for (a, b) in self.theta.iter_mut().zip(&other.theta) {
            f(a, *b);
        }
        for (a, b) in self.w1.iter_mut().zip(other.w1.iter()) {
            f(a, *b);
        }
        for (a, b) in self.b1.iter_mut().zip(other.b1.iter()) {
            f(a, *b);
        }
        for (a, b) in self.w2.iter_mut().zip(other.w2.iter()) {
            f(a, *b);
        }
        for (a, b) in self.b2.iter_mut().zip(other.b2.iter()) {
            f(a, *b);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|x| x.is_finite())
    }
}

/// Apply a per-coordinate update `p <- f(p, g)` across both blocks.
pub fn apply_to_params(p: &ModelParams, g: &GradientBundle, mut f: impl FnMut(f64, f64) -> f64) -> ModelParams {
    let mut out = p.clone();
    for (a, b) in out.theta.0.iter_mut().zip(&g.theta) {
        *a = f(*a, *b);
    }
    for (a, b) in out.w1.iter_mut().zip(g.w1.iter()) {
        *a = f(*a, *b);
    }
    for (a, b) in out.b1.iter_mut().zip(g.b1.iter()) {
        *a = f(*a, *b);
    }
    for (a, b) in out.w2.iter_mut().zip(g.w2.iter()) {
        *a = f(*a, *b);
    }
    for (a, b) in out.b2.iter_mut().zip(g.b2.iter()) {
        *a = f(*a, *b);
    }
    out
}

/// Forward execution mode. Hessian probes always use `Eval`: finite
/// differences through dropout randomness would be meaningless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForwardMode {
    Eval,
    Train {
        dropout_input: f64,
        dropout_hidden: f64,
        seed: u64,
    },
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub x_dropped: Array2<f64>,
    pub z1: Array2<f64>,
    pub a1: Array2<f64>,
    /// Inverted-scaling hidden dropout mask (1/(1-p) or 0); `None` in eval.
    pub hidden_mask: Option<Array2<f64>>,
    pub basis: BasisCache,
    pub logits: Array2<f64>,
}

/// Glorot-uniform MLP init plus the per-family theta scheme. The monomial
/// family uses the geometric scheme `theta_k = alpha (1-alpha)^k` with the
/// remainder `(1-alpha)^K` on the last coefficient; other families default
/// to the identity filter `theta = e_0` unless `init_alpha` is given.
pub fn init_params(
    seed: u64,
    d: usize,
    hidden: usize,
    n_classes: usize,
    spec: &FilterSpec,
    init_alpha: Option<f64>,
) -> ModelParams {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let glorot = |rng: &mut ChaCha20Rng, rows: usize, cols: usize| {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..limit))
    };
    let w1 = glorot(&mut rng, d, hidden);
    let w2 = glorot(&mut rng, hidden, n_classes);
    let k = spec.order;

    let alpha = match (spec.family, init_alpha) {
        (_, Some(a)) => Some(a),
        (FilterFamily::Monomial, None) => Some(0.5),
        _ => None,
    };
    let theta = match alpha {
        Some(a) => {
            let mut t: Vec<f64> = (0..=k).map(|i| a * (1.0 - a).powi(i as i32)).collect();
            t[k] = (1.0 - a).powi(k as i32);
            t
        }
        None => {
            let mut t = vec![0.0; k + 1];
            t[0] = 1.0;
            t
        }
    };
    ModelParams {
        theta: FilterCoeffs(theta),
        w1,
        b1: Array1::zeros(hidden),
        w2,
        b2: Array1::zeros(n_classes),
    }
}

fn dropout(x: &Array2<f64>, rate: f64, rng: &mut ChaCha20Rng) -> (Array2<f64>, Array2<f64>) {
    if rate <= 0.0 {
        return (x.clone(), Array2::from_elem(x.raw_dim(), 1.0));
    }
    let keep = 1.0 - rate;
    let mask = Array2::from_shape_fn(x.raw_dim(), |_| {
        if rng.gen::<f64>() < keep {
            1.0 / keep
        } else {
            0.0
        }
    });
    (x * &mask, mask)
}

/// Full forward pass; softmax is fused into the loss, so `logits` are raw.
pub fn forward(
    p: &ModelParams,
    spec: &FilterSpec,
    m: &SparseMatrix,
    x: ArrayView2<f64>,
    mode: ForwardMode,
) -> Result<(Array2<f64>, ForwardCache)> {
    if x.ncols() != p.w1.nrows() {
        return Err(Error::input(format!(
            "feature dim {} does not match w1 rows {}",
            x.ncols(),
            p.w1.nrows()
        )));
    }
    let (x_dropped, z1, a1, hidden_mask) = match mode {
        ForwardMode::Eval => {
            let xd = x.to_owned();
            let z1 = xd.dot(&p.w1) + &p.b1;
            let a1 = z1.mapv(|v| v.max(0.0));
            (xd, z1, a1, None)
        }
        ForwardMode::Train {
            dropout_input,
            dropout_hidden,
            seed,
        } => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let (xd, _) = dropout(&x.to_owned(), dropout_input, &mut rng);
            let z1 = xd.dot(&p.w1) + &p.b1;
            let relu = z1.mapv(|v| v.max(0.0));
            let (a1, mask) = dropout(&relu, dropout_hidden, &mut rng);
            (xd, z1, a1, Some(mask))
        }
    };
    let h = a1.dot(&p.w2) + &p.b2;
    let (logits, basis) = apply_filter(spec, &p.theta, m, h.view())?;
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("non-finite activation in forward pass"));
    }
    Ok((
        logits.clone(),
        ForwardCache {
            x_dropped,
            z1,
            a1,
            hidden_mask,
            basis,
            logits,
        },
    ))
}

/// Row-stabilized softmax probabilities.
pub fn softmax_rows(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean softmax cross-entropy over the masked nodes (log-sum-exp with max
/// subtraction).
pub fn empirical_loss(logits: ArrayView2<f64>, labels: &[usize], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::input("empirical loss over an empty node mask"));
    }
    let mut total = 0.0;
    for &i in mask {
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[labels[i]];
    }
    Ok(total / mask.len() as f64)
}

/// Classification accuracy (fraction in [0,1]) over the masked nodes.
pub fn accuracy(logits: ArrayView2<f64>, labels: &[usize], mask: &[usize]) -> f64 {
    if mask.is_empty() {
        return 0.0;
    }
    let correct = mask
        .iter()
        .filter(|&&i| {
            let row = logits.row(i);
            let mut best = 0;
            for c in 1..row.len() {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best == labels[i]
        })
        .count();
    correct as f64 / mask.len() as f64
}

/// Exact gradients for both blocks. `d logits = (softmax - onehot)/|mask|`
/// on masked rows; the filter transpose reuses `apply_filter` (the graph
/// operators are symmetric, so `g_theta(M)^T = g_theta(M)`).
pub fn backward(
    p: &ModelParams,
    spec: &FilterSpec,
    m: &SparseMatrix,
    cache: &ForwardCache,
    labels: &[usize],
    mask: &[usize],
) -> Result<GradientBundle> {
    if mask.is_empty() {
        return Err(Error::input("backward over an empty node mask"));
    }
    let n = cache.logits.nrows();
    let c = cache.logits.ncols();
    let inv_m = 1.0 / mask.len() as f64;

    let mut dlogits = Array2::zeros((n, c));
    for &i in mask {
        let row = cache.logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        for v in &mut exps {
            *v /= sum;
        }
        for j in 0..c {
            dlogits[[i, j]] = exps[j] * inv_m;
        }
        dlogits[[i, labels[i]]] -= inv_m;
    }

    // theta gradient: inner product against the cached basis blocks.
    let dtheta: Vec<f64> = cache
        .basis
        .blocks
        .iter()
        .map(|blk| blk.iter().zip(dlogits.iter()).map(|(a, b)| a * b).sum())
        .collect();

    // Upstream gradient through the (symmetric) filter.
    let (dh, _) = apply_filter(spec, &p.theta, m, dlogits.view())?;

    let dw2 = cache.a1.t().dot(&dh);
    let db2 = dh.sum_axis(ndarray::Axis(0));
    let mut da1 = dh.dot(&p.w2.t());
    if let Some(mask_h) = &cache.hidden_mask {
        da1 *= mask_h;
    }
    let dz1 = ndarray::Zip::from(&da1)
        .and(&cache.z1)
        .map_collect(|&g, &z| if z > 0.0 { g } else { 0.0 });
    let dw1 = cache.x_dropped.t().dot(&dz1);
    let db1 = dz1.sum_axis(ndarray::Axis(0));

    Ok(GradientBundle {
        theta: dtheta,
        w1: dw1,
        b1: db1,
        w2: dw2,
        b2: db2,
    })
}

/// Deterministic eval-mode loss + gradient evaluator, the form the Hessian
/// probes consume.
pub fn eval_loss_grad(
    p: &ModelParams,
    spec: &FilterSpec,
    m: &SparseMatrix,
    x: ArrayView2<f64>,
    labels: &[usize],
    mask: &[usize],
) -> Result<(f64, GradientBundle)> {
    let (logits, cache) = forward(p, spec, m, x, ForwardMode::Eval)?;
    let loss = empirical_loss(logits.view(), labels, mask)?;
    let grad = backward(p, spec, m, &cache, labels, mask)?;
    Ok((loss, grad))
}
