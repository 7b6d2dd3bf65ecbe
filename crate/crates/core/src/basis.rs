//! Polynomial filter families applied through their three-term recursions.
//!
//! `apply_filter` evaluates `sum_k theta_k T_k(M) h` without materializing
//! any `T_k(M)`; each per-coefficient block `T_k(M) h` is retained in a
//! [`BasisCache`] so the gradient with respect to `theta_k` is a plain
//! inner product against the upstream gradient.
//!
//! Sign conventions resolved against the Legendre oracle (a = b = 0): the
//! Jacobi recursion uses `P_k = gamma_k M P_{k-1} + gamma'_k P_{k-1} +
//! gamma''_k P_{k-2}` with a *negative* `gamma''_k` (the classical
//! recursion subtracts the `P_{k-2}` term) and `(k+a-1)` in its numerator;
//! `P_1 = (a-b)/2 I + (a+b+2)/2 M`. The ChebNetII reduction keeps the
//! uniform `2/(K+2)` prefactor on every interpolation term, including
//! k = 0, as published (standard Chebyshev interpolation would halve the
//! k = 0 term).

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphcore::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterFamily {
    Chebyshev,
    ChebyshevIi,
    Jacobi,
    Monomial,
    Bernstein,
}

impl FilterFamily {
    pub const ALL: [FilterFamily; 5] = [
        FilterFamily::Chebyshev,
        FilterFamily::ChebyshevIi,
        FilterFamily::Jacobi,
        FilterFamily::Monomial,
        FilterFamily::Bernstein,
    ];

    /// Which normalized graph operator this family expects.
    pub fn matrix_variant(self) -> crate::graphcore::MatrixVariant {
        use crate::graphcore::MatrixVariant::*;
        match self {
            FilterFamily::Chebyshev | FilterFamily::ChebyshevIi => ShiftedNormLaplacian,
            FilterFamily::Jacobi => NormAdjacency,
            FilterFamily::Monomial => NormAdjacencySelfLoop,
            FilterFamily::Bernstein => NormLaplacian,
        }
    }
}

impl std::fmt::Display for FilterFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FilterFamily::Chebyshev => "chebyshev",
            FilterFamily::ChebyshevIi => "chebyshev_ii",
            FilterFamily::Jacobi => "jacobi",
            FilterFamily::Monomial => "monomial",
            FilterFamily::Bernstein => "bernstein",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for FilterFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chebyshev" | "chebnet" => Ok(FilterFamily::Chebyshev),
            "chebyshev_ii" | "chebnet2" | "chebnetii" => Ok(FilterFamily::ChebyshevIi),
            "jacobi" | "jacobiconv" => Ok(FilterFamily::Jacobi),
            "monomial" | "gprgnn" => Ok(FilterFamily::Monomial),
            "bernstein" | "bernnet" => Ok(FilterFamily::Bernstein),
            other => Err(Error::parameter(format!("unknown filter family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub family: FilterFamily,
    /// Polynomial order K; the coefficient vector has K+1 entries.
    pub order: usize,
    pub jacobi_a: f64,
    pub jacobi_b: f64,
}

impl FilterSpec {
    pub fn new(family: FilterFamily, order: usize) -> Self {
        FilterSpec {
            family,
            order,
            jacobi_a: 1.0,
            jacobi_b: 1.0,
        }
    }

    pub fn with_jacobi(mut self, a: f64, b: f64) -> Self {
        self.jacobi_a = a;
        self.jacobi_b = b;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.family == FilterFamily::Jacobi && (self.jacobi_a <= -1.0 || self.jacobi_b <= -1.0) {
            return Err(Error::parameter(format!(
                "jacobi parameters must be > -1, got a={}, b={}",
                self.jacobi_a, self.jacobi_b
            )));
        }
        Ok(())
    }
}

/// Filter coefficient vector theta, length K+1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCoeffs(pub Vec<f64>);

impl FilterCoeffs {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Per-coefficient basis blocks from a filter application. `blocks[k]` is
/// the matrix multiplying `theta_k` in the output, so the output equals
/// `sum_k theta_k blocks[k]` bitwise (same accumulation order).
#[derive(Debug, Clone)]
pub struct BasisCache {
    pub blocks: Vec<Array2<f64>>,
}

impl BasisCache {
    /// Recombine with a coefficient vector, in the same order the forward
    /// pass used.
    pub fn combine(&self, theta: &[f64]) -> Array2<f64> {
        combine_blocks(theta, &self.blocks)
    }
}

fn combine_blocks(theta: &[f64], blocks: &[Array2<f64>]) -> Array2<f64> {
    let mut out = &blocks[0] * theta[0];
    for k in 1..theta.len() {
        out.scaled_add(theta[k], &blocks[k]);
    }
    out
}

/// Apply `g_theta(M) h` via the family's recursion; returns the output and
/// the per-coefficient basis cache for gradient reuse.
pub fn apply_filter(
    spec: &FilterSpec,
    coeffs: &FilterCoeffs,
    m: &SparseMatrix,
    h: ArrayView2<f64>,
) -> Result<(Array2<f64>, BasisCache)> {
    spec.validate()?;
    if m.n_rows != m.n_cols {
        return Err(Error::input(format!(
            "filter operator must be square, got {}x{}",
            m.n_rows, m.n_cols
        )));
    }
    if m.n_cols != h.nrows() {
        return Err(Error::input(format!(
            "filter shape mismatch: operator is {}x{}, features have {} rows",
            m.n_rows,
            m.n_cols,
            h.nrows()
        )));
    }
    if coeffs.len() != spec.order + 1 {
        return Err(Error::input(format!(
            "coefficient vector has {} entries, expected K+1 = {}",
            coeffs.len(),
            spec.order + 1
        )));
    }

    let blocks = basis_blocks(spec, m, h)?;
    let out = combine_blocks(&coeffs.0, &blocks);
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric(format!(
            "non-finite output from {} filter of order {}",
            spec.family, spec.order
        )));
    }
    Ok((out, BasisCache { blocks }))
}

/// The per-coefficient basis blocks `T_k(M) h` (or, for ChebNetII and
/// Bernstein, the block multiplying the k-th learnable coefficient).
pub fn basis_blocks(
    spec: &FilterSpec,
    m: &SparseMatrix,
    h: ArrayView2<f64>,
) -> Result<Vec<Array2<f64>>> {
    let k_max = spec.order;
    match spec.family {
        FilterFamily::Chebyshev => chebyshev_blocks(m, h, k_max),
        FilterFamily::ChebyshevIi => {
            let cheb = chebyshev_blocks(m, h, k_max)?;
            // theta_j multiplies (2/(K+2)) sum_k T_k(x_j) T_k(M) h.
            let weights = chebii_node_weights(k_max);
            let mut out = Vec::with_capacity(k_max + 1);
            for j in 0..=k_max {
                out.push(combine_blocks(&weights[j], &cheb));
            }
            Ok(out)
        }
        FilterFamily::Jacobi => {
            let (a, b) = (spec.jacobi_a, spec.jacobi_b);
            let mut blocks = Vec::with_capacity(k_max + 1);
            blocks.push(h.to_owned());
            if k_max >= 1 {
                let mh = m.spmm(h)?;
                blocks.push(&mh * ((a + b + 2.0) / 2.0) + &h.to_owned() * ((a - b) / 2.0));
            }
            for k in 2..=k_max {
                let (g, gp, gpp) = jacobi_recursion_coeffs(a, b, k)?;
                let prev = &blocks[k - 1];
                let prev2 = &blocks[k - 2];
                let mut next = m.spmm(prev.view())? * g;
                next.scaled_add(gp, prev);
                next.scaled_add(gpp, prev2);
                blocks.push(next);
            }
            Ok(blocks)
        }
        FilterFamily::Monomial => {
            let mut blocks = Vec::with_capacity(k_max + 1);
            blocks.push(h.to_owned());
            for k in 1..=k_max {
                let next = m.spmm(blocks[k - 1].view())?;
                blocks.push(next);
            }
            Ok(blocks)
        }
        FilterFamily::Bernstein => {
            // theta_k multiplies (1/2^K) C(K,k) (2I-L)^{K-k} L^k h. Powers
            // of L and 2I-L commute, so build L^k h once and then lift.
            let mut lk = Vec::with_capacity(k_max + 1);
            lk.push(h.to_owned());
            for k in 1..=k_max {
                let next = m.spmm(lk[k - 1].view())?;
                lk.push(next);
            }
            let scale = 0.5f64.powi(k_max as i32);
            let mut blocks = Vec::with_capacity(k_max + 1);
            for k in 0..=k_max {
                let mut w = lk[k].clone();
                for _ in 0..(k_max - k) {
                    // (2I - L) w
                    let lw = m.spmm(w.view())?;
                    w = &w * 2.0 - &lw;
                }
                blocks.push(w * (scale * binomial(k_max, k)));
            }
            Ok(blocks)
        }
    }
}

fn chebyshev_blocks(
    m: &SparseMatrix,
    h: ArrayView2<f64>,
    k_max: usize,
) -> Result<Vec<Array2<f64>>> {
    let mut blocks = Vec::with_capacity(k_max + 1);
    blocks.push(h.to_owned());
    if k_max >= 1 {
        blocks.push(m.spmm(h)?);
    }
    for k in 2..=k_max {
        let mt = m.spmm(blocks[k - 1].view())?;
        let next = &mt * 2.0 - &blocks[k - 2];
        blocks.push(next);
    }
    Ok(blocks)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Chebyshev polynomial of the first kind at a scalar, by recursion.
pub fn chebyshev_t_scalar(k: usize, x: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut t0, mut t1) = (1.0, x);
            for _ in 2..=k {
                let t2 = 2.0 * x * t1 - t0;
                t0 = t1;
                t1 = t2;
            }
            t1
        }
    }
}

/// ChebNetII interpolation weights: `w[j][k] = (2/(K+2)) T_k(x_j)` with
/// `x_j = cos((j+1/2) pi / (K+1))` the j-th Chebyshev node.
fn chebii_node_weights(k_max: usize) -> Vec<Vec<f64>> {
    let kk = k_max as f64;
    let prefactor = 2.0 / (kk + 2.0);
    (0..=k_max)
        .map(|j| {
            let xj = ((j as f64 + 0.5) * std::f64::consts::PI / (kk + 1.0)).cos();
            (0..=k_max)
                .map(|k| prefactor * chebyshev_t_scalar(k, xj))
                .collect()
        })
        .collect()
}

/// Reduce ChebNetII's learnable parameters to effective Chebyshev
/// coefficients: `c_k = (2/(K+2)) sum_j theta_j T_k(x_j)`.
pub fn chebii_effective_coeffs(theta: &[f64], k_max: usize) -> Vec<f64> {
    assert_eq!(theta.len(), k_max + 1);
    let weights = chebii_node_weights(k_max);
    let mut c = vec![0.0; k_max + 1];
    for (j, wj) in weights.iter().enumerate() {
        for k in 0..=k_max {
            c[k] += theta[j] * wj[k];
        }
    }
    c
}

/// The three scalars of the Jacobi three-term recursion
/// `P_k = gamma_k M P_{k-1} + gamma'_k P_{k-1} + gamma''_k P_{k-2}`.
pub fn jacobi_recursion_coeffs(a: f64, b: f64, k: usize) -> Result<(f64, f64, f64)> {
    if a <= -1.0 || b <= -1.0 {
        return Err(Error::parameter(format!(
            "jacobi parameters must be > -1, got a={a}, b={b}"
        )));
    }
    if k < 2 {
        return Err(Error::parameter(format!(
            "jacobi recursion coefficients defined for k >= 2, got k={k}"
        )));
    }
    let kf = k as f64;
    let d0 = 2.0 * kf * (kf + a + b);
    let d1 = 2.0 * kf + a + b - 2.0;
    if d0 == 0.0 || d1 == 0.0 {
        return Err(Error::parameter(format!(
            "jacobi recursion denominator vanishes at k={k}, a={a}, b={b}"
        )));
    }
    let gamma = (2.0 * kf + a + b) * (2.0 * kf + a + b - 1.0) / d0;
    let gamma_p = (2.0 * kf + a + b - 1.0) * (a * a - b * b) / (d0 * d1);
    let gamma_pp = -(kf + a - 1.0) * (kf + b - 1.0) * (2.0 * kf + a + b) / (kf * (kf + a + b) * d1);
    Ok((gamma, gamma_p, gamma_pp))
}
