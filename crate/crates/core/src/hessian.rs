//! Hessian spectrum probing without materializing the Hessian:
//! finite-difference Hessian-vector products, block-restricted power
//! iteration over the [theta | W] partition of the flat parameter vector,
//! the block condition number, and the post-training assumption audit.
//!
//! Everything here runs against an eval-mode loss evaluator — dropout
//! randomness would turn the finite differences into noise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GradientBundle, ModelParams};
use crate::optim::{gpnr, TrainResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// A loss-and-gradient evaluator; must be a deterministic function of the
/// parameters (eval-mode forward).
pub type LossEvaluator<'a> = dyn FnMut(&ModelParams) -> Result<(f64, GradientBundle)> + 'a;

/// Which diagonal block of the Hessian (in the canonical flat order
/// [theta; vec(w1); b1; vec(w2); b2]) an operation addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSpec {
    Theta,
    W,
    Full,
}

impl BlockSpec {
    pub fn range(self, d_theta: usize, d_full: usize) -> std::ops::Range<usize> {
        match self {
            BlockSpec::Theta => 0..d_theta,
            BlockSpec::W => d_theta..d_full,
            BlockSpec::Full => 0..d_full,
        }
    }
}

/// Zero every coordinate outside the block. Idempotent.
pub fn project_block(v: &mut [f64], range: &std::ops::Range<usize>) {
    for (i, x) in v.iter_mut().enumerate() {
        if !range.contains(&i) {
            *x = 0.0;
        }
    }
}

/// Relative step for the central differences; multiplied by (1 + ||p||).
pub const DEFAULT_FD_EPS: f64 = 1e-4;

/// Hessian-vector product by central differences of the gradient:
/// `(grad(p + eps*v_hat) - grad(p - eps*v_hat)) / (2 eps) * ||v||`.
/// Exact for quadratics up to roundoff.
pub fn hvp(
    eval: &mut LossEvaluator,
    p: &ModelParams,
    v: &[f64],
    eps_rel: f64,
) -> Result<Vec<f64>> {
    let flat = p.to_flat();
    if flat.len() != v.len() {
        return Err(Error::input(format!(
            "hvp direction has {} coords, parameters have {}",
            v.len(),
            flat.len()
        )));
    }
    let v_norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if v_norm == 0.0 {
        return Err(Error::input("hvp direction must be nonzero"));
    }
    let p_norm = flat.iter().map(|x| x * x).sum::<f64>().sqrt();
    let eps = eps_rel * (1.0 + p_norm);

    let shifted = |sign: f64| -> Vec<f64> {
        flat.iter()
            .zip(v)
            .map(|(x, d)| x + sign * eps * d / v_norm)
            .collect()
    };
    let (_, g_plus) = eval(&p.from_flat(&shifted(1.0)))?;
    let (_, g_minus) = eval(&p.from_flat(&shifted(-1.0)))?;
    let gp = g_plus.to_flat();
    let gm = g_minus.to_flat();
    let out: Vec<f64> = gp
        .iter()
        .zip(&gm)
        .map(|(a, b)| (a - b) / (2.0 * eps) * v_norm)
        .collect();
    if !out.iter().all(|x| x.is_finite()) {
        return Err(Error::numeric("non-finite Hessian-vector product"));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    /// Signed dominant eigenvalue of the block (sign from the Rayleigh
    /// quotient; power iteration itself converges on |lambda|).
    pub lambda: f64,
    /// `||Hv - lambda v|| / |lambda|` at the returned iterate.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration on an arbitrary symmetric operator over flat vectors,
/// restricted to `range`: probes start inside the block and operator
/// output is projected back onto it.
pub fn block_lambda_max_op(
    op: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    dim: usize,
    range: std::ops::Range<usize>,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<SpectrumEstimate> {
    if tol <= 0.0 {
        return Err(Error::parameter("power iteration tolerance must be positive"));
    }
    if range.is_empty() || range.end > dim {
        return Err(Error::input("empty or out-of-range block"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut v = vec![0.0f64; dim];
    for i in range.clone() {
        v[i] = rng.gen_range(-1.0..1.0);
    }
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let n0 = norm(&v);
    for x in v.iter_mut() {
        *x /= n0;
    }

    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let mut w = op(&v)?;
        project_block(&mut w, &range);
        let rayleigh: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let w_norm = norm(&w);
        if w_norm == 0.0 {
            // Operator annihilates the probe: zero block.
            return Ok(SpectrumEstimate {
                lambda: 0.0,
                residual: 0.0,
                iterations: it,
                converged: true,
            });
        }
        let res_vec_norm = v
            .iter()
            .zip(&w)
            .map(|(a, b)| (b - rayleigh * a).powi(2))
            .sum::<f64>()
            .sqrt();
        lambda = rayleigh;
        residual = res_vec_norm / rayleigh.abs().max(f64::MIN_POSITIVE);
        if residual <= tol {
            return Ok(SpectrumEstimate {
                lambda,
                residual,
                iterations: it,
                converged: true,
            });
        }
        for (x, y) in v.iter_mut().zip(&w) {
            *x = y / w_norm;
        }
    }
    Ok(SpectrumEstimate {
        lambda,
        residual,
        iterations: max_iter,
        converged: false,
    })
}

/// Block-restricted dominant eigenvalue of the loss Hessian at `p`.
pub fn block_lambda_max(
    eval: &mut LossEvaluator,
    p: &ModelParams,
    spec: BlockSpec,
    eps_rel: f64,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<SpectrumEstimate> {
    let d_theta = p.d_theta();
    let dim = d_theta + p.d_w();
    let range = spec.range(d_theta, dim);
    let mut op = |v: &[f64]| hvp(eval, p, v, eps_rel);
    block_lambda_max_op(&mut op, dim, range, tol, max_iter, seed)
}

/// `max(lambda_theta, lambda_w) / min(lambda_theta, lambda_w)`.
pub fn block_condition_number(lambda_theta: f64, lambda_w: f64) -> Result<f64> {
    if lambda_theta <= 0.0 || lambda_w <= 0.0 {
        return Err(Error::parameter(format!(
            "block condition number needs positive block eigenvalues, got ({lambda_theta}, {lambda_w})"
        )));
    }
    Ok(lambda_theta.max(lambda_w) / lambda_theta.min(lambda_w))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProximityPoint {
    pub rho: f64,
    pub lambda_max: f64,
    pub bound_holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub noise_scale: f64,
    pub seed: u64,
    /// (a) GPNR vs lambda_max at two independently perturbed copies of the
    /// best checkpoint.
    pub points: Vec<ProximityPoint>,
    /// Whether the rho ordering between the two points matches the
    /// lambda_max ordering (equal counts as matching).
    pub gpnr_covaries: bool,
    /// (b) Mild-scaling check over logged iterations that carry spectra:
    /// s_theta/s_w >= lambda_w/lambda_theta.
    pub mild_scaling_checked: usize,
    pub mild_scaling_violations: usize,
    /// (c) Eigenvalue ordering at the best checkpoint.
    pub lambda_full: f64,
    pub lambda_theta: f64,
    pub lambda_w: f64,
    pub ordering_holds: bool,
}

/// Post-training audit of the assumptions behind the conditioning
/// analysis. Records violations; never fails on them.
pub fn assumption_audit(
    trained: &TrainResult,
    eval: &mut LossEvaluator,
    noise_scale: f64,
    seed: u64,
) -> Result<AuditReport> {
    let best = &trained.best_params;
    let flat = best.to_flat();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    let mut points = Vec::with_capacity(2);
    let mut orderings = Vec::with_capacity(2);
    for draw in 0..2u64 {
        let perturbed: Vec<f64> = flat
            .iter()
            .map(|x| x + noise_scale * rng.gen_range(-1.0..1.0))
            .collect();
        let p = best.from_flat(&perturbed);
        let (_, g) = eval(&p)?;
        let g_flat = g.to_flat();
        let rho = gpnr(
            g_flat.iter().map(|x| x * x).sum::<f64>().sqrt(),
            perturbed.iter().map(|x| x * x).sum::<f64>().sqrt(),
        );
        let est = block_lambda_max(
            eval,
            &p,
            BlockSpec::Full,
            DEFAULT_FD_EPS,
            1e-4,
            60,
            seed.wrapping_add(1000 + draw),
        )?;
        orderings.push((rho, est.lambda));
        points.push(ProximityPoint {
            rho,
            lambda_max: est.lambda,
            bound_holds: rho <= est.lambda,
        });
    }
    let (r0, l0) = orderings[0];
    let (r1, l1) = orderings[1];
    let gpnr_covaries = (r0 - r1) * (l0 - l1) >= 0.0;

    let mut checked = 0usize;
    let mut violations = 0usize;
    for rec in &trained.diagnostics {
        if let (Some(lt), Some(lw)) = (rec.lambda_theta, rec.lambda_w) {
            if lt > 0.0 && lw > 0.0 && rec.s_w > 0.0 {
                checked += 1;
                if rec.s_theta / rec.s_w < lw / lt {
                    violations += 1;
                }
            }
        }
    }

    let mut lam = |spec: BlockSpec, salt: u64| -> Result<f64> {
        Ok(block_lambda_max(eval, best, spec, DEFAULT_FD_EPS, 1e-4, 60, seed.wrapping_add(salt))?.lambda)
    };
    let lambda_full = lam(BlockSpec::Full, 2000)?;
    let lambda_theta = lam(BlockSpec::Theta, 2001)?;
    let lambda_w = lam(BlockSpec::W, 2002)?;
    // Power iteration under-estimates lambda_max (Rayleigh quotient), so
    // the ordering comparison carries a small relative slack.
    let slack = |x: f64| 1e-5 * x.abs().max(1.0);

    Ok(AuditReport {
        noise_scale,
        seed,
        points,
        gpnr_covaries,
        mild_scaling_checked: checked,
        mild_scaling_violations: violations,
        lambda_full,
        lambda_theta,
        lambda_w,
        ordering_holds: lambda_full + slack(lambda_full) >= lambda_theta
            && lambda_theta + slack(lambda_theta) >= lambda_w,
    })
}
