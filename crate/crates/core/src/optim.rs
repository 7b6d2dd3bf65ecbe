//! Optimizers (gradient descent, Adam) and the asymmetric training
//! wrapper: per-iteration gradient preconditioning driven by the
//! gradient-parameter norm ratio, with EMA-smoothed parameter norms,
//! best-validation checkpointing, and early stopping.
//!
//! The wrapper invokes the optimizer twice per iteration: once on the raw
//! gradient — on a *cloned* state, so moments advance exactly once per
//! iteration — to obtain the update direction whose norm sets the scales,
//! and once on the preconditioned gradient to actually move the
//! parameters. With preconditioning off the wrapper is bitwise
//! transparent: it degenerates to the bare optimizer loop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{apply_to_params, GradientBundle, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Gd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gd" => Ok(OptimizerKind::Gd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::parameter(format!("unknown optimizer '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub eta_theta: f64,
    pub eta_w: f64,
    pub weight_decay_theta: f64,
    pub weight_decay_w: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
}

impl OptimizerConfig {
    pub fn gd(eta_theta: f64, eta_w: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Gd,
            eta_theta,
            eta_w,
            weight_decay_theta: 0.0,
            weight_decay_w: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
        }
    }

    pub fn adam(eta_theta: f64, eta_w: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            ..OptimizerConfig::gd(eta_theta, eta_w)
        }
    }
}

/// Optimizer moments plus step counter. Clone-able so the wrapper's probe
/// invocation can run without advancing the real state.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub cfg: OptimizerConfig,
    pub step: u64,
    moment1: Option<GradientBundle>,
    moment2: Option<GradientBundle>,
}

impl OptimizerState {
    pub fn new(cfg: OptimizerConfig) -> Self {
        OptimizerState {
            cfg,
            step: 0,
            moment1: None,
            moment2: None,
        }
    }

    /// Advance the state and return `(new_params, delta)`, where `delta` is
    /// the update direction before the learning rate: the raw gradient for
    /// GD, the bias-corrected `m-hat / (sqrt(v-hat) + eps)` for Adam.
    /// Decoupled weight decay is applied to the raw parameters here.
    pub fn step(&mut self, p: &ModelParams, g: &GradientBundle) -> Result<(ModelParams, GradientBundle)> {
        let delta = self.update_direction(g);
        let cfg = self.cfg;
        let mut block_is_theta = true;
        // theta block first, then W tensors; apply_to_params visits in
        // canonical order so we can switch rates at the block boundary.
        let d_theta = p.d_theta();
        let mut seen = 0usize;
        let new_p = apply_to_params(p, &delta, |param, dir| {
            let (eta, wd) = if block_is_theta {
                (cfg.eta_theta, cfg.weight_decay_theta)
            } else {
                (cfg.eta_w, cfg.weight_decay_w)
            };
            seen += 1;
            if seen == d_theta {
                block_is_theta = false;
            }
            param - eta * (dir + wd * param)
        });
        if !new_p.theta.0.iter().all(|x| x.is_finite())
            || !new_p.w1.iter().all(|x| x.is_finite())
        {
            return Err(Error::numeric("non-finite parameter after optimizer step"));
        }
        Ok((new_p, delta))
    }

    /// The wrapper's probe: the update direction the optimizer *would*
    /// produce, computed on a cloned state so moments are not advanced.
    pub fn probe_delta(&self, g: &GradientBundle) -> GradientBundle {
        self.clone().update_direction(g)
    }

    fn update_direction(&mut self, g: &GradientBundle) -> GradientBundle {
        match self.cfg.kind {
            OptimizerKind::Gd => g.clone(),
            OptimizerKind::Adam => {
                self.step += 1;
                let (b1, b2, eps) = (self.cfg.beta1, self.cfg.beta2, self.cfg.eps_adam);
                let m = self.moment1.get_or_insert_with(|| g.scale_blocks(0.0, 0.0));
                m.zip_apply(g, |m, gi| *m = b1 * *m + (1.0 - b1) * gi);
                let v = self.moment2.get_or_insert_with(|| g.scale_blocks(0.0, 0.0));
                v.zip_apply(g, |v, gi| *v = b2 * *v + (1.0 - b2) * gi * gi);
                let bc1 = 1.0 - b1.powi(self.step as i32);
                let bc2 = 1.0 - b2.powi(self.step as i32);
                let mut delta = self.moment1.as_ref().unwrap().clone();
                delta.zip_apply(self.moment2.as_ref().unwrap(), |d, vi| {
                    let m_hat = *d / bc1;
                    let v_hat = vi / bc2;
                    *d = m_hat / (v_hat.sqrt() + eps);
                });
                delta
            }
        }
    }
}

/// Gradient-parameter norm ratio `||grad|| / ||params||`, with sentinel
/// conventions for degenerate norms.
pub fn gpnr(grad_block_norm: f64, param_block_norm: f64) -> f64 {
    if param_block_norm == 0.0 {
        if grad_block_norm == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        grad_block_norm / param_block_norm
    }
}

/// One EMA step of a parameter-norm trace.
pub fn ema_norm_update(pi_prev: f64, beta: f64, current_norm: f64) -> f64 {
    beta * pi_prev + (1.0 - beta) * current_norm
}

/// Asymmetric scales `s = |pi| / (||delta|| + eps)` for both blocks.
pub fn asym_scales(
    pi_theta: f64,
    pi_w: f64,
    delta_theta_norm: f64,
    delta_w_norm: f64,
    eps_s: f64,
) -> (f64, f64) {
    (
        pi_theta.abs() / (delta_theta_norm + eps_s),
        pi_w.abs() / (delta_w_norm + eps_s),
    )
}

/// Scale the theta gradient by `s_theta` and the whole W block by `s_w`.
pub fn precondition(s_theta: f64, s_w: f64, g: &GradientBundle) -> GradientBundle {
    g.scale_blocks(s_theta, s_w)
}

/// EMA parameter norms and the scales most recently produced from them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreconditionerState {
    pub pi_theta: f64,
    pub pi_w: f64,
    pub beta_pi_theta: f64,
    pub beta_pi_w: f64,
    pub last_s_theta: f64,
    pub last_s_w: f64,
    pub eps_s: f64,
    /// Optional clamp range for the scales; unclamped by default so the
    /// scale definition is honored exactly.
    pub s_clamp: Option<(f64, f64)>,
}

impl PreconditionerState {
    /// Initialized with the actual block norms of the starting point, so
    /// the first EMA value is unbiased without warmup correction.
    pub fn new(p: &ModelParams, beta_pi_theta: f64, beta_pi_w: f64) -> Self {
        PreconditionerState {
            pi_theta: p.theta_norm(),
            pi_w: p.w_norm(),
            beta_pi_theta,
            beta_pi_w,
            last_s_theta: 1.0,
            last_s_w: 1.0,
            eps_s: 1e-12,
            s_clamp: None,
        }
    }

    pub fn update(&mut self, p: &ModelParams, delta: &GradientBundle) -> (f64, f64) {
        self.pi_theta = ema_norm_update(self.pi_theta, self.beta_pi_theta, p.theta_norm());
        self.pi_w = ema_norm_update(self.pi_w, self.beta_pi_w, p.w_norm());
        let (mut s_t, mut s_w) = asym_scales(
            self.pi_theta,
            self.pi_w,
            delta.theta_norm(),
            delta.w_norm(),
            self.eps_s,
        );
        if let Some((lo, hi)) = self.s_clamp {
            s_t = s_t.clamp(lo, hi);
            s_w = s_w.clamp(lo, hi);
        }
        self.last_s_theta = s_t;
        self.last_s_w = s_w;
        (s_t, s_w)
    }
}

/// A training problem the asymmetric wrapper can drive: the spectral GNN
/// loss in the harness, or an exact quadratic in the benchmark.
pub trait Objective {
    fn train_loss_grad(&mut self, p: &ModelParams, iter: usize) -> Result<(f64, GradientBundle)>;
    fn val_loss(&mut self, p: &ModelParams) -> Result<f64>;
}

/// Per-iteration trace of the quantities the analysis cares about.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub iter: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Raw GPNRs of the unscaled gradient.
    pub rho_theta: f64,
    pub rho_w: f64,
    /// GPNRs of the gradient actually handed to the optimizer.
    pub rho_theta_applied: f64,
    pub rho_w_applied: f64,
    pub s_theta: f64,
    pub s_w: f64,
    pub pi_theta: f64,
    pub pi_w: f64,
    /// Block Hessian spectra, present only on sampled iterations.
    pub lambda_theta: Option<f64>,
    pub lambda_w: Option<f64>,
    pub kappa_prime: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub t_max: usize,
    /// Early stopping patience on the validation loss; `None` disables.
    pub patience: Option<usize>,
    pub precondition: bool,
    pub beta_pi_theta: f64,
    pub beta_pi_w: f64,
    pub s_clamp: Option<(f64, f64)>,
}

impl TrainConfig {
    pub fn new(t_max: usize, precondition: bool) -> Self {
        TrainConfig {
            t_max,
            patience: None,
            precondition,
            beta_pi_theta: 0.0,
            beta_pi_w: 0.0,
            s_clamp: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainResult {
    pub best_params: ModelParams,
    pub best_val_loss: f64,
    pub best_iter: usize,
    pub iterations_run: usize,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub diverged: bool,
}

/// Asymmetric training: per iteration, raw gradient; probe update
/// direction on a cloned optimizer state; EMA parameter norms; scales;
/// validation + checkpoint (ties keep the latest, per the `<=` test);
/// precondition; real optimizer step. With `precondition` off this is the
/// plain optimizer loop, bit for bit.
pub fn asymmetric_train(
    objective: &mut dyn Objective,
    init: &ModelParams,
    opt_cfg: &OptimizerConfig,
    cfg: &TrainConfig,
    mut hessian_probe: Option<&mut dyn FnMut(&ModelParams, usize) -> Option<(f64, f64)>>,
) -> Result<TrainResult> {
    if cfg.t_max == 0 {
        return Err(Error::parameter("t_max must be at least 1"));
    }
    let mut p = init.clone();
    let mut opt = OptimizerState::new(*opt_cfg);
    let mut pre = PreconditionerState::new(init, cfg.beta_pi_theta, cfg.beta_pi_w);
    pre.s_clamp = cfg.s_clamp;

    let mut best_val = f64::INFINITY;
    let mut best_params = p.clone();
    let mut best_iter = 0usize;
    let mut diagnostics = Vec::new();
    let mut diverged = false;
    let mut iterations_run = 0;

    for t in 0..cfg.t_max {
        iterations_run = t + 1;
        let (train_loss, grad) = match objective.train_loss_grad(&p, t) {
            Ok(x) => x,
            Err(Error::Numeric(_)) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        if !grad.is_finite() || !train_loss.is_finite() {
            diverged = true;
            break;
        }

        let rho_theta = gpnr(grad.theta_norm(), p.theta_norm());
        let rho_w = gpnr(grad.w_norm(), p.w_norm());

        let (s_theta, s_w) = if cfg.precondition {
            let delta = opt.probe_delta(&grad);
            pre.update(&p, &delta)
        } else {
            (1.0, 1.0)
        };

        let val_loss = objective.val_loss(&p)?;
        if val_loss <= best_val {
            best_val = val_loss;
            best_params = p.clone();
            best_iter = t;
        }

        let applied = if cfg.precondition {
            precondition(s_theta, s_w, &grad)
        } else {
            grad.clone()
        };
        let rho_theta_applied = gpnr(applied.theta_norm(), p.theta_norm());
        let rho_w_applied = gpnr(applied.w_norm(), p.w_norm());

        let spectra = hessian_probe.as_mut().and_then(|f| f(&p, t));
        diagnostics.push(DiagnosticsRecord {
            iter: t,
            train_loss,
            val_loss,
            rho_theta,
            rho_w,
            rho_theta_applied,
            rho_w_applied,
            s_theta,
            s_w,
            pi_theta: pre.pi_theta,
            pi_w: pre.pi_w,
            lambda_theta: spectra.map(|(a, _)| a),
            lambda_w: spectra.map(|(_, b)| b),
            kappa_prime: spectra.and_then(|(a, b)| {
                (a > 0.0 && b > 0.0).then(|| a.max(b) / a.min(b))
            }),
        });

        match opt.step(&p, &applied) {
            Ok((new_p, _delta_bar)) => p = new_p,
            Err(Error::Numeric(_)) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }

        if let Some(patience) = cfg.patience {
            if t - best_iter >= patience {
                break;
            }
        }
    }

    Ok(TrainResult {
        best_params,
        best_val_loss: best_val,
        best_iter,
        iterations_run,
        diagnostics,
        diverged,
    })
}
