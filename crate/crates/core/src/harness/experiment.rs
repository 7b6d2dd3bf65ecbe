//! S-vs-AS experiment orchestration: per seed, draw splits and initial
//! parameters once, train the plain baseline (preconditioning off) and the
//! asymmetric treatment (on) from identical state, and score test accuracy
//! at the best-validation checkpoint.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::basis::{FilterFamily, FilterSpec};
use crate::error::{Error, Result};
use crate::graphcore::{graph_matrix, Graph, SparseMatrix};
use crate::harness::dataset::DatasetBundle;
use crate::harness::splits::{make_splits, SplitMasks, SplitPolicy};
use crate::hessian::{block_lambda_max, BlockSpec, DEFAULT_FD_EPS};
use crate::model::{
    accuracy, backward, empirical_loss, eval_loss_grad, forward, init_params, ForwardMode,
    GradientBundle, ModelParams,
};
use crate::optim::{
    asymmetric_train, DiagnosticsRecord, Objective, OptimizerConfig, TrainConfig, TrainResult,
};

/// Spectral GNN training problem over one dataset and split.
pub struct GnnObjective<'a> {
    pub graph: &'a Graph,
    pub m: SparseMatrix,
    pub spec: FilterSpec,
    pub train_mask: Vec<usize>,
    pub val_mask: Vec<usize>,
    pub dropout_input: f64,
    pub dropout_hidden: f64,
    /// Base seed for per-iteration dropout masks; both arms of a seed use
    /// the same base so they see identical noise.
    pub noise_seed: u64,
}

impl<'a> GnnObjective<'a> {
    pub fn new(
        graph: &'a Graph,
        spec: FilterSpec,
        splits: &SplitMasks,
        dropout_input: f64,
        dropout_hidden: f64,
        noise_seed: u64,
    ) -> Result<Self> {
        let m = graph_matrix(graph, spec.family.matrix_variant())?;
        Ok(GnnObjective {
            graph,
            m,
            spec,
            train_mask: splits.train.clone(),
            val_mask: splits.val.clone(),
            dropout_input,
            dropout_hidden,
            noise_seed,
        })
    }

    /// Eval-mode train loss and gradient; the evaluator the Hessian
    /// machinery needs (deterministic in the parameters).
    pub fn eval_train_loss_grad(&self, p: &ModelParams) -> Result<(f64, GradientBundle)> {
        eval_loss_grad(
            p,
            &self.spec,
            &self.m,
            self.graph.features.view(),
            &self.graph.labels,
            &self.train_mask,
        )
    }

    pub fn test_accuracy(&self, p: &ModelParams, test_mask: &[usize]) -> Result<f64> {
        let (logits, _) = forward(
            p,
            &self.spec,
            &self.m,
            self.graph.features.view(),
            ForwardMode::Eval,
        )?;
        Ok(accuracy(logits.view(), &self.graph.labels, test_mask) * 100.0)
    }
}

impl Objective for GnnObjective<'_> {
    fn train_loss_grad(&mut self, p: &ModelParams, iter: usize) -> Result<(f64, GradientBundle)> {
        let mode = if self.dropout_input > 0.0 || self.dropout_hidden > 0.0 {
            ForwardMode::Train {
                dropout_input: self.dropout_input,
                dropout_hidden: self.dropout_hidden,
                seed: self.noise_seed.wrapping_add(iter as u64),
            }
        } else {
            ForwardMode::Eval
        };
        let (logits, cache) = forward(p, &self.spec, &self.m, self.graph.features.view(), mode)?;
        let loss = empirical_loss(logits.view(), &self.graph.labels, &self.train_mask)?;
        let grad = backward(
            p,
            &self.spec,
            &self.m,
            &cache,
            &self.graph.labels,
            &self.train_mask,
        )?;
        Ok((loss, grad))
    }

    fn val_loss(&mut self, p: &ModelParams) -> Result<f64> {
        let (logits, _) = forward(
            p,
            &self.spec,
            &self.m,
            self.graph.features.view(),
            ForwardMode::Eval,
        )?;
        empirical_loss(logits.view(), &self.graph.labels, &self.val_mask)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: FilterFamily,
    pub order: usize,
    pub jacobi_a: f64,
    pub jacobi_b: f64,
    pub init_alpha: Option<f64>,
    pub hidden: usize,
    pub optimizer: OptimizerConfig,
    pub dropout_input: f64,
    pub dropout_hidden: f64,
    pub beta_pi_theta: f64,
    pub beta_pi_w: f64,
    pub t_max: usize,
    pub patience: Option<usize>,
    pub seeds: Vec<u64>,
    pub split: SplitPolicy,
    /// Sample block Hessian spectra every this many iterations; 0 = never.
    pub hessian_interval: usize,
    pub hessian_power_iters: usize,
    pub hessian_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            family: FilterFamily::Chebyshev,
            order: 10,
            jacobi_a: 1.0,
            jacobi_b: 1.0,
            init_alpha: None,
            hidden: 64,
            optimizer: {
                let mut opt = OptimizerConfig::adam(0.05, 0.01);
                opt.weight_decay_w = 5e-4;
                opt
            },
            dropout_input: 0.8,
            dropout_hidden: 0.8,
            beta_pi_theta: 0.9,
            beta_pi_w: 0.9,
            t_max: 1000,
            patience: Some(200),
            seeds: (0..10).collect(),
            split: SplitPolicy::Fractional { p_train: 0.025, p_val: 0.025 },
            hessian_interval: 0,
            hessian_power_iters: 12,
            hessian_tol: 1e-3,
        }
    }
}

impl ExperimentConfig {
    pub fn filter_spec(&self) -> Result<FilterSpec> {
        let mut spec = FilterSpec::new(self.family, self.order);
        spec.jacobi_a = self.jacobi_a;
        spec.jacobi_b = self.jacobi_b;
        spec.validate()?;
        Ok(spec)
    }

    fn train_config(&self, precondition: bool) -> TrainConfig {
        TrainConfig {
            t_max: self.t_max,
            patience: self.patience,
            precondition,
            beta_pi_theta: self.beta_pi_theta,
            beta_pi_w: self.beta_pi_w,
            s_clamp: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub arm: String,
    pub seeds: Vec<u64>,
    /// Test accuracy (percent) per seed, NaN for diverged seeds.
    pub accuracies: Vec<f64>,
    pub diverged_seeds: Vec<u64>,
    pub mean: f64,
    /// Unbiased standard deviation across non-diverged seeds.
    pub std: f64,
    pub wall_clock_s: f64,
    pub traces: Vec<Vec<DiagnosticsRecord>>,
}

impl RunReport {
    fn aggregate(arm: &str, seeds: &[u64], results: Vec<(f64, bool, Vec<DiagnosticsRecord>)>, wall: f64) -> Self {
        let mut accuracies = Vec::new();
        let mut diverged = Vec::new();
        let mut traces = Vec::new();
        for (seed, (acc, div, trace)) in seeds.iter().zip(results) {
            if div {
                diverged.push(*seed);
                accuracies.push(f64::NAN);
            } else {
                accuracies.push(acc);
            }
            traces.push(trace);
        }
        let ok: Vec<f64> = accuracies.iter().copied().filter(|x| x.is_finite()).collect();
        let mean = if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().sum::<f64>() / ok.len() as f64
        };
        let std = if ok.len() < 2 {
            0.0
        } else {
            (ok.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (ok.len() - 1) as f64).sqrt()
        };
        RunReport {
            arm: arm.to_string(),
            seeds: seeds.to_vec(),
            accuracies,
            diverged_seeds: diverged,
            mean,
            std,
            wall_clock_s: wall,
            traces,
        }
    }
}

/// Outcome of one arm of one seed.
struct ArmOutcome {
    accuracy: f64,
    diverged: bool,
    trace: Vec<DiagnosticsRecord>,
    result: TrainResult,
}

fn run_arm(
    cfg: &ExperimentConfig,
    data: &DatasetBundle,
    splits: &SplitMasks,
    init: &ModelParams,
    seed: u64,
    precondition: bool,
) -> Result<ArmOutcome> {
    let spec = cfg.filter_spec()?;
    let mut obj = GnnObjective::new(
        &data.graph,
        spec.clone(),
        splits,
        cfg.dropout_input,
        cfg.dropout_hidden,
        seed.wrapping_mul(0x9e37_79b9_7f4a_7c15),
    )?;

    // The spectra probe needs its own objective instance (eval-mode
    // evaluator) so it cannot disturb the training one.
    let probe_obj = GnnObjective::new(
        &data.graph,
        spec,
        splits,
        0.0,
        0.0,
        0,
    )?;
    let interval = cfg.hessian_interval;
    let power_iters = cfg.hessian_power_iters;
    let tol = cfg.hessian_tol;
    let mut probe = move |p: &ModelParams, iter: usize| -> Option<(f64, f64)> {
        if interval == 0 || iter % interval != 0 {
            return None;
        }
        let mut eval = |q: &ModelParams| probe_obj.eval_train_loss_grad(q);
        let lt = block_lambda_max(
            &mut eval,
            p,
            BlockSpec::Theta,
            DEFAULT_FD_EPS,
            tol,
            power_iters,
            seed.wrapping_add(iter as u64),
        )
        .ok()?;
        let lw = block_lambda_max(
            &mut eval,
            p,
            BlockSpec::W,
            DEFAULT_FD_EPS,
            tol,
            power_iters,
            seed.wrapping_add(iter as u64).wrapping_add(1),
        )
        .ok()?;
        Some((lt.lambda, lw.lambda))
    };

    let result = asymmetric_train(
        &mut obj,
        init,
        &cfg.optimizer,
        &cfg.train_config(precondition),
        Some(&mut probe),
    )?;

    let accuracy = if result.diverged {
        f64::NAN
    } else {
        obj.test_accuracy(&result.best_params, &splits.test)?
    };
    Ok(ArmOutcome {
        accuracy,
        diverged: result.diverged,
        trace: result.diagnostics.clone(),
        result,
    })
}

/// Train both arms for one seed from shared splits and initial parameters.
pub fn run_seed(
    cfg: &ExperimentConfig,
    data: &DatasetBundle,
    seed: u64,
) -> Result<(ArmSummary, ArmSummary)> {
    let g = &data.graph;
    let splits = make_splits(g.n_nodes, &g.labels, cfg.split, seed)?;
    if splits.train.is_empty() || splits.val.is_empty() {
        return Err(Error::parameter("split leaves train or val empty"));
    }
    let spec = cfg.filter_spec()?;
    let init = init_params(
        seed,
        g.n_features(),
        cfg.hidden,
        g.n_classes,
        &spec,
        cfg.init_alpha,
    );
    let s = run_arm(cfg, data, &splits, &init, seed, false)?;
    let asym = run_arm(cfg, data, &splits, &init, seed, true)?;
    Ok((ArmSummary::from(s), ArmSummary::from(asym)))
}

pub struct ArmSummary {
    pub accuracy: f64,
    pub diverged: bool,
    pub trace: Vec<DiagnosticsRecord>,
    pub result: TrainResult,
}

impl From<ArmOutcome> for ArmSummary {
    fn from(o: ArmOutcome) -> Self {
        ArmSummary {
            accuracy: o.accuracy,
            diverged: o.diverged,
            trace: o.trace,
            result: o.result,
        }
    }
}

/// Worker-thread cap: `ASYMSPEC_THREADS`, default 1.
pub fn worker_threads() -> usize {
    std::env::var("ASYMSPEC_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

/// Run all seeds, both arms. Returns (baseline, asymmetric) reports.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    data: &DatasetBundle,
) -> Result<(RunReport, RunReport)> {
    if cfg.seeds.is_empty() {
        return Err(Error::parameter("experiment needs at least one seed"));
    }
    let start = Instant::now();
    let threads = worker_threads().min(cfg.seeds.len());

    let mut outcomes: Vec<Option<Result<(ArmSummary, ArmSummary)>>> =
        (0..cfg.seeds.len()).map(|_| None).collect();

    if threads <= 1 {
        for (i, &seed) in cfg.seeds.iter().enumerate() {
            outcomes[i] = Some(run_seed(cfg, data, seed));
        }
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let results: std::sync::Mutex<Vec<(usize, Result<(ArmSummary, ArmSummary)>)>> =
            std::sync::Mutex::new(Vec::new());
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= cfg.seeds.len() {
                        break;
                    }
                    let out = run_seed(cfg, data, cfg.seeds[i]);
                    results.lock().unwrap().push((i, out));
                });
            }
        });
        for (i, out) in results.into_inner().unwrap() {
            outcomes[i] = Some(out);
        }
    }

    let mut s_results = Vec::with_capacity(cfg.seeds.len());
    let mut as_results = Vec::with_capacity(cfg.seeds.len());
    for out in outcomes {
        let (s, a) = out.expect("every seed dispatched")?;
        s_results.push((s.accuracy, s.diverged, s.trace));
        as_results.push((a.accuracy, a.diverged, a.trace));
    }
    let wall = start.elapsed().as_secs_f64();
    Ok((
        RunReport::aggregate("baseline", &cfg.seeds, s_results, wall),
        RunReport::aggregate("asymmetric", &cfg.seeds, as_results, wall),
    ))
}
