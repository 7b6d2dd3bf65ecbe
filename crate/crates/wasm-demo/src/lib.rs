//! wasm-bindgen bindings for the browser demo. Each export takes plain
//! scalars or JSON strings and returns a JSON string, keeping the JS side
//! framework-free.
//!
//! The logic lives in `*_impl` functions with plain `String` errors so it
//! can be unit-tested on the host; the `#[wasm_bindgen]` wrappers only
//! convert errors to `JsValue` (which is wasm32-only at runtime).

use ndarray::Array1;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use asymspec_core::basis::{apply_filter, FilterCoeffs, FilterFamily, FilterSpec};
use asymspec_core::graphcore::SparseMatrix;
use asymspec_core::harness::experiment::GnnObjective;
use asymspec_core::harness::splits::{make_splits, SplitPolicy};
use asymspec_core::harness::synth::toy;
use asymspec_core::model::init_params;
use asymspec_core::optim::{asymmetric_train, OptimizerConfig, TrainConfig};
use asymspec_core::quadbench::{synth_quadratic, theorem_trial};

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct ResponseCurve {
    lambda: Vec<f64>,
    response: Vec<f64>,
}

/// Polynomial filter response g(λ) on a grid over the family's spectral
/// domain, for coefficient vector `coeffs` (comma-separated).
#[wasm_bindgen]
pub fn filter_response(family: &str, coeffs: &str) -> Result<String, JsValue> {
    filter_response_impl(family, coeffs).map_err(|e| JsValue::from_str(&e))
}

pub fn filter_response_impl(family: &str, coeffs: &str) -> Result<String, String> {
    let family: FilterFamily = family.parse().map_err(|e: asymspec_core::Error| e.to_string())?;
    let theta: Vec<f64> = coeffs
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("bad coefficient: {e}"))?;
    if theta.is_empty() || theta.len() > 64 {
        return Err("need 1..=64 coefficients".into());
    }
    let spec = FilterSpec::new(family, theta.len() - 1);
    spec.validate().map_err(|e| e.to_string())?;

    // Scalar responses via a 1x1 "graph operator" per grid point.
    let domain = match family.matrix_variant() {
        asymspec_core::graphcore::MatrixVariant::NormLaplacian => (0.0, 2.0),
        _ => (-1.0, 1.0),
    };
    let n = 201usize;
    let mut lambda = Vec::with_capacity(n);
    let mut response = Vec::with_capacity(n);
    let coeffs = FilterCoeffs(theta);
    let ones = ndarray::Array2::ones((1, 1));
    for i in 0..n {
        let x = domain.0 + (domain.1 - domain.0) * i as f64 / (n - 1) as f64;
        let m = SparseMatrix {
            n_rows: 1,
            n_cols: 1,
            row_offsets: vec![0, 1],
            col_indices: vec![0],
            values: vec![x],
        };
        let (y, _) = apply_filter(&spec, &coeffs, &m, ones.view()).map_err(|e| e.to_string())?;
        lambda.push(x);
        response.push(y[[0, 0]]);
    }
    to_json(&ResponseCurve { lambda, response })
}

/// One conditioning-theorem trial on a synthetic two-block quadratic.
/// Returns the per-iteration records as JSON.
#[wasm_bindgen]
pub fn quadratic_trial(
    lambda_theta: f64,
    lambda_w: f64,
    coupling: f64,
    seed: u32,
    iters: u32,
) -> Result<String, JsValue> {
    quadratic_trial_impl(lambda_theta, lambda_w, coupling, seed, iters)
        .map_err(|e| JsValue::from_str(&e))
}

pub fn quadratic_trial_impl(
    lambda_theta: f64,
    lambda_w: f64,
    coupling: f64,
    seed: u32,
    iters: u32,
) -> Result<String, String> {
    let q = synth_quadratic(3, 8, lambda_theta, lambda_w, coupling, seed as u64)
        .map_err(|e| e.to_string())?;
    let mut state = 0x2545_f491_4f6c_dd1du64.wrapping_mul(seed as u64 + 1);
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let start = Array1::from_shape_fn(q.dim(), |_| next()) + &q.psi_star;
    let trial = theorem_trial(&q, &start, 0.05, iters.clamp(1, 200) as usize)
        .map_err(|e| e.to_string())?;
    to_json(&trial)
}

#[derive(Serialize)]
struct ArmTrace {
    val_loss: Vec<f64>,
    rho_theta: Vec<f64>,
    rho_w: Vec<f64>,
    s_theta: Vec<f64>,
    s_w: Vec<f64>,
    best_iter: usize,
    best_val_loss: f64,
    test_accuracy: f64,
}

#[derive(Serialize)]
struct TrainDemo {
    baseline: ArmTrace,
    asymmetric: ArmTrace,
}

/// Train S and AS arms on the 20-node toy dataset (shared splits, init,
/// and dropout noise) and return the traces.
#[wasm_bindgen]
pub fn train_toy(seed: u32, t_max: u32, eta_theta: f64, eta_w: f64) -> Result<String, JsValue> {
    train_toy_impl(seed, t_max, eta_theta, eta_w).map_err(|e| JsValue::from_str(&e))
}

pub fn train_toy_impl(
    seed: u32,
    t_max: u32,
    eta_theta: f64,
    eta_w: f64,
) -> Result<String, String> {
    let seed = seed as u64;
    let t_max = t_max.clamp(1, 500) as usize;
    let data = toy(seed).map_err(|e| e.to_string())?;
    let g = &data.graph;
    let splits = make_splits(
        g.n_nodes,
        &g.labels,
        SplitPolicy::Fractional { p_train: 0.2, p_val: 0.2 },
        seed,
    )
    .map_err(|e| e.to_string())?;
    let spec = FilterSpec::new(FilterFamily::Chebyshev, 10);
    let init = init_params(seed, g.n_features(), 8, g.n_classes, &spec, None);
    let opt = OptimizerConfig::adam(eta_theta, eta_w);

    let arm = |precondition: bool| -> Result<ArmTrace, String> {
        let mut obj =
            GnnObjective::new(g, spec, &splits, 0.2, 0.2, seed).map_err(|e| e.to_string())?;
        let result = asymmetric_train(
            &mut obj,
            &init,
            &opt,
            &TrainConfig::new(t_max, precondition),
            None,
        )
        .map_err(|e| e.to_string())?;
        let test_accuracy = obj
            .test_accuracy(&result.best_params, &splits.test)
            .map_err(|e| e.to_string())?;
        let d = &result.diagnostics;
        Ok(ArmTrace {
            val_loss: d.iter().map(|r| r.val_loss).collect(),
            rho_theta: d.iter().map(|r| r.rho_theta).collect(),
            rho_w: d.iter().map(|r| r.rho_w).collect(),
            s_theta: d.iter().map(|r| r.s_theta).collect(),
            s_w: d.iter().map(|r| r.s_w).collect(),
            best_iter: result.best_iter,
            best_val_loss: result.best_val_loss,
            test_accuracy,
        })
    };

    let demo = TrainDemo { baseline: arm(false)?, asymmetric: arm(true)? };
    to_json(&demo)
}
