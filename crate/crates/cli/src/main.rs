//! `asymspec` — experiment harness front end.
//!
//! Exit codes: 0 success, 1 configuration/input error, 2 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use asymspec_core::basis::FilterFamily;
use asymspec_core::harness::experiment::{run_experiment, run_seed, ExperimentConfig, GnnObjective};
use asymspec_core::harness::{emit_report, load_dataset, make_splits, save_dataset, DatasetBundle};
use asymspec_core::hessian::assumption_audit;
use asymspec_core::optim::{OptimizerKind, TrainResult};
use asymspec_core::quadbench::{gpnr_bound_trial, synth_quadratic, theorem_trial};
use asymspec_core::Error;

#[derive(Parser)]
#[command(name = "asymspec", version, about = "Spectral GNN asymmetric-preconditioning laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train S (baseline) and AS (asymmetric) arms over seeds and report.
    Run {
        /// Dataset bundle directory (meta.json + csv files).
        #[arg(long)]
        dataset: PathBuf,
        /// Filter family: chebyshev, chebyshev_ii, jacobi, monomial, bernstein.
        #[arg(long)]
        model: Option<String>,
        /// gd or adam.
        #[arg(long)]
        optimizer: Option<String>,
        /// Arm(s) to report: on, off, or both. Both arms are always trained
        /// pairwise so the comparison shares splits, init, and noise.
        #[arg(long, default_value = "both")]
        asym: String,
        /// Number of seeds (0..N).
        #[arg(long)]
        seeds: Option<usize>,
        /// JSON config file; fields override the defaults, CLI flags
        /// override the file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for results.csv / summary.json / SVG traces.
        #[arg(long)]
        out: PathBuf,
        /// Also write checkpoint.json (best params of the first seed's
        /// reported arm) for later `asymspec audit`.
        #[arg(long)]
        save_checkpoint: bool,
    },
    /// Synthetic-quadratic benchmark: conditioning theorem + GPNR bound.
    Quadbench {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assumption audit of a saved checkpoint on its dataset.
    Audit {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 1e-2)]
        noise_scale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print a dataset's statistics table row.
    Inspect {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Generate a synthetic stand-in dataset bundle.
    Synth {
        /// texas-like, cora-like, or toy.
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// On-disk checkpoint: everything `audit` needs to rebuild the objective.
#[derive(Serialize, Deserialize)]
struct Checkpoint {
    config: ExperimentConfig,
    dataset: String,
    seed: u64,
    arm: String,
    train: TrainResult,
}

fn merge_json(base: &mut serde_json::Value, patch: &serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                merge_json(b.entry(k.clone()).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, p) => *b = p.clone(),
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig, Error> {
    let mut base = serde_json::to_value(ExperimentConfig::default())
        .map_err(|e| Error::input(e.to_string()))?;
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let patch: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::load(path.display().to_string(), e.line(), e.to_string()))?;
        merge_json(&mut base, &patch);
    }
    serde_json::from_value(base).map_err(|e| Error::input(format!("bad config: {e}")))
}

fn cmd_run(
    dataset: PathBuf,
    model: Option<String>,
    optimizer: Option<String>,
    asym: String,
    seeds: Option<usize>,
    config: Option<PathBuf>,
    out: PathBuf,
    save_checkpoint: bool,
) -> Result<(), Error> {
    if !matches!(asym.as_str(), "on" | "off" | "both") {
        return Err(Error::parameter(format!("--asym must be on/off/both, got '{asym}'")));
    }
    let data = load_dataset(&dataset)?;
    let mut cfg = load_config(config.as_ref())?;
    if let Some(m) = model {
        cfg.family = m.parse::<FilterFamily>()?;
    }
    if let Some(o) = optimizer {
        cfg.optimizer.kind = o.parse::<OptimizerKind>()?;
    }
    if let Some(n) = seeds {
        if n == 0 {
            return Err(Error::parameter("--seeds must be at least 1"));
        }
        cfg.seeds = (0..n as u64).collect();
    }

    let stats = data.stats()?;
    eprintln!(
        "dataset {}: n={} |E|={} d={} C={} H_edge={:.2}",
        stats.name, stats.n_nodes, stats.n_edges, stats.n_features, stats.n_classes,
        stats.edge_homophily
    );

    let (s, a) = run_experiment(&cfg, &data)?;
    emit_report(&s, &a, &cfg, &out)?;

    if asym != "on" {
        println!("S  (baseline):   {:.2} ± {:.2}", s.mean, s.std);
    }
    if asym != "off" {
        println!("AS (asymmetric): {:.2} ± {:.2}", a.mean, a.std);
    }
    if asym == "both" {
        println!("Δ = {:+.2}", a.mean - s.mean);
    }
    for rep in [&s, &a] {
        if !rep.diverged_seeds.is_empty() {
            eprintln!("warning: {} arm diverged on seeds {:?}", rep.arm, rep.diverged_seeds);
        }
    }

    if save_checkpoint {
        let seed = cfg.seeds[0];
        let (s0, a0) = run_seed(&cfg, &data, seed)?;
        let (arm, picked) = if asym == "off" { ("baseline", s0) } else { ("asymmetric", a0) };
        let ckpt = Checkpoint {
            config: cfg.clone(),
            dataset: data.name.clone(),
            seed,
            arm: arm.to_string(),
            train: picked.result,
        };
        let path = out.join("checkpoint.json");
        let text = serde_json::to_string_pretty(&ckpt).map_err(|e| Error::input(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
        eprintln!("checkpoint written to {}", path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct QuadbenchSummary {
    trials: usize,
    iterations: usize,
    applicable: usize,
    theorem_violations: usize,
    max_identity_err: f64,
    gpnr_points: usize,
    gpnr_valid: usize,
    gpnr_satisfied: usize,
}

fn cmd_quadbench(trials: usize, out: PathBuf) -> Result<(), Error> {
    if trials == 0 {
        return Err(Error::parameter("--trials must be at least 1"));
    }
    use rand::Rng;
    let mut rng = rand_seed();
    let mut summary = QuadbenchSummary {
        trials,
        iterations: 0,
        applicable: 0,
        theorem_violations: 0,
        max_identity_err: 0.0,
        gpnr_points: 0,
        gpnr_valid: 0,
        gpnr_satisfied: 0,
    };
    for t in 0..trials {
        let d_theta = rng.gen_range(2..6);
        let d_w = rng.gen_range(4..12);
        let (lt, lw) = if rng.gen_bool(0.5) {
            (rng.gen_range(1.0..8.0), rng.gen_range(0.05..1.0))
        } else {
            (rng.gen_range(0.05..1.0), rng.gen_range(1.0..8.0))
        };
        let cc = rng.gen_range(0.0..0.3);
        let q = synth_quadratic(d_theta, d_w, lt, lw, cc, t as u64)?;
        let start = ndarray::Array1::from_shape_fn(q.dim(), |_| rng.gen_range(-1.0..1.0f64))
            + &q.psi_star;
        let trial = theorem_trial(&q, &start, 0.05, 15)?;
        for rec in &trial.records {
            summary.iterations += 1;
            if rec.applicable {
                summary.applicable += 1;
                if !rec.holds {
                    summary.theorem_violations += 1;
                }
            }
            if let Some(err) = rec.identity_err {
                summary.max_identity_err = summary.max_identity_err.max(err);
            }
        }
        if t < 10 {
            let rep = gpnr_bound_trial(&q, 1.0, 1000, t as u64);
            summary.gpnr_points += rep.n_points;
            summary.gpnr_valid += rep.n_valid;
            summary.gpnr_satisfied += rep.n_satisfied;
        }
    }
    std::fs::create_dir_all(&out).map_err(|e| Error::io(out.display().to_string(), e))?;
    let path = out.join("quadbench.json");
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::input(e.to_string()))?;
    std::fs::write(&path, &text).map_err(|e| Error::io(path.display().to_string(), e))?;
    println!("{text}");
    if summary.theorem_violations > 0 {
        return Err(Error::numeric(format!(
            "{} theorem violations out of {} applicable iterations",
            summary.theorem_violations, summary.applicable
        )));
    }
    Ok(())
}

fn rand_seed() -> rand_chacha::ChaCha20Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha20Rng::seed_from_u64(0)
}

fn cmd_audit(checkpoint: PathBuf, dataset: PathBuf, noise_scale: f64, seed: u64) -> Result<(), Error> {
    let text = std::fs::read_to_string(&checkpoint)
        .map_err(|e| Error::io(checkpoint.display().to_string(), e))?;
    let ckpt: Checkpoint = serde_json::from_str(&text)
        .map_err(|e| Error::load(checkpoint.display().to_string(), e.line(), e.to_string()))?;
    let data = load_dataset(&dataset)?;
    if data.name != ckpt.dataset {
        eprintln!(
            "warning: checkpoint was trained on '{}', auditing against '{}'",
            ckpt.dataset, data.name
        );
    }
    let g = &data.graph;
    let splits = make_splits(g.n_nodes, &g.labels, ckpt.config.split, ckpt.seed)?;
    let obj = GnnObjective::new(g, ckpt.config.filter_spec()?, &splits, 0.0, 0.0, 0)?;
    let mut eval = |p: &asymspec_core::model::ModelParams| obj.eval_train_loss_grad(p);
    let report = assumption_audit(&ckpt.train, &mut eval, noise_scale, seed)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::input(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn cmd_inspect(dataset: PathBuf) -> Result<(), Error> {
    let data = load_dataset(&dataset)?;
    let s = data.stats()?;
    println!("name      nodes  edges  features  classes  edge_homophily");
    println!(
        "{:<9} {:>5}  {:>5}  {:>8}  {:>7}  {:>14.2}",
        s.name, s.n_nodes, s.n_edges, s.n_features, s.n_classes, s.edge_homophily
    );
    Ok(())
}

fn cmd_synth(preset: String, seed: u64, out: PathBuf) -> Result<(), Error> {
    use asymspec_core::harness::synth::{cora_like, texas_like, toy};
    let bundle: DatasetBundle = match preset.as_str() {
        "texas-like" => texas_like(seed)?,
        "cora-like" => cora_like(seed)?,
        "toy" => toy(seed)?,
        other => {
            return Err(Error::parameter(format!(
                "unknown preset '{other}' (expected texas-like, cora-like, or toy)"
            )))
        }
    };
    save_dataset(&bundle, &out)?;
    eprintln!("wrote {} to {}", bundle.name, out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run { dataset, model, optimizer, asym, seeds, config, out, save_checkpoint } => {
            cmd_run(dataset, model, optimizer, asym, seeds, config, out, save_checkpoint)
        }
        Cmd::Quadbench { trials, out } => cmd_quadbench(trials, out),
        Cmd::Audit { checkpoint, dataset, noise_scale, seed } => {
            cmd_audit(checkpoint, dataset, noise_scale, seed)
        }
        Cmd::Inspect { dataset } => cmd_inspect(dataset),
        Cmd::Synth { preset, seed, out } => cmd_synth(preset, seed, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numeric(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
