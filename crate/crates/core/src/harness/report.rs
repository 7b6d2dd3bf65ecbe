//! Result persistence: a per-seed CSV, an aggregate JSON summary, and
//! static SVG traces of the per-block GPNRs and the block-eigenvalue
//! ratio when spectra were sampled.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::experiment::{ExperimentConfig, RunReport};
use crate::optim::DiagnosticsRecord;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArmSummaryJson {
    pub arm: String,
    pub mean: f64,
    pub std: f64,
    pub n_seeds: usize,
    pub n_diverged: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryJson {
    pub config: ExperimentConfig,
    pub arms: Vec<ArmSummaryJson>,
    /// mean(asymmetric) - mean(baseline), accuracy points.
    pub delta: f64,
    pub generated_unix: u64,
    pub version: String,
    /// Per-seed splits are re-drawn per run; the std therefore covers both
    /// initialization and split variation.
    pub split_note: String,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    f.write_all(bytes)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn results_csv(reports: &[&RunReport]) -> String {
    let mut out = String::from("seed,arm,test_accuracy,iterations,diverged\n");
    for rep in reports {
        for (i, &seed) in rep.seeds.iter().enumerate() {
            let acc = rep.accuracies[i];
            let acc_str = if acc.is_finite() {
                format!("{acc:.2}")
            } else {
                "".to_string()
            };
            out.push_str(&format!(
                "{seed},{},{acc_str},{},{}\n",
                rep.arm,
                rep.traces[i].len(),
                rep.diverged_seeds.contains(&seed),
            ));
        }
    }
    out
}

/// Minimal hand-rolled SVG line chart. `series`: (label, css color,
/// points). Returns a complete standalone document.
pub fn svg_line_chart(title: &str, series: &[(&str, &str, Vec<(f64, f64)>)]) -> String {
    let (w, h) = (720.0, 420.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);

    let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, _, pts)| pts.iter().copied()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        if x.is_finite() && y.is_finite() {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    if !x0.is_finite() {
        x0 = 0.0;
        x1 = 1.0;
        y0 = 0.0;
        y1 = 1.0;
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = move |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let sy = move |y: f64| mt + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        w / 2.0,
        title
    ));
    // Axes.
    svg.push_str(&format!(
        "  <line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        mt + ph,
        ml + pw,
        mt + ph
    ));
    svg.push_str(&format!(
        "  <line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        mt + ph
    ));
    // Min/max tick labels.
    for (val, x, y, anchor) in [
        (x0, ml, mt + ph + 18.0, "middle"),
        (x1, ml + pw, mt + ph + 18.0, "middle"),
        (y0, ml - 8.0, mt + ph, "end"),
        (y1, ml - 8.0, mt + 10.0, "end"),
    ] {
        svg.push_str(&format!(
            "  <text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"{anchor}\">{val:.3}</text>\n"
        ));
    }

    for (i, (label, color, pts)) in series.iter().enumerate() {
        let coords: Vec<String> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if !coords.is_empty() {
            svg.push_str(&format!(
                "  <polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                coords.join(" ")
            ));
        }
        let ly = mt + 16.0 + 16.0 * i as f64;
        svg.push_str(&format!(
            "  <line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            ml + pw - 130.0,
            ml + pw - 105.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{label}</text>\n",
            ml + pw - 98.0,
            ly + 4.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn gpnr_points(trace: &[DiagnosticsRecord]) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let theta = trace
        .iter()
        .map(|r| (r.iter as f64, r.rho_theta))
        .collect();
    let w = trace.iter().map(|r| (r.iter as f64, r.rho_w)).collect();
    (theta, w)
}

/// Write results.csv, summary.json, and (when diagnostics exist) the GPNR
/// and eigenvalue-ratio SVG traces into `out_dir`.
pub fn emit_report(
    baseline: &RunReport,
    asymmetric: &RunReport,
    cfg: &ExperimentConfig,
    out_dir: impl AsRef<Path>,
) -> Result<SummaryJson> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;

    write_file(
        &dir.join("results.csv"),
        results_csv(&[baseline, asymmetric]).as_bytes(),
    )?;

    let summary = SummaryJson {
        config: cfg.clone(),
        arms: [baseline, asymmetric]
            .iter()
            .map(|r| ArmSummaryJson {
                arm: r.arm.clone(),
                mean: r.mean,
                std: r.std,
                n_seeds: r.seeds.len(),
                n_diverged: r.diverged_seeds.len(),
            })
            .collect(),
        delta: asymmetric.mean - baseline.mean,
        generated_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        version: env!("CARGO_PKG_VERSION").to_string(),
        split_note: "splits re-drawn per seed; std covers split and init variation".into(),
    };
    write_file(
        &dir.join("summary.json"),
        (serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n").as_bytes(),
    )?;

    // SVGs only when there is a trace to draw.
    if let Some(trace) = baseline.traces.iter().find(|t| !t.is_empty()) {
        let (theta, w) = gpnr_points(trace);
        let svg = svg_line_chart(
            "GPNR per block vs iteration (baseline, first seed)",
            &[("rho_theta", "#c0392b", theta), ("rho_w", "#2980b9", w)],
        );
        write_file(&dir.join("gpnr_trace.svg"), svg.as_bytes())?;
    }
    let ratio_points: Vec<(f64, f64)> = baseline
        .traces
        .iter()
        .flatten()
        .filter_map(|r| match (r.lambda_theta, r.lambda_w) {
            (Some(lt), Some(lw)) if lt.abs() > 0.0 => Some((r.iter as f64, lw / lt)),
            _ => None,
        })
        .collect();
    if !ratio_points.is_empty() {
        let svg = svg_line_chart(
            "Block eigenvalue ratio lambda_w / lambda_theta vs iteration",
            &[("alpha", "#27ae60", ratio_points)],
        );
        write_file(&dir.join("eig_ratio_trace.svg"), svg.as_bytes())?;
    }

    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::run_experiment;
    use crate::harness::splits::SplitPolicy;
    use crate::harness::synth::toy;

    fn small_reports() -> (RunReport, RunReport, ExperimentConfig) {
        let data = toy(9).unwrap();
        let cfg = ExperimentConfig {
            hidden: 8,
            t_max: 12,
            patience: None,
            seeds: vec![0, 1],
            hessian_interval: 6,
            hessian_power_iters: 8,
            split: SplitPolicy::Fractional { p_train: 0.2, p_val: 0.2 },
            ..ExperimentConfig::default()
        };
        let (s, a) = run_experiment(&cfg, &data).unwrap();
        (s, a, cfg)
    }

    #[test]
    fn emit_writes_all_files_and_round_trips() {
        let (s, a, cfg) = small_reports();
        let dir = tempfile::tempdir().unwrap();
        let summary = emit_report(&s, &a, &cfg, dir.path()).unwrap();

        let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 4); // header + 2 seeds x 2 arms

        let json = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
        let parsed: SummaryJson = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.arms[0].mean.to_bits(), summary.arms[0].mean.to_bits());
        assert_eq!(parsed.delta.to_bits(), summary.delta.to_bits());

        for name in ["gpnr_trace.svg", "eig_ratio_trace.svg"] {
            let svg = std::fs::read_to_string(dir.path().join(name)).unwrap();
            roxmltree::Document::parse(&svg).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn empty_diagnostics_emit_csv_and_json_only() {
        let cfg = ExperimentConfig::default();
        let empty = RunReport {
            arm: "baseline".into(),
            seeds: vec![0],
            accuracies: vec![50.0],
            diverged_seeds: vec![],
            mean: 50.0,
            std: 0.0,
            wall_clock_s: 0.0,
            traces: vec![vec![]],
        };
        let mut asym = empty.clone();
        asym.arm = "asymmetric".into();
        let dir = tempfile::tempdir().unwrap();
        emit_report(&empty, &asym, &cfg, dir.path()).unwrap();
        assert!(dir.path().join("results.csv").exists());
        assert!(dir.path().join("summary.json").exists());
        assert!(!dir.path().join("gpnr_trace.svg").exists());
        assert!(!dir.path().join("eig_ratio_trace.svg").exists());
    }

    #[test]
    fn results_csv_is_byte_deterministic() {
        let (s1, a1, _) = small_reports();
        let (s2, a2, _) = small_reports();
        assert_eq!(results_csv(&[&s1, &a1]), results_csv(&[&s2, &a2]));
    }
}
