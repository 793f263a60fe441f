//! File-level commands behind the `vtalign` binary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{AlignError, Result};
use crate::io::{format_matrix, read_predictions, write_predictions, write_text};
use crate::manifest::{write_suite, Manifest};
use crate::pipeline::{
    align, baseline_predictions, evaluate, format_sweep_csv, sweep, Baseline, EvalReport, Hyperparameters,
    StreamPrediction, SweepGrid, SweepRow, Timings,
};
use crate::rounding::Rounding;
use crate::solver::objective_terms;
use crate::supervision::SupervisionMode;
use crate::synth::{synthesize, SynthConfig};

/// Command-line values that take precedence over manifest parameters.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub rounding: Option<Rounding>,
    pub supervision: Option<SupervisionMode>,
    pub gap_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, hp: &Hyperparameters) -> Hyperparameters {
        let mut hp = hp.clone();
        if let Some(r) = self.rounding {
            hp.rounding = r;
        }
        if let Some(s) = self.supervision {
            hp.supervision = s;
        }
        if let Some(t) = self.gap_tol {
            hp.gap_tol = t;
        }
        if let Some(m) = self.max_iter {
            hp.max_iter = m;
        }
        if let Some(s) = self.seed {
            hp.seed = s;
        }
        hp
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| AlignError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Generates a synthetic suite into `out_dir`. `params` are stored in the
/// manifest, with the suite's seed copied in.
pub fn cmd_synth(cfg: &SynthConfig, params: &Hyperparameters, out_dir: &Path) -> Result<PathBuf> {
    let suite = synthesize(cfg)?;
    let params = Hyperparameters {
        seed: cfg.seed,
        ..params.clone()
    };
    write_suite(&suite, out_dir, &params)
}

#[derive(Debug, Clone, Serialize)]
pub struct StreamReport {
    pub id: String,
    pub supervised: bool,
    pub intervals: usize,
    pub text_elements: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlignReport {
    pub hyperparameters: Hyperparameters,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub final_gap: f64,
    pub discriminative: f64,
    pub duration: f64,
    pub band: f64,
    /// Shape of the saved model; the last column multiplies the constant
    /// feature row when `hyperparameters.affine` is set.
    pub w_shape: [usize; 2],
    pub streams: Vec<StreamReport>,
    pub timings: Timings,
}

/// Aligns every stream of a manifest. Writes `predictions/<id>.csv`,
/// `trace.csv`, `w_star.csv` and `report.json` into `out_dir`.
pub fn cmd_align(manifest: &Path, overrides: &Overrides, out_dir: &Path) -> Result<AlignReport> {
    let m = Manifest::load(manifest)?;
    let hp = overrides.apply(&m.params);
    let data = m.load_dataset()?;
    let out = align(&data, &hp)?;

    let pred_dir = out_dir.join("predictions");
    create_dir(&pred_dir)?;
    for p in &out.predictions {
        write_predictions(&pred_dir.join(format!("{}.csv", p.id)), &p.path)?;
    }
    let r = &out.result;
    let mut trace = String::from("iteration,objective,gap\n");
    for (t, (f, g)) in r.objective_trace.iter().zip(&r.gap_trace).enumerate() {
        trace.push_str(&format!("{t},{f},{g}\n"));
    }
    write_text(&out_dir.join("trace.csv"), &trace)?;
    write_text(&out_dir.join("w_star.csv"), &format_matrix(r.w_star.as_matrix()))?;

    let terms = objective_terms(&out.instance, &r.y_relaxed)?;
    let report = AlignReport {
        hyperparameters: hp,
        iterations: r.iterations,
        converged: r.converged,
        final_objective: r.final_objective(),
        final_gap: r.final_gap(),
        discriminative: terms.discriminative,
        duration: terms.duration,
        band: terms.band,
        w_shape: [r.w_star.rows(), r.w_star.cols()],
        streams: out
            .predictions
            .iter()
            .map(|p| StreamReport {
                id: p.id.clone(),
                supervised: p.supervised,
                intervals: p.path.i_count(),
                text_elements: p.path.j_count(),
            })
            .collect(),
        timings: out.timings,
    };
    write_text(&out_dir.join("report.json"), &to_json(&report))?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalSummary {
    pub model: EvalReport,
    pub diagonal: EvalReport,
    pub random: EvalReport,
    pub skipped_supervised: bool,
}

/// Scores `predictions_dir/<id>.csv` against the manifest's annotations,
/// next to diagonal and random baselines. Supervised streams are skipped
/// unless supervision is off.
pub fn cmd_eval(manifest: &Path, predictions_dir: &Path, overrides: &Overrides) -> Result<EvalSummary> {
    let m = Manifest::load(manifest)?;
    let hp = overrides.apply(&m.params);
    let data = m.load_dataset()?;
    let skip = hp.supervision != SupervisionMode::None;
    let mut preds = Vec::new();
    for s in &data.streams {
        if (skip && s.supervised) || s.annotation.is_none() {
            continue;
        }
        let j_count = 2 * s.psi_raw.cols() + 1;
        let file = predictions_dir.join(format!("{}.csv", s.id));
        let path = read_predictions(&file, j_count).map_err(|e| e.in_stream(&s.id))?;
        if path.i_count() != s.phi.cols() {
            return Err(AlignError::shape("prediction length", s.phi.cols(), path.i_count()).in_stream(&s.id));
        }
        preds.push(StreamPrediction {
            id: s.id.clone(),
            path,
            background: (0..j_count).step_by(2).collect(),
            supervised: s.supervised,
        });
    }
    let model = evaluate(&data, &preds, skip)?;
    let diagonal = evaluate(&data, &baseline_predictions(&data, Baseline::Diagonal)?, skip)?;
    let random = evaluate(&data, &baseline_predictions(&data, Baseline::Random { seed: hp.seed })?, skip)?;
    Ok(EvalSummary {
        model,
        diagonal,
        random,
        skipped_supervised: skip,
    })
}

pub fn format_eval(summary: &EvalSummary) -> String {
    to_json(summary)
}

/// Sweeps `grid` with every manifest as one replicate and writes
/// `sweep.csv` into `out_dir`. Hyperparameters come from the first
/// manifest.
pub fn cmd_sweep(manifests: &[PathBuf], grid: &SweepGrid, overrides: &Overrides, out_dir: &Path) -> Result<Vec<SweepRow>> {
    let first = manifests
        .first()
        .ok_or_else(|| AlignError::InvalidParameter("sweep needs at least one manifest".into()))?;
    let hp = overrides.apply(&Manifest::load(first)?.params);
    let data = manifests
        .iter()
        .map(|p| Manifest::load(p)?.load_dataset())
        .collect::<Result<Vec<_>>>()?;
    let rows = sweep(&data, &hp, grid)?;
    create_dir(out_dir)?;
    write_text(&out_dir.join("sweep.csv"), &format_sweep_csv(grid, &rows))?;
    Ok(rows)
}
