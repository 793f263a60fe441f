//! End-to-end alignment on in-memory data: ingestion, assembly, solve,
//! rounding, scoring and hyperparameter sweeps.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AlignError, Result};
use crate::evaluation::{diagonal_path, jaccard_score, mean_and_stderr, random_path};
use crate::io::interleave_background;
use crate::matrix::FeatureMatrix;
use crate::polytope::AlignmentPath;
use crate::priors::{DurationTarget, PriorConfig};
use crate::rounding::{round_instance, Rounding};
use crate::solver::{solve, ProblemInstance, SolveOptions, SolveResult};
use crate::supervision::{assemble, Annotation, PreparedStream, SupervisionMode};
use crate::synth::SynthSuite;

/// One raw stream: video features, sentence features (no background
/// columns) and an optional annotation indexed by interleaved element.
#[derive(Debug, Clone)]
pub struct StreamInput {
    pub id: String,
    pub phi: FeatureMatrix,
    pub psi_raw: FeatureMatrix,
    pub annotation: Option<Annotation>,
    pub supervised: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub streams: Vec<StreamInput>,
}

impl From<&SynthSuite> for Dataset {
    fn from(suite: &SynthSuite) -> Self {
        Dataset {
            streams: suite
                .streams
                .iter()
                .map(|s| StreamInput {
                    id: s.id.clone(),
                    phi: s.phi.clone(),
                    psi_raw: s.psi_raw.clone(),
                    annotation: Some(s.ground_truth.clone()),
                    supervised: s.supervised,
                })
                .collect(),
        }
    }
}

/// Duration target as written in a manifest: one number for every element
/// or one per element of the concatenated problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuSpec {
    Scalar(f64),
    PerElement(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub lambda: f64,
    /// Duration spread in intervals; absent switches the prior off.
    pub sigma: Option<f64>,
    /// Duration target; absent means `I_n / J_n` per stream.
    pub mu: Option<MuSpec>,
    /// When set (and `mu` is absent), background elements target this
    /// duration and sentences share the remaining intervals equally.
    pub background_mu: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub rounding: Rounding,
    pub supervision: SupervisionMode,
    pub gap_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Append a constant row to the video features.
    pub affine: bool,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            lambda: 1e-3,
            sigma: None,
            mu: None,
            background_mu: None,
            alpha: 0.0,
            beta: 0.1,
            kappa: 1.0,
            rounding: Rounding::Model,
            supervision: SupervisionMode::Soft,
            gap_tol: 1e-6,
            max_iter: 2000,
            seed: 7,
            affine: true,
        }
    }
}

impl Hyperparameters {
    pub fn priors(&self) -> PriorConfig {
        PriorConfig {
            mu: match &self.mu {
                None => DurationTarget::Uniform,
                Some(MuSpec::Scalar(m)) => DurationTarget::Scalar(*m),
                Some(MuSpec::PerElement(v)) => DurationTarget::PerElement(v.clone()),
            },
            sigma: self.sigma.unwrap_or(f64::INFINITY),
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            max_iter: self.max_iter,
            gap_tol: self.gap_tol,
            init: None,
        }
    }
}

/// Interleaves background columns and, when `affine`, appends the constant
/// feature row.
pub fn prepare(stream: &StreamInput, affine: bool) -> PreparedStream {
    let (psi, background) = interleave_background(&stream.psi_raw);
    PreparedStream {
        id: stream.id.clone(),
        phi: if affine { stream.phi.with_constant_row() } else { stream.phi.clone() },
        psi,
        background,
        annotation: stream.annotation.clone(),
    }
}

/// Per-element duration targets: `b` for background elements, the rest of
/// each stream's intervals split evenly over its sentences.
fn split_targets<'a>(streams: impl Iterator<Item = &'a PreparedStream>, b: f64) -> Result<Vec<f64>> {
    let mut mu = Vec::new();
    for s in streams {
        let (i, j, nb) = (s.phi.cols() as f64, s.psi.cols(), s.background.len());
        let sentence = (i - b * nb as f64) / (j - nb) as f64;
        if !(b > 0.0 && sentence > 0.0) {
            return Err(AlignError::InvalidParameter(format!(
                "background duration {b} leaves no room for sentences in stream '{}'",
                s.id
            )));
        }
        mu.extend((0..j).map(|e| if s.background.contains(&e) { b } else { sentence }));
    }
    Ok(mu)
}

#[derive(Debug, Clone)]
pub struct StreamPrediction {
    pub id: String,
    pub path: AlignmentPath,
    pub background: Vec<usize>,
    pub supervised: bool,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Timings {
    pub assemble_ms: f64,
    pub solve_ms: f64,
    pub round_ms: f64,
}

#[derive(Debug, Clone)]
pub struct AlignOutput {
    pub instance: ProblemInstance,
    pub result: SolveResult,
    /// In instance order: unsupervised streams first.
    pub predictions: Vec<StreamPrediction>,
    pub timings: Timings,
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub fn align(data: &Dataset, hp: &Hyperparameters) -> Result<AlignOutput> {
    if data.streams.is_empty() {
        return Err(AlignError::InvalidParameter("dataset has no streams".into()));
    }
    let t0 = Instant::now();
    let supervise = hp.supervision != SupervisionMode::None;
    let mut unsup = Vec::new();
    let mut sup = Vec::new();
    for s in &data.streams {
        let p = prepare(s, hp.affine);
        if s.supervised && supervise {
            sup.push(p);
        } else {
            unsup.push(p);
        }
    }
    let mut priors = hp.priors();
    if let (None, Some(b)) = (&hp.mu, hp.background_mu) {
        priors.mu = DurationTarget::PerElement(split_targets(unsup.iter().chain(&sup), b)?);
    }
    let instance = assemble(&unsup, &sup, hp.kappa, hp.supervision, hp.lambda, priors)?;
    let assemble_ms = elapsed_ms(t0);

    let t1 = Instant::now();
    let result = solve(&instance, &hp.solve_options())?;
    let solve_ms = elapsed_ms(t1);

    let t2 = Instant::now();
    let paths = round_instance(hp.rounding, &instance, &result.y_relaxed, &result.w_star)?;
    let round_ms = elapsed_ms(t2);

    let predictions = unsup
        .iter()
        .map(|p| (p, false))
        .chain(sup.iter().map(|p| (p, true)))
        .zip(paths)
        .map(|((p, supervised), path)| StreamPrediction {
            id: p.id.clone(),
            path,
            background: p.background.clone(),
            supervised,
        })
        .collect();
    Ok(AlignOutput {
        instance,
        result,
        predictions,
        timings: Timings {
            assemble_ms,
            solve_ms,
            round_ms,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StreamScore {
    pub id: String,
    pub jaccard: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub streams: Vec<StreamScore>,
    /// Per-stream scores averaged with equal weight.
    pub mean: f64,
}

/// Scores predictions against the dataset's annotations. Streams without an
/// annotation, and supervised streams when `skip_supervised`, are left out.
pub fn evaluate(data: &Dataset, predictions: &[StreamPrediction], skip_supervised: bool) -> Result<EvalReport> {
    let mut streams = Vec::new();
    for p in predictions {
        if skip_supervised && p.supervised {
            continue;
        }
        let input = data
            .streams
            .iter()
            .find(|s| s.id == p.id)
            .ok_or_else(|| AlignError::InvalidParameter(format!("no stream '{}' in dataset", p.id)))?;
        let Some(gt) = &input.annotation else { continue };
        let jaccard = jaccard_score(&p.path, gt, &p.background).map_err(|e| e.in_stream(&p.id))?;
        streams.push(StreamScore {
            id: p.id.clone(),
            jaccard,
        });
    }
    if streams.is_empty() {
        return Err(AlignError::NoScorableRows);
    }
    let mean = streams.iter().map(|s| s.jaccard).sum::<f64>() / streams.len() as f64;
    Ok(EvalReport { streams, mean })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    Diagonal,
    Random { seed: u64 },
}

/// Baseline predictions for every stream. Random paths for stream `n` use
/// seed `seed + n`.
pub fn baseline_predictions(data: &Dataset, baseline: Baseline) -> Result<Vec<StreamPrediction>> {
    data.streams
        .iter()
        .enumerate()
        .map(|(n, s)| {
            let (i, j) = (s.phi.cols(), 2 * s.psi_raw.cols() + 1);
            let path = match baseline {
                Baseline::Diagonal => diagonal_path(i, j),
                Baseline::Random { seed } => random_path(i, j, seed.wrapping_add(n as u64)),
            }
            .map_err(|e| e.in_stream(&s.id))?;
            Ok(StreamPrediction {
                id: s.id.clone(),
                path,
                background: (0..j).step_by(2).collect(),
                supervised: s.supervised,
            })
        })
        .collect()
}

/// Hyperparameter grid for [`sweep`].
#[derive(Debug, Clone, PartialEq)]
pub enum SweepGrid {
    Sigma(Vec<f64>),
    AlphaBeta { alpha: Vec<f64>, beta: Vec<f64> },
    Kappa(Vec<f64>),
}

impl SweepGrid {
    fn points(&self) -> Vec<Vec<(&'static str, f64)>> {
        match self {
            SweepGrid::Sigma(v) => v.iter().map(|&s| vec![("sigma", s)]).collect(),
            SweepGrid::Kappa(v) => v.iter().map(|&k| vec![("kappa", k)]).collect(),
            SweepGrid::AlphaBeta { alpha, beta } => alpha
                .iter()
                .flat_map(|&a| beta.iter().map(move |&b| vec![("alpha", a), ("beta", b)]))
                .collect(),
        }
    }

    pub fn parameter_names(&self) -> Vec<&'static str> {
        match self {
            SweepGrid::Sigma(_) => vec!["sigma"],
            SweepGrid::Kappa(_) => vec!["kappa"],
            SweepGrid::AlphaBeta { .. } => vec!["alpha", "beta"],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub values: Vec<(&'static str, f64)>,
    pub mean: f64,
    pub stderr: f64,
    pub n_seeds: usize,
}

fn apply_point(base: &Hyperparameters, point: &[(&'static str, f64)]) -> Hyperparameters {
    let mut hp = base.clone();
    for &(name, v) in point {
        match name {
            // sigma values at or beyond 1e300 stand for "prior off"
            "sigma" => hp.sigma = if v.is_finite() { Some(v) } else { None },
            "alpha" => hp.alpha = v,
            "beta" => hp.beta = v,
            "kappa" => hp.kappa = v,
            _ => unreachable!("unknown sweep parameter {name}"),
        }
    }
    hp
}

/// Aligns and scores every replicate at every grid point. Scores exclude
/// supervised streams when supervision is on. Grid points run in parallel;
/// row order follows the grid.
pub fn sweep(replicates: &[Dataset], base: &Hyperparameters, grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    let points = grid.points();
    if points.is_empty() {
        return Err(AlignError::InvalidParameter("empty sweep grid".into()));
    }
    if replicates.is_empty() {
        return Err(AlignError::InvalidParameter("sweep needs at least one replicate".into()));
    }
    let skip_supervised = base.supervision != SupervisionMode::None;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..replicates.len()).map(move |r| (p, r)))
        .collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(p, r)| {
            let hp = apply_point(base, &points[p]);
            let out = align(&replicates[r], &hp)?;
            Ok(evaluate(&replicates[r], &out.predictions, skip_supervised)?.mean)
        })
        .collect::<Result<_>>()?;
    Ok(points
        .into_iter()
        .enumerate()
        .map(|(p, values)| {
            let s = &scores[p * replicates.len()..(p + 1) * replicates.len()];
            let (mean, stderr) = mean_and_stderr(s);
            SweepRow {
                values,
                mean,
                stderr,
                n_seeds: s.len(),
            }
        })
        .collect())
}

pub fn format_sweep_csv(grid: &SweepGrid, rows: &[SweepRow]) -> String {
    let mut out = grid.parameter_names().join(",");
    out.push_str(",mean,stderr,n_seeds\n");
    for r in rows {
        for (_, v) in &r.values {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{},{},{}\n", r.mean, r.stderr, r.n_seeds));
    }
    out
}
