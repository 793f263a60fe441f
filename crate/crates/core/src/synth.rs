//! Seeded synthetic streams with known ground truth.
//!
//! Every stream describes `K` sentences with standard normal text features.
//! Sentence durations are a symmetric Dirichlet draw scaled to `I` intervals,
//! and each interval's video feature is a fixed random linear image of its
//! sentence's text feature plus spherical Gaussian noise. The linear map is
//! shared by all streams of a suite.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{AlignError, Result};
use crate::matrix::FeatureMatrix;
use crate::supervision::{AnnotatedInterval, Annotation};

/// Durations shorter than this are re-drawn: a sentence needs room for its
/// own interval plus a neighbouring background interval.
const MIN_DURATION: usize = 2;
const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub sentences: usize,
    pub intervals: usize,
    pub text_dim: usize,
    pub video_dim: usize,
    pub noise: f64,
    pub concentration: f64,
    pub streams: usize,
    /// Fraction of streams (the last ones) flagged as supervised.
    pub supervised_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sentences: 5,
            intervals: 60,
            text_dim: 8,
            video_dim: 8,
            noise: 0.1,
            concentration: 2.0,
            streams: 4,
            supervised_fraction: 0.0,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(AlignError::InvalidParameter(m));
        if self.sentences == 0 || self.intervals == 0 || self.text_dim == 0 || self.video_dim == 0 || self.streams == 0 {
            return bad("synthetic sizes must be positive".into());
        }
        if self.intervals < 2 * self.sentences + 1 {
            return bad(format!(
                "{} intervals cannot hold {} sentences interleaved with background",
                self.intervals, self.sentences
            ));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be >= 0, got {}", self.noise));
        }
        if !(self.concentration > 0.0 && self.concentration.is_finite()) {
            return bad(format!("concentration must be > 0, got {}", self.concentration));
        }
        if !(0.0..=1.0).contains(&self.supervised_fraction) {
            return bad(format!("supervised fraction must lie in [0, 1], got {}", self.supervised_fraction));
        }
        Ok(())
    }

    pub fn supervised_streams(&self) -> usize {
        (self.supervised_fraction * self.streams as f64).round() as usize
    }
}

#[derive(Debug, Clone)]
pub struct SynthStream {
    pub id: String,
    /// `D x I` video features (no constant row).
    pub phi: FeatureMatrix,
    /// `E x K` sentence features (no background columns).
    pub psi_raw: FeatureMatrix,
    /// Ground truth indexed by interleaved element: sentence `k` is `2k + 1`.
    pub ground_truth: Annotation,
    pub durations: Vec<usize>,
    pub supervised: bool,
}

#[derive(Debug, Clone)]
pub struct SynthSuite {
    pub config: SynthConfig,
    /// `D x E` map from text to video features.
    pub map: DMatrix<f64>,
    pub streams: Vec<SynthStream>,
}

fn normal_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    // row-major draw order, independent of storage layout
    let mut m = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let z: f64 = StandardNormal.sample(rng);
            m[(r, c)] = scale * z;
        }
    }
    m
}

/// Largest-remainder rounding of `weights * total` to integers summing to
/// `total`; ties go to the earlier entry.
fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().take(total.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

fn draw_durations<R: Rng>(rng: &mut R, cfg: &SynthConfig) -> Result<Vec<usize>> {
    let gamma = Gamma::new(cfg.concentration, 1.0)
        .map_err(|e| AlignError::InvalidParameter(format!("concentration: {e}")))?;
    for _ in 0..MAX_REDRAWS {
        let weights: Vec<f64> = (0..cfg.sentences).map(|_| gamma.sample(rng)).collect();
        if weights.iter().sum::<f64>() <= 0.0 {
            continue;
        }
        let d = apportion(&weights, cfg.intervals);
        if d.iter().all(|&x| x >= MIN_DURATION) {
            return Ok(d);
        }
    }
    Err(AlignError::Synthesis(format!(
        "no duration draw with every sentence >= {MIN_DURATION} intervals after {MAX_REDRAWS} attempts"
    )))
}

pub fn synthesize(cfg: &SynthConfig) -> Result<SynthSuite> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (e, d) = (cfg.text_dim, cfg.video_dim);
    let map = normal_matrix(&mut rng, d, e, 1.0 / (e as f64).sqrt());
    let first_supervised = cfg.streams - cfg.supervised_streams();
    let mut streams = Vec::with_capacity(cfg.streams);
    for n in 0..cfg.streams {
        let psi_raw = normal_matrix(&mut rng, e, cfg.sentences, 1.0);
        let durations = draw_durations(&mut rng, cfg)?;
        let noise = normal_matrix(&mut rng, d, cfg.intervals, cfg.noise);
        let clean = &map * &psi_raw;
        let mut phi = DMatrix::zeros(d, cfg.intervals);
        let mut entries = Vec::with_capacity(cfg.sentences);
        let mut start = 0;
        for (k, &len) in durations.iter().enumerate() {
            for i in start..start + len {
                phi.set_column(i, &clean.column(k));
            }
            entries.push(AnnotatedInterval {
                text_index: 2 * k + 1,
                start,
                end: start + len,
            });
            start += len;
        }
        phi += noise;
        streams.push(SynthStream {
            id: format!("s{n:03}"),
            phi: FeatureMatrix::new(phi)?,
            psi_raw: FeatureMatrix::new(psi_raw)?,
            ground_truth: Annotation::new(entries),
            durations,
            supervised: n >= first_supervised,
        });
    }
    Ok(SynthSuite {
        config: cfg.clone(),
        map,
        streams,
    })
}
