//! Semi-supervised problem assembly.
//!
//! Supervised streams enter the joint problem with both feature matrices
//! scaled by `kappa`, which weights their squared loss by `kappa^2`. Their
//! assignment is either pinned to the annotation (hard mode) or confined so
//! that every annotated element only receives intervals inside its
//! annotated span (soft mode).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{AlignError, Result};
use crate::matrix::FeatureMatrix;
use crate::polytope::{minimize_linear, AlignmentPath, CellMask};
use crate::priors::PriorConfig;
use crate::solver::{ProblemInstance, StreamBlock};

/// Element `text_index` occupies intervals `start..end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnnotatedInterval {
    pub text_index: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Annotation {
    entries: Vec<AnnotatedInterval>,
}

impl Annotation {
    pub fn new(entries: Vec<AnnotatedInterval>) -> Self {
        Annotation { entries }
    }

    pub fn entries(&self) -> &[AnnotatedInterval] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks ranges, non-empty intervals, one entry per element, and that
    /// intervals are ordered and disjoint when listed by element.
    pub fn validate(&self, j_count: usize, i_count: usize) -> Result<()> {
        let mut sorted = self.entries.clone();
        sorted.sort_by_key(|e| e.text_index);
        for e in &sorted {
            if e.text_index >= j_count {
                return Err(AlignError::InvalidAnnotation(format!(
                    "text index {} out of range (J = {j_count})",
                    e.text_index
                )));
            }
            if e.start >= e.end {
                return Err(AlignError::InvalidAnnotation(format!(
                    "empty interval [{}, {}) for text index {}",
                    e.start, e.end, e.text_index
                )));
            }
            if e.end > i_count {
                return Err(AlignError::InvalidAnnotation(format!(
                    "interval [{}, {}) for text index {} exceeds I = {i_count}",
                    e.start, e.end, e.text_index
                )));
            }
        }
        for w in sorted.windows(2) {
            if w[0].text_index == w[1].text_index {
                return Err(AlignError::InvalidAnnotation(format!(
                    "text index {} annotated twice",
                    w[0].text_index
                )));
            }
            if w[1].start < w[0].end {
                return Err(AlignError::InvalidAnnotation(format!(
                    "interval of text index {} overlaps or precedes that of {}",
                    w[1].text_index, w[0].text_index
                )));
            }
        }
        Ok(())
    }
}

/// Forbids, for every annotated non-background element, the intervals
/// outside its annotated span.
pub fn build_interval_mask(
    ann: &Annotation,
    j_count: usize,
    i_count: usize,
    background: &[usize],
) -> Result<CellMask> {
    ann.validate(j_count, i_count)?;
    let mut sorted: Vec<_> = ann
        .entries()
        .iter()
        .filter(|e| !background.contains(&e.text_index))
        .copied()
        .collect();
    sorted.sort_by_key(|e| e.text_index);
    let mut mask = CellMask::allow_all(j_count, i_count);
    for e in &sorted {
        for i in (0..e.start).chain(e.end..i_count) {
            mask.forbid(e.text_index, i);
        }
        // adding constraints one element at a time names the first culprit
        if !mask.is_feasible() {
            return Err(AlignError::Infeasible {
                stream: None,
                detail: format!(
                    "annotated interval [{}, {}) of text index {} leaves no feasible alignment",
                    e.start, e.end, e.text_index
                ),
            });
        }
    }
    Ok(mask)
}

/// Forbids every cell off the given path, leaving it as the only feasible
/// assignment.
pub fn fix_assignment_mask(y_s: &AlignmentPath) -> CellMask {
    let a = y_s.assignment();
    CellMask::from_fn(y_s.j_count(), y_s.i_count(), |j, i| a[i] != j)
}

/// The feasible assignment closest to an annotation: annotated elements on
/// their spans, uncovered intervals on background elements, with as few
/// disagreements as the ordering constraints allow.
pub fn expand_annotation(
    ann: &Annotation,
    j_count: usize,
    i_count: usize,
    background: &[usize],
) -> Result<AlignmentPath> {
    let mask = build_interval_mask(ann, j_count, i_count, background)?;
    let mut covered = vec![false; i_count];
    let mut cost = DMatrix::from_element(j_count, i_count, 1.0);
    for e in ann.entries().iter().filter(|e| !background.contains(&e.text_index)) {
        for i in e.start..e.end {
            covered[i] = true;
            cost[(e.text_index, i)] = 0.0;
        }
    }
    for &j in background.iter().filter(|&&j| j < j_count) {
        for (i, &c) in covered.iter().enumerate() {
            if !c {
                cost[(j, i)] = 0.0;
            }
        }
    }
    Ok(minimize_linear(&cost, Some(&mask))?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupervisionMode {
    None,
    #[default]
    Soft,
    Hard,
}

/// A stream after ingestion: augmented video features, text features with
/// background columns interleaved, and its optional annotation.
#[derive(Debug, Clone)]
pub struct PreparedStream {
    pub id: String,
    pub phi: FeatureMatrix,
    pub psi: FeatureMatrix,
    pub background: Vec<usize>,
    pub annotation: Option<Annotation>,
}

/// Builds the joint instance: unsupervised streams first, then supervised
/// ones scaled by `kappa` and constrained according to `mode`. With
/// `SupervisionMode::None` every stream is treated as unsupervised.
pub fn assemble(
    unsupervised: &[PreparedStream],
    supervised: &[PreparedStream],
    kappa: f64,
    mode: SupervisionMode,
    lambda: f64,
    priors: PriorConfig,
) -> Result<ProblemInstance> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(AlignError::InvalidParameter(format!("kappa must be >= 0, got {kappa}")));
    }
    let mut blocks = Vec::with_capacity(unsupervised.len() + supervised.len());
    let plain = |s: &PreparedStream| StreamBlock {
        id: s.id.clone(),
        phi: s.phi.clone(),
        psi: s.psi.clone(),
        mask: None,
        fixed: false,
        supervised: false,
    };
    blocks.extend(unsupervised.iter().map(plain));
    if mode == SupervisionMode::None {
        blocks.extend(supervised.iter().map(plain));
    } else {
        for s in supervised {
            let block = supervised_block(s, kappa, mode).map_err(|e| e.in_stream(&s.id))?;
            blocks.push(block);
        }
    }
    ProblemInstance::new(blocks, lambda, priors, kappa)
}

impl std::str::FromStr for SupervisionMode {
    type Err = AlignError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(SupervisionMode::None),
            "soft" => Ok(SupervisionMode::Soft),
            "hard" => Ok(SupervisionMode::Hard),
            other => Err(AlignError::InvalidParameter(format!("unknown supervision mode '{other}'"))),
        }
    }
}

fn supervised_block(s: &PreparedStream, kappa: f64, mode: SupervisionMode) -> Result<StreamBlock> {
    let ann = s
        .annotation
        .as_ref()
        .ok_or_else(|| AlignError::InvalidAnnotation("supervised stream has no annotation".into()))?;
    let (j_count, i_count) = (s.psi.cols(), s.phi.cols());
    let (mask, fixed) = match mode {
        SupervisionMode::Hard => {
            let y_s = expand_annotation(ann, j_count, i_count, &s.background)?;
            (fix_assignment_mask(&y_s), true)
        }
        _ => (build_interval_mask(ann, j_count, i_count, &s.background)?, false),
    };
    Ok(StreamBlock {
        id: s.id.clone(),
        phi: s.phi.scaled(kappa)?,
        psi: s.psi.scaled(kappa)?,
        mask: Some(mask),
        fixed,
        supervised: true,
    })
}
