//! Frank-Wolfe minimization of the relaxed alignment objective.
//!
//! The objective is `q(Y) + r(Y) + l(Y)`: the discriminative cost, the
//! duration prior and the band penalty. It is a convex quadratic over the
//! convex hull of block-diagonal assignments, so each iteration calls the
//! dynamic-programming oracle on the gradient, steps towards the returned
//! vertex with an exact line search, and reports the duality gap
//! `<grad, Y - V>`, which bounds the distance to the optimum.

use nalgebra::{DMatrix, DVector};

use crate::discriminative::{compute_q, fit_model, CostKernel};
use crate::error::{AlignError, Result};
use crate::evaluation::diagonal_path;
use crate::matrix::{frobenius_dot, FeatureMatrix};
use crate::polytope::{lmo_blocks, minimize_linear, AlignmentPath, CellMask, RelaxedAssignment, StreamLayout};
use crate::priors::{block_band, duration_excess, PriorConfig};

/// One stream as it enters the joint problem (features already scaled for
/// supervised streams).
#[derive(Debug, Clone)]
pub struct StreamBlock {
    pub id: String,
    pub phi: FeatureMatrix,
    pub psi: FeatureMatrix,
    pub mask: Option<CellMask>,
    /// Assignment pinned by the mask to a single path.
    pub fixed: bool,
    pub supervised: bool,
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    streams: Vec<StreamBlock>,
    phi: FeatureMatrix,
    psi: FeatureMatrix,
    layout: StreamLayout,
    kernel: CostKernel,
    priors: PriorConfig,
    kappa: f64,
    masks: Vec<Option<CellMask>>,
    mu: DVector<f64>,
    band: DMatrix<f64>,
    /// `Psi^T Psi`
    gram: DMatrix<f64>,
}

impl ProblemInstance {
    pub fn new(streams: Vec<StreamBlock>, lambda: f64, priors: PriorConfig, kappa: f64) -> Result<Self> {
        priors.validate()?;
        let first = streams
            .first()
            .ok_or_else(|| AlignError::InvalidParameter("problem has no streams".into()))?;
        let (d, e) = (first.phi.rows(), first.psi.rows());
        let mut sizes = Vec::with_capacity(streams.len());
        for s in &streams {
            if s.phi.rows() != d {
                return Err(AlignError::shape("video feature dimension", d, s.phi.rows()).in_stream(&s.id));
            }
            if s.psi.rows() != e {
                return Err(AlignError::shape("text feature dimension", e, s.psi.rows()).in_stream(&s.id));
            }
            let (i_n, j_n) = (s.phi.cols(), s.psi.cols());
            // zero cost: succeeds iff some path exists under the mask
            minimize_linear(&DMatrix::zeros(j_n, i_n), s.mask.as_ref()).map_err(|e| e.in_stream(&s.id))?;
            sizes.push((i_n, j_n));
        }
        let layout = StreamLayout::new(&sizes)?;
        let phi = FeatureMatrix::hconcat(&streams.iter().map(|s| &s.phi).collect::<Vec<_>>())?;
        let psi = FeatureMatrix::hconcat(&streams.iter().map(|s| &s.psi).collect::<Vec<_>>())?;
        let kernel = compute_q(&phi, lambda)?;
        let mu = priors.duration_targets(&layout)?;
        let band = block_band(&layout, priors.beta)?;
        let gram = psi.as_matrix().transpose() * psi.as_matrix();
        let masks = streams.iter().map(|s| s.mask.clone()).collect();
        Ok(ProblemInstance {
            streams,
            phi,
            psi,
            layout,
            kernel,
            priors,
            kappa,
            masks,
            mu,
            band,
            gram,
        })
    }

    /// Single unmasked stream.
    pub fn single(phi: FeatureMatrix, psi: FeatureMatrix, lambda: f64, priors: PriorConfig) -> Result<Self> {
        let block = StreamBlock {
            id: "stream".into(),
            phi,
            psi,
            mask: None,
            fixed: false,
            supervised: false,
        };
        Self::new(vec![block], lambda, priors, 1.0)
    }

    pub fn streams(&self) -> &[StreamBlock] {
        &self.streams
    }

    pub fn phi(&self) -> &FeatureMatrix {
        &self.phi
    }

    pub fn psi(&self) -> &FeatureMatrix {
        &self.psi
    }

    pub fn layout(&self) -> &StreamLayout {
        &self.layout
    }

    pub fn kernel(&self) -> &CostKernel {
        &self.kernel
    }

    pub fn priors(&self) -> &PriorConfig {
        &self.priors
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn masks(&self) -> &[Option<CellMask>] {
        &self.masks
    }

    pub fn duration_targets(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn band_matrix(&self) -> &DMatrix<f64> {
        &self.band
    }

    pub fn i_total(&self) -> usize {
        self.layout.i_total()
    }

    pub fn j_total(&self) -> usize {
        self.layout.j_total()
    }

    fn check_shape(&self, m: &DMatrix<f64>, what: &'static str) -> Result<()> {
        if m.shape() != (self.j_total(), self.i_total()) {
            return Err(AlignError::shape(
                what,
                format!("{}x{}", self.j_total(), self.i_total()),
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
        Ok(())
    }

    /// Block-diagonal assignment from one path per stream.
    pub fn assignment_from_paths(&self, paths: &[AlignmentPath]) -> Result<RelaxedAssignment> {
        RelaxedAssignment::from_blocks(paths, &self.layout)
    }

    /// Per-stream diagonal paths, moved to the nearest mask-feasible path
    /// where a mask forbids part of the diagonal.
    pub fn initial_paths(&self) -> Result<Vec<AlignmentPath>> {
        self.layout
            .blocks()
            .iter()
            .zip(&self.streams)
            .zip(&self.masks)
            .map(|((b, s), mask)| {
                let diag = diagonal_path(b.i_len, b.j_len).map_err(|e| e.in_stream(&s.id))?;
                match mask {
                    Some(m) if !diag.avoids(m) => {
                        let mut cost = DMatrix::zeros(b.j_len, b.i_len);
                        for (i, &j) in diag.assignment().iter().enumerate() {
                            cost[(j, i)] = -1.0;
                        }
                        Ok(minimize_linear(&cost, Some(m)).map_err(|e| e.in_stream(&s.id))?.0)
                    }
                    _ => Ok(diag),
                }
            })
            .collect()
    }
}

/// The three parts of the objective at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    pub discriminative: f64,
    pub duration: f64,
    pub band: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.discriminative + self.duration + self.band
    }
}

pub fn objective_terms(inst: &ProblemInstance, y: &RelaxedAssignment) -> Result<ObjectiveTerms> {
    objective_terms_at(inst, y.matrix())
}

/// The objective's formula evaluated at any `J x I` matrix, inside the
/// polytope or not.
pub fn objective_terms_at(inst: &ProblemInstance, y: &DMatrix<f64>) -> Result<ObjectiveTerms> {
    inst.check_shape(y, "objective")?;
    let yq = y * inst.kernel.q_matrix();
    Ok(terms_with(inst, y, &yq))
}

fn terms_with(inst: &ProblemInstance, y: &DMatrix<f64>, yq: &DMatrix<f64>) -> ObjectiveTerms {
    let i_total = inst.i_total() as f64;
    let my = &inst.gram * y;
    let excess = y.column_sum() - &inst.mu;
    ObjectiveTerms {
        discriminative: frobenius_dot(&my, yq) / (2.0 * i_total),
        duration: 0.5 * inst.priors.inv_sigma_sq() * excess.norm_squared(),
        band: inst.priors.alpha * frobenius_dot(&inst.band, y),
    }
}

/// `q(Y) + r(Y) + l(Y)`.
pub fn objective(inst: &ProblemInstance, y: &RelaxedAssignment) -> Result<f64> {
    Ok(objective_terms(inst, y)?.total())
}

/// `(1/I) Psi^T Psi Y Q + (1/sigma^2) (Y 1 - mu) 1^T + alpha Y_c`.
pub fn gradient(inst: &ProblemInstance, y: &RelaxedAssignment) -> Result<DMatrix<f64>> {
    gradient_at(inst, y.matrix())
}

/// [`gradient`] at any `J x I` matrix.
pub fn gradient_at(inst: &ProblemInstance, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    inst.check_shape(y, "gradient")?;
    let yq = y * inst.kernel.q_matrix();
    gradient_with(inst, y, &yq)
}

fn gradient_with(inst: &ProblemInstance, y: &DMatrix<f64>, yq: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut g = (&inst.gram * yq) / inst.i_total() as f64;
    let excess = duration_excess(y, &inst.mu)? * inst.priors.inv_sigma_sq();
    for (j, mut row) in g.row_iter_mut().enumerate() {
        row.add_scalar_mut(excess[j]);
    }
    g += &inst.band * inst.priors.alpha;
    Ok(g)
}

/// Second derivative of the objective along `direction`.
fn curvature_with(inst: &ProblemInstance, direction: &DMatrix<f64>, direction_q: &DMatrix<f64>) -> f64 {
    let md = &inst.gram * direction;
    let durations = direction.column_sum();
    frobenius_dot(&md, direction_q) / inst.i_total() as f64 + inst.priors.inv_sigma_sq() * durations.norm_squared()
}

fn step_size(slope: f64, curvature: f64, iteration: usize) -> f64 {
    if !curvature.is_finite() {
        return 2.0 / (iteration as f64 + 2.0);
    }
    if curvature <= 1e-14 {
        return if slope < 0.0 { 1.0 } else { 0.0 };
    }
    (-slope / curvature).clamp(0.0, 1.0)
}

/// Exact minimizer over `[0, 1]` of the objective along `y + gamma * direction`.
pub fn exact_line_search(inst: &ProblemInstance, y: &RelaxedAssignment, direction: &DMatrix<f64>) -> Result<f64> {
    inst.check_shape(direction, "line search direction")?;
    let g = gradient(inst, y)?;
    let slope = frobenius_dot(&g, direction);
    let dq = direction * inst.kernel.q_matrix();
    Ok(step_size(slope, curvature_with(inst, direction, &dq), 0))
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iter: usize,
    pub gap_tol: f64,
    /// Starting point; per-stream diagonal paths when absent.
    pub init: Option<RelaxedAssignment>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iter: 2000,
            gap_tol: 1e-6,
            init: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub y_relaxed: RelaxedAssignment,
    pub w_star: FeatureMatrix,
    /// Objective at every visited iterate, starting with the initial point.
    pub objective_trace: Vec<f64>,
    /// Duality gap at every visited iterate.
    pub gap_trace: Vec<f64>,
    /// Number of Frank-Wolfe steps taken.
    pub iterations: usize,
    pub converged: bool,
}

impl SolveResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }

    pub fn final_gap(&self) -> f64 {
        *self.gap_trace.last().expect("trace is never empty")
    }
}

/// Runs Frank-Wolfe until the duality gap drops to `gap_tol` or `max_iter`
/// steps have been taken.
pub fn solve(inst: &ProblemInstance, options: &SolveOptions) -> Result<SolveResult> {
    if options.gap_tol.is_nan() || options.gap_tol < 0.0 {
        return Err(AlignError::InvalidParameter(format!("gap tolerance {}", options.gap_tol)));
    }
    let q = inst.kernel.q_matrix();
    let mut y = match &options.init {
        Some(init) => {
            inst.check_shape(init.matrix(), "initial assignment")?;
            init.matrix().clone()
        }
        None => inst.assignment_from_paths(&inst.initial_paths()?)?.into_matrix(),
    };
    let mut yq = &y * q;
    let mut objective_trace = Vec::new();
    let mut gap_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for t in 0..=options.max_iter {
        let f = terms_with(inst, &y, &yq).total();
        if !f.is_finite() {
            return Err(AlignError::NonFiniteObjective { iteration: t });
        }
        let g = gradient_with(inst, &y, &yq)?;
        let (paths, _) = lmo_blocks(&g, &inst.layout, &inst.masks)?;
        let v = RelaxedAssignment::from_blocks(&paths, &inst.layout)?.into_matrix();
        let direction = &v - &y;
        let gap = -frobenius_dot(&g, &direction);
        objective_trace.push(f);
        gap_trace.push(gap);
        iterations = t;
        if gap <= options.gap_tol {
            converged = true;
            break;
        }
        if t == options.max_iter {
            break;
        }
        let vq = vertex_times_q(&paths, &inst.layout, q);
        let direction_q = &vq - &yq;
        let gamma = step_size(-gap, curvature_with(inst, &direction, &direction_q), t);
        if gamma == 0.0 {
            // no descent along the Frank-Wolfe direction; the gap is roundoff
            converged = gap <= options.gap_tol.max(1e-12 * f.abs().max(1.0));
            break;
        }
        y += &direction * gamma;
        yq += &direction_q * gamma;
    }

    let y_relaxed = RelaxedAssignment::from_matrix_unchecked(y);
    let w_star = fit_model(&inst.psi, &y_relaxed, &inst.phi, inst.kernel.lambda())?;
    Ok(SolveResult {
        y_relaxed,
        w_star,
        objective_trace,
        gap_trace,
        iterations,
        converged,
    })
}

/// `V Q` for a binary block-diagonal `V`: row `j` is the sum of the rows of
/// `Q` for the intervals assigned to `j`.
fn vertex_times_q(paths: &[AlignmentPath], layout: &StreamLayout, q: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(layout.j_total(), q.ncols());
    for (p, b) in paths.iter().zip(layout.blocks()) {
        for (i, &j) in p.assignment().iter().enumerate() {
            let mut row = out.row_mut(b.j_offset + j);
            row += q.row(b.i_offset + i);
        }
    }
    out
}
