//! The set of ordered assignments and its linear minimization oracle.
//!
//! An assignment maps every interval `i` to one text element `j(i)` such
//! that `j` starts at the first element, ends at the last one, and advances
//! by at most one per interval. Linear forms over the convex hull of these
//! assignments are minimized at a vertex, which a dynamic program finds in
//! `O(I * J)`.
//!
//! Indices are 0-based throughout the crate.

use nalgebra::DMatrix;

use crate::error::{AlignError, Result};

/// A vertex of the alignment polytope: a monotone unit-step map from
/// intervals to text elements.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AlignmentPath {
    assignment: Vec<usize>,
    j_count: usize,
}

impl AlignmentPath {
    pub fn new(assignment: Vec<usize>, j_count: usize) -> Result<Self> {
        if assignment.is_empty() || j_count == 0 {
            return Err(AlignError::InvalidPath("empty path".into()));
        }
        if assignment[0] != 0 {
            return Err(AlignError::InvalidPath(format!(
                "path must start at element 0, starts at {}",
                assignment[0]
            )));
        }
        let last = *assignment.last().unwrap();
        if last != j_count - 1 {
            return Err(AlignError::InvalidPath(format!(
                "path must end at element {}, ends at {last}",
                j_count - 1
            )));
        }
        for (i, w) in assignment.windows(2).enumerate() {
            if w[1] != w[0] && w[1] != w[0] + 1 {
                return Err(AlignError::InvalidPath(format!(
                    "step {} -> {} at interval {} is not 0 or +1",
                    w[0],
                    w[1],
                    i + 1
                )));
            }
        }
        Ok(AlignmentPath {
            assignment,
            j_count,
        })
    }

    /// Reads the path back from a binary (or relaxed) assignment by taking
    /// the largest entry of every column.
    pub fn from_column_argmax(y: &DMatrix<f64>) -> Result<Self> {
        let assignment = (0..y.ncols())
            .map(|i| {
                let col = y.column(i);
                let mut best = 0;
                for j in 1..col.len() {
                    if col[j] > col[best] {
                        best = j;
                    }
                }
                best
            })
            .collect();
        Self::new(assignment, y.nrows())
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn i_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn j_count(&self) -> usize {
        self.j_count
    }

    /// Number of intervals assigned to each element.
    pub fn durations(&self) -> Vec<usize> {
        let mut d = vec![0; self.j_count];
        for &j in &self.assignment {
            d[j] += 1;
        }
        d
    }

    /// `sum_i cost[j(i), i]`, accumulated in interval order.
    pub fn linear_value(&self, cost: &DMatrix<f64>) -> f64 {
        self.assignment
            .iter()
            .enumerate()
            .fold(0.0, |acc, (i, &j)| acc + cost[(j, i)])
    }

    pub fn avoids(&self, mask: &CellMask) -> bool {
        self.assignment
            .iter()
            .enumerate()
            .all(|(i, &j)| !mask.is_forbidden(j, i))
    }
}

/// A `J x I` matrix in the convex hull of the assignment matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedAssignment(DMatrix<f64>);

impl RelaxedAssignment {
    /// Wraps a matrix after checking entries lie in `[0, 1]` and every column
    /// sums to one. Membership in the hull beyond these checks is the
    /// caller's responsibility.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(AlignError::shape("relaxed assignment", "non-empty", "empty"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(AlignError::NonFinite("relaxed assignment"));
        }
        if matrix.iter().any(|&v| !(-1e-12..=1.0 + 1e-12).contains(&v)) {
            return Err(AlignError::InvalidParameter(
                "relaxed assignment entries must lie in [0, 1]".into(),
            ));
        }
        for (i, col) in matrix.column_iter().enumerate() {
            let s: f64 = col.iter().sum();
            if (s - 1.0).abs() > 1e-10 {
                return Err(AlignError::InvalidParameter(format!(
                    "column {i} of relaxed assignment sums to {s}"
                )));
            }
        }
        Ok(RelaxedAssignment(matrix))
    }

    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<f64>) -> Self {
        RelaxedAssignment(matrix)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn j_count(&self) -> usize {
        self.0.nrows()
    }

    pub fn i_count(&self) -> usize {
        self.0.ncols()
    }

    /// Block-diagonal assembly of one path per stream.
    pub fn from_blocks(paths: &[AlignmentPath], layout: &StreamLayout) -> Result<Self> {
        if paths.len() != layout.len() {
            return Err(AlignError::shape("block assignment", layout.len(), paths.len()));
        }
        let mut y = DMatrix::zeros(layout.j_total(), layout.i_total());
        for (p, b) in paths.iter().zip(layout.blocks()) {
            if p.i_count() != b.i_len || p.j_count() != b.j_len {
                return Err(AlignError::shape(
                    "block assignment",
                    format!("{}x{}", b.j_len, b.i_len),
                    format!("{}x{}", p.j_count(), p.i_count()),
                ));
            }
            for (i, &j) in p.assignment().iter().enumerate() {
                y[(b.j_offset + j, b.i_offset + i)] = 1.0;
            }
        }
        Ok(RelaxedAssignment(y))
    }
}

/// Binary `J x I` matrix with `Y[j(i), i] = 1`.
pub fn path_to_matrix(path: &AlignmentPath) -> RelaxedAssignment {
    let mut y = DMatrix::zeros(path.j_count(), path.i_count());
    for (i, &j) in path.assignment().iter().enumerate() {
        y[(j, i)] = 1.0;
    }
    RelaxedAssignment(y)
}

/// Forbidden cells of a `J x I` assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMask {
    j_count: usize,
    i_count: usize,
    forbidden: Vec<bool>,
}

impl CellMask {
    /// A mask with every cell allowed.
    pub fn allow_all(j_count: usize, i_count: usize) -> Self {
        CellMask {
            j_count,
            i_count,
            forbidden: vec![false; j_count * i_count],
        }
    }

    pub fn from_fn(j_count: usize, i_count: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::allow_all(j_count, i_count);
        for j in 0..j_count {
            for i in 0..i_count {
                m.forbidden[j * i_count + i] = f(j, i);
            }
        }
        m
    }

    pub fn j_count(&self) -> usize {
        self.j_count
    }

    pub fn i_count(&self) -> usize {
        self.i_count
    }

    pub fn forbid(&mut self, j: usize, i: usize) {
        self.forbidden[j * self.i_count + i] = true;
    }

    pub fn is_forbidden(&self, j: usize, i: usize) -> bool {
        self.forbidden[j * self.i_count + i]
    }

    pub fn forbidden_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j in 0..self.j_count {
            for i in 0..self.i_count {
                if self.is_forbidden(j, i) {
                    out.push((j, i));
                }
            }
        }
        out
    }

    /// True when at least one path avoids every forbidden cell.
    pub fn is_feasible(&self) -> bool {
        minimize_linear(&DMatrix::zeros(self.j_count, self.i_count), Some(self)).is_ok()
    }
}

/// 0/1 indicator of the cells outside a diagonal band.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    y_c: DMatrix<f64>,
    beta: f64,
}

impl BandMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.y_c
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Builds the band indicator: the entry for (1-based) element `j` and
/// interval `i` is 0 iff `|j/J - i/I| <= beta`, and 1 otherwise.
pub fn band_indicator(j_count: usize, i_count: usize, beta: f64) -> Result<BandMatrix> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(AlignError::InvalidParameter(format!(
            "band width {beta} outside [0, 1]"
        )));
    }
    let (jf, iff) = (j_count as f64, i_count as f64);
    let y_c = DMatrix::from_fn(j_count, i_count, |j, i| {
        let d = ((j + 1) as f64 / jf - (i + 1) as f64 / iff).abs();
        if d <= beta + 1e-12 {
            0.0
        } else {
            1.0
        }
    });
    Ok(BandMatrix { y_c, beta })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub i_offset: usize,
    pub i_len: usize,
    pub j_offset: usize,
    pub j_len: usize,
}

/// Position of each stream's diagonal block in the concatenated frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamLayout {
    blocks: Vec<Block>,
}

impl StreamLayout {
    /// Layout from per-stream `(I_n, J_n)` sizes, in order.
    pub fn new(sizes: &[(usize, usize)]) -> Result<Self> {
        if sizes.is_empty() {
            return Err(AlignError::InvalidParameter("layout has no streams".into()));
        }
        let mut blocks = Vec::with_capacity(sizes.len());
        let (mut io, mut jo) = (0, 0);
        for &(i_len, j_len) in sizes {
            if i_len == 0 || j_len == 0 {
                return Err(AlignError::InvalidParameter("empty stream block".into()));
            }
            blocks.push(Block {
                i_offset: io,
                i_len,
                j_offset: jo,
                j_len,
            });
            io += i_len;
            jo += j_len;
        }
        Ok(StreamLayout { blocks })
    }

    pub fn single(i_count: usize, j_count: usize) -> Result<Self> {
        Self::new(&[(i_count, j_count)])
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn i_total(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.i_offset + b.i_len)
    }

    pub fn j_total(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.j_offset + b.j_len)
    }

    pub fn block_of(&self, m: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
        let b = self.blocks[n];
        m.view((b.j_offset, b.i_offset), (b.j_len, b.i_len)).clone_owned()
    }
}

/// Minimizes `sum_{j,i} cost[j,i] * Y[j,i]` over assignments avoiding the
/// masked cells.
///
/// Forbidden cells carry infinite cost. Among equal-cost optima the path
/// that stays on the current element (`j(i+1) = j(i)`) is preferred when
/// read from the first interval forward, so flat costs yield the longest
/// possible dwell on the first element. The returned value is the chosen
/// path's cost summed in interval order.
pub fn minimize_linear(cost: &DMatrix<f64>, mask: Option<&CellMask>) -> Result<(AlignmentPath, f64)> {
    let (j_count, i_count) = cost.shape();
    if j_count == 0 || i_count == 0 {
        return Err(AlignError::shape("linear oracle", "non-empty cost", "empty"));
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(AlignError::NonFinite("linear oracle cost"));
    }
    if let Some(m) = mask {
        if m.j_count() != j_count || m.i_count() != i_count {
            return Err(AlignError::shape(
                "linear oracle mask",
                format!("{j_count}x{i_count}"),
                format!("{}x{}", m.j_count(), m.i_count()),
            ));
        }
    }
    if j_count > i_count {
        return Err(AlignError::Infeasible {
            stream: None,
            detail: format!("{j_count} text elements cannot be covered by {i_count} intervals"),
        });
    }

    let allowed = |j: usize, i: usize| mask.is_none_or(|m| !m.is_forbidden(j, i));
    // to_go[j * I + i]: cheapest cost of a partial path occupying (j, i)
    // and finishing at (J-1, I-1).
    let mut to_go = vec![f64::INFINITY; j_count * i_count];
    let last = i_count - 1;
    if allowed(j_count - 1, last) {
        to_go[(j_count - 1) * i_count + last] = cost[(j_count - 1, last)];
    }
    for i in (0..last).rev() {
        for j in 0..j_count {
            if !allowed(j, i) {
                continue;
            }
            let stay = to_go[j * i_count + i + 1];
            let step = if j + 1 < j_count {
                to_go[(j + 1) * i_count + i + 1]
            } else {
                f64::INFINITY
            };
            let best = stay.min(step);
            if best.is_finite() {
                to_go[j * i_count + i] = cost[(j, i)] + best;
            }
        }
    }
    if !to_go[0].is_finite() {
        return Err(AlignError::Infeasible {
            stream: None,
            detail: "no monotone path avoids the forbidden cells".into(),
        });
    }

    let mut assignment = Vec::with_capacity(i_count);
    let mut j = 0;
    assignment.push(0);
    for i in 1..i_count {
        let stay = to_go[j * i_count + i];
        let step = if j + 1 < j_count {
            to_go[(j + 1) * i_count + i]
        } else {
            f64::INFINITY
        };
        if step < stay {
            j += 1;
        }
        assignment.push(j);
    }
    let path = AlignmentPath::new(assignment, j_count)?;
    let value = path.linear_value(cost);
    Ok((path, value))
}

/// Runs the oracle independently on every diagonal block of `cost`.
/// Entries outside the blocks are never read. Returns the per-block paths
/// and the summed value.
pub fn lmo_blocks(
    cost: &DMatrix<f64>,
    layout: &StreamLayout,
    masks: &[Option<CellMask>],
) -> Result<(Vec<AlignmentPath>, f64)> {
    if cost.nrows() != layout.j_total() || cost.ncols() != layout.i_total() {
        return Err(AlignError::shape(
            "block oracle",
            format!("{}x{}", layout.j_total(), layout.i_total()),
            format!("{}x{}", cost.nrows(), cost.ncols()),
        ));
    }
    if !masks.is_empty() && masks.len() != layout.len() {
        return Err(AlignError::shape("block oracle masks", layout.len(), masks.len()));
    }
    let mut paths = Vec::with_capacity(layout.len());
    let mut total = 0.0;
    for n in 0..layout.len() {
        let block = layout.block_of(cost, n);
        let mask = masks.get(n).and_then(|m| m.as_ref());
        let (p, v) = minimize_linear(&block, mask)?;
        total += v;
        paths.push(p);
    }
    Ok((paths, total))
}

const ENUM_MAX_I: usize = 14;
const ENUM_MAX_J: usize = 7;

/// Lists every assignment of `i_count` intervals to `j_count` elements that
/// avoids the mask. Intended for brute-force checks on tiny sizes only.
pub fn enumerate_paths(i_count: usize, j_count: usize, mask: Option<&CellMask>) -> Result<Vec<AlignmentPath>> {
    if i_count > ENUM_MAX_I || j_count > ENUM_MAX_J {
        return Err(AlignError::EnumerationTooLarge { i_count, j_count });
    }
    if i_count == 0 || j_count == 0 {
        return Err(AlignError::InvalidParameter("empty enumeration".into()));
    }
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(i_count);
    let ok = |j: usize, i: usize| mask.is_none_or(|m| !m.is_forbidden(j, i));
    fn rec(
        i_count: usize,
        j_count: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<AlignmentPath>,
        ok: &dyn Fn(usize, usize) -> bool,
    ) {
        let i = current.len();
        if i == i_count {
            if *current.last().unwrap() == j_count - 1 {
                out.push(AlignmentPath {
                    assignment: current.clone(),
                    j_count,
                });
            }
            return;
        }
        let prev = current[i - 1];
        for j in [prev, prev + 1] {
            // must still be able to reach the last element
            if j >= j_count || j_count - 1 - j > i_count - 1 - i || !ok(j, i) {
                continue;
            }
            current.push(j);
            rec(i_count, j_count, current, out, ok);
            current.pop();
        }
    }
    if j_count <= i_count && ok(0, 0) {
        current.push(0);
        if i_count == 1 {
            if j_count == 1 {
                out.push(AlignmentPath {
                    assignment: current.clone(),
                    j_count,
                });
            }
        } else {
            rec(i_count, j_count, &mut current, &mut out, &ok);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[usize], j: usize) -> AlignmentPath {
        AlignmentPath::new(v.to_vec(), j).unwrap()
    }

    #[test]
    fn path_validation() {
        assert!(AlignmentPath::new(vec![0, 0, 1], 2).is_ok());
        assert!(AlignmentPath::new(vec![1, 1], 2).is_err());
        assert!(AlignmentPath::new(vec![0, 0], 2).is_err());
        assert!(AlignmentPath::new(vec![0, 2, 2], 3).is_err());
        assert!(AlignmentPath::new(vec![0, 1, 0, 1], 2).is_err());
    }

    #[test]
    fn path_matrices() {
        let y = path_to_matrix(&p(&[0, 1, 2], 3));
        assert_eq!(*y.matrix(), DMatrix::<f64>::identity(3, 3));
        let y = path_to_matrix(&p(&[0, 0, 0], 1));
        assert_eq!(*y.matrix(), DMatrix::from_element(1, 3, 1.0));
        let y = path_to_matrix(&p(&[0, 0, 1], 2));
        assert_eq!(*y.matrix(), DMatrix::from_row_slice(2, 3, &[1., 1., 0., 0., 0., 1.]));
        assert!(RelaxedAssignment::new(y.matrix().clone()).is_ok());
        assert_eq!(AlignmentPath::from_column_argmax(y.matrix()).unwrap(), p(&[0, 0, 1], 2));
    }

    #[test]
    fn oracle_small_example() {
        let cost = DMatrix::from_row_slice(2, 3, &[0., 0., 5., 9., 1., 0.]);
        let (path, value) = minimize_linear(&cost, None).unwrap();
        assert_eq!(path, p(&[0, 0, 1], 2));
        assert_eq!(value, 0.0);
    }

    #[test]
    fn oracle_square_is_trace() {
        let cost = DMatrix::from_fn(4, 4, |j, i| (3 * j + 7 * i) as f64 - 5.0);
        let (path, value) = minimize_linear(&cost, None).unwrap();
        assert_eq!(path, p(&[0, 1, 2, 3], 4));
        assert_eq!(value, cost.trace());
    }

    #[test]
    fn oracle_errors() {
        assert!(matches!(
            minimize_linear(&DMatrix::zeros(3, 2), None),
            Err(AlignError::Infeasible { .. })
        ));
        let mut c = DMatrix::zeros(2, 3);
        c[(1, 1)] = f64::NAN;
        assert!(matches!(minimize_linear(&c, None), Err(AlignError::NonFinite(_))));
        let mut m = CellMask::allow_all(2, 3);
        m.forbid(0, 0);
        assert!(!m.is_feasible());
        assert!(matches!(
            minimize_linear(&DMatrix::zeros(2, 3), Some(&m)),
            Err(AlignError::Infeasible { .. })
        ));
    }

    #[test]
    fn flat_cost_dwells_on_first_element() {
        let (path, _) = minimize_linear(&DMatrix::zeros(3, 6), None).unwrap();
        assert_eq!(path.assignment(), &[0, 0, 0, 0, 1, 2]);
    }

    #[test]
    fn mask_is_respected() {
        let mut m = CellMask::allow_all(2, 4);
        m.forbid(0, 1);
        let (path, _) = minimize_linear(&DMatrix::zeros(2, 4), Some(&m)).unwrap();
        assert_eq!(path.assignment(), &[0, 1, 1, 1]);
        assert!(path.avoids(&m));
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_paths(4, 2, None).unwrap().len(), 3);
        assert_eq!(enumerate_paths(5, 5, None).unwrap().len(), 1);
        assert_eq!(enumerate_paths(6, 1, None).unwrap().len(), 1);
        assert_eq!(enumerate_paths(1, 1, None).unwrap().len(), 1);
        assert_eq!(enumerate_paths(8, 4, None).unwrap().len(), 35);
        assert_eq!(enumerate_paths(2, 3, None).unwrap().len(), 0);
        assert!(matches!(
            enumerate_paths(15, 2, None),
            Err(AlignError::EnumerationTooLarge { .. })
        ));
        assert!(enumerate_paths(14, 8, None).is_err());
    }

    #[test]
    fn band_examples() {
        assert!(band_indicator(3, 5, 1.0).unwrap().matrix().iter().all(|&v| v == 0.0));
        let b = band_indicator(4, 4, 0.0).unwrap();
        for j in 0..4 {
            for i in 0..4 {
                assert_eq!(b.matrix()[(j, i)], if i == j { 0.0 } else { 1.0 });
            }
        }
        // |j/2 - i/4| <= 1/4 with 1-based indices
        let b = band_indicator(2, 4, 0.25).unwrap();
        let expected = [[0., 0., 0., 1.], [1., 1., 0., 0.]];
        for j in 0..2 {
            for i in 0..4 {
                assert_eq!(b.matrix()[(j, i)], expected[j][i], "cell ({j},{i})");
            }
        }
        assert!(band_indicator(2, 4, 1.5).is_err());
    }

    #[test]
    fn blocks_are_independent() {
        let layout = StreamLayout::new(&[(3, 2), (3, 2)]).unwrap();
        let block = [0., 0., 5., 9., 1., 0.];
        let mut cost = DMatrix::from_element(4, 6, 100.0);
        for b in layout.blocks() {
            cost.view_mut((b.j_offset, b.i_offset), (2, 3))
                .copy_from(&DMatrix::from_row_slice(2, 3, &block));
        }
        let (paths, total) = lmo_blocks(&cost, &layout, &[]).unwrap();
        assert_eq!(paths, vec![p(&[0, 0, 1], 2), p(&[0, 0, 1], 2)]);
        assert_eq!(total, 0.0);
        cost[(0, 5)] = -1e6;
        cost[(3, 0)] = -1e6;
        let (again, _) = lmo_blocks(&cost, &layout, &[]).unwrap();
        assert_eq!(again, paths);
        let y = RelaxedAssignment::from_blocks(&paths, &layout).unwrap();
        assert_eq!(y.matrix().sum(), 6.0);
        assert_eq!(y.matrix()[(3, 5)], 1.0);
    }
}
