//! Uniform periodic arc-length grid.
//!
//! Nodes sit at `s_i = i h` for `i = 0..n`, with node `n` identified with
//! node 0. Inclination angles are stored on one period and carry an
//! implicit jump of `2 pi omega` across the seam; the `*_winding`
//! operators account for that jump, the plain ones assume periodic data.

use std::f64::consts::PI;
use std::ops::Index;

use crate::error::{Error, Result};

/// Smallest admissible number of nodes.
pub const MIN_NODES: usize = 8;

/// Row dominance threshold for [`solve_cyclic_tridiag`].
pub const DOMINANCE_RATIO: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    length: f64,
    h: f64,
}

impl Grid {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::Grid(format!(
                "n = {n} is too small, need at least {MIN_NODES} nodes"
            )));
        }
        if !length.is_finite() || length <= 0.0 {
            return Err(Error::Grid(format!("length must be positive and finite, got {length}")));
        }
        Ok(Self { n, length, h: length / n as f64 })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Samples `f` at the nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_fn(*self, f)
    }

    pub fn constant(&self, value: f64) -> Field {
        Field { grid: *self, values: vec![value; self.n] }
    }

    /// Whether `self` is an index subsampling of `fine`.
    pub fn nests_in(&self, fine: &Grid) -> bool {
        fine.n % self.n == 0 && (fine.length - self.length).abs() <= 1e-14 * self.length
    }
}

/// Convenience wrapper matching [`Grid::new`].
pub fn make_grid(length: f64, n: usize) -> Result<Grid> {
    Grid::new(length, n)
}

/// Samples of a function of arc length on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::Grid(format!(
                "field has {} values but grid has {} nodes",
                values.len(),
                grid.n
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n).map(|i| f(grid.node(i))).collect();
        Self { grid, values }
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n);
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec_unchecked(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.len(), other.len());
        Field::from_vec_unchecked(
            self.grid,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Keeps every `stride`-th node. Used to restrict fine-grid data onto a nested coarse grid.
    pub fn subsample(&self, coarse: Grid) -> Result<Field> {
        if !coarse.nests_in(&self.grid) {
            return Err(Error::Grid(format!(
                "grid with n = {} does not nest in grid with n = {}",
                coarse.n, self.grid.n
            )));
        }
        let stride = self.grid.n / coarse.n;
        Ok(Field::from_vec_unchecked(
            coarse,
            self.values.iter().step_by(stride).copied().collect(),
        ))
    }
}

impl Index<usize> for Field {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

#[inline]
fn seam(omega: i64) -> f64 {
    2.0 * PI * omega as f64
}

/// Central first difference with periodic wraparound.
pub fn deriv1(f: &Field) -> Field {
    deriv1_jump(f, 0.0)
}

/// Central first difference of an angle carrying a `2 pi omega` seam jump.
pub fn deriv1_winding(theta: &Field, omega: i64) -> Field {
    deriv1_jump(theta, seam(omega))
}

fn deriv1_jump(f: &Field, jump: f64) -> Field {
    let n = f.len();
    let inv = 1.0 / (2.0 * f.grid.h);
    let v = &f.values;
    let out = (0..n)
        .map(|i| {
            let (next, prev) = neighbours(v, i, jump);
            (next - prev) * inv
        })
        .collect();
    Field::from_vec_unchecked(f.grid, out)
}

/// Three-point second difference with periodic wraparound.
pub fn deriv2(f: &Field) -> Field {
    deriv2_jump(f, 0.0)
}

/// Three-point second difference of an angle carrying a `2 pi omega` seam jump.
pub fn deriv2_winding(theta: &Field, omega: i64) -> Field {
    deriv2_jump(theta, seam(omega))
}

fn deriv2_jump(f: &Field, jump: f64) -> Field {
    let n = f.len();
    let inv = 1.0 / (f.grid.h * f.grid.h);
    let v = &f.values;
    let out = (0..n)
        .map(|i| {
            let (next, prev) = neighbours(v, i, jump);
            ((next - v[i]) - (v[i] - prev)) * inv
        })
        .collect();
    Field::from_vec_unchecked(f.grid, out)
}

/// Values at `i + 1` and `i - 1`, lifting across the seam by `jump`.
#[inline]
fn neighbours(v: &[f64], i: usize, jump: f64) -> (f64, f64) {
    let n = v.len();
    let next = if i + 1 == n { v[0] + jump } else { v[i + 1] };
    let prev = if i == 0 { v[n - 1] - jump } else { v[i - 1] };
    (next, prev)
}

/// Forward differences `(f_{i+1} - f_i) / h`, living at the midpoints `s_{i+1/2}`.
/// The last entry crosses the seam and is lifted by `2 pi omega`.
pub fn diff_forward_winding(theta: &Field, omega: i64) -> Vec<f64> {
    let n = theta.len();
    let inv = 1.0 / theta.grid.h;
    let v = &theta.values;
    let jump = seam(omega);
    (0..n)
        .map(|i| {
            let next = if i + 1 == n { v[0] + jump } else { v[i + 1] };
            (next - v[i]) * inv
        })
        .collect()
}

/// Periodic rectangle rule `h * sum f_i`.
pub fn integrate(f: &Field) -> f64 {
    f.grid.h * f.values.iter().sum::<f64>()
}

/// Quadrature inner product `h * sum f_i g_i`.
pub fn inner(f: &Field, g: &Field) -> f64 {
    debug_assert_eq!(f.len(), g.len());
    f.grid.h * f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum::<f64>()
}

/// Quadrature L2 norm.
pub fn norm_l2(f: &Field) -> f64 {
    inner(f, f).sqrt()
}

/// Solves the cyclic tridiagonal system
///
/// ```text
/// sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]    (indices mod n)
/// ```
///
/// so `sub[0]` and `sup[n-1]` are the corner entries. The cyclic coupling is
/// removed by a rank-one (Sherman-Morrison) correction, leaving two plain
/// tridiagonal solves with the Thomas algorithm. Rows must satisfy
/// `|sub| + |sup| <= 0.999 |diag|`.
pub fn solve_cyclic_tridiag(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &Field) -> Result<Field> {
    let n = diag.len();
    if sub.len() != n || sup.len() != n || rhs.len() != n {
        return Err(Error::Solver(format!(
            "band lengths ({}, {}, {}) and rhs length {} disagree",
            sub.len(),
            n,
            sup.len(),
            rhs.len()
        )));
    }
    if n < 3 {
        return Err(Error::Solver(format!("cyclic system needs at least 3 rows, got {n}")));
    }
    for i in 0..n {
        let off = sub[i].abs() + sup[i].abs();
        if !(off <= DOMINANCE_RATIO * diag[i].abs()) {
            return Err(Error::Solver(format!(
                "row {i} is not diagonally dominant (|off| = {off:e}, |diag| = {:e})",
                diag[i].abs()
            )));
        }
    }

    // Corner entries A[0][n-1] and A[n-1][0].
    let top = sub[0];
    let bottom = sup[n - 1];
    let gamma = -diag[0];

    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= bottom * top / gamma;

    let x = thomas(sub, &d, sup, rhs.values());
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = bottom;
    let z = thomas(sub, &d, sup, &u);

    let factor = (x[0] + top * x[n - 1] / gamma) / (1.0 + z[0] + top * z[n - 1] / gamma);
    let out = x.iter().zip(&z).map(|(xi, zi)| xi - factor * zi).collect();
    let sol = Field::from_vec_unchecked(rhs.grid, out);
    if !sol.is_finite() {
        return Err(Error::Solver("cyclic solve produced non-finite values".into()));
    }
    Ok(sol)
}

/// Thomas algorithm for the non-cyclic system; ignores `sub[0]` and `sup[n-1]`.
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut beta = diag[0];
    x[0] = rhs[0] / beta;
    for i in 1..n {
        c[i] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * c[i];
        x[i] = (rhs[i] - sub[i] * x[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i + 1] * x[i + 1];
    }
    x
}

/// Applies the cyclic tridiagonal matrix to `x`.
pub fn cyclic_tridiag_apply(sub: &[f64], diag: &[f64], sup: &[f64], x: &[f64]) -> Vec<f64> {
    let n = diag.len();
    (0..n)
        .map(|i| {
            let prev = x[(i + n - 1) % n];
            let next = x[(i + 1) % n];
            sub[i] * prev + diag[i] * x[i] + sup[i] * next
        })
        .collect()
}
