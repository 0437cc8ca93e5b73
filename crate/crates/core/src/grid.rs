//! Uniform tensor grids on intervals and rectangles, the Dirichlet
//! finite-difference Laplacian, and the discrete L₂ / H¹₀ / H⁻¹ / H^{-δ}
//! calculus built on it.
//!
//! Nodes are interior only; the homogeneous Dirichlet boundary is folded
//! into the stencil. Node `(i, j)` has flat index `j * nx + i`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, SparseCholesky};

/// Interval `(0, L)` or rectangle `(0, Lx) × (0, Ly)` with uniform spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dimension: usize,
    lengths: [f64; 2],
    counts: [usize; 2],
}

impl GridSpec {
    pub fn new(lengths: &[f64], counts: &[usize]) -> Result<Self> {
        let dimension = lengths.len();
        if !(1..=2).contains(&dimension) {
            return Err(Error::Grid(format!("dimension must be 1 or 2, got {dimension}")));
        }
        if counts.len() != dimension {
            return Err(Error::Grid(format!(
                "{dimension} lengths but {} node counts",
                counts.len()
            )));
        }
        for (&l, &n) in lengths.iter().zip(counts) {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::Grid(format!("side length must be positive, got {l}")));
            }
            if n < 2 {
                return Err(Error::Grid(format!("need at least 2 interior nodes per axis, got {n}")));
            }
        }
        let mut g = Self {
            dimension,
            lengths: [1.0, 1.0],
            counts: [1, 1],
        };
        g.lengths[..dimension].copy_from_slice(lengths);
        g.counts[..dimension].copy_from_slice(counts);
        Ok(g)
    }

    pub fn interval(length: f64, n: usize) -> Result<Self> {
        Self::new(&[length], &[n])
    }

    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::new(&[lx, ly], &[nx, ny])
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dimension]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dimension]
    }

    /// Total number of interior nodes.
    pub fn len(&self) -> usize {
        self.counts().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / (self.counts[axis] + 1) as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dimension).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    /// Quadrature weight of one node.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dimension).map(|a| self.spacing(a)).product()
    }

    /// Coordinates of interior node `idx`; unused axes are 0.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let nx = self.counts[0];
        let (i, j) = (idx % nx, idx / nx);
        let x = (i + 1) as f64 * self.spacing(0);
        if self.dimension == 1 {
            [x, 0.0]
        } else {
            [x, (j + 1) as f64 * self.spacing(1)]
        }
    }

    /// Samples `f` at the interior nodes.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> DiscreteField {
        DiscreteField::from_vec(*self, (0..self.len()).map(|k| f(self.coords(k))).collect())
    }

    /// Node counts of the closed grid (interior plus the two boundary layers).
    pub fn closed_counts(&self) -> [usize; 2] {
        let mut c = [1, 1];
        for a in 0..self.dimension {
            c[a] = self.counts[a] + 2;
        }
        c
    }

    /// Coordinates of closed-grid node `(i, j)`; `i = 0` and `i = nx + 1` are on the boundary.
    pub fn closed_coords(&self, i: usize, j: usize) -> [f64; 2] {
        let x = i as f64 * self.spacing(0);
        if self.dimension == 1 {
            [x, 0.0]
        } else {
            [x, j as f64 * self.spacing(1)]
        }
    }

    pub fn closed_len(&self) -> usize {
        self.closed_counts().iter().product()
    }

    /// Whether closed-grid node `(i, j)` lies on ∂Ω.
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        let c = self.closed_counts();
        let on_x = i == 0 || i + 1 == c[0];
        if self.dimension == 1 {
            on_x
        } else {
            on_x || j == 0 || j + 1 == c[1]
        }
    }

    /// Flat interior index of closed-grid node `(i, j)`, if interior.
    pub fn interior_index(&self, i: usize, j: usize) -> Option<usize> {
        if self.is_boundary(i, j) {
            return None;
        }
        let jj = if self.dimension == 1 { 0 } else { j - 1 };
        Some(jj * self.counts[0] + (i - 1))
    }

    /// Stable text key identifying this grid, used by caches and file headers.
    pub fn signature(&self) -> String {
        let parts: Vec<String> = (0..self.dimension)
            .map(|a| format!("{:e}x{}", self.lengths[a], self.counts[a]))
            .collect();
        format!("d{}:{}", self.dimension, parts.join(","))
    }
}

/// Nodal values on the interior of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl DiscreteField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    /// # Panics
    /// If `values.len()` differs from the grid's node count.
    pub fn from_vec(grid: GridSpec, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "field length does not match grid");
        Self { grid, values }
    }

    pub fn try_from_vec(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `a * self + b * other`
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.lin_comb(1.0, other, -1.0)
    }
}

/// Eigenpairs of −Δ_h, built from the separable sine basis.
///
/// Per axis the eigenvectors of the 3-point Dirichlet stencil are
/// `sqrt(2/L) sin(kπx/L)` with eigenvalues `(4/h²) sin²(kπh/(2L))`; these are
/// orthonormal under the midpoint-rule inner product.
#[derive(Debug, Clone)]
struct Spectrum {
    // axis_vecs[a][k * n_a + i] = k-th normalized sine mode at node i
    axis_vecs: [Vec<f64>; 2],
    axis_vals: [Vec<f64>; 2],
    // modes sorted by eigenvalue: (lambda, kx, ky)
    order: Vec<(f64, usize, usize)>,
}

impl Spectrum {
    fn new(grid: &GridSpec) -> Self {
        let mut axis_vecs = [Vec::new(), Vec::new()];
        let mut axis_vals = [Vec::new(), Vec::new()];
        for a in 0..2 {
            let n = grid.counts[a];
            if a >= grid.dimension {
                // degenerate second axis of a 1D grid: a single unit mode
                axis_vecs[a] = vec![1.0];
                axis_vals[a] = vec![0.0];
                continue;
            }
            let (l, h) = (grid.lengths[a], grid.spacing(a));
            let norm = (2.0 / l).sqrt();
            let mut vecs = vec![0.0; n * n];
            let mut vals = vec![0.0; n];
            for k in 0..n {
                let kk = (k + 1) as f64;
                let s = (kk * PI * h / (2.0 * l)).sin();
                vals[k] = 4.0 / (h * h) * s * s;
                for i in 0..n {
                    let x = (i + 1) as f64 * h;
                    vecs[k * n + i] = norm * (kk * PI * x / l).sin();
                }
            }
            axis_vecs[a] = vecs;
            axis_vals[a] = vals;
        }
        let mut order = Vec::with_capacity(grid.len());
        for ky in 0..axis_vals[1].len() {
            for kx in 0..axis_vals[0].len() {
                order.push((axis_vals[0][kx] + axis_vals[1][ky], kx, ky));
            }
        }
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));
        Self {
            axis_vecs,
            axis_vals,
            order,
        }
    }

    /// Coefficients `c[kx, ky]` (x-fastest layout) of `f` in the orthonormal basis.
    fn analyze(&self, grid: &GridSpec, f: &[f64]) -> Vec<f64> {
        let (nx, ny) = (grid.counts[0], grid.counts[1]);
        let w = grid.cell_volume();
        let ex = &self.axis_vecs[0];
        let ey = &self.axis_vecs[1];
        // x-transform of each row
        let mut g = vec![0.0; nx * ny];
        for j in 0..ny {
            let row = &f[j * nx..(j + 1) * nx];
            for kx in 0..nx {
                let mode = &ex[kx * nx..(kx + 1) * nx];
                g[j * nx + kx] = row.iter().zip(mode).map(|(a, b)| a * b).sum();
            }
        }
        if grid.dimension == 1 {
            return g.into_iter().map(|v| v * w).collect();
        }
        let mut c = vec![0.0; nx * ny];
        for ky in 0..ny {
            let mode = &ey[ky * ny..(ky + 1) * ny];
            for kx in 0..nx {
                let mut s = 0.0;
                for j in 0..ny {
                    s += g[j * nx + kx] * mode[j];
                }
                c[ky * nx + kx] = s * w;
            }
        }
        c
    }

    fn mode_value(&self, grid: &GridSpec, kx: usize, ky: usize, idx: usize) -> f64 {
        let (nx, ny) = (grid.counts[0], grid.counts[1]);
        let (i, j) = (idx % nx, idx / nx);
        let vx = self.axis_vecs[0][kx * nx + i];
        if grid.dimension == 1 {
            vx
        } else {
            vx * self.axis_vecs[1][ky * ny + j]
        }
    }
}

/// The discrete Dirichlet Laplacian Δ_h with a cached factorization of
/// −Δ_h and its eigen-decomposition.
///
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct DiscreteOperators {
    grid: GridSpec,
    laplacian: CsrMatrix,
    neg_lap_chol: SparseCholesky,
    spectrum: Spectrum,
}

/// Assembles the second-order centered Laplacian (3-point in 1D, 5-point in 2D).
pub fn assemble_laplacian(grid: &GridSpec) -> CsrMatrix {
    let n = grid.len();
    let nx = grid.counts[0];
    let ny = grid.counts[1];
    let cx = 1.0 / (grid.spacing(0) * grid.spacing(0));
    let cy = if grid.dimension == 2 {
        1.0 / (grid.spacing(1) * grid.spacing(1))
    } else {
        0.0
    };
    let mut t = Vec::with_capacity(5 * n);
    for j in 0..ny {
        for i in 0..nx {
            let p = j * nx + i;
            t.push((p, p, -2.0 * (cx + cy)));
            if i > 0 {
                t.push((p, p - 1, cx));
            }
            if i + 1 < nx {
                t.push((p, p + 1, cx));
            }
            if grid.dimension == 2 {
                if j > 0 {
                    t.push((p, p - nx, cy));
                }
                if j + 1 < ny {
                    t.push((p, p + nx, cy));
                }
            }
        }
    }
    CsrMatrix::from_triplets(n, n, t)
}

impl DiscreteOperators {
    pub fn new(grid: GridSpec) -> Result<Self> {
        if grid.counts().iter().any(|&n| n < 2) {
            return Err(Error::Grid("need at least 2 interior nodes per axis".into()));
        }
        let laplacian = assemble_laplacian(&grid);
        let neg_lap_chol = SparseCholesky::factor(&laplacian.shifted(0.0, -1.0))?;
        let spectrum = Spectrum::new(&grid);
        Ok(Self {
            grid,
            laplacian,
            neg_lap_chol,
            spectrum,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// The assembled Δ_h.
    pub fn laplacian(&self) -> &CsrMatrix {
        &self.laplacian
    }

    fn check(&self, f: &DiscreteField) -> Result<()> {
        if f.grid == self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Δ_h f
    pub fn apply(&self, f: &DiscreteField) -> Result<DiscreteField> {
        self.check(f)?;
        Ok(DiscreteField::from_vec(self.grid, self.laplacian.mul_vec(&f.values)))
    }

    /// Solves Δ_h x = b.
    pub fn solve(&self, b: &DiscreteField) -> Result<DiscreteField> {
        self.check(b)?;
        let mut x = b.values.clone();
        self.neg_lap_chol.solve_in_place(&mut x);
        for v in &mut x {
            *v = -*v;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("non-finite Poisson solution".into()));
        }
        Ok(DiscreteField::from_vec(self.grid, x))
    }

    /// Number of eigenpairs (= node count).
    pub fn num_modes(&self) -> usize {
        self.spectrum.order.len()
    }

    /// k-th smallest eigenvalue of −Δ_h (0-based).
    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.spectrum.order[k].0
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.spectrum.order.iter().map(|m| m.0).collect()
    }

    /// λ₁, the smallest eigenvalue of −Δ_h.
    pub fn lambda_min(&self) -> f64 {
        self.eigenvalue(0)
    }

    /// Discrete Friedrichs constant λ₁^{-1/2}.
    pub fn friedrichs_constant(&self) -> f64 {
        self.lambda_min().powf(-0.5)
    }

    /// k-th eigenfield of −Δ_h, unit discrete L₂ norm.
    pub fn eigenfield(&self, k: usize) -> DiscreteField {
        let (_, kx, ky) = self.spectrum.order[k];
        let values = (0..self.grid.len())
            .map(|idx| self.spectrum.mode_value(&self.grid, kx, ky, idx))
            .collect();
        DiscreteField::from_vec(self.grid, values)
    }

    /// L₂ coefficients of `f` against the orthonormal eigenfields, sorted by eigenvalue.
    pub fn spectral_coefficients(&self, f: &DiscreteField) -> Result<Vec<f64>> {
        self.check(f)?;
        let c = self.spectrum.analyze(&self.grid, &f.values);
        let nx = self.grid.counts[0];
        Ok(self.spectrum.order.iter().map(|&(_, kx, ky)| c[ky * nx + kx]).collect())
    }

    /// Inverse of [`spectral_coefficients`](Self::spectral_coefficients).
    pub fn synthesize(&self, coeffs: &[f64]) -> Result<DiscreteField> {
        if coeffs.len() != self.num_modes() {
            return Err(Error::GridMismatch);
        }
        let (nx, ny) = (self.grid.counts[0], self.grid.counts[1]);
        // unsort, then apply the separable synthesis
        let mut c = vec![0.0; nx * ny];
        for (&(_, kx, ky), &v) in self.spectrum.order.iter().zip(coeffs) {
            c[ky * nx + kx] = v;
        }
        let ex = &self.spectrum.axis_vecs[0];
        let ey = &self.spectrum.axis_vecs[1];
        let mut g = vec![0.0; nx * ny];
        if self.grid.dimension == 1 {
            g.copy_from_slice(&c);
        } else {
            for j in 0..ny {
                for kx in 0..nx {
                    let mut s = 0.0;
                    for ky in 0..ny {
                        s += c[ky * nx + kx] * ey[ky * ny + j];
                    }
                    g[j * nx + kx] = s;
                }
            }
        }
        let mut f = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let mut s = 0.0;
                for kx in 0..nx {
                    s += g[j * nx + kx] * ex[kx * nx + i];
                }
                f[j * nx + i] = s;
            }
        }
        Ok(DiscreteField::from_vec(self.grid, f))
    }

    /// Per-axis eigenvalues (for the cache file).
    pub fn axis_eigenvalues(&self, axis: usize) -> &[f64] {
        &self.spectrum.axis_vals[axis]
    }
}

/// Midpoint-rule inner product.
pub fn inner_l2(f: &DiscreteField, g: &DiscreteField) -> Result<f64> {
    f.check_same_grid(g)?;
    Ok(dot(&f.values, &g.values) * f.grid.cell_volume())
}

pub fn norm_l2(f: &DiscreteField) -> f64 {
    (dot(&f.values, &f.values) * f.grid.cell_volume()).sqrt()
}

/// (u, v)₁ = (u, −Δ_h v), the discrete Dirichlet form.
pub fn inner_h1(f: &DiscreteField, g: &DiscreteField, ops: &DiscreteOperators) -> Result<f64> {
    f.check_same_grid(g)?;
    let lg = ops.apply(g)?;
    Ok(-inner_l2(f, &lg)?)
}

/// ‖f‖₁ = (f, −Δ_h f)^{1/2}
pub fn norm_h1(f: &DiscreteField, ops: &DiscreteOperators) -> Result<f64> {
    Ok(inner_h1(f, f, ops)?.max(0.0).sqrt())
}

/// (u, v)₋₁ = (Δ_h⁻¹u, Δ_h⁻¹v)₁
pub fn inner_hm1(f: &DiscreteField, g: &DiscreteField, ops: &DiscreteOperators) -> Result<f64> {
    let a = ops.solve(f)?;
    let b = ops.solve(g)?;
    inner_h1(&a, &b, ops)
}

/// ‖f‖₋₁ = ‖Δ_h⁻¹f‖₁
pub fn norm_hm1(f: &DiscreteField, ops: &DiscreteOperators) -> Result<f64> {
    norm_h1(&ops.solve(f)?, ops)
}

/// Spectral H^{-δ} norm `(Σ λ_k^{-δ} c_k²)^{1/2}`, `0 < δ ≤ 1`.
pub fn norm_hmdelta(f: &DiscreteField, ops: &DiscreteOperators, delta: f64) -> Result<f64> {
    let w = hmdelta_weights(ops, delta)?;
    let c = ops.spectral_coefficients(f)?;
    Ok(c.iter().zip(&w).map(|(c, w)| w * c * c).sum::<f64>().sqrt())
}

/// The weights `λ_k^{-δ}` in eigenvalue order.
pub fn hmdelta_weights(ops: &DiscreteOperators, delta: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::param("delta", format!("must lie in (0, 1], got {delta}")));
    }
    Ok(ops.spectrum.order.iter().map(|m| m.0.powf(-delta)).collect())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Truncated Fréchet pre-norm on C([0, ∞); E₀).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrechetPrenorm {
    pub value: f64,
    /// Upper bound on the omitted tail `Σ_{i > I} 2^{-i} a_i/(1 + a_i)`.
    pub tail_bound: f64,
}

/// `Σ_{i=1..I} 2^{-i} a_i/(1 + a_i)` for interval sups `a_i = ‖v‖_{C([0,i];E₀)}`.
pub fn frechet_prenorm(interval_sups: &[f64]) -> Result<FrechetPrenorm> {
    let mut value = 0.0;
    let mut prev = 0.0;
    let mut weight = 1.0;
    for (i, &a) in interval_sups.iter().enumerate() {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::param("interval_sups", format!("entry {i} is not a finite nonnegative number")));
        }
        if a < prev {
            return Err(Error::param(
                "interval_sups",
                format!("sup over [0, {}] is smaller than over [0, {i}]", i + 1),
            ));
        }
        prev = a;
        weight *= 0.5;
        value += weight * a / (1.0 + a);
    }
    Ok(FrechetPrenorm {
        value,
        tail_bound: weight,
    })
}
