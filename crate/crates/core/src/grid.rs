//! Discrete Gelfand triples on the unit interval.
//!
//! A [`SpatialGrid`] holds `n` interior nodes `x_j = j h`, `h = 1/(n+1)`, with
//! homogeneous Dirichlet values implied at both ends. [`Field`] is a nodal
//! function on such a grid. All norms carry the `h` weight so that they
//! approximate their continuum counterparts under refinement.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::tridiag;

/// Uniform Dirichlet grid on (0,1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpatialGrid {
    n_interior: usize,
}

impl SpatialGrid {
    pub fn new(n_interior: usize) -> Result<Self> {
        if n_interior < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 interior nodes, got {n_interior}"
            )));
        }
        Ok(Self { n_interior })
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n_interior + 1) as f64
    }

    /// Coordinate of interior node `j` (zero-based, so `x = (j + 1) h`).
    pub fn node(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_interior).map(|j| self.node(j)).collect()
    }

    /// Eigenvalue of `-Δ_h` for the mode `sin(kπx)`, `k >= 1`.
    pub fn neg_laplacian_eigenvalue(&self, k: usize) -> f64 {
        let h = self.h();
        let s = (k as f64 * PI * h / 2.0).sin();
        4.0 / (h * h) * s * s
    }

    /// Discretely L²-orthonormal sine mode `√2 sin(kπx)` sampled on the nodes.
    pub fn sine_mode(&self, k: usize) -> Field {
        Field::from_fn(*self, |x| std::f64::consts::SQRT_2 * (k as f64 * PI * x).sin())
    }

    /// Coefficients `c_k = (u, ψ_k)_{L²}` for `k = 1..=n`. Because the modes
    /// diagonalise `-Δ_h`, the L², H¹₀ and H⁻¹ norms are weighted ℓ² norms of
    /// these coefficients.
    pub fn sine_coefficients(&self, u: &Field) -> Vec<f64> {
        let n = self.n_interior;
        let h = self.h();
        (1..=n)
            .map(|k| {
                let w = k as f64 * PI * h;
                let mut s = 0.0;
                for (j, v) in u.values.iter().enumerate() {
                    s += v * (w * (j + 1) as f64).sin();
                }
                s * h * std::f64::consts::SQRT_2
            })
            .collect()
    }
}

/// Nodal values on a [`SpatialGrid`]; boundary values are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_interior {
            return Err(Error::InvalidGrid(format!(
                "field has {} values for {} interior nodes",
                values.len(),
                grid.n_interior
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        Ok(Self { grid, values })
    }

    /// Constructor for internally produced values. Length is checked in debug
    /// builds only.
    pub(crate) fn from_vec(grid: SpatialGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_interior);
        Self { grid, values }
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        Self::from_vec(grid, vec![0.0; grid.n_interior])
    }

    pub fn constant(grid: SpatialGrid, c: f64) -> Self {
        Self::from_vec(grid, vec![c; grid.n_interior])
    }

    pub fn from_fn(grid: SpatialGrid, f: impl FnMut(f64) -> f64) -> Self {
        Self::from_vec(grid, grid.nodes().into_iter().map(f).collect())
    }

    /// Unit nodal spike at zero-based node `j`.
    pub fn spike(grid: SpatialGrid, j: usize) -> Self {
        let mut f = Self::zeros(grid);
        f.values[j] = 1.0;
        f
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
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

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                left: self.grid.n_interior,
                right: other.grid.n_interior,
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        Field::from_vec(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// Nodewise product.
    pub fn hadamard(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a * b)
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: f64, other: &Field) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    /// Weighted L² inner product `h Σ u_j v_j`.
    pub fn dot(&self, other: &Field) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.grid.h() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Three-point Dirichlet Laplacian `(u_{j-1} - 2u_j + u_{j+1}) / h²`.
pub fn discrete_laplacian(u: &Field) -> Field {
    let n = u.len();
    let inv_h2 = 1.0 / (u.grid.h() * u.grid.h());
    let v = &u.values;
    let out = (0..n)
        .map(|j| {
            let left = if j > 0 { v[j - 1] } else { 0.0 };
            let right = if j + 1 < n { v[j + 1] } else { 0.0 };
            (left - 2.0 * v[j] + right) * inv_h2
        })
        .collect();
    Field::from_vec(u.grid, out)
}

/// Solves `(-Δ_h) u = f` with one tridiagonal sweep.
pub fn inverse_neg_laplacian(f: &Field) -> Field {
    let h = f.grid.h();
    let inv_h2 = 1.0 / (h * h);
    let mut x = f.values.clone();
    tridiag::solve_constant_in_place(2.0 * inv_h2, -inv_h2, &mut x);
    Field::from_vec(f.grid, x)
}

/// Solves `(I - c Δ_h) u = f`, `c >= 0`.
pub fn solve_shifted_laplacian(c: f64, f: &Field) -> Field {
    let h = f.grid.h();
    let r = c / (h * h);
    let mut x = f.values.clone();
    tridiag::solve_constant_in_place(1.0 + 2.0 * r, -r, &mut x);
    Field::from_vec(f.grid, x)
}

/// Spatial norms used by the triples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Norm {
    L2,
    /// Discrete H¹₀ seminorm of the Dirichlet extension.
    H1,
    /// Dual norm realised through the discrete inverse Laplacian.
    Hminus1,
    Lp(f64),
}

impl Norm {
    /// Exponent `q` such that `norm(u - v) = ‖embed(u) - embed(v)‖_q`.
    pub fn embedding_exponent(&self) -> f64 {
        match self {
            Norm::Lp(p) => *p,
            _ => 2.0,
        }
    }
}

/// Linear isometry into a plain `ℓ^q` space, `q = which.embedding_exponent()`.
/// Distances between many fields are then cheap vector differences.
pub fn embed(u: &Field, which: Norm) -> Vec<f64> {
    let grid = u.grid;
    let h = grid.h();
    match which {
        Norm::L2 => u.values.iter().map(|v| v * h.sqrt()).collect(),
        Norm::H1 => {
            let v = &u.values;
            let n = v.len();
            let s = 1.0 / h.sqrt();
            let mut out = Vec::with_capacity(n + 1);
            out.push(v[0] * s);
            for j in 0..n - 1 {
                out.push((v[j + 1] - v[j]) * s);
            }
            out.push(-v[n - 1] * s);
            out
        }
        Norm::Hminus1 => grid
            .sine_coefficients(u)
            .into_iter()
            .enumerate()
            .map(|(k, c)| c / grid.neg_laplacian_eigenvalue(k + 1).sqrt())
            .collect(),
        Norm::Lp(p) => {
            let w = h.powf(1.0 / p);
            u.values.iter().map(|v| v * w).collect()
        }
    }
}

/// `‖a - b‖_q` for embedded vectors.
pub fn embedded_distance(a: &[f64], b: &[f64], q: f64) -> f64 {
    if q == 2.0 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    } else {
        a.iter().zip(b).map(|(x, y)| (x - y).abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

pub fn norm(u: &Field, which: Norm) -> Result<f64> {
    let h = u.grid.h();
    Ok(match which {
        Norm::L2 => (h * u.values.iter().map(|v| v * v).sum::<f64>()).sqrt(),
        Norm::H1 => {
            let v = &u.values;
            let n = v.len();
            let mut s = v[0] * v[0] + v[n - 1] * v[n - 1];
            for j in 0..n - 1 {
                let d = v[j + 1] - v[j];
                s += d * d;
            }
            (s / h).sqrt()
        }
        Norm::Hminus1 => {
            let w = inverse_neg_laplacian(u);
            u.dot(&w).max(0.0).sqrt()
        }
        Norm::Lp(p) => {
            if !(p >= 1.0) || !p.is_finite() {
                return Err(Error::InvalidParameter(format!("Lp exponent {p} < 1")));
            }
            (h * u.values.iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
        }
    })
}

/// `|x|^{α-1} x`, zero at zero.
#[inline]
pub fn signed_pow(x: f64, alpha: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if alpha == 1.0 {
        x
    } else if alpha == 0.5 {
        x.signum() * x.abs().sqrt()
    } else {
        x.signum() * x.abs().powf(alpha)
    }
}

/// Componentwise signed power `u^{[α]}`.
pub fn signed_power(u: &Field, alpha: f64) -> Field {
    u.map(|v| signed_pow(v, alpha))
}

/// Which Gelfand triple a field lives in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TripleKind {
    /// V = H¹₀, H = L², V* = H⁻¹.
    Heat,
    /// V = L^{m+1}, H = H⁻¹, V* = L^{(m+1)/m}.
    Porous { m: f64 },
}

impl TripleKind {
    pub fn h_norm_kind(&self) -> Norm {
        match self {
            TripleKind::Heat => Norm::L2,
            TripleKind::Porous { .. } => Norm::Hminus1,
        }
    }

    pub fn v_norm_kind(&self) -> Norm {
        match self {
            TripleKind::Heat => Norm::H1,
            TripleKind::Porous { m } => Norm::Lp(m + 1.0),
        }
    }

    /// Integrability exponent of the path space: 2 for heat, m+1 for porous.
    pub fn path_exponent(&self) -> f64 {
        match self {
            TripleKind::Heat => 2.0,
            TripleKind::Porous { m } => m + 1.0,
        }
    }

    pub fn h_norm(&self, u: &Field) -> f64 {
        norm(u, self.h_norm_kind()).expect("triple norms have valid exponents")
    }

    pub fn v_norm(&self, u: &Field) -> f64 {
        norm(u, self.v_norm_kind()).expect("triple norms have valid exponents")
    }

    /// Norm of a functional `f` in V*: H⁻¹ for heat; for porous the
    /// representative `(-Δ)^{-1} f` measured in `L^{(m+1)/m}`.
    pub fn vstar_norm(&self, f: &Field) -> f64 {
        match self {
            TripleKind::Heat => norm(f, Norm::Hminus1).expect("valid"),
            TripleKind::Porous { m } => {
                norm(&inverse_neg_laplacian(f), Norm::Lp((m + 1.0) / m)).expect("valid")
            }
        }
    }

    /// Inner product of H.
    pub fn h_inner(&self, f: &Field, g: &Field) -> f64 {
        match self {
            TripleKind::Heat => f.dot(g),
            TripleKind::Porous { .. } => inverse_neg_laplacian(f).dot(g),
        }
    }
}

/// `V*⟨f, g⟩_V` for the given triple.
pub fn duality_pairing(f: &Field, g: &Field, triple: TripleKind) -> Result<f64> {
    f.same_grid(g)?;
    Ok(triple.h_inner(f, g))
}
