//! Numerical checks of local monotonicity, coercivity and growth for the
//! frozen operators `𝒜_ξ(u) = A(u) + F(ξ)` and their noise coefficients.
//!
//! Constants are computed from sharp discrete quantities of the grid and the
//! covariance, then each random triple `(u₁, u₂, ξ)` is tested against them.
//! The largest constant each sample would have needed is reported alongside.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::Result;
use crate::grid::{self, inverse_neg_laplacian, signed_power, Field, Norm, SpatialGrid, TripleKind};
use crate::haar::fmt_f64;
use crate::rng;
use crate::solver::{difference, Example, GradientMode, ProblemSpec};
use crate::wiener::ModeBasis;

/// Grid and covariance constants used by the checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HypothesisConstants {
    /// `1 / sqrt(μ₁)`: `|u|_{H⁻¹} <= c_grid |u|_{L²}`.
    pub c_grid: f64,
    /// `max_j Σ_i λ_i ψ_i(x_j)²`.
    pub q_max: f64,
    /// Lipschitz constant of `u ↦ c_σ u` into Hilbert–Schmidt operators, squared.
    pub c_sigma_hs: f64,
    /// `|D_h f|²_{H⁻¹} <= kappa_sq |f|²_{L²}`.
    pub kappa_sq: f64,
    /// `|D_h f|²_{L²} <= d_norm_sq |f|²_{L²}`.
    pub d_norm_sq: f64,
    /// `max_{j,l} ((-Δ_h)^{-1})_{jl} / h`.
    pub g_max: f64,
    /// Constant of the monotonicity inequality.
    pub c_monotone: f64,
    /// Constant of the coercivity inequality.
    pub c_coercive: f64,
    /// Constant of the growth inequality.
    pub c_growth: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HypothesisRow {
    pub pair_id: usize,
    /// `2⟨A(u₁) - A(u₂), u₁ - u₂⟩ + |Σ(u₁) - Σ(u₂)|² - C |u₁ - u₂|²_H`, must be `<= 0`.
    pub defect_a: f64,
    /// Coercivity margin, must be `<= 0`.
    pub margin_b: f64,
    /// Growth ratio, must be `<= 1`.
    pub ratio_c: f64,
    /// `⟨A(u₁) - A(u₂), u₁ - u₂⟩_H` alone.
    pub a_part: f64,
    /// Magnitude of the terms in each check, for rounding tolerances.
    pub scale_a: f64,
    pub scale_b: f64,
}

#[derive(Clone, Debug)]
pub struct HypothesisReport {
    pub constants: HypothesisConstants,
    pub rows: Vec<HypothesisRow>,
    /// Smallest constants that would have made every sampled check hold.
    pub needed_monotone: f64,
    pub needed_coercive: f64,
    pub needed_growth: f64,
}

/// Relative rounding allowance on sign checks.
pub const ROUNDING: f64 = 1e-10;

impl HypothesisReport {
    pub fn monotonicity_violations(&self) -> usize {
        self.rows.iter().filter(|r| r.defect_a > ROUNDING * r.scale_a.max(1.0)).count()
    }

    pub fn coercivity_violations(&self) -> usize {
        self.rows.iter().filter(|r| r.margin_b > ROUNDING * r.scale_b.max(1.0)).count()
    }

    pub fn growth_violations(&self) -> usize {
        self.rows.iter().filter(|r| r.ratio_c > 1.0 + ROUNDING).count()
    }

    pub fn all_pass(&self) -> bool {
        self.monotonicity_violations() == 0 && self.coercivity_violations() == 0 && self.growth_violations() == 0
    }

    /// Rows `pair_id, defect_a, margin_b, ratio_c`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "pair_id,defect_a,margin_b,ratio_c")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.pair_id, fmt_f64(r.defect_a), fmt_f64(r.margin_b), fmt_f64(r.ratio_c))?;
        }
        Ok(())
    }
}

fn dense_neg_laplacian(grid: SpatialGrid) -> DMatrix<f64> {
    let n = grid.n_interior();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            2.0 * inv_h2
        } else if i.abs_diff(j) == 1 {
            -inv_h2
        } else {
            0.0
        }
    })
}

fn dense_inverse_neg_laplacian(grid: SpatialGrid) -> DMatrix<f64> {
    let n = grid.n_interior();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        let col = inverse_neg_laplacian(&Field::spike(grid, j));
        for i in 0..n {
            k[(i, j)] = col.values()[i];
        }
    }
    k
}

fn dense_difference(grid: SpatialGrid) -> DMatrix<f64> {
    let n = grid.n_interior();
    let mut d = DMatrix::zeros(n, n);
    for j in 0..n {
        let col = difference(&Field::spike(grid, j));
        for i in 0..n {
            d[(i, j)] = col.values()[i];
        }
    }
    d
}

fn lambda_max(m: DMatrix<f64>) -> f64 {
    m.symmetric_eigen().eigenvalues.max()
}

/// Discrete constants for `problem`.
pub fn constants(problem: &ProblemSpec) -> Result<HypothesisConstants> {
    let grid = problem.grid();
    let n = grid.n_interior();
    let h = grid.h();
    let basis = problem.qwiener.basis(grid)?;
    let lambdas = problem.qwiener.eigenvalues();
    let weights = mode_weights(&basis, lambdas);
    let q_max = weights.iter().copied().fold(0.0, f64::max);
    let c_grid = 1.0 / grid.neg_laplacian_eigenvalue(1).sqrt();
    let k = dense_inverse_neg_laplacian(grid);
    let d = dense_difference(grid);
    let kappa_sq = lambda_max(d.transpose() * &k * &d);
    let d_norm_sq = lambda_max(d.transpose() * &d);
    let g_max = k.iter().copied().fold(0.0, f64::max) / h;
    let cs2 = problem.c_sigma * problem.c_sigma;
    let m = problem.m();
    let c_sigma_hs = match problem.triple() {
        TripleKind::Heat => cs2 * q_max,
        TripleKind::Porous { .. } => {
            // sup_u Σ_i λ_i |u ψ_i|²_{H⁻¹} / |u|²_{H⁻¹} as a generalised eigenvalue
            let mut mmat = DMatrix::zeros(n, n);
            for (psi, lam) in basis.modes().iter().zip(lambdas) {
                let dpsi = DMatrix::from_diagonal(&DVector::from_column_slice(psi.values()));
                mmat += *lam * (&dpsi * &k * &dpsi);
            }
            let l = dense_neg_laplacian(grid).cholesky().expect("SPD").l();
            cs2 * lambda_max(l.transpose() * mmat * l)
        }
    };
    let (c_monotone, c_coercive, c_growth) = match problem.example {
        Example::HeatSqrtDrift => (c_sigma_hs, c_sigma_hs + 1.0, 2.0 * f64::max(1.0, c_grid * c_grid)),
        Example::PorousSqrtDrift { .. } => {
            let q = (m + 1.0) / m;
            (
                c_sigma_hs,
                f64::max(c_sigma_hs + 1.0, c_grid * c_grid),
                (q - 1.0).exp2() * f64::max(1.0, g_max.powf(q)),
            )
        }
        Example::PorousGradientNoise { .. } => {
            let hs = gradient_hs_constant(problem.gradient_mode, q_max, kappa_sq, c_grid, d_norm_sq);
            (0.0, f64::max(1.0, hs), 1.0)
        }
    };
    Ok(HypothesisConstants { c_grid, q_max, c_sigma_hs, kappa_sq, d_norm_sq, g_max, c_monotone, c_coercive, c_growth })
}

/// `|Σ(ξ)|²_{HS} <= constant · |ξ|_{L¹}`.
fn gradient_hs_constant(mode: GradientMode, q_max: f64, kappa_sq: f64, c_grid: f64, d_norm_sq: f64) -> f64 {
    match mode {
        GradientMode::Divergence => q_max * kappa_sq,
        GradientMode::Coefficient => q_max * c_grid * c_grid * d_norm_sq,
    }
}

/// `Σ_i λ_i ψ_i(x_j)²` per node.
fn mode_weights(basis: &ModeBasis, lambdas: &[f64]) -> Vec<f64> {
    let n = basis.grid().n_interior();
    (0..n)
        .map(|j| basis.modes().iter().zip(lambdas).map(|(p, l)| l * p.values()[j] * p.values()[j]).sum())
        .collect()
}

/// Squared Hilbert–Schmidt norm `Σ_i λ_i |B ψ_i|²_H` of an operator given by
/// its action on each mode.
fn hs_norm_sq(basis: &ModeBasis, lambdas: &[f64], triple: TripleKind, apply: impl Fn(&Field) -> Field) -> f64 {
    basis
        .modes()
        .iter()
        .zip(lambdas)
        .map(|(psi, l)| l * triple.h_norm(&apply(psi)).powi(2))
        .sum()
}

/// `⟨A(u₁) - A(u₂), u₁ - u₂⟩_H` with `A(u) = Δ_h u^{[m]}`: the L² pairing for
/// `m = 1` in the heat triple and the H⁻¹ pairing otherwise.
pub fn a_part_pairing(u1: &Field, u2: &Field, triple: TripleKind) -> f64 {
    let m = match triple {
        TripleKind::Heat => 1.0,
        TripleKind::Porous { m } => m,
    };
    let a = grid::discrete_laplacian(&signed_power(u1, m).sub(&signed_power(u2, m)));
    triple.h_inner(&a, &u1.sub(u2))
}

pub(crate) fn random_field(grid: SpatialGrid, rng: &mut rand_chacha::ChaCha8Rng) -> Field {
    let amp = 10f64.powf(rng.random_range(-3.0..2.0));
    if rng.random_bool(0.5) {
        Field::from_fn(grid, |_| amp * rng::standard_normal(rng))
    } else {
        let coeffs: Vec<f64> = (0..4).map(|_| rng::standard_normal(rng)).collect();
        Field::from_fn(grid, |x| {
            amp * coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * ((k + 1) as f64 * std::f64::consts::PI * x).sin())
                .sum::<f64>()
        })
    }
}

/// Largest `⟨Δ_h u₁^{[m]} - Δ_h u₂^{[m]}, u₁ - u₂⟩_{H⁻¹}` over `n_pairs`
/// random pairs; monotonicity makes it nonpositive.
pub fn monotonicity_probe(grid: SpatialGrid, m: f64, n_pairs: usize, seed: u64) -> f64 {
    let triple = TripleKind::Porous { m };
    (0..n_pairs)
        .map(|i| {
            let mut r = rng::stream_rng(seed, i as u64);
            let u1 = random_field(grid, &mut r);
            let u2 = random_field(grid, &mut r);
            a_part_pairing(&u1, &u2, triple)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Tests the structure conditions on `n_pairs` random triples `(u₁, u₂, ξ)`
/// with amplitudes log-uniform in `[1e-3, 1e2]`.
pub fn check_hypotheses(problem: &ProblemSpec, n_pairs: usize, seed: u64) -> Result<HypothesisReport> {
    let c = constants(problem)?;
    let grid = problem.grid();
    let basis = problem.qwiener.basis(grid)?;
    let lambdas = problem.qwiener.eigenvalues();
    let triple = problem.triple();
    let m = problem.m();
    let p = triple.path_exponent();
    let cs = problem.c_sigma;
    let sigma_hs = |u: &Field| hs_norm_sq(&basis, lambdas, triple, |psi| u.hadamard(psi).scale(cs));
    let grad_hs = |xi: &Field| {
        let g = signed_power(xi, 0.5);
        hs_norm_sq(&basis, lambdas, triple, |psi| match problem.gradient_mode {
            GradientMode::Divergence => difference(&g.hadamard(psi)),
            GradientMode::Coefficient => difference(&g).hadamard(psi),
        })
    };
    let mut rows = Vec::with_capacity(n_pairs);
    let (mut need_a, mut need_b, mut need_c) = (0.0_f64, 0.0_f64, 0.0_f64);
    for pair_id in 0..n_pairs {
        let mut r = rng::stream_rng(seed, pair_id as u64);
        let u1 = random_field(grid, &mut r);
        let u2 = if pair_id == 0 { u1.clone() } else { random_field(grid, &mut r) };
        let xi = random_field(grid, &mut r);
        let d = u1.sub(&u2);
        let d_h2 = triple.h_norm(&d).powi(2);

        // (a) local monotonicity
        let a_part = a_part_pairing(&u1, &u2, triple);
        let sigma_diff = match problem.example {
            Example::PorousGradientNoise { .. } => 0.0,
            _ => sigma_hs(&d),
        };
        let lhs_a = 2.0 * a_part + sigma_diff;
        let defect_a = lhs_a - c.c_monotone * d_h2;
        if d_h2 > 0.0 {
            need_a = need_a.max(lhs_a / d_h2);
        }

        // (b) coercivity
        let u_h2 = triple.h_norm(&u1).powi(2);
        let u_v = triple.v_norm(&u1);
        let drift = 2.0 * triple.h_inner(&grid::discrete_laplacian(&signed_power(&u1, m)), &u1);
        let (forcing, sigma_u, gain, f_xi) = match problem.example {
            Example::HeatSqrtDrift => {
                let f = 2.0 * triple.h_inner(&signed_power(&xi, 0.5), &u1);
                (f, sigma_hs(&u1), u_v * u_v, grid::norm(&xi, Norm::Lp(1.0))?)
            }
            Example::PorousSqrtDrift { .. } => {
                let f = 2.0 * triple.h_inner(&signed_power(&xi, 0.5), &u1);
                (f, sigma_hs(&u1), 2.0 * u_v.powf(p), triple.v_norm(&xi).powf(p))
            }
            Example::PorousGradientNoise { .. } => (0.0, grad_hs(&xi), 2.0 * u_v.powf(p), triple.v_norm(&xi).powf(p)),
        };
        let lhs_b = drift + forcing + sigma_u + gain;
        let weight_b = u_h2 + 1.0 + f_xi;
        let margin_b = lhs_b - c.c_coercive * weight_b;
        need_b = need_b.max(lhs_b / weight_b);
        let scale_b = drift.abs() + forcing.abs() + sigma_u + gain + c.c_coercive * weight_b;

        // (c) growth
        let a_u = match problem.example {
            Example::PorousGradientNoise { .. } => grid::discrete_laplacian(&signed_power(&u1, m)),
            _ => grid::discrete_laplacian(&signed_power(&u1, m)).add(&signed_power(&xi, 0.5)),
        };
        let q = p / m;
        let num = triple.vstar_norm(&a_u).powf(q);
        let xi_term = match problem.example {
            Example::HeatSqrtDrift => f_xi,
            _ => triple.v_norm(&xi).powf(p),
        };
        let den = u_v.powf(p) + 1.0 + xi_term;
        let ratio_c = num / (c.c_growth * den);
        need_c = need_c.max(num / den);

        rows.push(HypothesisRow {
            pair_id,
            defect_a,
            margin_b,
            ratio_c,
            a_part,
            scale_a: 2.0 * a_part.abs() + sigma_diff + c.c_monotone * d_h2,
            scale_b,
        });
    }
    Ok(HypothesisReport { constants: c, rows, needed_monotone: need_a, needed_coercive: need_b, needed_growth: need_c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wiener::QWienerSpec;
    use proptest::prelude::*;

    fn problem(example: Example, n: usize) -> ProblemSpec {
        let grid = SpatialGrid::new(n).unwrap();
        ProblemSpec::new(example, 0.1, QWienerSpec::with_trace(8, 0.2, 1.0).unwrap(), Field::zeros(grid)).unwrap()
    }

    #[test]
    fn all_examples_satisfy_structure_conditions() {
        for example in [Example::HeatSqrtDrift, Example::PorousSqrtDrift { m: 2.0 }, Example::PorousGradientNoise { m: 2.0 }] {
            let p = problem(example, 24);
            let rep = check_hypotheses(&p, 120, 5).unwrap();
            assert!(rep.all_pass(), "{example:?}: {:?}", rep.rows.iter().find(|r| r.margin_b > 0.0 || r.defect_a > 0.0 || r.ratio_c > 1.0));
            assert!(rep.needed_coercive <= rep.constants.c_coercive);
            assert!(rep.needed_growth <= rep.constants.c_growth * (1.0 + 1e-12));
            // identical pair: the monotonicity term vanishes
            assert_eq!(rep.rows[0].a_part, 0.0);
            assert_eq!(rep.rows[0].defect_a, 0.0);
        }
        let p = problem(Example::PorousGradientNoise { m: 3.0 }, 16).with_gradient_mode(GradientMode::Coefficient);
        assert!(check_hypotheses(&p, 60, 1).unwrap().all_pass());
    }

    #[test]
    fn porous_pairing_identity() {
        let grid = SpatialGrid::new(20).unwrap();
        let u = Field::from_fn(grid, |x| (3.0 * x).sin() - 0.4);
        for m in [2.0, 3.0] {
            let lhs = TripleKind::Porous { m }.h_inner(&grid::discrete_laplacian(&signed_power(&u, m)), &u);
            let rhs = -grid::norm(&u, Norm::Lp(m + 1.0)).unwrap().powf(m + 1.0);
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs());
        }
    }

    #[test]
    fn heat_coercivity_identity() {
        let grid = SpatialGrid::new(30).unwrap();
        let c = 0.3;
        for seed in 0..10 {
            let u = Field::from_vec(grid, rng::normals(seed, 0, 30));
            let lhs = 2.0 * grid::discrete_laplacian(&u).dot(&u) + grid::norm(&u.scale(c), Norm::L2).unwrap().powi(2);
            let rhs = c * c * grid::norm(&u, Norm::L2).unwrap().powi(2) - 2.0 * grid::norm(&u, Norm::H1).unwrap().powi(2);
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs());
        }
    }

    #[test]
    fn csv_has_one_row_per_pair() {
        let rep = check_hypotheses(&problem(Example::HeatSqrtDrift, 10), 100, 2).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 101);
        assert!(text.starts_with("pair_id,defect_a,margin_b,ratio_c"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn a_part_is_nonpositive(seed in any::<u64>(), m in prop::sample::select(vec![1.0, 2.0, 3.0])) {
            let grid = SpatialGrid::new(16).unwrap();
            let mut r = rng::stream_rng(seed, 0);
            let u1 = random_field(grid, &mut r);
            let u2 = random_field(grid, &mut r);
            let triple = if m == 1.0 { TripleKind::Heat } else { TripleKind::Porous { m } };
            let porous = TripleKind::Porous { m };
            prop_assert!(a_part_pairing(&u1, &u2, triple) <= 1e-10);
            prop_assert!(a_part_pairing(&u1, &u2, porous) <= 1e-10);
        }
    }
}
