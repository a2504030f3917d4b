//! Built-in verification suites. Each check yields a [`Verdict`] and every
//! suite uses fixed configurations and seeds, so reruns are identical.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{energy_report, linear_fit, mc_mean_stderr, median};
use crate::fixed_point::{
    continuity_probe, fixed_point_residual, log_spaced, picard_iterate, seminorm_refinement, staircase_construct,
    time_regularity_probe, x_norm,
};
use crate::grid::{Field, Norm, SpatialGrid, TripleKind};
use crate::haar::{haar_rate_experiment, proj_shifted, HaarLevel, SeedRule, TimeGrid, Trajectory};
use crate::hypotheses::{check_hypotheses, monotonicity_probe};
use crate::par::Execution;
use crate::rng::{self, path_seed};
use crate::solver::{Example, FrozenSolver, ProblemSpec, SolverConfig};
use crate::wiener::{lc_scalar_bm, proof_a_n, sample_increments, tail_bound_probe, NoisePath, QWienerSpec};

/// Outcome of one check: `value` compared against `bound`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Verdict {
    /// Passes when `value <= bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, pass: value <= bound }
    }

    /// Passes when `value >= bound`.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, pass: value >= bound }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {} value={:.6e} bound={:.6e}", self.name, self.value, self.bound)
    }
}

/// One JSON object per line.
pub fn write_jsonl<W: Write>(verdicts: &[Verdict], mut w: W) -> Result<()> {
    for v in verdicts {
        let line = serde_json::to_string(v).map_err(|e| Error::Malformed(e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Haar,
    Wiener,
    Lc,
    Hypotheses,
    Energy,
    Continuity,
    Regularity,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 8] = ["haar", "wiener", "lc", "hypotheses", "energy", "continuity", "regularity", "all"];
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "haar" => Suite::Haar,
            "wiener" => Suite::Wiener,
            "lc" => Suite::Lc,
            "hypotheses" => Suite::Hypotheses,
            "energy" => Suite::Energy,
            "continuity" => Suite::Continuity,
            "regularity" => Suite::Regularity,
            "all" => Suite::All,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown suite '{other}', expected one of {}",
                    Suite::NAMES.join(", ")
                )))
            }
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Overrides the Monte Carlo path count of every check.
    pub paths: Option<usize>,
    pub exec: Execution,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 20240611, paths: None, exec: Execution::Parallel }
    }
}

impl VerifyOptions {
    fn paths(&self, default: usize) -> usize {
        self.paths.unwrap_or(default)
    }

    fn sub_seed(&self, tag: u64) -> u64 {
        path_seed(self.seed, tag)
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<Vec<Verdict>> {
    let mut out = Vec::new();
    match suite {
        Suite::Wiener => out.extend(wiener_covariance(opts)?),
        Suite::Lc => {
            out.extend(lc_refinement(opts)?);
            out.extend(tail_probes(opts)?);
        }
        Suite::Haar => {
            out.extend(haar_rates(opts)?);
            out.extend(haar_structure(opts)?);
        }
        Suite::Hypotheses => {
            out.extend(monotonicity(opts)?);
            out.extend(structure_conditions(opts)?);
        }
        Suite::Energy => {
            out.extend(energy_inequalities(opts)?);
            out.extend(staircase_fixed_points(opts)?);
        }
        Suite::Continuity => out.extend(continuity_exponents(opts)?),
        Suite::Regularity => {
            out.extend(heat_convergence(opts)?);
            out.extend(time_regularity(opts)?);
        }
        Suite::All => {
            for s in [Suite::Wiener, Suite::Lc, Suite::Haar, Suite::Hypotheses, Suite::Regularity, Suite::Energy, Suite::Continuity] {
                out.extend(run_suite(s, opts)?);
            }
        }
    }
    Ok(out)
}

/// Small-data problem used by the built-in checks: `c_σ = 0.1`, trace-0.2
/// covariance with `λ_i ∝ i^{-2}` on 8 modes, `u₀ = 0.1 sin(πx)`.
pub fn reference_problem(example: Example, n_interior: usize) -> Result<ProblemSpec> {
    let grid = SpatialGrid::new(n_interior)?;
    let u0 = Field::from_fn(grid, |x| 0.1 * (std::f64::consts::PI * x).sin());
    ProblemSpec::new(example, 0.1, QWienerSpec::with_trace(8, 0.2, 1.0)?, u0)
}

const EXAMPLES: [Example; 3] =
    [Example::HeatSqrtDrift, Example::PorousSqrtDrift { m: 2.0 }, Example::PorousGradientNoise { m: 2.0 }];

fn ensemble(problem: &ProblemSpec, time: TimeGrid, count: usize, master: u64) -> Vec<NoisePath> {
    (0..count).map(|i| sample_increments(&problem.qwiener, time, path_seed(master, i as u64))).collect()
}

/// `E⟨W(s),ψ_i⟩⟨W(t),ψ_i⟩ = min(s,t) λ_i` within three standard errors.
pub fn wiener_covariance(opts: &VerifyOptions) -> Result<Vec<Verdict>> {
    let spec = QWienerSpec::power_law(3, 1.0, 1.0)?;
    let time = TimeGrid::new(1.0, 4, None)?;
    let paths = opts.paths(20_000);
    let master = opts.sub_seed(1);
    // cumulative coefficients at t = 0.25, 0.5, 0.75, 1
    let coeffs: Vec<Vec<[f64; 4]>> = opts.exec.map(paths, |p| {
        let noise = sample_increments(&spec, time, path_seed(master, p as u64));
        (0..3)
            .map(|i| {
                let mut acc = 0.0;
                let mut out = [0.0; 4];
                for (k, o) in out.iter_mut().enumerate() {
                    acc += noise.step(k)[i];
                    *o = acc;
                }
                out
            })
            .collect()
    });
    let mut out = Vec::new();
    for i in 0..3 {
        for (s, t) in [(1usize, 2usize), (2, 3), (4, 4)] {
            let prod: Vec<f64> = coeffs.iter().map(|c| c[i][s - 1] * c[i][t - 1]).collect();
            let e = mc_mean_stderr(&prod)?;
            let target = 0.25 * s.min(t) as f64 * spec.eigenvalues()[i];
            out.push(Verdict::at_most(
                format!("wiener.covariance.mode{}.s{:.2}.t{:.2}", i + 1, 0.25 * s as f64, 0.25 * t as f64),
                (e.mean - target).abs(),
                3.0 * e.stderr,
            ));
        }
    }
    Ok(out)
}

/// Dyadic consistency across levels and the decay of `sup |B_{n+4} - B_n|`.
pub fn lc_refinement(opts: &VerifyOptions) -> Result<Vec<Verdict>> {
    let paths = opts.paths(100);
    let master = opts.sub_seed(2);
    let per_path = opts.exec.try_map(paths, |p| -> Result<(f64, f64, f64)> {
        let seed = path_seed(master, p as u64);
        let levels: Vec<_> = (1..=12).map(|n| lc_scalar_bm(n, seed)).collect();
        let mut mismatch = 0.0_f64;
        for pair in levels.windows(2) {
            for (k, v) in pair[0].values().iter().enumerate() {
                mismatch = mismatch.max((pair[1].values()[2 * k] - v).abs());
            }
        }
        let ns: Vec<f64> = (1..=8).map(|n| n as f64).collect();
        let sups: Vec<f64> = (1..=8u32)
            .map(|n| {
                let fine = &levels[(n + 4 - 1) as usize];
                let coarse = &levels[(n - 1) as usize];
                let cells = fine.values().len() - 1;
                fine.values()
                    .iter()
                    .enumerate()
                    .map(|(j, v)| (v - coarse.at(j as f64 / cells as f64)).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        let raw = linear_fit(&ns, &sups.iter().map(|s| s.log2()).collect::<Vec<_>>())?.slope;
        let normalized =
            linear_fit(&ns, &sups.iter().zip(1..=8u32).map(|(s, n)| (s / proof_a_n(n)).log2()).collect::<Vec<_>>())?.slope;
        Ok((mismatch, raw, normalized))
    })?;
    let mismatch = per_path.iter().map(|r| r.0).fold(0.0, f64::max);
    let raw = median(&per_path.iter().map(|r| r.1).collect::<Vec<_>>());
    let normalized = median(&per_path.iter().map(|r| r.2).collect::<Vec<_>>());
    Ok(vec![
        Verdict::at_most("lc.dyadic_consistency", mismatch, 0.0),
        Verdict::at_most("lc.refinement_slope", raw, -0.4),
        Verdict::at_most("lc.envelope_normalized_slope_abs", normalized.abs(), 0.1),
    ])
}

/// Exceedance frequency of the level-`n` coefficients against the closed form.
pub fn tail_probes(opts: &VerifyOptions) -> Result<Vec<Verdict>> {
    let trials = opts.paths(100_000);
    let mut out = Vec::new();
    for n in [4u32, 5] {
        let p = tail_bound_probe(n, proof_a_n(n), 1.0, trials, opts.sub_seed(10 + n as u64), opts.exec)?;
        let ratio = p.empirical / p.analytic_approx;
        let factor = ratio.max(1.0 / ratio);
        out.push(Verdict::at_most(format!("lc.tail.n{n}.factor"), factor, 3.0));
    }
    Ok(out)
}

fn haar_fixture_grid() -> Result<(SpatialGrid, TimeGrid, Field)> {
    let grid = SpatialGrid::new(5)?;
    let time = TimeGrid::new(1.0, 1 << 12, Some(7))?;
    let v = Field::from_fn(grid, |x| x * (1.0 - x));
    Ok((grid, time, v))
}

/// `L²` convergence rate of the projection over levels 2..7.
pub fn haar_rates(opts: &VerifyOptions) -> Result<Vec<Verdict>> {
    let (_, time, v) = haar_fixture_grid()?;
    let smooth = Trajectory::scalar_times(time, |t| (2.0 * std::f64::consts::PI * t).sin(), &v);
    let rep = haar_rate_experiment(&[smooth], 2..=7, 2.0, Norm::L2, SeedRule::InitialValue, opts.exec)?;
    let smooth_slope = rep.median_slope.unwrap_or(f64::NEG_INFINITY);
    let paths = opts.paths(100);
    let master = opts.sub_seed(3);
    let family: Vec<Trajectory> = (0..paths)
        .map(|p| {
            let b = lc_scalar_bm(12, path_seed(master, p as u64));
            Trajectory::scalar_times(time, |t| b.at(t), &v)
        })
        .collect();
    let rep = haar_rate_experiment(&family, 2..=7, 2.0, Norm::L2, SeedRule::InitialValue, opts.exec)?;
    let brownian_slope = rep.median_slope.unwrap_or(f64::NEG_INFINITY);
    Ok(vec![
        Verdict::at_most("haar.rate.smooth", smooth_slope, -(0.9 - 0.1)),
        Verdict::at_most("haar.rate.brownian", brownian_slope, -(0.4 - 0.1)),
    ])
}

fn random_trajectory(time: TimeGrid, grid: SpatialGrid, seed: u64) -> Trajectory {
    let mut r = rng::stream_rng(seed, 0);
    let fields = (0..=time.n_steps()).map(|_| Field::from_fn(grid, |_| r.random_range(-1.0..1.0))).collect();
    Trajectory::new(time, fields).expect("matching lengths")
}

/// Future perturbations leave the projection on `[0, t_{k+1})` untouched, and
/// the zero-seed projection is a contraction.
pub fn haar_structure(opts: &VerifyOptions) -> Result<Vec<Verdict>> {
    let cases = opts.paths(100);
    let master = opts.sub_seed(4);
    let grid = SpatialGrid::new(6)?;
    let outcomes = opts.exec.try_map(cases, |c| -> Result<(bool, bool)> {
        let seed = path_seed(master, c as u64);
        let mut r = rng::stream_rng(seed, 1);
        let n = r.random_range(1..=5u32);
        let per_block = r.random_range(1..=6usize);
        let time = TimeGrid::dyadic(1.0, n, per_block)?;
        let b = time.block_size(n)?;
        let x = random_trajectory(time, grid, seed);
        let k = r.random_range(0..1usize << n);
        let mut y = x.clone();
        for f in &mut y.fields_mut()[k * b + 1..] {
            *f = Field::from_fn(grid, |_| r.random_range(-10.0..10.0));
        }
        let level = HaarLevel::new(n, Field::from_fn(grid, |_| r.random_range(-1.0..1.0)))?;
        let (px, py) = (proj_shifted(&x, &level)?, proj_shifted(&y, &level)?);
        let adapted = px.fields()[..(k + 1) * b] == py.fields()[..(k + 1) * b];
        let zero = HaarLevel::zero_seed(n, grid)?;
        let pz = proj_shifted(&x, &zero)?;
        let contracts = [(2.0, Norm::L2), (3.0, Norm::Hminus1), (1.5, Norm::Lp(3.0))]
            .iter()
            .all(|&(p, which)| pz.lp_norm(p, which) <= x.lp_norm(p, which) * (1.0 + 1e-12));
        Ok((adapted, contracts))
    })?;
    let adapt_fail = outcomes.iter().filter(|o| !o.0).count();
    let contract_fail = outcomes.iter().filter(|o| !o.1).count();
    Ok(vec![
        Verdict::at_most("haar.adaptedness.violations", adapt_fail as f64, 0.0),
        Verdict::at_most("haar.contraction.violations", contract_fail as f64, 0.0),
    ])
}

/// `⟨Δ_h u₁^{[m]} - Δ_h u₂^{[m]}, u₁ - u₂⟩_{H⁻¹} <= 1e-10` on random pairs.
pub fn monotonicity(opts: &VerifyOptions) -> Result<Vec<Verdict>> {
    let grid = SpatialGrid::new(32)?;
    let pairs = opts.paths(1000);
    Ok([1.0, 2.0, 3.0]
        .iter()
        .map(|&m| {
            let worst = monotonicity_probe(grid, m, pairs, opts.sub_seed(20 + m as u64));
            Verdict::at_most(format!("hypotheses.monotone_pairing.m{m}"), worst, 1e-10)
        })
        .collect())
}

/// Local monotonicity, coercivity and growth with discrete constants.
pub fn structure_conditions(opts: &VerifyOptions) -> Result<Vec<Verdict>> {
    let mut out = Vec::new();
    for example in EXAMPLES {
        let p = reference_problem(example, 32)?;
        let rep = check_hypotheses(&p, opts.paths(200).max(100), opts.sub_seed(30))?;
        let name = example.name();
        out.push(Verdict::at_most(format!("hypotheses.{name}.monotonicity_violations"), rep.monotonicity_violations() as f64, 0.0));
        out.push(Verdict::at_most(format!("hypotheses.{name}.coercivity_violations"), rep.coercivity_violations() as f64, 0.0));
        out.push(Verdict::at_most(format!("hypotheses.{name}.growth_violations"), rep.growth_violations() as f64, 0.0));
    }
    Ok(out)
}

/// Noise-free heat against the eigen recursion, and first order in time with
/// drift against a `dt/16` self-oracle.
pub fn heat_convergence(_opts: &VerifyOptions) -> Result<Vec<Verdict>> {
    use std::f64::consts::PI;
    let grid = SpatialGrid::new(31)?;
    let u0 = Field::from_fn(grid, |x| (PI * x).sin() + 0.3 * (3.0 * PI * x).sin());
    let problem = ProblemSpec::new(Example::HeatSqrtDrift, 0.1, QWienerSpec::with_trace(4, 0.2, 1.0)?, u0)?;
    let solver = FrozenSolver::new(problem, SolverConfig::default())?;
    let time = TimeGrid::new(0.5, 200, None)?;
    let u = solver.solve(&Trajectory::zeros(time, grid), &NoisePath::zeros(time, 4))?;
    let mut eigen_err = 0.0_f64;
    for k in 0..=time.n_steps() {
        let decay = |j: usize| (1.0 + time.dt() * grid.neg_laplacian_eigenvalue(j)).powi(-(k as i32)) / 2f64.sqrt();
        let oracle = grid.sine_mode(1).scale(decay(1)).add(&grid.sine_mode(3).scale(0.3 * decay(3)));
        eigen_err = eigen_err.max(u.field(k).sub(&oracle).max_abs());
    }
    let smooth = ProblemSpec::new(Example::HeatSqrtDrift, 0.1, QWienerSpec::with_trace(4, 0.2, 1.0)?, Field::from_fn(grid, |x| (PI * x).sin()))?;
    let solver = FrozenSolver::new(smooth, SolverConfig::default())?;
    let drift_error = |steps: usize| -> Result<f64> {
        let xi_fn = |t: f64, x: f64| (1.0 + t) * (PI * x).sin();
        let solve = |n: usize| -> Result<Trajectory> {
            let time = TimeGrid::new(0.5, n, None)?;
            solver.solve(&Trajectory::from_fn(time, grid, xi_fn), &NoisePath::zeros(time, 4))
        };
        let (coarse, fine) = (solve(steps)?, solve(16 * steps)?);
        Ok((0..=steps)
            .map(|k| TripleKind::Heat.h_norm(&coarse.field(k).sub(fine.field(16 * k))))
            .fold(0.0, f64::max))
    };
    let order = (drift_error(16)? / drift_error(32)?).log2();
    Ok(vec![
        Verdict::at_most("regularity.heat.eigen_recursion_error", eigen_err, 1e-10),
        Verdict::at_least("regularity.heat.drift_order", order, 0.9),
    ])
}

/// Refinement stability of the fractional norm below the critical exponent
/// and the scaling of early increments.
pub fn time_regularity(opts: &VerifyOptions) -> Result<Vec<Verdict>> {
    let paths = opts.paths(16);
    let mut out = Vec::new();
    for (example, alpha, target) in [(Example::HeatSqrtDrift, 0.2, 0.5), (Example::PorousSqrtDrift { m: 2.0 }, 0.25, 2.0 / 3.0)] {
        let p = reference_problem(example, 32)?;
        let solver = FrozenSolver::new(p.clone(), SolverConfig::default())?;
        let fine = TimeGrid::new(1.0, 1 << 11, None)?;
        let noises = ensemble(&p, fine, paths, opts.sub_seed(40));
        let table = seminorm_refinement(&solver, &p.initial, &noises, &[8, 4, 2, 1], alpha, opts.exec)?;
        let worst = table.windows(2).map(|w| w[1].1.mean / w[0].1.mean).fold(0.0, f64::max);
        let name = example.name();
        out.push(Verdict::at_most(format!("regularity.{name}.refinement_ratio.alpha{alpha}"), worst, 1.5));
        let solved = opts.exec.try_map(noises.len(), |i| solver.solve(&Trajectory::constant(fine, &p.initial), &noises[i]))?;
        let rep = time_regularity_probe(&solved, p.triple(), &[alpha], 3..=8, Execution::Sequential)?;
        out.push(Verdict::at_least(format!("regularity.{name}.increment_exponent"), rep.increment_fit.slope, target - 0.15));
    }
    Ok(out)
}

/// Calibration/hold-out test of the energy inequality, plus the invariance
/// radius check on Picard iterates.
pub fn energy_inequalities(opts: &VerifyOptions) -> Result<Vec<Verdict>> {
    let mut out = Vec::new();
    for example in EXAMPLES {
        let p = reference_problem(example, 32)?;
        let solver = FrozenSolver::new(p.clone(), SolverConfig::default())?;
        let time = TimeGrid::dyadic(1.0, 3, 8)?;
        let level = HaarLevel::new(3, p.initial.clone())?;
        let rep = energy_report(&solver, &level, time, opts.paths(128).max(16), opts.sub_seed(50), opts.exec)?;
        let name = example.name();
        out.push(Verdict {
            name: format!("energy.{name}.holdout_lhs_minus_rhs"),
            value: rep.holdout_lhs.mean - rep.bound_rhs,
            bound: 0.0,
            pass: rep.pass(),
        });
        let radius = rep.bound.invariance_radius(rep.c_hat);
        let noises = ensemble(&p, time, 16, opts.sub_seed(51));
        let pic = picard_iterate(&solver, &level, &noises, 0.0, 10, radius, opts.exec)?;
        out.push(Verdict::at_most(
            format!("energy.{name}.picard_energy_vs_radius"),
            pic.diagnostics.energy_functional.mean,
            radius.unwrap_or(f64::NAN),
        ));
    }
    Ok(out)
}

/// Staircase residual on every example and agreement with the Picard limit
/// for heat.
pub fn staircase_fixed_points(opts: &VerifyOptions) -> Result<Vec<Verdict>> {
    let paths = opts.paths(16);
    let mut out = Vec::new();
    for example in EXAMPLES {
        let p = reference_problem(example, 32)?;
        let solver = FrozenSolver::new(p.clone(), SolverConfig::default())?;
        let tol = solver.config().newton_tol;
        let time = TimeGrid::dyadic(1.0, 3, 8)?;
        let level = HaarLevel::new(3, p.initial.clone())?;
        let noises = ensemble(&p, time, paths, opts.sub_seed(60));
        let ratios = opts.exec.try_map(paths, |i| -> Result<(f64, Trajectory)> {
            let w = staircase_construct(&solver, &level, &noises[i])?;
            let r = fixed_point_residual(&solver, &level, &w, &noises[i])?;
            Ok((r / (10.0 * tol * (1.0 + x_norm(&w, p.triple()))), w))
        })?;
        let worst = ratios.iter().map(|r| r.0).fold(0.0, f64::max);
        out.push(Verdict::at_most(format!("fixed_point.{}.staircase_residual_ratio", example.name()), worst, 1.0));
        if example == Example::HeatSqrtDrift {
            let pic = picard_iterate(&solver, &level, &noises, 0.0, 20, None, opts.exec)?;
            let gap = pic
                .iterates
                .iter()
                .zip(&ratios)
                .map(|(a, (_, w))| x_norm(&a.sub(w), p.triple()) / (10.0 * tol * (1.0 + x_norm(w, p.triple()))))
                .fold(0.0, f64::max);
            out.push(Verdict::at_most("fixed_point.heat.picard_staircase_gap_ratio", gap, 1.0));
        }
    }
    Ok(out)
}

/// Fitted Hölder exponent of the solution map against the guaranteed one.
pub fn continuity_exponents(opts: &VerifyOptions) -> Result<Vec<Verdict>> {
    let paths = opts.paths(64);
    let mut out = Vec::new();
    for example in EXAMPLES {
        let p = reference_problem(example, 32)?;
        let solver = FrozenSolver::new(p.clone(), SolverConfig::default())?;
        let time = TimeGrid::new(1.0, 64, None)?;
        let grid = p.grid();
        let base = Trajectory::constant(time, &p.initial);
        let mut r = rng::stream_rng(opts.sub_seed(70), 0);
        let c: Vec<f64> = (0..3).map(|_| r.random_range(0.5..1.5)).collect();
        let pert = Trajectory::from_fn(time, grid, |t, x| {
            (1.0 + t) * (c[0] * (std::f64::consts::PI * x).sin() + c[1] * x * (1.0 - x) + c[2] * (2.0 * x).cos().powi(2)) * 0.1
        });
        let noises = ensemble(&p, time, paths, opts.sub_seed(71));
        let rep = continuity_probe(&solver, &base, &pert, &log_spaced(1e-4, 1.0, 9), &noises, opts.exec)?;
        let target = match example {
            Example::HeatSqrtDrift => 0.5,
            _ => 1.0 / (p.m() + 1.0),
        };
        let name = example.name();
        out.push(Verdict::at_most(format!("continuity.{name}.control_distance"), rep.control, 0.0));
        out.push(Verdict::at_least(format!("continuity.{name}.gamma"), rep.gamma, target - 0.1));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_roundtrip() {
        for name in Suite::NAMES {
            assert!(name.parse::<Suite>().is_ok());
        }
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn verdict_json_lines() {
        let v = vec![Verdict::at_most("a", 1.0, 2.0), Verdict::at_least("b", 1.0, 2.0)];
        let mut buf = Vec::new();
        write_jsonl(&v, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], r#"{"name":"a","value":1.0,"bound":2.0,"pass":true}"#);
        assert!(lines[1].ends_with(r#""pass":false}"#));
    }

    #[test]
    fn small_suites_pass() {
        let opts = VerifyOptions { paths: Some(40), ..Default::default() };
        for v in haar_structure(&opts).unwrap().into_iter().chain(monotonicity(&opts).unwrap()) {
            assert!(v.pass, "{v}");
        }
        for v in heat_convergence(&opts).unwrap() {
            assert!(v.pass, "{v}");
        }
    }
}
