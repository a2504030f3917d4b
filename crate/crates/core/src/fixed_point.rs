//! Fixed points of `Proj_n ∘ V`: Picard iteration with pathwise coupled noise,
//! the block-by-block staircase construction, and probes of the continuity
//! and time-regularity estimates of the frozen solution map.

use std::io::Write;

use crate::error::{Error, Result};
use crate::estimators::{linear_fit, mc_mean_stderr, Estimate, LinearFit};
use crate::grid::{Field, Norm, TripleKind};
use crate::haar::{block_average, fmt_f64, fractional_seminorm, proj_shifted, HaarLevel, Trajectory};
use crate::par::Execution;
use crate::solver::{FrozenSolver, SolveStats};
use crate::wiener::NoisePath;

/// `‖w‖^p_𝕏 = Σ_{k<N} dt |w(t_k)|^p_H`, `p` the path exponent of the triple.
pub fn x_norm_pow(traj: &Trajectory, triple: TripleKind) -> f64 {
    traj.lp_norm_pow(triple.path_exponent(), triple.h_norm_kind())
}

pub fn x_norm(traj: &Trajectory, triple: TripleKind) -> f64 {
    x_norm_pow(traj, triple).powf(1.0 / triple.path_exponent())
}

/// The energy functional `Ψ(ξ)`: `∫|ξ|²_H dt` for heat, `∫|ξ|^{m+1}_V dt` for porous.
pub fn energy_functional(traj: &Trajectory, triple: TripleKind) -> f64 {
    match triple {
        TripleKind::Heat => traj.lp_norm_pow(2.0, Norm::L2),
        TripleKind::Porous { .. } => traj.lp_norm_pow(triple.path_exponent(), triple.v_norm_kind()),
    }
}

/// Mean and standard error, with a zero error for a single sample.
pub(crate) fn estimate(samples: &[f64]) -> Result<Estimate> {
    match samples.len() {
        0 => Err(Error::TooFewSamples { needed: 1, got: 0 }),
        1 if samples[0].is_finite() => Ok(Estimate { mean: samples[0], stderr: 0.0 }),
        1 => Err(Error::NonFiniteSample(0)),
        _ => mc_mean_stderr(samples),
    }
}

/// `Proj_n(V(ξ))`.
pub fn apply_composed(solver: &FrozenSolver, level: &HaarLevel, xi: &Trajectory, noise: &NoisePath) -> Result<Trajectory> {
    proj_shifted(&solver.solve(xi, noise)?, level)
}

/// `‖Proj_n(V(w)) - w‖_𝕏`.
pub fn fixed_point_residual(solver: &FrozenSolver, level: &HaarLevel, w: &Trajectory, noise: &NoisePath) -> Result<f64> {
    let image = apply_composed(solver, level, w, noise)?;
    Ok(x_norm(&image.sub(w), solver.problem().triple()))
}

/// The staircase after `stages` steps of the induction
/// `w^{k+1} = w^k` on `[0, t_{k+1})` and `Proj_n(V(w^k))` on `[t_{k+1}, T]`,
/// starting from the constant extension of the level's seed.
pub fn staircase_stage(solver: &FrozenSolver, level: &HaarLevel, noise: &NoisePath, stages: usize) -> Result<Trajectory> {
    let time = noise.time();
    let b = time.block_size(level.n())?;
    let mut w = Trajectory::constant(time, level.seed());
    for k in 0..stages.min(1 << level.n()) {
        let image = apply_composed(solver, level, &w, noise)?;
        let keep = (k + 1) * b;
        for (i, f) in w.fields_mut().iter_mut().enumerate().skip(keep) {
            *f = image.field(i).clone();
        }
    }
    Ok(w)
}

/// The completed staircase `w^{2^n}`, a discrete fixed point of `Proj_n ∘ V`.
///
/// Each block only depends on the solution over the previous block, so the
/// sweep advances a single solve block by block.
pub fn staircase_construct(solver: &FrozenSolver, level: &HaarLevel, noise: &NoisePath) -> Result<Trajectory> {
    staircase_with_stats(solver, level, noise).map(|(w, _)| w)
}

pub fn staircase_with_stats(solver: &FrozenSolver, level: &HaarLevel, noise: &NoisePath) -> Result<(Trajectory, SolveStats)> {
    let time = noise.time();
    let b = time.block_size(level.n())?;
    let mut w = Trajectory::constant(time, level.seed());
    solver.check_inputs(&w, noise)?;
    let mut stats = SolveStats { max_newton_iterations: 0, retried_steps: 0, min_dt: time.dt() };
    let mut v = vec![solver.problem().initial.clone()];
    let blocks = 1usize << level.n();
    for j in 1..=blocks {
        solver.advance(&mut v, &w, noise, j * b, &mut stats)?;
        let avg = block_average(&v, (j - 1) * b, j * b);
        let end = if j == blocks { time.n_steps() + 1 } else { (j + 1) * b };
        for f in &mut w.fields_mut()[j * b..end] {
            *f = avg.clone();
        }
    }
    Ok((w, stats))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixedPointStatus {
    Converged { iterations: usize },
    NonConvergence { iterations: usize },
}

impl FixedPointStatus {
    pub fn converged(&self) -> bool {
        matches!(self, FixedPointStatus::Converged { .. })
    }

    pub fn iterations(&self) -> usize {
        match *self {
            FixedPointStatus::Converged { iterations } | FixedPointStatus::NonConvergence { iterations } => iterations,
        }
    }
}

/// One Picard sweep over the ensemble.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `E‖ξ^{(k+1)} - ξ^{(k)}‖^p_𝕏`.
    pub distance: Estimate,
    /// `E Ψ(ξ^{(k+1)})`.
    pub energy: f64,
    /// `E‖Proj_n(V(ξ^{(k+1)})) - ξ^{(k+1)}‖^p_𝕏`.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct FixedPointDiagnostics {
    pub iterations: Vec<IterationRecord>,
    /// `path_distances[i][k]`: distance of path `i` at iteration `k`.
    pub path_distances: Vec<Vec<f64>>,
    pub residual: Estimate,
    pub energy_functional: Estimate,
    pub r_bound: Option<f64>,
    pub status: FixedPointStatus,
}

impl FixedPointDiagnostics {
    /// Whether `energy_functional <= r_bound`; `None` without a radius.
    pub fn within_radius(&self) -> Option<bool> {
        self.r_bound.map(|r| self.energy_functional.mean <= r)
    }

    /// Rows `iteration, mean_distance, stderr, energy, residual`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iteration,mean_distance,stderr,energy,residual")?;
        for r in &self.iterations {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.iteration,
                fmt_f64(r.distance.mean),
                fmt_f64(r.distance.stderr),
                fmt_f64(r.energy),
                fmt_f64(r.residual)
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PicardOutcome {
    pub iterates: Vec<Trajectory>,
    pub diagnostics: FixedPointDiagnostics,
}

/// Picard iteration `ξ^{(k+1)} = Proj_n(V(ξ^{(k)}))` per noise path, from the
/// constant extension of the initial datum, reusing each path's noise at every
/// iteration. Stops once the mean distance is at most `tol` or after
/// `max_iter` sweeps.
pub fn picard_iterate(
    solver: &FrozenSolver,
    level: &HaarLevel,
    noises: &[NoisePath],
    tol: f64,
    max_iter: usize,
    r_bound: Option<f64>,
    exec: Execution,
) -> Result<PicardOutcome> {
    if noises.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if max_iter == 0 || !(tol >= 0.0) {
        return Err(Error::InvalidParameter("need max_iter >= 1 and tol >= 0".into()));
    }
    let triple = solver.problem().triple();
    let start = &solver.problem().initial;
    let mut current: Vec<Trajectory> = noises.iter().map(|n| Trajectory::constant(n.time(), start)).collect();
    let mut path_distances = vec![Vec::new(); noises.len()];
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut status = FixedPointStatus::NonConvergence { iterations: max_iter };
    for it in 1..=max_iter {
        let next = exec.try_map(noises.len(), |i| apply_composed(solver, level, &current[i], &noises[i]))?;
        let dists: Vec<f64> = next.iter().zip(&current).map(|(a, b)| x_norm_pow(&a.sub(b), triple)).collect();
        let energies: Vec<f64> = next.iter().map(|w| energy_functional(w, triple)).collect();
        for (pd, d) in path_distances.iter_mut().zip(&dists) {
            pd.push(*d);
        }
        let distance = estimate(&dists)?;
        if let Some(prev) = records.last_mut() {
            prev.residual = distance.mean;
        }
        records.push(IterationRecord { iteration: it, distance, energy: estimate(&energies)?.mean, residual: f64::NAN });
        current = next;
        if distance.mean <= tol {
            status = FixedPointStatus::Converged { iterations: it };
            break;
        }
    }
    let residuals = exec.try_map(noises.len(), |i| {
        let image = apply_composed(solver, level, &current[i], &noises[i])?;
        Ok::<_, Error>(x_norm_pow(&image.sub(&current[i]), triple))
    })?;
    let residual = estimate(&residuals)?;
    records.last_mut().expect("at least one sweep").residual = residual.mean;
    let energies: Vec<f64> = current.iter().map(|w| energy_functional(w, triple)).collect();
    let diagnostics = FixedPointDiagnostics {
        iterations: records,
        path_distances,
        residual,
        energy_functional: estimate(&energies)?,
        r_bound,
        status,
    };
    Ok(PicardOutcome { iterates: current, diagnostics })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuityRow {
    pub epsilon: f64,
    /// `‖ξ₁ - ξ₂‖^p_𝕏`.
    pub input_dist: f64,
    /// `E‖V(ξ₁) - V(ξ₂)‖^p_𝕏`.
    pub output_dist: Estimate,
}

#[derive(Clone, Debug)]
pub struct ContinuityReport {
    pub rows: Vec<ContinuityRow>,
    /// Output distance with `ξ₂ = ξ₁`.
    pub control: f64,
    /// Fitted exponent `γ̂` of `output ≈ C · input^γ`.
    pub gamma: f64,
    /// 95% normal half-width of `γ̂`.
    pub half_width: f64,
}

impl ContinuityReport {
    /// Rows `epsilon, input_dist, output_dist`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epsilon,input_dist,output_dist")?;
        for r in &self.rows {
            writeln!(w, "{},{},{}", fmt_f64(r.epsilon), fmt_f64(r.input_dist), fmt_f64(r.output_dist.mean))?;
        }
        Ok(())
    }
}

/// Log-spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// Compares `V(ξ₁)` and `V(ξ₁ + ε·δ)` on shared noise paths and fits the
/// Hölder exponent of the solution map in `𝕏`.
pub fn continuity_probe(
    solver: &FrozenSolver,
    base: &Trajectory,
    perturbation: &Trajectory,
    epsilons: &[f64],
    noises: &[NoisePath],
    exec: Execution,
) -> Result<ContinuityReport> {
    base.same_shape(perturbation)?;
    let triple = solver.problem().triple();
    let reference = exec.try_map(noises.len(), |i| solver.solve(base, &noises[i]))?;
    let control = {
        let again = exec.try_map(noises.len(), |i| solver.solve(base, &noises[i]))?;
        let d: Vec<f64> = again.iter().zip(&reference).map(|(a, b)| x_norm_pow(&a.sub(b), triple)).collect();
        estimate(&d)?.mean
    };
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let xi2 = base.zip_map(perturbation, |a, d| {
            let mut f = a.clone();
            f.axpy(eps, d);
            f
        });
        let input_dist = x_norm_pow(&xi2.sub(base), triple);
        let d = exec.try_map(noises.len(), |i| {
            solver.solve(&xi2, &noises[i]).map(|u| x_norm_pow(&u.sub(&reference[i]), triple))
        })?;
        rows.push(ContinuityRow { epsilon: eps, input_dist, output_dist: estimate(&d)? });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.input_dist > 0.0 && r.output_dist.mean > 0.0)
        .map(|r| (r.input_dist.ln(), r.output_dist.mean.ln()))
        .unzip();
    let fit = linear_fit(&x, &y)?;
    Ok(ContinuityReport { rows, control, gamma: fit.slope, half_width: 1.96 * fit.slope_stderr })
}

/// Norm used for time regularity: V* for heat, H for porous (both `H⁻¹`).
pub fn regularity_norm(triple: TripleKind) -> Norm {
    match triple {
        TripleKind::Heat => Norm::Hminus1,
        TripleKind::Porous { .. } => triple.h_norm_kind(),
    }
}

#[derive(Clone, Debug)]
pub struct TimeRegularityReport {
    pub alphas: Vec<f64>,
    /// `E‖w‖²_{𝕎^α_2}` per α.
    pub seminorms: Vec<Estimate>,
    pub increment_times: Vec<f64>,
    /// `E sup_{s<=t} |w(s) - w(0)|²_H` at each time.
    pub increment_means: Vec<f64>,
    pub increment_fit: LinearFit,
}

/// Fractional Sobolev norms of a solved ensemble and the scaling exponent of
/// its early increments, fitted at the dyadic times `T 2^{-j}` in `fit_levels`.
pub fn time_regularity_probe(
    ensemble: &[Trajectory],
    triple: TripleKind,
    alphas: &[f64],
    fit_levels: std::ops::RangeInclusive<u32>,
    exec: Execution,
) -> Result<TimeRegularityReport> {
    let first = ensemble.first().ok_or(Error::TooFewSamples { needed: 1, got: 0 })?;
    let time = first.time();
    let which = regularity_norm(triple);
    let mut seminorms = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let vals = exec.try_map(ensemble.len(), |i| fractional_seminorm(&ensemble[i], alpha, 2.0, which, exec).map(|s| s * s))?;
        seminorms.push(estimate(&vals)?);
    }
    let mut increment_times = Vec::new();
    let mut increment_means = Vec::new();
    for j in fit_levels.rev() {
        let steps = time.n_steps() >> j;
        if steps == 0 || steps << j != time.n_steps() {
            return Err(Error::InvalidParameter(format!("{} steps do not resolve T/2^{j}", time.n_steps())));
        }
        let sups: Vec<f64> = ensemble
            .iter()
            .map(|w| (1..=steps).map(|k| triple.h_norm(&w.field(k).sub(w.field(0))).powi(2)).fold(0.0, f64::max))
            .collect();
        increment_times.push(time.t(steps));
        increment_means.push(estimate(&sups)?.mean);
    }
    let lx: Vec<f64> = increment_times.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = increment_means.iter().map(|v| v.ln()).collect();
    let increment_fit = linear_fit(&lx, &ly)?;
    Ok(TimeRegularityReport { alphas: alphas.to_vec(), seminorms, increment_times, increment_means, increment_fit })
}

/// `E‖V(ξ)‖²_{𝕎^α_2}` for the same noise observed at successively finer
/// resolutions, `ξ` the constant extension of `xi0`. `factors` coarsen the
/// given fine noise paths; returns `(n_steps, estimate)` per factor.
pub fn seminorm_refinement(
    solver: &FrozenSolver,
    xi0: &Field,
    fine_noises: &[NoisePath],
    factors: &[usize],
    alpha: f64,
    exec: Execution,
) -> Result<Vec<(usize, Estimate)>> {
    let which = regularity_norm(solver.problem().triple());
    let mut out = Vec::with_capacity(factors.len());
    for &factor in factors {
        let vals = exec.try_map(fine_noises.len(), |i| {
            let noise = fine_noises[i].coarsen(factor)?;
            let xi = Trajectory::constant(noise.time(), xi0);
            let u = solver.solve(&xi, &noise)?;
            fractional_seminorm(&u, alpha, 2.0, which, Execution::Sequential).map(|s| s * s)
        })?;
        let steps = fine_noises.first().map_or(0, |n| n.time().n_steps() / factor);
        out.push((steps, estimate(&vals)?));
    }
    Ok(out)
}
