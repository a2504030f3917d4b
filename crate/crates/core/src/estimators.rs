//! Monte Carlo estimators and small regression helpers.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fixed_point::{energy_functional, estimate, staircase_construct};
use crate::grid::TripleKind;
use crate::haar::{fmt_f64, HaarLevel, TimeGrid, Trajectory};
use crate::par::Execution;
use crate::rng::path_seed;
use crate::solver::{Example, FrozenSolver};
use crate::wiener::sample_increments;

/// Sample mean and its standard error `s / sqrt(M)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

pub fn mc_mean_stderr(samples: &[f64]) -> Result<Estimate> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples.len() });
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSample(i));
    }
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    Ok(Estimate { mean, stderr: (var / m).sqrt() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (zero for two points or a perfect fit).
    pub slope_stderr: f64,
}

/// Ordinary least squares `y ≈ intercept + slope x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::DegenerateFit(format!("{} abscissae for {} ordinates", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::DegenerateFit(format!("need 2 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("non-finite point".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if x.len() > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LinearFit { slope, intercept, slope_stderr })
}

/// Median of a non-empty slice (mean of the two middle values for even length).
pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// `max_k |w(t_k)|²_H`.
pub fn pathwise_sup_h(traj: &Trajectory, triple: TripleKind) -> f64 {
    traj.fields().iter().map(|f| triple.h_norm(f).powi(2)).fold(0.0, f64::max)
}

/// `Σ_{k<N} dt |w(t_k)|^p_V`, `p` the path exponent of the triple.
pub fn integral_v(traj: &Trajectory, triple: TripleKind) -> f64 {
    traj.lp_norm_pow(triple.path_exponent(), triple.v_norm_kind())
}

/// `Σ_{k<N} dt |w(t_k)|^p_H`.
pub fn integral_h(traj: &Trajectory, triple: TripleKind) -> f64 {
    traj.lp_norm_pow(triple.path_exponent(), triple.h_norm_kind())
}

/// Right-hand side of the energy inequality for one example.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBound {
    /// `2 E|u₀|²_H`.
    pub initial: f64,
    /// Power of `R`: 1/2 for heat, 1/(m+1) for porous.
    pub power: f64,
    pub horizon: f64,
    /// Whether the bound carries the `C T` term and the factor `e^{CT}`.
    pub exponential: bool,
}

impl EnergyBound {
    pub fn for_example(example: Example, u0_h_sq: f64, horizon: f64) -> Self {
        let (power, exponential) = match example {
            Example::HeatSqrtDrift => (0.5, true),
            Example::PorousSqrtDrift { m } => (1.0 / (m + 1.0), true),
            Example::PorousGradientNoise { m } => (1.0 / (m + 1.0), false),
        };
        Self { initial: 2.0 * u0_h_sq, power, horizon, exponential }
    }

    /// `(2E|u₀|² + C R^pow + C T) e^{CT}`, or `2E|u₀|² + C R^pow`.
    pub fn eval(&self, c: f64, r: f64) -> f64 {
        let rp = r.max(0.0).powf(self.power);
        if self.exponential {
            (self.initial + c * rp + c * self.horizon) * (c * self.horizon).exp()
        } else {
            self.initial + c * rp
        }
    }

    /// Smallest `C >= 0` with `eval(C, r) >= target`; `None` if no finite one exists.
    pub fn smallest_constant(&self, target: f64, r: f64) -> Option<f64> {
        if self.eval(0.0, r) >= target {
            return Some(0.0);
        }
        let mut hi = 1.0;
        while self.eval(hi, r) < target {
            hi *= 2.0;
            if hi > 1e12 {
                return None;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid, r) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    /// Smallest `R > 0` with `eval(c, R) <= R`, the radius of an invariant ball.
    pub fn invariance_radius(&self, c: f64) -> Option<f64> {
        let g = |r: f64| self.eval(c, r) - r;
        let mut hi = 1.0_f64;
        while g(hi) > 0.0 {
            hi *= 2.0;
            if hi > 1e300 {
                return None;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(hi)
    }
}

/// Monte Carlo check of the energy inequality on the staircase fixed points:
/// a constant is calibrated on one half of the paths and the bound is then
/// tested on the other half.
#[derive(Clone, Debug)]
pub struct EnergyReport {
    /// `E sup_t |u(t)|²_H` on the hold-out set.
    pub sup_h_sq: Estimate,
    /// `E ∫ |u|^p_V dt` on the hold-out set.
    pub int_v_m: Estimate,
    /// `E[sup_t |u|²_H + 4 ∫ |u|^p_V dt]` on the calibration set.
    pub calibration_lhs: Estimate,
    /// The same on the hold-out set.
    pub holdout_lhs: Estimate,
    /// `R = E Ψ(ξ)` on the calibration and hold-out sets.
    pub calibration_r: f64,
    pub holdout_r: f64,
    pub bound: EnergyBound,
    /// Smallest constant covering the calibration mean plus three standard errors.
    pub c_hat: f64,
    /// Bound evaluated at `c_hat` and the hold-out `R`.
    pub bound_rhs: f64,
    pub n_paths: usize,
    pub seed_base: u64,
    pub failures: usize,
}

impl EnergyReport {
    /// Fewer than 5% failed solves.
    pub fn valid(&self) -> bool {
        20 * self.failures <= self.n_paths
    }

    pub fn pass(&self) -> bool {
        self.valid() && self.holdout_lhs.mean <= self.bound_rhs
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n_paths,seed_base,failures,sup_h_sq,sup_h_sq_stderr,int_v_m,int_v_m_stderr,holdout_lhs,c_hat,power,bound_rhs,pass")?;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n_paths,
            self.seed_base,
            self.failures,
            fmt_f64(self.sup_h_sq.mean),
            fmt_f64(self.sup_h_sq.stderr),
            fmt_f64(self.int_v_m.mean),
            fmt_f64(self.int_v_m.stderr),
            fmt_f64(self.holdout_lhs.mean),
            fmt_f64(self.c_hat),
            fmt_f64(self.bound.power),
            fmt_f64(self.bound_rhs),
            self.pass()
        )?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "energy inequality: hold-out LHS {:.6e} (stderr {:.2e}) vs RHS {:.6e} with C = {:.6e}, R = {:.6e}, power {:.4}: {}\n\
             calibration LHS {:.6e} (stderr {:.2e}), R = {:.6e}; {} paths, {} failed\n",
            self.holdout_lhs.mean,
            self.holdout_lhs.stderr,
            self.bound_rhs,
            self.c_hat,
            self.holdout_r,
            self.bound.power,
            if self.pass() { "PASS" } else { "FAIL" },
            self.calibration_lhs.mean,
            self.calibration_lhs.stderr,
            self.calibration_r,
            self.n_paths,
            self.failures
        )
    }
}

/// Runs `n_paths` staircase solves (first half calibration, second half
/// hold-out) with path seeds derived from `seed_base`.
pub fn energy_report(
    solver: &FrozenSolver,
    level: &HaarLevel,
    time: TimeGrid,
    n_paths: usize,
    seed_base: u64,
    exec: Execution,
) -> Result<EnergyReport> {
    if n_paths < 16 {
        return Err(Error::TooFewSamples { needed: 16, got: n_paths });
    }
    let problem = solver.problem();
    let triple = problem.triple();
    let p = triple.path_exponent();
    let runs = exec.map(n_paths, |i| -> Result<(f64, f64, f64)> {
        let noise = sample_increments(&problem.qwiener, time, path_seed(seed_base, i as u64));
        let w = staircase_construct(solver, level, &noise)?;
        let u = solver.solve(&w, &noise)?;
        Ok((pathwise_sup_h(&u, triple), u.lp_norm_pow(p, triple.v_norm_kind()), energy_functional(&w, triple)))
    });
    let half = n_paths / 2;
    let mut failures = 0;
    let mut cal = Vec::new();
    let mut hold = Vec::new();
    for (i, r) in runs.into_iter().enumerate() {
        match r {
            Ok(v) if i < half => cal.push(v),
            Ok(v) => hold.push(v),
            Err(Error::NewtonDivergence { .. }) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    let lhs = |v: &[(f64, f64, f64)]| estimate(&v.iter().map(|(s, i, _)| s + 4.0 * i).collect::<Vec<_>>());
    let mean_r = |v: &[(f64, f64, f64)]| v.iter().map(|x| x.2).sum::<f64>() / v.len().max(1) as f64;
    let calibration_lhs = lhs(&cal)?;
    let holdout_lhs = lhs(&hold)?;
    let bound = EnergyBound::for_example(problem.example, triple.h_norm(&problem.initial).powi(2), time.horizon());
    let calibration_r = mean_r(&cal);
    let holdout_r = mean_r(&hold);
    let c_hat = bound
        .smallest_constant(calibration_lhs.mean + 3.0 * calibration_lhs.stderr, calibration_r)
        .ok_or_else(|| Error::DegenerateFit("no finite constant covers the calibration set".into()))?;
    Ok(EnergyReport {
        sup_h_sq: estimate(&hold.iter().map(|x| x.0).collect::<Vec<_>>())?,
        int_v_m: estimate(&hold.iter().map(|x| x.1).collect::<Vec<_>>())?,
        calibration_lhs,
        holdout_lhs,
        calibration_r,
        holdout_r,
        bound,
        c_hat,
        bound_rhs: bound.eval(c_hat, holdout_r),
        n_paths,
        seed_base,
        failures,
    })
}
