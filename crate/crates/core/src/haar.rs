//! Time grids, trajectories and the shifted Haar projection.
//!
//! `proj_shifted` maps a trajectory to a piecewise constant one on the dyadic
//! blocks `[t_k, t_{k+1})`, `t_k = k T 2^{-n}`: block 0 carries a seed field and
//! block `k >= 1` carries the average of the input over block `k - 1`. The
//! output on a block therefore only depends on the past.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimators::{linear_fit, median};
use crate::grid::{self, embed, embedded_distance, Field, Norm, SpatialGrid};
use crate::par::Execution;

/// Uniform mesh `t_k = k dt` on `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
    dyadic_level: Option<u32>,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize, dyadic_level: Option<u32>) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!("horizon {horizon} must be positive")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter("n_steps must be positive".into()));
        }
        let g = Self { horizon, n_steps, dyadic_level };
        if let Some(n) = dyadic_level {
            g.block_size(n)?;
        }
        Ok(g)
    }

    /// `2^level * steps_per_block` steps on `[0, horizon]`.
    pub fn dyadic(horizon: f64, level: u32, steps_per_block: usize) -> Result<Self> {
        Self::new(horizon, steps_per_block << level, Some(level))
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dyadic_level(&self) -> Option<u32> {
        self.dyadic_level
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.n_steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.t(k)).collect()
    }

    /// Fine steps per dyadic block of level `n`.
    pub fn block_size(&self, n: u32) -> Result<usize> {
        let blocks = 1usize.checked_shl(n).filter(|&b| b > 0 && b <= self.n_steps);
        match blocks {
            Some(b) if self.n_steps % b == 0 => Ok(self.n_steps / b),
            _ => Err(Error::IncompatibleGrids(format!(
                "2^{n} does not divide n_steps = {}",
                self.n_steps
            ))),
        }
    }

    /// The same horizon with `n_steps / factor` steps.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.n_steps % factor != 0 {
            return Err(Error::IncompatibleGrids(format!(
                "cannot coarsen {} steps by {factor}",
                self.n_steps
            )));
        }
        let coarse = self.n_steps / factor;
        let level = self.dyadic_level.filter(|&n| coarse % (1usize << n) == 0);
        Self::new(self.horizon, coarse, level)
    }

    pub fn with_dyadic_level(&self, n: u32) -> Result<Self> {
        Self::new(self.horizon, self.n_steps, Some(n))
    }
}

/// Fields `u(t_0), ..., u(t_N)` on a shared spatial grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    time: TimeGrid,
    fields: Vec<Field>,
}

impl Trajectory {
    pub fn new(time: TimeGrid, fields: Vec<Field>) -> Result<Self> {
        if fields.len() != time.n_steps + 1 {
            return Err(Error::IncompatibleGrids(format!(
                "{} fields for {} steps",
                fields.len(),
                time.n_steps
            )));
        }
        for f in &fields[1..] {
            fields[0].same_grid(f)?;
        }
        Ok(Self { time, fields })
    }

    pub fn constant(time: TimeGrid, value: &Field) -> Self {
        Self { time, fields: vec![value.clone(); time.n_steps + 1] }
    }

    pub fn zeros(time: TimeGrid, grid: SpatialGrid) -> Self {
        Self::constant(time, &Field::zeros(grid))
    }

    /// `u(t_k, x_j) = f(t_k, x_j)`.
    pub fn from_fn(time: TimeGrid, grid: SpatialGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let fields = time.times().into_iter().map(|t| Field::from_fn(grid, |x| f(t, x))).collect();
        Self { time, fields }
    }

    /// `u(t_k) = a(t_k) v`.
    pub fn scalar_times(time: TimeGrid, a: impl Fn(f64) -> f64, v: &Field) -> Self {
        let fields = time.times().into_iter().map(|t| v.scale(a(t))).collect();
        Self { time, fields }
    }

    pub fn time(&self) -> TimeGrid {
        self.time
    }

    pub fn grid(&self) -> SpatialGrid {
        self.fields[0].grid()
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn fields_mut(&mut self) -> &mut [Field] {
        &mut self.fields
    }

    pub fn field(&self, k: usize) -> &Field {
        &self.fields[k]
    }

    pub fn into_fields(self) -> Vec<Field> {
        self.fields
    }

    pub fn is_finite(&self) -> bool {
        self.fields.iter().all(Field::is_finite)
    }

    pub fn same_shape(&self, other: &Trajectory) -> Result<()> {
        if self.time != other.time {
            return Err(Error::IncompatibleGrids("time grids differ".into()));
        }
        self.fields[0].same_grid(&other.fields[0])
    }

    pub fn map(&self, f: impl Fn(&Field) -> Field) -> Trajectory {
        Trajectory { time: self.time, fields: self.fields.iter().map(f).collect() }
    }

    pub fn zip_map(&self, other: &Trajectory, f: impl Fn(&Field, &Field) -> Field) -> Trajectory {
        debug_assert_eq!(self.time, other.time);
        Trajectory {
            time: self.time,
            fields: self.fields.iter().zip(&other.fields).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn add(&self, other: &Trajectory) -> Trajectory {
        self.zip_map(other, Field::add)
    }

    pub fn sub(&self, other: &Trajectory) -> Trajectory {
        self.zip_map(other, Field::sub)
    }

    pub fn scale(&self, c: f64) -> Trajectory {
        self.map(|f| f.scale(c))
    }

    /// `(Σ_{k<N} dt |u(t_k)|^p)^{1/p}`, the left-point discretisation of
    /// `L^p(0,T; norm)`.
    pub fn lp_norm(&self, p: f64, which: Norm) -> f64 {
        self.lp_norm_pow(p, which).powf(1.0 / p)
    }

    /// `Σ_{k<N} dt |u(t_k)|^p`.
    pub fn lp_norm_pow(&self, p: f64, which: Norm) -> f64 {
        let dt = self.time.dt();
        self.fields[..self.time.n_steps]
            .iter()
            .map(|f| grid::norm(f, which).expect("valid norm").powf(p) * dt)
            .sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.grid().n_interior();
        write!(w, "t")?;
        for j in 1..=n {
            write!(w, ",u{j}")?;
        }
        writeln!(w)?;
        for (k, f) in self.fields.iter().enumerate() {
            write!(w, "{}", fmt_f64(self.time.t(k)))?;
            for v in f.values() {
                write!(w, ",{}", fmt_f64(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Malformed("empty trajectory CSV".into()))??;
        let n = header.split(',').count() - 1;
        let grid = SpatialGrid::new(n)?;
        let mut times = Vec::new();
        let mut fields = Vec::new();
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Malformed(format!("row {row}: {e}")))?;
            if vals.len() != n + 1 {
                return Err(Error::Malformed(format!("row {row} has {} columns", vals.len())));
            }
            times.push(vals[0]);
            fields.push(Field::new(grid, vals[1..].to_vec())?);
        }
        if times.len() < 2 || times[0] != 0.0 {
            return Err(Error::Malformed("trajectory must start at t = 0 with >= 2 rows".into()));
        }
        let time = TimeGrid::new(*times.last().unwrap(), times.len() - 1, None)?;
        Trajectory::new(time, fields)
    }
}

/// Seventeen significant digits, locale independent.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Dyadic depth together with the field used on the first block.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarLevel {
    n: u32,
    seed: Field,
}

impl HaarLevel {
    pub fn new(n: u32, seed: Field) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter("Haar level must be at least 1".into()));
        }
        Ok(Self { n, seed })
    }

    /// Seed `(I - 2^{-n} Δ_h)^{-1} u0`.
    pub fn smoothed(n: u32, u0: &Field) -> Result<Self> {
        let c = (-(n as f64)).exp2();
        Self::new(n, grid::solve_shifted_laplacian(c, u0))
    }

    pub fn zero_seed(n: u32, grid: SpatialGrid) -> Result<Self> {
        Self::new(n, Field::zeros(grid))
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn seed(&self) -> &Field {
        &self.seed
    }
}

/// Trapezoid average of `fields[a..=b]`, accumulated as offsets from
/// `fields[a]` so that constant stretches average exactly.
pub(crate) fn block_average(fields: &[Field], a: usize, b: usize) -> Field {
    let base = &fields[a];
    let len = (b - a) as f64;
    let mut acc = Field::zeros(base.grid());
    for f in &fields[a + 1..b] {
        acc.axpy(1.0, &f.sub(base));
    }
    acc.axpy(0.5, &fields[b].sub(base));
    let mut out = base.clone();
    out.axpy(1.0 / len, &acc);
    out
}

/// Shifted Haar projection of level `level.n()`.
///
/// The final node `t_N = T` is assigned the average of the last block, i.e.
/// the value the next block would carry.
pub fn proj_shifted(traj: &Trajectory, level: &HaarLevel) -> Result<Trajectory> {
    let time = traj.time;
    let b = time.block_size(level.n)?;
    traj.fields[0].same_grid(&level.seed)?;
    let blocks = 1usize << level.n;
    let mut out = Vec::with_capacity(time.n_steps + 1);
    for _ in 0..b {
        out.push(level.seed.clone());
    }
    for j in 1..=blocks {
        let avg = block_average(&traj.fields, (j - 1) * b, j * b);
        let reps = if j == blocks { 1 } else { b };
        for _ in 0..reps {
            out.push(avg.clone());
        }
    }
    Trajectory::new(time, out)
}

/// Discrete `𝕎^α_p(0,T; norm)` norm of a trajectory:
/// `(Σ_{i≠j} dt² |u_i - u_j|^p / |t_i - t_j|^{1+αp} + Σ_i dt |u_i|^p)^{1/p}`
/// over the left nodes `t_0, ..., t_{N-1}`.
pub fn fractional_seminorm(traj: &Trajectory, alpha: f64, p: f64, which: Norm, exec: Execution) -> Result<f64> {
    let parts = fractional_parts(traj, alpha, p, which, exec)?;
    Ok((parts.0 + parts.1).powf(1.0 / p))
}

/// `(double sum, L^p term)` of [`fractional_seminorm`] before the root.
pub fn fractional_parts(
    traj: &Trajectory,
    alpha: f64,
    p: f64,
    which: Norm,
    exec: Execution,
) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} not in (0,1)")));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} < 1")));
    }
    let n = traj.time.n_steps;
    let dt = traj.time.dt();
    let q = which.embedding_exponent();
    let emb: Vec<Vec<f64>> = traj.fields[..n].iter().map(|f| embed(f, which)).collect();
    let zero = vec![0.0; emb[0].len()];
    let lp: f64 = emb.iter().map(|e| dt * embedded_distance(e, &zero, q).powf(p)).sum();
    // weights depend on the lag only
    let weights: Vec<f64> =
        (0..n).map(|l| if l == 0 { 0.0 } else { dt * dt / (l as f64 * dt).powf(1.0 + alpha * p) }).collect();
    let rows = exec.map(n, |i| {
        let mut s = 0.0;
        for j in i + 1..n {
            s += weights[j - i] * embedded_distance(&emb[i], &emb[j], q).powf(p);
        }
        s
    });
    Ok((2.0 * rows.iter().sum::<f64>(), lp))
}

/// How the first-block seed is chosen in [`haar_rate_experiment`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeedRule {
    Zero,
    /// The trajectory's own value at `t = 0`.
    InitialValue,
    /// `(I - 2^{-n} Δ_h)^{-1}` applied to the value at `t = 0`.
    Smoothed,
}

impl SeedRule {
    pub fn level(&self, n: u32, traj: &Trajectory) -> Result<HaarLevel> {
        match self {
            SeedRule::Zero => HaarLevel::zero_seed(n, traj.grid()),
            SeedRule::InitialValue => HaarLevel::new(n, traj.field(0).clone()),
            SeedRule::Smoothed => HaarLevel::smoothed(n, traj.field(0)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RateReport {
    pub levels: Vec<u32>,
    /// `errors[i][l]`: `‖proj_n(x_i) - x_i‖_{L^p}` at `levels[l]`.
    pub errors: Vec<Vec<f64>>,
    /// Per-trajectory least-squares slope of `log2 error` against `n`;
    /// `None` when every error is exactly zero.
    pub slopes: Vec<Option<f64>>,
    pub median_slope: Option<f64>,
}

impl RateReport {
    pub fn is_exact(&self) -> bool {
        self.errors.iter().all(|e| e.iter().all(|&v| v == 0.0))
    }
}

/// Convergence rate of `proj_n(x) → x` in `L^p(0,T; norm)` over `levels`.
pub fn haar_rate_experiment(
    family: &[Trajectory],
    levels: std::ops::RangeInclusive<u32>,
    p: f64,
    which: Norm,
    seed: SeedRule,
    exec: Execution,
) -> Result<RateReport> {
    let levels: Vec<u32> = levels.collect();
    if levels.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 levels, got {}", levels.len())));
    }
    let per_traj = exec.try_map(family.len(), |i| -> Result<(Vec<f64>, Option<f64>)> {
        let x = &family[i];
        let errs = levels
            .iter()
            .map(|&n| {
                let lvl = seed.level(n, x)?;
                Ok(proj_shifted(x, &lvl)?.sub(x).lp_norm(p, which))
            })
            .collect::<Result<Vec<f64>>>()?;
        let slope = if errs.iter().all(|&e| e == 0.0) {
            None
        } else if errs.iter().any(|&e| e == 0.0) {
            return Err(Error::DegenerateFit("zero error at some but not all levels".into()));
        } else {
            let xs: Vec<f64> = levels.iter().map(|&n| n as f64).collect();
            let ys: Vec<f64> = errs.iter().map(|e| e.log2()).collect();
            Some(linear_fit(&xs, &ys)?.slope)
        };
        Ok((errs, slope))
    })?;
    let (errors, slopes): (Vec<_>, Vec<_>) = per_traj.into_iter().unzip();
    let finite: Vec<f64> = slopes.iter().flatten().copied().collect();
    let median_slope = if finite.is_empty() { None } else { Some(median(&finite)) };
    Ok(RateReport { levels, errors, slopes, median_slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_traj(time: TimeGrid, grid: SpatialGrid, seed: u64) -> Trajectory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fields = (0..=time.n_steps())
            .map(|_| Field::from_fn(grid, |_| rng.random_range(-1.0..1.0)))
            .collect();
        Trajectory::new(time, fields).unwrap()
    }

    fn assert_piecewise_constant(out: &Trajectory, n: u32) {
        let b = out.time().block_size(n).unwrap();
        for blk in 0..(1usize << n) {
            for k in blk * b..(blk + 1) * b {
                assert_eq!(out.field(k), out.field(blk * b));
            }
        }
    }

    #[test]
    fn time_grid_checks() {
        assert!(TimeGrid::new(1.0, 12, Some(3)).is_err());
        assert!(TimeGrid::new(0.0, 8, None).is_err());
        let g = TimeGrid::dyadic(2.0, 3, 4).unwrap();
        assert_eq!(g.n_steps(), 32);
        assert_eq!(g.block_size(3).unwrap(), 4);
        assert!(g.block_size(6).is_err());
    }

    #[test]
    fn constant_trajectory_projection() {
        let grid = SpatialGrid::new(5).unwrap();
        let time = TimeGrid::dyadic(1.0, 3, 4).unwrap();
        let c = Field::constant(grid, 2.5);
        let seed = Field::constant(grid, -1.0);
        let out = proj_shifted(&Trajectory::constant(time, &c), &HaarLevel::new(3, seed.clone()).unwrap()).unwrap();
        for k in 0..4 {
            assert_eq!(out.field(k), &seed);
        }
        for k in 4..=32 {
            assert_eq!(out.field(k), &c);
        }
    }

    #[test]
    fn ramp_block_averages_are_midpoints() {
        let grid = SpatialGrid::new(3).unwrap();
        let time = TimeGrid::dyadic(1.0, 2, 16).unwrap();
        let ramp = Trajectory::scalar_times(time, |t| t, &Field::constant(grid, 1.0));
        let out = proj_shifted(&ramp, &HaarLevel::zero_seed(2, grid).unwrap()).unwrap();
        for blk in 1..4usize {
            let v = out.field(blk * 16).values()[0];
            let closed = (2 * blk - 1) as f64 / 8.0;
            // fine-grid quadrature oracle of the previous block
            let a = (blk - 1) as f64 / 4.0;
            let m = 4096;
            let quad: f64 = (0..m).map(|i| a + (i as f64 + 0.5) / (4.0 * m as f64)).sum::<f64>() / m as f64;
            assert!((v - closed).abs() < 1e-14);
            assert!((quad - closed).abs() < 1e-12);
        }
        assert_piecewise_constant(&out, 2);
    }

    #[test]
    fn double_application_matches_two_pass_oracle() {
        let grid = SpatialGrid::new(4).unwrap();
        let n = 3;
        let time = TimeGrid::dyadic(1.0, n, 8).unwrap();
        let b = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            // random piecewise constant input
            let blocks: Vec<Field> =
                (0..=8).map(|_| Field::from_fn(grid, |_| rng.random_range(-2.0..2.0))).collect();
            let fields = (0..=64).map(|k| blocks[(k / b).min(8)].clone()).collect();
            let x = Trajectory::new(time, fields).unwrap();
            let lvl = HaarLevel::zero_seed(n, grid).unwrap();
            let once = proj_shifted(&x, &lvl).unwrap();
            let twice = proj_shifted(&once, &lvl).unwrap();
            // brute force: block k of proj(x) is the trapezoid mean of block k-1 of x
            for k in 2..8usize {
                let prev = once.field((k - 1) * b);
                let next = once.field(k * b);
                let oracle = prev.scale(1.0 - 0.5 / b as f64).add(&next.scale(0.5 / b as f64));
                let got = twice.field(k * b);
                for (a, o) in got.values().iter().zip(oracle.values()) {
                    assert!((a - o).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn fractional_constant_and_ramp() {
        let grid = SpatialGrid::new(6).unwrap();
        let time = TimeGrid::new(1.0, 64, None).unwrap();
        let c = Field::constant(grid, 3.0);
        let cn = grid::norm(&c, Norm::L2).unwrap();
        let (semi, lp) = fractional_parts(&Trajectory::constant(time, &c), 0.3, 2.0, Norm::L2, Execution::Sequential).unwrap();
        assert_eq!(semi, 0.0);
        assert!((lp.sqrt() - cn).abs() < 1e-12);
        assert!(fractional_seminorm(&Trajectory::constant(time, &c), 1.0, 2.0, Norm::L2, Execution::Sequential).is_err());

        // ramp t v, α = 1/4, p = 2: continuum double integral
        // ∫∫ |t-s|^{2-1.5} = ∫∫|t-s|^{1/2} ds dt = 8/15, plus ∫ t² = 1/3
        let v = Field::from_fn(grid, |x| (std::f64::consts::PI * x).sin());
        let vn2 = grid::norm(&v, Norm::L2).unwrap().powi(2);
        let exact = ((8.0 / 15.0 + 1.0 / 3.0) * vn2).sqrt();
        let mut last = f64::NAN;
        for steps in [256usize, 1024] {
            let ramp = Trajectory::scalar_times(TimeGrid::new(1.0, steps, None).unwrap(), |t| t, &v);
            last = fractional_seminorm(&ramp, 0.25, 2.0, Norm::L2, Execution::Parallel).unwrap();
        }
        assert!((last - exact).abs() < 0.02 * exact, "{last} vs {exact}");
    }

    #[test]
    fn smooth_rate_is_first_order() {
        let grid = SpatialGrid::new(5).unwrap();
        let time = TimeGrid::new(1.0, 1 << 12, Some(7)).unwrap();
        let v = Field::from_fn(grid, |x| x * (1.0 - x));
        let x = Trajectory::scalar_times(time, |t| (2.0 * std::f64::consts::PI * t).sin(), &v);
        let rep = haar_rate_experiment(&[x], 2..=7, 2.0, Norm::L2, SeedRule::InitialValue, Execution::Sequential).unwrap();
        assert!(rep.median_slope.unwrap() <= -0.9);
        assert!(haar_rate_experiment(&[], 2..=3, 2.0, Norm::L2, SeedRule::Zero, Execution::Sequential).is_err());
    }

    #[test]
    fn constant_rate_is_exact() {
        let grid = SpatialGrid::new(5).unwrap();
        let time = TimeGrid::new(1.0, 1 << 8, Some(7)).unwrap();
        let c = Trajectory::constant(time, &Field::constant(grid, 0.7));
        let rep = haar_rate_experiment(&[c], 2..=7, 2.0, Norm::L2, SeedRule::InitialValue, Execution::Sequential).unwrap();
        assert!(rep.is_exact());
        assert_eq!(rep.median_slope, None);
    }

    #[test]
    fn csv_roundtrip() {
        let grid = SpatialGrid::new(3).unwrap();
        let time = TimeGrid::new(0.5, 4, None).unwrap();
        let x = random_traj(time, grid, 1);
        let mut buf = Vec::new();
        x.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.fields(), x.fields());
        assert_eq!(back.time().n_steps(), 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn adaptedness(seed in any::<u64>(), blk in 0usize..8) {
            let grid = SpatialGrid::new(4).unwrap();
            let time = TimeGrid::dyadic(1.0, 3, 8).unwrap();
            let x = random_traj(time, grid, seed);
            let mut y = x.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
            for k in blk * 8 + 1..(blk + 1) * 8 {
                y.fields_mut()[k] = Field::from_fn(grid, |_| rng.random_range(-5.0..5.0));
            }
            let lvl = HaarLevel::new(3, Field::constant(grid, 0.3)).unwrap();
            let px = proj_shifted(&x, &lvl).unwrap();
            let py = proj_shifted(&y, &lvl).unwrap();
            for k in 0..(blk + 1) * 8 {
                prop_assert_eq!(px.field(k), py.field(k));
            }
        }

        #[test]
        fn zero_seed_linearity_and_contraction(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let grid = SpatialGrid::new(4).unwrap();
            let time = TimeGrid::dyadic(1.0, 3, 4).unwrap();
            let x = random_traj(time, grid, seed);
            let y = random_traj(time, grid, seed.wrapping_add(1));
            let lvl = HaarLevel::zero_seed(3, grid).unwrap();
            let lhs = proj_shifted(&x.scale(a).add(&y.scale(b)), &lvl).unwrap();
            let rhs = proj_shifted(&x, &lvl).unwrap().scale(a).add(&proj_shifted(&y, &lvl).unwrap().scale(b));
            for (f, g) in lhs.fields().iter().zip(rhs.fields()) {
                prop_assert!(f.sub(g).max_abs() < 1e-12);
            }
            for (p, which) in [(2.0, Norm::L2), (3.0, Norm::Hminus1), (1.5, Norm::Lp(3.0))] {
                let px = proj_shifted(&x, &lvl).unwrap();
                prop_assert!(px.lp_norm(p, which) <= x.lp_norm(p, which) * (1.0 + 1e-12));
            }
            assert_piecewise_constant(&proj_shifted(&x, &lvl).unwrap(), 3);
        }
    }
}
