//! Q-Wiener noise: direct Gaussian increments for the solvers and the
//! Lévy–Ciesielski series for checking the construction itself.
//!
//! The covariance is diagonal in the Dirichlet sine basis `ψ_i = √2 sin(iπx)`,
//! so `W(t) = Σ_i sqrt(λ_i) ψ_i β_i(t)` with independent scalar Brownian
//! motions `β_i`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, SpatialGrid};
use crate::haar::TimeGrid;
use crate::par::Execution;
use crate::rng;

/// Diagonal trace-class covariance in the sine basis.
#[derive(Clone, Debug, PartialEq)]
pub struct QWienerSpec {
    eigenvalues: Vec<f64>,
    decay_exponent: Option<f64>,
}

impl QWienerSpec {
    /// `λ_i = amplitude · i^{-2s}`, `i = 1..=n_modes`. Requires `s > 1/2`.
    pub fn power_law(n_modes: usize, amplitude: f64, s: f64) -> Result<Self> {
        if !(s > 0.5) {
            return Err(Error::InvalidParameter(format!(
                "decay exponent {s} <= 1/2 does not give a trace-class covariance"
            )));
        }
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidParameter(format!("amplitude {amplitude} must be positive")));
        }
        let eig = (1..=n_modes).map(|i| amplitude * (i as f64).powf(-2.0 * s)).collect();
        let mut q = Self::from_eigenvalues(eig)?;
        q.decay_exponent = Some(s);
        Ok(q)
    }

    /// Power law scaled so that the truncated trace equals `trace`.
    pub fn with_trace(n_modes: usize, trace: f64, s: f64) -> Result<Self> {
        let unit = Self::power_law(n_modes, 1.0, s)?;
        Self::power_law(n_modes, trace / unit.trace(), s)
    }

    pub fn from_eigenvalues(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidParameter("need at least one mode".into()));
        }
        if let Some(l) = eigenvalues.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidParameter(format!("eigenvalue {l} must be positive and finite")));
        }
        Ok(Self { eigenvalues, decay_exponent: None })
    }

    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn decay_exponent(&self) -> Option<f64> {
        self.decay_exponent
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Sampled sine modes. Fails if the grid cannot resolve every mode.
    pub fn basis(&self, grid: SpatialGrid) -> Result<ModeBasis> {
        ModeBasis::new(grid, self.n_modes())
    }
}

/// Sine modes `ψ_1..ψ_I` sampled on a grid.
#[derive(Clone, Debug)]
pub struct ModeBasis {
    grid: SpatialGrid,
    modes: Vec<Field>,
}

impl ModeBasis {
    pub fn new(grid: SpatialGrid, n_modes: usize) -> Result<Self> {
        if n_modes > grid.n_interior() {
            return Err(Error::InvalidParameter(format!(
                "{n_modes} modes exceed {} interior nodes",
                grid.n_interior()
            )));
        }
        Ok(Self { grid, modes: (1..=n_modes).map(|i| grid.sine_mode(i)).collect() })
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn modes(&self) -> &[Field] {
        &self.modes
    }

    /// `Σ_i c_i ψ_i`.
    pub fn assemble(&self, coeffs: &[f64]) -> Field {
        debug_assert_eq!(coeffs.len(), self.modes.len());
        let mut out = Field::zeros(self.grid);
        for (c, m) in coeffs.iter().zip(&self.modes) {
            if *c != 0.0 {
                out.axpy(*c, m);
            }
        }
        out
    }

    /// `(u, ψ_i)_{L²}` for every retained mode.
    pub fn project(&self, u: &Field) -> Vec<f64> {
        self.modes.iter().map(|m| m.dot(u)).collect()
    }
}

/// Per-step, per-mode increments `ΔW[k][i] ~ N(0, λ_i dt)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisePath {
    time: TimeGrid,
    n_modes: usize,
    seed: u64,
    increments: Vec<f64>,
}

impl NoisePath {
    pub fn new(time: TimeGrid, n_modes: usize, seed: u64, increments: Vec<f64>) -> Result<Self> {
        if increments.len() != time.n_steps() * n_modes {
            return Err(Error::Malformed(format!(
                "{} increments for {} steps x {n_modes} modes",
                increments.len(),
                time.n_steps()
            )));
        }
        Ok(Self { time, n_modes, seed, increments })
    }

    pub fn zeros(time: TimeGrid, n_modes: usize) -> Self {
        Self { time, n_modes, seed: 0, increments: vec![0.0; time.n_steps() * n_modes] }
    }

    pub fn time(&self) -> TimeGrid {
        self.time
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Mode increments of step `k` (from `t_k` to `t_{k+1}`).
    pub fn step(&self, k: usize) -> &[f64] {
        &self.increments[k * self.n_modes..(k + 1) * self.n_modes]
    }

    /// Increment of step `k` as a spatial field.
    pub fn field(&self, k: usize, basis: &ModeBasis) -> Field {
        basis.assemble(self.step(k))
    }

    /// Sum of each run of `factor` consecutive steps: the same Brownian path
    /// seen on a coarser mesh.
    pub fn coarsen(&self, factor: usize) -> Result<NoisePath> {
        let time = self.time.coarsen(factor)?;
        let m = self.n_modes;
        let mut inc = vec![0.0; time.n_steps() * m];
        for (k, chunk) in self.increments.chunks(m).enumerate() {
            let row = &mut inc[(k / factor) * m..(k / factor + 1) * m];
            for (r, c) in row.iter_mut().zip(chunk) {
                *r += c;
            }
        }
        Ok(Self { time, n_modes: m, seed: self.seed, increments: inc })
    }

    /// Copy with every increment from step `k` on set to zero.
    pub fn truncated_after(&self, k: usize) -> NoisePath {
        let mut out = self.clone();
        let start = (k * self.n_modes).min(out.increments.len());
        out.increments[start..].iter_mut().for_each(|v| *v = 0.0);
        out
    }

    /// Copy rescaled by `c` (used to switch the noise off or dampen it).
    pub fn scaled(&self, c: f64) -> NoisePath {
        let mut out = self.clone();
        out.increments.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Header `n_steps, n_modes, seed` as little-endian u64, then row-major
    /// little-endian f64 increments.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.time.n_steps() as u64).to_le_bytes())?;
        w.write_all(&(self.n_modes as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for v in &self.increments {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Inverse of [`NoisePath::write_binary`]; the horizon is not stored.
    pub fn read_binary<R: Read>(mut r: R, horizon: f64) -> Result<NoisePath> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let n_steps = next(&mut r)? as usize;
        let n_modes = next(&mut r)? as usize;
        let seed = next(&mut r)?;
        let len = n_steps
            .checked_mul(n_modes)
            .ok_or_else(|| Error::Malformed("noise header overflows".into()))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != len * 8 {
            return Err(Error::Malformed(format!("expected {} payload bytes, found {}", len * 8, bytes.len())));
        }
        let increments = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        NoisePath::new(TimeGrid::new(horizon, n_steps, None)?, n_modes, seed, increments)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_binary(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path, horizon: f64) -> Result<NoisePath> {
        NoisePath::read_binary(std::io::BufReader::new(std::fs::File::open(path)?), horizon)
    }
}

/// Independent `N(0, λ_i dt)` increments; mode `i` is drawn from its own
/// stream of `seed`.
pub fn sample_increments(spec: &QWienerSpec, time: TimeGrid, seed: u64) -> NoisePath {
    let n = time.n_steps();
    let m = spec.n_modes();
    let dt = time.dt();
    let mut inc = vec![0.0; n * m];
    for (i, lambda) in spec.eigenvalues.iter().enumerate() {
        let s = (lambda * dt).sqrt();
        let mut r = rng::stream_rng(seed, i as u64);
        for k in 0..n {
            inc[k * m + i] = s * rng::standard_normal(&mut r);
        }
    }
    NoisePath { time, n_modes: m, seed, increments: inc }
}

/// `n_paths` increment paths, path `p` seeded by `rng::path_seed(master, p)`.
pub fn sample_ensemble(spec: &QWienerSpec, time: TimeGrid, master: u64, n_paths: usize, exec: Execution) -> Vec<NoisePath> {
    exec.map(n_paths, |p| sample_increments(spec, time, rng::path_seed(master, p as u64)))
}

fn check_index(k: u64, n: u32) -> Result<()> {
    if n == 0 {
        if k != 1 {
            return Err(Error::InvalidParameter(format!("level 0 only has k = 1, got {k}")));
        }
        return Ok(());
    }
    if n > 62 || k % 2 == 0 || k == 0 || k > (1u64 << n) {
        return Err(Error::InvalidParameter(format!("need odd 1 <= k <= 2^{n}, got k = {k}")));
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("t = {t} outside [0,1]")));
    }
    Ok(())
}

/// Haar function `h_{k,n}`: `2^{(n-1)/2}` on `((k-1)2^{-n}, k 2^{-n}]`, its
/// negative on `(k 2^{-n}, (k+1) 2^{-n}]`, zero elsewhere; `h_{1,0} ≡ 1`.
pub fn haar_function(k: u64, n: u32, t: f64) -> Result<f64> {
    check_index(k, n)?;
    check_time(t)?;
    if n == 0 {
        return Ok(1.0);
    }
    let height = ((n as f64 - 1.0) / 2.0).exp2();
    let s = t * (1u64 << n) as f64;
    let k = k as f64;
    Ok(if s > k - 1.0 && s <= k {
        height
    } else if s > k && s <= k + 1.0 {
        -height
    } else {
        0.0
    })
}

/// Schauder function `S_{k,n}(t) = ∫_0^t h_{k,n}`: a tent of height
/// `2^{-(n+1)/2}` centred at `k 2^{-n}`; `S_{1,0}(t) = t`.
pub fn schauder_function(k: u64, n: u32, t: f64) -> Result<f64> {
    check_index(k, n)?;
    check_time(t)?;
    if n == 0 {
        return Ok(t);
    }
    let peak = (-(n as f64 + 1.0) / 2.0).exp2();
    let s = t * (1u64 << n) as f64;
    Ok(peak * (1.0 - (s - k as f64).abs()).max(0.0))
}

/// Streams reserved per mode for the level coefficients.
const LEVEL_STREAMS: u64 = 64;

/// Partial Lévy–Ciesielski sum `B_n` at the dyadic points `j 2^{-n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarBMPath {
    level: u32,
    values: Vec<f64>,
}

impl ScalarBMPath {
    pub fn level(&self) -> u32 {
        self.level
    }

    /// `B_n(j 2^{-n})`, `j = 0..=2^n`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `B_n(t)`; exact since `B_n` is linear between dyadic points of depth `n`.
    pub fn at(&self, t: f64) -> f64 {
        let cells = self.values.len() - 1;
        let s = (t.clamp(0.0, 1.0) * cells as f64).min(cells as f64);
        let j = (s.floor() as usize).min(cells - 1);
        let w = s - j as f64;
        (1.0 - w) * self.values[j] + w * self.values[j + 1]
    }
}

/// Coefficients `ξ_{k,m}` of one mode: `xi[0] = [ξ_{1,0}]`, `xi[m]` holds the
/// `2^{m-1}` coefficients of level `m` ordered by `k = 1, 3, 5, ...`.
fn lc_coefficients(level: u32, seed: u64, mode: u64) -> Vec<Vec<f64>> {
    (0..=level)
        .map(|m| {
            let count = if m == 0 { 1 } else { 1usize << (m - 1) };
            rng::normals(seed, mode * LEVEL_STREAMS + m as u64, count)
        })
        .collect()
}

fn lc_path_for_mode(level: u32, seed: u64, mode: u64) -> ScalarBMPath {
    assert!(level < LEVEL_STREAMS as u32);
    let xi = lc_coefficients(level, seed, mode);
    let mut values = vec![0.0, xi[0][0]];
    // Each level adds tents that vanish on the coarser dyadic points, so the
    // new midpoints are the linear interpolant plus the tent peak.
    for (m, coeffs) in xi.iter().enumerate().skip(1) {
        let peak = (-(m as f64 + 1.0) / 2.0).exp2();
        let mut next = Vec::with_capacity(2 * values.len() - 1);
        for (idx, c) in coeffs.iter().enumerate() {
            next.push(values[idx]);
            next.push(0.5 * (values[idx] + values[idx + 1]) + c * peak);
        }
        next.push(*values.last().unwrap());
        values = next;
    }
    ScalarBMPath { level, values }
}

/// Scalar Brownian motion on `[0,1]` from the Lévy–Ciesielski series up to
/// level `n`. Coefficients are keyed by `(seed, level)`, so paths of
/// different levels with one seed are refinements of each other.
pub fn lc_scalar_bm(level: u32, seed: u64) -> ScalarBMPath {
    lc_path_for_mode(level, seed, 0)
}

/// Q-Wiener process from independent Lévy–Ciesielski paths per mode.
#[derive(Clone, Debug)]
pub struct LcQWiener {
    sqrt_lambda: Vec<f64>,
    paths: Vec<ScalarBMPath>,
    basis: ModeBasis,
}

impl LcQWiener {
    pub fn level(&self) -> u32 {
        self.paths[0].level
    }

    pub fn paths(&self) -> &[ScalarBMPath] {
        &self.paths
    }

    /// `⟨W_n(j 2^{-n}), ψ_i⟩ = sqrt(λ_i) B^{(i)}(j 2^{-n})`, `i` zero-based.
    pub fn coefficient(&self, i: usize, j: usize) -> f64 {
        self.sqrt_lambda[i] * self.paths[i].values[j]
    }

    /// `W_n(j 2^{-n}) = Σ_i sqrt(λ_i) ψ_i B^{(i)}(j 2^{-n})` as a field.
    pub fn field_at(&self, j: usize) -> Field {
        let c: Vec<f64> = (0..self.paths.len()).map(|i| self.coefficient(i, j)).collect();
        self.basis.assemble(&c)
    }

    /// Increments on the dyadic mesh of `[0, T]`, using `W(t) = sqrt(T) B(t/T)`.
    pub fn to_noise_path(&self, horizon: f64, seed: u64) -> Result<NoisePath> {
        let level = self.level();
        let time = TimeGrid::new(horizon, 1usize << level, Some(level))?;
        let m = self.paths.len();
        let scale = horizon.sqrt();
        let mut inc = vec![0.0; time.n_steps() * m];
        for k in 0..time.n_steps() {
            for i in 0..m {
                inc[k * m + i] = scale * (self.coefficient(i, k + 1) - self.coefficient(i, k));
            }
        }
        NoisePath::new(time, m, seed, inc)
    }
}

/// Mode `i` (one-based) uses the scalar construction on its own streams.
pub fn lc_q_wiener(spec: &QWienerSpec, grid: SpatialGrid, level: u32, seed: u64) -> Result<LcQWiener> {
    let basis = spec.basis(grid)?;
    let paths = (1..=spec.n_modes() as u64).map(|i| lc_path_for_mode(level, seed, i)).collect();
    let sqrt_lambda = spec.eigenvalues.iter().map(|l| l.sqrt()).collect();
    Ok(LcQWiener { sqrt_lambda, paths, basis })
}

/// Exceedance probe for the level-`n` coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailProbe {
    /// Frequency of `max_k |ξ_{k,n}|² > 2^{n+1} a² / C₁`.
    pub empirical: f64,
    /// Union bound with the χ²₁ tail `sqrt(2/(πx)) e^{-x/2}`:
    /// `sqrt(C₁/π) 2^{n/2-1} a^{-1} exp(-2^n a² / C₁)`.
    pub analytic_approx: f64,
    /// Same prefactor with exponent `-2^{n+1} a² / C₁`.
    pub analytic_doubled_exponent: f64,
    pub trials: usize,
}

pub fn tail_analytic(n: u32, a: f64, c1: f64) -> f64 {
    if a == 0.0 {
        return f64::INFINITY;
    }
    (c1 / std::f64::consts::PI).sqrt() * (n as f64 / 2.0 - 1.0).exp2() / a * (-(n as f64).exp2() * a * a / c1).exp()
}

pub fn tail_bound_probe(n: u32, a_n: f64, c1: f64, trials: usize, seed: u64, exec: Execution) -> Result<TailProbe> {
    if n < 1 || n > 30 {
        return Err(Error::InvalidParameter(format!("level {n} outside 1..=30")));
    }
    if !(a_n >= 0.0) || !(c1 > 0.0) {
        return Err(Error::InvalidParameter("need a_n >= 0 and C1 > 0".into()));
    }
    let threshold = (n as f64 + 1.0).exp2() * a_n * a_n / c1;
    let per_trial = 1usize << (n - 1);
    const CHUNK: usize = 4096;
    let chunks = trials.div_ceil(CHUNK);
    let hits: usize = exec
        .map(chunks, |c| {
            let mut r = rng::stream_rng(seed, c as u64);
            let count = CHUNK.min(trials - c * CHUNK);
            (0..count)
                .filter(|_| {
                    let mut hit = false;
                    for _ in 0..per_trial {
                        let x = rng::standard_normal(&mut r);
                        hit |= x * x > threshold;
                    }
                    hit
                })
                .count()
        })
        .into_iter()
        .sum();
    let analytic_approx = tail_analytic(n, a_n, c1);
    let analytic_doubled_exponent = if a_n == 0.0 {
        f64::INFINITY
    } else {
        analytic_approx * (-(n as f64).exp2() * a_n * a_n / c1).exp()
    };
    Ok(TailProbe { empirical: hits as f64 / trials as f64, analytic_approx, analytic_doubled_exponent, trials })
}

/// `a_n = sqrt(n 2^{-(n+1)})`.
pub fn proof_a_n(n: u32) -> f64 {
    (n as f64 * (-(n as f64 + 1.0)).exp2()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::mc_mean_stderr;

    #[test]
    fn spec_guards() {
        assert!(QWienerSpec::power_law(8, 1.0, 0.5).is_err());
        assert!(QWienerSpec::power_law(8, 1.0, 0.3).is_err());
        assert!(QWienerSpec::from_eigenvalues(vec![1.0, 0.0]).is_err());
        let q = QWienerSpec::with_trace(10, 0.2, 1.0).unwrap();
        assert!((q.trace() - 0.2).abs() < 1e-15);
        assert!(q.basis(SpatialGrid::new(9).unwrap()).is_err());
    }

    #[test]
    fn basis_is_orthonormal() {
        let grid = SpatialGrid::new(31).unwrap();
        let b = ModeBasis::new(grid, 31).unwrap();
        for i in 0..31 {
            for j in 0..31 {
                let d = b.modes()[i].dot(&b.modes()[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((d - target).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn haar_examples() {
        assert_eq!(haar_function(1, 1, 0.25).unwrap(), 1.0);
        assert_eq!(haar_function(1, 1, 0.75).unwrap(), -1.0);
        assert_eq!(haar_function(3, 2, 0.1).unwrap(), 0.0);
        assert!(haar_function(2, 2, 0.1).is_err());
        assert!(haar_function(1, 1, 1.5).is_err());
        // fine-grid quadrature of products
        let m = 1 << 14;
        let dt = 1.0 / m as f64;
        let idx: Vec<(u64, u32)> = vec![(1, 0), (1, 1), (1, 2), (3, 2), (5, 3), (7, 3)];
        for &(k, n) in &idx {
            for &(k2, n2) in &idx {
                let s: f64 = (0..m)
                    .map(|i| {
                        let t = (i as f64 + 0.5) * dt;
                        haar_function(k, n, t).unwrap() * haar_function(k2, n2, t).unwrap() * dt
                    })
                    .sum();
                let target = if (k, n) == (k2, n2) { 1.0 } else { 0.0 };
                assert!((s - target).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn schauder_examples() {
        for n in 1..6u32 {
            for k in (1..(1u64 << n)).step_by(2) {
                assert_eq!(schauder_function(k, n, 0.0).unwrap(), 0.0);
                let peak_t = k as f64 / (1u64 << n) as f64;
                let peak = schauder_function(k, n, peak_t).unwrap();
                assert!((peak - (-(n as f64 + 1.0) / 2.0).exp2()).abs() < 1e-15);
                let max = (0..=1000).map(|i| schauder_function(k, n, i as f64 / 1000.0).unwrap()).fold(0.0, f64::max);
                assert!(max <= peak + 1e-15);
                // trapezoid integration of the Haar function at 2^-16
                let m = 1usize << 16;
                let steps = (peak_t * m as f64).round() as usize;
                let dt = 1.0 / m as f64;
                let quad: f64 = (0..steps)
                    .map(|i| {
                        let a = haar_function(k, n, i as f64 * dt).unwrap();
                        let b = haar_function(k, n, (i + 1) as f64 * dt).unwrap();
                        0.5 * (a + b) * dt
                    })
                    .sum();
                assert!((quad - peak).abs() < 2.0 * dt * (n as f64).exp2());
            }
        }
    }

    #[test]
    fn lc_matches_direct_schauder_sum() {
        let level = 5;
        let seed = 77;
        let path = lc_scalar_bm(level, seed);
        let xi = lc_coefficients(level, seed, 0);
        for j in 0..=(1usize << level) {
            let t = j as f64 / (1u64 << level) as f64;
            let mut s = xi[0][0] * t;
            for m in 1..=level {
                for (idx, c) in xi[m as usize].iter().enumerate() {
                    s += c * schauder_function(2 * idx as u64 + 1, m, t).unwrap();
                }
            }
            assert!((path.values()[j] - s).abs() < 1e-12);
        }
        assert_eq!(path.values()[0], 0.0);
    }

    #[test]
    fn lc_refinement_is_exact() {
        for seed in 0..5 {
            let paths: Vec<ScalarBMPath> = (0..=12).map(|n| lc_scalar_bm(n, seed)).collect();
            for n in 0..12usize {
                for (j, v) in paths[n].values().iter().enumerate() {
                    assert_eq!(*v, paths[n + 1].values()[2 * j]);
                }
            }
        }
    }

    #[test]
    fn lc_covariance_and_increments() {
        let n_paths = 20_000;
        let level = 4;
        let paths: Vec<ScalarBMPath> = Execution::Parallel.map(n_paths, |s| lc_scalar_bm(level, s as u64));
        for (s, t) in [(0.25, 0.5), (0.5, 0.75), (1.0, 1.0)] {
            let prods: Vec<f64> = paths.iter().map(|p| p.at(s) * p.at(t)).collect();
            let e = mc_mean_stderr(&prods).unwrap();
            assert!((e.mean - f64::min(s, t)).abs() <= 3.0 * e.stderr, "({s},{t}): {e:?}");
        }
        let sq: Vec<f64> = paths.iter().map(|p| (p.at(0.6875) - p.at(0.4375)).powi(2)).collect();
        let e = mc_mean_stderr(&sq).unwrap();
        assert!((e.mean - 0.25).abs() <= 3.0 * e.stderr);
    }

    #[test]
    fn lc_q_wiener_covariance() {
        let grid = SpatialGrid::new(16).unwrap();
        let q = QWienerSpec::power_law(4, 1.0, 1.0).unwrap();
        let level = 3;
        let ws: Vec<LcQWiener> =
            Execution::Parallel.map(20_000, |s| lc_q_wiener(&q, grid, level, s as u64).unwrap());
        let basis = q.basis(grid).unwrap();
        assert_eq!(ws[0].field_at(0), Field::zeros(grid));
        let j = 4; // t = 0.5
        let c1: Vec<f64> = ws.iter().map(|w| basis.modes()[0].dot(&w.field_at(j))).collect();
        let c2: Vec<f64> = ws.iter().map(|w| basis.modes()[1].dot(&w.field_at(j))).collect();
        let e11 = mc_mean_stderr(&c1.iter().map(|a| a * a).collect::<Vec<_>>()).unwrap();
        let e12 = mc_mean_stderr(&c1.iter().zip(&c2).map(|(a, b)| a * b).collect::<Vec<_>>()).unwrap();
        assert!((e11.mean - 0.5 * q.eigenvalues()[0]).abs() <= 3.0 * e11.stderr);
        assert!(e12.mean.abs() <= 3.0 * e12.stderr);
        // the coefficient shortcut equals the projection of the assembled field
        for i in 0..4 {
            assert!((basis.modes()[i].dot(&ws[3].field_at(5)) - ws[3].coefficient(i, 5)).abs() < 1e-12);
        }
    }

    #[test]
    fn increments_statistics() {
        let q = QWienerSpec::power_law(3, 0.5, 1.0).unwrap();
        let time = TimeGrid::new(1.0, 100_000, None).unwrap();
        let path = sample_increments(&q, time, 5);
        let dt = time.dt();
        for i in 0..3 {
            let xs: Vec<f64> = (0..time.n_steps()).map(|k| path.step(k)[i]).collect();
            let e = mc_mean_stderr(&xs).unwrap();
            assert!(e.mean.abs() <= 3.0 * e.stderr);
            let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
            let v = mc_mean_stderr(&sq).unwrap();
            assert!((v.mean - q.eigenvalues()[i] * dt).abs() <= 3.0 * v.stderr);
        }
        let grid = SpatialGrid::new(8).unwrap();
        let basis = q.basis(grid).unwrap();
        let norms: Vec<f64> =
            (0..20_000).map(|k| crate::grid::norm(&path.field(k, &basis), crate::grid::Norm::L2).unwrap().powi(2)).collect();
        let e = mc_mean_stderr(&norms).unwrap();
        assert!((e.mean - q.trace() * dt).abs() <= 3.0 * e.stderr);
    }

    #[test]
    fn increments_reproducible_and_serialisable() {
        let q = QWienerSpec::power_law(5, 1.0, 1.0).unwrap();
        let time = TimeGrid::new(1.0, 64, Some(3)).unwrap();
        let a = sample_increments(&q, time, 11);
        assert_eq!(a, sample_increments(&q, time, 11));
        assert_ne!(a, sample_increments(&q, time, 12));
        let mut buf = Vec::new();
        a.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 64 * 5 * 8);
        assert_eq!(&buf[..8], &64u64.to_le_bytes());
        let back = NoisePath::read_binary(std::io::Cursor::new(&buf), 1.0).unwrap();
        assert_eq!(back.increments(), a.increments());
        assert_eq!(back.seed(), 11);
        assert!(NoisePath::read_binary(std::io::Cursor::new(&buf[..40]), 1.0).is_err());
        let c = a.coarsen(4).unwrap();
        assert_eq!(c.time().n_steps(), 16);
        let direct: f64 = (0..4).map(|k| a.step(k)[2]).sum();
        assert!((c.step(0)[2] - direct).abs() < 1e-15);
    }

    #[test]
    fn tail_probe_examples() {
        let p = tail_bound_probe(4, 0.0, 1.0, 1000, 1, Execution::Sequential).unwrap();
        assert_eq!(p.empirical, 1.0);
        let a = proof_a_n(4);
        let p = tail_bound_probe(4, a, 1.0, 100_000, 2, Execution::Parallel).unwrap();
        let ratio = p.empirical / p.analytic_approx;
        assert!((1.0 / 3.0..=3.0).contains(&ratio), "{p:?}");
        let mut last = f64::INFINITY;
        for i in 1..50 {
            let v = tail_analytic(4, 0.05 * i as f64, 1.0);
            assert!(v < last);
            last = v;
        }
    }
}
